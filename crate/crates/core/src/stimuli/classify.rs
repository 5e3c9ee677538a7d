use serde::{Deserialize, Serialize};

use super::{Allomorph, Consistency, FeatureInventory, PhonForm, Result, StimuliError};

/// Vowels that can carry the epenthetic [ɪ] of [ɪz] once stress marks are
/// stripped. Reduced vowels are transcribed as AH in ARPAbet lexicons.
const I_CLASS: [&str; 4] = ["IH", "IX", "AH", "AX"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllomorphClass {
    pub allomorph: Option<Allomorph>,
    pub consistency: Consistency,
}

/// Detects a word-final [z], [s] or [ɪz] and checks it against the
/// voicing/sibilance rules:
///
/// * [z] after voiced non-sibilants,
/// * [s] after voiceless non-sibilants,
/// * [ɪz] after sibilants.
///
/// An I-class vowel + /z/ ending counts as [ɪz] only when a sibilant
/// precedes the vowel; otherwise the /z/ is a plain [z] after a vowel
/// (`julia's`, `knees`).
pub fn classify_allomorph(form: &PhonForm, inventory: &FeatureInventory) -> Result<AllomorphClass> {
    let labels = form.labels();
    if labels.is_empty() {
        return Err(StimuliError::EmptyForm);
    }
    for l in labels {
        inventory.features(l)?;
    }
    let n = labels.len();
    let na = |allomorph| AllomorphClass {
        allomorph,
        consistency: Consistency::NotApplicable,
    };
    let verdict = |allomorph, ok: bool| AllomorphClass {
        allomorph: Some(allomorph),
        consistency: if ok {
            Consistency::Consistent
        } else {
            Consistency::Inconsistent
        },
    };

    let last = labels[n - 1].as_str();
    let final_allomorph = match last {
        "Z" => Allomorph::Z,
        "S" => Allomorph::S,
        _ => return Ok(na(None)),
    };
    if n == 1 {
        return Ok(na(Some(final_allomorph)));
    }
    if final_allomorph == Allomorph::Z
        && n >= 3
        && I_CLASS.contains(&labels[n - 2].as_str())
        && inventory.features(&labels[n - 3])?.sibilant
    {
        return Ok(verdict(Allomorph::Iz, true));
    }
    let prev = inventory.features(&labels[n - 2])?;
    let ok = match final_allomorph {
        Allomorph::Z => prev.voiced && !prev.sibilant,
        _ => !prev.voiced && !prev.sibilant,
    };
    Ok(verdict(final_allomorph, ok))
}
