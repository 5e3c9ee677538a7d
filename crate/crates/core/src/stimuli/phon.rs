use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, Allomorph, Result, StimuliError};

const DEFAULT_FEATURES: &str = include_str!("../../data/features.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Features {
    pub voiced: bool,
    pub sibilant: bool,
}

/// Phoneme label → voicing / sibilance.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureInventory {
    map: BTreeMap<String, Features>,
}

impl Default for FeatureInventory {
    /// ARPAbet inventory shipped with the crate.
    fn default() -> Self {
        Self::parse(DEFAULT_FEATURES).expect("bundled feature inventory parses")
    }
}

impl FeatureInventory {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let flag = |s: &str| match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(StimuliError::Inventory {
                    line: i + 1,
                    msg: format!("flag must be 0 or 1, got {s:?}"),
                }),
            };
            if cols.len() != 3 || cols[0].is_empty() {
                return Err(StimuliError::Inventory {
                    line: i + 1,
                    msg: "expected phoneme<TAB>voiced<TAB>sibilant".into(),
                });
            }
            map.insert(
                cols[0].to_uppercase(),
                Features {
                    voiced: flag(cols[1])?,
                    sibilant: flag(cols[2])?,
                },
            );
        }
        Ok(FeatureInventory { map })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    /// Uppercases and strips ARPAbet stress digits (`AH0` → `AH`).
    pub fn normalize(label: &str) -> String {
        label
            .trim()
            .trim_end_matches(|c: char| c.is_ascii_digit())
            .to_uppercase()
    }

    pub fn features(&self, label: &str) -> Result<Features> {
        let key = Self::normalize(label);
        self.map
            .get(&key)
            .copied()
            .ok_or(StimuliError::UnknownPhoneme(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.map.contains_key(&Self::normalize(label))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

/// A normalised phoneme sequence whose labels all resolve in an inventory.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhonForm {
    labels: Vec<String>,
}

impl PhonForm {
    pub fn from_labels<I, S>(labels: I, inventory: &FeatureInventory) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let labels: Vec<String> = labels
            .into_iter()
            .map(|l| {
                let l = l.as_ref();
                inventory.features(l)?;
                Ok(FeatureInventory::normalize(l))
            })
            .collect::<Result<_>>()?;
        if labels.is_empty() {
            return Err(StimuliError::EmptyForm);
        }
        Ok(PhonForm { labels })
    }

    /// Parses whitespace-separated labels, e.g. `"D AO1 T ER0 Z"`.
    pub fn parse(text: &str, inventory: &FeatureInventory) -> Result<Self> {
        Self::from_labels(text.split_whitespace(), inventory)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn last(&self) -> &str {
        self.labels.last().map(String::as_str).unwrap_or("")
    }

    pub fn is_proper_prefix_of(&self, other: &PhonForm) -> bool {
        self.len() < other.len() && other.labels[..self.len()] == self.labels[..]
    }

    /// Removes the trailing allomorph, if the form is long enough to carry
    /// one and a non-empty stem remains.
    pub fn strip_allomorph(&self, a: Allomorph) -> Option<PhonForm> {
        let k = a.suffix_len();
        if self.len() <= k {
            return None;
        }
        Some(PhonForm {
            labels: self.labels[..self.len() - k].to_vec(),
        })
    }
}

impl fmt::Display for PhonForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_inventory_covers_arpabet() {
        let inv = FeatureInventory::default();
        for l in ["AA", "IY1", "ah0", "Z", "ZH", "JH", "CH", "S", "SH", "T", "DH", "NG"] {
            assert!(inv.contains(l), "{l}");
        }
        assert_eq!(inv.features("Z").unwrap(), Features { voiced: true, sibilant: true });
        assert_eq!(inv.features("S").unwrap(), Features { voiced: false, sibilant: true });
        assert_eq!(inv.features("T").unwrap(), Features { voiced: false, sibilant: false });
        assert_eq!(inv.features("EY2").unwrap(), Features { voiced: true, sibilant: false });
    }

    #[test]
    fn unknown_labels_fail() {
        let inv = FeatureInventory::default();
        assert!(matches!(
            PhonForm::parse("D Q Z", &inv),
            Err(StimuliError::UnknownPhoneme(l)) if l == "Q"
        ));
        assert!(matches!(PhonForm::parse("  ", &inv), Err(StimuliError::EmptyForm)));
    }

    #[test]
    fn bad_inventory_lines() {
        assert!(FeatureInventory::parse("A\t1\n").is_err());
        assert!(FeatureInventory::parse("A\t1\t2\n").is_err());
    }

    #[test]
    fn prefix_and_strip() {
        let inv = FeatureInventory::default();
        let shirt = PhonForm::parse("SH ER1 T", &inv).unwrap();
        let shirts = PhonForm::parse("SH ER0 T S", &inv).unwrap();
        assert!(shirt.is_proper_prefix_of(&shirts));
        assert!(!shirts.is_proper_prefix_of(&shirt));
        assert_eq!(shirts.strip_allomorph(Allomorph::S).unwrap(), shirt);
        assert_eq!(shirts.to_string(), "SH ER T S");
    }
}
