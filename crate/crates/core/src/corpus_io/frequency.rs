use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{io_err, CorpusError, Result};

/// Word → log10 frequency. Absent words are misses, never zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrequencyTable {
    map: HashMap<String, f64>,
}

impl FrequencyTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(word), Some(freq), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(CorpusError::Data(format!(
                    "frequency line {}: expected two tab-separated columns",
                    i + 1
                )));
            };
            let f: f64 = freq.trim().parse().map_err(|_| {
                CorpusError::Data(format!("frequency line {}: bad number {freq:?}", i + 1))
            })?;
            if !f.is_finite() {
                return Err(CorpusError::Data(format!(
                    "frequency line {}: non-finite value",
                    i + 1
                )));
            }
            map.insert(word.trim().to_lowercase(), f);
        }
        Ok(FrequencyTable { map })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn insert(&mut self, word: &str, log10_freq: f64) {
        assert!(log10_freq.is_finite());
        self.map.insert(word.to_lowercase(), log10_freq);
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.map.get(&word.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<_> = self.map.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        rows.iter().map(|(w, f)| format!("{w}\t{f}\n")).collect()
    }
}
