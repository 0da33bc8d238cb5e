//! Experiment reports as `key = value` text.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{PipelineError, Result};
use crate::formats::write_atomically;

/// Aggregated results of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Config echo in file order.
    pub config: Vec<(String, String)>,
    /// Facts about the data and resolved channel (`records`, `p1`, ...).
    pub resolved: Vec<(String, String)>,
    pub accuracies: Vec<f64>,
    /// One line per representation handed to the classifier.
    pub handoffs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.accuracies)
    }

    /// Sample standard deviation (n − 1); 0 for a single run.
    pub fn std_accuracy(&self) -> f64 {
        sample_std(&self.accuracies)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# ldprepr experiment report\n");
        for (k, v) in self.config.iter().chain(&self.resolved) {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (k, acc) in self.accuracies.iter().enumerate() {
            let _ = writeln!(out, "run_{k}_accuracy = {acc}");
        }
        let _ = writeln!(out, "mean_accuracy = {}", self.mean_accuracy());
        let _ = writeln!(out, "std_accuracy = {}", self.std_accuracy());
        for (k, h) in self.handoffs.iter().enumerate() {
            let _ = writeln!(out, "handoff_{k} = {h}");
        }
        let _ = writeln!(out, "wall_clock_seconds = {}", self.wall_clock_seconds);
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_text();
        write_atomically(path.as_ref(), |w| {
            std::io::Write::write_all(w, text.as_bytes())
        })
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// A parsed report file: keys in sorted order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportFile {
    pub entries: BTreeMap<String, String>,
}

impl ReportFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::parse(origin, i + 1, "expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(PipelineError::parse(
                    origin,
                    i + 1,
                    format!("duplicate key {k:?}"),
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// `run_<k>_accuracy` values in run order.
    pub fn accuracies(&self) -> Vec<f64> {
        (0..)
            .map_while(|k| self.get_f64(&format!("run_{k}_accuracy")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats() {
        assert_eq!(mean(&[0.5, 0.7]), 0.6);
        assert!((sample_std(&[0.5, 0.7]) - 0.1414213562373095).abs() < 1e-15);
        assert_eq!(sample_std(&[0.9]), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let r = Report {
            config: vec![("mode".into(), "ldpnn".into())],
            resolved: vec![("q".into(), "0.25".into())],
            accuracies: vec![0.8, 0.9, 0.85],
            handoffs: vec!["run 0 train perturbed".into()],
            wall_clock_seconds: 1.5,
        };
        let f = ReportFile::parse(&r.to_text(), Path::new("r")).unwrap();
        assert_eq!(f.get("mode"), Some("ldpnn"));
        assert_eq!(f.accuracies(), vec![0.8, 0.9, 0.85]);
        assert_eq!(f.get_f64("mean_accuracy"), Some(r.mean_accuracy()));
        assert_eq!(f.get_f64("wall_clock_seconds"), Some(1.5));
    }
}
