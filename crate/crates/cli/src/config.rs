//! Plain-text `key = value` run configuration.
//!
//! Parsing is fail-closed: unknown keys are rejected on load, and keys that
//! the selected scenario never reads are rejected when the scenario finishes
//! reading its inputs.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bae_core::model::parse_angular_frequency;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every key the tool understands.
pub const KEYS: &[&str] = &[
    // physical parameters, frequencies as "<v> Hz" / "<v> MHz" / "<v> rad/s"
    "omega_c",
    "omega_m",
    "kappa",
    "gamma",
    "g",
    "epsilon",
    "eta",
    "n_bar",
    "temperature",
    "q",
    // drive
    "drive",
    "amplitude",
    "mu",
    "phi",
    "tones",
    "tone_file",
    "samples",
    // stability
    "nu",
    "eps",
    "mod_phase",
    "chi",
    // integration
    "dt",
    "duration",
    "transient",
    "seed",
    "trajectories",
    "record_every",
    "n_c",
    "n_m",
    "lo_phase",
    "lo_strength",
    "theta",
    "scheme",
    "hamiltonian",
    // acceptance tolerances
    "tolerance.cancellation",
    "tolerance.perturbation_abs",
    "tolerance.multitone_rel",
    "tolerance.multitone_ratio",
    "tolerance.threshold_rel",
    "tolerance.steady_state_rel",
    "tolerance.riccati_abs",
    "tolerance.adiabatic_rel",
    "tolerance.cavity_factor",
];

#[derive(Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
    dir: PathBuf,
}

impl RunConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.values.is_empty() {
            return Err(CliError::Config(format!("{} defines no keys", path.display())));
        }
        cfg.dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    i + 1
                )));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::Config(format!("unknown key `{k}` on line {}", i + 1)));
            }
            if v.is_empty() {
                return Err(CliError::Config(format!("key `{k}` has an empty value")));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("key `{k}` given twice")));
            }
        }
        Ok(Self {
            values,
            ..Self::default()
        })
    }

    /// SHA-256 over the sorted `key=value` pairs.
    pub fn hash(&self) -> String {
        let mut canon = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(canon, "{k}={v}");
        }
        Sha256::digest(canon.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(KEYS.contains(&key), "{key}");
        let v = self.values.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Config(format!("key `{key}`: expected {what}, got {v:?}")))
            })
            .transpose()
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        let v = self.parsed::<f64>(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(CliError::Config(format!("key `{key}` must be finite"))),
            v => Ok(v),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, CliError> {
        self.f64(key)?.ok_or_else(|| missing(key))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.parsed(key, "a non-negative integer")
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.parsed(key, "a non-negative integer")
    }

    /// Angular frequency in rad/s.
    pub fn freq(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.raw(key)
            .map(|v| parse_angular_frequency(v).map_err(|e| CliError::Config(format!("key `{key}`: {e}"))))
            .transpose()
    }

    pub fn require_freq(&self, key: &str) -> Result<f64, CliError> {
        self.freq(key)?.ok_or_else(|| missing(key))
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Config(format!("key `{key}`: cannot parse {s:?} as a number")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn require_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.list(key)?.ok_or_else(|| missing(key))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|v| self.dir.join(v))
    }

    /// Reject keys the scenario did not read.
    pub fn finish(&self, scenario: &str) -> Result<(), CliError> {
        let used = self.used.borrow();
        match self.values.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(CliError::Config(format!("key `{k}` is not used by `{scenario}`"))),
            None => Ok(()),
        }
    }
}

pub fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_units() {
        let c = RunConfig::parse("# device\nomega_m = 3.7 MHz  # mech\n\nkappa=1 rad/s\n").unwrap();
        let w = c.require_freq("omega_m").unwrap();
        assert!((w - 2.0 * std::f64::consts::PI * 3.7e6).abs() < 1e-6);
        assert_eq!(c.require_freq("kappa").unwrap(), 1.0);
        c.finish("x").unwrap();
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = RunConfig::parse("kapa = 1\n").unwrap_err();
        assert!(e.to_string().contains("kapa"), "{e}");
        assert!(RunConfig::parse("g = 1\ng = 2\n").is_err());
        assert!(RunConfig::parse("just text\n").is_err());
    }

    #[test]
    fn unread_keys_fail_finish() {
        let c = RunConfig::parse("mu = 0.5\nchi = 1\n").unwrap();
        c.f64("mu").unwrap();
        let e = c.finish("demo").unwrap_err();
        assert!(e.to_string().contains("`chi`"), "{e}");
    }

    #[test]
    fn hash_ignores_order_and_layout() {
        let a = RunConfig::parse("mu = 0.5\nchi=1").unwrap();
        let b = RunConfig::parse("# x\nchi = 1\n  mu=0.5\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RunConfig::parse("mu = 0.6\nchi=1").unwrap().hash());
    }
}
