//! Flat key = value experiment configs with '#' comments and SI-unit
//! suffixes (Hz/kHz/MHz/GHz for frequencies, s/ms/us/ns for times).

use std::collections::BTreeMap;
use std::path::Path;

use crate::GateError;

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    pairs: BTreeMap<String, String>,
}

/// Multiplier for a recognized unit suffix.
fn suffix_scale(s: &str) -> Option<f64> {
    match s {
        "Hz" => Some(1.0),
        "kHz" => Some(1.0e3),
        "MHz" => Some(1.0e6),
        "GHz" => Some(1.0e9),
        "s" => Some(1.0),
        "ms" => Some(1.0e-3),
        "us" => Some(1.0e-6),
        "ns" => Some(1.0e-9),
        _ => None,
    }
}

fn parse_scalar(key: &str, raw: &str) -> Result<f64, GateError> {
    let raw = raw.trim();
    let (num, scale) = match raw.rsplit_once(|c: char| c.is_ascii_digit() || c == '.') {
        Some((_, tail)) if !tail.trim().is_empty() => {
            let tail = tail.trim();
            let scale = suffix_scale(tail).ok_or_else(|| {
                GateError::Config(format!("key '{key}': unknown unit suffix '{tail}' in '{raw}'"))
            })?;
            (raw[..raw.len() - tail.len()].trim(), scale)
        }
        _ => (raw, 1.0),
    };
    let value: f64 = num
        .parse()
        .map_err(|_| GateError::Config(format!("key '{key}': cannot parse number from '{raw}'")))?;
    Ok(value * scale)
}

impl ConfigMap {
    pub fn parse_str(text: &str) -> Result<Self, GateError> {
        let mut pairs = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                GateError::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(GateError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(GateError::Config(format!("key '{key}' given more than once")));
            }
        }
        Ok(ConfigMap { pairs })
    }

    pub fn from_file(path: &Path) -> Result<Self, GateError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            GateError::Config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        Self::parse_str(&text)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.pairs.keys().map(|k| k.as_str())
    }

    pub fn get_str(&self, key: &str) -> Result<&str, GateError> {
        self.pairs
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| GateError::Config(format!("missing required key '{key}'")))
    }

    pub fn get_str_or(&self, key: &str, default: &'static str) -> &str {
        self.pairs.get(key).map(|s| s.as_str()).unwrap_or(default)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, GateError> {
        parse_scalar(key, self.get_str(key)?)
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64, GateError> {
        match self.pairs.get(key) {
            Some(raw) => parse_scalar(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_i64(&self, key: &str) -> Result<i64, GateError> {
        let raw = self.get_str(key)?;
        raw.trim()
            .parse()
            .map_err(|_| GateError::Config(format!("key '{key}': expected an integer, got '{raw}'")))
    }

    pub fn get_i64_or(&self, key: &str, default: i64) -> Result<i64, GateError> {
        if self.pairs.contains_key(key) {
            self.get_i64(key)
        } else {
            Ok(default)
        }
    }

    pub fn get_usize_or(&self, key: &str, default: usize) -> Result<usize, GateError> {
        let v = self.get_i64_or(key, default as i64)?;
        usize::try_from(v)
            .map_err(|_| GateError::Config(format!("key '{key}': expected a non-negative integer")))
    }

    pub fn get_u64_or(&self, key: &str, default: u64) -> Result<u64, GateError> {
        let v = self.get_i64_or(key, default as i64)?;
        u64::try_from(v)
            .map_err(|_| GateError::Config(format!("key '{key}': expected a non-negative integer")))
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>, GateError> {
        let raw = self.get_str(key)?;
        let vals: Result<Vec<f64>, _> =
            raw.split(',').map(|item| parse_scalar(key, item)).collect();
        let vals = vals?;
        if vals.is_empty() {
            return Err(GateError::Config(format!("key '{key}': empty list")));
        }
        Ok(vals)
    }

    pub fn get_i64_list(&self, key: &str) -> Result<Vec<i64>, GateError> {
        let raw = self.get_str(key)?;
        raw.split(',')
            .map(|item| {
                item.trim().parse().map_err(|_| {
                    GateError::Config(format!("key '{key}': expected integers, got '{item}'"))
                })
            })
            .collect()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.pairs.contains_key(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_suffixes_and_lists() {
        let cfg = ConfigMap::parse_str(
            "# trap\nomega_x = 4 MHz\nomega_z = 1000 kHz # axial\n\ntau = 2.5 us\n\
             p_list = 9, 17, 33\nnbar_list = 0.0, 0.5, 1\nexperiment = thermal_sweep\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.get_f64("omega_x").unwrap(), 4.0e6);
        assert_eq!(cfg.get_f64("omega_z").unwrap(), 1.0e6);
        assert!((cfg.get_f64("tau").unwrap() - 2.5e-6).abs() < 1e-18);
        assert_eq!(cfg.get_i64_list("p_list").unwrap(), vec![9, 17, 33]);
        assert_eq!(cfg.get_f64_list("nbar_list").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.get_str("experiment").unwrap(), "thermal_sweep");
        assert_eq!(cfg.get_u64_or("seed", 1).unwrap(), 7);
        assert_eq!(cfg.get_f64_or("missing", 0.25).unwrap(), 0.25);
    }

    #[test]
    fn errors_name_the_key() {
        let cfg = ConfigMap::parse_str("x = 3 parsec\n").unwrap();
        let err = cfg.get_f64("x").unwrap_err().to_string();
        assert!(err.contains("'x'") && err.contains("parsec"), "{err}");
        let err = cfg.get_f64("absent").unwrap_err().to_string();
        assert!(err.contains("'absent'"), "{err}");
        assert!(ConfigMap::parse_str("novalue\n").is_err());
        assert!(ConfigMap::parse_str("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn negative_and_exponent_numbers() {
        let cfg = ConfigMap::parse_str("a = -127.1 kHz\nb = 1.3e-4\nc = 7e-5\n").unwrap();
        assert_eq!(cfg.get_f64("a").unwrap(), -127.1e3);
        assert_eq!(cfg.get_f64("b").unwrap(), 1.3e-4);
        assert_eq!(cfg.get_f64("c").unwrap(), 7.0e-5);
    }
}
