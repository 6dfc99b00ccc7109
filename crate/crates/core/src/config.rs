//! `key = value` run configuration files.
//!
//! Blank lines and text after `#` are ignored. Keys use the long flag names
//! of the command line with dashes or underscores, e.g. `az-lo-km = 1000`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::RunConfig;

/// Parse `key = value` lines into ordered pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        pairs.push((normalize_key(k), v.to_string()));
    }
    Ok(pairs)
}

fn normalize_key(k: &str) -> String {
    k.to_ascii_lowercase().replace('-', "_")
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

impl RunConfig {
    /// Set one field by key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let k = key.as_str();
        match k {
            "mu" => self.system.mu = num(k, value)?,
            "lpoint" | "lagrange_point" => self.system.lagrange_point = value.parse()?,
            "family" => self.system.family = value.parse()?,
            "length_unit_km" => self.system.length_unit_km = num(k, value)?,
            "seed" => self.seed = num(k, value)?,
            "n" | "n_points" => self.n_points = num(k, value)?,
            "method" => self.method = num(k, value)?,
            "az_lo_km" => self.solver.az_lo_km = num(k, value)?,
            "az_hi_km" => self.solver.az_hi_km = num(k, value)?,
            "tol_x" => self.solver.tol_x = num(k, value)?,
            "tol_norm" | "tol_norm_accept" => self.solver.tol_norm_accept = num(k, value)?,
            "tol_norm_trigger" => self.solver.tol_norm_trigger = num(k, value)?,
            "grid_points" | "grid_points_per_pass" => self.solver.grid_points_per_pass = num(k, value)?,
            "shrink_factor" => self.solver.shrink_factor = num(k, value)?,
            "max_passes" => self.solver.max_passes = num(k, value)?,
            "halfperiod_bracket_width" => self.solver.halfperiod_bracket_width = num(k, value)?,
            "out" | "out_dir" => self.out_dir = PathBuf::from(value),
            "timing" | "record_timing" => self.record_timing = num(k, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }
}
