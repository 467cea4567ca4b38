//! Tunable thresholds shared by the estimators, read from `key = value` text.
//!
//! ```text
//! # comment
//! tol = 0.05
//! d_schedule = 1,2,4,8
//! ```
//!
//! Every report embeds the `Config` it was produced with.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Config {
    /// Tail tolerance for "tends to zero" and "converges" at finite scale.
    pub tol: f64,
    /// Fraction of the index range forming the tail window.
    pub window: f64,
    /// Atoms below this are folded into the residual mass.
    pub lambda_min: f64,
    /// Empirical atoms closer than this are merged.
    pub merge: f64,
    /// Radii probed for the ball-measure spectrum.
    pub d_schedule: Vec<u32>,
    /// Largest radius for negligibility and dispersion profiles.
    pub dmax: u32,
    /// Threshold for globular and residual classification.
    pub epsilon: f64,
    /// Largest radius accepted as "bounded" by the globular test.
    pub globular_radius: u32,
    /// Smallest observed outer magnification counted as expanding.
    pub open_hout: f64,
    /// Rounding residue of `p / lambda` above which the spectrum is unstable.
    pub residue: f64,
    pub inversion_t: f64,
    pub moments_w: usize,
    pub grid: usize,
    /// Subsets drawn when exhaustive expansion checks are out of reach.
    pub samples: usize,
    pub seed: u64,
    pub battery: Option<PathBuf>,
    /// Worker threads. Results do not depend on it, so reports leave it out.
    #[serde(skip)]
    pub parallelism: usize,
    #[serde(skip)]
    pub output: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tol: 0.05,
            window: 0.25,
            lambda_min: 0.05,
            merge: 0.02,
            d_schedule: vec![1, 2, 4, 8],
            dmax: 32,
            epsilon: 0.05,
            globular_radius: 8,
            open_hout: 0.1,
            residue: 0.25,
            inversion_t: 200.0,
            moments_w: 40,
            grid: 32768,
            samples: 4096,
            seed: 0,
            battery: None,
            parallelism: 1,
            output: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "tol",
    "window",
    "lambda_min",
    "merge",
    "d_schedule",
    "dmax",
    "epsilon",
    "globular_radius",
    "open_hout",
    "residue",
    "inversion_t",
    "moments_w",
    "grid",
    "samples",
    "seed",
    "battery",
    "parallelism",
    "output",
];

fn positive_f64(key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(Error::Input(format!("{key}: expected a positive number, got '{value}'"))),
    }
}

fn positive<T: std::str::FromStr + PartialOrd + Default>(key: &str, value: &str) -> Result<T> {
    match value.parse::<T>() {
        Ok(v) if v > T::default() => Ok(v),
        _ => Err(Error::Input(format!("{key}: expected a positive integer, got '{value}'"))),
    }
}

impl Config {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "tol" => self.tol = positive_f64(key, value)?,
            "window" => {
                let w = positive_f64(key, value)?;
                if w > 1.0 {
                    return Err(Error::Input(format!("window: fraction {w} exceeds 1")));
                }
                self.window = w;
            }
            "lambda_min" => self.lambda_min = positive_f64(key, value)?,
            "merge" => self.merge = positive_f64(key, value)?,
            "d_schedule" => {
                let mut ds = value
                    .split(',')
                    .map(|t| positive::<u32>(key, t.trim()))
                    .collect::<Result<Vec<_>>>()?;
                ds.sort_unstable();
                ds.dedup();
                self.d_schedule = ds;
            }
            "dmax" => self.dmax = positive(key, value)?,
            "epsilon" => self.epsilon = positive_f64(key, value)?,
            "globular_radius" => self.globular_radius = positive(key, value)?,
            "open_hout" => self.open_hout = positive_f64(key, value)?,
            "residue" => self.residue = positive_f64(key, value)?,
            "inversion_t" => self.inversion_t = positive_f64(key, value)?,
            "moments_w" => self.moments_w = positive(key, value)?,
            "grid" => self.grid = positive(key, value)?,
            "samples" => self.samples = positive(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Input(format!("seed: expected an integer, got '{value}'")))?
            }
            "battery" => self.battery = Some(PathBuf::from(value)),
            "parallelism" => self.parallelism = positive(key, value)?,
            "output" => self.output = PathBuf::from(value),
            _ => return Err(Error::Input(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                column: 1,
                message: "expected 'key = value'".into(),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse {
                line: i + 1,
                column: 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut c = Config::default();
        c.apply_text(&text).map_err(|e| Error::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(c)
    }

    /// Renders back into the text format; parsing the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let ds: Vec<String> = self.d_schedule.iter().map(u32::to_string).collect();
        let mut out = format!(
            "tol = {}\nwindow = {}\nlambda_min = {}\nmerge = {}\nd_schedule = {}\ndmax = {}\n\
             epsilon = {}\nglobular_radius = {}\nopen_hout = {}\nresidue = {}\ninversion_t = {}\n\
             moments_w = {}\ngrid = {}\nsamples = {}\nseed = {}\nparallelism = {}\noutput = {}\n",
            self.tol,
            self.window,
            self.lambda_min,
            self.merge,
            ds.join(","),
            self.dmax,
            self.epsilon,
            self.globular_radius,
            self.open_hout,
            self.residue,
            self.inversion_t,
            self.moments_w,
            self.grid,
            self.samples,
            self.seed,
            self.parallelism,
            self.output.display(),
        );
        if let Some(b) = &self.battery {
            out.push_str(&format!("battery = {}\n", b.display()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.apply_text("# tuned\ntol = 0.01\nd_schedule = 8, 2,2\nbattery = b.txt\n").unwrap();
        assert_eq!(c.tol, 0.01);
        assert_eq!(c.d_schedule, vec![2, 8]);
        let mut d = Config::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = Config::default();
        assert!(c.set("tol", "-1").is_err());
        assert!(c.set("window", "2").is_err());
        assert!(c.set("dmax", "0").is_err());
        assert!(c.set("colour", "red").is_err());
        let e = c.apply_text("tol = 0.1\nbogus line\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }
}
