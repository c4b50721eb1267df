//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::alpha::AlphaMethod;
use crate::dynamics::{CouplingMethod, Variant};
use crate::error::{Error, Result};
use crate::lattice::PairPotential;
use crate::types::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Cell lengths per axis; `None` uses the largest element extent.
    pub cell_size: Option<Vec<f64>>,
    pub anchors: Vec<Point>,
    pub alpha_method: AlphaMethod,
    pub coupling_method: CouplingMethod,
    pub variant: Variant,
    pub dt: f64,
    pub steps: usize,
    /// Gaussian amplitude of the initial `u_y`; `None` means `0.1 r0`.
    pub amplitude: Option<f64>,
    /// Gaussian width; `None` means `8 r0`.
    pub width: Option<f64>,
    pub center: Point,
    pub alpha_min: f64,
    pub epsilon: f64,
    pub exponent_n: f64,
    pub exponent_m: f64,
    pub r0: f64,
    /// Bond cutoff as a multiple of `r0`.
    pub neighbor_cutoff: f64,
    pub snapshot_steps: Vec<usize>,
    /// Also run the all-pairs search in `prep` and record the speedup.
    pub brute_force_check: bool,
}

impl Default for Config {
    fn default() -> Self {
        let lj = PairPotential::default();
        Config {
            cell_size: None,
            anchors: Vec::new(),
            alpha_method: AlphaMethod::Direct,
            coupling_method: CouplingMethod::Wcm,
            variant: Variant::ArlequinDirect,
            dt: 0.04,
            steps: 220,
            amplitude: None,
            width: None,
            center: [50.0, 50.0, 0.0],
            alpha_min: 1e-3,
            epsilon: lj.epsilon,
            exponent_n: lj.n,
            exponent_m: lj.m,
            r0: lj.r0,
            neighbor_cutoff: 1.1,
            snapshot_steps: vec![120, 220],
            brute_force_check: false,
        }
    }
}

fn reals(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: '{t}' is not a number"))))
        .collect()
}

fn point(key: &str, v: &str) -> Result<Point> {
    let r = reals(key, v)?;
    if r.is_empty() || r.len() > 3 {
        return Err(Error::Config(format!("{key}: expected 1 to 3 coordinates")));
    }
    let mut p = [0.0; 3];
    p[..r.len()].copy_from_slice(&r);
    Ok(p)
}

fn real(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
}

fn fmt_point(p: &Point) -> String {
    format!("{},{},{}", p[0], p[1], p[2])
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            c.set(key.trim(), value.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "cell_size" => self.cell_size = Some(reals(key, v)?),
            "anchors" => {
                self.anchors =
                    v.split(';').filter(|s| !s.trim().is_empty()).map(|s| point(key, s)).collect::<Result<_>>()?
            }
            "alpha_method" => self.alpha_method = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "coupling_method" => self.coupling_method = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "variant" => self.variant = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "dt" => self.dt = real(key, v)?,
            "steps" => self.steps = v.parse().map_err(|_| Error::Config(format!("steps: '{v}'")))?,
            "amplitude" => self.amplitude = Some(real(key, v)?),
            "width" => self.width = Some(real(key, v)?),
            "center" => self.center = point(key, v)?,
            "alpha_min" => self.alpha_min = real(key, v)?,
            "epsilon" => self.epsilon = real(key, v)?,
            "exponent_n" => self.exponent_n = real(key, v)?,
            "exponent_m" => self.exponent_m = real(key, v)?,
            "r0" => self.r0 = real(key, v)?,
            "neighbor_cutoff" => self.neighbor_cutoff = real(key, v)?,
            "snapshot_steps" => {
                self.snapshot_steps = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("snapshot_steps: '{s}'"))))
                    .collect::<Result<_>>()?
            }
            "brute_force_check" => {
                self.brute_force_check = v.parse().map_err(|_| Error::Config(format!("brute_force_check: '{v}'")))?
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..0.5).contains(&self.alpha_min) {
            return Err(Error::Config(format!("alpha_min must lie in [0, 0.5), got {}", self.alpha_min)));
        }
        if let Some(l) = &self.cell_size {
            if l.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Config("cell_size entries must be positive".into()));
            }
        }
        if !(self.neighbor_cutoff >= 1.0) {
            return Err(Error::Config("neighbor_cutoff is a multiple of r0 and must be >= 1".into()));
        }
        self.potential().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn potential(&self) -> Result<PairPotential> {
        PairPotential::new(self.epsilon, self.exponent_n, self.exponent_m, self.r0)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude.unwrap_or(0.1 * self.r0)
    }

    pub fn width(&self) -> f64 {
        self.width.unwrap_or(8.0 * self.r0)
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(l) = &self.cell_size {
            let l: Vec<String> = l.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "cell_size = {}", l.join(","));
        }
        if !self.anchors.is_empty() {
            let a: Vec<String> = self.anchors.iter().map(fmt_point).collect();
            let _ = writeln!(s, "anchors = {}", a.join(";"));
        }
        let _ = writeln!(s, "alpha_method = {}", self.alpha_method);
        let _ = writeln!(s, "coupling_method = {}", self.coupling_method);
        let _ = writeln!(s, "variant = {}", self.variant);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "steps = {}", self.steps);
        if let Some(a) = self.amplitude {
            let _ = writeln!(s, "amplitude = {a}");
        }
        if let Some(w) = self.width {
            let _ = writeln!(s, "width = {w}");
        }
        let _ = writeln!(s, "center = {}", fmt_point(&self.center));
        let _ = writeln!(s, "alpha_min = {}", self.alpha_min);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "exponent_n = {}", self.exponent_n);
        let _ = writeln!(s, "exponent_m = {}", self.exponent_m);
        let _ = writeln!(s, "r0 = {}", self.r0);
        let _ = writeln!(s, "neighbor_cutoff = {}", self.neighbor_cutoff);
        let steps: Vec<String> = self.snapshot_steps.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "snapshot_steps = {}", steps.join(","));
        let _ = writeln!(s, "brute_force_check = {}", self.brute_force_check);
        s
    }

    /// Key/value pairs of [`Config::to_text`].
    pub fn entries(&self) -> BTreeMap<String, String> {
        self.to_text()
            .lines()
            .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let c = Config {
            anchors: vec![[50.0, 50.0, 0.0], [1.5, -2.0, 0.0]],
            cell_size: Some(vec![5.5, 5.5]),
            amplitude: Some(0.2),
            ..Config::default()
        };
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(Config::parse("cg_tolerence = 1e-9"), Err(Error::Config(_))));
        assert!(Config::parse("alpha_min = 0.6").is_err());
        assert!(Config::parse("dt = 0").is_err());
    }
}
