//! Run configuration: a flat `key = value` document.
//!
//! ```text
//! # comments start with '#'
//! eps_max = 0.5
//! ratio = 0.7
//! count = 24
//! mollifier_q = 0
//! mollifier_radius = 1.0
//! tol_slope = 0.25
//! tol_res = 0.15
//! tol_assoc = 1e-6
//! ode_rel_tol = 1e-10
//! out = out
//! demo = ppwave
//! ```

use std::path::{Path, PathBuf};

use crate::domain::EpsilonGrid;
use crate::error::{Error, Result};
use crate::mollifier::{Mollifier, MAX_MOMENT_ORDER};

/// Classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Slack on fitted slopes.
    pub tol_slope: f64,
    /// Largest accepted RMS residual of a log-log fit.
    pub tol_res: f64,
    /// Cauchy-tail tolerance for association limits.
    pub tol_assoc: f64,
    /// Relative tolerance of the ODE integrator.
    pub ode_rel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_slope: 0.25, tol_res: 0.15, tol_assoc: 1e-6, ode_rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: EpsilonGrid,
    pub mollifier_q: usize,
    pub mollifier_radius: f64,
    pub tolerances: Tolerances,
    pub out_dir: PathBuf,
    pub demo: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: EpsilonGrid::default(),
            mollifier_q: 0,
            mollifier_radius: 1.0,
            tolerances: Tolerances::default(),
            out_dir: PathBuf::from("out"),
            demo: None,
        }
    }
}

pub const DEMOS: [&str; 4] = ["ppwave", "torus-flow", "pointvalue", "schwartz-obstruction"];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut grid = (cfg.grid.eps_max(), cfg.grid.ratio(), cfg.grid.len());
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "eps_max" => grid.0 = number(key, value)?,
                "ratio" => grid.1 = number(key, value)?,
                "count" => grid.2 = value.parse().map_err(|_| bad(key, value))?,
                _ => cfg.set(key, value).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("line {}: {m}", lineno + 1)),
                    other => other,
                })?,
            }
        }
        cfg.grid = EpsilonGrid::new(grid.0, grid.1, grid.2)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key (grid keys go through `grid`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mollifier_q" => self.mollifier_q = value.parse().map_err(|_| bad(key, value))?,
            "mollifier_radius" => self.mollifier_radius = number(key, value)?,
            "tol_slope" => self.tolerances.tol_slope = number(key, value)?,
            "tol_res" => self.tolerances.tol_res = number(key, value)?,
            "tol_assoc" => self.tolerances.tol_assoc = number(key, value)?,
            "ode_rel_tol" => self.tolerances.ode_rel_tol = number(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "demo" => self.demo = Some(value.to_string()),
            "grid" => self.grid = EpsilonGrid::parse(value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if self.mollifier_q > MAX_MOMENT_ORDER {
            return Err(Error::Config(format!("mollifier_q = {} exceeds {MAX_MOMENT_ORDER}", self.mollifier_q)));
        }
        if !(self.mollifier_radius > 0.0 && self.mollifier_radius <= 10.0) {
            return Err(Error::Config(format!("mollifier_radius = {} outside (0, 10]", self.mollifier_radius)));
        }
        if !(t.tol_slope > 0.0 && t.tol_slope < 1.0) {
            return Err(Error::Config(format!("tol_slope = {} outside (0, 1)", t.tol_slope)));
        }
        if !(t.tol_res > 0.0 && t.tol_res <= 1.0) {
            return Err(Error::Config(format!("tol_res = {} outside (0, 1]", t.tol_res)));
        }
        if !(t.tol_assoc > 0.0 && t.tol_assoc <= 1e-2) {
            return Err(Error::Config(format!("tol_assoc = {} outside (0, 1e-2]", t.tol_assoc)));
        }
        if !(t.ode_rel_tol >= 1e-14 && t.ode_rel_tol <= 1e-6) {
            return Err(Error::Config(format!("ode_rel_tol = {} outside [1e-14, 1e-6]", t.ode_rel_tol)));
        }
        if let Some(d) = &self.demo {
            if !DEMOS.contains(&d.as_str()) {
                return Err(Error::Config(format!("unknown demo '{d}' (expected one of {})", DEMOS.join(", "))));
            }
        }
        Ok(())
    }

    pub fn mollifier(&self) -> Result<Mollifier> {
        Mollifier::shared(self.mollifier_q, self.mollifier_radius)
    }

    /// The document form, readable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let t = &self.tolerances;
        let mut s = format!(
            "eps_max = {:?}\nratio = {:?}\ncount = {}\nmollifier_q = {}\nmollifier_radius = {:?}\n\
             tol_slope = {:?}\ntol_res = {:?}\ntol_assoc = {:?}\node_rel_tol = {:?}\nout = {}\n",
            self.grid.eps_max(),
            self.grid.ratio(),
            self.grid.len(),
            self.mollifier_q,
            self.mollifier_radius,
            t.tol_slope,
            t.tol_res,
            t.tol_assoc,
            t.ode_rel_tol,
            self.out_dir.display()
        );
        if let Some(d) = &self.demo {
            s.push_str(&format!("demo = {d}\n"));
        }
        s
    }
}

fn number(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| bad(key, value))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value))
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value '{value}' for '{key}'"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(RunConfig::parse("").unwrap(), cfg);
    }

    #[test]
    fn parses_and_validates() {
        let cfg = RunConfig::parse("# test\ncount = 12\nmollifier_q = 4 # kernel\ndemo = torus-flow\n").unwrap();
        assert_eq!(cfg.grid.len(), 12);
        assert_eq!(cfg.mollifier_q, 4);
        assert_eq!(cfg.demo.as_deref(), Some("torus-flow"));
        assert!(RunConfig::parse("mollifier_q = 9").is_err());
        assert!(RunConfig::parse("ratio = 1.5").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("tol_res").is_err());
        assert!(RunConfig::parse("demo = nothing").is_err());
    }
}
