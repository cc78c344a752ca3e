//! Run configuration: a flat TOML key set, overridden by command-line flags.
//!
//! ```toml
//! alpha = 0.5
//! d = 1
//! domain = "interval -1 1"     # or "ball 0,0 1.5", "whole"
//! q = "critical 0.2"           # zero | const C | critical R | cone X R ETA C | power X R P C | gaussian X W C
//! f = "one"                    # one | const C | slab LO HI
//! x = [0.0, 0.5]               # evaluation points; for d > 1 write "0.1,0.2"
//! seed = 7
//! workers = 1
//! n = 20000
//! dt = 0.002
//! t_max = 20.0
//! m = 256
//! k = 1
//! r = 0.2
//! h = 0.05
//! nodes = 96
//! suite = "all"
//!
//! [tolerance]
//! default = 0.0
//! reflection-identity = 0.1
//! ```
//!
//! Point coordinates in `X` are comma-separated. The output path is not part
//! of the hashed configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use qharm_core::domain::{BallSpec, DomainSpec};
use qharm_core::feynman_kac::{BoundaryData, FkConfig, PotentialSpec};
use qharm_core::kernels::StableParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn field(name: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("field `{name}`: {msg}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub alpha: f64,
    pub d: usize,
    pub domain: String,
    pub q: String,
    pub f: String,
    #[serde(deserialize_with = "points_de")]
    pub x: Vec<String>,
    pub seed: u64,
    pub workers: usize,
    pub n: usize,
    pub dt: f64,
    pub t_max: f64,
    pub m: usize,
    pub k: usize,
    pub r: f64,
    pub h: f64,
    pub nodes: usize,
    pub suite: String,
    pub tolerance: BTreeMap<String, f64>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            alpha: 0.5,
            d: 1,
            domain: "interval -1 1".into(),
            q: "zero".into(),
            f: "one".into(),
            x: vec!["0".into()],
            seed: 7,
            workers: 1,
            n: 20_000,
            dt: 2e-3,
            t_max: 20.0,
            m: 256,
            k: 1,
            r: 0.2,
            h: 0.05,
            nodes: 96,
            suite: "all".into(),
            tolerance: BTreeMap::new(),
            out: None,
        }
    }
}

/// `x` entries accept plain numbers as well as coordinate strings.
#[derive(Deserialize)]
#[serde(untagged)]
enum PointEntry {
    Num(f64),
    Text(String),
}

fn points_de<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    let entries = Vec::<PointEntry>::deserialize(d)?;
    Ok(entries
        .into_iter()
        .map(|e| match e {
            PointEntry::Num(v) => v.to_string(),
            PointEntry::Text(s) => s,
        })
        .collect())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form (output path excluded).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(field("workers", "must be positive"));
        }
        if self.n < 2 {
            return Err(field("n", "need at least two paths"));
        }
        if !(self.dt > 0.0) {
            return Err(field("dt", "must be positive"));
        }
        if !(self.t_max >= self.dt) {
            return Err(field("t_max", "must be at least dt"));
        }
        if self.m < 16 {
            return Err(field("m", "need at least 16 nodes"));
        }
        if self.k == 0 || self.k > self.m {
            return Err(field("k", "need 1 ≤ k ≤ m"));
        }
        if !(self.r > 0.0) {
            return Err(field("r", "must be positive"));
        }
        if !(self.h > 0.0) {
            return Err(field("h", "must be positive"));
        }
        if let Some((k, v)) = self.tolerance.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(field(&format!("tolerance.{k}"), format!("must be nonnegative, got {v}")));
        }
        self.params()?;
        self.domain_spec()?;
        self.potential()?;
        self.boundary()?;
        self.points()?;
        Ok(())
    }

    pub fn params(&self) -> Result<StableParams, ConfigError> {
        StableParams::new(self.d, self.alpha).map_err(|e| field("alpha", e))
    }

    pub fn fk(&self) -> FkConfig {
        let mut c = FkConfig::new(self.n, self.dt, self.seed);
        c.t_max = self.t_max;
        c.t_cap = c.t_cap.max(self.t_max);
        c
    }

    pub fn points(&self) -> Result<Vec<Vec<f64>>, ConfigError> {
        self.x
            .iter()
            .map(|s| {
                let p = parse_point(s).map_err(|e| field("x", e))?;
                if p.len() != self.d {
                    return Err(field("x", format!("point `{s}` has {} coordinates, expected d = {}", p.len(), self.d)));
                }
                Ok(p)
            })
            .collect()
    }

    pub fn domain_spec(&self) -> Result<DomainSpec, ConfigError> {
        let w: Vec<&str> = self.domain.split_whitespace().collect();
        let bad = |m: &str| field("domain", format!("{m} in `{}`", self.domain));
        let dom = match w.as_slice() {
            ["interval", a, b] => DomainSpec::interval(num(a).map_err(|e| bad(&e))?, num(b).map_err(|e| bad(&e))?).map_err(|e| bad(&e.to_string()))?,
            ["ball", c, r] => DomainSpec::Ball(
                BallSpec::new(parse_point(c).map_err(|e| bad(&e))?, num(r).map_err(|e| bad(&e))?).map_err(|e| bad(&e.to_string()))?,
            ),
            ["whole"] => DomainSpec::Whole { d: self.d },
            _ => return Err(bad("expected `interval A B`, `ball X R` or `whole`")),
        };
        if dom.dim() != self.d {
            return Err(bad(&format!("dimension {} differs from d = {}", dom.dim(), self.d)));
        }
        Ok(dom)
    }

    /// End points when the domain is an interval.
    pub fn interval(&self) -> Result<(f64, f64), ConfigError> {
        match self.domain_spec()? {
            DomainSpec::Interval { a, b } => Ok((a, b)),
            _ => Err(field("domain", "this command needs an interval")),
        }
    }

    pub fn potential(&self) -> Result<PotentialSpec, ConfigError> {
        let w: Vec<&str> = self.q.split_whitespace().collect();
        let bad = |m: String| field("q", format!("{m} in `{}`", self.q));
        let n = |s: &str| num(s).map_err(&bad);
        let pt = |s: &str| {
            let p = parse_point(s).map_err(&bad)?;
            if p.len() != self.d {
                return Err(bad(format!("centre has {} coordinates, expected {}", p.len(), self.d)));
            }
            Ok(p)
        };
        let core = |r: qharm_core::error::Result<PotentialSpec>| r.map_err(|e| bad(e.to_string()));
        match w.as_slice() {
            ["zero"] => Ok(PotentialSpec::zero()),
            ["const", c] => Ok(PotentialSpec::constant(n(c)?)),
            ["critical", r] => core(PotentialSpec::critical(self.alpha, vec![0.0; self.d], n(r)?)),
            ["cone", x, r, eta, c] => core(PotentialSpec::cone(pt(x)?, n(r)?, n(eta)?, n(c)?)),
            ["power", x, r, p, c] => core(PotentialSpec::ball_power(pt(x)?, n(r)?, n(p)?, n(c)?)),
            ["gaussian", x, w, c] => core(PotentialSpec::gaussian(pt(x)?, n(w)?, n(c)?)),
            _ => Err(bad("unknown potential".into())),
        }
    }

    pub fn boundary(&self) -> Result<BoundaryData, ConfigError> {
        let w: Vec<&str> = self.f.split_whitespace().collect();
        let bad = |m: String| field("f", format!("{m} in `{}`", self.f));
        match w.as_slice() {
            ["one"] => Ok(BoundaryData::constant(1.0)),
            ["const", c] => Ok(BoundaryData::constant(num(c).map_err(bad)?)),
            ["slab", lo, hi] => {
                let (lo, hi) = (num(lo).map_err(&bad)?, num(hi).map_err(&bad)?);
                if !(lo < hi) {
                    return Err(bad("need LO < HI".into()));
                }
                Ok(BoundaryData::slab_indicator(lo, hi))
            }
            _ => Err(bad("expected `one`, `const C` or `slab LO HI`".into())),
        }
    }

    /// Tolerance override for a report: its own entry, then the harness it
    /// belongs to (the part before the first `:`), then `default`.
    pub fn tolerance_for(&self, name: &str) -> Option<f64> {
        let base = name.split(':').next().unwrap_or(name);
        self.tolerance.get(name).or_else(|| self.tolerance.get(base)).or_else(|| self.tolerance.get("default")).copied()
    }
}

fn num(s: &str) -> Result<f64, String> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("`{s}` is not a finite number"))
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|c| num(c.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_hash_ignores_out() {
        let text = "alpha = 1.0\nq = \"cone 0.2 0.6 0.8 0.5\"\nx = [0.1, \"0.3\"]\n[tolerance]\ndefault = 0.1\n";
        let mut cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.x, vec!["0.1", "0.3"]);
        assert_eq!(cfg.tolerance_for("anything"), Some(0.1));
        cfg.validate().unwrap();
        let h = cfg.hash();
        cfg.out = Some("elsewhere.json".into());
        assert_eq!(cfg.hash(), h);
        cfg.seed += 1;
        assert_ne!(cfg.hash(), h);
    }

    #[test]
    fn errors_name_the_field_or_line() {
        let e = RunConfig::from_toml("alpha = 0.5\nbogus = 1\n").unwrap_err();
        assert!(e.0.contains("bogus") && e.0.contains("line 2"), "{e}");
        let cfg = RunConfig { q: "cone 0.2 0.6".into(), ..Default::default() };
        assert!(cfg.validate().unwrap_err().0.contains("`q`"));
        let cfg = RunConfig { domain: "ball 0,0 1".into(), ..Default::default() };
        assert!(cfg.validate().unwrap_err().0.contains("`domain`"));
        let cfg = RunConfig { alpha: 2.5, ..Default::default() };
        assert!(cfg.validate().unwrap_err().0.contains("`alpha`"));
    }
}
