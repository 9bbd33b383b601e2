//! Run configuration, shared by the CLI flags and the JSON config file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::clusters::DEFAULT_THRESHOLD_RATIO;
use crate::geometry::{AdjacencyMode, Interval};
use crate::{Error, Result};

pub const DEFAULT_EXPAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsSpec {
    /// Data bounding box grown by `expand` times its extent on every side.
    Auto { expand: f64 },
    Explicit(Vec<Interval>),
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec::Auto { expand: DEFAULT_EXPAND }
    }
}

impl BoundsSpec {
    /// `auto`, `auto:0.1`, or `lo,hi[,lo,hi]`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auto" {
            return Ok(Self::default());
        }
        if let Some(f) = s.strip_prefix("auto:") {
            let expand = f
                .parse()
                .map_err(|_| Error::Config(format!("bad expansion fraction {f:?}")))?;
            return Ok(BoundsSpec::Auto { expand });
        }
        let v = parse_list(s)?;
        if v.is_empty() || v.len() % 2 != 0 {
            return Err(Error::Config(format!("bounds need lo,hi pairs, got {s:?}")));
        }
        Ok(BoundsSpec::Explicit(v.chunks(2).map(|c| Interval::new(c[0], c[1])).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumSpec {
    /// Smallest cell spans exactly one (isotropic) quantum.
    #[default]
    AutoMinCell,
    Explicit(Vec<f64>),
}

impl QuantumSpec {
    /// `auto`, `auto-min-cell`, a single value for every axis, or one per axis.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" | "auto-min-cell" => Ok(QuantumSpec::AutoMinCell),
            other => Ok(QuantumSpec::Explicit(parse_list(other)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RasterFormat {
    #[default]
    Csv,
    Binary,
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number {x:?} in {s:?}")))
        })
        .collect()
}

pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    parse_list(&s.replace('x', ","))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dim: usize,
    pub input: Option<PathBuf>,
    pub bounds: BoundsSpec,
    pub quantum: QuantumSpec,
    /// Log-prior added per block; negative values favor fewer blocks.
    pub penalty: f64,
    pub threshold_ratio: f64,
    pub grid: Option<Vec<usize>>,
    pub raster_format: RasterFormat,
    /// Seeds the duplicate jitter.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit_history: bool,
    pub emit_cells: bool,
    pub adjacency: AdjacencyMode,
    /// Jitter duplicate points instead of rejecting them.
    pub jitter_duplicates: bool,
    pub max_steps: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            input: None,
            bounds: BoundsSpec::default(),
            quantum: QuantumSpec::default(),
            penalty: 0.0,
            threshold_ratio: DEFAULT_THRESHOLD_RATIO,
            grid: None,
            raster_format: RasterFormat::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            emit_history: false,
            emit_cells: false,
            adjacency: AdjacencyMode::default(),
            jitter_duplicates: false,
            max_steps: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Widens a single quantum value or grid size to every axis.
    pub fn normalize(&mut self) {
        if let QuantumSpec::Explicit(q) = &mut self.quantum {
            if q.len() == 1 && self.dim > 1 {
                *q = vec![q[0]; self.dim];
            }
        }
        if let Some(g) = &mut self.grid {
            if g.len() == 1 && self.dim > 1 {
                *g = vec![g[0]; self.dim];
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=2).contains(&self.dim) {
            return bad(format!("dim must be 1 or 2, got {}", self.dim));
        }
        match &self.bounds {
            BoundsSpec::Auto { expand } if !(expand.is_finite() && *expand >= 0.0) => {
                return bad(format!("bounds expansion must be non-negative, got {expand}"));
            }
            BoundsSpec::Explicit(b) if b.len() != self.dim => {
                return bad(format!("{} bound pairs given for dim {}", b.len(), self.dim));
            }
            BoundsSpec::Explicit(b) if b.iter().any(|i| !(i.lo.is_finite() && i.hi.is_finite() && i.lo < i.hi)) => {
                return bad("every bound needs lo < hi".into());
            }
            _ => {}
        }
        if let QuantumSpec::Explicit(q) = &self.quantum {
            if q.len() != self.dim || q.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad(format!("quantum needs {} positive values, got {q:?}", self.dim));
            }
        }
        if !self.penalty.is_finite() {
            return bad("penalty must be finite".into());
        }
        if !(self.threshold_ratio.is_finite() && self.threshold_ratio > 1.0) {
            return bad(format!("threshold must exceed 1, got {}", self.threshold_ratio));
        }
        if let Some(g) = &self.grid {
            if g.len() != self.dim || g.iter().any(|&r| r == 0) {
                return bad(format!("grid needs {} positive sizes, got {g:?}", self.dim));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_flags() {
        assert_eq!(BoundsSpec::parse("auto").unwrap(), BoundsSpec::Auto { expand: 0.05 });
        assert_eq!(BoundsSpec::parse("auto:0.1").unwrap(), BoundsSpec::Auto { expand: 0.1 });
        assert_eq!(
            BoundsSpec::parse("0,10,-1,1").unwrap(),
            BoundsSpec::Explicit(vec![Interval::new(0.0, 10.0), Interval::new(-1.0, 1.0)])
        );
        assert!(BoundsSpec::parse("0,10,3").is_err());
        assert_eq!(QuantumSpec::parse("auto-min-cell").unwrap(), QuantumSpec::AutoMinCell);
        assert_eq!(QuantumSpec::parse("0.5").unwrap(), QuantumSpec::Explicit(vec![0.5]));
        assert_eq!(parse_grid("100x50").unwrap(), vec![100, 50]);
        assert_eq!(parse_grid("20").unwrap(), vec![20]);
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig {
            dim: 1,
            input: Some("points.csv".into()),
            bounds: BoundsSpec::Explicit(vec![Interval::new(0.0, 10.0)]),
            quantum: QuantumSpec::Explicit(vec![0.1]),
            penalty: -0.3,
            threshold_ratio: 3.0,
            grid: Some(vec![64]),
            raster_format: RasterFormat::Binary,
            seed: 99,
            out_dir: "results".into(),
            emit_history: true,
            emit_cells: true,
            adjacency: AdjacencyMode::Edge,
            jitter_duplicates: true,
            max_steps: Some(4),
        };
        let text = crate::io::to_json_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        let default_text = crate::io::to_json_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json(&default_text).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg = RunConfig::from_json(r#"{"dim": 1, "quantum": {"explicit": [0.5]}}"#).unwrap();
        assert_eq!(cfg.dim, 1);
        assert_eq!(cfg.threshold_ratio, 2.0);
        assert_eq!(cfg.bounds, BoundsSpec::default());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.quantum = QuantumSpec::Explicit(vec![0.5]);
        assert!(cfg.validate().is_err());
        cfg.normalize();
        assert!(cfg.validate().is_ok());
        cfg.threshold_ratio = 1.0;
        assert!(cfg.validate().is_err());
        cfg.threshold_ratio = 2.0;
        cfg.dim = 3;
        assert!(cfg.validate().is_err());
        cfg.dim = 2;
        cfg.grid = Some(vec![10]);
        assert!(cfg.validate().is_err());
        cfg.normalize();
        assert_eq!(cfg.grid, Some(vec![10, 10]));
    }
}
