//! Piecewise-constant Poisson point patterns with known ground truth.
//!
//! Randomness comes from a single ChaCha8 stream seeded with
//! `ChaCha8Rng::seed_from_u64(seed)` and is consumed in a fixed order, so a
//! spec and seed always give the same points:
//!
//! 1. background: one Poisson count over the box, then that many points,
//! 2. each hotspot in order: one Poisson count, then its points.
//!
//! A uniform variate is `(next_u64 >> 11) * 2^-53`. A Poisson count with mean
//! `m` is the number of unit exponential inter-arrival times (`-ln(1 - u)`)
//! whose running sum stays at or below `m`; the draw that overshoots is
//! consumed too. Points use one variate per coordinate, disks use
//! `r = R sqrt(u1)`, `θ = 2π u2`, Gaussian hotspots use Box–Muller
//! (`sqrt(-2 ln(1 - u1))` times `cos`/`sin` of `2π u2`) and drop points that
//! land outside the box.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Interval;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HotspotShape {
    Rectangle { half_widths: Vec<f64> },
    Disk { radius: f64 },
    /// Isotropic Gaussian bump; the rate is its peak value.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HotspotRate {
    /// Total rate inside the hotspot is this multiple of the background.
    Multiplier(f64),
    /// Rate added on top of the background.
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub shape: HotspotShape,
    pub center: Vec<f64>,
    pub rate: HotspotRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub bounds: Vec<Interval>,
    /// Points per unit coordinate volume.
    pub background_rate: f64,
    #[serde(default)]
    pub hotspots: Vec<Hotspot>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The reference two-hotspot field: a 4 × 4 box at 50 points per unit
    /// area with two disks of radius 0.55 at eight times that rate
    /// (about 1 500 points in total).
    pub fn two_hotspots(seed: u64) -> Self {
        let disk = |x: f64, y: f64| Hotspot {
            shape: HotspotShape::Disk { radius: 0.55 },
            center: vec![x, y],
            rate: HotspotRate::Multiplier(8.0),
        };
        Self {
            dim: 2,
            bounds: vec![Interval::new(0.0, 4.0); 2],
            background_rate: 50.0,
            hotspots: vec![disk(1.2, 1.2), disk(2.8, 2.6)],
            seed,
        }
    }

    fn added_rate(&self, h: &Hotspot) -> f64 {
        match h.rate {
            HotspotRate::Multiplier(m) => (m - 1.0) * self.background_rate,
            HotspotRate::Absolute(r) => r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(1..=2).contains(&self.dim) {
            return bad(format!("dimension must be 1 or 2, got {}", self.dim));
        }
        if self.bounds.len() != self.dim || self.bounds.iter().any(|b| !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi)) {
            return bad("bounds must be one proper interval per axis".into());
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return bad(format!("background rate must be non-negative, got {}", self.background_rate));
        }
        for (k, h) in self.hotspots.iter().enumerate() {
            if h.center.len() != self.dim {
                return bad(format!("hotspot {k} center has the wrong dimension"));
            }
            let rate = self.added_rate(h);
            if !(rate.is_finite() && rate >= 0.0) {
                return bad(format!("hotspot {k} has a negative rate"));
            }
            let half: Vec<f64> = match &h.shape {
                HotspotShape::Rectangle { half_widths } => {
                    if half_widths.len() != self.dim || half_widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                        return bad(format!("hotspot {k} rectangle needs {} positive half widths", self.dim));
                    }
                    half_widths.clone()
                }
                HotspotShape::Disk { radius } | HotspotShape::Gaussian { sigma: radius } => {
                    if !(*radius > 0.0 && radius.is_finite()) {
                        return bad(format!("hotspot {k} needs a positive size"));
                    }
                    match h.shape {
                        HotspotShape::Gaussian { .. } => vec![0.0; self.dim],
                        _ => vec![*radius; self.dim],
                    }
                }
            };
            for d in 0..self.dim {
                let b = self.bounds[d];
                if h.center[d] - half[d] < b.lo || h.center[d] + half[d] > b.hi {
                    return bad(format!("hotspot {k} extends outside the box"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTruth {
    pub region: String,
    /// Rate added by this region, points per unit volume.
    pub rate: f64,
    pub expected_count: f64,
    pub drawn_count: u64,
    /// Points kept inside the box (differs from `drawn_count` only for Gaussians).
    pub kept_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub regions: Vec<RegionTruth>,
    pub n_points: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dim: usize,
    pub bounds: Vec<Interval>,
    /// Row-major coordinates.
    pub coords: Vec<f64>,
    pub truth: GroundTruth,
}

struct Stream(ChaCha8Rng);

impl Stream {
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }

    fn poisson(&mut self, mean: f64) -> u64 {
        let mut t = 0.0;
        let mut k = 0;
        loop {
            t += self.exponential();
            if t > mean {
                return k;
            }
            k += 1;
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let dim = spec.dim;
    let mut rng = Stream(ChaCha8Rng::seed_from_u64(spec.seed));
    let mut coords = Vec::new();
    let mut regions = Vec::new();

    let box_volume: f64 = spec.bounds.iter().map(Interval::width).product();
    let expected = spec.background_rate * box_volume;
    let n = rng.poisson(expected);
    for _ in 0..n {
        for b in &spec.bounds {
            coords.push(b.lo + rng.uniform() * b.width());
        }
    }
    regions.push(RegionTruth {
        region: "background".into(),
        rate: spec.background_rate,
        expected_count: expected,
        drawn_count: n,
        kept_count: n,
    });

    for (k, h) in spec.hotspots.iter().enumerate() {
        let rate = spec.added_rate(h);
        let volume = match &h.shape {
            HotspotShape::Rectangle { half_widths } => half_widths.iter().map(|w| 2.0 * w).product(),
            HotspotShape::Disk { radius } if dim == 1 => 2.0 * radius,
            HotspotShape::Disk { radius } => std::f64::consts::PI * radius * radius,
            HotspotShape::Gaussian { sigma } => (std::f64::consts::TAU * sigma * sigma).powf(dim as f64 / 2.0),
        };
        let expected = rate * volume;
        let n = rng.poisson(expected);
        let mut kept = 0;
        for _ in 0..n {
            let p = sample_hotspot(&mut rng, h, dim);
            if p.iter().zip(&spec.bounds).all(|(x, b)| b.contains(*x)) {
                coords.extend(p);
                kept += 1;
            }
        }
        regions.push(RegionTruth {
            region: format!("hotspot {k}"),
            rate,
            expected_count: expected,
            drawn_count: n,
            kept_count: kept,
        });
    }

    let mut warnings = Vec::new();
    if coords.is_empty() {
        warnings.push("no points were generated".to_string());
    }
    Ok(SyntheticData {
        dim,
        bounds: spec.bounds.clone(),
        truth: GroundTruth {
            spec: spec.clone(),
            regions,
            n_points: coords.len() / dim,
            warnings,
        },
        coords,
    })
}

fn sample_hotspot(rng: &mut Stream, h: &Hotspot, dim: usize) -> Vec<f64> {
    let c = &h.center;
    match &h.shape {
        HotspotShape::Rectangle { half_widths } => (0..dim)
            .map(|d| c[d] - half_widths[d] + 2.0 * half_widths[d] * rng.uniform())
            .collect(),
        HotspotShape::Disk { radius } if dim == 1 => vec![c[0] + radius * (2.0 * rng.uniform() - 1.0)],
        HotspotShape::Disk { radius } => {
            let r = radius * rng.uniform().sqrt();
            let t = std::f64::consts::TAU * rng.uniform();
            vec![c[0] + r * t.cos(), c[1] + r * t.sin()]
        }
        HotspotShape::Gaussian { sigma } => {
            let r = (-2.0 * (1.0 - rng.uniform()).ln()).sqrt();
            let t = std::f64::consts::TAU * rng.uniform();
            if dim == 1 {
                vec![c[0] + sigma * r * t.cos()]
            } else {
                vec![c[0] + sigma * r * t.cos(), c[1] + sigma * r * t.sin()]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_only(rate: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            dim: 2,
            bounds: vec![Interval::new(0.0, 10.0); 2],
            background_rate: 0.0,
            hotspots: vec![Hotspot {
                shape: HotspotShape::Rectangle {
                    half_widths: vec![1.0, 0.5],
                },
                center: vec![5.0, 5.0],
                rate: HotspotRate::Absolute(rate),
            }],
            seed,
        }
    }

    #[test]
    fn poisson_mean_of_rectangle_hotspot() {
        // r = 30, A = 2 → mean 60.
        let runs = 200;
        let total: usize = (0..runs)
            .map(|s| generate_synthetic(&rect_only(30.0, s)).unwrap().truth.n_points)
            .sum();
        let mean = total as f64 / runs as f64;
        assert!((mean - 60.0).abs() < 3.0 * (60.0f64 / runs as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn points_stay_in_their_regions() {
        let data = generate_synthetic(&rect_only(30.0, 3)).unwrap();
        for p in data.coords.chunks(2) {
            assert!((4.0..=6.0).contains(&p[0]) && (4.5..=5.5).contains(&p[1]));
        }
    }

    #[test]
    fn zero_rate_warns() {
        let data = generate_synthetic(&rect_only(0.0, 1)).unwrap();
        assert!(data.coords.is_empty());
        assert_eq!(data.truth.warnings.len(), 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&SyntheticSpec::two_hotspots(11)).unwrap();
        let b = generate_synthetic(&SyntheticSpec::two_hotspots(11)).unwrap();
        let c = generate_synthetic(&SyntheticSpec::two_hotspots(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.coords, c.coords);
        assert!((1200..1800).contains(&a.truth.n_points), "{}", a.truth.n_points);
    }

    #[test]
    fn multiplier_sets_total_rate() {
        let spec = SyntheticSpec::two_hotspots(0);
        assert_eq!(spec.added_rate(&spec.hotspots[0]), 350.0);
    }

    #[test]
    fn invalid_specs() {
        let mut s = SyntheticSpec::two_hotspots(0);
        s.hotspots[0].center = vec![0.1, 0.1];
        assert!(matches!(generate_synthetic(&s), Err(Error::InvalidSpec(_))));
        let mut s = SyntheticSpec::two_hotspots(0);
        s.hotspots[0].rate = HotspotRate::Multiplier(0.5);
        assert!(generate_synthetic(&s).is_err());
        let mut s = SyntheticSpec::two_hotspots(0);
        s.bounds[0] = Interval::new(1.0, 1.0);
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn gaussian_and_one_dimensional_shapes() {
        let spec = SyntheticSpec {
            dim: 1,
            bounds: vec![Interval::new(0.0, 10.0)],
            background_rate: 5.0,
            hotspots: vec![
                Hotspot {
                    shape: HotspotShape::Gaussian { sigma: 0.5 },
                    center: vec![3.0],
                    rate: HotspotRate::Absolute(40.0),
                },
                Hotspot {
                    shape: HotspotShape::Disk { radius: 1.0 },
                    center: vec![7.0],
                    rate: HotspotRate::Multiplier(5.0),
                },
            ],
            seed: 5,
        };
        let data = generate_synthetic(&spec).unwrap();
        assert!(data.coords.iter().all(|x| (0.0..=10.0).contains(x)));
        assert_eq!(data.truth.regions.len(), 3);
        assert!((data.truth.regions[1].expected_count - 40.0 * (std::f64::consts::TAU * 0.25).sqrt()).abs() < 1e-12);
    }
}
