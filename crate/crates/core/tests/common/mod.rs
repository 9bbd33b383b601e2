#![allow(dead_code)]

use vblocks::coalesce::{CoalesceOutcome, IterationHistory, Partition};
use vblocks::geometry::{Cell, CellShape, Interval, PointSet};

/// Uniform points in a box from a seeded ChaCha8 stream.
pub fn uniform_points(n: usize, bounds: &[Interval], seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .flat_map(|_| bounds.iter().map(|b| b.lo + (b.hi - b.lo) * rng.random::<f64>()).collect::<Vec<_>>())
        .collect()
}

pub fn unit_square(side: f64) -> Vec<Interval> {
    vec![Interval::new(0.0, side), Interval::new(0.0, side)]
}

pub fn point_set(dim: usize, coords: Vec<f64>, bounds: Vec<Interval>, q: f64) -> PointSet {
    PointSet::new(dim, coords, bounds, vec![q; dim]).unwrap()
}

pub fn brute_nearest(coords: &[f64], dim: usize, q: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in coords.chunks(dim).enumerate() {
        let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Whether `q` lies in the cell, allowing `tol` of slack on each edge.
pub fn cell_contains(cell: &Cell, q: &[f64], tol: f64) -> bool {
    match &cell.shape {
        CellShape::Interval { lo, hi } => q[0] >= lo - tol && q[0] <= hi + tol,
        CellShape::Polygon { vertices } => {
            let n = vertices.len();
            (0..n).all(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                let len = ex.hypot(ey);
                len == 0.0 || (ex * (q[1] - a[1]) - ey * (q[0] - a[0])) / len >= -tol
            })
        }
    }
}

/// Strict increase along the history, increments equal to the recorded
/// factors, and no favorable merge left at the end. Returns the largest
/// increment mismatch.
pub fn check_run(outcome: &CoalesceOutcome) -> Result<f64, String> {
    let h: &IterationHistory = &outcome.history;
    let mut prev = h.initial_log_posterior;
    let mut worst: f64 = 0.0;
    for s in &h.steps {
        if s.total_log_posterior <= prev {
            return Err(format!("step {} did not increase the posterior", s.step));
        }
        let err = (s.total_log_posterior - prev - s.log_merge_factor).abs();
        worst = worst.max(err);
        if err > 1e-10 {
            return Err(format!("step {} increment off by {err:e}", s.step));
        }
        prev = s.total_log_posterior;
    }
    if !outcome.truncated {
        check_halt(&outcome.partition)?;
    }
    Ok(worst)
}

pub fn check_halt(p: &Partition) -> Result<(), String> {
    for (a, b) in p.adjacent_pairs() {
        let f = p.log_merge_factor(a, b).map_err(|e| e.to_string())?;
        if f > 0.0 {
            return Err(format!("blocks {a} and {b} still have merge factor {f:e}"));
        }
    }
    Ok(())
}

pub fn sorted_groups(p: &Partition) -> Vec<Vec<usize>> {
    let mut g: Vec<Vec<usize>> = p
        .blocks()
        .map(|b| {
            let mut c = b.cells.clone();
            c.sort_unstable();
            c
        })
        .collect();
    g.sort();
    g
}
