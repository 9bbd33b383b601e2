//! Ground truth for small problems.
//!
//! [`exact_phi`] evaluates the block posterior as an exact rational, and
//! [`exhaustive_optimum`] enumerates every partition of a small cell complex
//! into connected blocks to find the true maximum of the partition posterior.
//! Both are independent of the floating-point log-gamma route used by the
//! engine.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::geometry::CellComplex;
use crate::{posterior, Error, Result};

/// Largest complex [`exhaustive_optimum`] accepts.
pub const MAX_CELLS: usize = 10;

/// Largest volume [`exact_phi`] accepts.
pub const MAX_EXACT_VOLUME: u64 = 500;

/// `N! (V − N)! / (V + 1)!` as a reduced fraction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactPosterior(BigRational);

impl ExactPosterior {
    pub fn numerator(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    /// Natural log, accurate to a few ulps even when numerator and
    /// denominator overflow `f64`.
    pub fn ln(&self) -> f64 {
        ln_big(self.0.numer().magnitude()) - ln_big(self.0.denom().magnitude())
    }

    pub fn to_f64(&self) -> f64 {
        self.ln().exp()
    }

    fn product(&self, other: &ExactPosterior) -> ExactPosterior {
        ExactPosterior(&self.0 * &other.0)
    }
}

fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_f64().expect("64-bit value fits f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn exact_phi(n: u64, v: u64) -> Result<ExactPosterior> {
    if n > v || v > MAX_EXACT_VOLUME {
        return Err(Error::Domain { n, volume: v as f64 });
    }
    let num = factorial(n) * factorial(v - n);
    let den = factorial(v + 1);
    Ok(ExactPosterior(BigRational::new(num.into(), den.into())))
}

/// The best connected partition of a small complex.
#[derive(Debug, Clone, Serialize)]
pub struct Optimum {
    /// Blocks as sorted cell lists, in lexicographic order.
    pub blocks: Vec<Vec<usize>>,
    pub total_log_posterior: f64,
    /// Exact posterior product (without the penalty), when every cell volume
    /// is an integer number of quanta.
    #[serde(skip)]
    pub exact: Option<ExactPosterior>,
    pub partitions_enumerated: u64,
}

/// Cell volume as an integer number of quanta, if it is one.
fn integer_volume(v: f64) -> Option<u64> {
    let r = v.round();
    ((v - r).abs() <= 1e-9 * v.max(1.0) && r >= 0.0).then_some(r as u64)
}

struct Scorer {
    penalty: f64,
    volumes: Vec<f64>,
    int_volumes: Option<Vec<u64>>,
    log_cache: Vec<Option<f64>>,
    exact_cache: Vec<Option<ExactPosterior>>,
}

impl Scorer {
    fn block_log(&mut self, mask: usize) -> Result<f64> {
        if let Some(v) = self.log_cache[mask] {
            return Ok(v);
        }
        let n = mask.count_ones() as u64;
        let v = match &self.int_volumes {
            Some(vols) => {
                let vol: u64 = bits(mask).map(|c| vols[c]).sum();
                let e = exact_phi(n, vol)?;
                let l = e.ln();
                self.exact_cache[mask] = Some(e);
                l
            }
            None => posterior::log_phi(n, bits(mask).map(|c| self.volumes[c]).sum())?,
        };
        self.log_cache[mask] = Some(v);
        Ok(v)
    }
}

fn bits(mask: usize) -> impl Iterator<Item = usize> {
    (0..usize::BITS as usize).filter(move |&c| mask >> c & 1 == 1)
}

fn is_connected(mask: usize, adj: &[usize]) -> bool {
    let start = mask & mask.wrapping_neg();
    let mut reached = start;
    let mut frontier = start;
    while frontier != 0 {
        let c = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let fresh = adj[c] & mask & !reached;
        reached |= fresh;
        frontier |= fresh;
    }
    reached == mask
}

/// Calls `visit` with every partition of the cells into blocks that are
/// connected in `adj` (bitmask adjacency). Blocks are grown from the smallest
/// unassigned cell, so each partition is produced exactly once.
fn for_each_connected_partition(
    unassigned: usize,
    adj: &[usize],
    blocks: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if unassigned == 0 {
        return visit(blocks);
    }
    let first = unassigned & unassigned.wrapping_neg();
    let rest = unassigned & !first;
    let mut sub = rest;
    loop {
        let block = sub | first;
        if is_connected(block, adj) {
            blocks.push(block);
            for_each_connected_partition(unassigned & !block, adj, blocks, visit)?;
            blocks.pop();
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & rest;
    }
    Ok(())
}

fn adjacency_masks(neighbors: &[Vec<usize>]) -> Vec<usize> {
    neighbors
        .iter()
        .map(|nb| nb.iter().fold(0usize, |m, &j| m | 1 << j))
        .collect()
}

/// Every connected partition of a graph given as neighbor lists.
pub fn connected_partitions(neighbors: &[Vec<usize>]) -> Result<Vec<Vec<Vec<usize>>>> {
    if neighbors.len() > MAX_CELLS {
        return Err(Error::TooLarge {
            max: MAX_CELLS,
            got: neighbors.len(),
        });
    }
    let adj = adjacency_masks(neighbors);
    let mut out = Vec::new();
    for_each_connected_partition((1 << neighbors.len()) - 1, &adj, &mut Vec::new(), &mut |blocks| {
        out.push(blocks.iter().map(|&m| bits(m).collect()).collect());
        Ok(())
    })?;
    Ok(out)
}

fn is_path(neighbors: &[Vec<usize>]) -> bool {
    let n = neighbors.len();
    let edges: usize = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
    let adj = adjacency_masks(neighbors);
    n > 0 && edges == n - 1 && neighbors.iter().all(|nb| nb.len() <= 2) && is_connected((1 << n) - 1, &adj)
}

/// Exhaustive maximum of the partition posterior over connected partitions.
///
/// Ties go to fewer blocks, then to the lexicographically smallest block list.
/// With integer cell volumes and no penalty the comparison is exact.
pub fn exhaustive_optimum(cc: &CellComplex, penalty: f64) -> Result<Optimum> {
    let n = cc.len();
    if n > MAX_CELLS {
        return Err(Error::TooLarge { max: MAX_CELLS, got: n });
    }
    let neighbors: Vec<Vec<usize>> = cc.cells().iter().map(|c| c.neighbors.clone()).collect();
    let adj = adjacency_masks(&neighbors);
    let volumes: Vec<f64> = cc.cells().iter().map(|c| c.volume_quanta).collect();
    let int_volumes: Option<Vec<u64>> = volumes.iter().map(|&v| integer_volume(v)).collect();
    let exact_ranking = int_volumes.is_some() && penalty == 0.0;
    let mut scorer = Scorer {
        penalty,
        volumes,
        int_volumes,
        log_cache: vec![None; 1 << n],
        exact_cache: vec![None; 1 << n],
    };

    struct Best {
        blocks: Vec<Vec<usize>>,
        log: f64,
        exact: Option<ExactPosterior>,
    }
    let mut best: Option<Best> = None;
    let mut count = 0u64;
    for_each_connected_partition((1 << n) - 1, &adj, &mut Vec::new(), &mut |masks| {
        count += 1;
        let mut log = 0.0;
        for &m in masks {
            log += scorer.block_log(m)? + scorer.penalty;
        }
        let exact = scorer.int_volumes.as_ref().map(|_| {
            masks.iter().fold(ExactPosterior(BigRational::one()), |acc, &m| {
                acc.product(scorer.exact_cache[m].as_ref().expect("cached"))
            })
        });
        let mut blocks: Vec<Vec<usize>> = masks.iter().map(|&m| bits(m).collect()).collect();
        blocks.sort();
        let candidate = Best { blocks, log, exact };
        let better = match &best {
            None => true,
            Some(cur) => {
                let by_score = if exact_ranking {
                    candidate.exact.cmp(&cur.exact)
                } else if (candidate.log - cur.log).abs() <= 1e-12 * cur.log.abs().max(1.0) {
                    Ordering::Equal
                } else {
                    candidate.log.total_cmp(&cur.log)
                };
                by_score
                    .then_with(|| cur.blocks.len().cmp(&candidate.blocks.len()))
                    .then_with(|| cur.blocks.cmp(&candidate.blocks))
                    == Ordering::Greater
            }
        };
        if better {
            best = Some(candidate);
        }
        Ok(())
    })?;

    if is_path(&neighbors) {
        assert_eq!(count, 1u64 << (n - 1), "connected partitions of a {n}-path");
    }
    let best = best.expect("at least one partition");
    Ok(Optimum {
        total_log_posterior: best
            .exact
            .as_ref()
            .map_or(best.log, |e| e.ln() + penalty * best.blocks.len() as f64),
        blocks: best.blocks,
        exact: best.exact,
        partitions_enumerated: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_tessellation_1d, Interval, PointSet};

    fn line(points: &[f64], lo: f64, hi: f64, q: f64) -> CellComplex {
        build_tessellation_1d(PointSet::new(1, points.to_vec(), vec![Interval::new(lo, hi)], vec![q]).unwrap()).unwrap()
    }

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn small_exact_values() {
        assert_eq!(exact_phi(1, 2).unwrap().as_ratio(), &ratio(1, 6));
        assert_eq!(exact_phi(0, 1).unwrap().as_ratio(), &ratio(1, 2));
        assert_eq!(exact_phi(2, 4).unwrap().as_ratio(), &ratio(1, 30));
        assert!(exact_phi(3, 2).is_err());
        assert!(exact_phi(1, 501).is_err());
    }

    #[test]
    fn ln_of_huge_ratio() {
        let e = exact_phi(250, 500).unwrap();
        let direct = libm::lgamma(251.0) * 2.0 - libm::lgamma(502.0);
        assert!((e.ln() - direct).abs() < 1e-9, "{} {}", e.ln(), direct);
        assert!(e.denominator().bits() > 500);
    }

    #[test]
    fn path_partition_counts() {
        for k in 1..=MAX_CELLS {
            let nb: Vec<Vec<usize>> = (0..k)
                .map(|i| [i.checked_sub(1), (i + 1 < k).then_some(i + 1)].into_iter().flatten().collect())
                .collect();
            assert_eq!(connected_partitions(&nb).unwrap().len(), 1 << (k - 1));
        }
    }

    #[test]
    fn complete_graph_gives_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
        for k in 1..=MAX_CELLS {
            let nb: Vec<Vec<usize>> = (0..k).map(|i| (0..k).filter(|&j| j != i).collect()).collect();
            assert_eq!(connected_partitions(&nb).unwrap().len(), bell[k]);
        }
    }

    #[test]
    fn single_cell() {
        let opt = exhaustive_optimum(&line(&[4.0], 0.0, 10.0, 1.0), 0.0).unwrap();
        assert_eq!(opt.blocks, vec![vec![0]]);
        assert_eq!(opt.partitions_enumerated, 1);
    }

    #[test]
    fn two_cells_merge() {
        let opt = exhaustive_optimum(&line(&[1.0, 3.0], 0.0, 4.0, 1.0), 0.0).unwrap();
        assert_eq!(opt.blocks, vec![vec![0, 1]]);
        assert_eq!(opt.exact.unwrap().as_ratio(), &ratio(1, 30));
    }

    #[test]
    fn four_point_line() {
        let opt = exhaustive_optimum(&line(&[1.0, 2.0, 3.0, 9.0], 0.0, 10.0, 0.5), 0.0).unwrap();
        assert_eq!(opt.blocks, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(opt.partitions_enumerated, 8);
        // Φ(2,5)·Φ(2,15) = (2!3!/6!)·(2!13!/16!) = 1/60 · 1/1680
        assert_eq!(opt.exact.as_ref().unwrap().as_ratio(), &ratio(1, 100800));
        assert!((opt.total_log_posterior - -(100800f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn too_many_cells() {
        let pts: Vec<f64> = (0..11).map(|i| i as f64 + 0.5).collect();
        assert!(matches!(
            exhaustive_optimum(&line(&pts, 0.0, 11.0, 1.0), 0.0),
            Err(Error::TooLarge { max: 10, got: 11 })
        ));
    }

    #[test]
    fn non_integer_volumes_fall_back() {
        let opt = exhaustive_optimum(&line(&[1.0, 2.0, 3.0, 9.0], 0.0, 10.0, 0.3), 0.0).unwrap();
        assert!(opt.exact.is_none());
        assert!(opt.total_log_posterior.is_finite());
    }
}
