//! Greedy cell coalescence.
//!
//! Starting from one block per Voronoi cell, repeatedly merge the adjacent
//! pair of blocks with the largest positive log merge factor and stop when
//! none is positive.
//!
//! Candidates sit in a max-heap and are invalidated lazily: every block has a
//! version stamp, a merge stamps the survivor with a fresh version, and popped
//! entries whose recorded versions no longer match are dropped.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::geometry::{validate_quantization, CellComplex};
use crate::posterior::{self, BlockStats};
use crate::{Error, Result};

/// Merge factors closer than this are treated as tied.
pub const TIE_TOL: f64 = 1e-12;

/// A set of merged cells. The block id is the smallest cell index it has ever
/// held, because the lower id survives every merge.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: usize,
    pub cells: Vec<usize>,
    pub stats: BlockStats,
    pub log_phi: f64,
    pub version: u64,
    neighbors: BTreeSet<usize>,
}

impl Block {
    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.neighbors.iter().copied()
    }

    pub fn is_adjacent(&self, other: usize) -> bool {
        self.neighbors.contains(&other)
    }

    /// Points per unit coordinate volume.
    pub fn density(&self, quantum_volume: f64) -> f64 {
        self.stats.n_points as f64 / (self.stats.volume_quanta * quantum_volume)
    }
}

/// The current set of blocks and their adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    blocks: Vec<Option<Block>>,
    live: usize,
    total_log_posterior: f64,
    version: u64,
    penalty: f64,
    quantum_volume: f64,
    total_volume_quanta: f64,
}

impl Partition {
    /// One block per cell, adjacency copied from the tessellation.
    pub fn init(cc: &CellComplex, penalty: f64) -> Result<Self> {
        validate_quantization(cc).into_result()?;
        let mut blocks = Vec::with_capacity(cc.len());
        let mut total = 0.0;
        for (i, cell) in cc.cells().iter().enumerate() {
            let stats = BlockStats::new(1, cell.volume_quanta).with_penalty(penalty);
            let log_phi = stats.log_phi()?;
            total += log_phi + penalty;
            blocks.push(Some(Block {
                id: i,
                cells: vec![i],
                stats,
                log_phi,
                version: 0,
                neighbors: cell.neighbors.iter().copied().collect(),
            }));
        }
        Ok(Self {
            live: blocks.len(),
            blocks,
            total_log_posterior: total,
            version: 0,
            penalty,
            quantum_volume: cc.quantum_volume(),
            total_volume_quanta: cc.total_volume_quanta(),
        })
    }

    /// A partition with the given cell groups as blocks. Groups need not be
    /// connected; this is for comparing against externally found partitions.
    pub fn from_groups(cc: &CellComplex, groups: &[Vec<usize>], penalty: f64) -> Result<Self> {
        let mut p = Self::init(cc, penalty)?;
        let mut owner: Vec<usize> = (0..cc.len()).collect();
        for g in groups {
            let mut g = g.clone();
            g.sort_unstable();
            for &c in &g[1..] {
                let (a, b) = (owner[g[0]], owner[c]);
                if a != b {
                    p.force_merge(a, b)?;
                    for o in owner.iter_mut().filter(|o| **o == b) {
                        *o = a;
                    }
                }
            }
        }
        Ok(p)
    }

    pub fn block(&self, id: usize) -> Option<&Block> {
        self.blocks.get(id).and_then(Option::as_ref)
    }

    /// Live blocks in id order.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> + '_ {
        self.blocks.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn n_cells(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_log_posterior(&self) -> f64 {
        self.total_log_posterior
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn quantum_volume(&self) -> f64 {
        self.quantum_volume
    }

    pub fn total_volume_quanta(&self) -> f64 {
        self.total_volume_quanta
    }

    /// Incremented on every merge.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Block id owning each cell.
    pub fn cell_to_block(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.blocks.len()];
        for b in self.blocks() {
            for &c in &b.cells {
                owner[c] = b.id;
            }
        }
        owner
    }

    /// Adjacent live pairs `(a, b)` with `a < b`, in lexicographic order.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize)> {
        self.blocks()
            .flat_map(|b| b.neighbors().filter(move |&n| n > b.id).map(move |n| (b.id, n)))
            .collect()
    }

    pub fn log_merge_factor(&self, a: usize, b: usize) -> Result<f64> {
        let (ba, bb) = match (self.block(a), self.block(b)) {
            (Some(x), Some(y)) if a != b => (x, y),
            _ => return Err(Error::InvalidMerge(a, b)),
        };
        posterior::merge_factor_from_parts(&ba.stats, &bb.stats, ba.log_phi, bb.log_phi)
    }

    /// Merges two live, adjacent blocks. The lower id absorbs the higher one.
    /// Returns the log merge factor, which is also the change in the total.
    pub fn merge(&mut self, a: usize, b: usize) -> Result<f64> {
        match self.block(a) {
            Some(block) if block.is_adjacent(b) => {}
            _ => return Err(Error::InvalidMerge(a, b)),
        }
        self.force_merge(a, b)
    }

    fn force_merge(&mut self, a: usize, b: usize) -> Result<f64> {
        let factor = self.log_merge_factor(a, b)?;
        let (keep, gone) = (a.min(b), a.max(b));
        let absorbed = self.blocks[gone].take().expect("live block");
        self.version += 1;
        let version = self.version;
        for &n in &absorbed.neighbors {
            if n == keep {
                continue;
            }
            let nb = self.blocks[n].as_mut().expect("neighbor is live");
            nb.neighbors.remove(&gone);
            nb.neighbors.insert(keep);
        }
        let survivor = self.blocks[keep].as_mut().expect("live block");
        survivor.stats = survivor.stats.merged(&absorbed.stats);
        survivor.log_phi = survivor.stats.log_phi()?;
        survivor.cells.extend(absorbed.cells);
        survivor.neighbors.extend(absorbed.neighbors);
        survivor.neighbors.remove(&keep);
        survivor.neighbors.remove(&gone);
        survivor.version = version;
        self.live -= 1;
        self.total_log_posterior += factor;
        Ok(factor)
    }

    /// Total log posterior recomputed from the block statistics.
    pub fn recompute_total(&self) -> Result<f64> {
        let stats: Vec<BlockStats> = self.blocks().map(|b| b.stats).collect();
        posterior::total_log_posterior(&stats)
    }

    /// Checks every structural invariant against the tessellation it came from.
    pub fn check_invariants(&self, cc: &CellComplex) -> std::result::Result<(), String> {
        let owner = self.cell_to_block();
        if let Some(c) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(format!("cell {c} belongs to no block"));
        }
        let mut seen = vec![false; cc.len()];
        let mut volume_sum = 0.0;
        for b in self.blocks() {
            let mut v = 0.0;
            for &c in &b.cells {
                if std::mem::replace(&mut seen[c], true) {
                    return Err(format!("cell {c} is in two blocks"));
                }
                v += cc.cell(c).volume_quanta;
            }
            if b.stats.n_points != b.cells.len() as u64 {
                return Err(format!("block {} counts {} points for {} cells", b.id, b.stats.n_points, b.cells.len()));
            }
            if (b.stats.volume_quanta - v).abs() > 1e-12 * v.max(1.0) {
                return Err(format!("block {} volume {} != {}", b.id, b.stats.volume_quanta, v));
            }
            volume_sum += b.stats.volume_quanta;
            let expected: BTreeSet<usize> = b
                .cells
                .iter()
                .flat_map(|&c| cc.cell(c).neighbors.iter().map(|&n| owner[n]))
                .filter(|&o| o != b.id)
                .collect();
            if expected != b.neighbors {
                return Err(format!("block {} adjacency {:?} != {:?}", b.id, b.neighbors, expected));
            }
        }
        let total = cc.total_volume_quanta();
        if (volume_sum - total).abs() > 1e-9 * total {
            return Err(format!("block volumes sum to {volume_sum}, box holds {total}"));
        }
        let recomputed = self.recompute_total().map_err(|e| e.to_string())?;
        if (recomputed - self.total_log_posterior).abs() > 1e-8 {
            return Err(format!(
                "cached total {} != recomputed {}",
                self.total_log_posterior, recomputed
            ));
        }
        Ok(())
    }
}

/// Options for [`run_coalescence`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoalesceConfig {
    /// Upper bound on merges; `None` means one fewer than the number of cells.
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryStep {
    pub step: usize,
    /// Surviving block id.
    pub a: usize,
    /// Absorbed block id.
    pub b: usize,
    pub log_merge_factor: f64,
    pub total_log_posterior: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationHistory {
    pub initial_log_posterior: f64,
    pub steps: Vec<HistoryStep>,
}

impl IterationHistory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CoalesceOutcome {
    pub partition: Partition,
    pub history: IterationHistory,
    /// Set when `max_steps` stopped the run while a favorable merge remained.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    factor: f64,
    a: usize,
    b: usize,
    va: u64,
    vb: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap order: larger factor first, then the smaller (a, b) pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.factor
            .total_cmp(&other.factor)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

struct CandidateQueue {
    heap: BinaryHeap<Candidate>,
}

impl CandidateQueue {
    fn new() -> Self {
        Self { heap: BinaryHeap::new() }
    }

    /// Queues the pair if merging it would help. An unfavorable pair is
    /// dropped: its factor can only change when one side merges, and then the
    /// pair is pushed again.
    fn push(&mut self, p: &Partition, x: usize, y: usize) -> Result<()> {
        let (a, b) = (x.min(y), x.max(y));
        let factor = p.log_merge_factor(a, b)?;
        if factor <= 0.0 {
            return Ok(());
        }
        let (va, vb) = (p.blocks[a].as_ref().unwrap().version, p.blocks[b].as_ref().unwrap().version);
        self.heap.push(Candidate { factor, a, b, va, vb });
        Ok(())
    }

    /// Drops stale entries once they dominate the heap.
    fn compact(&mut self, p: &Partition) {
        if self.heap.len() > 4 * p.live + 1024 {
            let heap = std::mem::take(&mut self.heap);
            self.heap = heap.into_iter().filter(|c| Self::is_current(p, c)).collect();
        }
    }

    fn is_current(p: &Partition, c: &Candidate) -> bool {
        matches!((p.block(c.a), p.block(c.b)), (Some(x), Some(y)) if x.version == c.va && y.version == c.vb)
    }

    fn pop_current(&mut self, p: &Partition) -> Option<Candidate> {
        while let Some(c) = self.heap.pop() {
            if Self::is_current(p, &c) {
                return Some(c);
            }
        }
        None
    }

    /// The best current candidate; among factors within [`TIE_TOL`] of the
    /// best, the lexicographically smallest pair wins.
    fn best(&mut self, p: &Partition) -> Option<Candidate> {
        let top = self.pop_current(p)?;
        let mut tied = vec![top];
        while let Some(c) = self.heap.peek() {
            if c.factor < top.factor - TIE_TOL {
                break;
            }
            let c = self.heap.pop().unwrap();
            if !Self::is_current(p, &c) {
                continue;
            }
            tied.push(c);
        }
        let pick = (0..tied.len()).min_by_key(|&k| (tied[k].a, tied[k].b)).unwrap();
        let best = tied.swap_remove(pick);
        self.heap.extend(tied);
        Some(best)
    }
}

/// Runs the greedy merge loop to a local optimum (or `max_steps`).
pub fn run_coalescence(mut partition: Partition, config: &CoalesceConfig) -> Result<CoalesceOutcome> {
    let max_steps = config.max_steps.unwrap_or(partition.n_cells().saturating_sub(1));
    let mut queue = CandidateQueue::new();
    for (a, b) in partition.adjacent_pairs() {
        queue.push(&partition, a, b)?;
    }
    let mut history = IterationHistory {
        initial_log_posterior: partition.total_log_posterior(),
        steps: Vec::new(),
    };
    let mut truncated = false;
    while let Some(best) = queue.best(&partition) {
        if best.factor <= 0.0 {
            break;
        }
        if history.steps.len() >= max_steps {
            truncated = true;
            break;
        }
        let factor = partition.merge(best.a, best.b)?;
        history.steps.push(HistoryStep {
            step: history.steps.len() + 1,
            a: best.a,
            b: best.b,
            log_merge_factor: factor,
            total_log_posterior: partition.total_log_posterior(),
        });
        let neighbors: Vec<usize> = partition.block(best.a).unwrap().neighbors().collect();
        for n in neighbors {
            queue.push(&partition, best.a, n)?;
        }
        queue.compact(&partition);
    }
    Ok(CoalesceOutcome {
        partition,
        history,
        truncated,
    })
}

/// Which state of a run to adopt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    /// The partition in place when the run stopped.
    AtStop,
    /// The highest-posterior state seen along the history.
    MaxOverHistory,
}

/// Picks the adopted model of a finished run. `initial` must be the partition
/// the run started from; it is replayed when the best state is not the last.
pub fn best_model(
    initial: &Partition,
    history: &IterationHistory,
    last: &Partition,
    choice: ModelChoice,
) -> Result<Partition> {
    match choice {
        ModelChoice::AtStop => Ok(last.clone()),
        ModelChoice::MaxOverHistory => {
            let mut best_step = 0;
            let mut best = history.initial_log_posterior;
            for (k, s) in history.steps.iter().enumerate() {
                if s.total_log_posterior > best {
                    best = s.total_log_posterior;
                    best_step = k + 1;
                }
            }
            if best_step == history.steps.len() {
                return Ok(last.clone());
            }
            let mut p = initial.clone();
            for s in &history.steps[..best_step] {
                p.merge(s.a, s.b)?;
            }
            Ok(p)
        }
    }
}
