//! Voronoi tessellation of a bounded point set.
//!
//! Cells are clipped to the observation box so every cell has a finite
//! measure. Volumes are counted in quanta (the product of the per-dimension
//! coordinate resolutions), which makes the block posterior's `V` a count
//! comparable to `N`.

mod grid;
mod line;
mod plane;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use grid::GridIndex;
pub use plane::{polygon_area, EdgeTag};

/// Relative geometric tolerance, scaled by the box diagonal.
pub const GEOM_TOL: f64 = 1e-9;

/// Slack when checking that every cell spans at least one quantum.
pub const QUANTUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// How cell adjacency is decided in two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// Cells touch if they share at least one vertex.
    #[default]
    Vertex,
    /// Cells touch only if they share an edge of positive length.
    Edge,
}

/// Event locations with their observation box and coordinate quantum.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    bounds: Vec<Interval>,
    quantum: Vec<f64>,
}

impl PointSet {
    /// `coords` is row-major: point `i` occupies `coords[i*dim..(i+1)*dim]`.
    pub fn new(dim: usize, coords: Vec<f64>, bounds: Vec<Interval>, quantum: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidPointSet(format!("dimension must be 1 or 2, got {dim}")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidPointSet(format!(
                "{} coordinates do not form {dim}-dimensional points",
                coords.len()
            )));
        }
        if bounds.len() != dim || quantum.len() != dim {
            return Err(Error::InvalidPointSet(format!(
                "expected {dim} bounds and {dim} quanta, got {} and {}",
                bounds.len(),
                quantum.len()
            )));
        }
        for (d, b) in bounds.iter().enumerate() {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
                return Err(Error::InvalidPointSet(format!("bounds of axis {d} are not a proper interval")));
            }
        }
        if let Some(q) = quantum.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
            return Err(Error::InvalidPointSet(format!("quantum must be positive, got {q}")));
        }
        if coords.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, p) in coords.chunks(dim).enumerate() {
            for (d, x) in p.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidPointSet(format!("point #{i} has a non-finite coordinate")));
                }
                if !bounds[d].contains(*x) {
                    return Err(Error::InvalidPointSet(format!(
                        "point #{i} lies outside the bounds on axis {d}: {x} not in [{}, {}]",
                        bounds[d].lo, bounds[d].hi
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            coords,
            bounds,
            quantum,
        })
    }

    /// Bounding box of `coords` grown by `expand` times the extent on each side.
    /// A degenerate axis (all points equal) is padded by half a unit.
    pub fn auto_bounds(dim: usize, coords: &[f64], expand: f64) -> Result<Vec<Interval>> {
        if coords.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok((0..dim)
            .map(|d| {
                let (lo, hi) = coords
                    .iter()
                    .skip(d)
                    .step_by(dim)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
                let pad = if hi > lo { expand * (hi - lo) } else { 0.5 };
                Interval::new(lo - pad, hi + pad)
            })
            .collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn quantum(&self) -> &[f64] {
        &self.quantum
    }

    pub fn box_volume(&self) -> f64 {
        self.bounds.iter().map(Interval::width).product()
    }

    pub fn diagonal(&self) -> f64 {
        self.bounds.iter().map(|b| b.width() * b.width()).sum::<f64>().sqrt()
    }

    /// Moves every point that repeats an earlier one by at most 0.1 quantum per
    /// axis, using a seeded ChaCha8 stream. Returns how many points moved.
    pub fn jitter_duplicates(&mut self, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let mut moved = 0;
        for i in 0..self.len() {
            loop {
                let key: Vec<u64> = self.point(i).iter().map(|x| x.to_bits()).collect();
                if seen.insert(key) {
                    break;
                }
                for d in 0..self.dim {
                    let b = self.bounds[d];
                    let step = 0.1 * self.quantum[d] * (2.0 * rng.random::<f64>() - 1.0);
                    let x = &mut self.coords[i * self.dim + d];
                    *x = (*x + step).clamp(b.lo, b.hi);
                }
                moved += 1;
            }
        }
        moved
    }
}

/// Outline of a single cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellShape {
    Interval { lo: f64, hi: f64 },
    /// Counterclockwise vertex list.
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub point_index: usize,
    /// Length or area in coordinate units.
    pub measure: f64,
    pub volume_quanta: f64,
    /// Sorted, without the cell itself.
    pub neighbors: Vec<usize>,
    pub shape: CellShape,
}

impl Cell {
    /// Reciprocal cell measure: the single-cell density estimate.
    pub fn local_density(&self) -> f64 {
        1.0 / self.measure
    }
}

/// How to turn measures into quanta.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantization {
    /// Use the point set's own quantum.
    Fixed,
    /// Pick an isotropic quantum so the smallest cell is exactly one quantum.
    AutoMinCell,
}

/// The tessellation: one cell per point, index-aligned with the point set.
#[derive(Debug, Clone)]
pub struct CellComplex {
    points: PointSet,
    cells: Vec<Cell>,
    quantum: Vec<f64>,
    quantum_volume: f64,
    adjacency: AdjacencyMode,
    locator: Locator,
}

#[derive(Debug, Clone)]
enum Locator {
    /// Point indices sorted by coordinate and the upper cell edge for each.
    Line { order: Vec<usize>, upper: Vec<f64> },
    Plane(GridIndex),
}

impl CellComplex {
    /// Builds the tessellation in whatever dimension the point set has.
    pub fn build(points: PointSet, adjacency: AdjacencyMode) -> Result<Self> {
        match points.dim() {
            1 => build_tessellation_1d(points),
            _ => build_tessellation_2d(points, adjacency),
        }
    }

    fn assemble(points: PointSet, mut cells: Vec<Cell>, adjacency: AdjacencyMode, locator: Locator) -> Self {
        let quantum = points.quantum().to_vec();
        let quantum_volume: f64 = quantum.iter().product();
        for c in &mut cells {
            c.volume_quanta = c.measure / quantum_volume;
        }
        Self {
            points,
            cells,
            quantum,
            quantum_volume,
            adjacency,
            locator,
        }
    }

    /// Recomputes every cell's volume in quanta.
    pub fn requantize(&mut self, q: Quantization) {
        match q {
            Quantization::Fixed => {
                self.quantum = self.points.quantum().to_vec();
                self.quantum_volume = self.quantum.iter().product();
            }
            Quantization::AutoMinCell => {
                let min = self.cells.iter().map(|c| c.measure).fold(f64::INFINITY, f64::min);
                let side = min.powf(1.0 / self.dim() as f64);
                self.quantum = vec![side; self.dim()];
                self.quantum_volume = min;
            }
        }
        for c in &mut self.cells {
            c.volume_quanta = c.measure / self.quantum_volume;
        }
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn bounds(&self) -> &[Interval] {
        self.points.bounds()
    }

    pub fn quantum(&self) -> &[f64] {
        &self.quantum
    }

    /// Coordinate volume of one quantum.
    pub fn quantum_volume(&self) -> f64 {
        self.quantum_volume
    }

    pub fn adjacency_mode(&self) -> AdjacencyMode {
        self.adjacency
    }

    /// Box volume in quanta.
    pub fn total_volume_quanta(&self) -> f64 {
        self.points.box_volume() / self.quantum_volume
    }

    /// Index of the cell containing `q`, i.e. of the nearest data point.
    pub fn locate(&self, q: &[f64]) -> Result<usize> {
        if q.len() != self.dim() || q.iter().zip(self.bounds()).any(|(x, b)| !b.contains(*x)) {
            return Err(Error::OutOfBounds);
        }
        Ok(match &self.locator {
            Locator::Line { order, upper } => {
                let k = upper.partition_point(|&u| u < q[0]);
                order[k.min(order.len() - 1)]
            }
            Locator::Plane(grid) => grid.nearest(self.points.coords(), [q[0], q[1]]),
        })
    }

    /// Cell-by-cell dump for plotting and debugging.
    pub fn dump(&self) -> CellDump {
        CellDump {
            dim: self.dim(),
            bounds: self.bounds().to_vec(),
            quantum: self.quantum.clone(),
            quantum_volume: self.quantum_volume,
            adjacency: self.adjacency,
            total_volume_quanta: self.total_volume_quanta(),
            cells: self
                .cells
                .iter()
                .enumerate()
                .map(|(index, c)| CellRecord {
                    index,
                    point: self.points.point(index).to_vec(),
                    vertices: match &c.shape {
                        CellShape::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
                        CellShape::Polygon { vertices } => vertices.iter().map(|v| v.to_vec()).collect(),
                    },
                    measure: c.measure,
                    volume_quanta: c.volume_quanta,
                    neighbors: c.neighbors.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellDump {
    pub dim: usize,
    pub bounds: Vec<Interval>,
    pub quantum: Vec<f64>,
    pub quantum_volume: f64,
    pub adjacency: AdjacencyMode,
    pub total_volume_quanta: f64,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    pub point: Vec<f64>,
    pub vertices: Vec<Vec<f64>>,
    pub measure: f64,
    pub volume_quanta: f64,
    pub neighbors: Vec<usize>,
}

pub fn build_tessellation_1d(points: PointSet) -> Result<CellComplex> {
    if points.dim() != 1 {
        return Err(Error::InvalidPointSet("expected one-dimensional points".into()));
    }
    let (cells, order, upper) = line::tessellate(&points)?;
    Ok(CellComplex::assemble(
        points,
        cells,
        AdjacencyMode::Vertex,
        Locator::Line { order, upper },
    ))
}

pub fn build_tessellation_2d(points: PointSet, adjacency: AdjacencyMode) -> Result<CellComplex> {
    if points.dim() != 2 {
        return Err(Error::InvalidPointSet("expected two-dimensional points".into()));
    }
    let (cells, grid) = plane::tessellate(&points, adjacency)?;
    Ok(CellComplex::assemble(points, cells, adjacency, Locator::Plane(grid)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    /// Cells below one quantum, in index order.
    pub failing: Vec<usize>,
    pub min_volume_quanta: f64,
    /// Largest quantum (same aspect ratio as the current one) for which every
    /// cell spans at least one quantum.
    pub suggested_quantum: Vec<f64>,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(Error::Quantization {
                failing: self.failing,
                min_volume_quanta: self.min_volume_quanta,
                suggested_quantum: self.suggested_quantum,
            })
        }
    }
}

/// Checks that every cell spans at least one quantum.
pub fn validate_quantization(cc: &CellComplex) -> ValidationReport {
    let failing: Vec<usize> = cc
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.volume_quanta < 1.0 - QUANTUM_TOL)
        .map(|(i, _)| i)
        .collect();
    let min = cc.cells().iter().map(|c| c.volume_quanta).fold(f64::INFINITY, f64::min);
    let scale = min.powf(1.0 / cc.dim() as f64);
    ValidationReport {
        passed: failing.is_empty(),
        failing,
        min_volume_quanta: min,
        suggested_quantum: cc.quantum().iter().map(|q| q * scale).collect(),
    }
}
