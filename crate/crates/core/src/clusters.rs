//! Background level, clusters of dense blocks, and the piecewise-constant
//! density profile of a finished partition.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalesce::{Block, Partition};
use crate::geometry::{CellComplex, CellShape, Interval};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD_RATIO: f64 = 2.0;

/// Density of the volume-weighted median block.
///
/// Blocks are sorted by density (ties by id) and the first block at which the
/// cumulative volume reaches half of the total is the background.
pub fn estimate_background(p: &Partition) -> Result<f64> {
    let qv = p.quantum_volume();
    let mut blocks: Vec<&Block> = p.blocks().collect();
    if blocks.is_empty() {
        return Err(Error::EmptyInput);
    }
    blocks.sort_by(|a, b| a.density(qv).total_cmp(&b.density(qv)).then(a.id.cmp(&b.id)));
    let total: f64 = blocks.iter().map(|b| b.stats.volume_quanta).sum();
    let mut cum = 0.0;
    for b in &blocks {
        cum += b.stats.volume_quanta;
        if cum >= 0.5 * total {
            return Ok(b.density(qv));
        }
    }
    Ok(blocks.last().unwrap().density(qv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub blocks: Vec<usize>,
    pub n_points: u64,
    pub volume_quanta: f64,
    /// Volume in coordinate units.
    pub volume: f64,
    pub mean_density: f64,
    pub peak_block_density: f64,
    /// Mean position of the member points.
    pub centroid: Vec<f64>,
    /// Bounding box of the member cells.
    pub bbox: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub background_density: f64,
    pub threshold_ratio: f64,
    pub clusters: Vec<Cluster>,
    /// Every live block; `None` for blocks below the threshold.
    pub block_to_cluster: BTreeMap<usize, Option<usize>>,
}

/// Groups adjacent blocks denser than `threshold_ratio` times the background.
///
/// Cluster ids are assigned by descending point count, ties broken by the
/// smallest member block id.
pub fn extract_clusters(p: &Partition, cc: &CellComplex, threshold_ratio: f64) -> Result<ClusterReport> {
    if !(threshold_ratio.is_finite() && threshold_ratio > 1.0) {
        return Err(Error::Config(format!("threshold ratio must exceed 1, got {threshold_ratio}")));
    }
    let background = estimate_background(p)?;
    let qv = p.quantum_volume();
    let cut = threshold_ratio * background;
    let marked = |id: usize| p.block(id).is_some_and(|b| b.density(qv) > cut);

    let mut component: BTreeMap<usize, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for b in p.blocks() {
        if !marked(b.id) || component.contains_key(&b.id) {
            continue;
        }
        let k = groups.len();
        let mut members = vec![b.id];
        component.insert(b.id, k);
        let mut i = 0;
        while i < members.len() {
            let cur = p.block(members[i]).unwrap();
            for n in cur.neighbors() {
                if marked(n) && !component.contains_key(&n) {
                    component.insert(n, k);
                    members.push(n);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        groups.push(members);
    }

    let mut clusters: Vec<Cluster> = groups.iter().map(|g| summarize(p, cc, g)).collect();
    clusters.sort_by(|a, b| b.n_points.cmp(&a.n_points).then(a.blocks[0].cmp(&b.blocks[0])));
    let mut block_to_cluster: BTreeMap<usize, Option<usize>> = p.blocks().map(|b| (b.id, None)).collect();
    for (id, c) in clusters.iter_mut().enumerate() {
        c.id = id;
        for &b in &c.blocks {
            block_to_cluster.insert(b, Some(id));
        }
    }
    Ok(ClusterReport {
        background_density: background,
        threshold_ratio,
        clusters,
        block_to_cluster,
    })
}

fn summarize(p: &Partition, cc: &CellComplex, members: &[usize]) -> Cluster {
    let qv = p.quantum_volume();
    let dim = cc.dim();
    let mut n_points = 0;
    let mut volume_quanta = 0.0;
    let mut peak: f64 = 0.0;
    let mut centroid = vec![0.0; dim];
    let mut bbox = vec![Interval::new(f64::INFINITY, f64::NEG_INFINITY); dim];
    let mut grow = |d: usize, x: f64| {
        bbox[d].lo = bbox[d].lo.min(x);
        bbox[d].hi = bbox[d].hi.max(x);
    };
    for &id in members {
        let b = p.block(id).unwrap();
        n_points += b.stats.n_points;
        volume_quanta += b.stats.volume_quanta;
        peak = peak.max(b.density(qv));
        for &c in &b.cells {
            for (d, x) in cc.points().point(c).iter().enumerate() {
                centroid[d] += x;
            }
            match &cc.cell(c).shape {
                CellShape::Interval { lo, hi } => {
                    grow(0, *lo);
                    grow(0, *hi);
                }
                CellShape::Polygon { vertices } => {
                    for v in vertices {
                        grow(0, v[0]);
                        grow(1, v[1]);
                    }
                }
            }
        }
    }
    for x in &mut centroid {
        *x /= n_points as f64;
    }
    let volume = volume_quanta * qv;
    Cluster {
        id: 0,
        blocks: members.to_vec(),
        n_points,
        volume_quanta,
        volume,
        mean_density: n_points as f64 / volume,
        peak_block_density: peak,
        centroid,
        bbox,
    }
}

/// Cell-to-block lookup for evaluating the piecewise-constant density.
#[derive(Debug, Clone)]
pub struct DensityMap<'a> {
    cc: &'a CellComplex,
    cell_density: Vec<f64>,
}

impl<'a> DensityMap<'a> {
    pub fn new(p: &Partition, cc: &'a CellComplex) -> Self {
        let qv = p.quantum_volume();
        let cell_density = p
            .cell_to_block()
            .into_iter()
            .map(|id| p.block(id).expect("every cell has a block").density(qv))
            .collect();
        Self { cc, cell_density }
    }

    /// Density (points per unit coordinate volume) of the block whose cell
    /// contains `q`.
    pub fn density_at(&self, q: &[f64]) -> Result<f64> {
        Ok(self.cell_density[self.cc.locate(q)?])
    }

    /// Evaluates the density at the centers of a regular grid.
    pub fn grid(&self, resolution: &[usize]) -> Result<DensityRaster> {
        let dim = self.cc.dim();
        if resolution.len() != dim || resolution.iter().any(|&r| r == 0) {
            return Err(Error::Config(format!(
                "grid resolution needs {dim} positive entries, got {resolution:?}"
            )));
        }
        let bounds = self.cc.bounds().to_vec();
        let center = |d: usize, k: usize| bounds[d].lo + (k as f64 + 0.5) * bounds[d].width() / resolution[d] as f64;
        let nx = resolution[0];
        let ny = if dim == 2 { resolution[1] } else { 1 };
        let row = |iy: usize| -> Result<Vec<f64>> {
            (0..nx)
                .map(|ix| {
                    let q: Vec<f64> = if dim == 2 {
                        vec![center(0, ix), center(1, iy)]
                    } else {
                        vec![center(0, ix)]
                    };
                    self.density_at(&q)
                })
                .collect()
        };
        #[cfg(feature = "parallel")]
        let rows: Vec<Result<Vec<f64>>> = (0..ny).into_par_iter().map(row).collect();
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Result<Vec<f64>>> = (0..ny).map(row).collect();
        let mut values = Vec::with_capacity(nx * ny);
        for r in rows {
            values.extend(r?);
        }
        Ok(DensityRaster {
            dim,
            bounds,
            resolution: resolution.to_vec(),
            values,
        })
    }
}

/// Density sampled on a regular grid, row-major: `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRaster {
    pub dim: usize,
    pub bounds: Vec<Interval>,
    pub resolution: Vec<usize>,
    pub values: Vec<f64>,
}

impl DensityRaster {
    /// Coordinate volume of one raster pixel.
    pub fn pixel_volume(&self) -> f64 {
        self.bounds
            .iter()
            .zip(&self.resolution)
            .map(|(b, &r)| b.width() / r as f64)
            .product()
    }
}

pub fn density_at(p: &Partition, cc: &CellComplex, q: &[f64]) -> Result<f64> {
    DensityMap::new(p, cc).density_at(q)
}

pub fn density_grid(p: &Partition, cc: &CellComplex, resolution: &[usize]) -> Result<DensityRaster> {
    DensityMap::new(p, cc).grid(resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalesce::{run_coalescence, CoalesceConfig};
    use crate::geometry::{build_tessellation_1d, PointSet};

    fn line(points: &[f64], lo: f64, hi: f64, q: f64) -> CellComplex {
        build_tessellation_1d(PointSet::new(1, points.to_vec(), vec![Interval::new(lo, hi)], vec![q]).unwrap()).unwrap()
    }

    #[test]
    fn single_block_background() {
        // 100 points in 50 units.
        let pts: Vec<f64> = (0..100).map(|i| 0.25 + 0.5 * i as f64).collect();
        let cc = line(&pts, 0.0, 50.0, 0.5);
        let p = Partition::from_groups(&cc, &[(0..100).collect()], 0.0).unwrap();
        assert!((estimate_background(&p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn volume_median_block_is_background() {
        // 90 points over [0, 90) and 100 points over [90, 100).
        let mut pts: Vec<f64> = (0..90).map(|i| 0.5 + i as f64).collect();
        pts.extend((0..100).map(|i| 90.05 + 0.1 * i as f64));
        let cc = line(&pts, 0.0, 100.0, 0.01);
        let p = Partition::from_groups(&cc, &[(0..90).collect(), (90..190).collect()], 0.0).unwrap();
        let b0 = p.block(0).unwrap();
        // The sparse block ends at the midpoint of 89.5 and 90.05.
        assert!((b0.density(p.quantum_volume()) - 90.0 / 89.775).abs() < 1e-9);
        assert!((estimate_background(&p).unwrap() - 90.0 / 89.775).abs() < 1e-9);
    }

    #[test]
    fn clusters_on_a_line() {
        // Sparse, dense, sparse.
        let mut pts: Vec<f64> = (0..10).map(|i| 0.5 + i as f64).collect();
        pts.extend((0..20).map(|i| 10.05 + 0.1 * i as f64));
        pts.extend((0..10).map(|i| 12.5 + i as f64));
        let cc = line(&pts, 0.0, 22.0, 0.05);
        let groups = [(0..10).collect(), (10..30).collect(), (30..40).collect()];
        let p = Partition::from_groups(&cc, &groups, 0.0).unwrap();
        let report = extract_clusters(&p, &cc, 2.0).unwrap();
        assert_eq!(report.clusters.len(), 1);
        assert_eq!(report.clusters[0].blocks, vec![10]);
        assert_eq!(report.clusters[0].n_points, 20);
        assert_eq!(report.block_to_cluster[&0], None);
        assert_eq!(report.block_to_cluster[&10], Some(0));
        assert!(report.clusters[0].bbox[0].contains(11.0));

        let none = extract_clusters(&p, &cc, 1000.0).unwrap();
        assert!(none.clusters.is_empty());
        assert!(none.block_to_cluster.values().all(Option::is_none));
        assert!(extract_clusters(&p, &cc, 1.0).is_err());
    }

    #[test]
    fn four_point_line_density_profile() {
        let cc = line(&[1.0, 2.0, 3.0, 9.0], 0.0, 10.0, 0.5);
        let out = run_coalescence(Partition::init(&cc, 0.0).unwrap(), &CoalesceConfig::default()).unwrap();
        let map = DensityMap::new(&out.partition, &cc);
        for x in [0.0, 1.0, 2.0, 2.49] {
            assert!((map.density_at(&[x]).unwrap() - 0.8).abs() < 1e-12);
        }
        for x in [2.51, 3.0, 9.0, 10.0] {
            assert!((map.density_at(&[x]).unwrap() - 2.0 / 7.5).abs() < 1e-12);
        }
        assert!(matches!(map.density_at(&[-0.1]), Err(Error::OutOfBounds)));
        // At a data point: its own block.
        assert!((map.density_at(&[9.0]).unwrap() - 2.0 / 7.5).abs() < 1e-12);
    }

    #[test]
    fn grids() {
        let cc = line(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5, 5.5, 1.0);
        let p = Partition::from_groups(&cc, &[(0..5).collect()], 0.0).unwrap();
        let one = density_grid(&p, &cc, &[1]).unwrap();
        assert_eq!(one.values, vec![1.0]);
        let many = density_grid(&p, &cc, &[37]).unwrap();
        assert!(many.values.iter().all(|&v| v == 1.0));
        assert!(density_grid(&p, &cc, &[0]).is_err());
        assert!(density_grid(&p, &cc, &[3, 3]).is_err());
    }
}
