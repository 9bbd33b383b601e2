//! Tessellate, coalesce, cluster, and write the artifacts.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::clusters::{extract_clusters, ClusterReport, DensityMap, DensityRaster};
use crate::coalesce::{run_coalescence, CoalesceConfig, IterationHistory, Partition};
use crate::config::{BoundsSpec, QuantumSpec, RasterFormat, RunConfig};
use crate::geometry::{CellComplex, PointSet, Quantization};
use crate::io;
use crate::{Error, Result};

/// Loads the configured input file.
pub fn load_input(cfg: &RunConfig) -> Result<Vec<f64>> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input file given".into()))?;
    io::read_points_csv(path, cfg.dim)
}

/// Resolves bounds and quantum, jitters duplicates if asked, and builds the
/// quantized tessellation. Also returns the number of jittered points.
pub fn build_complex(cfg: &RunConfig, coords: Vec<f64>) -> Result<(CellComplex, usize)> {
    let dim = cfg.dim;
    let bounds = match &cfg.bounds {
        BoundsSpec::Auto { expand } => PointSet::auto_bounds(dim, &coords, *expand)?,
        BoundsSpec::Explicit(b) => b.clone(),
    };
    let (quantum, quantization) = match &cfg.quantum {
        QuantumSpec::Explicit(q) => (q.clone(), Quantization::Fixed),
        QuantumSpec::AutoMinCell => {
            // Provisional scale, used only to size the duplicate jitter.
            let n = (coords.len() / dim).max(1) as f64;
            let vol: f64 = bounds.iter().map(|b| b.width()).product();
            (vec![1e-3 * (vol / n).powf(1.0 / dim as f64); dim], Quantization::AutoMinCell)
        }
    };
    let mut points = PointSet::new(dim, coords, bounds, quantum)?;
    let jittered = if cfg.jitter_duplicates {
        points.jitter_duplicates(cfg.seed)
    } else {
        0
    };
    let mut cc = CellComplex::build(points, cfg.adjacency)?;
    cc.requantize(quantization);
    Ok((cc, jittered))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRecord {
    pub id: usize,
    pub points: Vec<usize>,
    pub n_points: u64,
    pub volume_quanta: f64,
    pub volume: f64,
    pub density: f64,
    pub log_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionDump {
    pub n_points: usize,
    pub n_blocks: usize,
    pub quantum: Vec<f64>,
    pub quantum_volume: f64,
    pub penalty: f64,
    pub total_log_posterior: f64,
    pub merges: usize,
    pub truncated: bool,
    pub jittered: usize,
    pub blocks: Vec<BlockRecord>,
}

impl PartitionDump {
    fn new(cc: &CellComplex, p: &Partition, merges: usize, truncated: bool, jittered: usize) -> Self {
        let qv = p.quantum_volume();
        let mut blocks: Vec<BlockRecord> = p
            .blocks()
            .map(|b| {
                let mut points: Vec<usize> = b.cells.iter().map(|&c| cc.cell(c).point_index).collect();
                points.sort_unstable();
                BlockRecord {
                    id: b.id,
                    points,
                    n_points: b.stats.n_points,
                    volume_quanta: b.stats.volume_quanta,
                    volume: b.stats.volume_quanta * qv,
                    density: b.density(qv),
                    log_phi: b.log_phi,
                }
            })
            .collect();
        blocks.sort_by_key(|b| b.id);
        Self {
            n_points: cc.len(),
            n_blocks: blocks.len(),
            quantum: cc.quantum().to_vec(),
            quantum_volume: qv,
            penalty: p.penalty(),
            total_log_posterior: p.total_log_posterior(),
            merges,
            truncated,
            jittered,
            blocks,
        }
    }
}

/// Everything a run produces, before anything is written.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub complex: CellComplex,
    pub partition: Partition,
    pub history: IterationHistory,
    pub dump: PartitionDump,
    pub clusters: ClusterReport,
    pub raster: Option<DensityRaster>,
}

impl PipelineOutput {
    pub fn summary(&self) -> Summary {
        Summary {
            n_points: self.complex.len(),
            n_blocks: self.partition.len(),
            n_clusters: self.clusters.clusters.len(),
            total_log_posterior: self.partition.total_log_posterior(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n_points: usize,
    pub n_blocks: usize,
    pub n_clusters: usize,
    pub total_log_posterior: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} points -> {} blocks -> {} clusters, total log posterior {:.6}",
            self.n_points, self.n_blocks, self.n_clusters, self.total_log_posterior
        )
    }
}

/// Runs every stage on in-memory coordinates.
pub fn run(cfg: &RunConfig, coords: Vec<f64>) -> Result<PipelineOutput> {
    cfg.validate()?;
    let (cc, jittered) = build_complex(cfg, coords)?;
    let initial = Partition::init(&cc, cfg.penalty)?;
    let outcome = run_coalescence(
        initial,
        &CoalesceConfig {
            max_steps: cfg.max_steps,
        },
    )?;
    let clusters = extract_clusters(&outcome.partition, &cc, cfg.threshold_ratio)?;
    let raster = match &cfg.grid {
        Some(res) => Some(DensityMap::new(&outcome.partition, &cc).grid(res)?),
        None => None,
    };
    let dump = PartitionDump::new(&cc, &outcome.partition, outcome.history.len(), outcome.truncated, jittered);
    Ok(PipelineOutput {
        complex: cc,
        partition: outcome.partition,
        history: outcome.history,
        dump,
        clusters,
        raster,
    })
}

/// Writes the artifacts into `dir`, creating it if needed. Returns the paths
/// written, in order.
pub fn write_outputs(out: &PipelineOutput, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut json = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        f(&path)?;
        written.push(path);
        Ok(())
    };
    json("partition.json", &|p| io::write_json_file(p, &out.dump))?;
    json("clusters.json", &|p| io::write_json_file(p, &out.clusters))?;
    if cfg.emit_cells {
        json("cells.json", &|p| io::write_json_file(p, &out.complex.dump()))?;
    }
    if cfg.emit_history {
        json("history.json", &|p| io::write_json_file(p, &out.history))?;
    }
    if let Some(raster) = &out.raster {
        match cfg.raster_format {
            RasterFormat::Csv => {
                let path = dir.join("density.csv");
                let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
                io::write_raster_csv(&mut w, raster)?;
                std::io::Write::flush(&mut w)?;
                written.push(path);
            }
            RasterFormat::Binary => {
                let data = dir.join("density.bin");
                let sidecar = dir.join("density.json");
                io::write_raster_binary(&data, &sidecar, raster)?;
                written.push(data);
                written.push(sidecar);
            }
        }
    }
    Ok(written)
}

/// Loads the input, runs, and writes into `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Summary> {
    cfg.validate()?;
    let coords = load_input(cfg)?;
    let out = run(cfg, coords)?;
    write_outputs(&out, cfg, &cfg.out_dir)?;
    Ok(out.summary())
}
