//! WebAssembly bindings for the browser demo. Every export returns JSON (or a
//! number); the page in `www/` draws it on a canvas.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use vblocks::clusters::extract_clusters;
use vblocks::coalesce::{run_coalescence, CoalesceConfig, Partition};
use vblocks::geometry::{AdjacencyMode, CellComplex, CellShape, Interval, PointSet, Quantization};
use vblocks::posterior::{log_merge_factor, log_phi, BlockStats};
use vblocks::synth::{generate_synthetic, Hotspot, HotspotRate, HotspotShape, SyntheticSpec};
use vblocks::{io, Result};

#[derive(Debug, Serialize)]
pub struct BlockView {
    pub id: usize,
    pub n_points: u64,
    pub density: f64,
    pub cluster: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ClusterView {
    pub id: usize,
    pub n_points: u64,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PlaneView {
    pub bounds: Vec<Interval>,
    pub points: Vec<[f64; 2]>,
    /// One polygon per point.
    pub cells: Vec<Vec<[f64; 2]>>,
    /// Index into `blocks` for each cell.
    pub cell_block: Vec<usize>,
    pub blocks: Vec<BlockView>,
    pub clusters: Vec<ClusterView>,
    pub hotspots: Vec<Hotspot>,
    pub background_density: f64,
    pub total_log_posterior: f64,
    pub merges: usize,
}

#[derive(Debug, Serialize)]
pub struct LineBlock {
    pub lo: f64,
    pub hi: f64,
    pub n_points: u64,
    pub density: f64,
}

#[derive(Debug, Serialize)]
pub struct LineView {
    pub bounds: Interval,
    pub points: Vec<f64>,
    pub blocks: Vec<LineBlock>,
    pub total_log_posterior: f64,
}

fn quantize(cc: &mut CellComplex, quantum: f64) {
    if quantum <= 0.0 {
        cc.requantize(Quantization::AutoMinCell);
    }
}

/// Two disk hotspots on a 4 × 4 field, segmented end to end. A non-positive
/// `quantum` selects the auto-min-cell quantum.
pub fn plane_view(seed: u64, background: f64, multiplier: f64, quantum: f64, threshold: f64) -> Result<PlaneView> {
    let mut spec = SyntheticSpec::two_hotspots(seed);
    spec.background_rate = background;
    for h in &mut spec.hotspots {
        h.rate = HotspotRate::Multiplier(multiplier);
    }
    let data = generate_synthetic(&spec)?;
    let q = if quantum > 0.0 { quantum } else { 1.0 };
    let points = PointSet::new(2, data.coords, data.bounds.clone(), vec![q; 2])?;
    let mut cc = CellComplex::build(points, AdjacencyMode::Vertex)?;
    quantize(&mut cc, quantum);
    let outcome = run_coalescence(Partition::init(&cc, 0.0)?, &CoalesceConfig::default())?;
    let p = &outcome.partition;
    let report = extract_clusters(p, &cc, threshold)?;
    let qv = p.quantum_volume();

    let owner = p.cell_to_block();
    let mut ids: Vec<usize> = p.blocks().map(|b| b.id).collect();
    ids.sort_unstable();
    let slot = |id: usize| ids.binary_search(&id).expect("live block");
    let blocks = ids
        .iter()
        .map(|&id| {
            let b = p.block(id).expect("live block");
            BlockView {
                id,
                n_points: b.stats.n_points,
                density: b.density(qv),
                cluster: report.block_to_cluster[&id],
            }
        })
        .collect();
    let cells = cc
        .cells()
        .iter()
        .map(|c| match &c.shape {
            CellShape::Polygon { vertices } => vertices.clone(),
            CellShape::Interval { .. } => Vec::new(),
        })
        .collect();
    Ok(PlaneView {
        bounds: data.bounds,
        points: (0..cc.len()).map(|i| [cc.points().point(i)[0], cc.points().point(i)[1]]).collect(),
        cells,
        cell_block: owner.iter().map(|&id| slot(id)).collect(),
        blocks,
        clusters: report
            .clusters
            .iter()
            .map(|c| ClusterView {
                id: c.id,
                n_points: c.n_points,
                centroid: c.centroid.clone(),
            })
            .collect(),
        hotspots: spec.hotspots.clone(),
        background_density: report.background_density,
        total_log_posterior: p.total_log_posterior(),
        merges: outcome.history.len(),
    })
}

/// Segments event times on `[lo, hi]`.
pub fn line_view(times: &[f64], lo: f64, hi: f64, quantum: f64) -> Result<LineView> {
    let q = if quantum > 0.0 { quantum } else { 1.0 };
    let points = PointSet::new(1, times.to_vec(), vec![Interval::new(lo, hi)], vec![q])?;
    let mut cc = CellComplex::build(points, AdjacencyMode::Vertex)?;
    quantize(&mut cc, quantum);
    let outcome = run_coalescence(Partition::init(&cc, 0.0)?, &CoalesceConfig::default())?;
    let p = &outcome.partition;
    let qv = p.quantum_volume();
    let mut blocks: Vec<LineBlock> = p
        .blocks()
        .map(|b| {
            let (mut blo, mut bhi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &c in &b.cells {
                if let CellShape::Interval { lo, hi } = cc.cell(c).shape {
                    blo = blo.min(lo);
                    bhi = bhi.max(hi);
                }
            }
            LineBlock {
                lo: blo,
                hi: bhi,
                n_points: b.stats.n_points,
                density: b.density(qv),
            }
        })
        .collect();
    blocks.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    Ok(LineView {
        bounds: Interval::new(lo, hi),
        points: times.to_vec(),
        blocks,
        total_log_posterior: p.total_log_posterior(),
    })
}

/// Events whose rate steps up in the middle third of `[0, 100]`.
pub fn step_times(seed: u64, base_rate: f64, step: f64) -> Result<Vec<f64>> {
    let spec = SyntheticSpec {
        dim: 1,
        bounds: vec![Interval::new(0.0, 100.0)],
        background_rate: base_rate,
        hotspots: vec![Hotspot {
            shape: HotspotShape::Rectangle {
                half_widths: vec![50.0 / 3.0],
            },
            center: vec![50.0],
            rate: HotspotRate::Multiplier(step),
        }],
        seed,
    };
    Ok(generate_synthetic(&spec)?.coords)
}

fn js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.and_then(|v| io::to_json_string(&v)).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = segmentPlane)]
pub fn segment_plane(seed: u64, background: f64, multiplier: f64, quantum: f64, threshold: f64) -> std::result::Result<String, JsValue> {
    js(plane_view(seed, background, multiplier, quantum, threshold))
}

#[wasm_bindgen(js_name = segmentLine)]
pub fn segment_line(seed: u64, base_rate: f64, step: f64, quantum: f64) -> std::result::Result<String, JsValue> {
    js(step_times(seed, base_rate, step).and_then(|t| line_view(&t, 0.0, 100.0, quantum)))
}

/// `ln Φ` of each block and the log merge factor, or NaN outside the domain.
#[wasm_bindgen(js_name = mergeFactor)]
pub fn merge_factor(n1: u32, v1: f64, n2: u32, v2: f64) -> Vec<f64> {
    let a = BlockStats::new(n1 as u64, v1);
    let b = BlockStats::new(n2 as u64, v2);
    let merged = a.merged(&b);
    [
        log_phi(a.n_points, a.volume_quanta),
        log_phi(b.n_points, b.volume_quanta),
        log_phi(merged.n_points, merged.volume_quanta),
        log_merge_factor(&a, &b),
    ]
    .into_iter()
    .map(|r| r.unwrap_or(f64::NAN))
    .collect()
}
