//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use vblocks::clusters::extract_clusters;
use vblocks::coalesce::{run_coalescence, CoalesceConfig, CoalesceOutcome, Partition};
use vblocks::config::{BoundsSpec, QuantumSpec, RunConfig};
use vblocks::geometry::{build_tessellation_1d, AdjacencyMode, CellComplex, Interval, PointSet, Quantization};
use vblocks::oracle::{exact_phi, exhaustive_optimum};
use vblocks::pipeline;
use vblocks::posterior::{log_merge_factor, log_phi, BlockStats};
use vblocks::synth::{generate_synthetic, HotspotShape, SyntheticSpec};

const V_MAX: u64 = 60;

type Outcome = Result<String, String>;

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let res = f();
    let took = start.elapsed();
    match (res, limit) {
        (Ok(_), Some(l)) if took > l => Err(format!("took {took:.2?}, limit {l:?}")),
        (Ok(msg), _) => Ok(format!("{msg} ({took:.2?})")),
        (Err(msg), _) => Err(format!("{msg} ({took:.2?})")),
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn posterior_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for v in 0..=V_MAX {
        for n in 0..=v {
            let exact = exact_phi(n, v).map_err(|e| e.to_string())?;
            let approx = BigRational::from_float(log_phi(n, v as f64).map_err(|e| e.to_string())?.exp()).unwrap();
            let rel = ((approx - exact.as_ratio()) / exact.as_ratio()).to_f64().unwrap().abs();
            worst = worst.max(rel);
            ensure(rel <= 1e-10, || format!("n={n} v={v}: relative error {rel:e}"))?;
        }
    }
    Ok(format!("max relative error {worst:.3e} over 0 <= n <= v <= {V_MAX}"))
}

fn symmetry() -> Outcome {
    let mut worst_phi: f64 = 0.0;
    let mut blocks = Vec::new();
    for v in 0..=V_MAX {
        for n in 0..=v {
            let a = log_phi(n, v as f64).unwrap();
            let b = log_phi(v - n, v as f64).unwrap();
            let d = (a - b).abs();
            worst_phi = worst_phi.max(d);
            ensure(d <= 1e-10, || format!("phi({n},{v}) vs phi({},{v}) differ by {d:e}", v - n))?;
            blocks.push(BlockStats::new(n, v as f64));
        }
    }
    let mut worst_merge: f64 = 0.0;
    let mut pairs = 0u64;
    for a in &blocks {
        for b in &blocks {
            let ab = log_merge_factor(a, b).unwrap();
            let ba = log_merge_factor(b, a).unwrap();
            let d = (ab - ba).abs();
            worst_merge = worst_merge.max(d);
            ensure(d <= 1e-10, || format!("merge factor asymmetric for {a:?}, {b:?}: {d:e}"))?;
            pairs += 1;
        }
    }
    Ok(format!(
        "phi max diff {worst_phi:.1e}, merge factor max diff {worst_merge:.1e} over {pairs} ordered pairs"
    ))
}

/// Distinct even integer sites with integer bounds, so every cell spans a
/// whole number of unit quanta.
fn integer_line(rng: &mut ChaCha8Rng) -> CellComplex {
    let n = rng.random_range(2..=8);
    let mut ks: Vec<u32> = Vec::new();
    while ks.len() < n {
        let k = rng.random_range(1..=20);
        if !ks.contains(&k) {
            ks.push(k);
        }
    }
    let xs: Vec<f64> = ks.iter().map(|&k| 2.0 * k as f64).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - rng.random_range(1..=4) as f64;
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + rng.random_range(1..=4) as f64;
    build_tessellation_1d(PointSet::new(1, xs, vec![Interval::new(lo, hi)], vec![1.0]).unwrap()).unwrap()
}

fn greedy(cc: &CellComplex) -> CoalesceOutcome {
    run_coalescence(Partition::init(cc, 0.0).unwrap(), &CoalesceConfig::default()).unwrap()
}

fn greedy_vs_oracle(runs: &mut Vec<CoalesceOutcome>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 200;
    let mut matches = 0;
    for t in 0..trials {
        let cc = integer_line(&mut rng);
        let opt = exhaustive_optimum(&cc, 0.0).map_err(|e| e.to_string())?;
        let out = greedy(&cc);
        let g = out.partition.total_log_posterior();
        ensure(g <= opt.total_log_posterior + 1e-9, || {
            format!("trial {t}: greedy {g} above optimum {}", opt.total_log_posterior)
        })?;
        if (g - opt.total_log_posterior).abs() <= 1e-9 {
            matches += 1;
        }
        runs.push(out);
    }
    let frac = matches as f64 / trials as f64;
    ensure(frac >= 0.9, || format!("only {matches}/{trials} exact matches"))?;
    Ok(format!("{matches}/{trials} exact matches ({frac:.3})"))
}

fn monotone_and_locally_optimal(runs: &[CoalesceOutcome]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for (i, r) in runs.iter().enumerate() {
        worst = worst.max(check_run(r).map_err(|e| format!("run {i}: {e}"))?);
        steps += r.history.len();
    }
    Ok(format!(
        "{} runs, {steps} merges, max increment mismatch {worst:.1e}",
        runs.len()
    ))
}

fn geometry_partition() -> Outcome {
    let bounds = unit_square(1.0);
    let coords = uniform_points(1000, &bounds, 7);
    let cc = CellComplex::build(point_set(2, coords.clone(), bounds.clone(), 1e-6), AdjacencyMode::Vertex)
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let probes = 100_000;
    let mut hits = 0;
    for _ in 0..probes {
        let q = [rng.random::<f64>(), rng.random::<f64>()];
        let i = brute_nearest(&coords, 2, &q);
        if cell_contains(cc.cell(i), &q, 1e-12) {
            hits += 1;
        }
    }
    let frac = hits as f64 / probes as f64;
    let total: f64 = cc.cells().iter().map(|c| c.measure).sum();
    let err = (total - 1.0).abs();
    ensure(frac >= 0.999, || format!("only {hits}/{probes} probes inside their nearest cell"))?;
    ensure(err <= 1e-9, || format!("cell areas sum to {total}, off by {err:e}"))?;
    Ok(format!("{hits}/{probes} probes in the nearest-site cell, area error {err:.1e}"))
}

fn disks(spec: &SyntheticSpec) -> Vec<([f64; 2], f64)> {
    spec.hotspots
        .iter()
        .map(|h| match h.shape {
            HotspotShape::Disk { radius } => ([h.center[0], h.center[1]], radius),
            _ => unreachable!(),
        })
        .collect()
}

/// Two clusters centred in distinct true disks, and the background estimate.
fn recover(spec: &SyntheticSpec, quantum: Option<f64>) -> Result<(CoalesceOutcome, bool, f64), String> {
    let data = generate_synthetic(spec).map_err(|e| e.to_string())?;
    let points = point_set(2, data.coords.clone(), data.bounds.clone(), quantum.unwrap_or(1.0));
    let mut cc = CellComplex::build(points, AdjacencyMode::Vertex).map_err(|e| e.to_string())?;
    if quantum.is_none() {
        cc.requantize(Quantization::AutoMinCell);
    }
    let out = greedy(&cc);
    let report = extract_clusters(&out.partition, &cc, 2.0).map_err(|e| e.to_string())?;
    let truth = disks(spec);
    let inside = |c: &[f64], (ctr, r): ([f64; 2], f64)| (c[0] - ctr[0]).hypot(c[1] - ctr[1]) < r;
    let ok = report.clusters.len() == 2
        && ((inside(&report.clusters[0].centroid, truth[0]) && inside(&report.clusters[1].centroid, truth[1]))
            || (inside(&report.clusters[0].centroid, truth[1]) && inside(&report.clusters[1].centroid, truth[0])));
    let bg_err = (report.background_density - spec.background_rate).abs() / spec.background_rate;
    Ok((out, ok, bg_err))
}

/// Coordinates are taken to be resolved to 1e-4 units.
const RESOLUTION: f64 = 1e-4;

fn cluster_recovery(runs: &mut Vec<CoalesceOutcome>) -> Outcome {
    let seeds = 20;
    let mut recovered = 0;
    let mut background_ok = 0;
    let mut auto_recovered = 0;
    for seed in 0..seeds {
        let spec = SyntheticSpec::two_hotspots(seed);
        let (out, ok, bg_err) = recover(&spec, Some(RESOLUTION))?;
        recovered += ok as usize;
        background_ok += (bg_err <= 0.25) as usize;
        runs.push(out);
        let (out, ok, _) = recover(&spec, None)?;
        auto_recovered += ok as usize;
        runs.push(out);
    }
    ensure(recovered >= 16 && background_ok >= 18, || {
        format!("recovered {recovered}/{seeds}, background within 25% in {background_ok}/{seeds}")
    })?;
    Ok(format!(
        "quantum {RESOLUTION:e}: two clusters in the true disks for {recovered}/{seeds} seeds, \
         background within 25% for {background_ok}/{seeds} (auto-min-cell quantum: {auto_recovered}/{seeds})"
    ))
}

fn performance() -> Outcome {
    let mut spec = SyntheticSpec::two_hotspots(11);
    // Scale the rates so the field holds about 10 000 points.
    spec.background_rate *= 10_000.0 / 1_500.0;
    let data = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let n = data.coords.len() / 2;
    let cfg = RunConfig {
        dim: 2,
        bounds: BoundsSpec::Explicit(data.bounds.clone()),
        quantum: QuantumSpec::AutoMinCell,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let out = pipeline::run(&cfg, data.coords.clone()).map_err(|e| e.to_string())?;
    let full = start.elapsed();

    let initial = Partition::init(&out.complex, 0.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let merged = run_coalescence(initial, &CoalesceConfig::default()).map_err(|e| e.to_string())?;
    let merge = start.elapsed();
    ensure(n >= 9_000, || format!("only {n} points generated"))?;
    ensure(full < Duration::from_secs(60), || format!("full pipeline took {full:.2?}"))?;
    ensure(merge < Duration::from_secs(5), || format!("merge loop took {merge:.2?}"))?;
    Ok(format!(
        "{n} points -> {} blocks: pipeline {full:.2?}, merge loop {merge:.2?}",
        merged.partition.len()
    ))
}

fn determinism() -> Outcome {
    let data = generate_synthetic(&SyntheticSpec::two_hotspots(3)).map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        dim: 2,
        grid: Some(vec![64, 64]),
        emit_history: true,
        emit_cells: true,
        ..RunConfig::default()
    };
    let mut files = Vec::new();
    for _ in 0..3 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = pipeline::run(&cfg, data.coords.clone()).map_err(|e| e.to_string())?;
        pipeline::write_outputs(&out, &cfg, dir.path()).map_err(|e| e.to_string())?;
        let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
        files.push((read("partition.json"), read("clusters.json")));
    }
    ensure(files.windows(2).all(|w| w[0] == w[1]), || "outputs differ between runs".into())?;
    Ok(format!(
        "3 runs, partition.json {} bytes and clusters.json {} bytes identical",
        files[0].0.len(),
        files[0].1.len()
    ))
}

fn main() {
    let mut runs = Vec::new();
    let mut results = Vec::new();
    let mut record = |id: u32, name: &str, res: Outcome| {
        let line = match &res {
            Ok(msg) => format!("PASS  {id}. {name}: {msg}"),
            Err(msg) => format!("FAIL  {id}. {name}: {msg}"),
        };
        println!("{line}");
        results.push(res.is_ok());
    };

    println!("acceptance criteria");
    record(1, "posterior oracle equivalence", timed(Some(Duration::from_secs(1)), posterior_oracle));
    record(2, "posterior and merge factor symmetry", timed(None, symmetry));
    let res = timed(Some(Duration::from_secs(30)), || greedy_vs_oracle(&mut runs));
    record(3, "greedy vs exhaustive oracle", res);
    let res = timed(Some(Duration::from_secs(60)), || cluster_recovery(&mut runs));
    let c6 = res;
    // Extra 2D runs on uniform fields for the monotonicity check.
    for seed in 0..10 {
        let coords = uniform_points(300, &unit_square(1.0), 100 + seed);
        let mut cc =
            CellComplex::build(point_set(2, coords, unit_square(1.0), 1.0), AdjacencyMode::Vertex).unwrap();
        cc.requantize(Quantization::AutoMinCell);
        runs.push(greedy(&cc));
    }
    record(4, "monotonicity and local optimality", timed(None, || monotone_and_locally_optimal(&runs)));
    record(5, "geometry partition check", timed(Some(Duration::from_secs(10)), geometry_partition));
    record(6, "cluster recovery on two-hotspot fields", c6);
    record(7, "performance envelope", timed(None, performance));
    record(8, "determinism", timed(None, determinism));

    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
