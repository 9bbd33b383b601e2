use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vblocks::coalesce::{run_coalescence, CoalesceConfig, Partition};
use vblocks::config::{parse_grid, BoundsSpec, QuantumSpec, RasterFormat, RunConfig};
use vblocks::geometry::{validate_quantization, AdjacencyMode};
use vblocks::oracle::{exhaustive_optimum, Optimum};
use vblocks::synth::{generate_synthetic, SyntheticSpec};
use vblocks::{io, pipeline, Error, Result};

#[derive(Parser)]
#[command(name = "vblocks", version, about = "Bayesian blocks for 1D and 2D point data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tessellate, coalesce, and extract clusters.
    Run(RunArgs),
    /// Draw a synthetic Poisson point field.
    Generate(GenerateArgs),
    /// Build the cell complex and dump its geometry.
    Tessellate(RunArgs),
    /// Exhaustive optimum of a tiny input, compared with the greedy result.
    Oracle(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Adjacency {
    Vertex,
    Edge,
}

#[derive(Clone, Copy, ValueEnum)]
enum Raster {
    Csv,
    Binary,
}

fn bounds_arg(s: &str) -> std::result::Result<BoundsSpec, String> {
    BoundsSpec::parse(s).map_err(|e| e.to_string())
}

fn quantum_arg(s: &str) -> std::result::Result<QuantumSpec, String> {
    QuantumSpec::parse(s).map_err(|e| e.to_string())
}

#[derive(Clone)]
struct Grid(Vec<usize>);

fn grid_arg(s: &str) -> std::result::Result<Grid, String> {
    parse_grid(s).map(Grid).map_err(|e| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    /// Input CSV with one point per row.
    input: Option<PathBuf>,
    /// JSON run configuration; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// `auto`, `auto:FRACTION`, or `lo,hi[,lo,hi]`.
    #[arg(long, value_parser = bounds_arg, allow_hyphen_values = true)]
    bounds: Option<BoundsSpec>,
    /// `auto-min-cell`, one value for every axis, or one per axis.
    #[arg(long, value_parser = quantum_arg)]
    quantum: Option<QuantumSpec>,
    /// Log-prior per block; negative values favor fewer blocks.
    #[arg(long, allow_hyphen_values = true)]
    penalty: Option<f64>,
    /// Cluster threshold as a multiple of the background density.
    #[arg(long)]
    threshold: Option<f64>,
    /// Density raster size, e.g. `200` or `200x100`.
    #[arg(long, value_parser = grid_arg)]
    grid: Option<Grid>,
    #[arg(long, value_enum)]
    raster_format: Option<Raster>,
    /// Seed for duplicate jitter.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    emit_history: bool,
    #[arg(long)]
    emit_cells: bool,
    #[arg(long, value_enum)]
    adjacency: Option<Adjacency>,
    /// Nudge duplicate points apart instead of failing.
    #[arg(long)]
    jitter_duplicates: bool,
    #[arg(long)]
    max_steps: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
                RunConfig::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = &self.bounds {
            cfg.bounds = v.clone();
        }
        if let Some(v) = &self.quantum {
            cfg.quantum = v.clone();
        }
        if let Some(v) = self.penalty {
            cfg.penalty = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold_ratio = v;
        }
        if let Some(v) = &self.grid {
            cfg.grid = Some(v.0.clone());
        }
        if let Some(v) = self.raster_format {
            cfg.raster_format = match v {
                Raster::Csv => RasterFormat::Csv,
                Raster::Binary => RasterFormat::Binary,
            };
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.adjacency {
            cfg.adjacency = match v {
                Adjacency::Vertex => AdjacencyMode::Vertex,
                Adjacency::Edge => AdjacencyMode::Edge,
            };
        }
        if let Some(v) = self.max_steps {
            cfg.max_steps = Some(v);
        }
        cfg.emit_history |= self.emit_history;
        cfg.emit_cells |= self.emit_cells;
        cfg.jitter_duplicates |= self.jitter_duplicates;
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Synthetic field description (JSON); defaults to the two-hotspot field.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the seed in the field description.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV.
    #[arg(long, default_value = "points.csv")]
    out: PathBuf,
    /// Ground-truth JSON; defaults to the CSV path with a `.truth.json` suffix.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let summary = pipeline::run_pipeline(&cfg)?;
    println!("{summary}");
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SyntheticSpec>(&text)
                .map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec::two_hotspots(0),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let data = generate_synthetic(&spec)?;
    for w in &data.truth.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = std::io::BufWriter::new(fs::File::create(&args.out)?);
    io::write_points_csv(&mut out, data.dim, &data.coords)?;
    std::io::Write::flush(&mut out)?;
    let truth = args.truth.clone().unwrap_or_else(|| truth_path(&args.out));
    io::write_json_file(&truth, &data.truth)?;
    println!(
        "{} points -> {} (truth in {})",
        data.truth.n_points,
        args.out.display(),
        truth.display()
    );
    Ok(())
}

fn truth_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.truth.json"))
}

fn tessellate(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let coords = pipeline::load_input(&cfg)?;
    let (cc, _) = pipeline::build_complex(&cfg, coords)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("cells.json");
    io::write_json_file(&path, &cc.dump())?;
    let report = validate_quantization(&cc);
    println!(
        "{} cells, {} quanta in total, smallest cell {} quanta -> {}",
        cc.len(),
        cc.total_volume_quanta(),
        report.min_volume_quanta,
        path.display()
    );
    report.into_result()
}

#[derive(Serialize)]
struct GreedyResult {
    blocks: Vec<Vec<usize>>,
    total_log_posterior: f64,
    merges: usize,
}

#[derive(Serialize)]
struct OracleReport {
    optimum: Optimum,
    greedy: GreedyResult,
    gap: f64,
}

fn oracle(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let coords = pipeline::load_input(&cfg)?;
    let (cc, _) = pipeline::build_complex(&cfg, coords)?;
    let initial = Partition::init(&cc, cfg.penalty)?;
    let optimum = exhaustive_optimum(&cc, cfg.penalty)?;
    let outcome = run_coalescence(initial, &CoalesceConfig::default())?;
    let mut blocks: Vec<Vec<usize>> = outcome
        .partition
        .blocks()
        .map(|b| {
            let mut c: Vec<usize> = b.cells.iter().map(|&i| cc.cell(i).point_index).collect();
            c.sort_unstable();
            c
        })
        .collect();
    blocks.sort();
    let greedy = GreedyResult {
        blocks,
        total_log_posterior: outcome.partition.total_log_posterior(),
        merges: outcome.history.len(),
    };
    let gap = optimum.total_log_posterior - greedy.total_log_posterior;
    println!(
        "optimum {:.12} ({} blocks, {} partitions searched), greedy {:.12} ({} blocks), gap {:.3e}",
        optimum.total_log_posterior,
        optimum.blocks.len(),
        optimum.partitions_enumerated,
        greedy.total_log_posterior,
        greedy.blocks.len(),
        gap
    );
    fs::create_dir_all(&cfg.out_dir)?;
    io::write_json_file(&cfg.out_dir.join("oracle.json"), &OracleReport { optimum, greedy, gap })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run(a) => run(a),
        Command::Generate(a) => generate(a),
        Command::Tessellate(a) => tessellate(a),
        Command::Oracle(a) => oracle(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_domain() { 3 } else { 2 })
        }
    }
}
