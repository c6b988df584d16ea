use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use omicsmap::pipeline::{
    benchmark, benchmark_csv, export_map, map_from_json, run_pipeline, BenchmarkConfig, DataSource, MapFormat,
    PipelineConfig,
};
use omicsmap::numerics::SeededRng;
use omicsmap::synth::{simulate, SimConfig};
use omicsmap::{Error, Result};

#[derive(Parser)]
#[command(name = "omicsmap", version, about = "Multi-omics biomarker discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort and its gene graph.
    Simulate(Common),
    /// Run the full pipeline and write its tables and map.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "dot")]
        format: MapFormat,
    },
    /// Run a grid of configurations over seeds.
    Benchmark {
        /// Benchmark grid (JSON with `runs` and `seeds`).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-export a saved map.json.
    ExportMap {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value = "dot")]
        format: MapFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config {
        field: "--config".into(),
        reason: format!("cannot read {}: {e}", path.display()),
    })
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let mut cfg = PipelineConfig::from_json(&read_text(path)?)?;
            cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            cfg
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = load_config(&common)?;
            let sim: SimConfig = match &cfg.data {
                DataSource::Simulate(sim) => sim.clone(),
                DataSource::Ingest(_) => {
                    return Err(Error::Config {
                        field: "data".into(),
                        reason: "simulate needs a `simulate` data source".into(),
                    })
                }
            };
            let rng = SeededRng::new(cfg.seed);
            let (ds, graph) = simulate(&sim, &rng.split("data"))?;
            let header = vec![format!("config_hash={} seed={}", cfg.hash(), cfg.seed)];
            ds.write_csv(&common.out, &header)?;
            write(&common.out.join("edges.tsv"), &graph.to_edge_list(&header))?;
            info!("wrote cohort of {} samples to {}", ds.n_samples(), common.out.display());
        }
        Command::Run { common, format } => {
            let cfg = load_config(&common)?;
            let out = run_pipeline(&cfg)?;
            out.write(&common.out, format)?;
            eprintln!(
                "auc {:.4}  f1 {:.4}  significant {}  ({:.1}s)",
                out.report.auc, out.report.f1, out.report.n_significant, out.report.runtime_secs
            );
        }
        Command::Benchmark { config, out } => {
            let grid: BenchmarkConfig = serde_json::from_str(&read_text(&config)?).map_err(|e| Error::Config {
                field: "<json>".into(),
                reason: e.to_string(),
            })?;
            let rows = benchmark(&grid)?;
            let header = vec![format!("seeds={:?}", grid.seeds)];
            write(&out.join("benchmark.csv"), &benchmark_csv(&rows, &header))?;
        }
        Command::ExportMap { map, format, out } => {
            let text = std::fs::read_to_string(&map).map_err(|e| Error::Io {
                path: map.clone(),
                source: e,
            })?;
            let parsed = map_from_json(&text)?;
            write(&out.join(format!("map.{}", format.extension())), &export_map(&parsed, format))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
