use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mineplan_core::econ::MiningMode;
use mineplan_core::ga::{evolve, write_trace_csv, FitnessMode, ScheduleDocument};
use mineplan_core::model::{generate_test_model, load_block_model, save_block_model, TestModelParams};
use mineplan_core::report::{build_report, emit_comparison, emit_report, EnsembleReport};
use mineplan_core::reserve::Reserve;
use mineplan_core::risk::RiskMode;
use mineplan_core::RunConfig;

#[derive(Parser)]
#[command(name = "mineplan", version, about = "Ensemble-aware open-pit production scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic two-pit test model (CSV plus JSON sidecar).
    GenTestModel(GenArgs),
    /// Run the genetic algorithm and write the best schedule.
    Optimize(OptimizeArgs),
    /// Replay schedules against every ensemble member and write reports.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output CSV path; the sidecar goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    members: usize,
    /// Pit slope in degrees.
    #[arg(long, default_value_t = 45.0)]
    slope: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Npv,
    Discounted,
}

#[derive(Clone, Copy, ValueEnum)]
enum MiningArg {
    OreFirst,
    Simultaneous,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    /// Run configuration JSON with optional `econ`, `ga` and `risk` objects.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Fixed risk coefficient; overrides the one derived from alpha.
    #[arg(long)]
    coefficient: Option<f64>,
    /// Units remembered by the blending spawner.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_enum)]
    mining: Option<MiningArg>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Schedule JSON written by `optimize`.
    #[arg(long, required_unless_present = "compare")]
    schedule: Option<PathBuf>,
    /// Two schedule JSON files to report side by side.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "schedule")]
    compare: Option<Vec<PathBuf>>,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.ga.seed = seed;
        }
        if let Some(mode) = self.mode {
            config.ga.fitness = match mode {
                ModeArg::Npv => FitnessMode::Npv,
                ModeArg::Discounted => FitnessMode::Discounted,
            };
        }
        if let Some(alpha) = self.alpha {
            config.risk.alpha = alpha;
            if config.risk.mode == RiskMode::None {
                config.risk.mode = RiskMode::Normal;
            }
        }
        if let Some(k) = self.coefficient {
            config.risk.mode = RiskMode::Fixed;
            config.risk.coefficient = Some(k);
        }
        if let Some(w) = self.window {
            config.risk.window = w;
        }
        if let Some(m) = self.mining {
            config.econ.mining_mode = match m {
                MiningArg::OreFirst => MiningMode::OreFirst,
                MiningArg::Simultaneous => MiningMode::Simultaneous,
            };
        }
        config.validate()?;
        Ok(config)
    }

    fn setup(&self) -> Result<(RunConfig, Reserve, usize)> {
        if let Some(n) = self.threads {
            ensure!(n > 0, "--threads must be at least 1");
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
        }
        let config = self.run_config()?;
        let model = load_block_model(&self.model)?;
        let reserve = Reserve::new(&model, config.ga.precedence);
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok((config, reserve, model.n_members()))
    }
}

fn gen_test_model(args: &GenArgs) -> Result<()> {
    let params = TestModelParams {
        members: args.members,
        slope_deg: args.slope,
        ..Default::default()
    };
    let model = generate_test_model(&params)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_block_model(&model, &args.out)?;
    println!(
        "wrote {}: {} blocks, {} ore, {} members",
        args.out.display(),
        model.len(),
        model.ore_block_count(),
        model.n_members()
    );
    Ok(())
}

fn optimize(args: &OptimizeArgs) -> Result<()> {
    let (mut config, reserve, _) = args.common.setup()?;
    if let Some(g) = args.generations {
        config.ga.generations = g;
    }
    if let Some(p) = args.population {
        config.ga.population = p;
    }
    config.validate()?;
    let result = evolve(&reserve, &config.econ, &config.risk, &config.ga)?;
    let out = &args.common.out;
    ScheduleDocument::from_result(&result, config.ga.fitness).write(&out.join("schedule.json"))?;
    write_trace_csv(&result.trace, &out.join("trace.csv"))?;
    config.save(&out.join("config.json"))?;
    println!(
        "best fitness {:.2} over {} periods (coefficient {:.4}); wrote {}",
        result.evaluation.fitness,
        result.evaluation.schedule.horizon(),
        result.coefficient,
        out.display()
    );
    Ok(())
}

fn report_for(path: &Path, config: &RunConfig, reserve: &Reserve, n_members: usize) -> Result<EnsembleReport> {
    let doc = ScheduleDocument::read(path)?;
    let (schedule, parcels) = doc
        .resolve(reserve)
        .with_context(|| format!("{} does not fit this model", path.display()))?;
    Ok(build_report(&schedule, &parcels.parcels, &config.econ, n_members)?)
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (config, reserve, n_members) = args.common.setup()?;
    let out = &args.common.out;
    let summarize = |name: &str, r: &EnsembleReport| {
        println!(
            "{name}: mean NPV {:.2}, total SV {:.2}, {} periods",
            r.mean_npv,
            r.total_sv,
            r.horizon()
        )
    };
    match (&args.schedule, &args.compare) {
        (Some(path), None) => {
            let report = report_for(path, &config, &reserve, n_members)?;
            emit_report(&report, &out.join("report.csv"))?;
            summarize("report", &report);
        }
        (None, Some(pair)) => {
            let a = report_for(&pair[0], &config, &reserve, n_members)?;
            let b = report_for(&pair[1], &config, &reserve, n_members)?;
            emit_report(&a, &out.join("report_a.csv"))?;
            emit_report(&b, &out.join("report_b.csv"))?;
            emit_comparison(&a, &b, &out.join("comparison.csv"))?;
            summarize("a", &a);
            summarize("b", &b);
        }
        _ => bail!("pass either --schedule or --compare A B"),
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenTestModel(args) => gen_test_model(&args),
        Command::Optimize(args) => optimize(&args),
        Command::Evaluate(args) => evaluate(&args),
    }
}
