use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use mhlj::chain::ChainStats;
use mhlj::kernels::KernelKind;
use mhlj::walker::strategy_kernel;
use mhlj::{DenseMatrix, TransitionKernel};
use mhlj_experiments::presets::{self, Preset};
use mhlj_experiments::spec::default_output_dir;
use mhlj_experiments::{run_experiment, run_sweep, ExpError, ExperimentSpec, Result, StrategySummary, SweepSpec};

fn preset_help() -> String {
    let mut s = String::from("Presets:\n");
    for (name, desc) in presets::PRESETS {
        s.push_str(&format!("  {name:<18} {desc}\n"));
    }
    s.push_str(&format!(
        "\nThe default output directory is ${} or ./runs.",
        mhlj_experiments::spec::OUT_DIR_ENV
    ));
    s
}

#[derive(Parser)]
#[command(name = "mhlj", version, about = "Random-walk learning experiments", after_help = preset_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Replace a config field, e.g. `gamma=0.01` or `data.noise_std=5`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Use seeds 0..N instead of the configured list.
    #[arg(long)]
    seeds: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the instance of one seed and write it as text.
    GenInstance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the dense kernel of one strategy.
        #[arg(long)]
        kernel_out: Option<PathBuf>,
        /// Index of that strategy in the config.
        #[arg(long, default_value_t = 0)]
        strategy: usize,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a sweep config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print chain statistics of a saved kernel matrix.
    Analyze {
        #[arg(long)]
        kernel: PathBuf,
    },
    /// Run a named preset.
    Preset {
        #[arg(value_parser = PossibleValuesParser::new(presets::names()))]
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

fn apply_common(spec: &mut ExperimentSpec, common: &Common) {
    if let Some(n) = common.seeds {
        spec.seeds = (0..n as u64).collect();
    }
    if let Some(out) = &common.out {
        spec.output_dir = out.clone();
    }
}

fn print_summary(rows: &[StrategySummary]) {
    println!(
        "{:<16} {:>10} {:>14} {:>14} {:>12} {:>9} {:>10}",
        "strategy", "to_thresh", "final_sq_err", "plateau", "half_cover", "trans/up", "eta"
    );
    for s in rows {
        let hit = s.iters_to_threshold.map_or_else(|| "inf".to_string(), |t| t.to_string());
        println!(
            "{:<16} {:>10} {:>14.6e} {:>14.6e} {:>12} {:>9.4} {:>10.3e}",
            s.label, hit, s.median_final_sq_error, s.median_plateau_sq_error, s.median_half_cover_time, s.mean_transitions_per_update, s.eta
        );
    }
}

fn experiment(spec: ExperimentSpec, common: &Common) -> Result<()> {
    let mut spec = spec.with_overrides(&common.overrides)?;
    apply_common(&mut spec, common);
    spec.validate()?;
    println!("# config_echo\n{}", spec.to_toml()?);
    if common.dry_run {
        return Ok(());
    }
    let summary = run_experiment(&spec)?;
    println!("# wrote {}", summary.dir.display());
    print_summary(&summary.strategies);
    Ok(())
}

fn sweep(sweep: SweepSpec, common: &Common) -> Result<()> {
    let mut sweep = sweep.with_overrides(&common.overrides)?;
    apply_common(&mut sweep.base, common);
    sweep.validate()?;
    println!("# config_echo\n{}", sweep.to_toml()?);
    if common.dry_run {
        return Ok(());
    }
    let summary = run_sweep(&sweep)?;
    println!("# wrote {}", summary.dir.display());
    for (value, rows) in &summary.points {
        println!("## {} = {value}", sweep.axis.name());
        print_summary(rows);
    }
    Ok(())
}

fn analyze(path: &Path) -> Result<()> {
    let matrix = DenseMatrix::<f64>::read_text(BufReader::new(std::fs::File::open(path)?))?;
    let kernel = TransitionKernel::from_matrix(KernelKind::Custom, matrix)?;
    let stats = ChainStats::compute(&kernel, None)?;
    println!("n = {}", kernel.n());
    println!("eta = {:.16e}", stats.spectral_gap);
    println!("db_residual = {:.16e}", stats.db_residual);
    println!("reversible = {}", stats.is_reversible);
    let pi: Vec<String> = stats.stationary.iter().map(|p| format!("{p:.16e}")).collect();
    println!("stationary = {}", pi.join(" "));
    Ok(())
}

fn gen_instance(config: &Path, seed: u64, out: &Path, kernel_out: Option<&Path>, strategy: usize, overrides: &[String]) -> Result<()> {
    let spec = ExperimentSpec::from_toml_with_overrides(&std::fs::read_to_string(config)?, overrides)?;
    let instance = spec.instance(seed)?;
    instance.write_text(std::io::BufWriter::new(std::fs::File::create(out)?))?;
    if let Some(path) = kernel_out {
        let s = spec
            .strategies
            .get(strategy)
            .ok_or_else(|| ExpError::Validation(vec![format!("strategy index {strategy} out of range")]))?;
        let kernel = strategy_kernel(&instance, &s.strategy)?;
        kernel.matrix().write_text(std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenInstance {
            config,
            seed,
            out,
            kernel_out,
            strategy,
            overrides,
        } => gen_instance(&config, seed, &out, kernel_out.as_deref(), strategy, &overrides),
        Command::Run { config, common } => experiment(ExperimentSpec::load(&config)?, &common),
        Command::Sweep { config, common } => {
            sweep(SweepSpec::from_toml(&std::fs::read_to_string(&config)?)?, &common)
        }
        Command::Analyze { kernel } => analyze(&kernel),
        Command::Preset { name, common } => {
            let out = common.out.clone().unwrap_or_else(default_output_dir);
            let seeds = common.seeds.unwrap_or(presets::DEFAULT_SEEDS);
            match presets::preset(&name, seeds, &out) {
                Some(Preset::Experiment(spec)) => experiment(spec, &common),
                Some(Preset::Sweep(s)) => sweep(s, &common),
                None => unreachable!("clap restricts preset names"),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
