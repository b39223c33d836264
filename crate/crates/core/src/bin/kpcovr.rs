use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kpcovr::losses::LossReport;
use kpcovr::pipeline::{self, AlphaGrid, IngestOptions, InputFiles, KernelChoice, RunConfig};
use kpcovr::{Error, Execution, Method, Result};

#[derive(Parser)]
#[command(name = "kpcovr", version, about = "Principal covariates regression and its kernel variants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model, score both splits and write a map document and loss table.
    Run(Common),
    /// Fit a mixing method over an alpha grid and write the loss table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid as start:end:count.
        #[arg(long, value_name = "A:B:N")]
        alpha_grid: Option<AlphaGrid>,
        /// Also write one map document per alpha.
        #[arg(long)]
        maps: bool,
    },
    /// Recompute the losses recorded in a map document.
    Rescore {
        document: PathBuf,
        /// Largest accepted deviation from the recorded losses.
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Feature file, or the combined file when --targets is omitted.
    #[arg(long)]
    features: PathBuf,
    /// Target file; without it, target columns are those prefixed `targets:`.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    method: Method,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = pipeline::config::DEFAULT_N_LATENT)]
    n_latent: usize,
    #[arg(long, default_value_t = pipeline::config::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, value_name = "linear|rbf")]
    kernel: Option<KernelChoice>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    m_active: Option<usize>,
    #[arg(long, default_value_t = 0)]
    fps_start: usize,
    #[arg(long, default_value_t = 0.5)]
    split_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integer structure-id column.
    #[arg(long, value_name = "COLUMN")]
    groups: Option<String>,
    /// Multiply targets by the number of environments in each structure.
    #[arg(long)]
    per_atom_targets: bool,
    #[arg(long, value_name = "PREFIX", default_value = "kpcovr")]
    out: PathBuf,
    /// Run every loop on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn into_config(self) -> Result<RunConfig> {
        let files = match self.targets {
            Some(targets) => InputFiles::Separate {
                features: self.features,
                targets,
            },
            None => InputFiles::Combined(self.features),
        };
        let mut input = IngestOptions::new(files);
        input.groups = self.groups;
        input.per_atom_targets = self.per_atom_targets;
        let kernel = match (self.kernel, self.gamma) {
            (Some(KernelChoice::Linear), Some(_)) => return Err(Error::InvalidInput("--gamma needs --kernel rbf".into())),
            (None, Some(g)) | (Some(KernelChoice::Rbf { .. }), Some(g)) => Some(KernelChoice::Rbf { gamma: Some(g) }),
            (k, None) => k,
        };
        let mut config = RunConfig::new(input, self.method);
        config.kernel = kernel;
        config.alpha = self.alpha;
        config.n_latent = self.n_latent;
        config.lambda = self.lambda;
        config.m_active = self.m_active;
        config.fps_start = self.fps_start;
        config.split_frac = self.split_frac;
        config.seed = self.seed;
        config.out = self.out;
        if self.sequential {
            config.execution = Execution::Sequential;
        }
        config.validate()?;
        Ok(config)
    }
}

fn print_reports(reports: &[LossReport]) {
    println!("{:>8} {:>8} {:>6} {:>14} {:>14} {:>14}", "alpha", "n_latent", "split", "l_proj", "l_regr", "l_total");
    for r in reports {
        println!(
            "{:>8.4} {:>8} {:>6} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.alpha,
            r.n_latent,
            r.split.as_str(),
            r.l_proj,
            r.l_regr,
            r.l_total
        );
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = common.into_config()?;
            let out = pipeline::run(&config)?;
            pipeline::write_run(&config, &out)?;
            print_reports(&out.losses);
            println!("wrote {} and {}", config.map_path().display(), config.loss_path().display());
        }
        Command::Sweep {
            common,
            alpha_grid,
            maps,
        } => {
            let mut config = common.into_config()?;
            config.alpha_grid = Some(alpha_grid.unwrap_or_default());
            config.write_sweep_maps = maps;
            config.validate()?;
            let out = pipeline::sweep(&config)?;
            pipeline::write_sweep(&config, &out)?;
            print_reports(&out.reports);
            println!("alpha* = {} ({} split)", out.best.alpha, out.best.split.as_str());
            println!("wrote {}", config.loss_path().display());
        }
        Command::Rescore { document, tolerance } => {
            let (reports, deviation) = pipeline::rescore_file(&document)?;
            print_reports(&reports);
            println!("largest deviation from recorded losses: {deviation:e}");
            if deviation.is_nan() || deviation > tolerance {
                return Err(Error::InvalidInput(format!(
                    "recomputed losses deviate by {deviation:e}, above {tolerance:e}"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
