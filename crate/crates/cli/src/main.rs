use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcnet::analytics::StrengthMode;
use pcnet::em::{EmConfig, Mode};
use pcnet::neighborhood::EdgeRule;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "pcnet", version, about = "Sparse partial-correlation networks for heavy-tailed data")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo experiment described by a JSON manifest.
    Simulate {
        #[arg(long)]
        manifest: PathBuf,
        /// Overrides the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for metrics.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a network from a headed numeric CSV.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        estimation: EstimationArgs,
        /// Network JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-penalty BIC table as CSV.
        #[arg(long)]
        bic_csv: Option<PathBuf>,
    },
    /// Network measures, centralities and degree histogram.
    Analyze {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, value_enum, default_value = "signed")]
        strength: StrengthArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Propagate a unit shock from one node.
    Shock {
        #[arg(long)]
        network: PathBuf,
        /// Node name or 1-based index.
        #[arg(long)]
        node: String,
        /// Result JSON path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prices → log-returns → AR-GARCH residuals → rolling networks.
    Pipeline {
        #[arg(long)]
        prices: PathBuf,
        #[command(flatten)]
        estimation: EstimationArgs,
        /// Window length in rows.
        #[arg(long, default_value_t = pcnet::pipeline::ROWS_PER_YEAR)]
        window: usize,
        /// Window shift in rows.
        #[arg(long, default_value_t = pcnet::pipeline::ROWS_PER_MONTH)]
        step: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum StrengthArg {
    Signed,
    Absolute,
}

impl From<StrengthArg> for StrengthMode {
    fn from(s: StrengthArg) -> Self {
        match s {
            StrengthArg::Signed => StrengthMode::Signed,
            StrengthArg::Absolute => StrengthMode::Absolute,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct EstimationArgs {
    /// gaussian or t.
    #[arg(long, default_value = "t")]
    mode: Mode,
    /// Degrees of freedom for t mode.
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = (-6.0f64).exp())]
    lambda_lo: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda_hi: f64,
    #[arg(long, default_value_t = 100)]
    lambda_count: usize,
    #[arg(long, default_value = "and")]
    rule: EdgeRule,
    /// Accepted for a uniform interface; estimation itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl EstimationArgs {
    fn config(&self) -> pcnet::Result<(EmConfig, pcnet::selection::LambdaGrid)> {
        if self.mode == Mode::Gaussian && self.nu.is_some() {
            return Err(pcnet::Error::Config("--nu only applies to --mode t".into()));
        }
        let mut config = EmConfig {
            mode: self.mode,
            rule: self.rule,
            ..EmConfig::default()
        };
        if let Some(nu) = self.nu {
            config.nu = nu;
        }
        config.penalty.alpha = self.alpha;
        config.penalty.lambda = self.lambda_lo;
        config.validate()?;
        let grid = if self.lambda_count == 1 {
            pcnet::selection::LambdaGrid::single(self.lambda_lo)?
        } else {
            pcnet::selection::build_grid(self.lambda_lo, self.lambda_hi, self.lambda_count)?
        };
        Ok((config, grid))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let outcome = match cli.command {
        Command::Simulate { manifest, seed, out } => commands::simulate(&manifest, seed, &out),
        Command::Estimate {
            data,
            estimation,
            out,
            bic_csv,
        } => estimation
            .config()
            .and_then(|(cfg, grid)| commands::estimate(&data, &cfg, &grid, &out, bic_csv.as_deref())),
        Command::Analyze { network, strength, out } => commands::analyze(&network, strength.into(), &out),
        Command::Shock { network, node, out } => commands::shock(&network, &node, out.as_deref()),
        Command::Pipeline {
            prices,
            estimation,
            window,
            step,
            out,
        } => estimation
            .config()
            .and_then(|(cfg, grid)| commands::pipeline(&prices, cfg, grid, window, step, &out)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
