use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use strata_lab::experiment::{
    execute, output_root, Command, ConstantsSpec, ExperimentConfig, Exponent,
};
use strata_lab::neighborhoods::ValidationTier;
use strata_lab::Error;

#[derive(Parser)]
#[command(
    name = "strata-lab",
    version,
    about = "Subgradient runs on stratified functions with strata selection and descent audits",
    after_help = "Exit codes: 0 when every check passes, 1 when a check fails, 2 on errors.\n\
                  The output root is --out, else $STRATA_LAB_OUT, else the config's `out`, else ./strata-lab-out."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the method, build a selection and audit it.
    Run(Common),
    /// Check validity and goodness of stored artifacts.
    Verify(VerifyArgs),
    /// Mean squared gradient over several horizons.
    RateSweep(Common),
    /// Convergence monitor for a 1/k schedule.
    Kl(Common),
    /// Decreasing-step run with per-interval neighborhoods.
    Varying(Common),
}

#[derive(Args, Default)]
struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog entry: appendix_fig1, abs_diff_sq, abs_power(b), two_lines_demo.
    #[arg(long)]
    function: Option<String>,
    /// Starting point as comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    /// Constant step size.
    #[arg(long)]
    gamma: Option<f64>,
    /// Step schedule: constant:G, inverse_k:C or explicit:G1,G2,...
    #[arg(long)]
    schedule: Option<String>,
    /// Number of steps.
    #[arg(long = "K", visible_alias = "k")]
    k: Option<usize>,
    /// Exponent alpha, a number or `auto`.
    #[arg(long)]
    alpha: Option<Exponent>,
    /// Exponent beta, a number or `auto`.
    #[arg(long)]
    beta: Option<Exponent>,
    /// Step ceiling gamma0.
    #[arg(long)]
    gamma0: Option<f64>,
    /// frozen, estimate, or a JSON object with every constant.
    #[arg(long)]
    constants: Option<ConstantsSpec>,
    /// Parameter validation: report, geometric or theorem.
    #[arg(long)]
    validation: Option<ValidationTier>,
    /// Horizons for rate-sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Clip iterates to the domain instead of stopping.
    #[arg(long)]
    projected: bool,
    /// Seed for constant estimation.
    #[arg(long)]
    seed: Option<u64>,
    /// Samples used by `--constants estimate`.
    #[arg(long)]
    estimate_samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding trajectory.csv, selection.json, stratification.json and params.json.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    selection: Option<PathBuf>,
    #[arg(long)]
    stratification: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn flags(&self) -> ExperimentConfig {
        ExperimentConfig {
            function: self.function.clone(),
            start: self.start.clone(),
            gamma: self.gamma,
            schedule: self.schedule.clone(),
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            gamma0: self.gamma0,
            constants: self.constants,
            validation: self.validation,
            ks: self.ks.clone(),
            projected: self.projected.then_some(true),
            seed: self.seed,
            estimate_samples: self.estimate_samples,
            ..Default::default()
        }
    }
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, cfg, out_flag) = match &cli.command {
        Cmd::Verify(v) => {
            let top = ExperimentConfig {
                from: v.from.clone(),
                trajectory: v.trajectory.clone(),
                selection: v.selection.clone(),
                stratification: v.stratification.clone(),
                params: v.params.clone(),
                ..Default::default()
            };
            (
                Command::Verify,
                load(v.config.as_deref()).map(|c| c.overlay(&top)),
                v.out.clone(),
            )
        }
        Cmd::Run(c) | Cmd::RateSweep(c) | Cmd::Kl(c) | Cmd::Varying(c) => {
            let command = match &cli.command {
                Cmd::Run(_) => Command::Run,
                Cmd::RateSweep(_) => Command::RateSweep,
                Cmd::Kl(_) => Command::Kl,
                _ => Command::Varying,
            };
            (
                command,
                load(c.config.as_deref()).map(|cfg| cfg.overlay(&c.flags())),
                c.out.clone(),
            )
        }
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(m) = cfg.mode.as_deref().filter(|m| *m != command.name()) {
        eprintln!(
            "warning: config mode `{m}` ignored, running `{}`",
            command.name()
        );
    }
    let out = output_root(out_flag.as_deref(), cfg.out.as_deref());
    match execute(command, &cfg, &out) {
        Ok(outcome) => {
            for m in &outcome.messages {
                if m.starts_with("warning") {
                    eprintln!("{m}");
                } else {
                    println!("{m}");
                }
            }
            println!(
                "wrote {} files to {}",
                outcome.files.len(),
                outcome.dir.display()
            );
            ExitCode::from(if outcome.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
