use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use negcurv_cli::commands::execute;
use negcurv_cli::config::{resolve, FileConfig};
use negcurv_cli::exit_code;

#[derive(Parser)]
#[command(
    name = "negcurv",
    version,
    about = "Green's functions, Poisson problems and Ricci flow on negatively curved model surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dirichlet λ₁ on an exhaustion, extrapolated and compared with b²/4
    Spectrum(Flags),
    /// Exhaustion Green's functions per pole with fitted (A, B, C0)
    Green(Flags),
    /// Heat kernel on the unit ball: L² decay and ball Green mass
    Heat(Flags),
    /// Poisson problem by radial, exhaustion and Green-integral routes
    Poisson(Flags),
    /// Normalized Ricci flow from bump initial data
    Flow(Flags),
    /// Run the acceptance suite
    Verify(Flags),
}

#[derive(Args)]
struct Flags {
    /// hyperbolic2, hyperbolic3, hyperbolic2:K=-0.5, perturbed, perturbed:eta=0.2, euclidean2
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long)]
    ntheta: Option<usize>,
    /// Comma-separated pole radii or random:N
    #[arg(long)]
    poles: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    /// radial, exhaustion, green-integral or all
    #[arg(long)]
    route: Option<String>,
    /// zero, powerlaw:C=1,eps=1, manufactured or bump:amp=1,width=1
    #[arg(long)]
    source: Option<String>,
    /// quick or full
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// off, use or rebuild
    #[arg(long)]
    cache: Option<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Config file; flags take precedence over its keys
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn into_file_config(self) -> anyhow::Result<FileConfig> {
        let base = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let flags = FileConfig {
            model: self.model,
            rmax: self.rmax,
            nr: self.nr,
            ntheta: self.ntheta,
            poles: self.poles,
            eps: self.eps,
            route: self.route,
            source: self.source,
            profile: self.profile,
            out: self.out,
            cache: self.cache,
            cache_dir: self.cache_dir,
            seed: self.seed,
            flow: None,
        };
        Ok(flags.over(base))
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (name, flags) = match cli.command {
        Command::Spectrum(f) => ("spectrum", f),
        Command::Green(f) => ("green", f),
        Command::Heat(f) => ("heat", f),
        Command::Poisson(f) => ("poisson", f),
        Command::Flow(f) => ("flow", f),
        Command::Verify(f) => ("verify", f),
    };
    let cfg = resolve(name, flags.into_file_config()?)?;
    execute(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
