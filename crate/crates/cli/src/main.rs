use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fermi_scatter::cli_io::{
    cmd_born, cmd_cache_clear, cmd_cache_inspect, cmd_check, cmd_scan, cmd_solve, error_json, ChannelRequest,
    RunConfig, CONFIG_KEYS,
};
use fermi_scatter::error::Error;
use fermi_scatter::lap_checks::CheckStatus;
use fermi_scatter::oscillator::MultiIndex;
use fermi_scatter::scattering::XsecKind;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn config_help() -> String {
    let mut s = String::from("Config file keys (flat `key = value`, `#` comments; flags override the file):\n");
    for (k, v) in CONFIG_KEYS {
        s.push_str(&format!("  {k:<18} {v}\n"));
    }
    s.push_str("\nEnvironment: FERMI_SCATTER_CACHE overrides cache_dir.\n");
    s.push_str("Exit status: 0 ok, 1 a selected check failed, 2 usage error, 3 runtime error (JSON on stderr).");
    s
}

#[derive(Parser, Debug)]
#[command(name = "fermi-scatter", version, about = "Neutron scattering off a harmonically bound nucleus with a zero-range interaction")]
#[command(after_long_help = config_help())]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Oscillator frequency.
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Inverse scattering-length parameter.
    #[arg(long, global = true, conflicts_with = "scattering_length", allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Scattering length a = 1/(8 pi alpha).
    #[arg(long, global = true, allow_hyphen_values = true)]
    scattering_length: Option<f64>,
    /// Largest total oscillator degree in the basis.
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Total energy.
    #[arg(long, global = true)]
    energy: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// First-order cross-section tables.
    Born {
        #[arg(long, value_enum, default_value_t = BornKind::Elastic)]
        kind: BornKind,
        /// Final shell for `--kind shell`.
        #[arg(long, default_value_t = 0)]
        shell: usize,
        /// Initial state for `--kind state`, as `a,b,c`.
        #[arg(long, default_value = "0,0,0")]
        n_in: String,
        /// Final state for `--kind state`, as `a,b,c`.
        #[arg(long, default_value = "0,0,0")]
        n_out: String,
        /// Scattering angle for `--kind spectrum`.
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
    },
    /// Charges and amplitudes for channels `IN>OUT@THETA,PHI`, e.g. `0,0,0>0,0,1@0.5,0`.
    Solve {
        channels: Vec<String>,
    },
    /// Smallest singular value of Gamma+(mu)+alpha over an energy grid.
    Scan {
        #[arg(long)]
        mu_min: f64,
        #[arg(long)]
        mu_max: f64,
        #[arg(long, default_value_t = 41)]
        steps: usize,
    },
    /// Numerical self-checks; one JSON report per line on stdout.
    Check {
        /// agmon, ufficio, free_density, lap, volta or all (volta is not part of all).
        #[arg(long = "check", value_delimiter = ',', default_value = "all")]
        checks: Vec<String>,
        /// Smaller basis and fewer extrapolation radii.
        #[arg(long)]
        quick: bool,
    },
    /// Kernel-matrix cache maintenance.
    Cache {
        #[arg(value_enum)]
        action: CacheAction,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BornKind {
    Elastic,
    Shell,
    State,
    Spectrum,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CacheAction {
    Inspect,
    Clear,
}

fn parse_index(s: &str) -> Result<MultiIndex, Error> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad oscillator index {s:?}"))))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b, c] => Ok(MultiIndex::new(*a, *b, *c)),
        _ => Err(Error::Config(format!("expected three indices, got {s:?}"))),
    }
}

fn build_config(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = c.omega {
        cfg.omega = v;
    }
    if let Some(v) = c.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = c.scattering_length {
        cfg.set("scattering_length", &v.to_string())?;
    }
    if let Some(v) = c.cutoff {
        cfg.cutoff = v;
    }
    if let Some(v) = c.energy {
        cfg.energy = v;
    }
    if let Some(v) = &c.out {
        cfg.out_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::InvalidParams(_))
}

fn run(cli: Cli) -> Result<u8, Error> {
    let cfg = build_config(&cli.common)?;
    let ensure_out = || std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io(e.to_string()));
    match cli.command {
        Command::Born { kind, shell, n_in, n_out, theta } => {
            let kind = match kind {
                BornKind::Elastic => XsecKind::Elastic,
                BornKind::Shell => XsecKind::Shell { n: shell },
                BornKind::State => XsecKind::State { n_in: parse_index(&n_in)?, n_out: parse_index(&n_out)? },
                BornKind::Spectrum => XsecKind::Spectrum { theta },
            };
            ensure_out()?;
            let a = cmd_born(&cfg, kind)?;
            log::info!("wrote {}", a.json.display());
        }
        Command::Solve { channels } => {
            let reqs = channels.iter().map(|s| ChannelRequest::parse(s)).collect::<Result<Vec<_>, _>>()?;
            ensure_out()?;
            let a = cmd_solve(&cfg, &reqs)?;
            log::info!("wrote {}", a.json.display());
        }
        Command::Scan { mu_min, mu_max, steps } => {
            ensure_out()?;
            let a = cmd_scan(&cfg, mu_min, mu_max, steps)?;
            log::info!("wrote {}", a.json.display());
        }
        Command::Check { checks, quick } => {
            let reports = cmd_check(&cfg, &checks, quick)?;
            let mut failed = false;
            for r in &reports {
                println!("{}", serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?);
                failed |= r.status == CheckStatus::Fail;
            }
            if failed {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::Cache { action: CacheAction::Inspect } => {
            for entry in cmd_cache_inspect(&cfg)? {
                println!("{entry}");
            }
        }
        Command::Cache { action: CacheAction::Clear } => {
            let n = cmd_cache_clear(&cfg)?;
            log::info!("removed {n} cache entries");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(if is_usage(&e) { EXIT_USAGE } else { EXIT_RUNTIME })
        }
    }
}
