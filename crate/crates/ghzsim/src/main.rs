use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ghzsim::config::{RunConfig, Settings};
use ghzsim::output::{influence_text, pct, write_sweep_csv};
use ghzsim::{commands, CacheStats, Error};

/// Heralded GHZ state generation with imperfect photon sources.
#[derive(Parser)]
#[command(name = "ghzsim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fidelity and success probability at one parameter point.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Error-free point: overlap 1, no double emission, no loss.
        #[arg(long)]
        ideal: bool,
    },
    /// Measures over a parameter grid, written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Correlation coefficients and relative image ranges of a regime.
    Influence {
        #[command(flatten)]
        common: Common,
        /// Values per axis; 0 uses 0.25% overlap steps and 201 values for
        /// g2, p_L and the loss lines.
        #[arg(long, default_value_t = 0)]
        points: usize,
    },
    /// Self-checks of a netlist and of the simulator.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON file with any of the settings below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Netlist file, or "canonical".
    #[arg(long)]
    netlist: Option<String>,
    /// spdc, solid-state or close-to-optimal.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    ovl: Option<f64>,
    #[arg(long)]
    g2: Option<f64>,
    #[arg(long)]
    p_prep: Option<f64>,
    #[arg(long)]
    p_ops: Option<f64>,
    #[arg(long)]
    p_det: Option<f64>,
    /// Simplified loss coefficient (implies --simplified-loss).
    #[arg(long)]
    p_l: Option<f64>,
    /// Move all loss rates together between their regime extremes.
    #[arg(long)]
    simplified_loss: bool,
    /// Probability mass of the enumerated events.
    #[arg(long)]
    coverage: Option<f64>,
    /// six-fold (default) or herald.
    #[arg(long)]
    acceptance: Option<String>,
    /// Sweep axes, e.g. "ovl:0.97..0.995/11,g2:0.01|0.02,p_l:/5".
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Branch cache directory (default: $GHZSIM_CACHE_DIR, if set).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Seed of the randomized validation checks.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn settings(&self) -> Result<Settings, Error> {
        let flags = Settings {
            netlist: self.netlist.clone(),
            regime: self.regime.clone(),
            ovl: self.ovl,
            g2: self.g2,
            p_prep: self.p_prep,
            p_ops: self.p_ops,
            p_det: self.p_det,
            p_l: self.p_l,
            simplified_loss: self.simplified_loss.then_some(true),
            coverage: self.coverage,
            acceptance: self.acceptance.clone(),
            grid: self.grid.clone(),
            out: self.out.clone(),
            cache: self.cache.clone(),
            threads: self.threads,
            seed: self.seed,
        };
        match &self.config {
            Some(path) => Ok(flags.over(Settings::load(path)?)),
            None => Ok(flags),
        }
    }

    fn resolve(&self, ideal: bool) -> Result<RunConfig, Error> {
        RunConfig::resolve(self.settings()?, ideal)
    }
}

fn cache_line(stats: CacheStats) -> String {
    format!("cache: {} groups reused, {} built", stats.hit_groups, stats.built_groups)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let start = Instant::now();
    match cli.cmd {
        Cmd::Simulate { common, ideal } => {
            let cfg = common.resolve(ideal)?;
            let (report, stats) = commands::simulate(&cfg)?;
            print!("{}", report.text());
            println!("{}", cache_line(stats));
            println!("wall time: {:.3} s", start.elapsed().as_secs_f64());
        }
        Cmd::Sweep { common } => {
            let cfg = common.resolve(false)?;
            let (grid, stats) = commands::sweep(&cfg)?;
            match &cfg.out {
                Some(path) => {
                    let (flo, fhi) = grid.range_of(ghzsim_core::analysis::Measure::Fidelity);
                    println!("{} points written to {}", grid.len(), path.display());
                    println!("fidelity range: {} - {}", pct(flo), pct(fhi));
                }
                None => write_sweep_csv(&grid, std::io::stdout().lock())?,
            }
            eprintln!("{}", cache_line(stats));
            eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
        }
        Cmd::Influence { common, points } => {
            let cfg = common.resolve(false)?;
            let (report, stats) = commands::influence(&cfg, points)?;
            print!("{}", influence_text(&report));
            println!("{}", cache_line(stats));
            println!("wall time: {:.3} s", start.elapsed().as_secs_f64());
        }
        Cmd::Validate { common } => {
            let s = common.settings()?;
            let netlist = s.netlist.unwrap_or_else(|| "canonical".into());
            let checks = commands::validate(&netlist, s.seed.unwrap_or(ghzsim::config::DEFAULT_SEED))?;
            let mut ok = true;
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            println!("wall time: {:.3} s", start.elapsed().as_secs_f64());
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
