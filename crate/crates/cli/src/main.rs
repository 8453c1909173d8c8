//! `wkbborel` — coefficient caches, growth fits, exact eigenvalues, the
//! WKB/exact comparison and its figures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use wkbborel::experiment::{self, FigureKind, PlotInput, RunConfig};
use wkbborel::numerics::{self, PrecisionContext};
use wkbborel::spectral;

#[derive(Parser, Debug)]
#[command(name = "wkbborel", version, about = "WKB expansion and Borel resummation for the quartic oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or reuse the q, r, s, t, t̃ and t̂ caches.
    Coeffs(SeriesArgs),
    /// Fit the growth constant of the cached t coefficients.
    Fit(SeriesArgs),
    /// Solve for exact eigenvalues and write `eigen.txt`.
    Eigen(EigenArgs),
    /// Compare exact and WKB eigenvalues; writes `compare.csv`.
    Compare(CompareArgs),
    /// Render fig1.svg, fig2.svg and fig3.svg from the caches and `compare.csv`.
    Plot(SeriesArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Directory holding the coefficient caches.
    #[arg(long, env = "WKBBOREL_CACHE", default_value = "cache")]
    cache_dir: PathBuf,
    /// Output directory for tables and figures.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    #[command(flatten)]
    common: Common,
    /// Decimal digits of the cached coefficient series.
    #[arg(long, default_value_t = 300)]
    digits: u32,
    /// Number of t coefficients.
    #[arg(long, default_value_t = 212)]
    max_order: usize,
    /// Rotation phase of the Borel contour (default π/8).
    #[arg(long)]
    alpha_phase: Option<f64>,
}

#[derive(Args, Debug)]
struct Range {
    #[arg(long, default_value_t = 0)]
    n_from: usize,
    #[arg(long, default_value_t = 8)]
    n_to: usize,
}

#[derive(Args, Debug)]
struct EigenArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    range: Range,
    /// Eigensolver digits (default: budgeted per level).
    #[arg(long)]
    digits: Option<u32>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    range: Range,
    /// Eigensolver digits (default: budgeted per level).
    #[arg(long)]
    digits: Option<u32>,
    /// Decimal digits of the cached coefficient series.
    #[arg(long, default_value_t = 300)]
    series_digits: u32,
    #[arg(long, default_value_t = 212)]
    max_order: usize,
    #[arg(long)]
    alpha_phase: Option<f64>,
}

impl SeriesArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            series_digits: self.digits,
            order: self.max_order,
            alpha_phase: self.alpha_phase,
            cache_dir: self.common.cache_dir.clone(),
            out_dir: self.common.out.clone(),
            ..RunConfig::default()
        }
    }
}

impl CompareArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            n_from: self.range.n_from,
            n_to: self.range.n_to,
            digits: self.digits,
            series_digits: self.series_digits,
            order: self.max_order,
            alpha_phase: self.alpha_phase,
            cache_dir: self.common.cache_dir.clone(),
            out_dir: self.common.out.clone(),
            ..RunConfig::default()
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Coeffs(args) => {
            let c = experiment::cache_coefficients(&args.config())?;
            if c.written.is_empty() {
                println!("caches up to date in {}", args.common.cache_dir.display());
            }
            for p in &c.written {
                println!("wrote {}", p.display());
            }
            println!("t coefficients: {}, a_t = {}", c.t.len(), numerics::format_real(&c.growth.a, 15));
        }
        Command::Fit(args) => {
            let c = experiment::cache_coefficients(&args.config())?;
            let g = &c.growth;
            println!("nu = {}", g.nu);
            println!("window = [{}, {}]", g.fit_window.start, g.fit_window.end - 1);
            println!("a_t = {}", numerics::format_real(&g.a, 20));
            println!("residual = {:.3e}", g.residual.to_f64());
        }
        Command::Eigen(args) => {
            if args.range.n_from > args.range.n_to {
                anyhow::bail!("empty level range {}..={}", args.range.n_from, args.range.n_to);
            }
            let mut results = Vec::new();
            for n in args.range.n_from..=args.range.n_to {
                let ctx = PrecisionContext::new(args.digits.unwrap_or_else(|| experiment::eigen_digits(n)))?;
                let r = spectral::solve_eigenvalue(n, &ctx).with_context(|| format!("level {n}"))?;
                println!("N = {n:3}  E = {}", numerics::format_real(&r.e, 30));
                results.push(r);
            }
            let path = out_file(&args.common.out, "eigen.txt")?;
            wkbborel::io::write_atomic(&path, spectral::emit_eigen_table(&results).as_bytes())?;
            println!("wrote {}", path.display());
        }
        Command::Compare(args) => {
            let cfg = args.config();
            let results = experiment::run_compare(&cfg)?;
            let records: Vec<_> = results.iter().map(|c| c.record.clone()).collect();
            let path = out_file(&cfg.out_dir, "compare.csv")?;
            experiment::write_csv(&records, &path)?;
            for c in &results {
                let r = &c.record;
                println!(
                    "N = {:3}  Delta = {:+.6e}  sigma = {:.1e}  uncertainty = {:.1e}{}",
                    r.n,
                    r.delta_e.to_f64(),
                    r.sigma.to_f64(),
                    c.details.uncertainty.to_f64(),
                    if c.details.flagged { "  [flagged]" } else { "" }
                );
            }
            let checks = experiment::check_invariants(&results);
            let mut ok = true;
            for chk in &checks {
                ok &= chk.passed;
                println!(
                    "{} {:<20} N = {:3}  {}",
                    if chk.passed { "ok  " } else { "FAIL" },
                    chk.name,
                    chk.n,
                    chk.detail
                );
            }
            println!("wrote {}", path.display());
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Plot(args) => {
            let cfg = args.config();
            let c = experiment::cache_coefficients(&cfg)?;
            let csv = cfg.out_dir.join("compare.csv");
            let records = experiment::read_csv(&csv)?;
            let input = PlotInput {
                records: &records,
                t: Some(&c.t),
                a_t: Some(&c.growth.a),
            };
            for kind in [FigureKind::Fig1, FigureKind::Fig2, FigureKind::Fig3] {
                let path = out_file(&cfg.out_dir, kind.file_name())?;
                experiment::emit_plot(kind, input, &path)?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}
