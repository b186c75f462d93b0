//! Command line front end: one-off measurements (`ap`, `bmo`, `opnorm`,
//! `commutator`), the verification suites (`verify`), and report
//! emission (`report`).
//!
//! Exit codes: 0 when everything passed, 1 when a suite reported a
//! property violation or drift warning, 2 for configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mwlab::lab::{
    build_symbol, load_config, run_all, run_suite, write_report, ExperimentConfig,
    ExperimentReport, Verdict,
};
use mwlab::norms::{opnorm, CommutatorOp, CzoOp, LowerOpts};
use mwlab::weights::{ap_characteristic, generate_weight};
use mwlab::{CubeFamily, Error};

#[derive(Parser)]
#[command(
    name = "mwlab",
    version,
    about = "Numerical laboratory for matrix-weighted commutator estimates"
)]
struct Cli {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured base dyadic depth.
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Report output directory; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Muckenhoupt characteristic of the configured U weight.
    Ap,
    /// Oscillation quantities of the configured symbol between U and V.
    Bmo,
    /// Weighted norm of the configured transform on L^p(U).
    Opnorm,
    /// Weighted commutator norm from L^p(U) to L^p(V).
    Commutator,
    /// Runs one verification suite by name, or `all`.
    Verify { suite: String },
    /// Runs the configured suite(s) and writes CSV and JSON reports.
    Report,
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(depth) = cli.depth {
        cfg.depth = depth;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn lower_opts(cfg: &ExperimentConfig) -> LowerOpts {
    LowerOpts {
        restarts: cfg.restarts,
        seed: cfg.seed,
        max_iters: cfg.lower_iters,
        ..LowerOpts::default()
    }
}

fn run_ap(cfg: &ExperimentConfig) -> Result<(), Error> {
    let grid = cfg.grid()?;
    let family = CubeFamily::all_shifts(&grid);
    let w = generate_weight(&grid, &cfg.u_weight, cfg.p, cfg.seed)?;
    let value = ap_characteristic(&w, cfg.p, &family, false)?;
    let out = serde_json::json!({
        "p": cfg.p,
        "family": family.descriptor(),
        "ap_characteristic": value,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run_bmo(cfg: &ExperimentConfig) -> Result<(), Error> {
    if cfg.m != cfg.n {
        return Err(Error::Config(format!(
            "bmo needs the symbol size m={} to match the weight size n={}",
            cfg.m, cfg.n
        )));
    }
    let grid = cfg.grid()?;
    let family = CubeFamily::all_shifts(&grid);
    let u = generate_weight(&grid, &cfg.u_weight, cfg.p, cfg.seed)?;
    let v = generate_weight(&grid, &cfg.v_weight, cfg.p, cfg.seed.wrapping_add(1))?;
    let b = build_symbol(&grid, cfg.m, &cfg.symbol, cfg.seed.wrapping_add(2))?;
    let report = mwlab::bmo::jn_quantities(&b, &u, &v, cfg.p, &family)?;
    let out = serde_json::json!({
        "p": report.p,
        "family": report.family,
        "cube_average": { "value": report.a.value, "argmax": report.a.argmax },
        "pointwise_weight": { "value": report.b.value, "argmax": report.b.argmax },
        "adjoint_form": { "value": report.c.value, "argmax": report.c.argmax },
        "tilde_primal": { "value": report.d.value, "argmax": report.d.argmax },
        "tilde_dual": { "value": report.e.value, "argmax": report.e.argmax },
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run_opnorm(cfg: &ExperimentConfig) -> Result<(), Error> {
    let grid = cfg.grid()?;
    let kind = cfg.operator.to_kind();
    kind.validate(grid.dim)
        .map_err(|e| Error::Config(e.to_string()))?;
    let u = generate_weight(&grid, &cfg.u_weight, cfg.p, cfg.seed)?;
    let op = CzoOp {
        grid,
        n: cfg.n,
        kind,
    };
    let est = opnorm(&op, &u, &u, cfg.p, &lower_opts(cfg))?;
    let out = serde_json::json!({
        "p": cfg.p,
        "operator": format!("{:?}", kind),
        "value": est.value,
        "mode": format!("{:?}", est.mode),
        "iterations": est.iterations,
        "witness_hash": est.witness_hash,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run_commutator(cfg: &ExperimentConfig) -> Result<(), Error> {
    if cfg.m != cfg.n {
        return Err(Error::Config(format!(
            "commutator needs the symbol size m={} to match the weight size n={}",
            cfg.m, cfg.n
        )));
    }
    let grid = cfg.grid()?;
    let kind = cfg.operator.to_kind();
    kind.validate(grid.dim)
        .map_err(|e| Error::Config(e.to_string()))?;
    let u = generate_weight(&grid, &cfg.u_weight, cfg.p, cfg.seed)?;
    let v = generate_weight(&grid, &cfg.v_weight, cfg.p, cfg.seed.wrapping_add(1))?;
    let b = build_symbol(&grid, cfg.m, &cfg.symbol, cfg.seed.wrapping_add(2))?;
    let op = CommutatorOp { b, kind };
    let est = opnorm(&op, &u, &v, cfg.p, &lower_opts(cfg))?;
    let out = serde_json::json!({
        "p": cfg.p,
        "operator": format!("{:?}", kind),
        "value": est.value,
        "mode": format!("{:?}", est.mode),
        "iterations": est.iterations,
        "witness_hash": est.witness_hash,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn print_report_line(report: &ExperimentReport) {
    let passed = report.checks.iter().filter(|c| c.passed).count();
    println!(
        "[{}] {}: {}/{} checks passed, {} instances",
        report.verdict.as_str(),
        report.suite,
        passed,
        report.checks.len(),
        report.rows.len()
    );
    for check in &report.checks {
        if !check.passed {
            let kind = if check.hard { "hard" } else { "soft" };
            println!("    failed {kind} check {}: {}", check.name, check.detail);
        }
    }
    for fit in &report.fitted {
        println!("    fitted {} = {:.6e}", fit.name, fit.value);
    }
}

fn worst_verdict(reports: &[ExperimentReport]) -> Verdict {
    let mut worst = Verdict::Pass;
    for r in reports {
        worst = match (worst, r.verdict) {
            (_, Verdict::Fail) | (Verdict::Fail, _) => Verdict::Fail,
            (_, Verdict::Warn) | (Verdict::Warn, _) => Verdict::Warn,
            _ => Verdict::Pass,
        };
    }
    worst
}

fn collect_reports(cfg: &ExperimentConfig, suite: &str) -> Result<Vec<ExperimentReport>, Error> {
    if suite == "all" {
        run_all(cfg)
    } else {
        Ok(vec![run_suite(suite, cfg)?])
    }
}

fn run_verify(cfg: &ExperimentConfig, suite: &str) -> Result<Verdict, Error> {
    let reports = collect_reports(cfg, suite)?;
    for report in &reports {
        print_report_line(report);
    }
    if let Some(dir) = &cfg.out_dir {
        for report in &reports {
            write_report(report, dir)?;
        }
    }
    Ok(worst_verdict(&reports))
}

fn run_report(cfg: &ExperimentConfig) -> Result<Verdict, Error> {
    let dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("reports"));
    let reports = collect_reports(cfg, &cfg.suite)?;
    for report in &reports {
        let (csv, json) = write_report(report, &dir)?;
        println!(
            "[{}] {} -> {}, {}",
            report.verdict.as_str(),
            report.suite,
            csv.display(),
            json.display()
        );
    }
    Ok(worst_verdict(&reports))
}

fn run_cli(cli: &Cli) -> Result<Verdict, Error> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Ap => run_ap(&cfg).map(|()| Verdict::Pass),
        Command::Bmo => run_bmo(&cfg).map(|()| Verdict::Pass),
        Command::Opnorm => run_opnorm(&cfg).map(|()| Verdict::Pass),
        Command::Commutator => run_commutator(&cfg).map(|()| Verdict::Pass),
        Command::Verify { suite } => run_verify(&cfg, suite),
        Command::Report => run_report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(&cli) {
        Ok(Verdict::Pass) => ExitCode::from(0),
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
