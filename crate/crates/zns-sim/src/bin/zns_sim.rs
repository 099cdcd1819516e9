//! Experiment runner: executes fill / zenfs-lite / interference workloads
//! over strategy sweeps, emits metrics.csv + summary.json (+ events.jsonl
//! for traced runs), verifies the allocator against its exhaustive oracle,
//! and renders per-figure report tables from a finished run directory.
//!
//! Exit codes: 0 success (OutOfSpace outcomes included), 1 usage or config
//! error, 2 invariant violation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use zns_sim::config::{desk, g_small, zn540, DeviceGeometry, RawConfig, StrategyConfig};
use zns_sim::engine::Sim;
use zns_sim::metrics::{wear_histogram, wear_stats};
use zns_sim::verify;
use zns_sim::workload::fio::run_fill;
use zns_sim::workload::interference::{measure, InterferenceSpec};
use zns_sim::workload::zenfs::{run_zenfs, run_zenfs_in, ZenfsSpec};

#[derive(Parser)]
#[command(name = "zns-sim", version, about = "ZNS SSD zone-allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a workload or a canned experiment recipe.
    Run(RunArgs),
    /// Cross-check the allocator against its exhaustive oracle and sweep
    /// the element state machine.
    Verify(VerifyArgs),
    /// Render per-figure CSV tables from a completed run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config with [device], [strategy] and [workload] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set strategy.kind=stripe. Keys
    /// without a section default to [workload].
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Canned experiment: occupancy | threshold | interference | wear.
    #[arg(long)]
    recipe: Option<String>,
    /// Geometry profile when the config has no [device] section:
    /// zn540 | desk | g_small.
    #[arg(long)]
    profile: Option<String>,
    /// Output directory for metrics.csv, summary.json, events.jsonl.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seeds for seeded recipes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1u64, 2, 3])]
    seeds: Vec<u64>,
    /// Write an events.jsonl trace (single-workload runs only).
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// all | alloc | statemachine | selftest
    #[arg(long, default_value = "all")]
    scope: String,
    /// Random allocator instances to check.
    #[arg(long, default_value_t = 1200)]
    instances: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding metrics.csv from a previous `run`.
    #[arg(long)]
    run_dir: PathBuf,
}

/// One row of metrics.csv. Optional cells serialize as empty.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct MetricsRow {
    strategy: String,
    workload: String,
    finish_threshold: Option<u32>,
    seed: Option<u64>,
    occupancy_pct: Option<f64>,
    dlwa: Option<f64>,
    sa_bytes: Option<f64>,
    sa_norm: Option<f64>,
    dummy_bytes: Option<u64>,
    host_bytes: Option<u64>,
    wear_median: Option<f64>,
    wear_stddev: Option<f64>,
    interference: Option<f64>,
    makespan_us: Option<u64>,
    out_of_space: Option<bool>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args).map(|_| ExitCode::SUCCESS),
        Command::Verify(args) => cmd_verify(args),
        Command::Report(args) => cmd_report(args).map(|_| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn profile_geometry(name: &str) -> Result<DeviceGeometry> {
    match name {
        "zn540" => Ok(zn540()),
        "desk" => Ok(desk()),
        "g_small" => Ok(g_small()),
        other => bail!("unknown profile {other:?} (expected zn540 | desk | g_small)"),
    }
}

/// Loads the config file (if any) and applies --set overrides. Section-less
/// keys are treated as [workload] keys; `workload=NAME` sets its name.
fn load_config(args: &RunArgs) -> Result<RawConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            RawConfig::from_toml_str(&text)?
        }
        None => RawConfig::default(),
    };
    for set in &args.sets {
        let rewritten = match set.split_once('=') {
            Some((k, v)) if !k.contains('.') => {
                if k == "workload" {
                    format!("workload.name={v}")
                } else {
                    format!("workload.{k}={v}")
                }
            }
            _ => set.clone(),
        };
        cfg.apply_override(&rewritten)?;
    }
    Ok(cfg)
}

/// Geometry from the config's [device] section, or from a named profile
/// when the section is absent.
fn resolve_geometry(cfg: &RawConfig, args: &RunArgs, default_profile: &str) -> Result<DeviceGeometry> {
    if cfg.device.channels.is_some() {
        Ok(cfg.geometry()?)
    } else {
        profile_geometry(args.profile.as_deref().unwrap_or(default_profile))
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = load_config(&args)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let recipe = args
        .recipe
        .as_deref()
        .or(cfg.workload.name.as_deref())
        .unwrap_or("fill")
        .to_string();
    let rows = match recipe.as_str() {
        "occupancy" => recipe_occupancy(&cfg, &args)?,
        "threshold" => recipe_threshold(&cfg, &args)?,
        "interference" => recipe_interference(&cfg, &args)?,
        "wear" => recipe_wear(&cfg, &args)?,
        "fill" => single_fill(&cfg, &args)?,
        "zenfs" => single_zenfs(&cfg, &args)?,
        other => bail!("unknown recipe/workload {other:?}"),
    };
    write_metrics(&args.out, &rows)?;
    let summary = serde_json::json!({
        "recipe": recipe,
        "seeds": args.seeds,
        "rows": rows,
    });
    fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!("wrote {} rows to {}", rows.len(), args.out.join("metrics.csv").display());
    Ok(())
}

fn write_metrics(out: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join("metrics.csv"))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

const SWEEP_STRATEGIES: [&str; 6] = ["stripe", "chunk-1", "chunk-2", "chunk-11", "lazy", "direct"];

/// Single-zone fill at {10,25,50,75,95}% occupancy for every strategy.
fn recipe_occupancy(cfg: &RawConfig, args: &RunArgs) -> Result<Vec<MetricsRow>> {
    let geom = resolve_geometry(cfg, args, "zn540")?;
    let mut rows = Vec::new();
    for label in SWEEP_STRATEGIES {
        let strategy = StrategyConfig::from_label(label)?;
        for pct in [10.0, 25.0, 50.0, 75.0, 95.0] {
            let r = run_fill(&geom, strategy, pct)?;
            rows.push(MetricsRow {
                strategy: r.strategy,
                workload: "fill".into(),
                occupancy_pct: Some(pct),
                dlwa: Some(r.dlwa),
                dummy_bytes: Some(r.dummy_pages * geom.page_size),
                host_bytes: Some(r.host_pages * geom.page_size),
                makespan_us: Some(r.makespan),
                ..MetricsRow::default()
            });
        }
    }
    Ok(rows)
}

/// zenfs-lite threshold sweep, stripe vs the lazy baseline, per seed.
fn recipe_threshold(cfg: &RawConfig, args: &RunArgs) -> Result<Vec<MetricsRow>> {
    let geom = resolve_geometry(cfg, args, "desk")?;
    let total_ops = cfg.workload.total_ops.unwrap_or(40_000);
    let mut rows = Vec::new();
    for t in [10u32, 50, 90, 99] {
        for label in ["stripe", "lazy"] {
            let strategy = StrategyConfig::from_label(label)?;
            for &seed in &args.seeds {
                let spec = ZenfsSpec {
                    finish_threshold: t,
                    seed,
                    total_ops,
                    ..ZenfsSpec::default()
                };
                let r = run_zenfs(&geom, strategy, &spec)?;
                rows.push(zenfs_row(r));
            }
        }
    }
    Ok(rows)
}

fn zenfs_row(r: zns_sim::workload::zenfs::ZenfsReport) -> MetricsRow {
    let wear = wear_stats(&r.block_wear);
    MetricsRow {
        strategy: r.strategy,
        workload: "zenfs".into(),
        finish_threshold: Some(r.finish_threshold),
        seed: Some(r.seed),
        dlwa: Some(r.dlwa),
        sa_bytes: Some(r.sa_bytes),
        sa_norm: Some(r.sa_norm),
        dummy_bytes: Some(r.dummy_bytes),
        host_bytes: Some(r.host_bytes),
        wear_median: Some(wear.median),
        wear_stddev: Some(wear.stddev),
        makespan_us: Some(r.makespan),
        out_of_space: Some(r.stats.out_of_space),
        ..MetricsRow::default()
    }
}

/// FINISH-interference bench across strategies, per seed.
fn recipe_interference(cfg: &RawConfig, args: &RunArgs) -> Result<Vec<MetricsRow>> {
    let geom = resolve_geometry(cfg, args, "desk")?;
    let jobs = cfg.workload.jobs.unwrap_or(5);
    let mut rows = Vec::new();
    for label in ["lazy", "chunk-11", "chunk-2", "chunk-1", "stripe"] {
        let strategy = StrategyConfig::from_label(label)?;
        for &seed in &args.seeds {
            let spec = InterferenceSpec {
                jobs,
                seed,
                ..InterferenceSpec::default()
            };
            let r = measure(&geom, strategy, &spec)?;
            rows.push(MetricsRow {
                strategy: r.strategy,
                workload: "interference".into(),
                seed: Some(seed),
                interference: Some(r.factor),
                makespan_us: Some(r.contended_elapsed),
                ..MetricsRow::default()
            });
        }
    }
    Ok(rows)
}

/// zenfs-lite repeated 8x on one device so wear accumulates; also writes a
/// per-strategy erase-count histogram for the wear report.
fn recipe_wear(cfg: &RawConfig, args: &RunArgs) -> Result<Vec<MetricsRow>> {
    let geom = resolve_geometry(cfg, args, "desk")?;
    let t = cfg.workload.finish_threshold.unwrap_or(50);
    let total_ops = cfg.workload.total_ops.unwrap_or(40_000);
    let base_seed = args.seeds.first().copied().unwrap_or(100);
    let mut rows = Vec::new();
    for label in ["stripe", "chunk-1", "chunk-2", "chunk-11", "lazy"] {
        let strategy = StrategyConfig::from_label(label)?;
        let mut sim = Sim::new(&geom, strategy);
        let mut last = None;
        for rep in 0..8u64 {
            let spec = ZenfsSpec {
                finish_threshold: t,
                seed: base_seed + rep,
                total_ops,
                ..ZenfsSpec::default()
            };
            last = Some(run_zenfs_in(&mut sim, &spec)?);
        }
        let r = last.expect("eight reps ran");
        let stats = wear_stats(&r.block_wear);
        write_wear_hist(&args.out, label, &r.block_wear)?;
        rows.push(MetricsRow {
            strategy: label.into(),
            workload: "wear".into(),
            finish_threshold: Some(t),
            seed: Some(base_seed),
            wear_median: Some(stats.median),
            wear_stddev: Some(stats.stddev),
            makespan_us: Some(r.makespan),
            out_of_space: Some(r.stats.out_of_space),
            ..MetricsRow::default()
        });
    }
    Ok(rows)
}

fn write_wear_hist(out: &Path, strategy: &str, wear: &[u64]) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join(format!("wear_hist_{strategy}.csv")))?;
    w.write_record(["wear", "blocks"])?;
    for (wear, blocks) in wear_histogram(wear) {
        w.write_record([wear.to_string(), blocks.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One fill run from the [workload] section.
fn single_fill(cfg: &RawConfig, args: &RunArgs) -> Result<Vec<MetricsRow>> {
    let geom = resolve_geometry(cfg, args, "zn540")?;
    let strategy = cfg.strategy(&geom)?;
    let pct = cfg.workload.occupancy_pct.unwrap_or(50.0);
    if !(0.0..=100.0).contains(&pct) {
        bail!("workload.occupancy_pct {pct} out of range");
    }
    let r = run_fill(&geom, strategy, pct)?;
    Ok(vec![MetricsRow {
        strategy: r.strategy,
        workload: "fill".into(),
        occupancy_pct: Some(pct),
        dlwa: Some(r.dlwa),
        dummy_bytes: Some(r.dummy_pages * geom.page_size),
        host_bytes: Some(r.host_pages * geom.page_size),
        makespan_us: Some(r.makespan),
        ..MetricsRow::default()
    }])
}

/// One zenfs-lite run from the [workload] section, optionally traced.
fn single_zenfs(cfg: &RawConfig, args: &RunArgs) -> Result<Vec<MetricsRow>> {
    let geom = resolve_geometry(cfg, args, "desk")?;
    let strategy = cfg.strategy(&geom)?;
    let spec = ZenfsSpec {
        total_ops: cfg.workload.total_ops.unwrap_or(40_000),
        finish_threshold: cfg.workload.finish_threshold.unwrap_or(90),
        seed: cfg.workload.seed.or_else(|| args.seeds.first().copied()).unwrap_or(1),
        ..ZenfsSpec::default()
    };
    let r = if args.trace {
        let f = fs::File::create(args.out.join("events.jsonl"))?;
        let mut sim = Sim::new(&geom, strategy).with_trace(Box::new(std::io::BufWriter::new(f)));
        run_zenfs_in(&mut sim, &spec)?
    } else {
        run_zenfs(&geom, strategy, &spec)?
    };
    Ok(vec![zenfs_row(r)])
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let mut failed = false;
    let scope = args.scope.as_str();
    if !matches!(scope, "all" | "alloc" | "statemachine" | "selftest") {
        bail!("unknown scope {scope:?} (expected all | alloc | statemachine | selftest)");
    }
    if matches!(scope, "all" | "alloc") {
        match verify::check_alloc_instances(args.instances, args.seed) {
            Ok(report) => println!(
                "alloc: {} instances agree with the oracle ({} feasible, {} infeasible; strict/relaxed/stripe = {}/{}/{})",
                report.instances,
                report.feasible,
                report.infeasible,
                report.chunk_strict,
                report.chunk_relaxed,
                report.stripe
            ),
            Err(cx) => {
                eprintln!("alloc: FAILED\n{cx}");
                failed = true;
            }
        }
    }
    if matches!(scope, "all" | "statemachine") {
        match verify::check_state_machine() {
            Ok(()) => println!("statemachine: all (state, event) pairs match the reference table"),
            Err(e) => {
                eprintln!("statemachine: FAILED: {e}");
                failed = true;
            }
        }
    }
    if matches!(scope, "all" | "selftest") {
        if verify::selftest_catches_bad_solver(300, args.seed) {
            println!("selftest: planted-bug solver detected by the oracle");
        } else {
            eprintln!("selftest: FAILED: harness did not detect the planted bug");
            failed = true;
        }
    }
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn read_metrics(run_dir: &Path) -> Result<Vec<MetricsRow>> {
    let path = run_dir.join("metrics.csv");
    if !path.exists() {
        return Err(anyhow!("missing runs: no metrics.csv in {}", run_dir.display()));
    }
    let mut rows = Vec::new();
    let mut r = csv::Reader::from_path(&path)?;
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let rows = read_metrics(&args.run_dir)?;
    let dir = &args.run_dir;
    report_fill(dir, &rows)?;
    report_zenfs(dir, &rows)?;
    report_interference(dir, &rows)?;
    report_wear_hist(dir)?;
    Ok(())
}

/// fig3a_dlwa.csv: DLWA and device-write reduction vs a full-zone fill per
/// strategy x occupancy. Reduction = 1 - occupancy * dlwa (both writes
/// normalized by the zone size).
fn report_fill(dir: &Path, rows: &[MetricsRow]) -> Result<()> {
    let fill: Vec<&MetricsRow> = rows.iter().filter(|r| r.workload == "fill").collect();
    if fill.is_empty() {
        return Ok(());
    }
    let mut w = csv::Writer::from_path(dir.join("fig3a_dlwa.csv"))?;
    w.write_record(["strategy", "occupancy_pct", "dlwa", "reduction_pct_vs_full"])?;
    for r in fill {
        let (pct, dlwa) = (
            r.occupancy_pct.context("fill row lacks occupancy")?,
            r.dlwa.context("fill row lacks dlwa")?,
        );
        let reduction = (1.0 - pct / 100.0 * dlwa) * 100.0;
        w.write_record([
            r.strategy.clone(),
            pct.to_string(),
            dlwa.to_string(),
            reduction.to_string(),
        ])?;
    }
    w.flush()?;
    println!("wrote {}", dir.join("fig3a_dlwa.csv").display());
    Ok(())
}

/// fig3b_sa.csv and fig3c_dummy.csv: per (threshold, strategy) means over
/// seeds from the zenfs threshold sweep.
fn report_zenfs(dir: &Path, rows: &[MetricsRow]) -> Result<()> {
    let zen: Vec<&MetricsRow> = rows.iter().filter(|r| r.workload == "zenfs").collect();
    if zen.is_empty() {
        return Ok(());
    }
    let mut sa: BTreeMap<(u32, String), Vec<f64>> = BTreeMap::new();
    let mut dummy: BTreeMap<(u32, String), Vec<f64>> = BTreeMap::new();
    for r in zen {
        let t = r.finish_threshold.context("zenfs row lacks threshold")?;
        let key = (t, r.strategy.clone());
        sa.entry(key.clone()).or_default().push(r.sa_bytes.unwrap_or(0.0));
        dummy
            .entry(key)
            .or_default()
            .push(r.dummy_bytes.unwrap_or(0) as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut w = csv::Writer::from_path(dir.join("fig3b_sa.csv"))?;
    w.write_record(["finish_threshold", "strategy", "mean_sa_bytes"])?;
    for ((t, s), v) in &sa {
        w.write_record([t.to_string(), s.clone(), mean(v).to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("fig3c_dummy.csv"))?;
    w.write_record(["finish_threshold", "strategy", "mean_dummy_bytes"])?;
    for ((t, s), v) in &dummy {
        w.write_record([t.to_string(), s.clone(), mean(v).to_string()])?;
    }
    w.flush()?;
    println!("wrote {} and fig3c_dummy.csv", dir.join("fig3b_sa.csv").display());
    Ok(())
}

/// fig4a_interference.csv: mean slowdown factor per strategy.
fn report_interference(dir: &Path, rows: &[MetricsRow]) -> Result<()> {
    let inter: Vec<&MetricsRow> = rows.iter().filter(|r| r.workload == "interference").collect();
    if inter.is_empty() {
        return Ok(());
    }
    let mut by_strategy: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in inter {
        by_strategy
            .entry(r.strategy.clone())
            .or_default()
            .push(r.interference.context("interference row lacks factor")?);
    }
    let mut w = csv::Writer::from_path(dir.join("fig4a_interference.csv"))?;
    w.write_record(["strategy", "mean_factor"])?;
    for (s, v) in &by_strategy {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        w.write_record([s.clone(), mean.to_string()])?;
    }
    w.flush()?;
    println!("wrote {}", dir.join("fig4a_interference.csv").display());
    Ok(())
}

/// fig3d_wear_hist.csv: merges per-strategy erase-count histograms emitted
/// by the wear recipe.
fn report_wear_hist(dir: &Path) -> Result<()> {
    let mut merged: Vec<(String, u64, u64)> = Vec::new();
    for label in ["stripe", "chunk-1", "chunk-2", "chunk-11", "lazy"] {
        let path = dir.join(format!("wear_hist_{label}.csv"));
        if !path.exists() {
            continue;
        }
        let mut r = csv::Reader::from_path(&path)?;
        for rec in r.records() {
            let rec = rec?;
            merged.push((label.to_string(), rec[0].parse()?, rec[1].parse()?));
        }
    }
    if merged.is_empty() {
        return Ok(());
    }
    let mut w = csv::Writer::from_path(dir.join("fig3d_wear_hist.csv"))?;
    w.write_record(["strategy", "wear", "blocks"])?;
    for (s, wear, blocks) in merged {
        w.write_record([s, wear.to_string(), blocks.to_string()])?;
    }
    w.flush()?;
    println!("wrote {}", dir.join("fig3d_wear_hist.csv").display());
    Ok(())
}
