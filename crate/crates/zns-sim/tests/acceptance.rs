//! Acceptance suite: one test per top-level criterion, each printing a
//! single PASS/FAIL line (visible with `--nocapture` or on failure).
//!
//! Expected values are cross-checked against independent closed-form
//! oracles (group-boundary page arithmetic) rather than against the
//! simulator's own output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zns_sim::config::{desk, g_small, zn540, DeviceGeometry, StrategyConfig};
use zns_sim::engine::{self, Sim};
use zns_sim::metrics::wear_stats;
use zns_sim::verify;
use zns_sim::workload::fio::{occupancy_pages, run_fill};
use zns_sim::workload::interference::{measure, InterferenceSpec};
use zns_sim::workload::zenfs::{run_zenfs, run_zenfs_in, ZenfsSpec};
use zns_sim::zone::{Device, DeviceError, ZoneState};

fn verdict(criterion: &str, pass: bool, detail: &str) {
    let v = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {v} — {detail}");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Independent oracle for the fill experiment: host pages round up to the
/// strategy's group boundary, and the saving is measured against writing
/// the whole zone.
fn oracle_reduction_pct(geom: &DeviceGeometry, lane_blocks: u64, pct: f64) -> f64 {
    let host = occupancy_pages(geom, pct);
    let group_pages =
        geom.luns_total() as u64 * lane_blocks * geom.pages_per_block as u64;
    let written = host.div_ceil(group_pages) * group_pages;
    (1.0 - written as f64 / geom.zone_pages() as f64) * 100.0
}

const OCCUPANCIES: [f64; 5] = [10.0, 25.0, 50.0, 75.0, 95.0];

#[test]
fn criterion_1_fig3a_stripe_and_chunk1() {
    let geom = zn540();
    let expected = [86.36, 72.73, 50.00, 22.73, 4.55];
    let mut ok = true;
    let mut detail = String::new();
    for label in ["stripe", "chunk-1"] {
        let strategy = StrategyConfig::from_label(label).unwrap();
        for (&pct, &want) in OCCUPANCIES.iter().zip(&expected) {
            let got = run_fill(&geom, strategy, pct).unwrap().reduction_vs_full * 100.0;
            let oracle = oracle_reduction_pct(&geom, 1, pct);
            // the closed-form oracle and the target table must both agree
            if (got - want).abs() > 0.5 || (got - oracle).abs() > 1e-9 {
                ok = false;
                detail = format!("{label} at {pct}%: got {got:.2}, want {want} (oracle {oracle:.4})");
            }
        }
    }
    if ok {
        detail = "stripe & chunk-1 reductions {86.36, 72.73, 50.00, 22.73, 4.55}% ±0.5pp".into();
    }
    verdict("1", ok, &detail);
}

#[test]
fn criterion_2_fig3a_chunk2_and_chunk11() {
    let geom = zn540();
    let mut ok = true;
    let mut detail = String::new();
    let cases: [(&str, u64, [f64; 5]); 2] = [
        ("chunk-2", 2, [81.82, 72.73, 45.45, 18.18, 0.0]),
        ("chunk-11", 11, [50.0, 50.0, 50.0, 0.0, 0.0]),
    ];
    for (label, lane_blocks, expected) in cases {
        let strategy = StrategyConfig::from_label(label).unwrap();
        for (&pct, &want) in OCCUPANCIES.iter().zip(&expected) {
            let got = run_fill(&geom, strategy, pct).unwrap().reduction_vs_full * 100.0;
            let oracle = oracle_reduction_pct(&geom, lane_blocks, pct);
            if (got - want).abs() > 0.5 || (got - oracle).abs() > 1e-9 {
                ok = false;
                detail = format!("{label} at {pct}%: got {got:.2}, want {want} (oracle {oracle:.4})");
            }
        }
    }
    if ok {
        detail = "chunk-2 {81.82, 72.73, 45.45, 18.18, 0}%, chunk-11 {50, 50, 50, 0, 0}%".into();
    }
    verdict("2", ok, &detail);
}

#[test]
fn criterion_3_baseline_dlwa_identity() {
    let mut ok = true;
    let mut detail = String::new();
    // fill traces across the occupancy sweep
    let geom = zn540();
    for pct in OCCUPANCIES {
        let d = run_fill(&geom, StrategyConfig::direct(), pct).unwrap();
        let l = run_fill(&geom, StrategyConfig::lazy(), pct).unwrap();
        if d.dlwa != l.dlwa {
            ok = false;
            detail = format!("fill {pct}%: direct {} vs lazy {}", d.dlwa, l.dlwa);
        }
    }
    // and a zenfs-lite trace
    let geom = desk();
    let spec = ZenfsSpec {
        total_ops: 5_000,
        ..ZenfsSpec::default()
    };
    let d = run_zenfs(&geom, StrategyConfig::direct(), &spec).unwrap();
    let l = run_zenfs(&geom, StrategyConfig::lazy(), &spec).unwrap();
    if d.dlwa != l.dlwa || d.dummy_bytes != l.dummy_bytes {
        ok = false;
        detail = format!("zenfs: direct {} vs lazy {}", d.dlwa, l.dlwa);
    }
    if ok {
        detail = "direct and lazy DLWA identical on fill sweep and zenfs trace".into();
    }
    verdict("3", ok, &detail);
}

#[test]
fn criterion_4_allocator_matches_oracle() {
    match verify::check_alloc_instances(1200, 42) {
        Ok(report) => verdict(
            "4",
            report.instances >= 1000,
            &format!(
                "{} random instances (strict/relaxed/stripe {}/{}/{}), zero mismatches",
                report.instances, report.chunk_strict, report.chunk_relaxed, report.stripe
            ),
        ),
        Err(cx) => verdict("4", false, &format!("oracle mismatch: {cx}")),
    }
}

#[test]
fn criterion_5_interference_ordering() {
    let geom = desk();
    let labels = ["lazy", "chunk-11", "chunk-2", "chunk-1", "stripe"];
    let mut mean = std::collections::HashMap::new();
    for label in labels {
        let strategy = StrategyConfig::from_label(label).unwrap();
        let mut acc = 0.0;
        for seed in [1u64, 2, 3] {
            let spec = InterferenceSpec {
                jobs: 5,
                seed,
                ..InterferenceSpec::default()
            };
            acc += measure(&geom, strategy, &spec).unwrap().factor;
        }
        mean.insert(label, acc / 3.0);
    }
    let ordered = mean["lazy"] > mean["chunk-11"]
        && mean["chunk-11"] >= mean["chunk-2"]
        && mean["chunk-2"] >= mean["chunk-1"];
    let close = (mean["chunk-1"] - mean["stripe"]).abs() <= 0.02;
    let floor = mean["lazy"] >= 1.2;
    verdict(
        "5",
        ordered && close && floor,
        &format!(
            "5 jobs, 3 seeds: lazy {:.3} > chunk-11 {:.3} >= chunk-2 {:.3} >= chunk-1 {:.3} ~= stripe {:.3}",
            mean["lazy"], mean["chunk-11"], mean["chunk-2"], mean["chunk-1"], mean["stripe"]
        ),
    );
}

fn zenfs_mean_sa(geom: &DeviceGeometry, strategy: StrategyConfig, t: u32) -> f64 {
    let mut acc = 0.0;
    for seed in [1u64, 2, 3] {
        let spec = ZenfsSpec {
            finish_threshold: t,
            seed,
            ..ZenfsSpec::default()
        };
        acc += run_zenfs(geom, strategy, &spec).unwrap().sa_bytes;
    }
    acc / 3.0
}

#[test]
fn criterion_6_sa_threshold_trend() {
    let geom = desk();
    let mut ok = true;
    let mut detail = String::new();
    for label in ["stripe", "lazy"] {
        let strategy = StrategyConfig::from_label(label).unwrap();
        let sa10 = zenfs_mean_sa(&geom, strategy, 10);
        let sa90 = zenfs_mean_sa(&geom, strategy, 90);
        if sa90 * 2.0 > sa10 {
            ok = false;
            detail = format!("{label}: SA(90) {sa90:.0} not >= 2x below SA(10) {sa10:.0}");
        }
    }
    // strategy independence up to termination: identical per (T, seed)
    for t in [10u32, 90] {
        for seed in [1u64, 2, 3] {
            let spec = ZenfsSpec {
                finish_threshold: t,
                seed,
                ..ZenfsSpec::default()
            };
            let a = run_zenfs(&geom, StrategyConfig::stripe(), &spec).unwrap();
            let b = run_zenfs(&geom, StrategyConfig::lazy(), &spec).unwrap();
            if a.sa_bytes != b.sa_bytes {
                ok = false;
                detail = format!("T={t} seed={seed}: SA differs across strategies");
            }
        }
    }
    if ok {
        let s10 = zenfs_mean_sa(&geom, StrategyConfig::stripe(), 10);
        let s90 = zenfs_mean_sa(&geom, StrategyConfig::stripe(), 90);
        detail = format!("mean SA {s10:.0} at T=10 vs {s90:.0} at T=90 (>=2x lower), strategy-independent");
    }
    verdict("6", ok, &detail);
}

#[test]
fn criterion_7a_dummy_gap_at_t90() {
    let geom = desk();
    let mut lazy_dummy = 0u64;
    let mut stripe_dummy = 0u64;
    for seed in [1u64, 2, 3] {
        let spec = ZenfsSpec {
            finish_threshold: 90,
            seed,
            ..ZenfsSpec::default()
        };
        lazy_dummy += run_zenfs(&geom, StrategyConfig::lazy(), &spec).unwrap().dummy_bytes;
        stripe_dummy += run_zenfs(&geom, StrategyConfig::stripe(), &spec).unwrap().dummy_bytes;
    }
    verdict(
        "7a",
        lazy_dummy >= 10 * stripe_dummy,
        &format!(
            "T=90 dummy bytes: baseline {lazy_dummy} vs stripe {stripe_dummy} ({:.1}x)",
            lazy_dummy as f64 / stripe_dummy as f64
        ),
    );
}

#[test]
fn criterion_7b_t99_baseline_crashes_first() {
    // KNOWN HONEST FAILURE. The host model places data by logical zone
    // state only, and every logical zone is 1:1 backed by physical
    // capacity under all strategies (fixed zone count; thin provisioning
    // is out of scope). Out-of-space is therefore a function of the host
    // trace alone and hits every strategy at the same op. The baseline
    // does terminate OutOfSpace at T=99 as required, but stripe cannot
    // outlive it without a variable zone count.
    let geom = desk();
    let spec = ZenfsSpec {
        finish_threshold: 99,
        seed: 1,
        ..ZenfsSpec::default()
    };
    let lazy = run_zenfs(&geom, StrategyConfig::lazy(), &spec).unwrap();
    let stripe = run_zenfs(&geom, StrategyConfig::stripe(), &spec).unwrap();
    let baseline_crashes = lazy.stats.out_of_space;
    let stripe_outlives =
        !stripe.stats.out_of_space || stripe.stats.ops_done > lazy.stats.ops_done;
    verdict(
        "7b",
        baseline_crashes && stripe_outlives,
        &format!(
            "T=99: baseline oos={} at op {}, stripe oos={} at op {} (structural: capacity is strategy-independent at fixed zone count)",
            lazy.stats.out_of_space,
            lazy.stats.ops_done,
            stripe.stats.out_of_space,
            stripe.stats.ops_done
        ),
    );
}

#[test]
fn criterion_8_wear_properties() {
    let geom = desk();
    let mut stats = std::collections::HashMap::new();
    for label in ["stripe", "lazy"] {
        let strategy = StrategyConfig::from_label(label).unwrap();
        let mut sim = Sim::new(&geom, strategy);
        let mut last = None;
        for rep in 0..8u64 {
            let spec = ZenfsSpec {
                finish_threshold: 50,
                seed: 100 + rep,
                ..ZenfsSpec::default()
            };
            last = Some(run_zenfs_in(&mut sim, &spec).unwrap());
        }
        stats.insert(label, wear_stats(&last.unwrap().block_wear));
    }
    let (s, l) = (stats["stripe"], stats["lazy"]);
    verdict(
        "8",
        s.stddev <= 0.25 * l.stddev && s.median <= l.median,
        &format!(
            "8x zenfs: stddev stripe {:.3} vs lazy {:.3} ({:.0}%), median {} vs {}",
            s.stddev,
            l.stddev,
            100.0 * s.stddev / l.stddev,
            s.median,
            l.median
        ),
    );
}

/// Criterion 9 part: >= 1e5 random zone commands per strategy while holding
/// the structural invariants.
fn random_command_sweep(strategy: StrategyConfig, seed: u64, commands: u64) -> Result<(), String> {
    let geom = g_small();
    let mut dev = Device::new(&geom, strategy);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dev.flash.element_count();
    let mut prev_wp: Vec<u64> = vec![0; geom.zones_total as usize];
    for step in 0..commands {
        let zone = rng.gen_range(0..geom.zones_total);
        let wp = dev.zone(zone).wp;
        let r: Result<(), DeviceError> = match rng.gen_range(0..10) {
            0..=5 => {
                let pages = rng.gen_range(1..=8u64);
                dev.zone_write(zone, wp, pages).map(|_| ())
            }
            6 => dev.zone_append(zone, rng.gen_range(1..=4)).map(|_| ()),
            7 => {
                let pages = rng.gen_range(1..=4u64);
                dev.zone_read(zone, 0, pages).map(|_| ())
            }
            8 => dev.finish_zone(zone).map(|_| ()),
            _ => dev.reset_zone(zone).map(|_| ()),
        };
        // typed rejections are fine; panics/invariant breaks are not
        let _ = r;
        // write-pointer monotonicity (reset is the only rollback)
        let new_wp = dev.zone(zone).wp;
        if new_wp < prev_wp[zone as usize] && new_wp != 0 {
            return Err(format!("step {step}: wp shrank {} -> {new_wp}", prev_wp[zone as usize]));
        }
        prev_wp[zone as usize] = new_wp;
        if step % 1000 == 0 {
            if dev.flash.element_count() != n || dev.flash.avail_counts().iter().sum::<usize>() != n
            {
                return Err(format!("step {step}: element count not conserved"));
            }
            if !dev.mapping.is_bijective() {
                return Err(format!("step {step}: element-zone mapping not bijective"));
            }
            if dev.open_zones() > geom.max_open_zones {
                return Err(format!("step {step}: open-zone cap exceeded"));
            }
            let open_count = (0..geom.zones_total)
                .filter(|&z| dev.zone(z).state == ZoneState::Open)
                .count() as u32;
            if open_count != dev.open_zones() {
                return Err(format!("step {step}: open-zone census drifted"));
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_9_invariant_suites() {
    let mut ok = true;
    let mut detail = String::new();

    // state-machine closure against the independent reference table
    if let Err(e) = verify::check_state_machine() {
        ok = false;
        detail = format!("state machine: {e}");
    }

    // DLWA granularity dominance on the fill sweep. Dominance holds along
    // divisor chains (a finer group that divides a coarser one can never
    // write more); chunk-2 and chunk-11 are incomparable since 2 does not
    // divide 11 — at exactly 50% occupancy chunk-11 beats chunk-2.
    let geom = zn540();
    for pct in OCCUPANCIES {
        let dlwa_of = |l: &str| {
            run_fill(&geom, StrategyConfig::from_label(l).unwrap(), pct)
                .unwrap()
                .dlwa
        };
        let chains: [&[&str]; 2] = [
            &["stripe", "chunk-1", "chunk-2", "lazy"],
            &["chunk-1", "chunk-11", "lazy"],
        ];
        for chain in chains {
            let dlwas: Vec<f64> = chain.iter().map(|l| dlwa_of(l)).collect();
            if !dlwas.windows(2).all(|w| w[0] <= w[1] + 1e-12) {
                ok = false;
                detail = format!("dominance chain {chain:?} broken at {pct}%: {dlwas:?}");
            }
        }
    }

    // >= 1e5 randomized commands across strategies
    let mut commands = 0u64;
    for (i, label) in ["stripe", "chunk-1", "chunk-2", "lazy", "direct"]
        .iter()
        .enumerate()
    {
        let strategy = StrategyConfig::from_label(label).unwrap();
        if let Err(e) = random_command_sweep(strategy, 1000 + i as u64, 25_000) {
            ok = false;
            detail = format!("{label}: {e}");
        }
        commands += 25_000;
    }

    // byte-identical determinism across reruns of a traced zenfs run
    let geom = desk();
    let mut traces = Vec::new();
    for _ in 0..2 {
        let buf: std::sync::Arc<std::sync::Mutex<Vec<u8>>> = Default::default();
        struct Shared(std::sync::Arc<std::sync::Mutex<Vec<u8>>>);
        impl std::io::Write for Shared {
            fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(b);
                Ok(b.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let mut sim =
            Sim::new(&geom, StrategyConfig::stripe()).with_trace(Box::new(Shared(buf.clone())));
        let spec = ZenfsSpec {
            total_ops: 2_000,
            ..ZenfsSpec::default()
        };
        run_zenfs_in(&mut sim, &spec).unwrap();
        traces.push(buf.lock().unwrap().clone());
    }
    if traces[0].is_empty() || traces[0] != traces[1] {
        ok = false;
        detail = "traced reruns not byte-identical".into();
    }

    if ok {
        detail = format!(
            "state machine, dominance chain, {commands} randomized commands, bijectivity, open-zone cap, wp monotonicity, byte-identical reruns"
        );
    }
    verdict("9", ok, &detail);
}

/// The engine run loop must also be deterministic end-to-end via the CLI
/// contract: identical RunReports for identical inputs.
#[test]
fn rerun_reports_identical() {
    let geom = desk();
    let spec = ZenfsSpec {
        total_ops: 3_000,
        ..ZenfsSpec::default()
    };
    let a = run_zenfs(&geom, StrategyConfig::chunk(2), &spec).unwrap();
    let b = run_zenfs(&geom, StrategyConfig::chunk(2), &spec).unwrap();
    assert_eq!(a.makespan, b.makespan);
    assert_eq!(a.sa_bytes, b.sa_bytes);
    assert_eq!(a.stats.files_written, b.stats.files_written);
    let _ = engine::NO_LUN; // engine linkage sanity
}
