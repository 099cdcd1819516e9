//! Randomized verification harnesses: allocator-vs-oracle equivalence on
//! small instances, exhaustive state-machine sweeps, and a self-test that
//! proves the harness can catch a broken solver.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alloc::oracle::{oracle_solve, OracleMode};
use crate::alloc::{allocate, AllocationRequest};
use crate::config::{validate_geometry, DeviceGeometry, RawDevice, StrategyConfig};
use crate::flash::{element_transition, Avail, BlockRef, ElementEvent, FlashState, StorageElement, ALL_EVENTS};

/// One allocator-vs-oracle disagreement, with everything needed to replay.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub mode: OracleMode,
    pub luns: u32,
    pub blocks_per_lun: u32,
    pub blocks_per_zone: u32,
    pub wears: Vec<u64>,
    pub avails: Vec<Avail>,
    pub greedy: Option<u64>,
    pub oracle: Option<u64>,
}

impl std::fmt::Display for Counterexample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "mode {:?}, {} luns x {} blocks, zone of {} blocks",
            self.mode, self.luns, self.blocks_per_lun, self.blocks_per_zone
        )?;
        writeln!(f, "wears:  {:?}", self.wears)?;
        writeln!(f, "avails: {:?}", self.avails)?;
        write!(f, "greedy objective {:?} != oracle {:?}", self.greedy, self.oracle)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AllocCheckReport {
    pub instances: u32,
    pub feasible: u32,
    pub infeasible: u32,
    pub chunk_strict: u32,
    pub chunk_relaxed: u32,
    pub stripe: u32,
}

fn toy_geometry(luns: u32, blocks_per_lun: u32, blocks_per_zone: u32) -> DeviceGeometry {
    validate_geometry(&RawDevice {
        channels: Some(luns),
        luns_per_channel: Some(1),
        pages_per_block: Some(2),
        page_size: Some(4096),
        blocks_per_zone: Some(blocks_per_zone),
        zones_total: Some(1),
        max_open_zones: Some(1),
        blocks_per_lun: Some(blocks_per_lun),
        ..RawDevice::default()
    })
    .expect("toy geometry is valid")
}

fn divisors(n: u32) -> Vec<u32> {
    (1..=n).filter(|d| n % d == 0).collect()
}

struct Instance {
    state: FlashState,
    strategy: StrategyConfig,
    mode: OracleMode,
    z: usize,
}

/// Draws a random small instance (N <= 16 elements) for one of the three
/// oracle modes, with random wear and availability.
fn random_instance(rng: &mut ChaCha8Rng, mode: OracleMode) -> Instance {
    let (strategy, luns, blocks_per_lun, share) = match mode {
        OracleMode::Stripe => {
            let luns = [1u32, 2, 4][rng.gen_range(0..3)];
            // stripes: one element per block row, N = blocks_per_lun
            let blocks_per_lun = rng.gen_range(2..=16u32);
            let share = divisors(blocks_per_lun)[rng.gen_range(0..divisors(blocks_per_lun).len())];
            (StrategyConfig::stripe(), luns, blocks_per_lun, share)
        }
        OracleMode::ChunkStrict | OracleMode::Relaxed => {
            let luns = [1u32, 2, 4][rng.gen_range(0..3)];
            // chunk-1: one element per block, N = luns * blocks_per_lun
            let blocks_per_lun = rng.gen_range(2..=(16 / luns));
            let share = divisors(blocks_per_lun)[rng.gen_range(0..divisors(blocks_per_lun).len())];
            let mut strat = StrategyConfig::chunk(1);
            strat.parallelism_relaxed = mode == OracleMode::Relaxed;
            (strat, luns, blocks_per_lun, share)
        }
    };
    let geom = toy_geometry(luns, blocks_per_lun, luns * share);
    let mut state = FlashState::new(&geom, strategy);
    for e in state.elements.iter_mut() {
        e.wear = rng.gen_range(0..10);
        e.avail = match rng.gen_range(0..10) {
            0..=5 => Avail::Free,
            6..=7 => Avail::FreeInvalid,
            _ => Avail::AllocatedValid,
        };
    }
    let z = strategy.elements_per_zone(&geom) as usize;
    Instance {
        state,
        strategy,
        mode,
        z,
    }
}

fn greedy_objective(inst: &Instance) -> Option<u64> {
    allocate(&AllocationRequest {
        zone_id: 0,
        strategy: inst.strategy,
        state: &inst.state,
    })
    .ok()
    .map(|r| r.objective)
}

fn oracle_objective(inst: &Instance) -> Option<u64> {
    match inst.mode {
        // the relaxed allocator only falls back when the strict selection
        // is infeasible, so the reference optimum is strict-if-feasible
        OracleMode::Relaxed => oracle_solve(&inst.state, OracleMode::ChunkStrict, inst.z)
            .or_else(|| oracle_solve(&inst.state, OracleMode::Relaxed, inst.z)),
        mode => oracle_solve(&inst.state, mode, inst.z),
    }
}

/// Checks `instances` random instances split over the three modes. Returns
/// the first disagreement, if any.
pub fn check_alloc_instances(
    instances: u32,
    seed: u64,
) -> Result<AllocCheckReport, Box<Counterexample>> {
    check_alloc_with(instances, seed, greedy_objective)
}

fn check_alloc_with(
    instances: u32,
    seed: u64,
    solver: impl Fn(&Instance) -> Option<u64>,
) -> Result<AllocCheckReport, Box<Counterexample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AllocCheckReport::default();
    for i in 0..instances {
        let mode = [OracleMode::ChunkStrict, OracleMode::Relaxed, OracleMode::Stripe][(i % 3) as usize];
        let inst = random_instance(&mut rng, mode);
        let greedy = solver(&inst);
        let oracle = oracle_objective(&inst);
        if greedy != oracle {
            return Err(Box::new(Counterexample {
                mode,
                luns: inst.state.geom.luns_total(),
                blocks_per_lun: inst.state.geom.blocks_per_lun,
                blocks_per_zone: inst.state.geom.blocks_per_zone,
                wears: inst.state.elements.iter().map(|e| e.wear).collect(),
                avails: inst.state.elements.iter().map(|e| e.avail).collect(),
                greedy,
                oracle,
            }));
        }
        report.instances += 1;
        if oracle.is_some() {
            report.feasible += 1;
        } else {
            report.infeasible += 1;
        }
        match mode {
            OracleMode::ChunkStrict => report.chunk_strict += 1,
            OracleMode::Relaxed => report.chunk_relaxed += 1,
            OracleMode::Stripe => report.stripe += 1,
        }
    }
    Ok(report)
}

/// Harness self-test: a deliberately wrong solver (highest wear first) must
/// be caught by the oracle within `instances` attempts.
pub fn selftest_catches_bad_solver(instances: u32, seed: u64) -> bool {
    let bad = |inst: &Instance| -> Option<u64> {
        // pick the WORST z available elements, ignoring LUN constraints
        let mut ids: Vec<usize> = inst
            .state
            .elements
            .iter()
            .filter(|e| e.avail.is_allocatable())
            .map(|e| e.id)
            .collect();
        if ids.len() < inst.z {
            return None;
        }
        ids.sort_by_key(|&id| std::cmp::Reverse(inst.state.elements[id].wear));
        Some(ids[..inst.z].iter().map(|&id| inst.state.elements[id].wear).sum())
    };
    check_alloc_with(instances, seed, bad).is_err()
}

/// Exhaustively sweeps the availability state machine and compares against
/// an independently-written legal-transition table.
pub fn check_state_machine() -> Result<(), String> {
    use Avail::*;
    use ElementEvent::*;
    let legal: &[(Avail, ElementEvent, Avail, bool)] = &[
        // (state, event, next state, wear increments)
        (Free, Allocate, AllocatedEmpty, false),
        (FreeInvalid, Allocate, AllocatedEmpty, true),
        (AllocatedEmpty, FirstProgram, AllocatedValid, false),
        (AllocatedEmpty, FinishRelease, Free, false),
        (AllocatedEmpty, ResetRelease, Free, false),
        (AllocatedValid, ResetInvalidate, FreeInvalid, false),
        (FreeInvalid, EraseComplete, Free, true),
    ];
    for state in [Free, AllocatedEmpty, AllocatedValid, FreeInvalid] {
        for event in ALL_EVENTS {
            let mut elem = StorageElement {
                id: 0,
                lun: Some(0),
                blocks: vec![BlockRef { lun: 0, index: 0 }],
                wear: 0,
                avail: state,
                programmed: vec![1],
            };
            let res = element_transition(&mut elem, event);
            let expected = legal.iter().find(|(s, e, _, _)| *s == state && *e == event);
            match (res, expected) {
                (Ok(()), Some(&(_, _, next, wears))) => {
                    if elem.avail != next {
                        return Err(format!(
                            "({state:?}, {event:?}) moved to {:?}, expected {next:?}",
                            elem.avail
                        ));
                    }
                    if (elem.wear == 1) != wears {
                        return Err(format!(
                            "({state:?}, {event:?}) wear delta {} unexpected",
                            elem.wear
                        ));
                    }
                    if wears && elem.programmed[0] != 0 {
                        return Err(format!("({state:?}, {event:?}) erase kept programmed pages"));
                    }
                }
                (Err(_), None) => {}
                (Ok(()), None) => {
                    return Err(format!("({state:?}, {event:?}) accepted but should be illegal"))
                }
                (Err(e), Some(_)) => {
                    return Err(format!("({state:?}, {event:?}) rejected but legal: {e}"))
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousand_instances_agree() {
        let report = check_alloc_instances(1200, 42).unwrap_or_else(|cx| panic!("{cx}"));
        assert_eq!(report.instances, 1200);
        assert!(report.feasible > 0 && report.infeasible > 0, "{report:?}");
        assert_eq!(report.chunk_strict, 400);
        assert_eq!(report.chunk_relaxed, 400);
        assert_eq!(report.stripe, 400);
    }

    #[test]
    fn state_machine_table_matches() {
        check_state_machine().unwrap();
    }

    #[test]
    fn selftest_flags_planted_bug() {
        assert!(selftest_catches_bad_solver(300, 7));
    }
}
