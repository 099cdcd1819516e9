//! FINISH-interference bench: measures how much the dummy traffic from
//! finishing partially-filled zones slows down concurrent host writers.
//!
//! Two runs per configuration: writers alone, then writers plus a finisher
//! that seals pre-filled victim zones at seeded jitter times. The factor is
//! the contended-to-base elapsed-time ratio for the same writer work.

use std::cell::Cell;
use std::rc::Rc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{DeviceGeometry, StrategyConfig};
use crate::engine::{self, EngineError, Issuer, Sim, StepResult};

#[derive(Debug, Clone, Copy)]
pub struct InterferenceSpec {
    /// Victim zones and concurrent writers, each.
    pub jobs: u32,
    /// How full each victim zone is when finished.
    pub victim_occupancy_pct: f64,
    /// Pages each writer issues in total.
    pub writer_pages: u64,
    /// Pages per synchronous write op. Matching the LUN count makes every
    /// op span all LUNs, so writers feel dummy traffic on any LUN.
    pub writer_burst: u64,
    /// Jitter window for the finisher's start times, microseconds.
    pub jitter_us: u64,
    pub seed: u64,
}

impl Default for InterferenceSpec {
    fn default() -> Self {
        InterferenceSpec {
            jobs: 5,
            victim_occupancy_pct: 40.0,
            writer_pages: 1500,
            writer_burst: 4,
            jitter_us: 50_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InterferenceResult {
    pub strategy: String,
    pub seed: u64,
    pub base_elapsed: u64,
    pub contended_elapsed: u64,
    pub factor: f64,
}

/// Synchronous sequential writer that rolls to the next zone in its range
/// as zones fill and records its completion time.
struct PacedWriter {
    base_zone: u32,
    burst: u64,
    total: u64,
    written: u64,
    done_at: Rc<Cell<u64>>,
}

impl Issuer for PacedWriter {
    fn step(&mut self, sim: &mut Sim, job: usize) -> Result<StepResult, EngineError> {
        if self.written >= self.total {
            self.done_at.set(sim.now);
            return Ok(StepResult::Done);
        }
        let zone_pages = sim.device.zone_pages();
        let zone = self.base_zone + (self.written / zone_pages) as u32;
        let room = zone_pages - self.written % zone_pages;
        let pages = self.burst.min(self.total - self.written).min(room);
        self.written += pages;
        let done = sim.write(job, zone, pages)?;
        Ok(StepResult::Ready(done))
    }
}

/// Finishes victim zones at pre-drawn times.
struct Finisher {
    schedule: Vec<(u64, u32)>,
    idx: usize,
}

impl Issuer for Finisher {
    fn step(&mut self, sim: &mut Sim, job: usize) -> Result<StepResult, EngineError> {
        match self.schedule.get(self.idx) {
            None => Ok(StepResult::Done),
            Some(&(t, zone)) => {
                if sim.now < t {
                    return Ok(StepResult::Ready(t));
                }
                self.idx += 1;
                let now = sim.finish(job, zone)?;
                Ok(StepResult::Ready(now))
            }
        }
    }
}

fn run_phase(
    geom: &DeviceGeometry,
    strategy: StrategyConfig,
    spec: &InterferenceSpec,
    with_finisher: bool,
) -> Result<u64, EngineError> {
    let mut sim = Sim::new(geom, strategy);
    let victim_pages =
        (spec.victim_occupancy_pct / 100.0 * geom.zone_pages() as f64).round() as u64;
    // instantaneous prefill: device state only, no timeline occupancy
    for v in 0..spec.jobs {
        sim.device.zone_write(v, 0, victim_pages).map_err(EngineError::Device)?;
    }

    let zones_per_writer = spec.writer_pages.div_ceil(geom.zone_pages()) as u32;
    let mut jobs: Vec<Box<dyn Issuer>> = Vec::new();
    let mut done_cells = Vec::new();
    for w in 0..spec.jobs {
        let done_at = Rc::new(Cell::new(0u64));
        done_cells.push(done_at.clone());
        jobs.push(Box::new(PacedWriter {
            base_zone: spec.jobs + w * zones_per_writer,
            burst: spec.writer_burst.max(1),
            total: spec.writer_pages,
            written: 0,
            done_at,
        }));
    }
    if with_finisher {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut schedule: Vec<(u64, u32)> = (0..spec.jobs)
            .map(|v| (rng.gen_range(0..spec.jitter_us.max(1)), v))
            .collect();
        schedule.sort_unstable();
        jobs.push(Box::new(Finisher { schedule, idx: 0 }));
    }
    engine::run(&mut sim, jobs)?;
    Ok(done_cells.iter().map(|c| c.get()).max().unwrap_or(0))
}

pub fn measure(
    geom: &DeviceGeometry,
    strategy: StrategyConfig,
    spec: &InterferenceSpec,
) -> Result<InterferenceResult, EngineError> {
    let base = run_phase(geom, strategy, spec, false)?;
    let contended = run_phase(geom, strategy, spec, true)?;
    Ok(InterferenceResult {
        strategy: strategy.label(),
        seed: spec.seed,
        base_elapsed: base,
        contended_elapsed: contended,
        factor: contended as f64 / base as f64,
    })
}
