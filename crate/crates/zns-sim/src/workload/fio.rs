//! Sequential fill workloads: write a fraction of a zone, FINISH it, and
//! account the dummy traffic. This is the occupancy sweep behind the
//! write-amplification comparison across strategies.

use serde::Serialize;

use crate::config::{DeviceGeometry, StrategyConfig};
use crate::engine::{self, EngineError, Issuer, Sim, StepResult};

/// Host pages for an occupancy percentage of one zone.
pub fn occupancy_pages(geom: &DeviceGeometry, pct: f64) -> u64 {
    (pct / 100.0 * geom.zone_pages() as f64).round() as u64
}

/// Issuer that fills `zone` with `total` pages (`per_op` at a time) and
/// then finishes it.
pub struct FillWriter {
    pub zone: u32,
    pub per_op: u64,
    pub total: u64,
    written: u64,
    finished: bool,
}

impl FillWriter {
    pub fn new(zone: u32, per_op: u64, total: u64) -> Self {
        FillWriter {
            zone,
            per_op,
            total,
            written: 0,
            finished: false,
        }
    }
}

impl Issuer for FillWriter {
    fn step(&mut self, sim: &mut Sim, job: usize) -> Result<StepResult, EngineError> {
        if self.written < self.total {
            let pages = self.per_op.min(self.total - self.written);
            self.written += pages;
            let done = sim.write(job, self.zone, pages)?;
            return Ok(StepResult::Ready(done));
        }
        if !self.finished {
            self.finished = true;
            let t = sim.finish(job, self.zone)?;
            return Ok(StepResult::Ready(t));
        }
        Ok(StepResult::Done)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FillResult {
    pub strategy: String,
    pub occupancy_pct: f64,
    pub host_pages: u64,
    pub dummy_pages: u64,
    pub dlwa: f64,
    /// Device writes saved relative to a full-zone fill:
    /// `1 - (host + dummy) / zone_pages`.
    pub reduction_vs_full: f64,
    pub makespan: u64,
}

/// Fill one zone to `pct` percent, finish it, and report amplification.
pub fn run_fill(
    geom: &DeviceGeometry,
    strategy: StrategyConfig,
    pct: f64,
) -> Result<FillResult, EngineError> {
    let mut sim = Sim::new(geom, strategy);
    let total = occupancy_pages(geom, pct);
    let jobs: Vec<Box<dyn Issuer>> = vec![Box::new(FillWriter::new(0, total.max(1).min(256), total))];
    let report = engine::run(&mut sim, jobs)?;
    let written = sim.ledger.host_pages + sim.ledger.dummy_pages;
    Ok(FillResult {
        strategy: strategy.label(),
        occupancy_pct: pct,
        host_pages: sim.ledger.host_pages,
        dummy_pages: sim.ledger.dummy_pages,
        dlwa: sim.ledger.dlwa(),
        reduction_vs_full: 1.0 - written as f64 / geom.zone_pages() as f64,
        makespan: report.makespan,
    })
}
