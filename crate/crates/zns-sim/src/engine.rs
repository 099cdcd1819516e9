//! Discrete-event execution: per-LUN busy timelines, synchronous issuer
//! jobs, and device-internal dummy streams spawned by FINISH.
//!
//! Scheduling is deterministic: the runnable job with the smallest
//! `(next_time, job id)` executes next, and dummy streams carry the highest
//! ids so host I/O wins ties.

use std::io::Write;

use thiserror::Error;

use crate::config::{DeviceGeometry, StrategyConfig};
use crate::flash::Receipt;
use crate::metrics::MetricsLedger;
use crate::trace::{TraceKind, TraceRecord, TraceWriter};
use crate::zone::{Device, DeviceError};

/// Receipts with this LUN are pure delays (no LUN occupancy).
pub const NO_LUN: u32 = u32::MAX;

/// Job ids at or above this belong to device-internal dummy streams.
pub const DUMMY_JOB_BASE: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("trace write failed: {0}")]
    Trace(#[from] std::io::Error),
}

/// Per-LUN next-free times. A receipt starts at `max(now, free)` and
/// occupies its LUN for its duration.
#[derive(Debug, Clone)]
pub struct LunTimeline {
    free_at: Vec<u64>,
}

impl LunTimeline {
    pub fn new(luns: u32) -> Self {
        LunTimeline {
            free_at: vec![0; luns as usize],
        }
    }

    pub fn submit(&mut self, lun: u32, now: u64, duration: u64) -> u64 {
        if lun == NO_LUN {
            return now + duration;
        }
        let start = now.max(self.free_at[lun as usize]);
        let done = start + duration;
        self.free_at[lun as usize] = done;
        done
    }

    /// Submit a batch at `now`; completion is the slowest receipt.
    pub fn submit_all(&mut self, now: u64, receipts: &[Receipt]) -> u64 {
        receipts
            .iter()
            .map(|r| self.submit(r.lun, now, r.duration))
            .max()
            .unwrap_or(now)
    }

    pub fn max_free(&self) -> u64 {
        self.free_at.iter().copied().max().unwrap_or(0)
    }
}

pub enum StepResult {
    /// Runnable again at the given time.
    Ready(u64),
    /// Job finished.
    Done,
    /// The workload cannot place more data; the run terminates.
    OutOfSpace,
}

pub trait Issuer {
    fn step(&mut self, sim: &mut Sim, job: usize) -> Result<StepResult, EngineError>;
}

/// Paced dummy-fill job: one page program per step, so host I/O interleaves
/// with FINISH traffic at page granularity.
pub struct DummyStream {
    zone: u32,
    receipts: Vec<Receipt>,
    idx: usize,
}

impl Issuer for DummyStream {
    fn step(&mut self, sim: &mut Sim, job: usize) -> Result<StepResult, EngineError> {
        match self.receipts.get(self.idx) {
            None => Ok(StepResult::Done),
            Some(&r) => {
                self.idx += 1;
                let done = sim.timeline.submit(r.lun, sim.now, r.duration);
                sim.trace(&TraceRecord {
                    t: sim.now,
                    kind: TraceKind::Dummy,
                    job,
                    zone: self.zone,
                    lba: None,
                    pages: Some(1),
                    elements: None,
                    done: Some(done),
                })?;
                Ok(StepResult::Ready(done))
            }
        }
    }
}

pub struct Sim {
    pub device: Device,
    pub timeline: LunTimeline,
    pub ledger: MetricsLedger,
    pub now: u64,
    trace: Option<TraceWriter<Box<dyn Write>>>,
    spawned: Vec<DummyStream>,
}

impl Sim {
    pub fn new(geom: &DeviceGeometry, strategy: StrategyConfig) -> Self {
        Sim {
            device: Device::new(geom, strategy),
            timeline: LunTimeline::new(geom.luns_total()),
            ledger: MetricsLedger::new(geom.page_size, geom.capacity_bytes()),
            now: 0,
            trace: None,
            spawned: Vec::new(),
        }
    }

    pub fn with_trace(mut self, out: Box<dyn Write>) -> Self {
        self.trace = Some(TraceWriter::new(out));
        self
    }

    fn trace(&mut self, rec: &TraceRecord) -> Result<(), EngineError> {
        if let Some(w) = &mut self.trace {
            w.record(rec)?;
        }
        Ok(())
    }

    pub fn flush_trace(&mut self) -> Result<(), EngineError> {
        if let Some(w) = &mut self.trace {
            w.flush()?;
        }
        Ok(())
    }

    /// Sequential WRITE at the zone's pointer; blocks the issuer until the
    /// slowest page completes.
    pub fn write(&mut self, job: usize, zone: u32, pages: u64) -> Result<u64, EngineError> {
        let lba = self.device.zone(zone).wp;
        let outcome = self.device.zone_write(zone, lba, pages)?;
        let done = self.timeline.submit_all(self.now, &outcome.receipts);
        self.ledger.record_host_write(pages);
        if let Some(alloc) = &outcome.alloc {
            let elements = alloc.element_ids.clone();
            self.trace(&TraceRecord {
                t: self.now,
                kind: TraceKind::Alloc,
                job,
                zone,
                lba: None,
                pages: None,
                elements: Some(elements),
                done: None,
            })?;
        }
        self.trace(&TraceRecord {
            t: self.now,
            kind: TraceKind::Write,
            job,
            zone,
            lba: Some(lba),
            pages: Some(pages),
            elements: None,
            done: Some(done),
        })?;
        Ok(done)
    }

    pub fn read(&mut self, job: usize, zone: u32, lba: u64, pages: u64) -> Result<u64, EngineError> {
        let outcome = self.device.zone_read(zone, lba, pages)?;
        let done = self.timeline.submit_all(self.now, &outcome.receipts);
        self.ledger.record_read(pages);
        self.trace(&TraceRecord {
            t: self.now,
            kind: TraceKind::Read,
            job,
            zone,
            lba: Some(lba),
            pages: Some(pages),
            elements: None,
            done: Some(done),
        })?;
        Ok(done)
    }

    /// FINISH: applies the state change now, spawns a paced dummy stream
    /// for the fill traffic, and returns immediately to the issuer.
    pub fn finish(&mut self, job: usize, zone: u32) -> Result<u64, EngineError> {
        let report = self.device.finish_zone(zone)?;
        self.ledger.record_dummy_write(report.dummy_pages);
        self.trace(&TraceRecord {
            t: self.now,
            kind: TraceKind::Finish,
            job,
            zone,
            lba: None,
            pages: Some(report.dummy_pages),
            elements: None,
            done: None,
        })?;
        if !report.dummy_receipts.is_empty() {
            self.spawned.push(DummyStream {
                zone,
                receipts: report.dummy_receipts,
                idx: 0,
            });
        }
        Ok(self.now)
    }

    pub fn reset(&mut self, job: usize, zone: u32) -> Result<u64, EngineError> {
        self.device.reset_zone(zone)?;
        self.trace(&TraceRecord {
            t: self.now,
            kind: TraceKind::Reset,
            job,
            zone,
            lba: None,
            pages: None,
            elements: None,
            done: None,
        })?;
        Ok(self.now)
    }

    pub fn note_out_of_space(&mut self, job: usize, zone: u32) -> Result<(), EngineError> {
        self.trace(&TraceRecord {
            t: self.now,
            kind: TraceKind::OutOfSpace,
            job,
            zone,
            lba: None,
            pages: None,
            elements: None,
            done: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunReport {
    /// Time the last LUN goes idle.
    pub makespan: u64,
    pub out_of_space: bool,
    pub steps: u64,
}

struct JobSlot {
    id: usize,
    next_time: u64,
    issuer: Box<dyn Issuer>,
}

/// Run jobs to completion. Host jobs get ids `0..n` in order; dummy streams
/// spawned by FINISH get ids from [`DUMMY_JOB_BASE`] up.
pub fn run(sim: &mut Sim, jobs: Vec<Box<dyn Issuer>>) -> Result<RunReport, EngineError> {
    let mut slots: Vec<JobSlot> = jobs
        .into_iter()
        .enumerate()
        .map(|(id, issuer)| JobSlot {
            id,
            next_time: 0,
            issuer,
        })
        .collect();
    let mut next_dummy_id = DUMMY_JOB_BASE;
    let mut steps = 0u64;
    let mut out_of_space = false;

    while !slots.is_empty() {
        let pick = slots
            .iter()
            .enumerate()
            .min_by_key(|(_, s)| (s.next_time, s.id))
            .map(|(i, _)| i)
            .unwrap();
        let slot = &mut slots[pick];
        sim.now = sim.now.max(slot.next_time);
        let job_id = slot.id;
        let mut issuer = std::mem::replace(
            &mut slot.issuer,
            Box::new(DummyStream {
                zone: 0,
                receipts: Vec::new(),
                idx: 0,
            }),
        );
        let result = issuer.step(sim, job_id)?;
        steps += 1;
        match result {
            StepResult::Ready(t) => {
                let slot = &mut slots[pick];
                slot.issuer = issuer;
                slot.next_time = t.max(sim.now);
            }
            StepResult::Done => {
                slots.swap_remove(pick);
            }
            StepResult::OutOfSpace => {
                out_of_space = true;
                break;
            }
        }
        for stream in sim.spawned.drain(..) {
            slots.push(JobSlot {
                id: next_dummy_id,
                next_time: sim.now,
                issuer: Box::new(stream),
            });
            next_dummy_id += 1;
        }
    }
    sim.flush_trace()?;
    Ok(RunReport {
        makespan: sim.now.max(sim.timeline.max_free()),
        out_of_space,
        steps,
    })
}
