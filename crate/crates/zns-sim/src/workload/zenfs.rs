//! ZenFS-lite host model: a KV op mix (insert/delete/query/update) mapped
//! onto lifetime-hinted files placed into zones, with a FINISH occupancy
//! threshold.
//!
//! Inserts and updates append values to a per-class active file that seals
//! (and is written out) at the class's file size. Deletes invalidate the
//! oldest live file of the class, preferring expired ones; updates
//! invalidate a value's worth from the oldest live file. A zone resets when
//! its last live byte is invalidated. At the open-zone limit, placement
//! finishes the most-full open zone meeting the threshold; if none
//! qualifies it relaxes hint matching to the nearest class, mixing
//! lifetimes in one zone.

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{DeviceGeometry, StrategyConfig};
use crate::engine::{self, EngineError, Issuer, Sim, StepResult};
use crate::zone::ZoneState;

pub const CLASS_COUNT: usize = 4;
pub const CLASS_NAMES: [&str; CLASS_COUNT] = ["short", "medium", "long", "extreme"];

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LifetimeClass {
    /// Sealed file size, pages.
    pub mean_file_pages: u64,
    /// Ops until the class's data is considered expired.
    pub mean_lifetime_ops: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZenfsSpec {
    pub total_ops: u64,
    /// T percent: finishing a zone requires occupancy >= (100 - T)%.
    /// T = 0 disallows FINISH entirely.
    pub finish_threshold: u32,
    pub seed: u64,
    pub classes: [LifetimeClass; CLASS_COUNT],
    /// Per-op probability of drawing each lifetime class.
    pub class_weights: [f64; CLASS_COUNT],
    /// Value pages appended per insert/update = file size / divisor. The
    /// default divisor of 5 balances the 50/10/15/25 op mix exactly.
    pub value_divisor: u64,
    /// Pages read per point query, capped by the file's live size.
    pub query_pages: u64,
    /// Application-level cap on concurrently open zones (like ZenFS's
    /// max-active-zones setting); effective limit is the smaller of this
    /// and the device's open-zone limit. Keeping it below the class count
    /// forces finish-or-relax decisions.
    pub active_zone_budget: u32,
}

impl Default for ZenfsSpec {
    fn default() -> Self {
        ZenfsSpec {
            total_ops: 40_000,
            finish_threshold: 90,
            seed: 1,
            classes: [
                LifetimeClass {
                    mean_file_pages: 15,
                    mean_lifetime_ops: 300,
                },
                LifetimeClass {
                    mean_file_pages: 25,
                    mean_lifetime_ops: 1_500,
                },
                LifetimeClass {
                    mean_file_pages: 30,
                    mean_lifetime_ops: 3_000,
                },
                // never expires within a run: cold data that pins zones
                LifetimeClass {
                    mean_file_pages: 50,
                    mean_lifetime_ops: u64::MAX / 2,
                },
            ],
            class_weights: [0.455, 0.30, 0.24, 0.005],
            value_divisor: 5,
            query_pages: 16,
            active_zone_budget: 3,
        }
    }
}

/// KV op ratios: insert 0.50, delete 0.10, point query 0.15, update 0.25.
const OP_RATIOS: [f64; 4] = [0.50, 0.10, 0.15, 0.25];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KvOp {
    Insert,
    Delete,
    Query,
    Update,
}

#[derive(Debug, Clone)]
struct FileRec {
    class: usize,
    zone: u32,
    lba: u64,
    live_pages: u64,
    created_op: u64,
}

#[derive(Debug, Clone, Default)]
struct ZoneBook {
    live_pages: u64,
    invalid_pages: u64,
    hint: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ZenfsStats {
    pub ops_done: u64,
    pub files_written: u64,
    pub finishes: u64,
    pub resets: u64,
    pub relaxed_placements: u64,
    pub out_of_space: bool,
    /// Host pages present in zones at the moment they were finished.
    pub finish_occupancy_pages: u64,
    /// End-of-run census, for capacity diagnostics.
    pub live_pages: u64,
    pub invalid_pages: u64,
    pub zones_empty: u32,
    pub zones_open: u32,
    pub zones_full: u32,
}

pub struct ZenfsIssuer {
    spec: ZenfsSpec,
    rng: ChaCha8Rng,
    active: [u64; CLASS_COUNT],
    files: HashMap<u64, FileRec>,
    /// Per-class file ids in creation order.
    class_queue: [VecDeque<u64>; CLASS_COUNT],
    zones: Vec<ZoneBook>,
    next_file_id: u64,
    stats: Rc<RefCell<ZenfsStats>>,
}

impl ZenfsIssuer {
    pub fn new(geom: &DeviceGeometry, spec: ZenfsSpec, stats: Rc<RefCell<ZenfsStats>>) -> Self {
        ZenfsIssuer {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec,
            active: [0; CLASS_COUNT],
            files: HashMap::new(),
            class_queue: Default::default(),
            zones: vec![ZoneBook::default(); geom.zones_total as usize],
            next_file_id: 0,
            stats,
        }
    }

    fn draw_op(&mut self) -> KvOp {
        let x: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (i, r) in OP_RATIOS.iter().enumerate() {
            acc += r;
            if x < acc {
                return [KvOp::Insert, KvOp::Delete, KvOp::Query, KvOp::Update][i];
            }
        }
        KvOp::Update
    }

    fn draw_class(&mut self) -> usize {
        let x: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (i, w) in self.spec.class_weights.iter().enumerate() {
            acc += w;
            if x < acc {
                return i;
            }
        }
        CLASS_COUNT - 1
    }

    fn value_pages(&self, class: usize) -> u64 {
        (self.spec.classes[class].mean_file_pages / self.spec.value_divisor).max(1)
    }

    /// Victim for an invalidation: the oldest expired file of `class`,
    /// else the oldest expired file of any class. Unexpired data is never
    /// touched, so never-expiring cold data pins its zones for good.
    fn pick_victim(&self, class: usize, op: u64) -> Option<u64> {
        let expired = |id: &u64| {
            let f = &self.files[id];
            op.saturating_sub(f.created_op) >= self.spec.classes[f.class].mean_lifetime_ops
        };
        // within one class, lifetimes are equal, so the queue front expires
        // first; checking fronts covers every class
        if let Some(&id) = self.class_queue[class].front().filter(|id| expired(id)) {
            return Some(id);
        }
        self.class_queue
            .iter()
            .filter_map(|q| q.front())
            .filter(|id| expired(id))
            .min_by_key(|&&id| self.files[&id].created_op)
            .copied()
    }

    /// Invalidate `pages` worth of the oldest expired data, spanning files
    /// if the first victim is smaller. Stops early when nothing has
    /// expired yet.
    fn invalidate_oldest(
        &mut self,
        sim: &mut Sim,
        job: usize,
        class: usize,
        op: u64,
        mut pages: u64,
    ) -> Result<(), EngineError> {
        while pages > 0 {
            let Some(victim) = self.pick_victim(class, op) else {
                return Ok(());
            };
            let take = pages.min(self.files[&victim].live_pages);
            self.invalidate(sim, job, victim, take)?;
            pages -= take;
        }
        Ok(())
    }

    /// Invalidate up to `pages` from file `id`; resets the zone if it
    /// drains completely.
    fn invalidate(
        &mut self,
        sim: &mut Sim,
        job: usize,
        id: u64,
        pages: u64,
    ) -> Result<(), EngineError> {
        let (zone, class, taken) = {
            let f = self.files.get_mut(&id).expect("victim exists");
            let taken = pages.min(f.live_pages);
            f.live_pages -= taken;
            (f.zone, f.class, taken)
        };
        if taken == 0 {
            return Ok(());
        }
        let book = &mut self.zones[zone as usize];
        book.live_pages -= taken;
        book.invalid_pages += taken;
        sim.ledger.invalidate(taken * sim.device.geom.page_size);
        if self.files[&id].live_pages == 0 {
            self.files.remove(&id);
            self.class_queue[class].retain(|&x| x != id);
        }
        if self.zones[zone as usize].live_pages == 0
            && sim.device.zone(zone).state != ZoneState::Empty
        {
            sim.reset(job, zone)?;
            let book = &mut self.zones[zone as usize];
            sim.ledger
                .reclaim(book.invalid_pages * sim.device.geom.page_size);
            book.invalid_pages = 0;
            book.hint = None;
            self.stats.borrow_mut().resets += 1;
        }
        Ok(())
    }

    /// Choose a zone for `pages` of class `class`, finishing or relaxing as
    /// needed. `None` means out of space.
    fn place(&mut self, sim: &mut Sim, job: usize, class: usize, pages: u64) -> Result<Option<u32>, EngineError> {
        let zone_pages = sim.device.zone_pages();
        let fits = |sim: &Sim, z: u32| sim.device.zone(z).wp + pages <= zone_pages;

        // 1. matching-hint open zone with room
        for z in 0..sim.device.geom.zones_total {
            if sim.device.zone(z).state == ZoneState::Open
                && self.zones[z as usize].hint == Some(class)
                && fits(sim, z)
            {
                return Ok(Some(z));
            }
        }
        // 2. open a fresh zone if a slot and an empty zone exist
        let empty_zone = |sim: &Sim| {
            (0..sim.device.geom.zones_total)
                .find(|&z| sim.device.zone(z).state == ZoneState::Empty)
        };
        let open_limit = self
            .spec
            .active_zone_budget
            .min(sim.device.geom.max_open_zones);
        if sim.device.open_zones() < open_limit {
            if let Some(z) = empty_zone(sim) {
                self.zones[z as usize].hint = Some(class);
                return Ok(Some(z));
            }
        }
        // 3. at the limit: finish the most-full open zone meeting the
        // threshold, then open a fresh zone
        if self.spec.finish_threshold > 0 {
            let need = zone_pages
                .saturating_mul(100 - self.spec.finish_threshold as u64)
                .div_ceil(100);
            let victim = (0..sim.device.geom.zones_total)
                .filter(|&z| sim.device.zone(z).state == ZoneState::Open)
                .filter(|&z| sim.device.zone(z).wp >= need)
                .max_by_key(|&z| (sim.device.zone(z).wp, std::cmp::Reverse(z)));
            if let Some(v) = victim {
                let occupancy = sim.device.zone(v).wp;
                sim.finish(job, v)?;
                {
                    let mut stats = self.stats.borrow_mut();
                    stats.finishes += 1;
                    stats.finish_occupancy_pages += occupancy;
                }
                if let Some(z) = empty_zone(sim) {
                    self.zones[z as usize].hint = Some(class);
                    return Ok(Some(z));
                }
            }
        }
        // 4. relax hint matching: nearest lifetime class first
        let relaxed = (0..sim.device.geom.zones_total)
            .filter(|&z| sim.device.zone(z).state == ZoneState::Open && fits(sim, z))
            .min_by_key(|&z| {
                let hint = self.zones[z as usize].hint.unwrap_or(CLASS_COUNT);
                (hint.abs_diff(class), z)
            });
        if let Some(z) = relaxed {
            self.stats.borrow_mut().relaxed_placements += 1;
            return Ok(Some(z));
        }
        Ok(None)
    }

    /// Seal and write out the active file of `class`. Returns the write
    /// completion time, or `None` on out-of-space.
    fn write_file(
        &mut self,
        sim: &mut Sim,
        job: usize,
        class: usize,
        op: u64,
    ) -> Result<Option<u64>, EngineError> {
        let pages = self.spec.classes[class].mean_file_pages;
        let Some(zone) = self.place(sim, job, class, pages)? else {
            return Ok(None);
        };
        let lba = sim.device.zone(zone).wp;
        let done = sim.write(job, zone, pages)?;
        self.zones[zone as usize].live_pages += pages;
        let id = self.next_file_id;
        self.next_file_id += 1;
        self.files.insert(
            id,
            FileRec {
                class,
                zone,
                lba,
                live_pages: pages,
                created_op: op,
            },
        );
        self.class_queue[class].push_back(id);
        self.stats.borrow_mut().files_written += 1;
        Ok(Some(done))
    }
}

impl Issuer for ZenfsIssuer {
    fn step(&mut self, sim: &mut Sim, job: usize) -> Result<StepResult, EngineError> {
        let op = self.stats.borrow().ops_done;
        if op >= self.spec.total_ops {
            return Ok(StepResult::Done);
        }
        let kv = self.draw_op();
        let class = self.draw_class();
        let mut next = sim.now;
        match kv {
            KvOp::Insert | KvOp::Update => {
                if kv == KvOp::Update {
                    let v = self.value_pages(class);
                    self.invalidate_oldest(sim, job, class, op, v)?;
                }
                self.active[class] += self.value_pages(class);
                if self.active[class] >= self.spec.classes[class].mean_file_pages {
                    self.active[class] -= self.spec.classes[class].mean_file_pages;
                    match self.write_file(sim, job, class, op)? {
                        Some(done) => next = done,
                        None => {
                            self.stats.borrow_mut().out_of_space = true;
                            sim.note_out_of_space(job, 0)?;
                            return Ok(StepResult::OutOfSpace);
                        }
                    }
                }
            }
            KvOp::Delete => {
                let pages = self.spec.classes[class].mean_file_pages;
                self.invalidate_oldest(sim, job, class, op, pages)?;
            }
            KvOp::Query => {
                // deterministic "random" pick: a seeded index into the
                // class queue, falling back to any class
                let queue = if self.class_queue[class].is_empty() {
                    (0..CLASS_COUNT).find(|&c| !self.class_queue[c].is_empty())
                } else {
                    Some(class)
                };
                if let Some(c) = queue {
                    let i = self.rng.gen_range(0..self.class_queue[c].len());
                    let id = self.class_queue[c][i];
                    let f = &self.files[&id];
                    let pages = self.spec.query_pages.min(f.live_pages).max(1);
                    let (zone, lba) = (f.zone, f.lba);
                    next = sim.read(job, zone, lba, pages)?;
                }
            }
        }
        {
            let mut stats = self.stats.borrow_mut();
            stats.ops_done += 1;
            stats.live_pages = self.zones.iter().map(|b| b.live_pages).sum();
            stats.invalid_pages = self.zones.iter().map(|b| b.invalid_pages).sum();
            stats.zones_empty = 0;
            stats.zones_open = 0;
            stats.zones_full = 0;
            for z in 0..sim.device.geom.zones_total {
                match sim.device.zone(z).state {
                    ZoneState::Empty => stats.zones_empty += 1,
                    ZoneState::Open => stats.zones_open += 1,
                    ZoneState::Full => stats.zones_full += 1,
                }
            }
        }
        // host-op clock: strategy choice cannot skew the SA integral
        sim.ledger.sample(op + 1);
        Ok(StepResult::Ready(next))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZenfsReport {
    pub strategy: String,
    pub finish_threshold: u32,
    pub seed: u64,
    pub stats: ZenfsStats,
    pub dlwa: f64,
    pub sa_bytes: f64,
    pub sa_norm: f64,
    pub host_bytes: u64,
    pub dummy_bytes: u64,
    pub makespan: u64,
    #[serde(skip)]
    pub block_wear: Vec<u64>,
}

pub fn run_zenfs(
    geom: &DeviceGeometry,
    strategy: StrategyConfig,
    spec: &ZenfsSpec,
) -> Result<ZenfsReport, EngineError> {
    let mut sim = Sim::new(geom, strategy);
    run_zenfs_in(&mut sim, spec)
}

/// Run the workload on an existing sim: the namespace is wiped first (all
/// zones reset, like a fresh filesystem) but wear and LUN time carry over,
/// so repeated runs accumulate erase counts.
pub fn run_zenfs_in(sim: &mut Sim, spec: &ZenfsSpec) -> Result<ZenfsReport, EngineError> {
    for z in 0..sim.device.geom.zones_total {
        if sim.device.zone(z).state != ZoneState::Empty {
            sim.reset(0, z)?;
        }
    }
    sim.ledger.reclaim(u64::MAX);
    let stats = Rc::new(RefCell::new(ZenfsStats::default()));
    let issuer = ZenfsIssuer::new(&sim.device.geom, spec.clone(), stats.clone());
    let report = engine::run(sim, vec![Box::new(issuer)])?;
    let stats = *stats.borrow();
    let end = stats.ops_done.max(1);
    Ok(ZenfsReport {
        strategy: sim.device.strategy.label(),
        finish_threshold: spec.finish_threshold,
        seed: spec.seed,
        stats,
        dlwa: sim.ledger.dlwa(),
        sa_bytes: sim.ledger.space_amp_bytes(end),
        sa_norm: sim.ledger.space_amp_norm(end),
        host_bytes: sim.ledger.host_bytes(),
        dummy_bytes: sim.ledger.dummy_bytes(),
        makespan: report.makespan,
        block_wear: sim.device.flash.block_wear(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::desk;

    #[test]
    fn deterministic_per_seed() {
        let geom = desk();
        let spec = ZenfsSpec {
            total_ops: 3_000,
            ..ZenfsSpec::default()
        };
        let a = run_zenfs(&geom, StrategyConfig::stripe(), &spec).unwrap();
        let b = run_zenfs(&geom, StrategyConfig::stripe(), &spec).unwrap();
        assert_eq!(a.dlwa, b.dlwa);
        assert_eq!(a.makespan, b.makespan);
        assert_eq!(a.stats.files_written, b.stats.files_written);
    }

    #[test]
    fn t_zero_never_finishes() {
        let geom = desk();
        let spec = ZenfsSpec {
            total_ops: 3_000,
            finish_threshold: 0,
            ..ZenfsSpec::default()
        };
        let r = run_zenfs(&geom, StrategyConfig::lazy(), &spec).unwrap();
        assert_eq!(r.stats.finishes, 0);
        assert_eq!(r.dummy_bytes, 0);
    }

    #[test]
    fn direct_equals_lazy_dlwa() {
        let geom = desk();
        let spec = ZenfsSpec {
            total_ops: 5_000,
            ..ZenfsSpec::default()
        };
        let d = run_zenfs(&geom, StrategyConfig::direct(), &spec).unwrap();
        let l = run_zenfs(&geom, StrategyConfig::lazy(), &spec).unwrap();
        assert_eq!(d.dlwa, l.dlwa);
        assert_eq!(d.host_bytes, l.host_bytes);
        assert_eq!(d.dummy_bytes, l.dummy_bytes);
    }

    #[test]
    fn sa_is_strategy_independent() {
        let geom = desk();
        let spec = ZenfsSpec {
            total_ops: 5_000,
            ..ZenfsSpec::default()
        };
        let lazy = run_zenfs(&geom, StrategyConfig::lazy(), &spec).unwrap();
        let stripe = run_zenfs(&geom, StrategyConfig::stripe(), &spec).unwrap();
        let chunk = run_zenfs(&geom, StrategyConfig::chunk(2), &spec).unwrap();
        assert!(!lazy.stats.out_of_space && !stripe.stats.out_of_space);
        assert_eq!(lazy.sa_bytes, stripe.sa_bytes);
        assert_eq!(lazy.sa_bytes, chunk.sa_bytes);
    }

    #[test]
    fn workload_survives_and_recycles() {
        let geom = desk();
        let spec = ZenfsSpec {
            total_ops: 10_000,
            finish_threshold: 10,
            ..ZenfsSpec::default()
        };
        let r = run_zenfs(&geom, StrategyConfig::stripe(), &spec).unwrap();
        assert!(!r.stats.out_of_space);
        assert_eq!(r.stats.ops_done, 10_000);
        assert!(r.stats.resets > 0, "zones should recycle");
        assert!(r.stats.finishes > 0);
    }

    #[test]
    fn capacity_pressure_ends_out_of_space() {
        // never-expiring cold data pins zones, so a long enough run on the
        // tight desk profile must eventually run out of mappable zones
        let geom = desk();
        let spec = ZenfsSpec {
            total_ops: 40_000,
            finish_threshold: 99,
            ..ZenfsSpec::default()
        };
        let r = run_zenfs(&geom, StrategyConfig::stripe(), &spec).unwrap();
        assert!(r.stats.out_of_space);
        assert!(r.stats.ops_done < 40_000);
    }
}
