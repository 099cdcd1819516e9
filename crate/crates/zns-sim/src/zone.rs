//! Zone lifecycle and command set: WRITE, APPEND, READ, FINISH, RESET,
//! the zone-to-element mapping table, LBA striping, open-zone accounting,
//! and the dummy-write policy at FINISH.

use std::collections::HashMap;

use thiserror::Error;

use crate::alloc::{self, AllocError, AllocationRequest, AllocationResult};
use crate::config::{DeviceGeometry, StrategyConfig, StrategyKind};
use crate::flash::{Avail, ElementEvent, FlashError, FlashState, Receipt, ReceiptKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DeviceError {
    #[error("non-sequential write: write pointer at {expected}, got {got}")]
    WritePointerViolation { expected: u64, got: u64 },
    #[error("zone {0} is full")]
    ZoneFull(u32),
    #[error("open zone limit reached")]
    OpenZoneLimitExceeded,
    #[error("read beyond write pointer (wp {wp}, end of range {end})")]
    ReadBeyondWritePointer { wp: u64, end: u64 },
    #[error("read from unmapped zone {0}")]
    ReadUnmappedZone(u32),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Flash(#[from] FlashError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneState {
    Empty,
    Open,
    Full,
}

/// One LUN lane of a striping group: an element and the member blocks the
/// lane covers, in program order.
#[derive(Debug, Clone)]
pub struct Lane {
    pub element: usize,
    pub blocks: Vec<usize>,
    pub lun: u32,
}

#[derive(Debug, Clone)]
pub struct Group {
    /// One entry per LUN lane; `None` once the lane's element was released.
    pub lanes: Vec<Option<Lane>>,
}

#[derive(Debug, Clone)]
pub struct ZoneDescriptor {
    pub id: u32,
    pub state: ZoneState,
    pub wp: u64,
    pub groups: Vec<Group>,
}

#[derive(Debug, Default, Clone)]
pub struct MappingTable {
    zone_elems: HashMap<u32, Vec<usize>>,
    elem_zone: HashMap<usize, u32>,
}

impl MappingTable {
    fn insert(&mut self, zone: u32, elems: &[usize]) {
        for &e in elems {
            debug_assert!(!self.elem_zone.contains_key(&e));
            self.elem_zone.insert(e, zone);
        }
        self.zone_elems.entry(zone).or_default().extend(elems);
    }

    fn remove_element(&mut self, zone: u32, elem: usize) {
        self.elem_zone.remove(&elem);
        if let Some(v) = self.zone_elems.get_mut(&zone) {
            v.retain(|&x| x != elem);
        }
    }

    fn remove_zone(&mut self, zone: u32) -> Vec<usize> {
        let elems = self.zone_elems.remove(&zone).unwrap_or_default();
        for e in &elems {
            self.elem_zone.remove(e);
        }
        elems
    }

    pub fn elements_of(&self, zone: u32) -> &[usize] {
        self.zone_elems.get(&zone).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn zone_of(&self, elem: usize) -> Option<u32> {
        self.elem_zone.get(&elem).copied()
    }

    /// Mapped pairs are bijective: no element referenced by two zones.
    pub fn is_bijective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for (z, elems) in &self.zone_elems {
            for e in elems {
                if !seen.insert(*e) || self.elem_zone.get(e) != Some(z) {
                    return false;
                }
            }
        }
        seen.len() == self.elem_zone.len()
    }
}

/// The outcome of one device command: timed receipts for the event loop
/// plus bookkeeping for trace and metrics.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct CommandOutcome {
    pub receipts: Vec<Receipt>,
    pub alloc: Option<AllocationResult>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinishReport {
    pub dummy_pages: u64,
    pub elements_released: usize,
    /// Dummy program receipts, LUN-interleaved, for paced scheduling.
    pub dummy_receipts: Vec<Receipt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResetReport {
    pub elements_invalidated: usize,
    pub elements_released: usize,
}

pub struct Device {
    pub geom: DeviceGeometry,
    pub strategy: StrategyConfig,
    pub flash: FlashState,
    pub zones: Vec<ZoneDescriptor>,
    pub mapping: MappingTable,
    open_count: u32,
}

impl Device {
    pub fn new(geom: &DeviceGeometry, strategy: StrategyConfig) -> Self {
        let zones = (0..geom.zones_total)
            .map(|id| ZoneDescriptor {
                id,
                state: ZoneState::Empty,
                wp: 0,
                groups: Vec::new(),
            })
            .collect();
        Device {
            geom: geom.clone(),
            strategy,
            flash: FlashState::new(geom, strategy),
            zones,
            mapping: MappingTable::default(),
            open_count: 0,
        }
    }

    pub fn zone_pages(&self) -> u64 {
        self.geom.zone_pages()
    }

    pub fn open_zones(&self) -> u32 {
        self.open_count
    }

    pub fn zone(&self, id: u32) -> &ZoneDescriptor {
        &self.zones[id as usize]
    }

    fn lane_blocks(&self) -> u32 {
        self.strategy.lane_blocks(&self.geom)
    }

    fn group_pages(&self) -> u64 {
        self.geom.luns_total() as u64 * self.lane_blocks() as u64 * self.geom.pages_per_block as u64
    }

    /// Striping rule: logical page -> (group, lane, block within lane,
    /// page within block). Lanes fill round-robin across LUNs; each lane's
    /// blocks fill sequentially.
    pub fn locate(&self, page: u64) -> PageLocation {
        let luns = self.geom.luns_total() as u64;
        let gp = self.group_pages();
        let group = (page / gp) as usize;
        let r = page % gp;
        let lane = (r % luns) as usize;
        let q = r / luns;
        let block_in_lane = (q / self.geom.pages_per_block as u64) as usize;
        let page_in_block = (q % self.geom.pages_per_block as u64) as u32;
        PageLocation {
            group,
            lane,
            block_in_lane,
            page_in_block,
        }
    }

    /// Turn an allocation into the zone's ordered lane structure.
    fn build_groups(&self, res: &AllocationResult) -> Vec<Group> {
        let luns = self.geom.luns_total();
        let e = self.geom.blocks_per_lun_per_zone() as usize;
        match self.strategy.kind {
            StrategyKind::Chunk => res
                .groups
                .iter()
                .map(|ids| Group {
                    lanes: ids
                        .iter()
                        .map(|&id| {
                            let lun = self.flash.elements[id].blocks[0].lun;
                            Some(Lane {
                                element: id,
                                blocks: (0..self.strategy.chunk_size as usize).collect(),
                                lun,
                            })
                        })
                        .collect(),
                })
                .collect(),
            StrategyKind::Stripe => res
                .groups
                .iter()
                .map(|ids| {
                    let id = ids[0];
                    Group {
                        lanes: (0..luns)
                            .map(|l| {
                                Some(Lane {
                                    element: id,
                                    blocks: vec![l as usize],
                                    lun: l,
                                })
                            })
                            .collect(),
                    }
                })
                .collect(),
            StrategyKind::Direct | StrategyKind::Lazy => {
                let id = res.element_ids[0];
                vec![Group {
                    lanes: (0..luns)
                        .map(|l| {
                            Some(Lane {
                                element: id,
                                blocks: (l as usize * e..(l as usize + 1) * e).collect(),
                                lun: l,
                            })
                        })
                        .collect(),
                }]
            }
        }
    }

    fn open_zone_on_first_write(&mut self, zone_id: u32) -> Result<CommandOutcome, DeviceError> {
        if self.open_count >= self.geom.max_open_zones {
            return Err(DeviceError::OpenZoneLimitExceeded);
        }
        let res = alloc::allocate(&AllocationRequest {
            zone_id,
            strategy: self.strategy,
            state: &self.flash,
        })?;
        let mut receipts = Vec::new();
        for &id in &res.element_ids {
            receipts.extend(self.flash.allocate_element(id)?);
        }
        if self.geom.t_alloc > 0 {
            receipts.insert(
                0,
                Receipt {
                    lun: u32::MAX,
                    duration: self.geom.t_alloc,
                    kind: ReceiptKind::Program,
                },
            );
        }
        let groups = self.build_groups(&res);
        self.mapping.insert(zone_id, &res.element_ids);
        let zone = &mut self.zones[zone_id as usize];
        zone.groups = groups;
        zone.state = ZoneState::Open;
        self.open_count += 1;
        Ok(CommandOutcome {
            receipts,
            alloc: Some(res),
        })
    }

    /// WRITE at an explicit start LBA (zone-relative page offset).
    pub fn zone_write(
        &mut self,
        zone_id: u32,
        start_lba: u64,
        pages: u64,
    ) -> Result<CommandOutcome, DeviceError> {
        let zone_pages = self.zone_pages();
        let zone = &self.zones[zone_id as usize];
        if zone.state == ZoneState::Full || zone.wp + pages > zone_pages {
            return Err(DeviceError::ZoneFull(zone_id));
        }
        if start_lba != zone.wp {
            return Err(DeviceError::WritePointerViolation {
                expected: zone.wp,
                got: start_lba,
            });
        }
        if pages == 0 {
            return Ok(CommandOutcome::default());
        }
        let mut outcome = if zone.state == ZoneState::Empty {
            self.open_zone_on_first_write(zone_id)?
        } else {
            CommandOutcome::default()
        };
        let wp = self.zones[zone_id as usize].wp;
        for p in wp..wp + pages {
            let loc = self.locate(p);
            let lane = self.zones[zone_id as usize].groups[loc.group].lanes[loc.lane]
                .clone()
                .expect("writable lane is mapped");
            let receipt =
                self.flash
                    .program_page(lane.element, lane.blocks[loc.block_in_lane], loc.page_in_block)?;
            outcome.receipts.push(receipt);
        }
        let zone = &mut self.zones[zone_id as usize];
        zone.wp += pages;
        if zone.wp == zone_pages {
            zone.state = ZoneState::Full;
            self.open_count -= 1;
        }
        Ok(outcome)
    }

    /// APPEND: write at the current pointer, returning the assigned LBA.
    pub fn zone_append(
        &mut self,
        zone_id: u32,
        pages: u64,
    ) -> Result<(u64, CommandOutcome), DeviceError> {
        let lba = self.zones[zone_id as usize].wp;
        let outcome = self.zone_write(zone_id, lba, pages)?;
        Ok((lba, outcome))
    }

    /// READ a page range below the write pointer. Pages whose lane was
    /// released at FINISH are returned zero-filled without flash access.
    pub fn zone_read(
        &mut self,
        zone_id: u32,
        start_lba: u64,
        pages: u64,
    ) -> Result<CommandOutcome, DeviceError> {
        let zone = &self.zones[zone_id as usize];
        if zone.state == ZoneState::Empty {
            return Err(DeviceError::ReadUnmappedZone(zone_id));
        }
        if start_lba + pages > zone.wp {
            return Err(DeviceError::ReadBeyondWritePointer {
                wp: zone.wp,
                end: start_lba + pages,
            });
        }
        let t_read = self.geom.t_read + self.geom.channel_xfer;
        let mut receipts = Vec::new();
        for p in start_lba..start_lba + pages {
            let loc = self.locate(p);
            if let Some(group) = zone.groups.get(loc.group) {
                if let Some(lane) = &group.lanes[loc.lane] {
                    receipts.push(Receipt {
                        lun: lane.lun,
                        duration: t_read,
                        kind: ReceiptKind::Read,
                    });
                }
            }
        }
        Ok(CommandOutcome {
            receipts,
            alloc: None,
        })
    }

    /// FINISH: dummy-fill every programmed element, release untouched
    /// ones, seal the zone. Full zones are a no-op; empty zones seal with
    /// no mapping.
    pub fn finish_zone(&mut self, zone_id: u32) -> Result<FinishReport, DeviceError> {
        let zone_pages = self.zone_pages();
        match self.zones[zone_id as usize].state {
            ZoneState::Full => {
                return Ok(FinishReport {
                    dummy_pages: 0,
                    elements_released: 0,
                    dummy_receipts: Vec::new(),
                })
            }
            ZoneState::Empty => {
                let zone = &mut self.zones[zone_id as usize];
                zone.state = ZoneState::Full;
                zone.wp = zone_pages;
                return Ok(FinishReport {
                    dummy_pages: 0,
                    elements_released: 0,
                    dummy_receipts: Vec::new(),
                });
            }
            ZoneState::Open => {}
        }

        let mapped: Vec<usize> = self.mapping.elements_of(zone_id).to_vec();
        let mut released = Vec::new();
        // per-LUN fill queues: (element, block_in_elem, page)
        let luns = self.geom.luns_total() as usize;
        let mut queues: Vec<Vec<(usize, usize, u32)>> = vec![Vec::new(); luns];
        let pages_per_block = self.geom.pages_per_block;
        for &id in &mapped {
            let elem = &self.flash.elements[id];
            match elem.avail {
                Avail::AllocatedValid => {
                    for (bi, block) in elem.blocks.iter().enumerate() {
                        for p in elem.programmed[bi]..pages_per_block {
                            queues[block.lun as usize].push((id, bi, p));
                        }
                    }
                }
                Avail::AllocatedEmpty => released.push(id),
                _ => unreachable!("mapped element must be allocated"),
            }
        }
        for &id in &released {
            self.flash.release_element(id, ElementEvent::FinishRelease)?;
            self.mapping.remove_element(zone_id, id);
            for group in &mut self.zones[zone_id as usize].groups {
                for lane in &mut group.lanes {
                    if lane.as_ref().is_some_and(|l| l.element == id) {
                        *lane = None;
                    }
                }
            }
        }
        // interleave the per-LUN queues round-robin so dummy traffic spreads
        // across LUNs in submission order
        let mut dummy_receipts = Vec::new();
        let mut cursors = vec![0usize; luns];
        loop {
            let mut advanced = false;
            for (lun, queue) in queues.iter().enumerate() {
                if let Some(&(id, bi, p)) = queue.get(cursors[lun]) {
                    dummy_receipts.push(self.flash.program_page(id, bi, p)?);
                    cursors[lun] += 1;
                    advanced = true;
                }
            }
            if !advanced {
                break;
            }
        }
        let zone = &mut self.zones[zone_id as usize];
        zone.state = ZoneState::Full;
        zone.wp = zone_pages;
        self.open_count -= 1;
        Ok(FinishReport {
            dummy_pages: dummy_receipts.len() as u64,
            elements_released: released.len(),
            dummy_receipts,
        })
    }

    /// RESET: invalidate written elements, free empty ones, rewind the
    /// pointer. No erase latency is charged now (asynchronous reset).
    pub fn reset_zone(&mut self, zone_id: u32) -> Result<ResetReport, DeviceError> {
        if self.zones[zone_id as usize].state == ZoneState::Empty {
            return Ok(ResetReport {
                elements_invalidated: 0,
                elements_released: 0,
            });
        }
        let elems = self.mapping.remove_zone(zone_id);
        let mut invalidated = 0;
        let mut released = 0;
        for id in elems {
            match self.flash.elements[id].avail {
                Avail::AllocatedValid => {
                    self.flash.release_element(id, ElementEvent::ResetInvalidate)?;
                    invalidated += 1;
                }
                Avail::AllocatedEmpty => {
                    self.flash.release_element(id, ElementEvent::ResetRelease)?;
                    released += 1;
                }
                _ => unreachable!("mapped element must be allocated"),
            }
        }
        let zone = &mut self.zones[zone_id as usize];
        if zone.state == ZoneState::Open {
            self.open_count -= 1;
        }
        zone.state = ZoneState::Empty;
        zone.wp = 0;
        zone.groups.clear();
        Ok(ResetReport {
            elements_invalidated: invalidated,
            elements_released: released,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageLocation {
    pub group: usize,
    pub lane: usize,
    pub block_in_lane: usize,
    pub page_in_block: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{g_small, zn540, StrategyConfig};

    #[test]
    fn stripe_write_round_robins_lanes() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        let out = dev.zone_write(0, 0, 8).unwrap();
        assert_eq!(out.receipts.len(), 8);
        let luns: Vec<u32> = out.receipts.iter().map(|r| r.lun).collect();
        assert_eq!(luns, vec![0, 1, 2, 3, 0, 1, 2, 3]);
        assert_eq!(dev.zone(0).wp, 8);
        assert_eq!(dev.zone(0).state, ZoneState::Open);
        // 2 pages per block of stripe 0, stripe 1 untouched
        assert_eq!(dev.flash.elements[0].programmed, vec![2, 2, 2, 2]);
        assert_eq!(dev.flash.elements[1].programmed, vec![0, 0, 0, 0]);
    }

    #[test]
    fn write_pointer_violation() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 4).unwrap();
        assert_eq!(
            dev.zone_write(0, 3, 1),
            Err(DeviceError::WritePointerViolation { expected: 4, got: 3 })
        );
    }

    #[test]
    fn open_zone_limit() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 1).unwrap();
        dev.zone_write(1, 0, 1).unwrap();
        assert_eq!(dev.zone_write(2, 0, 1), Err(DeviceError::OpenZoneLimitExceeded));
        // finishing releases the slot
        dev.finish_zone(0).unwrap();
        dev.zone_write(2, 0, 1).unwrap();
    }

    #[test]
    fn append_assigns_consecutive_lbas() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 8).unwrap();
        let (lba, _) = dev.zone_append(0, 4).unwrap();
        assert_eq!(lba, 8);
        let (lba2, _) = dev.zone_append(0, 2).unwrap();
        assert_eq!(lba2, 12);
        assert_eq!(dev.zone(0).wp, 14);
    }

    #[test]
    fn append_to_full_zone() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 32).unwrap();
        assert_eq!(dev.zone(0).state, ZoneState::Full);
        assert_eq!(dev.zone_append(0, 1), Err(DeviceError::ZoneFull(0)));
    }

    #[test]
    fn read_within_and_beyond_wp() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 8).unwrap();
        let out = dev.zone_read(0, 0, 4).unwrap();
        assert_eq!(out.receipts.len(), 4);
        assert!(out.receipts.iter().all(|r| r.duration == 60));
        assert_eq!(
            dev.zone_read(0, 8, 1),
            Err(DeviceError::ReadBeyondWritePointer { wp: 8, end: 9 })
        );
        assert_eq!(dev.zone_read(1, 0, 1), Err(DeviceError::ReadUnmappedZone(1)));
    }

    #[test]
    fn finish_fills_touched_stripe_and_releases_rest() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 8).unwrap(); // 25% of the zone
        let report = dev.finish_zone(0).unwrap();
        assert_eq!(report.dummy_pages, 8); // stripe 0 filled to 16 pages
        assert_eq!(report.elements_released, 1); // stripe 1 freed
        assert_eq!(dev.zone(0).state, ZoneState::Full);
        assert_eq!(dev.zone(0).wp, 32);
        assert_eq!(dev.flash.elements[0].programmed, vec![4, 4, 4, 4]);
        assert_eq!(dev.flash.elements[1].avail, Avail::Free);
        // reads of the written region still work after finish
        assert_eq!(dev.zone_read(0, 0, 8).unwrap().receipts.len(), 8);
        // released-region reads are zero-filled, no flash access
        assert_eq!(dev.zone_read(0, 16, 8).unwrap().receipts.len(), 0);
        // idempotent
        let again = dev.finish_zone(0).unwrap();
        assert_eq!(again.dummy_pages, 0);
    }

    #[test]
    fn baseline_finish_fills_whole_zone() {
        let mut dev = Device::new(&g_small(), StrategyConfig::lazy());
        dev.zone_write(0, 0, 8).unwrap();
        let report = dev.finish_zone(0).unwrap();
        assert_eq!(report.dummy_pages, 24);
        assert_eq!(report.elements_released, 0);
    }

    #[test]
    fn chunk1_finish_releases_untouched_lanes() {
        // 2 host pages land on lanes 0 and 1 of the first group; lanes 2,3
        // were never programmed and must be released, not dummy-filled
        let mut dev = Device::new(&g_small(), StrategyConfig::chunk(1));
        dev.zone_write(0, 0, 2).unwrap();
        let report = dev.finish_zone(0).unwrap();
        // blocks on lanes 0,1 fill to 4 pages each: 3 + 3 dummies
        assert_eq!(report.dummy_pages, 6);
        assert_eq!(report.elements_released, 6); // 8 chunks mapped, 2 kept
    }

    #[test]
    fn stripe_finish_on_partial_stripe_fills_all_lanes() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 2).unwrap();
        let report = dev.finish_zone(0).unwrap();
        // whole stripe 0 (16 pages) must be programmed; stripe 1 released
        assert_eq!(report.dummy_pages, 14);
        assert_eq!(report.elements_released, 1);
    }

    #[test]
    fn finish_empty_zone_seals_without_mapping() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        let report = dev.finish_zone(2).unwrap();
        assert_eq!(report.dummy_pages, 0);
        assert_eq!(dev.zone(2).state, ZoneState::Full);
        assert!(dev.mapping.elements_of(2).is_empty());
        assert_eq!(dev.open_zones(), 0);
    }

    #[test]
    fn reset_invalidates_written_and_frees_empty() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 8).unwrap(); // stripe 0 written, stripe 1 empty
        let report = dev.reset_zone(0).unwrap();
        assert_eq!(report.elements_invalidated, 1);
        assert_eq!(report.elements_released, 1);
        assert_eq!(dev.zone(0).state, ZoneState::Empty);
        assert_eq!(dev.zone(0).wp, 0);
        assert_eq!(dev.flash.elements[0].avail, Avail::FreeInvalid);
        assert_eq!(dev.flash.elements[1].avail, Avail::Free);
        assert!(dev.mapping.is_bijective());
        assert_eq!(dev.open_zones(), 0);
    }

    #[test]
    fn reset_full_zone_all_written() {
        let geom = zn540();
        let mut dev = Device::new(&geom, StrategyConfig::stripe());
        dev.zone_write(0, 0, geom.zone_pages()).unwrap();
        let report = dev.reset_zone(0).unwrap();
        assert_eq!(report.elements_invalidated, 22);
        assert_eq!(report.elements_released, 0);
    }

    #[test]
    fn rewrite_after_reset_may_pick_other_elements() {
        let mut dev = Device::new(&g_small(), StrategyConfig::stripe());
        dev.zone_write(0, 0, 8).unwrap();
        dev.reset_zone(0).unwrap();
        let out = dev.zone_write(0, 0, 8).unwrap();
        let alloc = out.alloc.unwrap();
        // stripe 0 now carries wear 0 but is invalid; fresh stripes 1..
        // have equal wear and win on availability-free tie? No: both are
        // allocatable. Lowest wear picks among all; stripe 0 has wear 0
        // too, so ids 0 and 1 win. The erase of stripe 0 is charged now.
        assert_eq!(alloc.element_ids, vec![0, 1]);
        assert!(out
            .receipts
            .iter()
            .any(|r| r.kind == ReceiptKind::Erase && r.duration == 3500));
    }

    #[test]
    fn zn540_stripe_at_half_occupancy_no_dummy() {
        let geom = zn540();
        let mut dev = Device::new(&geom, StrategyConfig::stripe());
        dev.zone_write(0, 0, geom.zone_pages() / 2).unwrap();
        let report = dev.finish_zone(0).unwrap();
        assert_eq!(report.dummy_pages, 0);
        assert_eq!(report.elements_released, 11);
    }

    #[test]
    fn direct_mapping_reuses_fixed_element() {
        let mut dev = Device::new(&g_small(), StrategyConfig::direct());
        dev.zone_write(3, 0, 4).unwrap();
        assert_eq!(dev.mapping.elements_of(3), &[3]);
        dev.reset_zone(3).unwrap();
        let out = dev.zone_write(3, 0, 4).unwrap();
        assert_eq!(out.alloc.unwrap().element_ids, vec![3]);
        // erase charged before the first new program
        assert_eq!(out.receipts[0].kind, ReceiptKind::Erase);
    }
}
