//! Physical flash state: storage elements, wear, availability, and the
//! legal transitions between availability states.
//!
//! A storage element is the allocatable unit: a chunk (`chunk_size` blocks
//! in one LUN), a stripe (one block per LUN), or a whole physical zone for
//! the full-zone baselines. Blocks inside an element are programmed
//! strictly sequentially and erased together, so wear is tracked per
//! element.

use serde::Serialize;
use thiserror::Error;

use crate::config::{DeviceGeometry, StrategyConfig, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Avail {
    /// a = 0: empty and available for allocation.
    Free = 0,
    /// a = 1: allocated to a zone but not yet programmed.
    AllocatedEmpty = 1,
    /// a = 2: allocated and programmed.
    AllocatedValid = 2,
    /// a = 3: released with stale data; erased on re-allocation.
    FreeInvalid = 3,
}

impl Avail {
    pub fn is_allocatable(self) -> bool {
        matches!(self, Avail::Free | Avail::FreeInvalid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementEvent {
    Allocate,
    FirstProgram,
    FinishRelease,
    ResetInvalidate,
    ResetRelease,
    EraseComplete,
}

pub const ALL_EVENTS: [ElementEvent; 6] = [
    ElementEvent::Allocate,
    ElementEvent::FirstProgram,
    ElementEvent::FinishRelease,
    ElementEvent::ResetInvalidate,
    ElementEvent::ResetRelease,
    ElementEvent::EraseComplete,
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlashError {
    #[error("illegal transition: {state:?} on {event:?}")]
    IllegalTransition { state: Avail, event: ElementEvent },
    #[error("out-of-order program: block at page {programmed}, requested {requested}")]
    ProgramOrderViolation { programmed: u32, requested: u32 },
    #[error("program on unallocated element (a = {state:?})")]
    ProgramOnUnallocated { state: Avail },
    #[error("block already fully programmed")]
    BlockFull,
    #[error("attempt to erase an element holding valid data")]
    EraseValidData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiptKind {
    Program,
    Read,
    Erase,
}

/// A timed unit of device work bound to one LUN. The event loop turns
/// receipts into LUN occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    pub lun: u32,
    pub duration: u64,
    pub kind: ReceiptKind,
}

/// A physical block, identified by LUN and index within that LUN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockRef {
    pub lun: u32,
    pub index: u32,
}

impl BlockRef {
    /// Global block id, for wear histograms.
    pub fn global(&self, geom: &DeviceGeometry) -> u64 {
        self.lun as u64 * geom.blocks_per_lun as u64 + self.index as u64
    }
}

#[derive(Debug, Clone)]
pub struct StorageElement {
    pub id: usize,
    /// LUN for chunks; `None` for elements spanning all LUNs.
    pub lun: Option<u32>,
    pub blocks: Vec<BlockRef>,
    pub wear: u64,
    pub avail: Avail,
    /// Programmed page count per member block, parallel to `blocks`.
    pub programmed: Vec<u32>,
}

impl StorageElement {
    pub fn programmed_total(&self) -> u64 {
        self.programmed.iter().map(|&p| p as u64).sum()
    }

    pub fn capacity_pages(&self, geom: &DeviceGeometry) -> u64 {
        self.blocks.len() as u64 * geom.pages_per_block as u64
    }
}

/// Pure availability state machine. `(FreeInvalid, Allocate)` performs the
/// deferred erase: wear increments and programmed pages reset before the
/// element is handed out.
pub fn element_transition(elem: &mut StorageElement, event: ElementEvent) -> Result<(), FlashError> {
    use Avail::*;
    use ElementEvent::*;
    match (elem.avail, event) {
        (Free, Allocate) => elem.avail = AllocatedEmpty,
        (FreeInvalid, Allocate) => {
            elem.wear += 1;
            elem.programmed.iter_mut().for_each(|p| *p = 0);
            elem.avail = AllocatedEmpty;
        }
        (AllocatedEmpty, FirstProgram) => elem.avail = AllocatedValid,
        (AllocatedEmpty, FinishRelease) | (AllocatedEmpty, ResetRelease) => elem.avail = Free,
        (AllocatedValid, ResetInvalidate) => elem.avail = FreeInvalid,
        (FreeInvalid, EraseComplete) => {
            elem.wear += 1;
            elem.programmed.iter_mut().for_each(|p| *p = 0);
            elem.avail = Free;
        }
        (state, event) => return Err(FlashError::IllegalTransition { state, event }),
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ElementSnapshot {
    pub id: usize,
    pub lun: Option<u32>,
    pub wear: u64,
    pub avail: u8,
    pub programmed_pages: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct FlashState {
    pub geom: DeviceGeometry,
    pub strategy: StrategyConfig,
    pub elements: Vec<StorageElement>,
    /// FIFO of allocatable elements for the lazy baseline: least recently
    /// freed at the front.
    pub free_fifo: std::collections::VecDeque<usize>,
    /// One count per element erase (not per member block).
    pub erase_events: u64,
}

impl FlashState {
    pub fn new(geom: &DeviceGeometry, strategy: StrategyConfig) -> Self {
        let luns = geom.luns_total();
        let per_lun = geom.blocks_per_lun;
        let e = geom.blocks_per_lun_per_zone();
        let mut elements = Vec::new();
        match strategy.kind {
            StrategyKind::Chunk => {
                let cs = strategy.chunk_size;
                for lun in 0..luns {
                    for c in 0..per_lun / cs {
                        let blocks = (0..cs)
                            .map(|k| BlockRef {
                                lun,
                                index: c * cs + k,
                            })
                            .collect::<Vec<_>>();
                        elements.push(Self::fresh(elements.len(), Some(lun), blocks));
                    }
                }
            }
            StrategyKind::Stripe => {
                for j in 0..per_lun {
                    let blocks = (0..luns).map(|lun| BlockRef { lun, index: j }).collect();
                    elements.push(Self::fresh(elements.len(), None, blocks));
                }
            }
            StrategyKind::Direct | StrategyKind::Lazy => {
                for z in 0..per_lun / e {
                    let mut blocks = Vec::with_capacity((luns * e) as usize);
                    for lun in 0..luns {
                        for k in 0..e {
                            blocks.push(BlockRef {
                                lun,
                                index: z * e + k,
                            });
                        }
                    }
                    elements.push(Self::fresh(elements.len(), None, blocks));
                }
            }
        }
        let free_fifo = (0..elements.len()).collect();
        FlashState {
            geom: geom.clone(),
            strategy,
            elements,
            free_fifo,
            erase_events: 0,
        }
    }

    fn fresh(id: usize, lun: Option<u32>, blocks: Vec<BlockRef>) -> StorageElement {
        let n = blocks.len();
        StorageElement {
            id,
            lun,
            blocks,
            wear: 0,
            avail: Avail::Free,
            programmed: vec![0; n],
        }
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Allocate one element to a zone. An invalid element is physically
    /// erased first; the erase receipts are charged to the caller.
    pub fn allocate_element(&mut self, id: usize) -> Result<Vec<Receipt>, FlashError> {
        let t_erase = self.geom.t_erase;
        let elem = &mut self.elements[id];
        let receipts = if elem.avail == Avail::FreeInvalid {
            self.erase_events += 1;
            elem.blocks
                .iter()
                .map(|b| Receipt {
                    lun: b.lun,
                    duration: t_erase,
                    kind: ReceiptKind::Erase,
                })
                .collect()
        } else {
            Vec::new()
        };
        element_transition(elem, ElementEvent::Allocate)?;
        self.free_fifo.retain(|&x| x != id);
        Ok(receipts)
    }

    /// Program one page. Pages within a block are forced sequential; the
    /// element flips to `AllocatedValid` on its first page.
    pub fn program_page(
        &mut self,
        id: usize,
        block_in_elem: usize,
        page_index: u32,
    ) -> Result<Receipt, FlashError> {
        let duration = self.geom.t_prog + self.geom.channel_xfer;
        let pages_per_block = self.geom.pages_per_block;
        let elem = &mut self.elements[id];
        match elem.avail {
            Avail::AllocatedEmpty | Avail::AllocatedValid => {}
            state => return Err(FlashError::ProgramOnUnallocated { state }),
        }
        let programmed = elem.programmed[block_in_elem];
        if programmed >= pages_per_block {
            return Err(FlashError::BlockFull);
        }
        if page_index != programmed {
            return Err(FlashError::ProgramOrderViolation {
                programmed,
                requested: page_index,
            });
        }
        if elem.avail == Avail::AllocatedEmpty {
            element_transition(elem, ElementEvent::FirstProgram)?;
        }
        let elem = &mut self.elements[id];
        elem.programmed[block_in_elem] += 1;
        Ok(Receipt {
            lun: elem.blocks[block_in_elem].lun,
            duration,
            kind: ReceiptKind::Program,
        })
    }

    /// Standalone erase of an invalid element (baseline reclamation path).
    pub fn erase_element(&mut self, id: usize) -> Result<Vec<Receipt>, FlashError> {
        let t_erase = self.geom.t_erase;
        let elem = &mut self.elements[id];
        match elem.avail {
            Avail::AllocatedValid => return Err(FlashError::EraseValidData),
            Avail::FreeInvalid => {}
            state => {
                return Err(FlashError::IllegalTransition {
                    state,
                    event: ElementEvent::EraseComplete,
                })
            }
        }
        let receipts = elem
            .blocks
            .iter()
            .map(|b| Receipt {
                lun: b.lun,
                duration: t_erase,
                kind: ReceiptKind::Erase,
            })
            .collect();
        element_transition(elem, ElementEvent::EraseComplete)?;
        self.erase_events += 1;
        self.release_to_fifo(id);
        Ok(receipts)
    }

    /// Release an element back to the pool (a = 1 -> 0 at finish/reset, or
    /// a = 2 -> 3 at reset) and queue it for lazy reuse.
    pub fn release_element(&mut self, id: usize, event: ElementEvent) -> Result<(), FlashError> {
        element_transition(&mut self.elements[id], event)?;
        self.release_to_fifo(id);
        Ok(())
    }

    fn release_to_fifo(&mut self, id: usize) {
        if !self.free_fifo.contains(&id) {
            self.free_fifo.push_back(id);
        }
    }

    /// Availability census: (free, allocated-empty, allocated-valid, invalid).
    pub fn avail_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for e in &self.elements {
            counts[e.avail as usize] += 1;
        }
        counts
    }

    pub fn total_wear(&self) -> u64 {
        self.elements.iter().map(|e| e.wear).sum()
    }

    /// Per-block erase counts; all blocks of an element share its wear.
    pub fn block_wear(&self) -> Vec<u64> {
        let mut wear = vec![0u64; self.geom.total_blocks() as usize];
        for e in &self.elements {
            for b in &e.blocks {
                wear[b.global(&self.geom) as usize] = e.wear;
            }
        }
        wear
    }

    pub fn snapshot(&self) -> Vec<ElementSnapshot> {
        self.elements
            .iter()
            .map(|e| ElementSnapshot {
                id: e.id,
                lun: e.lun,
                wear: e.wear,
                avail: e.avail as u8,
                programmed_pages: e.programmed.clone(),
            })
            .collect()
    }
}
