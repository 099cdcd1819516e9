//! Zone allocation: selects storage elements for a logical zone on its
//! first write, minimizing total wear subject to availability, cardinality
//! and parallelism constraints.
//!
//! The integer program decomposes exactly: per-LUN top-G by wear for
//! chunks, global top-Z by wear for stripes. The exhaustive oracle in
//! [`oracle`] guards that claim.

use thiserror::Error;

use crate::config::{StrategyConfig, StrategyKind};
use crate::flash::FlashState;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocError {
    #[error("not enough available elements (lun {lun:?}: need {needed}, have {available})")]
    InsufficientAvailability {
        lun: Option<u32>,
        needed: usize,
        available: usize,
    },
    #[error("direct-mapped physical zone for zone {zone} is busy")]
    DirectZoneBusy { zone: u32 },
    #[error("no free physical zone")]
    NoFreePhysicalZone,
    #[error("no feasible selection")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationResult {
    /// Selected elements in group order, `groups` flattened.
    pub element_ids: Vec<usize>,
    /// Group k holds the k-th selected chunk of each LUN in ascending LUN
    /// order (chunk mode), a single stripe, or the single full-zone element.
    pub groups: Vec<Vec<usize>>,
    /// Total wear of the selection.
    pub objective: u64,
}

pub struct AllocationRequest<'a> {
    pub zone_id: u32,
    pub strategy: StrategyConfig,
    pub state: &'a FlashState,
}

pub fn allocate(req: &AllocationRequest<'_>) -> Result<AllocationResult, AllocError> {
    match req.strategy.kind {
        StrategyKind::Chunk => allocate_chunks(req),
        StrategyKind::Stripe => allocate_stripes(req),
        StrategyKind::Direct | StrategyKind::Lazy => allocate_baseline(req),
    }
}

/// Available element ids sorted by (wear, id).
fn ranked_available(state: &FlashState, lun: Option<u32>) -> Vec<usize> {
    let mut ids: Vec<usize> = state
        .elements
        .iter()
        .filter(|e| e.avail.is_allocatable() && (lun.is_none() || e.lun == lun))
        .map(|e| e.id)
        .collect();
    ids.sort_by_key(|&id| (state.elements[id].wear, id));
    ids
}

fn result_from_groups(state: &FlashState, groups: Vec<Vec<usize>>) -> AllocationResult {
    let element_ids: Vec<usize> = groups.iter().flatten().copied().collect();
    let objective = element_ids.iter().map(|&id| state.elements[id].wear).sum();
    AllocationResult {
        element_ids,
        groups,
        objective,
    }
}

pub fn allocate_chunks(req: &AllocationRequest<'_>) -> Result<AllocationResult, AllocError> {
    let state = req.state;
    let geom = &state.geom;
    let luns = geom.luns_total();
    let z = req.strategy.elements_per_zone(geom) as usize;
    let g = z / luns as usize;

    let mut per_lun: Vec<Vec<usize>> = Vec::with_capacity(luns as usize);
    for lun in 0..luns {
        let ranked = ranked_available(state, Some(lun));
        if ranked.len() < g {
            if req.strategy.parallelism_relaxed {
                return allocate_relaxed(req, z);
            }
            return Err(AllocError::InsufficientAvailability {
                lun: Some(lun),
                needed: g,
                available: ranked.len(),
            });
        }
        per_lun.push(ranked[..g].to_vec());
    }
    // group k pairs the k-th selected chunk of each LUN
    let groups = (0..g)
        .map(|k| per_lun.iter().map(|sel| sel[k]).collect())
        .collect();
    Ok(result_from_groups(state, groups))
}

/// Relaxed-parallelism fallback: device-wide lowest wear, per-LUN counts
/// unconstrained. Groups are consecutive runs of L selections.
fn allocate_relaxed(req: &AllocationRequest<'_>, z: usize) -> Result<AllocationResult, AllocError> {
    let state = req.state;
    let ranked = ranked_available(state, None);
    if ranked.len() < z {
        return Err(AllocError::InsufficientAvailability {
            lun: None,
            needed: z,
            available: ranked.len(),
        });
    }
    let luns = state.geom.luns_total() as usize;
    let groups = ranked[..z].chunks(luns).map(|c| c.to_vec()).collect();
    Ok(result_from_groups(state, groups))
}

pub fn allocate_stripes(req: &AllocationRequest<'_>) -> Result<AllocationResult, AllocError> {
    let state = req.state;
    let z = req.strategy.elements_per_zone(&state.geom) as usize;
    let ranked = ranked_available(state, None);
    if ranked.len() < z {
        return Err(AllocError::InsufficientAvailability {
            lun: None,
            needed: z,
            available: ranked.len(),
        });
    }
    let groups = ranked[..z].iter().map(|&id| vec![id]).collect();
    Ok(result_from_groups(state, groups))
}

pub fn allocate_baseline(req: &AllocationRequest<'_>) -> Result<AllocationResult, AllocError> {
    let state = req.state;
    match req.strategy.kind {
        StrategyKind::Direct => {
            let id = req.zone_id as usize;
            if !state.elements[id].avail.is_allocatable() {
                return Err(AllocError::DirectZoneBusy { zone: req.zone_id });
            }
            Ok(result_from_groups(state, vec![vec![id]]))
        }
        StrategyKind::Lazy => {
            // least recently freed, wear ignored
            let id = *state.free_fifo.front().ok_or(AllocError::NoFreePhysicalZone)?;
            debug_assert!(state.elements[id].avail.is_allocatable());
            Ok(result_from_groups(state, vec![vec![id]]))
        }
        _ => unreachable!("not a baseline strategy"),
    }
}

/// Exhaustive verification oracle for small instances.
pub mod oracle {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum OracleMode {
        /// Exactly G selections per LUN.
        ChunkStrict,
        /// Z selections, per-LUN counts unconstrained.
        Relaxed,
        /// Z selections over LUN-spanning elements.
        Stripe,
    }

    /// Enumerates every selection satisfying the active constraint set and
    /// returns the minimal total wear. `None` means infeasible.
    pub fn oracle_solve(state: &FlashState, mode: OracleMode, z: usize) -> Option<u64> {
        let n = state.elements.len();
        assert!(n <= 20, "oracle is exhaustive; keep instances small");
        let luns = state.geom.luns_total() as usize;
        let g = z / luns;
        let mut best: Option<u64> = None;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != z {
                continue;
            }
            let mut ok = true;
            let mut per_lun = vec![0usize; luns];
            let mut wear = 0u64;
            for id in 0..n {
                if mask & (1 << id) == 0 {
                    continue;
                }
                let e = &state.elements[id];
                if !e.avail.is_allocatable() {
                    ok = false;
                    break;
                }
                if let Some(l) = e.lun {
                    per_lun[l as usize] += 1;
                }
                wear += e.wear;
            }
            if ok && mode == OracleMode::ChunkStrict {
                ok = per_lun.iter().all(|&c| c == g);
            }
            if ok && best.map_or(true, |b| wear < b) {
                best = Some(wear);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::{oracle_solve, OracleMode};
    use super::*;
    use crate::config::{validate_geometry, RawDevice};
    use crate::flash::Avail;

    /// Tiny geometry with a configurable LUN count and blocks per LUN.
    fn toy_geometry(luns: u32, blocks_per_lun: u32, blocks_per_zone: u32) -> crate::config::DeviceGeometry {
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
        .unwrap()
    }

    fn set_wears(state: &mut FlashState, wears: &[u64]) {
        for (e, &w) in state.elements.iter_mut().zip(wears) {
            e.wear = w;
        }
    }

    #[test]
    fn chunk_per_lun_lowest_wear_with_tie_break() {
        // L=2, 3 chunks per LUN, G=1
        let geom = toy_geometry(2, 3, 2);
        let mut state = FlashState::new(&geom, StrategyConfig::chunk(1));
        set_wears(&mut state, &[2, 0, 1, 1, 1, 3]);
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::chunk(1),
            state: &state,
        };
        let res = allocate_chunks(&req).unwrap();
        assert_eq!(res.element_ids, vec![1, 3]); // wear 0, then tie -> lowest id
        assert_eq!(res.objective, 1);
        assert_eq!(
            res.objective,
            oracle_solve(&state, OracleMode::ChunkStrict, 2).unwrap()
        );
    }

    #[test]
    fn chunk_all_equal_wear_takes_lowest_ids() {
        // L=4, 2 chunks per LUN per zone, zone of 8 blocks
        let geom = toy_geometry(4, 2, 8);
        let state = FlashState::new(&geom, StrategyConfig::chunk(1));
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::chunk(1),
            state: &state,
        };
        let res = allocate_chunks(&req).unwrap();
        // chunks are numbered lun-major: LUN0 = {0,1}, LUN1 = {2,3}, ...
        assert_eq!(res.groups[0], vec![0, 2, 4, 6]);
        assert_eq!(res.groups[1], vec![1, 3, 5, 7]);
    }

    #[test]
    fn chunk_insufficient_lun_strict_errors() {
        let geom = toy_geometry(2, 2, 4); // G = 2 per LUN
        let mut state = FlashState::new(&geom, StrategyConfig::chunk(1));
        state.elements[0].avail = Avail::AllocatedValid;
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::chunk(1),
            state: &state,
        };
        assert_eq!(
            allocate_chunks(&req),
            Err(AllocError::InsufficientAvailability {
                lun: Some(0),
                needed: 2,
                available: 1
            })
        );
        // relaxed mode cannot help either: only 3 elements left for Z=4
        let mut strat = StrategyConfig::chunk(1);
        strat.parallelism_relaxed = true;
        let req = AllocationRequest {
            zone_id: 0,
            strategy: strat,
            state: &state,
        };
        assert!(matches!(
            allocate_chunks(&req),
            Err(AllocError::InsufficientAvailability { lun: None, .. })
        ));
    }

    #[test]
    fn relaxed_falls_back_to_global_top_z() {
        let geom = toy_geometry(2, 4, 4); // G = 2, 4 chunks per LUN
        let mut state = FlashState::new(&geom, StrategyConfig::chunk(1));
        // LUN0 chunks 0..4, LUN1 chunks 4..8; LUN0 has only one available
        for id in 1..4 {
            state.elements[id].avail = Avail::AllocatedValid;
        }
        set_wears(&mut state, &[5, 0, 0, 0, 1, 2, 3, 4]);
        let mut strat = StrategyConfig::chunk(1);
        strat.parallelism_relaxed = true;
        let req = AllocationRequest {
            zone_id: 0,
            strategy: strat,
            state: &state,
        };
        let res = allocate_chunks(&req).unwrap();
        // global lowest wear among available: 4 (w1), 5 (w2), 6 (w3), 7 (w4)
        assert_eq!(res.element_ids, vec![4, 5, 6, 7]);
        assert_eq!(res.objective, 10);
        assert_eq!(res.objective, oracle_solve(&state, OracleMode::Relaxed, 4).unwrap());
    }

    #[test]
    fn stripe_lowest_wear_selection() {
        let geom = toy_geometry(4, 8, 8); // 8 stripes, Z = 2
        let mut state = FlashState::new(&geom, StrategyConfig::stripe());
        set_wears(&mut state, &[3, 1, 2, 0, 5, 1, 2, 0]);
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::stripe(),
            state: &state,
        };
        let res = allocate_stripes(&req).unwrap();
        assert_eq!(res.element_ids, vec![3, 7]); // the two wear-0 stripes
        assert_eq!(res.objective, 0);
        assert_eq!(res.objective, oracle_solve(&state, OracleMode::Stripe, 2).unwrap());
    }

    #[test]
    fn stripe_availability_filter() {
        let geom = toy_geometry(4, 8, 8);
        let mut state = FlashState::new(&geom, StrategyConfig::stripe());
        for id in 1..7 {
            state.elements[id].avail = Avail::AllocatedValid;
        }
        set_wears(&mut state, &[9, 0, 0, 0, 0, 0, 0, 9]);
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::stripe(),
            state: &state,
        };
        let res = allocate_stripes(&req).unwrap();
        assert_eq!(res.element_ids, vec![0, 7]);
    }

    #[test]
    fn stripe_insufficient() {
        let geom = toy_geometry(4, 8, 8);
        let mut state = FlashState::new(&geom, StrategyConfig::stripe());
        for id in 0..7 {
            state.elements[id].avail = Avail::AllocatedValid;
        }
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::stripe(),
            state: &state,
        };
        assert!(matches!(
            allocate_stripes(&req),
            Err(AllocError::InsufficientAvailability {
                needed: 2,
                available: 1,
                ..
            })
        ));
    }

    #[test]
    fn direct_identity_mapping() {
        let geom = crate::config::g_small();
        let mut state = FlashState::new(&geom, StrategyConfig::direct());
        let req = AllocationRequest {
            zone_id: 3,
            strategy: StrategyConfig::direct(),
            state: &state,
        };
        assert_eq!(allocate_baseline(&req).unwrap().element_ids, vec![3]);
        state.elements[3].avail = Avail::AllocatedValid;
        let req = AllocationRequest {
            zone_id: 3,
            strategy: StrategyConfig::direct(),
            state: &state,
        };
        assert_eq!(
            allocate_baseline(&req),
            Err(AllocError::DirectZoneBusy { zone: 3 })
        );
    }

    #[test]
    fn lazy_fifo_order() {
        let geom = crate::config::g_small();
        let mut state = FlashState::new(&geom, StrategyConfig::lazy());
        // consume all four, then free 3 and 1 in that order
        for id in 0..4 {
            state.allocate_element(id).unwrap();
        }
        state
            .release_element(3, crate::flash::ElementEvent::ResetRelease)
            .unwrap();
        state
            .release_element(1, crate::flash::ElementEvent::ResetRelease)
            .unwrap();
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::lazy(),
            state: &state,
        };
        assert_eq!(allocate_baseline(&req).unwrap().element_ids, vec![3]);
    }

    #[test]
    fn lazy_exhausted() {
        let geom = crate::config::g_small();
        let mut state = FlashState::new(&geom, StrategyConfig::lazy());
        for id in 0..4 {
            state.allocate_element(id).unwrap();
        }
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::lazy(),
            state: &state,
        };
        assert_eq!(allocate_baseline(&req), Err(AllocError::NoFreePhysicalZone));
    }

    #[test]
    fn oracle_single_lun_pairs() {
        // one LUN, G=2; the high-wear tail never wins
        let geom = toy_geometry(1, 6, 2);
        let mut state = FlashState::new(&geom, StrategyConfig::chunk(1));
        set_wears(&mut state, &[4, 1, 3, 1, 9, 9]);
        assert_eq!(oracle_solve(&state, OracleMode::ChunkStrict, 2), Some(2));
        let req = AllocationRequest {
            zone_id: 0,
            strategy: StrategyConfig::chunk(1),
            state: &state,
        };
        assert_eq!(allocate_chunks(&req).unwrap().objective, 2);
    }

    #[test]
    fn oracle_infeasible_matches_greedy() {
        let geom = toy_geometry(4, 8, 8);
        let mut state = FlashState::new(&geom, StrategyConfig::stripe());
        for id in 0..7 {
            state.elements[id].avail = Avail::AllocatedValid;
        }
        assert_eq!(oracle_solve(&state, OracleMode::Stripe, 2), None);
    }
}
