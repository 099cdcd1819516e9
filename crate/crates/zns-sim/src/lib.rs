//! Deterministic discrete-event simulator of a ZNS SSD with
//! element-granular zone allocation (chunks, stripes) and fixed
//! physical-zone baselines (direct, lazy).

pub mod alloc;
pub mod config;
pub mod engine;
pub mod flash;
pub mod metrics;
pub mod trace;
pub mod verify;
pub mod workload;
pub mod zone;
