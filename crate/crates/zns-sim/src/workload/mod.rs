//! Workload generators: sequential zone fills, the finish-interference
//! bench, and a ZenFS-style flush/compaction host model.

pub mod fio;
pub mod interference;
pub mod zenfs;
