//! Run metrics: device-level write amplification, space amplification,
//! wear statistics and interference factors.

use std::collections::BTreeMap;

use serde::Serialize;

/// Device-level write amplification: (host + dummy) / host. A run with no
/// host writes amplifies nothing.
pub fn dlwa(host_pages: u64, dummy_pages: u64) -> f64 {
    if host_pages == 0 {
        1.0
    } else {
        (host_pages + dummy_pages) as f64 / host_pages as f64
    }
}

/// Time-weighted average of a right-continuous step series: `series[i].1`
/// holds from `series[i].0` until the next sample (or `end`). Samples at or
/// after `end` contribute nothing.
pub fn time_weighted_average(series: &[(u64, f64)], end: u64) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let start = series[0].0;
    if end <= start {
        return series[0].1;
    }
    let mut acc = 0.0;
    for (i, &(t, v)) in series.iter().enumerate() {
        if t >= end {
            break;
        }
        let next = series.get(i + 1).map_or(end, |&(t2, _)| t2.min(end));
        acc += v * (next.saturating_sub(t)) as f64;
    }
    acc / (end - start) as f64
}

/// Throughput degradation under contention: >1 means the contended run is
/// slower.
pub fn interference_factor(base_throughput: f64, contended_throughput: f64) -> f64 {
    base_throughput / contended_throughput
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WearStats {
    pub min: u64,
    pub max: u64,
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
}

/// Population statistics over per-block erase counts.
pub fn wear_stats(wear: &[u64]) -> WearStats {
    assert!(!wear.is_empty(), "wear stats need at least one block");
    let n = wear.len() as f64;
    let mean = wear.iter().sum::<u64>() as f64 / n;
    let var = wear
        .iter()
        .map(|&w| {
            let d = w as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let mut sorted = wear.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
    } else {
        sorted[mid] as f64
    };
    WearStats {
        min: sorted[0],
        max: *sorted.last().unwrap(),
        mean,
        median,
        stddev: var.sqrt(),
    }
}

/// Erase-count histogram: wear value -> number of blocks.
pub fn wear_histogram(wear: &[u64]) -> BTreeMap<u64, usize> {
    let mut hist = BTreeMap::new();
    for &w in wear {
        *hist.entry(w).or_insert(0) += 1;
    }
    hist
}

/// Accumulates page counts and the invalidated-capacity series over a run.
/// The series clock is whatever the workload samples with — host-op index
/// for strategy-independent space amplification.
#[derive(Debug, Clone, Default)]
pub struct MetricsLedger {
    pub host_pages: u64,
    pub dummy_pages: u64,
    pub read_pages: u64,
    /// Currently invalidated-but-unreclaimed bytes (W_i).
    pub invalid_bytes: u64,
    invalid_series: Vec<(u64, f64)>,
    pub page_size: u64,
    pub capacity_bytes: u64,
}

impl MetricsLedger {
    pub fn new(page_size: u64, capacity_bytes: u64) -> Self {
        MetricsLedger {
            page_size,
            capacity_bytes,
            ..Default::default()
        }
    }

    pub fn record_host_write(&mut self, pages: u64) {
        self.host_pages += pages;
    }

    pub fn record_dummy_write(&mut self, pages: u64) {
        self.dummy_pages += pages;
    }

    pub fn record_read(&mut self, pages: u64) {
        self.read_pages += pages;
    }

    /// Data became stale but still occupies flash.
    pub fn invalidate(&mut self, bytes: u64) {
        self.invalid_bytes += bytes;
    }

    /// A zone reset returned invalidated bytes to the pool.
    pub fn reclaim(&mut self, bytes: u64) {
        self.invalid_bytes = self.invalid_bytes.saturating_sub(bytes);
    }

    /// Record the current invalidated size at clock `t`.
    pub fn sample(&mut self, t: u64) {
        self.invalid_series.push((t, self.invalid_bytes as f64));
    }

    pub fn dlwa(&self) -> f64 {
        dlwa(self.host_pages, self.dummy_pages)
    }

    /// Average invalidated bytes over the sampled window.
    pub fn space_amp_bytes(&self, end: u64) -> f64 {
        time_weighted_average(&self.invalid_series, end)
    }

    /// Same, normalized by device capacity.
    pub fn space_amp_norm(&self, end: u64) -> f64 {
        self.space_amp_bytes(end) / self.capacity_bytes as f64
    }

    pub fn host_bytes(&self) -> u64 {
        self.host_pages * self.page_size
    }

    pub fn dummy_bytes(&self) -> u64 {
        self.dummy_pages * self.page_size
    }
}
