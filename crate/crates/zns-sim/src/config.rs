//! Device geometry, strategy parameters and config-file loading.
//!
//! Geometry is validated once and then immutable; everything else in the
//! simulator consumes the validated value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("invalid value for {field}: {reason}")]
    InvalidValue { field: String, reason: String },
    #[error("lun count {luns} does not divide blocks_per_zone {blocks_per_zone}")]
    DivisibilityViolation { luns: u32, blocks_per_zone: u32 },
    #[error("zones need {needed} blocks but the device only has {physical}")]
    CapacityViolation { needed: u64, physical: u64 },
    #[error("chunk size {chunk_size} does not divide per-lun zone blocks {per_lun}")]
    InvalidChunkSize { chunk_size: u32, per_lun: u32 },
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Validated device geometry. All counts are non-zero and the divisibility
/// and capacity requirements hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub channels: u32,
    pub luns_per_channel: u32,
    pub pages_per_block: u32,
    pub page_size: u64,
    pub blocks_per_zone: u32,
    pub zones_total: u32,
    pub max_open_zones: u32,
    /// Physical erase blocks per LUN. Defaults to exactly the blocks the
    /// logical zones need (no over-provisioning).
    pub blocks_per_lun: u32,
    /// Program latency, microseconds.
    pub t_prog: u64,
    /// Read latency, microseconds.
    pub t_read: u64,
    /// Erase latency, microseconds.
    pub t_erase: u64,
    /// Synthetic zone-allocation delay, microseconds. 0 unless a
    /// sensitivity run injects one.
    pub t_alloc: u64,
    /// Optional per-page channel transfer latency, microseconds.
    pub channel_xfer: u64,
}

impl DeviceGeometry {
    pub fn luns_total(&self) -> u32 {
        self.channels * self.luns_per_channel
    }

    /// Erase blocks each LUN contributes to one zone.
    pub fn blocks_per_lun_per_zone(&self) -> u32 {
        self.blocks_per_zone / self.luns_total()
    }

    pub fn zone_pages(&self) -> u64 {
        self.blocks_per_zone as u64 * self.pages_per_block as u64
    }

    pub fn total_blocks(&self) -> u64 {
        self.blocks_per_lun as u64 * self.luns_total() as u64
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.zones_total as u64 * self.zone_pages() * self.page_size
    }

    pub fn zone_bytes(&self) -> u64 {
        self.zone_pages() * self.page_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Direct,
    Lazy,
    Chunk,
    Stripe,
}

impl StrategyKind {
    pub fn is_full_zone(self) -> bool {
        matches!(self, StrategyKind::Direct | StrategyKind::Lazy)
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrategyKind::Direct => write!(f, "direct"),
            StrategyKind::Lazy => write!(f, "lazy"),
            StrategyKind::Chunk => write!(f, "chunk"),
            StrategyKind::Stripe => write!(f, "stripe"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Erase blocks per chunk; only meaningful for `kind = chunk`.
    pub chunk_size: u32,
    /// Fall back to device-wide lowest-wear selection when some LUN cannot
    /// supply its per-LUN share.
    pub parallelism_relaxed: bool,
}

impl StrategyConfig {
    pub fn chunk(chunk_size: u32) -> Self {
        StrategyConfig {
            kind: StrategyKind::Chunk,
            chunk_size,
            parallelism_relaxed: false,
        }
    }

    pub fn stripe() -> Self {
        StrategyConfig {
            kind: StrategyKind::Stripe,
            chunk_size: 1,
            parallelism_relaxed: false,
        }
    }

    pub fn direct() -> Self {
        StrategyConfig {
            kind: StrategyKind::Direct,
            chunk_size: 1,
            parallelism_relaxed: false,
        }
    }

    pub fn lazy() -> Self {
        StrategyConfig {
            kind: StrategyKind::Lazy,
            chunk_size: 1,
            parallelism_relaxed: false,
        }
    }

    /// Short label used in reports: direct, lazy, chunk-1, chunk-2, stripe...
    pub fn label(&self) -> String {
        match self.kind {
            StrategyKind::Chunk => format!("chunk-{}", self.chunk_size),
            k => k.to_string(),
        }
    }

    /// Parse a label like "chunk-11" or "stripe".
    pub fn from_label(s: &str) -> Result<Self, ConfigError> {
        match s {
            "direct" => Ok(Self::direct()),
            "lazy" => Ok(Self::lazy()),
            "stripe" => Ok(Self::stripe()),
            _ => {
                if let Some(cs) = s.strip_prefix("chunk-") {
                    let cs: u32 = cs.parse().map_err(|_| ConfigError::InvalidValue {
                        field: "strategy".into(),
                        reason: format!("bad chunk size in {s:?}"),
                    })?;
                    Ok(Self::chunk(cs))
                } else {
                    Err(ConfigError::InvalidValue {
                        field: "strategy".into(),
                        reason: format!("unknown strategy {s:?}"),
                    })
                }
            }
        }
    }

    /// Blocks in one lane of a striping group: `chunk_size` for chunks, 1
    /// for stripes, E for the full-zone baselines.
    pub fn lane_blocks(&self, geom: &DeviceGeometry) -> u32 {
        match self.kind {
            StrategyKind::Chunk => self.chunk_size,
            StrategyKind::Stripe => 1,
            StrategyKind::Direct | StrategyKind::Lazy => geom.blocks_per_lun_per_zone(),
        }
    }

    /// Blocks per storage element.
    pub fn element_blocks(&self, geom: &DeviceGeometry) -> u32 {
        match self.kind {
            StrategyKind::Chunk => self.chunk_size,
            StrategyKind::Stripe => geom.luns_total(),
            StrategyKind::Direct | StrategyKind::Lazy => geom.blocks_per_zone,
        }
    }

    /// Elements allocated per zone.
    pub fn elements_per_zone(&self, geom: &DeviceGeometry) -> u32 {
        match self.kind {
            StrategyKind::Chunk => geom.blocks_per_zone / self.chunk_size,
            StrategyKind::Stripe => geom.blocks_per_lun_per_zone(),
            StrategyKind::Direct | StrategyKind::Lazy => 1,
        }
    }
}

fn require<T>(v: Option<T>, field: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::MissingField(field.to_string()))
}

fn positive(v: u64, field: &str) -> Result<(), ConfigError> {
    if v == 0 {
        Err(ConfigError::InvalidValue {
            field: field.to_string(),
            reason: "must be positive".to_string(),
        })
    } else {
        Ok(())
    }
}

/// Raw `[device]` section as read from a config file; every field optional
/// so that missing fields can be reported by name.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct RawDevice {
    pub channels: Option<u32>,
    pub luns_per_channel: Option<u32>,
    pub pages_per_block: Option<u32>,
    pub page_size: Option<u64>,
    pub blocks_per_zone: Option<u32>,
    pub zones_total: Option<u32>,
    pub max_open_zones: Option<u32>,
    pub blocks_per_lun: Option<u32>,
    pub t_prog: Option<u64>,
    pub t_read: Option<u64>,
    pub t_erase: Option<u64>,
    pub t_alloc: Option<u64>,
    pub channel_xfer: Option<u64>,
}

pub fn validate_geometry(raw: &RawDevice) -> Result<DeviceGeometry, ConfigError> {
    let channels = require(raw.channels, "device.channels")?;
    let luns_per_channel = require(raw.luns_per_channel, "device.luns_per_channel")?;
    let pages_per_block = require(raw.pages_per_block, "device.pages_per_block")?;
    let page_size = require(raw.page_size, "device.page_size")?;
    let blocks_per_zone = require(raw.blocks_per_zone, "device.blocks_per_zone")?;
    let zones_total = require(raw.zones_total, "device.zones_total")?;
    let max_open_zones = require(raw.max_open_zones, "device.max_open_zones")?;

    positive(channels as u64, "device.channels")?;
    positive(luns_per_channel as u64, "device.luns_per_channel")?;
    positive(pages_per_block as u64, "device.pages_per_block")?;
    positive(page_size, "device.page_size")?;
    positive(blocks_per_zone as u64, "device.blocks_per_zone")?;
    positive(zones_total as u64, "device.zones_total")?;
    positive(max_open_zones as u64, "device.max_open_zones")?;

    let luns = channels * luns_per_channel;
    if blocks_per_zone % luns != 0 {
        return Err(ConfigError::DivisibilityViolation {
            luns,
            blocks_per_zone,
        });
    }
    if max_open_zones > zones_total {
        return Err(ConfigError::InvalidValue {
            field: "device.max_open_zones".to_string(),
            reason: format!("{max_open_zones} exceeds zones_total {zones_total}"),
        });
    }

    let per_lun_needed = zones_total * (blocks_per_zone / luns);
    let blocks_per_lun = raw.blocks_per_lun.unwrap_or(per_lun_needed);
    let needed = zones_total as u64 * blocks_per_zone as u64;
    let physical = blocks_per_lun as u64 * luns as u64;
    if needed > physical {
        return Err(ConfigError::CapacityViolation { needed, physical });
    }
    if blocks_per_lun % (blocks_per_zone / luns) != 0 {
        return Err(ConfigError::InvalidValue {
            field: "device.blocks_per_lun".to_string(),
            reason: "must be a whole number of per-lun zone shares".to_string(),
        });
    }

    let t_prog = raw.t_prog.unwrap_or(700);
    let t_read = raw.t_read.unwrap_or(60);
    let t_erase = raw.t_erase.unwrap_or(3500);
    positive(t_prog, "device.t_prog")?;
    positive(t_read, "device.t_read")?;
    positive(t_erase, "device.t_erase")?;

    Ok(DeviceGeometry {
        channels,
        luns_per_channel,
        pages_per_block,
        page_size,
        blocks_per_zone,
        zones_total,
        max_open_zones,
        blocks_per_lun,
        t_prog,
        t_read,
        t_erase,
        t_alloc: raw.t_alloc.unwrap_or(0),
        channel_xfer: raw.channel_xfer.unwrap_or(0),
    })
}

pub fn validate_strategy(
    cfg: StrategyConfig,
    geom: &DeviceGeometry,
) -> Result<StrategyConfig, ConfigError> {
    if cfg.kind == StrategyKind::Chunk {
        let per_lun = geom.blocks_per_lun_per_zone();
        if cfg.chunk_size == 0 || cfg.chunk_size > per_lun || per_lun % cfg.chunk_size != 0 {
            return Err(ConfigError::InvalidChunkSize {
                chunk_size: cfg.chunk_size,
                per_lun,
            });
        }
    }
    Ok(cfg)
}

/// The emulated ZN540 profile: 4 channels, 16 KiB pages, 768-page blocks,
/// 88 blocks per zone over 4 LUNs, 48 zones, 14 open.
pub fn zn540() -> DeviceGeometry {
    validate_geometry(&RawDevice {
        channels: Some(4),
        luns_per_channel: Some(1),
        pages_per_block: Some(768),
        page_size: Some(16 * 1024),
        blocks_per_zone: Some(88),
        zones_total: Some(48),
        max_open_zones: Some(14),
        ..RawDevice::default()
    })
    .expect("zn540 profile is valid")
}

/// Tiny hand-checkable profile: 4 LUNs, 4-page blocks, 8 blocks (32 pages)
/// per zone, 4 zones, 2 open.
pub fn g_small() -> DeviceGeometry {
    validate_geometry(&RawDevice {
        channels: Some(4),
        luns_per_channel: Some(1),
        pages_per_block: Some(4),
        page_size: Some(4096),
        blocks_per_zone: Some(8),
        zones_total: Some(4),
        max_open_zones: Some(2),
        ..RawDevice::default()
    })
    .expect("g_small profile is valid")
}

/// Desk-scale profile with the ZN540 zone layout (88 blocks, 22 per LUN)
/// but small blocks, for workload experiments that need many zone cycles.
pub fn desk() -> DeviceGeometry {
    validate_geometry(&RawDevice {
        channels: Some(4),
        luns_per_channel: Some(1),
        pages_per_block: Some(8),
        page_size: Some(4096),
        blocks_per_zone: Some(88),
        zones_total: Some(24),
        max_open_zones: Some(12),
        ..RawDevice::default()
    })
    .expect("desk profile is valid")
}

/// Full config document: `[device]`, `[strategy]` and `[workload]` sections.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct RawConfig {
    #[serde(default)]
    pub device: RawDevice,
    #[serde(default)]
    pub strategy: RawStrategy,
    #[serde(default)]
    pub workload: RawWorkload,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct RawStrategy {
    pub kind: Option<String>,
    pub chunk_size: Option<u32>,
    pub parallelism_relaxed: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct RawWorkload {
    pub name: Option<String>,
    pub jobs: Option<u32>,
    pub ops_per_job: Option<u64>,
    pub total_ops: Option<u64>,
    pub finish_threshold: Option<u32>,
    pub occupancy_pct: Option<f64>,
    pub seed: Option<u64>,
}

impl RawConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Apply a `--set section.key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (key, value) = kv.split_once('=').ok_or_else(|| ConfigError::InvalidValue {
            field: "--set".to_string(),
            reason: format!("expected key=value, got {kv:?}"),
        })?;
        let mut doc = toml::Value::try_from(&*self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        let (last, parents) = parts.split_last().expect("split_once guarantees a key");
        let not_a_table = || ConfigError::InvalidValue {
            field: key.to_string(),
            reason: "not a table".to_string(),
        };
        let mut node = &mut doc;
        for part in parents {
            node = node
                .as_table_mut()
                .ok_or_else(not_a_table)?
                .entry(part.to_string())
                .or_insert(toml::Value::Table(Default::default()));
        }
        let parsed: toml::Value = value
            .parse::<i64>()
            .map(toml::Value::Integer)
            .or_else(|_| value.parse::<f64>().map(toml::Value::Float))
            .or_else(|_| value.parse::<bool>().map(toml::Value::Boolean))
            .unwrap_or_else(|_| toml::Value::String(value.to_string()));
        node.as_table_mut()
            .ok_or_else(not_a_table)?
            .insert(last.to_string(), parsed);
        *self = doc
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<DeviceGeometry, ConfigError> {
        validate_geometry(&self.device)
    }

    pub fn strategy(&self, geom: &DeviceGeometry) -> Result<StrategyConfig, ConfigError> {
        let kind = self.strategy.kind.as_deref().unwrap_or("stripe");
        let mut cfg = if kind == "chunk" {
            StrategyConfig::chunk(self.strategy.chunk_size.unwrap_or(1))
        } else {
            StrategyConfig::from_label(kind)?
        };
        if let Some(cs) = self.strategy.chunk_size {
            if cfg.kind == StrategyKind::Chunk {
                cfg.chunk_size = cs;
            }
        }
        cfg.parallelism_relaxed = self.strategy.parallelism_relaxed.unwrap_or(false);
        validate_strategy(cfg, geom)
    }
}
