//! Hardware description: processing units, memories, associations and links.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlatformError {
    #[error("virtual memories have no finite rate")]
    VirtualRate,
    #[error("unknown preset {0:?} (expected CG, CGF or CGFF)")]
    UnknownPreset(String),
    #[error("unknown unit {0:?}")]
    UnknownUnit(String),
    #[error("duplicate unit name {0:?}")]
    DuplicateName(String),
    #[error("processing unit {0:?} has no associated memory")]
    NoAssociatedMemory(String),
    #[error("link {0:?}-{1:?} must connect two distinct memories")]
    BadLink(String, String),
    #[error("invalid parameter on {unit:?}: {reason}")]
    BadParameter { unit: String, reason: String },
    #[error("malformed platform JSON: {0}")]
    Json(String),
}

/// Index into the unified unit list: processing units first, then memories.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(transparent)]
pub struct UnitId(pub usize);

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum RateSpec {
    Explicit { bytes_per_s: f64 },
    Bus { clock_hz: f64, width_bytes: f64, channels: f64 },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct MemoryUnit {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSpec>,
    /// Set for virtual memories: the processing unit that accesses it for free.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virtual_owner: Option<String>,
}

impl MemoryUnit {
    pub fn is_virtual(&self) -> bool {
        self.virtual_owner.is_some()
    }
}

fn default_penalty() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ProcUnit {
    pub name: String,
    pub clock_hz: f64,
    #[serde(default = "default_penalty")]
    pub overhead_penalty: f64,
    pub cores: f64,
    pub data_parallelism: f64,
    #[serde(default)]
    pub dataflow: bool,
    #[serde(default)]
    pub area_capacity: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Link {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit: Option<f64>,
}

/// Bytes per second a non-virtual memory can move.
pub fn memory_rate(mem: &MemoryUnit) -> Result<f64, PlatformError> {
    if mem.is_virtual() {
        return Err(PlatformError::VirtualRate);
    }
    match mem.rate {
        Some(RateSpec::Explicit { bytes_per_s }) => Ok(bytes_per_s),
        Some(RateSpec::Bus { clock_hz, width_bytes, channels }) => Ok(clock_hz * width_bytes * channels),
        None => Err(PlatformError::BadParameter {
            unit: mem.name.clone(),
            reason: "physical memory without a rate".into(),
        }),
    }
}

/// Serial rate (ops/s) and parallelization factor of a processing unit.
pub fn proc_rates(dev: &ProcUnit) -> (f64, f64) {
    (dev.clock_hz * dev.overhead_penalty, dev.cores * dev.data_parallelism)
}

#[derive(Serialize, Deserialize)]
struct RawPlatform {
    proc_units: Vec<ProcUnit>,
    memories: Vec<MemoryUnit>,
    assoc: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    links: Vec<Link>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(try_from = "RawPlatform", into = "RawPlatform")]
pub struct Platform {
    procs: Vec<ProcUnit>,
    memories: Vec<MemoryUnit>,
    assoc: BTreeMap<String, BTreeSet<String>>,
    links: Vec<Link>,
    // derived
    names: Vec<String>,
    assoc_ids: Vec<Vec<UnitId>>,
    mem_rates: Vec<f64>,
    /// `link_limit[a * m + b]`: None = no link, Some(inf) = unlimited link.
    link_limit: Vec<Option<f64>>,
    owner_of: Vec<Option<UnitId>>,
}

impl TryFrom<RawPlatform> for Platform {
    type Error = PlatformError;
    fn try_from(raw: RawPlatform) -> Result<Self, PlatformError> {
        Platform::new(raw.proc_units, raw.memories, raw.assoc, raw.links)
    }
}

impl From<Platform> for RawPlatform {
    fn from(p: Platform) -> Self {
        RawPlatform { proc_units: p.procs, memories: p.memories, assoc: p.assoc, links: p.links }
    }
}

fn positive(unit: &str, what: &str, v: f64) -> Result<(), PlatformError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(PlatformError::BadParameter { unit: unit.into(), reason: format!("{what} must be positive, got {v}") })
    }
}

impl Platform {
    pub fn new(
        procs: Vec<ProcUnit>,
        memories: Vec<MemoryUnit>,
        assoc: BTreeMap<String, BTreeSet<String>>,
        links: Vec<Link>,
    ) -> Result<Self, PlatformError> {
        let mut names = Vec::new();
        let mut index = BTreeMap::new();
        for name in procs.iter().map(|p| &p.name).chain(memories.iter().map(|m| &m.name)) {
            if index.insert(name.clone(), names.len()).is_some() {
                return Err(PlatformError::DuplicateName(name.clone()));
            }
            names.push(name.clone());
        }
        let np = procs.len();
        let nm = memories.len();
        let mem_index = |name: &str| -> Result<usize, PlatformError> {
            match index.get(name) {
                Some(&k) if k >= np => Ok(k - np),
                _ => Err(PlatformError::UnknownUnit(name.to_string())),
            }
        };

        for p in &procs {
            positive(&p.name, "clock_hz", p.clock_hz)?;
            positive(&p.name, "cores", p.cores)?;
            positive(&p.name, "data_parallelism", p.data_parallelism)?;
            if !(p.overhead_penalty > 0.0 && p.overhead_penalty <= 1.0) {
                return Err(PlatformError::BadParameter {
                    unit: p.name.clone(),
                    reason: format!("overhead_penalty {} outside (0,1]", p.overhead_penalty),
                });
            }
            if p.cores * p.data_parallelism < 1.0 {
                return Err(PlatformError::BadParameter {
                    unit: p.name.clone(),
                    reason: "parallelization factor below 1".into(),
                });
            }
            if !p.area_capacity.is_finite() || p.area_capacity < 0.0 {
                return Err(PlatformError::BadParameter {
                    unit: p.name.clone(),
                    reason: "area_capacity must be finite and >= 0".into(),
                });
            }
        }

        let mut mem_rates = Vec::with_capacity(nm);
        let mut owner_of = Vec::with_capacity(nm);
        for m in &memories {
            match &m.virtual_owner {
                Some(owner) => {
                    let k = procs
                        .iter()
                        .position(|p| &p.name == owner)
                        .ok_or_else(|| PlatformError::UnknownUnit(owner.clone()))?;
                    owner_of.push(Some(UnitId(k)));
                    mem_rates.push(f64::INFINITY);
                }
                None => {
                    let r = memory_rate(m)?;
                    positive(&m.name, "memory rate", r)?;
                    owner_of.push(None);
                    mem_rates.push(r);
                }
            }
        }

        for key in assoc.keys() {
            if !procs.iter().any(|p| &p.name == key) {
                return Err(PlatformError::UnknownUnit(key.clone()));
            }
        }
        let mut assoc_ids = Vec::with_capacity(np);
        for p in &procs {
            let set = assoc.get(&p.name).filter(|s| !s.is_empty());
            let set = set.ok_or_else(|| PlatformError::NoAssociatedMemory(p.name.clone()))?;
            let mut ids = Vec::new();
            for m in set {
                ids.push(UnitId(np + mem_index(m)?));
            }
            ids.sort();
            assoc_ids.push(ids);
        }

        let mut link_limit = vec![None; nm * nm];
        for link in &links {
            let (a, b) = (mem_index(&link.a), mem_index(&link.b));
            let (a, b) = match (a, b) {
                (Ok(a), Ok(b)) if a != b => (a, b),
                _ => return Err(PlatformError::BadLink(link.a.clone(), link.b.clone())),
            };
            let limit = match link.rate_limit {
                Some(r) => {
                    positive(&link.a, "link rate_limit", r)?;
                    r
                }
                None => f64::INFINITY,
            };
            link_limit[a * nm + b] = Some(limit);
            link_limit[b * nm + a] = Some(limit);
        }

        Ok(Platform { procs, memories, assoc, links, names, assoc_ids, mem_rates, link_limit, owner_of })
    }

    pub fn from_json(text: &str) -> Result<Self, PlatformError> {
        serde_json::from_str(text).map_err(|e| PlatformError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("platform serialization is infallible")
    }

    pub fn procs(&self) -> &[ProcUnit] {
        &self.procs
    }

    pub fn memories(&self) -> &[MemoryUnit] {
        &self.memories
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn unit_count(&self) -> usize {
        self.names.len()
    }

    pub fn units(&self) -> impl Iterator<Item = UnitId> {
        (0..self.names.len()).map(UnitId)
    }

    pub fn unit_name(&self, u: UnitId) -> &str {
        &self.names[u.0]
    }

    pub fn unit_names(&self) -> &[String] {
        &self.names
    }

    pub fn unit_by_name(&self, name: &str) -> Option<UnitId> {
        self.names.iter().position(|n| n == name).map(UnitId)
    }

    pub fn is_memory(&self, u: UnitId) -> bool {
        u.0 >= self.procs.len() && u.0 < self.names.len()
    }

    pub fn proc(&self, u: UnitId) -> Option<&ProcUnit> {
        self.procs.get(u.0)
    }

    pub fn memory(&self, u: UnitId) -> Option<&MemoryUnit> {
        u.0.checked_sub(self.procs.len()).and_then(|k| self.memories.get(k))
    }

    pub fn proc_ids(&self) -> impl Iterator<Item = UnitId> {
        (0..self.procs.len()).map(UnitId)
    }

    pub fn memory_ids(&self) -> impl Iterator<Item = UnitId> {
        (self.procs.len()..self.names.len()).map(UnitId)
    }

    pub fn is_dataflow(&self, u: UnitId) -> bool {
        self.proc(u).is_some_and(|p| p.dataflow)
    }

    pub fn area_capacity(&self, u: UnitId) -> f64 {
        self.proc(u).map_or(0.0, |p| p.area_capacity)
    }

    /// Memories a processing unit reads and writes directly.
    pub fn associated(&self, proc: UnitId) -> &[UnitId] {
        self.assoc_ids.get(proc.0).map_or(&[], |v| v.as_slice())
    }

    /// Rate of a memory unit; infinite for virtual memories.
    pub fn rate(&self, mem: UnitId) -> f64 {
        self.mem_rates[mem.0 - self.procs.len()]
    }

    pub fn virtual_owner(&self, mem: UnitId) -> Option<UnitId> {
        mem.0.checked_sub(self.procs.len()).and_then(|k| self.owner_of.get(k).copied().flatten())
    }

    /// `None` when the memories are not linked, otherwise the link limit
    /// (infinite when unlimited).
    pub fn link_limit(&self, a: UnitId, b: UnitId) -> Option<f64> {
        let np = self.procs.len();
        let nm = self.memories.len();
        self.link_limit[(a.0 - np) * nm + (b.0 - np)]
    }

    /// The reference processing unit (first listed) and its first memory.
    pub fn host(&self) -> (UnitId, UnitId) {
        let cpu = UnitId(0);
        (cpu, self.associated(cpu)[0])
    }

    /// All memories and processing units sharing a dataflow unit's domain:
    /// the unit itself plus its associated memories.
    pub fn dataflow_domains(&self) -> Vec<Vec<UnitId>> {
        self.proc_ids()
            .filter(|&u| self.is_dataflow(u))
            .map(|u| {
                let mut d = vec![u];
                d.extend_from_slice(self.associated(u));
                d
            })
            .collect()
    }

    /// Restriction to the named units; assoc entries and links touching
    /// removed units are dropped.
    pub fn restrict(&self, keep: &[&str]) -> Result<Platform, PlatformError> {
        let keep: BTreeSet<&str> = keep.iter().copied().collect();
        let procs = self.procs.iter().filter(|p| keep.contains(p.name.as_str())).cloned().collect();
        let memories = self.memories.iter().filter(|m| keep.contains(m.name.as_str())).cloned().collect();
        let assoc = self
            .assoc
            .iter()
            .filter(|(k, _)| keep.contains(k.as_str()))
            .map(|(k, v)| (k.clone(), v.iter().filter(|m| keep.contains(m.as_str())).cloned().collect()))
            .collect();
        let links = self
            .links
            .iter()
            .filter(|l| keep.contains(l.a.as_str()) && keep.contains(l.b.as_str()))
            .cloned()
            .collect();
        Platform::new(procs, memories, assoc, links)
    }
}

fn proc(name: &str, clock_hz: f64, cores: f64, data_parallelism: f64) -> ProcUnit {
    ProcUnit {
        name: name.into(),
        clock_hz,
        overhead_penalty: 1.0,
        cores,
        data_parallelism,
        dataflow: false,
        area_capacity: 0.0,
    }
}

fn ram(name: &str, bytes_per_s: f64) -> MemoryUnit {
    MemoryUnit { name: name.into(), rate: Some(RateSpec::Explicit { bytes_per_s }), virtual_owner: None }
}

pub const CPU_RAM_RATE: f64 = 170e9;
pub const GPU_RAM_RATE: f64 = 410e9;
pub const FPGA_RAM_RATE: f64 = 11e9;
/// 32 hardware threads times 8 SIMD lanes.
pub const CPU_PARALLEL_FACTOR: f64 = 256.0;
pub const FPGA_AREA_UNITS: f64 = 28.0;

/// The CG, CGF and CGFF evaluation platforms.
///
/// Every pair of memories is linked without a rate limit. Units are listed
/// CPU, GPU, FPGAs so that the CPU and its RAM form the host.
pub fn preset(name: &str) -> Result<Platform, PlatformError> {
    let fpgas = match name.to_ascii_uppercase().as_str() {
        "CG" => 0,
        "CGF" => 1,
        "CGFF" => 2,
        _ => return Err(PlatformError::UnknownPreset(name.into())),
    };
    let mut procs = vec![proc("cpu", 2.4e9, 32.0, 8.0), proc("gpu", 1.6e9, 3584.0, 1.0)];
    let mut memories = vec![ram("cpu_ram", CPU_RAM_RATE), ram("gpu_ram", GPU_RAM_RATE)];
    let mut assoc = BTreeMap::new();
    assoc.insert("cpu".to_string(), BTreeSet::from(["cpu_ram".to_string()]));
    assoc.insert("gpu".to_string(), BTreeSet::from(["gpu_ram".to_string()]));
    for k in 0..fpgas {
        let name = format!("fpga{k}");
        let mem = format!("fpga{k}_ram");
        procs.push(ProcUnit {
            dataflow: true,
            area_capacity: FPGA_AREA_UNITS,
            ..proc(&name, 0.4e9, 1.0, 1.0)
        });
        memories.push(ram(&mem, FPGA_RAM_RATE));
        assoc.insert(name, BTreeSet::from([mem]));
    }
    let mut links = Vec::new();
    for i in 0..memories.len() {
        for j in i + 1..memories.len() {
            links.push(Link { a: memories[i].name.clone(), b: memories[j].name.clone(), rate_limit: None });
        }
    }
    Platform::new(procs, memories, assoc, links)
}

/// Adds a memory with free access from `owner` and no route to anything else.
pub fn add_virtual_memory(platform: &Platform, owner: &str) -> Result<Platform, PlatformError> {
    if !platform.procs.iter().any(|p| p.name == owner) {
        return Err(PlatformError::UnknownUnit(owner.into()));
    }
    let mut k = 0;
    let name = loop {
        let candidate = format!("{owner}_vmem{k}");
        if platform.unit_by_name(&candidate).is_none() {
            break candidate;
        }
        k += 1;
    };
    let mut memories = platform.memories.clone();
    memories.push(MemoryUnit { name: name.clone(), rate: None, virtual_owner: Some(owner.into()) });
    let mut assoc = platform.assoc.clone();
    assoc.entry(owner.to_string()).or_default().insert(name);
    Platform::new(platform.procs.clone(), memories, assoc, platform.links.clone())
}
