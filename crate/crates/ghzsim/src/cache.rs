//! Persistent branch cache.
//!
//! One JSON file per (netlist, acceptance) pair, named by a SHA-256 of the
//! netlist content. It stores, per count vector, the widest status built so
//! far and the live events with their coefficient vectors. Floats are
//! written with round-trip precision, so a table assembled from the cache
//! is bit-identical to a fresh build. Deleting the directory is always safe.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ghzsim_core::analysis::{BranchTable, Demand, Engine, GroupKey, LiveEvent, TaskRunner};
use ghzsim_core::circuit::{Element, Netlist};
use ghzsim_core::sources::{EmissionEvent, EventKey, GroupStatus, LossSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::netlist_file::NetlistFile;
use crate::Error;

pub const CACHE_VERSION: u32 = 1;

/// Environment variable naming the default cache directory.
pub const CACHE_ENV: &str = "GHZSIM_CACHE_DIR";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    key: String,
    acceptance: String,
    groups: Vec<GroupEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GroupEntry {
    group: GroupKey,
    status: StatusEntry,
    events: Vec<EventEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StatusEntry {
    Full,
    Partial { emission: u8, losses: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EventEntry {
    emission: u8,
    losses: String,
    success: Vec<f64>,
    numerator: Vec<f64>,
}

fn losses_hex(l: LossSet) -> String {
    format!("{:x}", l.bits())
}

fn parse_losses(s: &str) -> Result<LossSet, Error> {
    u128::from_str_radix(s, 16).map(LossSet::from_bits).map_err(|e| Error::Cache(format!("loss set {s:?}: {e}")))
}

fn key_of(emission: u8, losses: &str) -> Result<EventKey, Error> {
    Ok(EventKey { emission: EmissionEvent::from_mask(emission), losses: parse_losses(losses)? })
}

type Stored = BTreeMap<GroupKey, (GroupStatus, Vec<LiveEvent>)>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hit_groups: usize,
    pub built_groups: usize,
}

#[derive(Clone, Debug)]
pub struct BranchCache {
    dir: PathBuf,
}

impl BranchCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BranchCache { dir: dir.into() }
    }

    /// Cache in the directory named by `GHZSIM_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(BranchCache::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Content hash of a netlist and acceptance rule. Angles enter with
    /// their exact bits.
    pub fn key(netlist: &Netlist, acceptance: &str) -> String {
        let mut h = Sha256::new();
        h.update(format!("ghzsim-branch-cache v{CACHE_VERSION}\n{acceptance}\n").as_bytes());
        h.update(serde_json::to_vec(&NetlistFile::from_netlist(netlist)).expect("netlist serializes"));
        for e in &netlist.elements {
            if let Element::Waveplate { angle, .. } = e {
                h.update(angle.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn load(&self, key: &str, acceptance: &str) -> Result<Stored, Error> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Stored::new()),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let file: CacheFile = match serde_json::from_str(&text) {
            Ok(f) => f,
            // unreadable entries are treated as absent and rebuilt
            Err(_) => return Ok(Stored::new()),
        };
        if file.version != CACHE_VERSION || file.key != key || file.acceptance != acceptance {
            return Ok(Stored::new());
        }
        let mut out = Stored::new();
        for g in file.groups {
            let status = match &g.status {
                StatusEntry::Full => GroupStatus::Full,
                StatusEntry::Partial { emission, losses } => GroupStatus::Partial(key_of(*emission, losses)?),
            };
            let mut events = Vec::with_capacity(g.events.len());
            for e in g.events {
                events.push(LiveEvent {
                    key: key_of(e.emission, &e.losses)?,
                    group: g.group,
                    success: e.success,
                    numerator: e.numerator,
                });
            }
            out.insert(g.group, (status, events));
        }
        Ok(out)
    }

    fn save(&self, key: &str, acceptance: &str, stored: &Stored) -> Result<(), Error> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let groups = stored
            .iter()
            .filter_map(|(&group, (status, events))| {
                let status = match status {
                    GroupStatus::Full => StatusEntry::Full,
                    GroupStatus::Partial(k) => StatusEntry::Partial { emission: k.emission.mask(), losses: losses_hex(k.losses) },
                    GroupStatus::Excluded => return None,
                };
                let events = events
                    .iter()
                    .map(|e| EventEntry {
                        emission: e.key.emission.mask(),
                        losses: losses_hex(e.key.losses),
                        success: e.success.clone(),
                        numerator: e.numerator.clone(),
                    })
                    .collect();
                Some(GroupEntry { group, status, events })
            })
            .collect();
        let file = CacheFile { version: CACHE_VERSION, key: key.to_string(), acceptance: acceptance.to_string(), groups };
        let text = serde_json::to_string(&file).map_err(|e| Error::Cache(e.to_string()))?;
        let path = self.path_for(key);
        // write-then-rename keeps readers from seeing a partial file
        let tmp = self.dir.join(format!("{key}.json.tmp{}", std::process::id()));
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Branch table for `demand`, building only the count vectors the cache
    /// does not cover yet.
    pub fn build<R: TaskRunner>(
        &self,
        engine: &Engine<'_>,
        demand: Demand,
        runner: &R,
    ) -> Result<(BranchTable, CacheStats), Error> {
        let acceptance = engine.acceptance().name();
        let key = BranchCache::key(engine.netlist(), acceptance);
        let mut stored = self.load(&key, acceptance)?;
        let mut missing = Demand::new();
        let mut stats = CacheStats::default();
        for (&g, &status) in demand.iter() {
            if status == GroupStatus::Excluded {
                continue;
            }
            match stored.get(&g) {
                Some((have, _)) if have.covers(status) => stats.hit_groups += 1,
                _ => {
                    missing.insert(g, status);
                    stats.built_groups += 1;
                }
            }
        }
        if !missing.is_empty() {
            let fresh = engine.build(missing.clone(), runner)?;
            let mut by_group: BTreeMap<GroupKey, Vec<LiveEvent>> = BTreeMap::new();
            for e in fresh.events() {
                by_group.entry(e.group).or_default().push(e.clone());
            }
            for (&g, &status) in missing.iter() {
                stored.insert(g, (status, by_group.remove(&g).unwrap_or_default()));
            }
            self.save(&key, acceptance, &stored)?;
        }
        let mut events = Vec::new();
        for (g, &status) in demand.iter() {
            if let Some((_, evs)) = stored.get(g) {
                events.extend(evs.iter().filter(|e| status.includes(&e.key)).cloned());
            }
        }
        Ok((BranchTable::from_events(demand, events), stats))
    }
}

/// Builds through the cache when one is configured.
pub fn build_table<R: TaskRunner>(
    cache: Option<&BranchCache>,
    engine: &Engine<'_>,
    demand: Demand,
    runner: &R,
) -> Result<(BranchTable, CacheStats), Error> {
    match cache {
        Some(c) => c.build(engine, demand, runner),
        None => {
            let built = demand.iter().filter(|(_, s)| **s != GroupStatus::Excluded).count();
            let table = engine.build(demand, runner)?;
            Ok((table, CacheStats { hit_groups: 0, built_groups: built }))
        }
    }
}
