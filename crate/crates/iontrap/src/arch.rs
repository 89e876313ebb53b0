//! Trap layouts: zones, wells (sites), links and junction hubs, plus the
//! mapping of a protocol's qubits onto blocks.

use pframe::{ProtocolTree, Qubit};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArchKind {
    AbaQusA,
    AbaQusS,
    AbaQusX,
}

impl ArchKind {
    pub const ALL: [ArchKind; 3] = [ArchKind::AbaQusA, ArchKind::AbaQusS, ArchKind::AbaQusX];

    pub fn name(self) -> &'static str {
        match self {
            ArchKind::AbaQusA => "AbaQusA",
            ArchKind::AbaQusS => "AbaQusS",
            ArchKind::AbaQusX => "AbaQusX",
        }
    }

    pub fn parse(s: &str) -> Option<ArchKind> {
        ArchKind::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneRole {
    Working,
    Idle,
    Detection,
}

/// Segmented: long chains with all-to-all gates inside a working zone.
/// Integrated: one- and two-ion crystals routed between wells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Segmented,
    Integrated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    pub role: ZoneRole,
    /// Qubit ions the zone may hold at once.
    pub capacity: u32,
    /// Potential wells inside the zone, each holding one crystal.
    pub wells: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HubSpec {
    pub name: String,
    /// (zone, end) pairs meeting at the junction.
    pub entries: Vec<(String, u8)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub block0: Vec<String>,
    pub block1: Vec<String>,
    pub interface: Vec<String>,
}

/// On-disk architecture description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub model: Model,
    pub zones: Vec<Zone>,
    /// Zone `a` end 1 joins zone `b` end 0.
    pub links: Vec<(String, String)>,
    pub hubs: Vec<HubSpec>,
    pub regions: RegionSpec,
}

#[derive(Deserialize)]
struct ArchFile {
    #[allow(dead_code)]
    version: u32,
    architectures: BTreeMap<String, ArchSpec>,
}

const ARCHS: &str = include_str!("../data/architectures.json");

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ArchError {
    #[error("unknown zone {0}")]
    UnknownZone(String),
    #[error("zone end {0}:{1} is linked twice")]
    EndReused(String, u8),
    #[error("qubit {0} has no role in the protocol tree")]
    UnplacedQubit(Qubit),
    #[error("architecture cannot hold {ions} ions in region {region}")]
    Overfull { region: String, ions: usize },
}

/// One end of a well: a neighbor well, and the hub when the step crosses a junction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub site: usize,
    pub end: u8,
    pub hub: Option<usize>,
}

/// A potential well. Crystals inside are ordered from end 0 to end 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    pub zone: usize,
    pub ends: [Vec<Link>; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub kind: ArchKind,
    pub model: Model,
    pub zones: Vec<Zone>,
    pub sites: Vec<Site>,
    pub zone_sites: Vec<Vec<usize>>,
    pub hubs: Vec<String>,
    /// Zones of block 0, block 1 and the surgery interface.
    pub regions: [Vec<usize>; 3],
}

impl Architecture {
    pub fn load(kind: ArchKind) -> Architecture {
        let file: ArchFile = serde_json::from_str(ARCHS).expect("shipped architectures parse");
        let spec = file.architectures.get(kind.name()).expect("all architectures are shipped").clone();
        Architecture::from_spec(kind, &spec).expect("shipped architectures are consistent")
    }

    pub fn from_spec(kind: ArchKind, spec: &ArchSpec) -> Result<Architecture, ArchError> {
        let idx: BTreeMap<&str, usize> = spec.zones.iter().enumerate().map(|(i, z)| (z.name.as_str(), i)).collect();
        let zone = |n: &str| idx.get(n).copied().ok_or_else(|| ArchError::UnknownZone(n.to_string()));
        let mut sites = Vec::new();
        let mut zone_sites = Vec::new();
        for (z, zs) in spec.zones.iter().enumerate() {
            let first = sites.len();
            for w in 0..zs.wells.max(1) as usize {
                sites.push(Site { zone: z, ends: [Vec::new(), Vec::new()] });
                if w > 0 {
                    let (a, b) = (first + w - 1, first + w);
                    sites[a].ends[1].push(Link { site: b, end: 0, hub: None });
                    sites[b].ends[0].push(Link { site: a, end: 1, hub: None });
                }
            }
            zone_sites.push((first..sites.len()).collect::<Vec<_>>());
        }
        // Site at the given end of a zone.
        let end_site = |z: usize, e: u8| if e == 0 { zone_sites[z][0] } else { *zone_sites[z].last().expect("zone has a well") };
        let mut used = std::collections::BTreeSet::new();
        let mut claim = |z: usize, e: u8| {
            if used.insert((z, e)) {
                Ok(())
            } else {
                Err(ArchError::EndReused(spec.zones[z].name.clone(), e))
            }
        };
        for (a, b) in &spec.links {
            let (za, zb) = (zone(a)?, zone(b)?);
            claim(za, 1)?;
            claim(zb, 0)?;
            let (sa, sb) = (end_site(za, 1), end_site(zb, 0));
            sites[sa].ends[1].push(Link { site: sb, end: 0, hub: None });
            sites[sb].ends[0].push(Link { site: sa, end: 1, hub: None });
        }
        for (h, hub) in spec.hubs.iter().enumerate() {
            let entries: Vec<(usize, u8)> =
                hub.entries.iter().map(|(n, e)| Ok((end_site(zone(n)?, *e), *e))).collect::<Result<_, ArchError>>()?;
            for ((n, e), _) in hub.entries.iter().zip(&entries) {
                claim(zone(n)?, *e)?;
            }
            for &(s, e) in &entries {
                for &(t, f) in &entries {
                    if s != t {
                        sites[s].ends[e as usize].push(Link { site: t, end: f, hub: Some(h) });
                    }
                }
            }
        }
        let region = |names: &[String]| names.iter().map(|n| zone(n)).collect::<Result<Vec<_>, _>>();
        Ok(Architecture {
            kind,
            model: spec.model,
            zones: spec.zones.clone(),
            sites,
            zone_sites,
            hubs: spec.hubs.iter().map(|h| h.name.clone()).collect(),
            regions: [region(&spec.regions.block0)?, region(&spec.regions.block1)?, region(&spec.regions.interface)?],
        })
    }

    pub fn count_zones(&self, role: ZoneRole) -> usize {
        self.zones.iter().filter(|z| z.role == role).count()
    }

    pub fn site_role(&self, site: usize) -> ZoneRole {
        self.zones[self.sites[site].zone].role
    }

    pub fn working_sites(&self) -> Vec<usize> {
        (0..self.sites.len()).filter(|&s| self.site_role(s) == ZoneRole::Working).collect()
    }

    /// Largest number of qubit ions a single well may hold.
    pub fn well_capacity(&self, site: usize) -> usize {
        let z = &self.zones[self.sites[site].zone];
        match self.model {
            Model::Segmented => z.capacity as usize,
            Model::Integrated => (z.capacity / z.wells.max(1)) as usize,
        }
    }

    /// Zone of a region with the given role (first match).
    pub fn region_zone(&self, region: usize, role: ZoneRole) -> Option<usize> {
        self.regions[region].iter().copied().find(|&z| self.zones[z].role == role)
    }

    /// Crosstalk partners per gate target: neighbors in the stored chain
    /// order, for segmented traps only.
    pub fn neighbor_map(&self, roles: &QubitRoles) -> BTreeMap<Qubit, Vec<Qubit>> {
        let mut out = BTreeMap::new();
        if self.model != Model::Segmented {
            return out;
        }
        for chain in roles.chains() {
            for (i, &q) in chain.iter().enumerate() {
                let mut n = Vec::new();
                if i > 0 {
                    n.push(chain[i - 1]);
                }
                if i + 1 < chain.len() {
                    n.push(chain[i + 1]);
                }
                out.insert(q, n);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum IonRole {
    Data(usize),
    Ancilla(usize),
    Surgery,
}

/// Qubit roles read from a protocol tree's role map.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitRoles {
    pub role: Vec<IonRole>,
    pub data: [Vec<Qubit>; 2],
    /// Syndrome then flag qubits.
    pub ancilla: [Vec<Qubit>; 2],
    pub surgery: Vec<Qubit>,
}

impl QubitRoles {
    pub fn from_tree(tree: &ProtocolTree) -> Result<QubitRoles, ArchError> {
        let get = |k: String| tree.roles.get(&k).cloned().unwrap_or_default();
        let data = [get("data/0".into()), get("data/1".into())];
        let ancilla = [0, 1].map(|b| {
            let mut v = get(format!("syndrome/{b}"));
            v.extend(get(format!("flag/{b}")));
            v
        });
        let surgery = get("surgery".into());
        let mut role = vec![None; tree.n_qubits as usize];
        for b in 0..2 {
            for &q in &data[b] {
                role[q as usize] = Some(IonRole::Data(b));
            }
            for &q in &ancilla[b] {
                role[q as usize] = Some(IonRole::Ancilla(b));
            }
        }
        for &q in &surgery {
            role[q as usize] = Some(IonRole::Surgery);
        }
        let role = role
            .into_iter()
            .enumerate()
            .map(|(q, r)| r.ok_or(ArchError::UnplacedQubit(q as Qubit)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(QubitRoles { role, data, ancilla, surgery })
    }

    /// Stored chain order per block: data then ancillas.
    pub fn chains(&self) -> Vec<Vec<Qubit>> {
        (0..2).map(|b| self.data[b].iter().chain(&self.ancilla[b]).copied().collect()).filter(|c: &Vec<Qubit>| !c.is_empty()).collect()
    }

    /// Block a qubit belongs to; surgery ions have none.
    pub fn block(&self, q: Qubit) -> Option<usize> {
        match self.role[q as usize] {
            IonRole::Data(b) | IonRole::Ancilla(b) => Some(b),
            IonRole::Surgery => None,
        }
    }
}
