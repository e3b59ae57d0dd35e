//! JSON netlist format. Channels are referenced by name and waveplate
//! angles are given in degrees.

use std::path::Path;

use ghzsim_core::circuit::{validate_netlist, DetectorId, Element, LossCategory, Netlist, SiteId};
use ghzsim_core::fock::Channel;
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetlistFile {
    pub channels: Vec<String>,
    pub sources: Vec<String>,
    pub outputs: Vec<String>,
    pub elements: Vec<ElementFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ElementFile {
    Wp {
        channel: String,
        angle_deg: f64,
    },
    Pbs {
        #[serde(rename = "in")]
        inputs: [String; 2],
        #[serde(rename = "out")]
        outputs: [String; 2],
    },
    Loss {
        site: u16,
        channel: String,
        category: Category,
    },
    Det {
        id: u16,
        channel: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Prep,
    Ops,
    Det,
}

impl From<LossCategory> for Category {
    fn from(c: LossCategory) -> Self {
        match c {
            LossCategory::Prep => Category::Prep,
            LossCategory::Ops => Category::Ops,
            LossCategory::Det => Category::Det,
        }
    }
}

impl From<Category> for LossCategory {
    fn from(c: Category) -> Self {
        match c {
            Category::Prep => LossCategory::Prep,
            Category::Ops => LossCategory::Ops,
            Category::Det => LossCategory::Det,
        }
    }
}

// degrees with float noise from the radian conversion removed
fn degrees(rad: f64) -> f64 {
    let d = rad.to_degrees();
    let r = (d * 1e9).round() / 1e9;
    if (r - d).abs() <= 1e-9 * d.abs().max(1.0) {
        r
    } else {
        d
    }
}

impl NetlistFile {
    pub fn from_netlist(n: &Netlist) -> Self {
        let name = |c: Channel| n.channel_name(c).map(str::to_string).unwrap_or_else(|| format!("#{}", c.0));
        let elements = n
            .elements
            .iter()
            .map(|e| match *e {
                Element::Waveplate { channel, angle } => ElementFile::Wp { channel: name(channel), angle_deg: degrees(angle) },
                Element::Pbs { in1, in2, out1, out2 } => {
                    ElementFile::Pbs { inputs: [name(in1), name(in2)], outputs: [name(out1), name(out2)] }
                }
                Element::LossSite { site, channel, category } => {
                    ElementFile::Loss { site: site.0, channel: name(channel), category: category.into() }
                }
                Element::Detector { id, channel } => ElementFile::Det { id: id.0, channel: name(channel) },
            })
            .collect();
        NetlistFile {
            channels: n.channels.clone(),
            sources: n.sources.iter().map(|&c| name(c)).collect(),
            outputs: n.outputs.iter().map(|&c| name(c)).collect(),
            elements,
        }
    }

    /// Resolves channel names; does not check the circuit invariants.
    pub fn to_netlist(&self) -> Result<Netlist, Error> {
        for (i, c) in self.channels.iter().enumerate() {
            if self.channels[..i].contains(c) {
                return Err(Error::Netlist(format!("channel {c:?} declared twice")));
            }
        }
        let ch = |s: &str| -> Result<Channel, Error> {
            self.channels
                .iter()
                .position(|c| c == s)
                .map(|i| Channel(i as u16))
                .ok_or_else(|| Error::Netlist(format!("unknown channel {s:?}")))
        };
        let mut n = Netlist::new(
            self.channels.clone(),
            self.sources.iter().map(|s| ch(s)).collect::<Result<_, _>>()?,
            self.outputs.iter().map(|s| ch(s)).collect::<Result<_, _>>()?,
        );
        for e in &self.elements {
            let el = match e {
                ElementFile::Wp { channel, angle_deg } => {
                    Element::Waveplate { channel: ch(channel)?, angle: angle_deg.to_radians() }
                }
                ElementFile::Pbs { inputs, outputs } => Element::Pbs {
                    in1: ch(&inputs[0])?,
                    in2: ch(&inputs[1])?,
                    out1: ch(&outputs[0])?,
                    out2: ch(&outputs[1])?,
                },
                ElementFile::Loss { site, channel, category } => {
                    Element::LossSite { site: SiteId(*site), channel: ch(channel)?, category: (*category).into() }
                }
                ElementFile::Det { id, channel } => Element::Detector { id: DetectorId(*id), channel: ch(channel)? },
            };
            n.push(el);
        }
        Ok(n)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("netlist serializes");
        s.push('\n');
        s
    }
}

/// Parses and validates a netlist file.
pub fn parse_netlist(text: &str) -> Result<Netlist, Error> {
    let file: NetlistFile = serde_json::from_str(text).map_err(|e| Error::Netlist(e.to_string()))?;
    let n = file.to_netlist()?;
    let v = validate_netlist(&n);
    if !v.is_empty() {
        let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        return Err(Error::Netlist(msgs.join("; ")));
    }
    Ok(n)
}

pub fn load_netlist(path: &Path) -> Result<Netlist, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_netlist(&text)
}

/// `"canonical"` or a path to a netlist file.
pub fn resolve_netlist(spec: &str) -> Result<Netlist, Error> {
    if spec == "canonical" {
        Ok(ghzsim_core::canonical_ghz_netlist())
    } else {
        load_netlist(Path::new(spec))
    }
}
