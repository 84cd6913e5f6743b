//! TOML network document.
//!
//! ```toml
//! [[nodes]]
//! id = "n1"
//! mass = 3.0             # optional, kg lumped at the node (default 0)
//! heat_loss_coeff = 0.0  # optional, W/K (default 0)
//! ambient_temp = 5.0     # optional, °C (default 0)
//!
//! [[pipes]]
//! id = "e1"
//! source = "n1"
//! target = "n2"
//! max_flow = 0.5         # kg/s
//! water_mass = 78.5      # kg; optional when length and area are given
//! length = 10.0          # optional, m
//! area = 0.00785         # optional, m²
//!
//! [[consumers]]
//! node = "n2"
//! schedule = "c2"
//! design_flow = 0.5      # optional, kg/s
//!
//! [[producers]]
//! node = "n1"
//! schedule = "supply"
//! ```
//!
//! Unknown keys are rejected.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Attachment, Network, Node, Pipe, WATER_DENSITY};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    #[serde(default)]
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    pipes: Vec<PipeDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    consumers: Vec<AttachmentDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    producers: Vec<AttachmentDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    mass: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    heat_loss_coeff: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    ambient_temp: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PipeDoc {
    id: String,
    source: String,
    target: String,
    max_flow: f64,
    #[serde(default)]
    water_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AttachmentDoc {
    node: String,
    schedule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design_flow: Option<f64>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Parses and validates a network document.
pub fn parse_network(text: &str) -> Result<Network> {
    let doc: NetworkDoc = toml::from_str(text).map_err(|e| Error::Syntax(e.to_string()))?;

    let index: HashMap<&str, usize> = doc
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let lookup = |entity: &str, id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::validation(entity, format!("references missing node \"{id}\"")))
    };

    let mut pipes = Vec::with_capacity(doc.pipes.len());
    for p in &doc.pipes {
        let water_mass = match (p.water_mass, p.length, p.area) {
            (Some(m), _, _) => m,
            (None, Some(len), Some(area)) => WATER_DENSITY * area * len,
            (None, _, _) => {
                return Err(Error::validation(
                    &p.id,
                    "water_mass missing and cannot be derived without length and area",
                ))
            }
        };
        pipes.push(Pipe {
            id: p.id.clone(),
            source: lookup(&p.id, &p.source)?,
            target: lookup(&p.id, &p.target)?,
            max_flow: p.max_flow,
            water_mass,
            length: p.length,
            area: p.area,
        });
    }
    let attach = |kind: &str, list: &[AttachmentDoc]| -> Result<Vec<Attachment>> {
        list.iter()
            .map(|a| {
                Ok(Attachment {
                    node: lookup(&format!("{kind} {}", a.schedule), &a.node)?,
                    schedule: a.schedule.clone(),
                    design_flow: a.design_flow,
                })
            })
            .collect()
    };
    let consumers = attach("consumer", &doc.consumers)?;
    let producers = attach("producer", &doc.producers)?;
    let nodes = doc
        .nodes
        .into_iter()
        .map(|n| Node {
            id: n.id,
            mass: n.mass,
            heat_loss_coeff: n.heat_loss_coeff,
            ambient_temp: n.ambient_temp,
        })
        .collect();
    Network::new(nodes, pipes, consumers, producers)
}

/// Serializes a network back into the document format.
pub fn write_network(net: &Network) -> String {
    let id = |i: usize| net.nodes()[i].id.clone();
    let doc = NetworkDoc {
        nodes: net
            .nodes()
            .iter()
            .map(|n| NodeDoc {
                id: n.id.clone(),
                mass: n.mass,
                heat_loss_coeff: n.heat_loss_coeff,
                ambient_temp: n.ambient_temp,
            })
            .collect(),
        pipes: net
            .pipes()
            .iter()
            .map(|p| PipeDoc {
                id: p.id.clone(),
                source: id(p.source),
                target: id(p.target),
                max_flow: p.max_flow,
                water_mass: Some(p.water_mass),
                length: p.length,
                area: p.area,
            })
            .collect(),
        consumers: attachments_doc(net, net.consumers()),
        producers: attachments_doc(net, net.producers()),
    };
    toml::to_string(&doc).expect("network document is always serializable")
}

fn attachments_doc(net: &Network, list: &[Attachment]) -> Vec<AttachmentDoc> {
    list.iter()
        .map(|a| AttachmentDoc {
            node: net.nodes()[a.node].id.clone(),
            schedule: a.schedule.clone(),
            design_flow: a.design_flow,
        })
        .collect()
}
