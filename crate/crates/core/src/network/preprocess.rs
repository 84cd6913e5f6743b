//! Structural preprocessing: contracting short pipes and splitting long ones.

use super::{node_masses, Attachment, Network, Node, Pipe};
use crate::error::Result;

/// Contracts every pipe shorter than `threshold` metres. The endpoints of a
/// contracted pipe become one node holding both endpoint masses plus the
/// pipe's water; attachments and remaining pipes follow the merged node.
/// Pipes without a length are never contracted.
pub fn merge_short_pipes(net: &Network, threshold: f64) -> Result<Network> {
    let n = net.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut any = false;
    for p in net.pipes() {
        if p.length.is_some_and(|l| l < threshold) {
            let (a, b) = (find(&mut parent, p.source), find(&mut parent, p.target));
            if a != b {
                // Lowest index stays representative so ids are stable.
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
            any = true;
        }
    }
    if !any {
        return Ok(net.clone());
    }

    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut new_index = vec![usize::MAX; n];
    let mut nodes: Vec<Node> = Vec::new();
    for i in 0..n {
        if roots[i] == i {
            new_index[i] = nodes.len();
            nodes.push(Node {
                heat_loss_coeff: 0.0,
                mass: 0.0,
                ..net.nodes()[i].clone()
            });
        }
    }
    // Ambient temperature of a merged node is the loss-weighted mean of its
    // members (plain mean when no member loses heat).
    let mut ambient_acc = vec![(0.0, 0.0, 0.0, 0usize); nodes.len()];
    for (i, node) in net.nodes().iter().enumerate() {
        let k = new_index[roots[i]];
        nodes[k].mass += node.mass;
        nodes[k].heat_loss_coeff += node.heat_loss_coeff;
        let acc = &mut ambient_acc[k];
        acc.0 += node.heat_loss_coeff * node.ambient_temp;
        acc.1 += node.heat_loss_coeff;
        acc.2 += node.ambient_temp;
        acc.3 += 1;
    }
    for (node, (hw, h, sum, count)) in nodes.iter_mut().zip(ambient_acc) {
        node.ambient_temp = if h > 0.0 { hw / h } else { sum / count as f64 };
    }

    let mut pipes = Vec::new();
    for p in net.pipes() {
        let (s, t) = (new_index[roots[p.source]], new_index[roots[p.target]]);
        if s == t {
            nodes[s].mass += p.water_mass;
        } else {
            pipes.push(Pipe {
                source: s,
                target: t,
                ..p.clone()
            });
        }
    }
    let remap = |list: &[Attachment]| -> Vec<Attachment> {
        list.iter()
            .map(|a| Attachment {
                node: new_index[roots[a.node]],
                ..a.clone()
            })
            .collect()
    };
    Network::new(nodes, pipes, remap(net.consumers()), remap(net.producers()))
}

/// Splits every pipe longer than `dz` metres into `⌈length/dz⌉` equal
/// segments joined by intermediate nodes. Segments inherit the pipe's
/// maximum flow and area; water mass is divided evenly so the total is
/// conserved. Intermediate nodes carry no own mass, so their effective mass
/// is half of the two adjacent segments. Their heat loss coefficient uses the
/// mean loss-per-mass of the pipe's endpoints, and their ambient temperature
/// the mean of the endpoints.
pub fn oversample(net: &Network, dz: f64) -> Result<Network> {
    assert!(dz > 0.0, "segment length must be positive");
    let masses = node_masses(net)?;
    let mut nodes = net.nodes().to_vec();
    let mut pipes = Vec::with_capacity(net.pipe_count());
    for p in net.pipes() {
        let Some(len) = p.length.filter(|&l| l > dz) else {
            pipes.push(p.clone());
            continue;
        };
        let segments = (len / dz).ceil() as usize;
        let seg_mass = p.water_mass / segments as f64;
        let (src, dst) = (&net.nodes()[p.source], &net.nodes()[p.target]);
        let loss_per_mass =
            0.5 * (src.heat_loss_coeff / masses[p.source] + dst.heat_loss_coeff / masses[p.target]);
        let ambient = 0.5 * (src.ambient_temp + dst.ambient_temp);

        let mut prev = p.source;
        for s in 0..segments {
            let next = if s + 1 == segments {
                p.target
            } else {
                nodes.push(Node {
                    id: format!("{}/n{}", p.id, s + 1),
                    mass: 0.0,
                    heat_loss_coeff: loss_per_mass * seg_mass,
                    ambient_temp: ambient,
                });
                nodes.len() - 1
            };
            pipes.push(Pipe {
                id: format!("{}/{}", p.id, s),
                source: prev,
                target: next,
                max_flow: p.max_flow,
                water_mass: seg_mass,
                length: Some(len / segments as f64),
                area: p.area,
            });
            prev = next;
        }
    }
    Network::new(
        nodes,
        pipes,
        net.consumers().to_vec(),
        net.producers().to_vec(),
    )
}
