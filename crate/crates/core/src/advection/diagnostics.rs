use crate::network::Network;
use crate::error::{Error, Result};
use crate::network::node_masses;

/// Per-node Courant numbers `C_i = ½·dt·(Σ incident |ṁ|)_i / m_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CourantReport {
    pub per_node: Vec<f64>,
    pub max: f64,
    pub argmax: usize,
}

impl CourantReport {
    pub fn from_parts(mass: &[f64], edges: &[(usize, usize)], flows: &[f64], dt: f64) -> Self {
        let mut throughput = vec![0.0; mass.len()];
        for (&(s, t), f) in edges.iter().zip(flows) {
            throughput[s] += f.abs();
            throughput[t] += f.abs();
        }
        let per_node: Vec<f64> = throughput
            .iter()
            .zip(mass)
            .map(|(q, m)| 0.5 * dt * q / m)
            .collect();
        let (argmax, max) = per_node
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &c)| if c > b.1 { (i, c) } else { b });
        Self {
            per_node,
            max,
            argmax,
        }
    }
}

/// Courant numbers of a network for the given per-pipe flows; pass `None`
/// to use each pipe's maximum flow.
pub fn courant(net: &Network, flows: Option<&[f64]>, dt: f64) -> Result<CourantReport> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be non-negative, got {dt}")));
    }
    let max_flows: Vec<f64>;
    let flows = match flows {
        Some(f) if f.len() != net.pipe_count() => {
            return Err(Error::Dimension {
                what: "pipe flows",
                expected: net.pipe_count(),
                got: f.len(),
            })
        }
        Some(f) => f,
        None => {
            max_flows = net.pipes().iter().map(|p| p.max_flow).collect();
            &max_flows
        }
    };
    Ok(CourantReport::from_parts(&node_masses(net)?, &net.edges(), flows, dt))
}

/// Leading coefficient of the upwind truncation error, `(v·dz/2)(1 − v·dt/dz)`,
/// in m²/s. Vanishes at Courant number one.
pub fn numerical_diffusion(velocity: f64, dz: f64, dt: f64) -> f64 {
    0.5 * velocity * dz * (1.0 - velocity * dt / dz)
}
