use super::cluster::{ClusterOptions, Clustering, SpectralEmbedding};
use super::model::{build_reducers_for_edges, reduce_model, Reducers, ReducedModel};
use crate::advection::CourantReport;
use crate::error::{Error, Result};
use crate::network::Network;

/// One clustering tried during the search.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub requested_k: usize,
    pub k: usize,
    pub courant_max: f64,
}

#[derive(Debug, Clone)]
pub struct Choice {
    pub clustering: Clustering,
    pub model: ReducedModel,
    /// False when even two clusters exceed the target; the result is then
    /// the coarsest clustering tried.
    pub feasible: bool,
    pub evaluations: Vec<Evaluation>,
    pub eigen_seconds: f64,
}

impl Choice {
    pub fn k(&self) -> usize {
        self.clustering.k()
    }
}

/// Searches for the largest cluster count whose reduced Courant number at
/// `dt` stays within `c_target`, stopping early once it lands in
/// `[0.9·c_target, c_target]`. At most `⌈log₂ n⌉ + 5` clusterings are tried.
pub fn choose_k(
    net: &Network,
    dt: f64,
    c_target: f64,
    k0: Option<usize>,
    opts: &ClusterOptions,
) -> Result<Choice> {
    if !(c_target > 0.0 && c_target <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Courant target must lie in (0, 1], got {c_target}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let n = net.node_count();
    let edges = net.edges();
    let max_flow: Vec<f64> = net.pipes().iter().map(|p| p.max_flow).collect();
    let mut embedding = SpectralEmbedding::new(net, opts.eigen.clone())?;
    let budget = (n as f64).log2().ceil() as usize + 5;
    let mut evaluations = Vec::new();
    let mut candidates: Vec<(Clustering, f64)> = Vec::new();

    let mut evaluate = |k: usize, embedding: &mut SpectralEmbedding| -> Result<f64> {
        let clustering = embedding.cluster(k, &opts.kmeans)?;
        let reducers = build_reducers_for_edges(&clustering, &edges)?;
        let c = courant_of(&reducers, &max_flow, embedding.mass(), dt);
        evaluations.push(Evaluation {
            requested_k: k,
            k: clustering.k(),
            courant_max: c,
        });
        candidates.push((clustering, c));
        Ok(c)
    };

    let band = |c: f64| c <= c_target && c >= 0.9 * c_target;
    let c_full = evaluate(n, &mut embedding)?;
    let mut feasible = true;
    let mut chosen = 0;
    if c_full > c_target && n > 2 {
        // Feasible lower end `lo` and infeasible upper end `hi` of requested k.
        let mut lo: Option<usize> = None;
        let mut hi = n;
        let mut next = k0.unwrap_or(n / 2).clamp(2, n - 1);
        let mut used = 1;
        while used < budget {
            let c = evaluate(next, &mut embedding)?;
            used += 1;
            if band(c) {
                break;
            }
            if c <= c_target {
                lo = Some(next);
            } else {
                hi = next;
                if next == 2 {
                    feasible = false;
                    break;
                }
            }
            next = match lo {
                Some(l) if hi - l <= 1 => break,
                Some(l) => l + (hi - l) / 2,
                None if hi <= 3 => 2,
                None => (hi / 2).max(2),
            };
        }
        chosen = pick(&candidates, c_target).unwrap_or_else(|| {
            feasible = false;
            // Coarsest clustering tried.
            candidates
                .iter()
                .enumerate()
                .min_by_key(|(i, (cl, _))| (cl.k(), *i))
                .map(|(i, _)| i)
                .expect("at least one evaluation")
        });
    }
    let clustering = candidates.swap_remove(chosen).0;
    let reducers = build_reducers_for_edges(&clustering, &edges)?;
    let model = reduce_model(net, &reducers, dt)?;
    Ok(Choice {
        clustering,
        model,
        feasible,
        evaluations,
        eigen_seconds: embedding.eigen_seconds,
    })
}

/// Largest-k feasible candidate, earliest on ties.
fn pick(candidates: &[(Clustering, f64)], c_target: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (cl, c)) in candidates.iter().enumerate() {
        if *c <= c_target && best.is_none_or(|b| cl.k() > candidates[b].0.k()) {
            best = Some(i);
        }
    }
    best
}

fn courant_of(reducers: &Reducers, max_flow: &[f64], mass: &[f64], dt: f64) -> f64 {
    let mut w = vec![0.0; reducers.edge_count()];
    for (m, f) in reducers.edge_map().iter().zip(max_flow) {
        if let Some((r, _)) = m {
            w[*r] += f.abs();
        }
    }
    CourantReport::from_parts(&reducers.sum_nodes(mass), &reducers.edge_pairs(), &w, dt).max
}
