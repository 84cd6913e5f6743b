use std::fmt::Write as _;

use super::eigen::{generalized_eigs_with, EigenOptions, EigenPairs};
use super::kmeans::{kmeans, KMeansOptions, Points};
use crate::error::{Error, Result};
use crate::network::{incidence, laplacian, node_masses, Network, Weighting};
use crate::sparse::CsrMatrix;

/// Node-to-cluster assignment. Clusters are numbered in order of their
/// lowest member node.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    assignment: Vec<usize>,
    cluster_mass: Vec<f64>,
}

impl Clustering {
    /// Builds a clustering from arbitrary labels, renumbering them
    /// canonically. `mass` is the node mass diagonal.
    pub fn from_labels(labels: &[usize], mass: &[f64]) -> Result<Self> {
        if labels.len() != mass.len() {
            return Err(Error::Dimension {
                what: "cluster labels",
                expected: mass.len(),
                got: labels.len(),
            });
        }
        let mut canon = std::collections::HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = canon.len();
                *canon.entry(l).or_insert(next)
            })
            .collect();
        let mut cluster_mass = vec![0.0; canon.len()];
        for (&c, &m) in assignment.iter().zip(mass) {
            cluster_mass[c] += m;
        }
        Ok(Self {
            assignment,
            cluster_mass,
        })
    }

    pub fn identity(mass: &[f64]) -> Self {
        Self {
            assignment: (0..mass.len()).collect(),
            cluster_mass: mass.to_vec(),
        }
    }

    pub fn k(&self) -> usize {
        self.cluster_mass.len()
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_mass(&self) -> &[f64] {
        &self.cluster_mass
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }

    /// Splits every cluster into its connected pieces within `edges`.
    pub fn split_disconnected(&self, edges: &[(usize, usize)], mass: &[f64]) -> Clustering {
        let internal: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| self.assignment[a] == self.assignment[b])
            .collect();
        let pieces = crate::network::component_labels(self.assignment.len(), &internal);
        Clustering::from_labels(&pieces, mass).expect("sizes match")
    }

    /// True when every cluster is connected through internal edges.
    pub fn is_contiguous(&self, edges: &[(usize, usize)]) -> bool {
        let internal: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| self.assignment[a] == self.assignment[b])
            .collect();
        let pieces = crate::network::component_labels(self.assignment.len(), &internal);
        pieces.iter().max().map_or(0, |m| m + 1) == self.k()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClusterOptions {
    pub eigen: EigenOptions,
    pub kmeans: KMeansOptions,
}

/// Eigenpairs of the flow/mass pencil, grown on demand so that searches
/// over k reuse earlier solves.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    flow_laplacian: CsrMatrix,
    mass: Vec<f64>,
    edges: Vec<(usize, usize)>,
    pairs: Option<EigenPairs>,
    opts: EigenOptions,
    /// Wall time spent in eigensolves, s.
    pub eigen_seconds: f64,
}

impl SpectralEmbedding {
    pub fn new(net: &Network, opts: EigenOptions) -> Result<Self> {
        Ok(Self {
            flow_laplacian: laplacian(&incidence(net, Weighting::Flow)),
            mass: node_masses(net)?,
            edges: net.edges(),
            pairs: None,
            opts,
            eigen_seconds: 0.0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn flow_laplacian(&self) -> &CsrMatrix {
        &self.flow_laplacian
    }

    /// At least `k` smallest eigenpairs.
    pub fn pairs(&mut self, k: usize) -> Result<&EigenPairs> {
        let have = self.pairs.as_ref().map_or(0, |p| p.len());
        if have < k {
            let n = self.node_count();
            let dense = n <= self.opts.dense_limit || k * self.opts.dense_fraction > n;
            let want = if dense { n } else { k.max(2 * have).min(n) };
            let start = std::time::Instant::now();
            let pairs = generalized_eigs_with(&self.flow_laplacian, &self.mass, want, &self.opts)?;
            self.eigen_seconds += start.elapsed().as_secs_f64();
            self.pairs = Some(pairs);
        }
        Ok(self.pairs.as_ref().expect("computed above"))
    }

    /// Rows of `V_k` clustered with k-means, then split into contiguous pieces.
    pub fn cluster(&mut self, k: usize, kmeans_opts: &KMeansOptions) -> Result<Clustering> {
        let n = self.node_count();
        if k < 1 || k > n {
            return Err(Error::InvalidArgument(format!(
                "cluster count {k} outside [1, {n}]"
            )));
        }
        if k == n {
            return Ok(Clustering::identity(&self.mass));
        }
        let pairs = self.pairs(k)?;
        let mut rows = Vec::with_capacity(n * k);
        for i in 0..n {
            for j in 0..k {
                rows.push(pairs.vectors[(i, j)]);
            }
        }
        let result = kmeans(Points::new(&rows, k), k, kmeans_opts);
        let raw = Clustering::from_labels(&result.labels, &self.mass)?;
        Ok(raw.split_disconnected(&self.edges, &self.mass))
    }
}

/// Spectral clustering of a network into (at least) `k` contiguous clusters.
pub fn spectral_cluster(net: &Network, k: usize, opts: &ClusterOptions) -> Result<Clustering> {
    SpectralEmbedding::new(net, opts.eigen.clone())?.cluster(k, &opts.kmeans)
}

/// Provenance recorded alongside an exported clustering.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterMeta {
    pub k: usize,
    pub dt: Option<f64>,
    pub c_target: Option<f64>,
    pub seed: Option<u64>,
}

/// Text table `node,cluster` with a `#` header carrying [`ClusterMeta`]:
///
/// ```text
/// # k=2 dt=600 c_target=none seed=42
/// node,cluster
/// n1,0
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTable {
    pub meta: ClusterMeta,
    pub rows: Vec<(String, usize)>,
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl ClusterTable {
    pub fn from_clustering(net: &Network, clustering: &Clustering, meta: ClusterMeta) -> Self {
        Self {
            meta: ClusterMeta {
                k: clustering.k(),
                ..meta
            },
            rows: net
                .nodes()
                .iter()
                .zip(clustering.assignment())
                .map(|(n, &c)| (n.id.clone(), c))
                .collect(),
        }
    }

    pub fn write(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        let _ = writeln!(
            out,
            "# k={} dt={} c_target={} seed={}",
            m.k,
            fmt_opt(&m.dt),
            fmt_opt(&m.c_target),
            fmt_opt(&m.seed)
        );
        out.push_str("node,cluster\n");
        for (id, c) in &self.rows {
            let _ = writeln!(out, "{id},{c}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let syntax = |line: usize, msg: &str| Error::Syntax(format!("line {}: {msg}", line + 1));

        let (ln, header) = lines.next().ok_or_else(|| Error::Syntax("empty clustering table".into()))?;
        let header = header
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| syntax(ln, "expected '# k=...' header"))?;
        let mut meta = ClusterMeta::default();
        let mut saw_k = false;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| syntax(ln, &format!("malformed header field '{field}'")))?;
            let bad = |_| syntax(ln, &format!("bad value for {key}: '{value}'"));
            match key {
                "k" => {
                    meta.k = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                    saw_k = true;
                }
                "dt" => meta.dt = parse_opt(value).map_err(bad)?,
                "c_target" => meta.c_target = parse_opt(value).map_err(bad)?,
                "seed" => meta.seed = parse_opt(value).map_err(bad)?,
                _ => return Err(syntax(ln, &format!("unknown header field '{key}'"))),
            }
        }
        if !saw_k {
            return Err(syntax(ln, "header lacks k"));
        }
        match lines.next() {
            Some((_, l)) if l.trim() == "node,cluster" => {}
            Some((ln, _)) => return Err(syntax(ln, "expected 'node,cluster' column header")),
            None => return Err(Error::Syntax("missing column header".into())),
        }
        let mut rows = Vec::new();
        for (ln, line) in lines {
            let (id, c) = line
                .trim()
                .split_once(',')
                .ok_or_else(|| syntax(ln, "expected 'node,cluster'"))?;
            let c: usize = c
                .trim()
                .parse()
                .map_err(|_| syntax(ln, &format!("bad cluster index '{c}'")))?;
            if id.is_empty() {
                return Err(syntax(ln, "empty node id"));
            }
            rows.push((id.to_string(), c));
        }
        Ok(Self { meta, rows })
    }

    /// Resolves the table against a network: every node must appear once and
    /// the recorded k must match the distinct cluster count.
    pub fn to_clustering(&self, net: &Network) -> Result<Clustering> {
        let index: std::collections::HashMap<&str, usize> = net
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut labels = vec![usize::MAX; net.node_count()];
        for (id, c) in &self.rows {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| Error::validation(id, "clustering references unknown node"))?;
            if labels[i] != usize::MAX {
                return Err(Error::validation(id, "node listed twice in clustering"));
            }
            labels[i] = *c;
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::validation(&net.nodes()[i].id, "node missing from clustering"));
        }
        let clustering = Clustering::from_labels(&labels, &node_masses(net)?)?;
        if clustering.k() != self.meta.k {
            return Err(Error::validation(
                "clustering",
                format!("header says k={} but table has {} clusters", self.meta.k, clustering.k()),
            ));
        }
        Ok(clustering)
    }
}

fn parse_opt<T: std::str::FromStr>(value: &str) -> std::result::Result<Option<T>, String> {
    if value == "none" {
        Ok(None)
    } else {
        value.parse().map(Some).map_err(|_| value.to_string())
    }
}
