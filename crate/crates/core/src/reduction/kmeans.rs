//! Seeded k-means (k-means++ initialisation, Lloyd iterations accelerated
//! with Hamerly's distance bounds) with deterministic restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            max_iter: 300,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// Row-major `k × dim`.
    pub centers: Vec<f64>,
    pub inertia: f64,
    /// Index of the restart that produced this result.
    pub restart: usize,
}

/// Points as a row-major `n × dim` slice.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && data.len() % dim == 0);
        Self { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    // Independent accumulators let the compiler vectorise.
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += (x - y) * (x - y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Best of `opts.restarts` runs by (inertia, restart index).
pub fn kmeans(points: Points<'_>, k: usize, opts: &KMeansOptions) -> KMeansResult {
    let n = points.len();
    assert!(k >= 1 && k <= n, "k = {k} out of range for {n} points");
    let mut best: Option<KMeansResult> = None;
    for restart in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(restart as u64);
        let centers = plus_plus(points, k, &mut rng);
        let mut run = lloyd(points, k, centers, opts.max_iter);
        run.restart = restart;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

fn plus_plus(points: Points<'_>, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, dim) = (points.len(), points.dim);
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // Rounding at the tail: fall back to the last point with mass.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick);
        centers.extend_from_slice(c);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), c));
        }
    }
    centers
}

/// Nearest and second-nearest center distances; ties go to the lower index.
fn nearest_two(x: &[f64], centers: &[f64], dim: usize) -> (usize, f64, f64) {
    let (mut best, mut d1, mut d2) = (0, f64::INFINITY, f64::INFINITY);
    for (j, c) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < d1 {
            d2 = d1;
            d1 = d;
            best = j;
        } else if d < d2 {
            d2 = d;
        }
    }
    (best, d1.sqrt(), d2.sqrt())
}

fn lloyd(points: Points<'_>, k: usize, mut centers: Vec<f64>, max_iter: usize) -> KMeansResult {
    let (n, dim) = (points.len(), points.dim);
    let mut labels = vec![0usize; n];
    let mut upper = vec![0.0; n];
    let mut lower = vec![0.0; n];
    for i in 0..n {
        let (j, d1, d2) = nearest_two(points.row(i), &centers, dim);
        labels[i] = j;
        upper[i] = d1;
        lower[i] = d2;
    }
    let mut half_gap = vec![0.0; k];
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    let mut moved = vec![0.0; k];

    for _ in 0..max_iter {
        // Half distance from each center to its closest other center.
        for j in 0..k {
            let cj = &centers[j * dim..(j + 1) * dim];
            half_gap[j] = 0.5
                * (0..k)
                    .filter(|&o| o != j)
                    .map(|o| sq_dist(cj, &centers[o * dim..(o + 1) * dim]))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
        }
        let mut changed = 0usize;
        for i in 0..n {
            let bound = half_gap[labels[i]].max(lower[i]);
            if upper[i] <= bound {
                continue;
            }
            let x = points.row(i);
            upper[i] = sq_dist(x, &centers[labels[i] * dim..(labels[i] + 1) * dim]).sqrt();
            if upper[i] <= bound {
                continue;
            }
            let (j, d1, d2) = nearest_two(x, &centers, dim);
            if j != labels[i] {
                changed += 1;
                labels[i] = j;
            }
            upper[i] = d1;
            lower[i] = d2;
        }

        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            let j = labels[i];
            counts[j] += 1;
            for (s, x) in sums[j * dim..(j + 1) * dim].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // Re-seed an empty cluster with the point farthest from its center.
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| upper[a].total_cmp(&upper[b]).then(b.cmp(&a)))
                    .expect("more points than clusters");
                counts[labels[far]] -= 1;
                for (s, x) in sums[labels[far] * dim..(labels[far] + 1) * dim].iter_mut().zip(points.row(far)) {
                    *s -= x;
                }
                labels[far] = j;
                counts[j] = 1;
                sums[j * dim..(j + 1) * dim].copy_from_slice(points.row(far));
                upper[far] = 0.0;
                lower[far] = 0.0;
                changed += 1;
            }
        }
        for j in 0..k {
            let new: Vec<f64> = sums[j * dim..(j + 1) * dim]
                .iter()
                .map(|s| s / counts[j] as f64)
                .collect();
            moved[j] = sq_dist(&new, &centers[j * dim..(j + 1) * dim]).sqrt();
            centers[j * dim..(j + 1) * dim].copy_from_slice(&new);
        }
        let (mut m1, mut m1_idx, mut m2) = (0.0, usize::MAX, 0.0);
        for (j, &m) in moved.iter().enumerate() {
            if m > m1 {
                m2 = m1;
                m1 = m;
                m1_idx = j;
            } else if m > m2 {
                m2 = m;
            }
        }
        for i in 0..n {
            upper[i] += moved[labels[i]];
            lower[i] -= if labels[i] == m1_idx { m2 } else { m1 };
        }
        if changed == 0 && m1 == 0.0 {
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), &centers[labels[i] * dim..(labels[i] + 1) * dim]))
        .sum();
    KMeansResult {
        labels,
        centers,
        inertia,
        restart: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut data = Vec::new();
        for center in [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)] {
            for _ in 0..30 {
                data.push(center.0 + rng.random_range(-1.0..1.0));
                data.push(center.1 + rng.random_range(-1.0..1.0));
            }
        }
        data
    }

    #[test]
    fn separates_well_spaced_blobs() {
        let data = blobs();
        let res = kmeans(Points::new(&data, 2), 3, &KMeansOptions::default());
        for blob in 0..3 {
            let l = res.labels[blob * 30];
            assert!(res.labels[blob * 30..(blob + 1) * 30].iter().all(|&x| x == l));
        }
        let mut distinct = res.labels.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let data = blobs();
        let opts = KMeansOptions { restarts: 5, ..Default::default() };
        assert_eq!(kmeans(Points::new(&data, 2), 4, &opts), kmeans(Points::new(&data, 2), 4, &opts));
    }

    #[test]
    fn k_equals_n_separates_everything() {
        let data = [0.0, 1.0, 3.0, 7.0, 15.0];
        let res = kmeans(Points::new(&data, 1), 5, &KMeansOptions::default());
        let mut l = res.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3, 4]);
        assert_eq!(res.inertia, 0.0);
    }

    #[test]
    fn hamerly_matches_plain_lloyd_inertia() {
        // Plain Lloyd from the same initial centers as an oracle.
        let data = blobs();
        let pts = Points::new(&data, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = plus_plus(pts, 5, &mut rng);
        let fast = lloyd(pts, 5, init.clone(), 300);
        let mut centers = init;
        let mut labels = vec![0; pts.len()];
        for _ in 0..300 {
            for i in 0..pts.len() {
                labels[i] = nearest_two(pts.row(i), &centers, 2).0;
            }
            let mut next = vec![0.0; 10];
            let mut counts = [0usize; 5];
            for i in 0..pts.len() {
                counts[labels[i]] += 1;
                next[labels[i] * 2] += pts.row(i)[0];
                next[labels[i] * 2 + 1] += pts.row(i)[1];
            }
            for j in 0..5 {
                next[2 * j] /= counts[j] as f64;
                next[2 * j + 1] /= counts[j] as f64;
            }
            centers = next;
        }
        assert_eq!(fast.labels, labels);
    }
}
