//! Smallest eigenpairs of the pencil `L_f v = λ M_d v`.
//!
//! The pencil is symmetrised as `S = M_d^{-1/2} L_f M_d^{-1/2}`. Small
//! problems (or requests for a large share of the spectrum) use a dense
//! symmetric eigensolver. Otherwise Lanczos with full reorthogonalisation
//! runs on the pseudo-inverse `S⁺`, applied through a grounded sparse
//! factorisation of `L_f`; the null space (one vector per connected
//! component) is known in closed form and deflated up front.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ldl::SparseLdl;
use crate::error::{Error, Result};
use crate::network::component_labels;
use crate::sparse::CsrMatrix;

/// Residual bound factor: `‖L v − λ M v‖ ≤ tol·‖v‖·max(1, λ‖M‖)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

const RITZ_SPARE: usize = 16;
const POLISH_SWEEPS: usize = 3;

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Problems with at most this many nodes are solved densely.
    pub dense_limit: usize,
    /// Requests for more than `n / dense_fraction` pairs are solved densely.
    pub dense_fraction: usize,
    /// Cap on the Krylov dimension; `None` means the full range of `L_f`.
    pub max_krylov: Option<usize>,
    /// Seed of the Lanczos start vector.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 500,
            dense_fraction: 4,
            max_krylov: None,
            seed: 0x5eed,
        }
    }
}

/// Eigenpairs in ascending order. Column `i` of `vectors` is `v_i`,
/// normalised so that `V_kᵀ M_d V_k = I`.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Number of exact zero eigenvalues (connected components).
    pub nullity: usize,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `‖L v_i − λ_i M v_i‖₂` for every pair.
    pub fn residuals(&self, laplacian: &CsrMatrix, mass: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let v: Vec<f64> = self.vectors.column(i).iter().copied().collect();
                let lv = laplacian.mul_vec(&v);
                lv.iter()
                    .zip(&v)
                    .zip(mass)
                    .map(|((a, x), m)| (a - self.values[i] * m * x).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Whether every pair meets [`RESIDUAL_TOLERANCE`].
    pub fn within_tolerance(&self, laplacian: &CsrMatrix, mass: &[f64]) -> bool {
        self.failing(laplacian, mass).is_empty()
    }

    /// Indices of pairs violating [`RESIDUAL_TOLERANCE`].
    pub fn failing(&self, laplacian: &CsrMatrix, mass: &[f64]) -> Vec<usize> {
        let mass_norm = mass.iter().fold(0.0f64, |a, &m| a.max(m));
        self.residuals(laplacian, mass)
            .iter()
            .enumerate()
            .filter(|&(i, r)| {
                let norm = self.vectors.column(i).norm();
                !(*r <= RESIDUAL_TOLERANCE * norm * (self.values[i] * mass_norm).max(1.0))
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// The `k` smallest eigenpairs of `L_f v = λ M_d v`.
pub fn generalized_eigs(laplacian: &CsrMatrix, mass: &[f64], k: usize) -> Result<EigenPairs> {
    generalized_eigs_with(laplacian, mass, k, &EigenOptions::default())
}

pub fn generalized_eigs_with(
    laplacian: &CsrMatrix,
    mass: &[f64],
    k: usize,
    opts: &EigenOptions,
) -> Result<EigenPairs> {
    let n = mass.len();
    if laplacian.nrows() != n || laplacian.ncols() != n {
        return Err(Error::Dimension {
            what: "laplacian",
            expected: n,
            got: laplacian.nrows(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}-node pencil"
        )));
    }
    if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument(format!("mass of node {i} is not positive")));
    }
    let edges: Vec<(usize, usize)> = laplacian
        .iter()
        .filter(|&(r, c, v)| r < c && v != 0.0)
        .map(|(r, c, _)| (r, c))
        .collect();
    let labels = component_labels(n, &edges);
    let null = null_space(&labels, mass);

    if n <= opts.dense_limit || k * opts.dense_fraction > n {
        dense(laplacian, mass, k, null)
    } else {
        lanczos(laplacian, mass, k, null, opts)
    }
}

/// M-orthonormal component indicators, one column per component.
fn null_space(labels: &[usize], mass: &[f64]) -> DMatrix<f64> {
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut comp_mass = vec![0.0; count];
    for (&c, &m) in labels.iter().zip(mass) {
        comp_mass[c] += m;
    }
    DMatrix::from_fn(labels.len(), count, |i, c| {
        if labels[i] == c {
            1.0 / comp_mass[c].sqrt()
        } else {
            0.0
        }
    })
}

fn dense(laplacian: &CsrMatrix, mass: &[f64], k: usize, null: DMatrix<f64>) -> Result<EigenPairs> {
    let n = mass.len();
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for (r, c, v) in laplacian.iter() {
        s[(r, c)] += v * inv_sqrt[r] * inv_sqrt[c];
    }
    let eig = SymmetricEigen::new(s);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let nullity = null.ncols();
    let mut values = Vec::with_capacity(k);
    let mut vectors = DMatrix::<f64>::zeros(n, k);
    for (col, &i) in idx.iter().take(k).enumerate() {
        if col < nullity {
            // Exact null space replaces the numerically rotated one.
            values.push(0.0);
            vectors.set_column(col, &null.column(col));
        } else {
            values.push(eig.eigenvalues[i].max(0.0));
            let u = eig.eigenvectors.column(i);
            for r in 0..n {
                vectors[(r, col)] = u[r] * inv_sqrt[r];
            }
        }
    }
    Ok(EigenPairs {
        values,
        vectors,
        nullity,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn lanczos(
    laplacian: &CsrMatrix,
    mass: &[f64],
    k: usize,
    null: DMatrix<f64>,
    opts: &EigenOptions,
) -> Result<EigenPairs> {
    let n = mass.len();
    let nullity = null.ncols();
    let sqrt_m: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    // Null vectors in the symmetric (u = M^{1/2} v) coordinates.
    let null_u: Vec<Vec<f64>> = (0..nullity)
        .map(|c| (0..n).map(|i| null[(i, c)] * sqrt_m[i]).collect())
        .collect();
    let project = |w: &mut [f64]| {
        for z in &null_u {
            let c = dot(z, w);
            axpy(-c, z, w);
        }
    };
    let wanted = k.saturating_sub(nullity);
    if wanted == 0 {
        return Ok(EigenPairs {
            values: vec![0.0; k],
            vectors: null.columns(0, k).into_owned(),
            nullity,
        });
    }

    let ldl = SparseLdl::factor(laplacian);
    if ldl.grounded().len() != nullity {
        return Err(Error::NoConvergence(format!(
            "factorisation found {} null pivots for {} components",
            ldl.grounded().len(),
            nullity
        )));
    }
    let apply = |u: &[f64]| -> Vec<f64> {
        let b: Vec<f64> = u.iter().zip(&sqrt_m).map(|(x, s)| x * s).collect();
        let y = ldl.solve(&b);
        let mut w: Vec<f64> = y.iter().zip(&sqrt_m).map(|(x, s)| x * s).collect();
        project(&mut w);
        w
    };

    let range_dim = n - nullity;
    let max_dim = opts.max_krylov.unwrap_or(range_dim).min(range_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            project(&mut q);
            for _ in 0..2 {
                for b in basis {
                    let c = dot(b, &q);
                    axpy(-c, b, &mut q);
                }
            }
            let norm = dot(&q, &q).sqrt();
            if norm > 1e-8 {
                q.iter_mut().for_each(|x| *x /= norm);
                return Some(q);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = random_unit(&basis).ok_or_else(|| Error::NoConvergence("degenerate start vector".into()))?;
    let check_every = 20usize;
    let estimate_tol = 1e-12;

    loop {
        let mut w = apply(&q);
        let a = dot(&q, &w);
        axpy(-a, &q, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(q);
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let mut b = dot(&w, &w).sqrt();
        let dim = basis.len();
        let scale = alpha.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let exhausted = dim >= max_dim;

        let breakdown = b <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        let time_to_check = dim >= wanted && (dim % check_every == 0 || exhausted || breakdown);
        if time_to_check {
            let t = DMatrix::from_fn(dim, dim, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut idx: Vec<usize> = (0..dim).collect();
            idx.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
            let top = &idx[..wanted];
            // Spare Ritz vectors for the final projection onto S itself.
            let spare = &idx[..(wanted + RITZ_SPARE).min(dim)];
            let estimates_ok = breakdown
                || top.iter().all(|&i| {
                    let theta = eig.eigenvalues[i];
                    (b * eig.eigenvectors[(dim - 1, i)]).abs() <= estimate_tol * theta.abs()
                });
            if estimates_ok || exhausted {
                let pairs = ritz_pairs(laplacian, mass, &basis, &eig, spare, &null, k);
                if pairs.within_tolerance(laplacian, mass) {
                    return Ok(pairs);
                }
                if exhausted {
                    return Err(Error::NoConvergence(format!(
                        "Lanczos reached dimension {dim} without meeting the residual bound"
                    )));
                }
            }
        }
        if exhausted {
            return Err(Error::NoConvergence(format!(
                "Krylov dimension cap {max_dim} reached"
            )));
        }
        if breakdown {
            // Invariant subspace found: continue from a fresh direction.
            q = random_unit(&basis)
                .ok_or_else(|| Error::NoConvergence("Krylov space exhausted".into()))?;
            b = 0.0;
        } else {
            w.iter_mut().for_each(|x| *x /= b);
            q = w;
        }
        beta.push(b);
    }
}

/// Ritz vectors of `S⁺` for the chosen Lanczos pairs, projected onto
/// `S = M^{-1/2} L M^{-1/2}` and polished by shifted inverse iteration on
/// the pencil where the residual bound is not yet met.
fn ritz_pairs(
    laplacian: &CsrMatrix,
    mass: &[f64],
    basis: &[Vec<f64>],
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    chosen: &[usize],
    null: &DMatrix<f64>,
    k: usize,
) -> EigenPairs {
    let n = mass.len();
    let nullity = null.ncols();
    let sqrt_m: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let mut u = DMatrix::<f64>::zeros(n, chosen.len());
    for (slot, &i) in chosen.iter().enumerate() {
        let mut col = vec![0.0; n];
        for (j, qj) in basis.iter().enumerate() {
            axpy(eig.eigenvectors[(j, i)], qj, &mut col);
        }
        u.set_column(slot, &DVector::from_vec(col));
    }
    let (mut values, mut u) = rayleigh_ritz(laplacian, &sqrt_m, u);
    let wanted = k - nullity;
    for _ in 0..POLISH_SWEEPS {
        let pairs = assemble(&values, &u, null, &sqrt_m, k);
        let failing = pairs.failing(laplacian, mass);
        if failing.is_empty() {
            return pairs;
        }
        for i in failing {
            let c = i - nullity;
            let sigma = values[c];
            let mut shifted: Vec<_> = laplacian.iter().collect();
            shifted.extend((0..n).map(|r| (r, r, -sigma * mass[r])));
            let ldl = SparseLdl::factor(&CsrMatrix::from_triplets(n, n, &shifted));
            // v = u / √m; iterate on (L − σM) y = M v and map back.
            let mut v: Vec<f64> = (0..n).map(|r| u[(r, c)] / sqrt_m[r]).collect();
            for _ in 0..2 {
                let rhs: Vec<f64> = v.iter().zip(mass).map(|(x, m)| x * m).collect();
                v = ldl.solve(&rhs);
                let norm = v.iter().zip(mass).map(|(x, m)| x * x * m).sum::<f64>().sqrt();
                if !(norm.is_finite() && norm > 0.0) {
                    break;
                }
                v.iter_mut().for_each(|x| *x /= norm);
            }
            if v.iter().all(|x| x.is_finite()) {
                for r in 0..n {
                    u[(r, c)] = v[r] * sqrt_m[r];
                }
            }
        }
        for j in 0..nullity {
            let z: DVector<f64> = DVector::from_fn(n, |r, _| null[(r, j)] * sqrt_m[r]);
            for c in 0..u.ncols() {
                let dot = z.dot(&u.column(c));
                u.column_mut(c).axpy(-dot, &z, 1.0);
            }
        }
        let (vals, vecs) = rayleigh_ritz(laplacian, &sqrt_m, u);
        values = vals;
        u = vecs;
        debug_assert!(values.len() >= wanted);
    }
    assemble(&values, &u, null, &sqrt_m, k)
}

/// Projects `S` onto span(`u`) (after re-orthonormalising) and returns the
/// Ritz values in ascending order with their vectors.
fn rayleigh_ritz(laplacian: &CsrMatrix, sqrt_m: &[f64], u: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = sqrt_m.len();
    let p = u.ncols();
    let u = u.qr().q();
    let mut su = DMatrix::<f64>::zeros(n, p);
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for c in 0..p {
        for r in 0..n {
            x[r] = u[(r, c)] / sqrt_m[r];
        }
        laplacian.mul_vec_into(&x, &mut y);
        for r in 0..n {
            su[(r, c)] = y[r] / sqrt_m[r];
        }
    }
    let g = u.transpose() * su;
    let small = SymmetricEigen::new((&g + g.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| small.eigenvalues[a].total_cmp(&small.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| small.eigenvalues[i].max(0.0)).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, p);
    for (slot, &i) in order.iter().enumerate() {
        vectors.set_column(slot, &(&u * small.eigenvectors.column(i)));
    }
    (values, vectors)
}

fn assemble(values: &[f64], u: &DMatrix<f64>, null: &DMatrix<f64>, sqrt_m: &[f64], k: usize) -> EigenPairs {
    let n = sqrt_m.len();
    let nullity = null.ncols();
    let mut out_values = vec![0.0; nullity];
    let mut vectors = DMatrix::<f64>::zeros(n, k);
    for c in 0..nullity {
        vectors.set_column(c, &null.column(c));
    }
    for slot in 0..k - nullity {
        out_values.push(values[slot]);
        let norm = u.column(slot).norm();
        for r in 0..n {
            vectors[(r, nullity + slot)] = u[(r, slot)] / norm / sqrt_m[r];
        }
    }
    EigenPairs {
        values: out_values,
        vectors,
        nullity,
    }
}
