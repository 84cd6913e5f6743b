//! Sparse LDLᵀ for graph Laplacians with minimum-degree elimination order.
//!
//! Pivots that vanish (relative to the node's original diagonal) mark the
//! last node of a connected component; they are grounded, which turns the
//! factor into a solver for consistent singular systems `L y = b`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::sparse::CsrMatrix;

const NULL_PIVOT: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct SparseLdl {
    order: Vec<usize>,
    pivot: Vec<f64>,
    /// Per elimination step: (row, multiplier) of the factor column.
    columns: Vec<Vec<(usize, f64)>>,
    grounded: Vec<usize>,
}

impl SparseLdl {
    pub fn factor(matrix: &CsrMatrix) -> Self {
        let n = matrix.nrows();
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut diag = vec![0.0; n];
        for (r, c, v) in matrix.iter() {
            if r == c {
                diag[r] += v;
            } else {
                *rows[r].entry(c).or_insert(0.0) += v;
            }
        }
        let scale: Vec<f64> = diag.iter().map(|d| d.abs()).collect();
        let mut eliminated = vec![false; n];
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
            (0..n).map(|i| Reverse((rows[i].len(), i))).collect();

        let mut order = Vec::with_capacity(n);
        let mut pivot = Vec::with_capacity(n);
        let mut columns = Vec::with_capacity(n);
        let mut grounded = Vec::new();
        while let Some(Reverse((deg, p))) = heap.pop() {
            if eliminated[p] || deg != rows[p].len() {
                continue;
            }
            eliminated[p] = true;
            let d = diag[p];
            let nbrs: Vec<(usize, f64)> = std::mem::take(&mut rows[p]).into_iter().collect();
            order.push(p);
            if nbrs.is_empty() && d.abs() <= NULL_PIVOT * scale[p].max(f64::MIN_POSITIVE) {
                grounded.push(p);
                pivot.push(0.0);
                columns.push(Vec::new());
                continue;
            }
            let column: Vec<(usize, f64)> = nbrs.iter().map(|&(j, a)| (j, a / d)).collect();
            for &(i, a_ip) in &nbrs {
                rows[i].remove(&p);
                for &(j, l_jp) in &column {
                    let update = a_ip * l_jp;
                    if i == j {
                        diag[i] -= update;
                    } else {
                        *rows[i].entry(j).or_insert(0.0) -= update;
                    }
                }
            }
            for &(i, _) in &nbrs {
                heap.push(Reverse((rows[i].len(), i)));
            }
            pivot.push(d);
            columns.push(column);
        }
        Self {
            order,
            pivot,
            columns,
            grounded,
        }
    }

    /// Nodes whose pivot vanished, one per connected component.
    pub fn grounded(&self) -> &[usize] {
        &self.grounded
    }

    /// Solves `A y = b`, setting grounded unknowns to zero.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        for (step, &p) in self.order.iter().enumerate() {
            let yp = y[p];
            for &(j, l) in &self.columns[step] {
                y[j] -= l * yp;
            }
        }
        for (step, &p) in self.order.iter().enumerate() {
            let d = self.pivot[step];
            y[p] = if d == 0.0 { 0.0 } else { y[p] / d };
        }
        for (step, &p) in self.order.iter().enumerate().rev() {
            let mut acc = y[p];
            if self.pivot[step] == 0.0 {
                y[p] = 0.0;
                continue;
            }
            for &(j, l) in &self.columns[step] {
                acc -= l * y[j];
            }
            y[p] = acc;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_of(n: usize, edges: &[(usize, usize, f64)], shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for &(a, b, w) in edges {
            t.extend([(a, a, w), (b, b, w), (a, b, -w), (b, a, -w)]);
        }
        for i in 0..n {
            t.push((i, i, shift));
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn solves_shifted_cycle() {
        let edges = [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 1.5), (0, 2, 0.25)];
        let a = laplacian_of(4, &edges, 0.3);
        let ldl = SparseLdl::factor(&a);
        assert!(ldl.grounded().is_empty());
        let b = [1.0, -2.0, 0.5, 3.0];
        let y = ldl.solve(&b);
        for (r, bi) in a.mul_vec(&y).iter().zip(b) {
            assert!((r - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn grounds_one_node_per_component() {
        let edges = [(0, 1, 1.0), (1, 2, 2.0), (3, 4, 1.0)];
        let a = laplacian_of(5, &edges, 0.0);
        let ldl = SparseLdl::factor(&a);
        assert_eq!(ldl.grounded().len(), 2);
        // Consistent right-hand side: sums vanish on each component.
        let b = [1.0, -3.0, 2.0, 0.5, -0.5];
        let y = ldl.solve(&b);
        for (r, bi) in a.mul_vec(&y).iter().zip(b) {
            assert!((r - bi).abs() < 1e-12);
        }
    }
}
