//! Multi-qubit Ising layers `exp(i sum_{n<m} theta_nm Z_n Z_m)`.
//!
//! A stored pair phase `theta` enters the symmetric coupling matrix as
//! `|theta|/2` on both ordered entries. Nuclear norms are reported in gauge
//! units of pi/2, so one fully entangling pair (`theta = pi/4`) has nuc 1/2.

use crate::linalg::{hadamard, Axis, M2};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Couplings below this magnitude count as absent.
pub const COUPLING_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MqError {
    #[error("participation is undefined for an all-zero layer")]
    ZeroLayer,
    #[error("fuse requires ZZ layers, got {0:?}")]
    NotZz(Axis),
    #[error("register mismatch: {0} vs {1} qubits")]
    RegisterMismatch(usize, usize),
    #[error("invalid coupling ({0}, {1}) on {2} qubits")]
    BadPair(usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MQLayer {
    pub n_qubits: usize,
    /// Sparse upper-triangular couplings `(n, m, theta)`, `n < m`, sorted, radians.
    couplings: Vec<(usize, usize, f64)>,
    pub axis: Axis,
}

impl MQLayer {
    pub fn new(n_qubits: usize) -> Self {
        MQLayer { n_qubits, couplings: Vec::new(), axis: Axis::Z }
    }

    /// Build from `(n, m, theta)` triples; repeated pairs accumulate.
    pub fn from_couplings(n_qubits: usize, items: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self, MqError> {
        let mut l = MQLayer::new(n_qubits);
        for (a, b, t) in items {
            l.add(a, b, t)?;
        }
        Ok(l)
    }

    pub fn add(&mut self, a: usize, b: usize, theta: f64) -> Result<(), MqError> {
        if a == b || a >= self.n_qubits || b >= self.n_qubits {
            return Err(MqError::BadPair(a, b, self.n_qubits));
        }
        let (n, m) = if a < b { (a, b) } else { (b, a) };
        match self.couplings.binary_search_by(|&(x, y, _)| (x, y).cmp(&(n, m))) {
            Ok(i) => self.couplings[i].2 += theta,
            Err(i) => self.couplings.insert(i, (n, m, theta)),
        }
        Ok(())
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    pub fn phase(&self, a: usize, b: usize) -> f64 {
        let (n, m) = if a < b { (a, b) } else { (b, a) };
        self.couplings.binary_search_by(|&(x, y, _)| (x, y).cmp(&(n, m))).map(|i| self.couplings[i].2).unwrap_or(0.0)
    }

    pub fn nonzero_count(&self) -> usize {
        self.couplings.iter().filter(|c| c.2.abs() > COUPLING_TOL).count()
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero_count() == 0
    }

    /// Qubits with at least one nonzero coupling.
    pub fn participants(&self) -> Vec<bool> {
        let mut p = vec![false; self.n_qubits];
        for &(n, m, t) in &self.couplings {
            if t.abs() > COUPLING_TOL {
                p[n] = true;
                p[m] = true;
            }
        }
        p
    }

    /// Element-wise absolute symmetric coupling matrix (`|theta|/2` per ordered entry).
    pub fn abs_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_qubits, self.n_qubits);
        for &(a, b, t) in &self.couplings {
            m[(a, b)] = t.abs() / 2.0;
            m[(b, a)] = t.abs() / 2.0;
        }
        m
    }

    /// Diagonal phases `sum theta_nm z_n z_m` per computational basis state
    /// (qubit q is bit `n-1-q`).
    pub fn phase_vector(&self) -> Vec<f64> {
        let n = self.n_qubits;
        let mut v = vec![0.0; 1 << n];
        for &(a, b, t) in &self.couplings {
            let (sa, sb) = (n - 1 - a, n - 1 - b);
            for (idx, x) in v.iter_mut().enumerate() {
                let parity = ((idx >> sa) ^ (idx >> sb)) & 1;
                *x += if parity == 0 { t } else { -t };
            }
        }
        v
    }
}

/// Nuclear norm in gauge units (pi/2) of a set of pair phases.
///
/// The absolute coupling graph is split into connected components and each
/// component's eigenvalues are summed separately.
pub fn nuclear_norm_edges(edges: &[(usize, usize, f64)]) -> f64 {
    let mut nodes: Vec<usize> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let idx = |q: usize| nodes.binary_search(&q).unwrap();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b, t) in edges {
        if t.abs() > 0.0 {
            let (ra, rb) = (find(&mut parent, idx(a)), find(&mut parent, idx(b)));
            parent[ra] = rb;
        }
    }
    let mut comps: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
    for &(a, b, t) in edges {
        if t.abs() > 0.0 {
            let r = find(&mut parent, idx(a));
            comps.entry(r).or_default().push((a, b, t));
        }
    }
    let total: f64 = comps.values().map(|es| component_nuc(es)).sum();
    total / FRAC_PI_2
}

/// Sum of |eigenvalues| (radians) of one connected component.
fn component_nuc(edges: &[(usize, usize, f64)]) -> f64 {
    if edges.len() == 1 {
        return edges[0].2.abs();
    }
    let mut nodes: Vec<usize> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let k = nodes.len();
    let mut m = DMatrix::<f64>::zeros(k, k);
    for &(a, b, t) in edges {
        let (i, j) = (nodes.binary_search(&a).unwrap(), nodes.binary_search(&b).unwrap());
        m[(i, j)] += t.abs() / 2.0;
        m[(j, i)] += t.abs() / 2.0;
    }
    m.symmetric_eigenvalues().iter().map(|x| x.abs()).sum()
}

/// Nuclear norm of a layer in gauge units.
pub fn nuclear_norm(layer: &MQLayer) -> f64 {
    nuclear_norm_edges(&layer.couplings)
}

/// Relative participation `alpha_n = sum_m |phi_nm| / sum_{m,s} |phi_ms|`.
pub fn participation(layer: &MQLayer) -> Result<Vec<f64>, MqError> {
    let mut row = vec![0.0; layer.n_qubits];
    for &(a, b, t) in &layer.couplings {
        row[a] += t.abs();
        row[b] += t.abs();
    }
    let total: f64 = row.iter().sum();
    if total <= COUPLING_TOL {
        return Err(MqError::ZeroLayer);
    }
    Ok(row.into_iter().map(|r| r / total).collect())
}

/// Product of two ZZ layers (couplings add).
pub fn fuse(a: &MQLayer, b: &MQLayer) -> Result<MQLayer, MqError> {
    for l in [a, b] {
        if l.axis != Axis::Z {
            return Err(MqError::NotZz(l.axis));
        }
    }
    if a.n_qubits != b.n_qubits {
        return Err(MqError::RegisterMismatch(a.n_qubits, b.n_qubits));
    }
    let mut out = a.clone();
    for &(n, m, t) in &b.couplings {
        out.add(n, m, t)?;
    }
    Ok(out)
}

/// ZZ form of `exp(i phase XX)` on `pair`: `(H (x) H) exp(i phase ZZ) (H (x) H)`.
///
/// Returns `(pre dressing, (pair, phase), post dressing)`; a zero phase needs no dressing.
pub fn xx_to_zz(pair: (usize, usize), phase: f64) -> ([M2; 2], ((usize, usize), f64), [M2; 2]) {
    let h = if phase.abs() <= COUPLING_TOL { M2::identity() } else { hadamard() };
    ([h, h], (pair, phase), [h, h])
}
