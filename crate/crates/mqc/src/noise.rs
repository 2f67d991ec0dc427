//! Entanglement-gate error probabilities for the depolarization and dephasing models.

use crate::mqlayer::{nuclear_norm, participation, MQLayer, COUPLING_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Depolarization,
    Dephasing,
    None,
}

impl NoiseKind {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseKind::Depolarization => "depol",
            NoiseKind::Dephasing => "dephase",
            NoiseKind::None => "none",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("p_tq must lie in [0, 1), got {0}")]
    BadProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Two-qubit gate error per qubit for one fully entangling pair.
    pub p_tq: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, p_tq: f64) -> Result<Self, NoiseError> {
        if !(0.0..1.0).contains(&p_tq) {
            return Err(NoiseError::BadProbability(p_tq));
        }
        Ok(NoiseModel { kind, p_tq })
    }

    pub fn none() -> Self {
        NoiseModel { kind: NoiseKind::None, p_tq: 0.0 }
    }

    /// Detuning ratio `Delta^2 = (1 - p)/(4p)`; `None` for `p = 0` (infinite detuning).
    pub fn delta_sq(&self) -> Option<f64> {
        (self.p_tq > 0.0).then(|| (1.0 - self.p_tq) / (4.0 * self.p_tq))
    }

    /// Per-qubit error probabilities for one MQ layer under this model.
    pub fn probabilities(&self, layer: &MQLayer) -> Vec<f64> {
        match self.kind {
            NoiseKind::Depolarization => depol_probabilities(layer, self),
            NoiseKind::Dephasing => dephase_probabilities(layer, self),
            NoiseKind::None => vec![0.0; layer.n_qubits],
        }
    }
}

/// `p_n = 4 nuc p alpha_n / (1 + p (4 nuc alpha_n - 1))`.
pub fn depol_probabilities(layer: &MQLayer, model: &NoiseModel) -> Vec<f64> {
    let p = model.p_tq;
    if p == 0.0 || layer.is_zero() {
        return vec![0.0; layer.n_qubits];
    }
    let nuc = nuclear_norm(layer);
    let alpha = participation(layer).expect("nonzero layer");
    alpha.into_iter().map(|a| depol_closed_form(nuc, a, p)).collect()
}

pub(crate) fn depol_closed_form(nuc: f64, alpha: f64, p: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let x = 4.0 * nuc * p * alpha;
    x / (1.0 + p * (4.0 * nuc * alpha - 1.0))
}

/// The scattering form `alpha nuc / (alpha nuc + Delta^2)`.
pub fn depol_scattering_form(nuc: f64, alpha: f64, delta_sq: f64) -> f64 {
    let x = alpha * nuc;
    if x == 0.0 {
        0.0
    } else {
        x / (x + delta_sq)
    }
}

/// `p_tq` on every participating qubit.
pub fn dephase_probabilities(layer: &MQLayer, model: &NoiseModel) -> Vec<f64> {
    layer.participants().into_iter().map(|on| if on { model.p_tq } else { 0.0 }).collect()
}

/// Whether a coupling is large enough to be charged noise.
pub fn is_active(theta: f64) -> bool {
    theta.abs() > COUPLING_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn depol(p: f64) -> NoiseModel {
        NoiseModel::new(NoiseKind::Depolarization, p).unwrap()
    }

    #[test]
    fn gauge_anchor_single_pair() {
        for p in [1e-4, 1e-3, 1e-2, 0.3] {
            let l = MQLayer::from_couplings(3, [(0, 2, FRAC_PI_4)]).unwrap();
            let pn = depol_probabilities(&l, &depol(p));
            assert!((pn[0] - p).abs() < 1e-14 && (pn[2] - p).abs() < 1e-14);
            assert_eq!(pn[1], 0.0);
        }
    }

    #[test]
    fn disjoint_pairs_match_single_pair() {
        let p = 1e-3;
        let l = MQLayer::from_couplings(6, [(0, 1, FRAC_PI_4), (2, 3, -FRAC_PI_4), (4, 5, FRAC_PI_4)]).unwrap();
        for x in depol_probabilities(&l, &depol(p)) {
            assert!((x - p).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_forms_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &p in &[1e-4, 1e-3, 1e-2] {
            let m = depol(p);
            for _ in 0..50 {
                let mut l = MQLayer::new(6);
                for a in 0..6 {
                    for b in a + 1..6 {
                        if rng.random_bool(0.5) {
                            l.add(a, b, rng.random_range(-0.8..0.8)).unwrap();
                        }
                    }
                }
                if l.is_zero() {
                    continue;
                }
                let nuc = nuclear_norm(&l);
                let alpha = participation(&l).unwrap();
                let pn = depol_probabilities(&l, &m);
                for (a, x) in alpha.iter().zip(&pn) {
                    let y = depol_scattering_form(nuc, *a, m.delta_sq().unwrap());
                    assert!((x - y).abs() < 1e-14, "{x} {y}");
                    assert!((0.0..1.0).contains(x));
                }
            }
        }
    }

    #[test]
    fn monotone_in_load() {
        let p = 1e-3;
        let mut last = 0.0;
        for k in 1..20 {
            let x = depol_closed_form(0.1 * k as f64, 0.3, p);
            assert!(x > last);
            last = x;
        }
    }

    #[test]
    fn dephasing() {
        let m = NoiseModel::new(NoiseKind::Dephasing, 0.02).unwrap();
        let l = MQLayer::from_couplings(4, [(0, 1, 0.001), (1, 2, 0.7)]).unwrap();
        assert_eq!(dephase_probabilities(&l, &m), vec![0.02, 0.02, 0.02, 0.0]);
        assert_eq!(dephase_probabilities(&MQLayer::new(3), &m), vec![0.0; 3]);
        let all = MQLayer::from_couplings(10, (0..9).map(|i| (i, i + 1, 0.2))).unwrap();
        assert!(dephase_probabilities(&all, &m).iter().all(|&x| x == 0.02));
    }

    #[test]
    fn zero_probability_has_no_delta() {
        let m = depol(0.0);
        assert_eq!(m.delta_sq(), None);
        let l = MQLayer::from_couplings(2, [(0, 1, FRAC_PI_4)]).unwrap();
        assert_eq!(depol_probabilities(&l, &m), vec![0.0, 0.0]);
        assert!(NoiseModel::new(NoiseKind::Depolarization, 1.0).is_err());
    }
}
