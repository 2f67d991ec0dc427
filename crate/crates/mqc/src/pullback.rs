//! LH-bare / push-forward split and the R_Y pull-back.
//!
//! The pull-back rewrites `(R_Y(t1) (x) R_Y(t2)) e^{i gamma ZZ} e^{i beta XX} (B0 (x) B1) e^{i alpha ZZ}`
//! as `e^{i gt ZZ} (ZZ)^lz (R_Y(u0) (x) R_Y(u1)) e^{i bt XX} (XX)^lx (R_Y(v0) B0 (x) R_Y(v1) B1) e^{i alpha ZZ}`.
//!
//! All of `Y1`, `Y2`, `ZZ`, `XX` commute with `Y1 Y2`, so the problem splits
//! into two 2x2 sectors `s = +-1` where `Y1 -> sz`, `Y2 -> s sz`, `ZZ -> sx`,
//! `XX -> -s sx`. Equalizing `|h_s[0,0]|` across sectors fixes `gt`; a ZXZ
//! Euler factorization per sector then yields `bt` and the Y angles.

use crate::cartan::CartanError;
use crate::lhdecomp::lh_decompose;
use crate::linalg::{c, euler_decompose, exp_pp, kron2, pauli_pair, phase_distance, rx, ry, rz, Axis, M2, M4};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PullbackError {
    #[error(transparent)]
    Cartan(#[from] CartanError),
    #[error("pull-back reconstruction residual {residual:.3e}")]
    Reconstruction { residual: f64 },
}

/// `e^{i gamma ZZ} e^{i beta XX} (B0 (x) B1) e^{i alpha ZZ}` on a qubit pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LHBareFactors {
    pub pair: (usize, usize),
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `(B0, B1)`.
    pub interior: [M2; 2],
}

impl LHBareFactors {
    pub fn reconstruct(&self) -> M4 {
        exp_pp(Axis::Z, self.gamma) * exp_pp(Axis::X, self.beta) * kron2(&self.interior[0], &self.interior[1]) * exp_pp(Axis::Z, self.alpha)
    }

    /// Phases `(alpha, beta, gamma)` in units of pi/4.
    pub fn phases_quarter_pi(&self) -> [f64; 3] {
        [self.alpha / FRAC_PI_4, self.beta / FRAC_PI_4, self.gamma / FRAC_PI_4]
    }
}

/// Split `u` into push-forward gates `(A0, A1)` and LH-bare factors.
pub fn split_lh(u: &M4, pair: (usize, usize)) -> Result<([M2; 2], LHBareFactors), CartanError> {
    let f = lh_decompose(u)?;
    let bare = LHBareFactors { pair, alpha: f.alpha, beta: f.beta, gamma: f.gamma, interior: f.b_gates };
    Ok((f.a_gates, bare))
}

/// LH-RH form produced by [`y_pullback`].
#[derive(Debug, Clone, PartialEq)]
pub struct LHRHFactors {
    pub pair: (usize, usize),
    /// Leading ZZ phase, copied from the bare factors.
    pub alpha: f64,
    pub beta_tilde: f64,
    pub gamma_tilde: f64,
    /// `(u0, u1)`: R_Y angles between the XX and trailing ZZ phases.
    pub u: [f64; 2],
    /// `(v0, v1)`: R_Y angles applied after the original interior gates.
    pub v: [f64; 2],
    /// Original interior gates `(B0, B1)`.
    pub interior: [M2; 2],
    pub parity_x: u8,
    pub parity_z: u8,
}

impl LHRHFactors {
    /// `A~_j = R_Y(u_j)`, with the `Z (x) Z` parity folded in when set.
    pub fn a_gates(&self) -> [M2; 2] {
        let z = if self.parity_z == 1 { crate::linalg::pauli_z() } else { M2::identity() };
        [z * ry(self.u[0]), z * ry(self.u[1])]
    }

    /// `B~_j = R_Y(v_j) B_j`, with the `X (x) X` parity folded in when set.
    pub fn b_gates(&self) -> [M2; 2] {
        let x = if self.parity_x == 1 { crate::linalg::pauli_x() } else { M2::identity() };
        [x * ry(self.v[0]) * self.interior[0], x * ry(self.v[1]) * self.interior[1]]
    }

    pub fn reconstruct(&self) -> M4 {
        let [a0, a1] = self.a_gates();
        let [b0, b1] = self.b_gates();
        exp_pp(Axis::Z, self.gamma_tilde)
            * kron2(&a0, &a1)
            * exp_pp(Axis::X, self.beta_tilde)
            * kron2(&b0, &b1)
            * exp_pp(Axis::Z, self.alpha)
    }

    /// `(beta~, gamma~)` in units of pi/4.
    pub fn tilde_quarter_pi(&self) -> [f64; 2] {
        [self.beta_tilde / FRAC_PI_4, self.gamma_tilde / FRAC_PI_4]
    }

    /// Interior-only reconstruction used by the parity-bit invariants.
    pub fn reconstruct_with_parity(&self, parity_x: u8, parity_z: u8) -> M4 {
        let mut f = self.clone();
        f.parity_x = parity_x;
        f.parity_z = parity_z;
        f.reconstruct()
    }
}

/// `exp(i t sx)`.
fn exp_x(t: f64) -> M2 {
    rx(-2.0 * t)
}

/// Split `x` into `x = r + k pi/2` with `r` in `(-pi/4, pi/4]`; returns `(r, k mod 2)`.
fn fold_parity(x: f64) -> (f64, u8) {
    let k = ((x - FRAC_PI_4) / FRAC_PI_2).ceil();
    (x - k * FRAC_PI_2, (k as i64).rem_euclid(2) as u8)
}

/// Closed-form ZXZ factorization `h = +- Rz(a) Rx(m) Rz(b)` with `m` in `[0, pi]`.
fn zxz(h: &M2) -> (f64, f64, f64) {
    let e = euler_decompose(h, [Axis::Z, Axis::X, Axis::Z]);
    (e.angles[2], e.angles[1], e.angles[0])
}

/// `(beta~, gamma~)` of [`y_pullback`] without building the factors.
pub fn pullback_phases(gamma: f64, beta: f64, t1: f64, t2: f64) -> (f64, f64) {
    let gs = [rz(t1 + t2) * exp_x(gamma - beta), rz(t1 - t2) * exp_x(gamma + beta)];
    let gt_raw = gamma_tilde_raw(&gs);
    let h = exp_x(-gt_raw) * gs[0];
    // |h00| = cos(m/2) for h = Rz(a) Rx(m) Rz(b)
    let m = 2.0 * h[(0, 0)].norm().min(1.0).acos();
    (fold_parity(m / 2.0).0, fold_parity(gt_raw).0)
}

fn gamma_tilde_raw(gs: &[M2; 2]) -> f64 {
    let d = |m: &M2| m[(0, 0)].norm_sqr() - m[(1, 0)].norm_sqr();
    let im = |m: &M2| (m[(0, 0)].conj() * m[(1, 0)]).im;
    let ca = 0.5 * (d(&gs[0]) - d(&gs[1]));
    let cb = im(&gs[0]) - im(&gs[1]);
    if ca.abs() + cb.abs() > 1e-14 {
        0.5 * (-ca).atan2(cb)
    } else {
        0.0
    }
}

/// Pull `R_Y(t1) (x) R_Y(t2)` (applied after `bare`) back into the block.
pub fn y_pullback(bare: &LHBareFactors, t1: f64, t2: f64) -> Result<LHRHFactors, PullbackError> {
    let (g, b) = (bare.gamma, bare.beta);
    let gs = [rz(t1 + t2) * exp_x(g - b), rz(t1 - t2) * exp_x(g + b)];
    let gt_raw = gamma_tilde_raw(&gs);
    let (ap, m, bp) = zxz(&(exp_x(-gt_raw) * gs[0]));
    let (am, _, bm) = zxz(&(exp_x(-gt_raw) * gs[1]));
    // Sector s = -1 carries Rx(-m): Rz(a) Rx(m) Rz(b) = Rz(a - pi) Rx(-m) Rz(b + pi).
    let (am, bm) = (am - PI, bm + PI);
    let u = [(ap + am) / 2.0, (ap - am) / 2.0];
    let v = [(bp + bm) / 2.0, (bp - bm) / 2.0];
    let (gamma_tilde, parity_z) = fold_parity(gt_raw);
    let (beta_tilde, parity_x) = fold_parity(m / 2.0);

    let target = kron2(&ry(t1), &ry(t2)) * bare.reconstruct();
    let mut best: Option<(f64, LHRHFactors)> = None;
    for shift in [0.0, PI] {
        let cand = LHRHFactors {
            pair: bare.pair,
            alpha: bare.alpha,
            beta_tilde,
            gamma_tilde,
            u: [u[0] + shift, u[1] + shift],
            v,
            interior: bare.interior,
            parity_x,
            parity_z,
        };
        let r = phase_distance(&cand.reconstruct(), &target);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, cand));
        }
    }
    let (residual, f) = best.expect("two candidates");
    if residual > 1e-9 {
        return Err(PullbackError::Reconstruction { residual });
    }
    Ok(f)
}

/// `X (x) X` or `Z (x) Z` as a dense 4x4 matrix (parity-bit checks).
pub fn pauli_parity(axis: Axis) -> M4 {
    pauli_pair(axis) * c(1.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_ir::HaarSampler;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bare(rng: &mut ChaCha8Rng, h: &mut HaarSampler) -> LHBareFactors {
        let (_, bare) = split_lh(&h.su4(), (0, 1)).unwrap();
        let mut bare = bare;
        if rng.random_bool(0.3) {
            bare.alpha = rng.random_range(-FRAC_PI_4..FRAC_PI_4);
        }
        bare
    }

    #[test]
    fn split_reconstructs() {
        let mut h = HaarSampler::new(31);
        for _ in 0..100 {
            let u = h.su4();
            let (push, bare) = split_lh(&u, (0, 1)).unwrap();
            let r = kron2(&push[0], &push[1]) * bare.reconstruct();
            assert!(phase_distance(&r, &u) < 1e-10);
        }
    }

    #[test]
    fn split_of_zz_and_product() {
        let (push, bare) = split_lh(&exp_pp(Axis::Z, 0.3), (0, 1)).unwrap();
        assert!(phase_distance(&kron2(&push[0], &push[1]), &M4::identity()) < 1e-9 || bare.beta.abs() < 1e-9);
        assert!(phase_distance(&(kron2(&push[0], &push[1]) * bare.reconstruct()), &exp_pp(Axis::Z, 0.3)) < 1e-10);

        let mut h = HaarSampler::new(32);
        let (a, b) = (h.su2(), h.su2());
        let (push, bare) = split_lh(&kron2(&a, &b), (0, 1)).unwrap();
        assert!(bare.alpha.abs() < 1e-9 && bare.beta.abs() < 1e-9 && bare.gamma.abs() < 1e-9);
        let r = kron2(&push[0], &push[1]) * bare.reconstruct();
        assert!(phase_distance(&r, &kron2(&a, &b)) < 1e-10);
    }

    #[test]
    fn zero_rotation_keeps_phases() {
        let mut h = HaarSampler::new(33);
        for _ in 0..20 {
            let (_, bare) = split_lh(&h.su4(), (0, 1)).unwrap();
            let f = y_pullback(&bare, 0.0, 0.0).unwrap();
            assert!(phase_distance(&f.reconstruct(), &bare.reconstruct()) < 1e-10);
            assert!((f.beta_tilde.abs() - bare.beta.abs()).abs() < 1e-9);
            assert!((f.gamma_tilde.abs() - bare.gamma.abs()).abs() < 1e-9);
            assert_eq!(f.alpha, bare.alpha);
        }
    }

    #[test]
    fn pure_zz_block() {
        let bare = LHBareFactors { pair: (0, 1), alpha: 0.0, beta: 0.0, gamma: 0.4, interior: [M2::identity(); 2] };
        let f = y_pullback(&bare, PI / 2.0, PI / 2.0).unwrap();
        let target = kron2(&ry(PI / 2.0), &ry(PI / 2.0)) * bare.reconstruct();
        assert!(phase_distance(&f.reconstruct(), &target) < 1e-10);
    }

    #[test]
    fn random_pullbacks() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let mut h = HaarSampler::new(35);
        for _ in 0..500 {
            let bare = random_bare(&mut rng, &mut h);
            let (t1, t2) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
            let f = y_pullback(&bare, t1, t2).unwrap();
            let target = kron2(&ry(t1), &ry(t2)) * bare.reconstruct();
            assert!(phase_distance(&f.reconstruct(), &target) < 1e-10);
            assert_eq!(f.alpha, bare.alpha);
            assert!(f.beta_tilde > -FRAC_PI_4 && f.beta_tilde <= FRAC_PI_4);
            assert!(f.gamma_tilde > -FRAC_PI_4 && f.gamma_tilde <= FRAC_PI_4);
            // Parity bits act as X(x)X / Z(x)Z insertions.
            let [a0, a1] = f.a_gates();
            let [b0, b1] = f.b_gates();
            let flipped_x = f.reconstruct_with_parity(1 - f.parity_x, f.parity_z);
            let want_x = exp_pp(Axis::Z, f.gamma_tilde)
                * kron2(&a0, &a1)
                * exp_pp(Axis::X, f.beta_tilde)
                * pauli_parity(Axis::X)
                * kron2(&b0, &b1)
                * exp_pp(Axis::Z, f.alpha);
            assert!(phase_distance(&flipped_x, &want_x) < 1e-10);
            let flipped_z = f.reconstruct_with_parity(f.parity_x, 1 - f.parity_z);
            let want_z = exp_pp(Axis::Z, f.gamma_tilde)
                * pauli_parity(Axis::Z)
                * kron2(&a0, &a1)
                * exp_pp(Axis::X, f.beta_tilde)
                * kron2(&b0, &b1)
                * exp_pp(Axis::Z, f.alpha);
            assert!(phase_distance(&flipped_z, &want_z) < 1e-10);
        }
    }

    #[test]
    fn composition_restores_source() {
        let mut h = HaarSampler::new(36);
        let u = h.su4();
        let (push, bare) = split_lh(&u, (0, 1)).unwrap();
        let f = y_pullback(&bare, 0.0, 0.0).unwrap();
        assert!(phase_distance(&(kron2(&push[0], &push[1]) * f.reconstruct()), &u) < 1e-10);
    }
}
