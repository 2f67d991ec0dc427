//! Left-handed (LH) and right-handed (RH) decompositions.
//!
//! LH form: `U = e^{i phase} (A0 (x) A1) e^{i gamma ZZ} e^{i beta XX} (B0 (x) B1) e^{i alpha ZZ}`,
//! where `alpha = xi0` zeroes the Cartan volume of `U e^{-i xi0 ZZ}`.

use crate::cartan::{cartan_decompose, cartan_phases_unchecked, cartan_volume_su4, l1_phases, CartanError, CartanFactors};
use crate::linalg::{check_unitary4, exp_pp, hadamard, kron2, magic, rz, to_su4, Axis, C64, M2, M4};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

/// `v(xi) = CV(U e^{-i xi ZZ}) = sign * a * sin(2 (xi - xi0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CVSinusoid {
    /// `a(U) >= 0`.
    pub a_of_u: f64,
    /// Slope sign at the root (`+1` or `-1`).
    pub sign: f64,
    /// Root in `(-pi/4, pi/4]`.
    pub xi0: f64,
    pub a_r: f64,
    pub a_i: f64,
    pub b_r: f64,
    pub b_i: f64,
    /// `a(U) < 1e-12`: `v` vanishes identically and `xi0 = 0`.
    pub degenerate: bool,
}

impl CVSinusoid {
    pub fn eval(&self, xi: f64) -> f64 {
        self.sign * self.a_of_u * (2.0 * (xi - self.xi0)).sin()
    }
}

pub const DEGENERATE_AMPLITUDE: f64 = 1e-12;

fn fold_quarter(x: f64) -> f64 {
    let k = ((x - FRAC_PI_4) / FRAC_PI_2).ceil();
    x - k * FRAC_PI_2
}

fn cv_shifted(us: &M4, xi: f64) -> f64 {
    cartan_volume_su4(&(us * exp_pp(Axis::Z, -xi)))
}

/// Closed-form sinusoid of the Cartan volume along `U e^{-i xi ZZ}`.
pub fn cv_sinusoid(u: &M4) -> Result<CVSinusoid, CartanError> {
    check_unitary4(u)?;
    Ok(cv_sinusoid_unchecked(u))
}

fn cv_sinusoid_unchecked(u: &M4) -> CVSinusoid {
    let us = to_su4(u);
    let m = magic();
    let up = m.adjoint() * us * m;
    let col_sq = |j: usize| (0..4).map(|r| up[(r, j)] * up[(r, j)]).sum::<C64>();
    let a = col_sq(0) + col_sq(3);
    let b = col_sq(1) + col_sq(2);
    // v(xi) = (A cos 2xi - B sin 2xi) / 4
    let big_a = a.im + b.im;
    let big_b = a.re - b.re;
    let amp = 0.25 * big_a.hypot(big_b);
    let mut s =
        CVSinusoid { a_of_u: amp, sign: 1.0, xi0: 0.0, a_r: a.re, a_i: a.im, b_r: b.re, b_i: b.im, degenerate: amp < DEGENERATE_AMPLITUDE };
    if s.degenerate {
        return s;
    }
    let delta = big_b.atan2(big_a);
    let mut xi0 = fold_quarter(FRAC_PI_4 - delta / 2.0);
    let signed = 0.25 * (-big_a * (2.0 * xi0).sin() - big_b * (2.0 * xi0).cos());
    // One guarded Newton step against the trace formula.
    let v = cv_shifted(&us, xi0);
    if v.abs() > 1e-12 {
        let step = v / (2.0 * signed);
        if step.abs() < 1e-3 {
            xi0 = fold_quarter(xi0 - step);
        }
    }
    s.xi0 = xi0;
    s.sign = signed.signum();
    s
}

/// LH factors of a two-qubit unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct LHFactors {
    /// Leading ZZ phase `xi0` (applied first).
    pub alpha: f64,
    /// Cartan factors of `U e^{-i alpha ZZ}`; `theta_zz` is the vanishing phase.
    pub residual: CartanFactors,
    /// Trailing ZZ phase (the larger residual phase).
    pub gamma: f64,
    /// Middle XX phase (the smaller residual phase).
    pub beta: f64,
    /// Final single-qubit gates `(A0, A1)`.
    pub a_gates: [M2; 2],
    /// Interior single-qubit gates `(B0, B1)` between the leading ZZ and the XX phase.
    pub b_gates: [M2; 2],
    pub global_phase: f64,
    pub degenerate: bool,
}

/// Single-qubit Clifford `w` with `w X w^dag = Z`, `w Y w^dag = X`.
pub(crate) fn cycle_clifford() -> M2 {
    // (H S^dag)^dag maps X -> Z, Y -> X, Z -> Y up to phase.
    let sdg = rz(-FRAC_PI_2);
    (hadamard() * sdg).adjoint()
}

impl LHFactors {
    /// `(A0 (x) A1) e^{i gamma ZZ} e^{i beta XX} (B0 (x) B1) e^{i alpha ZZ}` times the global phase.
    pub fn reconstruct(&self) -> M4 {
        kron2(&self.a_gates[0], &self.a_gates[1]) * self.bare_matrix() * C64::from_polar(1.0, self.global_phase)
    }

    /// `e^{i gamma ZZ} e^{i beta XX} (B0 (x) B1) e^{i alpha ZZ}`.
    pub fn bare_matrix(&self) -> M4 {
        exp_pp(Axis::Z, self.gamma) * exp_pp(Axis::X, self.beta) * kron2(&self.b_gates[0], &self.b_gates[1]) * exp_pp(Axis::Z, self.alpha)
    }

    /// `|alpha| + |beta| + |gamma|`.
    pub fn l1(&self) -> f64 {
        self.alpha.abs() + self.beta.abs() + self.gamma.abs()
    }

    /// The Cartan-form reconstruction `Cartan(U e^{-i alpha ZZ}) e^{i alpha ZZ}`.
    pub fn reconstruct_cartan_form(&self) -> M4 {
        self.residual.reconstruct() * exp_pp(Axis::Z, self.alpha)
    }
}

/// LH decomposition: leading pure-ZZ gate and two residual entanglement phases.
pub fn lh_decompose(u: &M4) -> Result<LHFactors, CartanError> {
    let s = cv_sinusoid(u)?;
    let alpha = s.xi0;
    let w = u * exp_pp(Axis::Z, -alpha);
    let residual = cartan_decompose(&w)?;
    // exp(i(a XX + b YY)) = (w^dag (x) w^dag) e^{i a ZZ} e^{i b XX} (w (x) w)
    let cw = cycle_clifford();
    let cwd = cw.adjoint();
    let a_gates = [residual.post_gates[0] * cwd, residual.post_gates[1] * cwd];
    let b_gates = [cw * residual.pre_gates[0], cw * residual.pre_gates[1]];
    let mut f = LHFactors {
        alpha,
        gamma: residual.theta_xx,
        beta: residual.theta_yy,
        residual,
        a_gates,
        b_gates,
        global_phase: 0.0,
        degenerate: s.degenerate,
    };
    let r = f.reconstruct();
    f.global_phase = (r.adjoint() * u).trace().arg();
    Ok(f)
}

/// `(alpha, beta, gamma)` of [`lh_decompose`] and the vanishing residual phase, without the gates.
pub fn lh_phases(u: &M4) -> Result<([f64; 3], f64), CartanError> {
    check_unitary4(u)?;
    let alpha = cv_sinusoid_unchecked(u).xi0;
    let [xx, yy, zz] = cartan_phases_unchecked(&(u * exp_pp(Axis::Z, -alpha)))?;
    Ok(([alpha, yy, xx], zz))
}

/// LH L1 norm including the leading phase.
pub fn lh_l1(f: &LHFactors) -> f64 {
    f.alpha.abs() + l1_phases(&f.residual)
}

/// Right-handed factors: `U = RH` with a trailing pure-ZZ gate, from `LH(U^dag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RHFactors {
    /// LH factors of `U^dagger`.
    pub lh_of_adjoint: LHFactors,
}

impl RHFactors {
    /// Trailing ZZ phase (applied last).
    pub fn trailing_zz_phase(&self) -> f64 {
        -self.lh_of_adjoint.alpha
    }

    /// `e^{-i alpha ZZ} (B0^dag (x) B1^dag) e^{-i beta XX} e^{-i gamma ZZ} (A0^dag (x) A1^dag)`.
    pub fn reconstruct(&self) -> M4 {
        self.lh_of_adjoint.reconstruct().adjoint()
    }
}

pub fn rh_decompose(u: &M4) -> Result<RHFactors, CartanError> {
    Ok(RHFactors { lh_of_adjoint: lh_decompose(&u.adjoint())? })
}
