//! Small dense complex-matrix kernel: Paulis, rotations, Kronecker products,
//! the magic basis, Euler factorizations and phase-insensitive comparison.
//!
//! Conventions used across the crate:
//! - single-qubit rotations are `R_a(t) = exp(-i t P_a / 2)`;
//! - correlated rotations are `exp(+i theta P_a (x) P_a)`;
//! - qubit 0 is the leftmost Kronecker factor (most significant bit).

use nalgebra::{allocator::Allocator, DMatrix, DefaultAllocator, Dim, Matrix, Matrix2, Matrix3, Matrix4, Storage};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

pub type C64 = Complex64;
pub type M2 = Matrix2<C64>;
pub type M4 = Matrix4<C64>;
/// Dense matrix of arbitrary size (full-circuit unitaries).
pub type ComplexMatrix = DMatrix<C64>;

/// Tolerance for input unitarity validation.
pub const UNITARY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("matrix is not a tensor product of single-qubit gates (residual {residual:.3e})")]
    NotLocal { residual: f64 },
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn i2() -> M2 {
    M2::identity()
}
pub fn pauli_x() -> M2 {
    M2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.))
}
pub fn pauli_y() -> M2 {
    M2::new(c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.))
}
pub fn pauli_z() -> M2 {
    M2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.))
}
pub fn hadamard() -> M2 {
    let s = c(FRAC_1_SQRT_2, 0.);
    M2::new(s, s, s, -s)
}

/// Rotation axis / Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> M2 {
        match self {
            Axis::X => pauli_x(),
            Axis::Y => pauli_y(),
            Axis::Z => pauli_z(),
        }
    }
    fn index(self) -> usize {
        self as usize
    }
}

/// `R_a(t) = exp(-i t P_a / 2)`.
pub fn rot(axis: Axis, t: f64) -> M2 {
    let (s, co) = (t / 2.0).sin_cos();
    M2::identity() * c(co, 0.) - axis.pauli() * c(0., s)
}
pub fn rx(t: f64) -> M2 {
    rot(Axis::X, t)
}
pub fn ry(t: f64) -> M2 {
    rot(Axis::Y, t)
}
pub fn rz(t: f64) -> M2 {
    rot(Axis::Z, t)
}

pub fn kron2(a: &M2, b: &M2) -> M4 {
    M4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// Kronecker product of arbitrary dense matrices.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn to_dense<R: Dim, Cc: Dim, S: Storage<C64, R, Cc>>(m: &Matrix<C64, R, Cc, S>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |r, col| m[(r, col)])
}

/// `P (x) P` for a Pauli axis.
pub fn pauli_pair(axis: Axis) -> M4 {
    let p = axis.pauli();
    kron2(&p, &p)
}

/// `exp(+i theta P (x) P)`; uses `(P (x) P)^2 = I`.
pub fn exp_pp(axis: Axis, theta: f64) -> M4 {
    let (s, co) = theta.sin_cos();
    M4::identity() * c(co, 0.) + pauli_pair(axis) * c(0., s)
}

/// `exp(i (a XX + b YY + c ZZ))`.
pub fn canonical_gate(a: f64, b: f64, cc: f64) -> M4 {
    exp_pp(Axis::X, a) * exp_pp(Axis::Y, b) * exp_pp(Axis::Z, cc)
}

/// The magic-basis change of basis `M`.
pub fn magic() -> M4 {
    let s = FRAC_1_SQRT_2;
    let o = c(0., 0.);
    let r = c(s, 0.);
    let i = c(0., s);
    M4::new(r, o, o, i, o, i, r, o, o, i, -r, o, r, o, o, -i)
}

pub fn unitarity_residual<R: Dim, Cc: Dim, S: Storage<C64, R, Cc>>(m: &Matrix<C64, R, Cc, S>) -> f64
where
    DefaultAllocator: Allocator<Cc, Cc> + Allocator<Cc, R>,
{
    let prod = m.adjoint() * m;
    let mut worst = 0.0f64;
    for r in 0..prod.nrows() {
        for col in 0..prod.ncols() {
            let target = if r == col { 1.0 } else { 0.0 };
            worst = worst.max((prod[(r, col)] - c(target, 0.)).norm());
        }
    }
    worst
}

pub fn check_unitary4(u: &M4) -> Result<(), LinalgError> {
    let residual = unitarity_residual(u);
    if residual >= UNITARY_TOL || !residual.is_finite() {
        return Err(LinalgError::NotUnitary { residual });
    }
    Ok(())
}

/// `M^dagger u M`.
pub fn to_magic_basis(u: &M4) -> Result<M4, LinalgError> {
    check_unitary4(u)?;
    let m = magic();
    Ok(m.adjoint() * u * m)
}

/// `M u_mb M^dagger`.
pub fn from_magic_basis(u_mb: &M4) -> M4 {
    let m = magic();
    m * u_mb * m.adjoint()
}

/// Divide by the principal fourth root of the determinant.
pub fn to_su4(u: &M4) -> M4 {
    let d = u.determinant();
    u / d.powf(0.25)
}

/// Divide by the principal square root of the determinant.
pub fn to_su2(u: &M2) -> M2 {
    let d = u.determinant();
    u / d.sqrt()
}

/// `min_phi || u - e^{i phi} v ||_F`, with the optimal phase `arg Tr(v^dagger u)`.
pub fn phase_distance<R: Dim, Cc: Dim, S1, S2>(u: &Matrix<C64, R, Cc, S1>, v: &Matrix<C64, R, Cc, S2>) -> f64
where
    S1: Storage<C64, R, Cc>,
    S2: Storage<C64, R, Cc>,
{
    assert_eq!(u.shape(), v.shape(), "phase_distance: shape mismatch");
    let mut tr = c(0., 0.);
    for (a, b) in u.iter().zip(v.iter()) {
        tr += b.conj() * a;
    }
    let ph = if tr.norm() > 0.0 { tr / tr.norm() } else { c(1., 0.) };
    u.iter().zip(v.iter()).map(|(a, b)| (a - ph * b).norm_sqr()).sum::<f64>().sqrt()
}

/// Factor a 4x4 local unitary into `A (x) B` with `A, B` in SU(2).
///
/// Returns `(A, B, phase)` with `L = e^{i phase} A (x) B`.
pub fn factor_local(l: &M4) -> Result<(M2, M2, f64), LinalgError> {
    let block = |i: usize, j: usize| l.fixed_view::<2, 2>(2 * i, 2 * j).into_owned();
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..2 {
        for j in 0..2 {
            let n = block(i, j).norm();
            if n > best {
                best = n;
                bi = i;
                bj = j;
            }
        }
    }
    let b = to_su2(&block(bi, bj));
    let mut a = M2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            a[(i, j)] = (b.adjoint() * block(i, j)).trace() / c(2., 0.);
        }
    }
    let a = to_su2(&a);
    let prod = kron2(&a, &b);
    let tr = (prod.adjoint() * l).trace();
    let phase = tr.arg();
    let residual = (l - prod * C64::from_polar(1.0, phase)).norm();
    if residual > 1e-8 || !residual.is_finite() {
        return Err(LinalgError::NotLocal { residual });
    }
    Ok((a, b, phase))
}

/// Euler angles with reconstruction `R_{a3}(t3) R_{a2}(t2) R_{a1}(t1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    /// Axes in application order `(a1, a2, a3)`.
    pub axis_order: [Axis; 3],
    /// Angles `(t1, t2, t3)` in radians.
    pub angles: [f64; 3],
    /// Set when the middle angle sits at a gimbal singularity; then `t3 = 0`.
    pub degenerate: bool,
}

impl EulerAngles {
    pub fn reconstruct(&self) -> M2 {
        let [a1, a2, a3] = self.axis_order;
        let [t1, t2, t3] = self.angles;
        rot(a3, t3) * rot(a2, t2) * rot(a1, t1)
    }
}

/// Rotation angle that counts as gimbal-degenerate.
pub const GIMBAL_TOL: f64 = 1e-9;

/// SO(3) image of `g`: `R_ij = Tr(s_i g s_j g^dagger) / 2`.
fn so3(g: &M2) -> Matrix3<f64> {
    let p = [pauli_x(), pauli_y(), pauli_z()];
    let gd = g.adjoint();
    Matrix3::from_fn(|i, j| 0.5 * (p[i] * g * p[j] * gd).trace().re)
}

fn wrap_pi(t: f64) -> f64 {
    let mut x = t % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Signed permutation `Q` with `Q e_src[k] = sign_k e_dst[k]`, `det Q = +1`.
/// Returns `Q` and the sign applied to the last axis.
fn axis_map(src: [Axis; 3], dst: [Axis; 3]) -> (Matrix3<f64>, f64) {
    let mut q = Matrix3::zeros();
    for k in 0..3 {
        q[(dst[k].index(), src[k].index())] = 1.0;
    }
    let s = q.determinant();
    if s < 0.0 {
        q[(dst[2].index(), src[2].index())] = -1.0;
    }
    (q, s.signum())
}

/// Euler factorization of `g in SU(2)` (any global phase is ignored).
///
/// Proper orders `(A, B, A)` return the middle angle in `[0, pi]`; Tait-Bryan
/// orders return it in `[-pi/2, pi/2]`. Outer angles lie in `(-pi, pi]`.
/// At a gimbal singularity the third angle is folded into the first.
///
/// # Panics
/// If two adjacent axes coincide.
pub fn euler_decompose(g: &M2, axis_order: [Axis; 3]) -> EulerAngles {
    let [a1, a2, a3] = axis_order;
    assert!(a1 != a2 && a2 != a3, "euler_decompose: adjacent axes must differ");
    let r = so3(g);
    if a1 == a3 {
        // Conjugate to Z-Y-Z: a1 -> Z, a2 -> Y, third axis -> +-X.
        let third = [Axis::X, Axis::Y, Axis::Z].into_iter().find(|&x| x != a1 && x != a2).unwrap();
        let (q, _) = axis_map([a1, a2, third], [Axis::Z, Axis::Y, Axis::X]);
        let r = q * r * q.transpose();
        let beta = (r[(0, 2)].hypot(r[(1, 2)])).atan2(r[(2, 2)]);
        let (t1, t3, degenerate);
        if beta < GIMBAL_TOL {
            t1 = r[(1, 0)].atan2(r[(0, 0)]);
            t3 = 0.0;
            degenerate = true;
        } else if PI - beta < GIMBAL_TOL {
            t1 = r[(0, 1)].atan2(-r[(0, 0)]);
            t3 = 0.0;
            degenerate = true;
        } else {
            t3 = r[(1, 2)].atan2(r[(0, 2)]);
            t1 = r[(2, 1)].atan2(-r[(2, 0)]);
            degenerate = false;
        }
        EulerAngles { axis_order, angles: [wrap_pi(t1), beta, wrap_pi(t3)], degenerate }
    } else {
        // Conjugate to X-Y-Z application order: R = Rz(psi) Ry(theta) Rx(phi).
        let (q, s) = axis_map([a1, a2, a3], [Axis::X, Axis::Y, Axis::Z]);
        let r = q * r * q.transpose();
        let theta = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        let (phi, psi, degenerate);
        if theta.cos() < GIMBAL_TOL {
            phi = (-r[(1, 2)]).atan2(r[(1, 1)]);
            psi = 0.0;
            degenerate = true;
        } else {
            phi = r[(2, 1)].atan2(r[(2, 2)]);
            psi = r[(1, 0)].atan2(r[(0, 0)]);
            degenerate = false;
        }
        EulerAngles { axis_order, angles: [wrap_pi(phi), theta, wrap_pi(s * psi)], degenerate }
    }
}
