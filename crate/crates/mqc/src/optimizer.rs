//! Compilation of SU(4)-layer circuits into single-qubit and MQ (ZZ) layers.
//!
//! Three modes:
//! - `naive3L`: Cartan per block, one MQ layer per canonical axis (3L layers).
//! - `fused`: LH decomposition per block; trailing single-qubit gates are
//!   pushed into the next layer and boundary ZZ phases fused (2L+1 layers).
//! - `fused+optimized`: as `fused`, plus R_Y rotations injected at every layer
//!   boundary and chosen to reduce the boundary nuclear norm.

use crate::cartan::{cartan_decompose, l1_phases, CartanError};
use crate::circuit_ir::{CircuitError, CircuitIR, CompiledCircuit};
use crate::lhdecomp::{lh_decompose, lh_l1, lh_phases, LHFactors};
use crate::linalg::{hadamard, kron2, rx, ry, M2, M4};
use crate::mqlayer::{nuclear_norm, nuclear_norm_edges, MQLayer, COUPLING_TOL};
use crate::pullback::{pullback_phases, split_lh, y_pullback, LHBareFactors, PullbackError};
use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompileMode {
    #[serde(rename = "naive3L")]
    Naive3L,
    #[serde(rename = "fused")]
    Fused,
    #[serde(rename = "fused+optimized")]
    FusedOptimized,
}

impl fmt::Display for CompileMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompileMode::Naive3L => "naive3L",
            CompileMode::Fused => "fused",
            CompileMode::FusedOptimized => "fused+optimized",
        })
    }
}

impl FromStr for CompileMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "naive3L" | "naive" => Ok(CompileMode::Naive3L),
            "fused" => Ok(CompileMode::Fused),
            "fused+optimized" | "optimized" => Ok(CompileMode::FusedOptimized),
            _ => Err(format!("unknown mode '{s}' (expected naive3L, fused or fused+optimized)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub mode: CompileMode,
    pub ry_grid_points: usize,
    pub refine_tolerance: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { mode: CompileMode::FusedOptimized, ry_grid_points: 24, refine_tolerance: 1e-8, sweeps: 2, seed: 0 }
    }
}

impl CompileOptions {
    pub fn with_mode(mode: CompileMode) -> Self {
        CompileOptions { mode, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        if self.ry_grid_points < 8 {
            return Err(CompileError::Options(format!("ry_grid_points must be >= 8, got {}", self.ry_grid_points)));
        }
        if self.refine_tolerance.is_nan() || self.refine_tolerance <= 0.0 {
            return Err(CompileError::Options(format!("refine_tolerance must be > 0, got {}", self.refine_tolerance)));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("layer {layer}, pair {pair:?}, {stage}: {message}")]
    Decomposition { layer: usize, pair: (usize, usize), stage: &'static str, message: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("invalid options: {0}")]
    Options(String),
}

fn ctx<E: fmt::Display>(layer: usize, pair: (usize, usize), stage: &'static str) -> impl Fn(E) -> CompileError {
    move |e| CompileError::Decomposition { layer, pair, stage, message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub mode: CompileMode,
    pub n_qubits: usize,
    pub layers: usize,
    pub mq_layers: usize,
    pub per_layer_nuc: Vec<f64>,
    pub total_nuc: f64,
    pub cartan_baseline_nuc: f64,
    pub ratio: f64,
    /// Set when the optimized result was worse than `fused` and was replaced by it.
    pub fallback_to_fused: bool,
    /// Layer-one blocks whose R_Y search missed the Cartan L1 bound.
    pub ry_bound_misses: usize,
    pub wall_time_s: f64,
}

/// Sum over blocks of the nuclear norm of the three disjoint Cartan pair couplings.
pub fn cartan_baseline_nuc(c: &CircuitIR) -> Result<f64, CompileError> {
    let mut total = 0.0;
    for (l, layer) in c.layers.iter().enumerate() {
        for b in &layer.blocks {
            let f = cartan_decompose(&b.u).map_err(ctx(l, b.pair, "cartan"))?;
            total += FRAC_2_PI * l1_phases(&f);
        }
    }
    Ok(total)
}

/// Compile in the mode given by `opts` and report nuclear norms.
pub fn compile(c: &CircuitIR, opts: &CompileOptions) -> Result<(CompiledCircuit, OptimizerReport), CompileError> {
    opts.validate()?;
    c.validate()?;
    let start = Instant::now();
    let mut fallback = false;
    let mut misses = 0;
    let out = match opts.mode {
        CompileMode::Naive3L => compile_naive(c)?,
        CompileMode::Fused => compile_fused(c)?,
        CompileMode::FusedOptimized => {
            let (opt, m) = compile_optimized_raw(c, opts)?;
            misses = m;
            let fused = compile_fused(c)?;
            if opt.total_nuc() > fused.total_nuc() + 1e-12 {
                fallback = true;
                fused
            } else {
                opt
            }
        }
    };
    let per_layer_nuc: Vec<f64> = out.mq_layers().map(nuclear_norm).collect();
    let total_nuc = per_layer_nuc.iter().sum();
    let baseline = cartan_baseline_nuc(c)?;
    let report = OptimizerReport {
        mode: opts.mode,
        n_qubits: c.n_qubits,
        layers: c.layers.len(),
        mq_layers: out.mq_count(),
        per_layer_nuc,
        total_nuc,
        cartan_baseline_nuc: baseline,
        ratio: if baseline > 0.0 { total_nuc / baseline } else { 0.0 },
        fallback_to_fused: fallback,
        ry_bound_misses: misses,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((out, report))
}

/// `compile` with the optimized mode forced.
pub fn compile_optimized(c: &CircuitIR, opts: &CompileOptions) -> Result<(CompiledCircuit, OptimizerReport), CompileError> {
    compile(c, &CompileOptions { mode: CompileMode::FusedOptimized, ..opts.clone() })
}

fn relabel(out: &mut CompiledCircuit, f: Vec<usize>) {
    if f.iter().enumerate().any(|(i, &x)| i != x) {
        out.final_permutation = Some(f);
    }
}

/// `V` with `V Z V^dag = Y`.
fn y_dressing() -> M2 {
    rx(-FRAC_PI_2)
}

/// Three MQ layers per SU(4) layer.
pub fn compile_naive(c: &CircuitIR) -> Result<CompiledCircuit, CompileError> {
    let (c, f) = c.absorb_permutations();
    let n = c.n_qubits;
    let (h, v) = (hadamard(), y_dressing());
    let mut out = CompiledCircuit::new(n);
    for (l, layer) in c.layers.iter().enumerate() {
        let facts =
            layer.blocks.par_iter().map(|b| cartan_decompose(&b.u).map_err(ctx(l, b.pair, "cartan"))).collect::<Result<Vec<_>, _>>()?;
        let pairs: Vec<(usize, usize)> = layer.blocks.iter().map(|b| b.pair).collect();
        let mut m = [MQLayer::new(n), MQLayer::new(n), MQLayer::new(n)];
        for (&(p, q), f) in pairs.iter().zip(&facts) {
            out.push_single(p, h * f.pre_gates[0]);
            out.push_single(q, h * f.pre_gates[1]);
            for (k, t) in f.thetas().into_iter().enumerate() {
                m[k].add(p, q, t).expect("validated pair");
            }
        }
        let [mx, my, mz] = m;
        out.push_mq(mx);
        for &(p, q) in &pairs {
            out.push_single(p, v.adjoint() * h);
            out.push_single(q, v.adjoint() * h);
        }
        out.push_mq(my);
        for &(p, q) in &pairs {
            out.push_single(p, v);
            out.push_single(q, v);
        }
        out.push_mq(mz);
        for (&(p, q), f) in pairs.iter().zip(&facts) {
            out.push_single(p, f.post_gates[0]);
            out.push_single(q, f.post_gates[1]);
        }
    }
    relabel(&mut out, f);
    Ok(out)
}

/// Conventional realization: three single-pair ZZ gates per block, applied block by block.
pub fn compile_sequential_tq(c: &CircuitIR) -> Result<CompiledCircuit, CompileError> {
    let (c, f) = c.absorb_permutations();
    let n = c.n_qubits;
    let (h, v) = (hadamard(), y_dressing());
    let mut out = CompiledCircuit::new(n);
    for (l, layer) in c.layers.iter().enumerate() {
        for b in &layer.blocks {
            let f = cartan_decompose(&b.u).map_err(ctx(l, b.pair, "cartan"))?;
            let (p, q) = b.pair;
            let gate = |t: f64| MQLayer::from_couplings(n, [(p, q, t)]).expect("validated pair");
            out.push_single(p, h * f.pre_gates[0]);
            out.push_single(q, h * f.pre_gates[1]);
            out.push_mq(gate(f.theta_xx));
            out.push_single(p, v.adjoint() * h);
            out.push_single(q, v.adjoint() * h);
            out.push_mq(gate(f.theta_yy));
            out.push_single(p, v);
            out.push_single(q, v);
            out.push_mq(gate(f.theta_zz));
            out.push_single(p, f.post_gates[0]);
            out.push_single(q, f.post_gates[1]);
        }
    }
    relabel(&mut out, f);
    Ok(out)
}

/// One block in LH or LH-RH form:
/// `e^{i gamma ZZ} (a_mid) e^{i beta XX} (b_in) e^{i alpha ZZ}`.
#[derive(Debug, Clone)]
struct BlockPlan {
    pair: (usize, usize),
    alpha: f64,
    b_in: [M2; 2],
    beta: f64,
    a_mid: [M2; 2],
    gamma: f64,
}

impl BlockPlan {
    fn from_bare(bare: &LHBareFactors) -> Self {
        BlockPlan {
            pair: bare.pair,
            alpha: bare.alpha,
            b_in: bare.interior,
            beta: bare.beta,
            a_mid: [M2::identity(); 2],
            gamma: bare.gamma,
        }
    }
}

struct Plan {
    n: usize,
    initial: Vec<Option<M2>>,
    layers: Vec<Vec<BlockPlan>>,
    /// Gates left on each qubit after the last MQ layer.
    pending: Vec<M2>,
}

fn assemble(plan: Plan) -> CompiledCircuit {
    let n = plan.n;
    let h = hadamard();
    let mut out = CompiledCircuit::new(n);
    for (q, g) in plan.initial.iter().enumerate() {
        if let Some(g) = g {
            out.push_single(q, *g);
        }
    }
    let mut boundary = MQLayer::new(n);
    for b in plan.layers.first().into_iter().flatten() {
        boundary.add(b.pair.0, b.pair.1, b.alpha).expect("validated pair");
    }
    out.push_mq(boundary);
    for (l, layer) in plan.layers.iter().enumerate() {
        let mut xx = MQLayer::new(n);
        for b in layer {
            let dress = if b.beta.abs() > COUPLING_TOL { h } else { M2::identity() };
            out.push_single(b.pair.0, dress * b.b_in[0]);
            out.push_single(b.pair.1, dress * b.b_in[1]);
            xx.add(b.pair.0, b.pair.1, b.beta).expect("validated pair");
        }
        out.push_mq(xx);
        let mut boundary = MQLayer::new(n);
        for b in layer {
            let dress = if b.beta.abs() > COUPLING_TOL { h } else { M2::identity() };
            out.push_single(b.pair.0, b.a_mid[0] * dress);
            out.push_single(b.pair.1, b.a_mid[1] * dress);
            boundary.add(b.pair.0, b.pair.1, b.gamma).expect("validated pair");
        }
        for b in plan.layers.get(l + 1).into_iter().flatten() {
            boundary.add(b.pair.0, b.pair.1, b.alpha).expect("validated pair");
        }
        out.push_mq(boundary);
    }
    for (q, g) in plan.pending.iter().enumerate() {
        if *g != M2::identity() {
            out.push_single(q, *g);
        }
    }
    out
}

/// Split every block of a layer after absorbing the pending gates in front of it.
fn split_layer(l: usize, blocks: &[crate::circuit_ir::SU4Block], pending: &[M2]) -> Result<Vec<([M2; 2], LHBareFactors)>, CompileError> {
    blocks
        .par_iter()
        .map(|b| {
            let (p, q) = b.pair;
            let u = b.u * kron2(&pending[p], &pending[q]);
            split_lh(&u, b.pair).map_err(ctx(l, b.pair, "lh"))
        })
        .collect()
}

/// LH fusion: 2L+1 MQ layers.
pub fn compile_fused(c: &CircuitIR) -> Result<CompiledCircuit, CompileError> {
    let (c, f) = c.absorb_permutations();
    let n = c.n_qubits;
    let mut pending = vec![M2::identity(); n];
    let mut layers = Vec::with_capacity(c.layers.len());
    for (l, layer) in c.layers.iter().enumerate() {
        let split = split_layer(l, &layer.blocks, &pending)?;
        let mut plans = Vec::with_capacity(split.len());
        for (a, bare) in split {
            pending[bare.pair.0] = a[0];
            pending[bare.pair.1] = a[1];
            plans.push(BlockPlan::from_bare(&bare));
        }
        layers.push(plans);
    }
    let mut out = assemble(Plan { n, initial: vec![None; n], layers, pending });
    relabel(&mut out, f);
    Ok(out)
}

struct Objective<'a> {
    f: &'a dyn Fn(&[f64]) -> f64,
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok((self.f)(p))
    }
}

/// Grid search over `[-pi/2, pi/2)^dim` followed by Nelder-Mead from the best cell.
fn minimize(f: &dyn Fn(&[f64]) -> f64, dim: usize, grid: usize, tol: f64) -> (Vec<f64>, f64) {
    let step = PI / grid as f64;
    let axis = |i: usize| -FRAC_PI_2 + step * i as f64;
    let mut best = (vec![0.0; dim], f64::INFINITY);
    let total = grid.pow(dim as u32);
    for k in 0..total {
        let x: Vec<f64> = (0..dim).map(|d| axis((k / grid.pow(d as u32)) % grid)).collect();
        let v = f(&x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let mut simplex = vec![best.0.clone()];
    for d in 0..dim {
        let mut x = best.0.clone();
        x[d] += 0.5 * step;
        simplex.push(x);
    }
    let refined = NelderMead::new(simplex)
        .with_sd_tolerance(tol * 1e-2)
        .ok()
        .and_then(|solver| Executor::new(Objective { f }, solver).configure(|s| s.max_iters(200)).run().ok())
        .and_then(|r| {
            let s = r.state();
            Some((s.get_best_param()?.clone(), s.get_best_cost()))
        });
    match refined {
        Some((x, v)) if v < best.1 => (x, v),
        _ => best,
    }
}

/// Result of [`optimize_block_ry`].
#[derive(Debug, Clone)]
pub struct RyOptimum {
    /// `(y0, y1)` with the block taken as `g (R_Y(y0) (x) R_Y(y1))`.
    pub y: [f64; 2],
    pub factors: LHFactors,
    /// LH L1 after rotation (radians).
    pub l1: f64,
    /// Cartan L1 of `g` (radians).
    pub cartan_l1: f64,
    /// False when the bound `l1 <= cartan_l1 + tolerance` was not reached.
    pub bound_met: bool,
}

fn lh_l1_rotated(g: &M4, y0: f64, y1: f64) -> f64 {
    match lh_phases(&(g * kron2(&ry(y0), &ry(y1)))) {
        Ok((ph, rest)) => ph.iter().map(|x| x.abs()).sum::<f64>() + rest.abs(),
        Err(_) => f64::INFINITY,
    }
}

/// R_Y pre-rotation minimizing the LH L1 of `g (R_Y(y0) (x) R_Y(y1))`.
pub fn optimize_block_ry(g: &M4, opts: &CompileOptions) -> Result<RyOptimum, CartanError> {
    let cartan_l1 = l1_phases(&cartan_decompose(g)?);
    let f = |x: &[f64]| lh_l1_rotated(g, x[0], x[1]);
    let (x, _) = minimize(&f, 2, opts.ry_grid_points, opts.refine_tolerance);
    let y = [x[0], x[1]];
    let factors = lh_decompose(&(g * kron2(&ry(y[0]), &ry(y[1]))))?;
    let l1 = lh_l1(&factors);
    Ok(RyOptimum { y, factors, l1, cartan_l1, bound_met: l1 <= cartan_l1 + opts.refine_tolerance })
}

/// Optimized compilation; returns the circuit and the number of R_Y bound misses.
fn compile_optimized_raw(c: &CircuitIR, opts: &CompileOptions) -> Result<(CompiledCircuit, usize), CompileError> {
    let (c, f) = c.absorb_permutations();
    let n = c.n_qubits;
    let big_l = c.layers.len();
    let mut initial = vec![None; n];
    let mut pending = vec![M2::identity(); n];
    let mut layers: Vec<Vec<BlockPlan>> = Vec::with_capacity(big_l);
    if big_l == 0 {
        let mut out = assemble(Plan { n, initial, layers, pending });
        relabel(&mut out, f);
        return Ok((out, 0));
    }

    // Layer one: pre-rotate with R_Y(psi) and emit R_Y(-psi) in front.
    let first = &c.layers[0];
    let opt = first
        .blocks
        .par_iter()
        .map(|b| optimize_block_ry(&b.u, opts).map_err(ctx(0, b.pair, "ry-search")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut misses = 0;
    let mut cur: Vec<([M2; 2], LHBareFactors)> = Vec::with_capacity(opt.len());
    for (b, o) in first.blocks.iter().zip(opt) {
        misses += usize::from(!o.bound_met);
        initial[b.pair.0] = Some(ry(-o.y[0]));
        initial[b.pair.1] = Some(ry(-o.y[1]));
        let u = b.u * kron2(&ry(o.y[0]), &ry(o.y[1]));
        cur.push(split_lh(&u, b.pair).map_err(ctx(0, b.pair, "lh"))?);
    }

    for l in 0..big_l {
        if l + 1 == big_l {
            let mut plans = Vec::new();
            for (a, bare) in &cur {
                pending[bare.pair.0] = a[0];
                pending[bare.pair.1] = a[1];
                plans.push(BlockPlan::from_bare(bare));
            }
            layers.push(plans);
            break;
        }
        let next = &c.layers[l + 1].blocks;
        let t = boundary_rotations(&cur, next, &pending, n, opts);
        let mut plans = Vec::with_capacity(cur.len());
        for (a, bare) in &cur {
            let (p, q) = bare.pair;
            let pb = y_pullback(bare, t[p], t[q]).map_err(|e: PullbackError| CompileError::Decomposition {
                layer: l,
                pair: bare.pair,
                stage: "y-pullback",
                message: e.to_string(),
            })?;
            pending[p] = a[0] * ry(-t[p]);
            pending[q] = a[1] * ry(-t[q]);
            plans.push(BlockPlan {
                pair: bare.pair,
                alpha: pb.alpha,
                b_in: pb.b_gates(),
                beta: pb.beta_tilde,
                a_mid: pb.a_gates(),
                gamma: pb.gamma_tilde,
            });
        }
        layers.push(plans);
        cur = split_layer(l + 1, next, &pending)?;
    }
    let mut out = assemble(Plan { n, initial, layers, pending });
    relabel(&mut out, f);
    Ok((out, misses))
}

/// Boundary state used by the coordinate descent over R_Y angles.
struct Boundary<'a> {
    cur: &'a [([M2; 2], LHBareFactors)],
    next: &'a [crate::circuit_ir::SU4Block],
    /// Gates in front of each layer-(l+1) qubit before the injected rotation.
    base: Vec<M2>,
    owner_cur: Vec<Option<usize>>,
    /// `(beta~, gamma~)` per current block.
    cur_phases: Vec<(f64, f64)>,
    /// `(alpha, beta, gamma)` per next block.
    next_phases: Vec<(f64, f64, f64)>,
}

impl Boundary<'_> {
    fn next_lh(&self, k: usize, t: &[f64]) -> (f64, f64, f64) {
        let b = &self.next[k];
        let (p, q) = b.pair;
        let u = b.u * kron2(&(self.base[p] * ry(-t[p])), &(self.base[q] * ry(-t[q])));
        match lh_phases(&u) {
            Ok(([a, b, g], _)) => (a, b, g),
            Err(_) => (f64::INFINITY, 0.0, 0.0),
        }
    }

    fn cur_pullback(&self, i: usize, t: &[f64]) -> (f64, f64) {
        let bare = &self.cur[i].1;
        pullback_phases(bare.gamma, bare.beta, t[bare.pair.0], t[bare.pair.1])
    }

    /// Objective for moving the rotations on the qubits of next block `k`.
    fn cost(&self, k: usize, t: &[f64]) -> (f64, Vec<(usize, (f64, f64))>, (f64, f64, f64)) {
        let (p, q) = self.next[k].pair;
        let mut touched: Vec<usize> = [self.owner_cur[p], self.owner_cur[q]].into_iter().flatten().collect();
        touched.dedup();
        let new_cur: Vec<(usize, (f64, f64))> = touched.iter().map(|&i| (i, self.cur_pullback(i, t))).collect();
        let new_next = self.next_lh(k, t);
        let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(self.cur.len() + self.next.len());
        let mut push = |a: usize, b: usize, t: f64| {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            match edges.iter_mut().find(|e| e.0 == a && e.1 == b) {
                Some(e) => e.2 += t,
                None => edges.push((a, b, t)),
            }
        };
        for (i, (_, bare)) in self.cur.iter().enumerate() {
            let g = new_cur.iter().find(|(j, _)| *j == i).map_or(self.cur_phases[i].1, |(_, ph)| ph.1);
            push(bare.pair.0, bare.pair.1, g);
        }
        for (j, b) in self.next.iter().enumerate() {
            let a = if j == k { new_next.0 } else { self.next_phases[j].0 };
            push(b.pair.0, b.pair.1, a);
        }
        let component = component_edges(&edges, p);
        let mut v = nuclear_norm_edges(&component);
        v += FRAC_2_PI * new_cur.iter().map(|(_, ph)| ph.0.abs()).sum::<f64>();
        v += FRAC_2_PI * (new_next.1.abs() + new_next.2.abs());
        (v, new_cur, new_next)
    }
}

/// Edges of the connected component containing `root`.
fn component_edges(edges: &[(usize, usize, f64)], root: usize) -> Vec<(usize, usize, f64)> {
    let live: Vec<&(usize, usize, f64)> = edges.iter().filter(|e| e.2.abs() > COUPLING_TOL).collect();
    let mut nodes = vec![root];
    let mut taken = vec![false; live.len()];
    let mut out = Vec::new();
    let mut i = 0;
    while i < nodes.len() {
        let x = nodes[i];
        for (k, e) in live.iter().enumerate() {
            if !taken[k] && (e.0 == x || e.1 == x) {
                taken[k] = true;
                out.push(**e);
                let y = if e.0 == x { e.1 } else { e.0 };
                if !nodes.contains(&y) {
                    nodes.push(y);
                }
            }
        }
        i += 1;
    }
    out
}

/// Coordinate descent over per-qubit R_Y angles at one layer boundary.
fn boundary_rotations(
    cur: &[([M2; 2], LHBareFactors)],
    next: &[crate::circuit_ir::SU4Block],
    pending: &[M2],
    n: usize,
    opts: &CompileOptions,
) -> Vec<f64> {
    let mut owner_cur = vec![None; n];
    let mut base = pending.to_vec();
    for (i, (a, bare)) in cur.iter().enumerate() {
        owner_cur[bare.pair.0] = Some(i);
        owner_cur[bare.pair.1] = Some(i);
        base[bare.pair.0] = a[0];
        base[bare.pair.1] = a[1];
    }
    let mut t = vec![0.0; n];
    let mut bd = Boundary { cur, next, base, owner_cur, cur_phases: Vec::new(), next_phases: Vec::new() };
    bd.cur_phases = (0..cur.len()).map(|i| bd.cur_pullback(i, &t)).collect();
    bd.next_phases = (0..next.len()).map(|k| bd.next_lh(k, &t)).collect();

    for _ in 0..opts.sweeps {
        for k in 0..next.len() {
            let (p, q) = next[k].pair;
            let movable: Vec<usize> = [p, q].into_iter().filter(|&j| bd.owner_cur[j].is_some()).collect();
            if movable.is_empty() {
                continue;
            }
            let (current, _, _) = bd.cost(k, &t);
            let trial = |x: &[f64]| {
                let mut tt = t.clone();
                for (j, v) in movable.iter().zip(x) {
                    tt[*j] = *v;
                }
                tt
            };
            let f = |x: &[f64]| bd.cost(k, &trial(x)).0;
            let (x, v) = minimize(&f, movable.len(), opts.ry_grid_points, opts.refine_tolerance);
            if v < current - 1e-12 {
                t = trial(&x);
                let (_, new_cur, new_next) = bd.cost(k, &t);
                for (i, ph) in new_cur {
                    bd.cur_phases[i] = ph;
                }
                bd.next_phases[k] = new_next;
            }
        }
    }
    t
}
