//! Statevector simulation with Pauli-trajectory noise, heavy-output analysis
//! and quantum-volume pass/fail decisions.

use crate::circuit_ir::{generate_qv_circuit, CircuitError, CircuitIR, CompiledCircuit, CompiledOp};
use crate::linalg::{C64, M2, M4};
use crate::mqlayer::MQLayer;
use crate::noise::{NoiseKind, NoiseModel};
use crate::optimizer::{compile, compile_sequential_tq, CompileError, CompileMode, CompileOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const MAX_SIM_QUBITS: usize = 14;
pub const PASS_THRESHOLD: f64 = 2.0 / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("qubit index {qubit} out of range for {n} qubits")]
    IndexOutOfRange { qubit: usize, n: usize },
    #[error("simulation limited to {MAX_SIM_QUBITS} qubits, got {0}")]
    TooLarge(usize),
    #[error("register mismatch: state has {state} qubits, layer has {layer}")]
    RegisterMismatch { state: usize, layer: usize },
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// In-place amplitude kernels; qubit `q` is bit `n-1-q` of the basis index.
pub mod kernels {
    use super::{C64, M2, M4};

    pub fn apply_1q(amps: &mut [C64], n: usize, q: usize, g: &M2) {
        let bit = 1usize << (n - 1 - q);
        let (g00, g01, g10, g11) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
        let dim = amps.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + bit {
                let (a, b) = (amps[i], amps[i | bit]);
                amps[i] = g00 * a + g01 * b;
                amps[i | bit] = g10 * a + g11 * b;
            }
            base += 2 * bit;
        }
    }

    /// `u` acts with its first tensor factor on `q1`.
    pub fn apply_2q(amps: &mut [C64], n: usize, q1: usize, q2: usize, u: &M4) {
        let b1 = 1usize << (n - 1 - q1);
        let b2 = 1usize << (n - 1 - q2);
        for i in 0..amps.len() {
            if i & (b1 | b2) != 0 {
                continue;
            }
            let idx = [i, i | b2, i | b1, i | b1 | b2];
            let v = idx.map(|k| amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                amps[k] = u[(r, 0)] * v[0] + u[(r, 1)] * v[1] + u[(r, 2)] * v[2] + u[(r, 3)] * v[3];
            }
        }
    }

    /// Multiply amplitude `k` by `exp(i phases[k])`.
    pub fn apply_phases(amps: &mut [C64], phases: &[f64]) {
        for (a, &p) in amps.iter_mut().zip(phases) {
            *a *= C64::from_polar(1.0, p);
        }
    }

    pub fn apply_factors(amps: &mut [C64], factors: &[C64]) {
        for (a, f) in amps.iter_mut().zip(factors) {
            *a *= f;
        }
    }

    /// `exp(i theta Z_a Z_b)` without a phase table.
    pub fn apply_zz(amps: &mut [C64], n: usize, a: usize, b: usize, theta: f64) {
        let (sa, sb) = (n - 1 - a, n - 1 - b);
        let (even, odd) = (C64::from_polar(1.0, theta), C64::from_polar(1.0, -theta));
        for (i, x) in amps.iter_mut().enumerate() {
            *x *= if ((i >> sa) ^ (i >> sb)) & 1 == 0 { even } else { odd };
        }
    }

    /// Pauli `which` (1 = X, 2 = Y, 3 = Z) on qubit `q`.
    pub fn apply_pauli(amps: &mut [C64], n: usize, q: usize, which: u8) {
        let bit = 1usize << (n - 1 - q);
        let i_unit = C64::new(0.0, 1.0);
        for i in 0..amps.len() {
            if i & bit != 0 {
                continue;
            }
            let j = i | bit;
            match which {
                1 => amps.swap(i, j),
                2 => {
                    let (a, b) = (amps[i], amps[j]);
                    amps[i] = -i_unit * b;
                    amps[j] = i_unit * a;
                }
                _ => amps[j] = -amps[j],
            }
        }
    }

    /// Move the content of wire `i` to wire `perm[i]`.
    pub fn permute(amps: &[C64], n: usize, perm: &[usize]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); amps.len()];
        for (k, a) in amps.iter().enumerate() {
            let mut dst = 0;
            for (i, &p) in perm.iter().enumerate() {
                let bit = (k >> (n - 1 - i)) & 1;
                dst |= bit << (n - 1 - p);
            }
            out[dst] = *a;
        }
        out
    }
}

/// A gate accepted by [`StateVector::apply_gate`].
#[derive(Debug, Clone, Copy)]
pub enum Gate<'a> {
    Single(usize, &'a M2),
    Pair(usize, usize, &'a M4),
    Mq(&'a MQLayer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amps: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn new(n_qubits: usize) -> Result<Self, SimError> {
        if n_qubits > MAX_SIM_QUBITS {
            return Err(SimError::TooLarge(n_qubits));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    fn check(&self, q: usize) -> Result<(), SimError> {
        if q >= self.n_qubits {
            Err(SimError::IndexOutOfRange { qubit: q, n: self.n_qubits })
        } else {
            Ok(())
        }
    }

    pub fn apply_gate(&mut self, gate: Gate<'_>) -> Result<(), SimError> {
        let n = self.n_qubits;
        match gate {
            Gate::Single(q, g) => {
                self.check(q)?;
                kernels::apply_1q(&mut self.amps, n, q, g);
            }
            Gate::Pair(a, b, u) => {
                self.check(a)?;
                self.check(b)?;
                if a == b {
                    return Err(SimError::IndexOutOfRange { qubit: b, n });
                }
                kernels::apply_2q(&mut self.amps, n, a, b, u);
            }
            Gate::Mq(layer) => {
                if layer.n_qubits != n {
                    return Err(SimError::RegisterMismatch { state: n, layer: layer.n_qubits });
                }
                for &(a, b, t) in layer.couplings() {
                    kernels::apply_zz(&mut self.amps, n, a, b, t);
                }
            }
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Bitstrings with probability strictly above the median.
pub fn heavy_set(probs: &[f64]) -> Vec<bool> {
    let mut sorted = probs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m.is_multiple_of(2) { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) } else { sorted[m / 2] };
    probs.iter().map(|&p| p > median).collect()
}

/// One simulation step of a compiled program.
#[derive(Debug, Clone)]
enum Step {
    Singles(Vec<(usize, M2)>),
    /// Diagonal factors for wide layers, direct ZZ updates for narrow ones.
    Mq {
        table: Option<Vec<C64>>,
        couplings: Vec<(usize, usize, f64)>,
        layer: usize,
    },
    Permute(Vec<usize>),
}

/// A compiled circuit prepared for repeated trajectory sampling.
#[derive(Debug, Clone)]
pub struct Program {
    n: usize,
    steps: Vec<Step>,
    layers: Vec<MQLayer>,
}

impl Program {
    pub fn new(c: &CompiledCircuit) -> Result<Self, SimError> {
        let n = c.n_qubits;
        if n > MAX_SIM_QUBITS {
            return Err(SimError::TooLarge(n));
        }
        let mut steps = Vec::new();
        let mut layers = Vec::new();
        for op in &c.ops {
            match op {
                CompiledOp::Single(s) => {
                    let g: Vec<(usize, M2)> = s.gates.iter().enumerate().filter_map(|(q, g)| g.map(|g| (q, g))).collect();
                    if !g.is_empty() {
                        steps.push(Step::Singles(g));
                    }
                }
                CompiledOp::Mq(m) => {
                    let couplings: Vec<_> = m.couplings().iter().copied().filter(|x| x.2 != 0.0).collect();
                    let table = (couplings.len() > 2).then(|| m.phase_vector().into_iter().map(|p| C64::from_polar(1.0, p)).collect());
                    steps.push(Step::Mq { table, couplings, layer: layers.len() });
                    layers.push(m.clone());
                }
            }
        }
        if let Some(p) = &c.final_permutation {
            steps.push(Step::Permute(p.clone()));
        }
        Ok(Program { n, steps, layers })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn mq_layers(&self) -> &[MQLayer] {
        &self.layers
    }

    fn apply_step(&self, amps: &mut Vec<C64>, k: usize) {
        let n = self.n;
        match &self.steps[k] {
            Step::Singles(g) => {
                for (q, u) in g {
                    kernels::apply_1q(amps, n, *q, u);
                }
            }
            Step::Mq { table: Some(t), .. } => kernels::apply_factors(amps, t),
            Step::Mq { table: None, couplings, .. } => {
                for &(a, b, t) in couplings {
                    kernels::apply_zz(amps, n, a, b, t);
                }
            }
            Step::Permute(p) => *amps = kernels::permute(amps, n, p),
        }
    }

    /// Noiseless final state.
    pub fn run(&self) -> StateVector {
        let mut amps = StateVector::new(self.n).expect("checked size").amps;
        for k in 0..self.steps.len() {
            self.apply_step(&mut amps, k);
        }
        StateVector { n_qubits: self.n, amps }
    }
}

/// Noise site: a Pauli injection point in front of an MQ layer.
#[derive(Debug, Clone, Copy)]
struct Site {
    step: usize,
    qubit: usize,
    prob: f64,
}

/// A program with its ideal output analysis and cached prefix states.
#[derive(Debug, Clone)]
pub struct PreparedCircuit {
    program: Program,
    /// State in front of every MQ step (indexed by step).
    prefix: Vec<Option<Vec<C64>>>,
    ideal_cdf: Vec<f64>,
    heavy: Vec<bool>,
    /// Ideal probability mass of the heavy set.
    pub ideal_hop: f64,
}

impl PreparedCircuit {
    pub fn new(c: &CompiledCircuit) -> Result<Self, SimError> {
        let program = Program::new(c)?;
        let mut amps = StateVector::new(program.n)?.amps;
        let mut prefix = vec![None; program.steps.len()];
        for k in 0..program.steps.len() {
            if matches!(program.steps[k], Step::Mq { .. }) {
                prefix[k] = Some(amps.clone());
            }
            program.apply_step(&mut amps, k);
        }
        let probs: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
        let heavy = heavy_set(&probs);
        let ideal_hop = probs.iter().zip(&heavy).filter(|(_, &h)| h).map(|(p, _)| p).sum();
        let mut acc = 0.0;
        let ideal_cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(PreparedCircuit { program, prefix, ideal_cdf, heavy, ideal_hop })
    }

    pub fn heavy(&self) -> &[bool] {
        &self.heavy
    }

    fn sites(&self, noise: &NoiseModel) -> Vec<Site> {
        let mut out = Vec::new();
        if noise.kind == NoiseKind::None {
            return out;
        }
        for (k, s) in self.program.steps.iter().enumerate() {
            if let Step::Mq { layer, .. } = s {
                let probs = noise.probabilities(&self.program.layers[*layer]);
                let active = self.program.layers[*layer].participants();
                for (q, p) in probs.into_iter().enumerate() {
                    if active[q] {
                        out.push(Site { step: k, qubit: q, prob: p });
                    }
                }
            }
        }
        out
    }

    /// Number of heavy outcomes over `shots` noisy trajectories.
    ///
    /// Random numbers depend only on `(seed, shot)` and the site layout, so
    /// runs at different noise strengths are coupled.
    pub fn heavy_count(&self, noise: &NoiseModel, shots: usize, seed: u64) -> usize {
        let sites = self.sites(noise);
        let n = self.program.n;
        let mut heavy = 0;
        let mut errors: Vec<(usize, usize, u8)> = Vec::new();
        for shot in 0..shots {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, shot as u64));
            errors.clear();
            for s in &sites {
                let u: f64 = rng.random();
                if u < s.prob {
                    let which = match noise.kind {
                        NoiseKind::Dephasing => 3,
                        _ => 1 + ((3.0 * u / s.prob) as u8).min(2),
                    };
                    errors.push((s.step, s.qubit, which));
                }
            }
            let r: f64 = rng.random();
            let outcome = if errors.is_empty() {
                self.ideal_cdf.partition_point(|&c| c <= r).min(self.ideal_cdf.len() - 1)
            } else {
                let first = errors[0].0;
                let mut amps = self.prefix[first].clone().expect("MQ step has a prefix");
                let mut e = 0;
                for k in first..self.program.steps.len() {
                    while e < errors.len() && errors[e].0 == k {
                        kernels::apply_pauli(&mut amps, n, errors[e].1, errors[e].2);
                        e += 1;
                    }
                    self.program.apply_step(&mut amps, k);
                }
                sample(&amps, r)
            };
            heavy += usize::from(self.heavy[outcome]);
        }
        heavy
    }
}

fn sample(amps: &[C64], r: f64) -> usize {
    let mut acc = 0.0;
    for (k, a) in amps.iter().enumerate() {
        acc += a.norm_sqr();
        if r < acc {
            return k;
        }
    }
    amps.len() - 1
}

/// SplitMix64-style mixing of a seed and an index.
fn mix(seed: u64, idx: u64) -> u64 {
    let mut z = seed ^ idx.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Heavy-output probability of one compiled circuit.
pub fn heavy_output_probability(c: &CompiledCircuit, noise: &NoiseModel, shots: usize, seed: u64) -> Result<f64, SimError> {
    let p = PreparedCircuit::new(c)?;
    Ok(p.heavy_count(noise, shots.max(1), seed) as f64 / shots.max(1) as f64)
}

/// How the SU(4) layers are realized on hardware.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    Mq(CompileMode),
    SequentialTq,
}

impl fmt::Display for Realization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Realization::Mq(m) => write!(f, "mq-{m}"),
            Realization::SequentialTq => f.write_str("tq-sequential"),
        }
    }
}

/// Pair-gate sequence: three single-pair ZZ layers per block.
pub fn sequential_tq_realization(c: &CircuitIR) -> Result<CompiledCircuit, CompileError> {
    compile_sequential_tq(c)
}

/// Dephasing sites of a realization: participants summed over entanglement layers.
pub fn dephasing_site_count(c: &CompiledCircuit) -> usize {
    c.mq_layers().map(|l| l.participants().into_iter().filter(|&x| x).count()).sum()
}

/// Default shot schedule `10^4 max((N/10)^4, 1)`.
pub fn default_shots(n: usize) -> usize {
    (1e4 * (n as f64 / 10.0).powi(4).max(1.0)).round() as usize
}

/// Bisection resolution `10^-3 min((10/N)^2, 1)`.
pub fn default_resolution(n: usize) -> f64 {
    1e-3 * (10.0 / n as f64).powi(2).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QvConfig {
    pub n: usize,
    pub realization: Realization,
    pub noise: NoiseModel,
    pub n_circuits: usize,
    /// Overrides the default schedule when set.
    pub shots: Option<usize>,
    /// Upper bound on shots per circuit.
    pub shot_cap: Option<usize>,
    pub seed: u64,
    pub compile: CompileOptions,
}

impl QvConfig {
    pub fn new(n: usize, realization: Realization, noise: NoiseModel, seed: u64) -> Self {
        QvConfig { n, realization, noise, n_circuits: 100, shots: None, shot_cap: None, seed, compile: CompileOptions::default() }
    }

    /// `(shots, capped)`.
    pub fn shot_count(&self) -> (usize, bool) {
        let want = self.shots.unwrap_or_else(|| default_shots(self.n)).max(1);
        match self.shot_cap {
            Some(cap) if cap < want => (cap.max(1), true),
            _ => (want, false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QVReport {
    pub n: usize,
    pub realization: String,
    pub noise: NoiseModel,
    pub n_circuits: usize,
    pub shots_per_circuit: usize,
    pub shots_capped: bool,
    pub per_circuit_hop: Vec<f64>,
    pub mean_ideal_hop: f64,
    pub mean_hop: f64,
    /// Binomial standard error `sqrt(h (1 - h) / n_c)`; used by the pass rule.
    pub stderr: f64,
    /// Sample standard error of the per-circuit HOPs.
    pub sample_stderr: f64,
    pub lower_bound: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Circuits of a QV run compiled and analyzed once for reuse across noise levels.
pub struct QvBatch {
    pub config: QvConfig,
    pub circuits: Vec<PreparedCircuit>,
}

/// Per-circuit seed.
pub fn circuit_seed(seed: u64, index: usize) -> u64 {
    mix(seed, 0x5156_0000 + index as u64)
}

pub fn realize(c: &CircuitIR, realization: Realization, opts: &CompileOptions) -> Result<CompiledCircuit, CompileError> {
    match realization {
        Realization::SequentialTq => compile_sequential_tq(c),
        Realization::Mq(mode) => Ok(compile(c, &CompileOptions { mode, ..opts.clone() })?.0),
    }
}

impl QvBatch {
    pub fn prepare(config: &QvConfig) -> Result<Self, SimError> {
        if config.n > MAX_SIM_QUBITS {
            return Err(SimError::TooLarge(config.n));
        }
        let circuits = (0..config.n_circuits)
            .into_par_iter()
            .map(|i| {
                let c = generate_qv_circuit(config.n, circuit_seed(config.seed, i))?;
                let compiled = realize(&c, config.realization, &config.compile)?;
                PreparedCircuit::new(&compiled)
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        Ok(QvBatch { config: config.clone(), circuits })
    }

    /// Run the batch under `noise`.
    pub fn evaluate(&self, noise: &NoiseModel) -> QVReport {
        let (shots, capped) = self.config.shot_count();
        let seed = self.config.seed;
        let per_circuit_hop: Vec<f64> = self
            .circuits
            .par_iter()
            .enumerate()
            .map(|(i, c)| c.heavy_count(noise, shots, mix(seed ^ 0xC0FFEE, i as u64)) as f64 / shots as f64)
            .collect();
        let nc = per_circuit_hop.len().max(1) as f64;
        let mean_hop = per_circuit_hop.iter().sum::<f64>() / nc;
        let mean_ideal_hop = self.circuits.iter().map(|c| c.ideal_hop).sum::<f64>() / nc;
        let stderr = (mean_hop * (1.0 - mean_hop) / nc).sqrt();
        let var =
            if per_circuit_hop.len() > 1 { per_circuit_hop.iter().map(|h| (h - mean_hop).powi(2)).sum::<f64>() / (nc - 1.0) } else { 0.0 };
        let lower_bound = mean_hop - 2.0 * stderr;
        QVReport {
            n: self.config.n,
            realization: self.config.realization.to_string(),
            noise: *noise,
            n_circuits: self.circuits.len(),
            shots_per_circuit: shots,
            shots_capped: capped,
            per_circuit_hop,
            mean_ideal_hop,
            mean_hop,
            stderr,
            sample_stderr: (var / nc).sqrt(),
            lower_bound,
            threshold: PASS_THRESHOLD,
            pass: lower_bound > PASS_THRESHOLD,
        }
    }
}

/// Compile, simulate and decide one QV configuration.
pub fn qv_pass(config: &QvConfig) -> Result<QVReport, SimError> {
    Ok(QvBatch::prepare(config)?.evaluate(&config.noise))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub n: usize,
    pub realization: String,
    pub noise: NoiseKind,
    /// Largest passing `p_tq` found (0 if even the noiseless run fails).
    pub p_threshold: f64,
    pub delta_p: f64,
    pub shots_per_circuit: usize,
    pub n_circuits: usize,
    pub evaluations: usize,
}

/// Bisection for the largest passing `p_tq` in `[0, p_max]`, to resolution `delta_p`.
pub fn threshold_scan(config: &QvConfig, kind: NoiseKind, p_max: f64, delta_p: Option<f64>) -> Result<ThresholdResult, SimError> {
    let batch = QvBatch::prepare(config)?;
    Ok(threshold_scan_batch(&batch, kind, p_max, delta_p))
}

pub fn threshold_scan_batch(batch: &QvBatch, kind: NoiseKind, p_max: f64, delta_p: Option<f64>) -> ThresholdResult {
    let cfg = &batch.config;
    let delta_p = delta_p.unwrap_or_else(|| default_resolution(cfg.n));
    let passes = |p: f64| batch.evaluate(&NoiseModel { kind, p_tq: p }).pass;
    let mut evaluations = 1;
    let (mut lo, mut hi) = (0.0, p_max);
    let p_threshold = if !passes(0.0) {
        0.0
    } else {
        evaluations += 1;
        if passes(hi) {
            hi
        } else {
            while hi - lo > delta_p {
                let mid = 0.5 * (lo + hi);
                evaluations += 1;
                if passes(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    };
    ThresholdResult {
        n: cfg.n,
        realization: cfg.realization.to_string(),
        noise: kind,
        p_threshold,
        delta_p,
        shots_per_circuit: cfg.shot_count().0,
        n_circuits: batch.circuits.len(),
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_ir::{circuit_unitary, toffoli_mq_circuit, HaarSampler};
    use crate::linalg::{hadamard, to_dense};
    use std::f64::consts::FRAC_PI_4;

    fn state_from(c: &CompiledCircuit) -> Vec<C64> {
        Program::new(c).unwrap().run().amps
    }

    #[test]
    fn mq_zero_is_identity() {
        let mut s = StateVector::new(3).unwrap();
        let h = hadamard();
        for q in 0..3 {
            s.apply_gate(Gate::Single(q, &h)).unwrap();
        }
        let before = s.clone();
        s.apply_gate(Gate::Mq(&MQLayer::from_couplings(3, [(0, 1, 0.0)]).unwrap())).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn bell_statistics() {
        // ZZ(pi/4)|++> then H S on qubit 1 gives (|00> - i|11>)/sqrt2.
        let mut s = StateVector::new(2).unwrap();
        let h = hadamard();
        s.apply_gate(Gate::Single(0, &h)).unwrap();
        s.apply_gate(Gate::Single(1, &h)).unwrap();
        s.apply_gate(Gate::Mq(&MQLayer::from_couplings(2, [(0, 1, FRAC_PI_4)]).unwrap())).unwrap();
        let g = h * crate::linalg::rz(std::f64::consts::FRAC_PI_2);
        s.apply_gate(Gate::Single(1, &g)).unwrap();
        let p = s.probabilities();
        for (k, want) in [0.5, 0.0, 0.0, 0.5].into_iter().enumerate() {
            assert!((p[k] - want).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn kernels_match_dense() {
        let mut hs = HaarSampler::new(5);
        let n = 4;
        let mut c = CompiledCircuit::new(n);
        for q in 0..n {
            c.push_single(q, hs.su2());
        }
        c.push_mq(MQLayer::from_couplings(n, [(0, 2, 0.3), (1, 3, -0.7), (0, 3, 0.2), (2, 3, 0.1)]).unwrap());
        c.push_single(2, hs.su2());
        c.push_mq(MQLayer::from_couplings(n, [(1, 2, 0.4)]).unwrap());
        c.final_permutation = Some(vec![2, 0, 3, 1]);
        let u = circuit_unitary(&c).unwrap();
        let amps = state_from(&c);
        for k in 0..16 {
            assert!((amps[k] - u[(k, 0)]).norm() < 1e-12);
        }
        let mut s = StateVector::new(3).unwrap();
        let g = hs.su4();
        s.amps = (0..8).map(|k| C64::new(k as f64, 1.0) / 14.0f64.sqrt()).collect();
        let before = s.amps.clone();
        s.apply_gate(Gate::Pair(2, 0, &g)).unwrap();
        // Dense: (qubit order 2,0) -> embed via kron with swap
        let full = {
            let mut c2 = crate::circuit_ir::CircuitIR { n_qubits: 3, layers: vec![] };
            c2.layers
                .push(crate::circuit_ir::SU4Layer { blocks: vec![crate::circuit_ir::SU4Block { pair: (2, 0), u: g }], permutation: None });
            circuit_unitary(&c2).unwrap()
        };
        let v = &full * nalgebra::DVector::from_vec(before);
        for k in 0..8 {
            assert!((v[k] - s.amps[k]).norm() < 1e-12);
        }
        assert!(StateVector::new(3).unwrap().apply_gate(Gate::Single(3, &g.fixed_view::<2, 2>(0, 0).into_owned())).is_err());
        let _ = to_dense(&g);
    }

    #[test]
    fn norm_preserved() {
        let c = toffoli_mq_circuit();
        let mut s = StateVector::new(3).unwrap();
        s.amps = vec![C64::new(1.0 / 8f64.sqrt(), 0.0); 8];
        let p = Program::new(&c).unwrap();
        for k in 0..p.steps.len() {
            p.apply_step(&mut s.amps, k);
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heavy_set_strict_median() {
        assert_eq!(heavy_set(&[0.1, 0.4, 0.2, 0.3]), vec![false, true, false, true]);
        assert_eq!(heavy_set(&[1.0, 0.0, 0.0, 0.0]), vec![true, false, false, false]);
        let h = heavy_set(&[0.25; 4]);
        assert!(h.iter().all(|x| !x));
    }

    #[test]
    fn pauli_kernels() {
        let mut a = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        kernels::apply_pauli(&mut a, 1, 0, 2);
        assert!((a[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
        kernels::apply_pauli(&mut a, 1, 0, 3);
        assert!((a[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
        kernels::apply_pauli(&mut a, 1, 0, 1);
        assert!((a[0] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn dephasing_decays_zz_correlation() {
        // Bell pair from one MQ layer. A Z error on qubit 1 before the gate becomes
        // an X after the H S rotation, so <ZZ> = 1 - 2p and P(correlated) = 1 - p.
        let h = hadamard();
        let mut c = CompiledCircuit::new(2);
        c.push_single(0, h);
        c.push_single(1, h);
        c.push_mq(MQLayer::from_couplings(2, [(0, 1, FRAC_PI_4)]).unwrap());
        c.push_single(1, h * crate::linalg::rz(std::f64::consts::FRAC_PI_2));
        let prep = PreparedCircuit::new(&c).unwrap();
        assert_eq!(prep.heavy(), &[true, false, false, true]);
        let shots = 20_000;
        for p in [0.05, 0.2] {
            let model = NoiseModel::new(NoiseKind::Dephasing, p).unwrap();
            let hop = prep.heavy_count(&model, shots, 3) as f64 / shots as f64;
            let want = 1.0 - p;
            let sigma = (want * (1.0 - want) / shots as f64).sqrt();
            assert!((hop - want).abs() < 3.0 * sigma, "{hop} {want}");
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(default_shots(4), 10_000);
        assert_eq!(default_shots(20), 160_000);
        assert!((default_resolution(20) - 2.5e-4).abs() < 1e-15);
        assert!((default_resolution(5) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn ideal_and_noisy_qv() {
        let mut cfg = QvConfig::new(4, Realization::Mq(CompileMode::Fused), NoiseModel::none(), 1);
        cfg.n_circuits = 20;
        cfg.shots = Some(200);
        let r = qv_pass(&cfg).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r, qv_pass(&cfg).unwrap());
        cfg.n = 6;
        cfg.noise = NoiseModel::new(NoiseKind::Depolarization, 0.5).unwrap();
        let r = qv_pass(&cfg).unwrap();
        assert!(!r.pass);
        assert!((r.mean_hop - 0.5).abs() < 0.05, "{}", r.mean_hop);
    }

    #[test]
    fn sequential_gate_count() {
        let c = generate_qv_circuit(4, 3).unwrap();
        let tq = sequential_tq_realization(&c).unwrap();
        assert_eq!(tq.mq_count(), 24);
        assert!(tq.mq_layers().all(|l| l.couplings().len() == 1));
    }
}
