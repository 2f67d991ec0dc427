//! Circuit IR, builders and the `.qvc` document format.

use crate::linalg::{c, hadamard, rz, to_su2, to_su4, unitarity_residual, ComplexMatrix, C64, M2, M4};
use crate::mqlayer::MQLayer;
use crate::sim::kernels;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Largest register for dense unitary construction.
pub const MAX_DENSE_QUBITS: usize = 12;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit count must be at least {min}, got {n}")]
    TooFewQubits { n: usize, min: usize },
    #[error("dense unitary limited to {MAX_DENSE_QUBITS} qubits, got {0}")]
    TooLarge(usize),
    #[error("layer {layer}: {message}")]
    InvalidLayer { layer: usize, message: String },
    #[error("parse error at line {line}, column {column} ({path}): {message}")]
    Parse { line: usize, column: usize, path: String, message: String },
    #[error("unsupported document: {0}")]
    Document(String),
}

/// Deterministic Haar sampler for SU(2)/SU(4) and random pairings.
#[derive(Debug, Clone)]
pub struct HaarSampler {
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl HaarSampler {
    pub fn new(seed: u64) -> Self {
        HaarSampler { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn gaussian(&mut self) -> C64 {
        let re: f64 = self.rng.sample(rand_distr::StandardNormal);
        let im: f64 = self.rng.sample(rand_distr::StandardNormal);
        c(re, im)
    }

    /// Ginibre matrix, Gram-Schmidt QR with diagonal phase correction, det normalization.
    pub fn su4(&mut self) -> M4 {
        let g = M4::from_fn(|_, _| self.gaussian());
        to_su4(&haar_qr(g))
    }

    pub fn su2(&mut self) -> M2 {
        let g = M2::from_fn(|_, _| self.gaussian());
        to_su2(&haar_qr(g))
    }

    /// Uniform random perfect matching (shuffle, then adjacent pairs); odd N leaves the last idle.
    pub fn pairing(&mut self, n: usize) -> Vec<(usize, usize)> {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut self.rng);
        perm.chunks_exact(2).map(|p| (p[0], p[1])).collect()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

/// Q factor of `g` with `R` made positive-diagonal, i.e. Haar distributed for Ginibre `g`.
fn haar_qr<D: nalgebra::DimName>(g: nalgebra::OMatrix<C64, D, D>) -> nalgebra::OMatrix<C64, D, D>
where
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<D, D> + nalgebra::allocator::Allocator<D>,
{
    let mut q = g;
    let n = q.ncols();
    for j in 0..n {
        for k in 0..j {
            let proj = q.column(k).dotc(&q.column(j));
            let col_k = q.column(k).into_owned();
            q.column_mut(j).axpy(-proj, &col_k, c(1., 0.));
        }
        let norm = q.column(j).norm();
        q.column_mut(j).unscale_mut(norm);
    }
    // Modified Gram-Schmidt already yields R with positive real diagonal.
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct SU4Block {
    pub pair: (usize, usize),
    pub u: M4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SU4Layer {
    pub blocks: Vec<SU4Block>,
    /// Applied after the blocks: the content of wire `i` moves to wire `perm[i]`.
    pub permutation: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitIR {
    pub n_qubits: usize,
    pub layers: Vec<SU4Layer>,
}

fn check_pairs(n: usize, pairs: impl Iterator<Item = (usize, usize)>, layer: usize) -> Result<(), CircuitError> {
    let mut used = vec![false; n];
    for (a, b) in pairs {
        if a >= n || b >= n || a == b {
            return Err(CircuitError::InvalidLayer { layer, message: format!("invalid pair ({a}, {b}) on {n} qubits") });
        }
        for q in [a, b] {
            if used[q] {
                return Err(CircuitError::InvalidLayer { layer, message: format!("overlapping pairs on qubit {q}") });
            }
            used[q] = true;
        }
    }
    Ok(())
}

fn check_permutation(n: usize, perm: &[usize], layer: usize) -> Result<(), CircuitError> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(CircuitError::InvalidLayer { layer, message: format!("permutation length {} != {n}", perm.len()) });
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(CircuitError::InvalidLayer { layer, message: "permutation is not a bijection".into() });
        }
        seen[p] = true;
    }
    Ok(())
}

impl CircuitIR {
    pub fn validate(&self) -> Result<(), CircuitError> {
        for (l, layer) in self.layers.iter().enumerate() {
            check_pairs(self.n_qubits, layer.blocks.iter().map(|b| b.pair), l)?;
            for b in &layer.blocks {
                let r = unitarity_residual(&b.u);
                if r >= 1e-8 || !r.is_finite() {
                    return Err(CircuitError::InvalidLayer { layer: l, message: format!("block {:?} not unitary ({r:.2e})", b.pair) });
                }
            }
            if let Some(p) = &layer.permutation {
                check_permutation(self.n_qubits, p, l)?;
            }
        }
        Ok(())
    }

    pub fn block_count(&self) -> usize {
        self.layers.iter().map(|l| l.blocks.len()).sum()
    }

    /// Fold permutation layers into later pairings.
    ///
    /// Returns the permutation-free circuit and the final relabeling `f`
    /// (wire `i` of the folded circuit corresponds to wire `f[i]` of the source).
    pub fn absorb_permutations(&self) -> (CircuitIR, Vec<usize>) {
        let n = self.n_qubits;
        // m[w]: folded wire holding the content of source wire w.
        let mut m: Vec<usize> = (0..n).collect();
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let blocks = layer.blocks.iter().map(|b| SU4Block { pair: (m[b.pair.0], m[b.pair.1]), u: b.u }).collect();
            layers.push(SU4Layer { blocks, permutation: None });
            if let Some(p) = &layer.permutation {
                let mut next = m.clone();
                for i in 0..n {
                    next[p[i]] = m[i];
                }
                m = next;
            }
        }
        let mut f = vec![0; n];
        for w in 0..n {
            f[m[w]] = w;
        }
        (CircuitIR { n_qubits: n, layers }, f)
    }
}

/// Quantum-volume circuit: N layers of Haar SU(4) blocks on random matchings.
pub fn generate_qv_circuit(n: usize, seed: u64) -> Result<CircuitIR, CircuitError> {
    generate_layered_circuit(n, n, seed)
}

/// `layers` QV-style layers on `n` qubits.
pub fn generate_layered_circuit(n: usize, layers: usize, seed: u64) -> Result<CircuitIR, CircuitError> {
    if n < 2 {
        return Err(CircuitError::TooFewQubits { n, min: 2 });
    }
    let mut s = HaarSampler::new(seed);
    let mut out = Vec::with_capacity(layers);
    for _ in 0..layers {
        let pairs = s.pairing(n);
        let blocks = pairs.into_iter().map(|pair| SU4Block { pair, u: s.su4() }).collect();
        out.push(SU4Layer { blocks, permutation: None });
    }
    Ok(CircuitIR { n_qubits: n, layers: out })
}

/// Per-qubit single-qubit gates (`None` = identity).
#[derive(Debug, Clone, PartialEq)]
pub struct SingleLayer {
    pub gates: Vec<Option<M2>>,
}

impl SingleLayer {
    pub fn identity(n: usize) -> Self {
        SingleLayer { gates: vec![None; n] }
    }

    /// Apply `g` after whatever is already on qubit `q`.
    pub fn then(&mut self, q: usize, g: M2) {
        self.gates[q] = Some(match self.gates[q] {
            Some(prev) => g * prev,
            None => g,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompiledOp {
    Single(SingleLayer),
    Mq(MQLayer),
}

/// Alternating single-qubit and MQ layers in application order.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCircuit {
    pub n_qubits: usize,
    pub ops: Vec<CompiledOp>,
    /// Optional final relabeling (wire `i` moves to wire `perm[i]`).
    pub final_permutation: Option<Vec<usize>>,
}

impl CompiledCircuit {
    pub fn new(n_qubits: usize) -> Self {
        CompiledCircuit { n_qubits, ops: Vec::new(), final_permutation: None }
    }

    /// Append a single-qubit gate, merging into a trailing single layer.
    pub fn push_single(&mut self, q: usize, g: M2) {
        if !matches!(self.ops.last(), Some(CompiledOp::Single(_))) {
            self.ops.push(CompiledOp::Single(SingleLayer::identity(self.n_qubits)));
        }
        if let Some(CompiledOp::Single(l)) = self.ops.last_mut() {
            l.then(q, g);
        }
    }

    pub fn push_mq(&mut self, layer: MQLayer) {
        self.ops.push(CompiledOp::Mq(layer));
    }

    pub fn mq_layers(&self) -> impl Iterator<Item = &MQLayer> {
        self.ops.iter().filter_map(|o| match o {
            CompiledOp::Mq(l) => Some(l),
            _ => None,
        })
    }

    pub fn mq_count(&self) -> usize {
        self.mq_layers().count()
    }

    /// Number of nonzero pair couplings over all MQ layers.
    pub fn coupling_count(&self) -> usize {
        self.mq_layers().map(|l| l.nonzero_count()).sum()
    }

    /// Sum of MQ-layer nuclear norms (gauge units).
    pub fn total_nuc(&self) -> f64 {
        self.mq_layers().map(crate::mqlayer::nuclear_norm).sum()
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for (l, op) in self.ops.iter().enumerate() {
            match op {
                CompiledOp::Single(s) => {
                    if s.gates.len() != self.n_qubits {
                        return Err(CircuitError::InvalidLayer { layer: l, message: "single layer width mismatch".into() });
                    }
                    for g in s.gates.iter().flatten() {
                        let r = unitarity_residual(g);
                        if r >= 1e-8 || !r.is_finite() {
                            return Err(CircuitError::InvalidLayer { layer: l, message: format!("gate not unitary ({r:.2e})") });
                        }
                    }
                }
                CompiledOp::Mq(m) => {
                    if m.n_qubits != self.n_qubits {
                        return Err(CircuitError::InvalidLayer { layer: l, message: "MQ layer width mismatch".into() });
                    }
                }
            }
        }
        if let Some(p) = &self.final_permutation {
            check_permutation(self.n_qubits, p, self.ops.len())?;
        }
        Ok(())
    }
}

/// Anything with a dense unitary (N <= 12).
pub trait Circuit {
    fn n_qubits(&self) -> usize;
    /// Apply the circuit to a state vector in place.
    fn apply(&self, amps: &mut Vec<C64>);
}

impl Circuit for CircuitIR {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn apply(&self, amps: &mut Vec<C64>) {
        let n = self.n_qubits;
        for layer in &self.layers {
            for b in &layer.blocks {
                kernels::apply_2q(amps, n, b.pair.0, b.pair.1, &b.u);
            }
            if let Some(p) = &layer.permutation {
                *amps = kernels::permute(amps, n, p);
            }
        }
    }
}

impl Circuit for CompiledCircuit {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn apply(&self, amps: &mut Vec<C64>) {
        let n = self.n_qubits;
        for op in &self.ops {
            match op {
                CompiledOp::Single(s) => {
                    for (q, g) in s.gates.iter().enumerate() {
                        if let Some(g) = g {
                            kernels::apply_1q(amps, n, q, g);
                        }
                    }
                }
                CompiledOp::Mq(m) => kernels::apply_phases(amps, &m.phase_vector()),
            }
        }
        if let Some(p) = &self.final_permutation {
            *amps = kernels::permute(amps, n, p);
        }
    }
}

/// Dense `2^N x 2^N` unitary of a circuit.
pub fn circuit_unitary<T: Circuit + ?Sized>(c: &T) -> Result<ComplexMatrix, CircuitError> {
    let n = c.n_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(CircuitError::TooLarge(n));
    }
    let dim = 1usize << n;
    let mut u = ComplexMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut col = vec![C64::new(0.0, 0.0); dim];
        col[j] = C64::new(1.0, 0.0);
        c.apply(&mut col);
        u.column_mut(j).copy_from_slice(&col);
    }
    Ok(u)
}

/// Three-layer MQ Toffoli on qubits (0, 1, 2); target 0, controls 1 and 2.
pub fn toffoli_mq_circuit() -> CompiledCircuit {
    let h = hadamard();
    let q4 = PI / 4.0;
    let q8 = PI / 8.0;
    let mq = |pairs: &[(usize, usize, f64)]| MQLayer::from_couplings(3, pairs.iter().copied()).expect("valid pairs");
    let mut c = CompiledCircuit::new(3);
    c.push_mq(mq(&[(0, 1, q4), (0, 2, q4)]));
    // e^{-i pi/4 Z} = Rz(pi/2); e^{i pi/8 Z} = Rz(-pi/4)
    c.push_single(0, h * rz(-q4) * h);
    c.push_single(1, rz(PI / 2.0));
    c.push_single(2, rz(PI / 2.0));
    c.push_mq(mq(&[(0, 1, q4), (0, 2, q4)]));
    c.push_single(0, h);
    c.push_single(1, rz(PI / 2.0));
    c.push_single(2, rz(PI / 2.0));
    c.push_mq(mq(&[(0, 1, q8), (0, 2, q8), (1, 2, q8)]));
    c.push_single(0, h * rz(q4));
    c.push_single(1, rz(q4));
    c.push_single(2, rz(q4));
    c
}

/// 8x8 Toffoli with target qubit 0 and controls 1, 2 (qubit 0 most significant).
pub fn toffoli_matrix() -> ComplexMatrix {
    let mut u = ComplexMatrix::identity(8, 8);
    u.swap_rows(3, 7);
    u
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

type MatDoc = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    version: u32,
    kind: DocKind,
    n_qubits: usize,
    layers: Vec<LayerDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    final_permutation: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize, PartialEq, Clone, Copy, Debug)]
#[serde(rename_all = "snake_case")]
enum DocKind {
    Circuit,
    Compiled,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LayerDoc {
    Su4 {
        blocks: Vec<BlockDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        permutation: Option<Vec<usize>>,
    },
    Single {
        gates: Vec<GateDoc>,
    },
    Mq {
        couplings: Vec<(usize, usize, f64)>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    pair: [usize; 2],
    u: MatDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateDoc {
    qubit: usize,
    u: MatDoc,
}

fn mat_doc<R: nalgebra::Dim, Cc: nalgebra::Dim, S: nalgebra::Storage<C64, R, Cc>>(m: &nalgebra::Matrix<C64, R, Cc, S>) -> MatDoc {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|col| [m[(r, col)].re, m[(r, col)].im]).collect()).collect()
}

fn doc_mat<const D: usize>(d: &MatDoc, layer: usize) -> Result<nalgebra::SMatrix<C64, D, D>, CircuitError> {
    if d.len() != D || d.iter().any(|r| r.len() != D) {
        return Err(CircuitError::InvalidLayer { layer, message: format!("expected a {D}x{D} matrix") });
    }
    Ok(nalgebra::SMatrix::<C64, D, D>::from_fn(|r, col| c(d[r][col][0], d[r][col][1])))
}

/// A serializable circuit document.
#[derive(Debug, Clone, PartialEq)]
pub enum QvcDocument {
    Circuit(CircuitIR),
    Compiled(CompiledCircuit),
}

impl QvcDocument {
    pub fn n_qubits(&self) -> usize {
        match self {
            QvcDocument::Circuit(c) => c.n_qubits,
            QvcDocument::Compiled(c) => c.n_qubits,
        }
    }

    pub fn unitary(&self) -> Result<ComplexMatrix, CircuitError> {
        match self {
            QvcDocument::Circuit(c) => circuit_unitary(c),
            QvcDocument::Compiled(c) => circuit_unitary(c),
        }
    }
}

fn to_document(doc: &QvcDocument) -> Document {
    match doc {
        QvcDocument::Circuit(c) => Document {
            version: FORMAT_VERSION,
            kind: DocKind::Circuit,
            n_qubits: c.n_qubits,
            layers: c
                .layers
                .iter()
                .map(|l| LayerDoc::Su4 {
                    blocks: l.blocks.iter().map(|b| BlockDoc { pair: [b.pair.0, b.pair.1], u: mat_doc(&b.u) }).collect(),
                    permutation: l.permutation.clone(),
                })
                .collect(),
            final_permutation: None,
        },
        QvcDocument::Compiled(c) => Document {
            version: FORMAT_VERSION,
            kind: DocKind::Compiled,
            n_qubits: c.n_qubits,
            layers: c
                .ops
                .iter()
                .map(|op| match op {
                    CompiledOp::Single(s) => LayerDoc::Single {
                        gates: s
                            .gates
                            .iter()
                            .enumerate()
                            .filter_map(|(q, g)| g.as_ref().map(|g| GateDoc { qubit: q, u: mat_doc(g) }))
                            .collect(),
                    },
                    CompiledOp::Mq(m) => LayerDoc::Mq { couplings: m.couplings().to_vec() },
                })
                .collect(),
            final_permutation: c.final_permutation.clone(),
        },
    }
}

pub fn serialize(doc: &QvcDocument) -> String {
    let mut s = serde_json::to_string_pretty(&to_document(doc)).expect("document serializes");
    s.push('\n');
    s
}

pub fn serialize_circuit(c: &CircuitIR) -> String {
    serialize(&QvcDocument::Circuit(c.clone()))
}

pub fn serialize_compiled(c: &CompiledCircuit) -> String {
    serialize(&QvcDocument::Compiled(c.clone()))
}

pub fn deserialize(text: &str) -> Result<QvcDocument, CircuitError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CircuitError::Parse { line: inner.line(), column: inner.column(), path, message: inner.to_string() }
    })?;
    if doc.version != FORMAT_VERSION {
        return Err(CircuitError::Document(format!("unsupported version {}", doc.version)));
    }
    let n = doc.n_qubits;
    if n == 0 {
        return Err(CircuitError::TooFewQubits { n, min: 1 });
    }
    match doc.kind {
        DocKind::Circuit => {
            let mut layers = Vec::new();
            for (l, layer) in doc.layers.iter().enumerate() {
                let LayerDoc::Su4 { blocks, permutation } = layer else {
                    return Err(CircuitError::InvalidLayer { layer: l, message: "circuit documents hold only su4 layers".into() });
                };
                let blocks = blocks
                    .iter()
                    .map(|b| Ok(SU4Block { pair: (b.pair[0], b.pair[1]), u: doc_mat::<4>(&b.u, l)? }))
                    .collect::<Result<Vec<_>, CircuitError>>()?;
                layers.push(SU4Layer { blocks, permutation: permutation.clone() });
            }
            if doc.final_permutation.is_some() {
                return Err(CircuitError::Document("final_permutation is only valid for compiled documents".into()));
            }
            let c = CircuitIR { n_qubits: n, layers };
            c.validate()?;
            Ok(QvcDocument::Circuit(c))
        }
        DocKind::Compiled => {
            let mut c = CompiledCircuit::new(n);
            for (l, layer) in doc.layers.iter().enumerate() {
                match layer {
                    LayerDoc::Single { gates } => {
                        let mut s = SingleLayer::identity(n);
                        for g in gates {
                            if g.qubit >= n || s.gates[g.qubit].is_some() {
                                return Err(CircuitError::InvalidLayer { layer: l, message: format!("bad or repeated qubit {}", g.qubit) });
                            }
                            s.gates[g.qubit] = Some(doc_mat::<2>(&g.u, l)?);
                        }
                        c.ops.push(CompiledOp::Single(s));
                    }
                    LayerDoc::Mq { couplings } => {
                        let mut m = MQLayer::new(n);
                        for &(a, b, t) in couplings {
                            if a >= b || b >= n || m.phase(a, b) != 0.0 {
                                return Err(CircuitError::InvalidLayer {
                                    layer: l,
                                    message: format!("bad or repeated coupling ({a}, {b})"),
                                });
                            }
                            m.add(a, b, t).map_err(|e| CircuitError::InvalidLayer { layer: l, message: e.to_string() })?;
                        }
                        c.ops.push(CompiledOp::Mq(m));
                    }
                    LayerDoc::Su4 { .. } => {
                        return Err(CircuitError::InvalidLayer {
                            layer: l,
                            message: "compiled documents hold single and mq layers".into(),
                        });
                    }
                }
            }
            c.final_permutation = doc.final_permutation;
            c.validate()?;
            Ok(QvcDocument::Compiled(c))
        }
    }
}
