//! Scalar-output MPNN with tanh updates, MAX readout, and manual reverse-mode gradients.

use crate::task::Instance;
use crate::{ExperimentError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use squashscope::bounds::{build_message_matrix, MatrixKind};
use squashscope::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    GcnLike,
    GinLike,
    SageLike,
    GatedLike,
}

impl Template {
    pub const ALL: [Template; 4] = [
        Template::GcnLike,
        Template::GinLike,
        Template::SageLike,
        Template::GatedLike,
    ];

    pub fn kind(self) -> MatrixKind {
        match self {
            Template::GcnLike | Template::GatedLike => MatrixKind::Sym,
            Template::GinLike => MatrixKind::Raw,
            Template::SageLike => MatrixKind::Rw,
        }
    }

    pub fn gated(self) -> bool {
        self == Template::GatedLike
    }

    pub fn name(self) -> &'static str {
        match self {
            Template::GcnLike => "gcn_like",
            Template::GinLike => "gin_like",
            Template::SageLike => "sage_like",
            Template::GatedLike => "gated_like",
        }
    }
}

/// A graph in the layout the network consumes: per-node lists of `(neighbor, 𝖠_vu)`.
#[derive(Debug, Clone)]
pub struct GraphTensor {
    pub n: usize,
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl GraphTensor {
    pub fn new(g: &Graph, kind: MatrixKind) -> Result<Self> {
        let a = build_message_matrix(g, kind)?.values;
        let adj = (0..g.n())
            .map(|v| g.neighbors(v).iter().map(|&u| (u, a[(v, u)])).collect())
            .collect();
        Ok(GraphTensor { n: g.n(), adj })
    }
}

/// Offsets of one layer's blocks inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct LayerLayout {
    omega: usize,
    w: usize,
    b: usize,
    /// `(G1, G2, U)` for gated layers.
    gate: Option<(usize, usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub template: Template,
    pub width: usize,
    pub depth: usize,
    pub params: Vec<f64>,
    layers: Vec<LayerLayout>,
    theta: usize,
    beta: usize,
}

/// Per-layer values kept for the backward pass, for a batch of instances stacked row-wise.
struct Tape {
    /// First row of each instance.
    offsets: Vec<usize>,
    /// `h^{(0)} .. h^{(m)}`, each `rows × d` row-major.
    h: Vec<Vec<f64>>,
    /// Aggregated messages per layer.
    agg: Vec<Vec<f64>>,
    /// Gate values per directed edge per layer (gated only).
    gates: Vec<Vec<f64>>,
    /// `U h` per layer (gated only).
    uh: Vec<Vec<f64>>,
    /// Per instance and channel, the global row of the readout maximum.
    argmax: Vec<usize>,
    outputs: Vec<f64>,
}

/// `c = beta·c + a·b` where `a` is `m × k` and `b` is `k × n`, each given with (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    sa: (usize, usize),
    b: &[f64],
    sb: (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserted lengths cover every index reached with these strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out (=|+=) X Mᵀ` for row-major `X: rows × d` and `M: d × d`.
fn mul_mt(x: &[f64], m: &[f64], d: usize, out: &mut [f64], acc: bool) {
    let rows = x.len() / d;
    gemm(
        rows,
        d,
        d,
        x,
        (d, 1),
        m,
        (1, d),
        if acc { 1.0 } else { 0.0 },
        out,
    );
}

/// `out += X M`
fn mul_m_acc(x: &[f64], m: &[f64], d: usize, out: &mut [f64]) {
    let rows = x.len() / d;
    gemm(rows, d, d, x, (d, 1), m, (d, 1), 1.0, out);
}

/// `g += Xᵀ Y` for row-major `X, Y: rows × d`.
fn xt_y_acc(x: &[f64], y: &[f64], d: usize, g: &mut [f64]) {
    let rows = x.len() / d;
    gemm(d, rows, d, x, (1, d), y, (d, 1), 1.0, g);
}

/// Instances evaluated together when only outputs are needed.
const EVAL_CHUNK: usize = 64;

/// `tanh` through a single `exp`; agrees with `f64::tanh` to ~1e-16 at less than half the cost.
fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Network {
    /// Uniform initialisation in `[-gain/√d, gain/√d]`; the output bias starts at `bias_init`.
    pub fn new(
        template: Template,
        width: usize,
        depth: usize,
        gain: f64,
        seed: u64,
        bias_init: f64,
    ) -> Result<Self> {
        if width == 0 || depth == 0 {
            return Err(ExperimentError::Config(
                "width and depth must be positive".into(),
            ));
        }
        let d = width;
        let mut next = 0;
        let mut take = |len: usize| {
            let at = next;
            next += len;
            at
        };
        let layers: Vec<LayerLayout> = (0..depth)
            .map(|_| LayerLayout {
                omega: take(d * d),
                w: take(d * d),
                b: take(d),
                gate: template
                    .gated()
                    .then(|| (take(d * d), take(d * d), take(d * d))),
            })
            .collect();
        let theta = take(d);
        let beta = take(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = gain / (d as f64).sqrt();
        let mut params: Vec<f64> = (0..next).map(|_| rng.gen_range(-s..=s)).collect();
        for l in &layers {
            params[l.b..l.b + d].iter_mut().for_each(|x| *x = 0.0);
        }
        params[beta] = bias_init;
        Ok(Network {
            template,
            width,
            depth,
            params,
            layers,
            theta,
            beta,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn run(&self, graphs: &[GraphTensor], batch: &[&Instance]) -> Tape {
        let d = self.width;
        let p = &self.params;
        let mut offsets = Vec::with_capacity(batch.len());
        let mut rows = 0;
        for inst in batch {
            offsets.push(rows);
            rows += graphs[inst.graph].n;
        }
        let mut h0 = vec![0.0; rows * d];
        for (inst, &o) in batch.iter().zip(&offsets) {
            h0[(o + inst.pair.v) * d] = inst.values.0;
            h0[(o + inst.pair.u) * d] = inst.values.1;
        }
        let edges = || {
            batch
                .iter()
                .zip(&offsets)
                .map(|(i, &o)| (&graphs[i.graph], o))
        };
        let mut tape = Tape {
            offsets: offsets.clone(),
            h: vec![h0],
            agg: Vec::with_capacity(self.depth),
            gates: Vec::new(),
            uh: Vec::new(),
            argmax: vec![0; batch.len() * d],
            outputs: Vec::with_capacity(batch.len()),
        };
        for l in &self.layers {
            let h = tape.h.last().expect("input state");
            let mut agg = vec![0.0; rows * d];
            match l.gate {
                None => {
                    for (g, o) in edges() {
                        for (v, nbrs) in g.adj.iter().enumerate() {
                            let out = &mut agg[(o + v) * d..(o + v + 1) * d];
                            for &(u, a) in nbrs {
                                out.iter_mut()
                                    .zip(&h[(o + u) * d..(o + u + 1) * d])
                                    .for_each(|(x, y)| *x += a * y);
                            }
                        }
                    }
                }
                Some((g1, g2, u_off)) => {
                    let mut pv = vec![0.0; rows * d];
                    let mut qv = vec![0.0; rows * d];
                    let mut uh = vec![0.0; rows * d];
                    mul_mt(h, &p[g1..g1 + d * d], d, &mut pv, false);
                    mul_mt(h, &p[g2..g2 + d * d], d, &mut qv, false);
                    mul_mt(h, &p[u_off..u_off + d * d], d, &mut uh, false);
                    let mut gates = Vec::new();
                    for (g, o) in edges() {
                        for (v, nbrs) in g.adj.iter().enumerate() {
                            let (v, out) = (o + v, &mut agg[(o + v) * d..(o + v + 1) * d]);
                            for &(u, a) in nbrs {
                                let u = o + u;
                                for c in 0..d {
                                    let gate = sigmoid(pv[v * d + c] + qv[u * d + c]);
                                    gates.push(gate);
                                    out[c] += a * gate * uh[u * d + c];
                                }
                            }
                        }
                    }
                    tape.gates.push(gates);
                    tape.uh.push(uh);
                }
            }
            let mut next = vec![0.0; rows * d];
            mul_mt(h, &p[l.omega..l.omega + d * d], d, &mut next, false);
            mul_mt(&agg, &p[l.w..l.w + d * d], d, &mut next, true);
            for row in next.chunks_exact_mut(d) {
                for (o, b) in row.iter_mut().zip(&p[l.b..l.b + d]) {
                    *o = tanh(*o + b);
                }
            }
            tape.agg.push(agg);
            tape.h.push(next);
        }
        let h = tape.h.last().expect("final state");
        for (k, (g, o)) in edges().enumerate() {
            let mut y = p[self.beta];
            for c in 0..d {
                let mut best = o;
                for v in o + 1..o + g.n {
                    if h[v * d + c] > h[best * d + c] {
                        best = v;
                    }
                }
                tape.argmax[k * d + c] = best;
                y += p[self.theta + c] * h[best * d + c];
            }
            tape.outputs.push(y);
        }
        tape
    }

    /// Final node states `h^{(m)}`, `n × d` row-major.
    pub fn node_states(&self, g: &GraphTensor, inst: &Instance) -> Vec<f64> {
        let single = [Instance {
            graph: 0,
            ..inst.clone()
        }];
        self.run(std::slice::from_ref(g), &[&single[0]])
            .h
            .pop()
            .expect("final state")
    }

    pub fn predict(&self, g: &GraphTensor, inst: &Instance) -> f64 {
        let single = [Instance {
            graph: 0,
            ..inst.clone()
        }];
        self.run(std::slice::from_ref(g), &[&single[0]]).outputs[0]
    }

    /// Adds `Σ_k scales[k] · ∂y_k/∂params` into `grad`.
    fn backward(
        &self,
        graphs: &[GraphTensor],
        batch: &[&Instance],
        tape: &Tape,
        scales: &[f64],
        grad: &mut [f64],
    ) {
        let d = self.width;
        let p = &self.params;
        let last = tape.h.last().expect("final state");
        let rows = last.len() / d;
        let mut dh = vec![0.0; rows * d];
        for (k, &scale) in scales.iter().enumerate() {
            grad[self.beta] += scale;
            for c in 0..d {
                let v = tape.argmax[k * d + c];
                grad[self.theta + c] += scale * last[v * d + c];
                dh[v * d + c] += scale * p[self.theta + c];
            }
        }
        let edges = || {
            batch
                .iter()
                .zip(&tape.offsets)
                .map(|(i, &o)| (&graphs[i.graph], o))
        };
        for (t, l) in self.layers.iter().enumerate().rev() {
            let h_in = &tape.h[t];
            let h_out = &tape.h[t + 1];
            let agg = &tape.agg[t];
            let dpre: Vec<f64> = dh
                .iter()
                .zip(h_out)
                .map(|(x, y)| x * (1.0 - y * y))
                .collect();
            let mut dh_in = vec![0.0; rows * d];
            let mut dagg = vec![0.0; rows * d];
            for dp in dpre.chunks_exact(d) {
                grad[l.b..l.b + d]
                    .iter_mut()
                    .zip(dp)
                    .for_each(|(gb, x)| *gb += x);
            }
            xt_y_acc(&dpre, h_in, d, &mut grad[l.omega..l.omega + d * d]);
            mul_m_acc(&dpre, &p[l.omega..l.omega + d * d], d, &mut dh_in);
            xt_y_acc(&dpre, agg, d, &mut grad[l.w..l.w + d * d]);
            mul_m_acc(&dpre, &p[l.w..l.w + d * d], d, &mut dagg);
            match l.gate {
                None => {
                    for (g, o) in edges() {
                        for (v, nbrs) in g.adj.iter().enumerate() {
                            let dv = &dagg[(o + v) * d..(o + v + 1) * d];
                            for &(u, a) in nbrs {
                                dh_in[(o + u) * d..(o + u + 1) * d]
                                    .iter_mut()
                                    .zip(dv)
                                    .for_each(|(x, y)| *x += a * y);
                            }
                        }
                    }
                }
                Some((g1, g2, u_off)) => {
                    let gates = &tape.gates[t];
                    let uh = &tape.uh[t];
                    let mut dp_v = vec![0.0; rows * d];
                    let mut dq = vec![0.0; rows * d];
                    let mut duh = vec![0.0; rows * d];
                    let mut e = 0;
                    for (g, o) in edges() {
                        for (v, nbrs) in g.adj.iter().enumerate() {
                            let v = o + v;
                            for &(u, a) in nbrs {
                                let u = o + u;
                                for c in 0..d {
                                    let gate = gates[e];
                                    e += 1;
                                    let dmsg = a * dagg[v * d + c];
                                    if dmsg == 0.0 {
                                        continue;
                                    }
                                    duh[u * d + c] += gate * dmsg;
                                    let dz = dmsg * uh[u * d + c] * gate * (1.0 - gate);
                                    dp_v[v * d + c] += dz;
                                    dq[u * d + c] += dz;
                                }
                            }
                        }
                    }
                    for (off, dv) in [(g1, &dp_v), (g2, &dq), (u_off, &duh)] {
                        xt_y_acc(dv, h_in, d, &mut grad[off..off + d * d]);
                        mul_m_acc(dv, &p[off..off + d * d], d, &mut dh_in);
                    }
                }
            }
            dh = dh_in;
        }
    }

    /// Mean absolute error over `batch` and its gradient.
    pub fn loss_and_grad(&self, graphs: &[GraphTensor], batch: &[&Instance]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let tape = self.run(graphs, batch);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let scales: Vec<f64> = batch
            .iter()
            .zip(&tape.outputs)
            .map(|(inst, y)| {
                let r = y - inst.target;
                loss += r.abs() * scale;
                if r > 0.0 {
                    scale
                } else if r < 0.0 {
                    -scale
                } else {
                    0.0
                }
            })
            .collect();
        self.backward(graphs, batch, &tape, &scales, &mut grad);
        (loss, grad)
    }

    pub fn loss(&self, graphs: &[GraphTensor], batch: &[&Instance]) -> f64 {
        let total: f64 = batch
            .chunks(EVAL_CHUNK)
            .map(|chunk| {
                let tape = self.run(graphs, chunk);
                chunk
                    .iter()
                    .zip(&tape.outputs)
                    .map(|(i, y)| (y - i.target).abs())
                    .sum::<f64>()
            })
            .sum();
        total / batch.len() as f64
    }

    pub fn mae(&self, graphs: &[GraphTensor], instances: &[Instance]) -> f64 {
        let refs: Vec<&Instance> = instances.iter().collect();
        self.loss(graphs, &refs)
    }
}
