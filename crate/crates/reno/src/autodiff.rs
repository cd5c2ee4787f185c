//! Minimal reverse-mode differentiation engine: dense affine maps, pointwise
//! activations, circular convolution, fixed linear transforms, and
//! complex-as-interleaved-real-pairs arithmetic. Enough to train the model
//! zoo, nothing more.
//!
//! A [`Tape`] is a static graph built once per architecture. `forward`
//! caches every intermediate; `backward` walks the nodes in reverse and
//! returns exact gradients for every registered parameter.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::ActivationKind;

/// A node id on the tape.
pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Node {
    /// The single external input leaf.
    Input,
    /// Trainable leaf; index into the parameter registry.
    Param(usize),
    /// Non-trainable leaf; index into the constant registry.
    Const(usize),
    /// `y = M x` with a fixed real matrix.
    FixedMatVec { matrix: usize, x: NodeId },
    /// `y = W x` with `W` a parameter node holding `rows*cols` values,
    /// row-major.
    MatVec {
        w: NodeId,
        x: NodeId,
        rows: usize,
        cols: usize,
    },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    /// `y = s[0] · x` with a scalar parameter node.
    ScaleByParam { s: NodeId, x: NodeId },
    Activation { x: NodeId, kind: ActivationKind },
    /// Circular convolution with taps `k[-s..s]` stored as a parameter node
    /// of odd length: `y[m] = Σ_i k[i] x[(m-i) mod M]`.
    CircConv { taps: NodeId, x: NodeId },
    /// Complex pointwise multiply on interleaved (re, im) vectors of equal
    /// length.
    ComplexMul { r: NodeId, x: NodeId },
    /// Scalar `Σ x_i²`.
    SumSq { x: NodeId },
}

/// Per-parameter gradients, aligned with the tape's parameter registry.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub by_param: Vec<Vec<f64>>,
}

/// Append-only computation graph with a parameter registry.
pub struct Tape {
    nodes: Vec<Node>,
    shapes: Vec<usize>,
    fixed: Vec<DMatrix<f64>>,
    params: Vec<Vec<f64>>,
    consts: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    forward_done: bool,
    input_len: usize,
}

impl Tape {
    pub fn new(input_len: usize) -> Self {
        Tape {
            nodes: vec![Node::Input],
            shapes: vec![input_len],
            fixed: Vec::new(),
            params: Vec::new(),
            consts: Vec::new(),
            values: Vec::new(),
            forward_done: false,
            input_len,
        }
    }

    /// Node id of the input leaf.
    pub fn input(&self) -> NodeId {
        0
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    fn push(&mut self, node: Node, shape: usize) -> NodeId {
        self.nodes.push(node);
        self.shapes.push(shape);
        self.forward_done = false;
        self.nodes.len() - 1
    }

    pub fn shape(&self, id: NodeId) -> usize {
        self.shapes[id]
    }

    /// Registers a trainable parameter leaf.
    pub fn param(&mut self, values: Vec<f64>) -> NodeId {
        let idx = self.params.len();
        let shape = values.len();
        self.params.push(values);
        self.push(Node::Param(idx), shape)
    }

    /// Registers a non-trainable constant leaf (updatable via
    /// [`Tape::set_const`], e.g. regression targets).
    pub fn constant(&mut self, values: Vec<f64>) -> NodeId {
        let idx = self.consts.len();
        let shape = values.len();
        self.consts.push(values);
        self.push(Node::Const(idx), shape)
    }

    pub fn fixed_matrix(&mut self, m: DMatrix<f64>) -> usize {
        self.fixed.push(m);
        self.fixed.len() - 1
    }

    pub fn fixed_matvec(&mut self, matrix: usize, x: NodeId) -> NodeId {
        let m = &self.fixed[matrix];
        assert_eq!(m.ncols(), self.shapes[x], "fixed matrix input shape");
        let rows = m.nrows();
        self.push(Node::FixedMatVec { matrix, x }, rows)
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId, rows: usize, cols: usize) -> NodeId {
        assert_eq!(self.shapes[w], rows * cols, "weight node shape");
        assert_eq!(self.shapes[x], cols, "matvec input shape");
        self.push(Node::MatVec { w, x, rows, cols }, rows)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.shapes[a], self.shapes[b], "add shapes");
        let shape = self.shapes[a];
        self.push(Node::Add { a, b }, shape)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.shapes[a], self.shapes[b], "sub shapes");
        let shape = self.shapes[a];
        self.push(Node::Sub { a, b }, shape)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let shape = self.shapes[x];
        self.push(Node::Scale { x, c }, shape)
    }

    pub fn scale_by_param(&mut self, s: NodeId, x: NodeId) -> NodeId {
        assert_eq!(self.shapes[s], 1, "scale parameter must be scalar");
        let shape = self.shapes[x];
        self.push(Node::ScaleByParam { s, x }, shape)
    }

    pub fn activation(&mut self, x: NodeId, kind: ActivationKind) -> NodeId {
        let shape = self.shapes[x];
        self.push(Node::Activation { x, kind }, shape)
    }

    pub fn circ_conv(&mut self, taps: NodeId, x: NodeId) -> NodeId {
        assert!(self.shapes[taps] % 2 == 1, "taps length must be odd");
        assert!(self.shapes[taps] <= self.shapes[x], "kernel longer than grid");
        let shape = self.shapes[x];
        self.push(Node::CircConv { taps, x }, shape)
    }

    pub fn complex_mul(&mut self, r: NodeId, x: NodeId) -> NodeId {
        assert_eq!(self.shapes[r], self.shapes[x], "complex_mul shapes");
        assert!(self.shapes[r].is_multiple_of(2), "interleaved length must be even");
        let shape = self.shapes[x];
        self.push(Node::ComplexMul { r, x }, shape)
    }

    pub fn sum_sq(&mut self, x: NodeId) -> NodeId {
        self.push(Node::SumSq { x }, 1)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn param_values(&self, idx: usize) -> &[f64] {
        &self.params[idx]
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn set_param(&mut self, idx: usize, values: Vec<f64>) {
        assert_eq!(self.params[idx].len(), values.len(), "param shape");
        self.params[idx] = values;
        self.forward_done = false;
    }

    pub fn set_const(&mut self, idx: usize, values: Vec<f64>) {
        assert_eq!(self.consts[idx].len(), values.len(), "const shape");
        self.consts[idx] = values;
        self.forward_done = false;
    }

    /// Deterministic forward evaluation; caches every intermediate value.
    /// Returns the value of the last node.
    pub fn forward(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_len {
            return Err(Error::DimensionMismatch {
                what: "tape input",
                expected: self.input_len,
                got: input.len(),
            });
        }
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                Node::Input => input.to_vec(),
                Node::Param(i) => self.params[*i].clone(),
                Node::Const(i) => self.consts[*i].clone(),
                Node::FixedMatVec { matrix, x } => {
                    let m = &self.fixed[*matrix];
                    let xv = &values[*x];
                    let mut out = vec![0.0; m.nrows()];
                    for r in 0..m.nrows() {
                        let mut acc = 0.0;
                        for c in 0..m.ncols() {
                            acc += m[(r, c)] * xv[c];
                        }
                        out[r] = acc;
                    }
                    out
                }
                Node::MatVec { w, x, rows, cols } => {
                    let wv = &values[*w];
                    let xv = &values[*x];
                    let mut out = vec![0.0; *rows];
                    for (r, o) in out.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        let base = r * cols;
                        for c in 0..*cols {
                            acc += wv[base + c] * xv[c];
                        }
                        *o = acc;
                    }
                    out
                }
                Node::Add { a, b } => values[*a]
                    .iter()
                    .zip(&values[*b])
                    .map(|(p, q)| p + q)
                    .collect(),
                Node::Sub { a, b } => values[*a]
                    .iter()
                    .zip(&values[*b])
                    .map(|(p, q)| p - q)
                    .collect(),
                Node::Scale { x, c } => values[*x].iter().map(|v| v * c).collect(),
                Node::ScaleByParam { s, x } => {
                    let sv = values[*s][0];
                    values[*x].iter().map(|v| v * sv).collect()
                }
                Node::Activation { x, kind } => {
                    values[*x].iter().map(|&v| kind.apply(v)).collect()
                }
                Node::CircConv { taps, x } => {
                    circ_conv_forward(&values[*taps], &values[*x])
                }
                Node::ComplexMul { r, x } => complex_mul_forward(&values[*r], &values[*x]),
                Node::SumSq { x } => {
                    vec![values[*x].iter().map(|v| v * v).sum::<f64>()]
                }
            };
            values.push(v);
        }
        self.values = values;
        self.forward_done = true;
        Ok(self.values.last().expect("nonempty tape").clone())
    }

    /// Value of any node from the last forward pass.
    pub fn value(&self, id: NodeId) -> Result<&[f64]> {
        if !self.forward_done {
            return Err(Error::TapeState("value requested before forward"));
        }
        Ok(&self.values[id])
    }

    /// Reverse pass: exact gradients of `⟨cotangent, output⟩` with respect
    /// to every parameter.
    pub fn backward(&self, output_cotangent: &[f64]) -> Result<Gradients> {
        if !self.forward_done {
            return Err(Error::TapeState("backward called before forward"));
        }
        let last = self.nodes.len() - 1;
        if output_cotangent.len() != self.shapes[last] {
            return Err(Error::DimensionMismatch {
                what: "output cotangent",
                expected: self.shapes[last],
                got: output_cotangent.len(),
            });
        }
        let mut adjoints: Vec<Vec<f64>> =
            self.shapes.iter().map(|&s| vec![0.0; s]).collect();
        adjoints[last] = output_cotangent.to_vec();

        for id in (0..self.nodes.len()).rev() {
            let g = std::mem::take(&mut adjoints[id]);
            if g.iter().all(|&v| v == 0.0) {
                adjoints[id] = g;
                continue;
            }
            match &self.nodes[id] {
                Node::Input | Node::Param(_) | Node::Const(_) => {
                    adjoints[id] = g;
                    continue;
                }
                Node::FixedMatVec { matrix, x } => {
                    let m = &self.fixed[*matrix];
                    for c in 0..m.ncols() {
                        let mut acc = 0.0;
                        for r in 0..m.nrows() {
                            acc += m[(r, c)] * g[r];
                        }
                        adjoints[*x][c] += acc;
                    }
                }
                Node::MatVec { w, x, rows, cols } => {
                    let xv = &self.values[*x];
                    let wv = &self.values[*w];
                    for (r, &gr) in g.iter().enumerate().take(*rows) {
                        let base = r * cols;
                        for c in 0..*cols {
                            adjoints[*w][base + c] += gr * xv[c];
                            adjoints[*x][c] += wv[base + c] * gr;
                        }
                    }
                }
                Node::Add { a, b } => {
                    for (i, gi) in g.iter().enumerate() {
                        adjoints[*a][i] += gi;
                        adjoints[*b][i] += gi;
                    }
                }
                Node::Sub { a, b } => {
                    for (i, gi) in g.iter().enumerate() {
                        adjoints[*a][i] += gi;
                        adjoints[*b][i] -= gi;
                    }
                }
                Node::Scale { x, c } => {
                    for (i, gi) in g.iter().enumerate() {
                        adjoints[*x][i] += gi * c;
                    }
                }
                Node::ScaleByParam { s, x } => {
                    let sv = self.values[*s][0];
                    let xv = &self.values[*x];
                    let mut s_acc = 0.0;
                    for (i, gi) in g.iter().enumerate() {
                        adjoints[*x][i] += gi * sv;
                        s_acc += gi * xv[i];
                    }
                    adjoints[*s][0] += s_acc;
                }
                Node::Activation { x, kind } => {
                    let xv = &self.values[*x];
                    for (i, gi) in g.iter().enumerate() {
                        adjoints[*x][i] += gi * kind.derivative(xv[i]);
                    }
                }
                Node::CircConv { taps, x } => {
                    let tv = &self.values[*taps];
                    let xv = &self.values[*x];
                    let m = xv.len() as i64;
                    let s = (tv.len() as i64 - 1) / 2;
                    for (mm, gi) in g.iter().enumerate() {
                        for i in -s..=s {
                            let src = (mm as i64 - i).rem_euclid(m) as usize;
                            adjoints[*taps][(i + s) as usize] += gi * xv[src];
                            adjoints[*x][src] += gi * tv[(i + s) as usize];
                        }
                    }
                }
                Node::ComplexMul { r, x } => {
                    let rv = &self.values[*r];
                    let xv = &self.values[*x];
                    let n = rv.len() / 2;
                    for j in 0..n {
                        let (gre, gim) = (g[2 * j], g[2 * j + 1]);
                        let (rre, rim) = (rv[2 * j], rv[2 * j + 1]);
                        let (xre, xim) = (xv[2 * j], xv[2 * j + 1]);
                        adjoints[*r][2 * j] += gre * xre + gim * xim;
                        adjoints[*r][2 * j + 1] += -gre * xim + gim * xre;
                        adjoints[*x][2 * j] += gre * rre + gim * rim;
                        adjoints[*x][2 * j + 1] += -gre * rim + gim * rre;
                    }
                }
                Node::SumSq { x } => {
                    let xv = &self.values[*x];
                    for (i, &v) in xv.iter().enumerate() {
                        adjoints[*x][i] += 2.0 * v * g[0];
                    }
                }
            }
            adjoints[id] = g;
        }

        let mut by_param: Vec<Vec<f64>> =
            self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Param(idx) = node {
                for (dst, src) in by_param[*idx].iter_mut().zip(&adjoints[id]) {
                    *dst += src;
                }
            }
        }
        Ok(Gradients { by_param })
    }

    /// Whether the last forward pass left any relu input within
    /// `margin` of its kink.
    pub fn near_relu_kink(&self, margin: f64) -> Result<bool> {
        if !self.forward_done {
            return Err(Error::TapeState("kink check before forward"));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Activation {
                x,
                kind: ActivationKind::Relu,
            } = node
            {
                let _ = id;
                if self.values[*x].iter().any(|v| v.abs() < margin) {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

fn circ_conv_forward(taps: &[f64], x: &[f64]) -> Vec<f64> {
    let m = x.len() as i64;
    let s = (taps.len() as i64 - 1) / 2;
    (0..x.len())
        .map(|mm| {
            let mut acc = 0.0;
            for i in -s..=s {
                let src = (mm as i64 - i).rem_euclid(m) as usize;
                acc += taps[(i + s) as usize] * x[src];
            }
            acc
        })
        .collect()
}

fn complex_mul_forward(r: &[f64], x: &[f64]) -> Vec<f64> {
    let n = r.len() / 2;
    let mut out = vec![0.0; r.len()];
    for j in 0..n {
        let (rre, rim) = (r[2 * j], r[2 * j + 1]);
        let (xre, xim) = (x[2 * j], x[2 * j + 1]);
        out[2 * j] = rre * xre - rim * xim;
        out[2 * j + 1] = rre * xim + rim * xre;
    }
    out
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub enum GradCheckStatus {
    Pass,
    Fail,
    /// A relu input sat too close to its kink for central differences to be
    /// trusted.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub status: GradCheckStatus,
    pub max_rel_err: f64,
    /// (parameter registry index, coordinate) of the worst disagreement.
    pub worst: (usize, usize),
}

/// Central-difference check of `backward` against the loss landscape. The
/// tape's last node must be scalar.
pub fn grad_check(
    tape: &mut Tape,
    input: &[f64],
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let out = tape.forward(input)?;
    if out.len() != 1 {
        return Err(Error::TapeState("grad_check needs a scalar output"));
    }
    if tape.near_relu_kink(10.0 * epsilon)? {
        return Ok(GradCheckReport {
            status: GradCheckStatus::Inconclusive,
            max_rel_err: f64::NAN,
            worst: (0, 0),
        });
    }
    let analytic = tape.backward(&[1.0])?;
    let fd = finite_difference_gradients(tape, input, epsilon)?;
    let report = compare_gradients(&analytic, &fd, tolerance);
    Ok(report)
}

/// Central-difference gradients of a scalar-output tape, parameter by
/// parameter. Independent of the reverse pass.
pub fn finite_difference_gradients(
    tape: &mut Tape,
    input: &[f64],
    epsilon: f64,
) -> Result<Gradients> {
    let mut by_param = Vec::with_capacity(tape.param_count());
    for p in 0..tape.param_count() {
        let base = tape.param_values(p).to_vec();
        let mut grad = vec![0.0; base.len()];
        for (i, g) in grad.iter_mut().enumerate() {
            let mut plus = base.clone();
            plus[i] += epsilon;
            tape.set_param(p, plus);
            let fp = tape.forward(input)?[0];
            let mut minus = base.clone();
            minus[i] -= epsilon;
            tape.set_param(p, minus);
            let fm = tape.forward(input)?[0];
            *g = (fp - fm) / (2.0 * epsilon);
        }
        tape.set_param(p, base);
        by_param.push(grad);
    }
    // restore cached values for the unperturbed point
    tape.forward(input)?;
    Ok(Gradients { by_param })
}

/// Max relative disagreement between two gradient sets.
pub fn compare_gradients(a: &Gradients, b: &Gradients, tolerance: f64) -> GradCheckReport {
    let mut max_rel_err: f64 = 0.0;
    let mut worst = (0, 0);
    for (p, (ga, gb)) in a.by_param.iter().zip(&b.by_param).enumerate() {
        for (i, (&x, &y)) in ga.iter().zip(gb).enumerate() {
            let scale = x.abs().max(y.abs()).max(1.0);
            let rel = (x - y).abs() / scale;
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = (p, i);
            }
        }
    }
    GradCheckReport {
        status: if max_rel_err <= tolerance {
            GradCheckStatus::Pass
        } else {
            GradCheckStatus::Fail
        },
        max_rel_err,
        worst,
    }
}
