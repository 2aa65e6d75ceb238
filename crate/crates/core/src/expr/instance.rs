use rand::Rng;

use super::ops::{BinaryOp, Operator, UnaryOp};
use super::template::{NodeShape, OperatorSequence, TreeTemplate};
use crate::error::{Error, Result};

/// A concrete symbolic expression `u(x; e, theta)`: a tree template, one operator
/// per slot, and the trainable parameters.
///
/// Every unary node computes `alpha * op(beta * z + gamma)` elementwise on its
/// d-dimensional input `z`; leaves read the state `x`. The root's d-vector is reduced
/// to a scalar by the readout `w . v + b`.
///
/// Parameter layout: `[alpha, beta, gamma]` for each unary slot in slot order,
/// then `w` (length d), then `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionInstance {
    template: TreeTemplate,
    sequence: OperatorSequence,
    params: Vec<f64>,
    dim: usize,
}

/// Per-node values recorded by [`ExpressionInstance::evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrace {
    input: Vec<f64>,
    /// Pre-activation `beta * z + gamma` for unary nodes, empty for binary ones.
    pre: Vec<Vec<f64>>,
    /// Node outputs.
    out: Vec<Vec<f64>>,
    value: f64,
}

impl EvalTrace {
    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn node_output(&self, node: usize) -> &[f64] {
        &self.out[node]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.out.iter().flatten().all(|v| v.is_finite())
    }
}

impl ExpressionInstance {
    pub fn new(
        template: TreeTemplate,
        sequence: OperatorSequence,
        params: Vec<f64>,
        dim: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("input dimension must be at least 1"));
        }
        OperatorSequence::new(&template, sequence.ops().to_vec())?;
        let expected = template.param_count(dim);
        if params.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: params.len(),
            });
        }
        Ok(ExpressionInstance {
            template,
            sequence,
            params,
            dim,
        })
    }

    /// Near-identity start: `alpha = beta = 1`, `gamma = 0`, `w = 1/d`, `b = 0`, each
    /// with additive Uniform(-0.1, 0.1) jitter.
    pub fn initialized<R: Rng + ?Sized>(
        template: TreeTemplate,
        sequence: OperatorSequence,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let nu = template.unary_count();
        let mut params = Vec::with_capacity(template.param_count(dim));
        let mut jitter = || rng.random_range(-0.1..0.1);
        for _ in 0..nu {
            params.push(1.0 + jitter());
            params.push(1.0 + jitter());
            params.push(jitter());
        }
        for _ in 0..dim {
            params.push(1.0 / dim as f64 + jitter());
        }
        params.push(jitter());
        ExpressionInstance::new(template, sequence, params, dim)
    }

    pub fn template(&self) -> &TreeTemplate {
        &self.template
    }

    pub fn sequence(&self) -> &OperatorSequence {
        &self.sequence
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape {
                expected: self.params.len(),
                actual: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// `(alpha, beta, gamma)` of unary slot `k`.
    pub fn unary_params(&self, k: usize) -> (f64, f64, f64) {
        (
            self.params[3 * k],
            self.params[3 * k + 1],
            self.params[3 * k + 2],
        )
    }

    /// Readout weights and bias.
    pub fn readout(&self) -> (&[f64], f64) {
        let start = 3 * self.template.unary_count();
        (
            &self.params[start..start + self.dim],
            self.params[start + self.dim],
        )
    }

    pub(crate) fn readout_offset(&self) -> usize {
        3 * self.template.unary_count()
    }

    /// Shifts the readout bias, i.e. adds a constant to the expression.
    pub fn shift_bias(&mut self, delta: f64) {
        let idx = self.params.len() - 1;
        self.params[idx] += delta;
    }

    pub(crate) fn unary_op(&self, slot: usize) -> UnaryOp {
        match self.sequence.ops()[slot] {
            Operator::Unary(u) => u,
            Operator::Binary(_) => unreachable!("slot kinds are validated at construction"),
        }
    }

    pub(crate) fn binary_op(&self, slot: usize) -> BinaryOp {
        match self.sequence.ops()[slot] {
            Operator::Binary(b) => b,
            Operator::Unary(_) => unreachable!("slot kinds are validated at construction"),
        }
    }

    /// Evaluates the expression at `x`, recording every node's value.
    ///
    /// Overflow is not an error here: the value comes back non-finite and callers
    /// treat the candidate's loss as infinite.
    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, EvalTrace)> {
        self.check_input(x)?;
        let d = self.dim;
        let nodes = self.template.nodes();
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(nodes.len());
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(nodes.len());
        for node in nodes {
            match node.shape {
                NodeShape::Unary { child } => {
                    let (a, b, g) = self.unary_params(node.unary_index);
                    let op = self.unary_op(node.slot);
                    let z = child.map_or(x, |c| out[c].as_slice());
                    let s: Vec<f64> = z.iter().map(|&zi| b * zi + g).collect();
                    let o: Vec<f64> = s.iter().map(|&si| a * op.apply(si)).collect();
                    pre.push(s);
                    out.push(o);
                }
                NodeShape::Binary { left, right } => {
                    let op = self.binary_op(node.slot);
                    let o: Vec<f64> = (0..d)
                        .map(|k| op.apply(out[left][k], out[right][k]))
                        .collect();
                    pre.push(Vec::new());
                    out.push(o);
                }
            }
        }
        let (w, bias) = self.readout();
        let root = out.last().expect("templates have at least one node");
        let value = w.iter().zip(root).map(|(wk, vk)| wk * vk).sum::<f64>() + bias;
        let trace = EvalTrace {
            input: x.to_vec(),
            pre,
            out,
            value,
        };
        Ok((value, trace))
    }

    /// Value only, without building a trace.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        let nodes = self.template.nodes();
        let mut buf = vec![0.0; nodes.len() * d];
        for (i, node) in nodes.iter().enumerate() {
            let (done, rest) = buf.split_at_mut(i * d);
            let o = &mut rest[..d];
            match node.shape {
                NodeShape::Unary { child } => {
                    let (a, b, g) = self.unary_params(node.unary_index);
                    let op = self.unary_op(node.slot);
                    let z = child.map_or(x, |c| &done[c * d..(c + 1) * d]);
                    for k in 0..d {
                        o[k] = a * op.apply(b * z[k] + g);
                    }
                }
                NodeShape::Binary { left, right } => {
                    let op = self.binary_op(node.slot);
                    for k in 0..d {
                        o[k] = op.apply(done[left * d + k], done[right * d + k]);
                    }
                }
            }
        }
        let (w, bias) = self.readout();
        let root = &buf[(nodes.len() - 1) * d..];
        w.iter().zip(root).map(|(wk, vk)| wk * vk).sum::<f64>() + bias
    }

    /// Gradient of `upstream * value` with respect to the parameters, by reverse
    /// accumulation through a trace produced by [`evaluate`](Self::evaluate).
    pub fn grad_params(&self, trace: &EvalTrace, upstream: f64) -> Result<Vec<f64>> {
        if trace.len() != self.template.node_count() || trace.input.len() != self.dim {
            return Err(Error::Shape {
                expected: self.template.node_count(),
                actual: trace.len(),
            });
        }
        if !trace.is_finite() {
            return Err(Error::numerical("trace contains non-finite values"));
        }
        let d = self.dim;
        let nodes = self.template.nodes();
        let mut grad = vec![0.0; self.params.len()];
        let off = self.readout_offset();
        let (w, _) = self.readout();
        let root = nodes.len() - 1;
        let mut g_out: Vec<Vec<f64>> = vec![vec![0.0; d]; nodes.len()];
        for k in 0..d {
            grad[off + k] = upstream * trace.out[root][k];
            g_out[root][k] = upstream * w[k];
        }
        grad[off + d] = upstream;

        for (i, node) in nodes.iter().enumerate().rev() {
            let g = std::mem::take(&mut g_out[i]);
            match node.shape {
                NodeShape::Unary { child } => {
                    let ui = node.unary_index;
                    let (a, b, _) = self.unary_params(ui);
                    let op = self.unary_op(node.slot);
                    let z = child.map_or(trace.input.as_slice(), |c| trace.out[c].as_slice());
                    let mut g_child = vec![0.0; d];
                    for k in 0..d {
                        let (f, fp) = op.apply_with_derivative(trace.pre[i][k]);
                        grad[3 * ui] += g[k] * f;
                        let gs = g[k] * a * fp;
                        grad[3 * ui + 1] += gs * z[k];
                        grad[3 * ui + 2] += gs;
                        g_child[k] = gs * b;
                    }
                    if let Some(c) = child {
                        g_out[c] = g_child;
                    }
                }
                NodeShape::Binary { left, right } => {
                    let op = self.binary_op(node.slot);
                    let (gl, gr): (Vec<f64>, Vec<f64>) = match op {
                        BinaryOp::Add => (g.clone(), g.clone()),
                        BinaryOp::Sub => (g.clone(), g.iter().map(|v| -v).collect()),
                        BinaryOp::Mul => (
                            (0..d).map(|k| g[k] * trace.out[right][k]).collect(),
                            (0..d).map(|k| g[k] * trace.out[left][k]).collect(),
                        ),
                    };
                    g_out[left] = gl;
                    g_out[right] = gr;
                }
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite parameter gradient"));
        }
        Ok(grad)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// Scratch buffers for batched mean-squared-error evaluation.
///
/// Holds one `n x d` buffer per tree node so a single instance can be fit over
/// thousands of samples without per-sample allocation.
#[derive(Debug, Default, Clone)]
pub struct BatchWorkspace {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    raw: Vec<Vec<f64>>,
    deriv: Vec<Vec<f64>>,
    out: Vec<Vec<f64>>,
    g_out: Vec<Vec<f64>>,
    resid: Vec<f64>,
}

impl BatchWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, nodes: usize, n: usize, d: usize) {
        self.n = n;
        self.d = d;
        let len = n * d;
        for bufs in [
            &mut self.raw,
            &mut self.deriv,
            &mut self.out,
            &mut self.g_out,
        ] {
            bufs.resize_with(nodes, Vec::new);
            for b in bufs.iter_mut() {
                b.resize(len, 0.0);
            }
        }
        self.resid.resize(n, 0.0);
    }

    /// Copies the rows `indices` of `(inputs, targets)` into the workspace.
    pub fn gather(&mut self, inputs: &[f64], targets: &[f64], d: usize, indices: &[usize]) {
        self.x.clear();
        self.y.clear();
        for &i in indices {
            self.x.extend_from_slice(&inputs[i * d..(i + 1) * d]);
            self.y.push(targets[i]);
        }
    }

    /// Loads all rows.
    pub fn load(&mut self, inputs: &[f64], targets: &[f64]) {
        self.x.clear();
        self.x.extend_from_slice(inputs);
        self.y.clear();
        self.y.extend_from_slice(targets);
    }
}

impl ExpressionInstance {
    fn batch_forward(&self, ws: &mut BatchWorkspace) {
        let d = self.dim;
        let n = ws.y.len();
        let nodes = self.template.nodes();
        ws.prepare(nodes.len(), n, d);
        let len = n * d;
        for (i, node) in nodes.iter().enumerate() {
            let (done, rest) = ws.out.split_at_mut(i);
            let out = &mut rest[0];
            match node.shape {
                NodeShape::Unary { child } => {
                    let (a, b, g) = self.unary_params(node.unary_index);
                    let op = self.unary_op(node.slot);
                    let z: &[f64] = child.map_or(&ws.x[..], |c| &done[c][..]);
                    let raw = &mut ws.raw[i];
                    let der = &mut ws.deriv[i];
                    for j in 0..len {
                        let (f, fp) = op.apply_with_derivative(b * z[j] + g);
                        raw[j] = f;
                        der[j] = fp;
                        out[j] = a * f;
                    }
                }
                NodeShape::Binary { left, right } => {
                    let op = self.binary_op(node.slot);
                    let (l, r) = (&done[left], &done[right]);
                    for j in 0..len {
                        out[j] = op.apply(l[j], r[j]);
                    }
                }
            }
        }
        let (w, bias) = self.readout();
        let root = &ws.out[nodes.len() - 1];
        for i in 0..n {
            let mut p = bias;
            for k in 0..d {
                p += w[k] * root[i * d + k];
            }
            ws.resid[i] = p - ws.y[i];
        }
    }

    /// Mean squared error over the rows loaded in `ws`. Non-finite results map to +inf.
    pub fn batch_loss(&self, ws: &mut BatchWorkspace) -> f64 {
        self.batch_forward(ws);
        let inv_n = 1.0 / ws.y.len().max(1) as f64;
        let loss = ws.resid.iter().map(|r| r * r).sum::<f64>() * inv_n;
        if loss.is_finite() {
            loss
        } else {
            f64::INFINITY
        }
    }

    /// Mean squared error and its parameter gradient over the rows loaded in `ws`.
    /// Returns an infinite loss (and an unusable gradient) on overflow.
    pub fn batch_loss_and_grad(&self, ws: &mut BatchWorkspace, grad: &mut Vec<f64>) -> f64 {
        self.batch_forward(ws);
        let d = self.dim;
        let n = ws.y.len();
        let inv_n = 1.0 / n.max(1) as f64;
        let loss = ws.resid.iter().map(|r| r * r).sum::<f64>() * inv_n;
        grad.clear();
        grad.resize(self.params.len(), 0.0);
        if !loss.is_finite() {
            return f64::INFINITY;
        }

        let nodes = self.template.nodes();
        let root = nodes.len() - 1;
        let off = self.readout_offset();
        let (w, _) = self.readout();
        {
            let root_out = &ws.out[root];
            let g_root = &mut ws.g_out[root];
            for i in 0..n {
                let dp = 2.0 * ws.resid[i] * inv_n;
                grad[off + d] += dp;
                for k in 0..d {
                    grad[off + k] += dp * root_out[i * d + k];
                    g_root[i * d + k] = dp * w[k];
                }
            }
        }
        let len = n * d;
        for (i, node) in nodes.iter().enumerate().rev() {
            match node.shape {
                NodeShape::Unary { child } => {
                    let ui = node.unary_index;
                    let (a, b, _) = self.unary_params(ui);
                    let (mut ga, mut gb, mut gg) = (0.0, 0.0, 0.0);
                    let (lower, upper) = ws.g_out.split_at_mut(i);
                    let g_here = &upper[0];
                    let raw = &ws.raw[i];
                    let der = &ws.deriv[i];
                    match child {
                        None => {
                            for j in 0..len {
                                ga += g_here[j] * raw[j];
                                let gs = g_here[j] * a * der[j];
                                gb += gs * ws.x[j];
                                gg += gs;
                            }
                        }
                        Some(c) => {
                            let z = &ws.out[c];
                            let g_child = &mut lower[c];
                            for j in 0..len {
                                ga += g_here[j] * raw[j];
                                let gs = g_here[j] * a * der[j];
                                gb += gs * z[j];
                                gg += gs;
                                g_child[j] = gs * b;
                            }
                        }
                    }
                    grad[3 * ui] += ga;
                    grad[3 * ui + 1] += gb;
                    grad[3 * ui + 2] += gg;
                }
                NodeShape::Binary { left, right } => {
                    let op = self.binary_op(node.slot);
                    let (lower, upper) = ws.g_out.split_at_mut(i);
                    let g_here = &upper[0];
                    // left and right are distinct children below i
                    let (gl, gr) = if left < right {
                        let (a, bpart) = lower.split_at_mut(right);
                        (&mut a[left], &mut bpart[0])
                    } else {
                        let (a, bpart) = lower.split_at_mut(left);
                        (&mut bpart[0], &mut a[right])
                    };
                    match op {
                        BinaryOp::Add => {
                            gl.copy_from_slice(g_here);
                            gr.copy_from_slice(g_here);
                        }
                        BinaryOp::Sub => {
                            gl.copy_from_slice(g_here);
                            for j in 0..len {
                                gr[j] = -g_here[j];
                            }
                        }
                        BinaryOp::Mul => {
                            let (lv, rv) = (&ws.out[left], &ws.out[right]);
                            for j in 0..len {
                                gl[j] = g_here[j] * rv[j];
                                gr[j] = g_here[j] * lv[j];
                            }
                        }
                    }
                }
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        loss
    }
}
