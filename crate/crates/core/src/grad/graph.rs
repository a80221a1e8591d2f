use std::cell::{Ref, RefCell};

use super::gemm::gemm;
use super::{GradError, Tensor};

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    Tanh(usize),
    Softplus(usize),
    Exp(usize),
    Log(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    MinPairwise(usize, usize),
    Clip { input: usize, lo: f64, hi: f64 },
    MatMul { a: usize, b: usize, m: usize, k: usize, n: usize },
    AddBias { input: usize, bias: usize },
    Expand(usize),
    Reshape(usize),
    ReverseWidth { input: usize, signs: Vec<f64> },
    Conv2d { input: usize, kernels: usize, bias: Option<usize>, cols: Vec<f64>, dims: ConvDims },
    MeanSpatial { input: usize, plane: usize },
    GaussianLogPdf { x: usize, mean: usize, log_std: usize },
}

#[derive(Debug, Clone, Copy)]
struct ConvDims {
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    kernels: usize,
}

impl ConvDims {
    fn pixels(&self) -> usize {
        self.batch * self.height * self.width
    }

    fn patch(&self) -> usize {
        self.channels * 9
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Tape of recorded operations.
///
/// Nodes are appended in evaluation order, so every node's operands precede
/// it and a single reverse sweep visits each node once. Gradients of leaves
/// accumulate across repeated [`Graph::backward`] calls until
/// [`Graph::zero_grad`] is called.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Vec<f64>>>>,
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Leaf whose gradient is tracked.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, var: Var<'_>) -> Option<Tensor> {
        let grads = self.grads.borrow();
        let g = grads.get(var.id)?.as_ref()?;
        let shape = self.nodes.borrow()[var.id].value.shape().to_vec();
        Some(Tensor::new(&shape, g.clone()).expect("gradient shape matches value"))
    }

    /// Gradient of a leaf, or zeros when no backward pass reached it.
    pub fn grad_or_zeros(&self, var: Var<'_>) -> Tensor {
        self.grad(var).unwrap_or_else(|| Tensor::zeros(&var.shape()))
    }

    pub fn zero_grad(&self) {
        self.grads.borrow_mut().iter_mut().for_each(|g| *g = None);
    }

    /// Reverse sweep from a scalar root; adjoints of grad-enabled leaves are
    /// added to whatever earlier passes left there.
    pub fn backward(&self, root: Var<'_>) -> Result<(), GradError> {
        let nodes = self.nodes.borrow();
        let root_node = &nodes[root.id];
        if root_node.value.len() != 1 {
            return Err(GradError::Usage(format!(
                "backward needs a scalar root, got shape {:?}",
                root_node.value.shape()
            )));
        }
        if !root_node.requires_grad {
            return Err(GradError::Usage("backward root does not depend on any parameter".into()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..=root.id).map(|_| None).collect();
        adj[root.id] = Some(vec![1.0]);
        let mut grads = self.grads.borrow_mut();
        if grads.len() < nodes.len() {
            grads.resize(nodes.len(), None);
        }
        for id in (0..=root.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            if let Op::Leaf = node.op {
                if node.requires_grad {
                    match &mut grads[id] {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        slot => *slot = Some(g),
                    }
                }
                continue;
            }
            propagate(&nodes, id, &g, &mut adj);
        }
        Ok(())
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad });
        Var { graph: self, id: nodes.len() - 1 }
    }

    fn node(&self, id: usize) -> Ref<'_, Node> {
        Ref::map(self.nodes.borrow(), |n| &n[id])
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, f: impl FnOnce(&mut [f64])) {
    if !nodes[id].requires_grad {
        return;
    }
    let slot = adj[id].get_or_insert_with(|| vec![0.0; nodes[id].value.len()]);
    f(slot);
}

fn propagate(nodes: &[Node], id: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
    let out = nodes[id].value.data();
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(adj, nodes, *a, |s| add_into(s, g));
            accumulate(adj, nodes, *b, |s| add_into(s, g));
        }
        Op::Sub(a, b) => {
            accumulate(adj, nodes, *a, |s| add_into(s, g));
            accumulate(adj, nodes, *b, |s| s.iter_mut().zip(g).for_each(|(s, g)| *s -= g));
        }
        Op::Mul(a, b) => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            accumulate(adj, nodes, *a, |s| {
                for i in 0..s.len() {
                    s[i] += g[i] * bv[i];
                }
            });
            accumulate(adj, nodes, *b, |s| {
                for i in 0..s.len() {
                    s[i] += g[i] * av[i];
                }
            });
        }
        Op::Scale(a, c) => accumulate(adj, nodes, *a, |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += c * g)),
        Op::Offset(a) | Op::Reshape(a) => accumulate(adj, nodes, *a, |s| add_into(s, g)),
        Op::Tanh(a) => accumulate(adj, nodes, *a, |s| {
            for i in 0..s.len() {
                s[i] += g[i] * (1.0 - out[i] * out[i]);
            }
        }),
        Op::Softplus(a) => {
            let x = nodes[*a].value.data();
            accumulate(adj, nodes, *a, |s| {
                for i in 0..s.len() {
                    s[i] += g[i] * sigmoid(x[i]);
                }
            })
        }
        Op::Exp(a) => accumulate(adj, nodes, *a, |s| {
            for i in 0..s.len() {
                s[i] += g[i] * out[i];
            }
        }),
        Op::Log(a) => {
            let x = nodes[*a].value.data();
            accumulate(adj, nodes, *a, |s| {
                for i in 0..s.len() {
                    s[i] += g[i] / x[i];
                }
            })
        }
        Op::Square(a) => {
            let x = nodes[*a].value.data();
            accumulate(adj, nodes, *a, |s| {
                for i in 0..s.len() {
                    s[i] += 2.0 * g[i] * x[i];
                }
            })
        }
        Op::Sum(a) => accumulate(adj, nodes, *a, |s| s.iter_mut().for_each(|s| *s += g[0])),
        Op::Mean(a) => {
            let n = nodes[*a].value.len() as f64;
            accumulate(adj, nodes, *a, |s| s.iter_mut().for_each(|s| *s += g[0] / n))
        }
        Op::MinPairwise(a, b) => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            accumulate(adj, nodes, *a, |s| {
                for i in 0..s.len() {
                    if av[i] <= bv[i] {
                        s[i] += g[i];
                    }
                }
            });
            accumulate(adj, nodes, *b, |s| {
                for i in 0..s.len() {
                    if av[i] > bv[i] {
                        s[i] += g[i];
                    }
                }
            });
        }
        Op::Clip { input, lo, hi } => {
            let x = nodes[*input].value.data();
            accumulate(adj, nodes, *input, |s| {
                for i in 0..s.len() {
                    if x[i] >= *lo && x[i] <= *hi {
                        s[i] += g[i];
                    }
                }
            })
        }
        Op::MatMul { a, b, m, k, n } => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            accumulate(adj, nodes, *a, |s| gemm(*m, *n, *k, g, false, bv, true, s, 1.0));
            accumulate(adj, nodes, *b, |s| gemm(*k, *m, *n, av, true, g, false, s, 1.0));
        }
        Op::AddBias { input, bias } => {
            accumulate(adj, nodes, *input, |s| add_into(s, g));
            accumulate(adj, nodes, *bias, |s| {
                let width = s.len();
                for row in g.chunks(width) {
                    add_into(s, row);
                }
            });
        }
        Op::Expand(a) => {
            let total: f64 = g.iter().sum();
            accumulate(adj, nodes, *a, |s| s[0] += total)
        }
        Op::ReverseWidth { input, signs } => {
            let shape = nodes[*input].value.shape();
            accumulate(adj, nodes, *input, |s| reverse_width_into(shape, signs, g, s, true));
        }
        Op::Conv2d { input, kernels, bias, cols, dims } => {
            let d = *dims;
            let g_pk = nkhw_to_pk(g, d);
            if let Some(bias) = bias {
                accumulate(adj, nodes, *bias, |s| {
                    for row in g_pk.chunks(d.kernels) {
                        add_into(s, row);
                    }
                });
            }
            accumulate(adj, nodes, *kernels, |s| {
                gemm(d.kernels, d.pixels(), d.patch(), &g_pk, true, cols, false, s, 1.0)
            });
            if nodes[*input].requires_grad {
                let kv = nodes[*kernels].value.data();
                let mut g_cols = vec![0.0; d.pixels() * d.patch()];
                gemm(d.pixels(), d.kernels, d.patch(), &g_pk, false, kv, false, &mut g_cols, 0.0);
                accumulate(adj, nodes, *input, |s| col2im(&g_cols, d, s));
            }
        }
        Op::MeanSpatial { input, plane } => {
            let p = *plane;
            accumulate(adj, nodes, *input, |s| {
                for (chunk, gi) in s.chunks_mut(p).zip(g) {
                    chunk.iter_mut().for_each(|v| *v += gi / p as f64);
                }
            })
        }
        Op::GaussianLogPdf { x, mean, log_std } => {
            let xv = nodes[*x].value.data();
            let mv = nodes[*mean].value.data();
            let lv = nodes[*log_std].value.data();
            let z = |i: usize| (xv[i] - mv[i]) * (-lv[i]).exp();
            accumulate(adj, nodes, *x, |s| {
                for i in 0..s.len() {
                    s[i] -= g[i] * z(i) * (-lv[i]).exp();
                }
            });
            accumulate(adj, nodes, *mean, |s| {
                for i in 0..s.len() {
                    s[i] += g[i] * z(i) * (-lv[i]).exp();
                }
            });
            accumulate(adj, nodes, *log_std, |s| {
                for i in 0..s.len() {
                    let zi = z(i);
                    s[i] += g[i] * (zi * zi - 1.0);
                }
            });
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Reverse the last axis; channel axis is the third from the end.
fn reverse_width_into(shape: &[usize], signs: &[f64], src: &[f64], dst: &mut [f64], add: bool) {
    let rank = shape.len();
    let (c, h, w) = (shape[rank - 3], shape[rank - 2], shape[rank - 1]);
    for (s_blk, d_blk) in src.chunks(c * h * w).zip(dst.chunks_mut(c * h * w)) {
        for ch in 0..c {
            let sign = signs[ch];
            for row in 0..h {
                let base = (ch * h + row) * w;
                for col in 0..w {
                    let v = sign * s_blk[base + w - 1 - col];
                    if add {
                        d_blk[base + col] += v;
                    } else {
                        d_blk[base + col] = v;
                    }
                }
            }
        }
    }
}

fn im2col(input: &[f64], d: ConvDims) -> Vec<f64> {
    let (h, w, c) = (d.height, d.width, d.channels);
    let mut cols = vec![0.0; d.pixels() * d.patch()];
    for b in 0..d.batch {
        for y in 0..h {
            for x in 0..w {
                let row = ((b * h + y) * w + x) * d.patch();
                for ch in 0..c {
                    for dy in 0..3 {
                        let yy = y as isize + dy as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for dx in 0..3 {
                            let xx = x as isize + dx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            cols[row + ch * 9 + dy * 3 + dx] =
                                input[((b * c + ch) * h + yy as usize) * w + xx as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], d: ConvDims, dst: &mut [f64]) {
    let (h, w, c) = (d.height, d.width, d.channels);
    for b in 0..d.batch {
        for y in 0..h {
            for x in 0..w {
                let row = ((b * h + y) * w + x) * d.patch();
                for ch in 0..c {
                    for dy in 0..3 {
                        let yy = y as isize + dy as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for dx in 0..3 {
                            let xx = x as isize + dx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            dst[((b * c + ch) * h + yy as usize) * w + xx as usize] +=
                                cols[row + ch * 9 + dy * 3 + dx];
                        }
                    }
                }
            }
        }
    }
}

/// `[B, K, H, W]` -> `[B*H*W, K]`.
fn nkhw_to_pk(src: &[f64], d: ConvDims) -> Vec<f64> {
    let hw = d.height * d.width;
    let mut out = vec![0.0; src.len()];
    for b in 0..d.batch {
        for k in 0..d.kernels {
            for p in 0..hw {
                out[(b * hw + p) * d.kernels + k] = src[(b * d.kernels + k) * hw + p];
            }
        }
    }
    out
}

impl<'g> Var<'g> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn value(&self) -> Tensor {
        self.graph.node(self.id).value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.node(self.id).value.shape().to_vec()
    }

    /// Value of a one-element node.
    pub fn item(&self) -> f64 {
        self.graph.node(self.id).value.item()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.node(self.id).requires_grad
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Var<'g> {
        let value = self.graph.node(self.id).value.map(f);
        let rg = self.requires_grad();
        self.graph.push(value, op, rg)
    }

    fn binary(&self, other: Var<'g>, name: &str, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var<'g>, GradError> {
        let value = {
            let a = self.graph.node(self.id);
            let b = self.graph.node(other.id);
            if a.value.shape() != b.value.shape() {
                return Err(GradError::Dimension(format!(
                    "{name}: shapes {:?} and {:?} differ",
                    a.value.shape(),
                    b.value.shape()
                )));
            }
            let data = a.value.data().iter().zip(b.value.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(a.value.shape(), data)?
        };
        let rg = self.graph.requires(&[self.id, other.id]);
        Ok(self.graph.push(value, op, rg))
    }

    pub fn add(&self, other: Var<'g>) -> Result<Var<'g>, GradError> {
        self.binary(other, "add", Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(&self, other: Var<'g>) -> Result<Var<'g>, GradError> {
        self.binary(other, "sub", Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(&self, other: Var<'g>) -> Result<Var<'g>, GradError> {
        self.binary(other, "mul", Op::Mul(self.id, other.id), |a, b| a * b)
    }

    /// Elementwise minimum; on ties the adjoint goes to `self`.
    pub fn min_pairwise(&self, other: Var<'g>) -> Result<Var<'g>, GradError> {
        self.binary(other, "min_pairwise", Op::MinPairwise(self.id, other.id), |a, b| if a <= b { a } else { b })
    }

    pub fn scale(&self, c: f64) -> Var<'g> {
        self.unary(Op::Scale(self.id, c), |v| c * v)
    }

    pub fn neg(&self) -> Var<'g> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Var<'g> {
        self.unary(Op::Offset(self.id), |v| v + c)
    }

    pub fn tanh(&self) -> Var<'g> {
        self.unary(Op::Tanh(self.id), f64::tanh)
    }

    pub fn softplus(&self) -> Var<'g> {
        self.unary(Op::Softplus(self.id), softplus)
    }

    pub fn exp(&self) -> Var<'g> {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    pub fn square(&self) -> Var<'g> {
        self.unary(Op::Square(self.id), |v| v * v)
    }

    pub fn log(&self) -> Result<Var<'g>, GradError> {
        if let Some(bad) = self.graph.node(self.id).value.data().iter().find(|v| !(**v > 0.0)) {
            return Err(GradError::Domain(format!("log of non-positive value {bad}")));
        }
        Ok(self.unary(Op::Log(self.id), f64::ln))
    }

    /// Clamp into `[lo, hi]`; the adjoint is zero outside the band.
    pub fn clip(&self, lo: f64, hi: f64) -> Var<'g> {
        self.unary(Op::Clip { input: self.id, lo, hi }, |v| v.clamp(lo, hi))
    }

    pub fn sum(&self) -> Var<'g> {
        let total: f64 = self.graph.node(self.id).value.data().iter().sum();
        let rg = self.requires_grad();
        self.graph.push(Tensor::scalar(total), Op::Sum(self.id), rg)
    }

    pub fn mean(&self) -> Var<'g> {
        let value = {
            let node = self.graph.node(self.id);
            let n = node.value.len().max(1) as f64;
            node.value.data().iter().sum::<f64>() / n
        };
        let rg = self.requires_grad();
        self.graph.push(Tensor::scalar(value), Op::Mean(self.id), rg)
    }

    pub fn matmul(&self, other: Var<'g>) -> Result<Var<'g>, GradError> {
        let (value, m, k, n) = {
            let a = self.graph.node(self.id);
            let b = self.graph.node(other.id);
            let (sa, sb) = (a.value.shape(), b.value.shape());
            if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
                return Err(GradError::Dimension(format!("matmul: cannot multiply {sa:?} by {sb:?}")));
            }
            let (m, k, n) = (sa[0], sa[1], sb[1]);
            let mut c = vec![0.0; m * n];
            gemm(m, k, n, a.value.data(), false, b.value.data(), false, &mut c, 0.0);
            (Tensor::new(&[m, n], c)?, m, k, n)
        };
        let rg = self.graph.requires(&[self.id, other.id]);
        Ok(self.graph.push(value, Op::MatMul { a: self.id, b: other.id, m, k, n }, rg))
    }

    /// Adds a `[n]` bias to every row of a `[.., n]` tensor.
    pub fn add_bias(&self, bias: Var<'g>) -> Result<Var<'g>, GradError> {
        let value = {
            let x = self.graph.node(self.id);
            let b = self.graph.node(bias.id);
            let n = b.value.len();
            if x.value.shape().last() != Some(&n) || b.value.shape().len() != 1 {
                return Err(GradError::Dimension(format!(
                    "add_bias: bias {:?} does not match rows of {:?}",
                    b.value.shape(),
                    x.value.shape()
                )));
            }
            let mut data = x.value.data().to_vec();
            for row in data.chunks_mut(n) {
                add_into(row, b.value.data());
            }
            Tensor::new(x.value.shape(), data)?
        };
        let rg = self.graph.requires(&[self.id, bias.id]);
        Ok(self.graph.push(value, Op::AddBias { input: self.id, bias: bias.id }, rg))
    }

    /// Broadcast a one-element tensor to `shape`.
    pub fn expand(&self, shape: &[usize]) -> Result<Var<'g>, GradError> {
        let value = {
            let node = self.graph.node(self.id);
            if node.value.len() != 1 {
                return Err(GradError::Dimension(format!(
                    "expand: only one-element tensors broadcast, got {:?}",
                    node.value.shape()
                )));
            }
            Tensor::full(shape, node.value.item())
        };
        let rg = self.requires_grad();
        Ok(self.graph.push(value, Op::Expand(self.id), rg))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'g>, GradError> {
        let value = self.value().reshaped(shape)?;
        let rg = self.requires_grad();
        Ok(self.graph.push(value, Op::Reshape(self.id), rg))
    }

    /// Reverse the width axis of a `[.., C, H, W]` tensor and multiply channel
    /// `c` by `signs[c]`. Applying it twice with the same mask is the identity.
    pub fn reverse_width(&self, signs: &[f64]) -> Result<Var<'g>, GradError> {
        let value = {
            let node = self.graph.node(self.id);
            let shape = node.value.shape();
            if shape.len() < 3 || shape[shape.len() - 3] != signs.len() {
                return Err(GradError::Dimension(format!(
                    "reverse_width: {} signs for shape {:?}",
                    signs.len(),
                    shape
                )));
            }
            if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
                return Err(GradError::Usage(format!("reverse_width: sign mask {signs:?} must be +-1")));
            }
            let mut data = vec![0.0; node.value.len()];
            reverse_width_into(shape, signs, node.value.data(), &mut data, false);
            Tensor::new(shape, data)?
        };
        let rg = self.requires_grad();
        Ok(self.graph.push(value, Op::ReverseWidth { input: self.id, signs: signs.to_vec() }, rg))
    }

    /// Stride-1 cross-correlation with 3x3 kernels `[K, C, 3, 3]` and one cell
    /// of zero padding. Accepts `[C, H, W]` or batched `[B, C, H, W]` input.
    pub fn conv2d_zero_pad(&self, kernels: Var<'g>, bias: Option<Var<'g>>) -> Result<Var<'g>, GradError> {
        let (value, cols, dims) = {
            let x = self.graph.node(self.id);
            let k = self.graph.node(kernels.id);
            let xs = x.value.shape();
            let ks = k.value.shape();
            let (batch, cs) = match xs.len() {
                3 => (1, xs),
                4 => (xs[0], &xs[1..]),
                _ => return Err(GradError::Dimension(format!("conv2d: input must be rank 3 or 4, got {xs:?}"))),
            };
            if ks.len() != 4 || ks[2] != 3 || ks[3] != 3 {
                return Err(GradError::Dimension(format!("conv2d: kernels must be [K, C, 3, 3], got {ks:?}")));
            }
            if ks[1] != cs[0] {
                return Err(GradError::Dimension(format!(
                    "conv2d: kernels {ks:?} expect {} channels, input {xs:?} has {}",
                    ks[1], cs[0]
                )));
            }
            let dims = ConvDims { batch, channels: cs[0], height: cs[1], width: cs[2], kernels: ks[0] };
            if let Some(b) = bias {
                let bs = self.graph.node(b.id).value.shape().to_vec();
                if bs != [dims.kernels] {
                    return Err(GradError::Dimension(format!("conv2d: bias {bs:?} for {} kernels", dims.kernels)));
                }
            }
            let cols = im2col(x.value.data(), dims);
            let mut pk = vec![0.0; dims.pixels() * dims.kernels];
            gemm(dims.pixels(), dims.patch(), dims.kernels, &cols, false, k.value.data(), true, &mut pk, 0.0);
            let hw = dims.height * dims.width;
            let bias_vals = bias.map(|b| self.graph.node(b.id).value.data().to_vec());
            let mut out = vec![0.0; pk.len()];
            for bi in 0..batch {
                for kk in 0..dims.kernels {
                    let off = bias_vals.as_ref().map_or(0.0, |b| b[kk]);
                    for p in 0..hw {
                        out[(bi * dims.kernels + kk) * hw + p] = pk[(bi * hw + p) * dims.kernels + kk] + off;
                    }
                }
            }
            let shape: Vec<usize> = if xs.len() == 3 {
                vec![dims.kernels, dims.height, dims.width]
            } else {
                vec![batch, dims.kernels, dims.height, dims.width]
            };
            (Tensor::new(&shape, out)?, cols, dims)
        };
        let mut ids = vec![self.id, kernels.id];
        ids.extend(bias.map(|b| b.id));
        let rg = self.graph.requires(&ids);
        Ok(self.graph.push(
            value,
            Op::Conv2d { input: self.id, kernels: kernels.id, bias: bias.map(|b| b.id), cols, dims },
            rg,
        ))
    }

    /// Mean over the two trailing axes: `[.., H, W]` -> `[..]`.
    pub fn mean_spatial(&self) -> Result<Var<'g>, GradError> {
        let (value, plane) = {
            let node = self.graph.node(self.id);
            let shape = node.value.shape();
            if shape.len() < 3 {
                return Err(GradError::Dimension(format!("mean_spatial: rank {} input", shape.len())));
            }
            let plane = shape[shape.len() - 2] * shape[shape.len() - 1];
            let data = node.value.data().chunks(plane).map(|c| c.iter().sum::<f64>() / plane as f64).collect();
            (Tensor::new(&shape[..shape.len() - 2], data)?, plane)
        };
        let rg = self.requires_grad();
        Ok(self.graph.push(value, Op::MeanSpatial { input: self.id, plane }, rg))
    }
}

/// Elementwise log density of a diagonal Gaussian.
pub fn gaussian_logpdf<'g>(x: Var<'g>, mean: Var<'g>, log_std: Var<'g>) -> Result<Var<'g>, GradError> {
    let graph = x.graph;
    let value = {
        let xv = graph.node(x.id);
        let mv = graph.node(mean.id);
        let lv = graph.node(log_std.id);
        if xv.value.shape() != mv.value.shape() || xv.value.shape() != lv.value.shape() {
            return Err(GradError::Dimension(format!(
                "gaussian_logpdf: shapes {:?}, {:?}, {:?} differ",
                xv.value.shape(),
                mv.value.shape(),
                lv.value.shape()
            )));
        }
        let data = (0..xv.value.len())
            .map(|i| {
                let ls = lv.value.data()[i];
                let z = (xv.value.data()[i] - mv.value.data()[i]) * (-ls).exp();
                -0.5 * z * z - ls - HALF_LN_TWO_PI
            })
            .collect();
        Tensor::new(xv.value.shape(), data)?
    };
    let rg = graph.requires(&[x.id, mean.id, log_std.id]);
    Ok(graph.push(value, Op::GaussianLogPdf { x: x.id, mean: mean.id, log_std: log_std.id }, rg))
}

/// Scalar log density, outside any graph.
pub fn gaussian_logpdf_scalar(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) * (-log_std).exp();
    -0.5 * z * z - log_std - HALF_LN_TWO_PI
}
