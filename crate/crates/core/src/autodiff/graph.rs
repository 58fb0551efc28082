//! Batched reverse-mode tape over dense matrices.
//!
//! Spatial tangents ride along as extra column blocks: a "dual batch" of `n`
//! points in `d` dimensions is a matrix with `(1 + d) * n` columns laid out as
//! `[primal | ∂/∂x₁ | … | ∂/∂x_d]`. Linear layers act on all blocks with one
//! matrix product, while [`Graph::dual_activate`] applies ψ to the primal
//! block and ψ′(primal) ⊙ tangent to the others. The whole forward-mode
//! computation is recorded on the tape, so the reverse sweep differentiates
//! through spatial derivatives as well.

use ndarray::{s, Array2, Axis, Zip};

use super::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node(usize);

impl Node {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param,
    MatMul(usize, usize),
    /// Column vector `bias` added to the first `cols` columns of `x`.
    AddBias {
        x: usize,
        bias: usize,
        cols: usize,
    },
    /// ψ′ and ψ″ at the primal block, kept for the reverse sweep.
    DualActivate {
        z: usize,
        n: usize,
        slope: Array2<f64>,
        curv: Array2<f64>,
    },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MulConst(usize, Array2<f64>),
    AddConst(usize),
    Slice {
        a: usize,
        row: usize,
        start: usize,
        len: usize,
    },
    Sum(usize),
}

#[derive(Debug, Clone)]
struct GraphNode {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<GraphNode>,
}

/// Adjoints produced by [`Graph::backward`]. Only parameter nodes keep theirs;
/// intermediate adjoints are dropped as soon as they have been propagated.
#[derive(Debug, Clone)]
pub struct Adjoints {
    grads: Vec<Option<Array2<f64>>>,
}

impl Adjoints {
    pub fn get(&self, node: Node) -> Option<&Array2<f64>> {
        self.grads[node.0].as_ref()
    }

    pub fn take(&mut self, node: Node) -> Option<Array2<f64>> {
        self.grads[node.0].take()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, n: Node) -> &Array2<f64> {
        &self.nodes[n.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, n: Node) -> f64 {
        let v = &self.nodes[n.0].value;
        debug_assert_eq!(v.dim(), (1, 1));
        v[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Node {
        self.nodes.push(GraphNode {
            value,
            op,
            needs_grad,
        });
        Node(self.nodes.len() - 1)
    }

    fn ng(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Node {
        self.push(value, Op::Constant, false)
    }

    pub fn param(&mut self, value: Array2<f64>) -> Node {
        self.push(value, Op::Param, true)
    }

    pub fn matmul(&mut self, a: Node, b: Node) -> Node {
        let v = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(v, Op::MatMul(a.0, b.0), ng)
    }

    pub fn add_bias(&mut self, x: Node, bias: Node, cols: usize) -> Node {
        let mut v = self.nodes[x.0].value.clone();
        let b = &self.nodes[bias.0].value;
        assert_eq!(b.ncols(), 1, "bias must be a column vector");
        v.slice_mut(s![.., ..cols]).zip_mut_with(
            &b.broadcast((b.nrows(), cols)).expect("bias rows match"),
            |y, &bb| *y += bb,
        );
        let ng = self.ng(x.0) || self.ng(bias.0);
        self.push(v, Op::AddBias { x: x.0, bias: bias.0, cols }, ng)
    }

    /// ψ on the primal block, ψ′(primal) ⊙ tangent on each tangent block.
    pub fn dual_activate(&mut self, z: Node, act: Activation, n: usize) -> Node {
        let zv = &self.nodes[z.0].value;
        let blocks = zv.ncols() / n;
        assert_eq!(blocks * n, zv.ncols(), "columns must be a multiple of n");
        let mut out = Array2::zeros(zv.dim());
        let primal = zv.slice(s![.., ..n]);
        let mut slope = Array2::zeros(primal.dim());
        let mut curv = Array2::zeros(primal.dim());
        Zip::from(out.slice_mut(s![.., ..n]))
            .and(&mut slope)
            .and(&mut curv)
            .and(&primal)
            .for_each(|o, sl, cv, &p| {
                let (v, d, dd) = act.eval_all(p);
                *o = v;
                *sl = d;
                *cv = dd;
            });
        for k in 1..blocks {
            let cols = s![.., k * n..(k + 1) * n];
            Zip::from(out.slice_mut(cols))
                .and(&slope)
                .and(zv.slice(cols))
                .for_each(|o, &sl, &t| *o = sl * t);
        }
        let ng = self.ng(z.0);
        self.push(out, Op::DualActivate { z: z.0, n, slope, curv }, ng)
    }

    pub fn add(&mut self, a: Node, b: Node) -> Node {
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(v, Op::Add(a.0, b.0), ng)
    }

    pub fn sub(&mut self, a: Node, b: Node) -> Node {
        let v = &self.nodes[a.0].value - &self.nodes[b.0].value;
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(v, Op::Sub(a.0, b.0), ng)
    }

    pub fn mul(&mut self, a: Node, b: Node) -> Node {
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(v, Op::Mul(a.0, b.0), ng)
    }

    pub fn scale(&mut self, a: Node, c: f64) -> Node {
        let v = &self.nodes[a.0].value * c;
        let ng = self.ng(a.0);
        self.push(v, Op::Scale(a.0, c), ng)
    }

    /// Elementwise product with a fixed array of the same shape.
    pub fn mul_const(&mut self, a: Node, c: Array2<f64>) -> Node {
        assert_eq!(self.nodes[a.0].value.dim(), c.dim(), "mul_const shape");
        let v = &self.nodes[a.0].value * &c;
        let ng = self.ng(a.0);
        self.push(v, Op::MulConst(a.0, c), ng)
    }

    pub fn add_const(&mut self, a: Node, c: &Array2<f64>) -> Node {
        let v = &self.nodes[a.0].value + c;
        let ng = self.ng(a.0);
        self.push(v, Op::AddConst(a.0), ng)
    }

    /// Row `row`, columns `start..start + len`, as a 1×len node.
    pub fn slice(&mut self, a: Node, row: usize, start: usize, len: usize) -> Node {
        let v = self.nodes[a.0]
            .value
            .slice(s![row..row + 1, start..start + len])
            .to_owned();
        let ng = self.ng(a.0);
        self.push(v, Op::Slice { a: a.0, row, start, len }, ng)
    }

    pub fn sum(&mut self, a: Node) -> Node {
        let v = Array2::from_elem((1, 1), self.nodes[a.0].value.sum());
        let ng = self.ng(a.0);
        self.push(v, Op::Sum(a.0), ng)
    }

    /// Sum of several 1×1 nodes, left to right.
    pub fn sum_scalars(&mut self, terms: &[Node]) -> Node {
        let mut it = terms.iter();
        let first = *it.next().expect("at least one term");
        it.fold(first, |acc, &t| self.add(acc, t))
    }

    /// Reverse sweep from a 1×1 root.
    pub fn backward(&self, root: Node) -> Adjoints {
        assert_eq!(self.nodes[root.0].value.dim(), (1, 1), "root must be scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::ones((1, 1)));
        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            // parameters keep their adjoint for the caller
            if matches!(self.nodes[i].op, Op::Param) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant | Op::Param => {}
                Op::MatMul(a, b) => {
                    if self.ng(*a) {
                        let ga = g.dot(&self.nodes[*b].value.t());
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.ng(*b) {
                        let gb = self.nodes[*a].value.t().dot(&g);
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::AddBias { x, bias, cols } => {
                    if self.ng(*bias) {
                        let gb = g
                            .slice(s![.., ..*cols])
                            .sum_axis(Axis(1))
                            .insert_axis(Axis(1));
                        accumulate(&mut grads, *bias, gb);
                    }
                    if self.ng(*x) {
                        accumulate(&mut grads, *x, g.clone());
                    }
                }
                Op::DualActivate { z, n, slope, curv } => {
                    let n = *n;
                    let zv = &self.nodes[*z].value;
                    let blocks = zv.ncols() / n;
                    let mut gz = Array2::zeros(zv.dim());
                    {
                        let mut gp = gz.slice_mut(s![.., ..n]);
                        Zip::from(&mut gp)
                            .and(g.slice(s![.., ..n]))
                            .and(slope)
                            .for_each(|o, &gy, &sl| *o = gy * sl);
                    }
                    for k in 1..blocks {
                        let cols = s![.., k * n..(k + 1) * n];
                        // tangent block: d(out_T)/d(z_T) = ψ′(p)
                        Zip::from(gz.slice_mut(cols))
                            .and(g.slice(cols))
                            .and(slope)
                            .for_each(|o, &gy, &sl| *o = gy * sl);
                        // primal block also feels ψ″(p) · z_T through out_T
                        let (mut gp, _) = gz.view_mut().split_at(Axis(1), n);
                        Zip::from(&mut gp)
                            .and(g.slice(cols))
                            .and(curv)
                            .and(zv.slice(cols))
                            .for_each(|o, &gy, &cv, &t| *o += gy * cv * t);
                    }
                    accumulate(&mut grads, *z, gz);
                }
                Op::Add(a, b) => {
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, -g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, &g * &self.nodes[*b].value);
                    }
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, &g * &self.nodes[*a].value);
                    }
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g * *c),
                Op::MulConst(a, c) => accumulate(&mut grads, *a, g * c),
                Op::AddConst(a) => accumulate(&mut grads, *a, g),
                Op::Slice { a, row, start, len } => {
                    let mut ga = Array2::zeros(self.nodes[*a].value.dim());
                    ga.slice_mut(s![*row..*row + 1, *start..*start + *len])
                        .assign(&g);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let ga = Array2::from_elem(self.nodes[*a].value.dim(), g[[0, 0]]);
                    accumulate(&mut grads, *a, ga);
                }
            }
        }
        Adjoints { grads }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], i: usize, g: Array2<f64>) {
    match &mut grads[i] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}
