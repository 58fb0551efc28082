//! Scalar reverse-mode tape with forward-mode spatial duals recorded on it.
//!
//! Every node stores its value and the local partial derivatives with respect
//! to its parents. Parents always precede children, so a single backwards pass
//! over the node list is a reverse topological sweep.

use super::Activation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TapeNode {
    pub value: f64,
    pub parents: Vec<(usize, f64)>,
    pub adjoint: f64,
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<TapeNode>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: Var) -> &TapeNode {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    pub fn adjoint(&self, v: Var) -> f64 {
        self.nodes[v.0].adjoint
    }

    fn push(&mut self, value: f64, parents: Vec<(usize, f64)>) -> Var {
        debug_assert!(parents.iter().all(|&(p, _)| p < self.nodes.len()));
        self.nodes.push(TapeNode {
            value,
            parents,
            adjoint: 0.0,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf node.
    pub fn scalar(&mut self, value: f64) -> Var {
        self.push(value, Vec::new())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, vec![(a.0, 1.0), (b.0, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, vec![(a.0, 1.0), (b.0, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x * y, vec![(a.0, y), (b.0, x)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if y == 0.0 {
            return Err(Error::DivisionByZero(b.0));
        }
        Ok(self.push(x / y, vec![(a.0, 1.0 / y), (b.0, -x / (y * y))]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = c * self.value(a);
        self.push(v, vec![(a.0, c)])
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, vec![(a.0, 1.0)])
    }

    /// `a^p` for a constant exponent.
    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let x = self.value(a);
        self.push(x.powf(p), vec![(a.0, p * x.powf(p - 1.0))])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activate(Activation::Tanh, a)
    }

    pub fn tanh2(&mut self, a: Var) -> Var {
        self.activate(Activation::Tanh2, a)
    }

    pub fn elu2(&mut self, a: Var) -> Var {
        self.activate(Activation::Elu2, a)
    }

    pub fn activate(&mut self, act: Activation, a: Var) -> Var {
        let z = self.value(a);
        self.push(act.value(z), vec![(a.0, act.first(z))])
    }

    /// ψ′(a) as a differentiable node (its own partial is ψ″).
    pub fn activate_prime(&mut self, act: Activation, a: Var) -> Var {
        let z = self.value(a);
        self.push(act.first(z), vec![(a.0, act.second(z))])
    }

    pub fn sum(&mut self, terms: &[Var]) -> Var {
        let v = terms.iter().map(|t| self.value(*t)).sum();
        self.push(v, terms.iter().map(|t| (t.0, 1.0)).collect())
    }

    /// Fills every adjoint with ∂root/∂node and returns them indexed by node.
    pub fn reverse_sweep(&mut self, root: Var) -> Vec<f64> {
        for n in &mut self.nodes {
            n.adjoint = 0.0;
        }
        self.nodes[root.0].adjoint = 1.0;
        for i in (0..=root.0).rev() {
            let adj = self.nodes[i].adjoint;
            if adj == 0.0 {
                continue;
            }
            // parents are strictly earlier, so splitting here is sound
            let (head, tail) = self.nodes.split_at_mut(i);
            for &(p, d) in &tail[0].parents {
                head[p].adjoint += adj * d;
            }
        }
        self.nodes.iter().map(|n| n.adjoint).collect()
    }
}

/// A value together with its derivatives along each spatial coordinate,
/// all stored as nodes on the same tape.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDual {
    pub primal: Var,
    pub tangents: Vec<Var>,
}

impl SpatialDual {
    pub fn constant(tape: &mut Tape, value: f64, dim: usize) -> Self {
        let primal = tape.scalar(value);
        let zero = tape.scalar(0.0);
        Self {
            primal,
            tangents: vec![zero; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.tangents.len()
    }

    pub fn add(tape: &mut Tape, a: &Self, b: &Self) -> Self {
        let primal = tape.add(a.primal, b.primal);
        let tangents = a
            .tangents
            .iter()
            .zip(&b.tangents)
            .map(|(&x, &y)| tape.add(x, y))
            .collect();
        Self { primal, tangents }
    }

    pub fn sub(tape: &mut Tape, a: &Self, b: &Self) -> Self {
        let primal = tape.sub(a.primal, b.primal);
        let tangents = a
            .tangents
            .iter()
            .zip(&b.tangents)
            .map(|(&x, &y)| tape.sub(x, y))
            .collect();
        Self { primal, tangents }
    }

    pub fn mul(tape: &mut Tape, a: &Self, b: &Self) -> Self {
        let primal = tape.mul(a.primal, b.primal);
        let tangents = a
            .tangents
            .iter()
            .zip(&b.tangents)
            .map(|(&da, &db)| {
                let l = tape.mul(da, b.primal);
                let r = tape.mul(a.primal, db);
                tape.add(l, r)
            })
            .collect();
        Self { primal, tangents }
    }

    /// Product with a tape scalar that does not vary in space (e.g. a weight).
    pub fn mul_var(tape: &mut Tape, a: &Self, w: Var) -> Self {
        let primal = tape.mul(a.primal, w);
        let tangents = a.tangents.iter().map(|&t| tape.mul(t, w)).collect();
        Self { primal, tangents }
    }

    pub fn add_var(tape: &mut Tape, a: &Self, b: Var) -> Self {
        Self {
            primal: tape.add(a.primal, b),
            tangents: a.tangents.clone(),
        }
    }

    pub fn scale(tape: &mut Tape, a: &Self, c: f64) -> Self {
        Self {
            primal: tape.scale(a.primal, c),
            tangents: a.tangents.iter().map(|&t| tape.scale(t, c)).collect(),
        }
    }

    pub fn activate(tape: &mut Tape, act: Activation, a: &Self) -> Self {
        let primal = tape.activate(act, a.primal);
        let slope = tape.activate_prime(act, a.primal);
        let tangents = a.tangents.iter().map(|&t| tape.mul(slope, t)).collect();
        Self { primal, tangents }
    }

    pub fn value(&self, tape: &Tape) -> f64 {
        tape.value(self.primal)
    }

    pub fn gradient(&self, tape: &Tape) -> Vec<f64> {
        self.tangents.iter().map(|&t| tape.value(t)).collect()
    }
}

/// Seeds coordinate `j` with tangent `e_j`.
pub fn dual_lift(tape: &mut Tape, x: &[f64]) -> Vec<SpatialDual> {
    let d = x.len();
    let zero = tape.scalar(0.0);
    let one = tape.scalar(1.0);
    x.iter()
        .enumerate()
        .map(|(j, &xj)| SpatialDual {
            primal: tape.scalar(xj),
            tangents: (0..d).map(|i| if i == j { one } else { zero }).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaves() {
        let mut t = Tape::new();
        let a = t.scalar(0.0);
        let b = t.scalar(1.5);
        assert_eq!(t.value(a), 0.0);
        assert_eq!(t.value(b), 1.5);
        assert!(t.node(b).parents.is_empty());
        assert_eq!(t.adjoint(b), 0.0);
        let adj = t.reverse_sweep(b);
        assert_eq!(adj[b.index()], 1.0);
    }

    #[test]
    fn product_rule() {
        let mut t = Tape::new();
        let a = t.scalar(2.0);
        let b = t.scalar(3.0);
        let r = t.mul(a, b);
        t.reverse_sweep(r);
        assert_eq!(t.adjoint(a), 3.0);
        assert_eq!(t.adjoint(b), 2.0);
    }

    #[test]
    fn tanh_of_product() {
        let mut t = Tape::new();
        let w = t.scalar(0.0);
        let x = t.scalar(1.0);
        let z = t.mul(w, x);
        let y = t.tanh(z);
        assert_eq!(t.node(y).parents, vec![(z.index(), 1.0)]);
        t.reverse_sweep(y);
        assert_eq!(t.adjoint(w), 1.0);
    }

    #[test]
    fn activation_local_partials() {
        let mut t = Tape::new();
        let z = t.scalar(0.0);
        let a = t.tanh2(z);
        assert_eq!(t.value(a), 0.0);
        assert_eq!(t.node(a).parents[0].1, 0.0);
        let m = t.scalar(-0.5);
        let e = t.elu2(m);
        assert!((t.value(e) - 0.154_818_1).abs() < 1e-6);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let mut t = Tape::new();
        let a = t.scalar(1.0);
        let b = t.scalar(0.0);
        assert!(matches!(t.div(a, b), Err(Error::DivisionByZero(_))));
        let c = t.scalar(4.0);
        let q = t.div(a, c).unwrap();
        t.reverse_sweep(q);
        assert_eq!(t.adjoint(c), -1.0 / 16.0);
    }

    #[test]
    fn powf_partial() {
        let mut t = Tape::new();
        let a = t.scalar(3.0);
        let p = t.powf(a, 2.0);
        t.reverse_sweep(p);
        assert_eq!(t.value(p), 9.0);
        assert_eq!(t.adjoint(a), 6.0);
    }

    #[test]
    fn lift_seeds_identity() {
        let mut t = Tape::new();
        let x = dual_lift(&mut t, &[0.5]);
        assert_eq!(x[0].value(&t), 0.5);
        assert_eq!(x[0].gradient(&t), vec![1.0]);

        let mut t = Tape::new();
        let x = dual_lift(&mut t, &[0.2, 0.7]);
        assert_eq!(x[0].gradient(&t), vec![1.0, 0.0]);
        assert_eq!(x[1].gradient(&t), vec![0.0, 1.0]);
    }

    #[test]
    fn square_through_dual() {
        let mut t = Tape::new();
        let x = dual_lift(&mut t, &[0.3]);
        let u = SpatialDual::mul(&mut t, &x[0], &x[0]);
        assert!((u.gradient(&t)[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn tangent_is_differentiable_wrt_parameters() {
        // u(x) = tanh(w x); du/dx = w (1 - tanh²(w x)); d/dw of that at w=0.5, x=0.4
        let mut t = Tape::new();
        let w = t.scalar(0.5);
        let x = dual_lift(&mut t, &[0.4]);
        let z = SpatialDual::mul_var(&mut t, &x[0], w);
        let u = SpatialDual::activate(&mut t, Activation::Tanh, &z);
        let du = u.tangents[0];
        t.reverse_sweep(du);
        let f = |w: f64| w * (1.0 - (w * 0.4f64).tanh().powi(2));
        let fd = (f(0.5 + 1e-6) - f(0.5 - 1e-6)) / 2e-6;
        assert!((t.adjoint(w) - fd).abs() < 1e-9);
    }
}
