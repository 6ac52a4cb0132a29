//! Reverse-mode automatic differentiation over a dynamically built tape.
//!
//! A [`Tape`] records every elementary operation as a node holding its value
//! and the local partial derivatives with respect to its parents. Nodes are
//! appended in evaluation order, so every parent index precedes its child and
//! a single reverse sweep accumulates adjoints.
//!
//! ```
//! use gridcause::grad::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.leaf(3.0);
//! let y = x * x;
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x), 6.0);
//! ```
//!
//! Domain violations (`ln` of a non-positive number, division by zero, ...)
//! do not panic. The tape records the first offending node and
//! [`Tape::backward`] / [`Tape::check`] report it as a [`GradError`].

mod check;
pub mod scalar;
pub mod special;

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use check::{check_gradients, GradCheck};
pub use scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GradError {
    #[error("domain error at node {node}: {op}({arg})")]
    Domain {
        node: usize,
        op: &'static str,
        arg: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Offset,
    Scale,
    Exp,
    Ln,
    Abs,
    Sin,
    Cos,
    Sqrt,
    Softplus,
    LnGamma,
    LogNdtr,
    Affine,
    Sum,
    Custom,
}

impl Op {
    fn name(self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "const",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Offset => "offset",
            Op::Scale => "scale",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Abs => "abs",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Sqrt => "sqrt",
            Op::Softplus => "softplus",
            Op::LnGamma => "ln_gamma",
            Op::LogNdtr => "log_ndtr",
            Op::Affine => "affine",
            Op::Sum => "sum",
            Op::Custom => "custom",
        }
    }
}

#[derive(Default)]
struct Inner {
    values: Vec<f64>,
    ops: Vec<Op>,
    // Parents of node i are edges[starts[i]..starts[i + 1]].
    starts: Vec<u32>,
    edge_parent: Vec<u32>,
    edge_weight: Vec<f64>,
    leaves: Vec<u32>,
    fault: Option<GradError>,
}

/// Append-only record of a computation.
pub struct Tape {
    inner: RefCell<Inner>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("Tape")
            .field("nodes", &inner.values.len())
            .field("leaves", &inner.leaves.len())
            .field("fault", &inner.fault)
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        let inner = Inner {
            starts: vec![0],
            ..Default::default()
        };
        Self {
            inner: RefCell::new(inner),
        }
    }

    /// Pre-sizes the node storage.
    pub fn with_capacity(nodes: usize) -> Self {
        let tape = Self::new();
        {
            let mut inner = tape.inner.borrow_mut();
            inner.values.reserve(nodes);
            inner.ops.reserve(nodes);
            inner.starts.reserve(nodes);
            inner.edge_parent.reserve(2 * nodes);
            inner.edge_weight.reserve(2 * nodes);
        }
        tape
    }

    /// A differentiable input. Leaves are numbered in creation order.
    pub fn leaf(&self, value: f64) -> Var<'_> {
        let v = self.push(Op::Leaf, value, &[]);
        self.inner.borrow_mut().leaves.push(v.idx);
        v
    }

    pub fn leaves(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&x| self.leaf(x)).collect()
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(Op::Constant, value, &[])
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `bias + Σ coef·x` as a single node.
    pub fn affine<'t>(&'t self, terms: &[(Var<'t>, f64)], bias: f64) -> Var<'t> {
        let mut value = bias;
        let mut edges = Vec::with_capacity(terms.len());
        for &(x, c) in terms {
            self.assert_owns(x);
            value += c * x.value();
            edges.push((x.idx, c));
        }
        self.push(Op::Affine, value, &edges)
    }

    pub fn sum<'t>(&'t self, terms: &[Var<'t>]) -> Var<'t> {
        let mut value = 0.0;
        let mut edges = Vec::with_capacity(terms.len());
        for &x in terms {
            self.assert_owns(x);
            value += x.value();
            edges.push((x.idx, 1.0));
        }
        self.push(Op::Sum, value, &edges)
    }

    /// A node whose value and local partials were computed elsewhere, e.g. a
    /// sub-expression differentiated on its own tape.
    pub fn custom<'t>(&'t self, value: f64, partials: &[(Var<'t>, f64)]) -> Var<'t> {
        let edges: Vec<(u32, f64)> = partials
            .iter()
            .map(|&(x, w)| {
                self.assert_owns(x);
                (x.idx, w)
            })
            .collect();
        self.push(Op::Custom, value, &edges)
    }

    /// First recorded domain violation, if any.
    pub fn check(&self) -> Result<(), GradError> {
        match &self.inner.borrow().fault {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    /// Reverse sweep from `root`. Nodes that do not reach `root` keep a zero
    /// adjoint.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients, GradError> {
        self.assert_owns(root);
        self.check()?;
        let inner = self.inner.borrow();
        let n = root.idx as usize + 1;
        let mut adj = vec![0.0; inner.values.len()];
        adj[root.idx as usize] = 1.0;
        for i in (0..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (inner.starts[i] as usize, inner.starts[i + 1] as usize);
            for k in s..e {
                adj[inner.edge_parent[k] as usize] += a * inner.edge_weight[k];
            }
        }
        Ok(Gradients {
            adjoints: adj,
            leaves: inner.leaves.clone(),
        })
    }

    pub fn op(&self, v: Var<'_>) -> Op {
        self.inner.borrow().ops[v.idx as usize]
    }

    fn push(&self, op: Op, value: f64, edges: &[(u32, f64)]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.values.len() as u32;
        inner.values.push(value);
        inner.ops.push(op);
        for &(p, w) in edges {
            inner.edge_parent.push(p);
            inner.edge_weight.push(w);
        }
        let end = inner.edge_parent.len() as u32;
        inner.starts.push(end);
        Var { tape: self, idx }
    }

    fn fault(&self, node: u32, op: Op, arg: f64) {
        let mut inner = self.inner.borrow_mut();
        if inner.fault.is_none() {
            inner.fault = Some(GradError::Domain {
                node: node as usize,
                op: op.name(),
                arg,
            });
        }
    }

    fn assert_owns(&self, v: Var<'_>) {
        assert!(
            std::ptr::eq(self, v.tape),
            "variable belongs to a different tape"
        );
    }

    fn value_of(&self, idx: u32) -> f64 {
        self.inner.borrow().values[idx as usize]
    }

    fn unary(&self, x: Var<'_>, op: Op, value: f64, partial: f64) -> Var<'_> {
        self.push(op, value, &[(x.idx, partial)])
    }

    fn unary_checked(&self, x: Var<'_>, op: Op, ok: bool, value: f64, partial: f64) -> Var<'_> {
        let v = self.unary(x, op, value, partial);
        if !ok {
            self.fault(v.idx, op, x.value());
        }
        v
    }
}

/// Adjoints of every node for one reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
    leaves: Vec<u32>,
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adjoints[v.idx as usize]
    }

    /// Gradient with respect to every leaf, in leaf creation order.
    pub fn leaves(&self) -> Vec<f64> {
        self.leaves
            .iter()
            .map(|&i| self.adjoints[i as usize])
            .collect()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.value())
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.tape.value_of(self.idx)
    }

    pub fn index(&self) -> usize {
        self.idx as usize
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn same_tape(self, other: Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands belong to different tapes"
        );
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value().exp();
        self.tape.unary(self, Op::Exp, e, e)
    }

    pub fn ln(self) -> Var<'t> {
        let x = self.value();
        self.tape
            .unary_checked(self, Op::Ln, x > 0.0, x.ln(), 1.0 / x)
    }

    /// Subgradient 0 at the kink.
    pub fn abs(self) -> Var<'t> {
        let x = self.value();
        let d = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.tape.unary(self, Op::Abs, x.abs(), d)
    }

    pub fn sin(self) -> Var<'t> {
        let x = self.value();
        self.tape.unary(self, Op::Sin, x.sin(), x.cos())
    }

    pub fn cos(self) -> Var<'t> {
        let x = self.value();
        self.tape.unary(self, Op::Cos, x.cos(), -x.sin())
    }

    pub fn sqrt(self) -> Var<'t> {
        let x = self.value();
        let s = x.sqrt();
        self.tape
            .unary_checked(self, Op::Sqrt, x > 0.0, s, 0.5 / s)
    }

    pub fn softplus(self) -> Var<'t> {
        let x = self.value();
        self.tape
            .unary(self, Op::Softplus, special::softplus(x), special::sigmoid(x))
    }

    pub fn ln_gamma(self) -> Var<'t> {
        let x = self.value();
        self.tape.unary_checked(
            self,
            Op::LnGamma,
            x > 0.0,
            special::ln_gamma(x),
            special::digamma(x),
        )
    }

    pub fn log_ndtr(self) -> Var<'t> {
        let x = self.value();
        self.tape.unary(
            self,
            Op::LogNdtr,
            special::log_ndtr(x),
            special::d_log_ndtr(x),
        )
    }

    /// Constant 0/1 node for `self > threshold`. Carries no gradient to
    /// either operand.
    pub fn above(self, threshold: f64) -> Var<'t> {
        let v = if self.value() > threshold { 1.0 } else { 0.0 };
        self.tape.constant(v)
    }

    /// Constant 0/1 node for `self < threshold`, zero gradient.
    pub fn below(self, threshold: f64) -> Var<'t> {
        let v = if self.value() < threshold { 1.0 } else { 0.0 };
        self.tape.constant(v)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        let v = self.value() + rhs.value();
        self.tape
            .push(Op::Add, v, &[(self.idx, 1.0), (rhs.idx, 1.0)])
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        let v = self.value() - rhs.value();
        self.tape
            .push(Op::Sub, v, &[(self.idx, 1.0), (rhs.idx, -1.0)])
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        let (a, b) = (self.value(), rhs.value());
        self.tape
            .push(Op::Mul, a * b, &[(self.idx, b), (rhs.idx, a)])
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        let (a, b) = (self.value(), rhs.value());
        let v = self
            .tape
            .push(Op::Div, a / b, &[(self.idx, 1.0 / b), (rhs.idx, -a / (b * b))]);
        if b == 0.0 {
            self.tape.fault(v.idx, Op::Div, b);
        }
        v
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self, Op::Neg, -self.value(), -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.tape.unary(self, Op::Offset, self.value() + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.tape.unary(self, Op::Offset, self.value() - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.tape.unary(self, Op::Scale, self.value() * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Var<'t> {
        let v = self.tape.unary(self, Op::Scale, self.value() / c, 1.0 / c);
        if c == 0.0 {
            self.tape.fault(v.idx, Op::Div, c);
        }
        v
    }
}
