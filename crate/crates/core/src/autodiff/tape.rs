//! Scalar reverse-mode differentiation on a tape.
//!
//! Every arithmetic operation on a [`Var`] appends a node holding the local
//! partial derivatives with respect to its (at most two) operands. The
//! backward sweep walks the tape once in reverse insertion order, so the
//! accumulation order is fixed and results are deterministic.
//!
//! ```
//! use meshfield::autodiff::Tape;
//! let tape = Tape::new();
//! let w = tape.var(3.0);
//! let f = w * w;
//! assert_eq!(f.grad().wrt(w), 6.0);
//! ```

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [(usize, f64); 2],
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    /// Creates an independent variable (a leaf).
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Node {
            parents: [(usize::MAX, 0.0), (usize::MAX, 0.0)],
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    fn unary<'t>(&'t self, a: Var<'t>, da: f64, value: f64) -> Var<'t> {
        let index = self.push(Node {
            parents: [(a.index, da), (usize::MAX, 0.0)],
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    fn binary<'t>(&'t self, a: Var<'t>, da: f64, b: Var<'t>, db: f64, value: f64) -> Var<'t> {
        let index = self.push(Node {
            parents: [(a.index, da), (b.index, db)],
        });
        Var {
            tape: self,
            index,
            value,
        }
    }
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

/// Adjoints of every tape node with respect to one output.
#[derive(Clone, Debug)]
pub struct Grad {
    adjoints: Vec<f64>,
}

impl Grad {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adjoints.get(v.index).copied().unwrap_or(0.0)
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Reverse sweep seeded with `d self / d self = 1`.
    pub fn grad(&self) -> Grad {
        let nodes = self.tape.nodes.borrow();
        let mut adjoints = vec![0.0; nodes.len()];
        adjoints[self.index] = 1.0;
        for i in (0..=self.index).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            for &(p, d) in &nodes[i].parents {
                if p != usize::MAX {
                    adjoints[p] += a * d;
                }
            }
        }
        Grad { adjoints }
    }

    /// A constant living on the same tape.
    pub fn constant(&self, value: f64) -> Var<'t> {
        self.tape.var(value)
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.tape.unary(self, 0.5 / s, s)
    }

    pub fn sin(self) -> Self {
        self.tape.unary(self, self.value.cos(), self.value.sin())
    }

    pub fn cos(self) -> Self {
        self.tape.unary(self, -self.value.sin(), self.value.cos())
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.tape.unary(self, e, e)
    }

    pub fn ln(self) -> Self {
        self.tape.unary(self, 1.0 / self.value, self.value.ln())
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.tape.binary(self, 1.0, rhs, 1.0, self.value + rhs.value)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.tape.binary(self, 1.0, rhs, -1.0, self.value - rhs.value)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.tape
            .binary(self, rhs.value, rhs, self.value, self.value * rhs.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.value;
        self.tape.binary(
            self,
            inv,
            rhs,
            -self.value * inv * inv,
            self.value * inv,
        )
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.tape.unary(self, -1.0, -self.value)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.tape.unary(self, 1.0, self.value + rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.tape.unary(self, rhs, self.value * rhs)
    }
}

/// Scalars that geometry kernels can be written against once and evaluated
/// either on plain `f64` or on a [`Tape`].
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant compatible with `self` (same tape for [`Var`]).
    fn lift(&self, v: f64) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn lift(&self, v: f64) -> Self {
        v
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(&self) -> f64 {
        self.value
    }
    fn lift(&self, v: f64) -> Self {
        self.constant(v)
    }
    fn sqrt(self) -> Self {
        Var::sqrt(self)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn cos(self) -> Self {
        Var::cos(self)
    }
}
