use std::fmt;

use crate::error::{FinslerError, Result};
use crate::jet::Jet;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }
}

/// Expression tree. Variable indices are zero-based (`x1` is `X(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X(usize),
    Y(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms
            .into_iter()
            .reduce(Expr::add)
            .unwrap_or(Expr::Const(0.0))
    }

    /// Largest referenced (zero-based) x and y indices.
    pub fn max_indices(&self) -> (Option<usize>, Option<usize>) {
        fn merge(a: Option<usize>, b: Option<usize>) -> Option<usize> {
            match (a, b) {
                (Some(u), Some(v)) => Some(u.max(v)),
                (u, v) => u.or(v),
            }
        }
        match self {
            Expr::Const(_) => (None, None),
            Expr::X(i) => (Some(*i), None),
            Expr::Y(i) => (None, Some(*i)),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_indices(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let (ax, ay) = a.max_indices();
                let (bx, by) = b.max_indices();
                (merge(ax, bx), merge(ay, by))
            }
        }
    }

    /// Replaces every variable by an expression.
    pub fn substitute(&self, xs: &[Expr], ys: &[Expr]) -> Expr {
        let rec = |e: &Expr| Box::new(e.substitute(xs, ys));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::X(i) => xs[*i].clone(),
            Expr::Y(i) => ys[*i].clone(),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Div(a, b) => Expr::Div(rec(a), rec(b)),
            Expr::Pow(a, k) => Expr::Pow(rec(a), *k),
            Expr::Call(f, a) => Expr::Call(*f, rec(a)),
        }
    }

    pub fn eval<T: Real, V: ExprScalar<T>>(&self, x: &[V], y: &[V]) -> Result<V> {
        Ok(match self {
            Expr::Const(c) => x
                .first()
                .or_else(|| y.first())
                .expect("evaluation needs at least one variable")
                .lift(T::lit(*c)),
            Expr::X(i) => x[*i].clone(),
            Expr::Y(i) => y[*i].clone(),
            Expr::Neg(a) => a.eval(x, y)?.neg(),
            Expr::Add(a, b) => a.eval(x, y)?.add(&b.eval(x, y)?),
            Expr::Sub(a, b) => a.eval(x, y)?.sub(&b.eval(x, y)?),
            Expr::Mul(a, b) => a.eval(x, y)?.mul(&b.eval(x, y)?),
            Expr::Div(a, b) => {
                let den = b.eval(x, y)?;
                if den.value() == T::zero() {
                    return Err(FinslerError::non_smooth("division by zero"));
                }
                a.eval(x, y)?.div(&den)
            }
            Expr::Pow(a, k) => {
                let base = a.eval(x, y)?;
                if *k < 0 && base.value() == T::zero() {
                    return Err(FinslerError::non_smooth("negative power of zero"));
                }
                base.powi(*k)
            }
            Expr::Call(f, a) => {
                let arg = a.eval(x, y)?;
                match f {
                    Func::Sqrt => {
                        if arg.value() <= T::zero() {
                            return Err(FinslerError::non_smooth("sqrt of a non-positive value"));
                        }
                        arg.sqrt()
                    }
                    Func::Log => {
                        if arg.value() <= T::zero() {
                            return Err(FinslerError::non_smooth("log of a non-positive value"));
                        }
                        arg.ln()
                    }
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                    Func::Exp => arg.exp(),
                }
            }
        })
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| {
            if precedence(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::X(i) => write!(f, "x{}", i + 1),
            Expr::Y(i) => write!(f, "y{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, k) => {
                wrap(f, a, 5)?;
                if *k < 0 {
                    write!(f, "^-{}", -k)
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Arithmetic an expression tree can be evaluated over: plain reals, or
/// jets carrying derivatives.
pub trait ExprScalar<T: Real>: Clone {
    /// A constant of the same kind as `self` (same jet layout).
    fn lift(&self, v: T) -> Self;
    fn value(&self) -> T;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
}

impl<T: Real> ExprScalar<T> for T {
    fn lift(&self, v: T) -> Self {
        v
    }
    fn value(&self) -> T {
        *self
    }
    fn add(&self, rhs: &Self) -> Self {
        *self + *rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        *self - *rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        *self * *rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        *self / *rhs
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn powi(&self, k: i32) -> Self {
        // Square-and-multiply keeps extended-precision types at full accuracy.
        let mut base = *self;
        let mut e = k.unsigned_abs();
        let mut acc = T::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        if k < 0 {
            T::one() / acc
        } else {
            acc
        }
    }
    fn sqrt(&self) -> Self {
        num_traits::Float::sqrt(*self)
    }
    fn sin(&self) -> Self {
        num_traits::Float::sin(*self)
    }
    fn cos(&self) -> Self {
        num_traits::Float::cos(*self)
    }
    fn exp(&self) -> Self {
        num_traits::Float::exp(*self)
    }
    fn ln(&self) -> Self {
        num_traits::Float::ln(*self)
    }
}

impl<T: Real> ExprScalar<T> for Jet<T> {
    fn lift(&self, v: T) -> Self {
        Jet::constant(self.layout(), v)
    }
    fn value(&self) -> T {
        Jet::value(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        Jet::add(self, rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        Jet::sub(self, rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        Jet::mul(self, rhs)
    }
    fn div(&self, rhs: &Self) -> Self {
        Jet::div(self, rhs)
    }
    fn neg(&self) -> Self {
        Jet::neg(self)
    }
    fn powi(&self, k: i32) -> Self {
        Jet::powi(self, k)
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self)
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Self {
        Jet::ln(self)
    }
}
