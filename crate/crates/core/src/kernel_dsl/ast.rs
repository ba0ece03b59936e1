use std::fmt;

use crate::error::{Error, Result};
use crate::jets::{JetSeries, JetSpace, NEAR_ZERO};
use crate::C64;

/// Kernel expression tree. Variable indices are 0-based here and 1-based in text.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(C64),
    Z(usize),
    Wb(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn real(x: f64) -> Expr {
        Expr::Num(C64::new(x, 0.0))
    }

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

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn pow(a: Expr, e: f64) -> Expr {
        Expr::Pow(Box::new(a), e)
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Box::new(a))
    }

    pub fn log(a: Expr) -> Expr {
        Expr::Log(Box::new(a))
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Num(_) | Expr::Z(_) | Expr::Wb(_) => vec![],
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => vec![a, b],
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) => vec![a],
        }
    }

    /// Largest z index and largest wb index used, each `None` when absent.
    pub fn max_indices(&self) -> (Option<usize>, Option<usize>) {
        let own = match self {
            Expr::Z(i) => (Some(*i), None),
            Expr::Wb(i) => (None, Some(*i)),
            _ => (None, None),
        };
        self.children().into_iter().fold(own, |(z, w), c| {
            let (cz, cw) = c.max_indices();
            (z.max(cz), w.max(cw))
        })
    }

    pub fn uses_wb(&self) -> bool {
        self.max_indices().1.is_some()
    }

    /// Replace every variable through the given closures.
    pub fn substitute(&self, z: &dyn Fn(usize) -> Expr, wb: &dyn Fn(usize) -> Expr) -> Expr {
        let s = |e: &Expr| Box::new(e.substitute(z, wb));
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Z(i) => z(*i),
            Expr::Wb(i) => wb(*i),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Div(a, b) => Expr::Div(s(a), s(b)),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Pow(a, e) => Expr::Pow(s(a), *e),
            Expr::Exp(a) => Expr::Exp(s(a)),
            Expr::Log(a) => Expr::Log(s(a)),
        }
    }

    /// Swap the roles of z and wb and conjugate literals: the expression of `conj(f(conj .))`.
    pub fn conjugate_swap(&self) -> Expr {
        let c = |e: &Expr| Box::new(e.conjugate_swap());
        match self {
            Expr::Num(v) => Expr::Num(v.conj()),
            Expr::Z(i) => Expr::Wb(*i),
            Expr::Wb(i) => Expr::Z(*i),
            Expr::Add(a, b) => Expr::Add(c(a), c(b)),
            Expr::Sub(a, b) => Expr::Sub(c(a), c(b)),
            Expr::Mul(a, b) => Expr::Mul(c(a), c(b)),
            Expr::Div(a, b) => Expr::Div(c(a), c(b)),
            Expr::Neg(a) => Expr::Neg(c(a)),
            Expr::Pow(a, e) => Expr::Pow(c(a), *e),
            Expr::Exp(a) => Expr::Exp(c(a)),
            Expr::Log(a) => Expr::Log(c(a)),
        }
    }

    /// Jet of the expression: `z_i = z_base[i] + x_{z_offset + i}` and likewise for wb.
    ///
    /// `wb` is `None` for expressions that must not mention conjugated variables.
    pub fn eval_jet(
        &self,
        space: &std::sync::Arc<JetSpace>,
        z: (&[C64], usize),
        wb: Option<(&[C64], usize)>,
    ) -> Result<JetSeries> {
        let rec = |e: &Expr| e.eval_jet(space, z, wb);
        match self {
            Expr::Num(c) => Ok(JetSeries::constant(space, *c)),
            Expr::Z(i) => {
                let base = z.0.get(*i).ok_or_else(|| out_of_range("z", *i, z.0.len()))?;
                JetSeries::variable(space, z.1 + i, *base)
            }
            Expr::Wb(i) => {
                let (vals, off) = wb.ok_or_else(|| {
                    Error::Invalid("expression must be holomorphic (no wb variables)".into())
                })?;
                let base = vals.get(*i).ok_or_else(|| out_of_range("wb", *i, vals.len()))?;
                JetSeries::variable(space, off + i, *base)
            }
            Expr::Add(a, b) => rec(a)?.add(&rec(b)?),
            Expr::Sub(a, b) => rec(a)?.sub(&rec(b)?),
            Expr::Mul(a, b) => rec(a)?.mul(&rec(b)?),
            Expr::Div(a, b) => rec(a)?.div(&rec(b)?),
            Expr::Neg(a) => Ok(rec(a)?.neg()),
            Expr::Pow(a, e) => rec(a)?.pow_real(*e),
            Expr::Exp(a) => rec(a)?.exp(),
            Expr::Log(a) => rec(a)?.log(),
        }
    }

    /// Pointwise value with the same branch and near-zero rules as the jet evaluator.
    pub fn eval_point(&self, z: &[C64], wb: &[C64]) -> Result<C64> {
        let rec = |e: &Expr| e.eval_point(z, wb);
        let nonzero = |v: C64| {
            if v.norm() >= NEAR_ZERO {
                Ok(v)
            } else {
                Err(Error::SingularConstant { modulus: v.norm() })
            }
        };
        let off_cut = |v: C64| {
            let v = nonzero(v)?;
            if v.re < 0.0 && v.im.abs() <= 1e-14 * v.norm() {
                Err(Error::Branch(format!("value {v} lies on the negative real axis")))
            } else {
                Ok(v)
            }
        };
        match self {
            Expr::Num(c) => Ok(*c),
            Expr::Z(i) => z.get(*i).copied().ok_or_else(|| out_of_range("z", *i, z.len())),
            Expr::Wb(i) => wb.get(*i).copied().ok_or_else(|| out_of_range("wb", *i, wb.len())),
            Expr::Add(a, b) => Ok(rec(a)? + rec(b)?),
            Expr::Sub(a, b) => Ok(rec(a)? - rec(b)?),
            Expr::Mul(a, b) => Ok(rec(a)? * rec(b)?),
            Expr::Div(a, b) => Ok(rec(a)? / nonzero(rec(b)?)?),
            Expr::Neg(a) => Ok(-rec(a)?),
            Expr::Pow(a, e) => {
                let v = rec(a)?;
                if e.fract() == 0.0 && e.abs() <= 64.0 {
                    Ok(nonzero(v)?.powi(*e as i32))
                } else {
                    Ok(off_cut(v)?.powf(*e))
                }
            }
            Expr::Exp(a) => Ok(rec(a)?.exp()),
            Expr::Log(a) => Ok(off_cut(rec(a)?)?.ln()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let wrap = self.precedence() < min;
        if wrap {
            write!(f, "(")?;
        }
        match self {
            Expr::Num(c) => write_num(f, *c)?,
            Expr::Z(i) => write!(f, "z{}", i + 1)?,
            Expr::Wb(i) => write!(f, "wb{}", i + 1)?,
            Expr::Add(a, b) => {
                a.write_prec(f, 1)?;
                write!(f, " + ")?;
                b.write_prec(f, 2)?;
            }
            Expr::Sub(a, b) => {
                a.write_prec(f, 1)?;
                write!(f, " - ")?;
                b.write_prec(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.write_prec(f, 2)?;
                write!(f, " * ")?;
                b.write_prec(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.write_prec(f, 2)?;
                write!(f, " / ")?;
                b.write_prec(f, 3)?;
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_prec(f, 3)?;
            }
            Expr::Pow(a, e) => {
                a.write_prec(f, 5)?;
                write!(f, "^{e}")?;
            }
            Expr::Exp(a) => {
                write!(f, "exp(")?;
                a.write_prec(f, 0)?;
                write!(f, ")")?;
            }
            Expr::Log(a) => {
                write!(f, "log(")?;
                a.write_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if wrap {
            write!(f, ")")?;
        }
        Ok(())
    }
}

fn out_of_range(kind: &str, i: usize, m: usize) -> Error {
    Error::DimensionMismatch(format!("variable {kind}{} used with only {m} coordinates", i + 1))
}

/// Non-negative reals print bare, positive imaginaries as `2.5i`, anything else in parentheses.
fn write_num(f: &mut fmt::Formatter<'_>, c: C64) -> fmt::Result {
    if c.im == 0.0 && c.re.is_sign_positive() {
        return write!(f, "{}", c.re);
    }
    if c.re == 0.0 && c.re.is_sign_positive() && c.im > 0.0 {
        return write!(f, "{}i", c.im);
    }
    if c.im == 0.0 {
        return write!(f, "(-{})", -c.re);
    }
    let re = if c.re.is_sign_negative() { format!("-{}", -c.re) } else { format!("{}", c.re) };
    if c.im < 0.0 {
        write!(f, "({re} - {}i)", -c.im)
    } else {
        write!(f, "({re} + {}i)", c.im)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}
