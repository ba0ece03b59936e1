//! Brute-force model of the quotient of the weighted Bergman space on the tridisc by the
//! functions vanishing to order two on the diagonal.
//!
//! Everything is done in the monomial basis, where `||z^n||^2 = 1 / c_n` with
//! `c_n = (lambda)_n / n!`. Level `p` of the quotient is spanned by three homogeneous
//! polynomials of degree `p`: `g1` represents `h -> h` on the diagonal, `g2` and `g3`
//! represent `h -> d_2 h` and `h -> d_3 h` there. They are orthogonalized and normalized, and
//! the partial quotient kernel is the sum of `e(z) e(w)^*` over the jet columns
//! `(e, d_1 e, d_2 e)` on the diagonal.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, Mat};
use crate::C64;

/// `c_n = (lambda)_n / n!` for `n <= nmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct BergmanWeights {
    pub lambda: f64,
    c: Vec<f64>,
}

impl BergmanWeights {
    pub fn new(lambda: f64, nmax: usize) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Invalid(format!("weight {lambda} must be positive")));
        }
        let mut c = Vec::with_capacity(nmax + 1);
        c.push(1.0);
        for n in 1..=nmax {
            c.push(c[n - 1] * (lambda + n as f64 - 1.0) / n as f64);
        }
        Ok(BergmanWeights { lambda, c })
    }

    pub fn c(&self, n: usize) -> f64 {
        self.c[n]
    }

    /// `||z^n||^2`.
    pub fn norm_sq(&self, n: usize) -> f64 {
        1.0 / self.c[n]
    }

    pub fn nmax(&self) -> usize {
        self.c.len() - 1
    }
}

/// Power-series coefficient `(x)_n / n!` of `(1 - t)^{-x}`; zero for negative `n`.
pub fn series_coefficient(x: f64, n: i64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    (0..n).fold(1.0, |acc, i| acc * (x + i as f64) / (i as f64 + 1.0))
}

/// Weight tables for the three factors.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientWeights {
    pub tables: [BergmanWeights; 3],
}

impl AmbientWeights {
    pub fn new(weights: [f64; 3], nmax: usize) -> Result<Arc<Self>> {
        let [a, b, g] = weights;
        Ok(Arc::new(AmbientWeights {
            tables: [BergmanWeights::new(a, nmax)?, BergmanWeights::new(b, nmax)?, BergmanWeights::new(g, nmax)?],
        }))
    }

    pub fn lambdas(&self) -> [f64; 3] {
        [self.tables[0].lambda, self.tables[1].lambda, self.tables[2].lambda]
    }

    fn inverse_norm_weight(&self, e: [u32; 3]) -> f64 {
        (0..3).map(|i| self.tables[i].c(e[i] as usize)).product()
    }
}

/// Finitely supported polynomial in three variables.
#[derive(Debug, Clone)]
pub struct MonomialVector {
    pub weights: Arc<AmbientWeights>,
    pub terms: BTreeMap<[u32; 3], C64>,
}

impl MonomialVector {
    pub fn zero(weights: &Arc<AmbientWeights>) -> Self {
        MonomialVector { weights: weights.clone(), terms: BTreeMap::new() }
    }

    pub fn monomial(weights: &Arc<AmbientWeights>, e: [u32; 3]) -> Self {
        MonomialVector { weights: weights.clone(), terms: BTreeMap::from([(e, C64::new(1.0, 0.0))]) }
    }

    fn same_space(&self, other: &MonomialVector) -> Result<()> {
        if self.weights.lambdas() != other.weights.lambdas() {
            return Err(Error::DimensionMismatch("monomial vectors with different weights".into()));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: C64, other: &MonomialVector, b: C64) -> Result<MonomialVector> {
        self.same_space(other)?;
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            *terms.entry(*e).or_insert(C64::new(0.0, 0.0)) += a * c;
        }
        for (e, c) in &other.terms {
            *terms.entry(*e).or_insert(C64::new(0.0, 0.0)) += b * c;
        }
        Ok(MonomialVector { weights: self.weights.clone(), terms })
    }

    pub fn scale(&self, a: C64) -> MonomialVector {
        MonomialVector { weights: self.weights.clone(), terms: self.terms.iter().map(|(e, c)| (*e, c * a)).collect() }
    }

    pub fn norm_sq(&self) -> f64 {
        self.terms.iter().map(|(e, c)| c.norm_sqr() / self.weights.inverse_norm_weight(*e)).sum()
    }

    pub fn evaluate(&self, z: [C64; 3]) -> C64 {
        self.terms
            .iter()
            .map(|(e, c)| c * z[0].powu(e[0]) * z[1].powu(e[1]) * z[2].powu(e[2]))
            .sum()
    }

    pub fn derivative(&self, var: usize) -> MonomialVector {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[var] > 0)
            .map(|(e, c)| {
                let mut f = *e;
                f[var] -= 1;
                (f, c * e[var] as f64)
            })
            .collect();
        MonomialVector { weights: self.weights.clone(), terms }
    }

    /// `(h, d_1 h, d_2 h)` at `(t, t, t)`.
    pub fn diagonal_jet(&self, t: C64) -> [C64; 3] {
        let z = [t; 3];
        [self.evaluate(z), self.derivative(0).evaluate(z), self.derivative(1).evaluate(z)]
    }
}

/// `<u, v> = sum_a u_a conj(v_a) / (c_{a1} c_{a2} c_{a3})`.
pub fn monomial_inner(u: &MonomialVector, v: &MonomialVector) -> Result<C64> {
    u.same_space(v)?;
    Ok(u.terms
        .iter()
        .filter_map(|(e, a)| v.terms.get(e).map(|b| a * b.conj() / u.weights.inverse_norm_weight(*e)))
        .sum())
}

#[derive(Debug, Clone)]
pub struct QuotientBasisLevel {
    pub p: usize,
    pub g: [MonomialVector; 3],
    pub f: [MonomialVector; 3],
    /// Normalized `f`; `None` where `f` vanishes.
    pub e: [Option<MonomialVector>; 3],
    pub f_norm_sq: [f64; 3],
}

impl QuotientBasisLevel {
    /// Indices (0-based) of the `f` vectors that vanish at this level.
    pub fn degenerate(&self) -> Vec<usize> {
        (0..3).filter(|&i| self.e[i].is_none()).collect()
    }
}

/// The six inner products and norms that have closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelIdentities {
    pub f1_norm_sq: f64,
    pub f2_norm_sq: f64,
    pub f3_norm_sq: f64,
    pub g1_g2: f64,
    pub g1_g3: f64,
    pub g2_g3: f64,
}

impl LevelIdentities {
    pub fn as_array(&self) -> [f64; 6] {
        [self.f1_norm_sq, self.f2_norm_sq, self.f3_norm_sq, self.g1_g2, self.g1_g3, self.g2_g3]
    }

    pub const NAMES: [&'static str; 6] = ["|f1|^2", "|f2|^2", "|f3|^2", "<g1,g2>", "<g1,g3>", "<g2,g3>"];
}

pub fn build_level(p: usize, weights: &Arc<AmbientWeights>) -> Result<QuotientBasisLevel> {
    if weights.tables.iter().any(|t| t.nmax() < p) {
        return Err(Error::Truncation { requested: p, available: weights.tables[0].nmax() });
    }
    let mut g = [MonomialVector::zero(weights), MonomialVector::zero(weights), MonomialVector::zero(weights)];
    for i in 0..=p as u32 {
        for j in 0..=(p as u32 - i) {
            let e = [i, j, p as u32 - i - j];
            let w = C64::new(weights.inverse_norm_weight(e), 0.0);
            g[0].terms.insert(e, w);
            if e[1] > 0 {
                g[1].terms.insert(e, w * e[1] as f64);
            }
            if e[2] > 0 {
                g[2].terms.insert(e, w * e[2] as f64);
            }
        }
    }
    let g1_sq = C64::new(g[0].norm_sq(), 0.0);
    let f1 = g[0].clone();
    let f2 = g[0].combine(monomial_inner(&g[0], &g[1])?, &g[1], -g1_sq)?;
    let f3_tilde = g[0].combine(monomial_inner(&g[0], &g[2])?, &g[2], -g1_sq)?;
    let f2_sq = C64::new(f2.norm_sq(), 0.0);
    let f3 = f2.combine(monomial_inner(&f3_tilde, &f2)?, &f3_tilde, -f2_sq)?;
    let f = [f1, f2, f3];
    let f_norm_sq = [f[0].norm_sq(), f[1].norm_sq(), f[2].norm_sq()];
    // Relative to the size of the coefficients that went in, so cancellation noise counts as zero.
    let scale: [f64; 3] = [1.0, g1_sq.re.powi(2) * g[1].norm_sq(), f2_sq.re.powi(2) * g1_sq.re.powi(2) * g[2].norm_sq()];
    let e = std::array::from_fn(|i| {
        let n = f_norm_sq[i];
        (n > 1e-24 * scale[i] && n > 0.0).then(|| f[i].scale(C64::new(n.sqrt().recip(), 0.0)))
    });
    Ok(QuotientBasisLevel { p, g, f, e, f_norm_sq })
}

/// The six quantities computed from the monomial vectors themselves.
pub fn level_identities(level: &QuotientBasisLevel) -> Result<LevelIdentities> {
    Ok(LevelIdentities {
        f1_norm_sq: level.f_norm_sq[0],
        f2_norm_sq: level.f_norm_sq[1],
        f3_norm_sq: level.f_norm_sq[2],
        g1_g2: monomial_inner(&level.g[0], &level.g[1])?.re,
        g1_g3: monomial_inner(&level.g[0], &level.g[2])?.re,
        g2_g3: monomial_inner(&level.g[1], &level.g[2])?.re,
    })
}

/// Closed forms, with the binomials `binom(-x, n)` read as the series coefficients `(x)_n / n!`.
pub fn closed_forms(p: usize, weights: [f64; 3]) -> LevelIdentities {
    let [a, b, g] = weights;
    let l = a + b + g;
    let p = p as i64;
    let c = series_coefficient;
    LevelIdentities {
        f1_norm_sq: c(l, p),
        f2_norm_sq: b * (a + g) / l * c(l, p).powi(2) * c(l + 2.0, p - 1),
        f3_norm_sq: a * b * b * g * (a + g) / (l * l) * c(l, p).powi(6) * c(l + 2.0, p - 1).powi(3),
        g1_g2: b * c(l + 1.0, p - 1),
        g1_g3: g * c(l + 1.0, p - 1),
        g2_g3: b * g * c(l + 2.0, p - 2),
    }
}

#[derive(Debug, Clone)]
pub struct QuotientKernelPartial {
    pub z: C64,
    pub w: C64,
    pub pmax: usize,
    pub matrix: Mat,
    /// Geometric extrapolation of the omitted tail from the last two level contributions.
    pub tail_estimate: f64,
}

/// `sum_{p <= pmax} sum_i Je_i(z) Je_i(w)^*` on the diagonal.
pub fn quotient_kernel_partial_pair(z: C64, w: C64, weights: [f64; 3], pmax: usize) -> Result<QuotientKernelPartial> {
    for t in [z, w] {
        if !(t.norm() < 1.0) {
            return Err(Error::Domain(format!("|{t}| >= 1: the series diverges")));
        }
    }
    let amb = AmbientWeights::new(weights, pmax)?;
    let mut matrix = Mat::zeros(3, 3);
    let mut last = [0.0f64; 2];
    for p in 0..=pmax {
        let level = build_level(p, &amb)?;
        let mut contrib = Mat::zeros(3, 3);
        for e in level.e.iter().flatten() {
            let a = e.diagonal_jet(z);
            let b = e.diagonal_jet(w);
            for i in 0..3 {
                for j in 0..3 {
                    contrib[(i, j)] += a[i] * b[j].conj();
                }
            }
        }
        last = [last[1], frobenius(&contrib)];
        matrix += contrib;
    }
    let tail_estimate = if pmax == 0 {
        f64::INFINITY
    } else if last[1] == 0.0 {
        0.0
    } else {
        let q = last[1] / last[0];
        if q < 1.0 {
            last[1] * q / (1.0 - q)
        } else {
            f64::INFINITY
        }
    };
    Ok(QuotientKernelPartial { z, w, pmax, matrix, tail_estimate })
}

pub fn quotient_kernel_partial(z: C64, weights: [f64; 3], pmax: usize) -> Result<QuotientKernelPartial> {
    quotient_kernel_partial_pair(z, z, weights, pmax)
}

/// `JK` of the product kernel on the diagonal point `(t, t, t)` with derivatives `d_1`, `d_2`,
/// from the closed forms; entry `(i, j)` is `d^{l_i} dbar^{l_j} K`.
pub fn diagonal_jet_kernel_closed_form(t: C64, weights: [f64; 3]) -> Mat {
    let [a, b, g] = weights;
    let l = a + b + g;
    let x = t.norm_sqr();
    let s = |e: f64| (1.0 - x).powf(-e);
    let k0 = C64::new(s(l), 0.0);
    let d = [t.conj() * a * s(l + 1.0), t.conj() * b * s(l + 1.0)];
    let wts = [a, b];
    let mut m = Mat::zeros(3, 3);
    m[(0, 0)] = k0;
    for i in 0..2 {
        m[(i + 1, 0)] = d[i];
        m[(0, i + 1)] = d[i].conj();
        for j in 0..2 {
            let v = if i == j {
                wts[i] * (1.0 + wts[i] * x) * s(l + 2.0)
            } else {
                wts[i] * wts[j] * x * s(l + 2.0)
            };
            m[(i + 1, j + 1)] = C64::new(v, 0.0);
        }
    }
    m
}
