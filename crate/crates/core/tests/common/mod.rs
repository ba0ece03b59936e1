//! Test-side oracles: exact sparse polynomials, brute-force index order and kernel builders.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BTreeMap;

use jetmod_core::{Expr, KernelSpec, Mat, C64};
use rand::Rng;

pub fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn random_c(rng: &mut impl Rng, scale: f64) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
}

/// Every index of length `d` and degree `<= max_deg`, sorted by degree and then by
/// descending lexicographic order.
pub fn brute_force_order(d: usize, max_deg: u32) -> Vec<Vec<u32>> {
    let mut all = vec![vec![]];
    for _ in 0..d {
        all = all
            .into_iter()
            .flat_map(|v: Vec<u32>| {
                (0..=max_deg).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .filter(|v| v.iter().sum::<u32>() <= max_deg)
            .collect();
    }
    all.sort_by_key(|v| (v.iter().sum::<u32>(), Reverse(v.clone())));
    all
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Sparse polynomial in `nvars` complex variables.
#[derive(Debug, Clone)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, C64>,
}

impl Poly {
    pub fn random(rng: &mut impl Rng, nvars: usize, max_deg: u32, nterms: usize) -> Poly {
        let mut terms = BTreeMap::new();
        for _ in 0..nterms {
            let mut e = vec![0u32; nvars];
            let deg = rng.random_range(0..=max_deg);
            for _ in 0..deg {
                e[rng.random_range(0..nvars)] += 1;
            }
            *terms.entry(e).or_insert(c(0.0)) += random_c(rng, 1.0);
        }
        Poly { nvars, terms }
    }

    pub fn monomial(nvars: usize, e: &[u32]) -> Poly {
        let mut full = e.to_vec();
        full.resize(nvars, 0);
        Poly { nvars, terms: BTreeMap::from([(full, c(1.0))]) }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let e: Vec<u32> = a.iter().zip(b).map(|(p, q)| p + q).collect();
                *terms.entry(e).or_insert(c(0.0)) += x * y;
            }
        }
        Poly { nvars: self.nvars, terms }
    }

    /// Exact `d^alpha p` evaluated at `z`; `alpha` may be shorter than `nvars`.
    pub fn derivative_at(&self, alpha: &[u32], z: &[C64]) -> C64 {
        let mut acc = c(0.0);
        'terms: for (e, coef) in &self.terms {
            let mut v = *coef;
            for i in 0..self.nvars {
                let a = alpha.get(i).copied().unwrap_or(0);
                if a > e[i] {
                    continue 'terms;
                }
                v *= factorial(e[i]) / factorial(e[i] - a);
                v *= z[i].powu(e[i] - a);
            }
            acc += v;
        }
        acc
    }

    pub fn to_expr(&self) -> Expr {
        let mut acc = Expr::real(0.0);
        for (e, coef) in &self.terms {
            let mut term = Expr::Num(*coef);
            for (i, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    term = Expr::mul(term, Expr::Z(i));
                }
            }
            acc = Expr::add(acc, term);
        }
        acc
    }
}

/// `(d^alpha p(z0))` over transverse indices of degree `< k`, in brute-force order.
pub fn jet_column(p: &Poly, z0: &[C64], d: usize, k: usize) -> Vec<C64> {
    brute_force_order(d, k as u32 - 1).iter().map(|a| p.derivative_at(a, z0)).collect()
}

/// `binom(alpha, beta) d^{alpha - beta} p(z0)` below the diagonal.
pub fn action_matrix(p: &Poly, z0: &[C64], d: usize, k: usize) -> Mat {
    let idx = brute_force_order(d, k as u32 - 1);
    let n = idx.len();
    let mut out = Mat::zeros(n, n);
    for (l, a) in idx.iter().enumerate() {
        for (j, b) in idx.iter().enumerate() {
            if a.iter().zip(b).all(|(x, y)| x >= y) {
                let diff: Vec<u32> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let cb: f64 = a.iter().zip(b).map(|(x, y)| binom(*x, *y)).product();
                out[(l, j)] = p.derivative_at(&diff, z0) * cb;
            }
        }
    }
    out
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn bergman_factor(i: usize, w: f64) -> Expr {
    Expr::pow(Expr::sub(Expr::real(1.0), Expr::mul(Expr::Z(i), Expr::Wb(i))), -w)
}

/// Rank-two kernel on the bidisc: weighted Bergman diagonal `(a, b)` and `(c, e)` with an
/// off-diagonal coupling `s z1 wb2`.
pub fn rank_two(weights: [f64; 4], s: C64) -> KernelSpec {
    let k11 = Expr::mul(bergman_factor(0, weights[0]), bergman_factor(1, weights[1]));
    let k22 = Expr::mul(bergman_factor(0, weights[2]), bergman_factor(1, weights[3]));
    let k12 = Expr::mul(Expr::Num(s), Expr::mul(Expr::Z(0), Expr::Wb(1)));
    let k21 = Expr::mul(Expr::Num(s.conj()), Expr::mul(Expr::Z(1), Expr::Wb(0)));
    KernelSpec::new(2, 2, vec![k11, k12, k21, k22], "rank two").unwrap()
}

/// `1 + sum_i c_i z_i + c z_1 z_2` with coefficient moduli summing to at most `0.8`, so it has
/// no zeros on the closed unit polydisc.
pub fn nonvanishing_poly(rng: &mut impl Rng, m: usize) -> Expr {
    let mut coeffs: Vec<C64> = (0..=m).map(|_| random_c(rng, 1.0)).collect();
    let total: f64 = coeffs.iter().map(|z| z.norm()).sum();
    let scale = 0.8 * rng.random_range(0.2..1.0) / total;
    for z in &mut coeffs {
        *z *= scale;
    }
    let mut e = Expr::real(1.0);
    for (i, z) in coeffs.iter().take(m).enumerate() {
        e = Expr::add(e, Expr::mul(Expr::Num(*z), Expr::Z(i)));
    }
    if m >= 2 {
        e = Expr::add(e, Expr::mul(Expr::Num(coeffs[m]), Expr::mul(Expr::Z(0), Expr::Z(1))));
    }
    e
}

/// `e^{i a} [[p, -conj q], [q, conj p]]` with `|p|^2 + |q|^2 = 1`.
pub fn random_unitary2(rng: &mut impl Rng) -> Mat {
    let p = random_c(rng, 1.0);
    let q = random_c(rng, 1.0);
    let n = (p.norm_sqr() + q.norm_sqr()).sqrt();
    let (p, q) = (p / n, q / n);
    let ph = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    Mat::from_row_slice(2, 2, &[p * ph, -q.conj() * ph, q * ph, p.conj() * ph])
}

/// `min_phi |a - e^{i phi} b|_F`.
pub fn phase_aligned_distance(a: &Mat, b: &Mat) -> f64 {
    let inner: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let ph = if inner.norm() == 0.0 { c(1.0) } else { inner / inner.norm() };
    (a - b * ph).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
