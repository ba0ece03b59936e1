//! Kernel expressions, kernel files, affine charts and jet evaluation of kernels.
//!
//! A kernel `K(z, w)` is holomorphic in `z` and anti-holomorphic in `w`, so it is written
//! in the variables `z_i` and `wb_i = conj(w_i)`. Its jet at `(z0, w0)` lives in `2m`
//! displacement variables: `dz_1..dz_m` followed by `du_1..du_m`, where `du_i` is the
//! displacement of `wb_i` from `conj(w0_i)`.

pub mod ast;
pub mod chart;
pub mod parser;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use ast::Expr;
pub use chart::AffineChart;
pub use parser::{parse_complex, parse_expr, parse_kernel};

use crate::error::{Error, Result};
use crate::jets::{JetMatrix, JetSpace};
use crate::linalg::{frobenius, Mat};
use crate::C64;

/// Anything that can produce the jet of a matrix-valued kernel at a point pair.
pub trait Kernel: Send + Sync {
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    /// `(rank x rank)` jet in `2 * dim` variables, truncated at `order`.
    fn jet(&self, z0: &[C64], w0: &[C64], order: usize) -> Result<JetMatrix>;

    fn value(&self, z: &[C64], w: &[C64]) -> Result<Mat> {
        Ok(self.jet(z, w, 0)?.constant_matrix())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub m: usize,
    pub r: usize,
    /// Row-major `r x r` grid.
    pub entries: Vec<Expr>,
    pub label: String,
    /// Chart declared in the kernel file, if any.
    pub chart: Option<AffineChart>,
}

impl KernelSpec {
    pub fn new(m: usize, r: usize, entries: Vec<Expr>, label: &str) -> Result<Self> {
        if m == 0 || r == 0 {
            return Err(Error::Invalid("kernel needs m >= 1 and r >= 1".into()));
        }
        if entries.len() != r * r {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {r}x{r} kernel",
                entries.len()
            )));
        }
        for e in &entries {
            let (z, w) = e.max_indices();
            if z.max(w).is_some_and(|i| i >= m) {
                return Err(Error::Invalid(format!("entry `{e}` uses a variable beyond m = {m}")));
            }
        }
        Ok(KernelSpec { m, r, entries, label: label.to_string(), chart: None })
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.r + j]
    }

    /// Kernel file text that parses back to an equivalent spec.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "r = {}", self.r);
        if !self.label.is_empty() {
            let _ = writeln!(s, "label = {}", self.label);
        }
        for i in 0..self.r {
            for j in 0..self.r {
                let _ = writeln!(s, "K[{}][{}] = {}", i + 1, j + 1, self.entry(i, j));
            }
        }
        s
    }

    /// `U K U^*` for a constant matrix `U`.
    pub fn conjugate_by(&self, u: &Mat) -> Result<KernelSpec> {
        if u.nrows() != self.r || u.ncols() != self.r {
            return Err(Error::DimensionMismatch("conjugating matrix shape".into()));
        }
        let r = self.r;
        let mut entries = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                let mut acc: Option<Expr> = None;
                for a in 0..r {
                    for b in 0..r {
                        let c = u[(i, a)] * u[(j, b)].conj();
                        if c.norm() == 0.0 {
                            continue;
                        }
                        let term = Expr::mul(Expr::Num(c), self.entry(a, b).clone());
                        acc = Some(match acc {
                            None => term,
                            Some(prev) => Expr::add(prev, term),
                        });
                    }
                }
                entries.push(acc.unwrap_or(Expr::real(0.0)));
            }
        }
        KernelSpec::new(self.m, r, entries, &format!("conjugated {}", self.label))
    }

    /// `psi(z) K(z, w) conj(psi(w))` for a scalar holomorphic `psi`.
    pub fn rescale(&self, psi: &Expr) -> Result<KernelSpec> {
        if psi.uses_wb() {
            return Err(Error::Invalid("rescaling function must be holomorphic".into()));
        }
        let psi_bar = psi.conjugate_swap();
        let entries = self
            .entries
            .iter()
            .map(|e| Expr::mul(Expr::mul(psi.clone(), e.clone()), psi_bar.clone()))
            .collect();
        KernelSpec::new(self.m, self.r, entries, &format!("rescaled {}", self.label))
    }

    /// Largest `|K(z,w) - K(w,z)^*|` relative to `|K(z,w)|` over random pairs with `|z_i| <= radius`.
    ///
    /// Pairs at which the kernel cannot be evaluated are skipped; returns the defect and the
    /// number of pairs checked.
    pub fn hermitian_spot_check(&self, pairs: usize, radius: f64, seed: u64) -> (f64, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for _ in 0..pairs {
            let z = random_point(&mut rng, self.m, radius);
            let w = random_point(&mut rng, self.m, radius);
            let (Ok(a), Ok(b)) = (self.value(&z, &w), self.value(&w, &z)) else {
                continue;
            };
            checked += 1;
            let scale = frobenius(&a).max(1e-300);
            worst = worst.max(frobenius(&(&a - b.adjoint())) / scale);
        }
        (worst, checked)
    }
}

/// Uniform point in the polydisc of the given radius.
pub fn random_point(rng: &mut impl Rng, m: usize, radius: f64) -> Vec<C64> {
    (0..m)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            C64::from_polar(r, t)
        })
        .collect()
}

impl Kernel for KernelSpec {
    fn dim(&self) -> usize {
        self.m
    }

    fn rank(&self) -> usize {
        self.r
    }

    fn jet(&self, z0: &[C64], w0: &[C64], order: usize) -> Result<JetMatrix> {
        eval_kernel_jet(self, z0, w0, order)
    }
}

/// Jet of `K` at `(z0, w0)` in the variables `(dz, du)`.
pub fn eval_kernel_jet(spec: &KernelSpec, z0: &[C64], w0: &[C64], order: usize) -> Result<JetMatrix> {
    if z0.len() != spec.m || w0.len() != spec.m {
        return Err(Error::DimensionMismatch(format!(
            "points of length {} and {} for a kernel on C^{}",
            z0.len(),
            w0.len(),
            spec.m
        )));
    }
    let space = JetSpace::get(2 * spec.m, order)?;
    let wbar: Vec<C64> = w0.iter().map(|w| w.conj()).collect();
    let entries = spec
        .entries
        .iter()
        .map(|e| e.eval_jet(&space, (z0, 0), Some((&wbar, spec.m))))
        .collect::<Result<Vec<_>>>()?;
    JetMatrix::new(spec.r, spec.r, entries)
}

/// `prod_i (1 - z_i wb_i)^(-weights_i)`.
pub fn builtin_bergman(weights: &[f64]) -> Result<KernelSpec> {
    if weights.is_empty() {
        return Err(Error::Invalid("bergman needs at least one weight".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::Invalid(format!("weight {w} is negative or not finite")));
    }
    let mut acc: Option<Expr> = None;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let f = Expr::pow(Expr::sub(Expr::real(1.0), Expr::mul(Expr::Z(i), Expr::Wb(i))), -w);
        acc = Some(match acc {
            None => f,
            Some(prev) => Expr::mul(prev, f),
        });
    }
    let label = format!(
        "bergman({})",
        weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(", ")
    );
    KernelSpec::new(weights.len(), 1, vec![acc.unwrap_or(Expr::real(1.0))], &label)
}

fn linear_form(coeffs: &[C64], constant: C64, var: impl Fn(usize) -> Expr) -> Expr {
    let mut acc: Option<Expr> = None;
    for (j, &c) in coeffs.iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        let term = if c == C64::new(1.0, 0.0) { var(j) } else { Expr::mul(Expr::Num(c), var(j)) };
        acc = Some(match acc {
            None => term,
            Some(prev) => Expr::add(prev, term),
        });
    }
    match (acc, constant.norm() == 0.0) {
        (None, _) => Expr::Num(constant),
        (Some(e), true) => e,
        (Some(e), false) => Expr::add(e, Expr::Num(constant)),
    }
}

/// The kernel `K(phi^{-1}(u), phi^{-1}(v))` in chart coordinates.
pub fn pullback_affine(spec: &KernelSpec, chart: &AffineChart) -> Result<KernelSpec> {
    if chart.m() != spec.m {
        return Err(Error::DimensionMismatch(format!(
            "chart on C^{} applied to a kernel on C^{}",
            chart.m(),
            spec.m
        )));
    }
    let inv = chart.inverse_linear();
    let shift = chart.inverse_offset();
    let m = spec.m;
    let z_sub = |i: usize| {
        let row: Vec<C64> = (0..m).map(|j| inv[(i, j)]).collect();
        linear_form(&row, shift[i], Expr::Z)
    };
    let wb_sub = |i: usize| {
        let row: Vec<C64> = (0..m).map(|j| inv[(i, j)].conj()).collect();
        linear_form(&row, shift[i].conj(), Expr::Wb)
    };
    let entries = spec.entries.iter().map(|e| e.substitute(&z_sub, &wb_sub)).collect();
    let mut out = KernelSpec::new(m, spec.r, entries, &format!("pullback of {}", spec.label))?;
    out.chart = None;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::MultiIndex;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn bergman_jet_at_origin() {
        let k = builtin_bergman(&[2.5]).unwrap();
        let j = k.jet(&[c(0.0)], &[c(0.0)], 2).unwrap();
        assert_eq!(j.get(0, 0).constant_term(), c(1.0));
        let dzdu = j.get(0, 0).coefficient(&MultiIndex::from_slice(&[1, 1]));
        assert!((dzdu - c(2.5)).norm() < 1e-14);
    }

    #[test]
    fn bergman_builder() {
        let k = builtin_bergman(&[0.0, 0.0]).unwrap();
        assert_eq!(k.entries[0], Expr::real(1.0));
        assert!(builtin_bergman(&[1.0, -0.5]).is_err());
        let k = builtin_bergman(&[1.0, 2.0, 3.0]).unwrap();
        let z = [C64::new(0.1, 0.2), C64::new(-0.3, 0.1), C64::new(0.2, 0.0)];
        let w = [C64::new(0.05, -0.1), C64::new(0.2, 0.2), C64::new(-0.1, 0.3)];
        let v = k.value(&z, &w).unwrap()[(0, 0)];
        let want: C64 = (0..3).map(|i| (c(1.0) - z[i] * w[i].conj()).powf(-(i as f64 + 1.0))).product();
        assert!((v - want).norm() < 1e-13 * want.norm());
    }

    #[test]
    fn order_zero_jet_is_value_and_hermitian() {
        let k = parse_kernel("m = 2\nr = 2\nK[1][1] = (1 - z1*wb1)^-2\nK[1][2] = 0.5*z1*wb2\nK[2][1] = 0.5*z2*wb1\nK[2][2] = exp(z2*wb2)\n").unwrap();
        let z = [C64::new(0.1, 0.3), C64::new(0.2, -0.1)];
        let w = [C64::new(-0.2, 0.1), C64::new(0.3, 0.3)];
        let a = k.value(&z, &w).unwrap();
        let b = k.value(&w, &z).unwrap();
        assert!(frobenius(&(&a - b.adjoint())) < 1e-14);
        let (defect, checked) = k.hermitian_spot_check(10, 0.5, 1);
        assert!(defect < 1e-13 && checked == 10);
        let bad = parse_kernel("m = 1\nr = 1\nK[1][1] = 1 + z1").unwrap();
        assert!(bad.hermitian_spot_check(5, 0.5, 1).0 > 1e-3);
    }

    #[test]
    fn domain_violation_is_reported() {
        let k = builtin_bergman(&[1.5]).unwrap();
        assert!(k.jet(&[c(1.0)], &[c(1.0)], 1).is_err());
        let k = builtin_bergman(&[1.0]).unwrap();
        assert!(matches!(k.jet(&[c(1.0)], &[c(1.0)], 1), Err(Error::SingularConstant { .. })));
    }

    #[test]
    fn pullback_matches_composition() {
        let k = builtin_bergman(&[1.0, 2.0, 0.5]).unwrap();
        let chart = AffineChart::diagonal(3).unwrap();
        let pk = pullback_affine(&k, &chart).unwrap();
        let u = [C64::new(0.05, 0.1), C64::new(-0.1, 0.05), C64::new(0.2, -0.1)];
        let v = [C64::new(0.1, 0.0), C64::new(0.0, 0.1), C64::new(-0.2, 0.1)];
        let a = pk.value(&u, &v).unwrap()[(0, 0)];
        let b = k.value(&chart.apply_inverse(&u), &chart.apply_inverse(&v)).unwrap()[(0, 0)];
        assert!((a - b).norm() < 1e-13 * b.norm());
        let id = pullback_affine(&k, &AffineChart::identity(3, 1).unwrap()).unwrap();
        assert!((id.value(&u, &v).unwrap()[(0, 0)] - k.value(&u, &v).unwrap()[(0, 0)]).norm() < 1e-15);
        let shift = AffineChart::new(Mat::identity(3, 3), vec![c(0.1), c(0.0), c(-0.1)], 1).unwrap();
        let sk = pullback_affine(&k, &shift).unwrap();
        let a = sk.value(&u, &v).unwrap()[(0, 0)];
        let b = k.value(&shift.apply_inverse(&u), &shift.apply_inverse(&v)).unwrap()[(0, 0)];
        assert!((a - b).norm() < 1e-13 * b.norm());
        assert!(pullback_affine(&k, &AffineChart::diagonal(2).unwrap()).is_err());
    }

    #[test]
    fn text_round_trip() {
        let k = builtin_bergman(&[1.0, 2.0]).unwrap();
        let pk = pullback_affine(&k, &AffineChart::diagonal(2).unwrap()).unwrap();
        let back = parse_kernel(&pk.to_text()).unwrap();
        assert_eq!(back.entries, pk.entries);
        let u = Mat::from_fn(2, 2, |i, j| C64::new(0.3 * i as f64 - 0.2, 0.1 + j as f64));
        let ck = parse_kernel("m = 1\nr = 2\nK[1][1] = 1\nK[1][2] = 0\nK[2][1] = 0\nK[2][2] = 2").unwrap();
        let cu = ck.conjugate_by(&u).unwrap();
        assert_eq!(parse_kernel(&cu.to_text()).unwrap().entries, cu.entries);
    }

    #[test]
    fn conjugation_and_rescaling() {
        let k = parse_kernel("m = 1\nr = 2\nK[1][1] = (1-z1*wb1)^-1\nK[1][2] = 0\nK[2][1] = 0\nK[2][2] = (1-z1*wb1)^-2").unwrap();
        let (s, co) = (0.6_f64, 0.8_f64);
        let u = Mat::from_row_slice(2, 2, &[c(co), C64::new(0.0, s), C64::new(0.0, s), c(co)]);
        let ck = k.conjugate_by(&u).unwrap();
        let z = [C64::new(0.2, 0.1)];
        let w = [C64::new(-0.1, 0.3)];
        let want = &u * k.value(&z, &w).unwrap() * u.adjoint();
        assert!(frobenius(&(ck.value(&z, &w).unwrap() - want)) < 1e-14);
        let psi = parse_expr("1 + 0.3*z1", 1).unwrap();
        let rk = k.rescale(&psi).unwrap();
        let f = |x: C64| c(1.0) + x * 0.3;
        let want = k.value(&z, &w).unwrap() * (f(z[0]) * f(w[0]).conj());
        assert!(frobenius(&(rk.value(&z, &w).unwrap() - want)) < 1e-14);
        assert!(k.rescale(&Expr::Wb(0)).is_err());
    }
}
