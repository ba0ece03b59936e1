//! Bundle geometry read off a kernel: Gram jets, Chern curvature, covariant derivatives of
//! the curvature, transport maps along a coordinate submanifold, and normalization of a
//! kernel at a point.
//!
//! The Gram matrix is `H(z) = K(z, z)`. Its jet at `z0` is the kernel jet at `(z0, z0)`,
//! with the `du` variables standing for `dz-bar`. With this convention a holomorphic gauge
//! change `K -> psi(z) K psi(w)^*` acts as `H -> psi H psi^*`, the curvature
//! `K_{i j-bar} = dbar_j(d_i H . H^{-1})` transforms as `psi K psi^{-1}`, and the identity
//! `dbar_j d_i H = K_{i j-bar} H + d_i H . H^{-1} . dbar_j H` holds.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::JetMatrix;
use crate::kernel_dsl::Kernel;
use crate::linalg::{frobenius, hermitian_inv_sqrt, hermitian_sqrt, min_eigenvalue, Mat};
use crate::multiindex::{enumerate_jet_indices, MultiIndex};
use crate::C64;

/// Eigenvalue floor for Hermitian square roots of kernel values.
pub const SQRT_FLOOR: f64 = 1e-12;
/// Absolute tolerance for "first d chart coordinates vanish".
pub const ON_Z_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GramJet {
    pub base: Vec<C64>,
    pub jet: JetMatrix,
    pub rank: usize,
    pub order: usize,
}

impl GramJet {
    pub fn m(&self) -> usize {
        self.base.len()
    }

    pub fn value(&self) -> Mat {
        self.jet.constant_matrix()
    }

    /// `d^alpha dbar^beta H(z0)` with `alpha`, `beta` over all `m` coordinates.
    pub fn derivative(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Result<Mat> {
        if alpha.dim() != self.m() || beta.dim() != self.m() {
            return Err(Error::DimensionMismatch("derivative index length".into()));
        }
        self.jet.derivative_matrix(&alpha.concat(beta))
    }

    /// Largest `|(d^a dbar^b H)^* - d^b dbar^a H|` over all stored orders.
    pub fn hermitian_defect(&self) -> f64 {
        let m = self.m();
        let space = self.jet.space().clone();
        let mut worst: f64 = 0.0;
        for idx in space.indices() {
            let e = idx.entries();
            let a = MultiIndex::from_slice(&e[..m]);
            let b = MultiIndex::from_slice(&e[m..]);
            let (Ok(x), Ok(y)) = (self.derivative(&a, &b), self.derivative(&b, &a)) else {
                continue;
            };
            worst = worst.max(frobenius(&(x.adjoint() - y)));
        }
        worst
    }
}

fn check_point(kernel: &dyn Kernel, z0: &[C64]) -> Result<()> {
    if z0.len() != kernel.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point of length {} for a kernel on C^{}",
            z0.len(),
            kernel.dim()
        )));
    }
    Ok(())
}

pub fn gram_jet(kernel: &dyn Kernel, z0: &[C64], order: usize) -> Result<GramJet> {
    check_point(kernel, z0)?;
    let jet = kernel.jet(z0, z0, order)?;
    let h = jet.constant_matrix();
    let scale = frobenius(&h).max(1e-300);
    let min = min_eigenvalue(&h);
    if !(min > 1e-12 * scale) || crate::linalg::hermitian_defect(&h) > 1e-8 * scale {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(GramJet { base: z0.to_vec(), jet, rank: kernel.rank(), order })
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureTensor {
    #[serde(skip)]
    pub base: Vec<C64>,
    pub m: usize,
    pub r: usize,
    #[serde(skip)]
    pub gram: Mat,
    /// Row-major `m x m` grid of `r x r` blocks.
    #[serde(skip)]
    pub entries: Vec<Mat>,
}

impl CurvatureTensor {
    pub fn entry(&self, i: usize, j: usize) -> &Mat {
        &self.entries[i * self.m + j]
    }

    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(frobenius).fold(0.0, f64::max)
    }

    /// Self-adjointness defect, measured in an `H`-orthonormal frame at the base point and
    /// relative to the largest entry. For rank one this is `|K_{ij} - conj K_{ji}| / |K|`.
    pub fn self_adjointness_defect(&self) -> f64 {
        let scale = self.max_norm();
        if scale == 0.0 {
            return 0.0;
        }
        let (Ok(s), Ok(si)) = (hermitian_sqrt(&self.gram, 0.0), hermitian_inv_sqrt(&self.gram, 1e-300)) else {
            return f64::INFINITY;
        };
        let hat = |k: &Mat| &si * k * &s;
        let mut worst: f64 = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                let d = hat(self.entry(i, j)) - hat(self.entry(j, i)).adjoint();
                worst = worst.max(frobenius(&d));
            }
        }
        worst / scale
    }
}

/// `theta_i = d_i H . H^{-1}` for every coordinate, truncated at `order(H) - 1`.
fn connection_forms(h: &JetMatrix, hinv: &JetMatrix, m: usize) -> Result<Vec<JetMatrix>> {
    let t = h.order();
    let hinv = hinv.truncate(t - 1)?;
    (0..m).map(|i| h.differentiate(i)?.mul(&hinv)).collect()
}

/// Curvature series `K_{i j-bar}` (row-major `m x m`), truncated at `order(H) - 2`.
fn curvature_series(g: &GramJet) -> Result<(Vec<JetMatrix>, Vec<JetMatrix>)> {
    if g.order < 2 {
        return Err(Error::Truncation { requested: 2, available: g.order });
    }
    let m = g.m();
    let hinv = g.jet.inverse()?;
    let theta = connection_forms(&g.jet, &hinv, m)?;
    let mut k = Vec::with_capacity(m * m);
    for th in &theta {
        for j in 0..m {
            k.push(th.differentiate(m + j)?);
        }
    }
    Ok((k, theta))
}

pub fn curvature_from_gram(g: &GramJet) -> Result<CurvatureTensor> {
    let (series, _) = curvature_series(g)?;
    Ok(CurvatureTensor {
        base: g.base.clone(),
        m: g.m(),
        r: g.rank,
        gram: g.value(),
        entries: series.iter().map(JetMatrix::constant_matrix).collect(),
    })
}

pub fn curvature(kernel: &dyn Kernel, z0: &[C64]) -> Result<CurvatureTensor> {
    curvature_from_gram(&gram_jet(kernel, z0, 2)?)
}

/// Relative residual of `dbar_j d_i H = K_{i j-bar} H + d_i H . H^{-1} . dbar_j H`.
pub fn ddbm_residual(g: &GramJet, k: &CurvatureTensor) -> Result<f64> {
    let m = g.m();
    let h = g.value();
    let hinv = h.clone().try_inverse().ok_or(Error::SingularMatrix { condition: f64::INFINITY })?;
    let zero = MultiIndex::zeros(m);
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let di = g.derivative(&MultiIndex::unit(m, i), &zero)?;
        for j in 0..m {
            let dj = g.derivative(&zero, &MultiIndex::unit(m, j))?;
            let dd = g.derivative(&MultiIndex::unit(m, i), &MultiIndex::unit(m, j))?;
            let rhs = k.entry(i, j) * &h + &di * &hinv * &dj;
            let scale = frobenius(&dd).max(frobenius(&rhs)).max(1e-300);
            worst = worst.max(frobenius(&(&dd - rhs)) / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CovKey {
    pub i: usize,
    pub j: usize,
    /// Holomorphic orders along the chosen directions.
    pub alpha: Vec<u32>,
    /// Anti-holomorphic orders along the chosen directions.
    pub beta: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct CovariantDerivArray {
    pub base: Vec<C64>,
    /// Coordinates (0-based) along which derivatives are taken.
    pub directions: Vec<usize>,
    pub max_order: usize,
    pub entries: BTreeMap<CovKey, Mat>,
}

/// All multi-index pairs `(alpha, beta)` over `n` directions with `|alpha| + |beta| <= max`.
fn order_pairs(n: usize, max: usize) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut out = Vec::new();
    if n == 0 {
        return vec![(vec![], vec![])];
    }
    let all = enumerate_jet_indices(2 * n, max + 1).expect("small index table");
    for idx in &all.ordered_indices {
        let e = idx.entries();
        out.push((e[..n].to_vec(), e[n..].to_vec()));
    }
    out
}

/// Covariant derivatives `K_{i j-bar; z^alpha zbar^beta}` for `i, j` and derivatives along
/// `directions`, all of total order at most `max_order`. The holomorphic covariant
/// derivatives are applied first, direction by direction in the given order, then the
/// anti-holomorphic ones.
pub fn covariant_derivs_from_gram(
    g: &GramJet,
    directions: &[usize],
    max_order: usize,
) -> Result<CovariantDerivArray> {
    let m = g.m();
    if directions.iter().any(|&d| d >= m) {
        return Err(Error::Invalid("covariant derivative direction out of range".into()));
    }
    if g.order < max_order + 2 {
        return Err(Error::Truncation { requested: max_order + 2, available: g.order });
    }
    let (curv, theta) = curvature_series(g)?;
    let mut entries = BTreeMap::new();
    for (alpha, beta) in order_pairs(directions.len(), max_order) {
        for i in 0..m {
            for j in 0..m {
                let mut phi = curv[i * m + j].clone();
                for (slot, &dir) in directions.iter().enumerate() {
                    for _ in 0..alpha[slot] {
                        let s = phi.order();
                        let th = theta[dir].truncate(s - 1)?;
                        let p = phi.truncate(s - 1)?;
                        phi = phi.differentiate(dir)?.sub(&th.commutator(&p)?)?;
                    }
                }
                for (slot, &dir) in directions.iter().enumerate() {
                    for _ in 0..beta[slot] {
                        phi = phi.differentiate(m + dir)?;
                    }
                }
                entries.insert(CovKey { i, j, alpha: alpha.clone(), beta: beta.clone() }, phi.constant_matrix());
            }
        }
    }
    Ok(CovariantDerivArray { base: g.base.clone(), directions: directions.to_vec(), max_order, entries })
}

pub fn curvature_covariant_derivs(
    kernel: &dyn Kernel,
    z0: &[C64],
    directions: &[usize],
    max_order: usize,
) -> Result<CovariantDerivArray> {
    covariant_derivs_from_gram(&gram_jet(kernel, z0, max_order + 2)?, directions, max_order)
}

#[derive(Debug, Clone)]
pub struct TransportMaps {
    pub base: Vec<C64>,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    /// `entries[l][i - d]` is `dbar_i(H^{-1} d^l H)` for tangential `i` (0-based).
    pub entries: Vec<Vec<Mat>>,
}

impl TransportMaps {
    pub fn get(&self, l: usize, i: usize) -> &Mat {
        &self.entries[l][i - self.d]
    }
}

pub fn check_on_submanifold(z0: &[C64], d: usize) -> Result<()> {
    if d > z0.len() {
        return Err(Error::Invalid(format!("codimension {d} exceeds dimension {}", z0.len())));
    }
    for (index, z) in z0.iter().take(d).enumerate() {
        if z.norm() >= ON_Z_TOL {
            return Err(Error::OffSubmanifold { index, modulus: z.norm() });
        }
    }
    Ok(())
}

pub fn transport_maps_from_gram(g: &GramJet, d: usize, k: usize) -> Result<TransportMaps> {
    check_on_submanifold(&g.base, d)?;
    let m = g.m();
    if d == 0 {
        return Err(Error::Invalid("transport maps need d >= 1".into()));
    }
    if g.order < k {
        return Err(Error::Truncation { requested: k, available: g.order });
    }
    let table = enumerate_jet_indices(d, k)?;
    let hinv = g.jet.inverse()?;
    let mut entries = Vec::with_capacity(table.len());
    for l in &table.ordered_indices {
        let mut dl = g.jet.clone();
        for (var, &times) in l.entries().iter().enumerate() {
            for _ in 0..times {
                dl = dl.differentiate(var)?;
            }
        }
        let prod = hinv.truncate(dl.order())?.mul(&dl)?;
        let row = (d..m)
            .map(|i| Ok(prod.differentiate(m + i)?.constant_matrix()))
            .collect::<Result<Vec<_>>>()?;
        entries.push(row);
    }
    Ok(TransportMaps { base: g.base.clone(), d, k, n: table.n, entries })
}

pub fn transport_maps(kernel: &dyn Kernel, z0: &[C64], d: usize, k: usize) -> Result<TransportMaps> {
    check_on_submanifold(z0, d)?;
    transport_maps_from_gram(&gram_jet(kernel, z0, k.max(1))?, d, k)
}

/// `K_norm(z, w) = C K(z,p)^{-1} K(z,w) K(p,w)^{-1} C` with `C = K(p,p)^{1/2}`.
///
/// Uses `K(w,p)^* = K(p,w)`, so every factor is a plain kernel jet.
#[derive(Clone)]
pub struct NormalizedKernel {
    inner: Arc<dyn Kernel>,
    p: Vec<C64>,
    c: Mat,
}

impl NormalizedKernel {
    pub fn base_point(&self) -> &[C64] {
        &self.p
    }

    pub fn sqrt_at_base(&self) -> &Mat {
        &self.c
    }
}

pub fn normalize_at(kernel: Arc<dyn Kernel>, p: &[C64]) -> Result<NormalizedKernel> {
    check_point(kernel.as_ref(), p)?;
    let kp = kernel.value(p, p)?;
    let c = hermitian_sqrt(&kp, SQRT_FLOOR)?;
    Ok(NormalizedKernel { inner: kernel, p: p.to_vec(), c })
}

impl Kernel for NormalizedKernel {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn jet(&self, z0: &[C64], w0: &[C64], order: usize) -> Result<JetMatrix> {
        let m = self.dim();
        let z_only: Vec<bool> = (0..2 * m).map(|v| v < m).collect();
        let w_only: Vec<bool> = (0..2 * m).map(|v| v >= m).collect();
        let a = self.inner.jet(z0, &self.p, order)?.restrict(&z_only)?;
        let b = self.inner.jet(&self.p, w0, order)?.restrict(&w_only)?;
        let full = self.inner.jet(z0, w0, order)?;
        let core = a.inverse()?.mul(&full)?.mul(&b.inverse()?)?;
        core.mul_constant_left(&self.c)?.mul_constant_right(&self.c)
    }
}
