//! The jet construction relative to the coordinate plane `{z_1 = ... = z_d = 0}`.
//!
//! Jet columns, jet kernels and module-action matrices are indexed by `theta` over the
//! transverse multi-indices of degree below `k`. For rank `r` the pair (index `l`, component
//! `i`) sits at row `l * r + i`, so the module action is the Kronecker product `J(f) (x) I_r`.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::geometry::check_on_submanifold;
use crate::jets::{JetSeries, JetSpace};
use crate::kernel_dsl::{AffineChart, Expr, Kernel};
use crate::linalg::{condition_number, Mat};
use crate::multiindex::{colex_level, enumerate_jet_indices, multi_binom, MultiIndex};
use crate::C64;

/// Pads a transverse multi-index with zeros to all `m` coordinates.
fn pad(alpha: &MultiIndex, m: usize) -> MultiIndex {
    let mut e = alpha.entries().to_vec();
    e.resize(m, 0);
    MultiIndex::new(e).expect("m >= 1")
}

fn check_dk(d: usize, k: usize, m: usize) -> Result<()> {
    if d == 0 || k == 0 {
        return Err(Error::Invalid(format!("need d >= 1 and k >= 1, got d = {d}, k = {k}")));
    }
    if d > m {
        return Err(Error::Invalid(format!("codimension {d} exceeds dimension {m}")));
    }
    Ok(())
}

/// `JK(z0, w0)` as an `(N+1) r x (N+1) r` matrix.
#[derive(Debug, Clone)]
pub struct JetKernelValue {
    pub z0: Vec<C64>,
    pub w0: Vec<C64>,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub indices: Vec<MultiIndex>,
    pub matrix: Mat,
}

impl JetKernelValue {
    /// `d^l dbar^t K(z0, w0)` as an `r x r` matrix.
    pub fn block(&self, l: usize, t: usize) -> Mat {
        self.matrix.view((l * self.r, t * self.r), (self.r, self.r)).into_owned()
    }
}

/// Jet kernel at `(z0, w0)`, read off a kernel jet of order `2(k-1)`.
pub fn jet_kernel(kernel: &dyn Kernel, d: usize, k: usize, z0: &[C64], w0: &[C64]) -> Result<JetKernelValue> {
    jet_kernel_truncated(kernel, d, k, z0, w0, 2 * k.saturating_sub(1))
}

/// As [`jet_kernel`], with the kernel jet taken at order `trunc >= 2(k-1)`.
pub fn jet_kernel_truncated(
    kernel: &dyn Kernel,
    d: usize,
    k: usize,
    z0: &[C64],
    w0: &[C64],
    trunc: usize,
) -> Result<JetKernelValue> {
    let m = kernel.dim();
    check_dk(d, k, m)?;
    if trunc < 2 * (k - 1) {
        return Err(Error::Truncation { requested: 2 * (k - 1), available: trunc });
    }
    let table = enumerate_jet_indices(d, k)?;
    let jet = kernel.jet(z0, w0, trunc)?;
    let r = kernel.rank();
    let size = table.len() * r;
    let mut matrix = Mat::zeros(size, size);
    for (l, a) in table.ordered_indices.iter().enumerate() {
        let pa = pad(a, m);
        for (t, b) in table.ordered_indices.iter().enumerate() {
            let block = jet.derivative_matrix(&pa.concat(&pad(b, m)))?;
            matrix.view_mut((l * r, t * r), (r, r)).copy_from(&block);
        }
    }
    Ok(JetKernelValue {
        z0: z0.to_vec(),
        w0: w0.to_vec(),
        d,
        k,
        n: table.n,
        r,
        indices: table.ordered_indices,
        matrix,
    })
}

/// Jet column `(d^l f(z0))_l` of a series in `m` variables whose first `d` are transverse.
pub fn jet_column(f: &JetSeries, d: usize, k: usize) -> Result<Vec<C64>> {
    check_dk(d, k, f.nvars())?;
    let table = enumerate_jet_indices(d, k)?;
    table.ordered_indices.iter().map(|a| f.extract_derivative(&pad(a, f.nvars()))).collect()
}

/// Jet of a holomorphic expression in `z` at `z0`, truncated at `order`.
pub fn holomorphic_jet(f: &Expr, z0: &[C64], order: usize) -> Result<JetSeries> {
    if f.uses_wb() {
        return Err(Error::Invalid(format!("`{f}` is not holomorphic: it uses wb variables")));
    }
    if let Some(i) = f.max_indices().0 {
        if i >= z0.len() {
            return Err(Error::Invalid(format!("`{f}` uses z{} beyond m = {}", i + 1, z0.len())));
        }
    }
    let space = JetSpace::get(z0.len(), order)?;
    f.eval_jet(&space, (z0, 0), None)
}

#[derive(Debug, Clone)]
pub struct ModuleActionMatrix {
    pub z0: Vec<C64>,
    pub d: usize,
    pub k: usize,
    pub matrix: Mat,
}

impl ModuleActionMatrix {
    /// `J(f) (x) I_r`.
    pub fn tensor_identity(&self, r: usize) -> Mat {
        self.matrix.kronecker(&Mat::identity(r, r))
    }
}

/// `J(f)_{lj} = binom(alpha, beta) d^{alpha - beta} f(z0)` with `alpha = theta^{-1}(l)`,
/// `beta = theta^{-1}(j)`.
pub fn module_action_matrix(f: &Expr, z0: &[C64], d: usize, k: usize) -> Result<ModuleActionMatrix> {
    check_dk(d, k, z0.len())?;
    let jet = holomorphic_jet(f, z0, k - 1)?;
    module_action_from_jet(&jet, d, k).map(|matrix| ModuleActionMatrix { z0: z0.to_vec(), d, k, matrix })
}

pub fn module_action_from_jet(f: &JetSeries, d: usize, k: usize) -> Result<Mat> {
    let m = f.nvars();
    check_dk(d, k, m)?;
    let table = enumerate_jet_indices(d, k)?;
    let n = table.len();
    let mut out = Mat::zeros(n, n);
    for (l, a) in table.ordered_indices.iter().enumerate() {
        for (j, b) in table.ordered_indices.iter().enumerate().take(l + 1) {
            if let Some(diff) = a.checked_sub(b) {
                let c = multi_binom(a, b) as f64;
                out[(l, j)] = f.extract_derivative(&pad(&diff, m))? * c;
            }
        }
    }
    Ok(out)
}

/// A jet kernel whose two points lie on the submanifold.
#[derive(Debug, Clone)]
pub struct QuotientKernelValue {
    pub jet_kernel: JetKernelValue,
}

pub fn restrict_to_z(jkv: JetKernelValue) -> Result<QuotientKernelValue> {
    check_on_submanifold(&jkv.z0, jkv.d)?;
    check_on_submanifold(&jkv.w0, jkv.d)?;
    Ok(QuotientKernelValue { jet_kernel: jkv })
}

/// Blocks `JH_{lt} = d^l dbar^t H(z0)` of the Gram matrix `H = K(z, z)`, from a kernel jet
/// truncated at `trunc`.
pub fn jet_gram_blocks(kernel: &dyn Kernel, z0: &[C64], d: usize, k: usize, trunc: usize) -> Result<JetKernelValue> {
    jet_kernel_truncated(kernel, d, k, z0, z0, trunc)
}

/// Matrix of the `t`-th symmetric power of `j` in the theta-ordered monomial basis:
/// row `alpha`, column `beta` holds the coefficient of `x^beta` in
/// `prod_i (sum_s j[(i, s)] x_s)^{alpha_i}`.
pub fn sym_power_matrix(j: &Mat, t: u32) -> Result<Mat> {
    let d = j.nrows();
    if j.ncols() != d || d == 0 {
        return Err(Error::DimensionMismatch("symmetric power needs a square matrix".into()));
    }
    let level = colex_level(d, t);
    let pos: HashMap<&[u32], usize> = level.iter().enumerate().map(|(i, a)| (a.entries(), i)).collect();
    let mut out = Mat::zeros(level.len(), level.len());
    for (row, alpha) in level.iter().enumerate() {
        let mut poly: HashMap<Vec<u32>, C64> = HashMap::from([(vec![0; d], C64::new(1.0, 0.0))]);
        for (i, &times) in alpha.entries().iter().enumerate() {
            for _ in 0..times {
                let mut next: HashMap<Vec<u32>, C64> = HashMap::new();
                for (mono, c) in &poly {
                    for s in 0..d {
                        if j[(i, s)] == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let mut e = mono.clone();
                        e[s] += 1;
                        *next.entry(e).or_default() += c * j[(i, s)];
                    }
                }
                poly = next;
            }
        }
        for (mono, c) in poly {
            out[(row, pos[mono.as_slice()])] += c;
        }
    }
    Ok(out)
}

/// Block-diagonal `A_{k,phi}` with blocks `1, D_1, ..., D_{k-1}`, `D_1` the transverse
/// Jacobian `d phi_s / d z_j`.
#[derive(Debug, Clone)]
pub struct ChartJetTransform {
    pub k: usize,
    pub d: usize,
    pub blocks: Vec<Mat>,
    pub matrix: Mat,
}

impl ChartJetTransform {
    /// Original-coordinate jet kernel from a chart-coordinate one: `(A (x) I) JK (A (x) I)^*`.
    pub fn transform_kernel(&self, jk: &JetKernelValue) -> Result<Mat> {
        if jk.k != self.k || jk.d != self.d {
            return Err(Error::DimensionMismatch("jet kernel and transform disagree on (d, k)".into()));
        }
        let a = self.matrix.kronecker(&Mat::identity(jk.r, jk.r));
        Ok(&a * &jk.matrix * a.adjoint())
    }
}

pub fn chart_jet_transform(chart: &AffineChart, k: usize) -> Result<ChartJetTransform> {
    let d = chart.d();
    check_dk(d, k, chart.m())?;
    if !chart.is_admissible() {
        return Err(Error::Invalid(
            "chart mixes tangential chart coordinates into transverse derivatives".into(),
        ));
    }
    let j = chart.transverse_jacobian();
    let condition = condition_number(&j);
    if !(condition < 1e12) {
        return Err(Error::SingularMatrix { condition });
    }
    let blocks = (0..k as u32).map(|t| sym_power_matrix(&j, t)).collect::<Result<Vec<_>>>()?;
    let size: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut matrix = Mat::zeros(size, size);
    let mut at = 0;
    for b in &blocks {
        matrix.view_mut((at, at), b.shape()).copy_from(b);
        at += b.nrows();
    }
    Ok(ChartJetTransform { k, d, blocks, matrix })
}

/// `A_{lambda mu} = d^lambda dbar^mu JK|_Z (z0, w0)` over tangential multi-indices with
/// `|lambda|, |mu| <= order`.
pub fn tangential_coefficient_blocks(
    kernel: &dyn Kernel,
    d: usize,
    k: usize,
    z0: &[C64],
    w0: &[C64],
    order: usize,
) -> Result<BTreeMap<(MultiIndex, MultiIndex), Mat>> {
    let m = kernel.dim();
    check_dk(d, k, m)?;
    if d == m {
        return Err(Error::Invalid("no tangential directions when d = m".into()));
    }
    check_on_submanifold(z0, d)?;
    check_on_submanifold(w0, d)?;
    let table = enumerate_jet_indices(d, k)?;
    let tangential = enumerate_jet_indices(m - d, order + 1)?;
    let jet = kernel.jet(z0, w0, 2 * (k - 1) + 2 * order)?;
    let r = kernel.rank();
    let size = table.len() * r;
    let full = |a: &MultiIndex, lam: &MultiIndex| {
        MultiIndex::new(a.entries().iter().chain(lam.entries()).copied().collect()).expect("m >= 1")
    };
    let mut out = BTreeMap::new();
    for lam in &tangential.ordered_indices {
        for mu in &tangential.ordered_indices {
            let mut block = Mat::zeros(size, size);
            for (l, a) in table.ordered_indices.iter().enumerate() {
                for (t, b) in table.ordered_indices.iter().enumerate() {
                    let v = jet.derivative_matrix(&full(a, lam).concat(&full(b, mu)))?;
                    block.view_mut((l * r, t * r), (r, r)).copy_from(&v);
                }
            }
            out.insert((lam.clone(), mu.clone()), block);
        }
    }
    Ok(out)
}
