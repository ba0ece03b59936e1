//! Unitary-equivalence tests for quotient modules along `{u_1 = ... = u_d = 0}`.
//!
//! Kernels are pulled back to chart coordinates and normalized at a base point on the
//! submanifold (the chart origin by default). Equivalence then means that the derivative
//! arrays of the two normalized Gram matrices agree on the submanifold up to one constant
//! unitary `D`, with `array_B = D array_A D^*`. `D` is searched as the null space of the
//! stacked linear conditions `M_B D - D M_A = 0`; only finitely many sample points are used.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    check_on_submanifold, covariant_derivs_from_gram, curvature, gram_jet, normalize_at, transport_maps_from_gram,
    CovKey,
};
use crate::jet_module::jet_kernel_truncated;
use crate::kernel_dsl::{builtin_bergman, pullback_affine, random_point, AffineChart, Expr, Kernel, KernelSpec};
use crate::linalg::{condition_number, frobenius, polar_unitary, right_singular_system, ser_c64_slice, ser_mat, Mat};
use crate::C64;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SAMPLES: usize = 5;
pub const DEFAULT_SEED: u64 = 7;
/// Tangential coordinates of default samples have modulus at most this.
pub const SAMPLE_RADIUS: f64 = 0.5;
/// Singular values below this fraction of the largest span the near-null space.
pub const NULL_RATIO: f64 = 1e-8;
/// A generic element of a degenerate null space must be at least this well conditioned.
pub const MAX_WITNESS_CONDITION: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct EquivOptions {
    pub tol: f64,
    /// Normalization point in chart coordinates; the origin when `None`.
    pub base: Option<Vec<C64>>,
    /// Jet truncation order; the smallest sufficient order when `None`.
    pub trunc: Option<usize>,
    /// Seed for the generic combination of a degenerate null space.
    pub seed: u64,
}

impl Default for EquivOptions {
    fn default() -> Self {
        EquivOptions { tol: DEFAULT_TOL, base: None, trunc: None, seed: DEFAULT_SEED }
    }
}

/// Deterministic sample points on `{u_1 = ... = u_d = 0}`.
pub fn default_samples(m: usize, d: usize, count: usize, seed: u64) -> Vec<Vec<C64>> {
    if d >= m {
        return vec![vec![C64::new(0.0, 0.0); m]];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut p = vec![C64::new(0.0, 0.0); d];
            p.extend(random_point(&mut rng, m - d, SAMPLE_RADIUS));
            p
        })
        .collect()
}

/// Smallest truncation order that serves every invariant for jet order `k`.
pub fn needed_trunc(k: usize) -> usize {
    (2 * k.saturating_sub(1)).max(k).max(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

impl Verdict {
    /// `<= tol` is a match, `> 10 tol` a mismatch, anything between is undecided.
    pub fn from_residual(residual: f64, tol: f64) -> Verdict {
        if residual <= tol {
            Verdict::Equivalent
        } else if residual > 10.0 * tol {
            Verdict::NotEquivalent
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Equivalent => "equivalent",
            Verdict::NotEquivalent => "not-equivalent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitaryWitness {
    #[serde(serialize_with = "ser_mat")]
    pub d: Mat,
    pub unitarity_defect: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointResidual {
    #[serde(serialize_with = "ser_c64_slice")]
    pub point: Vec<C64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionResult {
    pub name: String,
    pub max_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportParams {
    pub criterion: String,
    pub m: usize,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub samples: usize,
    pub tol: f64,
    pub trunc: usize,
    #[serde(serialize_with = "ser_c64_slice")]
    pub base: Vec<C64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub verdict: Verdict,
    pub witness: Option<UnitaryWitness>,
    pub residuals: Vec<PointResidual>,
    pub max_residual: f64,
    /// Dimension of the near-null space of the stacked witness equations.
    pub nullity: Option<usize>,
    pub conditions: Vec<ConditionResult>,
    pub failed_condition: Option<String>,
    pub note: Option<String>,
    pub params: ReportParams,
}

/// Invariants of a normalized kernel at one point of the submanifold.
#[derive(Debug, Clone)]
pub struct PointInvariants {
    pub point: Vec<C64>,
    /// `d^l dbar^t H` for `0 <= l, t <= N`, row-major in `(l, t)`.
    pub blocks: Vec<Mat>,
    /// Transverse curvature `K_{i j-bar}` (`i, j < d`) and its transverse covariant derivatives
    /// of total order at most `k - 2`.
    pub curvature: Vec<(CovKey, Mat)>,
    /// Transport maps `dbar_i (H^{-1} d^l H)`, row-major in `(l, tangential i)`.
    pub transport: Vec<Mat>,
}

#[derive(Debug, Clone)]
pub struct InvariantArray {
    pub m: usize,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub base: Vec<C64>,
    pub trunc: usize,
    pub points: Vec<PointInvariants>,
}

struct Setup {
    m: usize,
    d: usize,
    k: usize,
    trunc: usize,
    base: Vec<C64>,
    samples: Vec<Vec<C64>>,
}

fn setup(m: usize, chart: &AffineChart, k: usize, samples: &[Vec<C64>], opts: &EquivOptions) -> Result<Setup> {
    let d = chart.d();
    if chart.m() != m {
        return Err(Error::DimensionMismatch(format!("chart on C^{} for a kernel on C^{m}", chart.m())));
    }
    if d == 0 || k == 0 {
        return Err(Error::Invalid(format!("need codimension d >= 1 and k >= 1, got d = {d}, k = {k}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance {} must be positive", opts.tol)));
    }
    let need = needed_trunc(k);
    let trunc = match opts.trunc {
        Some(t) if t < need => return Err(Error::Truncation { requested: need, available: t }),
        Some(t) => t,
        None => need,
    };
    let base = opts.base.clone().unwrap_or_else(|| vec![C64::new(0.0, 0.0); m]);
    if base.len() != m {
        return Err(Error::DimensionMismatch("base point length".into()));
    }
    check_on_submanifold(&base, d)?;
    if samples.is_empty() {
        return Err(Error::Invalid("no sample points".into()));
    }
    for q in samples {
        if q.len() != m {
            return Err(Error::DimensionMismatch(format!("sample of length {} on C^{m}", q.len())));
        }
        check_on_submanifold(q, d)?;
    }
    Ok(Setup { m, d, k, trunc, base, samples: samples.to_vec() })
}

fn normalized(spec: &KernelSpec, chart: &AffineChart, base: &[C64]) -> Result<Arc<dyn Kernel>> {
    let pulled: Arc<dyn Kernel> = Arc::new(pullback_affine(spec, chart)?);
    Ok(Arc::new(normalize_at(pulled, base)?))
}

fn point_invariants(kernel: &dyn Kernel, q: &[C64], s: &Setup, geometry: bool) -> Result<PointInvariants> {
    let jk = jet_kernel_truncated(kernel, s.d, s.k, q, q, s.trunc)?;
    let mut blocks = Vec::with_capacity((jk.n + 1).pow(2));
    for l in 0..=jk.n {
        for t in 0..=jk.n {
            blocks.push(jk.block(l, t));
        }
    }
    let (mut curvature, mut transport) = (Vec::new(), Vec::new());
    if geometry {
        let g = gram_jet(kernel, q, s.trunc)?;
        let directions: Vec<usize> = (0..s.d).collect();
        let cov = covariant_derivs_from_gram(&g, &directions, s.k.saturating_sub(2))?;
        curvature = cov.entries.into_iter().filter(|(key, _)| key.i < s.d && key.j < s.d).collect();
        if s.d < s.m {
            transport = transport_maps_from_gram(&g, s.d, s.k)?.entries.into_iter().flatten().collect();
        }
    }
    Ok(PointInvariants { point: q.to_vec(), blocks, curvature, transport })
}

fn collect_invariants(kernel: &dyn Kernel, s: &Setup, geometry: bool) -> Result<Vec<PointInvariants>> {
    s.samples.par_iter().map(|q| point_invariants(kernel, q, s, geometry)).collect()
}

/// Normalized derivative arrays and the geometric invariants at every sample.
pub fn invariant_array(
    spec: &KernelSpec,
    chart: &AffineChart,
    k: usize,
    samples: &[Vec<C64>],
    opts: &EquivOptions,
) -> Result<InvariantArray> {
    let s = setup(spec.m, chart, k, samples, opts)?;
    let kernel = normalized(spec, chart, &s.base)?;
    let points = collect_invariants(kernel.as_ref(), &s, true)?;
    let n = (points[0].blocks.len() as f64).sqrt().round() as usize - 1;
    Ok(InvariantArray { m: s.m, d: s.d, k, n, r: spec.r, base: s.base, trunc: s.trunc, points })
}

fn scale_of(a: &Mat, b: &Mat) -> f64 {
    frobenius(a).max(frobenius(b)).max(1.0)
}

/// `|b - D a D^*| / max(|a|, |b|, 1)`.
fn conjugation_residual(b: &Mat, a: &Mat, d: &Mat) -> f64 {
    frobenius(&(b - d * a * d.adjoint())) / scale_of(a, b)
}

struct WitnessSearch {
    d: Option<Mat>,
    nullity: usize,
    note: Option<String>,
}

fn fix_phase(d: &mut Mat) {
    let (mut best, mut at) = (0.0, C64::new(1.0, 0.0));
    for v in d.iter() {
        if v.norm() > best {
            best = v.norm();
            at = *v;
        }
    }
    if best > 0.0 {
        *d *= at.conj() / best;
    }
}

/// Solves `b D = D a` for all `(b, a)` pairs; each pair's rows are scaled to unit size.
fn search_witness(pairs: &[(&Mat, &Mat)], r: usize, seed: u64) -> WitnessSearch {
    let n = r * r;
    let mut stack = Mat::zeros(pairs.len() * n, n);
    let id = Mat::identity(r, r);
    for (p, (b, a)) in pairs.iter().enumerate() {
        let op = id.kronecker(*b) - a.transpose().kronecker(&id);
        let s = C64::new(1.0 / scale_of(a, b), 0.0);
        stack.view_mut((p * n, 0), (n, n)).copy_from(&(op * s));
    }
    let (sigma, v) = right_singular_system(&stack);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let nullity = if smax == 0.0 { n } else { sigma.iter().filter(|&&x| x < NULL_RATIO * smax).count() };
    let column = |c: usize| Mat::from_column_slice(r, r, v.column(c).as_slice());
    let normalize = |mut d: Mat| {
        let f = frobenius(&d);
        if f > 0.0 {
            d *= C64::new((r as f64).sqrt() / f, 0.0);
        }
        fix_phase(&mut d);
        d
    };
    if nullity <= 1 {
        return WitnessSearch { d: Some(normalize(column(n - 1))), nullity, note: None };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut generic = Mat::zeros(r, r);
    for c in n - nullity..n {
        let w = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        generic += column(c) * w;
    }
    let cond = condition_number(&generic);
    if !(cond <= MAX_WITNESS_CONDITION) {
        return WitnessSearch {
            d: None,
            nullity,
            note: Some(format!(
                "witness equations have a {nullity}-dimensional solution space without an invertible generic element (condition {cond:.3e})"
            )),
        };
    }
    let mut u = polar_unitary(&generic);
    fix_phase(&mut u);
    WitnessSearch {
        d: Some(u),
        nullity,
        note: Some(format!("witness equations have a {nullity}-dimensional solution space; using the polar factor of a generic solution")),
    }
}

fn unitarity_defect(d: &Mat) -> f64 {
    frobenius(&(d * d.adjoint() - Mat::identity(d.nrows(), d.nrows())))
}

/// Per-point residuals of `b = D a D^*` over groups of pairs drawn from each point.
fn point_residuals<'a>(
    a: &'a [PointInvariants],
    b: &'a [PointInvariants],
    d: &Mat,
    pick: impl Fn(&'a PointInvariants, &'a PointInvariants) -> Vec<(&'a Mat, &'a Mat)>,
) -> Vec<PointResidual> {
    a.iter()
        .zip(b)
        .map(|(pa, pb)| PointResidual {
            point: pa.point.clone(),
            residual: pick(pa, pb).iter().map(|(x, y)| conjugation_residual(x, y, d)).fold(0.0, f64::max),
        })
        .collect()
}

fn max_of(r: &[PointResidual]) -> f64 {
    r.iter().map(|p| p.residual).fold(0.0, f64::max)
}

fn params(criterion: &str, s: &Setup, r: usize, tol: f64) -> ReportParams {
    let n = crate::multiindex::binomial((s.d + s.k - 1) as u64, (s.k - 1) as u64).unwrap_or(1) as usize - 1;
    ReportParams {
        criterion: criterion.into(),
        m: s.m,
        d: s.d,
        k: s.k,
        n,
        r,
        samples: s.samples.len(),
        tol,
        trunc: s.trunc,
        base: s.base.clone(),
    }
}

fn block_pairs<'a>(pa: &'a PointInvariants, pb: &'a PointInvariants) -> Vec<(&'a Mat, &'a Mat)> {
    pb.blocks.iter().zip(&pa.blocks).collect()
}

fn check_same_m(a: &KernelSpec, b: &KernelSpec) -> Result<()> {
    if a.m != b.m {
        return Err(Error::DimensionMismatch(format!("kernels on C^{} and C^{}", a.m, b.m)));
    }
    Ok(())
}

/// Rank one: the normalized scalar arrays must agree at every sample.
pub fn rank1_equiv(
    a: &KernelSpec,
    b: &KernelSpec,
    chart: &AffineChart,
    k: usize,
    samples: &[Vec<C64>],
    opts: &EquivOptions,
) -> Result<EquivalenceReport> {
    if a.r != 1 || b.r != 1 {
        return Err(Error::DimensionMismatch(format!("rank-one test on kernels of rank {} and {}", a.r, b.r)));
    }
    check_same_m(a, b)?;
    let s = setup(a.m, chart, k, samples, opts)?;
    let ia = collect_invariants(normalized(a, chart, &s.base)?.as_ref(), &s, false)?;
    let ib = collect_invariants(normalized(b, chart, &s.base)?.as_ref(), &s, false)?;
    let one = Mat::identity(1, 1);
    let residuals = point_residuals(&ia, &ib, &one, block_pairs);
    let max_residual = max_of(&residuals);
    Ok(EquivalenceReport {
        verdict: Verdict::from_residual(max_residual, opts.tol),
        witness: Some(UnitaryWitness { d: one, unitarity_defect: 0.0, max_residual }),
        residuals,
        max_residual,
        nullity: None,
        conditions: Vec::new(),
        failed_condition: None,
        note: None,
        params: params("rank1", &s, 1, opts.tol),
    })
}

fn check_ranks(a: &KernelSpec, b: &KernelSpec) -> Result<()> {
    check_same_m(a, b)?;
    if a.r != b.r {
        return Err(Error::DimensionMismatch(format!("kernels of rank {} and {}", a.r, b.r)));
    }
    Ok(())
}

fn finish(
    criterion: &str,
    s: &Setup,
    r: usize,
    tol: f64,
    search: WitnessSearch,
    residuals_for: impl Fn(&Mat) -> (Vec<PointResidual>, Vec<ConditionResult>),
) -> EquivalenceReport {
    let (d, forced) = match search.d {
        Some(d) => (d, None),
        None => (Mat::identity(r, r), Some(Verdict::Inconclusive)),
    };
    let (residuals, mut conditions) = residuals_for(&d);
    let defect = unitarity_defect(&d);
    let max_residual = max_of(&residuals).max(defect);
    for c in &mut conditions {
        c.passed = c.max_residual <= tol;
    }
    let failed_condition = conditions.iter().find(|c| !c.passed).map(|c| c.name.clone());
    let verdict = forced.unwrap_or_else(|| Verdict::from_residual(max_residual, tol));
    let witness = forced.is_none().then(|| UnitaryWitness { d, unitarity_defect: defect, max_residual });
    EquivalenceReport {
        verdict,
        witness,
        residuals,
        max_residual,
        nullity: Some(search.nullity),
        conditions,
        failed_condition,
        note: search.note,
        params: params(criterion, s, r, tol),
    }
}

/// Rank `r`: a constant unitary must conjugate every normalized derivative block.
pub fn rankr_equiv(
    a: &KernelSpec,
    b: &KernelSpec,
    chart: &AffineChart,
    k: usize,
    samples: &[Vec<C64>],
    opts: &EquivOptions,
) -> Result<EquivalenceReport> {
    check_ranks(a, b)?;
    let s = setup(a.m, chart, k, samples, opts)?;
    let ia = collect_invariants(normalized(a, chart, &s.base)?.as_ref(), &s, false)?;
    let ib = collect_invariants(normalized(b, chart, &s.base)?.as_ref(), &s, false)?;
    let pairs: Vec<_> = ia.iter().zip(&ib).flat_map(|(pa, pb)| block_pairs(pa, pb)).collect();
    let search = search_witness(&pairs, a.r, opts.seed);
    Ok(finish("rankr", &s, a.r, opts.tol, search, |d| (point_residuals(&ia, &ib, d, block_pairs), Vec::new())))
}

const MTHM_CONDITIONS: [&str; 3] = ["(i) restricted Gram", "(ii) transverse curvature", "(iii) transport maps"];

fn mthm_group<'a>(g: usize, pa: &'a PointInvariants, pb: &'a PointInvariants) -> Vec<(&'a Mat, &'a Mat)> {
    match g {
        0 => vec![(&pb.blocks[0], &pa.blocks[0])],
        1 => pb.curvature.iter().zip(&pa.curvature).map(|(x, y)| (&x.1, &y.1)).collect(),
        _ => pb.transport.iter().zip(&pa.transport).collect(),
    }
}

/// Restricted Gram matrices, transverse curvature with covariant derivatives, and transport
/// maps, all intertwined by one constant unitary. Conditions are reported separately.
pub fn mthm_check(
    a: &KernelSpec,
    b: &KernelSpec,
    chart: &AffineChart,
    k: usize,
    samples: &[Vec<C64>],
    opts: &EquivOptions,
) -> Result<EquivalenceReport> {
    check_ranks(a, b)?;
    let s = setup(a.m, chart, k, samples, opts)?;
    let ia = collect_invariants(normalized(a, chart, &s.base)?.as_ref(), &s, true)?;
    let ib = collect_invariants(normalized(b, chart, &s.base)?.as_ref(), &s, true)?;
    let all = |pa, pb| (0..3).flat_map(|g| mthm_group(g, pa, pb)).collect::<Vec<_>>();
    let pairs: Vec<_> = ia.iter().zip(&ib).flat_map(|(pa, pb)| all(pa, pb)).collect();
    let search = search_witness(&pairs, a.r, opts.seed);
    Ok(finish("mthm", &s, a.r, opts.tol, search, |d| {
        let conditions = (0..3)
            .map(|g| ConditionResult {
                name: MTHM_CONDITIONS[g].into(),
                max_residual: max_of(&point_residuals(&ia, &ib, d, |pa, pb| mthm_group(g, pa, pb))),
                passed: false,
            })
            .collect();
        (point_residuals(&ia, &ib, d, all), conditions)
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaEmPoint {
    #[serde(serialize_with = "ser_c64_slice")]
    pub point: Vec<C64>,
    pub em_residual: f64,
    pub curvature_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaEmReport {
    pub em_residual: f64,
    pub curvature_residual: f64,
    pub em_holds: bool,
    pub curvature_equal: bool,
    pub points: Vec<LemmaEmPoint>,
}

/// For `d = k = 2`, rank one: residual of `rho_B = Psi rho_A Psi^*` on the jet matrices
/// `rho = (d^a dbar^b rho)` with `Psi = [[p00, 0, 0], [p10, p00, 0], [p01, 0, p00]]`, and
/// separately the residual of `K_A = K_B` for the full curvature, at each sample.
pub fn lemma_em_check(
    a: &KernelSpec,
    b: &KernelSpec,
    chart: &AffineChart,
    psi: [&Expr; 3],
    samples: &[Vec<C64>],
    tol: f64,
) -> Result<LemmaEmReport> {
    check_ranks(a, b)?;
    if a.r != 1 || chart.d() != 2 {
        return Err(Error::Invalid(format!(
            "this check needs rank 1 and codimension 2, got rank {} and codimension {}",
            a.r,
            chart.d()
        )));
    }
    for p in psi {
        if p.uses_wb() {
            return Err(Error::Invalid(format!("`{p}` is not holomorphic")));
        }
    }
    let opts = EquivOptions { tol, ..EquivOptions::default() };
    let s = setup(a.m, chart, 2, samples, &opts)?;
    let pa = pullback_affine(a, chart)?;
    let pb = pullback_affine(b, chart)?;
    let points = s
        .samples
        .par_iter()
        .map(|q| {
            let ra = jet_kernel_truncated(&pa, 2, 2, q, q, 2)?.matrix;
            let rb = jet_kernel_truncated(&pb, 2, 2, q, q, 2)?.matrix;
            let qb: Vec<C64> = q.iter().map(|z| z.conj()).collect();
            let v = psi.iter().map(|p| p.eval_point(q, &qb)).collect::<Result<Vec<_>>>()?;
            let zero = C64::new(0.0, 0.0);
            let big_psi = Mat::from_row_slice(3, 3, &[v[0], zero, zero, v[1], v[0], zero, v[2], zero, v[0]]);
            let em_residual = frobenius(&(&rb - &big_psi * &ra * big_psi.adjoint())) / scale_of(&ra, &rb);
            let ka = curvature(&pa, q)?;
            let kb = curvature(&pb, q)?;
            let scale = ka.max_norm().max(kb.max_norm()).max(1.0);
            let curvature_residual = ka
                .entries
                .iter()
                .zip(&kb.entries)
                .map(|(x, y)| frobenius(&(x - y)) / scale)
                .fold(0.0, f64::max);
            Ok(LemmaEmPoint { point: q.clone(), em_residual, curvature_residual })
        })
        .collect::<Result<Vec<_>>>()?;
    let em_residual = points.iter().map(|p| p.em_residual).fold(0.0, f64::max);
    let curvature_residual = points.iter().map(|p| p.curvature_residual).fold(0.0, f64::max);
    Ok(LemmaEmReport {
        em_residual,
        curvature_residual,
        em_holds: em_residual <= tol,
        curvature_equal: curvature_residual <= tol,
        points,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightRecovery {
    pub input: Vec<f64>,
    /// Mean over samples.
    pub recovered: Vec<f64>,
    /// Per-sample partial sums `sum_{l <= i} weight_l`.
    pub partial_sums: Vec<Vec<f64>>,
    /// Largest relative deviation of a recovered weight from the input.
    pub max_relative_error: f64,
    /// Largest spread of a recovered weight across samples.
    pub spread: f64,
}

/// Recovers `bergman(weights)` weights from the curvature diagonal on the diagonal of the
/// polydisc, through the chart `u_i = z_i - z_{i+1}`. On that diagonal
/// `K_{ii} = (w_1 + ... + w_i) (1 - |u_m|^2)^{-2}`.
pub fn recover_bergman_weights(weights: &[f64], samples: &[Vec<C64>]) -> Result<WeightRecovery> {
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Invalid("weights must be positive".into()));
    }
    let m = weights.len();
    let chart = AffineChart::diagonal(m)?;
    let pulled = pullback_affine(&builtin_bergman(weights)?, &chart)?;
    if samples.is_empty() {
        return Err(Error::Invalid("no sample points".into()));
    }
    for q in samples {
        if q.len() != m {
            return Err(Error::DimensionMismatch(format!("sample of length {} on C^{m}", q.len())));
        }
        check_on_submanifold(q, m - 1)?;
    }
    let partial_sums = samples
        .par_iter()
        .map(|q| {
            let c = curvature(&pulled, q)?;
            let f = (1.0 - q[m - 1].norm_sqr()).powi(2);
            Ok((0..m).map(|i| c.entry(i, i)[(0, 0)].re * f).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let per_sample: Vec<Vec<f64>> = partial_sums
        .iter()
        .map(|s| (0..m).map(|i| if i == 0 { s[0] } else { s[i] - s[i - 1] }).collect())
        .collect();
    let recovered: Vec<f64> =
        (0..m).map(|i| per_sample.iter().map(|w| w[i]).sum::<f64>() / per_sample.len() as f64).collect();
    let max_relative_error =
        recovered.iter().zip(weights).map(|(r, w)| (r - w).abs() / w.abs()).fold(0.0, f64::max);
    let spread = (0..m)
        .map(|i| {
            let lo = per_sample.iter().map(|w| w[i]).fold(f64::INFINITY, f64::min);
            let hi = per_sample.iter().map(|w| w[i]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(WeightRecovery { input: weights.to_vec(), recovered, partial_sums, max_relative_error, spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_dsl::{parse_expr, parse_kernel};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn verdict_thresholds() {
        assert_eq!(Verdict::from_residual(1e-9, 1e-8), Verdict::Equivalent);
        assert_eq!(Verdict::from_residual(5e-8, 1e-8), Verdict::Inconclusive);
        assert_eq!(Verdict::from_residual(2e-7, 1e-8), Verdict::NotEquivalent);
    }

    #[test]
    fn default_samples_lie_on_z() {
        let s = default_samples(3, 2, 5, 1);
        assert_eq!(s.len(), 5);
        for q in &s {
            assert!(q[0] == c(0.0) && q[1] == c(0.0) && q[2].norm() <= SAMPLE_RADIUS);
        }
        assert_eq!(default_samples(2, 2, 5, 1), vec![vec![c(0.0); 2]]);
    }

    #[test]
    fn bergman_normalized_array_at_origin() {
        let k = builtin_bergman(&[1.5, 2.5]).unwrap();
        let chart = AffineChart::identity(2, 1).unwrap();
        let arr = invariant_array(&k, &chart, 2, &[vec![c(0.0), c(0.0)]], &EquivOptions::default()).unwrap();
        assert_eq!(arr.n, 1);
        let b = &arr.points[0].blocks;
        assert!((b[0][(0, 0)] - c(1.0)).norm() < 1e-14);
        assert!((b[3][(0, 0)] - c(1.5)).norm() < 1e-13);
        assert!(b[1][(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn constant_kernel_arrays() {
        let k = parse_kernel("m = 2\nr = 1\nK[1][1] = 3").unwrap();
        let chart = AffineChart::identity(2, 1).unwrap();
        let s = default_samples(2, 1, 3, 2);
        let arr = invariant_array(&k, &chart, 2, &s, &EquivOptions::default()).unwrap();
        for p in &arr.points {
            assert!((p.blocks[0][(0, 0)] - c(1.0)).norm() < 1e-14);
            assert!(p.blocks[1..].iter().all(|m| frobenius(m) < 1e-14));
        }
    }

    #[test]
    fn recovers_weights() {
        let s = default_samples(3, 2, 4, 3);
        let r = recover_bergman_weights(&[1.0, 2.0, 3.0], &s).unwrap();
        assert!(r.max_relative_error < 1e-10, "{r:?}");
        for p in &r.partial_sums {
            assert!((p[0] - 1.0).abs() < 1e-10 && (p[1] - 3.0).abs() < 1e-10 && (p[2] - 6.0).abs() < 1e-10);
        }
        let r = recover_bergman_weights(&[2.5], &[vec![C64::new(0.3, 0.1)]]).unwrap();
        assert!((r.recovered[0] - 2.5).abs() < 1e-12);
        assert!(recover_bergman_weights(&[1.0, 2.0], &[vec![c(0.1), c(0.2)]]).is_err());
    }

    #[test]
    fn rank_one_self_and_gauge() {
        let k = builtin_bergman(&[1.0, 2.0, 3.0]).unwrap();
        let chart = AffineChart::diagonal(3).unwrap();
        let s = default_samples(3, 2, 3, 4);
        let opts = EquivOptions::default();
        let rep = rank1_equiv(&k, &k, &chart, 2, &s, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Equivalent);
        assert_eq!(rep.max_residual, 0.0);
        let g = k.rescale(&parse_expr("exp(z1)", 3).unwrap()).unwrap();
        assert_eq!(rank1_equiv(&k, &g, &chart, 2, &s, &opts).unwrap().verdict, Verdict::Equivalent);
        let p = builtin_bergman(&[1.0, 3.0, 2.0]).unwrap();
        assert_eq!(rank1_equiv(&k, &p, &chart, 2, &s, &opts).unwrap().verdict, Verdict::NotEquivalent);
    }

    #[test]
    fn rank_two_witness_and_degenerate_pair() {
        let chart = AffineChart::identity(2, 1).unwrap();
        let s = default_samples(2, 1, 3, 5);
        let opts = EquivOptions::default();
        let a = parse_kernel("m = 2\nr = 2\nK[1][1] = (1 - z1*wb1)^-1*(1-z2*wb2)^-1\nK[1][2] = 0.3*z1*wb2\nK[2][1] = 0.3*z2*wb1\nK[2][2] = (1 - z1*wb1)^-2*(1-z2*wb2)^-2").unwrap();
        let u = Mat::from_row_slice(2, 2, &[c(0.6), C64::new(0.0, 0.8), C64::new(0.0, 0.8), c(0.6)]);
        let b = a.conjugate_by(&u).unwrap();
        let rep = rankr_equiv(&a, &b, &chart, 2, &s, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Equivalent, "{rep:?}");
        let d = rep.witness.unwrap().d;
        let ph = crate::linalg::best_phase(&d, &u);
        assert!(frobenius(&(&d - &u * ph)) < 1e-6);
        let k1 = "(1 - z1*wb1)^-1";
        let k2 = "(1 - z1*wb1)^-2";
        let diag = |x: &str, y: &str| {
            parse_kernel(&format!("m = 2\nr = 2\nK[1][1] = {x}\nK[1][2] = 0\nK[2][1] = 0\nK[2][2] = {y}")).unwrap()
        };
        let rep = rankr_equiv(&diag(k1, k2), &diag(k1, k2), &chart, 2, &s, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Equivalent);
        assert_eq!(rep.nullity, Some(2));
        let rep = rankr_equiv(&diag(k1, k2), &diag(k1, k1), &chart, 2, &s, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        let m = mthm_check(&a, &b, &chart, 2, &s, &opts).unwrap();
        assert_eq!(m.verdict, Verdict::Equivalent, "{m:?}");
    }
}
