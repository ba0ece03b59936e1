use std::fs;
use std::path::Path;

use serde::Serialize;

use jetmod_core::equivalence::{default_samples, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL};
use jetmod_core::geometry::{curvature_from_gram, ddbm_residual, gram_jet};
use jetmod_core::jet_module::jet_kernel_truncated;
use jetmod_core::kernel_dsl::parse_complex;
use jetmod_core::linalg::mat_rows;
use jetmod_core::quotient_oracle::{
    build_level, closed_forms, diagonal_jet_kernel_closed_form, level_identities, LevelIdentities,
};
use jetmod_core::{
    builtin_bergman, chart_jet_transform, mthm_check, parse_kernel, pullback_affine, quotient_kernel_partial,
    rank1_equiv, rankr_equiv, recover_bergman_weights, restrict_to_z, AffineChart, AmbientWeights, EquivOptions,
    EquivalenceReport, KernelSpec, Mat, Verdict, C64,
};

use crate::report::{to_json, write_atomic, ReportDocument, SCHEMA};
use crate::{CliError, Common, Criterion, Outcome};

type Rows = Vec<Vec<[f64; 2]>>;

/// Everything that determines a run, echoed into the report.
#[derive(Debug, Serialize)]
struct RunConfig {
    kernel: Option<String>,
    kernel2: Option<String>,
    chart: Option<String>,
    d: Option<usize>,
    k: usize,
    points: Option<Vec<Vec<[f64; 2]>>>,
    seed: Option<u64>,
    num_samples: Option<usize>,
    tol: Option<f64>,
    trunc: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    criterion: Option<Criterion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    restrict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
}

impl RunConfig {
    fn from_common(c: &Common, points: Option<&[Vec<C64>]>) -> Result<Self, CliError> {
        if c.k == 0 {
            return Err(CliError::Usage("-k must be at least 1".into()));
        }
        if c.d == Some(0) {
            return Err(CliError::Usage("-d must be at least 1".into()));
        }
        if let Some(t) = c.tol {
            if !(t > 0.0) {
                return Err(CliError::Usage(format!("--tol must be positive, got {t}")));
            }
        }
        Ok(RunConfig {
            kernel: c.kernel.as_ref().map(|p| p.display().to_string()),
            kernel2: c.kernel2.as_ref().map(|p| p.display().to_string()),
            chart: c.chart.clone(),
            d: c.d,
            k: c.k,
            points: points.map(|ps| ps.iter().map(|p| pair_list(p)).collect()),
            seed: c.seed,
            num_samples: c.num_samples,
            tol: c.tol,
            trunc: c.trunc,
            criterion: None,
            restrict: None,
            weights: None,
            z: None,
            pmax: None,
            levels: None,
        })
    }
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn pair_list(p: &[C64]) -> Vec<[f64; 2]> {
    p.iter().map(|z| pair(*z)).collect()
}

fn fmt_c(z: C64) -> String {
    format!("{:+.6e}{:+.6e}i", z.re, z.im)
}

fn fmt_point(p: &[C64]) -> String {
    let parts: Vec<String> = p.iter().map(|z| fmt_c(*z)).collect();
    format!("({})", parts.join(", "))
}

fn print_matrix(m: &Mat, indent: &str) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>28}", fmt_c(m[(i, j)]))).collect();
        println!("{indent}{}", row.join(" "));
    }
}

fn load_kernel(path: &Path) -> Result<KernelSpec, CliError> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: shown.clone(), source })?;
    parse_kernel(&text).map_err(|source| CliError::Parse { path: shown, source })
}

fn require<'a>(p: &'a Option<std::path::PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Usage(format!("this command needs {flag} FILE")))
}

fn parse_points(text: &str, m: usize) -> Result<Vec<Vec<C64>>, CliError> {
    let points = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| {
            let coords = p
                .split(',')
                .map(|x| parse_complex(x.trim()).map_err(|e| CliError::Usage(format!("bad coordinate `{}`: {}", x.trim(), e.message))))
                .collect::<Result<Vec<_>, _>>()?;
            if coords.len() != m {
                return Err(CliError::Usage(format!("point `{}` has {} coordinates, expected {m}", p.trim(), coords.len())));
            }
            Ok(coords)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if points.is_empty() {
        return Err(CliError::Usage("--points is empty".into()));
    }
    Ok(points)
}

/// Explicit points, or seeded samples on `{u_1 = .. = u_d = 0}`.
fn sample_points(c: &Common, m: usize, d: usize) -> Result<Vec<Vec<C64>>, CliError> {
    match &c.points {
        Some(text) => parse_points(text, m),
        None => {
            let count = c.num_samples.unwrap_or(DEFAULT_SAMPLES);
            if count == 0 {
                return Err(CliError::Usage("--num-samples must be at least 1".into()));
            }
            Ok(default_samples(m, d, count, c.seed.unwrap_or(DEFAULT_SEED)))
        }
    }
}

fn resolve_chart(c: &Common, specs: &[&KernelSpec]) -> Result<Option<AffineChart>, CliError> {
    let m = specs[0].m;
    let chart = match &c.chart {
        Some(text) => Some(AffineChart::parse(text, m)?),
        None => specs.iter().find_map(|s| s.chart.clone()),
    };
    if let (Some(ch), Some(d)) = (&chart, c.d) {
        if ch.d() != d {
            return Err(CliError::Usage(format!("-d {d} disagrees with the chart codimension {}", ch.d())));
        }
    }
    Ok(chart)
}

fn codim(c: &Common, m: usize) -> Result<usize, CliError> {
    let d = c.d.unwrap_or(m.saturating_sub(1).max(1));
    if d > m {
        return Err(CliError::Usage(format!("-d {d} exceeds the dimension {m}")));
    }
    Ok(d)
}

fn emit<R: Serialize>(c: &Common, command: &str, config: &RunConfig, results: &R) -> Result<(), CliError> {
    let Some(out) = &c.out else {
        return Ok(());
    };
    let doc = ReportDocument {
        schema: SCHEMA,
        tool: "jetmod",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        results,
    };
    let bytes = to_json(&doc)?;
    write_atomic(out, &bytes).map_err(|source| CliError::Io { path: out.display().to_string(), source })?;
    println!("report written to {}", out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct CurvaturePoint {
    point: Vec<[f64; 2]>,
    /// `m x m` grid of `r x r` blocks `K_{i j-bar}`.
    entries: Vec<Vec<Rows>>,
    self_adjointness_defect: f64,
    ddbm_residual: f64,
}

#[derive(Debug, Serialize)]
struct CurvatureResults {
    kernel: String,
    m: usize,
    r: usize,
    points: Vec<CurvaturePoint>,
}

pub fn curvature(c: &Common) -> Result<Outcome, CliError> {
    let spec = load_kernel(require(&c.kernel, "--kernel")?)?;
    let chart = resolve_chart(c, &[&spec])?;
    let kernel = match &chart {
        Some(ch) => pullback_affine(&spec, ch)?,
        None => spec.clone(),
    };
    let points = sample_points(c, spec.m, 0)?;
    let config = RunConfig::from_common(c, Some(&points))?;
    let mut rows = Vec::with_capacity(points.len());
    println!("curvature of {} (m = {}, r = {})", spec.label, spec.m, spec.r);
    for p in &points {
        let g = gram_jet(&kernel, p, 2)?;
        let k = curvature_from_gram(&g)?;
        let resid = ddbm_residual(&g, &k)?;
        let defect = k.self_adjointness_defect();
        println!("point {}", fmt_point(p));
        for i in 0..kernel.m {
            for j in 0..kernel.m {
                println!("  K[{}][{}]:", i + 1, j + 1);
                print_matrix(k.entry(i, j), "    ");
            }
        }
        println!("  self-adjointness defect {defect:.3e}, identity residual {resid:.3e}");
        rows.push(CurvaturePoint {
            point: pair_list(p),
            entries: (0..kernel.m).map(|i| (0..kernel.m).map(|j| mat_rows(k.entry(i, j))).collect()).collect(),
            self_adjointness_defect: defect,
            ddbm_residual: resid,
        });
    }
    let results = CurvatureResults { kernel: spec.label.clone(), m: spec.m, r: spec.r, points: rows };
    emit(c, "curvature", &config, &results)?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize)]
struct JetKernelPoint {
    point: Vec<[f64; 2]>,
    /// `JK(z, z)` in chart coordinates.
    matrix: Rows,
    /// The same jet kernel transported to original coordinates, when a chart was given.
    original: Option<Rows>,
}

#[derive(Debug, Serialize)]
struct JetKernelResults {
    kernel: String,
    m: usize,
    r: usize,
    d: usize,
    k: usize,
    trunc: usize,
    /// Transverse multi-indices in the order of the rows and columns.
    indices: Vec<Vec<u32>>,
    points: Vec<JetKernelPoint>,
}

pub fn jetkernel(c: &Common, restrict: bool) -> Result<Outcome, CliError> {
    let spec = load_kernel(require(&c.kernel, "--kernel")?)?;
    let chart = resolve_chart(c, &[&spec])?;
    let (kernel, d) = match &chart {
        Some(ch) => (pullback_affine(&spec, ch)?, ch.d()),
        None => (spec.clone(), codim(c, spec.m)?),
    };
    let points = if c.points.is_some() || c.seed.is_some() || c.num_samples.is_some() {
        sample_points(c, spec.m, d)?
    } else {
        vec![vec![C64::new(0.0, 0.0); spec.m]]
    };
    let mut config = RunConfig::from_common(c, Some(&points))?;
    config.restrict = Some(restrict);
    let trunc = c.trunc.unwrap_or(2 * (c.k - 1));
    let transform = match &chart {
        Some(ch) if ch.is_admissible() => Some(chart_jet_transform(ch, c.k)?),
        _ => None,
    };
    let mut rows = Vec::with_capacity(points.len());
    let mut indices = Vec::new();
    for p in &points {
        let jk = jet_kernel_truncated(&kernel, d, c.k, p, p, trunc)?;
        let jk = if restrict { restrict_to_z(jk)?.jet_kernel } else { jk };
        if indices.is_empty() {
            indices = jk.indices.iter().map(|a| a.entries().to_vec()).collect();
            println!("jet kernel of {} (m = {}, r = {}, d = {d}, k = {})", spec.label, spec.m, spec.r, c.k);
            println!("index legend:");
            for (n, a) in indices.iter().enumerate() {
                println!("  {n}: {a:?}");
            }
        }
        let original = transform.as_ref().map(|t| t.transform_kernel(&jk)).transpose()?;
        println!("point {}", fmt_point(p));
        println!("  chart coordinates:");
        print_matrix(&jk.matrix, "    ");
        if let Some(o) = &original {
            println!("  original coordinates:");
            print_matrix(o, "    ");
        }
        rows.push(JetKernelPoint { point: pair_list(p), matrix: mat_rows(&jk.matrix), original: original.as_ref().map(mat_rows) });
    }
    let results = JetKernelResults { kernel: spec.label.clone(), m: spec.m, r: spec.r, d, k: c.k, trunc, indices, points: rows };
    emit(c, "jetkernel", &config, &results)?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize)]
struct EquivResults<'a> {
    kernel: String,
    kernel2: String,
    chart: String,
    report: &'a EquivalenceReport,
}

pub fn equiv(c: &Common, criterion: Criterion) -> Result<Outcome, CliError> {
    let a = load_kernel(require(&c.kernel, "--kernel")?)?;
    let b = load_kernel(require(&c.kernel2, "--kernel2")?)?;
    if a.m != b.m {
        return Err(CliError::Usage(format!("kernels live on C^{} and C^{}", a.m, b.m)));
    }
    let chart = match resolve_chart(c, &[&a, &b])? {
        Some(ch) => ch,
        None => AffineChart::identity(a.m, codim(c, a.m)?)?,
    };
    let samples = sample_points(c, a.m, chart.d())?;
    let mut config = RunConfig::from_common(c, Some(&samples))?;
    config.criterion = Some(criterion);
    let seed = c.seed.unwrap_or(DEFAULT_SEED);
    let opts = EquivOptions { tol: c.tol.unwrap_or(DEFAULT_TOL), base: None, trunc: c.trunc, seed };
    let criterion = match criterion {
        Criterion::Auto if a.r == 1 && b.r == 1 => Criterion::Rank1,
        Criterion::Auto => Criterion::Rankr,
        other => other,
    };
    let report = match criterion {
        Criterion::Rank1 => rank1_equiv(&a, &b, &chart, c.k, &samples, &opts)?,
        Criterion::Mthm => mthm_check(&a, &b, &chart, c.k, &samples, &opts)?,
        _ => rankr_equiv(&a, &b, &chart, c.k, &samples, &opts)?,
    };
    println!("{} vs {} ({} criterion, m = {}, d = {}, k = {})", a.label, b.label, report.params.criterion, a.m, chart.d(), c.k);
    for r in &report.residuals {
        println!("  {:<60} residual {:.3e}", fmt_point(&r.point), r.residual);
    }
    for cond in &report.conditions {
        println!("  condition {:<28} residual {:.3e} {}", cond.name, cond.max_residual, if cond.passed { "ok" } else { "FAILED" });
    }
    if let Some(n) = report.nullity {
        println!("  witness null-space dimension {n}");
    }
    if let Some(w) = &report.witness {
        println!("  witness (unitarity defect {:.3e}):", w.unitarity_defect);
        print_matrix(&w.d, "    ");
    }
    if let Some(note) = &report.note {
        println!("  note: {note}");
    }
    println!("verdict: {} (max residual {:.3e}, tol {:.1e})", report.verdict, report.max_residual, opts.tol);
    let results = EquivResults {
        kernel: a.label.clone(),
        kernel2: b.label.clone(),
        chart: c.chart.clone().unwrap_or_else(|| format!("identity({}, {})", a.m, chart.d())),
        report: &report,
    };
    emit(c, "equiv", &config, &results)?;
    Ok(match report.verdict {
        Verdict::Equivalent => Outcome::Ok,
        Verdict::NotEquivalent => Outcome::NotEquivalent,
        Verdict::Inconclusive => Outcome::Inconclusive,
    })
}

pub fn recover_weights(c: &Common, weights: &[f64]) -> Result<Outcome, CliError> {
    let m = weights.len();
    let samples = sample_points(c, m, m - 1)?;
    let mut config = RunConfig::from_common(c, Some(&samples))?;
    config.weights = Some(weights.to_vec());
    let rec = recover_bergman_weights(weights, &samples)?;
    println!("{:>6} {:>24} {:>24}", "i", "input", "recovered");
    for i in 0..m {
        println!("{:>6} {:>24.16e} {:>24.16e}", i + 1, rec.input[i], rec.recovered[i]);
    }
    println!("max relative error {:.3e}, spread across samples {:.3e}", rec.max_relative_error, rec.spread);
    emit(c, "recover-weights", &config, &rec)?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize)]
struct LevelRow {
    p: usize,
    computed: LevelIdentities,
    closed_form: LevelIdentities,
    max_relative_residual: f64,
}

#[derive(Debug, Serialize)]
struct DemoResults {
    weights: [f64; 3],
    z: [f64; 2],
    pmax: usize,
    /// Partial sum of the explicit orthonormal basis expansion.
    oracle: Rows,
    oracle_tail_estimate: f64,
    /// Jet kernel through the chart `u_i = z_i - z_{i+1}`, transported to original coordinates.
    jet_module: Rows,
    closed_form: Rows,
    max_deviation_oracle: f64,
    max_deviation_closed_form: f64,
    levels: Vec<LevelRow>,
}

fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn relative(x: f64, want: f64) -> f64 {
    let scale = x.abs().max(want.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - want).abs() / scale
    }
}

pub fn quotient_demo(c: &Common, weights: &[f64], z: &str, pmax: usize, levels: usize) -> Result<Outcome, CliError> {
    let w: [f64; 3] = weights
        .try_into()
        .map_err(|_| CliError::Usage(format!("--weights needs three values, got {}", weights.len())))?;
    let t = parse_complex(z).map_err(|e| CliError::Usage(format!("bad --z `{z}`: {}", e.message)))?;
    let mut config = RunConfig::from_common(c, None)?;
    config.weights = Some(w.to_vec());
    config.z = Some(pair(t));
    config.pmax = Some(pmax);
    config.levels = Some(levels);

    let oracle = quotient_kernel_partial(t, w, pmax)?;
    let chart = AffineChart::diagonal(3)?;
    let pulled = pullback_affine(&builtin_bergman(&w)?, &chart)?;
    let u = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), t];
    let jk = restrict_to_z(jet_kernel_truncated(&pulled, 2, 2, &u, &u, c.trunc.unwrap_or(2))?)?.jet_kernel;
    let jet = chart_jet_transform(&chart, 2)?.transform_kernel(&jk)?;
    let closed = diagonal_jet_kernel_closed_form(t, w);
    let dev_oracle = max_abs_diff(&oracle.matrix, &jet);
    let dev_closed = max_abs_diff(&closed, &jet);

    println!("diagonal quotient of bergman({}, {}, {}) at z = {}", w[0], w[1], w[2], fmt_c(t));
    println!("basis expansion, degrees <= {pmax} (tail estimate {:.3e}):", oracle.tail_estimate);
    print_matrix(&oracle.matrix, "  ");
    println!("jet kernel, original coordinates:");
    print_matrix(&jet, "  ");
    println!("closed form:");
    print_matrix(&closed, "  ");
    println!("max |expansion - jet kernel| = {dev_oracle:.3e}");
    println!("max |closed form - jet kernel| = {dev_closed:.3e}");

    let amb = AmbientWeights::new(w, levels)?;
    let mut rows = Vec::with_capacity(levels + 1);
    println!("{:>4} {}", "p", LevelIdentities::NAMES.map(|n| format!("{n:>24}")).join(" "));
    for p in 0..=levels {
        let computed = level_identities(&build_level(p, &amb)?)?;
        let closed_form = closed_forms(p, w);
        let worst = computed
            .as_array()
            .iter()
            .zip(closed_form.as_array())
            .map(|(x, y)| relative(*x, y))
            .fold(0.0, f64::max);
        let cells: Vec<String> = computed.as_array().iter().map(|x| format!("{x:>24.16e}")).collect();
        println!("{p:>4} {}  rel. residual {worst:.1e}", cells.join(" "));
        rows.push(LevelRow { p, computed, closed_form, max_relative_residual: worst });
    }

    let results = DemoResults {
        weights: w,
        z: pair(t),
        pmax,
        oracle: mat_rows(&oracle.matrix),
        oracle_tail_estimate: oracle.tail_estimate,
        jet_module: mat_rows(&jet),
        closed_form: mat_rows(&closed),
        max_deviation_oracle: dev_oracle,
        max_deviation_closed_form: dev_closed,
        levels: rows,
    };
    emit(c, "quotient-demo", &config, &results)?;
    Ok(Outcome::Ok)
}
