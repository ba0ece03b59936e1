//! Acceptance battery. Runs without the libtest harness and prints one PASS/FAIL line per
//! criterion; the process fails if any criterion does.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    action_matrix, brute_force_order, c, jet_column as oracle_column, max_abs, nonvanishing_poly,
    phase_aligned_distance, random_c, random_unitary2, rank_two, Poly,
};
use jetmod_core::equivalence::default_samples;
use jetmod_core::geometry::{curvature_from_gram, ddbm_residual, gram_jet};
use jetmod_core::jet_module::{holomorphic_jet, jet_column};
use jetmod_core::quotient_oracle::{build_level, closed_forms, level_identities};
use jetmod_core::{
    builtin_bergman, chart_jet_transform, enumerate_jet_indices, jet_kernel, module_action_matrix, mthm_check,
    parse_kernel, pullback_affine, quotient_kernel_partial, rank1_equiv, rankr_equiv, recover_bergman_weights,
    restrict_to_z, theta, theta_inv, AffineChart, AmbientWeights, EquivOptions, Expr, Kernel, KernelSpec, Mat,
    MultiIndex, Verdict, C64,
};

const THETA_MAX_D: usize = 4;
const THETA_MAX_K: usize = 6;
const CLOSED_FORM_REL_TOL: f64 = 1e-9;
const CLOSED_FORM_MAX_P: usize = 12;
const QM_PMAX: usize = 60;
const QM_ABS_TOL: f64 = 1e-6;
const WEIGHT_REL_TOL: f64 = 1e-7;
const GAUGE_TOL: f64 = 1e-8;
const WITNESS_TOL: f64 = 1e-6;
const CURVATURE_IDENTITY_TOL: f64 = 1e-8;
const CURVATURE_CLOSED_REL_TOL: f64 = 1e-9;
const CURVATURE_FD_REL_TOL: f64 = 1e-4;
const JET_TOL: f64 = 1e-9;
const CHART_TOL: f64 = 1e-9;

type Check = Result<String, String>;

fn fail<T>(msg: impl Into<String>) -> Result<T, String> {
    Err(msg.into())
}

fn core<T>(r: jetmod_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn theta_order() -> Check {
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for d in 1..=THETA_MAX_D {
        for k in 1..=THETA_MAX_K {
            let want = brute_force_order(d, k as u32 - 1);
            let table = core(enumerate_jet_indices(d, k))?;
            if table.ordered_indices.len() != want.len() {
                mismatches += 1;
            }
            for (pos, a) in want.iter().enumerate() {
                checked += 1;
                let alpha = MultiIndex::from_slice(a);
                if theta(&alpha) != pos || theta_inv(pos, d) != alpha {
                    mismatches += 1;
                }
                if table.ordered_indices.get(pos) != Some(&alpha) {
                    mismatches += 1;
                }
            }
        }
    }
    if mismatches == 0 {
        Ok(format!("{checked} indices, 0 mismatches"))
    } else {
        fail(format!("{mismatches} mismatches over {checked} indices"))
    }
}

/// `(x)_n / n!`, zero for negative `n`.
fn series_coeff(x: f64, n: i64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    (0..n).fold(1.0, |acc, i| acc * (x + i as f64) / (i + 1) as f64)
}

/// The six quantities from explicit monomial coefficient vectors at level `p`.
fn direct_level(p: u32, w: [f64; 3]) -> [f64; 6] {
    let mut cw = Vec::new();
    let mut exps = Vec::new();
    for i in 0..=p {
        for j in 0..=(p - i) {
            let e = [i, j, p - i - j];
            cw.push((0..3).map(|t| series_coeff(w[t], e[t] as i64)).product::<f64>());
            exps.push(e);
        }
    }
    let inner = |u: &[f64], v: &[f64]| u.iter().zip(v).zip(&cw).map(|((a, b), c)| a * b / c).sum::<f64>();
    let comb = |a: f64, u: &[f64], b: f64, v: &[f64]| u.iter().zip(v).map(|(x, y)| a * x + b * y).collect::<Vec<_>>();
    let g1 = cw.clone();
    let g2: Vec<f64> = exps.iter().zip(&cw).map(|(e, c)| e[1] as f64 * c).collect();
    let g3: Vec<f64> = exps.iter().zip(&cw).map(|(e, c)| e[2] as f64 * c).collect();
    let g1sq = inner(&g1, &g1);
    let f2 = comb(inner(&g1, &g2), &g1, -g1sq, &g2);
    let f3t = comb(inner(&g1, &g3), &g1, -g1sq, &g3);
    let f2sq = inner(&f2, &f2);
    let f3 = comb(inner(&f3t, &f2), &f2, -f2sq, &f3t);
    [g1sq, f2sq, inner(&f3, &f3), inner(&g1, &g2), inner(&g1, &g3), inner(&g2, &g3)]
}

fn retyped_closed_forms(p: usize, w: [f64; 3]) -> [f64; 6] {
    let [a, b, g] = w;
    let l = a + b + g;
    let p = p as i64;
    let s = series_coeff;
    [
        s(l, p),
        b * (a + g) / l * s(l, p).powi(2) * s(l + 2.0, p - 1),
        a * b * b * g * (a + g) / (l * l) * s(l, p).powi(6) * s(l + 2.0, p - 1).powi(3),
        b * s(l + 1.0, p - 1),
        g * s(l + 1.0, p - 1),
        b * g * s(l + 2.0, p - 2),
    ]
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        (got - want).abs() / want.abs()
    }
}

fn closed_forms_hold() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let w = [rng.random_range(0.5..4.0), rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)];
        let amb = core(AmbientWeights::new(w, CLOSED_FORM_MAX_P))?;
        for p in 0..=CLOSED_FORM_MAX_P {
            let want = retyped_closed_forms(p, w);
            let direct = direct_level(p as u32, w);
            let lib = core(build_level(p, &amb).and_then(|l| level_identities(&l)))?.as_array();
            let lib_closed = closed_forms(p, w).as_array();
            for i in 0..6 {
                worst = worst.max(rel_err(direct[i], want[i]));
                worst = worst.max(rel_err(lib[i], want[i]));
                worst = worst.max(rel_err(lib_closed[i], want[i]));
            }
        }
    }
    if worst <= CLOSED_FORM_REL_TOL {
        Ok(format!("worst relative error {worst:.2e}"))
    } else {
        fail(format!("worst relative error {worst:.2e} exceeds {CLOSED_FORM_REL_TOL:.0e}"))
    }
}

fn quotient_kernel_matches_jet_kernel() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let chart = core(AffineChart::diagonal(3))?;
    let transform = core(chart_jet_transform(&chart, 2))?;
    let mut worst: f64 = 0.0;
    let mut worst_23: f64 = 0.0;
    for i in 0..5 {
        let w = if i == 0 {
            [1.0, 1.0, 1.0]
        } else {
            [rng.random_range(0.5..4.0), rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)]
        };
        let t = C64::from_polar(0.5 * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let oracle = core(quotient_kernel_partial(t, w, QM_PMAX))?.matrix;
        let pulled = core(pullback_affine(&core(builtin_bergman(&w))?, &chart))?;
        let u = [c(0.0), c(0.0), t];
        let jk = core(jet_kernel(&pulled, 2, 2, &u, &u).and_then(restrict_to_z))?.jet_kernel;
        let jet = core(transform.transform_kernel(&jk))?;
        worst = worst.max(max_abs(&(&oracle - &jet)));
        let x = t.norm_sqr();
        let want_23 = w[0] * w[1] * x * (1.0 - x).powf(-(w[0] + w[1] + w[2] + 2.0));
        worst_23 = worst_23.max((oracle[(1, 2)] - want_23).norm()).max((jet[(1, 2)] - want_23).norm());
    }
    if worst <= QM_ABS_TOL && worst_23 <= QM_ABS_TOL {
        Ok(format!("max entry deviation {worst:.2e}, entry (2,3) deviation {worst_23:.2e}"))
    } else {
        fail(format!("max entry deviation {worst:.2e}, entry (2,3) deviation {worst_23:.2e}"))
    }
}

fn weights_recovered() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let chart = core(AffineChart::diagonal(3))?;
    let samples = default_samples(3, 2, 5, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let w = [rng.random_range(0.5..5.0), rng.random_range(0.5..5.0), rng.random_range(0.5..5.0)];
        let rec = core(recover_bergman_weights(&w, &samples))?;
        let err = rec.recovered.iter().zip(&w).map(|(r, x)| (r - x).abs() / x).fold(0.0, f64::max);
        worst = worst.max(err);
        let permuted = [w[1], w[2], w[0]];
        let a = core(builtin_bergman(&w))?;
        let b = core(builtin_bergman(&permuted))?;
        let rep = core(rank1_equiv(&a, &b, &chart, 2, &samples, &EquivOptions::default()))?;
        if rep.verdict != Verdict::NotEquivalent {
            return fail(format!("{w:?} vs {permuted:?} judged {}", rep.verdict));
        }
    }
    if worst <= WEIGHT_REL_TOL {
        Ok(format!("worst relative error {worst:.2e}; all permuted pairs not-equivalent"))
    } else {
        fail(format!("worst relative error {worst:.2e} exceeds {WEIGHT_REL_TOL:.0e}"))
    }
}

fn gauge_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let (spec, chart) = if i % 2 == 0 {
            let w = [rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)];
            (core(builtin_bergman(&w))?, core(AffineChart::identity(2, 1))?)
        } else {
            let w = [rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)];
            (core(builtin_bergman(&w))?, core(AffineChart::diagonal(3))?)
        };
        let psi = nonvanishing_poly(&mut rng, spec.m);
        let rescaled = core(spec.rescale(&psi))?;
        let samples = default_samples(spec.m, chart.d(), 4, i);
        let rep = core(rank1_equiv(&spec, &rescaled, &chart, 2, &samples, &EquivOptions::default()))?;
        worst = worst.max(rep.max_residual);
        if rep.verdict != Verdict::Equivalent || rep.max_residual > GAUGE_TOL {
            return fail(format!("case {i}: {} with residual {:.2e}", rep.verdict, rep.max_residual));
        }
    }
    Ok(format!("20 rescalings equivalent, worst residual {worst:.2e}"))
}

fn random_rank_two(rng: &mut impl Rng) -> KernelSpec {
    let w = [rng.random_range(1.0..3.0), rng.random_range(1.0..3.0), rng.random_range(1.0..3.0), rng.random_range(1.0..3.0)];
    let s = C64::from_polar(rng.random_range(0.1..0.4), rng.random_range(0.0..std::f64::consts::TAU));
    rank_two(w, s)
}

fn witness_recovered() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let chart = core(AffineChart::identity(2, 1))?;
    let samples = default_samples(2, 1, 3, 6);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let a = random_rank_two(&mut rng);
        let u = random_unitary2(&mut rng);
        let b = core(a.conjugate_by(&u))?;
        let rep = core(rankr_equiv(&a, &b, &chart, 2, &samples, &EquivOptions::default()))?;
        let Some(w) = &rep.witness else {
            return fail(format!("case {i}: no witness ({})", rep.verdict));
        };
        let dist = phase_aligned_distance(&w.d, &u);
        worst = worst.max(dist);
        if rep.verdict != Verdict::Equivalent || dist > WITNESS_TOL {
            return fail(format!("case {i}: {} with |D - e^(i phi) U| = {dist:.2e}", rep.verdict));
        }
    }
    Ok(format!("10 conjugations equivalent, worst witness distance {worst:.2e}"))
}

fn curvature_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut kernels: Vec<KernelSpec> = Vec::new();
    for w in [vec![2.0], vec![0.5], vec![1.5, 2.5], vec![1.0, 2.0, 3.0]] {
        kernels.push(core(builtin_bergman(&w))?);
    }
    kernels.push(rank_two([1.0, 2.0, 2.5, 1.5], C64::new(0.2, 0.1)));
    kernels.push(core(parse_kernel("m = 2\nr = 1\nK[1][1] = exp(z1*wb1 + 0.5*z2*wb2) * (1 - z1*wb1)^-1\n").map_err(Into::into))?);
    let (mut worst_id, mut worst_sa) = (0.0f64, 0.0f64);
    for k in &kernels {
        for _ in 0..20 {
            let z: Vec<C64> = (0..k.m).map(|_| C64::from_polar(0.5 * rng.random::<f64>().sqrt(), rng.random_range(0.0..6.3))).collect();
            let g = core(gram_jet(k, &z, 2))?;
            let curv = core(curvature_from_gram(&g))?;
            worst_id = worst_id.max(core(ddbm_residual(&g, &curv))?);
            worst_sa = worst_sa.max(curv.self_adjointness_defect());
        }
    }
    let (mut worst_closed, mut worst_fd) = (0.0f64, 0.0f64);
    for lambda in [0.5, 1.0, 2.0, 3.7] {
        let k = core(builtin_bergman(&[lambda]))?;
        for _ in 0..5 {
            let z = C64::from_polar(0.6 * rng.random::<f64>().sqrt(), rng.random_range(0.0..6.3));
            let got = core(jetmod_core::geometry::curvature(&k, &[z]))?.entry(0, 0)[(0, 0)];
            let want = lambda * (1.0 - z.norm_sqr()).powi(-2);
            worst_closed = worst_closed.max((got - want).norm() / want);
            // Rank one: K = (1/4) Laplacian of log H, with H evaluated through the kernel itself.
            let log_h = |p: C64| -> Result<f64, String> { Ok(core(k.value(&[p], &[p]))?[(0, 0)].re.ln()) };
            let h = 1e-3;
            let lap = (log_h(z + h)? + log_h(z - h)? + log_h(z + C64::new(0.0, h))? + log_h(z - C64::new(0.0, h))?
                - 4.0 * log_h(z)?)
                / (h * h);
            worst_fd = worst_fd.max((lap / 4.0 - got.re).abs() / got.re);
        }
    }
    let detail = format!(
        "identity residual {worst_id:.2e}, self-adjointness {worst_sa:.2e}, closed form {worst_closed:.2e}, finite difference {worst_fd:.2e}"
    );
    if worst_id <= CURVATURE_IDENTITY_TOL
        && worst_sa <= CURVATURE_IDENTITY_TOL
        && worst_closed <= CURVATURE_CLOSED_REL_TOL
        && worst_fd <= CURVATURE_FD_REL_TOL
    {
        Ok(detail)
    } else {
        fail(detail)
    }
}

fn rel_vec(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(1.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn rel_mat(a: &Mat, b: &Mat) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1.0)
}

fn jet_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let d = 1 + i % 3;
        let k = 1 + (i / 3) % 3;
        let m = d + 1;
        let z0: Vec<C64> = (0..m).map(|_| random_c(&mut rng, 0.5)).collect();
        let f = Poly::random(&mut rng, m, 3, 4);
        let g = Poly::random(&mut rng, m, 3, 4);
        let fg = f.mul(&g);
        let jf = core(module_action_matrix(&f.to_expr(), &z0, d, k))?.matrix;
        let jg = core(module_action_matrix(&g.to_expr(), &z0, d, k))?.matrix;
        let jfg = core(module_action_matrix(&fg.to_expr(), &z0, d, k))?.matrix;
        worst = worst.max(rel_mat(&jf, &action_matrix(&f, &z0, d, k)));
        worst = worst.max(rel_mat(&jfg, &(&jf * &jg)));
        let col = |p: &Poly| -> Result<Vec<C64>, String> {
            core(holomorphic_jet(&p.to_expr(), &z0, k - 1).and_then(|s| jet_column(&s, d, k)))
        };
        let h = col(&g)?;
        worst = worst.max(rel_vec(&h, &oracle_column(&g, &z0, d, k)));
        let leib: Vec<C64> = (&jf * Mat::from_column_slice(h.len(), 1, &h)).iter().copied().collect();
        worst = worst.max(rel_vec(&col(&fg)?, &leib));
    }
    if worst > JET_TOL {
        return fail(format!("worst relative deviation {worst:.2e}"));
    }
    // Monomial structure on the submanifold, exhaustively.
    let mut cases = 0;
    for d in 1..=3 {
        for k in 1..=3 {
            let idx = brute_force_order(d, k as u32 - 1);
            let q = [vec![c(0.0); d], vec![C64::new(0.3, -0.2)]].concat();
            for (l, gamma) in idx.iter().enumerate() {
                let f = Poly::monomial(d + 1, gamma);
                let jf = core(module_action_matrix(&f.to_expr(), &q, d, k))?.matrix;
                for (i, alpha) in idx.iter().enumerate() {
                    let below: Option<Vec<u32>> =
                        alpha.iter().zip(gamma).map(|(a, g)| a.checked_sub(*g)).collect();
                    for j in 0..idx.len() {
                        let v = jf[(i, j)];
                        if v.norm() > 1e-12 && (i < j || i - j < l) {
                            return fail(format!("(P1) d={d} k={k} gamma={gamma:?}: entry ({i},{j}) off the allowed subdiagonals"));
                        }
                        let expected = below.as_ref().and_then(|b| idx.iter().position(|x| x == b));
                        if v.norm() > 1e-12 && expected != Some(j) {
                            return fail(format!("(P2) d={d} k={k} gamma={gamma:?}: stray entry ({i},{j})"));
                        }
                    }
                    if let Some(b) = &below {
                        let j = idx.iter().position(|x| x == b).unwrap();
                        let want: f64 = alpha
                            .iter()
                            .zip(gamma)
                            .map(|(a, g)| (1..=*a).product::<u32>() as f64 / (1..=(a - g)).product::<u32>() as f64)
                            .product();
                        if (jf[(i, j)] - want).norm() > 1e-12 * want {
                            return fail(format!("(P2) d={d} k={k} gamma={gamma:?}: entry ({i},{j}) is {} not {want}", jf[(i, j)]));
                        }
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("50 pairs, worst relative deviation {worst:.2e}; (P1)/(P2) on {cases} rows"))
}

fn random_admissible_chart(rng: &mut impl Rng, m: usize, d: usize) -> Result<AffineChart, String> {
    let mut l = Mat::zeros(m, m);
    for s in 0..m {
        for j in 0..m {
            if s >= d && j < d {
                continue;
            }
            l[(s, j)] = random_c(rng, 0.4) + if s == j { c(1.0) } else { c(0.0) };
        }
    }
    let b: Vec<C64> = (0..m).map(|_| random_c(rng, 0.2)).collect();
    core(AffineChart::new(l, b, d))
}

/// `p(phi^{-1}(u))` as an expression in the chart coordinates.
fn in_chart(p: &Poly, chart: &AffineChart) -> Expr {
    let inv = chart.inverse_linear();
    let shift = chart.inverse_offset();
    let m = chart.m();
    let z = |i: usize| {
        (0..m).fold(Expr::Num(shift[i]), |acc, j| Expr::add(acc, Expr::mul(Expr::Num(inv[(i, j)]), Expr::Z(j))))
    };
    p.to_expr().substitute(&z, &Expr::Wb)
}

fn chart_transform() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let m = 2 + i % 2;
        let d = 1 + (i / 2) % (m - 1).max(1);
        let k = 1 + i % 4;
        let chart = random_admissible_chart(&mut rng, m, d)?;
        let transform = core(chart_jet_transform(&chart, k))?;
        let z0: Vec<C64> = (0..m).map(|_| random_c(&mut rng, 0.3)).collect();
        let u0 = chart.apply(&z0);
        let p = Poly::random(&mut rng, m, 4, 5);
        let col_u = core(holomorphic_jet(&in_chart(&p, &chart), &u0, k - 1).and_then(|s| jet_column(&s, d, k)))?;
        let moved: Vec<C64> = (&transform.matrix * Mat::from_column_slice(col_u.len(), 1, &col_u)).iter().copied().collect();
        worst = worst.max(rel_vec(&moved, &oracle_column(&p, &z0, d, k)));
        if k <= 3 {
            let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..2.5)).collect();
            let spec = core(builtin_bergman(&w))?;
            let pulled = core(pullback_affine(&spec, &chart))?;
            let chart_jk = core(jet_kernel(&pulled, d, k, &u0, &u0))?;
            let orig = core(jet_kernel(&spec, d, k, &z0, &z0))?.matrix;
            worst = worst.max(rel_mat(&core(transform.transform_kernel(&chart_jk))?, &orig));
        }
    }
    if worst <= CHART_TOL {
        Ok(format!("20 polynomials and charts, worst relative deviation {worst:.2e}"))
    } else {
        fail(format!("worst relative deviation {worst:.2e}"))
    }
}

fn criterion_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let id2 = core(AffineChart::identity(2, 1))?;
    let diag3 = core(AffineChart::diagonal(3))?;
    let berg = |w: &[f64]| core(builtin_bergman(w));
    let a2 = rank_two([1.0, 2.0, 2.5, 1.5], C64::new(0.2, 0.1));
    let u = random_unitary2(&mut rng);
    let psi2 = nonvanishing_poly(&mut rng, 2);
    let psi3 = nonvanishing_poly(&mut rng, 3);
    use Verdict::{Equivalent as E, NotEquivalent as N};
    let battery: Vec<(&str, KernelSpec, KernelSpec, &AffineChart, Verdict)> = vec![
        ("bergman self", berg(&[1.0, 2.0])?, berg(&[1.0, 2.0])?, &id2, E),
        ("bergman swapped", berg(&[1.0, 2.0])?, berg(&[2.0, 1.0])?, &id2, N),
        ("diagonal permuted", berg(&[1.0, 2.0, 3.0])?, berg(&[1.0, 3.0, 2.0])?, &diag3, N),
        ("diagonal gauge", berg(&[1.0, 2.0, 3.0])?, core(berg(&[1.0, 2.0, 3.0])?.rescale(&psi3))?, &diag3, E),
        ("bidisc gauge", berg(&[1.5, 2.5])?, core(berg(&[1.5, 2.5])?.rescale(&psi2))?, &id2, E),
        ("rank two unitary", a2.clone(), core(a2.conjugate_by(&u))?, &id2, E),
        ("rank two unitary and gauge", a2.clone(), core(core(a2.conjugate_by(&u))?.rescale(&psi2))?, &id2, E),
        ("rank two coupling", a2.clone(), rank_two([1.0, 2.0, 2.5, 1.5], C64::new(0.3, 0.0)), &id2, N),
        ("rank two weights", a2.clone(), rank_two([1.0, 2.0, 3.0, 1.5], C64::new(0.2, 0.1)), &id2, N),
        ("diagonal other weights", berg(&[1.0, 2.0, 3.0])?, berg(&[2.0, 1.0, 3.0])?, &diag3, N),
    ];
    let opts = EquivOptions::default();
    let mut agree = 0;
    for (name, a, b, chart, want) in &battery {
        let samples = default_samples(a.m, chart.d(), 3, 10);
        let rr = core(rankr_equiv(a, b, chart, 2, &samples, &opts))?;
        let mt = core(mthm_check(a, b, chart, 2, &samples, &opts))?;
        if rr.verdict != mt.verdict || rr.verdict != *want {
            return fail(format!("{name}: rankr {} / mthm {}, expected {want}", rr.verdict, mt.verdict));
        }
        agree += 1;
    }
    Ok(format!("{agree}/10 pairs agree with each other and with the expected verdict"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("theta order", theta_order),
        ("quotient basis closed forms", closed_forms_hold),
        ("quotient kernel equals jet kernel", quotient_kernel_matches_jet_kernel),
        ("weight recovery", weights_recovered),
        ("gauge invariance", gauge_invariance),
        ("witness recovery", witness_recovered),
        ("curvature identities", curvature_identities),
        ("jet algebra", jet_algebra),
        ("chart transform", chart_transform),
        ("criterion consistency", criterion_consistency),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", n + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
