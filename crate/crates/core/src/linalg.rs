//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::C64;

pub type Mat = DMatrix<C64>;

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn condition_number(m: &Mat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `(m + m^*) / 2`.
pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn hermitian_defect(m: &Mat) -> f64 {
    frobenius(&(m - m.adjoint()))
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    SymmetricEigen::new(hermitian_part(m)).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Hermitian positive square root; rejects eigenvalues below `floor`.
pub fn hermitian_sqrt(m: &Mat, floor: f64) -> Result<Mat> {
    hermitian_function(m, floor, f64::sqrt)
}

pub fn hermitian_inv_sqrt(m: &Mat, floor: f64) -> Result<Mat> {
    hermitian_function(m, floor, |x| 1.0 / x.sqrt())
}

fn hermitian_function(m: &Mat, floor: f64, f: impl Fn(f64) -> f64) -> Result<Mat> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min >= floor) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let v = &eig.eigenvectors;
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|x| C64::new(f(x), 0.0)));
    Ok(v * d * v.adjoint())
}

/// Unitary polar factor `W V^*` of `m = W S V^*`.
pub fn polar_unitary(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Singular values (descending) and right singular vectors as columns, for any shape.
///
/// Short matrices are padded with zero rows so that all right singular vectors are present.
pub fn right_singular_system(a: &Mat) -> (Vec<f64>, Mat) {
    let (rows, cols) = a.shape();
    let padded = if rows < cols {
        let mut p = Mat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("svd v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = Mat::from_fn(cols, order.len(), |r, c| vt[(order[c], r)].conj());
    (sigma, v)
}

/// The complex scalar of unit modulus minimizing `|a - e^{i phi} b|`.
pub fn best_phase(a: &Mat, b: &Mat) -> C64 {
    let t: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    if t.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        t / t.norm()
    }
}

/// Serializes a complex number as `[re, im]`.
pub fn ser_c64<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&[z.re, z.im], s)
}

pub fn ser_c64_slice<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

/// Serializes a matrix as a list of rows of `[re, im]` pairs.
pub fn ser_mat<S: serde::Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(mat_rows(m))
}

pub fn mat_rows(m: &Mat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}
