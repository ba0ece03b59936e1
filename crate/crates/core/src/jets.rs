//! Truncated multivariate complex power series and matrices of them.
//!
//! A series in `n` variables truncated at order `T` is stored densely, indexed by the
//! graded-colex rank of the exponent. Every derivative used elsewhere in the crate is
//! read off as `alpha! * coefficient(alpha)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::multiindex::{theta, MultiIndex};
use crate::C64;

const MAX_COEFFS: usize = 4_000_000;
/// Constant terms with smaller modulus are treated as zero by `recip`, `log` and `pow_real`.
pub const NEAR_ZERO: f64 = 1e-10;

/// Index layout shared by all series with the same variable count and truncation order.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    degrees: Vec<u32>,
    level_start: Vec<usize>,
    mul_table: OnceLock<Vec<(u32, u32, u32)>>,
}

impl JetSpace {
    pub fn get(nvars: usize, order: usize) -> Result<Arc<JetSpace>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        if nvars == 0 {
            return Err(Error::Invalid("a jet space needs at least one variable".into()));
        }
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().unwrap().get(&(nvars, order)) {
            return Ok(s.clone());
        }
        let len = crate::multiindex::binomial((nvars + order) as u64, order as u64)
            .map(|c| c as usize)
            .filter(|&c| c <= MAX_COEFFS)
            .ok_or_else(|| {
                Error::Size(format!("jet space with {nvars} variables at order {order} is too large"))
            })?;
        let mut indices = Vec::with_capacity(len);
        let mut level_start = Vec::with_capacity(order + 2);
        for t in 0..=order as u32 {
            level_start.push(indices.len());
            indices.extend(crate::multiindex::colex_level(nvars, t).iter().cloned());
        }
        level_start.push(indices.len());
        let degrees = indices.iter().map(MultiIndex::degree).collect();
        let space = Arc::new(JetSpace {
            nvars,
            order,
            indices,
            degrees,
            level_start,
            mul_table: OnceLock::new(),
        });
        cache.lock().unwrap().insert((nvars, order), space.clone());
        Ok(space)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn rank(&self, alpha: &MultiIndex) -> Option<usize> {
        if alpha.dim() != self.nvars || alpha.degree() as usize > self.order {
            return None;
        }
        Some(theta(alpha))
    }

    fn mul_table(&self) -> &[(u32, u32, u32)] {
        self.mul_table.get_or_init(|| {
            let mut table = Vec::new();
            for i in 0..self.len() {
                let di = self.degrees[i] as usize;
                let end = self.level_start[self.order - di + 1];
                for j in 0..end {
                    let k = theta(&self.indices[i].add(&self.indices[j]));
                    table.push((i as u32, j as u32, k as u32));
                }
            }
            table
        })
    }

    fn same(&self, other: &JetSpace) -> bool {
        self.nvars == other.nvars && self.order == other.order
    }
}

#[derive(Debug, Clone)]
pub struct JetSeries {
    space: Arc<JetSpace>,
    coeffs: Vec<C64>,
}

fn check_same(a: &JetSpace, b: &JetSpace) -> Result<()> {
    if a.same(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "series with ({} vars, order {}) vs ({} vars, order {})",
            a.nvars, a.order, b.nvars, b.order
        )))
    }
}

impl JetSeries {
    pub fn zero(space: &Arc<JetSpace>) -> Self {
        JetSeries { space: space.clone(), coeffs: vec![C64::new(0.0, 0.0); space.len()] }
    }

    pub fn constant(space: &Arc<JetSpace>, c: C64) -> Self {
        let mut s = Self::zero(space);
        s.coeffs[0] = c;
        s
    }

    /// The series `c0 + x_var`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, c0: C64) -> Result<Self> {
        if var >= space.nvars {
            return Err(Error::DimensionMismatch(format!(
                "variable {var} out of range for {} variables",
                space.nvars
            )));
        }
        let mut s = Self::constant(space, c0);
        if space.order >= 1 {
            s.coeffs[1 + var] = C64::new(1.0, 0.0);
        }
        Ok(s)
    }

    /// Build from `(exponent, coefficient)` pairs; terms above the truncation order are dropped.
    pub fn from_terms(space: &Arc<JetSpace>, terms: &[(MultiIndex, C64)]) -> Result<Self> {
        let mut s = Self::zero(space);
        for (a, c) in terms {
            if a.dim() != space.nvars {
                return Err(Error::DimensionMismatch("term exponent length".into()));
            }
            if let Some(r) = space.rank(a) {
                s.coeffs[r] += c;
            }
        }
        Ok(s)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn constant_term(&self) -> C64 {
        self.coeffs[0]
    }

    /// Coefficient of `x^alpha`; zero above the truncation order.
    pub fn coefficient(&self, alpha: &MultiIndex) -> C64 {
        self.space.rank(alpha).map_or(C64::new(0.0, 0.0), |r| self.coeffs[r])
    }

    pub fn extract_derivative(&self, alpha: &MultiIndex) -> Result<C64> {
        if alpha.dim() != self.nvars() {
            return Err(Error::DimensionMismatch("derivative index length".into()));
        }
        let deg = alpha.degree() as usize;
        if deg > self.order() {
            return Err(Error::Truncation { requested: deg, available: self.order() });
        }
        Ok(self.coefficient(alpha) * alpha.factorial())
    }

    pub fn add(&self, other: &JetSeries) -> Result<JetSeries> {
        check_same(&self.space, &other.space)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(JetSeries { space: self.space.clone(), coeffs })
    }

    pub fn sub(&self, other: &JetSeries) -> Result<JetSeries> {
        check_same(&self.space, &other.space)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(JetSeries { space: self.space.clone(), coeffs })
    }

    pub fn neg(&self) -> JetSeries {
        self.scale(C64::new(-1.0, 0.0))
    }

    pub fn scale(&self, c: C64) -> JetSeries {
        JetSeries { space: self.space.clone(), coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    pub fn add_constant(&self, c: C64) -> JetSeries {
        let mut s = self.clone();
        s.coeffs[0] += c;
        s
    }

    fn add_assign_unchecked(&mut self, other: &JetSeries) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &JetSeries) -> Result<JetSeries> {
        check_same(&self.space, &other.space)?;
        let mut out = vec![C64::new(0.0, 0.0); self.space.len()];
        let zero = C64::new(0.0, 0.0);
        let mut last_i = u32::MAX;
        let mut skip = false;
        for &(i, j, k) in self.space.mul_table() {
            if i != last_i {
                last_i = i;
                skip = self.coeffs[i as usize] == zero;
            }
            if skip {
                continue;
            }
            out[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Ok(JetSeries { space: self.space.clone(), coeffs: out })
    }

    /// The series minus its constant term, which is nilpotent of index `T+1`.
    fn nilpotent_part(&self) -> JetSeries {
        let mut s = self.clone();
        s.coeffs[0] = C64::new(0.0, 0.0);
        s
    }

    /// `sum_n c_n x^n` for nilpotent `x` by Horner's rule, `n <= T`.
    fn horner(x: &JetSeries, c: &[C64]) -> Result<JetSeries> {
        let mut acc = JetSeries::constant(&x.space, c[c.len() - 1]);
        for &cn in c[..c.len() - 1].iter().rev() {
            acc = x.mul(&acc)?.add_constant(cn);
        }
        Ok(acc)
    }

    fn check_nonzero_constant(&self) -> Result<C64> {
        let a0 = self.constant_term();
        if !(a0.norm() >= NEAR_ZERO) {
            return Err(Error::SingularConstant { modulus: a0.norm() });
        }
        Ok(a0)
    }

    fn check_branch(&self) -> Result<C64> {
        let a0 = self.check_nonzero_constant()?;
        if a0.re < 0.0 && a0.im.abs() <= 1e-14 * a0.norm() {
            return Err(Error::Branch(format!(
                "constant term {a0} lies on the negative real axis"
            )));
        }
        Ok(a0)
    }

    pub fn recip(&self) -> Result<JetSeries> {
        let a0 = self.check_nonzero_constant()?;
        let inv = a0.inv();
        let y = self.nilpotent_part().scale(-inv);
        let c = vec![C64::new(1.0, 0.0); self.order() + 1];
        Ok(Self::horner(&y, &c)?.scale(inv))
    }

    pub fn div(&self, other: &JetSeries) -> Result<JetSeries> {
        self.mul(&other.recip()?)
    }

    /// Principal-branch logarithm.
    pub fn log(&self) -> Result<JetSeries> {
        let a0 = self.check_branch()?;
        let y = self.nilpotent_part().scale(a0.inv());
        let t = self.order();
        let mut c = vec![C64::new(0.0, 0.0); t + 1];
        for (n, cn) in c.iter_mut().enumerate().skip(1) {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            *cn = C64::new(sign / n as f64, 0.0);
        }
        Ok(Self::horner(&y, &c)?.add_constant(a0.ln()))
    }

    pub fn exp(&self) -> Result<JetSeries> {
        let a0 = self.constant_term();
        let x = self.nilpotent_part();
        let t = self.order();
        let mut c = vec![C64::new(1.0, 0.0); t + 1];
        for n in 1..=t {
            c[n] = c[n - 1] / n as f64;
        }
        Ok(Self::horner(&x, &c)?.scale(a0.exp()))
    }

    pub fn powi(&self, e: i64) -> Result<JetSeries> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let mut n = e.unsigned_abs();
        let mut acc = JetSeries::constant(&self.space, C64::new(1.0, 0.0));
        let mut sq = base;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&sq)?;
            }
            n >>= 1;
            if n > 0 {
                sq = sq.mul(&sq)?;
            }
        }
        Ok(acc)
    }

    /// `a^e` on the principal branch; small integer exponents use repeated multiplication.
    pub fn pow_real(&self, e: f64) -> Result<JetSeries> {
        if e.fract() == 0.0 && e.abs() <= 64.0 {
            self.check_nonzero_constant()?;
            return self.powi(e as i64);
        }
        self.check_branch()?;
        self.log()?.scale(C64::new(e, 0.0)).exp()
    }

    /// Partial derivative in `var`; the result is truncated one order lower.
    pub fn differentiate(&self, var: usize) -> Result<JetSeries> {
        if var >= self.nvars() {
            return Err(Error::DimensionMismatch(format!("variable {var} out of range")));
        }
        if self.order() == 0 {
            return Err(Error::Truncation { requested: 1, available: 0 });
        }
        let target = JetSpace::get(self.nvars(), self.order() - 1)?;
        let mut out = JetSeries::zero(&target);
        for (r, a) in target.indices().iter().enumerate() {
            let mut e = a.entries().to_vec();
            e[var] += 1;
            let up = MultiIndex::from_slice(&e);
            out.coeffs[r] = self.coeffs[theta(&up)] * f64::from(e[var]);
        }
        Ok(out)
    }

    pub fn truncate(&self, order: usize) -> Result<JetSeries> {
        if order > self.order() {
            return Err(Error::Truncation { requested: order, available: self.order() });
        }
        let target = JetSpace::get(self.nvars(), order)?;
        Ok(JetSeries { coeffs: self.coeffs[..target.len()].to_vec(), space: target })
    }

    /// Set the displacement of every variable with `keep[v] == false` to zero.
    pub fn restrict(&self, keep: &[bool]) -> Result<JetSeries> {
        if keep.len() != self.nvars() {
            return Err(Error::DimensionMismatch("restriction mask length".into()));
        }
        let mut out = self.clone();
        for (r, a) in self.space.indices().iter().enumerate() {
            if a.entries().iter().zip(keep).any(|(&e, &k)| e > 0 && !k) {
                out.coeffs[r] = C64::new(0.0, 0.0);
            }
        }
        Ok(out)
    }

    /// Compose with `x_i = c_i + sum_j L_ij y_j`, truncating the result at the same order.
    ///
    /// Exact for polynomials of degree at most `T`; for a genuine truncated series a nonzero
    /// shift `c` only sees the stored terms.
    pub fn affine_substitute(&self, map: &AffineVarMap) -> Result<JetSeries> {
        if map.constants.len() != self.nvars() {
            return Err(Error::DimensionMismatch(format!(
                "map has {} source variables, series has {}",
                map.constants.len(),
                self.nvars()
            )));
        }
        let target = JetSpace::get(map.new_vars, self.order())?;
        let images: Vec<JetSeries> = (0..self.nvars())
            .map(|i| {
                let mut s = JetSeries::constant(&target, map.constants[i]);
                if target.order >= 1 {
                    for j in 0..map.new_vars {
                        s.coeffs[1 + j] = map.linear[i][j];
                    }
                }
                s
            })
            .collect();
        // powers[i][e] = images[i]^e
        let mut powers: Vec<Vec<JetSeries>> = Vec::with_capacity(self.nvars());
        for img in &images {
            let mut row = vec![JetSeries::constant(&target, C64::new(1.0, 0.0))];
            for e in 1..=self.order() {
                let next = row[e - 1].mul(img)?;
                row.push(next);
            }
            powers.push(row);
        }
        let mut out = JetSeries::zero(&target);
        for (r, a) in self.space.indices().iter().enumerate() {
            let c = self.coeffs[r];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut term = JetSeries::constant(&target, c);
            for (i, &e) in a.entries().iter().enumerate() {
                if e > 0 {
                    term = term.mul(&powers[i][e as usize])?;
                }
            }
            out.add_assign_unchecked(&term);
        }
        Ok(out)
    }

    /// Evaluate the stored polynomial at a displacement.
    pub fn evaluate(&self, x: &[C64]) -> Result<C64> {
        if x.len() != self.nvars() {
            return Err(Error::DimensionMismatch("evaluation point length".into()));
        }
        let mut acc = C64::new(0.0, 0.0);
        for (r, a) in self.space.indices().iter().enumerate() {
            let mut term = self.coeffs[r];
            for (xi, &e) in x.iter().zip(a.entries()) {
                term *= xi.powu(e);
            }
            acc += term;
        }
        Ok(acc)
    }

    pub fn max_abs_diff(&self, other: &JetSeries) -> Result<f64> {
        check_same(&self.space, &other.space)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// Affine change of variables `x_i = constants[i] + sum_j linear[i][j] * y_j`.
#[derive(Debug, Clone)]
pub struct AffineVarMap {
    pub new_vars: usize,
    pub constants: Vec<C64>,
    pub linear: Vec<Vec<C64>>,
}

impl AffineVarMap {
    pub fn new(new_vars: usize, constants: Vec<C64>, linear: Vec<Vec<C64>>) -> Result<Self> {
        if linear.len() != constants.len() || linear.iter().any(|row| row.len() != new_vars) {
            return Err(Error::DimensionMismatch("affine map shape".into()));
        }
        Ok(AffineVarMap { new_vars, constants, linear })
    }

    pub fn identity(n: usize) -> Self {
        let linear = (0..n)
            .map(|i| (0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        AffineVarMap { new_vars: n, constants: vec![C64::new(0.0, 0.0); n], linear }
    }
}

/// Dense matrix of series sharing one jet space, row-major.
#[derive(Debug, Clone)]
pub struct JetMatrix {
    rows: usize,
    cols: usize,
    space: Arc<JetSpace>,
    entries: Vec<JetSeries>,
}

impl JetMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<JetSeries>) -> Result<Self> {
        if entries.len() != rows * cols || entries.is_empty() {
            return Err(Error::DimensionMismatch("jet matrix entry count".into()));
        }
        let space = entries[0].space.clone();
        for e in &entries {
            check_same(&space, &e.space)?;
        }
        Ok(JetMatrix { rows, cols, space, entries })
    }

    pub fn zeros(rows: usize, cols: usize, space: &Arc<JetSpace>) -> Self {
        JetMatrix { rows, cols, space: space.clone(), entries: vec![JetSeries::zero(space); rows * cols] }
    }

    pub fn identity(n: usize, space: &Arc<JetSpace>) -> Self {
        let mut m = Self::zeros(n, n, space);
        for i in 0..n {
            m.entries[i * n + i] = JetSeries::constant(space, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_constant(c: &DMatrix<C64>, space: &Arc<JetSpace>) -> Self {
        let (rows, cols) = c.shape();
        let entries = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| JetSeries::constant(space, c[(i, j)]))
            .collect();
        JetMatrix { rows, cols, space: space.clone(), entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn get(&self, i: usize, j: usize) -> &JetSeries {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, s: JetSeries) -> Result<()> {
        check_same(&self.space, &s.space)?;
        self.entries[i * self.cols + j] = s;
        Ok(())
    }

    fn map_entries(&self, f: impl Fn(&JetSeries) -> Result<JetSeries>) -> Result<JetMatrix> {
        let entries = self.entries.iter().map(f).collect::<Result<Vec<_>>>()?;
        JetMatrix::new(self.rows, self.cols, entries)
    }

    fn check_shape(&self, other: &JetMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        check_same(&self.space, &other.space)
    }

    pub fn add(&self, other: &JetMatrix) -> Result<JetMatrix> {
        self.check_shape(other)?;
        let entries =
            self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        JetMatrix::new(self.rows, self.cols, entries)
    }

    pub fn sub(&self, other: &JetMatrix) -> Result<JetMatrix> {
        self.check_shape(other)?;
        let entries =
            self.entries.iter().zip(&other.entries).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        JetMatrix::new(self.rows, self.cols, entries)
    }

    pub fn scale(&self, c: C64) -> JetMatrix {
        self.map_entries(|e| Ok(e.scale(c))).expect("scaling preserves shape")
    }

    pub fn mul(&self, other: &JetMatrix) -> Result<JetMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        check_same(&self.space, &other.space)?;
        let mut out = JetMatrix::zeros(self.rows, other.cols, &self.space);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = JetSeries::zero(&self.space);
                for l in 0..self.cols {
                    acc.add_assign_unchecked(&self.get(i, l).mul(other.get(l, j))?);
                }
                out.entries[i * other.cols + j] = acc;
            }
        }
        Ok(out)
    }

    /// `self * c` for a constant matrix `c`.
    pub fn mul_constant_right(&self, c: &DMatrix<C64>) -> Result<JetMatrix> {
        self.mul(&JetMatrix::from_constant(c, &self.space))
    }

    pub fn mul_constant_left(&self, c: &DMatrix<C64>) -> Result<JetMatrix> {
        JetMatrix::from_constant(c, &self.space).mul(self)
    }

    pub fn commutator(&self, other: &JetMatrix) -> Result<JetMatrix> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn constant_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).constant_term())
    }

    pub fn coefficient_matrix(&self, alpha: &MultiIndex) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).coefficient(alpha))
    }

    /// `d^alpha` of every entry at the base point.
    pub fn derivative_matrix(&self, alpha: &MultiIndex) -> Result<DMatrix<C64>> {
        let deg = alpha.degree() as usize;
        if deg > self.order() {
            return Err(Error::Truncation { requested: deg, available: self.order() });
        }
        Ok(self.coefficient_matrix(alpha) * C64::new(alpha.factorial(), 0.0))
    }

    pub fn differentiate(&self, var: usize) -> Result<JetMatrix> {
        self.map_entries(|e| e.differentiate(var))
    }

    pub fn truncate(&self, order: usize) -> Result<JetMatrix> {
        self.map_entries(|e| e.truncate(order))
    }

    pub fn restrict(&self, keep: &[bool]) -> Result<JetMatrix> {
        self.map_entries(|e| e.restrict(keep))
    }

    pub fn max_abs_diff(&self, other: &JetMatrix) -> Result<f64> {
        self.check_shape(other)?;
        let mut m: f64 = 0.0;
        for (a, b) in self.entries.iter().zip(&other.entries) {
            m = m.max(a.max_abs_diff(b)?);
        }
        Ok(m)
    }

    /// Series inverse by Newton doubling `X <- X (2I - M X)`, seeded by the constant inverse.
    pub fn inverse(&self) -> Result<JetMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch("inverse of a non-square jet matrix".into()));
        }
        let m0 = self.constant_matrix();
        let condition = crate::linalg::condition_number(&m0);
        if !(condition.is_finite() && condition < 1e12) {
            return Err(Error::SingularMatrix { condition });
        }
        let inv0 = m0.try_inverse().ok_or(Error::SingularMatrix { condition })?;
        let n = self.rows;
        let two = JetMatrix::identity(n, &self.space).scale(C64::new(2.0, 0.0));
        let mut x = JetMatrix::from_constant(&inv0, &self.space);
        let mut correct = 0usize;
        while correct < self.order() {
            x = x.mul(&two.sub(&self.mul(&x)?)?)?;
            correct = 2 * correct + 1;
        }
        Ok(x)
    }
}
