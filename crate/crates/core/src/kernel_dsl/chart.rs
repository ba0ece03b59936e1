use crate::error::{Error, Result};
use crate::linalg::{condition_number, Mat};
use crate::C64;

/// Affine chart `u = L z + b` whose submanifold of interest is `{u_1 = ... = u_d = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineChart {
    linear: Mat,
    offset: Vec<C64>,
    inverse: Mat,
    d: usize,
}

impl AffineChart {
    pub fn new(linear: Mat, offset: Vec<C64>, d: usize) -> Result<Self> {
        let m = linear.nrows();
        if linear.ncols() != m || offset.len() != m || m == 0 {
            return Err(Error::DimensionMismatch(format!(
                "chart needs a square linear part and matching offset, got {}x{} and {}",
                linear.nrows(),
                linear.ncols(),
                offset.len()
            )));
        }
        if d > m {
            return Err(Error::Invalid(format!("codimension {d} exceeds dimension {m}")));
        }
        let condition = condition_number(&linear);
        if !(condition < 1e12) {
            return Err(Error::SingularMatrix { condition });
        }
        let inverse = linear.clone().try_inverse().ok_or(Error::SingularMatrix { condition })?;
        Ok(AffineChart { linear, offset, inverse, d })
    }

    pub fn identity(m: usize, d: usize) -> Result<Self> {
        Self::new(Mat::identity(m, m), vec![C64::new(0.0, 0.0); m], d)
    }

    /// `u_i = z_i - z_{i+1}` for `i < m`, `u_m = z_m`; flattens the diagonal of the polydisc.
    pub fn diagonal(m: usize) -> Result<Self> {
        let mut l = Mat::identity(m, m);
        for i in 0..m.saturating_sub(1) {
            l[(i, i + 1)] = C64::new(-1.0, 0.0);
        }
        Self::new(l, vec![C64::new(0.0, 0.0); m], m.saturating_sub(1))
    }

    pub fn m(&self) -> usize {
        self.linear.nrows()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn linear(&self) -> &Mat {
        &self.linear
    }

    pub fn offset(&self) -> &[C64] {
        &self.offset
    }

    pub fn inverse_linear(&self) -> &Mat {
        &self.inverse
    }

    /// `phi(z)`.
    pub fn apply(&self, z: &[C64]) -> Vec<C64> {
        (0..self.m())
            .map(|i| (0..self.m()).map(|j| self.linear[(i, j)] * z[j]).sum::<C64>() + self.offset[i])
            .collect()
    }

    /// `phi^{-1}(u)`.
    pub fn apply_inverse(&self, u: &[C64]) -> Vec<C64> {
        (0..self.m())
            .map(|i| (0..self.m()).map(|j| self.inverse[(i, j)] * (u[j] - self.offset[j])).sum())
            .collect()
    }

    /// Shift `c` with `phi^{-1}(u) = L^{-1} u + c`.
    pub fn inverse_offset(&self) -> Vec<C64> {
        self.apply_inverse(&vec![C64::new(0.0, 0.0); self.m()])
    }

    /// `J[(j, s)] = d phi_s / d z_j` for `j, s < d`.
    pub fn transverse_jacobian(&self) -> Mat {
        Mat::from_fn(self.d, self.d, |j, s| self.linear[(s, j)])
    }

    /// The first `d` original partials only involve the first `d` chart partials.
    pub fn is_admissible(&self) -> bool {
        let scale = crate::linalg::frobenius(&self.linear).max(1.0);
        (self.d..self.m()).all(|s| (0..self.d).all(|j| self.linear[(s, j)].norm() <= 1e-14 * scale))
    }

    /// Parse `identity(m)`, `identity(m, d)`, `diagonal(m)` or
    /// `affine(d; l11, l12, ... | l21, ... ; b1, b2, ...)` (offset optional).
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let t = text.trim();
        let (name, args) = t
            .split_once('(')
            .and_then(|(n, rest)| rest.trim_end().strip_suffix(')').map(|a| (n.trim(), a)))
            .ok_or_else(|| Error::Invalid(format!("malformed chart `{t}`")))?;
        let ints = |s: &str| -> Result<Vec<usize>> {
            s.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| Error::Invalid(format!("bad integer `{x}`"))))
                .collect()
        };
        let check_m = |mm: usize| -> Result<()> {
            if mm != m {
                return Err(Error::DimensionMismatch(format!("chart is for m = {mm}, kernel has m = {m}")));
            }
            Ok(())
        };
        match name {
            "identity" => {
                let v = ints(args)?;
                match v.as_slice() {
                    [mm] => {
                        check_m(*mm)?;
                        Self::identity(m, m.saturating_sub(1))
                    }
                    [mm, d] => {
                        check_m(*mm)?;
                        Self::identity(m, *d)
                    }
                    _ => Err(Error::Invalid("identity takes (m) or (m, d)".into())),
                }
            }
            "diagonal" => {
                let v = ints(args)?;
                match v.as_slice() {
                    [mm] => {
                        check_m(*mm)?;
                        Self::diagonal(m)
                    }
                    _ => Err(Error::Invalid("diagonal takes (m)".into())),
                }
            }
            "affine" => {
                let parts: Vec<&str> = args.split(';').collect();
                if parts.len() < 2 || parts.len() > 3 {
                    return Err(Error::Invalid("affine takes (d; rows; offset)".into()));
                }
                let d: usize = parts[0]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad codimension `{}`", parts[0].trim())))?;
                let rows: Vec<Vec<C64>> =
                    parts[1].split('|').map(parse_complex_list).collect::<Result<_>>()?;
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::DimensionMismatch(format!("affine linear part must be {m}x{m}")));
                }
                let offset = match parts.get(2) {
                    Some(p) => parse_complex_list(p)?,
                    None => vec![C64::new(0.0, 0.0); m],
                };
                let l = Mat::from_fn(m, m, |i, j| rows[i][j]);
                Self::new(l, offset, d)
            }
            _ => Err(Error::Invalid(format!("unknown chart `{name}`"))),
        }
    }
}

fn parse_complex_list(s: &str) -> Result<Vec<C64>> {
    s.split(',')
        .map(|x| crate::kernel_dsl::parser::parse_complex(x.trim()).map_err(Error::from))
        .collect()
}
