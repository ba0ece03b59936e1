//! Multi-indices, the graded-colex rank `theta`, and small combinatorial helpers.
//!
//! Graded colex: indices are compared by degree first, then by the last
//! coordinate, then the one before it, and so on. For two variables this
//! gives `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Invalid("multi-index needs at least one entry".into()));
        }
        Ok(MultiIndex(entries))
    }

    /// Panics on an empty slice.
    pub fn from_slice(entries: &[u32]) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one entry");
        MultiIndex(entries.to_vec())
    }

    pub fn zeros(d: usize) -> Self {
        Self::from_slice(&vec![0; d])
    }

    pub fn unit(d: usize, i: usize) -> Self {
        let mut e = vec![0; d];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial_f64(a)).product()
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.le(self) {
            return None;
        }
        Some(MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Concatenate `self` and `other` into one index over `dim() + other.dim()` variables.
    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut e = self.0.clone();
        e.extend_from_slice(&other.0);
        MultiIndex(e)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

fn factorial_f64(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    u64::try_from(acc).ok()
}

/// `(x)_j / j!` for a natural `x`, i.e. `C(x+j-1, j)`.
fn rising_over_factorial(x: u64, j: u64) -> u64 {
    if j == 0 {
        return 1;
    }
    if x == 0 {
        return 0;
    }
    binomial(x + j - 1, j).expect("theta overflow")
}

/// Graded-colex rank of `alpha` among all indices of the same length.
pub fn theta(alpha: &MultiIndex) -> usize {
    let e = alpha.entries();
    let d = e.len();
    let total: u64 = alpha.degree().into();
    let mut acc: u64 = 0;
    for j in 1..d {
        // |alpha| minus the first d-j entries is the sum of the last j entries.
        let tail: u64 = e[d - j..].iter().map(|&a| u64::from(a)).sum();
        acc += rising_over_factorial(tail, j as u64);
    }
    acc += rising_over_factorial(total, d as u64);
    acc as usize
}

/// Number of indices in `d` variables with degree `< t`.
pub fn count_below_degree(d: usize, t: u32) -> usize {
    if t == 0 {
        return 0;
    }
    binomial(u64::from(t) + d as u64 - 1, d as u64).expect("index count overflow") as usize
}

/// All indices of degree exactly `t` in `d` variables, in colex order.
pub fn colex_level(d: usize, t: u32) -> Arc<Vec<MultiIndex>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Arc<Vec<MultiIndex>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(d, t)) {
        return v.clone();
    }
    let mut out = Vec::new();
    let mut buf = vec![0u32; d];
    fill_level(d, t, &mut buf, &mut out);
    let v = Arc::new(out);
    cache.lock().unwrap().insert((d, t), v.clone());
    v
}

// Within a degree theta ranks tuples in descending lex order, so the first
// coordinate is the outer loop and counts down.
fn fill_level(d: usize, t: u32, buf: &mut [u32], out: &mut Vec<MultiIndex>) {
    fill_from(0, d, t, buf, out);
}

fn fill_from(pos: usize, d: usize, t: u32, buf: &mut [u32], out: &mut Vec<MultiIndex>) {
    if pos + 1 == d {
        buf[pos] = t;
        out.push(MultiIndex(buf.to_vec()));
        buf[pos] = 0;
        return;
    }
    for first in (0..=t).rev() {
        buf[pos] = first;
        fill_from(pos + 1, d, t - first, buf, out);
    }
    buf[pos] = 0;
}

pub fn theta_inv(l: usize, d: usize) -> MultiIndex {
    assert!(d >= 1, "theta_inv needs d >= 1");
    let mut t = 0u32;
    while count_below_degree(d, t + 1) <= l {
        t += 1;
    }
    colex_level(d, t)[l - count_below_degree(d, t)].clone()
}

/// Graded colex comparison.
pub fn graded_colex_cmp(a: &MultiIndex, b: &MultiIndex) -> Ordering {
    a.degree()
        .cmp(&b.degree())
        .then_with(|| b.entries().cmp(a.entries()))
}

#[derive(Debug, Clone, Serialize)]
pub struct JetIndexTable {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub ordered_indices: Vec<MultiIndex>,
}

impl JetIndexTable {
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, l: usize) -> &MultiIndex {
        &self.ordered_indices[l]
    }
}

/// Largest jet table we are willing to materialize.
const MAX_TABLE: u64 = 1 << 24;

pub fn enumerate_jet_indices(d: usize, k: usize) -> Result<JetIndexTable> {
    if d == 0 || k == 0 {
        return Err(Error::Invalid(format!("need d >= 1 and k >= 1, got d={d}, k={k}")));
    }
    let count = binomial((d + k - 1) as u64, (k - 1) as u64)
        .filter(|&c| c <= MAX_TABLE)
        .ok_or_else(|| Error::Size(format!("C({}, {}) is too large", d + k - 1, k - 1)))?;
    let mut ordered = Vec::with_capacity(count as usize);
    for t in 0..k as u32 {
        ordered.extend(colex_level(d, t).iter().cloned());
    }
    debug_assert_eq!(ordered.len() as u64, count);
    Ok(JetIndexTable { d, k, n: count as usize - 1, ordered_indices: ordered })
}

/// Product of componentwise binomials; zero unless `beta <= alpha`.
pub fn multi_binom(alpha: &MultiIndex, beta: &MultiIndex) -> u64 {
    assert_eq!(alpha.dim(), beta.dim());
    alpha
        .entries()
        .iter()
        .zip(beta.entries())
        .map(|(&a, &b)| binomial(a.into(), b.into()).expect("binomial overflow"))
        .product()
}

/// Rising factorial `(z)_t`.
pub fn pochhammer(z: C64, t: u32) -> C64 {
    (0..t).fold(C64::new(1.0, 0.0), |acc, i| acc * (z + f64::from(i)))
}
