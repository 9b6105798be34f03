//! Substitution matrices, primitivity, eigen-data and the dichotomy
//! classification, with big-integer tile counting.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::{big_ratio_to_f64, Scalar};
use crate::substitution::SubstitutionRule;
use crate::Rational;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Largest constant term whose divisors are enumerated in the exact path.
const EXACT_DIVISOR_LIMIT: u64 = 1_000_000_000_000;

/// `entries[i][j]` = number of type-`i` tiles in `rho(T_j)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubstitutionMatrix {
    pub entries: Vec<Vec<BigInt>>,
}

/// Tile census of a patch, or any integer vector indexed by prototile.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CountVector(pub Vec<BigInt>);

impl CountVector {
    pub fn from_i64s(values: &[i64]) -> Self {
        CountVector(values.iter().map(|&v| BigInt::from(v)).collect())
    }

    pub fn from_census(census: &[u64]) -> Self {
        CountVector(census.iter().map(|&v| BigInt::from(v)).collect())
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![BigInt::zero(); n];
        v[i] = BigInt::one();
        CountVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `<1, v>`.
    pub fn total(&self) -> BigInt {
        self.0.iter().sum()
    }

    pub fn dot_rational(&self, weights: &[Rational]) -> Rational {
        self.0
            .iter()
            .zip(weights)
            .map(|(c, w)| BigRational::from_integer(c.clone()) * w)
            .fold(Rational::zero(), |a, b| a + b)
    }

    pub fn sub(&self, other: &CountVector) -> CountVector {
        CountVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Display for CountVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl SubstitutionMatrix {
    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        SubstitutionMatrix { entries: rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect() }
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![vec![BigInt::zero(); n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = BigInt::one();
        }
        SubstitutionMatrix { entries }
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i][j]
    }

    pub fn transpose(&self) -> Self {
        let n = self.size();
        SubstitutionMatrix { entries: (0..n).map(|i| (0..n).map(|j| self.entries[j][i].clone()).collect()).collect() }
    }

    pub fn mul(&self, other: &SubstitutionMatrix) -> SubstitutionMatrix {
        let n = self.size();
        let mut entries = vec![vec![BigInt::zero(); n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            for k in 0..n {
                let a = &self.entries[i][k];
                if a.is_zero() {
                    continue;
                }
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell += a * &other.entries[k][j];
                }
            }
        }
        SubstitutionMatrix { entries }
    }

    pub fn mul_vec(&self, v: &CountVector) -> CountVector {
        CountVector(self.entries.iter().map(|row| row.iter().zip(&v.0).map(|(a, b)| a * b).sum()).collect())
    }

    /// `M^k` by repeated squaring.
    pub fn pow(&self, k: u64) -> SubstitutionMatrix {
        let mut result = SubstitutionMatrix::identity(self.size());
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn is_positive(&self) -> bool {
        self.entries.iter().flatten().all(|a| a.is_positive())
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |i, j| self.entries[i][j].to_f64().unwrap_or(f64::INFINITY))
    }

    fn to_rational(&self) -> Vec<Vec<Rational>> {
        self.entries.iter().map(|r| r.iter().map(|a| BigRational::from_integer(a.clone())).collect()).collect()
    }

    /// Conjugate by the permutation sending index `i` to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> SubstitutionMatrix {
        let n = self.size();
        let mut entries = vec![vec![BigInt::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                entries[perm[i]][perm[j]] = self.entries[i][j].clone();
            }
        }
        SubstitutionMatrix { entries }
    }

    /// Coefficients `c_0..=c_n` of `det(x I - M)`, lowest degree first.
    pub fn characteristic_polynomial(&self) -> Vec<BigInt> {
        let n = self.size();
        let a = self.to_rational();
        let mut coeffs = vec![Rational::zero(); n + 1];
        coeffs[n] = Rational::one();
        let mut mk = vec![vec![Rational::zero(); n]; n];
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = vec![vec![Rational::zero(); n]; n];
            for i in 0..n {
                for l in 0..n {
                    if a[i][l].is_zero() {
                        continue;
                    }
                    for j in 0..n {
                        next[i][j] += &a[i][l] * &mk[l][j];
                    }
                }
                next[i][i] += &coeffs[n - k + 1];
            }
            mk = next;
            let mut trace = Rational::zero();
            for i in 0..n {
                for l in 0..n {
                    trace += &a[i][l] * &mk[l][i];
                }
            }
            coeffs[n - k] = -trace / Rational::from_i64(k as i64);
        }
        coeffs.into_iter().map(|c| c.to_integer()).collect()
    }
}

impl fmt::Display for SubstitutionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .entries
            .iter()
            .map(|r| format!("[{}]", r.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        write!(f, "[{}]", rows.join(","))
    }
}

pub fn substitution_matrix<S: Scalar>(rule: &SubstitutionRule<S>) -> SubstitutionMatrix {
    let n = rule.len();
    let mut entries = vec![vec![BigInt::zero(); n]; n];
    for (j, kids) in rule.children.iter().enumerate() {
        for c in kids {
            entries[c.prototile][j] += 1;
        }
    }
    SubstitutionMatrix { entries }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Primitivity {
    pub is_primitive: bool,
    pub witness_power: Option<u32>,
}

/// Tests `M^m > 0` for `m = 1..=n^2 - 2n + 2`.
pub fn primitivity(m: &SubstitutionMatrix) -> Primitivity {
    let n = m.size();
    if n == 0 {
        return Primitivity { is_primitive: false, witness_power: None };
    }
    let bound = (n * n + 2 - 2 * n) as u32;
    let pattern: Vec<Vec<bool>> = m.entries.iter().map(|r| r.iter().map(|a| a.is_positive()).collect()).collect();
    let mut power = pattern.clone();
    for k in 1..=bound {
        if power.iter().flatten().all(|&b| b) {
            return Primitivity { is_primitive: true, witness_power: Some(k) };
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for l in 0..n {
                if power[i][l] {
                    for j in 0..n {
                        next[i][j] |= pattern[l][j];
                    }
                }
            }
        }
        power = next;
    }
    Primitivity { is_primitive: false, witness_power: None }
}

/// `M^k seed`, exact.
pub fn count_vector(m: &SubstitutionMatrix, seed: &CountVector, k: u64) -> CountVector {
    m.pow(k).mul_vec(seed)
}

/// `|<1, M^k (p - q)>|` for `k = 0..=k_max`. The two vectors must describe
/// patches of equal volume.
pub fn count_difference_sequence(
    m: &SubstitutionMatrix,
    volumes: &[Rational],
    p: &CountVector,
    q: &CountVector,
    k_max: u32,
) -> Result<Vec<BigInt>> {
    let n = m.size();
    if p.len() != n || q.len() != n || volumes.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.len().min(q.len()).min(volumes.len()) });
    }
    let vp = p.dot_rational(volumes);
    let vq = q.dot_rational(volumes);
    if vp != vq {
        return Err(Error::VolumeMismatch { left: vp.to_string(), right: vq.to_string() });
    }
    let mut w = p.sub(q);
    let mut out = Vec::with_capacity(k_max as usize + 1);
    for k in 0..=k_max {
        out.push(w.total().abs());
        if k < k_max {
            w = m.mul_vec(&w);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    UniformlySpread,
    Critical,
    Continuum,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::UniformlySpread => "uniformly-spread-regime",
            Classification::Critical => "critical",
            Classification::Continuum => "continuum-regime",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One distinct eigenvalue with its eigenspace.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenspace {
    pub value: Complex<f64>,
    /// Present when the eigenvalue is rational and found exactly.
    pub exact_value: Option<Rational>,
    pub algebraic: usize,
    /// Basis of the eigenspace, each normalized so its first nonzero entry is 1.
    pub basis: Vec<Vec<Complex<f64>>>,
    pub exact_basis: Option<Vec<Vec<Rational>>>,
    /// `|<1, v>|` for each basis vector (scaled to unit length).
    pub ones_pairings: Vec<f64>,
    /// Whether the whole eigenspace lies in the orthogonal complement of `1`.
    pub orthogonal_to_ones: bool,
}

impl Eigenspace {
    pub fn geometric(&self) -> usize {
        self.basis.len()
    }

    pub fn is_defective(&self) -> bool {
        self.geometric() < self.algebraic
    }

    pub fn modulus(&self) -> f64 {
        self.value.norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub dimension: usize,
    /// Distinct eigenvalues in order of decreasing modulus.
    pub eigenspaces: Vec<Eigenspace>,
    pub lambda1: Rational,
    /// Left Perron-Frobenius vector normalized to the prototile volumes.
    pub u1: Vec<Rational>,
    /// Position (1-based, counted with multiplicity) of the first eigenvalue
    /// after the leading one having an eigenvector off `1^perp`.
    pub t_index: Option<usize>,
    /// Eigenspace indices sharing the modulus `|lambda_t|`, each with whether
    /// it has an eigenvector off `1^perp`.
    pub critical_group: Vec<(usize, bool)>,
    pub threshold: f64,
    pub classification: Classification,
    pub exact: bool,
    pub primitivity: Primitivity,
    pub tolerance: f64,
    pub c0_estimate: Option<f64>,
}

impl SpectralReport {
    /// Eigenvalues listed with multiplicity.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.eigenspaces.iter().flat_map(|e| std::iter::repeat(e.value).take(e.algebraic)).collect()
    }

    /// Eigenspace holding the eigenvalue at 1-based position `index`.
    pub fn eigenspace_at(&self, index: usize) -> Option<&Eigenspace> {
        let mut pos = 0;
        for e in &self.eigenspaces {
            pos += e.algebraic;
            if index <= pos {
                return Some(e);
            }
        }
        None
    }

    pub fn lambda_t(&self) -> Option<&Eigenspace> {
        self.t_index.and_then(|t| self.eigenspace_at(t))
    }

    /// Whether every eigenvalue and eigenvector was found in exact arithmetic.
    pub fn is_exact(&self) -> bool {
        self.exact
    }
}

/// Eigen-decomposition, the index `t` and the dichotomy classification.
/// `volumes[i]` is the volume of prototile `i`; `dimension` is `d`.
pub fn spectral_report(
    m: &SubstitutionMatrix,
    volumes: &[Rational],
    dimension: usize,
    tolerance: f64,
) -> Result<SpectralReport> {
    let n = m.size();
    if volumes.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: volumes.len() });
    }
    if dimension == 0 {
        return Err(Error::Invalid("dimension must be positive".into()));
    }
    if volumes.iter().any(|v| !v.is_positive()) {
        return Err(Error::Invalid("prototile volumes must be positive".into()));
    }
    let prim = primitivity(m);
    if !prim.is_primitive {
        return Err(Error::NotPrimitive);
    }

    // M^T vol = lambda1 vol holds exactly for any rule whose children cover
    // the inflated prototiles.
    let mt = m.transpose();
    let image = mt.to_rational();
    let ratios: Vec<Rational> = (0..n)
        .map(|i| {
            image[i].iter().zip(volumes).map(|(a, v)| a * v).fold(Rational::zero(), |s, x| s + x) / &volumes[i]
        })
        .collect();
    let lambda1 = ratios[0].clone();
    if ratios.iter().any(|r| *r != lambda1) {
        return Err(Error::Invariant("prototile volumes are not a left eigenvector of the substitution matrix".into()));
    }

    let mut spaces = match exact_eigenspaces(m) {
        Some(spaces) => spaces,
        None => numeric_eigenspaces(m, tolerance),
    };
    let exact = spaces.iter().all(|e| e.exact_value.is_some());
    sort_eigenspaces(&mut spaces);
    for e in &mut spaces {
        fill_pairings(e, tolerance);
    }

    let lead = &spaces[0];
    let lead_ok = match &lead.exact_value {
        Some(v) => *v == lambda1,
        None => (lead.value.re - big_ratio_to_f64(&lambda1)).abs() <= tolerance * big_ratio_to_f64(&lambda1).max(1.0),
    };
    if !lead_ok || lead.algebraic != 1 {
        return Err(Error::Invariant(format!("leading eigenvalue {} does not match {}", lead.value, lambda1)));
    }

    let mut t_index = None;
    let mut t_space = None;
    let mut position = 1;
    for (k, e) in spaces.iter().enumerate().skip(1) {
        let first = position + 1;
        position += e.algebraic;
        if !e.orthogonal_to_ones {
            t_index = Some(first);
            t_space = Some(k);
            break;
        }
        if e.is_defective() && e.orthogonal_to_ones {
            // eigenvectors all in 1^perp, but a Jordan chain may still leave it
            if e.exact_basis.is_none() || generalized_space_leaves_ones_perp(m, e) {
                return Err(Error::DefectiveEigenspace {
                    eigenvalue: e.value.to_string(),
                    algebraic: e.algebraic,
                    geometric: e.geometric(),
                });
            }
        }
    }

    let threshold = big_ratio_to_f64(&lambda1).powf((dimension as f64 - 1.0) / dimension as f64);
    let mut critical_group = Vec::new();
    let classification = match t_space {
        None => Classification::UniformlySpread,
        Some(k) => {
            let e = &spaces[k];
            if e.is_defective() {
                return Err(Error::DefectiveEigenspace {
                    eigenvalue: e.value.to_string(),
                    algebraic: e.algebraic,
                    geometric: e.geometric(),
                });
            }
            let modulus = e.modulus();
            for (j, other) in spaces.iter().enumerate().skip(1) {
                if (other.modulus() - modulus).abs() <= tolerance * modulus.max(1.0) {
                    critical_group.push((j, !other.orthogonal_to_ones));
                }
            }
            classify(e, &lambda1, dimension, threshold, tolerance)
        }
    };

    Ok(SpectralReport {
        dimension,
        eigenspaces: spaces,
        lambda1,
        u1: volumes.to_vec(),
        t_index,
        critical_group,
        threshold,
        classification,
        exact,
        primitivity: prim,
        tolerance,
        c0_estimate: None,
    })
}

fn classify(e: &Eigenspace, lambda1: &Rational, d: usize, threshold: f64, tolerance: f64) -> Classification {
    if let Some(v) = &e.exact_value {
        // |lambda_t|^d against lambda1^(d-1), exactly
        let lhs = v.abs().pow_u32(d as u32);
        let rhs = lambda1.pow_u32(d as u32 - 1);
        return match lhs.cmp(&rhs) {
            Ordering::Greater => Classification::Continuum,
            Ordering::Less => Classification::UniformlySpread,
            Ordering::Equal => Classification::Critical,
        };
    }
    let modulus = e.modulus();
    if (modulus - threshold).abs() <= tolerance * threshold {
        Classification::Critical
    } else if modulus > threshold {
        Classification::Continuum
    } else {
        Classification::UniformlySpread
    }
}

/// Lower estimate of `|<1, M^k (p - q)>| / |lambda_t|^k` over
/// `k in [k0, k0 + n]`.
pub fn c0_estimate(m: &SubstitutionMatrix, p: &CountVector, q: &CountVector, lambda_t: f64, k0: u32) -> Option<f64> {
    if lambda_t <= 0.0 {
        return None;
    }
    let n = m.size() as u32;
    let mut w = m.pow(k0 as u64).mul_vec(&p.sub(q));
    let mut best: Option<f64> = None;
    for k in k0..=k0 + n {
        let diff = BigRational::from_integer(w.total().abs());
        let scaled = crate::scalar::log10_big_ratio(&diff);
        let value = if diff.is_zero() { 0.0 } else { 10f64.powf(scaled - k as f64 * lambda_t.log10()) };
        best = Some(best.map_or(value, |b: f64| b.min(value)));
        w = m.mul_vec(&w);
    }
    best
}

fn sort_eigenspaces(spaces: &mut [Eigenspace]) {
    spaces.sort_by(|a, b| {
        let key = |e: &Eigenspace| -> (f64, f64, f64) { (e.modulus(), e.value.re, e.value.im) };
        let (ma, ra, ia) = key(a);
        let (mb, rb, ib) = key(b);
        let exact_cmp = match (&a.exact_value, &b.exact_value) {
            (Some(x), Some(y)) => Some(y.abs().cmp(&x.abs()).then_with(|| y.cmp(x))),
            _ => None,
        };
        exact_cmp.unwrap_or_else(|| {
            mb.partial_cmp(&ma)
                .unwrap_or(Ordering::Equal)
                .then(rb.partial_cmp(&ra).unwrap_or(Ordering::Equal))
                .then(ib.partial_cmp(&ia).unwrap_or(Ordering::Equal))
        })
    });
}

fn fill_pairings(e: &mut Eigenspace, tolerance: f64) {
    if let Some(exact) = &e.exact_basis {
        e.orthogonal_to_ones = exact.iter().all(|v| v.iter().fold(Rational::zero(), |s, x| s + x).is_zero());
        e.ones_pairings = exact
            .iter()
            .map(|v| {
                let s: f64 = big_ratio_to_f64(&v.iter().fold(Rational::zero(), |s, x| s + x));
                let norm = v.iter().map(|x| big_ratio_to_f64(x).powi(2)).sum::<f64>().sqrt();
                (s / norm).abs()
            })
            .collect();
        return;
    }
    e.ones_pairings = e
        .basis
        .iter()
        .map(|v| {
            let s: Complex<f64> = v.iter().sum();
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            s.norm() / norm
        })
        .collect();
    e.orthogonal_to_ones = e.ones_pairings.iter().all(|&p| p <= tolerance);
}

/// For a defective eigenvalue known exactly: whether the generalized
/// eigenspace leaves `1^perp`.
fn generalized_space_leaves_ones_perp(m: &SubstitutionMatrix, e: &Eigenspace) -> bool {
    let Some(lambda) = &e.exact_value else {
        return true;
    };
    let mut shifted = m.to_rational();
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let mut power = shifted.clone();
    for _ in 1..e.algebraic {
        power = rational_mat_mul(&power, &shifted);
    }
    rational_nullspace(&power)
        .iter()
        .any(|v| !v.iter().fold(Rational::zero(), |s, x| s + x).is_zero())
}

fn rational_mat_mul(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = a.len();
    let mut out = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                out[i][j] += &a[i][k] * &b[k][j];
            }
        }
    }
    out
}

/// Exact eigen-data when the characteristic polynomial splits into integer
/// linear factors (its rational roots are necessarily integers).
fn exact_eigenspaces(m: &SubstitutionMatrix) -> Option<Vec<Eigenspace>> {
    let roots = integer_roots(&m.characteristic_polynomial())?;
    let mut spaces = Vec::new();
    for (root, mult) in roots {
        let mut shifted = m.to_rational();
        let lambda = BigRational::from_integer(root);
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] -= &lambda;
        }
        let basis = rational_nullspace(&shifted);
        let float_basis = basis
            .iter()
            .map(|v| v.iter().map(|x| Complex::new(big_ratio_to_f64(x), 0.0)).collect())
            .collect();
        spaces.push(Eigenspace {
            value: Complex::new(big_ratio_to_f64(&lambda), 0.0),
            exact_value: Some(lambda),
            algebraic: mult,
            basis: float_basis,
            exact_basis: Some(basis),
            ones_pairings: Vec::new(),
            orthogonal_to_ones: true,
        });
    }
    Some(spaces)
}

/// Integer roots with multiplicity, or `None` when the polynomial (monic,
/// lowest degree first) does not split over the integers.
fn integer_roots(coeffs: &[BigInt]) -> Option<Vec<(BigInt, usize)>> {
    let mut poly: Vec<BigInt> = coeffs.to_vec();
    let mut roots: Vec<(BigInt, usize)> = Vec::new();
    let mut zero_mult = 0;
    while poly.len() > 1 && poly[0].is_zero() {
        poly.remove(0);
        zero_mult += 1;
    }
    if zero_mult > 0 {
        roots.push((BigInt::zero(), zero_mult));
    }
    if poly.len() > 1 {
        let c0 = poly[0].abs().to_u64().filter(|&c| c <= EXACT_DIVISOR_LIMIT)?;
        let mut candidates = Vec::new();
        let mut d = 1u64;
        while d * d <= c0 {
            if c0 % d == 0 {
                candidates.push(d);
                if d * d != c0 {
                    candidates.push(c0 / d);
                }
            }
            d += 1;
        }
        candidates.sort_unstable();
        for c in candidates {
            for r in [BigInt::from(c), -BigInt::from(c)] {
                let mut mult = 0;
                while poly.len() > 1 {
                    match deflate(&poly, &r) {
                        Some(q) => {
                            poly = q;
                            mult += 1;
                        }
                        None => break,
                    }
                }
                if mult > 0 {
                    roots.push((r, mult));
                }
            }
        }
    }
    if poly.len() == 1 {
        Some(roots)
    } else {
        None
    }
}

/// Divide by `(x - r)` if `r` is a root.
fn deflate(poly: &[BigInt], r: &BigInt) -> Option<Vec<BigInt>> {
    let deg = poly.len() - 1;
    let mut q = vec![BigInt::zero(); deg];
    let mut carry = BigInt::zero();
    for i in (1..=deg).rev() {
        carry = &poly[i] + carry * r;
        q[i - 1] = carry.clone();
    }
    let rem = &poly[0] + carry * r;
    if rem.is_zero() {
        Some(q)
    } else {
        None
    }
}

/// Exact nullspace basis, each vector scaled so its first nonzero entry is 1.
pub fn rational_nullspace(a: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<Rational>> = a.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Rational::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let delta = &f * &m[r][j];
                    m[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); cols];
            v[f] = Rational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[row][f].clone();
            }
            let lead = v.iter().find(|x| !x.is_zero()).cloned().unwrap_or_else(Rational::one);
            v.into_iter().map(|x| x / &lead).collect()
        })
        .collect()
}

/// Approximate nullspace by Gaussian elimination with partial pivoting;
/// pivots below `tol` are treated as zero. Vectors are scaled so their first
/// entry of non-negligible modulus is 1.
pub fn complex_nullspace<F: Float>(a: &[Vec<Complex<F>>], tol: F) -> Vec<Vec<Complex<F>>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<Complex<F>>> = a.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (p, best) = (r..rows)
            .map(|i| (i, m[i][c].norm()))
            .fold((r, F::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            continue;
        }
        m.swap(r, p);
        let inv = Complex::new(F::one(), F::zero()) / m[r][c];
        for x in m[r].iter_mut() {
            *x = *x * inv;
        }
        for i in 0..rows {
            if i != r {
                let f = m[i][c];
                if f.norm() > F::zero() {
                    for j in 0..cols {
                        let delta = f * m[r][j];
                        m[i][j] = m[i][j] - delta;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Complex::new(F::zero(), F::zero()); cols];
            v[f] = Complex::new(F::one(), F::zero());
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[row][f];
            }
            let lead = v.iter().copied().find(|x| x.norm() > tol).unwrap_or(Complex::new(F::one(), F::zero()));
            v.into_iter().map(|x| x / lead).collect()
        })
        .collect()
}

fn numeric_eigenspaces(m: &SubstitutionMatrix, tolerance: f64) -> Vec<Eigenspace> {
    let mf = m.to_f64();
    let n = m.size();
    let scale = mf.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let values: Vec<Complex<f64>> = mf.complex_eigenvalues().iter().copied().collect();
    // Clustering tolerance is loose because a Jordan block of size k splits
    // its eigenvalue by roughly eps^(1/k).
    let cluster_tol = 1e-6 * scale;
    let mut clusters: Vec<Vec<Complex<f64>>> = Vec::new();
    for v in values {
        match clusters.iter_mut().find(|c| (c[0] - v).norm() <= cluster_tol) {
            Some(c) => c.push(v),
            None => clusters.push(vec![v]),
        }
    }
    clusters
        .into_iter()
        .map(|c| {
            let mean = c.iter().sum::<Complex<f64>>() / c.len() as f64;
            let a: Vec<Vec<Complex<f64>>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let x = Complex::new(mf[(i, j)], 0.0);
                            if i == j {
                                x - mean
                            } else {
                                x
                            }
                        })
                        .collect()
                })
                .collect();
            let basis = complex_nullspace(&a, (tolerance * 100.0).max(1e-7) * scale);
            Eigenspace {
                value: mean,
                exact_value: None,
                algebraic: c.len(),
                basis,
                exact_basis: None,
                ones_pairings: Vec::new(),
                orthogonal_to_ones: true,
            }
        })
        .collect()
}
