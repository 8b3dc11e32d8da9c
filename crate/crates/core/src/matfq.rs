//! Exact linear algebra over prime fields: matrices, Bruhat decomposition
//! relative to the upper-triangular Borel subgroup, characteristic and
//! minimal polynomials, and the transpose-inverse twist.
//!
//! Everything is computed with integer arithmetic modulo an explicit prime.
//! Matrices are small (the library is exercised up to 4x4) and the code
//! favors directness over asymptotics.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatError {
    #[error("modulus {0} is not prime")]
    BadModulus(u64),
    #[error("operands have mismatched shape or modulus")]
    Mismatch,
    #[error("cannot parse matrix literal {0:?}")]
    BadLiteral(String),
    #[error("matrix is singular")]
    Singular,
    #[error("no irreducible polynomial of degree {0} found")]
    NoIrreducible(usize),
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    (a + b) % p
}

pub fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    (a + p - b % p) % p
}

pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    // Moduli stay far below 2^32, so the product fits in u64.
    (a * b) % p
}

pub fn pow_mod(mut a: u64, mut e: u128, p: u64) -> u64 {
    a %= p;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    acc
}

/// Inverse in F_p by the extended Euclidean algorithm; a must be nonzero
/// mod p.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    let a = a % p;
    assert!(a != 0, "inverse of zero mod {p}");
    let (mut r0, mut r1) = (p as i64, a as i64);
    let (mut s0, mut s1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    debug_assert_eq!(r0, 1);
    s0.rem_euclid(p as i64) as u64
}

/// Smallest generator of the multiplicative group of F_p.
pub fn primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let mut factors = Vec::new();
    let mut m = p - 1;
    let mut d = 2;
    while d * d <= m {
        if m.is_multiple_of(d) {
            factors.push(d);
            while m.is_multiple_of(d) {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        factors.push(m);
    }
    for g in 2..p {
        if factors
            .iter()
            .all(|&f| pow_mod(g, ((p - 1) / f) as u128, p) != 1)
        {
            return g;
        }
    }
    unreachable!("every prime field has a primitive root")
}

fn reduce_i64(v: i64, p: u64) -> u64 {
    v.rem_euclid(p as i64) as u64
}

/// Square matrix over F_p, row-major, entries always reduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatrixFq {
    p: u64,
    n: usize,
    entries: Vec<u64>,
}

impl fmt::Display for MatrixFq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| self.get(i, j).to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        write!(f, "{}", rows.join(";"))
    }
}

impl MatrixFq {
    fn check_modulus(p: u64) -> Result<(), MatError> {
        if is_prime(p) && p < (1 << 31) {
            Ok(())
        } else {
            Err(MatError::BadModulus(p))
        }
    }

    pub fn zero(p: u64, n: usize) -> Result<MatrixFq, MatError> {
        Self::check_modulus(p)?;
        Ok(MatrixFq {
            p,
            n,
            entries: vec![0; n * n],
        })
    }

    pub fn identity(p: u64, n: usize) -> Result<MatrixFq, MatError> {
        let mut m = Self::zero(p, n)?;
        for i in 0..n {
            m.entries[i * n + i] = 1 % p;
        }
        Ok(m)
    }

    pub fn from_rows(p: u64, rows: &[Vec<i64>]) -> Result<MatrixFq, MatError> {
        Self::check_modulus(p)?;
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(MatError::Mismatch);
            }
            entries.extend(row.iter().map(|&v| reduce_i64(v, p)));
        }
        Ok(MatrixFq { p, n, entries })
    }

    pub fn from_fn(
        p: u64,
        n: usize,
        mut f: impl FnMut(usize, usize) -> u64,
    ) -> Result<MatrixFq, MatError> {
        Self::check_modulus(p)?;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j) % p);
            }
        }
        Ok(MatrixFq { p, n, entries })
    }

    pub fn diagonal(p: u64, diag: &[u64]) -> Result<MatrixFq, MatError> {
        let n = diag.len();
        let mut m = Self::zero(p, n)?;
        for (i, &v) in diag.iter().enumerate() {
            m.entries[i * n + i] = v % p;
        }
        Ok(m)
    }

    /// Permutation matrix P with P e_j = e_{perm[j]}, i.e. the single 1 of
    /// column j sits in row perm[j]. Composition satisfies
    /// P_x P_y = P_{x o y}.
    pub fn permutation(p: u64, perm: &[usize]) -> Result<MatrixFq, MatError> {
        let n = perm.len();
        let mut m = Self::zero(p, n)?;
        for (j, &i) in perm.iter().enumerate() {
            if i >= n {
                return Err(MatError::Mismatch);
            }
            m.entries[i * n + j] = 1 % p;
        }
        Ok(m)
    }

    /// Parses "a b; c d" style literals: rows separated by semicolons,
    /// entries by whitespace (commas also accepted). Entries may be negative
    /// and are reduced mod p.
    pub fn parse_literal(p: u64, s: &str) -> Result<MatrixFq, MatError> {
        let bad = || MatError::BadLiteral(s.to_string());
        let mut rows = Vec::new();
        for row in s.trim().split(';') {
            let mut out = Vec::new();
            for tok in row.split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() {
                    continue;
                }
                let v: i64 = tok.parse().map_err(|_| bad())?;
                out.push(v);
            }
            if out.is_empty() {
                return Err(bad());
            }
            rows.push(out);
        }
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(bad());
        }
        Self::from_rows(p, &rows)
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.entries[i * self.n + j] = v % self.p;
    }

    pub fn is_identity(&self) -> bool {
        self == &MatrixFq::identity(self.p, self.n).unwrap()
    }

    fn check_compat(&self, other: &MatrixFq) -> Result<(), MatError> {
        if self.p != other.p || self.n != other.n {
            return Err(MatError::Mismatch);
        }
        Ok(())
    }

    pub fn mul(&self, other: &MatrixFq) -> Result<MatrixFq, MatError> {
        self.check_compat(other)?;
        let n = self.n;
        let p = self.p;
        let mut out = MatrixFq::zero(p, n)?;
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    let cur = out.entries[i * n + j];
                    out.entries[i * n + j] = (cur + a * other.get(k, j)) % p;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &MatrixFq) -> Result<MatrixFq, MatError> {
        self.check_compat(other)?;
        let mut out = self.clone();
        for (e, o) in out.entries.iter_mut().zip(&other.entries) {
            *e = (*e + *o) % self.p;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MatrixFq) -> Result<MatrixFq, MatError> {
        self.check_compat(other)?;
        let mut out = self.clone();
        for (e, o) in out.entries.iter_mut().zip(&other.entries) {
            *e = sub_mod(*e, *o, self.p);
        }
        Ok(out)
    }

    pub fn scalar_mul(&self, c: u64) -> MatrixFq {
        let c = c % self.p;
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            *e = mul_mod(*e, c, self.p);
        }
        out
    }

    pub fn transpose(&self) -> MatrixFq {
        let n = self.n;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j];
            }
        }
        out
    }

    pub fn pow(&self, mut e: u128) -> Result<MatrixFq, MatError> {
        let mut base = self.clone();
        let mut acc = MatrixFq::identity(self.p, self.n)?;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            base = base.mul(&base)?;
            e >>= 1;
        }
        Ok(acc)
    }

    /// Determinant by Gaussian elimination with row swaps.
    pub fn det(&self) -> u64 {
        let n = self.n;
        let p = self.p;
        let mut a = self.entries.clone();
        let mut det = 1u64;
        let mut sign_flip = false;
        for col in 0..n {
            let pivot = (col..n).find(|&r| a[r * n + col] != 0);
            let Some(pr) = pivot else { return 0 };
            if pr != col {
                for j in 0..n {
                    a.swap(pr * n + j, col * n + j);
                }
                sign_flip = !sign_flip;
            }
            let pv = a[col * n + col];
            det = mul_mod(det, pv, p);
            let pv_inv = inv_mod(pv, p);
            for r in col + 1..n {
                let factor = mul_mod(a[r * n + col], pv_inv, p);
                if factor == 0 {
                    continue;
                }
                for j in col..n {
                    let delta = mul_mod(factor, a[col * n + j], p);
                    a[r * n + j] = sub_mod(a[r * n + j], delta, p);
                }
            }
        }
        if sign_flip {
            sub_mod(0, det, p)
        } else {
            det
        }
    }

    pub fn is_invertible(&self) -> bool {
        self.det() != 0
    }

    pub fn rank(&self) -> usize {
        let n = self.n;
        let p = self.p;
        let mut a = self.entries.clone();
        let mut rank = 0;
        for col in 0..n {
            let pivot = (rank..n).find(|&r| a[r * n + col] != 0);
            let Some(pr) = pivot else { continue };
            if pr != rank {
                for j in 0..n {
                    a.swap(pr * n + j, rank * n + j);
                }
            }
            let pv_inv = inv_mod(a[rank * n + col], p);
            for r in 0..n {
                if r == rank {
                    continue;
                }
                let factor = mul_mod(a[r * n + col], pv_inv, p);
                if factor == 0 {
                    continue;
                }
                for j in 0..n {
                    let delta = mul_mod(factor, a[rank * n + j], p);
                    a[r * n + j] = sub_mod(a[r * n + j], delta, p);
                }
            }
            rank += 1;
        }
        rank
    }

    /// Inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<MatrixFq, MatError> {
        let n = self.n;
        let p = self.p;
        let mut a = self.entries.clone();
        let mut inv = MatrixFq::identity(p, n)?;
        for col in 0..n {
            let pivot = (col..n).find(|&r| a[r * n + col] != 0);
            let Some(pr) = pivot else {
                return Err(MatError::Singular);
            };
            if pr != col {
                for j in 0..n {
                    a.swap(pr * n + j, col * n + j);
                    inv.entries.swap(pr * n + j, col * n + j);
                }
            }
            let pv_inv = inv_mod(a[col * n + col], p);
            for j in 0..n {
                a[col * n + j] = mul_mod(a[col * n + j], pv_inv, p);
                inv.entries[col * n + j] = mul_mod(inv.entries[col * n + j], pv_inv, p);
            }
            for r in 0..n {
                if r == col || a[r * n + col] == 0 {
                    continue;
                }
                let factor = a[r * n + col];
                for j in 0..n {
                    let da = mul_mod(factor, a[col * n + j], p);
                    a[r * n + j] = sub_mod(a[r * n + j], da, p);
                    let di = mul_mod(factor, inv.entries[col * n + j], p);
                    inv.entries[r * n + j] = sub_mod(inv.entries[r * n + j], di, p);
                }
            }
        }
        Ok(inv)
    }

    /// Base-p packed code; the inverse of unpack. Requires p^(n^2) to fit in
    /// u128, which holds throughout the supported range.
    pub fn pack_u128(&self) -> u128 {
        let mut acc = 0u128;
        for &e in &self.entries {
            acc = acc * self.p as u128 + e as u128;
        }
        acc
    }

    pub fn unpack_u128(p: u64, n: usize, mut code: u128) -> Result<MatrixFq, MatError> {
        let mut m = MatrixFq::zero(p, n)?;
        for idx in (0..n * n).rev() {
            m.entries[idx] = (code % p as u128) as u64;
            code /= p as u128;
        }
        if code != 0 {
            return Err(MatError::Mismatch);
        }
        Ok(m)
    }

    pub fn is_upper_unitriangular(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let e = self.get(i, j);
                match i.cmp(&j) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Equal => e == 1 % self.p,
                    std::cmp::Ordering::Greater => e == 0,
                }
            })
        })
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == 0))
    }

    /// Characteristic polynomial det(xI - A), monic of degree n, computed by
    /// the Leibniz expansion; fine for the small sizes used here.
    pub fn charpoly(&self) -> PolyFp {
        let n = self.n;
        let p = self.p;
        let mut acc = PolyFp::zero(p);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut stack = vec![0usize; n];
        let mut sign = true;
        // Iterative Heap's algorithm over all permutations.
        let mut emit = |perm: &[usize], even: bool| {
            let mut term = PolyFp::constant(p, 1);
            for (i, &pi) in perm.iter().enumerate() {
                // Entry of xI - A at (i, perm(i)).
                let a = sub_mod(0, self.get(i, pi), p);
                let lin = if i == pi {
                    PolyFp::from_coeffs(p, vec![a, 1])
                } else {
                    PolyFp::constant(p, a)
                };
                term = term.mul(&lin);
            }
            if !even {
                term = term.neg();
            }
            acc = acc.add(&term);
        };
        emit(&perm, sign);
        let mut i = 0;
        while i < n {
            if stack[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(stack[i], i);
                }
                sign = !sign;
                emit(&perm, sign);
                stack[i] += 1;
                i = 0;
            } else {
                stack[i] = 0;
                i += 1;
            }
        }
        acc
    }

    /// Minimal polynomial via the first linear dependency among the powers
    /// I, A, A^2, ... regarded as vectors of length n^2.
    pub fn minpoly(&self) -> PolyFp {
        let n = self.n;
        let p = self.p;
        let dim = n * n;
        // Rows of the dependency system; basis[i] is a reduced vector with
        // its pivot position, rebuilt incrementally.
        let mut reduced: Vec<(usize, Vec<u64>, Vec<u64>)> = Vec::new();
        let mut power = MatrixFq::identity(p, n).unwrap();
        for k in 0..=n {
            let mut vec = power.entries.clone();
            // Combination coefficients expressing vec in terms of the
            // original powers; starts as e_k.
            let mut comb = vec![0u64; n + 1];
            comb[k] = 1;
            for (pivot, row, row_comb) in &reduced {
                let c = vec[*pivot];
                if c == 0 {
                    continue;
                }
                for j in 0..dim {
                    vec[j] = sub_mod(vec[j], mul_mod(c, row[j], p), p);
                }
                for j in 0..=n {
                    comb[j] = sub_mod(comb[j], mul_mod(c, row_comb[j], p), p);
                }
            }
            match (0..dim).find(|&j| vec[j] != 0) {
                Some(pivot) => {
                    let inv = inv_mod(vec[pivot], p);
                    for v in vec.iter_mut() {
                        *v = mul_mod(*v, inv, p);
                    }
                    for c in comb.iter_mut() {
                        *c = mul_mod(*c, inv, p);
                    }
                    reduced.push((pivot, vec, comb));
                }
                None => {
                    // comb records the dependency sum_j comb[j] A^j = 0;
                    // normalize so the degree-k coefficient is 1.
                    let lead = comb[k];
                    debug_assert!(lead != 0);
                    let inv = inv_mod(lead, p);
                    let coeffs: Vec<u64> = comb[..=k].iter().map(|&c| mul_mod(c, inv, p)).collect();
                    return PolyFp::from_coeffs(p, coeffs);
                }
            }
            power = power.mul(self).unwrap();
        }
        unreachable!("dependency must appear by degree n")
    }
}

/// The antidiagonal sign matrix with alternating entries, used to make
/// transpose-inverse fix the standard pinning: J has (-1)^(i-1) in row i,
/// column n+1-i (1-based).
pub fn matrix_j(p: u64, n: usize) -> Result<MatrixFq, MatError> {
    MatrixFq::from_fn(p, n, |i, j| {
        if i + j == n - 1 {
            if i % 2 == 0 {
                1
            } else {
                p - 1
            }
        } else {
            0
        }
    })
}

/// The twist g -> J (g^T)^(-1) J^(-1): an involution of GL_n fixing the
/// upper-triangular subgroup setup and inducing the diagram reversal.
pub fn flip_twist(g: &MatrixFq) -> Result<MatrixFq, MatError> {
    let j = matrix_j(g.modulus(), g.size())?;
    let jinv = j.inverse()?;
    j.mul(&g.transpose().inverse()?)?.mul(&jinv)
}

/// Bruhat decomposition g = u1 * P t * u2 relative to the upper-triangular
/// Borel subgroup: u1 upper unitriangular, P the permutation matrix of perm,
/// t diagonal, and u2 upper unitriangular supported on the inversion slots
/// of perm (entries (j, j') with j < j' and perm[j] > perm[j']).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruhatFactors {
    pub u1: MatrixFq,
    pub perm: Vec<usize>,
    pub torus: Vec<u64>,
    pub u2: MatrixFq,
}

impl BruhatFactors {
    /// The cell's Weyl group element, as a type A element of rank n - 1.
    pub fn weyl_element(
        &self,
    ) -> Result<crate::coxeter::WeylElement, crate::coxeter::CoxeterError> {
        let datum = crate::coxeter::CoxeterDatum::shared(
            crate::coxeter::Family::A,
            self.perm.len().saturating_sub(1),
        )?;
        let images: Vec<i16> = self.perm.iter().map(|&i| (i + 1) as i16).collect();
        crate::coxeter::WeylElement::from_signed_images(&datum, images)
    }

    /// Number of inversions of the permutation, which is the cell length.
    pub fn length(&self) -> usize {
        let n = self.perm.len();
        let mut inv = 0;
        for j in 0..n {
            for j2 in j + 1..n {
                if self.perm[j] > self.perm[j2] {
                    inv += 1;
                }
            }
        }
        inv
    }

    pub fn reconstruct(&self) -> Result<MatrixFq, MatError> {
        let p = self.u1.modulus();
        let pm = MatrixFq::permutation(p, &self.perm)?;
        let t = MatrixFq::diagonal(p, &self.torus)?;
        self.u1.mul(&pm)?.mul(&t)?.mul(&self.u2)
    }
}

/// Full Bruhat factorization. Errors on singular input.
pub fn bruhat_word(g: &MatrixFq) -> Result<BruhatFactors, MatError> {
    let n = g.size();
    let p = g.modulus();
    if !g.is_invertible() {
        return Err(MatError::Singular);
    }
    let mut a = g.clone();
    // Row operations applied on the left accumulate into l, column
    // operations applied on the right into r; both stay unitriangular.
    let mut l = MatrixFq::identity(p, n)?;
    let mut r = MatrixFq::identity(p, n)?;
    let mut perm = vec![usize::MAX; n];
    let mut is_pivot_row = vec![false; n];
    for (col, perm_slot) in perm.iter_mut().enumerate() {
        // The pivot of this column is its lowest nonzero entry in a row not
        // yet claimed; this choice is what makes the permutation the Bruhat
        // one.
        let row = (0..n)
            .rev()
            .find(|&i| !is_pivot_row[i] && a.get(i, col) != 0)
            .expect("invertible matrix has a pivot in every column");
        *perm_slot = row;
        is_pivot_row[row] = true;
        let pv_inv = inv_mod(a.get(row, col), p);
        // Clear the column above the pivot with upper row operations.
        for i in 0..row {
            let c = a.get(i, col);
            if c == 0 {
                continue;
            }
            let factor = mul_mod(c, pv_inv, p);
            for j in 0..n {
                let delta = mul_mod(factor, a.get(row, j), p);
                a.set(i, j, sub_mod(a.get(i, j), delta, p));
                let dl = mul_mod(factor, l.get(row, j), p);
                l.set(i, j, sub_mod(l.get(i, j), dl, p));
            }
        }
        // Clear the pivot row to the right with upper column operations.
        for j2 in col + 1..n {
            let c = a.get(row, j2);
            if c == 0 {
                continue;
            }
            let factor = mul_mod(c, pv_inv, p);
            for i in 0..n {
                let delta = mul_mod(factor, a.get(i, col), p);
                a.set(i, j2, sub_mod(a.get(i, j2), delta, p));
                let dr = mul_mod(factor, r.get(i, col), p);
                r.set(i, j2, sub_mod(r.get(i, j2), dr, p));
            }
        }
    }
    // Now l * g * r is the monomial matrix a, so g = l^-1 * a * r^-1.
    let torus: Vec<u64> = (0..n).map(|j| a.get(perm[j], j)).collect();
    let u1_raw = l.inverse()?;
    let u2_raw = r.inverse()?;
    // Split u2_raw = x * y where x lives on non-inversion slots and y on
    // inversion slots of perm; solve level by level in j' - j.
    let mut x = MatrixFq::identity(p, n)?;
    let mut y = MatrixFq::identity(p, n)?;
    for level in 1..n {
        for j in 0..n - level {
            let j2 = j + level;
            let mut acc = u2_raw.get(j, j2);
            for k in j + 1..j2 {
                let prod = mul_mod(x.get(j, k), y.get(k, j2), p);
                acc = sub_mod(acc, prod, p);
            }
            if perm[j] > perm[j2] {
                y.set(j, j2, acc);
            } else {
                x.set(j, j2, acc);
            }
        }
    }
    // Absorb the non-inversion part into u1: P t x (t x)^-1-conjugated stays
    // upper because x only occupies slots the permutation keeps upper.
    let pm = MatrixFq::permutation(p, &perm)?;
    let t = MatrixFq::diagonal(p, &torus)?;
    let tinv = MatrixFq::diagonal(p, &torus.iter().map(|&v| inv_mod(v, p)).collect::<Vec<_>>())?;
    let conj = pm.mul(&t)?.mul(&x)?.mul(&tinv)?.mul(&pm.inverse()?)?;
    let u1 = u1_raw.mul(&conj)?;
    debug_assert!(u1.is_upper_unitriangular());
    Ok(BruhatFactors {
        u1,
        perm,
        torus,
        u2: y,
    })
}

/// Just the Bruhat cell of g: the permutation with P e_j = e_{perm[j]}.
pub fn bruhat_perm(g: &MatrixFq) -> Result<Vec<usize>, MatError> {
    let n = g.size();
    let p = g.modulus();
    if !g.is_invertible() {
        return Err(MatError::Singular);
    }
    let mut a = g.clone();
    let mut perm = vec![usize::MAX; n];
    let mut is_pivot_row = vec![false; n];
    for (col, perm_slot) in perm.iter_mut().enumerate() {
        let row = (0..n)
            .rev()
            .find(|&i| !is_pivot_row[i] && a.get(i, col) != 0)
            .expect("invertible matrix has a pivot in every column");
        *perm_slot = row;
        is_pivot_row[row] = true;
        let pv_inv = inv_mod(a.get(row, col), p);
        for i in 0..row {
            let c = a.get(i, col);
            if c == 0 {
                continue;
            }
            let factor = mul_mod(c, pv_inv, p);
            // Only columns to the right matter for later pivots.
            for j in col..n {
                let delta = mul_mod(factor, a.get(row, j), p);
                a.set(i, j, sub_mod(a.get(i, j), delta, p));
            }
        }
    }
    Ok(perm)
}

/// Dense univariate polynomial over F_p, no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolyFp {
    p: u64,
    coeffs: Vec<u64>,
}

impl fmt::Display for PolyFp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if k == 0 || c != 1 {
                write!(f, "{c}")?;
                if k > 0 {
                    write!(f, "*")?;
                }
            }
            if k > 0 {
                write!(f, "x")?;
                if k > 1 {
                    write!(f, "^{k}")?;
                }
            }
        }
        Ok(())
    }
}

impl PolyFp {
    pub fn zero(p: u64) -> PolyFp {
        PolyFp {
            p,
            coeffs: Vec::new(),
        }
    }

    pub fn constant(p: u64, c: u64) -> PolyFp {
        PolyFp::from_coeffs(p, vec![c])
    }

    pub fn x(p: u64) -> PolyFp {
        PolyFp::from_coeffs(p, vec![0, 1])
    }

    pub fn from_coeffs(p: u64, mut coeffs: Vec<u64>) -> PolyFp {
        for c in coeffs.iter_mut() {
            *c %= p;
        }
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        PolyFp { p, coeffs }
    }

    /// Monic polynomial with the given roots, with multiplicity.
    pub fn from_roots(p: u64, roots: &[u64]) -> PolyFp {
        let mut acc = PolyFp::constant(p, 1);
        for &r in roots {
            let lin = PolyFp::from_coeffs(p, vec![sub_mod(0, r, p), 1]);
            acc = acc.mul(&lin);
        }
        acc
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> u64 {
        self.coeffs.get(k).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last() == Some(&1)
    }

    pub fn neg(&self) -> PolyFp {
        PolyFp::from_coeffs(
            self.p,
            self.coeffs.iter().map(|&c| sub_mod(0, c, self.p)).collect(),
        )
    }

    pub fn add(&self, other: &PolyFp) -> PolyFp {
        assert_eq!(self.p, other.p);
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0u64; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] = add_mod(out[i], c, self.p);
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            out[i] = add_mod(out[i], c, self.p);
        }
        PolyFp::from_coeffs(self.p, out)
    }

    pub fn sub(&self, other: &PolyFp) -> PolyFp {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &PolyFp) -> PolyFp {
        assert_eq!(self.p, other.p);
        if self.is_zero() || other.is_zero() {
            return PolyFp::zero(self.p);
        }
        let mut out = vec![0u64; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = (out[i + j] + a * b) % self.p;
            }
        }
        PolyFp::from_coeffs(self.p, out)
    }

    pub fn eval(&self, x: u64) -> u64 {
        let mut acc = 0u64;
        for &c in self.coeffs.iter().rev() {
            acc = (acc * (x % self.p) + c) % self.p;
        }
        acc
    }

    pub fn derivative(&self) -> PolyFp {
        let coeffs: Vec<u64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| mul_mod(c, k as u64 % self.p, self.p))
            .collect();
        PolyFp::from_coeffs(self.p, coeffs)
    }

    /// Quotient and remainder; the divisor must be nonzero.
    pub fn divmod(&self, divisor: &PolyFp) -> (PolyFp, PolyFp) {
        assert_eq!(self.p, divisor.p);
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let p = self.p;
        let dd = divisor.coeffs.len();
        if self.coeffs.len() < dd {
            return (PolyFp::zero(p), self.clone());
        }
        let lead_inv = inv_mod(*divisor.coeffs.last().unwrap(), p);
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0u64; self.coeffs.len() - dd + 1];
        for k in (0..quot.len()).rev() {
            let c = mul_mod(rem[k + dd - 1], lead_inv, p);
            if c == 0 {
                continue;
            }
            quot[k] = c;
            for (i, &dc) in divisor.coeffs.iter().enumerate() {
                rem[k + i] = sub_mod(rem[k + i], mul_mod(c, dc, p), p);
            }
        }
        (PolyFp::from_coeffs(p, quot), PolyFp::from_coeffs(p, rem))
    }

    pub fn divides(&self, other: &PolyFp) -> bool {
        other.divmod(self).1.is_zero()
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &PolyFp) -> PolyFp {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.divmod(&b).1;
            a = b;
            b = r;
        }
        if a.is_zero() {
            return a;
        }
        let lead_inv = inv_mod(*a.coeffs.last().unwrap(), a.p);
        PolyFp::from_coeffs(
            a.p,
            a.coeffs
                .iter()
                .map(|&c| mul_mod(c, lead_inv, a.p))
                .collect(),
        )
    }

    pub fn is_squarefree(&self) -> bool {
        if self.is_zero() {
            return false;
        }
        let g = self.gcd(&self.derivative());
        g.degree() == Some(0)
    }

    /// Roots in F_p by scanning the field, with multiplicities, ascending.
    pub fn roots_with_multiplicity(&self) -> Vec<(u64, usize)> {
        let mut out = Vec::new();
        if self.is_zero() {
            return out;
        }
        for r in 0..self.p {
            if self.eval(r) != 0 {
                continue;
            }
            let lin = PolyFp::from_coeffs(self.p, vec![sub_mod(0, r, self.p), 1]);
            let mut rest = self.clone();
            let mut mult = 0;
            loop {
                let (q, rem) = rest.divmod(&lin);
                if !rem.is_zero() {
                    break;
                }
                mult += 1;
                rest = q;
            }
            out.push((r, mult));
        }
        out
    }

    /// self^e mod m, by repeated squaring.
    fn powmod(&self, mut e: u128, m: &PolyFp) -> PolyFp {
        let mut base = self.divmod(m).1;
        let mut acc = PolyFp::constant(self.p, 1);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).divmod(m).1;
            }
            base = base.mul(&base).divmod(m).1;
            e >>= 1;
        }
        acc
    }

    /// Irreducibility over F_p by Rabin's criterion: x^(p^d) = x mod f, and
    /// for each prime divisor q of d, gcd(x^(p^(d/q)) - x, f) is constant.
    pub fn is_irreducible(&self) -> bool {
        let Some(d) = self.degree() else { return false };
        if d == 0 {
            return false;
        }
        if d == 1 {
            return true;
        }
        let p = self.p;
        let x = PolyFp::x(p);
        let frob_full = x.powmod((p as u128).pow(d as u32), self);
        if frob_full.sub(&x).divmod(self).1 != PolyFp::zero(p) {
            return false;
        }
        let mut prime_divs = Vec::new();
        let mut m = d;
        let mut q = 2;
        while q * q <= m {
            if m % q == 0 {
                prime_divs.push(q);
                while m % q == 0 {
                    m /= q;
                }
            }
            q += 1;
        }
        if m > 1 {
            prime_divs.push(m);
        }
        for q in prime_divs {
            let e = (p as u128).pow((d / q) as u32);
            let fr = x.powmod(e, self);
            let g = fr.sub(&x).gcd(self);
            if g.degree() != Some(0) {
                return false;
            }
        }
        true
    }

    /// Companion matrix of a monic polynomial of degree >= 1.
    pub fn companion(&self) -> Result<MatrixFq, MatError> {
        assert!(self.is_monic(), "companion matrix needs a monic polynomial");
        let n = self.degree().unwrap();
        assert!(n >= 1);
        MatrixFq::from_fn(self.p, n, |i, j| {
            if j + 1 == n {
                sub_mod(0, self.coeff(i), self.p)
            } else if i == j + 1 {
                1
            } else {
                0
            }
        })
    }
}

/// First irreducible monic polynomial of the given degree, in lexicographic
/// order of the coefficient tuple (constant term first). Deterministic per
/// (p, degree), so representatives chosen this way are reproducible.
pub fn smallest_irreducible(p: u64, degree: usize) -> Result<PolyFp, MatError> {
    if degree == 0 {
        return Err(MatError::NoIrreducible(0));
    }
    let mut lower = vec![0u64; degree];
    loop {
        let mut coeffs = lower.clone();
        coeffs.push(1);
        let f = PolyFp::from_coeffs(p, coeffs);
        if f.is_irreducible() {
            return Ok(f);
        }
        // Odometer increment over the lower coefficients.
        let mut k = 0;
        loop {
            if k == degree {
                return Err(MatError::NoIrreducible(degree));
            }
            lower[k] += 1;
            if lower[k] < p {
                break;
            }
            lower[k] = 0;
            k += 1;
        }
    }
}
