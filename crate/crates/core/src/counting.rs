//! Exact point counts over prime fields and exact polynomial fitting.
//!
//! Three counting engines feed the verification harness: tallies of a
//! twisted conjugation orbit across Bruhat cells, sweeps of flag coset
//! representatives for Lusztig variety counts, and sweeps of the opposite
//! unipotent subgroup for the twisted cell counts that the Hecke algebra
//! predicts. Count series across primes are then interpolated exactly over
//! the rationals, with an overdetermination point so that "is a polynomial
//! of this degree" is a falsifiable claim rather than an assumption.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::chevalley::{
    self, flag_rep, flag_slots, orbit, ChevError, GroupSpec, RegularityCertificate, RegularityKind,
    Twist, TwistedClassOrbit,
};
use crate::coxeter::{CoxeterError, WeylElement};
use crate::matfq::{
    add_mod, bruhat_perm, inv_mod, matrix_j, mul_mod, sub_mod, MatError, MatrixFq, PolyFp,
};

#[derive(Debug, thiserror::Error)]
pub enum CountError {
    #[error("sweep of {total} matrices exceeds the cap of {cap}")]
    SweepCap { total: u128, cap: u128 },
    #[error("series '{quantity}' has {got} points but needs at least {needed}")]
    InsufficientPoints {
        quantity: String,
        needed: usize,
        got: usize,
    },
    #[error(
        "series '{quantity}' is not a polynomial of degree at most {bound} at the sampled \
         primes: at p = {prime} the fit predicts {expected} but the count is {actual}"
    )]
    NotPolynomial {
        quantity: String,
        bound: usize,
        prime: u64,
        expected: BigRational,
        actual: u128,
    },
    #[error("class predicate unsupported: {0}")]
    PredicateUnsupported(String),
    #[error("operation needs an untwisted group, got {0}")]
    NeedsUntwisted(String),
    #[error("prime family is invalid: {0}")]
    BadFamily(String),
    #[error(transparent)]
    Chev(#[from] ChevError),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
}

/// Weyl element of type A as a 0-based permutation, perm[j] = w(j) - 1.
pub fn weyl_to_perm(w: &WeylElement) -> Vec<usize> {
    w.images().iter().map(|&i| (i - 1) as usize).collect()
}

/// The inverse bridge: a 0-based permutation as a Weyl element.
pub fn perm_to_weyl(
    datum: &std::sync::Arc<crate::coxeter::CoxeterDatum>,
    perm: &[usize],
) -> Result<WeylElement, CoxeterError> {
    let images: Vec<i16> = perm.iter().map(|&i| (i + 1) as i16).collect();
    WeylElement::from_signed_images(datum, images)
}

fn merge_tallies(
    mut a: BTreeMap<Vec<usize>, u128>,
    b: BTreeMap<Vec<usize>, u128>,
) -> BTreeMap<Vec<usize>, u128> {
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

/// Tally of a full orbit across Bruhat cells, keyed by 0-based permutation.
pub fn class_cell_counts(o: &TwistedClassOrbit) -> Result<BTreeMap<Vec<usize>, u128>, CountError> {
    let tally = o
        .member_codes()
        .par_iter()
        .map(|&code| {
            let m = MatrixFq::unpack_u128(o.spec().p, o.spec().n, code)?;
            let perm = bruhat_perm(&m)?;
            let mut t = BTreeMap::new();
            t.insert(perm, 1u128);
            Ok::<_, CountError>(t)
        })
        .try_reduce(BTreeMap::new, |a, b| Ok(merge_tallies(a, b)))?;
    Ok(tally)
}

/// Number of orbit members inside the Bruhat cell of w.
pub fn count_class_cell(o: &TwistedClassOrbit, w: &WeylElement) -> Result<u128, CountError> {
    let tally = class_cell_counts(o)?;
    Ok(tally.get(&weyl_to_perm(w)).copied().unwrap_or(0))
}

/// One unit of a flag sweep: a contiguous index range inside one cell.
struct SweepUnit {
    perm: Vec<usize>,
    slots: Vec<(usize, usize)>,
    start: u128,
    end: u128,
}

fn flag_work_units(p: u64, n: usize) -> Vec<SweepUnit> {
    const CHUNK: u128 = 1 << 14;
    let mut units = Vec::new();
    for perm in chevalley::all_permutations(n) {
        let slots = flag_slots(&perm);
        let size = (p as u128).pow(slots.len() as u32);
        let mut start = 0;
        while start < size {
            let end = (start + CHUNK).min(size);
            units.push(SweepUnit {
                perm: perm.clone(),
                slots: slots.clone(),
                start,
                end,
            });
            start = end;
        }
    }
    units
}

/// Tallies bruhat_word(g^(-1) h twist(g)) over one flag representative per
/// coset of B^F, for all Weyl elements in a single pass.
pub fn lusztig_cell_counts(
    spec: &GroupSpec,
    h: &MatrixFq,
    cap: u128,
) -> Result<BTreeMap<Vec<usize>, u128>, CountError> {
    if !spec.contains(h) {
        return Err(ChevError::NotInGroup(spec.label()).into());
    }
    let total = spec.num_flags();
    if total > cap {
        return Err(CountError::SweepCap { total, cap });
    }
    let p = spec.p;
    let n = spec.n;
    // For the flip twist, g -> J (g^T)^(-1) J^(-1) lets the sweep reuse the
    // inverse it already needs: x = g^(-1) h J (g^(-1))^T J^(-1).
    let (h_left, j_inv) = match spec.twist {
        Twist::Untwisted => (h.clone(), None),
        Twist::Flip => {
            let j = matrix_j(p, n)?;
            (h.mul(&j)?, Some(j.inverse()?))
        }
    };
    let tally = flag_work_units(p, n)
        .into_par_iter()
        .map(|unit| {
            let mut local: BTreeMap<Vec<usize>, u128> = BTreeMap::new();
            for index in unit.start..unit.end {
                let g = flag_rep(p, &unit.perm, &unit.slots, index)?;
                let gi = g.inverse()?;
                let x = match &j_inv {
                    None => gi.mul(&h_left)?.mul(&g)?,
                    Some(jinv) => gi.mul(&h_left)?.mul(&gi.transpose())?.mul(jinv)?,
                };
                *local.entry(bruhat_perm(&x)?).or_insert(0) += 1;
            }
            Ok::<_, CountError>(local)
        })
        .try_reduce(BTreeMap::new, |a, b| Ok(merge_tallies(a, b)))?;
    Ok(tally)
}

/// Number of flags g B with g^(-1) h twist(g) in the Bruhat cell of w.
pub fn count_lusztig(
    spec: &GroupSpec,
    h: &MatrixFq,
    w: &WeylElement,
    cap: u128,
) -> Result<u128, CountError> {
    let tally = lusztig_cell_counts(spec, h, cap)?;
    Ok(tally.get(&weyl_to_perm(w)).copied().unwrap_or(0))
}

/// Tallies bruhat_word((w')^(-1) u twist(w')) over all u in the lower
/// unitriangular subgroup, for all Weyl elements in a single pass.
pub fn unipotent_cell_counts(
    spec: &GroupSpec,
    wprime: &WeylElement,
    cap: u128,
) -> Result<BTreeMap<Vec<usize>, u128>, CountError> {
    let p = spec.p;
    let n = spec.n;
    let free = n * (n - 1) / 2;
    let total = (p as u128).pow(free as u32);
    if total > cap {
        return Err(CountError::SweepCap { total, cap });
    }
    let wp = MatrixFq::permutation(p, &weyl_to_perm(wprime))?;
    let left = wp.inverse()?;
    let right = spec.twist_apply(&wp)?;
    let slots: Vec<(usize, usize)> = {
        let mut s = Vec::with_capacity(free);
        for i in 0..n {
            for j in 0..i {
                s.push((i, j));
            }
        }
        s
    };
    let tally = (0..total)
        .into_par_iter()
        .map(|mut index| {
            let mut u = MatrixFq::identity(p, n)?;
            for &(i, j) in &slots {
                u.set(i, j, (index % p as u128) as u64);
                index /= p as u128;
            }
            let x = left.mul(&u)?.mul(&right)?;
            let mut local = BTreeMap::new();
            local.insert(bruhat_perm(&x)?, 1u128);
            Ok::<_, CountError>(local)
        })
        .try_reduce(BTreeMap::new, |a, b| Ok(merge_tallies(a, b)))?;
    Ok(tally)
}

/// Size of the twisted-translate slice of U^- inside the Bruhat cell of w.
pub fn count_unipotent_cell(
    spec: &GroupSpec,
    w: &WeylElement,
    wprime: &WeylElement,
    cap: u128,
) -> Result<u128, CountError> {
    let tally = unipotent_cell_counts(spec, wprime, cap)?;
    Ok(tally.get(&weyl_to_perm(w)).copied().unwrap_or(0))
}

/// The five integers of the orbit count identity
/// |Y^F| * |B^F| * |orbit| = |G^F| * |orbit inside BwB|, checked exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitCellIdentity {
    pub lusztig_count: u128,
    pub borel_order: u128,
    pub orbit_size: u128,
    pub group_order: u128,
    pub class_cell_count: u128,
}

impl OrbitCellIdentity {
    pub fn lhs(&self) -> u128 {
        self.lusztig_count * self.borel_order * self.orbit_size
    }

    pub fn rhs(&self) -> u128 {
        self.group_order * self.class_cell_count
    }

    pub fn holds(&self) -> bool {
        self.lhs() == self.rhs()
    }
}

impl fmt::Display for OrbitCellIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} * {} * {} = {} vs {} * {} = {}",
            self.lusztig_count,
            self.borel_order,
            self.orbit_size,
            self.lhs(),
            self.group_order,
            self.class_cell_count,
            self.rhs()
        )
    }
}

/// Assembles both sides of the orbit count identity at one (orbit, w) pair.
pub fn kawanaka_check(
    spec: &GroupSpec,
    o: &TwistedClassOrbit,
    w: &WeylElement,
    cap: u128,
) -> Result<OrbitCellIdentity, CountError> {
    Ok(OrbitCellIdentity {
        lusztig_count: count_lusztig(spec, o.base(), w, cap)?,
        borel_order: spec.borel_order(),
        orbit_size: o.size(),
        group_order: spec.group_order(),
        class_cell_count: count_class_cell(o, w)?,
    })
}

/// Membership test for the geometric conjugacy class of a regular untwisted
/// element: the characteristic polynomial must match, and every repeated
/// eigenvalue must carry a single Jordan block, observable as
/// rank(x - lambda) = n - 1. The determinant is pinned by the polynomial's
/// constant term, so no separate determinant condition is needed.
#[derive(Debug, Clone)]
pub struct ClassPredicate {
    n: usize,
    p: u64,
    target: PolyFp,
    repeated_roots: Vec<u64>,
}

impl ClassPredicate {
    pub fn regular(h: &MatrixFq, spec: &GroupSpec) -> Result<ClassPredicate, CountError> {
        if spec.twist != Twist::Untwisted {
            return Err(CountError::NeedsUntwisted(spec.label()));
        }
        let cert = chevalley::is_regular(h, spec)?;
        if !cert.kind.is_regular() {
            return Err(CountError::PredicateUnsupported(format!(
                "class membership by characteristic polynomial needs a regular element: {}",
                cert.evidence
            )));
        }
        let target = h.charpoly();
        let roots = target.roots_with_multiplicity();
        // Split off the rational-root part; whatever remains must be
        // squarefree, otherwise a repeated non-rational eigenvalue would
        // need rank conditions over an extension field.
        let mut rational_part = PolyFp::constant(spec.p, 1);
        for &(root, mult) in &roots {
            for _ in 0..mult {
                rational_part = rational_part.mul(&PolyFp::from_roots(spec.p, &[root]));
            }
        }
        let (quot, rem) = target.divmod(&rational_part);
        debug_assert!(rem.degree().is_none());
        if quot.degree().unwrap_or(0) > 0 {
            let d = quot.derivative();
            let repeated_irrational =
                d.degree().is_none() || quot.gcd(&d).degree().unwrap_or(0) > 0;
            if repeated_irrational {
                return Err(CountError::PredicateUnsupported(format!(
                    "characteristic polynomial {target} has a repeated factor without \
                     rational roots"
                )));
            }
        }
        Ok(ClassPredicate {
            n: spec.n,
            p: spec.p,
            target,
            repeated_roots: roots
                .iter()
                .filter(|&&(_, m)| m >= 2)
                .map(|&(r, _)| r)
                .collect(),
        })
    }

    pub fn target(&self) -> &PolyFp {
        &self.target
    }

    /// Constant term of the target polynomial, which forces the determinant.
    pub fn constant_term(&self) -> u64 {
        self.target.coeff(0)
    }

    pub fn matches(&self, x: &MatrixFq) -> Result<bool, CountError> {
        if x.charpoly() != self.target {
            return Ok(false);
        }
        self.rank_conditions(x)
    }

    fn rank_conditions(&self, x: &MatrixFq) -> Result<bool, CountError> {
        for &root in &self.repeated_roots {
            let shifted = x.sub(&MatrixFq::identity(self.p, self.n)?.scalar_mul(root))?;
            if shifted.rank() != self.n - 1 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Determinant of the submatrix selected by the row and column bitmasks,
/// by cofactor expansion without allocation. Masks must have equal weight.
fn det_masked(p: u64, n: usize, m: &[u64], rows: u32, cols: u32) -> u64 {
    if rows == 0 {
        return 1 % p;
    }
    let i = rows.trailing_zeros() as usize;
    let rest_rows = rows & !(1 << i);
    let mut acc = 0u64;
    let mut negate = false;
    let mut c = cols;
    while c != 0 {
        let j = c.trailing_zeros() as usize;
        c &= c - 1;
        let a = m[i * n + j];
        if a != 0 {
            let term = mul_mod(a, det_masked(p, n, m, rest_rows, cols & !(1 << j)), p);
            acc = if negate {
                sub_mod(acc, term, p)
            } else {
                add_mod(acc, term, p)
            };
        }
        negate = !negate;
    }
    acc
}

/// Sums of principal minors e_1..e_n of a flat row-major matrix; the
/// characteristic polynomial is x^n - e_1 x^(n-1) + e_2 x^(n-2) - ...
fn principal_minor_sums(p: u64, n: usize, m: &[u64]) -> Vec<u64> {
    let mut sums = vec![0u64; n + 1];
    for mask in 1u32..(1 << n) {
        let k = mask.count_ones() as usize;
        sums[k] = add_mod(sums[k], det_masked(p, n, m, mask, mask), p);
    }
    sums
}

/// Count of the geometric class of a regular untwisted element inside the
/// Bruhat cell of w, by sweeping the monomial-times-unipotent normal form.
///
/// Every element of BwB is uniquely u * w * t * v with u in the cell's
/// unipotent slice, t diagonal, v upper unitriangular; conjugating by u and
/// reparametrizing v shows the count per (u, t) does not depend on u, so
/// the cell count is p^l(w) times the number of (t, v) pairs with w t v in
/// the class.
/// The constant term of the target polynomial pins the product of the torus
/// entries, removing one torus dimension from the sweep.
pub fn count_geometric_cell(
    spec: &GroupSpec,
    predicate: &ClassPredicate,
    w: &WeylElement,
) -> Result<u128, CountError> {
    if spec.twist != Twist::Untwisted {
        return Err(CountError::NeedsUntwisted(spec.label()));
    }
    let n = spec.n;
    let p = spec.p;
    if n > 4 {
        return Err(CountError::PredicateUnsupported(format!(
            "geometric cell sweep is implemented for sizes up to 4, got {n}"
        )));
    }
    let perm = weyl_to_perm(w);
    let length = flag_slots(&perm).len();
    // Signature of the permutation, as the determinant of its matrix.
    let sign = {
        let mut inversions = 0usize;
        for a in 0..n {
            for b in a + 1..n {
                if perm[a] > perm[b] {
                    inversions += 1;
                }
            }
        }
        if inversions.is_multiple_of(2) {
            1
        } else {
            p - 1
        }
    };
    // det(x) = (-1)^n * constant term, and det(x) = sign(w) * prod(t).
    let det_target = if n.is_multiple_of(2) {
        predicate.constant_term()
    } else {
        sub_mod(0, predicate.constant_term(), p)
    };
    let forced_product = mul_mod(sign, det_target, p);
    if forced_product == 0 {
        return Err(CountError::PredicateUnsupported(
            "target polynomial has zero constant term, so the class is singular".into(),
        ));
    }
    // Expected principal minor sums: e_k = (-1)^k * coeff of x^(n-k).
    let expected_minors: Vec<u64> = (1..=n)
        .map(|k| {
            let c = predicate.target.coeff(n - k);
            if k % 2 == 0 {
                c
            } else {
                sub_mod(0, c, p)
            }
        })
        .collect();
    let free_torus = n - 1;
    let torus_total: u128 = ((p - 1) as u128).pow(free_torus as u32);
    let upper_slots: Vec<(usize, usize)> = {
        let mut s = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                s.push((i, j));
            }
        }
        s
    };
    let v_total: u128 = (p as u128).pow(upper_slots.len() as u32);

    let pair_count: u128 = (0..torus_total)
        .into_par_iter()
        .map(|torus_index| {
            // Decode the free torus entries and force the last one.
            let mut t = vec![1u64; n];
            let mut rest = torus_index;
            let mut prod = 1u64;
            for entry in t.iter_mut().take(free_torus) {
                *entry = 1 + (rest % (p - 1) as u128) as u64;
                rest /= (p - 1) as u128;
                prod = mul_mod(prod, *entry, p);
            }
            t[n - 1] = mul_mod(forced_product, inv_mod(prod, p), p);

            let mut local: u128 = 0;
            let mut m = vec![0u64; n * n];
            for mut v_index in 0..v_total {
                // v entries, unitriangular.
                let mut v = [[0u64; 4]; 4];
                for (j, row) in v.iter_mut().enumerate().take(n) {
                    row[j] = 1;
                }
                for &(i, j) in &upper_slots {
                    v[i][j] = (v_index % p as u128) as u64;
                    v_index /= p as u128;
                }
                // M = P_w * t * v, so row w(j) of M is t_j times row j of v.
                for j in 0..n {
                    for k in 0..n {
                        m[perm[j] * n + k] = mul_mod(t[j], v[j][k], p);
                    }
                }
                // Staged comparison of principal minor sums; the trace
                // check alone removes most candidates.
                let mut trace = 0u64;
                for i in 0..n {
                    trace = add_mod(trace, m[i * n + i], p);
                }
                if trace != expected_minors[0] {
                    continue;
                }
                let minors = principal_minor_sums(p, n, &m);
                if minors[1..] != expected_minors[..] {
                    continue;
                }
                if predicate.repeated_roots.is_empty() {
                    local += 1;
                    continue;
                }
                let full = MatrixFq::from_fn(p, n, |i, j| m[i * n + j])?;
                if predicate.rank_conditions(&full)? {
                    local += 1;
                }
            }
            Ok::<u128, CountError>(local)
        })
        .try_reduce(|| 0u128, |a, b| Ok(a + b))?;

    Ok((p as u128).pow(length as u32) * pair_count)
}

/// Counts of one quantity across primes. Insertion order does not matter;
/// points are kept sorted by prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointCountSeries {
    pub scenario: String,
    pub quantity: String,
    counts: BTreeMap<u64, u128>,
}

impl PointCountSeries {
    pub fn new(scenario: impl Into<String>, quantity: impl Into<String>) -> PointCountSeries {
        PointCountSeries {
            scenario: scenario.into(),
            quantity: quantity.into(),
            counts: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, prime: u64, count: u128) {
        self.counts.insert(prime, count);
    }

    pub fn points(&self) -> impl Iterator<Item = (u64, u128)> + '_ {
        self.counts.iter().map(|(&p, &c)| (p, c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, prime: u64) -> Option<u128> {
        self.counts.get(&prime).copied()
    }
}

/// An exact interpolation result. The zero polynomial has degree None.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FittedPolynomial {
    coefficients: Vec<BigRational>,
    pub degree: Option<usize>,
    pub is_integer_coefficients: bool,
    pub is_monic: bool,
    pub leading_coefficient: BigRational,
}

impl FittedPolynomial {
    /// Coefficients in ascending degree order, highest one nonzero.
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coefficients
    }

    pub fn eval(&self, x: &BigInt) -> BigRational {
        let mut acc = BigRational::zero();
        let xr = BigRational::from_integer(x.clone());
        for c in self.coefficients.iter().rev() {
            acc = acc * &xr + c;
        }
        acc
    }
}

impl fmt::Display for FittedPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coefficients.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coefficients.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let unit_coeff = mag.is_one() && k > 0;
            if !unit_coeff {
                write!(f, "{mag}")?;
            }
            match k {
                0 => {}
                1 => {
                    if !unit_coeff {
                        write!(f, "*")?;
                    }
                    write!(f, "t")?;
                }
                _ => {
                    if !unit_coeff {
                        write!(f, "*")?;
                    }
                    write!(f, "t^{k}")?;
                }
            }
        }
        Ok(())
    }
}

/// Exact Lagrange interpolation through the first degree_bound + 1 points of
/// the series, with every remaining point checked exactly against the fit.
pub fn fit_polynomial(
    series: &PointCountSeries,
    degree_bound: usize,
) -> Result<FittedPolynomial, CountError> {
    let points: Vec<(u64, u128)> = series.points().collect();
    let needed = degree_bound + 2;
    if points.len() < needed {
        return Err(CountError::InsufficientPoints {
            quantity: series.quantity.clone(),
            needed,
            got: points.len(),
        });
    }
    let support = &points[..degree_bound + 1];
    let mut coeffs = vec![BigRational::zero(); degree_bound + 1];
    for (i, &(xi, yi)) in support.iter().enumerate() {
        // Basis numerator prod_{j != i} (X - x_j), times y_i / prod (x_i - x_j).
        let mut basis = vec![BigRational::zero(); degree_bound + 1];
        basis[0] = BigRational::one();
        let mut deg = 0;
        let mut denom = BigRational::one();
        for (j, &(xj, _)) in support.iter().enumerate() {
            if j == i {
                continue;
            }
            let xj_r = BigRational::from_integer(BigInt::from(xj));
            // Multiply the accumulated basis polynomial by (X - x_j),
            // in place from the top coefficient down.
            for k in (0..=deg + 1).rev() {
                let lower = if k > 0 {
                    basis[k - 1].clone()
                } else {
                    BigRational::zero()
                };
                basis[k] = lower - &xj_r * &basis[k];
            }
            deg += 1;
            denom *= BigRational::from_integer(BigInt::from(xi) - BigInt::from(xj));
        }
        let scale = BigRational::from_integer(BigInt::from(yi)) / denom;
        for (c, b) in coeffs.iter_mut().zip(&basis) {
            *c += b * &scale;
        }
    }
    while coeffs.last().is_some_and(|c| c.is_zero()) {
        coeffs.pop();
    }
    let fitted = FittedPolynomial {
        degree: if coeffs.is_empty() {
            None
        } else {
            Some(coeffs.len() - 1)
        },
        is_integer_coefficients: coeffs.iter().all(|c| c.denom().is_one()),
        is_monic: coeffs.last().is_some_and(|c| c.is_one()),
        leading_coefficient: coeffs.last().cloned().unwrap_or_else(BigRational::zero),
        coefficients: coeffs,
    };
    // Every point must sit on the curve, including the ones beyond the
    // interpolation support.
    for &(x, y) in &points {
        let predicted = fitted.eval(&BigInt::from(x));
        if predicted != BigRational::from_integer(BigInt::from(y)) {
            return Err(CountError::NotPolynomial {
                quantity: series.quantity.clone(),
                bound: degree_bound,
                prime: x,
                expected: predicted,
                actual: y,
            });
        }
    }
    Ok(fitted)
}

/// Empirical regularity certificate for a twisted element family: the
/// centralizer orders across primes must fit a polynomial whose degree is
/// the dimension of the twist-fixed torus.
pub fn twisted_regularity_certificate(
    family: &[(GroupSpec, MatrixFq)],
    cap: usize,
) -> Result<RegularityCertificate, CountError> {
    let Some((first, _)) = family.first() else {
        return Err(CountError::BadFamily("no primes supplied".into()));
    };
    if first.twist == Twist::Untwisted {
        return Err(CountError::BadFamily(
            "untwisted regularity is certified from a single matrix".into(),
        ));
    }
    let mut series = PointCountSeries::new("regularity", "twisted centralizer order");
    for (spec, h) in family {
        if (spec.kind, spec.n, spec.twist) != (first.kind, first.n, first.twist) {
            return Err(CountError::BadFamily(format!(
                "mixed group shapes: {} vs {}",
                first.label(),
                spec.label()
            )));
        }
        if series.get(spec.p).is_some() {
            return Err(CountError::BadFamily(format!("duplicate prime {}", spec.p)));
        }
        series.insert(spec.p, orbit(h, spec, cap)?.centralizer_order());
    }
    let expected = first.dim_torus_twisted_fixed();
    let orders: Vec<(u64, u128)> = series.points().collect();
    match fit_polynomial(&series, expected) {
        Ok(fit) if fit.degree == Some(expected) => Ok(RegularityCertificate {
            kind: RegularityKind::TwistedRegular,
            evidence: format!(
                "centralizer orders {orders:?} fit {fit}, of degree {expected} matching the \
                 twist-fixed torus"
            ),
        }),
        Ok(fit) => Ok(RegularityCertificate {
            kind: RegularityKind::NotRegular,
            evidence: format!(
                "centralizer orders {orders:?} fit {fit}, below the twist-fixed torus \
                 dimension {expected}; the family is degenerate"
            ),
        }),
        Err(CountError::NotPolynomial { prime, actual, .. }) => Ok(RegularityCertificate {
            kind: RegularityKind::NotRegular,
            evidence: format!(
                "centralizer orders {orders:?} do not lie on a degree-{expected} polynomial \
                 (first mismatch at p = {prime}, count {actual}); the centralizer dimension \
                 exceeds the twist-fixed torus"
            ),
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chevalley::{GroupKind, DEFAULT_ORBIT_CAP};
    use crate::coxeter::{enumerate_group, CoxeterDatum, DiagramAutomorphism, Family};
    use crate::hecke::kawanaka_coefficient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CAP: u128 = 10_000_000;

    fn gl(n: usize, p: u64) -> GroupSpec {
        GroupSpec::new(GroupKind::GeneralLinear, n, p, Twist::Untwisted).unwrap()
    }

    fn sl(n: usize, p: u64) -> GroupSpec {
        GroupSpec::new(GroupKind::SpecialLinear, n, p, Twist::Untwisted).unwrap()
    }

    fn sl_flip(n: usize, p: u64) -> GroupSpec {
        GroupSpec::new(GroupKind::SpecialLinear, n, p, Twist::Flip).unwrap()
    }

    fn weyl_elements(spec: &GroupSpec) -> Vec<WeylElement> {
        enumerate_group(&spec.weyl_datum().unwrap(), 10_000).unwrap()
    }

    #[test]
    fn class_cell_tallies_match_frozen_example() {
        let spec = gl(2, 3);
        let h = MatrixFq::diagonal(3, &[1, 2]).unwrap();
        let o = orbit(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        let tally = class_cell_counts(&o).unwrap();
        assert_eq!(tally.get(&vec![0, 1]), Some(&6));
        assert_eq!(tally.get(&vec![1, 0]), Some(&6));
        let total: u128 = tally.values().sum();
        assert_eq!(total, o.size());
    }

    #[test]
    fn lusztig_counts_match_frozen_example_and_partition() {
        let spec = gl(2, 3);
        let h = MatrixFq::diagonal(3, &[1, 2]).unwrap();
        let tally = lusztig_cell_counts(&spec, &h, CAP).unwrap();
        // The two eigenflags sit in the identity cell; the other two flags
        // land in the long cell.
        assert_eq!(tally.get(&vec![0, 1]), Some(&2));
        assert_eq!(tally.get(&vec![1, 0]), Some(&2));
        let total: u128 = tally.values().sum();
        assert_eq!(total, spec.num_flags());
    }

    #[test]
    fn unipotent_cell_counts_match_frozen_example_and_partition() {
        let spec = gl(2, 3);
        let w_all = weyl_elements(&spec);
        let e = &w_all[0];
        assert_eq!(e.length(), 0);
        let s = &w_all[1];
        let tally = unipotent_cell_counts(&spec, e, CAP).unwrap();
        // Of the 3 lower unitriangular matrices only the identity lies in B.
        assert_eq!(tally.get(&weyl_to_perm(e)), Some(&1));
        assert_eq!(tally.get(&weyl_to_perm(s)), Some(&2));
        let total: u128 = tally.values().sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn hecke_bridge_holds_for_small_groups() {
        // count_unipotent_cell = kawanaka_coefficient(p) * p^l(w'), for every
        // pair (w, w'), at a couple of small scenarios per twist.
        let cases: Vec<GroupSpec> =
            vec![gl(2, 3), gl(2, 5), gl(3, 2), sl_flip(3, 2), sl_flip(3, 3)];
        for spec in cases {
            let datum = spec.weyl_datum().unwrap();
            let twist = spec.diagram_twist().unwrap();
            let elements = enumerate_group(&datum, 10_000).unwrap();
            for wprime in &elements {
                let tally = unipotent_cell_counts(&spec, wprime, CAP).unwrap();
                for w in &elements {
                    let count = tally.get(&weyl_to_perm(w)).copied().unwrap_or(0);
                    let coeff = kawanaka_coefficient(w, wprime, &twist).unwrap();
                    let predicted = coeff
                        .eval_u128(spec.p as u128)
                        .expect("bridge coefficients specialize nonnegatively")
                        * (spec.p as u128).pow(wprime.length() as u32);
                    assert_eq!(count, predicted, "{} w={w} w'={wprime}", spec.label());
                }
            }
        }
    }

    #[test]
    fn orbit_count_identity_holds_on_frozen_example() {
        let spec = gl(2, 3);
        let h = MatrixFq::diagonal(3, &[1, 2]).unwrap();
        let o = orbit(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        for w in weyl_elements(&spec) {
            let row = kawanaka_check(&spec, &o, &w, CAP).unwrap();
            assert!(row.holds(), "{row}");
        }
        // Frozen integers for the long cell.
        let s = &weyl_elements(&spec)[1];
        let row = kawanaka_check(&spec, &o, s, CAP).unwrap();
        assert_eq!(
            (
                row.lusztig_count,
                row.borel_order,
                row.orbit_size,
                row.group_order,
                row.class_cell_count
            ),
            (2, 12, 12, 48, 6)
        );
    }

    #[test]
    fn orbit_count_identity_holds_for_central_element() {
        let spec = gl(2, 3);
        let h = MatrixFq::diagonal(3, &[2, 2]).unwrap();
        let o = orbit(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        let e = &weyl_elements(&spec)[0];
        let row = kawanaka_check(&spec, &o, e, CAP).unwrap();
        assert!(row.holds());
        assert_eq!(row.lusztig_count, 4);
        assert_eq!(row.orbit_size, 1);
    }

    #[test]
    fn twisted_lusztig_counts_partition_the_flags() {
        for p in [2u64, 5] {
            let spec = sl_flip(3, p);
            let h = MatrixFq::parse_literal(p, "0 0 1; 1 0 0; 0 1 0").unwrap();
            let tally = lusztig_cell_counts(&spec, &h, CAP).unwrap();
            let total: u128 = tally.values().sum();
            assert_eq!(total, spec.num_flags(), "p = {p}");
        }
    }

    #[test]
    fn principal_minor_charpoly_agrees_with_leibniz_engine() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x636f756e74);
        for p in [2u64, 3, 7, 31] {
            for n in 1..=4usize {
                for _ in 0..40 {
                    let flat: Vec<u64> = (0..n * n).map(|_| rng.gen_range(0..p)).collect();
                    let m = MatrixFq::from_fn(p, n, |i, j| flat[i * n + j]).unwrap();
                    let sums = principal_minor_sums(p, n, &flat);
                    let cp = m.charpoly();
                    for (k, &got) in sums.iter().enumerate().skip(1) {
                        let expect = if k.is_multiple_of(2) {
                            cp.coeff(n - k)
                        } else {
                            sub_mod(0, cp.coeff(n - k), p)
                        };
                        assert_eq!(got, expect, "p={p} n={n} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn geometric_cell_sweep_matches_exhaustive_oracle() {
        // Brute force over all of GL2(F3) and SL2(F5).
        let cases: Vec<(GroupSpec, MatrixFq)> = vec![
            (gl(2, 3), MatrixFq::diagonal(3, &[1, 2]).unwrap()),
            (gl(2, 3), MatrixFq::parse_literal(3, "1 1; 0 1").unwrap()),
            (
                gl(2, 3),
                PolyFp::from_coeffs(3, vec![2, 2, 1]).companion().unwrap(),
            ),
            (sl(2, 5), MatrixFq::parse_literal(5, "1 1; 0 1").unwrap()),
        ];
        for (spec, h) in cases {
            let predicate = ClassPredicate::regular(&h, &spec).unwrap();
            let mut oracle: BTreeMap<Vec<usize>, u128> = BTreeMap::new();
            let p = spec.p;
            for code in 0..(p as u128).pow((spec.n * spec.n) as u32) {
                let m = MatrixFq::unpack_u128(p, spec.n, code).unwrap();
                if !spec.contains(&m) || !predicate.matches(&m).unwrap() {
                    continue;
                }
                *oracle.entry(bruhat_perm(&m).unwrap()).or_insert(0) += 1;
            }
            for w in weyl_elements(&spec) {
                let swept = count_geometric_cell(&spec, &predicate, &w).unwrap();
                let brute = oracle.get(&weyl_to_perm(&w)).copied().unwrap_or(0);
                assert_eq!(swept, brute, "{} w={w}", spec.label());
            }
        }
    }

    #[test]
    fn geometric_cells_sum_to_class_size() {
        // The class size comes from the commutant centralizer, a fully
        // independent engine. For regular elements the geometric class meets
        // the finite group in a single rational class of the ambient general
        // linear group, which may split into several special linear orbits,
        // so the expected size is always computed in the ambient group.
        let cases: Vec<(GroupSpec, MatrixFq)> = vec![
            (gl(2, 7), MatrixFq::diagonal(7, &[1, 2]).unwrap()),
            (
                gl(3, 3),
                PolyFp::from_roots(3, &[1, 1, 2]).companion().unwrap(),
            ),
            (sl(2, 5), MatrixFq::parse_literal(5, "1 1; 0 1").unwrap()),
        ];
        for (spec, h) in cases {
            let predicate = ClassPredicate::regular(&h, &spec).unwrap();
            let mut total = 0u128;
            for w in weyl_elements(&spec) {
                total += count_geometric_cell(&spec, &predicate, &w).unwrap();
            }
            let ambient = gl(spec.n, spec.p);
            let class_size =
                ambient.group_order() / chevalley::regular_centralizer_order(&h, &ambient).unwrap();
            assert_eq!(total, class_size, "{}", spec.label());
        }
    }

    #[test]
    fn geometric_class_of_split_unipotent_sums_over_rational_orbits() {
        // Two rational orbits fuse into one geometric class for SL2; their
        // cell tallies must add up to the independent predicate sweep.
        let spec = sl(2, 5);
        let h = MatrixFq::parse_literal(5, "1 1; 0 1").unwrap();
        let parts = chevalley::geometric_class(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        assert_eq!(parts.len(), 2);
        let predicate = ClassPredicate::regular(&h, &spec).unwrap();
        for w in weyl_elements(&spec) {
            let geometric = count_geometric_cell(&spec, &predicate, &w).unwrap();
            let summed: u128 = parts.iter().map(|o| count_class_cell(o, &w).unwrap()).sum();
            assert_eq!(geometric, summed, "w = {w}");
        }
    }

    #[test]
    fn predicate_rejects_unsupported_shapes() {
        // Repeated irreducible quadratic factor: (x^2 + 1)^2 over F3.
        let spec = gl(4, 3);
        let f = PolyFp::from_coeffs(3, vec![1, 0, 1]);
        let sq = f.mul(&f);
        let h = sq.companion().unwrap();
        // The companion matrix is regular, so the certificate passes, but
        // the rank conditions would need an extension field.
        assert!(matches!(
            ClassPredicate::regular(&h, &spec),
            Err(CountError::PredicateUnsupported(_))
        ));
        // Non-regular elements are rejected outright.
        let id = MatrixFq::identity(3, 2).unwrap();
        assert!(matches!(
            ClassPredicate::regular(&id, &gl(2, 3)),
            Err(CountError::PredicateUnsupported(_))
        ));
        // A fourfold rational eigenvalue in characteristic 2 is fine.
        let spec2 = gl(4, 2);
        let j = PolyFp::from_roots(2, &[1, 1, 1, 1]).companion().unwrap();
        let pred = ClassPredicate::regular(&j, &spec2).unwrap();
        assert!(pred.matches(&j).unwrap());
    }

    #[test]
    fn fit_recovers_linear_and_constant_series() {
        let mut s = PointCountSeries::new("demo", "q minus one");
        for (p, c) in [(2u64, 1u128), (3, 2), (5, 4)] {
            s.insert(p, c);
        }
        let fit = fit_polynomial(&s, 1).unwrap();
        assert_eq!(fit.degree, Some(1));
        assert!(fit.is_monic);
        assert!(fit.is_integer_coefficients);
        assert_eq!(
            fit.coefficients(),
            &[
                BigRational::from_integer(BigInt::from(-1)),
                BigRational::from_integer(BigInt::from(1))
            ]
        );
        assert_eq!(fit.to_string(), "t - 1");

        let mut c = PointCountSeries::new("demo", "constant");
        for p in [2u64, 3, 5] {
            c.insert(p, 7);
        }
        let fit = fit_polynomial(&c, 1).unwrap();
        assert_eq!(fit.degree, Some(0));
        assert!(!fit.is_monic);
        assert_eq!(
            fit.leading_coefficient,
            BigRational::from_integer(BigInt::from(7))
        );
    }

    #[test]
    fn fit_flags_failures_honestly() {
        let mut s = PointCountSeries::new("demo", "too short");
        s.insert(2, 1);
        s.insert(3, 2);
        assert!(matches!(
            fit_polynomial(&s, 1),
            Err(CountError::InsufficientPoints {
                needed: 3,
                got: 2,
                ..
            })
        ));

        let mut s = PointCountSeries::new("demo", "not linear");
        for (p, c) in [(2u64, 1u128), (3, 2), (5, 5)] {
            s.insert(p, c);
        }
        assert!(matches!(
            fit_polynomial(&s, 1),
            Err(CountError::NotPolynomial { prime: 5, .. })
        ));

        let mut z = PointCountSeries::new("demo", "zero");
        for p in [2u64, 3, 5] {
            z.insert(p, 0);
        }
        let fit = fit_polynomial(&z, 1).unwrap();
        assert_eq!(fit.degree, None);
        assert!(fit.leading_coefficient.is_zero());
    }

    #[test]
    fn unipotent_cell_series_fits_the_hecke_polynomial() {
        // The w' = 1 column over several primes must interpolate to exactly
        // the symbolic coefficient from the Hecke engine.
        let datum = CoxeterDatum::shared(Family::A, 2).unwrap();
        let twist = DiagramAutomorphism::identity(&datum);
        let w0 = crate::coxeter::longest_element(&datum);
        let e = WeylElement::identity(&datum);
        let mut series = PointCountSeries::new("demo", "long cell slice of the lower unipotents");
        for p in [2u64, 3, 5, 7, 11] {
            let spec = gl(3, p);
            series.insert(p, count_unipotent_cell(&spec, &w0, &e, CAP).unwrap());
        }
        let fit = fit_polynomial(&series, w0.length()).unwrap();
        let oracle = kawanaka_coefficient(&w0, &e, &twist).unwrap();
        assert_eq!(fit.degree, Some(w0.length()));
        assert!(fit.is_monic);
        let oracle_coeffs: Vec<BigRational> = (0..=w0.length())
            .map(|k| BigRational::from_integer(oracle.coeff(k)))
            .collect();
        assert_eq!(fit.coefficients(), &oracle_coeffs[..]);
    }

    #[test]
    fn lusztig_series_for_split_torus_fits_degree_of_length() {
        // |Y^F| for h = diag(1, 2) in GL2 across primes p >= 3: the long
        // cell count fits a monic degree-1 polynomial.
        let datum = CoxeterDatum::shared(Family::A, 1).unwrap();
        let s = WeylElement::simple(&datum, 1).unwrap();
        let mut series = PointCountSeries::new("demo", "lusztig count at the long element");
        for p in [3u64, 5, 7, 11] {
            let spec = gl(2, p);
            let h = MatrixFq::diagonal(p, &[1, 2]).unwrap();
            series.insert(p, count_lusztig(&spec, &h, &s, CAP).unwrap());
        }
        let fit = fit_polynomial(&series, 1).unwrap();
        assert_eq!(fit.degree, Some(1));
        assert!(fit.is_monic, "long cell count {fit} should be monic");
    }

    #[test]
    fn twisted_certificate_accepts_regular_and_rejects_identity() {
        // Companion matrix of x^3 - x^2 - 1: its twisted centralizer order
        // is 2p at every sampled prime, so the fitted degree matches the
        // one-dimensional twist-fixed torus.
        let family: Vec<(GroupSpec, MatrixFq)> = [2u64, 3, 5, 7]
            .iter()
            .map(|&p| {
                (
                    sl_flip(3, p),
                    MatrixFq::parse_literal(p, "0 0 1; 1 0 0; 0 1 1").unwrap(),
                )
            })
            .collect();
        let cert = twisted_regularity_certificate(&family, DEFAULT_ORBIT_CAP).unwrap();
        assert_eq!(
            cert.kind,
            RegularityKind::TwistedRegular,
            "{}",
            cert.evidence
        );

        // The identity has the full twist-fixed subgroup as centralizer,
        // of order p(p^2 - 1), which a degree-1 fit rejects. The cyclic
        // permutation matrix gives the same orders: it lies in the trivial
        // twisted class.
        for lit in ["1 0 0; 0 1 0; 0 0 1", "0 0 1; 1 0 0; 0 1 0"] {
            let degenerate: Vec<(GroupSpec, MatrixFq)> = [2u64, 3, 5]
                .iter()
                .map(|&p| (sl_flip(3, p), MatrixFq::parse_literal(p, lit).unwrap()))
                .collect();
            let cert = twisted_regularity_certificate(&degenerate, DEFAULT_ORBIT_CAP).unwrap();
            assert_eq!(cert.kind, RegularityKind::NotRegular, "{}", cert.evidence);
        }

        // Too few primes is an error, not a certificate.
        assert!(matches!(
            twisted_regularity_certificate(&family[..2], DEFAULT_ORBIT_CAP),
            Err(CountError::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn sweep_caps_are_enforced() {
        let spec = gl(3, 5);
        let h = MatrixFq::diagonal(5, &[1, 2, 3]).unwrap();
        assert!(matches!(
            lusztig_cell_counts(&spec, &h, 10),
            Err(CountError::SweepCap {
                total: 186,
                cap: 10
            })
        ));
        let e = WeylElement::identity(&spec.weyl_datum().unwrap());
        assert!(matches!(
            unipotent_cell_counts(&spec, &e, 10),
            Err(CountError::SweepCap {
                total: 125,
                cap: 10
            })
        ));
    }
}
