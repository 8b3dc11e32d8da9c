//! Concrete groups of Lie type over prime fields.
//!
//! A [`GroupSpec`] pins down GL_n or SL_n over F_p together with an optional
//! diagram twist realized as a matrix automorphism. On top of that this
//! module provides twisted conjugation orbits with exact centralizer orders,
//! regularity certificates for group elements, lower-triangular orbit
//! representatives, and enumeration of flag cosets cell by cell.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::coxeter::{CoxeterDatum, CoxeterError, DiagramAutomorphism, Family};
use crate::matfq::{flip_twist, primitive_root, MatError, MatrixFq, PolyFp};

/// Default ceiling on twisted conjugation orbit sizes.
pub const DEFAULT_ORBIT_CAP: usize = 10_000_000;

/// Default ceiling on the number of flag coset representatives.
pub const DEFAULT_FLAG_CAP: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum ChevError {
    #[error("bad group specification: {0}")]
    BadSpec(String),
    #[error("matrix is not a member of {0}")]
    NotInGroup(String),
    #[error("orbit exceeded the cap of {cap} elements")]
    OrbitCap { cap: usize },
    #[error("flag enumeration of {total} cosets exceeds the cap of {cap}")]
    FlagCap { total: u128, cap: u128 },
    #[error("orbit size {orbit} does not divide the group order {group}")]
    OrbitStabilizer { orbit: u128, group: u128 },
    #[error("no lower triangular member in the orbit or any sibling orbit")]
    NoLowerTriangular,
    #[error(
        "regularity of a twisted element is certified by fitting centralizer \
         orders across primes, not from a single matrix"
    )]
    TwistedRegularityNeedsFit,
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKind {
    GeneralLinear,
    SpecialLinear,
}

impl GroupKind {
    pub fn letters(self) -> &'static str {
        match self {
            GroupKind::GeneralLinear => "GL",
            GroupKind::SpecialLinear => "SL",
        }
    }
}

/// How the group is twisted. `Flip` is the order-two automorphism
/// g -> J (g^T)^(-1) J^(-1) realizing the diagram reversal of type A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Twist {
    Untwisted,
    Flip,
}

impl Twist {
    pub fn name(self) -> &'static str {
        match self {
            Twist::Untwisted => "none",
            Twist::Flip => "flip",
        }
    }
}

/// A finite group of Lie type: GL_n(F_p) or SL_n(F_p) with a chosen twist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub n: usize,
    pub p: u64,
    pub twist: Twist,
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}(F{})", self.kind.letters(), self.n, self.p)?;
        if self.twist == Twist::Flip {
            write!(f, " flip")?;
        }
        Ok(())
    }
}

fn checked_group_order(kind: GroupKind, n: usize, p: u64) -> Option<u128> {
    // |GL_n| = p^(n(n-1)/2) * prod_{k=1..n} (p^k - 1), |SL_n| divides by p-1.
    let p = p as u128;
    let mut order: u128 = 1;
    for _ in 0..n * (n - 1) / 2 {
        order = order.checked_mul(p)?;
    }
    let mut pk: u128 = 1;
    for _ in 1..=n {
        pk = pk.checked_mul(p)?;
        order = order.checked_mul(pk - 1)?;
    }
    Some(match kind {
        GroupKind::GeneralLinear => order,
        GroupKind::SpecialLinear => order / (p - 1),
    })
}

impl GroupSpec {
    pub fn new(kind: GroupKind, n: usize, p: u64, twist: Twist) -> Result<GroupSpec, ChevError> {
        if !(2..=8).contains(&n) {
            return Err(ChevError::BadSpec(format!("size {n} out of range 2..=8")));
        }
        // Probes the modulus (prime, small enough) and the pack capacity.
        let probe = MatrixFq::identity(p, n)?;
        if u128::from(p).checked_pow((n * n) as u32).is_none() {
            return Err(ChevError::BadSpec(format!(
                "state space of {n}x{n} matrices over F{p} cannot be packed into 128 bits"
            )));
        }
        if checked_group_order(kind, n, p).is_none() {
            return Err(ChevError::BadSpec(format!(
                "group order of {}{n}(F{p}) overflows 128 bits",
                kind.letters()
            )));
        }
        drop(probe);
        Ok(GroupSpec { kind, n, p, twist })
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn group_order(&self) -> u128 {
        checked_group_order(self.kind, self.n, self.p)
            .expect("order bound was checked at construction")
    }

    /// Order of the upper-triangular Borel subgroup B^F.
    pub fn borel_order(&self) -> u128 {
        let p = self.p as u128;
        let torus = match self.kind {
            GroupKind::GeneralLinear => (p - 1).pow(self.n as u32),
            GroupKind::SpecialLinear => (p - 1).pow(self.n as u32 - 1),
        };
        torus * p.pow((self.n * (self.n - 1) / 2) as u32)
    }

    /// Number of flag cosets |G^F/B^F|, the same for GL and SL.
    pub fn num_flags(&self) -> u128 {
        let gl = checked_group_order(GroupKind::GeneralLinear, self.n, self.p)
            .expect("order bound was checked at construction");
        let p = self.p as u128;
        let borel_gl = (p - 1).pow(self.n as u32) * p.pow((self.n * (self.n - 1) / 2) as u32);
        gl / borel_gl
    }

    pub fn contains(&self, m: &MatrixFq) -> bool {
        m.size() == self.n
            && m.modulus() == self.p
            && match self.kind {
                GroupKind::GeneralLinear => m.det() != 0,
                GroupKind::SpecialLinear => m.det() == 1,
            }
    }

    /// Applies the twist to a group element.
    pub fn twist_apply(&self, m: &MatrixFq) -> Result<MatrixFq, MatError> {
        match self.twist {
            Twist::Untwisted => Ok(m.clone()),
            Twist::Flip => flip_twist(m),
        }
    }

    /// Standard generating set: all elementary transvections I + E_ij, one
    /// torus generator diag(r, r^(-1), 1, ...) with r a primitive root, and
    /// for GL a determinant-spreading diag(r, 1, ..., 1).
    pub fn generators(&self) -> Result<Vec<MatrixFq>, ChevError> {
        let mut gens = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let mut t = MatrixFq::identity(self.p, self.n)?;
                t.set(i, j, 1);
                gens.push(t);
            }
        }
        let r = primitive_root(self.p);
        if r != 1 {
            let mut diag = vec![1u64; self.n];
            diag[0] = r;
            diag[1] = crate::matfq::inv_mod(r, self.p);
            gens.push(MatrixFq::diagonal(self.p, &diag)?);
            if self.kind == GroupKind::GeneralLinear {
                let mut diag = vec![1u64; self.n];
                diag[0] = r;
                gens.push(MatrixFq::diagonal(self.p, &diag)?);
            }
        }
        Ok(gens)
    }

    /// The Weyl group datum, type A of rank n - 1.
    pub fn weyl_datum(&self) -> Result<Arc<CoxeterDatum>, CoxeterError> {
        CoxeterDatum::shared(Family::A, self.n - 1)
    }

    /// The twist as a diagram automorphism of the Weyl datum.
    pub fn diagram_twist(&self) -> Result<DiagramAutomorphism, CoxeterError> {
        let datum = self.weyl_datum()?;
        match self.twist {
            Twist::Untwisted => Ok(DiagramAutomorphism::identity(&datum)),
            Twist::Flip => DiagramAutomorphism::flip(&datum),
        }
    }

    pub fn dim_borel(&self) -> usize {
        let gl = self.n * (self.n + 1) / 2;
        match self.kind {
            GroupKind::GeneralLinear => gl,
            GroupKind::SpecialLinear => gl - 1,
        }
    }

    pub fn dim_torus(&self) -> usize {
        match self.kind {
            GroupKind::GeneralLinear => self.n,
            GroupKind::SpecialLinear => self.n - 1,
        }
    }

    /// Dimension of the twist-fixed part of the diagonal torus, computed
    /// from the twist's action on the cocharacter lattice.
    pub fn dim_torus_twisted_fixed(&self) -> usize {
        let n = self.n;
        // Action on cocharacters: identity, or e_i -> -e_{n-1-i} for flip.
        let action = |i: usize, j: usize| -> i64 {
            match self.twist {
                Twist::Untwisted => i64::from(i == j),
                Twist::Flip => {
                    if i + j == n - 1 {
                        -1
                    } else {
                        0
                    }
                }
            }
        };
        let big = |v: i64| BigRational::from_integer(BigInt::from(v));
        // Fixed vectors form the kernel of (A - I); for SL intersect with
        // the sum-zero hyperplane by stacking the all-ones functional.
        let mut rows: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| big(action(i, j) - i64::from(i == j)))
                    .collect()
            })
            .collect();
        if self.kind == GroupKind::SpecialLinear {
            rows.push(vec![big(1); n]);
        }
        n - rational_rank(rows)
    }

    /// For GL with the flip twist the center is not fixed pointwise, so the
    /// coset sweep used for geometric fusion says nothing there.
    pub fn center_caveat(&self) -> Option<&'static str> {
        if self.kind == GroupKind::GeneralLinear && self.twist == Twist::Flip {
            Some(
                "the flip inverts central scalars of GL, so rational orbit \
                 fusion inside a geometric class is not detected by the \
                 determinant coset sweep",
            )
        } else {
            None
        }
    }
}

fn rational_rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let lead = rows[rank][col].clone();
        for r in rank + 1..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let f = &rows[r][col] / &lead;
            let scaled: Vec<BigRational> = rows[rank][col..].iter().map(|x| x * &f).collect();
            for (dst, sub) in rows[r][col..].iter_mut().zip(&scaled) {
                *dst = &*dst - sub;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// The twisted conjugation action g . h = g h twist(g)^(-1).
pub fn twisted_conjugate(
    g: &MatrixFq,
    h: &MatrixFq,
    spec: &GroupSpec,
) -> Result<MatrixFq, ChevError> {
    if !spec.contains(g) || !spec.contains(h) {
        return Err(ChevError::NotInGroup(spec.label()));
    }
    Ok(g.mul(h)?.mul(&spec.twist_apply(g)?.inverse()?)?)
}

/// A full orbit of the twisted conjugation action, with its exact
/// centralizer order from the orbit-stabilizer identity.
#[derive(Debug)]
pub struct TwistedClassOrbit {
    spec: GroupSpec,
    base: MatrixFq,
    seen: HashSet<u128>,
    member_codes: Vec<u128>,
    centralizer_order: u128,
}

impl TwistedClassOrbit {
    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn base(&self) -> &MatrixFq {
        &self.base
    }

    pub fn size(&self) -> u128 {
        self.member_codes.len() as u128
    }

    pub fn centralizer_order(&self) -> u128 {
        self.centralizer_order
    }

    pub fn contains(&self, m: &MatrixFq) -> bool {
        m.size() == self.spec.n && m.modulus() == self.spec.p && self.seen.contains(&m.pack_u128())
    }

    /// Packed member codes in deterministic discovery order.
    pub fn member_codes(&self) -> &[u128] {
        &self.member_codes
    }

    pub fn members(&self) -> impl Iterator<Item = MatrixFq> + '_ {
        self.member_codes.iter().map(move |&c| {
            MatrixFq::unpack_u128(self.spec.p, self.spec.n, c)
                .expect("orbit codes were packed from valid matrices")
        })
    }
}

/// Breadth-first closure of h under twisted conjugation by the group
/// generators. Errors if the orbit would exceed `cap` elements.
pub fn orbit(h: &MatrixFq, spec: &GroupSpec, cap: usize) -> Result<TwistedClassOrbit, ChevError> {
    if !spec.contains(h) {
        return Err(ChevError::NotInGroup(spec.label()));
    }
    let actions: Vec<(MatrixFq, MatrixFq)> = spec
        .generators()?
        .into_iter()
        .map(|g| {
            let back = spec.twist_apply(&g)?.inverse()?;
            Ok((g, back))
        })
        .collect::<Result<_, MatError>>()?;
    let mut seen = HashSet::new();
    let mut member_codes = Vec::new();
    seen.insert(h.pack_u128());
    member_codes.push(h.pack_u128());
    let mut cursor = 0usize;
    while cursor < member_codes.len() {
        let x = MatrixFq::unpack_u128(spec.p, spec.n, member_codes[cursor])?;
        cursor += 1;
        for (g, back) in &actions {
            let y = g.mul(&x)?.mul(back)?;
            let code = y.pack_u128();
            if seen.insert(code) {
                if member_codes.len() >= cap {
                    return Err(ChevError::OrbitCap { cap });
                }
                member_codes.push(code);
            }
        }
    }
    let group = spec.group_order();
    let size = member_codes.len() as u128;
    if !group.is_multiple_of(size) {
        return Err(ChevError::OrbitStabilizer { orbit: size, group });
    }
    Ok(TwistedClassOrbit {
        spec: *spec,
        base: h.clone(),
        seen,
        member_codes,
        centralizer_order: group / size,
    })
}

/// All rational orbits of the geometric twisted class of h that a
/// determinant coset sweep can reach, starting with the orbit of h itself.
///
/// Conjugators diag(d, 1, ..., 1) run over every nonzero d. For untwisted SL
/// these represent all GL cosets, so the returned orbits are exactly the
/// rational orbits fusing into one GL class. For GL the sweep stays inside
/// the group and the result is the single orbit. For twisted SL only the
/// conjugators that keep the result in SL contribute, which can under-report
/// fusion; callers should treat the count as a lower bound there.
pub fn geometric_class(
    h: &MatrixFq,
    spec: &GroupSpec,
    cap: usize,
) -> Result<Vec<TwistedClassOrbit>, ChevError> {
    let mut orbits = vec![orbit(h, spec, cap)?];
    for d in 2..spec.p {
        let mut diag = vec![1u64; spec.n];
        diag[0] = d;
        let a = MatrixFq::diagonal(spec.p, &diag)?;
        let h2 = a.mul(h)?.mul(&spec.twist_apply(&a)?.inverse()?)?;
        if !spec.contains(&h2) {
            continue;
        }
        if orbits.iter().any(|o| o.contains(&h2)) {
            continue;
        }
        orbits.push(orbit(&h2, spec, cap)?);
    }
    Ok(orbits)
}

/// Outcome of the search for a lower triangular orbit member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SteinbergOutcome {
    /// A lower triangular member of the orbit itself.
    Found(MatrixFq),
    /// The orbit has none, but a sibling rational orbit of the same
    /// geometric class does.
    InSibling {
        representative: MatrixFq,
        sibling_base: MatrixFq,
    },
}

fn is_lower_triangular(m: &MatrixFq) -> bool {
    let n = m.size();
    (0..n).all(|i| (i + 1..n).all(|j| m.get(i, j) == 0))
}

fn smallest_lower_triangular(o: &TwistedClassOrbit) -> Option<MatrixFq> {
    let mut best: Option<(u128, MatrixFq)> = None;
    for (code, m) in o.member_codes().iter().zip(o.members()) {
        if is_lower_triangular(&m) && best.as_ref().is_none_or(|(c, _)| code < c) {
            best = Some((*code, m));
        }
    }
    best.map(|(_, m)| m)
}

/// A lower triangular member of the orbit if one exists, deterministically
/// the one with the smallest packed code. Falls back to sibling orbits of
/// the same geometric class, and errors if none of them has one either,
/// which happens for classes whose eigenvalues live outside F_p.
pub fn steinberg_representative(
    o: &TwistedClassOrbit,
    cap: usize,
) -> Result<SteinbergOutcome, ChevError> {
    if let Some(m) = smallest_lower_triangular(o) {
        return Ok(SteinbergOutcome::Found(m));
    }
    for sibling in geometric_class(o.base(), o.spec(), cap)? {
        if sibling.contains(o.base()) {
            continue;
        }
        if let Some(m) = smallest_lower_triangular(&sibling) {
            return Ok(SteinbergOutcome::InSibling {
                representative: m,
                sibling_base: sibling.base().clone(),
            });
        }
    }
    Err(ChevError::NoLowerTriangular)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularityKind {
    RegularSemisimpleSplit,
    RegularSemisimpleNonsplit,
    RegularUnipotent,
    RegularMixed,
    NotRegular,
    /// Certified empirically for twisted groups by fitting centralizer
    /// orders across primes.
    TwistedRegular,
}

impl RegularityKind {
    pub fn name(self) -> &'static str {
        match self {
            RegularityKind::RegularSemisimpleSplit => "regular-semisimple-split",
            RegularityKind::RegularSemisimpleNonsplit => "regular-semisimple-nonsplit",
            RegularityKind::RegularUnipotent => "regular-unipotent",
            RegularityKind::RegularMixed => "regular-mixed",
            RegularityKind::NotRegular => "not-regular",
            RegularityKind::TwistedRegular => "twisted-regular",
        }
    }

    pub fn is_regular(self) -> bool {
        self != RegularityKind::NotRegular
    }
}

impl fmt::Display for RegularityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularityCertificate {
    pub kind: RegularityKind,
    pub evidence: String,
}

/// Certifies regularity of an untwisted element: the centralizer has
/// minimal dimension exactly when the minimal polynomial equals the
/// characteristic polynomial, and the factorization shape refines the kind.
/// Twisted specs must go through the prime-family fit instead.
pub fn is_regular(h: &MatrixFq, spec: &GroupSpec) -> Result<RegularityCertificate, ChevError> {
    if !spec.contains(h) {
        return Err(ChevError::NotInGroup(spec.label()));
    }
    if spec.twist != Twist::Untwisted {
        return Err(ChevError::TwistedRegularityNeedsFit);
    }
    let cp = h.charpoly();
    let mp = h.minpoly();
    if mp != cp {
        return Ok(RegularityCertificate {
            kind: RegularityKind::NotRegular,
            evidence: format!(
                "minimal polynomial {mp} of degree {} is a proper divisor of \
                 the characteristic polynomial {cp}",
                mp.degree().unwrap_or(0)
            ),
        });
    }
    let n = spec.n;
    let rational_roots: usize = cp.roots_with_multiplicity().iter().map(|&(_, m)| m).sum();
    if cp.is_squarefree() {
        if rational_roots == n {
            Ok(RegularityCertificate {
                kind: RegularityKind::RegularSemisimpleSplit,
                evidence: format!(
                    "characteristic polynomial {cp} has {n} distinct roots in F{}",
                    spec.p
                ),
            })
        } else {
            Ok(RegularityCertificate {
                kind: RegularityKind::RegularSemisimpleNonsplit,
                evidence: format!(
                    "characteristic polynomial {cp} is squarefree with only \
                     {rational_roots} of {n} roots in F{}",
                    spec.p
                ),
            })
        }
    } else if cp == PolyFp::from_roots(spec.p, &vec![1; n]) {
        Ok(RegularityCertificate {
            kind: RegularityKind::RegularUnipotent,
            evidence: format!("characteristic and minimal polynomial are both (x - 1)^{n}"),
        })
    } else {
        Ok(RegularityCertificate {
            kind: RegularityKind::RegularMixed,
            evidence: format!(
                "minimal polynomial equals the characteristic polynomial \
                 {cp}, which is neither squarefree nor (x - 1)^{n}"
            ),
        })
    }
}

/// Exact centralizer order of a regular untwisted element, by enumerating
/// the commutant algebra F_p[h] and counting its members inside the group.
/// This avoids the orbit walk entirely, so it works at primes where the
/// orbit itself would be too large.
pub fn regular_centralizer_order(h: &MatrixFq, spec: &GroupSpec) -> Result<u128, ChevError> {
    if !spec.contains(h) {
        return Err(ChevError::NotInGroup(spec.label()));
    }
    if spec.twist != Twist::Untwisted {
        return Err(ChevError::TwistedRegularityNeedsFit);
    }
    let cert = is_regular(h, spec)?;
    if !cert.kind.is_regular() {
        return Err(ChevError::BadSpec(format!(
            "centralizer enumeration via the commutant needs a regular element: {}",
            cert.evidence
        )));
    }
    let n = spec.n;
    let p = spec.p;
    let mut powers = Vec::with_capacity(n);
    let mut acc = MatrixFq::identity(p, n)?;
    for _ in 0..n {
        powers.push(acc.clone());
        acc = acc.mul(h)?;
    }
    let mut digits = vec![0u64; n];
    let mut count: u128 = 0;
    loop {
        let mut m = MatrixFq::zero(p, n)?;
        for (d, pw) in digits.iter().zip(&powers) {
            if *d != 0 {
                m = m.add(&pw.scalar_mul(*d))?;
            }
        }
        if spec.contains(&m) {
            count += 1;
        }
        // Odometer over coefficient tuples.
        let mut k = 0;
        loop {
            if k == n {
                return Ok(count);
            }
            digits[k] += 1;
            if digits[k] < p {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Order of the twist-fixed diagonal torus T^F, by direct enumeration.
pub fn twisted_torus_fixed_order(spec: &GroupSpec) -> Result<u128, ChevError> {
    let n = spec.n;
    let p = spec.p;
    let mut digits = vec![1u64; n];
    let mut count: u128 = 0;
    loop {
        let t = MatrixFq::diagonal(p, &digits)?;
        if spec.contains(&t) && spec.twist_apply(&t)? == t {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(count);
            }
            digits[k] += 1;
            if digits[k] < p {
                break;
            }
            digits[k] = 1;
            k += 1;
        }
    }
}

/// All permutations of 0..n in lexicographic order, as images perm[j] = w(j).
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    (0..n).permutations(n).collect()
}

/// The free coordinate slots of the flag cell of a permutation: pairs
/// (i, j) with i < j and w^(-1)(i) > w^(-1)(j). Their number is the Coxeter
/// length of w.
pub fn flag_slots(perm: &[usize]) -> Vec<(usize, usize)> {
    let n = perm.len();
    let mut inv = vec![0usize; n];
    for (j, &i) in perm.iter().enumerate() {
        inv[i] = j;
    }
    let mut slots = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if inv[i] > inv[j] {
                slots.push((i, j));
            }
        }
    }
    slots
}

pub fn flag_cell_size(p: u64, perm: &[usize]) -> u128 {
    (p as u128).pow(flag_slots(perm).len() as u32)
}

/// The `index`-th representative u * P_w of the flag cell of w, where u runs
/// over the unitriangular matrices supported on the cell's slots and index
/// digits in base p fill the slots in order.
pub fn flag_rep(
    p: u64,
    perm: &[usize],
    slots: &[(usize, usize)],
    mut index: u128,
) -> Result<MatrixFq, MatError> {
    let n = perm.len();
    let mut u = MatrixFq::identity(p, n)?;
    for &(i, j) in slots {
        u.set(i, j, (index % p as u128) as u64);
        index /= p as u128;
    }
    // Right multiplication by the permutation matrix only permutes columns.
    MatrixFq::from_fn(p, n, |i, j| u.get(i, perm[j]))
}

/// Streams one representative per flag coset of G^F/B^F, cell by cell in
/// lexicographic order of the permutations. The representatives are the
/// same for GL and SL: right adjustment inside the GL Borel reaches the
/// special linear member of each coset without changing any cell condition.
pub struct FlagRepIter {
    p: u64,
    perms: Vec<Vec<usize>>,
    current: usize,
    slots: Vec<(usize, usize)>,
    index: u128,
    cell_size: u128,
}

impl Iterator for FlagRepIter {
    type Item = MatrixFq;

    fn next(&mut self) -> Option<MatrixFq> {
        while self.index == self.cell_size {
            self.current += 1;
            if self.current >= self.perms.len() {
                return None;
            }
            self.slots = flag_slots(&self.perms[self.current]);
            self.index = 0;
            self.cell_size = (self.p as u128).pow(self.slots.len() as u32);
        }
        let m = flag_rep(self.p, &self.perms[self.current], &self.slots, self.index)
            .expect("flag cell data stays within the checked modulus");
        self.index += 1;
        Some(m)
    }
}

pub fn enumerate_flag_reps(spec: &GroupSpec, cap: u128) -> Result<FlagRepIter, ChevError> {
    let total = spec.num_flags();
    if total > cap {
        return Err(ChevError::FlagCap { total, cap });
    }
    let perms = all_permutations(spec.n);
    let slots = flag_slots(&perms[0]);
    let cell_size = (spec.p as u128).pow(slots.len() as u32);
    Ok(FlagRepIter {
        p: spec.p,
        perms,
        current: 0,
        slots,
        index: 0,
        cell_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfq::bruhat_perm;

    fn gl(n: usize, p: u64) -> GroupSpec {
        GroupSpec::new(GroupKind::GeneralLinear, n, p, Twist::Untwisted).unwrap()
    }

    fn sl(n: usize, p: u64) -> GroupSpec {
        GroupSpec::new(GroupKind::SpecialLinear, n, p, Twist::Untwisted).unwrap()
    }

    fn sl_flip(n: usize, p: u64) -> GroupSpec {
        GroupSpec::new(GroupKind::SpecialLinear, n, p, Twist::Flip).unwrap()
    }

    /// Multiplicative closure of the generators, for use as an oracle.
    fn all_elements(spec: &GroupSpec) -> Vec<MatrixFq> {
        let gens = spec.generators().unwrap();
        let mut seen = HashSet::new();
        let mut out = vec![MatrixFq::identity(spec.p, spec.n).unwrap()];
        seen.insert(out[0].pack_u128());
        let mut cursor = 0;
        while cursor < out.len() {
            let x = out[cursor].clone();
            cursor += 1;
            for g in &gens {
                let y = x.mul(g).unwrap();
                if seen.insert(y.pack_u128()) {
                    out.push(y);
                }
            }
        }
        out
    }

    #[test]
    fn group_orders_match_known_values() {
        assert_eq!(gl(2, 3).group_order(), 48);
        assert_eq!(sl(2, 3).group_order(), 24);
        assert_eq!(gl(3, 2).group_order(), 168);
        assert_eq!(gl(4, 2).group_order(), 20160);
        // Falling-factorial formula as an independent cross-check.
        for (n, p) in [(2usize, 5u64), (3, 3), (4, 3)] {
            let pn = (p as u128).pow(n as u32);
            let mut expect: u128 = 1;
            let mut pi: u128 = 1;
            for _ in 0..n {
                expect *= pn - pi;
                pi *= p as u128;
            }
            assert_eq!(gl(n, p).group_order(), expect);
            assert_eq!(sl(n, p).group_order(), expect / (p as u128 - 1));
        }
    }

    #[test]
    fn borel_and_flag_counts_are_consistent() {
        for spec in [gl(2, 3), sl(2, 3), gl(3, 2), gl(3, 5), sl(3, 7)] {
            assert_eq!(spec.group_order() % spec.borel_order(), 0);
            assert_eq!(spec.group_order() / spec.borel_order(), spec.num_flags());
        }
        assert_eq!(gl(2, 3).num_flags(), 4);
        assert_eq!(gl(3, 2).num_flags(), 21);
    }

    #[test]
    fn generators_generate_the_whole_group() {
        for spec in [gl(2, 3), sl(2, 3), gl(3, 2), sl(3, 3)] {
            let elements = all_elements(&spec);
            assert_eq!(elements.len() as u128, spec.group_order(), "{spec}");
            assert!(elements.iter().all(|m| spec.contains(m)));
        }
    }

    #[test]
    fn spec_validation_rejects_bad_inputs() {
        assert!(GroupSpec::new(GroupKind::GeneralLinear, 1, 3, Twist::Untwisted).is_err());
        assert!(GroupSpec::new(GroupKind::GeneralLinear, 2, 4, Twist::Untwisted).is_err());
        // Order of GL6 over F31 overflows 128 bits.
        assert!(GroupSpec::new(GroupKind::GeneralLinear, 6, 31, Twist::Untwisted).is_err());
        assert!(GroupSpec::new(GroupKind::GeneralLinear, 6, 2, Twist::Untwisted).is_ok());
    }

    #[test]
    fn twisted_conjugate_matches_definition() {
        let spec = sl_flip(3, 5);
        let g = MatrixFq::parse_literal(5, "1 2 0; 0 1 1; 0 0 1").unwrap();
        let h = MatrixFq::parse_literal(5, "0 0 1; 1 0 0; 0 1 0").unwrap();
        let out = twisted_conjugate(&g, &h, &spec).unwrap();
        let expect = g
            .mul(&h)
            .unwrap()
            .mul(&flip_twist(&g).unwrap().inverse().unwrap())
            .unwrap();
        assert_eq!(out, expect);
        // Identity conjugator fixes everything.
        let e = MatrixFq::identity(5, 3).unwrap();
        assert_eq!(twisted_conjugate(&e, &h, &spec).unwrap(), h);
        // Untwisted conjugation preserves the characteristic polynomial.
        let spec0 = gl(3, 5);
        let out0 = twisted_conjugate(&g, &h, &spec0).unwrap();
        assert_eq!(out0.charpoly(), h.charpoly());
    }

    #[test]
    fn orbit_matches_exhaustive_conjugation_oracle() {
        // Untwisted GL2(F3), split semisimple base point.
        let spec = gl(2, 3);
        let h = MatrixFq::diagonal(3, &[1, 2]).unwrap();
        let o = orbit(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        assert_eq!(o.size(), 12);
        assert_eq!(o.centralizer_order(), 4);
        let oracle: HashSet<u128> = all_elements(&spec)
            .iter()
            .map(|g| {
                g.mul(&h)
                    .unwrap()
                    .mul(&g.inverse().unwrap())
                    .unwrap()
                    .pack_u128()
            })
            .collect();
        assert_eq!(oracle.len() as u128, o.size());
        assert!(o.members().all(|m| oracle.contains(&m.pack_u128())));
    }

    #[test]
    fn unipotent_orbit_in_special_linear_group_has_small_centralizer() {
        let spec = sl(2, 3);
        let h = MatrixFq::parse_literal(3, "1 1; 0 1").unwrap();
        let o = orbit(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        assert_eq!(o.centralizer_order(), 6);
        assert_eq!(o.size(), 4);
    }

    #[test]
    fn central_elements_have_singleton_orbits() {
        let spec = gl(3, 5);
        let h = MatrixFq::diagonal(5, &[2, 2, 2]).unwrap();
        let o = orbit(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        assert_eq!(o.size(), 1);
        assert_eq!(o.centralizer_order(), spec.group_order());
    }

    #[test]
    fn twisted_orbit_matches_exhaustive_sweep() {
        let spec = sl_flip(3, 2);
        let h = MatrixFq::parse_literal(2, "0 0 1; 1 0 0; 0 1 0").unwrap();
        let o = orbit(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        let oracle: HashSet<u128> = all_elements(&spec)
            .iter()
            .map(|g| twisted_conjugate(g, &h, &spec).unwrap().pack_u128())
            .collect();
        assert_eq!(oracle.len() as u128, o.size());
        assert!(o.members().all(|m| oracle.contains(&m.pack_u128())));
        assert_eq!(o.size() * o.centralizer_order(), spec.group_order());
    }

    #[test]
    fn orbit_cap_is_enforced() {
        let spec = gl(2, 3);
        let h = MatrixFq::diagonal(3, &[1, 2]).unwrap();
        match orbit(&h, &spec, 5) {
            Err(ChevError::OrbitCap { cap: 5 }) => {}
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn geometric_class_is_single_orbit_for_general_linear() {
        let spec = gl(2, 5);
        let h = MatrixFq::parse_literal(5, "1 1; 0 1").unwrap();
        let parts = geometric_class(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        assert_eq!(parts.len(), 1);
    }

    #[test]
    fn unipotent_class_splits_in_two_in_special_linear_group() {
        // Over F5 the regular unipotent class of SL2 splits into two
        // rational orbits of size (p^2 - 1)/2 each, swapped by conjugation
        // with a nonsquare diagonal.
        let spec = sl(2, 5);
        let h = MatrixFq::parse_literal(5, "1 1; 0 1").unwrap();
        let parts = geometric_class(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        assert_eq!(parts.len(), 2);
        for o in &parts {
            assert_eq!(o.size(), 12);
        }
        // The two orbits are disjoint and cover all transvections.
        let total: u128 = parts.iter().map(|o| o.size()).sum();
        assert_eq!(total, 24);
        assert!(!parts[0].contains(parts[1].base()));
    }

    #[test]
    fn split_semisimple_class_does_not_split_off_new_orbits() {
        let spec = sl(2, 5);
        let h = MatrixFq::diagonal(5, &[2, 3]).unwrap();
        let parts = geometric_class(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        assert_eq!(parts.len(), 1, "connected torus centralizer, no splitting");
    }

    #[test]
    fn regularity_certificates_cover_the_taxonomy() {
        let spec = gl(2, 3);
        let split = is_regular(&MatrixFq::diagonal(3, &[1, 2]).unwrap(), &spec).unwrap();
        assert_eq!(split.kind, RegularityKind::RegularSemisimpleSplit);

        // Companion matrix of x^2 - x - 1, irreducible mod 3.
        let f = PolyFp::from_coeffs(3, vec![2, 2, 1]);
        assert!(f.is_irreducible());
        let nonsplit = is_regular(&f.companion().unwrap(), &spec).unwrap();
        assert_eq!(nonsplit.kind, RegularityKind::RegularSemisimpleNonsplit);

        let j = MatrixFq::parse_literal(3, "1 1; 0 1").unwrap();
        let unip = is_regular(&j, &spec).unwrap();
        assert_eq!(unip.kind, RegularityKind::RegularUnipotent);

        let id = MatrixFq::identity(3, 2).unwrap();
        let not = is_regular(&id, &spec).unwrap();
        assert_eq!(not.kind, RegularityKind::NotRegular);

        // (x - 1)^2 (x + 1) as a companion matrix: regular, mixed.
        let spec3 = gl(3, 5);
        let g = PolyFp::from_roots(5, &[1, 1, 4]).companion().unwrap();
        let mixed = is_regular(&g, &spec3).unwrap();
        assert_eq!(mixed.kind, RegularityKind::RegularMixed);

        // Non-regular semisimple: repeated eigenvalue with scalar block.
        let d = MatrixFq::diagonal(5, &[2, 2, 3]).unwrap();
        assert_eq!(
            is_regular(&d, &spec3).unwrap().kind,
            RegularityKind::NotRegular
        );

        let twisted = sl_flip(3, 5);
        let h = MatrixFq::parse_literal(5, "0 0 1; 1 0 0; 0 1 0").unwrap();
        assert!(matches!(
            is_regular(&h, &twisted),
            Err(ChevError::TwistedRegularityNeedsFit)
        ));
    }

    #[test]
    fn commutant_centralizer_matches_orbit_stabilizer() {
        let cases: Vec<(GroupSpec, MatrixFq)> = vec![
            (gl(2, 3), MatrixFq::diagonal(3, &[1, 2]).unwrap()),
            (
                gl(2, 3),
                PolyFp::from_coeffs(3, vec![2, 2, 1]).companion().unwrap(),
            ),
            (gl(2, 3), MatrixFq::parse_literal(3, "1 1; 0 1").unwrap()),
            (sl(2, 3), MatrixFq::parse_literal(3, "1 1; 0 1").unwrap()),
            (
                gl(3, 2),
                MatrixFq::parse_literal(2, "1 1 0; 0 1 1; 0 0 1").unwrap(),
            ),
            (
                gl(3, 3),
                PolyFp::from_roots(3, &[1, 1, 2]).companion().unwrap(),
            ),
        ];
        for (spec, h) in cases {
            let via_commutant = regular_centralizer_order(&h, &spec).unwrap();
            let via_orbit = orbit(&h, &spec, DEFAULT_ORBIT_CAP)
                .unwrap()
                .centralizer_order();
            assert_eq!(via_commutant, via_orbit, "{spec}");
        }
    }

    #[test]
    fn split_centralizer_order_follows_torus_formula() {
        // For a regular split semisimple element the centralizer is the
        // split torus: order (p - 1)^n in GL_n.
        for p in [3u64, 5, 7, 11] {
            let spec = gl(2, p);
            let h = MatrixFq::diagonal(p, &[1, 2]).unwrap();
            assert_eq!(
                regular_centralizer_order(&h, &spec).unwrap(),
                u128::from(p - 1) * u128::from(p - 1)
            );
        }
        // Nonsplit torus of GL2: order p^2 - 1.
        for p in [3u64, 7] {
            let spec = gl(2, p);
            let f = crate::matfq::smallest_irreducible(p, 2).unwrap();
            let h = f.companion().unwrap();
            assert_eq!(
                regular_centralizer_order(&h, &spec).unwrap(),
                u128::from(p) * u128::from(p) - 1
            );
        }
    }

    #[test]
    fn steinberg_representative_found_in_own_orbit() {
        let spec = gl(2, 3);
        // Diagonal matrices are already lower triangular.
        let d = MatrixFq::diagonal(3, &[1, 2]).unwrap();
        let o = orbit(&d, &spec, DEFAULT_ORBIT_CAP).unwrap();
        match steinberg_representative(&o, DEFAULT_ORBIT_CAP).unwrap() {
            SteinbergOutcome::Found(m) => assert!(is_lower_triangular(&m)),
            other => panic!("expected in-orbit member, got {other:?}"),
        }

        // The regular unipotent orbit contains the transpose of its base.
        let j = MatrixFq::parse_literal(3, "1 1; 0 1").unwrap();
        let o = orbit(&j, &spec, DEFAULT_ORBIT_CAP).unwrap();
        match steinberg_representative(&o, DEFAULT_ORBIT_CAP).unwrap() {
            SteinbergOutcome::Found(m) => {
                assert!(is_lower_triangular(&m));
                assert!(o.contains(&m));
                assert_ne!(m, MatrixFq::identity(3, 2).unwrap());
            }
            other => panic!("expected in-orbit member, got {other:?}"),
        }

        // A companion matrix with split eigenvalues reaches a diagonal.
        let c = PolyFp::from_roots(5, &[1, 2]).companion().unwrap();
        let o = orbit(&c, &gl(2, 5), DEFAULT_ORBIT_CAP).unwrap();
        assert!(matches!(
            steinberg_representative(&o, DEFAULT_ORBIT_CAP).unwrap(),
            SteinbergOutcome::Found(_)
        ));
    }

    #[test]
    fn steinberg_representative_absent_for_nonsplit_classes() {
        // Eigenvalues outside F_p rule out triangular members in every
        // rational orbit, so the honest answer is an error.
        let spec = gl(2, 3);
        let h = PolyFp::from_coeffs(3, vec![2, 2, 1]).companion().unwrap();
        let o = orbit(&h, &spec, DEFAULT_ORBIT_CAP).unwrap();
        assert!(matches!(
            steinberg_representative(&o, DEFAULT_ORBIT_CAP),
            Err(ChevError::NoLowerTriangular)
        ));
    }

    #[test]
    fn flag_reps_enumerate_each_coset_once() {
        // Counts match |G/B| and representatives are pairwise inequivalent.
        for spec in [gl(2, 3), gl(3, 2)] {
            let reps: Vec<MatrixFq> = enumerate_flag_reps(&spec, DEFAULT_FLAG_CAP)
                .unwrap()
                .collect();
            assert_eq!(reps.len() as u128, spec.num_flags());
            for (i, a) in reps.iter().enumerate() {
                for b in &reps[i + 1..] {
                    let q = a.inverse().unwrap().mul(b).unwrap();
                    let upper = (0..spec.n).all(|i| (0..i).all(|j| q.get(i, j) == 0));
                    assert!(!upper, "cosets of {} and {} coincide", a, b);
                }
            }
        }
    }

    #[test]
    fn flag_cells_have_the_expected_sizes() {
        let spec = gl(3, 5);
        let mut total = 0u128;
        for perm in all_permutations(3) {
            let slots = flag_slots(&perm);
            // Slot count is the inversion number of the permutation.
            let mut inversions = 0;
            for a in 0..3 {
                for b in a + 1..3 {
                    if perm[a] > perm[b] {
                        inversions += 1;
                    }
                }
            }
            assert_eq!(slots.len(), inversions);
            total += flag_cell_size(5, &perm);
        }
        assert_eq!(total, spec.num_flags());
    }

    #[test]
    fn flag_reps_live_in_their_own_bruhat_cell() {
        // Each representative u * P_w must have Bruhat permutation w.
        for perm in all_permutations(3) {
            let slots = flag_slots(&perm);
            for index in 0..flag_cell_size(3, &perm) {
                let m = flag_rep(3, &perm, &slots, index).unwrap();
                assert_eq!(bruhat_perm(&m).unwrap(), perm);
            }
        }
    }

    #[test]
    fn flag_cap_is_enforced() {
        let spec = gl(3, 5);
        assert!(matches!(
            enumerate_flag_reps(&spec, 10),
            Err(ChevError::FlagCap {
                total: 186,
                cap: 10
            })
        ));
    }

    #[test]
    fn torus_dimensions_follow_the_twist_action() {
        assert_eq!(gl(3, 5).dim_torus_twisted_fixed(), 3);
        assert_eq!(sl(3, 5).dim_torus_twisted_fixed(), 2);
        assert_eq!(sl_flip(2, 5).dim_torus_twisted_fixed(), 1);
        assert_eq!(sl_flip(3, 5).dim_torus_twisted_fixed(), 1);
        assert_eq!(sl_flip(4, 5).dim_torus_twisted_fixed(), 2);
        let gl_flip = GroupSpec::new(GroupKind::GeneralLinear, 3, 5, Twist::Flip).unwrap();
        assert_eq!(gl_flip.dim_torus_twisted_fixed(), 1);
        assert!(gl_flip.center_caveat().is_some());
        assert!(sl_flip(3, 5).center_caveat().is_none());
    }

    #[test]
    fn twisted_torus_orders_track_the_fixed_dimension() {
        // |T^F| for the flip-fixed torus of SL3 is p - 1: diag(a, 1, 1/a).
        for p in [2u64, 5, 7] {
            assert_eq!(
                twisted_torus_fixed_order(&sl_flip(3, p)).unwrap(),
                u128::from(p - 1)
            );
        }
        // Untwisted SL2: the full diagonal torus diag(a, 1/a).
        for p in [3u64, 5] {
            assert_eq!(
                twisted_torus_fixed_order(&sl(2, p)).unwrap(),
                u128::from(p - 1)
            );
        }
    }

    #[test]
    fn weyl_datum_and_diagram_twist_are_wired_up() {
        let spec = sl_flip(3, 5);
        let datum = spec.weyl_datum().unwrap();
        assert_eq!(datum.order(), 6);
        let twist = spec.diagram_twist().unwrap();
        assert_eq!(twist.order(), 2);
        let plain = sl(3, 5).diagram_twist().unwrap();
        assert_eq!(plain.order(), 1);
    }
}
