//! Finite Weyl groups of classical type (A, B/C, D) in the signed-permutation
//! model, with canonical reduced words and diagram automorphisms.
//!
//! An element acts on an integer coordinate space: type A_n permutes n+1
//! coordinates, types B_n/C_n/D_n act by signed permutations of n coordinates.
//! Length is the number of positive roots sent to negative roots, and the
//! normal form of an element is its lexicographically least reduced word,
//! obtained greedily from smallest left descents. Equality, ordering, and
//! serialization all go through that normal form.

use once_cell::sync::Lazy;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::{Arc, RwLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoxeterError {
    #[error("unsupported family/rank combination {family}{rank}")]
    BadDatum { family: char, rank: usize },
    #[error("cannot parse Coxeter datum from {0:?}")]
    BadDatumString(String),
    #[error("simple-reflection index {index} out of range 1..={rank}")]
    BadLetter { index: usize, rank: usize },
    #[error("elements belong to different Coxeter data ({left} vs {right})")]
    DatumMismatch { left: String, right: String },
    #[error("images {0:?} do not describe an element of the group")]
    NotAnElement(Vec<i16>),
    #[error("group order {order} exceeds enumeration cap {cap}")]
    EnumerationCap { order: u128, cap: u128 },
    #[error("index map {0:?} does not preserve the Coxeter matrix")]
    NotAnAutomorphism(Vec<u8>),
    #[error("no diagram flip is defined for {0}")]
    NoFlip(String),
}

/// Classical family label. C is Weyl-group-isomorphic to B and shares its
/// signed-permutation model; only the label differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    A,
    B,
    C,
    D,
}

impl Family {
    pub fn letter(self) -> char {
        match self {
            Family::A => 'A',
            Family::B => 'B',
            Family::C => 'C',
            Family::D => 'D',
        }
    }

    fn from_letter(c: char) -> Option<Family> {
        match c {
            'A' | 'a' => Some(Family::A),
            'B' | 'b' => Some(Family::B),
            'C' | 'c' => Some(Family::C),
            'D' | 'd' => Some(Family::D),
            _ => None,
        }
    }
}

const MAX_RANK: usize = 8;

/// Root datum of a finite Weyl group: simple roots, positive roots, and the
/// Coxeter matrix, all over exact integer coordinates.
#[derive(Debug)]
pub struct CoxeterDatum {
    family: Family,
    rank: usize,
    /// Dimension of the coordinate space the group acts on.
    dim: usize,
    simple_roots: Vec<Vec<i32>>,
    positive_roots: Vec<Vec<i32>>,
    coxeter_matrix: Vec<Vec<u32>>,
}

impl PartialEq for CoxeterDatum {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.rank == other.rank
    }
}
impl Eq for CoxeterDatum {}

impl fmt::Display for CoxeterDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family.letter(), self.rank)
    }
}

type DatumRegistry = RwLock<HashMap<(Family, usize), Arc<CoxeterDatum>>>;

static DATUM_REGISTRY: Lazy<DatumRegistry> = Lazy::new(|| RwLock::new(HashMap::new()));

impl CoxeterDatum {
    pub fn new(family: Family, rank: usize) -> Result<CoxeterDatum, CoxeterError> {
        let bad = || CoxeterError::BadDatum {
            family: family.letter(),
            rank,
        };
        if rank == 0 || rank > MAX_RANK {
            return Err(bad());
        }
        match family {
            Family::A => {}
            Family::B | Family::C | Family::D => {
                if rank < 2 {
                    return Err(bad());
                }
            }
        }
        let dim = match family {
            Family::A => rank + 1,
            _ => rank,
        };
        let mut simple_roots = Vec::with_capacity(rank);
        for i in 0..rank {
            let mut r = vec![0i32; dim];
            match family {
                Family::A => {
                    r[i] = 1;
                    r[i + 1] = -1;
                }
                Family::B | Family::C => {
                    if i + 1 < rank {
                        r[i] = 1;
                        r[i + 1] = -1;
                    } else {
                        r[rank - 1] = 1;
                    }
                }
                Family::D => {
                    if i + 1 < rank {
                        r[i] = 1;
                        r[i + 1] = -1;
                    } else {
                        r[rank - 2] = 1;
                        r[rank - 1] = 1;
                    }
                }
            }
            simple_roots.push(r);
        }
        let mut positive_roots = Vec::new();
        match family {
            Family::A => {
                for i in 0..dim {
                    for j in i + 1..dim {
                        let mut r = vec![0i32; dim];
                        r[i] = 1;
                        r[j] = -1;
                        positive_roots.push(r);
                    }
                }
            }
            Family::B | Family::C => {
                for i in 0..rank {
                    let mut r = vec![0i32; dim];
                    r[i] = 1;
                    positive_roots.push(r);
                    for j in i + 1..rank {
                        for sign in [-1i32, 1] {
                            let mut r = vec![0i32; dim];
                            r[i] = 1;
                            r[j] = sign;
                            positive_roots.push(r);
                        }
                    }
                }
            }
            Family::D => {
                for i in 0..rank {
                    for j in i + 1..rank {
                        for sign in [-1i32, 1] {
                            let mut r = vec![0i32; dim];
                            r[i] = 1;
                            r[j] = sign;
                            positive_roots.push(r);
                        }
                    }
                }
            }
        }
        let mut m = vec![vec![2u32; rank]; rank];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1;
        }
        let set = |m: &mut Vec<Vec<u32>>, i: usize, j: usize, v: u32| {
            m[i][j] = v;
            m[j][i] = v;
        };
        match family {
            Family::A => {
                for i in 0..rank.saturating_sub(1) {
                    set(&mut m, i, i + 1, 3);
                }
            }
            Family::B | Family::C => {
                for i in 0..rank - 2 {
                    set(&mut m, i, i + 1, 3);
                }
                set(&mut m, rank - 2, rank - 1, 4);
            }
            Family::D => {
                for i in 0..rank.saturating_sub(2) {
                    set(&mut m, i, i + 1, 3);
                }
                if rank >= 3 {
                    set(&mut m, rank - 3, rank - 1, 3);
                }
            }
        }
        Ok(CoxeterDatum {
            family,
            rank,
            dim,
            simple_roots,
            positive_roots,
            coxeter_matrix: m,
        })
    }

    /// Shared handle; data for a given (family, rank) are built once.
    pub fn shared(family: Family, rank: usize) -> Result<Arc<CoxeterDatum>, CoxeterError> {
        if let Some(d) = DATUM_REGISTRY.read().unwrap().get(&(family, rank)) {
            return Ok(Arc::clone(d));
        }
        let d = Arc::new(CoxeterDatum::new(family, rank)?);
        let mut reg = DATUM_REGISTRY.write().unwrap();
        Ok(Arc::clone(reg.entry((family, rank)).or_insert(d)))
    }

    /// Parses labels like "A2", "B3", "D4".
    pub fn parse(s: &str) -> Result<Arc<CoxeterDatum>, CoxeterError> {
        let s = s.trim();
        let mut chars = s.chars();
        let fam = chars
            .next()
            .and_then(Family::from_letter)
            .ok_or_else(|| CoxeterError::BadDatumString(s.to_string()))?;
        let rank: usize = chars
            .as_str()
            .parse()
            .map_err(|_| CoxeterError::BadDatumString(s.to_string()))?;
        CoxeterDatum::shared(fam, rank)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dimension of the coordinate space carrying the reflection action.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coxeter_matrix(&self) -> &[Vec<u32>] {
        &self.coxeter_matrix
    }

    pub fn num_positive_roots(&self) -> usize {
        self.positive_roots.len()
    }

    /// Group order from the classical product formulas.
    pub fn order(&self) -> u128 {
        let fact = |k: usize| -> u128 { (1..=k as u128).product() };
        match self.family {
            Family::A => fact(self.rank + 1),
            Family::B | Family::C => (1u128 << self.rank) * fact(self.rank),
            Family::D => (1u128 << (self.rank - 1)) * fact(self.rank),
        }
    }

    /// Signed-permutation images of the i-th simple reflection (0-based).
    fn simple_images(&self, i: usize) -> Vec<i16> {
        let mut img: Vec<i16> = (1..=self.dim as i16).collect();
        match self.family {
            Family::A => img.swap(i, i + 1),
            Family::B | Family::C => {
                if i + 1 < self.rank {
                    img.swap(i, i + 1);
                } else {
                    img[self.rank - 1] = -(self.rank as i16);
                }
            }
            Family::D => {
                if i + 1 < self.rank {
                    img.swap(i, i + 1);
                } else {
                    img[self.rank - 2] = -(self.rank as i16);
                    img[self.rank - 1] = -(self.rank as i16 - 1);
                }
            }
        }
        img
    }
}

/// Composition of signed permutations as functions: (a*b)(e_i) = a(b(e_i)).
fn compose(a: &[i16], b: &[i16]) -> Vec<i16> {
    b.iter()
        .map(|&bi| {
            let j = (bi.unsigned_abs() as usize) - 1;
            if bi > 0 {
                a[j]
            } else {
                -a[j]
            }
        })
        .collect()
}

fn invert(a: &[i16]) -> Vec<i16> {
    let mut inv = vec![0i16; a.len()];
    for (i, &ai) in a.iter().enumerate() {
        let j = (ai.unsigned_abs() as usize) - 1;
        inv[j] = if ai > 0 {
            i as i16 + 1
        } else {
            -(i as i16 + 1)
        };
    }
    inv
}

fn apply_to_root(a: &[i16], root: &[i32]) -> Vec<i32> {
    let mut out = vec![0i32; root.len()];
    for (i, &c) in root.iter().enumerate() {
        if c != 0 {
            let ai = a[i];
            let j = (ai.unsigned_abs() as usize) - 1;
            out[j] += if ai > 0 { c } else { -c };
        }
    }
    out
}

/// A root of our classical systems is negative exactly when its first nonzero
/// coordinate is negative.
fn root_is_negative(root: &[i32]) -> bool {
    for &c in root {
        if c != 0 {
            return c < 0;
        }
    }
    false
}

fn images_are_identity(a: &[i16]) -> bool {
    a.iter().enumerate().all(|(i, &ai)| ai == i as i16 + 1)
}

/// An element of a finite Weyl group.
///
/// Stores both the signed-permutation images and the canonical
/// (lexicographically least) reduced word; the two determine each other, and
/// the word doubles as the serialization and ordering key.
#[derive(Debug, Clone)]
pub struct WeylElement {
    datum: Arc<CoxeterDatum>,
    images: Vec<i16>,
    word: Vec<u8>,
}

impl PartialEq for WeylElement {
    fn eq(&self, other: &Self) -> bool {
        self.datum == other.datum && self.images == other.images
    }
}
impl Eq for WeylElement {}

impl std::hash::Hash for WeylElement {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.datum.family.hash(state);
        self.datum.rank.hash(state);
        self.images.hash(state);
    }
}

impl PartialOrd for WeylElement {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders by (datum, length, canonical word); the enumeration order.
impl Ord for WeylElement {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (
            self.datum.family,
            self.datum.rank,
            self.word.len(),
            &self.word,
        )
            .cmp(&(
                other.datum.family,
                other.datum.rank,
                other.word.len(),
                &other.word,
            ))
    }
}

impl fmt::Display for WeylElement {
    /// Comma-separated letter indices of the canonical word; empty for the
    /// identity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.word.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl WeylElement {
    pub fn identity(datum: &Arc<CoxeterDatum>) -> WeylElement {
        WeylElement {
            datum: Arc::clone(datum),
            images: (1..=datum.dim as i16).collect(),
            word: Vec::new(),
        }
    }

    /// The simple reflection s_i, with 1-based letter index.
    pub fn simple(datum: &Arc<CoxeterDatum>, letter: usize) -> Result<WeylElement, CoxeterError> {
        if letter == 0 || letter > datum.rank {
            return Err(CoxeterError::BadLetter {
                index: letter,
                rank: datum.rank,
            });
        }
        Ok(WeylElement {
            datum: Arc::clone(datum),
            images: datum.simple_images(letter - 1),
            word: vec![letter as u8],
        })
    }

    /// Builds an element from any word in the generators and canonicalizes.
    pub fn from_word(datum: &Arc<CoxeterDatum>, word: &[u8]) -> Result<WeylElement, CoxeterError> {
        let mut images: Vec<i16> = (1..=datum.dim as i16).collect();
        for &l in word {
            if l == 0 || l as usize > datum.rank {
                return Err(CoxeterError::BadLetter {
                    index: l as usize,
                    rank: datum.rank,
                });
            }
            images = compose(&images, &datum.simple_images(l as usize - 1));
        }
        Ok(WeylElement::from_raw(datum, images))
    }

    /// Builds an element from signed-permutation images, validating
    /// membership (type A: no signs; type D: evenly many sign changes).
    pub fn from_signed_images(
        datum: &Arc<CoxeterDatum>,
        images: Vec<i16>,
    ) -> Result<WeylElement, CoxeterError> {
        let dim = datum.dim;
        if images.len() != dim {
            return Err(CoxeterError::NotAnElement(images));
        }
        let mut seen = vec![false; dim];
        let mut negatives = 0usize;
        for &v in &images {
            let a = v.unsigned_abs() as usize;
            if a == 0 || a > dim || seen[a - 1] {
                return Err(CoxeterError::NotAnElement(images));
            }
            seen[a - 1] = true;
            if v < 0 {
                negatives += 1;
            }
        }
        let ok = match datum.family {
            Family::A => negatives == 0,
            Family::B | Family::C => true,
            Family::D => negatives.is_multiple_of(2),
        };
        if !ok {
            return Err(CoxeterError::NotAnElement(images));
        }
        Ok(WeylElement::from_raw(datum, images))
    }

    /// Internal constructor: computes the canonical word by repeatedly
    /// stripping the smallest left descent.
    fn from_raw(datum: &Arc<CoxeterDatum>, images: Vec<i16>) -> WeylElement {
        let mut word = Vec::new();
        let mut cur = images.clone();
        while !images_are_identity(&cur) {
            let inv = invert(&cur);
            let mut descent = None;
            for i in 0..datum.rank {
                if root_is_negative(&apply_to_root(&inv, &datum.simple_roots[i])) {
                    descent = Some(i);
                    break;
                }
            }
            let i = descent.expect("non-identity element must have a left descent");
            word.push(i as u8 + 1);
            cur = compose(&datum.simple_images(i), &cur);
        }
        WeylElement {
            datum: Arc::clone(datum),
            images,
            word,
        }
    }

    pub fn datum(&self) -> &Arc<CoxeterDatum> {
        &self.datum
    }

    /// Signed-permutation images: the element sends e_i to
    /// sign(images[i]) * e_{|images[i]|} (1-based).
    pub fn images(&self) -> &[i16] {
        &self.images
    }

    /// Canonical reduced word, 1-based letters.
    pub fn word(&self) -> &[u8] {
        &self.word
    }

    pub fn length(&self) -> usize {
        self.word.len()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn multiply(&self, other: &WeylElement) -> Result<WeylElement, CoxeterError> {
        if self.datum != other.datum {
            return Err(CoxeterError::DatumMismatch {
                left: self.datum.to_string(),
                right: other.datum.to_string(),
            });
        }
        Ok(WeylElement::from_raw(
            &self.datum,
            compose(&self.images, &other.images),
        ))
    }

    pub fn inverse(&self) -> WeylElement {
        WeylElement::from_raw(&self.datum, invert(&self.images))
    }

    /// Right multiplication by a simple reflection, with the length change
    /// exposed so callers can branch on ascent/descent cheaply.
    pub fn times_simple(&self, letter: usize) -> Result<(WeylElement, bool), CoxeterError> {
        if letter == 0 || letter > self.datum.rank {
            return Err(CoxeterError::BadLetter {
                index: letter,
                rank: self.datum.rank,
            });
        }
        // Right descent test: w(alpha_i) negative means l(w s_i) < l(w).
        let ascends = !root_is_negative(&apply_to_root(
            &self.images,
            &self.datum.simple_roots[letter - 1],
        ));
        let images = compose(&self.images, &self.datum.simple_images(letter - 1));
        Ok((WeylElement::from_raw(&self.datum, images), ascends))
    }

    /// Letters appearing in the canonical word. Independent of the choice of
    /// reduced word.
    pub fn support(&self) -> BTreeSet<u8> {
        self.word.iter().copied().collect()
    }

    /// Parses the comma-separated-letters serialization; empty or "id" means
    /// the identity.
    pub fn parse(datum: &Arc<CoxeterDatum>, s: &str) -> Result<WeylElement, CoxeterError> {
        let s = s.trim();
        if s.is_empty() || s == "id" || s == "e" {
            return Ok(WeylElement::identity(datum));
        }
        let mut word = Vec::new();
        for tok in s.split(',') {
            let l: usize = tok.trim().parse().map_err(|_| CoxeterError::BadLetter {
                index: 0,
                rank: datum.rank,
            })?;
            word.push(l as u8);
        }
        WeylElement::from_word(datum, &word)
    }
}

/// The unique longest element, reached by greedy ascent in right weak order.
pub fn longest_element(datum: &Arc<CoxeterDatum>) -> WeylElement {
    let mut w = WeylElement::identity(datum);
    loop {
        let mut advanced = false;
        for i in 1..=datum.rank {
            let (next, ascends) = w.times_simple(i).expect("valid letter");
            if ascends {
                w = next;
                advanced = true;
                break;
            }
        }
        if !advanced {
            return w;
        }
    }
}

/// All group elements sorted by (length, canonical word). Errors when the
/// group order exceeds the cap.
pub fn enumerate_group(
    datum: &Arc<CoxeterDatum>,
    cap: u128,
) -> Result<Vec<WeylElement>, CoxeterError> {
    let order = datum.order();
    if order > cap {
        return Err(CoxeterError::EnumerationCap { order, cap });
    }
    let mut seen: HashSet<Vec<i16>> = HashSet::new();
    let mut out = Vec::with_capacity(order as usize);
    let mut queue = VecDeque::new();
    let id = WeylElement::identity(datum);
    seen.insert(id.images.clone());
    queue.push_back(id.clone());
    out.push(id);
    while let Some(w) = queue.pop_front() {
        for i in 1..=datum.rank {
            let (next, _) = w.times_simple(i).expect("valid letter");
            if seen.insert(next.images.clone()) {
                queue.push_back(next.clone());
                out.push(next);
            }
        }
    }
    debug_assert_eq!(out.len() as u128, order);
    out.sort();
    Ok(out)
}

/// Number of elements of each length; coefficients of the Poincaré polynomial.
pub fn length_distribution(
    datum: &Arc<CoxeterDatum>,
    cap: u128,
) -> Result<Vec<u128>, CoxeterError> {
    let elements = enumerate_group(datum, cap)?;
    let top = elements.iter().map(|w| w.length()).max().unwrap_or(0);
    let mut counts = vec![0u128; top + 1];
    for w in &elements {
        counts[w.length()] += 1;
    }
    Ok(counts)
}

/// A permutation of the simple reflections preserving the Coxeter matrix.
#[derive(Debug, Clone)]
pub struct DiagramAutomorphism {
    datum: Arc<CoxeterDatum>,
    /// 0-based images of the 0-based letter indices.
    map: Vec<u8>,
    order: u32,
}

impl PartialEq for DiagramAutomorphism {
    fn eq(&self, other: &Self) -> bool {
        self.datum == other.datum && self.map == other.map
    }
}
impl Eq for DiagramAutomorphism {}

impl fmt::Display for DiagramAutomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            write!(f, "id")
        } else {
            let parts: Vec<String> = self.map.iter().map(|i| (i + 1).to_string()).collect();
            write!(f, "({})", parts.join(","))
        }
    }
}

impl DiagramAutomorphism {
    pub fn identity(datum: &Arc<CoxeterDatum>) -> DiagramAutomorphism {
        DiagramAutomorphism {
            datum: Arc::clone(datum),
            map: (0..datum.rank as u8).collect(),
            order: 1,
        }
    }

    /// Validates that the index map preserves the Coxeter matrix.
    pub fn new(
        datum: &Arc<CoxeterDatum>,
        map_one_based: &[usize],
    ) -> Result<DiagramAutomorphism, CoxeterError> {
        let rank = datum.rank;
        let fail =
            || CoxeterError::NotAnAutomorphism(map_one_based.iter().map(|&v| v as u8).collect());
        if map_one_based.len() != rank {
            return Err(fail());
        }
        let mut map = vec![0u8; rank];
        let mut seen = vec![false; rank];
        for (i, &v) in map_one_based.iter().enumerate() {
            if v == 0 || v > rank || seen[v - 1] {
                return Err(fail());
            }
            seen[v - 1] = true;
            map[i] = (v - 1) as u8;
        }
        for i in 0..rank {
            for j in 0..rank {
                if datum.coxeter_matrix[i][j]
                    != datum.coxeter_matrix[map[i] as usize][map[j] as usize]
                {
                    return Err(fail());
                }
            }
        }
        let mut order = 1u32;
        let mut cur = map.clone();
        while !cur.iter().enumerate().all(|(i, &v)| v as usize == i) {
            cur = cur.iter().map(|&v| map[v as usize]).collect();
            order += 1;
        }
        Ok(DiagramAutomorphism {
            datum: Arc::clone(datum),
            map,
            order,
        })
    }

    /// The standard order-2 flip: reversal for type A (rank >= 2), swap of
    /// the last two nodes for type D. Other families have none.
    pub fn flip(datum: &Arc<CoxeterDatum>) -> Result<DiagramAutomorphism, CoxeterError> {
        let rank = datum.rank;
        match datum.family {
            Family::A if rank >= 2 => {
                let map: Vec<usize> = (0..rank).map(|i| rank - i).collect();
                DiagramAutomorphism::new(datum, &map)
            }
            Family::D => {
                let mut map: Vec<usize> = (1..=rank).collect();
                map.swap(rank - 2, rank - 1);
                DiagramAutomorphism::new(datum, &map)
            }
            _ => Err(CoxeterError::NoFlip(datum.to_string())),
        }
    }

    pub fn datum(&self) -> &Arc<CoxeterDatum> {
        &self.datum
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_identity(&self) -> bool {
        self.order == 1
    }

    /// 1-based image of a 1-based letter.
    pub fn apply_letter(&self, letter: usize) -> usize {
        self.map[letter - 1] as usize + 1
    }

    /// Image of an element: relabels a reduced word letterwise. Preserves
    /// length.
    pub fn apply(&self, w: &WeylElement) -> Result<WeylElement, CoxeterError> {
        if self.datum != w.datum {
            return Err(CoxeterError::DatumMismatch {
                left: self.datum.to_string(),
                right: w.datum.to_string(),
            });
        }
        let word: Vec<u8> = w
            .word
            .iter()
            .map(|&l| self.map[l as usize - 1] + 1)
            .collect();
        let out = WeylElement::from_word(&self.datum, &word)?;
        debug_assert_eq!(out.length(), w.length());
        Ok(out)
    }

    /// Serialization key for caches: the 0-based image vector.
    pub fn key(&self) -> &[u8] {
        &self.map
    }
}

/// Smallest twist-stable set of letters J with w in the parabolic subgroup
/// W_J: the union of the supports of all twist-iterates of w.
pub fn twisted_support(
    w: &WeylElement,
    twist: &DiagramAutomorphism,
) -> Result<BTreeSet<u8>, CoxeterError> {
    if twist.datum() != w.datum() {
        return Err(CoxeterError::DatumMismatch {
            left: twist.datum.to_string(),
            right: w.datum.to_string(),
        });
    }
    let mut out = BTreeSet::new();
    let mut cur = w.clone();
    for _ in 0..twist.order {
        out.extend(cur.support());
        cur = twist.apply(&cur)?;
    }
    Ok(out)
}

/// True when the twisted support is the full set of letters.
pub fn has_full_twisted_support(
    w: &WeylElement,
    twist: &DiagramAutomorphism,
) -> Result<bool, CoxeterError> {
    Ok(twisted_support(w, twist)?.len() == w.datum().rank())
}
