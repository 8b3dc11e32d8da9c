//! Iwahori-Hecke algebras of finite Weyl groups over Z[t], with the basis
//! multiplication rule and the structure coefficients used by the point-count
//! bridge.
//!
//! Elements are finite Z[t]-linear combinations of basis symbols T_w indexed
//! by group elements. Multiplication by a simple generator follows the
//! quadratic relation: T_x T_s = T_{xs} when the length goes up, and
//! (t-1) T_x + t T_{xs} when it goes down. All coefficient arithmetic is over
//! arbitrary-precision integers, so no specialization is lossy.

use crate::coxeter::{
    longest_element, CoxeterDatum, CoxeterError, DiagramAutomorphism, WeylElement,
};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use once_cell::sync::Lazy;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

/// Dense univariate polynomial over Z in the variable t. The coefficient
/// vector never has a trailing zero; the zero polynomial is the empty vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn zero() -> IntPoly {
        IntPoly { coeffs: Vec::new() }
    }

    pub fn one() -> IntPoly {
        IntPoly::constant(1)
    }

    pub fn constant(c: i64) -> IntPoly {
        IntPoly::from_coeffs(vec![BigInt::from(c)])
    }

    /// The variable t itself.
    pub fn t() -> IntPoly {
        IntPoly::from_coeffs(vec![BigInt::zero(), BigInt::one()])
    }

    pub fn t_minus_one() -> IntPoly {
        IntPoly::from_coeffs(vec![BigInt::from(-1), BigInt::one()])
    }

    /// t^k with integer coefficient.
    pub fn monomial(c: i64, k: usize) -> IntPoly {
        let mut coeffs = vec![BigInt::zero(); k + 1];
        coeffs[k] = BigInt::from(c);
        IntPoly::from_coeffs(coeffs)
    }

    /// Coefficients in ascending degree order; trailing zeros are dropped.
    pub fn from_coeffs(mut coeffs: Vec<BigInt>) -> IntPoly {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> BigInt {
        self.coeffs.get(k).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// None for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading_coeff(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last().is_some_and(One::is_one)
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![BigInt::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        IntPoly::from_coeffs(out)
    }

    pub fn sub(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![BigInt::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] -= c;
        }
        IntPoly::from_coeffs(out)
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        if self.is_zero() || other.is_zero() {
            return IntPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPoly::from_coeffs(out)
    }

    /// Evaluation at an integer point, exact.
    pub fn eval_big(&self, x: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Evaluation at a nonnegative integer point, refusing negative results
    /// or overflow. Point counts obtained this way must fit in u128.
    pub fn eval_u128(&self, x: u128) -> Option<u128> {
        let v = self.eval_big(&BigInt::from(x));
        if v.is_negative() {
            return None;
        }
        u128::try_from(v).ok()
    }
}

impl fmt::Display for IntPoly {
    /// Conventional descending form, e.g. "t^2 - 2*t + 1".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
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
            let show_coeff = !mag.is_one() || k == 0;
            if show_coeff {
                write!(f, "{mag}")?;
            }
            if k > 0 {
                if show_coeff {
                    write!(f, "*")?;
                }
                write!(f, "t")?;
                if k > 1 {
                    write!(f, "^{k}")?;
                }
            }
        }
        Ok(())
    }
}

/// An element of the Hecke algebra: finitely many basis terms with
/// polynomial coefficients. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeckeElement {
    datum: Arc<CoxeterDatum>,
    terms: BTreeMap<WeylElement, IntPoly>,
}

impl HeckeElement {
    pub fn zero(datum: &Arc<CoxeterDatum>) -> HeckeElement {
        HeckeElement {
            datum: Arc::clone(datum),
            terms: BTreeMap::new(),
        }
    }

    /// The basis element T_w.
    pub fn basis(w: &WeylElement) -> HeckeElement {
        let mut terms = BTreeMap::new();
        terms.insert(w.clone(), IntPoly::one());
        HeckeElement {
            datum: Arc::clone(w.datum()),
            terms,
        }
    }

    pub fn datum(&self) -> &Arc<CoxeterDatum> {
        &self.datum
    }

    pub fn terms(&self) -> impl Iterator<Item = (&WeylElement, &IntPoly)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of T_w, zero if absent.
    pub fn coefficient(&self, w: &WeylElement) -> IntPoly {
        self.terms.get(w).cloned().unwrap_or_else(IntPoly::zero)
    }

    fn add_term(&mut self, w: WeylElement, c: IntPoly) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(w) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().add(&c);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &HeckeElement) -> Result<HeckeElement, CoxeterError> {
        self.check_datum(other)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, c: &IntPoly) -> HeckeElement {
        if c.is_zero() {
            return HeckeElement::zero(&self.datum);
        }
        HeckeElement {
            datum: Arc::clone(&self.datum),
            terms: self
                .terms
                .iter()
                .map(|(w, p)| (w.clone(), p.mul(c)))
                .collect(),
        }
    }

    fn check_datum(&self, other: &HeckeElement) -> Result<(), CoxeterError> {
        if self.datum != other.datum {
            return Err(CoxeterError::DatumMismatch {
                left: self.datum.to_string(),
                right: other.datum.to_string(),
            });
        }
        Ok(())
    }

    /// Right multiplication by the generator T_s.
    pub fn right_mul_simple(&self, letter: usize) -> Result<HeckeElement, CoxeterError> {
        let mut out = HeckeElement::zero(&self.datum);
        for (w, c) in &self.terms {
            let (ws, ascends) = w.times_simple(letter)?;
            if ascends {
                out.add_term(ws, c.clone());
            } else {
                out.add_term(w.clone(), c.mul(&IntPoly::t_minus_one()));
                out.add_term(ws, c.mul(&IntPoly::t()));
            }
        }
        Ok(out)
    }

    /// Left multiplication by the generator T_s.
    pub fn left_mul_simple(&self, letter: usize) -> Result<HeckeElement, CoxeterError> {
        let s = WeylElement::simple(&self.datum, letter)?;
        let mut out = HeckeElement::zero(&self.datum);
        for (w, c) in &self.terms {
            let sw = s.multiply(w)?;
            if sw.length() > w.length() {
                out.add_term(sw, c.clone());
            } else {
                out.add_term(w.clone(), c.mul(&IntPoly::t_minus_one()));
                out.add_term(sw, c.mul(&IntPoly::t()));
            }
        }
        Ok(out)
    }

    /// Product with a basis element on the right, decomposing the reduced
    /// word of w. T_x T_w for reduced w is the letterwise product.
    pub fn mul_basis(&self, w: &WeylElement) -> Result<HeckeElement, CoxeterError> {
        self.check_datum(&HeckeElement::basis(w))?;
        let mut acc = self.clone();
        for &l in w.word() {
            acc = acc.right_mul_simple(l as usize)?;
        }
        Ok(acc)
    }

    /// General product, decomposing the right factor term by term.
    pub fn mul(&self, other: &HeckeElement) -> Result<HeckeElement, CoxeterError> {
        self.check_datum(other)?;
        let mut out = HeckeElement::zero(&self.datum);
        for (v, c) in &other.terms {
            let part = self.mul_basis(v)?.scale(c);
            out = out.add(&part)?;
        }
        Ok(out)
    }
}

type CoeffKey = (char, usize, Vec<u8>, Vec<u8>, Vec<u8>);

static COEFF_CACHE: Lazy<RwLock<HashMap<CoeffKey, IntPoly>>> =
    Lazy::new(|| RwLock::new(HashMap::new()));

/// Structure coefficient driving the point-count bridge: the coefficient of
/// T_{v^{-1} w0} in the product T_w T_{d(v)^{-1} w0}, where d is the diagram
/// automorphism and w0 the longest element.
///
/// Computed by left-decomposing T_w, so each coefficient visibly has degree
/// at most the length of w. Results are memoized process-wide.
pub fn kawanaka_coefficient(
    w: &WeylElement,
    v: &WeylElement,
    twist: &DiagramAutomorphism,
) -> Result<IntPoly, CoxeterError> {
    let datum = w.datum();
    if datum != v.datum() || datum != twist.datum() {
        return Err(CoxeterError::DatumMismatch {
            left: datum.to_string(),
            right: if datum != v.datum() {
                v.datum().to_string()
            } else {
                twist.datum().to_string()
            },
        });
    }
    let key: CoeffKey = (
        datum.family().letter(),
        datum.rank(),
        twist.key().to_vec(),
        w.word().to_vec(),
        v.word().to_vec(),
    );
    if let Some(hit) = COEFF_CACHE.read().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let w0 = longest_element(datum);
    let right = twist.apply(v)?.inverse().multiply(&w0)?;
    let target = v.inverse().multiply(&w0)?;
    let mut acc = HeckeElement::basis(&right);
    for &l in w.word().iter().rev() {
        acc = acc.left_mul_simple(l as usize)?;
    }
    let out = acc.coefficient(&target);
    COEFF_CACHE.write().unwrap().insert(key, out.clone());
    Ok(out)
}

/// Sum of the structure coefficients over the whole group in the second slot.
/// Monic of degree equal to the length of w exactly when the twisted support
/// of w is the full set of simple reflections.
pub fn dm_sum(w: &WeylElement, twist: &DiagramAutomorphism) -> Result<IntPoly, CoxeterError> {
    let datum = w.datum();
    let elements = crate::coxeter::enumerate_group(datum, datum.order())?;
    let mut acc = IntPoly::zero();
    for v in &elements {
        acc = acc.add(&kawanaka_coefficient(w, v, twist)?);
    }
    Ok(acc)
}
