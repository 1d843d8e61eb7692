//! Truncated ħ-series, sparse multivariate Laurent blocks and the
//! large-order evaluator.

use std::collections::BTreeMap;
use std::fmt;

use rug::Float;

use crate::error::{Error, Result};
use crate::exact::{Cx, Scalar, Q};

/// Coefficient ring of an [`HbarSeries`].
pub trait Coeff: Clone + fmt::Debug {
    fn zero_like(&self) -> Self;
    fn c_is_zero(&self) -> bool;
    fn c_add(&self, o: &Self) -> Result<Self>;
    fn c_mul(&self, o: &Self) -> Result<Self>;
    fn c_neg(&self) -> Self;
}

impl<S: Scalar> Coeff for S {
    fn zero_like(&self) -> Self {
        S::zero()
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn c_add(&self, o: &Self) -> Result<Self> {
        Ok(self.add(o))
    }
    fn c_mul(&self, o: &Self) -> Result<Self> {
        Ok(self.mul(o))
    }
    fn c_neg(&self) -> Self {
        self.neg()
    }
}

/// Truncated power series `Σ_{k=offset}^{kmax} c_k ħ^k`.
#[derive(Clone, Debug)]
pub struct HbarSeries<C> {
    offset: i32,
    kmax: i32,
    zero: C,
    coeffs: Vec<C>,
}

impl<C: Coeff> HbarSeries<C> {
    /// Series from coefficients starting at `ħ^offset`, known up to `ħ^kmax`.
    pub fn new(offset: i32, kmax: i32, zero: C, mut coeffs: Vec<C>) -> Self {
        let len = (kmax - offset + 1).max(0) as usize;
        coeffs.truncate(len);
        while coeffs.len() < len {
            coeffs.push(zero.zero_like());
        }
        HbarSeries { offset, kmax, zero, coeffs }
    }

    pub fn offset(&self) -> i32 {
        self.offset
    }

    /// Highest ħ-power known exactly.
    pub fn truncation_order(&self) -> i32 {
        self.kmax
    }

    /// Coefficient of `ħ^k`; zero below the offset. Panics beyond truncation.
    pub fn coeff(&self, k: i32) -> &C {
        assert!(k <= self.kmax, "coefficient ħ^{k} beyond truncation ħ^{}", self.kmax);
        if k < self.offset {
            &self.zero
        } else {
            &self.coeffs[(k - self.offset) as usize]
        }
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    /// Cauchy product truncated at the minimum valid order.
    pub fn mul(&self, o: &Self) -> Result<Self> {
        let offset = self.offset + o.offset;
        let kmax = (self.kmax + o.offset).min(o.kmax + self.offset);
        let len = (kmax - offset + 1).max(0) as usize;
        let mut out: Vec<C> = (0..len).map(|_| self.zero.zero_like()).collect();
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.c_is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                if b.c_is_zero() {
                    continue;
                }
                out[i + j] = out[i + j].c_add(&a.c_mul(b)?)?;
            }
        }
        Ok(HbarSeries { offset, kmax, zero: self.zero.zero_like(), coeffs: out })
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        let offset = self.offset.min(o.offset);
        let kmax = self.kmax.min(o.kmax);
        let mut out = Vec::new();
        for k in offset..=kmax {
            out.push(self.coeff(k).c_add(o.coeff(k))?);
        }
        Ok(HbarSeries { offset, kmax, zero: self.zero.zero_like(), coeffs: out })
    }

    pub fn neg(&self) -> Self {
        HbarSeries { offset: self.offset, kmax: self.kmax, zero: self.zero.clone(), coeffs: self.coeffs.iter().map(Coeff::c_neg).collect() }
    }

    /// The series at `−ħ`.
    pub fn parity(&self) -> Self {
        let coeffs =
            self.coeffs.iter().enumerate().map(|(i, c)| if (self.offset + i as i32) % 2 != 0 { c.c_neg() } else { c.clone() }).collect();
        HbarSeries { offset: self.offset, kmax: self.kmax, zero: self.zero.clone(), coeffs }
    }

    /// Lowers the truncation order.
    pub fn truncate(&self, kmax: i32) -> Self {
        HbarSeries::new(self.offset, kmax.min(self.kmax), self.zero.clone(), self.coeffs.clone())
    }

    /// True if every known coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Coeff::c_is_zero)
    }
}

/// Free-function form of the Cauchy product.
pub fn series_mul<C: Coeff>(a: &HbarSeries<C>, b: &HbarSeries<C>) -> Result<HbarSeries<C>> {
    a.mul(b)
}

const NO_FLOOR: i64 = i64::MIN;

/// Sparse Laurent polynomial (or truncated Laurent series) in `z_1, …, z_n`.
///
/// Series-mode blocks carry a per-variable floor: coefficients with an
/// exponent below the floor of some variable are unknown and never stored.
/// Expansions follow the ordering `|z_{o_1}| > |z_{o_2}| > ⋯` given by a
/// permutation `o`; the default is the identity.
#[derive(Clone, PartialEq)]
pub struct LaurentBlock<S> {
    nvars: usize,
    terms: BTreeMap<Vec<i32>, S>,
    floor: Option<Vec<i64>>,
}

impl<S: Scalar> fmt::Debug for LaurentBlock<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LaurentBlock[{}](", self.nvars)?;
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c:?}·z^{e:?}")?;
        }
        if let Some(fl) = &self.floor {
            write!(f, " | floor {fl:?}")?;
        }
        write!(f, ")")
    }
}

impl<S: Scalar> LaurentBlock<S> {
    pub fn zero(nvars: usize) -> Self {
        LaurentBlock { nvars, terms: BTreeMap::new(), floor: None }
    }

    pub fn constant(nvars: usize, c: S) -> Self {
        LaurentBlock::monomial(vec![0; nvars], c)
    }

    pub fn monomial(exps: Vec<i32>, c: S) -> Self {
        let nvars = exps.len();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exps, c);
        }
        LaurentBlock { nvars, terms, floor: None }
    }

    /// Builds a polynomial-mode block from `(exponents, coefficient)` pairs.
    pub fn from_terms(nvars: usize, it: impl IntoIterator<Item = (Vec<i32>, S)>) -> Result<Self> {
        let mut b = LaurentBlock::zero(nvars);
        for (e, c) in it {
            if e.len() != nvars {
                return Err(Error::Structural(format!("exponent length {} ≠ nvars {nvars}", e.len())));
            }
            b.add_term(e, &c);
        }
        Ok(b)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Vec<i32>, S> {
        &self.terms
    }

    pub fn floor(&self) -> Option<&[i64]> {
        self.floor.as_deref()
    }

    pub fn is_polynomial(&self) -> bool {
        self.floor.is_none()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `z^e` (zero if absent).
    pub fn coeff(&self, e: &[i32]) -> S {
        self.terms.get(e).cloned().unwrap_or_else(S::zero)
    }

    /// Adds `c z^e` in place, dropping the entry if it cancels.
    pub fn add_term(&mut self, e: Vec<i32>, c: &S) {
        if c.is_zero() || !self.above_floor(&e) {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = o.get().add(c);
                if v.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
        }
    }

    fn above_floor(&self, e: &[i32]) -> bool {
        match &self.floor {
            None => true,
            Some(f) => e.iter().zip(f).all(|(&x, &fl)| i64::from(x) >= fl),
        }
    }

    fn check_vars(&self, o: &Self) -> Result<()> {
        if self.nvars != o.nvars {
            return Err(Error::Structural(format!("nvars mismatch: {} vs {}", self.nvars, o.nvars)));
        }
        Ok(())
    }

    fn merge_floor(a: &Option<Vec<i64>>, b: &Option<Vec<i64>>) -> Option<Vec<i64>> {
        match (a, b) {
            (None, None) => None,
            (Some(x), None) | (None, Some(x)) => Some(x.clone()),
            (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(&p, &q)| p.max(q)).collect()),
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_vars(o)?;
        let mut out = LaurentBlock { nvars: self.nvars, terms: self.terms.clone(), floor: None };
        out.floor = Self::merge_floor(&self.floor, &o.floor);
        for (e, c) in &o.terms {
            out.add_term(e.clone(), c);
        }
        out.apply_floor();
        Ok(out)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| c.neg())
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return LaurentBlock { nvars: self.nvars, terms: BTreeMap::new(), floor: self.floor.clone() };
        }
        self.map_coeffs(|c| c.mul(s))
    }

    pub fn map_coeffs(&self, f: impl Fn(&S) -> S) -> Self {
        let terms = self
            .terms
            .iter()
            .filter_map(|(e, c)| {
                let v = f(c);
                (!v.is_zero()).then(|| (e.clone(), v))
            })
            .collect();
        LaurentBlock { nvars: self.nvars, terms, floor: self.floor.clone() }
    }

    /// Converts coefficients into another scalar type.
    pub fn convert<T: Scalar>(&self, f: impl Fn(&S) -> T) -> LaurentBlock<T> {
        let terms = self
            .terms
            .iter()
            .filter_map(|(e, c)| {
                let v = f(c);
                (!v.is_zero()).then(|| (e.clone(), v))
            })
            .collect();
        LaurentBlock { nvars: self.nvars, terms, floor: self.floor.clone() }
    }

    /// Multiplies by `z^shift`.
    pub fn mul_monomial(&self, shift: &[i32]) -> Self {
        let terms = self.terms.iter().map(|(e, c)| (e.iter().zip(shift).map(|(a, b)| a + b).collect(), c.clone())).collect();
        let floor =
            self.floor.as_ref().map(|f| f.iter().zip(shift).map(|(&a, &b)| if a == NO_FLOOR { a } else { a + i64::from(b) }).collect());
        LaurentBlock { nvars: self.nvars, terms, floor }
    }

    fn max_exp(&self, v: usize) -> Option<i64> {
        self.terms.keys().map(|e| i64::from(e[v])).max()
    }

    /// Product; in series mode the result floor keeps only coefficients
    /// determined by the known parts of both factors.
    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.check_vars(o)?;
        let floor = match (&self.floor, &o.floor) {
            (None, None) => None,
            _ => {
                let mut f = vec![NO_FLOOR; self.nvars];
                for (v, fv) in f.iter_mut().enumerate() {
                    let fa = self.floor.as_ref().map_or(NO_FLOOR, |x| x[v]);
                    let fb = o.floor.as_ref().map_or(NO_FLOOR, |x| x[v]);
                    let ca = if fa == NO_FLOOR { NO_FLOOR } else { fa.saturating_add(o.max_exp(v).unwrap_or(0)) };
                    let cb = if fb == NO_FLOOR { NO_FLOOR } else { fb.saturating_add(self.max_exp(v).unwrap_or(0)) };
                    *fv = ca.max(cb);
                }
                Some(f)
            }
        };
        let mut out = LaurentBlock { nvars: self.nvars, terms: BTreeMap::new(), floor };
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e: Vec<i32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, &ca.mul(cb));
            }
        }
        Ok(out)
    }

    fn apply_floor(&mut self) {
        if let Some(f) = self.floor.clone() {
            self.terms.retain(|e, _| e.iter().zip(&f).all(|(&x, &fl)| i64::from(x) >= fl));
        }
    }

    /// Forces series mode with the given floor.
    pub fn with_floor(mut self, floor: Vec<i64>) -> Self {
        self.floor = Some(floor);
        self.apply_floor();
        self
    }

    /// Exact division by `z_i^s − λ z_j^s`; a nonzero remainder is an error.
    pub fn div_binomial(&self, i: usize, j: usize, s: i32, lambda: &S) -> Result<Self> {
        if i == j || i >= self.nvars || j >= self.nvars {
            return Err(Error::Domain(format!("invalid binomial variables ({i}, {j})")));
        }
        if !self.is_polynomial() {
            return Err(Error::Structural("exact division requires polynomial mode".into()));
        }
        // Long division in descending z_i exponent.
        let mut rem: BTreeMap<(i32, Vec<i32>), S> = self.terms.iter().map(|(e, c)| ((e[i], e.clone()), c.clone())).collect();
        let min_i = self.terms.keys().map(|e| e[i]).min().unwrap_or(0);
        let mut quo = LaurentBlock::zero(self.nvars);
        while let Some(((ei, e), c)) = rem.pop_last() {
            if ei - s < min_i {
                return Err(Error::Truncation(format!("division by z{}^{s} − λ z{}^{s} leaves a remainder at {:?}", i + 1, j + 1, e)));
            }
            let mut qe = e.clone();
            qe[i] -= s;
            // c z^e comes from q z^{qe} · z_i^s; subtract −λ q z^{qe} z_j^s.
            let mut ne = qe.clone();
            ne[j] += s;
            let add = lambda.mul(&c);
            let key = (ne[i], ne);
            let v = rem.remove(&key).map_or_else(|| add.clone(), |old| old.add(&add));
            if !v.is_zero() {
                rem.insert(key, v);
            }
            quo.add_term(qe, &c);
        }
        Ok(quo)
    }

    /// Sets `z_j = φ z_i` and removes variable `j`.
    pub fn substitute_proportional(&self, j: usize, i: usize, phi: &S) -> Result<Self> {
        if i == j || i >= self.nvars || j >= self.nvars {
            return Err(Error::Domain("invalid substitution variables".into()));
        }
        let mut out = LaurentBlock::zero(self.nvars - 1);
        for (e, c) in &self.terms {
            let p = e[j];
            let ph = if p >= 0 { phi.pow(p as u32) } else { phi.inv().expect("nonzero").pow((-p) as u32) };
            let mut ne = e.clone();
            ne[i] += p;
            ne.remove(j);
            out.add_term(ne, &c.mul(&ph));
        }
        Ok(out)
    }

    /// Relabels variables: variable `v` becomes `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let relabel = |e: &[i32]| {
            let mut ne = vec![0; e.len()];
            for (v, &x) in e.iter().enumerate() {
                ne[perm[v]] = x;
            }
            ne
        };
        let terms = self.terms.iter().map(|(e, c)| (relabel(e), c.clone())).collect();
        let floor = self.floor.as_ref().map(|f| {
            let mut nf = vec![NO_FLOOR; f.len()];
            for (v, &x) in f.iter().enumerate() {
                nf[perm[v]] = x;
            }
            nf
        });
        LaurentBlock { nvars: self.nvars, terms, floor }
    }

    /// Total degrees present.
    pub fn total_degrees(&self) -> Vec<i32> {
        let mut d: Vec<i32> = self.terms.keys().map(|e| e.iter().sum()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Drops every term below the floor of `other` so two series-mode
    /// expansions can be compared on their common known region.
    pub fn restrict_to_floor(&self, floor: &[i64]) -> Self {
        let mut out = self.clone();
        out.floor = Self::merge_floor(&self.floor, &Some(floor.to_vec()));
        out.apply_floor();
        out
    }
}

impl<S: Scalar> Coeff for LaurentBlock<S> {
    fn zero_like(&self) -> Self {
        LaurentBlock::zero(self.nvars)
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn c_add(&self, o: &Self) -> Result<Self> {
        self.add(o)
    }
    fn c_mul(&self, o: &Self) -> Result<Self> {
        self.mul(o)
    }
    fn c_neg(&self) -> Self {
        self.neg()
    }
}

/// Rank of each variable in an ordering: `rank[v] = 0` for the largest modulus.
pub fn ordering_rank(ordering: &[usize]) -> Vec<usize> {
    let mut rank = vec![0; ordering.len()];
    for (pos, &v) in ordering.iter().enumerate() {
        rank[v] = pos;
    }
    rank
}

/// Geometric expansion of `1/(z_i^s − z_j^s)` to `depth` terms in the region
/// fixed by `ordering` (first entry has the largest modulus).
pub fn invert_power_difference<S: Scalar>(
    nvars: usize,
    i: usize,
    j: usize,
    s: i32,
    depth: usize,
    ordering: &[usize],
) -> Result<LaurentBlock<S>> {
    if i == j {
        return Err(Error::Domain("invert_difference needs distinct variables".into()));
    }
    if i >= nvars || j >= nvars || ordering.len() != nvars {
        return Err(Error::Domain("variable index out of range".into()));
    }
    let rank = ordering_rank(ordering);
    let (big, small, sign) = if rank[i] < rank[j] { (i, j, 1) } else { (j, i, -1) };
    let mut b = LaurentBlock::zero(nvars);
    for l in 0..depth as i32 {
        let mut e = vec![0; nvars];
        e[big] = -s * (l + 1);
        e[small] = s * l;
        b.add_term(e, &S::from_i64(sign));
    }
    let mut floor = vec![NO_FLOOR; nvars];
    floor[big] = -i64::from(s) * depth as i64;
    Ok(b.with_floor(floor))
}

/// Geometric expansion of `1/(z_i − z_j)` to `depth` terms with the default
/// ordering `|z_1| > ⋯ > |z_n|` (indices are 0-based).
pub fn invert_difference<S: Scalar>(nvars: usize, i: usize, j: usize, depth: usize) -> Result<LaurentBlock<S>> {
    let ordering: Vec<usize> = (0..nvars).collect();
    invert_power_difference(nvars, i, j, 1, depth, &ordering)
}

/// One Borel-plane singularity with its minor.
#[derive(Clone, Debug)]
pub struct SingularityDatum {
    pub action: Cx,
    pub stokes: Cx,
    pub beta0: i64,
    pub beta_i: i64,
    pub minor_coeffs: Vec<Cx>,
}

/// Evaluates `Σ_i (S_i/2π) Γ(M_i)/A_i^{M_i} Σ_{k≤K} A_i^k φ_k^{(i)}/(M_i−1)^{\underline k}`
/// with `M_i = m + β₀ − β_i`; the `Γ/A^M` ratio is formed in log space.
pub fn large_order_eval(data: &[SingularityDatum], m: i64, k_max: usize) -> Result<Cx> {
    let first = data.first().ok_or_else(|| Error::Domain("no singularity data".into()))?;
    let prec = first.action.prec();
    let mut total = Cx::zero(prec);
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    for d in data {
        let mm = m + d.beta0 - d.beta_i;
        if mm - 1 < k_max as i64 {
            return Err(Error::Domain(format!("M − 1 = {} smaller than K = {k_max}", mm - 1)));
        }
        if d.minor_coeffs.len() <= k_max {
            return Err(Error::Domain(format!("only {} minor coefficients for K = {k_max}", d.minor_coeffs.len())));
        }
        let abs_a = d.action.abs();
        if abs_a.is_zero() {
            return Err(Error::Domain("zero action".into()));
        }
        let arg_a = Float::with_val(prec, d.action.im.atan2_ref(&d.action.re));
        let ln_gamma = Float::with_val(prec, Float::with_val(prec, mm).ln_gamma_ref());
        let ln_mag = ln_gamma - Float::with_val(prec, abs_a.ln_ref()) * mm;
        let phase = -arg_a * mm;
        let (s, c) = phase.sin_cos(Float::new(prec));
        let mag = ln_mag.exp();
        let lead = Cx { re: Float::with_val(prec, &mag * &c), im: Float::with_val(prec, &mag * &s) };
        let mut inner = Cx::zero(prec);
        let mut apow = Cx::real(Float::with_val(prec, 1));
        let mut falling = Float::with_val(prec, 1);
        for k in 0..=k_max {
            if k > 0 {
                apow = apow.mul(&d.action);
                falling *= mm - k as i64;
            }
            let term = apow.mul(&d.minor_coeffs[k]).scale(&Float::with_val(prec, falling.clone().recip()));
            inner = inner.add(&term);
        }
        let contrib = d.stokes.mul(&lead).mul(&inner).scale(&Float::with_val(prec, two_pi.clone().recip()));
        total = total.add(&contrib);
    }
    Ok(total)
}

/// [`large_order_eval`] indexed by genus: `m = 2g − 2 + n`.
pub fn large_order_eval_genus(data: &[SingularityDatum], g: i64, n: i64, k_max: usize) -> Result<Cx> {
    large_order_eval(data, 2 * g - 2 + n, k_max)
}

/// Rational truncated series helper: coefficients as exact rationals.
pub type QSeries = HbarSeries<Q>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{factorial, q};
    use proptest::prelude::*;

    fn qs(coeffs: &[i64], kmax: i32) -> QSeries {
        HbarSeries::new(0, kmax, Q::new(), coeffs.iter().map(|&c| Q::from(c)).collect())
    }

    #[test]
    fn product_examples() {
        let a = qs(&[1, 1], 4);
        let b = qs(&[1, -1], 4);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.coeffs(), qs(&[1, 0, -1], 4).coeffs());
        let one = qs(&[1], 4);
        assert_eq!(a.mul(&one).unwrap().coeffs(), a.coeffs());
        let e: Vec<Q> = (0..=10).map(|m| Q::from((1, factorial(m)))).collect();
        let em: Vec<Q> = (0..=10).map(|m| Q::from((if m % 2 == 0 { 1 } else { -1 }, factorial(m)))).collect();
        let pe = HbarSeries::new(0, 10, Q::new(), e).mul(&HbarSeries::new(0, 10, Q::new(), em)).unwrap();
        assert_eq!(pe.coeff(0), &Q::from(1));
        assert!((1..=10).all(|k| pe.coeff(k).is_zero()));
    }

    #[test]
    fn truncation_is_tracked() {
        let a = HbarSeries::new(-1, 5, Q::new(), vec![Q::from(1); 7]);
        let b = qs(&[1, 2, 3], 3);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.offset(), -1);
        assert_eq!(p.truncation_order(), 2);
    }

    #[test]
    fn mismatched_blocks_are_rejected() {
        let a = HbarSeries::new(0, 1, LaurentBlock::<Q>::zero(1), vec![LaurentBlock::constant(1, Q::from(1))]);
        let b = HbarSeries::new(0, 1, LaurentBlock::<Q>::zero(2), vec![LaurentBlock::constant(2, Q::from(1))]);
        assert!(series_mul(&a, &b).is_err());
    }

    #[test]
    fn invert_difference_examples() {
        let b: LaurentBlock<Q> = invert_difference(2, 0, 1, 3).unwrap();
        let expected =
            LaurentBlock::from_terms(2, vec![(vec![-1, 0], Q::from(1)), (vec![-2, 1], Q::from(1)), (vec![-3, 2], Q::from(1))]).unwrap();
        assert_eq!(b.terms(), expected.terms());
        let c: LaurentBlock<Q> = invert_difference(2, 1, 0, 2).unwrap();
        assert_eq!(c.terms(), &expected.neg().terms().iter().filter(|(e, _)| e[0] >= -2).map(|(e, c)| (e.clone(), c.clone())).collect());
        assert!(invert_difference::<Q>(2, 1, 1, 2).is_err());
        let diff = LaurentBlock::from_terms(2, vec![(vec![1, 0], Q::from(1)), (vec![0, 1], Q::from(-1))]).unwrap();
        let inv: LaurentBlock<Q> = invert_difference(2, 0, 1, 20).unwrap();
        let prod = diff.mul(&inv).unwrap();
        assert_eq!(prod.terms(), LaurentBlock::constant(2, Q::from(1)).terms());
    }

    #[test]
    fn antisymmetry_after_truncation() {
        for depth in 1..8 {
            let a: LaurentBlock<Q> = invert_difference(3, 0, 2, depth).unwrap();
            let b: LaurentBlock<Q> = invert_difference(3, 2, 0, depth).unwrap();
            assert_eq!(a.add(&b).unwrap().terms().len(), 0);
        }
    }

    #[test]
    fn exact_binomial_division() {
        // (z1^2 − z2^2)(z1 + 3 z2^−1) / (z1^2 − z2^2)
        let f = LaurentBlock::from_terms(2, vec![(vec![1, 0], Q::from(1)), (vec![0, -1], Q::from(3))]).unwrap();
        let b = LaurentBlock::from_terms(2, vec![(vec![2, 0], Q::from(1)), (vec![0, 2], Q::from(-1))]).unwrap();
        let p = f.mul(&b).unwrap();
        assert_eq!(p.div_binomial(0, 1, 2, &Q::from(1)).unwrap(), f);
        assert!(f.div_binomial(0, 1, 2, &Q::from(1)).is_err());
    }

    #[test]
    fn large_order_trivial_datum() {
        let prec = 128;
        let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
        let mut coeffs = vec![Cx::zero(prec); 3];
        coeffs[0] = Cx::from_f64(1.0, 0.0, prec);
        let d =
            SingularityDatum { action: Cx::from_f64(1.0, 0.0, prec), stokes: Cx::real(two_pi), beta0: 0, beta_i: 0, minor_coeffs: coeffs };
        let v = large_order_eval(&[d], 10, 0).unwrap().to_f64();
        assert!((v.0 - 362880.0).abs() < 1e-6 && v.1.abs() < 1e-9);
        assert!(large_order_eval(&[], 10, 0).is_err());
    }

    #[test]
    fn conjugate_pair_is_real_and_order_invariant() {
        let prec = 128;
        let mk = |im: f64| SingularityDatum {
            action: Cx::from_f64(1.3, im, prec),
            stokes: Cx::from_f64(0.4, 2.0 * im, prec),
            beta0: 0,
            beta_i: 1,
            minor_coeffs: vec![Cx::from_f64(1.0, im, prec), Cx::from_f64(-0.5, 3.0 * im, prec)],
        };
        let a = mk(0.7);
        let b = mk(-0.7);
        let v1 = large_order_eval(&[a.clone(), b.clone()], 30, 1).unwrap();
        let v2 = large_order_eval(&[b, a.clone()], 30, 1).unwrap();
        let (re, im) = v1.to_f64();
        assert!(im.abs() < 1e-10 * re.abs());
        assert!(v1.sub(&v2).abs().to_f64() < 1e-12 * re.abs());
        let g = large_order_eval_genus(std::slice::from_ref(&a), 15, 1, 1).unwrap();
        let m = large_order_eval(&[a], 29, 1).unwrap();
        assert!(g.sub(&m).abs().to_f64() == 0.0);
    }

    fn arb_series() -> impl Strategy<Value = QSeries> {
        proptest::collection::vec((-9i64..10, 1i64..5), 13)
            .prop_map(|v| HbarSeries::new(0, 12, Q::new(), v.iter().map(|&(a, b)| q(a, b)).collect()))
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_series(), b in arb_series(), c in arb_series()) {
            let l = a.mul(&b).unwrap().mul(&c).unwrap();
            let r = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(l.coeffs(), r.coeffs());
            let d1 = a.mul(&b.add(&c).unwrap()).unwrap();
            let d2 = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(d1.coeffs(), d2.coeffs());
            let ab = a.mul(&b).unwrap();
            let ba = b.mul(&a).unwrap();
            prop_assert_eq!(ab.coeffs(), ba.coeffs());
        }
    }
}
