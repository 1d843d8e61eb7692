//! Exact scalars: big rationals, cyclotomic field elements, high-precision
//! complex embeddings and factorial-type combinatorics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always reduced with positive denominator.
pub type Q = Rational;

/// Convenience constructor for `num/den`.
pub fn q(num: i64, den: i64) -> Q {
    Q::from((num, den))
}

/// Formats a rational as `num/den`.
pub fn q_to_string(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `num/den` or a bare integer.
pub fn q_from_str(s: &str) -> Result<Q> {
    s.trim().parse::<Q>().map_err(|e| Error::Parse(format!("invalid rational {s:?}: {e}")))
}

/// Serde adapter storing a rational as the string `num/den`.
pub mod qser {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&q_to_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        q_from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for vectors of rationals.
pub mod qvecser {
    use super::*;

    pub fn serialize<S: Serializer>(x: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<String> = x.iter().map(q_to_string).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| q_from_str(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// Converts a decimal-digit precision into MPFR bits, with guard bits.
pub fn digits_to_bits(digits: u32) -> u32 {
    (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as u32 + 16
}

/// High-precision complex number.
#[derive(Clone, Debug)]
pub struct Cx {
    pub re: Float,
    pub im: Float,
}

impl Cx {
    pub fn zero(prec: u32) -> Self {
        Cx { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn real(re: Float) -> Self {
        let im = Float::new(re.prec());
        Cx { re, im }
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Self {
        Cx { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    pub fn from_q(x: &Q, prec: u32) -> Self {
        Cx::real(Float::with_val(prec, x))
    }

    /// `e^{2πi j/n}`.
    pub fn root_of_unity(n: u32, j: i64, prec: u32) -> Self {
        let jr = j.rem_euclid(i64::from(n));
        let theta = Float::with_val(prec, Constant::Pi) * 2u32 * Float::with_val(prec, jr) / n;
        let (s, c) = theta.sin_cos(Float::new(prec));
        Cx { re: c, im: s }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn add(&self, o: &Cx) -> Cx {
        Cx { re: Float::with_val(self.prec(), &self.re + &o.re), im: Float::with_val(self.prec(), &self.im + &o.im) }
    }

    pub fn sub(&self, o: &Cx) -> Cx {
        Cx { re: Float::with_val(self.prec(), &self.re - &o.re), im: Float::with_val(self.prec(), &self.im - &o.im) }
    }

    pub fn neg(&self) -> Cx {
        Cx { re: -self.re.clone(), im: -self.im.clone() }
    }

    pub fn mul(&self, o: &Cx) -> Cx {
        let p = self.prec();
        let re = Float::with_val(p, &self.re * &o.re) - Float::with_val(p, &self.im * &o.im);
        let im = Float::with_val(p, &self.re * &o.im) + Float::with_val(p, &self.im * &o.re);
        Cx { re, im }
    }

    pub fn scale(&self, s: &Float) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re * s), im: Float::with_val(p, &self.im * s) }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, &self.re * &self.re) + Float::with_val(p, &self.im * &self.im)
    }

    pub fn abs(&self) -> Float {
        self.norm_sqr().sqrt()
    }

    pub fn conj(&self) -> Cx {
        Cx { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn inv(&self) -> Cx {
        let n = self.norm_sqr();
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re / &n), im: -Float::with_val(p, &self.im / &n) }
    }

    pub fn div(&self, o: &Cx) -> Cx {
        self.mul(&o.inv())
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, e: i64) -> Cx {
        let mut base = if e < 0 { self.inv() } else { self.clone() };
        let mut k = e.unsigned_abs();
        let mut acc = Cx::real(Float::with_val(self.prec(), 1));
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

/// Ring operations shared by exact scalar types.
pub trait Scalar: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_q(x: &Q) -> Self;
    fn from_i64(v: i64) -> Self {
        Self::from_q(&Q::from(v))
    }
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul_q(&self, x: &Q) -> Self;
    fn add_assign(&mut self, o: &Self) {
        *self = self.add(o);
    }
    /// Multiplicative inverse; `None` for zero.
    fn inv(&self) -> Option<Self>;
    /// `e^{2πi j/n}` if representable in this scalar type.
    fn root_of_unity(n: u32, j: i64) -> Option<Self>;
    /// Complex conjugate.
    fn conj(&self) -> Self;
    /// Complex embedding at `prec` bits.
    fn embed(&self, prec: u32) -> Cx;
    fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }
}

impl Scalar for Q {
    fn zero() -> Self {
        Q::new()
    }
    fn one() -> Self {
        Q::from(1)
    }
    fn from_q(x: &Q) -> Self {
        x.clone()
    }
    fn is_zero(&self) -> bool {
        self.cmp0() == std::cmp::Ordering::Equal
    }
    fn add(&self, o: &Self) -> Self {
        Q::from(self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Q::from(self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Q::from(self * o)
    }
    fn neg(&self) -> Self {
        Q::from(-self)
    }
    fn mul_q(&self, x: &Q) -> Self {
        Q::from(self * x)
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
    fn inv(&self) -> Option<Self> {
        if Scalar::is_zero(self) {
            None
        } else {
            Some(self.clone().recip())
        }
    }
    fn root_of_unity(n: u32, j: i64) -> Option<Self> {
        let jr = j.rem_euclid(i64::from(n));
        if jr == 0 {
            Some(Q::from(1))
        } else if 2 * jr == i64::from(n) {
            Some(Q::from(-1))
        } else {
            None
        }
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn embed(&self, prec: u32) -> Cx {
        Cx::from_q(self, prec)
    }
}

fn gcd_u(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd_u(b, a % b)
    }
}

/// Least common multiple.
pub fn lcm_u(a: u32, b: u32) -> u32 {
    a / gcd_u(a, b) * b
}

/// Reduction data for `Q(ζ_n)`: `red[k]` holds `x^k mod Φ_n` for `0 ≤ k < n`.
#[derive(Debug)]
struct CycloTable {
    phi: usize,
    red: Vec<Vec<i64>>,
}

/// Integer coefficients of the `n`-th cyclotomic polynomial, lowest degree first.
pub fn cyclotomic_polynomial(n: u32) -> Vec<i64> {
    // x^n - 1 divided by Φ_d for all proper divisors d.
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for d in 1..n {
        if n.is_multiple_of(d) {
            let den = cyclotomic_polynomial(d);
            num = poly_div_exact(&num, &den);
        }
    }
    num
}

fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let lead = den[dd];
    let qlen = num.len() - dd;
    let mut quo = vec![0i64; qlen];
    for i in (0..qlen).rev() {
        let c = rem[i + dd] / lead;
        quo[i] = c;
        for (j, dj) in den.iter().enumerate() {
            rem[i + j] -= c * dj;
        }
    }
    debug_assert!(rem.iter().all(|&x| x == 0));
    quo
}

fn table(n: u32) -> Arc<CycloTable> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<CycloTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cyclotomic cache poisoned").get(&n) {
        return t.clone();
    }
    let phi_poly = cyclotomic_polynomial(n);
    let phi = phi_poly.len() - 1;
    let mut red: Vec<Vec<i64>> = Vec::with_capacity(n as usize);
    let mut cur = vec![0i64; phi];
    if phi > 0 {
        cur[0] = 1;
    }
    for _ in 0..n {
        red.push(cur.clone());
        // multiply by x and reduce with the monic Φ_n
        let top = cur[phi - 1];
        let mut next = vec![0i64; phi];
        for i in (1..phi).rev() {
            next[i] = cur[i - 1];
        }
        for i in 0..phi {
            next[i] -= top * phi_poly[i];
        }
        cur = next;
    }
    let t = Arc::new(CycloTable { phi, red });
    cache.lock().expect("cyclotomic cache poisoned").insert(n, t.clone());
    t
}

/// Euler's totient via the cyclotomic polynomial degree.
pub fn euler_phi(n: u32) -> usize {
    table(n).phi
}

/// Element of `Q(ζ_n)`, stored as a residue modulo `Φ_n` in the power basis.
#[derive(Clone)]
pub struct Cyclotomic {
    order: u32,
    coeffs: Vec<Q>,
}

impl fmt::Debug for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyclotomic({}; ", self.order)?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Cyclotomic {
    /// Builds an element from power-basis coefficients of any length,
    /// reducing modulo `Φ_order`.
    pub fn from_powers(order: u32, powers: &[Q]) -> Self {
        assert!(order >= 1, "cyclotomic order must be positive");
        let t = table(order);
        let mut coeffs = vec![Q::new(); t.phi];
        for (k, c) in powers.iter().enumerate() {
            if Scalar::is_zero(c) {
                continue;
            }
            let row = &t.red[k % order as usize];
            for (i, &ri) in row.iter().enumerate() {
                if ri != 0 {
                    coeffs[i] += Q::from(c * ri);
                }
            }
        }
        Cyclotomic { order, coeffs }
    }

    /// The rational `x` viewed in `Q(ζ_1) = Q`.
    pub fn rational(x: Q) -> Self {
        Cyclotomic { order: 1, coeffs: vec![x] }
    }

    /// `ζ_n^j`.
    pub fn zeta(n: u32, j: i64) -> Self {
        let t = table(n);
        let row = &t.red[j.rem_euclid(i64::from(n)) as usize];
        Cyclotomic { order: n, coeffs: row.iter().map(|&v| Q::from(v)).collect() }
    }

    /// `sin(pπ/d)` as an element of `Q(ζ_{lcm(2d,4)})`.
    pub fn sin_pi(p: i64, d: u32) -> Self {
        let z = Cyclotomic::zeta(2 * d, p).sub(&Cyclotomic::zeta(2 * d, -p));
        // divide by 2i: multiply by -i/2
        z.mul(&Cyclotomic::zeta(4, 3)).mul_q(&q(1, 2))
    }

    /// `cos(pπ/d)` as an element of `Q(ζ_{2d})`.
    pub fn cos_pi(p: i64, d: u32) -> Self {
        Cyclotomic::zeta(2 * d, p).add(&Cyclotomic::zeta(2 * d, -p)).mul_q(&q(1, 2))
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    /// Re-expresses the element in `Q(ζ_m)`; `order` must divide `m`.
    pub fn lift(&self, m: u32) -> Self {
        if m == self.order {
            return self.clone();
        }
        assert!(m.is_multiple_of(self.order), "cannot lift order {} to {}", self.order, m);
        let step = (m / self.order) as usize;
        let mut powers = vec![Q::new(); m as usize];
        for (i, c) in self.coeffs.iter().enumerate() {
            powers[(i * step) % m as usize] += c;
        }
        Cyclotomic::from_powers(m, &powers)
    }

    fn aligned(&self, o: &Self) -> (Self, Self) {
        let m = lcm_u(self.order, o.order);
        (self.lift(m), o.lift(m))
    }

    /// Rational value if the element lies in `Q`.
    pub fn to_rational(&self) -> Option<Q> {
        if self.coeffs.iter().skip(1).all(Scalar::is_zero) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    /// True if the element is fixed by complex conjugation.
    pub fn is_real(&self) -> bool {
        *self == self.conj()
    }

    /// Real part `(c + c̄)/2`.
    pub fn real_part(&self) -> Self {
        self.add(&self.conj()).mul_q(&q(1, 2))
    }

    /// Embedding at a decimal precision.
    pub fn embed_digits(&self, digits: u32) -> Cx {
        Scalar::embed(self, digits_to_bits(digits))
    }
}

impl PartialEq for Cyclotomic {
    fn eq(&self, o: &Self) -> bool {
        if self.order == o.order {
            self.coeffs == o.coeffs
        } else {
            let (a, b) = self.aligned(o);
            a.coeffs == b.coeffs
        }
    }
}

impl Scalar for Cyclotomic {
    fn zero() -> Self {
        Cyclotomic::rational(Q::new())
    }
    fn one() -> Self {
        Cyclotomic::rational(Q::from(1))
    }
    fn from_q(x: &Q) -> Self {
        Cyclotomic::rational(x.clone())
    }
    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }
    fn add(&self, o: &Self) -> Self {
        if self.order != o.order {
            let (a, b) = self.aligned(o);
            return a.add(&b);
        }
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| Q::from(a + b)).collect();
        Cyclotomic { order: self.order, coeffs }
    }
    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }
    fn mul(&self, o: &Self) -> Self {
        if self.order != o.order {
            if self.order == 1 {
                return o.mul_q(&self.coeffs[0]);
            }
            if o.order == 1 {
                return self.mul_q(&o.coeffs[0]);
            }
            let (a, b) = self.aligned(o);
            return a.mul(&b);
        }
        let n = self.order as usize;
        let mut acc = vec![Q::new(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if Scalar::is_zero(a) {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                if Scalar::is_zero(b) {
                    continue;
                }
                acc[(i + j) % n] += Q::from(a * b);
            }
        }
        Cyclotomic::from_powers(self.order, &acc)
    }
    fn neg(&self) -> Self {
        Cyclotomic { order: self.order, coeffs: self.coeffs.iter().map(|c| Q::from(-c)).collect() }
    }
    fn mul_q(&self, x: &Q) -> Self {
        Cyclotomic { order: self.order, coeffs: self.coeffs.iter().map(|c| Q::from(c * x)).collect() }
    }
    fn inv(&self) -> Option<Self> {
        if Scalar::is_zero(self) {
            return None;
        }
        if self.order == 1 {
            return Some(Cyclotomic::rational(self.coeffs[0].clone().recip()));
        }
        // Solve (multiplication by self) · c = 1 in the power basis.
        let phi = self.coeffs.len();
        let mut cols: Vec<Vec<Q>> = Vec::with_capacity(phi);
        for j in 0..phi {
            let mut e = vec![Q::new(); phi];
            e[j] = Q::from(1);
            cols.push(self.mul(&Cyclotomic { order: self.order, coeffs: e }).coeffs);
        }
        let rows: Vec<Vec<Q>> = (0..phi).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
        let mut rhs = vec![Q::new(); phi];
        rhs[0] = Q::from(1);
        let sol = solve_linear(rows, rhs).ok()?;
        Some(Cyclotomic { order: self.order, coeffs: sol })
    }
    fn root_of_unity(n: u32, j: i64) -> Option<Self> {
        Some(Cyclotomic::zeta(n, j))
    }
    fn conj(&self) -> Self {
        let n = self.order as usize;
        let mut powers = vec![Q::new(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            powers[(n - i) % n] += c;
        }
        Cyclotomic::from_powers(self.order, &powers)
    }
    fn embed(&self, prec: u32) -> Cx {
        let mut acc = Cx::zero(prec);
        for (i, c) in self.coeffs.iter().enumerate() {
            if Scalar::is_zero(c) {
                continue;
            }
            let z = Cx::root_of_unity(self.order, i as i64, prec);
            acc = acc.add(&z.scale(&Float::with_val(prec, c)));
        }
        acc
    }
}

#[derive(Serialize, Deserialize)]
struct CycloRepr {
    r: u32,
    #[serde(with = "qvecser")]
    coeffs: Vec<Q>,
}

impl Serialize for Cyclotomic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CycloRepr { r: self.order, coeffs: self.coeffs.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cyclotomic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CycloRepr::deserialize(d)?;
        if repr.r == 0 {
            return Err(serde::de::Error::custom("cyclotomic order must be positive"));
        }
        Ok(Cyclotomic::from_powers(repr.r, &repr.coeffs))
    }
}

/// Complex embedding of a cyclotomic element at a decimal precision (≥ 15 digits).
pub fn cyclo_embed(c: &Cyclotomic, digits: u32) -> Result<Cx> {
    if digits < 15 {
        return Err(Error::Domain(format!("precision {digits} below 15 digits")));
    }
    Ok(c.embed_digits(digits))
}

/// Solves `A x = b` exactly by Gaussian elimination. Overdetermined systems
/// are accepted and must be consistent; rank deficiency is an error.
pub fn solve_linear<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>> {
    let rows = a.len();
    if rows != b.len() {
        return Err(Error::Structural("row count mismatch".into()));
    }
    let cols = a.first().map_or(0, Vec::len);
    let mut pivot_row = 0;
    let mut pivots = Vec::with_capacity(cols);
    for c in 0..cols {
        let Some(p) = (pivot_row..rows).find(|&r| !a[r][c].is_zero()) else {
            return Err(Error::Pipeline(format!("linear system is rank deficient at column {c}")));
        };
        a.swap(pivot_row, p);
        b.swap(pivot_row, p);
        let inv = a[pivot_row][c].inv().expect("nonzero pivot");
        for j in c..cols {
            a[pivot_row][j] = a[pivot_row][j].mul(&inv);
        }
        b[pivot_row] = b[pivot_row].mul(&inv);
        for r in 0..rows {
            if r == pivot_row || a[r][c].is_zero() {
                continue;
            }
            let f = a[r][c].clone();
            for j in c..cols {
                let t = a[pivot_row][j].mul(&f);
                a[r][j] = a[r][j].sub(&t);
            }
            let t = b[pivot_row].mul(&f);
            b[r] = b[r].sub(&t);
        }
        pivots.push(pivot_row);
        pivot_row += 1;
    }
    if b.iter().skip(pivot_row).any(|x| !x.is_zero()) {
        return Err(Error::Pipeline("inconsistent linear system".into()));
    }
    Ok(pivots.into_iter().map(|r| b[r].clone()).collect())
}

/// The r-factorial `m (m−r) (m−2r) ⋯` down to the least positive term.
pub fn r_factorial(m: i64, r: i64) -> Result<Integer> {
    if m <= 0 || r < 2 {
        return Err(Error::Domain(format!("r_factorial needs m ≥ 1 and r ≥ 2, got ({m}, {r})")));
    }
    let mut acc = Integer::from(1);
    let mut k = m;
    while k > 0 {
        acc *= k;
        k -= r;
    }
    Ok(acc)
}

/// Double factorial `m!!` with `(−1)!! = 0!! = 1`.
pub fn double_factorial(m: i64) -> Integer {
    if m <= 0 {
        Integer::from(1)
    } else {
        r_factorial(m, 2).expect("positive argument")
    }
}

/// Falling factorial `x (x−1) ⋯ (x−k+1)` of a rational.
pub fn falling_factorial(x: &Q, k: u32) -> Q {
    let mut acc = Q::from(1);
    for j in 0..k {
        acc *= Q::from(x - j);
    }
    acc
}

/// Falling factorial of an integer.
pub fn falling_factorial_int(x: i64, k: u32) -> Integer {
    let mut acc = Integer::from(1);
    for j in 0..i64::from(k) {
        acc *= x - j;
    }
    acc
}

/// Binomial coefficient `C(n, k)` for integer `n` (possibly negative) and `k ≥ 0`.
pub fn binomial(n: i64, k: i64) -> Integer {
    if k < 0 {
        return Integer::new();
    }
    Integer::from(n).binomial(k as u32)
}

/// Factorial `m!`.
pub fn factorial(m: u32) -> Integer {
    Integer::factorial(m).into()
}

/// `π` at `prec` bits.
pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

/// Multiplicities `p_m = #{i : d_i = m}` of an `n`-tuple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multiplicities {
    pub n: usize,
    pub p: BTreeMap<u32, usize>,
}

impl Multiplicities {
    /// Builds and validates multiplicities; `Σ p_m ≤ n` is required.
    pub fn new(n: usize, p: BTreeMap<u32, usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("multiplicities need n ≥ 1".into()));
        }
        let total: usize = p.values().sum();
        if total > n {
            return Err(Error::Domain(format!("multiplicities sum to {total} > n = {n}")));
        }
        Ok(Multiplicities { n, p })
    }

    /// Multiplicities from a list `p_0, p_1, …`.
    pub fn from_list(n: usize, list: &[usize]) -> Result<Self> {
        let p = list.iter().enumerate().filter(|(_, &c)| c > 0).map(|(m, &c)| (m as u32, c)).collect();
        Multiplicities::new(n, p)
    }

    /// Multiplicities of a tuple `d`.
    pub fn from_tuple(d: &[u32]) -> Self {
        let mut p = BTreeMap::new();
        for &x in d {
            *p.entry(x).or_insert(0) += 1;
        }
        Multiplicities { n: d.len(), p }
    }

    pub fn get(&self, m: u32) -> usize {
        self.p.get(&m).copied().unwrap_or(0)
    }
}

/// Genus determined by the r-spin selection rule `r|d| + |a| = (r+1)(2g−2+n)`.
pub fn rspin_genus(r: u32, d: &[u32], a: &[u32]) -> Result<u32> {
    if d.len() != a.len() || d.is_empty() {
        return Err(Error::Domain("d and a must be nonempty tuples of equal length".into()));
    }
    if a.iter().any(|&x| x == 0 || x >= r) {
        return Err(Error::Domain(format!("a entries must lie in 1..{}", r - 1)));
    }
    let n = d.len() as i64;
    let lhs = i64::from(r) * d.iter().map(|&x| i64::from(x)).sum::<i64>() + a.iter().map(|&x| i64::from(x)).sum::<i64>();
    let rp1 = i64::from(r) + 1;
    if lhs % rp1 != 0 {
        return Err(Error::Domain(format!("r|d|+|a| = {lhs} is not divisible by r+1 = {rp1}")));
    }
    let twog = lhs / rp1 + 2 - n;
    if twog < 0 || twog % 2 != 0 {
        return Err(Error::Domain(format!("no genus satisfies the selection rule for d={d:?}, a={a:?}")));
    }
    Ok((twog / 2) as u32)
}

/// Rational power of a rational base with integer exponent.
pub fn q_pow(x: &Q, e: i32) -> Q {
    if e >= 0 {
        Q::from(Pow::pow(x, e as u32))
    } else {
        Q::from(Pow::pow(&x.clone().recip(), (-e) as u32))
    }
}
