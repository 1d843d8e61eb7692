//! Partitions, symmetric polynomials in the monomial, elementary, complete
//! and shifted-elementary bases, and coefficient extraction from products
//! `m_ν · h_D` and `m_ν · h^{(r,α)}_D`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{binomial, factorial, falling_factorial, solve_linear, Cyclotomic, Scalar, Q};

/// A weakly decreasing tuple of nonnegative parts; zero parts are allowed
/// and kept, so the length is the number of variables when used as an
/// exponent pattern.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// Sorts the parts into weakly decreasing order.
    pub fn new(mut parts: Vec<u32>) -> Self {
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition { parts }
    }

    pub fn empty() -> Self {
        Partition { parts: Vec::new() }
    }

    /// Drops zero parts.
    pub fn trimmed(&self) -> Self {
        Partition { parts: self.parts.iter().copied().filter(|&p| p > 0).collect() }
    }

    /// Pads with zero parts (or trims zeros) to exactly `n` parts.
    pub fn with_len(&self, n: usize) -> Result<Self> {
        let t = self.trimmed();
        if t.parts.len() > n {
            return Err(Error::Domain(format!("partition {:?} has more than {n} nonzero parts", self.parts)));
        }
        let mut parts = t.parts;
        parts.resize(n, 0);
        Ok(Partition { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// `|λ|`.
    pub fn weight(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// `ℓ(λ)`: number of nonzero parts.
    pub fn length(&self) -> usize {
        self.parts.iter().filter(|&&p| p > 0).count()
    }

    /// Largest part (0 for the empty partition).
    pub fn largest(&self) -> u32 {
        self.parts.first().copied().unwrap_or(0)
    }

    /// `p_k(λ)`, counting stored zero parts for `k = 0`.
    pub fn multiplicity(&self, k: u32) -> usize {
        self.parts.iter().filter(|&&p| p == k).count()
    }

    /// `z_λ = Π_k p_k(λ)!` over the stored parts (zeros included).
    pub fn z(&self) -> Q {
        let mut acc = Q::from(1);
        let mut i = 0;
        while i < self.parts.len() {
            let mut j = i;
            while j < self.parts.len() && self.parts[j] == self.parts[i] {
                j += 1;
            }
            acc *= Q::from(factorial((j - i) as u32));
            i = j;
        }
        acc
    }

    /// Conjugate partition (zero parts dropped).
    pub fn conjugate(&self) -> Self {
        let l = self.largest();
        Partition { parts: (1..=l).map(|i| self.parts.iter().filter(|&&p| p >= i).count() as u32).collect() }
    }

    /// Every part doubled.
    pub fn doubled(&self) -> Self {
        Partition { parts: self.parts.iter().map(|p| 2 * p).collect() }
    }

    /// Every part halved if all are even.
    pub fn halved(&self) -> Option<Self> {
        self.parts.iter().all(|p| p % 2 == 0).then(|| Partition { parts: self.parts.iter().map(|p| p / 2).collect() })
    }

    /// All distinct rearrangements of the parts.
    pub fn distinct_permutations(&self) -> Vec<Vec<u32>> {
        let mut cur = self.parts.clone();
        cur.sort_unstable();
        let mut out = vec![cur.clone()];
        // next_permutation over the ascending start
        loop {
            let n = cur.len();
            if n < 2 {
                break;
            }
            let mut i = n - 1;
            while i > 0 && cur[i - 1] >= cur[i] {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            let mut j = n - 1;
            while cur[j] <= cur[i - 1] {
                j -= 1;
            }
            cur.swap(i - 1, j);
            cur[i..].reverse();
            out.push(cur.clone());
        }
        out
    }

    /// Partitions of `w` with at most `max_len` nonzero parts, each `≤ max_part`,
    /// trimmed, in reverse lexicographic order.
    pub fn all_of_weight(w: u32, max_len: usize, max_part: u32) -> Vec<Partition> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(left: u32, maxp: u32, max_len: usize, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
            if left == 0 {
                out.push(Partition { parts: cur.clone() });
                return;
            }
            if cur.len() == max_len {
                return;
            }
            for p in (1..=maxp.min(left)).rev() {
                cur.push(p);
                rec(left - p, p, max_len, cur, out);
                cur.pop();
            }
        }
        rec(w, max_part, max_len, &mut cur, &mut out);
        out
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t: Vec<String> = self.trimmed().parts.iter().map(u32::to_string).collect();
        write!(f, "({})", t.join(","))
    }
}

/// Basis of a [`SymPoly`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Monomial,
    Elementary,
    Complete,
    /// `e_s(u_1 + shift, …, u_n + shift)`; `shift = −1` gives `ê`, `+1` gives `ě`.
    ShiftedElementary(i32),
}

/// Symmetric polynomial in `n` variables with rational coefficients.
/// Keys are trimmed partitions.
#[derive(Clone, Debug, PartialEq)]
pub struct SymPoly {
    pub n: usize,
    pub basis: Basis,
    pub coeffs: BTreeMap<Partition, Q>,
}

impl SymPoly {
    pub fn zero(n: usize, basis: Basis) -> Self {
        SymPoly { n, basis, coeffs: BTreeMap::new() }
    }

    pub fn single(n: usize, basis: Basis, lambda: Partition, c: Q) -> Self {
        let mut p = SymPoly::zero(n, basis);
        p.add_term(lambda, &c);
        p
    }

    pub fn add_term(&mut self, lambda: Partition, c: &Q) {
        let key = lambda.trimmed();
        let e = self.coeffs.entry(key.clone()).or_default();
        *e += c;
        if Scalar::is_zero(e) {
            self.coeffs.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of a basis element.
    pub fn coeff(&self, lambda: &Partition) -> Q {
        self.coeffs.get(&lambda.trimmed()).cloned().unwrap_or_default()
    }

    /// Evaluates at a point.
    pub fn eval<S: Scalar>(&self, u: &[S]) -> Result<S> {
        if u.len() != self.n {
            return Err(Error::Domain(format!("expected {} variables", self.n)));
        }
        let m = basis_convert(self, Basis::Monomial)?;
        let mut acc = S::zero();
        for (lam, c) in &m.coeffs {
            acc = acc.add(&monomial_eval(lam, u)?.mul_q(c));
        }
        Ok(acc)
    }
}

/// `m_λ(u)`.
pub fn monomial_eval<S: Scalar>(lambda: &Partition, u: &[S]) -> Result<S> {
    let full = lambda.with_len(u.len())?;
    let mut acc = S::zero();
    for perm in full.distinct_permutations() {
        let mut t = S::one();
        for (x, &p) in u.iter().zip(&perm) {
            t = t.mul(&x.pow(p));
        }
        acc = acc.add(&t);
    }
    Ok(acc)
}

/// Product `m_λ · m_μ` in the monomial basis for `n` variables.
pub fn monomial_product(n: usize, a: &Partition, b: &Partition) -> Result<BTreeMap<Partition, Q>> {
    let pa = a.with_len(n)?.distinct_permutations();
    let pb = b.with_len(n)?.distinct_permutations();
    let mut out: BTreeMap<Partition, Q> = BTreeMap::new();
    for x in &pa {
        for y in &pb {
            let s: Vec<u32> = x.iter().zip(y).map(|(p, q)| p + q).collect();
            if s.windows(2).all(|w| w[0] >= w[1]) {
                *out.entry(Partition { parts: s }.trimmed()).or_default() += 1;
            }
        }
    }
    Ok(out)
}

fn mono_mul(n: usize, x: &BTreeMap<Partition, Q>, y: &BTreeMap<Partition, Q>) -> Result<BTreeMap<Partition, Q>> {
    let mut out: BTreeMap<Partition, Q> = BTreeMap::new();
    for (a, ca) in x {
        for (b, cb) in y {
            for (p, c) in monomial_product(n, a, b)? {
                *out.entry(p).or_default() += c * Q::from(ca * cb);
            }
        }
    }
    out.retain(|_, c| !Scalar::is_zero(c));
    Ok(out)
}

/// `e_k` in the monomial basis (zero if `k > n`).
fn elementary_mono(n: usize, k: u32) -> BTreeMap<Partition, Q> {
    let mut out = BTreeMap::new();
    if k as usize <= n {
        out.insert(Partition::new(vec![1; k as usize]), Q::from(1));
    }
    out
}

/// `h_k` in the monomial basis.
fn complete_mono(n: usize, k: u32) -> BTreeMap<Partition, Q> {
    Partition::all_of_weight(k, n, k).into_iter().map(|p| (p, Q::from(1))).collect()
}

/// `e_s(u + shift)` expanded in plain elementary polynomials:
/// `Σ_j C(n−j, s−j) shift^{s−j} e_j`.
pub fn shifted_elementary_in_e(n: usize, s: u32, shift: i32) -> BTreeMap<u32, Q> {
    let mut out = BTreeMap::new();
    for j in 0..=s {
        let c = Q::from(binomial(n as i64 - i64::from(j), i64::from(s - j))) * crate::exact::q_pow(&Q::from(shift), (s - j) as i32);
        if !Scalar::is_zero(&c) {
            out.insert(j, c);
        }
    }
    out
}

fn basis_element_mono(n: usize, basis: Basis, lambda: &Partition) -> Result<BTreeMap<Partition, Q>> {
    let mut acc: BTreeMap<Partition, Q> = [(Partition::empty(), Q::from(1))].into_iter().collect();
    for &part in lambda.trimmed().parts() {
        let factor = match basis {
            Basis::Monomial => return Ok([(lambda.trimmed(), Q::from(1))].into_iter().collect()),
            Basis::Elementary => elementary_mono(n, part),
            Basis::Complete => complete_mono(n, part),
            Basis::ShiftedElementary(shift) => {
                let mut f: BTreeMap<Partition, Q> = BTreeMap::new();
                for (j, c) in shifted_elementary_in_e(n, part, shift) {
                    for (p, v) in elementary_mono(n, j) {
                        *f.entry(p).or_default() += v * &c;
                    }
                }
                f
            }
        };
        acc = mono_mul(n, &acc, &factor)?;
    }
    Ok(acc)
}

fn to_monomial(p: &SymPoly) -> Result<BTreeMap<Partition, Q>> {
    let mut out: BTreeMap<Partition, Q> = BTreeMap::new();
    for (lam, c) in &p.coeffs {
        for (m, v) in basis_element_mono(p.n, p.basis, lam)? {
            *out.entry(m).or_default() += v * c;
        }
    }
    out.retain(|_, c| !Scalar::is_zero(c));
    Ok(out)
}

/// Candidate basis labels spanning degree `d` in `n` variables.
fn labels(n: usize, basis: Basis, d: u32) -> Vec<Partition> {
    match basis {
        Basis::Monomial => Partition::all_of_weight(d, n, d),
        _ => Partition::all_of_weight(d, d as usize, n as u32),
    }
}

fn from_monomial(n: usize, m: &BTreeMap<Partition, Q>, basis: Basis) -> Result<SymPoly> {
    if basis == Basis::Monomial {
        return Ok(SymPoly { n, basis, coeffs: m.clone() });
    }
    let mut by_deg: BTreeMap<u32, Vec<(&Partition, &Q)>> = BTreeMap::new();
    for (p, c) in m {
        by_deg.entry(p.weight()).or_default().push((p, c));
    }
    let mut out = SymPoly::zero(n, basis);
    let shifted = matches!(basis, Basis::ShiftedElementary(_));
    // Shifted bases mix degrees; solve one system over all degrees ≤ max.
    let degs: Vec<u32> = if shifted { (0..=by_deg.keys().copied().max().unwrap_or(0)).collect() } else { by_deg.keys().copied().collect() };
    if shifted {
        let rows = degs.iter().flat_map(|&d| Partition::all_of_weight(d, n, d)).collect::<Vec<_>>();
        let cols = degs.iter().flat_map(|&d| labels(n, basis, d)).collect::<Vec<_>>();
        solve_block(n, basis, &rows, &cols, m, &mut out)?;
    } else {
        for d in degs {
            let rows = Partition::all_of_weight(d, n, d);
            let cols = labels(n, basis, d);
            solve_block(n, basis, &rows, &cols, m, &mut out)?;
        }
    }
    Ok(out)
}

fn solve_block(
    n: usize,
    basis: Basis,
    rows: &[Partition],
    cols: &[Partition],
    m: &BTreeMap<Partition, Q>,
    out: &mut SymPoly,
) -> Result<()> {
    let index: BTreeMap<&Partition, usize> = rows.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut a = vec![vec![Q::new(); cols.len()]; rows.len()];
    for (j, lam) in cols.iter().enumerate() {
        for (p, v) in basis_element_mono(n, basis, lam)? {
            let i = *index.get(&p).ok_or_else(|| Error::Structural("basis element outside the row space".into()))?;
            a[i][j] = v;
        }
    }
    let b: Vec<Q> = rows.iter().map(|p| m.get(p).cloned().unwrap_or_default()).collect();
    let x = solve_linear(a, b)?;
    for (lam, c) in cols.iter().zip(x) {
        out.add_term(lam.clone(), &c);
    }
    Ok(())
}

/// Exact change of basis.
pub fn basis_convert(p: &SymPoly, target: Basis) -> Result<SymPoly> {
    if p.basis == target {
        return Ok(p.clone());
    }
    let m = to_monomial(p)?;
    from_monomial(p.n, &m, target)
}

/// `M_{n,μ,ν} = [u^μ] m_ν h_{|μ|−|ν|}` by the closed falling-factorial product.
/// `μ` and `ν` are padded to `n` parts.
pub fn m_times_h_coeff(n: usize, mu: &Partition, nu: &Partition) -> Result<Q> {
    let mu = mu.with_len(n)?;
    let nu = nu.with_len(n)?;
    if mu.weight() < nu.weight() {
        return Err(Error::Domain("M_{n,μ,ν} needs |μ| ≥ |ν|".into()));
    }
    let top = nu.largest();
    let mut acc = Q::from(1);
    for k in 0..=top {
        let below: usize = (0..k).map(|i| mu.multiplicity(i)).sum();
        let above: usize = ((k + 1)..=top).map(|j| nu.multiplicity(j)).sum();
        let base = n as i64 - below as i64 - above as i64;
        acc *= falling_factorial(&Q::from(base), nu.multiplicity(k) as u32);
    }
    Ok(acc / nu.z())
}

/// `M_{n,μ,ν}` from multiplicities only: `p[i] = p_i(μ)` for `i < ν_1`
/// (parts of μ not listed are taken to exceed every part of ν).
pub fn m_times_h_from_multiplicities(n: usize, p: &[usize], nu: &Partition) -> Result<Q> {
    let nu = nu.with_len(n)?;
    let top = nu.largest();
    let mut acc = Q::from(1);
    for k in 0..=top {
        let below: usize = (0..k).map(|i| p.get(i as usize).copied().unwrap_or(0)).sum();
        let above: usize = ((k + 1)..=top).map(|j| nu.multiplicity(j)).sum();
        acc *= falling_factorial(&Q::from(n as i64 - below as i64 - above as i64), nu.multiplicity(k) as u32);
    }
    Ok(acc / nu.z())
}

/// The dual count of `M_{n,μ,ν}`: cover `ν` by parts of `μ`, smallest first.
pub fn m_times_h_coeff_dual(n: usize, mu: &Partition, nu: &Partition) -> Result<Q> {
    let mu = mu.with_len(n)?;
    let nu = nu.with_len(n)?;
    let top = nu.largest();
    let mut acc = Q::from(1);
    for k in 0..=top {
        let base: i64 = (0..=k).map(|i| nu.multiplicity(i) as i64).sum::<i64>() - (0..k).map(|j| mu.multiplicity(j) as i64).sum::<i64>();
        let pt = if k == top { mu.parts().iter().filter(|&&x| x >= top).count() } else { mu.multiplicity(k) };
        acc *= falling_factorial(&Q::from(base), pt as u32);
    }
    Ok(acc / nu.z())
}

/// Brute force `[u^μ] m_ν h_{|μ|−|ν|}`.
pub fn m_times_h_brute(n: usize, mu: &Partition, nu: &Partition) -> Result<Q> {
    let mu = mu.with_len(n)?;
    let nu = nu.with_len(n)?;
    let count = nu.distinct_permutations().iter().filter(|perm| perm.iter().zip(mu.parts()).all(|(a, b)| a <= b)).count();
    Ok(Q::from(count as u64))
}

/// `sin(pπ/r)`-type weight `Π_i sin(α k_i π / r)` as an exact cyclotomic number:
/// the coefficient of `u^k` in `h^{(r,α)}_D`.
pub fn h_r_alpha(d: u32, r: u32, alpha: u32, k: &[u32]) -> Result<Cyclotomic> {
    if alpha == 0 || alpha >= r {
        return Err(Error::Domain(format!("α = {alpha} outside 1..{r}")));
    }
    if k.iter().sum::<u32>() != d {
        return Err(Error::Domain(format!("exponents {k:?} do not sum to {d}")));
    }
    let mut acc = Cyclotomic::one();
    for &ki in k {
        acc = acc.mul(&Cyclotomic::sin_pi(i64::from(alpha) * i64::from(ki), r));
    }
    Ok(acc)
}

/// Brute force `[u^μ] m_ν h^{(r,α)}_{|μ|−|ν|}`.
pub fn weighted_m_times_h_brute(n: usize, mu: &Partition, nu: &Partition, r: u32, alpha: u32) -> Result<Cyclotomic> {
    let mu = mu.with_len(n)?;
    let nu = nu.with_len(n)?;
    let mut acc = Cyclotomic::zero();
    for perm in nu.distinct_permutations() {
        if perm.iter().zip(mu.parts()).all(|(a, b)| a <= b) {
            let k: Vec<u32> = mu.parts().iter().zip(&perm).map(|(m, v)| m - v).collect();
            acc = acc.add(&h_r_alpha(k.iter().sum(), r, alpha, &k)?);
        }
    }
    Ok(acc)
}

/// Joint-multiplicity count `M^{(r,α)}_{n,μ,ν}(A)`: `1/z_ν` times the number of
/// labelled placements of the parts of `ν` into parts of `μ` such that the
/// part `ν_j` lands on a part `μ_i ≥ ν_j` with `⟨μ_i⟩ − ⟨ν_j⟩ = A_j`
/// (`⟨·⟩` the residue mod r). `A` is indexed like the padded `ν`.
pub fn weighted_m_times_h_coeff(n: usize, mu: &Partition, nu: &Partition, r: u32, a: &[i32]) -> Result<Q> {
    let mu = mu.with_len(n)?;
    let nu = nu.with_len(n)?;
    if a.len() != n {
        return Err(Error::Domain(format!("offset tuple needs {n} entries")));
    }
    let ri = r as i32;
    if a.iter().any(|&x| x.abs() >= ri) {
        return Err(Error::Domain("offsets must lie in −(r−1)..r−1".into()));
    }
    // target residue class of every ν-part
    let mut joint: BTreeMap<(u32, i32), usize> = BTreeMap::new();
    for (&v, &s) in nu.parts().iter().zip(a) {
        let c = (v % r) as i32 + s;
        if !(0..ri).contains(&c) {
            return Ok(Q::new());
        }
        *joint.entry((v, c)).or_insert(0) += 1;
    }
    let mut acc = Q::from(1);
    let top = nu.largest();
    for k in (0..=top).rev() {
        for c in 0..ri {
            let want = joint.get(&(k, c)).copied().unwrap_or(0);
            if want == 0 {
                continue;
            }
            let avail = mu.parts().iter().filter(|&&m| m >= k && (m % r) as i32 == c).count() as i64;
            let used: i64 = joint.iter().filter(|(&(j, cc), _)| j > k && cc == c).map(|(_, &p)| p as i64).sum();
            acc *= falling_factorial(&Q::from(avail - used), want as u32);
        }
    }
    Ok(acc / nu.z())
}

/// `[u^μ] m_ν h^{(r,α)}_{|μ|−|ν|}` assembled from the joint-multiplicity counts:
/// `(−1)^{α([μ]−[ν])} Σ_A M^{(r,α)}(A) Π sin(α A_j π/r)`.
pub fn weighted_m_times_h(n: usize, mu: &Partition, nu: &Partition, r: u32, alpha: u32) -> Result<Cyclotomic> {
    let mu_p = mu.with_len(n)?;
    let nu_p = nu.with_len(n)?;
    let q_mu: i64 = mu_p.parts().iter().map(|&m| i64::from(m / r)).sum();
    let q_nu: i64 = nu_p.parts().iter().map(|&m| i64::from(m / r)).sum();
    let ri = r as i32;
    let mut total = Cyclotomic::zero();
    let mut a = vec![-(ri - 1); n];
    loop {
        let m = weighted_m_times_h_coeff(n, &mu_p, &nu_p, r, &a)?;
        if !Scalar::is_zero(&m) {
            let mut w = Cyclotomic::from_q(&m);
            for &s in &a {
                w = w.mul(&Cyclotomic::sin_pi(i64::from(alpha) * i64::from(s), r));
            }
            total = total.add(&w);
        }
        // odometer
        let mut i = 0;
        while i < n {
            if a[i] < ri - 1 {
                a[i] += 1;
                break;
            }
            a[i] = -(ri - 1);
            i += 1;
        }
        if i == n {
            break;
        }
    }
    if (i64::from(alpha) * (q_mu - q_nu)).rem_euclid(2) == 1 {
        total = total.neg();
    }
    Ok(total)
}

/// Polynomial in `n` with rational coefficients (`coeffs[i]` multiplies `n^i`).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NPoly {
    coeffs: Vec<Q>,
}

impl NPoly {
    pub fn constant(c: Q) -> Self {
        let mut p = NPoly { coeffs: vec![c] };
        p.trim();
        p
    }

    /// The variable `n`.
    pub fn var() -> Self {
        NPoly { coeffs: vec![Q::new(), Q::from(1)] }
    }

    pub fn from_coeffs(coeffs: Vec<Q>) -> Self {
        let mut p = NPoly { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(Scalar::is_zero) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree (−1 for zero).
    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn add(&self, o: &NPoly) -> NPoly {
        let len = self.coeffs.len().max(o.coeffs.len());
        let c = (0..len)
            .map(|i| {
                let a = self.coeffs.get(i).cloned().unwrap_or_default();
                let b = o.coeffs.get(i).cloned().unwrap_or_default();
                a + b
            })
            .collect();
        NPoly::from_coeffs(c)
    }

    pub fn mul(&self, o: &NPoly) -> NPoly {
        if self.is_zero() || o.is_zero() {
            return NPoly::default();
        }
        let mut c = vec![Q::new(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += Q::from(a * b);
            }
        }
        NPoly::from_coeffs(c)
    }

    pub fn scale(&self, s: &Q) -> NPoly {
        NPoly::from_coeffs(self.coeffs.iter().map(|c| Q::from(c * s)).collect())
    }

    pub fn eval(&self, n: &Q) -> Q {
        let mut acc = Q::new();
        for c in self.coeffs.iter().rev() {
            acc = acc * n + c;
        }
        acc
    }

    /// `C(n + a, m)` as a polynomial in `n`.
    pub fn binomial_shift(a: i64, m: u32) -> NPoly {
        let mut p = NPoly::constant(Q::from(1));
        for i in 0..m {
            p = p.mul(&NPoly::from_coeffs(vec![Q::from(a - i64::from(i)), Q::from(1)]));
        }
        p.scale(&(Q::from(1) / Q::from(factorial(m))))
    }

    /// Lagrange interpolation through `(x_i, y_i)`.
    pub fn interpolate(points: &[(Q, Q)]) -> NPoly {
        let mut acc = NPoly::default();
        for (i, (xi, yi)) in points.iter().enumerate() {
            let mut basis = NPoly::constant(yi.clone());
            for (j, (xj, _)) in points.iter().enumerate() {
                if i != j {
                    let den = Q::from(xi - xj);
                    basis = basis.mul(&NPoly::from_coeffs(vec![Q::from(-xj) / &den, Q::from(1) / den]));
                }
            }
            acc = acc.add(&basis);
        }
        acc
    }
}

impl fmt::Display for NPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if Scalar::is_zero(c) {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})n")?,
                _ => write!(f, "({c})n^{i}")?,
            }
        }
        Ok(())
    }
}

/// Number of 0-1 matrices with row sums `rows` and column sums `cols`:
/// the coefficient of `m_cols` in `e_rows`, independent of the number of
/// variables.
pub fn elementary_to_monomial_count(rows: &Partition, cols: &Partition) -> u64 {
    let rows: Vec<u32> = rows.trimmed().parts().to_vec();
    let cols: Vec<u32> = cols.trimmed().parts().to_vec();
    if rows.iter().sum::<u32>() != cols.iter().sum::<u32>() {
        return 0;
    }
    fn rec(rows: &[u32], cap: &mut Vec<u32>, memo: &mut BTreeMap<(usize, Vec<u32>), u64>, depth: usize) -> u64 {
        if depth == rows.len() {
            return u64::from(cap.iter().all(|&c| c == 0));
        }
        let key = (depth, cap.clone());
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let mut total = 0;
        let k = rows[depth] as usize;
        let m = cap.len();
        // choose k distinct columns with remaining capacity
        let mut idx: Vec<usize> = (0..k).collect();
        if k <= m {
            loop {
                if idx.iter().all(|&i| cap[i] > 0) {
                    for &i in &idx {
                        cap[i] -= 1;
                    }
                    total += rec(rows, cap, memo, depth + 1);
                    for &i in &idx {
                        cap[i] += 1;
                    }
                }
                // next combination
                let mut t = k;
                loop {
                    if t == 0 {
                        break;
                    }
                    t -= 1;
                    if idx[t] < m - k + t {
                        idx[t] += 1;
                        for u in (t + 1)..k {
                            idx[u] = idx[u - 1] + 1;
                        }
                        t = usize::MAX;
                        break;
                    }
                }
                if t != usize::MAX || k == 0 {
                    break;
                }
            }
        }
        memo.insert(key, total);
        total
    }
    let mut cap = cols.clone();
    let mut memo = BTreeMap::new();
    rec(&rows, &mut cap, &mut memo, 0)
}
