//! Kernels, n-point correlators and one-instanton minors assembled from the
//! wave coefficients through the cyclic kernel formula, and extraction of
//! intersection numbers.
//!
//! Conventions. Variables are `z_i = x_i^{1/r}` and every kernel is written as
//! `K(z, w) = (zw)^{-(r-1)/2} F(z, w)/(z^r − w^r)` with
//! `F = (1/r) Σ_m z^m w^{r−1−m} A_m(θ₁ t_z) A_{r−1−m}(θ₂ t_w)`.
//! The plain kernel uses `(θ₁, θ₂) = (1, −1)`; the sector kernel of the
//! special variable multiplies the `m`-th term by `ζ^{αm}` and uses
//! `θ₁ = ζ^{−α}`. The parity image (sign `−1`) flips both arguments and the
//! overall sign of every kernel.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{q, r_factorial, Cx, Scalar, Q};
use crate::series::{invert_power_difference, HbarSeries, LaurentBlock};
use crate::wave::{coefficients, ModelKind, WaveCoefficients, WaveModel};

/// `ζ_r^j` in the scalar type, or an error if it is not representable.
pub fn zeta_pow<S: Scalar>(r: u32, j: i64) -> Result<S> {
    S::root_of_unity(r, j).ok_or_else(|| Error::Unsupported(format!("ζ_{r}^{j} is not representable in this scalar type")))
}

/// Slot data of one kernel numerator.
#[derive(Clone, Debug)]
struct Slot<S> {
    /// Row `m` is multiplied by `phase^m`.
    phase: S,
    theta1: S,
    theta2: S,
}

impl<S: Scalar> Slot<S> {
    fn plain(sign: i32) -> Self {
        Slot { phase: S::one(), theta1: S::from_i64(sign.into()), theta2: S::from_i64((-sign).into()) }
    }

    fn sector(r: u32, alpha: u32, sign: i32) -> Result<Self> {
        let a = i64::from(alpha);
        Ok(Slot {
            phase: zeta_pow(r, a)?,
            theta1: zeta_pow::<S>(r, -a)?.mul(&S::from_i64(sign.into())),
            theta2: S::from_i64((-sign).into()),
        })
    }
}

/// `ch[a][b][k]`: coefficient of `ħ^k` in `phase^a A_a(θ₁ t) A_{r−1−b}(θ₂ t)` with
/// `t = c ħ` (the z-dependence is restored by the caller).
fn channel_table<S: Scalar>(w: &WaveCoefficients, r: usize, slot: &Slot<S>, order: usize) -> Result<Vec<Vec<Vec<S>>>> {
    let first: Vec<HbarSeries<S>> = (0..r).map(|m| w.series(m, &slot.theta1, order)).collect();
    let second: Vec<HbarSeries<S>> = (0..r).map(|m| w.series(m, &slot.theta2, order)).collect();
    let mut out = Vec::with_capacity(r);
    let mut ph = S::one();
    for a in 0..r {
        let mut row = Vec::with_capacity(r);
        for b in 0..r {
            let s = first[a].mul(&second[r - 1 - b])?;
            row.push((0..=order as i32).map(|k| s.coeff(k).mul(&ph)).collect());
        }
        out.push(row);
        ph = ph.mul(&slot.phase);
    }
    Ok(out)
}

type SeriesMatrix<S> = Vec<Vec<HbarSeries<LaurentBlock<S>>>>;

/// Vertex matrix `T_v[a][b] = phase^a z_v^{a+r−1−b} A_a(θ₁ t_v) A_{r−1−b}(θ₂ t_v)`.
fn vertex_matrix<S: Scalar>(model: WaveModel, ch: &[Vec<Vec<S>>], nvars: usize, v: usize, order: usize) -> SeriesMatrix<S> {
    let r = model.r() as usize;
    let e = model.hbar_weight();
    let zero = LaurentBlock::zero(nvars);
    (0..r)
        .map(|a| {
            (0..r)
                .map(|b| {
                    let coeffs = (0..=order)
                        .map(|k| {
                            let mut ex = vec![0; nvars];
                            ex[v] = (a + r - 1 - b) as i32 - e * k as i32;
                            LaurentBlock::monomial(ex, ch[a][b][k].clone())
                        })
                        .collect();
                    HbarSeries::new(0, order as i32, zero.clone(), coeffs)
                })
                .collect()
        })
        .collect()
}

fn matmul<S: Scalar>(x: &SeriesMatrix<S>, y: &SeriesMatrix<S>) -> Result<SeriesMatrix<S>> {
    let r = x.len();
    let mut out = Vec::with_capacity(r);
    for row in x {
        let mut orow = Vec::with_capacity(r);
        for b in 0..r {
            let mut acc = row[0].mul(&y[0][b])?;
            for (c, xc) in row.iter().enumerate().skip(1) {
                acc = acc.add(&xc.mul(&y[c][b])?)?;
            }
            orow.push(acc);
        }
        out.push(orow);
    }
    Ok(out)
}

/// `ħ^k` coefficient of `Tr(x · y)`.
fn trace_coeff<S: Scalar>(x: &SeriesMatrix<S>, y: &SeriesMatrix<S>, k: i32, nvars: usize) -> Result<LaurentBlock<S>> {
    let r = x.len();
    let mut acc = LaurentBlock::zero(nvars);
    for a in 0..r {
        for b in 0..r {
            for k1 in 0..=k {
                let p = x[a][b].coeff(k1).mul(y[b][a].coeff(k - k1))?;
                acc = acc.add(&p)?;
            }
        }
    }
    Ok(acc)
}

/// All cycles through `n` vertices starting at `v0`, as vertex sequences
/// `v0 → v1 → ⋯ → v_{n−1} → v0`. There are `(n−1)!` of them.
pub fn cycles_from(v0: usize, n: usize) -> Vec<Vec<usize>> {
    let rest: Vec<usize> = (0..n).filter(|&v| v != v0).collect();
    let mut out = Vec::new();
    let mut cur = vec![v0];
    let mut used = vec![false; rest.len()];
    fn rec(rest: &[usize], used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == rest.len() + 1 {
            out.push(cur.clone());
            return;
        }
        for t in 0..rest.len() {
            if !used[t] {
                used[t] = true;
                cur.push(rest[t]);
                rec(rest, used, cur, out);
                cur.pop();
                used[t] = false;
            }
        }
    }
    rec(&rest, &mut used, &mut cur, &mut out);
    out
}

/// Orientation of the pair `{u, w}` in the common denominator: pairs through
/// the special vertex point away from it, the others go from low to high.
fn oriented(u: usize, w: usize, special: Option<usize>) -> (usize, usize) {
    match special {
        Some(i) if w == i => (i, u),
        Some(i) if u == i => (i, w),
        _ => (u.min(w), u.max(w)),
    }
}

fn pair_binomial<S: Scalar>(nvars: usize, a: usize, b: usize, r: i32) -> LaurentBlock<S> {
    let mut ea = vec![0; nvars];
    ea[a] = r;
    let mut eb = vec![0; nvars];
    eb[b] = r;
    let mut p = LaurentBlock::monomial(ea, S::one());
    p.add_term(eb, &S::from_i64(-1));
    p
}

/// What the cycle assembly computes.
#[derive(Clone, Copy, Debug)]
struct Assembly {
    n: usize,
    special: Option<(usize, u32)>,
    sign: i32,
}

/// For each requested ħ-order, `Σ_σ ε_σ N_σ · Π_{pairs unused by σ} (z_a^r − z_b^r)`,
/// the cyclic sum brought to the common denominator
/// `L = Π_{pairs} (z_a^r − z_b^r)^{m}` (`m = 2` for `n = 2`, else 1).
fn cyclic_numerators<S: Scalar>(model: WaveModel, asm: Assembly, orders: &[i32]) -> Result<Vec<LaurentBlock<S>>> {
    let n = asm.n;
    let r = model.r() as usize;
    let kmax = orders.iter().copied().max().unwrap_or(0).max(0) as usize;
    let w = coefficients(model, kmax)?;
    let plain = channel_table(&w, r, &Slot::<S>::plain(asm.sign), kmax)?;
    let mats: Vec<SeriesMatrix<S>> = (0..n)
        .map(|v| -> Result<SeriesMatrix<S>> {
            match asm.special {
                Some((i, alpha)) if i == v => {
                    let ch = channel_table(&w, r, &Slot::<S>::sector(model.r(), alpha, asm.sign)?, kmax)?;
                    Ok(vertex_matrix(model, &ch, n, v, kmax))
                }
                _ => Ok(vertex_matrix(model, &plain, n, v, kmax)),
            }
        })
        .collect::<Result<_>>()?;
    let v0 = asm.special.map_or(0, |(i, _)| i);
    let special = asm.special.map(|(i, _)| i);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).map(|(a, b)| oriented(a, b, special)).collect();
    let re = r as i32;
    let per_cycle = |cyc: &Vec<usize>| -> Result<Vec<LaurentBlock<S>>> {
        let mut eps = 1i64;
        let mut used = Vec::new();
        for t in 0..n {
            let (u, v) = (cyc[t], cyc[(t + 1) % n]);
            let o = oriented(u, v, special);
            if o != (u, v) {
                eps = -eps;
            }
            used.push(o);
        }
        let mut comp = LaurentBlock::constant(n, S::from_i64(eps));
        if n >= 3 {
            for &(a, b) in &pairs {
                if !used.contains(&(a, b)) {
                    comp = comp.mul(&pair_binomial(n, a, b, re))?;
                }
            }
        }
        // Tr(T_{v0} · T_{v_{n−1}} ⋯ T_{v1})
        let mut prod = mats[cyc[n - 1]].clone();
        for t in (1..n - 1).rev() {
            prod = matmul(&prod, &mats[cyc[t]])?;
        }
        orders
            .iter()
            .map(|&k| {
                if k < 0 {
                    return Ok(LaurentBlock::zero(n));
                }
                trace_coeff(&mats[v0], &prod, k, n)?.mul(&comp)
            })
            .collect()
    };
    let cycles = cycles_from(v0, n);
    let parts: Vec<Vec<LaurentBlock<S>>> = if n >= 4 {
        cycles.par_iter().map(per_cycle).collect::<Result<_>>()?
    } else {
        cycles.iter().map(per_cycle).collect::<Result<_>>()?
    };
    let mut total: Vec<LaurentBlock<S>> = orders.iter().map(|_| LaurentBlock::zero(n)).collect();
    for p in parts {
        for (t, b) in total.iter_mut().zip(p) {
            *t = t.add(&b)?;
        }
    }
    Ok(total)
}

/// Overall constant `(−1)^{n−1} s^n / r^n` times `Π z^{−(r−1)}`.
fn apply_prefactor<S: Scalar>(model: WaveModel, n: usize, sign: i32, b: &LaurentBlock<S>) -> LaurentBlock<S> {
    let r = model.r() as i32;
    let mut c = q(if (n - 1).is_multiple_of(2) { 1 } else { -1 }, 1);
    if sign < 0 && n % 2 == 1 {
        c = -c;
    }
    c /= Q::from(r).pow_checked(n);
    b.scale(&S::from_q(&c)).mul_monomial(&vec![-(r - 1); n])
}

trait PowChecked {
    fn pow_checked(self, n: usize) -> Q;
}

impl PowChecked for Q {
    fn pow_checked(self, n: usize) -> Q {
        let mut acc = Q::from(1);
        for _ in 0..n {
            acc *= &self;
        }
        acc
    }
}

/// Coefficient of `ħ^k` in the n-point function `W_n`, as an exact Laurent
/// polynomial in `z_1, …, z_n` (n ≥ 2). Fails if the cyclic sum is not
/// divisible by its common denominator.
pub fn correlator_hbar_coeff(model: WaveModel, n: usize, k: i32) -> Result<LaurentBlock<Q>> {
    if n < 2 {
        return Err(Error::Domain("correlator_hbar_coeff needs n ≥ 2; use the trace formula for n = 1".into()));
    }
    let t = cyclic_numerators::<Q>(model, Assembly { n, special: None, sign: 1 }, &[k])?.remove(0);
    let r = model.r() as i32;
    let m = if n == 2 { 2 } else { 1 };
    let mut acc = t;
    for a in 0..n {
        for b in (a + 1)..n {
            for _ in 0..m {
                acc = acc.div_binomial(a, b, r, &Q::from(1)).map_err(|e| {
                    Error::Truncation(format!("W_n at ħ^{k} is not a Laurent polynomial ({e}); the requested order is not covered"))
                })?;
            }
        }
    }
    Ok(apply_prefactor(model, n, 1, &acc))
}

/// The bracket `Σ_m Â_m(θ₁t) A_{r−m}(θ₂t)` of the one-point trace formula
/// (with `A_r := A_0`), up to `ħ^order`.
fn one_point_bracket<S: Scalar>(model: WaveModel, slot: &Slot<S>, order: usize) -> Result<Vec<S>> {
    let r = model.r() as usize;
    let w = coefficients(model, order)?;
    let mut acc = vec![S::zero(); order + 1];
    let mut ph = S::one();
    for m in 0..r {
        let partner = if m == 0 { 0 } else { r - m };
        let s = w.series(m, &slot.theta1, order).mul(&w.series(partner, &slot.theta2, order))?;
        for (k, a) in acc.iter_mut().enumerate() {
            *a = a.add(&s.coeff(k as i32).mul(&ph));
        }
        ph = ph.mul(&slot.phase);
    }
    Ok(acc)
}

/// Coefficients `c_k` of `W_1 = (z^s / r) Σ_k c_k ħ^{k−1} z^{−e k}`, `k ≤ order`.
pub fn one_point_series(model: WaveModel, order: usize) -> Result<Vec<Q>> {
    let r = Q::from(model.r());
    Ok(one_point_bracket::<Q>(model, &Slot::plain(1), order)?.into_iter().map(|c| c / &r).collect())
}

/// Exact table of a correlator `W_{g,n}`.
///
/// `coeffs[μ]` is the coefficient of `Π z_i^{−(μ_i + r)}`; for the r-Airy
/// model `μ_i = r d_i + a_i` with `a_i ∈ {1, …, r−1}`, for Airy and Bessel
/// `μ_i = 2 d_i + 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelatorPoly {
    pub model: WaveModel,
    pub g: u32,
    pub n: usize,
    #[serde(with = "coeff_map")]
    pub coeffs: BTreeMap<Vec<u32>, Q>,
}

mod coeff_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        mu: Vec<u32>,
        value: String,
    }

    pub fn serialize<Se: Serializer>(m: &BTreeMap<Vec<u32>, Q>, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        let v: Vec<Entry> = m.iter().map(|(k, c)| Entry { mu: k.clone(), value: c.to_string() }).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<Vec<u32>, Q>, D::Error> {
        let v = Vec::<Entry>::deserialize(d)?;
        v.into_iter().map(|e| crate::exact::q_from_str(&e.value).map(|c| (e.mu, c)).map_err(serde::de::Error::custom)).collect()
    }
}

impl CorrelatorPoly {
    /// `(d, a)` of a key `μ`.
    pub fn split_mu(&self, mu: &[u32]) -> (Vec<u32>, Vec<u32>) {
        let r = self.model.r();
        mu.iter().map(|&m| (m / r, m % r)).unzip()
    }

    /// True if the table is invariant under permutations of the points.
    pub fn is_symmetric(&self) -> bool {
        self.coeffs.iter().all(|(mu, c)| {
            let mut sorted = mu.clone();
            sorted.sort_unstable();
            self.coeffs.get(&sorted) == Some(c)
        })
    }

    /// All intersection numbers stored in the table, keyed by `(d, a)`.
    pub fn intersections(&self) -> Result<Vec<(Vec<u32>, Vec<u32>, Q)>> {
        self.coeffs
            .keys()
            .map(|mu| {
                let (d, a) = self.split_mu(mu);
                let v = extract_intersection(self, &d, Some(&a))?;
                Ok((d, a, v))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// CSV with columns `d1..dn, a1..an, coefficient, intersection`.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        let cols: Vec<String> = (1..=self.n)
            .map(|i| format!("d{i}"))
            .chain((1..=self.n).map(|i| format!("a{i}")))
            .chain(["coefficient".to_string(), "intersection".to_string()])
            .collect();
        out.push_str(&cols.join(","));
        out.push('\n');
        for (mu, c) in &self.coeffs {
            let (d, a) = self.split_mu(mu);
            let v = extract_intersection(self, &d, Some(&a))?;
            let fields: Vec<String> = d.iter().chain(&a).map(u32::to_string).chain([c.to_string(), v.to_string()]).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        Ok(out)
    }
}

/// The degree the `μ`-labels of `W_{g,n}` must sum to: `e (2g−2+n)`.
fn mu_weight(model: WaveModel, g: u32, n: usize) -> i64 {
    i64::from(model.hbar_weight()) * (2 * i64::from(g) - 2 + n as i64)
}

fn poly_from_block(model: WaveModel, g: u32, n: usize, b: &LaurentBlock<Q>) -> Result<CorrelatorPoly> {
    let r = model.r() as i32;
    let want = mu_weight(model, g, n);
    let mut coeffs = BTreeMap::new();
    for (e, c) in b.terms() {
        let mu: Vec<i32> = e.iter().map(|&x| -x - r).collect();
        if mu.iter().any(|&m| m < 1 || m % r == 0) {
            return Err(Error::Structural(format!("W_{{{g},{n}}} has an unexpected monomial z^{e:?}")));
        }
        if mu.iter().map(|&m| i64::from(m)).sum::<i64>() != want {
            return Err(Error::Structural(format!("W_{{{g},{n}}} is not homogeneous: z^{e:?}")));
        }
        coeffs.insert(mu.into_iter().map(|m| m as u32).collect::<Vec<u32>>(), c.clone());
    }
    let p = CorrelatorPoly { model, g, n, coeffs };
    if !p.is_symmetric() {
        return Err(Error::Structural(format!("W_{{{g},{n}}} is not symmetric")));
    }
    Ok(p)
}

/// `W_{g,n}` as an exact coefficient table.
pub fn correlator(model: WaveModel, g: u32, n: usize) -> Result<CorrelatorPoly> {
    let kk = 2 * i64::from(g) - 2 + n as i64;
    if n == 0 || kk <= 0 {
        return Err(Error::Domain(format!("W_{{{g},{n}}} needs n ≥ 1 and 2g−2+n > 0")));
    }
    let block = if n == 1 {
        let order = 2 * g as usize;
        let c = one_point_series(model, order)?.swap_remove(order);
        let ex = model.w1_z_power() - model.hbar_weight() * order as i32;
        LaurentBlock::monomial(vec![ex], c)
    } else {
        correlator_hbar_coeff(model, n, kk as i32)?
    };
    poly_from_block(model, g, n, &block)
}

/// Exact one-point coefficient `[z^{s−2ge}] W_{g,1}` for large g without
/// building a table.
pub fn one_point_coefficient(model: WaveModel, g: u32) -> Result<Q> {
    let order = 2 * g as usize;
    Ok(one_point_series(model, order)?.swap_remove(order))
}

/// Normalisation `coefficient = norm · ⟨τ⟩` relating a table entry to the
/// intersection number with labels `(d, a)`.
pub fn intersection_normalisation(model: WaveModel, g: u32, d: &[u32], a: &[u32]) -> Result<Q> {
    let n = d.len();
    let r = i64::from(model.r());
    let mut norm = Q::from(1);
    for (&di, &ai) in d.iter().zip(a) {
        let f = r_factorial(r * i64::from(di) + i64::from(ai), r)?;
        norm *= Q::from(f) / Q::from(r);
    }
    let kk = 2 * i64::from(g) - 2 + n as i64;
    let expo = match model.kind {
        ModelKind::Airy | ModelKind::Bessel => -kk,
        ModelKind::RAiry(_) => i64::from(g) - 1 - d.iter().map(|&x| i64::from(x)).sum::<i64>(),
    };
    let base = Q::from(-r);
    let p = crate::exact::q_pow(&base, expo as i32);
    Ok(norm * p)
}

/// Degree constraint of the model for labels `(d, a)`; returns the genus.
pub fn genus_of(model: WaveModel, d: &[u32], a: &[u32]) -> Result<u32> {
    let n = d.len() as i64;
    let r = i64::from(model.r());
    let e = i64::from(model.hbar_weight());
    let w: i64 = d.iter().zip(a).map(|(&x, &y)| r * i64::from(x) + i64::from(y)).sum();
    if w % e != 0 {
        return Err(Error::Domain(format!("labels d={d:?}, a={a:?} violate the degree constraint")));
    }
    let two_g = w / e + 2 - n;
    if two_g < 0 || two_g % 2 != 0 {
        return Err(Error::Domain(format!("labels d={d:?}, a={a:?} violate the degree constraint")));
    }
    Ok((two_g / 2) as u32)
}

/// The intersection number `⟨τ_{d_1,a_1} ⋯ τ_{d_n,a_n}⟩` read off a table.
pub fn extract_intersection(poly: &CorrelatorPoly, d: &[u32], a: Option<&[u32]>) -> Result<Q> {
    let r = poly.model.r();
    let a: Vec<u32> = match a {
        Some(a) => a.to_vec(),
        None if r == 2 => vec![1; d.len()],
        None => return Err(Error::Domain("r-spin extraction needs the a-labels".into())),
    };
    if d.len() != poly.n || a.len() != poly.n {
        return Err(Error::Domain(format!("expected {} labels", poly.n)));
    }
    if a.iter().any(|&x| x == 0 || x >= r) {
        return Err(Error::Domain(format!("a-labels must lie in 1..{r}")));
    }
    let g = genus_of(poly.model, d, &a)?;
    if g != poly.g {
        return Err(Error::Domain(format!("labels d={d:?} belong to genus {g}, table has genus {}", poly.g)));
    }
    let mu: Vec<u32> = d.iter().zip(&a).map(|(&x, &y)| r * x + y).collect();
    let c = poly.coeffs.get(&mu).cloned().unwrap_or_default();
    Ok(c / intersection_normalisation(poly.model, g, d, &a)?)
}

/// Convenience: compute the table and extract one number.
pub fn intersection_number(model: WaveModel, d: &[u32], a: Option<&[u32]>) -> Result<Q> {
    let r = model.r();
    let av: Vec<u32> = match a {
        Some(a) => a.to_vec(),
        None if r == 2 => vec![1; d.len()],
        None => return Err(Error::Domain("r-spin extraction needs the a-labels".into())),
    };
    let g = genus_of(model, d, &av)?;
    if d.len() == 1 {
        let c = one_point_coefficient(model, g)?;
        return Ok(c / intersection_normalisation(model, g, d, &av)?);
    }
    let p = correlator(model, g, d.len())?;
    extract_intersection(&p, d, Some(&av))
}

/// Which kernel of the family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairLabel {
    /// `K_{+,−}`.
    PlusMinus,
    /// `K_{−,+}(ħ) = −K_{+,−}(−ħ)`.
    MinusPlus,
    /// Sector kernel `K_{±α,∓}` (for r = 2, `α = 1`: `K_{∓,∓}`).
    Sector { alpha: u32, sign: i32 },
}

/// A kernel expanded in the region `|z_i| > |z_j|`, without the factor
/// `(z_i z_j)^{-(r−1)/2}`.
#[derive(Clone, Debug)]
pub struct KernelSeries<S: Scalar> {
    pub model: WaveModel,
    pub pair: PairLabel,
    pub var_pair: (usize, usize),
    pub data: HbarSeries<LaurentBlock<S>>,
}

/// Series-mode kernel on `max(i, j) + 1` variables, `z_depth` terms of the
/// geometric expansion of `1/(z_i^r − z_j^r)`.
pub fn kernel<S: Scalar>(
    model: WaveModel,
    pair: PairLabel,
    i: usize,
    j: usize,
    hbar_order: usize,
    z_depth: usize,
) -> Result<KernelSeries<S>> {
    if i == j {
        return Err(Error::Domain("kernel needs distinct variables".into()));
    }
    if z_depth == 0 {
        return Err(Error::Truncation("kernel expansion needs z_depth ≥ 1".into()));
    }
    let r = model.r();
    let nvars = i.max(j) + 1;
    let (slot, sign) = match pair {
        PairLabel::PlusMinus => (Slot::plain(1), 1),
        PairLabel::MinusPlus => (Slot::plain(-1), -1),
        PairLabel::Sector { alpha, sign } => {
            if alpha == 0 || alpha >= r || sign.abs() != 1 {
                return Err(Error::Domain(format!("invalid sector ({alpha}, {sign})")));
            }
            (Slot::sector(r, alpha, sign)?, sign)
        }
    };
    let w = coefficients(model, hbar_order)?;
    let ru = r as usize;
    let e = model.hbar_weight();
    let zero = LaurentBlock::zero(nvars);
    let ordering: Vec<usize> = (0..nvars).collect();
    let inv = invert_power_difference::<S>(nvars, i, j, r as i32, z_depth, &ordering)?;
    let scale = S::from_q(&Q::from(sign)).mul_q(&q(1, i64::from(r)));
    let first: Vec<HbarSeries<S>> = (0..ru).map(|m| w.series(m, &slot.theta1, hbar_order)).collect();
    let second: Vec<HbarSeries<S>> = (0..ru).map(|m| w.series(m, &slot.theta2, hbar_order)).collect();
    let mut coeffs = Vec::with_capacity(hbar_order + 1);
    for k in 0..=hbar_order as i32 {
        let mut num = LaurentBlock::zero(nvars);
        let mut ph = S::one();
        for m in 0..ru {
            for k1 in 0..=k {
                let c = first[m].coeff(k1).mul(second[ru - 1 - m].coeff(k - k1)).mul(&ph).mul(&scale);
                let mut ex = vec![0; nvars];
                ex[i] += m as i32 - e * k1;
                ex[j] += (ru - 1 - m) as i32 - e * (k - k1);
                num.add_term(ex, &c);
            }
            ph = ph.mul(&slot.phase);
        }
        coeffs.push(num.mul(&inv)?);
    }
    Ok(KernelSeries { model, pair, var_pair: (i, j), data: HbarSeries::new(0, hbar_order as i32, zero, coeffs) })
}

/// One-instanton minor, or the perturbative sector, as exact rational
/// functions: `W_k = numer[k − offset] / denominator`.
///
/// For a minor with special point `i` the denominator is
/// `D = Π_{j≠i} (z_i − z_j)(ζ^α z_i − z_j)`; the perturbative sector has
/// `D = 1`. All prefactors, including `Π z^{−(r−1)}`, are inside `numer`.
#[derive(Clone, Debug)]
pub struct MinorSeries<S: Scalar> {
    pub model: WaveModel,
    pub n: usize,
    pub special: Option<usize>,
    pub alpha: u32,
    pub sign: i32,
    pub offset: i32,
    pub numer: Vec<LaurentBlock<S>>,
    pub denominator: LaurentBlock<S>,
}

impl<S: Scalar> MinorSeries<S> {
    /// Numerator of the `ħ^k` coefficient.
    pub fn numer_at(&self, k: i32) -> LaurentBlock<S> {
        if k < self.offset || (k - self.offset) as usize >= self.numer.len() {
            LaurentBlock::zero(self.n)
        } else {
            self.numer[(k - self.offset) as usize].clone()
        }
    }

    /// Highest order stored.
    pub fn order(&self) -> i32 {
        self.offset + self.numer.len() as i32 - 1
    }

    /// Evaluates the `ħ^k` coefficient at a point.
    pub fn eval(&self, k: i32, z: &[S]) -> Result<S> {
        let num = eval_block(&self.numer_at(k), z)?;
        let den = eval_block(&self.denominator, z)?;
        let inv = den.inv().ok_or_else(|| Error::Domain("minor evaluated on its polar locus".into()))?;
        Ok(num.mul(&inv))
    }
}

/// Evaluates a polynomial-mode Laurent block at a point.
pub fn eval_block<S: Scalar>(b: &LaurentBlock<S>, z: &[S]) -> Result<S> {
    if z.len() != b.nvars() {
        return Err(Error::Domain(format!("point has {} coordinates, block has {} variables", z.len(), b.nvars())));
    }
    let inv: Vec<Option<S>> = z.iter().map(Scalar::inv).collect();
    let mut acc = S::zero();
    for (e, c) in b.terms() {
        let mut t = c.clone();
        for (v, &x) in e.iter().enumerate() {
            if x >= 0 {
                t = t.mul(&z[v].pow(x as u32));
            } else {
                let iv = inv[v].as_ref().ok_or_else(|| Error::Domain("negative power of zero".into()))?;
                t = t.mul(&iv.pow((-x) as u32));
            }
        }
        acc = acc.add(&t);
    }
    Ok(acc)
}

fn check_sector(model: WaveModel, alpha: u32, sign: i32) -> Result<()> {
    let r = model.r();
    if alpha == 0 || alpha >= r || sign.abs() != 1 {
        return Err(Error::Domain(format!("invalid sector α={alpha}, sign={sign} for r={r}")));
    }
    Ok(())
}

/// The minor `Ŵ^{(±α, i)}_{k,n}` for `k ≤ hbar_order`, with the sector
/// normalisation `κ_α` stripped (`κ = 1` for r = 2). `i` is 0-based.
pub fn minor<S: Scalar>(model: WaveModel, alpha: u32, sign: i32, i: usize, n: usize, hbar_order: usize) -> Result<MinorSeries<S>> {
    check_sector(model, alpha, sign)?;
    if n == 0 || i >= n {
        return Err(Error::Domain(format!("special index {i} out of range for n = {n}")));
    }
    let r = model.r();
    if n == 1 {
        let numer = one_point_minor::<S>(model, alpha, sign, &[], hbar_order)?
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let ex = model.w1_z_power() - model.hbar_weight() * (k as i32 + 1);
                LaurentBlock::monomial(vec![ex], c)
            })
            .collect();
        return Ok(MinorSeries {
            model,
            n,
            special: Some(0),
            alpha,
            sign,
            offset: 0,
            numer,
            denominator: LaurentBlock::constant(1, S::one()),
        });
    }
    let orders: Vec<i32> = (0..=hbar_order as i32).collect();
    let ts = cyclic_numerators::<S>(model, Assembly { n, special: Some((i, alpha)), sign }, &orders)?;
    let m = if n == 2 { 2 } else { 1 };
    let ri = r as i32;
    let a = i64::from(alpha);
    let mut lambdas = Vec::new();
    for beta in 0..i64::from(r) {
        for _ in 0..m {
            lambdas.push(beta);
        }
    }
    for drop in [0, (-a).rem_euclid(i64::from(r))] {
        let pos = lambdas.iter().position(|&b| b == drop).expect("present");
        lambdas.remove(pos);
    }
    let lam: Vec<S> = lambdas.iter().map(|&b| zeta_pow::<S>(r, b)).collect::<Result<_>>()?;
    let zeta_a: S = zeta_pow(r, a)?;
    let phase = zeta_a.pow((n - 1) as u32);
    let mut numer = Vec::with_capacity(ts.len());
    for (k, t) in ts.into_iter().enumerate() {
        let mut acc = t;
        for x in 0..n {
            for y in (x + 1)..n {
                if x == i || y == i {
                    let j = if x == i { y } else { x };
                    for l in &lam {
                        acc = acc
                            .div_binomial(i, j, 1, l)
                            .map_err(|e| Error::Truncation(format!("minor numerator at ħ^{k} not divisible ({e})")))?;
                    }
                } else {
                    for _ in 0..m {
                        acc = acc
                            .div_binomial(x, y, ri, &S::one())
                            .map_err(|e| Error::Truncation(format!("minor numerator at ħ^{k} not divisible ({e})")))?;
                    }
                }
            }
        }
        numer.push(apply_prefactor(model, n, sign, &acc.scale(&phase)));
    }
    let mut den = LaurentBlock::constant(n, S::one());
    for j in (0..n).filter(|&j| j != i) {
        let mut f1 = LaurentBlock::zero(n);
        let mut ei = vec![0; n];
        ei[i] = 1;
        let mut ej = vec![0; n];
        ej[j] = 1;
        f1.add_term(ei.clone(), &S::one());
        f1.add_term(ej.clone(), &S::from_i64(-1));
        let mut f2 = LaurentBlock::zero(n);
        f2.add_term(ei, &zeta_a);
        f2.add_term(ej, &S::from_i64(-1));
        den = den.mul(&f1)?.mul(&f2)?;
    }
    Ok(MinorSeries { model, n, special: Some(i), alpha, sign, offset: 0, numer, denominator: den })
}

/// `Ŵ^{(±α)}_{k,1}` for `k ≤ order`: the coefficient of `z^{s − e(k+1)} ħ^k`,
/// or the value at `z` when a point is given.
fn one_point_minor<S: Scalar>(model: WaveModel, alpha: u32, sign: i32, z: &[S], order: usize) -> Result<Vec<S>> {
    let r = model.r();
    let slot = Slot::<S>::sector(r, alpha, 1)?;
    let br = one_point_bracket(model, &slot, order + 1)?;
    if !br[0].is_zero() {
        return Err(Error::Structural("one-point minor has a nonzero ħ^{-1} term".into()));
    }
    let inv_r = S::from_q(&q(1, i64::from(r)));
    let mut out: Vec<S> = br[1..].iter().map(|c| c.mul(&inv_r)).collect();
    if sign < 0 {
        // Ŵ^{(−α)}(ħ) = −Ŵ^{(+α)}(−ħ)
        for (k, c) in out.iter_mut().enumerate() {
            if k % 2 == 0 {
                *c = c.neg();
            }
        }
    }
    if let Some(x) = z.first() {
        let xi = x.inv().ok_or_else(|| Error::Domain("z = 0".into()))?;
        let s = model.w1_z_power();
        let e = model.hbar_weight();
        for (k, c) in out.iter_mut().enumerate() {
            let ex = s - e * (k as i32 + 1);
            let p = if ex >= 0 { x.pow(ex as u32) } else { xi.pow((-ex) as u32) };
            *c = c.mul(&p);
        }
    }
    Ok(out)
}

/// Kernel `K̂(u, w)` at a point, times `(uw)^{(r−1)/2}`, up to `ħ^order`.
fn kernel_at<S: Scalar>(w: &WaveCoefficients, model: WaveModel, slot: &Slot<S>, sign: i32, u: &S, v: &S, order: usize) -> Result<Vec<S>> {
    let r = model.r() as usize;
    let e = model.hbar_weight();
    let ui = u.inv().ok_or_else(|| Error::Domain("z = 0".into()))?;
    let vi = v.inv().ok_or_else(|| Error::Domain("z = 0".into()))?;
    let te_u = if e >= 0 { ui.pow(e as u32) } else { u.pow((-e) as u32) };
    let te_v = if e >= 0 { vi.pow(e as u32) } else { v.pow((-e) as u32) };
    let th1 = slot.theta1.mul(&te_u);
    let th2 = slot.theta2.mul(&te_v);
    let mut acc = vec![S::zero(); order + 1];
    let mut ph = S::one();
    for m in 0..r {
        let s = w.series(m, &th1, order).mul(&w.series(r - 1 - m, &th2, order))?;
        let mono = ph.mul(&u.pow(m as u32)).mul(&v.pow((r - 1 - m) as u32));
        for (k, a) in acc.iter_mut().enumerate() {
            *a = a.add(&s.coeff(k as i32).mul(&mono));
        }
        ph = ph.mul(&slot.phase);
    }
    let den = u.pow(r as u32).sub(&v.pow(r as u32));
    let di = den.inv().ok_or_else(|| Error::Domain("kernel evaluated at coinciding points".into()))?;
    let f = di.mul_q(&q(i64::from(sign), r as i64));
    Ok(acc.into_iter().map(|a| a.mul(&f)).collect())
}

fn series_mul_vec<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    let n = a.len().min(b.len());
    let mut out = vec![S::zero(); n];
    for (i, x) in a.iter().enumerate().take(n) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(n - i) {
            out[i + j] = out[i + j].add(&x.mul(y));
        }
    }
    out
}

/// `Ŵ^{(±α, i)}_{k,n}` at the point `z`, `k ≤ order`, summing the cyclic
/// kernel products with a dynamic programme over vertex subsets.
pub fn minor_at_point<S: Scalar>(model: WaveModel, alpha: u32, sign: i32, i: usize, z: &[S], order: usize) -> Result<Vec<S>> {
    check_sector(model, alpha, sign)?;
    let n = z.len();
    if i >= n {
        return Err(Error::Domain(format!("special index {i} out of range for n = {n}")));
    }
    if n == 1 {
        return one_point_minor(model, alpha, sign, z, order);
    }
    if n > 20 {
        return Err(Error::Unsupported("point evaluation limited to n ≤ 20".into()));
    }
    let r = model.r();
    let w = coefficients(model, order)?;
    let plain = Slot::<S>::plain(sign);
    let sect = Slot::<S>::sector(r, alpha, sign)?;
    let mut kern: Vec<Vec<Option<Vec<S>>>> = vec![vec![None; n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let slot = if a == i { &sect } else { &plain };
                kern[a][b] = Some(kernel_at(&w, model, slot, sign, &z[a], &z[b], order)?);
            }
        }
    }
    let k = |a: usize, b: usize| kern[a][b].as_ref().expect("off-diagonal");
    let full = (1usize << n) - 1;
    let mut dp: Vec<Vec<Option<Vec<S>>>> = vec![vec![None; n]; 1 << n];
    for v in (0..n).filter(|&v| v != i) {
        dp[(1 << i) | (1 << v)][v] = Some(k(i, v).clone());
    }
    for mask in 0..=full {
        if mask & (1 << i) == 0 {
            continue;
        }
        for v in 0..n {
            let Some(cur) = dp[mask][v].clone() else { continue };
            for x in 0..n {
                if mask & (1 << x) != 0 {
                    continue;
                }
                let nm = mask | (1 << x);
                let add = series_mul_vec(&cur, k(v, x));
                dp[nm][x] = Some(match dp[nm][x].take() {
                    None => add,
                    Some(old) => old.iter().zip(&add).map(|(p, q)| p.add(q)).collect(),
                });
            }
        }
    }
    let mut total = vec![S::zero(); order + 1];
    for v in (0..n).filter(|&v| v != i) {
        if let Some(p) = &dp[full][v] {
            let c = series_mul_vec(p, k(v, i));
            for (t, x) in total.iter_mut().zip(&c) {
                *t = t.add(x);
            }
        }
    }
    let mut pref = if (n - 1).is_multiple_of(2) { S::one() } else { S::from_i64(-1) };
    for x in z {
        let xi = x.inv().ok_or_else(|| Error::Domain("z = 0".into()))?;
        pref = pref.mul(&xi.pow(r - 1));
    }
    Ok(total.into_iter().map(|t| t.mul(&pref)).collect())
}

/// Trans-series sectors with at most one instanton: `(∅, ∅)` is the
/// perturbative `W_n`, `({i}, ∅)` and `(∅, {i})` the minors of sign `±`
/// (sector `α = 1`).
pub fn transseries_sector<S: Scalar>(
    model: WaveModel,
    i_plus: &[usize],
    i_minus: &[usize],
    n: usize,
    hbar_order: usize,
) -> Result<MinorSeries<S>> {
    match (i_plus, i_minus) {
        ([], []) => {
            if n == 1 {
                let c = one_point_series(model, hbar_order + 1)?;
                let numer = c
                    .iter()
                    .enumerate()
                    .map(|(k, v)| {
                        let ex = model.w1_z_power() - model.hbar_weight() * k as i32;
                        LaurentBlock::monomial(vec![ex], S::from_q(v))
                    })
                    .collect();
                return Ok(MinorSeries {
                    model,
                    n,
                    special: None,
                    alpha: 0,
                    sign: 1,
                    offset: -1,
                    numer,
                    denominator: LaurentBlock::constant(1, S::one()),
                });
            }
            let start = if n == 2 { 1 } else { 0 };
            let numer = (0..=hbar_order as i32)
                .map(|k| if k < start { Ok(LaurentBlock::zero(n)) } else { Ok(correlator_hbar_coeff(model, n, k)?.convert(S::from_q)) })
                .collect::<Result<_>>()?;
            Ok(MinorSeries {
                model,
                n,
                special: None,
                alpha: 0,
                sign: 1,
                offset: 0,
                numer,
                denominator: LaurentBlock::constant(n, S::one()),
            })
        }
        ([i], []) => minor(model, 1, 1, *i, n, hbar_order),
        ([], [i]) => minor(model, 1, -1, *i, n, hbar_order),
        _ => Err(Error::Unsupported("only sectors with at most one instanton are supported".into())),
    }
}

/// Residual of `W₁''' − 4x W₁' + 2ħ W₁` (`f' = ħ df/dx`, `x = z²`) for a
/// one-point series given as `(ħ power, z power) → coefficient`; only
/// ħ-powers `≤ max_order` are returned.
pub fn ode_residual_w1(w: &BTreeMap<(i32, i32), Q>, max_order: i32) -> BTreeMap<(i32, i32), Q> {
    let d = |m: &BTreeMap<(i32, i32), Q>| -> BTreeMap<(i32, i32), Q> {
        let mut out = BTreeMap::new();
        for (&(h, e), c) in m {
            if e != 0 {
                let v: Q = Q::from(c * e) / 2;
                *out.entry((h + 1, e - 2)).or_insert_with(Q::new) += v;
            }
        }
        out
    };
    let d1 = d(w);
    let d3 = d(&d(&d1));
    let mut res: BTreeMap<(i32, i32), Q> = BTreeMap::new();
    for (&(h, e), c) in &d3 {
        *res.entry((h, e)).or_default() += c;
    }
    for (&(h, e), c) in &d1 {
        *res.entry((h, e + 2)).or_default() -= Q::from(c * 4);
    }
    for (&(h, e), c) in w {
        *res.entry((h + 1, e)).or_default() += Q::from(c * 2);
    }
    res.retain(|&(h, _), c| h <= max_order && !Scalar::is_zero(c));
    res
}

/// `W₁` of the Airy model up to `ħ^order`, keyed by `(ħ power, z power)`.
pub fn airy_w1_terms(order: usize) -> Result<BTreeMap<(i32, i32), Q>> {
    let model = WaveModel::airy();
    let c = one_point_series(model, order + 1)?;
    Ok(c.into_iter().enumerate().filter(|(_, v)| !Scalar::is_zero(v)).map(|(k, v)| ((k as i32 - 1, 1 - 3 * k as i32), v)).collect())
}

/// True iff the Airy one-point function solves its third-order ODE through
/// `ħ^order`.
pub fn ode_check_w1(model: WaveModel, order: usize) -> Result<bool> {
    if model.kind != ModelKind::Airy {
        return Err(Error::Unsupported("the one-point ODE is implemented for the Airy model".into()));
    }
    if order < 2 {
        return Err(Error::Domain("ode_check_w1 needs order ≥ 2".into()));
    }
    let w = airy_w1_terms(order)?;
    Ok(ode_residual_w1(&w, order as i32 + 1).is_empty())
}

/// Result of the series-mode recomputation: the expansion is exact on the
/// region `Σ_v weights[v] e_v ≥ floor`.
#[derive(Clone, Debug)]
pub struct SeriesModeResult {
    pub block: LaurentBlock<Q>,
    pub weights: Vec<i64>,
    pub floor: i64,
}

impl SeriesModeResult {
    /// Restricts another block to the known region.
    pub fn restrict(&self, b: &LaurentBlock<Q>) -> LaurentBlock<Q> {
        let kept = b.terms().iter().filter(|(e, _)| weighted(e, &self.weights) >= self.floor).map(|(e, c)| (e.clone(), c.clone()));
        LaurentBlock::from_terms(b.nvars(), kept).expect("same variables")
    }
}

fn weighted(e: &[i32], w: &[i64]) -> i64 {
    e.iter().zip(w).map(|(&x, &y)| i64::from(x) * y).sum()
}

/// Polynomial block known only above a weighted-degree floor.
struct Graded {
    block: LaurentBlock<Q>,
    floor: Option<i64>,
}

impl Graded {
    fn max_weight(&self, w: &[i64]) -> i64 {
        self.block.terms().keys().map(|e| weighted(e, w)).max().unwrap_or(0)
    }

    fn mul(&self, o: &Graded, w: &[i64]) -> Result<Graded> {
        let fa = self.floor.map(|f| f + o.max_weight(w));
        let fb = o.floor.map(|f| f + self.max_weight(w));
        let floor = match (fa, fb) {
            (None, None) => None,
            (Some(x), None) | (None, Some(x)) => Some(x),
            (Some(x), Some(y)) => Some(x.max(y)),
        };
        let prod = self.block.mul(&o.block)?;
        let block = match floor {
            None => prod,
            Some(f) => LaurentBlock::from_terms(
                prod.nvars(),
                prod.terms().iter().filter(|(e, _)| weighted(e, w) >= f).map(|(e, c)| (e.clone(), c.clone())),
            )?,
        };
        Ok(Graded { block, floor })
    }
}

/// Recomputes `W_{g,n}` (n ≥ 2) by expanding every `1/(x_a − x_b)` as a
/// geometric series in the region fixed by `ordering` (first entry has the
/// largest modulus). Truncation is tracked by a weighted degree that
/// decreases along every geometric tail; the expansion is deepened until the
/// known region covers the polynomial answer.
pub fn correlator_series_mode(model: WaveModel, g: u32, n: usize, ordering: &[usize]) -> Result<SeriesModeResult> {
    let kk = 2 * i64::from(g) - 2 + n as i64;
    if n < 2 || kk <= 0 {
        return Err(Error::Domain("series mode needs n ≥ 2 and 2g−2+n > 0".into()));
    }
    if ordering.len() != n {
        return Err(Error::Domain("ordering length mismatch".into()));
    }
    let rank = crate::series::ordering_rank(ordering);
    let weights: Vec<i64> = rank.iter().map(|&p| (n - p) as i64).collect();
    let exact = correlator_hbar_coeff(model, n, kk as i32)?;
    let lo = exact.terms().keys().map(|e| weighted(e, &weights)).min().unwrap_or(0);
    let r = model.r() as i32;
    let numer = cyclic_numerators_per_cycle(model, n, kk as i32)?;
    let mut depth = 4;
    while depth <= 512 {
        let mut total: Option<(LaurentBlock<Q>, i64)> = None;
        for (cyc, num) in &numer {
            let mut acc = Graded { block: num.clone(), floor: None };
            for t in 0..n {
                let (u, v) = (cyc[t], cyc[(t + 1) % n]);
                let inv = invert_power_difference::<Q>(n, u, v, r, depth, ordering)?;
                let big = if rank[u] < rank[v] { u } else { v };
                let inv = LaurentBlock::from_terms(n, inv.terms().iter().map(|(e, c)| (e.clone(), c.clone())))?;
                let small = u + v - big;
                // the first omitted term has weighted degree −r w_big − r·depth·(w_big − w_small)
                let f = -i64::from(r) * (weights[big] + depth as i64 * (weights[big] - weights[small])) + 1;
                acc = acc.mul(&Graded { block: inv, floor: Some(f) }, &weights)?;
            }
            let fl = acc.floor.expect("expansions carry floors");
            total = Some(match total {
                None => (acc.block, fl),
                Some((t, tf)) => (t.add(&acc.block)?, tf.max(fl)),
            });
        }
        let (block, floor) = total.expect("n ≥ 2 has cycles");
        let floor = floor - i64::from(r - 1) * weights.iter().sum::<i64>();
        if floor <= lo {
            let block = apply_prefactor(model, n, 1, &block);
            let res = SeriesModeResult { block, weights, floor };
            let block = res.restrict(&res.block);
            return Ok(SeriesModeResult { block, ..res });
        }
        depth *= 2;
    }
    Err(Error::Truncation("series-mode expansion did not reach the polynomial support".into()))
}

fn cyclic_numerators_per_cycle(model: WaveModel, n: usize, k: i32) -> Result<Vec<(Vec<usize>, LaurentBlock<Q>)>> {
    let r = model.r() as usize;
    let ku = k as usize;
    let w = coefficients(model, ku)?;
    let ch = channel_table(&w, r, &Slot::<Q>::plain(1), ku)?;
    let mats: Vec<SeriesMatrix<Q>> = (0..n).map(|v| vertex_matrix(model, &ch, n, v, ku)).collect();
    cycles_from(0, n)
        .into_iter()
        .map(|cyc| {
            let mut prod = mats[cyc[n - 1]].clone();
            for t in (1..n - 1).rev() {
                prod = matmul(&prod, &mats[cyc[t]])?;
            }
            let num = trace_coeff(&mats[0], &prod, k, n)?;
            Ok((cyc, num))
        })
        .collect()
}

/// Largest relative defect, over `samples` random configurations, of the
/// closed evaluation of the cyclic sum of sector kernels as a sum over
/// compositions of `(r+1)(2g−2+n)` weighted by sines.
pub fn kernel_sum_max_error(seed: u64, samples: usize) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let prec = 128;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut worst = 0f64;
    let mut checked = 0;
    while checked < samples {
        let n = rng.gen_range(1..=4usize);
        let r = rng.gen_range(2..=6u32);
        let alpha = rng.gen_range(1..r);
        let g = rng.gen_range(1..=2i64);
        let z: Vec<Cx> = (0..n).map(|_| Cx::from_q(&q(rng.gen_range(20..40), 30), prec)).collect();
        let zq: Vec<f64> = z.iter().map(|c| c.to_f64().0).collect();
        let mut s = zq.clone();
        s.sort_by(f64::total_cmp);
        s.dedup();
        if s.len() < n {
            continue;
        }
        let big_d = (i64::from(r) + 1) * (2 * g - 2 + n as i64);
        let zeta = |j: i64| Cx::root_of_unity(2 * r, j, prec);
        let one = Cx::from_f64(1.0, 0.0, prec);
        let a = i64::from(alpha);
        let mut lhs = Cx::zero(prec);
        for i in 0..n {
            let mut t1 = zeta(a).mul(&one.sub(&zeta(2 * a)).powi(-2 * g));
            let mut t2 = zeta(-a).mul(&one.sub(&zeta(-2 * a)).powi(-2 * g));
            for j in (0..n).filter(|&j| j != i) {
                let dz = z[i].sub(&z[j]);
                t1 = t1.div(&dz.mul(&zeta(2 * a).mul(&z[i]).sub(&z[j])));
                t2 = t2.div(&dz.mul(&zeta(-2 * a).mul(&z[i]).sub(&z[j])));
            }
            lhs = lhs.add(&t1.sub(&t2).mul(&z[i].powi(-big_d + n as i64 - 2)));
        }
        let pi = crate::exact::pi(prec);
        // divide by πi
        lhs = lhs.div(&Cx { re: rug::Float::with_val(prec, 0), im: pi.clone() });
        let sinf = |k: i64| ((a * k) as f64 * std::f64::consts::PI / f64::from(r)).sin();
        let sa = sinf(1);
        let sign = if (g - 1 + a * n as i64) % 2 == 0 { 1.0 } else { -1.0 };
        let pref = sign * 2f64.powi(n as i32) / (2.0 * std::f64::consts::PI * sa) / (2.0 * sa).powi((2 * g - 2 + n as i64) as i32);
        let mut rhs = 0.0;
        let mut ks = vec![0i64; n];
        fn comps(pos: usize, left: i64, ks: &mut Vec<i64>, f: &mut dyn FnMut(&[i64])) {
            if pos + 1 == ks.len() {
                ks[pos] = left;
                f(ks);
                return;
            }
            for v in 0..=left {
                ks[pos] = v;
                comps(pos + 1, left - v, ks, f);
            }
        }
        comps(0, big_d, &mut ks, &mut |k: &[i64]| {
            let mut t = 1.0;
            for (i, &ki) in k.iter().enumerate() {
                t *= sinf(ki) / zq[i].powi((ki + 1) as i32);
            }
            rhs += t;
        });
        rhs *= pref;
        let (lr, li) = lhs.to_f64();
        let scale = rhs.abs().max(1.0);
        worst = worst.max((lr - rhs).abs() / scale).max(li.abs() / scale);
        checked += 1;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{double_factorial, factorial, Cyclotomic};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rq(rng: &mut rand::rngs::StdRng) -> Q {
        let a: i64 = rng.gen_range(1..40);
        let b: i64 = rng.gen_range(1..40);
        q(a, b)
    }

    #[test]
    fn airy_one_point_golden() {
        let m = WaveModel::airy();
        assert_eq!(one_point_coefficient(m, 1).unwrap(), q(-1, 32));
        assert_eq!(one_point_coefficient(m, 2).unwrap(), q(-105, 2048));
        assert_eq!(one_point_coefficient(m, 3).unwrap(), q(-25025, 65536));
        assert_eq!(intersection_number(m, &[1], None).unwrap(), q(1, 24));
        assert_eq!(intersection_number(m, &[4], None).unwrap(), q(1, 1152));
        assert_eq!(intersection_number(m, &[7], None).unwrap(), q(1, 82944));
    }

    #[test]
    fn closed_formula_top_descendant() {
        for g in 1..=8u32 {
            let want = Q::from(1) / (Q::from(Integer::from(24).pow(g)) * Q::from(factorial(g)));
            assert_eq!(intersection_number(WaveModel::airy(), &[3 * g - 2], None).unwrap(), want, "g = {g}");
        }
    }

    use rug::{ops::Pow, Integer};

    #[test]
    fn genus_zero_and_one_airy() {
        let m = WaveModel::airy();
        assert_eq!(intersection_number(m, &[0, 0, 0], None).unwrap(), Q::from(1));
        assert_eq!(intersection_number(m, &[1, 0, 0, 0], None).unwrap(), Q::from(1));
        assert_eq!(intersection_number(m, &[1, 1], None).unwrap(), q(1, 24));
        assert_eq!(intersection_number(m, &[2, 0], None).unwrap(), q(1, 24));
        assert_eq!(intersection_number(m, &[2, 3], None).unwrap(), q(29, 5760));
    }

    #[test]
    fn string_and_dilaton_small() {
        let m = WaveModel::airy();
        for g in 0..=2u32 {
            for n in 2..=3usize {
                let p = correlator(m, g, n + 1).unwrap();
                let rest = correlator(m, g, n).ok();
                for (d, _, v) in p.intersections().unwrap() {
                    let Some(rest) = &rest else { continue };
                    let tail = &d[1..];
                    if d[0] == 0 {
                        let mut s = Q::new();
                        for j in 0..n {
                            if tail[j] > 0 {
                                let mut dd = tail.to_vec();
                                dd[j] -= 1;
                                s += extract_intersection(rest, &dd, None).unwrap();
                            }
                        }
                        assert_eq!(v, s, "string {d:?}");
                    } else if d[0] == 1 {
                        let w = extract_intersection(rest, tail, None).unwrap();
                        assert_eq!(v, w * Q::from(2 * g as i64 - 2 + n as i64), "dilaton {d:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn theta_one_point() {
        let m = WaveModel::bessel();
        for g in 1..=6u32 {
            let want = Q::from(double_factorial(2 * g as i64 - 1) * double_factorial(2 * g as i64 - 3))
                / (Q::from(Integer::from(8).pow(g)) * Q::from(factorial(g)));
            assert_eq!(intersection_number(m, &[g - 1], None).unwrap(), want, "g = {g}");
        }
    }

    #[test]
    fn bessel_vanishes_in_genus_zero() {
        let p = correlator(WaveModel::bessel(), 0, 3).unwrap();
        assert!(p.coeffs.is_empty());
    }

    #[test]
    fn rspin_low_genus() {
        for r in 3..=5u32 {
            let m = WaveModel::rairy(r).unwrap();
            assert_eq!(intersection_number(m, &[1], Some(&[1])).unwrap(), q(i64::from(r) - 1, 24), "r = {r}");
            let p = correlator(m, 0, 3).unwrap();
            for a1 in 1..r {
                for a2 in 1..r {
                    for a3 in 1..r {
                        if a1 + a2 + a3 == r + 1 {
                            let v = extract_intersection(&p, &[0, 0, 0], Some(&[a1, a2, a3])).unwrap();
                            assert_eq!(v, Q::from(1), "r = {r}, a = {a1},{a2},{a3}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rairy_two_matches_airy() {
        let a = correlator(WaveModel::airy(), 1, 2).unwrap();
        let b = correlator(WaveModel::rairy(2).unwrap(), 1, 2).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
    }

    #[test]
    fn low_orders_vanish() {
        for n in 3..=4usize {
            for k in 0..(n as i32 - 2) {
                assert!(correlator_hbar_coeff(WaveModel::airy(), n, k).unwrap().is_zero(), "n={n} k={k}");
            }
        }
        assert!(correlator_hbar_coeff(WaveModel::airy(), 2, 1).unwrap().is_zero());
    }

    #[test]
    fn degree_mismatch_is_domain_error() {
        let p = correlator(WaveModel::airy(), 1, 1).unwrap();
        assert!(matches!(extract_intersection(&p, &[2], None), Err(Error::Domain(_))));
    }

    #[test]
    fn json_and_csv() {
        let p = correlator(WaveModel::airy(), 1, 2).unwrap();
        let back = CorrelatorPoly::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back.coeffs, p.coeffs);
        let csv = p.to_csv().unwrap();
        assert!(csv.starts_with("d1,d2,a1,a2,coefficient,intersection"));
        assert_eq!(csv.lines().count(), p.coeffs.len() + 1);
    }

    #[test]
    fn kernel_leading_order() {
        for model in [WaveModel::airy(), WaveModel::rairy(3).unwrap()] {
            let r = model.r() as i32;
            let depth = 6;
            let k = kernel::<Q>(model, PairLabel::PlusMinus, 0, 1, 2, depth).unwrap();
            let lead = k.data.coeff(0);
            let closed = invert_power_difference::<Q>(2, 0, 1, 1, (r as usize) * depth, &[0, 1]).unwrap().scale(&q(1, i64::from(r)));
            let floor = lead.floor().unwrap().to_vec();
            assert_eq!(lead.restrict_to_floor(&floor), closed.restrict_to_floor(&floor));
        }
    }

    #[test]
    fn kernel_parity() {
        let model = WaveModel::rairy(3).unwrap();
        let a = kernel::<Q>(model, PairLabel::PlusMinus, 0, 1, 5, 4).unwrap();
        let b = kernel::<Q>(model, PairLabel::MinusPlus, 0, 1, 5, 4).unwrap();
        assert_eq!(b.data.coeffs(), a.data.parity().neg().coeffs());
    }

    #[test]
    fn ode_for_one_point() {
        assert!(ode_check_w1(WaveModel::airy(), 10).unwrap());
        let mut w = airy_w1_terms(10).unwrap();
        let key = *w.keys().nth(3).unwrap();
        let v = w[&key].clone();
        w.insert(key, -v);
        assert!(!ode_residual_w1(&w, 11).is_empty());
        let lead: BTreeMap<(i32, i32), Q> = [((-1, 1), Q::from(1))].into_iter().collect();
        assert!(ode_residual_w1(&lead, 0).is_empty());
    }

    #[test]
    fn ordering_independence() {
        let models = [WaveModel::airy(), WaveModel::bessel(), WaveModel::rairy(3).unwrap(), WaveModel::rairy(4).unwrap()];
        for (model, g) in models.iter().flat_map(|&m| (1..=3).map(move |g| (m, g))) {
            for n in 2..=3usize {
                let exact = correlator_hbar_coeff(model, n, 2 * g - 2 + n as i32).unwrap();
                let orders: Vec<Vec<usize>> = if n == 2 { vec![vec![0, 1], vec![1, 0]] } else { vec![vec![0, 1, 2], vec![2, 0, 1]] };
                for o in orders {
                    let s = correlator_series_mode(model, g as u32, n, &o).unwrap();
                    assert_eq!(s.block, s.restrict(&exact), "{model:?} n={n} ordering {o:?}");
                    assert_eq!(s.restrict(&exact), exact);
                }
            }
        }
    }

    #[test]
    fn minor_parity() {
        let model = WaveModel::airy();
        for n in 1..=3usize {
            let p = minor::<Q>(model, 1, 1, 0, n, 5).unwrap();
            let m = minor::<Q>(model, 1, -1, 0, n, 5).unwrap();
            for k in 0..=5 {
                let mut want = p.numer_at(k);
                if (k + n as i32) % 2 == 1 {
                    want = want.neg();
                }
                assert_eq!(m.numer_at(k), want, "n={n} k={k}");
            }
        }
        let model = WaveModel::rairy(3).unwrap();
        let p = minor::<Cyclotomic>(model, 1, 1, 1, 2, 3).unwrap();
        let m = minor::<Cyclotomic>(model, 1, -1, 1, 2, 3).unwrap();
        for k in 0..=3 {
            let want = if k % 2 == 1 { p.numer_at(k).neg() } else { p.numer_at(k) };
            assert_eq!(m.numer_at(k), want, "k={k}");
        }
    }

    #[test]
    fn airy_minor_leading_order() {
        // Ŵ_{0,n} = −(1/4) Π z^{-1} z_i^{n−2} / Π_{j≠i}(z_i² − z_j²)
        let model = WaveModel::airy();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in 1..=4usize {
            let m = minor::<Q>(model, 1, 1, 0, n, 0).unwrap();
            for _ in 0..5 {
                let z: Vec<Q> = (0..n).map(|_| rq(&mut rng)).collect();
                let mut want = q(-1, 4) * crate::exact::q_pow(&z[0], n as i32 - 2);
                for (j, x) in z.iter().enumerate() {
                    want /= x;
                    if j != 0 {
                        want /= Q::from(&z[0] * &z[0]) - Q::from(x * x);
                    }
                }
                assert_eq!(m.eval(0, &z).unwrap(), want, "n={n}");
            }
        }
    }

    #[test]
    fn point_evaluation_matches_symbolic() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for (model, n, i) in [(WaveModel::airy(), 3, 1), (WaveModel::bessel(), 3, 0), (WaveModel::airy(), 1, 0)] {
            let sym = minor::<Q>(model, 1, 1, i, n, 4).unwrap();
            let z: Vec<Q> = (0..n).map(|_| rq(&mut rng)).collect();
            let pt = minor_at_point(model, 1, 1, i, &z, 4).unwrap();
            for k in 0..=4 {
                assert_eq!(sym.eval(k, &z).unwrap(), pt[k as usize], "{model:?} k={k}");
            }
        }
        let model = WaveModel::rairy(3).unwrap();
        let sym = minor::<Cyclotomic>(model, 2, 1, 0, 2, 2).unwrap();
        let z: Vec<Cyclotomic> = [q(2, 3), q(5, 7)].iter().map(Cyclotomic::from_q).collect();
        let pt = minor_at_point(model, 2, 1, 0, &z, 2).unwrap();
        for k in 0..=2 {
            assert_eq!(sym.eval(k, &z).unwrap(), pt[k as usize]);
        }
    }

    #[test]
    fn minor_residues() {
        // numer_n|_{z_j = z_i} = −numer_{n−1}, numer_n|_{z_j = −z_i} = numer_{n−1}
        for model in [WaveModel::airy(), WaveModel::bessel()] {
            for n in 2..=3usize {
                let big = minor::<Q>(model, 1, 1, 0, n, 3).unwrap();
                let small = minor::<Q>(model, 1, 1, 0, n - 1, 3).unwrap();
                let j = n - 1;
                for k in 0..=3 {
                    let at_plus = big.numer_at(k).substitute_proportional(j, 0, &Q::from(1)).unwrap();
                    let at_minus = big.numer_at(k).substitute_proportional(j, 0, &Q::from(-1)).unwrap();
                    assert_eq!(at_plus, small.numer_at(k).neg(), "{model:?} n={n} k={k} (+)");
                    assert_eq!(at_minus, small.numer_at(k), "{model:?} n={n} k={k} (−)");
                }
            }
        }
    }

    #[test]
    fn cyclic_sum_identity_at_random_points() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.gen_range(1..=5usize);
            let z: Vec<Q> = (0..n).map(|_| rq(&mut rng)).collect();
            let mut distinct = z.clone();
            distinct.sort();
            distinct.dedup();
            let tau = rq(&mut rng);
            if distinct.len() < n || z.contains(&tau) {
                continue;
            }
            let mut lhs = Q::new();
            for cyc in cycles_from(0, n) {
                let next = |v: usize| cyc[(cyc.iter().position(|&x| x == v).unwrap() + 1) % n];
                let mut t = Q::from(1) / (Q::from(&z[next(0)] - &tau));
                for a in 1..n {
                    t /= Q::from(&z[a] - &z[next(a)]);
                }
                lhs += t;
            }
            let mut rhs = crate::exact::q_pow(&Q::from(&z[0] - &tau), n as i32 - 2);
            for x in &z[1..] {
                rhs /= Q::from(&z[0] - x) * Q::from(&tau - x);
            }
            assert_eq!(lhs, rhs, "n = {n}");
        }
    }

    #[test]
    fn kernel_sum_compositions_at_random_points() {
        assert!(kernel_sum_max_error(5, 100).unwrap() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn correlators_are_symmetric(g in 0u32..3, n in 2usize..4) {
            prop_assume!(2 * g as usize + n > 2);
            for model in [WaveModel::airy(), WaveModel::bessel(), WaveModel::rairy(3).unwrap()] {
                let p = correlator(model, g, n).unwrap();
                prop_assert!(p.is_symmetric());
            }
        }
    }
}
