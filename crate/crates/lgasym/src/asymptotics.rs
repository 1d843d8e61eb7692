//! Subleading polynomial families extracted from the one-instanton minors,
//! their closed forms in `n`, the coefficients `α_k`, `β_k`, `γ_k^{(r,α)}`
//! and floating asymptotic estimates of intersection numbers.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::correlators::{genus_of, minor_at_point, zeta_pow};
use crate::error::{Error, Result};
use crate::exact::{q, q_from_str, q_to_string, r_factorial, solve_linear, Cyclotomic, Multiplicities, Scalar, Q};
use crate::symfun::{
    basis_convert, elementary_to_monomial_count, m_times_h_from_multiplicities, monomial_eval, weighted_m_times_h, Basis, NPoly, Partition,
    SymPoly,
};
use crate::wave::{ModelKind, WaveModel};

/// Degree bounds of the `m`-variable member at order `k`:
/// `(total, per variable)`.
pub fn degree_bounds(model: WaveModel, k: u32, m: usize) -> (u32, u32) {
    let e = model.hbar_weight() as u32;
    if k == 0 {
        return (0, 0);
    }
    let total = (e * k + m as u32).saturating_sub(1).min(2 * e * k - 2);
    let total = if model.r() == 2 { total - total % 2 } else { total };
    (total, e * k)
}

fn fit_labels(model: WaveModel, k: u32, m: usize) -> Vec<Partition> {
    let (tot, per) = degree_bounds(model, k, m);
    let even = model.r() == 2;
    (0..=tot)
        .filter(|w| !even || w % 2 == 0)
        .flat_map(|w| Partition::all_of_weight(w, m, per))
        .filter(|p| !even || p.parts().iter().all(|x| x % 2 == 0))
        .collect()
}

/// Value of the normalised minor polynomial `R^{(α)}_{k,m}(u)` at a point,
/// read off the `(m+1)`-point minor with special point `z_0 = 1`,
/// `z_j = 1/u_j`.
pub fn member_at_point<S: Scalar>(model: WaveModel, alpha: u32, k: u32, u: &[S]) -> Result<S> {
    let r = model.r();
    let n = u.len() + 1;
    let zeta: S = zeta_pow(r, i64::from(alpha))?;
    let one_minus = S::one().sub(&zeta);
    if u.is_empty() {
        let w = minor_at_point::<S>(model, alpha, 1, 0, &[S::one()], k as usize)?;
        return Ok(w[k as usize].mul(&one_minus).mul_q(&Q::from(-i64::from(r))));
    }
    let mut z = vec![S::one()];
    for x in u {
        z.push(x.inv().ok_or_else(|| Error::Domain("u = 0".into()))?);
    }
    let w = minor_at_point::<S>(model, alpha, 1, 0, &z, k as usize)?;
    let mut val = w[k as usize].clone();
    for zj in &z[1..] {
        val = val.mul(&zj.pow(r - 1)).mul(&S::one().sub(zj)).mul(&zeta.sub(zj));
    }
    let mut pref = S::from_q(&Q::from(i64::from(r))).pow(n as u32);
    if n % 2 == 1 {
        pref = pref.neg();
    }
    let den = one_minus.pow((n - 2) as u32).inv().ok_or_else(|| Error::Domain("1 − ζ^α = 0".into()))?;
    Ok(val.mul(&pref).mul(&den))
}

/// `R^{(α)}_{k,m}` in the monomial basis of `u`, fitted from exact minor
/// evaluations by an overdetermined linear solve.
pub fn fit_member<S: Scalar>(model: WaveModel, alpha: u32, k: u32, m: usize, seed: u64) -> Result<BTreeMap<Partition, S>> {
    let labels = fit_labels(model, k, m);
    if m == 0 {
        let v = member_at_point::<S>(model, alpha, k, &[])?;
        let mut out = BTreeMap::new();
        if !v.is_zero() {
            out.insert(Partition::empty(), v);
        }
        return Ok(out);
    }
    let extra = 4;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed ^ (u64::from(k) << 32) ^ (m as u64));
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    while rows.len() < labels.len() + extra {
        let mut pts: Vec<Q> = Vec::with_capacity(m);
        while pts.len() < m {
            let c = q(rng.gen_range(2..60), rng.gen_range(1..17));
            if c != 1 && !pts.contains(&c) {
                pts.push(c);
            }
        }
        let mut key = pts.clone();
        key.sort();
        if !used.insert(key) {
            continue;
        }
        let u: Vec<S> = pts.iter().map(S::from_q).collect();
        let row: Vec<S> = labels.iter().map(|l| monomial_eval(l, &u)).collect::<Result<_>>()?;
        rhs.push(member_at_point::<S>(model, alpha, k, &u)?);
        rows.push(row);
    }
    let nl = labels.len();
    let sol = solve_linear(rows[..nl].to_vec(), rhs[..nl].to_vec())?;
    for (row, b) in rows[nl..].iter().zip(&rhs[nl..]) {
        let mut acc = S::zero();
        for (a, x) in row.iter().zip(&sol) {
            acc = acc.add(&a.mul(x));
        }
        if acc != *b {
            return Err(Error::Pipeline(format!("minor at order {k} with {} points is not a polynomial within the degree bounds", m + 1)));
        }
    }
    Ok(labels.into_iter().zip(sol).filter(|(_, c)| !c.is_zero()).collect())
}

/// Scale `c` relating the table normalisation to the minor normalisation:
/// `P_{k,m} = c^k R_{k,m}`.
fn table_scale(model: WaveModel) -> Q {
    match model.kind {
        ModelKind::Airy => Q::from(2),
        ModelKind::Bessel => Q::from(2),
        ModelKind::RAiry(_) => Q::from(1),
    }
}

/// `P_{k,m}` (Airy), `Q_{k,m}` (Bessel) as a symmetric polynomial in the
/// squared variables `u_j²`, in `m = n − 1` variables read off `n`-point minors.
pub fn subleading_poly(model: WaveModel, k: u32, m: usize) -> Result<SymPoly> {
    if model.r() != 2 {
        return Err(Error::Unsupported("use rspin_subleading_poly for r ≥ 3".into()));
    }
    let fit = fit_member::<Q>(model, 1, k, m, 0x5eed)?;
    let scale = crate::exact::q_pow(&table_scale(model), k as i32);
    let mut out = SymPoly::zero(m, Basis::Monomial);
    for (lam, c) in fit {
        let h = lam.halved().ok_or_else(|| Error::Pipeline("odd exponent in an even family".into()))?;
        out.add_term(h, &Q::from(&c * &scale));
    }
    Ok(out)
}

/// `R^{(α)}_{k,m}` for r-Airy with cyclotomic coefficients, in the
/// monomial basis of `u`.
pub fn rspin_subleading_poly(r: u32, alpha: u32, k: u32, m: usize) -> Result<BTreeMap<Partition, Cyclotomic>> {
    let model = WaveModel::rairy(r)?;
    if alpha == 0 || alpha >= r {
        return Err(Error::Domain(format!("α = {alpha} outside 1..{r}")));
    }
    fit_member::<Cyclotomic>(model, alpha, k, m, 0x5eed)
}

/// `P_{k,n}` for all `n` from finitely many seeds.
#[derive(Clone, Debug)]
pub struct SubleadingFamily {
    pub model: WaveModel,
    pub k: u32,
    /// Seeds `P_{k,m}` for `m = 0..seed.len()`, in squared variables.
    pub seed: Vec<SymPoly>,
    /// First `m` from which the shifted-elementary expansion is constant.
    pub stable_from: usize,
    /// `C_{k,n,ν}` as polynomials in `n`, keyed by `ν` (squared variables).
    pub closed_form: BTreeMap<Partition, NPoly>,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    model: String,
    k: u32,
    stable_from: usize,
    coefficients: Vec<(Vec<u32>, Vec<String>)>,
}

impl SubleadingFamily {
    /// Member with `m` variables, in squared variables.
    pub fn member(&self, m: usize) -> Result<SymPoly> {
        if m < self.stable_from {
            return self.seed.get(m).cloned().ok_or_else(|| Error::Domain(format!("no seed for {m} variables")));
        }
        let nq = Q::from(m as u64);
        let mut out = SymPoly::zero(m, Basis::Monomial);
        for (nu, c) in &self.closed_form {
            if nu.length() <= m {
                out.add_term(nu.clone(), &c.eval(&nq));
            }
        }
        Ok(out)
    }

    /// `C_{k,n,ν}` evaluated at `n`, honouring seeds below stabilisation.
    pub fn coefficients_at(&self, n: usize) -> Result<BTreeMap<Partition, Q>> {
        Ok(self.member(n)?.coeffs)
    }

    pub fn to_json(&self) -> Result<String> {
        let j = FamilyJson {
            model: self.model.name(),
            k: self.k,
            stable_from: self.stable_from,
            coefficients: self
                .closed_form
                .iter()
                .map(|(p, c)| (p.trimmed().parts().to_vec(), c.coeffs().iter().map(q_to_string).collect()))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    /// Parses the closed form written by [`SubleadingFamily::to_json`]; seeds are not stored.
    pub fn closed_form_from_json(s: &str) -> Result<BTreeMap<Partition, NPoly>> {
        let j: FamilyJson = serde_json::from_str(s)?;
        j.coefficients
            .into_iter()
            .map(|(p, c)| Ok((Partition::new(p), NPoly::from_coeffs(c.iter().map(|x| q_from_str(x)).collect::<Result<_>>()?))))
            .collect()
    }
}

fn to_u_poly(p: &SymPoly) -> SymPoly {
    let mut out = SymPoly::zero(p.n, Basis::Monomial);
    for (lam, c) in &p.coeffs {
        out.add_term(lam.doubled(), c);
    }
    out
}

/// `ê_λ = Π e_{λ_i}(u − 1)` as `Σ_ν c_ν(n) m_ν(u)`.
fn shifted_e_closed(lambda: &Partition) -> BTreeMap<Partition, NPoly> {
    // expand each factor in plain e_j with n-polynomial coefficients
    let mut terms: Vec<(Vec<u32>, NPoly)> = vec![(Vec::new(), NPoly::constant(Q::from(1)))];
    for &s in lambda.trimmed().parts() {
        let mut next = Vec::new();
        for (js, c) in &terms {
            for j in 0..=s {
                let mut b = NPoly::binomial_shift(-i64::from(j), s - j);
                if (s - j) % 2 == 1 {
                    b = b.scale(&Q::from(-1));
                }
                let mut js2 = js.clone();
                js2.push(j);
                next.push((js2, c.mul(&b)));
            }
        }
        terms = next;
    }
    let mut out: BTreeMap<Partition, NPoly> = BTreeMap::new();
    for (js, c) in terms {
        let rows = Partition::new(js).trimmed();
        let w = rows.weight();
        let maxp = rows.length() as u32;
        for nu in Partition::all_of_weight(w, w as usize, maxp.max(if w == 0 { 0 } else { 1 })) {
            let cnt = elementary_to_monomial_count(&rows, &nu);
            if cnt > 0 {
                let e = out.entry(nu).or_default();
                *e = e.add(&c.scale(&Q::from(cnt)));
            }
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Builds the closed form from seeds `P_{k,0}, …, P_{k,N}` (squared variables).
pub fn extend_family(model: WaveModel, k: u32, seeds: Vec<SymPoly>) -> Result<SubleadingFamily> {
    if seeds.len() < 3 {
        return Err(Error::Domain("need seeds for at least three values of n".into()));
    }
    for w in seeds.windows(2) {
        check_specialisation(&w[1], &w[0])?;
    }
    let mut hats: Vec<BTreeMap<Partition, Q>> = Vec::new();
    for s in &seeds {
        hats.push(basis_convert(&to_u_poly(s), Basis::ShiftedElementary(-1))?.coeffs);
    }
    // smallest m ≥ 1 with hats[m] = hats[m'] for every later seed
    let last = hats.len() - 1;
    let stable = (1..last.saturating_sub(1))
        .find(|&m| hats[m..].iter().all(|h| *h == hats[m]))
        .ok_or_else(|| Error::Pipeline(format!("shifted-elementary expansion did not stabilise within {} seeds", seeds.len())))?;
    let mut closed: BTreeMap<Partition, NPoly> = BTreeMap::new();
    for (lam, c) in &hats[stable] {
        for (nu, p) in shifted_e_closed(lam) {
            let e = closed.entry(nu).or_default();
            *e = e.add(&p.scale(c));
        }
    }
    closed.retain(|_, c| !c.is_zero());
    let mut halved = BTreeMap::new();
    for (nu, c) in closed {
        let h = nu.halved().ok_or_else(|| Error::Pipeline(format!("closed form has odd monomial {nu}")))?;
        halved.insert(h, c);
    }
    let mut fam = SubleadingFamily { model, k, seed: seeds, stable_from: stable, closed_form: halved };
    // the closed form also covers the seeds below stabilisation when it agrees
    let mut from = fam.stable_from;
    while from > 1 {
        let m = from - 1;
        fam.stable_from = 0;
        let agree = fam.member(m)? == fam.seed[m];
        fam.stable_from = from;
        if !agree {
            break;
        }
        from = m;
    }
    fam.stable_from = from;
    Ok(fam)
}

/// `P_{m+1}(u, ±1) = P_m(u)` at random rational points.
pub fn check_specialisation(bigger: &SymPoly, smaller: &SymPoly) -> Result<()> {
    let m = smaller.n;
    if bigger.n != m + 1 {
        return Err(Error::Domain("specialisation needs consecutive members".into()));
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(99 + m as u64);
    for _ in 0..3 {
        let v: Vec<Q> = (0..m).map(|_| q(rng.gen_range(-20..20), rng.gen_range(1..9))).collect();
        let lhs = smaller.eval(&v)?;
        // squared variables: u = ±1 both give v = 1
        let mut w = v.clone();
        w.push(Q::from(1));
        if bigger.eval(&w)? != lhs {
            return Err(Error::Pipeline(format!("specialisation fails between {} and {} variables", m + 1, m)));
        }
    }
    Ok(())
}

/// Family for ψ-classes (`Airy`) or Θ-classes (`Bessel`) at order `k`.
/// Seeds are added until the shifted-elementary expansion has been seen
/// constant over three consecutive members.
pub fn build_family(model: WaveModel, k: u32) -> Result<SubleadingFamily> {
    if model.r() != 2 {
        return Err(Error::Unsupported("closed forms in n are built for r = 2 only".into()));
    }
    let e = model.hbar_weight() as usize;
    let cap = 2 * e * k as usize + 4;
    let mut seeds = Vec::new();
    let mut hats: Vec<BTreeMap<Partition, Q>> = Vec::new();
    for m in 0..=cap {
        let s = subleading_poly(model, k, m)?;
        hats.push(basis_convert(&to_u_poly(&s), Basis::ShiftedElementary(-1))?.coeffs);
        seeds.push(s);
        let l = hats.len();
        if l >= 4 && hats[l - 1] == hats[l - 2] && hats[l - 2] == hats[l - 3] {
            return extend_family(model, k, seeds);
        }
    }
    Err(Error::Pipeline(format!("no stabilisation up to {cap} variables")))
}

type FamilyMap = BTreeMap<(String, u32), Arc<SubleadingFamily>>;

static FAMILIES: OnceLock<Mutex<FamilyMap>> = OnceLock::new();

/// [`build_family`] memoised per process.
pub fn family(model: WaveModel, k: u32) -> Result<Arc<SubleadingFamily>> {
    let cache = FAMILIES.get_or_init(|| Mutex::new(BTreeMap::new()));
    let key = (model.name(), k);
    if let Some(f) = cache.lock().expect("family cache").get(&key) {
        return Ok(f.clone());
    }
    let f = Arc::new(build_family(model, k)?);
    cache.lock().expect("family cache").insert(key, f.clone());
    Ok(f)
}

/// `Σ_ν C_{k,n,ν} M_{n,μ,ν}` for a family.
pub fn contract(fam: &SubleadingFamily, p: &Multiplicities) -> Result<Q> {
    contract_coeffs(&fam.coefficients_at(p.n)?, p)
}

type MemberCache = Mutex<BTreeMap<(String, u32, usize), Arc<BTreeMap<Partition, Q>>>>;

/// `P_{k,n}` fitted directly for one `n`, memoised; cheaper than a family
/// when only a few `n` are needed.
pub fn member_direct(model: WaveModel, k: u32, n: usize) -> Result<Arc<BTreeMap<Partition, Q>>> {
    static CACHE: OnceLock<MemberCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let key = (model.name(), k, n);
    if let Some(v) = cache.lock().expect("member cache").get(&key) {
        return Ok(Arc::clone(v));
    }
    let v = Arc::new(subleading_poly(model, k, n)?.coeffs);
    cache.lock().expect("member cache").insert(key, Arc::clone(&v));
    Ok(v)
}

/// `α_k` (Airy) or `β_k` (Bessel) at fixed `n` without building the family.
pub fn correction_direct(model: WaveModel, k: u32, p: &Multiplicities) -> Result<Q> {
    contract_coeffs(&*member_direct(model, k, p.n)?, p)
}

fn contract_coeffs(coeffs: &BTreeMap<Partition, Q>, p: &Multiplicities) -> Result<Q> {
    let n = p.n;
    let top = coeffs.keys().map(Partition::largest).max().unwrap_or(0);
    let list: Vec<usize> = (0..top).map(|i| p.get(i)).collect();
    let mut acc = Q::new();
    for (nu, c) in coeffs {
        acc += Q::from(c * &m_times_h_from_multiplicities(n, &list, nu)?);
    }
    Ok(acc)
}

/// `α_k(n, p)` for ψ-class intersection numbers.
pub fn alpha_k(k: u32, p: &Multiplicities) -> Result<Q> {
    contract(&*family(WaveModel::airy(), k)?, p)
}

/// `β_k(n, p)` for Θ-class intersection numbers.
pub fn beta_k(k: u32, p: &Multiplicities) -> Result<Q> {
    contract(&*family(WaveModel::bessel(), k)?, p)
}

/// `R̄^{(α,d)}` from `R^{(α)}`: `R̄^{(d)} = i^{−k} ζ_{2r}^{−α(d−k)} R^{(d)}`.
fn rbar(r: u32, alpha: u32, k: u32, poly: &BTreeMap<Partition, Cyclotomic>) -> BTreeMap<Partition, Cyclotomic> {
    poly.iter()
        .map(|(lam, c)| {
            let d = i64::from(lam.weight());
            let ph = Cyclotomic::zeta(4, -i64::from(k)).mul(&Cyclotomic::zeta(2 * r, -i64::from(alpha) * (d - i64::from(k))));
            (lam.clone(), c.mul(&ph))
        })
        .collect()
}

type ConstCache = Mutex<BTreeMap<(u32, u32), Arc<Vec<Cyclotomic>>>>;

/// `R^{(α)}_{k,0}` for `k = 0..=k_max` from a single minor expansion,
/// memoised per `(r, α)`.
pub fn rspin_one_point_constants(r: u32, alpha: u32, k_max: u32) -> Result<Arc<Vec<Cyclotomic>>> {
    static CACHE: OnceLock<ConstCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(v) = cache.lock().expect("cache lock").get(&(r, alpha)) {
        if v.len() > k_max as usize {
            return Ok(Arc::clone(v));
        }
    }
    let model = WaveModel::rairy(r)?;
    if alpha == 0 || alpha >= r {
        return Err(Error::Domain(format!("α = {alpha} outside 1..{r}")));
    }
    let zeta: Cyclotomic = zeta_pow(r, i64::from(alpha))?;
    let scale = Cyclotomic::one().sub(&zeta).mul_q(&Q::from(-i64::from(r)));
    let w = minor_at_point::<Cyclotomic>(model, alpha, 1, 0, &[Cyclotomic::one()], k_max as usize)?;
    let v = Arc::new(w.iter().map(|x| x.mul(&scale)).collect::<Vec<_>>());
    let mut guard = cache.lock().expect("cache lock");
    let keep = guard.get(&(r, alpha)).is_some_and(|old| old.len() >= v.len());
    if !keep {
        guard.insert((r, alpha), Arc::clone(&v));
    }
    Ok(v)
}

/// `γ_k^{(r,α)}` for the labels `(d, a)`, combining the conjugate sectors
/// `α` and `r − α`. For one-point numbers only `R_{k,0}` is needed.
pub fn gamma_k(r: u32, alpha: u32, k: u32, d: &[u32], a: &[u32]) -> Result<Cyclotomic> {
    let model = WaveModel::rairy(r)?;
    genus_of(model, d, a)?;
    let n = d.len();
    let poly = if n == 1 {
        let c = rspin_one_point_constants(r, alpha, k)?[k as usize].clone();
        [(Partition::empty(), c)].into_iter().collect()
    } else {
        rspin_subleading_poly(r, alpha, k, n)?
    };
    gamma_from_poly(r, alpha, k, &poly, d, a)
}

/// `γ_k` contracted from a given `R^{(α)}_{k,n}` (for `n = 1` a constant suffices).
pub fn gamma_from_poly(r: u32, alpha: u32, k: u32, poly: &BTreeMap<Partition, Cyclotomic>, d: &[u32], a: &[u32]) -> Result<Cyclotomic> {
    let n = d.len();
    let mu = Partition::new(d.iter().zip(a).map(|(&x, &y)| r * x + y).collect());
    let bar = rbar(r, alpha, k, poly);
    let mut acc = Cyclotomic::zero();
    if n == 1 && bar.len() == 1 && bar.contains_key(&Partition::empty()) {
        // R_{k,1}(1) = R_{k,1}(ζ^{−α}) = R_{k,0}
        let c = &bar[&Partition::empty()];
        acc = c.mul(&Cyclotomic::sin_pi(i64::from(alpha) * i64::from(mu.weight()), r));
    } else {
        for (nu, c) in &bar {
            if nu.length() > n || nu.weight() > mu.weight() {
                continue;
            }
            acc = acc.add(&c.mul(&weighted_m_times_h(n, &mu, nu, r, alpha)?));
        }
    }
    let sd: u32 = d.iter().sum();
    let sign_exp = i64::from(sd) + n as i64 + i64::from(alpha) * n as i64;
    let pref = Cyclotomic::sin_pi(i64::from(alpha), r).inv().ok_or_else(|| Error::Domain("sin(απ/r) = 0".into()))?;
    let mut out = acc.mul(&pref).mul_q(&crate::exact::q_pow(&Q::from(i64::from(r)), 1 - n as i32));
    if sign_exp % 2 == 1 {
        out = out.neg();
    }
    Ok(out)
}

/// `γ_0^{(r,α)} = (−1)^{(α−1)(|d|+n)} Π sin(α a_i π/r) / sin(απ/r)`.
pub fn gamma_zero_closed(r: u32, alpha: u32, d: &[u32], a: &[u32]) -> Cyclotomic {
    let mut acc = Cyclotomic::one();
    for &ai in a {
        acc = acc.mul(&Cyclotomic::sin_pi(i64::from(alpha) * i64::from(ai), r));
    }
    let pref = Cyclotomic::sin_pi(i64::from(alpha), r).inv().expect("sin(απ/r) ≠ 0");
    acc = acc.mul(&pref);
    let e = (i64::from(alpha) - 1) * (i64::from(d.iter().sum::<u32>()) + d.len() as i64);
    if e % 2 != 0 {
        acc = acc.neg();
    }
    acc
}

/// `|A_{r,α}| = (2r/(r+1)) sin(απ/r)` as a float.
pub fn rspin_action_abs(r: u32, alpha: u32, prec: u32) -> Float {
    let pi = crate::exact::pi(prec);
    let s = (Float::with_val(prec, &pi * alpha) / r).sin();
    Float::with_val(prec, s * (2 * r)) / (r + 1)
}

/// One exponential sector of an estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorContribution {
    pub alpha: u32,
    pub action_abs: f64,
    /// Natural log of the absolute value of the contribution.
    pub ln_abs: f64,
    pub sign: i8,
}

/// Truncated asymptotic estimate of a normalised intersection number.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub model: String,
    pub g: u32,
    pub d: Vec<u32>,
    pub a: Vec<u32>,
    pub k_max: u32,
    /// Natural log of `|value|`; the value is `⟨τ⟩ Π (2d+1)!!` (r = 2) or
    /// `⟨τ⟩ Π (rd+a)!_{(r)}` (r ≥ 3).
    pub ln_abs: f64,
    pub sign: i8,
    pub sectors: Vec<SectorContribution>,
    #[serde(skip)]
    pub value: Option<Float>,
    #[serde(skip)]
    pub sector_values: Vec<Float>,
}

impl Estimate {
    /// Value at working precision.
    pub fn value(&self) -> &Float {
        self.value.as_ref().expect("estimate carries its value")
    }
}

pub(crate) fn ln_gamma(x: i64, prec: u32) -> Float {
    Float::with_val(prec, Float::with_val(prec, x).ln_gamma_ref())
}

pub(crate) fn falling_f(x: i64, k: u32, prec: u32) -> Float {
    let mut acc = Float::with_val(prec, 1);
    for j in 0..i64::from(k) {
        acc *= x - j;
    }
    acc
}

fn split_float(v: &Float) -> (f64, i8) {
    let sign = if v.is_sign_negative() { -1 } else { 1 };
    let ln = if v.is_zero() { f64::NEG_INFINITY } else { Float::with_val(v.prec(), v.abs_ref()).ln().to_f64() };
    (ln, if v.is_zero() { 0 } else { sign })
}

/// Coefficients `c_0..c_K` multiplying `A^k/(m−1)^{\underline k}`.
pub fn correction_coefficients(model: WaveModel, k_max: u32, d: &[u32], a: &[u32], alpha: u32) -> Result<Vec<Cyclotomic>> {
    match model.kind {
        ModelKind::Airy | ModelKind::Bessel => {
            let p = Multiplicities::from_tuple(d);
            (0..=k_max).map(|k| Ok(Cyclotomic::from_q(&correction_direct(model, k, &p)?))).collect()
        }
        ModelKind::RAiry(r) => (0..=k_max).map(|k| gamma_k(r, alpha, k, d, a)).collect(),
    }
}

/// Sectors `(α, |A|, weight)` of the large-genus formula.
pub fn sectors_of(model: WaveModel, prec: u32) -> Vec<(u32, Float, Float)> {
    match model.kind {
        ModelKind::Airy => vec![(1, Float::with_val(prec, 2) / 3u32, Float::with_val(prec, 1))],
        ModelKind::Bessel => vec![(1, Float::with_val(prec, 2), Float::with_val(prec, 1))],
        ModelKind::RAiry(r) => (1..=r / 2)
            .map(|al| {
                let w = if 2 * al == r { Float::with_val(prec, 0.5) } else { Float::with_val(prec, 1) };
                (al, rspin_action_abs(r, al, prec), w)
            })
            .collect(),
    }
}

/// Prefactor in front of the sector sums: `2^n S/(4π) Γ(m)` for ψ/Θ
/// (with `S = 1`, `2`), `2^n/(2π) Γ(m)/r^{g−1−|d|}` for r-spin.
pub fn prefactor(model: WaveModel, g: u32, d: &[u32], prec: u32) -> Float {
    let n = d.len() as i64;
    let m = 2 * i64::from(g) - 2 + n;
    let two = Float::with_val(prec, 2);
    let pi = crate::exact::pi(prec);
    let base = Float::with_val(prec, two.ln()) * n + ln_gamma(m, prec);
    match model.kind {
        ModelKind::Airy => (base - Float::with_val(prec, &pi * 4u32).ln()).exp(),
        ModelKind::Bessel => (base - Float::with_val(prec, &pi * 4u32).ln()).exp() * 2u32,
        ModelKind::RAiry(r) => {
            let sd: i64 = d.iter().map(|&x| i64::from(x)).sum();
            (base - Float::with_val(prec, &pi * 2u32).ln() - Float::with_val(prec, Float::with_val(prec, r).ln()) * (i64::from(g) - 1 - sd))
                .exp()
        }
    }
}

/// Evaluates the truncated large-genus formula from precomputed
/// coefficients, keyed by sector.
pub fn estimate_from_coefficients(
    model: WaveModel,
    d: &[u32],
    a: &[u32],
    coeffs: &BTreeMap<u32, Vec<Cyclotomic>>,
    prec: u32,
) -> Result<Estimate> {
    let g = genus_of(model, d, a)?;
    let n = d.len() as i64;
    let m = 2 * i64::from(g) - 2 + n;
    let k_max = coeffs.values().map(|v| v.len() as u32).min().unwrap_or(1).saturating_sub(1);
    if m - 1 < i64::from(k_max) {
        return Err(Error::Domain(format!("genus {g} too small for K = {k_max}")));
    }
    let front = prefactor(model, g, d, prec);
    let mut total = Float::with_val(prec, 0);
    let mut out = Vec::new();
    let mut vals = Vec::new();
    for (al, a_abs, weight) in sectors_of(model, prec) {
        let cs = coeffs.get(&al).ok_or_else(|| Error::Domain(format!("no coefficients for sector {al}")))?;
        let mut inner = Float::with_val(prec, 0);
        for (k, c) in cs.iter().enumerate().take(k_max as usize + 1) {
            let cv = c.embed(prec);
            inner += Float::with_val(prec, a_abs.clone().pow(k as u32)) * cv.re / falling_f(m - 1, k as u32, prec);
        }
        let lnp = Float::with_val(prec, a_abs.clone().ln()) * m;
        let v = Float::with_val(prec, &front * (-lnp).exp()) * inner * weight;
        total += &v;
        let (ln_abs, sign) = split_float(&v);
        out.push(SectorContribution { alpha: al, action_abs: a_abs.to_f64(), ln_abs, sign });
        vals.push(v);
    }
    let (ln_abs, sign) = split_float(&total);
    Ok(Estimate {
        model: model.name(),
        g,
        d: d.to_vec(),
        a: a.to_vec(),
        k_max,
        ln_abs,
        sign,
        sectors: out,
        value: Some(total),
        sector_values: vals,
    })
}

/// Truncated asymptotic estimate with corrections up to `K`.
pub fn asymptotic_estimate(model: WaveModel, d: &[u32], a: Option<&[u32]>, k_max: u32) -> Result<Estimate> {
    let av: Vec<u32> = match a {
        Some(a) => a.to_vec(),
        None if model.r() == 2 => vec![1; d.len()],
        None => return Err(Error::Domain("r-spin estimates need the a-labels".into())),
    };
    let mut coeffs = BTreeMap::new();
    for (al, _, _) in sectors_of(model, 64) {
        coeffs.insert(al, correction_coefficients(model, k_max, d, &av, al)?);
    }
    estimate_from_coefficients(model, d, &av, &coeffs, 256)
}

/// `exact / estimate` at working precision.
pub fn ratio_to_estimate(exact: &Q, est: &Estimate) -> f64 {
    let v = est.value();
    let e = Float::with_val(v.prec(), exact);
    (e / v).to_f64()
}

/// The normalised exact value matching [`Estimate::value`].
pub fn normalised_exact(model: WaveModel, d: &[u32], a: Option<&[u32]>) -> Result<Q> {
    let r = model.r();
    let av: Vec<u32> = match a {
        Some(a) => a.to_vec(),
        None => vec![1; d.len()],
    };
    let x = crate::correlators::intersection_number(model, d, Some(&av))?;
    let mut f = Q::from(1);
    for (&di, &ai) in d.iter().zip(&av) {
        f *= Q::from(r_factorial(i64::from(r * di + ai), i64::from(r))?);
    }
    Ok(x * f)
}
