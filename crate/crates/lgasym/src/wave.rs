//! WKB wave-function coefficient tables for the Airy, Bessel and r-Airy
//! models, with their actions and Stokes constants.
//!
//! Every model is described in the variable `z = x^{1/r}`. The wave
//! functions are `z^m A_m(t)` with `t = c ħ z^{-e}` and
//! `A_m(t) = Σ_k a_k^{(m)} t^k`, `m = 0, …, r−1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{factorial, lcm_u, q, Cyclotomic, Scalar, Q};
use crate::series::HbarSeries;

/// Which quantum curve the wave functions solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Airy,
    Bessel,
    RAiry(u32),
}

/// A wave model together with its scaling data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaveModel {
    pub kind: ModelKind,
}

/// One exponential sector: action `A(x) = action · z^{e}` and Stokes data.
#[derive(Clone, Debug)]
pub struct Sector {
    pub alpha: u32,
    /// `+1` for the sector `e^{-A/ħ}`, `−1` for its parity image.
    pub sign: i32,
    pub action: Cyclotomic,
    pub stokes: Cyclotomic,
    /// Normalisation constant of the sector wave functions.
    pub kappa: Cyclotomic,
}

impl WaveModel {
    pub fn airy() -> Self {
        WaveModel { kind: ModelKind::Airy }
    }

    pub fn bessel() -> Self {
        WaveModel { kind: ModelKind::Bessel }
    }

    pub fn rairy(r: u32) -> Result<Self> {
        if r < 2 {
            return Err(Error::Domain(format!("r-Airy needs r ≥ 2, got {r}")));
        }
        Ok(WaveModel { kind: ModelKind::RAiry(r) })
    }

    /// Parses `airy`, `bessel` or `rairy` (with `r`).
    pub fn parse(name: &str, r: Option<u32>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "airy" | "psi" | "wk" => Ok(WaveModel::airy()),
            "bessel" | "theta" | "bgw" => Ok(WaveModel::bessel()),
            "rairy" | "rspin" | "r-airy" => WaveModel::rairy(r.ok_or_else(|| Error::Config("rairy needs --r".into()))?),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ModelKind::Airy => "airy".into(),
            ModelKind::Bessel => "bessel".into(),
            ModelKind::RAiry(r) => format!("rairy{r}"),
        }
    }

    /// Rank `r` of the wave matrix (2 for Airy and Bessel).
    pub fn r(&self) -> u32 {
        match self.kind {
            ModelKind::Airy | ModelKind::Bessel => 2,
            ModelKind::RAiry(r) => r,
        }
    }

    /// Each `ħ` carries `z^{-e}`; also the z-degree of the actions.
    pub fn hbar_weight(&self) -> i32 {
        match self.kind {
            ModelKind::Airy => 3,
            ModelKind::Bessel => 1,
            ModelKind::RAiry(r) => r as i32 + 1,
        }
    }

    /// Scale `c` in `t = c ħ z^{-e}`.
    pub fn hbar_scale(&self) -> Q {
        match self.kind {
            ModelKind::Airy => q(3, 2),
            ModelKind::Bessel => q(1, 2),
            ModelKind::RAiry(r) => q(i64::from(r) + 1, i64::from(r)),
        }
    }

    /// Power of `x` in the action.
    pub fn action_exponent(&self) -> Q {
        match self.kind {
            ModelKind::Airy => q(3, 2),
            ModelKind::Bessel => q(1, 2),
            ModelKind::RAiry(r) => q(i64::from(r) + 1, i64::from(r)),
        }
    }

    /// `W_{0,1} = z^{s}`: `s = 1` except for Bessel.
    pub fn w1_z_power(&self) -> i32 {
        match self.kind {
            ModelKind::Bessel => -1,
            _ => 1,
        }
    }

    /// Cyclotomic order holding all phases: `lcm(2r, 4)`.
    pub fn phase_order(&self) -> u32 {
        lcm_u(2 * self.r(), 4)
    }

    /// True when all coefficients of a sector are rational.
    pub fn is_rational(&self) -> bool {
        self.r() == 2
    }

    /// Exponential sectors. Airy and Bessel have the pair `±A`; r-Airy has
    /// `α = 1, …, r−1` with `A_{r,α} = (r/(r+1))(1 − ζ^α)`.
    pub fn sectors(&self) -> Vec<Sector> {
        match self.kind {
            ModelKind::Airy | ModelKind::Bessel => {
                let (a, s) = if self.kind == ModelKind::Airy { (q(4, 3), Q::from(1)) } else { (Q::from(4), Q::from(2)) };
                [1, -1]
                    .into_iter()
                    .map(|sign| Sector {
                        alpha: 1,
                        sign,
                        action: Cyclotomic::from_q(&Q::from(&a * sign)),
                        stokes: Cyclotomic::from_q(&s),
                        kappa: Cyclotomic::one(),
                    })
                    .collect()
            }
            ModelKind::RAiry(r) => (1..r)
                .map(|alpha| Sector {
                    alpha,
                    sign: 1,
                    action: rairy_action(r, alpha),
                    stokes: rairy_stokes(r, alpha),
                    kappa: rairy_kappa(r, alpha),
                })
                .collect(),
        }
    }
}

/// `A_{r,α} = (r/(r+1))(1 − ζ^α)`, coefficient of `x^{(r+1)/r}`.
pub fn rairy_action(r: u32, alpha: u32) -> Cyclotomic {
    Cyclotomic::one().sub(&Cyclotomic::zeta(r, i64::from(alpha))).mul_q(&q(i64::from(r), i64::from(r) + 1))
}

/// `S_{r,α} = (−1)^{(α−r+1)/2}` on the principal branch `(−1)^y = e^{iπy}`.
pub fn rairy_stokes(r: u32, alpha: u32) -> Cyclotomic {
    Cyclotomic::zeta(4, i64::from(alpha) - i64::from(r) + 1)
}

/// Sector normalisation `(−1)^{(r−α+2)/2} ζ^{α/2}` on the principal branch.
pub fn rairy_kappa(r: u32, alpha: u32) -> Cyclotomic {
    Cyclotomic::zeta(4, i64::from(r) - i64::from(alpha) + 2).mul(&Cyclotomic::zeta(2 * r, i64::from(alpha)))
}

/// Coefficient table `a_k^{(m)}` for `k ≤ order`, `m = 0, …, r−1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaveCoefficients {
    pub model: WaveModel,
    pub order: usize,
    /// `table[m][k] = a_k^{(m)}`, rendered as `num/den` strings in JSON.
    #[serde(with = "table_ser")]
    pub table: Vec<Vec<Q>>,
}

mod table_ser {
    use super::*;
    use crate::exact::{q_from_str, q_to_string};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &[Vec<Q>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<Vec<String>> = t.iter().map(|row| row.iter().map(q_to_string).collect()).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<Q>>, D::Error> {
        let v = Vec::<Vec<String>>::deserialize(d)?;
        v.iter().map(|row| row.iter().map(|s| q_from_str(s).map_err(serde::de::Error::custom)).collect()).collect()
    }
}

impl WaveCoefficients {
    /// `a_k^{(m)}`.
    pub fn a(&self, m: usize, k: usize) -> &Q {
        &self.table[m][k]
    }

    /// Restricts to a lower order.
    pub fn truncated(&self, order: usize) -> WaveCoefficients {
        WaveCoefficients { model: self.model, order, table: self.table.iter().map(|row| row[..=order].to_vec()).collect() }
    }

    /// `A_m(θ t)` as an ħ-series with `t = c ħ` (the z-dependence is implicit),
    /// where `θ = ±ζ_N^j` is supplied as a scalar.
    pub fn series<S: Scalar>(&self, m: usize, theta: &S, order: usize) -> HbarSeries<S> {
        let c = S::from_q(&self.model.hbar_scale());
        let step = theta.mul(&c);
        let mut pw = S::one();
        let mut out = Vec::with_capacity(order + 1);
        for k in 0..=order {
            out.push(pw.mul_q(self.a(m, k)));
            pw = pw.mul(&step);
        }
        HbarSeries::new(0, order as i32, S::zero(), out)
    }
}

/// `c_k = (6k)!/(864^k (2k)! (3k)!)` and `c_k (1+6k)/(1−6k)`.
pub fn airy_coeffs(order: usize) -> WaveCoefficients {
    let mut c0 = Vec::with_capacity(order + 1);
    let mut c1 = Vec::with_capacity(order + 1);
    let mut c = Q::from(1);
    for k in 0..=order {
        if k > 0 {
            // c_k / c_{k-1} = (6k)(6k−1)⋯(6k−5) / (864 (2k)(2k−1)(3k)(3k−1)(3k−2))
            let kk = k as i64;
            let mut num = rug::Integer::from(1);
            for j in 0..6 {
                num *= 6 * kk - j;
            }
            let den = rug::Integer::from(864) * (2 * kk) * (2 * kk - 1) * (3 * kk) * (3 * kk - 1) * (3 * kk - 2);
            c *= Q::from((num, den));
        }
        let kk = k as i64;
        c1.push(Q::from(&c * q(1 + 6 * kk, 1 - 6 * kk)));
        c0.push(c.clone());
    }
    WaveCoefficients { model: WaveModel::airy(), order, table: vec![c0, c1] }
}

/// `b_k = ((1/2)^{\overline k})²/(2^k k!)` and `b_k − b_{k−1}(2k−1)/2`.
pub fn bessel_coeffs(order: usize) -> WaveCoefficients {
    let mut b = Vec::with_capacity(order + 1);
    let mut rising = Q::from(1);
    for k in 0..=order {
        if k > 0 {
            rising *= q(2 * k as i64 - 1, 2);
        }
        let den = Q::from(rug::Integer::from(1) << k as u32) * Q::from(factorial(k as u32));
        b.push(Q::from(&rising * &rising) / den);
    }
    let b1 =
        (0..=order).map(|k| if k == 0 { b[0].clone() } else { Q::from(&b[k] - Q::from(&b[k - 1] * q(2 * k as i64 - 1, 2))) }).collect();
    WaveCoefficients { model: WaveModel::bessel(), order, table: vec![b, b1] }
}

/// r-Airy table from `a_k^{(m)} = a_k^{(m−1)} − (k − 1/2 − m/(r+1)) a_{k−1}^{(m−1)}`,
/// with `a_k^{(0)}` fixed by the closure at the next level.
pub fn rairy_coeffs(r: u32, order: usize) -> Result<WaveCoefficients> {
    let model = WaveModel::rairy(r)?;
    let ru = r as usize;
    let rp1 = i64::from(r) + 1;
    let mut table = vec![vec![Q::from(1)]; ru];
    for k in 1..=order as i64 {
        // S_m = Σ_{j=1}^m (k − 1/2 − j/(r+1)) a_{k−1}^{(j−1)}, so a_k^{(m)} = a_k^{(0)} − S_m.
        let mut s = vec![Q::new(); ru + 1];
        for m in 1..=ru {
            let coef = q(2 * k * rp1 - rp1 - 2 * m as i64, 2 * rp1);
            s[m] = Q::from(&s[m - 1] + coef * &table[m - 1][(k - 1) as usize]);
        }
        // Σ_{m=1}^r (k + 1/2 − m/(r+1)) a_k^{(m−1)} = 0 with Σ of the weights = r k.
        let mut num = Q::new();
        for m in 1..=ru {
            let w = q(2 * k * rp1 + rp1 - 2 * m as i64, 2 * rp1);
            num += w * &s[m - 1];
        }
        let a0 = num / Q::from(i64::from(r) * k);
        for m in 0..ru {
            table[m].push(Q::from(&a0 - &s[m]));
        }
        if !s[ru].is_zero() {
            return Err(Error::Pipeline(format!("r-Airy closure fails at level {k}")));
        }
    }
    Ok(WaveCoefficients { model, order, table })
}

/// Coefficient table of any model, memoised per model at the largest order requested.
pub fn coefficients(model: WaveModel, order: usize) -> Result<Arc<WaveCoefficients>> {
    static CACHE: OnceLock<Mutex<HashMap<WaveModel, Arc<WaveCoefficients>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("wave cache poisoned").get(&model) {
        if t.order >= order {
            return Ok(t.clone());
        }
    }
    let t = Arc::new(match model.kind {
        ModelKind::Airy => airy_coeffs(order),
        ModelKind::Bessel => bessel_coeffs(order),
        ModelKind::RAiry(r) => rairy_coeffs(r, order)?,
    });
    cache.lock().expect("wave cache poisoned").insert(model, t.clone());
    Ok(t)
}

fn determinant<S: Scalar>(m: &[Vec<HbarSeries<S>>]) -> Result<HbarSeries<S>> {
    let n = m.len();
    if n == 1 {
        return Ok(m[0][0].clone());
    }
    // Laplace expansion along the first row.
    let mut acc: Option<HbarSeries<S>> = None;
    for col in 0..n {
        let minor: Vec<Vec<HbarSeries<S>>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, x)| x.clone()).collect()).collect();
        let mut term = m[0][col].mul(&determinant(&minor)?)?;
        if col % 2 == 1 {
            term = term.neg();
        }
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term)?,
        });
    }
    Ok(acc.expect("nonempty matrix"))
}

/// Normalised wave-matrix determinant `det(ζ^{αm} A_m(ζ^{−α} t)) / det(ζ^{αm})`
/// as an exact series.
pub fn wave_determinant(model: WaveModel, order: usize) -> Result<HbarSeries<Cyclotomic>> {
    let r = model.r();
    let coeffs = coefficients(model, order)?;
    let mut rows = Vec::new();
    let mut consts = Vec::new();
    for alpha in 0..r {
        let mut row = Vec::new();
        let mut crow = Vec::new();
        for m in 0..r {
            let phase = Cyclotomic::zeta(r, i64::from(alpha * m));
            let theta = Cyclotomic::zeta(r, -i64::from(alpha));
            let s = coeffs.series(m as usize, &theta, order);
            let s = HbarSeries::new(0, order as i32, Cyclotomic::zero(), s.coeffs().iter().map(|c| c.mul(&phase)).collect());
            row.push(s);
            crow.push(HbarSeries::new(0, order as i32, Cyclotomic::zero(), vec![phase]));
        }
        rows.push(row);
        consts.push(crow);
    }
    let det = determinant(&rows)?;
    let c = determinant(&consts)?.coeff(0).clone();
    let inv = c.inv().ok_or_else(|| Error::Pipeline("singular Vandermonde determinant".into()))?;
    Ok(HbarSeries::new(0, order as i32, Cyclotomic::zero(), det.coeffs().iter().map(|x| x.mul(&inv)).collect()))
}

/// True iff the normalised wave-matrix determinant is `1 + O(ħ^{order+1})`.
pub fn wronskian_check(model: WaveModel, order: usize) -> Result<bool> {
    let det = wave_determinant(model, order)?;
    Ok(det.coeff(0) == &Cyclotomic::one() && (1..=order as i32).all(|k| det.coeff(k).is_zero()))
}

/// `det(ζ^{αm})` for `α, m = 0, …, r−1`.
pub fn schur_determinant(r: u32) -> Result<Cyclotomic> {
    let rows: Vec<Vec<HbarSeries<Cyclotomic>>> = (0..r)
        .map(|a| (0..r).map(|m| HbarSeries::new(0, 0, Cyclotomic::zero(), vec![Cyclotomic::zeta(r, i64::from(a * m))])).collect())
        .collect();
    Ok(determinant(&rows)?.coeff(0).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airy_examples() {
        let a = airy_coeffs(3);
        assert_eq!(a.a(0, 0), &Q::from(1));
        assert_eq!(a.a(0, 1), &q(5, 72));
        assert_eq!(a.a(1, 1), &q(-7, 72));
        assert_eq!(a.a(0, 2), &q(385, 10368));
    }

    #[test]
    fn bessel_examples() {
        let b = bessel_coeffs(3);
        assert_eq!(b.a(0, 0), &Q::from(1));
        assert_eq!(b.a(0, 1), &q(1, 8));
        assert_eq!(b.a(0, 2), &q(9, 128));
        assert_eq!(b.a(1, 1), &q(-3, 8));
    }

    #[test]
    fn rairy_examples() {
        let t = rairy_coeffs(2, 12).unwrap();
        assert!(t.table.iter().all(|row| row[0] == 1));
        assert_eq!(t.a(0, 1), &q(5, 72));
        let a = airy_coeffs(12);
        assert_eq!(t.table, a.table);
        let t3 = rairy_coeffs(3, 10).unwrap();
        assert!(t3.table.iter().all(|row| row[0] == 1));
    }

    #[test]
    fn wronskians() {
        assert!(wronskian_check(WaveModel::airy(), 10).unwrap());
        assert!(wronskian_check(WaveModel::bessel(), 10).unwrap());
        assert!(wronskian_check(WaveModel::rairy(3).unwrap(), 8).unwrap());
    }

    #[test]
    fn schur_normalisation() {
        for r in 2..=6u32 {
            let d = schur_determinant(r).unwrap().embed(128).to_f64();
            let rr = f64::from(r);
            let mag = rr.powf(rr / 2.0);
            let sign_exp = (rr - 1.0) * (3.0 * rr + 2.0) / 4.0;
            // even r carries an extra sign relative to the odd-r phase rule
            let extra = if r % 2 == 0 { 1.0 } else { 0.0 };
            let phase = std::f64::consts::PI * (sign_exp + extra);
            assert!((d.0 - mag * phase.cos()).abs() < 1e-9 * mag, "r = {r}: {d:?}");
            assert!((d.1 - mag * phase.sin()).abs() < 1e-9 * mag, "r = {r}: {d:?}");
        }
    }

    #[test]
    fn sector_data() {
        let m = WaveModel::rairy(4).unwrap();
        let secs = m.sectors();
        let abs: Vec<f64> = secs.iter().map(|s| s.action.embed(64).abs().to_f64()).collect();
        assert!((abs[0] - abs[2]).abs() < 1e-12);
        assert!(abs[0] < abs[1]);
        let airy = WaveModel::airy().sectors();
        assert_eq!(airy[0].action, Cyclotomic::from_q(&q(4, 3)));
        assert_eq!(airy[1].action, Cyclotomic::from_q(&q(-4, 3)));
        // r = 2 sector constant collapses to 1
        assert_eq!(rairy_kappa(2, 1), Cyclotomic::one());
        assert_eq!(rairy_stokes(2, 1), Cyclotomic::one());
    }

    #[test]
    fn parity_of_series() {
        let a = airy_coeffs(6);
        let plus = a.series(0, &Q::from(1), 6);
        let minus = a.series(0, &Q::from(-1), 6);
        assert_eq!(plus.parity().coeffs(), minus.coeffs());
    }
}
