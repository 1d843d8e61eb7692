//! Acceptance checks. Prints one PASS/FAIL line per criterion with the
//! measured quantities; the process always exits 0 so that a failing
//! criterion is reported rather than aborting the workspace test run.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use lgasym::asymptotics::{alpha_k, beta_k, check_specialisation, degree_bounds, family};
use lgasym::correlators::{
    correlator, correlator_hbar_coeff, correlator_series_mode, extract_intersection, intersection_number, kernel_sum_max_error, minor,
    ode_check_w1, one_point_coefficient,
};
use lgasym::exact::{q, Multiplicities, Q};
use lgasym::harness::{
    fit_rate_to_targets, last_relative_error, run_experiment_with, selfcheck, CsvTable, ExactStore, ExperimentKind, ExperimentSpec, Pattern,
};
use lgasym::symfun::{m_times_h_brute, m_times_h_coeff, weighted_m_times_h, weighted_m_times_h_brute, NPoly, Partition};
use lgasym::wave::{airy_coeffs, rairy_coeffs, wronskian_check, WaveModel};
use lgasym::Result;

const GOLDEN_TIME: Duration = Duration::from_secs(5);
const TOP_DESCENDANT_TIME: Duration = Duration::from_secs(30);
const TOP_DESCENDANT_G_MAX: u32 = 8;
const STRING_DILATON_G_MAX: u32 = 4;
const SLOPE_TOL: f64 = 0.5;
const H_REL_TOL: f64 = 0.03;
const H_G_MAX: u32 = 80;
const H_MONOTONE_WINDOW: usize = 20;
const RSPIN_REL_TOL: f64 = 0.05;
const J_ORDER: u32 = 80;
const WRONSKIAN_ORDER: usize = 12;
const W1_ODE_ORDER: usize = 10;
const KERNEL_SUM_TOL: f64 = 1e-10;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, outcome: Result<(bool, String)>) {
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} [{id}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

/// Reference table: `(k, [(λ, coefficients of the polynomial in n)])`.
type Table = Vec<(u32, Vec<(Vec<u32>, Vec<Q>)>)>;

fn npoly(c: &[Q]) -> NPoly {
    NPoly::from_coeffs(c.to_vec())
}

fn part(p: &[u32]) -> Partition {
    Partition::new(p.to_vec())
}

fn ff(x: &Q, k: u32) -> Q {
    (0..k).fold(Q::from(1), |acc, i| acc * Q::from(x - Q::from(i)))
}

fn golden_values() -> Result<(bool, String)> {
    let t0 = Instant::now();
    let a = WaveModel::airy();
    let checks = [
        (intersection_number(a, &[1], None)?, q(1, 24)),
        (intersection_number(a, &[4], None)?, q(1, 1152)),
        (intersection_number(a, &[7], None)?, q(1, 82944)),
        (one_point_coefficient(a, 1)?, q(-1, 32)),
        (one_point_coefficient(a, 2)?, q(-105, 2048)),
        (one_point_coefficient(a, 3)?, q(-25025, 65536)),
    ];
    let dt = t0.elapsed();
    let bad = checks.iter().filter(|(got, want)| got != want).count();
    Ok((
        bad == 0 && dt < GOLDEN_TIME,
        format!("{} of 6 values exact, {:.2} s (limit {} s)", 6 - bad, dt.as_secs_f64(), GOLDEN_TIME.as_secs()),
    ))
}

fn top_descendant() -> Result<(bool, String)> {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let mut fact = Q::from(1);
    for g in 1..=TOP_DESCENDANT_G_MAX {
        fact *= Q::from(24 * g);
        let want = Q::from(1) / fact.clone();
        if intersection_number(WaveModel::airy(), &[3 * g - 2], None)? != want {
            bad.push(g);
        }
    }
    let dt = t0.elapsed();
    Ok((
        bad.is_empty() && dt < TOP_DESCENDANT_TIME,
        format!("g = 1..{TOP_DESCENDANT_G_MAX}, mismatches {bad:?}, {:.2} s (limit {} s)", dt.as_secs_f64(), TOP_DESCENDANT_TIME.as_secs()),
    ))
}

/// ⟨τ₀ τ_d⟩ = Σ_j ⟨τ_{d − e_j}⟩ and ⟨τ₁ τ_d⟩ = (2g − 2 + n)⟨τ_d⟩ with `n = |d|`.
fn string_dilaton() -> Result<(bool, String)> {
    let m = WaveModel::airy();
    let (mut string_cases, mut dilaton_cases, mut bad) = (0, 0, 0);
    for g in 0..=STRING_DILATON_G_MAX {
        for n in 2..=3usize {
            if 2 * g as usize + n < 3 {
                continue;
            }
            let big = correlator(m, g, n)?;
            let small = if 2 * g as usize + n > 3 { Some(correlator(m, g, n - 1)?) } else { None };
            for (d, _, v) in big.intersections()? {
                let tail = &d[1..];
                if d[0] == 0 {
                    string_cases += 1;
                    let want = match &small {
                        Some(s) => {
                            let mut acc = Q::new();
                            for j in 0..tail.len() {
                                if tail[j] > 0 {
                                    let mut dd = tail.to_vec();
                                    dd[j] -= 1;
                                    acc += extract_intersection(s, &dd, None)?;
                                }
                            }
                            acc
                        }
                        None => Q::from(1),
                    };
                    bad += usize::from(v != want);
                } else if d[0] == 1 {
                    if let Some(s) = &small {
                        dilaton_cases += 1;
                        let want = extract_intersection(s, tail, None)? * Q::from(2 * i64::from(g) - 3 + n as i64);
                        bad += usize::from(v != want);
                    }
                }
            }
        }
    }
    Ok((
        bad == 0,
        format!("g ≤ {STRING_DILATON_G_MAX}, n = 2, 3: {string_cases} string and {dilaton_cases} dilaton instances, {bad} violations"),
    ))
}

/// Reference polynomial tables and their contracted coefficients.
fn subleading_tables() -> Result<(bool, String)> {
    let mut mismatches: Vec<String> = Vec::new();
    let p_tables: Table = vec![
        (1, vec![(vec![], vec![q(-17, 12), q(15, 12), q(-3, 12)]), (vec![1], vec![q(-3, 2), q(1, 2)]), (vec![1, 1], vec![q(-1, 2)])]),
        (
            2,
            vec![
                (vec![], vec![q(1225, 288), q(-1632, 288), q(741, 288), q(-138, 288), q(9, 288)]),
                (vec![1], vec![q(105, 24), q(-98, 24), q(30, 24), q(-3, 24)]),
                (vec![2], vec![q(30, 8), q(-21, 8), q(3, 8)]),
                (vec![1, 1], vec![q(59, 24), q(-51, 24), q(9, 24)]),
                (vec![3], vec![q(5, 8)]),
                (vec![2, 1], vec![q(12, 4), q(-3, 4)]),
                (vec![1, 1, 1], vec![q(7, 4), q(-3, 4)]),
                (vec![2, 1, 1], vec![q(3, 4)]),
                (vec![1, 1, 1, 1], vec![q(3, 4)]),
            ],
        ),
    ];
    let q_tables: Table = vec![
        (1, vec![(vec![], vec![q(-1, 4)])]),
        (2, vec![(vec![], vec![q(9, 8), q(-4, 8)]), (vec![1], vec![q(1, 8)])]),
        (3, vec![(vec![], vec![q(-57, 128), q(44, 128), q(-8, 128)]), (vec![1], vec![q(-13, 32), q(4, 32)]), (vec![1, 1], vec![q(-1, 8)])]),
    ];
    let mut entries = 0;
    for (model, label, tables) in [(WaveModel::airy(), "P", &p_tables), (WaveModel::bessel(), "Q", &q_tables)] {
        for (k, rows) in tables.iter() {
            let fam = family(model, *k)?;
            let reference: BTreeMap<Partition, NPoly> = rows.iter().map(|(l, c)| (part(l), npoly(c))).collect();
            let keys: std::collections::BTreeSet<&Partition> = reference.keys().chain(fam.closed_form.keys()).collect();
            for lam in keys {
                entries += 1;
                let got = fam.closed_form.get(lam).cloned().unwrap_or_default();
                let want = reference.get(lam).cloned().unwrap_or_default();
                if got != want {
                    mismatches.push(format!("{label}_{k} m_{lam}"));
                }
            }
        }
    }
    // contracted coefficients against the reference formulas, all d ∈ {0..4}^n, n ≤ 4
    let alpha1 = |n: &Q, p: &[Q]| {
        -Q::from(17 - 15 * n.clone() + 3 * n.clone() * n) / 12
            - Q::from(3 - n.clone()) * Q::from(n - &p[0]) / 2
            - ff(&Q::from(n - &p[0]), 2) / 4
    };
    let alpha2 = |n: &Q, p: &[Q]| {
        let n0 = Q::from(n - &p[0]);
        let n01 = Q::from(&n0 - &p[1]);
        let n012 = Q::from(&n01 - &p[2]);
        let n2 = Q::from(n * n);
        let n3 = Q::from(&n2 * n);
        let n4 = Q::from(&n3 * n);
        Q::from(1225 - 1632 * n.clone() + 741 * n2.clone() - 138 * n3.clone() + 9 * n4) / 288
            + Q::from(105 - 98 * n.clone() + 30 * n2.clone() - 3 * n3) * n0.clone() / 24
            + Q::from(3 * (10 - 7 * n.clone() + n2.clone())) * n01.clone() / 8
            + Q::from(59 - 51 * n.clone() + 9 * n2) * ff(&n0, 2) / 48
            + Q::from(5) * n012 / 8
            + Q::from(3 * (4 - n.clone())) * Q::from(&n0 - 1) * n01.clone() / 4
            + Q::from(7 - 3 * n.clone()) * ff(&n0, 3) / 24
            + Q::from(3) * ff(&Q::from(&n0 - 1), 2) * n01 / 48
            + Q::from(3) * ff(&n0, 4) / 96
    };
    let beta2 = |n: &Q, p: &[Q]| Q::from(9 - 4 * n.clone()) / 8 + Q::from(n - &p[0]) / 8;
    let beta3 = |n: &Q, p: &[Q]| {
        let n0 = Q::from(n - &p[0]);
        -Q::from(57 - 44 * n.clone() + 8 * n.clone() * n) / 128 - Q::from(13 - 4 * n.clone()) * n0.clone() / 32 - ff(&n0, 2) / 16
    };
    type Formula<'a> = (&'a str, u32, bool, &'a dyn Fn(&Q, &[Q]) -> Q);
    let formulas: [Formula; 4] =
        [("alpha_1", 1, true, &alpha1), ("alpha_2", 2, true, &alpha2), ("beta_2", 2, false, &beta2), ("beta_3", 3, false, &beta3)];
    let mut tuples: Vec<Vec<u32>> = vec![vec![]];
    let mut all = Vec::new();
    for _ in 0..4 {
        tuples = tuples
            .iter()
            .flat_map(|t| (0..=4u32).map(move |v| [t.clone(), vec![v]].concat()))
            .filter(|t| t.windows(2).all(|w| w[0] <= w[1]))
            .collect();
        all.extend(tuples.clone());
    }
    for (name, k, psi, f) in formulas {
        let mut bad = 0;
        for d in &all {
            let mult = Multiplicities::from_tuple(d);
            let n = Q::from(d.len());
            let p: Vec<Q> = (0..3u32).map(|v| Q::from(d.iter().filter(|&&x| x == v).count())).collect();
            let got = if psi { alpha_k(k, &mult)? } else { beta_k(k, &mult)? };
            bad += usize::from(got != f(&n, &p));
        }
        entries += all.len();
        if bad > 0 {
            mismatches.push(format!("{name} at {bad}/{} label tuples", all.len()));
        }
    }
    // reference two-point values
    let mp = |n: usize, l: &[usize]| Multiplicities::from_list(n, l);
    let two_point = [
        (alpha_k(1, &mp(2, &[1])?)?, q(-5, 12)),
        (alpha_k(1, &mp(2, &[0, 1])?)?, q(-17, 12)),
        (alpha_k(2, &mp(2, &[1, 0, 0])?)?, q(205, 288)),
        (alpha_k(2, &mp(2, &[0, 1, 0])?)?, q(613, 288)),
        (alpha_k(2, &mp(2, &[0, 0, 1])?)?, q(1045, 288)),
        (alpha_k(2, &mp(2, &[0, 0, 0])?)?, q(1225, 288)),
        (beta_k(1, &mp(3, &[1])?)?, q(-1, 4)),
    ];
    entries += two_point.len();
    let cap_bad = two_point.iter().filter(|(a, b)| a != b).count();
    if cap_bad > 0 {
        mismatches.push(format!("{cap_bad} reference two-point values"));
    }
    let mut notes = Vec::new();
    if mismatches.iter().any(|m| m.starts_with("Q_2") || m.starts_with("beta_2")) {
        notes.push("reference k = 2 Θ constant term (9 − 4n)/8 vs computed (9 − 4n)/32");
    }
    if mismatches.iter().any(|m| m.starts_with("alpha_2")) {
        notes.push("reference α_2 coefficient 3/48 of (n − p0 − 1)^{(2)}(n − p0 − p1) vs 3/8 implied by the reference P_2");
    }
    let note = if notes.is_empty() { String::new() } else { format!("; {}; see decisions ledger", notes.join("; ")) };
    Ok((mismatches.is_empty(), format!("{entries} table entries and evaluations, mismatches {mismatches:?}{note}")))
}

fn g_slopes(store: &ExactStore) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (model, d) in [("airy", "d=3g-2"), ("bessel", "d=g-1")] {
        for k in 0..=3u32 {
            let spec = ExperimentSpec::new(ExperimentKind::G, model, None, Some(d.parse()?), k, 100, 200);
            let t = run_experiment_with(&spec, store)?;
            let s = fit_rate_to_targets(&t)?;
            let want = -(f64::from(k) + 1.0);
            ok &= (s - want).abs() <= SLOPE_TOL;
            parts.push(format!("{model} K={k}: {s:.3}"));
        }
    }
    Ok((ok, format!("g ∈ [100, 200], slope −(K+1) ± {SLOPE_TOL}: {}", parts.join(", "))))
}

fn monotone_tail(t: &CsvTable) -> Result<bool> {
    let v = t.column("value")?;
    let tg = t.column("target")?;
    let dev: Vec<f64> = v.iter().zip(&tg).map(|(a, b)| (a - b).abs()).collect();
    let tail = &dev[dev.len().saturating_sub(H_MONOTONE_WINDOW)..];
    Ok(tail.len() == H_MONOTONE_WINDOW && tail.windows(2).all(|w| w[1] < w[0]))
}

fn h_two_point(store: &ExactStore) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for d1 in 0..=3i64 {
        for k in 1..=2u32 {
            let spec = ExperimentSpec::new(ExperimentKind::H, "airy", None, Some(Pattern::psi_two_point(d1)), k, 20, H_G_MAX);
            let t = run_experiment_with(&spec, store)?;
            let e = last_relative_error(&t)?;
            let mono = monotone_tail(&t)?;
            ok &= e <= H_REL_TOL && mono;
            parts.push(format!("d1={d1} K={k}: {:.2}%{}", 100.0 * e, if mono { "" } else { " (not monotone)" }));
        }
    }
    Ok((
        ok,
        format!(
            "g = 20..{H_G_MAX}, last-row error ≤ {}% and strictly approaching over {H_MONOTONE_WINDOW} rows: {}",
            100.0 * H_REL_TOL,
            parts.join(", ")
        ),
    ))
}

fn rspin(store: &ExactStore) -> Result<(bool, String)> {
    let pat3 = Some(Pattern::rspin_one_point(3));
    let i3 = run_experiment_with(&ExperimentSpec::new(ExperimentKind::I, "rairy", Some(3), pat3, 0, 20, 200), store)?;
    let s3 = fit_rate_to_targets(&i3)?;
    let ok3 = (s3 + 1.0).abs() <= SLOPE_TOL;
    let pat4 = Some(Pattern::rspin_one_point(4));
    let i4 = run_experiment_with(&ExperimentSpec::new(ExperimentKind::I, "rairy", Some(4), pat4.clone(), 0, 20, 200), store)?;
    let amp = i4.column("target")?.last().copied().unwrap_or(0.0).abs();
    let e4 = last_relative_error(&i4)?;
    let ok4 = (amp - 1.0).abs() < 1e-12 && e4 <= RSPIN_REL_TOL;
    let j4 = run_experiment_with(&ExperimentSpec::new(ExperimentKind::J, "rairy", Some(4), pat4, J_ORDER, 45, 200), store)?;
    let jv = j4.column("value")?.last().copied().unwrap_or(f64::NAN);
    let jt = j4.column("target")?.last().copied().unwrap_or(f64::NAN);
    let okj = (jt + 0.5).abs() < 1e-12 && ((jv - jt) / jt).abs() <= RSPIN_REL_TOL;
    Ok((
        ok3 && ok4 && okj,
        format!(
            "r=3 I slope {s3:.3} (−1 ± {SLOPE_TOL}); r=4 I amplitude |γ₀| = {amp} with relative error {:.2e}; r=4 J(K={J_ORDER}) at g=200 is {jv:.5} vs −1/2 (a limit of −1 would omit the 1/2 weight of the α = r/2 sector; see decisions ledger)",
            e4
        ),
    ))
}

fn property_suites() -> Result<(bool, String)> {
    let mut failures: Vec<String> = Vec::new();
    for r in 2..=5u32 {
        if !wronskian_check(WaveModel::rairy(r)?, WRONSKIAN_ORDER)? {
            failures.push(format!("Wronskian r={r}"));
        }
    }
    for m in [WaveModel::airy(), WaveModel::bessel()] {
        if !wronskian_check(m, WRONSKIAN_ORDER)? {
            failures.push(format!("Wronskian {}", m.name()));
        }
    }
    if rairy_coeffs(2, WRONSKIAN_ORDER)?.table != airy_coeffs(WRONSKIAN_ORDER).table {
        failures.push("rAiry(2) coefficients differ from Airy".into());
    }
    if correlator(WaveModel::airy(), 1, 2)?.coeffs != correlator(WaveModel::rairy(2)?, 1, 2)?.coeffs {
        failures.push("rAiry(2) correlator differs from Airy".into());
    }
    if !ode_check_w1(WaveModel::airy(), W1_ODE_ORDER)? {
        failures.push("one-point ODE".into());
    }
    let models = [WaveModel::airy(), WaveModel::bessel(), WaveModel::rairy(3)?, WaveModel::rairy(4)?];
    for m in models {
        for g in 0..=2u32 {
            for n in 2..=3usize {
                if 2 * g as usize + n > 2 && !correlator(m, g, n)?.is_symmetric() {
                    failures.push(format!("symmetry {} g={g} n={n}", m.name()));
                }
            }
        }
        for g in 1..=2u32 {
            for n in 2..=3usize {
                let exact = correlator_hbar_coeff(m, n, 2 * g as i32 - 2 + n as i32)?;
                let orders: Vec<Vec<usize>> = if n == 2 { vec![vec![0, 1], vec![1, 0]] } else { vec![vec![0, 1, 2], vec![2, 0, 1]] };
                for o in orders {
                    let s = correlator_series_mode(m, g, n, &o)?;
                    if s.block != s.restrict(&exact) || s.restrict(&exact) != exact {
                        failures.push(format!("series mode {} g={g} ordering {o:?}", m.name()));
                    }
                }
            }
        }
    }
    for m in [WaveModel::airy(), WaveModel::bessel()] {
        for n in 2..=3usize {
            let big = minor::<Q>(m, 1, 1, 0, n, 3)?;
            let small = minor::<Q>(m, 1, 1, 0, n - 1, 3)?;
            for k in 0..=3 {
                let plus = big.numer_at(k).substitute_proportional(n - 1, 0, &Q::from(1))?;
                let minus = big.numer_at(k).substitute_proportional(n - 1, 0, &Q::from(-1))?;
                if plus != small.numer_at(k).neg() || minus != small.numer_at(k) {
                    failures.push(format!("minor residue {} n={n} k={k}", m.name()));
                }
            }
        }
        for k in 1..=2u32 {
            let f = family(m, k)?;
            for mm in 1..=6usize {
                let p = f.member(mm)?;
                let (tot, per) = degree_bounds(m, k, mm);
                if p.coeffs.keys().any(|l| 2 * l.weight() > tot || 2 * l.largest() > per) {
                    failures.push(format!("degree bound {} k={k} m={mm}", m.name()));
                }
                if mm > 1 && check_specialisation(&p, &f.member(mm - 1)?).is_err() {
                    failures.push(format!("specialisation {} k={k} m={mm}", m.name()));
                }
            }
        }
    }
    let kernel_defect = kernel_sum_max_error(11, 100)?;
    if kernel_defect > KERNEL_SUM_TOL {
        failures.push(format!("kernel-sum composition identity defect {kernel_defect:e}"));
    }
    for c in selfcheck(7, 100)? {
        if !c.passed {
            failures.push(c.name);
        }
    }
    let mut m_cases = 0;
    for n in 1..=3usize {
        let parts = |w: u32| (0..=w).flat_map(move |v| Partition::all_of_weight(v, n, v)).collect::<Vec<_>>();
        for mu in parts(8) {
            for nu in parts(mu.weight()) {
                m_cases += 1;
                if m_times_h_coeff(n, &mu, &nu)? != m_times_h_brute(n, &mu, &nu)? {
                    failures.push(format!("M n={n} mu={mu} nu={nu}"));
                }
            }
            for r in 2..=4u32 {
                for alpha in 1..r {
                    for nu in parts(mu.weight().min(4)) {
                        m_cases += 1;
                        if weighted_m_times_h(n, &mu, &nu, r, alpha)? != weighted_m_times_h_brute(n, &mu, &nu, r, alpha)? {
                            failures.push(format!("weighted M r={r} α={alpha} n={n} mu={mu} nu={nu}"));
                        }
                    }
                }
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!(
            "Wronskians to ħ^{WRONSKIAN_ORDER}, rAiry(2) = Airy, one-point ODE to ħ^{W1_ODE_ORDER}, symmetry and ordering independence, minor residues, family degree and specialisation, kernel-sum identity (defect {kernel_defect:.1e}), selfcheck, {m_cases} M counts vs brute force; failures {failures:?}"
        ),
    ))
}

fn main() {
    let t0 = Instant::now();
    let mut rep = Report { passed: 0, failed: 0 };
    let store = ExactStore::in_memory();
    rep.line(1, "golden intersection numbers and one-point coefficients", golden_values());
    rep.line(2, "top descendant closed formula", top_descendant());
    rep.line(3, "string and dilaton equations", string_dilaton());
    rep.line(4, "subleading polynomial tables and coefficients", subleading_tables());
    rep.line(5, "G-sequence convergence rates", g_slopes(&store));
    rep.line(6, "H-sequence two-point limits", h_two_point(&store));
    rep.line(7, "r-spin one-point sequences", rspin(&store));
    rep.line(8, "property suites", property_suites());
    println!("acceptance: {} passed, {} failed, {:.1} s", rep.passed, rep.failed, t0.elapsed().as_secs_f64());
}
