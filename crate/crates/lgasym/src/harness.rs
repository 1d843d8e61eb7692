//! Convergence experiments built from exact intersection numbers: the
//! sequences G, H (ψ and Θ), I, J (r-spin) and L (two-point correlators),
//! CSV tables, log-log rate fits and an on-disk cache of exact numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{correction_direct, falling_f, gamma_k, rspin_action_abs};
use crate::correlators::cycles_from;
use crate::correlators::{correlator, extract_intersection, genus_of, intersection_normalisation, one_point_series, CorrelatorPoly};
use crate::error::{Error, Result};
use crate::exact::{q, q_from_str, q_to_string, r_factorial, Multiplicities, Scalar, Q};
use crate::symfun::{m_times_h_brute, m_times_h_coeff, weighted_m_times_h, weighted_m_times_h_brute, Partition};
use crate::wave::{ModelKind, WaveModel};

/// Largest correction order accepted for one-point r-spin sequences.
pub const MAX_ONE_POINT_ORDER: u32 = 120;
/// Largest correction order accepted for multi-point sequences.
pub const MAX_MULTI_POINT_ORDER: u32 = 4;

/// Which sequence an experiment computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    G,
    H,
    I,
    J,
    L,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "G" => Ok(ExperimentKind::G),
            "H" => Ok(ExperimentKind::H),
            "I" => Ok(ExperimentKind::I),
            "J" => Ok(ExperimentKind::J),
            "L" => Ok(ExperimentKind::L),
            other => Err(Error::Config(format!("unknown experiment {other:?}"))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::G => "G",
            ExperimentKind::H => "H",
            ExperimentKind::I => "I",
            ExperimentKind::J => "J",
            ExperimentKind::L => "L",
        };
        f.write_str(s)
    }
}

/// Labels `(d, a)` as a function of the genus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Pattern {
    /// `d_i = slope_i g + offset_i`, given as `[slope, offset]` pairs; `a`
    /// defaults to all ones for r = 2.
    Linear {
        d: Vec<[i64; 2]>,
        #[serde(default)]
        a: Option<Vec<u32>>,
    },
    /// One point with `r d + a = slope g + offset`, `a ∈ 1..r`. Genera where
    /// the residue is zero have no admissible label and are skipped.
    Residue { slope: i64, offset: i64 },
}

impl Pattern {
    /// One-point pattern `r d + a = (r+1)(2g−1)`.
    pub fn rspin_one_point(r: u32) -> Self {
        let e = i64::from(r) + 1;
        Pattern::Residue { slope: 2 * e, offset: -e }
    }

    /// Two-point pattern `d = (d1, 3g − 1 − d1)` for ψ-class numbers.
    pub fn psi_two_point(d1: i64) -> Self {
        Pattern::Linear { d: vec![[0, d1], [3, -1 - d1]], a: None }
    }

    pub fn n(&self) -> usize {
        match self {
            Pattern::Linear { d, .. } => d.len(),
            Pattern::Residue { .. } => 1,
        }
    }

    /// Labels at genus `g`, or `None` if a residue pattern skips `g`.
    pub fn labels(&self, model: WaveModel, g: u32) -> Result<Option<(Vec<u32>, Vec<u32>)>> {
        let r = model.r();
        let gi = i64::from(g);
        let (d, a) = match self {
            Pattern::Linear { d, a } => {
                let dv = d
                    .iter()
                    .map(|[s, o]| {
                        let v = s * gi + o;
                        u32::try_from(v).map_err(|_| Error::Config(format!("pattern gives d = {v} at g = {g}")))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                let av = match a {
                    Some(a) if a.len() == dv.len() => a.clone(),
                    Some(_) => return Err(Error::Config("pattern has mismatched d and a lengths".into())),
                    None if r == 2 => vec![1; dv.len()],
                    None => return Err(Error::Config("r-spin patterns need a-labels".into())),
                };
                (dv, av)
            }
            Pattern::Residue { slope, offset } => {
                let w = slope * gi + offset;
                if w < 1 {
                    return Err(Error::Config(format!("pattern gives weight {w} at g = {g}")));
                }
                let rr = i64::from(r);
                if w % rr == 0 {
                    return Ok(None);
                }
                (vec![(w / rr) as u32], vec![(w % rr) as u32])
            }
        };
        if a.iter().any(|&x| x == 0 || x >= r) {
            return Err(Error::Config(format!("a-labels {a:?} outside 1..{r}")));
        }
        let got = genus_of(model, &d, &a).map_err(|e| Error::Config(format!("g = {g}: {e}")))?;
        if got != g {
            return Err(Error::Config(format!("labels d={d:?}, a={a:?} have genus {got}, not {g}")));
        }
        Ok(Some((d, a)))
    }
}

/// Parses `s g + o` with integer `s`, `o` (e.g. `3g-1`, `g`, `-2`, `10g-5`).
fn parse_affine(t: &str) -> Result<[i64; 2]> {
    let t: String = t.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse {t:?} as an affine expression in g"));
    let Some(pos) = t.find('g') else {
        return Ok([0, t.parse().map_err(|_| bad())?]);
    };
    let slope = match &t[..pos] {
        "" | "+" => 1,
        "-" => -1,
        x => x.parse().map_err(|_| bad())?,
    };
    let rest = &t[pos + 1..];
    let offset = if rest.is_empty() { 0 } else { rest.strip_prefix('+').unwrap_or(rest).parse().map_err(|_| bad())? };
    Ok([slope, offset])
}

/// Text form: `d=0,3g-1` (optionally `;a=1,2`) or `rd+a=10g-5`.
impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rhs) = s.strip_prefix("rd+a=") {
            let [slope, offset] = parse_affine(rhs)?;
            return Ok(Pattern::Residue { slope, offset });
        }
        let mut d = None;
        let mut a = None;
        for part in s.split(';') {
            let part = part.trim();
            if let Some(v) = part.strip_prefix("d=") {
                d = Some(v.split(',').map(parse_affine).collect::<Result<Vec<_>>>()?);
            } else if let Some(v) = part.strip_prefix("a=") {
                a = Some(
                    v.split(',')
                        .map(|x| x.trim().parse::<u32>().map_err(|_| Error::Config(format!("bad a-label {x:?}"))))
                        .collect::<Result<Vec<_>>>()?,
                );
            } else {
                return Err(Error::Config(format!("cannot parse pattern {s:?}")));
            }
        }
        let d = d.ok_or_else(|| Error::Config(format!("pattern {s:?} has no d=")))?;
        Ok(Pattern::Linear { d, a })
    }
}

fn default_step() -> u32 {
    1
}

fn default_prec() -> u32 {
    256
}

fn default_grid() -> usize {
    15
}

/// Declarative description of one experiment; also the TOML config format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// `airy`, `bessel` or `rairy` (with `r`).
    pub model: String,
    #[serde(default)]
    pub r: Option<u32>,
    /// Required except for L.
    #[serde(default)]
    pub pattern: Option<Pattern>,
    /// Number of subtracted corrections (`K`).
    #[serde(default)]
    pub k: u32,
    pub g_min: u32,
    pub g_max: u32,
    #[serde(default = "default_step")]
    pub g_step: u32,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Working precision in bits; J raises it to cover the cancellation.
    #[serde(default = "default_prec")]
    pub prec: u32,
    /// Grid points per axis for L.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Minimal spec; the remaining fields take their defaults.
    pub fn new(kind: ExperimentKind, model: &str, r: Option<u32>, pattern: Option<Pattern>, k: u32, g_min: u32, g_max: u32) -> Self {
        ExperimentSpec {
            kind,
            model: model.to_string(),
            r,
            pattern,
            k,
            g_min,
            g_max,
            g_step: 1,
            output: None,
            prec: default_prec(),
            grid: default_grid(),
            cache_dir: None,
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn wave_model(&self) -> Result<WaveModel> {
        WaveModel::parse(&self.model, self.r)
    }

    pub fn genera(&self) -> Vec<u32> {
        (self.g_min..=self.g_max).step_by(self.g_step.max(1) as usize).collect()
    }

    fn pattern(&self) -> Result<&Pattern> {
        self.pattern.as_ref().ok_or_else(|| Error::Config(format!("experiment {} needs a pattern", self.kind)))
    }

    /// Checks the model, the correction order and the pattern at every genus.
    pub fn validate(&self) -> Result<()> {
        let model = self.wave_model()?;
        if self.g_min > self.g_max || self.g_step == 0 {
            return Err(Error::Config("empty genus range".into()));
        }
        match (self.kind, model.kind) {
            (ExperimentKind::G | ExperimentKind::H, ModelKind::Airy | ModelKind::Bessel) => {}
            (ExperimentKind::I, ModelKind::RAiry(_)) => {}
            (ExperimentKind::J, ModelKind::RAiry(r)) if r >= 4 => {}
            (ExperimentKind::J, ModelKind::RAiry(_)) => return Err(Error::Config("J needs a second sector, r ≥ 4".into())),
            (ExperimentKind::L, ModelKind::Airy) => {}
            (kind, _) => return Err(Error::Config(format!("experiment {kind} is not defined for model {}", model.name()))),
        }
        if self.kind == ExperimentKind::L {
            if self.grid == 0 {
                return Err(Error::Config("empty grid".into()));
            }
            if self.g_min == 0 {
                return Err(Error::Config("L needs g ≥ 1".into()));
            }
            return Ok(());
        }
        let pat = self.pattern()?;
        let n = pat.n();
        let cap = if n == 1 { MAX_ONE_POINT_ORDER } else { MAX_MULTI_POINT_ORDER };
        if self.k > cap {
            return Err(Error::Config(format!("K = {} exceeds the available corrections (≤ {cap} for n = {n})", self.k)));
        }
        if self.kind == ExperimentKind::H && self.k == 0 && self.pattern.is_none() {
            return Err(Error::Config("H needs a pattern".into()));
        }
        let mut rows = 0;
        for g in self.genera() {
            let m = 2 * i64::from(g) - 2 + n as i64;
            if m < 1 || m - 1 < i64::from(self.k) {
                return Err(Error::Config(format!("g = {g} is too small for K = {}", self.k)));
            }
            if pat.labels(model, g)?.is_some() {
                rows += 1;
            }
        }
        if rows == 0 {
            return Err(Error::Config("the pattern admits no genus in range".into()));
        }
        Ok(())
    }
}

/// A table of decimal strings with a header row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip decimal form of a double.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && x.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        CsvTable { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Structural(format!("row has {} fields, header has {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Domain(format!("no column {name:?}")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows.iter().map(|r| r[i].parse::<f64>().map_err(|e| Error::Parse(format!("{:?}: {e}", r[i])))).collect()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(s.as_bytes());
        let header = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let mut t = CsvTable::new(header);
        for rec in rd.records() {
            t.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect())?;
        }
        Ok(t)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv_string()?)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        CsvTable::parse(&std::fs::read_to_string(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Least-squares slope of `log|y − target|` against `log x` over the upper
/// half of the `x` range.
pub fn fit_rate_columns(x: &[f64], y: &[f64], target: f64) -> Result<f64> {
    if x.len() != y.len() || x.len() < 10 {
        return Err(Error::Domain(format!("rate fits need at least 10 rows, got {}", x.len())));
    }
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mid = 0.5 * (lo + hi);
    let mut pts = Vec::new();
    for (&xi, &yi) in x.iter().zip(y) {
        if xi < mid {
            continue;
        }
        let dev = (yi - target).abs();
        if !(dev > 0.0 && dev.is_finite() && xi > 0.0) {
            return Err(Error::Domain(format!("degenerate fit: value {yi} at x = {xi}")));
        }
        pts.push((xi.ln(), dev.ln()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if pts.len() < 2 || sxx <= 0.0 {
        return Err(Error::Domain("degenerate fit: fewer than two distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// [`fit_rate_columns`] on the `g` and `value` columns.
pub fn fit_rate(table: &CsvTable, target: f64) -> Result<f64> {
    fit_rate_columns(&table.column("g")?, &table.column("value")?, target)
}

/// Rate fit of `|value − target|` with the per-row `target` column, for
/// sequences whose limit depends on the row (oscillating signs).
pub fn fit_rate_to_targets(table: &CsvTable) -> Result<f64> {
    let v = table.column("value")?;
    let t = table.column("target")?;
    let dev: Vec<f64> = v.iter().zip(&t).map(|(a, b)| a - b).collect();
    fit_rate_columns(&table.column("g")?, &dev, 0.0)
}

/// Exact intersection numbers keyed by `(model, g, n, d, a)`, optionally
/// persisted as a JSON map of rational strings.
pub struct ExactStore {
    path: Option<PathBuf>,
    entries: Mutex<BTreeMap<String, Q>>,
    dirty: Mutex<bool>,
    series: Mutex<BTreeMap<String, Arc<Vec<Q>>>>,
    tables: Mutex<BTreeMap<(String, u32, usize), Arc<CorrelatorPoly>>>,
}

fn join(v: &[u32]) -> String {
    v.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

impl ExactStore {
    pub fn in_memory() -> Self {
        ExactStore {
            path: None,
            entries: Mutex::new(BTreeMap::new()),
            dirty: Mutex::new(false),
            series: Mutex::new(BTreeMap::new()),
            tables: Mutex::new(BTreeMap::new()),
        }
    }

    /// Opens (or starts) the cache file `exact.json` in `dir`.
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("exact.json");
        let mut store = ExactStore::in_memory();
        if path.exists() {
            let raw: BTreeMap<String, String> = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            let parsed = raw.into_iter().map(|(k, v)| Ok((k, q_from_str(&v)?))).collect::<Result<BTreeMap<_, _>>>()?;
            store.entries = Mutex::new(parsed);
        }
        store.path = Some(path);
        Ok(store)
    }

    pub fn key(model: WaveModel, g: u32, d: &[u32], a: &[u32]) -> String {
        format!("{}|g={g}|n={}|d={}|a={}", model.name(), d.len(), join(d), join(a))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.lock().expect("store lock").contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&self, key: String, v: Q) {
        let mut e = self.entries.lock().expect("store lock");
        if e.insert(key, v).is_none() {
            *self.dirty.lock().expect("store lock") = true;
        }
    }

    /// Computes the one-point series once up to genus `g_max`.
    pub fn prepare_one_point(&self, model: WaveModel, g_max: u32) -> Result<()> {
        let need = 2 * g_max as usize;
        let have = self.series.lock().expect("store lock").get(&model.name()).map_or(0, |s| s.len());
        if have <= need {
            let s = Arc::new(one_point_series(model, need)?);
            self.series.lock().expect("store lock").insert(model.name(), s);
        }
        Ok(())
    }

    fn table(&self, model: WaveModel, g: u32, n: usize) -> Result<Arc<CorrelatorPoly>> {
        let key = (model.name(), g, n);
        if let Some(t) = self.tables.lock().expect("store lock").get(&key) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(correlator(model, g, n)?);
        self.tables.lock().expect("store lock").insert(key, Arc::clone(&t));
        Ok(t)
    }

    /// `⟨τ_{d_1,a_1} ⋯ τ_{d_n,a_n}⟩`, from the cache when present.
    pub fn intersection(&self, model: WaveModel, d: &[u32], a: &[u32]) -> Result<Q> {
        let g = genus_of(model, d, a)?;
        let key = ExactStore::key(model, g, d, a);
        if let Some(v) = self.entries.lock().expect("store lock").get(&key) {
            return Ok(v.clone());
        }
        let v = if d.len() == 1 {
            let idx = 2 * g as usize;
            let series = self.series.lock().expect("store lock").get(&model.name()).cloned();
            let c = match series {
                Some(s) if s.len() > idx => s[idx].clone(),
                _ => {
                    self.prepare_one_point(model, g)?;
                    self.series.lock().expect("store lock")[&model.name()][idx].clone()
                }
            };
            c / intersection_normalisation(model, g, d, a)?
        } else {
            let table = self.table(model, g, d.len())?;
            for (dd, aa, v) in table.intersections()? {
                self.insert(ExactStore::key(model, g, &dd, &aa), v);
            }
            extract_intersection(&table, d, Some(a))?
        };
        self.insert(key, v.clone());
        Ok(v)
    }

    /// `⟨τ⟩ Π (r d_i + a_i)!_{(r)}`.
    pub fn normalised(&self, model: WaveModel, d: &[u32], a: &[u32]) -> Result<Q> {
        let r = i64::from(model.r());
        let mut x = self.intersection(model, d, a)?;
        for (&di, &ai) in d.iter().zip(a) {
            x *= Q::from(r_factorial(r * i64::from(di) + i64::from(ai), r)?);
        }
        Ok(x)
    }

    /// Writes new entries to disk; a no-op for in-memory stores.
    pub fn flush(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut dirty = self.dirty.lock().expect("store lock");
        if !*dirty {
            return Ok(());
        }
        let raw: BTreeMap<String, String> =
            self.entries.lock().expect("store lock").iter().map(|(k, v)| (k.clone(), q_to_string(v))).collect();
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&raw)?)?;
        std::fs::rename(&tmp, path)?;
        *dirty = false;
        Ok(())
    }
}

fn fl(prec: u32, x: &Q) -> Float {
    Float::with_val(prec, x)
}

fn sign_pow(e: i64) -> i32 {
    if e.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// `A` and `S` of the ψ (Airy) and Θ (Bessel) asymptotics.
fn action_stokes(model: WaveModel) -> Result<(Q, Q)> {
    match model.kind {
        ModelKind::Airy => Ok((q(2, 3), Q::from(1))),
        ModelKind::Bessel => Ok((Q::from(2), Q::from(2))),
        ModelKind::RAiry(_) => Err(Error::Config("G and H are defined for the Airy and Bessel models".into())),
    }
}

/// `S^{−1} (4π/2ⁿ) A^m X / Γ(m)` with `X = ⟨τ⟩ Π (2d+1)!!`.
fn leading_ratio(model: WaveModel, g: u32, x: &Q, n: usize, prec: u32) -> Result<Float> {
    let (a, s) = action_stokes(model)?;
    let m = 2 * i64::from(g) - 2 + n as i64;
    let pi = crate::exact::pi(prec);
    let gamma = Float::with_val(prec, Float::with_val(prec, m).gamma_ref());
    let am = fl(prec, &a).pow(m as i32);
    let mut v = fl(prec, x) * am * pi * 4u32 / gamma / fl(prec, &s);
    v /= Float::with_val(prec, 2u32).pow(n as u32);
    Ok(v)
}

/// `Σ_{k=k_from}^{K} A^k α_k/(m−1)^{\underline k}`.
fn correction_sum(model: WaveModel, g: u32, d: &[u32], k_from: u32, k_to: u32, prec: u32) -> Result<Float> {
    let (a, _) = action_stokes(model)?;
    let n = d.len();
    let m = 2 * i64::from(g) - 2 + n as i64;
    let p = Multiplicities::from_tuple(d);
    let mut acc = Float::with_val(prec, 0);
    for k in k_from..=k_to {
        let c = correction_direct(model, k, &p)?;
        acc += fl(prec, &a).pow(k) * fl(prec, &c) / falling_f(m - 1, k, prec);
    }
    Ok(acc)
}

struct Row {
    g: u32,
    d: Vec<u32>,
    a: Vec<u32>,
    value: f64,
    target: f64,
}

fn g_row(store: &ExactStore, model: WaveModel, g: u32, d: &[u32], a: &[u32], k: u32, prec: u32) -> Result<Row> {
    let x = store.normalised(model, d, a)?;
    let mut v = leading_ratio(model, g, &x, d.len(), prec)?;
    if k >= 1 {
        v -= correction_sum(model, g, d, 1, k, prec)?;
    }
    Ok(Row { g, d: d.to_vec(), a: a.to_vec(), value: v.to_f64(), target: 1.0 })
}

fn h_row(store: &ExactStore, model: WaveModel, g: u32, d: &[u32], a: &[u32], k: u32, prec: u32) -> Result<Row> {
    let (act, _) = action_stokes(model)?;
    let x = store.normalised(model, d, a)?;
    let m = 2 * i64::from(g) - 2 + d.len() as i64;
    let mut v = leading_ratio(model, g, &x, d.len(), prec)?;
    if k >= 1 {
        v -= correction_sum(model, g, d, 0, k - 1, prec)?;
    }
    v *= falling_f(m - 1, k, prec);
    v /= fl(prec, &act).pow(k);
    let target = correction_direct(model, k, &Multiplicities::from_tuple(d))?;
    Ok(Row { g, d: d.to_vec(), a: a.to_vec(), value: v.to_f64(), target: Float::with_val(53, &target).to_f64() })
}

/// Sector weight: 1/2 for the self-conjugate sector `α = r/2`.
fn sector_weight(r: u32, alpha: u32) -> f64 {
    if 2 * alpha == r {
        0.5
    } else {
        1.0
    }
}

/// `I` at working precision, and the sign `(−1)^{|d|−g+1}`.
fn i_value(store: &ExactStore, r: u32, g: u32, d: &[u32], a: &[u32], prec: u32) -> Result<(Float, i32)> {
    let model = WaveModel::rairy(r)?;
    let n = d.len();
    let sd: i64 = d.iter().map(|&x| i64::from(x)).sum();
    let m = 2 * i64::from(g) - 2 + n as i64;
    let x = store.normalised(model, d, a)?;
    let pi = crate::exact::pi(prec);
    let gamma = Float::with_val(prec, Float::with_val(prec, m).gamma_ref());
    let e = i64::from(g) - 1 - sd;
    let mut v = fl(prec, &x) * pi * 2u32 / gamma;
    v /= Float::with_val(prec, 2u32).pow(n as u32);
    v *= Float::with_val(prec, r).pow(e as i32);
    v *= rspin_action_abs(r, 1, prec).pow(m as i32);
    if sign_pow(e) < 0 {
        v = -v;
    }
    Ok((v, sign_pow(sd - i64::from(g) + 1)))
}

fn i_row(store: &ExactStore, r: u32, g: u32, d: &[u32], a: &[u32], prec: u32) -> Result<Row> {
    let (v, s) = i_value(store, r, g, d, a, prec)?;
    let g0 = gamma_k(r, 1, 0, d, a)?.embed(prec).re.to_f64();
    let target = sector_weight(r, 1) * f64::from(s) * g0;
    Ok(Row { g, d: d.to_vec(), a: a.to_vec(), value: v.to_f64(), target })
}

fn j_row(store: &ExactStore, r: u32, g: u32, d: &[u32], a: &[u32], k: u32, prec: u32) -> Result<Row> {
    let n = d.len();
    let m = 2 * i64::from(g) - 2 + n as i64;
    let a1 = rspin_action_abs(r, 1, 64);
    let a2 = rspin_action_abs(r, 2, 64);
    let extra = (Float::with_val(64, &a2 / &a1).log2() * m as i32).to_f64().ceil().max(0.0) as u32;
    let prec = prec + extra + 64;
    let (mut v, s) = i_value(store, r, g, d, a, prec)?;
    let a1 = rspin_action_abs(r, 1, prec);
    let a2 = rspin_action_abs(r, 2, prec);
    for kk in 0..=k {
        let gk = gamma_k(r, 1, kk, d, a)?.embed(prec).re;
        v -= a1.clone().pow(kk) * gk * s / falling_f(m - 1, kk, prec);
    }
    v *= (a2 / a1).pow(m as i32);
    let g0 = gamma_k(r, 2, 0, d, a)?.embed(prec).re.to_f64();
    let target = sector_weight(r, 2) * f64::from(s) * g0;
    Ok(Row { g, d: d.to_vec(), a: a.to_vec(), value: v.to_f64(), target })
}

/// `W_{g,2}(x₁, x₂)` for the Airy model at positive real points.
pub fn w2_at(table: &CorrelatorPoly, x1: &Float, x2: &Float) -> Float {
    let prec = x1.prec();
    let r = table.model.r();
    let mut acc = Float::with_val(prec, 0);
    for (mu, c) in &table.coeffs {
        let e1 = -Float::with_val(prec, mu[0] + r) / 2u32;
        let e2 = -Float::with_val(prec, mu[1] + r) / 2u32;
        let t = fl(prec, c) * x1.clone().pow(&e1) * x2.clone().pow(&e2);
        acc += t;
    }
    acc
}

fn l_table(store: &ExactStore, g: u32, grid: usize, prec: u32) -> Result<CsvTable> {
    let model = WaveModel::airy();
    let w0 = store.table(model, g, 2)?;
    let w1 = store.table(model, g + 1, 2)?;
    let pts: Vec<(usize, usize)> = (1..=grid).flat_map(|i| (1..=grid).map(move |j| (i, j))).collect();
    let rows: Vec<Result<Vec<String>>> = pts
        .par_iter()
        .map(|&(i, j)| {
            let x1 = Float::with_val(prec, 2 * i) / grid as u32;
            let x2 = Float::with_val(prec, 2 * j) / grid as u32;
            let ratio = w2_at(&w0, &x1, &x2) / w2_at(&w1, &x1, &x2);
            if ratio.is_sign_negative() {
                return Err(Error::Pipeline(format!("W_{{{g},2}}/W_{{{},2}} < 0 at ({x1}, {x2})", g + 1)));
            }
            let v = ratio.sqrt() * (2 * g);
            let act = |x: &Float| Float::with_val(prec, x.clone().pow(Float::with_val(prec, 1.5))) * 4u32 / 3u32;
            let target = act(&x1).min(&act(&x2));
            Ok(vec![g.to_string(), fmt_num(x1.to_f64()), fmt_num(x2.to_f64()), fmt_num(v.to_f64()), fmt_num(target.to_f64())])
        })
        .collect();
    let mut t = CsvTable::new(["g", "x1", "x2", "value", "target"].iter().map(|s| s.to_string()).collect());
    for r in rows {
        t.push(r?)?;
    }
    Ok(t)
}

/// Runs an experiment with a given store of exact numbers.
pub fn run_experiment_with(spec: &ExperimentSpec, store: &ExactStore) -> Result<CsvTable> {
    spec.validate()?;
    let model = spec.wave_model()?;
    if spec.kind == ExperimentKind::L {
        return l_table(store, spec.g_max, spec.grid, spec.prec);
    }
    let pat = spec.pattern()?;
    let n = pat.n();
    let mut jobs = Vec::new();
    for g in spec.genera() {
        if let Some((d, a)) = pat.labels(model, g)? {
            jobs.push((g, d, a));
        }
    }
    if n == 1 && !jobs.iter().all(|(g, d, a)| store.contains(&ExactStore::key(model, *g, d, a))) {
        store.prepare_one_point(model, spec.g_max)?;
    }
    // warm the coefficient caches before the parallel loop
    if let Some((_, d, a)) = jobs.first() {
        match spec.kind {
            ExperimentKind::G | ExperimentKind::H => {
                for k in 0..=spec.k {
                    correction_direct(model, k, &Multiplicities::from_tuple(d))?;
                }
            }
            ExperimentKind::I | ExperimentKind::J => {
                gamma_k(model.r(), 1, spec.k, d, a)?;
                if spec.kind == ExperimentKind::J {
                    gamma_k(model.r(), 2, 0, d, a)?;
                }
            }
            ExperimentKind::L => {}
        }
    }
    let rows: Vec<Result<Row>> = jobs
        .par_iter()
        .map(|(g, d, a)| match spec.kind {
            ExperimentKind::G => g_row(store, model, *g, d, a, spec.k, spec.prec),
            ExperimentKind::H => h_row(store, model, *g, d, a, spec.k, spec.prec),
            ExperimentKind::I => i_row(store, model.r(), *g, d, a, spec.prec),
            ExperimentKind::J => j_row(store, model.r(), *g, d, a, spec.k, spec.prec),
            ExperimentKind::L => unreachable!("handled above"),
        })
        .collect();
    let mut header = vec!["g".to_string()];
    header.extend((1..=n).map(|i| format!("d{i}")));
    header.extend((1..=n).map(|i| format!("a{i}")));
    header.extend(["value".to_string(), "target".to_string()]);
    let mut t = CsvTable::new(header);
    for r in rows {
        let r = r?;
        let mut f = vec![r.g.to_string()];
        f.extend(r.d.iter().chain(&r.a).map(u32::to_string));
        f.extend([fmt_num(r.value), fmt_num(r.target)]);
        t.push(f)?;
    }
    Ok(t)
}

/// Runs an experiment, using the configured cache directory and writing the
/// configured output file.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<CsvTable> {
    let store = match &spec.cache_dir {
        Some(dir) => ExactStore::open(dir)?,
        None => ExactStore::in_memory(),
    };
    let t = run_experiment_with(spec, &store)?;
    store.flush()?;
    if let Some(out) = &spec.output {
        t.write(out)?;
    }
    Ok(t)
}

/// One-point I and J tables for `r d + a = (r+1)(2g−1)`; J is `None` for
/// `r = 3`, which has a single sector pair.
pub fn rspin_sequences(r: u32, k: u32, g_min: u32, g_max: u32, store: &ExactStore) -> Result<(CsvTable, Option<CsvTable>)> {
    if r < 3 {
        return Err(Error::Config(format!("r-spin sequences need r ≥ 3, got {r}")));
    }
    let pat = Some(Pattern::rspin_one_point(r));
    let i = run_experiment_with(&ExperimentSpec::new(ExperimentKind::I, "rairy", Some(r), pat.clone(), 0, g_min, g_max), store)?;
    let j = if r >= 4 {
        Some(run_experiment_with(&ExperimentSpec::new(ExperimentKind::J, "rairy", Some(r), pat, k, g_min, g_max), store)?)
    } else {
        None
    };
    Ok((i, j))
}

/// Relative distance of the last row to its target.
pub fn last_relative_error(table: &CsvTable) -> Result<f64> {
    let v = table.column("value")?;
    let t = table.column("target")?;
    match (v.last(), t.last()) {
        (Some(v), Some(t)) => Ok((v - t).abs() / t.abs().max(f64::MIN_POSITIVE)),
        _ => Err(Error::Domain("empty table".into())),
    }
}

/// Outcome of one randomized property check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub passed: bool,
}

fn random_partition<R: rand::Rng>(rng: &mut R, max_weight: u32, max_len: usize) -> Partition {
    let len = rng.gen_range(0..=max_len);
    let mut parts: Vec<u32> = (0..len).map(|_| rng.gen_range(0..=max_weight)).collect();
    while parts.iter().sum::<u32>() > max_weight {
        let i = parts.iter().enumerate().max_by_key(|(_, &v)| v).map(|(i, _)| i).unwrap_or(0);
        parts[i] -= 1;
    }
    Partition::new(parts)
}

/// Randomized property checks driven by `seed`: the closed `M_{n,μ,ν}`
/// counts and their r-weighted versions against brute-force expansion
/// (`|μ| ≤ 8`), the cyclic-sum identity behind the determinantal formula at
/// random rational points, and CSV round-trips.
pub fn selfcheck(seed: u64, samples: usize) -> Result<Vec<CheckResult>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut ok = true;
    for _ in 0..samples {
        let n = rng.gen_range(1..=3usize);
        let mu = random_partition(&mut rng, 8, n);
        let nu = random_partition(&mut rng, mu.weight(), n);
        ok &= m_times_h_coeff(n, &mu, &nu)? == m_times_h_brute(n, &mu, &nu)?;
    }
    out.push(CheckResult { name: "M_{n,mu,nu} closed form vs brute force".into(), cases: samples, passed: ok });

    let mut ok = true;
    let mut cases = 0;
    for _ in 0..samples {
        let n = rng.gen_range(1..=3usize);
        let r = rng.gen_range(2..=4u32);
        let alpha = rng.gen_range(1..r);
        let mu = random_partition(&mut rng, 8, n);
        let nu = random_partition(&mut rng, mu.weight(), n);
        if nu.length() > n {
            continue;
        }
        cases += 1;
        ok &= weighted_m_times_h(n, &mu, &nu, r, alpha)? == weighted_m_times_h_brute(n, &mu, &nu, r, alpha)?;
    }
    out.push(CheckResult { name: "r-weighted M vs brute force".into(), cases, passed: ok });

    let mut ok = true;
    let mut cases = 0;
    let rq = |rng: &mut rand::rngs::StdRng| q(rng.gen_range(1..40), rng.gen_range(1..40));
    while cases < samples {
        let n = rng.gen_range(1..=5usize);
        let z: Vec<Q> = (0..n).map(|_| rq(&mut rng)).collect();
        let tau = rq(&mut rng);
        let mut sorted = z.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() < n || z.contains(&tau) {
            continue;
        }
        cases += 1;
        let mut lhs = Q::new();
        for cyc in cycles_from(0, n) {
            let next = |v: usize| cyc[(cyc.iter().position(|&x| x == v).expect("vertex on cycle") + 1) % n];
            let mut t = Q::from(1) / Q::from(&z[next(0)] - &tau);
            for a in 1..n {
                t /= Q::from(&z[a] - &z[next(a)]);
            }
            lhs += t;
        }
        let mut rhs = crate::exact::q_pow(&Q::from(&z[0] - &tau), n as i32 - 2);
        for x in &z[1..] {
            rhs /= Q::from(&z[0] - x) * Q::from(&tau - x);
        }
        ok &= lhs == rhs;
    }
    out.push(CheckResult { name: "cyclic kernel-sum identity at random points".into(), cases, passed: ok });

    let mut t = CsvTable::new(vec!["g".into(), "value".into()]);
    let vals: Vec<f64> = (0..samples)
        .map(|_| {
            let m: f64 = rng.gen_range(-1.0..1.0);
            m * 10f64.powi(rng.gen_range(-300..300))
        })
        .collect();
    for (i, v) in vals.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_num(*v)])?;
    }
    let back = CsvTable::parse(&t.to_csv_string()?)?;
    let ok = back == t && back.column("value")?.iter().zip(&vals).all(|(a, b)| a.to_bits() == b.to_bits());
    out.push(CheckResult { name: "CSV round trip".into(), cases: samples, passed: ok });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(kind: ExperimentKind, model: &str, r: Option<u32>, pat: Pattern, k: u32, g0: u32, g1: u32) -> ExperimentSpec {
        ExperimentSpec::new(kind, model, r, Some(pat), k, g0, g1)
    }

    #[test]
    fn g_psi_one_point_at_fifty() {
        let s = spec(ExperimentKind::G, "airy", None, Pattern::Linear { d: vec![[3, -2]], a: None }, 0, 50, 50);
        let t = run_experiment(&s).unwrap();
        let v = t.column("value").unwrap()[0];
        assert!((v - 1.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn g_bands_shrink_with_k() {
        let store = ExactStore::in_memory();
        let mut prev: Option<Vec<f64>> = None;
        for k in 0..=3 {
            let s = spec(ExperimentKind::G, "airy", None, Pattern::Linear { d: vec![[3, -2]], a: None }, k, 50, 60);
            let dev: Vec<f64> = run_experiment_with(&s, &store).unwrap().column("value").unwrap().iter().map(|v| (v - 1.0).abs()).collect();
            if let Some(p) = &prev {
                assert!(dev.iter().zip(p).all(|(a, b)| a < b), "K = {k}");
            }
            prev = Some(dev);
        }
    }

    #[test]
    fn h_psi_two_point_approaches_limits() {
        let store = ExactStore::in_memory();
        for (d1, want) in [(0i64, -5.0 / 12.0), (1, -17.0 / 12.0)] {
            let s = spec(ExperimentKind::H, "airy", None, Pattern::psi_two_point(d1), 1, 10, 30);
            let t = run_experiment_with(&s, &store).unwrap();
            assert_eq!(t.column("target").unwrap()[0], want);
            let v = t.column("value").unwrap();
            let errs: Vec<f64> = v.iter().map(|x| (x - want).abs()).collect();
            assert!(errs.windows(2).all(|w| w[1] < w[0]));
            assert!(errs.last().unwrap() / want.abs() < 0.1);
        }
    }

    #[test]
    fn h_with_zero_corrections_tends_to_one() {
        let s = spec(ExperimentKind::H, "airy", None, Pattern::psi_two_point(2), 0, 20, 20);
        let t = run_experiment(&s).unwrap();
        assert!((t.column("value").unwrap()[0] - 1.0).abs() < 0.05);
        assert_eq!(t.column("target").unwrap()[0], 1.0);
    }

    #[test]
    fn g_theta_one_point() {
        let s = spec(ExperimentKind::G, "bessel", None, Pattern::Linear { d: vec![[1, -1]], a: None }, 2, 30, 40);
        let t = run_experiment(&s).unwrap();
        assert!(t.column("value").unwrap().iter().all(|v| (v - 1.0).abs() < 1e-4));
    }

    #[test]
    fn i_and_j_for_four_spin() {
        let store = ExactStore::in_memory();
        let (i, j) = rspin_sequences(4, 30, 60, 70, &store).unwrap();
        let j = j.unwrap();
        for (v, t) in i.column("value").unwrap().iter().zip(i.column("target").unwrap()) {
            assert!((v - t).abs() < 0.02, "I {v} vs {t}");
            assert_eq!(t.abs(), 1.0);
        }
        for (v, t) in j.column("value").unwrap().iter().zip(j.column("target").unwrap()) {
            assert_eq!(t, -0.5);
            assert!((v - t).abs() < 0.01, "J {v} vs {t}");
        }
    }

    #[test]
    fn i_for_two_spin_is_half_of_g() {
        let store = ExactStore::in_memory();
        let pat = Pattern::Linear { d: vec![[3, -2]], a: Some(vec![1]) };
        let i = run_experiment_with(&spec(ExperimentKind::I, "rairy", Some(2), pat.clone(), 0, 12, 16), &store).unwrap();
        let g = run_experiment_with(&spec(ExperimentKind::G, "airy", None, pat, 0, 12, 16), &store).unwrap();
        for ((iv, it), gv) in i.column("value").unwrap().iter().zip(i.column("target").unwrap()).zip(g.column("value").unwrap()) {
            assert!((iv / it - gv).abs() < 1e-12, "{iv} {it} {gv}");
        }
    }

    #[test]
    fn three_spin_skips_inadmissible_genera() {
        let s = spec(ExperimentKind::I, "rairy", Some(3), Pattern::rspin_one_point(3), 0, 2, 10);
        let t = run_experiment(&s).unwrap();
        let gs = t.column("g").unwrap();
        assert!(gs.iter().all(|&g| g as u32 % 3 != 2));
        assert_eq!(gs.len(), 6);
    }

    #[test]
    fn l_grid_is_symmetric_and_near_min_action() {
        let mut s = ExperimentSpec::new(ExperimentKind::L, "airy", None, None, 0, 10, 10);
        s.grid = 6;
        let t = run_experiment(&s).unwrap();
        let x1 = t.column("x1").unwrap();
        let x2 = t.column("x2").unwrap();
        let v = t.column("value").unwrap();
        let tg = t.column("target").unwrap();
        let mut by: BTreeMap<(String, String), f64> = BTreeMap::new();
        for i in 0..t.len() {
            by.insert((fmt_num(x1[i]), fmt_num(x2[i])), v[i]);
        }
        for i in 0..t.len() {
            let sw = by[&(fmt_num(x2[i]), fmt_num(x1[i]))];
            assert!((sw - v[i]).abs() <= 1e-12 * v[i].abs());
            assert!((v[i] - tg[i]).abs() / tg[i] < 0.2, "({}, {}): {} vs {}", x1[i], x2[i], v[i], tg[i]);
        }
    }

    #[test]
    fn validation_errors() {
        let bad = spec(ExperimentKind::G, "airy", None, Pattern::Linear { d: vec![[3, -1]], a: None }, 0, 5, 6);
        assert!(matches!(run_experiment(&bad), Err(Error::Config(_))));
        let j3 = spec(ExperimentKind::J, "rairy", Some(3), Pattern::rspin_one_point(3), 1, 10, 20);
        assert!(matches!(run_experiment(&j3), Err(Error::Config(_))));
        let big_k = spec(ExperimentKind::J, "rairy", Some(4), Pattern::rspin_one_point(4), MAX_ONE_POINT_ORDER + 1, 100, 101);
        assert!(matches!(run_experiment(&big_k), Err(Error::Config(_))));
        let small_g = spec(ExperimentKind::J, "rairy", Some(4), Pattern::rspin_one_point(4), 80, 30, 50);
        assert!(matches!(run_experiment(&small_g), Err(Error::Config(_))));
        let wrong_model = spec(ExperimentKind::G, "rairy", Some(3), Pattern::rspin_one_point(3), 0, 5, 6);
        assert!(matches!(run_experiment(&wrong_model), Err(Error::Config(_))));
    }

    #[test]
    fn fit_rate_examples() {
        let x: Vec<f64> = (10..=40).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|g| 1.0 + 3.0 / g.powi(2)).collect();
        assert!((fit_rate_columns(&x, &y, 1.0).unwrap() + 2.0).abs() < 1e-9);
        let flat = vec![2.5; x.len()];
        assert!(fit_rate_columns(&x, &flat, 2.5).is_err());
        assert!(fit_rate_columns(&x[..5], &y[..5], 1.0).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(ExperimentKind::G, "airy", None, Pattern::psi_two_point(1), 1, 3, 8);
        s.cache_dir = Some(dir.path().to_path_buf());
        let first = run_experiment(&s).unwrap();
        let store = ExactStore::open(dir.path()).unwrap();
        let entries: usize = (3..=8u32).map(|g| correlator(WaveModel::airy(), g, 2).unwrap().coeffs.len()).sum();
        assert_eq!(store.len(), entries);
        let x = store.intersection(WaveModel::airy(), &[1, 7], &[1, 1]).unwrap();
        assert_eq!(x, crate::correlators::intersection_number(WaveModel::airy(), &[1, 7], None).unwrap());
        let second = run_experiment(&s).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn config_toml_round_trip() {
        let text = r#"
kind = "J"
model = "rairy"
r = 4
k = 10
g_min = 40
g_max = 60

[pattern]
type = "residue"
slope = 10
offset = -5
"#;
        let s = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(s.pattern, Some(Pattern::rspin_one_point(4)));
        assert_eq!(s.prec, 256);
        let back = ExperimentSpec::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(back.pattern, s.pattern);
        assert_eq!(back.k, 10);
        s.validate().unwrap();
    }

    #[test]
    fn selfcheck_passes() {
        for seed in [1u64, 2] {
            let res = selfcheck(seed, 60).unwrap();
            assert_eq!(res.len(), 4);
            assert!(res.iter().all(|c| c.passed && c.cases > 0), "{res:?}");
        }
    }

    #[test]
    fn pattern_text_form() {
        assert_eq!("d=0,3g-1".parse::<Pattern>().unwrap(), Pattern::psi_two_point(0));
        assert_eq!("rd+a=10g-5".parse::<Pattern>().unwrap(), Pattern::rspin_one_point(4));
        assert_eq!("d=g+2, -g+7; a=1,2".parse::<Pattern>().unwrap(), Pattern::Linear { d: vec![[1, 2], [-1, 7]], a: Some(vec![1, 2]) });
        assert!("d=3x".parse::<Pattern>().is_err());
        assert!("q=1".parse::<Pattern>().is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(vals in proptest::collection::vec(-1e300f64..1e300, 1..20), small in proptest::collection::vec(-1e-300f64..1e-300, 1..5)) {
            let mut t = CsvTable::new(vec!["g".into(), "value".into()]);
            for (i, v) in vals.iter().chain(&small).enumerate() {
                t.push(vec![i.to_string(), fmt_num(*v)]).unwrap();
            }
            let back = CsvTable::parse(&t.to_csv_string().unwrap()).unwrap();
            prop_assert_eq!(&back, &t);
            let parsed = back.column("value").unwrap();
            for (a, b) in parsed.iter().zip(vals.iter().chain(&small)) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
