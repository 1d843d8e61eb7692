//! Python bindings. Exact rationals cross the boundary as `"p/q"` strings,
//! which `fractions.Fraction` parses directly.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lgasym::asymptotics::{alpha_k, asymptotic_estimate, beta_k, normalised_exact, ratio_to_estimate};
use lgasym::correlators::{correlator, intersection_number, one_point_coefficient};
use lgasym::exact::{Multiplicities, Q};
use lgasym::harness::{fit_rate_columns, run_experiment_with, selfcheck, ExactStore, ExperimentKind, ExperimentSpec, Pattern};
use lgasym::wave::{wronskian_check, WaveModel};

fn err(e: lgasym::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn qs(x: &Q) -> String {
    if *x.denom() == 1 {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn model(name: &str, r: Option<u32>) -> PyResult<WaveModel> {
    WaveModel::parse(name, r).map_err(err)
}

/// ψ-class intersection number ⟨τ_{d_1} ⋯ τ_{d_n}⟩.
#[pyfunction]
fn psi(d: Vec<u32>) -> PyResult<String> {
    intersection_number(WaveModel::airy(), &d, None).map(|x| qs(&x)).map_err(err)
}

/// Θ-class intersection number ⟨Θ τ_{d_1} ⋯ τ_{d_n}⟩.
#[pyfunction]
fn theta(d: Vec<u32>) -> PyResult<String> {
    intersection_number(WaveModel::bessel(), &d, None).map(|x| qs(&x)).map_err(err)
}

/// r-spin intersection number with primary fields `a`.
#[pyfunction]
fn rspin(r: u32, d: Vec<u32>, a: Vec<u32>) -> PyResult<String> {
    intersection_number(model("rairy", Some(r))?, &d, Some(&a)).map(|x| qs(&x)).map_err(err)
}

/// Coefficient of the genus-`g` one-point function.
#[pyfunction]
#[pyo3(signature = (model_name, g, r=None))]
fn one_point(model_name: &str, g: u32, r: Option<u32>) -> PyResult<String> {
    one_point_coefficient(model(model_name, r)?, g).map(|x| qs(&x)).map_err(err)
}

/// Genus-`g`, `n`-point correlator as JSON.
#[pyfunction]
#[pyo3(signature = (model_name, g, n, r=None))]
fn correlator_json(model_name: &str, g: u32, n: usize, r: Option<u32>) -> PyResult<String> {
    correlator(model(model_name, r)?, g, n).and_then(|p| p.to_json()).map_err(err)
}

/// Subleading coefficient `α_k` (ψ) or `β_k` (Θ) for the labels `d`.
#[pyfunction]
#[pyo3(signature = (k, d, model_name="airy"))]
fn coefficient(k: u32, d: Vec<u32>, model_name: &str) -> PyResult<String> {
    let p = Multiplicities::from_tuple(&d);
    let v = match model_name {
        "airy" => alpha_k(k, &p),
        "bessel" => beta_k(k, &p),
        other => return Err(PyValueError::new_err(format!("coefficients are defined for airy and bessel, got {other}"))),
    };
    v.map(|x| qs(&x)).map_err(err)
}

/// Ratio of the normalised exact number to its large-genus estimate
/// truncated at order `k_max`.
#[pyfunction]
#[pyo3(signature = (model_name, d, k_max, a=None, r=None))]
fn estimate_ratio(model_name: &str, d: Vec<u32>, k_max: u32, a: Option<Vec<u32>>, r: Option<u32>) -> PyResult<f64> {
    let m = model(model_name, r)?;
    let est = asymptotic_estimate(m, &d, a.as_deref(), k_max).map_err(err)?;
    let exact = normalised_exact(m, &d, a.as_deref()).map_err(err)?;
    Ok(ratio_to_estimate(&exact, &est))
}

/// Runs a convergence experiment and returns `(header, rows)` with every
/// field as a float.
#[pyfunction]
#[pyo3(signature = (kind, model_name, g_min, g_max, k=0, r=None, pattern=None, g_step=1))]
#[allow(clippy::too_many_arguments)]
fn experiment(
    kind: &str,
    model_name: &str,
    g_min: u32,
    g_max: u32,
    k: u32,
    r: Option<u32>,
    pattern: Option<&str>,
    g_step: u32,
) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let kind: ExperimentKind = kind.parse().map_err(err)?;
    let pattern = pattern.map(str::parse::<Pattern>).transpose().map_err(err)?;
    let mut spec = ExperimentSpec::new(kind, model_name, r, pattern, k, g_min, g_max);
    spec.g_step = g_step;
    let t = run_experiment_with(&spec, &ExactStore::in_memory()).map_err(err)?;
    let rows = t
        .rows
        .iter()
        .map(|row| row.iter().map(|f| f.parse::<f64>().map_err(|e| PyValueError::new_err(e.to_string()))).collect())
        .collect::<PyResult<_>>()?;
    Ok((t.header, rows))
}

/// Log-log slope of `|y − target|` against `x` over the upper half of `x`.
#[pyfunction]
fn fit_rate(x: Vec<f64>, y: Vec<f64>, target: f64) -> PyResult<f64> {
    fit_rate_columns(&x, &y, target).map_err(err)
}

/// True iff the wave-function Wronskian is 1 through `ħ^order`.
#[pyfunction]
#[pyo3(signature = (model_name, order, r=None))]
fn wronskian(model_name: &str, order: usize, r: Option<u32>) -> PyResult<bool> {
    wronskian_check(model(model_name, r)?, order).map_err(err)
}

/// Randomized property checks as `(name, cases, passed)` triples.
#[pyfunction]
#[pyo3(signature = (seed=0, samples=50))]
fn self_check(seed: u64, samples: usize) -> PyResult<Vec<(String, usize, bool)>> {
    Ok(selfcheck(seed, samples).map_err(err)?.into_iter().map(|c| (c.name, c.cases, c.passed)).collect())
}

#[pymodule]
fn lgasym_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(rspin, m)?)?;
    m.add_function(wrap_pyfunction!(one_point, m)?)?;
    m.add_function(wrap_pyfunction!(correlator_json, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(wronskian, m)?)?;
    m.add_function(wrap_pyfunction!(self_check, m)?)?;
    Ok(())
}
