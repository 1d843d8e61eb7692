use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lgasym::asymptotics::{asymptotic_estimate, correction_direct, gamma_k, normalised_exact, ratio_to_estimate};
use lgasym::correlators::{correlator, genus_of, intersection_number};
use lgasym::exact::{Multiplicities, Scalar};
use lgasym::harness::{fit_rate_to_targets, last_relative_error, run_experiment, selfcheck, ExperimentKind, ExperimentSpec, Pattern};
use lgasym::wave::{coefficients, WaveModel};
use lgasym::{Error, Result};

#[derive(Parser)]
#[command(name = "lgasym", version, about = "Exact intersection numbers and their large-genus asymptotics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Wave-function coefficient table as JSON.
    Wave {
        #[arg(long)]
        model: String,
        #[arg(long)]
        r: Option<u32>,
        #[arg(long)]
        order: usize,
    },
    /// ψ-class intersection number ⟨τ_{d_1} ⋯ τ_{d_n}⟩.
    Psi {
        #[arg(long)]
        g: Option<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<u32>,
    },
    /// Θ-class intersection number.
    Theta {
        #[arg(long)]
        g: Option<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<u32>,
    },
    /// r-spin intersection number ⟨τ_{d_1,a_1} ⋯⟩.
    Rspin {
        #[arg(long)]
        r: u32,
        #[arg(long)]
        g: Option<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<u32>,
    },
    /// Full table of W_{g,n}.
    Correlator {
        #[arg(long)]
        model: String,
        #[arg(long)]
        r: Option<u32>,
        #[arg(long)]
        g: u32,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Exact subleading coefficient: α_k / β_k from (n, p) for airy and
    /// bessel, γ_k^{(r,α)} from (d, a) for rairy.
    AsymCoeff {
        #[arg(long)]
        model: String,
        #[arg(long)]
        r: Option<u32>,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        p: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        #[arg(long, value_delimiter = ',')]
        d: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        a: Vec<u32>,
    },
    /// Truncated large-genus estimate with its sector breakdown.
    Estimate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        r: Option<u32>,
        #[arg(long)]
        g: Option<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        a: Vec<u32>,
        #[arg(long = "K", default_value_t = 0)]
        k: u32,
        /// Also compute the exact value and print exact/estimate.
        #[arg(long)]
        compare: bool,
    },
    /// Convergence experiment; writes CSV to --out or stdout.
    Experiment {
        kind: String,
        /// TOML experiment spec; command-line flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        r: Option<u32>,
        #[arg(long = "K")]
        k: Option<u32>,
        #[arg(long)]
        g_min: Option<u32>,
        #[arg(long)]
        g_max: Option<u32>,
        #[arg(long)]
        g_step: Option<u32>,
        /// `d=0,3g-1[;a=1,2]` or `rd+a=10g-5`.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        prec: Option<u32>,
        #[arg(long)]
        grid: Option<usize>,
        /// Assert the last row is within this relative distance of its target.
        #[arg(long)]
        tol: Option<f64>,
        /// Assert the fitted log-log slope of |value − target| equals this.
        #[arg(long, allow_negative_numbers = true)]
        slope: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        slope_tol: f64,
        /// Seed of the randomized property checks run alongside.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Randomized property checks.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

fn check_genus(model: WaveModel, g: Option<u32>, d: &[u32], a: &[u32]) -> Result<()> {
    let got = genus_of(model, d, a)?;
    match g {
        Some(g) if g != got => Err(Error::Domain(format!("labels belong to genus {got}, not {g}"))),
        _ => Ok(()),
    }
}

fn default_pattern(kind: ExperimentKind, model: WaveModel) -> Option<Pattern> {
    use lgasym::wave::ModelKind;
    match (kind, model.kind) {
        (ExperimentKind::L, _) => None,
        (_, ModelKind::Airy) => Some(Pattern::Linear { d: vec![[3, -2]], a: None }),
        (_, ModelKind::Bessel) => Some(Pattern::Linear { d: vec![[1, -1]], a: None }),
        (_, ModelKind::RAiry(r)) => Some(Pattern::rspin_one_point(r)),
    }
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    kind: &str,
    config: Option<PathBuf>,
    model: Option<String>,
    r: Option<u32>,
    k: Option<u32>,
    g_min: Option<u32>,
    g_max: Option<u32>,
    g_step: Option<u32>,
    pattern: Option<String>,
    out: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
    prec: Option<u32>,
    grid: Option<usize>,
) -> Result<ExperimentSpec> {
    let kind: ExperimentKind = kind.parse()?;
    let mut spec = match config {
        Some(path) => {
            let s = ExperimentSpec::from_toml(&std::fs::read_to_string(path)?)?;
            if s.kind != kind {
                return Err(Error::Config(format!("config describes experiment {}, command asks for {kind}", s.kind)));
            }
            s
        }
        None => {
            let m = model.clone().ok_or_else(|| Error::Config("--model is required without --config".into()))?;
            let lo = g_min.ok_or_else(|| Error::Config("--g-min is required without --config".into()))?;
            let hi = g_max.ok_or_else(|| Error::Config("--g-max is required without --config".into()))?;
            ExperimentSpec::new(kind, &m, r, None, 0, lo, hi)
        }
    };
    if let Some(m) = model {
        spec.model = m;
    }
    if r.is_some() {
        spec.r = r;
    }
    if let Some(k) = k {
        spec.k = k;
    }
    if let Some(v) = g_min {
        spec.g_min = v;
    }
    if let Some(v) = g_max {
        spec.g_max = v;
    }
    if let Some(v) = g_step {
        spec.g_step = v;
    }
    if let Some(p) = pattern {
        spec.pattern = Some(p.parse()?);
    }
    if spec.pattern.is_none() {
        spec.pattern = default_pattern(kind, spec.wave_model()?);
    }
    if out.is_some() {
        spec.output = out;
    }
    if cache_dir.is_some() {
        spec.cache_dir = cache_dir;
    }
    if let Some(p) = prec {
        spec.prec = p;
    }
    if let Some(gr) = grid {
        spec.grid = gr;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Wave { model, r, order } => {
            let m = WaveModel::parse(&model, r)?;
            println!("{}", serde_json::to_string_pretty(&*coefficients(m, order)?)?);
        }
        Cmd::Psi { g, d } => {
            let a = vec![1; d.len()];
            check_genus(WaveModel::airy(), g, &d, &a)?;
            println!("{}", intersection_number(WaveModel::airy(), &d, None)?);
        }
        Cmd::Theta { g, d } => {
            let a = vec![1; d.len()];
            check_genus(WaveModel::bessel(), g, &d, &a)?;
            println!("{}", intersection_number(WaveModel::bessel(), &d, None)?);
        }
        Cmd::Rspin { r, g, d, a } => {
            let m = WaveModel::rairy(r)?;
            if a.len() != d.len() {
                return Err(Error::Config("--d and --a need the same length".into()));
            }
            check_genus(m, g, &d, &a)?;
            println!("{}", intersection_number(m, &d, Some(&a))?);
        }
        Cmd::Correlator { model, r, g, n, format } => {
            let p = correlator(WaveModel::parse(&model, r)?, g, n)?;
            match format {
                Format::Json => println!("{}", p.to_json()?),
                Format::Csv => print!("{}", p.to_csv()?),
            }
        }
        Cmd::AsymCoeff { model, r, k, n, p, alpha, d, a } => {
            let m = WaveModel::parse(&model, r)?;
            if m.r() == 2 && !matches!(m.kind, lgasym::wave::ModelKind::RAiry(_)) {
                let n = n.ok_or_else(|| Error::Config("--n is required".into()))?;
                println!("{}", correction_direct(m, k, &Multiplicities::from_list(n, &p)?)?);
            } else {
                if d.is_empty() || d.len() != a.len() {
                    return Err(Error::Config("rairy coefficients need --d and --a of equal length".into()));
                }
                let c = gamma_k(m.r(), alpha, k, &d, &a)?;
                match c.to_rational() {
                    Some(x) => println!("{x}"),
                    None => println!("{}", serde_json::to_string(&c)?),
                }
                let (re, im) = c.embed(128).to_f64();
                eprintln!("≈ {re} + {im} i");
            }
        }
        Cmd::Estimate { model, r, g, d, a, k, compare } => {
            let m = WaveModel::parse(&model, r)?;
            let av = if a.is_empty() { None } else { Some(a.as_slice()) };
            let est = asymptotic_estimate(m, &d, av, k)?;
            if let Some(g) = g {
                if g != est.g {
                    return Err(Error::Domain(format!("labels belong to genus {}, not {g}", est.g)));
                }
            }
            println!("{}", serde_json::to_string_pretty(&est)?);
            println!("value = {:.20e}", est.value());
            if compare {
                let x = normalised_exact(m, &d, av)?;
                println!("exact/estimate = {}", ratio_to_estimate(&x, &est));
            }
        }
        Cmd::Experiment {
            kind,
            config,
            model,
            r,
            k,
            g_min,
            g_max,
            g_step,
            pattern,
            out,
            cache_dir,
            prec,
            grid,
            tol,
            slope,
            slope_tol,
            seed,
        } => {
            let spec = experiment(&kind, config, model, r, k, g_min, g_max, g_step, pattern, out, cache_dir, prec, grid)?;
            let t = run_experiment(&spec)?;
            if spec.output.is_none() {
                print!("{}", t.to_csv_string()?);
            }
            let mut ok = true;
            if let Some(tol) = tol {
                let e = last_relative_error(&t)?;
                let pass = e <= tol;
                eprintln!("{} last-row relative error {e:.3e} (tolerance {tol:.1e})", if pass { "PASS" } else { "FAIL" });
                ok &= pass;
            }
            if let Some(want) = slope {
                let s = fit_rate_to_targets(&t)?;
                let pass = (s - want).abs() <= slope_tol;
                eprintln!("{} fitted slope {s:.3} (expected {want} ± {slope_tol})", if pass { "PASS" } else { "FAIL" });
                ok &= pass;
            }
            if let Some(seed) = seed {
                for c in selfcheck(seed, 100)? {
                    eprintln!("{} {} ({} cases)", if c.passed { "PASS" } else { "FAIL" }, c.name, c.cases);
                    ok &= c.passed;
                }
            }
            return Ok(ok);
        }
        Cmd::Selfcheck { seed, samples } => {
            let mut ok = true;
            for c in selfcheck(seed, samples)? {
                println!("{} {} ({} cases)", if c.passed { "PASS" } else { "FAIL" }, c.name, c.cases);
                ok &= c.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
