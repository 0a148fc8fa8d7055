//! Command line front end. Every command reads a model file, runs one
//! analysis and writes CSV/JSON artifacts plus a manifest into `--out`.

mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::davies::{ModelFile, WeakCouplingModel};
use crate::error::{Error, Result};
use crate::fcs::{
    cgf_gradient0, cgf_hessian0, cgf_scan, convexity_residual, energetic_symmetry_residuals, entropy_production_rate,
    es_symmetry_residual, fdt_residual, finite_time_cgf, fluxes, green_kubo_matrix, kinetic_coefficients,
    lebowitz_spohn, linspace, rate_function, tensor_grid, translation_symmetry_residual, SymmetryReport,
    TransportMatrix,
};
use crate::liouville::Operator;
use crate::tolerances::Tolerances;
use crate::unravel::{
    empirical_clt_check, sample_ensemble, sample_trajectories, write_trajectories_csv, EnsembleStats, Estimate,
};

pub use output::{float, fmt_float, Output};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "QDSFLUCT_THREADS";
/// Translation amounts λ used by `symmetry-check`.
pub const TRANSLATIONS: [f64; 3] = [-1.0, 0.5, 2.0];
/// `compare` flags a grid point when the estimate is this many standard
/// errors away from the exact value.
pub const COMPARE_Z: f64 = 3.0;

#[derive(Parser, Debug)]
#[command(name = "qdsfluct", version, about = "Entropic full counting statistics of weak-coupling open quantum systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check every structural hypothesis of the model.
    Validate(Options),
    /// e(α) on a tensor grid.
    CgfScan(Options),
    /// Rate function by Legendre-Fenchel transform of e.
    RateFunction(Options),
    /// Evans-Searles, translation and energetic symmetries on a grid.
    SymmetryCheck(Options),
    /// Steady state and the entropy production rate.
    SteadyState(Options),
    /// Mean entropy and energy fluxes, entropy production.
    Fluxes(Options),
    /// Kinetic coefficients by four routes at equilibrium.
    LinearResponse(Options),
    /// Quantum-jump sampling of the entropy rates.
    Unravel(Options),
    /// Unraveling estimates of ⟨e^{−tα·ς}⟩ against the deformed semigroup.
    Compare(Options),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::CgfScan(_) => "cgf-scan",
            Command::RateFunction(_) => "rate-function",
            Command::SymmetryCheck(_) => "symmetry-check",
            Command::SteadyState(_) => "steady-state",
            Command::Fluxes(_) => "fluxes",
            Command::LinearResponse(_) => "linear-response",
            Command::Unravel(_) => "unravel",
            Command::Compare(_) => "compare",
        }
    }

    pub fn options(&self) -> &Options {
        match self {
            Command::Validate(o)
            | Command::CgfScan(o)
            | Command::RateFunction(o)
            | Command::SymmetryCheck(o)
            | Command::SteadyState(o)
            | Command::Fluxes(o)
            | Command::LinearResponse(o)
            | Command::Unravel(o)
            | Command::Compare(o) => o,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Deformation box, one lo:hi per reservoir or a single lo:hi for all.
    #[arg(long = "alpha-box", allow_hyphen_values = true)]
    pub alpha_box: Option<String>,
    /// Grid points per axis.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Time horizon for sampling.
    #[arg(long)]
    pub t: Option<f64>,
    /// Number of trajectories.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "qdsfluct-out")]
    pub out: PathBuf,
    /// Tolerance override name=value; repeatable.
    #[arg(long = "tol")]
    pub tol: Vec<String>,
    /// Run despite failed hypotheses; let `compare` overwrite its outputs.
    #[arg(long)]
    pub force: bool,
    /// Entropy-rate vector v1,v2,... at which to evaluate the rate
    /// function; repeatable.
    #[arg(long = "varsigma", allow_hyphen_values = true)]
    pub varsigma: Vec<String>,
    /// Also dump every trajectory (unravel).
    #[arg(long)]
    pub trajectories: bool,
}

/// Fully resolved run configuration; hashed into the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub model_path: String,
    pub tolerances: Tolerances,
    pub alpha_lo: Vec<f64>,
    pub alpha_hi: Vec<f64>,
    pub resolution: usize,
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub varsigma: Vec<Vec<f64>>,
    pub trajectories: bool,
    pub force: bool,
}

struct Defaults {
    lo: f64,
    hi: f64,
    resolution: usize,
    t: f64,
    samples: usize,
}

fn defaults(command: &str) -> Defaults {
    match command {
        "compare" => Defaults { lo: -0.2, hi: 0.2, resolution: 3, t: 5.0, samples: 10_000 },
        "symmetry-check" => Defaults { lo: -1.0, hi: 2.0, resolution: 11, t: 5.0, samples: 10_000 },
        _ => Defaults { lo: -1.0, hi: 2.0, resolution: 21, t: 5.0, samples: 10_000 },
    }
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad number {s:?} in {what}")))
        })
        .collect()
}

/// `a:b` for every axis, or one `a:b` shared by all axes.
pub fn parse_alpha_box(text: &str, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let ranges: Vec<(f64, f64)> = text
        .split(',')
        .map(|r| {
            let (a, b) = r
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("expected lo:hi in --alpha-box, got {r:?}")))?;
            let lo = parse_floats(a, "--alpha-box")?[0];
            let hi = parse_floats(b, "--alpha-box")?[0];
            if lo > hi {
                return Err(Error::InvalidArgument(format!("empty range {r:?} in --alpha-box")));
            }
            Ok((lo, hi))
        })
        .collect::<Result<_>>()?;
    let ranges = match ranges.len() {
        1 => vec![ranges[0]; m],
        n if n == m => ranges,
        n => return Err(Error::InvalidArgument(format!("--alpha-box has {n} ranges for {m} reservoirs"))),
    };
    Ok(ranges.into_iter().unzip())
}

impl RunConfig {
    pub fn resolve(command: &str, o: &Options, reservoirs: usize) -> Result<Self> {
        let mut tolerances = Tolerances::default();
        for spec in &o.tol {
            tolerances.apply_override(spec)?;
        }
        let d = defaults(command);
        let (alpha_lo, alpha_hi) = match &o.alpha_box {
            Some(text) => parse_alpha_box(text, reservoirs)?,
            None => (vec![d.lo; reservoirs], vec![d.hi; reservoirs]),
        };
        let resolution = o.resolution.unwrap_or(d.resolution);
        if resolution < 2 {
            return Err(Error::InvalidArgument("--resolution must be at least 2".into()));
        }
        let t = o.t.unwrap_or(d.t);
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("--t must be positive, got {t}")));
        }
        let samples = o.samples.unwrap_or(d.samples);
        if samples == 0 {
            return Err(Error::InvalidArgument("--samples must be at least 1".into()));
        }
        let varsigma = o
            .varsigma
            .iter()
            .map(|v| {
                let x = parse_floats(v, "--varsigma")?;
                if x.len() != reservoirs {
                    return Err(Error::InvalidArgument(format!("--varsigma {v:?} needs {reservoirs} entries")));
                }
                Ok(x)
            })
            .collect::<Result<_>>()?;
        Ok(RunConfig {
            command: command.into(),
            model_path: o.model.display().to_string(),
            tolerances,
            alpha_lo,
            alpha_hi,
            resolution,
            t,
            samples,
            seed: o.seed,
            varsigma,
            trajectories: o.trajectories,
            force: o.force,
        })
    }

    fn grid(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> =
            self.alpha_lo.iter().zip(&self.alpha_hi).map(|(&a, &b)| linspace(a, b, self.resolution)).collect();
        tensor_grid(&axes)
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_model(o: &Options) -> Result<(String, ModelFile)> {
    let text = std::fs::read_to_string(&o.model)?;
    let file = ModelFile::from_json(&text).map_err(|e| locate(e, &o.model))?;
    Ok((text, file))
}

/// Prefixes the file name to the field path of a model error.
fn locate(e: Error, file: &std::path::Path) -> Error {
    match e {
        Error::Model { path, message } if path == "<model>" => Error::Model { path: file.display().to_string(), message },
        Error::Model { path, message } => Error::Model { path: format!("{}: {path}", file.display()), message },
        other => other,
    }
}

/// Runs one command; Ok carries the exit code of a completed run.
pub fn execute(command: &Command) -> Result<i32> {
    let o = command.options();
    let (text, file) = load_model(o)?;
    let reservoirs = file.reservoirs.len();
    let config = RunConfig::resolve(command.name(), o, reservoirs)?;
    let model = file.build(&config.tolerances).map_err(|e| locate(e, &o.model))?;
    let mut out = Output::new(&o.out, &config, &text)?;

    if let Command::Validate(_) = command {
        return validate(&model, &mut out);
    }
    let failed = required_failures(&model)?;
    if !failed.is_empty() && !config.force {
        return Err(Error::Hypothesis(format!("required checks failed: {}; rerun with --force", failed.join(", "))));
    }
    match command {
        Command::Validate(_) => unreachable!(),
        Command::CgfScan(_) => run_cgf_scan(&model, &config, &mut out),
        Command::RateFunction(_) => run_rate_function(&model, &config, &mut out),
        Command::SymmetryCheck(_) => run_symmetry_check(&model, &config, &mut out),
        Command::SteadyState(_) => run_steady_state(&model, &mut out),
        Command::Fluxes(_) => run_fluxes(&model, &mut out),
        Command::LinearResponse(_) => run_linear_response(&model, &mut out),
        Command::Unravel(_) => run_unravel(&model, &config, &mut out),
        Command::Compare(_) => run_compare(&model, &config, &mut out),
    }
}

fn required_failures(model: &WeakCouplingModel) -> Result<Vec<String>> {
    Ok(model
        .validation_reports()?
        .into_iter()
        .filter(|(r, required)| *required && !r.passed)
        .map(|(r, _)| r.name)
        .collect())
}

fn pass(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| Value::Array(r.iter().map(|&x| float(x)).collect())).collect())
}

fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| float(x)).collect())
}

fn estimate_json(e: &Estimate) -> Value {
    json!({"value": float(e.value), "std_error": float(e.std_error), "ci_low": float(e.ci_low), "ci_high": float(e.ci_high)})
}

fn operator_json(x: &Operator) -> Value {
    let d = x.dim();
    let part = |f: fn(&crate::liouville::C64) -> f64| {
        Value::Array((0..d).map(|i| Value::Array((0..d).map(|j| float(f(&x.get(i, j)))).collect())).collect())
    };
    json!({"dim": d, "re": part(|z| z.re), "im": part(|z| z.im)})
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(|&x| fmt_float(x)).collect::<Vec<_>>().join(",")
}

fn validate(model: &WeakCouplingModel, out: &mut Output) -> Result<i32> {
    let mut rows = Vec::new();
    let mut ok = true;
    let mut checks: Vec<(crate::lindblad::PropertyReport, bool)> = model.validation_reports()?;
    for (j, sub) in model.subs.iter().enumerate() {
        for r in sub.check_invariants(&model.tol)? {
            let mut r = r;
            r.name = format!("reservoirs[{j}]: {}", r.name);
            checks.push((r, false));
        }
    }
    for (r, required) in &checks {
        ok &= r.passed || !required;
        println!(
            "{} {} residual {} ({})",
            pass(r.passed),
            r.name,
            fmt_float(r.residual),
            if *required { "required" } else { "informational" }
        );
        rows.push(json!({
            "name": r.name, "passed": r.passed, "residual": float(r.residual),
            "required": required, "details": r.details,
        }));
    }
    let flags = model.flags;
    out.write_json(
        "validation.json",
        &json!({"flags": {"tri": flags.tri, "er": flags.er, "kms": flags.kms}, "passed": ok, "checks": rows}),
    )?;
    out.finish()?;
    Ok(if ok { 0 } else { 2 })
}

fn alpha_header(m: usize) -> Vec<String> {
    if m == 1 {
        vec!["alpha".into()]
    } else {
        (1..=m).map(|j| format!("alpha_{j}")).collect()
    }
}

fn run_cgf_scan(model: &WeakCouplingModel, config: &RunConfig, out: &mut Output) -> Result<i32> {
    let scan = cgf_scan(model, &config.alpha_lo, &config.alpha_hi, config.resolution)?;
    let mut csv = alpha_header(model.num_reservoirs()).join(",") + ",e,gap\n";
    for ((p, v), g) in scan.points.iter().zip(&scan.values).zip(&scan.gaps) {
        csv += &format!("{},{},{}\n", csv_row(p), fmt_float(*v), fmt_float(*g));
    }
    out.write_text("cgf_scan.csv", &csv)?;
    let convexity = convexity_residual(&scan);
    let min_gap = scan.gaps.iter().copied().fold(f64::INFINITY, f64::min);
    out.write_json(
        "cgf_scan.json",
        &json!({
            "points": scan.points.len(),
            "gradient0": floats(&scan.gradient0),
            "hessian0": matrix_json(&scan.hessian0),
            "mean_entropy_rates": floats(&scan.mean_rates()),
            "convexity_residual": float(convexity),
            "min_spectral_gap": float(min_gap),
        }),
    )?;
    println!(
        "scanned {} points, convexity residual {}, smallest gap {}",
        scan.points.len(),
        fmt_float(convexity),
        fmt_float(min_gap)
    );
    out.finish()?;
    Ok(0)
}

fn run_rate_function(model: &WeakCouplingModel, config: &RunConfig, out: &mut Output) -> Result<i32> {
    let resolution = config.resolution.max(3);
    let scan = cgf_scan(model, &config.alpha_lo, &config.alpha_hi, resolution)?;
    let mean = scan.mean_rates();
    let m = mean.len();
    let mut points = config.varsigma.clone();
    if points.is_empty() {
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        // the line through the mean, or the first axis at equilibrium
        let dir: Vec<f64> = if norm > 1e-9 {
            mean.clone()
        } else {
            (0..m).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect()
        };
        points = linspace(-1.5, 1.5, 2 * resolution + 1).iter().map(|s| dir.iter().map(|d| s * d).collect()).collect();
    }
    let mut csv = (1..=m).map(|j| format!("varsigma_{j}")).collect::<Vec<_>>().join(",") + ",I\n";
    let mut rows = Vec::new();
    for v in &points {
        let (value, status) = match rate_function(model, &scan, v) {
            Ok(r) => (r.value, "ok".to_string()),
            Err(Error::ScanBoxTooSmall(msg)) => (f64::NAN, format!("scan box too small: {msg}")),
            Err(e) => return Err(e),
        };
        csv += &format!("{},{}\n", csv_row(v), fmt_float(value));
        rows.push(json!({"varsigma": floats(v), "I": float(value), "status": status}));
    }
    out.write_text("rate_function.csv", &csv)?;
    let at_mean = rate_function(model, &scan, &mean)?;
    let reflected: Vec<f64> = mean.iter().map(|x| -x).collect();
    let at_reflected = rate_function(model, &scan, &reflected)?;
    let symmetry = at_reflected.value - at_mean.value - mean.iter().sum::<f64>();
    out.write_json(
        "rate_function.json",
        &json!({
            "mean_entropy_rates": floats(&mean),
            "I_at_mean": float(at_mean.value),
            "I_at_reflected_mean": float(at_reflected.value),
            "symmetry_residual": float(symmetry),
            "points": rows,
        }),
    )?;
    println!("I(mean) = {}, I(-mean) - I(mean) - 1.mean = {}", fmt_float(at_mean.value), fmt_float(symmetry));
    out.finish()?;
    Ok(0)
}

fn report_json(r: &SymmetryReport) -> Value {
    json!({
        "name": r.name, "residual": float(r.residual), "threshold": float(r.threshold),
        "asserted": r.asserted, "passed": r.passed(),
    })
}

fn run_symmetry_check(model: &WeakCouplingModel, config: &RunConfig, out: &mut Output) -> Result<i32> {
    let grid = config.grid();
    let es = es_symmetry_residual(model, &grid)?;
    let tr = translation_symmetry_residual(model, &grid, &TRANSLATIONS)?;
    let (shift, reflect) = energetic_symmetry_residuals(model, &grid, &TRANSLATIONS)?;
    let reports = [es, tr.cgf, tr.spectrum, tr.similarity, shift, reflect];
    let mut csv = String::from("name,residual,threshold,asserted,passed\n");
    let mut ok = true;
    for r in &reports {
        let verdict = r.passed();
        ok &= verdict != Some(false);
        let shown = match verdict {
            Some(b) => pass(b),
            None => "REPORT",
        };
        println!("{shown} {} residual {}", r.name, fmt_float(r.residual));
        csv += &format!(
            "{},{},{},{},{}\n",
            r.name,
            fmt_float(r.residual),
            fmt_float(r.threshold),
            r.asserted,
            verdict.map_or("n/a".to_string(), |b| b.to_string())
        );
    }
    out.write_text("symmetry.csv", &csv)?;
    out.write_json(
        "symmetry.json",
        &json!({
            "grid_points": grid.len(),
            "translations": floats(&TRANSLATIONS),
            "reports": reports.iter().map(report_json).collect::<Vec<_>>(),
            "passed": ok,
        }),
    )?;
    out.finish()?;
    Ok(if ok { 0 } else { 3 })
}

fn run_steady_state(model: &WeakCouplingModel, out: &mut Output) -> Result<i32> {
    let f = fluxes(model)?;
    let rho = &f.rho_plus;
    let sigma = entropy_production_rate(model)?;
    out.write_json(
        "steady_state.json",
        &json!({
            "rho_plus": operator_json(rho),
            "trace": float(rho.trace().re),
            "min_eigenvalue": float(rho.min_eigenvalue()),
            "entropy_production_rate": float(sigma),
        }),
    )?;
    println!(
        "steady state: trace {}, smallest eigenvalue {}",
        fmt_float(rho.trace().re),
        fmt_float(rho.min_eigenvalue())
    );
    out.finish()?;
    Ok(0)
}

fn run_fluxes(model: &WeakCouplingModel, out: &mut Output) -> Result<i32> {
    let f = fluxes(model)?;
    let entropy = f.mean_entropy_fluxes();
    let energy = f.mean_energy_fluxes();
    let rates = f.mean_entropy_rates();
    let sigma = entropy_production_rate(model)?;
    let grad = cgf_gradient0(model)?;
    let betas = model.betas();
    let mut csv = String::from("reservoir,beta,entropy_flux,energy_flux,mean_entropy_rate\n");
    for j in 0..betas.len() {
        csv += &format!("{j},{}\n", csv_row(&[betas[j], entropy[j], energy[j], rates[j]]));
    }
    out.write_text("fluxes.csv", &csv)?;
    out.write_json(
        "fluxes.json",
        &json!({
            "entropy_fluxes": floats(&entropy),
            "energy_fluxes": floats(&energy),
            "mean_entropy_rates": floats(&rates),
            "energy_flux_sum": float(energy.iter().sum()),
            "entropy_production_rate": float(sigma),
            "cgf_gradient": {
                "perturbative": floats(&grad.perturbative),
                "finite_difference": floats(&grad.finite_difference),
            },
        }),
    )?;
    println!("entropy production rate {}, energy flux sum {}", fmt_float(sigma), fmt_float(energy.iter().sum()));
    out.finish()?;
    Ok(0)
}

fn transport_json(t: &TransportMatrix) -> Value {
    json!({
        "method": t.method,
        "matrix": matrix_json(&t.l),
        "onsager_residual": float(t.onsager_residual()),
        "column_sum_residual": float(t.column_sum_residual()),
        "min_symmetric_eigenvalue": float(t.min_symmetric_eigenvalue()),
    })
}

fn run_linear_response(model: &WeakCouplingModel, out: &mut Output) -> Result<i32> {
    let beta0 = model
        .equilibrium_beta()
        .ok_or_else(|| Error::NotEquilibrium(format!("inverse temperatures {:?} differ", model.betas())))?;
    let gk = green_kubo_matrix(model)?;
    let kinetic = kinetic_coefficients(model, beta0, 1e-4 * beta0)?;
    let ls = lebowitz_spohn(model)?;
    let fdt = fdt_residual(model)?;
    let routes = [&gk.integral, &gk.hessian, &kinetic, &ls];
    let mut spread = 0.0_f64;
    for a in routes {
        for b in routes {
            spread = spread.max((&a.l - &b.l).amax());
        }
    }
    let mut csv = String::from("method,j,k,value\n");
    for t in routes {
        let name = serde_json::to_value(t.method)?.as_str().unwrap_or_default().to_string();
        for j in 0..t.l.nrows() {
            for k in 0..t.l.ncols() {
                csv += &format!("{name},{j},{k},{}\n", fmt_float(t.l[(j, k)]));
            }
        }
    }
    out.write_text("linear_response.csv", &csv)?;
    out.write_json(
        "linear_response.json",
        &json!({
            "beta": float(beta0),
            "routes": routes.iter().map(|t| transport_json(t)).collect::<Vec<_>>(),
            "max_route_difference": float(spread),
            "fdt_residual": float(fdt),
        }),
    )?;
    println!("routes agree to {}, FDT residual {}", fmt_float(spread), fmt_float(fdt));
    out.finish()?;
    Ok(0)
}

fn run_unravel(model: &WeakCouplingModel, config: &RunConfig, out: &mut Output) -> Result<i32> {
    let f = fluxes(model)?;
    let m = model.num_reservoirs();
    let stats = if config.trajectories {
        let trajs = sample_trajectories(model, &f.rho_plus, config.t, config.samples, config.seed)?;
        let mut buf = Vec::new();
        write_trajectories_csv(&trajs, &mut buf)?;
        out.write_bytes("trajectories.csv", &buf)?;
        EnsembleStats::from_trajectories(&trajs, m, config.seed)
    } else {
        sample_ensemble(model, &f.rho_plus, config.t, config.samples, config.seed)?
    };
    let mut csv = String::from("trajectory_id,");
    csv += &(1..=m).map(|j| format!("varsigma_{j}")).collect::<Vec<_>>().join(",");
    csv += ",events\n";
    for (i, (s, n)) in stats.samples.iter().zip(&stats.event_counts).enumerate() {
        csv += &format!("{i},{},{n}\n", csv_row(s));
    }
    out.write_text("unravel_samples.csv", &csv)?;
    let means = stats.mean_rates();
    let exact = f.mean_entropy_rates();
    let hessian = cgf_hessian0(model)?.finite_difference;
    let clt = empirical_clt_check(&stats, &hessian);
    let inv_beta: Vec<f64> = model.betas().iter().map(|b| 1.0 / b).collect();
    out.write_json(
        "unravel_summary.json",
        &json!({
            "t": float(config.t),
            "samples": stats.len(),
            "seed": config.seed,
            "mean_entropy_rates": means.iter().map(estimate_json).collect::<Vec<_>>(),
            "exact_mean_entropy_rates": floats(&exact),
            "mean_events": estimate_json(&stats.mean_events()),
            "clt": {"passed": clt.passed, "residual": float(clt.residual), "details": clt.details},
            "inverse_temperature_variance": float(stats.directional_variance(&inv_beta)),
        }),
    )?;
    for (j, e) in means.iter().enumerate() {
        println!(
            "varsigma_{}: {} +- {} (exact {})",
            j + 1,
            fmt_float(e.value),
            fmt_float(e.std_error),
            fmt_float(exact[j])
        );
    }
    out.finish()?;
    Ok(0)
}

fn run_compare(model: &WeakCouplingModel, config: &RunConfig, out: &mut Output) -> Result<i32> {
    out.refuse_overwrite(&["compare.csv", "compare.json"], config.force)?;
    let f = fluxes(model)?;
    let rho = &f.rho_plus;
    let grid = config.grid();
    let stats = sample_ensemble(model, rho, config.t, config.samples, config.seed)?;
    let estimates = stats.laplace(&grid);
    let m = model.num_reservoirs();
    let mut csv = alpha_header(m).join(",") + ",exact,estimate,std_error,ci_low,ci_high,z,pass\n";
    let mut rows = Vec::new();
    let mut ok = true;
    for (a, e) in grid.iter().zip(&estimates) {
        let exact = finite_time_cgf(model, rho, config.t, a)?.exp();
        let z = e.z_score(exact);
        let passed = z <= COMPARE_Z;
        ok &= passed;
        csv += &format!("{},{},{passed}\n", csv_row(a), csv_row(&[exact, e.value, e.std_error, e.ci_low, e.ci_high, z]));
        rows.push(json!({"alpha": floats(a), "exact": float(exact), "estimate": estimate_json(e), "z": float(z), "passed": passed}));
    }
    out.write_text("compare.csv", &csv)?;
    out.write_json(
        "compare.json",
        &json!({"t": float(config.t), "samples": stats.len(), "seed": config.seed, "z_threshold": float(COMPARE_Z), "points": rows, "passed": ok}),
    )?;
    println!("{} of {} grid points within {COMPARE_Z} standard errors", rows.iter().filter(|r| r["passed"] == true).count(), rows.len());
    out.finish()?;
    Ok(if ok { 0 } else { 3 })
}
