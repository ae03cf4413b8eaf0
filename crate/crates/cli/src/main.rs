mod args;
mod output;

use std::fmt;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use kw_core::discretedelay::{finite_speed_profile, limit_profile, zeta, zeta_region, zeta_region_csv, DEFAULT_SPAN};
use kw_core::planarflow::{
    boundary_region, boundary_region_csv, cs_profile, heteroclinic, test_function_check, HeteroclinicResult,
    TestFunction,
};
use kw_core::profile::Profile;
use kw_core::semiwavefront::{asymptotic_check, iterate_a, IterationConfig, IterationRun};
use kw_core::spectral::{chare_classify, chi_plus_roots, chi_plus_window, ehe_roots, kpp_roots};
use serde_json::json;

use args::{Cli, Command, Flags, ModelName, RegionKind};
use output::{write_manifest, Outputs, Plot};

const DEFAULT_TOL: f64 = 1e-10;
const REGION_TOL: f64 = 1e-2;
const LAUNCH: f64 = 1e-6;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(kw_core::Error),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(e) if e.is_precondition() => 2,
            _ => 3,
        }
    }

    fn status(&self) -> &'static str {
        if self.code() == 2 {
            "input-error"
        } else {
            "numerical-error"
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<kw_core::Error> for CliError {
    fn from(e: kw_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let raw = cli.command.flags();
    let (flags, merged) = match raw.resolved() {
        Ok(f) => (f, Ok(())),
        Err(e) => (raw.clone(), Err(e)),
    };
    let dir = flags.out_dir();
    let mut out = match Outputs::new(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.code());
        }
    };
    let result = merged.and_then(|_| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(flags.jobs.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Input(format!("--jobs: {e}")))?;
        pool.install(|| run(&cli.command, &flags, &mut out))
    });
    let params = serde_json::to_value(&flags).unwrap_or_default();
    let err = result.as_ref().err();
    if let Err(e) = write_manifest(&dir, cli.command.name(), params, &out.files, start.elapsed().as_secs_f64(), err) {
        eprintln!("error: {e}");
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: &Command, f: &Flags, out: &mut Outputs) -> Result<(), CliError> {
    let tol = f.tol_or(DEFAULT_TOL);
    match command {
        Command::Roots(_) => roots(f, tol, out),
        Command::Heteroclinic(_) => {
            let r = heteroclinic(f.gamma()?, f.tau()?, LAUNCH, tol)?;
            planar_outputs(&r, "heteroclinic", out)
        }
        Command::CsProfile(_) => {
            let eps = eps(f)?;
            let r = cs_profile(f.gamma()?, f.tau()?, eps, tol)?;
            planar_outputs(&r, &format!("cs-profile eps = {eps}"), out)
        }
        Command::LimitProfile(_) => {
            let p = limit_profile(f.gamma()?, f.tau()?, DEFAULT_SPAN, tol)?;
            profile_outputs(&p, "limit profile", out)
        }
        Command::FiniteProfile(_) => {
            let eps = eps(f)?;
            let p = finite_speed_profile(f.gamma()?, f.tau()?, eps, DEFAULT_SPAN, tol)?;
            profile_outputs(&p, &format!("finite-speed profile eps = {eps}"), out)
        }
        Command::Zeta(_) => {
            let (gamma, tau) = (f.gamma()?, f.tau()?);
            let z = zeta(gamma, tau)?;
            println!("zeta = {z}");
            out.json("zeta.json", &json!({ "gamma": gamma, "tau": tau, "zeta": z, "exceeds_one": z > 1.0 }))
        }
        Command::TestFunction(_) => {
            let a = Flags::need(f.a, "a")?;
            let v = test_function_check(f.gamma()?, f.tau()?, TestFunction::cubic(a))?;
            println!("holds = {}", v.holds);
            out.json("test-function.json", &v)
        }
        Command::Region { kind, .. } => region(*kind, f, out),
        Command::Iterate(_) => {
            let (run, _) = iterate(f)?;
            run_outputs(&run, out)?;
            converged(&run)
        }
        Command::CheckAsymptotics(_) => {
            let (run, params) = iterate(f)?;
            run_outputs(&run, out)?;
            let rep = asymptotic_check(&run.profile, &params)?;
            println!(
                "lambda = {}, decay_minus = {:?}, decay_plus = {:?}, nearest root = {:?}",
                rep.lambda, rep.decay_minus, rep.decay_plus, rep.nearest_root
            );
            out.json("asymptotics.json", &rep)?;
            converged(&run)
        }
    }
}

/// `--eps`, or `1/c^2` from `--c`.
fn eps(f: &Flags) -> Result<f64, CliError> {
    match (f.eps, f.c) {
        (Some(e), _) => Ok(e),
        (None, Some(c)) if c > 0.0 => Ok(1.0 / (c * c)),
        _ => Err(CliError::Input("--eps or a positive --c is required".into())),
    }
}

fn roots(f: &Flags, tol: f64, out: &mut Outputs) -> Result<(), CliError> {
    let c = f.c()?;
    let doc = match f.model {
        Some(m @ (ModelName::Discrete | ModelName::Weak)) => {
            let (gamma, tau, eps) = (f.gamma()?, f.tau()?, eps(f)?);
            let (lambda, mu) = kpp_roots(c, 1.0)?;
            let (equation, plus) = if m == ModelName::Discrete {
                ("delay", ehe_roots(gamma, tau, eps, tol)?)
            } else {
                ("weak", chare_classify(gamma, tau, eps)?)
            };
            println!("{equation}: {} real negative roots, class {:?}", plus.real_negative_count, plus.class);
            json!({ "c": c, "eps": eps, "minus": { "lambda": lambda, "mu": mu }, "plus_equation": equation, "plus": plus })
        }
        _ => {
            let params = f.wave_params()?;
            let (lambda, mu) = kpp_roots(c, params.growth.g0())?;
            let (lo, hi) = chi_plus_window(&params);
            let plus = chi_plus_roots(&params, lo, hi, tol)?;
            println!("chi_plus: {} real negative roots", plus.real_negative_count);
            json!({ "c": c, "minus": { "lambda": lambda, "mu": mu }, "plus_equation": "chi-plus", "window": [lo, hi], "plus": plus })
        }
    };
    out.json("roots.json", &doc)
}

fn profile_outputs(p: &Profile, title: &str, out: &mut Outputs) -> Result<(), CliError> {
    println!("shape = {:?}, sup = {}", p.shape, p.sup);
    out.profile("profile", p, title)
}

fn planar_outputs(r: &HeteroclinicResult, title: &str, out: &mut Outputs) -> Result<(), CliError> {
    profile_outputs(&r.profile, title, out)?;
    out.write("psi.csv", &r.psi_profile.to_csv())?;
    out.json(
        "result.json",
        &json!({
            "shape": r.shape,
            "phi_max": r.phi_max,
            "entry_direction": r.entry_direction,
            "crossings_of_one": r.crossings_of_one,
            "captured": r.captured,
        }),
    )
}

fn region(kind: RegionKind, f: &Flags, out: &mut Outputs) -> Result<(), CliError> {
    let gammas = f.gamma_range()?;
    let tol = f.tol_or(REGION_TOL);
    let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
    let plot = match kind {
        RegionKind::TauSharp | RegionKind::TauStar => {
            let rows = boundary_region(&gammas, tol);
            out.write("region.csv", &boundary_region_csv(&rows))?;
            let pts = |g: &dyn Fn(&kw_core::planarflow::BoundaryRow) -> f64| -> Vec<(f64, f64)> {
                rows.iter().map(|r| (r.gamma, g(r))).collect()
            };
            let (main, other) = match kind {
                RegionKind::TauSharp => (pts(&|r| nan(r.tau_sharp)), pts(&|r| nan(r.tau_star))),
                _ => (pts(&|r| nan(r.tau_star)), pts(&|r| nan(r.tau_sharp))),
            };
            let gaps = main.iter().filter(|p| p.1.is_nan()).count();
            println!("{} points, {gaps} gaps", rows.len());
            Plot::new("boundary curves", "gamma", "tau")
                .gapped(&main, "#1f4e9c", false)
                .gapped(&other, "#2a8c3c", false)
                .gapped(&pts(&|r| r.tau_upper), "#b03030", true)
        }
        RegionKind::Zeta => {
            let rows = zeta_region(&gammas, tol)?;
            out.write("region.csv", &zeta_region_csv(&rows))?;
            let lower: Vec<(f64, f64)> = rows.iter().map(|r| (r.gamma, nan(r.tau_zeta))).collect();
            let upper: Vec<(f64, f64)> = rows.iter().map(|r| (r.gamma, r.tau_upper)).collect();
            println!("{} points", rows.len());
            Plot::new("zeta > 1 region", "gamma", "tau").gapped(&lower, "#1f4e9c", false).gapped(&upper, "#b03030", true)
        }
    };
    out.write("region.svg", &plot.render())
}

fn iterate(f: &Flags) -> Result<(IterationRun, kw_core::models::WaveParams), CliError> {
    let params = f.wave_params()?;
    let mut config = match &f.config {
        Some(c) => c.clone(),
        None => IterationConfig::default_for(&params)?,
    };
    if let Some(t) = f.tol {
        config.tol = t;
    }
    let run = iterate_a(&config, &params, None)?;
    println!(
        "converged = {} after {} iterations, residual = {:e}, sup = {}",
        run.converged, run.iterations, run.equation_residual, run.profile.sup
    );
    Ok((run, params))
}

fn run_outputs(run: &IterationRun, out: &mut Outputs) -> Result<(), CliError> {
    out.profile("profile", &run.profile, "iterated front")?;
    out.json(
        "run.json",
        &json!({
            "converged": run.converged,
            "iterations": run.iterations,
            "equation_residual": run.equation_residual,
            "sandwich_excess": run.sandwich_excess,
            "bound": run.bound,
            "upper": run.upper,
            "lower": run.lower,
            "p": run.p,
        }),
    )?;
    let hist: String = run.residual_history.iter().enumerate().map(|(k, r)| format!("{k},{}\n", output::num(*r))).collect();
    out.write("residuals.csv", &format!("iteration,sup_change\n{hist}"))
}

fn converged(run: &IterationRun) -> Result<(), CliError> {
    if run.converged {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("no convergence within {} iterations", run.iterations)))
    }
}
