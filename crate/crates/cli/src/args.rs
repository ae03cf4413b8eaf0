use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kw_core::models::{GrowthModel, Kernel, Table, WaveParams};
use kw_core::semiwavefront::IterationConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "kw", version, about = "Travelling-wave profiles, characteristic roots and region sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characteristic roots at both equilibria
    Roots(Flags),
    /// Heteroclinic of the planar weak-kernel limit
    Heteroclinic(Flags),
    /// Finite-speed profile of the weak-kernel system
    CsProfile(Flags),
    /// Discrete-delay limit profile
    LimitProfile(Flags),
    /// Discrete-delay profile at finite speed
    FiniteProfile(Flags),
    /// The zeta constant of the discrete-delay model
    Zeta(Flags),
    /// Cubic test-function criterion
    TestFunction(Flags),
    /// Boundary curves over a gamma range
    Region {
        kind: RegionKind,
        #[command(flatten)]
        flags: Flags,
    },
    /// Monotone iteration of the integral operator
    Iterate(Flags),
    /// Iterate, then compare tail rates with the characteristic roots
    CheckAsymptotics(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Roots(_) => "roots",
            Command::Heteroclinic(_) => "heteroclinic",
            Command::CsProfile(_) => "cs-profile",
            Command::LimitProfile(_) => "limit-profile",
            Command::FiniteProfile(_) => "finite-profile",
            Command::Zeta(_) => "zeta",
            Command::TestFunction(_) => "test-function",
            Command::Region { .. } => "region",
            Command::Iterate(_) => "iterate",
            Command::CheckAsymptotics(_) => "check-asymptotics",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Region { flags, .. } => flags,
            Command::Roots(f)
            | Command::Heteroclinic(f)
            | Command::CsProfile(f)
            | Command::LimitProfile(f)
            | Command::FiniteProfile(f)
            | Command::Zeta(f)
            | Command::TestFunction(f)
            | Command::Iterate(f)
            | Command::CheckAsymptotics(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    TauSharp,
    TauStar,
    Zeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Food,
    Quad,
    Kpp,
    /// Food-limited growth with the discrete-delay kernel
    Discrete,
    /// Food-limited growth with the weak-generic kernel
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `G = 1 - u`, local kernel
    Kpp,
}

/// Flags shared by every subcommand. Values in a `--json` file override them.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// Value, or `lo:hi:step` for `region`
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "number_or_string")]
    pub gamma: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelName>,
    /// `dirac`, `discrete`, `weak` or `table:FILE`
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Quadratic growth coefficients `a + b u - (a + b) u^2`
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_a: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_b: Option<f64>,
    /// Test-function parameter
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long, env = "KW_SEED_TOL")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// JSON file whose fields override the flags; may also carry `params`
    /// (a full model document) and `config` (an iteration config)
    #[arg(long)]
    #[serde(skip)]
    pub json: Option<PathBuf>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<WaveParams>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<IterationConfig>,
}

fn number_or_string<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        N(f64),
        S(String),
    }
    Ok(Option::<V>::deserialize(d)?.map(|v| match v {
        V::N(x) => format!("{x}"),
        V::S(s) => s,
    }))
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f; })*
    };
}

impl Flags {
    /// Flags with the `--json` file merged over them.
    pub fn resolved(&self) -> Result<Flags, CliError> {
        let mut out = self.clone();
        if let Some(path) = &self.json {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            let file: Flags = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("malformed JSON in {}: {e}", path.display())))?;
            overlay!(out, file, gamma, tau, c, eps, model, kernel, quad_a, quad_b, a, tol, preset, out, jobs, params, config);
        }
        Ok(out)
    }

    pub fn gamma(&self) -> Result<f64, CliError> {
        let g = self.gamma.as_deref().ok_or_else(|| CliError::Input("--gamma is required".into()))?;
        g.parse().map_err(|_| CliError::Input(format!("--gamma expects a number, got {g:?}")))
    }

    /// `lo:hi:step`, or a single value.
    pub fn gamma_range(&self) -> Result<Vec<f64>, CliError> {
        let g = self.gamma.as_deref().ok_or_else(|| CliError::Input("--gamma is required".into()))?;
        let bad = || CliError::Input(format!("--gamma expects lo:hi:step, got {g:?}"));
        let parts: Vec<f64> = g.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        match parts[..] {
            [x] => Ok(vec![x]),
            [lo, hi, step] if step > 0.0 && hi >= lo => {
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| lo + k as f64 * step).collect())
            }
            _ => Err(bad()),
        }
    }

    pub fn need(v: Option<f64>, name: &str) -> Result<f64, CliError> {
        v.ok_or_else(|| CliError::Input(format!("--{name} is required")))
    }

    pub fn tau(&self) -> Result<f64, CliError> {
        Flags::need(self.tau, "tau")
    }

    pub fn c(&self) -> Result<f64, CliError> {
        Flags::need(self.c, "c")
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("kw-out"))
    }

    fn growth(&self) -> Result<GrowthModel, CliError> {
        Ok(match self.model {
            Some(ModelName::Kpp) => GrowthModel::Kpp,
            Some(ModelName::Quad) => {
                GrowthModel::quadratic(Flags::need(self.quad_a, "quad-a")?, Flags::need(self.quad_b, "quad-b")?)?
            }
            _ => GrowthModel::food_limited(self.gamma()?)?,
        })
    }

    fn kernel(&self) -> Result<Kernel, CliError> {
        let spec = match (self.kernel.as_deref(), self.model) {
            (Some(k), _) => k.to_string(),
            (None, Some(ModelName::Discrete)) => "discrete".into(),
            (None, Some(ModelName::Weak)) => "weak".into(),
            (None, _) => "dirac".into(),
        };
        Ok(match spec.as_str() {
            "dirac" => Kernel::DiracSpatial { k1: None },
            "discrete" => Kernel::DiscreteDelay { tau: self.tau()? },
            "weak" => Kernel::WeakGeneric { tau: self.tau()? },
            s if s.starts_with("table:") => Kernel::TabulatedN { table: read_table(Path::new(&s[6..]))? },
            s => return Err(CliError::Input(format!("unknown kernel {s:?}; use dirac, discrete, weak or table:FILE"))),
        })
    }

    /// Model assembled from `params`, a preset, or the individual flags.
    pub fn wave_params(&self) -> Result<WaveParams, CliError> {
        if let Some(p) = &self.params {
            let mut p = p.clone();
            if let Some(c) = self.c {
                p.c = c;
            }
            p.validate()?;
            return Ok(p);
        }
        let (growth, kernel) = match self.preset {
            Some(Preset::Kpp) => (GrowthModel::Kpp, Kernel::DiracSpatial { k1: None }),
            None => (self.growth()?, self.kernel()?),
        };
        Ok(WaveParams::new(growth, kernel, self.c()?)?)
    }
}

/// `s,density` rows (header optional) or a JSON `{"s": [...], "density": [...]}`.
fn read_table(path: &Path) -> Result<Table, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let table = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed table {}: {e}", path.display())))?
    } else {
        let (mut s, mut density) = (Vec::new(), Vec::new());
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            match (cols.first().map(|x| x.parse::<f64>()), cols.get(1).map(|x| x.parse::<f64>())) {
                (Some(Ok(a)), Some(Ok(b))) if cols.len() == 2 => {
                    s.push(a);
                    density.push(b);
                }
                _ if k == 0 => continue,
                _ => return Err(CliError::Input(format!("{}:{}: expected `s,density`", path.display(), k + 1))),
            }
        }
        Table { s, density }
    };
    table.validate()?;
    Ok(table)
}
