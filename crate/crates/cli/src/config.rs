//! Experiment configuration: a TOML file establishes the experiment, CLI
//! flags override individual keys. Defaults without either reproduce the
//! flagship setup: 50 channels at quarter-wavelength spacing, 100k
//! snapshots, 300 Hz source at pi/4, sigma_eps = sqrt(2)/2, q = 0.1.

use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use subslope::{
    ArrayGeometry, InterferenceRegime, LambdaSpec, NoiseConvention, ScenarioConfig, SolverConfig,
};

use crate::CommonArgs;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    scenario: ScenarioSection,
    interference: InterferenceSection,
    lambda: LambdaSection,
    solver: SolverSection,
    run: RunSection,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScenarioSection {
    channels: usize,
    spacing_wavelengths: f64,
    d: usize,
    snapshots: usize,
    signal_freq_hz: f64,
    sample_rate_hz: f64,
    doa_rad: f64,
    sigma_eps: f64,
    seed: u64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            channels: 50,
            spacing_wavelengths: 0.25,
            d: 1,
            snapshots: 100_000,
            signal_freq_hz: 300.0,
            sample_rate_hz: 10_000.0,
            doa_rad: PI / 4.0,
            sigma_eps: SQRT_2 / 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct InterferenceSection {
    regime: String,
    p: f64,
    /// `sigma_delta` for the random regimes, `s_delta` for directed-const.
    scale: f64,
    doa_rad: f64,
}

impl Default for InterferenceSection {
    fn default() -> Self {
        Self {
            regime: "random".into(),
            p: 0.33,
            scale: SQRT_2,
            doa_rad: PI / 2.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LambdaSection {
    q: f64,
    convention: String,
    method: String,
    trials: usize,
}

impl Default for LambdaSection {
    fn default() -> Self {
        Self {
            q: 0.1,
            convention: "complex-circular".into(),
            method: "chi".into(),
            trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SolverSection {
    eta: f64,
    max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            eta: 1e-6,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    replications: usize,
    out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            replications: 1,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    key: String,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMethod {
    Chi,
    MonteCarlo,
}

impl LambdaMethod {
    pub fn label(&self) -> &'static str {
        match self {
            LambdaMethod::Chi => "chi",
            LambdaMethod::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    P,
    SigmaDelta,
    SDelta,
    Q,
    N,
}

impl SweepKey {
    pub fn label(&self) -> &'static str {
        match self {
            SweepKey::P => "p",
            SweepKey::SigmaDelta => "sigma_delta",
            SweepKey::SDelta => "s_delta",
            SweepKey::Q => "q",
            SweepKey::N => "n",
        }
    }
}

impl FromStr for SweepKey {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(SweepKey::P),
            "sigma_delta" | "sigma-delta" => Ok(SweepKey::SigmaDelta),
            "s_delta" | "s-delta" => Ok(SweepKey::SDelta),
            "q" => Ok(SweepKey::Q),
            "n" => Ok(SweepKey::N),
            other => bail!("unknown sweep key '{other}' (expected p, sigma_delta, s_delta, q, n)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub key: SweepKey,
    pub values: Vec<f64>,
}

/// Fully resolved experiment: config file merged with flag overrides and
/// validated against the core types' own invariants.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub q: f64,
    pub convention: NoiseConvention,
    pub method: LambdaMethod,
    pub mc_trials: usize,
    pub solver: SolverConfig,
    pub replications: usize,
    pub sweep: Option<Sweep>,
    pub out: PathBuf,
}

impl ExperimentSpec {
    /// Penalty design for this experiment's scenario shape.
    pub fn lambda_spec(&self) -> LambdaSpec {
        LambdaSpec {
            q: self.q,
            n: self.scenario.n,
            m: self.scenario.geometry.channels(),
            d: self.scenario.d,
            sigma: self.scenario.sigma_eps,
        }
    }

    /// Applies one swept value, returning the adjusted spec.
    pub fn with_sweep_value(&self, key: SweepKey, value: f64) -> Result<ExperimentSpec> {
        let mut spec = self.clone();
        match key {
            SweepKey::P => set_regime_p(&mut spec.scenario.regime, value),
            SweepKey::SigmaDelta | SweepKey::SDelta => {
                set_regime_scale(&mut spec.scenario.regime, key, value)?
            }
            SweepKey::Q => spec.q = value,
            SweepKey::N => {
                if value <= 0.0 || value.fract() != 0.0 {
                    bail!("swept n must be a positive integer, got {value}");
                }
                spec.scenario.n = value as usize;
            }
        }
        spec.scenario.validate()?;
        Ok(spec)
    }
}

fn set_regime_p(regime: &mut InterferenceRegime, value: f64) {
    match regime {
        InterferenceRegime::Random { p, .. }
        | InterferenceRegime::DirectedRandomAmplitude { p, .. }
        | InterferenceRegime::DirectedConstant { p, .. } => *p = value,
    }
}

/// `sigma_delta` names the scale of the random regimes, `s_delta` the
/// directed-constant amplitude; crossing them is almost always a mixed-up
/// experiment table, so it is rejected.
fn set_regime_scale(regime: &mut InterferenceRegime, key: SweepKey, value: f64) -> Result<()> {
    match (regime, key) {
        (InterferenceRegime::Random { sigma_delta, .. }, SweepKey::SigmaDelta)
        | (
            InterferenceRegime::DirectedRandomAmplitude { sigma_delta, .. },
            SweepKey::SigmaDelta,
        ) => {
            *sigma_delta = value;
            Ok(())
        }
        (InterferenceRegime::DirectedConstant { amplitude, .. }, SweepKey::SDelta) => {
            *amplitude = value;
            Ok(())
        }
        (regime, key) => bail!(
            "{} does not apply to the {} regime",
            key.label(),
            regime.label()
        ),
    }
}

fn parse_regime(
    name: &str,
    p: f64,
    scale: f64,
    doa_rad: f64,
) -> Result<InterferenceRegime> {
    match name {
        "random" => Ok(InterferenceRegime::Random {
            p,
            sigma_delta: scale,
        }),
        "directed-rand-amp" => Ok(InterferenceRegime::DirectedRandomAmplitude {
            p,
            sigma_delta: scale,
            doa_rad,
        }),
        "directed-const" => Ok(InterferenceRegime::DirectedConstant {
            p,
            amplitude: scale,
            doa_rad,
        }),
        other => bail!(
            "unknown regime '{other}' (expected random, directed-rand-amp, directed-const)"
        ),
    }
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Merges (defaults <- config file <- flags) into a validated spec.
pub fn resolve(args: &CommonArgs) -> Result<ExperimentSpec> {
    let file = match &args.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };

    let mut sc = file.scenario;
    if let Some(m) = args.m {
        sc.channels = m;
    }
    if let Some(n) = args.n {
        sc.snapshots = n;
    }
    if let Some(d) = args.d {
        sc.d = d;
    }
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }

    let mut intf = file.interference;
    if let Some(regime) = &args.regime {
        intf.regime = regime.clone();
    }
    if let Some(p) = args.p {
        intf.p = p;
    }
    match (args.sigma_delta, args.s_delta) {
        (Some(_), Some(_)) => bail!("--sigma-delta and --s-delta are mutually exclusive"),
        (Some(v), None) => {
            if intf.regime == "directed-const" {
                bail!("--sigma-delta does not apply to the directed-const regime");
            }
            intf.scale = v;
        }
        (None, Some(v)) => {
            if intf.regime != "directed-const" {
                bail!("--s-delta only applies to the directed-const regime");
            }
            intf.scale = v;
        }
        (None, None) => {}
    }

    let mut lam = file.lambda;
    if let Some(q) = args.q {
        lam.q = q;
    }

    let mut solver = file.solver;
    if let Some(eta) = args.eta {
        solver.eta = eta;
    }
    if let Some(iters) = args.max_iters {
        solver.max_iterations = iters;
    }

    let mut run = file.run;
    if let Some(reps) = args.reps {
        run.replications = reps;
    }
    if let Some(out) = &args.out {
        run.out = out.clone();
    }

    let sweep = match (&args.sweep, file.sweep) {
        (Some(flag), _) => Some(parse_sweep_flag(flag)?),
        (None, Some(section)) => Some(Sweep {
            key: section.key.parse()?,
            values: section.values,
        }),
        (None, None) => None,
    };
    if let Some(s) = &sweep {
        if s.values.is_empty() {
            bail!("sweep over {} has an empty value list", s.key.label());
        }
    }

    if run.replications == 0 {
        bail!("replications must be at least 1");
    }

    let scenario = ScenarioConfig {
        geometry: ArrayGeometry::new(sc.channels, sc.spacing_wavelengths)?,
        d: sc.d,
        n: sc.snapshots,
        signal_freq_hz: sc.signal_freq_hz,
        sample_rate_hz: sc.sample_rate_hz,
        doa_rad: sc.doa_rad,
        sigma_eps: sc.sigma_eps,
        regime: parse_regime(&intf.regime, intf.p, intf.scale, intf.doa_rad)?,
        seed: sc.seed,
    };
    scenario.validate()?;

    let convention: NoiseConvention = lam
        .convention
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))?;
    let method = match lam.method.as_str() {
        "chi" => LambdaMethod::Chi,
        "monte-carlo" => LambdaMethod::MonteCarlo,
        other => bail!("unknown lambda method '{other}' (expected chi or monte-carlo)"),
    };

    let spec = ExperimentSpec {
        scenario,
        q: lam.q,
        convention,
        method,
        mc_trials: lam.trials,
        solver: SolverConfig {
            eta: solver.eta,
            max_iterations: solver.max_iterations,
            init: Default::default(),
        },
        replications: run.replications,
        sweep,
        out: run.out,
    };
    spec.lambda_spec().validate()?;
    spec.solver.validate()?;
    Ok(spec)
}

/// `KEY=v1,v2,...` from the command line.
fn parse_sweep_flag(flag: &str) -> Result<Sweep> {
    let (key, list) = flag
        .split_once('=')
        .with_context(|| format!("--sweep expects KEY=v1,v2,..., got '{flag}'"))?;
    let key: SweepKey = key.parse()?;
    let values = list
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .with_context(|| format!("bad sweep value '{s}'"))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Sweep { key, values })
}
