//! CSV and lambda-file assembly. Report rows are pure functions of the
//! experiment inputs so same-seed runs produce byte-identical files; wall
//! clock readings live only in timing.csv.

use std::path::Path;

use anyhow::{Context, Result};
use subslope::{DetectionReport, InterferenceRegime, PenaltyVector, ScenarioConfig};

use crate::config::ExperimentSpec;

/// Crate version plus the git revision baked in at build time.
pub fn version() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("GIT_REV"))
}

/// Provenance columns, then the scenario, then the detection record.
pub fn report_header() -> String {
    format!(
        "version,rng,lambda_method,lambda_convention,q,\
         regime,channels,snapshots,d,p,scale,interference_doa_rad,\
         signal_doa_rad,sigma_eps,rep,seed,{}",
        DetectionReport::csv_header()
    )
}

pub fn report_row(
    spec: &ExperimentSpec,
    scenario: &ScenarioConfig,
    rep: usize,
    seed: u64,
    report: &DetectionReport,
) -> String {
    let intf_doa = match scenario.regime {
        InterferenceRegime::Random { .. } => f64::NAN,
        InterferenceRegime::DirectedRandomAmplitude { doa_rad, .. }
        | InterferenceRegime::DirectedConstant { doa_rad, .. } => doa_rad,
    };
    format!(
        "{},chacha8,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        version(),
        spec.method.label(),
        spec.convention.label(),
        spec.q,
        scenario.regime.label(),
        scenario.geometry.channels(),
        scenario.n,
        scenario.d,
        scenario.regime.probability(),
        scenario.regime.scale(),
        intf_doa,
        scenario.doa_rad,
        scenario.sigma_eps,
        rep,
        seed,
        report.csv_row()
    )
}

pub fn sweep_header() -> String {
    format!("sweep_key,sweep_value,{}", report_header())
}

/// One wall-clock measurement. Fields that do not apply to a phase (solver
/// iterations while generating, the sweep columns outside a sweep) stay
/// empty rather than carrying sentinel numbers.
pub struct TimingRow {
    pub command: &'static str,
    pub phase: &'static str,
    pub sweep_key: Option<&'static str>,
    pub sweep_value: Option<f64>,
    pub rep: Option<usize>,
    pub seed: u64,
    pub snapshots: usize,
    pub channels: usize,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub seconds: f64,
}

pub fn timing_header() -> &'static str {
    "command,phase,sweep_key,sweep_value,rep,seed,snapshots,channels,\
     iterations,converged,seconds,seconds_per_iteration"
}

impl TimingRow {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let per_iter = match self.iterations {
            Some(it) if it > 0 => format!("{:.9}", self.seconds / it as f64),
            _ => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.6},{}",
            self.command,
            self.phase,
            opt(self.sweep_key.map(str::to_owned)),
            opt(self.sweep_value.map(|v| v.to_string())),
            opt(self.rep.map(|r| r.to_string())),
            self.seed,
            self.snapshots,
            self.channels,
            opt(self.iterations.map(|i| i.to_string())),
            opt(self.converged.map(|c| c.to_string())),
            self.seconds,
            per_iter,
        )
    }
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One penalty value per line, largest first (the vector is stored sorted).
pub fn write_lambda(path: &Path, lambda: &PenaltyVector) -> Result<()> {
    let mut text = String::new();
    for v in lambda.values() {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
