//! Experiment execution: penalty computation, replication fan-out across
//! worker threads, and the timing bookkeeping behind timing.csv.
//!
//! Replication `i` always derives its stream as `base_seed + i` (and a swept
//! experiment offsets by `value_index * replications` first), so results are
//! a function of the config alone, never of thread scheduling.

use std::f64::consts::SQRT_2;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use subslope::{
    lambda, metrics, sim, Complex64, DetectionReport, DMatrix, DVector, NoiseConvention,
    PenaltyVector, SubspaceEstimate,
};

use crate::config::{ExperimentSpec, LambdaMethod};

/// Seed tweak separating the Monte Carlo penalty stream from the data
/// streams, so a rep and the calibration never share randomness.
const LAMBDA_SEED_XOR: u64 = 0x6c61_6d62;

/// Runs `f` on every job index, fanning out across available cores. Output
/// is indexed by job, so ordering is schedule-independent.
pub fn parallel_map<T, F>(jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.max(1));
    if workers <= 1 {
        return (0..jobs).map(f).collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                if j >= jobs {
                    break;
                }
                let out = f(j);
                *slots[j].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().unwrap())
        .collect()
}

/// Penalty sequence for the experiment, by quantile formula or Monte Carlo
/// calibration against the configured signal direction.
pub fn compute_lambda(spec: &ExperimentSpec) -> Result<PenaltyVector> {
    let shape = spec.lambda_spec();
    match spec.method {
        LambdaMethod::Chi => Ok(lambda::lambda_chi(&shape, spec.convention)?),
        LambdaMethod::MonteCarlo => {
            let m = spec.scenario.geometry.channels();
            let a = sim::steering_vector(&spec.scenario.geometry, spec.scenario.doa_rad)
                / Complex64::from((m as f64).sqrt());
            let basis = SubspaceEstimate::new(DMatrix::from_columns(&[a.column(0)]))?;
            let per_part = match spec.convention {
                NoiseConvention::ComplexCircular => spec.scenario.sigma_eps / SQRT_2,
                NoiseConvention::IndependentParts => spec.scenario.sigma_eps,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(spec.scenario.seed ^ LAMBDA_SEED_XOR);
            let sample = move || {
                DVector::from_fn(m, |_, _| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re * per_part, im * per_part)
                })
            };
            Ok(lambda::lambda_monte_carlo(
                &shape,
                &basis,
                sample,
                spec.mc_trials,
            )?)
        }
    }
}

/// One replication's scored run plus its wall-clock phases.
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub report: DetectionReport,
    pub gen_seconds: f64,
    pub solve_seconds: f64,
}

/// Generates and scores every replication, rep `i` seeded `base + i`.
pub fn run_replications(
    spec: &ExperimentSpec,
    lambda: &PenaltyVector,
) -> Result<Vec<RepOutcome>> {
    let outcomes = parallel_map(spec.replications, |rep| -> Result<RepOutcome> {
        let mut scenario = spec.scenario;
        scenario.seed = spec.scenario.seed.wrapping_add(rep as u64);

        let t0 = Instant::now();
        let data = sim::generate(&scenario)?;
        let gen_seconds = t0.elapsed().as_secs_f64();

        let truth = data.truth_flags();
        let t1 = Instant::now();
        let (report, _) = metrics::detect_and_report(
            &data.x,
            &truth,
            &scenario.geometry,
            scenario.d,
            lambda,
            &spec.solver,
        )?;
        let solve_seconds = t1.elapsed().as_secs_f64();

        Ok(RepOutcome {
            rep,
            seed: scenario.seed,
            report,
            gen_seconds,
            solve_seconds,
        })
    });
    outcomes.into_iter().collect()
}

/// Times `f` and pairs its output with the elapsed seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed().as_secs_f64())
}
