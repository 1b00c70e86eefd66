//! Synthetic uniform-linear-array snapshots with labeled sparse
//! interference.
//!
//! Each snapshot is `x(t_i) = a(theta) s(t_i) + eps(t_i) + delta(t_i)`:
//! a narrowband source from direction `theta` in IQ form, circular complex
//! Gaussian noise, and interference that strikes each snapshot independently
//! with probability `p` under one of three regimes. Ground truth (mixing
//! vector, source waveform, interference matrix, support) rides along for
//! scoring.

use std::f64::consts::{PI, SQRT_2};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::solver::SnapshotMatrix;

/// Uniform linear array: channel count and inter-element spacing in carrier
/// wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    channels: usize,
    spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn new(channels: usize, spacing_wavelengths: f64) -> Result<Self> {
        if channels < 2 {
            return Err(Error::TooFewColumns {
                needed: 2,
                got: channels,
            });
        }
        if !(spacing_wavelengths > 0.0 && spacing_wavelengths.is_finite()) {
            return Err(Error::NonPositive {
                what: "element spacing",
                value: spacing_wavelengths,
            });
        }
        Ok(Self {
            channels,
            spacing_wavelengths,
        })
    }

    /// Quarter-wavelength spacing, the layout used throughout the
    /// experiments.
    pub fn quarter_wavelength(channels: usize) -> Result<Self> {
        Self::new(channels, 0.25)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }
}

/// Array response for a plane wave from direction `theta` (radians off the
/// array axis): entry `k` is `exp(-i 2 pi spacing k cos(theta))`.
///
/// Entries are unit modulus, so the norm is `sqrt(channels)`. At
/// `theta = pi/2` (broadside) the vector is all ones.
pub fn steering_vector(geom: &ArrayGeometry, theta: f64) -> DVector<Complex64> {
    let step = -2.0 * PI * geom.spacing_wavelengths * theta.cos();
    DVector::from_fn(geom.channels, |k, _| {
        Complex64::from_polar(1.0, step * k as f64)
    })
}

/// How interference strikes a snapshot, given that it strikes (each snapshot
/// is hit independently with probability `p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterferenceRegime {
    /// Isotropic: the column is a complex circular Gaussian vector with
    /// per-coordinate variance `sigma_delta^2`.
    Random { p: f64, sigma_delta: f64 },
    /// Directional with random strength: the column is
    /// `|g| * a(doa_rad)` with scalar `g ~ N(0, sigma_delta^2)`.
    DirectedRandomAmplitude {
        p: f64,
        sigma_delta: f64,
        doa_rad: f64,
    },
    /// Directional with fixed strength: the column is
    /// `amplitude * a(doa_rad)`.
    DirectedConstant {
        p: f64,
        amplitude: f64,
        doa_rad: f64,
    },
}

/// Broadside arrival used by the directed regimes unless overridden.
pub const DEFAULT_INTERFERENCE_DOA: f64 = PI / 2.0;

impl InterferenceRegime {
    pub fn random(p: f64, sigma_delta: f64) -> Self {
        Self::Random { p, sigma_delta }
    }

    pub fn directed_random_amplitude(p: f64, sigma_delta: f64) -> Self {
        Self::DirectedRandomAmplitude {
            p,
            sigma_delta,
            doa_rad: DEFAULT_INTERFERENCE_DOA,
        }
    }

    pub fn directed_constant(p: f64, amplitude: f64) -> Self {
        Self::DirectedConstant {
            p,
            amplitude,
            doa_rad: DEFAULT_INTERFERENCE_DOA,
        }
    }

    /// Per-snapshot strike probability.
    pub fn probability(&self) -> f64 {
        match *self {
            Self::Random { p, .. }
            | Self::DirectedRandomAmplitude { p, .. }
            | Self::DirectedConstant { p, .. } => p,
        }
    }

    /// Interference strength parameter (`sigma_delta` or `amplitude`).
    pub fn scale(&self) -> f64 {
        match *self {
            Self::Random { sigma_delta, .. }
            | Self::DirectedRandomAmplitude { sigma_delta, .. } => sigma_delta,
            Self::DirectedConstant { amplitude, .. } => amplitude,
        }
    }

    /// Stable identifier used by the CLI and file headers.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Random { .. } => "random",
            Self::DirectedRandomAmplitude { .. } => "directed-rand-amp",
            Self::DirectedConstant { .. } => "directed-const",
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.probability();
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability {
                p,
                domain: "[0, 1]",
            });
        }
        let scale = self.scale();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::NonPositive {
                what: "interference scale",
                value: scale,
            });
        }
        match *self {
            Self::Random { .. } => Ok(()),
            Self::DirectedRandomAmplitude { doa_rad, .. }
            | Self::DirectedConstant { doa_rad, .. } => check_doa(doa_rad),
        }
    }
}

fn check_doa(doa_rad: f64) -> Result<()> {
    if doa_rad > 0.0 && doa_rad < PI {
        Ok(())
    } else {
        Err(Error::NonPositive {
            what: "direction of arrival (radians in (0, pi))",
            value: doa_rad,
        })
    }
}

/// Full scenario description. `Default` mirrors the flagship experiment:
/// 50 channels at quarter-wavelength spacing, a unit-amplitude 300 Hz source
/// at `pi/4` sampled at 10 kHz for 10 s, noise scale `sqrt(2)/2`, and
/// isotropic interference with `p = 0.33`, `sigma_delta = sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: ArrayGeometry,
    /// Signal subspace dimension; generation supports `d = 1` (one source).
    pub d: usize,
    /// Snapshot count.
    pub n: usize,
    pub signal_freq_hz: f64,
    pub sample_rate_hz: f64,
    /// Source direction, radians in (0, pi).
    pub doa_rad: f64,
    /// Noise scale (complex circular, per-coordinate variance
    /// `sigma_eps^2`).
    pub sigma_eps: f64,
    pub regime: InterferenceRegime,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: ArrayGeometry::quarter_wavelength(50).unwrap(),
            d: 1,
            n: 100_000,
            signal_freq_hz: 300.0,
            sample_rate_hz: 10_000.0,
            doa_rad: PI / 4.0,
            sigma_eps: SQRT_2 / 2.0,
            regime: InterferenceRegime::random(0.33, SQRT_2),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        // A single source direction is configured, so only d = 1 datasets
        // can be generated; the estimator types themselves handle any d.
        if self.d != 1 {
            return Err(Error::UnsupportedModelOrder {
                what: "scenario generation",
                d: self.d,
            });
        }
        if self.n == 0 {
            return Err(Error::Empty {
                what: "snapshot count",
            });
        }
        for (what, value) in [
            ("signal frequency", self.signal_freq_hz),
            ("sample rate", self.sample_rate_hz),
            ("noise scale", self.sigma_eps),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositive { what, value });
            }
        }
        check_doa(self.doa_rad)?;
        self.regime.validate()
    }
}

/// Everything the generator knows that an estimator should not see.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Mixing matrix (the raw steering vector for d = 1), channels x d.
    pub mixing: DMatrix<Complex64>,
    /// Source waveform, d x n.
    pub signal: DMatrix<Complex64>,
    /// Interference matrix, channels x n; columns off the support are
    /// exactly zero.
    pub interference: DMatrix<Complex64>,
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub x: SnapshotMatrix,
    /// Ascending indices of interfered snapshots: exactly the nonzero
    /// columns of the interference matrix.
    pub truth_support: Vec<usize>,
    pub ground_truth: GroundTruth,
}

impl LabeledDataset {
    /// Per-snapshot truth flags, `true` where interference is present.
    pub fn truth_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.x.snapshots()];
        for &i in &self.truth_support {
            flags[i] = true;
        }
        flags
    }
}

/// Complex circular Gaussian vector: every coordinate has independent real
/// and imaginary parts `N(0, sigma^2/2)`, so per-coordinate variance is
/// `sigma^2`. Draws real then imaginary, coordinate by coordinate.
pub fn complex_gaussian(dim: usize, sigma: f64, rng: &mut impl Rng) -> DVector<Complex64> {
    let mut out = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    fill_complex_gaussian(out.as_mut_slice(), sigma, rng);
    out
}

fn fill_complex_gaussian(buf: &mut [Complex64], sigma: f64, rng: &mut impl Rng) {
    let part = sigma / SQRT_2;
    for v in buf.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v = Complex64::new(part * re, part * im);
    }
}

/// Generates a labeled dataset from the scenario.
///
/// The source waveform is the unit-amplitude complex exponential
/// `s(t_i) = exp(i 2 pi f t_i)` with `t_i = i / sample_rate` (IQ
/// representation; full amplitude lives in the single complex component).
///
/// Determinism: one ChaCha8 stream seeded from `cfg.seed` drives everything.
/// Per snapshot, the draw order is fixed: noise coordinates (real then
/// imaginary, channel by channel), then the strike coin, then -- only if the
/// coin hits -- the regime draws (isotropic: one complex Gaussian vector;
/// directed random amplitude: one standard normal). Identical configs
/// produce bit-identical datasets.
pub fn generate(cfg: &ScenarioConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let m = cfg.geometry.channels();
    let n = cfg.n;

    let a0 = steering_vector(&cfg.geometry, cfg.doa_rad);
    let direction = match cfg.regime {
        InterferenceRegime::Random { .. } => None,
        InterferenceRegime::DirectedRandomAmplitude { doa_rad, .. }
        | InterferenceRegime::DirectedConstant { doa_rad, .. } => {
            Some(steering_vector(&cfg.geometry, doa_rad))
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Probability already validated to [0, 1].
    let coin = Bernoulli::new(cfg.regime.probability()).expect("validated probability");

    let mut x = DMatrix::<Complex64>::zeros(m, n);
    let mut delta = DMatrix::<Complex64>::zeros(m, n);
    let mut signal = DMatrix::<Complex64>::zeros(1, n);
    let mut support = Vec::new();

    let xs = x.as_mut_slice();
    let ds = delta.as_mut_slice();
    let mut eps = vec![Complex64::new(0.0, 0.0); m];

    for j in 0..n {
        let t = j as f64 / cfg.sample_rate_hz;
        let s = Complex64::from_polar(1.0, 2.0 * PI * cfg.signal_freq_hz * t);
        signal[(0, j)] = s;

        fill_complex_gaussian(&mut eps, cfg.sigma_eps, &mut rng);
        let hit = coin.sample(&mut rng);

        let dcol = &mut ds[j * m..(j + 1) * m];
        if hit {
            match cfg.regime {
                InterferenceRegime::Random { sigma_delta, .. } => {
                    fill_complex_gaussian(dcol, sigma_delta, &mut rng);
                }
                InterferenceRegime::DirectedRandomAmplitude { sigma_delta, .. } => {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    let amp = (sigma_delta * g).abs();
                    let b = direction.as_ref().unwrap();
                    for i in 0..m {
                        dcol[i] = b[i] * amp;
                    }
                }
                InterferenceRegime::DirectedConstant { amplitude, .. } => {
                    let b = direction.as_ref().unwrap();
                    for i in 0..m {
                        dcol[i] = b[i] * amplitude;
                    }
                }
            }
            // Support is defined by the realized column, not the coin; a
            // zero draw (possible only at measure zero) stays unlabeled.
            if dcol.iter().any(|v| *v != Complex64::new(0.0, 0.0)) {
                support.push(j);
            }
        }

        let xcol = &mut xs[j * m..(j + 1) * m];
        for i in 0..m {
            xcol[i] = a0[i] * s + eps[i] + dcol[i];
        }
    }

    Ok(LabeledDataset {
        x: SnapshotMatrix::new(x)?,
        truth_support: support,
        ground_truth: GroundTruth {
            mixing: DMatrix::from_columns(&[a0.column(0)]),
            signal,
            interference: delta,
        },
    })
}

const DATASET_MAGIC: &[u8; 8] = b"SSLOPE01";

/// Metadata stored in the dataset file header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub channels: usize,
    pub snapshots: usize,
    pub seed: u64,
    pub regime: InterferenceRegime,
}

fn regime_to_fields(r: &InterferenceRegime) -> (u32, f64, f64, f64) {
    match *r {
        InterferenceRegime::Random { p, sigma_delta } => (1, p, sigma_delta, 0.0),
        InterferenceRegime::DirectedRandomAmplitude {
            p,
            sigma_delta,
            doa_rad,
        } => (2, p, sigma_delta, doa_rad),
        InterferenceRegime::DirectedConstant {
            p,
            amplitude,
            doa_rad,
        } => (3, p, amplitude, doa_rad),
    }
}

fn regime_from_fields(tag: u32, p: f64, scale: f64, doa: f64) -> Result<InterferenceRegime> {
    match tag {
        1 => Ok(InterferenceRegime::Random {
            p,
            sigma_delta: scale,
        }),
        2 => Ok(InterferenceRegime::DirectedRandomAmplitude {
            p,
            sigma_delta: scale,
            doa_rad: doa,
        }),
        3 => Ok(InterferenceRegime::DirectedConstant {
            p,
            amplitude: scale,
            doa_rad: doa,
        }),
        other => Err(Error::MalformedDataset {
            reason: format!("unknown regime tag {other}"),
        }),
    }
}

/// Writes a snapshot matrix in the binary dataset format.
///
/// Layout (little endian throughout):
///
/// ```text
/// offset  size  field
///      0     8  magic "SSLOPE01"
///      8     4  u32 channel count m
///     12     8  u64 snapshot count n
///     20     8  u64 seed
///     28     4  u32 regime tag (1 random, 2 directed-rand-amp, 3 directed-const)
///     32     8  f64 strike probability p
///     40     8  f64 regime scale (sigma_delta or amplitude)
///     48     8  f64 regime direction of arrival, radians (0 when unused)
///     56  16mn  column-major payload: f64 real, f64 imaginary per entry
/// ```
pub fn write_dataset(path: &Path, x: &SnapshotMatrix, header: &DatasetHeader) -> Result<()> {
    if header.channels != x.channels() || header.snapshots != x.snapshots() {
        return Err(Error::ShapeMismatch {
            expected_rows: header.channels,
            expected_cols: header.snapshots,
            rows: x.channels(),
            cols: x.snapshots(),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(header.channels as u32).to_le_bytes())?;
    w.write_all(&(header.snapshots as u64).to_le_bytes())?;
    w.write_all(&header.seed.to_le_bytes())?;
    let (tag, p, scale, doa) = regime_to_fields(&header.regime);
    w.write_all(&tag.to_le_bytes())?;
    w.write_all(&p.to_le_bytes())?;
    w.write_all(&scale.to_le_bytes())?;
    w.write_all(&doa.to_le_bytes())?;
    for v in x.matrix().as_slice() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::MalformedDataset {
                reason: "truncated file".into(),
            }
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf)
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<(SnapshotMatrix, DatasetHeader)> {
    let mut r = BufReader::new(File::open(path)?);
    let magic: [u8; 8] = read_exact_array(&mut r)?;
    if &magic != DATASET_MAGIC {
        return Err(Error::MalformedDataset {
            reason: "bad magic".into(),
        });
    }
    let m = u32::from_le_bytes(read_exact_array(&mut r)?) as usize;
    let n = u64::from_le_bytes(read_exact_array(&mut r)?) as usize;
    let seed = u64::from_le_bytes(read_exact_array(&mut r)?);
    let tag = u32::from_le_bytes(read_exact_array(&mut r)?);
    let p = f64::from_le_bytes(read_exact_array(&mut r)?);
    let scale = f64::from_le_bytes(read_exact_array(&mut r)?);
    let doa = f64::from_le_bytes(read_exact_array(&mut r)?);
    let regime = regime_from_fields(tag, p, scale, doa)?;

    if m == 0 || n == 0 {
        return Err(Error::MalformedDataset {
            reason: format!("empty dimensions {m}x{n}"),
        });
    }
    m.checked_mul(n)
        .and_then(|e| e.checked_mul(16))
        .ok_or_else(|| Error::MalformedDataset {
            reason: format!("dimensions {m}x{n} overflow"),
        })?;

    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        let re = f64::from_le_bytes(read_exact_array(&mut r)?);
        let im = f64::from_le_bytes(read_exact_array(&mut r)?);
        data.push(Complex64::new(re, im));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::MalformedDataset {
            reason: "trailing bytes after payload".into(),
        });
    }

    let x = SnapshotMatrix::new(DMatrix::from_vec(m, n, data))?;
    Ok((
        x,
        DatasetHeader {
            channels: m,
            snapshots: n,
            seed,
            regime,
        },
    ))
}

/// Writes truth labels, one `0`/`1` line per snapshot.
pub fn write_labels(path: &Path, flags: &[bool]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &f in flags {
        w.write_all(if f { b"1\n" } else { b"0\n" })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a label file written by [`write_labels`].
pub fn read_labels(path: &Path) -> Result<Vec<bool>> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    let mut flags = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        match line.trim() {
            "0" => flags.push(false),
            "1" => flags.push(true),
            other => {
                return Err(Error::MalformedDataset {
                    reason: format!("label line {}: expected 0 or 1, got '{other}'", lineno + 1),
                })
            }
        }
    }
    Ok(flags)
}
