//! Monte-Carlo benchmark harness: scenario generation, per-trial estimator
//! evaluation, NMSE/BER aggregation, and CSV/manifest persistence.
//!
//! Every trial owns a private generator seeded from (master_seed, scenario,
//! sweep point, trial index), so results are independent of execution order
//! and reruns with the same master seed are bit-identical.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{CopraError, Result};
use crate::estimators::{
    default_selector_grid, gcv_select, lmmse_estimate, ls_estimate, quasiopt_select, rls_solve,
    Method,
};
use crate::qam::{bit_error_rate, qam8_demod, qam8_mod, BITS_PER_SYMBOL};
use crate::solver::{newton_solve, SolverConfig};
use crate::spectral::decompose;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::S1 => "s1",
            ScenarioId::S2 => "s2",
            ScenarioId::S3 => "s3",
        }
    }

    pub fn parse(s: &str) -> Result<ScenarioId> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s1" => Ok(ScenarioId::S1),
            "s2" => Ok(ScenarioId::S2),
            "s3" => Ok(ScenarioId::S3),
            other => Err(CopraError::InvalidInput(format!(
                "unknown scenario '{other}' (expected s1, s2, or s3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignalKind {
    /// i.i.d. standard real Gaussian entries.
    GaussianIid,
    /// Independent, zero mean, unit variance, but not identically
    /// distributed: entries alternate standard Gaussian and uniform on
    /// [-sqrt(3), sqrt(3)].
    GaussianInd,
    /// Gray-coded 8-QAM symbols with unit power; the sweep axis is Eb/N0.
    Qam8Gray,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub scenario_id: ScenarioId,
    pub rows: usize,
    pub cols: usize,
    pub field: Field,
    pub signal_kind: SignalKind,
    /// SNR dB points (S1/S2) or Eb/N0 dB points (S3), strictly increasing.
    pub sweep_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// The scenario defaults; sweep and trial count can be overridden after.
    pub fn standard(id: ScenarioId, trials: usize, master_seed: u64) -> ScenarioConfig {
        let snr_default: Vec<f64> = (-2..=6).map(|i| 5.0 * i as f64).collect(); // -10..30 step 5
        match id {
            ScenarioId::S1 => ScenarioConfig {
                scenario_id: id,
                rows: 100,
                cols: 90,
                field: Field::Complex,
                signal_kind: SignalKind::GaussianIid,
                sweep_db: snr_default,
                trials,
                master_seed,
            },
            ScenarioId::S2 => ScenarioConfig {
                scenario_id: id,
                rows: 100,
                cols: 100,
                field: Field::Real,
                signal_kind: SignalKind::GaussianInd,
                sweep_db: snr_default,
                trials,
                master_seed,
            },
            ScenarioId::S3 => ScenarioConfig {
                scenario_id: id,
                rows: 100,
                cols: 100,
                field: Field::Complex,
                signal_kind: SignalKind::Qam8Gray,
                sweep_db: (0..=8).map(|i| 3.0 * i as f64).collect(), // 0..24 step 3
                trials,
                master_seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(CopraError::InvalidInput("trials must be >= 1".into()));
        }
        if self.sweep_db.is_empty() {
            return Err(CopraError::InvalidInput("sweep must be nonempty".into()));
        }
        if self.sweep_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CopraError::InvalidInput(
                "sweep points must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// One generated trial: model, truth, noise, observation.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub h: DMatrix<Complex64>,
    pub x_true: DVector<Complex64>,
    pub z: DVector<Complex64>,
    pub y: DVector<Complex64>,
    pub sigma_z_sq: f64,
    pub snr_target_db: f64,
    /// Source bits when the signal is QAM.
    pub bits: Option<Vec<u8>>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn trial_seed(master: u64, scenario: ScenarioId, sweep_db: f64, trial: usize) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ scenario.name().as_bytes().iter().fold(0u64, |a, &b| {
        a.wrapping_mul(257).wrapping_add(b as u64)
    }));
    s = splitmix64(s ^ sweep_db.to_bits());
    splitmix64(s ^ trial as u64)
}

fn draw_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, field: Field) -> DMatrix<Complex64> {
    match field {
        Field::Real => DMatrix::from_fn(m, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), 0.0)
        }),
        Field::Complex => {
            let s = 0.5f64.sqrt();
            DMatrix::from_fn(m, n, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * s, im * s)
            })
        }
    }
}

fn draw_noise(rng: &mut ChaCha8Rng, m: usize, field: Field, variance: f64) -> DVector<Complex64> {
    match field {
        Field::Real => {
            let s = variance.sqrt();
            DVector::from_fn(m, |_, _| {
                let v: f64 = rng.sample(StandardNormal);
                Complex64::new(v * s, 0.0)
            })
        }
        Field::Complex => {
            let s = (variance / 2.0).sqrt();
            DVector::from_fn(m, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * s, im * s)
            })
        }
    }
}

/// Generate the seeded model instance for one (sweep point, trial) cell.
pub fn generate_instance(
    cfg: &ScenarioConfig,
    sweep_db: f64,
    trial_index: usize,
) -> Result<ModelInstance> {
    if trial_index >= cfg.trials {
        return Err(CopraError::InvalidInput(format!(
            "trial index {trial_index} out of range (trials = {})",
            cfg.trials
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(
        cfg.master_seed,
        cfg.scenario_id,
        sweep_db,
        trial_index,
    ));
    let (m, n) = (cfg.rows, cfg.cols);
    let h = draw_matrix(&mut rng, m, n, cfg.field);

    let (x_true, bits) = match cfg.signal_kind {
        SignalKind::GaussianIid => (
            DVector::from_fn(n, |_, _| Complex64::new(rng.sample(StandardNormal), 0.0)),
            None,
        ),
        SignalKind::GaussianInd => (
            DVector::from_fn(n, |i, _| {
                let v = if i % 2 == 0 {
                    rng.sample(StandardNormal)
                } else {
                    // uniform on [-sqrt(3), sqrt(3)]: zero mean, unit variance
                    rng.gen_range(-1.0f64..1.0) * 3f64.sqrt()
                };
                Complex64::new(v, 0.0)
            }),
            None,
        ),
        SignalKind::Qam8Gray => {
            let bits: Vec<u8> = (0..n * BITS_PER_SYMBOL).map(|_| rng.gen_range(0..2u8)).collect();
            let symbols = qam8_mod(&bits)?;
            (DVector::from_vec(symbols), Some(bits))
        }
    };

    let hx = &h * &x_true;
    let sigma_z_sq = match cfg.signal_kind {
        // Eb/N0 calibration per realization: received energy per bit is the
        // per-observation energy of Hx over the 3 bits each symbol carries.
        SignalKind::Qam8Gray => {
            hx.norm_squared() / (m as f64 * BITS_PER_SYMBOL as f64 * 10f64.powf(sweep_db / 10.0))
        }
        // SNR calibration per realization, against the observation length.
        _ => hx.norm_squared() / (m as f64 * 10f64.powf(sweep_db / 10.0)),
    };
    let z = draw_noise(&mut rng, m, cfg.field, sigma_z_sq);
    let y = &hx + &z;

    Ok(ModelInstance {
        h,
        x_true,
        z,
        y,
        sigma_z_sq,
        snr_target_db: sweep_db,
        bits,
    })
}

/// Normalized squared estimation error, linear scale.
pub fn nmse(x_true: &DVector<Complex64>, x_hat: &DVector<Complex64>) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(CopraError::InvalidInput(format!(
            "length mismatch: {} vs {}",
            x_true.len(),
            x_hat.len()
        )));
    }
    let denom = x_true.norm_squared();
    if denom == 0.0 {
        return Err(CopraError::Domain("zero truth vector in nmse".into()));
    }
    Ok((x_hat - x_true).norm_squared() / denom)
}

/// Per-method outcome of a single trial.
#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub nmse: f64,
    pub ber: Option<f64>,
    pub gamma_used: f64,
    pub converged: bool,
    pub fallback_used: bool,
    /// Set when the solver errored; the trial is still recorded.
    pub failed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub scenario_id: ScenarioId,
    pub sweep_point_db: f64,
    pub trial_index: usize,
    pub outcomes: Vec<(Method, MethodOutcome)>,
}

/// One aggregated CSV row.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub scenario: ScenarioId,
    pub sweep_db: f64,
    pub method: Method,
    pub mean_nmse_db: f64,
    pub ber: Option<f64>,
    pub trials: usize,
    pub fallback_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ScenarioConfig,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub timestamp: String,
    pub tool_version: String,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub records: Vec<TrialRecord>,
    pub manifest: RunManifest,
}

fn run_trial(
    cfg: &ScenarioConfig,
    sweep_db: f64,
    trial_index: usize,
    methods: &[Method],
    solver_cfg: &SolverConfig,
) -> Result<TrialRecord> {
    let inst = generate_instance(cfg, sweep_db, trial_index)?;
    let (dec, data) = decompose(&inst.h, &inst.y, None)?;
    let selector_grid = if methods.iter().any(|m| matches!(m, Method::Gcv | Method::QuasiOpt)) {
        Some(default_selector_grid(&dec))
    } else {
        None
    };

    let mut outcomes = Vec::with_capacity(methods.len());
    for &method in methods {
        let outcome = (|| -> Result<MethodOutcome> {
            let (estimate, converged, fallback) = match method {
                Method::Ls => (ls_estimate(&dec, &inst.y)?, true, false),
                Method::Lmmse => (lmmse_estimate(&dec, &inst.y, inst.sigma_z_sq)?, true, false),
                Method::Copra => {
                    let sel = newton_solve(&data, solver_cfg)?;
                    (
                        rls_solve(&dec, &inst.y, sel.gamma)?,
                        sel.converged,
                        sel.fallback_used,
                    )
                }
                Method::Gcv => {
                    let gamma = gcv_select(&dec, &inst.y, selector_grid.as_ref().unwrap())?;
                    (rls_solve(&dec, &inst.y, gamma)?, true, false)
                }
                Method::QuasiOpt => {
                    let gamma = quasiopt_select(&dec, &inst.y, selector_grid.as_ref().unwrap())?;
                    (rls_solve(&dec, &inst.y, gamma)?, true, false)
                }
            };
            let ber = match &inst.bits {
                Some(bits) => {
                    let symbols: Vec<Complex64> = estimate.x_hat.iter().copied().collect();
                    Some(bit_error_rate(bits, &qam8_demod(&symbols))?)
                }
                None => None,
            };
            Ok(MethodOutcome {
                nmse: nmse(&inst.x_true, &estimate.x_hat)?,
                ber,
                gamma_used: estimate.gamma_used,
                converged,
                fallback_used: fallback,
                failed: false,
            })
        })();
        match outcome {
            Ok(o) => outcomes.push((method, o)),
            // solver failures are recorded, never abort the run
            Err(_) => outcomes.push((
                method,
                MethodOutcome {
                    nmse: f64::NAN,
                    ber: None,
                    gamma_used: f64::NAN,
                    converged: false,
                    fallback_used: false,
                    failed: true,
                },
            )),
        }
    }

    Ok(TrialRecord {
        scenario_id: cfg.scenario_id,
        sweep_point_db: sweep_db,
        trial_index,
        outcomes,
    })
}

/// Aggregate stored trial records into report rows, in (sweep, method) order.
pub fn aggregate(
    cfg: &ScenarioConfig,
    methods: &[Method],
    records: &[TrialRecord],
) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for &sweep_db in &cfg.sweep_db {
        for &method in methods {
            let mut nmse_sum = 0.0;
            let mut nmse_count = 0usize;
            let mut ber_sum = 0.0;
            let mut ber_count = 0usize;
            let mut fallback = 0usize;
            let mut total = 0usize;
            for rec in records.iter().filter(|r| r.sweep_point_db == sweep_db) {
                let Some((_, o)) = rec.outcomes.iter().find(|(m, _)| *m == method) else {
                    continue;
                };
                total += 1;
                if o.failed || o.fallback_used {
                    fallback += 1;
                }
                if o.nmse.is_finite() {
                    nmse_sum += o.nmse;
                    nmse_count += 1;
                }
                if let Some(b) = o.ber {
                    ber_sum += b;
                    ber_count += 1;
                }
            }
            let mean_nmse_db = if nmse_count > 0 {
                10.0 * (nmse_sum / nmse_count as f64).log10()
            } else {
                f64::NAN
            };
            rows.push(ReportRow {
                scenario: cfg.scenario_id,
                sweep_db,
                method,
                mean_nmse_db,
                ber: (ber_count > 0).then(|| ber_sum / ber_count as f64),
                trials: total,
                fallback_rate: if total > 0 {
                    fallback as f64 / total as f64
                } else {
                    0.0
                },
            });
        }
    }
    rows
}

/// Run the full benchmark: every (sweep point, trial) cell, every method.
pub fn run_benchmark(cfg: &ScenarioConfig, methods: &[Method]) -> Result<BenchmarkReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(CopraError::InvalidInput("no methods requested".into()));
    }
    let solver_cfg = SolverConfig::default();
    let mut records = Vec::with_capacity(cfg.sweep_db.len() * cfg.trials);
    for &sweep_db in &cfg.sweep_db {
        for trial in 0..cfg.trials {
            records.push(run_trial(cfg, sweep_db, trial, methods, &solver_cfg)?);
        }
    }
    let rows = aggregate(cfg, methods, &records);
    let manifest = RunManifest {
        config: cfg.clone(),
        methods: methods.to_vec(),
        master_seed: cfg.master_seed,
        timestamp: chrono::Utc::now().to_rfc3339(),
        tool_version: TOOL_VERSION.to_string(),
    };
    Ok(BenchmarkReport {
        rows,
        records,
        manifest,
    })
}

pub const CSV_HEADER: &str = "scenario,sweep_db,method,mean_nmse_db,ber,trials,fallback_rate";

/// Render the aggregated rows as CSV with the fixed header.
pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let ber = row.ber.map(|b| format!("{b}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.scenario.name(),
            row.sweep_db,
            row.method.name(),
            row.mean_nmse_db,
            ber,
            row.trials,
            row.fallback_rate
        ));
    }
    out
}

fn io_err(path: &Path, source: std::io::Error) -> CopraError {
    CopraError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write the CSV and its JSON manifest (`<out>.manifest.json`) side by side.
pub fn write_report(report: &BenchmarkReport, out: &Path) -> Result<()> {
    let csv = report_to_csv(&report.rows);
    let mut f = File::create(out).map_err(|e| io_err(out, e))?;
    f.write_all(csv.as_bytes()).map_err(|e| io_err(out, e))?;

    let manifest_path = out.with_extension("manifest.json");
    let json = serde_json::to_string_pretty(&report.manifest)
        .expect("manifest serialization is infallible");
    let mut f = File::create(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    f.write_all(json.as_bytes())
        .map_err(|e| io_err(&manifest_path, e))?;
    Ok(())
}
