//! Monte-Carlo sweep runner and CSV output.

use std::io::Write;
use std::path::Path;
use std::time::Duration;

#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;
#[cfg(target_arch = "wasm32")]
use web_time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{digital_only, least_squares, mmse_no_quant, DigitalOnly};
use crate::channel::{sample_channels, ChannelRealization, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    cascaded_from_individual, design_task_quantizer, estimate_cascaded, g_task, stage1_design,
    stage1_estimate, stage2_design, stage2_estimate, LinearTask,
};
use crate::linalg::{unvec, ComplexMatrix};
use crate::pilot::{
    build_sbar, build_w_y, build_w_zhat, make_pilot_plan, simulate_bs_rx, simulate_ris_rx, Mode,
};
use crate::quantizer::levels_from_bits;

pub const CSV_HEADER: &str =
    "scenario_id,estimator,axis_name,axis_value,trial_count,nmse_linear_mean,nmse_db,bits_total,bits_per_adc,wall_time_ms";

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RIS_TQ_THREADS";

/// `||truth - estimate||_F^2 / ||truth||_F^2`.
pub fn nmse(truth: &ComplexMatrix, estimate: &ComplexMatrix) -> Result<f64> {
    if truth.shape() != estimate.shape() {
        return Err(Error::DimensionMismatch {
            op: "nmse",
            detail: format!("{:?} against {:?}", truth.shape(), estimate.shape()),
        });
    }
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroTruth);
    }
    Ok((truth - estimate).norm_squared() / denom)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Cascaded,
    Individual,
    Both,
}

impl SweepMode {
    fn includes(self, mode: Mode) -> bool {
        matches!(
            (self, mode),
            (SweepMode::Both, _)
                | (SweepMode::Cascaded, Mode::Cascaded)
                | (SweepMode::Individual, Mode::Individual)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "total_bits")]
    TotalBits,
    #[serde(rename = "per_adc_bits")]
    PerAdcBits,
    /// Subblocks (cascaded) or time slots (individual).
    #[serde(rename = "T", alias = "t")]
    T,
    #[serde(rename = "L_a", alias = "l_a")]
    La,
    /// Slots per subblock `tau` (cascaded) or time slots (individual).
    #[serde(rename = "time_slots")]
    TimeSlots,
    /// Per-sample bits of the semi-passive RIS sensors.
    #[serde(rename = "sensor_bits")]
    SensorBits,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::TotalBits => "total_bits",
            Axis::PerAdcBits => "per_adc_bits",
            Axis::T => "T",
            Axis::La => "L_a",
            Axis::TimeSlots => "time_slots",
            Axis::SensorBits => "sensor_bits",
        }
    }

    fn is_integral(self) -> bool {
        !matches!(self, Axis::TotalBits | Axis::PerAdcBits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    TaskBased,
    TaskBasedNoDither,
    NoQuant,
    DigitalOnly,
    Ls,
    IndividualTwoStage,
    CascadedFromIndividual,
}

impl EstimatorKind {
    fn supports(self, mode: Mode) -> bool {
        match self {
            EstimatorKind::NoQuant => true,
            EstimatorKind::TaskBased
            | EstimatorKind::TaskBasedNoDither
            | EstimatorKind::DigitalOnly
            | EstimatorKind::Ls => mode == Mode::Cascaded,
            EstimatorKind::IndividualTwoStage | EstimatorKind::CascadedFromIndividual => {
                mode == Mode::Individual
            }
        }
    }
}

/// Built-in scenarios accepted by name in a config file.
pub fn scenario_presets() -> Vec<(&'static str, &'static str, ScenarioConfig)> {
    vec![
        (
            "desk",
            "N=8, 4x4 RIS, K=2, two paths per link (default test scale)",
            ScenarioConfig::desk(),
        ),
        (
            "full_scale",
            "N=16, 10x10 RIS, K=3, four paths per link",
            ScenarioConfig::full_scale(),
        ),
    ]
}

pub fn scenario_preset(name: &str) -> Option<ScenarioConfig> {
    scenario_presets()
        .into_iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, c)| c)
}

fn default_scenario() -> serde_json::Value {
    serde_json::Value::String("desk".into())
}
fn default_subblocks() -> usize {
    4
}
fn default_tau() -> usize {
    2
}
fn default_l_a() -> usize {
    4
}
fn default_total_bits() -> f64 {
    128.0
}
fn default_sensor_bits() -> u32 {
    4
}
fn default_eta() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario_id: String,
    /// Preset name or a full scenario object.
    #[serde(default = "default_scenario")]
    pub scenario: serde_json::Value,
    pub mode: SweepMode,
    pub sweep_axis: Axis,
    pub axis_values: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub n_trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// `T` for cascaded mode (subblocks) and individual mode (slots).
    #[serde(default = "default_subblocks")]
    pub subblocks: usize,
    /// `tau`, cascaded mode only.
    #[serde(default = "default_tau")]
    pub slots_per_subblock: usize,
    #[serde(default = "default_l_a")]
    pub semi_passive: usize,
    /// BS-side budget: cascaded task-based and baselines, or Stage II.
    #[serde(default = "default_total_bits")]
    pub total_bits: f64,
    #[serde(default = "default_sensor_bits")]
    pub sensor_bits: u32,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// ADC pairs of the cascaded design; defaults to `M_RB * M_UR`.
    #[serde(default)]
    pub g_cascaded: Option<usize>,
    /// ADC pairs of Stage II; defaults to `M_RB`.
    #[serde(default)]
    pub g_individual: Option<usize>,
}

impl SweepSpec {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text).map_err(|e| Error::Config {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        spec.scenario_config().map_err(|e| Error::Config {
            path: format!("{origin}: scenario"),
            message: e.to_string(),
        })?;
        spec.validate().map_err(|e| Error::Config {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        let cfg = match &self.scenario {
            serde_json::Value::String(name) => scenario_preset(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario preset {name:?}")))?,
            other => serde_json::from_value::<ScenarioConfig>(other.clone())
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.axis_values.is_empty() {
            return bad("axis_values must not be empty".into());
        }
        if self.axis_values.iter().any(|v| !v.is_finite()) {
            return bad("axis_values must be finite".into());
        }
        if self.axis_values.windows(2).any(|w| w[1] <= w[0]) {
            return bad("axis_values must be strictly increasing".into());
        }
        if self.sweep_axis.is_integral()
            && self
                .axis_values
                .iter()
                .any(|v| v.fract() != 0.0 || *v < 0.0)
        {
            return bad(format!(
                "axis {} takes non-negative integers",
                self.sweep_axis.name()
            ));
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("estimators must not be empty".into());
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        for e in &self.estimators {
            if !self.modes().iter().any(|&m| e.supports(m)) {
                return bad(format!(
                    "estimator {e:?} is not available in mode {:?}",
                    self.mode
                ));
            }
        }
        let cascaded_only = matches!(
            self.sweep_axis,
            Axis::TotalBits | Axis::PerAdcBits | Axis::T | Axis::TimeSlots
        );
        if !cascaded_only && self.mode != SweepMode::Individual {
            return bad(format!(
                "axis {} needs mode \"individual\"",
                self.sweep_axis.name()
            ));
        }
        Ok(())
    }

    fn modes(&self) -> Vec<Mode> {
        [Mode::Cascaded, Mode::Individual]
            .into_iter()
            .filter(|&m| self.mode.includes(m))
            .collect()
    }

    fn wants(&self, e: EstimatorKind) -> bool {
        self.estimators.contains(&e)
    }
}

/// Parameters of one axis point after the axis value has been applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub subblocks: usize,
    pub tau: usize,
    pub l_a: usize,
    pub total_bits: f64,
    pub sensor_bits: u32,
    pub g_cascaded: usize,
    pub g_individual: usize,
}

impl PointParams {
    pub fn resolve(spec: &SweepSpec, cfg: &ScenarioConfig, mode: Mode, value: f64) -> Self {
        let mut p = PointParams {
            subblocks: spec.subblocks,
            tau: spec.slots_per_subblock,
            l_a: spec.semi_passive,
            total_bits: spec.total_bits,
            sensor_bits: spec.sensor_bits,
            g_cascaded: spec
                .g_cascaded
                .unwrap_or(cfg.paths_rb * cfg.total_paths_ur()),
            g_individual: spec.g_individual.unwrap_or(cfg.paths_rb),
        };
        let g = match mode {
            Mode::Cascaded => p.g_cascaded,
            Mode::Individual => p.g_individual,
        };
        match spec.sweep_axis {
            Axis::TotalBits => p.total_bits = value,
            Axis::PerAdcBits => p.total_bits = 2.0 * g as f64 * value,
            Axis::T => p.subblocks = value as usize,
            Axis::La => p.l_a = value as usize,
            Axis::TimeSlots => match mode {
                Mode::Cascaded => p.tau = value as usize,
                Mode::Individual => p.subblocks = value as usize,
            },
            Axis::SensorBits => p.sensor_bits = value as u32,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub estimator: String,
    pub axis_name: String,
    pub axis_value: f64,
    pub trial_count: usize,
    pub nmse_linear_mean: f64,
    pub nmse_db: f64,
    pub bits_total: f64,
    pub bits_per_adc: u64,
    pub wall_time_ms: f64,
}

/// One estimator output series inside a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Series {
    label: &'static str,
    bits_total: f64,
    n_adc_pairs: usize,
}

/// Per-estimator results of one trial, keyed by series label.
#[derive(Debug, Clone, Default)]
struct TrialOutcome {
    results: Vec<(&'static str, f64, Duration)>,
}

impl TrialOutcome {
    fn push(&mut self, label: &'static str, nmse: f64, elapsed: Duration) {
        self.results.push((label, nmse, elapsed));
    }

    fn get(&self, label: &str) -> (f64, Duration) {
        let (_, v, t) = self
            .results
            .iter()
            .find(|(l, _, _)| *l == label)
            .expect("series computed in every trial");
        (*v, *t)
    }
}

/// Per-trial generator streams. Each consumer gets its own stream so the
/// numbers drawn do not depend on which estimators are enabled.
mod stream {
    pub const CHANNEL: u64 = 0;
    pub const CASCADED_RX: u64 = 1;
    pub const INDIVIDUAL_RX: u64 = 2;
    pub const TASK_DITHER: u64 = 3;
    pub const TASK_NO_DITHER: u64 = 4;
    pub const DIGITAL: u64 = 5;
    pub const STAGE2: u64 = 6;
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn cascaded_series(spec: &SweepSpec, p: &PointParams, cfg: &ScenarioConfig) -> Vec<Series> {
    let dim_y = cfg.n_bs_antennas * p.subblocks * p.tau;
    let mut out = Vec::new();
    let mut push = |kind, label, pairs| {
        if spec.wants(kind) {
            out.push(Series {
                label,
                bits_total: p.total_bits,
                n_adc_pairs: pairs,
            });
        }
    };
    push(EstimatorKind::TaskBased, "task_based", p.g_cascaded);
    push(
        EstimatorKind::TaskBasedNoDither,
        "task_based_no_dither",
        p.g_cascaded,
    );
    push(EstimatorKind::NoQuant, "no_quant", p.g_cascaded);
    push(EstimatorKind::DigitalOnly, "digital_only", dim_y);
    push(EstimatorKind::Ls, "ls", dim_y);
    out
}

fn individual_series(spec: &SweepSpec, p: &PointParams) -> Vec<Series> {
    let f_bits = 2.0 * (p.l_a as f64) * p.sensor_bits as f64;
    let mut out = Vec::new();
    if spec.wants(EstimatorKind::IndividualTwoStage) {
        out.push(Series {
            label: "individual_two_stage:F",
            bits_total: f_bits,
            n_adc_pairs: p.l_a,
        });
        out.push(Series {
            label: "individual_two_stage:G",
            bits_total: p.total_bits,
            n_adc_pairs: p.g_individual,
        });
    }
    if spec.wants(EstimatorKind::NoQuant) {
        out.push(Series {
            label: "no_quant:F",
            bits_total: f_bits,
            n_adc_pairs: p.l_a,
        });
        out.push(Series {
            label: "no_quant:G",
            bits_total: p.total_bits,
            n_adc_pairs: p.g_individual,
        });
    }
    if spec.wants(EstimatorKind::CascadedFromIndividual) {
        out.push(Series {
            label: "cascaded_from_individual",
            bits_total: p.total_bits,
            n_adc_pairs: p.g_individual,
        });
    }
    out
}

/// Runs every enabled cascaded-mode estimator on one fresh trial.
fn cascaded_trial(
    cfg: &ScenarioConfig,
    spec: &SweepSpec,
    p: &PointParams,
    ch: &ChannelRealization,
    seed: u64,
) -> Result<TrialOutcome> {
    let start = Instant::now();
    let mut rx_rng = trial_rng(seed, stream::CASCADED_RX);
    let plan = make_pilot_plan(cfg, Mode::Cascaded, p.subblocks, p.tau, 0, &mut rx_rng)?;
    let sbar = build_sbar(&plan, cfg)?;
    let task = LinearTask::factored(&ch.w_c, &ch.sigma_alpha_c, &sbar, ch.budget.noise_bs)?;
    let obs = simulate_bs_rx(&plan, cfg, ch, &mut rx_rng)?;
    let truth = ch.cascaded();
    let (rows, cols) = truth.shape();
    let shared = start.elapsed();
    let mut out = TrialOutcome::default();

    if spec.wants(EstimatorKind::TaskBased) || spec.wants(EstimatorKind::TaskBasedNoDither) {
        let t0 = Instant::now();
        let design = design_task_quantizer(
            &task.gamma,
            &task.sigma_y,
            p.g_cascaded,
            p.total_bits,
            spec.eta,
            true,
        )?;
        let build = shared + t0.elapsed();
        if spec.wants(EstimatorKind::TaskBased) {
            let t1 = Instant::now();
            let r = estimate_cascaded(
                &obs.y,
                &design,
                &ch.c,
                cfg,
                &mut trial_rng(seed, stream::TASK_DITHER),
            )?;
            out.push("task_based", r.nmse, build + t1.elapsed());
        }
        if spec.wants(EstimatorKind::TaskBasedNoDither) {
            let t1 = Instant::now();
            let plain = design.with_dither(false);
            let r = estimate_cascaded(
                &obs.y,
                &plain,
                &ch.c,
                cfg,
                &mut trial_rng(seed, stream::TASK_NO_DITHER),
            )?;
            out.push("task_based_no_dither", r.nmse, build + t1.elapsed());
        }
    }
    if spec.wants(EstimatorKind::NoQuant) {
        let t0 = Instant::now();
        let est = mmse_no_quant(&obs.y, &task.gamma)?;
        out.push(
            "no_quant",
            nmse(&truth, &unvec(&est, rows, cols)?)?,
            shared + t0.elapsed(),
        );
    }
    if spec.wants(EstimatorKind::DigitalOnly) || spec.wants(EstimatorKind::Ls) {
        let t0 = Instant::now();
        let rx = DigitalOnly::new(&task.sigma_y, p.total_bits, spec.eta)?;
        let setup = shared + t0.elapsed();
        if spec.wants(EstimatorKind::DigitalOnly) {
            let t1 = Instant::now();
            let est = digital_only(
                &obs.y,
                &task.gamma,
                &rx,
                &mut trial_rng(seed, stream::DIGITAL),
            )?;
            out.push(
                "digital_only",
                nmse(&truth, &unvec(&est, rows, cols)?)?,
                setup + t1.elapsed(),
            );
        }
        if spec.wants(EstimatorKind::Ls) {
            let t1 = Instant::now();
            let q = rx.quantize(&obs.y, &mut trial_rng(seed, stream::DIGITAL))?;
            let alpha = least_squares(&q, &(&sbar * &ch.w_c))?;
            let est = &ch.w_c * alpha.estimate;
            out.push(
                "ls",
                nmse(&truth, &unvec(&est, rows, cols)?)?,
                setup + t1.elapsed(),
            );
        }
    }
    Ok(out)
}

/// Runs the two-stage individual estimator and its references on one trial.
fn individual_trial(
    cfg: &ScenarioConfig,
    spec: &SweepSpec,
    p: &PointParams,
    ch: &ChannelRealization,
    seed: u64,
) -> Result<TrialOutcome> {
    let start = Instant::now();
    let mut rx_rng = trial_rng(seed, stream::INDIVIDUAL_RX);
    let plan = make_pilot_plan(cfg, Mode::Individual, p.subblocks, 1, p.l_a, &mut rx_rng)?;
    let w_zhat = build_w_zhat(&plan, cfg)?;
    let levels_f = levels_from_bits(2.0 * p.sensor_bits as f64, 1);
    let d1 = stage1_design(
        &ch.sigma_f(cfg),
        &w_zhat,
        ch.budget.noise_ris,
        levels_f,
        spec.eta,
        true,
    )?;
    let (z, pi_z) = simulate_ris_rx(&plan, ch, &d1.spec, &mut rx_rng)?;
    let obs = simulate_bs_rx(&plan, cfg, ch, &mut rx_rng)?;
    let shared = start.elapsed();
    let mut out = TrialOutcome::default();

    let two_stage = spec.wants(EstimatorKind::IndividualTwoStage);
    let combined = spec.wants(EstimatorKind::CascadedFromIndividual);
    if two_stage || combined {
        let t0 = Instant::now();
        let f_rep = stage1_estimate(&pi_z, &d1, &ch.f, plan.n_semi_passive())?;
        let f_time = shared + t0.elapsed();
        let t1 = Instant::now();
        let task = g_task(ch, cfg, &build_w_y(&plan, &f_rep.matrix, cfg)?)?;
        let d2 = stage2_design(&task, p.g_individual, p.total_bits, spec.eta, true)?;
        let g_rep = stage2_estimate(&obs.y, &d2, &ch.g, &mut trial_rng(seed, stream::STAGE2))?;
        let g_time = f_time + t1.elapsed();
        out.push("individual_two_stage:F", f_rep.nmse, f_time);
        out.push("individual_two_stage:G", g_rep.nmse, g_time);
        if combined {
            let t2 = Instant::now();
            let c_rep = cascaded_from_individual(&f_rep.matrix, &g_rep.matrix, &ch.cascaded())?;
            out.push(
                "cascaded_from_individual",
                c_rep.nmse,
                g_time + t2.elapsed(),
            );
        }
    }
    if spec.wants(EstimatorKind::NoQuant) {
        let t0 = Instant::now();
        let f_est = mmse_no_quant(&crate::linalg::vec(&z), &d1.mmse)?;
        let (l, k) = ch.f.shape();
        out.push(
            "no_quant:F",
            nmse(&ch.f, &unvec(&f_est, l, k)?)?,
            shared + t0.elapsed(),
        );
        let t1 = Instant::now();
        let task = g_task(ch, cfg, &build_w_y(&plan, &ch.f, cfg)?)?;
        let g_est = mmse_no_quant(&obs.y, &task.gamma)?;
        let (n, l) = ch.g.shape();
        out.push(
            "no_quant:G",
            nmse(&ch.g, &unvec(&g_est, n, l)?)?,
            shared + t1.elapsed(),
        );
    }
    Ok(out)
}

/// Worker count from `RIS_TQ_THREADS`, defaulting to the available cores.
pub fn configured_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::InvalidConfig(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

fn run_trials<F>(n_trials: usize, threads: usize, f: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(usize) -> Result<TrialOutcome> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            return pool.install(|| (0..n_trials).into_par_iter().map(&f).collect());
        }
    }
    let _ = threads;
    (0..n_trials).map(f).collect()
}

/// Runs the sweep with the worker count from the environment.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    run_sweep_with_threads(spec, configured_threads()?)
}

pub fn run_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let cfg = spec.scenario_config()?;
    let mut rows = Vec::new();
    for &value in &spec.axis_values {
        for mode in spec.modes() {
            let p = PointParams::resolve(spec, &cfg, mode, value);
            let series = match mode {
                Mode::Cascaded => cascaded_series(spec, &p, &cfg),
                Mode::Individual => individual_series(spec, &p),
            };
            if series.is_empty() {
                continue;
            }
            if mode == Mode::Cascaded && levels_from_bits(p.total_bits, p.g_cascaded) < 2 {
                log::info!(
                    "{}={value}: task-based ADCs have a single level",
                    spec.sweep_axis.name()
                );
            }
            let outcomes = run_trials(spec.n_trials, threads, |trial| {
                let seed = spec.base_seed.wrapping_add(trial as u64);
                let ch = sample_channels(&cfg, &mut trial_rng(seed, stream::CHANNEL))?;
                match mode {
                    Mode::Cascaded => cascaded_trial(&cfg, spec, &p, &ch, seed),
                    Mode::Individual => individual_trial(&cfg, spec, &p, &ch, seed),
                }
            })?;
            for s in &series {
                let mean =
                    outcomes.iter().map(|o| o.get(s.label).0).sum::<f64>() / outcomes.len() as f64;
                let wall: Duration = outcomes.iter().map(|o| o.get(s.label).1).sum();
                rows.push(ResultRow {
                    scenario_id: spec.scenario_id.clone(),
                    estimator: s.label.to_string(),
                    axis_name: spec.sweep_axis.name().to_string(),
                    axis_value: value,
                    trial_count: outcomes.len(),
                    nmse_linear_mean: mean,
                    nmse_db: to_db(mean),
                    bits_total: s.bits_total,
                    bits_per_adc: bits_per_adc(s.bits_total, s.n_adc_pairs),
                    wall_time_ms: wall.as_secs_f64() * 1e3,
                });
            }
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// `floor(bits_total / (2G))`, zero when there are no ADCs.
pub fn bits_per_adc(bits_total: f64, n_adc_pairs: usize) -> u64 {
    if n_adc_pairs == 0 || bits_total <= 0.0 {
        return 0;
    }
    (bits_total / (2.0 * n_adc_pairs as f64) + 1e-12).floor() as u64
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.scenario_id
            .cmp(&b.scenario_id)
            .then_with(|| a.estimator.cmp(&b.estimator))
            .then_with(|| a.axis_value.total_cmp(&b.axis_value))
    });
}

/// `%.9g`-style formatting.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidConfig(format!("CSV write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.estimator.clone(),
            r.axis_name.clone(),
            fmt_sig9(r.axis_value),
            r.trial_count.to_string(),
            fmt_sig9(r.nmse_linear_mean),
            fmt_sig9(r.nmse_db),
            fmt_sig9(r.bits_total),
            r.bits_per_adc.to_string(),
            fmt_sig9(r.wall_time_ms),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidConfig(format!("CSV write failed: {e}")))?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Mean of linear NMSE values, then dB.
pub fn mean_nmse_db(values: &[f64]) -> f64 {
    to_db(values.iter().sum::<f64>() / values.len() as f64)
}
