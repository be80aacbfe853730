//! Fast invariant checks behind `ris-tq selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian_vector, resample_gains, sample_channels, ScenarioConfig};
use crate::error::Result;
use crate::estimators::{design_task_quantizer, LinearTask};
use crate::harness::{csv_string, fmt_sig9, run_sweep_with_threads, SweepSpec, CSV_HEADER};
use crate::linalg::{numerical_rank, RANK_TOL};
use crate::pilot::{build_sbar, make_pilot_plan, Mode};
use crate::quantizer::{q_scalar, QuantizerSpec};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Self { name, pass, detail }
    }
}

/// Dithered in-range error variance against `step^2 / 6`.
fn quantizer_variance() -> Result<Check> {
    let spec = QuantizerSpec::new(8, 1.0, 2.0, true)?;
    let half = 0.5 * spec.step();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let x = rng.random_range(-(1.0 - half)..(1.0 - half));
        let beta = rng.random_range(-half..=half);
        let e = q_scalar(x + beta, &spec)? - x;
        acc += e * e;
    }
    let ratio = acc / n as f64 / (spec.step().powi(2) / 6.0);
    Ok(Check::new(
        "quantizer-variance",
        (ratio - 1.0).abs() < 0.05,
        format!("ratio {ratio:.4}"),
    ))
}

/// Fixed desk channel with a cascaded training plan.
fn desk_task(
    seed: u64,
) -> Result<(
    ScenarioConfig,
    crate::channel::ChannelRealization,
    crate::ComplexMatrix,
    LinearTask,
)> {
    let cfg = ScenarioConfig::desk();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = sample_channels(&cfg, &mut rng)?;
    let plan = make_pilot_plan(&cfg, Mode::Cascaded, 4, 2, 0, &mut rng)?;
    let sbar = build_sbar(&plan, &cfg)?;
    let task = LinearTask::factored(&ch.w_c, &ch.sigma_alpha_c, &sbar, ch.budget.noise_bs)?;
    Ok((cfg, ch, sbar, task))
}

fn full_rank_cascaded() -> Result<Check> {
    let (cfg, ch, _, task) = desk_task(2)?;
    let m = cfg.paths_rb * cfg.total_paths_ur();
    let (rw, rg) = (
        numerical_rank(&ch.w_c, RANK_TOL),
        numerical_rank(&task.gamma, RANK_TOL),
    );
    Ok(Check::new(
        "cascaded-rank",
        rw == m && rg == m,
        format!("rank W_c {rw}, rank Gamma_c {rg}, expected {m}"),
    ))
}

/// At very high resolution the quantized estimate equals `Gamma y`.
fn high_resolution_limit() -> Result<Check> {
    let (cfg, ch, sbar, task) = desk_task(3)?;
    let g = cfg.paths_rb * cfg.total_paths_ur();
    let design = design_task_quantizer(
        &task.gamma,
        &task.sigma_y,
        g,
        2.0 * g as f64 * 40.0,
        2.0,
        true,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = &sbar * &ch.c + complex_gaussian_vector(&mut rng, sbar.nrows(), ch.budget.noise_bs);
    let exact = &task.gamma * &y;
    let rel = (design.apply(&y, &mut rng)? - &exact).norm() / exact.norm();
    Ok(Check::new(
        "high-resolution-limit",
        rel < 1e-6,
        format!("relative deviation {rel:.2e}"),
    ))
}

/// Closed-form quantization MSE against a short Monte-Carlo run, with a wide
/// enough support that overload is rare.
fn predicted_mse() -> Result<Check> {
    let (cfg, ch, sbar, task) = desk_task(5)?;
    let g = cfg.paths_rb * cfg.total_paths_ur();
    let design = design_task_quantizer(
        &task.gamma,
        &task.sigma_y,
        g,
        2.0 * g as f64 * 4.0,
        4.0,
        true,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trials = 2000;
    let mut acc = 0.0;
    for _ in 0..trials {
        let draw = resample_gains(&cfg, &ch, &mut rng)?;
        let y =
            &sbar * &draw.c + complex_gaussian_vector(&mut rng, sbar.nrows(), ch.budget.noise_bs);
        acc += (&task.gamma * &y - design.apply(&y, &mut rng)?).norm_squared();
    }
    let ratio = acc / trials as f64 / design.predicted_mse;
    Ok(Check::new(
        "predicted-mse",
        (ratio - 1.0).abs() < 0.1,
        format!("empirical/predicted {ratio:.4}"),
    ))
}

fn csv_format() -> Result<Check> {
    let json = r#"{"scenario_id":"selftest","mode":"cascaded","sweep_axis":"total_bits",
        "axis_values":[64],"estimators":["task_based","no_quant"],"n_trials":3,"base_seed":7}"#;
    let spec = SweepSpec::from_json(json, "selftest")?;
    let rows = run_sweep_with_threads(&spec, 1)?;
    let text = csv_string(&rows)?;
    let again = csv_string(&run_sweep_with_threads(&spec, 1)?)?;
    let strip = |s: &str| -> Vec<String> {
        s.lines()
            .map(|l| l.rsplit_once(',').map_or(l, |p| p.0).to_string())
            .collect()
    };
    let header_ok = text.lines().next() == Some(CSV_HEADER);
    let format_ok = fmt_sig9(1.0 / 3.0) == "0.333333333" && fmt_sig9(1e-7) == "1e-07";
    let same = strip(&text) == strip(&again);
    Ok(Check::new(
        "csv-and-determinism",
        header_ok && format_ok && same && rows.len() == 2,
        format!("header {header_ok}, number format {format_ok}, rerun identical {same}"),
    ))
}

/// Runs every check; an error inside a check counts as a failure.
pub fn run_all() -> Vec<Check> {
    let checks: [(&'static str, fn() -> Result<Check>); 5] = [
        ("quantizer-variance", quantizer_variance),
        ("cascaded-rank", full_rank_cascaded),
        ("high-resolution-limit", high_resolution_limit),
        ("predicted-mse", predicted_mse),
        ("csv-and-determinism", csv_format),
    ];
    checks
        .into_iter()
        .map(|(name, f)| f().unwrap_or_else(|e| Check::new(name, false, format!("error: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_all() {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }
}
