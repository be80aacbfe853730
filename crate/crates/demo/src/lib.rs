//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every function returns a JSON string so the page needs no glue beyond
//! `JSON.parse`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use ris_tq::channel::{sample_channels, ScenarioConfig};
use ris_tq::estimators::{design_task_quantizer, LinearTask};
use ris_tq::harness::{run_sweep_with_threads, SweepSpec};
use ris_tq::pilot::{build_sbar, make_pilot_plan, Mode};
use ris_tq::quantizer::{q_scalar, QuantizerSpec};

fn to_js<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn js_err(e: ris_tq::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
struct Curve {
    input: Vec<f64>,
    output: Vec<f64>,
    step: f64,
}

/// Staircase of a `levels`-level ADC with unit support over `[-1.5, 1.5]`.
#[wasm_bindgen]
pub fn quantizer_curve(levels: u32, points: u32) -> Result<String, JsError> {
    let spec = QuantizerSpec::new(levels as u64, 1.0, 2.0, false).map_err(js_err)?;
    let n = points.max(2) as usize;
    let input: Vec<f64> = (0..n)
        .map(|i| -1.5 + 3.0 * i as f64 / (n - 1) as f64)
        .collect();
    let output = input
        .iter()
        .map(|&x| q_scalar(x, &spec))
        .collect::<Result<Vec<_>, _>>()
        .map_err(js_err)?;
    to_js(&Curve {
        input,
        output,
        step: spec.step(),
    })
}

#[derive(Serialize)]
struct Profile {
    singular_values: Vec<f64>,
    lambda_sq: Vec<f64>,
    bits_per_adc: f64,
    mmse: f64,
    predicted_mse: f64,
}

/// Water-filling weights of the analog combiner for one desk-scale channel.
#[wasm_bindgen]
pub fn water_fill_profile(seed: u64, total_bits: f64) -> Result<String, JsError> {
    let cfg = ScenarioConfig::desk();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = sample_channels(&cfg, &mut rng).map_err(js_err)?;
    let plan = make_pilot_plan(&cfg, Mode::Cascaded, 4, 2, 0, &mut rng).map_err(js_err)?;
    let sbar = build_sbar(&plan, &cfg).map_err(js_err)?;
    let task = LinearTask::factored(&ch.w_c, &ch.sigma_alpha_c, &sbar, ch.budget.noise_bs)
        .map_err(js_err)?;
    let g = cfg.paths_rb * cfg.total_paths_ur();
    let design = design_task_quantizer(&task.gamma, &task.sigma_y, g, total_bits, 2.0, true)
        .map_err(js_err)?;
    to_js(&Profile {
        singular_values: design.singular_values[..g.min(design.singular_values.len())].to_vec(),
        lambda_sq: design.lambda_sq.clone(),
        bits_per_adc: total_bits / (2.0 * g as f64),
        mmse: task.mmse(),
        predicted_mse: design.predicted_mse,
    })
}

#[derive(Serialize)]
struct SweepPoint {
    estimator: String,
    total_bits: f64,
    nmse_db: f64,
}

/// Small cascaded NMSE-versus-bits sweep, single threaded.
#[wasm_bindgen]
pub fn nmse_sweep(bits: Vec<f64>, trials: u32, seed: u64) -> Result<String, JsError> {
    let spec = serde_json::json!({
        "scenario_id": "demo",
        "mode": "cascaded",
        "sweep_axis": "total_bits",
        "axis_values": bits,
        "estimators": ["task_based", "no_quant", "digital_only"],
        "n_trials": trials,
        "base_seed": seed,
    });
    let spec = SweepSpec::from_json(&spec.to_string(), "demo").map_err(js_err)?;
    let rows = run_sweep_with_threads(&spec, 1).map_err(js_err)?;
    let points: Vec<SweepPoint> = rows
        .into_iter()
        .map(|r| SweepPoint {
            estimator: r.estimator,
            total_bits: r.axis_value,
            nmse_db: r.nmse_db,
        })
        .collect();
    to_js(&points)
}
