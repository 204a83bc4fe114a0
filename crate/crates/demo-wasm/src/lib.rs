//! wasm-bindgen surface for the browser demo in `www/`.
//!
//! Each export takes plain values and returns a JSON string so the page
//! needs no generated TypeScript types.

use ratelessnc::field::{Field, Fp251};
use ratelessnc::harness::{run_experiment, run_trial, trial_rng, ExperimentConfig, Overrides};
use ratelessnc::linalg::{vandermonde, Matrix};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Keeps one click from freezing the tab.
const MAX_TRIALS: u64 = 5_000;

fn parse(config: &str) -> Result<ExperimentConfig, String> {
    let cfg = ExperimentConfig::from_toml(config, None, &Overrides::default()).map_err(|e| e.to_string())?;
    if cfg.trials > MAX_TRIALS {
        return Err(format!("at most {MAX_TRIALS} trials in the browser"));
    }
    Ok(cfg)
}

/// Runs a whole experiment and returns `{summary, stages}`, where `stages`
/// counts trials by the number of stages they used.
pub fn experiment_json(config: &str) -> Result<String, String> {
    let cfg = parse(config)?;
    let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let longest = res.records.iter().map(|r| r.stages).max().unwrap_or(0);
    let mut stages = vec![0u64; longest + 1];
    for r in &res.records {
        stages[r.stages] += 1;
    }
    serde_json::to_string(&json!({ "summary": res.summary, "stages": stages })).map_err(|e| e.to_string())
}

/// One session, stage by stage, with the cut-set totals next to each verdict.
pub fn trace_json(config: &str, trial: u64) -> Result<String, String> {
    let cfg = parse(config)?;
    let report = run_trial(&cfg, trial).map_err(|e| e.to_string())?;
    let r = &report.record;
    let (mut sum_m, mut sum_z) = (0, 0);
    let rows: Vec<_> = r
        .stage_trace
        .iter()
        .zip(&r.statuses)
        .enumerate()
        .map(|(i, (&(m, z), status))| {
            sum_m += m;
            sum_z += z;
            json!({
                "stage": i + 1,
                "M": m,
                "z": z,
                "received": sum_m,
                "needed": cfg.b + sum_z,
                "status": status,
            })
        })
        .collect();
    serde_json::to_string(&json!({
        "outcome": r.outcome,
        "correct": r.correct,
        "rate": r.rate,
        "stages": rows,
        "audit_checks": report.audit.checks,
        "audit_violations": report.audit.violations,
    }))
    .map_err(|e| e.to_string())
}

/// Fraction of forged single-row messages over GF(251) that pass `columns`
/// random hash points. `worst_case` uses a difference polynomial with the
/// most roots a width-`width` row allows; otherwise the difference is
/// uniform and nonzero.
pub fn hash_pass_rate(width: usize, columns: usize, samples: u32, worst_case: bool, seed: u64) -> Result<f64, String> {
    if width == 0 || width >= 251 || columns == 0 || samples == 0 {
        return Err("need 0 < width < 251, columns > 0 and samples > 0".into());
    }
    let mut rng = trial_rng(seed, 0);
    // x * prod_{a=1}^{width-1} (x - a): vanishes at width distinct points.
    let mut poly = vec![Fp251::ONE];
    for a in 1..width as u32 {
        let a = Fp251::from_u32(a);
        let mut next = vec![Fp251::ZERO; poly.len() + 1];
        for (k, &c) in poly.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= a * c;
        }
        poly = next;
    }
    let worst = Matrix::row_vector(poly);
    let mut pass = 0u32;
    for _ in 0..samples {
        let delta = if worst_case {
            worst.clone()
        } else {
            loop {
                let d = Matrix::<Fp251>::random(1, width, &mut rng);
                if !d.is_zero() {
                    break d;
                }
            }
        };
        let points: Vec<Fp251> = (0..columns).map(|_| Fp251::random(&mut rng)).collect();
        // The hash is linear, so a forgery passes exactly when the
        // difference hashes to zero.
        if delta.mul(&vandermonde(&points, width)).map_err(|e| e.to_string())?.is_zero() {
            pass += 1;
        }
    }
    Ok(pass as f64 / samples as f64)
}

#[wasm_bindgen(js_name = runExperiment)]
pub fn run_experiment_js(config: &str) -> Result<String, JsError> {
    experiment_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = traceSession)]
pub fn trace_session_js(config: &str, trial: u32) -> Result<String, JsError> {
    trace_json(config, trial as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = hashPassRate)]
pub fn hash_pass_rate_js(width: u32, columns: u32, samples: u32, worst_case: bool, seed: u32) -> Result<f64, JsError> {
    hash_pass_rate(width as usize, columns as usize, samples, worst_case, seed as u64).map_err(|e| JsError::new(&e))
}
