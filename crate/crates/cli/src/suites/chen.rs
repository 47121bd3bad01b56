//! Truncation tails of the filtered-generator time integrals and their log-slope in `R`.

use super::SuiteOutput;
use crate::cells;
use crate::config::ExperimentConfig;
use crate::output::Table;
use serde::{Deserialize, Serialize};
use slowmix::classical::linear_fit;
use slowmix::lindblad::chen_truncation_error;
use std::f64::consts::PI;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "default_r")]
    pub r_values: Vec<f64>,
    /// Fail when the coherent-tail slope is further than this (relative) from `-2 pi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tolerance: Option<f64>,
}

fn default_r() -> Vec<f64> {
    (0..=8).map(|k| 1.0 + 0.25 * k as f64).collect()
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    let p: Params = cfg.params();
    let betas = cfg.sweep.beta.clone().unwrap_or(vec![1.0]);
    let mut out = SuiteOutput::new();
    let mut tails = Table::new("tails", &["beta", "omega", "r"]);
    let mut fits = Table::new("slopes", &["beta", "omega"]);
    for &beta in &betas {
        let mut ys = Vec::new();
        for &r in &p.r_values {
            let t = chen_truncation_error(beta, r, p.omega)?;
            let key = cells![beta, p.omega, r];
            tails.exact(&key, "tail_l", t.tail_l);
            tails.exact(&key, "tail_b", t.tail_b);
            ys.push(t.tail_b.ln());
        }
        if p.r_values.len() >= 2 {
            let (slope, _, r2) = linear_fit(&p.r_values, &ys);
            let rel = (slope + 2.0 * PI).abs() / (2.0 * PI);
            let key = cells![beta, p.omega];
            fits.exact(&key, "tail_b_log_slope", slope);
            fits.exact(&key, "target_slope", -2.0 * PI);
            fits.exact(&key, "relative_deviation", rel);
            fits.exact(&key, "r2", r2);
            if let Some(tol) = p.slope_tolerance {
                if !(rel <= tol) {
                    out.failures.push(format!("beta={beta}: tail_b slope {slope:.4} is {:.1}% from -2 pi", 100.0 * rel));
                }
            }
        }
    }
    out.tables = vec![tails, fits];
    Ok(out)
}
