//! Exact fault-line measures of the 2D (transverse-field) Ising model against the Peierls bound.

use super::SuiteOutput;
use crate::cells;
use crate::config::{ExperimentConfig, RegionSpec};
use crate::output::Table;
use serde::{Deserialize, Serialize};
use slowmix::bottleneck::RegionLabel;
use slowmix::lattice::{classify_all, exact_fault_measure, peierls_bound, tfim_log_diagonal, FaultModel};
use slowmix::Error;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Fault lines with at most `floor(kappa L)` defects are counted.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Also report Gibbs weights of the crossing-cluster regions (needs a `fault_line` region).
    #[serde(default)]
    pub region_weights: bool,
    /// Require the h = 0 measure to be nonincreasing in beta.
    #[serde(default = "yes")]
    pub check_monotone: bool,
}

fn default_kappa() -> f64 {
    0.25
}
fn yes() -> bool {
    true
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    let p: Params = cfg.params();
    let ls = cfg.sweep.l.clone().unwrap_or(vec![3, 4]);
    let betas = cfg.sweep.beta.clone().unwrap_or(vec![0.5, 1.0, 2.0, 4.0]);
    let hs = cfg.sweep.h.clone().unwrap_or(vec![0.0]);
    let c0 = match &cfg.region {
        Some(RegionSpec::FaultLine { c0 }) => Some(*c0),
        None => None,
        Some(other) => {
            return Err(Error::InvalidParameter(format!(
                "tfim-bottleneck takes a fault_line region, got {other:?}"
            )))
        }
    };
    if p.region_weights && c0.is_none() {
        return Err(Error::InvalidParameter("region_weights needs a fault_line region with c0".into()));
    }
    let mut out = SuiteOutput::new();
    let mut table = Table::new("fault_measure", &["l", "h", "beta"]);
    for &l in &ls {
        let k_max = (p.kappa * l as f64 + 1e-12).floor() as usize;
        let labels = match (p.region_weights, c0) {
            (true, Some(c0)) => Some(classify_all(l, c0)?),
            _ => None,
        };
        for &h in &hs {
            let model = if h == 0.0 { FaultModel::Classical } else { FaultModel::Quantum(h) };
            let mut previous: Option<(f64, f64)> = None;
            let mut sorted = betas.clone();
            sorted.sort_by(f64::total_cmp);
            for &beta in &sorted {
                let key = cells![l, h, beta];
                let measure = exact_fault_measure(model, beta, k_max, l)?;
                table.exact(&key, "k_max", k_max as f64);
                table.exact(&key, "fault_measure", measure);
                match peierls_bound(beta, h, p.kappa, l) {
                    Ok(bound) => {
                        table.exact(&key, "peierls_bound", bound);
                        table.exact(&key, "in_window", 1.0);
                        if !(measure <= bound) {
                            out.failures.push(format!("l={l} h={h} beta={beta}: measure {measure:.4e} > bound {bound:.4e}"));
                        }
                    }
                    Err(Error::OutsideWindow(_)) => table.exact(&key, "in_window", 0.0),
                    Err(e) => return Err(e),
                }
                if p.check_monotone && h == 0.0 {
                    if let Some((b0, m0)) = previous {
                        if measure > m0 * (1.0 + 1e-12) {
                            out.failures.push(format!(
                                "l={l}: measure rose from {m0:.4e} (beta={b0}) to {measure:.4e} (beta={beta})"
                            ));
                        }
                    }
                    previous = Some((beta, measure));
                }
                if let Some(labels) = &labels {
                    let logd = tfim_log_diagonal(l, h, beta)?;
                    let top = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut w = [0.0f64; 3];
                    for (lv, lab) in logd.iter().zip(labels) {
                        let slot = match lab {
                            RegionLabel::A => 0,
                            RegionLabel::B => 1,
                            RegionLabel::C => 2,
                        };
                        w[slot] += (lv - top).exp();
                    }
                    let z: f64 = w.iter().sum();
                    table.exact(&key, "tr_a", w[0] / z);
                    table.exact(&key, "tr_b", w[1] / z);
                    table.exact(&key, "tr_c", w[2] / z);
                }
            }
        }
    }
    out.tables = vec![table];
    Ok(out)
}
