//! Verification suites. Each suite owns a typed parameter block and returns
//! result tables plus a list of failed assertions.

mod barrier;
mod chen;
mod codes;
mod davies;
mod fk;
mod lightcone;
mod mixing;
mod tfim;

use crate::config::ExperimentConfig;
use crate::output::{PointSeed, Table};
use serde::de::DeserializeOwned;
use serde::Serialize;
use slowmix::rng::derive_seed;

pub struct SuiteOutput {
    pub tables: Vec<Table>,
    pub failures: Vec<String>,
    pub seeds: Vec<PointSeed>,
}

impl SuiteOutput {
    fn new() -> Self {
        SuiteOutput {
            tables: Vec::new(),
            failures: Vec::new(),
            seeds: Vec::new(),
        }
    }

    /// Records and returns the seed of sweep point `index`.
    fn seed_for(&mut self, master: u64, index: usize, point: String) -> u64 {
        let seed = derive_seed(master, index as u64);
        self.seeds.push(PointSeed { index, point, seed });
        seed
    }
}

fn roundtrip<P: DeserializeOwned + Serialize>(text: &str) -> Result<serde_json::Value, serde_json::Error> {
    let p: P = serde_json::from_str(text)?;
    Ok(serde_json::to_value(p).expect("parameters serialize"))
}

/// Parses a suite's `params` block and returns it with defaults filled in.
pub fn validate_params(suite: &str, text: &str) -> Result<serde_json::Value, serde_json::Error> {
    match suite {
        "fk-verify" => roundtrip::<fk::Params>(text),
        "davies-fixed-point" => roundtrip::<davies::Params>(text),
        "mixing-vs-bound" => roundtrip::<mixing::Params>(text),
        "tfim-bottleneck" => roundtrip::<tfim::Params>(text),
        "code-expansion" => roundtrip::<codes::Params>(text),
        "classical-barrier" => roundtrip::<barrier::Params>(text),
        "lightcone" => roundtrip::<lightcone::Params>(text),
        "chen-truncation" => roundtrip::<chen::Params>(text),
        other => unreachable!("suite {other} was checked on load"),
    }
}

pub fn run(cfg: &ExperimentConfig) -> slowmix::Result<SuiteOutput> {
    match cfg.suite.as_str() {
        "fk-verify" => fk::run(cfg),
        "davies-fixed-point" => davies::run(cfg),
        "mixing-vs-bound" => mixing::run(cfg),
        "tfim-bottleneck" => tfim::run(cfg),
        "code-expansion" => codes::run(cfg),
        "classical-barrier" => barrier::run(cfg),
        "lightcone" => lightcone::run(cfg),
        "chen-truncation" => chen::run(cfg),
        other => unreachable!("suite {other} was checked on load"),
    }
}
