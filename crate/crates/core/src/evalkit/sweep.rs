use rayon::prelude::*;

use super::metrics::{metrics, MetricReport};
use crate::bussim::{ProgramActivity, Scenario, SUPPORTED_BITRATES};
use crate::canproto::FrameFormat;
use crate::pipeline::{Experiment, PipelineConfig, SenderLabel};

/// One combination of factor levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub bitrate: u32,
    pub format: FrameFormat,
    pub program: ProgramActivity,
}

/// Levels and run parameters of a sweep over the lab bus.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub bitrates: Vec<u32>,
    pub formats: Vec<FrameFormat>,
    pub programs: Vec<ProgramActivity>,
    pub frames_per_ecu: usize,
    /// Cell `i` in key order runs with seed `seed + i`.
    pub seed: u64,
    pub config: PipelineConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            bitrates: SUPPORTED_BITRATES.to_vec(),
            formats: vec![FrameFormat::Standard, FrameFormat::Extended],
            programs: vec![ProgramActivity::Uniform, ProgramActivity::Heterogeneous],
            frames_per_ecu: 1000,
            seed: 0,
            config: PipelineConfig::default(),
        }
    }
}

impl SweepSpec {
    /// All cells, in key order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut keys = Vec::new();
        for &bitrate in &self.bitrates {
            for &format in &self.formats {
                for &program in &self.programs {
                    keys.push(CellKey {
                        bitrate,
                        format,
                        program,
                    });
                }
            }
        }
        keys.sort();
        keys.dedup();
        keys
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorCell {
    pub key: CellKey,
    pub seed: u64,
    /// Metrics of the test-split sender confusion, or the pipeline error.
    pub result: Result<MetricReport<SenderLabel>, String>,
}

impl FactorCell {
    pub fn accuracy(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.accuracy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorGrid {
    /// In key order.
    pub cells: Vec<FactorCell>,
}

impl FactorGrid {
    pub fn get(&self, key: &CellKey) -> Option<&FactorCell> {
        self.cells.iter().find(|c| &c.key == key)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_err()).count()
    }
}

/// Runs the full pipeline on every cell; cells run in parallel and a failing
/// cell records its error instead of aborting the sweep.
pub fn factor_sweep(spec: &SweepSpec) -> FactorGrid {
    let cells = spec
        .cells()
        .into_par_iter()
        .enumerate()
        .map(|(i, key)| {
            let seed = spec.seed.wrapping_add(i as u64);
            let scenario = Scenario::lab_variant(key.bitrate, key.format, key.program, spec.frames_per_ecu, seed);
            let result = Experiment::<f64>::new(scenario, spec.config.clone())
                .run()
                .map(|r| metrics(&r.test_confusion))
                .map_err(|e| e.to_string());
            FactorCell { key, seed, result }
        })
        .collect();
    FactorGrid { cells }
}
