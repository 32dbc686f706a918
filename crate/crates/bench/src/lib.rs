//! Shared fixtures for the pipeline benchmarks.

use lcf_core::data::{gen_synthetic, Dataset, GenSpec, Preset};
use lcf_core::training::{fit_lcf_quadratic, TrainConfig, TrainingBatch};
use lcf_core::{PredictorSpec, Result, StructuralModel};

/// A generated dataset with its model and a fitted perfect predictor.
pub struct Fixture {
    pub model: StructuralModel,
    pub data: Dataset,
    pub cfg: TrainConfig,
    pub spec: PredictorSpec,
}

impl Fixture {
    pub fn new(preset: Preset, n: usize, m: usize) -> Result<Self> {
        let model = preset.model()?;
        let data = gen_synthetic(&GenSpec::preset(preset, n, 0))?;
        let cfg = TrainConfig {
            m,
            ..TrainConfig::default()
        };
        let batch = TrainingBatch::from_config(&data, &model, &cfg)?;
        let spec = fit_lcf_quadratic(&batch, &model, &cfg)?.spec;
        Ok(Self {
            model,
            data,
            cfg,
            spec,
        })
    }
}
