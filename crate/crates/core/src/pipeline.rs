//! The two-step fit: spectral initialisation, then EM refinement.

use crate::dataset::BinaryDataset;
use crate::em::{em_refine, EmOptions, EmReport};
use crate::error::Result;
use crate::model::NaiveBayesModel;
use crate::spectral::{fit_spectral, SpectralOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitOptions {
    pub spectral: SpectralOptions,
    pub em: EmOptions,
}

impl FitOptions {
    /// Defaults with the power method keyed by `seed`.
    pub fn seeded(seed: u64) -> Self {
        let mut o = FitOptions::default();
        o.spectral.power.seed = seed;
        o
    }
}

pub fn fit_model(data: &BinaryDataset, k: usize, opts: &FitOptions) -> Result<(NaiveBayesModel, EmReport)> {
    let init = fit_spectral(data, k, &opts.spectral)?;
    em_refine(&init, data, &opts.em).map_err(|e| e.in_stage("em"))
}
