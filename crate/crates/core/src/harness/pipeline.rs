//! One seeded Monte-Carlo trial: channel → sounding → SOMP → reconstruction.

use serde::{Deserialize, Serialize};

use crate::channel::{self, FrequencyChannel, PathSet};
use crate::config::{RecoveryConfig, ScenarioConfig, SoundingConfig};
use crate::dictionary::{build_dictionary, RedundantDictionary, SensingOperator};
use crate::error::Result;
use crate::harness::metrics::nmse_db;
use crate::harness::seeds::{trial_rng, Purpose};
use crate::linalg::CMat;
use crate::recovery::{
    angular_delay_transform, reconstruct_spatial, somp, AngularDelayGrid, DftConvention,
    SompOptions, SparseEstimate, StopRule,
};
use crate::sounding::{make_plan, sound, MeasurementSet};

/// Everything needed to run the estimator on a fresh channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSetup {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub sounding: SoundingConfig,
    #[serde(default)]
    pub recovery: RecoveryConfig,
}

impl EstimationSetup {
    /// 8×8 IRS, K = 64, L_CP = 16, M = 32, β = 2.
    pub fn desk() -> Self {
        Self {
            scenario: ScenarioConfig::desk(),
            sounding: SoundingConfig::default(),
            recovery: RecoveryConfig::default(),
        }
    }

    /// 16×16 IRS, K = 256, M = 64, β = 4.
    pub fn paper() -> Self {
        Self {
            scenario: ScenarioConfig::paper(),
            sounding: SoundingConfig {
                measurements: 64,
                ..SoundingConfig::default()
            },
            recovery: RecoveryConfig {
                beta: 4,
                ..RecoveryConfig::default()
            },
        }
    }

    /// [`Self::paper`] with a 24×24 IRS.
    pub fn paper_large() -> Self {
        Self {
            scenario: ScenarioConfig::paper_large(),
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.sounding.slots()?;
        if self.recovery.beta == 0 {
            return Err(crate::error::Error::Config(
                "beta must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn dictionary(&self) -> Result<RedundantDictionary> {
        build_dictionary(&self.scenario, self.recovery.beta, self.recovery.grid)
    }

    pub fn somp_options(&self, noise_var: f64) -> SompOptions {
        SompOptions {
            stop: StopRule::noise_floor(
                self.sounding.measurements,
                noise_var,
                self.scenario.paths,
                self.recovery.residual_margin,
            ),
            scoring: self.recovery.scoring,
        }
    }

    /// Channel realization for `trial`; depends only on the scenario and seeds.
    pub fn channel(&self, master: u64, trial: u64) -> (PathSet, FrequencyChannel) {
        channel::generate(
            &self.scenario,
            &mut trial_rng(master, trial, Purpose::Channel),
        )
    }

    /// Sounds `truth` with the plan and noise of `trial`.
    pub fn measure(
        &self,
        truth: &FrequencyChannel,
        master: u64,
        trial: u64,
    ) -> Result<MeasurementSet> {
        let plan = make_plan(
            &self.scenario,
            &self.sounding,
            &mut trial_rng(master, trial, Purpose::Plan),
        )?;
        sound(
            truth,
            &plan,
            self.sounding.snr_db,
            &mut trial_rng(master, trial, Purpose::Noise),
        )
    }

    /// Runs SOMP on a measurement set.
    pub fn estimate(
        &self,
        meas: &MeasurementSet,
        dict: &RedundantDictionary,
    ) -> Result<SparseEstimate> {
        let op = SensingOperator::new(&meas.phi, dict, self.recovery.dense_cap)?;
        somp(&meas.stacked(), &op, &self.somp_options(meas.noise_var))
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub paths: PathSet,
    pub truth: FrequencyChannel,
    pub measurements: MeasurementSet,
    pub estimate: SparseEstimate,
    pub reconstructed: FrequencyChannel,
    pub nmse_db: f64,
}

impl TrialOutput {
    /// `Ĝ` from the SOMP estimate.
    pub fn noisy_grid(&self) -> AngularDelayGrid {
        angular_delay_transform(&self.estimate.dense_grid(), DftConvention::Unitary)
    }

    /// `G` from the true channel's least-squares projection onto the dictionary.
    pub fn clean_grid(&self, dict: &RedundantDictionary) -> AngularDelayGrid {
        clean_grid(&self.truth, dict)
    }
}

/// Projects each `H_k` onto the dictionary and maps it to the angular-delay domain.
pub fn clean_grid(truth: &FrequencyChannel, dict: &RedundantDictionary) -> AngularDelayGrid {
    let cols: Vec<_> = truth.subchannels.iter().map(|h| dict.project(h)).collect();
    let h_tilde = if cols.is_empty() {
        CMat::zeros(dict.atoms(), 0)
    } else {
        CMat::from_columns(&cols)
    };
    angular_delay_transform(&h_tilde, DftConvention::Unitary)
}

/// Runs trial `trial` of the experiment seeded by `master`.
pub fn run_trial(
    setup: &EstimationSetup,
    dict: &RedundantDictionary,
    master: u64,
    trial: u64,
) -> Result<TrialOutput> {
    let (paths, truth) = setup.channel(master, trial);
    let measurements = setup.measure(&truth, master, trial)?;
    let estimate = setup.estimate(&measurements, dict)?;
    let reconstructed = reconstruct_spatial(&estimate, dict)?;
    let nmse_db = nmse_db(&truth, &reconstructed)?;
    Ok(TrialOutput {
        paths,
        truth,
        measurements,
        estimate,
        reconstructed,
        nmse_db,
    })
}
