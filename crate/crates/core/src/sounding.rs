//! Uplink pilot sounding through a few switched active IRS elements.
//!
//! Each of the `B` slots routes `N_RF` active elements to the receive chains
//! while the UE transmits an all-ones pilot through a random constant-modulus
//! precoder. Stacking the slots gives `y_k = Φ vec(H_k) + n_k`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::FrequencyChannel;
use crate::config::{Placement, ScenarioConfig, SoundingConfig};
use crate::error::{Error, Result};
use crate::linalg::{vec, CMat, CVec, ONE, ZERO};

/// One training slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    /// IRS elements wired to the RF chains, one per chain.
    pub active: Vec<usize>,
    /// `F^b = F_RF^b F_BB^b`, `N_UE × N_S`.
    pub precoder: CMat,
    /// Pilot vector `s^b` of length `N_S`.
    pub pilot: CVec,
}

impl Slot {
    /// Effective transmit vector `F^b s^b`.
    pub fn transmit(&self) -> CVec {
        &self.precoder * &self.pilot
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundingPlan {
    pub slots: Vec<Slot>,
    pub irs_elements: usize,
    pub ue_elements: usize,
}

impl SoundingPlan {
    pub fn rf_chains(&self) -> usize {
        self.slots.first().map_or(0, |s| s.active.len())
    }

    /// Total measurements `M`.
    pub fn measurements(&self) -> usize {
        self.slots.iter().map(|s| s.active.len()).sum()
    }

    /// Active element of every measurement row, in row order.
    pub fn active_indices(&self) -> Vec<usize> {
        self.slots
            .iter()
            .flat_map(|s| s.active.iter().copied())
            .collect()
    }

    /// Aggregate measurement matrix `Φ`, `M × (N_IRS · N_UE)`.
    pub fn measurement_matrix(&self) -> Result<CMat> {
        let blocks = self
            .slots
            .iter()
            .map(|slot| {
                let w = make_selection_matrix(&slot.active, self.irs_elements)?;
                let x = slot.transmit();
                Ok(crate::linalg::kron(
                    &CMat::from_row_slice(1, x.len(), x.as_slice()),
                    &w,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let cols = self.irs_elements * self.ue_elements;
        let mut phi = CMat::zeros(self.measurements(), cols);
        let mut row = 0;
        for block in blocks {
            phi.rows_mut(row, block.nrows()).copy_from(&block);
            row += block.nrows();
        }
        Ok(phi)
    }
}

/// Stacked one-hot rows: row `r` has its single 1 at column `indices[r]`.
pub fn make_selection_matrix(indices: &[usize], n_total: usize) -> Result<CMat> {
    let mut seen = vec![false; n_total];
    for &i in indices {
        if i >= n_total {
            return Err(Error::InvalidPlan(format!(
                "element index {i} out of range for {n_total} elements"
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidPlan(format!("element index {i} repeated")));
        }
    }
    let mut w = CMat::zeros(indices.len(), n_total);
    for (r, &i) in indices.iter().enumerate() {
        w[(r, i)] = ONE;
    }
    Ok(w)
}

/// Draws a sounding plan: active elements, precoder phases.
pub fn make_plan<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    sounding: &SoundingConfig,
    rng: &mut R,
) -> Result<SoundingPlan> {
    let slots = sounding
        .slots()
        .map_err(|e| Error::InvalidPlan(e.to_string()))?;
    let n_rf = sounding.rf_chains;
    let n_irs = config.irs_elements();
    let m = sounding.measurements;
    if m > n_irs {
        return Err(Error::InvalidPlan(format!(
            "{m} measurements need more than the {n_irs} IRS elements"
        )));
    }
    let indices: Vec<usize> = match sounding.placement {
        Placement::Random => rand::seq::index::sample(rng, n_irs, m).into_vec(),
        Placement::Grid => (0..m).map(|i| i * n_irs / m).collect(),
    };
    let n_ue = config.ue_elements();
    let n_s = config.ue_streams;
    let plan_slots = indices
        .chunks(n_rf)
        .map(|active| {
            let precoder = CMat::from_fn(n_ue, n_s, |_, _| {
                Complex64::from_polar(1.0, rng.random_range(0.0..TAU))
            });
            Slot {
                active: active.to_vec(),
                precoder,
                pilot: CVec::from_element(n_s, ONE),
            }
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(plan_slots.len(), slots);
    Ok(SoundingPlan {
        slots: plan_slots,
        irs_elements: n_irs,
        ue_elements: n_ue,
    })
}

/// Aggregate pilot observations for every subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// `y_k`, one length-`M` vector per subcarrier.
    pub observations: Vec<CVec>,
    /// Aggregate measurement matrix `Φ`.
    pub phi: CMat,
    /// Noise power per complex dimension, `σ_n²`.
    pub noise_var: f64,
    pub snr_db: f64,
}

impl MeasurementSet {
    pub fn measurements(&self) -> usize {
        self.phi.nrows()
    }

    /// Observations as an `M × K` matrix.
    pub fn stacked(&self) -> CMat {
        let m = self.measurements();
        CMat::from_fn(m, self.observations.len(), |i, k| self.observations[k][i])
    }
}

/// `σ_n² = mean_k ‖Φ vec(H_k)‖² / (M · 10^(snr/10))`.
pub fn calibrate_noise_power(phi: &CMat, channel: &FrequencyChannel, snr_db: f64) -> Result<f64> {
    if channel.subchannels.is_empty() {
        return Err(Error::Shape(
            "no channel realizations to calibrate on".into(),
        ));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let signal = channel
        .subchannels
        .iter()
        .map(|h| (phi * vec(h)).norm_squared())
        .sum::<f64>()
        / channel.subcarriers() as f64;
    if signal <= 0.0 {
        return Err(Error::DegenerateSnr);
    }
    Ok(signal / (phi.nrows() as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Runs the slot-wise sounding `y_k^b = W^b H_k F^b s^b + n_k^b`.
pub fn sound<R: Rng + ?Sized>(
    channel: &FrequencyChannel,
    plan: &SoundingPlan,
    snr_db: f64,
    rng: &mut R,
) -> Result<MeasurementSet> {
    let (rows, cols) = channel.dims();
    if rows != plan.irs_elements || cols != plan.ue_elements {
        return Err(Error::Shape(format!(
            "channel is {rows}×{cols} but plan expects {}×{}",
            plan.irs_elements, plan.ue_elements
        )));
    }
    let phi = plan.measurement_matrix()?;
    let noise_var = calibrate_noise_power(&phi, channel, snr_db)?;
    let transmit: Vec<CVec> = plan.slots.iter().map(Slot::transmit).collect();
    let m = plan.measurements();

    let observations = channel
        .subchannels
        .iter()
        .map(|h| {
            let mut y = CVec::zeros(m);
            let mut row = 0;
            for (slot, x) in plan.slots.iter().zip(&transmit) {
                // W^b selects rows of H_k; the precoded pilot combines its columns.
                for &element in &slot.active {
                    y[row] = (0..cols).fold(ZERO, |acc, u| acc + h[(element, u)] * x[u]);
                    row += 1;
                }
            }
            if noise_var > 0.0 {
                y += complex_noise(m, noise_var, rng);
            }
            y
        })
        .collect();

    Ok(MeasurementSet {
        observations,
        phi,
        noise_var,
        snr_db,
    })
}

/// Draws circularly-symmetric `CN(0, σ²)` samples.
pub fn complex_noise<R: Rng + ?Sized>(n: usize, noise_var: f64, rng: &mut R) -> CVec {
    let sigma = (noise_var / 2.0).sqrt();
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * sigma
    })
}
