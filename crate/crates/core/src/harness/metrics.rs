use crate::channel::FrequencyChannel;
use crate::error::{Error, Result};

/// Reported in place of `-∞` for an exact estimate.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// `Σ_k ‖H_k − Ĥ_k‖² / Σ_k ‖H_k‖²`, linear.
pub fn nmse_ratio(truth: &FrequencyChannel, estimate: &FrequencyChannel) -> Result<f64> {
    if truth.subcarriers() != estimate.subcarriers() || truth.dims() != estimate.dims() {
        return Err(Error::Shape(format!(
            "truth is {}×{:?}, estimate is {}×{:?}",
            truth.subcarriers(),
            truth.dims(),
            estimate.subcarriers(),
            estimate.dims()
        )));
    }
    let reference = truth.energy();
    if reference == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let err: f64 = truth
        .subchannels
        .iter()
        .zip(&estimate.subchannels)
        .map(|(h, e)| (h - e).norm_squared())
        .sum();
    Ok(err / reference)
}

pub fn ratio_to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    }
}

/// NMSE in dB, floored at [`NMSE_FLOOR_DB`].
pub fn nmse_db(truth: &FrequencyChannel, estimate: &FrequencyChannel) -> Result<f64> {
    nmse_ratio(truth, estimate).map(ratio_to_db)
}
