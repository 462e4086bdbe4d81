use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::FrequencyChannel;
use crate::dictionary::RedundantDictionary;
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Normalization of the `K × K` DFT matrix `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DftConvention {
    /// `T[d, k] = exp(-j2πdk/K) / √K`; the transform preserves energy.
    #[default]
    Unitary,
    /// `T[d, k] = exp(-j2πdk/K)`; the inverse carries the `1/K`.
    Plain,
}

/// Angular-delay channel `Ĝ`: angular rows × delay columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDelayGrid {
    pub matrix: CMat,
    pub convention: DftConvention,
}

impl AngularDelayGrid {
    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }
}

fn row_transform(m: &CMat, inverse: bool, scale: f64) -> CMat {
    let (rows, k) = m.shape();
    let mut out = CMat::zeros(rows, k);
    if k == 0 {
        return out;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(k)
    } else {
        planner.plan_fft_forward(k)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); k];
    for r in 0..rows {
        for (b, x) in buf.iter_mut().zip(m.row(r).iter()) {
            *b = *x;
        }
        fft.process(&mut buf);
        for (o, b) in out.row_mut(r).iter_mut().zip(&buf) {
            *o = *b * scale;
        }
    }
    out
}

/// `Ĝ = H̃ T^H`, mapping subcarriers to delay taps along each row.
pub fn angular_delay_transform(h_tilde: &CMat, convention: DftConvention) -> AngularDelayGrid {
    let k = h_tilde.ncols().max(1) as f64;
    let scale = match convention {
        DftConvention::Unitary => 1.0 / k.sqrt(),
        DftConvention::Plain => 1.0,
    };
    AngularDelayGrid {
        matrix: row_transform(h_tilde, true, scale),
        convention,
    }
}

/// Recovers `H̃` from `Ĝ` (`Ĝ T` in the unitary convention).
pub fn inverse_angular_delay(g: &AngularDelayGrid) -> CMat {
    let k = g.matrix.ncols().max(1) as f64;
    let scale = match g.convention {
        DftConvention::Unitary => 1.0 / k.sqrt(),
        DftConvention::Plain => 1.0 / k,
    };
    row_transform(&g.matrix, false, scale)
}

/// Final spatial-frequency channel from an (enhanced) angular-delay grid.
pub fn final_channel(g: &AngularDelayGrid, dict: &RedundantDictionary) -> Result<FrequencyChannel> {
    if g.matrix.nrows() != dict.atoms() {
        return Err(Error::Shape(format!(
            "angular-delay grid has {} rows, dictionary has {} atoms",
            g.matrix.nrows(),
            dict.atoms()
        )));
    }
    let h_tilde = inverse_angular_delay(g);
    let (_, gtx) = dict.grid_shape();
    let subchannels = if gtx == 1 {
        let spatial = &dict.rx.bank * &h_tilde;
        let a_t = dict.tx.bank.column(0).adjoint();
        spatial.column_iter().map(|c| c * &a_t).collect()
    } else {
        h_tilde
            .column_iter()
            .map(|c| dict.synthesize(&c.into_owned()))
            .collect()
    };
    Ok(FrequencyChannel { subchannels })
}
