//! Broadband geometric mmWave channel between the UE and the IRS.
//!
//! Paths are drawn at random, sampled through a raised-cosine pulse into
//! `L_CP` delay taps, and the taps are transformed to `K` subcarriers.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, ZERO};

/// Half-width of the truncated pulse, in sample periods.
pub const PULSE_SPAN: f64 = 4.0;

/// UPA steering vector for direction cosines `u = sin φ cos ψ`, `v = sin ψ`.
///
/// Element `(n, m)` (width index `n`, height index `m`) sits at position
/// `n * n_h + m`, so the vector factorizes as `a_w(u) ⊗ a_h(v)`.
pub fn steering_from_cosines(u: f64, v: f64, n_w: usize, n_h: usize, spacing: f64) -> CVec {
    let scale = 1.0 / ((n_w * n_h) as f64).sqrt();
    let k = 2.0 * PI * spacing;
    CVec::from_iterator(
        n_w * n_h,
        (0..n_w).flat_map(|n| {
            (0..n_h).map(move |m| Complex64::from_polar(scale, k * (n as f64 * u + m as f64 * v)))
        }),
    )
}

/// UPA steering vector for azimuth `phi` and elevation `psi`; unit norm.
pub fn steering_vector(phi: f64, psi: f64, n_w: usize, n_h: usize, spacing: f64) -> CVec {
    steering_from_cosines(phi.sin() * psi.cos(), psi.sin(), n_w, n_h, spacing)
}

/// Azimuth/elevation pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: Complex64,
    /// Seconds, within `[0, L_CP / f_BW]`.
    pub delay: f64,
    /// Arrival direction at the IRS.
    pub arrival: Direction,
    /// Departure direction at the UE.
    pub departure: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Draws `L` paths: angles and delays uniform, gains `CN(0, 1)`.
pub fn draw_paths<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> PathSet {
    let tau_max = config.max_delay();
    let angle = |rng: &mut R| rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
    let paths = (0..config.paths)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let gain = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            let delay = rng.random_range(0.0..=tau_max);
            let arrival = Direction {
                azimuth: angle(rng),
                elevation: angle(rng),
            };
            let departure = Direction {
                azimuth: angle(rng),
                elevation: angle(rng),
            };
            Path {
                gain,
                delay,
                arrival,
                departure,
            }
        })
        .collect();
    PathSet { paths }
}

/// Truncated raised-cosine pulse with period `ts`, normalized to `p(0) = 1`.
pub fn raised_cosine(t: f64, ts: f64, rolloff: f64) -> f64 {
    let x = t / ts;
    if x.abs() > PULSE_SPAN {
        return 0.0;
    }
    let sinc = if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    };
    if rolloff == 0.0 {
        return sinc;
    }
    let denom = 1.0 - (2.0 * rolloff * x).powi(2);
    if denom.abs() < 1e-10 {
        // limit at x = ±1/(2·rolloff)
        let y = 1.0 / (2.0 * rolloff);
        return PI / 4.0 * (PI * y).sin() / (PI * y);
    }
    sinc * (PI * rolloff * x).cos() / denom
}

/// Pulse-shaping filter `p(t)` for `config`.
pub fn pulse_shape(t: f64, config: &ScenarioConfig) -> f64 {
    raised_cosine(t, config.sample_period(), config.pulse_rolloff)
}

/// Discrete channel impulse response, one `N_IRS × N_UE` matrix per tap.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayChannel {
    pub taps: Vec<CMat>,
    pub sample_period: f64,
}

/// Per-subcarrier UE→IRS channel matrices `H_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyChannel {
    pub subchannels: Vec<CMat>,
}

impl FrequencyChannel {
    pub fn zeros(k: usize, rows: usize, cols: usize) -> Self {
        Self {
            subchannels: vec![CMat::zeros(rows, cols); k],
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.subchannels.len()
    }

    /// `(rows, cols)` of each subchannel.
    pub fn dims(&self) -> (usize, usize) {
        self.subchannels.first().map_or((0, 0), |h| h.shape())
    }

    /// `Σ_k ‖H_k‖_F²`.
    pub fn energy(&self) -> f64 {
        self.subchannels.iter().map(|h| h.norm_squared()).sum()
    }

    /// Entries of all subchannels, subcarrier-major then column-major.
    pub fn flat(&self) -> Vec<Complex64> {
        self.subchannels
            .iter()
            .flat_map(|h| h.as_slice().iter().copied())
            .collect()
    }

    pub fn from_flat(k: usize, rows: usize, cols: usize, data: &[Complex64]) -> Result<Self> {
        if data.len() != k * rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for {k}×{rows}×{cols}, got {}",
                k * rows * cols,
                data.len()
            )));
        }
        let subchannels = data
            .chunks(rows * cols)
            .map(|c| CMat::from_column_slice(rows, cols, c))
            .collect();
        Ok(Self { subchannels })
    }
}

/// Samples the geometric model into `L_CP` taps.
///
/// The `√(N_UE N_IRS / L)` factor uses the scenario's `L`, so the taps are
/// linear in the path set: splitting a set and summing the parts reproduces
/// the whole.
pub fn delay_taps(paths: &PathSet, config: &ScenarioConfig) -> DelayChannel {
    let n_irs = config.irs_elements();
    let n_ue = config.ue_elements();
    let ts = config.sample_period();
    let spacing = config.element_spacing_wavelengths;
    let norm = ((n_ue * n_irs) as f64 / config.paths.max(1) as f64).sqrt();

    // One rank-1 outer product per path, reused for every tap.
    let outers: Vec<CMat> = paths
        .paths
        .iter()
        .map(|p| {
            let a_r = steering_vector(
                p.arrival.azimuth,
                p.arrival.elevation,
                config.irs_width,
                config.irs_height,
                spacing,
            );
            let a_t = steering_vector(
                p.departure.azimuth,
                p.departure.elevation,
                config.ue_width,
                config.ue_height,
                spacing,
            );
            &a_r * a_t.adjoint()
        })
        .collect();

    let taps = (0..config.cyclic_prefix)
        .map(|d| {
            let mut tap = CMat::zeros(n_irs, n_ue);
            for (p, outer) in paths.paths.iter().zip(&outers) {
                let w = p.gain * norm * pulse_shape(d as f64 * ts - p.delay, config);
                if w != ZERO {
                    tap.zip_apply(outer, |t, o| *t += w * o);
                }
            }
            tap
        })
        .collect();
    DelayChannel {
        taps,
        sample_period: ts,
    }
}

/// `H_k = Σ_d C_d exp(-j2πkd/K)` for `k = 0..K-1`.
pub fn frequency_channel(taps: &DelayChannel, k: usize) -> Result<FrequencyChannel> {
    if taps.taps.len() > k {
        return Err(Error::Shape(format!(
            "{} taps do not fit in {k} subcarriers",
            taps.taps.len()
        )));
    }
    let (rows, cols) = taps.taps.first().map_or((0, 0), |t| t.shape());
    let subchannels = (0..k)
        .map(|sc| {
            let mut h = CMat::zeros(rows, cols);
            for (d, tap) in taps.taps.iter().enumerate() {
                // reduce the phase index first to keep the angle small
                let phase = -2.0 * PI * ((sc * d) % k) as f64 / k as f64;
                let w = Complex64::from_polar(1.0, phase);
                h.zip_apply(tap, |acc, c| *acc += w * c);
            }
            h
        })
        .collect();
    Ok(FrequencyChannel { subchannels })
}

/// Convenience: draw paths and produce the frequency-domain channel.
pub fn generate<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> (PathSet, FrequencyChannel) {
    let paths = draw_paths(config, rng);
    let taps = delay_taps(&paths, config);
    let channel =
        frequency_channel(&taps, config.subcarriers).expect("validated config keeps L_CP <= K");
    (paths, channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn broadside_steering_is_flat() {
        let a = steering_vector(0.0, 0.0, 4, 4, 0.5);
        assert_eq!(a.len(), 16);
        for z in a.iter() {
            assert_relative_eq!(z.re, 0.25, epsilon = 1e-15);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_element_steering() {
        let a = steering_vector(1.1, -0.3, 1, 1, 0.5);
        assert_eq!(a.as_slice(), &[c(1.0, 0.0)]);
    }

    #[test]
    fn two_element_steering_matches_exponent() {
        let phi = PI / 6.0;
        let a = steering_vector(phi, 0.0, 2, 1, 0.5);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // second entry: (1/√2) exp(j·2π·0.5·sin(π/6))
        let expected = Complex64::from_polar(s, PI * phi.sin());
        assert_relative_eq!(a[0].re, s, epsilon = 1e-15);
        assert_relative_eq!((a[1] - expected).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(a[1].arg(), PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pulse_values() {
        let ts = 1e-8;
        assert_eq!(raised_cosine(0.0, ts, 0.8), 1.0);
        for k in [-3.0, -1.0, 1.0, 2.0, 4.0] {
            assert!(raised_cosine(k * ts, ts, 0.0).abs() < 1e-15);
        }
        assert_relative_eq!(raised_cosine(ts / 2.0, ts, 0.0), 2.0 / PI, epsilon = 1e-15);
        assert_eq!(raised_cosine(4.5 * ts, ts, 0.3), 0.0);
    }

    #[test]
    fn pulse_singularity_is_continuous() {
        let ts = 1.0;
        let beta = 0.5;
        let x0 = 1.0 / (2.0 * beta);
        let at = raised_cosine(x0, ts, beta);
        let near = raised_cosine(x0 + 1e-6, ts, beta);
        assert!((at - near).abs() < 1e-5, "{at} vs {near}");
    }

    #[test]
    fn pulse_is_bounded() {
        for rolloff in [0.0, 0.25, 0.8, 1.0] {
            for i in -900..=900 {
                let t = i as f64 / 100.0;
                assert!(raised_cosine(t, 1.0, rolloff).abs() <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn draw_is_deterministic() {
        let cfg = ScenarioConfig::desk();
        let a = draw_paths(&cfg, &mut ChaCha8Rng::seed_from_u64(7));
        let b = draw_paths(&cfg, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn draw_statistics() {
        let cfg = ScenarioConfig {
            paths: 100_000,
            ..ScenarioConfig::desk()
        };
        let set = draw_paths(&cfg, &mut ChaCha8Rng::seed_from_u64(11));
        let n = set.len() as f64;
        let mean_az = set.paths.iter().map(|p| p.arrival.azimuth).sum::<f64>() / n;
        let mean_el = set.paths.iter().map(|p| p.departure.elevation).sum::<f64>() / n;
        let mean_pow = set.paths.iter().map(|p| p.gain.norm_sqr()).sum::<f64>() / n;
        assert!(mean_az.abs() < 0.02, "{mean_az}");
        assert!(mean_el.abs() < 0.02, "{mean_el}");
        assert!((mean_pow - 1.0).abs() < 0.05, "{mean_pow}");
        let tau_max = cfg.max_delay();
        assert!(set.paths.iter().all(|p| (0.0..=tau_max).contains(&p.delay)));
        assert!(set.paths.iter().all(|p| {
            [p.arrival, p.departure]
                .iter()
                .all(|d| d.azimuth.abs() <= FRAC_PI_2 && d.elevation.abs() <= FRAC_PI_2)
        }));
    }

    #[test]
    fn on_grid_single_path_occupies_one_tap() {
        let cfg = ScenarioConfig {
            pulse_rolloff: 0.0,
            paths: 1,
            ..ScenarioConfig::desk()
        };
        let d0 = 5;
        let path = Path {
            gain: c(1.0, 0.0),
            delay: d0 as f64 * cfg.sample_period(),
            arrival: Direction {
                azimuth: 0.3,
                elevation: -0.2,
            },
            departure: Direction {
                azimuth: 0.0,
                elevation: 0.0,
            },
        };
        let taps = delay_taps(&PathSet { paths: vec![path] }, &cfg);
        assert_eq!(taps.taps.len(), cfg.cyclic_prefix);
        let a_r = steering_vector(0.3, -0.2, 8, 8, 0.5);
        let scale = (64.0f64).sqrt();
        for (d, tap) in taps.taps.iter().enumerate() {
            assert_eq!(tap.shape(), (64, 1));
            if d == d0 {
                for (x, y) in tap.iter().zip(a_r.iter()) {
                    assert!((x - y * scale).norm() < 1e-12);
                }
            } else {
                assert!(tap.norm() < 1e-12, "tap {d} = {}", tap.norm());
            }
        }
    }

    #[test]
    fn flat_channel_from_zero_delay_tap() {
        let m = CMat::from_fn(3, 2, |i, j| c(i as f64, j as f64 - 1.0));
        let taps = DelayChannel {
            taps: vec![m.clone()],
            sample_period: 1.0,
        };
        let h = frequency_channel(&taps, 8).unwrap();
        assert!(h.subchannels.iter().all(|hk| *hk == m));
    }

    #[test]
    fn single_tap_phase_ramp() {
        let m = CMat::from_fn(2, 2, |i, j| c(1.0 + i as f64, j as f64));
        let k = 8;
        let taps = DelayChannel {
            taps: vec![CMat::zeros(2, 2), m.clone()],
            sample_period: 1.0,
        };
        let h = frequency_channel(&taps, k).unwrap();
        for (sc, hk) in h.subchannels.iter().enumerate() {
            let w = Complex64::from_polar(1.0, -2.0 * PI * sc as f64 / k as f64);
            assert!((hk - &m * w).norm() < 1e-14);
        }
    }

    #[test]
    fn more_taps_than_subcarriers_rejected() {
        let taps = DelayChannel {
            taps: vec![CMat::zeros(1, 1); 5],
            sample_period: 1.0,
        };
        assert!(frequency_channel(&taps, 4).is_err());
    }
}
