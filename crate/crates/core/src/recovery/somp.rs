use nalgebra::Cholesky;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::FrequencyChannel;
use crate::config::Scoring;
use crate::dictionary::{RedundantDictionary, SensingOperator};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, ZERO};

/// Relative residual energy below which the residual is treated as exactly zero.
const EXACT_FLOOR: f64 = 1e-24;
/// Relative norm under which a new atom counts as linearly dependent.
const DEPENDENCE_TOL: f64 = 1e-10;

/// When SOMP stops adding atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StopRule {
    /// Select exactly this many atoms (fewer if the residual vanishes).
    Sparsity(usize),
    /// Stop once every subcarrier residual satisfies `‖r_k‖ ≤ epsilon`, or
    /// after `max_iters` atoms.
    Residual { epsilon: f64, max_iters: usize },
}

impl StopRule {
    /// Noise-floor rule: `ε = √(M σ²)(1 + margin)`, capped at `min(M, 2L)` atoms.
    pub fn noise_floor(measurements: usize, noise_var: f64, paths: usize, margin: f64) -> Self {
        StopRule::Residual {
            epsilon: (measurements as f64 * noise_var).sqrt() * (1.0 + margin),
            max_iters: measurements.min(2 * paths),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SompOptions {
    pub stop: StopRule,
    pub scoring: Scoring,
}

/// Common-support sparse estimate across subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    /// Atom indices in selection order.
    pub support: Vec<usize>,
    /// `|S| × K` amplitudes on the support.
    pub coefficients: CMat,
    /// `(grid_rx, grid_tx)`.
    pub grid_shape: (usize, usize),
    /// Final per-subcarrier residual norms.
    pub residual_norms: Vec<f64>,
    /// Per-subcarrier residual norms before each selection, then after the last.
    pub residual_history: Vec<Vec<f64>>,
    /// Set when a selected atom was linearly dependent on earlier ones and the
    /// coefficients came from a ridge-regularized fit.
    pub rank_deficient: bool,
}

impl SparseEstimate {
    pub fn atoms(&self) -> usize {
        self.grid_shape.0 * self.grid_shape.1
    }

    pub fn subcarriers(&self) -> usize {
        self.coefficients.ncols()
    }

    /// The full angular-frequency matrix `H̃*` (`atoms × K`), zero off the support.
    pub fn dense_grid(&self) -> CMat {
        let mut out = CMat::zeros(self.atoms(), self.subcarriers());
        for (row, &j) in self.support.iter().enumerate() {
            out.row_mut(j).copy_from(&self.coefficients.row(row));
        }
        out
    }

    pub fn empty(grid_shape: (usize, usize), subcarriers: usize) -> Self {
        Self {
            support: Vec::new(),
            coefficients: CMat::zeros(0, subcarriers),
            grid_shape,
            residual_norms: Vec::new(),
            residual_history: Vec::new(),
            rank_deficient: false,
        }
    }
}

/// Simultaneous orthogonal matching pursuit over the columns of `y` (`M × K`).
///
/// Each iteration scores every atom by its normalized correlation with the
/// current residuals summed over subcarriers, adds the best one (lowest index
/// on ties), and projects all residuals onto the orthogonal complement of the
/// selected atoms through an incrementally grown QR factorization.
pub fn somp(y: &CMat, op: &SensingOperator<'_>, options: &SompOptions) -> Result<SparseEstimate> {
    let m = op.nrows();
    if y.nrows() != m {
        return Err(Error::Shape(format!(
            "observations have {} rows, operator has {m}",
            y.nrows()
        )));
    }
    let k = y.ncols();
    let grid_shape = op.dictionary().grid_shape();
    let total = y.norm_squared();
    let floor = EXACT_FLOOR * total;

    let (max_atoms, epsilon) = match options.stop {
        StopRule::Sparsity(s) => (s, None),
        StopRule::Residual { epsilon, max_iters } => (max_iters, Some(epsilon)),
    };
    let max_atoms = max_atoms.min(m).min(op.ncols());

    let mut residual = y.clone();
    let mut q_cols: Vec<CVec> = Vec::new();
    // Upper-triangular R stored by column.
    let mut r_cols: Vec<Vec<Complex64>> = Vec::new();
    let mut support: Vec<usize> = Vec::new();
    let mut selected = vec![false; op.ncols()];
    let mut history = Vec::new();
    let mut rank_deficient = false;
    let norms = op.column_norms();

    loop {
        let current: Vec<f64> = residual.column_iter().map(|c| c.norm()).collect();
        let done = support.len() >= max_atoms
            || residual.norm_squared() <= floor
            || epsilon.is_some_and(|eps| current.iter().all(|&r| r <= eps));
        history.push(current);
        if done {
            break;
        }

        let corr = op.adjoint_many(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, row) in corr.row_iter().enumerate() {
            if selected[j] || norms[j] == 0.0 {
                continue;
            }
            let raw = match options.scoring {
                Scoring::L1 => row.iter().map(|z| z.norm()).sum::<f64>(),
                Scoring::L2 => row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            };
            let score = raw / norms[j];
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };

        let atom = op.column(j);
        let mut q = atom.clone();
        let mut coeffs = vec![ZERO; q_cols.len()];
        // classical Gram-Schmidt, applied twice
        for _ in 0..2 {
            for (c, qi) in coeffs.iter_mut().zip(&q_cols) {
                let proj = qi.dotc(&q);
                q.axpy(-proj, qi, Complex64::new(1.0, 0.0));
                *c += proj;
            }
        }
        let rho = q.norm();
        selected[j] = true;
        support.push(j);
        if rho <= DEPENDENCE_TOL * atom.norm() {
            rank_deficient = true;
            break;
        }
        q /= Complex64::new(rho, 0.0);
        coeffs.push(Complex64::new(rho, 0.0));
        r_cols.push(coeffs);

        let weights = q.ad_mul(&residual);
        residual -= &q * weights;
        q_cols.push(q);
    }

    let coefficients = if rank_deficient {
        ridge_coefficients(op, &support, y)
    } else {
        let s = support.len();
        let r = CMat::from_fn(s, s, |i, j| if i <= j { r_cols[j][i] } else { ZERO });
        let q = if s == 0 {
            CMat::zeros(m, 0)
        } else {
            CMat::from_columns(&q_cols)
        };
        let z = q.ad_mul(y);
        r.solve_upper_triangular(&z)
            .ok_or_else(|| Error::Shape("singular triangular factor".into()))?
    };

    // final residual from the refit
    let a_s = support_matrix(op, &support, m);
    let final_residual = y - &a_s * &coefficients;
    let residual_norms: Vec<f64> = final_residual.column_iter().map(|c| c.norm()).collect();
    if let Some(last) = history.last_mut() {
        *last = residual_norms.clone();
    }
    debug_assert_eq!(coefficients.ncols(), k);

    Ok(SparseEstimate {
        support,
        coefficients,
        grid_shape,
        residual_norms,
        residual_history: history,
        rank_deficient,
    })
}

fn support_matrix(op: &SensingOperator<'_>, support: &[usize], m: usize) -> CMat {
    if support.is_empty() {
        return CMat::zeros(m, 0);
    }
    let cols: Vec<CVec> = support.iter().map(|&j| op.column(j)).collect();
    CMat::from_columns(&cols)
}

fn ridge_coefficients(op: &SensingOperator<'_>, support: &[usize], y: &CMat) -> CMat {
    let a = support_matrix(op, support, op.nrows());
    let mut gram = a.ad_mul(&a);
    let s = gram.nrows();
    let trace: f64 = (0..s).map(|i| gram[(i, i)].re).sum();
    let lambda = 1e-10 * trace.max(f64::MIN_POSITIVE) / s as f64;
    for i in 0..s {
        gram[(i, i)] += lambda;
    }
    let rhs = a.ad_mul(y);
    Cholesky::new(gram)
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| CMat::zeros(s, y.ncols()))
}

/// `Ĥ_k = unvec(Ψ_S c_k)` for every subcarrier.
pub fn reconstruct_spatial(
    est: &SparseEstimate,
    dict: &RedundantDictionary,
) -> Result<FrequencyChannel> {
    if est.grid_shape != dict.grid_shape() {
        return Err(Error::Shape(format!(
            "estimate grid {:?} does not match dictionary grid {:?}",
            est.grid_shape,
            dict.grid_shape()
        )));
    }
    let (rows, cols) = dict.channel_shape();
    let outers: Vec<CMat> = est
        .support
        .iter()
        .map(|&j| {
            let (r, t) = dict.split_index(j);
            dict.rx.bank.column(r) * dict.tx.bank.column(t).adjoint()
        })
        .collect();
    let subchannels = (0..est.subcarriers())
        .map(|k| {
            let mut h = CMat::zeros(rows, cols);
            for (s, outer) in outers.iter().enumerate() {
                let c = est.coefficients[(s, k)];
                h.zip_apply(outer, |acc, o| *acc += c * o);
            }
            h
        })
        .collect();
    Ok(FrequencyChannel { subchannels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GridKind, ScenarioConfig, SoundingConfig};
    use crate::dictionary::build_dictionary;
    use crate::linalg::vec;
    use crate::sounding::{make_plan, sound};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(
        w: usize,
        h: usize,
        beta: usize,
        m: usize,
        seed: u64,
    ) -> (ScenarioConfig, RedundantDictionary, CMat) {
        let cfg = ScenarioConfig {
            irs_width: w,
            irs_height: h,
            subcarriers: 8,
            cyclic_prefix: 4,
            ..ScenarioConfig::desk()
        };
        let dict = build_dictionary(&cfg, beta, GridKind::DirectionCosine).unwrap();
        let s = SoundingConfig {
            measurements: m,
            ..Default::default()
        };
        let plan = make_plan(&cfg, &s, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        (cfg, dict, plan.measurement_matrix().unwrap())
    }

    fn random_coeffs(rows: usize, k: usize, rng: &mut impl Rng) -> CMat {
        CMat::from_fn(rows, k, |_, _| {
            Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            )
        })
    }

    fn opts(stop: StopRule) -> SompOptions {
        SompOptions {
            stop,
            scoring: Scoring::L1,
        }
    }

    #[test]
    fn single_atom_exact() {
        let (_, dict, phi) = setup(4, 4, 2, 4, 1);
        let op = SensingOperator::new(&phi, &dict, usize::MAX).unwrap();
        let true_atom = 37;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_coeffs(1, 8, &mut rng);
        let y = op.column(true_atom) * &c;
        let est = somp(&y, &op, &opts(StopRule::noise_floor(4, 0.0, 1, 0.1))).unwrap();
        assert_eq!(est.support, vec![true_atom]);
        assert!(est.residual_norms.iter().all(|&r| r <= 1e-10));
        assert!((&est.coefficients - &c).norm() < 1e-10);
    }

    #[test]
    fn three_atoms_match_oracle_least_squares() {
        let (_, dict, phi) = setup(8, 8, 1, 16, 3);
        let op = SensingOperator::new(&phi, &dict, usize::MAX).unwrap();
        let truth = [5usize, 22, 50];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_coeffs(3, 8, &mut rng);
        let a = CMat::from_columns(&truth.iter().map(|&j| op.column(j)).collect::<Vec<_>>());
        let y = &a * &c;
        let est = somp(&y, &op, &opts(StopRule::Sparsity(3))).unwrap();
        let mut got = est.support.clone();
        got.sort_unstable();
        assert_eq!(got, truth);
        // oracle: least squares on the known support via normal equations
        let oracle = (a.ad_mul(&a)).try_inverse().unwrap() * a.ad_mul(&y);
        for (row, &j) in est.support.iter().enumerate() {
            let t = truth.iter().position(|&x| x == j).unwrap();
            let diff = (est.coefficients.row(row) - oracle.row(t)).norm();
            assert!(diff < 1e-10, "{diff}");
        }
    }

    #[test]
    fn residuals_never_increase() {
        let cfg = ScenarioConfig::desk();
        let dict = build_dictionary(&cfg, 2, GridKind::DirectionCosine).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (_, h) = crate::channel::generate(&cfg, &mut rng);
        let plan = make_plan(&cfg, &SoundingConfig::default(), &mut rng).unwrap();
        let meas = sound(&h, &plan, 10.0, &mut rng).unwrap();
        let op = SensingOperator::new(&meas.phi, &dict, usize::MAX).unwrap();
        let est = somp(&meas.stacked(), &op, &opts(StopRule::Sparsity(12))).unwrap();
        assert_eq!(est.support.len(), 12);
        for pair in est.residual_history.windows(2) {
            for (before, after) in pair[0].iter().zip(&pair[1]) {
                assert!(after <= &(before * (1.0 + 1e-12)), "{after} > {before}");
            }
        }
    }

    #[test]
    fn noise_floor_rule_stops_early() {
        let (_, dict, phi) = setup(4, 4, 2, 16, 5);
        let op = SensingOperator::new(&phi, &dict, usize::MAX).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = random_coeffs(1, 8, &mut rng) * Complex64::new(10.0, 0.0);
        let mut y = op.column(9) * &c;
        let noise_var = 1e-4;
        for mut col in y.column_iter_mut() {
            col += crate::sounding::complex_noise(16, noise_var, &mut rng);
        }
        let est = somp(&y, &op, &opts(StopRule::noise_floor(16, noise_var, 6, 0.5))).unwrap();
        assert_eq!(est.support[0], 9);
        assert!(est.support.len() < 12);
    }

    #[test]
    fn dependent_atom_is_flagged() {
        // 2 measurements: any third atom is dependent on the first two.
        let (_, dict, phi) = setup(4, 1, 2, 2, 7);
        let op = SensingOperator::new(&phi, &dict, usize::MAX).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = random_coeffs(2, 8, &mut rng);
        let est = somp(&y, &op, &opts(StopRule::Sparsity(3))).unwrap();
        // at most M independent atoms; the cap keeps it at 2 here
        assert_eq!(est.support.len(), 2);
        assert!(!est.rank_deficient);
        // force dependence with duplicated rows: the same element sampled twice
        let mut phi2 = phi.clone();
        let row = phi2.row(0).into_owned();
        phi2.row_mut(1).copy_from(&row);
        let op2 = SensingOperator::new(&phi2, &dict, usize::MAX).unwrap();
        let est2 = somp(&y, &op2, &opts(StopRule::Sparsity(2))).unwrap();
        assert!(est2.rank_deficient);
        assert!(est2
            .coefficients
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn reconstruct_basis_and_empty() {
        let (_, dict, phi) = setup(3, 2, 2, 4, 9);
        let _ = phi;
        let empty = SparseEstimate::empty(dict.grid_shape(), 5);
        let h = reconstruct_spatial(&empty, &dict).unwrap();
        assert_eq!(h.subcarriers(), 5);
        assert_eq!(h.energy(), 0.0);

        let est = SparseEstimate {
            support: vec![7],
            coefficients: CMat::from_element(1, 3, Complex64::new(1.0, 0.0)),
            ..SparseEstimate::empty(dict.grid_shape(), 3)
        };
        let h = reconstruct_spatial(&est, &dict).unwrap();
        let col = dict.column(7);
        for hk in &h.subchannels {
            assert!((vec(hk) - &col).norm() < 1e-15);
        }
    }

    #[test]
    fn reconstruct_matches_dense_synthesis() {
        let cfg = ScenarioConfig {
            irs_width: 3,
            irs_height: 2,
            ue_width: 2,
            ..ScenarioConfig::desk()
        };
        let dict = build_dictionary(&cfg, 2, GridKind::DirectionCosine).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let est = SparseEstimate {
            support: vec![3, 40, 17, 80],
            coefficients: random_coeffs(4, 6, &mut rng),
            ..SparseEstimate::empty(dict.grid_shape(), 6)
        };
        let h = reconstruct_spatial(&est, &dict).unwrap();
        let psi = dict.dense();
        let grid = est.dense_grid();
        for (k, hk) in h.subchannels.iter().enumerate() {
            let oracle = &psi * grid.column(k);
            assert!((vec(hk) - &oracle).norm() < 1e-12 * oracle.norm());
        }
    }
}
