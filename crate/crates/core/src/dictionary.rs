//! Oversampled steering-vector dictionary and the effective sensing operator
//! `ΦΨ`, with `Ψ = conj(A_T) ⊗ A_R`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Cholesky, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{steering_from_cosines, steering_vector, Direction};
use crate::config::{GridKind, ScenarioConfig};
use crate::error::{Error, Result};
use crate::linalg::{unvec, vec, CMat, CVec, ZERO};

/// One dictionary atom of a single array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    /// `sin φ cos ψ`
    pub u: f64,
    /// `sin ψ`
    pub v: f64,
    /// Physical angles, when the direction cosines are in the visible region.
    pub direction: Option<Direction>,
}

/// Steering bank of one array over its grid.
#[derive(Debug, Clone)]
pub struct ArrayGrid {
    /// Grid points along the azimuth axis.
    pub azimuth_points: usize,
    /// Grid points along the elevation axis.
    pub elevation_points: usize,
    /// Ordered azimuth-major, elevation fastest.
    pub points: Vec<GridPoint>,
    /// `n_elements × points.len()`, unit-norm columns.
    pub bank: CMat,
}

impl ArrayGrid {
    fn build(n_w: usize, n_h: usize, beta: usize, kind: GridKind, spacing: f64) -> Self {
        let az = axis_values(n_w, beta, kind);
        let el = axis_values(n_h, beta, kind);
        let mut points = Vec::with_capacity(az.len() * el.len());
        let mut bank = CMat::zeros(n_w * n_h, az.len() * el.len());
        for (i, &a) in az.iter().enumerate() {
            for (j, &e) in el.iter().enumerate() {
                let (point, column) = match kind {
                    GridKind::Angle => {
                        let direction = Direction {
                            azimuth: a,
                            elevation: e,
                        };
                        let point = GridPoint {
                            u: a.sin() * e.cos(),
                            v: e.sin(),
                            direction: Some(direction),
                        };
                        (point, steering_vector(a, e, n_w, n_h, spacing))
                    }
                    GridKind::DirectionCosine => {
                        let point = GridPoint {
                            u: a,
                            v: e,
                            direction: visible_direction(a, e),
                        };
                        (point, steering_from_cosines(a, e, n_w, n_h, spacing))
                    }
                };
                let col = i * el.len() + j;
                bank.set_column(col, &column);
                points.push(point);
            }
        }
        Self {
            azimuth_points: az.len(),
            elevation_points: el.len(),
            points,
            bank,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Grid values along one axis. Single-element axes are not oversampled.
fn axis_values(n: usize, beta: usize, kind: GridKind) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let count = beta * n;
    (1..=count)
        .map(|i| {
            let frac = i as f64 / count as f64;
            match kind {
                GridKind::Angle => -FRAC_PI_2 + PI * frac,
                GridKind::DirectionCosine => -1.0 + 2.0 * frac,
            }
        })
        .collect()
}

fn visible_direction(u: f64, v: f64) -> Option<Direction> {
    if v.abs() > 1.0 {
        return None;
    }
    let elevation = v.asin();
    let c = elevation.cos();
    if u.abs() > c + 1e-12 {
        return None;
    }
    let azimuth = if c <= 1e-12 {
        0.0
    } else {
        (u / c).clamp(-1.0, 1.0).asin()
    };
    Some(Direction { azimuth, elevation })
}

/// Redundant dictionary for the UE→IRS channel.
#[derive(Debug, Clone)]
pub struct RedundantDictionary {
    pub beta: usize,
    pub kind: GridKind,
    /// Receive (IRS) side, `A_R^D`.
    pub rx: ArrayGrid,
    /// Transmit (UE) side, `A_T^D`.
    pub tx: ArrayGrid,
}

/// Builds the receive and transmit steering banks at oversampling `beta`.
pub fn build_dictionary(
    config: &ScenarioConfig,
    beta: usize,
    kind: GridKind,
) -> Result<RedundantDictionary> {
    if beta == 0 {
        return Err(Error::Config("oversampling rate must be at least 1".into()));
    }
    let spacing = config.element_spacing_wavelengths;
    Ok(RedundantDictionary {
        beta,
        kind,
        rx: ArrayGrid::build(config.irs_width, config.irs_height, beta, kind, spacing),
        tx: ArrayGrid::build(config.ue_width, config.ue_height, beta, kind, spacing),
    })
}

impl RedundantDictionary {
    /// `(grid_rx, grid_tx)`.
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.rx.len(), self.tx.len())
    }

    /// Number of atoms, `grid_rx · grid_tx`.
    pub fn atoms(&self) -> usize {
        self.rx.len() * self.tx.len()
    }

    /// Channel matrix shape `(N_IRS, N_UE)`.
    pub fn channel_shape(&self) -> (usize, usize) {
        (self.rx.bank.nrows(), self.tx.bank.nrows())
    }

    /// `(rx index, tx index)` of atom `j`; `j = tx · grid_rx + rx`.
    pub fn split_index(&self, j: usize) -> (usize, usize) {
        (j % self.rx.len(), j / self.rx.len())
    }

    /// Column `j` of `Ψ`, i.e. `vec(a_R a_T^H)`.
    pub fn column(&self, j: usize) -> CVec {
        let (r, t) = self.split_index(j);
        let a_r = self.rx.bank.column(r);
        let a_t = self.tx.bank.column(t);
        vec(&(a_r * a_t.adjoint()))
    }

    /// Dense `Ψ`; `N_IRS N_UE × atoms`.
    pub fn dense(&self) -> CMat {
        crate::linalg::kron(&self.tx.bank.map(|z| z.conj()), &self.rx.bank)
    }

    /// `Ψ x` reshaped to the channel, `A_R X A_T^H`.
    pub fn synthesize(&self, x: &CVec) -> CMat {
        let (grx, gtx) = self.grid_shape();
        let xm = unvec(x, grx, gtx);
        &self.rx.bank * xm * self.tx.bank.adjoint()
    }

    /// `Ψ^H vec(H)` as a grid vector, `vec(A_R^H H A_T)`.
    pub fn analyze(&self, h: &CMat) -> CVec {
        vec(&(self.rx.bank.ad_mul(h) * &self.tx.bank))
    }

    /// Minimum-norm least-squares coefficients `Ψ⁺ vec(H)`.
    ///
    /// Uses `(ΨΨ^H)⁻¹ = conj(G_T)⁻¹ ⊗ G_R⁻¹` with `G = A A^H`, so only the
    /// small per-array Gram matrices are factored.
    pub fn project(&self, h: &CMat) -> CVec {
        let g_r = &self.rx.bank * self.rx.bank.adjoint();
        let g_t = &self.tx.bank * self.tx.bank.adjoint();
        let left = hermitian_solve(&g_r, h);
        let z = hermitian_solve(&g_t, &left.adjoint()).adjoint();
        self.analyze(&z)
    }
}

/// Solves `G X = B` for Hermitian positive (semi)definite `G`.
fn hermitian_solve(g: &CMat, b: &CMat) -> CMat {
    match Cholesky::<Complex64, Dyn>::new(g.clone()) {
        Some(chol) => chol.solve(b),
        None => {
            let pinv = g
                .clone()
                .pseudo_inverse(1e-12 * g.norm())
                .expect("pseudo-inverse with non-negative tolerance");
            pinv * b
        }
    }
}

/// Effective sensing operator `A = ΦΨ`, `M × atoms`.
///
/// Keeps a dense copy when `M · atoms` fits under the cap and otherwise
/// applies `Φ` and the Kronecker-structured `Ψ` on the fly.
#[derive(Debug, Clone)]
pub struct SensingOperator<'a> {
    phi: CMat,
    dict: &'a RedundantDictionary,
    dense: Option<CMat>,
    column_norms: Vec<f64>,
}

impl<'a> SensingOperator<'a> {
    pub fn new(phi: &CMat, dict: &'a RedundantDictionary, dense_cap: usize) -> Result<Self> {
        let (n_irs, n_ue) = dict.channel_shape();
        if phi.ncols() != n_irs * n_ue {
            return Err(Error::Shape(format!(
                "Φ has {} columns, dictionary expects {}",
                phi.ncols(),
                n_irs * n_ue
            )));
        }
        let mut op = Self {
            phi: phi.clone(),
            dict,
            dense: None,
            column_norms: Vec::new(),
        };
        if phi.nrows() * dict.atoms() <= dense_cap {
            op.dense = Some(op.materialize());
        }
        op.column_norms = match &op.dense {
            Some(d) => d.column_iter().map(|c| c.norm()).collect(),
            None => (0..dict.atoms())
                .into_par_iter()
                .map(|j| op.column(j).norm())
                .collect(),
        };
        Ok(op)
    }

    pub fn nrows(&self) -> usize {
        self.phi.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.dict.atoms()
    }

    pub fn dictionary(&self) -> &RedundantDictionary {
        self.dict
    }

    pub fn dense(&self) -> Option<&CMat> {
        self.dense.as_ref()
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// Computes dense `ΦΨ` without forming `Ψ`.
    pub fn materialize(&self) -> CMat {
        let (n_irs, n_ue) = self.dict.channel_shape();
        let a_r = &self.dict.rx.bank;
        let a_t = &self.dict.tx.bank;
        let (grx, gtx) = self.dict.grid_shape();
        let m = self.phi.nrows();

        // P_u = Φ_u A_R for each UE antenna block u.
        let blocks: Vec<CMat> = (0..n_ue)
            .map(|u| {
                let phi_u = self.phi.columns(u * n_irs, n_irs);
                match one_hot_rows(&phi_u) {
                    Some(hits) => CMat::from_fn(m, grx, |row, col| match hits[row] {
                        Some((c, w)) => w * a_r[(c, col)],
                        None => ZERO,
                    }),
                    None => phi_u * a_r,
                }
            })
            .collect();

        let mut out = CMat::zeros(m, grx * gtx);
        for t in 0..gtx {
            let mut block = out.columns_mut(t * grx, grx);
            for (u, p) in blocks.iter().enumerate() {
                let w = a_t[(u, t)].conj();
                block.zip_apply(p, |o, x| *o += w * x);
            }
        }
        out
    }

    /// `ΦΨ x`.
    pub fn apply(&self, x: &CVec) -> CVec {
        match &self.dense {
            Some(d) => d * x,
            None => self.apply_free(x),
        }
    }

    /// `(ΦΨ)^H y`.
    pub fn adjoint(&self, y: &CVec) -> CVec {
        match &self.dense {
            Some(d) => d.ad_mul(y),
            None => self.adjoint_free(y),
        }
    }

    /// Matrix-free `ΦΨ x`.
    pub fn apply_free(&self, x: &CVec) -> CVec {
        &self.phi * vec(&self.dict.synthesize(x))
    }

    /// Matrix-free `(ΦΨ)^H y`.
    pub fn adjoint_free(&self, y: &CVec) -> CVec {
        let (n_irs, n_ue) = self.dict.channel_shape();
        let v = self.phi.ad_mul(y);
        self.dict.analyze(&unvec(&v, n_irs, n_ue))
    }

    /// `(ΦΨ)^H R` for a block of residuals `R` (`M × K`).
    pub fn adjoint_many(&self, r: &CMat) -> CMat {
        match &self.dense {
            Some(d) => d.ad_mul(r),
            None => {
                let cols: Vec<CVec> = (0..r.ncols())
                    .into_par_iter()
                    .map(|k| self.adjoint_free(&r.column(k).into_owned()))
                    .collect();
                CMat::from_columns(&cols)
            }
        }
    }

    /// Column `j` of `ΦΨ`.
    pub fn column(&self, j: usize) -> CVec {
        match &self.dense {
            Some(d) => d.column(j).into_owned(),
            None => {
                let (n_irs, n_ue) = self.dict.channel_shape();
                let (r, t) = self.dict.split_index(j);
                let a_r = self.dict.rx.bank.column(r);
                let mut out = CVec::zeros(self.phi.nrows());
                for u in 0..n_ue {
                    let w = self.dict.tx.bank[(u, t)].conj();
                    out += self.phi.columns(u * n_irs, n_irs) * a_r * w;
                }
                out
            }
        }
    }
}

/// For each row, its single nonzero `(column, value)`; `None` if any row has more.
fn one_hot_rows(
    m: &nalgebra::DMatrixView<'_, Complex64>,
) -> Option<Vec<Option<(usize, Complex64)>>> {
    let mut hits = Vec::with_capacity(m.nrows());
    for row in m.row_iter() {
        let mut hit = None;
        for (c, z) in row.iter().enumerate() {
            if *z != ZERO {
                if hit.is_some() {
                    return None;
                }
                hit = Some((c, *z));
            }
        }
        hits.push(hit);
    }
    Some(hits)
}
