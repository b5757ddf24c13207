//! Gaussian densities on grids and the double-Gaussian biphoton model used as
//! ground truth for steering.
//!
//! Fourier convention: positions `x` and wavenumbers `k` are conjugate with
//! `σ_x σ_k = 1/2` for every independent mode. For a real Gaussian wave
//! function with position covariance `Σ` the wavenumber covariance is
//! `Σ⁻¹ / 4`, and a single mode saturates `h(x) + h(k) = log(πe)`.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::entropy::LogBase;
use crate::error::{Error, Result};
use crate::grid::{whole_multiple, Axis, GridDensity, TAIL_TOLERANCE};

/// Header line attached to model-based reports.
pub const FOURIER_CONVENTION: &str =
    "conjugate position x and wavenumber k with sigma_x * sigma_k = 1/2 per mode";

/// Widest accepted ratio between the two mode widths.
pub const MAX_WIDTH_RATIO: f64 = 1e3;

/// Multivariate normal distribution with a positive definite covariance.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    precision: Vec<f64>,
    log_det: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.nrows() != d || cov.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "covariance is {}x{} for a {d}-dimensional mean",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax() {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inv = chol.inverse();
        let precision = (0..d * d).map(|i| inv[(i / d, i % d)]).collect();
        Ok(Self {
            mean,
            cov,
            precision,
            log_det,
        })
    }

    pub fn centered(cov: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![0.0; cov.nrows()], cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut q = 0.0;
        for i in 0..d {
            let di = x[i] - self.mean[i];
            for j in 0..d {
                q += di * self.precision[i * d + j] * (x[j] - self.mean[j]);
            }
        }
        -0.5 * (q + self.log_det + d as f64 * (2.0 * PI).ln())
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// `½ ln((2πe)^d det Σ)`.
    pub fn entropy_nats(&self) -> f64 {
        0.5 * (self.dim() as f64 * (2.0 * PI * E).ln() + self.log_det)
    }

    /// Covariance of `target` given `condition` (Schur complement).
    pub fn conditional_covariance(&self, target: &[usize], condition: &[usize]) -> DMatrix<f64> {
        let tt = self.cov.select_rows(target).select_columns(target);
        if condition.is_empty() {
            return tt;
        }
        let tc = self.cov.select_rows(target).select_columns(condition);
        let cc = self.cov.select_rows(condition).select_columns(condition);
        let cc_inv = cc
            .cholesky()
            .expect("principal sub-matrix of a positive definite matrix")
            .inverse();
        &tt - &tc * cc_inv * tc.transpose()
    }

    /// Closed-form `h(target | condition)` in nats.
    pub fn conditional_entropy_nats(&self, target: &[usize], condition: &[usize]) -> f64 {
        let c = self.conditional_covariance(target, condition);
        0.5 * (target.len() as f64 * (2.0 * PI * E).ln() + c.determinant().ln())
    }

    pub fn mutual_information_nats(&self, a: &[usize], b: &[usize]) -> f64 {
        self.conditional_entropy_nats(a, &[]) - self.conditional_entropy_nats(a, b)
    }

    /// Union bound on the mass outside the box spanned by `axes`.
    pub fn mass_outside(&self, axes: &[Axis]) -> f64 {
        axes.iter()
            .enumerate()
            .map(|(i, axis)| {
                let sd = self.cov[(i, i)].sqrt();
                let below = (self.mean[i] - axis.origin) / sd;
                let above = (axis.end() - self.mean[i]) / sd;
                0.5 * erfc(below / 2f64.sqrt()) + 0.5 * erfc(above / 2f64.sqrt())
            })
            .sum()
    }

    /// Samples the density on the grid and rescales it to unit trapezoid mass.
    /// Fails when the grid leaves more than the tail tolerance outside.
    pub fn on_grid(&self, axes: Vec<Axis>) -> Result<GridDensity> {
        if axes.len() != self.dim() {
            return Err(Error::InvalidArity {
                expected: "one grid axis per Gaussian dimension",
                got: axes.len(),
            });
        }
        let tail = self.mass_outside(&axes);
        if tail > TAIL_TOLERANCE {
            return Err(Error::TailMass { tail });
        }
        GridDensity::from_fn(axes, |x| self.pdf(x))?.normalized()
    }
}

/// Wavenumber covariance conjugate to a position covariance: `Σ⁻¹ / 4`.
pub fn conjugate_covariance(position: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = position
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?
        .inverse();
    Ok(inv * 0.25)
}

/// Double-Gaussian two-photon state. `sigma_plus` is the width of the
/// `(x_A + x_B)/√2` mode and `sigma_minus` that of `(x_A - x_B)/√2`; the same
/// pair applies independently to each of `dims` spatial axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiphotonParams {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub dims: usize,
}

impl BiphotonParams {
    pub fn new(sigma_plus: f64, sigma_minus: f64, dims: usize) -> Result<Self> {
        for (name, s) in [("sigma_plus", sigma_plus), ("sigma_minus", sigma_minus)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {s} must be positive")));
            }
        }
        let ratio = (sigma_plus / sigma_minus).max(sigma_minus / sigma_plus);
        if ratio > MAX_WIDTH_RATIO {
            return Err(Error::InvalidParameter(format!(
                "width ratio {ratio:.3e} exceeds {MAX_WIDTH_RATIO:e}"
            )));
        }
        if dims == 0 {
            return Err(Error::InvalidParameter("dims must be at least 1".into()));
        }
        Ok(Self {
            sigma_plus,
            sigma_minus,
            dims,
        })
    }

    pub fn is_entangled(&self) -> bool {
        self.sigma_plus != self.sigma_minus
    }

    /// Single-axis position covariance of `(x_A, x_B)`.
    pub fn pair_position_covariance(&self) -> DMatrix<f64> {
        let (p, m) = (self.sigma_plus.powi(2), self.sigma_minus.powi(2));
        let (diag, off) = (0.5 * (p + m), 0.5 * (p - m));
        DMatrix::from_row_slice(2, 2, &[diag, off, off, diag])
    }

    /// Single-axis wavenumber covariance of `(k_A, k_B)`.
    pub fn pair_momentum_covariance(&self) -> DMatrix<f64> {
        let (p, m) = (
            0.25 / self.sigma_plus.powi(2),
            0.25 / self.sigma_minus.powi(2),
        );
        let (diag, off) = (0.5 * (p + m), 0.5 * (p - m));
        DMatrix::from_row_slice(2, 2, &[diag, off, off, diag])
    }

    /// Full position covariance with axes ordered `[A_1..A_n, B_1..B_n]`.
    pub fn position_covariance(&self) -> DMatrix<f64> {
        coupled_covariance(&self.pair_position_covariance(), self.dims, 0.0)
    }

    pub fn momentum_covariance(&self) -> DMatrix<f64> {
        coupled_covariance(&self.pair_momentum_covariance(), self.dims, 0.0)
    }
}

/// `pair ⊗ M` where `M` has unit diagonal and `coupling` between spatial axes.
/// Axis order is `[A_1..A_n, B_1..B_n]`.
pub fn coupled_covariance(pair: &DMatrix<f64>, dims: usize, coupling: f64) -> DMatrix<f64> {
    DMatrix::from_fn(2 * dims, 2 * dims, |r, c| {
        let (pr, ir) = (r / dims, r % dims);
        let (pc, ic) = (c / dims, c % dims);
        let m = if ir == ic { 1.0 } else { coupling };
        pair[(pr, pc)] * m
    })
}

fn model_joint(cov: DMatrix<f64>, axis: &Axis) -> Result<GridDensity> {
    let d = cov.nrows();
    if d > crate::grid::MAX_AXES {
        return Err(Error::InvalidArity {
            expected: "at most 2 spatial dimensions on a grid",
            got: d / 2,
        });
    }
    Gaussian::centered(cov)?.on_grid(vec![*axis; d])
}

/// `ρ(x_A, x_B) ∝ exp(-(x_A+x_B)²/(4σ₊²) - (x_A-x_B)²/(4σ₋²))` per axis, on a
/// square grid built from `axis` and normalized there.
pub fn position_joint(params: &BiphotonParams, axis: &Axis) -> Result<GridDensity> {
    model_joint(params.position_covariance(), axis)
}

/// Wavenumber joint conjugate to [`position_joint`].
pub fn momentum_joint(params: &BiphotonParams, axis: &Axis) -> Result<GridDensity> {
    model_joint(params.momentum_covariance(), axis)
}

/// Closed-form entropies of the B side, all axes taken together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticEntropies {
    pub base: LogBase,
    pub h_xb: f64,
    pub h_xb_given_xa: f64,
    pub h_kb: f64,
    pub h_kb_given_ka: f64,
    /// `h(x_B|x_A) + h(k_B|k_A)`.
    pub steering_lhs: f64,
    /// `n log(πe)`.
    pub uncertainty_bound: f64,
}

pub fn analytic_entropies(params: &BiphotonParams, base: LogBase) -> Result<AnalyticEntropies> {
    let n = params.dims;
    let a: Vec<usize> = (0..n).collect();
    let b: Vec<usize> = (n..2 * n).collect();
    let x = Gaussian::centered(params.position_covariance())?;
    let k = Gaussian::centered(params.momentum_covariance())?;
    let h_xb_given_xa = x.conditional_entropy_nats(&b, &a);
    let h_kb_given_ka = k.conditional_entropy_nats(&b, &a);
    Ok(AnalyticEntropies {
        base,
        h_xb: base.from_nats(x.conditional_entropy_nats(&b, &[])),
        h_xb_given_xa: base.from_nats(h_xb_given_xa),
        h_kb: base.from_nats(k.conditional_entropy_nats(&b, &[])),
        h_kb_given_ka: base.from_nats(h_kb_given_ka),
        steering_lhs: base.from_nats(h_xb_given_xa + h_kb_given_ka),
        uncertainty_bound: base.from_nats(n as f64 * (PI * E).ln()),
    })
}

/// Controls automatic grid construction for the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Half-width of the grid in marginal standard deviations.
    pub coverage_sigmas: f64,
    /// Nodes per standard deviation of the narrowest mode.
    pub samples_per_sigma: f64,
    /// Upper bound on the number of nodes of one joint grid.
    pub max_nodes: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            coverage_sigmas: 6.5,
            samples_per_sigma: 8.0,
            max_nodes: 40_000_000,
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Symmetric axis whose step divides every width, whose span is a whole
/// number of windows of each width, and which reaches `coverage_sigmas`
/// marginal deviations `spread` on either side.
pub fn commensurate_axis(widths: &[f64], spread: f64, max_step: f64, coverage_sigmas: f64) -> Result<Axis> {
    let finest = widths.iter().copied().fold(f64::INFINITY, f64::min);
    if widths.is_empty() || !(finest > 0.0 && finest.is_finite()) {
        return Err(Error::InvalidParameter("window widths must be positive".into()));
    }
    let r_min = (finest / max_step).ceil().max(1.0) as usize;
    let (step, multiples) = (r_min..r_min + 64)
        .find_map(|r| {
            let step = finest / r as f64;
            let m: Option<Vec<usize>> = widths.iter().map(|&w| whole_multiple(w, step)).collect();
            m.map(|m| (step, m))
        })
        .ok_or_else(|| Error::Incommensurate {
            axis: 0,
            detail: format!("no common grid step for widths {widths:?}"),
        })?;
    let period = multiples.iter().fold(1, |acc, &m| acc / gcd(acc, m) * m);
    let needed = (2.0 * coverage_sigmas * spread / step).ceil() as usize;
    let intervals = needed.div_ceil(period).max(1) * period;
    let half = intervals as f64 * step / 2.0;
    Axis::new(-half, step, intervals + 1)
}

/// Position and wavenumber axes shared by every width pair of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelGrids {
    pub x: Axis,
    pub k: Axis,
}

impl ModelGrids {
    /// Grids for one spatial axis `(A, B)` of the model, commensurate with all
    /// position widths `dxs` and wavenumber widths `dks`.
    pub fn for_widths(
        params: &BiphotonParams,
        dxs: &[f64],
        dks: &[f64],
        options: &GridOptions,
    ) -> Result<Self> {
        let xc = params.pair_position_covariance();
        let kc = params.pair_momentum_covariance();
        let narrow_x = params.sigma_plus.min(params.sigma_minus);
        let narrow_k = 0.5 / params.sigma_plus.max(params.sigma_minus);
        let x = commensurate_axis(
            dxs,
            xc[(0, 0)].sqrt(),
            narrow_x / options.samples_per_sigma,
            options.coverage_sigmas,
        )?;
        let k = commensurate_axis(
            dks,
            kc[(0, 0)].sqrt(),
            narrow_k / options.samples_per_sigma,
            options.coverage_sigmas,
        )?;
        for axis in [&x, &k] {
            if axis.count.saturating_mul(axis.count) > options.max_nodes {
                return Err(Error::InvalidParameter(format!(
                    "model grid of {}^2 nodes exceeds the limit of {}",
                    axis.count, options.max_nodes
                )));
            }
        }
        Ok(Self { x, k })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn moments(d: &GridDensity) -> (f64, f64, f64) {
        let w = d.weights();
        let ax = d.axes();
        let mut m = (0.0, 0.0, 0.0);
        for ((i, j), v) in d.values().clone().into_dimensionality::<ndarray::Ix2>().unwrap().indexed_iter() {
            let (x, y) = (ax[0].coordinate(i), ax[1].coordinate(j));
            let wv = w[0][i] * w[1][j] * v;
            m.0 += wv * x * x;
            m.1 += wv * y * y;
            m.2 += wv * x * y;
        }
        m
    }

    #[test]
    fn separable_point_has_no_correlation() {
        let p = BiphotonParams::new(1.0, 1.0, 1).unwrap();
        assert!(!p.is_entangled());
        let axis = Axis::symmetric(7.0, 0.1).unwrap();
        let d = position_joint(&p, &axis).unwrap();
        let mi = crate::entropy::mutual_information_differential(&d, LogBase::E).unwrap();
        assert_abs_diff_eq!(mi.value, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn position_moments_match_rotated_modes() {
        // Oracle: x_A = (u + v)/√2, x_B = (u - v)/√2 with Var u = σ₊², Var v = σ₋².
        let (sp, sm) = (1.0f64, 0.2f64);
        let p = BiphotonParams::new(sp, sm, 1).unwrap();
        let axis = Axis::symmetric(5.0, 0.02).unwrap();
        let (xx, yy, xy) = moments(&position_joint(&p, &axis).unwrap());
        let var = (sp * sp + sm * sm) / 2.0;
        let cov = (sp * sp - sm * sm) / 2.0;
        assert_abs_diff_eq!(xx, var, epsilon = 1e-6);
        assert_abs_diff_eq!(yy, var, epsilon = 1e-6);
        assert_abs_diff_eq!(xy, cov, epsilon = 1e-6);

        let swapped = BiphotonParams::new(sm, sp, 1).unwrap();
        let (sxx, _, sxy) = moments(&position_joint(&swapped, &axis).unwrap());
        assert_abs_diff_eq!(sxx, xx, epsilon = 1e-9);
        assert_abs_diff_eq!(sxy, -xy, epsilon = 1e-9);
    }

    #[test]
    fn momentum_moments_and_sign_flip() {
        let (sp, sm) = (1.0f64, 0.2f64);
        let p = BiphotonParams::new(sp, sm, 1).unwrap();
        let axis = Axis::symmetric(20.0, 0.05).unwrap();
        let (kk, _, kx) = moments(&momentum_joint(&p, &axis).unwrap());
        let (a, b) = (0.25 / (sp * sp), 0.25 / (sm * sm));
        assert_abs_diff_eq!(kk, (a + b) / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(kx, (a - b) / 2.0, epsilon = 1e-6);
        assert!(kx < 0.0);
    }

    #[test]
    fn separable_momentum_saturates_uncertainty_per_particle() {
        let p = BiphotonParams::new(1.0, 1.0, 1).unwrap();
        let x = Gaussian::centered(p.position_covariance()).unwrap();
        let k = Gaussian::centered(p.momentum_covariance()).unwrap();
        assert_abs_diff_eq!(p.momentum_covariance()[(0, 0)], 0.25, epsilon = 1e-15);
        let sum = x.conditional_entropy_nats(&[0], &[]) + k.conditional_entropy_nats(&[0], &[]);
        assert_abs_diff_eq!(sum, (PI * E).ln(), epsilon = 1e-12);
    }

    #[test]
    fn momentum_covariance_is_conjugate() {
        let p = BiphotonParams::new(0.7, 0.3, 2).unwrap();
        let conj = conjugate_covariance(&p.position_covariance()).unwrap();
        assert!((conj - p.momentum_covariance()).amax() < 1e-12);
    }

    #[test]
    fn analytic_record_matches_closed_forms() {
        let (sp, sm) = (1.0f64, 0.2f64);
        let p = BiphotonParams::new(sp, sm, 1).unwrap();
        let r = analytic_entropies(&p, LogBase::E).unwrap();
        // hand-derived Schur complements of the 2×2 covariances
        let var_x = 2.0 * sp * sp * sm * sm / (sp * sp + sm * sm);
        let var_k = 1.0 / (2.0 * (sp * sp + sm * sm));
        assert_abs_diff_eq!(r.h_xb_given_xa, 0.5 * (2.0 * PI * E * var_x).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.h_kb_given_ka, 0.5 * (2.0 * PI * E * var_k).ln(), epsilon = 1e-12);
        let sep = analytic_entropies(&BiphotonParams::new(0.8, 0.8, 1).unwrap(), LogBase::E).unwrap();
        assert_abs_diff_eq!(sep.h_xb_given_xa, sep.h_xb, epsilon = 1e-12);
        assert_abs_diff_eq!(sep.steering_lhs, sep.uncertainty_bound, epsilon = 1e-12);
    }

    #[test]
    fn parameter_validation() {
        assert!(BiphotonParams::new(0.0, 1.0, 1).is_err());
        assert!(BiphotonParams::new(1.0, f64::NAN, 1).is_err());
        assert!(BiphotonParams::new(1.0, 1e-4, 1).is_err());
        assert!(BiphotonParams::new(1.0, 1.0, 0).is_err());
        let three = BiphotonParams::new(1.0, 0.5, 3).unwrap();
        assert!(position_joint(&three, &Axis::symmetric(1.0, 0.5).unwrap()).is_err());
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let p = BiphotonParams::new(1.0, 1.0, 1).unwrap();
        let axis = Axis::symmetric(3.0, 0.1).unwrap();
        assert!(matches!(position_joint(&p, &axis), Err(Error::TailMass { .. })));
    }

    #[test]
    fn commensurate_axis_construction() {
        let a = commensurate_axis(&[0.05], 0.708, 0.05 / 8.0, 6.5).unwrap();
        assert_abs_diff_eq!(a.step, 0.00625, epsilon = 1e-15);
        assert!(a.end() >= 6.5 * 0.708);
        assert_eq!((a.count - 1) % 8, 0);

        let a = commensurate_axis(&[0.1, 0.2, 0.4, 0.8, 1.6], 1.0, 0.125, 6.5).unwrap();
        assert_abs_diff_eq!(a.step, 0.1, epsilon = 1e-15);
        assert_eq!((a.count - 1) % 16, 0);
        assert_abs_diff_eq!(a.origin, -a.end(), epsilon = 1e-12);

        let a = commensurate_axis(&[0.3, 0.7], 1.0, 1.0, 6.5).unwrap();
        assert!(whole_multiple(0.3, a.step).is_some() && whole_multiple(0.7, a.step).is_some());
    }
}
