//! Entropic EPR-steering witnesses: the continuous bound on
//! `h(x_B|x_A) + h(k_B|k_A)` and its binned counterpart
//! `H(X_B|X_A) + H(K_B|K_A) ≥ Σ_i log(πe / (Δx_Bi Δk_Bi))`.
//!
//! Joint inputs order their axes `[A_1..A_n, B_1..B_n]`. B is the steered
//! party; [`Conditioning::AGivenB`] evaluates the swapped test.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::discretize::bin_density;
use crate::entropy::{conditional_differential_nats, conditional_shannon_nats, EntropyValue, LogBase};
use crate::error::{Error, Result};
use crate::gaussian::{position_joint, momentum_joint, BiphotonParams, GridOptions, ModelGrids, FOURIER_CONVENTION};
use crate::grid::{BinningSpec, GridDensity, Histogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// `H(B|A)`: A's outcomes steer B.
    BGivenA,
    /// `H(A|B)`: roles swapped.
    AGivenB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LhsMode {
    /// Sum of one conditional entropy pair per spatial axis.
    PerAxis,
    /// Conditional entropies of all axes taken together.
    Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRecord {
    pub axis: usize,
    /// `H(X_Bi|X_Ai)`.
    pub h_x: f64,
    /// `H(K_Bi|K_Ai)`.
    pub h_k: f64,
    pub dx_b: f64,
    pub dk_b: f64,
    /// `log(πe / (Δx_Bi Δk_Bi))`.
    pub rhs: f64,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringReport {
    pub base: LogBase,
    pub mode: LhsMode,
    pub conditioning: Conditioning,
    pub dims: usize,
    /// Empty in vector mode.
    pub per_axis: Vec<AxisRecord>,
    /// Steered-side position widths per axis.
    pub dx_b: Vec<f64>,
    /// Steered-side wavenumber widths per axis.
    pub dk_b: Vec<f64>,
    pub h_x: f64,
    pub h_k: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; positive certifies steering.
    pub margin: f64,
    pub violated: bool,
    /// Set when the widths are so coarse that `rhs ≤ 0`; such a test cannot
    /// be violated and says nothing.
    pub vacuous: bool,
}

fn ln_pi_e() -> f64 {
    (PI * E).ln()
}

fn party_axes(ndim: usize, conditioning: Conditioning) -> Result<(Vec<usize>, Vec<usize>)> {
    if ndim < 2 || !ndim.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "a two-party joint needs an even number of axes, got {ndim}"
        )));
    }
    let n = ndim / 2;
    let a: Vec<usize> = (0..n).collect();
    let b: Vec<usize> = (n..2 * n).collect();
    Ok(match conditioning {
        Conditioning::BGivenA => (b, a),
        Conditioning::AGivenB => (a, b),
    })
}

fn check_pair(x: usize, k: usize) -> Result<()> {
    if x != k {
        return Err(Error::InvalidParameter(format!(
            "position joint has {x} axes but wavenumber joint has {k}"
        )));
    }
    Ok(())
}

/// `h(x⃗_B|x⃗_A) + h(k⃗_B|k⃗_A)` by quadrature. A non-steerable state keeps this
/// at or above `n log(πe)`.
pub fn continuous_steering_lhs(
    xs_joint: &GridDensity,
    ks_joint: &GridDensity,
    base: LogBase,
) -> Result<EntropyValue> {
    check_pair(xs_joint.ndim(), ks_joint.ndim())?;
    let (steered, given) = party_axes(xs_joint.ndim(), Conditioning::BGivenA)?;
    let nats = conditional_differential_nats(xs_joint, &steered, &given)?
        + conditional_differential_nats(ks_joint, &steered, &given)?;
    Ok(EntropyValue::from_nats(nats, base))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    base: LogBase,
    mode: LhsMode,
    conditioning: Conditioning,
    per_axis: Vec<AxisRecord>,
    dx_b: Vec<f64>,
    dk_b: Vec<f64>,
    h_x: f64,
    h_k: f64,
) -> SteeringReport {
    let rhs = dx_b
        .iter()
        .zip(&dk_b)
        .map(|(dx, dk)| base.from_nats((PI * E / (dx * dk)).ln()))
        .sum::<f64>();
    let lhs = h_x + h_k;
    let margin = rhs - lhs;
    let vacuous = rhs <= 0.0;
    SteeringReport {
        base,
        mode,
        conditioning,
        dims: dx_b.len(),
        per_axis,
        dx_b,
        dk_b,
        h_x,
        h_k,
        lhs,
        rhs,
        margin,
        violated: margin > 0.0 && !vacuous,
        vacuous,
    }
}

/// Binned witness on two-party histograms with axes `[A.., B..]`. One spatial
/// axis gives a single per-axis record; more axes are evaluated with vector
/// conditional entropies, which needs no independence between axes.
pub fn discrete_steering_test(x: &Histogram, k: &Histogram, base: LogBase) -> Result<SteeringReport> {
    discrete_steering_test_as(x, k, Conditioning::BGivenA, base)
}

pub fn discrete_steering_test_as(
    x: &Histogram,
    k: &Histogram,
    conditioning: Conditioning,
    base: LogBase,
) -> Result<SteeringReport> {
    check_pair(x.ndim(), k.ndim())?;
    if x.ndim() == 2 {
        return discrete_steering_per_axis(&[(x, k)], conditioning, base);
    }
    let (steered, given) = party_axes(x.ndim(), conditioning)?;
    let h_x = base.from_nats(conditional_shannon_nats(x, &steered, &given)?);
    let h_k = base.from_nats(conditional_shannon_nats(k, &steered, &given)?);
    let dx_b = steered.iter().map(|&a| x.dims()[a].width).collect();
    let dk_b = steered.iter().map(|&a| k.dims()[a].width).collect();
    Ok(finish(base, LhsMode::Vector, conditioning, Vec::new(), dx_b, dk_b, h_x, h_k))
}

/// Per-axis witness: one `(x, k)` pair of two-axis `[A_i, B_i]` histograms per
/// spatial axis, entropies summed across axes.
pub fn discrete_steering_per_axis(
    pairs: &[(&Histogram, &Histogram)],
    conditioning: Conditioning,
    base: LogBase,
) -> Result<SteeringReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no axes to test".into()));
    }
    let mut records = Vec::with_capacity(pairs.len());
    for (i, (x, k)) in pairs.iter().enumerate() {
        if x.ndim() != 2 || k.ndim() != 2 {
            return Err(Error::InvalidParameter(format!(
                "axis {i}: per-axis histograms must have exactly two axes [A, B]"
            )));
        }
        let (steered, given) = party_axes(2, conditioning)?;
        let h_x = base.from_nats(conditional_shannon_nats(x, &steered, &given)?);
        let h_k = base.from_nats(conditional_shannon_nats(k, &steered, &given)?);
        let dx_b = x.dims()[steered[0]].width;
        let dk_b = k.dims()[steered[0]].width;
        let rhs = base.from_nats((PI * E / (dx_b * dk_b)).ln());
        records.push(AxisRecord {
            axis: i,
            h_x,
            h_k,
            dx_b,
            dk_b,
            rhs,
            vacuous: rhs <= 0.0,
        });
    }
    let h_x = records.iter().map(|r| r.h_x).sum();
    let h_k = records.iter().map(|r| r.h_k).sum();
    let dx_b = records.iter().map(|r| r.dx_b).collect();
    let dk_b = records.iter().map(|r| r.dk_b).collect();
    Ok(finish(base, LhsMode::PerAxis, conditioning, records, dx_b, dk_b, h_x, h_k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub dx: f64,
    pub dk: f64,
    /// `lhs + Σ_i log(Δx_Bi Δk_Bi)`, which tends to the continuous value.
    pub corrected_lhs: f64,
    pub report: SteeringReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinScan {
    pub convention: String,
    pub params: BiphotonParams,
    pub grids: ModelGrids,
    /// Quadrature value of `h(x⃗_B|x⃗_A) + h(k⃗_B|k⃗_A)` on the model grids.
    pub continuous_lhs: f64,
    /// `n log(πe)`.
    pub uncertainty_bound: f64,
    pub entries: Vec<ScanEntry>,
    /// First width pair, in scan order, whose verdict turns to violated.
    pub flip: Option<(f64, f64)>,
}

/// Binned witness of the model for each `(Δx, Δk)` pair, applied to every
/// spatial axis. All pairs share one position and one wavenumber grid.
pub fn steering_bin_scan(
    params: &BiphotonParams,
    widths: &[(f64, f64)],
    conditioning: Conditioning,
    base: LogBase,
    options: &GridOptions,
) -> Result<BinScan> {
    if widths.is_empty() {
        return Err(Error::InvalidParameter("no width pairs to scan".into()));
    }
    let dxs: Vec<f64> = widths.iter().map(|w| w.0).collect();
    let dks: Vec<f64> = widths.iter().map(|w| w.1).collect();
    let grids = ModelGrids::for_widths(params, &dxs, &dks, options)?;
    let single = BiphotonParams { dims: 1, ..*params };
    let x_joint = position_joint(&single, &grids.x)?;
    let k_joint = momentum_joint(&single, &grids.k)?;
    let n = params.dims;

    let (x_view, k_view) = match conditioning {
        Conditioning::BGivenA => (x_joint.clone(), k_joint.clone()),
        Conditioning::AGivenB => (x_joint.permute_axes(&[1, 0])?, k_joint.permute_axes(&[1, 0])?),
    };
    let continuous_lhs =
        n as f64 * continuous_steering_lhs(&x_view, &k_view, base)?.value;

    let mut entries = Vec::with_capacity(widths.len());
    for &(dx, dk) in widths {
        let xh = bin_density(&x_joint, &BinningSpec::tiling(&x_joint, &[dx])?)?;
        let kh = bin_density(&k_joint, &BinningSpec::tiling(&k_joint, &[dk])?)?;
        let pairs: Vec<(&Histogram, &Histogram)> = (0..n).map(|_| (&xh, &kh)).collect();
        let report = discrete_steering_per_axis(&pairs, conditioning, base)?;
        let corrected_lhs = report.lhs + n as f64 * base.from_nats((dx * dk).ln());
        entries.push(ScanEntry {
            dx,
            dk,
            corrected_lhs,
            report,
        });
    }
    let flip = entries
        .windows(2)
        .find(|w| !w[0].report.violated && w[1].report.violated)
        .map(|w| (w[1].dx, w[1].dk));
    Ok(BinScan {
        convention: FOURIER_CONVENTION.into(),
        params: *params,
        grids,
        continuous_lhs,
        uncertainty_bound: base.from_nats(n as f64 * ln_pi_e()),
        entries,
        flip,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathComparison {
    pub per_axis: SteeringReport,
    pub vector: SteeringReport,
    /// `vector.lhs - per_axis.lhs`.
    pub difference: f64,
    pub continuous_per_axis: f64,
    pub continuous_vector: f64,
}

/// Evaluates the binned witness of `n ≥ 2`-axis joints both as a sum of
/// per-axis conditional entropies and with vector conditional entropies.
/// No ordering between the two is asserted.
pub fn per_axis_vs_vector(
    x_joint: &GridDensity,
    k_joint: &GridDensity,
    x_spec: &BinningSpec,
    k_spec: &BinningSpec,
    base: LogBase,
) -> Result<PathComparison> {
    check_pair(x_joint.ndim(), k_joint.ndim())?;
    let ndim = x_joint.ndim();
    if ndim < 4 || !ndim.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "path comparison needs n >= 2 spatial axes, joint has {ndim} axes"
        )));
    }
    let n = ndim / 2;
    let xh = bin_density(x_joint, x_spec)?;
    let kh = bin_density(k_joint, k_spec)?;
    let vector = discrete_steering_test(&xh, &kh, base)?;

    let mut marg = Vec::with_capacity(n);
    let mut continuous_per_axis = 0.0;
    for i in 0..n {
        marg.push((xh.marginalize_axes(&[i, n + i])?, kh.marginalize_axes(&[i, n + i])?));
        continuous_per_axis += continuous_steering_lhs(
            &x_joint.marginalize_axes(&[i, n + i])?,
            &k_joint.marginalize_axes(&[i, n + i])?,
            base,
        )?
        .value;
    }
    let pairs: Vec<(&Histogram, &Histogram)> = marg.iter().map(|(a, b)| (a, b)).collect();
    let per_axis = discrete_steering_per_axis(&pairs, Conditioning::BGivenA, base)?;
    let continuous_vector = continuous_steering_lhs(x_joint, k_joint, base)?.value;
    Ok(PathComparison {
        difference: vector.lhs - per_axis.lhs,
        per_axis,
        vector,
        continuous_per_axis,
        continuous_vector,
    })
}
