//! Densities sampled on uniform grids, window histograms, and the composite
//! trapezoid quadrature every integral in the crate goes through.

use ndarray::{Array1, ArrayD, ArrayView1, ArrayViewD, Axis as NdAxis, IxDyn, Slice};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of axes on a density or histogram.
pub const MAX_AXES: usize = 4;
/// Accepted deviation of the total mass from one.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Largest mass a generated grid may leave outside its bounds.
pub const TAIL_TOLERANCE: f64 = 1e-9;
/// Negative values down to this magnitude are clamped to zero.
pub const JITTER_TOLERANCE: f64 = 1e-12;

/// A uniform one-dimensional grid: node `i` sits at `origin + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(origin: f64, step: f64, count: usize) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::InvalidAxis(format!("origin {origin} is not finite")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidAxis(format!("step {step} must be positive")));
        }
        if count < 2 {
            return Err(Error::InvalidAxis(format!("count {count} must be at least 2")));
        }
        Ok(Self {
            origin,
            step,
            count,
        })
    }

    /// Grid on `[-half_width, half_width]`; the width must be a whole number of steps.
    pub fn symmetric(half_width: f64, step: f64) -> Result<Self> {
        let intervals = whole_multiple(2.0 * half_width, step).ok_or_else(|| {
            Error::InvalidAxis(format!(
                "width {} is not a whole number of steps {step}",
                2.0 * half_width
            ))
        })?;
        Self::new(-half_width, step, intervals + 1)
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.coordinate(self.count - 1)
    }

    pub fn coordinates(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.coordinate(i))
    }

    pub fn trapezoid_weights(&self) -> Array1<f64> {
        trapezoid_weights(self.count, self.step)
    }

    /// Weights that integrate the piecewise-linear interpolant over `[lo, hi]`.
    /// Reduces to trapezoid weights when both ends fall on nodes.
    fn interval_weights(&self, lo: f64, hi: f64) -> Array1<f64> {
        let mut w = Array1::zeros(self.count);
        let h = self.step;
        for i in 0..self.count - 1 {
            let x0 = self.coordinate(i);
            let x1 = x0 + h;
            let s = lo.max(x0);
            let t = hi.min(x1);
            if t <= s {
                continue;
            }
            // ∫_s^t (x1 - x)/h dx and ∫_s^t (x - x0)/h dx
            w[i] += ((x1 - s).powi(2) - (x1 - t).powi(2)) / (2.0 * h);
            w[i + 1] += ((t - x0).powi(2) - (s - x0).powi(2)) / (2.0 * h);
        }
        w
    }
}

/// Composite trapezoid weights for `n` equally spaced nodes.
pub fn trapezoid_weights(n: usize, step: f64) -> Array1<f64> {
    let mut w = Array1::from_elem(n, step);
    if n > 0 {
        w[0] = 0.5 * step;
        w[n - 1] = 0.5 * step;
    }
    w
}

/// Returns `k` when `value ≈ k * unit` for a non-negative integer `k`.
pub(crate) fn whole_multiple(value: f64, unit: f64) -> Option<usize> {
    let ratio = value / unit;
    let k = ratio.round();
    if k < 0.0 || (ratio - k).abs() > 1e-9 * k.max(1.0) {
        return None;
    }
    Some(k as usize)
}

/// Sequential dot product. The fixed summation order keeps reductions over
/// mirrored axes bitwise identical.
#[inline]
pub(crate) fn weighted_sum(lane: ArrayView1<'_, f64>, weights: &Array1<f64>) -> f64 {
    lane.iter().zip(weights).fold(0.0, |acc, (v, w)| acc + v * w)
}

/// Integrates a tensor-product weighted sum over every axis of `view`.
pub(crate) fn contract_all(view: ArrayViewD<'_, f64>, weights: &[Array1<f64>]) -> f64 {
    let n = weights.len();
    debug_assert_eq!(n, view.ndim());
    if n == 0 {
        return view.first().copied().unwrap_or(0.0);
    }
    let mut cur = view.map_axis(NdAxis(n - 1), |lane| weighted_sum(lane, &weights[n - 1]));
    for a in (0..n - 1).rev() {
        cur = cur.map_axis(NdAxis(a), |lane| weighted_sum(lane, &weights[a]));
    }
    cur.first().copied().unwrap_or(0.0)
}

/// Sanitizes raw values: non-finite and clearly negative entries are errors,
/// rounding jitter is clamped to zero and counted.
fn sanitize(values: &mut ArrayD<f64>) -> Result<usize> {
    let mut clamped = 0;
    for (index, v) in values.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if *v < 0.0 {
            if *v < -JITTER_TOLERANCE {
                return Err(Error::NegativeValue { index, value: *v });
            }
            *v = 0.0;
            clamped += 1;
        }
    }
    Ok(clamped)
}

fn check_axes_subset(keep: &[usize], ndim: usize) -> Result<()> {
    for (i, &a) in keep.iter().enumerate() {
        if a >= ndim {
            return Err(Error::AxisOutOfRange { axis: a, ndim });
        }
        if keep[..i].contains(&a) {
            return Err(Error::InvalidParameter(format!("axis {a} listed twice")));
        }
    }
    Ok(())
}

fn check_permutation(order: &[usize], ndim: usize) -> Result<()> {
    if order.len() != ndim {
        return Err(Error::InvalidParameter(format!(
            "permutation {order:?} does not cover {ndim} axes"
        )));
    }
    check_axes_subset(order, ndim)
}

/// Report produced by `validate`. Never mutates its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub total_mass: f64,
    /// Signed `total_mass - 1`.
    pub normalization_defect: f64,
    pub clamped_values: usize,
    pub min_value: f64,
    /// Mass estimated beyond the grid edges; `None` when an edge does not decay.
    pub tail_mass_estimate: Option<f64>,
    pub notes: Vec<String>,
}

impl Diagnostics {
    pub fn is_normalized(&self) -> bool {
        self.normalization_defect.abs() <= NORM_TOLERANCE
    }
}

/// A probability density sampled at the nodes of a rectangular uniform grid.
///
/// Values are stored row-major (last axis fastest). Discontinuities such as
/// the edge of a uniform plateau are represented by a node on the jump that
/// carries the inside value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    axes: Vec<Axis>,
    values: ArrayD<f64>,
    clamped: usize,
}

impl GridDensity {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(|a| a.count).collect();
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        let array = ArrayD::from_shape_vec(IxDyn(&shape), values)
            .expect("shape was checked against the value count");
        Self::from_array(axes, array)
    }

    pub fn from_array(axes: Vec<Axis>, mut values: ArrayD<f64>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::InvalidArity {
                expected: "1 to 4",
                got: axes.len(),
            });
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.count).collect();
        if values.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: shape.iter().product(),
                got: values.len(),
            });
        }
        let clamped = sanitize(&mut values)?;
        Ok(Self {
            axes,
            values: values.as_standard_layout().into_owned(),
            clamped,
        })
    }

    /// Samples `f` at every node. `f` receives the node coordinates.
    pub fn from_fn(axes: Vec<Axis>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::InvalidArity {
                expected: "1 to 4",
                got: axes.len(),
            });
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.count).collect();
        let n = axes.len();
        let values = ArrayD::from_shape_fn(IxDyn(&shape), |idx| {
            let mut x = [0.0; MAX_AXES];
            for a in 0..n {
                x[a] = axes[a].coordinate(idx[a]);
            }
            f(&x[..n])
        });
        Self::from_array(axes, values)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }

    /// Number of jitter values clamped to zero at construction.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    pub(crate) fn weights(&self) -> Vec<Array1<f64>> {
        self.axes.iter().map(Axis::trapezoid_weights).collect()
    }

    /// Trapezoid integral over the whole grid.
    pub fn total_mass(&self) -> f64 {
        contract_all(self.values.view(), &self.weights())
    }

    /// Integral over an axis-aligned box given as `(lo, hi)` per axis, or the
    /// whole grid when `region` is `None`. Box faces need not fall on nodes;
    /// partial cells are integrated with the multilinear interpolant.
    pub fn integrate(&self, region: Option<&[(f64, f64)]>) -> Result<f64> {
        let Some(region) = region else {
            return Ok(self.total_mass());
        };
        if region.len() != self.ndim() {
            return Err(Error::InvalidArity {
                expected: "one interval per grid axis",
                got: region.len(),
            });
        }
        let mut weights = Vec::with_capacity(region.len());
        for (a, (axis, &(lo, hi))) in self.axes.iter().zip(region).enumerate() {
            let slack = 1e-12 * axis.step;
            if !(lo <= hi) || lo < axis.origin - slack || hi > axis.end() + slack {
                return Err(Error::OutOfDomain(format!(
                    "axis {a}: [{lo}, {hi}] is not inside [{}, {}]",
                    axis.origin,
                    axis.end()
                )));
            }
            weights.push(axis.interval_weights(lo, hi));
        }
        Ok(contract_all(self.values.view(), &weights))
    }

    /// One-axis marginal obtained by integrating out every other axis.
    pub fn marginalize(&self, keep_axis: usize) -> Result<GridDensity> {
        if self.ndim() < 2 {
            return Err(Error::InvalidArity {
                expected: "at least 2",
                got: self.ndim(),
            });
        }
        self.marginalize_axes(&[keep_axis])
    }

    /// Marginal over the axes in `keep`, in ascending axis order.
    pub fn marginalize_axes(&self, keep: &[usize]) -> Result<GridDensity> {
        check_axes_subset(keep, self.ndim())?;
        if keep.is_empty() {
            return Err(Error::InvalidParameter("no axes to keep".into()));
        }
        let weights = self.weights();
        let mut cur = self.values.clone();
        for a in (0..self.ndim()).rev() {
            if !keep.contains(&a) {
                cur = cur.map_axis(NdAxis(a), |lane| weighted_sum(lane, &weights[a]));
            }
        }
        let axes = (0..self.ndim())
            .filter(|a| keep.contains(a))
            .map(|a| self.axes[a])
            .collect();
        Ok(Self {
            axes,
            values: cur,
            clamped: 0,
        })
    }

    /// Copy rescaled to unit trapezoid mass.
    pub fn normalized(&self) -> Result<GridDensity> {
        let mass = self.total_mass();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(
                "cannot normalize a density with zero mass".into(),
            ));
        }
        Ok(Self {
            axes: self.axes.clone(),
            values: &self.values / mass,
            clamped: self.clamped,
        })
    }

    /// Sub-grid over inclusive node ranges, one per axis. Values are copied
    /// unchanged.
    pub fn crop(&self, ranges: &[(usize, usize)]) -> Result<GridDensity> {
        if ranges.len() != self.ndim() {
            return Err(Error::InvalidArity {
                expected: "one node range per grid axis",
                got: ranges.len(),
            });
        }
        let mut axes = Vec::with_capacity(ranges.len());
        for (a, (axis, &(lo, hi))) in self.axes.iter().zip(ranges).enumerate() {
            if hi >= axis.count || hi <= lo {
                return Err(Error::OutOfDomain(format!(
                    "axis {a}: node range {lo}..={hi} is not inside 0..{}",
                    axis.count
                )));
            }
            axes.push(Axis::new(axis.coordinate(lo), axis.step, hi - lo + 1)?);
        }
        let view = self
            .values
            .slice_each_axis(|ax| Slice::from(ranges[ax.axis.index()].0..=ranges[ax.axis.index()].1));
        Ok(Self {
            axes,
            values: view.to_owned(),
            clamped: 0,
        })
    }

    /// Reorders axes: output axis `i` is input axis `order[i]`.
    pub fn permute_axes(&self, order: &[usize]) -> Result<GridDensity> {
        check_permutation(order, self.ndim())?;
        let values = self
            .values
            .clone()
            .permuted_axes(IxDyn(order))
            .as_standard_layout()
            .into_owned();
        Ok(Self {
            axes: order.iter().map(|&a| self.axes[a]).collect(),
            values,
            clamped: self.clamped,
        })
    }

    pub fn validate(&self) -> Diagnostics {
        let total_mass = self.total_mass();
        let min_value = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut notes = Vec::new();
        if self.clamped > 0 {
            notes.push(format!(
                "{} negative jitter value(s) clamped to zero",
                self.clamped
            ));
        }
        let tail_mass_estimate = self.edge_tail_estimate(&mut notes);
        if (total_mass - 1.0).abs() > NORM_TOLERANCE {
            notes.push(format!("total mass {total_mass} is not 1 within {NORM_TOLERANCE:e}"));
        }
        Diagnostics {
            total_mass,
            normalization_defect: total_mass - 1.0,
            clamped_values: self.clamped,
            min_value,
            tail_mass_estimate,
            notes,
        }
    }

    /// Extrapolates the mass beyond each grid face from the decay between the
    /// outermost two node slices, assuming exponential fall-off.
    fn edge_tail_estimate(&self, notes: &mut Vec<String>) -> Option<f64> {
        let weights = self.weights();
        let mut tail = 0.0;
        let mut decaying = true;
        for (a, axis) in self.axes.iter().enumerate() {
            let others: Vec<Array1<f64>> = weights
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, w)| w.clone())
                .collect();
            let face = |i: usize| contract_all(self.values.index_axis(NdAxis(a), i), &others);
            for (edge, inner) in [(0, 1), (axis.count - 1, axis.count - 2)] {
                let m0 = face(edge);
                let m1 = face(inner);
                if m0 == 0.0 {
                    continue;
                }
                if m0 < m1 {
                    tail += m0 * axis.step / (m1 / m0).ln();
                } else {
                    decaying = false;
                    notes.push(format!(
                        "axis {a}: density does not decay toward node {edge}; tail mass unknown"
                    ));
                }
            }
        }
        decaying.then_some(tail)
    }
}

/// Geometry of one histogram axis: `count` contiguous windows of equal width,
/// window `i` centered at `first_center + i * width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinAxis {
    pub width: f64,
    pub count: usize,
    pub first_center: f64,
}

impl BinAxis {
    pub fn new(width: f64, count: usize, first_center: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidAxis(format!("window width {width} must be positive")));
        }
        if count == 0 {
            return Err(Error::InvalidAxis("window count must be at least 1".into()));
        }
        if !first_center.is_finite() {
            return Err(Error::InvalidAxis("window center is not finite".into()));
        }
        Ok(Self {
            width,
            count,
            first_center,
        })
    }

    pub fn center(&self, i: usize) -> f64 {
        self.first_center + i as f64 * self.width
    }

    pub fn lower_edge(&self) -> f64 {
        self.first_center - 0.5 * self.width
    }

    pub fn upper_edge(&self) -> f64 {
        self.lower_edge() + self.count as f64 * self.width
    }

    /// The same region cut into windows of half the width.
    pub fn halved(&self) -> BinAxis {
        BinAxis {
            width: 0.5 * self.width,
            count: 2 * self.count,
            first_center: self.first_center - 0.25 * self.width,
        }
    }
}

/// Window layout per axis used to discretize a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub axes: Vec<BinAxis>,
}

impl BinningSpec {
    pub fn new(axes: Vec<BinAxis>) -> Self {
        Self { axes }
    }

    /// Windows of the given widths (one per axis, or a single width for all)
    /// that tile every grid axis from its first to its last node.
    pub fn tiling(density: &GridDensity, widths: &[f64]) -> Result<Self> {
        let n = density.ndim();
        if widths.len() != n && widths.len() != 1 {
            return Err(Error::InvalidArity {
                expected: "one width per axis or a single width",
                got: widths.len(),
            });
        }
        let mut axes = Vec::with_capacity(n);
        for (a, axis) in density.axes().iter().enumerate() {
            let width = widths[if widths.len() == 1 { 0 } else { a }];
            let span = axis.end() - axis.origin;
            let count = whole_multiple(span, width).filter(|&c| c > 0).ok_or_else(|| {
                Error::Incommensurate {
                    axis: a,
                    detail: format!("grid span {span} is not a whole number of windows {width}"),
                }
            })?;
            axes.push(BinAxis::new(width, count, axis.origin + 0.5 * width)?);
        }
        Ok(Self { axes })
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.width).collect()
    }

    pub fn halved(&self) -> BinningSpec {
        BinningSpec {
            axes: self.axes.iter().map(BinAxis::halved).collect(),
        }
    }

    pub fn select(&self, keep: &[usize]) -> BinningSpec {
        BinningSpec {
            axes: keep.iter().map(|&a| self.axes[a]).collect(),
        }
    }
}

/// Discrete probabilities over a rectangular array of equal-width windows,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    dims: Vec<BinAxis>,
    probs: ArrayD<f64>,
    clamped: usize,
}

impl Histogram {
    pub fn new(dims: Vec<BinAxis>, probs: Vec<f64>) -> Result<Self> {
        let shape: Vec<usize> = dims.iter().map(|d| d.count).collect();
        let expected: usize = shape.iter().product();
        if probs.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: probs.len(),
            });
        }
        let array = ArrayD::from_shape_vec(IxDyn(&shape), probs)
            .expect("shape was checked against the value count");
        Self::from_array(dims, array)
    }

    pub fn from_array(dims: Vec<BinAxis>, mut probs: ArrayD<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_AXES {
            return Err(Error::InvalidArity {
                expected: "1 to 4",
                got: dims.len(),
            });
        }
        let shape: Vec<usize> = dims.iter().map(|d| d.count).collect();
        if probs.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: shape.iter().product(),
                got: probs.len(),
            });
        }
        let clamped = sanitize(&mut probs)?;
        Ok(Self {
            dims,
            probs: probs.as_standard_layout().into_owned(),
            clamped,
        })
    }

    pub fn dims(&self) -> &[BinAxis] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn probs(&self) -> &ArrayD<f64> {
        &self.probs
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.width).collect()
    }

    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    pub fn total(&self) -> f64 {
        self.probs.sum()
    }

    pub fn normalized(&self) -> Result<Histogram> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "cannot normalize a histogram with zero mass".into(),
            ));
        }
        Ok(Self {
            dims: self.dims.clone(),
            probs: &self.probs / total,
            clamped: self.clamped,
        })
    }

    /// Marginal table over the axes in `keep`, in ascending axis order.
    pub fn marginalize_axes(&self, keep: &[usize]) -> Result<Histogram> {
        check_axes_subset(keep, self.ndim())?;
        if keep.is_empty() {
            return Err(Error::InvalidParameter("no axes to keep".into()));
        }
        let mut cur = self.probs.clone();
        for a in (0..self.ndim()).rev() {
            if !keep.contains(&a) {
                cur = cur.sum_axis(NdAxis(a));
            }
        }
        let dims = (0..self.ndim())
            .filter(|a| keep.contains(a))
            .map(|a| self.dims[a])
            .collect();
        Ok(Self {
            dims,
            probs: cur,
            clamped: 0,
        })
    }

    pub fn permute_axes(&self, order: &[usize]) -> Result<Histogram> {
        check_permutation(order, self.ndim())?;
        let probs = self
            .probs
            .clone()
            .permuted_axes(IxDyn(order))
            .as_standard_layout()
            .into_owned();
        Ok(Self {
            dims: order.iter().map(|&a| self.dims[a]).collect(),
            probs,
            clamped: self.clamped,
        })
    }

    pub fn validate(&self) -> Diagnostics {
        let total_mass = self.total();
        let min_value = self.probs.iter().copied().fold(f64::INFINITY, f64::min);
        let mut notes = Vec::new();
        if self.clamped > 0 {
            notes.push(format!(
                "{} negative jitter value(s) clamped to zero",
                self.clamped
            ));
        }
        if (total_mass - 1.0).abs() > NORM_TOLERANCE {
            notes.push(format!("probabilities sum to {total_mass}, not 1 within {NORM_TOLERANCE:e}"));
        }
        Diagnostics {
            total_mass,
            normalization_defect: total_mass - 1.0,
            clamped_values: self.clamped,
            min_value,
            // Window tables carry no information about mass outside them.
            tail_mass_estimate: Some(0.0),
            notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use statrs::function::erf::erf;

    fn normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    fn std_normal(step: f64) -> GridDensity {
        let axis = Axis::symmetric(8.0, step).unwrap();
        GridDensity::from_fn(vec![axis], |x| normal_pdf(x[0])).unwrap()
    }

    #[test]
    fn axis_rejects_bad_geometry() {
        assert!(Axis::new(0.0, 0.0, 4).is_err());
        assert!(Axis::new(0.0, 0.1, 1).is_err());
        assert!(Axis::new(f64::NAN, 0.1, 4).is_err());
        assert!(Axis::symmetric(1.0, 0.3).is_err());
        assert_eq!(Axis::symmetric(1.0, 0.25).unwrap().count, 9);
    }

    #[test]
    fn uniform_integrates_to_one() {
        let axis = Axis::new(0.0, 0.5 / 64.0, 65).unwrap();
        let d = GridDensity::from_fn(vec![axis], |_| 2.0).unwrap();
        assert_eq!(d.integrate(None).unwrap(), 1.0);
    }

    #[test]
    fn one_sigma_mass_matches_erf() {
        let d = std_normal(1.0 / 256.0);
        let p = d.integrate(Some(&[(-1.0, 1.0)])).unwrap();
        assert_abs_diff_eq!(p, erf(1.0 / 2f64.sqrt()), epsilon = 1e-6);
    }

    #[test]
    fn off_node_region_uses_partial_cells() {
        // A linear function is integrated exactly by the interpolant.
        let axis = Axis::new(0.0, 0.1, 11).unwrap();
        let d = GridDensity::from_fn(vec![axis], |x| x[0]).unwrap();
        let p = d.integrate(Some(&[(0.123, 0.789)])).unwrap();
        assert_abs_diff_eq!(p, 0.5 * (0.789f64.powi(2) - 0.123f64.powi(2)), epsilon = 1e-14);
    }

    #[test]
    fn zero_density_integrates_to_zero() {
        let axis = Axis::new(-1.0, 0.25, 9).unwrap();
        let d = GridDensity::new(vec![axis, axis], vec![0.0; 81]).unwrap();
        assert_eq!(d.integrate(Some(&[(-0.5, 0.3), (0.0, 1.0)])).unwrap(), 0.0);
    }

    #[test]
    fn region_outside_grid_is_rejected() {
        let d = std_normal(0.25);
        assert!(matches!(
            d.integrate(Some(&[(-9.0, 0.0)])),
            Err(Error::OutOfDomain(_))
        ));
        assert!(d.integrate(Some(&[(1.0, 0.0)])).is_err());
    }

    #[test]
    fn marginal_of_product_is_factor() {
        let axis = Axis::symmetric(8.0, 0.125).unwrap();
        let fx = |x: f64| normal_pdf(x);
        let fy = |y: f64| normal_pdf((y - 0.5) / 0.7) / 0.7;
        let joint = GridDensity::from_fn(vec![axis, axis], |p| fx(p[0]) * fy(p[1])).unwrap();
        let mass_y = contract_all(
            ndarray::arr1(&axis.coordinates().map(fy).collect::<Vec<_>>())
                .into_dyn()
                .view(),
            &[axis.trapezoid_weights()],
        );
        let mx = joint.marginalize(0).unwrap();
        for (i, x) in axis.coordinates().enumerate() {
            assert_abs_diff_eq!(mx.values()[[i]], fx(x) * mass_y, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(mx.total_mass(), joint.total_mass(), epsilon = 1e-9);
    }

    #[test]
    fn marginalize_requires_two_axes() {
        let d = std_normal(0.5);
        assert!(matches!(
            d.marginalize(0),
            Err(Error::InvalidArity { got: 1, .. })
        ));
        let axis = Axis::symmetric(1.0, 0.5).unwrap();
        let j = GridDensity::new(vec![axis, axis], vec![1.0; 25]).unwrap();
        assert!(matches!(j.marginalize(2), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn symmetric_joint_marginals_agree() {
        let axis = Axis::symmetric(6.0, 0.1).unwrap();
        let j = GridDensity::from_fn(vec![axis, axis], |p| {
            (-(p[0] + p[1]).powi(2) - 3.0 * (p[0] - p[1]).powi(2)).exp()
        })
        .unwrap();
        assert_eq!(j.marginalize(0).unwrap().values(), j.marginalize(1).unwrap().values());
    }

    #[test]
    fn validate_reports_defect_and_jitter() {
        let h = Histogram::new(vec![BinAxis::new(1.0, 4, 0.0).unwrap()], vec![0.25; 4]).unwrap();
        let d = h.validate();
        assert_eq!(d.normalization_defect, 0.0);
        assert!(d.notes.is_empty());

        let h = Histogram::new(vec![BinAxis::new(1.0, 2, 0.0).unwrap()], vec![0.5, 0.6]).unwrap();
        assert_abs_diff_eq!(h.validate().normalization_defect, 0.1, epsilon = 1e-15);
        assert!(!h.validate().is_normalized());

        let h = Histogram::new(
            vec![BinAxis::new(1.0, 3, 0.0).unwrap()],
            vec![0.5, -1e-12, 0.5],
        )
        .unwrap();
        assert_eq!(h.probs()[[1]], 0.0);
        let diag = h.validate();
        assert_eq!(diag.clamped_values, 1);
        assert!(diag.notes[0].contains("clamped"));

        let err = Histogram::new(vec![BinAxis::new(1.0, 2, 0.0).unwrap()], vec![1.1, -0.1]);
        assert!(matches!(err, Err(Error::NegativeValue { index: 1, .. })));
    }

    #[test]
    fn tail_estimate_tracks_gaussian_truncation() {
        let axis = Axis::symmetric(4.0, 0.01).unwrap();
        let d = GridDensity::from_fn(vec![axis], |x| normal_pdf(x[0])).unwrap();
        let diag = d.validate();
        let exact = 1.0 - erf(4.0 / 2f64.sqrt());
        let est = diag.tail_mass_estimate.unwrap();
        // exponential extrapolation of a Gaussian tail is within a factor of two
        assert!(est > 0.5 * exact && est < 2.0 * exact, "{est} vs {exact}");

        let flat = GridDensity::new(vec![Axis::new(0.0, 0.25, 5).unwrap()], vec![1.0; 5]).unwrap();
        assert_eq!(flat.validate().tail_mass_estimate, None);
    }

    #[test]
    fn crop_and_permute() {
        let ax = Axis::new(0.0, 1.0, 4).unwrap();
        let ay = Axis::new(10.0, 0.5, 3).unwrap();
        let d = GridDensity::new(vec![ax, ay], (0..12).map(f64::from).collect()).unwrap();
        let c = d.crop(&[(1, 2), (0, 1)]).unwrap();
        assert_eq!(c.axes()[0].origin, 1.0);
        assert_eq!(c.values().iter().copied().collect::<Vec<_>>(), vec![3.0, 4.0, 6.0, 7.0]);
        let p = d.permute_axes(&[1, 0]).unwrap();
        assert_eq!(p.axes()[0], ay);
        assert_eq!(p.values()[[2, 1]], d.values()[[1, 2]]);
    }

    #[test]
    fn tiling_requires_whole_windows() {
        let d = std_normal(0.125);
        let spec = BinningSpec::tiling(&d, &[0.5]).unwrap();
        assert_eq!(spec.axes[0].count, 32);
        assert_eq!(spec.axes[0].lower_edge(), -8.0);
        assert!(BinningSpec::tiling(&d, &[0.3]).is_err());
        let h = spec.halved();
        assert_eq!(h.axes[0].count, 64);
        assert_eq!(h.axes[0].lower_edge(), -8.0);
    }
}
