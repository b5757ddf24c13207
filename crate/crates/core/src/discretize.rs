//! Windowing of continuous densities into probability tables, and the
//! in-window conditional densities.
//!
//! Window edges must land on grid nodes. A node on an edge shared by two
//! windows takes part in both window quadratures with half weight each, so
//! the window integrals add up to the trapezoid integral of the covered
//! region exactly.

use ndarray::{ArrayD, Axis as NdAxis, IxDyn, Zip};

use crate::error::{Error, Result};
use crate::grid::{trapezoid_weights, whole_multiple, BinningSpec, GridDensity, Histogram};

/// Windows whose probability falls below this are treated as empty.
pub const EMPTY_WINDOW_PROBABILITY: f64 = 1e-15;

/// Placement of one axis' windows on the grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowLayout {
    /// Node index of the lower edge of the first window.
    pub start: usize,
    /// Grid intervals per window.
    pub intervals: usize,
    pub count: usize,
}

impl WindowLayout {
    /// Inclusive node range of window `w`, edges included.
    pub fn node_range(&self, w: usize) -> (usize, usize) {
        let lo = self.start + w * self.intervals;
        (lo, lo + self.intervals)
    }

    pub fn covered_range(&self) -> (usize, usize) {
        (self.start, self.start + self.count * self.intervals)
    }

    /// Window holding node `j` under the half-open rule `[lo, hi)`; the final
    /// upper edge is assigned to the last window.
    pub fn window_of_node(&self, j: usize) -> Option<usize> {
        let (lo, hi) = self.covered_range();
        if j < lo || j > hi {
            return None;
        }
        Some(((j - lo) / self.intervals).min(self.count - 1))
    }
}

/// Resolves `spec` against the grid of `density`, checking commensurability
/// and that every window lies on the grid.
pub fn window_layouts(density: &GridDensity, spec: &BinningSpec) -> Result<Vec<WindowLayout>> {
    if spec.ndim() != density.ndim() {
        return Err(Error::InvalidArity {
            expected: "one binning axis per grid axis",
            got: spec.ndim(),
        });
    }
    let mut out = Vec::with_capacity(spec.ndim());
    for (a, (axis, bins)) in density.axes().iter().zip(&spec.axes).enumerate() {
        let intervals = whole_multiple(bins.width, axis.step)
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::Incommensurate {
                axis: a,
                detail: format!(
                    "window width {} is not a whole multiple of grid step {}",
                    bins.width, axis.step
                ),
            })?;
        let offset = (bins.lower_edge() - axis.origin) / axis.step;
        if offset < -1e-9 {
            return Err(Error::OutOfDomain(format!(
                "axis {a}: windows start at {} below the grid origin {}",
                bins.lower_edge(),
                axis.origin
            )));
        }
        let start = whole_multiple(bins.lower_edge() - axis.origin, axis.step)
            .or_else(|| (offset.abs() < 1e-9).then_some(0))
            .ok_or_else(|| Error::Incommensurate {
                axis: a,
                detail: format!("window edge {} does not fall on a grid node", bins.lower_edge()),
            })?;
        if start + bins.count * intervals > axis.count - 1 {
            return Err(Error::OutOfDomain(format!(
                "axis {a}: windows end at {} beyond the grid end {}",
                bins.upper_edge(),
                axis.end()
            )));
        }
        out.push(WindowLayout {
            start,
            intervals,
            count: bins.count,
        });
    }
    Ok(out)
}

/// Contracts `axis` of `arr` into per-window trapezoid sums.
fn window_sums(arr: &ArrayD<f64>, axis: usize, layout: &WindowLayout, step: f64) -> ArrayD<f64> {
    let mut shape = arr.shape().to_vec();
    shape[axis] = layout.count;
    let mut out = ArrayD::zeros(IxDyn(&shape));
    let w = trapezoid_weights(layout.intervals + 1, step);
    Zip::from(out.lanes_mut(NdAxis(axis)))
        .and(arr.lanes(NdAxis(axis)))
        .for_each(|mut o, lane| {
            for (win, slot) in o.iter_mut().enumerate() {
                let s = layout.start + win * layout.intervals;
                *slot = (0..=layout.intervals).map(|j| w[j] * lane[s + j]).sum();
            }
        });
    out
}

/// Window probabilities `P(X_l) = ∫_window ρ`, jointly over every axis.
pub fn bin_density(density: &GridDensity, spec: &BinningSpec) -> Result<Histogram> {
    let layouts = window_layouts(density, spec)?;
    let mut cur = density.values().clone();
    for (a, layout) in layouts.iter().enumerate() {
        cur = window_sums(&cur, a, layout, density.axes()[a].step);
    }
    Histogram::from_array(spec.axes.clone(), cur)
}

/// The density restricted to the nodes covered by the windows, unrescaled.
pub fn covered_region(density: &GridDensity, spec: &BinningSpec) -> Result<GridDensity> {
    let ranges: Vec<_> = window_layouts(density, spec)?
        .iter()
        .map(WindowLayout::covered_range)
        .collect();
    density.crop(&ranges)
}

/// `ρ_l = ρ / P(X_l)` on the sub-grid of window `window` (one index per axis).
/// The result lives on the window's own nodes, edges included; it is zero
/// everywhere else by construction.
pub fn window_conditional(
    density: &GridDensity,
    window: &[usize],
    spec: &BinningSpec,
) -> Result<GridDensity> {
    let layouts = window_layouts(density, spec)?;
    conditional_in_window(density, &layouts, window)
}

pub(crate) fn conditional_in_window(
    density: &GridDensity,
    layouts: &[WindowLayout],
    window: &[usize],
) -> Result<GridDensity> {
    let (sub, prob) = window_subgrid(density, layouts, window)?;
    if !(prob >= EMPTY_WINDOW_PROBABILITY) {
        return Err(Error::ZeroProbabilityWindow {
            window: window.to_vec(),
            prob,
        });
    }
    GridDensity::from_array(sub.axes().to_vec(), sub.values() / prob)
}

/// The density on the nodes of one window, and its trapezoid mass `P`.
pub(crate) fn window_subgrid(
    density: &GridDensity,
    layouts: &[WindowLayout],
    window: &[usize],
) -> Result<(GridDensity, f64)> {
    if window.len() != layouts.len() {
        return Err(Error::InvalidArity {
            expected: "one window index per axis",
            got: window.len(),
        });
    }
    let mut ranges = Vec::with_capacity(window.len());
    for (a, (layout, &w)) in layouts.iter().zip(window).enumerate() {
        if w >= layout.count {
            return Err(Error::OutOfDomain(format!(
                "axis {a}: window {w} of {}",
                layout.count
            )));
        }
        ranges.push(layout.node_range(w));
    }
    let sub = density.crop(&ranges)?;
    let prob = sub.total_mass();
    Ok((sub, prob))
}
