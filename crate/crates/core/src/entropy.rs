//! Shannon entropy of window tables and differential entropy of grid
//! densities, with their joint, conditional and mutual variants.
//!
//! Everything is evaluated in nats and converted to the requested base at the
//! end. Conditional quantities are always joint minus marginal.

use std::f64::consts::{LN_10, LN_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{contract_all, GridDensity, Histogram};

/// Logarithm base an entropy is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogBase {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
    #[serde(rename = "10")]
    Ten,
}

impl LogBase {
    pub fn ln(self) -> f64 {
        match self {
            LogBase::Two => LN_2,
            LogBase::E => 1.0,
            LogBase::Ten => LN_10,
        }
    }

    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::E => nats,
            other => nats / other.ln(),
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Two => "bits",
            LogBase::E => "nats",
            LogBase::Ten => "dits",
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::Two => "2",
            LogBase::E => "e",
            LogBase::Ten => "10",
        })
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            "10" => Ok(LogBase::Ten),
            _ => Err(Error::InvalidParameter(format!(
                "log base must be 2, e or 10, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub value: f64,
    pub base: LogBase,
}

impl EntropyValue {
    pub fn from_nats(nats: f64, base: LogBase) -> Self {
        Self {
            value: base.from_nats(nats),
            base,
        }
    }

    pub fn to_nats(self) -> f64 {
        match self.base {
            LogBase::E => self.value,
            b => self.value * b.ln(),
        }
    }

    pub fn to_base(self, base: LogBase) -> Self {
        Self::from_nats(self.to_nats(), base)
    }
}

/// `-p ln p` with `0 ln 0 = 0`.
#[inline]
pub(crate) fn neg_xlogx(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

pub(crate) fn shannon_nats(h: &Histogram) -> f64 {
    h.probs().iter().map(|&p| neg_xlogx(p)).sum()
}

pub(crate) fn differential_nats(rho: &GridDensity) -> f64 {
    let integrand = rho.values().mapv(neg_xlogx);
    contract_all(integrand.view(), &rho.weights())
}

/// `H = -Σ P log P`.
pub fn discrete_entropy(h: &Histogram, base: LogBase) -> EntropyValue {
    EntropyValue::from_nats(shannon_nats(h), base)
}

/// `h = -∫ ρ log ρ` by trapezoid quadrature over the grid.
pub fn differential_entropy(rho: &GridDensity, base: LogBase) -> EntropyValue {
    EntropyValue::from_nats(differential_nats(rho), base)
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut all: Vec<usize> = a.iter().chain(b).copied().collect();
    all.sort_unstable();
    all.dedup();
    all
}

fn check_groups(target: &[usize], condition: &[usize], ndim: usize) -> Result<()> {
    for &a in target.iter().chain(condition) {
        if a >= ndim {
            return Err(Error::AxisOutOfRange { axis: a, ndim });
        }
    }
    if target.is_empty() || target.iter().any(|a| condition.contains(a)) {
        return Err(Error::InvalidParameter(format!(
            "target axes {target:?} must be non-empty and disjoint from {condition:?}"
        )));
    }
    Ok(())
}

fn subset_shannon(h: &Histogram, axes: &[usize]) -> Result<f64> {
    if axes.len() == h.ndim() {
        Ok(shannon_nats(h))
    } else {
        Ok(shannon_nats(&h.marginalize_axes(axes)?))
    }
}

fn subset_differential(rho: &GridDensity, axes: &[usize]) -> Result<f64> {
    if axes.len() == rho.ndim() {
        Ok(differential_nats(rho))
    } else {
        Ok(differential_nats(&rho.marginalize_axes(axes)?))
    }
}

/// `H(T | C) = H(T, C) - H(C)` in nats for arbitrary disjoint axis groups.
/// With `condition` empty this is the marginal entropy of `target`.
pub fn conditional_shannon_nats(h: &Histogram, target: &[usize], condition: &[usize]) -> Result<f64> {
    check_groups(target, condition, h.ndim())?;
    let joint = subset_shannon(h, &sorted_union(target, condition))?;
    if condition.is_empty() {
        return Ok(joint);
    }
    Ok(joint - subset_shannon(h, &sorted_union(condition, &[]))?)
}

/// `h(t | c) = h(t, c) - h(c)` in nats for arbitrary disjoint axis groups.
pub fn conditional_differential_nats(
    rho: &GridDensity,
    target: &[usize],
    condition: &[usize],
) -> Result<f64> {
    check_groups(target, condition, rho.ndim())?;
    let joint = subset_differential(rho, &sorted_union(target, condition))?;
    if condition.is_empty() {
        return Ok(joint);
    }
    Ok(joint - subset_differential(rho, &sorted_union(condition, &[]))?)
}

/// `I(A : B) = H(A) + H(B) - H(A, B)` in nats.
pub fn mutual_shannon_nats(h: &Histogram, a: &[usize], b: &[usize]) -> Result<f64> {
    check_groups(a, b, h.ndim())?;
    if b.is_empty() {
        return Err(Error::InvalidParameter("mutual information needs two groups".into()));
    }
    Ok(subset_shannon(h, &sorted_union(a, &[]))? + subset_shannon(h, &sorted_union(b, &[]))?
        - subset_shannon(h, &sorted_union(a, b))?)
}

/// `i(a : b) = h(a) + h(b) - h(a, b)` in nats.
pub fn mutual_differential_nats(rho: &GridDensity, a: &[usize], b: &[usize]) -> Result<f64> {
    check_groups(a, b, rho.ndim())?;
    if b.is_empty() {
        return Err(Error::InvalidParameter("mutual information needs two groups".into()));
    }
    Ok(
        subset_differential(rho, &sorted_union(a, &[]))? + subset_differential(rho, &sorted_union(b, &[]))?
            - subset_differential(rho, &sorted_union(a, b))?,
    )
}

fn other_axes(ndim: usize, condition_axis: usize) -> Result<Vec<usize>> {
    if !(2..=3).contains(&ndim) {
        return Err(Error::InvalidArity {
            expected: "2 or 3",
            got: ndim,
        });
    }
    if condition_axis >= ndim {
        return Err(Error::AxisOutOfRange {
            axis: condition_axis,
            ndim,
        });
    }
    Ok((0..ndim).filter(|&a| a != condition_axis).collect())
}

/// Entropy of the remaining axes given `condition_axis`.
pub fn conditional_entropy_discrete(
    joint: &Histogram,
    condition_axis: usize,
    base: LogBase,
) -> Result<EntropyValue> {
    let target = other_axes(joint.ndim(), condition_axis)?;
    let nats = conditional_shannon_nats(joint, &target, &[condition_axis])?;
    Ok(EntropyValue::from_nats(nats, base))
}

pub fn conditional_entropy_differential(
    joint: &GridDensity,
    condition_axis: usize,
    base: LogBase,
) -> Result<EntropyValue> {
    let target = other_axes(joint.ndim(), condition_axis)?;
    let nats = conditional_differential_nats(joint, &target, &[condition_axis])?;
    Ok(EntropyValue::from_nats(nats, base))
}

fn mi_groups(ndim: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    match ndim {
        2 => Ok((vec![0], vec![1])),
        3 => Ok((vec![0], vec![1, 2])),
        got => Err(Error::InvalidArity {
            expected: "2 or 3",
            got,
        }),
    }
}

/// `H(X:Y)` for two axes, or `H(X:Y,Z)` with the last two axes grouped.
pub fn mutual_information_discrete(joint: &Histogram, base: LogBase) -> Result<EntropyValue> {
    let (a, b) = mi_groups(joint.ndim())?;
    Ok(EntropyValue::from_nats(mutual_shannon_nats(joint, &a, &b)?, base))
}

/// `h(x:y)` for two axes, or `h(x:y,z)` with the last two axes grouped.
pub fn mutual_information_differential(joint: &GridDensity, base: LogBase) -> Result<EntropyValue> {
    let (a, b) = mi_groups(joint.ndim())?;
    Ok(EntropyValue::from_nats(mutual_differential_nats(joint, &a, &b)?, base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, BinAxis};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{E, PI};

    fn hist(dims: &[(f64, usize)], probs: Vec<f64>) -> Histogram {
        Histogram::new(
            dims.iter()
                .map(|&(w, n)| BinAxis::new(w, n, 0.0).unwrap())
                .collect(),
            probs,
        )
        .unwrap()
    }

    fn uniform(width: f64, intervals: usize) -> GridDensity {
        let axis = Axis::new(0.0, width / intervals as f64, intervals + 1).unwrap();
        GridDensity::from_fn(vec![axis], |_| 1.0 / width).unwrap()
    }

    fn gaussian_2d(var_x: f64, var_y: f64, cov: f64) -> GridDensity {
        let axis = Axis::symmetric(10.0, 0.05).unwrap();
        let det = var_x * var_y - cov * cov;
        GridDensity::from_fn(vec![axis, axis], |p| {
            let q = (var_y * p[0] * p[0] - 2.0 * cov * p[0] * p[1] + var_x * p[1] * p[1]) / det;
            (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
        })
        .unwrap()
    }

    #[test]
    fn shannon_examples() {
        let h = hist(&[(1.0, 4)], vec![0.25; 4]);
        assert_eq!(discrete_entropy(&h, LogBase::Two).value, 2.0);
        let h = hist(&[(1.0, 1)], vec![1.0]);
        assert_eq!(discrete_entropy(&h, LogBase::E).value, 0.0);
        assert_eq!(discrete_entropy(&h, LogBase::Ten).value, 0.0);
        // -(0.5 log2 0.5 + 2 * 0.25 log2 0.25) = 0.5 + 1.0
        let h = hist(&[(1.0, 3)], vec![0.5, 0.25, 0.25]);
        assert_abs_diff_eq!(discrete_entropy(&h, LogBase::Two).value, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_cells_contribute_nothing() {
        let h = hist(&[(1.0, 4)], vec![0.5, 0.0, 0.5, 0.0]);
        assert_eq!(discrete_entropy(&h, LogBase::Two).value, 1.0);
    }

    #[test]
    fn uniform_differential_is_log_width() {
        assert_abs_diff_eq!(
            differential_entropy(&uniform(0.5, 64), LogBase::Two).value,
            -1.0,
            epsilon = 1e-14
        );
        assert_eq!(differential_entropy(&uniform(1.0, 16), LogBase::E).value, 0.0);
    }

    #[test]
    fn gaussian_differential_matches_closed_form() {
        let axis = Axis::symmetric(10.0, 0.01).unwrap();
        let g = GridDensity::from_fn(vec![axis], |x| {
            (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()
        })
        .unwrap();
        let h = differential_entropy(&g, LogBase::E).value;
        assert_abs_diff_eq!(h, 0.5 * (2.0 * PI * E).ln(), epsilon = 1e-6);
    }

    #[test]
    fn base_conversion() {
        let g = gaussian_2d(1.0, 2.0, 0.5);
        let e = differential_entropy(&g, LogBase::E);
        let b2 = differential_entropy(&g, LogBase::Two);
        assert_abs_diff_eq!(b2.value, e.value / LN_2, epsilon = 1e-12 * e.value.abs());
        assert_abs_diff_eq!(b2.to_base(LogBase::E).value, e.value, epsilon = 1e-14);
        assert_eq!("e".parse::<LogBase>().unwrap(), LogBase::E);
        assert!("3".parse::<LogBase>().is_err());
    }

    #[test]
    fn discrete_conditional_examples() {
        let indep = hist(&[(1.0, 4), (1.0, 4)], vec![1.0 / 16.0; 16]);
        assert_abs_diff_eq!(
            conditional_entropy_discrete(&indep, 0, LogBase::Two).unwrap().value,
            2.0,
            epsilon = 1e-14
        );
        let mut diag = vec![0.0; 16];
        for i in 0..4 {
            diag[i * 5] = 0.25;
        }
        let diag = hist(&[(1.0, 4), (1.0, 4)], diag);
        assert_eq!(conditional_entropy_discrete(&diag, 0, LogBase::Two).unwrap().value, 0.0);
        assert_abs_diff_eq!(
            mutual_information_discrete(&diag, LogBase::Two).unwrap().value,
            2.0,
            epsilon = 1e-14
        );

        // Each row is (0.8, 0.2) given X: binary entropy H(0.2).
        let h = hist(&[(1.0, 2), (1.0, 2)], vec![0.4, 0.1, 0.1, 0.4]);
        let hb = -(0.2f64 * 0.2f64.log2() + 0.8 * 0.8f64.log2());
        assert_abs_diff_eq!(
            conditional_entropy_discrete(&h, 0, LogBase::Two).unwrap().value,
            hb,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(hb, 0.7219, epsilon = 1e-4);
    }

    #[test]
    fn conditional_needs_two_or_three_axes() {
        let h = hist(&[(1.0, 4)], vec![0.25; 4]);
        assert!(matches!(
            conditional_entropy_discrete(&h, 0, LogBase::Two),
            Err(Error::InvalidArity { got: 1, .. })
        ));
        assert!(matches!(
            conditional_entropy_differential(&uniform(1.0, 4), 0, LogBase::Two),
            Err(Error::InvalidArity { got: 1, .. })
        ));
        assert!(mutual_information_discrete(&h, LogBase::Two).is_err());
    }

    #[test]
    fn differential_conditional_of_product_is_marginal() {
        let g = gaussian_2d(1.0, 0.5, 0.0);
        let hc = conditional_entropy_differential(&g, 0, LogBase::E).unwrap().value;
        let hy = differential_nats(&g.marginalize(1).unwrap());
        assert_abs_diff_eq!(hc, hy, epsilon = 1e-9);
        assert_abs_diff_eq!(
            mutual_information_differential(&g, LogBase::E).unwrap().value,
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn gaussian_conditional_matches_schur_complement() {
        let (vx, vy, c) = (1.0, 2.0, 0.9);
        let g = gaussian_2d(vx, vy, c);
        let cond_var = vy - c * c / vx;
        let hc = conditional_entropy_differential(&g, 0, LogBase::E).unwrap().value;
        assert_abs_diff_eq!(hc, 0.5 * (2.0 * PI * E * cond_var).ln(), epsilon = 1e-6);
        let r2 = c * c / (vx * vy);
        let mi = mutual_information_differential(&g, LogBase::E).unwrap().value;
        assert_abs_diff_eq!(mi, -0.5 * (1.0 - r2).ln(), epsilon = 1e-6);
        let swapped = g.permute_axes(&[1, 0]).unwrap();
        assert_abs_diff_eq!(
            mutual_information_differential(&swapped, LogBase::E).unwrap().value,
            mi,
            epsilon = 1e-12
        );
    }

    #[test]
    fn group_validation() {
        let h = hist(&[(1.0, 2), (1.0, 2)], vec![0.25; 4]);
        assert!(conditional_shannon_nats(&h, &[0], &[0]).is_err());
        assert!(conditional_shannon_nats(&h, &[], &[0]).is_err());
        assert!(conditional_shannon_nats(&h, &[2], &[0]).is_err());
        assert_abs_diff_eq!(conditional_shannon_nats(&h, &[1], &[]).unwrap(), LN_2, epsilon = 1e-15);
    }
}
