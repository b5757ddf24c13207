//! The window decomposition `h(x) = Σ_l P(X_l) h_l(x) + H(X)` and the signed
//! gaps of the bounds it implies between differential entropies and the
//! Shannon entropies of their binned versions.
//!
//! All quantities here are evaluated on the region covered by the windows,
//! so windows always tile the grid they are applied to.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::discretize::{
    bin_density, conditional_in_window, covered_region, window_layouts, window_subgrid,
    EMPTY_WINDOW_PROBABILITY,
};
use crate::entropy::{differential_nats, neg_xlogx, EntropyValue, LogBase};
use crate::error::{Error, Result};
use crate::grid::{BinningSpec, GridDensity, Histogram};

/// Contribution of one window to the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTerm {
    pub index: Vec<usize>,
    pub prob: f64,
    /// Differential entropy of the in-window conditional density.
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionTerms {
    /// `Σ_l P(X_l) h_l`.
    pub weighted_window_entropy: f64,
    /// `H(X)` over the windows above the empty-window threshold.
    pub discrete_entropy: f64,
    /// `-∫ ρ log ρ` over windows below the threshold, which the two sums skip.
    pub empty_window_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionReport {
    pub base: LogBase,
    /// Differential entropy over the windowed region.
    pub lhs: EntropyValue,
    pub rhs_terms: ConnectionTerms,
    /// `lhs - (weighted_window_entropy + discrete_entropy + empty_window_entropy)`.
    pub residual: f64,
    pub widths: Vec<f64>,
    pub empty_windows: usize,
    /// Mass of the grid lying outside the windows.
    pub uncovered_mass: f64,
    pub per_window: Vec<WindowTerm>,
}

fn window_indices(shape: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = shape.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; shape.len()];
        for a in (0..shape.len()).rev() {
            idx[a] = flat % shape[a];
            flat /= shape[a];
        }
        idx
    })
}

/// Evaluates both sides of the window decomposition. Each `h_l` comes from the
/// materialized conditional density `ρ / P(X_l)` of its window.
pub fn verify_connection(
    rho: &GridDensity,
    spec: &BinningSpec,
    base: LogBase,
) -> Result<ConnectionReport> {
    let region = covered_region(rho, spec)?;
    let layouts = window_layouts(&region, spec)?;
    let shape: Vec<usize> = layouts.iter().map(|l| l.count).collect();
    let lhs = differential_nats(&region);

    let mut weighted = 0.0;
    let mut discrete = 0.0;
    let mut empty = 0.0;
    let mut empty_windows = 0;
    let mut per_window = Vec::new();
    for index in window_indices(&shape) {
        let (sub, prob) = window_subgrid(&region, &layouts, &index)?;
        if prob < EMPTY_WINDOW_PROBABILITY {
            empty += differential_nats(&sub);
            empty_windows += 1;
            continue;
        }
        let cond = conditional_in_window(&region, &layouts, &index)?;
        let h = differential_nats(&cond);
        weighted += prob * h;
        discrete += neg_xlogx(prob);
        per_window.push(WindowTerm {
            index,
            prob,
            entropy: base.from_nats(h),
        });
    }

    let lhs = EntropyValue::from_nats(lhs, base);
    let rhs_terms = ConnectionTerms {
        weighted_window_entropy: base.from_nats(weighted),
        discrete_entropy: base.from_nats(discrete),
        empty_window_entropy: base.from_nats(empty),
    };
    let residual = lhs.value
        - (rhs_terms.weighted_window_entropy + rhs_terms.discrete_entropy + rhs_terms.empty_window_entropy);
    Ok(ConnectionReport {
        base,
        lhs,
        rhs_terms,
        residual,
        widths: spec.widths(),
        empty_windows,
        uncovered_mass: rho.total_mass() - region.total_mass(),
        per_window,
    })
}

/// Per-window concavity gaps `h_l(x) - Σ_m P(Y_m|X_l) h_lm(x)` for a two-axis
/// joint, where `h_lm(x)` is the entropy of the x-marginal of the joint
/// window conditional. Windows `l` below the empty threshold are skipped.
pub fn jensen_gaps(joint: &GridDensity, spec: &BinningSpec, base: LogBase) -> Result<Vec<(usize, f64)>> {
    if joint.ndim() != 2 {
        return Err(Error::InvalidArity {
            expected: "2",
            got: joint.ndim(),
        });
    }
    let region = covered_region(joint, spec)?;
    let layouts = window_layouts(&region, spec)?;
    let marginal = region.marginalize(0)?;
    let x_layout = [layouts[0]];
    let mut out = Vec::new();
    // Each term is carried as `P h = -∫ m log m - (-P log P)` with `m` the
    // unnormalized in-window marginal, so windows too light to normalize
    // still contribute their exact share.
    for l in 0..layouts[0].count {
        let (sub_l, p_l) = window_subgrid(&marginal, &x_layout, &[l])?;
        if p_l < EMPTY_WINDOW_PROBABILITY {
            continue;
        }
        let weighted_l = differential_nats(&sub_l) - neg_xlogx(p_l);
        let mut averaged = 0.0;
        for m in 0..layouts[1].count {
            let (sub, p_lm) = window_subgrid(&region, &layouts, &[l, m])?;
            averaged += differential_nats(&sub.marginalize(0)?) - neg_xlogx(p_lm);
        }
        out.push((l, base.from_nats((weighted_l - averaged) / p_l)));
    }
    Ok(out)
}

/// The bounds relating differential entropies to binned Shannon entropies.
/// Axis 0 plays `x`, axis 1 `y` and axis 2 `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    /// `h(x) ≤ H(X) + log Δx`
    MarginalX,
    /// `h(x,y) ≤ H(X,Y) + log ΔxΔy`
    JointXy,
    /// `h(x|y) ≤ H(X|Y) + log Δx`
    ConditionalXGivenY,
    /// `h(x:y) ≥ H(X:Y)`
    MutualXy,
    /// `h(x,y,z) ≤ H(X,Y,Z) + log ΔxΔyΔz`
    JointXyz,
    /// `h(x,y|z) ≤ H(X,Y|Z) + log ΔxΔy`
    ConditionalXyGivenZ,
    /// `h(x|y,z) ≤ H(X|Y,Z) + log Δx`
    ConditionalXGivenYz,
    /// `h(x:y,z) ≥ H(X:Y,Z)`
    MutualXWithYz,
    /// `h(x⃗|y⃗) ≤ H(X⃗|Y⃗) + log ∏Δx_i` for an arbitrary axis partition.
    Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// continuous ≤ discrete + log-width
    Upper,
    /// continuous ≥ discrete
    Mutual,
}

impl InequalityId {
    pub const TABLE: [InequalityId; 8] = [
        InequalityId::MarginalX,
        InequalityId::JointXy,
        InequalityId::ConditionalXGivenY,
        InequalityId::MutualXy,
        InequalityId::JointXyz,
        InequalityId::ConditionalXyGivenZ,
        InequalityId::ConditionalXGivenYz,
        InequalityId::MutualXWithYz,
    ];

    pub fn label(self) -> &'static str {
        match self {
            InequalityId::MarginalX => "h(x) <= H(X) + log dx",
            InequalityId::JointXy => "h(x,y) <= H(X,Y) + log dx dy",
            InequalityId::ConditionalXGivenY => "h(x|y) <= H(X|Y) + log dx",
            InequalityId::MutualXy => "h(x:y) >= H(X:Y)",
            InequalityId::JointXyz => "h(x,y,z) <= H(X,Y,Z) + log dx dy dz",
            InequalityId::ConditionalXyGivenZ => "h(x,y|z) <= H(X,Y|Z) + log dx dy",
            InequalityId::ConditionalXGivenYz => "h(x|y,z) <= H(X|Y,Z) + log dx",
            InequalityId::MutualXWithYz => "h(x:y,z) >= H(X:Y,Z)",
            InequalityId::Vector => "h(T|C) <= H(T|C) + log prod dT",
        }
    }

    /// Axis groups and relation of a table row. For `Vector` this is the
    /// default split used by [`gap_suite`]: targets are every axis but the
    /// first, conditioned on axis 0.
    fn groups(self, ndim: usize) -> (Vec<usize>, Vec<usize>, Relation) {
        use InequalityId::*;
        match self {
            MarginalX => (vec![0], vec![], Relation::Upper),
            JointXy => (vec![0, 1], vec![], Relation::Upper),
            ConditionalXGivenY => (vec![0], vec![1], Relation::Upper),
            MutualXy => (vec![0], vec![1], Relation::Mutual),
            JointXyz => (vec![0, 1, 2], vec![], Relation::Upper),
            ConditionalXyGivenZ => (vec![0, 1], vec![2], Relation::Upper),
            ConditionalXGivenYz => (vec![0], vec![1, 2], Relation::Upper),
            MutualXWithYz => (vec![0], vec![1, 2], Relation::Mutual),
            Vector => ((1..ndim).collect(), vec![0], Relation::Upper),
        }
    }

    fn required_axes(self) -> usize {
        use InequalityId::*;
        match self {
            MarginalX => 1,
            JointXy | ConditionalXGivenY | MutualXy | Vector => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub id: InequalityId,
    pub relation: Relation,
    pub target_axes: Vec<usize>,
    pub condition_axes: Vec<usize>,
    pub continuous: EntropyValue,
    pub discrete: EntropyValue,
    /// `log ∏ Δ` over the target axes; zero for mutual-information rows.
    pub log_width: f64,
    /// Non-negative when the bound holds.
    pub gap: f64,
    /// Window width of every axis of the joint.
    pub widths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GapRow {
    Evaluated(GapReport),
    NotApplicable { id: InequalityId, reason: String },
}

impl GapRow {
    pub fn id(&self) -> InequalityId {
        match self {
            GapRow::Evaluated(r) => r.id,
            GapRow::NotApplicable { id, .. } => *id,
        }
    }

    pub fn report(&self) -> Option<&GapReport> {
        match self {
            GapRow::Evaluated(r) => Some(r),
            GapRow::NotApplicable { .. } => None,
        }
    }
}

/// Memoized marginal entropies of one joint and its histogram, in nats.
struct EntropyCache<'a> {
    density: &'a GridDensity,
    hist: Histogram,
    continuous: HashMap<Vec<usize>, f64>,
    discrete: HashMap<Vec<usize>, f64>,
}

impl<'a> EntropyCache<'a> {
    fn new(region: &'a GridDensity, spec: &BinningSpec) -> Result<Self> {
        Ok(Self {
            density: region,
            hist: bin_density(region, spec)?,
            continuous: HashMap::new(),
            discrete: HashMap::new(),
        })
    }

    fn key(a: &[usize], b: &[usize]) -> Vec<usize> {
        let mut k: Vec<usize> = a.iter().chain(b).copied().collect();
        k.sort_unstable();
        k
    }

    fn h(&mut self, a: &[usize], b: &[usize]) -> Result<f64> {
        let key = Self::key(a, b);
        if key.is_empty() {
            return Ok(0.0);
        }
        if let Some(&v) = self.continuous.get(&key) {
            return Ok(v);
        }
        let v = if key.len() == self.density.ndim() {
            differential_nats(self.density)
        } else {
            differential_nats(&self.density.marginalize_axes(&key)?)
        };
        self.continuous.insert(key, v);
        Ok(v)
    }

    fn big_h(&mut self, a: &[usize], b: &[usize]) -> Result<f64> {
        let key = Self::key(a, b);
        if key.is_empty() {
            return Ok(0.0);
        }
        if let Some(&v) = self.discrete.get(&key) {
            return Ok(v);
        }
        let v = if key.len() == self.hist.ndim() {
            crate::entropy::shannon_nats(&self.hist)
        } else {
            crate::entropy::shannon_nats(&self.hist.marginalize_axes(&key)?)
        };
        self.discrete.insert(key, v);
        Ok(v)
    }

    fn evaluate(
        &mut self,
        id: InequalityId,
        target: Vec<usize>,
        condition: Vec<usize>,
        relation: Relation,
        base: LogBase,
    ) -> Result<GapReport> {
        let widths = self.hist.widths();
        let (cont, disc, log_width) = match relation {
            Relation::Upper => (
                self.h(&target, &condition)? - self.h(&condition, &[])?,
                self.big_h(&target, &condition)? - self.big_h(&condition, &[])?,
                target.iter().map(|&a| widths[a].ln()).sum::<f64>(),
            ),
            Relation::Mutual => (
                self.h(&target, &[])? + self.h(&condition, &[])? - self.h(&target, &condition)?,
                self.big_h(&target, &[])? + self.big_h(&condition, &[])?
                    - self.big_h(&target, &condition)?,
                0.0,
            ),
        };
        let continuous = EntropyValue::from_nats(cont, base);
        let discrete = EntropyValue::from_nats(disc, base);
        let log_width = base.from_nats(log_width);
        let gap = match relation {
            Relation::Upper => (discrete.value + log_width) - continuous.value,
            Relation::Mutual => continuous.value - discrete.value,
        };
        Ok(GapReport {
            id,
            relation,
            target_axes: target,
            condition_axes: condition,
            continuous,
            discrete,
            log_width,
            gap,
            widths,
        })
    }
}

fn row(cache: &mut EntropyCache<'_>, id: InequalityId, ndim: usize, base: LogBase) -> Result<GapRow> {
    if ndim < id.required_axes() {
        return Ok(GapRow::NotApplicable {
            id,
            reason: format!("needs {} axes, joint has {ndim}", id.required_axes()),
        });
    }
    let (target, condition, relation) = id.groups(ndim);
    Ok(GapRow::Evaluated(cache.evaluate(id, target, condition, relation, base)?))
}

/// Evaluates the eight table rows plus the vector row (`h(y,..|x)` with
/// axis 0 as the condition). Rows needing more axes than the joint has are
/// reported as not applicable; rows needing fewer use its leading marginals.
pub fn gap_suite(joint: &GridDensity, spec: &BinningSpec, base: LogBase) -> Result<Vec<GapRow>> {
    let region = covered_region(joint, spec)?;
    let mut cache = EntropyCache::new(&region, spec)?;
    let ndim = joint.ndim();
    InequalityId::TABLE
        .iter()
        .chain(std::iter::once(&InequalityId::Vector))
        .map(|&id| row(&mut cache, id, ndim, base))
        .collect()
}

/// `h(T|C) ≤ H(T|C) + log ∏_{t∈T} Δ_t` for a caller-chosen axis partition.
pub fn vector_gap(
    joint: &GridDensity,
    condition_axes: &[usize],
    target_axes: &[usize],
    spec: &BinningSpec,
    base: LogBase,
) -> Result<GapReport> {
    let ndim = joint.ndim();
    let mut all: Vec<usize> = condition_axes.iter().chain(target_axes).copied().collect();
    all.sort_unstable();
    if target_axes.is_empty() || all != (0..ndim).collect::<Vec<_>>() {
        return Err(Error::NotPartition {
            target: target_axes.to_vec(),
            condition: condition_axes.to_vec(),
            ndim,
        });
    }
    let region = covered_region(joint, spec)?;
    let mut cache = EntropyCache::new(&region, spec)?;
    cache.evaluate(
        InequalityId::Vector,
        target_axes.to_vec(),
        condition_axes.to_vec(),
        Relation::Upper,
        base,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub widths: Vec<f64>,
    pub gap: f64,
}

/// Gap of one row for `spec`, then for every window halved, `halvings` times.
pub fn refine_convergence(
    joint: &GridDensity,
    spec: &BinningSpec,
    halvings: usize,
    id: InequalityId,
    base: LogBase,
) -> Result<Vec<RefinementStep>> {
    if halvings == 0 {
        return Err(Error::InvalidParameter("halvings must be at least 1".into()));
    }
    let mut specs = vec![spec.clone()];
    for _ in 0..halvings {
        let next = specs.last().expect("non-empty").halved();
        specs.push(next);
    }
    window_layouts(joint, specs.last().expect("non-empty"))?;
    let mut out = Vec::with_capacity(specs.len());
    for s in &specs {
        let region = covered_region(joint, s)?;
        let mut cache = EntropyCache::new(&region, s)?;
        match row(&mut cache, id, joint.ndim(), base)? {
            GapRow::Evaluated(r) => out.push(RefinementStep {
                widths: s.widths(),
                gap: r.gap,
            }),
            GapRow::NotApplicable { reason, .. } => return Err(Error::InvalidParameter(reason)),
        }
    }
    Ok(out)
}

/// Conditional mutual informations of a three-axis joint. No relation between
/// the two is claimed; the report only records their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub label: String,
    /// `h(x:y|z)`.
    pub continuous: EntropyValue,
    /// `H(X:Y|Z)`.
    pub discrete: EntropyValue,
    /// `continuous - discrete`.
    pub difference: f64,
    pub widths: Vec<f64>,
}

pub fn conditional_mi_probe(joint3: &GridDensity, spec: &BinningSpec, base: LogBase) -> Result<ProbeReport> {
    if joint3.ndim() != 3 {
        return Err(Error::InvalidArity {
            expected: "3",
            got: joint3.ndim(),
        });
    }
    let region = covered_region(joint3, spec)?;
    let mut c = EntropyCache::new(&region, spec)?;
    let cont = c.h(&[0, 2], &[])? + c.h(&[1, 2], &[])? - c.h(&[0, 1, 2], &[])? - c.h(&[2], &[])?;
    let disc = c.big_h(&[0, 2], &[])? + c.big_h(&[1, 2], &[])?
        - c.big_h(&[0, 1, 2], &[])?
        - c.big_h(&[2], &[])?;
    let continuous = EntropyValue::from_nats(cont, base);
    let discrete = EntropyValue::from_nats(disc, base);
    Ok(ProbeReport {
        label: "exploratory".into(),
        continuous,
        discrete,
        difference: continuous.value - discrete.value,
        widths: spec.widths(),
    })
}
