use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use entrosteer::connection::{ConnectionReport, GapRow, InequalityId, ProbeReport, RefinementStep};
use entrosteer::corpus::{self, mixture_density, seeded_gaussian, seeded_mixture};
use entrosteer::gaussian::{AnalyticEntropies, GridOptions, ModelGrids};
use entrosteer::grid::NORM_TOLERANCE;
use entrosteer::steering::{discrete_steering_test_as, BinScan, Conditioning};
use entrosteer::{
    analytic_entropies, bin_density, conditional_mi_probe, differential_entropy, discrete_entropy,
    gap_suite, momentum_joint, position_joint, refine_convergence, steering_bin_scan,
    Axis, BiphotonParams, BinningSpec, GridDensity, Histogram, LogBase,
    SteeringReport,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{self, LoadedHistogram, Sidecar, ValueKind};
use crate::{Common, ModelSpec, Quadrature};

/// Slack allowed on identities and bounds before a run is reported as a breach.
pub const TOLERANCE: f64 = 1e-9;

pub struct Outcome {
    pub text: String,
    pub code: u8,
    pub breach: Option<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self {
            text,
            code: 0,
            breach: None,
        }
    }
}

fn emit<T: Serialize>(common: &Common, report: &T, table: impl FnOnce() -> String) -> String {
    if common.json {
        io::to_json(report)
    } else {
        table()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceRecord {
    File {
        path: String,
    },
    Model {
        sigma_plus: f64,
        sigma_minus: f64,
        dims: usize,
        quadrature: String,
        grid: Axis,
    },
    RandomGaussian {
        seed: u64,
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        grid: Axis,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_total: f64,
    pub renormalized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_counts: Option<f64>,
    pub clamped_values: usize,
}

fn prepare_density(rho: GridDensity, normalize: bool) -> CliResult<(GridDensity, Normalization, Vec<String>)> {
    let diag = rho.validate();
    let mut notes = diag.notes.clone();
    let renormalized = !diag.is_normalized();
    if renormalized && !normalize {
        return Err(CliError::Validation(format!(
            "density integrates to {} (tolerance {NORM_TOLERANCE:e}); pass --normalize to rescale it",
            diag.total_mass
        )));
    }
    let rho = if renormalized {
        notes.push(format!("rescaled from total mass {}", diag.total_mass));
        rho.normalized()?
    } else {
        rho
    };
    let norm = Normalization {
        input_total: diag.total_mass,
        renormalized,
        total_counts: None,
        clamped_values: diag.clamped_values,
    };
    Ok((rho, norm, notes))
}

fn prepare_histogram(loaded: &LoadedHistogram, normalize: bool) -> CliResult<(Histogram, Normalization, Vec<String>)> {
    let diag = loaded.hist.validate();
    let mut notes = Vec::new();
    if diag.clamped_values > 0 {
        notes.push(format!("{} negative jitter value(s) clamped to zero", diag.clamped_values));
    }
    let counts = loaded.kind == ValueKind::Count;
    let renormalized = counts || !diag.is_normalized();
    if renormalized && !counts && !normalize {
        return Err(CliError::Validation(format!(
            "probabilities sum to {} (tolerance {NORM_TOLERANCE:e}); pass --normalize to rescale them",
            diag.total_mass
        )));
    }
    let hist = if renormalized {
        if !counts {
            notes.push(format!("rescaled from total {}", diag.total_mass));
        }
        loaded.hist.normalized()?
    } else {
        loaded.hist.clone()
    };
    let norm = Normalization {
        input_total: loaded.raw_total,
        renormalized,
        total_counts: counts.then_some(loaded.raw_total),
        clamped_values: diag.clamped_values,
    };
    Ok((hist, norm, notes))
}

fn resolve_base(common: &Common, sidecar: Option<&Sidecar>) -> LogBase {
    common
        .base
        .or_else(|| sidecar.and_then(|s| s.base))
        .unwrap_or(LogBase::Two)
}

fn party_names(prefix: &str, dims: usize) -> Vec<String> {
    ["a", "b"]
        .iter()
        .flat_map(|p| {
            (1..=dims).map(move |i| {
                if dims == 1 {
                    format!("{prefix}_{p}")
                } else {
                    format!("{prefix}_{p}{i}")
                }
            })
        })
        .collect()
}

fn model_params(spec: &ModelSpec) -> CliResult<BiphotonParams> {
    Ok(BiphotonParams::new(spec.sigma_plus, spec.sigma_minus, spec.dims)?)
}

fn options(samples_per_sigma: f64) -> CliResult<GridOptions> {
    if !(samples_per_sigma.is_finite() && samples_per_sigma > 0.0) {
        return Err(CliError::Usage("--samples-per-sigma must be positive".into()));
    }
    Ok(GridOptions {
        samples_per_sigma,
        ..GridOptions::default()
    })
}

fn check_node_budget(axis: &Axis, ndim: usize, opts: &GridOptions) -> CliResult<()> {
    let nodes = (axis.count as f64).powi(ndim as i32);
    if nodes > opts.max_nodes as f64 {
        return Err(CliError::Validation(format!(
            "a {ndim}-axis grid of {} nodes per axis exceeds {} nodes; use coarser widths or --samples-per-sigma",
            axis.count, opts.max_nodes
        )));
    }
    Ok(())
}

/// A model joint on grids commensurate with `dxs` and `dks`.
fn model_joints(
    params: &BiphotonParams,
    dxs: &[f64],
    dks: &[f64],
    opts: &GridOptions,
    which: &[Quadrature],
) -> CliResult<(ModelGrids, Vec<GridDensity>)> {
    let single = BiphotonParams { dims: 1, ..*params };
    let grids = ModelGrids::for_widths(&single, dxs, dks, opts)?;
    let mut out = Vec::new();
    for q in which {
        let rho = match q {
            Quadrature::Position => {
                check_node_budget(&grids.x, 2 * params.dims, opts)?;
                position_joint(params, &grids.x)?
            }
            Quadrature::Momentum => {
                check_node_budget(&grids.k, 2 * params.dims, opts)?;
                momentum_joint(params, &grids.k)?
            }
        };
        out.push(rho);
    }
    Ok((grids, out))
}

fn quadrature_name(q: Quadrature) -> &'static str {
    match q {
        Quadrature::Position => "position",
        Quadrature::Momentum => "momentum",
    }
}

struct Loaded {
    record: SourceRecord,
    names: Vec<String>,
    rho: GridDensity,
    normalization: Normalization,
    notes: Vec<String>,
}

pub enum DensitySource {
    File(PathBuf),
    Model {
        spec: ModelSpec,
        quadrature: Quadrature,
        samples_per_sigma: f64,
    },
}

impl DensitySource {
    pub fn resolve(
        input: Option<PathBuf>,
        model: Option<ModelSpec>,
        quadrature: Quadrature,
        samples_per_sigma: f64,
    ) -> CliResult<Self> {
        match (input, model) {
            (Some(p), None) => Ok(Self::File(p)),
            (None, Some(spec)) => Ok(Self::Model {
                spec,
                quadrature,
                samples_per_sigma,
            }),
            _ => Err(CliError::Usage("give exactly one of an input file or --model".into())),
        }
    }

    /// Loads the density on a grid commensurate with every width in `widths`.
    fn load(&self, widths: &[f64], normalize: bool) -> CliResult<Loaded> {
        match self {
            Self::File(path) => {
                if io::is_histogram(path) {
                    return Err(CliError::Usage(format!(
                        "{} is a histogram; this command needs a density .json",
                        path.display()
                    )));
                }
                let (names, rho) = io::read_density(path)?;
                let (rho, norm, notes) = prepare_density(rho, normalize)?;
                let record = SourceRecord::File {
                    path: path.display().to_string(),
                };
                Ok(Loaded {
                    record,
                    names,
                    rho,
                    normalization: norm,
                    notes,
                })
            }
            Self::Model {
                spec,
                quadrature,
                samples_per_sigma,
            } => {
                let params = model_params(spec)?;
                let opts = options(*samples_per_sigma)?;
                let (grids, mut joints) = model_joints(&params, widths, widths, &opts, &[*quadrature])?;
                let rho = joints.pop().expect("one joint requested");
                let grid = match quadrature {
                    Quadrature::Position => grids.x,
                    Quadrature::Momentum => grids.k,
                };
                let prefix = match quadrature {
                    Quadrature::Position => "x",
                    Quadrature::Momentum => "k",
                };
                let record = SourceRecord::Model {
                    sigma_plus: spec.sigma_plus,
                    sigma_minus: spec.sigma_minus,
                    dims: spec.dims,
                    quadrature: quadrature_name(*quadrature).into(),
                    grid,
                };
                let norm = Normalization {
                    input_total: rho.total_mass(),
                    renormalized: false,
                    total_counts: None,
                    clamped_values: 0,
                };
                Ok(Loaded {
                    record,
                    names: party_names(prefix, spec.dims),
                    rho,
                    normalization: norm,
                    notes: Vec::new(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub kind: String,
    pub value: f64,
}

/// Joint, marginal and conditional entropies and mutual informations built
/// from the entropies of axis subsets.
fn quantities(
    names: &[String],
    kind: &str,
    symbol: &str,
    base: LogBase,
    entropy_of: impl Fn(&[usize]) -> CliResult<f64>,
) -> CliResult<Vec<Quantity>> {
    let n = names.len();
    let label = |axes: &[usize]| axes.iter().map(|&a| names[a].as_str()).collect::<Vec<_>>().join(",");
    let all: Vec<usize> = (0..n).collect();
    let joint = entropy_of(&all)?;
    let mut out = vec![Quantity {
        name: format!("{symbol}({})", label(&all)),
        kind: kind.into(),
        value: base.from_nats(joint),
    }];
    if n == 1 {
        return Ok(out);
    }
    let mut push = |name: String, nats: f64| {
        out.push(Quantity {
            name,
            kind: kind.into(),
            value: base.from_nats(nats),
        })
    };
    let singles: Vec<f64> = (0..n).map(|a| entropy_of(&[a])).collect::<CliResult<_>>()?;
    for a in 0..n {
        push(format!("{symbol}({})", names[a]), singles[a]);
    }
    for a in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&b| b != a).collect();
        let h_rest = if rest.len() == 1 { singles[rest[0]] } else { entropy_of(&rest)? };
        push(format!("{symbol}({}|{})", label(&rest), names[a]), joint - singles[a]);
        if n > 2 {
            push(format!("{symbol}({}|{})", names[a], label(&rest)), joint - h_rest);
        }
        if n > 2 || a == 0 {
            push(format!("I({}:{})", names[a], label(&rest)), singles[a] + h_rest - joint);
        }
    }
    Ok(out)
}

fn hist_entropy(h: &Histogram, axes: &[usize]) -> CliResult<f64> {
    let m = if axes.len() == h.ndim() { h.clone() } else { h.marginalize_axes(axes)? };
    Ok(discrete_entropy(&m, LogBase::E).value)
}

fn density_entropy(rho: &GridDensity, axes: &[usize]) -> CliResult<f64> {
    let m = if axes.len() == rho.ndim() { rho.clone() } else { rho.marginalize_axes(axes)? };
    Ok(differential_entropy(&m, LogBase::E).value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub command: String,
    pub source: SourceRecord,
    pub input_kind: String,
    pub base: LogBase,
    pub unit: String,
    pub names: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<f64>>,
    pub normalization: Normalization,
    pub notes: Vec<String>,
    pub quantities: Vec<Quantity>,
}

fn quantity_table(title: &str, base: LogBase, rows: &[Quantity], extra: &[String]) -> String {
    let mut s = format!("{title}\n");
    for e in extra {
        let _ = writeln!(s, "  {e}");
    }
    let width = rows.iter().map(|q| q.name.len()).max().unwrap_or(0);
    for q in rows {
        let _ = writeln!(s, "  {:<width$}  {:>16.10} {}", q.name, q.value, base.unit());
    }
    s
}

fn spec_for(rho: &GridDensity, widths: &[f64]) -> CliResult<BinningSpec> {
    Ok(BinningSpec::tiling(rho, widths)?)
}

pub fn entropy(input: &Path, widths: Option<&[f64]>, normalize: bool, common: &Common) -> CliResult<Outcome> {
    let source = SourceRecord::File {
        path: input.display().to_string(),
    };
    let report = if io::is_histogram(input) {
        let loaded = io::read_histogram(input, widths)?;
        let (hist, normalization, notes) = prepare_histogram(&loaded, normalize)?;
        let base = resolve_base(common, Some(&loaded.sidecar));
        let quantities = quantities(&loaded.names, "discrete", "H", base, |axes| hist_entropy(&hist, axes))?;
        EntropyReport {
            command: "entropy".into(),
            source,
            input_kind: "histogram".into(),
            base,
            unit: base.unit().into(),
            names: loaded.names.clone(),
            widths: loaded.widths_given.then(|| hist.widths()),
            normalization,
            notes,
            quantities,
        }
    } else {
        let (names, rho) = io::read_density(input)?;
        let (rho, normalization, notes) = prepare_density(rho, normalize)?;
        let base = resolve_base(common, None);
        let mut quantities = quantities(&names, "continuous", "h", base, |axes| density_entropy(&rho, axes))?;
        if let Some(w) = widths {
            let spec = spec_for(&rho, w)?;
            let region = entrosteer::discretize::covered_region(&rho, &spec)?;
            let hist = bin_density(&region, &spec)?;
            quantities.extend(quantities_for_hist(&names, &hist, base)?);
        }
        EntropyReport {
            command: "entropy".into(),
            source,
            input_kind: "density".into(),
            base,
            unit: base.unit().into(),
            names,
            widths: widths.map(<[f64]>::to_vec),
            normalization,
            notes,
            quantities,
        }
    };
    log::info!("entropy: {} quantities", report.quantities.len());
    let text = emit(common, &report, || {
        let mut extra = vec![format!("input: {} ({})", input.display(), report.input_kind)];
        if let Some(c) = report.normalization.total_counts {
            extra.push(format!("total counts: {c}"));
        }
        extra.extend(report.notes.iter().cloned());
        quantity_table("entropies", report.base, &report.quantities, &extra)
    });
    Ok(Outcome::ok(text))
}

fn quantities_for_hist(names: &[String], hist: &Histogram, base: LogBase) -> CliResult<Vec<Quantity>> {
    quantities(names, "discrete", "H", base, |axes| hist_entropy(hist, axes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub command: String,
    pub source: SourceRecord,
    pub names: Vec<String>,
    pub base: LogBase,
    pub unit: String,
    pub tolerance: f64,
    pub normalization: Normalization,
    pub notes: Vec<String>,
    pub connection: ConnectionReport,
    pub gaps: Vec<GapRow>,
    pub breaches: Vec<String>,
    pub passed: bool,
}

fn gap_table(rows: &[GapRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "  {:<34} {:>16} {:>16} {:>12} {:>14}",
        "bound", "continuous", "discrete", "log width", "gap"
    );
    for row in rows {
        match row {
            GapRow::Evaluated(r) => {
                let _ = writeln!(
                    s,
                    "  {:<34} {:>16.10} {:>16.10} {:>12.6} {:>14.3e}",
                    r.id.label(),
                    r.continuous.value,
                    r.discrete.value,
                    r.log_width,
                    r.gap
                );
            }
            GapRow::NotApplicable { id, reason } => {
                let _ = writeln!(s, "  {:<34} n/a ({reason})", id.label());
            }
        }
    }
    s
}

pub fn verify_connection(
    source: &DensitySource,
    widths: &[f64],
    normalize: bool,
    windows: bool,
    common: &Common,
) -> CliResult<Outcome> {
    let Loaded {
        record,
        names,
        rho,
        normalization,
        notes,
    } = source.load(widths, normalize)?;
    let base = resolve_base(common, None);
    let spec = spec_for(&rho, widths)?;
    let mut connection = entrosteer::verify_connection(&rho, &spec, base)?;
    let gaps = gap_suite(&rho, &spec, base)?;

    let mut breaches = Vec::new();
    if connection.residual.abs() > TOLERANCE {
        breaches.push(format!("decomposition residual {:e}", connection.residual));
    }
    for r in gaps.iter().filter_map(GapRow::report) {
        if r.gap < -TOLERANCE {
            breaches.push(format!("{}: gap {:e}", r.id.label(), r.gap));
        }
    }
    if !windows {
        connection.per_window.clear();
    }
    let passed = breaches.is_empty();
    let report = VerifyReport {
        command: "verify_connection".into(),
        source: record,
        names,
        base,
        unit: base.unit().into(),
        tolerance: TOLERANCE,
        normalization,
        notes,
        connection,
        gaps,
        breaches,
        passed,
    };
    let text = emit(common, &report, || {
        let c = &report.connection;
        let mut s = format!("window decomposition ({})\n", report.unit);
        let _ = writeln!(s, "  widths               {:?}", c.widths);
        let _ = writeln!(s, "  h                    {:.12}", c.lhs.value);
        let _ = writeln!(s, "  sum P h_l            {:.12}", c.rhs_terms.weighted_window_entropy);
        let _ = writeln!(s, "  H                    {:.12}", c.rhs_terms.discrete_entropy);
        let _ = writeln!(s, "  empty windows        {} ({:.3e})", c.empty_windows, c.rhs_terms.empty_window_entropy);
        let _ = writeln!(s, "  residual             {:.3e}", c.residual);
        let _ = writeln!(s, "  uncovered mass       {:.3e}", c.uncovered_mass);
        s.push_str("bounds\n");
        s.push_str(&gap_table(&report.gaps));
        let _ = writeln!(s, "{}", if report.passed { "PASS" } else { "BREACH" });
        s
    });
    Ok(finish_checked(text, &report.breaches))
}

fn finish_checked(text: String, breaches: &[String]) -> Outcome {
    if breaches.is_empty() {
        Outcome::ok(text)
    } else {
        Outcome {
            text,
            code: 4,
            breach: Some(breaches.join("; ")),
        }
    }
}

pub struct SteeringArgs {
    pub x_hist: Option<PathBuf>,
    pub k_hist: Option<PathBuf>,
    pub model: Option<ModelSpec>,
    pub dx: Option<Vec<f64>>,
    pub dk: Option<Vec<f64>>,
    pub scan: bool,
    pub grid: bool,
    pub swap_roles: bool,
    pub normalize: bool,
    pub samples_per_sigma: f64,
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub dims: usize,
    pub grids: ModelGrids,
    /// Quadrature value of the continuous left-hand side.
    pub continuous_lhs: f64,
    pub analytic: AnalyticEntropies,
    /// `lhs + Σ log(Δx Δk)`.
    pub corrected_lhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringOutput {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<[String; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<[Normalization; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSummary>,
    pub notes: Vec<String>,
    pub report: SteeringReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutput {
    pub command: String,
    pub analytic: AnalyticEntropies,
    pub scan: BinScan,
}

fn steering_table(r: &SteeringReport) -> String {
    let mut s = format!(
        "steering witness ({:?}, {:?}, {})\n",
        r.mode,
        r.conditioning,
        r.base.unit()
    );
    for a in &r.per_axis {
        let _ = writeln!(
            s,
            "  axis {}: H(X_B|X_A) {:.10}  H(K_B|K_A) {:.10}  dx {} dk {}  rhs {:.10}{}",
            a.axis,
            a.h_x,
            a.h_k,
            a.dx_b,
            a.dk_b,
            a.rhs,
            if a.vacuous { "  (vacuous)" } else { "" }
        );
    }
    let _ = writeln!(s, "  lhs     {:.12}", r.lhs);
    let _ = writeln!(s, "  rhs     {:.12}", r.rhs);
    let _ = writeln!(s, "  margin  {:.12}", r.margin);
    let verdict = if r.violated {
        "violated"
    } else if r.vacuous {
        "not violated (vacuous: widths too coarse)"
    } else {
        "not violated"
    };
    let _ = writeln!(s, "  verdict {verdict}");
    s
}

fn width_pairs(dx: &[f64], dk: &[f64], grid: bool) -> CliResult<Vec<(f64, f64)>> {
    if grid {
        return Ok(dx.iter().flat_map(|&x| dk.iter().map(move |&k| (x, k))).collect());
    }
    match (dx.len(), dk.len()) {
        (a, b) if a == b => Ok(dx.iter().copied().zip(dk.iter().copied()).collect()),
        (1, _) => Ok(dk.iter().map(|&k| (dx[0], k)).collect()),
        (_, 1) => Ok(dx.iter().map(|&x| (x, dk[0])).collect()),
        (a, b) => Err(CliError::Usage(format!(
            "{a} --dx and {b} --dk values cannot be paired; use equal lengths or --grid"
        ))),
    }
}

pub fn steering(args: SteeringArgs) -> CliResult<Outcome> {
    let conditioning = if args.swap_roles {
        Conditioning::AGivenB
    } else {
        Conditioning::BGivenA
    };
    let common = &args.common;
    if let Some(spec) = args.model {
        let params = model_params(&spec)?;
        let opts = options(args.samples_per_sigma)?;
        let (dx, dk) = match (&args.dx, &args.dk) {
            (Some(dx), Some(dk)) => (dx.clone(), dk.clone()),
            _ => return Err(CliError::Usage("--model needs --dx and --dk".into())),
        };
        if !args.scan && (dx.len() != 1 || dk.len() != 1) {
            return Err(CliError::Usage("width lists need --scan".into()));
        }
        let pairs = width_pairs(&dx, &dk, args.grid)?;
        let base = resolve_base(common, None);
        let scan = steering_bin_scan(&params, &pairs, conditioning, base, &opts)?;
        let analytic = analytic_entropies(&params, base)?;
        if args.scan {
            let out = ScanOutput {
                command: "steering_scan".into(),
                analytic,
                scan,
            };
            let text = emit(common, &out, || scan_table(&out));
            return Ok(Outcome::ok(text));
        }
        let entry = scan.entries.into_iter().next().expect("one width pair");
        let out = SteeringOutput {
            command: "steering".into(),
            inputs: None,
            normalization: None,
            model: Some(ModelSummary {
                sigma_plus: spec.sigma_plus,
                sigma_minus: spec.sigma_minus,
                dims: spec.dims,
                grids: scan.grids,
                continuous_lhs: scan.continuous_lhs,
                analytic,
                corrected_lhs: entry.corrected_lhs,
            }),
            notes: Vec::new(),
            report: entry.report,
        };
        let text = emit(common, &out, || {
            let m = out.model.as_ref().expect("model run");
            let mut s = steering_table(&out.report);
            let _ = writeln!(s, "  continuous lhs {:.12} (closed form {:.12})", m.continuous_lhs, m.analytic.steering_lhs);
            let _ = writeln!(s, "  n log(pi e)    {:.12}", m.analytic.uncertainty_bound);
            s
        });
        return Ok(Outcome::ok(text));
    }

    let (Some(xp), Some(kp)) = (&args.x_hist, &args.k_hist) else {
        return Err(CliError::Usage("give --x-hist and --k-hist, or --model".into()));
    };
    let x = io::read_histogram(xp, args.dx.as_deref())?;
    let k = io::read_histogram(kp, args.dk.as_deref())?;
    for (h, p) in [(&x, xp), (&k, kp)] {
        if !h.widths_given {
            return Err(CliError::Validation(format!(
                "{}: window widths missing; pass --dx/--dk or a sidecar",
                p.display()
            )));
        }
    }
    let (xh, xn, mut notes) = prepare_histogram(&x, args.normalize)?;
    let (kh, kn, knotes) = prepare_histogram(&k, args.normalize)?;
    notes.extend(knotes);
    let base = resolve_base(common, Some(&x.sidecar));
    let report = discrete_steering_test_as(&xh, &kh, conditioning, base)?;
    let out = SteeringOutput {
        command: "steering".into(),
        inputs: Some([xp.display().to_string(), kp.display().to_string()]),
        normalization: Some([xn, kn]),
        model: None,
        notes,
        report,
    };
    let text = emit(common, &out, || steering_table(&out.report));
    Ok(Outcome::ok(text))
}

fn scan_table(out: &ScanOutput) -> String {
    let s0 = &out.scan;
    let mut s = format!(
        "# steering scan sigma_plus={} sigma_minus={} dims={} ({})\n",
        s0.params.sigma_plus,
        s0.params.sigma_minus,
        s0.params.dims,
        out.analytic.base.unit()
    );
    let _ = writeln!(s, "# continuous lhs {:.12}, n log(pi e) {:.12}", s0.continuous_lhs, s0.uncertainty_bound);
    let _ = writeln!(s, "dx\tdk\tlhs\trhs\tmargin\tcorrected_lhs\tverdict");
    for e in &s0.entries {
        let verdict = if e.report.violated {
            "violated"
        } else if e.report.vacuous {
            "vacuous"
        } else {
            "not_violated"
        };
        let _ = writeln!(
            s,
            "{}\t{}\t{:.10}\t{:.10}\t{:.10}\t{:.10}\t{verdict}",
            e.dx, e.dk, e.report.lhs, e.report.rhs, e.report.margin, e.corrected_lhs
        );
    }
    if let Some((dx, dk)) = s0.flip {
        let _ = writeln!(s, "# verdict flips to violated at dx={dx} dk={dk}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub command: String,
    pub source: SourceRecord,
    pub row: InequalityId,
    pub base: LogBase,
    pub unit: String,
    pub normalization: Normalization,
    pub steps: Vec<RefinementStep>,
    pub strictly_decreasing: bool,
}

pub fn scan(
    source: &DensitySource,
    widths: &[f64],
    halvings: usize,
    row: InequalityId,
    normalize: bool,
    common: &Common,
) -> CliResult<Outcome> {
    if halvings == 0 || halvings > 12 {
        return Err(CliError::Usage("--halvings must be between 1 and 12".into()));
    }
    let mut all_widths = widths.to_vec();
    all_widths.extend(widths.iter().map(|w| w / f64::from(1u32 << halvings)));
    let Loaded {
        record,
        rho,
        normalization,
        ..
    } = source.load(&all_widths, normalize)?;
    let base = resolve_base(common, None);
    let spec = spec_for(&rho, widths)?;
    let steps = refine_convergence(&rho, &spec, halvings, row, base)?;
    let strictly_decreasing = steps.windows(2).all(|w| w[1].gap < w[0].gap);
    let report = RefinementReport {
        command: "scan".into(),
        source: record,
        row,
        base,
        unit: base.unit().into(),
        normalization,
        steps,
        strictly_decreasing,
    };
    let text = emit(common, &report, || {
        let mut s = format!("# {} gap under halving ({})\n", report.row.label(), report.unit);
        let _ = writeln!(s, "widths\tgap");
        for st in &report.steps {
            let w: Vec<String> = st.widths.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "{}\t{:.12e}", w.join(","), st.gap);
        }
        s
    });
    Ok(Outcome::ok(text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutput {
    pub command: String,
    pub source: SourceRecord,
    pub base: LogBase,
    pub unit: String,
    pub normalization: Normalization,
    pub probe: ProbeReport,
}

const PROBE_HALF_WIDTH: f64 = 16.0;
const PROBE_STEP: f64 = 0.25;

pub fn probe_cmi(input: Option<&Path>, seed: u64, widths: &[f64], normalize: bool, common: &Common) -> CliResult<Outcome> {
    let (source, rho, normalization) = match input {
        Some(path) => {
            let (_, rho) = io::read_density(path)?;
            let (rho, norm, _) = prepare_density(rho, normalize)?;
            (
                SourceRecord::File {
                    path: path.display().to_string(),
                },
                rho,
                norm,
            )
        }
        None => {
            let g = seeded_gaussian(seed, 3);
            let grid = Axis::symmetric(PROBE_HALF_WIDTH, PROBE_STEP)?;
            let raw = GridDensity::from_fn(vec![grid; 3], |x| g.pdf(x))?;
            let input_total = raw.total_mass();
            let cov = g.covariance();
            (
                SourceRecord::RandomGaussian {
                    seed,
                    mean: g.mean().to_vec(),
                    covariance: (0..3).map(|i| (0..3).map(|j| cov[(i, j)]).collect()).collect(),
                    grid,
                },
                raw.normalized()?,
                Normalization {
                    input_total,
                    renormalized: true,
                    total_counts: None,
                    clamped_values: 0,
                },
            )
        }
    };
    let base = resolve_base(common, None);
    let spec = spec_for(&rho, widths)?;
    let probe = conditional_mi_probe(&rho, &spec, base)?;
    let out = ProbeOutput {
        command: "probe_cmi".into(),
        source,
        base,
        unit: base.unit().into(),
        normalization,
        probe,
    };
    let text = emit(common, &out, || {
        let p = &out.probe;
        let mut s = format!("conditional mutual information ({}, {})\n", p.label, out.unit);
        let _ = writeln!(s, "  h(x:y|z)    {:.12}", p.continuous.value);
        let _ = writeln!(s, "  H(X:Y|Z)    {:.12}", p.discrete.value);
        let _ = writeln!(s, "  difference  {:.12}", p.difference);
        s
    });
    Ok(Outcome::ok(text))
}

pub struct GenerateArgs {
    pub model: Option<ModelSpec>,
    pub mixture: Option<usize>,
    pub seed: u64,
    pub dx: Option<Vec<f64>>,
    pub dk: Option<Vec<f64>>,
    pub histogram: bool,
    pub out_dir: PathBuf,
    pub samples_per_sigma: f64,
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedFile {
    pub file: String,
    pub kind: String,
    pub names: Vec<String>,
    pub axes: Vec<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<f64>>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub files: Vec<GeneratedFile>,
}

fn single(v: &Option<Vec<f64>>, flag: &str) -> CliResult<Option<f64>> {
    match v.as_deref() {
        None => Ok(None),
        Some([w]) => Ok(Some(*w)),
        Some(_) => Err(CliError::Usage(format!("generate takes a single {flag} value"))),
    }
}

fn write_pair(
    dir: &Path,
    stem: &str,
    names: Vec<String>,
    rho: &GridDensity,
    width: Option<f64>,
    base: LogBase,
    files: &mut Vec<GeneratedFile>,
) -> CliResult<()> {
    let density_name = format!("{stem}.json");
    io::write_json(&dir.join(&density_name), &io::density_file(&names, rho))?;
    files.push(GeneratedFile {
        file: density_name,
        kind: "density".into(),
        names: names.clone(),
        axes: rho.axes().to_vec(),
        widths: None,
        total: rho.total_mass(),
    });
    if let Some(w) = width {
        let spec = spec_for(rho, &[w])?;
        let hist = bin_density(rho, &spec)?;
        let csv_name = format!("{stem}.csv");
        let sidecar = Sidecar {
            widths: Some(hist.widths()),
            base: Some(base),
        };
        io::write_histogram(&dir.join(&csv_name), &names, &hist, &sidecar)?;
        files.push(GeneratedFile {
            file: csv_name,
            kind: "histogram".into(),
            names,
            axes: rho.axes().to_vec(),
            widths: Some(hist.widths()),
            total: hist.total(),
        });
    }
    Ok(())
}

pub fn generate(args: GenerateArgs) -> CliResult<Outcome> {
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.out_dir.display())))?;
    let base = resolve_base(&args.common, None);
    let dx = single(&args.dx, "--dx")?;
    let dk = single(&args.dk, "--dk")?;
    if args.histogram && dx.is_none() {
        return Err(CliError::Usage("--histogram needs --dx".into()));
    }
    let mut files = Vec::new();
    let seed = match (args.model, args.mixture) {
        (Some(spec), None) => {
            let (Some(dx), Some(dk)) = (dx, dk) else {
                return Err(CliError::Usage("--model needs --dx and --dk to build its grids".into()));
            };
            let params = model_params(&spec)?;
            let opts = options(args.samples_per_sigma)?;
            let (_, joints) = model_joints(
                &params,
                &[dx],
                &[dk],
                &opts,
                &[Quadrature::Position, Quadrature::Momentum],
            )?;
            let hx = args.histogram.then_some(dx);
            let hk = args.histogram.then_some(dk);
            write_pair(&args.out_dir, "position", party_names("x", spec.dims), &joints[0], hx, base, &mut files)?;
            write_pair(&args.out_dir, "momentum", party_names("k", spec.dims), &joints[1], hk, base, &mut files)?;
            None
        }
        (None, Some(dims)) => {
            if !(1..=3).contains(&dims) {
                return Err(CliError::Usage("--mixture takes 1 to 3 axes".into()));
            }
            let (step, _) = corpus::geometry(dims);
            let comps = seeded_mixture(args.seed, dims);
            let axis = Axis::symmetric(corpus::HALF_WIDTH, step)?;
            let rho = mixture_density(&comps, vec![axis; dims])?;
            let names = (0..dims).map(|a| format!("x{a}")).collect();
            write_pair(&args.out_dir, "mixture", names, &rho, args.histogram.then_some(dx).flatten(), base, &mut files)?;
            Some(args.seed)
        }
        _ => return Err(CliError::Usage("give exactly one of --model or --mixture".into())),
    };
    let report = GenerateReport {
        command: "generate".into(),
        seed,
        files,
    };
    let text = emit(&args.common, &report, || {
        let mut s = String::new();
        for f in &report.files {
            let _ = writeln!(s, "wrote {} ({}, axes {:?})", f.file, f.kind, f.names);
        }
        s
    });
    Ok(Outcome::ok(text))
}
