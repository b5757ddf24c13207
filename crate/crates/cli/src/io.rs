//! Histogram CSV and density JSON files.
//!
//! A histogram CSV has one column per axis holding window centers and a final
//! `prob` or `count` column. Cells absent from the file are zero. Widths and
//! the log base may come from a `<stem>.meta.json` sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use entrosteer::{Axis, BinAxis, GridDensity, Histogram, LogBase};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Prob,
    Count,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<LogBase>,
}

#[derive(Debug, Clone)]
pub struct LoadedHistogram {
    pub names: Vec<String>,
    pub hist: Histogram,
    pub kind: ValueKind,
    /// Sum of the value column as read.
    pub raw_total: f64,
    /// Whether every width came from flags or the sidecar rather than the
    /// spacing of the centers.
    pub widths_given: bool,
    pub sidecar: Sidecar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

fn read_sidecar(path: &Path) -> CliResult<Sidecar> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(Sidecar::default());
    }
    let text = fs::read_to_string(&side)
        .map_err(|e| CliError::Parse(format!("{}: {e}", side.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", side.display())))
}

fn parse_cell(field: &str, line: u64, column: &str) -> CliResult<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::Parse(format!("line {line}: column `{column}`: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(CliError::Parse(format!("line {line}: column `{column}` is not finite")));
    }
    Ok(v)
}

/// Window axis through the given centers. Without a width the smallest
/// spacing between distinct centers is used.
fn lattice(centers: &[f64], width: Option<f64>, name: &str) -> CliResult<BinAxis> {
    let lo = centers[0];
    let hi = *centers.last().expect("at least one center");
    let width = match width {
        Some(w) => w,
        None => centers
            .windows(2)
            .map(|p| p[1] - p[0])
            .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
            .ok_or_else(|| {
                CliError::Validation(format!(
                    "axis `{name}` has a single center; give its width with a flag or sidecar"
                ))
            })?,
    };
    for &c in centers {
        let k = (c - lo) / width;
        if (k - k.round()).abs() > 1e-6 {
            return Err(CliError::Validation(format!(
                "axis `{name}`: center {c} is not on the lattice {lo} + i*{width}"
            )));
        }
    }
    let count = ((hi - lo) / width).round() as usize + 1;
    Ok(BinAxis::new(width, count, lo)?)
}

pub fn read_histogram(path: &Path, widths: Option<&[f64]>) -> CliResult<LoadedHistogram> {
    let sidecar = read_sidecar(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(CliError::Parse(format!(
            "{}: line 1: header needs at least one axis column and a value column",
            path.display()
        )));
    }
    let (value_col, names) = header.split_last().expect("checked length");
    let kind = match value_col.as_str() {
        "prob" => ValueKind::Prob,
        "count" => ValueKind::Count,
        other => {
            return Err(CliError::Parse(format!(
                "{}: line 1: last column must be `prob` or `count`, found `{other}`",
                path.display()
            )))
        }
    };
    let n = names.len();

    let mut cells: BTreeMap<Vec<u64>, (Vec<f64>, f64, u64)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != n + 1 {
            return Err(CliError::Parse(format!(
                "{}: line {line}: expected {} fields, found {}",
                path.display(),
                n + 1,
                record.len()
            )));
        }
        let coords = (0..n)
            .map(|a| parse_cell(&record[a], line, &names[a]))
            .collect::<CliResult<Vec<f64>>>()?;
        let value = parse_cell(&record[n], line, value_col)?;
        if kind == ValueKind::Count && value.fract() != 0.0 {
            return Err(CliError::Parse(format!("line {line}: count {value} is not a whole number")));
        }
        let key = coords.iter().map(|c| c.to_bits()).collect();
        if let Some((_, _, first)) = cells.insert(key, (coords, value, line)) {
            return Err(CliError::Parse(format!(
                "{}: line {line}: duplicate cell (first seen on line {first})",
                path.display()
            )));
        }
    }
    if cells.is_empty() {
        return Err(CliError::Parse(format!("{}: no data rows", path.display())));
    }

    let widths = widths.map(<[f64]>::to_vec).or_else(|| sidecar.widths.clone());
    if let Some(w) = &widths {
        if w.len() != n && w.len() != 1 {
            return Err(CliError::Usage(format!("{} widths given for {n} axes", w.len())));
        }
    }
    let width_of = |a: usize| widths.as_ref().map(|w| if w.len() == 1 { w[0] } else { w[a] });
    let mut dims = Vec::with_capacity(n);
    for a in 0..n {
        let mut centers: Vec<f64> = cells.values().map(|c| c.0[a]).collect();
        centers.sort_by(f64::total_cmp);
        centers.dedup();
        dims.push(lattice(&centers, width_of(a), &names[a])?);
    }
    let shape: Vec<usize> = dims.iter().map(|d| d.count).collect();
    let mut probs = vec![0.0; shape.iter().product()];
    let mut raw_total = 0.0;
    for (coords, value, _) in cells.values() {
        let mut flat = 0;
        for a in 0..n {
            let i = ((coords[a] - dims[a].center(0)) / dims[a].width).round() as usize;
            flat = flat * shape[a] + i;
        }
        probs[flat] = *value;
        raw_total += value;
    }
    Ok(LoadedHistogram {
        names: names.to_vec(),
        hist: Histogram::new(dims, probs)?,
        kind,
        raw_total,
        widths_given: widths.is_some(),
        sidecar,
    })
}

pub fn write_histogram(path: &Path, names: &[String], hist: &Histogram, sidecar: &Sidecar) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut header: Vec<String> = names.to_vec();
    header.push("prob".into());
    let io_err = |e: csv::Error| CliError::Validation(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(io_err)?;
    for (idx, p) in hist.probs().indexed_iter() {
        let mut row: Vec<String> = (0..hist.ndim())
            .map(|a| format!("{}", hist.dims()[a].center(idx[a])))
            .collect();
        row.push(format!("{p:e}"));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    write_json(&sidecar_path(path), sidecar)
}

pub fn read_density(path: &Path) -> CliResult<(Vec<String>, GridDensity)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let file: DensityFile = serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(format!("{}: line {}: {e}", path.display(), e.line()))
    })?;
    let n = file.axes.len();
    let names = file
        .names
        .unwrap_or_else(|| (0..n).map(|a| format!("x{a}")).collect());
    if names.len() != n {
        return Err(CliError::Validation(format!("{} names for {n} axes", names.len())));
    }
    for a in &file.axes {
        Axis::new(a.origin, a.step, a.count)?;
    }
    Ok((names, GridDensity::new(file.axes, file.values)?))
}

pub fn density_file(names: &[String], rho: &GridDensity) -> DensityFile {
    DensityFile {
        names: Some(names.to_vec()),
        axes: rho.axes().to_vec(),
        values: rho.values().iter().copied().collect(),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = to_json(value);
    fs::write(path, text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// `.csv` is a histogram and anything else a density.
pub fn is_histogram(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
