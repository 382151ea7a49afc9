//! Sample, multifunction and report files.
//!
//! Every file starts with a `# key=value …` header line. Data rows are two
//! or more numeric fields separated by tabs, commas or spaces. Angles are
//! radians; a header declaring any other unit is rejected.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use circmodal::bandwidth::Selection;
use circmodal::{Bandwidths, Branch, Geometry, GlobalError, ModalMultifunction, RegressionSample};
use serde::{Deserialize, Serialize};

/// Column names of a multifunction table.
pub const MULTIFUNCTION_COLUMNS: &str = "mesh_value\tmode_value\tdensity_value\titerations";

/// Output flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Tab-delimited text with a `#` header block.
    Table,
    /// A JSON document.
    Json,
}

/// Key-value pairs from a `# key=value …` line.
fn header_fields(line: &str) -> Option<Vec<(&str, &str)>> {
    let body = line.trim().strip_prefix('#')?;
    Some(body.split_whitespace().filter_map(|kv| kv.split_once('=')).collect())
}

fn parse_header(line: &str, path: &Path) -> Result<(Geometry, Option<usize>)> {
    let fields = header_fields(line).ok_or_else(|| {
        anyhow!(
            "{}: line 1: expected a '# geometry=<tag> n=<count>' header",
            path.display()
        )
    })?;
    let mut geometry = None;
    let mut n = None;
    for (key, value) in fields {
        match key {
            "geometry" => {
                geometry = Some(
                    value
                        .parse::<Geometry>()
                        .with_context(|| format!("{}: line 1", path.display()))?,
                )
            }
            "n" => {
                n = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| anyhow!("{}: line 1: bad observation count '{value}'", path.display()))?,
                )
            }
            "units" if value != "radians" => {
                bail!(
                    "{}: line 1: angles must be given in radians, not {value}",
                    path.display()
                )
            }
            _ => {}
        }
    }
    let geometry = geometry.ok_or_else(|| anyhow!("{}: line 1: header has no geometry", path.display()))?;
    Ok((geometry, n))
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
}

fn parse_number(field: &str, line_no: usize, path: &Path) -> Result<f64> {
    let value: f64 = field
        .parse()
        .map_err(|_| anyhow!("{}: line {line_no}: '{field}' is not a number", path.display()))?;
    Ok(value)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Reads a sample file. Angles outside (−π, π] are wrapped and reported in the log.
pub fn read_sample(path: &Path) -> Result<RegressionSample> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| anyhow!("{}: empty file", path.display()))?;
    let (geometry, declared) = parse_header(first, path)?;

    let mut predictors = Vec::new();
    let mut responses = Vec::new();
    let mut wrapped = 0usize;
    let mut first_wrapped = None;
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = split_fields(line).collect();
        if fields.len() != 2 {
            bail!(
                "{}: line {line_no}: expected 2 fields (predictor, response), found {}",
                path.display(),
                fields.len()
            );
        }
        let x = parse_number(fields[0], line_no, path)?;
        let y = parse_number(fields[1], line_no, path)?;
        if !x.is_finite() || !y.is_finite() {
            bail!("{}: line {line_no}: values must be finite", path.display());
        }
        let out_of_range = |v: f64, circular: bool| circular && !(v > -PI && v <= PI);
        if out_of_range(x, geometry.predictor_is_circular()) || out_of_range(y, geometry.response_is_circular()) {
            wrapped += 1;
            first_wrapped.get_or_insert(line_no);
        }
        predictors.push(x);
        responses.push(y);
    }
    if let Some(n) = declared {
        if n != predictors.len() {
            bail!(
                "{}: header declares n={n} but the file has {} rows",
                path.display(),
                predictors.len()
            );
        }
    }
    if let Some(line_no) = first_wrapped {
        log::warn!(
            "{}: wrapped {wrapped} row(s) with angles outside (-pi, pi] into range (first at line {line_no})",
            path.display()
        );
    }
    RegressionSample::new(geometry, predictors, responses).with_context(|| format!("{}", path.display()))
}

pub fn write_sample(mut w: impl Write, sample: &RegressionSample) -> Result<()> {
    writeln!(w, "# geometry={} n={}", sample.geometry(), sample.len())?;
    for (x, y) in sample.predictors().iter().zip(sample.responses()) {
        writeln!(w, "{x}\t{y}")?;
    }
    Ok(())
}

/// Echoed run settings written above a multifunction table.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitHeader {
    pub n: Option<usize>,
    pub bandwidths: Option<Bandwidths>,
    pub source: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct JsonPoint {
    mesh_value: f64,
    branches: Vec<Branch>,
}

#[derive(Serialize, Deserialize)]
struct JsonMultifunction {
    geometry: Geometry,
    #[serde(flatten)]
    header: FitHeader,
    mesh_size: usize,
    points: Vec<JsonPoint>,
}

/// Writes one record per (mesh point, branch). A mesh point without
/// branches gets a single record with `nan` mode and density.
pub fn write_multifunction(
    mut w: impl Write,
    mf: &ModalMultifunction,
    header: &FitHeader,
    format: Format,
) -> Result<()> {
    match format {
        Format::Table => {
            write!(w, "# geometry={}", mf.geometry())?;
            if let Some(n) = header.n {
                write!(w, " n={n}")?;
            }
            writeln!(w)?;
            if let Some(bw) = header.bandwidths {
                writeln!(w, "# bandwidths predictor={} response={}", bw.predictor, bw.response)?;
            }
            if let Some(source) = &header.source {
                writeln!(w, "# source={source}")?;
            }
            writeln!(w, "# mesh={}", mf.len())?;
            writeln!(w, "{MULTIFUNCTION_COLUMNS}")?;
            for (x, branches) in mf.mesh().iter().zip(mf.all_branches()) {
                if branches.is_empty() {
                    writeln!(w, "{x}\tnan\tnan\t0")?;
                }
                for b in branches {
                    writeln!(w, "{x}\t{}\t{}\t{}", b.mode, b.density, b.iterations)?;
                }
            }
        }
        Format::Json => {
            let doc = JsonMultifunction {
                geometry: mf.geometry(),
                header: header.clone(),
                mesh_size: mf.len(),
                points: mf
                    .mesh()
                    .iter()
                    .zip(mf.all_branches())
                    .map(|(&mesh_value, b)| JsonPoint {
                        mesh_value,
                        branches: b.clone(),
                    })
                    .collect(),
            };
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Reads a multifunction written by [`write_multifunction`] in either format.
pub fn read_multifunction(path: &Path) -> Result<ModalMultifunction> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        let doc: JsonMultifunction =
            serde_json::from_str(&text).with_context(|| format!("{}: malformed JSON", path.display()))?;
        let (mesh, branches) = doc.points.into_iter().map(|p| (p.mesh_value, p.branches)).unzip();
        return Ok(ModalMultifunction::from_parts(doc.geometry, mesh, branches)?);
    }

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| anyhow!("{}: empty file", path.display()))?;
    let (geometry, _) = parse_header(first, path)?;
    let mut mesh: Vec<f64> = Vec::new();
    let mut branches: Vec<Vec<Branch>> = Vec::new();
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("mesh_value") {
            continue;
        }
        let fields: Vec<&str> = split_fields(line).collect();
        if fields.len() != 4 {
            bail!(
                "{}: line {line_no}: expected 4 fields, found {}",
                path.display(),
                fields.len()
            );
        }
        let x = parse_number(fields[0], line_no, path)?;
        let mode = parse_number(fields[1], line_no, path)?;
        let density = parse_number(fields[2], line_no, path)?;
        let iterations = fields[3].parse::<usize>().map_err(|_| {
            anyhow!(
                "{}: line {line_no}: '{}' is not an iteration count",
                path.display(),
                fields[3]
            )
        })?;
        if mesh.last() != Some(&x) {
            mesh.push(x);
            branches.push(Vec::new());
        }
        if !mode.is_nan() {
            branches.last_mut().expect("pushed above").push(Branch {
                mode,
                density,
                iterations,
            });
        }
    }
    Ok(ModalMultifunction::from_parts(geometry, mesh, branches)?)
}

pub fn write_selection(
    mut w: impl Write,
    sample: &RegressionSample,
    method: &str,
    selection: &Selection,
    format: Format,
) -> Result<()> {
    match format {
        Format::Table => {
            writeln!(w, "# geometry={} n={}", sample.geometry(), sample.len())?;
            writeln!(w, "# method={method}")?;
            let bw = selection.bandwidths;
            writeln!(w, "# selected predictor={} response={}", bw.predictor, bw.response)?;
            writeln!(w, "predictor\tresponse\tscore")?;
            for row in &selection.table {
                writeln!(
                    w,
                    "{}\t{}\t{}",
                    row.bandwidths.predictor, row.bandwidths.response, row.score
                )?;
            }
        }
        Format::Json => {
            let doc = serde_json::json!({
                "geometry": sample.geometry(),
                "n": sample.len(),
                "method": method,
                "selected": selection.bandwidths,
                "table": selection.table,
            });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Per-mesh-point errors; `None` marks an undefined point (an empty branch set).
pub fn write_evaluation(
    mut w: impl Write,
    mf: &ModalMultifunction,
    pointwise: &[Option<f64>],
    global: Option<GlobalError>,
    format: Format,
) -> Result<()> {
    let undefined = pointwise.iter().filter(|e| e.is_none()).count();
    match format {
        Format::Table => {
            writeln!(w, "# geometry={}", mf.geometry())?;
            writeln!(w, "# mesh={} undefined={undefined}", mf.len())?;
            match global {
                Some(g) => writeln!(w, "# global_error={} used={}", g.value, g.used)?,
                None => writeln!(w, "# global_error=undefined used=0")?,
            }
            writeln!(w, "mesh_value\terror")?;
            for (x, e) in mf.mesh().iter().zip(pointwise) {
                match e {
                    Some(e) => writeln!(w, "{x}\t{e}")?,
                    None => writeln!(w, "{x}\tundefined")?,
                }
            }
        }
        Format::Json => {
            let doc = serde_json::json!({
                "geometry": mf.geometry(),
                "mesh_size": mf.len(),
                "undefined": undefined,
                "global_error": global.map(|g| g.value),
                "used": global.map_or(0, |g| g.used),
                "pointwise": mf.mesh().iter().zip(pointwise).map(|(x, e)| serde_json::json!({
                    "mesh_value": x,
                    "error": e,
                })).collect::<Vec<_>>(),
            });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}
