//! CSV and JSON readers and the result-file writers.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde_json::Value;
use sgpca::{AlignmentReport, DataMatrix, GroupPartition, PCEstimate};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

/// Seventeen significant digits: enough for every `f64` to round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A numeric table as read from disk. Unlike [`DataMatrix`] it may have a
/// single row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Option<Vec<String>>,
    pub values: Array2<f64>,
}

impl Table {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> Array1<f64> {
        self.values.column(j).to_owned()
    }

    pub fn columns(&self) -> Vec<Array1<f64>> {
        (0..self.ncols()).map(|j| self.column(j)).collect()
    }

    pub fn into_data(self, path: &Path) -> CliResult<DataMatrix> {
        DataMatrix::new(self.values).map_err(|e| CliError::Data {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn csv_reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        column: 0,
        message: err.to_string(),
    }
}

/// Reads a rectangular numeric CSV. With `has_header` the first row holds
/// column names. Errors carry 1-based line and column numbers.
pub fn read_matrix(path: impl AsRef<Path>, has_header: bool) -> CliResult<Table> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let mut names = None;
    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::Ragged {
                path: path.to_path_buf(),
                line,
                expected,
                found: record.len(),
            });
        }
        if has_header && names.is_none() {
            names = Some(record.iter().map(|s| s.trim().to_string()).collect());
            continue;
        }
        for (j, field) in record.iter().enumerate() {
            let x: f64 = field.trim().parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                line,
                column: j + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !x.is_finite() {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: j + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(x);
        }
        rows += 1;
    }
    let Some(width) = width else {
        return Err(CliError::Empty {
            path: path.to_path_buf(),
        });
    };
    if rows == 0 {
        return Err(CliError::Data {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    let values = Array2::from_shape_vec((rows, width), values).expect("row lengths checked");
    Ok(Table { names, values })
}

/// A partition together with the group ids found in the file, indexed like
/// the partition's groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    pub partition: GroupPartition,
    pub labels: Vec<String>,
}

fn group_pairs_csv(path: &Path) -> CliResult<Vec<(usize, String)>> {
    let mut reader = csv_reader(path)?;
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(CliError::Ragged {
                path: path.to_path_buf(),
                line,
                expected: 2,
                found: record.len(),
            });
        }
        let index = record[0].trim();
        match index.parse::<usize>() {
            Ok(c) => pairs.push((c, record[1].trim().to_string())),
            Err(_) if i == 0 => continue, // header
            Err(_) => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: 1,
                    message: format!("column index must be a nonnegative integer, got {index:?}"),
                })
            }
        }
    }
    Ok(pairs)
}

fn json_index(path: &Path, v: &Value) -> CliResult<usize> {
    v.as_u64()
        .map(|c| c as usize)
        .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
        .ok_or_else(|| CliError::Data {
            path: path.to_path_buf(),
            message: format!("column index must be a nonnegative integer, got {v}"),
        })
}

fn json_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Accepts either `{"group": [columns...]}` or `{"column": "group"}`.
fn group_pairs_json(path: &Path) -> CliResult<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = value else {
        return Err(CliError::Data {
            path: path.to_path_buf(),
            message: "expected a JSON object".into(),
        });
    };
    let mut pairs = Vec::new();
    for (key, v) in &map {
        match v {
            Value::Array(cols) => {
                for c in cols {
                    pairs.push((json_index(path, c)?, key.clone()));
                }
            }
            other => pairs.push((
                json_index(path, &Value::String(key.clone()))?,
                json_label(other),
            )),
        }
    }
    Ok(pairs)
}

fn build_groups(
    path: &Path,
    pairs: Vec<(usize, String)>,
    p: Option<usize>,
) -> CliResult<GroupAssignment> {
    if pairs.is_empty() {
        return Err(CliError::Empty {
            path: path.to_path_buf(),
        });
    }
    let max = pairs.iter().map(|(c, _)| *c).max().unwrap_or(0);
    let p = match p {
        Some(p) if max >= p => {
            return Err(CliError::OutOfRange {
                path: path.to_path_buf(),
                index: max,
                p,
            })
        }
        Some(p) => p,
        None => max + 1,
    };
    let mut owner: Vec<Option<&str>> = vec![None; p];
    for (c, label) in &pairs {
        if owner[*c].is_some() {
            return Err(CliError::DuplicateAssignment {
                path: path.to_path_buf(),
                index: *c,
            });
        }
        owner[*c] = Some(label);
    }
    if let Some(gap) = owner.iter().position(Option::is_none) {
        return Err(CliError::CoverageGap {
            path: path.to_path_buf(),
            index: gap,
        });
    }
    // Groups ordered by their smallest column.
    let mut slot: BTreeMap<&str, usize> = BTreeMap::new();
    let mut labels = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (c, label) in owner.iter().enumerate() {
        let label = label.expect("coverage checked");
        let g = *slot.entry(label).or_insert_with(|| {
            labels.push(label.to_string());
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(c);
    }
    let partition = GroupPartition::new(groups, p).map_err(|e| CliError::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(GroupAssignment { partition, labels })
}

fn read_group_pairs(path: &Path) -> CliResult<Vec<(usize, String)>> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        group_pairs_json(path)
    } else {
        group_pairs_csv(path)
    }
}

/// Reads a `(column_index, group_id)` CSV or a JSON map. The number of
/// columns is taken to be one past the largest index.
pub fn read_groups(path: impl AsRef<Path>) -> CliResult<GroupAssignment> {
    let path = path.as_ref();
    build_groups(path, read_group_pairs(path)?, None)
}

/// Like [`read_groups`] but checked against a known number of columns.
pub fn read_groups_for(path: impl AsRef<Path>, p: usize) -> CliResult<GroupAssignment> {
    let path = path.as_ref();
    build_groups(path, read_group_pairs(path)?, Some(p))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Writes lines produced by `body`, surfacing I/O errors with the path.
pub fn write_lines(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> CliResult<()> {
    let mut w = create(path)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// A numeric CSV, optionally with a header row.
pub fn write_matrix(path: &Path, header: Option<&[String]>, values: &Array2<f64>) -> CliResult<()> {
    write_lines(path, |w| {
        if let Some(names) = header {
            writeln!(w, "{}", names.join(","))?;
        }
        let mut line = String::new();
        for row in values.rows() {
            line.clear();
            for (j, &x) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_f64(x));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

/// `pc1, pc2, ...`
pub fn component_names(j: usize) -> Vec<String> {
    (1..=j).map(|k| format!("pc{k}")).collect()
}

/// The loading vectors as the columns of a `p x J` matrix.
pub fn loading_matrix(loadings: &[Array1<f64>]) -> Array2<f64> {
    let p = loadings.first().map_or(0, |v| v.len());
    let mut m = Array2::zeros((p, loadings.len()));
    for (j, v) in loadings.iter().enumerate() {
        m.column_mut(j).assign(v);
    }
    m
}

pub fn write_groups(path: &Path, assignment: &GroupAssignment) -> CliResult<()> {
    let p = assignment.partition.dim();
    write_lines(path, |w| {
        writeln!(w, "column_index,group_id")?;
        for c in 0..p {
            let g = assignment.partition.group_of(c);
            writeln!(w, "{c},{}", assignment.labels[g])?;
        }
        Ok(())
    })
}

pub fn write_alignment_report(path: &Path, reports: &[AlignmentReport]) -> CliResult<()> {
    write_lines(path, |w| {
        writeln!(w, "j,eta,tau,align,mean_support,failures")?;
        for report in reports {
            for row in &report.rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    row.component + 1,
                    fmt_f64(row.eta),
                    fmt_f64(row.tau),
                    fmt_f64(row.align),
                    fmt_f64(row.mean_support),
                    row.failures
                )?;
            }
        }
        Ok(())
    })
}

/// Everything a fit or tune run produces besides the manifest.
pub struct ResultSet<'a> {
    pub estimates: &'a [PCEstimate],
    pub reports: &'a [AlignmentReport],
    pub groups: &'a GroupAssignment,
    /// `n x J` projections of the data onto the loadings.
    pub scores: Array2<f64>,
}

/// Writes `loadings.csv`, `scores.csv`, `support.csv`, `alignment_report.csv`
/// (only when there are reports) and `manifest.json` into `outdir`.
/// Returns the written paths.
pub fn write_results(
    set: &ResultSet<'_>,
    manifest: &RunManifest,
    outdir: &Path,
) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| CliError::io(outdir, e))?;
    let names = component_names(set.estimates.len());
    let mut written = Vec::new();

    let loadings: Vec<Array1<f64>> = set.estimates.iter().map(|e| e.loading.clone()).collect();
    let path = outdir.join("loadings.csv");
    write_matrix(&path, Some(&names), &loading_matrix(&loadings))?;
    written.push(path);

    let path = outdir.join("scores.csv");
    write_matrix(&path, Some(&names), &set.scores)?;
    written.push(path);

    let path = outdir.join("support.csv");
    write_lines(&path, |w| {
        writeln!(w, "component,group_id,column,value")?;
        for (j, est) in set.estimates.iter().enumerate() {
            for &c in &est.support {
                let g = set.groups.partition.group_of(c);
                writeln!(
                    w,
                    "{},{},{},{}",
                    j + 1,
                    set.groups.labels[g],
                    c,
                    fmt_f64(est.loading[c])
                )?;
            }
        }
        Ok(())
    })?;
    written.push(path);

    let mut manifest = manifest.clone();
    if set.reports.is_empty() {
        manifest.tuning = "untuned".into();
    } else {
        manifest.tuning = "tuned".into();
        let path = outdir.join("alignment_report.csv");
        write_alignment_report(&path, set.reports)?;
        written.push(path);
    }

    let path = outdir.join("manifest.json");
    manifest.write(&path)?;
    written.push(path);
    Ok(written)
}
