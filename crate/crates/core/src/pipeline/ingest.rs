//! Delimited-text ingestion and reproducible train/test splitting.

use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aggregate::GroupIndex;
use crate::error::{Error, Result};

/// Column-name prefix marking targets in a combined file.
pub const TARGET_PREFIX: &str = "targets:";

#[derive(Debug, Clone, PartialEq)]
pub enum InputFiles {
    /// Features and targets in two files sharing row order.
    Separate { features: PathBuf, targets: PathBuf },
    /// One file whose target columns carry [`TARGET_PREFIX`].
    Combined(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub files: InputFiles,
    /// Header name of an integer structure-id column.
    pub groups: Option<String>,
    /// Multiply targets by the number of environments in their structure.
    pub per_atom_targets: bool,
}

impl IngestOptions {
    pub fn new(files: InputFiles) -> Self {
        IngestOptions {
            files,
            groups: None,
            per_atom_targets: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub feature_names: Vec<String>,
    pub x: Array2<f64>,
    pub target_names: Vec<String>,
    pub y: Array2<f64>,
    /// Raw structure label of every row.
    pub groups: Option<Vec<i64>>,
}

impl DataSet {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn group_index(&self) -> Result<Option<(GroupIndex, Vec<i64>)>> {
        self.groups.as_deref().map(GroupIndex::from_labels).transpose()
    }

    pub fn subset(&self, rows: &[usize]) -> DataSet {
        DataSet {
            feature_names: self.feature_names.clone(),
            x: self.x.select(Axis(0), rows),
            target_names: self.target_names.clone(),
            y: self.y.select(Axis(0), rows),
            groups: self.groups.as_ref().map(|g| rows.iter().map(|&r| g[r]).collect()),
        }
    }
}

struct Table {
    path: String,
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
    lines: Vec<usize>,
}

fn ingest_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest_error(&name, 0, e.to_string()))?;
    let csv_error = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        ingest_error(&name, line, e.to_string())
    };
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if header.iter().all(String::is_empty) {
        return Err(ingest_error(&name, 1, "missing header row"));
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(ingest_error(
                &name,
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        rows.push(record);
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(ingest_error(&name, 1, "no data rows after the header"));
    }
    Ok(Table {
        path: name,
        header,
        rows,
        lines,
    })
}

impl Table {
    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn numeric(&self, columns: &[usize]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.rows.len(), columns.len()));
        for (r, record) in self.rows.iter().enumerate() {
            for (c, &col) in columns.iter().enumerate() {
                let cell = &record[col];
                let v: f64 = cell.parse().map_err(|_| {
                    ingest_error(
                        &self.path,
                        self.lines[r],
                        format!("column '{}': cannot parse '{cell}' as a number", self.header[col]),
                    )
                })?;
                if !v.is_finite() {
                    return Err(ingest_error(
                        &self.path,
                        self.lines[r],
                        format!("column '{}': value '{cell}' is not finite", self.header[col]),
                    ));
                }
                out[[r, c]] = v;
            }
        }
        Ok(out)
    }

    fn integers(&self, col: usize) -> Result<Vec<i64>> {
        self.rows
            .iter()
            .zip(&self.lines)
            .map(|(record, &line)| {
                parse_group_id(&record[col]).ok_or_else(|| {
                    ingest_error(
                        &self.path,
                        line,
                        format!("group column '{}': '{}' is not an integer", self.header[col], &record[col]),
                    )
                })
            })
            .collect()
    }
}

/// Integer ids, also written in float notation such as `3.0` or `3e0`.
fn parse_group_id(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    let v: f64 = cell.parse().ok()?;
    (v.fract() == 0.0 && v.abs() < 2f64.powi(53)).then_some(v as i64)
}

fn check_nonempty(t: &Table, columns: &[usize], what: &str) -> Result<()> {
    if columns.is_empty() {
        return Err(ingest_error(&t.path, 1, format!("no {what} columns")));
    }
    Ok(())
}

fn take_groups(tables: &[&Table], name: &str) -> Result<(usize, usize, Vec<i64>)> {
    for (i, t) in tables.iter().enumerate() {
        if let Some(col) = t.column(name) {
            return Ok((i, col, t.integers(col)?));
        }
    }
    Err(ingest_error(&tables[0].path, 1, format!("group column '{name}' not found")))
}

/// Reads features, targets and optional structure ids from comma-separated files.
pub fn ingest(opts: &IngestOptions) -> Result<DataSet> {
    let mut ds = match &opts.files {
        InputFiles::Combined(path) => {
            let t = read_table(path)?;
            let group = opts.groups.as_deref().map(|g| take_groups(&[&t], g)).transpose()?;
            let group_col = group.as_ref().map(|g| g.1);
            let (mut feats, mut targs) = (Vec::new(), Vec::new());
            for (i, h) in t.header.iter().enumerate() {
                if Some(i) == group_col {
                    continue;
                }
                if h.starts_with(TARGET_PREFIX) {
                    targs.push(i);
                } else {
                    feats.push(i);
                }
            }
            check_nonempty(&t, &feats, "feature")?;
            check_nonempty(&t, &targs, "target")?;
            DataSet {
                feature_names: feats.iter().map(|&i| t.header[i].clone()).collect(),
                x: t.numeric(&feats)?,
                target_names: targs.iter().map(|&i| t.header[i][TARGET_PREFIX.len()..].to_string()).collect(),
                y: t.numeric(&targs)?,
                groups: group.map(|g| g.2),
            }
        }
        InputFiles::Separate { features, targets } => {
            let f = read_table(features)?;
            let t = read_table(targets)?;
            if f.rows.len() != t.rows.len() {
                let (longer, n) = if f.rows.len() > t.rows.len() { (&f, t.rows.len()) } else { (&t, f.rows.len()) };
                return Err(ingest_error(
                    &longer.path,
                    longer.lines[n],
                    format!("{} has {} data rows but {} has {}", f.path, f.rows.len(), t.path, t.rows.len()),
                ));
            }
            let group = opts.groups.as_deref().map(|g| take_groups(&[&f, &t], g)).transpose()?;
            let group_at = group.as_ref().map(|g| (g.0, g.1));
            let skip = |table: usize| move |&i: &usize| group_at != Some((table, i));
            let feats: Vec<usize> = (0..f.header.len()).filter(skip(0)).collect();
            let targs: Vec<usize> = (0..t.header.len()).filter(skip(1)).collect();
            check_nonempty(&f, &feats, "feature")?;
            check_nonempty(&t, &targs, "target")?;
            DataSet {
                feature_names: feats.iter().map(|&i| f.header[i].clone()).collect(),
                x: f.numeric(&feats)?,
                target_names: targs.iter().map(|&i| t.header[i].clone()).collect(),
                y: t.numeric(&targs)?,
                groups: group.map(|g| g.2),
            }
        }
    };
    if opts.per_atom_targets {
        let (g, _) = ds
            .group_index()?
            .ok_or_else(|| Error::invalid("per-atom targets need a group column"))?;
        let counts = g.counts();
        for (mut row, &s) in ds.y.axis_iter_mut(Axis(0)).zip(g.assignments()) {
            row *= counts[s] as f64;
        }
    }
    Ok(ds)
}

/// Train and test row indices, each ascending. With groups, whole structures
/// are assigned to one side.
pub fn split_indices(
    n_samples: usize,
    groups: Option<&GroupIndex>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("split fraction must lie in (0, 1], got {fraction}")));
    }
    if let Some(g) = groups {
        if g.n_environments() != n_samples {
            return Err(Error::invalid("group index does not cover every sample"));
        }
    }
    let n_units = groups.map_or(n_samples, GroupIndex::n_structures);
    if n_units == 0 {
        return Err(Error::invalid("cannot split an empty data set"));
    }
    let mut units: Vec<usize> = (0..n_units).collect();
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * n_units as f64).round() as usize).clamp(1, n_units);
    let mut in_train = vec![false; n_units];
    for &u in &units[..n_train] {
        in_train[u] = true;
    }
    let unit_of = |i: usize| groups.map_or(i, |g| g.assignments()[i]);
    Ok((0..n_samples).partition(|&i| in_train[unit_of(i)]))
}

pub fn split(ds: &DataSet, fraction: f64, seed: u64) -> Result<(DataSet, DataSet)> {
    let groups = ds.group_index()?;
    let (train, test) = split_indices(ds.n_samples(), groups.as_ref().map(|g| &g.0), fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn combined(contents: &str) -> (tempfile::NamedTempFile, IngestOptions) {
        let f = file(contents);
        let opts = IngestOptions::new(InputFiles::Combined(f.path().to_path_buf()));
        (f, opts)
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Ingest { line, .. } => line,
            other => panic!("expected an ingest error, got {other:?}"),
        }
    }

    #[test]
    fn three_rows() {
        let (_f, opts) = combined("a,b,targets:e\n1,2,3\n4,5,6\n7,8,9\n");
        let ds = ingest(&opts).unwrap();
        assert_eq!(ds.x.dim(), (3, 2));
        assert_eq!(ds.y.dim(), (3, 1));
        assert_eq!(ds.target_names, vec!["e"]);
        assert_eq!(ds.y[[2, 0]], 9.0);
    }

    #[test]
    fn separate_files_and_groups() {
        let f = file("s,a\n0,1\n0,2\n1,3\n");
        let t = file("e\n1\n1\n2\n");
        let mut opts = IngestOptions::new(InputFiles::Separate {
            features: f.path().into(),
            targets: t.path().into(),
        });
        opts.groups = Some("s".into());
        let ds = ingest(&opts).unwrap();
        assert_eq!(ds.feature_names, vec!["a"]);
        let (g, _) = ds.group_index().unwrap().unwrap();
        assert_eq!(g.n_structures(), 2);

        opts.per_atom_targets = true;
        let ds = ingest(&opts).unwrap();
        assert_eq!(ds.y.column(0).to_vec(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn malformed_inputs() {
        let (_f, opts) = combined("a,targets:e\n");
        assert_eq!(line_of(ingest(&opts).unwrap_err()), 1);
        let (_f, opts) = combined("a,targets:e\n1,2\n3\n");
        assert_eq!(line_of(ingest(&opts).unwrap_err()), 3);
        let (_f, opts) = combined("a,targets:e\n1,2\n3,x\n");
        assert_eq!(line_of(ingest(&opts).unwrap_err()), 3);

        let f = file("a\n1\n2\n3\n");
        let t = file("e\n1\n2\n");
        let opts = IngestOptions::new(InputFiles::Separate {
            features: f.path().into(),
            targets: t.path().into(),
        });
        assert_eq!(line_of(ingest(&opts).unwrap_err()), 4);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (train, test) = split_indices(10, None, 0.5, 3).unwrap();
        assert_eq!((train.len(), test.len()), (5, 5));
        assert_eq!(split_indices(10, None, 0.5, 3).unwrap(), (train, test));
        assert!(split_indices(10, None, 0.0, 3).is_err());
    }

    #[test]
    fn grouped_split_keeps_structures_whole() {
        let (g, _) = GroupIndex::from_labels(&[0, 0, 1, 1, 1, 2, 3, 3]).unwrap();
        let (train, test) = split_indices(8, Some(&g), 0.5, 11).unwrap();
        let side = |rows: &[usize]| rows.iter().map(|&i| g.assignments()[i]).collect::<std::collections::BTreeSet<_>>();
        assert!(side(&train).is_disjoint(&side(&test)));
        assert_eq!(side(&train).len(), 2);
    }
}
