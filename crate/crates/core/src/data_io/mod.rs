//! Dataset ingestion, missing-value and outlier handling, and result tables.
//!
//! File schemas (all CSV with a header row):
//!
//! * points: `id,x,y[,z...]`
//! * signal: `id,value`, with `NA` (or an empty cell) marking an invalid sample
//! * distances: square matrix, header `id,<id_1>,...,<id_n>`, then one row
//!   per node starting with its id
//! * node lists (e.g. ground-truth sources): a single `id` column

mod table;

pub use table::{format_float, read_results, write_results, Format, Table, Value};

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::solver::Observation;

/// A per-node signal where some samples may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedSignal {
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl FlaggedSignal {
    pub fn new(values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != valid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values but {} validity flags",
                values.len(),
                valid.len()
            )));
        }
        if let Some(i) = (0..values.len()).find(|&i| valid[i] && !values[i].is_finite()) {
            return Err(Error::InvalidInput(format!(
                "valid entry {i} is not finite"
            )));
        }
        Ok(FlaggedSignal { values, valid })
    }

    pub fn fully_valid(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw values; invalid entries hold an unspecified placeholder.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.valid[i].then_some(self.values[i])
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| !v).count()
    }
}

/// Node geometry plus an observed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub coords: Option<Array2<f64>>,
    pub distances: Option<Array2<f64>>,
    pub signal: FlaggedSignal,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Position of a node id.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    /// Resolves ids to indices, failing on the first unknown id.
    pub fn indices_of(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.index_of(id).ok_or_else(|| {
                    Error::Schema(format!("node id '{id}' is not part of the dataset"))
                })
            })
            .collect()
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    }
}

fn parse_cell(path: &Path, row: usize, column: usize, cell: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            row,
            column,
            message: format!("'{cell}' is not a finite number"),
        }),
    }
}

fn check_header(path: &Path, header: &csv::StringRecord, expected: &str) -> Result<()> {
    match header.get(0) {
        Some(first) if first.eq_ignore_ascii_case(expected) => Ok(()),
        _ => Err(Error::Schema(format!(
            "{}: first column must be '{expected}', header is {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        ))),
    }
}

fn check_unique(path: &Path, ids: &[String]) -> Result<()> {
    let mut seen = HashMap::with_capacity(ids.len());
    for (row, id) in ids.iter().enumerate() {
        if let Some(prev) = seen.insert(id.as_str(), row) {
            return Err(Error::Schema(format!(
                "{}: duplicate id '{id}' on data rows {} and {}",
                path.display(),
                prev + 1,
                row + 1
            )));
        }
    }
    Ok(())
}

/// Reads an `id,x,y[,...]` file.
pub fn read_points(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, "id")?;
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(Error::Schema(format!(
            "{}: points need at least one coordinate column",
            path.display()
        )));
    }
    let mut ids = Vec::new();
    let mut flat = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        if rec.len() != dim + 1 {
            return Err(Error::Schema(format!(
                "{}: data row {row} has {} cells, expected {}",
                path.display(),
                rec.len(),
                dim + 1
            )));
        }
        ids.push(rec[0].to_string());
        for c in 1..=dim {
            flat.push(parse_cell(path, row, c + 1, &rec[c])?);
        }
    }
    check_unique(path, &ids)?;
    let coords = Array2::from_shape_vec((ids.len(), dim), flat)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    Ok((ids, coords))
}

/// Reads an `id,value` file; `NA` and empty cells are invalid samples.
pub fn read_signal(path: &Path) -> Result<(Vec<String>, FlaggedSignal)> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, "id")?;
    if header.len() != 2 {
        return Err(Error::Schema(format!(
            "{}: signal files have exactly two columns (id,value)",
            path.display()
        )));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut valid = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        if rec.len() != 2 {
            return Err(Error::Schema(format!(
                "{}: data row {row} has {} cells, expected 2",
                path.display(),
                rec.len()
            )));
        }
        ids.push(rec[0].to_string());
        let cell = &rec[1];
        if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
            values.push(f64::NAN);
            valid.push(false);
        } else {
            values.push(parse_cell(path, row, 2, cell)?);
            valid.push(true);
        }
    }
    check_unique(path, &ids)?;
    Ok((ids, FlaggedSignal::new(values, valid)?))
}

/// Reads a square distance matrix with an id header row.
pub fn read_distances(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, "id")?;
    let col_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = col_ids.len();
    let mut row_ids = Vec::with_capacity(n);
    let mut flat = Vec::with_capacity(n * n);
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        if rec.len() != n + 1 {
            return Err(Error::Schema(format!(
                "{}: data row {row} has {} cells, expected {}",
                path.display(),
                rec.len(),
                n + 1
            )));
        }
        row_ids.push(rec[0].to_string());
        for c in 1..=n {
            flat.push(parse_cell(path, row, c + 1, &rec[c])?);
        }
    }
    if row_ids != col_ids {
        return Err(Error::Schema(format!(
            "{}: row ids must match the header ids in the same order",
            path.display()
        )));
    }
    check_unique(path, &row_ids)?;
    let d = Array2::from_shape_vec((n, n), flat)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    Ok((row_ids, d))
}

/// Reads a single-column `id` list.
pub fn read_node_list(path: &Path) -> Result<Vec<String>> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, "id")?;
    let mut ids = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        ids.push(rec[0].to_string());
    }
    Ok(ids)
}

/// Permutation taking `ids` into the order of `reference`.
fn align(
    reference: &[String],
    reference_path: &Path,
    ids: &[String],
    path: &Path,
) -> Result<Vec<usize>> {
    if ids.len() != reference.len() {
        return Err(Error::Schema(format!(
            "row count mismatch: {} has {} nodes but {} has {}",
            reference_path.display(),
            reference.len(),
            path.display(),
            ids.len()
        )));
    }
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    reference
        .iter()
        .map(|id| {
            pos.get(id.as_str()).copied().ok_or_else(|| {
                Error::Schema(format!(
                    "id '{id}' from {} is missing in {}",
                    reference_path.display(),
                    path.display()
                ))
            })
        })
        .collect()
}

/// Loads a dataset. At least one of `points` and `distances` is required;
/// node order follows the points file when present.
pub fn load_dataset(
    points: Option<&Path>,
    signal: &Path,
    distances: Option<&Path>,
) -> Result<Dataset> {
    for path in points.into_iter().chain(Some(signal)).chain(distances) {
        if !path.is_file() {
            return Err(Error::Schema(format!(
                "input file {} does not exist",
                path.display()
            )));
        }
    }
    let (ids, ref_path, coords) = match (points, distances) {
        (Some(p), _) => {
            let (ids, c) = read_points(p)?;
            (ids, p.to_path_buf(), Some(c))
        }
        (None, Some(d)) => {
            let (ids, _) = read_distances(d)?;
            (ids, d.to_path_buf(), None)
        }
        (None, None) => {
            return Err(Error::Schema(
                "a points file or a distance matrix is required".into(),
            ))
        }
    };

    let (sig_ids, sig) = read_signal(signal)?;
    let perm = align(&ids, &ref_path, &sig_ids, signal)?;
    let values = perm.iter().map(|&i| sig.values()[i]).collect();
    let valid = perm.iter().map(|&i| sig.valid()[i]).collect();
    let signal = FlaggedSignal::new(values, valid)?;

    let distances = match distances {
        Some(d) => {
            let (d_ids, mat) = read_distances(d)?;
            let perm = align(&ids, &ref_path, &d_ids, d)?;
            let n = ids.len();
            Some(Array2::from_shape_fn((n, n), |(i, j)| mat[[perm[i], perm[j]]]))
        }
        None => None,
    };

    Ok(Dataset {
        ids,
        coords,
        distances,
        signal,
    })
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = create(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_points(path: &Path, ids: &[String], coords: &Array2<f64>) -> Result<()> {
    let axes = ["x", "y", "z"];
    let mut header = vec!["id".to_string()];
    header.extend((0..coords.ncols()).map(|c| {
        axes.get(c)
            .map_or_else(|| format!("x{c}"), |s| (*s).to_string())
    }));
    write_rows(
        path,
        &header,
        ids.iter().zip(coords.rows()).map(|(id, row)| {
            std::iter::once(id.clone())
                .chain(row.iter().map(|&v| format_float(v)))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn write_signal(path: &Path, ids: &[String], signal: &FlaggedSignal) -> Result<()> {
    let header = vec!["id".to_string(), "value".to_string()];
    write_rows(
        path,
        &header,
        ids.iter().enumerate().map(|(i, id)| {
            let v = signal.get(i).map_or_else(|| "NA".to_string(), format_float);
            [id.clone(), v]
        }),
    )
}

pub fn write_distances(path: &Path, ids: &[String], d: &Array2<f64>) -> Result<()> {
    let mut header = vec!["id".to_string()];
    header.extend(ids.iter().cloned());
    write_rows(
        path,
        &header,
        ids.iter().zip(d.rows()).map(|(id, row)| {
            std::iter::once(id.clone())
                .chain(row.iter().map(|&v| format_float(v)))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn write_node_list(path: &Path, ids: &[String]) -> Result<()> {
    write_rows(path, &["id".to_string()], ids.iter().map(|id| [id.clone()]))
}

/// Writes a dataset as `points.csv` / `signal.csv` (and `distances.csv`
/// when present) under `dir`; returns the written paths.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(c) = &data.coords {
        let p = dir.join("points.csv");
        write_points(&p, &data.ids, c)?;
        written.push(p);
    }
    let p = dir.join("signal.csv");
    write_signal(&p, &data.ids, &data.signal)?;
    written.push(p);
    if let Some(d) = &data.distances {
        let p = dir.join("distances.csv");
        write_distances(&p, &data.ids, d)?;
        written.push(p);
    }
    Ok(written)
}

/// Fills invalid samples with the edge-weighted mean of already-known
/// neighbours, sweeping (Jacobi style) until every entry is filled.
pub fn interpolate_invalid(signal: &FlaggedSignal, g: &Graph) -> Result<Array1<f64>> {
    const MAX_SWEEPS: usize = 100;
    let n = g.n();
    if signal.len() != n {
        return Err(Error::InvalidInput(format!(
            "signal has {} entries for {n} nodes",
            signal.len()
        )));
    }
    let mut values: Vec<f64> = (0..n).map(|i| signal.get(i).unwrap_or(0.0)).collect();
    let mut known = signal.valid().to_vec();

    // every component with an invalid node needs a valid one
    let comps = g.components();
    let mut has_valid = vec![false; n];
    for i in 0..n {
        if known[i] {
            has_valid[comps[i]] = true;
        }
    }
    if let Some(node) = (0..n).find(|&i| !known[i] && !has_valid[comps[i]]) {
        return Err(Error::InterpolationFailure { node });
    }

    for _ in 0..MAX_SWEEPS {
        let pending: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
        if pending.is_empty() {
            break;
        }
        let updates: Vec<(usize, f64)> = pending
            .iter()
            .filter_map(|&i| {
                let (num, den) = g
                    .neighbors(i)
                    .iter()
                    .filter(|&&j| known[j])
                    .fold((0.0, 0.0), |(s, w), &j| {
                        let wij = g.weight(i, j);
                        (s + wij * values[j], w + wij)
                    });
                (den > 0.0).then(|| (i, num / den))
            })
            .collect();
        for (i, v) in updates {
            values[i] = v;
            known[i] = true;
        }
    }
    if let Some(node) = known.iter().position(|&k| !k) {
        return Err(Error::InterpolationFailure { node });
    }
    Ok(Array1::from(values))
}

/// How an outlier observation is neutralized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierMode {
    /// Zero the node's weight in the fidelity term.
    Mask,
    /// Replace the value by the edge-weighted mean of observed neighbours.
    Interpolate,
}

impl std::str::FromStr for OutlierMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mask" => Ok(OutlierMode::Mask),
            "interpolate" => Ok(OutlierMode::Interpolate),
            _ => Err(format!("unknown outlier mode '{s}' (expected mask or interpolate)")),
        }
    }
}

impl std::fmt::Display for OutlierMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutlierMode::Mask => "mask",
            OutlierMode::Interpolate => "interpolate",
        })
    }
}

/// Index of the largest observed value, lowest index on ties.
pub fn argmax_node(obs: &Observation) -> usize {
    let b = obs.b();
    (0..b.len())
        .filter(|&i| obs.is_observed(i))
        .fold(None, |best: Option<usize>, i| match best {
            Some(k) if b[k] >= b[i] => Some(k),
            _ => Some(i),
        })
        .unwrap_or(0)
}

pub fn remove_outlier(
    obs: &Observation,
    node: usize,
    mode: OutlierMode,
    g: &Graph,
) -> Result<Observation> {
    if node >= obs.n() {
        return Err(Error::InvalidInput(format!(
            "node {node} out of range for {} nodes",
            obs.n()
        )));
    }
    if g.n() != obs.n() {
        return Err(Error::InvalidInput(format!(
            "graph has {} nodes, observation has {}",
            g.n(),
            obs.n()
        )));
    }
    let mut out = obs.clone();
    match mode {
        OutlierMode::Mask => {
            if (0..obs.n()).all(|i| i == node || !obs.is_observed(i)) {
                return Err(Error::InvalidInput(format!(
                    "masking node {node} would leave no observed node"
                )));
            }
            out.set_masked(node);
        }
        OutlierMode::Interpolate => {
            let (num, den) = g
                .neighbors(node)
                .iter()
                .filter(|&&j| obs.is_observed(j))
                .fold((0.0, 0.0), |(s, w), &j| {
                    let wij = g.weight(node, j);
                    (s + wij * obs.b()[j], w + wij)
                });
            if den <= 0.0 {
                return Err(Error::InterpolationFailure { node });
            }
            out.set_value(node, num / den);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{objective, SolverConfig};
    use crate::graph::{normalized_laplacian, spectral_decomposition};
    use ndarray::array;
    use std::io::Write;

    fn path3() -> Graph {
        Graph::from_weights(array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap()
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn load_small_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let pts = write(dir.path(), "p.csv", "id,x,y\na,0,0\nb,1,0\nc,0,1\n");
        let sig = write(dir.path(), "s.csv", "id,value\nc,3\na,1\nb,NA\n");
        let ds = load_dataset(Some(&pts), &sig, None).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.ids, vec!["a", "b", "c"]);
        assert_eq!(ds.signal.get(0), Some(1.0));
        assert_eq!(ds.signal.get(1), None);
        assert_eq!(ds.signal.get(2), Some(3.0));
    }

    #[test]
    fn mismatched_ids_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let pts = write(dir.path(), "p.csv", "id,x,y\na,0,0\nb,1,0\n");
        let sig = write(dir.path(), "s.csv", "id,value\na,1\nz,2\n");
        let err = load_dataset(Some(&pts), &sig, None).unwrap_err();
        assert_eq!(err.category(), "schema");
        let sig = write(dir.path(), "s2.csv", "id,value\na,1\n");
        let msg = load_dataset(Some(&pts), &sig, None).unwrap_err().to_string();
        assert!(msg.contains("p.csv") && msg.contains("s2.csv"), "{msg}");
    }

    #[test]
    fn parse_error_location() {
        let dir = tempfile::tempdir().unwrap();
        let pts = write(dir.path(), "p.csv", "id,x,y\na,0,0\nb,1,oops\n");
        let sig = write(dir.path(), "s.csv", "id,value\na,1\nb,2\n");
        match load_dataset(Some(&pts), &sig, None).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_signal_file() {
        let dir = tempfile::tempdir().unwrap();
        let pts = write(dir.path(), "p.csv", "id,x\na,0\nb,1\n");
        let err = load_dataset(Some(&pts), &dir.path().join("nope.csv"), None).unwrap_err();
        assert!(err.to_string().contains("nope.csv"));
        assert_eq!(err.category(), "schema");
    }

    #[test]
    fn distances_are_reordered_to_points() {
        let dir = tempfile::tempdir().unwrap();
        let pts = write(dir.path(), "p.csv", "id,x\na,0\nb,1\n");
        let sig = write(dir.path(), "s.csv", "id,value\na,1\nb,2\n");
        let d = write(dir.path(), "d.csv", "id,b,a\nb,0,5\na,5,0\n");
        let ds = load_dataset(Some(&pts), &sig, Some(&d)).unwrap();
        assert_eq!(ds.distances.unwrap(), array![[0.0, 5.0], [5.0, 0.0]]);
        let ds = load_dataset(None, &sig, Some(&d)).unwrap();
        assert_eq!(ds.ids, vec!["b", "a"]);
        assert_eq!(ds.signal.get(0), Some(2.0));
    }

    #[test]
    fn interpolation_examples() {
        let g = path3();
        let s = FlaggedSignal::new(vec![1.0, f64::NAN, 3.0], vec![true, false, true]).unwrap();
        assert_eq!(interpolate_invalid(&s, &g).unwrap(), array![1.0, 2.0, 3.0]);

        let s = FlaggedSignal::fully_valid(vec![1.0, 5.0, 3.0]).unwrap();
        assert_eq!(interpolate_invalid(&s, &g).unwrap(), array![1.0, 5.0, 3.0]);

        let s = FlaggedSignal::new(vec![0.0; 3], vec![false; 3]).unwrap();
        assert_eq!(
            interpolate_invalid(&s, &g).unwrap_err().category(),
            "interpolation-failure"
        );
    }

    #[test]
    fn interpolation_propagates_along_chains() {
        let mut w = Array2::zeros((4, 4));
        for i in 0..3 {
            w[[i, i + 1]] = 1.0;
            w[[i + 1, i]] = 1.0;
        }
        let g = Graph::from_weights(w).unwrap();
        let s = FlaggedSignal::new(vec![4.0, 0.0, 0.0, 0.0], vec![true, false, false, false])
            .unwrap();
        assert_eq!(interpolate_invalid(&s, &g).unwrap(), array![4.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn outlier_modes() {
        let g = path3();
        let obs = Observation::new(array![1.0, 9.0, 3.0]).unwrap();
        let i = remove_outlier(&obs, 1, OutlierMode::Interpolate, &g).unwrap();
        assert_eq!(i.b(), array![1.0, 2.0, 3.0]);
        assert_eq!(i.mask(), obs.mask());

        let m = remove_outlier(&obs, 2, OutlierMode::Mask, &g).unwrap();
        assert_eq!(m.b(), obs.b());
        assert_eq!(m.mask(), array![1.0, 1.0, 0.0]);

        assert!(remove_outlier(&obs, 3, OutlierMode::Mask, &g).is_err());
        assert_eq!(argmax_node(&obs), 1);
    }

    #[test]
    fn masked_outlier_leaves_objective_independent_of_value() {
        let g = path3();
        let d = spectral_decomposition(normalized_laplacian(&g).unwrap().view()).unwrap();
        let cfg = SolverConfig::default();
        let x = array![0.2, 0.0, 0.7];
        let energies: Vec<f64> = [3.0, -50.0, 1e3]
            .iter()
            .map(|&v| {
                let obs = Observation::new(array![1.0, 0.5, v]).unwrap();
                let m = remove_outlier(&obs, 2, OutlierMode::Mask, &g).unwrap();
                objective(x.view(), 1.0, &m, &cfg, &d).unwrap()
            })
            .collect();
        assert_eq!(energies[0], energies[1]);
        assert_eq!(energies[0], energies[2]);
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        let obs = Observation::new(array![2.0, 5.0, 5.0]).unwrap();
        assert_eq!(argmax_node(&obs), 1);
    }
}
