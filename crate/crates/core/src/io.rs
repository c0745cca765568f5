//! File formats.
//!
//! * windows: JSON array `[{"id": "w1", "intervals": [[0.0, 2.0]]}, …]`;
//! * atom sets: JSON serialization of [`TimeAtomSet`];
//! * matrices: CSV with a header row and one labeled row per window or atom.
//!   The first header cell names the row kind (`window` or `atom`), the rest
//!   name the columns. Numbers are written in shortest round-trip form.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reconstruction::ReconstructionResult;
use crate::wds::{DistributionProcess, WindowObservations};
use crate::window::{IncidenceMatrix, IntervalWindow};

pub fn read_windows<R: Read>(reader: R) -> Result<Vec<IntervalWindow>> {
    serde_json::from_reader(reader).map_err(|e| Error::Parse(format!("windows JSON: {e}")))
}

pub fn read_windows_file(path: &Path) -> Result<Vec<IntervalWindow>> {
    read_windows(open(path)?)
}

pub(crate) fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// A matrix with row and column labels, as stored in CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub row_kind: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: DMatrix<f64>,
}

impl LabeledMatrix {
    pub fn new(row_kind: &str, row_labels: Vec<String>, col_labels: Vec<String>, values: DMatrix<f64>) -> Self {
        LabeledMatrix { row_kind: row_kind.to_string(), row_labels, col_labels, values }
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.row_kind.clone()];
        header.extend(self.col_labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.row_labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend(self.values.row(i).iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write(create(path)?)
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::Parse("matrix CSV needs a label column and at least one value column".into()));
        }
        let row_kind = header[0].to_string();
        let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut row_labels = Vec::new();
        let mut data = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Parse(format!("row {} has {} fields, expected {}", line + 1, rec.len(), header.len())));
            }
            row_labels.push(rec[0].to_string());
            for field in rec.iter().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", line + 1)))?;
                data.push(v);
            }
        }
        if row_labels.is_empty() {
            return Err(Error::EmptyInput("matrix CSV has no rows"));
        }
        let values = DMatrix::from_row_slice(row_labels.len(), col_labels.len(), &data);
        Ok(LabeledMatrix { row_kind, row_labels, col_labels, values })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read(open(path)?)
    }
}

fn atom_labels(n: usize) -> Vec<String> {
    (0..n).map(|t| format!("a{t}")).collect()
}

fn category_labels(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("x{j}")).collect()
}

pub fn incidence_to_csv(inc: &IncidenceMatrix) -> LabeledMatrix {
    LabeledMatrix::new("window", inc.window_ids().to_vec(), atom_labels(inc.n_atoms()), inc.matrix().clone())
}

pub fn incidence_from_csv(m: LabeledMatrix) -> Result<IncidenceMatrix> {
    IncidenceMatrix::with_ids(m.values, m.row_labels)
}

pub fn observations_to_csv(obs: &WindowObservations) -> LabeledMatrix {
    LabeledMatrix::new(
        "window",
        obs.incidence().window_ids().to_vec(),
        category_labels(obs.n_categories()),
        obs.r().clone(),
    )
}

/// Pairs an `R` matrix with its incidence; window labels must agree.
pub fn observations_from_csv(m: LabeledMatrix, incidence: IncidenceMatrix) -> Result<WindowObservations> {
    if m.row_labels != incidence.window_ids() {
        return Err(Error::DimensionMismatch("R and incidence list different windows".into()));
    }
    WindowObservations::new(m.values, incidence)
}

pub fn weights_to_csv(p: &DVector<f64>) -> LabeledMatrix {
    LabeledMatrix::new("atom", atom_labels(p.len()), vec!["p".into()], DMatrix::from_column_slice(p.len(), 1, p.as_slice()))
}

pub fn distributions_to_csv(d: &DMatrix<f64>) -> LabeledMatrix {
    LabeledMatrix::new("atom", atom_labels(d.nrows()), category_labels(d.ncols()), d.clone())
}

pub fn process_from_csv(p: LabeledMatrix, d: LabeledMatrix) -> Result<DistributionProcess> {
    if p.values.ncols() != 1 {
        return Err(Error::Parse("P CSV must have exactly one value column".into()));
    }
    DistributionProcess::new(p.values.column(0).into_owned(), d.values)
}

/// JSON form of a reconstruction result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub solver: String,
    pub variant: String,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ResultDocument {
    pub fn new(solver: &str, variant: &str, res: &ReconstructionResult) -> Self {
        let d = res.process.distributions();
        ResultDocument {
            solver: solver.into(),
            variant: variant.into(),
            p: res.process.weights().iter().copied().collect(),
            d: d.row_iter().map(|r| r.iter().copied().collect()).collect(),
            objective: res.objective,
            objective_trace: res.objective_trace.clone(),
            iterations: res.iterations,
            converged: res.converged,
        }
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_json(value, create(path)?)
}
