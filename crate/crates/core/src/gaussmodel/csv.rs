//! Plain CSV matrices (no header, LF endings, 17 significant digits) and the
//! three-file covariance model layout: `<prefix>.eigenvalues.csv`,
//! `<prefix>.basis.csv` and a `<prefix>.json` sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{CovarianceModel, Provenance};
use crate::error::{Error, Result};
use crate::symkernels::SymMatrix;

/// Formats a double with 17 significant digits, which round-trips exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text into a rectangular matrix. `origin` is only used in
/// error messages.
pub fn parse_matrix_csv(text: &str, origin: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let lines: Vec<&str> = text.split('\n').collect();
    let last_content = lines.iter().rposition(|l| !l.trim().is_empty());
    let Some(last) = last_content else {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: "empty matrix".into(),
        });
    };
    for (idx, line) in lines[..=last].iter().enumerate() {
        let lineno = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: lineno,
                message: "blank line".into(),
            });
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno,
                message: format!("column {}: cannot parse {:?} as a number", col + 1, field),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno,
                    message: format!("column {}: non-finite value", col + 1),
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno,
                    message: format!("row has {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn save_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, matrix_to_csv(m)).map_err(|e| Error::io(path, e))
}

pub fn load_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text, path)
}

pub fn save_sym_csv(path: &Path, m: &SymMatrix) -> Result<()> {
    save_matrix_csv(path, m.as_matrix())
}

pub fn load_sym_csv(path: &Path) -> Result<SymMatrix> {
    let m = load_matrix_csv(path)?;
    if m.nrows() != m.ncols() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: m.nrows().min(m.ncols()) + 1,
            message: format!("matrix is {}x{}, expected square", m.nrows(), m.ncols()),
        });
    }
    SymMatrix::new(m)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    dim: usize,
    provenance: Provenance,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn model_paths(prefix: &Path) -> [PathBuf; 3] {
    [
        with_suffix(prefix, ".eigenvalues.csv"),
        with_suffix(prefix, ".basis.csv"),
        with_suffix(prefix, ".json"),
    ]
}

pub fn save_model(prefix: &Path, model: &CovarianceModel) -> Result<()> {
    let [ev_path, basis_path, json_path] = model_paths(prefix);
    let ev = DMatrix::from_row_slice(1, model.dim(), model.eigenvalues());
    save_matrix_csv(&ev_path, &ev)?;
    save_matrix_csv(&basis_path, model.basis())?;
    let sidecar = Sidecar {
        dim: model.dim(),
        provenance: model.provenance(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Json {
        path: json_path.clone(),
        source: e,
    })?;
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))
}

pub fn load_model(prefix: &Path) -> Result<CovarianceModel> {
    let [ev_path, basis_path, json_path] = model_paths(prefix);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: json_path.clone(),
        source: e,
    })?;
    let ev = load_matrix_csv(&ev_path)?;
    if ev.nrows() != 1 || ev.ncols() != sidecar.dim {
        return Err(Error::Parse {
            path: ev_path,
            line: 1,
            message: format!("expected one row of {} eigenvalues", sidecar.dim),
        });
    }
    let basis = load_matrix_csv(&basis_path)?;
    if basis.nrows() != sidecar.dim || basis.ncols() != sidecar.dim {
        return Err(Error::Parse {
            path: basis_path,
            line: 1,
            message: format!("expected a {0}x{0} basis", sidecar.dim),
        });
    }
    CovarianceModel::from_spectrum(ev.iter().copied().collect(), basis, sidecar.provenance)
}

/// Loads a dense covariance matrix CSV as a model tagged `file`.
pub fn load_covariance_csv(path: &Path) -> Result<CovarianceModel> {
    let m = load_sym_csv(path)?;
    Ok(CovarianceModel::from_sym_clipped(&m, Provenance::File)?.with_provenance(Provenance::File))
}

/// CSV rows with a header line, for tabular reports.
pub fn write_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}
