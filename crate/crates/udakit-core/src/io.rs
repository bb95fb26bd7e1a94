//! JSON state files.
//!
//! Density matrices and general operators:
//! `{ "dims": [d1, ..., dn], "matrix": [[[re, im], ...], ...] }` with D x D
//! entries row-major. Kets use `"vector": [[re, im], ...]`. Traceless
//! Hermitian correlation dumps carry `"trace0": true` and skip the state
//! invariants. Floats are written in shortest round-trip form, so reading a
//! file back reproduces the exact binary64 values.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dims::DimProfile;
use crate::tensor::{DensityMatrix, Ket, Operator};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<[f64; 2]>>,
    #[serde(rename = "trace0", skip_serializing_if = "Option::is_none")]
    pub trace0: Option<bool>,
}

/// A successfully validated state file.
#[derive(Debug, Clone)]
pub enum LoadedState {
    Density(DensityMatrix),
    Ket(Ket),
    /// Traceless Hermitian operator (a correlation dump).
    Traceless(Operator),
}

impl LoadedState {
    pub fn profile(&self) -> &DimProfile {
        match self {
            LoadedState::Density(d) => d.profile(),
            LoadedState::Ket(k) => k.profile(),
            LoadedState::Traceless(o) => o.profile(),
        }
    }

    pub fn into_density(self) -> Result<DensityMatrix> {
        match self {
            LoadedState::Density(d) => Ok(d),
            LoadedState::Ket(k) => Ok(k.projector()),
            LoadedState::Traceless(_) => Err(Error::StateFile(
                "expected a state, found a traceless correlation dump".into(),
            )),
        }
    }

    pub fn into_ket(self) -> Result<Ket> {
        match self {
            LoadedState::Ket(k) => Ok(k),
            _ => Err(Error::StateFile("expected a ket file".into())),
        }
    }
}

fn matrix_to_rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn density_to_file(state: &DensityMatrix) -> StateFile {
    StateFile {
        dims: state.profile().dims().to_vec(),
        matrix: Some(matrix_to_rows(state.matrix())),
        vector: None,
        trace0: None,
    }
}

pub fn ket_to_file(ket: &Ket) -> StateFile {
    StateFile {
        dims: ket.profile().dims().to_vec(),
        matrix: None,
        vector: Some(ket.amplitudes().iter().map(|z| [z.re, z.im]).collect()),
        trace0: None,
    }
}

pub fn traceless_to_file(op: &Operator) -> StateFile {
    StateFile {
        dims: op.profile().dims().to_vec(),
        matrix: Some(matrix_to_rows(op.matrix())),
        vector: None,
        trace0: Some(true),
    }
}

/// Validate a parsed state file, reporting which invariant failed.
pub fn validate(file: &StateFile) -> Result<LoadedState> {
    let profile = DimProfile::new(file.dims.clone())?;
    let d = profile.total_dim();
    match (&file.matrix, &file.vector) {
        (Some(_), Some(_)) => Err(Error::StateFile(
            "file carries both a matrix and a vector".into(),
        )),
        (None, None) => Err(Error::StateFile(
            "file carries neither a matrix nor a vector".into(),
        )),
        (None, Some(v)) => {
            if v.len() != d {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            let amps = DVector::from_iterator(d, v.iter().map(|&[re, im]| Complex64::new(re, im)));
            Ok(LoadedState::Ket(Ket::new(amps, profile)?))
        }
        (Some(rows), None) => {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    got: rows.len(),
                });
            }
            let m = DMatrix::from_fn(d, d, |i, j| {
                let [re, im] = rows[i][j];
                Complex64::new(re, im)
            });
            let op = Operator::new(m, profile)?;
            if file.trace0 == Some(true) {
                let herm = op.hermiticity_defect();
                if herm > 1e-12 {
                    return Err(Error::NotHermitian { max_dev: herm });
                }
                let tr = op.trace();
                if tr.norm() > 1e-10 {
                    return Err(Error::StateFile(format!(
                        "trace0 operator has trace magnitude {:.3e}",
                        tr.norm()
                    )));
                }
                Ok(LoadedState::Traceless(op))
            } else {
                Ok(LoadedState::Density(DensityMatrix::new(op)?))
            }
        }
    }
}

pub fn save(path: &Path, file: &StateFile) -> Result<()> {
    let json = serde_json::to_string_pretty(file)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<LoadedState> {
    let text = fs::read_to_string(path)?;
    let file: StateFile = serde_json::from_str(&text)?;
    validate(&file)
}
