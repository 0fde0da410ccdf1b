//! System file schema.
//!
//! ```json
//! {"kind":"ss","A":[[..]],"B":[[..]],"C":[[..]],"D":[[..]]}
//! {"kind":"modal","output":"position","modes":[{"omega":1,"kappa":0.1,"psi":[1]}]}
//! {"kind":"uncertain","A":[[..]],"B1":[[..]],"B2":[[..]],"C1":[[..]]}
//! ```

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nicontrol::numerics::{self, Mat};
use nicontrol::synthesis::UncertainPlant;
use nicontrol::{ModalModel, Mode, OutputKind, StateSpace};
use serde::{Deserialize, Serialize};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemFile {
    Ss {
        #[serde(rename = "A")]
        a: Rows,
        #[serde(rename = "B")]
        b: Rows,
        #[serde(rename = "C")]
        c: Rows,
        #[serde(rename = "D")]
        d: Rows,
    },
    Modal {
        output: Output,
        modes: Vec<ModeEntry>,
    },
    Uncertain {
        #[serde(rename = "A")]
        a: Rows,
        #[serde(rename = "B1")]
        b1: Rows,
        #[serde(rename = "B2")]
        b2: Rows,
        #[serde(rename = "C1")]
        c1: Rows,
    },
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Position,
    Velocity,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub omega: f64,
    pub kappa: f64,
    pub psi: Vec<f64>,
}

/// Row-major matrix; `[]` is read as zero rows with `cols` columns.
pub fn to_mat(rows: &Rows, field: &str, cols_if_empty: usize) -> Result<Mat> {
    if rows.is_empty() {
        return Ok(Mat::zeros(0, cols_if_empty));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        bail!("field {field}: rows have different lengths");
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    numerics::matrix(rows.len(), cols, &flat).map_err(|e| anyhow!("field {field}: {e}"))
}

pub fn from_mat(m: &Mat) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn parse(text: &str) -> Result<SystemFile> {
    if text.trim().is_empty() {
        bail!("system file is empty");
    }
    Ok(serde_json::from_str(text)?)
}

pub fn read(path: &Path) -> Result<SystemFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

impl SystemFile {
    pub fn state_space(&self) -> Result<StateSpace> {
        match self {
            SystemFile::Ss { a, b, c, d } => {
                let d = to_mat(d, "D", 0)?;
                let a = to_mat(a, "A", 0)?;
                let n = a.nrows();
                // Empty B/C rows are only meaningful when A is empty.
                let b = if b.is_empty() { Mat::zeros(n, d.ncols()) } else { to_mat(b, "B", 0)? };
                let c = if c.is_empty() || c.iter().all(|r| r.is_empty()) {
                    Mat::zeros(d.nrows(), n)
                } else {
                    to_mat(c, "C", 0)?
                };
                Ok(StateSpace::new(a, b, c, d)?)
            }
            SystemFile::Modal { output, modes } => {
                let channels = modes.first().map(|m| m.psi.len()).ok_or_else(|| anyhow!("field modes: empty"))?;
                let modes = modes
                    .iter()
                    .map(|m| Mode { omega: m.omega, kappa: m.kappa, psi: m.psi.clone() })
                    .collect();
                let kind = match output {
                    Output::Position => OutputKind::Position,
                    Output::Velocity => OutputKind::Velocity,
                };
                Ok(ModalModel::new(channels, modes, kind)?.to_state_space())
            }
            SystemFile::Uncertain { .. } => bail!("expected a system of kind \"ss\" or \"modal\""),
        }
    }

    pub fn uncertain_plant(&self) -> Result<UncertainPlant> {
        match self {
            SystemFile::Uncertain { a, b1, b2, c1 } => {
                let a = to_mat(a, "A", 0)?;
                Ok(UncertainPlant::new(a, to_mat(b1, "B1", 0)?, to_mat(b2, "B2", 0)?, to_mat(c1, "C1", 0)?)?)
            }
            _ => bail!("expected a plant of kind \"uncertain\""),
        }
    }
}
