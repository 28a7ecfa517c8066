//! Trajectory CSV and JSON document reading and writing.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::constraints::{ConstraintEnvelope, ENVELOPE_FORMAT_VERSION};
use crate::geometry::{Frame, FrameKind, GeometryError, Trajectory};
use crate::keyframe::ScenarioModel;

pub const TRAJECTORY_COLUMNS: [&str; 6] = ["t", "x", "y", "heading", "vx", "vy"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    BadValue { row: usize, column: String, message: String },
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("invalid trajectory: {0}")]
    Trajectory(#[from] GeometryError),
    #[error("invalid document: {0}")]
    Document(String),
}

/// Parses `t,x,y,heading,vx,vy` rows in any column order. Row numbers in
/// errors count the header as row 1.
pub fn read_trajectory_csv(text: &str, kind: FrameKind) -> Result<Trajectory, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IoError::BadRow { row: 1, message: e.to_string() })?
        .clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(TRAJECTORY_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn(name.to_string()))?;
    }
    let mut frames = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| IoError::BadRow { row, message: e.to_string() })?;
        let mut v = [0.0f64; 6];
        for ((slot, &col), name) in v.iter_mut().zip(&idx).zip(TRAJECTORY_COLUMNS) {
            let field = rec.get(col).ok_or_else(|| IoError::BadValue {
                row,
                column: name.into(),
                message: "missing value".into(),
            })?;
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| IoError::BadValue {
                    row,
                    column: name.into(),
                    message: format!("`{field}` is not a finite number"),
                })?;
        }
        frames.push(Frame { t: v[0], x: v[1], y: v[2], heading: v[3], vx: v[4], vy: v[5] });
    }
    Ok(Trajectory::new(frames, kind)?)
}

pub fn write_trajectory_csv(traj: &Trajectory) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_COLUMNS).expect("in-memory write");
    for f in traj.frames() {
        w.write_record([f.t, f.x, f.y, f.heading, f.vx, f.vy].map(|x| x.to_string()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn load_trajectory(path: &Path, kind: FrameKind) -> Result<Trajectory, IoError> {
    read_trajectory_csv(&read_text(path)?, kind)
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path)
        .map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Document(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<ScenarioModel, IoError> {
    let model: ScenarioModel = from_json(text)?;
    model.validate().map_err(|e| IoError::Document(e.to_string()))?;
    Ok(model)
}

pub fn envelope_from_json(text: &str) -> Result<ConstraintEnvelope, IoError> {
    let env: ConstraintEnvelope = from_json(text)?;
    if env.format_version != ENVELOPE_FORMAT_VERSION {
        return Err(IoError::Document(format!("unsupported format_version {}", env.format_version)));
    }
    if env.grid.is_empty() {
        return Err(IoError::Document("envelope has no grid points".into()));
    }
    Ok(env)
}
