//! On-disk artifacts: trajectory/trace CSVs, model and board JSON, episode
//! reports. Everything is deterministic — rerunning a command with the same
//! seed and configuration reproduces every file byte for byte — and every
//! artifact embeds the hash of the configuration that produced it (a `#`
//! comment line in CSVs, a `config_hash` field in JSON).

use crate::error::{Error, Result};
use crate::executive::{EpisodeReport, StepRecord, TraceRow};
use crate::koopman::{KoopmanModel, Provenance, Trajectory};
use crate::lift::{CONTROL_DIM, LIFT_DIM};
use crate::mpc::LinearModel;
use crate::planner::BoardLayout;
use crate::types::{ControlCommand, TwistAngle, WireState};
use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::Path;

/// SHA-256 of the canonical JSON serialization of a configuration value.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(&json);
    hex::encode(hasher.finalize())
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Write step records as CSV: a config-hash comment, the mandatory header,
/// then one row per step (the final state row carries zero controls).
pub fn write_steps_csv(path: &Path, rows: &[StepRecord], hash: &str) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# config_hash={hash}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Convert a trajectory into CSV step rows (states + the controls between
/// them; the terminal row has zero controls).
pub fn trajectory_to_rows(traj: &Trajectory) -> Vec<StepRecord> {
    let states = traj.states();
    let controls = traj.controls();
    states
        .iter()
        .enumerate()
        .map(|(t, (s, phi))| {
            let u = controls.get(t).copied().unwrap_or(ControlCommand::ZERO);
            StepRecord {
                t,
                x: s.x,
                y: s.y,
                theta: s.theta,
                f: s.f,
                phi: phi.0,
                dx: u.dx,
                dy: u.dy,
                dtheta: u.dtheta,
            }
        })
        .collect()
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, hash: &str) -> Result<()> {
    write_steps_csv(path, &trajectory_to_rows(traj), hash)
}

/// Read a trajectory CSV back. Parse failures name the file and line.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let file = fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let mut states = Vec::new();
    let mut controls = Vec::new();
    for record in reader.deserialize::<StepRecord>() {
        let row = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line())
                .unwrap_or_default();
            parse_error(path, line, e.to_string())
        })?;
        if !(row.f.is_finite() && row.f >= 0.0) {
            return Err(parse_error(path, row.t as u64 + 2, "tension must be finite and ≥ 0"));
        }
        states.push((
            WireState::new(row.x, row.y, row.theta, row.f),
            TwistAngle(row.phi),
        ));
        controls.push(ControlCommand::new(row.dx, row.dy, row.dtheta));
    }
    if states.is_empty() {
        return Err(parse_error(path, 0, "no rows"));
    }
    // the terminal row's control columns are padding
    controls.pop();
    Trajectory::new(states, controls)
}

/// Write a tension-tracking trace CSV (columns t, f, f_d, x, y, theta, phi).
pub fn write_trace_csv(path: &Path, rows: &[TraceRow], hash: &str) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# config_hash={hash}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.line() as u64, e.to_string()))
}

/// Serialized Koopman model: lift-spec identifier, row-major K and L, and
/// dataset provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KoopmanModelFile {
    pub lift_spec: String,
    /// 20×20, row-major.
    pub k: Vec<Vec<f64>>,
    /// 20×3, row-major.
    pub l: Vec<Vec<f64>>,
    pub provenance: Provenance,
    #[serde(default)]
    pub config_hash: Option<String>,
}

impl KoopmanModelFile {
    pub fn from_model(model: &KoopmanModel, hash: Option<String>) -> Self {
        Self {
            lift_spec: model.lift_spec.clone(),
            k: matrix_rows(&model.k),
            l: matrix_rows(&model.l),
            provenance: model.provenance.clone(),
            config_hash: hash,
        }
    }

    pub fn into_model(self) -> Result<KoopmanModel> {
        if self.lift_spec != crate::lift::LIFT_SPEC {
            return Err(Error::Config(format!(
                "unsupported lift_spec `{}` (expected `{}`)",
                self.lift_spec,
                crate::lift::LIFT_SPEC
            )));
        }
        let k = rows_to_matrix::<LIFT_DIM, LIFT_DIM>(&self.k)
            .ok_or_else(|| Error::Config("K must be 20×20".into()))?;
        let l = rows_to_matrix::<LIFT_DIM, CONTROL_DIM>(&self.l)
            .ok_or_else(|| Error::Config("L must be 20×3".into()))?;
        Ok(KoopmanModel {
            k,
            l,
            lift_spec: self.lift_spec,
            provenance: self.provenance,
        })
    }
}

/// Serialized raw-state linear baseline model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModelFile {
    /// 4×4, row-major.
    pub a: Vec<Vec<f64>>,
    /// 4×3, row-major.
    pub b: Vec<Vec<f64>>,
    pub provenance: Provenance,
    #[serde(default)]
    pub config_hash: Option<String>,
}

impl LinearModelFile {
    pub fn from_model(model: &LinearModel, hash: Option<String>) -> Self {
        Self {
            a: matrix_rows(&model.a),
            b: matrix_rows(&model.b),
            provenance: model.provenance.clone(),
            config_hash: hash,
        }
    }

    pub fn into_model(self) -> Result<LinearModel> {
        let a = rows_to_matrix::<4, 4>(&self.a)
            .ok_or_else(|| Error::Config("A must be 4×4".into()))?;
        let b = rows_to_matrix::<4, 3>(&self.b)
            .ok_or_else(|| Error::Config("B must be 4×3".into()))?;
        Ok(LinearModel {
            a,
            b,
            provenance: self.provenance,
        })
    }
}

fn matrix_rows<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> Vec<Vec<f64>> {
    (0..R).map(|r| (0..C).map(|c| m[(r, c)]).collect()).collect()
}

fn rows_to_matrix<const R: usize, const C: usize>(rows: &[Vec<f64>]) -> Option<SMatrix<f64, R, C>> {
    if rows.len() != R || rows.iter().any(|r| r.len() != C) {
        return None;
    }
    let mut m = SMatrix::<f64, R, C>::zeros();
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            m[(r, c)] = *v;
        }
    }
    Some(m)
}

pub fn save_koopman_model(path: &Path, model: &KoopmanModel, hash: Option<String>) -> Result<()> {
    write_json(path, &KoopmanModelFile::from_model(model, hash))
}

pub fn load_koopman_model(path: &Path) -> Result<KoopmanModel> {
    read_json::<KoopmanModelFile>(path)?.into_model()
}

pub fn save_linear_model(path: &Path, model: &LinearModel, hash: Option<String>) -> Result<()> {
    write_json(path, &LinearModelFile::from_model(model, hash))
}

pub fn load_linear_model(path: &Path) -> Result<LinearModel> {
    read_json::<LinearModelFile>(path)?.into_model()
}

pub fn load_board(path: &Path) -> Result<BoardLayout> {
    let board: BoardLayout = read_json(path)?;
    board.validate()?;
    Ok(board)
}

pub fn save_report(path: &Path, report: &EpisodeReport) -> Result<()> {
    write_json(path, report)
}

/// Manifest written next to a collected dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub command: String,
    pub n_trajectories: usize,
    pub horizon: usize,
    pub seed: u64,
    pub sim: crate::sim::SimParams,
    pub files: Vec<String>,
    pub config_hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{scripted_collect, SimParams};
    use tempfile::tempdir;

    #[test]
    fn trajectory_csv_round_trip() {
        let trajs = scripted_collect(2, 25, 9, &SimParams::default()).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory_csv(&path, &trajs[0], "deadbeef").unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        assert_eq!(&back, &trajs[0]);

        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# config_hash=deadbeef\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("t,x,y,theta,f,phi,dx,dy,dtheta"));
    }

    #[test]
    fn csv_writes_are_byte_identical() {
        let trajs = scripted_collect(1, 20, 4, &SimParams::default()).unwrap();
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_trajectory_csv(&p1, &trajs[0], "h").unwrap();
        write_trajectory_csv(&p2, &trajs[0], "h").unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn parse_error_names_file_and_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(
            &path,
            "t,x,y,theta,f,phi,dx,dy,dtheta\n0,1,2,0,0,0,0,0,0\n1,oops,2,0,0,0,0,0,0\n",
        )
        .unwrap();
        match read_trajectory_csv(&path) {
            Err(Error::Parse { file, line, .. }) => {
                assert!(file.ends_with("bad.csv"));
                assert_eq!(line, 3);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn koopman_model_file_round_trip() {
        let trajs = scripted_collect(3, 20, 6, &SimParams::default()).unwrap();
        let model = crate::koopman::fit(&trajs).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_koopman_model(&path, &model, Some("abc".into())).unwrap();
        let back = load_koopman_model(&path).unwrap();
        assert_eq!(back.k, model.k);
        assert_eq!(back.l, model.l);
        assert_eq!(back.lift_spec, model.lift_spec);

        // schema sanity: row-major 20×20 and 20×3 arrays
        let raw: serde_json::Value = read_json(&path).unwrap();
        assert_eq!(raw["k"].as_array().unwrap().len(), 20);
        assert_eq!(raw["k"][0].as_array().unwrap().len(), 20);
        assert_eq!(raw["l"].as_array().unwrap().len(), 20);
        assert_eq!(raw["l"][0].as_array().unwrap().len(), 3);
        assert_eq!(raw["config_hash"].as_str().unwrap(), "abc");
    }

    #[test]
    fn config_hash_is_stable() {
        let params = SimParams::default();
        assert_eq!(config_hash(&params), config_hash(&params.clone()));
    }
}
