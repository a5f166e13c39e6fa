//! Line-delimited JSON trajectory files: one
//! `{"id", "states", "actions", "rewards", "costs"}` object per line.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Serialize)]
struct Record {
    id: usize,
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    costs: Vec<f64>,
}

fn rows<T: Scalar>(v: &[Vec<T>]) -> Vec<Vec<f64>> {
    v.iter().map(|r| r.iter().map(|x| x.as_f64()).collect()).collect()
}

pub fn write_trajectories<T: Scalar, W: Write>(out: W, data: &[Trajectory<T>]) -> Result<()> {
    let mut out = BufWriter::new(out);
    for t in data {
        let rec = Record {
            id: t.id,
            states: rows(&t.states),
            actions: rows(&t.actions),
            rewards: t.rewards.iter().map(|x| x.as_f64()).collect(),
            costs: t.costs.iter().map(|x| x.as_f64()).collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_trajectories<T: Scalar>(path: impl AsRef<Path>, data: &[Trajectory<T>]) -> Result<()> {
    let file = fs::File::create(path)?;
    write_trajectories(file, data)
}

pub fn load_trajectories<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Trajectory<T>>> {
    parse_trajectories(&fs::read_to_string(path)?)
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn number<T: Scalar>(v: &Value, line: usize, field: &str) -> Result<T> {
    v.as_f64()
        .map(T::lit)
        .ok_or_else(|| parse_err(line, field, format!("expected a number, found {v}")))
}

fn vector<T: Scalar>(v: &Value, line: usize, field: &str) -> Result<Vec<T>> {
    v.as_array()
        .ok_or_else(|| parse_err(line, field, "expected an array"))?
        .iter()
        .map(|x| number(x, line, field))
        .collect()
}

fn matrix<T: Scalar>(v: &Value, line: usize, field: &str) -> Result<Vec<Vec<T>>> {
    v.as_array()
        .ok_or_else(|| parse_err(line, field, "expected an array of arrays"))?
        .iter()
        .map(|row| vector(row, line, field))
        .collect()
}

/// Parses and validates a whole file body; line numbers are 1-based.
pub fn parse_trajectories<T: Scalar>(text: &str) -> Result<Vec<Trajectory<T>>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(raw).map_err(|e| parse_err(line, "<record>", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err(line, "<record>", "expected a JSON object"))?;
        let get = |field: &str| {
            obj.get(field)
                .ok_or_else(|| parse_err(line, field, "missing field"))
        };
        let id = get("id")?
            .as_u64()
            .ok_or_else(|| parse_err(line, "id", "expected a non-negative integer"))?
            as usize;
        let states = matrix(get("states")?, line, "states")?;
        let actions = matrix(get("actions")?, line, "actions")?;
        let rewards = vector(get("rewards")?, line, "rewards")?;
        let costs = vector(get("costs")?, line, "costs")?;
        let t = Trajectory::new(id, states, actions, rewards, costs).map_err(|e| match e {
            Error::DimMismatch {
                context,
                expected,
                received,
            } => parse_err(
                line,
                context.trim_start_matches("trajectory "),
                format!("length mismatch: expected {expected}, found {received}"),
            ),
            other => other,
        })?;
        out.push(t);
    }
    Ok(out)
}
