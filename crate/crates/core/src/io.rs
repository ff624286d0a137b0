//! File formats and output encoding.
//!
//! * graph: `{"n": int, "labels": [string]?, "edges": [[source, target, weight]]}`
//! * function: JSON array of `n` floats, CSV lines `index,value`, or a solve
//!   report object with a `"solution"` array
//! * boundary: JSON array of vertex indices
//! * kernel family: JSON array of `n×n` row-stochastic matrices
//!
//! Floats are written in shortest round-trip form; infinities as `"inf"`.

use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{BoundarySet, Graph, GraphFunction, KernelFamily, TransitionKernel};

pub fn read_source(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_err(source: &str, message: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: source.to_string(),
        message: message.to_string(),
    }
}

/// Re-labels a validation failure with the input it came from.
fn located<T>(source: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation(m) => parse_err(source, m),
        other => other,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n: usize,
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    edges: Vec<(usize, usize, f64)>,
}

pub fn parse_graph(text: &str, source: &str) -> Result<Graph> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| parse_err(source, e))?;
    located(source, Graph::from_edges(file.n, file.labels, &file.edges))
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    parse_graph(&read_source(path)?, &path.display().to_string())
}

fn number(v: &Value, source: &str, what: &str) -> Result<f64> {
    match v {
        Value::Number(x) => x
            .as_f64()
            .ok_or_else(|| parse_err(source, format!("{what} is not a float"))),
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        _ => Err(parse_err(
            source,
            format!("{what} must be a number, got {v}"),
        )),
    }
}

fn parse_csv_function(text: &str, source: &str, n: usize) -> Result<GraphFunction> {
    let mut values = vec![None; n];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "index,value" {
            continue;
        }
        let at = |m: String| parse_err(source, format!("line {}: {m}", lineno + 1));
        let (i, v) = line
            .split_once(',')
            .ok_or_else(|| at(format!("expected 'index,value', got '{line}'")))?;
        let i: usize = i
            .trim()
            .parse()
            .map_err(|_| at(format!("bad index '{}'", i.trim())))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| at(format!("bad value '{}'", v.trim())))?;
        if i >= n {
            return Err(at(format!("index {i} out of range for {n} vertices")));
        }
        if values[i].replace(v).is_some() {
            return Err(at(format!("index {i} given twice")));
        }
    }
    let values: Option<Vec<f64>> = values.into_iter().collect();
    let values =
        values.ok_or_else(|| parse_err(source, format!("CSV does not cover all {n} vertices")))?;
    located(source, GraphFunction::new(values))
}

/// Parses a function over `n` vertices from JSON or CSV text.
pub fn parse_function(text: &str, source: &str, n: usize) -> Result<GraphFunction> {
    let trimmed = text.trim_start();
    if !(trimmed.starts_with('[') || trimmed.starts_with('{')) {
        return parse_csv_function(text, source, n);
    }
    let value: Value = serde_json::from_str(text).map_err(|e| parse_err(source, e))?;
    let array = match &value {
        Value::Array(a) => a,
        Value::Object(o) => match o.get("solution") {
            Some(Value::Array(a)) => a,
            _ => {
                return Err(parse_err(
                    source,
                    "expected a JSON array or an object with a \"solution\" array",
                ))
            }
        },
        _ => return Err(parse_err(source, "expected a JSON array of floats")),
    };
    if array.len() != n {
        return Err(parse_err(
            source,
            format!("function has {} values, expected {n}", array.len()),
        ));
    }
    let values = array
        .iter()
        .enumerate()
        .map(|(i, v)| number(v, source, &format!("entry {i}")))
        .collect::<Result<Vec<_>>>()?;
    located(source, GraphFunction::new(values))
}

pub fn parse_boundary(text: &str, source: &str, n: usize) -> Result<BoundarySet> {
    let indices: Vec<usize> = serde_json::from_str(text)
        .map_err(|e| parse_err(source, format!("expected a JSON array of indices: {e}")))?;
    located(source, BoundarySet::new(&indices, n))
}

fn parse_matrices(text: &str, source: &str) -> Result<Vec<Vec<Vec<f64>>>> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_err(source, e))?;
    let single = matches!(&value, Value::Array(rows) if matches!(rows.first(), Some(Value::Array(r)) if matches!(r.first(), Some(Value::Number(_)))));
    if single {
        let m: Vec<Vec<f64>> = serde_json::from_value(value).map_err(|e| parse_err(source, e))?;
        Ok(vec![m])
    } else {
        serde_json::from_value(value)
            .map_err(|e| parse_err(source, format!("expected an array of n×n matrices: {e}")))
    }
}

/// Parses a kernel family; a single bare matrix is a family of one.
pub fn parse_family(text: &str, source: &str, normalize: bool) -> Result<KernelFamily> {
    let matrices = parse_matrices(text, source)?;
    let kernels = matrices
        .iter()
        .enumerate()
        .map(|(i, m)| {
            TransitionKernel::from_rows(m, normalize).map_err(|e| match e {
                Error::Validation(msg) => parse_err(source, format!("kernel {i}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    located(source, KernelFamily::new(kernels))
}

/// Parses a single kernel, given as a bare matrix or a one-element family.
pub fn parse_kernel(text: &str, source: &str, normalize: bool) -> Result<TransitionKernel> {
    let family = parse_family(text, source, normalize)?;
    if family.len() != 1 {
        return Err(parse_err(
            source,
            format!("expected one kernel, found {}", family.len()),
        ));
    }
    Ok(family.kernel(0).clone())
}

/// A float that serializes infinities and NaN as strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

pub fn nums(values: &[f64]) -> Vec<Num> {
    values.iter().copied().map(Num).collect()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize infallibly")
}

/// `index,value` lines.
pub fn function_csv(values: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}
