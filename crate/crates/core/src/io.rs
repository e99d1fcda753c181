//! JSON formats and a canonical writer.
//!
//! States are read from either `{"rho": 4×4 [re, im] pairs}` or
//! `{"a": [3], "b": [3], "T": 3×3}`. Output JSON has sorted keys and floats
//! printed with 17 significant digits so equal inputs give equal bytes.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::ellipsoid::SteeringEllipsoid;
use crate::error::{Error, Result};
use crate::numerics::C64;
use crate::qstate::{from_theta, DensityMatrix, ThetaMatrix};
use crate::reconstruct::GeometricData;

#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum StateFile {
    Rho {
        rho: Vec<Vec<[f64; 2]>>,
    },
    Blocks {
        a: [f64; 3],
        b: [f64; 3],
        #[serde(rename = "T")]
        t: [[f64; 3]; 3],
    },
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    let file: StateFile = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("expected {{\"rho\": ...}} or {{\"a\", \"b\", \"T\"}}: {e}")))?;
    match file {
        StateFile::Rho { rho } => {
            if rho.len() != 4 || rho.iter().any(|r| r.len() != 4) {
                return Err(Error::Parse("rho must be a 4×4 array of [re, im] pairs".into()));
            }
            DensityMatrix::new(Matrix4::from_fn(|i, j| C64::new(rho[i][j][0], rho[i][j][1])))
        }
        StateFile::Blocks { a, b, t } => {
            let theta = ThetaMatrix::from_blocks(&a.into(), &b.into(), &Matrix3::from_fn(|i, j| t[i][j]))?;
            from_theta(&theta)
        }
    }
}

pub fn parse_geometry(text: &str) -> Result<GeometricData> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("expected {{\"Q\", \"c\", \"a\", \"b\"}}: {e}")))
}

pub fn state_json(rho: &DensityMatrix) -> Value {
    let m = rho.matrix();
    let rows: Vec<Value> = (0..4)
        .map(|i| Value::Array((0..4).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
        .collect();
    json!({ "rho": rows })
}

pub fn theta_json(theta: &ThetaMatrix) -> Value {
    let t = theta.t();
    json!({
        "a": vec3(&theta.a()),
        "b": vec3(&theta.b()),
        "T": (0..3).map(|i| (0..3).map(|j| t[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

pub fn vec3(v: &Vector3<f64>) -> Value {
    json!([v.x, v.y, v.z])
}

/// `{"center", "semiaxes", "axes" (list of columns), "dimension"}`.
pub fn geometry_json(e: &SteeringEllipsoid) -> Value {
    json!({
        "center": vec3(&e.center),
        "semiaxes": vec3(&e.semiaxes),
        "axes": (0..3).map(|k| vec3(&e.axes.column(k).into_owned())).collect::<Vec<_>>(),
        "dimension": e.dimension,
    })
}

/// Pretty JSON with sorted keys and `{:.16e}` floats; integers stay integers.
pub fn to_canonical_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                // −0 prints as 0 so sign noise cannot change the bytes
                let x = n.as_f64().expect("f64") + 0.0;
                write!(out, "{x:.16e}").expect("write to string");
            } else {
                write!(out, "{n}").expect("write to string");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.iter().all(|v| !v.is_array() && !v.is_object()) {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, v, depth);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, v) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, v, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*k], depth + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}
