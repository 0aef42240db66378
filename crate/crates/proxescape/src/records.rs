//! Trajectory persistence. CSV layout is fixed:
//! t,x_1..x_d,f_lambda,grad_map_norm,perturbed with the flag as 0/1. Floats
//! are written with the shortest round-trip form, so read(write(traj))
//! reproduces every value bit-exactly.

use crate::driver::TrajectoryPoint;
use crate::error::{ProxError, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub fn trajectory_header(dim: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=dim {
        let _ = write!(h, ",x_{i}");
    }
    h.push_str(",f_lambda,grad_map_norm,perturbed");
    h
}

pub fn to_csv(points: &[TrajectoryPoint]) -> Result<String> {
    let dim = points
        .first()
        .map(|p| p.x.len())
        .ok_or_else(|| ProxError::Record("cannot serialize an empty trajectory".into()))?;
    let mut out = trajectory_header(dim);
    out.push('\n');
    for p in points {
        if p.x.len() != dim {
            return Err(ProxError::Record(format!(
                "row t={} has dimension {} instead of {dim}",
                p.t,
                p.x.len()
            )));
        }
        let _ = write!(out, "{}", p.t);
        for v in &p.x {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            p.f_lambda,
            p.grad_map_norm,
            u8::from(p.perturbed)
        );
    }
    Ok(out)
}

pub fn write_trajectory_csv(path: &Path, points: &[TrajectoryPoint]) -> Result<()> {
    fs::write(path, to_csv(points)?)?;
    Ok(())
}

pub fn from_csv(text: &str) -> Result<Vec<TrajectoryPoint>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ProxError::Record("empty trajectory file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "t" || cols[cols.len() - 1] != "perturbed" {
        return Err(ProxError::Record(format!("unrecognized header '{header}'")));
    }
    let dim = cols.len() - 4;
    for (i, c) in cols[1..=dim].iter().enumerate() {
        if *c != format!("x_{}", i + 1) {
            return Err(ProxError::Record(format!("unexpected column '{c}'")));
        }
    }
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(ProxError::Record(format!(
                "line {}: expected {} fields, found {}",
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| ProxError::Record(format!("line {}: bad float '{s}'", lineno + 2)))
        };
        let t: usize = fields[0]
            .parse()
            .map_err(|_| ProxError::Record(format!("line {}: bad index '{}'", lineno + 2, fields[0])))?;
        let mut x = Vec::with_capacity(dim);
        for f in &fields[1..=dim] {
            x.push(parse_f(f)?);
        }
        let perturbed = match fields[cols.len() - 1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(ProxError::Record(format!(
                    "line {}: bad flag '{other}'",
                    lineno + 2
                )))
            }
        };
        points.push(TrajectoryPoint {
            t,
            x,
            f_lambda: parse_f(fields[dim + 1])?,
            grad_map_norm: parse_f(fields[dim + 2])?,
            perturbed,
        });
    }
    if points.is_empty() {
        return Err(ProxError::Record("trajectory file has no rows".into()));
    }
    Ok(points)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryPoint>> {
    from_csv(&fs::read_to_string(path)?)
}
