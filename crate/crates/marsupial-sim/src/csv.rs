//! Deterministic CSV serialization of trajectories and potential sweeps.
//!
//! The trajectory schema is fixed: header
//! `t,xc1..xcn,xp1..xpn,uc1..ucn,up1..upn,e_pc,e_tc,e_pt,P,mode` with
//! vector components expanded per dimension, every number printed with 17
//! significant digits (which round-trips f64 exactly), no timestamps or
//! other nondeterminism. Identical runs produce byte-identical files.

use crate::core::{AttachmentMode, Vector};
use crate::sim::{Trajectory, TrajectoryRow};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("trajectory needs at least two rows to recover the step size")]
    TooShort,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(dim: usize) -> String {
    let mut h = String::from("t");
    for prefix in ["xc", "xp", "uc", "up"] {
        for i in 1..=dim {
            let _ = write!(h, ",{prefix}{i}");
        }
    }
    h.push_str(",e_pc,e_tc,e_pt,P,mode");
    h
}

/// Render a trajectory in the fixed schema.
pub fn write_trajectory(traj: &Trajectory) -> String {
    let dim = traj.rows.first().map(|r| r.x_c.dim()).unwrap_or(0);
    let mut out = header(dim);
    out.push('\n');
    for row in &traj.rows {
        let _ = write!(out, "{}", fmt_f64(row.t));
        for v in [&row.x_c, &row.x_p, &row.u_c, &row.u_p] {
            for &x in &v.0 {
                let _ = write!(out, ",{}", fmt_f64(x));
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{}",
            fmt_f64(row.e_pc),
            fmt_f64(row.e_tc),
            fmt_f64(row.e_pt),
            fmt_f64(row.p_value),
            row.mode
        );
    }
    out
}

/// Parse a trajectory file produced by [`write_trajectory`].
///
/// The separation time is not stored in the schema; derive it with
/// [`crate::analysis::separation_time`] when needed.
pub fn read_trajectory(text: &str) -> Result<Trajectory, CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or(CsvError::TooShort)?;
    let cols: Vec<&str> = head.split(',').collect();
    // 1 (t) + 4*dim + 4 norms/P + 1 mode
    if cols.len() < 6 + 4 * 2 || (cols.len() - 6) % 4 != 0 {
        return Err(CsvError::Header(head.to_string()));
    }
    let dim = (cols.len() - 6) / 4;
    if head != header(dim) {
        return Err(CsvError::Header(head.to_string()));
    }

    let parse = |s: &str, line: usize| -> Result<f64, CsvError> {
        s.parse::<f64>().map_err(|e| CsvError::Malformed {
            line,
            msg: format!("bad number {s:?}: {e}"),
        })
    };

    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(CsvError::Malformed {
                line: lineno,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let t = parse(fields[0], lineno)?;
        let mut vecs = Vec::with_capacity(4);
        for v in 0..4 {
            let start = 1 + v * dim;
            let comps = fields[start..start + dim]
                .iter()
                .map(|s| parse(s, lineno))
                .collect::<Result<Vec<f64>, _>>()?;
            vecs.push(Vector(comps));
        }
        let up = vecs.pop().unwrap();
        let uc = vecs.pop().unwrap();
        let xp = vecs.pop().unwrap();
        let xc = vecs.pop().unwrap();
        let base = 1 + 4 * dim;
        let mode = match fields[base + 4] {
            "attached" => AttachmentMode::Attached,
            "separated" => AttachmentMode::Separated,
            other => {
                return Err(CsvError::Malformed {
                    line: lineno,
                    msg: format!("unknown mode {other:?}"),
                })
            }
        };
        rows.push(TrajectoryRow {
            t,
            x_c: xc,
            x_p: xp,
            u_c: uc,
            u_p: up,
            e_pc: parse(fields[base], lineno)?,
            e_tc: parse(fields[base + 1], lineno)?,
            e_pt: parse(fields[base + 2], lineno)?,
            p_value: parse(fields[base + 3], lineno)?,
            mode,
        });
    }
    if rows.len() < 2 {
        return Err(CsvError::TooShort);
    }
    let dt = rows[1].t - rows[0].t;
    Ok(Trajectory {
        dt,
        rows,
        separation_time: None,
    })
}

/// Render a potential sweep as the two-column `e_pc_norm,P` file.
pub fn write_sweep(points: &[(f64, f64)]) -> String {
    let mut out = String::from("e_pc_norm,P\n");
    for (r, p) in points {
        let _ = writeln!(out, "{},{}", fmt_f64(*r), fmt_f64(*p));
    }
    out
}
