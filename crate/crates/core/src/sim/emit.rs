//! File output.
//!
//! * `report.json`: the full [`Report`].
//! * `trajectory_<k>.csv`: `t, x1..xn, u1..um, delta, lambda0..lambdaN, h1..hN, region`.
//! * `shape_<k>.csv` (adaptive runs): `t, pi1..piK, target`.
//! * `qfunction_<i>.csv`: `lambda, q, z, s_min_eig, s_max_eig` on a uniform grid.
//! * `equilibria_<i>.csv`: `lambda, x1..xn, verdict, s_min_eig, s_max_eig,
//!   field_residual, h_residual, jacobian_mismatch, verified`.
//!
//! `k` is zero-based, `i` one-based like the region labels. Text is UTF-8
//! with LF line ends.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::report::Report;
use crate::linalg::sym_eigenvalues;
use crate::{Error, Result};

/// Shortest round-trip decimal, switching to exponent form for very large or
/// very small magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn header(cols: impl IntoIterator<Item = String>) -> String {
    let mut s = cols.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

pub fn trajectory_header(n: usize, m: usize, nb: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=m).map(|i| format!("u{i}")));
    cols.push("delta".into());
    cols.extend((0..=nb).map(|i| format!("lambda{i}")));
    cols.extend((1..=nb).map(|i| format!("h{i}")));
    cols.push("region".into());
    header(cols)
}

pub fn trajectory_csv(t: &super::Trajectory, n: usize, m: usize, nb: usize) -> String {
    let mut out = trajectory_header(n, m, nb);
    for k in 0..t.len() {
        let mut row: Vec<String> = vec![num(t.times[k])];
        row.extend(t.states[k].iter().map(|&v| num(v)));
        row.extend(t.controls[k].iter().map(|&v| num(v)));
        row.push(num(t.deltas[k]));
        row.extend(t.multipliers[k].iter().map(|&v| num(v)));
        row.extend(t.h_values[k].iter().map(|&v| num(v)));
        row.push(t.regions[k].label());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn shape_csv(t: &super::Trajectory) -> String {
    let k = t.shapes.first().map_or(0, |p| p.len());
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=k).map(|i| format!("pi{i}")));
    cols.push("target".into());
    let mut out = header(cols);
    for (r, pi) in t.shapes.iter().enumerate() {
        let mut row: Vec<String> = vec![num(t.times[r])];
        row.extend(pi.iter().map(|&v| num(v)));
        row.push(t.targets[r].map_or("reference".into(), |i| format!("H{}", i + 1)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn qfunction_csv(a: &crate::equilibria::BarrierAnalysis, samples: usize) -> String {
    let mut out = header(["lambda", "q", "z", "s_min_eig", "s_max_eig"].map(String::from));
    let lmax = a.certificate.lambda_max;
    for k in 0..samples {
        let l = lmax * k as f64 / (samples - 1) as f64;
        let ev = sym_eigenvalues(&a.stability_poly.at(&a.pencil, l));
        let (lo, hi) = (ev.first().copied().unwrap_or(f64::NAN), ev.last().copied().unwrap_or(f64::NAN));
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(l),
            num(a.q_function.q(l)),
            num(a.q_function.z_poly.eval(l)),
            num(lo),
            num(hi)
        );
    }
    out
}

fn equilibria_csv(a: &crate::equilibria::BarrierAnalysis) -> String {
    let n = a.w.len();
    let mut cols = vec!["lambda".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend(
        ["verdict", "s_min_eig", "s_max_eig", "field_residual", "h_residual", "jacobian_mismatch", "verified"]
            .map(String::from),
    );
    let mut out = header(cols);
    for e in &a.equilibria {
        let d = &e.diagnostics;
        let mut row = vec![num(e.lambda_e)];
        row.extend(e.x_e.iter().map(|&v| num(v)));
        row.push(format!("{:?}", e.verdict));
        row.extend([d.s_min_eig, d.s_max_eig, d.field_residual, d.h_residual, d.jacobian_mismatch].map(num));
        row.push(d.verified.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes every output file of `report` into `dir`, creating it.
pub fn emit(report: &Report, dir: &Path, qfunction_samples: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        write(path.clone(), &text)?;
        written.push(path);
        Ok(())
    };

    let mut json = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    json.push('\n');
    put("report.json".into(), json)?;

    for a in &report.barriers {
        let i = a.barrier + 1;
        put(format!("qfunction_{i}.csv"), qfunction_csv(a, qfunction_samples.max(2)))?;
        put(format!("equilibria_{i}.csv"), equilibria_csv(a))?;
    }
    for (k, t) in report.runs.iter().enumerate() {
        let n = t.states.first().map_or(0, |x| x.len());
        let m = t.controls.first().map_or(0, |u| u.len());
        let nb = t.h_values.first().map_or(0, |h| h.len());
        put(format!("trajectory_{k:03}.csv"), trajectory_csv(t, n, m, nb))?;
        if !t.shapes.is_empty() {
            put(format!("shape_{k:03}.csv"), shape_csv(t))?;
        }
    }
    Ok(written)
}
