use serde::{Deserialize, Serialize};

use super::{MatrixPoly, REAL_ROOT_TOL};
use crate::linalg::sym_eigenvalues;
use crate::{Error, Result};

/// Eigenvalues with `|μ| ≤ SEMIDEF_TOL·‖S(λ)‖_F` count as zero.
pub const SEMIDEF_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    Nsd,
    Psd,
    Indefinite,
}

/// Sign structure of a symmetric matrix polynomial along the real line.
///
/// `verdicts[k]` classifies the open interval between `breakpoints[k−1]` and
/// `breakpoints[k]` (with ±∞ at the ends).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignIntervals {
    pub breakpoints: Vec<f64>,
    pub verdicts: Vec<Definiteness>,
    /// Supremum of the leftmost NSD interval; `+∞` if it is unbounded above,
    /// `−∞` if there is no NSD interval at all.
    pub sigma_minus: f64,
    /// Infimum of the rightmost PSD interval; `−∞` if it is unbounded below,
    /// `+∞` if there is no PSD interval at all.
    pub sigma_plus: f64,
    pub nsd_count: usize,
}

impl SignIntervals {
    pub fn verdict_at(&self, lambda: f64) -> Definiteness {
        let k = self.breakpoints.partition_point(|&b| b < lambda);
        self.verdicts[k]
    }
}

/// Classifies `S(λ)` on the intervals cut by the real roots of `det S`.
///
/// Each interval is judged at its midpoint and at the points of a uniform
/// `grid` over `[−λ_max, λ_max]` that fall inside it. Adjacent intervals with
/// equal verdicts are merged.
pub fn definiteness_intervals(s: &MatrixPoly, lambda_max: f64, grid: usize) -> Result<SignIntervals> {
    if !s.is_symmetric(1e-10) {
        return Err(Error::InvalidInput("definiteness analysis needs a symmetric matrix polynomial".into()));
    }
    let grid = grid.max(100);
    let det = s.det()?.trimmed(1e-14);
    let mut cuts = match det.degree() {
        Some(d) if d >= 1 => det.real_roots(REAL_ROOT_TOL)?,
        _ => Vec::new(),
    };
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));

    let span = lambda_max.abs().max(1.0);
    let samples: Vec<f64> = (0..=grid)
        .map(|k| -span + 2.0 * span * k as f64 / grid as f64)
        .collect();

    let mut verdicts = Vec::with_capacity(cuts.len() + 1);
    for k in 0..=cuts.len() {
        let lo = if k == 0 { f64::NEG_INFINITY } else { cuts[k - 1] };
        let hi = cuts.get(k).copied().unwrap_or(f64::INFINITY);
        let mid = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - hi.abs().max(1.0),
            (true, false) => lo + lo.abs().max(1.0),
            (false, false) => 0.0,
        };
        let pts = std::iter::once(mid).chain(samples.iter().copied().filter(|&x| x > lo && x < hi));
        verdicts.push(classify_points(s, pts));
    }

    let mut breakpoints = Vec::new();
    let mut merged = vec![verdicts[0]];
    for (k, &b) in cuts.iter().enumerate() {
        if verdicts[k + 1] != *merged.last().expect("nonempty") {
            breakpoints.push(b);
            merged.push(verdicts[k + 1]);
        }
    }

    let sigma_minus = match merged.iter().position(|&v| v == Definiteness::Nsd) {
        Some(k) => breakpoints.get(k).copied().unwrap_or(f64::INFINITY),
        None => f64::NEG_INFINITY,
    };
    let sigma_plus = match merged.iter().rposition(|&v| v == Definiteness::Psd) {
        Some(0) => f64::NEG_INFINITY,
        Some(k) => breakpoints[k - 1],
        None => f64::INFINITY,
    };
    let nsd_count = merged.iter().filter(|&&v| v == Definiteness::Nsd).count();
    Ok(SignIntervals { breakpoints, verdicts: merged, sigma_minus, sigma_plus, nsd_count })
}

fn classify_points(s: &MatrixPoly, pts: impl Iterator<Item = f64>) -> Definiteness {
    let (mut nsd, mut psd) = (true, true);
    for x in pts {
        let m = s.eval(x);
        let tol = SEMIDEF_TOL * m.norm();
        let ev = sym_eigenvalues(&m);
        if ev.last().is_some_and(|&e| e > tol) {
            nsd = false;
        }
        if ev.first().is_some_and(|&e| e < -tol) {
            psd = false;
        }
        if !nsd && !psd {
            break;
        }
    }
    match (nsd, psd) {
        (true, _) => Definiteness::Nsd,
        (false, true) => Definiteness::Psd,
        _ => Definiteness::Indefinite,
    }
}
