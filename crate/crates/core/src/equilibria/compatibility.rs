use serde::Serialize;

use super::{
    boundary_equilibria, build_pencil, classify_equilibrium, q_function, stability_polynomial, EquilibriumPoint,
    PencilSystem, QFunction, StabilityPoly, Verdict,
};
use crate::linalg::{min_sym_eigenvalue, rank, to_rows};
use crate::plant::{Plant, QuadraticFn, TransformedClf};
use crate::polyalg::{definiteness_intervals, MatrixPolyRecord, ScalarPoly, SignIntervals, REAL_ROOT_TOL};
use crate::qp::ControllerConfig;
use crate::Result;

pub const DEFAULT_EPSILON: f64 = 1.1;
const INTERVAL_GRID: usize = 400;

/// Sufficient compatibility certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatBarrier {
    /// `min n(λ) − ε·d(λ)` over `[0, σ₋]`; `+∞` when that range is empty.
    pub b: f64,
    pub sigma_minus: f64,
    pub monotone_ok: bool,
    pub lambda_max: f64,
    pub intervals: SignIntervals,
}

impl CompatBarrier {
    /// Range of λ searched by the certificate, `None` when empty.
    pub fn range(&self) -> Option<(f64, f64)> {
        if self.sigma_minus < 0.0 {
            None
        } else {
            Some((0.0, self.sigma_minus.min(self.lambda_max)))
        }
    }
}

/// `2·(1 + max|σ_P| + max|roots of z|)`
pub fn default_lambda_max(qf: &QFunction) -> Result<f64> {
    let spec = qf.spectrum.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let zr = match qf.z_poly.degree() {
        Some(d) if d >= 1 => qf.z_poly.roots(REAL_ROOT_TOL)?.iter().fold(0.0_f64, |m, z| m.max(z.norm())),
        _ => 0.0,
    };
    Ok(2.0 * (1.0 + spec + zr))
}

/// Candidate minimizers of a polynomial on `[lo, hi]`: endpoints and the
/// real critical points inside.
pub fn critical_points(p: &ScalarPoly, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let mut pts = vec![lo, hi];
    let dp = p.derivative();
    if dp.degree().is_some_and(|d| d >= 1) {
        pts.extend(dp.real_roots(REAL_ROOT_TOL)?.into_iter().filter(|&r| r > lo && r < hi));
    }
    Ok(pts)
}

pub fn compatibility_barrier(qf: &QFunction, sp: &StabilityPoly, eps: f64) -> Result<CompatBarrier> {
    let lambda_max = default_lambda_max(qf)?;
    let intervals = definiteness_intervals(&sp.s, lambda_max, INTERVAL_GRID)?;
    let sigma_minus = intervals.sigma_minus;

    let phi = &qf.n_poly - &qf.d_poly.scale(eps);
    let b = if sigma_minus < 0.0 {
        f64::INFINITY
    } else {
        let hi = sigma_minus.min(lambda_max);
        critical_points(&phi, 0.0, hi)?
            .into_iter()
            .map(|l| phi.eval(l))
            .fold(f64::INFINITY, f64::min)
    };

    let ds = sp.s.derivative();
    let monotone_ok = ds.is_zero() || {
        let lead = ds.coeffs().last().expect("nonzero");
        let lead_ok = min_sym_eigenvalue(lead) >= -1e-9 * lead.norm();
        lead_ok
            && (0..=INTERVAL_GRID).all(|k| {
                let m = ds.eval(lambda_max * k as f64 / INTERVAL_GRID as f64);
                min_sym_eigenvalue(&m) >= -1e-9 * m.norm()
            })
    };
    Ok(CompatBarrier { b, sigma_minus, monotone_ok, lambda_max, intervals })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootEvidence {
    pub lambda: f64,
    pub x_e: Vec<f64>,
    pub verdict: Verdict,
    pub s_min_eig: f64,
    pub s_max_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatEvidence {
    pub compatible: bool,
    /// The CLF minimum is the only interior equilibrium.
    pub interior_unique: bool,
    pub roots: Vec<RootEvidence>,
    pub degenerate: Vec<f64>,
}

/// Exact compatibility: every admissible boundary equilibrium of this single
/// barrier is unstable and the interior set is `{x₀}`.
pub fn is_compatible(
    plant: &Plant,
    clf: &TransformedClf,
    barrier: &QuadraticFn,
    cfg: &ControllerConfig,
) -> Result<CompatEvidence> {
    let ps = build_pencil(plant, clf, barrier, 0, cfg.p)?;
    let qf = q_function(&ps)?;
    let sp = stability_polynomial(&ps)?;
    let res = boundary_equilibria(&ps, &qf, &sp, plant, clf, std::slice::from_ref(barrier), cfg)?;
    let interior_unique = interior_unique(&ps);
    let roots: Vec<RootEvidence> = res
        .points
        .iter()
        .map(|e| {
            let (verdict, s_min, s_max) = classify_equilibrium(e.lambda_e, &sp, &ps);
            RootEvidence { lambda: e.lambda_e, x_e: e.x_e.clone(), verdict, s_min_eig: s_min, s_max_eig: s_max }
        })
        .collect();
    let compatible = interior_unique && roots.iter().all(|r| r.verdict == Verdict::Unstable);
    Ok(CompatEvidence { compatible, interior_unique, roots, degenerate: res.degenerate })
}

/// For quadratic data the interior equilibria solve `N(x − x₀) = 0`.
fn interior_unique(ps: &PencilSystem) -> bool {
    rank(ps.pencil.n(), 1e-12) == ps.dim()
}

/// Full per-barrier analysis as emitted in reports.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierAnalysis {
    pub barrier: usize,
    pub pencil_m: Vec<Vec<f64>>,
    pub pencil_n: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub q_function: QFunction,
    pub z_roots: Vec<f64>,
    pub stability: MatrixPolyRecord,
    pub intervals: SignIntervals,
    pub nsd_count_ok: bool,
    pub equilibria: Vec<EquilibriumPoint>,
    pub degenerate_roots: Vec<f64>,
    pub certificate: CompatBarrier,
    pub compatible: bool,
    #[serde(skip)]
    pub pencil: PencilSystem,
    #[serde(skip)]
    pub stability_poly: StabilityPoly,
}

pub fn analyze_barrier(
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    idx: usize,
    cfg: &ControllerConfig,
    eps: f64,
) -> Result<BarrierAnalysis> {
    let ps = build_pencil(plant, clf, &barriers[idx], idx, cfg.p)?;
    let qf = q_function(&ps)?;
    let sp = stability_polynomial(&ps)?;
    let res = boundary_equilibria(&ps, &qf, &sp, plant, clf, barriers, cfg)?;
    let certificate = compatibility_barrier(&qf, &sp, eps)?;
    let z_roots = match qf.z_poly.degree() {
        Some(d) if d >= 1 => qf.z_poly.real_roots(REAL_ROOT_TOL)?,
        _ => Vec::new(),
    };
    let compatible = interior_unique(&ps) && res.points.iter().all(|e| e.verdict == Verdict::Unstable);
    Ok(BarrierAnalysis {
        barrier: idx,
        pencil_m: to_rows(ps.pencil.m()),
        pencil_n: to_rows(ps.pencil.n()),
        w: ps.w.iter().copied().collect(),
        z_roots,
        stability: MatrixPolyRecord::from(&sp.s),
        nsd_count_ok: certificate.intervals.nsd_count <= ps.dim(),
        intervals: certificate.intervals.clone(),
        equilibria: res.points,
        degenerate_roots: res.degenerate,
        q_function: qf,
        certificate,
        compatible,
        pencil: ps,
        stability_poly: sp,
    })
}
