//! Scenario files.
//!
//! A scenario is a TOML document; matrices are written as arrays of rows.
//!
//! ```toml
//! name = "example"
//! seed = 0
//!
//! [plant]
//! kind = "lti"                 # or "driftless" with `g = [[..]]`, `gain = 0.0`
//! a = [[-2.0, 0.0], [0.0, -2.0]]
//! b = [[1.0, 0.0], [0.0, 1.0]]
//! origin = [0.0, 0.0]          # optional, defaults to the CLF center
//!
//! [clf]
//! hessian = [[5.0, 0.0], [0.0, 8.0]]
//! center = [0.0, 0.0]
//! gamma = { linear = 1.0 }
//! form = "transformed"         # or "original"
//!
//! [[barriers]]                 # h(x) = ½((x − c)ᵀH(x − c) − 1)
//! hessian = [[1.0, 0.0], [0.0, 1.0]]
//! center = [4.0, 0.0]
//!
//! [controller]
//! p = 1.0
//! alpha = { linear = 1.0 }
//! multiplier_tol = 1e-7
//!
//! [adaptation]
//! p_pi = 1.0
//! gamma_pi = 5.0
//! epsilon = 1.1
//! hysteresis = 3
//! pd_floor = 1e-6
//!
//! [analysis]
//! lo = [-10.0, -10.0]          # analysis box, defaults around the barriers
//! hi = [10.0, 10.0]
//! interior_grid = 9
//! feasibility_points = 2500
//! qfunction_samples = 401
//!
//! [simulation]
//! t_end = 20.0
//! dt = 1e-3
//! conv_tol = 1e-3
//! stall_speed = 1e-6
//! starts = [[8.0, 1.0]]
//! grid = { lo = [-8.0, -8.0], hi = [8.0, 8.0], per_axis = 4 }
//! ring = { center = [0.0, 0.0], radius = 8.0, count = 16 }
//! random = 0                   # extra seeded starts in the analysis box
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compat::AdaptiveConfig;
use crate::equilibria::DEFAULT_EPSILON;
use crate::linalg::from_rows;
use crate::plant::{
    barrier_eval, check_assumption1, check_assumption2, check_assumption3, ClassK, ClfForm, InputMap, Plant,
    QuadraticFn, TransformedClf,
};
use crate::qp::{box_grid, ControllerConfig, MAX_BARRIERS};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub plant: PlantSpec,
    pub clf: ClfSpec,
    #[serde(default)]
    pub barriers: Vec<BarrierSpec>,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub adaptation: AdaptationSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub simulation: SimSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    Lti {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default)]
        origin: Option<Vec<f64>>,
    },
    Driftless {
        g: Vec<Vec<f64>>,
        #[serde(default)]
        gain: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClfSpec {
    pub hessian: Vec<Vec<f64>>,
    pub center: Vec<f64>,
    #[serde(default)]
    pub gamma: ClassK,
    #[serde(default)]
    pub form: ClfForm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSpec {
    pub hessian: Vec<Vec<f64>>,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSpec {
    pub p: f64,
    pub alpha: ClassK,
    pub multiplier_tol: f64,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        let d = ControllerConfig::default();
        Self { p: d.p, alpha: d.alpha, multiplier_tol: d.multiplier_tol }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationSpec {
    pub p_pi: f64,
    pub gamma_pi: f64,
    pub epsilon: f64,
    pub hysteresis: usize,
    pub pd_floor: f64,
}

impl Default for AdaptationSpec {
    fn default() -> Self {
        let d = AdaptiveConfig::default();
        Self {
            p_pi: d.p_pi,
            gamma_pi: d.gamma_pi,
            epsilon: DEFAULT_EPSILON,
            hysteresis: d.hysteresis,
            pd_floor: d.pd_floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub interior_grid: usize,
    pub feasibility_points: usize,
    pub qfunction_samples: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self { lo: None, hi: None, interior_grid: 9, feasibility_points: 2500, qfunction_samples: 401 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub per_axis: usize,
}

/// Starts on a circle in the first two coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub t_end: f64,
    pub dt: f64,
    pub conv_tol: f64,
    pub stall_speed: f64,
    pub starts: Vec<Vec<f64>>,
    pub grid: Option<GridSpec>,
    pub ring: Option<RingSpec>,
    pub random: usize,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            t_end: 20.0,
            dt: 1e-3,
            conv_tol: 1e-3,
            stall_speed: 1e-6,
            starts: Vec::new(),
            grid: None,
            ring: None,
            random: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub conv_tol: f64,
    pub stall_speed: f64,
}

/// A validated scenario with all objects built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub plant: Plant,
    pub clf: TransformedClf,
    pub barriers: Vec<QuadraticFn>,
    pub cfg: ControllerConfig,
    pub adaptive: AdaptiveConfig,
    pub epsilon: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub interior_grid: usize,
    pub feasibility_points: usize,
    pub qfunction_samples: usize,
    pub sim: SimConfig,
    pub starts: Vec<Vector>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{what}: non-finite entry")));
    }
    from_rows(rows).ok_or_else(|| invalid(format!("{what}: rows must be non-empty and of equal length")))
}

fn vector(v: &[f64], n: usize, what: &str) -> Result<Vector> {
    if v.len() != n {
        return Err(invalid(format!("{what}: expected length {n}, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{what}: non-finite entry")));
    }
    Ok(Vector::from_column_slice(v))
}

fn as_validation(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) | Error::UnsupportedGeometry(m) => Error::Validation(m),
        other => other,
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Builds every object and checks the standing assumptions.
    pub fn build(&self) -> Result<Scenario> {
        let clf_h = matrix(&self.clf.hessian, "clf.hessian")?;
        let n = clf_h.nrows();
        let center = vector(&self.clf.center, n, "clf.center")?;
        self.clf.gamma.validate().map_err(as_validation)?;
        let clf = TransformedClf::new(QuadraticFn::new(clf_h, center.clone()).map_err(as_validation)?, self.clf.gamma)
            .with_form(self.clf.form);
        if crate::linalg::min_sym_eigenvalue(clf.hessian()) <= 0.0 {
            return Err(invalid("clf.hessian must be positive definite"));
        }

        let plant = match &self.plant {
            PlantSpec::Lti { a, b, origin } => {
                let origin = match origin {
                    Some(o) => vector(o, n, "plant.origin")?,
                    None => center.clone(),
                };
                Plant::lti(matrix(a, "plant.a")?, matrix(b, "plant.b")?, origin).map_err(as_validation)?
            }
            PlantSpec::Driftless { g, gain } => {
                let base = matrix(g, "plant.g")?;
                let map = if *gain == 0.0 {
                    InputMap::Constant(base)
                } else {
                    InputMap::Scaled { base, gain: *gain }
                };
                Plant::driftless(map).map_err(as_validation)?
            }
        };
        if plant.dim() != n {
            return Err(invalid(format!("plant dimension {} differs from CLF dimension {n}", plant.dim())));
        }

        if self.barriers.len() > MAX_BARRIERS {
            return Err(invalid(format!("at most {MAX_BARRIERS} barriers are supported")));
        }
        let barriers = self
            .barriers
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let h = matrix(&b.hessian, &format!("barriers[{i}].hessian"))?;
                if h.nrows() != n {
                    return Err(invalid(format!("barriers[{i}] has the wrong dimension")));
                }
                let c = vector(&b.center, n, &format!("barriers[{i}].center"))?;
                QuadraticFn::new(h, c).map_err(as_validation)
            })
            .collect::<Result<Vec<_>>>()?;

        if !check_assumption1(&center, &barriers) {
            return Err(invalid("the CLF minimum lies outside the safe set"));
        }
        if !check_assumption2(&barriers).map_err(as_validation)? {
            return Err(invalid("unsafe regions of the barriers overlap"));
        }
        if !check_assumption3(&plant, &clf) {
            return Err(invalid("the CLF Hessian violates HA + AᵀH ⪯ 0"));
        }

        let cfg = ControllerConfig {
            p: self.controller.p,
            gamma: self.clf.gamma,
            alpha: self.controller.alpha,
            multiplier_tol: self.controller.multiplier_tol,
        };
        cfg.validate().map_err(as_validation)?;
        if !(cfg.multiplier_tol > 0.0) {
            return Err(invalid("controller.multiplier_tol must be positive"));
        }

        let ad = &self.adaptation;
        let adaptive =
            AdaptiveConfig { p_pi: ad.p_pi, gamma_pi: ad.gamma_pi, hysteresis: ad.hysteresis, pd_floor: ad.pd_floor };
        adaptive.validate().map_err(as_validation)?;
        if !(ad.epsilon > 1.0) {
            return Err(invalid("adaptation.epsilon must exceed 1"));
        }

        let (lo, hi) = self.analysis_box(&center, &barriers)?;
        let s = &self.simulation;
        if !(s.dt > 0.0 && s.t_end >= s.dt && s.conv_tol > 0.0 && s.stall_speed >= 0.0) {
            return Err(invalid("simulation needs dt > 0, t_end ≥ dt and conv_tol > 0"));
        }
        let sim = SimConfig { t_end: s.t_end, dt: s.dt, conv_tol: s.conv_tol, stall_speed: s.stall_speed };
        let starts = self.starts(n, &lo, &hi, &barriers)?;

        Ok(Scenario {
            name: self.name.clone(),
            seed: self.seed,
            plant,
            clf,
            barriers,
            cfg,
            adaptive,
            epsilon: ad.epsilon,
            lo,
            hi,
            interior_grid: self.analysis.interior_grid.max(1),
            feasibility_points: self.analysis.feasibility_points,
            qfunction_samples: self.analysis.qfunction_samples.max(2),
            sim,
            starts,
        })
    }

    fn analysis_box(&self, center: &Vector, barriers: &[QuadraticFn]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = center.len();
        match (&self.analysis.lo, &self.analysis.hi) {
            (Some(lo), Some(hi)) => {
                let (lo, hi) = (vector(lo, n, "analysis.lo")?, vector(hi, n, "analysis.hi")?);
                if lo.iter().zip(hi.iter()).any(|(a, b)| a >= b) {
                    return Err(invalid("analysis box needs lo < hi"));
                }
                Ok((lo.iter().copied().collect(), hi.iter().copied().collect()))
            }
            (None, None) => {
                let reach = barriers.iter().map(|b| (&b.center - center).amax()).fold(0.0, f64::max) + 5.0;
                Ok((center.iter().map(|c| c - reach).collect(), center.iter().map(|c| c + reach).collect()))
            }
            _ => Err(invalid("analysis.lo and analysis.hi must be given together")),
        }
    }

    /// Explicit starts, then ring, grid and seeded random starts; only those
    /// strictly inside the safe set are kept.
    fn starts(&self, n: usize, lo: &[f64], hi: &[f64], barriers: &[QuadraticFn]) -> Result<Vec<Vector>> {
        let s = &self.simulation;
        let mut out = Vec::new();
        for (i, x) in s.starts.iter().enumerate() {
            out.push(vector(x, n, &format!("simulation.starts[{i}]"))?);
        }
        if let Some(r) = &s.ring {
            let c = vector(&r.center, n, "simulation.ring.center")?;
            if n < 2 || !(r.radius > 0.0) {
                return Err(invalid("simulation.ring needs n ≥ 2 and a positive radius"));
            }
            for k in 0..r.count {
                let th = 2.0 * std::f64::consts::PI * k as f64 / r.count as f64;
                let mut x = c.clone();
                x[0] += r.radius * th.cos();
                x[1] += r.radius * th.sin();
                out.push(x);
            }
        }
        if let Some(g) = &s.grid {
            let glo = vector(&g.lo, n, "simulation.grid.lo")?;
            let ghi = vector(&g.hi, n, "simulation.grid.hi")?;
            out.extend(box_grid(glo.as_slice(), ghi.as_slice(), g.per_axis));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut drawn = 0;
        let mut attempts = 0;
        while drawn < s.random {
            attempts += 1;
            if attempts > 1000 * s.random {
                return Err(invalid("could not place random starts inside the safe set"));
            }
            let x = Vector::from_fn(n, |d, _| rng.gen_range(lo[d]..hi[d]));
            if barriers.iter().all(|b| barrier_eval(b, &x).0 > 0.0) {
                out.push(x);
                drawn += 1;
            }
        }
        Ok(out.into_iter().filter(|x| barriers.iter().all(|b| barrier_eval(b, x).0 > 0.0)).collect())
    }
}

impl Scenario {
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let mut file = ScenarioFile::load(path)?;
        if let Some(s) = seed {
            file.seed = s;
        }
        file.build()
    }

    pub fn parse(text: &str, seed: Option<u64>) -> Result<Self> {
        let mut file = ScenarioFile::parse(text)?;
        if let Some(s) = seed {
            file.seed = s;
        }
        file.build()
    }
}

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("radial_driftless", include_str!("../../scenarios/radial_driftless.toml")),
    ("driftless_three", include_str!("../../scenarios/driftless_three.toml")),
    ("lti_single", include_str!("../../scenarios/lti_single.toml")),
    ("fig1_scenario", include_str!("../../scenarios/fig1_scenario.toml")),
    ("fig2_scenario", include_str!("../../scenarios/fig2_scenario.toml")),
    ("fig3_scenario", include_str!("../../scenarios/fig3_scenario.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[plant]
kind = "driftless"
g = [[1.0, 0.0], [0.0, 1.0]]
[clf]
hessian = [[1.0, 0.0], [0.0, 1.0]]
center = [0.0, 0.0]
[[barriers]]
hessian = [[1.0, 0.0], [0.0, 1.0]]
center = [3.0, 0.0]
[simulation]
starts = [[3.0, 0.0], [8.0, 0.0]]
"#;

    #[test]
    fn minimal_scenario_builds() {
        let s = Scenario::parse(MINIMAL, None).unwrap();
        assert_eq!(s.barriers.len(), 1);
        // the start inside the obstacle is dropped
        assert_eq!(s.starts.len(), 1);
        assert_eq!(s.sim.dt, 1e-3);
        assert_eq!(s.lo, vec![-8.0, -8.0]);
    }

    #[test]
    fn assumption_violations_are_validation_errors() {
        let bad = MINIMAL.replace("center = [3.0, 0.0]", "center = [0.5, 0.0]");
        assert!(matches!(Scenario::parse(&bad, None), Err(Error::Validation(_))));
        let unknown = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(Scenario::parse(&unknown, None), Err(Error::Parse(_))));
    }

    #[test]
    fn bundled_scenarios_build() {
        for (name, text) in BUNDLED {
            let s = Scenario::parse(text, None).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!s.starts.is_empty(), "{name}");
        }
    }
}
