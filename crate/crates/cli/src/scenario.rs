//! Scenario files: TOML documents describing one run (or a sweep of runs).

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};
use gaussdyn::bipartite::BipartiteSystem;
use gaussdyn::hamiltonian::QuadraticHamiltonian;
use gaussdyn::models::{qbm_build, two_oscillator_system, QBMParams, TwoOscillatorParams};
use gaussdyn::reduced::Picture;
use gaussdyn::states::{thermal_state, validate, GaussianState};
use gaussdyn::{Mat, Vector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{key}: {message}")]
    Schema { key: String, message: String },
    #[error(
        "{key}: not a valid quantum state, smallest symplectic eigenvalue {min_symplectic_eigenvalue} is below the bound 1/2"
    )]
    InvalidState { key: String, min_symplectic_eigenvalue: f64 },
}

fn schema(key: &str, message: impl Into<String>) -> anyhow::Error {
    ScenarioError::Schema {
        key: key.into(),
        message: message.into(),
    }
    .into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Trajectory,
    Coefficients,
    CriticalTime,
    PurityRate,
    CorrelationRate,
    WignerGrid,
    QbmResidual,
}

impl Output {
    pub fn name(self) -> &'static str {
        match self {
            Output::Trajectory => "trajectory",
            Output::Coefficients => "coefficients",
            Output::CriticalTime => "critical_time",
            Output::PurityRate => "purity_rate",
            Output::CorrelationRate => "correlation_rate",
            Output::WignerGrid => "wigner_grid",
            Output::QbmResidual => "qbm_residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    TwoOscillator {
        omega_s: f64,
        omega_e_sq: f64,
        gamma: f64,
    },
    Qbm {
        #[serde(default = "one")]
        mass: f64,
        omega_s: f64,
        k: Vec<f64>,
    },
    Custom {
        /// Hessian of `H_S`, rows.
        hs: Vec<Vec<f64>>,
        /// Hessian of `H_E`, rows.
        he: Vec<Vec<f64>>,
        /// Coupling matrix `G` (`2d x 2N`), rows.
        g: Vec<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Vacuum {
        mean: Option<Vec<f64>>,
    },
    /// Gibbs state of the subsystem's own Hamiltonian.
    Thermal {
        beta: f64,
        mean: Option<Vec<f64>>,
    },
    /// Every mode thermal with parameter `τ` in the standard oscillator basis.
    Tau {
        tau: f64,
        mean: Option<Vec<f64>>,
    },
    Squeezed {
        r: f64,
        mean: Option<Vec<f64>>,
    },
    Custom {
        mean: Option<Vec<f64>>,
        covariance: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Integrator tolerance for time-dependent flows and the moment equations.
    #[serde(default = "default_ode")]
    pub ode: f64,
    /// Relative bisection tolerance for the critical time.
    #[serde(default = "default_root")]
    pub root: f64,
    /// `|det Φ_ii|` below this without a sign change is reported as a near miss.
    #[serde(default = "default_margin")]
    pub near_miss: f64,
    /// Step of the finite-difference cross-check of the purity rate, in units
    /// of the generator time scale.
    #[serde(default = "default_fd")]
    pub fd_step: f64,
}

fn default_ode() -> f64 {
    1e-10
}
fn default_root() -> f64 {
    1e-10
}
fn default_margin() -> f64 {
    1e-6
}
fn default_fd() -> f64 {
    0.01
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: default_ode(),
            root: default_root(),
            near_miss: default_margin(),
            fd_step: default_fd(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalTimeSpec {
    /// Search horizon; defaults to `time.t_max`.
    pub t_max: Option<f64>,
    /// Sampling step; defaults to `0.02 / |K|_F`.
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSpec {
    /// The grid covers `[-half_width, half_width]` on every axis.
    pub half_width: f64,
    pub points: usize,
    /// Output times; defaults to `[time.t_max]`.
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QbmResidualSpec {
    /// Initial phase point `(x, ξ, y_1..y_N, η_1..η_N)`.
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    pub model: ModelSpec,
    pub system: StateSpec,
    pub environment: StateSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub picture: PictureSpec,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub critical_time: CriticalTimeSpec,
    pub wigner: Option<WignerSpec>,
    pub qbm_residual: Option<QbmResidualSpec>,
}

fn default_outputs() -> Vec<Output> {
    vec![Output::Trajectory]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PictureSpec {
    #[default]
    Interaction,
    Schrodinger,
}

impl From<PictureSpec> for Picture {
    fn from(p: PictureSpec) -> Self {
        match p {
            PictureSpec::Interaction => Picture::Interaction,
            PictureSpec::Schrodinger => Picture::Schrodinger,
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub system: BipartiteSystem,
    pub s0: GaussianState,
    pub e0: GaussianState,
    pub qbm: Option<QBMParams>,
    pub outputs: BTreeSet<Output>,
}

impl Scenario {
    pub fn picture(&self) -> Picture {
        self.doc.picture.into()
    }

    /// `steps + 1` equally spaced times on `[0, t_max]`.
    pub fn time_grid(&self) -> Vec<f64> {
        let TimeSpec { t_max, steps } = self.doc.time;
        (0..=steps).map(|k| t_max * k as f64 / steps as f64).collect()
    }
}

fn matrix(key: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(schema(key, "matrix is empty"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(schema(key, format!("row {i} has {} entries, expected {m}", r.len())));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(schema(key, "entries must be finite"));
    }
    Ok(Mat::from_row_slice(n, m, &flat))
}

fn symmetric(key: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    let m = matrix(key, rows)?;
    if !m.is_square() || m.nrows() % 2 != 0 {
        return Err(schema(key, format!("expected an even-sized square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let asym = (&m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(1.0) {
        return Err(schema(key, format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(m)
}

fn build_state(key: &str, spec: &StateSpec, hamiltonian: &QuadraticHamiltonian) -> Result<GaussianState> {
    let n = hamiltonian.dof();
    let (state, mean) = match spec {
        StateSpec::Vacuum { mean } => (GaussianState::vacuum(n), mean),
        StateSpec::Thermal { beta, mean } => (
            thermal_state(hamiltonian, *beta).with_context(|| format!("{key}: thermal state"))?,
            mean,
        ),
        StateSpec::Tau { tau, mean } => (
            GaussianState::thermal_tau(n, *tau).map_err(|e| schema(key, e.to_string()))?,
            mean,
        ),
        StateSpec::Squeezed { r, mean } => (
            GaussianState::squeezed(n, *r).map_err(|e| schema(key, e.to_string()))?,
            mean,
        ),
        StateSpec::Custom { mean, covariance } => {
            let cov = symmetric(&format!("{key}.covariance"), covariance)?;
            if cov.nrows() != 2 * n {
                return Err(schema(
                    &format!("{key}.covariance"),
                    format!("expected {0}x{0} for {n} degrees of freedom, got {1}x{1}", 2 * n, cov.nrows()),
                ));
            }
            let state = GaussianState::centered(cov).map_err(|e| schema(&format!("{key}.covariance"), e.to_string()))?;
            (state, mean)
        }
    };
    let state = match mean {
        Some(m) => {
            if m.len() != 2 * n {
                return Err(schema(
                    &format!("{key}.mean"),
                    format!("expected {} entries, got {}", 2 * n, m.len()),
                ));
            }
            state
                .with_mean(Vector::from_vec(m.clone()))
                .map_err(|e| schema(&format!("{key}.mean"), e.to_string()))?
        }
        None => state,
    };
    let report = validate(&state)?;
    if !report.valid {
        return Err(ScenarioError::InvalidState {
            key: key.into(),
            min_symplectic_eigenvalue: report.min,
        }
        .into());
    }
    Ok(state)
}

fn build_system(model: &ModelSpec) -> Result<(BipartiteSystem, Option<QBMParams>)> {
    Ok(match model {
        ModelSpec::TwoOscillator {
            omega_s,
            omega_e_sq,
            gamma,
        } => {
            let p = TwoOscillatorParams::new(*omega_s, *omega_e_sq, *gamma).map_err(|e| schema("model", e.to_string()))?;
            (two_oscillator_system(&p)?, None)
        }
        ModelSpec::Qbm { mass, omega_s, k } => {
            let p = QBMParams::new(*mass, *omega_s, k.clone()).map_err(|e| schema("model", e.to_string()))?;
            (qbm_build(&p)?, Some(p))
        }
        ModelSpec::Custom { hs, he, g } => {
            let hs = symmetric("model.hs", hs)?;
            let he = symmetric("model.he", he)?;
            let g = matrix("model.g", g)?;
            if g.nrows() != hs.nrows() || g.ncols() != he.nrows() {
                return Err(schema(
                    "model.g",
                    format!(
                        "expected {}x{} to couple the given Hamiltonians, got {}x{}",
                        hs.nrows(),
                        he.nrows(),
                        g.nrows(),
                        g.ncols()
                    ),
                ));
            }
            let sys = BipartiteSystem::new(QuadraticHamiltonian::new(hs)?, QuadraticHamiltonian::new(he)?, g)?;
            (sys, None)
        }
    })
}

impl ScenarioDoc {
    pub fn validate(self) -> Result<Scenario> {
        if !(self.time.t_max > 0.0 && self.time.t_max.is_finite()) {
            return Err(schema("time.t_max", format!("must be positive, got {}", self.time.t_max)));
        }
        if self.time.steps == 0 {
            return Err(schema("time.steps", "must be at least 1"));
        }
        let tol = &self.tolerances;
        for (key, v) in [
            ("tolerances.ode", tol.ode),
            ("tolerances.root", tol.root),
            ("tolerances.near_miss", tol.near_miss),
            ("tolerances.fd_step", tol.fd_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(schema(key, format!("must be positive, got {v}")));
            }
        }
        let (system, qbm) = build_system(&self.model)?;
        let s0 = build_state("system", &self.system, system.hs())?;
        let e0 = build_state("environment", &self.environment, system.he())?;
        let outputs: BTreeSet<Output> = self.outputs.iter().copied().collect();
        if outputs.contains(&Output::WignerGrid) {
            let w = self
                .wigner
                .as_ref()
                .ok_or_else(|| schema("wigner", "the wigner_grid output needs a [wigner] table"))?;
            if system.d() > 2 {
                return Err(schema("wigner", "grid propagation supports at most 2 system degrees of freedom"));
            }
            if !(w.half_width > 0.0) || w.points < 8 {
                return Err(schema("wigner", "half_width must be positive and points at least 8"));
            }
        }
        if outputs.contains(&Output::QbmResidual) {
            let Some(p) = &qbm else {
                return Err(schema("outputs", "qbm_residual needs model.kind = \"qbm\""));
            };
            let r = self
                .qbm_residual
                .as_ref()
                .ok_or_else(|| schema("qbm_residual", "the qbm_residual output needs a [qbm_residual] table"))?;
            if r.initial.len() != 2 + 2 * p.n() {
                return Err(schema(
                    "qbm_residual.initial",
                    format!("expected {} entries, got {}", 2 + 2 * p.n(), r.initial.len()),
                ));
            }
        }
        Ok(Scenario {
            doc: self,
            system,
            s0,
            e0,
            qbm,
            outputs,
        })
    }
}

/// Reads a scenario file; a top-level `sweep` array of tables expands into
/// one run per entry, each entry being merged over the base document.
pub fn load(path: &Path) -> Result<Vec<ScenarioDoc>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in scenario {}", path.display()))
}

pub fn parse(text: &str) -> Result<Vec<ScenarioDoc>> {
    let mut root: toml::Table = text.parse()?;
    let sweep = root.remove("sweep");
    let base = toml::Value::Table(root);
    let docs = match sweep {
        None => vec![base],
        Some(toml::Value::Array(entries)) => {
            if entries.is_empty() {
                return Err(schema("sweep", "empty sweep"));
            }
            let mut out = Vec::with_capacity(entries.len());
            for (i, entry) in entries.into_iter().enumerate() {
                let toml::Value::Table(t) = entry else {
                    return Err(schema(&format!("sweep[{i}]"), "expected a table"));
                };
                let mut doc = base.clone();
                merge(&mut doc, toml::Value::Table(t));
                if let toml::Value::Table(d) = &mut doc {
                    let name = d.get("name").and_then(|v| v.as_str()).unwrap_or("run").to_string();
                    d.insert("name".into(), toml::Value::String(format!("{name}-{i}")));
                }
                out.push(doc);
            }
            out
        }
        Some(_) => return Err(schema("sweep", "expected an array of tables ([[sweep]])")),
    };
    docs.into_iter()
        .map(|v| ScenarioDoc::deserialize(v).map_err(anyhow::Error::from))
        .collect()
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
[model]
kind = "two_oscillator"
omega_s = 1.0
omega_e_sq = 1.0
gamma = 0.5
[system]
preset = "vacuum"
[environment]
preset = "vacuum"
[time]
t_max = 10.0
steps = 1000
"#;

    #[test]
    fn minimal_two_oscillator() {
        let docs = parse(MINIMAL).unwrap();
        assert_eq!(docs.len(), 1);
        let s = docs.into_iter().next().unwrap().validate().unwrap();
        assert_eq!(s.time_grid().len(), 1001);
        assert_eq!(s.outputs.len(), 1);
        assert_eq!(s.picture(), Picture::Interaction);
    }

    #[test]
    fn rejects_sub_bound_covariance() {
        let text = MINIMAL.replace(
            "[system]\npreset = \"vacuum\"",
            "[system]\npreset = \"custom\"\ncovariance = [[0.4, 0.0], [0.0, 0.4]]",
        );
        let err = parse(&text).unwrap().remove(0).validate().unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("0.4") && msg.contains("1/2"), "{msg}");
    }

    #[test]
    fn unknown_key_is_reported() {
        let text = MINIMAL.replace("gamma = 0.5", "gamma = 0.5\ngama = 1.0");
        let err = parse(&text).unwrap_err();
        assert!(format!("{err:#}").contains("gama"));
    }

    #[test]
    fn qbm_with_sixteen_springs() {
        let k: Vec<String> = (1..=16).map(|j| format!("{}", 0.05 * j as f64)).collect();
        let text = format!(
            "name = \"bath\"\n[model]\nkind = \"qbm\"\nomega_s = 1.0\nk = [{}]\n[system]\npreset = \"vacuum\"\n[environment]\npreset = \"thermal\"\nbeta = 2.0\n[time]\nt_max = 5.0\nsteps = 50\n",
            k.join(", ")
        );
        let s = parse(&text).unwrap().remove(0).validate().unwrap();
        assert_eq!(s.system.n_env(), 16);
        let ksum: f64 = (1..=16).map(|j| 0.05 * j as f64).sum();
        let hs = s.system.hs().hessian_at(0.0).unwrap();
        assert!((hs[(0, 0)] - (1.0 + ksum)).abs() < 1e-12);
    }

    #[test]
    fn sweep_expands_into_runs() {
        let text = format!("{MINIMAL}\n[[sweep]]\nmodel.gamma = 0.25\n[[sweep]]\nmodel.gamma = 0.125\n");
        let docs = parse(&text).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].name, "minimal-1");
        match &docs[1].model {
            ModelSpec::TwoOscillator { gamma, omega_s, .. } => {
                assert_eq!(*gamma, 0.125);
                assert_eq!(*omega_s, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
