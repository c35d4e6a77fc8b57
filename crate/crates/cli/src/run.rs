//! Executes a validated scenario and writes its outputs and summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use gaussdyn::bipartite::{full_flow, BipartiteSystem, BundleOptions, FlowBundle, FlowSample};
use gaussdyn::models::qbm_residual;
use gaussdyn::par::Execution;
use gaussdyn::reduced::critical::{critical_time, CriticalTimeOptions};
use gaussdyn::reduced::master::{coefficients_at, timescale, SINGULAR_TOL};
use gaussdyn::reduced::rates::{correlation_rate, purity_rate_initial};
use gaussdyn::reduced::wigner::{grid_trace, reduced_wigner_grid, sample_gaussian, Axis, PhaseGrid, WignerOptions};
use gaussdyn::reduced::{evolve_reduced, reduced_moments};
use gaussdyn::states::{purity_of_covariance, GaussianState, VALIDITY_TOL};
use gaussdyn::Vector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{matrix_columns, row_major, vector_columns, Format, Series};
use crate::scenario::{Output, Scenario, ScenarioDoc};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub format: Format,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub status: &'static str,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    /// Largest `|M^T J M - J| / max(1, |M|²)` over the full and interaction flows.
    pub max_symplectic_deviation: Option<f64>,
    pub min_symplectic_eigenvalue: Option<f64>,
    pub t_c: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub version: &'static str,
    pub scenario: ScenarioDoc,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub outputs: BTreeMap<&'static str, OutputEntry>,
    pub diagnostics: Diagnostics,
    pub scalars: BTreeMap<String, Value>,
    pub total_seconds: f64,
}

impl RunReport {
    pub fn failed(&self) -> bool {
        self.outputs.values().any(|o| o.status != "ok")
    }
}

struct Runner<'a> {
    sc: &'a Scenario,
    opts: &'a RunOptions,
    bundle: Option<FlowBundle>,
    diagnostics: Diagnostics,
    scalars: BTreeMap<String, Value>,
}

/// Error together with the files that were written before it occurred.
struct Partial {
    files: Vec<String>,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Partial {
    fn from(error: anyhow::Error) -> Self {
        Self { files: Vec::new(), error }
    }
}

impl From<gaussdyn::Error> for Partial {
    fn from(e: gaussdyn::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Step = std::result::Result<Vec<String>, Partial>;

impl<'a> Runner<'a> {
    fn file(&self, stem: &str) -> (PathBuf, String) {
        let name = format!("{stem}.{}", self.opts.format.extension());
        (self.opts.out.join(&name), name)
    }

    fn write(&self, stem: &str, series: &Series) -> Result<String> {
        let (path, name) = self.file(stem);
        series.write(&path, self.opts.format)?;
        Ok(name)
    }

    fn bundle(&mut self) -> Result<&FlowBundle> {
        if self.bundle.is_none() {
            let opts = BundleOptions {
                tol: self.sc.doc.tolerances.ode,
                execution: Execution::default(),
            };
            let b = full_flow(&self.sc.system, &self.sc.time_grid(), &opts)?;
            self.diagnostics.max_symplectic_deviation = Some(b.max_relative_deviation);
            self.bundle = Some(b);
        }
        Ok(self.bundle.as_ref().expect("bundle computed above"))
    }

    /// Flow and state diagnostics over the time grid, if no output computed them.
    fn fill_diagnostics(&mut self) {
        if self.diagnostics.min_symplectic_eigenvalue.is_some() {
            return;
        }
        let (s0, e0) = (self.sc.s0.clone(), self.sc.e0.clone());
        if let Ok(b) = self.bundle() {
            if let Ok(traj) = evolve_reduced(b, &s0, &e0, Execution::default()) {
                self.diagnostics.min_symplectic_eigenvalue = Some(traj.min_symplectic_eigenvalue());
            }
        }
    }

    fn trajectory(&mut self) -> Step {
        let (s0, e0) = (self.sc.s0.clone(), self.sc.e0.clone());
        let traj = evolve_reduced(self.bundle()?, &s0, &e0, Execution::default())?;
        let s = 2 * self.sc.system.d();
        let mut cols = vec!["t".to_string()];
        cols.extend(matrix_columns("gamma_s", s, s));
        cols.extend(vector_columns("m_s", s));
        cols.extend(["purity", "linear_entropy", "von_neumann_entropy", "det_phi_ii"].map(String::from));
        let mut series = Series::new(cols);
        for p in &traj.points {
            let mut row = vec![p.t];
            row.extend(row_major(&p.cov));
            row.extend(p.mean.iter().copied());
            row.extend([p.purity, p.linear_entropy, p.von_neumann_entropy, p.det_ii]);
            series.push(row);
        }
        self.diagnostics.min_symplectic_eigenvalue = Some(traj.min_symplectic_eigenvalue());
        Ok(vec![self.write("trajectory", &series)?])
    }

    fn coefficients(&mut self) -> Step {
        let picture = self.sc.picture();
        let e0 = self.sc.e0.clone();
        let s = 2 * self.sc.system.d();
        let mut cols = vec!["t".to_string()];
        cols.extend(matrix_columns("a", s, s));
        cols.extend(matrix_columns("b", s, s));
        cols.extend(vector_columns("v", s));
        cols.extend(matrix_columns("theta", s, s));
        let mut series = Series::new(cols);
        // sequential so that the file stops at the first singular time
        for sample in &self.bundle()?.samples {
            match coefficients_at(sample, &e0, picture) {
                Ok(c) => {
                    let mut row = vec![c.t];
                    row.extend(row_major(&c.a));
                    row.extend(row_major(&c.b));
                    row.extend(c.v.iter().copied());
                    row.extend(row_major(&c.theta));
                    series.push(row);
                }
                Err(e) => {
                    series.failure = Some(e.to_string());
                    break;
                }
            }
        }
        let name = self.write("coefficients", &series)?;
        match series.failure {
            Some(f) => Err(Partial {
                files: vec![name],
                error: anyhow::anyhow!(f),
            }),
            None => Ok(vec![name]),
        }
    }

    fn critical_time(&mut self) -> Step {
        let doc = &self.sc.doc;
        let t_max = doc.critical_time.t_max.unwrap_or(doc.time.t_max);
        let opts = CriticalTimeOptions {
            step: doc.critical_time.step,
            margin: doc.tolerances.near_miss,
            rel_tol: doc.tolerances.root,
            ode_tol: doc.tolerances.ode,
            execution: Execution::default(),
        };
        let r = critical_time(&self.sc.system, t_max, &opts)?;
        self.diagnostics.t_c = r.t_c;
        self.scalars.insert(
            "critical_time".into(),
            json!({
                "t_c": r.t_c,
                "t_max": r.t_max,
                "step": r.step,
                "samples": r.samples,
                "min_abs_det_phi_ii": r.min_abs_det,
                "scaled_t_c": r.scaled_t_c,
                "warnings": r.warnings,
            }),
        );
        Ok(Vec::new())
    }

    fn purity_rate(&mut self) -> Step {
        let (sys, s0, e0) = (&self.sc.system, &self.sc.s0, &self.sc.e0);
        let r = purity_rate_initial(sys, s0, e0)?;
        let h = self.sc.doc.tolerances.fd_step * timescale(sys)?;
        let fd = purity_fd(sys, s0, e0, h, self.sc.doc.tolerances.ode)?;
        self.scalars.insert("ddot_purity".into(), json!(r.value));
        self.scalars.insert(
            "purity_rate".into(),
            json!({
                "ddot_purity": r.value,
                "classical": r.classical,
                "quantum_correction": r.quantum_correction,
                "finite_difference": fd,
                "finite_difference_step": h,
            }),
        );
        Ok(Vec::new())
    }

    fn correlation_rate(&mut self) -> Step {
        let r = correlation_rate(&self.sc.system, &self.sc.s0, &self.sc.e0)?;
        let rows = |m: &gaussdyn::Mat| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        self.scalars.insert(
            "correlation_rate".into(),
            json!({
                "rate": rows(&r.rate),
                "norm": r.norm,
                "criterion": rows(&r.criterion),
                "criterion_norm": r.criterion_norm,
                "correlated": r.correlated,
            }),
        );
        Ok(Vec::new())
    }

    fn wigner(&mut self) -> Step {
        let spec = self.sc.doc.wigner.clone().context("missing [wigner] table")?;
        let d = self.sc.system.d();
        let axes = vec![Axis::symmetric(spec.half_width, spec.points); 2 * d];
        let grid = PhaseGrid::new(axes)?;
        let f0 = sample_gaussian(&grid, &self.sc.s0)?;
        let times = spec.times.clone().unwrap_or_else(|| vec![self.sc.doc.time.t_max]);
        let mut cols: Vec<String> = if d == 1 {
            vec!["x".into(), "xi".into()]
        } else {
            let mut c = vector_columns("x", d);
            c.extend(vector_columns("xi", d));
            c
        };
        cols.push("w".into());
        let mut files = Vec::new();
        let mut reports = Vec::new();
        for (k, &t) in times.iter().enumerate() {
            let result = FlowSample::at(&self.sc.system, t, self.sc.doc.tolerances.ode)
                .and_then(|s| reduced_wigner_grid(&s, &grid, &f0, &self.sc.e0, &WignerOptions::default()));
            let out = match result {
                Ok(o) => o,
                Err(e) => {
                    self.scalars.insert("wigner_grid".into(), Value::Array(reports));
                    return Err(Partial {
                        files,
                        error: anyhow::anyhow!("t = {t}: {e}"),
                    });
                }
            };
            let mut series = Series::new(cols.clone());
            for (idx, w) in out.samples.iter().enumerate() {
                let mut row: Vec<f64> = grid.point(idx).iter().copied().collect();
                row.push(*w);
                series.push(row);
            }
            files.push(self.write(&format!("wigner_{k}"), &series)?);
            reports.push(json!({
                "t": t,
                "file": files.last(),
                "resolved": out.resolved,
                "band_edge_ratio": out.band_edge_ratio,
                "max_imag": out.max_imag,
                "trace": grid_trace(&grid, &out.samples),
            }));
        }
        self.scalars.insert("wigner_grid".into(), Value::Array(reports));
        Ok(files)
    }

    fn qbm_residual(&mut self) -> Step {
        let p = self.sc.qbm.clone().context("qbm_residual needs the qbm model")?;
        let spec = self.sc.doc.qbm_residual.clone().context("missing [qbm_residual] table")?;
        let opts = BundleOptions {
            tol: self.sc.doc.tolerances.ode,
            execution: Execution::default(),
        };
        let r = qbm_residual(&p, &Vector::from_vec(spec.initial), &self.sc.time_grid(), &opts)?;
        let mut series = Series::new(vec!["t".into(), "x".into(), "residual".into()]);
        for k in 0..r.t.len() {
            series.push(vec![r.t[k], r.x[k], r.residual[k]]);
        }
        self.scalars.insert("qbm_residual_sup_norm".into(), json!(r.sup_norm));
        Ok(vec![self.write("qbm_residual", &series)?])
    }
}

/// Five-point second derivative of the exact reduced purity at `t = 0`.
fn purity_fd(sys: &BipartiteSystem, s0: &GaussianState, e0: &GaussianState, h: f64, tol: f64) -> Result<f64> {
    let p = |t: f64| -> Result<f64> {
        let sample = FlowSample::at(sys, t, tol)?;
        Ok(purity_of_covariance(&reduced_moments(&sample, s0, e0).1))
    };
    Ok((-p(2.0 * h)? + 16.0 * p(h)? - 30.0 * p(0.0)? + 16.0 * p(-h)? - p(-2.0 * h)?) / (12.0 * h * h))
}

pub fn tolerance_table(sc: &Scenario) -> BTreeMap<&'static str, f64> {
    let t = &sc.doc.tolerances;
    let w = WignerOptions::default();
    BTreeMap::from([
        ("ode", t.ode),
        ("critical_time_root", t.root),
        ("critical_time_near_miss", t.near_miss),
        ("purity_fd_step", t.fd_step),
        ("state_validity", VALIDITY_TOL),
        ("singular_block", SINGULAR_TOL),
        ("wigner_boundary_decay", w.boundary_tol),
        ("wigner_band_edge", w.band_tol),
    ])
}

/// Runs every requested output; failures are recorded in the report rather
/// than aborting the remaining outputs.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    std::fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let mut runner = Runner {
        sc,
        opts,
        bundle: None,
        diagnostics: Diagnostics::default(),
        scalars: BTreeMap::new(),
    };
    let mut outputs = BTreeMap::new();
    for &o in &sc.outputs {
        let t0 = Instant::now();
        let step = match o {
            Output::Trajectory => runner.trajectory(),
            Output::Coefficients => runner.coefficients(),
            Output::CriticalTime => runner.critical_time(),
            Output::PurityRate => runner.purity_rate(),
            Output::CorrelationRate => runner.correlation_rate(),
            Output::WignerGrid => runner.wigner(),
            Output::QbmResidual => runner.qbm_residual(),
        };
        let seconds = t0.elapsed().as_secs_f64();
        let entry = match step {
            Ok(files) => OutputEntry {
                status: "ok",
                files,
                error: None,
                seconds,
            },
            Err(p) => OutputEntry {
                status: "failed",
                files: p.files,
                error: Some(format!("{:#}", p.error)),
                seconds,
            },
        };
        outputs.insert(o.name(), entry);
    }
    runner.fill_diagnostics();
    let report = RunReport {
        name: sc.doc.name.clone(),
        version: gaussdyn::VERSION,
        scenario: sc.doc.clone(),
        tolerances: tolerance_table(sc),
        outputs,
        diagnostics: runner.diagnostics,
        scalars: runner.scalars,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    write_summary(&opts.out, &report)?;
    Ok(report)
}

pub fn write_summary(dir: &Path, report: &RunReport) -> Result<()> {
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
