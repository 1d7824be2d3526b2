//! Built-in reproductions of the cavity and squeezer experiments.

use num_complex::Complex64;
use qest_core::care::{solve_filter_care, SolveOptions};
use qest_core::estimation::{build_classical_problem, estimator_matrices, EstimationError, HomodyneSetup, SweepResult};
use qest_core::qsys::{check_realizable_passive, QuantumSystem};
use qest_core::ComplexMatrix;

use crate::config::{AngleGrid, ModelSpec, OutputSpec, RunConfig, SolverSpec};

/// Equality tolerance for the passive-plant cost claims.
pub const COST_TOL: f64 = 1e-8;
/// Bound on the classical filter gain for a passive plant.
pub const GAIN_TOL: f64 = 1e-9;

/// One checked statement about a demo's results.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub label: String,
    pub holds: bool,
    pub detail: String,
}

/// Everything a demo needs to check its claims.
pub struct DemoRun<'a> {
    pub plant: &'a QuantumSystem,
    pub controller: Option<&'a QuantumSystem>,
    pub result: &'a SweepResult,
    pub opts: &'a SolveOptions,
}

pub trait Demo: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn config(&self) -> RunConfig;

    fn verify(&self, run: &DemoRun<'_>) -> Result<Vec<Claim>, EstimationError>;
}

const COST_ROW: [f64; 2] = [0.2, -0.2];

fn cascade_config(plant_chi: f64, controller_chi: f64) -> RunConfig {
    RunConfig {
        plant: ModelSpec::squeezer(4.0, &[4.0], Complex64::new(plant_chi, 0.0)).with_cost_row(&COST_ROW),
        controller: Some(ModelSpec::squeezer(16.0, &[16.0], Complex64::new(controller_chi, 0.0))),
        cost_row: None,
        angles: AngleGrid::default(),
        solver: SolverSpec::default(),
        outputs: OutputSpec::default(),
    }
}

pub struct PassiveCavity;

impl Demo for PassiveCavity {
    fn name(&self) -> &'static str {
        "passive"
    }

    fn description(&self) -> &'static str {
        "passive cavity plant (gamma = kappa = 4) with a squeezer controller (gamma = kappa = 16, chi = 2)"
    }

    fn config(&self) -> RunConfig {
        cascade_config(0.0, 2.0)
    }

    fn verify(&self, run: &DemoRun<'_>) -> Result<Vec<Claim>, EstimationError> {
        let mut gap: f64 = 0.0;
        for row in &run.result.rows {
            let coh = row.cost_coherent.ok_or(EstimationError::MissingController("coherent"))?;
            gap = gap.max((coh - row.cost_classical).abs());
        }

        let c = run.plant.cost_row().ok_or(EstimationError::MissingCostRow)?;
        let passive = run.plant.passive_part().ok_or(EstimationError::InvalidProblem("plant is not passive".into()))?;
        let check = check_realizable_passive(&passive)?;
        let theta1 = check
            .theta()
            .ok_or(EstimationError::InvalidProblem("plant fails the passive realizability check".into()))?
            .matrix()
            .clone();
        let n = theta1.rows();
        let z = ComplexMatrix::zeros(n, n);
        let theta = ComplexMatrix::from_blocks(&[&[&theta1, &z], &[&z, &theta1.conj()]])?;
        let expected = (c * &theta * &c.adjoint()).get(0, 0).re;
        let off: f64 = run
            .result
            .rows
            .iter()
            .flat_map(|r| std::iter::once(r.cost_classical).chain(r.cost_coherent))
            .map(|v| (v - expected).abs())
            .fold(0.0, f64::max);

        let mut gain: f64 = 0.0;
        for row in &run.result.rows {
            let hd = HomodyneSetup::from_degrees(&vec![row.theta_deg; run.plant.channels()])?;
            let problem = build_classical_problem(run.plant, &hd)?;
            let sol = solve_filter_care(&problem, run.opts)?;
            gain = gain.max(estimator_matrices(&problem, &sol.p)?.ge.frobenius_norm());
        }

        Ok(vec![
            Claim {
                label: "coherent and classical costs agree at every angle".into(),
                holds: gap <= COST_TOL,
                detail: format!("max |coherent - classical| = {gap:e}"),
            },
            Claim {
                label: format!("both costs equal C Theta C^dagger = {expected}"),
                holds: off <= COST_TOL,
                detail: format!("max deviation = {off:e}"),
            },
            Claim {
                label: "classical Kalman gain vanishes".into(),
                holds: gain <= GAIN_TOL,
                detail: format!("max ||Ge||_F = {gain:e}"),
            },
        ])
    }
}

pub struct Squeezer;

/// Angle at which the coherent scheme is expected to win.
pub const SQUEEZER_PROBE_DEG: f64 = 40.0;

impl Demo for Squeezer {
    fn name(&self) -> &'static str {
        "squeezer"
    }

    fn description(&self) -> &'static str {
        "squeezer plant (gamma = kappa = 4, chi = 1) with a squeezer controller (gamma = kappa = 16, chi = 4)"
    }

    fn config(&self) -> RunConfig {
        cascade_config(1.0, 4.0)
    }

    fn verify(&self, run: &DemoRun<'_>) -> Result<Vec<Claim>, EstimationError> {
        let probe = run.result.row_at(SQUEEZER_PROBE_DEG);
        let (cl, coh) = match probe {
            Some(r) => (r.cost_classical, r.cost_coherent.unwrap_or(f64::NAN)),
            None => (f64::NAN, f64::NAN),
        };
        let best_cl = run.result.min_classical().unwrap_or(f64::NAN);
        let best_coh = run.result.min_coherent().unwrap_or(f64::NAN);
        Ok(vec![
            Claim {
                label: format!("coherent beats classical at theta = {SQUEEZER_PROBE_DEG} deg"),
                holds: coh < cl,
                detail: format!("coherent {coh}, classical {cl}"),
            },
            Claim {
                label: "best classical cost is at most the best coherent cost".into(),
                holds: best_cl <= best_coh,
                detail: format!("min classical {best_cl}, min coherent {best_coh}"),
            },
        ])
    }
}

#[derive(Default)]
pub struct DemoRegistry {
    demos: Vec<Box<dyn Demo>>,
}

impl DemoRegistry {
    pub fn builtin() -> Self {
        Self { demos: vec![Box::new(PassiveCavity), Box::new(Squeezer)] }
    }

    pub fn register(&mut self, demo: Box<dyn Demo>) -> bool {
        if self.get(demo.name()).is_some() {
            return false;
        }
        self.demos.push(demo);
        true
    }

    pub fn get(&self, name: &str) -> Option<&dyn Demo> {
        self.demos.iter().find(|d| d.name() == name).map(|d| d.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.demos.iter().map(|d| d.name()).collect()
    }
}
