//! Homodyne measurement, filter Riccati problems for the purely-classical
//! and coherent-classical schemes, estimator matrices and costs.
//!
//! In the classical scheme the plant output is measured directly. In the
//! coherent scheme it first drives a quantum controller and the controller
//! output is measured; the filter then runs on the plant–controller cascade.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::care::{self, CareError, SolveOptions};
use crate::linalg::{self, hermitian_deviation, inverse, is_positive_semidefinite, ComplexMatrix, LinalgError, C64};
use crate::qsys::{ModelError, QuantumSystem, REALIZABILITY_TOL};
use crate::scheme::SchemeRegistry;

/// Largest tolerated imaginary part of a cost, relative to `1 + |cost|`.
pub const IMAGINARY_COST_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("no homodyne angles given")]
    EmptyAngles,
    #[error("angle grid is empty")]
    EmptyGrid,
    #[error("noise is not canonical: ‖{which} − I‖_F = {residual:e}")]
    NonCanonicalK { which: &'static str, residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("coherent controller must have at least one mode")]
    EmptyController,
    #[error("scheme `{0}` needs a coherent controller")]
    MissingController(&'static str),
    #[error("no cost row C attached to the plant")]
    MissingCostRow,
    #[error("measurement noise covariance R is singular")]
    SingularR,
    #[error("cost has imaginary part {imag:e}; the covariance is not Hermitian")]
    ImaginaryCost { imag: f64 },
    #[error("invalid filter problem: {0}")]
    InvalidProblem(String),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("scheme `{0}` is already registered")]
    DuplicateScheme(String),
    #[error("{scheme} scheme failed at theta = {theta_deg} deg: {source}")]
    AtAngle {
        theta_deg: f64,
        scheme: String,
        #[source]
        source: Box<EstimationError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Care(#[from] CareError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Homodyne detection of one quadrature `cos θᵢ dYᵢ + sin θᵢ dYᵢ*` per
/// channel, collected in `L = [diag(cos θ), diag(sin θ)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneSetup {
    angles: Vec<f64>,
    l: ComplexMatrix,
}

impl HomodyneSetup {
    /// Angles in degrees; reduced modulo 360 before conversion so that `θ`
    /// and `θ + 360` give bit-identical setups.
    pub fn from_degrees(angles_deg: &[f64]) -> Result<Self, EstimationError> {
        let rad: Vec<f64> = angles_deg.iter().map(|d| d.rem_euclid(360.0).to_radians()).collect();
        homodyne_matrix(&rad)
    }

    /// Angles in radians, reduced to `[0, 2π)`.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn channels(&self) -> usize {
        self.angles.len()
    }

    pub fn l(&self) -> &ComplexMatrix {
        &self.l
    }
}

/// Builds `L` from angles in radians.
pub fn homodyne_matrix(angles: &[f64]) -> Result<HomodyneSetup, EstimationError> {
    if angles.is_empty() {
        return Err(EstimationError::EmptyAngles);
    }
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(EstimationError::InvalidProblem(format!("non-finite homodyne angle {a}")));
    }
    let angles: Vec<f64> = angles.iter().map(|a| a.rem_euclid(TAU)).collect();
    let m = angles.len();
    let l = ComplexMatrix::from_fn(m, 2 * m, |i, j| {
        if j == i {
            C64::new(angles[i].cos(), 0.0)
        } else if j == i + m {
            C64::new(angles[i].sin(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(HomodyneSetup { angles, l })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Classical,
    Coherent,
}

/// Data `(A, Cₘ, Q, S, R)` of the filter Riccati equation
/// `A P + P A† + Q − (S + P Cₘ†) R⁻¹ (S + P Cₘ†)† = 0`, plus the cost row.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCareProblem {
    a: ComplexMatrix,
    c_meas: ComplexMatrix,
    q: ComplexMatrix,
    s: ComplexMatrix,
    r: ComplexMatrix,
    scheme: SchemeKind,
    cost_row: Option<ComplexMatrix>,
    plant_dim: usize,
}

impl FilterCareProblem {
    /// Validates shapes, `Q ⪰ 0`, `R ≻ 0` and `Q − S R⁻¹ S† ⪰ 0`.
    pub fn new(
        a: ComplexMatrix,
        c_meas: ComplexMatrix,
        q: ComplexMatrix,
        s: ComplexMatrix,
        r: ComplexMatrix,
    ) -> Result<Self, EstimationError> {
        let n = a.rows();
        let p = c_meas.rows();
        let shapes_ok = a.is_square()
            && c_meas.cols() == n
            && q.rows() == n
            && q.cols() == n
            && s.rows() == n
            && s.cols() == p
            && r.rows() == p
            && r.cols() == p;
        if !shapes_ok {
            return Err(EstimationError::DimMismatch(format!(
                "A {}x{}, Cmeas {}x{}, Q {}x{}, S {}x{}, R {}x{}",
                a.rows(),
                a.cols(),
                c_meas.rows(),
                c_meas.cols(),
                q.rows(),
                q.cols(),
                s.rows(),
                s.cols(),
                r.rows(),
                r.cols()
            )));
        }
        if hermitian_deviation(&q) > 1e-9 || !is_positive_semidefinite(&q, 1e-9)? {
            return Err(EstimationError::InvalidProblem("Q must be Hermitian positive semidefinite".into()));
        }
        if hermitian_deviation(&r) > 1e-9 || !linalg::is_positive_definite(&r)? {
            return Err(EstimationError::InvalidProblem("R must be Hermitian positive definite".into()));
        }
        let r_inv = inverse(&r).map_err(|_| EstimationError::SingularR)?;
        let qbar = (&q - &(&s * &r_inv * &s.adjoint())).hermitian_part();
        if !is_positive_semidefinite(&qbar, 1e-8)? {
            return Err(EstimationError::InvalidProblem("Q - S R^-1 S^dagger must be positive semidefinite".into()));
        }
        Ok(Self { a, c_meas, q, s, r, scheme: SchemeKind::Classical, cost_row: None, plant_dim: n })
    }

    /// Skips validation; lets tests reach the solver's own error paths.
    #[cfg(test)]
    pub(crate) fn new_unchecked(
        a: ComplexMatrix,
        c_meas: ComplexMatrix,
        q: ComplexMatrix,
        s: ComplexMatrix,
        r: ComplexMatrix,
    ) -> Self {
        let plant_dim = a.rows();
        Self { a, c_meas, q, s, r, scheme: SchemeKind::Classical, cost_row: None, plant_dim }
    }

    pub fn with_cost_row(mut self, row: ComplexMatrix) -> Result<Self, EstimationError> {
        if row.rows() != 1 || row.cols() != self.a.rows() {
            return Err(EstimationError::DimMismatch(format!(
                "cost row must be 1x{}, got {}x{}",
                self.a.rows(),
                row.rows(),
                row.cols()
            )));
        }
        self.cost_row = Some(row);
        Ok(self)
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn c_meas(&self) -> &ComplexMatrix {
        &self.c_meas
    }

    pub fn q(&self) -> &ComplexMatrix {
        &self.q
    }

    pub fn s(&self) -> &ComplexMatrix {
        &self.s
    }

    pub fn r(&self) -> &ComplexMatrix {
        &self.r
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn cost_row(&self) -> Option<&ComplexMatrix> {
        self.cost_row.as_ref()
    }

    /// Size of the leading (plant) block of the state; equals the full state
    /// size for classical problems.
    pub fn plant_dim(&self) -> usize {
        self.plant_dim
    }
}

fn canonical_residual(k: &ComplexMatrix) -> f64 {
    (k - &ComplexMatrix::identity(k.rows())).frobenius_norm()
}

fn require_canonical(k: &ComplexMatrix, which: &'static str) -> Result<(), EstimationError> {
    let residual = canonical_residual(k);
    if residual > REALIZABILITY_TOL {
        return Err(EstimationError::NonCanonicalK { which, residual });
    }
    Ok(())
}

/// Filter problem for `dx = F x dt + G dA`, `dY = H x dt + K dA` measured
/// through `L`: `Q = G G†`, `S = G K† L†`, `R = L K K† L†`.
fn assemble(
    f: &ComplexMatrix,
    g: &ComplexMatrix,
    h: &ComplexMatrix,
    k: &ComplexMatrix,
    hd: &HomodyneSetup,
) -> Result<FilterCareProblem, EstimationError> {
    let l = hd.l();
    if l.cols() != h.rows() {
        return Err(EstimationError::DimMismatch(format!(
            "{} homodyne channels for {} output channels",
            hd.channels(),
            h.rows() / 2
        )));
    }
    let q = (g * &g.adjoint()).hermitian_part();
    let s = g * &k.adjoint() * &l.adjoint();
    let r = (l * k * &k.adjoint() * &l.adjoint()).hermitian_part();
    FilterCareProblem::new(f.clone(), l * h, q, s, r)
}

/// Purely-classical scheme: homodyne detection directly on the plant output.
pub fn build_classical_problem(
    plant: &QuantumSystem,
    hd: &HomodyneSetup,
) -> Result<FilterCareProblem, EstimationError> {
    require_canonical(plant.k(), "K")?;
    let mut p = assemble(plant.f(), plant.g(), plant.h(), plant.k(), hd)?;
    p.cost_row = plant.cost_row().cloned();
    Ok(p)
}

/// Plant–controller cascade with state `[a; a#; a_c; a_c#]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub f: ComplexMatrix,
    pub g: ComplexMatrix,
    pub h: ComplexMatrix,
    pub k: ComplexMatrix,
    /// `[C, 0]` when the plant carries a cost row.
    pub cost_row: Option<ComplexMatrix>,
    pub plant_dim: usize,
}

/// `F_a = [[F, 0], [G_c H, F_c]]`, `G_a = [G; G_c K]`, `H_a = [K_c H, H_c]`,
/// `K_a = K_c K`.
pub fn augment(plant: &QuantumSystem, controller: &QuantumSystem) -> Result<AugmentedSystem, EstimationError> {
    if controller.modes() == 0 {
        return Err(EstimationError::EmptyController);
    }
    if controller.channels() != plant.channels() {
        return Err(EstimationError::DimMismatch(format!(
            "plant has {} output channels, controller expects {}",
            plant.channels(),
            controller.channels()
        )));
    }
    let k_a = controller.k() * plant.k();
    require_canonical(&k_a, "K_c K")?;
    let (np, nc) = (plant.f().rows(), controller.f().rows());
    let zero = ComplexMatrix::zeros(np, nc);
    let f = ComplexMatrix::from_blocks(&[&[plant.f(), &zero], &[&(controller.g() * plant.h()), controller.f()]])?;
    let g = ComplexMatrix::from_blocks(&[&[plant.g()], &[&(controller.g() * plant.k())]])?;
    let h = ComplexMatrix::from_blocks(&[&[&(controller.k() * plant.h()), controller.h()]])?;
    let cost_row = match plant.cost_row() {
        Some(c) => Some(ComplexMatrix::from_blocks(&[&[c, &ComplexMatrix::zeros(1, nc)]])?),
        None => None,
    };
    Ok(AugmentedSystem { f, g, h, k: k_a, cost_row, plant_dim: np })
}

/// Coherent-classical scheme: homodyne detection on the controller output,
/// filter on the cascade, cost row `[C, 0]`.
pub fn build_coherent_problem(
    plant: &QuantumSystem,
    controller: &QuantumSystem,
    hd: &HomodyneSetup,
) -> Result<FilterCareProblem, EstimationError> {
    require_canonical(plant.k(), "K")?;
    let aug = augment(plant, controller)?;
    let mut p = assemble(&aug.f, &aug.g, &aug.h, &aug.k, hd)?;
    p.scheme = SchemeKind::Coherent;
    p.cost_row = aug.cost_row;
    p.plant_dim = aug.plant_dim;
    Ok(p)
}

/// Steady-state Kalman filter `dx̂ = Fe x̂ dt + Ge dy`, `ẑ = He x̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMatrices {
    pub fe: ComplexMatrix,
    pub ge: ComplexMatrix,
    pub he: ComplexMatrix,
}

/// `Ge = (S + P Cₘ†) R⁻¹`, `Fe = A − Ge Cₘ`, `He = Cz`.
pub fn estimator_matrices(p: &FilterCareProblem, x: &ComplexMatrix) -> Result<EstimatorMatrices, EstimationError> {
    check_covariance_shape(p, x)?;
    let he = p.cost_row().cloned().ok_or(EstimationError::MissingCostRow)?;
    let (ge, fe) = care::filter_gain(p, x).map_err(|e| match e {
        CareError::SingularR => EstimationError::SingularR,
        other => other.into(),
    })?;
    Ok(EstimatorMatrices { fe, ge, he })
}

fn check_covariance_shape(p: &FilterCareProblem, x: &ComplexMatrix) -> Result<(), EstimationError> {
    let n = p.a().rows();
    if x.rows() != n || x.cols() != n {
        return Err(EstimationError::DimMismatch(format!("P is {}x{}, expected {n}x{n}", x.rows(), x.cols())));
    }
    Ok(())
}

/// Mean-square estimation error `Cz P Cz†`.
pub fn cost_from_solution(p: &FilterCareProblem, x: &ComplexMatrix) -> Result<f64, EstimationError> {
    check_covariance_shape(p, x)?;
    let cz = p.cost_row().ok_or(EstimationError::MissingCostRow)?;
    let v = (cz * x * &cz.adjoint()).get(0, 0);
    if v.im.abs() > IMAGINARY_COST_TOL * (1.0 + v.re.abs()) {
        return Err(EstimationError::ImaginaryCost { imag: v.im });
    }
    Ok(v.re)
}

/// Frobenius norms of the three block equations obtained by expanding the
/// coherent Riccati equation with `P = [[P1, P2], [P2†, P3]]`. Computed by
/// direct block arithmetic, assuming `K = K_c = I` and `L L† = I`.
pub fn expanded_residual(
    plant: &QuantumSystem,
    controller: &QuantumSystem,
    hd: &HomodyneSetup,
    p1: &ComplexMatrix,
    p2: &ComplexMatrix,
    p3: &ComplexMatrix,
) -> Result<[f64; 3], EstimationError> {
    let (np, nc) = (plant.f().rows(), controller.f().rows());
    let shapes_ok = p1.rows() == np
        && p1.cols() == np
        && p2.rows() == np
        && p2.cols() == nc
        && p3.rows() == nc
        && p3.cols() == nc
        && controller.g().cols() == plant.h().rows()
        && hd.l().cols() == controller.h().rows();
    if !shapes_ok {
        return Err(EstimationError::DimMismatch("block sizes do not match plant and controller".into()));
    }
    let (f, g, h) = (plant.f(), plant.g(), plant.h());
    let (fc, gc, hc) = (controller.f(), controller.g(), controller.h());
    let ltl = &hd.l().adjoint() * hd.l();
    let p2d = p2.adjoint();

    let top = g + &(p1 * &h.adjoint()) + p2 * &hc.adjoint();
    let bottom = gc + &(&p2d * &h.adjoint()) + p3 * &hc.adjoint();

    let e1 = f * p1 + p1 * &f.adjoint() + g * &g.adjoint() - &top * &ltl * &top.adjoint();
    let e2 = f * p2 + p1 * &h.adjoint() * &gc.adjoint() + p2 * &fc.adjoint() + g * &gc.adjoint()
        - &top * &ltl * &bottom.adjoint();
    let e3 = gc * h * p2 + &p2d * &h.adjoint() * &gc.adjoint() + fc * p3 + p3 * &fc.adjoint() + gc * &gc.adjoint()
        - &bottom * &ltl * &bottom.adjoint();
    Ok([e1.frobenius_norm(), e2.frobenius_norm(), e3.frobenius_norm()])
}

/// Splits a coherent covariance into `(P1, P2, P3)`.
pub fn split_blocks(p: &FilterCareProblem, x: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let np = p.plant_dim();
    let nc = x.rows() - np;
    (x.block(0, 0, np, np), x.block(0, np, np, nc), x.block(np, np, nc, nc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub theta_deg: f64,
    pub cost_classical: f64,
    pub cost_coherent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row_at(&self, theta_deg: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| (r.theta_deg - theta_deg).abs() < 1e-9)
    }

    pub fn min_classical(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.cost_classical).reduce(f64::min)
    }

    pub fn min_coherent(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.cost_coherent).reduce(f64::min)
    }
}

/// Evaluates the classical cost (and the coherent cost when a controller is
/// given) at every grid angle. Every homodyne channel uses the grid angle.
pub fn sweep(
    plant: &QuantumSystem,
    controller: Option<&QuantumSystem>,
    angles_deg: &[f64],
    opts: &SolveOptions,
) -> Result<SweepResult, EstimationError> {
    sweep_with(&SchemeRegistry::builtin(), plant, controller, angles_deg, opts)
}

pub fn sweep_with(
    registry: &SchemeRegistry,
    plant: &QuantumSystem,
    controller: Option<&QuantumSystem>,
    angles_deg: &[f64],
    opts: &SolveOptions,
) -> Result<SweepResult, EstimationError> {
    if angles_deg.is_empty() {
        return Err(EstimationError::EmptyGrid);
    }
    if plant.cost_row().is_none() {
        return Err(EstimationError::MissingCostRow);
    }
    let classical = registry.require("classical")?;
    let coherent = match controller {
        Some(_) => Some(registry.require("coherent")?),
        None => None,
    };
    let mut rows = Vec::with_capacity(angles_deg.len());
    for &theta in angles_deg {
        let at = |scheme: &str| {
            let scheme = scheme.to_string();
            move |e: EstimationError| EstimationError::AtAngle { theta_deg: theta, scheme, source: Box::new(e) }
        };
        let hd = HomodyneSetup::from_degrees(&vec![theta; plant.channels()]).map_err(at("classical"))?;
        let cost_classical = classical.evaluate(plant, controller, &hd, opts).map_err(at(classical.name()))?.cost;
        let cost_coherent = match coherent {
            Some(s) => Some(s.evaluate(plant, controller, &hd, opts).map_err(at(s.name()))?.cost),
            None => None,
        };
        rows.push(SweepRow { theta_deg: theta, cost_classical, cost_coherent });
    }
    Ok(SweepResult { rows })
}
