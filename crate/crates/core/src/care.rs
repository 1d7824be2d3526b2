//! Stabilizing solutions of the filter algebraic Riccati equation
//!
//! ```text
//! A P + P A† + Q − (S + P Cₘ†) R⁻¹ (S + P Cₘ†)† = 0
//! ```
//!
//! by Newton–Kleinman iteration. The cross term is eliminated first
//! (`Ā = A − S R⁻¹ Cₘ`, `Q̄ = Q − S R⁻¹ S†`); each Newton step is then a
//! single Lyapunov solve with the current closed-loop matrix.

use thiserror::Error;

use crate::estimation::FilterCareProblem;
use crate::linalg::{self, inverse, is_hurwitz, is_positive_semidefinite, lyapunov_solve, ComplexMatrix, LinalgError};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Relative change between successive iterates below which Newton stops.
const STEP_RTOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CareError {
    #[error("measurement noise covariance R is singular")]
    SingularR,
    #[error("not stabilizable: {0}")]
    NotStabilizable(String),
    #[error("Newton-Kleinman did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("Q - S R^-1 S^dagger is not positive semidefinite")]
    IndefiniteQbar,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target: stop once `‖residual‖_F ≤ tol·(1 + ‖Q‖_F)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Filter gain `K₀` (original coordinates) with `A − K₀ Cₘ` Hurwitz.
    /// Defaults to zero, which requires `A` itself to be Hurwitz.
    pub initial_gain: Option<ComplexMatrix>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, initial_gain: None }
    }
}

impl SolveOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), CareError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(CareError::InvalidOptions(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(CareError::InvalidOptions("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    /// Stabilizing Hermitian solution.
    pub p: ComplexMatrix,
    /// Frobenius norm of the Riccati residual at `p`.
    pub residual: f64,
    pub iterations: usize,
    pub closed_loop_hurwitz: bool,
}

/// The Riccati equation with its cross term removed:
/// `Ā P + P Ā† + Q̄ − P Cₘ† R⁻¹ Cₘ P = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub abar: ComplexMatrix,
    pub c_meas: ComplexMatrix,
    pub qbar: ComplexMatrix,
    pub r: ComplexMatrix,
    pub r_inv: ComplexMatrix,
}

fn invert_r(r: &ComplexMatrix) -> Result<ComplexMatrix, CareError> {
    match inverse(r) {
        Ok(x) => Ok(x),
        Err(LinalgError::Singular { .. }) => Err(CareError::SingularR),
        Err(e) => Err(e.into()),
    }
}

pub fn to_standard_form(p: &FilterCareProblem) -> Result<StandardForm, CareError> {
    let r_inv = invert_r(p.r())?;
    let s_rinv = p.s() * &r_inv;
    let abar = p.a() - &(&s_rinv * p.c_meas());
    let qbar = (p.q() - &(&s_rinv * &p.s().adjoint())).hermitian_part();
    if !is_positive_semidefinite(&qbar, 1e-8)? {
        return Err(CareError::IndefiniteQbar);
    }
    Ok(StandardForm { abar, c_meas: p.c_meas().clone(), qbar, r: p.r().clone(), r_inv })
}

/// Frobenius norm of `A P + P A† + Q − (S + P Cₘ†) R⁻¹ (S + P Cₘ†)†`.
pub fn care_residual(p: &FilterCareProblem, x: &ComplexMatrix) -> Result<f64, CareError> {
    let n = p.a().rows();
    if x.rows() != n || x.cols() != n {
        return Err(CareError::DimMismatch(format!("P is {}x{}, expected {n}x{n}", x.rows(), x.cols())));
    }
    let r_inv = invert_r(p.r())?;
    let cross = p.s() + &(x * &p.c_meas().adjoint());
    let lhs = p.a() * x + x * &p.a().adjoint() + p.q() - &cross * &r_inv * &cross.adjoint();
    Ok(lhs.frobenius_norm())
}

/// Filter gain `(S + P Cₘ†) R⁻¹` and closed-loop matrix `A − gain·Cₘ`.
pub fn filter_gain(p: &FilterCareProblem, x: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), CareError> {
    let r_inv = invert_r(p.r())?;
    let gain = (p.s() + &(x * &p.c_meas().adjoint())) * &r_inv;
    let closed = p.a() - &(&gain * p.c_meas());
    Ok((gain, closed))
}

pub fn solve_filter_care(p: &FilterCareProblem, opts: &SolveOptions) -> Result<CareSolution, CareError> {
    solve_filter_care_observed(p, opts, |_| {})
}

/// Like [`solve_filter_care`], handing every Newton iterate to `observer`.
pub fn solve_filter_care_observed(
    p: &FilterCareProblem,
    opts: &SolveOptions,
    mut observer: impl FnMut(&ComplexMatrix),
) -> Result<CareSolution, CareError> {
    opts.validate()?;
    let std = to_standard_form(p)?;
    let n = p.a().rows();
    let meas = p.c_meas().rows();
    let s_rinv = p.s() * &std.r_inv;

    // Transformed gain K̄ with K = S R⁻¹ + K̄, so that Ā − K̄ Cₘ = A − K Cₘ.
    let mut gain_bar = match &opts.initial_gain {
        Some(k0) => {
            if k0.rows() != n || k0.cols() != meas {
                return Err(CareError::DimMismatch(format!(
                    "initial gain is {}x{}, expected {n}x{meas}",
                    k0.rows(),
                    k0.cols()
                )));
            }
            k0 - &s_rinv
        }
        None => -&s_rinv,
    };
    let mut closed = &std.abar - &(&gain_bar * &std.c_meas);
    if !is_hurwitz(&closed) {
        return Err(CareError::NotStabilizable(if opts.initial_gain.is_some() {
            "initial gain does not stabilize A - K0 Cmeas".into()
        } else {
            "A is not Hurwitz; supply a stabilizing initial gain".into()
        }));
    }

    let target = opts.tol * (1.0 + p.q().frobenius_norm());
    let mut residual = f64::INFINITY;
    let mut prev: Option<ComplexMatrix> = None;
    for iteration in 1..=opts.max_iter {
        let forcing = (&std.qbar + &(&gain_bar * &std.r * &gain_bar.adjoint())).hermitian_part();
        let x = lyapunov_solve(&closed, &forcing).map_err(|e| match e {
            LinalgError::Singular { .. } => {
                CareError::NotStabilizable(format!("closed loop lost stability at iteration {iteration}"))
            }
            other => other.into(),
        })?;
        observer(&x);
        residual = care_residual(p, &x)?;
        // Once the residual is small, one more step usually lands at machine
        // precision, so keep going until the iterates stop moving.
        let settled =
            prev.as_ref().is_some_and(|q| (&x - q).frobenius_norm() <= STEP_RTOL * (1.0 + x.frobenius_norm()));
        if residual <= target && (settled || iteration == opts.max_iter) {
            return certify(p, x, residual, iteration);
        }
        gain_bar = &x * &std.c_meas.adjoint() * &std.r_inv;
        closed = &std.abar - &(&gain_bar * &std.c_meas);
        prev = Some(x);
    }
    Err(CareError::MaxIterations { iterations: opts.max_iter, residual })
}

fn certify(
    p: &FilterCareProblem,
    x: ComplexMatrix,
    residual: f64,
    iterations: usize,
) -> Result<CareSolution, CareError> {
    let (_, closed_loop) = filter_gain(p, &x)?;
    let hurwitz = is_hurwitz(&closed_loop);
    if !hurwitz {
        return Err(CareError::NotStabilizable("converged solution is not stabilizing".into()));
    }
    Ok(CareSolution { p: x, residual, iterations, closed_loop_hurwitz: hurwitz })
}

/// Difference of two Hermitian matrices is PSD up to `tol`.
pub fn dominates(larger: &ComplexMatrix, smaller: &ComplexMatrix, tol: f64) -> Result<bool, CareError> {
    Ok(linalg::is_positive_semidefinite(&(larger - smaller).hermitian_part(), tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn real(rows: &[&[f64]]) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(rows).unwrap()
    }

    fn scalar_problem(a: f64, c: f64, q: f64, s: f64, r: f64) -> FilterCareProblem {
        FilterCareProblem::new(real(&[&[a]]), real(&[&[c]]), real(&[&[q]]), real(&[&[s]]), real(&[&[r]])).unwrap()
    }

    fn cavity_problem() -> FilterCareProblem {
        // θ = 0 classical problem of the γ = κ = 4 cavity.
        FilterCareProblem::new(
            ComplexMatrix::identity(2).scale_real(-2.0),
            real(&[&[2.0, 0.0]]),
            ComplexMatrix::identity(2).scale_real(4.0),
            real(&[&[-2.0], &[0.0]]),
            real(&[&[1.0]]),
        )
        .unwrap()
    }

    #[test]
    fn standard_form_without_cross_term() {
        let p = scalar_problem(-1.0, 1.0, 1.0, 0.0, 1.0);
        let sf = to_standard_form(&p).unwrap();
        assert_eq!(sf.abar, *p.a());
        assert_eq!(sf.qbar, *p.q());
        assert_eq!(sf.c_meas, *p.c_meas());
        assert_eq!(sf.r, *p.r());
    }

    #[test]
    fn standard_form_of_cavity() {
        let sf = to_standard_form(&cavity_problem()).unwrap();
        assert!((&sf.abar - &ComplexMatrix::diag_real(&[2.0, -2.0])).frobenius_norm() < 1e-15);
        assert!((&sf.qbar - &ComplexMatrix::diag_real(&[0.0, 4.0])).frobenius_norm() < 1e-15);
    }

    #[test]
    fn standard_form_singular_r() {
        let p = FilterCareProblem::new_unchecked(
            real(&[&[-1.0]]),
            real(&[&[1.0]]),
            real(&[&[1.0]]),
            real(&[&[0.0]]),
            real(&[&[0.0]]),
        );
        assert_eq!(to_standard_form(&p).unwrap_err(), CareError::SingularR);
        assert_eq!(care_residual(&p, &real(&[&[0.0]])).unwrap_err(), CareError::SingularR);
    }

    #[test]
    fn scalar_quadratic_root() {
        let sol = solve_filter_care(&scalar_problem(-1.0, 1.0, 1.0, 0.0, 1.0), &SolveOptions::default()).unwrap();
        assert!((sol.p.get(0, 0).re - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!(sol.closed_loop_hurwitz);
    }

    #[test]
    fn unobservable_unstable_mode_is_not_stabilizable() {
        let err = solve_filter_care(&scalar_problem(1.0, 0.0, 1.0, 0.0, 1.0), &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, CareError::NotStabilizable(_)));
    }

    #[test]
    fn unstable_but_detectable_needs_initial_gain() {
        // a = 1, c = 1, q = 1, r = 1: p² − 2p − 1 = 0, stabilizing root 1 + √2.
        let p = scalar_problem(1.0, 1.0, 1.0, 0.0, 1.0);
        assert!(matches!(solve_filter_care(&p, &SolveOptions::default()), Err(CareError::NotStabilizable(_))));
        let opts = SolveOptions { initial_gain: Some(real(&[&[3.0]])), ..SolveOptions::default() };
        let sol = solve_filter_care(&p, &opts).unwrap();
        assert!((sol.p.get(0, 0).re - (1.0 + 2f64.sqrt())).abs() < 1e-12);

        let bad = SolveOptions { initial_gain: Some(real(&[&[0.5]])), ..SolveOptions::default() };
        assert!(matches!(solve_filter_care(&p, &bad), Err(CareError::NotStabilizable(_))));
        let wrong_shape = SolveOptions { initial_gain: Some(real(&[&[1.0, 1.0]])), ..SolveOptions::default() };
        assert!(matches!(solve_filter_care(&p, &wrong_shape), Err(CareError::DimMismatch(_))));
    }

    #[test]
    fn cavity_solution_is_identity() {
        let p = cavity_problem();
        assert!(care_residual(&p, &ComplexMatrix::identity(2)).unwrap() < 1e-12);
        let sol = solve_filter_care(&p, &SolveOptions::default()).unwrap();
        assert!((&sol.p - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-12);
        let (gain, closed) = filter_gain(&p, &sol.p).unwrap();
        assert!(gain.frobenius_norm() < 1e-12);
        assert!((&closed - p.a()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn residual_at_zero_is_qbar_norm() {
        let p = cavity_problem();
        let sf = to_standard_form(&p).unwrap();
        let r0 = care_residual(&p, &ComplexMatrix::zeros(2, 2)).unwrap();
        assert!((r0 - sf.qbar.frobenius_norm()).abs() < 1e-12);
        assert!(care_residual(&p, &ComplexMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn iteration_cap_is_surfaced() {
        let p = FilterCareProblem::new(
            real(&[&[-0.1, 3.0], &[-3.0, -0.2]]),
            real(&[&[1.0, 0.5]]),
            ComplexMatrix::identity(2).scale_real(5.0),
            real(&[&[0.0], &[0.0]]),
            real(&[&[0.01]]),
        )
        .unwrap();
        let opts = SolveOptions { max_iter: 1, ..SolveOptions::default() };
        assert!(matches!(solve_filter_care(&p, &opts), Err(CareError::MaxIterations { iterations: 1, .. })));
        assert!(solve_filter_care(&p, &SolveOptions::default()).is_ok());
    }

    #[test]
    fn options_are_validated() {
        let p = scalar_problem(-1.0, 1.0, 1.0, 0.0, 1.0);
        let bad_tol = SolveOptions::default().with_tol(0.0);
        assert!(matches!(solve_filter_care(&p, &bad_tol), Err(CareError::InvalidOptions(_))));
        let bad_iter = SolveOptions { max_iter: 0, ..SolveOptions::default() };
        assert!(matches!(solve_filter_care(&p, &bad_iter), Err(CareError::InvalidOptions(_))));
    }

    #[test]
    fn iterates_are_hermitian_and_monotone() {
        let p = FilterCareProblem::new(
            ComplexMatrix::from_rows(&[
                vec![C64::new(-0.5, 1.0), C64::new(1.0, 0.0)],
                vec![C64::new(0.0, 0.0), C64::new(-0.3, -0.4)],
            ])
            .unwrap(),
            real(&[&[1.0, 0.0]]),
            ComplexMatrix::identity(2).scale_real(2.0),
            real(&[&[0.0], &[0.0]]),
            real(&[&[0.1]]),
        )
        .unwrap();
        let mut iterates = Vec::new();
        let sol = solve_filter_care_observed(&p, &SolveOptions::default(), |x| iterates.push(x.clone())).unwrap();
        assert!(iterates.len() >= 3);
        for x in &iterates {
            assert_eq!(x, &x.adjoint());
        }
        for pair in iterates.windows(2) {
            assert!(dominates(&pair[0], &pair[1], 1e-9).unwrap());
        }
        assert_eq!(&sol.p, iterates.last().unwrap());
    }
}
