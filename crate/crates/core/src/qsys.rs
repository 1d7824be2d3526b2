//! Linear quantum system models and their physical realizability.
//!
//! A general system acts on the doubled vector `[a; a#]` of annihilation and
//! creation operators, so every system matrix has the block form
//! `Δ(A1, A2) = [[A1, A2], [A2#, A1#]]`. Annihilation-only (passive) systems
//! are described by the `A1` blocks alone.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{
    self, hermitian_deviation, inertia, is_positive_definite, lyapunov_solve, ComplexMatrix, Inertia, LinalgError, C64,
    HERMITIAN_TOL,
};

/// Tolerance for realizability residuals (`G + Θ H† J`, `K − I`, ...).
pub const REALIZABILITY_TOL: f64 = 1e-8;

/// Tolerance for structural checks on Θ, M, N and the system matrices.
pub const STRUCTURE_TOL: f64 = 1e-9;

/// Draw budget of the random system generator.
pub const MAX_DRAWS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("{0} must have even dimensions for the doubled form")]
    OddDimension(&'static str),
    #[error("{0} is not of the doubled block form [[A1, A2], [A2#, A1#]]")]
    NotDeltaStructured(&'static str),
    #[error("squeezer is not physically realizable: gamma = {gamma} but sum of kappas = {kappa_sum}")]
    NotRealizable { gamma: f64, kappa_sum: f64 },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("{0} is not Hermitian")]
    NotHermitian(&'static str),
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("invalid commutation matrix: {0}")]
    InvalidCommutation(String),
    #[error(
        "commutation matrix is not unique: the Lyapunov operator of F is singular \
         (F has eigenvalues mirrored across the imaginary axis); realizability is inconclusive"
    )]
    NonUniqueTheta,
    #[error("no Hurwitz system found in {draws} draws")]
    RejectionExhausted { draws: usize },
}

fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

/// `Δ(A1, A2) = [[A1, A2], [conj(A2), conj(A1)]]`.
pub fn delta_embed(a1: &ComplexMatrix, a2: &ComplexMatrix) -> Result<ComplexMatrix, ModelError> {
    if a1.rows() != a2.rows() || a1.cols() != a2.cols() {
        return Err(ModelError::DimMismatch(format!(
            "delta blocks are {}x{} and {}x{}",
            a1.rows(),
            a1.cols(),
            a2.rows(),
            a2.cols()
        )));
    }
    Ok(ComplexMatrix::from_blocks(&[&[a1, a2], &[&a2.conj(), &a1.conj()]])?)
}

/// Splits an even-dimensioned matrix into its four equal blocks.
fn quarters(a: &ComplexMatrix) -> [ComplexMatrix; 4] {
    let (r, c) = (a.rows() / 2, a.cols() / 2);
    [a.block(0, 0, r, c), a.block(0, c, r, c), a.block(r, 0, r, c), a.block(r, c, r, c)]
}

fn delta_deviation(a: &ComplexMatrix) -> f64 {
    let [tl, tr, bl, br] = quarters(a);
    let dev = ((&bl - &tr.conj()).frobenius_norm().powi(2) + (&br - &tl.conj()).frobenius_norm().powi(2)).sqrt();
    dev / (1.0 + a.frobenius_norm())
}

pub fn is_delta_structured(a: &ComplexMatrix, tol: f64) -> Result<bool, ModelError> {
    if !a.rows().is_multiple_of(2) || !a.cols().is_multiple_of(2) {
        return Err(ModelError::OddDimension("matrix"));
    }
    Ok(delta_deviation(a) <= tol)
}

fn require_delta(a: &ComplexMatrix, name: &'static str) -> Result<(), ModelError> {
    if !a.rows().is_multiple_of(2) || !a.cols().is_multiple_of(2) {
        return Err(ModelError::OddDimension(name));
    }
    if delta_deviation(a) > STRUCTURE_TOL {
        return Err(ModelError::NotDeltaStructured(name));
    }
    Ok(())
}

/// Doubled-form model `(F, G, H, K)` with an optional scalar output row `C`.
///
/// `F` is `2n × 2n`, `G` is `2n × 2m`, `H` is `2m × 2n` and `K` is `2m × 2m`,
/// each in doubled block form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSystem {
    n: usize,
    m: usize,
    f: ComplexMatrix,
    g: ComplexMatrix,
    h: ComplexMatrix,
    k: ComplexMatrix,
    c: Option<ComplexMatrix>,
}

impl QuantumSystem {
    pub fn new(f: ComplexMatrix, g: ComplexMatrix, h: ComplexMatrix, k: ComplexMatrix) -> Result<Self, ModelError> {
        for (m, name) in [(&f, "F"), (&g, "G"), (&h, "H"), (&k, "K")] {
            require_delta(m, name)?;
        }
        if !f.is_square() {
            return Err(ModelError::DimMismatch(format!("F is {}x{}", f.rows(), f.cols())));
        }
        let n = f.rows() / 2;
        let m = g.cols() / 2;
        let ok = g.rows() == 2 * n && h.rows() == 2 * m && h.cols() == 2 * n && k.rows() == 2 * m && k.cols() == 2 * m;
        if !ok {
            return Err(ModelError::DimMismatch(format!(
                "F {}x{}, G {}x{}, H {}x{}, K {}x{} are inconsistent",
                f.rows(),
                f.cols(),
                g.rows(),
                g.cols(),
                h.rows(),
                h.cols(),
                k.rows(),
                k.cols()
            )));
        }
        Ok(Self { n, m, f, g, h, k, c: None })
    }

    /// Attaches the output functional `z = C [a; a#]`, a `1 × 2n` row.
    pub fn with_cost_row(mut self, c: ComplexMatrix) -> Result<Self, ModelError> {
        if c.rows() != 1 || c.cols() != 2 * self.n {
            return Err(ModelError::DimMismatch(format!(
                "cost row must be 1x{}, got {}x{}",
                2 * self.n,
                c.rows(),
                c.cols()
            )));
        }
        self.c = Some(c);
        Ok(self)
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn f(&self) -> &ComplexMatrix {
        &self.f
    }

    pub fn g(&self) -> &ComplexMatrix {
        &self.g
    }

    pub fn h(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn k(&self) -> &ComplexMatrix {
        &self.k
    }

    pub fn cost_row(&self) -> Option<&ComplexMatrix> {
        self.c.as_ref()
    }

    /// True when the off-diagonal blocks `F2, G2, H2, K2` vanish.
    pub fn is_annihilation_only(&self, tol: f64) -> bool {
        [&self.f, &self.g, &self.h, &self.k].iter().all(|m| {
            let [_, tr, _, _] = quarters(m);
            tr.frobenius_norm() <= tol * (1.0 + m.frobenius_norm())
        })
    }

    /// The annihilation-operator part `(F1, G1, H1, K1)`, when the system has one.
    pub fn passive_part(&self) -> Option<PassiveSystem> {
        if !self.is_annihilation_only(STRUCTURE_TOL) {
            return None;
        }
        let top_left = |m: &ComplexMatrix| quarters(m)[0].clone();
        PassiveSystem::new(top_left(&self.f), top_left(&self.g), top_left(&self.h), top_left(&self.k)).ok()
    }
}

/// Annihilation-only model `da = F1 a dt + G1 dA`, `dY = H1 a dt + K1 dA`.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveSystem {
    n: usize,
    m: usize,
    f1: ComplexMatrix,
    g1: ComplexMatrix,
    h1: ComplexMatrix,
    k1: ComplexMatrix,
}

impl PassiveSystem {
    pub fn new(f1: ComplexMatrix, g1: ComplexMatrix, h1: ComplexMatrix, k1: ComplexMatrix) -> Result<Self, ModelError> {
        let n = f1.rows();
        let m = g1.cols();
        let ok =
            f1.cols() == n && g1.rows() == n && h1.rows() == m && h1.cols() == n && k1.rows() == m && k1.cols() == m;
        if !ok {
            return Err(ModelError::DimMismatch(format!(
                "F1 {}x{}, G1 {}x{}, H1 {}x{}, K1 {}x{} are inconsistent",
                f1.rows(),
                f1.cols(),
                g1.rows(),
                g1.cols(),
                h1.rows(),
                h1.cols(),
                k1.rows(),
                k1.cols()
            )));
        }
        Ok(Self { n, m, f1, g1, h1, k1 })
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn f1(&self) -> &ComplexMatrix {
        &self.f1
    }

    pub fn g1(&self) -> &ComplexMatrix {
        &self.g1
    }

    pub fn h1(&self) -> &ComplexMatrix {
        &self.h1
    }

    pub fn k1(&self) -> &ComplexMatrix {
        &self.k1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommutationKind {
    General,
    Passive,
}

/// Commutation matrix Θ of a realizable system.
///
/// The general kind is checked against necessary conditions of
/// `Θ = T J T†` with `T` doubled and nonsingular: Hermitian, block form
/// `[[Θ1, Θ2], [−Θ2#, −Θ1#]]` with `Θ2` antisymmetric, and inertia `(n, n, 0)`.
/// Those conditions do not prove that such a `T` exists.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutationMatrix {
    theta: ComplexMatrix,
    kind: CommutationKind,
}

impl CommutationMatrix {
    pub fn general(theta: ComplexMatrix) -> Result<Self, ModelError> {
        validate_general_theta(&theta).map_err(ModelError::InvalidCommutation)?;
        Ok(Self { theta, kind: CommutationKind::General })
    }

    pub fn passive(theta: ComplexMatrix) -> Result<Self, ModelError> {
        validate_passive_theta(&theta).map_err(ModelError::InvalidCommutation)?;
        Ok(Self { theta, kind: CommutationKind::Passive })
    }

    /// `J = diag(I_n, −I_n)`, the commutation matrix of `n` canonical modes.
    pub fn canonical_general(n: usize) -> Self {
        Self { theta: ComplexMatrix::signature(n), kind: CommutationKind::General }
    }

    pub fn canonical_passive(n: usize) -> Self {
        Self { theta: ComplexMatrix::identity(n), kind: CommutationKind::Passive }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.theta
    }

    pub fn kind(&self) -> CommutationKind {
        self.kind
    }

    /// True when acceptance rests on necessary structural conditions only.
    pub fn is_structural_check_only(&self) -> bool {
        self.kind == CommutationKind::General
    }
}

fn validate_general_theta(theta: &ComplexMatrix) -> Result<(), String> {
    if !theta.is_square() || !theta.rows().is_multiple_of(2) {
        return Err(format!("Θ must be square with even size, got {}x{}", theta.rows(), theta.cols()));
    }
    let dev = hermitian_deviation(theta);
    if dev > STRUCTURE_TOL {
        return Err(format!("Θ is not Hermitian (deviation {dev:e})"));
    }
    let [t1, t2, bl, br] = quarters(theta);
    let scale = 1.0 + theta.frobenius_norm();
    let antisym = (&t2 + &t2.transpose()).frobenius_norm() / scale;
    if antisym > STRUCTURE_TOL {
        return Err(format!("upper-right block of Θ is not antisymmetric (deviation {antisym:e})"));
    }
    let block =
        ((&bl + &t2.conj()).frobenius_norm().powi(2) + (&br + &t1.conj()).frobenius_norm().powi(2)).sqrt() / scale;
    if block > STRUCTURE_TOL {
        return Err(format!("Θ lacks the block form [[Θ1, Θ2], [-Θ2#, -Θ1#]] (deviation {block:e})"));
    }
    let n = theta.rows() / 2;
    let expected = Inertia { positive: n, negative: n, zero: 0 };
    let got = inertia(theta, 1e-10).map_err(|e| e.to_string())?;
    if got != expected {
        return Err(format!(
            "Θ has inertia ({}, {}, {}), expected ({n}, {n}, 0)",
            got.positive, got.negative, got.zero
        ));
    }
    Ok(())
}

fn validate_passive_theta(theta: &ComplexMatrix) -> Result<(), String> {
    match is_positive_definite(theta) {
        Ok(true) => Ok(()),
        Ok(false) => Err("Θ is not positive definite".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Hamiltonian matrix `M = M†` and coupling matrix `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianCoupling {
    m: ComplexMatrix,
    n: ComplexMatrix,
    kind: CommutationKind,
}

impl HamiltonianCoupling {
    /// Doubled-form pair: `M` is `2n × 2n`, `N` is `2m × 2n`, both doubled.
    pub fn general(hamiltonian: ComplexMatrix, coupling: ComplexMatrix) -> Result<Self, ModelError> {
        require_delta(&hamiltonian, "M")?;
        require_delta(&coupling, "N")?;
        Self::checked(hamiltonian, coupling, CommutationKind::General)
    }

    /// Annihilation-only pair: `M` is `n × n`, `N` is `m × n`.
    pub fn passive(hamiltonian: ComplexMatrix, coupling: ComplexMatrix) -> Result<Self, ModelError> {
        Self::checked(hamiltonian, coupling, CommutationKind::Passive)
    }

    fn checked(m: ComplexMatrix, n: ComplexMatrix, kind: CommutationKind) -> Result<Self, ModelError> {
        if !m.is_square() || n.cols() != m.rows() {
            return Err(ModelError::DimMismatch(format!(
                "M is {}x{}, N is {}x{}",
                m.rows(),
                m.cols(),
                n.rows(),
                n.cols()
            )));
        }
        if hermitian_deviation(&m) > HERMITIAN_TOL {
            return Err(ModelError::NotHermitian("M"));
        }
        Ok(Self { m, n, kind })
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.n
    }

    pub fn kind(&self) -> CommutationKind {
        self.kind
    }
}

/// Builds the realizable system
/// `F = −iΘM − ½ΘN†JN`, `G = −ΘN†J`, `H = N`, `K = I`.
pub fn realize_general(hc: &HamiltonianCoupling, theta: &CommutationMatrix) -> Result<QuantumSystem, ModelError> {
    if hc.kind != CommutationKind::General || theta.kind != CommutationKind::General {
        return Err(ModelError::BadParameter("realize_general needs general-kind M, N and Θ".into()));
    }
    let th = &theta.theta;
    if th.rows() != hc.m.rows() {
        return Err(ModelError::DimMismatch(format!(
            "Θ is {}x{}, M is {}x{}",
            th.rows(),
            th.cols(),
            hc.m.rows(),
            hc.m.cols()
        )));
    }
    let m2 = hc.n.rows();
    if !m2.is_multiple_of(2) {
        return Err(ModelError::OddDimension("N"));
    }
    let j = ComplexMatrix::signature(m2 / 2);
    let n_dag = hc.n.adjoint();
    let f = (th * &hc.m).scale(c(0.0, -1.0)) - (th * &n_dag * &j * &hc.n).scale_real(0.5);
    let g = -(th * &n_dag * &j);
    QuantumSystem::new(f, g, hc.n.clone(), ComplexMatrix::identity(m2))
}

/// Builds `F1 = Θ(−iM − ½N†N)`, `G1 = −ΘN†`, `H1 = N`, `K1 = I`.
pub fn realize_passive(
    hamiltonian: &ComplexMatrix,
    coupling: &ComplexMatrix,
    theta1: &ComplexMatrix,
) -> Result<PassiveSystem, ModelError> {
    let hc = HamiltonianCoupling::passive(hamiltonian.clone(), coupling.clone())?;
    if theta1.rows() != hc.m.rows() || !theta1.is_square() {
        return Err(ModelError::DimMismatch(format!(
            "Θ is {}x{}, M is {}x{}",
            theta1.rows(),
            theta1.cols(),
            hc.m.rows(),
            hc.m.cols()
        )));
    }
    match is_positive_definite(theta1) {
        Ok(true) => {}
        Ok(false) => return Err(ModelError::NotPositiveDefinite("Θ")),
        Err(LinalgError::NotHermitian { .. }) => return Err(ModelError::NotHermitian("Θ")),
        Err(e) => return Err(e.into()),
    }
    let n_dag = coupling.adjoint();
    let inner = hamiltonian.scale(c(0.0, -1.0)) - (&n_dag * coupling).scale_real(0.5);
    let f1 = theta1 * &inner;
    let g1 = -(theta1 * &n_dag);
    PassiveSystem::new(f1, g1, coupling.clone(), ComplexMatrix::identity(coupling.rows()))
}

/// Doubles an annihilation-only system: `F = diag(F1, F1#)` and likewise for
/// `G`, `H`, `K`. A `1 × n` row `C1` becomes the cost row `[C1, 0]`; a
/// `1 × 2n` row is used as given.
pub fn lift_passive(sys: &PassiveSystem, c1: Option<&ComplexMatrix>) -> Result<QuantumSystem, ModelError> {
    let lift = |a: &ComplexMatrix| {
        let z = ComplexMatrix::zeros(a.rows(), a.cols());
        delta_embed(a, &z)
    };
    let lifted = QuantumSystem::new(lift(&sys.f1)?, lift(&sys.g1)?, lift(&sys.h1)?, lift(&sys.k1)?)?;
    match c1 {
        None => Ok(lifted),
        Some(row) if row.rows() == 1 && row.cols() == sys.n => {
            let padded = ComplexMatrix::from_blocks(&[&[row, &ComplexMatrix::zeros(1, sys.n)]])?;
            lifted.with_cost_row(padded)
        }
        Some(row) => lifted.with_cost_row(row.clone()),
    }
}

/// Single-mode dynamic squeezer with one field channel per entry of `kappas`:
///
/// `da = −(γ/2) a dt − χ a* dt − Σ √κᵢ dAᵢ`, `dAᵢ_out = √κᵢ a dt + dAᵢ`.
///
/// With `enforce` set the realizability constraint `γ = Σ κᵢ` is checked.
pub fn make_squeezer(gamma: f64, kappas: &[f64], chi: C64, enforce: bool) -> Result<QuantumSystem, ModelError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(ModelError::BadParameter(format!("gamma must be positive, got {gamma}")));
    }
    if kappas.is_empty() {
        return Err(ModelError::BadParameter("at least one kappa is required".into()));
    }
    if let Some(k) = kappas.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(ModelError::BadParameter(format!("kappa must be positive, got {k}")));
    }
    if !(chi.re.is_finite() && chi.im.is_finite()) {
        return Err(ModelError::BadParameter("chi must be finite".into()));
    }
    let kappa_sum: f64 = kappas.iter().sum();
    if enforce && (gamma - kappa_sum).abs() > 1e-9 {
        return Err(ModelError::NotRealizable { gamma, kappa_sum });
    }
    let m = kappas.len();
    let roots: Vec<C64> = kappas.iter().map(|k| c(k.sqrt(), 0.0)).collect();
    let f = delta_embed(&ComplexMatrix::from_real_rows(&[[-gamma / 2.0]])?, &ComplexMatrix::from_rows(&[vec![-chi]])?)?;
    let g1 = ComplexMatrix::from_row_major(1, m, roots.iter().map(|r| -r).collect())?;
    let h1 = ComplexMatrix::from_row_major(m, 1, roots)?;
    let g = delta_embed(&g1, &ComplexMatrix::zeros(1, m))?;
    let h = delta_embed(&h1, &ComplexMatrix::zeros(m, 1))?;
    QuantumSystem::new(f, g, h, ComplexMatrix::identity(2 * m))
}

/// Passive optical cavity, the `χ = 0` squeezer written with annihilation
/// operators only.
pub fn make_cavity(gamma: f64, kappas: &[f64], enforce: bool) -> Result<PassiveSystem, ModelError> {
    let doubled = make_squeezer(gamma, kappas, c(0.0, 0.0), enforce)?;
    Ok(doubled.passive_part().expect("cavity is annihilation-only"))
}

/// Which realizability condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// The Lyapunov solution Θ lacks the required structure (or definiteness).
    CommutationStructure,
    /// `G = −Θ H† J` (general) or `G = −Θ H†` (passive).
    Coupling,
    /// `K = I`.
    Feedthrough,
}

impl Condition {
    /// Label of the condition in the general or the annihilation-only form.
    pub fn label(&self, kind: CommutationKind) -> &'static str {
        match (self, kind) {
            (Condition::CommutationStructure, CommutationKind::General) => {
                "(a) commutation matrix solving F Θ + Θ F† + G J G† = 0 has admissible structure"
            }
            (Condition::CommutationStructure, CommutationKind::Passive) => {
                "(a) Θ solving F1 Θ + Θ F1† + G1 G1† = 0 is positive definite"
            }
            (Condition::Coupling, CommutationKind::General) => "(b) G = -Θ H† J",
            (Condition::Coupling, CommutationKind::Passive) => "(b) G1 = -Θ H1†",
            (Condition::Feedthrough, CommutationKind::General) => "(c) K = I",
            (Condition::Feedthrough, CommutationKind::Passive) => "(c) K1 = I",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label(CommutationKind::General))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizabilityFailure {
    pub condition: Condition,
    /// Residual of the failing condition; for the structural condition the
    /// relative deviation reported by the check, or NaN when not numeric.
    pub residual: f64,
    pub detail: String,
    /// Candidate Θ recovered from the Lyapunov equation.
    pub candidate_theta: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Realizability {
    Realizable(CommutationMatrix),
    Failed(RealizabilityFailure),
}

impl Realizability {
    pub fn is_realizable(&self) -> bool {
        matches!(self, Realizability::Realizable(_))
    }

    pub fn theta(&self) -> Option<&CommutationMatrix> {
        match self {
            Realizability::Realizable(t) => Some(t),
            Realizability::Failed(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&RealizabilityFailure> {
        match self {
            Realizability::Realizable(_) => None,
            Realizability::Failed(f) => Some(f),
        }
    }
}

fn recover_theta(f: &ComplexMatrix, forcing: &ComplexMatrix) -> Result<ComplexMatrix, ModelError> {
    match lyapunov_solve(f, forcing) {
        Ok(t) => Ok(t),
        Err(LinalgError::Singular { .. }) => Err(ModelError::NonUniqueTheta),
        Err(e) => Err(e.into()),
    }
}

fn feedthrough_residual(k: &ComplexMatrix) -> f64 {
    (k - &ComplexMatrix::identity(k.rows())).frobenius_norm()
}

/// Recovers Θ from `F Θ + Θ F† + G J G† = 0` and checks the structure of Θ,
/// `G = −Θ H† J` and `K = I`, in that order.
pub fn check_realizable_general(sys: &QuantumSystem) -> Result<Realizability, ModelError> {
    let j_in = ComplexMatrix::signature(sys.m);
    let forcing = &sys.g * &j_in * &sys.g.adjoint();
    let theta = recover_theta(&sys.f, &forcing)?;
    let fail = |condition, residual, detail: String| {
        Ok(Realizability::Failed(RealizabilityFailure { condition, residual, detail, candidate_theta: theta.clone() }))
    };
    let structured = match validate_general_theta(&theta) {
        Ok(()) => CommutationMatrix { theta: theta.clone(), kind: CommutationKind::General },
        Err(detail) => return fail(Condition::CommutationStructure, f64::NAN, detail),
    };
    let coupling = (&sys.g + &(&theta * &sys.h.adjoint() * &j_in)).frobenius_norm();
    if coupling > REALIZABILITY_TOL * (1.0 + sys.g.frobenius_norm()) {
        return fail(Condition::Coupling, coupling, format!("‖G + Θ H† J‖_F = {coupling:e}"));
    }
    let ff = feedthrough_residual(&sys.k);
    if ff > REALIZABILITY_TOL {
        return fail(Condition::Feedthrough, ff, format!("‖K - I‖_F = {ff:e}"));
    }
    Ok(Realizability::Realizable(structured))
}

/// Recovers Θ from `F1 Θ + Θ F1† + G1 G1† = 0` and checks `Θ > 0`,
/// `G1 = −Θ H1†` and `K1 = I`, in that order.
pub fn check_realizable_passive(sys: &PassiveSystem) -> Result<Realizability, ModelError> {
    let forcing = &sys.g1 * &sys.g1.adjoint();
    let theta = recover_theta(&sys.f1, &forcing)?;
    let fail = |condition, residual, detail: String| {
        Ok(Realizability::Failed(RealizabilityFailure { condition, residual, detail, candidate_theta: theta.clone() }))
    };
    if let Err(detail) = validate_passive_theta(&theta) {
        return fail(Condition::CommutationStructure, f64::NAN, detail);
    }
    let coupling = (&sys.g1 + &(&theta * &sys.h1.adjoint())).frobenius_norm();
    if coupling > REALIZABILITY_TOL * (1.0 + sys.g1.frobenius_norm()) {
        return fail(Condition::Coupling, coupling, format!("‖G1 + Θ H1†‖_F = {coupling:e}"));
    }
    let ff = feedthrough_residual(&sys.k1);
    if ff > REALIZABILITY_TOL {
        return fail(Condition::Feedthrough, ff, format!("‖K1 - I‖_F = {ff:e}"));
    }
    Ok(Realizability::Realizable(CommutationMatrix { theta, kind: CommutationKind::Passive }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealizableKind {
    General,
    Passive,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RandomSystem {
    General(QuantumSystem),
    Passive(PassiveSystem),
}

fn uniform_complex(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let entries = (0..rows * cols).map(|_| uniform_complex(rng)).collect();
    ComplexMatrix::from_row_major(rows, cols, entries).expect("finite draws")
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    random_matrix(rng, n, n).hermitian_part()
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n, n);
    (&a + &a.transpose()).scale_real(0.5)
}

/// Runs `draw` until the matrix selected by `dynamics` is Hurwitz.
pub(crate) fn draw_until_hurwitz<T>(
    rng: &mut ChaCha8Rng,
    max_draws: usize,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Result<T, ModelError>,
    dynamics: impl Fn(&T) -> &ComplexMatrix,
) -> Result<T, ModelError> {
    for _ in 0..max_draws {
        let candidate = draw(rng)?;
        if linalg::is_hurwitz(dynamics(&candidate)) {
            return Ok(candidate);
        }
    }
    Err(ModelError::RejectionExhausted { draws: max_draws })
}

fn check_counts(n: usize, m: usize) -> Result<(), ModelError> {
    if n == 0 || m == 0 {
        return Err(ModelError::BadParameter(format!("need n, m >= 1, got n = {n}, m = {m}")));
    }
    Ok(())
}

/// Random realizable doubled system with `Θ = J`. Entries of `M1, M2, N1, N2`
/// have real and imaginary parts uniform on `[−1, 1]`; draws repeat until `F`
/// is Hurwitz.
pub fn random_realizable_general(seed: u64, n: usize, m: usize) -> Result<QuantumSystem, ModelError> {
    check_counts(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = CommutationMatrix::canonical_general(n);
    draw_until_hurwitz(
        &mut rng,
        MAX_DRAWS,
        |rng| {
            let m1 = random_hermitian(rng, n);
            let m2 = random_symmetric(rng, n);
            let n1 = random_matrix(rng, m, n);
            let n2 = random_matrix(rng, m, n);
            let hc = HamiltonianCoupling::general(delta_embed(&m1, &m2)?, delta_embed(&n1, &n2)?)?;
            realize_general(&hc, &theta)
        },
        QuantumSystem::f,
    )
}

/// Random realizable annihilation-only system with `Θ = I`.
pub fn random_realizable_passive(seed: u64, n: usize, m: usize) -> Result<PassiveSystem, ModelError> {
    check_counts(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = ComplexMatrix::identity(n);
    draw_until_hurwitz(
        &mut rng,
        MAX_DRAWS,
        |rng| {
            let hm = random_hermitian(rng, n);
            let cp = random_matrix(rng, m, n);
            realize_passive(&hm, &cp, &theta)
        },
        PassiveSystem::f1,
    )
}

pub fn random_realizable(seed: u64, n: usize, m: usize, kind: RealizableKind) -> Result<RandomSystem, ModelError> {
    match kind {
        RealizableKind::General => random_realizable_general(seed, n, m).map(RandomSystem::General),
        RealizableKind::Passive => random_realizable_passive(seed, n, m).map(RandomSystem::Passive),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: &[&[f64]]) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(rows).unwrap()
    }

    fn scalar(x: C64) -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![x]]).unwrap()
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).frobenius_norm() <= tol
    }

    #[test]
    fn delta_embed_examples() {
        assert_eq!(delta_embed(&real(&[&[-2.0]]), &real(&[&[0.0]])).unwrap(), ComplexMatrix::diag_real(&[-2.0, -2.0]));
        assert_eq!(delta_embed(&real(&[&[-2.0]]), &real(&[&[-1.0]])).unwrap(), real(&[&[-2.0, -1.0], &[-1.0, -2.0]]));
        let expected =
            ComplexMatrix::from_rows(&[vec![c(-2.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(-2.0, 0.0)]]).unwrap();
        assert_eq!(delta_embed(&real(&[&[-2.0]]), &scalar(c(0.0, -1.0))).unwrap(), expected);
        assert!(matches!(
            delta_embed(&ComplexMatrix::zeros(1, 1), &ComplexMatrix::zeros(1, 2)),
            Err(ModelError::DimMismatch(_))
        ));
    }

    #[test]
    fn delta_structure_examples() {
        assert!(is_delta_structured(&real(&[&[-2.0, -1.0], &[-1.0, -2.0]]), 1e-12).unwrap());
        assert!(!is_delta_structured(&real(&[&[1.0, 2.0], &[3.0, 4.0]]), 1e-9).unwrap());
        assert!(!is_delta_structured(&ComplexMatrix::signature(1), 1e-9).unwrap());
        assert!(matches!(is_delta_structured(&ComplexMatrix::zeros(3, 2), 1e-9), Err(ModelError::OddDimension(_))));
    }

    #[test]
    fn squeezer_matrices() {
        let plant = make_squeezer(4.0, &[4.0], c(1.0, 0.0), true).unwrap();
        assert_eq!(plant.f(), &real(&[&[-2.0, -1.0], &[-1.0, -2.0]]));
        assert_eq!(plant.g(), &ComplexMatrix::identity(2).scale_real(-2.0));
        assert_eq!(plant.h(), &ComplexMatrix::identity(2).scale_real(2.0));
        assert_eq!(plant.k(), &ComplexMatrix::identity(2));

        let ctrl = make_squeezer(16.0, &[16.0], c(2.0, 0.0), true).unwrap();
        assert_eq!(ctrl.f(), &real(&[&[-8.0, -2.0], &[-2.0, -8.0]]));
        assert_eq!(ctrl.g(), &ComplexMatrix::identity(2).scale_real(-4.0));
        assert_eq!(ctrl.h(), &ComplexMatrix::identity(2).scale_real(4.0));
    }

    #[test]
    fn squeezer_parameter_errors() {
        assert_eq!(
            make_squeezer(5.0, &[4.0], c(0.0, 0.0), true).unwrap_err(),
            ModelError::NotRealizable { gamma: 5.0, kappa_sum: 4.0 }
        );
        assert!(matches!(make_squeezer(4.0, &[-4.0], c(0.0, 0.0), false), Err(ModelError::BadParameter(_))));
        assert!(matches!(make_squeezer(0.0, &[4.0], c(0.0, 0.0), false), Err(ModelError::BadParameter(_))));
        assert!(matches!(make_squeezer(4.0, &[], c(0.0, 0.0), false), Err(ModelError::BadParameter(_))));
        assert!(make_squeezer(5.0, &[4.0], c(0.0, 0.0), false).is_ok());
    }

    #[test]
    fn two_channel_squeezer_is_realizable() {
        let sys = make_squeezer(5.0, &[2.0, 3.0], c(0.5, -0.25), true).unwrap();
        assert_eq!(sys.channels(), 2);
        let r = check_realizable_general(&sys).unwrap();
        assert!(close(r.theta().unwrap().matrix(), &ComplexMatrix::signature(1), 1e-12));
    }

    #[test]
    fn lift_passive_examples() {
        let cavity = make_cavity(4.0, &[4.0], true).unwrap();
        assert_eq!(cavity.f1(), &real(&[&[-2.0]]));
        assert_eq!(cavity.g1(), &real(&[&[-2.0]]));
        assert_eq!(cavity.h1(), &real(&[&[2.0]]));
        let lifted = lift_passive(&cavity, None).unwrap();
        assert_eq!(lifted.f(), &ComplexMatrix::diag_real(&[-2.0, -2.0]));
        assert_eq!(lifted.g(), &ComplexMatrix::diag_real(&[-2.0, -2.0]));
        assert_eq!(lifted.h(), &ComplexMatrix::diag_real(&[2.0, 2.0]));
        assert_eq!(lifted.k(), &ComplexMatrix::identity(2));

        let sys = PassiveSystem::new(
            scalar(c(-1.0, 1.0)),
            ComplexMatrix::zeros(1, 2),
            ComplexMatrix::zeros(2, 1),
            ComplexMatrix::identity(2),
        )
        .unwrap();
        let lifted = lift_passive(&sys, Some(&scalar(c(0.5, 0.0)))).unwrap();
        assert_eq!(lifted.f(), &ComplexMatrix::diag(&[c(-1.0, 1.0), c(-1.0, -1.0)]));
        assert_eq!(lifted.k(), &ComplexMatrix::identity(4));
        assert_eq!(lifted.cost_row().unwrap(), &real(&[&[0.5, 0.0]]));
    }

    #[test]
    fn realize_general_examples() {
        let j = CommutationMatrix::canonical_general(1);
        let zero = ComplexMatrix::zeros(2, 2);
        let coupling = delta_embed(&real(&[&[2.0]]), &real(&[&[0.0]])).unwrap();

        let sys = realize_general(&HamiltonianCoupling::general(zero.clone(), coupling.clone()).unwrap(), &j).unwrap();
        assert!(close(sys.f(), &ComplexMatrix::identity(2).scale_real(-2.0), 1e-15));
        assert!(close(sys.g(), &ComplexMatrix::identity(2).scale_real(-2.0), 1e-15));
        assert_eq!(sys.h(), &ComplexMatrix::identity(2).scale_real(2.0));

        let sys = realize_general(&HamiltonianCoupling::general(zero.clone(), zero.clone()).unwrap(), &j).unwrap();
        assert_eq!(sys.f(), &zero);
        assert_eq!(sys.g(), &zero);
        assert_eq!(sys.h(), &zero);
        assert_eq!(sys.k(), &ComplexMatrix::identity(2));

        let ham = delta_embed(&real(&[&[1.0]]), &real(&[&[0.0]])).unwrap();
        let sys = realize_general(&HamiltonianCoupling::general(ham, coupling).unwrap(), &j).unwrap();
        assert!(close(sys.f(), &ComplexMatrix::diag(&[c(-2.0, -1.0), c(-2.0, 1.0)]), 1e-15));
        assert!(close(sys.g(), &ComplexMatrix::identity(2).scale_real(-2.0), 1e-15));
    }

    #[test]
    fn hamiltonian_coupling_validation() {
        let not_h = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(HamiltonianCoupling::passive(not_h, ComplexMatrix::zeros(1, 2)).is_err());
        assert!(matches!(
            HamiltonianCoupling::general(ComplexMatrix::signature(1), ComplexMatrix::zeros(2, 2)),
            Err(ModelError::NotDeltaStructured("M"))
        ));
        assert!(matches!(
            HamiltonianCoupling::passive(ComplexMatrix::zeros(2, 2), ComplexMatrix::zeros(1, 3)),
            Err(ModelError::DimMismatch(_))
        ));
    }

    #[test]
    fn realize_passive_examples() {
        let one = real(&[&[1.0]]);
        let s = realize_passive(&real(&[&[0.0]]), &real(&[&[2.0]]), &one).unwrap();
        assert_eq!((s.f1(), s.g1(), s.h1()), (&real(&[&[-2.0]]), &real(&[&[-2.0]]), &real(&[&[2.0]])));
        let s = realize_passive(&one, &real(&[&[0.0]]), &one).unwrap();
        assert_eq!(s.f1(), &scalar(c(0.0, -1.0)));
        assert_eq!(s.g1(), &real(&[&[0.0]]));
        let s = realize_passive(&real(&[&[0.0]]), &real(&[&[2f64.sqrt()]]), &one).unwrap();
        assert!(close(s.f1(), &real(&[&[-1.0]]), 1e-15));

        assert_eq!(
            realize_passive(&real(&[&[0.0]]), &one, &real(&[&[-1.0]])).unwrap_err(),
            ModelError::NotPositiveDefinite("Θ")
        );
        assert_eq!(
            realize_passive(
                &ComplexMatrix::zeros(2, 2),
                &ComplexMatrix::zeros(1, 2),
                &real(&[&[1.0, 1.0], &[0.0, 1.0]])
            )
            .unwrap_err(),
            ModelError::NotHermitian("Θ")
        );
    }

    #[test]
    fn check_general_squeezer_recovers_j() {
        let plant = make_squeezer(4.0, &[4.0], c(1.0, 0.0), true).unwrap();
        // Substitution oracle: F J + J F† + G J G† = 0 and −J H† J = G.
        let j = ComplexMatrix::signature(1);
        let lyap = plant.f() * &j + &j * &plant.f().adjoint() + plant.g() * &j * &plant.g().adjoint();
        assert_eq!(lyap.frobenius_norm(), 0.0);
        let r = check_realizable_general(&plant).unwrap();
        let theta = r.theta().expect("realizable");
        assert!(close(theta.matrix(), &j, 1e-12));
        assert!(theta.is_structural_check_only());
    }

    #[test]
    fn check_general_detects_coupling_failure() {
        let sys = make_squeezer(5.0, &[4.0], c(0.0, 0.0), false).unwrap();
        let r = check_realizable_general(&sys).unwrap();
        let fail = r.failure().expect("not realizable");
        assert_eq!(fail.condition, Condition::Coupling);
        // Lyapunov gives Θ = 0.8 J; G + Θ H† J = −0.4 I.
        assert!(close(&fail.candidate_theta, &ComplexMatrix::signature(1).scale_real(0.8), 1e-12));
        assert!((fail.residual - 0.4 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn check_general_detects_feedthrough_failure() {
        let plant = make_squeezer(4.0, &[4.0], c(0.0, 0.0), true).unwrap();
        let bad = QuantumSystem::new(
            plant.f().clone(),
            plant.g().clone(),
            plant.h().clone(),
            ComplexMatrix::identity(2).scale_real(2.0),
        )
        .unwrap();
        let r = check_realizable_general(&bad).unwrap();
        assert_eq!(r.failure().unwrap().condition, Condition::Feedthrough);
    }

    #[test]
    fn check_general_non_unique_theta() {
        let zero = ComplexMatrix::zeros(2, 2);
        let sys = QuantumSystem::new(zero.clone(), zero.clone(), zero, ComplexMatrix::identity(2)).unwrap();
        assert_eq!(check_realizable_general(&sys).unwrap_err(), ModelError::NonUniqueTheta);
    }

    #[test]
    fn check_general_structure_failure() {
        // G = Δ(1, 1) makes G J G† vanish, so the candidate Θ is zero.
        let sys = QuantumSystem::new(
            ComplexMatrix::identity(2).scale_real(-1.0),
            real(&[&[1.0, 1.0], &[1.0, 1.0]]),
            ComplexMatrix::identity(2),
            ComplexMatrix::identity(2),
        )
        .unwrap();
        let r = check_realizable_general(&sys).unwrap();
        let fail = r.failure().unwrap();
        assert_eq!(fail.condition, Condition::CommutationStructure);
        assert!(fail.detail.contains("inertia"));
    }

    #[test]
    fn check_passive_examples() {
        let cavity = make_cavity(4.0, &[4.0], true).unwrap();
        let r = check_realizable_passive(&cavity).unwrap();
        assert!(close(r.theta().unwrap().matrix(), &real(&[&[1.0]]), 1e-14));

        let one = real(&[&[1.0]]);
        let unstable = PassiveSystem::new(real(&[&[2.0]]), real(&[&[-2.0]]), real(&[&[2.0]]), one.clone()).unwrap();
        let fail = check_realizable_passive(&unstable).unwrap();
        let fail = fail.failure().unwrap();
        assert_eq!(fail.condition, Condition::CommutationStructure);
        assert!(close(&fail.candidate_theta, &real(&[&[-1.0]]), 1e-14));

        let bad_k = PassiveSystem::new(real(&[&[-2.0]]), real(&[&[-2.0]]), real(&[&[2.0]]), real(&[&[2.0]])).unwrap();
        assert_eq!(check_realizable_passive(&bad_k).unwrap().failure().unwrap().condition, Condition::Feedthrough);
    }

    #[test]
    fn commutation_matrix_validation() {
        assert!(CommutationMatrix::general(ComplexMatrix::signature(2)).is_ok());
        assert!(CommutationMatrix::general(ComplexMatrix::identity(2)).is_err());
        assert!(CommutationMatrix::general(ComplexMatrix::identity(3)).is_err());
        assert!(CommutationMatrix::passive(ComplexMatrix::identity(2)).is_ok());
        assert!(CommutationMatrix::passive(ComplexMatrix::signature(1)).is_err());
        // Θ = T J T† with a genuinely mixing doubled T.
        let t = delta_embed(&real(&[&[2.0]]), &ComplexMatrix::from_rows(&[vec![c(0.5, 0.3)]]).unwrap()).unwrap();
        let theta = &t * &ComplexMatrix::signature(1) * &t.adjoint();
        assert!(CommutationMatrix::general(theta).is_ok());
    }

    #[test]
    fn passive_part_of_squeezer() {
        assert!(make_squeezer(4.0, &[4.0], c(1.0, 0.0), true).unwrap().passive_part().is_none());
        let p = make_squeezer(4.0, &[4.0], c(0.0, 0.0), true).unwrap().passive_part().unwrap();
        assert_eq!(p.f1(), &real(&[&[-2.0]]));
    }

    #[test]
    fn random_generator_is_deterministic_and_realizable() {
        let a = random_realizable(1, 1, 1, RealizableKind::Passive).unwrap();
        let b = random_realizable(1, 1, 1, RealizableKind::Passive).unwrap();
        assert_eq!(a, b);
        let RandomSystem::Passive(p) = a else { panic!("kind") };
        assert!(check_realizable_passive(&p).unwrap().is_realizable());

        let g = random_realizable_general(7, 1, 1).unwrap();
        assert_eq!(g, random_realizable_general(7, 1, 1).unwrap());
        assert_ne!(g, random_realizable_general(8, 1, 1).unwrap());
        assert!(check_realizable_general(&g).unwrap().is_realizable());
        assert!(random_realizable_general(1, 0, 1).is_err());
    }

    #[test]
    fn rejection_is_exhausted_for_pinned_zero_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut calls = 0;
        let zero = ComplexMatrix::zeros(1, 1);
        let res = draw_until_hurwitz(
            &mut rng,
            MAX_DRAWS,
            |_| {
                calls += 1;
                realize_passive(&zero, &zero, &ComplexMatrix::identity(1))
            },
            PassiveSystem::f1,
        );
        assert_eq!(res.unwrap_err(), ModelError::RejectionExhausted { draws: MAX_DRAWS });
        assert_eq!(calls, MAX_DRAWS);
    }

    #[test]
    fn quantum_system_rejects_bad_shapes() {
        let i2 = ComplexMatrix::identity(2);
        assert!(matches!(
            QuantumSystem::new(ComplexMatrix::signature(1), i2.clone(), i2.clone(), i2.clone()),
            Err(ModelError::NotDeltaStructured("F"))
        ));
        assert!(matches!(
            QuantumSystem::new(i2.clone(), ComplexMatrix::identity(4), i2.clone(), i2.clone()),
            Err(ModelError::DimMismatch(_))
        ));
        let sys = QuantumSystem::new(i2.clone(), i2.clone(), i2.clone(), i2).unwrap();
        assert!(sys.clone().with_cost_row(ComplexMatrix::zeros(1, 3)).is_err());
        assert!(sys.with_cost_row(ComplexMatrix::zeros(1, 2)).is_ok());
    }
}
