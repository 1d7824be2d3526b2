//! Estimation schemes behind a common trait, looked up by name.
//!
//! The built-in registry holds `classical` (homodyne detection directly on
//! the plant output) and `coherent` (a quantum controller between plant and
//! detector). Other schemes can be registered alongside them.

use std::fmt;

use crate::care::{solve_filter_care, CareSolution, SolveOptions};
use crate::estimation::{
    build_classical_problem, build_coherent_problem, cost_from_solution, EstimationError, FilterCareProblem,
    HomodyneSetup,
};
use crate::qsys::QuantumSystem;

/// Result of running one scheme at one homodyne setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub problem: FilterCareProblem,
    pub solution: CareSolution,
    pub cost: f64,
}

pub trait EstimationScheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn needs_controller(&self) -> bool;

    fn build_problem(
        &self,
        plant: &QuantumSystem,
        controller: Option<&QuantumSystem>,
        hd: &HomodyneSetup,
    ) -> Result<FilterCareProblem, EstimationError>;

    /// Builds the filter problem, solves it and evaluates the cost.
    fn evaluate(
        &self,
        plant: &QuantumSystem,
        controller: Option<&QuantumSystem>,
        hd: &HomodyneSetup,
        opts: &SolveOptions,
    ) -> Result<SchemeOutcome, EstimationError> {
        let problem = self.build_problem(plant, controller, hd)?;
        let solution = solve_filter_care(&problem, opts)?;
        let cost = cost_from_solution(&problem, &solution.p)?;
        Ok(SchemeOutcome { problem, solution, cost })
    }
}

pub struct Classical;

impl EstimationScheme for Classical {
    fn name(&self) -> &'static str {
        "classical"
    }

    fn needs_controller(&self) -> bool {
        false
    }

    fn build_problem(
        &self,
        plant: &QuantumSystem,
        _controller: Option<&QuantumSystem>,
        hd: &HomodyneSetup,
    ) -> Result<FilterCareProblem, EstimationError> {
        build_classical_problem(plant, hd)
    }
}

pub struct Coherent;

impl EstimationScheme for Coherent {
    fn name(&self) -> &'static str {
        "coherent"
    }

    fn needs_controller(&self) -> bool {
        true
    }

    fn build_problem(
        &self,
        plant: &QuantumSystem,
        controller: Option<&QuantumSystem>,
        hd: &HomodyneSetup,
    ) -> Result<FilterCareProblem, EstimationError> {
        let controller = controller.ok_or(EstimationError::MissingController(self.name()))?;
        build_coherent_problem(plant, controller, hd)
    }
}

#[derive(Default)]
pub struct SchemeRegistry {
    schemes: Vec<Box<dyn EstimationScheme>>,
}

impl SchemeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.register(Box::new(Classical)).expect("fresh registry");
        reg.register(Box::new(Coherent)).expect("fresh registry");
        reg
    }

    pub fn register(&mut self, scheme: Box<dyn EstimationScheme>) -> Result<(), EstimationError> {
        if self.get(scheme.name()).is_some() {
            return Err(EstimationError::DuplicateScheme(scheme.name().to_string()));
        }
        self.schemes.push(scheme);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn EstimationScheme> {
        self.schemes.iter().find(|s| s.name() == name).map(|s| s.as_ref())
    }

    pub fn require(&self, name: &str) -> Result<&dyn EstimationScheme, EstimationError> {
        self.get(name).ok_or_else(|| EstimationError::UnknownScheme(name.to_string()))
    }

    /// Registered names in registration order.
    pub fn names(&self) -> Vec<&'static str> {
        self.schemes.iter().map(|s| s.name()).collect()
    }
}

impl fmt::Debug for SchemeRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemeRegistry").field("schemes", &self.names()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, C64};
    use crate::qsys::make_squeezer;

    struct Dummy;

    impl EstimationScheme for Dummy {
        fn name(&self) -> &'static str {
            "classical"
        }
        fn needs_controller(&self) -> bool {
            false
        }
        fn build_problem(
            &self,
            plant: &QuantumSystem,
            _: Option<&QuantumSystem>,
            hd: &HomodyneSetup,
        ) -> Result<FilterCareProblem, EstimationError> {
            build_classical_problem(plant, hd)
        }
    }

    #[test]
    fn builtin_names_and_lookup() {
        let reg = SchemeRegistry::builtin();
        assert_eq!(reg.names(), vec!["classical", "coherent"]);
        assert!(reg.get("coherent").unwrap().needs_controller());
        assert!(!reg.get("classical").unwrap().needs_controller());
        assert_eq!(reg.require("kalman").err(), Some(EstimationError::UnknownScheme("kalman".into())));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut reg = SchemeRegistry::builtin();
        assert_eq!(reg.register(Box::new(Dummy)).unwrap_err(), EstimationError::DuplicateScheme("classical".into()));
    }

    #[test]
    fn coherent_without_controller_fails() {
        let plant = make_squeezer(4.0, &[4.0], C64::new(0.0, 0.0), true)
            .unwrap()
            .with_cost_row(ComplexMatrix::from_real_rows(&[[0.2, -0.2]]).unwrap())
            .unwrap();
        let hd = HomodyneSetup::from_degrees(&[0.0]).unwrap();
        let reg = SchemeRegistry::builtin();
        assert_eq!(
            reg.get("coherent").unwrap().build_problem(&plant, None, &hd).unwrap_err(),
            EstimationError::MissingController("coherent")
        );
        let out = reg.get("classical").unwrap().evaluate(&plant, None, &hd, &SolveOptions::default()).unwrap();
        assert!((out.cost - 0.08).abs() < 1e-12);
    }
}
