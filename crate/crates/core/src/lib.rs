//! Improvable upper bounds on the ground-state energy of the acoustical polaron.
//!
//! The electron–phonon Hamiltonian is shifted by a coherent-state transformation
//! and its vacuum moments `⟨0|𝓗^m|0⟩` are computed by symbolic Wick contraction
//! ([`wick`]) with exact radial and angular integrals ([`closed_form`],
//! [`angular`]). The moments feed a Hankel-matrix solver ([`solver`]) whose
//! lowest root is an upper bound on the ground state that improves with order.
//! [`oracle`] holds independent numerical checks used by the test suites.

pub mod angular;
pub mod closed_form;
pub mod moments;
pub mod oracle;
pub mod polaron;
pub mod quadrature;
pub mod solver;
pub mod wick;

pub use closed_form::{radial_integral, ClosedForm, ClosedFormError};
pub use moments::{central_moments, MomentTable, MomentTableError};
pub use polaron::{
    bound_moving, coupling_from_material, e_strong, e_var2, e_var2_derived, e_weak, effective_mass_estimate,
    solve_eta, strong_coupling_region, vacuum_energy_moving, EvalMode, FChoice, ModelError, PolaronParams,
};
pub use solver::{bound_at_order, bound_sequence, second_order_bound_closed, BoundResult, BoundSequence, SolverError};
pub use wick::{
    build_discrete_hamiltonian, build_hamiltonian, DiscreteKernel, DiscreteMode, EngineConfig, EngineError,
    HamiltonianSpec, MomentEngine, MomentExpansion,
};
