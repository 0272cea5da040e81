//! Cumulative incidences, transition probabilities and their posterior
//! distributions.

pub mod functionals;
pub mod probabilities;
pub mod quadrature;

pub use functionals::{
    evaluate, evaluate_many, incidence_functional, incidence_table, occupancy_decomposition, posterior_curve,
    posterior_curves, CurveEstimate,
    Functional, IncidenceRow, IncidenceTable, OccupancyDecomposition, Profile, TimeGrid,
};
pub use probabilities::{
    cumulative_incidence, stay_probability, transition_probabilities_cr, transition_probabilities_id, FromInitial, FromRefracture,
    IdProbabilities, IdStart,
};
pub use quadrature::{gauss_legendre, Quadrature, QuadratureConfig};
