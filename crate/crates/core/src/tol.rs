//! Central numeric tolerances. Every module pulls from here so that a
//! tolerance is never redefined locally with a diverging value.

/// Primal feasibility tolerance for LP solutions.
pub const FEASIBILITY: f64 = 1e-7;

/// Optimality (reduced-cost) tolerance for the simplex method.
pub const OPTIMALITY: f64 = 1e-7;

/// Integrality tolerance for binary variables in branch and bound.
pub const INTEGRALITY: f64 = 1e-6;

/// Default relative MIP gap.
pub const MIP_GAP: f64 = 1e-6;

/// Two cuts whose coefficients agree within this tolerance are duplicates.
pub const CUT_DUPLICATE: f64 = 1e-9;

/// Probability bookkeeping in scenario trees must close to this tolerance.
pub const PROBABILITY: f64 = 1e-9;

/// Relative tolerance for the strong-duality identity of a generated cut.
pub const CUT_STRONG_DUALITY: f64 = 1e-5;

/// Minimum magnitude accepted for a simplex pivot element.
pub const PIVOT: f64 = 1e-9;
