use serde::Serialize;

/// Numeric thresholds shared across the pipeline. Every report carries the
/// instance it was computed with.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// A point is on the variety when `max |G_i| <= on_variety`.
    pub on_variety: f64,
    /// Membership in the critical set: `|detJ| <= critical` (also used for
    /// vanishing denominators of the potential).
    pub critical: f64,
    /// Newton convergence threshold on the residual.
    pub newton_converge: f64,
    /// Acceptance threshold on the residual after the polish step.
    pub newton_accept: f64,
    /// Relative step size below which Newton is considered stationary.
    pub newton_step: f64,
    pub newton_max_iter: usize,
    pub newton_max_halvings: usize,
    /// Points within this scaled distance are duplicates.
    pub dedupe: f64,
    /// `|c|` below this is the excluded origin.
    pub origin: f64,
    /// Eigenvalue clustering, numeric rank and rational reconstruction.
    pub spectrum: f64,
    /// Largest denominator accepted by rational reconstruction.
    pub max_den: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            on_variety: 1e-9,
            critical: 1e-8,
            newton_converge: 1e-12,
            newton_accept: 1e-9,
            newton_step: 1e-10,
            newton_max_iter: 200,
            newton_max_halvings: 30,
            dedupe: 1e-6,
            origin: 1e-8,
            spectrum: 1e-8,
            max_den: 1_000_000,
        }
    }
}
