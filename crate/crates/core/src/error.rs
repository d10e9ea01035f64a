use thiserror::Error;

/// Every failure mode the library reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sampled separation fell below the collision floor.
    #[error("collision: {kind} separation {separation:.3e} at t = {t:.6} is below the floor {floor:.1e}")]
    Collision {
        kind: SeparationKind,
        separation: f64,
        t: f64,
        floor: f64,
    },

    /// An iterative solver ran out of budget before reaching its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    /// The line search could not find an admissible decreasing step.
    #[error("line search stalled at iteration {iteration} (action {action:.12e}, gradient norm {grad_norm:.3e})")]
    Stalled {
        iteration: usize,
        action: f64,
        grad_norm: f64,
    },

    /// A per-mass failure inside a parameter sweep.
    #[error("at m = {m}: {source}")]
    AtMass { m: f64, source: Box<Error> },

    /// Every start of a multistart run failed.
    #[error("all {} starts failed; first: {}", failures.len(), first_failure(failures))]
    AllStartsFailed { failures: Vec<(u64, Error)> },

    /// Sampled points do not span a plane.
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
}

fn first_failure(failures: &[(u64, Error)]) -> String {
    failures
        .first()
        .map_or_else(|| "none".into(), |(seed, e)| format!("seed {seed}: {e}"))
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Which family of distances attained a minimum separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationKind {
    /// Distance between two bodies of the choreography.
    Mutual,
    /// Distance between a body and one of the fixed centers.
    Center,
}

impl std::fmt::Display for SeparationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeparationKind::Mutual => f.write_str("mutual"),
            SeparationKind::Center => f.write_str("center"),
        }
    }
}
