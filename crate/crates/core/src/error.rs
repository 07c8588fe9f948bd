use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the set where the operation is defined
    /// (a probability outside (0,1), a parameter outside the model domain).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid model descriptor or configuration; `field` names the offending entry.
    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("column {column} is constant; its margin is degenerate")]
    DegenerateMargin { column: usize },

    /// A factorization or solve failed. `estimate` is the smallest eigenvalue
    /// (or a condition-number estimate, as stated in `context`) when available.
    #[error("singular matrix in {context}{}", fmt_estimate(.estimate))]
    Singular {
        context: String,
        estimate: Option<f64>,
    },

    #[error("solver did not converge after {iterations} iterations (last score norm {last_score_norm:e})")]
    NonConvergence {
        iterations: usize,
        last_score_norm: f64,
        trace: Vec<String>,
    },

    #[error("experiment failed: {failed} of {total} replications failed for {estimator}")]
    Experiment {
        estimator: String,
        failed: usize,
        total: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_estimate(estimate: &Option<f64>) -> String {
    match estimate {
        Some(v) => format!(" (estimate {v:e})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn singular(context: impl Into<String>, estimate: Option<f64>) -> Self {
        Error::Singular {
            context: context.into(),
            estimate,
        }
    }

    /// Process exit code for the command-line front end: 2 for usage, data and
    /// domain problems, 3 for numerical or runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Shape(_)
            | Error::Config { .. }
            | Error::Data(_)
            | Error::DegenerateMargin { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            Error::Singular { .. } | Error::NonConvergence { .. } | Error::Experiment { .. } => 3,
        }
    }
}
