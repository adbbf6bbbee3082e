use thiserror::Error;

/// Why a scenario could not be run, ordered by exit code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Failure {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            Failure::Io(_) => "io",
            Failure::Parse(_) => "parse",
            Failure::Validation(_) => "validation",
            Failure::Numeric(_) => "numeric",
        }
    }

    /// `error class=<class> scenario="<source>" reason="<message>"` on one line.
    pub fn report(&self, scenario: &str) -> String {
        let reason = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error class={} scenario={scenario:?} reason={reason:?}", self.class())
    }
}

impl From<qmemlab::Error> for Failure {
    fn from(e: qmemlab::Error) -> Self {
        match e {
            qmemlab::Error::InvalidParameter { .. } | qmemlab::Error::InvalidGrid(_) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Numeric(e.to_string()),
        }
    }
}
