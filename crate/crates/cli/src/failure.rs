use std::fmt;

/// Command failure, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, keys, values or missing inputs; exit code 2.
    Config(String),
    /// Anything that went wrong while running; exit code 3.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<phaseret::Error> for Failure {
    fn from(e: phaseret::Error) -> Self {
        match e {
            phaseret::Error::Config(m) => Self::Config(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}
