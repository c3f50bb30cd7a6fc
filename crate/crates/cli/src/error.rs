use std::fmt;

use defaultable_affine::Error;

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or rejected input; exit status 2.
    Input(String),
    /// A numerical method failed on valid input; exit status 1.
    Numerical { module: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical { module, message } => write!(f, "numerical failure in {module}: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let module = match &e {
            Error::MomentExplosion { .. } => "riccati",
            Error::DampingOutsideMomentDomain { .. } | Error::InsufficientDecay { .. } | Error::NoImpliedVol { .. } => {
                "fourier"
            }
            _ => return CliError::Input(e.to_string()),
        };
        CliError::Numerical {
            module,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        assert_eq!(CliError::from(Error::MomentExplosion { time: 1.0 }).exit_code(), 1);
        assert_eq!(CliError::from(Error::InvalidInput("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::DegenerateCorrelation).exit_code(), 2);
        let e = CliError::from(Error::InsufficientDecay {
            u_max: 1.0,
            last_panel: 1.0,
        });
        assert!(e.to_string().contains("fourier"));
    }
}
