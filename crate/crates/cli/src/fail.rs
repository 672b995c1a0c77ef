use std::fmt::Display;

use cutcd::Error;

pub const USAGE: u8 = 2;
pub const NUMERICAL: u8 = 3;

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

pub type Outcome = std::result::Result<(), Failure>;

impl Failure {
    pub fn usage(msg: impl Display) -> Self {
        Self {
            code: USAGE,
            msg: msg.to_string(),
        }
    }
}

/// Numerical errors map to 3; bad input, missing files and the rest to 2.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::NonFinite(_) => NUMERICAL,
        _ => USAGE,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            msg: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::usage(e)
    }
}
