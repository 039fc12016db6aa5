use std::fmt;

use lrom_core::Error;

/// A stage-tagged error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub stage: Option<&'static str>,
    pub msg: String,
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_BLOW_UP: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

impl Failure {
    pub fn io(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_IO,
            stage: None,
            msg: msg.into(),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            stage: None,
            msg: msg.into(),
        }
    }

    pub fn blow_up(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_BLOW_UP,
            stage: None,
            msg: msg.into(),
        }
    }

    pub fn in_stage(mut self, stage: &'static str) -> Self {
        self.stage.get_or_insert(stage);
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Format { .. } => EXIT_IO,
            Error::BlowUp { .. } => EXIT_BLOW_UP,
            Error::CalibrationInfeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            stage: None,
            msg: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(stage) => write!(f, "{stage}: {}", self.msg),
            None => f.write_str(&self.msg),
        }
    }
}

/// Tags core errors with the stage that raised them.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| e.into().in_stage(stage))
    }
}
