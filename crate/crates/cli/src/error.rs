use std::fmt;
use std::process::ExitCode;

use capskin::calibration::CalibrationError;
use capskin::evalharness::EvalError;
use capskin::geometry::GeometryError;
use capskin::locnet::LocnetError;
use capskin::skinsim::SimError;

/// Error classes with their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Runtime,
    Usage,
    Io,
    Schema,
}

impl Class {
    pub fn code(self) -> u8 {
        match self {
            Class::Runtime => 1,
            Class::Usage => 2,
            Class::Io => 3,
            Class::Schema => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: Class,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            class: Class::Usage,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            class: Class::Io,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.class.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn classified(class: Class, e: impl fmt::Display) -> CliError {
    CliError {
        class,
        message: e.to_string(),
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        let class = match &e {
            GeometryError::Io { .. } => Class::Io,
            GeometryError::Parse { .. }
            | GeometryError::IndexOutOfRange { .. }
            | GeometryError::DegenerateTriangle { .. }
            | GeometryError::NonFiniteVertex(_)
            | GeometryError::EmptyMesh
            | GeometryError::NoEdges => Class::Schema,
            _ => Class::Usage,
        };
        classified(class, e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let class = match &e {
            SimError::Io { .. } => Class::Io,
            SimError::Json(_) => Class::Schema,
            SimError::InvalidConfig(_) | SimError::ZeroFrames | SimError::FrameLength(_) => Class::Usage,
            _ => Class::Runtime,
        };
        classified(class, e)
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Geometry(g) => g.into(),
            CalibrationError::Sim(s) => s.into(),
            CalibrationError::Io { .. } => classified(Class::Io, e),
            CalibrationError::Schema { .. } => classified(Class::Schema, e),
            CalibrationError::OffSurface { .. } => classified(Class::Runtime, e),
            _ => classified(Class::Usage, e),
        }
    }
}

impl From<LocnetError> for CliError {
    fn from(e: LocnetError) -> Self {
        match e {
            LocnetError::Geometry(g) => g.into(),
            LocnetError::Io { .. } => classified(Class::Io, e),
            LocnetError::Corrupt(_) | LocnetError::Version { .. } => classified(Class::Schema, e),
            LocnetError::Diverged { .. } => classified(Class::Runtime, e),
            _ => classified(Class::Usage, e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Calibration(c) => c.into(),
            EvalError::Locnet(l) => l.into(),
            EvalError::Sim(s) => s.into(),
            EvalError::Geometry(g) => g.into(),
            EvalError::Io { .. } | EvalError::Csv(_) => classified(Class::Io, e),
            EvalError::InvalidConfig(_) => classified(Class::Usage, e),
            _ => classified(Class::Runtime, e),
        }
    }
}
