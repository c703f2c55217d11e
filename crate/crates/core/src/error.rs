use thiserror::Error;

use crate::device::Command;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{}unknown key `{key}`", at(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("{}invalid value for `{key}`: {msg}", at(*.line))]
    InvalidValue {
        key: String,
        line: Option<usize>,
        msg: String,
    },
    #[error("{}`{key}` out of range: {msg}", at(*.line))]
    OutOfRange {
        key: String,
        line: Option<usize>,
        msg: String,
    },
}

fn at(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}: "),
        None => String::new(),
    }
}

impl ConfigError {
    pub(crate) fn range(key: &str, msg: impl Into<String>) -> Self {
        ConfigError::OutOfRange {
            key: key.to_string(),
            line: None,
            msg: msg.into(),
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::UnknownKey { key, .. }
            | ConfigError::InvalidValue { key, .. }
            | ConfigError::OutOfRange { key, .. } => Some(key),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Syntax { line, .. } => Some(*line),
            ConfigError::UnknownKey { line, .. }
            | ConfigError::InvalidValue { line, .. }
            | ConfigError::OutOfRange { line, .. } => *line,
        }
    }

    /// Attaches a source line to errors that were raised after parsing.
    pub(crate) fn with_line(self, at: Option<usize>) -> Self {
        match self {
            ConfigError::OutOfRange { key, line, msg } => ConfigError::OutOfRange {
                key,
                line: line.or(at),
                msg,
            },
            ConfigError::InvalidValue { key, line, msg } => ConfigError::InvalidValue {
                key,
                line: line.or(at),
                msg,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("address {field}={value} outside organization (limit {limit})")]
    BadAddress {
        field: &'static str,
        value: u32,
        limit: u32,
    },
    #[error("illegal command {cmd}")]
    IllegalCommand { cmd: Command },
    #[error("trace not sorted by issue time at record {index}")]
    UnsortedTrace { index: usize },
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("random read starved: no completion within {limit} nCK (at nCK {now})")]
    Starvation { now: u64, limit: u64 },
    #[error("point (read_ratio={ratio:.3}, nop_period={nop}): {source}")]
    Point {
        ratio: f64,
        nop: u64,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
