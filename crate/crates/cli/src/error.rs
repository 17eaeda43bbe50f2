use std::fmt;

use semcode::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Internal,
    Config,
    Io,
    BadMagic,
    UnsupportedVersion,
    LengthMismatch,
    Parse,
    Dimension,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Internal => 1,
            ErrorKind::Config => 2,
            ErrorKind::Io => 3,
            ErrorKind::BadMagic => 4,
            ErrorKind::UnsupportedVersion => 5,
            ErrorKind::LengthMismatch => 6,
            ErrorKind::Parse => 7,
            ErrorKind::Dimension => 8,
            ErrorKind::Numeric => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Internal => "internal",
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
            ErrorKind::BadMagic => "bad-magic",
            ErrorKind::UnsupportedVersion => "unsupported-version",
            ErrorKind::LengthMismatch => "length-mismatch",
            ErrorKind::Parse => "parse",
            ErrorKind::Dimension => "dimension",
            ErrorKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    /// `error kind=<name> code=<exit>: <message>`, always a single line.
    pub fn line(&self) -> String {
        let message = self.message.replace(['\n', '\r'], " ");
        format!("error kind={} code={}: {}", self.kind.name(), self.kind.exit_code(), message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidArgument(_) | Error::Empty(_) => ErrorKind::Config,
            Error::Io { .. } => ErrorKind::Io,
            Error::BadMagic { .. } => ErrorKind::BadMagic,
            Error::UnsupportedVersion { .. } => ErrorKind::UnsupportedVersion,
            Error::LengthMismatch { .. } => ErrorKind::LengthMismatch,
            Error::Parse { .. } => ErrorKind::Parse,
            Error::Shape { .. } | Error::IndexOutOfRange { .. } | Error::Contract(_) => ErrorKind::Dimension,
            Error::NonFinite(_) | Error::Diverged { .. } => ErrorKind::Numeric,
        };
        Self::new(kind, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct() {
        let kinds = [
            ErrorKind::Internal,
            ErrorKind::Config,
            ErrorKind::Io,
            ErrorKind::BadMagic,
            ErrorKind::UnsupportedVersion,
            ErrorKind::LengthMismatch,
            ErrorKind::Parse,
            ErrorKind::Dimension,
            ErrorKind::Numeric,
        ];
        let mut codes: Vec<i32> = kinds.iter().map(|k| k.exit_code()).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), kinds.len());
        assert!(!codes.contains(&0));
    }

    #[test]
    fn line_is_single() {
        let e = CliError::config("a\nb");
        assert_eq!(e.line(), "error kind=config code=2: a b");
    }
}
