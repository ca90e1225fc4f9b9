use std::fmt;

/// A failure reported as one diagnostic line naming the failing module.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub module: &'static str,
    pub message: String,
    pub numerical: bool,
}

impl CliError {
    pub fn user(module: &'static str, message: impl Into<String>) -> Self {
        Self {
            module,
            message: message.into(),
            numerical: false,
        }
    }

    pub fn from_core(module: &'static str, err: spmld::Error) -> Self {
        Self {
            module,
            numerical: err.is_numerical(),
            message: err.to_string(),
        }
    }

    /// 1 for user errors, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.numerical {
            2
        } else {
            1
        }
    }

    pub fn with_context(mut self, context: impl fmt::Display) -> Self {
        self.message = format!("{context}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // keep the diagnostic on one line
        let message = self.message.replace('\n', " ");
        write!(f, "error[{}]: {message}", self.module)
    }
}

impl std::error::Error for CliError {}

/// Tags core errors with the module that raised them.
pub trait Tag<T> {
    fn tag(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> Tag<T> for spmld::Result<T> {
    fn tag(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(module, e))
    }
}

pub fn io_error(module: &'static str, path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::user(module, format!("{}: {err}", path.display()))
}
