use std::fmt;

use si_forge_core::catalog::CatalogError;
use si_forge_core::compositor::CompositeError;
use si_forge_core::meta::AnalysisError;
use si_forge_core::metrics::MetricsError;
use si_forge_core::sweep::SweepError;

/// Failure category; decides the exit code and leads the error line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Bad arguments or an unusable config file.
    Usage,
    /// Inputs that are missing, unreadable or inconsistent.
    Data,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Usage => 1,
            Self::Data => 2,
            Self::Internal => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Usage => "usage",
            Self::Data => "data",
            Self::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: Category,
    /// Finer tag after the category, e.g. `data/predictions`.
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Category::Usage, "arguments", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Category::Usage, "config", message)
    }

    pub fn data(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(Category::Data, kind, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(Category::Internal, "internal", message)
    }

    fn new(category: Category, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            category,
            kind,
            message: message.into(),
        }
    }

    /// `si-forge: error: <category>/<kind>: <message>` on one line.
    pub fn line(&self) -> String {
        let msg: String = self
            .message
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!("si-forge: error: {}/{}: {}", self.category.as_str(), self.kind, msg.trim())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::UnmappedClass(..) | CatalogError::ClassMap { .. } => Self::data("class_map", e.to_string()),
            CatalogError::Io { .. } => Self::data("io", e.to_string()),
            _ => Self::data("assets", e.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidConfig(_) | SweepError::BadThreshold(_) => Self::config(e.to_string()),
            SweepError::Io { .. } => Self::data("io", e.to_string()),
            _ => Self::data("dataset", e.to_string()),
        }
    }
}

impl From<CompositeError> for CliError {
    fn from(e: CompositeError) -> Self {
        Self::data("composite", e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let kind = match e {
            MetricsError::MissingPredictions { .. } | MetricsError::PredictionFormat { .. } => "predictions",
            MetricsError::Io(_) => "io",
            _ => "metrics",
        };
        Self::data(kind, e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let kind = match e {
            AnalysisError::NonConvergence { .. } => "convergence",
            AnalysisError::Io(_) => "io",
            _ => "analysis",
        };
        Self::data(kind, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_is_single_line() {
        let e = CliError::data("io", "first\nsecond");
        assert_eq!(e.line(), "si-forge: error: data/io: first second");
        assert_eq!(e.category.exit_code(), 2);
        assert_eq!(CliError::usage("x").category.exit_code(), 1);
        assert_eq!(CliError::internal("x").category.exit_code(), 3);
    }
}
