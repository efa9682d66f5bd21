use std::fmt;

use fleet_core::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Parse,
    Infeasible,
    NonConverged,
    Unsupported,
    Io,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Parse => "parse",
            Self::Infeasible => "infeasible",
            Self::NonConverged => "nonconverged",
            Self::Unsupported => "unsupported",
            Self::Io => "io",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Self::Io => 1,
            Self::Parse => 2,
            Self::Infeasible => 3,
            Self::NonConverged => 4,
            Self::Unsupported => 5,
        }
    }
}

/// A failure with a machine-readable category and code, and the scenario
/// field it concerns when there is one.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct CliError {
    pub category: Category,
    pub code: &'static str,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}/{}]", self.category.as_str(), self.code)?;
        if let Some(field) = &self.field {
            write!(f, " {field}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl CliError {
    pub fn parse(code: &'static str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            category: Category::Parse,
            code,
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            category: Category::Io,
            code: "io",
            field: None,
            message: message.into(),
        }
    }

    pub fn missing(field: impl Into<String>, what: &str) -> Self {
        Self::parse("missing_field", field, format!("this subcommand needs {what}"))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let (category, code) = match &e {
            CoreError::Infeasible(_) => (Category::Infeasible, "infeasible"),
            CoreError::NegativeFlow { .. } => (Category::Infeasible, "negative_flow"),
            CoreError::NotRealisable { .. } => (Category::Infeasible, "not_realisable"),
            CoreError::DomainViolation { .. } => (Category::Infeasible, "domain_violation"),
            CoreError::NonConverged { .. } => (Category::NonConverged, "nonconverged"),
            CoreError::Unsupported(_) => (Category::Unsupported, "unsupported"),
            CoreError::VertexCap { .. } => (Category::Unsupported, "vertex_cap"),
            CoreError::NotDifferentiable { .. } => (Category::Unsupported, "not_differentiable"),
            CoreError::InvalidNetwork(_) => (Category::Parse, "invalid_network"),
            CoreError::InvalidConfig(_) => (Category::Parse, "invalid_config"),
            CoreError::DimensionMismatch { .. } => (Category::Parse, "dimension_mismatch"),
        };
        Self {
            category,
            code,
            field: None,
            message: e.to_string(),
        }
    }
}
