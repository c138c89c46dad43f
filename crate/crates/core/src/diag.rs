//! Diagnostics shared by every pipeline stage.
//!
//! Each finding carries a stable rule id (`P01`..`P10` for profile rules,
//! dotted ids such as `ingest.dangling-ref` or `pddl.syntax` elsewhere), a
//! severity, an optional element path or source position, and a message.
//! Rendered form: `severity rule element-path: message`.

use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Warning => write!(f, "warning"),
            Severity::Error => write!(f, "error"),
        }
    }
}

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Position {
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub rule: String,
    pub severity: Severity,
    /// Containment path of the offending element (names, slash-joined),
    /// when the finding is about a model element.
    pub element: Option<String>,
    /// Raw element id, kept for stable ordering when paths collide.
    pub element_id: Option<String>,
    /// Source position, when the finding is about a span of input text.
    pub position: Option<Position>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(rule: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            rule: rule.to_string(),
            severity: Severity::Error,
            element: None,
            element_id: None,
            position: None,
            message: message.into(),
        }
    }

    pub fn warning(rule: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Self::error(rule, message)
        }
    }

    pub fn at_element(mut self, path: impl Into<String>) -> Self {
        self.element = Some(path.into());
        self
    }

    pub fn with_element_id(mut self, id: impl Into<String>) -> Self {
        self.element_id = Some(id.into());
        self
    }

    pub fn at_position(mut self, line: u32, column: u32) -> Self {
        self.position = Some(Position { line, column });
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.severity, self.rule)?;
        if let Some(path) = &self.element {
            write!(f, " {}", path)?;
        }
        if let Some(pos) = &self.position {
            write!(f, " {}:{}", pos.line, pos.column)?;
        }
        write!(f, ": {}", self.message)
    }
}

/// True when any diagnostic in the slice is an error.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Canonical report order: rule id, then element path, then element id.
pub fn sort_canonical(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (&a.rule, &a.element, &a.element_id, a.position, &a.message).cmp(&(
            &b.rule,
            &b.element,
            &b.element_id,
            b.position,
            &b.message,
        ))
    });
}

/// Compute a 1-based line/column pair for a byte offset into `text`.
pub fn position_of(text: &str, offset: usize) -> Position {
    let clamped = offset.min(text.len());
    let mut line = 1u32;
    let mut col = 1u32;
    for (i, ch) in text.char_indices() {
        if i >= clamped {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    Position { line, column: col }
}
