use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryErrorKind {
    Parse,
    UnknownIdentifier,
    TypeMismatch,
    UnsupportedFeature,
    DepthExceeded,
    RowLimitExceeded,
}

impl QueryErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            QueryErrorKind::Parse => "parse",
            QueryErrorKind::UnknownIdentifier => "unknown-identifier",
            QueryErrorKind::TypeMismatch => "type-mismatch",
            QueryErrorKind::UnsupportedFeature => "unsupported-feature",
            QueryErrorKind::DepthExceeded => "depth-exceeded",
            QueryErrorKind::RowLimitExceeded => "row-limit-exceeded",
        }
    }
}

impl fmt::Display for QueryErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl Span {
    pub(crate) fn at(text: &str, offset: usize) -> Span {
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Span { offset, line, column }
    }
}

/// Query failure with a self-contained message, suitable for showing to a
/// model so it can repair the query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryError {
    pub kind: QueryErrorKind,
    pub message: String,
    pub span: Option<Span>,
    pub expected: Vec<String>,
}

impl QueryError {
    pub fn new(kind: QueryErrorKind, message: impl Into<String>) -> Self {
        QueryError {
            kind,
            message: message.into(),
            span: None,
            expected: Vec::new(),
        }
    }

    pub(crate) fn with_span(mut self, span: Span) -> Self {
        self.span = Some(span);
        self
    }

    pub(crate) fn unknown(message: impl Into<String>) -> Self {
        Self::new(QueryErrorKind::UnknownIdentifier, message)
    }

    pub(crate) fn type_mismatch(message: impl Into<String>) -> Self {
        Self::new(QueryErrorKind::TypeMismatch, message)
    }

    pub(crate) fn unsupported(message: impl Into<String>) -> Self {
        Self::new(QueryErrorKind::UnsupportedFeature, message)
    }
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error", self.kind)?;
        if let Some(span) = self.span {
            write!(f, " at line {}, column {}", span.line, span.column)?;
        }
        write!(f, ": {}", self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for QueryError {}
