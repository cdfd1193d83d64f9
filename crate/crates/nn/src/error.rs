use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("parameters are frozen")]
    Frozen,
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("gradient count {found} does not match parameter count {expected}")]
    GradientCount { expected: usize, found: usize },
}
