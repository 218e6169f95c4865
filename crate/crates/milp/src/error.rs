use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("{context} references undeclared variable #{index}")]
    UnknownVariable { context: String, index: usize },

    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },

    #[error("binary variable `{name}` has bounds [{lower}, {upper}] outside [0, 1]")]
    BinaryBounds { name: String, lower: f64, upper: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid piecewise curve: {0}")]
    Curve(String),

    #[error(
        "piecewise input `{name}` bounds [{lower}, {upper}] leave curve domain [{first}, {last}]"
    )]
    CurveDomain {
        name: String,
        lower: f64,
        upper: f64,
        first: f64,
        last: f64,
    },

    #[error("curve values reach {magnitude}, which Big-M {big_m} does not dominate; rescale the curve")]
    CurveScale { magnitude: f64, big_m: f64 },

    #[error("solver option `{0}` must be positive")]
    Tolerance(&'static str),
}
