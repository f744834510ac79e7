//! Differential verification of feed-forward ReLU networks.
//!
//! Given two structurally identical networks `f` and `f'` (for example a
//! network and its weight-truncated copy), this crate proves or
//! falsifies `|f'(x) - f(x)| < epsilon` for every `x` in a box-shaped
//! input region. The analysis runs the two networks in lock-step,
//! tracking a symbolic bound on the difference of every neuron pair
//! through sound interval arithmetic, and refines inconclusive regions
//! by bisecting the input with the largest gradient-difference smear.
//!
//! Module map:
//! - [`interval`]: outward-rounded interval arithmetic
//! - [`symbolic`]: linear bound expressions and their concretization
//! - [`network`]: network model, NNet parsing, truncation, composition
//! - [`forward`]: the differential forward pass and ReLU transformer
//! - [`refine`]: gradient intervals, smear scoring, bisection
//! - [`verifier`]: the branch-and-bound driver
//! - [`oracle`]: independent ground-truth generators for testing

pub mod forward;
pub mod interval;
pub mod network;
pub mod oracle;
pub mod refine;
pub mod symbolic;
pub mod verifier;

pub use forward::{forward_pass, relu_transform, single_net_forward, ForwardResult, Mask, MaskMatrix};
pub use interval::{set_fast_math, ConcreteInterval};
pub use network::{compose_difference, parse_nnet, to_nnet_string, Network, NetworkPair};
pub use refine::{bisect, gradient, gradient_diff, smear_choose, GradientVector, SplitDecision};
pub use symbolic::{InputRegion, LinearExpr, SymbolicInterval};
pub use verifier::{
    check_region, sample_counterexample, verify, Mode, Stats, Status, VerificationQuery, Verdict,
    Witness,
};

/// Errors produced by parsing, construction, and verification.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("nnet parse error at line {line}: {msg}")]
    NnetParse { line: usize, msg: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weight overflows binary16 at layer {layer}, entry [{row},{col}]: {value}")]
    F16Overflow {
        layer: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("not splittable: {0}")]
    NotSplittable(String),
    #[error("empty feasible set for coupled delta domain")]
    EmptyFeasibleSet,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
