//! Compile deterministic Turing machines into the weights of a single
//! Transformer layer, run them under quantization, and evaluate the
//! accompanying sample-complexity and error-propagation bounds.
//!
//! ```
//! use tmformer::{compiler, machines, sim::QuantizationConfig};
//!
//! let inc = machines::builtin("inc").unwrap();
//! let spec = inc.spec();
//! let program = compiler::compile(&spec, 3, QuantizationConfig::unquantized()).unwrap();
//! let trace = compiler::simulate(&program, &spec.parse_input("111").unwrap(), 10).unwrap();
//! assert!(trace.halted);
//! assert_eq!(trace.first_disagreement(), None);
//! ```

pub mod bounds;
pub mod cli;
pub mod compiler;
pub mod encoder;
pub mod linalg;
pub mod machines;
pub mod propagation;
pub mod rounds;
pub mod sim;
pub mod tm;

use thiserror::Error;

/// Any error the library can produce, labelled with its originating module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tm-core: {0}")]
    Tm(#[from] tm::TmError),
    #[error("tm-core: {0}")]
    Parse(#[from] tm::ParseError),
    #[error("encoder: {0}")]
    Encode(#[from] encoder::EncodeError),
    #[error("transformer-sim: {0}")]
    Sim(#[from] sim::SimError),
    #[error("tm-compiler: {0}")]
    Compile(#[from] compiler::CompileError),
    #[error("multi-round: {0}")]
    Rounds(#[from] rounds::RoundsError),
    #[error("bounds: {0}")]
    Bounds(#[from] bounds::BoundsError),
    #[error("propagation: {0}")]
    Propagation(#[from] propagation::PropagationError),
    #[error("cli: {0}")]
    Cli(String),
    #[error("cli: {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}
