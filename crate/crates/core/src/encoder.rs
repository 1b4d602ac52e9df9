//! One-hot block encoding of a head-centred window and its argmax inverse.
//!
//! Each token is `d = n_states + n_symbols + k` wide: a state block, a symbol
//! block and a one-hot positional block over the `k` window offsets. Token 0
//! carries the state and reuses the centre offset's positional code; tokens
//! `1..=k` carry the window cells left to right.

use thiserror::Error;

use crate::linalg::Matrix;
use crate::tm::{check_window, TmError, ValidatedSpec, WindowView};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("symbol ordinal {0} is outside the alphabet")]
    UnknownSymbol(usize),
    #[error("state ordinal {0} is outside the state set")]
    UnknownState(usize),
    #[error("window has {found} cells, layout expects {expected}")]
    WindowLength { expected: usize, found: usize },
    #[error("sequence is {found_rows}x{found_cols}, layout expects {rows}x{cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("token {token} has tied or non-finite maxima in its content block")]
    AmbiguousArgmax { token: usize },
    #[error(transparent)]
    Window(#[from] TmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EmbeddingLayout {
    pub n_states: usize,
    pub n_symbols: usize,
    pub k: usize,
    /// Positional block width; equal to `k`.
    pub d_p: usize,
    pub d: usize,
}

impl EmbeddingLayout {
    pub fn new(n_states: usize, n_symbols: usize, k: usize) -> Result<Self, TmError> {
        check_window(k)?;
        Ok(EmbeddingLayout {
            n_states,
            n_symbols,
            k,
            d_p: k,
            d: n_states + n_symbols + k,
        })
    }

    pub fn state_block(&self) -> std::ops::Range<usize> {
        0..self.n_states
    }

    pub fn symbol_block(&self) -> std::ops::Range<usize> {
        self.n_states..self.n_states + self.n_symbols
    }

    pub fn position_block(&self) -> std::ops::Range<usize> {
        self.n_states + self.n_symbols..self.d
    }

    pub fn state_index(&self, state: usize) -> usize {
        state
    }

    pub fn symbol_index(&self, symbol: usize) -> usize {
        self.n_states + symbol
    }

    /// Coordinate of the positional code for window offset `offset` (0-based, left to right).
    pub fn position_index(&self, offset: usize) -> usize {
        self.n_states + self.n_symbols + offset
    }

    /// Window offset of the head cell.
    pub fn center(&self) -> usize {
        self.k / 2
    }

    /// Sequence index of the token holding the head cell.
    pub fn head_token(&self) -> usize {
        self.k / 2 + 1
    }

    pub fn n_tokens(&self) -> usize {
        self.k + 1
    }

    /// Window offset whose positional code token `token` carries.
    pub fn token_offset(&self, token: usize) -> usize {
        if token == 0 {
            self.center()
        } else {
            token - 1
        }
    }
}

pub fn layout(spec: &ValidatedSpec, k: usize) -> Result<EmbeddingLayout, TmError> {
    EmbeddingLayout::new(spec.n_states(), spec.n_symbols(), k)
}

/// `(k+1) x d` token matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub tokens: Matrix,
}

pub fn encode(window: &WindowView, layout: &EmbeddingLayout) -> Result<EncodedSequence, EncodeError> {
    if window.symbols.len() != layout.k {
        return Err(EncodeError::WindowLength {
            expected: layout.k,
            found: window.symbols.len(),
        });
    }
    if window.state >= layout.n_states {
        return Err(EncodeError::UnknownState(window.state));
    }
    let mut tokens = Matrix::zeros(layout.n_tokens(), layout.d);
    tokens[(0, layout.state_index(window.state))] = 1.0;
    tokens[(0, layout.position_index(layout.center()))] = 1.0;
    for (offset, &symbol) in window.symbols.iter().enumerate() {
        if symbol >= layout.n_symbols {
            return Err(EncodeError::UnknownSymbol(symbol));
        }
        tokens[(offset + 1, layout.symbol_index(symbol))] = 1.0;
        tokens[(offset + 1, layout.position_index(offset))] = 1.0;
    }
    Ok(EncodedSequence { tokens })
}

fn argmax(values: &[f64], token: usize) -> Result<usize, EncodeError> {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(EncodeError::AmbiguousArgmax { token });
        }
        if *v > values[best] {
            best = i;
        }
    }
    let tied = values
        .iter()
        .enumerate()
        .any(|(i, v)| i != best && *v == values[best]);
    if tied {
        Err(EncodeError::AmbiguousArgmax { token })
    } else {
        Ok(best)
    }
}

/// Per-block argmax: the state from token 0, one symbol from each other token.
pub fn decode(tokens: &Matrix, layout: &EmbeddingLayout) -> Result<WindowView, EncodeError> {
    if tokens.shape() != (layout.n_tokens(), layout.d) {
        return Err(EncodeError::DimensionMismatch {
            rows: layout.n_tokens(),
            cols: layout.d,
            found_rows: tokens.rows(),
            found_cols: tokens.cols(),
        });
    }
    let state = argmax(&tokens.row(0)[layout.state_block()], 0)?;
    let symbols = (1..layout.n_tokens())
        .map(|t| argmax(&tokens.row(t)[layout.symbol_block()], t))
        .collect::<Result<_, _>>()?;
    Ok(WindowView { state, symbols })
}
