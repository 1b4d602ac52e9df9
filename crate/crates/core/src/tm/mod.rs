//! Deterministic single-tape Turing machines.
//!
//! [`TmSpec`] is the plain description as read from a `.tm` file, with
//! identifiers kept as strings. [`ValidatedSpec`] adds ordinal tables and a
//! dense transition table; everything downstream (the interpreter, the
//! encoder, the weight compiler) works on ordinals.

mod format;
mod machine;

pub use format::{parse_spec, serialize_spec, ParseError};
pub use machine::{run, step, window, Configuration, RunTrace, WindowView};

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Head movement after a write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Left,
    Right,
}

impl Move {
    pub fn offset(self) -> i64 {
        match self {
            Move::Left => -1,
            Move::Right => 1,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Left => write!(f, "L"),
            Move::Right => write!(f, "R"),
        }
    }
}

/// One row of the transition function: `(state, read) -> (next, write, dir)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub state: String,
    pub read: String,
    pub next: String,
    pub write: String,
    pub dir: Move,
}

/// Machine description with string identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmSpec {
    pub states: Vec<String>,
    /// Tape alphabet, including the blank.
    pub alphabet: Vec<String>,
    pub blank: String,
    pub start: String,
    pub accept: String,
    /// Transition rows in file order.
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TmError {
    #[error("duplicate {kind} identifier `{name}`")]
    DuplicateIdentifier { kind: &'static str, name: String },
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("{kind} `{name}` is not declared")]
    Undeclared { kind: &'static str, name: String },
    #[error("missing transition for ({state}, {symbol})")]
    MissingTransition { state: String, symbol: String },
    #[error("transition row {row} names unknown symbol `{symbol}`")]
    UnknownSymbolInTransition { row: usize, symbol: String },
    #[error("transition row {row} names unknown state `{state}`")]
    UnknownStateInTransition { row: usize, state: String },
    #[error("transition row {row} repeats the key ({state}, {symbol})")]
    DuplicateTransition { row: usize, state: String, symbol: String },
    #[error("transition row {row} leaves the accepting state")]
    TransitionFromAccept { row: usize },
    #[error("cannot step a configuration in the accepting state")]
    SteppedAcceptingState,
    #[error("window size {0} must be odd and at least 1")]
    EvenWindow(usize),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("state ordinal {0} out of range")]
    StateOutOfRange(usize),
}

impl TmError {
    /// Transition row the error refers to, if any.
    pub fn row(&self) -> Option<usize> {
        match self {
            TmError::UnknownSymbolInTransition { row, .. }
            | TmError::UnknownStateInTransition { row, .. }
            | TmError::DuplicateTransition { row, .. }
            | TmError::TransitionFromAccept { row } => Some(*row),
            _ => None,
        }
    }
}

/// A transition with all identifiers resolved to ordinals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub next: usize,
    pub write: usize,
    pub dir: Move,
}

/// A spec that passed validation, with ordinal lookup tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSpec {
    spec: TmSpec,
    state_index: HashMap<String, usize>,
    symbol_index: HashMap<String, usize>,
    blank: usize,
    start: usize,
    accept: usize,
    /// Row-major `[state * n_symbols + symbol]`; `None` only for the accept state.
    table: Vec<Option<Transition>>,
}

fn valid_identifier(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('#')
        && name != "->"
        && !name.ends_with(':')
        && !name.chars().any(char::is_whitespace)
}

fn index_of(
    kind: &'static str,
    names: &[String],
) -> Result<HashMap<String, usize>, TmError> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if !valid_identifier(name) {
            return Err(TmError::InvalidIdentifier(name.clone()));
        }
        if index.insert(name.clone(), i).is_some() {
            return Err(TmError::DuplicateIdentifier {
                kind,
                name: name.clone(),
            });
        }
    }
    Ok(index)
}

impl ValidatedSpec {
    pub fn new(spec: TmSpec) -> Result<Self, TmError> {
        let state_index = index_of("state", &spec.states)?;
        let symbol_index = index_of("symbol", &spec.alphabet)?;
        let lookup = |index: &HashMap<String, usize>, kind: &'static str, name: &str| {
            index.get(name).copied().ok_or_else(|| TmError::Undeclared {
                kind,
                name: name.to_string(),
            })
        };
        let blank = lookup(&symbol_index, "blank symbol", &spec.blank)?;
        let start = lookup(&state_index, "start state", &spec.start)?;
        let accept = lookup(&state_index, "accept state", &spec.accept)?;

        let n_symbols = spec.alphabet.len();
        let mut table = vec![None; spec.states.len() * n_symbols];
        for (row, rule) in spec.rules.iter().enumerate() {
            let state_of = |name: &str| {
                state_index
                    .get(name)
                    .copied()
                    .ok_or_else(|| TmError::UnknownStateInTransition {
                        row,
                        state: name.to_string(),
                    })
            };
            let symbol_of = |name: &str| {
                symbol_index
                    .get(name)
                    .copied()
                    .ok_or_else(|| TmError::UnknownSymbolInTransition {
                        row,
                        symbol: name.to_string(),
                    })
            };
            let from = state_of(&rule.state)?;
            let read = symbol_of(&rule.read)?;
            let next = state_of(&rule.next)?;
            let write = symbol_of(&rule.write)?;
            if from == accept {
                return Err(TmError::TransitionFromAccept { row });
            }
            let slot = &mut table[from * n_symbols + read];
            if slot.is_some() {
                return Err(TmError::DuplicateTransition {
                    row,
                    state: rule.state.clone(),
                    symbol: rule.read.clone(),
                });
            }
            *slot = Some(Transition {
                next,
                write,
                dir: rule.dir,
            });
        }
        for (state, name) in spec.states.iter().enumerate() {
            if state == accept {
                continue;
            }
            for (symbol, sym_name) in spec.alphabet.iter().enumerate() {
                if table[state * n_symbols + symbol].is_none() {
                    return Err(TmError::MissingTransition {
                        state: name.clone(),
                        symbol: sym_name.clone(),
                    });
                }
            }
        }
        Ok(ValidatedSpec {
            spec,
            state_index,
            symbol_index,
            blank,
            start,
            accept,
            table,
        })
    }

    pub fn spec(&self) -> &TmSpec {
        &self.spec
    }

    pub fn n_states(&self) -> usize {
        self.spec.states.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.spec.alphabet.len()
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn accept(&self) -> usize {
        self.accept
    }

    pub fn state_name(&self, state: usize) -> &str {
        &self.spec.states[state]
    }

    pub fn symbol_name(&self, symbol: usize) -> &str {
        &self.spec.alphabet[symbol]
    }

    pub fn state_ordinal(&self, name: &str) -> Option<usize> {
        self.state_index.get(name).copied()
    }

    pub fn symbol_ordinal(&self, name: &str) -> Option<usize> {
        self.symbol_index.get(name).copied()
    }

    /// δ(state, symbol); `None` for the accepting state.
    pub fn transition(&self, state: usize, symbol: usize) -> Option<Transition> {
        self.table
            .get(state * self.n_symbols() + symbol)
            .copied()
            .flatten()
    }

    /// All transitions as `((state, read), transition)` in ordinal order.
    pub fn transitions(&self) -> impl Iterator<Item = ((usize, usize), Transition)> + '_ {
        let n_symbols = self.n_symbols();
        self.table.iter().enumerate().filter_map(move |(i, t)| {
            t.map(|t| ((i / n_symbols, i % n_symbols), t))
        })
    }

    pub fn n_transitions(&self) -> usize {
        self.table.iter().filter(|t| t.is_some()).count()
    }

    /// Resolve an input word. Single-character symbols may be run together
    /// (`"1101"`); otherwise separate symbols by whitespace or commas.
    pub fn parse_input(&self, text: &str) -> Result<Vec<usize>, TmError> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Vec::new());
        }
        let tokens: Vec<String> = if text.contains(|c: char| c.is_whitespace() || c == ',') {
            text.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect()
        } else {
            text.chars().map(String::from).collect()
        };
        tokens
            .iter()
            .map(|t| {
                self.symbol_ordinal(t)
                    .ok_or_else(|| TmError::UnknownSymbol(t.clone()))
            })
            .collect()
    }
}

pub(crate) fn check_window(k: usize) -> Result<(), TmError> {
    if k == 0 || k.is_multiple_of(2) {
        Err(TmError::EvenWindow(k))
    } else {
        Ok(())
    }
}
