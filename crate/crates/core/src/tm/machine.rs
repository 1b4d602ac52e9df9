use std::collections::BTreeMap;
use std::fmt;

use super::{check_window, TmError, ValidatedSpec};

/// Machine configuration: state, sparse tape and head position.
///
/// Blank cells are never stored, so two configurations with the same visible
/// tape compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub state: usize,
    tape: BTreeMap<i64, usize>,
    pub head: i64,
}

impl Configuration {
    /// `C_0`: input written from cell 0, head on cell 0, start state.
    pub fn initial(spec: &ValidatedSpec, input: &[usize]) -> Self {
        let mut config = Configuration {
            state: spec.start(),
            tape: BTreeMap::new(),
            head: 0,
        };
        for (i, &symbol) in input.iter().enumerate() {
            config.write(spec, i as i64, symbol);
        }
        config
    }

    pub fn new(state: usize, head: i64) -> Self {
        Configuration {
            state,
            tape: BTreeMap::new(),
            head,
        }
    }

    pub fn read(&self, spec: &ValidatedSpec, cell: i64) -> usize {
        self.tape.get(&cell).copied().unwrap_or(spec.blank())
    }

    pub fn write(&mut self, spec: &ValidatedSpec, cell: i64, symbol: usize) {
        if symbol == spec.blank() {
            self.tape.remove(&cell);
        } else {
            self.tape.insert(cell, symbol);
        }
    }

    /// Non-blank cells in index order.
    pub fn cells(&self) -> impl Iterator<Item = (i64, usize)> + '_ {
        self.tape.iter().map(|(&c, &s)| (c, s))
    }

    /// Tape contents between the leftmost and rightmost non-blank cells.
    pub fn tape_word(&self, spec: &ValidatedSpec) -> Vec<usize> {
        match (self.tape.keys().next(), self.tape.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo..=hi).map(|c| self.read(spec, c)).collect(),
            _ => Vec::new(),
        }
    }

    /// Count of differing cells, plus one each for a state or head mismatch.
    pub fn hamming(&self, other: &Configuration) -> usize {
        let mut differing = 0;
        for (cell, symbol) in &self.tape {
            if other.tape.get(cell) != Some(symbol) {
                differing += 1;
            }
        }
        for cell in other.tape.keys() {
            if !self.tape.contains_key(cell) {
                differing += 1;
            }
        }
        differing + usize::from(self.state != other.state) + usize::from(self.head != other.head)
    }

    pub fn display<'a>(&'a self, spec: &'a ValidatedSpec) -> impl fmt::Display + 'a {
        ConfigDisplay { config: self, spec }
    }
}

struct ConfigDisplay<'a> {
    config: &'a Configuration,
    spec: &'a ValidatedSpec,
}

impl fmt::Display for ConfigDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word: Vec<&str> = self
            .config
            .tape_word(self.spec)
            .into_iter()
            .map(|s| self.spec.symbol_name(s))
            .collect();
        write!(
            f,
            "{} head={} tape=[{}]",
            self.spec.state_name(self.config.state),
            self.config.head,
            word.join(" ")
        )
    }
}

/// The state plus the `k` cells centred on the head.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WindowView {
    pub state: usize,
    pub symbols: Vec<usize>,
}

impl WindowView {
    pub fn k(&self) -> usize {
        self.symbols.len()
    }

    /// Index of the head cell within `symbols`.
    pub fn head_offset(&self) -> usize {
        self.symbols.len() / 2
    }

    pub fn head_symbol(&self) -> usize {
        self.symbols[self.head_offset()]
    }

    pub fn display<'a>(&'a self, spec: &'a ValidatedSpec) -> String {
        let cells: Vec<&str> = self.symbols.iter().map(|&s| spec.symbol_name(s)).collect();
        format!("{} [{}]", spec.state_name(self.state), cells.join(" "))
    }
}

/// Apply δ once.
pub fn step(spec: &ValidatedSpec, config: &Configuration) -> Result<Configuration, TmError> {
    let read = config.read(spec, config.head);
    let t = spec
        .transition(config.state, read)
        .ok_or(TmError::SteppedAcceptingState)?;
    let mut next = config.clone();
    next.write(spec, config.head, t.write);
    next.state = t.next;
    next.head += t.dir.offset();
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTrace {
    /// `C_0 ..= C_t`.
    pub configs: Vec<Configuration>,
    pub halted: bool,
}

impl RunTrace {
    pub fn last(&self) -> &Configuration {
        self.configs.last().expect("trace always holds C_0")
    }

    /// Number of transitions taken.
    pub fn steps(&self) -> usize {
        self.configs.len() - 1
    }

    /// Configuration at step `s`, or the halting configuration past the end.
    pub fn at(&self, s: usize) -> &Configuration {
        self.configs.get(s).unwrap_or_else(|| self.last())
    }
}

/// Run from `C_0` until the accept state or `max_steps` transitions.
pub fn run(spec: &ValidatedSpec, input: &[usize], max_steps: usize) -> RunTrace {
    let mut configs = vec![Configuration::initial(spec, input)];
    let mut halted = configs[0].state == spec.accept();
    while !halted && configs.len() <= max_steps {
        let next = step(spec, configs.last().unwrap())
            .expect("non-accepting states have total transitions");
        halted = next.state == spec.accept();
        configs.push(next);
    }
    RunTrace { configs, halted }
}

/// Read the `k` cells centred on the head.
pub fn window(spec: &ValidatedSpec, config: &Configuration, k: usize) -> Result<WindowView, TmError> {
    check_window(k)?;
    let left = config.head - (k / 2) as i64;
    Ok(WindowView {
        state: config.state,
        symbols: (0..k as i64).map(|i| config.read(spec, left + i)).collect(),
    })
}
