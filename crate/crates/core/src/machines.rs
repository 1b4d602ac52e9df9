//! Machines shipped with the crate, each with a default input.

use crate::tm::{parse_spec, ValidatedSpec};

#[derive(Debug, Clone, Copy)]
pub struct Builtin {
    pub name: &'static str,
    pub source: &'static str,
    /// Input word for demos and tests.
    pub input: &'static str,
    pub halts: bool,
}

impl Builtin {
    pub fn spec(&self) -> ValidatedSpec {
        parse_spec(self.source).expect("bundled machines are valid")
    }

    pub fn input_symbols(&self) -> Vec<usize> {
        self.spec()
            .parse_input(self.input)
            .expect("bundled inputs use the machine's alphabet")
    }
}

pub const BUILTINS: [Builtin; 5] = [
    Builtin {
        name: "inc",
        source: include_str!("../machines/inc.tm"),
        input: "111111111111111111111111111111111111111111111111111111111111",
        halts: true,
    },
    Builtin {
        name: "flip",
        source: include_str!("../machines/flip.tm"),
        input: "011010011101000110110010101101",
        halts: true,
    },
    Builtin {
        name: "copy",
        source: include_str!("../machines/copy.tm"),
        input: "10110100111010001101100101011010011100101101001011",
        halts: true,
    },
    Builtin {
        name: "shift",
        source: include_str!("../machines/shift.tm"),
        input: "abbabaabbbabaababbaabababbbaabaabbabaabbbabaab",
        halts: true,
    },
    Builtin {
        name: "loop",
        source: include_str!("../machines/loop.tm"),
        input: "",
        halts: false,
    },
];

pub fn builtin(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tm::run;

    #[test]
    fn all_parse_and_behave() {
        for b in &BUILTINS {
            let spec = b.spec();
            let trace = run(&spec, &b.input_symbols(), 100);
            assert_eq!(trace.halted, b.halts, "{}", b.name);
            if b.halts {
                assert!((30..100).contains(&trace.steps()), "{} took {}", b.name, trace.steps());
            }
        }
    }

    #[test]
    fn lookup() {
        assert!(builtin("flip").is_some());
        assert!(builtin("nope").is_none());
    }
}
