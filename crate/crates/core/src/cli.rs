//! `tmformer` command-line front end.
//!
//! Artifacts are written under the output directory: `--out-dir` if given,
//! else `$TMFORMER_OUT_DIR`, else the working directory. Human-readable
//! summaries go to stdout. Exit status is 0 on success, 1 on a domain
//! error and 2 on a usage error.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{self, FunctionTable, ModelCapacity};
use crate::compiler::{self, CompiledProgram, DEFAULT_RANGE, DEFAULT_SWEEP};
use crate::encoder;
use crate::linalg::fmt_f64;
use crate::machines;
use crate::propagation::{self, ErrorLedger, InterventionPlan};
use crate::rounds;
use crate::sim::QuantizationConfig;
use crate::tm::{parse_spec, ValidatedSpec, WindowView};
use crate::Error;

/// Seed used by every Monte-Carlo command unless `--seed` is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Environment variable naming the output directory.
pub const OUT_DIR_ENV: &str = "TMFORMER_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "tmformer",
    version,
    about = "Compile Turing machines into Transformer weights, simulate them, and evaluate bounds"
)]
pub struct Cli {
    /// Directory for output files; overrides $TMFORMER_OUT_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct MachineArgs {
    /// Machine file, or `builtin:NAME` (inc, flip, copy, shift, loop).
    #[arg(long, value_name = "PATH")]
    pub tm: String,
    /// Input word; defaults to the builtin's demo input, or empty.
    #[arg(long)]
    pub input: Option<String>,
    /// Window size (odd).
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct QuantArgs {
    /// Quantization levels Q; unquantized when omitted.
    #[arg(long)]
    pub q: Option<u64>,
    /// Dynamic range C.
    #[arg(long, default_value_t = DEFAULT_RANGE)]
    pub c: f64,
}

impl QuantArgs {
    fn config(&self) -> Result<QuantizationConfig, Error> {
        match self.q {
            Some(q) => Ok(QuantizationConfig::new(q, self.c)?),
            None => Ok(QuantizationConfig::unquantized()),
        }
    }
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    /// Starting point for the capacity constants; `unit` sets all to 1.
    #[arg(long, default_value = "unit", value_parser = ["unit"])]
    pub preset: String,
    #[arg(long)]
    pub b_spec: Option<f64>,
    #[arg(long)]
    pub l_phi: Option<f64>,
    #[arg(long)]
    pub l_max: Option<u32>,
    #[arg(long)]
    pub r_x: Option<f64>,
    /// Window size k.
    #[arg(long)]
    pub k: Option<u64>,
    /// Loss Lipschitz constant L.
    #[arg(long)]
    pub loss_lipschitz: Option<f64>,
    /// Loss bound C.
    #[arg(long)]
    pub loss_bound: Option<f64>,
    /// Target error.
    #[arg(long)]
    pub eps: f64,
    /// Confidence delta in (0, 1).
    #[arg(long)]
    pub delta: f64,
}

impl CapacityArgs {
    fn capacity(&self) -> ModelCapacity {
        let unit = ModelCapacity::unit();
        ModelCapacity {
            b_spec: self.b_spec.unwrap_or(unit.b_spec),
            l_phi: self.l_phi.unwrap_or(unit.l_phi),
            l_max: self.l_max.unwrap_or(unit.l_max),
            r_x: self.r_x.unwrap_or(unit.r_x),
            k: self.k.unwrap_or(unit.k),
            loss_lipschitz: self.loss_lipschitz.unwrap_or(unit.loss_lipschitz),
            loss_bound: self.loss_bound.unwrap_or(unit.loss_bound),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a machine and write its weights (sections mask, W1, b1, W2, b2).
    Compile {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        quant: QuantArgs,
        #[arg(short, long, default_value = "weights.txt")]
        output: PathBuf,
    },
    /// Simulate and write a per-step trace.
    ///
    /// CSV columns: step, agreement, distance, saturations, deviation, error_bound.
    Simulate {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        quant: QuantArgs,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(short, long, default_value = "trace.csv")]
        output: PathBuf,
    },
    /// Compare the unquantized simulation with the interpreter step by step.
    /// Exits 1 if any step disagrees.
    Verify {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// First disagreement step for each quantization level.
    ///
    /// CSV columns: Q, first_disagreement_step, censored, pre_saturation_steps,
    /// max_deviation, within_bound. Runs without a disagreement report steps+1
    /// with censored=1.
    SweepQuant {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Comma-separated level counts.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP)]
        q: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_RANGE)]
        c: f64,
        #[arg(short, long, default_value = "sweep.csv")]
        output: PathBuf,
    },
    /// Multi-round run with per-round budgets and the induction audit.
    ///
    /// CSV columns: round, distance_coord, distance_hamming, budget, within_budget.
    Rounds {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        quant: QuantArgs,
        /// Total steps T.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Steps per round s.
        #[arg(long)]
        s: usize,
        /// Total error budget.
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(short, long, default_value = "rounds.csv")]
        output: PathBuf,
    },
    /// Sample-complexity bounds.
    ///
    /// CSV columns: R, m, capacity_term, mixed_term, confidence_term. The
    /// next-token bound is the row with R=0; rows R>=1 are multi-round bounds.
    Bounds {
        #[command(flatten)]
        cap: CapacityArgs,
        /// Sequence length T; enables the sequence and multi-round bounds.
        #[arg(long)]
        t: Option<usize>,
        /// Comma-separated round counts (default 1..=T).
        #[arg(long, value_delimiter = ',')]
        r: Vec<usize>,
        /// Also write the table as CSV.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Round count minimizing the multi-round sample complexity.
    ///
    /// CSV columns: R, m.
    OptimalRounds {
        #[command(flatten)]
        cap: CapacityArgs,
        #[arg(long)]
        t: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Error-propagation bounds from a ledger file, or the uniform closed form.
    ///
    /// Ledger rows: `r gamma lambda empirical slack` (gamma of round 1 is
    /// ignored, write `-`). Plan file lines: `hints: 2 3` and
    /// `gamma_prime: 0.25`. Ledger CSV columns: i, Lambda, kappa,
    /// Lambda_modified, aggregate. Uniform CSV columns: R, bound.
    Propagate {
        /// Ledger file, one row per round.
        #[arg(long, conflicts_with_all = ["gamma", "lambda", "eta"])]
        ledger: Option<PathBuf>,
        /// Intervention plan file.
        #[arg(long, requires = "ledger")]
        plan: Option<PathBuf>,
        /// Uniform propagation factor in [0, 1).
        #[arg(long, required_unless_present = "ledger")]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Comma-separated round counts for the uniform series.
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 100, 1000, 10000])]
        r: Vec<usize>,
        #[arg(short, long, default_value = "propagate.csv")]
        output: PathBuf,
    },
    /// Monte-Carlo Rademacher estimate for a random norm-bounded linear class.
    ///
    /// CSV columns: n, classes, trials, seed, estimate, stderr, closed_form.
    Rademacher {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        /// Number of weight vectors in the class.
        #[arg(long, default_value_t = 64)]
        classes: usize,
        /// Weight norm bound.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Encode one window; CSV has one row per token.
    Encode {
        #[arg(long, value_name = "PATH")]
        tm: String,
        #[arg(long)]
        state: String,
        /// Window cells, left to right; the length sets k.
        #[arg(long)]
        window: String,
        #[arg(short, long, default_value = "encoding.csv")]
        output: PathBuf,
    },
}

/// Parse `args` (including the program name) and run.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn load_machine(tm: &str) -> Result<ValidatedSpec, Error> {
    if let Some(name) = tm.strip_prefix("builtin:") {
        return machines::builtin(name)
            .map(|b| b.spec())
            .ok_or_else(|| Error::Cli(format!("no builtin machine named `{name}`")));
    }
    let text = std::fs::read_to_string(tm).map_err(|source| Error::Io {
        path: tm.to_string(),
        source,
    })?;
    Ok(parse_spec(&text)?)
}

fn machine_input(args: &MachineArgs, spec: &ValidatedSpec) -> Result<Vec<usize>, Error> {
    let word = match (&args.input, args.tm.strip_prefix("builtin:")) {
        (Some(w), _) => w.as_str(),
        (None, Some(name)) => machines::builtin(name).map_or("", |b| b.input),
        (None, None) => "",
    };
    Ok(spec.parse_input(word)?)
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(cli: &Cli) -> Self {
        let dir = cli
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Output { dir }
    }

    fn write(&self, name: &Path, contents: &str) -> Result<PathBuf, Error> {
        let path = if name.is_absolute() {
            name.to_path_buf()
        } else {
            self.dir.join(name)
        };
        let io = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        std::fs::write(&path, contents).map_err(io)?;
        println!("wrote {}", path.display());
        Ok(path)
    }
}

fn compile_machine(machine: &MachineArgs, qc: QuantizationConfig) -> Result<(CompiledProgram, Vec<usize>), Error> {
    let spec = load_machine(&machine.tm)?;
    let input = machine_input(machine, &spec)?;
    let program = compiler::compile(&spec, machine.k, qc)?;
    Ok((program, input))
}

fn show_window(spec: &ValidatedSpec, w: &Option<WindowView>) -> String {
    w.as_ref().map_or("<undecodable>".into(), |w| w.display(spec))
}

pub fn dispatch(cli: &Cli) -> Result<(), Error> {
    let out = Output::new(cli);
    match &cli.command {
        Command::Compile {
            machine,
            quant,
            output,
        } => {
            let (program, _) = compile_machine(machine, quant.config()?)?;
            out.write(output, &program.dump_weights())?;
            println!(
                "d={} h={} n_trans={} self_weight={}",
                program.layout.d,
                program.hidden,
                program.n_trans,
                fmt_f64(program.self_weight)
            );
        }
        Command::Simulate {
            machine,
            quant,
            steps,
            output,
        } => {
            let (program, input) = compile_machine(machine, quant.config()?)?;
            let trace = compiler::simulate(&program, &input, *steps)?;
            out.write(output, &trace.to_csv())?;
            match trace.first_disagreement() {
                None => println!("{} steps, all agree, halted={}", trace.steps(), trace.halted),
                Some(s) => println!("{} steps, first disagreement at step {s}", trace.steps()),
            }
        }
        Command::Verify { machine, steps } => {
            let (program, input) = compile_machine(machine, QuantizationConfig::unquantized())?;
            let trace = compiler::simulate(&program, &input, *steps)?;
            let spec = &program.spec;
            println!("{:>5}  {:>5}  {:>24}  decoded", "step", "agree", "distance");
            for r in &trace.records {
                println!(
                    "{:>5}  {:>5}  {:>24}  {}",
                    r.step,
                    if r.agreement && r.config_agreement { "yes" } else { "NO" },
                    fmt_f64(r.distance),
                    show_window(spec, &r.decoded)
                );
            }
            let bad = trace
                .records
                .iter()
                .filter(|r| !(r.agreement && r.config_agreement))
                .count();
            if bad == 0 {
                println!("all {} steps agree with the reference interpreter", trace.steps());
            } else {
                println!("{bad} of {} steps disagree", trace.steps());
                return Err(Error::Cli(format!("{bad} steps disagree with the reference interpreter")));
            }
        }
        Command::SweepQuant {
            machine,
            steps,
            q,
            c,
            output,
        } => {
            let (program, input) = compile_machine(machine, QuantizationConfig::unquantized())?;
            let points = compiler::quantization_sweep(&program, &input, *steps, q, *c)?;
            let mut csv = String::from(
                "Q,first_disagreement_step,censored,pre_saturation_steps,max_deviation,within_bound\n",
            );
            for p in &points {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    p.levels,
                    p.first_disagreement.unwrap_or(steps + 1),
                    u8::from(p.first_disagreement.is_none()),
                    p.pre_saturation_steps,
                    fmt_f64(p.max_deviation),
                    u8::from(p.within_bound)
                );
            }
            out.write(output, &csv)?;
            let s_max: Vec<usize> = points
                .iter()
                .map(|p| p.first_disagreement.unwrap_or(steps + 1))
                .collect();
            let monotone = s_max.windows(2).all(|w| w[0] <= w[1]);
            println!("S_max by Q: {s_max:?} (monotone: {monotone})");
        }
        Command::Rounds {
            machine,
            quant,
            steps,
            s,
            eps,
            output,
        } => {
            let (program, input) = compile_machine(machine, quant.config()?)?;
            let plan = rounds::plan_rounds(*steps, *s, *eps)?;
            let trace = rounds::run_rounds(&program, &input, &plan)?;
            out.write(output, &trace.to_csv())?;
            let audit = rounds::induction_audit(&trace, &plan);
            println!(
                "R={} eps_r={} final distance={} bound={} audit={}",
                plan.rounds,
                fmt_f64(plan.eps_r),
                fmt_f64(audit.final_distance),
                fmt_f64(audit.final_bound),
                match audit.first_violation {
                    None if audit.passed => "pass".to_string(),
                    None => "fail".to_string(),
                    Some(r) => format!("fail at round {r}"),
                }
            );
            let equal = trace.final_output() == &trace.reference_final;
            println!("final configuration matches reference: {equal}");
        }
        Command::Bounds { cap, t, r, output } => {
            let capacity = cap.capacity();
            let next = bounds::sample_complexity_next_token(&capacity, cap.eps, cap.delta)?;
            let mut rows = vec![(0usize, next)];
            if let Some(total) = *t {
                let seq = bounds::sample_complexity_sequence(&capacity, cap.eps, cap.delta, total)?;
                println!("sequence bound (T={total}): m={}", fmt_f64(seq.m));
                let list: Vec<usize> = if r.is_empty() { (1..=total).collect() } else { r.clone() };
                for rounds in list {
                    rows.push((
                        rounds,
                        bounds::sample_complexity_multiround(&capacity, cap.eps, cap.delta, total, rounds)?,
                    ));
                }
            }
            println!("{:>6}  {:>24}  {:>24}  {:>24}  {:>24}", "R", "m", "capacity", "mixed", "confidence");
            let mut csv = String::from("R,m,capacity_term,mixed_term,confidence_term\n");
            for (rounds, sc) in &rows {
                println!(
                    "{:>6}  {:>24}  {:>24}  {:>24}  {:>24}",
                    rounds,
                    fmt_f64(sc.m),
                    fmt_f64(sc.terms.capacity),
                    fmt_f64(sc.terms.mixed),
                    fmt_f64(sc.terms.confidence)
                );
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    rounds,
                    fmt_f64(sc.m),
                    fmt_f64(sc.terms.capacity),
                    fmt_f64(sc.terms.mixed),
                    fmt_f64(sc.terms.confidence)
                );
            }
            if let Some(path) = output {
                out.write(path, &csv)?;
            }
        }
        Command::OptimalRounds { cap, t, output } => {
            let opt = bounds::optimal_rounds(&cap.capacity(), cap.eps, cap.delta, *t)?;
            println!("R* = {} with m = {}", opt.best_rounds, fmt_f64(opt.best.m));
            if let Some(path) = output {
                let mut csv = String::from("R,m\n");
                for (i, m) in opt.sweep.iter().enumerate() {
                    let _ = writeln!(csv, "{},{}", i + 1, fmt_f64(*m));
                }
                out.write(path, &csv)?;
            }
        }
        Command::Propagate {
            ledger,
            plan,
            gamma,
            lambda,
            eta,
            r,
            output,
        } => match ledger {
            Some(path) => {
                let ledger = parse_ledger(&read(path)?)?;
                let plan = match plan {
                    Some(p) => parse_plan(&read(p)?)?,
                    None => InterventionPlan {
                        hint_rounds: BTreeSet::new(),
                        gamma_prime: ledger.uniform_gamma().unwrap_or(0.0),
                    },
                };
                let cb = propagation::cumulative_bound(&ledger);
                println!("cumulative bound = {}", fmt_f64(cb.bound));
                println!("reordered sum    = {}", fmt_f64(cb.reordered));
                let (kappa, modified) = if plan.hint_rounds.is_empty() {
                    (vec![1.0; ledger.rounds()], cb.big_lambda.clone())
                } else {
                    let iv = propagation::intervention(&ledger, &plan)?;
                    println!("delta L          = {}", fmt_f64(iv.delta_l));
                    println!("modified bound   = {}", fmt_f64(iv.modified_bound));
                    (iv.kappa, propagation::modified_lambda_oracle(&ledger, &plan))
                };
                let mut csv = String::from("i,Lambda,kappa,Lambda_modified,aggregate\n");
                for i in 1..=ledger.rounds() {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{}",
                        i,
                        fmt_f64(cb.big_lambda[i - 1]),
                        fmt_f64(kappa[i - 1]),
                        fmt_f64(modified[i - 1]),
                        fmt_f64(propagation::aggregate_error(&ledger, i)?)
                    );
                }
                out.write(output, &csv)?;
            }
            None => {
                let gamma = gamma.expect("clap requires --gamma without --ledger");
                let scan = propagation::divergence_scan(gamma, *lambda, *eta, r)?;
                let mut csv = String::from("R,bound\n");
                for (rounds, b) in &scan.points {
                    let _ = writeln!(csv, "{},{}", rounds, fmt_f64(*b));
                }
                out.write(output, &csv)?;
                println!(
                    "slope at last R = {} (asymptote {}), unbounded: {}",
                    fmt_f64(scan.slope_estimate),
                    fmt_f64(scan.asymptotic_slope),
                    scan.unbounded
                );
            }
        },
        Command::Rademacher {
            n,
            dim,
            classes,
            radius,
            trials,
            seed,
            output,
        } => {
            let (table, r_x) = linear_class_table(*n, *dim, *classes, *radius, *seed)?;
            let est = bounds::empirical_rademacher(&table, *trials, *seed)?;
            let closed = linear_class_bound(*radius, r_x, *n)?;
            println!(
                "seed={seed} estimate={} stderr={} closed_form={}",
                fmt_f64(est.mean),
                fmt_f64(est.stderr),
                fmt_f64(closed)
            );
            if let Some(path) = output {
                let csv = format!(
                    "n,classes,trials,seed,estimate,stderr,closed_form\n{},{},{},{},{},{},{}\n",
                    n,
                    classes,
                    trials,
                    seed,
                    fmt_f64(est.mean),
                    fmt_f64(est.stderr),
                    fmt_f64(closed)
                );
                out.write(path, &csv)?;
            }
        }
        Command::Encode {
            tm,
            state,
            window,
            output,
        } => {
            let spec = load_machine(tm)?;
            let state = spec
                .state_ordinal(state)
                .ok_or_else(|| Error::Cli(format!("unknown state `{state}`")))?;
            let symbols = spec.parse_input(window)?;
            let layout = encoder::layout(&spec, symbols.len())?;
            let seq = encoder::encode(&WindowView { state, symbols }, &layout)?;
            let mut csv = String::from("token");
            for j in 0..layout.d {
                let _ = write!(csv, ",x{j}");
            }
            csv.push('\n');
            for (t, row) in seq.tokens.iter_rows().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
                let _ = writeln!(csv, "{t},{}", cells.join(","));
            }
            out.write(output, &csv)?;
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .collect()
}

fn number(line: usize, s: &str) -> Result<f64, Error> {
    s.parse()
        .map_err(|_| Error::Cli(format!("line {line}: `{s}` is not a number")))
}

/// Rows `r gamma lambda empirical slack`, in round order starting at 1.
pub fn parse_ledger(text: &str) -> Result<ErrorLedger, Error> {
    let (mut gamma, mut lambda, mut empirical, mut slack) = (vec![], vec![], vec![], vec![]);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let f = fields(raw);
        if f.is_empty() || f[0].starts_with('#') || f[0] == "r" {
            continue;
        }
        if f.len() != 5 {
            return Err(Error::Cli(format!("line {line}: expected 5 fields, found {}", f.len())));
        }
        let r: usize = f[0]
            .parse()
            .map_err(|_| Error::Cli(format!("line {line}: bad round `{}`", f[0])))?;
        if r != lambda.len() + 1 {
            return Err(Error::Cli(format!("line {line}: expected round {}, found {r}", lambda.len() + 1)));
        }
        if r >= 2 {
            gamma.push(number(line, f[1])?);
        }
        lambda.push(number(line, f[2])?);
        empirical.push(number(line, f[3])?);
        slack.push(number(line, f[4])?);
    }
    Ok(ErrorLedger::new(gamma, lambda, empirical, slack)?)
}

/// `hints: 2 3` and `gamma_prime: 0.25`.
pub fn parse_plan(text: &str) -> Result<InterventionPlan, Error> {
    let mut hints = BTreeSet::new();
    let mut gamma_prime = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let (key, rest) = raw
            .split_once(':')
            .ok_or_else(|| Error::Cli(format!("line {line}: expected `key: value`")))?;
        match key.trim() {
            "hints" => {
                for h in fields(rest) {
                    let h = h
                        .parse()
                        .map_err(|_| Error::Cli(format!("line {line}: bad round `{h}`")))?;
                    hints.insert(h);
                }
            }
            "gamma_prime" => gamma_prime = Some(number(line, rest.trim())?),
            other => return Err(Error::Cli(format!("line {line}: unknown key `{other}`"))),
        }
    }
    Ok(InterventionPlan {
        hint_rounds: hints,
        gamma_prime: gamma_prime.ok_or_else(|| Error::Cli("plan is missing `gamma_prime`".into()))?,
    })
}

/// Function table of `classes` weight vectors of norm `radius` on `n` random
/// inputs of norm at most 1 in `dim` dimensions, plus the largest input norm.
/// Inputs and weights come from `seed` on a stream disjoint from the
/// Monte-Carlo sign draws.
pub fn linear_class_table(
    n: usize,
    dim: usize,
    classes: usize,
    radius: f64,
    seed: u64,
) -> Result<(FunctionTable, f64), Error> {
    if dim == 0 {
        return Err(Error::Cli("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            break v.into_iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let weights: Vec<Vec<f64>> = (0..classes)
        .map(|_| unit(&mut rng).into_iter().map(|x| x * radius).collect())
        .collect();
    let mut r_x: f64 = 0.0;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let scale: f64 = rng.random_range(0.5..=1.0);
            let x: Vec<f64> = unit(&mut rng).into_iter().map(|v| v * scale).collect();
            r_x = r_x.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
            weights.iter().map(|w| crate::linalg::dot(w, &x)).collect()
        })
        .collect();
    Ok((FunctionTable::new(&rows)?, r_x))
}

/// The Rademacher bound with constants matched to a linear class:
/// `B_spec = radius`, depth 1, `R_x = r_x`, `k = 1`, `m = n`.
pub fn linear_class_bound(radius: f64, r_x: f64, n: usize) -> Result<f64, Error> {
    let cap = ModelCapacity {
        b_spec: radius,
        r_x,
        ..ModelCapacity::unit()
    };
    Ok(bounds::rademacher_bound(&cap, n as u64)?)
}
