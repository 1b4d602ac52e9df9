//! Multi-round execution: a `T`-step run split into `R = ceil(T/s)` rounds,
//! where only the decoded configuration crosses a round boundary.

use std::fmt::Write as _;

use thiserror::Error;

use crate::compiler::{simulate_from, CompileError, CompiledProgram};
use crate::encoder::encode;
use crate::linalg::fmt_f64;
use crate::tm::{run, window, Configuration};

/// Slack for floating-point comparisons against the budget.
pub const AUDIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoundsError {
    #[error("error budget must be positive and finite, got {0}")]
    InvalidBudget(f64),
    #[error("total steps and steps per round must be at least 1 (T={total}, s={per_round})")]
    InvalidPlan { total: usize, per_round: usize },
    #[error(transparent)]
    Simulation(#[from] CompileError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundPlan {
    pub total_steps: usize,
    pub steps_per_round: usize,
    pub rounds: usize,
    pub eps: f64,
    /// `eps / rounds`.
    pub eps_r: f64,
}

impl RoundPlan {
    /// Steps executed in round `r` (1-based); the last round may be short.
    pub fn steps_in_round(&self, r: usize) -> usize {
        let done = (r - 1) * self.steps_per_round;
        self.steps_per_round.min(self.total_steps - done)
    }

    /// Cumulative budget `r * eps / R`.
    pub fn budget(&self, r: usize) -> f64 {
        r as f64 * self.eps_r
    }
}

pub fn plan_rounds(total_steps: usize, steps_per_round: usize, eps: f64) -> Result<RoundPlan, RoundsError> {
    if total_steps == 0 || steps_per_round == 0 {
        return Err(RoundsError::InvalidPlan {
            total: total_steps,
            per_round: steps_per_round,
        });
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(RoundsError::InvalidBudget(eps));
    }
    let rounds = total_steps.div_ceil(steps_per_round);
    Ok(RoundPlan {
        total_steps,
        steps_per_round,
        rounds,
        eps,
        eps_r: eps / rounds as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Decoded configuration handed to the next round.
    pub output: Configuration,
    /// Reference configuration after `round * s` steps (or at halting).
    pub reference: Configuration,
    /// Max-norm between the encodings of the two windows.
    pub distance_coord: f64,
    /// Differing tape cells plus state and head mismatches.
    pub distance_hamming: usize,
    pub budget: f64,
    pub within_budget: bool,
    /// A step in this round could not be decoded.
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    /// Record 0 is the initial configuration.
    pub records: Vec<RoundRecord>,
    /// The reference interpreter accepted within `T` steps.
    pub reference_halted: bool,
    pub reference_final: Configuration,
}

impl RoundTrace {
    pub fn final_output(&self) -> &Configuration {
        &self.records.last().expect("round 0 always present").output
    }

    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.distance_coord).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,distance_coord,distance_hamming,budget,within_budget\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.round,
                fmt_f64(r.distance_coord),
                r.distance_hamming,
                fmt_f64(r.budget),
                u8::from(r.within_budget)
            );
        }
        out
    }
}

/// Execute `plan` round by round, each round in a fresh simulator seeded
/// only with the previous round's decoded configuration.
pub fn run_rounds(program: &CompiledProgram, input: &[usize], plan: &RoundPlan) -> Result<RoundTrace, RoundsError> {
    let spec = &program.spec;
    let k = program.layout.k;
    let reference = run(spec, input, plan.total_steps);
    let measure = |y: &Configuration, c: &Configuration| -> Result<(f64, usize), CompileError> {
        let a = encode(&window(spec, y, k).map_err(CompileError::from)?, &program.layout)?;
        let b = encode(&window(spec, c, k).map_err(CompileError::from)?, &program.layout)?;
        Ok((a.tokens.max_abs_diff(&b.tokens).unwrap_or(f64::INFINITY), y.hamming(c)))
    };

    let start = reference.configs[0].clone();
    let (d0, h0) = measure(&start, &start)?;
    let mut records = vec![RoundRecord {
        round: 0,
        output: start.clone(),
        reference: start.clone(),
        distance_coord: d0,
        distance_hamming: h0,
        budget: 0.0,
        within_budget: d0 <= AUDIT_TOLERANCE,
        diverged: false,
    }];

    let mut y = start;
    for r in 1..=plan.rounds {
        let offset = (r - 1) * plan.steps_per_round;
        let trace = simulate_from(program, y.clone(), &reference, offset, plan.steps_in_round(r))?;
        let diverged = trace.diverged_at.is_some();
        if let Some(c) = trace.final_config() {
            y = c.clone();
        }
        let c = reference.at(r * plan.steps_per_round).clone();
        let (distance_coord, distance_hamming) = measure(&y, &c)?;
        let budget = plan.budget(r);
        records.push(RoundRecord {
            round: r,
            output: y.clone(),
            reference: c,
            distance_coord,
            distance_hamming,
            budget,
            within_budget: !diverged && distance_coord <= budget + AUDIT_TOLERANCE,
            diverged,
        });
    }
    Ok(RoundTrace {
        records,
        reference_halted: reference.halted,
        reference_final: reference.last().clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// `d_r - d_{r-1}` for rounds `1..=R`.
    pub increments: Vec<f64>,
    /// First round whose increment exceeds `eps_r`.
    pub first_violation: Option<usize>,
    pub final_distance: f64,
    /// Telescoped bound `d_0 + R * eps_r`.
    pub final_bound: f64,
    pub passed: bool,
}

/// Check `d_r <= d_{r-1} + eps_r` round by round.
pub fn induction_audit(trace: &RoundTrace, plan: &RoundPlan) -> AuditReport {
    audit_distances(&trace.distances(), plan)
}

/// [`induction_audit`] over a bare distance series `d_0, d_1, ...`.
pub fn audit_distances(distances: &[f64], plan: &RoundPlan) -> AuditReport {
    let increments: Vec<f64> = distances.windows(2).map(|w| w[1] - w[0]).collect();
    let first_violation = increments
        .iter()
        .position(|inc| inc.is_nan() || *inc > plan.eps_r + AUDIT_TOLERANCE)
        .map(|i| i + 1);
    let d0 = distances.first().copied().unwrap_or(0.0);
    let final_distance = distances.last().copied().unwrap_or(0.0);
    let final_bound = d0 + plan.eps_r * increments.len() as f64;
    AuditReport {
        passed: first_violation.is_none() && d0 == 0.0,
        increments,
        first_violation,
        final_distance,
        final_bound,
    }
}
