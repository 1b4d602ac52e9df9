//! Multi-round error propagation: per-round aggregate errors, cumulative
//! bounds through the influence coefficients `Lambda_i`, the uniform closed
//! form and its divergence, and hint interventions that lower `gamma` on
//! selected rounds.
//!
//! Rounds are 1-based in the public API. `gamma_r` is defined for
//! `r = 2..=R`; products over an empty range are 1.

use std::collections::BTreeSet;

use thiserror::Error;

/// Tolerance for the simplex constraint on `lambda`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("round {round} is outside 1..={rounds}")]
    IndexOutOfRange { round: usize, rounds: usize },
    #[error("ledger needs at least one round")]
    NoRounds,
    #[error("ledger field `{field}` has {found} entries, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("ledger field `{field}` entry {index} is negative or not finite: {value}")]
    InvalidEntry {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("lambda sums to {0}, expected 1")]
    LambdaNotNormalised(f64),
    #[error("gamma must lie in [0, 1), got {0}")]
    GammaOutOfRange(f64),
    #[error("`{name}` must be nonnegative and finite, got {value}")]
    InvalidScalar { name: &'static str, value: f64 },
    #[error("the closed form needs R >= 1")]
    InvalidRounds,
    #[error("intervention needs gamma > 0")]
    ZeroGamma,
    #[error("intervention needs a uniform gamma across rounds")]
    NonUniformGamma,
    #[error("hint round {0} is outside 2..=R")]
    HintOutOfRange(usize),
    #[error("gamma' = {gamma_prime} must lie in [0, gamma = {gamma}]")]
    InvalidGammaPrime { gamma_prime: f64, gamma: f64 },
}

fn nonneg(field: &'static str, values: &[f64]) -> Result<(), PropagationError> {
    for (index, &value) in values.iter().enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(PropagationError::InvalidEntry { field, index, value });
        }
    }
    Ok(())
}

fn scalar(name: &'static str, value: f64) -> Result<f64, PropagationError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(PropagationError::InvalidScalar { name, value })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorLedger {
    gamma: Vec<f64>,
    lambda: Vec<f64>,
    empirical: Vec<f64>,
    slack: Vec<f64>,
}

impl ErrorLedger {
    /// `gamma` holds `gamma_2..=gamma_R`; the other three hold one entry per round.
    pub fn new(
        gamma: Vec<f64>,
        lambda: Vec<f64>,
        empirical: Vec<f64>,
        slack: Vec<f64>,
    ) -> Result<Self, PropagationError> {
        let rounds = lambda.len();
        if rounds == 0 {
            return Err(PropagationError::NoRounds);
        }
        let expect = |field, expected: usize, v: &[f64]| {
            if v.len() == expected {
                Ok(())
            } else {
                Err(PropagationError::LengthMismatch {
                    field,
                    expected,
                    found: v.len(),
                })
            }
        };
        expect("gamma", rounds - 1, &gamma)?;
        expect("empirical", rounds, &empirical)?;
        expect("slack", rounds, &slack)?;
        nonneg("gamma", &gamma)?;
        nonneg("lambda", &lambda)?;
        nonneg("empirical", &empirical)?;
        nonneg("slack", &slack)?;
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(PropagationError::LambdaNotNormalised(sum));
        }
        Ok(ErrorLedger {
            gamma,
            lambda,
            empirical,
            slack,
        })
    }

    /// Constant `gamma`, `lambda_r = 1/R`, and `empirical + slack = eta` per round
    /// (all of `eta` carried by `empirical`).
    pub fn uniform(rounds: usize, gamma: f64, eta: f64) -> Result<Self, PropagationError> {
        if rounds == 0 {
            return Err(PropagationError::NoRounds);
        }
        Self::new(
            vec![gamma; rounds - 1],
            vec![1.0 / rounds as f64; rounds],
            vec![eta; rounds],
            vec![0.0; rounds],
        )
    }

    pub fn rounds(&self) -> usize {
        self.lambda.len()
    }

    /// `gamma_r` for `r` in `2..=R`.
    pub fn gamma(&self, r: usize) -> f64 {
        self.gamma[r - 2]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gamma
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn empirical(&self) -> &[f64] {
        &self.empirical
    }

    pub fn slack(&self) -> &[f64] {
        &self.slack
    }

    /// `empirical_i + slack_i`, 1-based.
    pub fn source(&self, i: usize) -> f64 {
        self.empirical[i - 1] + self.slack[i - 1]
    }

    /// `prod_{j=i+1}^{r} gamma_j`.
    pub fn chain(&self, i: usize, r: usize) -> f64 {
        (i + 1..=r).map(|j| self.gamma(j)).product()
    }

    fn check_round(&self, r: usize) -> Result<(), PropagationError> {
        if (1..=self.rounds()).contains(&r) {
            Ok(())
        } else {
            Err(PropagationError::IndexOutOfRange {
                round: r,
                rounds: self.rounds(),
            })
        }
    }

    /// Common `gamma` when every round uses the same factor.
    pub fn uniform_gamma(&self) -> Option<f64> {
        let first = *self.gamma.first()?;
        self.gamma.iter().all(|g| *g == first).then_some(first)
    }
}

/// Aggregate error at round `r` by the recursion `L_r = source_r + gamma_r L_{r-1}`.
pub fn aggregate_error(ledger: &ErrorLedger, r: usize) -> Result<f64, PropagationError> {
    ledger.check_round(r)?;
    let mut acc = ledger.source(1);
    for j in 2..=r {
        acc = ledger.source(j) + ledger.gamma(j) * acc;
    }
    Ok(acc)
}

/// Aggregate error at round `r` as the explicit product-sum.
pub fn aggregate_error_direct(ledger: &ErrorLedger, r: usize) -> Result<f64, PropagationError> {
    ledger.check_round(r)?;
    Ok((1..=r).map(|i| ledger.chain(i, r) * ledger.source(i)).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeBound {
    /// `sum_i Lambda_i source_i`.
    pub bound: f64,
    /// `Lambda_1..=Lambda_R`.
    pub big_lambda: Vec<f64>,
    /// `g[r-1][i-1] = lambda_r prod_{j=i+1}^{r} gamma_j` for `i <= r`, else 0.
    pub g: Vec<Vec<f64>>,
    /// `sum_r lambda_r aggregate_error(r)`: the same double sum in the other order.
    pub reordered: f64,
}

impl CumulativeBound {
    /// Relative gap between the two summation orders.
    pub fn reorder_gap(&self) -> f64 {
        (self.bound - self.reordered).abs() / self.bound.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn cumulative_bound(ledger: &ErrorLedger) -> CumulativeBound {
    let rounds = ledger.rounds();
    let mut g = vec![vec![0.0; rounds]; rounds];
    for r in 1..=rounds {
        for i in 1..=r {
            g[r - 1][i - 1] = ledger.lambda[r - 1] * ledger.chain(i, r);
        }
    }
    let big_lambda: Vec<f64> = (1..=rounds)
        .map(|i| (i..=rounds).map(|r| g[r - 1][i - 1]).sum())
        .collect();
    let bound = (1..=rounds).map(|i| big_lambda[i - 1] * ledger.source(i)).sum();
    let reordered = (1..=rounds)
        .map(|r| ledger.lambda[r - 1] * aggregate_error(ledger, r).expect("round in range"))
        .sum();
    CumulativeBound {
        bound,
        big_lambda,
        g,
        reordered,
    }
}

fn check_gamma(gamma: f64) -> Result<f64, PropagationError> {
    if (0.0..1.0).contains(&gamma) {
        Ok(gamma)
    } else {
        Err(PropagationError::GammaOutOfRange(gamma))
    }
}

/// `(eta lambda / (1 - gamma)) (R - gamma (1 - gamma^R) / (1 - gamma))`, i.e.
/// `(eta lambda / (1 - gamma)) sum_{i=1}^{R} (1 - gamma^(R-i+1))`.
pub fn uniform_closed_form(gamma: f64, lambda: f64, eta: f64, rounds: usize) -> Result<f64, PropagationError> {
    check_gamma(gamma)?;
    scalar("lambda", lambda)?;
    scalar("eta", eta)?;
    if rounds == 0 {
        return Err(PropagationError::InvalidRounds);
    }
    let r = rounds as f64;
    let geometric = gamma * (1.0 - gamma.powf(r)) / (1.0 - gamma);
    Ok(eta * lambda / (1.0 - gamma) * (r - geometric))
}

/// Term-by-term `(eta lambda / (1 - gamma)) sum_i (1 - gamma^(R-i+1))`.
pub fn uniform_direct_sum(gamma: f64, lambda: f64, eta: f64, rounds: usize) -> Result<f64, PropagationError> {
    check_gamma(gamma)?;
    scalar("lambda", lambda)?;
    scalar("eta", eta)?;
    if rounds == 0 {
        return Err(PropagationError::InvalidRounds);
    }
    let sum: f64 = (1..=rounds)
        .map(|i| 1.0 - gamma.powi((rounds - i + 1) as i32))
        .sum();
    Ok(eta * lambda / (1.0 - gamma) * sum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceScan {
    /// `(R, bound)` in the order given.
    pub points: Vec<(usize, f64)>,
    /// `bound(R) - bound(R - 1)` at the last `R`.
    pub slope_estimate: f64,
    /// `eta lambda / (1 - gamma)`.
    pub asymptotic_slope: f64,
    /// The series strictly increases and the asymptotic slope is positive.
    pub unbounded: bool,
}

pub fn divergence_scan(gamma: f64, lambda: f64, eta: f64, rounds: &[usize]) -> Result<DivergenceScan, PropagationError> {
    let points = rounds
        .iter()
        .map(|&r| Ok((r, uniform_closed_form(gamma, lambda, eta, r)?)))
        .collect::<Result<Vec<_>, PropagationError>>()?;
    let asymptotic_slope = eta * lambda / (1.0 - gamma);
    let slope_estimate = match points.last() {
        Some(&(r, b)) if r >= 2 => b - uniform_closed_form(gamma, lambda, eta, r - 1)?,
        Some(&(_, b)) => b,
        None => 0.0,
    };
    let increasing = points.windows(2).all(|w| w[1].1 > w[0].1 && w[1].0 > w[0].0);
    Ok(DivergenceScan {
        points,
        slope_estimate,
        asymptotic_slope,
        unbounded: increasing && asymptotic_slope > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionPlan {
    pub hint_rounds: BTreeSet<usize>,
    pub gamma_prime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intervention {
    /// `mu[i-1][r-1] = lambda_r gamma^(r-i) / Lambda_i` for `r >= i`, else 0.
    pub mu: Vec<Vec<f64>>,
    pub kappa: Vec<f64>,
    pub big_lambda: Vec<f64>,
    pub delta_l: f64,
    pub original_bound: f64,
    pub modified_bound: f64,
}

fn check_plan(ledger: &ErrorLedger, plan: &InterventionPlan, gamma: f64) -> Result<(), PropagationError> {
    if let Some(&h) = plan.hint_rounds.iter().find(|&&h| h < 2 || h > ledger.rounds()) {
        return Err(PropagationError::HintOutOfRange(h));
    }
    if !(plan.gamma_prime >= 0.0 && plan.gamma_prime <= gamma) {
        return Err(PropagationError::InvalidGammaPrime {
            gamma_prime: plan.gamma_prime,
            gamma,
        });
    }
    Ok(())
}

/// Shrinkage factors `kappa_i` and the bound reduction `Delta L` from
/// replacing `gamma` by `gamma'` on the hint rounds.
///
/// A round with `Lambda_i = 0` gets `mu_i` concentrated on `r = i`, so
/// `kappa_i = 1`.
pub fn intervention(ledger: &ErrorLedger, plan: &InterventionPlan) -> Result<Intervention, PropagationError> {
    let rounds = ledger.rounds();
    let gamma = if rounds == 1 {
        plan.gamma_prime
    } else {
        ledger.uniform_gamma().ok_or(PropagationError::NonUniformGamma)?
    };
    if rounds > 1 && gamma == 0.0 {
        return Err(PropagationError::ZeroGamma);
    }
    check_plan(ledger, plan, gamma)?;
    let ratio = if rounds == 1 { 1.0 } else { plan.gamma_prime / gamma };

    let cb = cumulative_bound(ledger);
    let mut mu = vec![vec![0.0; rounds]; rounds];
    let mut kappa = vec![1.0; rounds];
    // 1 - kappa_i accumulated as sum_r mu_i(r) (1 - ratio^h): every term is
    // nonnegative, so Delta L cannot go negative through rounding.
    let mut shrink = vec![0.0; rounds];
    for i in 1..=rounds {
        let big = cb.big_lambda[i - 1];
        if big == 0.0 {
            mu[i - 1][i - 1] = 1.0;
            continue;
        }
        let (mut k, mut one_minus) = (0.0, 0.0);
        for r in i..=rounds {
            let m = ledger.lambda[r - 1] * gamma.powi((r - i) as i32) / big;
            let hits = if r > i { plan.hint_rounds.range(i + 1..=r).count() } else { 0 };
            let factor = ratio.powi(hits as i32);
            mu[i - 1][r - 1] = m;
            k += m * factor;
            one_minus += m * (1.0 - factor);
        }
        kappa[i - 1] = k;
        shrink[i - 1] = one_minus;
    }
    let delta_l = (1..=rounds)
        .map(|i| shrink[i - 1] * cb.big_lambda[i - 1] * ledger.source(i))
        .sum();
    Ok(Intervention {
        mu,
        kappa,
        big_lambda: cb.big_lambda,
        delta_l,
        original_bound: cb.bound,
        modified_bound: cb.bound - delta_l,
    })
}

/// `Lambda_i` recomputed from scratch with `gamma_j = gamma'` for `j` in `H`.
pub fn modified_lambda_oracle(ledger: &ErrorLedger, plan: &InterventionPlan) -> Vec<f64> {
    let rounds = ledger.rounds();
    let gamma_at = |j: usize| {
        if plan.hint_rounds.contains(&j) {
            plan.gamma_prime
        } else {
            ledger.gamma(j)
        }
    };
    (1..=rounds)
        .map(|i| {
            (i..=rounds)
                .map(|r| {
                    let mut product = 1.0;
                    for j in i + 1..=r {
                        product *= gamma_at(j);
                    }
                    ledger.lambda[r - 1] * product
                })
                .sum()
        })
        .collect()
}
