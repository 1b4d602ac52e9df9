//! Sample-complexity and generalization bounds, the round optimizer, a
//! Monte-Carlo Rademacher estimator and the cross-entropy Lipschitz audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("sample size must be at least 1")]
    NonPositiveSample,
    #[error("confidence delta must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("target error must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("model Lipschitz constant is 1; the sequence bounds divide by (L - 1)^4")]
    DegenerateLipschitz,
    #[error("rounds must satisfy 1 <= R <= T (R={rounds}, T={total})")]
    InvalidRounds { rounds: usize, total: usize },
    #[error("function class or sample is empty")]
    EmptyClass,
    #[error("function table row {0} has the wrong length")]
    RaggedTable(usize),
    #[error("at least one Monte-Carlo trial is required")]
    NoTrials,
    #[error("probability vector {index} is not a clipped simplex point: {reason}")]
    InvalidSimplexPoint { index: usize, reason: String },
}

fn positive(name: &'static str, value: f64) -> Result<f64, BoundsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BoundsError::InvalidParameter { name, value })
    }
}

fn check_delta(delta: f64) -> Result<f64, BoundsError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(delta)
    } else {
        Err(BoundsError::InvalidConfidence(delta))
    }
}

fn check_eps(eps: f64) -> Result<f64, BoundsError> {
    if eps.is_finite() && eps > 0.0 {
        Ok(eps)
    } else {
        Err(BoundsError::InvalidTolerance(eps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCapacity {
    /// Product of layer spectral norms.
    pub b_spec: f64,
    /// Activation Lipschitz constant.
    pub l_phi: f64,
    /// Depth, at least 1.
    pub l_max: u32,
    /// Input norm bound.
    pub r_x: f64,
    /// Window size.
    pub k: u64,
    /// Lipschitz constant of the loss.
    pub loss_lipschitz: f64,
    /// Upper bound on the loss.
    pub loss_bound: f64,
}

impl ModelCapacity {
    /// Every constant 1.
    pub fn unit() -> Self {
        ModelCapacity {
            b_spec: 1.0,
            l_phi: 1.0,
            l_max: 1,
            r_x: 1.0,
            k: 1,
            loss_lipschitz: 1.0,
            loss_bound: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        positive("b_spec", self.b_spec)?;
        positive("l_phi", self.l_phi)?;
        positive("r_x", self.r_x)?;
        positive("loss_lipschitz", self.loss_lipschitz)?;
        positive("loss_bound", self.loss_bound)?;
        if self.l_max == 0 {
            return Err(BoundsError::InvalidParameter { name: "l_max", value: 0.0 });
        }
        if self.k == 0 {
            return Err(BoundsError::InvalidParameter { name: "k", value: 0.0 });
        }
        Ok(())
    }

    /// `B_spec * L_phi^(l_max - 1)`.
    pub fn l_model(&self) -> f64 {
        self.b_spec * self.l_phi.powi(self.l_max as i32 - 1)
    }
}

/// `L_model * R_x * sqrt(k) / sqrt(m)`.
pub fn rademacher_bound(cap: &ModelCapacity, m: u64) -> Result<f64, BoundsError> {
    cap.validate()?;
    if m == 0 {
        return Err(BoundsError::NonPositiveSample);
    }
    Ok(cap.l_model() * cap.r_x * (cap.k as f64).sqrt() / (m as f64).sqrt())
}

/// `empirical_loss + 2 * Rademacher + C * sqrt(ln(1/delta) / (2m))`.
pub fn generalization_bound(
    cap: &ModelCapacity,
    empirical_loss: f64,
    m: u64,
    delta: f64,
) -> Result<f64, BoundsError> {
    check_delta(delta)?;
    let rad = rademacher_bound(cap, m)?;
    let conf = cap.loss_bound * ((1.0 / delta).ln() / (2.0 * m as f64)).sqrt();
    Ok(empirical_loss + 2.0 * rad + conf)
}

/// The three-term bracket shared by all sample-complexity results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermBreakdown {
    pub capacity: f64,
    pub mixed: f64,
    pub confidence: f64,
}

impl TermBreakdown {
    pub fn total(&self) -> f64 {
        self.capacity + self.mixed + self.confidence
    }

    fn scaled(&self, factor: f64) -> Self {
        TermBreakdown {
            capacity: self.capacity * factor,
            mixed: self.mixed * factor,
            confidence: self.confidence * factor,
        }
    }
}

/// Capacity `4 L^2 Lm^2 R_x^2 k`, mixed `4 L Lm R_x C sqrt(k) sqrt(ln(1/delta)/2)`,
/// confidence `C^2 ln(1/delta) / 2`, where `Lm` is the model Lipschitz constant.
pub fn bracket(cap: &ModelCapacity, delta: f64) -> Result<TermBreakdown, BoundsError> {
    cap.validate()?;
    check_delta(delta)?;
    let l = cap.loss_lipschitz;
    let lm = cap.l_model();
    let k = cap.k as f64;
    let c = cap.loss_bound;
    let log_inv = (1.0 / delta).ln();
    Ok(TermBreakdown {
        capacity: 4.0 * l * l * lm * lm * cap.r_x * cap.r_x * k,
        mixed: 4.0 * l * lm * cap.r_x * c * k.sqrt() * (log_inv / 2.0).sqrt(),
        confidence: c * c * log_inv / 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleComplexity {
    pub m: f64,
    /// Factor in front of `bracket / eps^2` (1 for the next-token bound).
    pub prefactor: f64,
    /// Bracket terms, each already multiplied by `prefactor / eps^2`.
    pub terms: TermBreakdown,
}

fn assemble(prefactor: f64, bracket: TermBreakdown, eps: f64) -> SampleComplexity {
    let scale = prefactor / (eps * eps);
    SampleComplexity {
        m: prefactor * bracket.total() / (eps * eps),
        prefactor,
        terms: bracket.scaled(scale),
    }
}

pub fn sample_complexity_next_token(
    cap: &ModelCapacity,
    eps: f64,
    delta: f64,
) -> Result<SampleComplexity, BoundsError> {
    check_eps(eps)?;
    Ok(assemble(1.0, bracket(cap, delta)?, eps))
}

fn lipschitz_gap(cap: &ModelCapacity) -> Result<f64, BoundsError> {
    let gap = cap.l_model() - 1.0;
    if gap == 0.0 {
        Err(BoundsError::DegenerateLipschitz)
    } else {
        Ok(gap)
    }
}

/// `Lm^(2T) / (Lm - 1)^4`.
pub fn sequence_prefactor(cap: &ModelCapacity, total: usize) -> Result<f64, BoundsError> {
    cap.validate()?;
    let gap = lipschitz_gap(cap)?;
    Ok(cap.l_model().powf(2.0 * total as f64) / gap.powi(4))
}

/// `Lm^(2T/R + 2) R^2 / (Lm - 1)^4`.
pub fn multiround_prefactor(cap: &ModelCapacity, total: usize, rounds: usize) -> Result<f64, BoundsError> {
    cap.validate()?;
    if rounds == 0 || rounds > total {
        return Err(BoundsError::InvalidRounds { rounds, total });
    }
    let gap = lipschitz_gap(cap)?;
    let r = rounds as f64;
    Ok(cap.l_model().powf(2.0 * total as f64 / r + 2.0) * r * r / gap.powi(4))
}

pub fn sample_complexity_sequence(
    cap: &ModelCapacity,
    eps: f64,
    delta: f64,
    total: usize,
) -> Result<SampleComplexity, BoundsError> {
    check_eps(eps)?;
    let pre = sequence_prefactor(cap, total)?;
    Ok(assemble(pre, bracket(cap, delta)?, eps))
}

pub fn sample_complexity_multiround(
    cap: &ModelCapacity,
    eps: f64,
    delta: f64,
    total: usize,
    rounds: usize,
) -> Result<SampleComplexity, BoundsError> {
    check_eps(eps)?;
    let pre = multiround_prefactor(cap, total, rounds)?;
    Ok(assemble(pre, bracket(cap, delta)?, eps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOptimum {
    pub best_rounds: usize,
    pub best: SampleComplexity,
    /// `m` for every `R` in `1..=T`.
    pub sweep: Vec<f64>,
}

/// Exhaustive argmin over `R` in `1..=T`; ties go to the smaller `R`.
pub fn optimal_rounds(cap: &ModelCapacity, eps: f64, delta: f64, total: usize) -> Result<RoundOptimum, BoundsError> {
    if total == 0 {
        return Err(BoundsError::InvalidRounds { rounds: 0, total });
    }
    let all = (1..=total)
        .map(|r| sample_complexity_multiround(cap, eps, delta, total, r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = 0;
    for (i, sc) in all.iter().enumerate() {
        if sc.m < all[best].m {
            best = i;
        }
    }
    Ok(RoundOptimum {
        best_rounds: best + 1,
        best: all[best],
        sweep: all.iter().map(|s| s.m).collect(),
    })
}

/// Smallest one-hot per-sequence width, `|Q| + k |Gamma|`.
pub fn one_hot_dimension(n_states: usize, n_symbols: usize, k: usize) -> usize {
    n_states + k * n_symbols
}

/// Binary-packed width, `log2 |Q| + k log2 |Gamma|` (reported, never compiled).
pub fn binary_dimension(n_states: usize, n_symbols: usize, k: usize) -> f64 {
    (n_states as f64).log2() + k as f64 * (n_symbols as f64).log2()
}

/// `exp(c3 * L * d * k / eps)`; the constant `c3` is left to the caller.
pub fn quantization_levels_for_precision(c3: f64, l: f64, d: usize, k: usize, eps: f64) -> Result<f64, BoundsError> {
    check_eps(eps)?;
    Ok((c3 * l * d as f64 * k as f64 / eps).exp())
}

/// `C * S / eps`: levels keeping `S` steps of per-step error `C/Q` within `eps`.
pub fn quantization_levels_for_steps(c: f64, steps: usize, eps: f64) -> Result<f64, BoundsError> {
    check_eps(eps)?;
    Ok(c * steps as f64 / eps)
}

/// `values[i][f]` is the value of function `f` on sample point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTable {
    n: usize,
    classes: usize,
    data: Vec<f64>,
}

impl FunctionTable {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, BoundsError> {
        let classes = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || classes == 0 {
            return Err(BoundsError::EmptyClass);
        }
        let mut data = Vec::with_capacity(rows.len() * classes);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != classes {
                return Err(BoundsError::RaggedTable(i));
            }
            data.extend_from_slice(r);
        }
        Ok(FunctionTable {
            n: rows.len(),
            classes,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `sup_f (1/n) sum_i sigma_i f(x_i)`.
    pub fn correlation_sup(&self, sigma: &[f64]) -> f64 {
        let mut acc = vec![0.0; self.classes];
        for (row, s) in self.data.chunks(self.classes).zip(sigma) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += s * v;
            }
        }
        acc.into_iter().fold(f64::NEG_INFINITY, f64::max) / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Monte-Carlo empirical Rademacher complexity. Trial `t` draws its signs
/// from ChaCha8 seeded with `seed` on stream `t`, so the result does not
/// depend on thread scheduling.
pub fn empirical_rademacher(table: &FunctionTable, trials: u64, seed: u64) -> Result<Estimate, BoundsError> {
    if trials == 0 {
        return Err(BoundsError::NoTrials);
    }
    let draws: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let sigma: Vec<f64> = (0..table.n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            table.correlation_sup(&sigma)
        })
        .collect();
    let n = trials as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let stderr = if trials > 1 {
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(Estimate { mean, stderr, trials })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzPoint {
    pub p_true: f64,
    /// `|d loss / d p_true| = 1 / p_true`.
    pub grad_norm: f64,
    /// `-ln p_true`.
    pub loss: f64,
    /// Central finite difference of the loss in `p_true`.
    pub fd_grad: f64,
    pub within_bounds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub eps_clip: f64,
    /// `1 / eps_clip`.
    pub lipschitz_bound: f64,
    /// `-ln eps_clip`.
    pub loss_bound: f64,
    pub points: Vec<LipschitzPoint>,
}

impl LipschitzReport {
    pub fn all_within_bounds(&self) -> bool {
        self.points.iter().all(|p| p.within_bounds)
    }

    /// Largest relative gap between finite-difference and analytic gradients.
    pub fn max_fd_relative_error(&self) -> f64 {
        self.points
            .iter()
            .map(|p| ((-p.fd_grad) - p.grad_norm).abs() / p.grad_norm)
            .fold(0.0, f64::max)
    }
}

/// Finite-difference step used by the audit.
pub const FD_STEP: f64 = 1e-6;

/// Cross-entropy at the true class `k*` on clipped simplex points: gradient
/// norm `1/p`, loss `-ln p`, checked against `1/eps_clip` and `-ln eps_clip`.
pub fn ce_lipschitz_audit(eps_clip: f64, points: &[(Vec<f64>, usize)]) -> Result<LipschitzReport, BoundsError> {
    if !(eps_clip > 0.0 && eps_clip < 1.0) {
        return Err(BoundsError::InvalidParameter {
            name: "eps_clip",
            value: eps_clip,
        });
    }
    let bad = |index: usize, reason: String| BoundsError::InvalidSimplexPoint { index, reason };
    let lipschitz_bound = 1.0 / eps_clip;
    let loss_bound = -eps_clip.ln();
    let mut out = Vec::with_capacity(points.len());
    for (index, (p, target)) in points.iter().enumerate() {
        if *target >= p.len() {
            return Err(bad(index, format!("target class {target} out of range")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(bad(index, format!("entries sum to {sum}")));
        }
        if let Some(v) = p.iter().find(|v| v.is_nan() || **v < eps_clip) {
            return Err(bad(index, format!("entry {v} below the clip")));
        }
        let pt = p[*target];
        let h = FD_STEP.min(pt / 2.0);
        let fd_grad = (-(pt + h).ln() + (pt - h).ln()) / (2.0 * h);
        let grad_norm = 1.0 / pt;
        let loss = -pt.ln();
        out.push(LipschitzPoint {
            p_true: pt,
            grad_norm,
            loss,
            fd_grad,
            within_bounds: grad_norm <= lipschitz_bound && loss <= loss_bound,
        });
    }
    Ok(LipschitzReport {
        eps_clip,
        lipschitz_bound,
        loss_bound,
        points: out,
    })
}
