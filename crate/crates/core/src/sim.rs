//! Single-layer Transformer forward pass under write-quantization.
//!
//! Every intermediate value the layer produces (scores, softmax weights,
//! attention outputs, residual sums, FFN pre-activations, activations, FFN
//! outputs, and the canonicalized output) passes through [`Quantizer::write`].
//! The number of such writes is the `N_ops` of the per-layer error bound
//! `N_ops * C / (Q - 1)`.

use thiserror::Error;

use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("mask row {0} has no unmasked entry")]
    EmptyMaskRow(usize),
    #[error("quantization needs at least 2 levels, got {0}")]
    TooFewLevels(u64),
    #[error("dynamic range must be positive and finite, got {0}")]
    InvalidRange(f64),
}

fn check(context: &'static str, expected: usize, found: usize) -> Result<(), SimError> {
    if expected == found {
        Ok(())
    } else {
        Err(SimError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

/// `levels = None` disables quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationConfig {
    levels: Option<u64>,
    dynamic_range: f64,
}

impl QuantizationConfig {
    pub fn unquantized() -> Self {
        QuantizationConfig {
            levels: None,
            dynamic_range: f64::INFINITY,
        }
    }

    pub fn new(levels: u64, dynamic_range: f64) -> Result<Self, SimError> {
        if levels < 2 {
            return Err(SimError::TooFewLevels(levels));
        }
        if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
            return Err(SimError::InvalidRange(dynamic_range));
        }
        Ok(QuantizationConfig {
            levels: Some(levels),
            dynamic_range,
        })
    }

    pub fn levels(&self) -> Option<u64> {
        self.levels
    }

    pub fn dynamic_range(&self) -> f64 {
        self.dynamic_range
    }

    pub fn is_quantized(&self) -> bool {
        self.levels.is_some()
    }

    /// Grid spacing `2C / (Q - 1)`; 0 when unquantized.
    pub fn step(&self) -> f64 {
        match self.levels {
            Some(q) => 2.0 * self.dynamic_range / (q - 1) as f64,
            None => 0.0,
        }
    }

    /// Worst-case error of one in-range write, `C / (Q - 1)`.
    pub fn max_error(&self) -> f64 {
        self.step() / 2.0
    }
}

/// Nearest of the `Q` uniformly spaced values on `[-C, C]`; ties round away
/// from `-C`. Out-of-range inputs clamp first.
pub fn quantize(x: f64, qc: &QuantizationConfig) -> f64 {
    let Some(q) = qc.levels else { return x };
    let c = qc.dynamic_range;
    let top = (q - 1) as f64;
    let idx = ((x.clamp(-c, c) + c) / qc.step()).round().clamp(0.0, top);
    if idx == top {
        c
    } else {
        idx * qc.step() - c
    }
}

/// Applies [`quantize`] and counts writes and saturations.
#[derive(Debug, Clone)]
pub struct Quantizer {
    qc: QuantizationConfig,
    pub writes: u64,
    pub saturations: u64,
}

impl Quantizer {
    pub fn new(qc: QuantizationConfig) -> Self {
        Quantizer {
            qc,
            writes: 0,
            saturations: 0,
        }
    }

    pub fn config(&self) -> &QuantizationConfig {
        &self.qc
    }

    pub fn write(&mut self, x: f64) -> f64 {
        self.writes += 1;
        if x.abs() > self.qc.dynamic_range {
            self.saturations += 1;
        }
        quantize(x, &self.qc)
    }

    pub fn write_all(&mut self, xs: &mut [f64]) {
        for x in xs {
            *x = self.write(*x);
        }
    }

    /// `writes * C / (Q - 1)`.
    pub fn error_bound(&self) -> f64 {
        self.writes as f64 * self.qc.max_error()
    }
}

/// Attention projection.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Identity,
    Dense(Matrix),
}

impl Projection {
    fn apply(&self, x: &[f64], qz: &mut Quantizer) -> Result<Vec<f64>, SimError> {
        match self {
            Projection::Identity => Ok(x.to_vec()),
            Projection::Dense(w) => {
                check("projection", w.cols(), x.len())?;
                let mut y = w.mul_vec(x);
                qz.write_all(&mut y);
                Ok(y)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnWeights {
    /// `h x d`.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `d x h`.
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl FfnWeights {
    pub fn zeros(d: usize, h: usize) -> Self {
        FfnWeights {
            w1: Matrix::zeros(h, d),
            b1: vec![0.0; h],
            w2: Matrix::zeros(d, h),
            b2: vec![0.0; d],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }
}

/// Fixed post-layer cleanup for one token: rescale the state and symbol
/// blocks and overwrite the positional block with a one-hot code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenCleanup {
    pub state_scale: f64,
    pub symbol_scale: f64,
    pub position: usize,
}

/// Block geometry plus one [`TokenCleanup`] per token.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonicalizer {
    pub n_states: usize,
    pub n_symbols: usize,
    pub d_p: usize,
    pub tokens: Vec<TokenCleanup>,
}

impl Canonicalizer {
    fn apply(&self, h: &Matrix, qz: &mut Quantizer) -> Result<Matrix, SimError> {
        let d = self.n_states + self.n_symbols + self.d_p;
        check("canonicalizer width", d, h.cols())?;
        check("canonicalizer tokens", self.tokens.len(), h.rows())?;
        let mut out = Matrix::zeros(h.rows(), d);
        for (t, clean) in self.tokens.iter().enumerate() {
            let src = h.row(t);
            let dst = out.row_mut(t);
            for j in 0..self.n_states {
                dst[j] = clean.state_scale * src[j];
            }
            for j in self.n_states..self.n_states + self.n_symbols {
                dst[j] = clean.symbol_scale * src[j];
            }
            dst[self.n_states + self.n_symbols + clean.position] = 1.0;
            qz.write_all(dst);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// `(k+1) x (k+1)` over `{0, -inf}`; finite entries are added to the scores.
    pub mask: Matrix,
    pub w_q: Projection,
    pub w_k: Projection,
    pub w_v: Projection,
    pub ffn: FfnWeights,
    pub canonicalizer: Option<Canonicalizer>,
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `q.k / sqrt(d)`.
pub fn scaled_score(q: &[f64], k: &[f64]) -> f64 {
    dot(q, k) / (q.len() as f64).sqrt()
}

/// Softmax over the unmasked entries of each row; masked entries are left out
/// of the normalisation entirely, so they get weight exactly 0.
pub fn masked_attention(
    x: &Matrix,
    weights: &LayerWeights,
    qz: &mut Quantizer,
) -> Result<Matrix, SimError> {
    let n = x.rows();
    check("mask rows", n, weights.mask.rows())?;
    check("mask cols", n, weights.mask.cols())?;
    let project = |p: &Projection, qz: &mut Quantizer| -> Result<Vec<Vec<f64>>, SimError> {
        x.iter_rows().map(|r| p.apply(r, qz)).collect()
    };
    let q = project(&weights.w_q, qz)?;
    let k = project(&weights.w_k, qz)?;
    let v = project(&weights.w_v, qz)?;
    let width = v.first().map_or(x.cols(), Vec::len);

    let mut out = Matrix::zeros(n, width);
    for (i, qi) in q.iter().enumerate() {
        let open: Vec<usize> = (0..n)
            .filter(|&j| weights.mask[(i, j)] != f64::NEG_INFINITY)
            .collect();
        if open.is_empty() {
            return Err(SimError::EmptyMaskRow(i));
        }
        let scores: Vec<f64> = open
            .iter()
            .map(|&j| qz.write(scaled_score(qi, &k[j]) + weights.mask[(i, j)]))
            .collect();
        let probs: Vec<f64> = softmax(&scores).into_iter().map(|p| qz.write(p)).collect();
        let row = out.row_mut(i);
        for (&j, p) in open.iter().zip(&probs) {
            for (o, vj) in row.iter_mut().zip(&v[j]) {
                *o += p * vj;
            }
        }
        qz.write_all(row);
    }
    Ok(out)
}

/// `W2 relu(W1 u + b1) + b2`.
pub fn ffn_forward(u: &[f64], ffn: &FfnWeights, qz: &mut Quantizer) -> Result<Vec<f64>, SimError> {
    check("ffn input", ffn.w1.cols(), u.len())?;
    check("ffn b1", ffn.w1.rows(), ffn.b1.len())?;
    check("ffn w2 cols", ffn.w1.rows(), ffn.w2.cols())?;
    check("ffn b2", ffn.w2.rows(), ffn.b2.len())?;
    let pre: Vec<f64> = ffn
        .w1
        .mul_vec(u)
        .into_iter()
        .zip(&ffn.b1)
        .map(|(z, b)| qz.write(z + b))
        .collect();
    let act: Vec<f64> = pre.into_iter().map(|z| qz.write(z.max(0.0))).collect();
    Ok(ffn
        .w2
        .mul_vec(&act)
        .into_iter()
        .zip(&ffn.b2)
        .map(|(y, b)| qz.write(y + b))
        .collect())
}

/// FFN pre-activations `W1 u + b1`, unquantized; for inspection.
pub fn ffn_preactivations(u: &[f64], ffn: &FfnWeights) -> Vec<f64> {
    ffn.w1
        .mul_vec(u)
        .into_iter()
        .zip(&ffn.b1)
        .map(|(z, b)| z + b)
        .collect()
}

/// Attention with residual, per-token FFN with residual, then canonicalization.
pub fn layer_forward(
    x: &Matrix,
    weights: &LayerWeights,
    qz: &mut Quantizer,
) -> Result<Matrix, SimError> {
    let attn = masked_attention(x, weights, qz)?;
    check("attention width", x.cols(), attn.cols())?;
    let mut h = Matrix::zeros(x.rows(), x.cols());
    for t in 0..x.rows() {
        let u: Vec<f64> = x
            .row(t)
            .iter()
            .zip(attn.row(t))
            .map(|(a, b)| qz.write(a + b))
            .collect();
        let f = ffn_forward(&u, &weights.ffn, qz)?;
        for ((dst, ui), fi) in h.row_mut(t).iter_mut().zip(&u).zip(&f) {
            *dst = qz.write(ui + fi);
        }
    }
    match &weights.canonicalizer {
        Some(c) => c.apply(&h, qz),
        None => Ok(h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(levels: u64, c: f64) -> QuantizationConfig {
        QuantizationConfig::new(levels, c).unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.3, &q(5, 1.0)), 0.5);
        assert_eq!(quantize(0.3, &QuantizationConfig::unquantized()), 0.3);
        assert_eq!(quantize(-0.9, &q(2, 1.0)), -1.0);
        assert_eq!(quantize(7.0, &q(5, 1.0)), 1.0);
        assert_eq!(quantize(-7.0, &q(5, 1.0)), -1.0);
    }

    #[test]
    fn quantize_is_idempotent_and_bounded() {
        let qc = q(17, 4.0);
        for i in -500..=500 {
            let x = i as f64 * 0.0091;
            let y = quantize(x, &qc);
            assert_eq!(quantize(y, &qc), y);
            assert!((y - x.clamp(-4.0, 4.0)).abs() <= qc.max_error() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn saturation_counter() {
        let mut qz = Quantizer::new(q(5, 1.0));
        qz.write(0.2);
        qz.write(1.5);
        qz.write(-3.0);
        assert_eq!((qz.writes, qz.saturations), (3, 2));
    }

    fn weights_with_mask(mask: Matrix, d: usize) -> LayerWeights {
        LayerWeights {
            mask,
            w_q: Projection::Identity,
            w_k: Projection::Identity,
            w_v: Projection::Identity,
            ffn: FfnWeights::zeros(d, 1),
            canonicalizer: None,
        }
    }

    #[test]
    fn diagonal_mask_copies_input() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0, 3.0], vec![0.0, 2.0, -1.0]]);
        let mut mask = Matrix::filled(2, 2, f64::NEG_INFINITY);
        mask[(0, 0)] = 0.0;
        mask[(1, 1)] = 0.0;
        let w = weights_with_mask(mask, 3);
        let mut qz = Quantizer::new(QuantizationConfig::unquantized());
        assert_eq!(masked_attention(&x, &w, &mut qz).unwrap(), x);
    }

    #[test]
    fn equal_scores_average() {
        // orthogonal rows of equal norm: both scores in each row are equal
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let w = weights_with_mask(Matrix::zeros(2, 2), 2);
        let w = LayerWeights {
            w_q: Projection::Dense(Matrix::zeros(2, 2)),
            ..w
        };
        let mut qz = Quantizer::new(QuantizationConfig::unquantized());
        let out = masked_attention(&x, &w, &mut qz).unwrap();
        assert_eq!(out.row(0), &[0.5, 0.5]);
        assert_eq!(out.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn empty_mask_row_is_an_error() {
        let x = Matrix::zeros(2, 2);
        let w = weights_with_mask(Matrix::filled(2, 2, f64::NEG_INFINITY), 2);
        let mut qz = Quantizer::new(QuantizationConfig::unquantized());
        assert_eq!(masked_attention(&x, &w, &mut qz), Err(SimError::EmptyMaskRow(0)));
    }

    #[test]
    fn zero_ffn_is_zero() {
        let mut qz = Quantizer::new(QuantizationConfig::unquantized());
        let f = ffn_forward(&[1.0, -2.0, 3.0], &FfnWeights::zeros(3, 4), &mut qz).unwrap();
        assert_eq!(f, vec![0.0; 3]);
        assert_eq!(qz.writes, 4 + 4 + 3);
    }

    #[test]
    fn ffn_dimension_mismatch() {
        let mut qz = Quantizer::new(QuantizationConfig::unquantized());
        assert!(matches!(
            ffn_forward(&[1.0], &FfnWeights::zeros(3, 4), &mut qz),
            Err(SimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(&[0.3, -1.2, 4.0, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= f64::EPSILON);
    }
}
