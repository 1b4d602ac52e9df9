//! Weight synthesis from a transition table, and the step-by-step simulator
//! that drives the compiled layer against the reference interpreter.
//!
//! # Construction
//!
//! With identity projections and the swap mask, token 0 and the head token
//! `i_h` each attend to themselves and to each other. Canonical tokens have
//! `x0.x0 = x_ih.x_ih = 2` and `x0.x_ih = 1` (they share the centre
//! positional code), so both rows put weight `s = sigmoid(1/sqrt(d))` on
//! themselves and `1 - s` on the partner. After the residual:
//!
//! ```text
//! u0   = (1+s) x0   + (1-s) x_ih
//! u_ih = (1+s) x_ih + (1-s) x0
//! u_i  = 2 x_i                      (other tokens)
//! ```
//!
//! Each rule `(q, g) -> (q', g', D)` owns two neurons sharing the key
//! `a e(q) + a e(g) + 0.5 p(centre)` with `a = 1/(1-s)` and bias
//! `-0.5 - 2a`. The pre-activation is exactly 0.5 on `u0` and `u_ih` when
//! both `q` and `g` match, and at most -0.5 otherwise, including on the
//! non-head tokens. The state neuron writes `2(1+s)(e(q') - e(q))` and the
//! symbol neuron `2(1+s)(e(g') - e(g))`, so after the FFN residual the state
//! block of token 0 is `(1+s) e(q')` and the symbol block of `i_h` is
//! `(1+s) e(g')`. A fixed canonicalizer rescales those blocks, halves the
//! other tokens, clears the cross-block leftovers and restores the
//! positional codes. The result is exactly the encoding of the stepped
//! window before the head moves.
//!
//! The head move itself is applied by the orchestrator in [`simulate`].

use std::fmt::Write as _;

use thiserror::Error;

use crate::encoder::{decode, encode, layout, EmbeddingLayout, EncodeError};
use crate::linalg::{fmt_f64, Matrix};
use crate::sim::{
    layer_forward, scaled_score, softmax, Canonicalizer, FfnWeights, LayerWeights, Projection,
    QuantizationConfig, Quantizer, SimError, TokenCleanup,
};
use crate::tm::{check_window, run, window, Configuration, RunTrace, TmError, ValidatedSpec, WindowView};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Tm(#[from] TmError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Zeros at `(0, i_h)`, `(i_h, 0)` and on the diagonal; `-inf` elsewhere.
pub fn build_attention_mask(k: usize) -> Result<Matrix, TmError> {
    check_window(k)?;
    let n = k + 1;
    let ih = k / 2 + 1;
    let mut mask = Matrix::filled(n, n, f64::NEG_INFINITY);
    for i in 0..n {
        mask[(i, i)] = 0.0;
    }
    mask[(0, ih)] = 0.0;
    mask[(ih, 0)] = 0.0;
    Ok(mask)
}

/// Weight token 0 puts on itself under the compiled mask, computed with the
/// same score and softmax routines the forward pass uses.
pub fn self_attention_weight(layout: &EmbeddingLayout) -> f64 {
    let x0 = encode_probe(layout, 0);
    let xh = encode_probe(layout, layout.head_token());
    softmax(&[scaled_score(&x0, &x0), scaled_score(&x0, &xh)])[0]
}

/// A canonical token with content coordinate 0 of its block.
fn encode_probe(layout: &EmbeddingLayout, token: usize) -> Vec<f64> {
    let mut v = vec![0.0; layout.d];
    if token == 0 {
        v[layout.state_index(0)] = 1.0;
    } else {
        v[layout.symbol_index(0)] = 1.0;
    }
    v[layout.position_index(layout.token_offset(token))] = 1.0;
    v
}

/// Neurons: one state-update per rule, then one symbol-update per rule (both
/// in `(state, symbol)` ordinal order), then `d` pass-through neurons.
pub fn build_ffn_weights(spec: &ValidatedSpec, layout: &EmbeddingLayout) -> FfnWeights {
    let s = self_attention_weight(layout);
    let a = 1.0 / (1.0 - s);
    let bias = -0.5 - 2.0 * a;
    let out_scale = 2.0 * (1.0 + s);
    let n_trans = spec.n_transitions();
    let d = layout.d;
    let mut ffn = FfnWeights::zeros(d, 2 * n_trans + d);
    let centre = layout.position_index(layout.center());

    for (n, ((q, g), t)) in spec.transitions().enumerate() {
        for neuron in [n, n_trans + n] {
            ffn.w1[(neuron, layout.state_index(q))] = a;
            ffn.w1[(neuron, layout.symbol_index(g))] = a;
            ffn.w1[(neuron, centre)] = 0.5;
            ffn.b1[neuron] = bias;
        }
        if t.next != q {
            ffn.w2[(layout.state_index(t.next), n)] = out_scale;
            ffn.w2[(layout.state_index(q), n)] = -out_scale;
        }
        if t.write != g {
            ffn.w2[(layout.symbol_index(t.write), n_trans + n)] = out_scale;
            ffn.w2[(layout.symbol_index(g), n_trans + n)] = -out_scale;
        }
    }
    for j in 0..d {
        ffn.w1[(2 * n_trans + j, j)] = 1.0;
    }
    ffn
}

pub fn build_canonicalizer(layout: &EmbeddingLayout, self_weight: f64) -> Canonicalizer {
    let ih = layout.head_token();
    let inv = 1.0 / (1.0 + self_weight);
    let tokens = (0..layout.n_tokens())
        .map(|t| {
            let (state_scale, symbol_scale) = match t {
                0 => (inv, 0.0),
                _ if t == ih => (0.0, inv),
                _ => (0.0, 0.5),
            };
            TokenCleanup {
                state_scale,
                symbol_scale,
                position: layout.token_offset(t),
            }
        })
        .collect();
    Canonicalizer {
        n_states: layout.n_states,
        n_symbols: layout.n_symbols,
        d_p: layout.d_p,
        tokens,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledProgram {
    pub spec: ValidatedSpec,
    pub layout: EmbeddingLayout,
    pub weights: LayerWeights,
    pub qc: QuantizationConfig,
    pub n_trans: usize,
    /// FFN width, `2 n_trans + d`.
    pub hidden: usize,
    /// Attention weight of token 0 on itself.
    pub self_weight: f64,
}

pub fn compile(spec: &ValidatedSpec, k: usize, qc: QuantizationConfig) -> Result<CompiledProgram, TmError> {
    let layout = layout(spec, k)?;
    let self_weight = self_attention_weight(&layout);
    let ffn = build_ffn_weights(spec, &layout);
    let hidden = ffn.hidden();
    Ok(CompiledProgram {
        spec: spec.clone(),
        layout,
        weights: LayerWeights {
            mask: build_attention_mask(k)?,
            w_q: Projection::Identity,
            w_k: Projection::Identity,
            w_v: Projection::Identity,
            ffn,
            canonicalizer: Some(build_canonicalizer(&layout, self_weight)),
        },
        qc,
        n_trans: spec.n_transitions(),
        hidden,
        self_weight,
    })
}

impl CompiledProgram {
    /// Same weights under a different quantization setting.
    pub fn with_quantization(&self, qc: QuantizationConfig) -> Self {
        CompiledProgram { qc, ..self.clone() }
    }

    /// One layer application on the encoding of `w`.
    pub fn forward(&self, w: &WindowView) -> Result<LayerOutput, CompileError> {
        let x = encode(w, &self.layout)?.tokens;
        self.forward_encoded(&x)
    }

    pub fn forward_encoded(&self, x: &Matrix) -> Result<LayerOutput, CompileError> {
        let mut qz = Quantizer::new(self.qc);
        let output = layer_forward(x, &self.weights, &mut qz)?;
        Ok(LayerOutput {
            output,
            writes: qz.writes,
            saturations: qz.saturations,
            error_bound: qz.error_bound(),
        })
    }

    /// Sectioned text dump: header comment, then `mask`, `W1`, `b1`, `W2`, `b2`.
    pub fn dump_weights(&self) -> String {
        let w = &self.weights;
        let mut out = String::new();
        let levels = self.qc.levels().map_or("none".to_string(), |q| q.to_string());
        let _ = writeln!(
            out,
            "# k={} d={} h={} n_trans={} Q={} C={}",
            self.layout.k,
            self.layout.d,
            self.hidden,
            self.n_trans,
            levels,
            fmt_f64(self.qc.dynamic_range())
        );
        let vector = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
        let _ = write!(out, "mask\n{}", w.mask);
        let _ = write!(out, "W1\n{}", w.ffn.w1);
        let _ = writeln!(out, "b1\n{}", vector(&w.ffn.b1));
        let _ = write!(out, "W2\n{}", w.ffn.w2);
        let _ = writeln!(out, "b2\n{}", vector(&w.ffn.b2));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    pub output: Matrix,
    /// Quantized writes performed (`N_ops`).
    pub writes: u64,
    pub saturations: u64,
    /// `N_ops * C / (Q - 1)`.
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// `None` when the layer output could not be decoded.
    pub decoded: Option<WindowView>,
    pub reference: WindowView,
    /// Simulated configuration after the head move.
    pub config: Option<Configuration>,
    /// Max-norm between the layer output and the encoding of the reference
    /// window before the head move.
    pub distance: f64,
    /// Max-norm between quantized and exact layer outputs on the same input.
    pub deviation: f64,
    pub n_ops: u64,
    pub error_bound: f64,
    pub saturations: u64,
    pub agreement: bool,
    /// Whole configuration (tape, state, head) equals the reference.
    pub config_agreement: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// Record 0 is the initial configuration.
    pub records: Vec<StepRecord>,
    pub halted: bool,
    /// Step whose output could not be decoded, if any.
    pub diverged_at: Option<usize>,
}

impl SimTrace {
    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }

    /// First step whose decoded window differs from the reference; `None`
    /// when every simulated step agrees.
    pub fn first_disagreement(&self) -> Option<usize> {
        self.records.iter().find(|r| !r.agreement).map(|r| r.step)
    }

    /// First step whose distance exceeds `tol`.
    pub fn first_exceedance(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.distance > tol).map(|r| r.step)
    }

    /// Last step before the first saturated step.
    pub fn pre_saturation(&self) -> &[StepRecord] {
        let end = self
            .records
            .iter()
            .position(|r| r.saturations > 0)
            .unwrap_or(self.records.len());
        &self.records[..end]
    }

    pub fn final_config(&self) -> Option<&Configuration> {
        self.records.iter().rev().find_map(|r| r.config.as_ref())
    }

    /// CSV with a fixed header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,agreement,distance,saturations,deviation,error_bound\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.step,
                u8::from(r.agreement),
                fmt_f64(r.distance),
                r.saturations,
                fmt_f64(r.deviation),
                fmt_f64(r.error_bound)
            );
        }
        out
    }
}

/// Run the compiled layer for up to `steps` transitions from `C_0` on
/// `input`, comparing against the reference interpreter at every step.
pub fn simulate(program: &CompiledProgram, input: &[usize], steps: usize) -> Result<SimTrace, CompileError> {
    let reference = run(&program.spec, input, steps);
    simulate_from(program, reference.configs[0].clone(), &reference, 0, steps)
}

/// Simulate from `start`, compared against `reference` from index `offset`.
pub(crate) fn simulate_from(
    program: &CompiledProgram,
    start: Configuration,
    reference: &RunTrace,
    offset: usize,
    steps: usize,
) -> Result<SimTrace, CompileError> {
    let spec = &program.spec;
    let k = program.layout.k;
    let exact = program.with_quantization(QuantizationConfig::unquantized());

    let ref0 = reference.at(offset);
    let w0 = window(spec, &start, k)?;
    let r0 = window(spec, ref0, k)?;
    let distance0 = encode(&w0, &program.layout)?
        .tokens
        .max_abs_diff(&encode(&r0, &program.layout)?.tokens)
        .unwrap_or(f64::INFINITY);
    let mut records = vec![StepRecord {
        step: 0,
        agreement: w0 == r0,
        config_agreement: &start == ref0,
        decoded: Some(w0),
        reference: r0,
        config: Some(start.clone()),
        distance: distance0,
        deviation: 0.0,
        n_ops: 0,
        error_bound: 0.0,
        saturations: 0,
    }];

    let mut config = start;
    let mut halted = config.state == spec.accept();
    let mut diverged_at = None;
    for s in 1..=steps {
        if halted {
            break;
        }
        let input_window = window(spec, &config, k)?;
        let x = encode(&input_window, &program.layout)?.tokens;
        let out = program.forward_encoded(&x)?;
        let deviation = if program.qc.is_quantized() {
            let clean = exact.forward_encoded(&x)?;
            out.output.max_abs_diff(&clean.output).unwrap_or(f64::INFINITY)
        } else {
            0.0
        };

        let ref_now = reference.at(offset + s);
        let mut ref_pre = ref_now.clone();
        ref_pre.head = reference.at(offset + s - 1).head;
        let ref_pre_window = window(spec, &ref_pre, k)?;
        let distance = out
            .output
            .max_abs_diff(&encode(&ref_pre_window, &program.layout)?.tokens)
            .unwrap_or(f64::INFINITY);
        let ref_window = window(spec, ref_now, k)?;

        let mut record = StepRecord {
            step: s,
            decoded: None,
            reference: ref_window,
            config: None,
            distance,
            deviation,
            n_ops: out.writes,
            error_bound: out.error_bound,
            saturations: out.saturations,
            agreement: false,
            config_agreement: false,
        };
        let decoded = match decode(&out.output, &program.layout) {
            Ok(w) => w,
            Err(EncodeError::AmbiguousArgmax { .. }) => {
                records.push(record);
                diverged_at = Some(s);
                break;
            }
            Err(e) => return Err(e.into()),
        };

        let rule = spec
            .transition(input_window.state, input_window.head_symbol())
            .expect("non-accepting window state");
        let left = config.head - (k / 2) as i64;
        for (i, &symbol) in decoded.symbols.iter().enumerate() {
            config.write(spec, left + i as i64, symbol);
        }
        config.state = decoded.state;
        config.head += rule.dir.offset();
        halted = config.state == spec.accept();

        let now = window(spec, &config, k)?;
        record.agreement = now == record.reference;
        record.config_agreement = &config == ref_now;
        record.decoded = Some(decoded);
        record.config = Some(config.clone());
        records.push(record);
    }
    Ok(SimTrace {
        records,
        halted,
        diverged_at,
    })
}

/// One point of a quantization sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub levels: u64,
    /// First disagreeing step; `None` if every simulated step agreed.
    pub first_disagreement: Option<usize>,
    /// Steps before the first saturated write.
    pub pre_saturation_steps: usize,
    /// Largest per-step deviation over the pre-saturation steps.
    pub max_deviation: f64,
    /// Every pre-saturation step had `deviation <= N_ops * C / (Q - 1)`.
    pub within_bound: bool,
    /// Smallest `bound - deviation` over the pre-saturation steps.
    pub min_headroom: f64,
    pub saturations: u64,
}

/// Simulate at each level count in `levels` with range `range`, in parallel.
/// Results come back in the order of `levels`.
pub fn quantization_sweep(
    program: &CompiledProgram,
    input: &[usize],
    steps: usize,
    levels: &[u64],
    range: f64,
) -> Result<Vec<SweepPoint>, CompileError> {
    use rayon::prelude::*;
    levels
        .par_iter()
        .map(|&q| {
            let qc = QuantizationConfig::new(q, range)?;
            let trace = simulate(&program.with_quantization(qc), input, steps)?;
            let pre = trace.pre_saturation();
            let (within_bound, min_headroom, max_deviation) = pre.iter().skip(1).fold(
                (true, f64::INFINITY, 0.0_f64),
                |(ok, head, dev), r| {
                    (
                        ok && r.deviation <= r.error_bound,
                        head.min(r.error_bound - r.deviation),
                        dev.max(r.deviation),
                    )
                },
            );
            Ok(SweepPoint {
                levels: q,
                first_disagreement: trace.first_disagreement(),
                pre_saturation_steps: pre.len().saturating_sub(1),
                max_deviation,
                within_bound,
                min_headroom,
                saturations: trace.records.iter().map(|r| r.saturations).sum(),
            })
        })
        .collect()
}

/// `Q = 2^4, 2^6, ..., 2^16`.
pub const DEFAULT_SWEEP: [u64; 7] = [16, 64, 256, 1024, 4096, 16384, 65536];

/// Default dynamic range; covers every pre-activation of the compiled layer.
pub const DEFAULT_RANGE: f64 = 8.0;
