//! Recurrent policy over architecture tokens, trained with REINFORCE.
//!
//! A single-layer LSTM emits one categorical decision per multiplicative
//! item. The input at step `v` is the embedding of the token chosen at step
//! `v - 1` (a dedicated start token at `v = 0`). Gradients are computed by
//! hand-written backpropagation through time over cached activations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ErasError, Result};
use crate::search_space::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub hidden: usize,
    pub embed: usize,
    pub learning_rate: f64,
    pub baseline_decay: f64,
    pub entropy_weight: f64,
    /// Half-width of the uniform initialisation of recurrent weights.
    pub init_scale: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            hidden: 64,
            embed: 32,
            learning_rate: 1e-3,
            baseline_decay: 0.9,
            entropy_weight: 0.0,
            init_scale: 0.1,
        }
    }
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    steps: usize,
    ops: usize,
    embed: usize,
    hidden: usize,
    emb: usize,
    w: usize,
    b: usize,
    out_w: usize,
    out_b: usize,
    total: usize,
}

impl Layout {
    fn new(steps: usize, ops: usize, embed: usize, hidden: usize) -> Self {
        let emb = 0;
        let w = emb + (ops + 1) * embed;
        let b = w + 4 * hidden * (embed + hidden);
        let out_w = b + 4 * hidden;
        let out_b = out_w + ops * hidden;
        let total = out_b + ops;
        Layout {
            steps,
            ops,
            embed,
            hidden,
            emb,
            w,
            b,
            out_w,
            out_b,
            total,
        }
    }

    fn blocks(&self) -> [(&'static str, Vec<usize>, usize, usize); 5] {
        let (e, h, k) = (self.embed, self.hidden, self.ops);
        [
            ("embedding", vec![k + 1, e], self.emb, self.w),
            ("lstm_weight", vec![4 * h, e + h], self.w, self.b),
            ("lstm_bias", vec![4 * h], self.b, self.out_w),
            ("output_weight", vec![k, h], self.out_w, self.out_b),
            ("output_bias", vec![k], self.out_b, self.total),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Controller parameters θ, the moving-average baseline and optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    layout: Layout,
    config: ControllerConfig,
    params: Vec<f64>,
    adam: Adam,
    baseline: f64,
    baseline_ready: bool,
}

/// Per-step cached activations.
#[derive(Debug, Clone)]
struct StepCache {
    input_token: usize,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
}

/// One sampled token sequence with everything needed for backward.
#[derive(Debug, Clone)]
pub struct SampleTrace {
    pub tokens: Vec<u8>,
    pub log_probs: Vec<f64>,
    cache: Vec<StepCache>,
}

impl SampleTrace {
    pub fn log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn architecture(&self, groups: usize, blocks: usize) -> Result<Architecture> {
        Architecture::new(groups, blocks, self.tokens.clone())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

impl PolicyState {
    /// Policy over `steps` decisions with `ops` choices each. The output
    /// projection starts at zero, so the initial policy is uniform.
    pub fn new(steps: usize, ops: usize, config: ControllerConfig, rng: &mut impl Rng) -> Self {
        assert!(steps >= 1 && ops >= 1);
        let layout = Layout::new(steps, ops, config.embed, config.hidden);
        let mut params = vec![0.0; layout.total];
        let s = config.init_scale;
        if s > 0.0 {
            for x in &mut params[layout.emb..layout.out_w] {
                *x = rng.random_range(-s..s);
            }
        }
        PolicyState {
            layout,
            config,
            adam: Adam {
                m: vec![0.0; layout.total],
                v: vec![0.0; layout.total],
                step: 0,
            },
            params,
            baseline: 0.0,
            baseline_ready: false,
        }
    }

    /// Policy over architectures with `groups` groups of `blocks × blocks` items.
    pub fn for_space(groups: usize, blocks: usize, config: ControllerConfig, rng: &mut impl Rng) -> Self {
        Self::new(groups * blocks * blocks, 2 * blocks + 1, config, rng)
    }

    pub fn steps(&self) -> usize {
        self.layout.steps
    }

    pub fn num_ops(&self) -> usize {
        self.layout.ops
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Presets the baseline; later updates blend into it.
    pub fn set_baseline(&mut self, b: f64) {
        self.baseline = b;
        self.baseline_ready = true;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn start_token(&self) -> usize {
        self.layout.ops
    }

    fn cell(&self, input_token: usize, h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let Layout {
            embed: e,
            hidden: hd,
            ops,
            ..
        } = self.layout;
        let p = &self.params;
        let x = &p[self.layout.emb + input_token * e..self.layout.emb + (input_token + 1) * e];
        let cols = e + hd;
        let mut gates = vec![0.0; 4 * hd];
        for (row, g) in gates.iter_mut().enumerate() {
            let w = &p[self.layout.w + row * cols..self.layout.w + (row + 1) * cols];
            let mut z = p[self.layout.b + row];
            z += w[..e].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            z += w[e..].iter().zip(h_prev).map(|(a, b)| a * b).sum::<f64>();
            *g = if row < 3 * hd { sigmoid(z) } else { z.tanh() };
        }
        let mut c = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        for k in 0..hd {
            let (i, f, o, g) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
            c[k] = f * c_prev[k] + i * g;
            tanh_c[k] = c[k].tanh();
            h[k] = o * tanh_c[k];
        }
        let logits: Vec<f64> = (0..ops)
            .map(|k| {
                let w = &p[self.layout.out_w + k * hd..self.layout.out_w + (k + 1) * hd];
                p[self.layout.out_b + k] + w.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        StepCache {
            input_token,
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
            h,
            probs: softmax(&logits),
        }
    }

    /// Runs the recurrence, choosing each token with `choose`.
    fn unroll(&self, mut choose: impl FnMut(usize, &[f64]) -> usize) -> SampleTrace {
        let hd = self.layout.hidden;
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut input = self.start_token();
        let mut tokens = Vec::with_capacity(self.layout.steps);
        let mut log_probs = Vec::with_capacity(self.layout.steps);
        let mut cache = Vec::with_capacity(self.layout.steps);
        for v in 0..self.layout.steps {
            let step = self.cell(input, &h, &c);
            let tok = choose(v, &step.probs);
            log_probs.push(step.probs[tok].ln());
            tokens.push(tok as u8);
            h.clone_from(&step.h);
            c.clone_from(&step.c);
            input = tok;
            cache.push(step);
        }
        SampleTrace {
            tokens,
            log_probs,
            cache,
        }
    }

    /// Samples a token sequence autoregressively.
    pub fn sample(&self, rng: &mut impl Rng) -> SampleTrace {
        self.unroll(|_, probs| sample_categorical(probs, rng))
    }

    /// Evaluates the policy on a fixed token sequence.
    pub fn teacher_forced(&self, tokens: &[u8]) -> SampleTrace {
        assert_eq!(tokens.len(), self.layout.steps);
        self.unroll(|v, _| tokens[v] as usize)
    }

    /// Greedy decode; ties go to the lowest token.
    pub fn mode(&self) -> SampleTrace {
        self.unroll(|_, probs| {
            let mut best = 0;
            for (k, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = k;
                }
            }
            best
        })
    }

    /// Per-step output distributions of the greedy decode.
    pub fn step_distributions(&self, trace: &SampleTrace) -> Vec<Vec<f64>> {
        trace.cache.iter().map(|c| c.probs.clone()).collect()
    }

    /// Gradient of `weight · Σ_v log P(token_v) + entropy_weight · Σ_v H_v`
    /// with respect to all parameters, added into `grad`.
    fn accumulate_gradient(&self, trace: &SampleTrace, weight: f64, entropy_weight: f64, grad: &mut [f64]) {
        let Layout {
            embed: e,
            hidden: hd,
            ops,
            ..
        } = self.layout;
        let cols = e + hd;
        let p = &self.params;
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for (v, step) in trace.cache.iter().enumerate().rev() {
            let tok = trace.tokens[v] as usize;
            // d/dlogits of weight·log p_tok + β·H.
            let entropy: f64 = -step.probs.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>();
            let dz: Vec<f64> = (0..ops)
                .map(|k| {
                    let q = step.probs[k];
                    let onehot = if k == tok { 1.0 } else { 0.0 };
                    let mut g = weight * (onehot - q);
                    if entropy_weight != 0.0 && q > 0.0 {
                        g += entropy_weight * (-q * (q.ln() + entropy));
                    }
                    g
                })
                .collect();

            let mut dh = dh_next.clone();
            for k in 0..ops {
                grad[self.layout.out_b + k] += dz[k];
                let row = self.layout.out_w + k * hd;
                for j in 0..hd {
                    grad[row + j] += dz[k] * step.h[j];
                    dh[j] += dz[k] * p[row + j];
                }
            }

            let g = &step.gates;
            let mut dgates = vec![0.0; 4 * hd];
            let mut dc_prev = vec![0.0; hd];
            for k in 0..hd {
                let (i, f, o, gg) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
                let d_o = dh[k] * step.tanh_c[k];
                let dc = dh[k] * o * (1.0 - step.tanh_c[k] * step.tanh_c[k]) + dc_next[k];
                let d_i = dc * gg;
                let d_g = dc * i;
                let d_f = dc * step.c_prev[k];
                dc_prev[k] = dc * f;
                dgates[k] = d_i * i * (1.0 - i);
                dgates[hd + k] = d_f * f * (1.0 - f);
                dgates[2 * hd + k] = d_o * o * (1.0 - o);
                dgates[3 * hd + k] = d_g * (1.0 - gg * gg);
            }

            let x_off = self.layout.emb + step.input_token * e;
            let mut dx = vec![0.0; e];
            let mut dh_prev = vec![0.0; hd];
            for (row, &dg) in dgates.iter().enumerate() {
                if dg == 0.0 {
                    continue;
                }
                grad[self.layout.b + row] += dg;
                let w_off = self.layout.w + row * cols;
                for a in 0..e {
                    grad[w_off + a] += dg * p[x_off + a];
                    dx[a] += dg * p[w_off + a];
                }
                for a in 0..hd {
                    grad[w_off + e + a] += dg * step.h_prev[a];
                    dh_prev[a] += dg * p[w_off + e + a];
                }
            }
            for a in 0..e {
                grad[x_off + a] += dx[a];
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
    }

    /// `∇_θ Σ_v log P(α_v | α_{<v}; θ)` for a trace.
    pub fn log_prob_gradient(&self, trace: &SampleTrace) -> Vec<f64> {
        let mut grad = vec![0.0; self.layout.total];
        self.accumulate_gradient(trace, 1.0, 0.0, &mut grad);
        grad
    }

    /// Entropy of the step distributions recorded in `trace`.
    pub fn entropy(&self, trace: &SampleTrace) -> f64 {
        trace
            .cache
            .iter()
            .map(|s| -s.probs.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>())
            .sum()
    }

    /// One REINFORCE step: ascend `(1/U) Σ_u (Q_u − b) ∇ log P(trace_u)`
    /// with Adam, then blend the mean reward into the baseline.
    pub fn reinforce_update(&mut self, traces: &[(SampleTrace, f64)]) -> Result<()> {
        if traces.is_empty() {
            return Err(ErasError::InvalidArgument("reinforce_update needs traces".into()));
        }
        let mean_reward = traces.iter().map(|(_, q)| q).sum::<f64>() / traces.len() as f64;
        if !self.baseline_ready {
            self.set_baseline(mean_reward);
        }
        let u = traces.len() as f64;
        let mut grad = vec![0.0; self.layout.total];
        for (trace, reward) in traces {
            let advantage = reward - self.baseline;
            self.accumulate_gradient(trace, advantage / u, self.config.entropy_weight / u, &mut grad);
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(ErasError::NonFinite(format!("controller gradient at parameter {i}")));
        }
        self.adam_ascend(&grad);
        let gamma = self.config.baseline_decay;
        self.baseline = gamma * self.baseline + (1.0 - gamma) * mean_reward;
        Ok(())
    }

    fn adam_ascend(&mut self, grad: &[f64]) {
        let lr = self.config.learning_rate;
        let a = &mut self.adam;
        a.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(a.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(a.step as i32);
        for (k, &g) in grad.iter().enumerate() {
            if g == 0.0 && a.m[k] == 0.0 && a.v[k] == 0.0 {
                continue;
            }
            a.m[k] = ADAM_BETA1 * a.m[k] + (1.0 - ADAM_BETA1) * g;
            a.v[k] = ADAM_BETA2 * a.v[k] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = a.m[k] / bc1;
            let v_hat = a.v[k] / bc2;
            self.params[k] += lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }

    /// Named parameter and optimiser blocks with their shapes.
    pub fn named_blocks(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        for (name, shape, lo, hi) in self.layout.blocks() {
            out.push((name.to_string(), shape.clone(), self.params[lo..hi].to_vec()));
            out.push((format!("adam_m.{name}"), shape.clone(), self.adam.m[lo..hi].to_vec()));
            out.push((format!("adam_v.{name}"), shape, self.adam.v[lo..hi].to_vec()));
        }
        out.push((
            "scalars".to_string(),
            vec![4],
            vec![
                self.baseline,
                if self.baseline_ready { 1.0 } else { 0.0 },
                self.adam.step as f64,
                self.layout.steps as f64,
            ],
        ));
        out
    }

    /// Rebuilds a policy from [`PolicyState::named_blocks`] output.
    pub fn from_named_blocks(
        steps: usize,
        ops: usize,
        config: ControllerConfig,
        blocks: &[(String, Vec<usize>, Vec<f64>)],
    ) -> Result<Self> {
        let layout = Layout::new(steps, ops, config.embed, config.hidden);
        let find = |name: &str, shape: &[usize]| -> Result<&[f64]> {
            let (_, s, data) = blocks
                .iter()
                .find(|(n, _, _)| n == name)
                .ok_or_else(|| ErasError::Checkpoint(format!("policy block `{name}` missing")))?;
            if s != shape {
                return Err(ErasError::Checkpoint(format!(
                    "policy block `{name}` has shape {s:?}, expected {shape:?}"
                )));
            }
            Ok(data)
        };
        let mut params = vec![0.0; layout.total];
        let mut m = vec![0.0; layout.total];
        let mut v = vec![0.0; layout.total];
        for (name, shape, lo, hi) in layout.blocks() {
            params[lo..hi].copy_from_slice(find(name, &shape)?);
            m[lo..hi].copy_from_slice(find(&format!("adam_m.{name}"), &shape)?);
            v[lo..hi].copy_from_slice(find(&format!("adam_v.{name}"), &shape)?);
        }
        let scalars = find("scalars", &[4])?;
        if scalars[3] as usize != steps {
            return Err(ErasError::Checkpoint("policy step count mismatch".into()));
        }
        Ok(PolicyState {
            layout,
            config,
            params,
            adam: Adam {
                m,
                v,
                step: scalars[2] as u64,
            },
            baseline: scalars[0],
            baseline_ready: scalars[1] != 0.0,
        })
    }
}

/// Samples an architecture; returns it with its trace.
pub fn sample_architecture(
    policy: &PolicyState,
    groups: usize,
    blocks: usize,
    rng: &mut impl Rng,
) -> Result<(Architecture, SampleTrace)> {
    let trace = policy.sample(rng);
    Ok((trace.architecture(groups, blocks)?, trace))
}

/// Greedy architecture of the policy.
pub fn mode_architecture(policy: &PolicyState, groups: usize, blocks: usize) -> Result<Architecture> {
    policy.mode().architecture(groups, blocks)
}
