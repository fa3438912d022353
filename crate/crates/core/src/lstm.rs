//! Stacked LSTM with a scalar linear head and exact BPTT gradients.
//!
//! The network maps a per-second feature vector to a per-second scalar
//! prediction. Cell and hidden state are explicit values threaded through
//! [`LstmNetwork::step`], never hidden behind interior mutability: stepping
//! is a pure function of `(weights, input, state)`, which is what makes
//! stateful inference reproducible and lets training and inference share
//! one forward implementation.
//!
//! Gate equations per layer (u is the layer input, h/c the recurrent
//! state):
//!
//! ```text
//! i = sigmoid(W_i u + U_i h + b_i)      input gate
//! f = sigmoid(W_f u + U_f h + b_f)      forget gate
//! g = tanh   (W_g u + U_g h + b_g)      candidate
//! o = sigmoid(W_o u + U_o h + b_o)      output gate
//! c' = f .* c + i .* g
//! h' = o .* tanh(c')
//! ```
//!
//! The prediction is `w . h_top + b` from the last layer's hidden vector.
//! There are no peephole connections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, tanh, Matrix, Rng};

/// How many trailing window positions the training loss scores; see
/// [`LstmNetwork::backward`] for why it is two rather than one or all.
pub const SCORED_WINDOW_POSITIONS: usize = 4;

/// Architecture of a stacked LSTM: `layers` stacked cells of `units`
/// hidden units each, fed by `input_dim`-dimensional feature vectors.
/// The output head is always a single linear unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of stacked LSTM layers (>= 1).
    pub layers: usize,
    /// Hidden units per layer (>= 1).
    pub units: usize,
    /// Feature-vector dimension (>= 1).
    pub input_dim: usize,
}

impl Default for NetworkConfig {
    /// The default architecture used throughout this repository:
    /// two layers of 22 units over three features.
    fn default() -> Self {
        NetworkConfig {
            layers: 2,
            units: 22,
            input_dim: 3,
        }
    }
}

impl NetworkConfig {
    /// Validate the documented ranges (all dimensions >= 1).
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.units == 0 || self.input_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "network dimensions must all be >= 1, got layers={} units={} input_dim={}",
                self.layers, self.units, self.input_dim
            )));
        }
        Ok(())
    }

    /// Input width of layer `k`: the feature dimension for the first
    /// layer, the hidden width for every layer above it.
    fn layer_input_dim(&self, k: usize) -> usize {
        if k == 0 {
            self.input_dim
        } else {
            self.units
        }
    }

    /// Total trainable parameter count:
    /// `4 * units * (in + units + 1)` per layer plus `units + 1` for the
    /// head.
    pub fn param_count(&self) -> usize {
        let d = self.units;
        let per_layer: usize = (0..self.layers)
            .map(|k| 4 * d * (self.layer_input_dim(k) + d + 1))
            .sum();
        per_layer + d + 1
    }
}

/// One gate's parameters: input weights `w` (units x in), recurrent
/// weights `u` (units x units), bias `b` (units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl Gate {
    fn zeros(in_dim: usize, units: usize) -> Gate {
        Gate {
            w: Matrix::zeros(units, in_dim),
            u: Matrix::zeros(units, units),
            b: vec![0.0; units],
        }
    }
}

/// All four gates of one LSTM layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerWeights {
    pub input: Gate,
    pub forget: Gate,
    pub candidate: Gate,
    pub output: Gate,
}

impl LstmLayerWeights {
    fn zeros(in_dim: usize, units: usize) -> LstmLayerWeights {
        LstmLayerWeights {
            input: Gate::zeros(in_dim, units),
            forget: Gate::zeros(in_dim, units),
            candidate: Gate::zeros(in_dim, units),
            output: Gate::zeros(in_dim, units),
        }
    }

    fn gates(&self) -> [&Gate; 4] {
        [&self.input, &self.forget, &self.candidate, &self.output]
    }

    fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [
            &mut self.input,
            &mut self.forget,
            &mut self.candidate,
            &mut self.output,
        ]
    }
}

/// The scalar linear output head: `y = w . h + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Recurrent state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    /// Cell vector `c`.
    pub cell: Vec<f64>,
    /// Hidden vector `h`.
    pub hidden: Vec<f64>,
}

/// Recurrent state of the whole stack, one [`LayerState`] per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub layers: Vec<LayerState>,
}

impl CellState {
    /// All-zero state for the given architecture — the canonical initial
    /// state at session start and at every training-window start.
    pub fn zeros(config: &NetworkConfig) -> CellState {
        CellState {
            layers: (0..config.layers)
                .map(|_| LayerState {
                    cell: vec![0.0; config.units],
                    hidden: vec![0.0; config.units],
                })
                .collect(),
        }
    }

    fn check_shape(&self, config: &NetworkConfig) -> Result<()> {
        if self.layers.len() != config.layers {
            return Err(Error::DimensionMismatch {
                what: "cell state layer count",
                expected: config.layers,
                got: self.layers.len(),
            });
        }
        for layer in &self.layers {
            if layer.cell.len() != config.units || layer.hidden.len() != config.units {
                return Err(Error::DimensionMismatch {
                    what: "cell state width",
                    expected: config.units,
                    got: layer.cell.len().max(layer.hidden.len()),
                });
            }
        }
        Ok(())
    }
}

/// Parameter gradients, shaped exactly like the network they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LstmLayerWeights>,
    pub head: OutputHead,
}

impl Gradients {
    /// Zero gradients for the given architecture.
    pub fn zeros(config: &NetworkConfig) -> Gradients {
        Gradients {
            layers: (0..config.layers)
                .map(|k| LstmLayerWeights::zeros(config.layer_input_dim(k), config.units))
                .collect(),
            head: OutputHead {
                w: vec![0.0; config.units],
                b: 0.0,
            },
        }
    }

    /// Flatten to the canonical parameter order (see
    /// [`LstmNetwork::flatten`]).
    pub fn flatten(&self) -> Vec<f64> {
        flatten_parts(&self.layers, &self.head)
    }
}

/// A stacked LSTM with its scalar head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub config: NetworkConfig,
    pub layers: Vec<LstmLayerWeights>,
    pub head: OutputHead,
}

/// Per-(timestep, layer) values captured on the cached forward pass and
/// consumed by backpropagation.
struct LayerCache {
    /// Input to the layer at this timestep.
    u: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl LstmNetwork {
    /// Initialize a network from a seeded generator.
    ///
    /// * input weights `W`: uniform in `(-a, a)` with
    ///   `a = sqrt(6 / (fan_in + fan_out))`
    /// * recurrent weights `U`: orthogonal, from the sign-corrected QR of
    ///   a square Gaussian matrix
    /// * biases: zero, except the forget-gate bias which starts at 1 so
    ///   early training does not erase the cell state
    /// * head: uniform `W` by the same rule, zero bias
    ///
    /// Draw order is fixed (layers bottom-up; gates input, forget,
    /// candidate, output; `w` then `u` then `b`), so equal seeds yield
    /// bit-identical networks.
    pub fn init(config: NetworkConfig, rng: &mut Rng) -> Result<LstmNetwork> {
        config.validate()?;
        let d = config.units;
        let mut layers = Vec::with_capacity(config.layers);
        for k in 0..config.layers {
            let in_dim = config.layer_input_dim(k);
            let mut layer = LstmLayerWeights::zeros(in_dim, d);
            for (gate_idx, gate) in layer.gates_mut().into_iter().enumerate() {
                let bound = (6.0 / (in_dim + d) as f64).sqrt();
                for v in gate.w.as_mut_slice() {
                    *v = rng.uniform(-bound, bound);
                }
                gate.u = orthogonal(d, rng);
                // Gate order is input, forget, candidate, output; only the
                // forget bias starts away from zero.
                if gate_idx == 1 {
                    gate.b.iter_mut().for_each(|b| *b = 1.0);
                }
            }
            layers.push(layer);
        }
        let head_bound = (6.0 / (d + 1) as f64).sqrt();
        let head = OutputHead {
            w: (0..d).map(|_| rng.uniform(-head_bound, head_bound)).collect(),
            b: 0.0,
        };
        Ok(LstmNetwork {
            config,
            layers,
            head,
        })
    }

    /// Total trainable parameter count.
    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    /// One inference step: consume a feature vector and the previous
    /// state, produce the prediction and the next state. Pure — the input
    /// state is untouched, so callers own state threading explicitly.
    pub fn step(&self, x: &[f64], state: &CellState) -> Result<(f64, CellState)> {
        self.check_input(x)?;
        state.check_shape(&self.config)?;
        let (y, next, _) = self.step_inner(x, state, false);
        Ok((y, next))
    }

    /// Run a whole sequence, threading state internally. `initial` of
    /// `None` starts from the all-zero state. Returns the per-step
    /// predictions and the final state, which can seed a continuation:
    /// splitting a sequence at any point and chaining the final state
    /// reproduces the unsplit run bit-exactly.
    pub fn run_sequence(
        &self,
        xs: &[Vec<f64>],
        initial: Option<&CellState>,
    ) -> Result<(Vec<f64>, CellState)> {
        let mut state = match initial {
            Some(s) => {
                s.check_shape(&self.config)?;
                s.clone()
            }
            None => CellState::zeros(&self.config),
        };
        let mut ys = Vec::with_capacity(xs.len());
        for x in xs {
            self.check_input(x)?;
            let (y, next, _) = self.step_inner(x, &state, false);
            ys.push(y);
            state = next;
        }
        Ok((ys, state))
    }

    /// Squared-error loss and exact parameter gradients for one training
    /// window, by backpropagation through time.
    ///
    /// The window starts from the all-zero state (training is stateless
    /// across windows), while deployment runs one stateful pass over the
    /// whole session. The loss bridges that gap by scoring the mean squared
    /// error of the last [`SCORED_WINDOW_POSITIONS`] window positions — the
    /// ones predicted with (nearly) full context — and none of the earlier
    /// ones:
    ///
    /// - Early positions see a deliberately impoverished history, so
    ///   supervising them trains the network to answer from
    ///   freshly-reset state and rewards it for keying on the distance
    ///   from the reset; that behavior does not transfer to long stateful
    ///   runs, where no reset ever occurs.
    /// - Scoring a single position leaves the head free to read hidden
    ///   coordinates that are constant inside every window but keep
    ///   growing across a long stateful run, which surfaces as a slow
    ///   drift in deployed predictions. Scoring two adjacent positions
    ///   pins the prediction's per-step change to the target's per-step
    ///   change, so readouts of steadily growing state directions are
    ///   penalized where a single anchor cannot see them.
    ///
    /// Unscored steps still shape the loss through the recurrent state
    /// they leave behind.
    pub fn backward(&self, xs: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Gradients)> {
        if xs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: targets.len(),
            });
        }
        if xs.is_empty() {
            return Err(Error::InvalidConfig(
                "backward requires a non-empty window".into(),
            ));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite {
                what: "training target",
            });
        }

        let steps = xs.len();
        let l = self.config.layers;
        let d = self.config.units;

        // Forward pass, caching every per-step intermediate.
        let mut caches: Vec<Vec<LayerCache>> = Vec::with_capacity(steps);
        let mut preds = Vec::with_capacity(steps);
        let mut state = CellState::zeros(&self.config);
        for x in xs {
            self.check_input(x)?;
            let (y, next, cache) = self.step_inner(x, &state, true);
            preds.push(y);
            caches.push(cache.expect("cache requested"));
            state = next;
        }

        let scored = SCORED_WINDOW_POSITIONS.min(steps);
        let first_scored = steps - scored;
        let weight = 1.0 / scored as f64;
        let loss = (first_scored..steps)
            .map(|t| {
                let err = preds[t] - targets[t];
                err * err
            })
            .sum::<f64>()
            * weight;

        // Backward pass over time, then down the stack at each timestep.
        let mut grads = Gradients::zeros(&self.config);
        let mut dh_next = vec![vec![0.0; d]; l];
        let mut dc_next = vec![vec![0.0; d]; l];

        for t in (0..steps).rev() {
            let dy = if t >= first_scored {
                2.0 * (preds[t] - targets[t]) * weight
            } else {
                0.0
            };
            let h_top = &caches[t][l - 1].h;
            for (gw, h) in grads.head.w.iter_mut().zip(h_top) {
                *gw += dy * h;
            }
            grads.head.b += dy;
            // Gradient arriving at the top layer's hidden output from the
            // head; lower layers receive it from the layer above instead.
            let mut d_above: Vec<f64> = self.head.w.iter().map(|w| dy * w).collect();

            for k in (0..l).rev() {
                let cache = &caches[t][k];
                let layer = &self.layers[k];
                let glayer = &mut grads.layers[k];

                let mut di_raw = vec![0.0; d];
                let mut df_raw = vec![0.0; d];
                let mut dg_raw = vec![0.0; d];
                let mut do_raw = vec![0.0; d];
                let mut dc_prev = vec![0.0; d];
                for j in 0..d {
                    let dh = d_above[j] + dh_next[k][j];
                    let tc = cache.tanh_c[j];
                    let dc = dc_next[k][j] + dh * cache.o[j] * (1.0 - tc * tc);
                    let (i, f, g, o) = (cache.i[j], cache.f[j], cache.g[j], cache.o[j]);
                    do_raw[j] = dh * tc * o * (1.0 - o); // sigmoid derivative
                    di_raw[j] = dc * g * i * (1.0 - i);
                    df_raw[j] = dc * cache.c_prev[j] * f * (1.0 - f);
                    dg_raw[j] = dc * i * (1.0 - g * g); // tanh derivative
                    dc_prev[j] = dc * f;
                }

                let raws = [&di_raw, &df_raw, &dg_raw, &do_raw];
                let gates = [
                    &mut glayer.input,
                    &mut glayer.forget,
                    &mut glayer.candidate,
                    &mut glayer.output,
                ];
                for (ggate, raw) in gates.into_iter().zip(raws) {
                    ggate.w.add_outer(raw, &cache.u);
                    ggate.u.add_outer(raw, &cache.h_prev);
                    for (b, r) in ggate.b.iter_mut().zip(raw) {
                        *b += r;
                    }
                }

                // Push gradients to the layer input (feeds the layer below
                // at this timestep) and to the previous hidden state
                // (feeds this layer at t - 1).
                let mut du = vec![0.0; cache.u.len()];
                let mut dh_prev = vec![0.0; d];
                let weight_gates = [&layer.input, &layer.forget, &layer.candidate, &layer.output];
                let raws = [&di_raw, &df_raw, &dg_raw, &do_raw];
                for (gate, raw) in weight_gates.into_iter().zip(raws) {
                    gate.w.tr_mul_vec_add(raw, &mut du);
                    gate.u.tr_mul_vec_add(raw, &mut dh_prev);
                }
                dh_next[k] = dh_prev;
                dc_next[k] = dc_prev;
                d_above = du; // dx for k == 0, discarded below
            }
        }

        Ok((loss, grads))
    }

    /// Flatten all parameters to a single vector in the canonical order:
    /// layers bottom-up; within a layer the gates input, forget,
    /// candidate, output; within a gate `w` row-major, then `u` row-major,
    /// then `b`; finally the head's `w` and `b`.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_parts(&self.layers, &self.head)
    }

    /// Rebuild a network from [`LstmNetwork::flatten`] output. Errors if
    /// the buffer length does not match `config.param_count()`.
    pub fn from_flat(config: NetworkConfig, flat: &[f64]) -> Result<LstmNetwork> {
        config.validate()?;
        if flat.len() != config.param_count() {
            return Err(Error::DimensionMismatch {
                what: "flat parameter buffer",
                expected: config.param_count(),
                got: flat.len(),
            });
        }
        let d = config.units;
        let mut pos = 0;
        let mut take = |n: usize, flat: &[f64]| {
            let s = flat[pos..pos + n].to_vec();
            pos += n;
            s
        };
        let mut layers = Vec::with_capacity(config.layers);
        for k in 0..config.layers {
            let in_dim = config.layer_input_dim(k);
            let mut layer = LstmLayerWeights::zeros(in_dim, d);
            for gate in layer.gates_mut() {
                gate.w = Matrix::from_flat(d, in_dim, take(d * in_dim, flat))?;
                gate.u = Matrix::from_flat(d, d, take(d * d, flat))?;
                gate.b = take(d, flat);
            }
            layers.push(layer);
        }
        let head = OutputHead {
            w: take(d, flat),
            b: take(1, flat)[0],
        };
        Ok(LstmNetwork {
            config,
            layers,
            head,
        })
    }

    /// Visit every parameter mutably with its flat index, in the same
    /// order as [`LstmNetwork::flatten`]. The optimizer walks parameters
    /// and flattened gradients in lockstep through this.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut idx = 0;
        for layer in &mut self.layers {
            for gate in layer.gates_mut() {
                for v in gate.w.as_mut_slice() {
                    f(idx, v);
                    idx += 1;
                }
                for v in gate.u.as_mut_slice() {
                    f(idx, v);
                    idx += 1;
                }
                for v in &mut gate.b {
                    f(idx, v);
                    idx += 1;
                }
            }
        }
        for v in &mut self.head.w {
            f(idx, v);
            idx += 1;
        }
        f(idx, &mut self.head.b);
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                what: "step input",
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "step input" });
        }
        Ok(())
    }

    /// Shared forward step. `with_cache` additionally returns every
    /// intermediate needed by BPTT. Inputs are assumed validated.
    fn step_inner(
        &self,
        x: &[f64],
        state: &CellState,
        with_cache: bool,
    ) -> (f64, CellState, Option<Vec<LayerCache>>) {
        let d = self.config.units;
        let mut caches = with_cache.then(|| Vec::with_capacity(self.config.layers));
        let mut next_layers = Vec::with_capacity(self.config.layers);
        let mut input: Vec<f64> = x.to_vec();

        for (k, layer) in self.layers.iter().enumerate() {
            let prev = &state.layers[k];
            let mut pre = [&layer.input, &layer.forget, &layer.candidate, &layer.output]
                .map(|gate| {
                    let mut p = gate.b.clone();
                    gate.w.mul_vec_add(&input, &mut p);
                    gate.u.mul_vec_add(&prev.hidden, &mut p);
                    p
                });
            let [pi, pf, pg, po] = &mut pre;
            for j in 0..d {
                pi[j] = sigmoid(pi[j]);
                pf[j] = sigmoid(pf[j]);
                pg[j] = tanh(pg[j]);
                po[j] = sigmoid(po[j]);
            }
            let [i, f, g, o] = pre;
            let mut cell = vec![0.0; d];
            let mut tanh_c = vec![0.0; d];
            let mut hidden = vec![0.0; d];
            for j in 0..d {
                cell[j] = f[j] * prev.cell[j] + i[j] * g[j];
                tanh_c[j] = tanh(cell[j]);
                hidden[j] = o[j] * tanh_c[j];
            }
            if let Some(caches) = caches.as_mut() {
                caches.push(LayerCache {
                    u: input.clone(),
                    h_prev: prev.hidden.clone(),
                    c_prev: prev.cell.clone(),
                    i,
                    f,
                    g,
                    o,
                    tanh_c,
                    h: hidden.clone(),
                });
            }
            input = hidden.clone();
            next_layers.push(LayerState { cell, hidden });
        }

        let top = &next_layers[self.config.layers - 1].hidden;
        let mut y = self.head.b;
        for (w, h) in self.head.w.iter().zip(top) {
            y += w * h;
        }
        (y, CellState { layers: next_layers }, caches)
    }
}

fn flatten_parts(layers: &[LstmLayerWeights], head: &OutputHead) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        for gate in layer.gates() {
            out.extend_from_slice(gate.w.as_slice());
            out.extend_from_slice(gate.u.as_slice());
            out.extend_from_slice(&gate.b);
        }
    }
    out.extend_from_slice(&head.w);
    out.push(head.b);
    out
}

/// Random orthogonal matrix: QR-decompose a square standard-Gaussian
/// matrix by Householder reflections and sign-correct Q so the diagonal
/// of R is non-negative (making the factorization, and therefore the
/// draw, unique).
fn orthogonal(d: usize, rng: &mut Rng) -> Matrix {
    let mut a = Matrix::zeros(d, d);
    for v in a.as_mut_slice() {
        *v = rng.normal();
    }
    let (mut q, r) = householder_qr(&a);
    for j in 0..d {
        if r.at(j, j) < 0.0 {
            for row in 0..d {
                *q.at_mut(row, j) = -q.at(row, j);
            }
        }
    }
    q
}

/// Householder QR of a square matrix: returns (Q, R) with `a = Q * R`
/// and Q orthogonal.
fn householder_qr(a: &Matrix) -> (Matrix, Matrix) {
    let n = a.rows();
    let mut r = a.clone();
    let mut q = Matrix::zeros(n, n);
    for j in 0..n {
        *q.at_mut(j, j) = 1.0;
    }
    let mut v = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let norm = (k..n).map(|i| r.at(i, k) * r.at(i, k)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        // Reflector v = x - alpha * e1 with alpha chosen opposite to
        // x[0]'s sign for numerical stability.
        let alpha = if r.at(k, k) > 0.0 { -norm } else { norm };
        v[k] = r.at(k, k) - alpha;
        for i in k + 1..n {
            v[i] = r.at(i, k);
        }
        let vnorm_sq: f64 = (k..n).map(|i| v[i] * v[i]).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        // R <- H R, applied to the trailing columns.
        for c in k..n {
            let dot: f64 = (k..n).map(|i| v[i] * r.at(i, c)).sum();
            let coef = 2.0 * dot / vnorm_sq;
            for i in k..n {
                *r.at_mut(i, c) -= coef * v[i];
            }
        }
        // Q <- Q H (H is symmetric), accumulating the full product.
        for row in 0..n {
            let dot: f64 = (k..n).map(|i| q.at(row, i) * v[i]).sum();
            let coef = 2.0 * dot / vnorm_sq;
            for i in k..n {
                *q.at_mut(row, i) -= coef * v[i];
            }
        }
    }
    (q, r)
}
