//! Model-based policy search with a model-bias risk penalty.
//!
//! Rollouts use the M×N scheme: `M` weight draws from the posterior, and for
//! each draw `N` trajectories that only resample the latent inputs and the
//! output noise. Three objectives are available:
//!
//! - expected cost: `(1/MN) Σ_{m,n,t} c_{m,n}(t)`
//! - standard-deviation risk: `E[C] + β σ(C)` over episode costs `C`
//! - model-bias risk: `Σ_t { E[c_t] + β σ̂_M( (1/N) Σ_n c_{m,n}(t) ) }`
//!
//! The last one penalizes only the spread of per-weight expected costs, an
//! upper bound on the expected absolute gap between the cost predicted by
//! the model and the cost under the true dynamics. Gradients are pathwise:
//! all draws are held fixed and the objective is backpropagated through the
//! simulated trajectories.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bnn::BnnPosterior;
use crate::envs::{GroundTruthMdp, MdpCost};
use crate::mlp::{MlpArch, MlpParams, Trace};
use crate::optim::Adam;
use crate::rng::{derive_seed, stream, StreamRng};
use crate::stats::{mean, unbiased_std};
use crate::{Error, Result};

/// Stochastic dynamics driven by explicit standard-normal draws.
pub trait TransitionModel {
    type Weights;
    type Workspace;

    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Standard normals consumed per transition.
    fn noise_dim(&self) -> usize;
    fn draw_weights(&self, rng: &mut StreamRng) -> Self::Weights;
    fn workspace(&self) -> Self::Workspace;
    fn step(
        &self,
        w: &Self::Weights,
        ws: &mut Self::Workspace,
        s: &[f64],
        a: &[f64],
        noise: &[f64],
        next: &mut [f64],
    );
    /// Pull `cot_next` back through one transition to the state and action.
    #[allow(clippy::too_many_arguments)]
    fn step_vjp(
        &self,
        w: &Self::Weights,
        ws: &mut Self::Workspace,
        s: &[f64],
        a: &[f64],
        noise: &[f64],
        cot_next: &[f64],
        ds: &mut [f64],
        da: &mut [f64],
    );
}

/// Differentiable per-state cost.
pub trait CostFunction {
    fn cost(&self, s: &[f64]) -> f64;
    fn cost_gradient(&self, s: &[f64], out: &mut [f64]);
}

impl CostFunction for MdpCost {
    fn cost(&self, s: &[f64]) -> f64 {
        self.value(s[0])
    }

    fn cost_gradient(&self, s: &[f64], out: &mut [f64]) {
        out[0] = self.derivative(s[0]);
    }
}

impl CostFunction for GroundTruthMdp {
    fn cost(&self, s: &[f64]) -> f64 {
        self.cost.value(s[0])
    }

    fn cost_gradient(&self, s: &[f64], out: &mut [f64]) {
        out[0] = self.cost.derivative(s[0]);
    }
}

/// Scratch for one BNN transition.
#[derive(Debug, Clone)]
pub struct BnnStepWorkspace {
    trace: Trace,
    input: Vec<f64>,
    input_grad: Vec<f64>,
}

impl BnnPosterior {
    fn fill_step_input(&self, ws: &mut BnnStepWorkspace, s: &[f64], a: &[f64], xi: f64) {
        let ds = s.len();
        ws.input[..ds].copy_from_slice(s);
        ws.input[ds..ds + a.len()].copy_from_slice(a);
        ws.input[ds + a.len()] = self.prior_latent_variance.sqrt() * xi;
    }
}

/// The learned dynamics `s' = f(s ⊕ a ⊕ z; W) + ε`. Noise layout per step:
/// `[ξ, η_1..η_d]` with `z = √γ ξ`, `ε_j = √Σ_j η_j`.
///
/// The action width is `feature_dim − state_dim`, where the state width is
/// the network's output width.
impl TransitionModel for BnnPosterior {
    type Weights = MlpParams;
    type Workspace = BnnStepWorkspace;

    fn state_dim(&self) -> usize {
        self.arch.output_dim()
    }

    fn action_dim(&self) -> usize {
        self.feature_dim() - self.arch.output_dim()
    }

    fn noise_dim(&self) -> usize {
        1 + self.arch.output_dim()
    }

    fn draw_weights(&self, rng: &mut StreamRng) -> MlpParams {
        self.sample_weights(rng)
    }

    fn workspace(&self) -> BnnStepWorkspace {
        BnnStepWorkspace {
            trace: Trace::new(&self.arch),
            input: vec![0.0; self.arch.input_dim()],
            input_grad: vec![0.0; self.arch.input_dim()],
        }
    }

    fn step(
        &self,
        w: &MlpParams,
        ws: &mut BnnStepWorkspace,
        s: &[f64],
        a: &[f64],
        noise: &[f64],
        next: &mut [f64],
    ) {
        self.fill_step_input(ws, s, a, noise[0]);
        let f = ws.trace.forward(&self.arch, &w.values, &ws.input);
        for (j, o) in next.iter_mut().enumerate() {
            *o = f[j] + self.output_noise_variance[j].sqrt() * noise[1 + j];
        }
    }

    fn step_vjp(
        &self,
        w: &MlpParams,
        ws: &mut BnnStepWorkspace,
        s: &[f64],
        a: &[f64],
        noise: &[f64],
        cot_next: &[f64],
        ds: &mut [f64],
        da: &mut [f64],
    ) {
        self.fill_step_input(ws, s, a, noise[0]);
        ws.trace.forward(&self.arch, &w.values, &ws.input);
        ws.trace
            .backward(&self.arch, &w.values, cot_next, None, &mut ws.input_grad);
        let d = s.len();
        ds.copy_from_slice(&ws.input_grad[..d]);
        da.copy_from_slice(&ws.input_grad[d..d + a.len()]);
    }
}

/// The ground-truth simulator as a (weightless) transition model, one
/// standard normal per step.
impl TransitionModel for GroundTruthMdp {
    type Weights = ();
    type Workspace = ();

    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn draw_weights(&self, _rng: &mut StreamRng) {}

    fn workspace(&self) {}

    fn step(&self, _: &(), _: &mut (), s: &[f64], a: &[f64], noise: &[f64], next: &mut [f64]) {
        next[0] = GroundTruthMdp::step(self, s[0], a[0], noise[0]);
    }

    fn step_vjp(
        &self,
        _: &(),
        _: &mut (),
        s: &[f64],
        a: &[f64],
        noise: &[f64],
        cot_next: &[f64],
        ds: &mut [f64],
        da: &mut [f64],
    ) {
        let raw = self.raw_step(s[0], a[0], noise[0]);
        if raw > self.state_low && raw < self.state_high {
            ds[0] = cot_next[0] * (1.0 + self.noise_scale_derivative(s[0]) * noise[0]);
            da[0] = cot_next[0];
        } else {
            ds[0] = 0.0;
            da[0] = 0.0;
        }
    }
}

/// Deterministic policy `a = low + (high − low)(tanh(g(s)) + 1)/2` with a
/// rectifier network `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub arch: MlpArch,
    pub params: MlpParams,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl PolicyNet {
    /// Weights from `N(0, 1/fan_in)`.
    pub fn new(
        state_dim: usize,
        hidden: &[usize],
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let arch = MlpArch::with_hidden(state_dim, hidden, action_low.len())?;
        let mut rng = stream(seed, &[0x9011C7]);
        let values = arch
            .fan_in_per_param()
            .into_iter()
            .map(|f| rng.sample::<f64, _>(StandardNormal) / (f as f64).sqrt())
            .collect();
        let p = Self {
            arch,
            params: MlpParams { values },
            action_low,
            action_high,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.check(&self.arch)?;
        if self.action_low.len() != self.arch.output_dim()
            || self.action_high.len() != self.arch.output_dim()
        {
            return Err(Error::shape("one action bound per policy output required"));
        }
        if self
            .action_low
            .iter()
            .zip(&self.action_high)
            .any(|(l, h)| !(l < h))
        {
            return Err(Error::invalid("action bounds must satisfy low < high"));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.arch.output_dim()
    }

    /// Action for state `s`, leaving the forward trace in `trace`.
    pub fn act_with(&self, trace: &mut Trace, s: &[f64], out: &mut [f64]) {
        let o = trace.forward(&self.arch, &self.params.values, s);
        for j in 0..out.len() {
            let half = 0.5 * (self.action_high[j] - self.action_low[j]);
            out[j] = self.action_low[j] + half * (o[j].tanh() + 1.0);
        }
    }

    pub fn act(&self, s: &[f64]) -> Vec<f64> {
        let mut trace = Trace::new(&self.arch);
        let mut a = vec![0.0; self.action_dim()];
        self.act_with(&mut trace, s, &mut a);
        a
    }

    /// Reverse pass after [`PolicyNet::act_with`]. Parameter gradients are
    /// added into `param_grad`; `ds` is overwritten.
    fn act_vjp(&self, trace: &mut Trace, cot_a: &[f64], scratch: &mut [f64], param_grad: &mut [f64], ds: &mut [f64]) {
        let o = trace.output();
        for j in 0..cot_a.len() {
            let half = 0.5 * (self.action_high[j] - self.action_low[j]);
            let t = o[j].tanh();
            scratch[j] = cot_a[j] * half * (1.0 - t * t);
        }
        trace.backward(&self.arch, &self.params.values, scratch, Some(param_grad), ds);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskMode {
    /// Expected cost only.
    None,
    /// Standard deviation of the episode cost.
    Stddev,
    /// Spread of per-weight expected costs (model bias).
    Bias,
}

impl std::str::FromStr for RiskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RiskMode::None),
            "stddev" => Ok(RiskMode::Stddev),
            "bias" => Ok(RiskMode::Bias),
            other => Err(Error::invalid(format!(
                "unknown risk mode '{other}' (expected none, stddev or bias)"
            ))),
        }
    }
}

impl std::fmt::Display for RiskMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RiskMode::None => "none",
            RiskMode::Stddev => "stddev",
            RiskMode::Bias => "bias",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutConfig {
    pub horizon: usize,
    pub weight_draws: usize,
    pub noise_draws: usize,
    pub beta: f64,
    pub risk_mode: RiskMode,
    /// Start states averaged per gradient step.
    pub starts_per_step: usize,
    pub seed: u64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            weight_draws: 50,
            noise_draws: 25,
            beta: 0.0,
            risk_mode: RiskMode::Bias,
            starts_per_step: 1,
            seed: 0,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.weight_draws == 0 || self.noise_draws == 0 {
            return Err(Error::invalid("horizon, weight_draws and noise_draws must be positive"));
        }
        if self.starts_per_step == 0 {
            return Err(Error::invalid("starts_per_step must be positive"));
        }
        match self.risk_mode {
            RiskMode::Bias if self.weight_draws < 2 => {
                Err(Error::invalid("the bias objective needs at least two weight draws"))
            }
            RiskMode::Stddev if self.weight_draws * self.noise_draws < 2 => {
                Err(Error::invalid("the stddev objective needs at least two rollouts"))
            }
            _ if !self.beta.is_finite() => Err(Error::invalid("beta must be finite")),
            _ => Ok(()),
        }
    }

    /// β < 0 rewards risk instead of penalizing it.
    pub fn is_risk_seeking(&self) -> bool {
        self.beta < 0.0
    }
}

/// Every draw behind one M×N batch.
#[derive(Debug, Clone)]
pub struct RolloutNoise<W> {
    pub weights: Vec<W>,
    /// `(m, n, t, j)` row-major, `noise_dim` entries per step.
    pub steps: Vec<f64>,
}

impl<W> RolloutNoise<W> {
    /// Weight draw `m` comes from stream `(master, m)`, and the step noise
    /// of rollout `(m, n)` from stream `(master, m, n)`.
    pub fn sample<T: TransitionModel<Weights = W>>(model: &T, config: &RolloutConfig, master: u64) -> Self {
        let (mm, nn, tt, nd) = (config.weight_draws, config.noise_draws, config.horizon, model.noise_dim());
        let weights = (0..mm)
            .map(|m| model.draw_weights(&mut stream(master, &[0x57, m as u64])))
            .collect();
        let mut steps = Vec::with_capacity(mm * nn * tt * nd);
        for m in 0..mm {
            for n in 0..nn {
                let mut r = stream(master, &[0x5E, m as u64, n as u64]);
                steps.extend((0..tt * nd).map(|_| r.sample::<f64, _>(StandardNormal)));
            }
        }
        Self { weights, steps }
    }
}

/// Simulated costs and states.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub weight_draws: usize,
    pub noise_draws: usize,
    pub horizon: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    /// `c_{m,n}(t)` for `t = 1..T`, stored `(m, n, t − 1)`.
    pub costs: Vec<f64>,
    /// `s_{m,n}(t)` for `t = 0..T`, stored `(m, n, t, j)`.
    pub states: Vec<f64>,
    /// `a_{m,n}(t)` for `t = 0..T−1`, stored `(m, n, t, j)`.
    pub actions: Vec<f64>,
}

impl RolloutBatch {
    /// Batch from a raw cost tensor (no states), for objective evaluation.
    pub fn from_costs(weight_draws: usize, noise_draws: usize, horizon: usize, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != weight_draws * noise_draws * horizon || costs.is_empty() {
            return Err(Error::shape("cost tensor does not match M×N×T"));
        }
        Ok(Self {
            weight_draws,
            noise_draws,
            horizon,
            state_dim: 0,
            action_dim: 0,
            costs,
            states: Vec::new(),
            actions: Vec::new(),
        })
    }

    pub fn cost(&self, m: usize, n: usize, t: usize) -> f64 {
        self.costs[(m * self.noise_draws + n) * self.horizon + t]
    }

    pub fn state(&self, m: usize, n: usize, t: usize) -> &[f64] {
        let i = ((m * self.noise_draws + n) * (self.horizon + 1) + t) * self.state_dim;
        &self.states[i..i + self.state_dim]
    }

    pub fn action(&self, m: usize, n: usize, t: usize) -> &[f64] {
        let i = ((m * self.noise_draws + n) * self.horizon + t) * self.action_dim;
        &self.actions[i..i + self.action_dim]
    }

    /// `(1/MN) Σ_{m,n} c_{m,n}(t)` for every `t`.
    pub fn mean_cost_per_step(&self) -> Vec<f64> {
        let rollouts = (self.weight_draws * self.noise_draws) as f64;
        let mut out = vec![0.0; self.horizon];
        for r in self.costs.chunks(self.horizon) {
            for (o, c) in out.iter_mut().zip(r) {
                *o += c;
            }
        }
        out.iter_mut().for_each(|o| *o /= rollouts);
        out
    }

    /// Episode cost `C_{m,n}` of every rollout.
    pub fn episode_costs(&self) -> Vec<f64> {
        self.costs.chunks(self.horizon).map(|r| r.iter().sum()).collect()
    }

    /// `(1/N) Σ_n c_{m,n}(t)` as `means[t][m]`.
    pub fn per_weight_means(&self) -> Vec<Vec<f64>> {
        let (mm, nn, tt) = (self.weight_draws, self.noise_draws, self.horizon);
        let mut out = vec![vec![0.0; mm]; tt];
        for m in 0..mm {
            for n in 0..nn {
                for (t, row) in out.iter_mut().enumerate() {
                    row[m] += self.cost(m, n, t);
                }
            }
        }
        for row in &mut out {
            row.iter_mut().for_each(|v| *v /= nn as f64);
        }
        out
    }
}

fn check_start<T: TransitionModel>(model: &T, policy: &PolicyNet, s0: &[f64]) -> Result<()> {
    if s0.len() != model.state_dim() || policy.state_dim() != model.state_dim() {
        return Err(Error::shape(format!(
            "start state has length {}, model state {}, policy input {}",
            s0.len(),
            model.state_dim(),
            policy.state_dim()
        )));
    }
    if policy.action_dim() != model.action_dim() {
        return Err(Error::shape("policy and model disagree on the action width"));
    }
    if s0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("start state must be finite"));
    }
    Ok(())
}

/// Roll out all `M × N` trajectories for fixed draws.
pub fn simulate<T: TransitionModel, C: CostFunction>(
    model: &T,
    cost: &C,
    policy: &PolicyNet,
    s0: &[f64],
    config: &RolloutConfig,
    noise: &RolloutNoise<T::Weights>,
) -> Result<RolloutBatch> {
    check_start(model, policy, s0)?;
    let (mm, nn, tt) = (config.weight_draws, config.noise_draws, config.horizon);
    let (d, ad, nd) = (model.state_dim(), model.action_dim(), model.noise_dim());
    if noise.weights.len() != mm || noise.steps.len() != mm * nn * tt * nd {
        return Err(Error::shape("rollout noise does not match the configuration"));
    }
    let mut ws = model.workspace();
    let mut ptrace = Trace::new(&policy.arch);
    let mut costs = Vec::with_capacity(mm * nn * tt);
    let mut states = Vec::with_capacity(mm * nn * (tt + 1) * d);
    let mut actions = Vec::with_capacity(mm * nn * tt * ad);
    let mut a = vec![0.0; ad];
    let mut s = vec![0.0; d];
    let mut next = vec![0.0; d];
    for m in 0..mm {
        let w = &noise.weights[m];
        for n in 0..nn {
            s.copy_from_slice(s0);
            states.extend_from_slice(&s);
            let base = (m * nn + n) * tt * nd;
            for t in 0..tt {
                policy.act_with(&mut ptrace, &s, &mut a);
                let z = &noise.steps[base + t * nd..base + (t + 1) * nd];
                model.step(w, &mut ws, &s, &a, z, &mut next);
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { m, n, t: t + 1 });
                }
                actions.extend_from_slice(&a);
                states.extend_from_slice(&next);
                costs.push(cost.cost(&next));
                std::mem::swap(&mut s, &mut next);
            }
        }
    }
    Ok(RolloutBatch {
        weight_draws: mm,
        noise_draws: nn,
        horizon: tt,
        state_dim: d,
        action_dim: ad,
        costs,
        states,
        actions,
    })
}

/// Draw noise from `rng` and simulate.
pub fn rollout_batch<T: TransitionModel, C: CostFunction, R: Rng + ?Sized>(
    model: &T,
    cost: &C,
    policy: &PolicyNet,
    s0: &[f64],
    config: &RolloutConfig,
    rng: &mut R,
) -> Result<RolloutBatch> {
    config.validate()?;
    let noise = RolloutNoise::sample(model, config, rng.random());
    simulate(model, cost, policy, s0, config, &noise)
}

/// `(1/MN) Σ_{m,n,t} c_{m,n}(t)`.
pub fn expected_cost_objective(batch: &RolloutBatch) -> f64 {
    batch.costs.iter().sum::<f64>() / (batch.weight_draws * batch.noise_draws) as f64
}

/// `E[C] + β σ(C)`, unbiased standard deviation over all `M·N` episodes.
pub fn stddev_risk_objective(batch: &RolloutBatch, beta: f64) -> Result<f64> {
    if batch.weight_draws * batch.noise_draws < 2 {
        return Err(Error::invalid("the stddev objective needs at least two rollouts"));
    }
    Ok(expected_cost_objective(batch) + beta * unbiased_std(&batch.episode_costs()))
}

/// `Σ_t { E[c_t] + β σ̂_M(per-weight mean of c_t) }`.
pub fn bias_risk_objective(batch: &RolloutBatch, beta: f64) -> Result<f64> {
    if batch.weight_draws < 2 {
        return Err(Error::invalid("the bias objective needs at least two weight draws"));
    }
    let risk: f64 = batch.per_weight_means().iter().map(|mu| unbiased_std(mu)).sum();
    Ok(expected_cost_objective(batch) + beta * risk)
}

pub fn objective(batch: &RolloutBatch, mode: RiskMode, beta: f64) -> Result<f64> {
    match mode {
        RiskMode::None => Ok(expected_cost_objective(batch)),
        RiskMode::Stddev => stddev_risk_objective(batch, beta),
        RiskMode::Bias => bias_risk_objective(batch, beta),
    }
}

/// Objective value and `∂J/∂c_{m,n}(t)` in cost-tensor order.
fn objective_adjoint(batch: &RolloutBatch, mode: RiskMode, beta: f64) -> Result<(f64, Vec<f64>)> {
    let value = objective(batch, mode, beta)?;
    let (mm, nn, tt) = (batch.weight_draws, batch.noise_draws, batch.horizon);
    let base = 1.0 / (mm * nn) as f64;
    let mut adj = vec![base; batch.costs.len()];
    match mode {
        RiskMode::None => {}
        RiskMode::Stddev => {
            let c = batch.episode_costs();
            let sd = unbiased_std(&c);
            if sd > 0.0 {
                let cbar = mean(&c);
                let denom = (c.len() - 1) as f64 * sd;
                for (r, &cr) in c.iter().enumerate() {
                    let g = base + beta * (cr - cbar) / denom;
                    adj[r * tt..(r + 1) * tt].iter_mut().for_each(|v| *v = g);
                }
            }
        }
        RiskMode::Bias => {
            for (t, mu) in batch.per_weight_means().iter().enumerate() {
                let sd = unbiased_std(mu);
                if sd <= 0.0 {
                    continue;
                }
                let mbar = mean(mu);
                for m in 0..mm {
                    let g = base + beta * (mu[m] - mbar) / ((mm - 1) as f64 * sd) / nn as f64;
                    for n in 0..nn {
                        adj[(m * nn + n) * tt + t] = g;
                    }
                }
            }
        }
    }
    Ok((value, adj))
}

/// Objective and gradient with respect to the policy parameters.
#[derive(Debug, Clone)]
pub struct PolicyGradient {
    pub objective: f64,
    pub gradient: MlpParams,
    pub batch: RolloutBatch,
}

/// Objective for fixed draws, without gradients.
pub fn objective_with_noise<T: TransitionModel, C: CostFunction>(
    model: &T,
    cost: &C,
    policy: &PolicyNet,
    s0: &[f64],
    config: &RolloutConfig,
    noise: &RolloutNoise<T::Weights>,
) -> Result<f64> {
    config.validate()?;
    let batch = simulate(model, cost, policy, s0, config, noise)?;
    objective(&batch, config.risk_mode, config.beta)
}

/// Pathwise gradient for fixed draws. Accumulation runs over `m` then `n`
/// in ascending order, so the result is bit-reproducible.
pub fn gradient_with_noise<T: TransitionModel, C: CostFunction>(
    model: &T,
    cost: &C,
    policy: &PolicyNet,
    s0: &[f64],
    config: &RolloutConfig,
    noise: &RolloutNoise<T::Weights>,
) -> Result<PolicyGradient> {
    config.validate()?;
    let batch = simulate(model, cost, policy, s0, config, noise)?;
    let (value, adj) = objective_adjoint(&batch, config.risk_mode, config.beta)?;
    let (mm, nn, tt) = (config.weight_draws, config.noise_draws, config.horizon);
    let (d, ad, nd) = (model.state_dim(), model.action_dim(), model.noise_dim());

    let mut ws = model.workspace();
    let mut ptrace = Trace::new(&policy.arch);
    let mut grad = vec![0.0; policy.arch.num_params()];
    let mut lambda = vec![0.0; d];
    let mut ds = vec![0.0; d];
    let mut da = vec![0.0; ad];
    let mut ds_pol = vec![0.0; d];
    let mut cgrad = vec![0.0; d];
    let mut a = vec![0.0; ad];
    let mut scratch = vec![0.0; ad];

    for m in 0..mm {
        let w = &noise.weights[m];
        for n in 0..nn {
            let r = m * nn + n;
            let base = r * tt * nd;
            cost.cost_gradient(batch.state(m, n, tt), &mut cgrad);
            for j in 0..d {
                lambda[j] = adj[r * tt + tt - 1] * cgrad[j];
            }
            for t in (0..tt).rev() {
                let s = batch.state(m, n, t);
                let z = &noise.steps[base + t * nd..base + (t + 1) * nd];
                model.step_vjp(w, &mut ws, s, batch.action(m, n, t), z, &lambda, &mut ds, &mut da);
                policy.act_with(&mut ptrace, s, &mut a);
                policy.act_vjp(&mut ptrace, &da, &mut scratch, &mut grad, &mut ds_pol);
                for j in 0..d {
                    lambda[j] = ds[j] + ds_pol[j];
                }
                if t >= 1 {
                    cost.cost_gradient(s, &mut cgrad);
                    for j in 0..d {
                        lambda[j] += adj[r * tt + t - 1] * cgrad[j];
                    }
                }
            }
        }
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!("policy parameter {i}")));
    }
    Ok(PolicyGradient {
        objective: value,
        gradient: MlpParams { values: grad },
        batch,
    })
}

/// Draw noise from `rng`, then [`gradient_with_noise`].
pub fn policy_gradient<T: TransitionModel, C: CostFunction, R: Rng + ?Sized>(
    model: &T,
    cost: &C,
    policy: &PolicyNet,
    s0: &[f64],
    config: &RolloutConfig,
    rng: &mut R,
) -> Result<PolicyGradient> {
    config.validate()?;
    let noise = RolloutNoise::sample(model, config, rng.random());
    gradient_with_noise(model, cost, policy, s0, config, &noise)
}

#[derive(Debug, Clone)]
pub struct PolicyTraining {
    pub policy: PolicyNet,
    pub objective_trace: Vec<f64>,
}

/// Adam on the configured objective; each step draws its start states
/// uniformly from `starts`.
#[allow(clippy::too_many_arguments)]
pub fn train_policy<T: TransitionModel, C: CostFunction>(
    model: &T,
    cost: &C,
    initial: &PolicyNet,
    starts: &[Vec<f64>],
    config: &RolloutConfig,
    train_steps: usize,
    step_size: f64,
    seed: u64,
) -> Result<PolicyTraining> {
    config.validate()?;
    initial.validate()?;
    if starts.is_empty() {
        return Err(Error::invalid("start-state pool is empty"));
    }
    if !(step_size > 0.0) {
        return Err(Error::invalid("step_size must be positive"));
    }
    let mut policy = initial.clone();
    let mut opt = Adam::new(policy.params.values.len(), step_size);
    let mut trace = Vec::with_capacity(train_steps);
    let k = config.starts_per_step;
    for step in 0..train_steps {
        let mut rng = stream(seed, &[0x7A, step as u64]);
        let mut grad = vec![0.0; policy.params.values.len()];
        let mut value = 0.0;
        for j in 0..k {
            let s0 = &starts[rng.random_range(0..starts.len())];
            let noise = RolloutNoise::sample(model, config, derive_seed(seed, &[0x7B, step as u64, j as u64]));
            let g = gradient_with_noise(model, cost, &policy, s0, config, &noise).map_err(|e| match e {
                Error::NonFiniteState { .. } | Error::NonFiniteGradient(_) => Error::Diverged { step },
                e => e,
            })?;
            value += g.objective / k as f64;
            for (acc, gi) in grad.iter_mut().zip(&g.gradient.values) {
                *acc += gi / k as f64;
            }
        }
        if !value.is_finite() {
            return Err(Error::Diverged { step });
        }
        trace.push(value);
        opt.step(&mut policy.params.values, &grad);
        if policy.params.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    Ok(PolicyTraining {
        policy,
        objective_trace: trace,
    })
}

/// Per-timestep and summed gap between model-predicted and true expected
/// cost, averaged over a start-state pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBiasReport {
    pub per_timestep: Vec<f64>,
    pub bias: f64,
    pub expected_true_cost: f64,
    pub expected_model_cost: f64,
}

/// Compare `reps_true` ground-truth rollouts with `M × N` model rollouts
/// from every start state.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_model_bias<T: TransitionModel>(
    policy: &PolicyNet,
    model: &T,
    mdp: &GroundTruthMdp,
    start_pool: &[Vec<f64>],
    reps_true: usize,
    config: &RolloutConfig,
    seed: u64,
) -> Result<ModelBiasReport> {
    if reps_true == 0 {
        return Err(Error::invalid("reps_true must be at least 1"));
    }
    if start_pool.is_empty() {
        return Err(Error::invalid("start-state pool is empty"));
    }
    let model_cfg = RolloutConfig {
        risk_mode: RiskMode::None,
        ..config.clone()
    };
    model_cfg.validate()?;
    let true_cfg = RolloutConfig {
        weight_draws: 1,
        noise_draws: reps_true,
        risk_mode: RiskMode::None,
        ..config.clone()
    };
    let tt = config.horizon;
    let mut per_t = vec![0.0; tt];
    let mut true_cost = 0.0;
    let mut model_cost = 0.0;
    for (i, s0) in start_pool.iter().enumerate() {
        let tn = RolloutNoise::sample(mdp, &true_cfg, derive_seed(seed, &[0xB1, i as u64]));
        let truth = simulate(mdp, mdp, policy, s0, &true_cfg, &tn)?.mean_cost_per_step();
        let mn = RolloutNoise::sample(model, &model_cfg, derive_seed(seed, &[0xB2, i as u64]));
        let pred = simulate(model, mdp, policy, s0, &model_cfg, &mn)?.mean_cost_per_step();
        for t in 0..tt {
            per_t[t] += (truth[t] - pred[t]).abs();
        }
        true_cost += truth.iter().sum::<f64>();
        model_cost += pred.iter().sum::<f64>();
    }
    let k = start_pool.len() as f64;
    per_t.iter_mut().for_each(|v| *v /= k);
    Ok(ModelBiasReport {
        bias: per_t.iter().sum(),
        per_timestep: per_t,
        expected_true_cost: true_cost / k,
        expected_model_cost: model_cost / k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierConfig {
    pub rollout: RolloutConfig,
    pub policy_hidden: Vec<usize>,
    pub train_steps: usize,
    pub step_size: f64,
    /// Start states drawn from the pool for evaluation.
    pub eval_starts: usize,
    pub reps_true: usize,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            rollout: RolloutConfig::default(),
            policy_hidden: vec![20, 20],
            train_steps: 2000,
            step_size: 1e-3,
            eval_starts: 20,
            reps_true: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierRecord {
    pub beta: f64,
    pub seed: u64,
    pub expected_model_cost: f64,
    pub expected_true_cost: f64,
    pub model_bias: f64,
}

/// Evaluation start states: `count` draws from `starts`, fixed by `seed`.
pub fn pick_starts(starts: &[Vec<f64>], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, &[0xE5]);
    (0..count)
        .map(|_| starts[rng.random_range(0..starts.len())].clone())
        .collect()
}

/// Train and evaluate one policy per `(β, seed)`.
pub fn frontier<T: TransitionModel>(
    model: &T,
    mdp: &GroundTruthMdp,
    starts: &[Vec<f64>],
    betas: &[f64],
    risk_mode: RiskMode,
    seeds: &[u64],
    config: &FrontierConfig,
) -> Result<Vec<FrontierRecord>> {
    if betas.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("betas and seeds must be nonempty"));
    }
    if starts.is_empty() {
        return Err(Error::invalid("start-state pool is empty"));
    }
    let eval_pool = pick_starts(starts, config.eval_starts.max(1), config.rollout.seed);
    let mut out = Vec::with_capacity(betas.len() * seeds.len());
    for &beta in betas {
        for &seed in seeds {
            let rcfg = RolloutConfig {
                beta,
                risk_mode,
                ..config.rollout.clone()
            };
            let init = PolicyNet::new(
                mdp.state_dim(),
                &config.policy_hidden,
                vec![mdp.action_low],
                vec![mdp.action_high],
                seed,
            )?;
            let trained = train_policy(model, mdp, &init, starts, &rcfg, config.train_steps, config.step_size, seed)?;
            let report = evaluate_model_bias(
                &trained.policy,
                model,
                mdp,
                &eval_pool,
                config.reps_true,
                &rcfg,
                derive_seed(config.rollout.seed, &[0xF0]),
            )?;
            out.push(FrontierRecord {
                beta,
                seed,
                expected_model_cost: report.expected_model_cost,
                expected_true_cost: report.expected_true_cost,
                model_bias: report.bias,
            });
        }
    }
    Ok(out)
}
