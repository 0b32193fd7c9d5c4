//! Ground-truth generators: two stochastic regression toys and a synthetic
//! stochastic MDP with a behaviour-policy data collector.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::bnn::Dataset;
use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyKind {
    /// `y = 7 sin x + 3 |cos(x/2)| ε`, x from a three-component mixture.
    Heteroskedastic,
    /// `y = 10 sin x + ε` or `y = 10 cos x + ε` with equal probability.
    Bimodal,
}

/// A one-dimensional stochastic function `y | x` with its input law.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticFunctionEnv {
    kind: ToyKind,
}

const MIXTURE_MEANS: [f64; 3] = [-4.0, 0.0, 4.0];
const MIXTURE_STDS: [f64; 3] = [0.4, 0.9, 0.4];
const BIMODAL_RATE: f64 = 0.5;
const BIMODAL_DOMAIN: (f64, f64) = (-0.5, 2.0);

pub fn heteroskedastic_env() -> StochasticFunctionEnv {
    StochasticFunctionEnv {
        kind: ToyKind::Heteroskedastic,
    }
}

pub fn bimodal_env() -> StochasticFunctionEnv {
    StochasticFunctionEnv {
        kind: ToyKind::Bimodal,
    }
}

impl StochasticFunctionEnv {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "heteroskedastic" => Ok(heteroskedastic_env()),
            "bimodal" => Ok(bimodal_env()),
            other => Err(Error::invalid(format!(
                "unknown environment '{other}' (expected heteroskedastic or bimodal)"
            ))),
        }
    }

    pub fn kind(&self) -> ToyKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ToyKind::Heteroskedastic => "heteroskedastic",
            ToyKind::Bimodal => "bimodal",
        }
    }

    /// Interval used for evaluation grids and held-out test inputs.
    pub fn domain(&self) -> (f64, f64) {
        match self.kind {
            ToyKind::Heteroskedastic => (-6.0, 6.0),
            ToyKind::Bimodal => BIMODAL_DOMAIN,
        }
    }

    pub fn sample_input<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            ToyKind::Heteroskedastic => {
                let c = rng.random_range(0..3);
                let z: f64 = rng.sample(StandardNormal);
                MIXTURE_MEANS[c] + MIXTURE_STDS[c] * z
            }
            ToyKind::Bimodal => {
                let exp = Exp::new(BIMODAL_RATE).unwrap();
                loop {
                    let x = exp.sample(rng);
                    if (BIMODAL_DOMAIN.0..=BIMODAL_DOMAIN.1).contains(&x) {
                        return x;
                    }
                }
            }
        }
    }

    pub fn sample_output<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let eps: f64 = rng.sample(StandardNormal);
        match self.kind {
            ToyKind::Heteroskedastic => 7.0 * x.sin() + 3.0 * (x / 2.0).cos().abs() * eps,
            ToyKind::Bimodal => {
                if rng.random_bool(0.5) {
                    10.0 * x.sin() + eps
                } else {
                    10.0 * x.cos() + eps
                }
            }
        }
    }

    /// Closed-form `H(y | x)` in nats where it exists and is finite.
    pub fn analytic_conditional_entropy(&self, x: f64) -> Option<f64> {
        match self.kind {
            ToyKind::Heteroskedastic => {
                let var = 9.0 * (x / 2.0).cos().powi(2);
                (var > 0.0).then(|| {
                    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln()
                })
            }
            ToyKind::Bimodal => None,
        }
    }
}

/// `n` i.i.d. `(x, y)` pairs, deterministic per seed.
pub fn make_dataset(env: &StochasticFunctionEnv, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    let mut rng = stream(seed, &[0xDA7A]);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = env.sample_input(&mut rng);
        xs.push(x);
        ys.push(env.sample_output(x, &mut rng));
    }
    Dataset::from_flat(n, 1, 1, xs, ys)
}

/// Cost as a function of the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MdpCost {
    /// `1 − exp(−(s − target)² / (2 width²))`.
    Bowl { target: f64, width: f64 },
    Constant(f64),
}

impl MdpCost {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            MdpCost::Bowl { target, width } => {
                let u = (s - target) / width;
                1.0 - (-0.5 * u * u).exp()
            }
            MdpCost::Constant(c) => c,
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            MdpCost::Bowl { target, width } => {
                let u = (s - target) / width;
                (-0.5 * u * u).exp() * u / width
            }
            MdpCost::Constant(_) => 0.0,
        }
    }
}

/// One-dimensional stochastic MDP
/// `s' = clamp(s + a + σ(s) z)`, `σ(s) = floor + gain · logistic((s − center) / width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMdp {
    pub state_low: f64,
    pub state_high: f64,
    pub action_low: f64,
    pub action_high: f64,
    pub noise_floor: f64,
    pub noise_gain: f64,
    pub noise_center: f64,
    pub noise_width: f64,
    pub cost: MdpCost,
    pub init_low: f64,
    pub init_high: f64,
    pub horizon: usize,
}

/// States in `[0, 10]`, actions in `[−1, 1]`, low-cost region around 9
/// reachable only through the noisy zone above 6.
pub fn narrow_passage_mdp() -> GroundTruthMdp {
    GroundTruthMdp {
        state_low: 0.0,
        state_high: 10.0,
        action_low: -1.0,
        action_high: 1.0,
        noise_floor: 0.05,
        noise_gain: 0.45,
        noise_center: 6.0,
        noise_width: 0.3,
        cost: MdpCost::Bowl {
            target: 9.0,
            width: 1.0,
        },
        init_low: 0.0,
        init_high: 2.0,
        horizon: 100,
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

impl GroundTruthMdp {
    pub fn state_dim(&self) -> usize {
        1
    }

    pub fn action_dim(&self) -> usize {
        1
    }

    pub fn noise_scale(&self, s: f64) -> f64 {
        self.noise_floor + self.noise_gain * logistic((s - self.noise_center) / self.noise_width)
    }

    pub fn noise_scale_derivative(&self, s: f64) -> f64 {
        let l = logistic((s - self.noise_center) / self.noise_width);
        self.noise_gain * l * (1.0 - l) / self.noise_width
    }

    /// Unclamped successor; the result of [`GroundTruthMdp::step`] clamps it.
    pub fn raw_step(&self, s: f64, a: f64, z: f64) -> f64 {
        s + a + self.noise_scale(s) * z
    }

    pub fn step(&self, s: f64, a: f64, z: f64) -> f64 {
        self.raw_step(s, a, z).clamp(self.state_low, self.state_high)
    }

    pub fn cost(&self, s: f64) -> f64 {
        self.cost.value(s)
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.init_low..self.init_high)
    }

    fn behavior_action<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        let a: f64 = if s < 5.0 {
            rng.random_range(-1.0..1.0)
        } else {
            Normal::new(-0.3, 0.2).unwrap().sample(rng)
        };
        a.clamp(self.action_low, self.action_high)
    }
}

/// Logged `(s, a, s')` triples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBatch {
    pub state_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub next_states: Vec<f64>,
}

impl TransitionBatch {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        states: Vec<f64>,
        actions: Vec<f64>,
        next_states: Vec<f64>,
    ) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::shape("state and action dimensions must be positive"));
        }
        let n = states.len() / state_dim;
        if states.len() != n * state_dim
            || next_states.len() != n * state_dim
            || actions.len() != n * action_dim
        {
            return Err(Error::shape("transition buffers have inconsistent lengths"));
        }
        Ok(Self {
            state_dim,
            action_dim,
            states,
            actions,
            next_states,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.state_dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_dim..(i + 1) * self.action_dim]
    }

    pub fn next_state(&self, i: usize) -> &[f64] {
        &self.next_states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    /// Every logged state, usable as a start-state pool.
    pub fn starts(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.state(i).to_vec()).collect()
    }

    /// Regression data `(s ⊕ a) → s'`.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let d = self.state_dim + self.action_dim;
        let mut inputs = Vec::with_capacity(self.len() * d);
        for i in 0..self.len() {
            inputs.extend_from_slice(self.state(i));
            inputs.extend_from_slice(self.action(i));
        }
        Dataset::from_flat(self.len(), d, self.state_dim, inputs, self.next_states.clone())
    }
}

/// Roll out the behaviour policy for `episodes × horizon` steps. The policy
/// explores uniformly below `s = 5` and drifts back down above it, so the
/// noisy upper region is rarely observed.
pub fn collect_batch(mdp: &GroundTruthMdp, episodes: usize, seed: u64) -> Result<TransitionBatch> {
    if episodes == 0 {
        return Err(Error::invalid("need at least one episode"));
    }
    let n = episodes * mdp.horizon;
    let mut states = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut next = Vec::with_capacity(n);
    for ep in 0..episodes {
        let mut rng = stream(seed, &[0xC011, ep as u64]);
        let mut s = mdp.sample_initial(&mut rng);
        for _ in 0..mdp.horizon {
            let a = mdp.behavior_action(s, &mut rng);
            let z: f64 = rng.sample(StandardNormal);
            let s1 = mdp.step(s, a, z);
            states.push(s);
            actions.push(a);
            next.push(s1);
            s = s1;
        }
    }
    TransitionBatch::new(1, 1, states, actions, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, unbiased_std};

    #[test]
    fn heteroskedastic_is_noise_free_at_pi() {
        let env = heteroskedastic_env();
        let mut rng = stream(1, &[]);
        for _ in 0..100 {
            let y = env.sample_output(std::f64::consts::PI, &mut rng);
            assert!((y - 7.0 * std::f64::consts::PI.sin()).abs() < 1e-14);
        }
        assert!(env.analytic_conditional_entropy(std::f64::consts::PI).is_some_and(|h| h < -30.0)
            || env.analytic_conditional_entropy(std::f64::consts::PI).is_none());
    }

    #[test]
    fn heteroskedastic_moments_at_zero() {
        let env = heteroskedastic_env();
        let mut rng = stream(2, &[]);
        let ys: Vec<f64> = (0..1_000_000).map(|_| env.sample_output(0.0, &mut rng)).collect();
        let m = mean(&ys);
        let sd = unbiased_std(&ys);
        assert!(m.abs() < 3.0 * 3.0 / 1000.0, "mean {m}");
        assert!((sd - 3.0).abs() < 0.03, "std {sd}");
    }

    #[test]
    fn bimodal_branches() {
        let x = std::f64::consts::FRAC_PI_4;
        assert!((10.0 * x.sin() - 10.0 * x.cos()).abs() < 1e-12);
        assert!((10.0 * x.sin() - 7.071).abs() < 1e-3);
        let sep = 10.0 * 2f64.sin() - 10.0 * 2f64.cos();
        assert!((sep - 13.254).abs() < 1e-3);

        // Branch frequency at x = 2 where the branches are far apart.
        let env = bimodal_env();
        let mut rng = stream(3, &[]);
        let n = 100_000;
        let upper = (0..n).filter(|_| env.sample_output(2.0, &mut rng) > 2.5).count();
        let p = upper as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn bimodal_inputs_stay_in_domain() {
        let env = bimodal_env();
        let d = make_dataset(&env, 2000, 4).unwrap();
        for i in 0..d.len() {
            let x = d.input(i)[0];
            assert!((-0.5..=2.0).contains(&x));
        }
    }

    #[test]
    fn mixture_mass_near_each_mean() {
        let env = heteroskedastic_env();
        let d = make_dataset(&env, 750, 5).unwrap();
        for (mu, sd) in MIXTURE_MEANS.iter().zip(MIXTURE_STDS) {
            let c = (0..d.len()).filter(|&i| (d.input(i)[0] - mu).abs() <= sd).count();
            let frac = c as f64 / 750.0;
            let p: f64 = 0.6827 / 3.0;
            let se = (p * (1.0 - p) / 750.0).sqrt();
            assert!((frac - p).abs() < 4.0 * se, "mean {mu}: {frac}");
        }
    }

    #[test]
    fn datasets_are_deterministic() {
        let env = heteroskedastic_env();
        assert_eq!(make_dataset(&env, 50, 9).unwrap(), make_dataset(&env, 50, 9).unwrap());
        assert_ne!(make_dataset(&env, 50, 9).unwrap(), make_dataset(&env, 50, 10).unwrap());
        assert_eq!(make_dataset(&env, 1, 9).unwrap().len(), 1);
        assert!(make_dataset(&env, 0, 9).is_err());
    }

    #[test]
    fn mdp_closed_forms() {
        let mdp = narrow_passage_mdp();
        assert_eq!(mdp.step(0.0, 0.0, 0.0), 0.0);
        assert!((mdp.noise_scale(0.0) - 0.05).abs() < 1e-8);
        assert_eq!(mdp.cost(9.0), 0.0);
        let off = (2.0 * 2f64.ln()).sqrt();
        assert!((mdp.cost(9.0 + off) - 0.5).abs() < 1e-14);
        assert!((mdp.cost(9.0 - off) - 0.5).abs() < 1e-14);
        assert_eq!(mdp.step(9.8, 1.0, 5.0), 10.0);
        assert_eq!(mdp.step(0.2, -1.0, -5.0), 0.0);
    }

    #[test]
    fn mdp_cost_derivative_matches_differences() {
        let c = narrow_passage_mdp().cost;
        for &s in &[0.0, 5.5, 8.2, 9.0, 9.7] {
            let h = 1e-6;
            let fd = (c.value(s + h) - c.value(s - h)) / (2.0 * h);
            assert!((fd - c.derivative(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn batch_shape_and_coverage() {
        let mdp = narrow_passage_mdp();
        let b = collect_batch(&mdp, 1, 0).unwrap();
        assert_eq!(b.len(), mdp.horizon);
        assert_eq!(collect_batch(&mdp, 3, 7).unwrap(), collect_batch(&mdp, 3, 7).unwrap());
        let b = collect_batch(&mdp, 100, 1).unwrap();
        let high = b.states.iter().filter(|&&s| s > 7.0).count();
        assert!((high as f64) < 0.1 * b.len() as f64);
        assert!(b.states.iter().all(|s| (0.0..=10.0).contains(s)));
        assert!(collect_batch(&mdp, 0, 1).is_err());
        let d = b.to_dataset().unwrap();
        assert_eq!(d.input_dim(), 2);
        assert_eq!(d.output_dim(), 1);
    }
}
