//! Environments: finite MDPs with sampled rewards, built-in fixtures and a
//! smooth one-dimensional continuous environment.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::bonus::Holder;
use crate::continuous::{Discretization, HolderEnv};
use crate::error::{Error, Result};
use crate::mdp::{solve_gain_bias, DiscreteMdp, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::seeding::{self, Role, StreamRng};

/// Something a learner can interact with.
pub trait Environment {
    type State: Copy;
    fn num_actions(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    fn step(&self, s: Self::State, a: usize, rng: &mut StreamRng) -> (f64, Self::State);
    /// Gain `g*` used for regret.
    fn optimal_gain(&self) -> f64;
}

impl<E: HolderEnv + ?Sized> Environment for E {
    type State = f64;

    fn num_actions(&self) -> usize {
        HolderEnv::num_actions(self)
    }

    fn initial_state(&self) -> f64 {
        HolderEnv::initial_state(self)
    }

    fn step(&self, s: f64, a: usize, rng: &mut StreamRng) -> (f64, f64) {
        HolderEnv::step(self, s, a, rng)
    }

    fn optimal_gain(&self) -> f64 {
        self.true_gain().unwrap_or(f64::NAN)
    }
}

/// How rewards are drawn around their mean `r(s,a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    /// `r_max` with probability `r(s,a) / r_max`, otherwise 0.
    #[default]
    Bernoulli,
    /// Always the mean.
    Deterministic,
}

/// A finite MDP with sampled rewards, starting in state 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnv {
    mdp: DiscreteMdp,
    kind: RewardKind,
    gain: f64,
}

impl DiscreteEnv {
    /// Computes `g*` with the exact oracle.
    pub fn new(mdp: DiscreteMdp, kind: RewardKind) -> Result<Self> {
        let gain = solve_gain_bias(&mdp, DEFAULT_TOL, DEFAULT_MAX_ITER)?.gain;
        Ok(Self { mdp, kind, gain })
    }

    pub fn mdp(&self) -> &DiscreteMdp {
        &self.mdp
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.kind
    }

    /// One transition on state indices. Always consumes one uniform draw for
    /// the reward and one for the next state.
    pub fn step_index(&self, s: usize, a: usize, rng: &mut StreamRng) -> (f64, usize) {
        let u: f64 = rng.random();
        let mean = self.mdp.reward(s, a);
        let reward = match self.kind {
            RewardKind::Deterministic => mean,
            RewardKind::Bernoulli => {
                let r_max = self.mdp.r_max();
                if u * r_max < mean {
                    r_max
                } else {
                    0.0
                }
            }
        };
        let next = seeding::sample_index(self.mdp.kernel(s, a), rng);
        (reward, next)
    }
}

impl Environment for DiscreteEnv {
    type State = usize;

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn initial_state(&self) -> usize {
        0
    }

    fn step(&self, s: usize, a: usize, rng: &mut StreamRng) -> (f64, usize) {
        self.step_index(s, a, rng)
    }

    fn optimal_gain(&self) -> f64 {
        self.gain
    }
}

/// Random MDP with exactly `gamma` next states per pair, always including
/// `s + 1 mod S` so every policy is irreducible. Weights are flat-Dirichlet
/// and mean rewards uniform in `[0, 1]`.
pub fn random_mdp(num_states: usize, num_actions: usize, gamma: usize, seed: u64) -> Result<DiscreteMdp> {
    if gamma == 0 || gamma > num_states {
        return Err(Error::BadGamma {
            gamma,
            states: num_states,
        });
    }
    if num_actions == 0 {
        return Err(Error::BadParams("need at least one action".into()));
    }
    let mut rng = seeding::stream(seed, Role::Generator);
    DiscreteMdp::from_fn(num_states, num_actions, 1.0, |s, _| {
        let forced = (s + 1) % num_states;
        let mut support = vec![forced];
        // Remaining states, drawn without replacement from all but `forced`.
        for i in index::sample(&mut rng, num_states - 1, gamma - 1) {
            support.push(if i >= forced { i + 1 } else { i });
        }
        let weights: Vec<f64> = support.iter().map(|_| rng.sample::<f64, _>(Exp1).max(1e-12)).collect();
        let total: f64 = weights.iter().sum();
        let mut row = vec![0.0; num_states];
        for (&j, w) in support.iter().zip(&weights) {
            row[j] = w / total;
        }
        normalise(&mut row);
        let reward: f64 = rng.random();
        (reward, row)
    })
}

/// Forces an exact row sum of 1 by adjusting the largest entry.
fn normalise(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    let (imax, _) = row.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
    );
    row[imax] += 1.0 - total;
}

/// Mean reward of the left action in the leftmost chain state.
pub const CHAIN_LEFT_REWARD: f64 = 0.005;

/// RiverSwim-style chain. Action 0 ("left") moves one state left
/// deterministically and pays [`CHAIN_LEFT_REWARD`] in state 0. Action 1
/// ("right") moves right with probability 0.6, stays with 0.35 and slips left
/// with 0.05; at the ends the slip mass folds into staying (state 0) or the
/// right move becomes staying (last state, 0.6 stay, 0.4 left). Action 1
/// pays 1 in the last state.
pub fn chain_env(num_states: usize) -> Result<DiscreteMdp> {
    if num_states < 2 {
        return Err(Error::BadParams("chain needs at least 2 states".into()));
    }
    let last = num_states - 1;
    DiscreteMdp::from_fn(num_states, 2, 1.0, |s, a| {
        let mut row = vec![0.0; num_states];
        if a == 0 {
            row[s.saturating_sub(1)] = 1.0;
            let r = if s == 0 { CHAIN_LEFT_REWARD } else { 0.0 };
            return (r, row);
        }
        if s == last {
            row[s] = 0.6;
            row[s - 1] = 0.4;
            return (1.0, row);
        }
        row[s + 1] = 0.6;
        if s == 0 {
            row[s] = 0.4;
        } else {
            row[s] = 0.35;
            row[s - 1] = 0.05;
        }
        (0.0, row)
    })
}

/// Two states, one action, deterministic alternation; rewards 0 then 1.
pub fn two_cycle() -> DiscreteMdp {
    DiscreteMdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![0.0, 1.0], 1.0).expect("two-cycle fixture is valid")
}

/// Piecewise-constant continuous view of a finite MDP: state `x` behaves like
/// its interval and moves to interval centres. Random draws match
/// [`DiscreteEnv`] one for one, so `L = 0` learners see identical data.
#[derive(Debug, Clone)]
pub struct AlignedEnv {
    inner: DiscreteEnv,
    grid: Discretization,
}

impl AlignedEnv {
    pub fn new(inner: DiscreteEnv) -> Result<Self> {
        let grid = Discretization::new(inner.mdp().num_states())?;
        Ok(Self { inner, grid })
    }

    pub fn discretization(&self) -> Discretization {
        self.grid
    }
}

impl HolderEnv for AlignedEnv {
    fn num_actions(&self) -> usize {
        self.inner.mdp().num_actions()
    }

    fn r_max(&self) -> f64 {
        self.inner.mdp().r_max()
    }

    fn holder(&self) -> Holder {
        Holder {
            lipschitz: 0.0,
            alpha: 1.0,
        }
    }

    fn initial_state(&self) -> f64 {
        self.grid.centre(0)
    }

    fn step(&self, s: f64, a: usize, rng: &mut StreamRng) -> (f64, f64) {
        let j = self.grid.index(s).expect("aligned states stay in [0, 1]");
        let (r, next) = self.inner.step_index(j, a, rng);
        (r, self.grid.centre(next))
    }

    fn true_gain(&self) -> Option<f64> {
        Some(self.inner.optimal_gain())
    }
}

/// Mean shift of the two smooth-environment actions.
pub const SMOOTH_DRIFT: f64 = 0.4;
/// Grid size of the pinned gain computation.
pub const PIN_CELLS: usize = 2000;

const PINS: &str = include_str!("../../data/smooth_gain_pins.txt");

/// Smooth environment on `[0, 1]` with two actions.
///
/// Next state: `fold(s + d_a + sigma Z)` with `Z` standard normal,
/// `d_0 = -SMOOTH_DRIFT`, `d_1 = +SMOOTH_DRIFT`, and `fold` the reflection into `[0, 1]`.
/// With `sigma = sqrt(2/pi) / L` the kernels satisfy
/// `|p(.|s,a) - p(.|s',a)|_1 <= L |s - s'|`.
/// Rewards are Bernoulli with mean `0.05 + kappa (1 - cos(pi s)) / 2`,
/// `kappa = min(0.9, 2L/pi)`, which is `L`-Lipschitz. Lipschitz on `[0, 1]`
/// implies Hölder for every `alpha` in `(0, 1]` with the same `L`.
///
/// The mirrored variant conjugates everything by `s -> 1 - s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEnv {
    lipschitz: f64,
    alpha: f64,
    sigma: f64,
    kappa: f64,
    mirrored: bool,
    gain: f64,
}

impl SmoothEnv {
    /// Uses the pinned gain for `L` when available and otherwise runs the
    /// fine-grid oracle.
    pub fn new(lipschitz: f64, alpha: f64) -> Result<Self> {
        let mut env = Self::unpinned(lipschitz, alpha)?;
        env.gain = match pinned_gain(lipschitz) {
            Some(g) => g,
            None => env.fine_grid_gain(PIN_CELLS)?,
        };
        Ok(env)
    }

    /// Environment with gain NaN; call [`SmoothEnv::fine_grid_gain`] to compute it.
    pub fn unpinned(lipschitz: f64, alpha: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::BadParams(format!("smooth env needs L > 0, got {lipschitz}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::BadParams(format!(
                "smooth env needs alpha in (0, 1], got {alpha}"
            )));
        }
        Ok(Self {
            lipschitz,
            alpha,
            sigma: (2.0 / std::f64::consts::PI).sqrt() / lipschitz,
            kappa: (2.0 * lipschitz / std::f64::consts::PI).min(0.9),
            mirrored: false,
            gain: f64::NAN,
        })
    }

    pub fn mirrored(mut self) -> Self {
        self.mirrored = !self.mirrored;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn reward_mean(&self, s: f64) -> f64 {
        let x = if self.mirrored { 1.0 - s } else { s };
        0.05 + self.kappa * (1.0 - (std::f64::consts::PI * x).cos()) / 2.0
    }

    fn drift(&self, a: usize) -> f64 {
        let d = if a == 0 { -SMOOTH_DRIFT } else { SMOOTH_DRIFT };
        if self.mirrored {
            -d
        } else {
            d
        }
    }

    /// `P(fold(mean + sigma Z) <= b)` for `b` in `[0, 1]`.
    fn folded_cdf(&self, mean: f64, b: f64) -> f64 {
        let phi = |x: f64| 0.5 * erfc(-(x - mean) / (self.sigma * std::f64::consts::SQRT_2));
        let reach = 12.0 * self.sigma + 2.0;
        let lo = ((mean - reach) / 2.0).floor() as i64;
        let hi = ((mean + reach) / 2.0).ceil() as i64;
        (lo..=hi)
            .map(|k| {
                let shift = 2.0 * k as f64;
                phi(shift + b) - phi(shift - b)
            })
            .sum()
    }

    /// Probability of each of `cells` equal cells of `[0, 1]` after one step
    /// from `s` under action `a`.
    pub fn cell_probabilities(&self, s: f64, a: usize, cells: usize) -> Vec<f64> {
        let mean = s + self.drift(a);
        let edges: Vec<f64> = (0..=cells)
            .map(|j| self.folded_cdf(mean, j as f64 / cells as f64))
            .collect();
        let mut row: Vec<f64> = edges.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
        normalise(&mut row);
        row
    }

    /// Midpoint discretisation of the environment on `cells` cells.
    pub fn grid_mdp(&self, cells: usize) -> Result<DiscreteMdp> {
        let grid = Discretization::new(cells)?;
        DiscreteMdp::from_fn(cells, 2, 1.0, |i, a| {
            let x = grid.centre(i);
            (self.reward_mean(x), self.cell_probabilities(x, a, cells))
        })
    }

    /// Optimal gain of the `cells`-cell discretisation.
    pub fn fine_grid_gain(&self, cells: usize) -> Result<f64> {
        Ok(solve_gain_bias(&self.grid_mdp(cells)?, DEFAULT_TOL, DEFAULT_MAX_ITER)?.gain)
    }
}

impl HolderEnv for SmoothEnv {
    fn num_actions(&self) -> usize {
        2
    }

    fn r_max(&self) -> f64 {
        1.0
    }

    fn holder(&self) -> Holder {
        Holder {
            lipschitz: self.lipschitz,
            alpha: self.alpha,
        }
    }

    fn initial_state(&self) -> f64 {
        if self.mirrored {
            1.0
        } else {
            0.0
        }
    }

    fn step(&self, s: f64, a: usize, rng: &mut StreamRng) -> (f64, f64) {
        let u: f64 = rng.random();
        let reward = if u < self.reward_mean(s) { 1.0 } else { 0.0 };
        let z: f64 = rng.sample(StandardNormal);
        let noise = if self.mirrored { -z } else { z };
        (reward, fold(s + self.drift(a) + self.sigma * noise))
    }

    fn true_gain(&self) -> Option<f64> {
        self.gain.is_finite().then_some(self.gain)
    }
}

/// Reflects `y` into `[0, 1]`.
pub fn fold(y: f64) -> f64 {
    let m = y.rem_euclid(2.0);
    if m > 1.0 {
        2.0 - m
    } else {
        m
    }
}

/// Pinned smooth-environment gain for `L`, if one is shipped.
pub fn pinned_gain(lipschitz: f64) -> Option<f64> {
    parse_pins(PINS)
        .into_iter()
        .find(|&(l, _)| l == lipschitz)
        .map(|(_, g)| g)
}

/// Parses `L gain` lines; `#` starts a comment.
pub fn parse_pins(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .filter_map(|line| {
            let line = line.split('#').next()?.trim();
            let mut it = line.split_whitespace();
            let l = it.next()?.parse().ok()?;
            let g = it.next()?.parse().ok()?;
            Some((l, g))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{max_support, policy_gain, solve_gain_bias, RandomizedPolicy};

    #[test]
    fn random_mdp_support_sizes() {
        for (s, gamma) in [(5, 5), (5, 1), (6, 3), (1, 1)] {
            let mdp = random_mdp(s, 3, gamma, 17).unwrap();
            assert_eq!(max_support(&mdp), gamma);
            for st in 0..s {
                for a in 0..3 {
                    let row = mdp.kernel(st, a);
                    assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), gamma);
                    assert!(row[(st + 1) % s] > 0.0);
                }
            }
        }
        assert!(matches!(random_mdp(3, 2, 4, 0), Err(Error::BadGamma { .. })));
        assert!(matches!(random_mdp(3, 2, 0, 0), Err(Error::BadGamma { .. })));
    }

    #[test]
    fn random_mdp_is_seeded() {
        assert_eq!(random_mdp(4, 2, 2, 5).unwrap(), random_mdp(4, 2, 2, 5).unwrap());
        assert_ne!(random_mdp(4, 2, 2, 5).unwrap(), random_mdp(4, 2, 2, 6).unwrap());
    }

    #[test]
    fn chain_fixture_gains() {
        let mdp = chain_env(6).unwrap();
        let opt = solve_gain_bias(&mdp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        // Pinned from the oracle.
        assert!((opt.gain - CHAIN6_GAIN).abs() < 1e-8, "gain {}", opt.gain);
        let left = RandomizedPolicy::deterministic(2, &[0; 6]).unwrap();
        let g_left = policy_gain(&mdp, &left, 1e-12).unwrap();
        assert!((g_left - CHAIN_LEFT_REWARD).abs() < 1e-9);
        let g_uniform = policy_gain(&mdp, &RandomizedPolicy::uniform(6, 2), 1e-12).unwrap();
        assert!(g_uniform < opt.gain);
    }

    const CHAIN6_GAIN: f64 = 0.5789483477316371;

    #[test]
    fn fold_reflects() {
        assert_eq!(fold(0.3), 0.3);
        assert!((fold(-0.2) - 0.2).abs() < 1e-15);
        assert!((fold(1.3) - 0.7).abs() < 1e-15);
        assert!((fold(2.25) - 0.25).abs() < 1e-15);
        assert!((fold(-1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smooth_env_rejects_bad_constants() {
        assert!(SmoothEnv::unpinned(0.0, 1.0).is_err());
        assert!(SmoothEnv::unpinned(1.0, 0.0).is_err());
        assert!(SmoothEnv::unpinned(1.0, 1.5).is_err());
    }

    #[test]
    fn aligned_env_mirrors_discrete_draws() {
        let mdp = random_mdp(4, 2, 3, 1).unwrap();
        let discrete = DiscreteEnv::new(mdp.clone(), RewardKind::Bernoulli).unwrap();
        let aligned = AlignedEnv::new(discrete.clone()).unwrap();
        let mut r1 = seeding::stream(8, Role::Environment);
        let mut r2 = seeding::stream(8, Role::Environment);
        let (mut s, mut x) = (0usize, HolderEnv::initial_state(&aligned));
        for t in 0..200 {
            let a = t % 2;
            let (ra, sn) = discrete.step_index(s, a, &mut r1);
            let (rb, xn) = HolderEnv::step(&aligned, x, a, &mut r2);
            assert_eq!(ra, rb);
            assert_eq!(aligned.discretization().index(xn).unwrap(), sn);
            s = sn;
            x = xn;
        }
    }
}
