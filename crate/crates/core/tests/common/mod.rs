//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls the crate's solvers: gains come from exact stationary
//! distributions obtained by Gaussian elimination.

#![allow(dead_code)]

use scalplus::mdp::{DiscreteMdp, RandomizedPolicy};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-14, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - tail) / a[i][i];
    }
    x
}

/// Transition matrix and reward vector of a stationary policy.
pub fn policy_chain(mdp: &DiscreteMdp, pi: &RandomizedPolicy) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = mdp.num_states();
    let mut p = vec![vec![0.0; n]; n];
    let mut r = vec![0.0; n];
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            let w = pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            r[s] += w * mdp.reward(s, a);
            for (j, q) in mdp.kernel(s, a).iter().enumerate() {
                p[s][j] += w * q;
            }
        }
    }
    (p, r)
}

/// Stationary distribution of an irreducible chain: `pi P = pi`, `sum pi = 1`.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    // Rows 0..n-1 of (P^T - I), with the last replaced by the normalisation.
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve_linear(a, b)
}

/// Exact gain of a policy whose chain is irreducible.
pub fn exact_policy_gain(mdp: &DiscreteMdp, pi: &RandomizedPolicy) -> f64 {
    let (p, r) = policy_chain(mdp, pi);
    stationary(&p).iter().zip(&r).map(|(x, y)| x * y).sum()
}

/// All deterministic policies as action vectors.
pub fn deterministic_policies(num_states: usize, num_actions: usize) -> Vec<Vec<usize>> {
    let total = num_actions.pow(num_states as u32);
    (0..total)
        .map(|mut code| {
            (0..num_states)
                .map(|_| {
                    let a = code % num_actions;
                    code /= num_actions;
                    a
                })
                .collect()
        })
        .collect()
}

/// Best gain over deterministic policies, by enumeration. Requires every
/// deterministic policy to induce an irreducible chain.
pub fn brute_force_gain(mdp: &DiscreteMdp) -> f64 {
    deterministic_policies(mdp.num_states(), mdp.num_actions())
        .into_iter()
        .map(|acts| {
            let pi = RandomizedPolicy::deterministic(mdp.num_actions(), &acts).unwrap();
            exact_policy_gain(mdp, &pi)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `r_pi(s) + P_pi(s) . v`.
pub fn policy_backup(mdp: &DiscreteMdp, pi: &RandomizedPolicy, v: &[f64]) -> Vec<f64> {
    let (p, r) = policy_chain(mdp, pi);
    (0..v.len())
        .map(|s| r[s] + p[s].iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
