//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use advbound::data::EmpiricalMarginal;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Transportation LP `min Σ c_ij x_ij` s.t. row sums `p`, column sums `n`.
pub fn lp_transport(cost: &[Vec<f64>], p: &[f64], n: &[f64]) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = cost
        .iter()
        .map(|row| row.iter().map(|&c| lp.add_var(c, (0.0, f64::INFINITY))).collect())
        .collect();
    for (i, &pi) in p.iter().enumerate() {
        let terms: Vec<_> = vars[i].iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(&terms[..], ComparisonOp::Eq, pi);
    }
    // The last column constraint is implied by the others.
    for (j, &nj) in n.iter().enumerate().take(n.len() - 1) {
        let terms: Vec<_> = vars.iter().map(|row| (row[j], 1.0)).collect();
        lp.add_constraint(&terms[..], ComparisonOp::Eq, nj);
    }
    lp.solve().expect("transport LP is feasible").objective()
}

/// `min_σ (1/k) Σ_i c_{i,σ(i)}` by enumerating permutations (uniform square
/// marginals, where an optimal plan is a permutation).
pub fn assignment_enumeration(cost: &[Vec<f64>]) -> f64 {
    fn rec(cost: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                rec(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best / cost.len() as f64
}

/// `∫ |F_P − F_N|` for measures on the line.
pub fn w1_cdf(xs: &[f64], p: &[f64], ys: &[f64], q: &[f64]) -> f64 {
    let mut events: Vec<(f64, f64)> = xs.iter().zip(p).map(|(&x, &m)| (x, m)).collect();
    events.extend(ys.iter().zip(q).map(|(&y, &m)| (y, -m)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for k in 0..events.len() {
        diff += events[k].1;
        if k + 1 < events.len() {
            total += diff.abs() * (events[k + 1].0 - events[k].0);
        }
    }
    total
}

pub fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn random_points(rng: &mut ChaCha8Rng, k: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..k).map(|_| (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()).collect()
}

pub fn random_mass(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|m| m / s).collect()
}

pub fn random_marginal(rng: &mut ChaCha8Rng, max_len: usize, dim: usize, scale: f64) -> EmpiricalMarginal {
    let k = rng.gen_range(1..=max_len);
    let pts = random_points(rng, k, dim, scale);
    let mass = random_mass(rng, k);
    EmpiricalMarginal::new(pts, mass).unwrap()
}

/// Log loss of a score: `log(1 + e^{−y v})`.
pub fn log_loss(y: f64, v: f64) -> f64 {
    let z = -y * v;
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Square loss of a score in [−1,1] under `c = (1+v)/2`.
pub fn square_loss(y: f64, v: f64) -> f64 {
    assert!((-1.0..=1.0).contains(&v));
    let c = (1.0 + v) / 2.0;
    if y > 0.0 {
        (1.0 - c) * (1.0 - c)
    } else {
        c * c
    }
}

/// Gaussian kernel written out independently.
pub fn rbf(bw: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
    move |x, y| {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (2.0 * bw * bw)).exp()
    }
}

/// `‖π μ_P − (1−π) μ_N‖` from explicit Gram sums on already transformed points.
pub fn mmd_gram(k: &dyn Fn(&[f64], &[f64]) -> f64, xp: &[Vec<f64>], mp: &[f64], xn: &[Vec<f64>], mn: &[f64], pi: f64) -> f64 {
    let mut atoms: Vec<(&[f64], f64)> = xp.iter().zip(mp).map(|(x, m)| (x.as_slice(), pi * m)).collect();
    atoms.extend(xn.iter().zip(mn).map(|(x, m)| (x.as_slice(), -(1.0 - pi) * m)));
    let mut s = 0.0;
    for (x, a) in &atoms {
        for (y, b) in &atoms {
            s += a * b * k(x, y);
        }
    }
    s.max(0.0).sqrt()
}

/// Same quantity for the linear kernel on `(x, 1)`, via explicit features.
pub fn mmd_affine(xp: &[Vec<f64>], mp: &[f64], xn: &[Vec<f64>], mn: &[f64], pi: f64) -> f64 {
    let d = xp[0].len();
    let mut v = vec![0.0; d + 1];
    for (x, m) in xp.iter().zip(mp) {
        for k in 0..d {
            v[k] += pi * m * x[k];
        }
        v[d] += pi * m;
    }
    for (x, m) in xn.iter().zip(mn) {
        for k in 0..d {
            v[k] -= (1.0 - pi) * m * x[k];
        }
        v[d] -= (1.0 - pi) * m;
    }
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Simpson's rule on `[lo, hi]` with `2k` panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}
