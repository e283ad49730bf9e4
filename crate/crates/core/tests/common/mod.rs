//! Oracles shared by the integration tests. Nothing here calls the code
//! paths it is used to check.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transda::features::Architecture;
use transda::transduction::{EnergyModel, PairwiseTerm};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_diff(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let hi = f(&probe);
            probe[i] = x[i] - step;
            let lo = f(&probe);
            probe[i] = x[i];
            (hi - lo) / (2.0 * step)
        })
        .collect()
}

/// Norm-wise relative error `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Direct double sum `Σ_ab s_a W_ab t_b`.
pub fn bilinear(w: &[f64], d: usize, s: &[f64], t: &[f64]) -> f64 {
    let mut acc = 0.0;
    for a in 0..d {
        for b in 0..d {
            acc += s[a] * w[a * d + b] * t[b];
        }
    }
    acc
}

/// Energy computed straight from the definition.
pub fn energy_oracle(unary: &Array2<f64>, pairwise: &[PairwiseTerm], labels: &[usize]) -> f64 {
    let u: f64 = labels.iter().enumerate().map(|(i, &c)| unary[(i, c)]).sum();
    let p: f64 = pairwise
        .iter()
        .filter(|t| labels[t.a] != labels[t.b])
        .map(|t| t.coefficient)
        .sum();
    u + p
}

/// Calls `visit` on every labeling of `n` nodes over `classes`.
pub fn for_each_labeling(n: usize, classes: &[usize], mut visit: impl FnMut(&[usize])) {
    let k = classes.len();
    let mut digits = vec![0usize; n];
    let mut labels = vec![classes[0]; n];
    loop {
        visit(&labels);
        let mut pos = 0;
        loop {
            if pos == n {
                return;
            }
            digits[pos] += 1;
            if digits[pos] < k {
                labels[pos] = classes[digits[pos]];
                break;
            }
            digits[pos] = 0;
            labels[pos] = classes[0];
            pos += 1;
        }
    }
}

/// Exhaustive minimum energy over all labelings with admissible classes.
pub fn brute_force_min(unary: &Array2<f64>, pairwise: &[PairwiseTerm], classes: &[usize]) -> (f64, Vec<usize>) {
    let mut best = (f64::INFINITY, Vec::new());
    for_each_labeling(unary.nrows(), classes, |l| {
        let e = energy_oracle(unary, pairwise, l);
        if e < best.0 {
            best = (e, l.to_vec());
        }
    });
    best
}

/// Enumerates every alpha-beta swap move from `labels` and returns the
/// lowest energy reachable by a single move.
pub fn best_single_swap(
    unary: &Array2<f64>,
    pairwise: &[PairwiseTerm],
    labels: &[usize],
    alpha: usize,
    beta: usize,
) -> f64 {
    let movable: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == alpha || labels[i] == beta)
        .collect();
    let mut best = f64::INFINITY;
    let mut cand = labels.to_vec();
    for mask in 0u32..(1 << movable.len()) {
        for (b, &i) in movable.iter().enumerate() {
            cand[i] = if mask >> b & 1 == 1 { beta } else { alpha };
        }
        best = best.min(energy_oracle(unary, pairwise, &cand));
    }
    best
}

/// True when no single swap move lowers the energy by more than `tol`.
pub fn is_swap_local_optimum(
    unary: &Array2<f64>,
    pairwise: &[PairwiseTerm],
    classes: &[usize],
    labels: &[usize],
    tol: f64,
) -> bool {
    let e = energy_oracle(unary, pairwise, labels);
    for (x, &a) in classes.iter().enumerate() {
        for &b in &classes[x + 1..] {
            if best_single_swap(unary, pairwise, labels, a, b) < e - tol {
                return false;
            }
        }
    }
    true
}

/// Random Potts instance: `n` nodes, `k` classes, each pair joined with
/// probability one half, nonnegative coefficients.
pub struct Instance {
    pub unary: Array2<f64>,
    pub pairwise: Vec<PairwiseTerm>,
    pub classes: Vec<usize>,
}

impl Instance {
    pub fn random(rng: &mut impl Rng, n: usize, k: usize) -> Self {
        let unary = Array2::from_shape_fn((n, k), |_| rng.random_range(-1.0..0.0));
        let lambda = rng.random_range(0.0..1.5);
        let mut pairwise = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.5) {
                    pairwise.push(PairwiseTerm {
                        a,
                        b,
                        coefficient: lambda * rng.random_range(0.0..1.0),
                    });
                }
            }
        }
        Self {
            unary,
            pairwise,
            classes: (0..k).collect(),
        }
    }

    pub fn model(&self) -> EnergyModel {
        EnergyModel::new(self.unary.clone(), vec![true; self.unary.ncols()], self.pairwise.clone()).unwrap()
    }
}

/// Cosine similarity from the definition, zero for near-zero vectors.
pub fn cosine_oracle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Feature map written out from the parameter layout, independent of the
/// library's forward pass. Also reports the smallest |pre-activation|.
pub fn forward_oracle(arch: Architecture, theta: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
    let affine = |a: &[f64], b: &[f64], rows: usize, cols: usize, v: &[f64]| -> Vec<f64> {
        (0..rows)
            .map(|r| b[r] + (0..cols).map(|c| a[r * cols + c] * v[c]).sum::<f64>())
            .collect()
    };
    match arch {
        Architecture::Precomputed { .. } => (x.to_vec(), f64::INFINITY),
        Architecture::Linear { d_in, d_out } => {
            let (a, b) = theta.split_at(d_out * d_in);
            (affine(a, b, d_out, d_in, x), f64::INFINITY)
        }
        Architecture::Mlp1 { d_in, d_hidden, d_out } => {
            let (a1, rest) = theta.split_at(d_hidden * d_in);
            let (b1, rest) = rest.split_at(d_hidden);
            let (a2, b2) = rest.split_at(d_out * d_hidden);
            let pre = affine(a1, b1, d_hidden, d_in, x);
            let kink = pre.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            let h: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
            (affine(a2, b2, d_out, d_hidden, &h), kink)
        }
    }
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
