//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::f64::consts::PI;

use lgpca::loggabor::FrequencyFilter;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Spatial kernel of a frequency-domain filter by direct inverse DFT.
pub fn spatial_kernel(filter: &FrequencyFilter) -> Vec<Complex64> {
    let (w, h) = (filter.width, filter.height);
    let mut kernel = vec![Complex64::new(0.0, 0.0); w * h];
    for q in 0..h {
        for p in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for v in 0..h {
                for u in 0..w {
                    let phase = 2.0 * PI * ((u * p) as f64 / w as f64 + (v * q) as f64 / h as f64);
                    acc += filter.gains[v * w + u] * Complex64::from_polar(1.0, phase);
                }
            }
            kernel[q * w + p] = acc / (w * h) as f64;
        }
    }
    kernel
}

/// `y[n] = Σ_m x[m] k[(n - m) mod N]` in two dimensions.
pub fn circular_convolve(image: &[f64], kernel: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for ny in 0..h {
        for nx in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for my in 0..h {
                for mx in 0..w {
                    let kx = (nx + w - mx) % w;
                    let ky = (ny + h - my) % h;
                    acc += image[my * w + mx] * kernel[ky * w + kx];
                }
            }
            out[ny * w + nx] = acc;
        }
    }
    out
}

pub struct DensePca {
    pub mean: Vec<f64>,
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Eigenvectors matching `values`.
    pub vectors: Vec<Vec<f64>>,
}

/// Eigendecomposition of the full `d x d` sample covariance (divisor n-1).
pub fn dense_pca(x: &[Vec<f64>]) -> DensePca {
    let n = x.len();
    let d = x[0].len();
    let mut mean = vec![0.0; d];
    for row in x {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n as f64);
    }
    let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    DensePca {
        mean,
        values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect(),
    }
}

/// Sine of the largest principal angle between the spans of two sets of
/// orthonormal columns, bounded above by `‖B - A Aᵀ B‖_F`.
pub fn subspace_sine(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = a[0].len();
    let mut total = 0.0;
    for bj in b {
        let mut resid = bj.clone();
        for ai in a {
            let c: f64 = ai.iter().zip(bj).map(|(x, y)| x * y).sum();
            for t in 0..d {
                resid[t] -= c * ai[t];
            }
        }
        total += resid.iter().map(|r| r * r).sum::<f64>();
    }
    total.sqrt()
}

/// Best one-to-one assignment over finite entries: most pairs first, then
/// least total cost. Exhaustive over all partial matchings.
pub fn brute_force_assignment(costs: &[Vec<Option<f64>>]) -> (Vec<(usize, usize)>, f64) {
    fn go(
        costs: &[Vec<Option<f64>>],
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        cost: f64,
        best: &mut (Vec<(usize, usize)>, f64),
    ) {
        if row == costs.len() {
            let better = current.len() > best.0.len() || (current.len() == best.0.len() && cost < best.1);
            if better {
                *best = (current.clone(), cost);
            }
            return;
        }
        go(costs, row + 1, used, current, cost, best);
        for (c, entry) in costs[row].iter().enumerate() {
            if let (Some(v), false) = (entry, used[c]) {
                used[c] = true;
                current.push((row, c));
                go(costs, row + 1, used, current, cost + v, best);
                current.pop();
                used[c] = false;
            }
        }
    }
    let cols = costs.iter().map(Vec::len).max().unwrap_or(0);
    let mut best = (Vec::new(), f64::INFINITY);
    go(costs, 0, &mut vec![false; cols], &mut Vec::new(), 0.0, &mut best);
    if best.0.is_empty() {
        best.1 = 0.0;
    }
    best.0.sort_unstable();
    best
}

/// Random `rows x cols` cost matrix with pairwise distinct finite costs;
/// each entry is gated out with probability `gate`.
pub fn random_costs(rng: &mut ChaCha8Rng, rows: usize, cols: usize, gate: f64) -> Vec<Vec<Option<f64>>> {
    let mut pool: Vec<f64> = Vec::new();
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    let v = loop {
                        let v: f64 = rng.random_range(0.0..40.0);
                        if pool.iter().all(|&p| p != v) {
                            break v;
                        }
                    };
                    pool.push(v);
                    (!rng.random_bool(gate)).then_some(v)
                })
                .collect()
        })
        .collect()
}

/// 8-connected components by breadth-first flood fill, each as a sorted
/// pixel list; components sorted by their first pixel.
pub fn flood_components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; mask.len()];
    let mut comps = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            comp.push((x, y));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comps.push(comp);
    }
    canonical(comps)
}

/// Orders each component's pixels by `(y, x)` and the components by their
/// first pixel, so differently discovered labelings compare equal.
pub fn canonical(mut comps: Vec<Vec<(usize, usize)>>) -> Vec<Vec<(usize, usize)>> {
    for c in &mut comps {
        c.sort_by_key(|&(x, y)| (y, x));
    }
    comps.sort_by_key(|c| c.first().map(|&(x, y)| (y, x)));
    comps
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    (0..w * h).map(|_| rng.random_range(0.0..1.0)).collect()
}
