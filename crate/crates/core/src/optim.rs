//! Nelder-Mead simplex minimization and low-discrepancy start points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Stop once every vertex lies within this distance of the best one.
    pub xtol: f64,
    /// Or once the relative spread of vertex values falls below this.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            xtol: 1e-9,
            ftol: 1e-15,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn lerp<const N: usize>(a: &[f64; N], b: &[f64; N], t: f64) -> [f64; N] {
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = a[i] + t * (b[i] - a[i]);
    }
    out
}

impl NelderMead {
    /// Minimizes `f` from an axis-aligned simplex around `x0`. NaN values are
    /// treated as `+∞`.
    pub fn minimize<const N: usize, F>(&self, f: F, x0: [f64; N], step: [f64; N]) -> Minimum<N>
    where
        F: Fn(&[f64; N]) -> f64,
    {
        let mut evals = 0usize;
        let mut eval = |x: &[f64; N]| {
            evals += 1;
            finite_or_inf(f(x))
        };
        let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
        simplex.push((x0, eval(&x0)));
        for i in 0..N {
            let mut x = x0;
            x[i] += step[i];
            let fx = eval(&x);
            simplex.push((x, fx));
        }

        let mut iterations = 0;
        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[N].1;
            if !best.is_finite() {
                break;
            }
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(simplex[0].0.iter()).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if size <= self.xtol || (worst - best).abs() <= self.ftol * best.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            let mut centroid = [0.0; N];
            for (x, _) in &simplex[..N] {
                for i in 0..N {
                    centroid[i] += x[i] / N as f64;
                }
            }
            let worst_x = simplex[N].0;
            let refl = lerp(&centroid, &worst_x, -1.0);
            let f_refl = eval(&refl);
            if f_refl < simplex[0].1 {
                let exp = lerp(&centroid, &worst_x, -2.0);
                let f_exp = eval(&exp);
                simplex[N] = if f_exp < f_refl { (exp, f_exp) } else { (refl, f_refl) };
                continue;
            }
            if f_refl < simplex[N - 1].1 {
                simplex[N] = (refl, f_refl);
                continue;
            }
            let (contr, f_contr) = if f_refl < worst {
                let c = lerp(&centroid, &worst_x, -0.5);
                (c, eval(&c))
            } else {
                let c = lerp(&centroid, &worst_x, 0.5);
                (c, eval(&c))
            };
            if f_contr < worst.min(f_refl) {
                simplex[N] = (contr, f_contr);
                continue;
            }
            let best_x = simplex[0].0;
            for vertex in simplex.iter_mut().skip(1) {
                let x = lerp(&best_x, &vertex.0, 0.5);
                *vertex = (x, eval(&x));
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        Minimum {
            x: simplex[0].0,
            fx: simplex[0].1,
            iterations,
            evaluations: evals,
            converged,
        }
    }
}

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// `n` Halton points in `[0,1)^N` shifted modulo 1 by a seeded random vector.
pub fn rotated_halton<const N: usize>(n: usize, seed: u64) -> Vec<[f64; N]> {
    assert!(N <= PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift = [0.0; N];
    for s in shift.iter_mut() {
        *s = rng.random::<f64>();
    }
    (1..=n as u64)
        .map(|i| {
            let mut p = [0.0; N];
            for d in 0..N {
                p[d] = (halton(i, PRIMES[d]) + shift[d]).fract();
            }
            p
        })
        .collect()
}
