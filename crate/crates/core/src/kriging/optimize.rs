//! Hybrid genetic algorithm with a Nelder–Mead polish, used for the
//! leave-one-out length-scale search. Works in a box; deterministic for a
//! given RNG state.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    /// Stop the GA after this many generations without improvement of the best.
    pub stall_generations: usize,
    pub polish_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Objective value of every GA population member that was evaluated.
    pub population_values: Vec<f64>,
    pub evaluations: usize,
    pub generations: usize,
}

const ELITE: usize = 2;
const BLX_ALPHA: f64 = 0.5;

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub fn hybrid_minimize<F>(
    f: F,
    bounds: &[(f64, f64)],
    settings: &GaSettings,
    seeds: &[Vec<f64>],
    rng: &mut Rng,
) -> OptimResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = bounds.len();
    let pop_size = settings.population.max(4);
    let mut evaluations = 0usize;
    let mut population_values = Vec::new();

    let mut pop: Vec<Vec<f64>> = seeds
        .iter()
        .take(pop_size)
        .map(|s| {
            let mut s = s.clone();
            clamp_into(&mut s, bounds);
            s
        })
        .collect();
    while pop.len() < pop_size {
        pop.push(
            bounds
                .iter()
                .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
                .collect(),
        );
    }

    let eval_all =
        |pop: &[Vec<f64>]| -> Vec<f64> { pop.par_iter().map(|x| sanitize(f(x))).collect() };

    let mut fitness = eval_all(&pop);
    evaluations += pop.len();
    population_values.extend_from_slice(&fitness);

    let argmin = |v: &[f64]| {
        v.iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap()
    };
    let i0 = argmin(&fitness);
    let mut best = pop[i0].clone();
    let mut best_value = fitness[i0];

    let mut stall = 0usize;
    let mut generations = 0usize;
    while generations < settings.generations && stall < settings.stall_generations.max(1) {
        generations += 1;
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));

        let mut next: Vec<Vec<f64>> = order.iter().take(ELITE).map(|&i| pop[i].clone()).collect();
        let tournament = |rng: &mut Rng| {
            let a = rng.gen_range(0..pop.len());
            let b = rng.gen_range(0..pop.len());
            if fitness[a] <= fitness[b] {
                a
            } else {
                b
            }
        };
        while next.len() < pop_size {
            let p1 = &pop[tournament(rng)];
            let p2 = &pop[tournament(rng)];
            let mut child: Vec<f64> = (0..dim)
                .map(|j| {
                    let (a, b) = (p1[j].min(p2[j]), p1[j].max(p2[j]));
                    let d = b - a;
                    let t: f64 = rng.gen();
                    a - BLX_ALPHA * d + t * (1.0 + 2.0 * BLX_ALPHA) * d
                })
                .collect();
            for (j, (lo, hi)) in bounds.iter().enumerate() {
                if rng.gen::<f64>() < 1.0 / dim as f64 {
                    let z: f64 = rng.sample(StandardNormal);
                    child[j] += 0.1 * (hi - lo) * z;
                }
            }
            clamp_into(&mut child, bounds);
            next.push(child);
        }

        // elites keep their known fitness
        let elite_fit: Vec<f64> = order.iter().take(ELITE).map(|&i| fitness[i]).collect();
        let fresh = eval_all(&next[ELITE..]);
        evaluations += fresh.len();
        population_values.extend_from_slice(&fresh);
        pop = next;
        fitness = elite_fit.into_iter().chain(fresh).collect();

        let i = argmin(&fitness);
        if fitness[i] < best_value {
            best_value = fitness[i];
            best = pop[i].clone();
            stall = 0;
        } else {
            stall += 1;
        }
    }

    let (polished, polished_value, nm_evals) =
        nelder_mead(&f, &best, best_value, bounds, settings.polish_iterations);
    evaluations += nm_evals;
    if polished_value < best_value {
        best = polished;
        best_value = polished_value;
    }

    OptimResult {
        best,
        best_value,
        population_values,
        evaluations,
        generations,
    }
}

/// Box-clamped Nelder–Mead. Returns (point, value, evaluations).
pub fn nelder_mead<F>(
    f: &F,
    start: &[f64],
    start_value: f64,
    bounds: &[(f64, f64)],
    max_iter: usize,
) -> (Vec<f64>, f64, usize)
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    if max_iter == 0 || n == 0 {
        return (start.to_vec(), start_value, 0);
    }
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        sanitize(f(x))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), start_value)];
    for j in 0..n {
        let (lo, hi) = bounds[j];
        let step = 0.05 * (hi - lo);
        let mut x = start.to_vec();
        x[j] = if x[j] + step <= hi {
            x[j] + step
        } else {
            x[j] - step
        };
        let v = eval(&x);
        simplex.push((x, v));
    }

    let clamp = |mut x: Vec<f64>| {
        clamp_into(&mut x, bounds);
        x
    };

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() <= 1e-12 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect(),
            )
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&p.0)
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    let v = eval(&x);
                    *p = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals)
}
