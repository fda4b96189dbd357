//! Real-coded genetic algorithm with feasibility-first ranking.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    DesignProblem, Evaluation, OptimizationResult, OptimizerSettings, Recorder, Termination,
    FEASIBILITY_TOLERANCE,
};
use crate::error::Result;
use crate::par;

#[derive(Debug, Clone)]
struct Individual {
    x: Vec<f64>,
    objective: f64,
    violation: f64,
}

impl Individual {
    fn feasible(&self) -> bool {
        self.violation <= FEASIBILITY_TOLERANCE
    }
}

/// Feasible before infeasible; feasible by objective, infeasible by violation.
fn rank(a: &Individual, b: &Individual) -> Ordering {
    match (a.feasible(), b.feasible()) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => a.objective.total_cmp(&b.objective),
        (false, false) => a.violation.total_cmp(&b.violation),
    }
}

fn evaluate_all<P: DesignProblem>(p: &P, xs: Vec<Vec<f64>>) -> Vec<Individual> {
    let evals = par::map_slice(&xs, |x| p.evaluate(x).ok());
    xs.into_iter()
        .zip(evals)
        .map(|(x, e)| match e {
            Some(e) => {
                let violation = e.max_violation();
                let objective = if e.objective.is_finite() {
                    e.objective
                } else {
                    f64::INFINITY
                };
                Individual {
                    x,
                    objective,
                    violation: if violation.is_nan() {
                        f64::INFINITY
                    } else {
                        violation
                    },
                }
            }
            None => Individual {
                x,
                objective: f64::INFINITY,
                violation: f64::INFINITY,
            },
        })
        .collect()
}

fn tournament<'a>(pop: &'a [Individual], k: usize, rng: &mut ChaCha8Rng) -> &'a Individual {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..k {
        let c = &pop[rng.gen_range(0..pop.len())];
        if rank(c, best) == Ordering::Less {
            best = c;
        }
    }
    best
}

pub fn optimize_ga<P: DesignProblem>(
    p: &P,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    let cfg = &settings.ga;
    let lo = p.lower();
    let hi = p.upper();
    let n = lo.len();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut rec = Recorder::new(settings);

    let mut x0 = p.initial();
    super::clamp(&mut x0, &lo, &hi);
    // the initial design must be analyzable; report that failure directly
    p.evaluate(&x0)?;
    let mut xs = vec![x0.clone()];
    while xs.len() < cfg.population {
        xs.push((0..n).map(|j| rng.gen_range(lo[j]..=hi[j])).collect());
    }
    let mut pop = evaluate_all(p, xs);
    rec.evaluations += pop.len();
    pop.sort_by(rank);
    let log = |rec: &mut Recorder, gen: usize, pop: &[Individual]| {
        let b = &pop[0];
        rec.record(
            gen,
            &b.x,
            &Evaluation {
                objective: b.objective,
                constraints: vec![b.violation],
            },
        );
    };
    log(&mut rec, 0, &pop);

    let normals: Vec<Normal<f64>> = (0..n)
        .map(|j| {
            Normal::new(0.0, (cfg.mutation_scale * (hi[j] - lo[j])).max(1e-300))
                .expect("finite sigma")
        })
        .collect();
    let mut generation = 0;
    let termination = loop {
        if generation >= cfg.generations {
            break Termination::IterationLimit;
        }
        if rec.out_of_time() {
            break Termination::TimeLimit;
        }
        let mut children: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
        while children.len() < cfg.population - cfg.elite {
            let a = tournament(&pop, cfg.tournament, &mut rng).x.clone();
            let b = tournament(&pop, cfg.tournament, &mut rng).x.clone();
            let mut child = if rng.gen::<f64>() < cfg.crossover_rate {
                (0..n)
                    .map(|j| {
                        let (mn, mx) = if a[j] <= b[j] {
                            (a[j], b[j])
                        } else {
                            (b[j], a[j])
                        };
                        let ext = cfg.blend_alpha * (mx - mn);
                        let (l, h) = (mn - ext, mx + ext);
                        if h > l {
                            rng.gen_range(l..=h)
                        } else {
                            l
                        }
                    })
                    .collect()
            } else {
                a
            };
            for j in 0..n {
                if rng.gen::<f64>() < cfg.mutation_rate {
                    child[j] += normals[j].sample(&mut rng);
                }
            }
            super::clamp(&mut child, &lo, &hi);
            children.push(child);
        }
        let mut next: Vec<Individual> = pop[..cfg.elite].to_vec();
        let evaluated = evaluate_all(p, children);
        rec.evaluations += evaluated.len();
        next.extend(evaluated);
        next.sort_by(rank);
        pop = next;
        generation += 1;
        log(&mut rec, generation, &pop);
    };
    rec.finish(p, &pop[0].x, generation, termination)
}
