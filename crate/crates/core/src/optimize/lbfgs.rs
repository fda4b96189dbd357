//! Limited-memory BFGS with bound projection and Armijo backtracking.
//! Constraints, when present, enter through a quadratic exterior penalty.

use std::collections::VecDeque;

use super::{
    DesignProblem, Evaluation, Gradients, OptimizationResult, OptimizerSettings, Recorder,
    Termination,
};
use crate::error::Result;

fn merit(eval: &Evaluation, penalty: f64) -> f64 {
    eval.objective
        + penalty
            * eval
                .constraints
                .iter()
                .map(|g| g.max(0.0).powi(2))
                .sum::<f64>()
}

fn merit_gradient(eval: &Evaluation, grads: &Gradients, penalty: f64) -> Vec<f64> {
    let mut out = grads.objective.clone();
    for (g, row) in eval.constraints.iter().zip(&grads.constraints) {
        if *g > 0.0 {
            for (o, r) in out.iter_mut().zip(row) {
                *o += 2.0 * penalty * g * r;
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero components that would immediately leave the box.
fn restrict(d: &mut [f64], x: &[f64], lo: &[f64], hi: &[f64]) {
    for i in 0..d.len() {
        if (x[i] <= lo[i] && d[i] < 0.0) || (x[i] >= hi[i] && d[i] > 0.0) {
            d[i] = 0.0;
        }
    }
}

fn projected_gradient_norm(g: &[f64], x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..g.len() {
        let p = (x[i] - g[i]).max(lo[i]).min(hi[i]) - x[i];
        s += p * p;
    }
    s.sqrt()
}

/// Two-loop recursion: −H∇ from the stored pairs.
fn direction(grad: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

pub fn optimize_lbfgs<P: DesignProblem>(
    p: &P,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    let cfg = &settings.lbfgs;
    let lo = p.lower();
    let hi = p.upper();
    let mut x = p.initial();
    super::clamp(&mut x, &lo, &hi);
    let mut rec = Recorder::new(settings);
    let (mut eval, grads) = p.evaluate_with_gradients(&x)?;
    rec.evaluations += 1;
    rec.record(0, &x, &eval);
    let mut phi = merit(&eval, cfg.penalty);
    let mut grad = merit_gradient(&eval, &grads, cfg.penalty);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iteration = 0;

    let termination = 'outer: loop {
        if iteration >= settings.max_iterations {
            break Termination::IterationLimit;
        }
        if rec.out_of_time() {
            break Termination::TimeLimit;
        }
        if projected_gradient_norm(&grad, &x, &lo, &hi) <= 1e-12 * phi.abs().max(1.0) {
            break Termination::Converged;
        }
        let mut d = direction(&grad, &memory);
        restrict(&mut d, &x, &lo, &hi);
        if dot(&d, &grad) >= 0.0 {
            memory.clear();
            d = grad.iter().map(|g| -g).collect();
            restrict(&mut d, &x, &lo, &hi);
        }
        let mut t = if memory.is_empty() {
            1.0 / norm(&d).max(1e-300) * range_scale(&lo, &hi)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            super::clamp(&mut xt, &lo, &hi);
            let step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&grad, &step);
            if decrease < 0.0 {
                match p.evaluate(&xt) {
                    Ok(e) => {
                        rec.evaluations += 1;
                        let phit = merit(&e, cfg.penalty);
                        if phit <= phi + cfg.armijo * decrease {
                            accepted = Some(xt);
                            break;
                        }
                    }
                    Err(err) if err.is_singular() => {}
                    Err(err) => break 'outer Termination::AnalysisFailure(err.to_string()),
                }
            }
            t *= 0.5;
        }
        let Some(xn) = accepted else {
            if memory.is_empty() {
                break Termination::LineSearchFailure;
            }
            memory.clear();
            continue;
        };
        let (en, gn) = match p.evaluate_with_gradients(&xn) {
            Ok(v) => v,
            Err(err) => break Termination::AnalysisFailure(err.to_string()),
        };
        rec.evaluations += 1;
        iteration += 1;
        let phin = merit(&en, cfg.penalty);
        let gradn = merit_gradient(&en, &gn, cfg.penalty);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gradn.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > cfg.memory {
                memory.pop_front();
            }
        }
        let change = (phi - phin).abs() / phi.abs().max(1e-12);
        x = xn;
        eval = en;
        phi = phin;
        grad = gradn;
        rec.record(iteration, &x, &eval);
        if change <= settings.rel_tolerance {
            break Termination::Converged;
        }
    };
    let _ = eval;
    rec.finish(p, &x, iteration, termination)
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Typical variable range, used to size the first steepest-descent step.
fn range_scale(lo: &[f64], hi: &[f64]) -> f64 {
    let r: f64 = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| (h - l).min(1e6))
        .sum::<f64>()
        / lo.len().max(1) as f64;
    (0.1 * r).max(1e-8)
}
