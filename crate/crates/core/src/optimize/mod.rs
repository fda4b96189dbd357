//! Design loops: MMA for constrained problems, projected L-BFGS, a seeded
//! genetic algorithm baseline, and the material-assignment sweep.

pub mod ga;
pub mod lbfgs;
pub mod mma;
pub mod sweep;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::{finite_difference, jacobian};
use crate::analysis::Analyzer;
use crate::error::{Error, Result};
use crate::functions::{constraint_values, objective_value};
use crate::model::Problem;

pub use ga::optimize_ga;
pub use lbfgs::optimize_lbfgs;
pub use mma::optimize_mma;
pub use sweep::{material_sweep, SweepRun};

/// Normalized constraints at or below this value count as satisfied.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Mma,
    Lbfgs,
    Ga,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Adjoint,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmaSettings {
    /// Fraction of the variable range the asymptotes start from.
    pub asymptote_init: f64,
    pub asymptote_increase: f64,
    pub asymptote_decrease: f64,
    /// Per-iteration move limit as a fraction of the variable range.
    pub move_limit: f64,
    /// Penalty on the elastic constraint slacks.
    pub slack_penalty: f64,
    /// Check each subproblem solution against the true functions and tighten
    /// the approximation until it is conservative (globally convergent variant).
    pub conservative: bool,
}

impl Default for MmaSettings {
    fn default() -> Self {
        MmaSettings {
            asymptote_init: 0.5,
            asymptote_increase: 1.2,
            asymptote_decrease: 0.7,
            move_limit: 0.5,
            slack_penalty: 1000.0,
            conservative: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// BLX-α blend extension.
    pub blend_alpha: f64,
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of the variable range.
    pub mutation_scale: f64,
    pub elite: usize,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            population: 100,
            generations: 200,
            tournament: 3,
            crossover_rate: 0.9,
            blend_alpha: 0.5,
            mutation_rate: 0.1,
            mutation_scale: 0.1,
            elite: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Weight of the quadratic penalty applied when the problem has constraints.
    pub penalty: f64,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            memory: 10,
            armijo: 1e-4,
            max_backtracks: 30,
            penalty: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub algorithm: Algorithm,
    pub gradients: GradientMode,
    /// Relative objective change that ends a run.
    pub rel_tolerance: f64,
    /// Wall-clock budget in seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    pub max_iterations: usize,
    pub seed: u64,
    /// Relative step of finite-difference gradients.
    pub fd_step: f64,
    /// Keep every iterate in the history.
    pub record_iterates: bool,
    pub mma: MmaSettings,
    pub ga: GaSettings,
    pub lbfgs: LbfgsSettings,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            algorithm: Algorithm::Mma,
            gradients: GradientMode::Adjoint,
            rel_tolerance: 1e-6,
            time_limit: None,
            max_iterations: 500,
            seed: 0,
            fd_step: 1e-6,
            record_iterates: false,
            mma: MmaSettings::default(),
            ga: GaSettings::default(),
            lbfgs: LbfgsSettings::default(),
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("optimizer: {m}")));
        if !(self.rel_tolerance > 0.0) {
            return bad("rel_tolerance must be positive");
        }
        if self.ga.population < 2 {
            return bad("population must be at least 2");
        }
        if self.ga.tournament == 0 || self.ga.elite >= self.ga.population {
            return bad("tournament must be positive and elite smaller than the population");
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return bad("time_limit must be positive");
            }
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step must be positive");
        }
        if !(self.mma.move_limit > 0.0 && self.mma.move_limit <= 1.0) {
            return bad("mma.move_limit must lie in (0, 1]");
        }
        if self.lbfgs.memory == 0 {
            return bad("lbfgs.memory must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub wall_time_s: f64,
    pub objective: f64,
    pub max_violation: f64,
    /// The design itself, when `record_iterates` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationLimit,
    TimeLimit,
    LineSearchFailure,
    AnalysisFailure(String),
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::AnalysisFailure(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub x_final: Vec<f64>,
    pub objective_final: f64,
    pub max_violation: f64,
    pub feasible: bool,
    pub history: Vec<HistoryEntry>,
    pub termination: Termination,
    pub iterations: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
}

impl OptimizationResult {
    /// History without timestamps, for determinism comparisons.
    pub fn trace(&self) -> Vec<(usize, f64, f64)> {
        self.history
            .iter()
            .map(|h| (h.iteration, h.objective, h.max_violation))
            .collect()
    }
}

/// Function values at one design.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub constraints: Vec<f64>,
}

impl Evaluation {
    pub fn max_violation(&self) -> f64 {
        max_violation(&self.constraints)
    }

    pub fn feasible(&self) -> bool {
        self.max_violation() <= FEASIBILITY_TOLERANCE
    }
}

pub fn max_violation(g: &[f64]) -> f64 {
    g.iter().fold(0.0f64, |m, &v| m.max(v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub objective: Vec<f64>,
    /// One row per constraint.
    pub constraints: Vec<Vec<f64>>,
}

/// What the optimizers see: a bounded, smooth, normalized-constraint problem.
pub trait DesignProblem: Sync {
    fn dim(&self) -> usize;
    fn lower(&self) -> Vec<f64>;
    fn upper(&self) -> Vec<f64>;
    fn initial(&self) -> Vec<f64>;
    fn n_constraints(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation>;
    fn evaluate_with_gradients(&self, x: &[f64]) -> Result<(Evaluation, Gradients)>;
}

/// A structural problem with a reusable analyzer and a chosen gradient source.
pub struct StructuralProblem<'a> {
    pub problem: &'a Problem,
    pub analyzer: Analyzer,
    pub mode: GradientMode,
    pub fd_step: f64,
}

impl<'a> StructuralProblem<'a> {
    pub fn new(problem: &'a Problem, mode: GradientMode) -> Result<Self> {
        Ok(StructuralProblem {
            problem,
            analyzer: Analyzer::for_problem(problem)?,
            mode,
            fd_step: problem.optimizer.fd_step,
        })
    }
}

impl DesignProblem for StructuralProblem<'_> {
    fn dim(&self) -> usize {
        self.problem.n_variables()
    }

    fn lower(&self) -> Vec<f64> {
        self.problem.lower()
    }

    fn upper(&self) -> Vec<f64> {
        self.problem.upper()
    }

    fn initial(&self) -> Vec<f64> {
        self.problem.initial()
    }

    fn n_constraints(&self) -> usize {
        self.problem.n_constraints()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let a = self.analyzer.analyze(self.problem, x)?;
        Ok(Evaluation {
            objective: objective_value(self.problem.objective, &a),
            constraints: constraint_values(self.problem, &self.analyzer, &a),
        })
    }

    fn evaluate_with_gradients(&self, x: &[f64]) -> Result<(Evaluation, Gradients)> {
        let a = self.analyzer.analyze(self.problem, x)?;
        let eval = Evaluation {
            objective: objective_value(self.problem.objective, &a),
            constraints: constraint_values(self.problem, &self.analyzer, &a),
        };
        let grads = match self.mode {
            GradientMode::Adjoint => {
                let (objective, constraints) = jacobian(self.problem, &self.analyzer, &a)?;
                Gradients {
                    objective,
                    constraints,
                }
            }
            GradientMode::FiniteDifference => {
                let mut rows = finite_difference(self.problem, &self.analyzer, x, self.fd_step)?;
                let objective = rows.remove(0);
                Gradients {
                    objective,
                    constraints: rows,
                }
            }
        };
        Ok((eval, grads))
    }
}

/// Dispatch on the configured algorithm.
pub fn optimize<P: DesignProblem>(
    p: &P,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    settings.validate()?;
    match settings.algorithm {
        Algorithm::Mma => optimize_mma(p, settings),
        Algorithm::Lbfgs => optimize_lbfgs(p, settings),
        Algorithm::Ga => optimize_ga(p, settings),
    }
}

/// Run a structural problem with its own settings, overridden by `settings` if given.
pub fn optimize_problem(
    problem: &Problem,
    settings: Option<&OptimizerSettings>,
) -> Result<OptimizationResult> {
    let s = settings.unwrap_or(&problem.optimizer);
    let sp = StructuralProblem::new(problem, s.gradients)?;
    let mut sp = sp;
    sp.fd_step = s.fd_step;
    optimize(&sp, s)
}

/// Wall clock, history and best-iterate bookkeeping shared by the optimizers.
pub(crate) struct Recorder {
    start: Instant,
    last_iteration_s: f64,
    time_limit: Option<f64>,
    keep_x: bool,
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
    best: Option<(Vec<f64>, f64, f64)>,
}

impl Recorder {
    pub fn new(settings: &OptimizerSettings) -> Recorder {
        Recorder {
            start: Instant::now(),
            last_iteration_s: 0.0,
            time_limit: settings.time_limit,
            keep_x: settings.record_iterates,
            history: Vec::new(),
            evaluations: 0,
            best: None,
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Record an iterate and remember it if it improves on the best so far
    /// (feasible beats infeasible; then lower objective, or lower violation).
    pub fn record(&mut self, iteration: usize, x: &[f64], eval: &Evaluation) {
        let t = self.elapsed();
        let prev = self.history.last().map_or(0.0, |h| h.wall_time_s);
        self.last_iteration_s = t - prev;
        let v = eval.max_violation();
        self.history.push(HistoryEntry {
            iteration,
            wall_time_s: t.max(prev),
            objective: eval.objective,
            max_violation: v,
            x: self.keep_x.then(|| x.to_vec()),
        });
        self.offer(x, eval.objective, v);
    }

    pub fn offer(&mut self, x: &[f64], objective: f64, violation: f64) {
        let better = match &self.best {
            None => true,
            Some((_, bo, bv)) => {
                let feas = violation <= FEASIBILITY_TOLERANCE;
                let bfeas = *bv <= FEASIBILITY_TOLERANCE;
                match (feas, bfeas) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => objective < *bo,
                    (false, false) => violation < *bv,
                }
            }
        };
        if better {
            self.best = Some((x.to_vec(), objective, violation));
        }
    }

    /// True when another iteration of the last observed duration would overrun the budget.
    pub fn out_of_time(&self) -> bool {
        match self.time_limit {
            Some(limit) => self.elapsed() + self.last_iteration_s > limit,
            None => false,
        }
    }

    pub fn best_x(&self) -> Option<Vec<f64>> {
        self.best.as_ref().map(|b| b.0.clone())
    }

    /// Re-evaluate the chosen iterate from scratch and package the result.
    pub fn finish<P: DesignProblem>(
        self,
        p: &P,
        fallback: &[f64],
        iterations: usize,
        termination: Termination,
    ) -> Result<OptimizationResult> {
        let x = self.best_x().unwrap_or_else(|| fallback.to_vec());
        let eval = p.evaluate(&x)?;
        let wall_time_s = self.elapsed();
        Ok(OptimizationResult {
            objective_final: eval.objective,
            max_violation: eval.max_violation(),
            feasible: eval.feasible(),
            x_final: x,
            history: self.history,
            termination,
            iterations,
            evaluations: self.evaluations + 1,
            wall_time_s,
        })
    }
}

pub(crate) fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].max(lo[i]).min(hi[i]);
    }
}
