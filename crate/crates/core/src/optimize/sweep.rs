//! Exhaustive material-assignment sweep: one independent MMA run per
//! assignment of materials to element groups.

use serde::{Deserialize, Serialize};

use super::{optimize_mma, Algorithm, OptimizationResult, StructuralProblem};
use crate::analysis::Analyzer;
use crate::error::{Error, Result};
use crate::model::schema::{ProblemFile, VariableKindRecord};
use crate::model::Problem;
use crate::par;

/// Group counts above this make the sweep very large.
pub const LARGE_SWEEP_GROUPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    /// One material tag per group, in group order.
    pub id: String,
    /// Material name per group.
    pub assignment: Vec<String>,
    pub result: Option<OptimizationResult>,
    pub error: Option<String>,
    pub embodied_carbon: f64,
    pub mass: f64,
    pub compliance: f64,
    pub volume: f64,
    pub feasible: bool,
    pub time_s: f64,
}

/// Problem document with `materials[choice[g]]` assigned to every element of `groups[g]`,
/// and that material's area bounds applied to area variables driving the group.
pub fn assign_materials(
    file: &ProblemFile,
    groups: &[String],
    materials: &[String],
    choice: &[usize],
) -> Result<ProblemFile> {
    let mut out = file.clone();
    for (g, &m) in groups.iter().zip(choice) {
        let group = file
            .groups
            .iter()
            .find(|x| &x.name == g)
            .ok_or_else(|| Error::Validation(format!("unknown group {g}")))?;
        let mat = file
            .materials
            .iter()
            .find(|x| x.name == materials[m])
            .ok_or_else(|| Error::Validation(format!("unknown material {}", materials[m])))?;
        for el in out.elements.iter_mut() {
            if group.elements.contains(&el.id) {
                el.material = mat.name.clone();
            }
        }
        if let Some(b) = mat.area {
            for v in out.variables.iter_mut() {
                let drives_group = match &v.kind {
                    VariableKindRecord::Area(t) => match (&t.group, &t.elements) {
                        (Some(name), _) => name == g,
                        (None, Some(ids)) => {
                            !ids.is_empty() && ids.iter().all(|id| group.elements.contains(id))
                        }
                        _ => false,
                    },
                    _ => false,
                };
                if drives_group {
                    v.lower = b.lower;
                    v.upper = b.upper;
                    v.initial = b.initial;
                }
            }
        }
    }
    Ok(out)
}

/// Run every |materials|^k assignment. Failures are reported per run; the
/// result is sorted by objective with failed runs last.
pub fn material_sweep(
    file: &ProblemFile,
    groups: &[String],
    materials: &[String],
) -> Result<Vec<SweepRun>> {
    if groups.is_empty() || materials.is_empty() {
        return Err(Error::Validation(
            "sweep needs at least one group and one material".into(),
        ));
    }
    let base = Problem::from_file(file.clone())?;
    for g in groups {
        if base.model.group(g).is_none() {
            return Err(Error::Validation(format!("unknown group {g}")));
        }
    }
    let tags: Vec<String> = materials
        .iter()
        .map(|m| {
            base.model
                .materials
                .iter()
                .find(|x| &x.name == m)
                .map(|x| x.tag.clone())
                .ok_or_else(|| Error::Validation(format!("unknown material {m}")))
        })
        .collect::<Result<_>>()?;
    let k = groups.len();
    let total = materials
        .len()
        .checked_pow(k as u32)
        .ok_or_else(|| Error::Validation("sweep too large".into()))?;
    let choices: Vec<Vec<usize>> = (0..total)
        .map(|mut i| {
            let mut c = vec![0; k];
            for g in (0..k).rev() {
                c[g] = i % materials.len();
                i /= materials.len();
            }
            c
        })
        .collect();

    let mut runs = par::map_slice(&choices, |choice| {
        let id: String = choice.iter().map(|&m| tags[m].as_str()).collect();
        let assignment: Vec<String> = choice.iter().map(|&m| materials[m].clone()).collect();
        let start = std::time::Instant::now();
        let outcome = run_one(file, groups, materials, choice);
        let time_s = start.elapsed().as_secs_f64();
        match outcome {
            Ok((result, ec, mass, compliance, volume)) => SweepRun {
                id,
                assignment,
                feasible: result.feasible,
                result: Some(result),
                error: None,
                embodied_carbon: ec,
                mass,
                compliance,
                volume,
                time_s,
            },
            Err(e) => SweepRun {
                id,
                assignment,
                result: None,
                error: Some(e.to_string()),
                embodied_carbon: f64::NAN,
                mass: f64::NAN,
                compliance: f64::NAN,
                volume: f64::NAN,
                feasible: false,
                time_s,
            },
        }
    });
    runs.sort_by(|a, b| {
        let key = |r: &SweepRun| {
            r.result
                .as_ref()
                .map_or(f64::INFINITY, |x| x.objective_final)
        };
        key(a).total_cmp(&key(b)).then_with(|| a.id.cmp(&b.id))
    });
    Ok(runs)
}

fn run_one(
    file: &ProblemFile,
    groups: &[String],
    materials: &[String],
    choice: &[usize],
) -> Result<(OptimizationResult, f64, f64, f64, f64)> {
    let assigned = assign_materials(file, groups, materials, choice)?;
    let problem = Problem::from_file(assigned)?;
    let mut settings = problem.optimizer.clone();
    settings.algorithm = Algorithm::Mma;
    let sp = StructuralProblem::new(&problem, settings.gradients)?;
    let result = optimize_mma(&sp, &settings)?;
    let analyzer = Analyzer::for_problem(&problem)?;
    let a = analyzer.analyze(&problem, &result.x_final)?;
    Ok((
        result,
        a.embodied_carbon(),
        a.mass(),
        a.compliance(),
        a.volume(),
    ))
}
