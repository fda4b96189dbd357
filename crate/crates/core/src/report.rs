//! Serializable run records: what was solved, with which settings, and what came out.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{Analysis, Analyzer};
use crate::error::{Error, Result};
use crate::model::schema::ProblemFile;
use crate::model::{ElementKind, Problem, MPA};
use crate::optimize::{OptimizationResult, OptimizerSettings, SweepRun};

/// SHA-256 of the canonical (compact) JSON of the validated problem document.
pub fn problem_digest(problem: &Problem) -> Result<String> {
    let text =
        serde_json::to_string(&problem.source).map_err(|e| Error::Serialize(e.to_string()))?;
    let hash = Sha256::digest(text.as_bytes());
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub objective: f64,
    pub max_violation: f64,
    pub volume: f64,
    pub mass: f64,
    pub embodied_carbon: f64,
    pub compliance: f64,
    /// Largest translational displacement magnitude component, m.
    pub max_displacement: f64,
    /// Largest |axial stress|, MPa.
    pub max_axial_stress: f64,
}

impl AnalysisSummary {
    pub fn new(problem: &Problem, analyzer: &Analyzer, analysis: &Analysis) -> AnalysisSummary {
        let g = crate::functions::constraint_values(problem, analyzer, analysis);
        let dpn = if analysis.model.has_frames() { 6 } else { 3 };
        let max_displacement = analysis
            .u
            .chunks(dpn)
            .flat_map(|c| c[..3].iter().copied())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let max_axial_stress = (0..analysis.states.len())
            .map(|e| analysis.axial_stress(e).abs())
            .fold(0.0_f64, f64::max)
            / crate::model::MPA;
        AnalysisSummary {
            objective: crate::functions::objective_value(problem.objective, analysis),
            max_violation: crate::optimize::max_violation(&g),
            volume: analysis.volume(),
            mass: analysis.mass(),
            embodied_carbon: analysis.embodied_carbon(),
            compliance: analysis.compliance(),
            max_displacement,
            max_axial_stress,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResult {
    pub id: usize,
    pub position: [f64; 3],
    /// Translations, then rotations for frame models.
    pub displacement: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub node: usize,
    /// 0..3 forces along x, y, z; 3..6 moments.
    pub dof: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementResult {
    pub id: usize,
    pub length: f64,
    pub area: f64,
    /// Positive in tension, kN.
    pub axial_force: f64,
    /// MPa.
    pub axial_stress: f64,
    /// |N|/A + |M|/S for frames, MPa.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined_stress: Option<f64>,
    /// Member-end forces in local axes.
    pub end_forces: Vec<f64>,
}

/// Everything about one analysed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub x: Vec<f64>,
    pub summary: AnalysisSummary,
    pub constraints: Vec<f64>,
    pub nodes: Vec<NodeResult>,
    pub reactions: Vec<Reaction>,
    pub elements: Vec<ElementResult>,
}

impl StateReport {
    pub fn new(
        problem: &Problem,
        analyzer: &Analyzer,
        analysis: &Analysis,
        x: &[f64],
    ) -> StateReport {
        let dofs = &analyzer.dofs;
        let dpn = dofs.dofs_per_node;
        let model = &analysis.model;
        let nodes = model
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeResult {
                id: n.id,
                position: [n.position.x, n.position.y, n.position.z],
                displacement: analysis.u[i * dpn..(i + 1) * dpn].to_vec(),
            })
            .collect();
        let reactions = analysis
            .reactions(dofs, &analyzer.plan)
            .into_iter()
            .map(|(g, value)| Reaction {
                node: model.nodes[g / dpn].id,
                dof: g % dpn,
                value,
            })
            .collect();
        let elements = model
            .elements
            .iter()
            .enumerate()
            .map(|(e, el)| {
                let st = &analysis.states[e];
                ElementResult {
                    id: el.id,
                    length: st.length,
                    area: st.props.a,
                    axial_force: analysis.axial_force(e),
                    axial_stress: analysis.axial_stress(e) / MPA,
                    combined_stress: (st.kind == ElementKind::Frame)
                        .then(|| analysis.combined_stress(e) / MPA),
                    end_forces: analysis.forces[e].iter().copied().collect(),
                }
            })
            .collect();
        StateReport {
            x: x.to_vec(),
            summary: AnalysisSummary::new(problem, analyzer, analysis),
            constraints: crate::functions::constraint_values(problem, analyzer, analysis),
            nodes,
            reactions,
            elements,
        }
    }
}

/// Result of analysing a problem at one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub problem: String,
    pub digest: String,
    pub n_variables: usize,
    pub n_constraints: usize,
    pub state: StateReport,
}

impl AnalysisReport {
    pub fn new(problem: &Problem, x: &[f64]) -> Result<AnalysisReport> {
        let analyzer = Analyzer::for_problem(problem)?;
        let analysis = analyzer.analyze(problem, x)?;
        Ok(AnalysisReport {
            problem: problem.name.clone(),
            digest: problem_digest(problem)?,
            n_variables: problem.n_variables(),
            n_constraints: problem.n_constraints(),
            state: StateReport::new(problem, &analyzer, &analysis, x),
        })
    }
}

/// Node positions of a design, for seeding a follow-up run on the same topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub problem: String,
    pub nodes: Vec<GeometryNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryNode {
    pub id: usize,
    pub xyz: [f64; 3],
}

impl Geometry {
    pub fn from_state(problem: &Problem, state: &StateReport) -> Geometry {
        Geometry {
            problem: problem.name.clone(),
            nodes: state
                .nodes
                .iter()
                .map(|n| GeometryNode {
                    id: n.id,
                    xyz: n.position,
                })
                .collect(),
        }
    }

    /// Move the nodes of `file` to these positions. Every node of `file` must be listed.
    pub fn apply(&self, file: &mut ProblemFile) -> Result<()> {
        for node in file.nodes.iter_mut() {
            let g =
                self.nodes.iter().find(|g| g.id == node.id).ok_or_else(|| {
                    Error::Validation(format!("geometry has no node {}", node.id))
                })?;
            node.xyz = g.xyz;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub digest: String,
    pub n_variables: usize,
    pub n_constraints: usize,
    pub threads: usize,
    pub settings: OptimizerSettings,
    pub initial: AnalysisSummary,
    #[serde(rename = "final")]
    pub final_: AnalysisSummary,
    pub result: OptimizationResult,
    /// Forces, stresses and node positions at the reported design.
    pub final_state: StateReport,
}

impl RunReport {
    pub fn new(
        problem: &Problem,
        settings: &OptimizerSettings,
        threads: usize,
        result: OptimizationResult,
    ) -> Result<RunReport> {
        let analyzer = Analyzer::for_problem(problem)?;
        let a0 = analyzer.analyze(problem, &problem.initial())?;
        let a1 = analyzer.analyze(problem, &result.x_final)?;
        Ok(RunReport {
            problem: problem.name.clone(),
            digest: problem_digest(problem)?,
            n_variables: problem.n_variables(),
            n_constraints: problem.n_constraints(),
            threads,
            settings: settings.clone(),
            initial: AnalysisSummary::new(problem, &analyzer, &a0),
            final_: AnalysisSummary::new(problem, &analyzer, &a1),
            final_state: StateReport::new(problem, &analyzer, &a1, &result.x_final),
            result,
        })
    }
}

fn csv_text(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| Error::Serialize(e.to_string()))?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

/// History as CSV: iteration, wall_time_s, objective, max_violation.
pub fn history_csv(result: &OptimizationResult) -> Result<String> {
    csv_text(|w| {
        w.write_record(["iteration", "wall_time_s", "objective", "max_violation"])?;
        for h in &result.history {
            w.write_record([
                h.iteration.to_string(),
                h.wall_time_s.to_string(),
                h.objective.to_string(),
                h.max_violation.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// One row per sweep run. Failed runs keep their row with empty numbers and the error text.
pub fn sweep_summary_csv(runs: &[SweepRun]) -> Result<String> {
    let num = |v: f64| {
        if v.is_finite() {
            v.to_string()
        } else {
            String::new()
        }
    };
    csv_text(|w| {
        w.write_record([
            "id",
            "ec",
            "mass",
            "compliance",
            "volume",
            "objective",
            "feasible",
            "time_s",
            "error",
        ])?;
        for r in runs {
            w.write_record([
                r.id.clone(),
                num(r.embodied_carbon),
                num(r.mass),
                num(r.compliance),
                num(r.volume),
                num(r.result.as_ref().map_or(f64::NAN, |x| x.objective_final)),
                r.feasible.to_string(),
                r.time_s.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}
