//! Objectives and normalized constraints, with the seeds their reverse pass
//! starts from.

use nalgebra::DVector;

use crate::analysis::{Analysis, Analyzer};
use crate::elements::SectionBar;
use crate::model::{ConstraintRow, ElementKind, ObjectiveKind, Problem};

/// A scalar function of the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    Objective,
    Constraint(usize),
}

/// Initial adjoints for one scalar output.
#[derive(Debug, Clone)]
pub struct Seeds {
    /// ∂/∂u over free DOFs.
    pub u: Vec<f64>,
    /// ∂/∂(member-end forces), one entry per element when non-zero.
    pub forces: Vec<Option<DVector<f64>>>,
    /// Direct ∂/∂(section properties).
    pub section: Vec<SectionBar>,
    /// Direct ∂/∂(element length).
    pub length: Vec<f64>,
    /// Direct ∂/∂(tube d, tube alpha).
    pub tube: Vec<(f64, f64)>,
}

impl Seeds {
    pub fn zeros(n_free: usize, n_elements: usize) -> Seeds {
        Seeds {
            u: vec![0.0; n_free],
            forces: vec![None; n_elements],
            section: vec![SectionBar::default(); n_elements],
            length: vec![0.0; n_elements],
            tube: vec![(0.0, 0.0); n_elements],
        }
    }

    pub fn needs_solve(&self) -> bool {
        self.u.iter().any(|v| *v != 0.0) || self.forces.iter().any(|f| f.is_some())
    }

    fn force_seed(&mut self, e: usize, n: usize) -> &mut DVector<f64> {
        self.forces[e].get_or_insert_with(|| DVector::zeros(n))
    }
}

/// sign with sign(0) = 0, used as the subgradient of |·|.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn objective_value(kind: ObjectiveKind, a: &Analysis) -> f64 {
    match kind {
        ObjectiveKind::Volume => a.volume(),
        ObjectiveKind::Compliance => a.compliance(),
        ObjectiveKind::EmbodiedCarbon => a.embodied_carbon(),
    }
}

pub fn constraint_value(row: &ConstraintRow, analyzer: &Analyzer, a: &Analysis) -> f64 {
    match *row {
        ConstraintRow::Displacement { node, axis, limit } => {
            a.displacement(&analyzer.dofs, node, axis).abs() / limit - 1.0
        }
        ConstraintRow::StressAbs { element, limit } => a.axial_stress(element).abs() / limit - 1.0,
        ConstraintRow::StressTension { element, limit } => a.axial_stress(element) / limit - 1.0,
        ConstraintRow::StressCompression { element, limit } => {
            -a.axial_stress(element) / limit - 1.0
        }
        ConstraintRow::Combined { element, limit } => a.combined_stress(element) / limit - 1.0,
        ConstraintRow::DiameterRatio { lesser, greater } => {
            let dl = a.model.elements[lesser].section.tube().map_or(1.0, |t| t.0);
            let dg = a.model.elements[greater]
                .section
                .tube()
                .map_or(1.0, |t| t.0);
            dl / dg - 1.0
        }
    }
}

pub fn constraint_values(problem: &Problem, analyzer: &Analyzer, a: &Analysis) -> Vec<f64> {
    problem
        .rows
        .iter()
        .map(|r| constraint_value(r, analyzer, a))
        .collect()
}

pub fn output_value(problem: &Problem, analyzer: &Analyzer, a: &Analysis, out: Output) -> f64 {
    match out {
        Output::Objective => objective_value(problem.objective, a),
        Output::Constraint(i) => constraint_value(&problem.rows[i], analyzer, a),
    }
}

fn axial_index(kind: ElementKind) -> (usize, usize) {
    match kind {
        ElementKind::Truss => (1, 2),
        ElementKind::Frame => (6, 12),
    }
}

/// Seeds for the reverse pass of one output.
pub fn seeds(problem: &Problem, analyzer: &Analyzer, a: &Analysis, out: Output) -> Seeds {
    let ne = a.states.len();
    let mut s = Seeds::zeros(analyzer.dofs.n_free(), ne);
    match out {
        Output::Objective => match problem.objective {
            ObjectiveKind::Volume | ObjectiveKind::EmbodiedCarbon => {
                for (e, st) in a.states.iter().enumerate() {
                    let w = if problem.objective == ObjectiveKind::Volume {
                        1.0
                    } else {
                        let m = &a.model.materials[a.model.elements[e].material];
                        m.ecc * m.density
                    };
                    s.section[e].a += w * st.length;
                    s.length[e] += w * st.props.a;
                }
            }
            ObjectiveKind::Compliance => s.u.copy_from_slice(&a.f),
        },
        Output::Constraint(i) => match problem.rows[i] {
            ConstraintRow::Displacement { node, axis, limit } => {
                let g = analyzer.dofs.global(node, axis.index());
                if let Some(p) = analyzer.dofs.free_of(g) {
                    s.u[p] = sign(a.u[g]) / limit;
                }
            }
            ConstraintRow::StressAbs { element, limit } => {
                let n = a.axial_force(element);
                let area = a.states[element].props.a;
                stress_seed(&mut s, a, element, sign(n) / limit, n, area);
            }
            ConstraintRow::StressTension { element, limit } => {
                let n = a.axial_force(element);
                let area = a.states[element].props.a;
                stress_seed(&mut s, a, element, 1.0 / limit, n, area);
            }
            ConstraintRow::StressCompression { element, limit } => {
                let n = a.axial_force(element);
                let area = a.states[element].props.a;
                stress_seed(&mut s, a, element, -1.0 / limit, n, area);
            }
            ConstraintRow::Combined { element, limit } => {
                let n = a.axial_force(element);
                let p = a.states[element].props;
                stress_seed(&mut s, a, element, sign(n) / limit, n, p.a);
                let f = &a.forces[element];
                let idx = if f[4].abs() >= f[10].abs() { 4 } else { 10 };
                let m = f[idx].abs();
                s.force_seed(element, 12)[idx] += sign(f[idx]) / (p.s * limit);
                s.section[element].s += -m / (p.s * p.s * limit);
            }
            ConstraintRow::DiameterRatio { lesser, greater } => {
                let dl = a.model.elements[lesser].section.tube().map_or(1.0, |t| t.0);
                let dg = a.model.elements[greater]
                    .section
                    .tube()
                    .map_or(1.0, |t| t.0);
                s.tube[lesser].0 += 1.0 / dg;
                s.tube[greater].0 += -dl / (dg * dg);
            }
        },
    }
    s
}

/// Seeds for c·σ with σ = N/A, where `c` multiplies the stress.
fn stress_seed(s: &mut Seeds, a: &Analysis, e: usize, c: f64, n: f64, area: f64) {
    let (idx, len) = axial_index(a.states[e].kind);
    s.force_seed(e, len)[idx] += c / area;
    s.section[e].a += -c * n / (area * area);
}
