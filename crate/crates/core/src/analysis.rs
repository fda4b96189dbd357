//! Forward linear-elastic analysis: element states, assembly, factorization,
//! displacements and member forces.

use std::sync::Arc;

use nalgebra::DVector;

use crate::assembly::{load_vector, AssemblyPlan, SparseSym};
use crate::elements::ElementState;
use crate::error::{Error, Result};
use crate::model::{apply_variables, build_dof_map, Axis, DofMap, ElementKind, Model, Problem};
use crate::par;
use crate::solve::{Factor, Ordering, Symbolic};

/// Topology-dependent data reused by every analysis of one problem.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub dofs: DofMap,
    pub plan: AssemblyPlan,
    pub symbolic: Arc<Symbolic>,
}

impl Analyzer {
    pub fn new(model: &Model) -> Result<Analyzer> {
        Analyzer::with_ordering(model, Ordering::MinimumDegree)
    }

    pub fn with_ordering(model: &Model, ordering: Ordering) -> Result<Analyzer> {
        let dofs = build_dof_map(model)?;
        let plan = AssemblyPlan::new(model, &dofs);
        let pattern = SparseSym {
            n: plan.n_free,
            col_ptr: plan.col_ptr.clone(),
            row_idx: plan.row_idx.clone(),
            values: vec![0.0; plan.nnz()],
        };
        let symbolic = Arc::new(Symbolic::analyze(&pattern, ordering));
        Ok(Analyzer {
            dofs,
            plan,
            symbolic,
        })
    }

    pub fn for_problem(problem: &Problem) -> Result<Analyzer> {
        Analyzer::new(&problem.model)
    }

    /// Analyze the problem at design vector `x`.
    pub fn analyze(&self, problem: &Problem, x: &[f64]) -> Result<Analysis> {
        self.analyze_model(apply_variables(problem, x)?)
    }

    pub fn analyze_model(&self, model: Model) -> Result<Analysis> {
        let states = par::try_map_range(model.elements.len(), |e| ElementState::new(&model, e))?;
        let k = self.plan.assemble(&states);
        let factor = Factor::refactorize(self.symbolic.clone(), &k)?;
        let f = load_vector(&model, &self.dofs);
        let u_free = factor.solve(&f);
        let mut u = vec![0.0; self.dofs.n_total()];
        for (p, &g) in self.dofs.free.iter().enumerate() {
            u[g] = u_free[p];
        }
        let plan = &self.plan;
        let forces = par::map_range(states.len(), |e| {
            states[e].end_forces(&plan.element_vector(e, &u))
        });
        Ok(Analysis {
            model,
            states,
            k,
            factor,
            f,
            u_free,
            u,
            forces,
        })
    }
}

/// Result of one forward analysis, kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub model: Model,
    pub states: Vec<ElementState>,
    pub k: SparseSym,
    pub factor: Factor,
    /// Free-DOF load vector.
    pub f: Vec<f64>,
    pub u_free: Vec<f64>,
    /// Displacements at every global DOF (zero where fixed).
    pub u: Vec<f64>,
    /// Member-end forces in local axes.
    pub forces: Vec<DVector<f64>>,
}

impl Analysis {
    pub fn displacement(&self, dofs: &DofMap, node: usize, axis: Axis) -> f64 {
        self.u[dofs.global(node, axis.index())]
    }

    /// Axial force, positive in tension.
    pub fn axial_force(&self, e: usize) -> f64 {
        ElementState::axial_force(&self.forces[e], self.states[e].kind)
    }

    pub fn axial_stress(&self, e: usize) -> f64 {
        self.axial_force(e) / self.states[e].props.a
    }

    /// Governing end bending moment about the local y axis (frames only).
    pub fn bending_moment(&self, e: usize) -> f64 {
        match self.states[e].kind {
            ElementKind::Truss => 0.0,
            ElementKind::Frame => {
                let f = &self.forces[e];
                f[4].abs().max(f[10].abs())
            }
        }
    }

    /// |N|/A + |M|/S.
    pub fn combined_stress(&self, e: usize) -> f64 {
        let p = &self.states[e].props;
        self.axial_force(e).abs() / p.a + self.bending_moment(e) / p.s
    }

    /// fᵀu
    pub fn compliance(&self) -> f64 {
        self.f.iter().zip(&self.u_free).map(|(a, b)| a * b).sum()
    }

    pub fn volume(&self) -> f64 {
        self.states.iter().map(|s| s.props.a * s.length).sum()
    }

    pub fn mass(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.model.elements)
            .map(|(s, el)| self.model.materials[el.material].density * s.props.a * s.length)
            .sum()
    }

    pub fn embodied_carbon(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.model.elements)
            .map(|(s, el)| {
                let m = &self.model.materials[el.material];
                m.ecc * m.density * s.props.a * s.length
            })
            .sum()
    }

    /// Support reactions at every fixed DOF as (global dof, value).
    pub fn reactions(&self, dofs: &DofMap, plan: &AssemblyPlan) -> Vec<(usize, f64)> {
        let mut r = vec![0.0; dofs.n_total()];
        for (e, s) in self.states.iter().enumerate() {
            let ue = plan.element_vector(e, &self.u);
            let fe = &s.k * ue;
            for (i, &g) in plan.element_dofs[e].iter().enumerate() {
                r[g] += fe[i];
            }
        }
        for l in &self.model.loads {
            for a in 0..3 {
                r[dofs.global(l.node, a)] -= l.force[a];
                if dofs.dofs_per_node == 6 {
                    r[dofs.global(l.node, 3 + a)] -= l.moment[a];
                }
            }
        }
        dofs.fixed.iter().map(|&g| (g, r[g])).collect()
    }

    /// Solve K y = b with the stored factor.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.factor.n() {
            return Err(Error::DimensionMismatch {
                expected: self.factor.n(),
                found: b.len(),
            });
        }
        Ok(self.factor.solve(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    #[test]
    fn unit_bar_displacement_is_one() {
        let p = Problem::from_file(fixtures::unit_bar()).unwrap();
        let a = Analyzer::for_problem(&p)
            .unwrap()
            .analyze(&p, &p.initial())
            .unwrap();
        assert_relative_eq!(a.u_free[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(a.compliance(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(a.axial_force(0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn two_bar_bracket_closed_form() {
        // symmetric two-bar truss, apex load P downwards
        let (p_load, e, a, h, w) = (10.0, 2e8, 1e-3, 1.0, 1.0);
        let p = Problem::from_file(fixtures::two_bar(p_load, e, a, w, h)).unwrap();
        let an = Analyzer::for_problem(&p).unwrap();
        let r = an.analyze(&p, &p.initial()).unwrap();
        let l = (w * w + h * h).sqrt();
        let s = h / l;
        let n = -p_load / (2.0 * s);
        assert_relative_eq!(r.axial_force(0), n, max_relative = 1e-12);
        assert_relative_eq!(r.axial_force(1), n, max_relative = 1e-12);
        let v = p_load * l / (2.0 * e * a * s * s);
        let apex = 2;
        assert_relative_eq!(
            r.displacement(&an.dofs, apex, Axis::Y),
            -v,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cantilever_tip_deflection_closed_form() {
        let (l, d, alpha, p_load) = (2.0, 0.1, 0.5, 3.0);
        let prob = Problem::from_file(fixtures::cantilever_frame(l, d, alpha)).unwrap();
        let an = Analyzer::for_problem(&prob).unwrap();
        let r = an.analyze(&prob, &prob.initial()).unwrap();
        let sec = crate::elements::tube_section_properties(d, alpha).unwrap();
        let e = prob.model.materials[0].e;
        let expect = -p_load * l.powi(3) / (3.0 * e * sec.iy);
        assert_relative_eq!(
            r.displacement(&an.dofs, 1, Axis::Z),
            expect,
            max_relative = 1e-10
        );
    }

    #[test]
    fn reactions_balance_loads() {
        for file in [fixtures::warren(), fixtures::roof(3)] {
            let p = Problem::from_file(file).unwrap();
            let an = Analyzer::for_problem(&p).unwrap();
            let r = an.analyze(&p, &p.initial()).unwrap();
            let reactions = r.reactions(&an.dofs, &an.plan);
            for axis in 0..3 {
                let applied: f64 = p.model.loads.iter().map(|l| l.force[axis]).sum();
                let react: f64 = reactions
                    .iter()
                    .filter(|(g, _)| g % an.dofs.dofs_per_node == axis)
                    .map(|(_, v)| v)
                    .sum();
                assert!(
                    (applied + react).abs() < 1e-8 * applied.abs().max(1.0),
                    "axis {axis}"
                );
            }
        }
    }

    #[test]
    fn mechanism_is_reported_singular() {
        let mut f = fixtures::two_bar(10.0, 2e8, 1e-3, 1.0, 1.0);
        for n in &mut f.nodes {
            n.fixed = [false, false, true, true, true, true];
        }
        let p = Problem::from_file(f).unwrap();
        let err = Analyzer::for_problem(&p)
            .unwrap()
            .analyze(&p, &p.initial())
            .unwrap_err();
        assert!(err.is_singular(), "{err}");
    }
}
