//! Reverse-mode sensitivities through the linear solve, plus the
//! finite-difference and dense oracles used to check them.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::analysis::{Analysis, Analyzer};
use crate::elements::{local_stiffness_adjoint, tube_section_adjoint, SectionBar};
use crate::error::{Error, Result};
use crate::functions::{output_value, seeds, Output, Seeds};
use crate::model::{Problem, Section, VariableKind};
use crate::par;

type Vec3 = Vector3<f64>;

/// Per-element result of the reverse pass.
#[derive(Debug, Clone)]
struct ElementBar {
    section: SectionBar,
    tube: (f64, f64),
    /// Adjoint of x_end − x_start.
    delta: Vec3,
}

/// Adjoints of model quantities from one reverse pass.
#[derive(Debug, Clone)]
pub struct ModelBar {
    /// Per-node position adjoints.
    pub positions: Vec<Vec3>,
    pub sections: Vec<SectionBar>,
    /// Per-element (d̄, ᾱ) for tube sections.
    pub tube: Vec<(f64, f64)>,
    /// Adjoint of the applied load vector over free DOFs (= K⁻¹ ū).
    pub loads: Vec<f64>,
}

/// Pull the given seeds back to node positions and section parameters.
pub fn reverse(analyzer: &Analyzer, a: &Analysis, s: &Seeds) -> Result<ModelBar> {
    let plan = &analyzer.plan;
    let ne = a.states.len();
    let dofs = &analyzer.dofs;

    // member-force seeds feed ū and the local stiffness/transformation adjoints
    let force_parts = par::map_range(ne, |e| {
        s.forces[e].as_ref().map(|fb| {
            let st = &a.states[e];
            let n = st.n_dofs();
            let m = st.k_local.nrows();
            let mut klb = DMatrix::zeros(m, m);
            let mut gb = DMatrix::zeros(m, n);
            let ue = plan.element_vector(e, &a.u);
            let ueb = st.end_forces_adjoint(&ue, fb, &mut klb, &mut gb);
            (ueb, klb, gb)
        })
    });
    let mut u_bar = s.u.clone();
    for (e, part) in force_parts.iter().enumerate() {
        if let Some((ueb, _, _)) = part {
            for (i, &g) in plan.element_dofs[e].iter().enumerate() {
                if let Some(p) = dofs.free_of(g) {
                    u_bar[p] += ueb[i];
                }
            }
        }
    }

    let solve = u_bar.iter().any(|v| *v != 0.0);
    let y_free = if solve {
        a.solve(&u_bar)?
    } else {
        vec![0.0; u_bar.len()]
    };
    let mut y = vec![0.0; dofs.n_total()];
    for (p, &g) in dofs.free.iter().enumerate() {
        y[g] = y_free[p];
    }

    let bars = par::map_range(ne, |e| {
        let st = &a.states[e];
        let m = st.k_local.nrows();
        let (mut klb, mut gb) = match &force_parts[e] {
            Some((_, klb, gb)) => (klb.clone(), gb.clone()),
            None => (DMatrix::zeros(m, m), DMatrix::zeros(m, st.n_dofs())),
        };
        if solve {
            // k̄ = −y_e u_eᵀ, the element slice of K̄ = −y uᵀ
            let ye = plan.element_vector(e, &y);
            let ue = plan.element_vector(e, &a.u);
            let kb = -(&ye * ue.transpose());
            st.stiffness_adjoint(&kb, &mut klb, &mut gb);
        }
        element_chain(a, e, &klb, &gb, &s.section[e], s.length[e], s.tube[e])
    });

    Ok(assemble_bar(a, &bars, y_free))
}

fn assemble_bar(a: &Analysis, bars: &[ElementBar], loads: Vec<f64>) -> ModelBar {
    let mut positions = vec![Vec3::zeros(); a.model.nodes.len()];
    for (el, b) in a.model.elements.iter().zip(bars) {
        positions[el.nodes[1]] += b.delta;
        positions[el.nodes[0]] -= b.delta;
    }
    ModelBar {
        positions,
        sections: bars.iter().map(|b| b.section).collect(),
        tube: bars.iter().map(|b| b.tube).collect(),
        loads,
    }
}

/// Local-stiffness and rotation adjoints of one element down to its section,
/// tube and end-to-end vector adjoints, with direct seeds added on the way.
fn element_chain(
    a: &Analysis,
    e: usize,
    klb: &DMatrix<f64>,
    gb: &DMatrix<f64>,
    section_seed: &SectionBar,
    length_seed: f64,
    tube_seed: (f64, f64),
) -> ElementBar {
    let st = &a.states[e];
    let (mut section, mut l_bar) =
        local_stiffness_adjoint(st.kind, st.e, st.g, &st.props, st.length, klb);
    section.add(section_seed);
    l_bar += length_seed;
    let mut tube = tube_seed;
    if let Section::Tube { d, alpha } = a.model.elements[e].section {
        let (db, ab) = tube_section_adjoint(d, alpha, &section);
        tube.0 += db;
        tube.1 += ab;
    }
    let c_bar = st.gamma_adjoint(gb);
    ElementBar {
        section,
        tube,
        delta: st.delta_adjoint(&c_bar, l_bar),
    }
}

const BAR_LEN: usize = 10;

impl ElementBar {
    fn to_array(&self) -> [f64; BAR_LEN] {
        let s = &self.section;
        [
            s.a,
            s.iy,
            s.iz,
            s.j,
            s.s,
            self.tube.0,
            self.tube.1,
            self.delta.x,
            self.delta.y,
            self.delta.z,
        ]
    }

    fn from_array(v: &[f64]) -> ElementBar {
        ElementBar {
            section: SectionBar {
                a: v[0],
                iy: v[1],
                iz: v[2],
                j: v[3],
                s: v[4],
            },
            tube: (v[5], v[6]),
            delta: Vec3::new(v[7], v[8], v[9]),
        }
    }
}

/// The stiffness path of the reverse pass is linear in each element's slice
/// y_e of the adjoint solution, so for a fixed state it collapses to one small
/// matrix per element. Building it costs one element pass per local DOF; every
/// further output then needs only a solve and a handful of mat-vecs.
pub struct ElementTable {
    maps: Vec<DMatrix<f64>>,
}

impl ElementTable {
    pub fn new(analyzer: &Analyzer, a: &Analysis) -> ElementTable {
        let plan = &analyzer.plan;
        let maps = par::map_range(a.states.len(), |e| {
            let st = &a.states[e];
            let n = st.n_dofs();
            let m = st.k_local.nrows();
            let ue = plan.element_vector(e, &a.u);
            let mut map = DMatrix::zeros(BAR_LEN, n);
            for k in 0..n {
                let mut klb = DMatrix::zeros(m, m);
                let mut gb = DMatrix::zeros(m, n);
                let mut kb = DMatrix::zeros(n, n);
                for c in 0..n {
                    kb[(k, c)] = -ue[c];
                }
                st.stiffness_adjoint(&kb, &mut klb, &mut gb);
                let bar = element_chain(a, e, &klb, &gb, &SectionBar::default(), 0.0, (0.0, 0.0));
                map.column_mut(k).copy_from_slice(&bar.to_array());
            }
            map
        });
        ElementTable { maps }
    }
}

/// Same result as [`reverse`], using a precomputed [`ElementTable`].
pub fn reverse_tabulated(
    analyzer: &Analyzer,
    a: &Analysis,
    table: &ElementTable,
    s: &Seeds,
) -> Result<ModelBar> {
    let plan = &analyzer.plan;
    let dofs = &analyzer.dofs;
    let ne = a.states.len();

    let mut u_bar = s.u.clone();
    let mut direct: Vec<Option<ElementBar>> = vec![None; ne];
    for e in 0..ne {
        let seeded = s.forces[e].is_some()
            || s.section[e] != SectionBar::default()
            || s.length[e] != 0.0
            || s.tube[e] != (0.0, 0.0);
        if !seeded {
            continue;
        }
        let st = &a.states[e];
        let n = st.n_dofs();
        let m = st.k_local.nrows();
        let mut klb = DMatrix::zeros(m, m);
        let mut gb = DMatrix::zeros(m, n);
        if let Some(fb) = &s.forces[e] {
            let ue = plan.element_vector(e, &a.u);
            let ueb = st.end_forces_adjoint(&ue, fb, &mut klb, &mut gb);
            for (i, &g) in plan.element_dofs[e].iter().enumerate() {
                if let Some(p) = dofs.free_of(g) {
                    u_bar[p] += ueb[i];
                }
            }
        }
        direct[e] = Some(element_chain(
            a,
            e,
            &klb,
            &gb,
            &s.section[e],
            s.length[e],
            s.tube[e],
        ));
    }

    let solve = u_bar.iter().any(|v| *v != 0.0);
    let y_free = if solve {
        a.solve(&u_bar)?
    } else {
        vec![0.0; u_bar.len()]
    };
    let mut y = vec![0.0; dofs.n_total()];
    for (p, &g) in dofs.free.iter().enumerate() {
        y[g] = y_free[p];
    }
    let bars: Vec<ElementBar> = (0..ne)
        .map(|e| {
            let mut v = [0.0; BAR_LEN];
            if let Some(d) = &direct[e] {
                v = d.to_array();
            }
            if solve {
                let map = &table.maps[e];
                for (k, &g) in plan.element_dofs[e].iter().enumerate() {
                    let yk = y[g];
                    if yk != 0.0 {
                        for (r, vr) in v.iter_mut().enumerate() {
                            *vr += map[(r, k)] * yk;
                        }
                    }
                }
            }
            ElementBar::from_array(&v)
        })
        .collect();
    Ok(assemble_bar(a, &bars, y_free))
}

/// Chain model adjoints through the design parameterization.
pub fn variable_gradient(problem: &Problem, bar: &ModelBar) -> Vec<f64> {
    problem
        .variables
        .iter()
        .map(|v| match &v.kind {
            VariableKind::NodeOffset(t) => t
                .iter()
                .map(|t| t.coefficient * bar.positions[t.node][t.axis.index()])
                .sum(),
            VariableKind::ProjectedOffset(t) => t
                .iter()
                .map(|t| t.direction.dot(&bar.positions[t.node]))
                .sum(),
            VariableKind::Area(els) => els.iter().map(|&e| bar.sections[e].a).sum(),
            VariableKind::TubeDiameter(els) => els.iter().map(|&e| bar.tube[e].0).sum(),
            VariableKind::TubeRatio(els) => els.iter().map(|&e| bar.tube[e].1).sum(),
        })
        .collect()
}

/// Gradient of one output with respect to the design variables.
pub fn gradient(
    problem: &Problem,
    analyzer: &Analyzer,
    a: &Analysis,
    out: Output,
) -> Result<Vec<f64>> {
    let s = seeds(problem, analyzer, a, out);
    let bar = reverse(analyzer, a, &s)?;
    Ok(variable_gradient(problem, &bar))
}

/// Objective gradient and constraint Jacobian (rows in constraint order).
pub fn jacobian(
    problem: &Problem,
    analyzer: &Analyzer,
    a: &Analysis,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let table = ElementTable::new(analyzer, a);
    let grad = |out| -> Result<Vec<f64>> {
        let s = seeds(problem, analyzer, a, out);
        Ok(variable_gradient(
            problem,
            &reverse_tabulated(analyzer, a, &table, &s)?,
        ))
    };
    let obj = grad(Output::Objective)?;
    let rows = par::try_map_range(problem.rows.len(), |i| grad(Output::Constraint(i)))?;
    Ok((obj, rows))
}

/// Default relative step for central differences.
pub const FD_STEP: f64 = 1e-6;

/// Central-difference Jacobian of the objective and all constraints:
/// `result[k][j]` is ∂(output k)/∂x_j, output 0 being the objective.
pub fn finite_difference(
    problem: &Problem,
    analyzer: &Analyzer,
    x: &[f64],
    rel_step: f64,
) -> Result<Vec<Vec<f64>>> {
    let outputs: Vec<Output> = std::iter::once(Output::Objective)
        .chain((0..problem.rows.len()).map(Output::Constraint))
        .collect();
    let eval = |xs: &[f64]| -> Result<Vec<f64>> {
        let a = analyzer.analyze(problem, xs)?;
        Ok(outputs
            .iter()
            .map(|&o| output_value(problem, analyzer, &a, o))
            .collect())
    };
    let columns = par::try_map_range(x.len(), |j| {
        let h = rel_step * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let wrap = |e: Error| Error::Stencil {
            coordinate: j,
            source: Box::new(e),
        };
        let fp = eval(&xp).map_err(wrap)?;
        let fm = eval(&xm).map_err(wrap)?;
        Ok::<_, Error>(
            fp.iter()
                .zip(&fm)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect::<Vec<f64>>(),
        )
    })?;
    Ok((0..outputs.len())
        .map(|k| columns.iter().map(|c| c[k]).collect())
        .collect())
}

/// Central-difference gradient of a single output.
pub fn finite_difference_output(
    problem: &Problem,
    analyzer: &Analyzer,
    x: &[f64],
    out: Output,
    rel_step: f64,
) -> Result<Vec<f64>> {
    par::try_map_range(x.len(), |j| {
        let h = rel_step * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let wrap = |e: Error| Error::Stencil {
            coordinate: j,
            source: Box::new(e),
        };
        let fp = output_value(
            problem,
            analyzer,
            &analyzer.analyze(problem, &xp).map_err(wrap)?,
            out,
        );
        let fm = output_value(
            problem,
            analyzer,
            &analyzer.analyze(problem, &xm).map_err(wrap)?,
            out,
        );
        Ok((fp - fm) / (2.0 * h))
    })
}

/// Default relative step of the fourth-order stencil.
pub const FD4_STEP: f64 = 1e-3;

/// Step for coordinate `j`: relative to |x_j| for positive-only (sizing)
/// variables so the stencil never leaves the domain, else to max(|x_j|, 1).
pub fn stencil_step(problem: &Problem, x: &[f64], j: usize, rel: f64) -> f64 {
    if problem.variables[j].lower > 0.0 {
        rel * x[j].abs()
    } else {
        rel * x[j].abs().max(1.0)
    }
}

/// Fourth-order central differences of several outputs,
/// (8[f(x+h) − f(x−h)] − [f(x+2h) − f(x−2h)]) / 12h. Truncation error is
/// O(h⁴), so a much larger step keeps round-off near machine precision.
/// `result[k][j]` is ∂(outputs[k])/∂x_j.
pub fn finite_difference4(
    problem: &Problem,
    analyzer: &Analyzer,
    x: &[f64],
    outputs: &[Output],
    rel_step: f64,
) -> Result<Vec<Vec<f64>>> {
    let columns = par::try_map_range(x.len(), |j| {
        let h = stencil_step(problem, x, j, rel_step);
        let at = |k: f64| -> Result<Vec<f64>> {
            let mut xs = x.to_vec();
            xs[j] += k * h;
            let a = analyzer.analyze(problem, &xs).map_err(|e| Error::Stencil {
                coordinate: j,
                source: Box::new(e),
            })?;
            Ok(outputs
                .iter()
                .map(|&o| output_value(problem, analyzer, &a, o))
                .collect())
        };
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        Ok::<_, Error>(
            (0..outputs.len())
                .map(|k| (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h))
                .collect::<Vec<f64>>(),
        )
    })?;
    Ok((0..outputs.len())
        .map(|k| columns.iter().map(|c| c[k]).collect())
        .collect())
}

/// [`finite_difference4`] for a single output.
pub fn finite_difference_output4(
    problem: &Problem,
    analyzer: &Analyzer,
    x: &[f64],
    out: Output,
    rel_step: f64,
) -> Result<Vec<f64>> {
    Ok(finite_difference4(problem, analyzer, x, &[out], rel_step)?.remove(0))
}

/// Agreement test used by gradient checks: |a − f| ≤ max(rel·max(|a|,|f|), abs).
pub fn agrees(adjoint: f64, fd: f64, rel: f64, abs: f64) -> bool {
    (adjoint - fd).abs() <= (rel * adjoint.abs().max(fd.abs())).max(abs)
}

/// Largest relative error between two gradients, scaled by the larger norm entry.
pub fn max_relative_error(adjoint: &[f64], fd: &[f64]) -> f64 {
    let scale = adjoint
        .iter()
        .chain(fd)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    adjoint
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Dense oracle for ∂u/∂K: entry `[i][(k, l)]` = ∂u_i/∂K_kl = −(K⁻¹)_ik u_l,
/// treating every entry of K as independent. Refuses n > 12.
pub fn dense_du_dk(k: &DMatrix<f64>, f: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
    let n = k.nrows();
    if n > 12 {
        return Err(Error::OracleTooLarge(n));
    }
    let kinv = k
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite { pivot: 0 })?;
    let u = &kinv * f;
    Ok((0..n)
        .map(|i| DMatrix::from_fn(n, n, |r, c| -kinv[(i, r)] * u[c]))
        .collect())
}
