//! Element kinematics, stiffness matrices, section properties and their
//! reverse-mode derivatives.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ElementKind, Model};

type Vec3 = Vector3<f64>;

/// Cross-section properties in m², m⁴ and m³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionProperties {
    pub a: f64,
    pub iy: f64,
    pub iz: f64,
    pub j: f64,
    /// Elastic section modulus used for the bending part of combined stress.
    pub s: f64,
}

/// Adjoints of the section properties.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SectionBar {
    pub a: f64,
    pub iy: f64,
    pub iz: f64,
    pub j: f64,
    pub s: f64,
}

impl SectionBar {
    pub fn add(&mut self, o: &SectionBar) {
        self.a += o.a;
        self.iy += o.iy;
        self.iz += o.iz;
        self.j += o.j;
        self.s += o.s;
    }
}

/// Circular hollow section with outer diameter `d` and inner/outer ratio `alpha`.
pub fn tube_section_properties(d: f64, alpha: f64) -> Result<SectionProperties> {
    if !(d > 0.0 && d.is_finite() && (0.0..1.0).contains(&alpha)) {
        return Err(Error::InvalidInput(format!(
            "tube needs d > 0 and 0 <= alpha < 1, got d = {d}, alpha = {alpha}"
        )));
    }
    let pi = std::f64::consts::PI;
    let a = pi * d * d / 4.0 * (1.0 - alpha * alpha);
    let i = pi * d.powi(4) / 64.0 * (1.0 - alpha.powi(4));
    Ok(SectionProperties {
        a,
        iy: i,
        iz: i,
        j: 2.0 * i,
        s: 2.0 * i / d,
    })
}

/// Pull section-property adjoints back to (d̄, ᾱ).
pub fn tube_section_adjoint(d: f64, alpha: f64, bar: &SectionBar) -> (f64, f64) {
    let pi = std::f64::consts::PI;
    let a2 = alpha * alpha;
    let a4 = a2 * a2;
    let ibar = bar.iy + bar.iz + 2.0 * bar.j;
    let d_bar = bar.a * pi * d / 2.0 * (1.0 - a2)
        + ibar * pi * d.powi(3) / 16.0 * (1.0 - a4)
        + bar.s * 3.0 * pi * d * d / 32.0 * (1.0 - a4);
    let alpha_bar = -bar.a * pi * d * d * alpha / 2.0
        - ibar * pi * d.powi(4) * alpha.powi(3) / 16.0
        - bar.s * pi * d.powi(3) * alpha.powi(3) / 8.0;
    (d_bar, alpha_bar)
}

/// Local frame axes (rows x, y, z) for a member along unit vector `c`,
/// rolled by `roll` radians about `c`.
pub fn frame_rotation(c: &Vec3, roll: f64) -> Matrix3<f64> {
    let (y0, z0, _) = frame_reference_axes(c);
    let (s, co) = roll.sin_cos();
    let y = y0 * co + z0 * s;
    let z = -y0 * s + z0 * co;
    Matrix3::from_rows(&[c.transpose(), y.transpose(), z.transpose()])
}

/// Unrolled y and z axes plus the reference vector used to build them.
fn frame_reference_axes(c: &Vec3) -> (Vec3, Vec3, Vec3) {
    let r = if c.z.abs() > 1.0 - 1e-6 {
        Vec3::x()
    } else {
        Vec3::z()
    };
    let y0 = r.cross(c).normalize();
    let z0 = c.cross(&y0);
    (y0, z0, r)
}

/// Reverse of [`frame_rotation`]: accumulate c̄ from R̄.
pub fn frame_rotation_adjoint(c: &Vec3, roll: f64, r_bar: &Matrix3<f64>) -> Vec3 {
    let (y0, _, r) = frame_reference_axes(c);
    let (s, co) = roll.sin_cos();
    let y_bar: Vec3 = r_bar.row(1).transpose();
    let z_bar: Vec3 = r_bar.row(2).transpose();
    let mut c_bar: Vec3 = r_bar.row(0).transpose();
    let mut y0_bar = y_bar * co - z_bar * s;
    let z0_bar = y_bar * s + z_bar * co;
    c_bar += y0.cross(&z0_bar);
    y0_bar += z0_bar.cross(c);
    let w = r.cross(c);
    let n = w.norm();
    let w_bar = (y0_bar - y0 * y0.dot(&y0_bar)) / n;
    c_bar += w_bar.cross(&r);
    c_bar
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    Axial,
    Torsion,
    Z3,
    Z2,
    Z1,
    Y3,
    Y2,
    Y1,
}

/// Upper-triangle entries of the 12×12 local frame stiffness as
/// (row, col, pattern value, term). Each term scales by its own stiffness factor.
const FRAME_ENTRIES: [(usize, usize, f64, Term); 26] = [
    (0, 0, 1.0, Term::Axial),
    (6, 6, 1.0, Term::Axial),
    (0, 6, -1.0, Term::Axial),
    (3, 3, 1.0, Term::Torsion),
    (9, 9, 1.0, Term::Torsion),
    (3, 9, -1.0, Term::Torsion),
    (1, 1, 12.0, Term::Z3),
    (7, 7, 12.0, Term::Z3),
    (1, 7, -12.0, Term::Z3),
    (1, 5, 6.0, Term::Z2),
    (1, 11, 6.0, Term::Z2),
    (5, 7, -6.0, Term::Z2),
    (7, 11, -6.0, Term::Z2),
    (5, 5, 4.0, Term::Z1),
    (11, 11, 4.0, Term::Z1),
    (5, 11, 2.0, Term::Z1),
    (2, 2, 12.0, Term::Y3),
    (8, 8, 12.0, Term::Y3),
    (2, 8, -12.0, Term::Y3),
    (2, 4, -6.0, Term::Y2),
    (2, 10, -6.0, Term::Y2),
    (4, 8, 6.0, Term::Y2),
    (8, 10, 6.0, Term::Y2),
    (4, 4, 4.0, Term::Y1),
    (10, 10, 4.0, Term::Y1),
    (4, 10, 2.0, Term::Y1),
];

fn frame_factor(term: Term, e: f64, g: f64, p: &SectionProperties, l: f64) -> f64 {
    match term {
        Term::Axial => e * p.a / l,
        Term::Torsion => g * p.j / l,
        Term::Z3 => e * p.iz / l.powi(3),
        Term::Z2 => e * p.iz / (l * l),
        Term::Z1 => e * p.iz / l,
        Term::Y3 => e * p.iy / l.powi(3),
        Term::Y2 => e * p.iy / (l * l),
        Term::Y1 => e * p.iy / l,
    }
}

/// 12×12 Euler–Bernoulli stiffness in local axes, DOFs (ux, uy, uz, rx, ry, rz) per end.
pub fn frame_local_stiffness(e: f64, g: f64, p: &SectionProperties, l: f64) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(12, 12);
    for &(i, j, v, t) in FRAME_ENTRIES.iter() {
        let x = v * frame_factor(t, e, g, p, l);
        k[(i, j)] = x;
        k[(j, i)] = x;
    }
    k
}

/// 2×2 axial stiffness of a bar in its local axis.
pub fn truss_local_stiffness(e: f64, a: f64, l: f64) -> DMatrix<f64> {
    let k = e * a / l;
    DMatrix::from_row_slice(2, 2, &[k, -k, -k, k])
}

/// Adjoint of the local stiffness with respect to section properties and length.
pub fn local_stiffness_adjoint(
    kind: ElementKind,
    e: f64,
    g: f64,
    p: &SectionProperties,
    l: f64,
    k_bar: &DMatrix<f64>,
) -> (SectionBar, f64) {
    match kind {
        ElementKind::Truss => {
            let s = k_bar[(0, 0)] - k_bar[(0, 1)] - k_bar[(1, 0)] + k_bar[(1, 1)];
            let bar = SectionBar {
                a: e / l * s,
                ..Default::default()
            };
            (bar, -e * p.a / (l * l) * s)
        }
        ElementKind::Frame => {
            // contraction of k̄ with each constant pattern
            let mut s = [0.0; 8];
            for &(i, j, v, t) in FRAME_ENTRIES.iter() {
                let c = if i == j {
                    k_bar[(i, j)]
                } else {
                    k_bar[(i, j)] + k_bar[(j, i)]
                };
                s[t as usize] += v * c;
            }
            let [sa, st, z3, z2, z1, y3, y2, y1] = s;
            let bar = SectionBar {
                a: e / l * sa,
                j: g / l * st,
                iz: e * (z3 / l.powi(3) + z2 / (l * l) + z1 / l),
                iy: e * (y3 / l.powi(3) + y2 / (l * l) + y1 / l),
                s: 0.0,
            };
            let l_bar = -e * p.a / (l * l) * sa - g * p.j / (l * l) * st
                + e * p.iz * (-3.0 * z3 / l.powi(4) - 2.0 * z2 / l.powi(3) - z1 / (l * l))
                + e * p.iy * (-3.0 * y3 / l.powi(4) - 2.0 * y2 / l.powi(3) - y1 / (l * l));
            (bar, l_bar)
        }
    }
}

/// Everything about one element in one design state that the forward and
/// reverse passes need.
#[derive(Debug, Clone)]
pub struct ElementState {
    pub kind: ElementKind,
    pub length: f64,
    /// Unit vector from the first to the second node.
    pub direction: Vec3,
    pub roll: f64,
    pub e: f64,
    pub g: f64,
    pub props: SectionProperties,
    /// Local-from-global transformation (2×6 for bars, 12×12 for frames).
    pub gamma: DMatrix<f64>,
    pub k_local: DMatrix<f64>,
    /// Global-axes element stiffness Γᵀ k′ Γ.
    pub k: DMatrix<f64>,
}

impl ElementState {
    pub fn new(model: &Model, index: usize) -> Result<ElementState> {
        let el = &model.elements[index];
        let delta = model.nodes[el.nodes[1]].position - model.nodes[el.nodes[0]].position;
        let length = delta.norm();
        if !(length > 1e-12) {
            return Err(Error::ZeroLength { element: el.id });
        }
        let direction = delta / length;
        let mat = &model.materials[el.material];
        let props = el.section.properties()?;
        let (gamma, k_local) = match el.kind {
            ElementKind::Truss => {
                let mut gamma = DMatrix::zeros(2, 6);
                for i in 0..3 {
                    gamma[(0, i)] = direction[i];
                    gamma[(1, 3 + i)] = direction[i];
                }
                (gamma, truss_local_stiffness(mat.e, props.a, length))
            }
            ElementKind::Frame => {
                let r = frame_rotation(&direction, el.roll);
                let mut gamma = DMatrix::zeros(12, 12);
                for b in 0..4 {
                    gamma.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(&r);
                }
                (gamma, frame_local_stiffness(mat.e, mat.g, &props, length))
            }
        };
        let k = gamma.transpose() * &k_local * &gamma;
        Ok(ElementState {
            kind: el.kind,
            length,
            direction,
            roll: el.roll,
            e: mat.e,
            g: mat.g,
            props,
            gamma,
            k_local,
            k,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.gamma.ncols()
    }

    /// Member-end forces in local axes, F = k′ Γ u_e.
    pub fn end_forces(&self, u_e: &DVector<f64>) -> DVector<f64> {
        &self.k_local * (&self.gamma * u_e)
    }

    /// Axial force, positive in tension.
    pub fn axial_force(forces: &DVector<f64>, kind: ElementKind) -> f64 {
        match kind {
            ElementKind::Truss => forces[1],
            ElementKind::Frame => forces[6],
        }
    }

    /// Reverse of [`ElementState::end_forces`]: given F̄, accumulate into
    /// k̄′, Γ̄ and return ū_e.
    pub fn end_forces_adjoint(
        &self,
        u_e: &DVector<f64>,
        f_bar: &DVector<f64>,
        k_local_bar: &mut DMatrix<f64>,
        gamma_bar: &mut DMatrix<f64>,
    ) -> DVector<f64> {
        let gu = &self.gamma * u_e;
        *k_local_bar += f_bar * gu.transpose();
        let kf = self.k_local.transpose() * f_bar;
        *gamma_bar += &kf * u_e.transpose();
        self.gamma.transpose() * kf
    }

    /// Reverse of k = Γᵀ k′ Γ: accumulate into k̄′ and Γ̄.
    pub fn stiffness_adjoint(
        &self,
        k_bar: &DMatrix<f64>,
        k_local_bar: &mut DMatrix<f64>,
        gamma_bar: &mut DMatrix<f64>,
    ) {
        let gk = &self.gamma * k_bar;
        *k_local_bar += &gk * self.gamma.transpose();
        let kg = &self.k_local * &self.gamma;
        *gamma_bar += &kg * (k_bar.transpose() + k_bar);
    }

    /// Pull Γ̄ back to the member direction c̄.
    pub fn gamma_adjoint(&self, gamma_bar: &DMatrix<f64>) -> Vec3 {
        match self.kind {
            ElementKind::Truss => {
                let mut c = Vec3::zeros();
                for i in 0..3 {
                    c[i] = gamma_bar[(0, i)] + gamma_bar[(1, 3 + i)];
                }
                c
            }
            ElementKind::Frame => {
                let mut r_bar = Matrix3::zeros();
                for b in 0..4 {
                    r_bar += gamma_bar.fixed_view::<3, 3>(3 * b, 3 * b);
                }
                frame_rotation_adjoint(&self.direction, self.roll, &r_bar)
            }
        }
    }

    /// Adjoint of the end-to-end vector Δ = x_j − x_i from c̄ and L̄.
    pub fn delta_adjoint(&self, c_bar: &Vec3, l_bar: f64) -> Vec3 {
        let c = &self.direction;
        self.direction * l_bar + (c_bar - c * c.dot(c_bar)) / self.length
    }
}
