//! Domain types, problem-file ingestion, DOF numbering and the design
//! parameterization that maps an optimization vector onto a model state.

pub mod schema;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::Vector3;

use crate::elements::{tube_section_properties, SectionProperties};
use crate::error::{Error, Result};
use crate::optimize::OptimizerSettings;
use schema::*;

pub use schema::ObjectiveKind;

pub type Vec3 = Vector3<f64>;

/// Stress limits in files are MPa; the engine works in kN/m².
pub const MPA: f64 = 1.0e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl From<AxisRecord> for Axis {
    fn from(a: AxisRecord) -> Self {
        match a {
            AxisRecord::X => Axis::X,
            AxisRecord::Y => Axis::Y,
            AxisRecord::Z => Axis::Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub position: Vec3,
    /// Fixed translations x, y, z and rotations rx, ry, rz.
    pub fixed: [bool; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub tag: String,
    /// kN/m²
    pub e: f64,
    /// kN/m²
    pub g: f64,
    /// kg/m³
    pub density: f64,
    /// kgCO₂e/kg
    pub ecc: f64,
    /// kN/m²
    pub stress_tension: f64,
    /// kN/m², positive magnitude
    pub stress_compression: f64,
    pub area: Option<BoundsRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Section {
    Explicit(SectionProperties),
    Tube { d: f64, alpha: f64 },
}

impl Section {
    pub fn properties(&self) -> Result<SectionProperties> {
        match *self {
            Section::Explicit(p) => Ok(p),
            Section::Tube { d, alpha } => tube_section_properties(d, alpha),
        }
    }

    pub fn tube(&self) -> Option<(f64, f64)> {
        match *self {
            Section::Tube { d, alpha } => Some((d, alpha)),
            Section::Explicit(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Truss,
    Frame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: usize,
    /// Node indices (not ids).
    pub nodes: [usize; 2],
    /// Material index.
    pub material: usize,
    pub section: Section,
    pub kind: ElementKind,
    /// Rotation of the local y/z axes about the member axis, radians (frames only).
    pub roll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    /// Node index.
    pub node: usize,
    pub force: Vec3,
    pub moment: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    /// Element indices.
    pub elements: Vec<usize>,
}

/// Immutable description of a structure in one design state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub nodes: Vec<Node>,
    pub materials: Vec<Material>,
    pub elements: Vec<Element>,
    pub loads: Vec<Load>,
    pub groups: Vec<Group>,
}

impl Model {
    pub fn has_frames(&self) -> bool {
        self.elements.iter().any(|e| e.kind == ElementKind::Frame)
    }

    pub fn node_index(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn element_index(&self, id: usize) -> Option<usize> {
        self.elements.iter().position(|e| e.id == id)
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn element_length(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        (self.nodes[el.nodes[1]].position - self.nodes[el.nodes[0]].position).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetTarget {
    pub node: usize,
    pub axis: Axis,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionTarget {
    pub node: usize,
    pub direction: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VariableKind {
    /// position += coefficient · x along an axis, per target node.
    NodeOffset(Vec<OffsetTarget>),
    /// position += x · direction, per target node.
    ProjectedOffset(Vec<ProjectionTarget>),
    /// Cross-section area of explicit sections (element indices).
    Area(Vec<usize>),
    /// Outer diameter of tube sections.
    TubeDiameter(Vec<usize>),
    /// Inner/outer diameter ratio of tube sections.
    TubeRatio(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignVariable {
    pub name: String,
    pub kind: VariableKind,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
}

/// Stress limits in kN/m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StressLimit {
    Symmetric(f64),
    Split {
        compression: f64,
        tension: f64,
    },
    /// Use each element's material tension/compression strength.
    Material,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    Displacement {
        nodes: Vec<usize>,
        axis: Axis,
        limit: f64,
    },
    AxialStress {
        elements: Vec<usize>,
        limit: StressLimit,
    },
    CombinedStress {
        elements: Vec<usize>,
        limit: f64,
    },
    DiameterOrdering {
        lesser: String,
        greater: String,
    },
}

/// One scalar row of the normalized constraint vector g (feasible when g ≤ 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintRow {
    /// |u_axis(node)| / limit − 1
    Displacement { node: usize, axis: Axis, limit: f64 },
    /// |σ| / limit − 1
    StressAbs { element: usize, limit: f64 },
    /// σ / σ_t − 1
    StressTension { element: usize, limit: f64 },
    /// −σ / σ_c − 1
    StressCompression { element: usize, limit: f64 },
    /// (|F|/A + |M|/S) / limit − 1
    Combined { element: usize, limit: f64 },
    /// d_lesser / d_greater − 1, each read from a representative element
    DiameterRatio { lesser: usize, greater: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub notes: Vec<String>,
    /// Model as written in the file (variables not yet applied).
    pub model: Model,
    pub variables: Vec<DesignVariable>,
    pub objective: ObjectiveKind,
    pub constraints: Vec<ConstraintSpec>,
    pub rows: Vec<ConstraintRow>,
    pub optimizer: OptimizerSettings,
    /// The validated source document, kept for echoing and re-derivation.
    pub source: ProblemFile,
}

impl Problem {
    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn initial(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.initial).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.upper).collect()
    }

    /// Parse and validate a JSON document.
    pub fn from_json(text: &str) -> Result<Problem> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| {
            let message = e.to_string();
            if message.contains("number out of range") {
                Error::Unit(message)
            } else {
                Error::Parse {
                    line: e.line(),
                    column: e.column(),
                    message,
                }
            }
        })?;
        Problem::from_file(file)
    }

    pub fn from_file(file: ProblemFile) -> Result<Problem> {
        validate_problem(file)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.source).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// Read, parse and validate a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let text = std::fs::read_to_string(path)?;
    Problem::from_json(&text)
}

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Unit(format!("{what} contains a non-finite number")))
    }
}

fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

fn validate_problem(file: ProblemFile) -> Result<Problem> {
    // Nodes
    let mut node_ids = HashMap::new();
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for (i, n) in file.nodes.iter().enumerate() {
        check_finite(&format!("node {}", n.id), &n.xyz)?;
        if node_ids.insert(n.id, i).is_some() {
            return validation(format!("duplicate node id {}", n.id));
        }
        nodes.push(Node {
            id: n.id,
            position: Vec3::from(n.xyz),
            fixed: n.fixed,
        });
    }

    // Materials
    let mut material_ids = HashMap::new();
    let mut materials = Vec::with_capacity(file.materials.len());
    for (i, m) in file.materials.iter().enumerate() {
        check_finite(
            &format!("material {}", m.name),
            &[m.e, m.g, m.rho, m.ecc, m.sigma_t, m.sigma_c],
        )?;
        if material_ids.insert(m.name.clone(), i).is_some() {
            return validation(format!("duplicate material {}", m.name));
        }
        if !(m.e > 0.0
            && m.g > 0.0
            && m.rho >= 0.0
            && m.ecc >= 0.0
            && m.sigma_t > 0.0
            && m.sigma_c > 0.0)
        {
            return validation(format!("material {} has non-positive properties", m.name));
        }
        if let Some(b) = &m.area {
            check_finite(
                &format!("material {} area bounds", m.name),
                &[b.lower, b.initial, b.upper],
            )?;
            if !(b.lower <= b.initial && b.initial <= b.upper && b.lower > 0.0) {
                return validation(format!("material {} area bounds out of order", m.name));
            }
        }
        let tag = m.tag.clone().unwrap_or_else(|| {
            m.name
                .chars()
                .next()
                .map(|c| c.to_ascii_uppercase().to_string())
                .unwrap_or_default()
        });
        materials.push(Material {
            name: m.name.clone(),
            tag,
            e: m.e,
            g: m.g,
            density: m.rho,
            ecc: m.ecc,
            stress_tension: m.sigma_t * MPA,
            stress_compression: m.sigma_c * MPA,
            area: m.area,
        });
    }

    // Sections
    let mut sections = HashMap::new();
    for s in &file.sections {
        let section = match (s.tube, s.a, s.iy, s.iz, s.j, s.s) {
            (Some(t), None, None, None, None, None) => {
                check_finite(&format!("section {}", s.name), &[t.d, t.alpha])?;
                if !(t.d > 0.0 && (0.0..1.0).contains(&t.alpha)) {
                    return validation(format!(
                        "tube section {} needs d > 0 and 0 <= alpha < 1",
                        s.name
                    ));
                }
                Section::Tube {
                    d: t.d,
                    alpha: t.alpha,
                }
            }
            (None, Some(a), Some(iy), Some(iz), Some(j), Some(sm)) => {
                check_finite(&format!("section {}", s.name), &[a, iy, iz, j, sm])?;
                if !(a > 0.0 && iy > 0.0 && iz > 0.0 && j > 0.0 && sm > 0.0) {
                    return validation(format!("section {} has non-positive properties", s.name));
                }
                Section::Explicit(SectionProperties {
                    a,
                    iy,
                    iz,
                    j,
                    s: sm,
                })
            }
            _ => {
                return validation(format!(
                    "section {} must be either explicit (A, Iy, Iz, J, S) or a tube",
                    s.name
                ))
            }
        };
        if sections.insert(s.name.clone(), section).is_some() {
            return validation(format!("duplicate section {}", s.name));
        }
    }

    // Elements
    let mut element_ids = HashMap::new();
    let mut elements = Vec::with_capacity(file.elements.len());
    for (i, e) in file.elements.iter().enumerate() {
        check_finite(&format!("element {}", e.id), &[e.roll])?;
        if element_ids.insert(e.id, i).is_some() {
            return validation(format!("duplicate element id {}", e.id));
        }
        let a = *node_ids.get(&e.nodes[0]).ok_or_else(|| {
            Error::Validation(format!(
                "element {} references missing node {}",
                e.id, e.nodes[0]
            ))
        })?;
        let b = *node_ids.get(&e.nodes[1]).ok_or_else(|| {
            Error::Validation(format!(
                "element {} references missing node {}",
                e.id, e.nodes[1]
            ))
        })?;
        if a == b {
            return validation(format!(
                "element {} connects node {} to itself",
                e.id, e.nodes[0]
            ));
        }
        let material = *material_ids.get(&e.material).ok_or_else(|| {
            Error::Validation(format!(
                "element {} references missing material {}",
                e.id, e.material
            ))
        })?;
        let section = *sections.get(&e.section).ok_or_else(|| {
            Error::Validation(format!(
                "element {} references missing section {}",
                e.id, e.section
            ))
        })?;
        let kind = match e.kind {
            ElementKindRecord::Truss => ElementKind::Truss,
            ElementKindRecord::Frame => ElementKind::Frame,
        };
        elements.push(Element {
            id: e.id,
            nodes: [a, b],
            material,
            section,
            kind,
            roll: e.roll,
        });
    }
    if elements.is_empty() {
        return validation("model has no elements");
    }
    let frame_model = elements.iter().any(|e| e.kind == ElementKind::Frame);

    let resolve_elements = |ids: &[usize], what: &str| -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                element_ids.get(id).copied().ok_or_else(|| {
                    Error::Validation(format!("{what} references missing element {id}"))
                })
            })
            .collect()
    };

    // Groups
    let mut groups: Vec<Group> = Vec::new();
    for g in &file.groups {
        if groups.iter().any(|h| h.name == g.name) {
            return validation(format!("duplicate group {}", g.name));
        }
        if g.elements.is_empty() {
            return validation(format!("group {} is empty", g.name));
        }
        let els = resolve_elements(&g.elements, &format!("group {}", g.name))?;
        groups.push(Group {
            name: g.name.clone(),
            elements: els,
        });
    }
    let group_elements = |name: &str| -> Result<Vec<usize>> {
        groups
            .iter()
            .find(|g| g.name == name)
            .map(|g| g.elements.clone())
            .ok_or_else(|| Error::Validation(format!("unknown group {name}")))
    };

    // Loads
    let mut loads = Vec::with_capacity(file.loads.len());
    for l in &file.loads {
        check_finite(&format!("load on node {}", l.node), &l.force)?;
        check_finite(&format!("load on node {}", l.node), &l.moment)?;
        let node = *node_ids
            .get(&l.node)
            .ok_or_else(|| Error::Validation(format!("load references missing node {}", l.node)))?;
        if !frame_model && l.moment.iter().any(|m| *m != 0.0) {
            return validation(format!(
                "moment load on node {} in a truss-only model",
                l.node
            ));
        }
        loads.push(Load {
            node,
            force: Vec3::from(l.force),
            moment: Vec3::from(l.moment),
        });
    }

    let model = Model {
        nodes,
        materials,
        elements,
        loads,
        groups: groups.clone(),
    };

    // Variables
    let mut variables = Vec::with_capacity(file.variables.len());
    let mut owners: HashMap<(usize, &'static str), usize> = HashMap::new();
    for (vi, v) in file.variables.iter().enumerate() {
        let name = v.name.clone().unwrap_or_else(|| format!("x{vi}"));
        check_finite(&format!("variable {name}"), &[v.lower, v.upper, v.initial])?;
        if !(v.lower <= v.initial && v.initial <= v.upper) {
            return validation(format!(
                "variable {name}: bounds must satisfy lower <= initial <= upper"
            ));
        }
        let element_targets = |t: &ElementTargets| -> Result<Vec<usize>> {
            match (&t.elements, &t.group) {
                (Some(ids), None) if !ids.is_empty() => {
                    resolve_elements(ids, &format!("variable {name}"))
                }
                (None, Some(g)) => group_elements(g),
                _ => validation(format!(
                    "variable {name} needs a non-empty element list or a group"
                )),
            }
        };
        let kind = match &v.kind {
            VariableKindRecord::NodeOffset { targets } => {
                if targets.is_empty() {
                    return validation(format!("variable {name} has no targets"));
                }
                let mut out = Vec::new();
                for t in targets {
                    check_finite(&format!("variable {name}"), &[t.coefficient])?;
                    let node = *node_ids.get(&t.node).ok_or_else(|| {
                        Error::Validation(format!(
                            "variable {name} references missing node {}",
                            t.node
                        ))
                    })?;
                    out.push(OffsetTarget {
                        node,
                        axis: t.axis.into(),
                        coefficient: t.coefficient,
                    });
                }
                VariableKind::NodeOffset(out)
            }
            VariableKindRecord::ProjectedOffset { targets } => {
                if targets.is_empty() {
                    return validation(format!("variable {name} has no targets"));
                }
                let mut out = Vec::new();
                for t in targets {
                    check_finite(&format!("variable {name}"), &t.direction)?;
                    let node = *node_ids.get(&t.node).ok_or_else(|| {
                        Error::Validation(format!(
                            "variable {name} references missing node {}",
                            t.node
                        ))
                    })?;
                    let direction = Vec3::from(t.direction);
                    if (direction.norm() - 1.0).abs() > 1e-9 {
                        return validation(format!(
                            "variable {name}: projection direction must be a unit vector"
                        ));
                    }
                    out.push(ProjectionTarget { node, direction });
                }
                VariableKind::ProjectedOffset(out)
            }
            VariableKindRecord::Area(t) => {
                let els = element_targets(t)?;
                for &e in &els {
                    if !matches!(model.elements[e].section, Section::Explicit(_)) {
                        return validation(format!(
                            "variable {name}: area variable on element {} which has a tube section",
                            model.elements[e].id
                        ));
                    }
                    if v.lower <= 0.0 {
                        return validation(format!(
                            "variable {name}: area lower bound must be positive"
                        ));
                    }
                }
                VariableKind::Area(els)
            }
            VariableKindRecord::TubeDiameter(t) | VariableKindRecord::TubeRatio(t) => {
                let els = element_targets(t)?;
                let is_d = matches!(v.kind, VariableKindRecord::TubeDiameter(_));
                for &e in &els {
                    if !matches!(model.elements[e].section, Section::Tube { .. }) {
                        return validation(format!(
                            "variable {name}: tube variable on element {} which has an explicit section",
                            model.elements[e].id
                        ));
                    }
                }
                if is_d && v.lower <= 0.0 {
                    return validation(format!(
                        "variable {name}: diameter lower bound must be positive"
                    ));
                }
                if !is_d && (v.lower < 0.0 || v.upper >= 1.0) {
                    return validation(format!(
                        "variable {name}: tube ratio bounds must lie in [0, 1)"
                    ));
                }
                if is_d {
                    VariableKind::TubeDiameter(els)
                } else {
                    VariableKind::TubeRatio(els)
                }
            }
        };
        let property = match &kind {
            VariableKind::Area(_) => Some("area"),
            VariableKind::TubeDiameter(_) => Some("d"),
            VariableKind::TubeRatio(_) => Some("alpha"),
            _ => None,
        };
        if let (
            Some(p),
            VariableKind::Area(els)
            | VariableKind::TubeDiameter(els)
            | VariableKind::TubeRatio(els),
        ) = (property, &kind)
        {
            for &e in els {
                if let Some(prev) = owners.insert((e, p), vi) {
                    return validation(format!(
                        "element {} {p} is controlled by variables {prev} and {vi}",
                        model.elements[e].id
                    ));
                }
            }
        }
        variables.push(DesignVariable {
            name,
            kind,
            lower: v.lower,
            upper: v.upper,
            initial: v.initial,
        });
    }
    if variables.is_empty() {
        return validation("problem defines no design variables");
    }

    // Constraints
    let mut constraints = Vec::with_capacity(file.constraints.len());
    let mut rows = Vec::new();
    let select_elements = |s: &SelectorRecord, what: &str| -> Result<Vec<usize>> {
        let els = match s {
            SelectorRecord::Keyword(k) if k == "all" => (0..model.elements.len()).collect(),
            SelectorRecord::Keyword(k) => {
                return validation(format!("{what}: unknown selector {k}"))
            }
            SelectorRecord::Ids(ids) => resolve_elements(ids, what)?,
            SelectorRecord::Group { group } => group_elements(group)?,
        };
        if els.is_empty() {
            return validation(format!("{what}: empty selection"));
        }
        Ok(els)
    };
    for (ci, c) in file.constraints.iter().enumerate() {
        let what = format!("constraint {ci}");
        match c {
            ConstraintRecord::Displacement {
                nodes: sel,
                axis,
                limit,
            } => {
                check_finite(&what, &[*limit])?;
                if *limit <= 0.0 {
                    return validation(format!("{what}: limit must be positive"));
                }
                let ns: Vec<usize> = match sel {
                    SelectorRecord::Keyword(k) if k == "all" => (0..model.nodes.len()).collect(),
                    SelectorRecord::Ids(ids) => ids
                        .iter()
                        .map(|id| {
                            node_ids.get(id).copied().ok_or_else(|| {
                                Error::Validation(format!("{what} references missing node {id}"))
                            })
                        })
                        .collect::<Result<_>>()?,
                    _ => {
                        return validation(format!(
                            "{what}: node selector must be \"all\" or an id list"
                        ))
                    }
                };
                if ns.is_empty() {
                    return validation(format!("{what}: empty selection"));
                }
                let axis = Axis::from(*axis);
                rows.extend(ns.iter().map(|&node| ConstraintRow::Displacement {
                    node,
                    axis,
                    limit: *limit,
                }));
                constraints.push(ConstraintSpec::Displacement {
                    nodes: ns,
                    axis,
                    limit: *limit,
                });
            }
            ConstraintRecord::AxialStress {
                elements: sel,
                limit,
            } => {
                let els = select_elements(sel, &what)?;
                let limit = match limit {
                    StressLimitRecord::Symmetric(s) => {
                        check_finite(&what, &[*s])?;
                        if *s <= 0.0 {
                            return validation(format!("{what}: limit must be positive"));
                        }
                        StressLimit::Symmetric(s * MPA)
                    }
                    StressLimitRecord::Split {
                        compression,
                        tension,
                    } => {
                        check_finite(&what, &[*compression, *tension])?;
                        if *compression <= 0.0 || *tension <= 0.0 {
                            return validation(format!("{what}: limits must be positive"));
                        }
                        StressLimit::Split {
                            compression: compression * MPA,
                            tension: tension * MPA,
                        }
                    }
                    StressLimitRecord::Keyword(k) if k == "material" => StressLimit::Material,
                    StressLimitRecord::Keyword(k) => {
                        return validation(format!("{what}: unknown stress limit {k}"))
                    }
                };
                for &e in &els {
                    match limit {
                        StressLimit::Symmetric(s) => rows.push(ConstraintRow::StressAbs {
                            element: e,
                            limit: s,
                        }),
                        StressLimit::Split {
                            compression,
                            tension,
                        } => {
                            rows.push(ConstraintRow::StressTension {
                                element: e,
                                limit: tension,
                            });
                            rows.push(ConstraintRow::StressCompression {
                                element: e,
                                limit: compression,
                            });
                        }
                        StressLimit::Material => {
                            let m = &model.materials[model.elements[e].material];
                            rows.push(ConstraintRow::StressTension {
                                element: e,
                                limit: m.stress_tension,
                            });
                            rows.push(ConstraintRow::StressCompression {
                                element: e,
                                limit: m.stress_compression,
                            });
                        }
                    }
                }
                constraints.push(ConstraintSpec::AxialStress {
                    elements: els,
                    limit,
                });
            }
            ConstraintRecord::CombinedStress {
                elements: sel,
                limit,
            } => {
                check_finite(&what, &[*limit])?;
                if *limit <= 0.0 {
                    return validation(format!("{what}: limit must be positive"));
                }
                let els = select_elements(sel, &what)?;
                if let Some(&e) = els
                    .iter()
                    .find(|&&e| model.elements[e].kind != ElementKind::Frame)
                {
                    return validation(format!(
                        "{what}: combined stress needs frame elements, element {} is a truss",
                        model.elements[e].id
                    ));
                }
                let limit = limit * MPA;
                rows.extend(
                    els.iter()
                        .map(|&element| ConstraintRow::Combined { element, limit }),
                );
                constraints.push(ConstraintSpec::CombinedStress {
                    elements: els,
                    limit,
                });
            }
            ConstraintRecord::DiameterOrdering { lesser, greater } => {
                let l = group_elements(lesser)?;
                let g = group_elements(greater)?;
                for &e in l.iter().chain(g.iter()) {
                    if model.elements[e].section.tube().is_none() {
                        return validation(format!(
                            "{what}: element {} in a diameter ordering group is not a tube",
                            model.elements[e].id
                        ));
                    }
                }
                rows.push(ConstraintRow::DiameterRatio {
                    lesser: l[0],
                    greater: g[0],
                });
                constraints.push(ConstraintSpec::DiameterOrdering {
                    lesser: lesser.clone(),
                    greater: greater.clone(),
                });
            }
        }
    }

    file.optimizer.validate()?;

    Ok(Problem {
        name: file.name.clone().unwrap_or_else(|| "problem".to_string()),
        notes: file.notes.clone(),
        model,
        variables,
        objective: file.objective.kind,
        constraints,
        rows,
        optimizer: file.optimizer.clone(),
        source: file,
    })
}

/// Map a design vector onto a fresh model state. Bounds are not enforced here.
pub fn apply_variables(problem: &Problem, x: &[f64]) -> Result<Model> {
    if x.len() != problem.variables.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.variables.len(),
            found: x.len(),
        });
    }
    let mut model = problem.model.clone();
    for (v, &xi) in problem.variables.iter().zip(x) {
        match &v.kind {
            VariableKind::NodeOffset(targets) => {
                for t in targets {
                    model.nodes[t.node].position[t.axis.index()] += t.coefficient * xi;
                }
            }
            VariableKind::ProjectedOffset(targets) => {
                for t in targets {
                    model.nodes[t.node].position += t.direction * xi;
                }
            }
            VariableKind::Area(els) => {
                for &e in els {
                    if let Section::Explicit(p) = &mut model.elements[e].section {
                        p.a = xi;
                    }
                }
            }
            VariableKind::TubeDiameter(els) => {
                for &e in els {
                    if let Section::Tube { d, .. } = &mut model.elements[e].section {
                        *d = xi;
                    }
                }
            }
            VariableKind::TubeRatio(els) => {
                for &e in els {
                    if let Section::Tube { alpha, .. } = &mut model.elements[e].section {
                        *alpha = xi;
                    }
                }
            }
        }
    }
    Ok(model)
}

/// Node-to-global-DOF numbering with a free/fixed partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    pub dofs_per_node: usize,
    pub n_nodes: usize,
    /// Free index of every global DOF, `None` when fixed.
    pub free_index: Vec<Option<usize>>,
    /// Global DOFs that are free, in increasing order.
    pub free: Vec<usize>,
    /// Global DOFs that are fixed, in increasing order.
    pub fixed: Vec<usize>,
}

impl DofMap {
    pub fn n_total(&self) -> usize {
        self.free_index.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn global(&self, node: usize, local: usize) -> usize {
        node * self.dofs_per_node + local
    }

    pub fn free_of(&self, global: usize) -> Option<usize> {
        self.free_index[global]
    }

    /// Global DOFs of an element: translations of both ends for trusses,
    /// translations and rotations for frames.
    pub fn element_dofs(&self, element: &Element) -> Vec<usize> {
        let per_end = match element.kind {
            ElementKind::Truss => 3,
            ElementKind::Frame => 6,
        };
        element
            .nodes
            .iter()
            .flat_map(|&n| (0..per_end).map(move |l| n * self.dofs_per_node + l))
            .collect()
    }
}

/// Number DOFs node by node. Frame models carry six DOFs per node; rotations of
/// nodes touched only by truss elements are treated as fixed.
pub fn build_dof_map(model: &Model) -> Result<DofMap> {
    let dpn = if model.has_frames() { 6 } else { 3 };
    let mut rotational = vec![false; model.nodes.len()];
    for e in &model.elements {
        if e.kind == ElementKind::Frame {
            rotational[e.nodes[0]] = true;
            rotational[e.nodes[1]] = true;
        }
    }
    let mut free_index = Vec::with_capacity(model.nodes.len() * dpn);
    let mut free = Vec::new();
    let mut fixed = Vec::new();
    for (ni, node) in model.nodes.iter().enumerate() {
        for l in 0..dpn {
            let g = ni * dpn + l;
            let is_fixed = if l < 3 {
                node.fixed[l]
            } else {
                node.fixed[l] || !rotational[ni]
            };
            if is_fixed {
                fixed.push(g);
                free_index.push(None);
            } else {
                free_index.push(Some(free.len()));
                free.push(g);
            }
        }
    }
    if free.is_empty() {
        return Err(Error::NoFreeDofs);
    }
    Ok(DofMap {
        dofs_per_node: dpn,
        n_nodes: model.nodes.len(),
        free_index,
        free,
        fixed,
    })
}

/// Set of element indices touched by at least one design variable, per property.
pub fn controlled_elements(problem: &Problem) -> HashSet<usize> {
    let mut out = HashSet::new();
    for v in &problem.variables {
        if let VariableKind::Area(els)
        | VariableKind::TubeDiameter(els)
        | VariableKind::TubeRatio(els) = &v.kind
        {
            out.extend(els.iter().copied());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn unit_bar_loads() {
        let p = Problem::from_file(fixtures::unit_bar()).unwrap();
        assert_eq!(p.model.nodes.len(), 2);
        assert_eq!(p.model.elements.len(), 1);
        assert_eq!(p.model.elements[0].kind, ElementKind::Truss);
    }

    #[test]
    fn warren_counts() {
        let p = Problem::from_file(fixtures::warren()).unwrap();
        assert_eq!(p.model.nodes.len(), 25);
        assert_eq!(p.model.elements.len(), 47);
        assert_eq!(p.n_variables(), 36);
        assert_eq!(p.n_constraints(), 72);
    }

    #[test]
    fn dangling_area_variable_is_rejected() {
        let mut f = fixtures::unit_bar();
        f.variables[0].kind = VariableKindRecord::Area(ElementTargets::elements(vec![99]));
        let err = Problem::from_file(f).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn bad_bounds_are_rejected() {
        let mut f = fixtures::unit_bar();
        f.variables[0].initial = f.variables[0].upper + 1.0;
        assert!(matches!(Problem::from_file(f), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = Problem::from_json("{\n  \"nodes\": [,\n}").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn out_of_range_number_is_a_unit_error() {
        let text = serde_json::to_string(&fixtures::unit_bar())
            .unwrap()
            .replacen("\"E\":1.0", "\"E\":1e999", 1);
        assert!(matches!(Problem::from_json(&text), Err(Error::Unit(_))));
    }

    #[test]
    fn two_variables_on_one_area_are_rejected() {
        let mut f = fixtures::unit_bar();
        let dup = f.variables[0].clone();
        f.variables.push(dup);
        assert!(matches!(Problem::from_file(f), Err(Error::Validation(_))));
    }

    #[test]
    fn dof_map_unit_bar() {
        let p = Problem::from_file(fixtures::unit_bar()).unwrap();
        let d = build_dof_map(&p.model).unwrap();
        assert_eq!(d.n_free(), 1);
        assert_eq!(d.dofs_per_node, 3);
        assert_eq!(d.free, vec![3]);
    }

    #[test]
    fn dof_map_warren_has_47_free() {
        let p = Problem::from_file(fixtures::warren()).unwrap();
        let d = build_dof_map(&p.model).unwrap();
        assert_eq!(d.n_free(), 47);
        assert_eq!(d.n_free() + d.fixed.len(), d.n_total());
    }

    #[test]
    fn unsupported_frame_node_has_six_free_dofs() {
        let p = Problem::from_file(fixtures::cantilever_frame(1.0, 0.1, 0.5)).unwrap();
        let d = build_dof_map(&p.model).unwrap();
        assert_eq!(d.dofs_per_node, 6);
        let tip = (0..6)
            .filter(|&l| d.free_of(d.global(1, l)).is_some())
            .count();
        assert_eq!(tip, 6);
    }

    #[test]
    fn fully_fixed_model_has_no_free_dofs() {
        let mut f = fixtures::unit_bar();
        f.nodes[1].fixed = [true; 6];
        let p = Problem::from_file(f).unwrap();
        assert!(matches!(build_dof_map(&p.model), Err(Error::NoFreeDofs)));
    }

    #[test]
    fn identity_at_initial_values() {
        let p = Problem::from_file(fixtures::warren()).unwrap();
        let m = apply_variables(&p, &p.initial()).unwrap();
        assert_eq!(m, p.model);
    }

    #[test]
    fn mirrored_offsets_move_in_opposite_directions() {
        let p = Problem::from_file(fixtures::warren()).unwrap();
        let mut x = p.initial();
        // first variable is the x-offset of the outermost mirrored top-chord pair
        let VariableKind::NodeOffset(t) = &p.variables[0].kind else {
            panic!()
        };
        assert_eq!(t.len(), 2);
        x[0] = 0.2;
        let m = apply_variables(&p, &x).unwrap();
        let dl = m.nodes[t[0].node].position.x - p.model.nodes[t[0].node].position.x;
        let dr = m.nodes[t[1].node].position.x - p.model.nodes[t[1].node].position.x;
        assert!((dl - 0.2).abs() < 1e-15);
        assert!((dr + 0.2).abs() < 1e-15);
    }

    #[test]
    fn projected_offset_moves_along_direction() {
        let mut f = fixtures::unit_bar();
        f.variables.push(VariableRecord {
            name: Some("mu".into()),
            kind: VariableKindRecord::ProjectedOffset {
                targets: vec![ProjectionTargetRecord {
                    node: 1,
                    direction: [0.0, 0.0, 1.0],
                }],
            },
            lower: -1.0,
            upper: 1.0,
            initial: 0.0,
        });
        let p = Problem::from_file(f).unwrap();
        let mut x = p.initial();
        x[1] = 0.5;
        let m = apply_variables(&p, &x).unwrap();
        assert_eq!(m.nodes[1].position.z, 0.5);
        assert_eq!(p.model.nodes[1].position.z, 0.0);
    }

    #[test]
    fn apply_variables_rejects_wrong_length() {
        let p = Problem::from_file(fixtures::unit_bar()).unwrap();
        assert!(matches!(
            apply_variables(&p, &[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reload_gives_same_dof_numbering() {
        let p = Problem::from_file(fixtures::warren()).unwrap();
        let q = Problem::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(
            build_dof_map(&p.model).unwrap(),
            build_dof_map(&q.model).unwrap()
        );
    }
}
