//! Serde mirror of the JSON problem document.
//!
//! Lengths in m, forces in kN, moduli in kN/m², densities in kg/m³,
//! embodied carbon coefficients in kgCO₂e/kg. Stress limits (material
//! `sigma_t`/`sigma_c` and constraint limits) are written in MPa.

use serde::{Deserialize, Serialize};

use crate::optimize::OptimizerSettings;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Free-form provenance notes (which values are assumed, which reproduced).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub nodes: Vec<NodeRecord>,
    pub materials: Vec<MaterialRecord>,
    pub sections: Vec<SectionRecord>,
    pub elements: Vec<ElementRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupRecord>,
    #[serde(default)]
    pub loads: Vec<LoadRecord>,
    #[serde(default)]
    pub variables: Vec<VariableRecord>,
    pub objective: ObjectiveRecord,
    #[serde(default)]
    pub constraints: Vec<ConstraintRecord>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub xyz: [f64; 3],
    #[serde(default)]
    pub fixed: [bool; 6],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialRecord {
    pub name: String,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub rho: f64,
    pub ecc: f64,
    /// MPa
    pub sigma_t: f64,
    /// MPa, positive magnitude
    pub sigma_c: f64,
    /// One-letter code used in material-assignment IDs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    /// Area bounds applied to grouped area variables when this material is assigned in a sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<BoundsRecord>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundsRecord {
    pub lower: f64,
    pub initial: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SectionRecord {
    pub name: String,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(rename = "Iy", default, skip_serializing_if = "Option::is_none")]
    pub iy: Option<f64>,
    #[serde(rename = "Iz", default, skip_serializing_if = "Option::is_none")]
    pub iz: Option<f64>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube: Option<TubeRecord>,
}

impl SectionRecord {
    pub fn explicit(name: &str, a: f64, iy: f64, iz: f64, j: f64, s: f64) -> Self {
        SectionRecord {
            name: name.to_string(),
            a: Some(a),
            iy: Some(iy),
            iz: Some(iz),
            j: Some(j),
            s: Some(s),
            tube: None,
        }
    }

    /// Truss-only section: bending properties are irrelevant, filled with the area.
    pub fn area(name: &str, a: f64) -> Self {
        Self::explicit(name, a, a, a, a, a)
    }

    pub fn tube(name: &str, d: f64, alpha: f64) -> Self {
        SectionRecord {
            name: name.to_string(),
            a: None,
            iy: None,
            iz: None,
            j: None,
            s: None,
            tube: Some(TubeRecord { d, alpha }),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TubeRecord {
    pub d: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ElementKindRecord {
    #[default]
    Truss,
    Frame,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ElementRecord {
    pub id: usize,
    pub nodes: [usize; 2],
    pub material: String,
    pub section: String,
    #[serde(default)]
    pub kind: ElementKindRecord,
    #[serde(default)]
    pub roll: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GroupRecord {
    pub name: String,
    pub elements: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LoadRecord {
    pub node: usize,
    #[serde(default)]
    pub force: [f64; 3],
    #[serde(default)]
    pub moment: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum AxisRecord {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VariableRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: VariableKindRecord,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKindRecord {
    NodeOffset {
        targets: Vec<OffsetTargetRecord>,
    },
    ProjectedOffset {
        targets: Vec<ProjectionTargetRecord>,
    },
    Area(ElementTargets),
    TubeDiameter(ElementTargets),
    TubeRatio(ElementTargets),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ElementTargets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl ElementTargets {
    pub fn elements(ids: Vec<usize>) -> Self {
        ElementTargets {
            elements: Some(ids),
            group: None,
        }
    }
    pub fn group(name: &str) -> Self {
        ElementTargets {
            elements: None,
            group: Some(name.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OffsetTargetRecord {
    pub node: usize,
    pub axis: AxisRecord,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProjectionTargetRecord {
    pub node: usize,
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Volume,
    Compliance,
    EmbodiedCarbon,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveRecord {
    pub kind: ObjectiveKind,
}

/// `"all"`, an explicit id list, or `{"group": name}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SelectorRecord {
    Keyword(String),
    Ids(Vec<usize>),
    Group { group: String },
}

impl SelectorRecord {
    pub fn all() -> Self {
        SelectorRecord::Keyword("all".to_string())
    }
}

/// A symmetric limit (MPa), `{"compression", "tension"}` (MPa), or `"material"`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum StressLimitRecord {
    Symmetric(f64),
    Split { compression: f64, tension: f64 },
    Keyword(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintRecord {
    Displacement {
        nodes: SelectorRecord,
        axis: AxisRecord,
        /// m
        limit: f64,
    },
    AxialStress {
        elements: SelectorRecord,
        limit: StressLimitRecord,
    },
    CombinedStress {
        elements: SelectorRecord,
        /// MPa
        limit: f64,
    },
    DiameterOrdering {
        lesser: String,
        greater: String,
    },
}
