//! Problem generators: small hand-checkable cases and the four study
//! structures (Warren truss, cantilevered roof, tubular frames, bridge).
//!
//! Geometry, loads and bounds that are not given for the studies are chosen
//! here and listed in each problem's `notes`.

use std::f64::consts::PI;

use crate::model::schema::*;
use crate::optimize::{Algorithm, OptimizerSettings};

const PIN: [bool; 6] = [true, true, true, false, false, false];
/// Planar truss in x–y: z and rotations fixed.
const PLANAR: [bool; 6] = [false, false, true, true, true, true];
const PLANAR_PIN: [bool; 6] = [true, true, true, true, true, true];
const PLANAR_ROLLER: [bool; 6] = [false, true, true, true, true, true];
/// Planar frame in x–z: out-of-plane translation and in-plane-normal rotations fixed.
const FRAME_PLANE: [bool; 6] = [false, true, false, true, false, true];
const FRAME_PLANE_PIN: [bool; 6] = [true, true, true, true, false, true];

pub fn steel() -> MaterialRecord {
    MaterialRecord {
        name: "steel".into(),
        e: 2.0e8,
        g: 7.7e7,
        rho: 7800.0,
        ecc: 1.55,
        sigma_t: 350.0,
        sigma_c: 350.0,
        tag: Some("S".into()),
        area: Some(BoundsRecord {
            lower: 0.001,
            initial: 0.034,
            upper: 0.2,
        }),
    }
}

pub fn glulam() -> MaterialRecord {
    MaterialRecord {
        name: "glulam".into(),
        e: 1.2e7,
        g: 6.5e5,
        rho: 560.0,
        ecc: 0.512,
        sigma_t: 33.0,
        sigma_c: 20.4,
        tag: Some("W".into()),
        area: Some(BoundsRecord {
            lower: 0.06,
            initial: 0.5,
            upper: 1.8,
        }),
    }
}

fn empty(name: &str, objective: ObjectiveKind) -> ProblemFile {
    ProblemFile {
        name: Some(name.into()),
        notes: Vec::new(),
        nodes: Vec::new(),
        materials: Vec::new(),
        sections: Vec::new(),
        elements: Vec::new(),
        groups: Vec::new(),
        loads: Vec::new(),
        variables: Vec::new(),
        objective: ObjectiveRecord { kind: objective },
        constraints: Vec::new(),
        optimizer: OptimizerSettings::default(),
    }
}

fn node(f: &mut ProblemFile, xyz: [f64; 3], fixed: [bool; 6]) -> usize {
    let id = f.nodes.len();
    f.nodes.push(NodeRecord { id, xyz, fixed });
    id
}

fn element(
    f: &mut ProblemFile,
    a: usize,
    b: usize,
    material: &str,
    section: &str,
    kind: ElementKindRecord,
) -> usize {
    let id = f.elements.len();
    f.elements.push(ElementRecord {
        id,
        nodes: [a, b],
        material: material.into(),
        section: section.into(),
        kind,
        roll: 0.0,
    });
    id
}

fn bar(f: &mut ProblemFile, a: usize, b: usize, material: &str, section: &str) -> usize {
    element(f, a, b, material, section, ElementKindRecord::Truss)
}

fn load(f: &mut ProblemFile, node: usize, force: [f64; 3]) {
    f.loads.push(LoadRecord {
        node,
        force,
        moment: [0.0; 3],
    });
}

fn variable(
    f: &mut ProblemFile,
    name: String,
    kind: VariableKindRecord,
    lower: f64,
    initial: f64,
    upper: f64,
) {
    f.variables.push(VariableRecord {
        name: Some(name),
        kind,
        lower,
        upper,
        initial,
    });
}

fn offset(targets: &[(usize, AxisRecord, f64)]) -> VariableKindRecord {
    VariableKindRecord::NodeOffset {
        targets: targets
            .iter()
            .map(|&(node, axis, coefficient)| OffsetTargetRecord {
                node,
                axis,
                coefficient,
            })
            .collect(),
    }
}

fn group(f: &mut ProblemFile, name: &str, elements: Vec<usize>) {
    f.groups.push(GroupRecord {
        name: name.into(),
        elements,
    });
}

/// One bar, E = A = L = 1, unit axial load: u = 1.
pub fn unit_bar() -> ProblemFile {
    let mut f = empty("unit_bar", ObjectiveKind::Volume);
    f.materials.push(MaterialRecord {
        name: "unit".into(),
        e: 1.0,
        g: 1.0,
        rho: 1.0,
        ecc: 1.0,
        sigma_t: 1.0e3,
        sigma_c: 1.0e3,
        tag: Some("U".into()),
        area: None,
    });
    f.sections.push(SectionRecord::area("bar", 1.0));
    node(&mut f, [0.0, 0.0, 0.0], [true; 6]);
    node(
        &mut f,
        [1.0, 0.0, 0.0],
        [false, true, true, true, true, true],
    );
    bar(&mut f, 0, 1, "unit", "bar");
    load(&mut f, 1, [1.0, 0.0, 0.0]);
    variable(
        &mut f,
        "A".into(),
        VariableKindRecord::Area(ElementTargets::elements(vec![0])),
        0.1,
        1.0,
        2.0,
    );
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::Ids(vec![1]),
        axis: AxisRecord::X,
        limit: 20.0,
    });
    f
}

/// Symmetric two-bar bracket in the x–y plane: supports at (±w, 0), apex at
/// (0, h) carrying `p` downwards. One area variable per bar, stress-limited.
pub fn two_bar(p: f64, e: f64, a: f64, w: f64, h: f64) -> ProblemFile {
    let mut f = empty("two_bar", ObjectiveKind::Volume);
    let mut m = steel();
    m.e = e;
    f.materials.push(m);
    f.sections.push(SectionRecord::area("bar", a));
    let l = node(&mut f, [-w, 0.0, 0.0], PLANAR_PIN);
    let r = node(&mut f, [w, 0.0, 0.0], PLANAR_PIN);
    let apex = node(&mut f, [0.0, h, 0.0], PLANAR);
    bar(&mut f, l, apex, "steel", "bar");
    bar(&mut f, r, apex, "steel", "bar");
    load(&mut f, apex, [0.0, -p, 0.0]);
    for e in 0..2 {
        variable(
            &mut f,
            format!("A{e}"),
            VariableKindRecord::Area(ElementTargets::elements(vec![e])),
            1e-7,
            a,
            1e-2,
        );
    }
    f.constraints.push(ConstraintRecord::AxialStress {
        elements: SelectorRecord::all(),
        limit: StressLimitRecord::Symmetric(350.0),
    });
    f
}

/// Two-bar arch: supports at x = ±1, apex at height 0.5 under a unit vertical
/// load; the apex height is the only variable and compliance the objective.
pub fn arch() -> ProblemFile {
    let mut f = empty("arch", ObjectiveKind::Compliance);
    f.materials.push(steel());
    f.sections.push(SectionRecord::area("bar", 0.01));
    node(&mut f, [-1.0, 0.0, 0.0], PIN);
    node(&mut f, [1.0, 0.0, 0.0], PIN);
    let apex = node(
        &mut f,
        [0.0, 0.0, 0.5],
        [false, true, false, true, true, true],
    );
    bar(&mut f, 0, apex, "steel", "bar");
    bar(&mut f, 1, apex, "steel", "bar");
    load(&mut f, apex, [0.0, 0.0, -1.0]);
    variable(
        &mut f,
        "dz".into(),
        offset(&[(apex, AxisRecord::Z, 1.0)]),
        -0.3,
        0.0,
        2.0,
    );
    f.optimizer.algorithm = Algorithm::Lbfgs;
    f
}

/// Tubular cantilever of length `l` along x, tip load 3 kN downwards.
pub fn cantilever_frame(l: f64, d: f64, alpha: f64) -> ProblemFile {
    let mut f = empty("cantilever", ObjectiveKind::Volume);
    f.materials.push(steel());
    f.sections.push(SectionRecord::tube("tube", d, alpha));
    node(&mut f, [0.0, 0.0, 0.0], [true; 6]);
    node(&mut f, [l, 0.0, 0.0], [false; 6]);
    element(&mut f, 0, 1, "steel", "tube", ElementKindRecord::Frame);
    load(&mut f, 1, [0.0, 0.0, -3.0]);
    let all = ElementTargets::elements(vec![0]);
    variable(
        &mut f,
        "d".into(),
        VariableKindRecord::TubeDiameter(all.clone()),
        0.5 * d,
        d,
        2.0 * d,
    );
    variable(
        &mut f,
        "alpha".into(),
        VariableKindRecord::TubeRatio(all),
        0.0,
        alpha,
        0.95,
    );
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::Ids(vec![1]),
        axis: AxisRecord::Z,
        limit: l / 100.0,
    });
    f.constraints.push(ConstraintRecord::CombinedStress {
        elements: SelectorRecord::all(),
        limit: 350.0,
    });
    f
}

/// Load applied to each interior bottom-chord node of the Warren truss, kN.
pub const WARREN_NODE_LOAD: f64 = 200.0;

/// Ten-metre, twelve-bay simply supported Warren truss with mirrored shape
/// variables on the top chord and 24 mirrored area variables.
pub fn warren() -> ProblemFile {
    let mut f = empty("warren", ObjectiveKind::Volume);
    f.notes = vec![
        "given: 10 m span, 12 bays, 1 m depth, 25 nodes, 47 elements, 36 variables, 72 constraints".into(),
        "given: -0.83 < dx < 0.83, -1 <= dy <= 1, 1e-4 <= A <= 0.2 with A0 = 0.15, d_max = 2.78 cm, sigma_max = 350 MPa".into(),
        format!("assumed: {WARREN_NODE_LOAD} kN downward at each interior bottom-chord node"),
        "assumed: top-chord nodes at bay midpoints, steel E = 200 GPa".into(),
    ];
    f.materials.push(steel());
    f.sections.push(SectionRecord::area("bar", 0.15));
    let bays = 12;
    let span = 10.0;
    let w = span / bays as f64;
    let bottom: Vec<usize> = (0..=bays)
        .map(|k| {
            let fixed = match k {
                0 => PLANAR_PIN,
                k if k == bays => PLANAR_ROLLER,
                _ => PLANAR,
            };
            node(&mut f, [k as f64 * w, 0.0, 0.0], fixed)
        })
        .collect();
    let top: Vec<usize> = (0..bays)
        .map(|t| node(&mut f, [(t as f64 + 0.5) * w, 1.0, 0.0], PLANAR))
        .collect();
    let bottom_chord: Vec<usize> = (0..bays)
        .map(|k| bar(&mut f, bottom[k], bottom[k + 1], "steel", "bar"))
        .collect();
    let top_chord: Vec<usize> = (0..bays - 1)
        .map(|t| bar(&mut f, top[t], top[t + 1], "steel", "bar"))
        .collect();
    let mut up = Vec::new();
    let mut down = Vec::new();
    for t in 0..bays {
        up.push(bar(&mut f, bottom[t], top[t], "steel", "bar"));
        down.push(bar(&mut f, top[t], bottom[t + 1], "steel", "bar"));
    }
    for k in 1..bays {
        load(&mut f, bottom[k], [0.0, -WARREN_NODE_LOAD, 0.0]);
    }

    for t in 0..bays / 2 {
        let (l, r) = (top[t], top[bays - 1 - t]);
        variable(
            &mut f,
            format!("dx{t}"),
            offset(&[(l, AxisRecord::X, 1.0), (r, AxisRecord::X, -1.0)]),
            -0.83,
            0.0,
            0.83,
        );
        variable(
            &mut f,
            format!("dy{t}"),
            offset(&[(l, AxisRecord::Y, 1.0), (r, AxisRecord::Y, 1.0)]),
            -1.0,
            0.0,
            1.0,
        );
    }
    let area = |f: &mut ProblemFile, name: String, els: Vec<usize>| {
        variable(
            f,
            name,
            VariableKindRecord::Area(ElementTargets::elements(els)),
            1e-4,
            0.15,
            0.2,
        );
    };
    for k in 0..bays / 2 {
        area(
            &mut f,
            format!("A_bottom{k}"),
            vec![bottom_chord[k], bottom_chord[bays - 1 - k]],
        );
    }
    for t in 0..(bays - 1) / 2 {
        area(
            &mut f,
            format!("A_top{t}"),
            vec![top_chord[t], top_chord[bays - 2 - t]],
        );
    }
    area(
        &mut f,
        "A_top_center".into(),
        vec![top_chord[(bays - 1) / 2]],
    );
    for t in 0..bays / 2 {
        area(&mut f, format!("A_up{t}"), vec![up[t], down[bays - 1 - t]]);
        area(
            &mut f,
            format!("A_down{t}"),
            vec![down[t], up[bays - 1 - t]],
        );
    }
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::all(),
        axis: AxisRecord::Y,
        limit: 0.0278,
    });
    f.constraints.push(ConstraintRecord::AxialStress {
        elements: SelectorRecord::all(),
        limit: StressLimitRecord::Symmetric(350.0),
    });
    f.optimizer.time_limit = Some(120.0);
    f.optimizer.max_iterations = 1000;
    f
}

/// Load on every top-chord node of the roof, kN.
pub const ROOF_NODE_LOAD: f64 = 20.0;

/// Elements of the roof by family.
pub struct RoofLayout {
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
    pub web: Vec<usize>,
    /// Element index pairs related by the diagonal mirror.
    pub mirror: Vec<(usize, usize)>,
}

fn roof_structure(bays: usize) -> (ProblemFile, RoofLayout) {
    assert!(bays >= 2);
    let n = bays;
    let s = 3.0;
    let depth = 2.25;
    let mut f = empty("roof", ObjectiveKind::Volume);
    f.notes = vec![
        "given: square roof supported on two adjacent edges, depth 2.25 m, 145 nodes and 512 elements at 8 bays".into(),
        "given: -1.25 <= dz <= 4.5, 1e-3 <= A <= 0.2 with A0 = 0.1, d_max = 8 cm, sigma_max = 350 MPa".into(),
        "assumed: 3 m square bays, bottom nodes at bay centres, top supports pinned".into(),
        format!("assumed: {ROOF_NODE_LOAD} kN downward at every top-chord node"),
        "assumed: diagonal nodes stay fixed, giving n(n-1)/2 mirrored height variables; every element sized independently".into(),
    ];
    f.materials.push(steel());
    f.sections.push(SectionRecord::area("bar", 0.1));
    let mut top = vec![vec![0; n + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=n {
            let fixed = if i == 0 || j == 0 {
                PIN
            } else {
                [false, false, false, true, true, true]
            };
            top[i][j] = node(&mut f, [i as f64 * s, j as f64 * s, 0.0], fixed);
        }
    }
    let mut bottom = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            bottom[i][j] = node(
                &mut f,
                [(i as f64 + 0.5) * s, (j as f64 + 0.5) * s, -depth],
                [false, false, false, true, true, true],
            );
        }
    }
    let mut layout = RoofLayout {
        top: Vec::new(),
        bottom: Vec::new(),
        web: Vec::new(),
        mirror: Vec::new(),
    };
    // keys in (i, j) index space so mirrored partners can be found
    let mut keys: Vec<(u8, [usize; 4])> = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            if i < n {
                layout
                    .top
                    .push(bar(&mut f, top[i][j], top[i + 1][j], "steel", "bar"));
                keys.push((0, [i, j, 0, 0]));
            }
            if j < n {
                layout
                    .top
                    .push(bar(&mut f, top[i][j], top[i][j + 1], "steel", "bar"));
                keys.push((1, [i, j, 0, 0]));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i + 1 < n {
                layout
                    .bottom
                    .push(bar(&mut f, bottom[i][j], bottom[i + 1][j], "steel", "bar"));
                keys.push((2, [i, j, 0, 0]));
            }
            if j + 1 < n {
                layout
                    .bottom
                    .push(bar(&mut f, bottom[i][j], bottom[i][j + 1], "steel", "bar"));
                keys.push((3, [i, j, 0, 0]));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                layout.web.push(bar(
                    &mut f,
                    bottom[i][j],
                    top[i + di][j + dj],
                    "steel",
                    "bar",
                ));
                keys.push((4, [i, j, i + di, j + dj]));
            }
        }
    }
    let mirror_key = |k: &(u8, [usize; 4])| -> (u8, [usize; 4]) {
        let [a, b, c, d] = k.1;
        match k.0 {
            0 => (1, [b, a, 0, 0]),
            1 => (0, [b, a, 0, 0]),
            2 => (3, [b, a, 0, 0]),
            3 => (2, [b, a, 0, 0]),
            _ => (4, [b, a, d, c]),
        }
    };
    for (e, k) in keys.iter().enumerate() {
        let m = keys
            .iter()
            .position(|x| *x == mirror_key(k))
            .expect("mirror partner");
        if e < m {
            layout.mirror.push((e, m));
        }
    }
    for row in top.iter() {
        for &t in row {
            load(&mut f, t, [0.0, 0.0, -ROOF_NODE_LOAD]);
        }
    }
    for i in 1..=n {
        for j in (i + 1)..=n {
            variable(
                &mut f,
                format!("dz_{i}_{j}"),
                offset(&[
                    (top[i][j], AxisRecord::Z, 1.0),
                    (top[j][i], AxisRecord::Z, 1.0),
                ]),
                -1.25,
                0.0,
                4.5,
            );
        }
    }
    let free_nodes: Vec<usize> = f
        .nodes
        .iter()
        .filter(|n| !n.fixed[2])
        .map(|n| n.id)
        .collect();
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::Ids(free_nodes),
        axis: AxisRecord::Z,
        limit: 0.08,
    });
    f.constraints.push(ConstraintRecord::AxialStress {
        elements: SelectorRecord::all(),
        limit: StressLimitRecord::Symmetric(350.0),
    });
    f.optimizer.time_limit = Some(300.0);
    (f, layout)
}

/// Cantilevered roof with every element area an independent variable.
pub fn roof(bays: usize) -> ProblemFile {
    roof_with_layout(bays).0
}

pub fn roof_with_layout(bays: usize) -> (ProblemFile, RoofLayout) {
    let (mut f, layout) = roof_structure(bays);
    for e in 0..f.elements.len() {
        variable(
            &mut f,
            format!("A{e}"),
            VariableKindRecord::Area(ElementTargets::elements(vec![e])),
            1e-3,
            0.1,
            0.2,
        );
    }
    (f, layout)
}

/// Cantilevered roof with three area variables: top chord, web, bottom chord.
pub fn roof_grouped(bays: usize) -> ProblemFile {
    let (mut f, layout) = roof_structure(bays);
    f.name = Some("roof_grouped".into());
    group(&mut f, "top_chord", layout.top);
    group(&mut f, "web", layout.web);
    group(&mut f, "bottom_chord", layout.bottom);
    for g in ["top_chord", "web", "bottom_chord"] {
        variable(
            &mut f,
            format!("A_{g}"),
            VariableKindRecord::Area(ElementTargets::group(g)),
            1e-3,
            0.1,
            0.2,
        );
    }
    f
}

/// Frame span, m.
pub const FRAME_SPAN: f64 = 50.0;
/// Rise of the catenary frame, m.
pub const FRAME_RISE: f64 = 12.0;
/// Distance between neighbouring frames, m.
pub const FRAME_SPACING: f64 = 8.0;

/// Height of frame `shape` (0..6) at parameter s in [0, 1]. Shape 0 is a
/// catenary; the others add smooth waves that vanish at the supports.
pub fn frame_height(shape: usize, s: f64) -> f64 {
    let beta: f64 = 1.2;
    let cat = FRAME_RISE * (beta.cosh() - (beta * (2.0 * s - 1.0)).cosh()) / (beta.cosh() - 1.0);
    let wave = |m: f64| (m * PI * s).sin();
    cat + match shape {
        0 => 0.0,
        1 => 2.0 * wave(2.0),
        2 => -2.5 * wave(2.0) + 1.0 * wave(3.0),
        3 => 3.0 * wave(1.0) + 1.5 * wave(3.0),
        4 => -3.0 * wave(1.0) + 1.5 * wave(4.0),
        _ => 2.0 * wave(3.0),
    }
}

fn frame_file(name: &str) -> ProblemFile {
    let mut f = empty(name, ObjectiveKind::Volume);
    f.notes = vec![
        "given: six planar steel tube frames, 30 elements each, pinned ends, 40 kN downward at every free node".into(),
        "given: 0.1 <= d <= 1 with d0 = 0.75, 0.05 <= alpha <= 0.98 with alpha0 = 0.5, d_max = 17 cm, sigma_max = 350 MPa".into(),
        format!("assumed: {FRAME_SPAN} m span, catenary rise {FRAME_RISE} m, frames {FRAME_SPACING} m apart; irregular frames are the catenary plus sine waves"),
    ];
    f.materials.push(steel());
    f
}

/// Planar frame nodes for `shape` with `segments` elements; returns node indices.
fn add_frame(
    f: &mut ProblemFile,
    shape: usize,
    segments: usize,
    plane_fixity: bool,
    section: &str,
) -> (Vec<usize>, Vec<usize>) {
    let y = shape as f64 * FRAME_SPACING;
    let nodes: Vec<usize> = (0..=segments)
        .map(|i| {
            let s = i as f64 / segments as f64;
            let end = i == 0 || i == segments;
            let fixed = match (end, plane_fixity) {
                (true, true) => FRAME_PLANE_PIN,
                (true, false) => PIN,
                (false, true) => FRAME_PLANE,
                (false, false) => [false; 6],
            };
            node(f, [s * FRAME_SPAN, y, frame_height(shape, s)], fixed)
        })
        .collect();
    let els: Vec<usize> = (0..segments)
        .map(|i| {
            element(
                f,
                nodes[i],
                nodes[i + 1],
                "steel",
                section,
                ElementKindRecord::Frame,
            )
        })
        .collect();
    for &n in &nodes[1..segments] {
        load(f, n, [0.0, 0.0, -40.0]);
    }
    (nodes, els)
}

fn single_tube_variables(f: &mut ProblemFile) {
    variable(
        f,
        "d".into(),
        VariableKindRecord::TubeDiameter(ElementTargets::group("frames")),
        0.1,
        0.75,
        1.0,
    );
    variable(
        f,
        "alpha".into(),
        VariableKindRecord::TubeRatio(ElementTargets::group("frames")),
        0.05,
        0.5,
        0.98,
    );
}

/// One frame of the given shape with `segments` elements and a single tube section.
pub fn frame(shape: usize, segments: usize) -> ProblemFile {
    let mut f = frame_file("frame");
    f.sections.push(SectionRecord::tube("tube", 0.75, 0.5));
    let (_, els) = add_frame(&mut f, shape, segments, true, "tube");
    group(&mut f, "frames", els);
    single_tube_variables(&mut f);
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::all(),
        axis: AxisRecord::Z,
        limit: 0.17,
    });
    f.constraints.push(ConstraintRecord::CombinedStress {
        elements: SelectorRecord::all(),
        limit: 350.0,
    });
    f
}

/// Six frames sized with one shared tube section (two variables).
pub fn frames() -> ProblemFile {
    let mut f = frame_file("frames");
    f.sections.push(SectionRecord::tube("tube", 0.75, 0.5));
    let mut all = Vec::new();
    for shape in 0..6 {
        all.extend(add_frame(&mut f, shape, 30, true, "tube").1);
    }
    group(&mut f, "frames", all);
    single_tube_variables(&mut f);
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::all(),
        axis: AxisRecord::Z,
        limit: 0.17,
    });
    f.constraints.push(ConstraintRecord::CombinedStress {
        elements: SelectorRecord::all(),
        limit: 350.0,
    });
    f
}

/// Element families of the spine-stiffened frames.
struct SpineLayout {
    frame: Vec<usize>,
    strut: Vec<usize>,
    spine: Vec<usize>,
    tie: Vec<usize>,
}

fn spine_structure(name: &str, shapes: &[usize], d: f64, alpha: f64) -> (ProblemFile, SpineLayout) {
    let mut f = frame_file(name);
    f.notes.push("given: strut pairs 1 m long at every frame node, 30 degrees either side of the frame plane; -0.5 <= mu <= 2.5; anchors move up to 4 m along x".into());
    f.notes.push("assumed: struts lie along the outward in-plane normal rotated +-30 degrees out of plane; each spine end runs to its own pinned anchor 1 m beyond the support, level with the strut tip in y, and paired anchors move together".into());
    f.sections.push(SectionRecord::tube("tube", d, alpha));
    let mut lay = SpineLayout {
        frame: Vec::new(),
        strut: Vec::new(),
        spine: Vec::new(),
        tie: Vec::new(),
    };
    let (c30, s30) = ((PI / 6.0).cos(), (PI / 6.0).sin());
    for &shape in shapes {
        let (nodes, els) = add_frame(&mut f, shape, 30, false, "tube");
        lay.frame.extend(els);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let mut dirs = Vec::new();
        for (i, &n) in nodes.iter().enumerate() {
            let p = f.nodes[n].xyz;
            let a = f.nodes[nodes[i.saturating_sub(1)]].xyz;
            let b = f.nodes[nodes[(i + 1).min(nodes.len() - 1)]].xyz;
            let (tx, tz) = (b[0] - a[0], b[2] - a[2]);
            let tn = (tx * tx + tz * tz).sqrt();
            let (nx, nz) = (-tz / tn, tx / tn);
            let vp = [c30 * nx, s30, c30 * nz];
            let vm = [c30 * nx, -s30, c30 * nz];
            let sp = node(
                &mut f,
                [p[0] + vp[0], p[1] + vp[1], p[2] + vp[2]],
                [false; 6],
            );
            let sm = node(
                &mut f,
                [p[0] + vm[0], p[1] + vm[1], p[2] + vm[2]],
                [false; 6],
            );
            lay.strut.push(element(
                &mut f,
                n,
                sp,
                "steel",
                "tube",
                ElementKindRecord::Frame,
            ));
            lay.strut.push(element(
                &mut f,
                n,
                sm,
                "steel",
                "tube",
                ElementKindRecord::Frame,
            ));
            lay.tie.push(element(
                &mut f,
                sp,
                sm,
                "steel",
                "tube",
                ElementKindRecord::Frame,
            ));
            plus.push(sp);
            minus.push(sm);
            dirs.push((vp, vm));
        }
        for side in [&plus, &minus] {
            for i in 0..side.len() - 1 {
                lay.spine.push(element(
                    &mut f,
                    side[i],
                    side[i + 1],
                    "steel",
                    "tube",
                    ElementKindRecord::Frame,
                ));
            }
        }
        // one pinned anchor per spine side, so the supports are not collinear
        let first = f.nodes[nodes[0]].xyz;
        let last = f.nodes[*nodes.last().expect("frame nodes")].xyz;
        let mut anchors = Vec::new();
        for (base, dx, end) in [(first, -1.0, 0), (last, 1.0, plus.len() - 1)] {
            let pair: Vec<usize> = [(&plus, s30), (&minus, -s30)]
                .into_iter()
                .map(|(side, dy)| {
                    let a = node(&mut f, [base[0] + dx, base[1] + dy, base[2]], PIN);
                    lay.spine.push(element(
                        &mut f,
                        a,
                        side[end],
                        "steel",
                        "tube",
                        ElementKindRecord::Frame,
                    ));
                    a
                })
                .collect();
            anchors.push(pair);
        }
        for i in 0..nodes.len() {
            let (vp, vm) = dirs[i];
            variable(
                &mut f,
                format!("mu_{shape}_{i}"),
                VariableKindRecord::ProjectedOffset {
                    targets: vec![
                        ProjectionTargetRecord {
                            node: plus[i],
                            direction: vp,
                        },
                        ProjectionTargetRecord {
                            node: minus[i],
                            direction: vm,
                        },
                    ],
                },
                -0.5,
                0.0,
                2.5,
            );
        }
        for (side, pair, sign) in [("left", &anchors[0], -1.0), ("right", &anchors[1], 1.0)] {
            let targets: Vec<_> = pair.iter().map(|&a| (a, AxisRecord::X, sign)).collect();
            variable(
                &mut f,
                format!("anchor_{shape}_{side}"),
                offset(&targets),
                0.0,
                0.0,
                4.0,
            );
        }
    }
    (f, lay)
}

/// Spine-stiffened frames, stage one: compliance over strut lengths and
/// anchor positions (33 variables per frame), 20 cm × 5 mm tubes throughout.
pub fn spine(shapes: &[usize]) -> ProblemFile {
    let (mut f, _) = spine_structure("spine", shapes, 0.2, 0.95);
    f.objective.kind = ObjectiveKind::Compliance;
    f.optimizer.algorithm = Algorithm::Lbfgs;
    f.optimizer.max_iterations = 200;
    f
}

/// Spine-stiffened frames, stage two: d and alpha for the frame, strut,
/// spine and tie families with diameter ordering constraints.
pub fn spine_sizing(shapes: &[usize]) -> ProblemFile {
    let (mut f, lay) = spine_structure("spine_sizing", shapes, 0.2, 0.5);
    f.variables.clear();
    group(&mut f, "frame", lay.frame);
    group(&mut f, "strut", lay.strut);
    group(&mut f, "spine", lay.spine);
    group(&mut f, "tie", lay.tie);
    for g in ["frame", "strut", "spine", "tie"] {
        variable(
            &mut f,
            format!("d_{g}"),
            VariableKindRecord::TubeDiameter(ElementTargets::group(g)),
            0.2,
            0.2,
            1.0,
        );
        variable(
            &mut f,
            format!("alpha_{g}"),
            VariableKindRecord::TubeRatio(ElementTargets::group(g)),
            0.01,
            0.5,
            0.98,
        );
    }
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::all(),
        axis: AxisRecord::Z,
        limit: 0.17,
    });
    f.constraints.push(ConstraintRecord::CombinedStress {
        elements: SelectorRecord::all(),
        limit: 350.0,
    });
    for (l, g) in [("strut", "frame"), ("strut", "spine"), ("tie", "spine")] {
        f.constraints.push(ConstraintRecord::DiameterOrdering {
            lesser: l.into(),
            greater: g.into(),
        });
    }
    f
}

/// Deck point load of the bridge, kN.
pub const BRIDGE_DECK_LOAD: f64 = 150.0;
/// Main span of the bridge, m.
pub const BRIDGE_MAIN_SPAN: f64 = 56.5;

/// Doubly cantilevered truss bridge. `main_panels` panels between the
/// supports, `cantilever_panels` beyond each. Deck nodes are static and
/// loaded; top and bottom chord nodes sit at panel midpoints and move
/// (mirrored about mid-span).
fn bridge_structure(
    name: &str,
    main_panels: usize,
    cantilever_panels: usize,
) -> (ProblemFile, Vec<(&'static str, Vec<usize>)>) {
    let mut f = empty(name, ObjectiveKind::EmbodiedCarbon);
    let w = BRIDGE_MAIN_SPAN / main_panels as f64;
    f.notes = vec![
        format!("given: main span {BRIDGE_MAIN_SPAN} m, {BRIDGE_DECK_LOAD} kN deck point loads, u_max = 0.15 m on the deck, steel/glulam properties and area bounds"),
        format!("assumed: {main_panels} main panels of {w:.3} m, {cantilever_panels} cantilever panels each side, chords 4 m above and below the deck, supports 10 m below the deck"),
        "assumed: glulam E = 12 GPa, G = 0.65 GPa".into(),
    ];
    f.materials.push(steel());
    f.materials.push(glulam());
    f.sections.push(SectionRecord::area("bar", 0.034));
    let panels = main_panels + 2 * cantilever_panels;
    let x0 = -(panels as f64) * w / 2.0;
    let deck: Vec<usize> = (0..=panels)
        .map(|k| node(&mut f, [x0 + k as f64 * w, 0.0, 0.0], PLANAR))
        .collect();
    let top: Vec<usize> = (0..panels)
        .map(|p| node(&mut f, [x0 + (p as f64 + 0.5) * w, 4.0, 0.0], PLANAR))
        .collect();
    let bot: Vec<usize> = (0..panels)
        .map(|p| node(&mut f, [x0 + (p as f64 + 0.5) * w, -4.0, 0.0], PLANAR))
        .collect();
    let sl = cantilever_panels;
    let sr = panels - cantilever_panels;
    let (xl, xr) = (f.nodes[deck[sl]].xyz[0], f.nodes[deck[sr]].xyz[0]);
    let gl = node(&mut f, [xl, -10.0, 0.0], PLANAR_PIN);
    let gr = node(&mut f, [xr, -10.0, 0.0], PLANAR_PIN);

    let s = "steel";
    let bottom_chord: Vec<usize> = (0..panels - 1)
        .map(|p| bar(&mut f, bot[p], bot[p + 1], s, "bar"))
        .collect();
    let top_chord: Vec<usize> = (0..panels - 1)
        .map(|p| bar(&mut f, top[p], top[p + 1], s, "bar"))
        .collect();
    let mut bottom_web = Vec::new();
    let mut top_web = Vec::new();
    for p in 0..panels {
        bottom_web.push(bar(&mut f, deck[p], bot[p], s, "bar"));
        bottom_web.push(bar(&mut f, bot[p], deck[p + 1], s, "bar"));
        top_web.push(bar(&mut f, deck[p], top[p], s, "bar"));
        top_web.push(bar(&mut f, top[p], deck[p + 1], s, "bar"));
    }
    let strut: Vec<usize> = (0..panels)
        .map(|p| bar(&mut f, top[p], bot[p], s, "bar"))
        .collect();
    let support = vec![
        bar(&mut f, gl, deck[sl], s, "bar"),
        bar(&mut f, gl, bot[sl - 1], s, "bar"),
        bar(&mut f, gl, bot[sl], s, "bar"),
        bar(&mut f, gr, deck[sr], s, "bar"),
        bar(&mut f, gr, bot[sr - 1], s, "bar"),
        bar(&mut f, gr, bot[sr], s, "bar"),
    ];
    for &d in &deck {
        load(&mut f, d, [0.0, -BRIDGE_DECK_LOAD, 0.0]);
    }
    let reach = 0.35 * w;
    for p in 0..panels / 2 {
        let q = panels - 1 - p;
        variable(
            &mut f,
            format!("top_dx{p}"),
            offset(&[(top[p], AxisRecord::X, 1.0), (top[q], AxisRecord::X, -1.0)]),
            -reach,
            0.0,
            reach,
        );
        variable(
            &mut f,
            format!("top_dy{p}"),
            offset(&[(top[p], AxisRecord::Y, 1.0), (top[q], AxisRecord::Y, 1.0)]),
            -3.0,
            0.0,
            6.0,
        );
        variable(
            &mut f,
            format!("bottom_dx{p}"),
            offset(&[(bot[p], AxisRecord::X, 1.0), (bot[q], AxisRecord::X, -1.0)]),
            -reach,
            0.0,
            reach,
        );
        variable(
            &mut f,
            format!("bottom_dy{p}"),
            offset(&[(bot[p], AxisRecord::Y, 1.0), (bot[q], AxisRecord::Y, 1.0)]),
            -5.0,
            0.0,
            3.0,
        );
    }
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::Ids(deck.clone()),
        axis: AxisRecord::Y,
        limit: 0.15,
    });
    f.constraints.push(ConstraintRecord::AxialStress {
        elements: SelectorRecord::all(),
        limit: StressLimitRecord::Keyword("material".into()),
    });
    f.optimizer.time_limit = Some(120.0);
    let families = vec![
        ("bottom_chord", bottom_chord),
        ("top_chord", top_chord),
        ("bottom_web", bottom_web),
        ("top_web", top_web),
        ("strut", strut),
        ("support", support),
    ];
    (f, families)
}

fn add_area_groups(f: &mut ProblemFile, groups: Vec<(String, Vec<usize>)>) {
    let b = steel().area.expect("steel area bounds");
    for (name, els) in groups {
        group(f, &name, els);
        variable(
            f,
            format!("A_{name}"),
            VariableKindRecord::Area(ElementTargets::group(&name)),
            b.lower,
            b.initial,
            b.upper,
        );
    }
}

/// Bridge with six element groups, all steel initially.
pub fn bridge() -> ProblemFile {
    let (mut f, families) = bridge_structure("bridge", 10, 3);
    add_area_groups(
        &mut f,
        families
            .into_iter()
            .map(|(n, e)| (n.to_string(), e))
            .collect(),
    );
    f
}

/// Smaller bridge with three groups: chords, webs (including struts), supports.
pub fn bridge_desk() -> ProblemFile {
    let (mut f, families) = bridge_structure("bridge_desk", 4, 1);
    let mut chords = Vec::new();
    let mut webs = Vec::new();
    let mut supports = Vec::new();
    for (name, els) in families {
        match name {
            "bottom_chord" | "top_chord" => chords.extend(els),
            "support" => supports.extend(els),
            _ => webs.extend(els),
        }
    }
    add_area_groups(
        &mut f,
        vec![
            ("chords".into(), chords),
            ("webs".into(), webs),
            ("supports".into(), supports),
        ],
    );
    f.optimizer.time_limit = Some(30.0);
    f
}

/// Named problems written to the `fixtures/` directory.
pub fn catalog() -> Vec<(&'static str, ProblemFile)> {
    vec![
        ("unit_bar", unit_bar()),
        ("two_bar", two_bar(100.0, 2.0e8, 1e-3, 1.0, 1.0)),
        ("arch", arch()),
        ("cantilever", cantilever_frame(2.0, 0.1, 0.5)),
        ("warren", warren()),
        ("roof_desk", roof(4)),
        ("roof", roof(8)),
        ("roof_grouped", roof_grouped(8)),
        ("frames", frames()),
        ("spine", spine(&[0, 1, 2, 3, 4, 5])),
        ("spine_sizing", spine_sizing(&[0, 1, 2, 3, 4, 5])),
        ("bridge", bridge()),
        ("bridge_desk", bridge_desk()),
    ]
}

pub fn by_name(name: &str) -> Option<ProblemFile> {
    catalog()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f)
}
