// Random model generators and gradient-comparison helpers shared by the integration tests.
#![allow(dead_code)]

use diffstiff::adjoint::{
    finite_difference4, jacobian, max_relative_error, stencil_step, FD4_STEP,
};
use diffstiff::fixtures::{glulam, steel};
use diffstiff::functions::Output;
use diffstiff::model::schema::*;
use diffstiff::model::ConstraintRow;
use diffstiff::optimize::OptimizerSettings;
use diffstiff::{Analyzer, Problem};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PIN: [bool; 6] = [true, true, true, false, false, false];
pub const FREE_TRUSS: [bool; 6] = [false, false, false, true, true, true];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn blank(name: &str, objective: ObjectiveKind) -> ProblemFile {
    ProblemFile {
        name: Some(name.into()),
        notes: Vec::new(),
        nodes: Vec::new(),
        materials: vec![steel(), glulam()],
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

fn add_node(f: &mut ProblemFile, xyz: [f64; 3], fixed: [bool; 6]) -> usize {
    let id = f.nodes.len();
    f.nodes.push(NodeRecord { id, xyz, fixed });
    id
}

fn add_element(
    f: &mut ProblemFile,
    nodes: [usize; 2],
    material: &str,
    section: &str,
    kind: ElementKindRecord,
    roll: f64,
) -> usize {
    let id = f.elements.len();
    f.elements.push(ElementRecord {
        id,
        nodes,
        material: material.into(),
        section: section.into(),
        kind,
        roll,
    });
    id
}

fn add_variable(
    f: &mut ProblemFile,
    kind: VariableKindRecord,
    lower: f64,
    initial: f64,
    upper: f64,
) {
    let name = format!("v{}", f.variables.len());
    f.variables.push(VariableRecord {
        name: Some(name),
        kind,
        lower,
        upper,
        initial,
    });
}

fn axis(i: usize) -> AxisRecord {
    [AxisRecord::X, AxisRecord::Y, AxisRecord::Z][i % 3]
}

fn unit_direction(r: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

pub const OBJECTIVES: [ObjectiveKind; 3] = [
    ObjectiveKind::Volume,
    ObjectiveKind::Compliance,
    ObjectiveKind::EmbodiedCarbon,
];

#[derive(Debug, Clone, Copy)]
pub struct TrussOptions {
    pub objective: ObjectiveKind,
    /// Give every element its own area variable.
    pub all_areas: bool,
    /// Add node-offset and projected-offset variables.
    pub shape: bool,
}

/// Cantilevered space truss: an X-braced triangular prism with randomly
/// perturbed nodes, random section areas, materials and loads.
pub fn random_truss(seed: u64, opts: TrussOptions) -> ProblemFile {
    let mut r = rng(seed);
    let mut f = blank(&format!("truss_{seed}"), opts.objective);
    let stations = r.gen_range(2..=10);
    let bay = r.gen_range(1.0..1.5);
    let mut ring = Vec::new();
    for s in 0..=stations {
        let nodes: Vec<usize> = (0..3)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                let j = if s == 0 { 0.0 } else { 0.1 };
                let xyz = [
                    s as f64 * bay + r.gen_range(-j..=j),
                    0.6 * t.cos() + r.gen_range(-j..=j),
                    0.6 * t.sin() + r.gen_range(-j..=j),
                ];
                add_node(&mut f, xyz, if s == 0 { PIN } else { FREE_TRUSS })
            })
            .collect();
        ring.push(nodes);
    }
    let mut pairs = Vec::new();
    for s in 0..stations {
        for k in 0..3 {
            pairs.push([ring[s][k], ring[s + 1][k]]);
            pairs.push([ring[s][k], ring[s + 1][(k + 1) % 3]]);
            pairs.push([ring[s + 1][k], ring[s + 1][(k + 1) % 3]]);
            // X-braced faces: every member carries part of a self-stress state,
            // so no stress is independent of the areas
            pairs.push([ring[s + 1][k], ring[s][(k + 1) % 3]]);
        }
    }
    for (e, nodes) in pairs.into_iter().enumerate() {
        let section = format!("s{e}");
        f.sections
            .push(SectionRecord::area(&section, r.gen_range(2e-3..1e-2)));
        let material = if r.gen_bool(0.7) { "steel" } else { "glulam" };
        add_element(
            &mut f,
            nodes,
            material,
            &section,
            ElementKindRecord::Truss,
            0.0,
        );
    }
    let tip = ring[stations].clone();
    for &n in &tip {
        f.loads.push(LoadRecord {
            node: n,
            force: [
                r.gen_range(-50.0..50.0),
                r.gen_range(-50.0..50.0),
                r.gen_range(-50.0..50.0),
            ],
            moment: [0.0; 3],
        });
    }
    for station in &ring[1..stations] {
        if r.gen_bool(0.5) {
            let n = station[r.gen_range(0..3)];
            f.loads.push(LoadRecord {
                node: n,
                force: [0.0, 0.0, r.gen_range(-40.0..-5.0)],
                moment: [0.0; 3],
            });
        }
    }
    let ne = f.elements.len();
    if opts.all_areas {
        for e in 0..ne {
            let a = f.sections[e].a.unwrap();
            add_variable(
                &mut f,
                VariableKindRecord::Area(ElementTargets::elements(vec![e])),
                1e-4,
                a,
                5e-2,
            );
        }
    } else {
        // single-element areas plus one variable driving a group of two
        let mut used = Vec::new();
        for e in 0..ne {
            if r.gen_bool(0.35) {
                let a = f.sections[e].a.unwrap();
                add_variable(
                    &mut f,
                    VariableKindRecord::Area(ElementTargets::elements(vec![e])),
                    1e-4,
                    a,
                    5e-2,
                );
                used.push(e);
            }
        }
        let rest: Vec<usize> = (0..ne).filter(|e| !used.contains(e)).take(2).collect();
        f.groups.push(GroupRecord {
            name: "pair".into(),
            elements: rest,
        });
        add_variable(
            &mut f,
            VariableKindRecord::Area(ElementTargets::group("pair")),
            1e-4,
            4e-3,
            5e-2,
        );
    }
    if opts.shape {
        let free: Vec<usize> = ring[1..].iter().flatten().copied().collect();
        let pick = |r: &mut ChaCha8Rng| free[r.gen_range(0..free.len())];
        let (a, b) = (pick(&mut r), pick(&mut r));
        add_variable(
            &mut f,
            VariableKindRecord::NodeOffset {
                targets: vec![OffsetTargetRecord {
                    node: a,
                    axis: axis(r.gen_range(0..3)),
                    coefficient: 1.0,
                }],
            },
            -0.5,
            r.gen_range(-0.1..0.1),
            0.5,
        );
        if a != b {
            let ax = axis(r.gen_range(0..3));
            add_variable(
                &mut f,
                VariableKindRecord::NodeOffset {
                    targets: vec![
                        OffsetTargetRecord {
                            node: a,
                            axis: ax,
                            coefficient: 0.5,
                        },
                        OffsetTargetRecord {
                            node: b,
                            axis: ax,
                            coefficient: -1.0,
                        },
                    ],
                },
                -0.5,
                r.gen_range(-0.1..0.1),
                0.5,
            );
        }
        let c = pick(&mut r);
        let direction = unit_direction(&mut r);
        add_variable(
            &mut f,
            VariableKindRecord::ProjectedOffset {
                targets: vec![ProjectionTargetRecord { node: c, direction }],
            },
            -0.5,
            r.gen_range(-0.1..0.1),
            0.5,
        );
    }
    for (i, ax) in [AxisRecord::Z, AxisRecord::Y].into_iter().enumerate() {
        f.constraints.push(ConstraintRecord::Displacement {
            nodes: SelectorRecord::Ids(vec![tip[i]]),
            axis: ax,
            limit: 0.01,
        });
    }
    let limit = match seed % 3 {
        0 => StressLimitRecord::Symmetric(350.0),
        1 => StressLimitRecord::Split {
            compression: 200.0,
            tension: 300.0,
        },
        _ => StressLimitRecord::Keyword("material".into()),
    };
    f.constraints.push(ConstraintRecord::AxialStress {
        elements: SelectorRecord::all(),
        limit,
    });
    f
}

/// Small space truss grown from a pinned base triangle: each new free node
/// is braced to the three previous nodes (and sometimes one more), giving
/// 6–12 free DOFs. Every element has an area variable; one node-offset and
/// one projected-offset variable; displacement limits on every free DOF.
pub fn random_small_truss(seed: u64) -> ProblemFile {
    let mut r = rng(seed);
    let mut f = blank(&format!("small_truss_{seed}"), ObjectiveKind::Compliance);
    let j = |r: &mut ChaCha8Rng| r.gen_range(-0.1..0.1);
    for xyz in [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 1.7, 0.0]] {
        let p = [xyz[0] + j(&mut r), xyz[1] + j(&mut r), 0.0];
        add_node(&mut f, p, PIN);
    }
    let free = r.gen_range(2..=4);
    let mut bars: Vec<[usize; 2]> = Vec::new();
    for k in 0..free {
        let n = f.nodes.len();
        let xyz = [
            1.0 + 0.4 * k as f64 + j(&mut r),
            0.6 + 0.2 * k as f64 + j(&mut r),
            1.0 + 0.8 * k as f64 + j(&mut r),
        ];
        add_node(&mut f, xyz, FREE_TRUSS);
        for m in n - 3..n {
            bars.push([m, n]);
        }
        if n > 3 && r.gen_bool(0.6) {
            bars.push([r.gen_range(0..n - 3), n]);
        }
        f.loads.push(LoadRecord {
            node: n,
            force: [
                r.gen_range(-30.0..30.0),
                r.gen_range(-30.0..30.0),
                r.gen_range(-60.0..-10.0),
            ],
            moment: [0.0; 3],
        });
    }
    for (e, nodes) in bars.into_iter().enumerate() {
        let section = format!("s{e}");
        f.sections
            .push(SectionRecord::area(&section, r.gen_range(2e-3..1e-2)));
        let material = if r.gen_bool(0.7) { "steel" } else { "glulam" };
        add_element(
            &mut f,
            nodes,
            material,
            &section,
            ElementKindRecord::Truss,
            0.0,
        );
        let a = f.sections[e].a.unwrap();
        add_variable(
            &mut f,
            VariableKindRecord::Area(ElementTargets::elements(vec![e])),
            1e-4,
            a,
            5e-2,
        );
    }
    add_variable(
        &mut f,
        VariableKindRecord::NodeOffset {
            targets: vec![OffsetTargetRecord {
                node: 3,
                axis: axis(r.gen_range(0..3)),
                coefficient: 1.0,
            }],
        },
        -0.5,
        r.gen_range(-0.1..0.1),
        0.5,
    );
    let last = f.nodes.len() - 1;
    let direction = unit_direction(&mut r);
    add_variable(
        &mut f,
        VariableKindRecord::ProjectedOffset {
            targets: vec![ProjectionTargetRecord {
                node: last,
                direction,
            }],
        },
        -0.5,
        r.gen_range(-0.1..0.1),
        0.5,
    );
    let ids: Vec<usize> = (3..f.nodes.len()).collect();
    for ax in [AxisRecord::X, AxisRecord::Y, AxisRecord::Z] {
        f.constraints.push(ConstraintRecord::Displacement {
            nodes: SelectorRecord::Ids(ids.clone()),
            axis: ax,
            limit: 0.01,
        });
    }
    f
}

/// Space frame: a perturbed zigzag chain of tube members, fixed at one end and
/// pinned at the other, braced by explicit-section frames and truss bars.
/// Every variable kind and constraint kind appears.
pub fn random_frame(seed: u64, objective: ObjectiveKind) -> ProblemFile {
    let mut r = rng(seed);
    let mut f = blank(&format!("frame_{seed}"), objective);
    let n = r.gen_range(6..=32);
    let nodes: Vec<usize> = (0..n)
        .map(|i| {
            let fixed = if i == 0 {
                [true; 6]
            } else if i == n - 1 {
                PIN
            } else {
                [false; 6]
            };
            let xyz = [
                i as f64 * 1.2 + r.gen_range(-0.2..0.2),
                r.gen_range(-0.6..0.6),
                (i as f64).sin() * 0.8
                    + 1.5 * (std::f64::consts::PI * i as f64 / (n - 1) as f64).sin()
                    + r.gen_range(-0.2..0.2),
            ];
            add_node(&mut f, xyz, fixed)
        })
        .collect();
    f.sections.push(SectionRecord::tube(
        "ta",
        r.gen_range(0.15..0.3),
        r.gen_range(0.4..0.8),
    ));
    f.sections.push(SectionRecord::tube(
        "tb",
        r.gen_range(0.1..0.2),
        r.gen_range(0.4..0.8),
    ));
    f.sections.push(SectionRecord::explicit(
        "brace", 4e-3, 2e-5, 1.5e-5, 3e-5, 2.5e-4,
    ));
    f.sections.push(SectionRecord::area("bar", 2e-3));
    let (mut ta, mut tb, mut braces, mut bars) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..n - 1 {
        let (sec, list) = if i % 2 == 0 {
            ("ta", &mut ta)
        } else {
            ("tb", &mut tb)
        };
        list.push(add_element(
            &mut f,
            [nodes[i], nodes[i + 1]],
            "steel",
            sec,
            ElementKindRecord::Frame,
            r.gen_range(-1.0..1.0),
        ));
    }
    for i in (0..n - 2).step_by(2) {
        braces.push(add_element(
            &mut f,
            [nodes[i], nodes[i + 2]],
            "steel",
            "brace",
            ElementKindRecord::Frame,
            r.gen_range(-1.0..1.0),
        ));
    }
    for i in (1..n.saturating_sub(3)).step_by(3) {
        let material = if r.gen_bool(0.5) { "steel" } else { "glulam" };
        bars.push(add_element(
            &mut f,
            [nodes[i], nodes[i + 3]],
            material,
            "bar",
            ElementKindRecord::Truss,
            0.0,
        ));
    }
    let frames: Vec<usize> = ta.iter().chain(&tb).chain(&braces).copied().collect();
    f.groups.push(GroupRecord {
        name: "ta".into(),
        elements: ta.clone(),
    });
    f.groups.push(GroupRecord {
        name: "tb".into(),
        elements: tb.clone(),
    });
    f.groups.push(GroupRecord {
        name: "braces".into(),
        elements: braces.clone(),
    });
    f.groups.push(GroupRecord {
        name: "frames".into(),
        elements: frames,
    });
    for &k in &nodes[1..n - 1] {
        f.loads.push(LoadRecord {
            node: k,
            force: [
                r.gen_range(-10.0..10.0),
                r.gen_range(-10.0..10.0),
                r.gen_range(-30.0..-5.0),
            ],
            moment: [
                r.gen_range(-3.0..3.0),
                r.gen_range(-3.0..3.0),
                r.gen_range(-3.0..3.0),
            ],
        });
    }
    let d = |f: &ProblemFile, s: usize| f.sections[s].tube.unwrap();
    let (da, db) = (d(&f, 0), d(&f, 1));
    add_variable(
        &mut f,
        VariableKindRecord::TubeDiameter(ElementTargets::group("ta")),
        0.1,
        da.d,
        0.5,
    );
    add_variable(
        &mut f,
        VariableKindRecord::TubeRatio(ElementTargets::group("ta")),
        0.1,
        da.alpha,
        0.95,
    );
    add_variable(
        &mut f,
        VariableKindRecord::TubeDiameter(ElementTargets::group("tb")),
        0.05,
        db.d,
        0.5,
    );
    add_variable(
        &mut f,
        VariableKindRecord::TubeRatio(ElementTargets::group("tb")),
        0.1,
        db.alpha,
        0.95,
    );
    add_variable(
        &mut f,
        VariableKindRecord::Area(ElementTargets::group("braces")),
        1e-3,
        4e-3,
        1e-2,
    );
    if !bars.is_empty() {
        add_variable(
            &mut f,
            VariableKindRecord::Area(ElementTargets::elements(bars.clone())),
            1e-4,
            2e-3,
            1e-2,
        );
    }
    let mid = nodes[n / 2];
    let other = nodes[1 + r.gen_range(0..n - 2)];
    add_variable(
        &mut f,
        VariableKindRecord::NodeOffset {
            targets: vec![OffsetTargetRecord {
                node: mid,
                axis: axis(r.gen_range(0..3)),
                coefficient: 1.0,
            }],
        },
        -0.5,
        r.gen_range(-0.1..0.1),
        0.5,
    );
    let direction = unit_direction(&mut r);
    add_variable(
        &mut f,
        VariableKindRecord::ProjectedOffset {
            targets: vec![
                ProjectionTargetRecord {
                    node: other,
                    direction,
                },
                ProjectionTargetRecord {
                    node: mid,
                    direction: [0.0, 0.0, 1.0],
                },
            ],
        },
        -0.5,
        r.gen_range(-0.1..0.1),
        0.5,
    );
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::Ids(vec![mid]),
        axis: AxisRecord::Z,
        limit: 0.02,
    });
    f.constraints.push(ConstraintRecord::Displacement {
        nodes: SelectorRecord::Ids(vec![mid]),
        axis: AxisRecord::Y,
        limit: 0.02,
    });
    f.constraints.push(ConstraintRecord::CombinedStress {
        elements: SelectorRecord::Group {
            group: "frames".into(),
        },
        limit: 350.0,
    });
    let mut axial: Vec<usize> = braces.clone();
    axial.extend(&bars);
    f.constraints.push(ConstraintRecord::AxialStress {
        elements: SelectorRecord::Ids(axial),
        limit: StressLimitRecord::Symmetric(300.0),
    });
    f.constraints.push(ConstraintRecord::DiameterOrdering {
        lesser: "tb".into(),
        greater: "ta".into(),
    });
    f
}

#[derive(Debug, Default, Clone)]
pub struct GradientCheck {
    pub outputs: usize,
    pub entries: usize,
    /// Largest per-output error max_j |a_j − f_j| / max_j max(|a_j|, |f_j|),
    /// over outputs whose largest difference exceeds the absolute floor.
    pub worst_rel: f64,
    pub failures: Vec<String>,
}

/// Adjoint objective gradient and constraint Jacobian against the
/// fourth-order central-difference oracle, at the initial design. Each
/// output's error is measured against its largest gradient entry.
pub fn check_against_differences(problem: &Problem, rel: f64, abs: f64) -> GradientCheck {
    let x = problem.initial();
    let analyzer = Analyzer::for_problem(problem).unwrap();
    let a = analyzer.analyze(problem, &x).unwrap();
    let (obj, rows) = jacobian(problem, &analyzer, &a).unwrap();
    let outputs: Vec<Output> = std::iter::once(Output::Objective)
        .chain((0..problem.rows.len()).map(Output::Constraint))
        .collect();
    let fd = finite_difference4(problem, &analyzer, &x, &outputs, FD4_STEP).unwrap();
    let mut out = GradientCheck::default();
    for (k, adj) in std::iter::once(&obj).chain(rows.iter()).enumerate() {
        out.outputs += 1;
        out.entries += adj.len();
        let diff = adj
            .iter()
            .zip(&fd[k])
            .map(|(a, f)| (a - f).abs())
            .fold(0.0, f64::max);
        if diff <= abs {
            continue;
        }
        let err = max_relative_error(adj, &fd[k]);
        out.worst_rel = out.worst_rel.max(err);
        if err > rel {
            out.failures.push(format!(
                "{} output {k} ({:?}): error {err:e}\n  adjoint {adj:?}\n  fd {:?}",
                problem.name, outputs[k], fd[k]
            ));
        }
    }
    out
}

/// Signs of the quantities whose absolute value or maximum enters an output:
/// u for displacements, σ for stresses, |M₁| − |M₂| for frame end moments.
pub fn kink_signs(problem: &Problem, analyzer: &Analyzer, x: &[f64]) -> Vec<bool> {
    let a = analyzer.analyze(problem, x).unwrap();
    let mut out = Vec::new();
    for row in &problem.rows {
        match *row {
            ConstraintRow::Displacement { node, axis, .. } => {
                out.push(a.displacement(&analyzer.dofs, node, axis) > 0.0)
            }
            ConstraintRow::StressAbs { element, .. } => out.push(a.axial_stress(element) > 0.0),
            ConstraintRow::Combined { element, .. } => {
                let f = &a.forces[element];
                out.push(a.axial_stress(element) > 0.0);
                out.push(f[4].abs() > f[10].abs());
            }
            _ => {}
        }
    }
    out
}

/// True when some output is not differentiable somewhere on the
/// finite-difference stencil around the initial design: differences taken
/// across such a point say nothing about the derivative at the centre.
pub fn near_kink(problem: &Problem) -> bool {
    let analyzer = Analyzer::for_problem(problem).unwrap();
    let x = problem.initial();
    let centre = kink_signs(problem, &analyzer, &x);
    (0..x.len()).any(|j| {
        let h = stencil_step(problem, &x, j, FD4_STEP);
        [-2.0, -1.0, 1.0, 2.0].iter().any(|k| {
            let mut xs = x.clone();
            xs[j] += k * h;
            kink_signs(problem, &analyzer, &xs) != centre
        })
    })
}

/// Seeds from `start` upwards whose models are not [`near_kink`], with the number skipped.
pub fn smooth_seeds(
    start: u64,
    count: usize,
    build: impl Fn(u64) -> ProblemFile,
) -> (Vec<ProblemFile>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut seed = start;
    while out.len() < count {
        let f = build(seed);
        if near_kink(&Problem::from_file(f.clone()).unwrap()) {
            skipped += 1;
        } else {
            out.push(f);
        }
        seed += 1;
    }
    (out, skipped)
}
