//! Random valid maintenance-model aggregates.

use emaint::context_sa::{ContextRule, Dependent, Severity};
use emaint::maintenance_model::{
    ArMaintenanceModel, ComponentKind, ContentBinding, ContentComponent, DerivedSignal,
    EnvironmentRecord, EquipmentRecord, ExternalSource, Fusion, NeighborEquipment, Part, Role,
    SourceKind, Transport, UserRecord,
};
use emaint::task_model::TaskNode;
use emaint::user_model::{InterfaceTier, Level, UserModelConfig};
use proptest::prelude::*;

use super::gen::{config, shape};

const CONTEXTS: [&str; 3] = ["hot", "noisy", "wet_floor"];

fn text() -> impl Strategy<Value = String> {
    "\\PC{0,16}"
}

fn asset() -> impl Strategy<Value = String> {
    "[a-z0-9_./-]{1,12}"
}

fn component() -> impl Strategy<Value = ContentComponent> {
    (
        prop::sample::select(ComponentKind::ALL.to_vec()),
        asset(),
        "[A-Za-z][\\PC]{0,15}",
        asset(),
        any::<bool>(),
    )
        .prop_map(|(kind, key, words, anchor, anchored)| ContentComponent {
            kind,
            payload: if kind.is_asset() { key } else { words },
            anchor: (kind.needs_anchor() || anchored).then_some(anchor),
        })
}

fn source(signals: Vec<String>, i: usize) -> impl Strategy<Value = ExternalSource> {
    (
        prop::sample::select(vec![
            SourceKind::Sensor,
            SourceKind::EMaintenanceService,
            SourceKind::Wsn,
        ]),
        prop::sample::select(vec![Transport::ReplayFile, Transport::HttpPush]),
        prop::option::of(text()),
    )
        .prop_map(move |(kind, transport, location)| ExternalSource {
            id: format!("src{i}"),
            kind,
            transport,
            signals: signals.clone(),
            location,
        })
}

fn user(i: usize) -> impl Strategy<Value = UserRecord> {
    (
        text(),
        prop::sample::select(vec![Role::Technician, Role::Engineer]),
        prop::option::of(prop::sample::select(Level::ALL.to_vec())),
    )
        .prop_map(move |(name, role, initial_level)| UserRecord {
            id: format!("u{i}"),
            name,
            role,
            initial_level,
        })
}

fn equipment() -> impl Strategy<Value = EquipmentRecord> {
    (
        text(),
        text(),
        prop::collection::vec(text(), 0..3),
        prop::collection::vec((text(), prop::collection::vec(text(), 0..3)), 0..3),
        prop::collection::btree_map("[a-z]{1,6}", asset(), 0..3),
    )
        .prop_map(|(id, name, documentation, parts, media)| EquipmentRecord {
            id,
            name,
            documentation,
            parts: parts
                .into_iter()
                .enumerate()
                .map(|(i, (name, tools))| Part {
                    id: format!("part{i}"),
                    name,
                    tools,
                })
                .collect(),
            media,
        })
}

fn environment() -> impl Strategy<Value = EnvironmentRecord> {
    (
        text(),
        prop::collection::vec(text(), 0..3),
        prop::collection::vec((text(), text()), 0..3),
    )
        .prop_map(|(id, safety_notes, neighbors)| EnvironmentRecord {
            id,
            safety_notes,
            neighbors: neighbors
                .into_iter()
                .enumerate()
                .map(|(i, (name, influence))| NeighborEquipment {
                    id: format!("nb{i}"),
                    name,
                    influence,
                })
                .collect(),
        })
}

fn comparison() -> impl Strategy<Value = (&'static str, f64)> {
    (
        prop::sample::select(vec![">", ">=", "<", "<=", "==", "!="]),
        prop_oneof![Just(80.0), Just(3.0), -1e6f64..1e6],
    )
}

/// Everything except the task tree, bindings and leaf-scoped parts.
#[derive(Debug, Clone)]
struct Frame {
    name: String,
    equipment: EquipmentRecord,
    environment: EnvironmentRecord,
    users: Vec<UserRecord>,
    sources: Vec<ExternalSource>,
    derived: Vec<DerivedSignal>,
    user_config: UserModelConfig,
}

fn frame() -> impl Strategy<Value = Frame> {
    let users = (1usize..=3).prop_flat_map(|n| (0..n).map(user).collect::<Vec<_>>());
    let sources = (1usize..=3, 1usize..=2).prop_flat_map(|(n, per)| {
        (0..n)
            .map(|i| source((0..per).map(|j| format!("s{i}_{j}")).collect(), i))
            .collect::<Vec<_>>()
    });
    (
        "[a-z0-9][a-z0-9_-]{0,10}",
        equipment(),
        environment(),
        users,
        sources,
        prop_oneof![Just(UserModelConfig::default()), config()],
    )
        .prop_flat_map(
            |(name, equipment, environment, users, sources, user_config)| {
                let signals: Vec<String> = sources.iter().flat_map(|s| s.signals.clone()).collect();
                let derived = prop::collection::vec(
                    (
                        prop::sample::select(signals),
                        1usize..10,
                        prop::option::of(-100.0f64..100.0),
                    ),
                    0..3,
                )
                .prop_map(|xs| {
                    xs.into_iter()
                        .enumerate()
                        .map(|(i, (input, window, threshold))| DerivedSignal {
                            name: format!("d{i}"),
                            fusion: match threshold {
                                None => Fusion::MovingAverage { input, window },
                                Some(threshold) => Fusion::ThresholdCount {
                                    input,
                                    threshold,
                                    window,
                                },
                            },
                        })
                        .collect::<Vec<_>>()
                });
                (
                    Just(name),
                    Just(equipment),
                    Just(environment),
                    Just(users),
                    Just(sources),
                    derived,
                    Just(user_config),
                )
            },
        )
        .prop_map(
            |(name, equipment, environment, users, sources, derived, user_config)| Frame {
                name,
                equipment,
                environment,
                users,
                sources,
                derived,
                user_config,
            },
        )
}

fn leaf_ids(n: &TaskNode, out: &mut Vec<String>) {
    match n {
        TaskNode::Leaf(l) => out.push(l.id.clone()),
        TaskNode::Composite(c) => c.children.iter().for_each(|k| leaf_ids(k, out)),
    }
}

fn strip_keys(n: &mut TaskNode) {
    match n {
        TaskNode::Leaf(l) => l.content_keys.clear(),
        TaskNode::Composite(c) => c.children.iter_mut().for_each(strip_keys),
    }
}

fn set_key(n: &mut TaskNode, leaf: &str, tier: InterfaceTier, key: &str) {
    match n {
        TaskNode::Leaf(l) if l.id == leaf => {
            l.content_keys.insert(tier, key.to_string());
        }
        TaskNode::Leaf(_) => {}
        TaskNode::Composite(c) => c
            .children
            .iter_mut()
            .for_each(|k| set_key(k, leaf, tier, key)),
    }
}

/// Aggregates that pass import: every reference resolves and every leaf
/// has content.
pub fn aggregate() -> impl Strategy<Value = ArMaintenanceModel> {
    (
        frame(),
        shape(8, 3),
        "\\PC{0,10}",
        prop::option::of(any::<prop::sample::Index>()),
    )
        .prop_flat_map(|(frame, shape, title, part)| {
            let mut model = shape.build(&title);
            strip_keys(&mut model.root);
            let mut leaves = Vec::new();
            leaf_ids(&model.root, &mut leaves);
            let n = leaves.len();
            let part = part.filter(|_| !frame.equipment.parts.is_empty()).map(|i| {
                frame.equipment.parts[i.index(frame.equipment.parts.len())]
                    .id
                    .clone()
            });
            let mut signals: Vec<String> = frame
                .sources
                .iter()
                .flat_map(|s| s.signals.clone())
                .collect();
            signals.extend(frame.derived.iter().map(|d| d.name.clone()));
            signals.push("elapsed".into());
            signals.push("surprisal".into());

            let contexts: Vec<_> = CONTEXTS
                .iter()
                .map(|id| {
                    (
                        prop::sample::subsequence(leaves.clone(), 0..=n.min(3)),
                        prop::collection::vec(
                            (prop::sample::select(signals.clone()), comparison()),
                            1..=2,
                        ),
                        prop::sample::select(vec![
                            Severity::Info,
                            Severity::Warning,
                            Severity::Danger,
                        ]),
                        text(),
                    )
                        .prop_map(move |(scope, cmps, severity, message)| {
                            let when = cmps
                                .iter()
                                .map(|(sig, (op, v))| format!("{sig} {op} {v}"))
                                .collect::<Vec<_>>()
                                .join(" and ");
                            ContextRule {
                                id: id.to_string(),
                                scope: scope.into_iter().collect(),
                                predicate: when.parse().unwrap(),
                                severity,
                                message,
                            }
                        })
                })
                .collect();
            // every leaf gets text; other tiers at random, some keyed
            let bindings = leaves
                .iter()
                .map(|leaf| {
                    let leaf = leaf.clone();
                    (
                        prop::collection::vec(component(), 1..=3),
                        prop::sample::subsequence(
                            vec![
                                InterfaceTier::Visual,
                                InterfaceTier::Ar,
                                InterfaceTier::Video,
                            ],
                            0..=3,
                        ),
                        prop::collection::vec(prop::collection::vec(component(), 1..=2), 3),
                        any::<bool>(),
                    )
                        .prop_map(move |(text, tiers, extra, keyed)| {
                            let mut out = vec![ContentBinding {
                                leaf: leaf.clone(),
                                tier: InterfaceTier::Text,
                                key: None,
                                components: text,
                            }];
                            for (tier, components) in tiers.into_iter().zip(extra) {
                                out.push(ContentBinding {
                                    leaf: leaf.clone(),
                                    tier,
                                    key: keyed.then(|| format!("{leaf}_{}", tier.keyword())),
                                    components,
                                });
                            }
                            out
                        })
                })
                .collect::<Vec<_>>();
            let dependencies = prop::collection::btree_map(
                prop::sample::select(leaves.clone()),
                prop::collection::vec(
                    prop_oneof![
                        prop::sample::select(leaves.clone())
                            .prop_map(|leaf| Dependent { leaf, team: None }),
                        "[a-z][a-z0-9_]{0,6}".prop_map(|leaf| Dependent {
                            leaf,
                            team: Some("stores".into()),
                        }),
                    ],
                    1..=2,
                ),
                0..3,
            );
            (
                Just(frame),
                Just(model),
                Just(part),
                contexts,
                bindings,
                dependencies,
            )
        })
        .prop_map(
            |(frame, mut task_model, part, contexts, bindings, dependencies)| {
                let bindings: Vec<ContentBinding> = bindings.into_iter().flatten().collect();
                // a keyed binding is referenced from the next leaf, or its own
                let keyed: Vec<(String, InterfaceTier, String)> = bindings
                    .iter()
                    .filter_map(|b| b.key.clone().map(|k| (b.leaf.clone(), b.tier, k)))
                    .collect();
                let mut leaves = Vec::new();
                leaf_ids(&task_model.root, &mut leaves);
                for (leaf, tier, key) in keyed {
                    let i = leaves.iter().position(|l| *l == leaf).unwrap();
                    let target = leaves[(i + 1) % leaves.len()].clone();
                    set_key(&mut task_model.root, &target, tier, &key);
                }
                ArMaintenanceModel {
                    name: frame.name,
                    part,
                    equipment: frame.equipment,
                    environment: frame.environment,
                    users: frame.users,
                    sources: frame.sources,
                    derived: frame.derived,
                    task_model,
                    contexts,
                    dependencies,
                    user_config: frame.user_config,
                    bindings,
                }
            },
        )
}
