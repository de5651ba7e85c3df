//! `.amm` container format: one TOML document with named sections and the
//! task model embedded verbatim in `[tasks] source`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    ArMaintenanceModel, ComponentKind, ContentBinding, ContentComponent, DerivedSignal,
    EnvironmentRecord, EquipmentRecord, ExternalSource, Fusion, NeighborEquipment, Part, Role,
    SourceKind, Transport, UserRecord,
};
use crate::automaton::{compile_with, CompileError, CompileOptions};
use crate::context_sa::{ContextRule, DependencyMap, Dependent, Predicate, Severity};
use crate::task_model::{is_identifier, parse_model, serialize_model, ValidationScope};
use crate::user_model::{InterfaceTier, Level, UserModelConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelDiagnostic {
    /// Location inside the document, e.g. `bindings[2].leaf`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ModelDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ERROR {}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model rejected with {} diagnostic(s):\n{}", .diagnostics.len(), .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct ImportError {
    pub diagnostics: Vec<ModelDiagnostic>,
    /// The task tree compiles to more states than the cap allows.
    pub state_cap_exceeded: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    model: ModelDoc,
    equipment: EquipmentDoc,
    environment: EnvironmentDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    users: Vec<UserDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    sources: Vec<SourceDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    derived: Vec<DerivedDoc>,
    tasks: TasksDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    contexts: Vec<ContextDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    dependencies: BTreeMap<String, Vec<Dependent>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    user_config: Option<UserModelConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bindings: Vec<BindingDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    part: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquipmentDoc {
    id: String,
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    documentation: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    media: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    parts: Vec<PartDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartDoc {
    id: String,
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tools: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    safety_notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    neighbors: Vec<NeighborDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeighborDoc {
    id: String,
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    influence: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserDoc {
    id: String,
    name: String,
    role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_level: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceDoc {
    id: String,
    kind: String,
    transport: String,
    signals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    location: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DerivedDoc {
    name: String,
    function: String,
    input: String,
    window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TasksDoc {
    source: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scope: Vec<String>,
    when: String,
    severity: String,
    message: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingDoc {
    leaf: String,
    tier: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    key: Option<String>,
    components: Vec<ComponentDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    kind: String,
    payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor: Option<String>,
}

struct Diags(Vec<ModelDiagnostic>);

impl Diags {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ModelDiagnostic {
            path: path.into(),
            message: message.into(),
        });
    }

    fn unique<'a>(&mut self, section: &str, field: &str, ids: impl Iterator<Item = &'a str>) {
        let mut seen = BTreeSet::new();
        for (i, id) in ids.enumerate() {
            if !seen.insert(id) {
                self.push(
                    format!("{section}[{i}].{field}"),
                    format!("duplicate id '{id}'"),
                );
            }
        }
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Asset keys: lowercase, no whitespace.
fn is_asset_key(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_' | '-' | '.' | '/'))
}

fn parse_keyword<T>(diags: &mut Diags, path: String, value: &str, all: &[(&str, T)]) -> Option<T>
where
    T: Copy,
{
    let found = all.iter().find(|(k, _)| *k == value).map(|(_, v)| *v);
    if found.is_none() {
        let options: Vec<_> = all.iter().map(|(k, _)| *k).collect();
        diags.push(
            path,
            format!(
                "unknown value '{value}' (expected one of {})",
                options.join(", ")
            ),
        );
    }
    found
}

const ROLES: [(&str, Role); 2] = [
    ("technician", Role::Technician),
    ("engineer", Role::Engineer),
];
const SOURCE_KINDS: [(&str, SourceKind); 3] = [
    ("sensor", SourceKind::Sensor),
    ("e_maintenance_service", SourceKind::EMaintenanceService),
    ("wsn", SourceKind::Wsn),
];
const TRANSPORTS: [(&str, Transport); 2] = [
    ("replay_file", Transport::ReplayFile),
    ("http_push", Transport::HttpPush),
];
const SEVERITIES: [(&str, Severity); 3] = [
    ("info", Severity::Info),
    ("warning", Severity::Warning),
    ("danger", Severity::Danger),
];

fn levels() -> Vec<(&'static str, Level)> {
    Level::ALL.iter().map(|l| (l.keyword(), *l)).collect()
}

fn tiers() -> Vec<(&'static str, InterfaceTier)> {
    InterfaceTier::ALL
        .iter()
        .map(|t| (t.keyword(), *t))
        .collect()
}

fn component_kinds() -> Vec<(&'static str, ComponentKind)> {
    ComponentKind::ALL
        .iter()
        .map(|k| (k.keyword(), *k))
        .collect()
}

/// Model names double as ids and file names.
fn is_slug(s: &str) -> bool {
    s.chars()
        .next()
        .is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && s.chars()
            .all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_' | '-'))
}

/// Parses and fully validates a `.amm` document. All-or-nothing: any
/// diagnostic rejects the whole model.
pub fn import_model(text: &str) -> Result<ArMaintenanceModel, ImportError> {
    import_model_with(text, CompileOptions::default())
}

/// [`import_model`] with an explicit state cap for the compile dry run.
pub fn import_model_with(
    text: &str,
    opts: CompileOptions,
) -> Result<ArMaintenanceModel, ImportError> {
    let doc: Doc = toml::from_str(text).map_err(|e| {
        let path = match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("document:{line}:{col}")
            }
            None => "document".to_string(),
        };
        ImportError {
            diagnostics: vec![ModelDiagnostic {
                path,
                message: e.message().trim().to_string(),
            }],
            state_cap_exceeded: false,
        }
    })?;
    let mut diags = Diags(Vec::new());
    let mut state_cap_exceeded = false;
    let model = convert(doc, opts, &mut state_cap_exceeded, &mut diags);
    match model {
        Some(m) if diags.0.is_empty() => Ok(m),
        _ => Err(ImportError {
            diagnostics: diags.0,
            state_cap_exceeded,
        }),
    }
}

fn convert(
    doc: Doc,
    opts: CompileOptions,
    state_cap_exceeded: &mut bool,
    d: &mut Diags,
) -> Option<ArMaintenanceModel> {
    // catalog
    let parts: Vec<Part> = doc
        .equipment
        .parts
        .into_iter()
        .map(|p| Part {
            id: p.id,
            name: p.name,
            tools: p.tools,
        })
        .collect();
    d.unique("equipment.parts", "id", parts.iter().map(|p| p.id.as_str()));
    for (view, key) in &doc.equipment.media {
        if !is_asset_key(key) {
            d.push(
                format!("equipment.media.{view}"),
                format!("asset key '{key}' must be lowercase without spaces"),
            );
        }
    }
    let equipment = EquipmentRecord {
        id: doc.equipment.id,
        name: doc.equipment.name,
        documentation: doc.equipment.documentation,
        parts,
        media: doc.equipment.media,
    };
    if !is_slug(&doc.model.name) {
        d.push(
            "model.name",
            format!(
                "'{}' must be lowercase letters, digits, '_' or '-'",
                doc.model.name
            ),
        );
    }
    if let Some(part) = &doc.model.part {
        if !equipment.parts.iter().any(|p| &p.id == part) {
            d.push("model.part", format!("unknown part '{part}'"));
        }
    }
    let neighbors: Vec<NeighborEquipment> = doc
        .environment
        .neighbors
        .into_iter()
        .map(|n| NeighborEquipment {
            id: n.id,
            name: n.name,
            influence: n.influence,
        })
        .collect();
    d.unique(
        "environment.neighbors",
        "id",
        neighbors.iter().map(|n| n.id.as_str()),
    );
    let environment = EnvironmentRecord {
        id: doc.environment.id,
        safety_notes: doc.environment.safety_notes,
        neighbors,
    };

    let level_table = levels();
    let mut users = Vec::new();
    for (i, u) in doc.users.into_iter().enumerate() {
        if u.id.trim().is_empty() {
            d.push(format!("users[{i}].id"), "user id must not be empty");
        }
        let role = parse_keyword(d, format!("users[{i}].role"), &u.role, &ROLES);
        let initial_level = match &u.initial_level {
            Some(l) => {
                parse_keyword(d, format!("users[{i}].initial_level"), l, &level_table).map(Some)
            }
            None => Some(None),
        };
        if let (Some(role), Some(initial_level)) = (role, initial_level) {
            users.push(UserRecord {
                id: u.id,
                name: u.name,
                role,
                initial_level,
            });
        }
    }
    d.unique("users", "id", users.iter().map(|u| u.id.as_str()));

    // sources and derived signals
    let mut sources = Vec::new();
    let mut signal_names: BTreeSet<String> = BTreeSet::new();
    for (i, s) in doc.sources.into_iter().enumerate() {
        let kind = parse_keyword(d, format!("sources[{i}].kind"), &s.kind, &SOURCE_KINDS);
        let transport = parse_keyword(
            d,
            format!("sources[{i}].transport"),
            &s.transport,
            &TRANSPORTS,
        );
        for (j, sig) in s.signals.iter().enumerate() {
            let path = format!("sources[{i}].signals[{j}]");
            if !is_identifier(sig) || sig == "elapsed" || sig == "surprisal" {
                d.push(path, format!("'{sig}' is not a usable signal name"));
            } else if !signal_names.insert(sig.clone()) {
                d.push(
                    path,
                    format!("signal '{sig}' is provided by more than one source"),
                );
            }
        }
        if let (Some(kind), Some(transport)) = (kind, transport) {
            sources.push(ExternalSource {
                id: s.id,
                kind,
                transport,
                signals: s.signals,
                location: s.location,
            });
        }
    }
    d.unique("sources", "id", sources.iter().map(|s| s.id.as_str()));
    let source_signals = signal_names.clone();

    let mut derived = Vec::new();
    for (i, x) in doc.derived.into_iter().enumerate() {
        let path = format!("derived[{i}]");
        if !is_identifier(&x.name) || source_signals.contains(&x.name) {
            d.push(
                format!("{path}.name"),
                format!("'{}' is not a free signal name", x.name),
            );
        } else if !signal_names.insert(x.name.clone()) {
            d.push(
                format!("{path}.name"),
                format!("duplicate signal '{}'", x.name),
            );
        }
        if !source_signals.contains(&x.input) {
            d.push(
                format!("{path}.input"),
                format!("'{}' is not a declared source signal", x.input),
            );
        }
        if x.window == 0 {
            d.push(format!("{path}.window"), "window must be at least 1");
        }
        let fusion = match (x.function.as_str(), x.threshold) {
            ("moving_average", None) => Some(Fusion::MovingAverage {
                input: x.input,
                window: x.window,
            }),
            ("threshold_count", Some(threshold)) => Some(Fusion::ThresholdCount {
                input: x.input,
                threshold,
                window: x.window,
            }),
            ("moving_average", Some(_)) => {
                d.push(
                    format!("{path}.threshold"),
                    "moving_average takes no threshold",
                );
                None
            }
            ("threshold_count", None) => {
                d.push(
                    format!("{path}.threshold"),
                    "threshold_count needs a threshold",
                );
                None
            }
            (f, _) => {
                d.push(
                    format!("{path}.function"),
                    format!("unknown function '{f}' (moving_average, threshold_count)"),
                );
                None
            }
        };
        if let Some(fusion) = fusion {
            derived.push(DerivedSignal {
                name: x.name,
                fusion,
            });
        }
    }

    // task model
    let task_model = match parse_model(&doc.tasks.source) {
        Ok(m) => Some(m),
        Err(e) => {
            let pos = e.position();
            d.push(
                format!("tasks.source:{}:{}", pos.line, pos.column),
                e.to_string(),
            );
            None
        }
    };
    let leaf_ids: BTreeSet<String> = task_model
        .as_ref()
        .map(|m| m.leaves().into_iter().map(|l| l.id.clone()).collect())
        .unwrap_or_default();
    let check_leaf = |d: &mut Diags, path: String, leaf: &str| {
        if task_model.is_some() && !leaf_ids.contains(leaf) {
            d.push(path, format!("unknown leaf '{leaf}'"));
        }
    };

    // contexts
    let mut contexts = Vec::new();
    for (i, c) in doc.contexts.into_iter().enumerate() {
        let path = format!("contexts[{i}]");
        if !is_identifier(&c.id) {
            d.push(
                format!("{path}.id"),
                format!("'{}' is not a valid identifier", c.id),
            );
        }
        for (j, leaf) in c.scope.iter().enumerate() {
            check_leaf(d, format!("{path}.scope[{j}]"), leaf);
        }
        let severity = parse_keyword(d, format!("{path}.severity"), &c.severity, &SEVERITIES);
        let predicate = match c.when.parse::<Predicate>() {
            Ok(p) => {
                for sig in p.signals() {
                    if !signal_names.contains(sig) {
                        d.push(
                            format!("{path}.when"),
                            format!("signal '{sig}' is not declared by any source"),
                        );
                    }
                }
                Some(p)
            }
            Err(e) => {
                d.push(format!("{path}.when"), e.to_string());
                None
            }
        };
        if let (Some(severity), Some(predicate)) = (severity, predicate) {
            contexts.push(ContextRule {
                id: c.id,
                scope: c.scope.into_iter().collect(),
                predicate,
                severity,
                message: c.message,
            });
        }
    }
    d.unique("contexts", "id", contexts.iter().map(|c| c.id.as_str()));

    // dependencies
    for (leaf, dependents) in &doc.dependencies {
        check_leaf(d, format!("dependencies.{leaf}"), leaf);
        for (j, dep) in dependents.iter().enumerate() {
            let path = format!("dependencies.{leaf}[{j}].leaf");
            if !is_identifier(&dep.leaf) {
                d.push(path, format!("'{}' is not a valid identifier", dep.leaf));
            } else if dep.team.is_none() {
                check_leaf(d, path, &dep.leaf);
            }
        }
    }
    let dependencies: DependencyMap = doc.dependencies;

    // user model
    let user_config = doc.user_config.unwrap_or_default();
    for issue in user_config.validate() {
        d.push(format!("user_config.{}", issue.field), issue.message);
    }

    // bindings
    let tier_table = tiers();
    let kind_table = component_kinds();
    let mut bindings: Vec<ContentBinding> = Vec::new();
    let mut pairs = BTreeSet::new();
    let mut keys = BTreeSet::new();
    for (i, b) in doc.bindings.into_iter().enumerate() {
        let path = format!("bindings[{i}]");
        check_leaf(d, format!("{path}.leaf"), &b.leaf);
        let tier = parse_keyword(d, format!("{path}.tier"), &b.tier, &tier_table);
        if let Some(tier) = tier {
            if !pairs.insert((b.leaf.clone(), tier)) {
                d.push(
                    format!("{path}.tier"),
                    format!("leaf '{}' already has {tier} content", b.leaf),
                );
            }
        }
        if let Some(key) = &b.key {
            if !is_asset_key(key) {
                d.push(
                    format!("{path}.key"),
                    format!("key '{key}' must be lowercase"),
                );
            } else if !keys.insert(key.clone()) {
                d.push(format!("{path}.key"), format!("duplicate key '{key}'"));
            }
        }
        if b.components.is_empty() {
            d.push(format!("{path}.components"), "binding has no components");
        }
        let mut components = Vec::new();
        for (j, c) in b.components.into_iter().enumerate() {
            let cpath = format!("{path}.components[{j}]");
            let Some(kind) = parse_keyword(d, format!("{cpath}.kind"), &c.kind, &kind_table) else {
                continue;
            };
            if kind.needs_anchor() && c.anchor.as_deref().is_none_or(str::is_empty) {
                d.push(
                    format!("{cpath}.anchor"),
                    format!("{} needs an anchor", c.kind),
                );
            }
            if c.payload.trim().is_empty() {
                d.push(format!("{cpath}.payload"), "payload must not be empty");
            } else if kind.is_asset() && !is_asset_key(&c.payload) {
                d.push(
                    format!("{cpath}.payload"),
                    format!("asset key '{}' must be lowercase without spaces", c.payload),
                );
            }
            components.push(ContentComponent {
                kind,
                payload: c.payload,
                anchor: c.anchor,
            });
        }
        if let Some(tier) = tier {
            bindings.push(ContentBinding {
                leaf: b.leaf,
                tier,
                key: b.key,
                components,
            });
        }
    }

    let task_model = task_model?;
    let scope = ValidationScope {
        context_ids: contexts.iter().map(|c| c.id.clone()).collect(),
        content_keys: bindings
            .iter()
            .filter_map(|b| b.key.clone().map(|k| (k, b.tier)))
            .collect(),
    };
    for diag in task_model.validate(&scope) {
        d.push(format!("tasks.{}", diag.node), diag.to_string());
    }
    match compile_with(&task_model, opts) {
        Ok(_) => {}
        Err(e) => {
            *state_cap_exceeded = matches!(e, CompileError::StateExplosion { .. });
            d.push("tasks", e.to_string())
        }
    }

    let model = ArMaintenanceModel {
        name: doc.model.name,
        part: doc.model.part,
        equipment,
        environment,
        users,
        sources,
        derived,
        task_model,
        contexts,
        dependencies,
        user_config,
        bindings,
    };
    for leaf in model.task_model.leaves() {
        if model.bound_tiers(&leaf.id).is_empty() {
            d.push(
                format!("bindings.{}", leaf.id),
                format!("leaf '{}' has no content on any tier", leaf.id),
            );
        }
    }
    Some(model)
}

/// Canonical `.amm` text; empty optional sections are left out.
pub fn export_model(m: &ArMaintenanceModel) -> String {
    let doc = Doc {
        model: ModelDoc {
            name: m.name.clone(),
            part: m.part.clone(),
        },
        equipment: EquipmentDoc {
            id: m.equipment.id.clone(),
            name: m.equipment.name.clone(),
            documentation: m.equipment.documentation.clone(),
            media: m.equipment.media.clone(),
            parts: m
                .equipment
                .parts
                .iter()
                .map(|p| PartDoc {
                    id: p.id.clone(),
                    name: p.name.clone(),
                    tools: p.tools.clone(),
                })
                .collect(),
        },
        environment: EnvironmentDoc {
            id: m.environment.id.clone(),
            safety_notes: m.environment.safety_notes.clone(),
            neighbors: m
                .environment
                .neighbors
                .iter()
                .map(|n| NeighborDoc {
                    id: n.id.clone(),
                    name: n.name.clone(),
                    influence: n.influence.clone(),
                })
                .collect(),
        },
        users: m
            .users
            .iter()
            .map(|u| UserDoc {
                id: u.id.clone(),
                name: u.name.clone(),
                role: u.role.to_string(),
                initial_level: u.initial_level.map(|l| l.keyword().to_string()),
            })
            .collect(),
        sources: m
            .sources
            .iter()
            .map(|s| SourceDoc {
                id: s.id.clone(),
                kind: keyword_of(&SOURCE_KINDS, s.kind),
                transport: keyword_of(&TRANSPORTS, s.transport),
                signals: s.signals.clone(),
                location: s.location.clone(),
            })
            .collect(),
        derived: m
            .derived
            .iter()
            .map(|x| match &x.fusion {
                Fusion::MovingAverage { input, window } => DerivedDoc {
                    name: x.name.clone(),
                    function: "moving_average".into(),
                    input: input.clone(),
                    window: *window,
                    threshold: None,
                },
                Fusion::ThresholdCount {
                    input,
                    threshold,
                    window,
                } => DerivedDoc {
                    name: x.name.clone(),
                    function: "threshold_count".into(),
                    input: input.clone(),
                    window: *window,
                    threshold: Some(*threshold),
                },
            })
            .collect(),
        tasks: TasksDoc {
            source: serialize_model(&m.task_model),
        },
        contexts: m
            .contexts
            .iter()
            .map(|c| ContextDoc {
                id: c.id.clone(),
                scope: c.scope.iter().cloned().collect(),
                when: c.predicate.to_string(),
                severity: c.severity.keyword().to_string(),
                message: c.message.clone(),
            })
            .collect(),
        dependencies: m.dependencies.clone(),
        user_config: (m.user_config != UserModelConfig::default()).then(|| m.user_config.clone()),
        bindings: m
            .bindings
            .iter()
            .map(|b| BindingDoc {
                leaf: b.leaf.clone(),
                tier: b.tier.keyword().to_string(),
                key: b.key.clone(),
                components: b
                    .components
                    .iter()
                    .map(|c| ComponentDoc {
                        kind: c.kind.keyword().to_string(),
                        payload: c.payload.clone(),
                        anchor: c.anchor.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("model document serializes")
}

fn keyword_of<T: PartialEq + Copy>(table: &[(&str, T)], value: T) -> String {
    table
        .iter()
        .find(|(_, v)| *v == value)
        .map(|(k, _)| k.to_string())
        .expect("every variant has a keyword")
}
