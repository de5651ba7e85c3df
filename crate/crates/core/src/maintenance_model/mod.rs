//! The per-equipment maintenance model: data catalog, external sources, task
//! model, context rules, user-model configuration and tier-bound interface
//! content, stored together as one `.amm` document.

mod document;
mod fusion;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context_sa::{ContextRule, DependencyMap};
use crate::task_model::TaskModel;
use crate::user_model::{InterfaceTier, Level, UserModelConfig};

pub use document::{export_model, import_model, import_model_with, ImportError, ModelDiagnostic};
pub use fusion::{DerivedSignal, Fusion, SignalHistory};

pub const MODEL_EXTENSION: &str = "amm";
pub const TASK_MODEL_EXTENSION: &str = "tm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub id: String,
    pub name: String,
    pub tools: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipmentRecord {
    pub id: String,
    pub name: String,
    /// Manual section ids.
    pub documentation: Vec<String>,
    pub parts: Vec<Part>,
    /// View angle → asset key.
    pub media: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEquipment {
    pub id: String,
    pub name: String,
    pub influence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentRecord {
    pub id: String,
    pub safety_notes: Vec<String>,
    pub neighbors: Vec<NeighborEquipment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Technician,
    Engineer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: String,
    pub name: String,
    pub role: Role,
    pub initial_level: Option<Level>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Sensor,
    EMaintenanceService,
    Wsn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    ReplayFile,
    HttpPush,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSource {
    pub id: String,
    pub kind: SourceKind,
    pub transport: Transport,
    pub signals: Vec<String>,
    /// Replay file path or upstream endpoint, informational.
    pub location: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Text,
    Image,
    Video,
    Overlay3d,
    Hud,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 5] = [
        ComponentKind::Text,
        ComponentKind::Image,
        ComponentKind::Video,
        ComponentKind::Overlay3d,
        ComponentKind::Hud,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ComponentKind::Text => "text",
            ComponentKind::Image => "image",
            ComponentKind::Video => "video",
            ComponentKind::Overlay3d => "overlay3d",
            ComponentKind::Hud => "hud",
        }
    }

    /// Payload names an asset rather than carrying literal text.
    pub fn is_asset(self) -> bool {
        matches!(
            self,
            ComponentKind::Image | ComponentKind::Video | ComponentKind::Overlay3d
        )
    }

    pub fn needs_anchor(self) -> bool {
        matches!(self, ComponentKind::Overlay3d | ComponentKind::Hud)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentComponent {
    pub kind: ComponentKind,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentBinding {
    pub leaf: String,
    pub tier: InterfaceTier,
    /// Lets other leaves reuse this binding through `content.<tier>` keys.
    pub key: Option<String>,
    pub components: Vec<ContentComponent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArMaintenanceModel {
    pub name: String,
    /// Equipment part this procedure works on.
    pub part: Option<String>,
    pub equipment: EquipmentRecord,
    pub environment: EnvironmentRecord,
    pub users: Vec<UserRecord>,
    pub sources: Vec<ExternalSource>,
    pub derived: Vec<DerivedSignal>,
    pub task_model: TaskModel,
    pub contexts: Vec<ContextRule>,
    pub dependencies: DependencyMap,
    pub user_config: UserModelConfig,
    pub bindings: Vec<ContentBinding>,
}

/// Content served for a step, with the tier it actually came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedContent {
    pub requested: InterfaceTier,
    pub served: InterfaceTier,
    pub components: Vec<ContentComponent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContentError {
    #[error("unknown leaf '{0}'")]
    UnknownLeaf(String),
    #[error("leaf '{0}' has no content on any tier")]
    NoContent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {0} is not a static section (only 1 to 3 are)")]
pub struct InvalidStep(pub u8);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceSummary {
    pub id: String,
    pub kind: SourceKind,
    pub transport: Transport,
    pub signals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuideStep {
    pub index: usize,
    pub leaf: String,
    pub description: String,
    pub nominal_duration: u32,
}

/// Read-only view of an earlier authoring step.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "section", rename_all = "snake_case")]
pub enum SectionView {
    /// Step 1: gathered equipment, environment and source data.
    Catalog {
        equipment: EquipmentRecord,
        environment: EnvironmentRecord,
        sources: Vec<SourceSummary>,
        derived_signals: Vec<String>,
    },
    /// Step 2: the part chosen for this procedure.
    Part {
        equipment: String,
        part: Option<Part>,
        documentation: Vec<String>,
    },
    /// Step 3: the complete maintenance guide.
    Guide {
        title: String,
        steps: Vec<GuideStep>,
    },
}

/// Fallback order after the requested tier.
const FALLBACK: [InterfaceTier; 4] = [
    InterfaceTier::Ar,
    InterfaceTier::Visual,
    InterfaceTier::Text,
    InterfaceTier::Video,
];

impl ArMaintenanceModel {
    pub fn user(&self, id: &str) -> Option<&UserRecord> {
        self.users.iter().find(|u| u.id == id)
    }

    /// Every signal a rule may read: source signals plus derived ones.
    pub fn signal_names(&self) -> impl Iterator<Item = &str> {
        self.sources
            .iter()
            .flat_map(|s| s.signals.iter().map(String::as_str))
            .chain(self.derived.iter().map(|d| d.name.as_str()))
    }

    pub fn is_source_signal(&self, name: &str) -> bool {
        self.sources
            .iter()
            .any(|s| s.signals.iter().any(|x| x == name))
    }

    fn binding_for(&self, leaf: &str, tier: InterfaceTier) -> Option<&ContentBinding> {
        let keyed = self
            .task_model
            .leaf(leaf)
            .and_then(|l| l.content_keys.get(&tier))
            .and_then(|key| {
                self.bindings
                    .iter()
                    .find(|b| b.tier == tier && b.key.as_deref() == Some(key))
            });
        keyed.or_else(|| {
            self.bindings
                .iter()
                .find(|b| b.leaf == leaf && b.tier == tier)
        })
    }

    /// Tiers with content for `leaf`.
    pub fn bound_tiers(&self, leaf: &str) -> Vec<InterfaceTier> {
        InterfaceTier::ALL
            .into_iter()
            .filter(|t| self.binding_for(leaf, *t).is_some())
            .collect()
    }

    /// Content for `leaf` at `tier`; if that tier has none, the first of
    /// Ar, Visual, Text, Video that does.
    pub fn resolve_step_content(
        &self,
        leaf: &str,
        tier: InterfaceTier,
    ) -> Result<ResolvedContent, ContentError> {
        if self.task_model.leaf(leaf).is_none() {
            return Err(ContentError::UnknownLeaf(leaf.to_string()));
        }
        std::iter::once(tier)
            .chain(FALLBACK)
            .find_map(|t| {
                self.binding_for(leaf, t).map(|b| ResolvedContent {
                    requested: tier,
                    served: t,
                    components: b.components.clone(),
                })
            })
            .ok_or_else(|| ContentError::NoContent(leaf.to_string()))
    }

    pub fn step_back_context(&self, step: u8) -> Result<SectionView, InvalidStep> {
        match step {
            1 => Ok(SectionView::Catalog {
                equipment: self.equipment.clone(),
                environment: self.environment.clone(),
                sources: self
                    .sources
                    .iter()
                    .map(|s| SourceSummary {
                        id: s.id.clone(),
                        kind: s.kind,
                        transport: s.transport,
                        signals: s.signals.clone(),
                    })
                    .collect(),
                derived_signals: self.derived.iter().map(|d| d.name.clone()).collect(),
            }),
            2 => Ok(SectionView::Part {
                equipment: self.equipment.name.clone(),
                part: self
                    .part
                    .as_ref()
                    .and_then(|p| self.equipment.parts.iter().find(|x| &x.id == p))
                    .cloned(),
                documentation: self.equipment.documentation.clone(),
            }),
            3 => Ok(SectionView::Guide {
                title: self.task_model.name.clone(),
                steps: self
                    .task_model
                    .leaves()
                    .into_iter()
                    .enumerate()
                    .map(|(i, l)| GuideStep {
                        index: i + 1,
                        leaf: l.id.clone(),
                        description: l.description.clone(),
                        nominal_duration: l.nominal_duration,
                    })
                    .collect(),
            }),
            other => Err(InvalidStep(other)),
        }
    }

    /// Leaf id → description.
    pub fn descriptions(&self) -> BTreeMap<String, String> {
        self.task_model
            .leaves()
            .into_iter()
            .map(|l| (l.id.clone(), l.description.clone()))
            .collect()
    }
}

/// Where an asset key lives under an asset root (`assets/<key>`).
pub fn asset_path(root: &Path, key: &str) -> PathBuf {
    root.join("assets").join(key)
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Technician => "technician",
            Role::Engineer => "engineer",
        })
    }
}
