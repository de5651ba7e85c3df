use serde::{Deserialize, Serialize};

use super::session::{final_level, final_posterior, LogRecord, ProblemReport, SessionEvent};
use crate::clock::Timestamp;
use crate::context_sa::{Alert, TeamEvent, TeamEventKind};
use crate::maintenance_model::Role;
use crate::user_model::{Distribution, InterfaceTier, Level};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportUser {
    pub id: String,
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafDuration {
    pub leaf: String,
    /// Sum over all completions of the leaf.
    pub seconds: u64,
    pub completions: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AccessedInfo {
    Help { leaf: String, tier: InterfaceTier },
    StepBack { step: u8 },
    TeamDetail { team_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accessed {
    pub at: Timestamp,
    #[serde(flatten)]
    pub info: AccessedInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierChange {
    pub at: Timestamp,
    pub from: InterfaceTier,
    pub to: InterfaceTier,
}

/// Data sent back to the maintenance system when a session ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostMaintenanceReport {
    pub session_id: String,
    pub model_id: String,
    pub user: ReportUser,
    pub final_level: Level,
    pub final_posterior: Distribution,
    pub team_id: Option<String>,
    pub team_members: Vec<String>,
    pub started_at: Timestamp,
    pub finished_at: Option<Timestamp>,
    /// Sum of `leaf_durations`, in seconds.
    pub total_seconds: u64,
    pub leaf_durations: Vec<LeafDuration>,
    pub skipped: Vec<String>,
    pub accessed: Vec<Accessed>,
    pub contexts: Vec<Alert>,
    pub problems: Vec<ProblemReport>,
    pub teams_notified: Vec<TeamEvent>,
    pub tier_changes: Vec<TierChange>,
    pub checklist_warnings: u32,
}

impl PostMaintenanceReport {
    /// Folds a session log into its report. `None` if the log has no
    /// creation record.
    pub fn from_log(log: &[LogRecord]) -> Option<PostMaintenanceReport> {
        let first = log.first()?;
        let SessionEvent::Created {
            session_id,
            model_id,
            user,
            team_id,
            ..
        } = &first.event
        else {
            return None;
        };
        let mut r = PostMaintenanceReport {
            session_id: session_id.clone(),
            model_id: model_id.clone(),
            user: ReportUser {
                id: user.id.clone(),
                name: user.name.clone(),
                role: user.role,
            },
            final_level: final_level(log),
            final_posterior: final_posterior(log)?,
            team_id: team_id.clone(),
            team_members: Vec::new(),
            started_at: first.at,
            finished_at: None,
            total_seconds: 0,
            leaf_durations: Vec::new(),
            skipped: Vec::new(),
            accessed: Vec::new(),
            contexts: Vec::new(),
            problems: Vec::new(),
            teams_notified: Vec::new(),
            tier_changes: Vec::new(),
            checklist_warnings: 0,
        };
        for rec in log {
            match &rec.event {
                SessionEvent::Completed { leaf, duration, .. } => {
                    match r.leaf_durations.iter_mut().find(|d| &d.leaf == leaf) {
                        Some(d) => {
                            d.seconds += u64::from(*duration);
                            d.completions += 1;
                        }
                        None => r.leaf_durations.push(LeafDuration {
                            leaf: leaf.clone(),
                            seconds: u64::from(*duration),
                            completions: 1,
                        }),
                    }
                }
                SessionEvent::Skipped { target, .. } => r.skipped.push(target.clone()),
                SessionEvent::HelpRequested { leaf, tier } => r.accessed.push(Accessed {
                    at: rec.at,
                    info: AccessedInfo::Help {
                        leaf: leaf.clone(),
                        tier: *tier,
                    },
                }),
                SessionEvent::ContextViewed { step } => r.accessed.push(Accessed {
                    at: rec.at,
                    info: AccessedInfo::StepBack { step: *step },
                }),
                SessionEvent::TeamDetailViewed { team_id } => r.accessed.push(Accessed {
                    at: rec.at,
                    info: AccessedInfo::TeamDetail {
                        team_id: team_id.clone(),
                    },
                }),
                SessionEvent::Alert { alert } => r.contexts.push(alert.clone()),
                SessionEvent::ProblemReported { report } => r.problems.push(report.clone()),
                SessionEvent::TeamNote { event } if event.kind == TeamEventKind::Unblocked => {
                    r.teams_notified.push(event.clone())
                }
                SessionEvent::TierChanged { from, to, .. } => r.tier_changes.push(TierChange {
                    at: rec.at,
                    from: *from,
                    to: *to,
                }),
                SessionEvent::ChecklistWarning { .. } => r.checklist_warnings += 1,
                SessionEvent::Finished { team_members } => {
                    r.finished_at = Some(rec.at);
                    r.team_members = team_members.clone();
                }
                _ => {}
            }
        }
        r.total_seconds = r.leaf_durations.iter().map(|d| d.seconds).sum();
        Some(r)
    }
}
