use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SaBreakdownTag;
use crate::clock::Timestamp;

pub const DEFAULT_DETAIL_EVENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamEventKind {
    Started,
    Completed,
    Blocked,
    Unblocked,
    HelpRequested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamEvent {
    pub team_id: String,
    pub member_id: String,
    pub session_id: String,
    pub leaf_id: String,
    pub kind: TeamEventKind,
    pub timestamp: Timestamp,
    /// For `Unblocked`: the completed leaf that released `leaf_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<SaBreakdownTag>,
}

/// Work waiting on a leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependent {
    pub leaf: String,
    /// Team to release; the completing member's team when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub team: Option<String>,
}

/// Leaf id → work blocked until it completes.
pub type DependencyMap = BTreeMap<String, Vec<Dependent>>;

/// One `Unblocked` event per direct dependent of the completed leaf.
///
/// Dependencies are not followed transitively.
pub fn notify_unblocked(completed: &TeamEvent, deps: &DependencyMap) -> Vec<TeamEvent> {
    deps.get(&completed.leaf_id)
        .into_iter()
        .flatten()
        .map(|d| TeamEvent {
            team_id: d.team.clone().unwrap_or_else(|| completed.team_id.clone()),
            member_id: completed.member_id.clone(),
            session_id: completed.session_id.clone(),
            leaf_id: d.leaf.clone(),
            kind: TeamEventKind::Unblocked,
            timestamp: completed.timestamp,
            cause: Some(completed.leaf_id.clone()),
            tag: None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TeamError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown team '{0}'")]
    UnknownTeam(String),
    #[error("'{leaf}' already completed in session '{session}'")]
    AlreadyCompleted { session: String, leaf: String },
    #[error("event for session '{0}' is older than its last event")]
    OutOfOrder(String),
}

struct Member {
    team_id: String,
    member_id: String,
    active: bool,
    descriptions: Arc<BTreeMap<String, String>>,
}

/// Append-only log of team events plus the sessions that feed it.
#[derive(Default)]
pub struct TeamFeed {
    events: Vec<TeamEvent>,
    sessions: BTreeMap<String, Member>,
    completed: BTreeSet<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeafRef {
    pub id: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "leaf")]
pub enum MemberStatus {
    Working,
    Blocked(String),
    Idle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemberView {
    pub member_id: String,
    pub session_id: String,
    pub status: MemberStatus,
    pub current: Vec<LeafRef>,
    pub line: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TeamView {
    pub team_id: String,
    pub status_line: String,
    pub members: Vec<MemberView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberDetail {
    pub member_id: String,
    pub session_id: String,
    pub recent: Vec<TeamEvent>,
}

impl TeamFeed {
    pub fn new() -> Self {
        TeamFeed::default()
    }

    pub fn register_session(
        &mut self,
        session_id: &str,
        team_id: &str,
        member_id: &str,
        descriptions: Arc<BTreeMap<String, String>>,
    ) {
        self.sessions.insert(
            session_id.to_string(),
            Member {
                team_id: team_id.to_string(),
                member_id: member_id.to_string(),
                active: true,
                descriptions,
            },
        );
    }

    pub fn finish_session(&mut self, session_id: &str) -> Result<(), TeamError> {
        let m = self
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| TeamError::UnknownSession(session_id.to_string()))?;
        m.active = false;
        Ok(())
    }

    pub fn events(&self) -> &[TeamEvent] {
        &self.events
    }

    pub fn team_of(&self, session_id: &str) -> Option<&str> {
        self.sessions.get(session_id).map(|m| m.team_id.as_str())
    }

    /// Checks `event` without recording it.
    pub fn check(&self, event: &TeamEvent) -> Result<(), TeamError> {
        if !self.sessions.contains_key(&event.session_id) {
            return Err(TeamError::UnknownSession(event.session_id.clone()));
        }
        if let Some(last) = self
            .events
            .iter()
            .rev()
            .find(|e| e.session_id == event.session_id)
        {
            if event.timestamp < last.timestamp {
                return Err(TeamError::OutOfOrder(event.session_id.clone()));
            }
        }
        if event.kind == TeamEventKind::Completed
            && self
                .completed
                .contains(&(event.session_id.clone(), event.leaf_id.clone()))
        {
            return Err(TeamError::AlreadyCompleted {
                session: event.session_id.clone(),
                leaf: event.leaf_id.clone(),
            });
        }
        Ok(())
    }

    /// Appends `event`. A `Completed` event also appends and returns the
    /// `Unblocked` events it releases.
    pub fn record(
        &mut self,
        event: TeamEvent,
        deps: &DependencyMap,
    ) -> Result<Vec<TeamEvent>, TeamError> {
        self.check(&event)?;
        let released = if event.kind == TeamEventKind::Completed {
            self.completed
                .insert((event.session_id.clone(), event.leaf_id.clone()));
            notify_unblocked(&event, deps)
        } else {
            Vec::new()
        };
        self.events.push(event);
        self.events.extend(released.iter().cloned());
        Ok(released)
    }

    /// Appends without dependency handling; used when rebuilding from logs
    /// where the released events were recorded explicitly.
    pub fn restore(&mut self, event: TeamEvent) {
        if event.kind == TeamEventKind::Completed {
            self.completed
                .insert((event.session_id.clone(), event.leaf_id.clone()));
        }
        self.events.push(event);
    }

    /// Marks `leaf` as repeatable again in `session` (loop re-entry).
    pub fn reopen(&mut self, session_id: &str, leaf: &str) {
        self.completed
            .remove(&(session_id.to_string(), leaf.to_string()));
    }

    fn members_of(&self, team_id: &str) -> Vec<(&String, &Member)> {
        let mut members: Vec<_> = self
            .sessions
            .iter()
            .filter(|(_, m)| m.team_id == team_id)
            .collect();
        members.sort_by(|a, b| (&a.1.member_id, a.0).cmp(&(&b.1.member_id, b.0)));
        members
    }

    pub fn team_summary(&self, team_id: &str) -> Result<TeamView, TeamError> {
        let members = self.members_of(team_id);
        if members.is_empty() {
            return Err(TeamError::UnknownTeam(team_id.to_string()));
        }
        let mut views = Vec::new();
        for (session_id, m) in members {
            let mut open: Vec<String> = Vec::new();
            let mut blocked: Option<String> = None;
            for e in self.events.iter().filter(|e| &e.session_id == session_id) {
                match e.kind {
                    TeamEventKind::Started => {
                        if !open.contains(&e.leaf_id) {
                            open.push(e.leaf_id.clone());
                        }
                    }
                    TeamEventKind::Completed => open.retain(|l| l != &e.leaf_id),
                    TeamEventKind::Blocked => blocked = Some(e.leaf_id.clone()),
                    _ => {}
                }
            }
            // releases can come from any session
            if let Some(b) = &blocked {
                let released = self.events.iter().any(|e| {
                    e.kind == TeamEventKind::Unblocked && &e.leaf_id == b && e.team_id == m.team_id
                });
                if released {
                    blocked = None;
                }
            }
            let current: Vec<LeafRef> = open
                .iter()
                .map(|id| LeafRef {
                    id: id.clone(),
                    description: m.descriptions.get(id).cloned().unwrap_or_default(),
                })
                .collect();
            let status = if !m.active {
                MemberStatus::Idle
            } else if let Some(b) = blocked {
                MemberStatus::Blocked(b)
            } else if current.is_empty() {
                MemberStatus::Idle
            } else {
                MemberStatus::Working
            };
            let line = match &status {
                MemberStatus::Idle => format!("{}: idle", m.member_id),
                MemberStatus::Blocked(leaf) => format!("{}: blocked on {leaf}", m.member_id),
                MemberStatus::Working => format!(
                    "{}: {}",
                    m.member_id,
                    current
                        .iter()
                        .map(|l| if l.description.is_empty() {
                            l.id.clone()
                        } else {
                            format!("{} ({})", l.id, l.description)
                        })
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            };
            views.push(MemberView {
                member_id: m.member_id.clone(),
                session_id: session_id.clone(),
                status,
                current,
                line,
            });
        }
        let active = views
            .iter()
            .filter(|v| v.status != MemberStatus::Idle)
            .count();
        Ok(TeamView {
            team_id: team_id.to_string(),
            status_line: format!("{team_id}: {} members, {active} active", views.len()),
            members: views,
        })
    }

    /// Each member's last `k` events, oldest first.
    pub fn team_detail(&self, team_id: &str, k: usize) -> Result<Vec<MemberDetail>, TeamError> {
        let members = self.members_of(team_id);
        if members.is_empty() {
            return Err(TeamError::UnknownTeam(team_id.to_string()));
        }
        Ok(members
            .into_iter()
            .map(|(session_id, m)| {
                let mine: Vec<_> = self
                    .events
                    .iter()
                    .filter(|e| &e.session_id == session_id)
                    .collect();
                let skip = mine.len().saturating_sub(k);
                MemberDetail {
                    member_id: m.member_id.clone(),
                    session_id: session_id.clone(),
                    recent: mine.into_iter().skip(skip).cloned().collect(),
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(session: &str, member: &str, leaf: &str, kind: TeamEventKind, t: u64) -> TeamEvent {
        TeamEvent {
            team_id: "crew".into(),
            member_id: member.into(),
            session_id: session.into(),
            leaf_id: leaf.into(),
            kind,
            timestamp: Timestamp(t),
            cause: None,
            tag: None,
        }
    }

    fn feed() -> TeamFeed {
        let mut f = TeamFeed::new();
        let desc = Arc::new(BTreeMap::from([
            ("a".to_string(), "Open panel".to_string()),
            ("b".to_string(), "Drain tank".to_string()),
        ]));
        f.register_session("s1", "crew", "ana", desc.clone());
        f.register_session("s2", "crew", "ben", desc);
        f
    }

    #[test]
    fn notify_only_direct_dependents() {
        let deps = DependencyMap::from([
            (
                "a".to_string(),
                vec![Dependent {
                    leaf: "b".into(),
                    team: None,
                }],
            ),
            (
                "b".to_string(),
                vec![Dependent {
                    leaf: "c".into(),
                    team: None,
                }],
            ),
        ]);
        let done = ev("s1", "ana", "a", TeamEventKind::Completed, 1);
        let released = notify_unblocked(&done, &deps);
        assert_eq!(released.len(), 1);
        assert_eq!(released[0].leaf_id, "b");
        assert_eq!(released[0].cause.as_deref(), Some("a"));
        assert!(
            notify_unblocked(&ev("s1", "ana", "z", TeamEventKind::Completed, 1), &deps).is_empty()
        );
    }

    #[test]
    fn two_dependents_two_events() {
        let deps = DependencyMap::from([(
            "a".to_string(),
            vec![
                Dependent {
                    leaf: "x".into(),
                    team: Some("night".into()),
                },
                Dependent {
                    leaf: "y".into(),
                    team: None,
                },
            ],
        )]);
        let mut f = feed();
        let released = f
            .record(ev("s1", "ana", "a", TeamEventKind::Completed, 1), &deps)
            .unwrap();
        assert_eq!(released.len(), 2);
        assert_eq!(released[0].team_id, "night");
        assert_eq!(released[1].team_id, "crew");
        assert_eq!(f.events().len(), 3);
        for e in f
            .events()
            .iter()
            .filter(|e| e.kind == TeamEventKind::Unblocked)
        {
            let cause = e.cause.as_deref().unwrap();
            assert!(f
                .events()
                .iter()
                .any(|c| c.kind == TeamEventKind::Completed && c.leaf_id == cause));
        }
    }

    #[test]
    fn feed_rejects_bad_events() {
        let mut f = feed();
        let deps = DependencyMap::new();
        f.record(ev("s1", "ana", "a", TeamEventKind::Completed, 5), &deps)
            .unwrap();
        assert_eq!(
            f.record(ev("s1", "ana", "a", TeamEventKind::Completed, 6), &deps),
            Err(TeamError::AlreadyCompleted {
                session: "s1".into(),
                leaf: "a".into()
            })
        );
        assert_eq!(
            f.record(ev("s9", "ana", "a", TeamEventKind::Started, 6), &deps),
            Err(TeamError::UnknownSession("s9".into()))
        );
        assert_eq!(
            f.record(ev("s1", "ana", "b", TeamEventKind::Started, 4), &deps),
            Err(TeamError::OutOfOrder("s1".into()))
        );
        let kinds: Vec<_> = f.events().iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [TeamEventKind::Completed]);
    }

    #[test]
    fn summary_lines() {
        let mut f = feed();
        let deps = DependencyMap::new();
        f.record(ev("s1", "ana", "a", TeamEventKind::Started, 1), &deps)
            .unwrap();
        f.record(ev("s2", "ben", "b", TeamEventKind::Started, 1), &deps)
            .unwrap();
        let view = f.team_summary("crew").unwrap();
        let lines: Vec<_> = view.members.iter().map(|m| m.line.as_str()).collect();
        assert_eq!(lines, ["ana: a (Open panel)", "ben: b (Drain tank)"]);
        assert_eq!(view.status_line, "crew: 2 members, 2 active");

        f.finish_session("s2").unwrap();
        let view = f.team_summary("crew").unwrap();
        assert_eq!(view.members[1].status, MemberStatus::Idle);
        assert_eq!(view.members[1].line, "ben: idle");
        assert_eq!(
            f.team_summary("ghosts"),
            Err(TeamError::UnknownTeam("ghosts".into()))
        );
    }

    #[test]
    fn blocked_until_released() {
        let mut f = feed();
        let deps = DependencyMap::from([(
            "a".to_string(),
            vec![Dependent {
                leaf: "b".into(),
                team: None,
            }],
        )]);
        f.record(ev("s2", "ben", "b", TeamEventKind::Blocked, 1), &deps)
            .unwrap();
        assert_eq!(
            f.team_summary("crew").unwrap().members[1].status,
            MemberStatus::Blocked("b".into())
        );
        f.record(ev("s1", "ana", "a", TeamEventKind::Completed, 2), &deps)
            .unwrap();
        assert_ne!(
            f.team_summary("crew").unwrap().members[1].status,
            MemberStatus::Blocked("b".into())
        );
    }

    #[test]
    fn detail_keeps_last_k() {
        let mut f = feed();
        let deps = DependencyMap::new();
        for t in 0..15 {
            let kind = if t % 2 == 0 {
                TeamEventKind::Started
            } else {
                TeamEventKind::HelpRequested
            };
            f.record(ev("s1", "ana", "a", kind, t), &deps).unwrap();
        }
        let detail = f.team_detail("crew", DEFAULT_DETAIL_EVENTS).unwrap();
        assert_eq!(detail[0].recent.len(), 10);
        assert_eq!(detail[0].recent[0].timestamp, Timestamp(5));
        assert_eq!(detail[0].recent[9].timestamp, Timestamp(14));
        assert!(detail[1].recent.is_empty());
        assert_eq!(f.team_detail("crew", 3).unwrap()[0].recent.len(), 3);
    }
}
