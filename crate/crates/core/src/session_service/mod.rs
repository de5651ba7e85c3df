//! Guided maintenance sessions over imported models: step flow, adaptation,
//! alerts, team feed, persistence and the post-maintenance report.

mod delivery;
pub mod http;
mod report;
mod session;
mod simulate;
mod store;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use thiserror::Error;
use tokio::sync::broadcast;

use crate::automaton::{compile, Action};
use crate::clock::{Clock, Timestamp};
use crate::context_sa::{
    Alert, OutOfOrderSignal, SignalFrame, TeamEvent, TeamEventKind, TeamFeed, TeamView,
    DEFAULT_DETAIL_EVENTS,
};
use crate::maintenance_model::{export_model, import_model, ImportError, SectionView};
use crate::user_model::{Distribution, InterfaceTier, Level, UserModelError};

pub use delivery::{deliver_report, write_outbox, Delivery};
pub use report::{
    Accessed, AccessedInfo, LeafDuration, PostMaintenanceReport, ReportUser, TierChange,
};
pub use session::{
    ChecklistItem, ChecklistStatus, Command, EnabledAction, LoadedModel, LogRecord,
    ProblemCategory, ProblemReport, SelectionItem, Session, SessionEvent, SessionStatus, StepBody,
    StepContent, StepView, TeamBrief,
};
pub use simulate::{simulate_user, SimStep, Simulation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown team '{0}'")]
    UnknownTeam(String),
    #[error("unknown leaf '{0}'")]
    UnknownLeaf(String),
    #[error("step {0} is not a static section (only 1 to 3 are)")]
    InvalidStep(u8),
    #[error("session '{0}' is finished")]
    SessionFinished(String),
    #[error("{action} is not enabled here")]
    IllegalAction {
        action: Action,
        enabled: Vec<Action>,
    },
    #[error("session '{0}' has not reached the end of the procedure")]
    ProcedureIncomplete(String),
    #[error("signal '{0}' is not declared by any source of the model")]
    UnknownSignal(String),
    #[error(transparent)]
    OutOfOrderSignal(#[from] OutOfOrderSignal),
    #[error(transparent)]
    UserModel(#[from] UserModelError),
    #[error("model '{0}' already exists with different content")]
    ModelExists(String),
    #[error("{0}")]
    InvalidModel(ImportError),
    #[error("storage: {0}")]
    Io(String),
    #[error("replay failed: {0}")]
    Replay(String),
}

impl From<std::io::Error> for SessionError {
    fn from(e: std::io::Error) -> Self {
        SessionError::Io(e.to_string())
    }
}

/// A log record as pushed to live subscribers.
#[derive(Debug, Clone, Serialize)]
pub struct Published {
    pub session_id: String,
    pub team_id: Option<String>,
    pub record: LogRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub id: String,
    pub title: String,
    pub equipment: String,
    pub leaves: usize,
    pub states: usize,
    pub transitions: usize,
    pub users: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserView {
    pub session_id: String,
    pub user_id: String,
    pub posterior: Distribution,
    pub level: Level,
    pub tier: InterfaceTier,
    pub observations: usize,
}

pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub report_url: Option<String>,
}

pub struct Service {
    data_dir: PathBuf,
    report_url: Option<String>,
    clock: Arc<dyn Clock>,
    models: RwLock<BTreeMap<String, Arc<LoadedModel>>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    feed: Mutex<TeamFeed>,
    next_session: AtomicU64,
    events: broadcast::Sender<Published>,
}

/// Compiles an imported model for serving.
pub fn load_model(text: &str) -> Result<LoadedModel, SessionError> {
    let model = import_model(text).map_err(SessionError::InvalidModel)?;
    let pdfa = compile(&model.task_model).map_err(|e| SessionError::Io(e.to_string()))?;
    Ok(LoadedModel::new(&model.name.clone(), model, pdfa))
}

impl Service {
    /// Opens (or creates) a data directory, reloading models and replaying
    /// every stored session.
    pub fn open(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Service, SessionError> {
        let dir = &config.data_dir;
        store::ensure_layout(dir)?;
        let mut models = BTreeMap::new();
        for (id, text) in store::read_models(dir)? {
            let loaded = load_model(&text)?;
            if loaded.id != id {
                return Err(SessionError::Io(format!(
                    "model file '{id}' holds model '{}'",
                    loaded.id
                )));
            }
            models.insert(id, Arc::new(loaded));
        }
        let mut sessions = BTreeMap::new();
        let mut notes: Vec<(Timestamp, String, u64, TeamEvent)> = Vec::new();
        let mut feed = TeamFeed::new();
        let mut max_id = 0;
        for (id, log) in store::read_sessions(dir)? {
            let model_id = match log.first().map(|r| &r.event) {
                Some(SessionEvent::Created { model_id, .. }) => model_id.clone(),
                _ => {
                    return Err(SessionError::Replay(format!(
                        "session '{id}' has no header"
                    )))
                }
            };
            let ctx = models
                .get(&model_id)
                .ok_or_else(|| SessionError::UnknownModel(model_id.clone()))?;
            let s = Session::replay(ctx, &log)?;
            if let Some(team) = &s.team_id {
                feed.register_session(&s.id, team, &s.user.id, ctx.descriptions.clone());
                for r in &s.log {
                    if let SessionEvent::TeamNote { event } = &r.event {
                        notes.push((r.at, s.id.clone(), r.seq, event.clone()));
                    }
                }
            }
            max_id = max_id.max(store::session_number(&id));
            sessions.insert(id, s);
        }
        notes.sort_by(|a, b| (a.0, &a.1, a.2).cmp(&(b.0, &b.1, b.2)));
        for (_, session, _, event) in notes {
            if event.kind == TeamEventKind::Started {
                feed.reopen(&session, &event.leaf_id);
            }
            feed.restore(event);
        }
        for s in sessions.values() {
            if !s.is_active() {
                let _ = feed.finish_session(&s.id);
            }
        }
        let (tx, _) = broadcast::channel(1024);
        Ok(Service {
            data_dir: config.data_dir,
            report_url: config.report_url,
            clock,
            models: RwLock::new(models),
            sessions: RwLock::new(
                sessions
                    .into_iter()
                    .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
                    .collect(),
            ),
            feed: Mutex::new(feed),
            next_session: AtomicU64::new(max_id + 1),
            events: tx,
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn report_url(&self) -> Option<&str> {
        self.report_url.as_deref()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Published> {
        self.events.subscribe()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    // models

    /// Imports `.amm` text. Re-importing identical content is a no-op.
    pub fn import_model(&self, text: &str) -> Result<ModelSummary, SessionError> {
        let loaded = load_model(text)?;
        let canonical = export_model(&loaded.model);
        let mut models = self.models.write().expect("models lock");
        if let Some(existing) = models.get(&loaded.id) {
            if existing.model != loaded.model {
                return Err(SessionError::ModelExists(loaded.id));
            }
            return Ok(summary(existing));
        }
        store::write_model(&self.data_dir, &loaded.id, &canonical)?;
        let out = summary(&loaded);
        models.insert(loaded.id.clone(), Arc::new(loaded));
        Ok(out)
    }

    pub fn list_models(&self) -> Vec<ModelSummary> {
        let models = self.models.read().expect("models lock");
        models.values().map(|m| summary(m)).collect()
    }

    pub fn model(&self, id: &str) -> Result<Arc<LoadedModel>, SessionError> {
        self.models
            .read()
            .expect("models lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownModel(id.to_string()))
    }

    pub fn model_summary(&self, id: &str) -> Result<ModelSummary, SessionError> {
        Ok(summary(self.model(id)?.as_ref()))
    }

    // sessions

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions
            .read()
            .expect("sessions lock")
            .keys()
            .cloned()
            .collect()
    }

    /// Monotonic per session: never earlier than the last record.
    fn stamp(&self, s: &Session) -> Timestamp {
        let now = self.clock.now();
        s.log.last().map_or(now, |r| now.max(r.at))
    }

    pub fn create_session(
        &self,
        model_id: &str,
        user_id: &str,
        team_id: Option<String>,
    ) -> Result<StepView, SessionError> {
        let ctx = self.model(model_id)?;
        let team_id = team_id.filter(|t| !t.is_empty());
        let n = self.next_session.fetch_add(1, Ordering::SeqCst);
        let id = store::session_id(n);
        let now = self.clock.now();
        let (mut s, events) = Session::create(&ctx, &id, user_id, team_id.clone(), now)?;
        let records = {
            let mut feed = self.feed.lock().expect("feed lock");
            if let Some(team) = &team_id {
                feed.register_session(&id, team, user_id, ctx.descriptions.clone());
            }
            let events = self.with_team(&ctx, &s, &mut feed, events, now);
            let records = s.append(now, events);
            store::append_records(&self.data_dir, &id, &records)?;
            records
        };
        let view = s.view(&ctx, self.team_brief(s.team_id.as_deref()));
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id.clone(), Arc::new(Mutex::new(s)));
        self.publish(&id, team_id.as_deref(), records);
        Ok(view)
    }

    /// Adds team bookkeeping to freshly applied events: feeds them to the
    /// team feed and notes steps still waiting on other work.
    fn with_team(
        &self,
        ctx: &LoadedModel,
        s: &Session,
        feed: &mut TeamFeed,
        events: Vec<SessionEvent>,
        now: Timestamp,
    ) -> Vec<SessionEvent> {
        let Some(team) = s.team_id.clone() else {
            return events;
        };
        let mut out = Vec::with_capacity(events.len());
        for e in events {
            match &e {
                SessionEvent::TeamNote { event } => {
                    if event.kind == TeamEventKind::Started {
                        feed.reopen(&s.id, &event.leaf_id);
                    }
                    feed.restore(event.clone());
                    out.push(e);
                }
                SessionEvent::StepShown { leaves, .. } => {
                    let leaves = leaves.clone();
                    out.push(e);
                    for leaf in leaves {
                        if waits_on_other_work(ctx, feed, &team, &leaf) {
                            let blocked = TeamEvent {
                                team_id: team.clone(),
                                member_id: s.user.id.clone(),
                                session_id: s.id.clone(),
                                leaf_id: leaf,
                                kind: TeamEventKind::Blocked,
                                timestamp: now,
                                cause: None,
                                tag: None,
                            };
                            feed.restore(blocked.clone());
                            out.push(SessionEvent::TeamNote { event: blocked });
                        }
                    }
                }
                SessionEvent::Finished { .. } => {
                    let _ = feed.finish_session(&s.id);
                    out.push(e);
                }
                _ => out.push(e),
            }
        }
        out
    }

    fn publish(&self, session_id: &str, team_id: Option<&str>, records: Vec<LogRecord>) {
        for record in records {
            // no subscribers is fine
            let _ = self.events.send(Published {
                session_id: session_id.to_string(),
                team_id: team_id.map(str::to_string),
                record,
            });
        }
    }

    /// Runs one command under the session's lock; the session only changes
    /// once its records are on disk.
    fn run(
        &self,
        session_id: &str,
        cmd: Command,
    ) -> Result<(Session, Arc<LoadedModel>), SessionError> {
        let handle = self.session(session_id)?;
        let mut guard = handle.lock().expect("session lock");
        let ctx = self.model(&guard.model_id)?;
        let now = self.stamp(&guard);
        let mut next = guard.clone();
        let cmd = match cmd {
            Command::Finish { .. } => Command::Finish {
                team_members: self.team_members(next.team_id.as_deref()),
            },
            other => other,
        };
        let events = match next.apply(&ctx, &cmd, now) {
            Ok(events) => events,
            Err(SessionError::IllegalAction { action, enabled }) => {
                let warning = vec![SessionEvent::ChecklistWarning {
                    attempted: action.clone(),
                    enabled: enabled.clone(),
                }];
                let records = guard.append(now, warning);
                if let Err(e) = store::append_records(&self.data_dir, session_id, &records) {
                    let keep = guard.log.len() - records.len();
                    guard.log.truncate(keep);
                    return Err(e);
                }
                let team = guard.team_id.clone();
                drop(guard);
                self.publish(session_id, team.as_deref(), records);
                return Err(SessionError::IllegalAction { action, enabled });
            }
            Err(e) => return Err(e),
        };
        let records = {
            let mut feed = self.feed.lock().expect("feed lock");
            let events = self.with_team(&ctx, &next, &mut feed, events, now);
            let records = next.append(now, events);
            store::append_records(&self.data_dir, session_id, &records)?;
            records
        };
        *guard = next.clone();
        drop(guard);
        self.publish(session_id, next.team_id.as_deref(), records);
        Ok((next, ctx))
    }

    fn team_members(&self, team: Option<&str>) -> Vec<String> {
        let Some(team) = team else {
            return Vec::new();
        };
        let feed = self.feed.lock().expect("feed lock");
        let mut members: Vec<String> = feed
            .team_summary(team)
            .map(|v| v.members.into_iter().map(|m| m.member_id).collect())
            .unwrap_or_default();
        members.dedup();
        members
    }

    fn team_brief(&self, team: Option<&str>) -> Option<TeamBrief> {
        let feed = self.feed.lock().expect("feed lock");
        let view = feed.team_summary(team?).ok()?;
        Some(TeamBrief {
            status_line: view.status_line,
            lines: view.members.into_iter().map(|m| m.line).collect(),
        })
    }

    fn view_of(&self, s: &Session, ctx: &LoadedModel) -> StepView {
        s.view(ctx, self.team_brief(s.team_id.as_deref()))
    }

    pub fn get_current_step(&self, session_id: &str) -> Result<StepView, SessionError> {
        let handle = self.session(session_id)?;
        let s = handle.lock().expect("session lock").clone();
        if !s.is_active() {
            return Err(SessionError::SessionFinished(session_id.to_string()));
        }
        let ctx = self.model(&s.model_id)?;
        Ok(self.view_of(&s, &ctx))
    }

    pub fn complete_task(
        &self,
        session_id: &str,
        leaf: &str,
        duration: u32,
    ) -> Result<StepView, SessionError> {
        let (s, ctx) = self.run(
            session_id,
            Command::Complete {
                leaf: leaf.to_string(),
                duration,
            },
        )?;
        Ok(self.view_of(&s, &ctx))
    }

    pub fn skip(&self, session_id: &str, target: &str) -> Result<StepView, SessionError> {
        let (s, ctx) = self.run(
            session_id,
            Command::Skip {
                target: target.to_string(),
            },
        )?;
        Ok(self.view_of(&s, &ctx))
    }

    pub fn exit_loop(&self, session_id: &str, target: &str) -> Result<StepView, SessionError> {
        let (s, ctx) = self.run(
            session_id,
            Command::ExitLoop {
                target: target.to_string(),
            },
        )?;
        Ok(self.view_of(&s, &ctx))
    }

    /// Content for `leaf` one tier more supportive than the user's.
    pub fn request_help(&self, session_id: &str, leaf: &str) -> Result<StepContent, SessionError> {
        let (s, ctx) = self.run(
            session_id,
            Command::Help {
                leaf: leaf.to_string(),
            },
        )?;
        s.content_for(&ctx, leaf)
            .ok_or_else(|| SessionError::UnknownLeaf(leaf.to_string()))
    }

    pub fn ingest_signals(
        &self,
        session_id: &str,
        frame: SignalFrame,
    ) -> Result<Vec<Alert>, SessionError> {
        let before = self
            .session(session_id)?
            .lock()
            .expect("session lock")
            .log
            .len();
        let (s, _) = self.run(session_id, Command::Signals { frame })?;
        Ok(s.log[before..]
            .iter()
            .filter_map(|r| match &r.event {
                SessionEvent::Alert { alert } => Some(alert.clone()),
                _ => None,
            })
            .collect())
    }

    /// Stamps `values` with the current time and ingests them.
    pub fn ingest_values(
        &self,
        session_id: &str,
        values: &BTreeMap<String, f64>,
    ) -> Result<Vec<Alert>, SessionError> {
        let now = self.clock.now();
        let frame = values
            .iter()
            .fold(SignalFrame::new(), |f, (k, v)| f.with(k, *v, now));
        self.ingest_signals(session_id, frame)
    }

    pub fn report_problem(
        &self,
        session_id: &str,
        report: ProblemReport,
    ) -> Result<(), SessionError> {
        self.run(session_id, Command::Problem { report })
            .map(|_| ())
    }

    /// Ends the session. Without a report URL the report also goes to the
    /// outbox directory; with one, the caller delivers it.
    pub fn finish_session(&self, session_id: &str) -> Result<PostMaintenanceReport, SessionError> {
        let (s, _) = self.run(
            session_id,
            Command::Finish {
                team_members: Vec::new(),
            },
        )?;
        let report = PostMaintenanceReport::from_log(&s.log)
            .ok_or_else(|| SessionError::Replay("log has no header".into()))?;
        if self.report_url.is_none() {
            write_outbox(&store::outbox_dir(&self.data_dir), &report)?;
        }
        Ok(report)
    }

    /// Sends a finished session's report to the configured endpoint, or to
    /// the outbox when there is none or the POST fails.
    pub async fn deliver(&self, report: &PostMaintenanceReport) -> Result<Delivery, SessionError> {
        let outbox = store::outbox_dir(&self.data_dir);
        match &self.report_url {
            Some(url) => deliver_report(url, &outbox, report).await,
            None => Ok(Delivery::Outbox(write_outbox(&outbox, report)?)),
        }
    }

    pub fn user_state(&self, session_id: &str) -> Result<UserView, SessionError> {
        let handle = self.session(session_id)?;
        let s = handle.lock().expect("session lock");
        Ok(UserView {
            session_id: s.id.clone(),
            user_id: s.user.id.clone(),
            posterior: s.user_state.posterior,
            level: s.level(),
            tier: s.user_state.current_tier,
            observations: s.user_state.history.len(),
        })
    }

    /// Read-only view of an earlier authoring step; the access is logged
    /// while the session is active.
    pub fn step_back_context(
        &self,
        session_id: &str,
        step: u8,
    ) -> Result<SectionView, SessionError> {
        let handle = self.session(session_id)?;
        let (model_id, active) = {
            let s = handle.lock().expect("session lock");
            (s.model_id.clone(), s.is_active())
        };
        let ctx = self.model(&model_id)?;
        let view = ctx
            .model
            .step_back_context(step)
            .map_err(|e| SessionError::InvalidStep(e.0))?;
        if active {
            self.run(session_id, Command::ViewContext { step })?;
        }
        Ok(view)
    }

    pub fn team_summary(&self, team_id: &str) -> Result<TeamView, SessionError> {
        let feed = self.feed.lock().expect("feed lock");
        feed.team_summary(team_id)
            .map_err(|_| SessionError::UnknownTeam(team_id.to_string()))
    }

    /// Each member's last `k` team events. With `viewer`, the access is
    /// logged in that session.
    pub fn team_detail(
        &self,
        team_id: &str,
        k: Option<usize>,
        viewer: Option<&str>,
    ) -> Result<Vec<crate::context_sa::MemberDetail>, SessionError> {
        let detail = {
            let feed = self.feed.lock().expect("feed lock");
            feed.team_detail(team_id, k.unwrap_or(DEFAULT_DETAIL_EVENTS))
                .map_err(|_| SessionError::UnknownTeam(team_id.to_string()))?
        };
        if let Some(viewer) = viewer {
            let active = self
                .session(viewer)?
                .lock()
                .expect("session lock")
                .is_active();
            if active {
                self.run(
                    viewer,
                    Command::ViewTeamDetail {
                        team_id: team_id.to_string(),
                    },
                )?;
            }
        }
        Ok(detail)
    }

    pub fn session_team(&self, session_id: &str) -> Result<Option<String>, SessionError> {
        Ok(self
            .session(session_id)?
            .lock()
            .expect("session lock")
            .team_id
            .clone())
    }

    pub fn session_log(&self, session_id: &str) -> Result<Vec<LogRecord>, SessionError> {
        Ok(self
            .session(session_id)?
            .lock()
            .expect("session lock")
            .log
            .clone())
    }

    /// The report rebuilt from the log file on disk.
    pub fn report_from_disk(
        &self,
        session_id: &str,
    ) -> Result<PostMaintenanceReport, SessionError> {
        let log = store::read_log(&self.data_dir, session_id)?;
        PostMaintenanceReport::from_log(&log)
            .ok_or_else(|| SessionError::Replay(format!("session '{session_id}' has no header")))
    }

    pub fn simulate(
        &self,
        model_id: &str,
        true_level: Level,
        seed: u64,
        max_steps: usize,
    ) -> Result<Simulation, SessionError> {
        Ok(simulate_user(
            self.model(model_id)?.as_ref(),
            true_level,
            seed,
            max_steps,
        ))
    }
}

fn summary(m: &LoadedModel) -> ModelSummary {
    ModelSummary {
        id: m.id.clone(),
        title: m.model.task_model.name.clone(),
        equipment: m.model.equipment.name.clone(),
        leaves: m.leaf_order.len(),
        states: m.pdfa.state_count(),
        transitions: m.pdfa.transition_count(),
        users: m.model.users.iter().map(|u| u.id.clone()).collect(),
    }
}

/// `leaf` is declared as released by some other work for `team`, and no
/// release has been seen yet.
fn waits_on_other_work(ctx: &LoadedModel, feed: &TeamFeed, team: &str, leaf: &str) -> bool {
    let declared = ctx
        .model
        .dependencies
        .values()
        .flatten()
        .any(|d| d.leaf == leaf && d.team.as_deref().unwrap_or(team) == team);
    declared
        && !feed
            .events()
            .iter()
            .any(|e| e.kind == TeamEventKind::Unblocked && e.team_id == team && e.leaf_id == leaf)
}
