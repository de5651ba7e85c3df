//! Per-session engine. State changes only through [`Command`]s; every
//! command yields the log records it caused, and replaying those commands
//! over a fresh state must yield the same records again.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::automaton::{Action, Pdfa, StateId};
use crate::clock::Timestamp;
use crate::context_sa::{
    evaluate_available, Alert, EvalInput, SaBreakdownTag, SignalFrame, SignalValue, TeamEvent,
    TeamEventKind,
};
use crate::maintenance_model::UserRecord;
use crate::maintenance_model::{ArMaintenanceModel, ContentComponent, SignalHistory};
use crate::user_model::{
    bucket_time, classify, Distribution, InterfaceTier, Level, Observation, TimeBucket,
    UserModelConfig, UserState,
};

/// An imported model with its compiled automaton.
#[derive(Debug)]
pub struct LoadedModel {
    pub id: String,
    pub model: ArMaintenanceModel,
    pub pdfa: Pdfa,
    /// Leaves in document order.
    pub leaf_order: Vec<String>,
    pub descriptions: Arc<BTreeMap<String, String>>,
}

impl LoadedModel {
    pub fn new(id: &str, model: ArMaintenanceModel, pdfa: Pdfa) -> Self {
        LoadedModel {
            id: id.to_string(),
            leaf_order: model
                .task_model
                .leaves()
                .iter()
                .map(|l| l.id.clone())
                .collect(),
            descriptions: Arc::new(model.descriptions()),
            model,
            pdfa,
        }
    }

    fn cfg(&self) -> &UserModelConfig {
        &self.model.user_config
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemCategory {
    IncorrectDocumentation,
    InaccurateTracking,
    PollutedInterface,
    InsufficientResponseTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemReport {
    pub category: ProblemCategory,
    pub leaf_id: String,
    #[serde(default)]
    pub note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<SaBreakdownTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        model_id: String,
        user: UserRecord,
        team_id: Option<String>,
        prior: Distribution,
        tier: InterfaceTier,
    },
    StepShown {
        state: StateId,
        leaves: Vec<String>,
        tier: InterfaceTier,
    },
    Completed {
        leaf: String,
        /// Client-measured seconds.
        duration: u32,
        bucket: TimeBucket,
        help: bool,
        surprisal: f64,
        posterior: Distribution,
    },
    HelpRequested {
        leaf: String,
        tier: InterfaceTier,
    },
    Skipped {
        target: String,
        surprisal: f64,
    },
    LoopExited {
        target: String,
        surprisal: f64,
    },
    Alert {
        alert: Alert,
    },
    TierChanged {
        from: InterfaceTier,
        to: InterfaceTier,
        posterior: Distribution,
    },
    ProblemReported {
        report: ProblemReport,
    },
    SignalFrame {
        frame: SignalFrame,
    },
    TeamNote {
        event: TeamEvent,
    },
    ContextViewed {
        step: u8,
    },
    TeamDetailViewed {
        team_id: String,
    },
    /// An out-of-order action was refused; nothing else changed.
    ChecklistWarning {
        attempted: Action,
        enabled: Vec<Action>,
    },
    Finished {
        team_members: Vec<String>,
    },
}

impl SessionEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionEvent::Created { .. } => "created",
            SessionEvent::StepShown { .. } => "step_shown",
            SessionEvent::Completed { .. } => "completed",
            SessionEvent::HelpRequested { .. } => "help_requested",
            SessionEvent::Skipped { .. } => "skipped",
            SessionEvent::LoopExited { .. } => "loop_exited",
            SessionEvent::Alert { .. } => "alert",
            SessionEvent::TierChanged { .. } => "tier_changed",
            SessionEvent::ProblemReported { .. } => "problem_reported",
            SessionEvent::SignalFrame { .. } => "signal_frame",
            SessionEvent::TeamNote { .. } => "team_note",
            SessionEvent::ContextViewed { .. } => "context_viewed",
            SessionEvent::TeamDetailViewed { .. } => "team_detail_viewed",
            SessionEvent::ChecklistWarning { .. } => "checklist_warning",
            SessionEvent::Finished { .. } => "finished",
        }
    }

    /// Team notes that depend on other sessions and so are not re-derived
    /// on replay.
    pub(crate) fn is_external(&self) -> bool {
        matches!(self, SessionEvent::TeamNote { event } if event.kind == TeamEventKind::Blocked)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub at: Timestamp,
    pub event: SessionEvent,
}

/// A state-changing request against a session.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Complete { leaf: String, duration: u32 },
    Skip { target: String },
    ExitLoop { target: String },
    Help { leaf: String },
    Signals { frame: SignalFrame },
    Problem { report: ProblemReport },
    ViewContext { step: u8 },
    ViewTeamDetail { team_id: String },
    Finish { team_members: Vec<String> },
}

impl Command {
    /// The command a logged event was produced by, if it was one.
    pub fn from_event(e: &SessionEvent) -> Option<Command> {
        Some(match e {
            SessionEvent::Completed { leaf, duration, .. } => Command::Complete {
                leaf: leaf.clone(),
                duration: *duration,
            },
            SessionEvent::Skipped { target, .. } => Command::Skip {
                target: target.clone(),
            },
            SessionEvent::LoopExited { target, .. } => Command::ExitLoop {
                target: target.clone(),
            },
            SessionEvent::HelpRequested { leaf, .. } => Command::Help { leaf: leaf.clone() },
            SessionEvent::SignalFrame { frame } => Command::Signals {
                frame: frame.clone(),
            },
            SessionEvent::ProblemReported { report } => Command::Problem {
                report: report.clone(),
            },
            SessionEvent::ContextViewed { step } => Command::ViewContext { step: *step },
            SessionEvent::TeamDetailViewed { team_id } => Command::ViewTeamDetail {
                team_id: team_id.clone(),
            },
            SessionEvent::Finished { team_members } => Command::Finish {
                team_members: team_members.clone(),
            },
            _ => return None,
        })
    }

    pub(crate) fn action(&self) -> Option<Action> {
        match self {
            Command::Complete { leaf, .. } => Some(Action::Complete(leaf.clone())),
            Command::Skip { target } => Some(Action::Skip(target.clone())),
            Command::ExitLoop { target } => Some(Action::ExitLoop(target.clone())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub model_id: String,
    pub user: UserRecord,
    pub team_id: Option<String>,
    pub state: StateId,
    pub user_state: UserState,
    pub step_started_at: Timestamp,
    pub status: SessionStatus,
    pub log: Vec<LogRecord>,
    frame: SignalFrame,
    history: SignalHistory,
    active_alerts: BTreeMap<String, Alert>,
    last_surprisal: f64,
    pending_help: BTreeSet<String>,
    completions: BTreeMap<String, u32>,
    open: BTreeSet<String>,
}

impl Session {
    /// A fresh session for a user listed in the model.
    pub fn create(
        ctx: &LoadedModel,
        id: &str,
        user_id: &str,
        team_id: Option<String>,
        now: Timestamp,
    ) -> Result<(Session, Vec<SessionEvent>), SessionError> {
        let user = ctx
            .model
            .user(user_id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownUser(user_id.to_string()))?;
        Ok(Session::create_for(ctx, id, user, team_id, now))
    }

    /// A fresh session and the records its creation produces.
    pub fn create_for(
        ctx: &LoadedModel,
        id: &str,
        user: UserRecord,
        team_id: Option<String>,
        now: Timestamp,
    ) -> (Session, Vec<SessionEvent>) {
        let prior = match user.initial_level {
            Some(level) => UserModelConfig::biased_prior(level),
            None => ctx.cfg().prior,
        };
        let user_state = UserState::new(prior);
        let mut s = Session {
            id: id.to_string(),
            model_id: ctx.id.clone(),
            user: user.clone(),
            team_id: team_id.clone(),
            state: ctx.pdfa.initial(),
            step_started_at: now,
            status: SessionStatus::Active,
            log: Vec::new(),
            frame: SignalFrame::new(),
            history: SignalHistory::for_signals(&ctx.model.derived),
            active_alerts: BTreeMap::new(),
            last_surprisal: 0.0,
            pending_help: BTreeSet::new(),
            completions: BTreeMap::new(),
            open: BTreeSet::new(),
            user_state,
        };
        let mut events = vec![SessionEvent::Created {
            session_id: id.to_string(),
            model_id: ctx.id.clone(),
            user,
            team_id,
            prior,
            tier: s.user_state.current_tier,
        }];
        s.show_step(ctx, now, &mut events);
        (s, events)
    }

    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    pub fn level(&self) -> Level {
        self.user_state.level()
    }

    pub fn active_alerts(&self) -> impl Iterator<Item = &Alert> {
        self.active_alerts.values()
    }

    pub fn completions(&self, leaf: &str) -> u32 {
        self.completions.get(leaf).copied().unwrap_or(0)
    }

    pub fn help_pending(&self, leaf: &str) -> bool {
        self.pending_help.contains(leaf)
    }

    pub fn frame(&self) -> &SignalFrame {
        &self.frame
    }

    pub fn last_surprisal(&self) -> f64 {
        self.last_surprisal
    }

    /// Leaves whose `Complete` is enabled now, in document order.
    pub fn enabled_leaves(&self, ctx: &LoadedModel) -> Vec<String> {
        let enabled: BTreeSet<String> = ctx
            .pdfa
            .enabled(self.state)
            .unwrap_or_default()
            .into_iter()
            .filter_map(|(a, _)| match a {
                Action::Complete(l) => Some(l),
                _ => None,
            })
            .collect();
        ctx.leaf_order
            .iter()
            .filter(|l| enabled.contains(*l))
            .cloned()
            .collect()
    }

    pub(crate) fn append(&mut self, at: Timestamp, events: Vec<SessionEvent>) -> Vec<LogRecord> {
        let start = self.log.len() as u64;
        let records: Vec<LogRecord> = events
            .into_iter()
            .enumerate()
            .map(|(i, event)| LogRecord {
                seq: start + i as u64,
                at,
                event,
            })
            .collect();
        self.log.extend(records.iter().cloned());
        records
    }

    /// Applies `cmd`. On error the session is unchanged.
    pub fn apply(
        &mut self,
        ctx: &LoadedModel,
        cmd: &Command,
        now: Timestamp,
    ) -> Result<Vec<SessionEvent>, SessionError> {
        let passive = matches!(
            cmd,
            Command::ViewContext { .. } | Command::ViewTeamDetail { .. }
        );
        if !self.is_active() && !passive {
            return Err(SessionError::SessionFinished(self.id.clone()));
        }
        let mut events = Vec::new();
        match cmd {
            Command::Complete { leaf, duration } => {
                let action = Action::Complete(leaf.clone());
                self.check_enabled(ctx, &action)?;
                let nominal = ctx
                    .model
                    .task_model
                    .leaf(leaf)
                    .map(|l| l.nominal_duration)
                    .unwrap_or(1);
                let help = self.pending_help.contains(leaf);
                let bucket = bucket_time(*duration as f64, nominal as f64, ctx.cfg());
                let mut user_state = self.user_state.clone();
                let switch = user_state.update(
                    Observation {
                        leaf_id: leaf.clone(),
                        help_requested: help,
                        time_bucket: bucket,
                    },
                    ctx.cfg(),
                )?;
                let surprisal = self.take(ctx, &action);
                self.user_state = user_state;
                self.pending_help.remove(leaf);
                *self.completions.entry(leaf.clone()).or_insert(0) += 1;
                self.open.remove(leaf);
                events.push(SessionEvent::Completed {
                    leaf: leaf.clone(),
                    duration: *duration,
                    bucket,
                    help,
                    surprisal,
                    posterior: self.user_state.posterior,
                });
                if let Some(sw) = switch {
                    events.push(SessionEvent::TierChanged {
                        from: sw.from,
                        to: sw.to,
                        posterior: self.user_state.posterior,
                    });
                }
                if let Some(done) = self.team_event(leaf, TeamEventKind::Completed, now) {
                    let released =
                        crate::context_sa::notify_unblocked(&done, &ctx.model.dependencies);
                    events.push(SessionEvent::TeamNote { event: done });
                    events.extend(
                        released
                            .into_iter()
                            .map(|event| SessionEvent::TeamNote { event }),
                    );
                }
                self.show_step(ctx, now, &mut events);
            }
            Command::Skip { target } | Command::ExitLoop { target } => {
                let action = cmd.action().expect("transition command");
                self.check_enabled(ctx, &action)?;
                let surprisal = self.take(ctx, &action);
                events.push(match cmd {
                    Command::Skip { .. } => SessionEvent::Skipped {
                        target: target.clone(),
                        surprisal,
                    },
                    _ => SessionEvent::LoopExited {
                        target: target.clone(),
                        surprisal,
                    },
                });
                self.show_step(ctx, now, &mut events);
            }
            Command::Help { leaf } => {
                self.check_enabled(ctx, &Action::Complete(leaf.clone()))?;
                let tier = self.user_state.current_tier.more_supportive();
                self.pending_help.insert(leaf.clone());
                events.push(SessionEvent::HelpRequested {
                    leaf: leaf.clone(),
                    tier,
                });
                if let Some(e) = self.team_event(leaf, TeamEventKind::HelpRequested, now) {
                    events.push(SessionEvent::TeamNote { event: e });
                }
            }
            Command::Signals { frame } => {
                for name in frame.0.keys() {
                    if !ctx.model.is_source_signal(name) {
                        return Err(SessionError::UnknownSignal(name.clone()));
                    }
                }
                let mut merged = self.frame.clone();
                merged.merge(frame)?;
                self.frame = merged;
                for (name, v) in &frame.0 {
                    self.history.push(name, v.value);
                }
                events.push(SessionEvent::SignalFrame {
                    frame: frame.clone(),
                });
                let elapsed = now.seconds_since(self.step_started_at);
                self.evaluate(ctx, now, elapsed, &mut events);
            }
            Command::Problem { report } => {
                if ctx.model.task_model.leaf(&report.leaf_id).is_none() {
                    return Err(SessionError::UnknownLeaf(report.leaf_id.clone()));
                }
                events.push(SessionEvent::ProblemReported {
                    report: report.clone(),
                });
            }
            Command::ViewContext { step } => {
                ctx.model
                    .step_back_context(*step)
                    .map_err(|e| SessionError::InvalidStep(e.0))?;
                events.push(SessionEvent::ContextViewed { step: *step });
            }
            Command::ViewTeamDetail { team_id } => {
                events.push(SessionEvent::TeamDetailViewed {
                    team_id: team_id.clone(),
                });
            }
            Command::Finish { team_members } => {
                if !ctx.pdfa.is_accepting(self.state).unwrap_or(false) {
                    return Err(SessionError::ProcedureIncomplete(self.id.clone()));
                }
                self.status = SessionStatus::Finished;
                events.push(SessionEvent::Finished {
                    team_members: team_members.clone(),
                });
            }
        }
        Ok(events)
    }

    /// Starts the procedure over, keeping what was learned about the user.
    /// Used by the simulator; live sessions end at acceptance.
    pub(crate) fn restart(&mut self, ctx: &LoadedModel, now: Timestamp) -> Vec<SessionEvent> {
        self.state = ctx.pdfa.initial();
        self.open.clear();
        self.pending_help.clear();
        let mut events = Vec::new();
        self.show_step(ctx, now, &mut events);
        events
    }

    fn check_enabled(&self, ctx: &LoadedModel, action: &Action) -> Result<(), SessionError> {
        if ctx.pdfa.is_enabled(self.state, action).unwrap_or(false) {
            Ok(())
        } else {
            Err(SessionError::IllegalAction {
                action: action.clone(),
                enabled: self.enabled_actions(ctx),
            })
        }
    }

    pub fn enabled_actions(&self, ctx: &LoadedModel) -> Vec<Action> {
        ctx.pdfa
            .enabled(self.state)
            .unwrap_or_default()
            .into_iter()
            .map(|(a, _)| a)
            .collect()
    }

    /// Steps the automaton; returns the transition's surprisal.
    fn take(&mut self, ctx: &LoadedModel, action: &Action) -> f64 {
        let surprisal = ctx
            .pdfa
            .surprisal(self.state, action)
            .expect("checked enabled");
        self.state = ctx.pdfa.step(self.state, action).expect("checked enabled");
        self.last_surprisal = surprisal;
        surprisal
    }

    fn team_event(&self, leaf: &str, kind: TeamEventKind, now: Timestamp) -> Option<TeamEvent> {
        self.team_id.as_ref().map(|team| TeamEvent {
            team_id: team.clone(),
            member_id: self.user.id.clone(),
            session_id: self.id.clone(),
            leaf_id: leaf.to_string(),
            kind,
            timestamp: now,
            cause: None,
            tag: None,
        })
    }

    fn show_step(&mut self, ctx: &LoadedModel, now: Timestamp, events: &mut Vec<SessionEvent>) {
        self.step_started_at = now;
        let leaves = self.enabled_leaves(ctx);
        events.push(SessionEvent::StepShown {
            state: self.state,
            leaves: leaves.clone(),
            tier: self.user_state.current_tier,
        });
        for leaf in leaves {
            if self.open.insert(leaf.clone()) {
                if let Some(e) = self.team_event(&leaf, TeamEventKind::Started, now) {
                    events.push(SessionEvent::TeamNote { event: e });
                }
            }
        }
        self.evaluate(ctx, now, 0.0, events);
    }

    /// Re-evaluates context rules; alerts fire when a rule starts to hold.
    fn evaluate(
        &mut self,
        ctx: &LoadedModel,
        now: Timestamp,
        elapsed: f64,
        events: &mut Vec<SessionEvent>,
    ) {
        let mut frame = self.frame.clone();
        for d in &ctx.model.derived {
            if let Some(value) = self.history.compute(d) {
                frame
                    .0
                    .insert(d.name.clone(), SignalValue { value, at: now });
            }
        }
        let leaves = self.enabled_leaves(ctx);
        let candidates: Vec<Option<&str>> = if leaves.is_empty() {
            vec![None]
        } else {
            leaves.iter().map(|l| Some(l.as_str())).collect()
        };
        let mut holding: BTreeMap<String, Alert> = BTreeMap::new();
        for leaf in candidates {
            let input = EvalInput {
                current_leaf: leaf,
                frame: &frame,
                elapsed,
                surprisal: self.last_surprisal,
                now,
            };
            let (alerts, _waiting) = evaluate_available(&ctx.model.contexts, &input);
            for a in alerts {
                holding.entry(a.rule_id.clone()).or_insert(a);
            }
        }
        self.active_alerts.retain(|id, _| holding.contains_key(id));
        for (id, alert) in holding {
            if let Entry::Vacant(slot) = self.active_alerts.entry(id) {
                events.push(SessionEvent::Alert {
                    alert: alert.clone(),
                });
                slot.insert(alert);
            }
        }
    }

    /// Rebuilds a session from its log, re-deriving every record and
    /// checking it against what was written.
    pub fn replay(ctx: &LoadedModel, log: &[LogRecord]) -> Result<Session, SessionError> {
        let first = log
            .first()
            .ok_or_else(|| SessionError::Replay("empty log".into()))?;
        let SessionEvent::Created {
            session_id,
            model_id,
            user,
            team_id,
            ..
        } = &first.event
        else {
            return Err(diverged(
                0,
                "log does not start with a creation record".into(),
            ));
        };
        if model_id != &ctx.id {
            return Err(diverged(0, format!("log belongs to model '{model_id}'")));
        }
        let (mut s, events) =
            Session::create_for(ctx, session_id, user.clone(), team_id.clone(), first.at);
        let mut i = 0;
        expect_batch(log, &mut i, events)?;
        while i < log.len() {
            let rec = &log[i];
            match &rec.event {
                SessionEvent::ChecklistWarning { attempted, .. } => {
                    if ctx.pdfa.is_enabled(s.state, attempted).unwrap_or(false) {
                        return Err(diverged(rec.seq, format!("{attempted} was enabled")));
                    }
                    i += 1;
                }
                event => {
                    let cmd = Command::from_event(event).ok_or_else(|| {
                        diverged(rec.seq, format!("unexpected {} record", event.kind()))
                    })?;
                    let events = s
                        .apply(ctx, &cmd, rec.at)
                        .map_err(|e| diverged(rec.seq, e.to_string()))?;
                    expect_batch(log, &mut i, events)?;
                }
            }
        }
        s.log = log.to_vec();
        Ok(s)
    }
}

fn diverged(seq: u64, why: String) -> SessionError {
    SessionError::Replay(format!("record {seq}: {why}"))
}

/// Matches `events` against the log from `*i` on, stepping over external
/// team notes.
fn expect_batch(
    log: &[LogRecord],
    i: &mut usize,
    events: Vec<SessionEvent>,
) -> Result<(), SessionError> {
    let skip_external = |i: &mut usize| {
        while log.get(*i).is_some_and(|r| r.event.is_external()) {
            *i += 1;
        }
    };
    let batch_at = log.get(*i).map(|r| r.at);
    for expected in events {
        skip_external(i);
        let Some(rec) = log.get(*i) else {
            return Err(diverged(*i as u64, "log ends early".into()));
        };
        if rec.event != expected || Some(rec.at) != batch_at {
            return Err(diverged(
                rec.seq,
                format!("expected {expected:?}, found {:?}", rec.event),
            ));
        }
        *i += 1;
    }
    skip_external(i);
    Ok(())
}

/// What a step view shows in the content area.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StepBody {
    /// One leaf to do; its content at the user's tier.
    Single(StepContent),
    /// Several actions enabled; the user picks.
    Selection { options: Vec<SelectionItem> },
    /// Procedure complete, ready to finish.
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepContent {
    pub leaf: String,
    pub description: String,
    pub requested: InterfaceTier,
    pub served: InterfaceTier,
    /// Served one tier more supportive after a help request.
    pub escalated: bool,
    pub components: Vec<ContentComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionItem {
    pub action: Action,
    pub label: String,
    pub description: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnabledAction {
    pub action: Action,
    pub label: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecklistStatus {
    Done,
    Current,
    Pending,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChecklistItem {
    pub leaf: String,
    pub description: String,
    pub status: ChecklistStatus,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeamBrief {
    pub status_line: String,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepView {
    pub session_id: String,
    pub status: SessionStatus,
    pub state: StateId,
    pub tier: InterfaceTier,
    pub level: Level,
    pub actions: Vec<EnabledAction>,
    pub body: StepBody,
    pub alerts: Vec<Alert>,
    pub checklist: Vec<ChecklistItem>,
    pub team: Option<TeamBrief>,
}

impl Session {
    /// Content for `leaf` at the tier the session would serve it now.
    pub fn content_for(&self, ctx: &LoadedModel, leaf: &str) -> Option<StepContent> {
        let escalated = self.pending_help.contains(leaf);
        let tier = if escalated {
            self.user_state.current_tier.more_supportive()
        } else {
            self.user_state.current_tier
        };
        let resolved = ctx.model.resolve_step_content(leaf, tier).ok()?;
        Some(StepContent {
            leaf: leaf.to_string(),
            description: ctx.descriptions.get(leaf).cloned().unwrap_or_default(),
            requested: resolved.requested,
            served: resolved.served,
            escalated,
            components: resolved.components,
        })
    }

    pub fn view(&self, ctx: &LoadedModel, team: Option<TeamBrief>) -> StepView {
        let enabled = ctx.pdfa.enabled(self.state).unwrap_or_default();
        let label = |a: &Action| match a {
            Action::Complete(l) => ctx.descriptions.get(l).cloned().unwrap_or_default(),
            Action::Skip(t) => format!("Skip {t}"),
            Action::ExitLoop(t) => format!("Finish repeating {t}"),
            Action::RequestHelp => "Help".into(),
        };
        let actions: Vec<EnabledAction> = enabled
            .iter()
            .filter(|(a, _)| *a != Action::RequestHelp)
            .map(|(a, p)| EnabledAction {
                action: a.clone(),
                label: a.to_string(),
                probability: *p,
            })
            .collect();
        let body = match actions.as_slice() {
            [] => StepBody::Done,
            [single] => match &single.action {
                Action::Complete(leaf) => match self.content_for(ctx, leaf) {
                    Some(c) => StepBody::Single(c),
                    None => StepBody::Done,
                },
                _ => StepBody::Selection {
                    options: vec![SelectionItem {
                        action: single.action.clone(),
                        label: single.label.clone(),
                        description: label(&single.action),
                        probability: single.probability,
                    }],
                },
            },
            many => StepBody::Selection {
                options: many
                    .iter()
                    .map(|a| SelectionItem {
                        action: a.action.clone(),
                        label: a.label.clone(),
                        description: label(&a.action),
                        probability: a.probability,
                    })
                    .collect(),
            },
        };
        let current: BTreeSet<String> = self.enabled_leaves(ctx).into_iter().collect();
        let reachable = ctx.pdfa.reachable_leaves(self.state).unwrap_or_default();
        let checklist = ctx
            .leaf_order
            .iter()
            .map(|leaf| {
                let done = self.completions(leaf) > 0;
                let status = if self.is_active() && current.contains(leaf) {
                    ChecklistStatus::Current
                } else if done {
                    ChecklistStatus::Done
                } else if self.is_active() && reachable.contains(leaf) {
                    ChecklistStatus::Pending
                } else {
                    ChecklistStatus::NotApplicable
                };
                ChecklistItem {
                    leaf: leaf.clone(),
                    description: ctx.descriptions.get(leaf).cloned().unwrap_or_default(),
                    status,
                    done,
                }
            })
            .collect();
        StepView {
            session_id: self.id.clone(),
            status: self.status,
            state: self.state,
            tier: self.user_state.current_tier,
            level: self.level(),
            actions,
            body: if self.is_active() {
                body
            } else {
                StepBody::Done
            },
            alerts: self.active_alerts.values().cloned().collect(),
            checklist,
            team,
        }
    }
}

/// The final level after the last observation in a log.
pub(crate) fn final_posterior(log: &[LogRecord]) -> Option<Distribution> {
    log.iter().rev().find_map(|r| match &r.event {
        SessionEvent::Completed { posterior, .. } => Some(*posterior),
        SessionEvent::Created { prior, .. } => Some(*prior),
        _ => None,
    })
}

pub(crate) fn final_level(log: &[LogRecord]) -> Level {
    final_posterior(log)
        .map(|p| classify(&p))
        .unwrap_or(Level::None)
}
