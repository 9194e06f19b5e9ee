//! Sessions, per-(session, level) queues and the operations behind the API.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicI64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use loopinv_core::engine::{
    Characterization, Engine, EngineConfig, EngineEvent, Feedback, InvariantState, ProposeError,
    StatePair, WhyNotError,
};
use loopinv_core::interp::{exec_trace_partial, Choices, ExecConfig, ExecError, Trace};
use loopinv_core::lang::{parse_expr, Expr};
use loopinv_core::level::{parse_inputs, Level};
use loopinv_core::solver::{goal_key, Checker, Solver, SolverError, SolverVerdict};
use loopinv_core::vcgen::Goal;
use serde::Serialize;
use thiserror::Error;

use crate::config::ServiceConfig;
use crate::score::level_score;
use crate::store::{EventLog, Record, RecordedQuery};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("no session `{0}`")]
    UnknownSession(String),
    #[error("no level `{0}`")]
    UnknownLevel(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Propose(#[from] ProposeError),
    #[error("too many requests are waiting on this level; retry later")]
    Busy,
    #[error("{0}")]
    BadInputs(String),
    #[error("{0}")]
    NotRunnable(String),
    #[error(transparent)]
    WhyNot(#[from] WhyNotError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl AppError {
    pub fn status(&self) -> u16 {
        match self {
            AppError::UnknownSession(_) | AppError::UnknownLevel(_) => 404,
            AppError::Parse(_) | AppError::BadInputs(_) => 400,
            AppError::Propose(ProposeError::Trivial(_)) => 400,
            AppError::Propose(ProposeError::Duplicate(_)) => 409,
            AppError::Busy => 429,
            AppError::NotRunnable(_) => 422,
            AppError::WhyNot(WhyNotError::NotPotential(_)) => 404,
            AppError::WhyNot(WhyNotError::Promotable(_)) => 409,
            AppError::WhyNot(WhyNotError::Unknown { .. }) => 503,
            AppError::Internal(_) => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HistoryEntry {
    pub expr: String,
    pub kind: Characterization,
    pub at: u64,
    pub seeded: bool,
}

/// What one session knows about one level.
#[derive(Debug, Clone, Default)]
pub struct Slot {
    pub state: InvariantState,
    pub history: Vec<HistoryEntry>,
    /// Potential invariants that were promoted at some point.
    pub promoted: HashSet<String>,
    pub solved: bool,
    initialized: bool,
}

impl Slot {
    pub fn score(&self) -> i64 {
        let scored = self
            .history
            .iter()
            .filter(|h| !h.seeded)
            .map(|h| (h.expr.as_str(), h.kind));
        level_score(scored, &self.promoted, self.solved)
    }
}

struct SlotCell {
    waiting: AtomicUsize,
    slot: Arc<tokio::sync::Mutex<Slot>>,
}

impl SlotCell {
    fn new(slot: Slot) -> Arc<SlotCell> {
        Arc::new(SlotCell {
            waiting: AtomicUsize::new(0),
            slot: Arc::new(tokio::sync::Mutex::new(slot)),
        })
    }
}

struct Session {
    score: AtomicI64,
    slots: Mutex<HashMap<String, Arc<SlotCell>>>,
}

impl Session {
    fn new(score: i64) -> Arc<Session> {
        Arc::new(Session {
            score: AtomicI64::new(score),
            slots: Mutex::new(HashMap::new()),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelView {
    pub session_id: String,
    pub level_id: String,
    pub inductive: Vec<Expr>,
    pub potential: Vec<Expr>,
    pub solved: bool,
    pub score: i64,
    pub level_score: i64,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProposeView {
    pub kind: Characterization,
    pub feedback: Feedback,
    pub inductive: Vec<Expr>,
    pub potential: Vec<Expr>,
    pub solved: bool,
    pub score: i64,
    pub score_delta: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceView {
    pub trace: Trace,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Answers from a recorded session first, then from the live solver.
struct Recorded<'a> {
    verdicts: HashMap<String, SolverVerdict>,
    live: &'a Solver,
}

impl Checker for Recorded<'_> {
    fn check(&self, goal: &Goal) -> Result<SolverVerdict, SolverError> {
        match self.verdicts.get(&goal_key(goal)) {
            Some(v) => Ok(v.clone()),
            None => self.live.check(goal),
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn log_events(session: &str, level: &str, events: &[EngineEvent]) -> Vec<RecordedQuery> {
    let mut queries = Vec::new();
    for ev in events {
        match ev {
            EngineEvent::Query {
                purpose,
                key,
                verdict,
            } => {
                tracing::info!(
                    target: "verdict",
                    session,
                    level,
                    purpose = ?purpose,
                    key = %key,
                    verdict = loopinv_core::solver::verdict_tag(verdict),
                );
                queries.push(RecordedQuery {
                    key: key.clone(),
                    verdict: verdict.clone(),
                });
            }
            EngineEvent::Characterized { expr, kind } => {
                tracing::info!(target: "verdict", session, level, expr = %expr, kind = ?kind);
            }
        }
    }
    queries
}

pub struct App {
    cfg: ServiceConfig,
    engine_cfg: EngineConfig,
    levels: BTreeMap<String, Arc<Level>>,
    solver: Solver,
    log: EventLog,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
}

impl App {
    /// Builds the service state and replays `records` into it, answering
    /// solver queries from the recorded verdicts where possible.
    pub fn new(
        cfg: ServiceConfig,
        levels: Vec<Level>,
        log: EventLog,
        records: Vec<Record>,
    ) -> Result<Arc<App>, AppError> {
        let solver =
            Solver::new(cfg.solver_config()).map_err(|e| AppError::Internal(e.to_string()))?;
        let engine_cfg = EngineConfig {
            exec: ExecConfig {
                max_iterations: cfg.max_iterations,
                ..ExecConfig::default()
            },
            ..EngineConfig::default()
        };
        let app = App {
            cfg,
            engine_cfg,
            levels: levels
                .into_iter()
                .map(|l| (l.id.clone(), Arc::new(l)))
                .collect(),
            solver,
            log,
            sessions: Mutex::new(HashMap::new()),
        };
        app.replay(records);
        Ok(Arc::new(app))
    }

    fn replay(&self, records: Vec<Record>) {
        let mut slots: BTreeMap<(String, String), Slot> = BTreeMap::new();
        let mut sessions: Vec<String> = Vec::new();
        for record in records {
            match record {
                Record::Session { session, .. } => sessions.push(session),
                Record::Proposal {
                    session,
                    level,
                    expr,
                    kind,
                    seeded,
                    at,
                    queries,
                } => {
                    let Some(lvl) = self.levels.get(&level) else {
                        tracing::warn!(session, level, "replay skips unknown level");
                        continue;
                    };
                    if !sessions.contains(&session) {
                        sessions.push(session.clone());
                    }
                    let slot = slots.entry((session.clone(), level.clone())).or_default();
                    slot.initialized = true;
                    for q in &queries {
                        self.solver.seed_cache(q.key.clone(), q.verdict.clone());
                    }
                    let checker = Recorded {
                        verdicts: queries.into_iter().map(|q| (q.key, q.verdict)).collect(),
                        live: &self.solver,
                    };
                    let e = match parse_expr(&expr, &lvl.program.env) {
                        Ok(e) => e,
                        Err(err) => {
                            tracing::warn!(session, level, expr, error = %err, "replay skips bad record");
                            continue;
                        }
                    };
                    match self.apply(lvl, slot, &e, &checker, seeded, at) {
                        Ok((fb, _)) if fb.kind != kind => tracing::warn!(
                            session, level, expr, recorded = ?kind, replayed = ?fb.kind,
                            "replay diverged from the recorded characterization"
                        ),
                        Ok(_) => {}
                        Err(err) => {
                            tracing::warn!(session, level, expr, error = %err, "replay rejected record")
                        }
                    }
                }
            }
        }
        let mut table = self.sessions.lock().expect("sessions lock");
        for sid in sessions {
            table.entry(sid).or_insert_with(|| Session::new(0));
        }
        for ((sid, lid), mut slot) in slots {
            if !slot.solved {
                slot.solved = self.exit_check(&self.levels[&lid], &slot.state);
            }
            let session = &table[&sid];
            session.score.fetch_add(slot.score(), Ordering::SeqCst);
            session
                .slots
                .lock()
                .expect("slots lock")
                .insert(lid, SlotCell::new(slot));
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn levels(&self) -> impl Iterator<Item = &Level> {
        self.levels.values().map(|l| l.as_ref())
    }

    pub fn level(&self, id: &str) -> Result<Arc<Level>, AppError> {
        self.levels
            .get(id)
            .cloned()
            .ok_or_else(|| AppError::UnknownLevel(id.to_string()))
    }

    pub fn create_session(&self) -> Result<String, AppError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.log
            .append(&Record::Session {
                session: id.clone(),
                at: now_ms(),
            })
            .map_err(|e| AppError::Internal(e.to_string()))?;
        self.sessions
            .lock()
            .expect("sessions lock")
            .insert(id.clone(), Session::new(0));
        tracing::info!(session = %id, "session created");
        Ok(id)
    }

    fn session(&self, sid: &str) -> Result<Arc<Session>, AppError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(sid)
            .cloned()
            .ok_or_else(|| AppError::UnknownSession(sid.to_string()))
    }

    fn engine<'a>(&'a self, level: &'a Level, checker: &'a dyn Checker) -> Engine<'a> {
        Engine::new(
            &level.program,
            checker,
            level.engine_config(&self.engine_cfg),
        )
    }

    fn exit_check(&self, level: &Level, state: &InvariantState) -> bool {
        self.engine(level, &self.solver).check_solved(state).solved
    }

    /// Runs one proposal against `slot` and records it in the history.
    fn apply(
        &self,
        level: &Level,
        slot: &mut Slot,
        e: &Expr,
        checker: &dyn Checker,
        seeded: bool,
        at: u64,
    ) -> Result<(Feedback, Vec<EngineEvent>), ProposeError> {
        let mut eng = self.engine(level, checker);
        let fb = eng.propose_and_report(&mut slot.state, e)?;
        slot.promoted
            .extend(fb.promoted_invariants.iter().map(|p| p.to_string()));
        slot.solved |= fb.solved;
        slot.history.push(HistoryEntry {
            expr: e.to_string(),
            kind: fb.kind,
            at,
            seeded,
        });
        Ok((fb, eng.take_events()))
    }

    /// Appends a proposal, with every query it made, to the event log.
    fn record(
        &self,
        sid: &str,
        level: &Level,
        entry: &HistoryEntry,
        events: &[EngineEvent],
    ) -> Result<(), AppError> {
        let queries = log_events(sid, &level.id, events);
        self.log
            .append(&Record::Proposal {
                session: sid.to_string(),
                level: level.id.clone(),
                expr: entry.expr.clone(),
                kind: entry.kind,
                seeded: entry.seeded,
                at: entry.at,
                queries,
            })
            .map_err(|e| AppError::Internal(e.to_string()))
    }

    /// First access to a level: seed the loop annotation and check whether
    /// the guarantee already follows.
    fn initialize(&self, sid: &str, level: &Level, slot: &mut Slot) -> Result<(), AppError> {
        slot.initialized = true;
        if let Some(a) = level.program.annotation.clone() {
            let at = now_ms();
            if let Ok((_, events)) = self.apply(level, slot, &a, &self.solver, true, at) {
                self.record(sid, level, slot.history.last().expect("entry"), &events)?;
            }
        }
        if !slot.solved {
            slot.solved = self.exit_check(level, &slot.state);
        }
        Ok(())
    }

    /// Runs `f` on the (session, level) slot after every earlier request on
    /// it has finished. Engine work happens on the blocking pool.
    async fn with_slot<R: Send + 'static>(
        self: &Arc<Self>,
        sid: &str,
        lid: &str,
        f: impl FnOnce(&App, &Level, &mut Slot) -> Result<R, AppError> + Send + 'static,
    ) -> Result<(R, i64), AppError> {
        let session = self.session(sid)?;
        let level = self.level(lid)?;
        let cell = session
            .slots
            .lock()
            .expect("slots lock")
            .entry(lid.to_string())
            .or_insert_with(|| SlotCell::new(Slot::default()))
            .clone();
        struct Waiting<'a>(&'a AtomicUsize);
        impl Drop for Waiting<'_> {
            fn drop(&mut self) {
                self.0.fetch_sub(1, Ordering::SeqCst);
            }
        }
        let waiting = Waiting(&cell.waiting);
        if cell.waiting.fetch_add(1, Ordering::SeqCst) >= self.cfg.queue_limit {
            return Err(AppError::Busy);
        }
        let mut guard = cell.slot.clone().lock_owned().await;
        let app = self.clone();
        let sid = sid.to_string();
        let result = tokio::task::spawn_blocking(move || {
            let slot: &mut Slot = &mut guard;
            let before = slot.score();
            if !slot.initialized {
                app.initialize(&sid, &level, slot)?;
            }
            let out = f(&app, &level, slot);
            let delta = slot.score() - before;
            session.score.fetch_add(delta, Ordering::SeqCst);
            out.map(|r| (r, session.score.load(Ordering::SeqCst)))
        })
        .await
        .map_err(|e| AppError::Internal(e.to_string()))?;
        drop(waiting);
        result
    }

    fn view(sid: &str, level: &Level, slot: &Slot, score: i64) -> LevelView {
        LevelView {
            session_id: sid.to_string(),
            level_id: level.id.clone(),
            inductive: slot.state.inductive.clone(),
            potential: slot.state.potential.clone(),
            solved: slot.solved,
            score,
            level_score: slot.score(),
            history: slot.history.clone(),
        }
    }

    fn parse(&self, lid: &str, text: &str) -> Result<Expr, AppError> {
        let level = self.level(lid)?;
        parse_expr(text, &level.program.env).map_err(|e| AppError::Parse(e.to_string()))
    }

    pub async fn level_state(
        self: &Arc<Self>,
        sid: &str,
        lid: &str,
    ) -> Result<LevelView, AppError> {
        let sid_owned = sid.to_string();
        let (mut view, score) = self
            .with_slot(sid, lid, move |_, level, slot| {
                Ok(App::view(&sid_owned, level, slot, 0))
            })
            .await?;
        view.score = score;
        Ok(view)
    }

    pub async fn propose(
        self: &Arc<Self>,
        sid: &str,
        lid: &str,
        text: &str,
    ) -> Result<ProposeView, AppError> {
        self.session(sid)?;
        let e = self.parse(lid, text)?;
        let sid_owned = sid.to_string();
        let ((fb, before, slot), score) = self
            .with_slot(sid, lid, move |app, level, slot| {
                let before = slot.score();
                let at = now_ms();
                let (fb, events) = app.apply(level, slot, &e, &app.solver, false, at)?;
                app.record(
                    &sid_owned,
                    level,
                    slot.history.last().expect("entry"),
                    &events,
                )?;
                Ok((fb, before, slot.clone()))
            })
            .await?;
        Ok(ProposeView {
            kind: fb.kind,
            inductive: slot.state.inductive.clone(),
            potential: slot.state.potential.clone(),
            solved: slot.solved,
            score,
            score_delta: slot.score() - before,
            feedback: fb,
        })
    }

    pub async fn why_not(
        self: &Arc<Self>,
        sid: &str,
        lid: &str,
        text: &str,
    ) -> Result<StatePair, AppError> {
        self.session(sid)?;
        let e = self.parse(lid, text)?;
        let sid_owned = sid.to_string();
        let (pair, _) = self
            .with_slot(sid, lid, move |app, level, slot| {
                let mut eng = app.engine(level, &app.solver);
                let pair = eng.why_not_inductive(&slot.state, &e);
                log_events(&sid_owned, &level.id, &eng.take_events());
                Ok(pair?)
            })
            .await?;
        Ok(pair)
    }

    pub async fn trace(
        self: &Arc<Self>,
        sid: &str,
        lid: &str,
        inputs: serde_json::Map<String, serde_json::Value>,
    ) -> Result<TraceView, AppError> {
        self.session(sid)?;
        let level = self.level(lid)?;
        let st = parse_inputs(&level.program, &inputs)
            .map_err(|e| AppError::BadInputs(e.to_string()))?;
        let app = self.clone();
        tokio::task::spawn_blocking(move || {
            let cfg = app.engine_cfg.exec.clone();
            match exec_trace_partial(
                &level.program,
                &st,
                &cfg,
                Choices::Search,
                Some(&app.solver),
            ) {
                Ok((_, Some(err @ ExecError::IterationCap { .. }))) => {
                    Err(AppError::NotRunnable(err.to_string()))
                }
                Ok((trace, failure)) => Ok(TraceView {
                    trace,
                    failure: failure.map(|f| f.to_string()),
                }),
                Err(ExecError::Inputs(e)) => Err(AppError::BadInputs(e.to_string())),
                Err(e) => Err(AppError::NotRunnable(e.to_string())),
            }
        })
        .await
        .map_err(|e| AppError::Internal(e.to_string()))?
    }
}
