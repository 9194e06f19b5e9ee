//! A computational player: enumerates template invariants, discards those
//! falsified by traces it requested, and submits the rest smallest first.

use std::collections::BTreeMap;
use std::thread::sleep;
use std::time::Duration;

use loopinv_core::interp::{eval_bool, Trace};
use loopinv_core::lang::{load_program, BinOp, Expr, Program, Type};
use loopinv_core::value::Value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::Serialize;
use serde_json::{json, Value as Json};

/// Which template families to enumerate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    /// `v >= c`, `v <= c`, `v = c`
    pub bounds: bool,
    /// `v >= w`, `v <= w`, `v = w`
    pub relations: bool,
    /// `v = a*w + b`
    pub linear: bool,
    pub min_const: i64,
    pub max_const: i64,
}

impl Templates {
    pub fn all() -> Self {
        Templates {
            bounds: true,
            relations: true,
            linear: true,
            min_const: -4,
            max_const: 4,
        }
    }

    pub fn none() -> Self {
        Templates {
            bounds: false,
            relations: false,
            linear: false,
            ..Templates::all()
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub budget: usize,
    pub seed: u64,
    pub templates: Templates,
    /// Random inputs traced in addition to the level's starter inputs.
    pub extra_traces: usize,
    pub retries: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            budget: 200,
            seed: 0,
            templates: Templates::all(),
            extra_traces: 3,
            retries: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Submission {
    pub expr: String,
    /// Characterization, or the rejection status for refused submissions.
    pub outcome: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentReport {
    pub session_id: String,
    pub level_id: String,
    pub candidates: usize,
    pub submissions: Vec<Submission>,
    pub solved: bool,
    pub score: i64,
    #[serde(skip)]
    pub traces: Vec<Trace>,
}

pub struct Api {
    base: String,
    http: Client,
    retries: u32,
}

impl Api {
    pub fn new(base: &str, retries: u32) -> Self {
        Api {
            base: base.trim_end_matches('/').to_string(),
            http: Client::new(),
            retries,
        }
    }

    /// Sends a request, retrying transport failures and 429/5xx answers
    /// (other than 503, which is a definite answer) with backoff.
    fn send(
        &self,
        build: impl Fn(&Client) -> reqwest::blocking::RequestBuilder,
    ) -> Result<Response, String> {
        let mut delay = Duration::from_millis(100);
        let mut attempt = 0;
        loop {
            let result = build(&self.http).send();
            let retry = match &result {
                Err(_) => true,
                Ok(r) => {
                    r.status() == StatusCode::TOO_MANY_REQUESTS
                        || (r.status().is_server_error()
                            && r.status() != StatusCode::SERVICE_UNAVAILABLE)
                }
            };
            if !retry || attempt >= self.retries {
                return result.map_err(|e| e.to_string());
            }
            attempt += 1;
            sleep(delay);
            delay *= 2;
        }
    }

    fn get(&self, path: &str) -> Result<Json, String> {
        let url = format!("{}{path}", self.base);
        let r = self.send(|c| c.get(&url))?;
        json_ok(r)
    }

    fn post(&self, path: &str, body: &Json) -> Result<(StatusCode, Json), String> {
        let url = format!("{}{path}", self.base);
        let r = self.send(|c| c.post(&url).json(body))?;
        let status = r.status();
        Ok((status, r.json().map_err(|e| e.to_string())?))
    }
}

fn json_ok(r: Response) -> Result<Json, String> {
    let status = r.status();
    let body: Json = r.json().map_err(|e| e.to_string())?;
    if status.is_success() {
        Ok(body)
    } else {
        Err(format!(
            "{status}: {}",
            body["error"].as_str().unwrap_or("")
        ))
    }
}

/// Every template instance over the numeric variables of `p`, without
/// duplicates, smallest first.
pub fn enumerate(p: &Program, t: &Templates) -> Vec<Expr> {
    let vars: Vec<&String> = p
        .env
        .iter()
        .filter(|(_, ty)| ty.is_numeric())
        .map(|(v, _)| v)
        .collect();
    let consts = t.min_const..=t.max_const;
    let var = |v: &str| Expr::var(v);
    let mut out = Vec::new();
    for v in &vars {
        if t.bounds {
            for c in consts.clone() {
                for op in [BinOp::Ge, BinOp::Le, BinOp::Eq] {
                    out.push(Expr::binary(op, var(v), Expr::int(c)));
                }
            }
        }
        for w in &vars {
            if v == w {
                continue;
            }
            if t.relations {
                for op in [BinOp::Ge, BinOp::Le] {
                    out.push(Expr::binary(op, var(v), var(w)));
                }
                if v < w {
                    out.push(Expr::binary(BinOp::Eq, var(v), var(w)));
                }
            }
            if t.linear {
                for a in consts.clone().filter(|a| *a != 0) {
                    for b in consts.clone() {
                        if a == 1 && b == 0 {
                            continue;
                        }
                        let scaled = if a == 1 {
                            var(w)
                        } else {
                            Expr::binary(BinOp::Mul, var(w), Expr::int(a))
                        };
                        let rhs = match b {
                            0 => scaled,
                            b if b > 0 => Expr::binary(BinOp::Add, scaled, Expr::int(b)),
                            b => Expr::binary(BinOp::Sub, scaled, Expr::int(-b)),
                        };
                        out.push(Expr::binary(BinOp::Eq, var(v), rhs));
                    }
                }
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|e| seen.insert(e.clone()));
    out.sort_by_cached_key(|e| (e.size(), e.to_string()));
    out
}

/// Keeps candidates that hold on every loop-head row, and of the constant
/// bounds on each variable only the tightest.
pub fn filter(candidates: Vec<Expr>, traces: &[Trace]) -> Vec<Expr> {
    let holds = |e: &Expr| {
        traces
            .iter()
            .flat_map(|t| t.loop_rows())
            .all(|row| eval_bool(e, row) == Ok(true))
    };
    let survivors: Vec<Expr> = candidates.into_iter().filter(|e| holds(e)).collect();
    // (variable, operator) -> tightest constant
    let mut best: BTreeMap<(String, bool), i64> = BTreeMap::new();
    let bound = |e: &Expr| match e {
        Expr::Binary(op @ (BinOp::Ge | BinOp::Le), l, r) => match (&**l, &**r) {
            (Expr::Var(v), Expr::Int(c)) => {
                Some((v.clone(), *op == BinOp::Ge, i64::try_from(c).ok()?))
            }
            _ => None,
        },
        _ => None,
    };
    for e in &survivors {
        if let Some((v, lower, c)) = bound(e) {
            let slot = best.entry((v, lower)).or_insert(c);
            *slot = if lower {
                (*slot).max(c)
            } else {
                (*slot).min(c)
            };
        }
    }
    survivors
        .into_iter()
        .filter(|e| match bound(e) {
            Some((v, lower, c)) => best[&(v, lower)] == c,
            None => true,
        })
        .collect()
}

fn random_inputs(params: &[(String, Type)], rng: &mut ChaCha8Rng) -> Json {
    let mut m = serde_json::Map::new();
    for (name, ty) in params {
        let v = match ty {
            Type::Boolean => Value::Bool(rng.gen()),
            Type::Natural => Value::Int(rng.gen_range(0i64..=20).into()),
            _ => Value::Int(rng.gen_range(-10i64..=20).into()),
        };
        m.insert(
            name.clone(),
            serde_json::to_value(&v).expect("value serializes"),
        );
    }
    Json::Object(m)
}

fn state_set(v: &Json) -> Vec<String> {
    v.as_array()
        .map(|a| {
            a.iter()
                .filter_map(|x| x.as_str().map(String::from))
                .collect()
        })
        .unwrap_or_default()
}

/// Plays `level` on the service at `api`.
pub fn agent_play(api: &Api, level: &str, cfg: &AgentConfig) -> Result<AgentReport, String> {
    let detail = api.get(&format!("/api/levels/{level}"))?;
    let source = detail["source"].as_str().ok_or("level has no source")?;
    let program = load_program(source).map_err(|e| format!("level source: {e}"))?;
    let (status, session) = api.post("/api/sessions", &json!({}))?;
    if !status.is_success() {
        return Err(format!("cannot create a session: {status}"));
    }
    let sid = session["sessionId"]
        .as_str()
        .ok_or("no session id")?
        .to_string();
    let base = format!("/api/sessions/{sid}/levels/{level}");
    let state = api.get(&format!("{base}/state"))?;
    let mut report = AgentReport {
        session_id: sid.clone(),
        level_id: level.to_string(),
        candidates: 0,
        submissions: Vec::new(),
        solved: state["solved"].as_bool().unwrap_or(false),
        score: state["score"].as_i64().unwrap_or(0),
        traces: Vec::new(),
    };
    if report.solved {
        return Ok(report);
    }
    let mut known: Vec<String> = state_set(&state["inductive"]);
    known.extend(state_set(&state["potential"]));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut inputs = vec![detail["starterInputs"].clone()];
    inputs.extend((0..cfg.extra_traces).map(|_| random_inputs(&program.params, &mut rng)));
    for i in inputs {
        let (status, body) = api.post(&format!("{base}/trace"), &json!({ "inputs": i }))?;
        if status.is_success() {
            let trace: Trace =
                serde_json::from_value(body["trace"].clone()).map_err(|e| e.to_string())?;
            report.traces.push(trace);
        }
    }

    let candidates = filter(enumerate(&program, &cfg.templates), &report.traces);
    report.candidates = candidates.len();
    for e in candidates {
        if report.submissions.len() >= cfg.budget || report.solved {
            break;
        }
        let text = e.to_string();
        if known.contains(&text) {
            continue;
        }
        let (status, body) = api.post(&format!("{base}/propose"), &json!({ "expr": text }))?;
        let outcome = if status.is_success() {
            report.solved = body["solved"].as_bool().unwrap_or(false);
            report.score = body["score"].as_i64().unwrap_or(report.score);
            known = state_set(&body["inductive"]);
            known.extend(state_set(&body["potential"]));
            body["kind"].as_str().unwrap_or("").to_string()
        } else {
            format!("rejected ({})", status.as_u16())
        };
        report.submissions.push(Submission {
            expr: text,
            outcome,
        });
    }
    Ok(report)
}
