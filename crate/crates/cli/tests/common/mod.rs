#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use provoscope::{app, AppConfig, AppState};
use provoscope_core::llm::{CallKind, ChatProvider, LlmCall, LlmError};
use serde_json::{json, Value};

pub const QUERY: &str = "Family movie night of bad movies";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn movies_csv() -> Vec<u8> {
    std::fs::read(fixtures().join("bad-movies/movies.csv")).unwrap()
}

type Rule = fn(&HashMap<&str, &str>) -> Option<String>;

struct Factor {
    name: &'static str,
    columns: &'static [&'static str],
    criteria: &'static str,
    importance: &'static str,
    risk: &'static str,
    filter: &'static str,
    rule: Rule,
}

fn num(row: &HashMap<&str, &str>, col: &str) -> Option<f64> {
    row.get(col)?.trim().parse().ok()
}

const FACTORS: [Factor; 5] = [
    Factor {
        name: "Low rating",
        columns: &["rating"],
        criteria: "Rated 5.0 or lower by audiences.",
        importance: "High",
        risk: "Ratings mix many tastes; a low score can come from a film being dull rather than fun-bad. \
               Consider cult status instead, or the opposite: a well-rated parody of bad movies.",
        filter: "rating <= 5",
        rule: |r| num(r, "rating").filter(|v| *v <= 5.0).map(|v| format!("rated {v}")),
    },
    Factor {
        name: "Family-friendly certification",
        columns: &["certification"],
        criteria: "Certified G or PG so the whole family can watch.",
        importance: "High",
        risk: "Certification says little about tone; some PG-13 films suit older children well. \
               A stricter night might prefer G only.",
        filter: "certification in [\"G\", \"PG\"]",
        rule: |r| {
            let c = r.get("certification")?;
            matches!(*c, "G" | "PG").then(|| format!("certified {c}"))
        },
    },
    Factor {
        name: "Comedic potential",
        columns: &["genre"],
        criteria: "Comedy or family genre, so the badness is fun rather than grim.",
        importance: "Medium",
        risk: "Genre labels are coarse. Unintentionally funny dramas and horror films are classic bad-movie \
               picks; consider them instead.",
        filter: "genre in [\"Comedy\", \"Family\", \"Animation\"]",
        rule: |r| {
            let g = r.get("genre")?;
            matches!(*g, "Comedy" | "Family" | "Animation").then(|| format!("{g} film"))
        },
    },
    Factor {
        name: "Manageable runtime",
        columns: &["runtime_minutes"],
        criteria: "Runs 100 minutes or less, before bedtime.",
        importance: "Medium",
        risk: "A short film is no guarantee of pace. If the night is a weekend, a longer epic may be the \
               better spectacle.",
        filter: "runtime_minutes <= 100",
        rule: |r| num(r, "runtime_minutes").filter(|v| *v <= 100.0).map(|v| format!("{v} minutes")),
    },
    Factor {
        name: "Box office flop",
        columns: &["box_office_musd"],
        criteria: "Earned under 20 million dollars.",
        importance: "Low",
        risk: "Box office reflects marketing as much as quality; some flops are simply obscure. \
               A famous failure may be more entertaining.",
        filter: "box_office_musd < 20",
        rule: |r| num(r, "box_office_musd").filter(|v| *v < 20.0).map(|v| format!("earned ${v}M")),
    },
];

/// Rows shown in a prompt, keyed by header.
fn prompt_rows(prompt: &str) -> Vec<(u64, HashMap<&str, &str>)> {
    let mut lines = prompt.lines().skip_while(|l| !l.starts_with("The first ")).skip(1);
    let Some(header) = lines.next() else {
        return Vec::new();
    };
    let headers: Vec<&str> = header.split(" | ").collect();
    lines
        .take_while(|l| !l.is_empty())
        .map(|l| {
            let cells: Vec<&str> = l.split(" | ").collect();
            let id = cells[0].parse().unwrap();
            (id, headers.iter().copied().zip(cells).collect())
        })
        .collect()
}

/// Deterministic stand-in for a model, scripted for a movie night. One
/// factor's first filter names a column that does not exist, so its
/// analysis goes through the retry.
#[derive(Default)]
pub struct MovieNight {
    pub calls: AtomicUsize,
}

impl MovieNight {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn answer(call: &LlmCall) -> String {
        match call.kind {
            CallKind::FactorGeneration => {
                let factors: Vec<Value> = FACTORS
                    .iter()
                    .map(|f| {
                        json!({
                            "name": f.name,
                            "source_columns": f.columns,
                            "criteria": f.criteria,
                            "importance": f.importance,
                            "risk": f.risk,
                        })
                    })
                    .collect();
                let body = serde_json::to_string_pretty(&json!({ "factors": factors })).unwrap();
                format!("Here are factors for your goal.\n```json\n{body}\n```\n")
            }
            CallKind::Provocation => "```json\n{\"factors\": []}\n```".into(),
            CallKind::Analysis | CallKind::AnalysisRetry => {
                let f = FACTORS
                    .iter()
                    .find(|f| call.prompt.contains(&format!("Factor: {}\n", f.name)))
                    .expect("analysis prompt names a scripted factor");
                let rows: Vec<Value> = prompt_rows(&call.prompt)
                    .into_iter()
                    .filter_map(|(id, row)| (f.rule)(&row).map(|reason| json!({"id_": id, "reason": reason})))
                    .collect();
                let first_try = call.kind == CallKind::Analysis;
                let (filter, message) = if f.name == "Comedic potential" && first_try {
                    ("humor_score >= 7", "Scored humour from the plot.")
                } else {
                    (f.filter, "")
                };
                let body = json!({"filter": filter, "rows": rows, "message": message});
                format!("```json\n{}\n```", serde_json::to_string_pretty(&body).unwrap())
            }
        }
    }
}

#[async_trait]
impl ChatProvider for MovieNight {
    async fn complete(&self, call: &LlmCall) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(MovieNight::answer(call))
    }
}

pub struct Server {
    pub base: String,
    pub state: AppState,
    pub http: reqwest::Client,
}

impl Server {
    pub async fn start(config: AppConfig) -> Server {
        let (state, router) = app(config).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
        Server {
            base: format!("http://{addr}/api"),
            state,
            http: reqwest::Client::new(),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn post(&self, path: &str, body: Value) -> reqwest::Response {
        self.http.post(self.url(path)).json(&body).send().await.unwrap()
    }

    pub async fn post_empty(&self, path: &str) -> reqwest::Response {
        self.http.post(self.url(path)).send().await.unwrap()
    }

    pub async fn patch(&self, path: &str, body: Value) -> reqwest::Response {
        self.http.patch(self.url(path)).json(&body).send().await.unwrap()
    }

    pub async fn delete(&self, path: &str) -> reqwest::Response {
        self.http.delete(self.url(path)).send().await.unwrap()
    }

    pub async fn get(&self, path: &str) -> reqwest::Response {
        self.http.get(self.url(path)).send().await.unwrap()
    }

    pub async fn create_session(&self) -> (String, Value) {
        let res = self.post_empty("/sessions").await;
        assert_eq!(res.status(), 201);
        let body: Value = res.json().await.unwrap();
        (body["session_id"].as_str().unwrap().to_string(), body["session"].clone())
    }

    pub async fn upload(&self, session: &str, name: &str, bytes: Vec<u8>) -> reqwest::Response {
        let part = reqwest::multipart::Part::bytes(bytes).file_name(name.to_string());
        let form = reqwest::multipart::Form::new().part("file", part);
        self.http
            .post(self.url(&format!("/sessions/{session}/dataset")))
            .multipart(form)
            .send()
            .await
            .unwrap()
    }

    /// Create, upload unless the scenario already did, query, demote one
    /// factor, analyze every factor and compute the shortlist. Returns the
    /// shortlist body as sent.
    pub async fn scripted_session(&self, csv: Option<(&str, Vec<u8>)>) -> String {
        let (id, session) = self.create_session().await;
        if let Some((name, bytes)) = csv {
            let res = self.upload(&id, name, bytes).await;
            assert_eq!(res.status(), 200, "{}", res.text().await.unwrap());
        } else {
            assert!(!session["dataset"].is_null(), "scenario should upload a dataset");
        }

        let res = self.post(&format!("/sessions/{id}/query"), json!({ "text": QUERY })).await;
        assert_eq!(res.status(), 200, "{}", res.text().await.unwrap());
        let outcome: Value = res.json().await.unwrap();
        let factors = outcome["factors"].as_array().unwrap().clone();
        assert_eq!(factors.len(), 5);

        let runtime = factors.iter().find(|f| f["title"] == "Manageable runtime").unwrap();
        let fid = runtime["id"].as_str().unwrap();
        let res = self
            .patch(&format!("/sessions/{id}/factors/{fid}"), json!({"importance": "Low"}))
            .await;
        assert_eq!(res.status(), 200, "{}", res.text().await.unwrap());

        for f in &factors {
            let fid = f["id"].as_str().unwrap();
            let res = self.post_empty(&format!("/sessions/{id}/factors/{fid}/analyze")).await;
            assert_eq!(res.status(), 200, "{}", res.text().await.unwrap());
        }
        let res = self.post_empty(&format!("/sessions/{id}/shortlist")).await;
        assert_eq!(res.status(), 200);
        res.text().await.unwrap()
    }
}

/// Server over the shipped fixture scenarios, bound to `scenario`, with
/// `live` as the provider behind record and live modes.
pub fn fixture_config(scenario: &str, live: Option<Arc<dyn ChatProvider>>) -> AppConfig {
    AppConfig {
        scenario_dir: Some(fixtures()),
        default_scenario: Some(scenario.to_string()),
        model: "fixture-model".into(),
        live,
        ..Default::default()
    }
}
