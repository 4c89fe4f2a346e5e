mod common;

use std::path::Path;
use std::process::Command;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use bioinvert_core::corpus::parse_corpus_jsonl;
use bioinvert_workbench::api::{router, AppState};
use bioinvert_workbench::{Workbench, WorkbenchError};
use common::*;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    text: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }

    fn head(&self) -> u64 {
        self.headers["x-fbce-head"].to_str().unwrap().parse().unwrap()
    }

    #[track_caller]
    fn expect(self, status: StatusCode) -> Self {
        assert_eq!(self.status, status, "{}", self.text);
        self
    }

    /// Asserts an error envelope and returns its path.
    #[track_caller]
    fn error(&self, status: StatusCode, code: &str) -> String {
        assert_eq!(self.status, status, "{}", self.text);
        let v = self.json();
        assert_eq!(v["code"], code, "{}", self.text);
        assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()));
        v["path"].as_str().unwrap().to_string()
    }
}

struct Api {
    app: Router,
    _root: tempfile::TempDir,
}

impl Api {
    fn new() -> Api {
        let root = tempfile::tempdir().unwrap();
        let state = AppState::new(Workbench::new(root.path(), engine()));
        Api {
            app: router(state),
            _root: root,
        }
    }

    async fn send(&self, method: Method, uri: &str, body: Option<String>, headers: &[(&str, &str)]) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b)),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        assert_eq!(res.headers()["x-fbce-version"], "1", "every response carries the version header");
        let status = res.status();
        let headers = res.headers().clone();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        Reply {
            status,
            headers,
            text: String::from_utf8(bytes.to_vec()).unwrap(),
        }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, None, &[]).await
    }

    async fn post(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::POST, uri, Some(body.to_string()), &[]).await
    }

    async fn put(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::PUT, uri, Some(body.to_string()), &[]).await
    }

    async fn create(&self, id: &str) -> Reply {
        self.post("/api/projects", json!({ "id": id, "name": "Demo soft robot" }))
            .await
            .expect(StatusCode::CREATED)
    }

    /// The demo workflow through the endpoints the designer UI uses.
    /// Returns every mutating response body in order.
    async fn demo(&self, id: &str, seed: u64) -> Vec<Value> {
        let p = format!("/api/projects/{id}");
        let mut out = vec![self.create(id).await.json()];
        let docs = parse_corpus_jsonl(&fixture("fixtures/demo/corpus.jsonl")).unwrap();
        let steps: Vec<(Method, String, Value)> = vec![
            (Method::POST, format!("{p}/stages/ingested/run"), json!({ "docs": docs })),
            (Method::POST, format!("{p}/stages/classified/run"), json!({ "backend": "mock" })),
            (
                Method::POST,
                format!("{p}/stages/reviewed/run"),
                json!({ "backend": "mock", "seed": seed, "auditor": "pass" }),
            ),
            (Method::POST, format!("{p}/stages/framed/run"), json!({ "backend": "mock" })),
            (Method::PUT, format!("{p}/kb"), json("fixtures/kb-soft-robot.json")),
            (Method::POST, format!("{p}/inversion"), json!({ "backend": "mock" })),
            (Method::POST, format!("{p}/inversion/fish-tail/waiver"), json!({ "waived": true })),
            (Method::POST, format!("{p}/inversion/squid-jet/waiver"), json!({ "waived": true })),
            (Method::POST, format!("{p}/inversion/inchworm-crawl/waiver"), json!({ "waived": true })),
            (
                Method::POST,
                format!("{p}/screening/verdicts"),
                json!({ "verdicts": {
                    "fish-tail": { "verdict": "Keep" },
                    "inchworm-crawl": { "verdict": "Keep" },
                    "squid-jet": { "verdict": "Keep" },
                } }),
            ),
            (Method::POST, format!("{p}/stages/screened/run"), json!({})),
            (
                Method::PUT,
                format!("{p}/problem"),
                json!({
                    "problem": json("fixtures/demo/problem.json"),
                    "target_env": json("fixtures/demo/target-environment.json"),
                }),
            ),
            (Method::POST, format!("{p}/decision/g1-judgment"), json("fixtures/demo/judgment.json")),
            (Method::PUT, format!("{p}/decision/manual-scores"), json("fixtures/demo/manual-scores.json")),
            (Method::POST, format!("{p}/decision/run"), json!({})),
            (Method::POST, format!("{p}/clusters/run"), json!({})),
        ];
        for (method, uri, body) in steps {
            let r = self.send(method, &uri, Some(body.to_string()), &[]).await;
            assert_eq!(r.status, StatusCode::OK, "{uri}: {}", r.text);
            out.push(r.json());
        }
        out
    }
}

#[tokio::test]
async fn empty_root_lists_no_projects() {
    let api = Api::new();
    let r = api.get("/api/projects").await.expect(StatusCode::OK);
    assert_eq!(r.json(), json!([]));
}

#[tokio::test]
async fn project_crud() {
    let api = Api::new();
    let r = api.create("alpha").await;
    assert_eq!(r.head(), 1);
    assert_eq!(r.json()["event"], "project_created");
    api.post("/api/projects", json!({ "id": "alpha" }))
        .await
        .error(StatusCode::CONFLICT, "PROJECT_EXISTS");
    api.post("/api/projects", json!({ "id": "../etc" }))
        .await
        .error(StatusCode::BAD_REQUEST, "BAD_PROJECT_ID");
    let path = api
        .post("/api/projects", json!({ "name": "no id" }))
        .await
        .error(StatusCode::BAD_REQUEST, "SCHEMA_ERROR");
    assert_eq!(path, "/id");

    let list = api.get("/api/projects").await.json();
    assert_eq!(list[0]["id"], "alpha");
    assert_eq!(list[0]["head"], 1);
    assert_eq!(list[0]["stage"], Value::Null);

    let r = api.get("/api/projects/alpha").await.expect(StatusCode::OK);
    assert_eq!(r.json()["fbce_version"], 1);
    assert_eq!(r.head(), 1);

    let r = api.send(Method::DELETE, "/api/projects/alpha", None, &[]).await;
    assert_eq!(r.status, StatusCode::NO_CONTENT);
    let path = api.get("/api/projects/alpha").await.error(StatusCode::NOT_FOUND, "PROJECT_NOT_FOUND");
    assert_eq!(path, "/api/projects/alpha");
}

#[tokio::test]
async fn version_header_is_checked() {
    let api = Api::new();
    let r = api.send(Method::GET, "/api/projects", None, &[("x-fbce-version", "2")]).await;
    let path = r.error(StatusCode::BAD_REQUEST, "VERSION_MISMATCH");
    assert_eq!(path, "/api/projects");
    api.send(Method::GET, "/api/projects", None, &[("x-fbce-version", "1")])
        .await
        .expect(StatusCode::OK);
}

#[tokio::test]
async fn unknown_routes_and_stages_are_not_found() {
    let api = Api::new();
    api.create("p").await;
    api.get("/api/nothing").await.error(StatusCode::NOT_FOUND, "NOT_FOUND");
    api.post("/api/projects/p/stages/polished/run", json!({}))
        .await
        .error(StatusCode::NOT_FOUND, "NOT_FOUND");
    api.get("/api/projects/p/decision/result").await.error(StatusCode::NOT_FOUND, "NOT_FOUND");
    api.get("/api/jobs/job-99").await.error(StatusCode::NOT_FOUND, "NOT_FOUND");
}

#[tokio::test]
async fn full_workflow_over_http() {
    let api = Api::new();
    let replies = api.demo("demo", 7).await;
    let events = api.get("/api/projects/demo/events").await.json();
    assert_eq!(events.as_array().unwrap().len(), replies.len(), "one event per mutating request");
    for (i, (e, r)) in events.as_array().unwrap().iter().zip(&replies).enumerate() {
        assert_eq!(e["seq"], i as u64 + 1);
        assert_eq!(e["type"], r["event"]);
        assert_eq!(r["head"], i as u64 + 1);
    }

    let result = api.get("/api/projects/demo/decision/result").await.expect(StatusCode::OK).json();
    assert_eq!(result["state"], "Complete");
    let ranking: Vec<String> = serde_json::from_value(result["result"]["ranking"].clone()).unwrap();
    let q = |id: &str| {
        result["result"]["alternatives"]
            .as_array()
            .unwrap()
            .iter()
            .find(|a| a["id"] == id)
            .unwrap()["Q"]
            .as_f64()
            .unwrap()
    };
    assert!(ranking.windows(2).all(|w| q(&w[0]) <= q(&w[1])));
    let last = replies.len() - 2;
    assert_eq!(replies[last]["report"]["ranking"], json!(ranking));

    let clusters = api.get("/api/projects/demo/clusters").await.expect(StatusCode::OK).json();
    assert_eq!(clusters["members"], json!(ranking));

    let csv = api.get("/api/projects/demo/decision/matrix").await.expect(StatusCode::OK);
    assert!(csv.text.starts_with("alternative,functional_compliance,"));

    let export = api.get("/api/projects/demo/export").await.expect(StatusCode::OK);
    let bundle = export.json();
    assert_eq!(bundle["fbce_version"], 1);
    assert_eq!(bundle["events"], events);
    let project = api.get("/api/projects/demo").await.json();
    assert_eq!(bundle["project"], project);
}

#[tokio::test]
async fn missing_manual_scores_is_unprocessable() {
    let api = Api::new();
    api.demo("demo", 7).await;
    api.put("/api/projects/demo/decision/manual-scores", json!({ "fish-tail": { "reliability": 0.5 } }))
        .await
        .expect(StatusCode::OK);
    let r = api.post("/api/projects/demo/decision/run", json!({})).await;
    r.error(StatusCode::UNPROCESSABLE_ENTITY, "MISSING_MANUAL_SCORE");
    assert!(r.json()["message"].as_str().unwrap().contains("economic_tolerance"));
}

#[tokio::test]
async fn stage_order_and_optimistic_concurrency() {
    let api = Api::new();
    let head = api.create("p").await.head();
    api.post("/api/projects/p/decision/run", json!({}))
        .await
        .error(StatusCode::CONFLICT, "STAGE_ORDER_VIOLATION");
    api.post("/api/projects/p/stages/ingested/run", json!({}))
        .await
        .error(StatusCode::UNPROCESSABLE_ENTITY, "MISSING_INPUT");

    let docs = json!({ "docs": [{ "doc_id": "d", "text": "The tail fin generates thrust." }] });
    let stale = (head + 5).to_string();
    let r = api
        .send(
            Method::POST,
            "/api/projects/p/stages/ingested/run",
            Some(docs.to_string()),
            &[("x-fbce-head", &stale)],
        )
        .await;
    r.error(StatusCode::CONFLICT, "CONFLICT");
    let r = api
        .send(
            Method::POST,
            "/api/projects/p/stages/ingested/run",
            Some(docs.to_string()),
            &[("x-fbce-head", &head.to_string())],
        )
        .await
        .expect(StatusCode::OK);
    assert_eq!(r.head(), head + 1);
    let events = api.get("/api/projects/p/events").await.json();
    assert_eq!(events.as_array().unwrap().len() as u64, head + 1, "rejected requests log nothing");
}

#[tokio::test]
async fn review_verdicts_recompute_batch_status() {
    let api = Api::new();
    api.create("p").await;
    let docs = parse_corpus_jsonl(&fixture("fixtures/demo/corpus.jsonl")).unwrap();
    api.post("/api/projects/p/stages/ingested/run", json!({ "docs": docs })).await.expect(StatusCode::OK);
    api.post("/api/projects/p/stages/classified/run", json!({ "backend": "mock" })).await.expect(StatusCode::OK);
    api.post("/api/projects/p/stages/reviewed/run", json!({ "seed": 3 })).await.expect(StatusCode::OK);

    let batches = api.get("/api/projects/p/review/batches").await.expect(StatusCode::OK).json();
    assert_eq!(batches[0]["status"], "Open");
    assert_eq!(batches[0]["state"], "Pending");
    let audited = batches[0]["audit_sample"][0].as_str().unwrap().to_string();

    let r = api
        .post("/api/projects/p/review/batches/1/verdicts", json!({ "verdicts": { &audited: "Fail" } }))
        .await
        .expect(StatusCode::OK);
    assert_eq!(r.json()["status"], "Dirty");
    let r = api.post("/api/projects/p/review/step", json!({ "seed": 3 })).await.expect(StatusCode::OK);
    assert_eq!(r.json()["report"]["relabeled"], json!([1]));
    let batch = api.get("/api/projects/p/review/batches/1").await.json();
    assert_eq!(batch["status"], "Open");
    let fresh = batch["audit_sample"][0].as_str().unwrap().to_string();
    let r = api
        .post("/api/projects/p/review/batches/1/verdicts", json!({ "verdicts": { &fresh: "Pass" } }))
        .await
        .expect(StatusCode::OK);
    assert_eq!(r.json()["status"], "Clean");
    assert_eq!(r.json()["state"], "Complete");

    api.post("/api/projects/p/review/batches/1/verdicts", json!({ "verdicts": { "nope": "Pass" } }))
        .await
        .error(StatusCode::UNPROCESSABLE_ENTITY, "NOT_AUDITED");
    api.get("/api/projects/p/review/batches/9").await.error(StatusCode::NOT_FOUND, "NOT_FOUND");
    let path = api
        .post("/api/projects/p/review/batches/1/verdicts", json!({ "verdicts": { &fresh: "Maybe" } }))
        .await
        .error(StatusCode::BAD_REQUEST, "SCHEMA_ERROR");
    assert!(path.starts_with("/verdicts"), "{path}");
}

#[tokio::test]
async fn weight_preview_matches_the_stored_judgment() {
    let api = Api::new();
    api.create("p").await;
    let judgment = json("fixtures/demo/judgment.json");
    let preview = api.post("/api/decision/g1-weights", judgment.clone()).await.expect(StatusCode::OK).json();
    let stored = api.post("/api/projects/p/decision/g1-judgment", judgment).await.expect(StatusCode::OK).json();
    assert_eq!(preview, stored["report"]["weights"]);
    let w6 = preview["values"]["economic_tolerance"].as_f64().unwrap();
    assert!((w6 - 1.0 / 8.776).abs() < 1e-12, "{w6}");

    let equal = api
        .post("/api/decision/g1-weights", json!({ "order": ["a", "b", "c"], "ratios": [1.0, 1.0] }))
        .await
        .json();
    for id in ["a", "b", "c"] {
        assert!((equal["values"][id].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }
    let r = api.post("/api/decision/g1-weights", json!({ "order": ["a", "b"], "ratios": [1.9] })).await;
    r.error(StatusCode::UNPROCESSABLE_ENTITY, "BAD_RATIO");
    api.post(
        "/api/projects/p/decision/g1-judgment",
        json!({
            "order": [
                "functional_compliance",
                "behavioral_alignment",
                "characteristic_consistency",
                "environmental_migration",
                "reliability",
                "price"
            ],
            "ratios": [1.0, 1.0, 1.0, 1.0, 1.0]
        }),
    )
    .await
    .error(StatusCode::UNPROCESSABLE_ENTITY, "UNKNOWN_CRITERION");
}

#[tokio::test]
async fn frames_are_validated_on_save() {
    let api = Api::new();
    api.demo("demo", 3).await;
    let frames = api.get("/api/projects/demo/frames").await.expect(StatusCode::OK).json();
    assert_eq!(frames.as_array().unwrap().len(), 3);
    let mut doc = api.get("/api/projects/demo/frames/squid-jet").await.expect(StatusCode::OK).json();
    doc["fbce_version"] = json!(1);

    let mut bad = doc.clone();
    bad["characteristics"] = json!([]);
    let r = api.put("/api/projects/demo/frames/squid-jet", bad.clone()).await;
    let path = r.error(StatusCode::UNPROCESSABLE_ENTITY, "VALIDATION_FAILED");
    assert_eq!(path, "/characteristics");
    assert!(!r.json()["violations"].as_array().unwrap().is_empty());
    let report = api.post("/api/frames/validate", bad).await.expect(StatusCode::OK).json();
    assert_eq!(report["violations"][0]["path"], "/characteristics");

    let mut gerund = doc.clone();
    gerund["functions"][0] = json!({ "kind": "action", "verb": "drive", "object": "flexible structure" });
    let report = api.post("/api/frames/validate", gerund).await.json();
    assert_eq!(report["violations"][0]["code"], "NOT_GERUND");
    assert!(report["violations"][0]["path"].as_str().unwrap().starts_with("/functions/0"));

    api.put("/api/projects/demo/frames/other-id", doc.clone())
        .await
        .error(StatusCode::BAD_REQUEST, "SCHEMA_ERROR");
    let mut v2 = doc.clone();
    v2["fbce_version"] = json!(2);
    api.put("/api/projects/demo/frames/squid-jet", v2)
        .await
        .error(StatusCode::BAD_REQUEST, "VERSION_MISMATCH");

    doc["behavior"]["summary"] = json!("Provide underwater thrust by jetting");
    api.put("/api/projects/demo/frames/squid-jet", doc).await.expect(StatusCode::OK);
    let project = api.get("/api/projects/demo").await.json();
    assert_eq!(project["stages"]["inverted"], "Stale");
    assert_eq!(project["stages"]["clustered"], "Stale");
}

#[tokio::test]
async fn background_jobs_are_polled() {
    let api = Api::new();
    api.create("p").await;
    let docs = parse_corpus_jsonl(&fixture("fixtures/demo/corpus.jsonl")).unwrap();
    api.post("/api/projects/p/stages/ingested/run", json!({ "docs": docs })).await.expect(StatusCode::OK);
    let r = api
        .post("/api/projects/p/stages/classified/run?async=true", json!({ "backend": "mock" }))
        .await
        .expect(StatusCode::ACCEPTED);
    let job = r.json()["job_id"].as_str().unwrap().to_string();
    let mut status = Value::Null;
    for _ in 0..500 {
        status = api.get(&format!("/api/jobs/{job}")).await.expect(StatusCode::OK).json();
        if status["state"] != "running" {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    assert_eq!(status["state"], "done", "{status}");
    assert_eq!(status["outcome"]["head"], 3);
    assert_eq!(status["stage"], "classified");

    let r = api
        .post("/api/projects/p/stages/ranked/run?async=true", json!({}))
        .await
        .expect(StatusCode::ACCEPTED);
    let job = r.json()["job_id"].as_str().unwrap().to_string();
    for _ in 0..500 {
        status = api.get(&format!("/api/jobs/{job}")).await.json();
        if status["state"] != "running" {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    assert_eq!(status["state"], "failed");
    assert_eq!(status["error"]["code"], "STAGE_ORDER_VIOLATION");
    let r = api.send(Method::DELETE, &format!("/api/jobs/{job}"), None, &[]).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    assert_eq!(r.json()["state"], "failed", "finished jobs stay as they ended");
}

#[tokio::test]
async fn writes_to_different_projects_proceed_independently() {
    let api = Api::new();
    let (a, b) = tokio::join!(api.demo("a", 5), api.demo("b", 5));
    assert_eq!(a.len(), b.len());
    let ea = api.get("/api/projects/a/export").await.text;
    let eb = api.get("/api/projects/b/export").await.text;
    assert_eq!(ea.replace("\"a\"", "\"b\""), eb);
}

#[tokio::test]
async fn occupied_port_is_a_bind_error() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let root = tempfile::tempdir().unwrap();
    let state = AppState::new(Workbench::new(root.path(), engine()));
    let err = bioinvert_workbench::api::serve(state, "127.0.0.1", port).await.unwrap_err();
    assert!(matches!(err, WorkbenchError::Bind(_)));
    assert_eq!(err.code(), "BIND_ERROR");
}

fn cli(dir: &Path, args: &[&str]) -> Vec<Value> {
    let out = Command::new(env!("CARGO_BIN_EXE_bioinvert"))
        .current_dir(dir)
        .args(["--project", "demo"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::Deserializer::from_slice(&out.stdout)
        .into_iter::<Value>()
        .map(Result::unwrap)
        .collect()
}

#[tokio::test]
async fn cli_and_api_give_identical_results() {
    let api = Api::new();
    let replies = api.demo("demo", 9).await;

    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let f = |rel: &str| root().join(rel).display().to_string();
    let mut outputs = Vec::new();
    outputs.extend(cli(d, &["new", "--name", "Demo soft robot"]));
    outputs.extend(cli(d, &["ingest", &f("fixtures/demo/corpus.jsonl")]));
    outputs.extend(cli(d, &["--backend", "mock", "classify"]));
    outputs.extend(cli(d, &["--backend", "mock", "--seed", "9", "review", "run", "--auditor", "pass"]));
    outputs.extend(cli(d, &["--backend", "mock", "frame"]));
    outputs.extend(cli(
        d,
        &[
            "--backend",
            "mock",
            "invert",
            "--kb",
            &f("fixtures/kb-soft-robot.json"),
            "--waive",
            "fish-tail,squid-jet,inchworm-crawl",
        ],
    ));
    outputs.extend(cli(d, &["screen", "--keep", "fish-tail,squid-jet,inchworm-crawl"]));
    outputs.extend(cli(
        d,
        &[
            "rank",
            "--problem",
            &f("fixtures/demo/problem.json"),
            "--target-env",
            &f("fixtures/demo/target-environment.json"),
            "--judgment",
            &f("fixtures/demo/judgment.json"),
            "--manual-scores",
            &f("fixtures/demo/manual-scores.json"),
        ],
    ));
    outputs.extend(cli(d, &["cluster"]));

    assert_eq!(outputs, replies);

    let exported = cli(d, &["export"]);
    let api_export = api.get("/api/projects/demo/export").await.json();
    assert_eq!(exported, vec![api_export]);
    let cli_log = std::fs::read(d.join("demo/events.jsonl")).unwrap();
    let api_log = std::fs::read(api._root.path().join("demo/events.jsonl")).unwrap();
    assert_eq!(cli_log, api_log);
}
