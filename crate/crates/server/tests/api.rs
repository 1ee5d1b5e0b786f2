use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use newevent_core::annotation::{AnnotationService, EventLog};
use newevent_core::corpus::{Corpus, Narrative, Sentence, Split};
use newevent_core::extract::extract_corpus;
use newevent_server::{router, ANNOTATOR_HEADER};
use serde_json::{json, Value};
use tower::ServiceExt;

fn corpus() -> Corpus {
    let met = [
        ("Yesterday", "ADV", 3, "advmod"),
        ("I", "PRON", 3, "nsubj"),
        ("met", "VERB", 0, "root"),
        ("my", "PRON", 5, "nmod:poss"),
        ("teammates", "NOUN", 3, "obj"),
    ];
    let played = [("We", "PRON", 2, "nsubj"), ("played", "VERB", 0, "root"), ("football", "NOUN", 2, "obj")];
    let narratives = ["n1", "n2"]
        .iter()
        .enumerate()
        .map(|(i, id)| Narrative {
            id: id.to_string(),
            narrator_id: format!("p{i}"),
            split: Split::Train,
            sentences: vec![Sentence::from_rows(*id, 0, &met).unwrap(), Sentence::from_rows(*id, 1, &played).unwrap()],
            is_backup: false,
        })
        .collect();
    Corpus::new(narratives).unwrap()
}

fn app_with(log: EventLog) -> Router {
    let corpus = corpus();
    let candidates = extract_corpus(&corpus);
    let service = AnnotationService::open(corpus, candidates, log).unwrap().with_clock(|| 42);
    router(Arc::new(service))
}

fn app() -> Router {
    app_with(EventLog::in_memory())
}

async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
    annotator: Option<&str>,
) -> (StatusCode, String) {
    let mut request = Request::builder().method(method).uri(uri);
    if let Some(a) = annotator {
        request = request.header(ANNOTATOR_HEADER, a);
    }
    let request = match body {
        Some(b) => request.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => request.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body, None).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

#[tokio::test]
async fn session_lifecycle() {
    let app = app();
    let (status, session) =
        call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "a1", "narrative_id": "n1"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = session["id"].as_str().unwrap().to_string();
    assert_eq!(session["cursor"], 0);

    let (status, again) =
        call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "a1", "narrative_id": "n1"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["id"], session["id"]);

    let (status, unit) = call_json(&app, "GET", &format!("/sessions/{id}/current"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(unit["position"], 0);
    assert_eq!(unit["sentence_text"], "Yesterday I met my teammates");
    assert_eq!(unit["context_sentences"], json!([]));
    assert_eq!(unit["candidates"][0]["rendered"], "I — met — my teammates");
    assert!(unit["guideline_digest"].as_str().unwrap().len() > 10);
    let candidate = unit["candidates"][0]["id"].clone();

    let (status, advanced) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/annotations"),
        Some(json!({
            "position": 0,
            "selected_candidate_ids": [candidate],
            "added_spans": [{"char_start": 12, "char_end": 28, "text": "met my teammates"}],
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(advanced["cursor"], 1);

    let (_, unit) = call_json(&app, "GET", &format!("/sessions/{id}/current"), None).await;
    assert_eq!(unit["context_sentences"], json!(["Yesterday I met my teammates"]));

    let (status, _) =
        call_json(&app, "POST", &format!("/sessions/{id}/annotations"), Some(json!({"position": 1}))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, unit) = call_json(&app, "GET", &format!("/sessions/{id}/current"), None).await;
    assert_eq!(unit["complete"], true);
}

#[tokio::test]
async fn errors_map_to_statuses() {
    let app = app();
    let (_, session) =
        call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "a1", "narrative_id": "n1"}))).await;
    let id = session["id"].as_str().unwrap();
    let path = format!("/sessions/{id}/annotations");

    let (status, body) = call_json(
        &app,
        "POST",
        &path,
        Some(json!({"position": 0, "added_spans": [{"char_start": 12, "char_end": 28, "text": "met my teammates."}]})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "validation");

    let (status, body) = call_json(&app, "POST", &path, Some(json!({"position": 1}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "sequencing");

    let (status, body) = call_json(&app, "GET", "/sessions/missing/current", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");

    let (status, _) = call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "a1"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", &path, Some(json!({"position": "zero"})), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, "POST", &path, Some(json!({"position": 0})), Some("someone-else")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", &path, Some(json!({"position": 0})), Some("a1")).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn header_names_the_annotator() {
    let app = app();
    let (status, text) = call(&app, "POST", "/sessions", Some(json!({"narrative_id": "n2"})), Some("a9")).await;
    assert_eq!(status, StatusCode::CREATED);
    let session: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(session["annotator_id"], "a9");
}

#[tokio::test]
async fn batches_iaa_adjudication_and_export() {
    let app = app();
    let (status, batches) = call_json(
        &app,
        "POST",
        "/batches",
        Some(json!({"id": "q1", "annotators": ["a1", "a2"], "qualification_narrative": "n1"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(batches[0]["qualification"], true);

    let (_, report) = call_json(&app, "GET", "/batches/q1/iaa", None).await;
    assert_eq!(report["status"], "pending");
    assert_eq!(report["missing"], json!(["a1", "a2"]));

    for annotator in ["a1", "a2"] {
        let (_, session) =
            call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": annotator, "batch_id": "q1"}))).await;
        assert_eq!(session["narrative_id"], "n1");
        let id = session["id"].as_str().unwrap();
        for position in 0..2 {
            let (_, unit) = call_json(&app, "GET", &format!("/sessions/{id}/current"), None).await;
            let first = unit["candidates"][0]["id"].clone();
            let (status, _) = call_json(
                &app,
                "POST",
                &format!("/sessions/{id}/annotations"),
                Some(json!({"position": position, "selected_candidate_ids": [first]})),
            )
            .await;
            assert_eq!(status, StatusCode::OK);
        }
    }
    let (_, report) = call_json(&app, "GET", "/batches/q1/iaa", None).await;
    assert_eq!(report["status"], "complete");
    assert_eq!(report["flagged"], false);

    let (status, gold) = call(&app, "POST", "/gold/adjudicate", Some(json!({"policy": "majority"})), None).await;
    assert_eq!(status, StatusCode::OK);
    let lines: Vec<Value> = gold.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["selected_candidates"], json!(["I — met — my teammates"]));
    assert_eq!(lines[0]["annotator_id"], "majority:a1,a2");

    let (status, export) = call(&app, "GET", "/export?setting=selection&budget=8", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let records: Vec<Value> = export.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[1]["label"], "new");
    // "We played football" plus "We — played — football" is 8 tokens, so no context fits.
    assert_eq!(records[1]["context_new_events"], json!([]));
    assert_eq!(records[1]["overflow"], false);

    let (status, tagging) =
        call(&app, "GET", "/export?setting=tagging&tag_source=candidates_and_spans", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let first: Value = serde_json::from_str(tagging.lines().next().unwrap()).unwrap();
    assert_eq!(first["tags"], json!(["O", "E", "E", "E", "E"]));

    let (status, _) = call(&app, "GET", "/export?setting=bogus", None, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&app, "GET", "/batches/none/iaa", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn assembled_batches_are_returned() {
    let app = app();
    let (status, batches) =
        call_json(&app, "POST", "/batches", Some(json!({"annotators": ["a1", "a2"], "n_batches": 1, "seed": 5}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(batches.as_array().unwrap().len(), 1);
    let (status, body) =
        call_json(&app, "POST", "/batches", Some(json!({"annotators": ["a1"], "n_batches": 3, "seed": 5}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "assembly");
}

#[tokio::test]
async fn api_log_matches_direct_calls() {
    let dir = tempfile::tempdir().unwrap();
    let api_log = dir.path().join("api.jsonl");
    let direct_log = dir.path().join("direct.jsonl");

    let app = app_with(EventLog::open(&api_log).unwrap());
    let (_, session) =
        call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "a1", "narrative_id": "n2"}))).await;
    let id = session["id"].as_str().unwrap().to_string();
    call_json(&app, "POST", &format!("/sessions/{id}/annotations"), Some(json!({"position": 0}))).await;
    drop(app);

    let corpus = corpus();
    let candidates = extract_corpus(&corpus);
    let direct =
        AnnotationService::open(corpus, candidates, EventLog::open(&direct_log).unwrap()).unwrap().with_clock(|| 42);
    let (s, _) = direct.create_session("a1", newevent_core::annotation::SessionTarget::Narrative("n2".into())).unwrap();
    direct.submit(&s.id, newevent_core::annotation::Submission { position: 0, ..Default::default() }).unwrap();
    drop(direct);

    assert_eq!(std::fs::read(&api_log).unwrap(), std::fs::read(&direct_log).unwrap());
}
