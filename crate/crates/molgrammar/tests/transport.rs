mod support;

use std::sync::Arc;
use std::time::Duration;

use molgrammar::core::molecule::parse_smiles;
use molgrammar::core::oracle::{ChatOracle, Oracle, Phase, PromptSet, RandomOracle};
use molgrammar::core::decompose::decompose;
use molgrammar::core::rank::{DesignStory, Judge, StoryStep};
use molgrammar::http::{cassette_key, Cassette, HttpClient, JsonPost, TransportError};
use molgrammar::remote::{ChatEndpoint, RemoteJudge, RemoteOracle, WireRequest};
use serde_json::json;
use support::{serve, FakeChat, FakeSelector};

#[test]
fn http_client_round_trips_json() {
    let url = serve(|path, body| json!({ "path": path, "echo": body }));
    let client = HttpClient::new(Duration::from_secs(5), Some("token".into()));
    let reply = client.post_json(&format!("{url}/v1/echo"), &json!({ "x": [1, 2] })).unwrap();
    assert_eq!(reply, json!({ "path": "/v1/echo", "echo": { "x": [1, 2] } }));
}

#[test]
fn http_client_reports_unreachable_host() {
    let client = HttpClient::new(Duration::from_millis(500), None);
    let err = client.post_json("http://127.0.0.1:9/none", &json!({})).unwrap_err();
    assert!(matches!(err, TransportError::Request { .. }));
}

#[test]
fn chat_oracle_over_http_extracts_pair_answers() {
    let url = serve(|_, body| {
        let messages = body["messages"].as_array().cloned().unwrap();
        json!({ "choices": [{ "message": { "content": FakeChat::reply(&messages) } }] })
    });
    let client = HttpClient::new(Duration::from_secs(5), None);
    let oracle = ChatOracle::new(
        ChatEndpoint { client, endpoint: format!("{url}/chat"), model: "test".into() },
        PromptSet::default(),
    );
    let g = parse_smiles("C=CC(=O)OC1CC2CC1C2").unwrap();
    let d = decompose(&g, &oracle, 3).unwrap();
    assert!(!d.log.entries.is_empty());
    assert!(d.log.entries.iter().all(|e| !e.fallback), "{:?}", d.log.entries);
}

#[test]
fn remote_oracle_speaks_wire_protocol() {
    let service = FakeSelector::default();
    let oracle = RemoteOracle { client: &service, endpoint: "mem://select".into() };
    let g = parse_smiles("C1CCC2CCCCC2C1").unwrap();
    let d = decompose(&g, &oracle, 11).unwrap();
    let requests = service.requests.lock().unwrap();
    assert_eq!(requests.len(), d.log.entries.len());
    for (body, entry) in requests.iter().zip(&d.log.entries) {
        let wire: WireRequest = serde_json::from_value(body.clone()).unwrap();
        assert!(wire.encoded_context.starts_with("[C:1]"));
        assert!(wire.choices.iter().flatten().all(|&m| m >= 1));
        assert_eq!(entry.response.chosen, Some(wire.choices.len() - 1));
    }
}

#[test]
fn remote_judge_reads_probability() {
    let service = FakeSelector::default();
    let judge = RemoteJudge { client: &service, endpoint: "mem://judge".into() };
    let step = |t: &str| StoryStep { step: 0, phase: Phase::Root, text: t.into() };
    let long = DesignStory { molecule: "CCO".into(), pass: 0, steps: vec![step("a"), step("b")] };
    let short = DesignStory { molecule: "CCO".into(), pass: 1, steps: vec![step("a")] };
    assert_eq!(judge.p_first("CCO", &long, &short).unwrap(), 0.8);
    assert_eq!(judge.p_first("CCO", &short, &long).unwrap(), 0.2);
}

#[test]
fn cassette_records_then_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tape.json");
    let chat = Arc::new(FakeChat::default());
    let g = parse_smiles("C=C(C)C(=O)OCC1CO1").unwrap();

    let recorder = Cassette::record(&path, chat.clone()).unwrap();
    let oracle = ChatOracle::new(
        ChatEndpoint { client: &recorder, endpoint: "mem://chat".into(), model: "m".into() },
        PromptSet::default(),
    );
    let first = decompose(&g, &oracle, 5).unwrap();
    recorder.save().unwrap();
    let calls = chat.calls.load(std::sync::atomic::Ordering::Relaxed);
    assert_eq!(recorder.len(), calls);

    let player = Cassette::<FakeChat>::replay(&path).unwrap();
    let oracle = ChatOracle::new(
        ChatEndpoint { client: &player, endpoint: "mem://chat".into(), model: "m".into() },
        PromptSet::default(),
    );
    let second = decompose(&g, &oracle, 5).unwrap();
    assert_eq!(first.log, second.log);
    assert_eq!(first.tree, second.tree);
    let bytes = std::fs::read(&path).unwrap();
    player.save().unwrap();
    assert_eq!(bytes, std::fs::read(&path).unwrap());
}

#[test]
fn cassette_miss_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, r#"{"interactions":{}}"#).unwrap();
    let player = Cassette::<FakeChat>::replay(&path).unwrap();
    let body = json!({ "q": 1 });
    match player.post_json("mem://x", &body) {
        Err(TransportError::CassetteMiss { key, .. }) => assert_eq!(key, cassette_key("mem://x", &body)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn cassette_key_separates_url_and_body() {
    let body = json!({ "b": 1, "a": 2 });
    assert_ne!(cassette_key("u", &body), cassette_key("v", &body));
    assert_eq!(cassette_key("u", &body), cassette_key("u", &json!({ "a": 2, "b": 1 })));
}

#[test]
fn random_oracle_needs_no_transport() {
    let g = parse_smiles("CCO").unwrap();
    let d = decompose(&g, &RandomOracle, 1).unwrap();
    let req = d.log.entries.first().map(|e| e.request.clone());
    if let Some(req) = req {
        assert_eq!(RandomOracle.select(&req).unwrap(), d.log.entries[0].response);
    }
}
