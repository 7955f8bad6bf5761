mod common;

use std::time::Duration;

use common::*;
use futures::{SinkExt, StreamExt};
use scenecmd_core::server::{bind, serve, AppState, ServerConfig};
use scenecmd_core::session::{IngestEvent, InteractionMode, ProviderChoice, RunConfig, SessionConfig};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

struct Server {
    base: String,
    ws: String,
    _dir: tempfile::TempDir,
}

async fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("reply.txt"), ASSISTANT).unwrap();
    let script = dir.path().join("mock.json");
    std::fs::write(
        &script,
        r#"[{"match": "carpet here", "response_file": "reply.txt", "line_delay_ms": 2}]"#,
    )
    .unwrap();
    let defaults = RunConfig {
        session: SessionConfig {
            mode: InteractionMode::Mover,
            ..Default::default()
        },
        scene: Some(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/furnished_room.json").into()),
        provider: ProviderChoice::Mock(script),
        ..Default::default()
    };
    let listener = bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let state = AppState::new(ServerConfig {
        defaults,
        trace_dir: Some(dir.path().to_path_buf()),
    });
    tokio::spawn(serve(listener, state));
    Server {
        base: format!("http://{addr}"),
        ws: format!("ws://{addr}"),
        _dir: dir,
    }
}

async fn create(srv: &Server, body: Value) -> reqwest::Response {
    reqwest::Client::new()
        .post(format!("{}/sessions", srv.base))
        .header("content-type", "application/json")
        .body(body.to_string())
        .send()
        .await
        .unwrap()
}

async fn json<T: serde::de::DeserializeOwned>(r: reqwest::Response) -> T {
    serde_json::from_str(&r.text().await.unwrap()).unwrap()
}

async fn new_session(srv: &Server) -> String {
    let r = create(srv, json!({})).await;
    assert_eq!(r.status(), 201);
    json::<Value>(r).await["session_id"].as_str().unwrap().to_string()
}

async fn connect(srv: &Server, id: &str) -> (Ws, Value) {
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("{}/sessions/{id}/ws", srv.ws))
        .await
        .unwrap();
    let hello = next_json(&mut ws).await.unwrap();
    assert_eq!(hello["type"], "hello");
    (ws, hello)
}

async fn next_json(ws: &mut Ws) -> Option<Value> {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .ok()??
            .ok()?;
        match msg {
            Message::Text(t) => return Some(serde_json::from_str(&t).unwrap()),
            Message::Close(_) => return None,
            _ => continue,
        }
    }
}

fn wire(ev: &IngestEvent) -> Message {
    let mut v = serde_json::to_value(ev).unwrap();
    let kind = v["type"].as_str().unwrap().to_string();
    v["type"] = Value::String(format!("ingest.{kind}"));
    Message::Text(v.to_string().into())
}

async fn revisions_until_stream_end(ws: &mut Ws) -> Vec<Value> {
    let mut revs = Vec::new();
    loop {
        let f = next_json(ws).await.expect("stream_end before close");
        match f["type"].as_str().unwrap() {
            "event.revision" => revs.push(f),
            "event.stream_end" => return revs,
            _ => {}
        }
    }
}

#[tokio::test]
async fn two_observers_see_identical_revisions() {
    let srv = start().await;
    let id = new_session(&srv).await;
    let (mut a, hello) = connect(&srv, &id).await;
    let (mut b, _) = connect(&srv, &id).await;
    assert_eq!(hello["revision"], 0);
    assert_eq!(hello["scene"]["objects"].as_array().unwrap().len(), 1);
    for ev in capture_events() {
        a.send(wire(&ev)).await.unwrap();
    }
    let ra = revisions_until_stream_end(&mut a).await;
    let rb = revisions_until_stream_end(&mut b).await;
    assert_eq!(ra.len(), 29);
    assert_eq!(ra, rb);
    let order: Vec<u64> = ra.iter().map(|r| r["revision"].as_u64().unwrap()).collect();
    assert_eq!(order, (1..=29).collect::<Vec<_>>());

    let scene: Value = json(reqwest::get(format!("{}/sessions/{id}/scene", srv.base)).await.unwrap()).await;
    let golden: Value =
        serde_json::from_str(&std::fs::read_to_string("tests/fixtures/furnished_room_final_scene.json").unwrap())
            .unwrap();
    assert_eq!(scene["scene"]["objects"], golden["objects"]);

    let trace = reqwest::get(format!("{}/sessions/{id}/trace", srv.base))
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert!(trace.starts_with("{\"type\":\"header\""));
    let del = reqwest::Client::new()
        .delete(format!("{}/sessions/{id}", srv.base))
        .send()
        .await
        .unwrap();
    assert_eq!(del.status(), 204);
    // The on-disk trace is complete and replays.
    let on_disk = std::fs::read_to_string(srv._dir.path().join(format!("{id}.jsonl"))).unwrap();
    scenecmd_core::session::replay_trace(&on_disk).unwrap();
}

#[tokio::test]
async fn malformed_frame_closes_only_that_connection() {
    let srv = start().await;
    let id = new_session(&srv).await;
    let (mut bad, _) = connect(&srv, &id).await;
    let (mut good, _) = connect(&srv, &id).await;
    bad.send(Message::Text(r#"{"type":"ingest.word","text":3}"#.into()))
        .await
        .unwrap();
    let err = next_json(&mut bad).await.unwrap();
    assert_eq!(err["type"], "error");
    assert!(next_json(&mut bad).await.is_none(), "connection closed after error");

    good.send(wire(&IngestEvent::Select {
        t_ms: 1,
        object_ids: vec!["nope".into()],
    }))
    .await
    .unwrap();
    let warn = next_json(&mut good).await.unwrap();
    assert_eq!(warn["type"], "event.warning");
    assert_eq!(warn["kind"], "unknown_object");

    let (_again, hello) = connect(&srv, &id).await;
    assert_eq!(hello["session_id"], id);
}

#[tokio::test]
async fn lifecycle_errors() {
    let srv = start().await;
    let r = reqwest::get(format!("{}/sessions/nope/scene", srv.base)).await.unwrap();
    assert_eq!(r.status(), 404);
    let r = create(&srv, json!({"scene": "/does/not/exist.json"})).await;
    assert_eq!(r.status(), 400);
    let body: Value = json(r).await;
    assert!(body["error"].as_str().unwrap().contains("scene load"));
    let r = create(&srv, json!({"mode": "control", "task": "task1a"})).await;
    assert_eq!(r.status(), 201);
    let ids: Vec<String> = json(reqwest::get(format!("{}/sessions", srv.base)).await.unwrap()).await;
    assert_eq!(ids.len(), 1);
}

#[tokio::test]
async fn bind_error_is_reported() {
    let listener = bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let err = bind(&addr).await.unwrap_err();
    assert!(err.to_string().contains("cannot bind"));
}
