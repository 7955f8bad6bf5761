//! The streaming client against a local OpenAI-style SSE endpoint.

use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use futures::stream;
use scenecmd_core::gateway::{ChatMessage, ChatProvider, GatewayError, OpenAiProvider, ProviderConfig};
use serde_json::{json, Value};

fn chunk(text: &str) -> String {
    format!("data: {}\n\n", json!({"choices": [{"delta": {"content": text}}]}))
}

/// Splits the response into awkward pieces (mid-line, mid-call).
fn pieces() -> Vec<String> {
    vec![
        "data: {\"choices\":[{\"delta\":{\"role\":\"assistant\"}}]}\n\n".to_string(),
        chunk("CREATE(\"Ta"),
        chunk("ble\");\nMOVE(\"crt\", 5"),
        chunk(", 0.05, 5);\n"),
        chunk("MESSAGE(\"done\");"),
    ]
}

async fn good(Json(body): Json<Value>) -> Response {
    assert_eq!(body["stream"], true);
    assert_eq!(body["temperature"], 0.0);
    let mut parts = pieces();
    parts.push("data: [DONE]\n\n".into());
    let s = stream::iter(parts.into_iter().map(Ok::<_, std::io::Error>));
    let s = s.then(|p| async move {
        tokio::time::sleep(Duration::from_millis(30)).await;
        p
    });
    Response::builder()
        .header("content-type", "text/event-stream")
        .body(Body::from_stream(s))
        .unwrap()
}

async fn dropped() -> Response {
    let s = stream::iter(pieces().into_iter().take(3).map(Ok::<_, std::io::Error>))
        .chain(stream::once(async { Err(std::io::Error::other("boom")) }))
        .then(|p| async move {
            tokio::time::sleep(Duration::from_millis(30)).await;
            p
        });
    Response::builder()
        .header("content-type", "text/event-stream")
        .body(Body::from_stream(s))
        .unwrap()
}

async fn unauthorized() -> Response {
    (StatusCode::UNAUTHORIZED, "bad key").into_response()
}

async fn stalled() -> Response {
    let s = stream::iter(vec![Ok::<_, std::io::Error>(chunk("A();\n"))]).chain(stream::pending());
    Response::builder()
        .header("content-type", "text/event-stream")
        .body(Body::from_stream(s))
        .unwrap()
}

use futures::StreamExt;

async fn server() -> String {
    let app = Router::new()
        .route("/good/chat/completions", post(good))
        .route("/dropped/chat/completions", post(dropped))
        .route("/unauthorized/chat/completions", post(unauthorized))
        .route("/stalled/chat/completions", post(stalled));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn provider(base: &str, path: &str) -> OpenAiProvider {
    let mut cfg = ProviderConfig::new(format!("{base}/{path}"), "test-model");
    cfg.timeout_s = 1.0;
    OpenAiProvider::new(cfg).unwrap()
}

fn ask() -> Vec<ChatMessage> {
    vec![ChatMessage::system("s"), ChatMessage::user("u")]
}

#[tokio::test]
async fn lines_arrive_incrementally() {
    let base = server().await;
    let p = provider(&base, "good");
    let t0 = Instant::now();
    let mut s = p.stream_chat(ask()).await.unwrap();
    let first = s.next().await.unwrap().unwrap();
    let first_at = t0.elapsed();
    assert_eq!(first.text, "CREATE(\"Table\");");
    let (rest, err) = s.collect().await;
    assert!(err.is_none(), "{err:?}");
    let texts: Vec<_> = rest.iter().map(|l| l.text.as_str()).collect();
    assert_eq!(texts, ["MOVE(\"crt\", 5, 0.05, 5);", "MESSAGE(\"done\");"]);
    assert!(first_at < t0.elapsed(), "first line came before the stream finished");
    assert!(rest[0].offset_ms >= first.offset_ms);
}

#[tokio::test]
async fn mid_stream_disconnect_keeps_delivered_lines() {
    let base = server().await;
    let (lines, err) = provider(&base, "dropped")
        .stream_chat(ask())
        .await
        .unwrap()
        .collect()
        .await;
    assert_eq!(lines.len(), 1, "only the complete line before the drop: {lines:?}");
    assert_eq!(lines[0].text, "CREATE(\"Table\");");
    assert!(matches!(err, Some(GatewayError::Transport(_))), "{err:?}");
}

#[tokio::test]
async fn non_success_status_is_a_provider_error() {
    let base = server().await;
    let err = provider(&base, "unauthorized").stream_chat(ask()).await.unwrap_err();
    assert_eq!(
        err,
        GatewayError::Provider {
            status: 401,
            body: "bad key".into()
        }
    );
}

#[tokio::test]
async fn idle_stream_times_out() {
    let base = server().await;
    let (lines, err) = provider(&base, "stalled")
        .stream_chat(ask())
        .await
        .unwrap()
        .collect()
        .await;
    assert_eq!(lines.len(), 1);
    assert_eq!(err, Some(GatewayError::Timeout));
}
