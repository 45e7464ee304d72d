//! Local chat-completions stub for exercising the remote client offline.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

#[derive(Debug, Clone, Default)]
pub struct StubBehavior {
    /// Text placed in `choices[0].message.content`.
    pub reply: String,
    /// Answer the first N requests with HTTP 500.
    pub fail_first: usize,
    pub always_fail: bool,
    /// Status used for failures; 500 when unset.
    pub fail_status: Option<u16>,
    pub latency: Duration,
}

impl StubBehavior {
    pub fn replying(reply: impl Into<String>) -> Self {
        StubBehavior { reply: reply.into(), ..Default::default() }
    }
}

#[derive(Debug, Default)]
pub struct StubStats {
    pub requests: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    pub last_body: Mutex<Option<Value>>,
    pub last_auth: Mutex<Option<String>>,
}

struct Shared {
    behavior: StubBehavior,
    stats: Arc<StubStats>,
}

/// A running stub; the server stops when this is dropped.
pub struct StubServer {
    addr: SocketAddr,
    stats: Arc<StubStats>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl StubServer {
    pub fn start(behavior: StubBehavior) -> std::io::Result<StubServer> {
        let stats = Arc::new(StubStats::default());
        let shared = Arc::new(Shared { behavior, stats: Arc::clone(&stats) });
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()?;
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let app = Router::new()
            .route("/chat/completions", post(handle))
            .route("/v1/chat/completions", post(handle))
            .with_state(shared);
        let thread = std::thread::spawn(move || {
            rt.block_on(async move {
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(StubServer { addr, stats, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> &StubStats {
        &self.stats
    }

    pub fn requests(&self) -> usize {
        self.stats.requests.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.stats.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn last_body(&self) -> Option<Value> {
        self.stats.last_body.lock().expect("stub lock").clone()
    }

    pub fn last_auth(&self) -> Option<String> {
        self.stats.last_auth.lock().expect("stub lock").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

async fn handle(
    State(shared): State<Arc<Shared>>,
    headers: axum::http::HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    let stats = &shared.stats;
    let n = stats.requests.fetch_add(1, Ordering::SeqCst);
    let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
    *stats.last_body.lock().expect("stub lock") = Some(body);
    *stats.last_auth.lock().expect("stub lock") = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);

    let b = &shared.behavior;
    if !b.latency.is_zero() {
        tokio::time::sleep(b.latency).await;
    }
    stats.in_flight.fetch_sub(1, Ordering::SeqCst);

    if b.always_fail || n < b.fail_first {
        let code = StatusCode::from_u16(b.fail_status.unwrap_or(500)).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        return (code, Json(json!({"error": "stub failure"})));
    }
    (
        StatusCode::OK,
        Json(json!({
            "choices": [{"index": 0, "message": {"role": "assistant", "content": b.reply}}]
        })),
    )
}
