//! HTTP and WebSocket front end. Each session runs its engine on a dedicated
//! thread; frames are published latest-wins, controls go through a queue.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde_json::json;
use tokio::sync::{oneshot, watch};

use crate::protocol::{Ack, Control, ServerText};
use crate::session::{Frame, SessionEngine};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Iterations between frames unless a session config sets `frame_stride`.
    pub frame_stride: u64,
    pub max_sessions: usize,
    /// Interval of heartbeat frames while paused.
    pub heartbeat: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            frame_stride: 10,
            max_sessions: 4,
            heartbeat: Duration::from_secs(1),
        }
    }
}

enum Command {
    Control(Control, oneshot::Sender<Ack>),
    Snapshot(oneshot::Sender<String>),
}

struct Handle {
    commands: mpsc::Sender<Command>,
    frames: watch::Receiver<Arc<Frame>>,
}

pub struct AppState {
    config: ServerConfig,
    sessions: Mutex<BTreeMap<u64, Handle>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Arc<Self> {
        Arc::new(Self {
            config,
            sessions: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn handle(&self, id: u64) -> Option<(mpsc::Sender<Command>, watch::Receiver<Arc<Frame>>)> {
        let sessions = self.sessions.lock().expect("session table poisoned");
        sessions.get(&id).map(|h| (h.commands.clone(), h.frames.clone()))
    }
}

/// The engine loop: drains controls at iteration boundaries, steps while running,
/// beats while paused. Ends when the session is deleted.
fn engine_loop(
    mut session: SessionEngine,
    commands: mpsc::Receiver<Command>,
    frames: watch::Sender<Arc<Frame>>,
    heartbeat: Duration,
) {
    let mut last_beat = Instant::now();
    loop {
        loop {
            let command = if session.running() {
                match commands.try_recv() {
                    Ok(c) => c,
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => return,
                }
            } else {
                match commands.recv_timeout(heartbeat.saturating_sub(last_beat.elapsed())) {
                    Ok(c) => c,
                    Err(mpsc::RecvTimeoutError::Timeout) => {
                        frames.send_replace(Arc::new(session.frame(true)));
                        last_beat = Instant::now();
                        continue;
                    }
                    Err(mpsc::RecvTimeoutError::Disconnected) => return,
                }
            };
            match command {
                Command::Control(control, reply) => {
                    let ack = session.apply(control);
                    frames.send_replace(Arc::new(session.frame(false)));
                    last_beat = Instant::now();
                    let _ = reply.send(ack);
                }
                Command::Snapshot(reply) => {
                    let _ = reply.send(session.snapshot_csv());
                }
            }
        }
        if session.advance() {
            frames.send_replace(Arc::new(session.frame(false)));
            last_beat = Instant::now();
        }
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn not_found(id: u64) -> Response {
    error(StatusCode::NOT_FOUND, format!("no session {id}"))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<BTreeMap<String, serde_json::Value>>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(config) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let full = || state.sessions.lock().expect("session table poisoned").len() >= state.config.max_sessions;
    if full() {
        return error(StatusCode::TOO_MANY_REQUESTS, "session limit reached");
    }
    let stride = state.config.frame_stride;
    let built = tokio::task::spawn_blocking(move || SessionEngine::from_config(&config, stride)).await;
    let session = match built {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => return error(StatusCode::BAD_REQUEST, e),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let count = session.count();
    let (frame_tx, frame_rx) = watch::channel(Arc::new(session.frame(false)));
    let (command_tx, command_rx) = mpsc::channel();
    let id = {
        let mut sessions = state.sessions.lock().expect("session table poisoned");
        if sessions.len() >= state.config.max_sessions {
            return error(StatusCode::TOO_MANY_REQUESTS, "session limit reached");
        }
        let id = state.next_id.fetch_add(1, Ordering::Relaxed);
        sessions.insert(
            id,
            Handle {
                commands: command_tx,
                frames: frame_rx,
            },
        );
        id
    };
    let heartbeat = state.config.heartbeat;
    std::thread::Builder::new()
        .name(format!("session-{id}"))
        .spawn(move || engine_loop(session, command_rx, frame_tx, heartbeat))
        .expect("spawning a session thread");
    log::info!("session {id} started with {count} points");
    (StatusCode::CREATED, Json(json!({ "id": id, "count": count }))).into_response()
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let sessions = state.sessions.lock().expect("session table poisoned");
    let list: Vec<_> = sessions
        .iter()
        .map(|(id, h)| {
            let f = h.frames.borrow();
            json!({
                "id": id,
                "iteration": f.header.iteration,
                "count": f.header.count,
                "running": f.header.running,
            })
        })
        .collect();
    Json(json!(list))
}

async fn send_control(commands: &mpsc::Sender<Command>, control: Control) -> Option<Ack> {
    let (tx, rx) = oneshot::channel();
    commands.send(Command::Control(control, tx)).ok()?;
    rx.await.ok()
}

async fn control(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Result<Json<Control>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Some((commands, _)) = state.handle(id) else {
        return not_found(id);
    };
    let Json(control) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    match send_control(&commands, control).await {
        Some(ack) if ack.ok => Json(ack).into_response(),
        Some(ack) => (StatusCode::BAD_REQUEST, Json(ack)).into_response(),
        None => not_found(id),
    }
}

async fn snapshot(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    let Some((commands, _)) = state.handle(id) else {
        return not_found(id);
    };
    let (tx, rx) = oneshot::channel();
    if commands.send(Command::Snapshot(tx)).is_err() {
        return not_found(id);
    }
    match rx.await {
        Ok(csv) => ([(header::CONTENT_TYPE, "text/csv")], csv).into_response(),
        Err(_) => not_found(id),
    }
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    let removed = state.sessions.lock().expect("session table poisoned").remove(&id);
    match removed {
        Some(_) => {
            log::info!("session {id} closed");
            StatusCode::NO_CONTENT.into_response()
        }
        None => not_found(id),
    }
}

async fn frames(State(state): State<Arc<AppState>>, Path(id): Path<u64>, ws: WebSocketUpgrade) -> Response {
    let Some((commands, rx)) = state.handle(id) else {
        return not_found(id);
    };
    ws.on_upgrade(move |socket| stream(socket, commands, rx))
}

fn text(message: &ServerText) -> Message {
    Message::Text(serde_json::to_string(message).expect("serializable").into())
}

async fn stream(socket: WebSocket, commands: mpsc::Sender<Command>, mut frames: watch::Receiver<Arc<Frame>>) {
    let (mut sink, mut incoming) = socket.split();
    let mut sent_version = None;
    frames.mark_changed();
    loop {
        tokio::select! {
            changed = frames.changed() => {
                if changed.is_err() {
                    break;
                }
                let frame = frames.borrow_and_update().clone();
                let mut header = frame.header.clone();
                if sent_version != Some(header.ids_version) {
                    header.ids = Some(frame.ids.to_vec());
                    sent_version = Some(header.ids_version);
                }
                if sink.send(text(&ServerText::Frame(header))).await.is_err()
                    || sink.send(Message::Binary(frame.payload.to_vec().into())).await.is_err()
                {
                    break;
                }
            }
            message = incoming.next() => {
                let ack = match message {
                    Some(Ok(Message::Text(body))) => match serde_json::from_str::<Control>(&body) {
                        Ok(control) => match send_control(&commands, control).await {
                            Some(ack) => ack,
                            None => break,
                        },
                        Err(e) => {
                            let f = frames.borrow();
                            Ack {
                                ok: false,
                                reason: Some(e.to_string()),
                                iteration: f.header.iteration,
                                count: f.header.count,
                                eval: None,
                            }
                        }
                    },
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                if sink.send(text(&ServerText::Ack(ack))).await.is_err() {
                    break;
                }
            }
        }
    }
}

async fn index() -> Html<&'static str> {
    Html(INDEX)
}

const INDEX: &str = r#"<!doctype html>
<html><head><meta charset="utf-8"><title>ivhd</title></head>
<body>
<h1>ivhd sessions</h1>
<ul>
<li><code>POST /sessions</code> with a JSON config object creates a paused session</li>
<li><code>GET /sessions</code> lists sessions</li>
<li><code>POST /sessions/{id}/control</code> sends a control message</li>
<li><code>GET /sessions/{id}/frames</code> is the WebSocket frame stream</li>
<li><code>GET /sessions/{id}/snapshot.csv</code> returns the current embedding</li>
<li><code>DELETE /sessions/{id}</code> closes a session</li>
</ul>
</body></html>
"#;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/control", post(control))
        .route("/sessions/{id}/frames", get(frames))
        .route("/sessions/{id}/snapshot.csv", get(snapshot))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config))).await
}
