//! HTTP front end for engine sessions.
//!
//! | method | path                      | body / result                         |
//! |--------|---------------------------|---------------------------------------|
//! | POST   | `/sessions`               | `{id}`                                |
//! | POST   | `/sessions/{id}/command`  | `{text}` → [`CommandResponse`]        |
//! | GET    | `/sessions/{id}/network`  | [`NetworkSnapshot`]                   |
//! | GET    | `/sessions/{id}/events`   | server-sent events, one per [`Event`] |
//! | DELETE | `/sessions/{id}`          | closes the session and its streams    |
//!
//! Unknown sessions answer 404; commands that fail to parse or evaluate
//! answer 422 with an [`ErrorResponse`].

pub mod protocol;

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use hum_core::{Event, Session, SessionConfig};
use tokio::sync::{broadcast, Mutex, RwLock};

pub use protocol::{CommandRequest, CommandResponse, CreatedSession, ErrorResponse, NetworkSnapshot, Position};

const EVENT_BUFFER: usize = 1024;

struct Entry {
    session: Mutex<Session>,
    events: broadcast::Sender<Event>,
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Entry>>>>,
    next_id: Arc<AtomicU64>,
    config: SessionConfig,
}

impl AppState {
    pub fn new(config: SessionConfig) -> Self {
        AppState { sessions: Arc::default(), next_id: Arc::new(AtomicU64::new(1)), config }
    }

    async fn entry(&self, id: &str) -> Result<Arc<Entry>, Response> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| not_found(id))
    }
}

fn not_found(id: &str) -> Response {
    let body = ErrorResponse { ok: false, error: format!("no session {id}"), position: None };
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(close_session))
        .route("/sessions/{id}/command", post(command))
        .route("/sessions/{id}/network", get(network))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

async fn create_session(State(state): State<AppState>) -> (StatusCode, Json<CreatedSession>) {
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let (events, _) = broadcast::channel(EVENT_BUFFER);
    let entry = Entry { session: Mutex::new(Session::new(state.config.clone())), events };
    state.sessions.write().await.insert(id.clone(), Arc::new(entry));
    (StatusCode::CREATED, Json(CreatedSession { id }))
}

async fn close_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.sessions.write().await.remove(&id) {
        Some(_) => StatusCode::NO_CONTENT.into_response(),
        None => not_found(&id),
    }
}

async fn command(State(state): State<AppState>, Path(id): Path<String>, Json(req): Json<CommandRequest>) -> Response {
    let entry = match state.entry(&id).await {
        Ok(e) => e,
        Err(r) => return r,
    };
    // the lock is held while events are published so streams see them in
    // command order
    let mut session = entry.session.lock().await;
    match session.execute(&req.text) {
        Ok(outcome) => {
            for e in &outcome.events {
                let _ = entry.events.send(e.clone());
            }
            Json(CommandResponse::from(outcome)).into_response()
        }
        Err(e) => {
            let position = e.position().map(|(line, column)| Position { line, column });
            let body = ErrorResponse { ok: false, error: e.to_string(), position };
            (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response()
        }
    }
}

async fn network(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.entry(&id).await {
        Ok(entry) => Json(NetworkSnapshot::capture(&*entry.session.lock().await)).into_response(),
        Err(r) => r,
    }
}

async fn events(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.entry(&id).await {
        Ok(entry) => {
            let rx = entry.events.subscribe();
            drop(entry);
            Sse::new(event_stream(rx)).keep_alive(KeepAlive::default()).into_response()
        }
        Err(r) => r,
    }
}

/// Ends once the session is closed and its sender dropped.
fn event_stream(rx: broadcast::Receiver<Event>) -> impl Stream<Item = Result<axum::response::sse::Event, Infallible>> {
    stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(event) => {
                    let kind = match &event {
                        Event::LabelChanged { .. } => "label-changed",
                        Event::NogoodAdded { .. } => "nogood-added",
                        Event::Assuming { .. } => "assuming",
                        Event::Monitoring { .. } => "monitoring",
                        Event::Retracting { .. } => "retracting",
                    };
                    let sse =
                        axum::response::sse::Event::default().event(kind).json_data(&event).expect("events serialize");
                    return Some((Ok(sse), rx));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
}

/// Serves on `127.0.0.1:<port>` until the process is stopped.
pub async fn serve(port: u16, config: SessionConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    axum::serve(listener, router(AppState::new(config))).await
}
