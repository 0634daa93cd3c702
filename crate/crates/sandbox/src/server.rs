//! WebSocket endpoint at `/ws`, one [`Session`] per connection, plus
//! optional static file serving for the UI's dev build.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

use sew_core::ArmPair;

use crate::protocol::{ErrorMsg, ServerMessage, PROTOCOL_VERSION};
use crate::session::Session;

pub const DEFAULT_PORT: u16 = 8765;
pub const PORT_ENV: &str = "SEW_SANDBOX_PORT";

#[derive(Clone)]
struct AppState {
    pair: Arc<ArmPair>,
}

/// Routes: `/ws` for sessions; every other path is looked up in
/// `static_dir` when one is given.
pub fn router(pair: Arc<ArmPair>, static_dir: Option<PathBuf>) -> Router {
    let app = Router::new()
        .route("/ws", get(upgrade))
        .with_state(AppState { pair });
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(listener: TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| run_session(socket, state.pair))
}

/// Handles one message at a time, so replies keep request order.
async fn run_session(mut socket: WebSocket, pair: Arc<ArmPair>) {
    let mut session = Session::new(pair);
    while let Some(Ok(msg)) = socket.recv().await {
        let reply = match msg {
            Message::Text(text) => session.handle_text(text.as_str()),
            Message::Binary(_) => ServerMessage::Error(ErrorMsg {
                version: PROTOCOL_VERSION,
                seq: None,
                message: "binary frames are not supported".into(),
            }),
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        let text = match serde_json::to_string(&reply) {
            Ok(t) => t,
            Err(e) => format!(
                r#"{{"type":"error","version":{PROTOCOL_VERSION},"seq":null,"message":"{e}"}}"#
            ),
        };
        if socket.send(Message::Text(text.into())).await.is_err() {
            break;
        }
    }
}
