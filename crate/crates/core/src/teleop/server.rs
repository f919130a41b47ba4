use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

use super::protocol::{parse_command, Command, CommandError, Snapshot};
use super::session::{Session, SessionConfig};
use super::TeleopError;
use crate::scene::bundled_scene_names;

const SNAPSHOT_BUFFER: usize = 64;
const COMMAND_BUFFER: usize = 256;

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    pub session: SessionConfig,
    /// Stream the session log here.
    pub record: Option<PathBuf>,
}

struct Request {
    command: Command,
    reply: oneshot::Sender<Result<(), String>>,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::Sender<Request>,
    snapshots: broadcast::Sender<Snapshot>,
    latest: watch::Receiver<Snapshot>,
    controller_taken: Arc<AtomicBool>,
}

/// A running server; dropping it does not stop the server, call
/// [`ServerHandle::shutdown`].
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    server: JoinHandle<()>,
    sim: JoinHandle<Result<(), TeleopError>>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) -> Result<(), TeleopError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        let _ = self.server.await;
        self.sim.await.map_err(|e| TeleopError::InvalidConfig(e.to_string()))?
    }
}

/// Owns the session: applies queued commands at tick boundaries and
/// publishes snapshots. Physics never waits on observers: the broadcast
/// channel overwrites frames a slow observer has not read yet.
async fn sim_loop(
    mut session: Session,
    mut requests: mpsc::Receiver<Request>,
    snapshots: broadcast::Sender<Snapshot>,
    latest: watch::Sender<Snapshot>,
    mut stop: watch::Receiver<bool>,
) -> Result<(), TeleopError> {
    let period = Duration::from_secs_f64(session.config().tick_dt());
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    loop {
        tokio::select! {
            _ = interval.tick() => {}
            _ = stop.changed() => break,
        }
        while let Ok(req) = requests.try_recv() {
            let result = session.submit(req.command).map_err(|e| e.to_string());
            let _ = req.reply.send(result);
        }
        if let Some(snap) = session.tick()? {
            latest.send_replace(snap.clone());
            let _ = snapshots.send(snap);
        }
    }
    session.finish_recording()
}

/// Binds the routes on `listener` and starts the simulation loop.
pub async fn start_server(listener: TcpListener, options: ServerOptions) -> Result<ServerHandle, TeleopError> {
    let mut session = Session::new(options.session)?;
    if let Some(path) = &options.record {
        session.record_to(BufWriter::new(File::create(path)?))?;
    }
    let addr = listener.local_addr()?;
    let (cmd_tx, cmd_rx) = mpsc::channel(COMMAND_BUFFER);
    let (snap_tx, _) = broadcast::channel(SNAPSHOT_BUFFER);
    let (latest_tx, latest_rx) = watch::channel(session.snapshot());
    let (stop_tx, stop_rx) = watch::channel(false);

    let sim = tokio::spawn(sim_loop(session, cmd_rx, snap_tx.clone(), latest_tx, stop_rx.clone()));
    let state = AppState {
        commands: cmd_tx,
        snapshots: snap_tx,
        latest: latest_rx,
        controller_taken: Arc::new(AtomicBool::new(false)),
    };
    let app = Router::new()
        .route("/session", get(session_ws))
        .route("/state", get(current_state))
        .route("/scenes", get(list_scenes))
        .with_state(state);

    let (stop_once, stop_signal) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let shutdown = async move {
            let _ = stop_signal.await;
            let _ = stop_tx.send(true);
        };
        let _ = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    });
    Ok(ServerHandle {
        addr,
        stop: Some(stop_once),
        server,
        sim,
    })
}

/// Serves on `port` until Ctrl-C.
pub async fn serve(port: u16, options: ServerOptions) -> Result<(), TeleopError> {
    let listener = TcpListener::bind(("0.0.0.0", port)).await?;
    let handle = start_server(listener, options).await?;
    eprintln!("teleop server listening on {}", handle.addr);
    tokio::signal::ctrl_c().await?;
    handle.shutdown().await
}

async fn current_state(State(state): State<AppState>) -> Json<Snapshot> {
    Json(state.latest.borrow().clone())
}

async fn list_scenes() -> Json<Vec<&'static str>> {
    Json(bundled_scene_names())
}

async fn session_ws(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

fn error_message(seq: Option<u64>, error: String) -> Message {
    Message::Text(serde_json::to_string(&CommandError { seq, error }).expect("errors serialize").into())
}

/// The first client to connect controls the robot; later ones observe until
/// the controller disconnects.
async fn client(socket: WebSocket, state: AppState) {
    let controller = state
        .controller_taken
        .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
        .is_ok();
    let mut frames = state.snapshots.subscribe();
    let (mut tx, mut rx) = socket.split();
    let mut dropped = 0u64;
    loop {
        tokio::select! {
            msg = rx.next() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match parse_command(&text) {
                    Err(e) => Some(error_message(None, e.to_string())),
                    Ok(cmd) if !controller => Some(error_message(Some(cmd.seq), "another client controls this session".into())),
                    Ok(cmd) => {
                        let seq = cmd.seq;
                        let (reply_tx, reply_rx) = oneshot::channel();
                        if state.commands.send(Request { command: cmd, reply: reply_tx }).await.is_err() {
                            break;
                        }
                        match reply_rx.await {
                            Ok(Ok(())) => None,
                            Ok(Err(e)) => Some(error_message(Some(seq), e)),
                            Err(_) => break,
                        }
                    }
                };
                if let Some(m) = reply {
                    if tx.send(m).await.is_err() {
                        break;
                    }
                }
            }
            frame = frames.recv() => match frame {
                Ok(mut snap) => {
                    snap.dropped = std::mem::take(&mut dropped);
                    if tx.send(Message::Text(snap.to_json().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => dropped += n,
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    if controller {
        state.controller_taken.store(false, Ordering::Release);
    }
}
