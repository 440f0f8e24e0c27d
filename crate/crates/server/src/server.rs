//! WebSocket front end. One task owns the [`Session`]; connections talk to
//! it over channels, so the simulation never runs concurrently with itself.

use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use deskbench::envs::SocialNavScenario;
use deskbench::record::{write_jsonl, EpisodeRecord};
use futures_util::{SinkExt, StreamExt};
use tokio::sync::{mpsc, oneshot};
use tokio::time::{interval, Instant, MissedTickBehavior};

use crate::protocol::ServerMsg;
use crate::session::{ClientId, Session, DEFAULT_SNAPSHOT_HZ};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] deskbench::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Simulated seconds per wall second; 0 runs unpaced.
    pub pace: f64,
    pub snapshot_hz: f64,
    pub seed: u64,
    /// Finished episodes are appended here as JSONL.
    pub record_path: Option<PathBuf>,
    pub session_id: String,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            pace: 1.0,
            snapshot_hz: DEFAULT_SNAPSHOT_HZ,
            seed: 0,
            record_path: None,
            session_id: "session-0".into(),
        }
    }
}

enum Inbound {
    Connect(oneshot::Sender<ClientId>, mpsc::UnboundedSender<String>),
    Text(ClientId, String),
    Disconnect(ClientId),
}

pub struct ServerHandle {
    local_addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    sim: tokio::task::JoinHandle<Result<Vec<EpisodeRecord>, ServeError>>,
    http: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}/session", self.local_addr)
    }

    /// Stops the server and returns every episode record of the session,
    /// including the one in progress.
    pub async fn shutdown(mut self) -> Result<Vec<EpisodeRecord>, ServeError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let out = self.sim.await.expect("simulation task panicked");
        self.http.abort();
        out
    }
}

/// Binds `addr` and starts serving `/session`.
pub async fn serve(scenario: SocialNavScenario, addr: SocketAddr, opts: ServeOptions) -> Result<ServerHandle, ServeError> {
    let session = Session::new(opts.session_id.clone(), scenario, opts.seed)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
    let local_addr = listener.local_addr()?;
    let (tx, rx) = mpsc::unbounded_channel();
    let (stop_tx, stop_rx) = oneshot::channel();
    let sim = tokio::spawn(sim_loop(session, rx, stop_rx, opts));
    let app = Router::new().route("/session", get(upgrade)).with_state(tx);
    let http = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("http server stopped: {e}");
        }
    });
    log::info!("serving on ws://{local_addr}/session");
    Ok(ServerHandle {
        local_addr,
        shutdown: Some(stop_tx),
        sim,
        http,
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(tx): State<mpsc::UnboundedSender<Inbound>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, tx))
}

async fn connection(socket: WebSocket, tx: mpsc::UnboundedSender<Inbound>) {
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let (id_tx, id_rx) = oneshot::channel();
    if tx.send(Inbound::Connect(id_tx, out_tx)).is_err() {
        return;
    }
    let Ok(id) = id_rx.await else { return };
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(msg) = stream.next().await {
        match msg {
            Ok(Message::Text(t)) => {
                if tx.send(Inbound::Text(id, t.to_string())).is_err() {
                    break;
                }
            }
            Ok(Message::Binary(_)) => {
                let _ = tx.send(Inbound::Text(id, String::new()));
            }
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    let _ = tx.send(Inbound::Disconnect(id));
    writer.abort();
}

fn step_period(session: &Session, pace: f64) -> Option<Duration> {
    (pace > 0.0).then(|| Duration::from_secs_f64(session.env().scenario().dt / pace))
}

fn snapshot_period(hz: f64) -> Duration {
    Duration::from_secs_f64(1.0 / hz)
}

fn append_records(path: &Option<PathBuf>, records: &[EpisodeRecord]) -> Result<(), ServeError> {
    if let (Some(p), false) = (path, records.is_empty()) {
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
        f.write_all(write_jsonl(records)?.as_bytes())?;
    }
    Ok(())
}

async fn sim_loop(
    mut session: Session,
    mut rx: mpsc::UnboundedReceiver<Inbound>,
    mut stop: oneshot::Receiver<()>,
    opts: ServeOptions,
) -> Result<Vec<EpisodeRecord>, ServeError> {
    session.set_rate_hz(opts.snapshot_hz);
    let mut clients: HashMap<ClientId, mpsc::UnboundedSender<String>> = HashMap::new();
    let mut all = Vec::new();
    let step_every = step_period(&session, opts.pace);
    let mut step_timer = interval(step_every.unwrap_or(Duration::from_millis(1)));
    step_timer.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut rate = session.rate_hz();
    let mut snap_timer = interval(snapshot_period(rate));
    snap_timer.set_missed_tick_behavior(MissedTickBehavior::Delay);

    loop {
        tokio::select! {
            _ = &mut stop => break,
            msg = rx.recv() => match msg {
                None => break,
                Some(Inbound::Connect(reply, out)) => {
                    let (id, welcome) = session.connect();
                    let _ = out.send(welcome.to_text(session.snapshot_tick()));
                    clients.insert(id, out);
                    let _ = reply.send(id);
                }
                Some(Inbound::Text(id, text)) => {
                    for r in session.handle_text(id, &text) {
                        if let Some(out) = clients.get(&id) {
                            let _ = out.send(r.to_text(session.snapshot_tick()));
                        }
                    }
                    if session.rate_hz() != rate {
                        rate = session.rate_hz();
                        snap_timer = interval(snapshot_period(rate));
                        snap_timer.set_missed_tick_behavior(MissedTickBehavior::Delay);
                    }
                }
                Some(Inbound::Disconnect(id)) => {
                    session.disconnect(id);
                    clients.remove(&id);
                }
            },
            _ = step_timer.tick() => {
                if step_every.is_some() {
                    session.advance()?;
                } else {
                    // Unpaced: a bounded batch, then yield to the other arms.
                    let until = Instant::now() + Duration::from_millis(1);
                    while Instant::now() < until && session.advance()? {}
                }
                let done = session.take_finished();
                append_records(&opts.record_path, &done)?;
                all.extend(done);
            }
            _ = snap_timer.tick() => {
                let subs: Vec<ClientId> = session.subscribers().collect();
                if subs.is_empty() {
                    continue;
                }
                let snap = session.snapshot();
                let tick = snap.tick;
                let text = ServerMsg::Snapshot(Box::new(snap)).to_text(tick);
                for id in subs {
                    if let Some(out) = clients.get(&id) {
                        let _ = out.send(text.clone());
                    }
                }
            }
        }
    }
    session.close()?;
    let done = session.take_finished();
    append_records(&opts.record_path, &done)?;
    all.extend(done);
    Ok(all)
}
