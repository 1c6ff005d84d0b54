//! WebSocket transport: one controller at a time, any number of observers.
//!
//! The controller's messages are read ahead into two lanes. E-stops take
//! the priority lane and are handled before any queued frame; the server
//! clock ticks the simulator between messages.

use std::future::Future;
use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::stream::{SplitSink, SplitStream};
use futures::{SinkExt, StreamExt};
use gestgait_core::config::{ConfigError, EngineConfig};
use gestgait_core::engine::Engine;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};
use tokio::time::MissedTickBehavior;

use crate::protocol::{Envelope, ErrorCode, Hello, Role, SessionMsg, TelemetryMsg};
use crate::session::ControlSession;

/// Path the WebSocket endpoint is served on.
pub const WS_PATH: &str = "/ws";
const HUB_CAPACITY: usize = 1024;
const FRAME_QUEUE: usize = 256;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

struct Shared {
    cfg: EngineConfig,
    controller: Mutex<Option<u64>>,
    next_conn: AtomicU64,
    hub: broadcast::Sender<TelemetryMsg>,
    clock: Instant,
    tick: Duration,
}

impl Shared {
    fn now_ms(&self) -> f64 {
        self.clock.elapsed().as_secs_f64() * 1e3
    }

    fn claim(self: &Arc<Self>, id: u64) -> Option<Lease> {
        let mut held = self.controller.lock().expect("controller lock");
        if held.is_some() {
            return None;
        }
        *held = Some(id);
        Some(Lease {
            shared: Arc::clone(self),
            id,
        })
    }
}

/// The controller role, released when dropped.
struct Lease {
    shared: Arc<Shared>,
    id: u64,
}

impl Drop for Lease {
    fn drop(&mut self) {
        let mut held = self.shared.controller.lock().expect("controller lock");
        if *held == Some(self.id) {
            *held = None;
        }
    }
}

/// Builds the router. The configuration must already be known to produce
/// a working engine; see [`serve`].
pub fn router(cfg: EngineConfig) -> Router {
    let tick = Duration::from_secs_f64(1.0 / cfg.sim.tick_rate_hz);
    let shared = Arc::new(Shared {
        cfg,
        controller: Mutex::new(None),
        next_conn: AtomicU64::new(0),
        hub: broadcast::channel(HUB_CAPACITY).0,
        clock: Instant::now(),
        tick,
    });
    Router::new().route(WS_PATH, get(upgrade)).with_state(shared)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    cfg: EngineConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    Engine::new(&cfg)?;
    tracing::info!(addr = %listener.local_addr()?, path = WS_PATH, "listening");
    axum::serve(listener, router(cfg))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, shared))
}

enum Incoming {
    Msg(SessionMsg),
    Malformed(String),
}

/// Next client message; `None` once the socket closes.
async fn next_incoming(stream: &mut SplitStream<WebSocket>) -> Option<Incoming> {
    loop {
        let msg = match stream.next().await? {
            Ok(m) => m,
            Err(e) => {
                tracing::debug!(error = %e, "socket error");
                return None;
            }
        };
        return Some(match msg {
            Message::Text(text) => match serde_json::from_str(text.as_str()) {
                Ok(m) => Incoming::Msg(m),
                Err(e) => Incoming::Malformed(e.to_string()),
            },
            Message::Binary(_) => Incoming::Malformed("binary messages are not supported".into()),
            Message::Close(_) => return None,
            Message::Ping(_) | Message::Pong(_) => continue,
        });
    }
}

async fn write_loop(mut sink: SplitSink<WebSocket, Message>, mut rx: mpsc::UnboundedReceiver<TelemetryMsg>) {
    let mut seq = 0;
    while let Some(msg) = rx.recv().await {
        let text = match serde_json::to_string(&Envelope { seq, msg }) {
            Ok(t) => t,
            Err(e) => {
                tracing::error!(error = %e, "cannot serialise telemetry");
                continue;
            }
        };
        seq += 1;
        if sink.send(Message::Text(text.into())).await.is_err() {
            return;
        }
    }
    let _ = sink.send(Message::Close(None)).await;
}

type Outbox = mpsc::UnboundedSender<TelemetryMsg>;

fn send(out: &Outbox, msg: TelemetryMsg) {
    // the writer only stops when the socket is gone; nothing to report then
    let _ = out.send(msg);
}

async fn connection(socket: WebSocket, shared: Arc<Shared>) {
    let id = shared.next_conn.fetch_add(1, Ordering::Relaxed);
    let (sink, mut stream) = socket.split();
    let (out, rx) = mpsc::unbounded_channel();
    let writer = tokio::spawn(write_loop(sink, rx));
    tracing::debug!(id, "connected");

    while let Some(incoming) = next_incoming(&mut stream).await {
        match incoming {
            Incoming::Malformed(d) => send(&out, TelemetryMsg::error(ErrorCode::Malformed, d)),
            Incoming::Msg(SessionMsg::Hello(h)) if h.role == Role::Observer => {
                // subscribe first so nothing after the reply is missed
                let hub = shared.hub.subscribe();
                send(&out, TelemetryMsg::Joined { role: Role::Observer });
                observe(stream, hub, &out).await;
                break;
            }
            Incoming::Msg(SessionMsg::Hello(h)) => match shared.claim(id) {
                Some(lease) => match control(h, stream, &out, &shared).await {
                    // hello refused; the connection may try again
                    Some(s) => {
                        stream = s;
                        drop(lease);
                    }
                    None => break,
                },
                None => send(
                    &out,
                    TelemetryMsg::error(ErrorCode::ControllerBusy, "another connection holds the controller role"),
                ),
            },
            Incoming::Msg(SessionMsg::Bye) => break,
            Incoming::Msg(_) => send(&out, TelemetryMsg::error(ErrorCode::ProtocolOrder, "hello first")),
        }
    }
    drop(out);
    let _ = writer.await;
    tracing::debug!(id, "disconnected");
}

async fn observe(
    mut stream: SplitStream<WebSocket>,
    mut hub: broadcast::Receiver<TelemetryMsg>,
    out: &Outbox,
) {
    loop {
        tokio::select! {
            msg = hub.recv() => match msg {
                Ok(m) => send(out, m),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(skipped = n, "observer fell behind");
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = next_incoming(&mut stream) => match incoming {
                None | Some(Incoming::Msg(SessionMsg::Bye)) => return,
                Some(Incoming::Malformed(d)) => send(out, TelemetryMsg::error(ErrorCode::Malformed, d)),
                Some(Incoming::Msg(_)) => {
                    send(out, TelemetryMsg::error(ErrorCode::ProtocolOrder, "observers cannot send commands"))
                }
            },
        }
    }
}

/// Sends to the controller and fans out to observers. Errors concern only
/// the controller's own messages and are not fanned out.
fn emit(out: &Outbox, hub: &broadcast::Sender<TelemetryMsg>, msgs: Vec<TelemetryMsg>) {
    for m in msgs {
        if !matches!(m, TelemetryMsg::Error { .. }) {
            let _ = hub.send(m.clone());
        }
        send(out, m);
    }
}

/// Runs a controller session until bye or disconnect. Hands the stream
/// back if the hello is refused.
async fn control(
    hello: Hello,
    mut stream: SplitStream<WebSocket>,
    out: &Outbox,
    shared: &Shared,
) -> Option<SplitStream<WebSocket>> {
    let mut session = match ControlSession::new(&shared.cfg) {
        Ok(s) => s,
        Err(e) => {
            send(out, TelemetryMsg::error(ErrorCode::Internal, e.to_string()));
            return None;
        }
    };
    emit(out, &shared.hub, session.process(SessionMsg::Hello(hello), shared.now_ms()));
    if !session.is_open() {
        return Some(stream);
    }

    let (estop_tx, mut estop_rx) = mpsc::unbounded_channel::<()>();
    let (queue_tx, mut queue_rx) = mpsc::channel::<Incoming>(FRAME_QUEUE);
    let reader = tokio::spawn(async move {
        while let Some(incoming) = next_incoming(&mut stream).await {
            let sent = match incoming {
                Incoming::Msg(SessionMsg::Estop) => estop_tx.send(()).is_ok(),
                other => queue_tx.send(other).await.is_ok(),
            };
            if !sent {
                return;
            }
        }
    });

    let mut ticker = tokio::time::interval(shared.tick);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    loop {
        tokio::select! {
            biased;
            Some(()) = estop_rx.recv() => {
                emit(out, &shared.hub, session.process(SessionMsg::Estop, shared.now_ms()));
            }
            item = queue_rx.recv() => match item {
                None => break,
                Some(Incoming::Malformed(d)) => send(out, TelemetryMsg::error(ErrorCode::Malformed, d)),
                Some(Incoming::Msg(m)) => {
                    emit(out, &shared.hub, session.process(m, shared.now_ms()));
                    if session.is_closed() {
                        break;
                    }
                }
            },
            _ = ticker.tick() => {
                emit(out, &shared.hub, session.tick(shared.now_ms()));
            }
        }
    }
    reader.abort();
    None
}
