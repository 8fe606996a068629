//! Live feed of labeled flows and alerts over websocket text frames.
//!
//! Server to client, one JSON object per frame:
//!
//! ```json
//! {"type":"flow","label":"Botnet","flow":{...}}
//! {"type":"alert","timestamp":"...","triggering_model_ids":["rf"],"severity":"botnet","flow":{...}}
//! {"type":"all_data","flows":[{"label":"Normal","flow":{...}}],"alerts":[...]}
//! ```
//!
//! Client to server: `get_all_data` (bare or as `{"type":"get_all_data"}`)
//! asks for the retained history, answered with one `all_data` frame.
//!
//! A hub thread owns the history and the client queues. Publishing never
//! blocks: a full hub queue drops the event, a full client queue drops the
//! client.

use std::collections::{HashMap, VecDeque};
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender, TryRecvError, TrySendError};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tungstenite::{Message, WebSocket};

use super::logs::{Alert, LabeledFlow};
use crate::workers::{self, CancelToken};

pub const FLOW_HISTORY: usize = 10_000;
pub const ALERT_HISTORY: usize = 1_000;
const HUB_QUEUE: usize = 65_536;
const CLIENT_QUEUE: usize = 4_096;
const POLL: Duration = Duration::from_millis(10);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("cannot bind {addr}: {detail}")]
    BindFailed { addr: String, detail: String },
    #[error("bad client request: {0}")]
    BadRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage {
    Flow(LabeledFlow),
    Alert(Alert),
    AllData { flows: Vec<LabeledFlow>, alerts: Vec<Alert> },
}

impl StreamMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stream messages serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientRequest {
    GetAllData,
}

#[derive(Deserialize)]
struct TypedRequest {
    #[serde(rename = "type")]
    kind: String,
}

pub fn parse_request(text: &str) -> Result<ClientRequest, StreamError> {
    let t = text.trim();
    let kind = if t.starts_with('{') {
        serde_json::from_str::<TypedRequest>(t)
            .map_err(|e| StreamError::BadRequest(e.to_string()))?
            .kind
    } else {
        t.to_string()
    };
    match kind.as_str() {
        "get_all_data" => Ok(ClientRequest::GetAllData),
        other => Err(StreamError::BadRequest(format!("unknown request {other:?}"))),
    }
}

enum HubMsg {
    Publish(StreamMessage),
    Join(u64, Sender<Arc<str>>),
    Leave(u64),
    Replay(u64),
}

/// Retained history, oldest first.
#[derive(Debug, Default)]
pub struct History {
    flows: VecDeque<LabeledFlow>,
    alerts: VecDeque<Alert>,
}

impl History {
    pub fn record(&mut self, m: &StreamMessage) {
        match m {
            StreamMessage::Flow(f) => {
                if self.flows.len() == FLOW_HISTORY {
                    self.flows.pop_front();
                }
                self.flows.push_back(f.clone());
            }
            StreamMessage::Alert(a) => {
                if self.alerts.len() == ALERT_HISTORY {
                    self.alerts.pop_front();
                }
                self.alerts.push_back(a.clone());
            }
            StreamMessage::AllData { .. } => {}
        }
    }

    pub fn snapshot(&self) -> StreamMessage {
        StreamMessage::AllData {
            flows: self.flows.iter().cloned().collect(),
            alerts: self.alerts.iter().cloned().collect(),
        }
    }
}

/// Non-blocking publishing handle.
#[derive(Clone)]
pub struct StreamSink {
    tx: Sender<HubMsg>,
    dropped: Arc<AtomicU64>,
}

impl StreamSink {
    pub fn publish(&self, m: StreamMessage) {
        if let Err(TrySendError::Full(_) | TrySendError::Disconnected(_)) = self.tx.try_send(HubMsg::Publish(m)) {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Events lost because the hub was saturated or gone.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

pub struct StreamServer {
    addr: SocketAddr,
    cancel: CancelToken,
    tx: Sender<HubMsg>,
    dropped: Arc<AtomicU64>,
    clients: Arc<AtomicUsize>,
    hub: Option<JoinHandle<()>>,
    acceptor: Option<JoinHandle<Vec<JoinHandle<()>>>>,
}

impl StreamServer {
    pub fn bind(addr: &str) -> Result<StreamServer, StreamError> {
        let bind_err = |e: io::Error| StreamError::BindFailed {
            addr: addr.to_string(),
            detail: e.to_string(),
        };
        let listener = TcpListener::bind(addr).map_err(bind_err)?;
        listener.set_nonblocking(true).map_err(bind_err)?;
        let local = listener.local_addr().map_err(bind_err)?;
        let cancel = CancelToken::new();
        let (tx, rx) = bounded(HUB_QUEUE);
        let clients = Arc::new(AtomicUsize::new(0));

        let hub = {
            let (cancel, clients) = (cancel.clone(), clients.clone());
            workers::spawn("stream-hub", move || run_hub(rx, cancel, clients)).map_err(bind_err)?
        };
        let acceptor = {
            let (cancel, tx) = (cancel.clone(), tx.clone());
            workers::spawn("stream-accept", move || accept_loop(listener, tx, cancel))
        };
        let acceptor = match acceptor {
            Ok(h) => h,
            Err(e) => {
                cancel.cancel();
                let _ = hub.join();
                return Err(bind_err(e));
            }
        };
        log::info!("stream server listening on {local}");
        Ok(StreamServer {
            addr: local,
            cancel,
            tx,
            dropped: Arc::new(AtomicU64::new(0)),
            clients,
            hub: Some(hub),
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn sink(&self) -> StreamSink {
        StreamSink {
            tx: self.tx.clone(),
            dropped: self.dropped.clone(),
        }
    }

    /// Clients currently registered with the hub.
    pub fn client_count(&self) -> usize {
        self.clients.load(Ordering::SeqCst)
    }

    /// Stops accepting, closes every client and joins all threads.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.cancel.cancel();
        if let Some(a) = self.acceptor.take() {
            for c in a.join().unwrap_or_default() {
                let _ = c.join();
            }
        }
        if let Some(h) = self.hub.take() {
            let _ = h.join();
        }
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn run_hub(rx: Receiver<HubMsg>, cancel: CancelToken, count: Arc<AtomicUsize>) {
    let mut history = History::default();
    let mut clients: HashMap<u64, Sender<Arc<str>>> = HashMap::new();
    let deliver = |clients: &mut HashMap<u64, Sender<Arc<str>>>, id: u64, text: Arc<str>| {
        if let Some(q) = clients.get(&id) {
            match q.try_send(text) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) => {
                    log::warn!("stream client {id} fell behind; disconnecting");
                    clients.remove(&id);
                }
                Err(TrySendError::Disconnected(_)) => {
                    clients.remove(&id);
                }
            }
        }
    };
    while !cancel.is_cancelled() {
        let msg = match rx.recv_timeout(POLL) {
            Ok(m) => m,
            Err(RecvTimeoutError::Timeout) => continue,
            Err(RecvTimeoutError::Disconnected) => break,
        };
        match msg {
            HubMsg::Publish(m) => {
                history.record(&m);
                let text: Arc<str> = m.to_json().into();
                let ids: Vec<u64> = clients.keys().copied().collect();
                for id in ids {
                    deliver(&mut clients, id, text.clone());
                }
            }
            HubMsg::Join(id, q) => {
                clients.insert(id, q);
            }
            HubMsg::Leave(id) => {
                clients.remove(&id);
            }
            HubMsg::Replay(id) => deliver(&mut clients, id, history.snapshot().to_json().into()),
        }
        count.store(clients.len(), Ordering::SeqCst);
    }
    count.store(0, Ordering::SeqCst);
}

fn accept_loop(listener: TcpListener, hub: Sender<HubMsg>, cancel: CancelToken) -> Vec<JoinHandle<()>> {
    let mut handles: Vec<JoinHandle<()>> = Vec::new();
    let mut next_id = 0u64;
    while !cancel.is_cancelled() {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_id += 1;
                let (id, hub, cancel) = (next_id, hub.clone(), cancel.clone());
                match workers::spawn("stream-client", move || serve_client(stream, id, hub, cancel)) {
                    Ok(h) => handles.push(h),
                    Err(e) => log::warn!("cannot serve {peer}: {e}"),
                }
                handles.retain(|h| !h.is_finished());
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                std::thread::sleep(POLL);
            }
        }
    }
    handles
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
}

fn serve_client(stream: TcpStream, id: u64, hub: Sender<HubMsg>, cancel: CancelToken) {
    let setup = stream
        .set_nonblocking(false)
        .and_then(|_| stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT)))
        .and_then(|_| stream.set_write_timeout(Some(Duration::from_secs(1))))
        .and_then(|_| stream.set_nodelay(true));
    if let Err(e) = setup {
        log::warn!("stream client {id}: {e}");
        return;
    }
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::debug!("stream client {id}: handshake failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(Duration::from_millis(2))).is_err() {
        return;
    }
    let (tx, rx) = bounded::<Arc<str>>(CLIENT_QUEUE);
    if hub.send(HubMsg::Join(id, tx)).is_err() {
        return;
    }
    let reason = client_loop(&mut ws, id, &rx, &hub, &cancel);
    log::debug!("stream client {id} closed: {reason}");
    let _ = ws.close(None);
    let _ = ws.flush();
    let _ = hub.try_send(HubMsg::Leave(id));
}

fn client_loop(
    ws: &mut WebSocket<TcpStream>,
    id: u64,
    rx: &Receiver<Arc<str>>,
    hub: &Sender<HubMsg>,
    cancel: &CancelToken,
) -> &'static str {
    loop {
        if cancel.is_cancelled() {
            return "server shutdown";
        }
        match rx.recv_timeout(POLL) {
            Ok(text) => {
                if ws.send(Message::text(text.to_string())).is_err() {
                    return "write failed";
                }
                loop {
                    match rx.try_recv() {
                        Ok(text) => {
                            if ws.send(Message::text(text.to_string())).is_err() {
                                return "write failed";
                            }
                        }
                        Err(TryRecvError::Empty) => break,
                        Err(TryRecvError::Disconnected) => return "dropped by hub",
                    }
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => return "dropped by hub",
        }
        match ws.read() {
            Ok(Message::Text(t)) => match parse_request(t.as_str()) {
                Ok(ClientRequest::GetAllData) => {
                    if hub.send(HubMsg::Replay(id)).is_err() {
                        return "hub gone";
                    }
                }
                Err(e) => log::debug!("stream client {id}: {e}"),
            },
            Ok(Message::Close(_)) => return "client closed",
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(_) => return "read failed",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests() {
        assert_eq!(parse_request("get_all_data").unwrap(), ClientRequest::GetAllData);
        assert_eq!(parse_request(r#"{"type":"get_all_data"}"#).unwrap(), ClientRequest::GetAllData);
        assert!(parse_request("get_everything").is_err());
        assert!(parse_request("{").is_err());
    }

    #[test]
    fn history_is_capped() {
        let mut h = History::default();
        let flow = StreamMessage::Flow(LabeledFlow {
            label: crate::flow::LabelClass::Normal,
            flow: Default::default(),
        });
        for _ in 0..FLOW_HISTORY + 5 {
            h.record(&flow);
        }
        assert_eq!(h.flows.len(), FLOW_HISTORY);
        let StreamMessage::AllData { flows, alerts } = h.snapshot() else { panic!() };
        assert_eq!((flows.len(), alerts.len()), (FLOW_HISTORY, 0));
    }

    #[test]
    fn bind_failure() {
        let a = StreamServer::bind("127.0.0.1:0").unwrap();
        let taken = a.local_addr().to_string();
        assert!(matches!(StreamServer::bind(&taken), Err(StreamError::BindFailed { .. })));
        a.shutdown();
        assert!(matches!(StreamServer::bind("256.0.0.1:1"), Err(StreamError::BindFailed { .. })));
    }
}
