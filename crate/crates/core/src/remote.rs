//! Black-box adapter over a byte stream: a model can live in another
//! process and still be driven through the same interaction engine.
//!
//! The wire format is newline-delimited JSON with base64 payloads, one
//! session per connection. The server derives each session's response
//! stream from its seed the same way the in-process estimator derives the
//! black box's stream for the matching trial, so a remote run reproduces an
//! in-process run byte for byte at equal seeds.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::{RandomSource, StreamRng, ARM_MODEL, ROLE_BOX, TAG_ARM, TAG_ROLE, TAG_TRIAL};
use crate::types::{CodecPair, Model, Query, Response};

pub const PROTOCOL_VERSION: u32 = 1;

/// Error codes carried by wire-level `error` messages.
pub mod code {
    pub const BAD_PAYLOAD: &str = "BAD_PAYLOAD";
    pub const BAD_VERSION: &str = "BAD_VERSION";
    pub const BAD_CODEC: &str = "BAD_CODEC";
    pub const BAD_ID: &str = "BAD_ID";
    pub const UNSUPPORTED_QUERY: &str = "UNSUPPORTED_QUERY";
    pub const BAD_MESSAGE: &str = "BAD_MESSAGE";
    pub const INTERNAL: &str = "INTERNAL";
}

/// One line of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireMessage {
    Hello { protocol_version: u32, codec: String },
    Query { id: u64, x: String },
    Response { id: u64, y: String },
    Error { id: Option<u64>, code: String, detail: String },
    Bye,
}

/// Label under which a codec pair travels in the handshake.
pub fn codec_label(codec: &CodecPair) -> String {
    format!("{}/{}", codec.query.name(), codec.response.name())
}

pub enum Transport {
    Stdio,
    /// Bind address, e.g. "127.0.0.1:4141".
    Tcp(String),
}

fn send(writer: &mut impl Write, msg: &WireMessage) -> std::io::Result<()> {
    let mut line = serde_json::to_string(msg).expect("wire messages serialize");
    line.push('\n');
    writer.write_all(line.as_bytes())?;
    writer.flush()
}

fn session_rng(seed: u64, session: u64) -> StreamRng {
    RandomSource::new(seed)
        .child(TAG_ARM, ARM_MODEL)
        .child(TAG_TRIAL, session)
        .child(TAG_ROLE, ROLE_BOX)
        .rng()
}

/// Serve `g` until `max_sessions` sessions complete (forever when `None`).
/// Session k answers with the stream the in-process estimator would hand
/// the black box on model-arm trial k under master seed `seed`.
pub fn serve_model(
    g: &dyn Model,
    codec: CodecPair,
    transport: Transport,
    seed: u64,
    max_sessions: Option<u64>,
) -> Result<()> {
    match transport {
        Transport::Stdio => {
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            let mut reader = BufReader::new(stdin.lock());
            let mut writer = stdout.lock();
            run_session(&mut reader, &mut writer, g, &codec, session_rng(seed, 0))?;
            Ok(())
        }
        Transport::Tcp(addr) => {
            let listener = TcpListener::bind(&addr)?;
            serve_on_listener(g, codec, listener, seed, max_sessions)
        }
    }
}

/// TCP serving loop over an already-bound listener; lets callers learn the
/// ephemeral port before the server starts.
pub fn serve_on_listener(
    g: &dyn Model,
    codec: CodecPair,
    listener: TcpListener,
    seed: u64,
    max_sessions: Option<u64>,
) -> Result<()> {
    let mut session = 0u64;
    loop {
        if let Some(limit) = max_sessions {
            if session >= limit {
                return Ok(());
            }
        }
        let (stream, _) = listener.accept()?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = stream;
        // A failed session (disconnect, handshake error) still consumes its
        // session index: the client-side trial consumed it too.
        if let Err(err) = run_session(&mut reader, &mut writer, g, &codec, session_rng(seed, session))
        {
            log::warn!("session {session} ended with error: {err}");
        }
        session += 1;
    }
}

fn run_session(
    reader: &mut impl BufRead,
    writer: &mut impl Write,
    g: &dyn Model,
    codec: &CodecPair,
    mut rng: StreamRng,
) -> Result<()> {
    let mut line = String::new();

    macro_rules! refuse {
        ($id:expr, $code:expr, $($detail:tt)*) => {{
            send(writer, &WireMessage::Error {
                id: $id,
                code: $code.to_string(),
                detail: format!($($detail)*),
            })?;
        }};
    }

    // Handshake.
    if reader.read_line(&mut line)? == 0 {
        return Ok(());
    }
    match serde_json::from_str::<WireMessage>(&line) {
        Ok(WireMessage::Hello { protocol_version, codec: wire_codec }) => {
            if protocol_version != PROTOCOL_VERSION {
                refuse!(None, code::BAD_VERSION, "server speaks version {PROTOCOL_VERSION}");
                return Ok(());
            }
            let label = codec_label(codec);
            if wire_codec != label {
                refuse!(None, code::BAD_CODEC, "server codec is {label}");
                return Ok(());
            }
            send(writer, &WireMessage::Hello { protocol_version: PROTOCOL_VERSION, codec: label })?;
        }
        Ok(_) => {
            refuse!(None, code::BAD_MESSAGE, "expected hello");
            return Ok(());
        }
        Err(err) => {
            refuse!(None, code::BAD_MESSAGE, "unparseable hello: {err}");
            return Ok(());
        }
    }

    let mut last_id = 0u64;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let msg = match serde_json::from_str::<WireMessage>(&line) {
            Ok(msg) => msg,
            Err(err) => {
                // Framing is untrustworthy past an unparseable line; end the session.
                refuse!(None, code::BAD_MESSAGE, "unparseable message: {err}");
                return Ok(());
            }
        };
        match msg {
            WireMessage::Bye => return Ok(()),
            WireMessage::Query { id, x } => {
                if id <= last_id {
                    refuse!(Some(id), code::BAD_ID, "ids must increase; last was {last_id}");
                    continue;
                }
                last_id = id;
                let bytes = match BASE64.decode(x.as_bytes()) {
                    Ok(bytes) => bytes,
                    Err(err) => {
                        refuse!(Some(id), code::BAD_PAYLOAD, "base64: {err}");
                        continue;
                    }
                };
                if !codec.query.validates(&bytes) {
                    refuse!(
                        Some(id),
                        code::BAD_PAYLOAD,
                        "payload invalid under codec {}",
                        codec.query.name()
                    );
                    continue;
                }
                match g.respond(&Query(bytes), &mut rng) {
                    Ok(y) => send(
                        writer,
                        &WireMessage::Response { id, y: BASE64.encode(&y.0) },
                    )?,
                    Err(Error::UnsupportedQuery(detail)) => {
                        refuse!(Some(id), code::UNSUPPORTED_QUERY, "{detail}")
                    }
                    Err(err) => refuse!(Some(id), code::INTERNAL, "{err}"),
                }
            }
            other => {
                refuse!(None, code::BAD_MESSAGE, "unexpected {other:?} mid-session");
                return Ok(());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Client

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

struct RemoteState {
    conn: Option<Connection>,
    next_id: u64,
}

/// A model living behind a TCP endpoint. Each interaction session is one
/// connection; `respond` performs one query/response round-trip. Transport
/// problems surface as black-box failures so trials record them as errors.
pub struct RemoteModel {
    addr: String,
    timeout: Duration,
    codec: CodecPair,
    state: Mutex<RemoteState>,
}

/// Handle to a served model. The connection itself is opened per session.
pub fn connect_model(addr: impl Into<String>, timeout: Duration, codec: CodecPair) -> RemoteModel {
    RemoteModel {
        addr: addr.into(),
        timeout,
        codec,
        state: Mutex::new(RemoteState { conn: None, next_id: 1 }),
    }
}

impl RemoteModel {
    fn open(&self) -> Result<Connection> {
        let addrs: Vec<_> = self
            .addr
            .to_socket_addrs()
            .map_err(|err| Error::BlackBoxFailure(format!("resolve {}: {err}", self.addr)))?
            .collect();
        let addr = addrs
            .first()
            .ok_or_else(|| Error::BlackBoxFailure(format!("{} resolves to nothing", self.addr)))?;
        let stream = TcpStream::connect_timeout(addr, self.timeout)
            .map_err(|err| Error::BlackBoxFailure(format!("connect {}: {err}", self.addr)))?;
        stream.set_read_timeout(Some(self.timeout)).map_err(Error::Io)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(Error::Io)?;
        let reader = BufReader::new(stream.try_clone().map_err(Error::Io)?);
        let mut conn = Connection { reader, writer: stream };

        send(
            &mut conn.writer,
            &WireMessage::Hello {
                protocol_version: PROTOCOL_VERSION,
                codec: codec_label(&self.codec),
            },
        )
        .map_err(|err| Error::BlackBoxFailure(format!("handshake write: {err}")))?;
        match read_message(&mut conn.reader)? {
            WireMessage::Hello { protocol_version: PROTOCOL_VERSION, .. } => Ok(conn),
            WireMessage::Hello { protocol_version, .. } => Err(Error::BlackBoxFailure(format!(
                "server speaks protocol {protocol_version}, not {PROTOCOL_VERSION}"
            ))),
            WireMessage::Error { code, detail, .. } => {
                Err(Error::BlackBoxFailure(format!("handshake refused: {code}: {detail}")))
            }
            other => Err(Error::BlackBoxFailure(format!("unexpected handshake reply {other:?}"))),
        }
    }
}

fn read_message(reader: &mut BufReader<TcpStream>) -> Result<WireMessage> {
    let mut line = String::new();
    let n = reader
        .read_line(&mut line)
        .map_err(|err| Error::BlackBoxFailure(format!("read: {err}")))?;
    if n == 0 {
        return Err(Error::BlackBoxFailure("server closed the connection".into()));
    }
    serde_json::from_str(&line)
        .map_err(|err| Error::BlackBoxFailure(format!("unparseable server message: {err}")))
}

impl Model for RemoteModel {
    fn name(&self) -> String {
        format!("remote[{}]", self.addr)
    }

    fn begin_session(&self) -> Result<()> {
        let mut state = self.state.lock().expect("remote state lock");
        state.conn = Some(self.open()?);
        state.next_id = 1;
        Ok(())
    }

    fn end_session(&self) -> Result<()> {
        let mut state = self.state.lock().expect("remote state lock");
        if let Some(mut conn) = state.conn.take() {
            // Best effort: the verdict is already in, so a lost bye is harmless.
            let _ = send(&mut conn.writer, &WireMessage::Bye);
        }
        Ok(())
    }

    fn respond(&self, x: &Query, _rng: &mut StreamRng) -> Result<Response> {
        let mut state = self.state.lock().expect("remote state lock");
        if state.conn.is_none() {
            state.conn = Some(self.open()?);
            state.next_id = 1;
        }
        let id = state.next_id;
        state.next_id += 1;
        let conn = state.conn.as_mut().expect("connection just ensured");
        send(&mut conn.writer, &WireMessage::Query { id, x: BASE64.encode(&x.0) })
            .map_err(|err| Error::BlackBoxFailure(format!("query write: {err}")))?;
        match read_message(&mut conn.reader)? {
            WireMessage::Response { id: got, y } => {
                if got != id {
                    return Err(Error::BlackBoxFailure(format!(
                        "response id {got} does not match query id {id}"
                    )));
                }
                let bytes = BASE64
                    .decode(y.as_bytes())
                    .map_err(|err| Error::BlackBoxFailure(format!("response base64: {err}")))?;
                Ok(Response(bytes))
            }
            WireMessage::Error { code, detail, .. } => {
                Err(Error::BlackBoxFailure(format!("{code}: {detail}")))
            }
            other => Err(Error::BlackBoxFailure(format!("unexpected reply {other:?}"))),
        }
    }
}
