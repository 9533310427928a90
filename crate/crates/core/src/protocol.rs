//! Wire protocol between the operator console and the local-site simulator.
//!
//! Every message is an [`Envelope`] encoded as one line of canonical JSON:
//! keys sorted, no insignificant whitespace, LF-terminated. Three channels
//! carry fixed payload kinds:
//!
//! | channel     | kinds                                              |
//! |-------------|----------------------------------------------------|
//! | `ctrl`      | `drive_keys`, `pan_tilt`, `click`                  |
//! | `telemetry` | `tracker_pose`, `indicator_state`, `robot_status`  |
//! | `event`     | `tap`, `gesture_ref`, `session_ctl`                |
//!
//! [`LinkModel`] simulates one direction of the network: a seeded drop
//! decision, fixed delay plus uniform jitter, and per-channel FIFO.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::awareness::{IndicatorMode, MovementState, PartnerIndicator};
use crate::geometry::FloorRay;
use crate::geometry::Point2;
use crate::kinematics::{DriveCommand, TapSide};
use crate::sharedref::{PointingReference, ReferenceSource};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("non-finite number in {0} payload")]
    NonFinite(&'static str),
    #[error("malformed message: {0}")]
    Parse(String),
    #[error("unsupported protocol element: {0}")]
    Version(String),
    #[error("payload kind {kind} not allowed on channel {channel}")]
    ChannelMismatch { channel: Channel, kind: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Ctrl,
    Telemetry,
    Event,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Ctrl, Channel::Telemetry, Channel::Event];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Ctrl => "ctrl",
            Channel::Telemetry => "telemetry",
            Channel::Event => "event",
        }
    }

    fn parse(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveKeys {
    #[serde(rename = "W")]
    pub w: bool,
    #[serde(rename = "A")]
    pub a: bool,
    #[serde(rename = "S")]
    pub s: bool,
    #[serde(rename = "D")]
    pub d: bool,
}

impl DriveKeys {
    pub fn command(&self) -> DriveCommand {
        DriveCommand::from_keys(self.w, self.a, self.s, self.d)
    }

    /// Canonical key state for a drive command (one key per axis).
    pub fn for_command(cmd: DriveCommand) -> Self {
        Self {
            w: cmd.forward() > 0,
            s: cmd.forward() < 0,
            a: cmd.turn() > 0,
            d: cmd.turn() < 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanTilt {
    pub pan: f64,
    pub tilt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Click {
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackedEntity {
    Robot,
    Partner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerPose {
    pub entity: TrackedEntity,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Wire form of [`PartnerIndicator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorState {
    pub view: IndicatorMode,
    pub distance: f64,
    pub movement: MovementState,
}

impl From<PartnerIndicator> for IndicatorState {
    fn from(p: PartnerIndicator) -> Self {
        Self {
            view: p.mode,
            distance: p.distance,
            movement: p.movement,
        }
    }
}

impl From<IndicatorState> for PartnerIndicator {
    fn from(s: IndicatorState) -> Self {
        Self {
            mode: s.view,
            distance: s.distance,
            movement: s.movement,
        }
    }
}

/// Robot-side state the console needs besides poses. `echo_ms` is the
/// `sim_time` of the last control message applied, for round-trip timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotStatus {
    pub pan: f64,
    pub tilt: f64,
    pub rotating: bool,
    pub echo_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tap {
    pub side: TapSide,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureRef {
    pub source: ReferenceSource,
    pub origin_x: f64,
    pub origin_y: f64,
    pub azimuth: f64,
    pub extent: f64,
    pub created_at: f64,
    pub ttl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touch_line: Option<[[f64; 2]; 2]>,
}

impl From<&PointingReference> for GestureRef {
    fn from(r: &PointingReference) -> Self {
        Self {
            source: r.source,
            origin_x: r.ray.origin.x,
            origin_y: r.ray.origin.y,
            azimuth: r.ray.azimuth,
            extent: r.ray.extent,
            created_at: r.created_at,
            ttl: r.display_ttl,
            touch_line: r.touch_line.map(|[a, b]| [[a.x, a.y], [b.x, b.y]]),
        }
    }
}

impl GestureRef {
    pub fn reference(&self) -> PointingReference {
        PointingReference {
            source: self.source,
            ray: FloorRay::new(
                Point2::new(self.origin_x, self.origin_y),
                self.azimuth,
                self.extent,
                self.ttl,
            ),
            created_at: self.created_at,
            display_ttl: self.ttl,
            touch_line: self
                .touch_line
                .map(|[a, b]| [Point2::new(a[0], a[1]), Point2::new(b[0], b[1])]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionAction {
    Start,
    Complete,
    Timeout,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionCtl {
    pub action: SessionAction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    DriveKeys(DriveKeys),
    PanTilt(PanTilt),
    Click(Click),
    TrackerPose(TrackerPose),
    IndicatorState(IndicatorState),
    RobotStatus(RobotStatus),
    Tap(Tap),
    GestureRef(GestureRef),
    SessionCtl(SessionCtl),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::DriveKeys(_) => "drive_keys",
            Payload::PanTilt(_) => "pan_tilt",
            Payload::Click(_) => "click",
            Payload::TrackerPose(_) => "tracker_pose",
            Payload::IndicatorState(_) => "indicator_state",
            Payload::RobotStatus(_) => "robot_status",
            Payload::Tap(_) => "tap",
            Payload::GestureRef(_) => "gesture_ref",
            Payload::SessionCtl(_) => "session_ctl",
        }
    }

    pub fn channel(&self) -> Channel {
        match self {
            Payload::DriveKeys(_) | Payload::PanTilt(_) | Payload::Click(_) => Channel::Ctrl,
            Payload::TrackerPose(_) | Payload::IndicatorState(_) | Payload::RobotStatus(_) => {
                Channel::Telemetry
            }
            Payload::Tap(_) | Payload::GestureRef(_) | Payload::SessionCtl(_) => Channel::Event,
        }
    }

    fn to_value(self) -> Result<Value, serde_json::Error> {
        match self {
            Payload::DriveKeys(p) => serde_json::to_value(p),
            Payload::PanTilt(p) => serde_json::to_value(p),
            Payload::Click(p) => serde_json::to_value(p),
            Payload::TrackerPose(p) => serde_json::to_value(p),
            Payload::IndicatorState(p) => serde_json::to_value(p),
            Payload::RobotStatus(p) => serde_json::to_value(p),
            Payload::Tap(p) => serde_json::to_value(p),
            Payload::GestureRef(p) => serde_json::to_value(p),
            Payload::SessionCtl(p) => serde_json::to_value(p),
        }
    }

    fn from_value(kind: &str, value: Value) -> Result<Payload, ProtocolError> {
        fn typed<T: DeserializeOwned>(v: Value) -> Result<T, ProtocolError> {
            serde_json::from_value(v).map_err(|e| ProtocolError::Parse(e.to_string()))
        }
        Ok(match kind {
            "drive_keys" => Payload::DriveKeys(typed(value)?),
            "pan_tilt" => Payload::PanTilt(typed(value)?),
            "click" => Payload::Click(typed(value)?),
            "tracker_pose" => Payload::TrackerPose(typed(value)?),
            "indicator_state" => Payload::IndicatorState(typed(value)?),
            "robot_status" => Payload::RobotStatus(typed(value)?),
            "tap" => Payload::Tap(typed(value)?),
            "gesture_ref" => Payload::GestureRef(typed(value)?),
            "session_ctl" => Payload::SessionCtl(typed(value)?),
            other => {
                return Err(ProtocolError::Version(format!(
                    "unknown payload kind {other:?}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub channel: Channel,
    pub sender: String,
    pub seq: u64,
    /// Sender's simulation clock, milliseconds.
    pub sim_time: u64,
    pub payload: Payload,
}

impl Envelope {
    pub fn new(sender: impl Into<String>, seq: u64, sim_time: u64, payload: Payload) -> Self {
        Self {
            channel: payload.channel(),
            sender: sender.into(),
            seq,
            sim_time,
            payload,
        }
    }

    pub fn kind(&self) -> &'static str {
        self.payload.kind()
    }
}

/// Rewrites `-0.0` as `0.0` so equal envelopes encode identically. Returns
/// false if a null turned up, which is how serde_json renders NaN and ±inf.
fn canonicalize(value: &mut Value) -> bool {
    match value {
        Value::Null => false,
        Value::Number(n) => {
            if n.as_f64() == Some(0.0) && n.is_f64() {
                *value = Value::from(0.0);
            }
            true
        }
        Value::Array(items) => items.iter_mut().all(canonicalize),
        Value::Object(map) => map.values_mut().all(canonicalize),
        _ => true,
    }
}

fn envelope_value(e: &Envelope) -> Result<Value, ProtocolError> {
    if e.channel != e.payload.channel() {
        return Err(ProtocolError::ChannelMismatch {
            channel: e.channel,
            kind: e.kind().to_string(),
        });
    }
    let mut payload = e
        .payload
        .to_value()
        .map_err(|err| ProtocolError::Parse(err.to_string()))?;
    if !canonicalize(&mut payload) {
        return Err(ProtocolError::NonFinite(e.kind()));
    }
    let mut map = Map::new();
    map.insert("channel".into(), Value::from(e.channel.as_str()));
    map.insert("kind".into(), Value::from(e.kind()));
    map.insert("payload".into(), payload);
    map.insert("sender".into(), Value::from(e.sender.clone()));
    map.insert("seq".into(), Value::from(e.seq));
    map.insert("sim_time".into(), Value::from(e.sim_time));
    Ok(Value::Object(map))
}

/// Canonical JSON object for an envelope, for embedding in larger records.
pub fn to_json_value(e: &Envelope) -> Result<Value, ProtocolError> {
    envelope_value(e)
}

/// One canonical, LF-terminated JSON line.
pub fn encode(e: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    let mut out = serde_json::to_vec(&envelope_value(e)?)
        .map_err(|err| ProtocolError::Parse(err.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn encode_string(e: &Envelope) -> Result<String, ProtocolError> {
    // serde_json only emits UTF-8
    Ok(String::from_utf8(encode(e)?).expect("serde_json output is UTF-8"))
}

fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<T, ProtocolError> {
    let v = map
        .remove(key)
        .ok_or_else(|| ProtocolError::Parse(format!("missing field {key:?}")))?;
    serde_json::from_value(v).map_err(|e| ProtocolError::Parse(format!("field {key:?}: {e}")))
}

pub fn from_json_value(value: Value) -> Result<Envelope, ProtocolError> {
    let Value::Object(mut map) = value else {
        return Err(ProtocolError::Parse("envelope is not a JSON object".into()));
    };
    let channel: String = take(&mut map, "channel")?;
    let channel = Channel::parse(&channel)
        .ok_or_else(|| ProtocolError::Version(format!("unknown channel {channel:?}")))?;
    let kind: String = take(&mut map, "kind")?;
    let payload_value: Value = take(&mut map, "payload")?;
    let sender: String = take(&mut map, "sender")?;
    let seq: u64 = take(&mut map, "seq")?;
    let sim_time: u64 = take(&mut map, "sim_time")?;
    if let Some(extra) = map.keys().next() {
        return Err(ProtocolError::Parse(format!("unknown field {extra:?}")));
    }
    let payload = Payload::from_value(&kind, payload_value)?;
    if payload.channel() != channel {
        return Err(ProtocolError::ChannelMismatch { channel, kind });
    }
    Ok(Envelope {
        channel,
        sender,
        seq,
        sim_time,
        payload,
    })
}

/// Parses one envelope line. A single trailing LF is accepted.
pub fn decode(bytes: &[u8]) -> Result<Envelope, ProtocolError> {
    let line = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    if line.contains(&b'\n') {
        return Err(ProtocolError::Parse("more than one line".into()));
    }
    let value: Value =
        serde_json::from_slice(line).map_err(|e| ProtocolError::Parse(e.to_string()))?;
    from_json_value(value)
}

/// Tracks the highest sequence number seen per (sender, channel).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SequenceTracker {
    last: BTreeMap<(String, Channel), u64>,
}

impl SequenceTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `e` and returns true when it arrived out of order (its seq is
    /// not above the highest seen so far).
    pub fn observe(&mut self, e: &Envelope) -> bool {
        let key = (e.sender.clone(), e.channel);
        match self.last.get_mut(&key) {
            Some(last) if e.seq <= *last => true,
            Some(last) => {
                *last = e.seq;
                false
            }
            None => {
                self.last.insert(key, e.seq);
                false
            }
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(String, Channel), &u64)> {
        self.last.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub envelope: Envelope,
    pub reordered: bool,
}

/// Decoder that also flags sequence regressions. Reordered messages are
/// still delivered.
#[derive(Debug, Clone, Default)]
pub struct Decoder {
    seqs: SequenceTracker,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decode(&mut self, bytes: &[u8]) -> Result<Received, ProtocolError> {
        let envelope = decode(bytes)?;
        let reordered = self.seqs.observe(&envelope);
        Ok(Received {
            envelope,
            reordered,
        })
    }
}

/// Per-channel monotone sequence numbers for one sender.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqCounter {
    next: [u64; 3],
}

impl Default for SeqCounter {
    fn default() -> Self {
        Self::new()
    }
}

impl SeqCounter {
    pub fn new() -> Self {
        Self { next: [1; 3] }
    }

    pub fn next(&mut self, channel: Channel) -> u64 {
        let i = channel as usize;
        let seq = self.next[i];
        self.next[i] += 1;
        seq
    }

    pub fn peek(&self, channel: Channel) -> u64 {
        self.next[channel as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub one_way_delay_ms: u64,
    pub jitter_ms: u64,
    pub drop_prob: f64,
    pub seed: u64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            one_way_delay_ms: 50,
            jitter_ms: 0,
            drop_prob: 0.0,
            seed: 0,
        }
    }
}

impl LinkModel {
    pub fn ideal() -> Self {
        Self {
            one_way_delay_ms: 0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Stateful one-way link: seeded drops and jitter, FIFO per channel.
#[derive(Debug, Clone)]
pub struct Link {
    model: LinkModel,
    rng: ChaCha8Rng,
    last_delivery: [u64; 3],
}

impl Link {
    pub fn new(model: LinkModel) -> Self {
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            last_delivery: [0; 3],
        }
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }

    /// Delivery time for `e` sent at `now_ms`, or `None` if it is dropped.
    pub fn transmit(&mut self, e: &Envelope, now_ms: u64) -> Option<u64> {
        self.transmit_on(e.channel, now_ms)
    }

    pub fn transmit_on(&mut self, channel: Channel, now_ms: u64) -> Option<u64> {
        // both draws happen for every message so the stream stays aligned
        let drop_draw: f64 = self.rng.random();
        let jitter_span = self.model.jitter_ms as i64;
        let jitter = if jitter_span > 0 {
            self.rng.random_range(-jitter_span..=jitter_span)
        } else {
            0
        };
        if drop_draw < self.model.drop_prob {
            return None;
        }
        let raw = now_ms as i64 + self.model.one_way_delay_ms as i64 + jitter;
        let slot = &mut self.last_delivery[channel as usize];
        let at = (raw.max(0) as u64).max(*slot);
        *slot = at;
        Some(at)
    }
}

/// Messages in flight on a [`Link`], released in delivery order.
#[derive(Debug, Clone)]
pub struct LinkQueue<T> {
    link: Link,
    pending: BTreeMap<(u64, u64), T>,
    counter: u64,
    dropped: u64,
}

impl<T> LinkQueue<T> {
    pub fn new(model: LinkModel) -> Self {
        Self {
            link: Link::new(model),
            pending: BTreeMap::new(),
            counter: 0,
            dropped: 0,
        }
    }

    pub fn send(&mut self, channel: Channel, item: T, now_ms: u64) -> Option<u64> {
        match self.link.transmit_on(channel, now_ms) {
            Some(at) => {
                self.pending.insert((at, self.counter), item);
                self.counter += 1;
                Some(at)
            }
            None => {
                self.dropped += 1;
                None
            }
        }
    }

    /// Everything due at or before `now_ms`, oldest first.
    pub fn drain_due(&mut self, now_ms: u64) -> Vec<T> {
        let later = self.pending.split_off(&(now_ms + 1, 0));
        let due = std::mem::replace(&mut self.pending, later);
        due.into_values().collect()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }
}
