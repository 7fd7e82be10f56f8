use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Latency, MeshConfig};
use super::topic::{topic_matches, validate_pattern, validate_topic};
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qos {
    AtMostOnce,
    AtLeastOnce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryMeta {
    pub interval_s: f64,
    pub max_retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub msg_id: u64,
    pub topic: String,
    pub publisher: String,
    pub payload: Vec<u8>,
    pub qos: Qos,
    pub publish_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry: Option<RetryMeta>,
}

/// A message arriving at a subscribed client. Under at-least-once the same
/// `msg_id` may arrive more than once.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub t: f64,
    pub to: String,
    pub msg: Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Publish,
    Drop,
    Deliver,
    Retry,
    Failover,
}

/// One line of the delivery trace. For failovers `from` is the client and
/// `to` the broker it moved to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub msg_id: Option<u64>,
    pub topic: String,
    pub from: String,
    pub to: String,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokerTransition {
    pub t: f64,
    pub client: String,
    pub from: Option<String>,
    pub to: String,
}

#[derive(Debug, Clone)]
enum Packet {
    Data(Message),
    Ack(u64),
    Heartbeat { incarnation: u64 },
    Connect { subs: Vec<String> },
    ConnAck { incarnation: u64 },
    Subscribe { subs: Vec<String>, gen: u64 },
    SubAck { gen: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct StreamKey {
    from: String,
    to: String,
    publisher: String,
    topic: String,
}

impl StreamKey {
    fn new(from: &str, to: &str, msg: &Message) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            publisher: msg.publisher.clone(),
            topic: msg.topic.clone(),
        }
    }
}

#[derive(Debug, Default)]
struct Stream {
    queue: VecDeque<Message>,
    /// Transmissions of the head message so far.
    attempts: u32,
}

#[derive(Debug)]
enum Ev {
    Arrive {
        from: String,
        to: String,
        packet: Packet,
    },
    Retry {
        key: StreamKey,
        msg_id: u64,
        attempt: u32,
    },
    SubRetry {
        client: String,
        gen: u64,
        attempt: u32,
    },
    HeartbeatTick {
        broker: String,
        incarnation: u64,
    },
    Watchdog {
        client: String,
        hb_gen: u64,
    },
    ConnectTimeout {
        client: String,
        connect_gen: u64,
    },
}

struct Scheduled {
    t: f64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Scheduled {
    // min-heap on (t, seq)
    fn cmp(&self, o: &Self) -> Ordering {
        o.t.total_cmp(&self.t).then(o.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Conn {
    Connecting { broker: String, connect_gen: u64 },
    Connected { broker: String, incarnation: u64 },
}

#[derive(Debug)]
struct Client {
    subs: Vec<String>,
    conn: Conn,
    /// Index into the broker priority list of the current target.
    broker_idx: usize,
    hb_gen: u64,
    connect_gen: u64,
    sub_gen: u64,
    sub_pending: bool,
    /// `sub_gen` when the last Connect went out with the subscription list.
    connect_sub_gen: u64,
    ever_connected: Option<String>,
    buffer: VecDeque<Message>,
}

#[derive(Debug, Default)]
struct Broker {
    alive: bool,
    incarnation: u64,
    sessions: BTreeMap<String, Vec<String>>,
    seen: std::collections::BTreeSet<u64>,
}

/// Single-threaded discrete-event pub/sub network. Clients talk only to
/// brokers; brokers route publishes to matching client sessions.
pub struct Mesh {
    config: MeshConfig,
    now: f64,
    seq: u64,
    rng: SimRng,
    queue: BinaryHeap<Scheduled>,
    brokers: BTreeMap<String, Broker>,
    clients: BTreeMap<String, Client>,
    streams: BTreeMap<StreamKey, Stream>,
    /// Last scheduled arrival per stream, so a later send never overtakes.
    last_arrival: BTreeMap<StreamKey, f64>,
    next_msg_id: u64,
    trace: Vec<TraceRecord>,
    transitions: Vec<BrokerTransition>,
    pending: Vec<Delivery>,
}

impl Mesh {
    pub fn new(config: MeshConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut mesh = Self {
            now: 0.0,
            seq: 0,
            rng: rng_from_seed(seed),
            queue: BinaryHeap::new(),
            brokers: BTreeMap::new(),
            clients: BTreeMap::new(),
            streams: BTreeMap::new(),
            last_arrival: BTreeMap::new(),
            next_msg_id: 1,
            trace: Vec::new(),
            transitions: Vec::new(),
            pending: Vec::new(),
            config,
        };
        for b in mesh.config.failover.brokers.clone() {
            mesh.brokers.insert(
                b.clone(),
                Broker {
                    alive: true,
                    ..Broker::default()
                },
            );
            let at = mesh.config.failover.heartbeat_interval_s;
            mesh.schedule(
                at,
                Ev::HeartbeatTick {
                    broker: b,
                    incarnation: 0,
                },
            );
        }
        Ok(mesh)
    }

    pub fn config(&self) -> &MeshConfig {
        &self.config
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn transitions(&self) -> &[BrokerTransition] {
        &self.transitions
    }

    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.trace {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Broker the client currently holds a session with.
    pub fn connected_broker(&self, client: &str) -> Option<&str> {
        match &self.clients.get(client)?.conn {
            Conn::Connected { broker, .. } => Some(broker),
            Conn::Connecting { .. } => None,
        }
    }

    pub fn broker_alive(&self, broker: &str) -> bool {
        self.brokers.get(broker).is_some_and(|b| b.alive)
    }

    pub fn buffered(&self, client: &str) -> usize {
        self.clients.get(client).map_or(0, |c| c.buffer.len())
    }

    fn schedule(&mut self, t: f64, ev: Ev) {
        self.seq += 1;
        self.queue.push(Scheduled {
            t,
            seq: self.seq,
            ev,
        });
    }

    fn record(&mut self, msg: Option<&Message>, from: &str, to: &str, event: TraceEvent) {
        self.trace.push(TraceRecord {
            t: self.now,
            msg_id: msg.map(|m| m.msg_id),
            topic: msg.map(|m| m.topic.clone()).unwrap_or_default(),
            from: from.into(),
            to: to.into(),
            event,
        });
    }

    /// Registers a client and starts connecting it to the first broker in
    /// priority order.
    pub fn add_client(&mut self, id: &str) -> Result<()> {
        if id.is_empty() || self.clients.contains_key(id) || self.brokers.contains_key(id) {
            return Err(Error::invalid_input(format!(
                "client id {id:?} is empty or taken"
            )));
        }
        self.clients.insert(
            id.into(),
            Client {
                subs: Vec::new(),
                conn: Conn::Connecting {
                    broker: String::new(),
                    connect_gen: 0,
                },
                broker_idx: 0,
                hb_gen: 0,
                connect_gen: 0,
                sub_gen: 0,
                sub_pending: false,
                connect_sub_gen: 0,
                ever_connected: None,
                buffer: VecDeque::new(),
            },
        );
        self.connect(id, 0);
        Ok(())
    }

    fn client_mut(&mut self, id: &str) -> Result<&mut Client> {
        self.clients
            .get_mut(id)
            .ok_or_else(|| Error::invalid_input(format!("unknown client {id:?}")))
    }

    pub fn subscribe(&mut self, client: &str, pattern: &str) -> Result<()> {
        validate_pattern(pattern)?;
        let c = self.client_mut(client)?;
        if !c.subs.iter().any(|p| p == pattern) {
            c.subs.push(pattern.into());
        }
        c.sub_gen += 1;
        let gen = c.sub_gen;
        if let Conn::Connected { broker, .. } = c.conn.clone() {
            c.sub_pending = true;
            self.send_subscribe(client, &broker, gen, 0);
        }
        Ok(())
    }

    fn send_subscribe(&mut self, client: &str, broker: &str, gen: u64, attempt: u32) {
        let subs = self.clients[client].subs.clone();
        self.transmit(client, broker, Packet::Subscribe { subs, gen }, None);
        let at = self.now + self.config.retry.interval_s;
        self.schedule(
            at,
            Ev::SubRetry {
                client: client.into(),
                gen,
                attempt,
            },
        );
    }

    pub fn publish(
        &mut self,
        client: &str,
        topic: &str,
        payload: Vec<u8>,
        qos: Qos,
    ) -> Result<u64> {
        validate_topic(topic)?;
        let retry = self.config.retry;
        self.client_mut(client)?;
        let msg = Message {
            msg_id: self.next_msg_id,
            topic: topic.into(),
            publisher: client.into(),
            payload,
            qos,
            publish_time_s: self.now,
            retry: (qos == Qos::AtLeastOnce).then_some(RetryMeta {
                interval_s: retry.interval_s,
                max_retries: retry.max_retries,
            }),
        };
        self.next_msg_id += 1;
        match self.clients[client].conn.clone() {
            Conn::Connected { broker, .. } => {
                self.record(Some(&msg), client, &broker, TraceEvent::Publish);
                self.send(client, &broker, msg);
            }
            Conn::Connecting { .. } => {
                self.record(Some(&msg), client, "", TraceEvent::Publish);
                self.buffer(client, msg);
            }
        }
        Ok(self.next_msg_id - 1)
    }

    fn buffer(&mut self, client: &str, msg: Message) {
        let cap = self.config.buffer_cap;
        let c = self.clients.get_mut(client).expect("known client");
        c.buffer.push_back(msg);
        if c.buffer.len() > cap {
            let old = c.buffer.pop_front().expect("non-empty");
            log::warn!(
                "{client}: local buffer full, dropping message {}",
                old.msg_id
            );
            self.record(Some(&old), client, "", TraceEvent::Drop);
        }
    }

    /// Hands a message to the hop `from -> to`. Both QoS levels share the
    /// per-stream queue so order holds across them; only at-least-once
    /// messages wait for an ack.
    fn send(&mut self, from: &str, to: &str, msg: Message) {
        let key = StreamKey::new(from, to, &msg);
        let s = self.streams.entry(key.clone()).or_default();
        s.queue.push_back(msg);
        if s.queue.len() == 1 {
            self.send_head(&key);
        }
    }

    fn send_head(&mut self, key: &StreamKey) {
        loop {
            let Some(s) = self.streams.get_mut(key) else {
                return;
            };
            let Some(msg) = s.queue.front().cloned() else {
                self.streams.remove(key);
                return;
            };
            if msg.qos == Qos::AtMostOnce {
                s.queue.pop_front();
                self.transmit(&key.from, &key.to, Packet::Data(msg), Some(key));
                continue;
            }
            s.attempts += 1;
            let attempt = s.attempts;
            if attempt > 1 {
                self.record(Some(&msg), &key.from, &key.to, TraceEvent::Retry);
            }
            let msg_id = msg.msg_id;
            self.transmit(&key.from, &key.to, Packet::Data(msg), Some(key));
            let at = self.now + self.config.retry.interval_s;
            self.schedule(
                at,
                Ev::Retry {
                    key: key.clone(),
                    msg_id,
                    attempt,
                },
            );
            return;
        }
    }

    /// Head of the stream is done with (acked or given up); move on.
    fn advance_stream(&mut self, key: &StreamKey) {
        if let Some(s) = self.streams.get_mut(key) {
            s.queue.pop_front();
            s.attempts = 0;
            if s.queue.is_empty() {
                self.streams.remove(key);
            } else {
                self.send_head(key);
            }
        }
    }

    fn sample_latency(&mut self, from: &str, to: &str) -> (f64, bool) {
        let link = *self.config.link(from, to);
        let u: f64 = self.rng.random();
        let lat = match link.latency {
            Latency::Fixed { s } => s,
            Latency::Uniform { lo_s, hi_s } => lo_s + (hi_s - lo_s) * self.rng.random::<f64>(),
        };
        let partitioned = self
            .config
            .partitions
            .iter()
            .any(|p| p.separates(from, to, self.now));
        (lat, partitioned || u < link.loss)
    }

    fn transmit(&mut self, from: &str, to: &str, packet: Packet, key: Option<&StreamKey>) {
        let (lat, lost) = self.sample_latency(from, to);
        if lost {
            if let Packet::Data(m) = &packet {
                self.record(Some(m), from, to, TraceEvent::Drop);
            }
            return;
        }
        let mut at = self.now + lat;
        if let Some(k) = key {
            let last = self.last_arrival.entry(k.clone()).or_insert(at);
            at = at.max(*last);
            *last = at;
        }
        self.schedule(
            at,
            Ev::Arrive {
                from: from.into(),
                to: to.into(),
                packet,
            },
        );
    }

    fn connect(&mut self, client: &str, broker_idx: usize) {
        let brokers = &self.config.failover.brokers;
        let broker = brokers[broker_idx % brokers.len()].clone();
        let c = self.clients.get_mut(client).expect("known client");
        c.broker_idx = broker_idx % brokers.len();
        c.connect_gen += 1;
        c.connect_sub_gen = c.sub_gen;
        let connect_gen = c.connect_gen;
        c.conn = Conn::Connecting {
            broker: broker.clone(),
            connect_gen,
        };
        let subs = c.subs.clone();
        self.transmit(client, &broker, Packet::Connect { subs }, None);
        let at = self.now + self.config.failover.connect_timeout_s;
        self.schedule(
            at,
            Ev::ConnectTimeout {
                client: client.into(),
                connect_gen,
            },
        );
    }

    /// Gives up on the current broker: unacknowledged and queued publishes
    /// go back to the local buffer, in publish order, and the next broker
    /// in priority order is tried.
    fn fail_over(&mut self, client: &str) {
        let Conn::Connected { broker, .. } = self.clients[client].conn.clone() else {
            return;
        };
        let keys: Vec<StreamKey> = self
            .streams
            .keys()
            .filter(|k| k.from == client && k.to == broker)
            .cloned()
            .collect();
        let mut back: Vec<Message> = Vec::new();
        for k in keys {
            if let Some(s) = self.streams.remove(&k) {
                back.extend(s.queue);
            }
        }
        back.sort_by_key(|m| m.msg_id);
        let c = self.clients.get_mut(client).expect("known client");
        for m in back.into_iter().rev() {
            c.buffer.push_front(m);
        }
        while c.buffer.len() > self.config.buffer_cap {
            c.buffer.pop_front();
        }
        let next = c.broker_idx + 1;
        log::info!("{client}: lost broker {broker} at t={:.3}", self.now);
        self.connect(client, next);
    }

    /// Replaces the model of the directed link `from -> to` from now on.
    pub fn set_link(
        &mut self,
        from: &str,
        to: &str,
        model: super::config::LinkModel,
    ) -> Result<()> {
        model.validate()?;
        self.config
            .links
            .retain(|l| !(l.from == from && l.to == to));
        self.config.links.push(super::config::LinkOverride {
            from: from.into(),
            to: to.into(),
            model,
        });
        Ok(())
    }

    pub fn kill_broker(&mut self, broker: &str) -> Result<()> {
        let b = self
            .brokers
            .get_mut(broker)
            .ok_or_else(|| Error::invalid_input(format!("unknown broker {broker:?}")))?;
        b.alive = false;
        b.sessions.clear();
        b.seen.clear();
        self.streams.retain(|k, _| k.from != broker);
        Ok(())
    }

    pub fn revive_broker(&mut self, broker: &str) -> Result<()> {
        let b = self
            .brokers
            .get_mut(broker)
            .ok_or_else(|| Error::invalid_input(format!("unknown broker {broker:?}")))?;
        if b.alive {
            return Ok(());
        }
        b.alive = true;
        b.incarnation += 1;
        let incarnation = b.incarnation;
        let at = self.now + self.config.failover.heartbeat_interval_s;
        self.schedule(
            at,
            Ev::HeartbeatTick {
                broker: broker.into(),
                incarnation,
            },
        );
        Ok(())
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.queue.peek().map(|s| s.t)
    }

    /// Processes every event at the earliest pending time, if that time is
    /// at most `limit`, and returns what reached clients.
    pub fn step(&mut self, limit: f64) -> Vec<Delivery> {
        let Some(t) = self.next_event_time().filter(|t| *t <= limit) else {
            return Vec::new();
        };
        self.now = self.now.max(t);
        while self.queue.peek().is_some_and(|s| s.t <= t) {
            let s = self.queue.pop().expect("peeked");
            self.handle(s.ev);
        }
        std::mem::take(&mut self.pending)
    }

    /// Runs the network up to and including time `t`.
    pub fn advance_until(&mut self, t: f64) -> Vec<Delivery> {
        let mut out = Vec::new();
        while self.next_event_time().is_some_and(|n| n <= t) {
            out.extend(self.step(t));
        }
        self.now = self.now.max(t);
        out
    }

    pub fn advance(&mut self, dt: f64) -> Result<Vec<Delivery>> {
        if !(dt > 0.0) {
            return Err(Error::invalid_input(format!(
                "dt must be positive, got {dt}"
            )));
        }
        Ok(self.advance_until(self.now + dt))
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::Arrive { from, to, packet } => self.arrive(&from, &to, packet),
            Ev::Retry {
                key,
                msg_id,
                attempt,
            } => {
                let Some(s) = self.streams.get(&key) else {
                    return;
                };
                if s.queue.front().map(|m| m.msg_id) != Some(msg_id) || s.attempts != attempt {
                    return;
                }
                if attempt > self.config.retry.max_retries {
                    let m = s.queue.front().cloned().expect("head");
                    log::debug!(
                        "giving up on message {msg_id} over {} -> {}",
                        key.from,
                        key.to
                    );
                    self.record(Some(&m), &key.from, &key.to, TraceEvent::Drop);
                    self.advance_stream(&key);
                } else {
                    self.send_head(&key);
                }
            }
            Ev::SubRetry {
                client,
                gen,
                attempt,
            } => {
                let c = &self.clients[&client];
                if !c.sub_pending || c.sub_gen != gen || attempt >= self.config.retry.max_retries {
                    return;
                }
                if let Conn::Connected { broker, .. } = c.conn.clone() {
                    self.send_subscribe(&client, &broker, gen, attempt + 1);
                }
            }
            Ev::HeartbeatTick {
                broker,
                incarnation,
            } => {
                let b = &self.brokers[&broker];
                if !b.alive || b.incarnation != incarnation {
                    return;
                }
                let clients: Vec<String> = b.sessions.keys().cloned().collect();
                for c in clients {
                    if self.config.trace_heartbeats {
                        self.trace.push(TraceRecord {
                            t: self.now,
                            msg_id: None,
                            topic: format!("elemantra/broker/{broker}/heartbeat"),
                            from: broker.clone(),
                            to: c.clone(),
                            event: TraceEvent::Publish,
                        });
                    }
                    self.transmit(&broker, &c, Packet::Heartbeat { incarnation }, None);
                }
                let at = self.now + self.config.failover.heartbeat_interval_s;
                self.schedule(
                    at,
                    Ev::HeartbeatTick {
                        broker,
                        incarnation,
                    },
                );
            }
            Ev::Watchdog { client, hb_gen } => {
                let c = &self.clients[&client];
                if c.hb_gen == hb_gen && matches!(c.conn, Conn::Connected { .. }) {
                    self.fail_over(&client);
                }
            }
            Ev::ConnectTimeout {
                client,
                connect_gen,
            } => {
                let c = &self.clients[&client];
                if matches!(c.conn, Conn::Connecting { connect_gen: g, .. } if g == connect_gen) {
                    let next = c.broker_idx + 1;
                    self.connect(&client, next);
                }
            }
        }
    }

    fn arm_watchdog(&mut self, client: &str) {
        let c = self.clients.get_mut(client).expect("known client");
        c.hb_gen += 1;
        let hb_gen = c.hb_gen;
        let f = &self.config.failover;
        let at = self.now + (f.miss_threshold as f64 + 0.5) * f.heartbeat_interval_s;
        self.schedule(
            at,
            Ev::Watchdog {
                client: client.into(),
                hb_gen,
            },
        );
    }

    fn arrive(&mut self, from: &str, to: &str, packet: Packet) {
        if let Some(b) = self.brokers.get(to) {
            if !b.alive {
                if let Packet::Data(m) = &packet {
                    self.record(Some(m), from, to, TraceEvent::Drop);
                }
                return;
            }
            self.broker_receive(from, to, packet);
        } else if self.clients.contains_key(to) {
            // a crashed broker's packets still in the air are lost with it
            if self.brokers.get(from).is_some_and(|b| !b.alive) {
                return;
            }
            self.client_receive(from, to, packet);
        }
    }

    fn broker_receive(&mut self, from: &str, broker: &str, packet: Packet) {
        match packet {
            Packet::Data(msg) => {
                self.record(Some(&msg), from, broker, TraceEvent::Deliver);
                if msg.qos == Qos::AtLeastOnce {
                    self.transmit(broker, from, Packet::Ack(msg.msg_id), None);
                }
                let b = self.brokers.get_mut(broker).expect("known broker");
                if !b.seen.insert(msg.msg_id) {
                    return;
                }
                let targets: Vec<String> = b
                    .sessions
                    .iter()
                    .filter(|(_, pats)| pats.iter().any(|p| topic_matches(p, &msg.topic)))
                    .map(|(c, _)| c.clone())
                    .collect();
                for c in targets {
                    self.send(broker, &c, msg.clone());
                }
            }
            Packet::Ack(id) => self.ack(broker, from, id),
            Packet::Connect { subs } => {
                let b = self.brokers.get_mut(broker).expect("known broker");
                b.sessions.insert(from.into(), subs);
                let incarnation = b.incarnation;
                self.transmit(broker, from, Packet::ConnAck { incarnation }, None);
            }
            Packet::Subscribe { subs, gen } => {
                let b = self.brokers.get_mut(broker).expect("known broker");
                if let Some(s) = b.sessions.get_mut(from) {
                    *s = subs;
                    self.transmit(broker, from, Packet::SubAck { gen }, None);
                }
            }
            Packet::Heartbeat { .. } | Packet::ConnAck { .. } | Packet::SubAck { .. } => {}
        }
    }

    fn ack(&mut self, sender: &str, receiver: &str, msg_id: u64) {
        let key = self
            .streams
            .iter()
            .find(|(k, s)| {
                k.from == sender
                    && k.to == receiver
                    && s.queue.front().is_some_and(|m| m.msg_id == msg_id)
            })
            .map(|(k, _)| k.clone());
        if let Some(k) = key {
            self.advance_stream(&k);
        }
    }

    fn client_receive(&mut self, from: &str, client: &str, packet: Packet) {
        match packet {
            Packet::Data(msg) => {
                if msg.qos == Qos::AtLeastOnce {
                    self.transmit(client, from, Packet::Ack(msg.msg_id), None);
                }
                let subscribed = self.clients[client]
                    .subs
                    .iter()
                    .any(|p| topic_matches(p, &msg.topic));
                if !subscribed {
                    self.record(Some(&msg), from, client, TraceEvent::Drop);
                    return;
                }
                self.record(Some(&msg), from, client, TraceEvent::Deliver);
                self.pending.push(Delivery {
                    t: self.now,
                    to: client.into(),
                    msg,
                });
            }
            Packet::Ack(id) => self.ack(client, from, id),
            Packet::Heartbeat { incarnation } => {
                let Conn::Connected {
                    broker,
                    incarnation: known,
                } = self.clients[client].conn.clone()
                else {
                    return;
                };
                if broker != from {
                    return;
                }
                if known != incarnation {
                    // the broker restarted and forgot our session
                    let idx = self.clients[client].broker_idx;
                    self.connect(client, idx);
                    return;
                }
                self.arm_watchdog(client);
            }
            Packet::ConnAck { incarnation } => {
                let c = self.clients.get_mut(client).expect("known client");
                let Conn::Connecting { broker, .. } = c.conn.clone() else {
                    return;
                };
                if broker != from {
                    return;
                }
                c.conn = Conn::Connected {
                    broker: broker.clone(),
                    incarnation,
                };
                // subscriptions made after the Connect left need a resend
                let resubscribe = (c.sub_gen != c.connect_sub_gen).then_some(c.sub_gen);
                c.sub_pending = resubscribe.is_some();
                let previous = c.ever_connected.replace(broker.clone());
                let buffered: Vec<Message> = c.buffer.drain(..).collect();
                if previous.as_deref() != Some(broker.as_str()) {
                    self.transitions.push(BrokerTransition {
                        t: self.now,
                        client: client.into(),
                        from: previous.clone(),
                        to: broker.clone(),
                    });
                    if previous.is_some() {
                        self.record(None, client, &broker, TraceEvent::Failover);
                    }
                }
                self.arm_watchdog(client);
                if let Some(gen) = resubscribe {
                    self.send_subscribe(client, &broker, gen, 0);
                }
                for m in buffered {
                    self.send(client, &broker, m);
                }
            }
            Packet::SubAck { gen } => {
                let c = self.clients.get_mut(client).expect("known client");
                if c.sub_gen == gen {
                    c.sub_pending = false;
                }
            }
            Packet::Connect { .. } | Packet::Subscribe { .. } => {}
        }
    }
}

/// The operations a node needs from a transport. [`Mesh`] implements it in
/// simulated time; a client for a real broker could stand in.
pub trait Transport {
    fn now(&self) -> f64;
    fn subscribe(&mut self, client: &str, pattern: &str) -> Result<()>;
    fn publish(&mut self, client: &str, topic: &str, payload: Vec<u8>, qos: Qos) -> Result<u64>;
    fn advance_until(&mut self, t: f64) -> Vec<Delivery>;
}

impl Transport for Mesh {
    fn now(&self) -> f64 {
        Mesh::now(self)
    }

    fn subscribe(&mut self, client: &str, pattern: &str) -> Result<()> {
        Mesh::subscribe(self, client, pattern)
    }

    fn publish(&mut self, client: &str, topic: &str, payload: Vec<u8>, qos: Qos) -> Result<u64> {
        Mesh::publish(self, client, topic, payload, qos)
    }

    fn advance_until(&mut self, t: f64) -> Vec<Delivery> {
        Mesh::advance_until(self, t)
    }
}
