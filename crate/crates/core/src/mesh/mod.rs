//! Simulated pub/sub mesh between peripheral nodes and the central broker.
//!
//! Semantics follow the MQTT family loosely: topics with a single-level `+`
//! wildcard, at-most-once and at-least-once delivery, brokers that forget
//! everything when they crash. Each hop of an at-least-once message is
//! acknowledged and retried on its own, one message at a time per
//! `(publisher, topic)`, which keeps that order intact. Clients watch broker
//! heartbeats and move down the broker priority list when they go quiet;
//! there is no failback.

mod config;
mod engine;
mod topic;

pub use config::{
    BrokerFailure, FailoverConfig, Latency, LinkModel, LinkOverride, MeshConfig, Partition,
    RetryConfig,
};
pub use engine::{
    BrokerTransition, Delivery, Mesh, Message, Qos, RetryMeta, TraceEvent, TraceRecord, Transport,
};
pub use topic::{
    command_topic, frame_topic, status_topic, topic_matches, validate_pattern, validate_topic,
    ALL_FRAMES, WARNING_TOPIC, WILDCARD,
};
