use crate::error::{Error, Result};

pub const WILDCARD: &str = "+";

fn check_segments(s: &str, allow_wildcard: bool) -> Result<()> {
    if s.is_empty() {
        return Err(Error::invalid_input("empty topic"));
    }
    for seg in s.split('/') {
        if seg.is_empty() {
            return Err(Error::invalid_input(format!(
                "topic {s:?} has an empty segment"
            )));
        }
        if seg.contains('+') && (!allow_wildcard || seg != WILDCARD) {
            return Err(Error::invalid_input(format!("misplaced wildcard in {s:?}")));
        }
    }
    Ok(())
}

/// Concrete topic a message is published on.
pub fn validate_topic(topic: &str) -> Result<()> {
    check_segments(topic, false)
}

/// Subscription pattern; a `+` segment matches any single segment.
pub fn validate_pattern(pattern: &str) -> Result<()> {
    check_segments(pattern, true)
}

pub fn topic_matches(pattern: &str, topic: &str) -> bool {
    let mut p = pattern.split('/');
    let mut t = topic.split('/');
    loop {
        match (p.next(), t.next()) {
            (None, None) => return true,
            (Some(ps), Some(ts)) if ps == WILDCARD || ps == ts => {}
            _ => return false,
        }
    }
}

pub fn frame_topic(pn: &str) -> String {
    format!("elemantra/pn/{pn}/frame")
}

pub fn status_topic(pn: &str) -> String {
    format!("elemantra/pn/{pn}/status")
}

pub fn command_topic(pn: &str) -> String {
    format!("elemantra/cn/cmd/{pn}")
}

pub const WARNING_TOPIC: &str = "elemantra/cn/warning";
pub const ALL_FRAMES: &str = "elemantra/pn/+/frame";
