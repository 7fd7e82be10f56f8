//! Seismic elephant detection.
//!
//! [`detect_window`] is the lightweight score computed on peripheral nodes:
//! a 4 s window is cut into short sub-segments, each sub-segment's dominant
//! frequency is tested against the rumble band, and the longest run of
//! consecutive in-band sub-segments is mapped to a three-level score.
//! [`stft_oracle_detect`] is the heavier STFT reference used to grade it.

mod oracle;
mod recall;
mod score;

pub use oracle::{stft_oracle_detect, OracleParams, RumbleEvent};
pub use recall::{match_and_recall, EventMatch, RecallReport, REFERENCE_FIELD_RECALL};
pub use score::{detect_stream, detect_window, Algorithm1Params, DetectionScore, WindowDetection};
