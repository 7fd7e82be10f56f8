//! Central node: image decisions on uploaded frames, repel commands back to
//! the originating peripheral node, warnings, and box-detector evaluation.

mod ap;
mod detector;
mod geometry;
mod node;
mod warning;

pub use ap::{
    average_precision, evaluate_ap50, pr_curve, LabeledFrame, LabeledFrameSet, PrCurve,
    AP_IOU_THRESHOLD,
};
pub use detector::{
    detect_frame, Detector, DetectorDecision, DetectorKind, OracleDetector, ScriptedDetector,
    StochasticDetector, StochasticDetectorParams,
};
pub use geometry::{iou, BoundingBox};
pub use node::{CnAction, CnConfig, CnEvent, CnState, CnStep, PendingFrame};
pub use warning::{
    emit_warning, read_warning_log, warning_record, write_to_sinks, CommandSink, JsonlSink,
    MemorySink, WarningKind, WarningOutcome, WarningRecord, WarningSink,
};
