//! Anti-habituation bee-sound deterrents.
//!
//! Every activation picks one of three modifications with a fresh uniform
//! factor α, so consecutive playbacks never repeat exactly while keeping the
//! acoustic character of the original recording.

mod modify;
mod pink;
mod similarity;

pub use modify::{
    apply_modification, insert_silence_gaps, modification_report, modify_frame_rate,
    overlay_pink_noise, pick_modification, pink_overlay_noise, relative_l2_delta, GapOutcome,
    GapParams, ModificationKind, ModificationParams, ModificationReport, DEFAULT_ALPHA_RANGE,
};
pub use pink::{generate_pink_noise, power_law_noise, PINK_F_MIN_HZ};
pub use similarity::{log_spectrogram, stft_similarity, SimilarityParams, SimilarityScore};
