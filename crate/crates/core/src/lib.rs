pub mod annotation;
pub mod audio;
pub mod cli;
pub mod config;
pub mod detect;
pub mod error;
pub mod fsutil;
pub mod metrics;
pub mod phase;
pub mod pipeline;
pub mod postprocess;
pub mod render;
pub mod spectrogram;
pub mod synth;
pub mod textgrid;

pub use annotation::{Annotation, Corpus};
pub use audio::AudioClip;
pub use error::{Error, Result};
pub use phase::{PhaseBox, PhaseClass};
pub use spectrogram::{Spectrogram, SpectrogramParams};
