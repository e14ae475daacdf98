//! RIS-based hybrid precoding for multi-user massive MIMO.
//!
//! The RIS is split into one sub-surface per RF chain; each element applies a
//! 1-bit phase (a sign). Given a channel, a zero-forcing digital precoder is
//! computed on the effective channel `H Φ G`, and the signs are chosen to
//! maximize the users' sum-rate, either by search ([`optim`]) or by a bank of
//! per-element binary classifiers trained to imitate the search ([`dlmdc`]).

pub mod channel;
pub mod container;
pub mod dataio;
pub mod dlmdc;
pub mod numerics;
pub mod optim;
pub mod precoding;
pub mod seeding;

pub use dlmdc::{ClassifierBank, LabeledSet, MlpClassifier, TrainConfig};
pub use channel::{
    ChannelKind, ChannelMatrix, ChannelModel, FeederGains, FeederMode, GppChannelConfig, SvChannelConfig,
    SystemConfig,
};
pub use numerics::ComplexMatrix;
pub use optim::{CeoParams, OptimResult};
pub use precoding::{AnalogBeamformer, DigitalPrecoder, RateEvaluator};
