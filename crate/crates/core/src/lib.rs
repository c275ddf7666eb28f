//! Diffusion-based molecular communication link simulator.
//!
//! The crate models a point transmitter and an absorbing spherical receiver,
//! binary concentration shift keying with threshold detection, and four line
//! codes: uncoded, ISI-free (4,2,1), repetition-3 and the ISI-mitigating
//! (4,2,1) code. It provides closed-form and Monte Carlo BER, binary-channel
//! mutual information, and a particle-level Brownian oracle for the channel.
//!
//! The closed-form code is generic over the scalar type (see [`Real`]); the
//! simulators run in `f64`. Concrete aliases are provided for the common case.

pub mod analysis;
pub mod brownian;
pub mod channel;
pub mod codecs;
pub mod error;
pub mod link;
pub mod scalar;
pub mod stats;

pub use analysis::{
    achievable_rate, analytical_ber_isi_mitigating, analytical_ber_uncoded, binary_entropy,
    estimate_transition_probs_mc, mutual_information, optimize_threshold,
    transition_probs_analytical, InputPrior, PriorSearch, ThresholdObjective, TransitionMode,
    TransitionProbs,
};
pub use brownian::{simulate_first_hits, AbsorptionCheck, FirstHitHistogram, ParticleSimConfig};
pub use channel::{
    absorption_cdf, hitting_density, peak_time, q_function, slot_probabilities, ChannelParams,
    SlotProfile,
};
pub use codecs::{code_rate, decode_stream, encode_stream, CodecId, Encoded};
pub use error::{Error, Result};
pub use link::{
    default_threshold, detect, run_ber_trial, simulate_frame, simulate_slot_counts, snr_to_sigma,
    ArrivalModel, BerResult, LinkConfig, TransmissionTrace,
};
pub use scalar::Real;
pub use stats::{Z95, Z99};

/// Double-precision channel parameters.
pub type Params = ChannelParams<f64>;
/// Double-precision slot profile.
pub type Profile = SlotProfile<f64>;
