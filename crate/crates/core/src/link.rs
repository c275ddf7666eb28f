//! Statistical link simulation: per-slot arrival counts with channel memory,
//! counting noise, threshold detection and Monte Carlo BER.
//!
//! A bit 1 releases `N_m` molecules at the start of its slot, a bit 0 releases
//! none. Slot `i` collects molecules from the current release and from the
//! previous `L` releases, plus zero-mean Gaussian counting noise.

use crate::channel::{ChannelParams, SlotProfile};
use crate::codecs::{decode_stream, encode_stream, CodecId};
use crate::error::{invalid, Error, Result};
use crate::stats::{substream, wilson_half_width, SimRng, Z95};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use std::fmt;
use std::str::FromStr;

const INFO_STREAM: u64 = 0;
const CHANNEL_STREAM: u64 = 1;

/// Distribution of the molecules a single release contributes to one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ArrivalModel {
    /// `Binomial(N_m, p_{d,k})`.
    #[default]
    ExactBinomial,
    /// Normal with the binomial mean and variance.
    GaussianApprox,
}

impl fmt::Display for ArrivalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArrivalModel::ExactBinomial => "binomial",
            ArrivalModel::GaussianApprox => "gaussian",
        })
    }
}

impl FromStr for ArrivalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binomial" | "exact" | "exactbinomial" => Ok(ArrivalModel::ExactBinomial),
            "gaussian" | "normal" | "gaussianapprox" => Ok(ArrivalModel::GaussianApprox),
            other => invalid(format!("unknown arrival model '{other}'")),
        }
    }
}

/// Simulation settings for one link run.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    /// Number of past slots whose releases reach the current slot (`L`).
    pub memory_length: usize,
    /// Detection threshold; `None` selects [`default_threshold`].
    pub threshold: Option<f64>,
    pub codec: CodecId,
    pub arrival_model: ArrivalModel,
    pub rng_seed: u64,
    pub n_info_bits: usize,
}

impl LinkConfig {
    pub fn new(codec: CodecId) -> Self {
        Self {
            memory_length: 1,
            threshold: None,
            codec,
            arrival_model: ArrivalModel::ExactBinomial,
            rng_seed: 1,
            n_info_bits: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_info_bits == 0 {
            return invalid("n_info_bits must be at least 1");
        }
        if let Some(tau) = self.threshold {
            if tau.is_nan() || tau < 0.0 {
                return invalid(format!("threshold must be non-negative, got {tau}"));
            }
        }
        Ok(())
    }

    /// Threshold in effect for the given channel.
    pub fn threshold_for(&self, params: &ChannelParams<f64>, profile: &SlotProfile<f64>) -> f64 {
        self.threshold.unwrap_or_else(|| default_threshold(params, profile))
    }
}

/// Midpoint between no signal and a full two-slot signal, `N_m (p1 + p2) / 2`.
pub fn default_threshold(params: &ChannelParams<f64>, profile: &SlotProfile<f64>) -> f64 {
    params.molecules() * (profile.p(1) + profile.p(2)) / 2.0
}

/// Noise standard deviation giving `snr_db = 10 log10((N_m p1)^2 / sigma^2)`.
pub fn snr_to_sigma(snr_db: f64, params: &ChannelParams<f64>, profile: &SlotProfile<f64>) -> f64 {
    params.molecules() * profile.p(1) / 10f64.powf(snr_db / 20.0)
}

enum Arrival {
    Binomial(Binomial),
    Normal(Normal<f64>),
    Nothing,
}

impl Arrival {
    fn new(model: ArrivalModel, n: u64, p: f64) -> Result<Self> {
        if p <= 0.0 {
            return Ok(Arrival::Nothing);
        }
        Ok(match model {
            ArrivalModel::ExactBinomial => Arrival::Binomial(
                Binomial::new(n, p).map_err(|e| Error::InvalidParameter(e.to_string()))?,
            ),
            ArrivalModel::GaussianApprox => {
                let mean = n as f64 * p;
                let sd = (mean * (1.0 - p)).sqrt();
                Arrival::Normal(
                    Normal::new(mean, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?,
                )
            }
        })
    }

    #[inline]
    fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Arrival::Binomial(b) => b.sample(rng) as f64,
            Arrival::Normal(n) => n.sample(rng),
            Arrival::Nothing => 0.0,
        }
    }
}

fn sample_counts(
    coded: &[u8],
    params: &ChannelParams<f64>,
    profile: &SlotProfile<f64>,
    memory_length: usize,
    model: ArrivalModel,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    params.validate()?;
    if profile.horizon() < memory_length + 1 {
        return invalid(format!(
            "slot profile horizon {} is shorter than memory length {} + 1",
            profile.horizon(),
            memory_length
        ));
    }
    let arrivals = (0..=memory_length)
        .map(|j| Arrival::new(model, params.molecules_per_one, profile.p(j + 1)))
        .collect::<Result<Vec<_>>>()?;
    let noise = if params.noise_sigma > 0.0 {
        Some(Normal::new(0.0, params.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };
    let mut counts = Vec::with_capacity(coded.len());
    for i in 0..coded.len() {
        let mut total = 0.0;
        for (j, arrival) in arrivals.iter().enumerate().take(i.min(memory_length) + 1) {
            if coded[i - j] == 1 {
                total += arrival.sample(rng);
            }
        }
        if let Some(noise) = &noise {
            total += noise.sample(rng);
        }
        counts.push(total);
    }
    Ok(counts)
}

/// Draws per-slot received counts for a coded bit sequence.
///
/// Deterministic for a given `config.rng_seed`.
pub fn simulate_slot_counts(
    coded: &[u8],
    params: &ChannelParams<f64>,
    profile: &SlotProfile<f64>,
    config: &LinkConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = substream(config.rng_seed, CHANNEL_STREAM);
    sample_counts(coded, params, profile, config.memory_length, config.arrival_model, &mut rng)
}

/// Threshold detector: bit `i` is 1 iff `counts[i] >= threshold`.
pub fn detect(counts: &[f64], threshold: f64) -> Vec<u8> {
    counts.iter().map(|&c| u8::from(c >= threshold)).collect()
}

/// Everything that happened to one simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTrace {
    pub tx_info: Vec<u8>,
    pub tx_coded: Vec<u8>,
    pub padding: usize,
    pub slot_counts: Vec<f64>,
    pub threshold: f64,
    pub rx_coded: Vec<u8>,
    pub rx_info: Vec<u8>,
}

impl TransmissionTrace {
    pub fn info_bit_errors(&self) -> u64 {
        self.tx_info.iter().zip(&self.rx_info).filter(|(a, b)| a != b).count() as u64
    }

    /// CSV with columns `slot,tx_bit,count,rx_bit`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,tx_bit,count,rx_bit\n");
        for (i, ((tx, count), rx)) in self.tx_coded.iter().zip(&self.slot_counts).zip(&self.rx_coded).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", i + 1, tx, count, rx));
        }
        out
    }
}

/// Uniform iid information bits from the configured seed.
pub fn random_info_bits(config: &LinkConfig) -> Vec<u8> {
    let mut rng = substream(config.rng_seed, INFO_STREAM);
    let mut bits = Vec::with_capacity(config.n_info_bits);
    while bits.len() < config.n_info_bits {
        let word: u64 = rng.random();
        let take = (config.n_info_bits - bits.len()).min(64);
        bits.extend((0..take).map(|k| ((word >> k) & 1) as u8));
    }
    bits
}

/// Encodes random information, sends it through the channel and decodes it.
pub fn simulate_frame(
    params: &ChannelParams<f64>,
    profile: &SlotProfile<f64>,
    config: &LinkConfig,
) -> Result<TransmissionTrace> {
    config.validate()?;
    let tx_info = random_info_bits(config);
    let encoded = encode_stream(config.codec, &tx_info)?;
    let slot_counts = simulate_slot_counts(&encoded.bits, params, profile, config)?;
    let threshold = config.threshold_for(params, profile);
    let rx_coded = detect(&slot_counts, threshold);
    let rx_info = decode_stream(config.codec, &rx_coded, encoded.padding)?;
    Ok(TransmissionTrace {
        tx_info,
        tx_coded: encoded.bits,
        padding: encoded.padding,
        slot_counts,
        threshold,
        rx_coded,
        rx_info,
    })
}

/// Monte Carlo estimate of the decoded information-bit error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerResult {
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    /// Half width of the 95% Wilson interval.
    pub ci95_half_width: f64,
}

impl BerResult {
    pub fn from_counts(bit_errors: u64, bits_total: u64) -> Self {
        Self {
            bit_errors,
            bits_total,
            ber: bit_errors as f64 / bits_total as f64,
            ci95_half_width: wilson_half_width(bit_errors, bits_total, Z95),
        }
    }
}

/// Runs one frame of `config.n_info_bits` information bits and counts
/// decoded information-bit errors.
pub fn run_ber_trial(
    params: &ChannelParams<f64>,
    profile: &SlotProfile<f64>,
    config: &LinkConfig,
) -> Result<BerResult> {
    let trace = simulate_frame(params, profile, config)?;
    Ok(BerResult::from_counts(trace.info_bit_errors(), trace.tx_info.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::slot_probabilities;

    fn reference() -> (ChannelParams<f64>, SlotProfile<f64>) {
        let p = ChannelParams::reference();
        let prof = slot_probabilities(&p, 8).unwrap();
        (p, prof)
    }

    fn config(codec: CodecId, l: usize, model: ArrivalModel) -> LinkConfig {
        LinkConfig { memory_length: l, arrival_model: model, ..LinkConfig::new(codec) }
    }

    #[test]
    fn silence_gives_zero_counts() {
        let (p, prof) = reference();
        let counts =
            simulate_slot_counts(&[0; 50], &p, &prof, &config(CodecId::Uncoded, 3, ArrivalModel::GaussianApprox))
                .unwrap();
        assert!(counts.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn certain_absorption_counts_every_molecule() {
        let p = ChannelParams::reference().with_molecules(777);
        let prof = SlotProfile::from_probs(vec![1.0]).unwrap();
        let counts =
            simulate_slot_counts(&[1, 0, 1], &p, &prof, &config(CodecId::Uncoded, 0, ArrivalModel::ExactBinomial))
                .unwrap();
        assert_eq!(counts, vec![777.0, 0.0, 777.0]);
    }

    #[test]
    fn second_slot_mean_matches_binomial_expectation() {
        let (p, prof) = reference();
        let p = p.with_molecules(1000);
        let cfg = config(CodecId::Uncoded, 1, ArrivalModel::ExactBinomial);
        let mut rng = substream(99, 0);
        let trials = 100_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let c = sample_counts(&[1, 0], &p, &prof, cfg.memory_length, cfg.arrival_model, &mut rng).unwrap();
            sum += c[1];
        }
        let mean = sum / trials as f64;
        let expect = 1000.0 * prof.p(2);
        let se = (1000.0 * prof.p(2) * (1.0 - prof.p(2)) / trials as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect}");
    }

    #[test]
    fn binomial_counts_are_bounded_integers() {
        let (p, prof) = reference();
        let p = p.with_molecules(500);
        let l = 3;
        let coded: Vec<u8> = (0..2000).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
        let counts =
            simulate_slot_counts(&coded, &p, &prof, &config(CodecId::Uncoded, l, ArrivalModel::ExactBinomial))
                .unwrap();
        for c in counts {
            assert!(c >= 0.0 && c.fract() == 0.0 && c <= ((l + 1) * 500) as f64);
        }
    }

    #[test]
    fn short_profile_rejected() {
        let (p, _) = reference();
        let prof = slot_probabilities(&p, 2).unwrap();
        let err = simulate_slot_counts(&[1], &p, &prof, &config(CodecId::Uncoded, 2, ArrivalModel::ExactBinomial));
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn detector() {
        assert_eq!(detect(&[5.0, 2.0], 3.0), vec![1, 0]);
        assert_eq!(detect(&[0.0, 12.0, -0.5], 0.0), vec![1, 1, 0]);
        assert_eq!(detect(&[1e9, 3.0], f64::INFINITY), vec![0, 0]);
    }

    #[test]
    fn snr_conversion() {
        let (p, prof) = reference();
        let signal = p.molecules() * prof.p(1);
        assert!((snr_to_sigma(0.0, &p, &prof) - signal).abs() < 1e-9);
        assert!((snr_to_sigma(20.0, &p, &prof) - signal / 10.0).abs() < 1e-9);
        assert!(snr_to_sigma(1000.0, &p, &prof) < 1e-40);
    }

    #[test]
    fn clean_channel_is_error_free_for_every_codec() {
        let p = ChannelParams::reference().with_molecules(10_000);
        let prof = SlotProfile::from_probs(vec![0.999, 0.0, 0.0]).unwrap();
        for codec in CodecId::ALL {
            let cfg = LinkConfig { n_info_bits: 20_001, memory_length: 2, ..LinkConfig::new(codec) };
            let res = run_ber_trial(&p, &prof, &cfg).unwrap();
            assert_eq!(res.bit_errors, 0, "{codec}");
            assert_eq!(res.bits_total, 20_001);
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let (p, prof) = reference();
        let p = p.with_noise_sigma(40.0);
        let cfg = LinkConfig { n_info_bits: 10_000, rng_seed: 5, ..LinkConfig::new(CodecId::IsiFree421) };
        assert_eq!(run_ber_trial(&p, &prof, &cfg).unwrap(), run_ber_trial(&p, &prof, &cfg).unwrap());
        let other = LinkConfig { rng_seed: 6, ..cfg.clone() };
        assert_ne!(
            simulate_frame(&p, &prof, &cfg).unwrap().slot_counts,
            simulate_frame(&p, &prof, &other).unwrap().slot_counts
        );
    }

    #[test]
    fn trace_csv_layout() {
        let (p, prof) = reference();
        let cfg = LinkConfig { n_info_bits: 2, ..LinkConfig::new(CodecId::IsiMitigating421) };
        let trace = simulate_frame(&p, &prof, &cfg).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "slot,tx_bit,count,rx_bit");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("4,0,"));
    }

    #[test]
    fn invalid_config_rejected() {
        let (p, prof) = reference();
        let cfg = LinkConfig { n_info_bits: 0, ..LinkConfig::new(CodecId::Uncoded) };
        assert!(run_ber_trial(&p, &prof, &cfg).is_err());
        let cfg = LinkConfig { threshold: Some(-1.0), ..LinkConfig::new(CodecId::Uncoded) };
        assert!(run_ber_trial(&p, &prof, &cfg).is_err());
    }
}
