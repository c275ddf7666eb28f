//! The experiment behind each subcommand.
//!
//! Every sweep point is an independent job seeded from `(seed, axis index)`,
//! so all codecs at a point share information bits and the output does not
//! depend on how rayon schedules the jobs.

use crate::config::{ExperimentConfig, ScalarAxis};
use crate::output::{sort_rows, SweepRow, Table};
use crate::CliError;
use dbmc::analysis::ThresholdObjective;
use dbmc::stats::derive_seed;
use dbmc::{
    absorption_cdf, achievable_rate, analytical_ber_isi_mitigating, analytical_ber_uncoded,
    optimize_threshold, peak_time, run_ber_trial, simulate_first_hits, simulate_frame, slot_probabilities, CodecId,
    FirstHitHistogram, LinkConfig, Params, ParticleSimConfig, Profile, Z99,
};
use rayon::prelude::*;

fn link_config(cfg: &ExperimentConfig, codec: CodecId, memory_length: usize, seed: u64) -> LinkConfig {
    LinkConfig {
        memory_length,
        threshold: cfg.threshold,
        codec,
        arrival_model: cfg.arrival_model,
        rng_seed: seed,
        n_info_bits: cfg.n_info_bits,
    }
}

/// Closed-form BER where one exists for `codec` at this memory length.
fn analytic_ber(codec: CodecId, p: &Params, prof: &Profile, tau: f64, memory_length: usize) -> Result<Option<f64>, CliError> {
    Ok(match codec {
        CodecId::Uncoded => Some(analytical_ber_uncoded(p, prof, tau, memory_length)?),
        CodecId::IsiMitigating421 if memory_length == 1 => Some(analytical_ber_isi_mitigating(p, prof, tau)?),
        _ => None,
    })
}

/// One channel setting of a sweep.
struct Point {
    axis_value: f64,
    params: Params,
    profile: Profile,
    memory_length: usize,
    seed: u64,
}

fn ber_rows(cfg: &ExperimentConfig, points: Vec<Point>) -> Result<Vec<SweepRow>, CliError> {
    let jobs: Vec<(&Point, CodecId)> = points.iter().flat_map(|pt| cfg.codecs.iter().map(move |&c| (pt, c))).collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(pt, codec)| {
            let link = link_config(cfg, codec, pt.memory_length, pt.seed);
            let mc = run_ber_trial(&pt.params, &pt.profile, &link)?;
            let tau = link.threshold_for(&pt.params, &pt.profile);
            Ok(SweepRow {
                axis_value: pt.axis_value,
                codec,
                ber_mc: Some(mc.ber),
                ci95: Some(mc.ci95_half_width),
                ber_analytic: analytic_ber(codec, &pt.params, &pt.profile, tau, pt.memory_length)?,
                rate: None,
                n_bits: Some(mc.bits_total),
                seed: pt.seed,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

/// BER against SNR for every configured codec.
pub fn sweep_snr(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    let points = cfg
        .snr_grid
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let (params, profile) = cfg.channel_at(snr, cfg.memory_length)?;
            Ok(Point { axis_value: snr, params, profile, memory_length: cfg.memory_length, seed: derive_seed(cfg.seed, i as u64) })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    ber_rows(cfg, points)
}

/// BER against memory length at `snr_db`.
pub fn sweep_memory(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    let points = cfg
        .memory_grid
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let (params, profile) = cfg.channel_at(cfg.snr_db, l)?;
            Ok(Point { axis_value: l as f64, params, profile, memory_length: l, seed: derive_seed(cfg.seed, i as u64) })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    ber_rows(cfg, points)
}

/// BER against molecule count, distance or radius.
///
/// The noise level and slot duration are fixed at their values for the base
/// configuration at `snr_db`; only the swept quantity changes.
pub fn sweep_scalar(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    let (base, _) = cfg.channel_at(cfg.snr_db, cfg.memory_length)?;
    let points = cfg
        .scalar_values()
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let mut params = base;
            match cfg.axis {
                ScalarAxis::Molecules => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return Err(CliError::Config(format!("n_m grid value {v} is not a positive integer")));
                    }
                    params.molecules_per_one = v as u64;
                }
                ScalarAxis::Distance => params.distance = v,
                ScalarAxis::Radius => params.receiver_radius = v,
            }
            params.validate()?;
            let profile = slot_probabilities(&params, cfg.horizon(cfg.memory_length))?;
            Ok(Point { axis_value: v, params, profile, memory_length: cfg.memory_length, seed: derive_seed(cfg.seed, i as u64) })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    ber_rows(cfg, points)
}

/// Achievable rate against SNR.
pub fn rate(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    let jobs: Vec<(usize, f64, CodecId)> = cfg
        .snr_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &snr)| cfg.codecs.iter().map(move |&c| (i, snr, c)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(i, snr, codec)| {
            let (params, profile) = cfg.channel_at(snr, cfg.memory_length)?;
            let seed = derive_seed(cfg.seed, i as u64);
            let link = link_config(cfg, codec, cfg.memory_length, seed);
            let tau = link.threshold_for(&params, &profile);
            let r = achievable_rate(codec, &params, &profile, tau, cfg.prior, cfg.transition_mode, &link)?;
            let simulated = codec != CodecId::IsiMitigating421;
            Ok(SweepRow {
                axis_value: snr,
                codec,
                ber_mc: None,
                ci95: None,
                ber_analytic: None,
                rate: Some(r.rate),
                n_bits: simulated.then_some(cfg.n_info_bits as u64),
                seed,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotCheck {
    pub slot: usize,
    pub oracle: f64,
    pub closed_form: f64,
}

impl SlotCheck {
    pub fn deviation(&self) -> f64 {
        (self.oracle - self.closed_form).abs()
    }
}

/// Particle oracle against the closed-form absorption CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelValidation {
    pub histogram: FirstHitHistogram,
    pub slots: Vec<SlotCheck>,
    /// Allowed deviation at each slot boundary (99% binomial, worst case p = 1/2).
    pub tolerance: f64,
    /// `(p1 + p2) / (r / (r + d))`.
    pub two_slot_share: f64,
}

impl ChannelValidation {
    pub fn max_deviation(&self) -> f64 {
        self.slots.iter().map(SlotCheck::deviation).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.slots.iter().all(|s| s.deviation() <= self.tolerance)
    }

    pub fn report(&self) -> String {
        let mut out = String::from("slot  oracle      closed_form deviation\n");
        for s in &self.slots {
            out.push_str(&format!("{:<5} {:<11.6} {:<11.6} {:.6}\n", s.slot, s.oracle, s.closed_form, s.deviation()));
        }
        out.push_str(&format!(
            "max deviation {:.6} (tolerance {:.6}): {}\n",
            self.max_deviation(),
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        out.push_str(&format!(
            "two-slot share (p1+p2)/(r/(r+d)) = {:.6}; above 0.63: {}\n",
            self.two_slot_share,
            if self.two_slot_share > 0.63 { "yes" } else { "no" }
        ));
        if self.histogram.coarse_step {
            out.push_str("warning: walk step exceeds r/2; discretization is unreliable\n");
        }
        out
    }
}

pub fn validate_channel(cfg: &ExperimentConfig) -> Result<ChannelValidation, CliError> {
    cfg.validate()?;
    let params = cfg.base_params()?;
    let sim = ParticleSimConfig {
        time_step: peak_time(&params)? / cfg.particle_step_divisor,
        n_particles: cfg.particles,
        t_max: cfg.particle_slots as f64 * params.slot_duration,
        rng_seed: cfg.seed,
        absorption: cfg.absorption,
    };
    let histogram = simulate_first_hits(&params, &sim)?;
    let slots = histogram
        .cumulative_fractions()
        .into_iter()
        .enumerate()
        .map(|(k, oracle)| {
            let t = (k + 1) as f64 * params.slot_duration;
            Ok(SlotCheck { slot: k + 1, oracle, closed_form: cfg.cdf_scale * absorption_cdf(t, &params)? })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let prof = slot_probabilities(&params, 2)?;
    Ok(ChannelValidation {
        histogram,
        slots,
        tolerance: Z99 * (0.25 / cfg.particles as f64).sqrt(),
        two_slot_share: (prof.p(1) + prof.p(2)) / params.hit_probability(),
    })
}

pub const THRESHOLD_HEADER: [&str; 8] =
    ["codec", "objective", "tau_opt", "ber_opt", "tau_default", "ber_default", "n_bits", "seed"];

/// Optimal threshold for each codec at `snr_db`.
pub fn optimize_thresholds(cfg: &ExperimentConfig) -> Result<Vec<Vec<String>>, CliError> {
    cfg.validate()?;
    let (params, profile) = cfg.channel_at(cfg.snr_db, cfg.memory_length)?;
    let seed = derive_seed(cfg.seed, 0);
    let mut codecs = cfg.codecs.clone();
    codecs.sort_by_key(|c| CodecId::ALL.iter().position(|x| x == c));
    codecs
        .par_iter()
        .map(|&codec| {
            let objective = cfg.objective.for_codec(codec);
            let link = link_config(cfg, codec, cfg.memory_length, seed);
            let choice = optimize_threshold(&params, &profile, codec, objective, &link)?;
            let mc = objective == ThresholdObjective::McBer;
            Ok(vec![
                codec.to_string(),
                if mc { "mc" } else { "analytic" }.to_string(),
                choice.tau.to_string(),
                choice.ber.to_string(),
                choice.default_tau.to_string(),
                choice.default_ber.to_string(),
                if mc { cfg.n_info_bits.to_string() } else { String::new() },
                seed.to_string(),
            ])
        })
        .collect()
}

/// Slot-by-slot trace of one frame of the first configured codec at `snr_db`.
pub fn trace(cfg: &ExperimentConfig) -> Result<String, CliError> {
    cfg.validate()?;
    let (params, profile) = cfg.channel_at(cfg.snr_db, cfg.memory_length)?;
    let link = link_config(cfg, cfg.codecs[0], cfg.memory_length, derive_seed(cfg.seed, 0));
    Ok(simulate_frame(&params, &profile, &link)?.to_csv())
}

/// Wraps a plain CSV produced by the core crate in a metadata block.
pub fn with_metadata(command: &str, cfg: &ExperimentConfig, csv: &str) -> Result<String, CliError> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let mut t = Table::new(command, cfg, &[], &header);
    t.records = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    t.render()
}
