//! Particle-level Brownian motion oracle for the absorbing-sphere channel.
//!
//! Each molecule starts `d` away from the receiver surface and takes
//! independent Gaussian steps until it is absorbed or time runs out. First-hit
//! times are binned by symbol slot so the histogram can be compared with
//! [`absorption_cdf`](crate::channel::absorption_cdf) and the slot profile.

use crate::channel::ChannelParams;
use crate::error::{invalid, Error, Result};
use crate::stats::{substream, SimRng};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Particles simulated per random substream.
const CHUNK: u64 = 4096;

/// How a step is checked for contact with the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AbsorptionCheck {
    /// Absorbed only if the end-of-step position is inside the sphere.
    EndOfStep,
    /// Also absorbed with the probability that the Brownian bridge between
    /// two outside positions touched the surface, using the planar
    /// approximation `exp(-(R0 - r)(R1 - r) / (D dt))`.
    #[default]
    BridgeCorrected,
}

impl std::str::FromStr for AbsorptionCheck {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "end-of-step" | "endofstep" | "end_of_step" => Ok(AbsorptionCheck::EndOfStep),
            "bridge" | "bridge-corrected" | "bridge_corrected" => Ok(AbsorptionCheck::BridgeCorrected),
            other => invalid(format!("unknown absorption check '{other}'")),
        }
    }
}

impl std::fmt::Display for AbsorptionCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AbsorptionCheck::EndOfStep => "end-of-step",
            AbsorptionCheck::BridgeCorrected => "bridge",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSimConfig {
    /// Walk time step in seconds.
    pub time_step: f64,
    pub n_particles: u64,
    /// Simulated time span in seconds.
    pub t_max: f64,
    pub rng_seed: u64,
    pub absorption: AbsorptionCheck,
}

impl ParticleSimConfig {
    /// `dt = T_peak / 200`, `10^5` particles, `t_max = 100 T_b`.
    pub fn for_params(params: &ChannelParams<f64>) -> Self {
        let peak = params.distance * params.distance / (6.0 * params.diffusion_coeff);
        Self {
            time_step: peak / 200.0,
            n_particles: 100_000,
            t_max: 100.0 * params.slot_duration,
            rng_seed: 1,
            absorption: AbsorptionCheck::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return invalid(format!("time step must be positive, got {}", self.time_step));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return invalid(format!("t_max must be finite and non-negative, got {}", self.t_max));
        }
        if self.n_particles == 0 {
            return invalid("n_particles must be at least 1");
        }
        Ok(())
    }

    /// Per-coordinate step standard deviation `sqrt(2 D dt)`.
    pub fn step_sd(&self, params: &ChannelParams<f64>) -> f64 {
        (2.0 * params.diffusion_coeff * self.time_step).sqrt()
    }

    /// True when the step size exceeds half the receiver radius, where the
    /// walk resolves the sphere poorly.
    pub fn is_coarse(&self, params: &ChannelParams<f64>) -> bool {
        self.step_sd(params) > params.receiver_radius / 2.0
    }
}

/// First-hit times binned by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstHitHistogram {
    pub slot_duration: f64,
    /// `hits[k]` counts absorptions in `(k T_b, (k + 1) T_b]`.
    pub hits: Vec<u64>,
    /// Particles still free at `t_max`.
    pub unabsorbed: u64,
    pub n_particles: u64,
    /// Set when the step was too coarse for the receiver size.
    pub coarse_step: bool,
}

impl FirstHitHistogram {
    pub fn absorbed(&self) -> u64 {
        self.hits.iter().sum()
    }

    pub fn absorbed_fraction(&self) -> f64 {
        self.absorbed() as f64 / self.n_particles as f64
    }

    pub fn unabsorbed_fraction(&self) -> f64 {
        self.unabsorbed as f64 / self.n_particles as f64
    }

    /// Per-slot hit fractions; together with the unabsorbed fraction they sum to 1.
    pub fn fractions(&self) -> Vec<f64> {
        self.hits.iter().map(|&h| h as f64 / self.n_particles as f64).collect()
    }

    /// Absorbed fraction at each slot boundary `k T_b`, `k = 1..`.
    pub fn cumulative_fractions(&self) -> Vec<f64> {
        let mut acc = 0u64;
        self.hits
            .iter()
            .map(|&h| {
                acc += h;
                acc as f64 / self.n_particles as f64
            })
            .collect()
    }

    /// `slot_index,hits,cumulative_fraction`, slots numbered from 1, with a
    /// final `unabsorbed` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot_index,hits,cumulative_fraction\n");
        for (k, (h, c)) in self.hits.iter().zip(self.cumulative_fractions()).enumerate() {
            out.push_str(&format!("{},{},{}\n", k + 1, h, c));
        }
        out.push_str(&format!("unabsorbed,{},1\n", self.unabsorbed));
        out
    }
}

/// Walks `config.n_particles` molecules from distance `d + r` of the receiver
/// centre and records the slot of each first hit.
///
/// Hits are timed at the end of the step in which they occur. While a
/// particle is far from the receiver, runs of steps are drawn as one
/// aggregated Gaussian step, which leaves the time grid unchanged. Particles are
/// split into fixed chunks with their own substreams, so the histogram is
/// identical for any number of worker threads.
pub fn simulate_first_hits(params: &ChannelParams<f64>, config: &ParticleSimConfig) -> Result<FirstHitHistogram> {
    params.validate()?;
    config.validate()?;
    let n_steps = (config.t_max / config.time_step).floor() as u64;
    let n_slots = if n_steps == 0 {
        0
    } else {
        slot_of(n_steps as f64 * config.time_step, params.slot_duration)
    };
    let walk = Walk {
        r: params.receiver_radius,
        start: params.distance + params.receiver_radius,
        sd: config.step_sd(params),
        bridge_scale: params.diffusion_coeff * config.time_step,
        dt: config.time_step,
        slot_duration: params.slot_duration,
        n_steps,
        absorption: config.absorption,
    };
    let n_chunks = config.n_particles.div_ceil(CHUNK);
    let (hits, unabsorbed) = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let size = CHUNK.min(config.n_particles - chunk * CHUNK);
            let mut rng = substream(config.rng_seed, chunk);
            let mut hits = vec![0u64; n_slots];
            let mut free = 0u64;
            for _ in 0..size {
                match walk.first_hit_step(&mut rng) {
                    Some(step) => hits[walk.slot_index(step)] += 1,
                    None => free += 1,
                }
            }
            (hits, free)
        })
        .reduce(
            || (vec![0u64; n_slots], 0u64),
            |(mut a, fa), (b, fb)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, fa + fb)
            },
        );
    Ok(FirstHitHistogram {
        slot_duration: params.slot_duration,
        hits,
        unabsorbed,
        n_particles: config.n_particles,
        coarse_step: config.is_coarse(params),
    })
}

/// 1-based slot containing time `t`, treating a hit at exactly `k T_b` as slot `k`.
fn slot_of(t: f64, slot_duration: f64) -> usize {
    ((t / slot_duration - 1e-9).ceil() as usize).max(1)
}

struct Walk {
    r: f64,
    start: f64,
    sd: f64,
    bridge_scale: f64,
    dt: f64,
    slot_duration: f64,
    n_steps: u64,
    absorption: AbsorptionCheck,
}

impl Walk {
    /// Bridge crossing probabilities below this are skipped without a draw.
    const NEGLIGIBLE_EXPONENT: f64 = 40.0;
    /// Gap, in aggregated step deviations, beyond which steps are merged.
    const FAR_FIELD_SDS: f64 = 10.0;

    fn first_hit_step(&self, rng: &mut SimRng) -> Option<u64> {
        let (mut x, mut y, mut z) = (self.start, 0.0f64, 0.0f64);
        let mut gap = self.start - self.r;
        let mut step = 0u64;
        while step < self.n_steps {
            // Far from the sphere, m consecutive steps are one Gaussian step
            // with variance m sd^2 and contact within them is negligible.
            let mut m = 1u64;
            while gap > Self::FAR_FIELD_SDS * self.sd * ((2 * m) as f64).sqrt() && step + 2 * m <= self.n_steps {
                m *= 2;
            }
            let sd = self.sd * (m as f64).sqrt();
            x += sd * rng.sample::<f64, _>(StandardNormal);
            y += sd * rng.sample::<f64, _>(StandardNormal);
            z += sd * rng.sample::<f64, _>(StandardNormal);
            step += m;
            let next_gap = (x * x + y * y + z * z).sqrt() - self.r;
            if next_gap <= 0.0 {
                return Some(step);
            }
            if self.absorption == AbsorptionCheck::BridgeCorrected {
                let exponent = gap * next_gap / (self.bridge_scale * m as f64);
                if exponent < Self::NEGLIGIBLE_EXPONENT && rng.random::<f64>() < (-exponent).exp() {
                    return Some(step);
                }
            }
            gap = next_gap;
        }
        None
    }

    fn slot_index(&self, step: u64) -> usize {
        slot_of(step as f64 * self.dt, self.slot_duration) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::absorption_cdf;

    fn quick(params: &ChannelParams<f64>) -> ParticleSimConfig {
        let peak = params.distance * params.distance / (6.0 * params.diffusion_coeff);
        ParticleSimConfig {
            time_step: peak / 50.0,
            n_particles: 5_000,
            t_max: 4.0 * params.slot_duration,
            rng_seed: 9,
            absorption: AbsorptionCheck::BridgeCorrected,
        }
    }

    #[test]
    fn no_steps_means_nothing_absorbed() {
        let p = ChannelParams::reference();
        let cfg = ParticleSimConfig { t_max: 0.5 * quick(&p).time_step, ..quick(&p) };
        let h = simulate_first_hits(&p, &cfg).unwrap();
        assert_eq!(h.absorbed(), 0);
        assert_eq!(h.unabsorbed_fraction(), 1.0);
        assert!(h.hits.is_empty());
    }

    #[test]
    fn identical_seeds_give_identical_histograms() {
        let p = ChannelParams::reference();
        let cfg = quick(&p);
        let a = simulate_first_hits(&p, &cfg).unwrap();
        assert_eq!(a, simulate_first_hits(&p, &cfg).unwrap());
        let b = simulate_first_hits(&p, &ParticleSimConfig { rng_seed: 10, ..cfg }).unwrap();
        assert_ne!(a, b);
        assert!((a.absorbed_fraction() - b.absorbed_fraction()).abs() < 0.05);
    }

    #[test]
    fn fractions_sum_to_one() {
        let p = ChannelParams::reference();
        let h = simulate_first_hits(&p, &quick(&p)).unwrap();
        let total: f64 = h.fractions().iter().sum::<f64>() + h.unabsorbed_fraction();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(h.absorbed() + h.unabsorbed, h.n_particles);
        assert_eq!(h.hits.len(), 4);
    }

    #[test]
    fn thread_count_does_not_change_the_histogram() {
        let p = ChannelParams::reference();
        let cfg = ParticleSimConfig { n_particles: 3 * CHUNK + 17, ..quick(&p) };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| simulate_first_hits(&p, &cfg)).unwrap();
        let b = three.install(|| simulate_first_hits(&p, &cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coarse_step_is_flagged() {
        let p = ChannelParams::reference();
        let fine = quick(&p);
        assert!(!fine.is_coarse(&p));
        let dt = (p.receiver_radius).powi(2) / (2.0 * p.diffusion_coeff);
        let coarse = ParticleSimConfig { time_step: dt, n_particles: 10, ..fine };
        assert!(coarse.is_coarse(&p));
        assert!(simulate_first_hits(&p, &coarse).unwrap().coarse_step);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let p = ChannelParams::reference();
        let cfg = quick(&p);
        assert!(simulate_first_hits(&p, &ParticleSimConfig { n_particles: 0, ..cfg }).is_err());
        assert!(simulate_first_hits(&p, &ParticleSimConfig { time_step: 0.0, ..cfg }).is_err());
        assert!(simulate_first_hits(&p, &ParticleSimConfig { t_max: f64::NAN, ..cfg }).is_err());
    }

    #[test]
    fn slot_boundaries_are_inclusive_on_the_right() {
        assert_eq!(slot_of(1.0, 1.0), 1);
        assert_eq!(slot_of(1.0 + 1e-6, 1.0), 2);
        assert_eq!(slot_of(0.3, 1.0), 1);
        // 400 steps of T_peak/200 land on T_b = 2 T_peak
        let peak = 4.8e-6;
        assert_eq!(slot_of(400.0 * (peak / 200.0), 2.0 * peak), 1);
    }

    #[test]
    fn csv_has_unabsorbed_row() {
        let h = FirstHitHistogram { slot_duration: 1.0, hits: vec![3, 1], unabsorbed: 6, n_particles: 10, coarse_step: false };
        assert_eq!(h.to_csv(), "slot_index,hits,cumulative_fraction\n1,3,0.3\n2,1,0.4\nunabsorbed,6,1\n");
    }

    #[test]
    fn matches_closed_form_cdf_in_first_slots() {
        let p = ChannelParams::reference();
        let cfg = ParticleSimConfig { n_particles: 20_000, t_max: 3.0 * p.slot_duration, ..quick(&p) };
        let h = simulate_first_hits(&p, &cfg).unwrap();
        let tol = 4.0 * (0.25 / cfg.n_particles as f64).sqrt();
        for (k, frac) in h.cumulative_fractions().iter().enumerate() {
            let exact = absorption_cdf((k + 1) as f64 * p.slot_duration, &p).unwrap();
            assert!((frac - exact).abs() < tol, "slot {}: {frac} vs {exact}", k + 1);
        }
    }

    #[test]
    fn bridge_correction_recovers_missed_contacts() {
        let p = ChannelParams::reference();
        let cfg = ParticleSimConfig { n_particles: 20_000, t_max: 2.0 * p.slot_duration, ..quick(&p) };
        let bridged = simulate_first_hits(&p, &cfg).unwrap();
        let naive = simulate_first_hits(&p, &ParticleSimConfig { absorption: AbsorptionCheck::EndOfStep, ..cfg }).unwrap();
        let exact = absorption_cdf(2.0 * p.slot_duration, &p).unwrap();
        assert!(naive.absorbed_fraction() < bridged.absorbed_fraction());
        assert!((bridged.absorbed_fraction() - exact).abs() < (naive.absorbed_fraction() - exact).abs());
    }
}
