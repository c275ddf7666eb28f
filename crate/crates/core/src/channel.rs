//! Closed-form diffusion channel with a fully absorbing spherical receiver.
//!
//! A point transmitter sits at distance `d` from the surface of a receiver
//! sphere of radius `r`. Molecules diffuse freely with coefficient `D` and are
//! counted once when they first touch the sphere. Times are in seconds and
//! lengths in centimetres throughout.

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real};

/// Default number of molecules released for a bit 1.
pub const DEFAULT_MOLECULES_PER_ONE: u64 = 10_000;

/// Physical constants of one diffusion link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<F> {
    /// Diffusion coefficient `D` (cm²/s).
    pub diffusion_coeff: F,
    /// Receiver radius `r` (cm).
    pub receiver_radius: F,
    /// Transmitter to receiver-surface distance `d` (cm).
    pub distance: F,
    /// Symbol slot duration `T_b` (s).
    pub slot_duration: F,
    /// Molecules released for a bit 1 (`N_m`); a bit 0 releases nothing.
    pub molecules_per_one: u64,
    /// Standard deviation of the additive counting noise (molecules).
    pub noise_sigma: F,
}

impl<F: Real> ChannelParams<F> {
    /// Reference link: `D = 50e-5 cm²/s`, `r = 5e-5 cm`, `d = 12e-5 cm`,
    /// `T_b = 2 * peak_time`, noiseless.
    pub fn reference() -> Self {
        Self::with_geometry(lit(50e-5), lit(5e-5), lit(12e-5))
    }

    /// Builds a noiseless link with `T_b = 2 * peak_time` for the given geometry.
    pub fn with_geometry(diffusion_coeff: F, receiver_radius: F, distance: F) -> Self {
        let mut params = Self {
            diffusion_coeff,
            receiver_radius,
            distance,
            slot_duration: F::one(),
            molecules_per_one: DEFAULT_MOLECULES_PER_ONE,
            noise_sigma: F::zero(),
        };
        params.slot_duration = lit::<F>(2.0) * params.peak_time_unchecked();
        params
    }

    pub fn with_slot_duration(mut self, slot_duration: F) -> Self {
        self.slot_duration = slot_duration;
        self
    }

    pub fn with_molecules(mut self, molecules_per_one: u64) -> Self {
        self.molecules_per_one = molecules_per_one;
        self
    }

    pub fn with_noise_sigma(mut self, noise_sigma: F) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: F, name: &str| -> Result<()> {
            if v.is_finite() && v > F::zero() {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite, got {v}"))
            }
        };
        positive(self.diffusion_coeff, "diffusion_coeff")?;
        positive(self.receiver_radius, "receiver_radius")?;
        positive(self.distance, "distance")?;
        positive(self.slot_duration, "slot_duration")?;
        if self.molecules_per_one == 0 {
            return invalid("molecules_per_one must be at least 1");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= F::zero()) {
            return invalid(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }

    /// Probability that a molecule is ever absorbed, `r / (r + d)`.
    pub fn hit_probability(&self) -> F {
        self.receiver_radius / (self.receiver_radius + self.distance)
    }

    /// `N_m` as a scalar.
    pub fn molecules(&self) -> F {
        F::from_u64(self.molecules_per_one).expect("molecule count representable")
    }

    fn peak_time_unchecked(&self) -> F {
        self.distance * self.distance / (lit::<F>(6.0) * self.diffusion_coeff)
    }
}

impl<F: Real> Default for ChannelParams<F> {
    fn default() -> Self {
        Self::reference()
    }
}

/// First-hitting-time density of the absorbing receiver (1/s).
///
/// Zero for `t <= 0`. Integrates to [`absorption_cdf`].
pub fn hitting_density<F: Real>(t: F, params: &ChannelParams<F>) -> Result<F> {
    params.validate()?;
    if t.is_nan() {
        return invalid("time is NaN");
    }
    if t <= F::zero() {
        return Ok(F::zero());
    }
    let d = params.distance;
    let four_dt = lit::<F>(4.0) * params.diffusion_coeff * t;
    let norm = d / (F::PI() * four_dt * t * t).sqrt();
    Ok(params.hit_probability() * norm * (-(d * d) / four_dt).exp())
}

/// Fraction of released molecules absorbed during `[0, t]`:
/// `r/(r+d) * erfc(d / sqrt(4 D t))`.
pub fn absorption_cdf<F: Real>(t: F, params: &ChannelParams<F>) -> Result<F> {
    params.validate()?;
    if t.is_nan() {
        return invalid("time is NaN");
    }
    Ok(cdf_unchecked(t, params))
}

fn cdf_unchecked<F: Real>(t: F, params: &ChannelParams<F>) -> F {
    if t <= F::zero() {
        return F::zero();
    }
    let arg = params.distance / (lit::<F>(4.0) * params.diffusion_coeff * t).sqrt();
    params.hit_probability() * arg.erfc()
}

/// Time at which [`hitting_density`] peaks, `d² / (6 D)`.
pub fn peak_time<F: Real>(params: &ChannelParams<F>) -> Result<F> {
    params.validate()?;
    Ok(params.peak_time_unchecked())
}

/// Gaussian tail probability `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function<F: Real>(x: F) -> Result<F> {
    if x.is_nan() {
        return Err(Error::InvalidParameter("Q-function argument is NaN".into()));
    }
    Ok(q_unchecked(x))
}

#[inline]
pub(crate) fn q_unchecked<F: Real>(x: F) -> F {
    lit::<F>(0.5) * (x / F::SQRT_2()).erfc()
}

/// Per-slot absorption probabilities `p_{d,k}` for `k = 1..=K`.
///
/// `p_{d,k}` is the probability that a molecule released at the start of a
/// slot is absorbed during the `k`-th slot after (and including) its release.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotProfile<F> {
    probs: Vec<F>,
}

impl<F: Real> SlotProfile<F> {
    /// Wraps explicit probabilities, e.g. for idealised or ISI-free channels.
    pub fn from_probs(probs: Vec<F>) -> Result<Self> {
        if probs.is_empty() {
            return invalid("slot profile must contain at least one slot");
        }
        let mut total = F::zero();
        for (k, &p) in probs.iter().enumerate() {
            if !(p >= F::zero() && p <= F::one()) {
                return invalid(format!("p_d,{} = {p} is not a probability", k + 1));
            }
            total = total + p;
        }
        if total > F::one() + lit(1e-12) {
            return invalid(format!("slot probabilities sum to {total} > 1"));
        }
        Ok(Self { probs })
    }

    /// Memory horizon `K`.
    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    /// `p_{d,k}` with 1-based `k`; zero beyond the horizon.
    pub fn p(&self, k: usize) -> F {
        assert!(k >= 1, "slot index is 1-based");
        self.probs.get(k - 1).copied().unwrap_or_else(F::zero)
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    /// Copy with every slot after `keep` zeroed (no inter-symbol interference
    /// beyond `keep` slots).
    pub fn without_isi_after(&self, keep: usize) -> Self {
        let probs = self
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| if i < keep { p } else { F::zero() })
            .collect();
        Self { probs }
    }

    pub fn total(&self) -> F {
        self.probs.iter().fold(F::zero(), |acc, &p| acc + p)
    }
}

/// Computes `p_{d,k} = p_d(k T_b) - p_d((k-1) T_b)` for `k = 1..=horizon`.
pub fn slot_probabilities<F: Real>(params: &ChannelParams<F>, horizon: usize) -> Result<SlotProfile<F>> {
    params.validate()?;
    if horizon == 0 {
        return invalid("slot horizon K must be at least 1");
    }
    let tb = params.slot_duration;
    let mut probs = Vec::with_capacity(horizon);
    let mut prev = F::zero();
    for k in 1..=horizon {
        let cur = cdf_unchecked(F::from_usize(k).expect("slot index") * tb, params);
        // erfc is monotone but rounding can still produce a -1ulp difference
        probs.push((cur - prev).max(F::zero()));
        prev = cur;
    }
    Ok(SlotProfile { probs })
}
