//! Closed-form error rates, binary-channel transition probabilities and
//! achievable rates for the threshold-detected diffusion link.
//!
//! Slot counts are treated as sums of independent Gaussians (binomial means
//! and variances) plus counting noise. The one-slot-memory channel seen by a
//! detected bit `y_i` given `(x_i, x_{i-1})` is described by
//! [`TransitionProbs`]:
//!
//! | `x_i, x_{i-1}` | `P(y_i = 0)` | `P(y_i = 1)` |
//! |----------------|--------------|--------------|
//! | `0, 0`         | 1            | 0            |
//! | `0, 1`         | `alpha`      | `beta`       |
//! | `1, 0`         | `gamma`      | `eta`        |
//! | `1, 1`         | `lambda`     | `mu`         |

use crate::channel::{q_unchecked, ChannelParams, SlotProfile};
use crate::codecs::{decode_stream, encode_stream, CodecId};
use crate::error::{invalid, Error, Result};
use crate::link::{default_threshold, detect, random_info_bits, simulate_frame, simulate_slot_counts, LinkConfig};
use crate::scalar::{lit, Real};
use crate::stats::{wilson_half_width, Z95};
use num_traits::ToPrimitive;

/// Largest memory length accepted by the exhaustive uncoded BER formula.
pub const MAX_ANALYTIC_MEMORY: usize = 24;

/// How the `1/4` prefactors of the ISI-mitigating transition expressions are
/// treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TransitionMode {
    /// Keep the `1/4` prefactors on `alpha`, `gamma`, `lambda`; complements are
    /// still `1 - p`, so rows do not describe conditional distributions.
    AsWritten,
    /// Drop the prefactors so every row is a conditional distribution.
    #[default]
    Normalized,
}

impl std::str::FromStr for TransitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "as-written" | "aswritten" | "as_written" => Ok(TransitionMode::AsWritten),
            "normalized" | "normalised" => Ok(TransitionMode::Normalized),
            other => invalid(format!("unknown transition mode '{other}'")),
        }
    }
}

impl std::fmt::Display for TransitionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransitionMode::AsWritten => "as-written",
            TransitionMode::Normalized => "normalized",
        })
    }
}

/// Transition probabilities of the binary channel with one slot of memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionProbs<F> {
    /// `P(y=0 | x_i=0, x_{i-1}=1)`
    pub alpha: F,
    pub beta: F,
    /// `P(y=0 | x_i=1, x_{i-1}=0)`
    pub gamma: F,
    pub eta: F,
    /// `P(y=0 | x_i=1, x_{i-1}=1)`
    pub lambda: F,
    pub mu: F,
}

impl<F: Real> TransitionProbs<F> {
    /// Builds the table from the three `y = 0` probabilities; the `y = 1`
    /// entries are their complements.
    pub fn from_zero_probs(alpha: F, gamma: F, lambda: F) -> Result<Self> {
        let tp = Self {
            alpha,
            beta: F::one() - alpha,
            gamma,
            eta: F::one() - gamma,
            lambda,
            mu: F::one() - lambda,
        };
        tp.check_range()?;
        Ok(tp)
    }

    fn check_range(&self) -> Result<()> {
        for (name, v) in self.entries() {
            if !(v >= F::zero() && v <= F::one()) {
                return invalid(format!("p_{name} = {v} is not a probability"));
            }
        }
        Ok(())
    }

    fn entries(&self) -> [(&'static str, F); 6] {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("lambda", self.lambda),
            ("mu", self.mu),
        ]
    }

    /// Range checks, plus the complement identities in normalized mode.
    pub fn validate(&self, mode: TransitionMode) -> Result<()> {
        self.check_range()?;
        if mode == TransitionMode::Normalized {
            let tol: F = lit(1e-12);
            for (a, b, name) in [
                (self.alpha, self.beta, "alpha + beta"),
                (self.gamma, self.eta, "gamma + eta"),
                (self.lambda, self.mu, "lambda + mu"),
            ] {
                if (a + b - F::one()).abs() > tol {
                    return invalid(format!("{name} = {} != 1", a + b));
                }
            }
        }
        Ok(())
    }
}

/// Joint prior weight `p_xi = P(x_i, x_{i-1})` for each of the four input pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputPrior<F> {
    p_xi: F,
}

impl<F: Real> InputPrior<F> {
    pub fn new(p_xi: F) -> Result<Self> {
        if !(p_xi >= F::zero() && p_xi <= lit(0.25)) {
            return invalid(format!("p_xi = {p_xi} outside [0, 1/4]"));
        }
        Ok(Self { p_xi })
    }

    /// Equiprobable iid bits, `p_xi = 1/4`.
    pub fn uniform() -> Self {
        Self { p_xi: lit(0.25) }
    }

    pub fn p_xi(&self) -> F {
        self.p_xi
    }
}

/// `P(X < tau)` for `X ~ N(mean, var)`; a point mass when `var == 0`.
fn normal_below<F: Real>(mean: F, var: F, tau: F) -> F {
    F::one() - normal_at_or_above(mean, var, tau)
}

/// `P(X >= tau) = Q((tau - mean) / sd)` for `X ~ N(mean, var)`.
fn normal_at_or_above<F: Real>(mean: F, var: F, tau: F) -> F {
    if var <= F::zero() {
        return if mean >= tau { F::one() } else { F::zero() };
    }
    q_unchecked((tau - mean) / var.sqrt())
}

fn check_threshold<F: Real>(tau: F) -> Result<()> {
    if tau.is_nan() {
        return invalid("threshold is NaN");
    }
    Ok(())
}

/// Mean and variance of the molecules one release puts into slot `k` (1-based).
fn release_moments<F: Real>(params: &ChannelParams<F>, profile: &SlotProfile<F>, k: usize) -> (F, F) {
    let n = params.molecules();
    let p = profile.p(k);
    (n * p, n * p * (F::one() - p))
}

/// Closed-form BER of uncoded transmission with `memory_length` slots of ISI,
/// averaged over equiprobable current and past bits.
pub fn analytical_ber_uncoded<F: Real>(
    params: &ChannelParams<F>,
    profile: &SlotProfile<F>,
    tau: F,
    memory_length: usize,
) -> Result<F> {
    params.validate()?;
    check_threshold(tau)?;
    if profile.horizon() < memory_length + 1 {
        return invalid(format!(
            "slot profile horizon {} is shorter than memory length {} + 1",
            profile.horizon(),
            memory_length
        ));
    }
    if memory_length > MAX_ANALYTIC_MEMORY {
        return invalid(format!("memory length {memory_length} exceeds {MAX_ANALYTIC_MEMORY}"));
    }
    let noise_var = params.noise_sigma * params.noise_sigma;
    let moments: Vec<(F, F)> = (1..=memory_length + 1).map(|k| release_moments(params, profile, k)).collect();
    let mut total = F::zero();
    for past in 0u32..(1 << memory_length) {
        let (mut mean, mut var) = (F::zero(), noise_var);
        for l in 1..=memory_length {
            if past & (1 << (l - 1)) != 0 {
                mean = mean + moments[l].0;
                var = var + moments[l].1;
            }
        }
        // x_i = 0: false alarm; x_i = 1: miss
        total = total + normal_at_or_above(mean, var, tau);
        total = total + normal_below(mean + moments[0].0, var + moments[0].1, tau);
    }
    Ok(total / F::from_u64(1u64 << (memory_length + 1)).expect("pattern count"))
}

/// The three threshold probabilities behind the ISI-mitigating analysis:
/// `(P(N2 + Nn < tau), P(N1 + Nn < tau), P(N1 + N2 + Nn < tau))`.
fn isi_miss_probs<F: Real>(params: &ChannelParams<F>, profile: &SlotProfile<F>, tau: F) -> Result<(F, F, F)> {
    params.validate()?;
    check_threshold(tau)?;
    if profile.horizon() < 2 {
        return invalid("slot profile horizon must be at least 2");
    }
    let noise_var = params.noise_sigma * params.noise_sigma;
    let (m1, v1) = release_moments(params, profile, 1);
    let (m2, v2) = release_moments(params, profile, 2);
    Ok((
        normal_below(m2, v2 + noise_var, tau),
        normal_below(m1, v1 + noise_var, tau),
        normal_below(m1 + m2, v1 + v2 + noise_var, tau),
    ))
}

/// Closed-form BER of the ISI-mitigating code with one slot of memory:
/// the `1/4`-weighted sum of the lone-one miss, the double-one miss and the
/// trailing-zero false alarm.
pub fn analytical_ber_isi_mitigating<F: Real>(
    params: &ChannelParams<F>,
    profile: &SlotProfile<F>,
    tau: F,
) -> Result<F> {
    let (miss_after_one, miss_lone, miss_double) = isi_miss_probs(params, profile, tau)?;
    let quarter: F = lit(0.25);
    Ok(quarter * miss_lone + quarter * miss_double + quarter * (F::one() - miss_after_one))
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy<F: Real>(p: F) -> Result<F> {
    if !(p >= F::zero() && p <= F::one()) {
        return Err(Error::InvalidParameter(format!("entropy argument {p} outside [0, 1]")));
    }
    Ok(entropy_unchecked(p))
}

fn entropy_unchecked<F: Real>(p: F) -> F {
    let term = |x: F| if x > F::zero() { -x * x.log2() } else { F::zero() };
    term(p) + term(F::one() - p)
}

/// Transition probabilities of the ISI-mitigating channel from the Gaussian
/// threshold model.
pub fn transition_probs_analytical<F: Real>(
    params: &ChannelParams<F>,
    profile: &SlotProfile<F>,
    tau: F,
    mode: TransitionMode,
) -> Result<TransitionProbs<F>> {
    let (alpha, gamma, lambda) = isi_miss_probs(params, profile, tau)?;
    let scale: F = match mode {
        TransitionMode::AsWritten => lit(0.25),
        TransitionMode::Normalized => F::one(),
    };
    TransitionProbs::from_zero_probs(scale * alpha, scale * gamma, scale * lambda)
}

/// `I(X;Y) = f(p_xi (3 - (alpha + gamma + lambda))) - p_xi (f(alpha) + f(gamma) + f(lambda))`
/// with `f` the binary entropy.
///
/// Arguments of `f` outside `[0, 1]` are reported as [`Error::Domain`].
pub fn mutual_information<F: Real>(tp: &TransitionProbs<F>, prior: &InputPrior<F>) -> Result<F> {
    let p_xi = prior.p_xi();
    let p_one = p_xi * (lit::<F>(3.0) - (tp.alpha + tp.gamma + tp.lambda));
    let mut terms = F::zero();
    for (name, v) in [("P_Y(1)", p_one), ("alpha", tp.alpha), ("gamma", tp.gamma), ("lambda", tp.lambda)] {
        if !(v >= F::zero() && v <= F::one()) {
            return Err(Error::Domain(format!("entropy argument {name} = {v} outside [0, 1]")));
        }
        if name != "P_Y(1)" {
            terms = terms + entropy_unchecked(v);
        }
    }
    Ok(entropy_unchecked(p_one) - p_xi * terms)
}

/// Mutual information when the bits are iid Bernoulli(`q`), so the pair
/// weights are `(1-q)^2, (1-q) q, q (1-q), q^2`. Equals
/// [`mutual_information`] with the uniform prior at `q = 1/2`.
pub fn mutual_information_bernoulli<F: Real>(tp: &TransitionProbs<F>, q: F) -> Result<F> {
    if !(q >= F::zero() && q <= F::one()) {
        return invalid(format!("Bernoulli parameter {q} outside [0, 1]"));
    }
    tp.check_range()?;
    let not_q = F::one() - q;
    let w01 = not_q * q;
    let w10 = q * not_q;
    let w11 = q * q;
    let p_one = w01 * tp.beta + w10 * tp.eta + w11 * tp.mu;
    if !(p_one >= F::zero() && p_one <= F::one()) {
        return Err(Error::Domain(format!("P_Y(1) = {p_one} outside [0, 1]")));
    }
    let cond = w01 * entropy_unchecked(tp.alpha) + w10 * entropy_unchecked(tp.gamma) + w11 * entropy_unchecked(tp.lambda);
    Ok(entropy_unchecked(p_one) - cond)
}

/// Maximises [`mutual_information_bernoulli`] over `q` by a 1001-point scan
/// followed by golden-section refinement. Returns `(q*, I*)`.
pub fn maximize_bernoulli_prior<F: Real>(tp: &TransitionProbs<F>) -> Result<(F, F)> {
    let steps = 1000usize;
    let at = |k: usize| F::from_usize(k).unwrap() / F::from_usize(steps).unwrap();
    let mut best = (F::zero(), mutual_information_bernoulli(tp, F::zero())?);
    for k in 1..=steps {
        let q = at(k);
        let v = mutual_information_bernoulli(tp, q)?;
        if v > best.1 {
            best = (q, v);
        }
    }
    let step = at(1);
    let mut lo = (best.0 - step).max(F::zero());
    let mut hi = (best.0 + step).min(F::one());
    let ratio: F = lit((5f64.sqrt() - 1.0) / 2.0);
    for _ in 0..60 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if mutual_information_bernoulli(tp, a)? < mutual_information_bernoulli(tp, b)? {
            lo = a;
        } else {
            hi = b;
        }
    }
    let mid = (lo + hi) / lit(2.0);
    let v = mutual_information_bernoulli(tp, mid)?;
    Ok(if v > best.1 { (mid, v) } else { best })
}

/// Transition probabilities estimated from a simulated coded stream.
#[derive(Debug, Clone, PartialEq)]
pub struct McTransitions {
    pub probs: TransitionProbs<f64>,
    /// 95% Wilson half widths of `alpha`, `gamma`, `lambda`.
    pub ci95_alpha: f64,
    pub ci95_gamma: f64,
    pub ci95_lambda: f64,
    /// Observed `P(y=1 | x_i=0, x_{i-1}=0)`; the table assumes 0.
    pub false_alarm_00: f64,
    /// Slots observed per `(x_i, x_{i-1})` cell, indexed `2 x_i + x_{i-1}`.
    pub cell_counts: [u64; 4],
}

/// Estimates `P(y_i | x_i, x_{i-1})` on the coded channel of `link.codec` from
/// one simulated frame. The slot before the first has `x = 0`.
pub fn estimate_transition_probs_mc(
    params: &ChannelParams<f64>,
    profile: &SlotProfile<f64>,
    link: &LinkConfig,
) -> Result<McTransitions> {
    let trace = simulate_frame(params, profile, link)?;
    let mut cells = [0u64; 4];
    let mut zeros = [0u64; 4];
    let mut prev = 0u8;
    for (&x, &y) in trace.tx_coded.iter().zip(&trace.rx_coded) {
        let cell = (2 * x + prev) as usize;
        cells[cell] += 1;
        if y == 0 {
            zeros[cell] += 1;
        }
        prev = x;
    }
    for (cell, name) in [(1usize, "x_i=0, x_{i-1}=1"), (2, "x_i=1, x_{i-1}=0"), (3, "x_i=1, x_{i-1}=1")] {
        if cells[cell] == 0 {
            return Err(Error::InsufficientSamples(format!(
                "no slots with {name} in the {} stream",
                link.codec
            )));
        }
    }
    let freq = |cell: usize| zeros[cell] as f64 / cells[cell] as f64;
    let half = |cell: usize| wilson_half_width(zeros[cell], cells[cell], Z95);
    Ok(McTransitions {
        probs: TransitionProbs::from_zero_probs(freq(1), freq(2), freq(3))?,
        ci95_alpha: half(1),
        ci95_gamma: half(2),
        ci95_lambda: half(3),
        false_alarm_00: if cells[0] > 0 { 1.0 - freq(0) } else { 0.0 },
        cell_counts: cells,
    })
}

/// Input distribution used for the achievable rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorSearch {
    /// Equiprobable iid bits (`p_xi = 1/4`).
    #[default]
    Uniform,
    /// Best iid Bernoulli input.
    MaximizeBernoulli,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    /// Information bits per channel use, `code_rate * mutual_information`.
    pub rate: f64,
    pub mutual_information: f64,
    pub code_rate: f64,
    pub bernoulli_q: f64,
    pub transitions: TransitionProbs<f64>,
}

/// Achievable rate per information bit of `codec`.
///
/// The ISI-mitigating channel uses the closed-form transitions; every other
/// codec uses Monte Carlo estimates from its own coded stream.
pub fn achievable_rate(
    codec: CodecId,
    params: &ChannelParams<f64>,
    profile: &SlotProfile<f64>,
    tau: f64,
    prior: PriorSearch,
    mode: TransitionMode,
    link: &LinkConfig,
) -> Result<RateResult> {
    let transitions = match codec {
        CodecId::IsiMitigating421 => transition_probs_analytical(params, profile, tau, mode)?,
        _ => {
            let link = LinkConfig { codec, threshold: Some(tau), ..link.clone() };
            estimate_transition_probs_mc(params, profile, &link)?.probs
        }
    };
    let (q, mi) = match prior {
        PriorSearch::Uniform => (0.5, mutual_information(&transitions, &InputPrior::uniform())?),
        PriorSearch::MaximizeBernoulli => maximize_bernoulli_prior(&transitions)?,
    };
    let code_rate = codec.code_rate().to_f64().expect("code rate");
    Ok(RateResult { rate: code_rate * mi, mutual_information: mi, code_rate, bernoulli_q: q, transitions })
}

/// Objective minimised by [`optimize_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdObjective {
    /// Closed-form BER (uncoded or ISI-mitigating only).
    #[default]
    AnalyticBer,
    /// Monte Carlo BER with common random numbers across thresholds.
    McBer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    pub tau: f64,
    pub ber: f64,
    pub default_tau: f64,
    pub default_ber: f64,
}

/// Number of points in each pass of the threshold grid search.
pub const THRESHOLD_GRID_POINTS: usize = 512;

/// Grid search for the BER-minimising threshold over `[0, N_m (p1 + p2)]`.
///
/// A 512-point pass is followed by a 512-point pass over a window one tenth
/// as wide, centred on the best coarse point. The default threshold is also
/// scored so the result never does worse than it. Ties go to the smaller
/// threshold.
pub fn optimize_threshold(
    params: &ChannelParams<f64>,
    profile: &SlotProfile<f64>,
    codec: CodecId,
    objective: ThresholdObjective,
    link: &LinkConfig,
) -> Result<ThresholdChoice> {
    params.validate()?;
    let link = LinkConfig { codec, ..link.clone() };
    let score: Box<dyn Fn(f64) -> Result<f64>> = match objective {
        ThresholdObjective::AnalyticBer => match codec {
            CodecId::Uncoded => {
                let l = link.memory_length;
                Box::new(move |tau| analytical_ber_uncoded(params, profile, tau, l))
            }
            CodecId::IsiMitigating421 => Box::new(move |tau| analytical_ber_isi_mitigating(params, profile, tau)),
            other => {
                return Err(Error::Unsupported(format!("no closed-form BER for the {other} code")));
            }
        },
        ThresholdObjective::McBer => {
            link.validate()?;
            let info = random_info_bits(&link);
            let encoded = encode_stream(codec, &info)?;
            let counts = simulate_slot_counts(&encoded.bits, params, profile, &link)?;
            Box::new(move |tau| {
                let rx = decode_stream(codec, &detect(&counts, tau), encoded.padding)?;
                let errors = info.iter().zip(&rx).filter(|(a, b)| a != b).count();
                Ok(errors as f64 / info.len() as f64)
            })
        }
    };

    let width = params.molecules() * (profile.p(1) + profile.p(2));
    let mut best: Option<(f64, f64)> = None;
    let consider = |tau: f64, best: &mut Option<(f64, f64)>| -> Result<()> {
        let v = score(tau)?;
        match *best {
            Some((bt, bv)) if v > bv || (v == bv && tau >= bt) => {}
            _ => *best = Some((tau, v)),
        }
        Ok(())
    };
    let last = (THRESHOLD_GRID_POINTS - 1) as f64;
    for k in 0..THRESHOLD_GRID_POINTS {
        consider(width * k as f64 / last, &mut best)?;
    }
    let (coarse_tau, _) = best.expect("non-empty grid");
    let half = width / 20.0;
    let lo = (coarse_tau - half).max(0.0);
    let hi = (coarse_tau + half).min(width);
    for k in 0..THRESHOLD_GRID_POINTS {
        consider(lo + (hi - lo) * k as f64 / last, &mut best)?;
    }
    let default_tau = link.threshold.unwrap_or_else(|| default_threshold(params, profile));
    let default_ber = score(default_tau)?;
    consider(default_tau, &mut best)?;
    let (tau, ber) = best.expect("non-empty grid");
    Ok(ThresholdChoice { tau, ber, default_tau, default_ber })
}
