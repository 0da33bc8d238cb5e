//! Analytic and Monte Carlo checks of the randomizers.

use alloc::format;
use alloc::vec::Vec;

use super::{OmeParams, Randomizer};
use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// Smallest trial count accepted by [`empirical_flip_rates`].
pub const MIN_FLIP_TRIALS: u64 = 10_000;

fn log_odds(p: f64, complement: f64) -> f64 {
    libm::log(p) - libm::log(complement)
}

/// Budget implied by the paired-product bound of an OME channel.
///
/// Half the positions pair `p1` with `q`, the other half pair `p2` with `q`:
/// `(rl/2) * [ln(p1/(1-p1)) + ln(p2/(1-p2)) + 2 ln((1-q)/q)]`.
/// For probabilities produced by [`super::ome_params`] this equals the
/// requested epsilon.
pub fn paired_product_epsilon(params: &OmeParams) -> f64 {
    let half = params.sensitivity() as f64 / 2.0;
    let (p1_c, p2_c, q_c) = params.complements();
    let zero_term = -log_odds(params.q(), q_c);
    half * ((log_odds(params.p1(), p1_c) + zero_term) + (log_odds(params.p2(), p2_c) + zero_term))
}

/// Sum over positions of the largest single-bit log-likelihood ratio.
///
/// At each position the two candidate inputs differ (one encodes a 1, the
/// other a 0), so the observer sees either a 1 (`ln(p_i/q)`) or a 0
/// (`ln((1-q)/(1-p_i))`); the worse of the two is accumulated.
pub fn audit_max_log_ratio(
    p_at_index: impl Fn(usize) -> f64,
    q: f64,
    length: usize,
) -> Result<f64> {
    check_open_unit("q", q)?;
    let (ln_q, ln_not_q) = (libm::log(q), libm::log1p(-q));
    let mut total = 0.0;
    for i in 0..length {
        let p = p_at_index(i);
        check_open_unit("p", p)?;
        let observe_one = (libm::log(p) - ln_q).abs();
        let observe_zero = (ln_not_q - libm::log1p(-p)).abs();
        total += observe_one.max(observe_zero);
    }
    Ok(total)
}

impl OmeParams {
    pub fn max_log_ratio(&self) -> Result<f64> {
        audit_max_log_ratio(|i| self.keep_one(i), self.q(), self.sensitivity())
    }
}

fn check_open_unit(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} = {p} must lie in (0, 1)")))
    }
}

/// Monte Carlo tally of one transition probability.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    /// `p1`, `p2`, `p` or `q`.
    pub name: &'static str,
    pub analytic: f64,
    pub successes: u64,
    pub trials: u64,
}

impl RateEstimate {
    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// Plug-in binomial standard error of the estimate.
    pub fn std_error(&self) -> f64 {
        let p = self.estimate();
        libm::sqrt(p * (1.0 - p) / self.trials as f64)
    }

    /// Binomial standard deviation of the estimate under the analytic rate.
    pub fn analytic_std_error(&self) -> f64 {
        libm::sqrt(self.analytic * (1.0 - self.analytic) / self.trials as f64)
    }

    /// Distance from the analytic value in analytic standard deviations.
    pub fn z_score(&self) -> f64 {
        (self.estimate() - self.analytic) / self.analytic_std_error()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipRates {
    pub rates: Vec<RateEstimate>,
}

impl FlipRates {
    pub fn get(&self, name: &str) -> Option<&RateEstimate> {
        self.rates.iter().find(|r| r.name == name)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.rates
            .iter()
            .map(|r| r.z_score().abs())
            .fold(0.0, f64::max)
    }
}

/// Estimates every transition probability of `randomizer` from `trials`
/// Bernoulli outcomes each, by perturbing all-ones and all-zeros vectors.
///
/// OME reports `p1` (even positions), `p2` (odd positions) and `q`; the
/// baselines report `p` and `q`.
pub fn empirical_flip_rates(
    randomizer: &Randomizer,
    trials: u64,
    seed: RngSeed,
) -> Result<FlipRates> {
    if trials < MIN_FLIP_TRIALS {
        return Err(Error::param(format!(
            "need at least {MIN_FLIP_TRIALS} trials, got {trials}"
        )));
    }
    let (p1, p2, q) = randomizer.probabilities();
    let len = randomizer.sensitivity();
    let mut rates = Vec::new();
    match randomizer {
        Randomizer::Ome(_) => {
            rates.push(tally(
                randomizer,
                "p1",
                p1,
                true,
                Some(0),
                trials,
                seed.derive(0),
            )?);
            rates.push(tally(
                randomizer,
                "p2",
                p2,
                true,
                Some(1),
                trials,
                seed.derive(1),
            )?);
        }
        Randomizer::Ue(_) => {
            rates.push(tally(
                randomizer,
                "p",
                p1,
                true,
                None,
                trials,
                seed.derive(0),
            )?);
        }
    }
    rates.push(tally(
        randomizer,
        "q",
        q,
        false,
        None,
        trials,
        seed.derive(2),
    )?);
    debug_assert!(rates.iter().all(|r| r.trials == trials && len > 0));
    Ok(FlipRates { rates })
}

fn tally(
    randomizer: &Randomizer,
    name: &'static str,
    analytic: f64,
    input_bit: bool,
    parity: Option<usize>,
    trials: u64,
    seed: RngSeed,
) -> Result<RateEstimate> {
    let len = randomizer.sensitivity();
    let input = if input_bit {
        BitVector::ones(len, 0)
    } else {
        BitVector::zeros(len, 0)
    };
    let positions: Vec<usize> = match parity {
        Some(parity) => (parity..len).step_by(2).collect(),
        None => (0..len).collect(),
    };
    let (mut done, mut successes, mut stream) = (0u64, 0u64, 0u64);
    while done < trials {
        let out = randomizer.perturb(&input, seed.with_stream(stream))?;
        stream += 1;
        for &i in &positions {
            if done == trials {
                break;
            }
            done += 1;
            successes += u64::from(out.bits().get(i));
        }
    }
    Ok(RateEstimate {
        name,
        analytic,
        successes,
        trials,
    })
}
