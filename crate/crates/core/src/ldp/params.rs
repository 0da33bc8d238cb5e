use alloc::format;

use crate::error::{Error, Result};

/// Which unary-encoding baseline a [`UeParams`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UeVariant {
    /// Symmetric: `p + q = 1`.
    Sue,
    /// Optimized: `p = 1/2`, the whole budget spent on zeros.
    Oue,
}

/// Randomization probabilities of the multiple-encoding protocol.
///
/// A one at an even (0-based) position survives with `p1`, a one at an odd
/// position survives with `p2`, and a zero anywhere becomes a one with `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmeParams {
    epsilon: f64,
    lambda: f64,
    sensitivity: usize,
    p1: f64,
    p2: f64,
    q: f64,
    // 1 - p1, 1 - p2, 1 - q, formed without cancellation.
    complements: [f64; 3],
}

impl OmeParams {
    /// Builds a channel from raw probabilities, bypassing the budget formulas.
    ///
    /// Probabilities may sit on the closed interval `[0, 1]`. The reported
    /// `epsilon` is the budget implied by the paired-product bound (possibly
    /// infinite or NaN for degenerate channels) and `lambda` is NaN.
    pub fn from_probabilities(p1: f64, p2: f64, q: f64, sensitivity: usize) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2), ("q", q)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("{name} = {p} is not a probability")));
            }
        }
        check_sensitivity(sensitivity)?;
        let mut params = Self {
            epsilon: f64::NAN,
            lambda: f64::NAN,
            sensitivity,
            p1,
            p2,
            q,
            complements: [1.0 - p1, 1.0 - p2, 1.0 - q],
        };
        params.epsilon = super::paired_product_epsilon(&params);
        Ok(params)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of bits in a perturbed vector, `r * l`.
    pub fn sensitivity(&self) -> usize {
        self.sensitivity
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `(1 - p1, 1 - p2, 1 - q)`.
    pub fn complements(&self) -> (f64, f64, f64) {
        let [a, b, c] = self.complements;
        (a, b, c)
    }

    /// 1→1 probability at `index`.
    #[inline]
    pub fn keep_one(&self, index: usize) -> f64 {
        if index.is_multiple_of(2) {
            self.p1
        } else {
            self.p2
        }
    }
}

/// Probabilities of the symmetric / optimized unary-encoding baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeParams {
    epsilon: f64,
    sensitivity: usize,
    p: f64,
    q: f64,
    variant: Option<UeVariant>,
}

impl UeParams {
    /// A single-probability channel with arbitrary `p`, `q` in `[0, 1]`.
    pub fn from_probabilities(p: f64, q: f64, sensitivity: usize) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name} = {v} is not a probability")));
            }
        }
        if sensitivity == 0 {
            return Err(Error::param("sensitivity must be > 0"));
        }
        Ok(Self {
            epsilon: f64::NAN,
            sensitivity,
            p,
            q,
            variant: None,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sensitivity(&self) -> usize {
        self.sensitivity
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `None` for channels built with [`UeParams::from_probabilities`].
    pub fn variant(&self) -> Option<UeVariant> {
        self.variant
    }
}

/// OME probabilities for budget `epsilon`, randomization factor `lambda` and
/// an `r`-coordinate, `l`-bit-per-coordinate encoding.
///
/// `p1 = λ/(1+λ)`, `p2 = 1/(1+λ³)`, `q = 1/(1+λ·e^(ε/rl))`.
pub fn ome_params(epsilon: f64, lambda: f64, r: usize, l: usize) -> Result<OmeParams> {
    check_epsilon(epsilon)?;
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::param(format!(
            "lambda must be finite and >= 1, got {lambda}"
        )));
    }
    let sensitivity = r
        .checked_mul(l)
        .ok_or_else(|| Error::param("r*l overflows"))?;
    check_sensitivity(sensitivity)?;

    let lambda_cubed = lambda * lambda * lambda;
    let zero_odds = lambda * libm::exp(epsilon / sensitivity as f64);
    let p1 = lambda / (1.0 + lambda);
    let p2 = 1.0 / (1.0 + lambda_cubed);
    let q = 1.0 / (1.0 + zero_odds);
    let complements = [
        1.0 / (1.0 + lambda),
        lambda_cubed / (1.0 + lambda_cubed),
        zero_odds / (1.0 + zero_odds),
    ];
    for (name, p) in [("p1", p1), ("p2", p2), ("q", q)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param(format!(
                "{name} = {p} leaves (0, 1) for epsilon={epsilon}, lambda={lambda}"
            )));
        }
    }
    Ok(OmeParams {
        epsilon,
        lambda,
        sensitivity,
        p1,
        p2,
        q,
        complements,
    })
}

/// Symmetric unary encoding: `q = 1/(1+e^(ε/Δf))`, `p = 1 - q`.
pub fn sue_params(epsilon: f64, delta_f: usize) -> Result<UeParams> {
    let q = ue_q(epsilon, delta_f)?;
    Ok(UeParams {
        epsilon,
        sensitivity: delta_f,
        p: 1.0 - q,
        q,
        variant: Some(UeVariant::Sue),
    })
}

/// Optimized unary encoding: `p = 1/2`, `q = 1/(1+e^(ε/Δf))`.
pub fn oue_params(epsilon: f64, delta_f: usize) -> Result<UeParams> {
    let q = ue_q(epsilon, delta_f)?;
    Ok(UeParams {
        epsilon,
        sensitivity: delta_f,
        p: 0.5,
        q,
        variant: Some(UeVariant::Oue),
    })
}

fn ue_q(epsilon: f64, delta_f: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    if delta_f == 0 {
        return Err(Error::param("delta_f must be > 0"));
    }
    Ok(1.0 / (1.0 + libm::exp(epsilon / delta_f as f64)))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "epsilon must be finite and > 0, got {epsilon}"
        )))
    }
}

fn check_sensitivity(sensitivity: usize) -> Result<()> {
    if sensitivity == 0 || !sensitivity.is_multiple_of(2) {
        return Err(Error::param(format!(
            "sensitivity r*l = {sensitivity} must be even and > 0"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn ome_plotted_points() {
        let p = ome_params(1.0, 100.0, 50, 11).unwrap();
        assert_close(p.p1(), 0.99009900990099, 1e-12);
        assert_close(p.p2(), 9.99999000001e-7, 1e-12);
        assert_close(p.q(), 0.00988318240762078, 1e-12);

        let p = ome_params(1.0, 1.0, 50, 11).unwrap();
        assert_eq!(p.p1(), 0.5);
        assert_eq!(p.p2(), 0.5);
        assert_close(p.q(), 0.499545454670674, 1e-12);

        let p = ome_params(1.0, 10.0, 50, 11).unwrap();
        assert_close(p.p1(), 0.909090909090909, 1e-12);
        assert_close(p.p2(), 0.000999000999000999, 1e-12);
        assert_close(p.q(), 0.0907589396730121, 1e-12);

        let p = ome_params(10.0, 100.0, 50, 11).unwrap();
        assert_close(p.q(), 0.00972433348803029, 1e-12);
    }

    #[test]
    fn ome_rejects_bad_inputs() {
        assert!(ome_params(0.0, 100.0, 50, 10).is_err());
        assert!(ome_params(-1.0, 100.0, 50, 10).is_err());
        assert!(ome_params(f64::NAN, 100.0, 50, 10).is_err());
        assert!(ome_params(1.0, 0.5, 50, 10).is_err());
        assert!(ome_params(1.0, f64::INFINITY, 50, 10).is_err());
        assert!(ome_params(1.0, 100.0, 5, 9).is_err());
        assert!(ome_params(1.0, 100.0, 0, 10).is_err());
        // lambda^3 overflows to infinity, p2 would be exactly 0
        assert!(ome_params(1.0, 1e120, 50, 10).is_err());
    }

    #[test]
    fn sue_values() {
        let p = sue_params(1.0, 100).unwrap();
        assert_close(p.q(), 0.497500020833125, 1e-12);
        assert_eq!(p.p() + p.q(), 1.0);
        let p = sue_params(0.5, 100).unwrap();
        assert_close(p.q(), 0.49875000260416, 1e-12);
        assert_eq!(p.variant(), Some(UeVariant::Sue));
    }

    #[test]
    fn sue_no_privacy_limit() {
        let p = sue_params(1e4, 100).unwrap();
        assert!(p.p() >= 1.0 - 1e-12);
        assert!(p.q() <= 1e-12);
    }

    #[test]
    fn oue_values() {
        let p = oue_params(1.0, 100).unwrap();
        assert_eq!(p.p(), 0.5);
        // closed form 1/(1+e^0.01)
        assert_close(p.q(), 1.0 / (1.0 + libm::exp(0.01)), 1e-15);
        assert_close(p.q(), 0.497500020833125, 1e-12);
        assert_close(oue_params(10.0, 100).unwrap().q(), 0.47502081252106, 1e-12);
        assert!((oue_params(1e-9, 100).unwrap().q() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn ue_rejects_bad_inputs() {
        assert!(sue_params(0.0, 100).is_err());
        assert!(sue_params(1.0, 0).is_err());
        assert!(oue_params(-2.0, 100).is_err());
        assert!(oue_params(1.0, 0).is_err());
        assert!(UeParams::from_probabilities(1.5, 0.0, 10).is_err());
    }

    #[test]
    fn monotone_in_lambda_and_epsilon() {
        let lambdas = [1.0, 2.0, 10.0, 50.0, 100.0, 1000.0];
        for w in lambdas.windows(2) {
            let a = ome_params(1.0, w[0], 50, 10).unwrap();
            let b = ome_params(1.0, w[1], 50, 10).unwrap();
            assert!(b.q() < a.q());
            assert!(b.p1() > a.p1());
            assert!(b.p2() < a.p2());
        }
        let eps = [0.1, 0.5, 1.0, 5.0, 10.0, 100.0];
        for w in eps.windows(2) {
            let a = ome_params(w[0], 100.0, 50, 10).unwrap();
            let b = ome_params(w[1], 100.0, 50, 10).unwrap();
            assert!(b.q() < a.q());
        }
    }
}
