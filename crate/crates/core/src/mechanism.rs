//! Branching mechanisms ψ and their derived functionals.
//!
//! A sub-critical branching mechanism is a convex function
//!
//! ```text
//! ψ(λ) = αλ + βλ² + Σᵢ mᵢ (e^{−λℓᵢ} − 1 + λℓᵢ),       α = ψ'(0) > 0,
//! ```
//!
//! with drift α, diffusion coefficient β and a jump measure carried here
//! either by a finite list of atoms (mass mᵢ at size ℓᵢ) or by the stable
//! density c₀·ℓ^{−2−α₀}dℓ (up to a constant). Three parameterisations are
//! supported:
//!
//! * `Quadratic { beta, theta }` — ψ(λ) = βλ² + 2βθλ, the diffusion case,
//!   for which every downstream law has a closed form;
//! * `Stable { alpha, c0, alpha0 }` — ψ(λ) = αλ + c₀λ^{1+α₀}, α₀ ∈ (0,1];
//! * `Custom { alpha, beta, atoms }` — the general form with finitely many
//!   jump atoms.
//!
//! All evaluation is pure; a `MechanismSpec` is immutable after
//! construction and freely shareable across threads.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// One atom of the jump measure: mass `mass` at jump size `size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpAtom {
    pub mass: f64,
    pub size: f64,
}

/// A sub-critical branching mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MechanismSpec {
    Quadratic { beta: f64, theta: f64 },
    Stable { alpha: f64, c0: f64, alpha0: f64 },
    Custom { alpha: f64, beta: f64, atoms: Vec<JumpAtom> },
}

/// Outcome of checking the standing assumptions on a mechanism.
///
/// Downstream evaluators refuse to build unless every flag is true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// ψ'(0) = α > 0.
    pub subcritical: bool,
    /// Grey's condition ∫₁^∞ dv/ψ(v) < ∞ (finite extinction times).
    pub a1: bool,
    /// ℓ log ℓ condition ∫ ℓ log ℓ π(dℓ) < ∞ (finite stationary size).
    pub a2: bool,
    /// β > 0 or infinite jump activity near 0.
    pub nontrivial: bool,
    /// Human-readable reasons for every failed flag.
    pub reasons: Vec<String>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.subcritical && self.a1 && self.a2 && self.nontrivial
    }
}

/// e^{−x} − 1 + x for x ≥ 0, without cancellation for small x.
///
/// The direct expression loses all leading digits for λℓ ≲ 1e−4, so the
/// Taylor series x²/2 − x³/6 + x⁴/24 takes over there.
fn exp_neg_m1_plus(x: f64) -> f64 {
    if x < 1e-4 {
        x * x * (0.5 - x / 6.0 + x * x / 24.0)
    } else {
        (-x).exp_m1() + x
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(domain(format!("{name} must be a positive finite real, got {v}")));
    }
    Ok(())
}

fn check_nonneg_arg(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(domain(format!("lambda must be a finite real >= 0, got {lambda}")));
    }
    Ok(())
}

impl MechanismSpec {
    /// Quadratic mechanism ψ(λ) = βλ² + 2βθλ.
    pub fn quadratic(beta: f64, theta: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        check_positive("theta", theta)?;
        Ok(MechanismSpec::Quadratic { beta, theta })
    }

    /// Stable mechanism ψ(λ) = αλ + c₀λ^{1+α₀}, α₀ ∈ (0,1].
    pub fn stable(alpha: f64, c0: f64, alpha0: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("c0", c0)?;
        if !(alpha0 > 0.0 && alpha0 <= 1.0) {
            return Err(domain(format!("alpha0 must lie in (0, 1], got {alpha0}")));
        }
        Ok(MechanismSpec::Stable { alpha, c0, alpha0 })
    }

    /// General mechanism with a finite list of jump atoms.
    ///
    /// β = 0 is accepted here so that `validate` can report the resulting
    /// (A1) failure instead of hiding it behind a construction error.
    pub fn custom(alpha: f64, beta: f64, atoms: Vec<JumpAtom>) -> Result<Self> {
        check_positive("alpha", alpha)?;
        if !beta.is_finite() || beta < 0.0 {
            return Err(domain(format!("beta must be a finite real >= 0, got {beta}")));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !a.mass.is_finite() || a.mass <= 0.0 || !a.size.is_finite() || a.size <= 0.0 {
                return Err(domain(format!(
                    "atom {i} must have positive finite mass and size, got ({}, {})",
                    a.mass, a.size
                )));
            }
        }
        Ok(MechanismSpec::Custom { alpha, beta, atoms })
    }

    /// The drift α = ψ'(0).
    pub fn alpha(&self) -> f64 {
        match self {
            MechanismSpec::Quadratic { beta, theta } => 2.0 * beta * theta,
            MechanismSpec::Stable { alpha, .. } => *alpha,
            MechanismSpec::Custom { alpha, .. } => *alpha,
        }
    }

    /// ψ(λ) for λ ≥ 0.
    pub fn psi(&self, lambda: f64) -> Result<f64> {
        check_nonneg_arg(lambda)?;
        Ok(match self {
            MechanismSpec::Quadratic { beta, theta } => {
                beta * lambda * lambda + 2.0 * beta * theta * lambda
            }
            MechanismSpec::Stable { alpha, c0, alpha0 } => {
                alpha * lambda + c0 * lambda.powf(1.0 + alpha0)
            }
            MechanismSpec::Custom { alpha, beta, atoms } => {
                let jumps: f64 = atoms
                    .iter()
                    .map(|a| a.mass * exp_neg_m1_plus(lambda * a.size))
                    .sum();
                alpha * lambda + beta * lambda * lambda + jumps
            }
        })
    }

    /// ψ'(λ) = α + 2βλ + Σᵢ mᵢℓᵢ(1 − e^{−λℓᵢ}); returns α exactly at λ = 0.
    pub fn psi_prime(&self, lambda: f64) -> Result<f64> {
        check_nonneg_arg(lambda)?;
        Ok(self.alpha() + self.psi_tilde_prime(lambda)?)
    }

    /// ψ̃'(λ) = ψ'(λ) − α, the immigration rate function of the Q-process.
    pub fn psi_tilde_prime(&self, lambda: f64) -> Result<f64> {
        check_nonneg_arg(lambda)?;
        Ok(match self {
            MechanismSpec::Quadratic { beta, .. } => 2.0 * beta * lambda,
            MechanismSpec::Stable { c0, alpha0, .. } => {
                (1.0 + alpha0) * c0 * lambda.powf(*alpha0)
            }
            MechanismSpec::Custom { beta, atoms, .. } => {
                let jumps: f64 = atoms
                    .iter()
                    .map(|a| a.mass * a.size * -(-lambda * a.size).exp_m1())
                    .sum();
                2.0 * beta * lambda + jumps
            }
        })
    }

    /// n-th derivative ψ^{(n)}(λ) for n ≥ 2, in closed form per kind.
    ///
    /// For the stable kind with α₀ < 1 the value at λ = 0 is +∞, which is
    /// returned as such (ψ''(0+) ∈ (0, +∞] in general).
    pub fn psi_deriv(&self, n: u32, lambda: f64) -> Result<f64> {
        if n < 2 {
            return Err(domain("psi_deriv covers orders n >= 2".to_string()));
        }
        check_nonneg_arg(lambda)?;
        Ok(match self {
            MechanismSpec::Quadratic { beta, .. } => {
                if n == 2 {
                    2.0 * beta
                } else {
                    0.0
                }
            }
            MechanismSpec::Stable { c0, alpha0, .. } => {
                // ψ^{(n)}(λ) = c0 ∏_{j=0}^{n-1} (1+α0−j) · λ^{1+α0−n}
                let mut coeff = *c0;
                for j in 0..n {
                    coeff *= 1.0 + alpha0 - j as f64;
                }
                if coeff == 0.0 {
                    // α0 = 1 and n >= 3: the product hits zero exactly.
                    0.0
                } else {
                    coeff * lambda.powf(1.0 + alpha0 - n as f64)
                }
            }
            MechanismSpec::Custom { beta, atoms, .. } => {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let jumps: f64 = atoms
                    .iter()
                    .map(|a| a.mass * a.size.powi(n as i32) * (-lambda * a.size).exp())
                    .sum();
                let diff = if n == 2 { 2.0 * beta } else { 0.0 };
                diff + sign * jumps
            }
        })
    }

    /// E[Z] = ψ''(0+)/ψ'(0) of the stationary population; +∞ when the
    /// second derivative blows up at the origin (stable with α₀ < 1).
    pub fn mean_stationary(&self) -> f64 {
        match self {
            MechanismSpec::Quadratic { theta, .. } => 1.0 / theta,
            MechanismSpec::Stable { alpha, c0, alpha0 } => {
                if *alpha0 < 1.0 {
                    f64::INFINITY
                } else {
                    2.0 * c0 / alpha
                }
            }
            MechanismSpec::Custom { alpha, beta, atoms } => {
                let second: f64 =
                    2.0 * beta + atoms.iter().map(|a| a.mass * a.size * a.size).sum::<f64>();
                second / alpha
            }
        }
    }

    /// Check the standing assumptions; failures are reported, not raised.
    pub fn validate(&self) -> ValidationReport {
        let mut reasons = Vec::new();
        let subcritical = self.alpha() > 0.0;
        if !subcritical {
            reasons.push(format!("psi'(0) = {} is not positive", self.alpha()));
        }
        let (a1, nontrivial) = match self {
            MechanismSpec::Quadratic { .. } => (true, true),
            // λ^{1+α0} dominates the tail of 1/ψ, and the stable jump
            // measure has infinite activity near 0 (α0 < 1) or β > 0
            // in disguise (α0 = 1).
            MechanismSpec::Stable { .. } => (true, true),
            MechanismSpec::Custom { beta, .. } => {
                let has_diffusion = *beta > 0.0;
                if !has_diffusion {
                    reasons.push(
                        "beta = 0 with finitely many jump atoms: psi grows linearly, \
                         so the extinction integral int_1^inf dv/psi(v) diverges (A1 fails) \
                         and the mechanism has finite activity (non-triviality fails)"
                            .to_string(),
                    );
                }
                (has_diffusion, has_diffusion)
            }
        };
        // (A2) holds for every supported kind: finite atom lists have all
        // moments, and the stable tail exponent 1+α0 integrates ℓ log ℓ.
        let a2 = true;
        ValidationReport { subcritical, a1, a2, nontrivial, reasons }
    }

    /// Construction-time gate used by evaluators: every flag must hold.
    pub fn require_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.all_ok() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "mechanism fails standing assumptions: {}",
                report.reasons.join("; ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad() -> MechanismSpec {
        MechanismSpec::quadratic(1.0, 1.0).unwrap()
    }

    fn stable_half() -> MechanismSpec {
        MechanismSpec::stable(1.0, 1.0, 0.5).unwrap()
    }

    fn custom_unit() -> MechanismSpec {
        MechanismSpec::custom(1.0, 1.0, vec![JumpAtom { mass: 1.0, size: 1.0 }]).unwrap()
    }

    #[test]
    fn psi_quadratic_closed_form() {
        let m = quad();
        assert_eq!(m.psi(1.0).unwrap(), 3.0);
        assert_eq!(m.psi(0.0).unwrap(), 0.0);
        // Polynomial agreement to machine precision on a grid.
        for &l in &[0.25, 0.5, 2.0, 7.5, 31.0] {
            let expect = l * l + 2.0 * l;
            assert!((m.psi(l).unwrap() - expect).abs() <= 1e-15 * expect);
        }
    }

    #[test]
    fn psi_stable_closed_form() {
        let m = stable_half();
        assert!((m.psi(4.0).unwrap() - 12.0).abs() < 1e-12);
        assert_eq!(m.psi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn psi_rejects_bad_arguments() {
        let m = quad();
        assert!(m.psi(-1.0).is_err());
        assert!(m.psi(f64::NAN).is_err());
        assert!(m.psi(f64::INFINITY).is_err());
    }

    #[test]
    fn psi_prime_values() {
        let m = quad();
        assert_eq!(m.psi_prime(0.0).unwrap(), 2.0);
        assert_eq!(m.psi_prime(3.0).unwrap(), 8.0);
    }

    #[test]
    fn psi_prime_custom_saturates_to_linear_growth() {
        // ψ'(λ) − α − 2βλ = Σ mℓ(1−e^{−λℓ}) increases to Σ mℓ = 1.
        let m = custom_unit();
        let excess =
            |l: f64| m.psi_prime(l).unwrap() - 1.0 - 2.0 * l;
        let mut prev = excess(1.0);
        for &l in &[5.0, 20.0, 80.0] {
            let e = excess(l);
            assert!(e >= prev);
            prev = e;
        }
        assert!((excess(80.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi_tilde_prime_values() {
        assert_eq!(quad().psi_tilde_prime(5.0).unwrap(), 10.0);
        assert_eq!(quad().psi_tilde_prime(0.0).unwrap(), 0.0);
        assert_eq!(stable_half().psi_tilde_prime(0.0).unwrap(), 0.0);
        assert!((stable_half().psi_tilde_prime(4.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn small_argument_jump_term_is_stable() {
        // e^{-x} - 1 + x ~ x²/2 must not cancel away for tiny λℓ.
        let m = custom_unit();
        let l = 1e-6;
        let jump = m.psi(l).unwrap() - l - l * l;
        let expect = l * l / 2.0;
        assert!((jump - expect).abs() < 1e-3 * expect, "jump={jump} expect={expect}");
    }

    #[test]
    fn mean_stationary_per_kind() {
        assert_eq!(quad().mean_stationary(), 1.0);
        assert_eq!(stable_half().mean_stationary(), f64::INFINITY);
        let m = MechanismSpec::custom(2.0, 1.0, vec![JumpAtom { mass: 1.0, size: 1.0 }]).unwrap();
        assert_eq!(m.mean_stationary(), 1.5);
    }

    #[test]
    fn validate_flags() {
        assert!(quad().validate().all_ok());
        assert!(stable_half().validate().all_ok());
        let bad = MechanismSpec::custom(1.0, 0.0, vec![JumpAtom { mass: 1.0, size: 1.0 }])
            .unwrap()
            .validate();
        assert!(!bad.a1);
        assert!(!bad.all_ok());
        assert!(!bad.reasons.is_empty());
        assert!(bad.subcritical);
    }

    #[test]
    fn psi_deriv_closed_forms() {
        assert_eq!(quad().psi_deriv(2, 0.7).unwrap(), 2.0);
        assert_eq!(quad().psi_deriv(3, 0.7).unwrap(), 0.0);
        // Stable: ψ''(λ) = (1+α0)α0 c0 λ^{α0−1}.
        let s = stable_half();
        let expect = 1.5 * 0.5 * 4.0_f64.powf(-0.5);
        assert!((s.psi_deriv(2, 4.0).unwrap() - expect).abs() < 1e-14);
        // Custom third derivative is −Σ mℓ³e^{−λℓ}.
        let c = custom_unit();
        let expect = -(1.0_f64) * (-0.5_f64).exp();
        assert!((c.psi_deriv(3, 0.5).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn constructor_rejections() {
        assert!(MechanismSpec::quadratic(0.0, 1.0).is_err());
        assert!(MechanismSpec::quadratic(1.0, -1.0).is_err());
        assert!(MechanismSpec::stable(1.0, 1.0, 0.0).is_err());
        assert!(MechanismSpec::stable(1.0, 1.0, 1.5).is_err());
        assert!(MechanismSpec::custom(1.0, 1.0, vec![JumpAtom { mass: -1.0, size: 1.0 }]).is_err());
    }

    proptest! {
        // ψ is strictly increasing and midpoint convex on [0, ∞).
        #[test]
        fn psi_monotone_convex(l1 in 0.0f64..50.0, gap in 1e-6f64..50.0) {
            for m in [quad(), stable_half(), custom_unit()] {
                let l2 = l1 + gap;
                let (p1, p2) = (m.psi(l1).unwrap(), m.psi(l2).unwrap());
                prop_assert!(p1 < p2);
                let mid = m.psi(0.5 * (l1 + l2)).unwrap();
                prop_assert!(mid <= 0.5 * (p1 + p2) + 1e-12 * (1.0 + p1 + p2));
            }
        }

        // ψ̃' = ψ' − ψ'(0) exactly, and λ ↦ ψ̃'(λ)/λ is nonincreasing.
        #[test]
        fn psi_tilde_consistency(l1 in 1e-3f64..30.0, gap in 1e-3f64..30.0) {
            for m in [quad(), stable_half(), custom_unit()] {
                let l2 = l1 + gap;
                let tp = m.psi_tilde_prime(l1).unwrap();
                let diff = m.psi_prime(l1).unwrap() - m.alpha();
                prop_assert!((tp - diff).abs() <= 1e-12 * (1.0 + tp.abs()));
                let r1 = m.psi_tilde_prime(l1).unwrap() / l1;
                let r2 = m.psi_tilde_prime(l2).unwrap() / l2;
                prop_assert!(r2 <= r1 * (1.0 + 1e-12));
            }
        }
    }
}
