//! Analytic laws of the stationary population.
//!
//! All quantities refer to the population alive at time 0 of the
//! stationary process: `Z` is its size, `A` the age of the most recent
//! common ancestor (TMRCA), `Z^A` the population size just before the
//! MRCA, `Z^I` the part of the time-0 population born after the MRCA,
//! `Z^O` the part descending from the MRCA's own clan (so Z = Z^I + Z^O),
//! `Z^A_+` the size at the MRCA including its clan's initial mass, `N^A`
//! the number of families in the oldest clan, and `A^n` the TMRCA of n
//! uniformly sampled individuals together with the immortal lineage.
//!
//! Conditional laws are exposed at Laplace-transform / pgf level, which
//! is where the general-mechanism formulas live; distribution functions
//! and densities are exposed where closed forms exist (the TMRCA for all
//! mechanisms, plus the quadratic special cases). No numerical transform
//! inversion is performed anywhere.

use crate::cumulant::CumulantEvaluator;
use crate::error::{capability, domain, Result};
use crate::mechanism::MechanismSpec;
use crate::numeric::fd;

/// Laws of the stationary population carried by a cumulant evaluator.
pub struct StationaryLaw {
    ev: CumulantEvaluator,
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(domain(format!("{name} must be a finite real >= 0, got {v}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(domain(format!("{name} must be a positive finite real, got {v}")));
    }
    Ok(())
}

impl StationaryLaw {
    pub fn new(ev: CumulantEvaluator) -> Self {
        StationaryLaw { ev }
    }

    pub fn evaluator(&self) -> &CumulantEvaluator {
        &self.ev
    }

    pub fn spec(&self) -> &MechanismSpec {
        self.ev.spec()
    }

    /// E[e^{−λZ}] = e^{−αG(λ)} κ*α / ψ(λ); equals (2θ/(2θ+λ))² in the
    /// quadratic case.
    pub fn laplace_z(&self, lambda: f64) -> Result<f64> {
        check_nonneg("lambda", lambda)?;
        if lambda == 0.0 {
            return Ok(1.0);
        }
        let alpha = self.ev.alpha();
        let kappa = self.ev.kappa()?;
        let g = self.ev.big_g(lambda)?;
        Ok((-alpha * g).exp() * kappa * alpha / self.spec().psi(lambda)?)
    }

    /// E[Z e^{−λZ}] = (ψ̃'(λ)/ψ(λ)) E[e^{−λZ}] for λ > 0.
    pub fn mean_z_tilted(&self, lambda: f64) -> Result<f64> {
        check_positive("lambda", lambda)?;
        let ratio = self.spec().psi_tilde_prime(lambda)? / self.spec().psi(lambda)?;
        Ok(ratio * self.laplace_z(lambda)?)
    }

    /// E[Z] = ψ''(0+)/ψ'(0), possibly +∞.
    pub fn mean_stationary(&self) -> f64 {
        self.spec().mean_stationary()
    }

    /// P(A ≤ t) = E[e^{−c(t)Z}] = κ*α e^{−αt}/ψ(c(t)).
    pub fn cdf_a(&self, t: f64) -> Result<f64> {
        check_nonneg("t", t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let c = self.ev.c_of(t)?;
        let alpha = self.ev.alpha();
        let kappa = self.ev.kappa()?;
        Ok(kappa * alpha * (-alpha * t).exp() / self.spec().psi(c)?)
    }

    /// Density of the TMRCA: f_A(t) = (ψ̃'(c(t))/ψ(c(t))) e^{−αt} κ*α.
    pub fn pdf_a(&self, t: f64) -> Result<f64> {
        check_positive("t", t)?;
        let c = self.ev.c_of(t)?;
        let alpha = self.ev.alpha();
        let kappa = self.ev.kappa()?;
        Ok(self.spec().psi_tilde_prime(c)? / self.spec().psi(c)?
            * (-alpha * t).exp()
            * kappa
            * alpha)
    }

    /// E[e^{−λZ^A} | A = t] = E[e^{−(λ+c(t))Z}] / E[e^{−c(t)Z}]: the
    /// stationary size exponentially tilted by the survival rate c(t).
    pub fn laplace_za_given_a(&self, lambda: f64, t: f64) -> Result<f64> {
        check_nonneg("lambda", lambda)?;
        check_positive("t", t)?;
        let c = self.ev.c_of(t)?;
        Ok(self.laplace_z(lambda + c)? / self.laplace_z(c)?)
    }

    /// E[Z^A | A = t] = ψ̃'(c(t))/ψ(c(t)).
    pub fn mean_za_given_a(&self, t: f64) -> Result<f64> {
        check_positive("t", t)?;
        let c = self.ev.c_of(t)?;
        Ok(self.spec().psi_tilde_prime(c)? / self.spec().psi(c)?)
    }

    /// E[e^{−γZ^I} | A = t] = exp(−∫₀ᵗ ψ̃'(u(γ,s)) ds): the immigration
    /// laid down by the immortal lineage on (−t, 0).
    pub fn laplace_zi_given_a(&self, gamma: f64, t: f64) -> Result<f64> {
        check_nonneg("gamma", gamma)?;
        check_positive("t", t)?;
        if gamma == 0.0 {
            return Ok(1.0);
        }
        Ok((-self.ev.int_psi_tilde_u(gamma, 0.0, t)?).exp())
    }

    /// E[e^{−ηZ^O} | A = t] = (ψ̃'(c(t)) − ψ̃'(u(η,t))) / ψ̃'(c(t)): the
    /// oldest clan conditioned to survive to time 0.
    pub fn laplace_zo_given_a(&self, eta: f64, t: f64) -> Result<f64> {
        check_nonneg("eta", eta)?;
        check_positive("t", t)?;
        if eta == 0.0 {
            return Ok(1.0);
        }
        let c = self.ev.c_of(t)?;
        let tp_c = self.spec().psi_tilde_prime(c)?;
        let tp_u = self.spec().psi_tilde_prime(self.ev.u_of(eta, t)?)?;
        Ok((tp_c - tp_u) / tp_c)
    }

    /// E[e^{−λZ^A_+} | A = t]: the population size at the MRCA including
    /// the clan's initial jump mass; differs from Z^A only through jumps.
    pub fn laplace_zaplus_given_a(&self, lambda: f64, t: f64) -> Result<f64> {
        check_positive("lambda", lambda)?;
        check_positive("t", t)?;
        let c = self.ev.c_of(t)?;
        let correction = (self.spec().psi_prime(lambda + c)? - self.spec().psi_prime(lambda)?)
            / (self.spec().psi_prime(c)? - self.ev.alpha());
        Ok(self.laplace_za_given_a(lambda, t)? * correction)
    }

    /// The joint law E[e^{−λZ^A−γZ^I−ηZ^O}; A ∈ dt]/dt, assembled
    /// directly from its three Poissonian blocks. Testing code compares
    /// this against pdf_a · laplace_za · laplace_zi · laplace_zo.
    pub fn joint_mrca_density(&self, lambda: f64, gamma: f64, eta: f64, t: f64) -> Result<f64> {
        check_nonneg("lambda", lambda)?;
        check_nonneg("gamma", gamma)?;
        check_nonneg("eta", eta)?;
        check_positive("t", t)?;
        let c = self.ev.c_of(t)?;
        let front =
            self.spec().psi_tilde_prime(c)? - self.spec().psi_tilde_prime(self.ev.u_of(eta, t)?)?;
        let mid = if gamma == 0.0 { 0.0 } else { self.ev.int_psi_tilde_u(gamma, 0.0, t)? };
        let tail = self.ev.int_psi_tilde_u(lambda + c, 0.0, f64::INFINITY)?;
        Ok(front * (-mid - tail).exp())
    }

    /// P(N^A = n | A = t) = (−1)^{n+1} c(t)^n ψ^{(n+1)}(c(t)) / (n! ψ̃'(c(t))).
    pub fn pmf_na_given_a(&self, n: u32, t: f64) -> Result<f64> {
        if n == 0 {
            return Err(domain("N^A takes values n >= 1".to_string()));
        }
        check_positive("t", t)?;
        match self.spec() {
            MechanismSpec::Quadratic { .. } => Ok(if n == 1 { 1.0 } else { 0.0 }),
            MechanismSpec::Stable { alpha0, .. } => {
                if *alpha0 >= 1.0 {
                    Ok(if n == 1 { 1.0 } else { 0.0 })
                } else {
                    Ok(sibuya_pmf(*alpha0, n))
                }
            }
            MechanismSpec::Custom { beta, atoms, .. } => {
                let c = self.ev.c_of(t)?;
                let tp_c = self.spec().psi_tilde_prime(c)?;
                // (−1)^{n+1} c^n ψ^{(n+1)}(c)/n! turns into Poisson-shaped
                // atom weights: n = 1 gets 2βc + Σ mℓ·(cℓ)e^{−cℓ}; n >= 2
                // gets Σ mℓ·(cℓ)^n e^{−cℓ}/n!.
                let mut acc = if n == 1 { 2.0 * beta * c } else { 0.0 };
                for a in atoms {
                    acc += a.mass * a.size * poisson_weight(n, c * a.size);
                }
                Ok(acc / tp_c)
            }
        }
    }

    /// E[a^{N^A} | A = t] = 1 − ψ̃'((1−a)c(t)) / ψ̃'(c(t)), a ∈ [0, 1].
    pub fn pgf_na_given_a(&self, a: f64, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&a) {
            return Err(domain(format!("pgf argument must lie in [0, 1], got {a}")));
        }
        check_positive("t", t)?;
        let c = self.ev.c_of(t)?;
        Ok(1.0 - self.spec().psi_tilde_prime((1.0 - a) * c)? / self.spec().psi_tilde_prime(c)?)
    }

    /// E[N^A | A = t] = ψ''(0) c(t) / ψ̃'(c(t)); +∞ for the stable kind
    /// with α₀ < 1, where ψ''(0+) = ∞ and the mean genuinely diverges.
    pub fn mean_na_given_a(&self, t: f64) -> Result<f64> {
        check_positive("t", t)?;
        if let MechanismSpec::Stable { alpha0, .. } = self.spec() {
            if *alpha0 < 1.0 {
                return Ok(f64::INFINITY);
            }
        }
        let c = self.ev.c_of(t)?;
        Ok(self.spec().psi_deriv(2, 0.0)? * c / self.spec().psi_tilde_prime(c)?)
    }

    /// E[Zⁿ e^{−λZ} 1{Aⁿ ≤ T}]: the joint moment functional of the
    /// population size and the TMRCA of n sampled individuals.
    ///
    /// Quadratic mechanisms use the closed form
    /// (n+1)! sⁿ/(2θ+λs)ⁿ · (2θ/(2θ+λ))², s = 1 − e^{−2βθT}; other kinds
    /// differentiate ψ(u(λ+η,T))/ψ(λ+η) numerically in η, which caps n
    /// at 4 before noise dominates.
    pub fn moment_an(&self, n: u32, lambda: f64, big_t: f64) -> Result<f64> {
        if n == 0 {
            return Err(domain("moment order n must be >= 1".to_string()));
        }
        check_nonneg("lambda", lambda)?;
        check_positive("T", big_t)?;
        if let MechanismSpec::Quadratic { beta, theta } = self.spec() {
            let s = -(-2.0 * beta * theta * big_t).exp_m1();
            let two_theta = 2.0 * theta;
            let log_fact: f64 = (2..=n as u64 + 1).map(|k| (k as f64).ln()).sum();
            let val = (log_fact + n as f64 * (s.ln() - (two_theta + lambda * s).ln())).exp()
                * (two_theta / (two_theta + lambda)).powi(2);
            return Ok(val);
        }
        if n > 4 {
            return Err(capability(
                "moment_an supports n <= 4 for non-quadratic mechanisms \
                 (finite-difference derivative)"
                    .to_string(),
            ));
        }
        if lambda == 0.0 && self.mean_stationary().is_infinite() {
            return Err(domain(
                "moment_an at lambda = 0 requires a finite stationary mean; \
                 this mechanism has E[Z] = +infinity"
                    .to_string(),
            ));
        }
        // Prefactor e^{−αG(λ)}κ*α/ψ(u(λ,T)), written through laplace_z so
        // the λ → 0 limit stays finite: ψ(λ)/ψ(u(λ,T)) → e^{αT}.
        let prefactor = if lambda == 0.0 {
            (self.ev.alpha() * big_t).exp()
        } else {
            self.laplace_z(lambda)? * self.spec().psi(lambda)?
                / self.spec().psi(self.ev.u_of(lambda, big_t)?)?
        };
        let ratio = |x: f64| -> Result<f64> {
            if x == 0.0 {
                // ψ(u(x,T))/ψ(x) extends continuously with value e^{−αT}.
                Ok((-self.ev.alpha() * big_t).exp())
            } else {
                Ok(self.spec().psi(self.ev.u_of(x, big_t)?)? / self.spec().psi(x)?)
            }
        };
        let h = 1e-2 * lambda.max(1.0);
        let deriv = fd::derivative(&ratio, lambda, n, h)?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(prefactor * sign * deriv)
    }

    /// P(A¹ ≤ t) for the quadratic mechanism:
    /// 2(s/(1−s))(1 + (s/(1−s))·log s) with s = 1 − e^{−2βθt}.
    pub fn cdf_a1_quadratic(&self, t: f64) -> Result<f64> {
        let MechanismSpec::Quadratic { beta, theta } = self.spec() else {
            return Err(capability(
                "the distribution function of A^1 has a closed form only for the \
                 quadratic mechanism"
                    .to_string(),
            ));
        };
        check_positive("t", t)?;
        let q = (-2.0 * beta * theta * t).exp();
        if q < 0.5 {
            // Direct form; log s = ln(1−q) is well conditioned here.
            let s = 1.0 - q;
            let m = s / q;
            Ok(2.0 * m * (1.0 + m * (-q).ln_1p()))
        } else {
            // Series in q: cdf = (1−q) Σ_{j≥0} 2 q^j/((j+1)(j+2)), which
            // avoids the 1 + M·log s cancellation as q → 1 (t → 0).
            let mut sum = 0.0;
            let mut qj = 1.0;
            for j in 0..200u32 {
                let term = 2.0 * qj / ((j as f64 + 1.0) * (j as f64 + 2.0));
                sum += term;
                if term < 1e-17 * sum {
                    break;
                }
                qj *= q;
            }
            Ok((1.0 - q) * sum)
        }
    }
}

/// P(N = n) for the Sibuya-type pgf 1 − (1−a)^{α₀}: p₁ = α₀ and
/// p_{n+1}/p_n = (n − α₀)/(n + 1).
fn sibuya_pmf(alpha0: f64, n: u32) -> f64 {
    let mut p = alpha0;
    for k in 1..n {
        p *= (k as f64 - alpha0) / (k as f64 + 1.0);
    }
    p
}

/// xⁿ e^{−x} / n! computed in log space.
fn poisson_weight(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let log_fact: f64 = (2..=n as u64).map(|k| (k as f64).ln()).sum();
    (n as f64 * x.ln() - x - log_fact).exp()
}
