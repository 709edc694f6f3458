//! The cumulant semigroup u(λ,t), extinction function c(t), the constant
//! κ* and the clan-count exponent Λ(d).
//!
//! Everything is driven by one monotone primitive,
//!
//! ```text
//! G(x) = ∫ₓ^∞ dv/ψ(v),       x > 0,
//! ```
//!
//! which is strictly decreasing from +∞ (at 0+) to 0 (at ∞). The
//! extinction function is its inverse, c(t) = G⁻¹(t), and the cumulant
//! flow is the shift
//!
//! ```text
//! u(λ, t) = G⁻¹(t + G(λ)),
//! ```
//!
//! so one quadrature + one root-finder serve u, c, c⁻¹ and Λ without ever
//! integrating the stiff ODE ∂ₜu = −ψ(u). For the quadratic mechanism all
//! of these collapse to closed forms; the numeric route can still be
//! forced (`force_numeric_route`) to cross-validate the generic machinery
//! against them.
//!
//! Numerically, G splits into a tail integral above `tail_start`
//! (substitution w = v^{−p}, which makes the integrand smooth and bounded,
//! with p = α₀ for the stable kind and p = 1 otherwise) and a ladder of
//! anchor segments at powers of two below it (substitution v = e^y, whose
//! integrand tends to the constant 1/α near the origin). Anchor values are
//! memoized in an append-only sorted table; they sit at fixed positions,
//! so every evaluation returns the same result no matter which anchors
//! other threads have populated.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{domain, numeric, Result};
use crate::mechanism::MechanismSpec;
use crate::numeric::{quad, root};

/// Numerical tolerances of the evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative quadrature tolerance for G and derived integrals.
    pub rel_quad: f64,
    /// Relative root-finding tolerance for G⁻¹.
    pub rel_root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel_quad: 1e-10, rel_root: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Route {
    /// Quadratic closed forms (β, θ).
    Closed { beta: f64, theta: f64 },
    /// Quadrature + root-finding through G.
    Numeric,
}

/// Evaluator of the cumulant machinery for one mechanism.
pub struct CumulantEvaluator {
    spec: MechanismSpec,
    alpha: f64,
    tol: Tolerances,
    route: Route,
    /// Exponent p of the tail substitution w = v^{−p}.
    tail_exponent: f64,
    /// Tail integration starts here; the anchor ladder covers (0, tail_start).
    tail_start: f64,
    /// k ↦ G(2^k) for ladder points, including the top one.
    anchors: Mutex<BTreeMap<i32, f64>>,
    /// Smallest k with 2^k ≥ tail_start.
    k_top: i32,
    kappa_cache: OnceLock<Result<f64>>,
}

// The f64 ladder bottoms out near 2^-1074; stay clear of subnormals.
const K_MIN: i32 = -1000;
const K_MAX: i32 = 1020;

impl CumulantEvaluator {
    /// Build an evaluator; quadratic mechanisms get the closed-form route.
    pub fn new(spec: MechanismSpec, tol: Tolerances) -> Result<Self> {
        spec.require_valid()?;
        let route = match spec {
            MechanismSpec::Quadratic { beta, theta } => Route::Closed { beta, theta },
            _ => Route::Numeric,
        };
        Self::build(spec, tol, route)
    }

    /// Build an evaluator that uses the generic G route even for the
    /// quadratic kind (cross-validation of the numeric path).
    pub fn force_numeric_route(spec: MechanismSpec, tol: Tolerances) -> Result<Self> {
        spec.require_valid()?;
        Self::build(spec, tol, Route::Numeric)
    }

    fn build(spec: MechanismSpec, tol: Tolerances, route: Route) -> Result<Self> {
        let alpha = spec.alpha();
        let (tail_exponent, tail_start) = match &spec {
            MechanismSpec::Stable { alpha, c0, alpha0 } => {
                // Jump part dominates the drift tenfold beyond this point.
                (*alpha0, (10.0 * alpha / c0).powf(1.0 / alpha0).max(1.0))
            }
            MechanismSpec::Quadratic { beta, theta } => {
                (1.0, (10.0 * 2.0 * beta * theta / beta).max(1.0))
            }
            MechanismSpec::Custom { alpha, beta, atoms } => {
                let linear: f64 =
                    alpha + atoms.iter().map(|a| a.mass * a.size).sum::<f64>();
                (1.0, (10.0 * linear / beta).max(1.0))
            }
        };
        let k_top = tail_start.log2().ceil() as i32;
        Ok(CumulantEvaluator {
            spec,
            alpha,
            tol,
            route,
            tail_exponent,
            tail_start,
            anchors: Mutex::new(BTreeMap::new()),
            k_top,
            kappa_cache: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// ∫ over the tail [x, ∞) via the substitution w = v^{−p}.
    fn tail_integral(&self, x: f64) -> Result<f64> {
        let p = self.tail_exponent;
        let spec = &self.spec;
        let integrand = move |w: f64| {
            let v = w.powf(-1.0 / p);
            (1.0 / p) * w.powf(-1.0 / p - 1.0) / spec.psi(v).unwrap_or(f64::INFINITY)
        };
        quad::integrate(integrand, 0.0, x.powf(-p), self.tol.rel_quad)
    }

    /// ∫ₐᵇ dv/ψ(v) over a finite interval via the substitution v = e^y.
    fn segment_integral(&self, a: f64, b: f64) -> Result<f64> {
        let spec = &self.spec;
        let integrand = move |y: f64| {
            let v = y.exp();
            v / spec.psi(v).unwrap_or(f64::INFINITY)
        };
        quad::integrate(integrand, a.ln(), b.ln(), self.tol.rel_quad)
    }

    /// Memoized G(2^k) for k ≤ k_top.
    fn anchor(&self, k: i32) -> Result<f64> {
        if let Some(&v) = self.anchors.lock().unwrap().get(&k) {
            return Ok(v);
        }
        let value = if k >= self.k_top {
            self.tail_integral((k as f64).exp2())?
        } else {
            // Walk down from the nearest existing anchor above.
            let above = self.anchor(k + 1)?;
            above + self.segment_integral((k as f64).exp2(), ((k + 1) as f64).exp2())?
        };
        self.anchors.lock().unwrap().insert(k, value);
        Ok(value)
    }

    /// G(x) = ∫ₓ^∞ dv/ψ(v) for x > 0.
    pub fn big_g(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(domain(format!("G requires x > 0, got {x}")));
        }
        if let Route::Closed { beta, theta } = self.route {
            return Ok((2.0 * theta / x).ln_1p() / (2.0 * theta * beta));
        }
        if x >= self.tail_start {
            return self.tail_integral(x);
        }
        let k = x.log2().floor() as i32;
        if k < K_MIN {
            return Err(numeric(format!("G evaluated too close to 0 (x = {x:.3e})")));
        }
        let ka = (k + 1).min(self.k_top);
        let anchor_x = (ka as f64).exp2();
        Ok(self.anchor(ka)? + self.segment_integral(x, anchor_x)?)
    }

    /// c(t) = G⁻¹(t), the canonical rate of a clan surviving beyond t.
    pub fn c_of(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(domain(format!("c(t) requires t > 0, got {t}")));
        }
        if let Route::Closed { beta, theta } = self.route {
            let q = (-2.0 * theta * beta * t).exp();
            if q == 0.0 {
                return Err(numeric(format!("c({t}) underflows f64")));
            }
            return Ok(2.0 * theta * q / (1.0 - q));
        }
        // Bracket t between ladder anchors: G(2^k) >= t >= G(2^{k+1}).
        let mut k = 0i32;
        while self.anchor_or_tail(k)? < t {
            k -= 1;
            if k < K_MIN {
                return Err(numeric(format!("c({t}) underflows the anchor ladder")));
            }
        }
        while self.anchor_or_tail(k + 1)? > t {
            k += 1;
            if k > K_MAX {
                return Err(numeric(format!("c({t}) overflows the anchor ladder")));
            }
        }
        let (lo, hi) = ((k as f64).exp2(), ((k + 1) as f64).exp2());
        root::newton_bracketed(
            |x| self.big_g(x).unwrap_or(f64::NAN) - t,
            |x| -1.0 / self.spec.psi(x).unwrap_or(f64::INFINITY),
            lo,
            hi,
            self.tol.rel_root,
        )
    }

    /// G at ladder point 2^k, via the tail integral above the ladder top.
    fn anchor_or_tail(&self, k: i32) -> Result<f64> {
        if k > self.k_top {
            self.tail_integral((k as f64).exp2())
        } else {
            self.anchor(k)
        }
    }

    /// The cumulant u(λ, t): Laplace exponent of the underlying branching
    /// semigroup, computed as G⁻¹(t + G(λ)).
    pub fn u_of(&self, lambda: f64, t: f64) -> Result<f64> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(domain(format!("u requires lambda >= 0, got {lambda}")));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(domain(format!("u requires t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(lambda);
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        if let Route::Closed { beta, theta } = self.route {
            let q = (-2.0 * theta * beta * t).exp();
            return Ok(2.0 * theta * lambda * q / (2.0 * theta + lambda * (1.0 - q)));
        }
        self.c_of(t + self.big_g(lambda)?)
    }

    /// κ* = lim_{t→∞} c(t)e^{αt} ∈ (0, ∞).
    ///
    /// Closed form 2θ for the quadratic route; otherwise the doubling
    /// limit of c(T)e^{αT}, cached after the first call.
    pub fn kappa(&self) -> Result<f64> {
        if let Route::Closed { theta, .. } = self.route {
            return Ok(2.0 * theta);
        }
        self.kappa_cache
            .get_or_init(|| {
                let mut t = 5.0 / self.alpha;
                let mut prev = f64::NAN;
                for _ in 0..60 {
                    if self.alpha * t > 600.0 {
                        break;
                    }
                    let c = self.c_of(t)?;
                    let val = (c.ln() + self.alpha * t).exp();
                    if prev.is_finite() && (val - prev).abs() < 1e-8 * val {
                        return Ok(val);
                    }
                    prev = val;
                    t *= 2.0;
                }
                Err(numeric(format!(
                    "kappa* doubling limit did not converge (last value {prev:.6e}, \
                     horizon alpha*T capped at 600)"
                )))
            })
            .clone()
    }

    /// ∫ₜᵀ ψ̃'(u(λ,s)) ds through the log identity
    /// log(ψ(u(λ,t))e^{αt} / ψ(u(λ,T))e^{αT}); `T = f64::INFINITY` uses
    /// the κ* limit. No quadrature over s is performed.
    pub fn int_psi_tilde_u(&self, lambda: f64, t: f64, big_t: f64) -> Result<f64> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(domain(format!("integral requires lambda > 0, got {lambda}")));
        }
        if !(t >= 0.0) || !(big_t >= t) {
            return Err(domain(format!("integral requires 0 <= t <= T, got t={t}, T={big_t}")));
        }
        if t == big_t {
            return Ok(0.0);
        }
        let log_num = self.log_psi_u_exp(lambda, t)?;
        if big_t.is_finite() {
            Ok(log_num - self.log_psi_u_exp(lambda, big_t)?)
        } else {
            let kappa = self.kappa()?;
            Ok(log_num + self.alpha * self.big_g(lambda)? - (kappa * self.alpha).ln())
        }
    }

    /// log(ψ(u(λ,s)) e^{αs}).
    fn log_psi_u_exp(&self, lambda: f64, s: f64) -> Result<f64> {
        let u = self.u_of(lambda, s)?;
        let psi_u = self.spec.psi(u)?;
        if psi_u <= 0.0 {
            return Err(numeric(format!("psi(u(lambda={lambda}, s={s})) underflowed")));
        }
        Ok(psi_u.ln() + self.alpha * s)
    }

    /// Λ(d) = ∫_d^∞ ψ̃'(c(r)) dr = log(ψ(c(d))e^{αd}/(κ*α)): the Poisson
    /// mean of the number of clans born before −d and still alive at 0.
    pub fn lambda_window(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(domain(format!("lambda_window requires d > 0, got {d}")));
        }
        let c = self.c_of(d)?;
        let kappa = self.kappa()?;
        let val = self.spec.psi(c)?.ln() + self.alpha * d - (kappa * self.alpha).ln();
        // The exact value is >= 0 and tends to 0 as d grows; clamp the
        // last few ulps of rounding so Poisson means stay legal.
        Ok(val.max(0.0))
    }
}
