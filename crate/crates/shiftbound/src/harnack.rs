//! Functional-inequality checks dual to the divergence bounds.
//!
//! A divergence bound `R_q(delta_x P || delta_y P) <= R` is equivalent, by
//! the variational duality of Renyi divergence, to a family of Harnack-type
//! inequalities on kernel expectations `Pf`:
//!
//! * **power** (`p > 1`, `q = p/(p-1)`):
//!   `(Pf(x))^p <= e^R * P(f^p)(y)` for all `f >= 0`;
//! * **log** (order one): `P(log f)(x) <= log Pf(y) + R` for all `f > 0`;
//! * **reverse** (`p < 0`, `q = p/(p-1)` in `(0,1)`):
//!   `Pf(x) >= e^(-R/|p|) * (P(f^p)(y))^(1/p)` for all `f > 0`.
//!
//! Equality holds exactly at the extremal functions, powers of the
//! Radon-Nikodym derivative between the two pushed laws; this module
//! constructs them, so tightness of a bound is checkable to floating-point
//! accuracy. Checks come in three flavors: exact (Gaussian closed forms or
//! quadrature), Monte Carlo over sampled clouds (for simulated kernels,
//! with standard errors), and distributional (mixture initial conditions
//! over a coupling, using the convexity lifts).

use crate::bounds::{
    convexity_lift, refined_renyi_bound, BoundReport, CouplingSample, RefinedVariant,
};
use crate::divergence::{DivergenceValue, GaussianLaw1D, RenyiOrder};
use crate::error::{Error, Result};
use crate::ou::{ou_continuous_law, ou_discrete_law, ou_renyi_exact_continuous,
    ou_renyi_exact_discrete};
use crate::quad::integrate;
use crate::{DEFAULT_QUAD_TOL, LIMIT_BRANCH_TOL};
use statrs::distribution::{ContinuousCDF, Normal};
use std::fmt;
use std::sync::Arc;

/// Relative slack granted to exact (quadrature / closed-form) checks.
const EXACT_REL_TOL: f64 = 1e-9;
/// Monte Carlo checks flag a violation beyond this many standard errors.
const MC_SIGMA: f64 = 4.0;
/// Half-width of quadrature windows in standard deviations.
const WINDOW_SIGMAS: f64 = 12.0;

/// Test function for Harnack checks.
#[derive(Clone)]
pub enum TestFunction {
    /// `f(z) = a z + b`; sign-indefinite, admitted only where positivity is
    /// not required (first moments, Poincare checks).
    Linear { a: f64, b: f64 },
    /// `f(z) = exp(a z + b)`; strictly positive, exact Gaussian moments.
    ExpAffine { a: f64, b: f64 },
    /// `f(z) = clamp(z^2, floor, cap)` with `0 < floor <= cap`.
    QuadraticClipped { floor: f64, cap: f64 },
    /// `f(z) = 1{z >= threshold}`; nonnegative but not strictly positive.
    IndicatorHalfspace { threshold: f64 },
    /// User-supplied function; `positive` certifies strict positivity.
    Custom { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, positive: bool },
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Linear { a, b } => write!(f, "Linear {{ a: {a}, b: {b} }}"),
            TestFunction::ExpAffine { a, b } => write!(f, "ExpAffine {{ a: {a}, b: {b} }}"),
            TestFunction::QuadraticClipped { floor, cap } => {
                write!(f, "QuadraticClipped {{ floor: {floor}, cap: {cap} }}")
            }
            TestFunction::IndicatorHalfspace { threshold } => {
                write!(f, "IndicatorHalfspace {{ threshold: {threshold} }}")
            }
            TestFunction::Custom { positive, .. } => {
                write!(f, "Custom {{ positive: {positive} }}")
            }
        }
    }
}

impl TestFunction {
    pub fn quadratic_clipped(floor: f64, cap: f64) -> Result<Self> {
        if !(floor > 0.0) || !(cap >= floor) {
            return Err(Error::Precondition(format!(
                "need 0 < floor <= cap, got floor = {floor}, cap = {cap}"
            )));
        }
        Ok(TestFunction::QuadraticClipped { floor, cap })
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            TestFunction::Linear { a, b } => a * z + b,
            TestFunction::ExpAffine { a, b } => (a * z + b).exp(),
            TestFunction::QuadraticClipped { floor, cap } => (z * z).clamp(*floor, *cap),
            TestFunction::IndicatorHalfspace { threshold } => {
                if z >= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Custom { f, .. } => f(z),
        }
    }

    /// Whether the function is certified strictly positive everywhere.
    pub fn is_strictly_positive(&self) -> bool {
        match self {
            TestFunction::Linear { .. } | TestFunction::IndicatorHalfspace { .. } => false,
            TestFunction::ExpAffine { .. } | TestFunction::QuadraticClipped { .. } => true,
            TestFunction::Custom { positive, .. } => *positive,
        }
    }

    /// `E[f(Z)^power]` under a Gaussian law; closed forms where available,
    /// quadrature over a `12 sigma` window otherwise.
    pub fn expect_power(&self, law: &GaussianLaw1D, power: f64) -> Result<f64> {
        let (m, s2) = (law.mean(), law.variance());
        match self {
            TestFunction::ExpAffine { a, b } => {
                Ok((power * (a * m + b) + power * power * a * a * s2 / 2.0).exp())
            }
            TestFunction::IndicatorHalfspace { threshold } => {
                if power <= 0.0 {
                    return Err(Error::Precondition(
                        "indicator functions have no negative moments".into(),
                    ));
                }
                let std = Normal::new(0.0, 1.0).expect("unit normal");
                Ok(1.0 - std.cdf((threshold - m) / s2.sqrt()))
            }
            TestFunction::Linear { .. } if power != 1.0 => Err(Error::Precondition(
                "linear test functions support only first moments".into(),
            )),
            TestFunction::Linear { a, b } => Ok(a * m + b),
            _ => {
                let s = s2.sqrt();
                let r = integrate(
                    |z| law.density(z) * self.eval(z).powf(power),
                    m - WINDOW_SIGMAS * s,
                    m + WINDOW_SIGMAS * s,
                    DEFAULT_QUAD_TOL,
                );
                if !r.converged {
                    return Err(Error::Integration(format!(
                        "moment quadrature did not converge (error {:.3e})",
                        r.abs_error
                    )));
                }
                Ok(r.value)
            }
        }
    }

    /// `E[log f(Z)]` under a Gaussian law.
    pub fn expect_log(&self, law: &GaussianLaw1D) -> Result<f64> {
        if !self.is_strictly_positive() {
            return Err(Error::Precondition(
                "log expectations need a strictly positive test function".into(),
            ));
        }
        if let TestFunction::ExpAffine { a, b } = self {
            return Ok(a * law.mean() + b);
        }
        let (m, s) = (law.mean(), law.variance().sqrt());
        let r = integrate(
            |z| law.density(z) * self.eval(z).ln(),
            m - WINDOW_SIGMAS * s,
            m + WINDOW_SIGMAS * s,
            DEFAULT_QUAD_TOL,
        );
        if !r.converged {
            return Err(Error::Integration(format!(
                "log-moment quadrature did not converge (error {:.3e})",
                r.abs_error
            )));
        }
        Ok(r.value)
    }
}

/// Kernel whose pushed laws and divergences are known in closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CheckKernel {
    /// Continuous-time Ornstein-Uhlenbeck semigroup at horizon `t`.
    OuContinuous { alpha: f64, t: f64 },
    /// `n` Euler steps of step `h` on the quadratic potential.
    OuDiscrete { alpha: f64, h: f64, n: u32 },
}

impl CheckKernel {
    /// Law of the kernel started from the point `x`.
    pub fn push_dirac(&self, x: f64) -> Result<GaussianLaw1D> {
        match *self {
            CheckKernel::OuContinuous { alpha, t } => ou_continuous_law(alpha, t, x),
            CheckKernel::OuDiscrete { alpha, h, n } => ou_discrete_law(alpha, h, n, x),
        }
    }

    /// Exact divergence between the pushed laws of two starting points.
    pub fn renyi(&self, x: f64, y: f64, q: RenyiOrder) -> Result<DivergenceValue> {
        match *self {
            CheckKernel::OuContinuous { alpha, t } => {
                ou_renyi_exact_continuous(alpha, t, x, y, q)
            }
            CheckKernel::OuDiscrete { alpha, h, n } => ou_renyi_exact_discrete(alpha, h, n, x, y, q),
        }
    }
}

/// Outcome of one inequality check. `gap` is the slack in the favorable
/// direction (`rhs - lhs` for upper bounds, `lhs - rhs` for lower bounds);
/// a correct bound yields `gap >= 0` up to the granted tolerance. `se` is
/// the combined standard error for Monte Carlo checks, absent for exact
/// ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub holds: bool,
    pub se: Option<f64>,
}

fn outcome_upper(lhs: f64, rhs: f64, se: Option<f64>) -> CheckOutcome {
    let gap = rhs - lhs;
    let slack = match se {
        Some(se) => MC_SIGMA * se,
        None => EXACT_REL_TOL * (1.0 + lhs.abs().max(rhs.abs().min(f64::MAX))),
    };
    // An infinite right-hand side holds trivially.
    let holds = rhs.is_infinite() && rhs > 0.0 || gap >= -slack;
    CheckOutcome { lhs, rhs, gap, holds, se }
}

fn outcome_lower(lhs: f64, rhs: f64, se: Option<f64>) -> CheckOutcome {
    let flipped = outcome_upper(rhs, lhs, se);
    CheckOutcome { lhs, rhs, gap: flipped.gap, holds: flipped.holds, se }
}

/// Holder-conjugate divergence order of a power-Harnack exponent.
pub fn conjugate_order(p: f64) -> Result<RenyiOrder> {
    if !p.is_finite() || p == 1.0 || p == 0.0 {
        return Err(Error::Precondition(format!(
            "Harnack exponent must be finite with p != 0, 1, got {p}"
        )));
    }
    if p > 0.0 && p < 1.0 {
        return Err(Error::Precondition(format!(
            "exponents in (0, 1) have no Harnack dual here, got {p}"
        )));
    }
    RenyiOrder::new(p / (p - 1.0))
}

fn require_order_matches(bound: &BoundReport, expected: RenyiOrder, what: &str) -> Result<()> {
    let got = bound.order.as_float();
    let want = expected.as_float();
    if (got - want).abs() > 1e-12 * (1.0 + want.abs()) {
        return Err(Error::Precondition(format!(
            "{what} needs a bound at order {want}, got one at order {got}"
        )));
    }
    Ok(())
}

/// Extremal function of the power / reverse Harnack inequality between the
/// pushed laws of `x` and `y`: the `(q-1)`-th power of their density ratio
/// (an exponential-affine function for Gaussians with equal variances).
pub fn extremal_power_function(
    kernel: &CheckKernel,
    x: f64,
    y: f64,
    p: f64,
) -> Result<TestFunction> {
    let q = conjugate_order(p)?.as_float();
    let law_x = kernel.push_dirac(x)?;
    let law_y = kernel.push_dirac(y)?;
    let s2 = law_y.variance();
    let (mx, my) = (law_x.mean(), law_y.mean());
    Ok(TestFunction::ExpAffine {
        a: (q - 1.0) * (mx - my) / s2,
        b: (q - 1.0) * (my * my - mx * mx) / (2.0 * s2),
    })
}

/// Extremal function of the log-Harnack inequality: the density ratio
/// itself (Donsker-Varadhan optimizer).
pub fn extremal_log_function(kernel: &CheckKernel, x: f64, y: f64) -> Result<TestFunction> {
    let law_x = kernel.push_dirac(x)?;
    let law_y = kernel.push_dirac(y)?;
    let s2 = law_y.variance();
    let (mx, my) = (law_x.mean(), law_y.mean());
    Ok(TestFunction::ExpAffine {
        a: (mx - my) / s2,
        b: (my * my - mx * mx) / (2.0 * s2),
    })
}

/// Exact power-Harnack check: `(Pf(x))^p <= e^R * P(f^p)(y)` with `R` the
/// supplied bound at the conjugate order `q = p / (p - 1)`, `p > 1`.
pub fn check_power_harnack(
    kernel: &CheckKernel,
    f: &TestFunction,
    p: f64,
    x: f64,
    y: f64,
    bound: &BoundReport,
) -> Result<CheckOutcome> {
    if !(p > 1.0) {
        return Err(Error::Precondition(format!(
            "power Harnack needs p > 1, got {p} (use the reverse form for p < 0)"
        )));
    }
    require_order_matches(bound, conjugate_order(p)?, "the power-Harnack check")?;
    let law_x = kernel.push_dirac(x)?;
    let law_y = kernel.push_dirac(y)?;
    let lhs = f.expect_power(&law_x, 1.0)?.powf(p);
    let rhs = bound.value.exp() * f.expect_power(&law_y, p)?;
    Ok(outcome_upper(lhs, rhs, None))
}

/// Exact log-Harnack check: `P(log f)(x) <= log Pf(y) + R` with `R` a
/// KL (order-one) bound.
pub fn check_log_harnack(
    kernel: &CheckKernel,
    f: &TestFunction,
    x: f64,
    y: f64,
    bound: &BoundReport,
) -> Result<CheckOutcome> {
    require_order_matches(bound, RenyiOrder::One, "the log-Harnack check")?;
    let law_x = kernel.push_dirac(x)?;
    let law_y = kernel.push_dirac(y)?;
    let lhs = f.expect_log(&law_x)?;
    let rhs = f.expect_power(&law_y, 1.0)?.ln() + bound.value;
    Ok(outcome_upper(lhs, rhs, None))
}

/// Exact reverse-Harnack check: `Pf(x) >= e^(-R/|p|) * (P(f^p)(y))^(1/p)`
/// for `p < 0`, with `R` a bound at the order `q = p / (p - 1)` in `(0,1)`.
pub fn check_reverse_harnack(
    kernel: &CheckKernel,
    f: &TestFunction,
    p: f64,
    x: f64,
    y: f64,
    bound: &BoundReport,
) -> Result<CheckOutcome> {
    if !(p < 0.0) {
        return Err(Error::Precondition(format!("reverse Harnack needs p < 0, got {p}")));
    }
    if !f.is_strictly_positive() {
        return Err(Error::Precondition(
            "reverse Harnack needs a strictly positive test function".into(),
        ));
    }
    require_order_matches(bound, conjugate_order(p)?, "the reverse-Harnack check")?;
    let law_x = kernel.push_dirac(x)?;
    let law_y = kernel.push_dirac(y)?;
    let lhs = f.expect_power(&law_x, 1.0)?;
    let rhs = (-bound.value / p.abs()).exp() * f.expect_power(&law_y, p)?.powf(1.0 / p);
    Ok(outcome_lower(lhs, rhs, None))
}

fn mc_mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        sumsq += v * v;
        n += 1;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let se = if n > 1 {
        (((sumsq - nf * mean * mean).max(0.0) / (nf - 1.0)) / nf).sqrt()
    } else {
        0.0
    };
    (mean, se)
}

fn validate_cloud(cloud: &[f64], what: &str) -> Result<()> {
    if cloud.len() < 2 {
        return Err(Error::Precondition(format!("{what} needs at least two samples")));
    }
    Ok(())
}

/// Monte Carlo power-Harnack check over sampled clouds from the two pushed
/// laws (e.g. simulated ensembles). Standard errors propagate through the
/// outer power by the delta method; a violation is flagged only beyond
/// four combined standard errors.
pub fn check_power_harnack_mc(
    f: &TestFunction,
    p: f64,
    cloud_x: &[f64],
    cloud_y: &[f64],
    bound_value: f64,
) -> Result<CheckOutcome> {
    if !(p > 1.0) {
        return Err(Error::Precondition(format!("power Harnack needs p > 1, got {p}")));
    }
    validate_cloud(cloud_x, "the x cloud")?;
    validate_cloud(cloud_y, "the y cloud")?;
    let (mean_x, se_x) = mc_mean_se(cloud_x.iter().map(|&z| f.eval(z)));
    let (mean_yp, se_yp) = mc_mean_se(cloud_y.iter().map(|&z| f.eval(z).powf(p)));
    let lhs = mean_x.powf(p);
    let se_lhs = p.abs() * mean_x.powf(p - 1.0) * se_x;
    let rhs = bound_value.exp() * mean_yp;
    let se_rhs = bound_value.exp() * se_yp;
    let se = (se_lhs * se_lhs + se_rhs * se_rhs).sqrt();
    Ok(outcome_upper(lhs, rhs, Some(se)))
}

/// Monte Carlo log-Harnack check over sampled clouds.
pub fn check_log_harnack_mc(
    f: &TestFunction,
    cloud_x: &[f64],
    cloud_y: &[f64],
    bound_value: f64,
) -> Result<CheckOutcome> {
    if !f.is_strictly_positive() {
        return Err(Error::Precondition(
            "log Harnack needs a strictly positive test function".into(),
        ));
    }
    validate_cloud(cloud_x, "the x cloud")?;
    validate_cloud(cloud_y, "the y cloud")?;
    let (lhs, se_lhs) = mc_mean_se(cloud_x.iter().map(|&z| f.eval(z).ln()));
    let (mean_y, se_y) = mc_mean_se(cloud_y.iter().map(|&z| f.eval(z)));
    let rhs = mean_y.ln() + bound_value;
    let se_rhs = se_y / mean_y;
    let se = (se_lhs * se_lhs + se_rhs * se_rhs).sqrt();
    Ok(outcome_upper(lhs, rhs, Some(se)))
}

/// Monte Carlo reverse-Harnack check over sampled clouds, `p < 0`.
pub fn check_reverse_harnack_mc(
    f: &TestFunction,
    p: f64,
    cloud_x: &[f64],
    cloud_y: &[f64],
    bound_value: f64,
) -> Result<CheckOutcome> {
    if !(p < 0.0) {
        return Err(Error::Precondition(format!("reverse Harnack needs p < 0, got {p}")));
    }
    if !f.is_strictly_positive() {
        return Err(Error::Precondition(
            "reverse Harnack needs a strictly positive test function".into(),
        ));
    }
    validate_cloud(cloud_x, "the x cloud")?;
    validate_cloud(cloud_y, "the y cloud")?;
    let (lhs, se_lhs) = mc_mean_se(cloud_x.iter().map(|&z| f.eval(z)));
    let (mean_yp, se_yp) = mc_mean_se(cloud_y.iter().map(|&z| f.eval(z).powf(p)));
    let scale = (-bound_value / p.abs()).exp();
    let rhs = scale * mean_yp.powf(1.0 / p);
    let se_rhs = scale * (1.0 / p).abs() * mean_yp.powf(1.0 / p - 1.0) * se_yp;
    let se = (se_lhs * se_lhs + se_rhs * se_rhs).sqrt();
    Ok(outcome_lower(lhs, rhs, Some(se)))
}

/// Local reverse Poincare inequality of the Ornstein-Uhlenbeck semigroup:
///
/// ```text
/// Var_{delta_x P_t}(f) >= (e^(2 alpha t) - 1) / alpha * (d/dx P_t f(x))^2
/// ```
///
/// with equality exactly for affine `f` (the factor degenerates to `2t` at
/// `alpha = 0`). The spatial derivative uses closed forms for linear and
/// exponential-affine functions and a central difference otherwise.
pub fn check_local_poincare(
    alpha: f64,
    t: f64,
    x: f64,
    f: &TestFunction,
) -> Result<CheckOutcome> {
    if !(t > 0.0) || !t.is_finite() || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite alpha and t > 0, got alpha = {alpha}, t = {t}"
        )));
    }
    let kernel = CheckKernel::OuContinuous { alpha, t };
    let law = kernel.push_dirac(x)?;
    let mean_f = f.expect_power(&law, 1.0)?;
    let mean_f2 = match f {
        // Second moment of a linear function in closed form (expect_power
        // restricts linear functions to first moments).
        TestFunction::Linear { a, b } => {
            let m = a * law.mean() + b;
            m * m + a * a * law.variance()
        }
        _ => f.expect_power(&law, 2.0)?,
    };
    let lhs = (mean_f2 - mean_f * mean_f).max(0.0);

    let factor = if alpha.abs() < LIMIT_BRANCH_TOL {
        2.0 * t
    } else {
        (2.0 * alpha * t).exp_m1() / alpha
    };
    let decay = (-alpha * t).exp();
    let derivative = match f {
        TestFunction::Linear { a, .. } => a * decay,
        TestFunction::ExpAffine { a, .. } => a * decay * mean_f,
        _ => {
            let delta = 1e-5 * (1.0 + x.abs());
            let up = f.expect_power(&kernel.push_dirac(x + delta)?, 1.0)?;
            let down = f.expect_power(&kernel.push_dirac(x - delta)?, 1.0)?;
            (up - down) / (2.0 * delta)
        }
    };
    let rhs = factor * derivative * derivative;
    Ok(outcome_lower(lhs, rhs, None))
}

/// Which lift supplies the divergence factor of a distributional check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftRoute {
    Plain,
    RefinedFirst,
    RefinedSecond,
}

/// Power-Harnack check for mixture initial conditions: the initial laws are
/// the empirical mixtures of the coupling's two sides, and the divergence
/// factor comes from lifting the exact pointwise divergences through the
/// chosen route. Valid for every route because each lift upper-bounds the
/// mixture divergence.
pub fn check_distributional_power(
    kernel: &CheckKernel,
    f: &TestFunction,
    p: f64,
    coupling: &CouplingSample,
    route: LiftRoute,
) -> Result<CheckOutcome> {
    if !(p > 1.0) {
        return Err(Error::Precondition(format!("power Harnack needs p > 1, got {p}")));
    }
    if coupling.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: coupling.dim() });
    }
    let q = conjugate_order(p)?;
    let rho = |x: &[f64], y: &[f64]| {
        kernel
            .renyi(x[0], y[0], q)
            .map(|d| d.value)
            .unwrap_or(f64::INFINITY)
    };
    let lift = match route {
        LiftRoute::Plain => convexity_lift(rho, q, coupling)?,
        LiftRoute::RefinedFirst => refined_renyi_bound(rho, q, coupling, RefinedVariant::First)?,
        LiftRoute::RefinedSecond => refined_renyi_bound(rho, q, coupling, RefinedVariant::Second)?,
    };

    let n = coupling.len() as f64;
    let mut mean_x = 0.0;
    let mut mean_yp = 0.0;
    for (xa, ya) in coupling.pairs() {
        mean_x += f.expect_power(&kernel.push_dirac(xa[0])?, 1.0)? / n;
        mean_yp += f.expect_power(&kernel.push_dirac(ya[0])?, p)? / n;
    }
    let lhs = mean_x.powf(p);
    let rhs = lift.value.exp() * mean_yp;
    Ok(outcome_upper(lhs, rhs, None))
}

/// Log-Harnack check for mixture initial conditions, KL route (mean of the
/// pointwise divergences over the coupling).
pub fn check_distributional_log(
    kernel: &CheckKernel,
    f: &TestFunction,
    coupling: &CouplingSample,
) -> Result<CheckOutcome> {
    if coupling.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: coupling.dim() });
    }
    let rho = |x: &[f64], y: &[f64]| {
        kernel
            .renyi(x[0], y[0], RenyiOrder::One)
            .map(|d| d.value)
            .unwrap_or(f64::INFINITY)
    };
    let lift = convexity_lift(rho, RenyiOrder::One, coupling)?;

    let n = coupling.len() as f64;
    let mut mean_log_x = 0.0;
    let mut mean_y = 0.0;
    for (xa, ya) in coupling.pairs() {
        mean_log_x += f.expect_log(&kernel.push_dirac(xa[0])?)? / n;
        mean_y += f.expect_power(&kernel.push_dirac(ya[0])?, 1.0)? / n;
    }
    let lhs = mean_log_x;
    let rhs = mean_y.ln() + lift.value;
    Ok(outcome_upper(lhs, rhs, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{langevin_continuous_bound, langevin_discrete_bound, CostInput, KernelSpec};
    use crate::sim::gaussian_ensemble;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn continuous_bound(alpha: f64, t: f64, q: RenyiOrder, d: f64) -> BoundReport {
        langevin_continuous_bound(alpha, t, q, CostInput::SqDist(d * d)).unwrap()
    }

    #[test]
    fn extremal_power_function_attains_equality() {
        let kernel = CheckKernel::OuContinuous { alpha: 1.0, t: 0.7 };
        for &p in &[2.0, 3.0, 1.5] {
            let q = conjugate_order(p).unwrap();
            let (x, y) = (1.0, -0.2);
            let bound = continuous_bound(1.0, 0.7, q, x - y);
            let f = extremal_power_function(&kernel, x, y, p).unwrap();
            let out = check_power_harnack(&kernel, &f, p, x, y, &bound).unwrap();
            assert!(out.holds);
            let scale = out.lhs.abs().max(out.rhs.abs());
            assert!(out.gap.abs() <= 1e-9 * scale, "p = {p}: gap {} vs scale {scale}", out.gap);
        }
    }

    #[test]
    fn extremal_log_function_attains_equality() {
        let kernel = CheckKernel::OuDiscrete { alpha: 0.8, h: 0.05, n: 12 };
        let (x, y) = (0.9, -0.6);
        let kspec = KernelSpec::langevin(0.8, 0.8, 0.05).unwrap();
        let bound = langevin_discrete_bound(
            &kspec,
            12,
            RenyiOrder::One,
            CostInput::SqDist((x - y) * (x - y)),
        )
        .unwrap();
        let f = extremal_log_function(&kernel, x, y).unwrap();
        let out = check_log_harnack(&kernel, &f, x, y, &bound).unwrap();
        assert!(out.holds);
        assert!(out.gap.abs() <= 1e-9 * (1.0 + out.lhs.abs()), "gap {}", out.gap);
    }

    #[test]
    fn extremal_reverse_function_attains_equality() {
        let kernel = CheckKernel::OuContinuous { alpha: 0.5, t: 1.2 };
        let p = -1.0;
        let q = conjugate_order(p).unwrap();
        assert_abs_diff_eq!(q.as_float(), 0.5, epsilon = 1e-15);
        let (x, y) = (0.4, -0.8);
        let bound = continuous_bound(0.5, 1.2, q, x - y);
        let f = extremal_power_function(&kernel, x, y, p).unwrap();
        let out = check_reverse_harnack(&kernel, &f, p, x, y, &bound).unwrap();
        assert!(out.holds);
        assert!(out.gap.abs() <= 1e-9 * (1.0 + out.lhs.abs()), "gap {}", out.gap);
    }

    #[test]
    fn generic_functions_hold_with_positive_slack() {
        let kernel = CheckKernel::OuContinuous { alpha: 1.0, t: 0.5 };
        let (x, y) = (1.2, 0.0);
        let p = 2.0;
        let bound = continuous_bound(1.0, 0.5, conjugate_order(p).unwrap(), x - y);
        let functions = [
            TestFunction::ExpAffine { a: 0.4, b: -0.1 },
            TestFunction::quadratic_clipped(0.2, 9.0).unwrap(),
            TestFunction::IndicatorHalfspace { threshold: 0.3 },
        ];
        for f in &functions {
            let out = check_power_harnack(&kernel, f, p, x, y, &bound).unwrap();
            assert!(out.holds, "{f:?}");
            assert!(out.gap > 0.0, "{f:?}: strict slack expected, gap {}", out.gap);
        }

        let kl_bound = continuous_bound(1.0, 0.5, RenyiOrder::One, x - y);
        for f in &functions[..2] {
            let out = check_log_harnack(&kernel, f, x, y, &kl_bound).unwrap();
            assert!(out.holds, "{f:?}");
        }
    }

    #[test]
    fn order_mismatch_is_rejected() {
        let kernel = CheckKernel::OuContinuous { alpha: 1.0, t: 0.5 };
        let f = TestFunction::ExpAffine { a: 0.3, b: 0.0 };
        let wrong = continuous_bound(1.0, 0.5, RenyiOrder::new(3.0).unwrap(), 1.0);
        assert!(check_power_harnack(&kernel, &f, 2.0, 1.0, 0.0, &wrong).is_err());
        assert!(check_log_harnack(&kernel, &f, 1.0, 0.0, &wrong).is_err());
    }

    #[test]
    fn reverse_harnack_rejects_nonpositive_functions() {
        let kernel = CheckKernel::OuContinuous { alpha: 1.0, t: 0.5 };
        let f = TestFunction::IndicatorHalfspace { threshold: 0.0 };
        let bound = continuous_bound(1.0, 0.5, conjugate_order(-1.0).unwrap(), 1.0);
        assert!(check_reverse_harnack(&kernel, &f, -1.0, 1.0, 0.0, &bound).is_err());
    }

    #[test]
    fn monte_carlo_checks_agree_with_exact_ones() {
        let kernel = CheckKernel::OuContinuous { alpha: 1.0, t: 0.6 };
        let (x, y) = (0.8, -0.4);
        let law_x = kernel.push_dirac(x).unwrap();
        let law_y = kernel.push_dirac(y).unwrap();
        let cloud_x = gaussian_ensemble(law_x.mean(), law_x.variance(), 60_000, 101).unwrap();
        let cloud_y = gaussian_ensemble(law_y.mean(), law_y.variance(), 60_000, 102).unwrap();

        let p = 2.0;
        let bound = continuous_bound(1.0, 0.6, conjugate_order(p).unwrap(), x - y);
        let f = TestFunction::ExpAffine { a: 0.5, b: 0.0 };
        let exact = check_power_harnack(&kernel, &f, p, x, y, &bound).unwrap();
        let mc = check_power_harnack_mc(&f, p, &cloud_x, &cloud_y, bound.value).unwrap();
        assert!(mc.holds);
        let se = mc.se.unwrap();
        assert!(se > 0.0);
        assert!((mc.lhs - exact.lhs).abs() < 6.0 * se, "{} vs {}", mc.lhs, exact.lhs);

        let kl_bound = continuous_bound(1.0, 0.6, RenyiOrder::One, x - y);
        let log_exact = check_log_harnack(&kernel, &f, x, y, &kl_bound).unwrap();
        let log_mc = check_log_harnack_mc(&f, &cloud_x, &cloud_y, kl_bound.value).unwrap();
        assert!(log_mc.holds);
        assert!((log_mc.lhs - log_exact.lhs).abs() < 6.0 * log_mc.se.unwrap());

        let pr = -1.0;
        let rev_bound = continuous_bound(1.0, 0.6, conjugate_order(pr).unwrap(), x - y);
        let rev_mc = check_reverse_harnack_mc(&f, pr, &cloud_x, &cloud_y, rev_bound.value).unwrap();
        assert!(rev_mc.holds);
    }

    #[test]
    fn local_poincare_is_tight_for_linear_functions() {
        for &(alpha, t) in &[(1.0, 0.7), (0.0, 0.5), (-0.4, 0.3)] {
            let f = TestFunction::Linear { a: 1.3, b: -0.2 };
            let out = check_local_poincare(alpha, t, 0.9, &f).unwrap();
            assert!(out.holds, "alpha = {alpha}");
            assert!(
                out.gap.abs() <= 1e-12 * (1.0 + out.lhs.abs()),
                "alpha = {alpha}: gap {}",
                out.gap
            );
        }
    }

    #[test]
    fn local_poincare_is_strict_for_quadratic_functions() {
        let (alpha, t, x) = (1.0, 0.7, 0.9);
        let f = TestFunction::Custom { f: Arc::new(|z: f64| z * z), positive: false };
        let out = check_local_poincare(alpha, t, x, &f).unwrap();
        assert!(out.holds);
        // The slack is exactly twice the squared variance of the pushed law.
        let law = ou_continuous_law(alpha, t, x).unwrap();
        let expected_gap = 2.0 * law.variance() * law.variance();
        assert_abs_diff_eq!(out.gap, expected_gap, epsilon = 1e-6 * expected_gap);
    }

    #[test]
    fn distributional_checks_hold_and_refinements_help() {
        let kernel = CheckKernel::OuContinuous { alpha: 1.0, t: 0.8 };
        let coupling = CouplingSample::from_scalar_pairs(&[
            (0.9, 0.0),
            (-0.3, 0.0),
            (0.5, -0.4),
            (1.1, -0.4),
        ])
        .unwrap();
        let f = TestFunction::ExpAffine { a: 0.4, b: 0.1 };
        let p = 2.0;
        let plain =
            check_distributional_power(&kernel, &f, p, &coupling, LiftRoute::Plain).unwrap();
        let first =
            check_distributional_power(&kernel, &f, p, &coupling, LiftRoute::RefinedFirst)
                .unwrap();
        let second =
            check_distributional_power(&kernel, &f, p, &coupling, LiftRoute::RefinedSecond)
                .unwrap();
        assert!(plain.holds && first.holds && second.holds);
        assert!(first.rhs <= plain.rhs * (1.0 + 1e-12));
        assert!(second.rhs <= plain.rhs * (1.0 + 1e-12));

        let log_out = check_distributional_log(&kernel, &f, &coupling).unwrap();
        assert!(log_out.holds);
    }

    proptest! {
        /// Donsker-Varadhan sandwich: affine statistics never beat the KL
        /// bound, pinned at the extremal one.
        #[test]
        fn dv_statistics_never_exceed_kl(
            a in -1.5f64..1.5,
            b in -1.0f64..1.0,
            x in -1.0f64..1.0,
            shift in 0.1f64..1.5,
        ) {
            let kernel = CheckKernel::OuContinuous { alpha: 1.0, t: 0.5 };
            let y = x - shift;
            let bound = continuous_bound(1.0, 0.5, RenyiOrder::One, shift);
            let f = TestFunction::ExpAffine { a, b };
            let out = check_log_harnack(&kernel, &f, x, y, &bound).unwrap();
            prop_assert!(out.holds);
        }

        /// Random exponential-affine functions keep the power Harnack true
        /// across exponents.
        #[test]
        fn power_harnack_holds_for_random_functions(
            a in -1.0f64..1.0,
            p in 1.2f64..4.0,
            x in -1.0f64..1.0,
            shift in 0.05f64..1.2,
        ) {
            let kernel = CheckKernel::OuDiscrete { alpha: 0.7, h: 0.1, n: 8 };
            let y = x - shift;
            let kspec = KernelSpec::langevin(0.7, 0.7, 0.1).unwrap();
            let bound = langevin_discrete_bound(
                &kspec,
                8,
                conjugate_order(p).unwrap(),
                CostInput::SqDist(shift * shift),
            ).unwrap();
            let f = TestFunction::ExpAffine { a, b: 0.2 };
            let out = check_power_harnack(&kernel, &f, p, x, y, &bound).unwrap();
            prop_assert!(out.holds);
        }
    }
}
