//! Exact Ornstein-Uhlenbeck laws and divergences.
//!
//! The OU family is the crate's ground truth. Started from a point `x`, both
//! the Euler discretization of `dX = -alpha X dt + sqrt(2) dB` and the
//! continuous process have Gaussian laws in closed form, with variances that
//! do not depend on `x`; the Renyi divergence between two such laws is then
//! the isotropic formula in the means. The divergence bounds produced by the
//! bound engine are exact on this family, which is what the tightness tests
//! certify.
//!
//! Negative `alpha` (expansive drift) is allowed throughout.

use crate::divergence::{renyi_gaussian_isotropic, DivergenceValue, GaussianLaw1D, RenyiOrder};
use crate::error::{Error, Result};
use crate::LIMIT_BRANCH_TOL;

/// One-step Euler contraction factor `L = 1 - alpha h`.
pub fn ou_contraction(alpha: f64, h: f64) -> f64 {
    1.0 - alpha * h
}

/// Law of the `n`-step Euler chain `X_{k+1} = L X_k + sqrt(2h) xi_k` from
/// the point `x`:
///
/// ```text
/// N( L^n x,  2h (1 - L^(2n)) / (1 - L^2) )
/// ```
///
/// with the geometric sum replaced by its limit `2 h n` when `L^2` is within
/// [`LIMIT_BRANCH_TOL`] of one (which covers both `alpha h -> 0` and the
/// alias `L = -1`).
pub fn ou_discrete_law(alpha: f64, h: f64, n: u32, x: f64) -> Result<GaussianLaw1D> {
    if !(h > 0.0) || !h.is_finite() || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite alpha and h > 0, got alpha = {alpha}, h = {h}"
        )));
    }
    if n == 0 {
        return Err(Error::Precondition("need at least one step".into()));
    }
    let l = ou_contraction(alpha, h);
    let l2 = l * l;
    let variance = if (1.0 - l2).abs() < LIMIT_BRANCH_TOL {
        2.0 * h * n as f64
    } else {
        2.0 * h * (1.0 - l2.powi(n as i32)) / (1.0 - l2)
    };
    GaussianLaw1D::new(l.powi(n as i32) * x, variance)
}

/// Law of the continuous OU process at time `t` from the point `x`:
/// `N( e^(-alpha t) x, (1 - e^(-2 alpha t)) / alpha )`, with variance `2t`
/// in the `alpha -> 0` limit.
pub fn ou_continuous_law(alpha: f64, t: f64, x: f64) -> Result<GaussianLaw1D> {
    if !(t > 0.0) || !t.is_finite() || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite alpha and t > 0, got alpha = {alpha}, t = {t}"
        )));
    }
    let variance = if alpha.abs() < LIMIT_BRANCH_TOL {
        2.0 * t
    } else {
        -(-2.0 * alpha * t).exp_m1() / alpha
    };
    GaussianLaw1D::new((-alpha * t).exp() * x, variance)
}

/// Exact Renyi divergence between `n`-step Euler OU chains from `x` and `y`.
/// Valid for every order since the two laws share a variance.
pub fn ou_renyi_exact_discrete(
    alpha: f64,
    h: f64,
    n: u32,
    x: f64,
    y: f64,
    q: RenyiOrder,
) -> Result<DivergenceValue> {
    let law_x = ou_discrete_law(alpha, h, n, x)?;
    let law_y = ou_discrete_law(alpha, h, n, y)?;
    renyi_gaussian_isotropic(&[law_x.mean()], &[law_y.mean()], law_x.variance(), q)
}

/// Exact Renyi divergence between continuous OU laws at time `t` from `x`
/// and `y`.
pub fn ou_renyi_exact_continuous(
    alpha: f64,
    t: f64,
    x: f64,
    y: f64,
    q: RenyiOrder,
) -> Result<DivergenceValue> {
    let law_x = ou_continuous_law(alpha, t, x)?;
    let law_y = ou_continuous_law(alpha, t, y)?;
    renyi_gaussian_isotropic(&[law_x.mean()], &[law_y.mean()], law_x.variance(), q)
}

/// Which bound's finiteness boundary [`finiteness_threshold`] reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdVariant {
    /// Plain exponential lift of the coupling cost.
    Unrefined,
    /// Refined lift (conditional inner expectation); this boundary also
    /// matches the exact divergence of the pushed laws.
    Refined,
}

/// Time at which `R_q( (N(0, sigma2) P_t) || (delta_0 P_t) )` under the
/// continuous OU semigroup switches between finite and infinite:
///
/// ```text
/// unrefined:  T0 = log(1 + q (q - 1) alpha sigma2) / (2 alpha)
/// refined:    T0 = log(1 + (q - 1) alpha sigma2)   / (2 alpha)
/// ```
///
/// with limits `q (q - 1) sigma2 / 2` and `(q - 1) sigma2 / 2` as
/// `alpha -> 0`. The quantity is infinite before `T0` (too little smoothing
/// to absorb the Gaussian spread) and finite after, for either sign of
/// `alpha`; once the log argument is nonpositive (expansion overwhelming the
/// spread) the returned threshold is `+inf` — never finite.
pub fn finiteness_threshold(
    alpha: f64,
    sigma2: f64,
    q: RenyiOrder,
    variant: ThresholdVariant,
) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite alpha and sigma2 > 0, got alpha = {alpha}, sigma2 = {sigma2}"
        )));
    }
    let qv = q.finite_above_one("finiteness threshold")?;
    let factor = match variant {
        ThresholdVariant::Unrefined => qv * (qv - 1.0),
        ThresholdVariant::Refined => qv - 1.0,
    };
    if alpha.abs() < LIMIT_BRANCH_TOL {
        return Ok(factor * sigma2 / 2.0);
    }
    let arg = 1.0 + factor * alpha * sigma2;
    if arg <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(arg.ln() / (2.0 * alpha))
}
