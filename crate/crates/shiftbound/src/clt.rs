//! Central-limit regime: divergence bounds for random-walk kernels with
//! general (non-Gaussian) increments.
//!
//! For a kernel `X_{k+1} = X_k + h xi` with centered increment density
//! `rho`, moving the start by `delta` and absorbing it in `n` equal per-step
//! shifts costs `n * KL(rho || rho(. - w))` with `w` the per-step shift in
//! increment units. Under the CLT scaling `h = n^{-1/2}` this converges to
//! the *Fisher information bound*
//!
//! ```text
//! KL <= (1/2) delta^T I(rho) delta
//! ```
//!
//! which is exact for Gaussian increments at every `n`. Fisher information
//! is computed by quadrature in both classical forms (expected squared
//! score and expected negative log-curvature) and the two are
//! cross-checked; disagreement flags a broken density specification.

use crate::bounds::{BoundReport, CostKind};
use crate::divergence::RenyiOrder;
use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::DEFAULT_QUAD_TOL;
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

/// Density values below this at the window edge count as negligible mass.
const EDGE_DENSITY_FLOOR: f64 = 1e-120;
/// Largest half-width the doubling search will try.
const MAX_RADIUS: f64 = 1e9;
/// Normalization / centering tolerance of `validate`.
const VALIDATE_TOL: f64 = 1e-8;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Integrate `f` over `[-r, r]` by dyadic shells around the origin.
///
/// Working windows here can be enormous compared to the density's scale
/// (an exponential tail forces `r` in the hundreds), and a single panel
/// across such a window has no quadrature node inside the core, so the
/// refinement loop would see a flat zero and stop. Shells `[r/2^(k+1),
/// r/2^k]` place nodes at every scale, so mass concentrated anywhere above
/// `~1e-12 r` is resolved. Returns `+inf` when a shell diverges.
fn shell_integrate(f: impl Fn(f64) -> f64, r: f64, tol: f64) -> Result<f64> {
    let mut edges = vec![0.0f64];
    let mut e = r / 2f64.powi(40);
    while e < r {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(r);
    let per_call_tol = tol / (2 * edges.len()) as f64;

    let mut total = 0.0;
    let mut total_err = 0.0;
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (lo, hi) in [(a, b), (-b, -a)] {
            let part = integrate(&f, lo, hi, per_call_tol);
            if !part.value.is_finite() {
                return Ok(f64::INFINITY);
            }
            total += part.value;
            total_err += part.abs_error;
        }
    }
    // A single shell may stall just above its slice of the budget (e.g. on
    // the noise floor of finite-difference integrands); only the summed
    // error estimate has to meet the requested tolerance.
    if total_err > tol {
        return Err(Error::Integration(format!(
            "quadrature did not converge (estimated error {total_err:.3e}, target {tol:.3e})"
        )));
    }
    Ok(total)
}

/// Centered increment density of a random-walk kernel.
#[derive(Clone)]
pub enum DensitySpec {
    /// `N(0, sigma2)`.
    Gaussian { sigma2: f64 },
    /// Logistic with the given scale (variance `pi^2 scale^2 / 3`).
    Logistic { scale: f64 },
    /// User-supplied log-density, optionally with its first two
    /// derivatives; missing derivatives fall back to central differences.
    Custom {
        log_density: ScalarFn,
        score: Option<ScalarFn>,
        curvature: Option<ScalarFn>,
    },
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::Gaussian { sigma2 } => write!(f, "Gaussian {{ sigma2: {sigma2} }}"),
            DensitySpec::Logistic { scale } => write!(f, "Logistic {{ scale: {scale} }}"),
            DensitySpec::Custom { score, curvature, .. } => write!(
                f,
                "Custom {{ score: {}, curvature: {} }}",
                score.is_some(),
                curvature.is_some()
            ),
        }
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl DensitySpec {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Precondition(format!("need sigma2 > 0, got {sigma2}")));
        }
        Ok(DensitySpec::Gaussian { sigma2 })
    }

    pub fn logistic(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Precondition(format!("need scale > 0, got {scale}")));
        }
        Ok(DensitySpec::Logistic { scale })
    }

    pub fn custom(
        log_density: ScalarFn,
        score: Option<ScalarFn>,
        curvature: Option<ScalarFn>,
    ) -> Self {
        DensitySpec::Custom { log_density, score, curvature }
    }

    pub fn log_density(&self, z: f64) -> f64 {
        match self {
            DensitySpec::Gaussian { sigma2 } => {
                -z * z / (2.0 * sigma2) - 0.5 * (2.0 * std::f64::consts::PI * sigma2).ln()
            }
            DensitySpec::Logistic { scale } => {
                let u = z / scale;
                -u - 2.0 * softplus(-u) - scale.ln()
            }
            DensitySpec::Custom { log_density, .. } => log_density(z),
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        self.log_density(z).exp()
    }

    /// `d/dz log rho(z)`.
    pub fn score(&self, z: f64) -> f64 {
        match self {
            DensitySpec::Gaussian { sigma2 } => -z / sigma2,
            DensitySpec::Logistic { scale } => {
                // (1/s) (1 - 2 sigma(z/s)) with the logistic sigmoid.
                let sig = 1.0 / (1.0 + (-z / scale).exp());
                (1.0 - 2.0 * sig) / scale
            }
            DensitySpec::Custom { score: Some(score), .. } => score(z),
            DensitySpec::Custom { log_density, .. } => {
                let h = 1e-6 * (1.0 + z.abs());
                (log_density(z + h) - log_density(z - h)) / (2.0 * h)
            }
        }
    }

    /// `d^2/dz^2 log rho(z)`.
    pub fn log_curvature(&self, z: f64) -> f64 {
        match self {
            DensitySpec::Gaussian { sigma2 } => -1.0 / sigma2,
            DensitySpec::Logistic { scale } => {
                let sig = 1.0 / (1.0 + (-z / scale).exp());
                -2.0 * sig * (1.0 - sig) / (scale * scale)
            }
            DensitySpec::Custom { curvature: Some(curvature), .. } => curvature(z),
            DensitySpec::Custom { log_density, .. } => {
                let h = 1e-4 * (1.0 + z.abs());
                (log_density(z + h) - 2.0 * log_density(z) + log_density(z - h)) / (h * h)
            }
        }
    }

    fn derivatives_are_analytic(&self) -> bool {
        match self {
            DensitySpec::Gaussian { .. } | DensitySpec::Logistic { .. } => true,
            DensitySpec::Custom { score, curvature, .. } => {
                score.is_some() && curvature.is_some()
            }
        }
    }

    /// Half-width of a window carrying all but a negligible sliver of mass,
    /// found by doubling.
    pub fn working_radius(&self) -> Result<f64> {
        let mut r: f64 = 8.0;
        while self.density(r).max(self.density(-r)) > EDGE_DENSITY_FLOOR {
            r *= 2.0;
            if r > MAX_RADIUS {
                return Err(Error::Integration(
                    "density does not decay within a workable window".into(),
                ));
            }
        }
        Ok(r)
    }

    /// Check normalization and centering by quadrature.
    pub fn validate(&self) -> Result<()> {
        let r = self.working_radius()?;
        let mass = shell_integrate(|z| self.density(z), r, DEFAULT_QUAD_TOL)?;
        if (mass - 1.0).abs() > VALIDATE_TOL {
            return Err(Error::Precondition(format!(
                "density must be normalized: integral is {mass:.12}"
            )));
        }
        let mean = shell_integrate(|z| z * self.density(z), r, DEFAULT_QUAD_TOL)?;
        if mean.abs() > VALIDATE_TOL * (1.0 + r) {
            return Err(Error::Precondition(format!(
                "density must be centered: mean is {mean:.3e}"
            )));
        }
        Ok(())
    }

    /// Variance by quadrature.
    pub fn variance(&self) -> Result<f64> {
        let r = self.working_radius()?;
        shell_integrate(|z| z * z * self.density(z), r, DEFAULT_QUAD_TOL)
    }
}

/// Fisher information `I = E[(d log rho)^2] = -E[d^2 log rho]`, by
/// quadrature in both forms with a cross-check. The score form is
/// returned; a mismatch beyond the granted slack (wider when derivatives
/// come from finite differences) is an error, since it means the supplied
/// derivatives are inconsistent with the density.
pub fn fisher_information_1d(spec: &DensitySpec, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let r = spec.working_radius()?;
    let score_form = shell_integrate(
        |z| {
            let s = spec.score(z);
            s * s * spec.density(z)
        },
        r,
        tol,
    )?;
    let hess_form = shell_integrate(|z| -spec.log_curvature(z) * spec.density(z), r, tol)?;
    let slack = if spec.derivatives_are_analytic() {
        10.0 * tol.max(1e-12) * (1.0 + score_form.abs())
    } else {
        1e-4 * (1.0 + score_form.abs())
    };
    if (score_form - hess_form).abs() > slack {
        return Err(Error::Integration(format!(
            "Fisher information forms disagree: score form {score_form:.12e}, \
             curvature form {hess_form:.12e}"
        )));
    }
    Ok(score_form)
}

/// Divergence cost of one shifted step of the random walk `x -> x + h xi`:
/// `KL(rho || rho(. - v/h))`, the price of absorbing a displacement `v`
/// into a single step of scale `h`.
pub fn one_step_convolution_kl(spec: &DensitySpec, v: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() || !v.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite v and h > 0, got v = {v}, h = {h}"
        )));
    }
    let w = v / h;
    let r = spec.working_radius()? + w.abs();
    let kl = shell_integrate(
        |z| {
            let l0 = spec.log_density(z);
            if l0 == f64::NEG_INFINITY {
                return 0.0;
            }
            l0.exp() * (l0 - spec.log_density(z - w))
        },
        r,
        DEFAULT_QUAD_TOL,
    )?;
    Ok(kl.max(0.0))
}

/// Total cost of absorbing the displacement `y - x` in `n` equal shifts of
/// a CLT-scaled walk (`h = n^{-1/2}`): `n * KL(rho || rho(. - w))` with
/// `w = (y - x) / sqrt(n)`.
pub fn sweep_convolution_kl(spec: &DensitySpec, x: f64, y: f64, ns: &[u32]) -> Result<Vec<f64>> {
    if ns.contains(&0) {
        return Err(Error::Precondition("sweep sizes must be positive".into()));
    }
    ns.iter()
        .map(|&n| {
            let nf = n as f64;
            let h = nf.powf(-0.5);
            let v = (y - x) / nf;
            Ok(nf * one_step_convolution_kl(spec, v, h)?)
        })
        .collect()
}

/// The Fisher-information divergence bound `(1/2) (x-y)^T I (x-y)` for a
/// product random-walk kernel in the CLT regime. `fisher` must be
/// symmetric positive semidefinite.
pub fn clt_bound(fisher: &DMatrix<f64>, x: &[f64], y: &[f64]) -> Result<BoundReport> {
    let d = fisher.nrows();
    if fisher.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: fisher.ncols() });
    }
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len().max(y.len()) });
    }
    let scale = fisher.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..d {
        for j in 0..i {
            if (fisher[(i, j)] - fisher[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::Precondition(
                    "Fisher information matrix must be symmetric".into(),
                ));
            }
        }
    }
    let eigen = fisher.clone().symmetric_eigen();
    if eigen.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::Domain(
            "Fisher information matrix must be positive semidefinite".into(),
        ));
    }

    let mut value = 0.0;
    let mut sq_dist = 0.0;
    for i in 0..d {
        let di = x[i] - y[i];
        sq_dist += di * di;
        for j in 0..d {
            value += 0.5 * di * fisher[(i, j)] * (x[j] - y[j]);
        }
    }
    let value = value.max(0.0);
    let constant = if sq_dist > 0.0 { value / sq_dist } else { 0.0 };
    Ok(BoundReport {
        order: RenyiOrder::One,
        constant,
        cost_kind: CostKind::SqDist,
        finite: value.is_finite(),
        theorem_tag: "clt-fisher",
        value,
    })
}

/// Outcome of the Cramer-Rao consistency check `I * Var >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CramerRao {
    pub fisher: f64,
    pub variance: f64,
    /// `fisher * variance`; equals one exactly iff the density is Gaussian.
    pub product: f64,
    pub holds: bool,
}

/// Cramer-Rao inequality as a sanity check of a density specification.
pub fn cramer_rao_check(spec: &DensitySpec) -> Result<CramerRao> {
    let fisher = fisher_information_1d(spec, DEFAULT_QUAD_TOL)?;
    let variance = spec.variance()?;
    let product = fisher * variance;
    Ok(CramerRao { fisher, variance, product, holds: product >= 1.0 - 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{kl_gaussian_1d, GaussianLaw1D};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_fisher_information() {
        for &sigma2 in &[1.0, 0.25, 3.7] {
            let spec = DensitySpec::gaussian(sigma2).unwrap();
            let i = fisher_information_1d(&spec, 1e-10).unwrap();
            assert_abs_diff_eq!(i, 1.0 / sigma2, epsilon = 1e-9 / sigma2);
        }
    }

    #[test]
    fn logistic_fisher_information_is_one_third_over_scale_sq() {
        let spec = DensitySpec::logistic(1.0).unwrap();
        let i = fisher_information_1d(&spec, 1e-10).unwrap();
        assert_abs_diff_eq!(i, 1.0 / 3.0, epsilon = 1e-9);

        let spec2 = DensitySpec::logistic(0.7).unwrap();
        let i2 = fisher_information_1d(&spec2, 1e-10).unwrap();
        assert_abs_diff_eq!(i2, 1.0 / (3.0 * 0.49), epsilon = 1e-8);
    }

    #[test]
    fn custom_density_without_derivatives_works() {
        // Standard normal supplied as a bare closure.
        let spec = DensitySpec::custom(
            Arc::new(|z: f64| -z * z / 2.0 - 0.5 * (2.0 * PI).ln()),
            None,
            None,
        );
        spec.validate().unwrap();
        let i = fisher_information_1d(&spec, 1e-9).unwrap();
        assert_abs_diff_eq!(i, 1.0, epsilon = 1e-5);
    }

    #[test]
    fn inconsistent_derivatives_are_caught() {
        // Wrong score (factor of two) must trip the cross-check.
        let spec = DensitySpec::custom(
            Arc::new(|z: f64| -z * z / 2.0 - 0.5 * (2.0 * PI).ln()),
            Some(Arc::new(|z: f64| -2.0 * z)),
            Some(Arc::new(|_: f64| -1.0)),
        );
        assert!(matches!(
            fisher_information_1d(&spec, 1e-9),
            Err(Error::Integration(_))
        ));
    }

    #[test]
    fn validation_rejects_broken_densities() {
        // Unnormalized.
        let spec = DensitySpec::custom(
            Arc::new(|z: f64| -z * z / 2.0),
            None,
            None,
        );
        assert!(spec.validate().is_err());
        // Off-center.
        let spec = DensitySpec::custom(
            Arc::new(|z: f64| -(z - 1.0) * (z - 1.0) / 2.0 - 0.5 * (2.0 * PI).ln()),
            None,
            None,
        );
        assert!(spec.validate().is_err());
    }

    #[test]
    fn gaussian_shift_kl_is_exact_at_every_sweep_size() {
        let sigma2 = 1.3;
        let spec = DensitySpec::gaussian(sigma2).unwrap();
        let (x, y) = (0.2, 1.7);
        let exact = (x - y) * (x - y) / (2.0 * sigma2);
        let ns = [1u32, 4, 16, 64, 256];
        let sweep = sweep_convolution_kl(&spec, x, y, &ns).unwrap();
        for (n, total) in ns.iter().zip(&sweep) {
            assert_abs_diff_eq!(*total, exact, epsilon = 1e-9 * (1.0 + exact));
            let _ = n;
        }
    }

    #[test]
    fn one_step_shift_kl_matches_gaussian_formula() {
        let spec = DensitySpec::gaussian(0.8).unwrap();
        let kl = one_step_convolution_kl(&spec, 0.5, 0.25).unwrap();
        // Shift in increment units: w = 0.5 / 0.25 = 2.
        let p0 = GaussianLaw1D::new(0.0, 0.8).unwrap();
        let p1 = GaussianLaw1D::new(2.0, 0.8).unwrap();
        assert_abs_diff_eq!(kl, kl_gaussian_1d(&p0, &p1).value, epsilon = 1e-10);
    }

    #[test]
    fn logistic_sweep_converges_to_the_fisher_bound() {
        let spec = DensitySpec::logistic(1.0).unwrap();
        let (x, y) = (0.0, 1.5);
        let fisher = fisher_information_1d(&spec, 1e-10).unwrap();
        let limit = 0.5 * fisher * (x - y) * (x - y);
        let ns = [4u32, 16, 64, 256];
        let sweep = sweep_convolution_kl(&spec, x, y, &ns).unwrap();
        let gaps: Vec<f64> = sweep.iter().map(|v| (v - limit).abs()).collect();
        for w in gaps.windows(2) {
            assert!(w[1] < w[0], "gaps must shrink: {gaps:?}");
        }
        assert!(gaps.last().unwrap() / limit < 1e-2);
    }

    #[test]
    fn clt_bound_matches_gaussian_kl_in_1d() {
        let sigma2 = 0.6;
        let fisher = DMatrix::from_element(1, 1, 1.0 / sigma2);
        let (x, y) = (1.1, -0.3);
        let b = clt_bound(&fisher, &[x], &[y]).unwrap();
        let exact = kl_gaussian_1d(
            &GaussianLaw1D::new(x, sigma2).unwrap(),
            &GaussianLaw1D::new(y, sigma2).unwrap(),
        );
        assert_abs_diff_eq!(b.value, exact.value, epsilon = 1e-12);
        assert_eq!(b.theorem_tag, "clt-fisher");
        assert_eq!(b.order, RenyiOrder::One);
    }

    #[test]
    fn clt_bound_nd_and_psd_guard() {
        let fisher = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = clt_bound(&fisher, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        // delta = (1, -1): 0.5 * (2 - 0.5 - 0.5 + 1) = 1.
        assert_abs_diff_eq!(b.value, 1.0, epsilon = 1e-12);

        let not_psd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            clt_bound(&not_psd, &[1.0, 0.0], &[0.0, 1.0]),
            Err(Error::Domain(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.2, 1.0]);
        assert!(clt_bound(&asym, &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn cramer_rao_equality_cases() {
        let gauss = cramer_rao_check(&DensitySpec::gaussian(2.0).unwrap()).unwrap();
        assert!(gauss.holds);
        assert_abs_diff_eq!(gauss.product, 1.0, epsilon = 1e-8);

        let logistic = cramer_rao_check(&DensitySpec::logistic(1.0).unwrap()).unwrap();
        assert!(logistic.holds);
        assert_abs_diff_eq!(logistic.product, PI * PI / 9.0, epsilon = 1e-8);
        assert!(logistic.product > 1.0 + 1e-3, "strict for non-Gaussian laws");
    }

    #[test]
    fn logistic_moments() {
        let spec = DensitySpec::logistic(0.9).unwrap();
        spec.validate().unwrap();
        let v = spec.variance().unwrap();
        assert_abs_diff_eq!(v, PI * PI * 0.81 / 3.0, epsilon = 1e-8);
    }
}
