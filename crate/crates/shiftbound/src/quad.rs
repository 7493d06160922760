//! Adaptive one-dimensional quadrature.
//!
//! A 15-point Kronrod rule nested over 7-point Gauss gives a value and an
//! error estimate per panel; panels whose estimate exceeds their share of
//! the tolerance budget are bisected. The rule never evaluates the integrand
//! at panel endpoints, so integrable endpoint singularities are handled by
//! refinement alone.
//!
//! Divergent integrands are not an error here: once a panel evaluates to a
//! non-finite value it is accepted as terminal, the total inherits it, and
//! the result is marked non-converged. Callers decide whether that means
//! "the divergence is infinite" or "the tolerance was not met".

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    /// Estimated integral; may be infinite or NaN if the integrand was.
    pub value: f64,
    /// Sum of per-panel error estimates.
    pub abs_error: f64,
    /// True if every panel met its local error budget.
    pub converged: bool,
    /// Number of integrand evaluations.
    pub evaluations: usize,
}

// 15-point Kronrod nodes on [-1, 1], nonnegative half, descending.
// Odd indices (1, 3, 5) and the center are the embedded 7-point Gauss nodes.
pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];

pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Apply the 15-point Kronrod rule to one panel.
///
/// Returns `(value, error_estimate)` where the estimate is the difference
/// against the embedded Gauss rule. Costs 15 evaluations.
// Indexing `WG[j]` alongside the strided `2 * j + 1` access keeps the two
// weight tables visibly in lockstep.
#[allow(clippy::needless_range_loop)]
pub(crate) fn gk15_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;

    for j in 0..3 {
        let idx = 2 * j + 1;
        let dx = half * XGK[idx];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[idx] * pair;
        gauss += WG[j] * pair;
    }
    for j in 0..4 {
        let idx = 2 * j;
        let dx = half * XGK[idx];
        kronrod += WGK[idx] * (f(center - dx) + f(center + dx));
    }

    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

const MAX_DEPTH: u32 = 60;
const MAX_PANELS: usize = 1 << 14;

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
    /// No further refinement possible (depth cap, or non-finite value).
    stuck: bool,
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Orientation is respected: swapping the endpoints negates the value.
/// Refinement is global: the panel with the largest error estimate is
/// bisected until the summed estimates drop below `tol` (or below a relative
/// floor for integrals whose magnitude makes `tol` unreachable in `f64`).
/// Panels that evaluate to non-finite values are kept as is; they dominate
/// the returned value and clear `converged`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    assert!(a.is_finite() && b.is_finite(), "integration bounds must be finite");
    assert!(tol > 0.0, "quadrature tolerance must be positive");

    if a == b {
        return QuadResult { value: 0.0, abs_error: 0.0, converged: true, evaluations: 0 };
    }
    if a > b {
        let mut r = integrate(f, b, a, tol);
        r.value = -r.value;
        return r;
    }

    let mut evaluations = 0usize;
    let mut panel_of = |lo: f64, hi: f64, depth: u32, evals: &mut usize| -> Panel {
        let (value, error) = gk15_panel(&mut f, lo, hi);
        *evals += 15;
        Panel { a: lo, b: hi, value, error, depth, stuck: !value.is_finite() }
    };

    let mut panels = vec![panel_of(a, b, 0, &mut evaluations)];

    loop {
        let abs_sum: f64 = panels.iter().map(|p| p.value.abs()).sum();
        let total_err: f64 = panels.iter().map(|p| if p.error.is_nan() { 0.0 } else { p.error }).sum();
        let target = tol.max(100.0 * f64::EPSILON * abs_sum);
        if total_err <= target && abs_sum.is_finite() {
            break;
        }

        // Split the refinable panel with the worst error estimate.
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.stuck)
            .max_by(|(_, p), (_, q)| p.error.total_cmp(&q.error))
            .map(|(i, _)| i);
        let Some(i) = worst else { break };
        if panels.len() >= MAX_PANELS {
            break;
        }
        let p = panels[i];
        if p.depth >= MAX_DEPTH || p.error == 0.0 {
            panels[i].stuck = true;
            continue;
        }
        let mid = 0.5 * (p.a + p.b);
        panels[i] = panel_of(p.a, mid, p.depth + 1, &mut evaluations);
        panels.push(panel_of(mid, p.b, p.depth + 1, &mut evaluations));
    }

    // Sum in interval order so the result does not depend on refinement
    // history ties; Neumaier compensation unless a non-finite panel exists.
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let any_nonfinite = panels.iter().any(|p| !p.value.is_finite());
    let value = if any_nonfinite {
        panels.iter().map(|p| p.value).sum()
    } else {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for p in &panels {
            let t = sum + p.value;
            if sum.abs() >= p.value.abs() {
                comp += (sum - t) + p.value;
            } else {
                comp += (p.value - t) + sum;
            }
            sum = t;
        }
        sum + comp
    };
    let abs_error: f64 = panels.iter().map(|p| if p.error.is_nan() { 0.0 } else { p.error }).sum();
    let abs_sum: f64 = panels.iter().map(|p| p.value.abs()).sum();
    let converged =
        !any_nonfinite && abs_error <= tol.max(100.0 * f64::EPSILON * abs_sum);

    QuadResult { value, abs_error, converged, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact_in_one_panel() {
        let (val, err) = gk15_panel(&mut |x: f64| x.powi(6), 0.0, 1.0);
        assert_abs_diff_eq!(val, 1.0 / 7.0, epsilon = 1e-15);
        assert!(err < 1e-12);
    }

    #[test]
    fn gaussian_density_normalizes() {
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        let r = integrate(|x| (-0.5 * x * x).exp() / norm, -12.0, 12.0, 1e-12);
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9);
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-8);

        let r = integrate(|x| x.ln(), 0.0, 1.0, 1e-9);
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn oscillatory_integrand() {
        let r = integrate(|x| (10.0 * x).cos(), 0.0, 2.0 * std::f64::consts::PI, 1e-12);
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-11);
    }

    #[test]
    fn orientation_negates() {
        let fwd = integrate(|x| x * x, 0.0, 2.0, 1e-10);
        let back = integrate(|x| x * x, 2.0, 0.0, 1e-10);
        assert_eq!(fwd.value, -back.value);
        assert_abs_diff_eq!(fwd.value, 8.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn overflowing_integrand_flags_divergence() {
        let r = integrate(|x| (x * x).exp(), -40.0, 40.0, 1e-9);
        assert!(!r.converged);
        assert!(r.value.is_infinite());
    }

    #[test]
    fn zero_length_interval() {
        let r = integrate(|x| x.exp(), 3.0, 3.0, 1e-9);
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }
}
