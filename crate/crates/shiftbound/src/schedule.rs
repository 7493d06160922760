//! Optimal shift schedules.
//!
//! An `N`-step divergence bound is assembled by moving an auxiliary copy of
//! the process a fraction `eta_n` of the remaining gap at step `n`, paying
//! `eta_n^2` (in units of the collapsed distance) and shrinking the gap by
//! `1 - eta_n`; the kernel contracts by `L` per step. The total price of a
//! schedule that fully collapses the gap (`eta_{N-1} = 1`) is
//!
//! ```text
//! F(eta) = sum_{n < N}  L^(2n) * eta_n^2 * prod_{k < n} (1 - eta_k)^2
//! ```
//!
//! This module minimizes `F`: in closed form, by an exact
//! dynamic-programming recursion (an independent oracle for the closed
//! form), by DP over a discrete grid of fractions, and in the continuous
//! limit where the sum becomes `Integral eta_t^2 exp(-2 alpha t - 2 H_t) dt`
//! with `H_t = Integral_0^t eta`.
//!
//! `L` may exceed one (expansive kernels); everything here only assumes
//! `L > 0`.

use crate::error::{Error, Result};
use crate::quad::gk15_panel;
use crate::LIMIT_BRANCH_TOL;

/// A shift schedule together with its objective value.
///
/// Invariants: nonempty, every fraction in `[0, 1]`, final fraction exactly
/// one (the gap must fully collapse), and `objective` consistent with the
/// fractions and `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSchedule {
    etas: Vec<f64>,
    l: f64,
    objective: f64,
}

impl ShiftSchedule {
    /// Wrap explicit fractions, recomputing the objective.
    pub fn new(etas: Vec<f64>, l: f64) -> Result<Self> {
        let objective = shift_objective(&etas, l)?;
        Ok(ShiftSchedule { etas, l, objective })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn contraction(&self) -> f64 {
        self.l
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// Value of `F` at this schedule.
    pub fn objective(&self) -> f64 {
        self.objective
    }
}

/// Evaluate the shift objective `F` for explicit fractions.
///
/// Requires `l > 0`, a nonempty schedule, fractions in `[0, 1]`, and a final
/// fraction of exactly one.
pub fn shift_objective(etas: &[f64], l: f64) -> Result<f64> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Precondition(format!("contraction factor must be positive, got {l}")));
    }
    if etas.is_empty() {
        return Err(Error::Precondition("schedule must have at least one step".into()));
    }
    if let Some(&bad) = etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::Precondition(format!("shift fractions must lie in [0, 1], got {bad}")));
    }
    if *etas.last().unwrap() != 1.0 {
        return Err(Error::Precondition(format!(
            "final shift fraction must be 1 so the gap collapses, got {}",
            etas.last().unwrap()
        )));
    }
    let l2 = l * l;
    let mut total = 0.0;
    let mut weight = 1.0; // L^(2n) * prod_{k<n} (1 - eta_k)^2
    for &eta in etas {
        total += weight * eta * eta;
        let keep = 1.0 - eta;
        weight *= l2 * keep * keep;
    }
    Ok(total)
}

/// Optimal value of the tail problem with `k + 1` steps remaining:
/// `(L^-2 - 1) / (L^(-2(k+1)) - 1)`, or `1 / (k + 1)` at `L = 1`.
fn tail_value(l: f64, k: u32) -> f64 {
    let l2 = l * l;
    if (l2 - 1.0).abs() < LIMIT_BRANCH_TOL {
        1.0 / (k as f64 + 1.0)
    } else {
        let a = 1.0 / l2 - 1.0;
        a / ((1.0 / l2).powi(k as i32 + 1) - 1.0)
    }
}

/// Closed-form optimal schedule for `n` steps at contraction `l`:
/// `eta_i` is the tail value with `n - i` steps remaining, the final
/// fraction is exactly one, and the objective is the full tail value.
pub fn optimal_shifts_closed_form(n: u32, l: f64) -> Result<ShiftSchedule> {
    if n == 0 {
        return Err(Error::Precondition("need at least one step".into()));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Precondition(format!("contraction factor must be positive, got {l}")));
    }
    let etas: Vec<f64> = (0..n).map(|i| tail_value(l, n - 1 - i)).collect();
    debug_assert_eq!(*etas.last().unwrap(), 1.0);
    ShiftSchedule::new(etas, l)
}

/// Exact dynamic-programming solution of the shift problem.
///
/// The value with one step left is `1` (forced full collapse); with `m + 1`
/// steps left and one-step lookahead value `a = L^2 V_m`,
///
/// ```text
/// V_{m+1} = min_eta [ eta^2 + a (1 - eta)^2 ] = a / (1 + a),
/// ```
///
/// minimized at `eta = a / (1 + a)`. This recursion is an independent check
/// of [`optimal_shifts_closed_form`]; the two agree to roundoff.
pub fn dp_optimize(n: u32, l: f64) -> Result<ShiftSchedule> {
    if n == 0 {
        return Err(Error::Precondition("need at least one step".into()));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Precondition(format!("contraction factor must be positive, got {l}")));
    }
    // values[m] = optimal tail value with m steps remaining.
    let mut values = vec![0.0; n as usize + 1];
    values[1] = 1.0;
    for m in 1..n as usize {
        let a = l * l * values[m];
        values[m + 1] = a / (1.0 + a);
    }
    let etas: Vec<f64> = (0..n as usize).map(|i| values[n as usize - i]).collect();
    ShiftSchedule::new(etas, l)
}

/// Dynamic programming over the fraction grid `{0, step, 2 step, ..., 1}`.
///
/// Because the objective is stage-separable, DP over the grid returns
/// exactly the best schedule whose fractions all lie on the grid. Requires
/// `step` in `(0, 0.5]`.
pub fn dp_optimize_grid(n: u32, l: f64, step: f64) -> Result<ShiftSchedule> {
    if n == 0 {
        return Err(Error::Precondition("need at least one step".into()));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Precondition(format!("contraction factor must be positive, got {l}")));
    }
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::Precondition(format!("grid step must lie in (0, 0.5], got {step}")));
    }
    let cells = (1.0 / step).ceil() as usize;
    let grid: Vec<f64> = (0..=cells).map(|i| (i as f64 * step).min(1.0)).collect();

    let mut values = vec![0.0; n as usize + 1];
    let mut best_eta = vec![1.0; n as usize + 1];
    values[1] = 1.0; // final fraction is forced to one, not optimized
    for m in 1..n as usize {
        let a = l * l * values[m];
        let mut best = f64::INFINITY;
        let mut arg = 1.0;
        for &eta in &grid {
            let keep = 1.0 - eta;
            let v = eta * eta + a * keep * keep;
            if v < best {
                best = v;
                arg = eta;
            }
        }
        values[m + 1] = best;
        best_eta[m + 1] = arg;
    }
    let etas: Vec<f64> = (0..n as usize).map(|i| best_eta[n as usize - i]).collect();
    ShiftSchedule::new(etas, l)
}

/// Optimal continuous-time shift rate at time `t` for horizon `t_end` under
/// curvature `alpha`:
///
/// ```text
/// eta_t = 2 alpha / (e^(2 alpha (t_end - t)) - 1),   eta_t = 1 / (t_end - t) at alpha = 0.
/// ```
///
/// Blows up like `1 / (t_end - t)` at the horizon; callers integrate the
/// final cell analytically rather than stepping through it.
pub fn continuous_eta(alpha: f64, t_end: f64, t: f64) -> Result<f64> {
    if !(t_end > 0.0) || !t_end.is_finite() || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite alpha and t_end > 0, got alpha = {alpha}, t_end = {t_end}"
        )));
    }
    if !(0.0..t_end).contains(&t) {
        return Err(Error::Precondition(format!("need 0 <= t < t_end, got t = {t}")));
    }
    let s = t_end - t;
    if alpha == 0.0 {
        Ok(1.0 / s)
    } else {
        Ok(2.0 * alpha / (2.0 * alpha * s).exp_m1())
    }
}

/// Accumulated optimal rate `H_t = Integral_0^t eta_s ds`, in closed form:
///
/// ```text
/// H_t = log( (1 - e^(-2 alpha t_end)) / (1 - e^(-2 alpha (t_end - t))) )
/// ```
///
/// (`log(t_end / (t_end - t))` at `alpha = 0`). `H_0 = 0` exactly, and
/// `H_t -> +inf` at the horizon.
pub fn continuous_eta_integral(alpha: f64, t_end: f64, t: f64) -> Result<f64> {
    if !(t_end > 0.0) || !t_end.is_finite() || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite alpha and t_end > 0, got alpha = {alpha}, t_end = {t_end}"
        )));
    }
    if !(0.0..=t_end).contains(&t) {
        return Err(Error::Precondition(format!("need 0 <= t <= t_end, got t = {t}")));
    }
    if t == t_end {
        return Ok(f64::INFINITY);
    }
    if alpha == 0.0 {
        return Ok((t_end / (t_end - t)).ln());
    }
    // 1 - e^(-z) as -expm1(-z); the ratio of the two is positive for either
    // sign of alpha.
    let full = -(-2.0 * alpha * t_end).exp_m1();
    let tail = -(-2.0 * alpha * (t_end - t)).exp_m1();
    Ok((full / tail).ln())
}

/// Optimal value of the continuous objective: `2 alpha / (e^(2 alpha T) - 1)`,
/// or `1 / T` at `alpha = 0`.
pub fn optimal_continuous_objective(alpha: f64, t_end: f64) -> Result<f64> {
    if !(t_end > 0.0) || !t_end.is_finite() || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite alpha and t_end > 0, got alpha = {alpha}, t_end = {t_end}"
        )));
    }
    if alpha == 0.0 {
        Ok(1.0 / t_end)
    } else {
        Ok(2.0 * alpha / (2.0 * alpha * t_end).exp_m1())
    }
}

// Geometric refinement toward the horizon: panels end at
// t_end (1 - 2^-j) for j = 0..TAIL_LEVELS, each split into SUBPANELS.
const TAIL_LEVELS: u32 = 40;
const SUBPANELS: usize = 4;

/// Continuous shift objective `F(eta) = Integral_0^T eta_t^2 e^(-2 alpha t - 2 H_t) dt`
/// for an arbitrary rate `t -> eta(t)`, with `H` accumulated from `eta`
/// itself by nested quadrature.
///
/// The schedule may blow up at the horizon (the optimal one does); panels
/// refine geometrically toward `t_end` and the remaining sliver of relative
/// length `2^-40` is dropped, which is far below the integration tolerance
/// because the damping `e^(-2 H_t)` vanishes there. Rates must be
/// nonnegative where evaluated; a non-finite integrand yields `+inf`
/// (divergent schedule cost).
pub fn continuous_objective(
    alpha: f64,
    t_end: f64,
    eta: impl Fn(f64) -> f64,
) -> Result<f64> {
    if !(t_end > 0.0) || !t_end.is_finite() || !alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "need finite alpha and t_end > 0, got alpha = {alpha}, t_end = {t_end}"
        )));
    }

    // Sorted GK15 abscissae as offsets in [0, 1], with Kronrod weights.
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(15);
    {
        use crate::quad::{WGK, XGK};
        for i in 0..7 {
            nodes.push(((1.0 - XGK[i]) * 0.5, WGK[i] * 0.5));
        }
        nodes.push((0.5, WGK[7] * 0.5));
        for i in (0..7).rev() {
            nodes.push(((1.0 + XGK[i]) * 0.5, WGK[i] * 0.5));
        }
    }

    let mut total = 0.0;
    let mut h_acc = 0.0; // H at the start of the current subpanel
    let mut prev_break = 0.0;
    for level in 1..=TAIL_LEVELS {
        let next_break = if level == TAIL_LEVELS {
            t_end * (1.0 - 0.5f64.powi(TAIL_LEVELS as i32))
        } else {
            t_end * (1.0 - 0.5f64.powi(level as i32))
        };
        let panel_len = (next_break - prev_break) / SUBPANELS as f64;
        for sp in 0..SUBPANELS {
            let a = prev_break + panel_len * sp as f64;
            let b = a + panel_len;
            // Walk the nodes left to right, extending H by small GK15 sweeps.
            let mut t_prev = a;
            let mut h_node = h_acc;
            let mut panel_sum = 0.0;
            for &(offset, w) in &nodes {
                let t = a + (b - a) * offset;
                let (dh, _) = gk15_panel(&mut |s| eta(s), t_prev, t);
                h_node += dh;
                t_prev = t;
                let e = eta(t);
                if e.is_nan() {
                    return Err(Error::Integration("shift rate evaluated to NaN".into()));
                }
                if e < 0.0 {
                    return Err(Error::Precondition(format!(
                        "shift rate must be nonnegative, got {e} at t = {t}"
                    )));
                }
                let g = e * e * (-2.0 * alpha * t - 2.0 * h_node).exp();
                if !g.is_finite() {
                    return Ok(f64::INFINITY);
                }
                panel_sum += w * g;
            }
            total += panel_sum * (b - a);
            let (dh_rest, _) = gk15_panel(&mut |s| eta(s), t_prev, b);
            h_acc = h_node + dh_rest;
        }
        prev_break = next_break;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_last_fraction_is_exactly_one() {
        for &(n, l) in &[(1u32, 0.5), (5, 0.9), (10, 1.0), (7, 1.3)] {
            let s = optimal_shifts_closed_form(n, l).unwrap();
            assert_eq!(s.etas().last(), Some(&1.0));
            assert_eq!(s.len(), n as usize);
        }
    }

    #[test]
    fn closed_form_matches_dp_exactly() {
        for n in [1u32, 2, 3, 7, 12, 50] {
            for &l in &[0.3, 0.9, 1.0, 1.2, 1.5] {
                let cf = optimal_shifts_closed_form(n, l).unwrap();
                let dp = dp_optimize(n, l).unwrap();
                for (a, b) in cf.etas().iter().zip(dp.etas()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
                assert_abs_diff_eq!(cf.objective(), dp.objective(), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn objective_agrees_with_tail_value() {
        for &(n, l) in &[(4u32, 0.7), (9, 1.1), (6, 1.0)] {
            let s = optimal_shifts_closed_form(n, l).unwrap();
            assert_abs_diff_eq!(s.objective(), tail_value(l, n - 1), epsilon = 1e-13);
        }
        // L = 1: objective 1/N, uniform-in-tail fractions 1/(N-i).
        let s = optimal_shifts_closed_form(4, 1.0).unwrap();
        let expect = [0.25, 1.0 / 3.0, 0.5, 1.0];
        for (a, b) in s.etas().iter().zip(expect) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_dp_equals_exhaustive_search_on_the_grid() {
        // Stage separability means grid DP must match brute force over the
        // full grid product; verify for N = 3 on a coarse grid.
        let (l, step) = (0.8, 0.05);
        let cells = (1.0 / step) as usize;
        let grid: Vec<f64> = (0..=cells).map(|i| (i as f64 * step).min(1.0)).collect();
        let mut best = f64::INFINITY;
        for &e0 in &grid {
            for &e1 in &grid {
                let obj = shift_objective(&[e0, e1, 1.0], l).unwrap();
                if obj < best {
                    best = obj;
                }
            }
        }
        let dp = dp_optimize_grid(3, l, step).unwrap();
        assert_abs_diff_eq!(dp.objective(), best, epsilon = 1e-14);
    }

    #[test]
    fn grid_dp_brackets_the_closed_form() {
        for n in [2u32, 4, 6] {
            for &l in &[0.4, 1.0, 1.4] {
                let cf = optimal_shifts_closed_form(n, l).unwrap();
                let grid = dp_optimize_grid(n, l, 1e-3).unwrap();
                // The grid can never beat the true optimum, and lands within
                // O(step^2) of it.
                assert!(grid.objective() >= cf.objective() - 1e-12);
                assert!(grid.objective() - cf.objective() <= 5e-3);
            }
        }
    }

    #[test]
    fn eta_integral_is_consistent_with_quadrature() {
        for &alpha in &[0.0, 0.7, -0.5] {
            let t_end = 1.3;
            let t = 0.9;
            let closed = continuous_eta_integral(alpha, t_end, t).unwrap();
            let numeric = integrate(|s| continuous_eta(alpha, t_end, s).unwrap(), 0.0, t, 1e-11);
            assert!(numeric.converged);
            assert_abs_diff_eq!(closed, numeric.value, epsilon = 1e-9);
        }
        assert_eq!(continuous_eta_integral(0.5, 1.0, 0.0).unwrap(), 0.0);
        assert!(continuous_eta_integral(0.5, 1.0, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn optimal_rate_satisfies_euler_lagrange() {
        // The optimal rate solves eta' = eta^2 + 2 alpha eta.
        let (alpha, t_end) = (0.8, 1.0);
        for &t in &[0.2, 0.7, 0.95] {
            let d = 1e-6;
            let up = continuous_eta(alpha, t_end, t + d).unwrap();
            let down = continuous_eta(alpha, t_end, t - d).unwrap();
            let deriv = (up - down) / (2.0 * d);
            let eta = continuous_eta(alpha, t_end, t).unwrap();
            let residual = deriv - eta * eta - 2.0 * alpha * eta;
            assert!(
                residual.abs() <= 1e-3 * (1.0 + deriv.abs()),
                "t = {t}: residual {residual}"
            );
        }
    }

    #[test]
    fn objective_integrator_matches_constant_rate_closed_form() {
        // For eta = c constant (not collapsing, but integrable):
        // F = c^2 (1 - e^(-2 (alpha + c) T)) / (2 (alpha + c)).
        let (alpha, c, t_end) = (0.4, 1.1, 1.7);
        let got = continuous_objective(alpha, t_end, |_| c).unwrap();
        let want = c * c * (1.0 - (-2.0 * (alpha + c) * t_end).exp()) / (2.0 * (alpha + c));
        assert_abs_diff_eq!(got, want, epsilon = 1e-9);
    }

    #[test]
    fn optimal_rate_attains_the_optimal_objective() {
        for &(alpha, t_end) in &[(0.0, 1.0), (1.0, 1.0), (-0.6, 0.5), (0.3, 2.0)] {
            let got =
                continuous_objective(alpha, t_end, |t| continuous_eta(alpha, t_end, t).unwrap())
                    .unwrap();
            let want = optimal_continuous_objective(alpha, t_end).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-7 * (1.0 + want));
        }
    }

    #[test]
    fn perturbed_rates_do_worse() {
        let (alpha, t_end) = (0.9, 1.2);
        let opt = optimal_continuous_objective(alpha, t_end).unwrap();
        let perturbed = continuous_objective(alpha, t_end, |t| {
            continuous_eta(alpha, t_end, t).unwrap() * (1.0 + 0.2 * (3.0 * t).sin())
        })
        .unwrap();
        assert!(perturbed > opt + 1e-6, "perturbed {perturbed} vs optimal {opt}");
    }

    #[test]
    fn discrete_objective_converges_to_continuous_limit() {
        // With L = 1 - alpha h and N h = T, the discrete objective scaled by
        // 1/h converges at rate O(h) to 2 alpha / (e^(2 alpha T) - 1).
        let (alpha, t_end) = (1.0, 1.0);
        let target = optimal_continuous_objective(alpha, t_end).unwrap();
        let mut errors = Vec::new();
        for k in 0..3 {
            let n = 64u32 << k;
            let h = t_end / n as f64;
            let s = optimal_shifts_closed_form(n, 1.0 - alpha * h).unwrap();
            errors.push((s.objective() / h - target).abs());
        }
        for w in errors.windows(2) {
            let ratio = w[1] / w[0];
            assert!((0.4..0.6).contains(&ratio), "halving ratio {ratio}, errors {errors:?}");
        }
    }

    proptest! {
        /// No schedule beats the closed form.
        #[test]
        fn closed_form_is_optimal(
            l in 0.2f64..1.5,
            raw in proptest::collection::vec(0.0f64..1.0, 1..9),
        ) {
            let mut etas = raw.clone();
            *etas.last_mut().unwrap() = 1.0;
            let n = etas.len() as u32;
            let best = optimal_shifts_closed_form(n, l).unwrap();
            let obj = shift_objective(&etas, l).unwrap();
            prop_assert!(obj >= best.objective() - 1e-12);
        }

        /// The one-step decomposition of the objective holds:
        /// F(eta) = eta_0^2 + L^2 (1 - eta_0)^2 F(tail).
        #[test]
        fn bellman_decomposition(
            l in 0.2f64..1.5,
            raw in proptest::collection::vec(0.0f64..1.0, 2..9),
        ) {
            let mut etas = raw.clone();
            *etas.last_mut().unwrap() = 1.0;
            let full = shift_objective(&etas, l).unwrap();
            let tail = shift_objective(&etas[1..], l).unwrap();
            let e0 = etas[0];
            let recomposed = e0 * e0 + l * l * (1.0 - e0) * (1.0 - e0) * tail;
            prop_assert!((full - recomposed).abs() <= 1e-12 * (1.0 + full));
        }
    }
}
