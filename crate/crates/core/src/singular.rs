//! Reflection (singular) control and the vanishing fixed-cost limit.
//!
//! Reflecting the process at `x` earns `h(x)` in the long run, so the optimal
//! reflection level is the maximizer `ŷ` of `h`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::impulse::{level_roots, solve, stationary_density, BoundaryCase, ImpulseOutcome};
use crate::model::EconomicParams;
use crate::potentials::PotentialTable;
use crate::{lit, to_f64, Error, Real, Result};

/// Optimal reflection level and its value.
#[derive(Debug, Clone, Serialize)]
pub struct SingularSolution<T> {
    pub y_hat: T,
    /// `h(ŷ)`.
    pub value: T,
    /// A mesh point `x̃` with `h(x̃) > γ c̄(b)`, and `h(x̃)`.
    pub cond_5_4_witness: (T, T),
    pub cbar_b: T,
    /// `r(ŷ) - h(ŷ)`, which has the sign of `h'(ŷ)`.
    pub stationarity_residual: T,
    pub params: EconomicParams<T>,
}

/// Either reflection at `ŷ` or the verdict that doing nothing is optimal.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SingularOutcome<T> {
    Reflect(SingularSolution<T>),
    DoNothing { value: T, best_mesh_value: T },
}

impl<T: Real> SingularOutcome<T> {
    pub fn solution(&self) -> Option<&SingularSolution<T>> {
        match self {
            SingularOutcome::Reflect(s) => Some(s),
            SingularOutcome::DoNothing { .. } => None,
        }
    }

    pub fn into_solution(self) -> Result<SingularSolution<T>> {
        match self {
            SingularOutcome::Reflect(s) => Ok(s),
            SingularOutcome::DoNothing { value, .. } => Err(Error::Condition(format!(
                "no reflection level beats the do-nothing value {}",
                to_f64(value)
            ))),
        }
    }

    pub fn value(&self) -> T {
        match self {
            SingularOutcome::Reflect(s) => s.value,
            SingularOutcome::DoNothing { value, .. } => *value,
        }
    }
}

/// Maximizes the reflection value `h`.
pub fn solve_singular<T: Real>(table: &PotentialTable<T>, params: &EconomicParams<T>) -> Result<SingularOutcome<T>> {
    let cbar = table.cbar_b()?;
    let floor = params.gamma * cbar;
    let mut best = (T::nan(), T::neg_infinity());
    for x in table.quantile_mesh(400, lit(1e-4), T::one() - lit(1e-4)) {
        let hx = table.h(params, x)?;
        if hx > best.1 {
            best = (x, hx);
        }
    }
    if !(best.1 > floor) {
        return Ok(SingularOutcome::DoNothing { value: floor, best_mesh_value: best.1 });
    }
    let peak = table.h_peak(params)?;
    let r = params.reward_rate(table.model(), peak.y_hat);
    Ok(SingularOutcome::Reflect(SingularSolution {
        y_hat: peak.y_hat,
        value: peak.h_hat,
        cond_5_4_witness: best,
        cbar_b: cbar,
        stationarity_residual: r - table.h(params, peak.y_hat)?,
        params: *params,
    }))
}

/// Long-run average reward of reflection at `x`.
pub fn reflection_value<T: Real>(table: &PotentialTable<T>, params: &EconomicParams<T>, x: T) -> Result<T> {
    table.h(params, x)
}

/// Long-run rate of the reflection push at `x`, `∫ μ dπ_x = 1/ξ'(x)`.
pub fn local_time_rate<T: Real>(table: &PotentialTable<T>, x: T) -> Result<T> {
    Ok(T::one() / table.xi_prime(x)?)
}

/// Stationary CDF of the process reflected at `y`: `M[a, x] / M[a, y]`.
pub fn reflection_cdf<T: Real>(table: &PotentialTable<T>, y: T, x: T) -> Result<T> {
    if x >= y {
        return Ok(T::one());
    }
    if x <= table.domain_lo() {
        return Ok(T::zero());
    }
    Ok(table.speed_cum(x)? / table.speed_cum(y)?)
}

/// Relative value of reflection at `ŷ`.
pub fn u_value<T: Real>(table: &PotentialTable<T>, sol: &SingularSolution<T>, x: T) -> Result<T> {
    let u = |z: T| -> Result<T> {
        let p = table.point(z)?;
        Ok(sol.value * p.xi - sol.params.gamma * p.g)
    };
    if x <= sol.y_hat {
        u(x)
    } else {
        Ok(u(sol.y_hat)? + sol.params.p * (x - sol.y_hat))
    }
}

/// Residuals of the singular QVI at `ŷ`.
#[derive(Debug, Clone, Serialize)]
pub struct SingularQviReport<T> {
    /// One-sided derivatives of `U` at `ŷ`: `(U'(ŷ-), U'(ŷ+))`.
    pub first_derivative: (T, T),
    /// `(U''(ŷ-), U''(ŷ+))`.
    pub second_derivative: (T, T),
    pub smooth_pasting_residual: T,
    /// `max |AU + γc - h(ŷ)|` on interior nodes below `ŷ`.
    pub generator_below: T,
    pub generator_below_at: T,
    /// `max (AU + γc - h(ŷ))` on nodes above `ŷ`; must be nonpositive.
    pub generator_above: T,
    /// `AU + γc - h(ŷ)` at `ŷ + 0.2`.
    pub generator_probe: T,
    /// `min (U' - p)` below `ŷ`; must be nonnegative.
    pub gradient_below: T,
    pub pass: bool,
}

/// Checks smooth pasting and the differential inequalities of `U`.
pub fn singular_qvi_check<T: Real>(table: &PotentialTable<T>, sol: &SingularSolution<T>) -> Result<SingularQviReport<T>> {
    let model = table.model();
    let prm = &sol.params;
    let y = sol.y_hat;
    let u = |x: T| u_value(table, sol, x);
    let g_form = |x: T| -> Result<T> {
        let p = table.point(x)?;
        Ok(sol.value * p.xi - prm.gamma * p.g)
    };
    let d = lit::<T>(1e-3) * (y - model.a()).min(T::one());
    let (l0, l1, l2, l3) = (g_form(y)?, g_form(y - d)?, g_form(y - d - d)?, g_form(y - lit::<T>(3.0) * d)?);
    let d1_left = (lit::<T>(1.5) * l0 - lit::<T>(2.0) * l1 + lit::<T>(0.5) * l2) / d;
    let d2_left = (lit::<T>(2.0) * l0 - lit::<T>(5.0) * l1 + lit::<T>(4.0) * l2 - l3) / (d * d);
    let (r1, r2, r3) = (u(y + d)?, u(y + d + d)?, u(y + lit::<T>(3.0) * d)?);
    let d1_right = (-lit::<T>(1.5) * l0 + lit::<T>(2.0) * r1 - lit::<T>(0.5) * r2) / d;
    let d2_right = (lit::<T>(2.0) * l0 - lit::<T>(5.0) * r1 + lit::<T>(4.0) * r2 - r3) / (d * d);
    let smooth = (d1_left - d1_right).abs().max((d1_left - prm.p).abs());

    let resid = |x: T| -> Result<T> { Ok(table.generator(u, x)? + prm.gamma * model.c(x) - sol.value) };
    let guard = lit::<T>(5.0) * d;
    let (mut below, mut below_at, mut above) = (T::zero(), T::nan(), T::neg_infinity());
    for x in table.interior_nodes() {
        if x < y - guard {
            let r = resid(x)?.abs();
            if r > below {
                below = r;
                below_at = x;
            }
        } else if x > y + guard {
            above = above.max(resid(x)?);
        }
    }
    let mut gradient_below = T::infinity();
    for n in table.nodes().iter().filter(|n| n.x < y) {
        gradient_below = gradient_below.min(sol.value * n.q - prm.gamma * n.gc - prm.p);
    }
    let probe_x = y + lit(0.2);
    let generator_probe = if probe_x < table.x_last() { resid(probe_x)? } else { T::nan() };
    let tol = lit::<T>(1e-4);
    let pass = smooth <= tol
        && below <= tol
        && above <= T::zero()
        && gradient_below >= -tol
        && !(generator_probe >= T::zero());
    Ok(SingularQviReport {
        first_derivative: (d1_left, d1_right),
        second_derivative: (d2_left, d2_right),
        smooth_pasting_residual: smooth,
        generator_below: below,
        generator_below_at: below_at,
        generator_above: above,
        generator_probe,
        gradient_below,
        pass,
    })
}

/// One fixed cost in a [`KSweepReport`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KSweepRow<T> {
    pub k: T,
    pub w_star: T,
    pub y_star: T,
    pub f_star: T,
    /// `h(ŷ) - F*_K`.
    pub gap: T,
    /// `K / Bξ(w*, y*)`.
    pub penalty_fixed: T,
    /// `gap - K / Bξ`.
    pub penalty_structural: T,
    /// Sup-distance between the stationary CDF of the policy and that of reflection at `ŷ`.
    pub cdf_sup_gap: T,
}

/// Impulse optima along a decreasing ladder of fixed costs.
#[derive(Debug, Clone, Serialize)]
pub struct KSweepReport<T> {
    pub y_hat: T,
    pub h_y_hat: T,
    pub rows: Vec<KSweepRow<T>>,
    /// Costs dropped from the ladder with the reason.
    pub dropped: Vec<(T, String)>,
    pub f_increasing: bool,
    pub y_converging: bool,
    pub w_converging: bool,
    pub structural_nonnegative: bool,
    pub structural_decreasing: bool,
    pub final_cdf_gap: T,
}

impl<T: Real> KSweepReport<T> {
    /// All monotonicity checks hold and the final CDF gap is within `cdf_tol`.
    pub fn pass(&self, cdf_tol: T) -> bool {
        self.f_increasing
            && self.y_converging
            && self.w_converging
            && self.structural_nonnegative
            && self.structural_decreasing
            && self.final_cdf_gap <= cdf_tol
    }

    /// Columns `K, w*, y*, F*, gap, penalty_fixed, penalty_structural`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "K,w_star,y_star,F_star,gap,penalty_fixed,penalty_structural")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{:e},{:e},{:e}",
                to_f64(r.k),
                to_f64(r.w_star),
                to_f64(r.y_star),
                to_f64(r.f_star),
                to_f64(r.gap),
                to_f64(r.penalty_fixed),
                to_f64(r.penalty_structural)
            )?;
        }
        Ok(())
    }
}

fn cdf_sup_gap<T: Real>(table: &PotentialTable<T>, y_hat: T, w: T, y: T) -> Result<T> {
    let nu = stationary_density(table, w, y)?;
    let mut gap = T::zero();
    let top = y.max(y_hat);
    for n in table.nodes().iter().take_while(|n| n.x <= top) {
        let d = (nu.cdf(table, n.x)? - reflection_cdf(table, y_hat, n.x)?).abs();
        gap = gap.max(d);
    }
    for x in [w, y, y_hat] {
        if x > table.x_first() {
            gap = gap.max((nu.cdf(table, x)? - reflection_cdf(table, y_hat, x)?).abs());
        }
    }
    Ok(gap)
}

/// Solves the impulse problem for each `K` (sorted decreasing) and compares with reflection at `ŷ`.
pub fn k_sweep<T: Real>(table: &PotentialTable<T>, params: &EconomicParams<T>, ks: &[T]) -> Result<KSweepReport<T>> {
    let sol = solve_singular(table, params)?.into_solution()?;
    let mut ks: Vec<T> = ks.to_vec();
    ks.sort_by(|u, v| v.partial_cmp(u).expect("finite costs"));
    ks.dedup();
    let results: Vec<(T, Result<KSweepRow<T>>)> = ks
        .par_iter()
        .map(|&k| {
            let row = params.with_k(k).and_then(|prm| match solve(table, &prm, lit(1e-10))? {
                ImpulseOutcome::Intervene(s) => {
                    let gap = sol.value - s.f_star;
                    let fixed = k / s.b_xi;
                    Ok(KSweepRow {
                        k,
                        w_star: s.w_star,
                        y_star: s.y_star,
                        f_star: s.f_star,
                        gap,
                        penalty_fixed: fixed,
                        penalty_structural: gap - fixed,
                        cdf_sup_gap: cdf_sup_gap(table, sol.y_hat, s.w_star, s.y_star)?,
                    })
                }
                ImpulseOutcome::DoNothing { .. } => Err(Error::Condition("no policy beats doing nothing".into())),
            });
            (k, row)
        })
        .collect();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (k, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) if e.is_condition() => dropped.push((k, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let pairs = |f: &dyn Fn(&KSweepRow<T>, &KSweepRow<T>) -> bool| rows.windows(2).all(|w| f(&w[0], &w[1]));
    let yh = sol.y_hat;
    let structural_floor = -lit::<T>(1e-8);
    Ok(KSweepReport {
        y_hat: yh,
        h_y_hat: sol.value,
        f_increasing: pairs(&|a, b| b.f_star > a.f_star),
        y_converging: pairs(&|a, b| (b.y_star - yh).abs() < (a.y_star - yh).abs()),
        w_converging: pairs(&|a, b| (b.w_star - yh).abs() < (a.w_star - yh).abs()),
        structural_nonnegative: rows.iter().all(|r| r.penalty_structural >= structural_floor),
        structural_decreasing: pairs(&|a, b| b.penalty_structural < a.penalty_structural),
        final_cdf_gap: rows.last().map(|r| r.cdf_sup_gap).unwrap_or(T::nan()),
        rows,
        dropped,
    })
}

/// An impulse policy close to reflection at `ŷ` with an implied positive fixed cost.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChatteringPolicy<T> {
    pub w: T,
    pub y: T,
    /// Fixed cost for which `(w, y)` is optimal.
    pub k: T,
    /// Its long-run value `h(y)`.
    pub value: T,
    pub boundary_case: BoundaryCase,
}

/// Level-`h(ŷ) - ε` policy: `ỹ > ŷ` and its conjugate `w̃ < ŷ` share the value `h(ŷ) - ε`.
pub fn chattering_policy<T: Real>(
    table: &PotentialTable<T>,
    params: &EconomicParams<T>,
    eps: T,
) -> Result<ChatteringPolicy<T>> {
    if !(eps > T::zero()) {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    let peak = table.h_peak(params)?;
    let level = peak.h_hat - eps;
    let floor = params.gamma * table.cbar_b()?;
    if !(level > floor) {
        return Err(Error::Precondition(format!(
            "level {} is not above the do-nothing value {}; reduce eps",
            to_f64(level),
            to_f64(floor)
        )));
    }
    let (w, y, case) = level_roots(table, params, &peak, level)?;
    let value = table.h(params, y)?;
    let (pw, py) = (table.point(w)?, table.point(y)?);
    let k = params.gamma * (py.g - pw.g) + params.p * (y - w) - value * (py.xi - pw.xi);
    Ok(ChatteringPolicy { w, y, k, value, boundary_case: case })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{default_params, log_nat};

    fn table() -> PotentialTable<f64> {
        PotentialTable::build(&log_nat(), 1500, 1e-9).unwrap()
    }

    #[test]
    fn singular_value_dominates_grid() {
        let t = table();
        let prm = default_params();
        let s = solve_singular(&t, &prm).unwrap().into_solution().unwrap();
        for n in t.nodes() {
            assert!(t.h(&prm, n.x).unwrap() <= s.value + 1e-12);
        }
        assert!(s.stationarity_residual.abs() < 1e-9);
    }

    #[test]
    fn u_vanishes_at_reference_point() {
        let t = table();
        let s = solve_singular(&t, &default_params()).unwrap().into_solution().unwrap();
        assert!(s.y_hat > 0.5);
        assert_eq!(u_value(&t, &s, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn chattering_cost_is_positive() {
        let t = table();
        for eps in [1e-3, 1e-2, 5e-2] {
            let c = chattering_policy(&t, &default_params(), eps).unwrap();
            assert!(c.k > 0.0);
            assert!((c.value - (t.h_peak(&default_params()).unwrap().h_hat - eps)).abs() < 1e-9);
        }
    }

    #[test]
    fn reflection_cdf_is_one_at_level() {
        let t = table();
        assert_eq!(reflection_cdf(&t, 0.8, 0.8).unwrap(), 1.0);
        let v = reflection_cdf(&t, 0.8, 0.5).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
}
