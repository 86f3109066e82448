//! Tabulated scale/speed potentials: `M[a,·]`, the hitting-time potential `ξ`,
//! the running-reward potential `g`, their derivatives, the reflection value
//! `h`, and the jump-difference operator `B`.
//!
//! Nodes carry `φ = -ln s` together with the derivative quantities
//! `ξ' = s M[a,x]`, `g' = s ∫_a^x c dM` and `s ∫_a^x μ dM`. Between nodes these
//! are advanced with weights `exp(φ(u) - φ(x))`, which never overflow even
//! where `s` or `m` individually do.

use std::io::Write;

use serde::Serialize;

use crate::model::{exponent_limit, DiffusionModel, EconomicParams};
use crate::numerics::{gauss_kronrod, golden_max, hermite_eval, monotone_slopes, GaussLegendre};
use crate::{lit, to_f64, Error, Real, Result};

/// State of the potentials at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point<T> {
    pub x: T,
    /// `-ln s(x)`.
    pub phi: T,
    /// `ξ'(x) = s(x) M[a,x]`.
    pub q: T,
    /// `g'(x) = s(x) ∫_a^x c dM`.
    pub gc: T,
    /// `s(x) ∫_a^x μ dM`; identically one.
    pub gmu: T,
    pub xi: T,
    pub g: T,
    /// `S[x0, x] = ∫_{x0}^x s`.
    pub sc: T,
}

impl<T: Real> Point<T> {
    pub fn s(&self) -> T {
        (-self.phi).exp()
    }
    /// `M[a, x]`.
    pub fn mcum(&self) -> T {
        self.q * self.phi.exp()
    }
}

/// Off-node evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Re-integrate the enclosing panel from its left node.
    #[default]
    Exact,
    /// Shape-preserving cubic Hermite between nodes.
    MonotoneCubic,
}

/// Total speed measure `M[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedTotal<T> {
    Finite { value: T, c_integral: T, rel_tail: T },
    Infinite { rel_tail: T },
    Ambiguous { rel_tail: T },
}

#[derive(Debug, Clone, Copy)]
struct EntranceExtension<T> {
    a: T,
    d: T,
    q: [T; 3],
    gc: [T; 3],
}

impl<T: Real> EntranceExtension<T> {
    fn quadratic(at_a: T, at_f: T, slope_f: T, d: T) -> [T; 3] {
        let k = (at_a + slope_f * d - at_f) / (d * d);
        [at_a, slope_f - lit::<T>(2.0) * k * d, k]
    }

    fn value(c: &[T; 3], t: T) -> T {
        c[0] + c[1] * t + c[2] * t * t
    }

    /// `∫_t^d` of the quadratic.
    fn integral_to_first(c: &[T; 3], t: T, d: T) -> T {
        c[0] * (d - t) + c[1] * (d * d - t * t) / lit(2.0) + c[2] * (d * d * d - t * t * t) / lit(3.0)
    }
}

/// Cached potentials of a diffusion model. Immutable after [`build_table`].
#[derive(Debug, Clone)]
pub struct PotentialTable<T: Real> {
    model: DiffusionModel<T>,
    nodes: Vec<Point<T>>,
    dphi: Vec<T>,
    rule: GaussLegendre<T>,
    tol: T,
    entrance: Option<EntranceExtension<T>>,
    speed_total: SpeedTotal<T>,
    cbar: std::result::Result<T, Error>,
    z0: T,
    identity_residual: T,
    interpolation: Interpolation,
    phi_error: T,
}

const RULE_ORDER: usize = 8;
const MAX_PANEL_DPHI: f64 = 0.5;
const PROBES_PER_OCTAVE: f64 = 4.0;

/// Builds the potential table on a grid of about `n_grid` nodes.
///
/// Fails with [`Error::SpeedNotIntegrable`] when `M[a, y]` is infinite.
pub fn build_table<T: Real>(model: &DiffusionModel<T>, n_grid: usize, tol: T) -> Result<PotentialTable<T>> {
    PotentialTable::build(model, n_grid, tol)
}

impl<T: Real> PotentialTable<T> {
    pub fn build(model: &DiffusionModel<T>, n_grid: usize, tol: T) -> Result<Self> {
        if n_grid < 16 {
            return Err(Error::Precondition("n_grid must be at least 16".into()));
        }
        if !(tol > T::zero()) {
            return Err(Error::Precondition("tol must be positive".into()));
        }
        let (a, b, x0, bc) = (model.a(), model.b(), model.x0(), model.b_cut());
        let lmax = exponent_limit::<T>();
        let phi_tol = tol * lit(1e-3);
        let dphi_int = |lo: T, hi: T| -> Result<(T, T)> {
            let r = gauss_kronrod(|u| model.drift_ratio(u), lo, hi, phi_tol, phi_tol, 4000)?;
            Ok((r.value, r.error))
        };

        // Extent: march outward until the exponent would overflow or the relative floor is hit.
        let ratio = lit::<T>(2.0).powf(-T::one() / lit(PROBES_PER_OCTAVE));
        let floor = lit::<T>(1e-12);
        let ell = x0 - a;
        let mut x_start = x0;
        let mut phi_acc = T::zero();
        let mut d = ell;
        loop {
            d = d * ratio;
            let x = a + d;
            if d < floor * ell || x <= a {
                break;
            }
            let (inc, _) = dphi_int(x_start, x)?;
            if !(phi_acc + inc).is_finite() || (phi_acc + inc).abs() > lmax {
                break;
            }
            phi_acc = phi_acc + inc;
            x_start = x;
        }
        let ell_b = if b.is_finite() { b - x0 } else { bc - x0 };
        let mut x_end = x0;
        phi_acc = T::zero();
        let mut k = 0usize;
        loop {
            k += 1;
            let x = if b.is_finite() {
                let gap = ell_b * ratio.powi(k as i32);
                if gap < floor * ell_b {
                    break;
                }
                (b - gap).min(bc)
            } else {
                (x0 + ell_b * lit((k as f64) / (8.0 * PROBES_PER_OCTAVE))).min(bc)
            };
            let (inc, _) = dphi_int(x_end, x)?;
            if !(phi_acc + inc).is_finite() || (phi_acc + inc).abs() > lmax {
                break;
            }
            phi_acc = phi_acc + inc;
            x_end = x;
            if x >= bc {
                break;
            }
        }

        // Stretched coordinate, dense near both ends.
        let zeta = |x: T| -> T {
            let mut z = ((x - a) / ell).ln() + (x - a) / ell;
            if b.is_finite() {
                z = z - ((b - x) / (b - x0)).ln();
            }
            z
        };
        let z_lo = zeta(x_start);
        let z_hi = zeta(x_end);
        let mut xs = Vec::with_capacity(n_grid + 1);
        xs.push(x_start);
        for i in 1..n_grid - 1 {
            let target = z_lo + (z_hi - z_lo) * lit(i as f64 / (n_grid - 1) as f64);
            let (mut lo, mut hi) = (x_start, x_end);
            for _ in 0..200 {
                let mid = (lo + hi) * lit(0.5);
                if zeta(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= T::epsilon() * (T::one() + hi.abs()) {
                    break;
                }
            }
            xs.push((lo + hi) * lit(0.5));
        }
        xs.push(x_end);
        xs.push(x0);
        xs.sort_by(|u, v| u.partial_cmp(v).expect("finite grid"));
        xs.dedup_by(|u, v| (*u - *v).abs() <= T::epsilon() * (T::one() + v.abs()));

        // φ increments per panel, splitting panels where φ moves too much.
        let mut grid = vec![xs[0]];
        let mut phis = vec![T::zero()];
        let mut incs = Vec::with_capacity(xs.len());
        let mut phi_error = T::zero();
        let max_dphi = lit::<T>(MAX_PANEL_DPHI);
        for w in xs.windows(2) {
            let mut stack = vec![(w[0], w[1])];
            while let Some((l, r)) = stack.pop() {
                let (inc, err) = dphi_int(l, r)?;
                if inc.abs() > max_dphi && r - l > T::epsilon() * lit::<T>(64.0) * (T::one() + r.abs()) {
                    let m = (l + r) * lit(0.5);
                    stack.push((m, r));
                    stack.push((l, m));
                } else {
                    phi_error = phi_error + err;
                    incs.push(inc);
                    grid.push(r);
                    phis.push(*phis.last().expect("nonempty") + inc);
                }
            }
        }

        // Seed at the deepest node from an exponential-tail estimate of M(a, x_start].
        let mut table = Self {
            model: model.clone(),
            nodes: Vec::with_capacity(grid.len()),
            dphi: Vec::new(),
            rule: GaussLegendre::new(RULE_ORDER),
            tol,
            entrance: None,
            speed_total: SpeedTotal::Infinite { rel_tail: T::infinity() },
            cbar: Err(Error::Numerical("not computed".into())),
            z0: T::nan(),
            identity_residual: T::nan(),
            interpolation: Interpolation::Exact,
            phi_error,
        };
        let i0 = grid
            .iter()
            .position(|x| *x == x0)
            .ok_or_else(|| Error::Numerical("reference point missing from grid".into()))?;
        let phi_ref = phis[i0];
        for p in phis.iter_mut() {
            *p = *p - phi_ref;
        }
        let (x_s, x_s1) = (grid[0], grid[1]);
        let lam = ((model.inv_half_var(x_s1) / model.inv_half_var(x_s)).ln() + phis[1] - phis[0]) / (x_s1 - x_s);
        if !(lam > T::zero()) {
            return Err(Error::SpeedNotIntegrable);
        }
        let q_s = model.inv_half_var(x_s) / lam;
        let seed = Point {
            x: x_s,
            phi: phis[0],
            q: q_s,
            gc: model.c(x_s) * q_s,
            gmu: model.mu(x_s) * q_s,
            xi: T::zero(),
            g: T::zero(),
            sc: T::zero(),
        };
        let mut nodes = vec![seed];
        let mut steps = Vec::with_capacity(grid.len());
        for i in 1..grid.len() {
            let from = Point { xi: T::zero(), g: T::zero(), sc: T::zero(), ..nodes[i - 1] };
            let mut next = table.advance(&from, grid[i], true, Some(incs[i - 1]));
            steps.push((next.xi, next.g, next.sc));
            next.phi = phis[i];
            nodes.push(next);
        }

        // Drop nodes still polluted by the seed.
        let log_m0 = nodes[0].q.ln() + nodes[0].phi;
        let need = (lit::<T>(1e3) / tol).ln();
        let first = nodes
            .iter()
            .position(|n| n.q.ln() + n.phi - log_m0 >= need && n.phi - nodes[0].phi >= need)
            .ok_or(Error::SpeedNotIntegrable)?;
        if first >= i0 {
            return Err(Error::SpeedNotIntegrable);
        }
        nodes[i0] = Point { phi: T::zero(), xi: T::zero(), g: T::zero(), sc: T::zero(), ..nodes[i0] };
        for i in i0 + 1..nodes.len() {
            let (dx, dg, ds) = steps[i - 1];
            let prev = nodes[i - 1];
            nodes[i] = Point { xi: prev.xi + dx, g: prev.g + dg, sc: prev.sc + ds, ..nodes[i] };
        }
        for i in (0..i0).rev() {
            let (dx, dg, ds) = steps[i];
            let next = nodes[i + 1];
            nodes[i] = Point { xi: next.xi - dx, g: next.g - dg, sc: next.sc - ds, ..nodes[i] };
        }
        table.nodes = nodes[first..].to_vec();
        table.dphi = table.nodes.iter().map(|n| model.drift_ratio(n.x)).collect();

        // Speed measure must vanish toward a (over the first two octaves of kept nodes).
        let n0 = table.nodes[0];
        let probe = |octaves: f64| -> Option<Point<T>> {
            let target = a + (n0.x - a) * lit(2f64.powf(octaves));
            table.nodes.iter().find(|n| n.x >= target).copied()
        };
        if let Some(p2) = probe(2.0) {
            let lm = |p: &Point<T>| (p.x - a).ln() + model.inv_half_var(p.x).ln() + p.phi;
            if lm(&n0) > lm(&p2) - lit(0.3) && p2.x < x0 {
                return Err(Error::SpeedNotIntegrable);
            }
            // Entrance when s·M is integrable at a.
            let ls = |p: &Point<T>| (p.x - a).ln() + p.q.ln();
            if ls(&p2) - ls(&n0) > lit(0.4) {
                let mu_a = finite_or(model.mu(a), model.mu(n0.x));
                if mu_a > T::zero() {
                    let c_a = finite_or(model.c(a), model.c(n0.x));
                    let d = n0.x - a;
                    let dq = model.inv_half_var(n0.x) - table.dphi[0] * n0.q;
                    let dgc = model.inv_half_var(n0.x) * model.c(n0.x) - table.dphi[0] * n0.gc;
                    table.entrance = Some(EntranceExtension {
                        a,
                        d,
                        q: EntranceExtension::quadratic(T::one() / mu_a, n0.q, dq, d),
                        gc: EntranceExtension::quadratic(c_a / mu_a, n0.gc, dgc, d),
                    });
                }
            }
        }

        table.identity_residual = table
            .nodes
            .iter()
            .fold(T::zero(), |m, n| m.max((n.gmu - T::one()).abs()));
        table.speed_total = table.compute_speed_total();
        table.cbar = table.compute_cbar();
        table.z0 = table.compute_z0();
        Ok(table)
    }

    /// Advances the state from `from` to `x` by Gauss–Legendre panel integration.
    ///
    /// `inc` overrides the panel increment of `φ`; all weights use increments
    /// relative to `from`, never absolute exponents.
    fn advance(&self, from: &Point<T>, x: T, full: bool, inc: Option<T>) -> Point<T> {
        let h = x - from.x;
        if h == T::zero() {
            return *from;
        }
        let m = &self.model;
        let rule = &self.rule;
        let rel = |u: T| rule.integrate(|v| m.drift_ratio(v), from.x, u);
        let slopes = |end: T, i_end: T| -> (T, T, T) {
            let hh = end - from.x;
            let (mut jq, mut jc, mut jm) = (T::zero(), T::zero(), T::zero());
            for (t, w) in rule.nodes().iter().zip(rule.weights()) {
                let u = from.x + hh * *t;
                let e = *w * m.inv_half_var(u) * (rel(u) - i_end).exp();
                jq = jq + e;
                jc = jc + e * m.c(u);
                jm = jm + e * m.mu(u);
            }
            let dec = (-i_end).exp();
            (dec * from.q + hh * jq, dec * from.gc + hh * jc, dec * from.gmu + hh * jm)
        };
        let delta = inc.unwrap_or_else(|| rel(x));
        let (q, gc, gmu) = slopes(x, delta);
        let (mut xi, mut g, mut sc) = (from.xi, from.g, from.sc);
        if full {
            let (mut dx, mut dg, mut ds) = (T::zero(), T::zero(), T::zero());
            for (t, w) in rule.nodes().iter().zip(rule.weights()) {
                let v = from.x + h * *t;
                let iv = rel(v);
                let (qv, gv, _) = slopes(v, iv);
                dx = dx + *w * qv;
                dg = dg + *w * gv;
                ds = ds + *w * (-(from.phi + iv)).exp();
            }
            xi = xi + h * dx;
            g = g + h * dg;
            sc = sc + h * ds;
        } else {
            xi = T::nan();
            g = T::nan();
            sc = T::nan();
        }
        Point { x, phi: from.phi + delta, q, gc, gmu, xi, g, sc }
    }

    fn locate(&self, x: T) -> Result<usize> {
        let lo = self.nodes[0].x;
        let hi = self.nodes[self.nodes.len() - 1].x;
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange { x: to_f64(x), lo: to_f64(self.domain_lo()), hi: to_f64(hi) });
        }
        Ok(self.nodes.partition_point(|n| n.x <= x).max(1) - 1)
    }

    fn point_impl(&self, x: T, full: bool) -> Result<Point<T>> {
        if let Some(ext) = &self.entrance {
            if x >= ext.a && x < self.nodes[0].x {
                return Ok(self.extension_point(ext, x));
            }
        }
        let i = self.locate(x)?;
        let n = &self.nodes[i];
        if n.x == x {
            return Ok(*n);
        }
        match self.interpolation {
            Interpolation::Exact => Ok(self.advance(n, x, full, None)),
            Interpolation::MonotoneCubic => Ok(self.interpolate(i, x)),
        }
    }

    fn extension_point(&self, ext: &EntranceExtension<T>, x: T) -> Point<T> {
        let n0 = &self.nodes[0];
        let t = x - ext.a;
        let phi = if t <= T::zero() {
            T::neg_infinity()
        } else {
            gauss_kronrod(|u| self.model.drift_ratio(u), n0.x, x, self.tol, self.tol, 2000)
                .map(|r| n0.phi + r.value)
                .unwrap_or(T::neg_infinity())
        };
        Point {
            x,
            phi,
            q: EntranceExtension::value(&ext.q, t),
            gc: EntranceExtension::value(&ext.gc, t),
            gmu: T::one(),
            xi: n0.xi - EntranceExtension::integral_to_first(&ext.q, t, ext.d),
            g: n0.g - EntranceExtension::integral_to_first(&ext.gc, t, ext.d),
            sc: if t <= T::zero() { T::neg_infinity() } else { n0.sc - (n0.x - x) * (-phi).exp() },
        }
    }

    fn interpolate(&self, i: usize, x: T) -> Point<T> {
        let (l, r) = (&self.nodes[i], &self.nodes[i + 1]);
        let m = &self.model;
        let herm = |yl: T, yr: T, dl: T, dr: T| {
            let (dl, dr) = monotone_slopes(l.x, r.x, yl, yr, dl, dr);
            hermite_eval(l.x, r.x, yl, yr, dl, dr, x)
        };
        let dq = |n: &Point<T>, dp: T| m.inv_half_var(n.x) - dp * n.q;
        let dgc = |n: &Point<T>, dp: T| m.inv_half_var(n.x) * m.c(n.x) - dp * n.gc;
        let (dpl, dpr) = (self.dphi[i], self.dphi[i + 1]);
        let t = (x - l.x) / (r.x - l.x);
        Point {
            x,
            phi: herm(l.phi, r.phi, dpl, dpr),
            q: herm(l.q, r.q, dq(l, dpl), dq(r, dpr)),
            gc: herm(l.gc, r.gc, dgc(l, dpl), dgc(r, dpr)),
            gmu: l.gmu + (r.gmu - l.gmu) * t,
            xi: herm(l.xi, r.xi, l.q, r.q),
            g: herm(l.g, r.g, l.gc, r.gc),
            sc: herm(l.sc, r.sc, l.s(), r.s()),
        }
    }

    /// Returns a copy evaluating off-node points with the given strategy.
    pub fn with_interpolation(mut self, mode: Interpolation) -> Self {
        self.interpolation = mode;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Full state (including `ξ`, `g`, `S`) at `x`.
    pub fn point(&self, x: T) -> Result<Point<T>> {
        self.point_impl(x, true)
    }

    /// State with only the derivative quantities populated (`ξ`, `g`, `S` are NaN off-node).
    pub fn slopes(&self, x: T) -> Result<Point<T>> {
        self.point_impl(x, false)
    }

    pub fn model(&self) -> &DiffusionModel<T> {
        &self.model
    }
    pub fn tol(&self) -> T {
        self.tol
    }
    pub fn nodes(&self) -> &[Point<T>] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    /// Accumulated error estimate of the adaptive `φ` increments.
    pub fn phi_error(&self) -> T {
        self.phi_error
    }
    pub fn grid(&self) -> Vec<T> {
        self.nodes.iter().map(|n| n.x).collect()
    }
    pub fn s_vals(&self) -> Vec<T> {
        self.nodes.iter().map(|n| n.s()).collect()
    }
    pub fn m_vals(&self) -> Vec<T> {
        self.nodes.iter().map(|n| self.model.inv_half_var(n.x) * n.phi.exp()).collect()
    }
    pub fn mcum(&self) -> Vec<T> {
        self.nodes.iter().map(|n| n.mcum()).collect()
    }
    pub fn xi_vals(&self) -> Vec<T> {
        self.nodes.iter().map(|n| n.xi).collect()
    }
    pub fn g_vals(&self) -> Vec<T> {
        self.nodes.iter().map(|n| n.g).collect()
    }
    pub fn dxi(&self) -> Vec<T> {
        self.nodes.iter().map(|n| n.q).collect()
    }
    pub fn dg(&self) -> Vec<T> {
        self.nodes.iter().map(|n| n.gc).collect()
    }

    /// True when the left endpoint was detected as an entrance boundary and `x = a` is admissible.
    pub fn left_is_entrance(&self) -> bool {
        self.entrance.is_some()
    }

    /// Smallest admissible abscissa.
    pub fn domain_lo(&self) -> T {
        match &self.entrance {
            Some(e) => e.a,
            None => self.nodes[0].x,
        }
    }
    pub fn x_first(&self) -> T {
        self.nodes[0].x
    }
    pub fn x_last(&self) -> T {
        self.nodes[self.nodes.len() - 1].x
    }

    /// `max |s(x) ∫_a^x μ dM - 1|` over nodes.
    pub fn identity_residual(&self) -> T {
        self.identity_residual
    }

    pub fn xi(&self, x: T) -> Result<T> {
        Ok(self.point(x)?.xi)
    }
    pub fn g(&self, x: T) -> Result<T> {
        Ok(self.point(x)?.g)
    }
    pub fn xi_prime(&self, x: T) -> Result<T> {
        Ok(self.slopes(x)?.q)
    }
    pub fn g_prime(&self, x: T) -> Result<T> {
        Ok(self.slopes(x)?.gc)
    }
    pub fn scale(&self, x: T) -> Result<T> {
        Ok(self.slopes(x)?.s())
    }
    pub fn speed(&self, x: T) -> Result<T> {
        Ok(self.model.inv_half_var(x) * self.slopes(x)?.phi.exp())
    }
    pub fn speed_cum(&self, x: T) -> Result<T> {
        Ok(self.slopes(x)?.mcum())
    }

    /// `Bf(w, y) = f(y) - f(w)` for `w < y`.
    pub fn b_op<F: Fn(T) -> Result<T>>(&self, f: F, w: T, y: T) -> Result<T> {
        check_pair(w, y)?;
        Ok(f(y)? - f(w)?)
    }
    pub fn b_xi(&self, w: T, y: T) -> Result<T> {
        self.b_op(|x| self.xi(x), w, y)
    }
    pub fn b_g(&self, w: T, y: T) -> Result<T> {
        self.b_op(|x| self.g(x), w, y)
    }
    /// `B𝔦(w, y) = y - w`.
    pub fn b_id(&self, w: T, y: T) -> Result<T> {
        self.b_op(Ok, w, y)
    }

    /// Long-run average supply rate `(y - w) / Bξ(w, y)`.
    pub fn supply_rate(&self, w: T, y: T) -> Result<T> {
        Ok((y - w) / self.b_xi(w, y)?)
    }

    pub fn z0(&self) -> T {
        self.z0
    }

    /// `r = γc + pμ`.
    pub fn reward_rate(&self, params: &EconomicParams<T>, x: T) -> T {
        params.reward_rate(&self.model, x)
    }

    /// Reflection value `h = (γ g' + p) / ξ'`.
    pub fn h(&self, params: &EconomicParams<T>, x: T) -> Result<T> {
        let pt = self.slopes(x)?;
        Ok((params.gamma * pt.gc + params.p) / pt.q)
    }

    /// `h = ∫ r dM / M[a, x]`, using the tabulated `s ∫ μ dM` instead of the identity.
    pub fn h_integral_form(&self, params: &EconomicParams<T>, x: T) -> Result<T> {
        let pt = self.slopes(x)?;
        Ok((params.gamma * pt.gc + params.p * pt.gmu) / pt.q)
    }

    /// `(h_c, h_μ) = (g'/ξ', 1/ξ')`.
    pub fn h_components(&self, x: T) -> Result<(T, T)> {
        let pt = self.slopes(x)?;
        Ok((pt.gc / pt.q, T::one() / pt.q))
    }

    pub fn speed_total(&self) -> SpeedTotal<T> {
        self.speed_total
    }

    /// Effective right-end reward level: `c(b)` when `M[a,b]` is infinite, else `⟨c, π⟩`.
    pub fn cbar_b(&self) -> Result<T> {
        self.cbar.clone()
    }

    fn compute_speed_total(&self) -> SpeedTotal<T> {
        let last = self.nodes[self.nodes.len() - 1];
        let m = &self.model;
        let x = last.x;
        let mtot = last.mcum();
        let h = (x - self.nodes[self.nodes.len() - 2].x) * lit(0.5);
        let dlog_omega = (m.inv_half_var(x).ln() - m.inv_half_var(x - h).ln()) / h;
        let lam = -(self.dphi[self.dphi.len() - 1] + dlog_omega);
        let m_end = m.inv_half_var(x) * last.phi.exp();
        if !(lam > T::zero()) {
            return SpeedTotal::Infinite { rel_tail: T::infinity() };
        }
        let tail = m_end / lam;
        let rel = tail / mtot;
        if rel < lit(1e-6) {
            SpeedTotal::Finite { value: mtot + tail, c_integral: last.gc * last.phi.exp() + m.c(x) * tail, rel_tail: rel }
        } else if rel > lit(1e-2) {
            SpeedTotal::Infinite { rel_tail: rel }
        } else {
            SpeedTotal::Ambiguous { rel_tail: rel }
        }
    }

    fn compute_cbar(&self) -> std::result::Result<T, Error> {
        match self.speed_total {
            SpeedTotal::Finite { value, c_integral, .. } => Ok(c_integral / value),
            SpeedTotal::Ambiguous { rel_tail } => Err(Error::AmbiguousSpeedTotal { tail: to_f64(rel_tail) }),
            SpeedTotal::Infinite { .. } => {
                let m = &self.model;
                if m.b().is_finite() {
                    return Ok(finite_or(m.c(m.b()), m.c(m.b_cut())));
                }
                let mut v = m.c(m.b_cut());
                let mut x = m.b_cut();
                for _ in 0..12 {
                    x = x * lit(10.0);
                    let c = m.c(x);
                    if !c.is_finite() {
                        break;
                    }
                    v = c;
                }
                Ok(v)
            }
        }
    }

    fn compute_z0(&self) -> T {
        let mut best = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if T::one() / n.q > T::one() / self.nodes[best].q {
                best = i;
            }
        }
        let lo = self.nodes[best.saturating_sub(1)].x;
        let hi = self.nodes[(best + 1).min(self.nodes.len() - 1)].x;
        let f = |x: T| self.slopes(x).map(|p| T::one() / p.q).unwrap_or(T::neg_infinity());
        let (_, v) = golden_max(f, lo, hi, (hi - lo) * lit(1e-6));
        let mut z = v.max(T::one() / self.nodes[best].q);
        if best == 0 {
            if let Some(e) = &self.entrance {
                z = z.max(T::one() / e.q[0]);
            }
        }
        z
    }

    /// Gauss–Legendre abscissae and weights following the table panels over `[lo, hi]`.
    ///
    /// Only the tabulated range is covered; callers add any analytic left tail.
    pub fn quadrature_points(&self, lo: T, hi: T) -> Result<Vec<(T, Point<T>)>> {
        let lo = lo.max(self.nodes[0].x);
        if !(hi > lo) {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let i0 = self.locate(lo)?;
        let mut i = i0;
        while i + 1 < self.nodes.len() && self.nodes[i].x < hi {
            let l = self.nodes[i].x.max(lo);
            let r = self.nodes[i + 1].x.min(hi);
            if r > l {
                for (t, w) in self.rule.nodes().iter().zip(self.rule.weights()) {
                    let x = l + (r - l) * *t;
                    out.push((*w * (r - l), self.advance(&self.nodes[i], x, true, None)));
                }
            }
            i += 1;
        }
        Ok(out)
    }

    /// `(A f)(x)` by fourth-order central differences with a step scaled to the local log-scale rate.
    pub fn generator<F: Fn(T) -> Result<T>>(&self, f: F, x: T) -> Result<T> {
        let m = &self.model;
        let rate = m.drift_ratio(x).abs().max(T::one());
        let h = lit::<T>(2e-3) * (x - m.a()).min(T::one() / rate);
        let (fm2, fm1, f0, fp1, fp2) = (f(x - h - h)?, f(x - h)?, f(x)?, f(x + h)?, f(x + h + h)?);
        let twelve = lit::<T>(12.0);
        let eight = lit::<T>(8.0);
        let d1 = (fm2 - fp2 + eight * (fp1 - fm1)) / (twelve * h);
        let d2 = (-fm2 - fp2 + lit::<T>(16.0) * (fp1 + fm1) - lit::<T>(30.0) * f0) / (twelve * h * h);
        let sig = m.sigma(x);
        Ok(lit::<T>(0.5) * sig * sig * d2 + m.mu(x) * d1)
    }

    /// Nodes between the `1e-3` and `1 - 1e-3` stationary quantiles.
    pub fn interior_nodes(&self) -> Vec<T> {
        let q = self.quantile_mesh(2, lit(1e-3), T::one() - lit(1e-3));
        let (lo, hi) = (q[0].max(self.nodes[2].x), q[1].min(self.nodes[self.nodes.len() - 3].x));
        self.nodes.iter().map(|n| n.x).filter(|x| *x >= lo && *x <= hi).collect()
    }

    /// Abscissae at stationary quantile levels spread uniformly over `[lo_q, hi_q]`.
    ///
    /// Falls back to an even spread over table nodes when `M[a, b]` is not finite.
    pub fn quantile_mesh(&self, n: usize, lo_q: T, hi_q: T) -> Vec<T> {
        let n = n.max(2);
        let level = |i: usize| lo_q + (hi_q - lo_q) * lit(i as f64 / (n - 1) as f64);
        match self.speed_total {
            SpeedTotal::Finite { value, .. } => {
                let cum: Vec<T> = self.nodes.iter().map(|p| p.mcum() / value).collect();
                (0..n)
                    .map(|i| {
                        let u = level(i);
                        let j = cum.partition_point(|c| *c < u).clamp(1, cum.len() - 1);
                        let (c0, c1) = (cum[j - 1], cum[j]);
                        let (x0, x1) = (self.nodes[j - 1].x, self.nodes[j].x);
                        let t = if c1 > c0 { ((u - c0) / (c1 - c0)).max(T::zero()).min(T::one()) } else { T::zero() };
                        x0 + (x1 - x0) * t
                    })
                    .collect()
            }
            _ => {
                let last = (self.nodes.len() - 1) as f64;
                (0..n)
                    .map(|i| {
                        let f = to_f64(level(i)).clamp(0.0, 1.0) * last;
                        self.nodes[f.round() as usize].x
                    })
                    .collect()
            }
        }
    }

    /// Maximizer `ŷ` of `h` with a sampled unimodality check over the nodes.
    pub fn h_peak(&self, params: &EconomicParams<T>) -> Result<HPeak<T>> {
        let hs: Vec<T> = self.nodes.iter().map(|n| (params.gamma * n.gc + params.p) / n.q).collect();
        let mut imax = 0;
        for (i, h) in hs.iter().enumerate() {
            if *h > hs[imax] {
                imax = i;
            }
        }
        let slack = |h: T| lit::<T>(1e-10) * (T::one() + h.abs());
        let mut violations = Vec::new();
        for i in 0..hs.len() - 1 {
            let d = hs[i + 1] - hs[i];
            if (i < imax && d < -slack(hs[i])) || (i >= imax && d > slack(hs[i])) {
                violations.push(self.nodes[i].x);
            }
        }
        if !violations.is_empty() {
            return Err(Error::NotUnimodal(format!(
                "h changes monotonicity away from its maximum near x = {} (first offender {}); \
                 the drift must increase then drift and reward be concave",
                to_f64(self.nodes[imax].x),
                to_f64(violations[0])
            )));
        }
        if imax + 1 >= hs.len() {
            return Err(Error::NotUnimodal("h is still increasing at the right cut; increase b_cut".into()));
        }
        let lo = self.nodes[imax.saturating_sub(1)].x;
        let hi = self.nodes[imax + 1].x;
        let sign = |x: T| -> T {
            self.slopes(x)
                .map(|p| params.reward_rate(&self.model, x) - (params.gamma * p.gc + params.p) / p.q)
                .unwrap_or(T::nan())
        };
        let y_hat = if imax == 0 {
            self.nodes[0].x
        } else {
            match crate::numerics::brent(sign, lo, hi, T::epsilon() * lit(8.0) * hi.abs(), 200) {
                Ok(x) => x,
                Err(_) => golden_max(|x| self.h(params, x).unwrap_or(T::neg_infinity()), lo, hi, (hi - lo) * lit(1e-10)).0,
            }
        };
        let h_hat = self.h(params, y_hat)?.max(hs[imax]);
        Ok(HPeak { y_hat, h_hat, node_index: imax, h_left: self.h(params, self.domain_lo())?, h_right: hs[hs.len() - 1] })
    }

    /// Empirical boundary limits of supply rate, `Bg/Bξ` and `1/ξ'`.
    pub fn boundary_diagnostics(&self, params: &EconomicParams<T>) -> Result<BoundaryDiagnostics<T>> {
        let a = self.model.a();
        let lo = self.domain_lo().max(self.x_first());
        let hi = self.x_last();
        let x0 = self.model.x0();
        let mut left = Vec::new();
        for k in 0..8 {
            let f = lit::<T>(10f64.powi(-k));
            let w = lo + (x0 - lo) * f * lit(0.25);
            let y = lo + (x0 - lo) * f * lit(0.5);
            left.push(BoundaryProbe { w, y, ratio: self.b_g(w, y)? / self.b_xi(w, y)?, supply: self.supply_rate(w, y)? });
        }
        let mut right = Vec::new();
        for k in 1..=8 {
            let y = x0 + (hi - x0) * lit(k as f64 / 8.0);
            right.push(BoundaryProbe { w: x0, y, ratio: self.b_g(x0, y)? / self.b_xi(x0, y)?, supply: self.supply_rate(x0, y)? });
        }
        let inv_q_left = T::one() / self.slopes(lo)?.q;
        let inv_q_right = T::one() / self.slopes(hi)?.q;
        let cbar = self.cbar_b()?;
        let c_a = finite_or(self.model.c(a), self.model.c(lo));
        let mu_a = finite_or(self.model.mu(a), self.model.mu(lo));
        let h_right = self.h(params, hi)?;
        Ok(BoundaryDiagnostics {
            c_a,
            cbar_b: cbar,
            mu_a,
            left_ratio_limit: left[left.len() - 1].ratio,
            right_ratio_limit: right[right.len() - 1].ratio,
            right_supply_limit: right[right.len() - 1].supply,
            inv_xi_prime_left: inv_q_left,
            inv_xi_prime_right: inv_q_right,
            h_right,
            gamma_cbar: params.gamma * cbar,
            left,
            right,
        })
    }

    /// Writes `x, s, m, M, xi, g, dxi, dg, h` per node.
    pub fn write_csv<W: Write>(&self, mut out: W, params: &EconomicParams<T>) -> std::io::Result<()> {
        writeln!(out, "x,s,m,M,xi,g,dxi,dg,h")?;
        for n in &self.nodes {
            let m = self.model.inv_half_var(n.x) * n.phi.exp();
            let h = (params.gamma * n.gc + params.p) / n.q;
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                to_f64(n.x),
                to_f64(n.s()),
                to_f64(m),
                to_f64(n.mcum()),
                to_f64(n.xi),
                to_f64(n.g),
                to_f64(n.q),
                to_f64(n.gc),
                to_f64(h)
            )?;
        }
        Ok(())
    }
}

/// Location and value of the maximum of `h`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HPeak<T> {
    pub y_hat: T,
    pub h_hat: T,
    pub node_index: usize,
    /// `h` at the smallest admissible abscissa.
    pub h_left: T,
    /// `h` at the right cut.
    pub h_right: T,
}

/// One `(w, y)` probe of [`BoundaryDiagnostics`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryProbe<T> {
    pub w: T,
    pub y: T,
    /// `Bg/Bξ`.
    pub ratio: T,
    pub supply: T,
}

/// Empirical boundary limits next to their theoretical targets.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryDiagnostics<T> {
    pub c_a: T,
    pub cbar_b: T,
    pub mu_a: T,
    pub left_ratio_limit: T,
    pub right_ratio_limit: T,
    pub right_supply_limit: T,
    pub inv_xi_prime_left: T,
    pub inv_xi_prime_right: T,
    pub h_right: T,
    pub gamma_cbar: T,
    pub left: Vec<BoundaryProbe<T>>,
    pub right: Vec<BoundaryProbe<T>>,
}

pub(crate) fn check_pair<T: Real>(w: T, y: T) -> Result<()> {
    if !(w < y) {
        return Err(Error::Precondition(format!("need w < y, got w = {}, y = {}", to_f64(w), to_f64(y))));
    }
    Ok(())
}

fn finite_or<T: Real>(v: T, fallback: T) -> T {
    if v.is_finite() {
        v
    } else {
        fallback
    }
}

