//! Optimal `(w, y)` impulse policies.
//!
//! The pair maximizing `F(w, y) = (p(y-w) - K + γ Bg) / Bξ` is found through
//! the level sets of `h`: for a level `λ` the two roots `w(λ) < ŷ < y(λ)` of
//! `h = λ` maximize `p B𝔦 + γ Bg - λ Bξ - K`, whose unique zero in `λ` is `F*`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::numerics::brent;
use crate::potentials::{check_pair, HPeak, Point, PotentialTable};
use crate::model::EconomicParams;
use crate::{lit, to_f64, Error, Real, Result};

/// Long-run average reward of the `(w, y)` policy.
pub fn objective<T: Real>(table: &PotentialTable<T>, params: &EconomicParams<T>, w: T, y: T) -> Result<T> {
    check_pair(w, y)?;
    let (pw, py) = (table.point(w)?, table.point(y)?);
    Ok(objective_from_points(params, &pw, &py))
}

pub(crate) fn objective_from_points<T: Real>(params: &EconomicParams<T>, pw: &Point<T>, py: &Point<T>) -> T {
    (params.p * (py.x - pw.x) - params.k + params.gamma * (py.g - pw.g)) / (py.xi - pw.xi)
}

/// Whether the optimal reset level sits at an entrance boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    Interior,
    WAtA,
}

/// A pair beating the do-nothing value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Witness<T> {
    pub w: T,
    pub y: T,
    pub value: T,
}

/// Brute-force comparison on a quantile mesh.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridCheck<T> {
    pub mesh: usize,
    pub best: Witness<T>,
    /// `max F - F*` over the mesh (nonpositive when the solve is optimal).
    pub excess: T,
}

/// Optimal impulse policy and its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ImpulseSolution<T> {
    pub w_star: T,
    pub y_star: T,
    pub f_star: T,
    pub params: EconomicParams<T>,
    /// `(|h(w*) - F*|, |h(y*) - F*|)`; the first entry is `h(a) - F*` in the boundary case.
    pub lambda_residuals: (T, T),
    pub boundary_case: BoundaryCase,
    pub cond_4_1_witness: Witness<T>,
    pub supply_rate_star: T,
    pub intervention_rate: T,
    pub cbar_b: T,
    pub do_nothing_value: T,
    /// `p B𝔦 + γ Bg - F* Bξ - K` at the optimum.
    pub balance_residual: T,
    pub b_xi: T,
    pub b_g: T,
    pub y_hat: T,
    pub h_y_hat: T,
    pub grid_check: GridCheck<T>,
    pub iterations: usize,
}

/// Either an optimal impulse policy or the verdict that never intervening is optimal.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ImpulseOutcome<T> {
    Intervene(ImpulseSolution<T>),
    DoNothing { value: T, best_mesh_value: T },
}

impl<T: Real> ImpulseOutcome<T> {
    pub fn solution(&self) -> Option<&ImpulseSolution<T>> {
        match self {
            ImpulseOutcome::Intervene(s) => Some(s),
            ImpulseOutcome::DoNothing { .. } => None,
        }
    }

    pub fn into_solution(self) -> Result<ImpulseSolution<T>> {
        match self {
            ImpulseOutcome::Intervene(s) => Ok(s),
            ImpulseOutcome::DoNothing { value, .. } => Err(Error::Condition(format!(
                "no (w, y) policy beats the do-nothing value {}",
                to_f64(value)
            ))),
        }
    }

    pub fn value(&self) -> T {
        match self {
            ImpulseOutcome::Intervene(s) => s.f_star,
            ImpulseOutcome::DoNothing { value, .. } => *value,
        }
    }
}

/// Solver knobs.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<T> {
    /// Relative tolerance on the level `λ`.
    pub tol: T,
    /// Side of the quantile mesh used for the pre-scan and the brute-force check.
    pub mesh: usize,
    /// Fail when a mesh value beats `F*` by more than this many `tol·|F*|`.
    pub grid_slack: T,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self { tol: lit(1e-8), mesh: 100, grid_slack: lit(10.0) }
    }
}

/// Solves with default options and the given `λ` tolerance.
pub fn solve<T: Real>(table: &PotentialTable<T>, params: &EconomicParams<T>, tol: T) -> Result<ImpulseOutcome<T>> {
    solve_with(table, params, &SolveOptions { tol, ..SolveOptions::default() })
}

/// Points of the pre-scan mesh, including `a` on entrance boundaries.
pub(crate) fn mesh_points<T: Real>(table: &PotentialTable<T>, n: usize) -> Result<Vec<Point<T>>> {
    let mut xs = table.quantile_mesh(n, lit(1e-4), T::one() - lit(1e-4));
    if table.left_is_entrance() {
        xs.insert(0, table.domain_lo());
    }
    xs.dedup();
    xs.iter().map(|x| table.point(*x)).collect()
}

fn best_on_mesh<T: Real>(params: &EconomicParams<T>, pts: &[Point<T>]) -> Witness<T> {
    let mut best = Witness { w: pts[0].x, y: pts[1].x, value: T::neg_infinity() };
    for (i, pw) in pts.iter().enumerate() {
        for py in &pts[i + 1..] {
            let f = objective_from_points(params, pw, py);
            if f > best.value {
                best = Witness { w: pw.x, y: py.x, value: f };
            }
        }
    }
    best
}

/// Roots of `h = λ` on each side of `ŷ`; the left root clamps to `a` on entrance boundaries.
pub(crate) fn level_roots<T: Real>(
    table: &PotentialTable<T>,
    params: &EconomicParams<T>,
    peak: &HPeak<T>,
    lambda: T,
) -> Result<(T, T, BoundaryCase)> {
    let nodes = table.nodes();
    let hn = |i: usize| (params.gamma * nodes[i].gc + params.p) / nodes[i].q;
    let f = |x: T| table.h(params, x).map(|h| h - lambda).unwrap_or(T::nan());
    let xtol = |x: T| T::epsilon() * lit::<T>(16.0) * (T::one() + x.abs());

    // Right root: h decreases on (ŷ, b).
    let last = nodes.len() - 1;
    if hn(last) >= lambda {
        return Err(Error::Numerical(format!(
            "h stays above {} up to the right cut; increase b_cut",
            to_f64(lambda)
        )));
    }
    let mut lo = peak.node_index + 1;
    let mut hi = last;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if hn(mid) >= lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let yl = if hn(lo) >= lambda { nodes[lo].x } else { peak.y_hat };
    let y = brent(f, yl.max(peak.y_hat), nodes[hi].x, xtol(nodes[hi].x), 300)?;

    // Left root: h increases on (a, ŷ).
    if peak.h_left >= lambda {
        if table.left_is_entrance() {
            return Ok((table.domain_lo(), y, BoundaryCase::WAtA));
        }
        return Err(Error::Numerical(format!(
            "h does not fall below {} at the left end of the table",
            to_f64(lambda)
        )));
    }
    let (mut lo, mut hi) = (0, peak.node_index);
    let w_lo = if hn(0) >= lambda {
        table.domain_lo()
    } else {
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if hn(mid) < lambda {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        nodes[lo].x
    };
    let w_hi = if hn(hi) >= lambda { nodes[hi].x } else { peak.y_hat };
    let w = brent(f, w_lo, w_hi.min(peak.y_hat), xtol(w_hi), 300)?;
    Ok((w, y, BoundaryCase::Interior))
}

/// Maximizes `F` over `a ≤ w < y < b`.
///
/// Returns [`ImpulseOutcome::DoNothing`] when no mesh pair beats `γ c̄(b)`.
pub fn solve_with<T: Real>(
    table: &PotentialTable<T>,
    params: &EconomicParams<T>,
    opts: &SolveOptions<T>,
) -> Result<ImpulseOutcome<T>> {
    if !(params.k > T::zero()) {
        return Err(Error::Precondition(
            "K must be positive for the impulse problem; use the singular solver for K = 0".into(),
        ));
    }
    let cbar = table.cbar_b()?;
    let floor = params.gamma * cbar;
    let pts = mesh_points(table, opts.mesh)?;
    let witness = best_on_mesh(params, &pts);
    if !(witness.value > floor) {
        return Ok(ImpulseOutcome::DoNothing { value: floor, best_mesh_value: witness.value });
    }
    let peak = table.h_peak(params)?;

    let mut iterations = 0usize;
    let mut psi = |lambda: T| -> T {
        iterations += 1;
        let r = level_roots(table, params, &peak, lambda).and_then(|(w, y, _)| {
            let (pw, py) = (table.point(w)?, table.point(y)?);
            Ok(params.p * (y - w) + params.gamma * (py.g - pw.g) - lambda * (py.xi - pw.xi) - params.k)
        });
        r.unwrap_or(T::nan())
    };
    let lam_lo = witness.value.max(floor);
    let lam_hi = peak.h_hat;
    let xtol = opts.tol * lam_hi.abs().max(T::epsilon());
    let lambda = brent(&mut psi, lam_lo, lam_hi, xtol, 300)?;
    let (w, y, case) = level_roots(table, params, &peak, lambda)?;
    let (pw, py) = (table.point(w)?, table.point(y)?);
    let f_star = objective_from_points(params, &pw, &py);
    let b_xi = py.xi - pw.xi;
    let b_g = py.g - pw.g;
    let h_w = table.h(params, w)?;
    let h_y = table.h(params, y)?;
    let lambda_residuals = match case {
        BoundaryCase::Interior => ((h_w - f_star).abs(), (h_y - f_star).abs()),
        BoundaryCase::WAtA => (h_w - f_star, (h_y - f_star).abs()),
    };
    let balance_residual = params.p * (y - w) + params.gamma * b_g - f_star * b_xi - params.k;

    let excess = witness.value - f_star;
    if excess > opts.grid_slack * opts.tol * f_star.abs().max(T::one()) {
        return Err(Error::Numerical(format!(
            "mesh pair ({}, {}) beats the level-set optimum by {:e}",
            to_f64(witness.w),
            to_f64(witness.y),
            to_f64(excess)
        )));
    }
    Ok(ImpulseOutcome::Intervene(ImpulseSolution {
        w_star: w,
        y_star: y,
        f_star,
        params: *params,
        lambda_residuals,
        boundary_case: case,
        cond_4_1_witness: witness,
        supply_rate_star: (y - w) / b_xi,
        intervention_rate: T::one() / b_xi,
        cbar_b: cbar,
        do_nothing_value: floor,
        balance_residual,
        b_xi,
        b_g,
        y_hat: peak.y_hat,
        h_y_hat: peak.h_hat,
        grid_check: GridCheck { mesh: pts.len(), best: witness, excess },
        iterations,
    }))
}

/// Brute-force maximum of `F` over an `n × n` stationary-quantile mesh.
pub fn grid_search<T: Real>(table: &PotentialTable<T>, params: &EconomicParams<T>, n: usize) -> Result<Witness<T>> {
    let pts = mesh_points(table, n)?;
    Ok(best_on_mesh(params, &pts))
}

/// Impulse reward potential `G = F* ξ - γ g`.
pub fn potential_g<T: Real>(table: &PotentialTable<T>, sol: &ImpulseSolution<T>, x: T) -> Result<T> {
    let p = table.point(x)?;
    Ok(sol.f_star * p.xi - sol.params.gamma * p.g)
}

/// `G` continued linearly with slope `p` above `y*`.
pub fn g_tilde<T: Real>(table: &PotentialTable<T>, sol: &ImpulseSolution<T>, x: T) -> Result<T> {
    if x >= sol.y_star {
        let gw = potential_g(table, sol, sol.w_star)?;
        Ok(sol.params.p * (x - sol.w_star) - sol.params.k + gw)
    } else {
        potential_g(table, sol, x)
    }
}

/// Worst offenders of one QVI component.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary<T> {
    pub max_abs: T,
    pub at: T,
    pub count: usize,
    pub tolerance: T,
    pub pass: bool,
}

/// Residuals of the impulse QVI at a solution.
#[derive(Debug, Clone, Serialize)]
pub struct QviReport<T> {
    /// `|AG + γc - F*|` on interior nodes by central differences.
    pub generator: ResidualSummary<T>,
    /// Largest `G(w) + p(y-w) - K - G(y)` over random pairs.
    pub intervention_max: T,
    pub intervention_at: (T, T),
    pub intervention_pairs: usize,
    pub intervention_pass: bool,
    /// `|G(w*) + p(y*-w*) - K - G(y*)|`.
    pub contact_residual: T,
    pub contact_pass: bool,
    /// `max (ℳG̃ - G̃)` below and above `y*`.
    pub operator_below: T,
    pub operator_above_abs: T,
    pub operator_pass: bool,
    /// `G(w*) + p(y*-δ-w*) - K - G(y*-δ)` for a small `δ`.
    pub perturbed_contact: T,
    pub pass: bool,
}

/// Options for [`qvi_check`].
#[derive(Debug, Clone, Copy)]
pub struct QviOptions<T> {
    pub pairs: usize,
    pub seed: u64,
    pub generator_tol: T,
    pub tol: T,
    pub contact_tol: T,
}

impl<T: Real> Default for QviOptions<T> {
    fn default() -> Self {
        Self { pairs: 10_000, seed: 7, generator_tol: lit(1e-4), tol: lit(1e-9), contact_tol: lit(1e-8) }
    }
}

/// Checks the quasi-variational inequalities satisfied by `G` and `G̃`.
pub fn qvi_check<T: Real>(table: &PotentialTable<T>, sol: &ImpulseSolution<T>, sample_pairs: usize) -> Result<QviReport<T>> {
    qvi_check_with(table, sol, &QviOptions { pairs: sample_pairs, ..QviOptions::default() })
}

pub fn qvi_check_with<T: Real>(table: &PotentialTable<T>, sol: &ImpulseSolution<T>, opts: &QviOptions<T>) -> Result<QviReport<T>> {
    let model = table.model();
    let prm = &sol.params;
    let g = |x: T| potential_g(table, sol, x);

    // (i) generator residual on interior nodes.
    let mut gen = ResidualSummary { max_abs: T::zero(), at: T::nan(), count: 0, tolerance: opts.generator_tol, pass: true };
    for x in table.interior_nodes() {
        let r = (table.generator(g, x)? + prm.gamma * model.c(x) - sol.f_star).abs();
        gen.count += 1;
        if r > gen.max_abs {
            gen.max_abs = r;
            gen.at = x;
        }
    }
    gen.pass = gen.max_abs <= opts.generator_tol;

    // (ii) intervention inequality on random pairs.
    let mesh = table.quantile_mesh(2, lit(1e-4), T::one() - lit(1e-4));
    let (lo, hi) = (if table.left_is_entrance() { table.domain_lo() } else { mesh[0] }, mesh[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = T::neg_infinity();
    let mut worst_at = (T::nan(), T::nan());
    for _ in 0..opts.pairs {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let (x1, x2) = (lo + (hi - lo) * lit(u), lo + (hi - lo) * lit(v));
        let (w, y) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        if !(w < y) {
            continue;
        }
        let val = g(w)? + prm.p * (y - w) - prm.k - g(y)?;
        if val > worst {
            worst = val;
            worst_at = (w, y);
        }
    }
    let intervention_pass = worst <= opts.tol * (T::one() + sol.f_star.abs());

    // (iii) contact at the optimum.
    let contact = (g(sol.w_star)? + prm.p * (sol.y_star - sol.w_star) - prm.k - g(sol.y_star)?).abs();
    let contact_pass = contact <= opts.contact_tol;
    let delta = lit::<T>(1e-2) * (sol.y_star - sol.w_star);
    let perturbed = g(sol.w_star)? + prm.p * (sol.y_star - delta - sol.w_star) - prm.k - g(sol.y_star - delta)?;

    // (iv) intervention operator on G̃ via a running maximum of G̃(w) - p w.
    let mut xs = table.quantile_mesh(2000, lit(1e-4), T::one() - lit(1e-4));
    if table.left_is_entrance() {
        xs.insert(0, table.domain_lo());
    }
    xs.push(sol.w_star);
    xs.push(sol.y_star);
    let top = xs.iter().fold(sol.y_star, |m, x| m.max(*x));
    xs.push(top + (top - sol.y_star).max(T::one()));
    xs.sort_by(|u, v| u.partial_cmp(v).expect("finite mesh"));
    xs.dedup();
    let mut run = T::neg_infinity();
    let (mut below, mut above) = (T::neg_infinity(), T::zero());
    for x in &xs {
        let gt = g_tilde(table, sol, *x)?;
        run = run.max(gt - prm.p * *x);
        let gap = run + prm.p * *x - prm.k - gt;
        if *x < sol.y_star {
            below = below.max(gap);
        } else {
            above = above.max(gap.abs());
        }
    }
    let op_tol = opts.contact_tol * (T::one() + sol.f_star.abs());
    let operator_pass = below <= op_tol && above <= op_tol;
    let pass = gen.pass && intervention_pass && contact_pass && operator_pass && perturbed < T::zero();
    Ok(QviReport {
        generator: gen,
        intervention_max: worst,
        intervention_at: worst_at,
        intervention_pairs: opts.pairs,
        intervention_pass,
        contact_residual: contact,
        contact_pass,
        operator_below: below,
        operator_above_abs: above,
        operator_pass,
        perturbed_contact: perturbed,
        pass,
    })
}

/// Invariant density of the `(w, y)` policy tabulated on the table nodes below `y`.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryDensity<T> {
    pub w: T,
    pub y: T,
    /// `1 / Bξ(w, y)`.
    pub rho: T,
    pub grid: Vec<T>,
    pub density: Vec<T>,
    #[serde(skip)]
    s_w: T,
    #[serde(skip)]
    s_y: T,
    #[serde(skip)]
    xi_w: T,
}

/// Invariant density of the `(w, y)` policy.
pub fn stationary_density<T: Real>(table: &PotentialTable<T>, w: T, y: T) -> Result<StationaryDensity<T>> {
    check_pair(w, y)?;
    let (pw, py) = (table.point(w)?, table.point(y)?);
    let rho = T::one() / (py.xi - pw.xi);
    let mut grid = Vec::new();
    let mut density = Vec::new();
    let model = table.model();
    for n in table.nodes() {
        if n.x > y {
            break;
        }
        let m = model.inv_half_var(n.x) * n.phi.exp();
        let tail = if n.x <= w { py.sc - pw.sc } else { py.sc - n.sc };
        grid.push(n.x);
        density.push(rho * m * tail);
    }
    Ok(StationaryDensity { w, y, rho, grid, density, s_w: pw.sc, s_y: py.sc, xi_w: pw.xi })
}

impl<T: Real> StationaryDensity<T> {
    /// `ν(x)`.
    pub fn at(&self, table: &PotentialTable<T>, x: T) -> Result<T> {
        if x > self.y {
            return Ok(T::zero());
        }
        let p = table.point(x)?;
        let m = table.model().inv_half_var(x) * p.phi.exp();
        let tail = if x <= self.w { self.s_y - self.s_w } else { self.s_y - p.sc };
        Ok(self.rho * m * tail)
    }

    /// `ν((a, x])` in closed form.
    pub fn cdf(&self, table: &PotentialTable<T>, x: T) -> Result<T> {
        if x >= self.y {
            return Ok(T::one());
        }
        let p = table.point(x)?;
        if x <= self.w {
            Ok(self.rho * (self.s_y - self.s_w) * p.mcum())
        } else {
            Ok(self.rho * (p.mcum() * (self.s_y - p.sc) + p.xi - self.xi_w))
        }
    }

    /// `∫ f dν` by panel quadrature, with the sliver below the first node taken at its left value.
    pub fn integrate<F: Fn(&Point<T>) -> T>(&self, table: &PotentialTable<T>, f: F) -> Result<T> {
        let model = table.model();
        let dens = |p: &Point<T>| {
            let m = model.inv_half_var(p.x) * p.phi.exp();
            let tail = if p.x <= self.w { self.s_y - self.s_w } else { self.s_y - p.sc };
            self.rho * m * tail
        };
        let lo = table.x_first();
        let mut acc = T::zero();
        for (wt, p) in table
            .quadrature_points(lo, self.w)?
            .into_iter()
            .chain(table.quadrature_points(self.w.max(lo), self.y)?)
        {
            acc = acc + wt * f(&p) * dens(&p);
        }
        let first = table.nodes()[0];
        if self.w > first.x {
            acc = acc + f(&first) * self.rho * (self.s_y - self.s_w) * first.mcum();
        } else {
            acc = acc + self.cdf(table, first.x.max(self.w))? * f(&first);
        }
        Ok(acc)
    }

    pub fn mass(&self, table: &PotentialTable<T>) -> Result<T> {
        self.integrate(table, |_| T::one())
    }

    /// `∫ (r - Kϱ) dν`, which equals `F(w, y)`.
    pub fn profit(&self, table: &PotentialTable<T>, params: &EconomicParams<T>) -> Result<T> {
        let model = table.model();
        self.integrate(table, |p| params.reward_rate(model, p.x) - params.k * self.rho)
    }

    /// `∫ μ dν`, which equals the supply rate.
    pub fn mean_drift(&self, table: &PotentialTable<T>) -> Result<T> {
        let model = table.model();
        self.integrate(table, |p| model.mu(p.x))
    }
}

/// Centering constant `⟨G̃, ν*⟩` of the relative value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CellProblem<T> {
    pub mean_g_tilde: T,
    pub f_star: T,
}

/// Sets up the relative-value (cell) problem; requires an entrance left boundary.
pub fn cell_problem<T: Real>(table: &PotentialTable<T>, sol: &ImpulseSolution<T>) -> Result<CellProblem<T>> {
    if !table.left_is_entrance() {
        return Err(Error::Unsupported(
            "relative value requires an entrance left boundary; the left boundary is natural".into(),
        ));
    }
    let nu = stationary_density(table, sol.w_star, sol.y_star)?;
    let mean = nu.integrate(table, |p| sol.f_star * p.xi - sol.params.gamma * p.g)?;
    Ok(CellProblem { mean_g_tilde: mean, f_star: sol.f_star })
}

impl<T: Real> CellProblem<T> {
    pub fn value(&self, table: &PotentialTable<T>, sol: &ImpulseSolution<T>, x: T) -> Result<T> {
        Ok(g_tilde(table, sol, x)? - self.mean_g_tilde)
    }
}

/// Relative value `V(x) = G̃(x) - ⟨G̃, ν*⟩`.
pub fn cell_value<T: Real>(table: &PotentialTable<T>, sol: &ImpulseSolution<T>, x: T) -> Result<T> {
    cell_problem(table, sol)?.value(table, sol, x)
}
