//! Potentials, objective and reflection value against independent quadrature oracles.

use ergodic_core::impulse::{objective, stationary_density};
use ergodic_core::model::fixtures::{default_params, log_nat, shlog_ent};
use ergodic_core::potentials::build_table;
use ergodic_core::{Params, Table};

/// Gauss–Legendre nodes and weights by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn composite(rule: &[(f64, f64)], f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let h = (hi - lo) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let c = lo + (k as f64 + 0.5) * h;
        acc += rule.iter().map(|(x, w)| w * f(c + 0.5 * h * x)).sum::<f64>() * 0.5 * h;
    }
    acc
}

/// `φ = -ln s` normalized at 1/2, and the reward, in closed form.
struct Oracle {
    phi: fn(f64) -> f64,
    rule: Vec<(f64, f64)>,
}

fn phi_nat(x: f64) -> f64 {
    8.0 * (2.0 * x).ln() - 8.0 * (x - 0.5)
}

fn phi_ent(x: f64) -> f64 {
    let f = |x: f64| 8.0 * (-0.2 / x + 0.8 * x.ln() - x);
    f(x) - f(0.5)
}

fn c(x: f64) -> f64 {
    x / (1.0 + x)
}

impl Oracle {
    fn new(phi: fn(f64) -> f64) -> Self {
        Self { phi, rule: gauss_legendre(16) }
    }

    fn s(&self, x: f64) -> f64 {
        (-(self.phi)(x)).exp()
    }

    /// `s(u) ∫_0^u f dM`, with the exponentials combined to avoid overflow.
    fn weighted(&self, u: f64, f: impl Fn(f64) -> f64) -> f64 {
        let pu = (self.phi)(u);
        composite(&self.rule, |v| 8.0 / (v * v) * ((self.phi)(v) - pu).exp() * f(v), 1e-300, u, 200)
    }

    fn q(&self, u: f64) -> f64 {
        self.weighted(u, |_| 1.0)
    }

    fn gc(&self, u: f64) -> f64 {
        self.weighted(u, c)
    }

    fn b_xi(&self, w: f64, y: f64) -> f64 {
        composite(&self.rule, |u| self.q(u), w, y, 40)
    }

    fn b_g(&self, w: f64, y: f64) -> f64 {
        composite(&self.rule, |u| self.gc(u), w, y, 40)
    }

    fn objective(&self, p: &Params, w: f64, y: f64) -> f64 {
        (p.p * (y - w) - p.k + p.gamma * self.b_g(w, y)) / self.b_xi(w, y)
    }

    fn h(&self, p: &Params, x: f64) -> f64 {
        (p.gamma * self.gc(x) + p.p) / self.q(x)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn fixtures() -> Vec<(&'static str, Table, Oracle)> {
    vec![
        ("log_nat", build_table(&log_nat(), 2000, 1e-10).unwrap(), Oracle::new(phi_nat)),
        ("shlog_ent", build_table(&shlog_ent(), 2000, 1e-10).unwrap(), Oracle::new(phi_ent)),
    ]
}

#[test]
fn gauss_legendre_oracle_is_exact_on_polynomials() {
    let rule = gauss_legendre(16);
    let v = composite(&rule, |x| x.powi(31), 0.0, 1.0, 1);
    assert!((v - 1.0 / 32.0).abs() < 1e-15);
}

#[test]
fn scale_density_matches_closed_form() {
    for (name, t, o) in fixtures() {
        for x in [0.05, 0.2, 0.5, 0.9, 1.7, 3.5] {
            let e = rel(t.scale(x).unwrap(), o.s(x));
            assert!(e < 1e-9, "{name}: s({x}) rel err {e:e}");
            let sp = 8.0 / (x * x * o.s(x));
            let e = rel(t.speed(x).unwrap(), sp);
            assert!(e < 1e-9, "{name}: m({x}) rel err {e:e}");
        }
    }
}

#[test]
fn natural_speed_cumulative_is_incomplete_gamma() {
    let t = build_table(&log_nat(), 2000, 1e-10).unwrap();
    // m(v) = 2048 e^4 v^6 e^{-8v}
    let lower_gamma = |u: f64| {
        let z = 8.0 * u;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=6 {
            term *= z / k as f64;
            sum += term;
        }
        720.0 / 8f64.powi(7) * (1.0 - (-z).exp() * sum)
    };
    for u in [0.1, 0.4, 1.0, 2.5] {
        let exact = 2048.0 * 4f64.exp() * lower_gamma(u);
        let e = rel(t.speed_cum(u).unwrap(), exact);
        assert!(e < 1e-9, "M(0,{u}) rel err {e:e}");
    }
}

#[test]
fn potential_derivatives_match_nested_quadrature() {
    for (name, t, o) in fixtures() {
        for x in [0.15, 0.5, 1.2, 3.0] {
            let e = rel(t.xi_prime(x).unwrap(), o.q(x));
            assert!(e < 1e-8, "{name}: xi'({x}) rel err {e:e}");
            let e = rel(t.g_prime(x).unwrap(), o.gc(x));
            assert!(e < 1e-8, "{name}: g'({x}) rel err {e:e}");
        }
    }
}

#[test]
fn jump_operators_and_objective_match_oracle() {
    let p = default_params::<f64>();
    for (name, t, o) in fixtures() {
        for (w, y) in [(0.3, 0.9), (0.1, 0.6), (0.5, 1.5)] {
            let e = rel(t.b_xi(w, y).unwrap(), o.b_xi(w, y));
            assert!(e < 1e-8, "{name}: Bxi({w},{y}) rel err {e:e}");
            let e = rel(t.b_g(w, y).unwrap(), o.b_g(w, y));
            assert!(e < 1e-8, "{name}: Bg({w},{y}) rel err {e:e}");
            let e = rel(objective(&t, &p, w, y).unwrap(), o.objective(&p, w, y));
            assert!(e < 1e-8, "{name}: F({w},{y}) rel err {e:e}");
        }
    }
}

#[test]
fn reflection_value_matches_oracle() {
    let p = default_params::<f64>();
    for (name, t, o) in fixtures() {
        for x in [0.2, 0.7, 1.4] {
            let e = rel(t.h(&p, x).unwrap(), o.h(&p, x));
            assert!(e < 1e-8, "{name}: h({x}) rel err {e:e}");
            let e = rel(t.h_integral_form(&p, x).unwrap(), o.h(&p, x));
            assert!(e < 1e-7, "{name}: integral-form h({x}) rel err {e:e}");
        }
    }
}

#[test]
fn stationary_density_matches_oracle_objective() {
    let p = default_params::<f64>();
    for (name, t, o) in fixtures() {
        let (w, y) = (0.3, 0.9);
        let nu = stationary_density(&t, w, y).unwrap();
        assert!((nu.mass(&t).unwrap() - 1.0).abs() < 1e-9, "{name}: mass");
        let e = rel(nu.profit(&t, &p).unwrap(), o.objective(&p, w, y));
        assert!(e < 1e-8, "{name}: profit rel err {e:e}");
        let e = rel(nu.mean_drift(&t).unwrap(), (y - w) / o.b_xi(w, y));
        assert!(e < 1e-8, "{name}: supply rel err {e:e}");
        assert_eq!(nu.at(&t, y + 0.25).unwrap(), 0.0);
        assert!((nu.cdf(&t, y).unwrap() - 1.0).abs() < 1e-9);
    }
}
