use crate::{lit, to_f64, Error, Real};

/// Fixed-order Gauss–Legendre rule stored on the unit interval.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Builds an `n`-point rule; nodes are found by Newton iteration in `f64`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let nf = n as f64;
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                if n == 1 {
                    p1 = z;
                    p0 = 1.0;
                }
                dp = nf * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                z = 0.0;
                dp = 1.0;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes.push(lit(0.5 * (1.0 - z)));
            weights.push(lit(0.5 * w));
        }
        let mut pairs: Vec<(T, T)> = nodes.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes on `[0, 1]`, increasing.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Weights on `[0, 1]`, summing to one.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, lo: T, hi: T) -> T {
        let h = hi - lo;
        let mut acc = T::zero();
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + *w * f(lo + h * *t);
        }
        acc * h
    }

    /// Composite rule over `panels` equal sub-intervals.
    pub fn composite<F: FnMut(T) -> T>(&self, mut f: F, lo: T, hi: T, panels: usize) -> T {
        let h = (hi - lo) / lit(panels as f64);
        let mut acc = T::zero();
        for k in 0..panels {
            let l = lo + h * lit(k as f64);
            acc = acc + self.integrate(&mut f, l, l + h);
        }
        acc
    }
}

/// Value and error estimate returned by adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, lo: T, hi: T) -> (T, T) {
    let c = (lo + hi) * lit(0.5);
    let r = (hi - lo) * lit(0.5);
    let fc = f(c);
    let mut k = fc * lit(WGK[7]);
    let mut g = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = r * lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        k = k + s * lit(WGK[j]);
        if j % 2 == 1 {
            g = g + s * lit(WG[j / 2]);
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature with global subdivision.
///
/// Converges when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`;
/// otherwise returns [`Error::Quadrature`] carrying the achieved error.
pub fn gauss_kronrod<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    abs_tol: T,
    rel_tol: T,
    max_intervals: usize,
) -> Result<QuadResult<T>, Error> {
    if lo == hi {
        return Ok(QuadResult { value: T::zero(), error: T::zero(), evaluations: 0 });
    }
    if lo > hi {
        return gauss_kronrod(f, hi, lo, abs_tol, rel_tol, max_intervals)
            .map(|r| QuadResult { value: -r.value, ..r })
            .map_err(|e| match e {
                Error::Quadrature { achieved, requested, .. } => {
                    Error::Quadrature { lo: to_f64(lo), hi: to_f64(hi), achieved, requested }
                }
                other => other,
            });
    }
    let fail = |achieved: T| Error::Quadrature {
        lo: to_f64(lo),
        hi: to_f64(hi),
        achieved: to_f64(achieved),
        requested: to_f64(abs_tol.max(rel_tol)),
    };
    let (v, e) = gk15(&mut f, lo, hi);
    let mut parts = vec![(lo, hi, v, e)];
    let mut evaluations = 15;
    loop {
        let value: T = parts.iter().map(|p| p.2).sum();
        let error: T = parts.iter().map(|p| p.3).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(fail(T::infinity()));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, evaluations });
        }
        if parts.len() >= max_intervals {
            return Err(fail(error));
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (l, h, _, _) = parts.swap_remove(idx);
        let m = (l + h) * lit(0.5);
        if m <= l || m >= h {
            return Err(fail(error));
        }
        let (v1, e1) = gk15(&mut f, l, m);
        let (v2, e2) = gk15(&mut f, m, h);
        evaluations += 30;
        parts.push((l, m, v1, e1));
        parts.push((m, h, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_weights_sum_to_one() {
        for n in 1..=20 {
            let r = GaussLegendre::<f64>::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "n={n} sum={s}");
        }
    }

    #[test]
    fn legendre_exact_for_polynomials() {
        let r = GaussLegendre::<f64>::new(6);
        let v = r.integrate(|x| x.powi(11), 0.0, 2.0);
        assert!((v - 2f64.powi(12) / 12.0).abs() < 1e-10);
    }

    #[test]
    fn kronrod_handles_peaked_integrand() {
        let r = gauss_kronrod(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12, 500).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((r.value - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn kronrod_reports_failure() {
        let e = gauss_kronrod(|x: f64| 1.0 / x.abs().sqrt(), -1.0, 1.0, 1e-14, 1e-14, 4).unwrap_err();
        assert!(matches!(e, Error::Quadrature { .. }));
    }

    #[test]
    fn works_in_single_precision() {
        let r = GaussLegendre::<f32>::new(5);
        let v = r.integrate(|x| x.exp(), 0.0, 1.0);
        assert!((v - (1f32.exp() - 1.0)).abs() < 1e-5);
    }
}
