use crate::{lit, Real};

/// Cubic Hermite interpolant on `[x0, x1]` from values and slopes.
pub fn hermite_eval<T: Real>(x0: T, x1: T, y0: T, y1: T, d0: T, d1: T, x: T) -> T {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let h00 = two * t3 - three * t2 + T::one();
    let h10 = t3 - two * t2 + t;
    let h01 = three * t2 - two * t3;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Limits the slopes of a monotone interval so the Hermite cubic stays monotone.
///
/// Intervals whose data are not monotone are returned untouched.
pub fn monotone_slopes<T: Real>(x0: T, x1: T, y0: T, y1: T, d0: T, d1: T) -> (T, T) {
    let delta = (y1 - y0) / (x1 - x0);
    if delta == T::zero() {
        return (T::zero(), T::zero());
    }
    let (mut a, mut b) = (d0 / delta, d1 / delta);
    if a < T::zero() || b < T::zero() {
        a = a.max(T::zero());
        b = b.max(T::zero());
    }
    let s = a * a + b * b;
    let nine = lit::<T>(9.0);
    if s > nine {
        let tau = lit::<T>(3.0) / s.sqrt();
        a = a * tau;
        b = b * tau;
    }
    (a * delta, b * delta)
}
