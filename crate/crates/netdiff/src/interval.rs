//! Concrete interval arithmetic with sound outward rounding.
//!
//! Every operation widens its result so that it contains the exact
//! real-arithmetic result. Widening is directed: a computed endpoint is
//! stepped one ULP outward only when the floating-point operation was
//! inexact, which keeps integer and power-of-two arithmetic exact while
//! remaining sound for everything else. The error direction is recovered
//! with error-free transformations (two-sum for addition, FMA residual
//! for multiplication).

use std::sync::atomic::{AtomicBool, Ordering};

static WIDENING: AtomicBool = AtomicBool::new(true);

/// Disables (or re-enables) outward widening globally.
///
/// Sound mode is the default; fast mode exists for benchmarking and gives
/// up the enclosure guarantee.
pub fn set_fast_math(enabled: bool) {
    WIDENING.store(!enabled, Ordering::Relaxed);
}

/// Whether results are currently being widened outward.
pub fn widening_enabled() -> bool {
    WIDENING.load(Ordering::Relaxed)
}

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    // Knuth's branch-free two-sum residual: exact for all finite inputs.
    let bb = s - a;
    let aa = s - bb;
    (a - aa) + (b - bb)
}

#[inline]
pub(crate) fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !widening_enabled() {
        return s;
    }
    if !s.is_finite() {
        // A lower endpoint that overflowed upward saturates to MAX.
        return if s == f64::INFINITY { f64::MAX } else { s };
    }
    if two_sum_err(a, b, s) >= 0.0 {
        s
    } else {
        s.next_down()
    }
}

#[inline]
pub(crate) fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !widening_enabled() {
        return s;
    }
    if !s.is_finite() {
        return if s == f64::NEG_INFINITY { f64::MIN } else { s };
    }
    if two_sum_err(a, b, s) <= 0.0 {
        s
    } else {
        s.next_up()
    }
}

/// Sign of the true error `a*b - p`, or `None` when the direction cannot
/// be trusted. The FMA residual is exact as long as `p` is normal; in
/// the subnormal range the residual itself may round to zero, so an
/// apparently exact product there gets widened both ways.
#[inline]
fn mul_residual_sign(a: f64, b: f64, p: f64) -> Option<std::cmp::Ordering> {
    let err = a.mul_add(b, -p);
    if err == 0.0 && (p == 0.0 || p.is_subnormal()) {
        return None;
    }
    err.partial_cmp(&0.0)
}

#[inline]
pub(crate) fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !widening_enabled() {
        return p;
    }
    if !p.is_finite() {
        return if p == f64::INFINITY { f64::MAX } else { p };
    }
    match mul_residual_sign(a, b, p) {
        Some(std::cmp::Ordering::Greater) | Some(std::cmp::Ordering::Equal) => p,
        _ => p.next_down(),
    }
}

#[inline]
pub(crate) fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !widening_enabled() {
        return p;
    }
    if !p.is_finite() {
        return if p == f64::NEG_INFINITY { f64::MIN } else { p };
    }
    match mul_residual_sign(a, b, p) {
        Some(std::cmp::Ordering::Less) | Some(std::cmp::Ordering::Equal) => p,
        _ => p.next_up(),
    }
}

/// A closed interval of 64-bit floats.
///
/// `lo <= hi` always; NaN endpoints are forbidden. Infinite endpoints are
/// legal only as saturation sentinels. Zero-width (degenerate) intervals
/// are legal everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcreteInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ConcreteInterval {
    /// Creates `[lo, hi]`. Panics on NaN or an inverted pair.
    #[inline]
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(!lo.is_nan() && !hi.is_nan(), "NaN interval endpoint");
        assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    /// The degenerate interval `[x, x]`.
    #[inline]
    pub fn point(x: f64) -> Self {
        Self::new(x, x)
    }

    #[inline]
    pub fn zero() -> Self {
        Self { lo: 0.0, hi: 0.0 }
    }

    /// `[a+c, b+d]`, endpoints widened outward when inexact.
    #[inline]
    pub fn add(self, other: Self) -> Self {
        Self {
            lo: add_down(self.lo, other.lo),
            hi: add_up(self.hi, other.hi),
        }
    }

    /// `[a-d, b-c]`, endpoints widened outward when inexact.
    #[inline]
    pub fn sub(self, other: Self) -> Self {
        Self {
            lo: add_down(self.lo, -other.hi),
            hi: add_up(self.hi, -other.lo),
        }
    }

    /// Scales by a finite constant; endpoints swap when `c < 0`.
    #[inline]
    pub fn scale(self, c: f64) -> Self {
        debug_assert!(c.is_finite(), "scale by non-finite constant");
        if c >= 0.0 {
            Self {
                lo: mul_down(self.lo, c),
                hi: mul_up(self.hi, c),
            }
        } else {
            Self {
                lo: mul_down(self.hi, c),
                hi: mul_up(self.lo, c),
            }
        }
    }

    /// Endpoint-wise max: `[max(a,c), max(b,d)]`. Exact.
    #[inline]
    pub fn imax(self, other: Self) -> Self {
        Self {
            lo: self.lo.max(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Endpoint-wise min: `[min(a,c), min(b,d)]`. Exact.
    #[inline]
    pub fn imin(self, other: Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    /// Smallest interval containing both operands. Exact.
    #[inline]
    pub fn hull(self, other: Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// `hi - lo`, rounded up.
    #[inline]
    pub fn width(self) -> f64 {
        add_up(self.hi, -self.lo)
    }

    /// Closed-endpoint membership.
    #[inline]
    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `self ⊆ other` with closed endpoints.
    #[inline]
    pub fn is_subset_of(self, other: Self) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    #[inline]
    pub fn midpoint(self) -> f64 {
        let m = self.lo + (self.hi - self.lo) * 0.5;
        if m.is_finite() {
            m.clamp(self.lo, self.hi)
        } else {
            self.lo * 0.5 + self.hi * 0.5
        }
    }

    /// Exact negation `[-hi, -lo]`.
    #[inline]
    pub fn neg(self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    /// The larger absolute endpoint.
    #[inline]
    pub fn max_abs(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

impl std::fmt::Display for ConcreteInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> ConcreteInterval {
        ConcreteInterval::new(lo, hi)
    }

    fn assert_close(a: ConcreteInterval, lo: f64, hi: f64) {
        assert!(
            (a.lo - lo).abs() <= 1e-12 && (a.hi - hi).abs() <= 1e-12,
            "expected ~[{lo}, {hi}], got {a}"
        );
    }

    #[test]
    fn add_identity() {
        let r = iv(1.0, 2.0).add(iv(0.0, 0.0));
        assert_eq!(r, iv(1.0, 2.0)); // exact, so no widening
    }

    #[test]
    fn add_examples() {
        assert_close(iv(5.0, 15.0).add(iv(0.0, 2.0)), 5.0, 17.0);
        assert_close(iv(0.4, 0.6).add(iv(0.1, 0.5)), 0.5, 1.1);
    }

    #[test]
    fn sub_examples() {
        let a = iv(3.5, 4.25).sub(iv(0.0, 0.0));
        assert_eq!(a, iv(3.5, 4.25));
        assert_close(iv(-2.1, 2.1).sub(iv(-2.0, 2.0)), -4.1, 4.1);
        assert_close(iv(0.0, 2.1).sub(iv(0.0, 2.0)), -2.0, 2.1);
    }

    #[test]
    fn scale_examples() {
        assert_close(iv(1.0, 5.0).scale(0.1), 0.1, 0.5);
        assert_close(iv(4.0, 6.0).scale(0.1), 0.4, 0.6);
        assert_eq!(iv(1.0, 2.0).scale(-1.0), iv(-2.0, -1.0)); // exact reflection
    }

    #[test]
    fn scale_by_zero_is_exact_zero() {
        assert_eq!(iv(-1e300, 1e300).scale(0.0), iv(0.0, 0.0));
    }

    #[test]
    fn imax_imin_examples() {
        assert_eq!(iv(-3.0, -1.0).imax(iv(-4.0, -2.0)), iv(-3.0, -1.0));
        assert_eq!(iv(1.0, 3.0).imin(iv(2.0, 4.0)), iv(1.0, 3.0));
    }

    #[test]
    fn hull_examples() {
        assert_eq!(iv(4.0, 12.0).hull(iv(9.0, 17.0)), iv(4.0, 17.0));
        assert_eq!(iv(5.0, 15.0).hull(iv(5.0, 16.0)), iv(5.0, 16.0));
    }

    #[test]
    fn width_and_contains() {
        assert_eq!(iv(1.0, 3.0).width(), 2.0);
        assert!(iv(1.0, 3.0).contains(1.0));
        assert!(iv(1.0, 3.0).contains(3.0));
        assert!(!iv(1.0, 3.0).contains(3.0000001));
    }

    #[test]
    fn widening_encloses_inexact_results() {
        // fl(0.1) + fl(0.2) rounds up to 0.30000000000000004, so the exact
        // sum sits below it: the lower endpoint must have been widened.
        let r = iv(0.1, 0.1).add(iv(0.2, 0.2));
        assert_eq!(r.hi, 0.30000000000000004);
        assert!(r.lo < r.hi);
        assert!(r.width() <= 2e-16);
    }

    #[test]
    fn exact_ops_stay_exact() {
        // Integer arithmetic must not be widened, even in sound mode.
        let r = iv(5.0, 15.0).add(iv(0.0, 2.0)).sub(iv(0.0, 1.0));
        assert_eq!(r, iv(4.0, 17.0));
        assert_eq!(iv(0.0, 1.0).scale(2.0), iv(0.0, 2.0));
    }

    #[test]
    fn overflow_saturates() {
        let r = iv(f64::MAX, f64::MAX).add(iv(f64::MAX, f64::MAX));
        assert_eq!(r.hi, f64::INFINITY);
        assert!(r.lo <= f64::MAX);
        assert!(r.lo <= r.hi);
    }

    #[test]
    #[should_panic]
    fn nan_rejected() {
        let _ = iv(f64::NAN, 1.0);
    }

    #[test]
    #[should_panic]
    fn inverted_rejected() {
        let _ = iv(2.0, 1.0);
    }

    mod props {
        use super::*;
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};

        fn rat(x: f64) -> BigRational {
            BigRational::from_float(x).expect("finite")
        }

        fn contains_rat(iv: ConcreteInterval, v: &BigRational) -> bool {
            &rat(iv.lo) <= v && v <= &rat(iv.hi)
        }

        /// Enclosure against exact rational arithmetic, 10^6 operand pairs.
        #[test]
        fn enclosure_vs_exact_rationals() {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xE4C7);
            let mut sample = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
                let m: f64 = rng.gen_range(-1.0..1.0);
                let e: i32 = rng.gen_range(-30..30);
                m * 2f64.powi(e)
            };
            for i in 0..1_000_000u32 {
                let (a1, a2) = (sample(&mut rng), sample(&mut rng));
                let (b1, b2) = (sample(&mut rng), sample(&mut rng));
                let a = ConcreteInterval::new(a1.min(a2), a1.max(a2));
                let b = ConcreteInterval::new(b1.min(b2), b1.max(b2));
                match i % 3 {
                    0 => {
                        let r = a.add(b);
                        assert!(contains_rat(r, &(rat(a.lo) + rat(b.lo))));
                        assert!(contains_rat(r, &(rat(a.hi) + rat(b.hi))));
                    }
                    1 => {
                        let r = a.sub(b);
                        assert!(contains_rat(r, &(rat(a.lo) - rat(b.hi))));
                        assert!(contains_rat(r, &(rat(a.hi) - rat(b.lo))));
                    }
                    _ => {
                        let c = sample(&mut rng);
                        let r = a.scale(c);
                        assert!(contains_rat(r, &(rat(a.lo) * rat(c))));
                        assert!(contains_rat(r, &(rat(a.hi) * rat(c))));
                    }
                }
            }
            // Make sure the rational plumbing itself is live.
            assert_eq!(rat(0.5) + rat(0.25), BigRational::new(BigInt::from(3), BigInt::from(4)));
        }

        fn interval_strategy() -> impl Strategy<Value = ConcreteInterval> {
            (-1e6f64..1e6, -1e6f64..1e6)
                .prop_map(|(a, b)| ConcreteInterval::new(a.min(b), a.max(b)))
        }

        proptest! {
            #[test]
            fn monotonicity(
                a in interval_strategy(),
                b in interval_strategy(),
                c in -100.0f64..100.0,
                pad in (0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0),
            ) {
                let a2 = ConcreteInterval::new(a.lo - pad.0, a.hi + pad.1);
                let b2 = ConcreteInterval::new(b.lo - pad.2, b.hi + pad.3);
                prop_assert!(a.add(b).is_subset_of(a2.add(b2)));
                prop_assert!(a.sub(b).is_subset_of(a2.sub(b2)));
                prop_assert!(a.scale(c).is_subset_of(a2.scale(c)));
                prop_assert!(a.imax(b).is_subset_of(a2.imax(b2)));
                prop_assert!(a.imin(b).is_subset_of(a2.imin(b2)));
                prop_assert!(a.hull(b).is_subset_of(a2.hull(b2)));
            }

            #[test]
            fn minmax_soundness(a in interval_strategy(), b in interval_strategy(), t in 0.0f64..1.0, u in 0.0f64..1.0) {
                let x = a.lo + t * (a.hi - a.lo);
                let y = b.lo + u * (b.hi - b.lo);
                prop_assert!(a.imax(b).contains(x.max(y)));
                prop_assert!(a.imin(b).contains(x.min(y)));
                prop_assert!(a.hull(b).contains(x));
                prop_assert!(a.hull(b).contains(y));
            }
        }
    }
}
