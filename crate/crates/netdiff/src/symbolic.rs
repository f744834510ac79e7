//! Symbolic lower/upper linear bounds over the input variables.
//!
//! A [`SymbolicInterval`] is a pair of linear expressions lower/upper such
//! that, for every point `x` of the active input region,
//! `eval(lower, x) <= value(x) <= eval(upper, x)`. Coefficients are stored
//! as tiny intervals so that the rounding error accumulated by the affine
//! passes stays enclosed without a separate error term.

use crate::interval::{add_down, add_up, mul_down, mul_up, ConcreteInterval};

/// A box over the network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputRegion {
    pub bounds: Vec<ConcreteInterval>,
}

impl InputRegion {
    pub fn new(bounds: Vec<ConcreteInterval>) -> Self {
        Self { bounds }
    }

    /// Builds a region from `(lo, hi)` pairs. Panics on inverted pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self::new(pairs.iter().map(|&(l, h)| ConcreteInterval::new(l, h)).collect())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.midpoint()).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(v, b)| b.contains(*v))
    }
}

/// A linear expression `sum_i coeffs[i] * x_i + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExpr {
    pub coeffs: Vec<ConcreteInterval>,
    pub constant: ConcreteInterval,
}

impl LinearExpr {
    pub fn zero(dim: usize) -> Self {
        Self {
            coeffs: vec![ConcreteInterval::zero(); dim],
            constant: ConcreteInterval::zero(),
        }
    }

    /// The identity expression `x_i`.
    pub fn identity(dim: usize, i: usize) -> Self {
        let mut e = Self::zero(dim);
        e.coeffs[i] = ConcreteInterval::point(1.0);
        e
    }

    pub fn constant(dim: usize, c: ConcreteInterval) -> Self {
        let mut e = Self::zero(dim);
        e.constant = c;
        e
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// `self += w * other`, with interval coefficient arithmetic.
    pub fn scale_add_assign(&mut self, other: &LinearExpr, w: f64) {
        debug_assert_eq!(self.dim(), other.dim());
        if w == 0.0 {
            return;
        }
        for (c, oc) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c = c.add(oc.scale(w));
        }
        self.constant = self.constant.add(other.constant.scale(w));
    }

    pub fn add_assign(&mut self, other: &LinearExpr) {
        self.scale_add_assign(other, 1.0);
    }

    /// Exact sign flip.
    pub fn negated(&self) -> LinearExpr {
        LinearExpr {
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
            constant: self.constant.neg(),
        }
    }

    /// Minimum of the expression over the region box, rounded down.
    ///
    /// Per coefficient, the worst corner of coefficient-interval x
    /// region-interval is taken, which covers both the semantic choice of
    /// region endpoint and the enclosed rounding error.
    pub fn eval_min(&self, region: &InputRegion) -> f64 {
        debug_assert_eq!(self.dim(), region.dim());
        let mut acc = self.constant.lo;
        for (c, r) in self.coeffs.iter().zip(&region.bounds) {
            let m = mul_down(c.lo, r.lo)
                .min(mul_down(c.lo, r.hi))
                .min(mul_down(c.hi, r.lo))
                .min(mul_down(c.hi, r.hi));
            acc = add_down(acc, m);
        }
        acc
    }

    /// Maximum of the expression over the region box, rounded up.
    pub fn eval_max(&self, region: &InputRegion) -> f64 {
        debug_assert_eq!(self.dim(), region.dim());
        let mut acc = self.constant.hi;
        for (c, r) in self.coeffs.iter().zip(&region.bounds) {
            let m = mul_up(c.lo, r.lo)
                .max(mul_up(c.lo, r.hi))
                .max(mul_up(c.hi, r.lo))
                .max(mul_up(c.hi, r.hi));
            acc = add_up(acc, m);
        }
        acc
    }

    /// Point evaluation rounded down (used by soundness checks).
    pub fn eval_at_down(&self, x: &[f64]) -> f64 {
        let mut acc = self.constant.lo;
        for (c, &v) in self.coeffs.iter().zip(x) {
            acc = add_down(acc, mul_down(c.lo, v).min(mul_down(c.hi, v)));
        }
        acc
    }

    /// Point evaluation rounded up.
    pub fn eval_at_up(&self, x: &[f64]) -> f64 {
        let mut acc = self.constant.hi;
        for (c, &v) in self.coeffs.iter().zip(x) {
            acc = add_up(acc, mul_up(c.lo, v).max(mul_up(c.hi, v)));
        }
        acc
    }
}

/// A pair of symbolic linear bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicInterval {
    pub lower: LinearExpr,
    pub upper: LinearExpr,
}

impl SymbolicInterval {
    pub fn zero(dim: usize) -> Self {
        Self {
            lower: LinearExpr::zero(dim),
            upper: LinearExpr::zero(dim),
        }
    }

    /// `lower = upper = x_i`.
    pub fn identity(dim: usize, i: usize) -> Self {
        let e = LinearExpr::identity(dim, i);
        Self { lower: e.clone(), upper: e }
    }

    /// A constant-valued symbolic interval: the lower expression carries
    /// `iv.lo`, the upper carries `iv.hi`.
    pub fn constant(dim: usize, iv: ConcreteInterval) -> Self {
        Self {
            lower: LinearExpr::constant(dim, ConcreteInterval::point(iv.lo)),
            upper: LinearExpr::constant(dim, ConcreteInterval::point(iv.hi)),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    /// One identity symbolic interval per input variable.
    pub fn from_region(region: &InputRegion) -> Vec<SymbolicInterval> {
        (0..region.dim()).map(|i| Self::identity(region.dim(), i)).collect()
    }

    /// `self += w * term`; the lower/upper roles of `term` swap when `w < 0`.
    pub fn scale_add(&mut self, term: &SymbolicInterval, w: f64) {
        if w >= 0.0 {
            self.lower.scale_add_assign(&term.lower, w);
            self.upper.scale_add_assign(&term.upper, w);
        } else {
            self.lower.scale_add_assign(&term.upper, w);
            self.upper.scale_add_assign(&term.lower, w);
        }
    }

    pub fn add(&mut self, other: &SymbolicInterval) {
        self.lower.add_assign(&other.lower);
        self.upper.add_assign(&other.upper);
    }

    /// Adds a concrete interval into the constant terms.
    pub fn add_const(&mut self, iv: ConcreteInterval) {
        self.lower.constant = self.lower.constant.add(ConcreteInterval::point(iv.lo));
        self.upper.constant = self.upper.constant.add(ConcreteInterval::point(iv.hi));
    }

    /// Negation: swaps the bounds with sign flips. Exact.
    pub fn negate(&self) -> SymbolicInterval {
        SymbolicInterval {
            lower: self.upper.negated(),
            upper: self.lower.negated(),
        }
    }

    /// Evaluates the symbolic bounds over the region box.
    pub fn concretize(&self, region: &InputRegion) -> ConcreteInterval {
        let lo = self.lower.eval_min(region);
        let hi = self.upper.eval_max(region);
        ConcreteInterval::new(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(pairs: &[(f64, f64)]) -> InputRegion {
        InputRegion::from_pairs(pairs)
    }

    fn assert_close(a: ConcreteInterval, lo: f64, hi: f64) {
        assert!(
            (a.lo - lo).abs() <= 1e-12 && (a.hi - hi).abs() <= 1e-12,
            "expected ~[{lo}, {hi}], got {a}"
        );
    }

    #[test]
    fn identity_initialization() {
        let r = region(&[(4.0, 6.0), (1.0, 5.0)]);
        let syms = SymbolicInterval::from_region(&r);
        assert_eq!(syms.len(), 2);
        assert_eq!(syms[0].lower.coeffs[0], ConcreteInterval::point(1.0));
        assert_eq!(syms[0].lower.coeffs[1], ConcreteInterval::zero());
        assert_eq!(syms[0].lower, syms[0].upper);
        assert_close(syms[0].concretize(&r), 4.0, 6.0);
        assert_close(syms[1].concretize(&r), 1.0, 5.0);
    }

    #[test]
    fn delta_initialization_is_zero() {
        let r = region(&[(-1.0, 1.0)]);
        let z = SymbolicInterval::zero(1);
        assert_eq!(z.concretize(&r), ConcreteInterval::zero());
    }

    #[test]
    fn scale_add_builds_affine_terms() {
        let r = region(&[(4.0, 6.0), (1.0, 5.0)]);
        let x = SymbolicInterval::from_region(&r);
        let mut acc = SymbolicInterval::zero(2);
        acc.scale_add(&x[0], 1.9);
        assert_close(acc.concretize(&r), 7.6, 11.4);
        acc.scale_add(&x[1], -2.1);
        // 1.9 x1 - 2.1 x2
        assert_close(acc.concretize(&r), -2.9, 9.3);
    }

    #[test]
    fn scale_add_zero_weight_is_identity() {
        let r = region(&[(4.0, 6.0)]);
        let x = SymbolicInterval::from_region(&r);
        let mut acc = SymbolicInterval::zero(1);
        acc.scale_add(&x[0], 1.9);
        let before = acc.clone();
        acc.scale_add(&x[0], 0.0);
        assert_eq!(acc, before);
    }

    #[test]
    fn concretize_examples() {
        let r1 = region(&[(-1.0, 1.0)]);
        let mut s = SymbolicInterval::zero(1);
        s.scale_add(&SymbolicInterval::identity(1, 0), 0.1);
        assert_close(s.concretize(&r1), -0.1, 0.1);

        let r2 = region(&[(4.0, 6.0), (1.0, 5.0)]);
        let mut t = SymbolicInterval::zero(2);
        t.scale_add(&SymbolicInterval::identity(2, 0), 0.1);
        t.scale_add(&SymbolicInterval::identity(2, 1), 0.1);
        assert_close(t.concretize(&r2), 0.5, 1.1);
    }

    #[test]
    fn negate_flips_bounds() {
        let r = region(&[(-1.0, 1.0)]);
        let x = SymbolicInterval::identity(1, 0);
        let n = x.negate();
        assert_close(n.concretize(&r), -1.0, 1.0);
        let mut s = SymbolicInterval::zero(1);
        s.scale_add(&x, 2.0);
        s.add_const(ConcreteInterval::new(1.0, 1.0));
        // -(2x + 1) over [-1,1] = [-3, 1]
        assert_close(s.negate().concretize(&r), -3.0, 1.0);
    }

    #[test]
    fn add_zero_is_identity() {
        let r = region(&[(0.0, 2.0)]);
        let mut a = SymbolicInterval::identity(1, 0);
        a.add(&SymbolicInterval::zero(1));
        assert_eq!(a, SymbolicInterval::identity(1, 0));
        assert_close(a.concretize(&r), 0.0, 2.0);
    }

    #[test]
    fn constant_interval_concretizes_to_itself() {
        let r = region(&[(-5.0, 5.0)]);
        let c = SymbolicInterval::constant(1, ConcreteInterval::new(-0.53, 3.02));
        assert_eq!(c.concretize(&r), ConcreteInterval::new(-0.53, 3.02));
    }

    mod props {
        use super::*;
        use rand::{Rng, SeedableRng};

        /// eval(expr, x) lies inside concretize(expr, region) for 10^5
        /// random (expr, region, x) triples.
        #[test]
        fn concretization_soundness() {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51AB);
            for _ in 0..100_000 {
                let dim = rng.gen_range(1..5usize);
                let r = InputRegion::new(
                    (0..dim)
                        .map(|_| {
                            let a: f64 = rng.gen_range(-10.0..10.0);
                            let w: f64 = rng.gen_range(0.0..5.0);
                            ConcreteInterval::new(a, a + w)
                        })
                        .collect(),
                );
                let mut s = SymbolicInterval::zero(dim);
                for i in 0..dim {
                    s.scale_add(&SymbolicInterval::identity(dim, i), rng.gen_range(-3.0..3.0));
                }
                s.add_const(ConcreteInterval::point(rng.gen_range(-2.0..2.0)));
                let conc = s.concretize(&r);
                let x: Vec<f64> = r
                    .bounds
                    .iter()
                    .map(|b| rng.gen_range(b.lo..=b.hi))
                    .collect();
                // Both expressions evaluate to the same value here (lower == upper
                // up to rounding absorption), and it must land in the bounds.
                let v_lo = s.lower.eval_at_down(&x);
                let v_hi = s.upper.eval_at_up(&x);
                assert!(
                    conc.lo <= v_lo && v_hi <= conc.hi,
                    "eval [{v_lo}, {v_hi}] outside {conc}"
                );
            }
        }

        /// concretize(scale_add(0, t, w)) agrees with scale-then-concretize.
        #[test]
        fn scale_add_distributes() {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xD157);
            for _ in 0..10_000 {
                let r = InputRegion::from_pairs(&[(
                    rng.gen_range(-5.0..0.0),
                    rng.gen_range(0.0..5.0),
                )]);
                let w: f64 = rng.gen_range(-3.0..3.0);
                let mut t = SymbolicInterval::zero(1);
                t.scale_add(&SymbolicInterval::identity(1, 0), rng.gen_range(-2.0..2.0));
                let mut acc = SymbolicInterval::zero(1);
                acc.scale_add(&t, w);
                let a = acc.concretize(&r);
                let b = t.concretize(&r).scale(w);
                // Equal up to widening noise.
                let slack = 1e-12 * (1.0 + b.max_abs());
                assert!((a.lo - b.lo).abs() <= slack && (a.hi - b.hi).abs() <= slack);
            }
        }
    }
}
