//! Independent ground-truth generators used by the test suites: exact
//! ReLU-difference extremes, sampled difference envelopes, and exact
//! rational re-evaluation of concretization.
//!
//! These live in the shipped library so the reference values frozen into
//! the tests can be reproduced without the main analysis path.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interval::ConcreteInterval;
use crate::network::NetworkPair;
use crate::symbolic::{InputRegion, LinearExpr};
use crate::{Error, Result};

/// Domain of the pair `(n, d)` for [`relu_delta_exact`].
#[derive(Debug, Clone, Copy)]
pub enum DeltaDomain {
    /// `n` and `d` range freely over their box.
    Free,
    /// Additionally requires `n + d` to lie in the given interval.
    Coupled(ConcreteInterval),
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Exact range of `ReLU(n + d) - ReLU(n)` over the box (optionally
/// intersected with a slab on `n + d`).
///
/// The function is continuous piecewise-linear with breaklines `n = 0`
/// and `n + d = 0`, so its extremes lie at corners of the feasible
/// polygon: box corners, breakline-edge intersections, and (in coupled
/// mode) slab-edge intersections. Candidates carry the intended sum
/// `s = n + d` so that points constructed on a breakline or slab
/// boundary are evaluated there exactly; membership of the derived
/// coordinate is tested with an ULP-scale tolerance.
pub fn relu_delta_exact(
    n: ConcreteInterval,
    d: ConcreteInterval,
    domain: DeltaDomain,
) -> Result<ConcreteInterval> {
    // (n value, d value, n + d value)
    let mut candidates: Vec<(f64, f64, f64)> = Vec::with_capacity(32);
    for nv in [n.lo, n.hi] {
        for dv in [d.lo, d.hi] {
            candidates.push((nv, dv, nv + dv));
        }
    }
    // n = 0 crossing the box edges.
    for dv in [d.lo, d.hi] {
        candidates.push((0.0, dv, dv));
    }
    candidates.push((0.0, 0.0, 0.0));
    // n + d = 0 crossing the box edges.
    for nv in [n.lo, n.hi] {
        candidates.push((nv, -nv, 0.0));
    }
    for dv in [d.lo, d.hi] {
        candidates.push((-dv, dv, 0.0));
    }
    let mut slab: Option<ConcreteInterval> = None;
    if let DeltaDomain::Coupled(np) = domain {
        slab = Some(np);
        // n + d = c crossing the box edges and the n = 0 breakline.
        for c in [np.lo, np.hi] {
            for nv in [n.lo, n.hi] {
                candidates.push((nv, c - nv, c));
            }
            for dv in [d.lo, d.hi] {
                candidates.push((c - dv, dv, c));
            }
            candidates.push((0.0, c, c));
        }
    }

    let inside = |iv: ConcreteInterval, x: f64| -> bool {
        let tol = 1e-12 * (1.0 + x.abs());
        iv.lo - tol <= x && x <= iv.hi + tol
    };
    let feasible = |&(nv, dv, sv): &(f64, f64, f64)| -> bool {
        inside(n, nv) && inside(d, dv) && slab.map_or(true, |np| inside(np, sv))
    };

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in candidates.iter().filter(|p| feasible(p)) {
        let v = relu(p.2) - relu(p.0);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return Err(Error::EmptyFeasibleSet);
    }
    Ok(ConcreteInterval::new(lo, hi))
}

/// Hull of `f'(x) - f(x)` over a deterministic grid plus seeded uniform
/// random points: an inner approximation of the true difference range,
/// one interval per output.
pub fn sampled_delta_envelope(
    pair: &NetworkPair,
    region: &InputRegion,
    grid: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<ConcreteInterval>> {
    if grid.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: grid.len(),
        });
    }
    if grid.iter().any(|&c| c == 0) {
        return Err(Error::InvalidQuery("grid counts must be positive".into()));
    }
    let dim = region.dim();
    let mut env: Option<Vec<ConcreteInterval>> = None;
    let visit = |x: &[f64], env: &mut Option<Vec<ConcreteInterval>>| -> Result<()> {
        let fo = pair.f.eval_concrete(x)?;
        let fpo = pair.f_prime.eval_concrete(x)?;
        let delta: Vec<ConcreteInterval> = fpo
            .iter()
            .zip(&fo)
            .map(|(a, b)| ConcreteInterval::point(a - b))
            .collect();
        match env {
            None => *env = Some(delta),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(&delta) {
                    *a = a.hull(*b);
                }
            }
        }
        Ok(())
    };

    // Mixed-radix sweep over the grid.
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    loop {
        for i in 0..dim {
            let b = region.bounds[i];
            x[i] = if grid[i] == 1 {
                b.midpoint()
            } else {
                b.lo + (b.hi - b.lo) * idx[i] as f64 / (grid[i] - 1) as f64
            };
        }
        visit(&x, &mut env)?;
        let mut carry = 0;
        while carry < dim {
            idx[carry] += 1;
            if idx[carry] < grid[carry] {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == dim {
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        for (i, b) in region.bounds.iter().enumerate() {
            x[i] = if b.lo < b.hi { rng.gen_range(b.lo..=b.hi) } else { b.lo };
        }
        visit(&x, &mut env)?;
    }
    Ok(env.expect("at least one grid point"))
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

fn rat_to_f64_down(r: &BigRational) -> f64 {
    let mut c = r.to_f64().unwrap_or(f64::NAN);
    if !c.is_finite() {
        return if c == f64::INFINITY { f64::MAX } else { f64::MIN };
    }
    while &rat(c) > r {
        c = c.next_down();
    }
    c
}

fn rat_to_f64_up(r: &BigRational) -> f64 {
    let mut c = r.to_f64().unwrap_or(f64::NAN);
    if !c.is_finite() {
        return if c == f64::INFINITY { f64::MAX } else { f64::MIN };
    }
    while &rat(c) < r {
        c = c.next_up();
    }
    c
}

/// Re-evaluates the box-minimization of a linear expression in exact
/// rational arithmetic, then rounds the endpoints outward to floats.
/// Working-precision concretization must contain this result.
pub fn extended_precision_recheck(expr: &LinearExpr, region: &InputRegion) -> ConcreteInterval {
    assert_eq!(expr.dim(), region.dim());
    let mut lo = rat(expr.constant.lo);
    let mut hi = rat(expr.constant.hi);
    for (c, b) in expr.coeffs.iter().zip(&region.bounds) {
        let products = [
            rat(c.lo) * rat(b.lo),
            rat(c.lo) * rat(b.hi),
            rat(c.hi) * rat(b.lo),
            rat(c.hi) * rat(b.hi),
        ];
        lo += products.iter().min().unwrap().clone();
        hi += products.iter().max().unwrap().clone();
    }
    ConcreteInterval::new(rat_to_f64_down(&lo), rat_to_f64_up(&hi))
}
