//! Backward gradient-interval pass, gradient difference, smear scoring,
//! and input bisection.

use crate::forward::{Mask, MaskMatrix};
use crate::interval::ConcreteInterval;
use crate::network::Network;
use crate::symbolic::InputRegion;
use crate::{Error, Result};

/// Interval gradient of a scalar output with respect to the neurons of
/// one layer; after the full backward pass, with respect to the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub entries: Vec<ConcreteInterval>,
}

/// A chosen input split: `left` and `right` tile the parent region
/// exactly, sharing the split face.
#[derive(Debug, Clone)]
pub struct SplitDecision {
    pub input_index: usize,
    pub left: InputRegion,
    pub right: InputRegion,
}

fn apply_mask(g: ConcreteInterval, m: Mask) -> ConcreteInterval {
    match m {
        Mask::Inactive => ConcreteInterval::zero(),
        Mask::Active => g,
        Mask::Mixed => ConcreteInterval::new(g.lo.min(0.0), g.hi.max(0.0)),
    }
}

/// Backward gradient-interval computation.
///
/// The chosen output starts at [1,1]; each step applies the recorded
/// ReLU state of the layer and then multiplies through the incoming
/// weights with sign-dependent endpoint pairing.
pub fn gradient(net: &Network, mask: &MaskMatrix, output_index: usize) -> Result<GradientVector> {
    let l = net.num_layers();
    if output_index >= net.output_size() {
        return Err(Error::InvalidQuery(format!(
            "output index {output_index} out of range"
        )));
    }
    if mask.len() + 1 != l {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} hidden layers, network has {}",
            mask.len(),
            l - 1
        )));
    }
    for (k, mk) in mask.iter().enumerate() {
        if mk.len() != net.layer_sizes[k + 1] {
            return Err(Error::ShapeMismatch(format!(
                "mask layer {} has {} entries, expected {}",
                k + 1,
                mk.len(),
                net.layer_sizes[k + 1]
            )));
        }
    }

    let mut g = vec![ConcreteInterval::zero(); net.output_size()];
    g[output_index] = ConcreteInterval::point(1.0);
    for k in (0..l).rev() {
        if k < l - 1 {
            for (gj, m) in g.iter_mut().zip(&mask[k]) {
                *gj = apply_mask(*gj, *m);
            }
        }
        let prev = net.layer_sizes[k];
        let mut ng = vec![ConcreteInterval::zero(); prev];
        for (i, out) in ng.iter_mut().enumerate() {
            let mut acc = ConcreteInterval::zero();
            for (j, gj) in g.iter().enumerate() {
                acc = acc.add(gj.scale(net.weights[k][i][j]));
            }
            *out = acc;
        }
        g = ng;
    }
    Ok(GradientVector { entries: g })
}

/// Entry-wise interval difference of the two gradients: `g_prime - g`.
pub fn gradient_diff(g: &GradientVector, g_prime: &GradientVector) -> GradientVector {
    GradientVector {
        entries: g_prime
            .entries
            .iter()
            .zip(&g.entries)
            .map(|(gp, gv)| gp.sub(*gv))
            .collect(),
    }
}

/// Smear score of one input: interval width times the largest-magnitude
/// endpoint of its gradient-difference bound.
fn smear_score(width: f64, gd: ConcreteInterval) -> f64 {
    width * gd.max_abs()
}

/// Picks the input with the maximum smear value (lowest index on ties)
/// and bisects it at the region midpoint.
pub fn smear_choose(region: &InputRegion, gdelta: &GradientVector) -> Result<SplitDecision> {
    if gdelta.entries.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: gdelta.entries.len(),
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, b) in region.bounds.iter().enumerate() {
        let mid = b.midpoint();
        if !(b.lo < mid && mid < b.hi) {
            continue; // not splittable in this dimension
        }
        let score = smear_score(b.width(), gdelta.entries[i]);
        match best {
            Some((_, s)) if s >= score => {}
            _ => best = Some((i, score)),
        }
    }
    let (input_index, _) = best.ok_or_else(|| {
        Error::NotSplittable("no input interval with positive width".into())
    })?;
    let (left, right) = bisect(region, input_index)?;
    Ok(SplitDecision {
        input_index,
        left,
        right,
    })
}

/// Splits `region` along input `i` at the representable midpoint.
pub fn bisect(region: &InputRegion, i: usize) -> Result<(InputRegion, InputRegion)> {
    let b = region.bounds[i];
    let mid = b.midpoint();
    if !(b.lo < mid && mid < b.hi) {
        return Err(Error::NotSplittable(format!(
            "input {i} interval {b} cannot be bisected"
        )));
    }
    let mut left = region.clone();
    let mut right = region.clone();
    left.bounds[i] = ConcreteInterval::new(b.lo, mid);
    right.bounds[i] = ConcreteInterval::new(mid, b.hi);
    Ok((left, right))
}
