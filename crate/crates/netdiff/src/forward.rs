//! The differential forward pass: the affine delta transformer and the
//! nine-case ReLU delta transformer.
//!
//! For each layer the pass maintains three symbolic tracks: the value of
//! the first network, the value of the second, and their difference. The
//! difference of a neuron pair is assembled from a "new quantity"
//! (value of the source neuron times the edge-weight difference) and an
//! "old quantity" (difference accumulated so far times the second
//! network's edge weight). Differences stay symbolic through linear
//! activation states and are concretized only where a non-linear state
//! forces it.

use crate::interval::{mul_down, ConcreteInterval};
use crate::network::{Network, NetworkPair};
use crate::symbolic::{InputRegion, SymbolicInterval};
use crate::{Error, Result};

/// Per-neuron activation state recorded during the forward pass.
///
/// Doubles as the gradient interval of the ReLU: inactive is [0,0],
/// active is [1,1], mixed is [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mask {
    Inactive,
    Active,
    Mixed,
}

/// Activation states for every hidden neuron: `masks[k][j]` is the state
/// of the j-th neuron of hidden layer k.
pub type MaskMatrix = Vec<Vec<Mask>>;

/// Classifies a concretized pre-activation bound.
///
/// The boundary belongs to the linear sides: an upper bound of exactly 0
/// is inactive and a lower bound of exactly 0 is active, since ReLU
/// agrees with both the zero function and the identity there.
#[inline]
pub fn classify(c: ConcreteInterval) -> Mask {
    if c.hi <= 0.0 {
        Mask::Inactive
    } else if c.lo >= 0.0 {
        Mask::Active
    } else {
        Mask::Mixed
    }
}

/// A symbolic bound plus its cached concretization.
#[derive(Debug, Clone)]
pub struct BoundedSym {
    pub sym: SymbolicInterval,
    pub conc: ConcreteInterval,
}

impl BoundedSym {
    fn constant(dim: usize, c: ConcreteInterval) -> Self {
        Self {
            sym: SymbolicInterval::constant(dim, c),
            conc: c,
        }
    }
}

/// The three symbolic tracks for one layer.
#[derive(Debug, Clone)]
pub struct LayerState {
    pub s: Vec<BoundedSym>,
    pub s_prime: Vec<BoundedSym>,
    pub s_delta: Vec<BoundedSym>,
}

impl LayerState {
    /// Input-layer state: identity expressions for both networks, zero
    /// for the difference.
    pub fn from_region(region: &InputRegion) -> Self {
        let dim = region.dim();
        let ident: Vec<BoundedSym> = (0..dim)
            .map(|i| BoundedSym {
                sym: SymbolicInterval::identity(dim, i),
                conc: region.bounds[i],
            })
            .collect();
        let zero: Vec<BoundedSym> = (0..dim)
            .map(|_| BoundedSym::constant(dim, ConcreteInterval::zero()))
            .collect();
        Self {
            s: ident.clone(),
            s_prime: ident,
            s_delta: zero,
        }
    }
}

/// Output of the ReLU transformer for one neuron pair.
#[derive(Debug, Clone)]
pub struct ReluOutput {
    pub s: BoundedSym,
    pub s_prime: BoundedSym,
    pub s_delta: BoundedSym,
    pub mask: Mask,
    pub mask_prime: Mask,
}

/// Result of a full differential forward pass.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    /// Concretized output difference per output neuron (no ReLU on the
    /// output layer).
    pub output_delta: Vec<ConcreteInterval>,
    pub output_s: Vec<ConcreteInterval>,
    pub output_s_prime: Vec<ConcreteInterval>,
    pub mask: MaskMatrix,
    pub mask_prime: MaskMatrix,
    /// Concretized post-ReLU difference per hidden layer.
    pub delta_trace: Vec<Vec<ConcreteInterval>>,
}

/// Bilinear corner bound for value-interval times weight-interval,
/// assembled from scaling and hull.
#[inline]
fn interval_product(a: ConcreteInterval, w: ConcreteInterval) -> ConcreteInterval {
    if w.lo == w.hi {
        a.scale(w.lo)
    } else {
        a.scale(w.lo).hull(a.scale(w.hi))
    }
}

/// Post-ReLU value range of a mixed-state neuron.
///
/// The upper bound concretizes to the pre-activation upper bound. The
/// lower bound keeps the slope-relaxed value `l * u/(u-l)`, which any
/// relaxation slope in [0,1] makes sound; this matches how the bound
/// bookkeeping of the value tracks feeds the difference computation.
#[inline]
fn mixed_value_range(c: ConcreteInterval) -> ConcreteInterval {
    let lam = (c.hi / (c.hi - c.lo)).clamp(0.0, 1.0);
    ConcreteInterval::new(mul_down(lam, c.lo).min(0.0), c.hi)
}

fn value_out(sym: &SymbolicInterval, conc: ConcreteInterval, mask: Mask, dim: usize) -> BoundedSym {
    match mask {
        Mask::Inactive => BoundedSym::constant(dim, ConcreteInterval::zero()),
        Mask::Active => BoundedSym {
            sym: sym.clone(),
            conc,
        },
        Mask::Mixed => BoundedSym::constant(dim, mixed_value_range(conc)),
    }
}

/// The nine-case over-approximation of `ReLU(n') - ReLU(n)`.
///
/// `s`, `s_prime` and `s_delta` are the pre-activation bounds of the
/// neuron in the first network, in the second network, and of their
/// difference.
pub fn relu_transform(
    s: &SymbolicInterval,
    s_prime: &SymbolicInterval,
    s_delta: &SymbolicInterval,
    region: &InputRegion,
) -> ReluOutput {
    let dim = s.dim();
    let c = s.concretize(region);
    let cp = s_prime.concretize(region);
    let cd = s_delta.concretize(region);
    let mask = classify(c);
    let mask_prime = classify(cp);

    let s_out = value_out(s, c, mask, dim);
    let sp_out = value_out(s_prime, cp, mask_prime, dim);

    let s_delta_out = match (mask, mask_prime) {
        (Mask::Inactive, Mask::Inactive) => BoundedSym::constant(dim, ConcreteInterval::zero()),
        (Mask::Inactive, Mask::Active) => BoundedSym {
            sym: s_prime.clone(),
            conc: cp,
        },
        (Mask::Inactive, Mask::Mixed) => {
            BoundedSym::constant(dim, ConcreteInterval::new(0.0, cp.hi))
        }
        (Mask::Active, Mask::Inactive) => BoundedSym {
            sym: s.negate(),
            conc: c.neg(),
        },
        (Mask::Active, Mask::Active) => BoundedSym {
            sym: s_delta.clone(),
            conc: cd,
        },
        (Mask::Active, Mask::Mixed) => {
            // max(-n, d) evaluated endpoint-wise.
            let lo = (-c.hi).max(cd.lo);
            let hi = (-c.lo).max(cd.hi);
            BoundedSym::constant(dim, ConcreteInterval::new(lo, hi))
        }
        (Mask::Mixed, Mask::Inactive) => {
            BoundedSym::constant(dim, ConcreteInterval::new(-c.hi, 0.0))
        }
        (Mask::Mixed, Mask::Active) => {
            // min(n', d) evaluated endpoint-wise.
            let lo = cp.lo.min(cd.lo);
            let hi = cd.hi.min(cp.hi);
            BoundedSym::constant(dim, ConcreteInterval::new(lo, hi))
        }
        (Mask::Mixed, Mask::Mixed) => {
            let iv = if cd.lo >= 0.0 {
                // n' >= n everywhere, so the difference cannot be negative.
                ConcreteInterval::new(0.0, cd.hi.min(cp.hi))
            } else if cd.hi <= 0.0 {
                ConcreteInterval::new(cd.lo.max(-c.hi), 0.0)
            } else {
                ConcreteInterval::new(cd.lo.max(-c.hi), cd.hi.min(cp.hi))
            };
            BoundedSym::constant(dim, iv)
        }
    };

    ReluOutput {
        s: s_out,
        s_prime: sp_out,
        s_delta: s_delta_out,
        mask,
        mask_prime,
    }
}

/// The affine delta transformer for layer `k` (0-based weight layer).
///
/// Per incoming edge the difference gains the new quantity
/// `S(n_{k-1,i}) * WΔ_k[i,j]` (concretized source value times the widened
/// weight difference) and the old quantity `SΔ(n_{k-1,i}) * W'_k[i,j]`
/// (kept symbolic). Biases contribute as edges from a constant-1 input.
pub fn affine_delta(
    prev: &LayerState,
    pair: &NetworkPair,
    k: usize,
    region: &InputRegion,
) -> Vec<BoundedSym> {
    let dim = region.dim();
    let cur = pair.f.layer_sizes[k + 1];
    let mut out = Vec::with_capacity(cur);
    for j in 0..cur {
        let mut acc = SymbolicInterval::zero(dim);
        for i in 0..pair.f.layer_sizes[k] {
            let wd = pair.weight_delta[k][i][j];
            if wd.lo != 0.0 || wd.hi != 0.0 {
                acc.add_const(interval_product(prev.s[i].conc, wd));
            }
            acc.scale_add(&prev.s_delta[i].sym, pair.f_prime.weights[k][i][j]);
        }
        acc.add_const(pair.bias_delta[k][j]);
        let conc = acc.concretize(region);
        out.push(BoundedSym { sym: acc, conc });
    }
    out
}

fn affine_value(
    prev: &[BoundedSym],
    weights: &[Vec<f64>],
    biases: &[f64],
    region: &InputRegion,
) -> Vec<BoundedSym> {
    let dim = region.dim();
    let cur = biases.len();
    let mut out = Vec::with_capacity(cur);
    for j in 0..cur {
        let mut acc = SymbolicInterval::zero(dim);
        for (i, p) in prev.iter().enumerate() {
            acc.scale_add(&p.sym, weights[i][j]);
        }
        acc.add_const(ConcreteInterval::point(biases[j]));
        let conc = acc.concretize(region);
        out.push(BoundedSym { sym: acc, conc });
    }
    out
}

/// Runs the full differential pass: affine delta plus ReLU transform per
/// hidden layer; the output layer returns the affine difference without
/// ReLU.
pub fn forward_pass(pair: &NetworkPair, region: &InputRegion) -> Result<ForwardResult> {
    if region.dim() != pair.input_size() {
        return Err(Error::DimensionMismatch {
            expected: pair.input_size(),
            got: region.dim(),
        });
    }
    let layers = pair.f.num_layers();
    let mut state = LayerState::from_region(region);
    let mut mask = Vec::with_capacity(layers - 1);
    let mut mask_prime = Vec::with_capacity(layers - 1);
    let mut delta_trace = Vec::with_capacity(layers - 1);

    for k in 0..layers {
        let s_in = affine_value(&state.s, &pair.f.weights[k], &pair.f.biases[k], region);
        let sp_in = affine_value(
            &state.s_prime,
            &pair.f_prime.weights[k],
            &pair.f_prime.biases[k],
            region,
        );
        let sd_in = affine_delta(&state, pair, k, region);

        if k == layers - 1 {
            return Ok(ForwardResult {
                output_delta: sd_in.iter().map(|b| b.conc).collect(),
                output_s: s_in.iter().map(|b| b.conc).collect(),
                output_s_prime: sp_in.iter().map(|b| b.conc).collect(),
                mask,
                mask_prime,
                delta_trace,
            });
        }

        let cur = s_in.len();
        let mut ns = Vec::with_capacity(cur);
        let mut nsp = Vec::with_capacity(cur);
        let mut nsd = Vec::with_capacity(cur);
        let mut mk = Vec::with_capacity(cur);
        let mut mkp = Vec::with_capacity(cur);
        for j in 0..cur {
            let r = relu_transform(&s_in[j].sym, &sp_in[j].sym, &sd_in[j].sym, region);
            mk.push(r.mask);
            mkp.push(r.mask_prime);
            ns.push(r.s);
            nsp.push(r.s_prime);
            nsd.push(r.s_delta);
        }
        delta_trace.push(nsd.iter().map(|b| b.conc).collect());
        mask.push(mk);
        mask_prime.push(mkp);
        state = LayerState {
            s: ns,
            s_prime: nsp,
            s_delta: nsd,
        };
    }
    unreachable!("loop returns at the output layer")
}

/// Result of single-network symbolic interval analysis.
#[derive(Debug, Clone)]
pub struct SingleForwardResult {
    pub output: Vec<ConcreteInterval>,
    pub mask: MaskMatrix,
}

/// Symbolic interval analysis of one network: the machinery the
/// composed-difference baseline runs on. Mixed-state neurons concretize
/// to `[0, upper]`.
pub fn single_net_forward(net: &Network, region: &InputRegion) -> Result<SingleForwardResult> {
    if region.dim() != net.input_size() {
        return Err(Error::DimensionMismatch {
            expected: net.input_size(),
            got: region.dim(),
        });
    }
    let dim = region.dim();
    let layers = net.num_layers();
    let mut cur: Vec<BoundedSym> = (0..dim)
        .map(|i| BoundedSym {
            sym: SymbolicInterval::identity(dim, i),
            conc: region.bounds[i],
        })
        .collect();
    let mut mask = Vec::with_capacity(layers - 1);

    for k in 0..layers {
        let pre = affine_value(&cur, &net.weights[k], &net.biases[k], region);
        if k == layers - 1 {
            return Ok(SingleForwardResult {
                output: pre.iter().map(|b| b.conc).collect(),
                mask,
            });
        }
        let mut mk = Vec::with_capacity(pre.len());
        cur = pre
            .into_iter()
            .map(|b| {
                let m = classify(b.conc);
                mk.push(m);
                match m {
                    Mask::Inactive => BoundedSym::constant(dim, ConcreteInterval::zero()),
                    Mask::Active => b,
                    Mask::Mixed => {
                        BoundedSym::constant(dim, ConcreteInterval::new(0.0, b.conc.hi))
                    }
                }
            })
            .collect();
        mask.push(mk);
    }
    unreachable!("loop returns at the output layer")
}
