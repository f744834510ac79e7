//! The driver loop: forward pass, epsilon check, counterexample
//! sampling, gradient-guided refinement, and parallel branch-and-bound
//! over subregions.

use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forward::{forward_pass, single_net_forward, MaskMatrix};
use crate::interval::ConcreteInterval;
use crate::network::{compose_difference, Network, NetworkPair};
use crate::refine::{gradient, gradient_diff, smear_choose, GradientVector};
use crate::symbolic::InputRegion;
use crate::{Error, Result};

/// Default seed for counterexample sampling.
pub const DEFAULT_SEED: u64 = 0x5EED_D1FF;

/// How the output difference is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Lock-step analysis of the pair with difference tracking.
    Delta,
    /// Single-network analysis of the composed f'(x) - f(x) network.
    ComposedBaseline,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Mode::Delta),
            "composed-baseline" => Ok(Mode::ComposedBaseline),
            other => Err(Error::InvalidQuery(format!("unknown mode '{other}'"))),
        }
    }
}

/// A differential verification problem.
#[derive(Debug, Clone)]
pub struct VerificationQuery {
    pub pair: NetworkPair,
    pub region: InputRegion,
    /// Output difference bound to prove (strict, in output units).
    pub epsilon: f64,
    /// Watched output indices; empty means all outputs.
    pub outputs: Vec<usize>,
    pub max_depth: u32,
    pub timeout: Option<Duration>,
    /// Random samples per region during counterexample search.
    pub sample_count: usize,
    pub rng_seed: u64,
    pub mode: Mode,
    /// Record the leaf subregions in the verdict stats (diagnostics).
    pub record_leaves: bool,
}

impl VerificationQuery {
    pub fn new(pair: NetworkPair, region: InputRegion, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidQuery(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if region.dim() != pair.input_size() {
            return Err(Error::DimensionMismatch {
                expected: pair.input_size(),
                got: region.dim(),
            });
        }
        Ok(Self {
            pair,
            region,
            epsilon,
            outputs: Vec::new(),
            max_depth: 40,
            timeout: None,
            sample_count: 1024,
            rng_seed: DEFAULT_SEED,
            mode: Mode::Delta,
            record_leaves: false,
        })
    }

    /// Watched outputs, resolved against the network.
    pub fn watched_outputs(&self) -> Vec<usize> {
        if self.outputs.is_empty() {
            (0..self.pair.output_size()).collect()
        } else {
            self.outputs.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        for &j in &self.outputs {
            if j >= self.pair.output_size() {
                return Err(Error::InvalidQuery(format!(
                    "output index {j} out of range (network has {} outputs)",
                    self.pair.output_size()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Verified,
    Falsified,
    Unknown,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Verified => write!(f, "verified"),
            Status::Falsified => write!(f, "falsified"),
            Status::Unknown => write!(f, "unknown"),
        }
    }
}

/// A concrete input violating the bound, with both outputs attached.
#[derive(Debug, Clone)]
pub struct Witness {
    pub input: Vec<f64>,
    pub f_output: Vec<f64>,
    pub f_prime_output: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    /// Subregions processed (the root counts as one).
    pub subregions: u64,
    pub max_depth_reached: u32,
    pub wall_time: Duration,
    /// Hull of the per-output difference bounds over all leaf regions.
    pub delta_hull: Option<Vec<ConcreteInterval>>,
    /// Leaf subregions, if requested.
    pub leaves: Option<Vec<InputRegion>>,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: Status,
    pub witness: Option<Witness>,
    pub stats: Stats,
}

fn region_fingerprint(region: &InputRegion) -> u64 {
    // FNV-1a over the endpoint bit patterns: stable across runs and
    // independent of work scheduling.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: f64| {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for b in &region.bounds {
        eat(b.lo);
        eat(b.hi);
    }
    h
}

/// Evaluates both networks at region corners (capped at 2^12), the
/// center, and seeded uniform random points; returns the first input
/// where a watched output difference reaches epsilon.
pub fn sample_counterexample(query: &VerificationQuery, region: &InputRegion) -> Option<Witness> {
    let watched = query.watched_outputs();
    let check = |x: &[f64]| -> Option<Witness> {
        let f_output = query.pair.f.eval_concrete(x).ok()?;
        let f_prime_output = query.pair.f_prime.eval_concrete(x).ok()?;
        let delta: Vec<f64> = f_prime_output
            .iter()
            .zip(&f_output)
            .map(|(a, b)| a - b)
            .collect();
        if watched.iter().any(|&j| delta[j].abs() >= query.epsilon) {
            Some(Witness {
                input: x.to_vec(),
                f_output,
                f_prime_output,
                delta,
            })
        } else {
            None
        }
    };

    let dim = region.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(query.rng_seed ^ region_fingerprint(region));

    if let Some(w) = check(&region.center()) {
        return Some(w);
    }

    const CORNER_CAP: usize = 1 << 12;
    if dim <= 12 {
        let mut x = vec![0.0; dim];
        for bits in 0..(1usize << dim) {
            for (i, b) in region.bounds.iter().enumerate() {
                x[i] = if bits >> i & 1 == 1 { b.hi } else { b.lo };
            }
            if let Some(w) = check(&x) {
                return Some(w);
            }
        }
    } else {
        let mut x = vec![0.0; dim];
        for _ in 0..CORNER_CAP {
            for (i, b) in region.bounds.iter().enumerate() {
                x[i] = if rng.gen::<bool>() { b.hi } else { b.lo };
            }
            if let Some(w) = check(&x) {
                return Some(w);
            }
        }
    }

    let mut x = vec![0.0; dim];
    for _ in 0..query.sample_count {
        for (i, b) in region.bounds.iter().enumerate() {
            x[i] = if b.lo < b.hi { rng.gen_range(b.lo..=b.hi) } else { b.lo };
        }
        if let Some(w) = check(&x) {
            return Some(w);
        }
    }
    None
}

enum StepOutcome {
    Verified(Vec<ConcreteInterval>),
    Falsified(Witness),
    /// Depth cap reached or region not splittable.
    Exhausted(Vec<ConcreteInterval>),
    Split(InputRegion, InputRegion),
}

struct Ctx<'a> {
    query: &'a VerificationQuery,
    watched: Vec<usize>,
    /// Present in composed-baseline mode.
    composed: Option<Network>,
}

impl<'a> Ctx<'a> {
    fn new(query: &'a VerificationQuery) -> Self {
        let composed = match query.mode {
            Mode::Delta => None,
            Mode::ComposedBaseline => Some(compose_difference(&query.pair)),
        };
        Self {
            query,
            watched: query.watched_outputs(),
            composed,
        }
    }

    /// Index of the watched output whose bound exceeds epsilon by the
    /// largest margin; refinement back-propagates from it.
    fn refinement_output(&self, bounds: &[ConcreteInterval]) -> usize {
        let mut best = self.watched[0];
        let mut best_margin = f64::NEG_INFINITY;
        for &j in &self.watched {
            let margin = bounds[j].max_abs() - self.query.epsilon;
            if margin > best_margin {
                best_margin = margin;
                best = j;
            }
        }
        best
    }

    /// Smear score vector for refinement: the gradient difference in
    /// delta mode, the plain gradient interval in baseline mode.
    fn score_vector(
        &self,
        bounds: &[ConcreteInterval],
        masks: &(MaskMatrix, MaskMatrix),
    ) -> Result<GradientVector> {
        let oi = self.refinement_output(bounds);
        match self.query.mode {
            Mode::Delta => {
                let g = gradient(&self.query.pair.f, &masks.0, oi)?;
                let gp = gradient(&self.query.pair.f_prime, &masks.1, oi)?;
                Ok(gradient_diff(&g, &gp))
            }
            Mode::ComposedBaseline => {
                let net = self.composed.as_ref().expect("composed net present");
                gradient(net, &masks.0, oi)
            }
        }
    }

    fn step(&self, region: &InputRegion, depth: u32) -> Result<StepOutcome> {
        let q = self.query;
        let eps = q.epsilon;

        let (bounds, masks) = match q.mode {
            Mode::Delta => {
                let r = forward_pass(&q.pair, region)?;
                (r.output_delta, (r.mask, r.mask_prime))
            }
            Mode::ComposedBaseline => {
                let net = self.composed.as_ref().expect("composed net present");
                let r = single_net_forward(net, region)?;
                (r.output, (r.mask, MaskMatrix::new()))
            }
        };

        let ok = self
            .watched
            .iter()
            .all(|&j| bounds[j].lo > -eps && bounds[j].hi < eps);
        if ok {
            return Ok(StepOutcome::Verified(bounds));
        }

        if let Some(w) = sample_counterexample(q, region) {
            return Ok(StepOutcome::Falsified(w));
        }

        if depth >= q.max_depth {
            return Ok(StepOutcome::Exhausted(bounds));
        }

        match smear_choose(region, &self.score_vector(&bounds, &masks)?) {
            Ok(split) => Ok(StepOutcome::Split(split.left, split.right)),
            Err(Error::NotSplittable(_)) => Ok(StepOutcome::Exhausted(bounds)),
            Err(e) => Err(e),
        }
    }
}

struct QueueState {
    stack: Vec<(InputRegion, u32)>,
    active: usize,
}

struct Shared {
    state: Mutex<QueueState>,
    cv: Condvar,
    stop: AtomicBool,
    timed_out: AtomicBool,
    any_unknown: AtomicBool,
    subregions: AtomicU64,
    max_depth_seen: AtomicU32,
    witness: Mutex<Option<Witness>>,
    hull: Mutex<Option<Vec<ConcreteInterval>>>,
    leaves: Mutex<Vec<InputRegion>>,
    error: Mutex<Option<Error>>,
}

impl Shared {
    fn record_leaf(&self, bounds: &[ConcreteInterval], region: &InputRegion, record_leaves: bool) {
        let mut h = self.hull.lock().unwrap();
        match h.as_mut() {
            None => *h = Some(bounds.to_vec()),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(bounds) {
                    *a = a.hull(*b);
                }
            }
        }
        drop(h);
        if record_leaves {
            self.leaves.lock().unwrap().push(region.clone());
        }
    }
}

fn worker(ctx: &Ctx<'_>, shared: &Shared, deadline: Option<Instant>) {
    loop {
        // Pop one item, or exit when the queue has drained and nobody is
        // still producing.
        let item = {
            let mut st = shared.state.lock().unwrap();
            loop {
                if shared.stop.load(Ordering::SeqCst) {
                    st.stack.clear();
                    shared.cv.notify_all();
                    return;
                }
                if let Some(deadline) = deadline {
                    if Instant::now() >= deadline {
                        shared.timed_out.store(true, Ordering::SeqCst);
                        shared.stop.store(true, Ordering::SeqCst);
                        st.stack.clear();
                        shared.cv.notify_all();
                        return;
                    }
                }
                if let Some(it) = st.stack.pop() {
                    st.active += 1;
                    break it;
                }
                if st.active == 0 {
                    shared.cv.notify_all();
                    return;
                }
                st = shared.cv.wait(st).unwrap();
            }
        };

        let (region, depth) = item;
        shared.subregions.fetch_add(1, Ordering::Relaxed);
        shared.max_depth_seen.fetch_max(depth, Ordering::Relaxed);

        let mut children = None;
        match ctx.step(&region, depth) {
            Ok(StepOutcome::Verified(bounds)) => {
                shared.record_leaf(&bounds, &region, ctx.query.record_leaves);
            }
            Ok(StepOutcome::Falsified(w)) => {
                *shared.witness.lock().unwrap() = Some(w);
                shared.stop.store(true, Ordering::SeqCst);
            }
            Ok(StepOutcome::Exhausted(bounds)) => {
                shared.any_unknown.store(true, Ordering::SeqCst);
                shared.record_leaf(&bounds, &region, ctx.query.record_leaves);
            }
            Ok(StepOutcome::Split(left, right)) => children = Some((left, right)),
            Err(e) => {
                *shared.error.lock().unwrap() = Some(e);
                shared.stop.store(true, Ordering::SeqCst);
            }
        }

        let mut st = shared.state.lock().unwrap();
        if let Some((left, right)) = children {
            // LIFO order gives each worker a depth-first bias, bounding
            // the queue size.
            st.stack.push((right, depth + 1));
            st.stack.push((left, depth + 1));
        }
        st.active -= 1;
        shared.cv.notify_all();
    }
}

fn run_queue(
    query: &VerificationQuery,
    initial: Vec<(InputRegion, u32)>,
    workers: usize,
) -> Result<Verdict> {
    query.validate()?;
    let started = Instant::now();
    let deadline = query.timeout.map(|t| started + t);
    let ctx = Ctx::new(query);
    let shared = Shared {
        state: Mutex::new(QueueState {
            stack: initial,
            active: 0,
        }),
        cv: Condvar::new(),
        stop: AtomicBool::new(false),
        timed_out: AtomicBool::new(false),
        any_unknown: AtomicBool::new(false),
        subregions: AtomicU64::new(0),
        max_depth_seen: AtomicU32::new(0),
        witness: Mutex::new(None),
        hull: Mutex::new(None),
        leaves: Mutex::new(Vec::new()),
        error: Mutex::new(None),
    };

    let workers = workers.max(1);
    if workers == 1 {
        worker(&ctx, &shared, deadline);
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| worker(&ctx, &shared, deadline));
            }
        });
    }

    if let Some(e) = shared.error.lock().unwrap().take() {
        return Err(e);
    }

    let witness = shared.witness.lock().unwrap().take();
    let status = if witness.is_some() {
        Status::Falsified
    } else if shared.timed_out.load(Ordering::SeqCst) || shared.any_unknown.load(Ordering::SeqCst)
    {
        Status::Unknown
    } else {
        Status::Verified
    };
    let leaves = if query.record_leaves {
        Some(std::mem::take(&mut *shared.leaves.lock().unwrap()))
    } else {
        None
    };
    let delta_hull = shared.hull.lock().unwrap().clone();
    Ok(Verdict {
        status,
        witness,
        stats: Stats {
            subregions: shared.subregions.load(Ordering::Relaxed),
            max_depth_reached: shared.max_depth_seen.load(Ordering::Relaxed),
            wall_time: started.elapsed(),
            delta_hull,
            leaves,
        },
    })
}

/// Checks one region at the given starting depth (sequentially).
pub fn check_region(query: &VerificationQuery, region: &InputRegion, depth: u32) -> Result<Verdict> {
    run_queue(query, vec![(region.clone(), depth)], 1)
}

/// Drives the full verification over a shared work queue.
///
/// The status (not timing or stats) is independent of the worker count;
/// falsification short-circuits all workers.
pub fn verify(query: &VerificationQuery, workers: usize) -> Result<Verdict> {
    run_queue(query, vec![(query.region.clone(), 0)], workers)
}
