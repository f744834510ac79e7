//! Network model, NNet ingestion, weight truncation/quantization,
//! composed-difference construction, and concrete evaluation.

use crate::interval::ConcreteInterval;
use crate::symbolic::InputRegion;
use crate::{Error, Result};

/// A fully-connected feed-forward ReLU network.
///
/// `weights[k][i][j]` is the edge from neuron `i` of layer `k` to neuron
/// `j` of layer `k+1` (0-based; the documentation follows the 1-based
/// convention). ReLU follows every affine layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub input_mins: Vec<f64>,
    pub input_maxs: Vec<f64>,
    /// Normalization means; one entry per input plus one for the output.
    pub means: Vec<f64>,
    /// Normalization ranges; one entry per input plus one for the output.
    pub ranges: Vec<f64>,
}

impl Network {
    /// Builds a network from raw matrices, with default (identity)
    /// normalization metadata.
    pub fn new(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_in = *layer_sizes
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty layer list".into()))?;
        let net = Self {
            layer_sizes,
            weights,
            biases,
            input_mins: vec![-1e12; n_in],
            input_maxs: vec![1e12; n_in],
            means: vec![0.0; n_in + 1],
            ranges: vec![1.0; n_in + 1],
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let l = self.layer_sizes.len();
        if l < 2 {
            return Err(Error::ShapeMismatch("need at least input and output layers".into()));
        }
        if self.weights.len() != l - 1 || self.biases.len() != l - 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} weight/bias layers, got {}/{}",
                l - 1,
                self.weights.len(),
                self.biases.len()
            )));
        }
        for k in 0..l - 1 {
            if self.weights[k].len() != self.layer_sizes[k] {
                return Err(Error::ShapeMismatch(format!(
                    "layer {}: expected {} weight rows, got {}",
                    k + 1,
                    self.layer_sizes[k],
                    self.weights[k].len()
                )));
            }
            for row in &self.weights[k] {
                if row.len() != self.layer_sizes[k + 1] {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {}: expected {} columns, got {}",
                        k + 1,
                        self.layer_sizes[k + 1],
                        row.len()
                    )));
                }
                if let Some(w) = row.iter().find(|w| !w.is_finite()) {
                    return Err(Error::ShapeMismatch(format!(
                        "non-finite weight {w} in layer {}",
                        k + 1
                    )));
                }
            }
            if self.biases[k].len() != self.layer_sizes[k + 1] {
                return Err(Error::ShapeMismatch(format!(
                    "layer {}: expected {} biases, got {}",
                    k + 1,
                    self.layer_sizes[k + 1],
                    self.biases[k].len()
                )));
            }
            if let Some(b) = self.biases[k].iter().find(|b| !b.is_finite()) {
                return Err(Error::ShapeMismatch(format!(
                    "non-finite bias {b} in layer {}",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight layers (affine transformations).
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Exact forward execution: ReLU after every hidden affine layer,
    /// none after the output layer.
    pub fn eval_concrete(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_size() {
            return Err(Error::DimensionMismatch {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        let last = self.num_layers() - 1;
        let mut v = x.to_vec();
        for k in 0..self.num_layers() {
            let cur = self.layer_sizes[k + 1];
            let mut next = vec![0.0; cur];
            for (j, out) in next.iter_mut().enumerate() {
                let mut z = self.biases[k][j];
                for (i, vi) in v.iter().enumerate() {
                    z += vi * self.weights[k][i][j];
                }
                *out = if k == last { z } else { z.max(0.0) };
            }
            v = next;
        }
        Ok(v)
    }

    /// Forward execution that keeps every layer's post-activation values.
    /// Entry 0 echoes the input; the last entry is the raw output.
    pub fn eval_layers(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_size() {
            return Err(Error::DimensionMismatch {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        let last = self.num_layers() - 1;
        let mut all = Vec::with_capacity(self.layer_sizes.len());
        all.push(x.to_vec());
        for k in 0..self.num_layers() {
            let prev = &all[k];
            let cur = self.layer_sizes[k + 1];
            let mut next = vec![0.0; cur];
            for (j, out) in next.iter_mut().enumerate() {
                let mut z = self.biases[k][j];
                for (i, vi) in prev.iter().enumerate() {
                    z += vi * self.weights[k][i][j];
                }
                *out = if k == last { z } else { z.max(0.0) };
            }
            all.push(next);
        }
        Ok(all)
    }

    /// Applies `(x - mean) / range` per input.
    pub fn normalize_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| (v - self.means[i]) / self.ranges[i])
            .collect()
    }

    /// Normalizes a region bound-wise (ranges are positive, so the
    /// transform is monotone per dimension).
    pub fn normalize_region(&self, region: &InputRegion) -> InputRegion {
        InputRegion::new(
            region
                .bounds
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    ConcreteInterval::new(
                        (b.lo - self.means[i]) / self.ranges[i],
                        (b.hi - self.means[i]) / self.ranges[i],
                    )
                })
                .collect(),
        )
    }

    /// Replaces every weight and bias by its IEEE-754 binary16
    /// round-to-nearest-even value, re-widened to 64 bits.
    pub fn truncate_f16(&self) -> Result<Network> {
        let mut out = self.clone();
        for (k, m) in out.weights.iter_mut().enumerate() {
            for (i, row) in m.iter_mut().enumerate() {
                for (j, w) in row.iter_mut().enumerate() {
                    let t = half::f16::from_f64(*w);
                    if !t.is_finite() {
                        return Err(Error::F16Overflow {
                            layer: k + 1,
                            row: i,
                            col: j,
                            value: *w,
                        });
                    }
                    *w = t.to_f64();
                }
            }
        }
        for (k, bs) in out.biases.iter_mut().enumerate() {
            for (j, b) in bs.iter_mut().enumerate() {
                let t = half::f16::from_f64(*b);
                if !t.is_finite() {
                    return Err(Error::F16Overflow {
                        layer: k + 1,
                        row: usize::MAX,
                        col: j,
                        value: *b,
                    });
                }
                *b = t.to_f64();
            }
        }
        Ok(out)
    }

    /// Rounds every weight and bias half-away-from-zero at the given
    /// decimal place.
    pub fn quantize_round(&self, decimals: u32) -> Network {
        let factor = 10f64.powi(decimals as i32);
        let q = |w: f64| (w * factor).round() / factor;
        let mut out = self.clone();
        for m in &mut out.weights {
            for row in m {
                for w in row {
                    *w = q(*w);
                }
            }
        }
        for bs in &mut out.biases {
            for b in bs {
                *b = q(*b);
            }
        }
        out
    }
}

/// Two structurally identical networks and their outward-widened weight
/// differences.
#[derive(Debug, Clone)]
pub struct NetworkPair {
    pub f: Network,
    pub f_prime: Network,
    /// `W'_k[i,j] - W_k[i,j]` as an interval of width <= 2 ULP.
    pub weight_delta: Vec<Vec<Vec<ConcreteInterval>>>,
    /// Per-layer bias differences, same widening.
    pub bias_delta: Vec<Vec<ConcreteInterval>>,
}

impl NetworkPair {
    pub fn new(f: Network, f_prime: Network) -> Result<Self> {
        if f.layer_sizes != f_prime.layer_sizes {
            return Err(Error::ShapeMismatch(format!(
                "layer sizes differ: {:?} vs {:?}",
                f.layer_sizes, f_prime.layer_sizes
            )));
        }
        let weight_delta = f
            .weights
            .iter()
            .zip(&f_prime.weights)
            .map(|(wk, wpk)| {
                wk.iter()
                    .zip(wpk)
                    .map(|(row, prow)| {
                        row.iter()
                            .zip(prow)
                            .map(|(&w, &wp)| {
                                ConcreteInterval::point(wp).sub(ConcreteInterval::point(w))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let bias_delta = f
            .biases
            .iter()
            .zip(&f_prime.biases)
            .map(|(bk, bpk)| {
                bk.iter()
                    .zip(bpk)
                    .map(|(&b, &bp)| ConcreteInterval::point(bp).sub(ConcreteInterval::point(b)))
                    .collect()
            })
            .collect();
        Ok(Self {
            f,
            f_prime,
            weight_delta,
            bias_delta,
        })
    }

    pub fn input_size(&self) -> usize {
        self.f.input_size()
    }

    pub fn output_size(&self) -> usize {
        self.f.output_size()
    }
}

/// Builds the single network that computes `f'(x) - f(x)`: hidden layers
/// are stacked block-diagonally and the final affine layer subtracts.
/// Used only to feed baseline single-network analysis.
pub fn compose_difference(pair: &NetworkPair) -> Network {
    let f = &pair.f;
    let fp = &pair.f_prime;
    let l = f.num_layers();

    let (layer_sizes, weights, biases) = if l == 1 {
        // No hidden layers: a single affine layer computes (W'-W)x + (b'-b).
        let m: Vec<Vec<f64>> = f.weights[0]
            .iter()
            .zip(&fp.weights[0])
            .map(|(row, prow)| row.iter().zip(prow).map(|(w, wp)| wp - w).collect())
            .collect();
        let b: Vec<f64> = f.biases[0]
            .iter()
            .zip(&fp.biases[0])
            .map(|(b, bp)| bp - b)
            .collect();
        (f.layer_sizes.clone(), vec![m], vec![b])
    } else {
        let mut layer_sizes = vec![f.input_size()];
        layer_sizes.extend((1..l).map(|k| 2 * f.layer_sizes[k]));
        layer_sizes.push(f.output_size());

        let mut weights = Vec::with_capacity(l);
        let mut biases = Vec::with_capacity(l);

        // First layer: the shared input feeds both copies side by side.
        let h1 = f.layer_sizes[1];
        let mut m0 = vec![vec![0.0; 2 * h1]; f.input_size()];
        for (i, row) in m0.iter_mut().enumerate() {
            for j in 0..h1 {
                row[j] = f.weights[0][i][j];
                row[h1 + j] = fp.weights[0][i][j];
            }
        }
        weights.push(m0);
        let mut b0 = f.biases[0].clone();
        b0.extend_from_slice(&fp.biases[0]);
        biases.push(b0);

        // Interior layers: block-diagonal stacking.
        for k in 1..l - 1 {
            let (prev, cur) = (f.layer_sizes[k], f.layer_sizes[k + 1]);
            let mut m = vec![vec![0.0; 2 * cur]; 2 * prev];
            for i in 0..prev {
                for j in 0..cur {
                    m[i][j] = f.weights[k][i][j];
                    m[prev + i][cur + j] = fp.weights[k][i][j];
                }
            }
            weights.push(m);
            let mut b = f.biases[k].clone();
            b.extend_from_slice(&fp.biases[k]);
            biases.push(b);
        }

        // Output layer subtracts: f'(x) - f(x).
        let k = l - 1;
        let (prev, cur) = (f.layer_sizes[k], f.output_size());
        let mut m = vec![vec![0.0; cur]; 2 * prev];
        for i in 0..prev {
            for j in 0..cur {
                m[i][j] = -f.weights[k][i][j];
                m[prev + i][j] = fp.weights[k][i][j];
            }
        }
        weights.push(m);
        biases.push(
            f.biases[k]
                .iter()
                .zip(&fp.biases[k])
                .map(|(b, bp)| bp - b)
                .collect(),
        );

        (layer_sizes, weights, biases)
    };

    let mut net = Network::new(layer_sizes, weights, biases).expect("composed shapes are valid");
    net.input_mins = f.input_mins.clone();
    net.input_maxs = f.input_maxs.clone();
    net.means = f.means.clone();
    net.ranges = f.ranges.clone();
    net
}

fn parse_nums<T: std::str::FromStr>(line: &str, line_no: usize) -> Result<Vec<T>> {
    line.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>().map_err(|_| Error::NnetParse {
                line: line_no,
                msg: format!("cannot parse '{t}'"),
            })
        })
        .collect()
}

/// Parses the NNet text format.
///
/// Layout: optional `//` comment lines; header counts; layer sizes; a
/// deprecated flag; input minimums, maximums, means and ranges (the last
/// two with one extra entry for the output); then per layer the weight
/// matrix one output-neuron row per line followed by one bias per line.
pub fn parse_nnet(text: &str) -> Result<Network> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("//"));
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::NnetParse {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    };

    let (ln, header) = next("header")?;
    let header: Vec<usize> = parse_nums(header, ln)?;
    if header.len() != 4 {
        return Err(Error::NnetParse {
            line: ln,
            msg: format!("expected 4 header fields, got {}", header.len()),
        });
    }
    let (num_layers, input_size, output_size, _max_layer_size) =
        (header[0], header[1], header[2], header[3]);

    let (ln, sizes) = next("layer sizes")?;
    let layer_sizes: Vec<usize> = parse_nums(sizes, ln)?;
    if layer_sizes.len() != num_layers + 1 {
        return Err(Error::NnetParse {
            line: ln,
            msg: format!(
                "expected {} layer sizes, got {}",
                num_layers + 1,
                layer_sizes.len()
            ),
        });
    }
    if layer_sizes[0] != input_size || layer_sizes[num_layers] != output_size {
        return Err(Error::NnetParse {
            line: ln,
            msg: "layer sizes disagree with header input/output counts".into(),
        });
    }

    let _ = next("deprecated flag")?;

    let mut meta = |what: &str, want: usize| -> Result<Vec<f64>> {
        let (ln, l) = next(what)?;
        let v: Vec<f64> = parse_nums(l, ln)?;
        if v.len() != want {
            return Err(Error::NnetParse {
                line: ln,
                msg: format!("expected {want} {what} entries, got {}", v.len()),
            });
        }
        Ok(v)
    };
    let input_mins = meta("input minimums", input_size)?;
    let input_maxs = meta("input maximums", input_size)?;
    let means = meta("means", input_size + 1)?;
    let ranges = meta("ranges", input_size + 1)?;

    let mut weights = Vec::with_capacity(num_layers);
    let mut biases = Vec::with_capacity(num_layers);
    for k in 0..num_layers {
        let rows = layer_sizes[k];
        let cols = layer_sizes[k + 1];
        let mut m = vec![vec![0.0f64; cols]; rows];
        for j in 0..cols {
            let (ln, l) = next("weight row")?;
            let row: Vec<f64> = parse_nums(l, ln)?;
            if row.len() != rows {
                return Err(Error::NnetParse {
                    line: ln,
                    msg: format!(
                        "layer {}: weight row has {} entries, expected {}",
                        k + 1,
                        row.len(),
                        rows
                    ),
                });
            }
            for (i, w) in row.into_iter().enumerate() {
                if !w.is_finite() {
                    return Err(Error::NnetParse {
                        line: ln,
                        msg: format!("non-finite weight {w}"),
                    });
                }
                m[i][j] = w;
            }
        }
        let mut b = vec![0.0f64; cols];
        for bj in b.iter_mut() {
            let (ln, l) = next("bias")?;
            let v: Vec<f64> = parse_nums(l, ln)?;
            if v.len() != 1 {
                return Err(Error::NnetParse {
                    line: ln,
                    msg: format!("expected a single bias value, got {}", v.len()),
                });
            }
            if !v[0].is_finite() {
                return Err(Error::NnetParse {
                    line: ln,
                    msg: format!("non-finite bias {}", v[0]),
                });
            }
            *bj = v[0];
        }
        weights.push(m);
        biases.push(b);
    }

    let mut net = Network::new(layer_sizes, weights, biases).map_err(|e| Error::NnetParse {
        line: 0,
        msg: e.to_string(),
    })?;
    net.input_mins = input_mins;
    net.input_maxs = input_maxs;
    net.means = means;
    net.ranges = ranges;
    Ok(net)
}

/// Serializes back to NNet text; `parse_nnet` round-trips bit-exactly.
pub fn to_nnet_string(net: &Network) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let max = net.layer_sizes.iter().copied().max().unwrap_or(0);
    let _ = writeln!(
        s,
        "{},{},{},{}",
        net.num_layers(),
        net.input_size(),
        net.output_size(),
        max
    );
    let sizes: Vec<String> = net.layer_sizes.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "{}", sizes.join(","));
    let _ = writeln!(s, "0");
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let _ = writeln!(s, "{}", join(&net.input_mins));
    let _ = writeln!(s, "{}", join(&net.input_maxs));
    let _ = writeln!(s, "{}", join(&net.means));
    let _ = writeln!(s, "{}", join(&net.ranges));
    for k in 0..net.num_layers() {
        for j in 0..net.layer_sizes[k + 1] {
            let row: Vec<String> = (0..net.layer_sizes[k])
                .map(|i| format!("{}", net.weights[k][i][j]))
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        for j in 0..net.layer_sizes[k + 1] {
            let _ = writeln!(s, "{}", net.biases[k][j]);
        }
    }
    s
}
