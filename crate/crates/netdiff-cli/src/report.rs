//! JSON verification report: status, witness, bounds, stats, and a full
//! echo of the query so a run can be reproduced.

use serde::{Deserialize, Serialize};

use netdiff::{Verdict, VerificationQuery};

use crate::QueryArgs;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessReport>,
    /// Hull of the per-output difference bounds over the processed
    /// leaf regions, as [lo, hi] pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_delta_hull: Option<Vec<[f64; 2]>>,
    pub stats: StatsReport,
    pub query: QueryEcho,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct WitnessReport {
    pub input: Vec<f64>,
    pub f_output: Vec<f64>,
    pub f_prime_output: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct StatsReport {
    pub subregions: u64,
    pub max_depth_reached: u32,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct QueryEcho {
    pub net1: String,
    pub net2: String,
    pub region: Vec<[f64; 2]>,
    pub epsilon: f64,
    pub output_indices: Vec<usize>,
    pub max_depth: u32,
    pub timeout_s: f64,
    pub threads: usize,
    pub samples: usize,
    pub seed: u64,
    pub mode: String,
    pub normalize: bool,
    pub fast_math: bool,
}

impl Report {
    pub fn new(args: &QueryArgs, mode: &str, query: &VerificationQuery, verdict: &Verdict) -> Self {
        Report {
            status: verdict.status.to_string(),
            witness: verdict.witness.as_ref().map(|w| WitnessReport {
                input: w.input.clone(),
                f_output: w.f_output.clone(),
                f_prime_output: w.f_prime_output.clone(),
                delta: w.delta.clone(),
            }),
            output_delta_hull: verdict
                .stats
                .delta_hull
                .as_ref()
                .map(|h| h.iter().map(|iv| [iv.lo, iv.hi]).collect()),
            stats: StatsReport {
                subregions: verdict.stats.subregions,
                max_depth_reached: verdict.stats.max_depth_reached,
                wall_time_s: verdict.stats.wall_time.as_secs_f64(),
            },
            query: QueryEcho {
                net1: args.net1.display().to_string(),
                net2: args.net2.display().to_string(),
                region: query.region.bounds.iter().map(|b| [b.lo, b.hi]).collect(),
                epsilon: query.epsilon,
                output_indices: query.outputs.clone(),
                max_depth: query.max_depth,
                timeout_s: args.timeout,
                threads: args.threads,
                samples: query.sample_count,
                seed: query.rng_seed,
                mode: mode.to_string(),
                normalize: args.normalize,
                fast_math: args.fast_math,
            },
        }
    }

    pub fn render_text(&self) -> String {
        let mut s = format!("status: {}", self.status);
        if let Some(h) = &self.output_delta_hull {
            let parts: Vec<String> = h.iter().map(|[l, u]| format!("[{l}, {u}]")).collect();
            s.push_str(&format!("\noutput delta hull: {}", parts.join(" ")));
        }
        if let Some(w) = &self.witness {
            s.push_str(&format!(
                "\nwitness: input {:?} delta {:?}",
                w.input, w.delta
            ));
        }
        s.push_str(&format!(
            "\nsubregions: {}  max depth: {}  wall time: {:.3}s",
            self.stats.subregions, self.stats.max_depth_reached, self.stats.wall_time_s
        ));
        s
    }
}
