//! Command-line front end: verify a network pair, truncate/quantize a
//! network file, or compare the delta analysis against the
//! composed-network baseline.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use netdiff::verifier::DEFAULT_SEED;
use netdiff::{
    compose_difference, forward_pass, parse_nnet, single_net_forward, to_nnet_string,
    ConcreteInterval, InputRegion, Mode, Network, NetworkPair, Status, VerificationQuery,
};

use report::Report;

#[derive(Parser)]
#[command(name = "netdiff", version, about = "Differential verification of ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prove or falsify |f'(x) - f(x)| < epsilon over an input region.
    Verify(VerifyArgs),
    /// Truncate a network's weights to 16-bit floats (or round to a
    /// decimal place) and write the result.
    Truncate(TruncateArgs),
    /// Run delta mode and the composed baseline on the same queries and
    /// emit a CSV comparison.
    Compare(CompareArgs),
}

#[derive(Args)]
struct QueryArgs {
    /// First network (NNet text format).
    #[arg(long)]
    net1: PathBuf,
    /// Second network (NNet text format).
    #[arg(long)]
    net2: PathBuf,
    /// Region file: a JSON array of [lo, hi] pairs, index-aligned with
    /// the network inputs.
    #[arg(long)]
    region: PathBuf,
    /// Output difference bound to prove.
    #[arg(long)]
    epsilon: f64,
    /// Watched output index; repeatable. Default: all outputs.
    #[arg(long = "output-index")]
    output_index: Vec<usize>,
    /// Maximum bisection depth.
    #[arg(long, default_value_t = 40)]
    max_depth: u32,
    /// Wall-clock timeout in seconds.
    #[arg(long, default_value_t = 1800.0)]
    timeout: f64,
    /// Worker threads.
    #[arg(long, default_value_t = 10)]
    threads: usize,
    /// Random samples per region during counterexample search.
    #[arg(long, default_value_t = 1024)]
    samples: usize,
    /// Seed for counterexample sampling.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Apply (x - mean) / range input normalization to the region.
    #[arg(long)]
    normalize: bool,
    /// Disable outward rounding (benchmarking only; unsound).
    #[arg(long)]
    fast_math: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Analysis mode.
    #[arg(long, default_value = "delta", value_parser = ["delta", "composed-baseline"])]
    mode: String,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TruncateArgs {
    /// Input network (NNet text format).
    #[arg(long)]
    net: PathBuf,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
    /// Round half-away-from-zero at this decimal place instead of
    /// truncating to 16-bit floats.
    #[arg(long)]
    decimals: Option<u32>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Additional region files, one query each; repeatable.
    #[arg(long = "extra-region")]
    extra_regions: Vec<PathBuf>,
    /// Write the per-query CSV here (default: stdout).
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(3);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Truncate(args) => cmd_truncate(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn load_network(path: &Path) -> Result<Network, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Ok(parse_nnet(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn load_region(path: &Path) -> Result<InputRegion, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let pairs: Vec<(f64, f64)> = serde_json::from_str::<Vec<[f64; 2]>>(&text)
        .map_err(|e| format!("{}: bad region file: {e}", path.display()))?
        .into_iter()
        .map(|[lo, hi]| (lo, hi))
        .collect();
    for (lo, hi) in &pairs {
        if !(lo <= hi) {
            return Err(format!("{}: inverted bound [{lo}, {hi}]", path.display()).into());
        }
    }
    Ok(InputRegion::from_pairs(&pairs))
}

fn build_query(
    args: &QueryArgs,
    mode: Mode,
    region: InputRegion,
) -> Result<VerificationQuery, Box<dyn std::error::Error>> {
    let f = load_network(&args.net1)?;
    let f_prime = load_network(&args.net2)?;
    let region = if args.normalize {
        f.normalize_region(&region)
    } else {
        region
    };
    let pair = NetworkPair::new(f, f_prime)?;
    let mut q = VerificationQuery::new(pair, region, args.epsilon)?;
    q.outputs = args.output_index.clone();
    q.max_depth = args.max_depth;
    q.timeout = Some(Duration::from_secs_f64(args.timeout));
    q.sample_count = args.samples;
    q.rng_seed = args.seed;
    q.mode = mode;
    Ok(q)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    netdiff::set_fast_math(args.query.fast_math);
    let mode: Mode = args.mode.parse()?;
    let region = load_region(&args.query.region)?;
    let query = build_query(&args.query, mode, region)?;
    let verdict = netdiff::verify(&query, args.query.threads.max(1))?;

    let report = Report::new(&args.query, &args.mode, &query, &verdict);
    println!("{}", report.render_text());
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }

    Ok(match verdict.status {
        Status::Verified => ExitCode::from(0),
        Status::Falsified => ExitCode::from(1),
        Status::Unknown => ExitCode::from(2),
    })
}

fn cmd_truncate(args: TruncateArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let net = load_network(&args.net)?;
    let out = match args.decimals {
        Some(d) => net.quantize_round(d),
        None => net.truncate_f16()?,
    };
    std::fs::write(&args.out, to_nnet_string(&out))?;
    Ok(ExitCode::SUCCESS)
}

/// Width of the widest watched output bound.
fn first_pass_width(bounds: &[ConcreteInterval], watched: &[usize]) -> f64 {
    watched
        .iter()
        .map(|&j| bounds[j].width())
        .fold(0.0, f64::max)
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    netdiff::set_fast_math(args.query.fast_math);
    let mut regions = vec![args.query.region.clone()];
    regions.extend(args.extra_regions.iter().cloned());

    let mut csv = String::from(
        "query,region,delta_width,baseline_width,width_ratio,\
         delta_status,baseline_status,delta_time_s,baseline_time_s,\
         delta_subregions,baseline_subregions\n",
    );
    let mut ratios = Vec::new();

    for (qi, region_path) in regions.iter().enumerate() {
        let region = load_region(region_path)?;
        let delta_q = build_query(&args.query, Mode::Delta, region.clone())?;
        let base_q = build_query(&args.query, Mode::ComposedBaseline, region)?;
        let watched = delta_q.watched_outputs();

        let fwd = forward_pass(&delta_q.pair, &delta_q.region)?;
        let delta_width = first_pass_width(&fwd.output_delta, &watched);
        let composed = compose_difference(&base_q.pair);
        let base_fwd = single_net_forward(&composed, &base_q.region)?;
        let baseline_width = first_pass_width(&base_fwd.output, &watched);
        let ratio = if delta_width > 0.0 {
            baseline_width / delta_width
        } else {
            f64::INFINITY
        };
        ratios.push(ratio);

        let dv = netdiff::verify(&delta_q, args.query.threads.max(1))?;
        let bv = netdiff::verify(&base_q, args.query.threads.max(1))?;
        csv.push_str(&format!(
            "{qi},{},{delta_width},{baseline_width},{ratio},{},{},{:.3},{:.3},{},{}\n",
            region_path.display(),
            dv.status,
            bv.status,
            dv.stats.wall_time.as_secs_f64(),
            bv.stats.wall_time.as_secs_f64(),
            dv.stats.subregions,
            bv.stats.subregions,
        ));
    }

    match &args.csv {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }

    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = ratios[ratios.len() / 2];
    eprintln!(
        "compared {} queries; median first-pass width ratio (baseline/delta): {median:.3}",
        ratios.len()
    );
    Ok(ExitCode::SUCCESS)
}
