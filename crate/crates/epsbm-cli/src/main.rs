//! `epsbm`: batch commands over finite metric measure spaces.
//!
//! Exit codes: 0 = success / no violation found, 1 = a violation (or the
//! diameter obstruction) was found, 2 = invalid input or usage.

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use epsbm::bm::{self, BMParams, BMVerifyReport, SubsetSampler, ToleranceModel, VerifyStrategy};
use epsbm::concentration::{concentration_profile, gaussian_bound, improved_bound, ProfileStrategy};
use epsbm::discretize::{discretize_sphere, CenterMethod, DiscretizeConfig};
use epsbm::geometry::{diameter_with_witness, intermediate_set};
use epsbm::io::{
    emit_report, emit_space, read_space, write_atomic, BoundsRow, DiscretizationMeta,
    ReportFormat, ReportPayload, RunReport,
};
use epsbm::space::{MetricMeasureSpace, Subset};

#[derive(Parser)]
#[command(
    name = "epsbm",
    version,
    about = "Approximated Brunn-Minkowski inequalities and concentration functions on finite metric measure spaces"
)]
struct Cli {
    /// Worker threads for the parallel phases. Affects scheduling only;
    /// results are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Report format (`csv` is available for concentration profiles and
    /// bounds tables).
    #[arg(long, global = true, default_value = "json")]
    format: String,

    /// Write the primary output to this file (atomically) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpaceArg {
    /// Path to an `mms-1` space file.
    #[arg(long)]
    space: PathBuf,
}

#[derive(Args)]
struct TGridArgs {
    /// Interpolation parameter t; repeatable. Defaults to 1/2, the value the
    /// Gaussian bound's argument uses.
    #[arg(long = "t")]
    t_values: Vec<f64>,

    /// Uniform t grid with this many interior points: t = k/(M+1).
    /// An approximation of "for all t"; combine with --t if needed.
    #[arg(long)]
    t_grid: Option<usize>,
}

impl TGridArgs {
    fn resolve(&self) -> Vec<f64> {
        let mut t = self.t_values.clone();
        if let Some(m) = self.t_grid {
            t.extend((1..=m).map(|k| k as f64 / (m as f64 + 1.0)));
        }
        if t.is_empty() {
            t.push(0.5);
        }
        t.sort_by(|a, b| a.partial_cmp(b).expect("t values are finite"));
        t.dedup();
        t
    }
}

#[derive(Args)]
struct RGridArgs {
    /// Radius value; repeatable.
    #[arg(long = "r")]
    r_values: Vec<f64>,

    /// Radius grid `lo:hi:steps`, inclusive at both ends.
    #[arg(long)]
    r_grid: Option<String>,
}

impl RGridArgs {
    fn resolve(&self, default: Option<&str>) -> Result<Vec<f64>, String> {
        let mut r = self.r_values.clone();
        let grid = self.r_grid.as_deref().or(if r.is_empty() { default } else { None });
        if let Some(spec) = grid {
            r.extend(parse_r_grid(spec)?);
        }
        r.sort_by(|a, b| a.partial_cmp(b).expect("r values are finite"));
        r.dedup();
        Ok(r)
    }
}

fn parse_r_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || format!("invalid r grid `{spec}`, expected lo:hi:steps");
    if parts.len() != 3 {
        return Err(err());
    }
    let lo: f64 = parts[0].parse().map_err(|_| err())?;
    let hi: f64 = parts[1].parse().map_err(|_| err())?;
    let steps: usize = parts[2].parse().map_err(|_| err())?;
    if steps == 0 || !(lo <= hi) {
        return Err(err());
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect())
}

#[derive(Args)]
struct ToleranceArgs {
    /// Fixed violation-report tolerance on the root scale (default 0:
    /// exact-weight spaces).
    #[arg(long, default_value_t = 0.0)]
    tol: f64,

    /// Derive a per-instance 3-sigma tolerance from Monte Carlo weight
    /// standard errors, for spaces whose weights came from this many
    /// samples. Overrides --tol.
    #[arg(long)]
    tol_mc_samples: Option<u64>,
}

impl ToleranceArgs {
    fn resolve(&self) -> ToleranceModel {
        match self.tol_mc_samples {
            Some(mc_samples) => ToleranceModel::McWeights { mc_samples },
            None => ToleranceModel::fixed(self.tol),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a space file; reports every invariant violation found.
    Validate {
        #[command(flatten)]
        space: SpaceArg,
    },
    /// Diameter of the space with its witness pair.
    Diameter {
        #[command(flatten)]
        space: SpaceArg,
    },
    /// The ε-approximated t-intermediate set of two subsets.
    Intermediate {
        #[command(flatten)]
        space: SpaceArg,
        /// Comma-separated point indices of A0, e.g. `0,3,4`.
        #[arg(long)]
        a0: String,
        /// Comma-separated point indices of A1.
        #[arg(long)]
        a1: String,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[arg(long)]
        eps: f64,
    },
    /// One (A0, A1, t) instance of the inequality.
    BmCheck {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        a0: String,
        #[arg(long)]
        a1: String,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[command(flatten)]
        tolerance: ToleranceArgs,
    },
    /// Verify the inequality over subset pairs, exhaustively or by sampling.
    BmVerify {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: f64,
        #[command(flatten)]
        t_grid: TGridArgs,
        /// `exhaustive`, `sampled`, or `auto` (exhaustive iff N <= 14).
        #[arg(long, default_value = "auto")]
        strategy: String,
        /// Sampled pairs to draw.
        #[arg(long, default_value_t = 1000)]
        pairs: u64,
        /// Subset family for sampling: `singletons`, `balls`, or `random`.
        #[arg(long, default_value = "balls")]
        sampler: String,
        /// Cardinality cap for the `random` sampler.
        #[arg(long, default_value_t = 8)]
        max_card: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tolerance: ToleranceArgs,
    },
    /// Concentration profile α(r) with both bound curves.
    Concentration {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        n: f64,
        #[command(flatten)]
        r_grid: RGridArgs,
        /// `exact`, `greedy`, or `auto` (exact iff N <= 20).
        #[arg(long, default_value = "auto")]
        strategy: String,
    },
    /// The Gaussian and improved concentration bounds on an r grid.
    Bounds {
        #[arg(long)]
        n: f64,
        #[command(flatten)]
        r_grid: RGridArgs,
    },
    /// Diameter check, BM verification, concentration profile, and bound
    /// comparison in one report.
    TheoremReport {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: f64,
        #[command(flatten)]
        t_grid: TGridArgs,
        #[command(flatten)]
        r_grid: RGridArgs,
        #[arg(long, default_value = "auto")]
        strategy: String,
        #[arg(long, default_value_t = 1000)]
        pairs: u64,
        #[arg(long, default_value = "balls")]
        sampler: String,
        #[arg(long, default_value_t = 8)]
        max_card: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tolerance: ToleranceArgs,
    },
    /// Discretize the round sphere S^m into a space file; the metadata
    /// report goes to stdout (or --report).
    DiscretizeSphere {
        /// Sphere dimension m (the space then plays the CD(m-1, m) model,
        /// so pair it with --n equal to m in verifier calls).
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long)]
        centers: usize,
        /// Monte Carlo samples for the Voronoi cell measures.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `fibonacci` (m = 2 only) or `fps` (farthest-point net over a
        /// random cloud).
        #[arg(long, default_value = "fibonacci")]
        method: String,
        /// Cloud size for the `fps` method.
        #[arg(long, default_value_t = 100_000)]
        cloud_size: usize,
        /// Test grid size for the covering-radius measurement.
        #[arg(long, default_value_t = 100_000)]
        grid_size: usize,
        /// Metadata report destination (default stdout).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

enum Outcome {
    Clean,
    ViolationFound,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::ViolationFound) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_subset(text: &str, space: &MetricMeasureSpace) -> Result<Subset, String> {
    let indices = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid index `{}`", s.trim()))
        })
        .collect::<Result<Vec<usize>, String>>()?;
    Subset::new(indices, space.len()).map_err(|e| e.to_string())
}

fn parse_verify_strategy(s: &str, space: &MetricMeasureSpace) -> Result<bool, String> {
    // Returns true for exhaustive.
    match s {
        "exhaustive" => Ok(true),
        "sampled" => Ok(false),
        "auto" => Ok(space.len() <= bm::EXHAUSTIVE_CAP),
        other => Err(format!("unknown strategy `{other}` (exhaustive|sampled|auto)")),
    }
}

fn parse_sampler(name: &str, max_card: usize) -> Result<SubsetSampler, String> {
    match name {
        "singletons" => Ok(SubsetSampler::Singletons),
        "balls" => Ok(SubsetSampler::Balls),
        "random" | "random_subsets" => Ok(SubsetSampler::RandomSubsets { max_card }),
        other => Err(format!(
            "unknown sampler `{other}` (singletons|balls|random)"
        )),
    }
}

fn run(cli: &Cli) -> Result<Outcome, String> {
    let start = Instant::now();
    let format: ReportFormat = cli.format.parse()?;
    let mut params = Map::new();
    let mut outcome = Outcome::Clean;

    let (command, payload): (&str, ReportPayload) = match &cli.command {
        Command::Validate { space } => {
            let s = read_space(&space.space).map_err(|e| e.to_string())?;
            params.insert("space".into(), json!(space.space));
            (
                "validate",
                ReportPayload::Validate {
                    size: s.len(),
                    diameter: epsbm::geometry::diameter(&s),
                },
            )
        }
        Command::Diameter { space } => {
            let s = read_space(&space.space).map_err(|e| e.to_string())?;
            params.insert("space".into(), json!(space.space));
            let (diameter, witness) = diameter_with_witness(&s);
            ("diameter", ReportPayload::Diameter { diameter, witness })
        }
        Command::Intermediate {
            space,
            a0,
            a1,
            t,
            eps,
        } => {
            let s = read_space(&space.space).map_err(|e| e.to_string())?;
            let sub0 = parse_subset(a0, &s)?;
            let sub1 = parse_subset(a1, &s)?;
            let result = intermediate_set(&s, &sub0, &sub1, *t, *eps).map_err(|e| e.to_string())?;
            params.insert("space".into(), json!(space.space));
            params.insert("a0".into(), json!(sub0.indices()));
            params.insert("a1".into(), json!(sub1.indices()));
            params.insert("t".into(), json!(t));
            params.insert("eps".into(), json!(eps));
            let labels = result
                .indices()
                .iter()
                .map(|&i| s.labels()[i as usize].clone())
                .collect();
            let measure = s.measure(&result).map_err(|e| e.to_string())?;
            (
                "intermediate",
                ReportPayload::Intermediate {
                    indices: result.indices().to_vec(),
                    labels,
                    measure,
                },
            )
        }
        Command::BmCheck {
            space,
            a0,
            a1,
            eps,
            n,
            t,
            tolerance,
        } => {
            let s = read_space(&space.space).map_err(|e| e.to_string())?;
            let sub0 = parse_subset(a0, &s)?;
            let sub1 = parse_subset(a1, &s)?;
            let bm_params = BMParams::new(*eps, *n, *t).map_err(|e| e.to_string())?;
            let tol_model = tolerance.resolve();
            let result = bm::bm_check_pair_with(&s, &sub0, &sub1, &bm_params, &tol_model)
                .map_err(|e| e.to_string())?;
            if !result.satisfied {
                outcome = Outcome::ViolationFound;
            }
            params.insert("space".into(), json!(space.space));
            params.insert("a0".into(), json!(sub0.indices()));
            params.insert("a1".into(), json!(sub1.indices()));
            params.insert("eps".into(), json!(eps));
            params.insert("n".into(), json!(n));
            params.insert("t".into(), json!(t));
            params.insert("tolerance".into(), json!(tol_model));
            ("bm-check", ReportPayload::BmCheck(result))
        }
        Command::BmVerify {
            space,
            eps,
            n,
            t_grid,
            strategy,
            pairs,
            sampler,
            max_card,
            seed,
            tolerance,
        } => {
            let s = read_space(&space.space).map_err(|e| e.to_string())?;
            let t_values = t_grid.resolve();
            let bm_params = BMParams::new(*eps, *n, 0.5).map_err(|e| e.to_string())?;
            let tol_model = tolerance.resolve();
            let exhaustive = parse_verify_strategy(strategy, &s)?;
            let report = if exhaustive {
                bm::bm_verify_exhaustive(&s, &bm_params, &t_values, &tol_model)
            } else {
                let sampler = parse_sampler(sampler, *max_card)?;
                bm::bm_verify_sampled(&s, &bm_params, &t_values, *pairs, &sampler, *seed, &tol_model)
            }
            .map_err(|e| e.to_string())?;
            if report.refuted() {
                outcome = Outcome::ViolationFound;
            }
            params.insert("space".into(), json!(space.space));
            params.insert("eps".into(), json!(eps));
            params.insert("n".into(), json!(n));
            params.insert("t_values".into(), json!(t_values));
            params.insert("strategy".into(), json!(report.strategy));
            params.insert("tolerance".into(), json!(tol_model));
            ("bm-verify", ReportPayload::BmVerify(report))
        }
        Command::Concentration {
            space,
            n,
            r_grid,
            strategy,
        } => {
            let s = read_space(&space.space).map_err(|e| e.to_string())?;
            let r_values = r_grid.resolve(None)?;
            let strategy: ProfileStrategy = strategy.parse()?;
            let profile = concentration_profile(&s, &r_values, *n, strategy)
                .map_err(|e| e.to_string())?;
            params.insert("space".into(), json!(space.space));
            params.insert("n".into(), json!(n));
            params.insert("r_values".into(), json!(r_values));
            params.insert("strategy".into(), json!(strategy));
            ("concentration", ReportPayload::Profile(profile))
        }
        Command::Bounds { n, r_grid } => {
            let r_values = r_grid.resolve(Some("0.2:3.0:15"))?;
            let rows = bounds_rows(*n, &r_values).map_err(|e| e.to_string())?;
            params.insert("n".into(), json!(n));
            params.insert("r_values".into(), json!(r_values));
            ("bounds", ReportPayload::Bounds { n: *n, rows })
        }
        Command::TheoremReport {
            space,
            eps,
            n,
            t_grid,
            r_grid,
            strategy,
            pairs,
            sampler,
            max_card,
            seed,
            tolerance,
        } => {
            let s = read_space(&space.space).map_err(|e| e.to_string())?;
            let t_values = t_grid.resolve();
            let r_values = r_grid.resolve(Some("0.2:3.0:15"))?;
            let bm_params = BMParams::new(*eps, *n, 0.5).map_err(|e| e.to_string())?;
            let tol_model = tolerance.resolve();
            let (diam, witness) = diameter_with_witness(&s);

            let exhaustive = parse_verify_strategy(strategy, &s)?;
            let bm_report: BMVerifyReport = if let Some(lemma) = bm::lemma_diameter_witness(&s) {
                // Unsatisfiable outright; skip enumeration/sampling.
                BMVerifyReport {
                    eps: *eps,
                    n: *n,
                    t_values: t_values.clone(),
                    tolerance: tol_model,
                    strategy: if exhaustive {
                        VerifyStrategy::Exhaustive
                    } else {
                        VerifyStrategy::Sampled {
                            seed: *seed,
                            pair_count: *pairs,
                            sampler: parse_sampler(sampler, *max_card)?.name().to_string(),
                        }
                    },
                    checked_count: 0,
                    violation_count: 0,
                    worst: None,
                    lemma_shortcircuit: Some(lemma),
                }
            } else if exhaustive {
                bm::bm_verify_exhaustive(&s, &bm_params, &t_values, &tol_model)
                    .map_err(|e| e.to_string())?
            } else {
                let sampler = parse_sampler(sampler, *max_card)?;
                bm::bm_verify_sampled(&s, &bm_params, &t_values, *pairs, &sampler, *seed, &tol_model)
                    .map_err(|e| e.to_string())?
            };

            let profile = concentration_profile(&s, &r_values, *n, ProfileStrategy::Auto)
                .map_err(|e| e.to_string())?;
            let bounds = bounds_rows(*n, &r_values).map_err(|e| e.to_string())?;

            let refuted = bm_report.refuted();
            if refuted {
                outcome = Outcome::ViolationFound;
            }
            params.insert("space".into(), json!(space.space));
            params.insert("eps".into(), json!(eps));
            params.insert("n".into(), json!(n));
            params.insert("t_values".into(), json!(t_values));
            params.insert("r_values".into(), json!(r_values));
            params.insert("seed".into(), json!(seed));
            params.insert("tolerance".into(), json!(tol_model));
            (
                "theorem-report",
                ReportPayload::TheoremReport {
                    diameter: diam,
                    diameter_witness: witness,
                    diameter_admissible: diam <= PI,
                    bm: bm_report,
                    profile,
                    bounds,
                    verdict: if refuted { "refuted" } else { "consistent" }.to_string(),
                },
            )
        }
        Command::DiscretizeSphere {
            m,
            centers,
            samples,
            seed,
            method,
            cloud_size,
            grid_size,
            report,
        } => {
            let method = match method.as_str() {
                "fibonacci" => CenterMethod::Fibonacci,
                "fps" | "farthest_point" => CenterMethod::FarthestPoint {
                    cloud_size: *cloud_size,
                },
                other => return Err(format!("unknown method `{other}` (fibonacci|fps)")),
            };
            let cfg = DiscretizeConfig {
                m: *m,
                center_count: *centers,
                mc_samples: *samples,
                seed: *seed,
                method,
                test_grid_size: *grid_size,
            };
            let result = discretize_sphere(&cfg).map_err(|e| e.to_string())?;
            if let Some(path) = &cli.out {
                write_atomic(path, &emit_space(&result.space)).map_err(|e| e.to_string())?;
            } else {
                print!("{}", emit_space(&result.space));
            }
            params.insert("m".into(), json!(m));
            params.insert("centers".into(), json!(centers));
            params.insert("samples".into(), json!(samples));
            params.insert("seed".into(), json!(seed));
            params.insert("method".into(), json!(result.method));
            params.insert("grid_size".into(), json!(grid_size));
            let meta = DiscretizationMeta::from_result(&result);
            let run_report = RunReport {
                command: "discretize-sphere".into(),
                parameters: params,
                results: ReportPayload::Discretization(meta),
                wall_time_s: start.elapsed().as_secs_f64(),
            };
            let text = emit_report(&run_report, format).map_err(|e| e.to_string())?;
            match report {
                Some(path) => write_atomic(path, &text).map_err(|e| e.to_string())?,
                None => {
                    if cli.out.is_some() {
                        print!("{text}");
                    }
                }
            }
            return Ok(Outcome::Clean);
        }
    };

    let report = RunReport {
        command: command.to_string(),
        parameters: params,
        results: payload,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = emit_report(&report, format).map_err(|e| e.to_string())?;
    match &cli.out {
        Some(path) => write_atomic(path, &text).map_err(|e| e.to_string())?,
        None => print!("{text}"),
    }
    Ok(outcome)
}

fn bounds_rows(n: f64, r_values: &[f64]) -> epsbm::Result<Vec<BoundsRow>> {
    r_values
        .iter()
        .map(|&r| {
            Ok(BoundsRow {
                r,
                bound_thm1: gaussian_bound(n, r)?,
                bound_improved: if r > 0.0 && r < PI {
                    Some(improved_bound(n, r)?)
                } else {
                    None
                },
            })
        })
        .collect()
}
