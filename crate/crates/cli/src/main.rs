//! `sketchjl`: plan, seed, apply and verify sparse JL transforms.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid parameters or usage,
//! 3 shape mismatch, 4 malformed input, 5 failed verification.

mod input;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sketchjl::cascade::cascade_scaled_seed_bits;
use sketchjl::diagnostics::{tail_experiment, ExperimentSpec};
use sketchjl::{
    plan_cascade, plan_dense, plan_sparse, Error, Profile, SparseJLTransform, SparseParams,
    TransformDescriptor, TurnstileSketch,
};

use input::InputError;

#[derive(Parser, Debug)]
#[command(name = "sketchjl", version, about = "Seeded sparse Johnson-Lindenstrauss embeddings")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Dense,
    Sparse,
    Cascade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VectorFormat {
    /// CSV rows, or one value per line for a single vector.
    Dense,
    /// `index value` lines, 1-based.
    Sparse,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the parameters chosen for a family, including its seed length.
    Plan {
        #[arg(long, value_enum)]
        family: Family,
        /// Distortion, in (0, 1/2].
        #[arg(long)]
        epsilon: f64,
        /// Failure probability, in (0, 1/2).
        #[arg(long)]
        delta: f64,
        /// Input dimension (required for sparse and cascade).
        #[arg(long)]
        d: Option<usize>,
        /// practical, paper-faithful (or paper) or variant.
        #[arg(long, env = "SKETCHJL_PROFILE", default_value = "practical", value_parser = parse_profile)]
        profile: Profile,
    },
    /// Write a sparse transform descriptor.
    ///
    /// Either plan from --epsilon, --delta and --profile, or give --k,
    /// --alpha, --r-h and --r-sigma directly.
    Seed {
        #[arg(long)]
        d: usize,
        /// Seeds both hash functions.
        #[arg(long)]
        rng_seed: u64,
        #[arg(long, required_unless_present = "k")]
        epsilon: Option<f64>,
        #[arg(long, required_unless_present = "k")]
        delta: Option<f64>,
        #[arg(long, env = "SKETCHJL_PROFILE", default_value = "practical", value_parser = parse_profile)]
        profile: Profile,
        /// Target dimension.
        #[arg(long, requires_all = ["alpha", "r_h", "r_sigma"])]
        k: Option<usize>,
        /// Column sparsity, a power of two.
        #[arg(long, requires = "k")]
        alpha: Option<usize>,
        /// Independence order of the row hash.
        #[arg(long, requires = "k")]
        r_h: Option<usize>,
        /// Independence order of the sign hash.
        #[arg(long, requires = "k")]
        r_sigma: Option<usize>,
        /// Destination; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Embed the vectors of a file, one output row per input vector.
    Embed {
        #[arg(long)]
        transform: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Destination; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = VectorFormat::Dense)]
        input_format: VectorFormat,
    },
    /// Read `j v` updates (1-based j) from stdin and print the final sketch.
    Sketch {
        #[arg(long)]
        transform: PathBuf,
    },
    /// Run the experiments of a JSON manifest and print their reports.
    Verify {
        /// JSON array of experiment specifications.
        manifest: PathBuf,
    },
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Self {
            code,
            msg: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Shape { .. } | Error::OutOfDomain { .. } => 3,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

fn input_failure(path: &Path, e: InputError) -> Failure {
    let code = match e {
        InputError::Shape { .. } => 3,
        InputError::Parse { .. } => 4,
    };
    Failure::new(code, format!("{}: {e}", path.display()))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn write_out(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::new(1, format!("{}: {e}", path.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(1, format!("stdout: {e}"))),
    }
}

fn load_transform(path: &Path) -> Result<SparseJLTransform, Failure> {
    let text = read_file(path)?;
    let desc: TransformDescriptor = serde_json::from_str(&text)
        .map_err(|e| Failure::new(4, format!("{}: {e}", path.display())))?;
    Ok(SparseJLTransform::from_descriptor(&desc)?)
}

fn render_row(row: &[f64], format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string(row).expect("finite floats serialize"),
        Format::Text => row
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    }
}

/// Flat `key=value` lines for the text format.
fn render_text(value: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = value {
        for (k, v) in map {
            out.push_str(&format!("{k}={v}\n"));
        }
    }
    out
}

fn render(value: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
            s.push('\n');
            s
        }
        Format::Text => render_text(value),
    }
}

fn need_d(d: Option<usize>) -> Result<usize, Failure> {
    d.ok_or_else(|| Failure::new(2, "--d is required for this family"))
}

fn cmd_plan(
    family: Family,
    epsilon: f64,
    delta: f64,
    d: Option<usize>,
    profile: Profile,
) -> Result<Value, Failure> {
    let mut v = match family {
        Family::Dense => {
            let p = plan_dense(epsilon, delta, profile)?;
            let mut v = serde_json::to_value(p).expect("plain struct");
            v["seed_bits"] = json!(p.seed_bits());
            if let Some(d) = d {
                v["d"] = json!(d);
            }
            v
        }
        Family::Sparse => {
            let p = plan_sparse(epsilon, delta, need_d(d)?, profile)?;
            let mut v = serde_json::to_value(&p).expect("plain struct");
            v["spread_dim"] = json!(p.spread_dim());
            v["seed_bits"] = json!(p.seed_bits());
            v
        }
        Family::Cascade => {
            let p = plan_cascade(epsilon, delta, need_d(d)?)?;
            let mut v = serde_json::to_value(&p).expect("plain struct");
            v["seed_bits"] = json!(p.total_seed_bits);
            v["scaled_seed_bits"] = json!(cascade_scaled_seed_bits(&p));
            v
        }
    };
    v["family"] = json!(match family {
        Family::Dense => "dense",
        Family::Sparse => "sparse",
        Family::Cascade => "cascade",
    });
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn cmd_seed(
    d: usize,
    rng_seed: u64,
    epsilon: Option<f64>,
    delta: Option<f64>,
    profile: Profile,
    explicit: Option<(usize, usize, usize, usize)>,
) -> Result<TransformDescriptor, Failure> {
    let params = match explicit {
        Some((k, alpha, r_h, r_sigma)) => SparseParams::custom(d, k, alpha, r_h, r_sigma)?,
        None => {
            let (e, dl) = epsilon.zip(delta).ok_or_else(|| {
                Failure::new(2, "--epsilon and --delta are required without --k")
            })?;
            plan_sparse(e, dl, d, profile)?
        }
    };
    let seed = format!("sketchjl/cli/{rng_seed}");
    Ok(SparseJLTransform::from_seed(params, seed.as_bytes())?.descriptor())
}

fn cmd_embed(
    transform: &Path,
    input: &Path,
    input_format: VectorFormat,
    format: Format,
) -> Result<String, Failure> {
    let t = load_transform(transform)?;
    let text = read_file(input)?;
    let d = t.input_dim();
    let rows = match input_format {
        VectorFormat::Dense => input::parse_dense(&text, d),
        VectorFormat::Sparse => input::parse_sparse(&text, d).map(|x| vec![x]),
    }
    .map_err(|e| input_failure(input, e))?;
    let mut out = String::new();
    for x in rows {
        out.push_str(&render_row(&t.apply(&x)?, format));
        out.push('\n');
    }
    Ok(out)
}

fn cmd_sketch(transform: &Path, format: Format) -> Result<String, Failure> {
    let t = load_transform(transform)?;
    let mut text = String::new();
    io::stdin()
        .read_to_string(&mut text)
        .map_err(|e| Failure::new(1, format!("stdin: {e}")))?;
    let updates = input::parse_pairs(&text, t.input_dim())
        .map_err(|e| input_failure(Path::new("stdin"), e))?;
    let mut sketch = TurnstileSketch::new(&t);
    for (j, v) in updates {
        sketch.update(j, v)?;
    }
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string(&json!({
                "y": sketch.sketch(),
                "updates_applied": sketch.updates_applied(),
            }))
            .expect("json values serialize");
            s.push('\n');
            s
        }
        Format::Text => format!(
            "{}\nupdates_applied={}\n",
            render_row(sketch.sketch(), Format::Text),
            sketch.updates_applied()
        ),
    })
}

fn cmd_verify(manifest: &Path, format: Format) -> Result<(String, Vec<String>), Failure> {
    let text = read_file(manifest)?;
    let specs: Vec<ExperimentSpec> = serde_json::from_str(&text)
        .map_err(|e| Failure::new(4, format!("{}: {e}", manifest.display())))?;
    let reports = specs
        .iter()
        .map(tail_experiment)
        .collect::<Result<Vec<_>, _>>()?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.clone())
        .collect();
    let out = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&reports).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Text => reports
            .iter()
            .map(|r| {
                format!(
                    "{} {} failures={}/{} upper95={:.6} bound={} threshold={:.6} p99={:.6}\n",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.failures,
                    r.trials,
                    r.binomial_95_upper,
                    r.bound,
                    r.threshold,
                    r.p99
                )
            })
            .collect(),
    };
    Ok((out, failed))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let format = cli.format;
    match cli.command {
        Command::Plan {
            family,
            epsilon,
            delta,
            d,
            profile,
        } => write_out(None, &render(&cmd_plan(family, epsilon, delta, d, profile)?, format)),
        Command::Seed {
            d,
            rng_seed,
            epsilon,
            delta,
            profile,
            k,
            alpha,
            r_h,
            r_sigma,
            output,
        } => {
            let explicit = match (k, alpha, r_h, r_sigma) {
                (Some(k), Some(a), Some(rh), Some(rs)) => Some((k, a, rh, rs)),
                _ => None,
            };
            let desc = cmd_seed(d, rng_seed, epsilon, delta, profile, explicit)?;
            let value = serde_json::to_value(&desc).expect("plain struct");
            write_out(output.as_deref(), &render(&value, format))
        }
        Command::Embed {
            transform,
            input,
            output,
            input_format,
        } => {
            let out = cmd_embed(&transform, &input, input_format, format)?;
            write_out(output.as_deref(), &out)
        }
        Command::Sketch { transform } => write_out(None, &cmd_sketch(&transform, format)?),
        Command::Verify { manifest } => {
            let (out, failed) = cmd_verify(&manifest, format)?;
            write_out(None, &out)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::new(5, format!("failed experiments: {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sketchjl: {}", f.msg.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
