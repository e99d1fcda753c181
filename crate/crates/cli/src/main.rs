use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use qsteer::discord::{concurrence, discord_numeric, theta_family, zero_discord_a, zero_discord_b, DiscordOptions, Party};
use qsteer::ellipsoid::{ellipsoid_a, ellipsoid_b, is_obese, volume};
use qsteer::io::{geometry_json, parse_geometry, parse_state, state_json, theta_json, to_canonical_string, vec3};
use qsteer::lorentz::PRODUCT_CUTOFF;
use qsteer::qstate::{random_density, to_theta, DensityMatrix};
use qsteer::reconstruct::{extract_geometry, reconstruct_state};
use qsteer::separability::{
    classify_entanglement, decompose_separable, minimal_product_count, SearchOptions, SimplexChoice, CRITERION_BAND,
};
use qsteer::steering::{complete_steering_check, mc_hull_oracle, steer, steer_to_decomposition, Steerability};
use qsteer::verify::{verify_states, VerifyOptions};
use qsteer::Error;

#[derive(Parser)]
#[command(name = "qsteer", version, about = "Two-qubit steering ellipsoids: classify, verify, decompose, reconstruct")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// State or geometry JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the command's default tolerances.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartyArg {
    A,
    B,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Entanglement, shape, complete steering and zero-discord report.
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Export steering ellipsoid geometry.
    Ellipsoid {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "a", ignore_case = true)]
        party: PartyArg,
    },
    /// Run the oracle suite on a state file or on random states.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        random: Option<usize>,
        /// Rank of the random states.
        #[arg(long, default_value_t = 4)]
        rank: usize,
        /// Projective measurements per state for the hull check.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Write a separable state as a mixture of rank(Θ) product states.
    Decompose {
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild a state from {"Q", "c", "a", "b"}.
    Reconstruct {
        #[command(flatten)]
        common: Common,
    },
    /// Concurrence, discord and volume along the fixed-volume skew family.
    ScanTheta {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 32)]
        steps: usize,
    },
    /// Bob measurement for a target ensemble, or the sampled steering hull.
    Steer {
        #[command(flatten)]
        common: Common,
        /// JSON list of {"p", "bloch"} targets for Alice.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

/// Failure with its exit code: 1 analysis, 2 input, 3 search budget.
struct Failure {
    code: u8,
    message: String,
    /// Report still written to the output when the analysis fails.
    output: Option<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into(), output: None }
    }

    fn analysis(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into(), output: None }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SimplexNotFound { .. } => 3,
            Error::Parse(_)
            | Error::InvalidState(_)
            | Error::NotHermitian(_)
            | Error::NotPsd(_)
            | Error::NotPhysical(_)
            | Error::Superluminal(_)
            | Error::NotPositive
            | Error::BadDecomposition(_)
            | Error::Incompatible(_)
            | Error::LengthMismatch(..) => 2,
            _ => 1,
        };
        Self { code, message: e.to_string(), output: None }
    }
}

type Outcome = Result<String, Failure>;

fn read(path: &Option<PathBuf>) -> Result<String, Failure> {
    let path = path.as_ref().ok_or_else(|| Failure::input("--input is required"))?;
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn read_state(common: &Common) -> Result<DensityMatrix, Failure> {
    Ok(parse_state(&read(&common.input)?)?)
}

fn classify(common: &Common) -> Outcome {
    let rho = read_state(common)?;
    let theta = to_theta(&rho);
    let (ea, eb) = (ellipsoid_a(&theta), ellipsoid_b(&theta));
    let entangled = classify_entanglement(&rho, common.tol.unwrap_or(CRITERION_BAND))?;
    let complete = if theta.b().norm() >= PRODUCT_CUTOFF { true } else { complete_steering_check(&theta)?.complete };
    let report = json!({
        "entangled": entangled,
        "obese": is_obese(&ea),
        "dimension": ea.dimension,
        "shape": ea.shape().label(),
        "complete_steering": complete,
        "zero_discord_A": zero_discord_a(&theta),
        "zero_discord_B": zero_discord_b(&theta)?,
        "volume_A": volume(&ea),
        "volume_B": volume(&eb),
        "center": vec3(&ea.center),
        "semiaxes": vec3(&ea.semiaxes),
    });
    Ok(to_canonical_string(&report))
}

fn ellipsoid(common: &Common, party: PartyArg) -> Outcome {
    let theta = to_theta(&read_state(common)?);
    let value = match party {
        PartyArg::A => geometry_json(&ellipsoid_a(&theta)),
        PartyArg::B => geometry_json(&ellipsoid_b(&theta)),
        PartyArg::Both => json!({ "A": geometry_json(&ellipsoid_a(&theta)), "B": geometry_json(&ellipsoid_b(&theta)) }),
    };
    Ok(to_canonical_string(&value))
}

fn verify(common: &Common, random: Option<usize>, rank: usize, samples: usize) -> Outcome {
    let states = match random {
        Some(n) => {
            if !(1..=4).contains(&rank) {
                return Err(Failure::input(format!("--rank must be 1..=4, got {rank}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            (0..n).map(|_| random_density(rank, &mut rng)).collect()
        }
        None => vec![read_state(common)?],
    };
    let opts = VerifyOptions { hull_samples: samples, seed: common.seed, tol: common.tol };
    let report = verify_states(&states, &opts);
    let text = to_canonical_string(&serde_json::to_value(&report).expect("report serializes"));
    if report.passed {
        return Ok(text);
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    let mut failure = Failure::analysis(format!("failed checks: {}", failed.join(", ")));
    failure.output = Some(text);
    Err(failure)
}

fn decompose(common: &Common) -> Outcome {
    let theta = to_theta(&read_state(common)?);
    let mut opts = SearchOptions { seed: common.seed, ..Default::default() };
    if let Some(tol) = common.tol {
        opts.tolerance = tol;
    }
    let d = decompose_separable(&theta, &SimplexChoice::Auto(opts))?;
    let value = json!({
        "terms": serde_json::to_value(&d.terms).expect("terms serialize"),
        "residual": d.residual,
        "rank": minimal_product_count(&theta)?,
    });
    Ok(to_canonical_string(&value))
}

fn reconstruct(common: &Common) -> Outcome {
    let g = parse_geometry(&read(&common.input)?)?;
    let rho = reconstruct_state(&g)?;
    let theta = to_theta(&rho);
    let mut value = theta_json(&theta);
    value["rho"] = state_json(&rho)["rho"].clone();
    value["geometry_residual"] = json!(extract_geometry(&theta).distance(&g));
    Ok(to_canonical_string(&value))
}

fn scan_theta(steps: usize) -> Outcome {
    if steps < 2 {
        return Err(Failure::input(format!("--steps must be at least 2, got {steps}")));
    }
    let opts = DiscordOptions::default();
    let mut csv = String::from("theta,concurrence,discord,volume\n");
    for k in 0..steps {
        let angle = std::f64::consts::FRAC_PI_2 * k as f64 / (steps - 1) as f64;
        let rho = theta_family(angle);
        let v = volume(&ellipsoid_a(&to_theta(&rho)));
        csv.push_str(&format!(
            "{angle:.16e},{:.16e},{:.16e},{v:.16e}\n",
            concurrence(&rho),
            discord_numeric(&rho, Party::A, &opts)
        ));
    }
    Ok(csv)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Target {
    p: f64,
    bloch: [f64; 3],
}

fn steer_cmd(common: &Common, targets: &Option<PathBuf>, samples: usize) -> Outcome {
    let theta = to_theta(&read_state(common)?);
    let Some(path) = targets else {
        let report = mc_hull_oracle(&theta, samples, common.seed);
        return Ok(to_canonical_string(&serde_json::to_value(report).expect("report serializes")));
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let targets: Vec<Target> =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("expected [{{\"p\", \"bloch\"}}]: {e}")))?;
    let targets: Vec<(f64, Vector3<f64>)> = targets.iter().map(|t| (t.p, Vector3::from(t.bloch))).collect();
    match steer_to_decomposition(&theta, &targets)? {
        Steerability::Unreachable { condition } => Err(Failure::analysis(format!("unreachable: {condition}"))),
        Steerability::Povm(povm) => {
            let mut elements = Vec::with_capacity(povm.len());
            let mut outcomes = Vec::with_capacity(povm.len());
            for e in povm.elements() {
                let o = steer(&theta, e)?;
                elements.push(json!([e.x0, e.x.x, e.x.y, e.x.z]));
                outcomes.push(json!({
                    "probability": o.probability,
                    "bloch": o.bloch.as_ref().map(vec3),
                }));
            }
            Ok(to_canonical_string(&json!({ "elements": elements, "outcomes": outcomes })))
        }
    }
}

fn run(cli: &Cli) -> (Option<PathBuf>, Outcome) {
    match &cli.command {
        Command::Classify { common } => (common.out.clone(), classify(common)),
        Command::Ellipsoid { common, party } => (common.out.clone(), ellipsoid(common, *party)),
        Command::Verify { common, random, rank, samples } => (common.out.clone(), verify(common, *random, *rank, *samples)),
        Command::Decompose { common } => (common.out.clone(), decompose(common)),
        Command::Reconstruct { common } => (common.out.clone(), reconstruct(common)),
        Command::ScanTheta { common, steps } => (common.out.clone(), scan_theta(*steps)),
        Command::Steer { common, targets, samples } => (common.out.clone(), steer_cmd(common, targets, *samples)),
    }
}

fn emit(out: Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(&path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (out, outcome) = run(&cli);
    let result = match outcome {
        Ok(text) => emit(out, &text),
        Err(f) => match f.output.as_deref().map(|text| emit(out, text)) {
            Some(Err(write)) => Err(write),
            _ => Err(f),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
