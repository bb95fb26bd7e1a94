//! `udakit` — generate multipartite states, compose them, analyze marginal
//! correlation kernels, and certify uniqueness from k-body marginals.
//!
//! Exit codes for `certify`: 0 = UDA, 1 = NotUDA, 2 = Inconclusive. Usage
//! errors exit 64, data-format errors 65, internal numerical failures 70.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use udakit_core::io::{self, LoadedState};
use udakit_core::states::{GmeComposeMode, GmeUdaState, PipelineStep};
use udakit_core::{
    beta_state, brute_oracle_search, certify_uda, certify_uda_sampled, correlation_kernel,
    generalized_ghz, kernel_dim_formula, run_pipeline, sigma_state, verify_witness, w_state,
    BetaParams, CertConfig, DensityMatrix, DimProfile, Error, UdaStatus, UdaVerdict, WParams,
};

const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NUMERICAL: u8 = 70;

#[derive(Parser)]
#[command(name = "udakit", version, about = "k-body marginal uniqueness toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a state of a built-in family and write it to a file.
    Gen(GenArgs),
    /// Compose two states with one of the three products.
    Compose(ComposeArgs),
    /// Dimension (and optionally a basis dump) of a correlation kernel.
    Kernel(KernelArgs),
    /// Certify whether a state is uniquely determined by its k-marginals.
    Certify(CertifyArgs),
    /// Independent feasibility-search oracle for a second compatible state.
    Oracle(OracleArgs),
    /// Fold a composition schedule over a start state.
    Pipeline(PipelineArgs),
    /// Check a claimed witness against a state.
    VerifyWitness(VerifyWitnessArgs),
    /// Run the built-in closed-form regression suite.
    Selftest,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    family: GenFamily,
}

#[derive(Subcommand)]
enum GenFamily {
    /// Three-qubit W-type ket sqrt(a)|001> + sqrt(b)|010> + sqrt(c)|100> + sqrt(d)|000>.
    W {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generalized GHZ ket on n qubits.
    Ghz {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// The rank-two three-qubit mixture.
    Sigma {
        #[arg(long)]
        out: PathBuf,
    },
    /// Its qudit extension with local dimension d + 1.
    Beta {
        #[arg(long)]
        d: usize,
        /// Comma-separated weights p_1..p_d.
        #[arg(long)]
        p: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ComposeModeArg {
    Tensor,
    Kron,
    Kc,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum)]
    mode: ComposeModeArg,
    /// Number of merged party pairs (kc mode only).
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KernelArgs {
    /// Comma-separated local dimensions, e.g. 2,2,2.
    #[arg(long)]
    dims: String,
    #[arg(long)]
    k: usize,
    /// Write the orthonormal basis to a file (one traceless matrix per entry).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CertModeArg {
    Full,
    Sampled,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "full")]
    mode: CertModeArg,
    /// Random directions for sampled mode.
    #[arg(long, default_value_t = 200)]
    dirs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol_feas: Option<f64>,
    #[arg(long)]
    uda_threshold: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Report file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Witness state file; defaults to the report path with a .witness.json extension.
    #[arg(long)]
    witness_out: Option<PathBuf>,
    /// Include wall-clock timings in the report (breaks byte-identical
    /// reports across runs).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 10000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    witness_out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Start state file (a ket for a pure start).
    #[arg(long)]
    start: PathBuf,
    /// Uniqueness order asserted for every input state.
    #[arg(long)]
    k: usize,
    /// Assert genuine entanglement for a mixed start state.
    #[arg(long)]
    assert_start_gme: bool,
    /// Schedule file: {"steps": [{"mode": "kron"|"kc", "l": 1, "partner": FILE,
    /// "gme_asserted": true}]}.
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyWitnessArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    witness: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct ScheduleFile {
    steps: Vec<ScheduleStep>,
}

#[derive(Deserialize)]
struct ScheduleStep {
    mode: String,
    #[serde(default)]
    l: Option<usize>,
    partner: PathBuf,
    #[serde(default)]
    gme_asserted: bool,
}

#[derive(Serialize)]
struct CertifyReport {
    schema_version: u32,
    command: String,
    state_file: String,
    k: usize,
    mode: String,
    seed: u64,
    dirs: usize,
    config: CertConfig,
    verdict: String,
    annotation: Option<String>,
    witness_file: Option<String>,
    witness_distance: Option<f64>,
    witness_residual: Option<f64>,
    evidence: Vec<udakit_core::cert::DirectionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<u64>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_)
        | Error::Json(_)
        | Error::StateFile(_)
        | Error::NotHermitian { .. }
        | Error::NotPositive { .. }
        | Error::TraceNotOne { .. }
        | Error::NotNormalized { .. }
        | Error::ShapeMismatch { .. }
        | Error::EmptyProfile
        | Error::LocalDimTooSmall { .. }
        | Error::DimensionCap { .. } => EXIT_DATA,
        Error::Numerical(_) | Error::FactorResidual { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    if let Ok(cap) = std::env::var("UDAKIT_MAX_DIM") {
        match cap.parse::<usize>() {
            Ok(v) if v > 0 => udakit_core::set_max_total_dim(v),
            _ => {
                eprintln!("error: UDAKIT_MAX_DIM must be a positive integer");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; help/version are not errors
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Gen(args) => run_gen(args),
        Command::Compose(args) => run_compose(args),
        Command::Kernel(args) => run_kernel(args),
        Command::Certify(args) => run_certify(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Pipeline(args) => run_pipeline_cmd(args),
        Command::VerifyWitness(args) => run_verify_witness(args),
        Command::Selftest => run_selftest(),
    }
}

fn load_density(path: &Path) -> Result<DensityMatrix, Error> {
    io::load(path)?.into_density()
}

fn parse_dims(s: &str) -> Result<DimProfile, Error> {
    let dims = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::BadParameter(format!("bad dimension entry '{t}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    DimProfile::new(dims)
}

fn run_gen(args: GenArgs) -> Result<u8, Error> {
    match args.family {
        GenFamily::W { a, b, c, out } => {
            let ket = w_state(&WParams::new(a, b, c)?)?;
            io::save(&out, &io::ket_to_file(&ket))?;
            println!("gen family=w dims=[2,2,2] out={}", out.display());
        }
        GenFamily::Ghz { n, lambda, out } => {
            let ket = generalized_ghz(n, lambda)?;
            io::save(&out, &io::ket_to_file(&ket))?;
            println!("gen family=ghz n={n} lambda={lambda} out={}", out.display());
        }
        GenFamily::Sigma { out } => {
            let state = sigma_state()?;
            io::save(&out, &io::density_to_file(&state))?;
            println!("gen family=sigma dims=[2,2,2] out={}", out.display());
        }
        GenFamily::Beta { d, p, out } => {
            let weights = p
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::BadParameter(format!("bad weight '{t}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let state = beta_state(&BetaParams::new(d, weights)?)?;
            io::save(&out, &io::density_to_file(&state))?;
            println!("gen family=beta d={d} out={}", out.display());
        }
    }
    Ok(0)
}

fn run_compose(args: ComposeArgs) -> Result<u8, Error> {
    let a = load_density(&args.a)?;
    let b = load_density(&args.b)?;
    let state = match args.mode {
        ComposeModeArg::Tensor => udakit_core::tensor_compose(&a, &b)?,
        ComposeModeArg::Kron => {
            let out = udakit_core::kron_compose(&a, &b)?;
            if out.swapped {
                eprintln!("note: factors swapped so the shorter profile merges first");
            }
            out.state
        }
        ComposeModeArg::Kc => {
            let l = args.l.ok_or_else(|| {
                Error::BadParameter("kc mode needs --l (number of merged pairs)".into())
            })?;
            udakit_core::kc_compose(&a, &b, l)?.state
        }
    };
    io::save(&args.out, &io::density_to_file(&state))?;
    println!(
        "compose dims={:?} out={}",
        state.profile().dims(),
        args.out.display()
    );
    Ok(0)
}

fn run_kernel(args: KernelArgs) -> Result<u8, Error> {
    let dims = parse_dims(&args.dims)?;
    let formula = kernel_dim_formula(&dims, args.k)?;
    let basis = correlation_kernel(&dims, args.k)?;
    println!("dim {}", basis.len());
    debug_assert_eq!(basis.len(), formula);
    if let Some(out) = args.out {
        #[derive(Serialize)]
        struct KernelDump {
            schema_version: u32,
            dims: Vec<usize>,
            k: usize,
            dim: usize,
            basis: Vec<io::StateFile>,
        }
        let dump = KernelDump {
            schema_version: 1,
            dims: dims.dims().to_vec(),
            k: args.k,
            dim: basis.len(),
            basis: basis
                .iter()
                .map(|cm| io::traceless_to_file(cm.op()))
                .collect(),
        };
        std::fs::write(&out, serde_json::to_string_pretty(&dump)?)?;
        println!("kernel basis written to {}", out.display());
    }
    Ok(0)
}

fn verdict_word(status: UdaStatus) -> &'static str {
    match status {
        UdaStatus::Uda => "UDA",
        UdaStatus::NotUda => "NotUDA",
        UdaStatus::Inconclusive => "Inconclusive",
    }
}

fn write_certify_report(
    args: &CertifyArgs,
    verdict: &UdaVerdict,
    config: &CertConfig,
    elapsed_ms: u64,
) -> Result<(), Error> {
    let witness_file = match (&verdict.witness, &args.out, &args.witness_out) {
        (Some(_), _, Some(path)) => Some(path.clone()),
        (Some(_), Some(report), None) => Some(report.with_extension("witness.json")),
        _ => None,
    };
    if let (Some(w), Some(path)) = (&verdict.witness, &witness_file) {
        io::save(path, &io::density_to_file(&w.sigma))?;
    }
    if let Some(out) = &args.out {
        let report = CertifyReport {
            schema_version: 1,
            command: "certify".into(),
            state_file: args.state.display().to_string(),
            k: args.k,
            mode: match args.mode {
                CertModeArg::Full => "full".into(),
                CertModeArg::Sampled => "sampled".into(),
            },
            seed: config.seed,
            dirs: match args.mode {
                CertModeArg::Full => verdict.evidence.len(),
                CertModeArg::Sampled => args.dirs,
            },
            config: config.clone(),
            verdict: verdict_word(verdict.status).into(),
            annotation: verdict.annotation.clone(),
            witness_file: witness_file.as_ref().map(|p| p.display().to_string()),
            witness_distance: verdict.witness.as_ref().map(|w| w.distance),
            witness_residual: verdict.witness.as_ref().map(|w| w.residual),
            evidence: verdict.evidence.clone(),
            timing_ms: args.timings.then_some(elapsed_ms),
        };
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn run_certify(args: CertifyArgs) -> Result<u8, Error> {
    let rho = load_density(&args.state)?;
    let mut config = CertConfig {
        seed: args.seed,
        ..CertConfig::default()
    };
    if let Some(v) = args.tol_feas {
        config.tol_feas = v;
    }
    if let Some(v) = args.uda_threshold {
        config.uda_threshold = v;
    }
    if let Some(v) = args.max_iter {
        config.max_iter = v;
    }
    let started = Instant::now();
    let verdict = match args.mode {
        CertModeArg::Full => certify_uda(&rho, args.k, &config)?,
        CertModeArg::Sampled => certify_uda_sampled(&rho, args.k, args.dirs, &config)?,
    };
    let elapsed_ms = started.elapsed().as_millis() as u64;
    write_certify_report(&args, &verdict, &config, elapsed_ms)?;

    println!(
        "certify verdict={} k={} mode={} seed={} dirs={}{}",
        verdict_word(verdict.status),
        args.k,
        match args.mode {
            CertModeArg::Full => "full",
            CertModeArg::Sampled => "sampled",
        },
        config.seed,
        verdict.evidence.len(),
        verdict
            .witness
            .as_ref()
            .map(|w| format!(" witness_distance={:.6}", w.distance))
            .unwrap_or_default()
    );
    if let Some(note) = &verdict.annotation {
        println!("  note: {note}");
    }
    if let Some(w) = &verdict.witness {
        println!(
            "  witness: distance {:.6}, marginal residual {:.3e}",
            w.distance, w.residual
        );
    }
    Ok(match verdict.status {
        UdaStatus::Uda => 0,
        UdaStatus::NotUda => 1,
        UdaStatus::Inconclusive => 2,
    })
}

fn run_oracle(args: OracleArgs) -> Result<u8, Error> {
    let rho = load_density(&args.state)?;
    let found = brute_oracle_search(&rho, args.k, args.budget, args.seed)?;
    #[derive(Serialize)]
    struct OracleReport {
        schema_version: u32,
        command: String,
        state_file: String,
        k: usize,
        budget: usize,
        seed: u64,
        witness_found: bool,
        witness_file: Option<String>,
        witness_distance: Option<f64>,
        witness_residual: Option<f64>,
    }
    let witness_file = match (&found, &args.out, &args.witness_out) {
        (Some(_), _, Some(p)) => Some(p.clone()),
        (Some(_), Some(report), None) => Some(report.with_extension("witness.json")),
        _ => None,
    };
    if let (Some(w), Some(path)) = (&found, &witness_file) {
        io::save(path, &io::density_to_file(&w.sigma))?;
    }
    if let Some(out) = &args.out {
        let report = OracleReport {
            schema_version: 1,
            command: "oracle".into(),
            state_file: args.state.display().to_string(),
            k: args.k,
            budget: args.budget,
            seed: args.seed,
            witness_found: found.is_some(),
            witness_file: witness_file.as_ref().map(|p| p.display().to_string()),
            witness_distance: found.as_ref().map(|w| w.distance),
            witness_residual: found.as_ref().map(|w| w.residual),
        };
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    match &found {
        Some(w) => {
            println!(
                "oracle witness_found=true distance={:.6} residual={:.3e}",
                w.distance, w.residual
            );
            Ok(1)
        }
        None => {
            println!("oracle witness_found=false budget={}", args.budget);
            Ok(0)
        }
    }
}

fn load_flagged(path: &Path, k: usize, gme_asserted: bool) -> Result<GmeUdaState, Error> {
    match io::load(path)? {
        LoadedState::Ket(ket) => GmeUdaState::pure(ket, k),
        LoadedState::Density(d) => Ok(GmeUdaState::mixed(d, k, gme_asserted)),
        LoadedState::Traceless(_) => Err(Error::StateFile(
            "pipeline inputs must be states, not correlation dumps".into(),
        )),
    }
}

fn run_pipeline_cmd(args: PipelineArgs) -> Result<u8, Error> {
    let start = load_flagged(&args.start, args.k, args.assert_start_gme)?;
    let text = std::fs::read_to_string(&args.schedule)?;
    let schedule: ScheduleFile = serde_json::from_str(&text)?;
    let mut steps = Vec::with_capacity(schedule.steps.len());
    for step in schedule.steps {
        let mode = match step.mode.as_str() {
            "kron" => GmeComposeMode::Kron,
            "kc" => GmeComposeMode::Kc(
                step.l
                    .ok_or_else(|| Error::BadParameter("kc step needs an l field".into()))?,
            ),
            other => {
                return Err(Error::BadParameter(format!(
                    "unknown pipeline mode '{other}' (use kron or kc)"
                )))
            }
        };
        steps.push(PipelineStep {
            mode,
            partner: load_flagged(&step.partner, args.k, step.gme_asserted)?,
        });
    }
    let result = run_pipeline(start, steps)?;
    io::save(&args.out, &io::density_to_file(result.density()))?;
    println!(
        "pipeline dims={:?} pure={} gme={} k={} out={}",
        result.profile().dims(),
        result.is_pure(),
        result.gme(),
        result.uda_k(),
        args.out.display()
    );
    for line in result.provenance() {
        println!("  step: {line}");
    }
    Ok(0)
}

fn run_verify_witness(args: VerifyWitnessArgs) -> Result<u8, Error> {
    let rho = load_density(&args.state)?;
    let sigma = load_density(&args.witness)?;
    let config = CertConfig::default();
    let report = verify_witness(&rho, &sigma, args.k, &config)?;
    #[derive(Serialize)]
    struct VerifyReport {
        schema_version: u32,
        command: String,
        pass: bool,
        min_eig: f64,
        trace: f64,
        max_marginal_residual: f64,
        distance: f64,
    }
    if let Some(out) = &args.out {
        let r = VerifyReport {
            schema_version: 1,
            command: "verify-witness".into(),
            pass: report.pass,
            min_eig: report.min_eig,
            trace: report.trace,
            max_marginal_residual: report.max_marginal_residual,
            distance: report.distance,
        };
        std::fs::write(out, serde_json::to_string_pretty(&r)?)?;
    }
    println!(
        "verify-witness pass={} distance={:.6} marginal_residual={:.3e} min_eig={:.3e}",
        report.pass, report.distance, report.max_marginal_residual, report.min_eig
    );
    Ok(if report.pass { 0 } else { 1 })
}

fn run_selftest() -> Result<u8, Error> {
    let mut passed = 0usize;
    let mut failed = 0usize;
    let mut check = |name: &str, ok: bool| {
        if ok {
            passed += 1;
            println!("selftest PASS {name}");
        } else {
            failed += 1;
            println!("selftest FAIL {name}");
        }
    };

    // kernel dimensions against the closed-form count
    for (dims, k, expect) in [
        (vec![2usize, 2], 1usize, 9usize),
        (vec![2, 2, 2], 1, 54),
        (vec![2, 2, 2], 2, 27),
        (vec![2, 3], 1, 24),
    ] {
        let p = DimProfile::new(dims.clone())?;
        let got = correlation_kernel(&p, k).map(|b| b.len());
        check(
            &format!("kernel dims {:?} k={k}", dims),
            matches!(got, Ok(d) if d == expect && kernel_dim_formula(&p, k)? == expect),
        );
    }

    // the two-qubit null-marginal family stays inside the computed kernel
    {
        let p = DimProfile::n_qubits(2)?;
        let kb = correlation_kernel(&p, 1)?;
        let mut ok = true;
        for i in 0..20 {
            let t = i as f64 * 0.37;
            let cm = udakit_core::two_qubit_null_marginal_family(
                t.sin(),
                [
                    Complex64::new(t.cos(), (2.0 * t).sin()),
                    Complex64::new((3.0 * t).cos(), 0.2),
                    Complex64::new(0.1 * t, -0.4),
                    Complex64::new(-0.3, 0.25 * t),
                ],
            );
            for party in 1..=2 {
                let red = udakit_core::partial_trace(
                    cm.op(),
                    &udakit_core::SubsetSpec::new(vec![party])?,
                )?;
                ok &= red.max_abs_entry() == 0.0;
            }
            ok &= kb.span_residual(cm.op()) < 1e-12;
        }
        check("two-qubit null-marginal family", ok);
    }

    // GHZ witness machinery
    {
        let config = CertConfig::default();
        let ghz = generalized_ghz(3, 0.5)?.projector();
        let verdict = certify_uda(&ghz, 2, &config)?;
        let ok = verdict.status == UdaStatus::NotUda
            && verdict
                .witness
                .as_ref()
                .map(|w| w.distance >= 0.7)
                .unwrap_or(false);
        check("generalized GHZ witness", ok);
    }

    // W-type uniqueness
    {
        let config = CertConfig::default();
        let w = w_state(&WParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)?)?.projector();
        let verdict = certify_uda(&w, 2, &config)?;
        check("W-type uniqueness", verdict.status == UdaStatus::Uda);
    }

    println!("selftest: {passed} passed, {failed} failed");
    Ok(if failed == 0 { 0 } else { 1 })
}
