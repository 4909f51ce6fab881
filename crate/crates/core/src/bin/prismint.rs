use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prismint::coefficients::MaterialData;
use prismint::harness::{self, MeshSpec, RunConfig};
use prismint::kernels::Precision;
use prismint::planner::{DeviceProfile, KernelVariant};
use prismint::{Error, Result};

#[derive(Parser)]
#[command(name = "prismint", version, about = "Prism element stiffness integration on an emulated GPU")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suites; exits nonzero if any check fails.
    Verify(RunArgs),
    /// Print the execution plan for one order and variant.
    Plan(PlanArgs),
    /// Time all selected (variant, p) pairs and write CSV/JSON reports.
    Bench(RunArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Bundled profile name (gtx580, hd5870) or a JSON file.
    #[arg(long, default_value = "gtx580")]
    profile: String,
    /// Kernel variant(s): reg-jac, reg-nojac, shm-jac, shm-nojac, a comma list, or all.
    #[arg(long, default_value = "all")]
    variant: String,
    /// Active work-groups per compute unit (overrides the profile).
    #[arg(long)]
    occupancy: Option<usize>,
    /// Work-group size (overrides the profile).
    #[arg(long)]
    wg: Option<usize>,
    /// Write a JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Compare planner output with the reference figures of the bundled profiles.
    #[arg(long)]
    check_tables: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Orders: a value, a comma list, or a range like 2-5.
    #[arg(long = "p", default_value = "2-5")]
    orders: String,
    /// Box mesh cells as nx,ny,nz (two prisms per cell).
    #[arg(long, default_value = "4,4,4")]
    mesh: String,
    #[arg(long, default_value_t = 0.1)]
    distortion: f64,
    #[arg(long, default_value_t = prismint::mesh::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "f32")]
    precision: String,
    #[arg(long, default_value_t = 1.0)]
    young: f64,
    #[arg(long, default_value_t = 0.3)]
    poisson: f64,
    /// Worker-pool width (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Timed repetitions (bench).
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Untimed warmup runs (bench).
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Write the benchmark CSV here; a long-format file is written next to it.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write kernel buffers of the first (p, variant) as little-endian binaries.
    #[arg(long)]
    dump_buffers: Option<PathBuf>,
    /// Flip one element to exercise the inverted-element error path.
    #[arg(long)]
    invert_element: Option<usize>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "p", default_value_t = 5)]
    p: usize,
    /// Elements available (default: as many as fit).
    #[arg(long)]
    elements: Option<usize>,
}

fn parse_orders(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse orders '{s}' (use 3, 2,4 or 2-5)"));
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once('-').or_else(|| part.split_once("..")) {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

fn parse_mesh(s: &str) -> Result<[usize; 3]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("cannot parse mesh '{s}' (use nx,ny,nz)")))?;
    match v.as_slice() {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(Error::Config(format!("mesh needs three sizes, got '{s}'"))),
    }
}

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let [nx, ny, nz] = parse_mesh(&a.mesh)?;
    let cfg = RunConfig {
        mesh: MeshSpec {
            nx,
            ny,
            nz,
            distortion: a.distortion,
            seed: a.seed,
        },
        orders: parse_orders(&a.orders)?,
        variants: KernelVariant::parse_list(&a.common.variant)?,
        profile: a.common.profile.clone(),
        precision: a.precision.parse::<Precision>()?,
        material: MaterialData {
            young_e: a.young,
            poisson_nu: a.poisson,
        },
        occupancy_groups: a.common.occupancy,
        wg_override: a.common.wg,
        workers: a.workers,
        reps: a.reps,
        warmup: a.warmup,
        csv: a.csv.clone(),
        json: a.common.json.clone(),
        dump_buffers: a.dump_buffers.clone(),
        check_tables: a.common.check_tables,
        invert_element: a.invert_element,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes to stdout; a closed pipe (`prismint plan | head`) ends the process quietly.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() == ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error writing output: {e}");
        std::process::exit(70);
    }
}

fn write_json<T: serde::Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, serde_json::to_string_pretty(value)?)?;
    }
    Ok(())
}

fn verify(a: &RunArgs) -> Result<()> {
    let cfg = run_config(a)?;
    let report = harness::verify(&cfg)?;
    emit(&report.summary());
    write_json(&cfg.json, &report)?;
    if report.ok {
        Ok(())
    } else {
        Err(Error::VerificationFailed {
            failed: report.failed,
            total: report.checks.len(),
        })
    }
}

fn plan(a: &PlanArgs) -> Result<()> {
    let c = &a.common;
    let profile = DeviceProfile::resolve(&c.profile)?;
    let variants = KernelVariant::parse_list(&c.variant)?;
    let mut opts = profile.options(a.p);
    if let Some(g) = c.occupancy {
        opts.occupancy_groups = g;
    }
    if c.wg.is_some() {
        opts.wg_override = c.wg;
    }
    let mut reports = Vec::new();
    for v in variants {
        let r = harness::plan_report(&profile, a.p, v, a.elements.unwrap_or(usize::MAX), &opts)?;
        emit(&r.plan.table());
        emit(&format!("{}\n", serde_json::to_string_pretty(&r)?));
        reports.push(r);
    }
    write_json(&c.json, &reports)?;
    if c.check_tables {
        let (checks, notes) = harness::check_planner_tables(&c.profile, &profile)?;
        for ch in &checks {
            emit(&format!("{}\n", ch.line()));
        }
        for n in &notes {
            emit(&format!("note: {n}\n"));
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        if failed > 0 {
            return Err(Error::VerificationFailed {
                failed,
                total: checks.len(),
            });
        }
    }
    Ok(())
}

fn bench(a: &RunArgs) -> Result<()> {
    let cfg = run_config(a)?;
    let report = harness::bench(&cfg)?;
    emit(&report.table());
    if let Some(path) = &cfg.csv {
        report.write_csv(path)?;
        report.write_long_csv(&path.with_extension("long.csv"))?;
    }
    write_json(&cfg.json, &report)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => verify(a),
        Command::Plan(a) => plan(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}] code={}: {e}", e.kind(), e.code());
            ExitCode::from(e.code().clamp(1, 255) as u8)
        }
    }
}
