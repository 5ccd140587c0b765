use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ppmc_core::family;
use ppmc_core::fixtures::{load_fixture_file, FixtureRecord};
use ppmc_core::pipeline::{
    self, Check, DemoAlgebra, FamilyParams, FlagDemoParams, RunConfig, DEFAULT_GRID,
};
use ppmc_core::{Error, Exec, Tolerances};

/// Numerical verification of Kähler immersions with parallel pluri-mean curvature.
#[derive(Parser, Debug)]
#[command(name = "ppmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run checks on fixtures and compare with the expected-flag ledger.
    Verify(VerifyArgs),
    /// Integrate a member of the associated family of a pluriminimal fixture.
    Family(FamilyArgs),
    /// Build a canonical element of u(n) or so(n) and grade the algebra.
    FlagDemo(FlagDemoArgs),
    /// Print the fixture registry with its expected flags.
    ListFixtures(ListArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    #[arg(long = "tol-tier1", default_value_t = 1e-8)]
    tol_tier1: f64,
    #[arg(long = "tol-tier2", default_value_t = 1e-5)]
    tol_tier2: f64,
    #[arg(long = "tol-tier3", default_value_t = 1e-3)]
    tol_tier3: f64,
    /// Evaluate on one thread.
    #[arg(long)]
    sequential: bool,
    /// Extra fixtures in TOML form.
    #[arg(long = "fixture-file")]
    fixture_file: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl Common {
    fn tolerances(&self) -> Tolerances {
        Tolerances { tier1: self.tol_tier1, tier2: self.tol_tier2, tier3: self.tol_tier3 }
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn extra_fixtures(&self) -> Result<Vec<FixtureRecord>, Error> {
        match &self.fixture_file {
            Some(p) => load_fixture_file(p),
            None => Ok(Vec::new()),
        }
    }
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Comma-separated fixture names (default: all).
    #[arg(long, value_delimiter = ',')]
    fixtures: Vec<String>,
    /// Comma-separated check names, or `all`.
    #[arg(long, default_value = "all")]
    checks: String,
    /// Interior grid points per chart axis.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Comma-separated angles for the family checks (default: kπ/8, k = 0..8).
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leave per-check run times out of the report.
    #[arg(long = "no-timing")]
    no_timing: bool,
    /// Dump complex flag frames at the first grid point.
    #[arg(long = "export-frames")]
    export_frames: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct FamilyArgs {
    #[arg(long, default_value = "catenoid")]
    fixture: String,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    #[arg(long, default_value_t = 41)]
    grid: usize,
    /// Triangle mesh of the integrated member.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Structure-equation residuals over the θ sweep.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgebraArg {
    Unitary,
    Orthogonal,
}

#[derive(Args, Debug)]
struct FlagDemoArgs {
    #[arg(long, value_enum, default_value_t = AlgebraArg::Unitary)]
    algebra: AlgebraArg,
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Eigenspace dimensions (orthogonal: d_1, ..., d_r).
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    dims: Vec<usize>,
    /// Orthogonal levels 1/2, 3/2, ...
    #[arg(long = "half-integer")]
    half_integer: bool,
    /// Explicit unitary spectrum, e.g. `0,0,2,2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    spectrum: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random complex-structure pairs to split.
    #[arg(long = "split-pairs", default_value_t = 0)]
    split_pairs: usize,
    /// Include matrices in the report.
    #[arg(long)]
    dump: bool,
    /// Run every construction of the appendix sweep instead.
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ListArgs {
    #[arg(long = "fixture-file")]
    fixture_file: Option<PathBuf>,
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let cfg = RunConfig {
        fixtures: args.fixtures,
        checks: Check::parse_list(&args.checks)?,
        grid: args.grid,
        h: args.common.h,
        tolerances: args.common.tolerances(),
        thetas: if args.theta.is_empty() { family::theta_sweep() } else { args.theta },
        seed: args.seed,
        timing: !args.no_timing,
        export_frames: args.export_frames,
        exec: args.common.exec(),
        fixture_file: args.common.fixture_file.as_ref().map(|p| p.display().to_string()),
        extra_fixtures: args.common.extra_fixtures()?,
    };
    let report = pipeline::run(&cfg)?;
    println!("{:<20} {:<18} {:<13} {:>12} {:>10}", "fixture", "check", "status", "residual", "threshold");
    for (name, fr) in &report.fixtures {
        for (check, r) in &fr.checks {
            let res = r.residual.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
            println!("{name:<20} {check:<18} {:<13} {res:>12} {:>10.1e}", r.status.to_string(), r.threshold);
        }
        for m in &fr.mismatches {
            println!("{name:<20} MISMATCH flag {} expected {} got {}", m.flag, m.expected, m.status);
        }
    }
    println!("flag mismatches: {}", report.mismatch_count);
    if let Some(path) = &args.common.report {
        write_text(path, &report.to_json())?;
    }
    Ok(if report.has_mismatch() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn family_cmd(args: FamilyArgs) -> Result<ExitCode, Error> {
    let params = FamilyParams {
        fixture: args.fixture,
        theta: args.theta,
        grid: args.grid,
        h: args.common.h,
        tolerances: args.common.tolerances(),
        exec: args.common.exec(),
        extra_fixtures: args.common.extra_fixtures()?,
        ..FamilyParams::default()
    };
    let (report, member) = pipeline::family_run(&params)?;
    println!("fixture {} theta {:.7}", params.fixture, params.theta);
    println!("closedness {:.3e}", report.closedness);
    println!(
        "metric deviation {:.3e} (pointwise {:.3e}, integrated {:.3e})",
        member.metric_deviation(),
        report.metric_deviation_pointwise,
        report.metric_deviation_integrated
    );
    if let Some(c) = &report.conjugate {
        println!("procrustes rms to {} {:.3e} (reflection {})", c.fixture, c.rms, c.reflection);
    }
    if let Some(path) = &args.mesh {
        let mut w = BufWriter::new(File::create(path)?);
        family::write_mesh(&member, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.csv {
        let mut w = BufWriter::new(File::create(path)?);
        family::write_sweep_csv(&report.structure, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.common.report {
        write_text(path, &report.to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn flag_demo(args: FlagDemoArgs) -> Result<ExitCode, Error> {
    if args.sweep {
        let sweep = pipeline::appendix_sweep()?;
        for c in &sweep.cases {
            let even = c.even_space.as_ref().map(|e| format!(" even-space case {} {}", e.case, e.pass)).unwrap_or_default();
            println!(
                "{:<28} C1 {} C2 {} ({}/{}) a3 {:.1e} bracket {:.1e}{even}",
                c.label, c.c1, c.c2, c.closure_dim, c.algebra_dim, c.a3, c.bracket
            );
        }
        println!(
            "gap-two spectrum: closure {} of {} (C2 {})",
            sweep.gap_two.closure_dim, sweep.gap_two.algebra_dim, sweep.gap_two.pass
        );
        if let Some(path) = &args.report {
            write_text(path, &pipeline::to_sorted_json(&sweep))?;
        }
        return Ok(ExitCode::SUCCESS);
    }
    let params = FlagDemoParams {
        algebra: match args.algebra {
            AlgebraArg::Unitary => DemoAlgebra::Unitary,
            AlgebraArg::Orthogonal => DemoAlgebra::Orthogonal,
        },
        n: args.n,
        dims: args.dims,
        half_integer: args.half_integer,
        spectrum: args.spectrum,
        seed: args.seed,
        split_pairs: args.split_pairs,
        dump_matrices: args.dump,
    };
    let r = pipeline::flag_demo(&params)?;
    println!("eigenvalues {:?} dims {:?}", r.eigenvalues, r.eigenspace_dims);
    println!("degree  dim");
    for (deg, dim) in &r.grading {
        println!("{deg:>6}  {dim}");
    }
    println!("C1 {} (defect {:.1e})", r.c1, r.c1_defect);
    println!(
        "C2 {} (closure {} of {}, {} with centre)",
        r.c2, r.generation.closure_dim, r.generation.algebra_dim, r.generation.with_center
    );
    println!("cartan k {} p {}", r.cartan.dim_k, r.cartan.dim_p);
    if let Some(s) = &r.split {
        println!(
            "split {} pairs: reconstruction {:.1e} blocks {:.1e} degenerate ok {}",
            s.pairs, s.reconstruction, s.block_identities, s.degenerate_ok
        );
    }
    if let Some(path) = &args.report {
        write_text(path, &r.to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn list(args: ListArgs) -> Result<ExitCode, Error> {
    let extra = match &args.fixture_file {
        Some(p) => load_fixture_file(p)?,
        None => Vec::new(),
    };
    let flag = |f: Option<bool>| match f {
        Some(true) => "T",
        Some(false) => "F",
        None => "-",
    };
    println!("{:<20} {:>3} {:>3}  K P M H I S  notes", "name", "n", "m");
    for f in pipeline::list_fixtures(&extra) {
        let e = f.expected;
        println!(
            "{:<20} {:>3} {:>3}  {} {} {} {} {} {}  {}",
            f.name,
            f.ambient_dim,
            f.complex_dim,
            flag(e.kaehler),
            flag(e.ppmc),
            flag(e.pluriminimal),
            flag(e.half_isotropic),
            flag(e.isotropic),
            flag(e.spherical),
            f.notes
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Family(a) => family_cmd(a),
        Command::FlagDemo(a) => flag_demo(a),
        Command::ListFixtures(a) => list(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
