//! The `vmsns` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::diagnostics::{a_priori_bound, error_norms, interpolated_norm_report, ledger_total, observed_rates};
use crate::error::{Result, VmsError};
use crate::fe::assemble_load;
use crate::fields::{mms_pressure, mms_velocity, mms_velocity_gradient, Forcing};
use crate::io::config::{parse_config, OutputFormat, ScenarioConfig};
use crate::io::ledger::{check_ledger, read_ledger, write_ledger, CHECK_TOL};
use crate::io::vtk::write_fields;
use crate::mesh::build_structured;
use crate::solver::{Discretization, RunOutput, StarState};
use crate::spectral::spectra_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Relative energy imbalance above which `run` and `study` report an
/// invariant violation.
pub const RUN_IMBALANCE_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "vmsns", version, about = "VMS Navier-Stokes solver with dynamic orthogonal subscales")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and write its energy ledger.
    Run(Common),
    /// Solve on a sequence of refined meshes and tabulate errors and energies.
    Study(Common),
    /// Run the spectral measurements and write the equivalence report.
    Spectra(SpectraArgs),
    /// Re-verify the imbalance column of a ledger file.
    Check(CheckArgs),
    /// Compute the initial projection only and write the state.
    Init(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Refinement levels (study only).
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    /// Scenario file supplying `mesh.dim` and the base `mesh.n`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub ledger: PathBuf,
    #[arg(long, default_value_t = CHECK_TOL)]
    pub tol: f64,
}

pub fn exit_code(e: &VmsError) -> i32 {
    match e.root() {
        VmsError::Config(_) | VmsError::Input(_) | VmsError::Size { .. } | VmsError::Parse { .. } | VmsError::Io { .. } => {
            EXIT_CONFIG
        }
        VmsError::Solver(_) | VmsError::NonConvergence { .. } | VmsError::Divergence(_) => EXIT_NONCONVERGENCE,
        VmsError::Invariant(_) => EXIT_INVARIANT,
        VmsError::Step { .. } => unreachable!("root strips step wrappers"),
    }
}

/// Caps the rayon pool at `VMSNS_THREADS` if set; dense kernels run serially.
pub fn init_parallelism() {
    faer::set_global_parallelism(faer::Par::Seq);
    if let Some(n) = std::env::var("VMSNS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(a) => {
            let cfg = parse_config(&a.config)?;
            let out = a.out.unwrap_or_else(|| cfg.out_dir.clone());
            cmd_run(&cfg, &out)
        }
        Command::Study(a) => {
            let cfg = parse_config(&a.config)?;
            let out = a.out.unwrap_or_else(|| cfg.out_dir.clone());
            cmd_study(&cfg, a.levels, &out)
        }
        Command::Init(a) => {
            let cfg = parse_config(&a.config)?;
            let out = a.out.unwrap_or_else(|| cfg.out_dir.clone());
            cmd_init(&cfg, &out)
        }
        Command::Spectra(a) => {
            let (dim, n, dir) = match &a.config {
                Some(p) => {
                    let cfg = parse_config(p)?;
                    (cfg.dim, cfg.n, cfg.out_dir)
                }
                None => (2, 4, PathBuf::from("out")),
            };
            cmd_spectra(dim, n, a.levels, a.seed, &a.out.unwrap_or(dir))
        }
        Command::Check(a) => cmd_check(&a.ledger, a.tol),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| VmsError::io(dir, e))
}

/// Discretization, load vector and initial state of a scenario on an
/// `n`-per-side mesh.
pub struct Scenario {
    pub disc: Discretization,
    pub load: Vec<f64>,
    pub initial: StarState,
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig, n: usize) -> Result<Self> {
        let mesh = Arc::new(build_structured(cfg.dim, n, cfg.domain)?);
        let disc = Discretization::new(mesh, 1)?;
        let forcing = cfg.forcing;
        let load = assemble_load(&disc.velocity, |x| forcing.eval(x));
        let (initial, _) = disc.initialize(|x| cfg.initial.eval(cfg.dim, x))?;
        Ok(Scenario { disc, load, initial })
    }

    pub fn run(&self, cfg: &ScenarioConfig) -> Result<RunOutput> {
        self.disc.run(
            self.initial.clone(),
            &self.load,
            &cfg.solve_config(),
            &cfg.stab_params(),
            cfg.snapshot_every,
        )
    }
}

fn worst_imbalance(out: &RunOutput, dt: f64) -> f64 {
    out.ledger.iter().fold(0.0, |m: f64, r| m.max(r.relative_imbalance(dt)))
}

fn guard_imbalance(out: &RunOutput, dt: f64) -> Result<()> {
    let w = worst_imbalance(out, dt);
    if w > RUN_IMBALANCE_TOL {
        return Err(VmsError::Invariant(format!("relative energy imbalance {w:e} exceeds {RUN_IMBALANCE_TOL:e}")));
    }
    Ok(())
}

pub fn cmd_run(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    let sc = Scenario::build(cfg, cfg.n)?;
    let out = sc.run(cfg)?;
    write_ledger(&out_dir.join("ledger.csv"), &out.ledger)?;
    if cfg.wants(OutputFormat::Csv) {
        let rep = interpolated_norm_report(&sc.disc, &out.snapshots);
        let mut s = String::from("r,k,direct,interpolated\n");
        for e in &rep.entries {
            let _ = writeln!(s, "{:?},{:?},{:?},{:?}", e.r, e.k, e.direct, e.interpolated);
        }
        let p = out_dir.join("norms.csv");
        std::fs::write(&p, s).map_err(|e| VmsError::io(&p, e))?;
    }
    if cfg.wants(OutputFormat::Vtk) {
        for (i, s) in out.snapshots.iter().enumerate() {
            write_fields(&sc.disc, s, &out_dir.join(format!("snapshot_{i:04}.vtk")))?;
        }
    }
    let last = out.ledger.last().copied().unwrap_or_default();
    println!(
        "run: {} steps, final energy {:e}, worst relative imbalance {:e}, output in {}",
        out.ledger.len(),
        last.total_energy(),
        worst_imbalance(&out, cfg.dt),
        out_dir.display()
    );
    guard_imbalance(&out, cfg.dt)
}

struct LevelResult {
    n: usize,
    h: f64,
    errors: Option<[f64; 3]>,
    total: f64,
    bound: f64,
    final_energy: f64,
    imbalance: f64,
}

pub fn cmd_study(cfg: &ScenarioConfig, levels: usize, out_dir: &Path) -> Result<()> {
    if levels == 0 {
        return Err(VmsError::Config("--levels must be at least 1".into()));
    }
    create_dir(out_dir)?;
    let manufactured = matches!(cfg.forcing, Forcing::Manufactured { .. });
    let results: Vec<Result<LevelResult>> = (0..levels)
        .into_par_iter()
        .map(|k| {
            let n = cfg.n << k;
            let dir = out_dir.join(format!("level_{k}"));
            create_dir(&dir)?;
            let sc = Scenario::build(cfg, n)?;
            let out = sc.run(cfg)?;
            write_ledger(&dir.join("ledger.csv"), &out.ledger)?;
            if cfg.wants(OutputFormat::Vtk) {
                write_fields(&sc.disc, &out.final_state, &dir.join("final.vtk"))?;
            }
            guard_imbalance(&out, cfg.dt)?;
            let errors = manufactured.then(|| {
                let e = error_norms(&sc.disc, &out.final_state, mms_velocity, mms_velocity_gradient, mms_pressure);
                [e.u_l2, e.u_h1, e.p_l2]
            });
            let sc_cfg = cfg.solve_config();
            Ok(LevelResult {
                n,
                h: sc.disc.h,
                errors,
                total: ledger_total(&out.ledger, out.initial.t),
                bound: a_priori_bound(&sc.disc, &sc.initial, &sc.load, cfg.dt, sc_cfg.n_steps(), cfg.nu)?,
                final_energy: out.ledger.last().map_or(0.0, |r| r.total_energy()),
                imbalance: worst_imbalance(&out, cfg.dt),
            })
        })
        .collect();
    let results: Vec<LevelResult> = results.into_iter().collect::<Result<_>>()?;

    let hs: Vec<f64> = results.iter().map(|r| r.h).collect();
    let mut rates = vec![[f64::NAN; 3]; results.len()];
    if manufactured {
        for c in 0..3 {
            let e: Vec<f64> = results.iter().map(|r| r.errors.map_or(f64::NAN, |e| e[c])).collect();
            for (i, r) in observed_rates(&hs, &e).into_iter().enumerate() {
                rates[i + 1][c] = r;
            }
        }
    }
    let mut s = String::from("level,n,h,u_l2,u_h1,p_l2,rate_u_l2,rate_u_h1,rate_p_l2\n");
    for (k, r) in results.iter().enumerate() {
        let e = r.errors.unwrap_or([f64::NAN; 3]);
        let _ = writeln!(
            s,
            "{k},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.n, r.h, e[0], e[1], e[2], rates[k][0], rates[k][1], rates[k][2]
        );
    }
    let p = out_dir.join("rates.csv");
    std::fs::write(&p, s).map_err(|e| VmsError::io(&p, e))?;

    let mut s = String::from("level,n,h,final_energy,ledger_total,a_priori_bound,max_rel_imbalance\n");
    for (k, r) in results.iter().enumerate() {
        let _ = writeln!(
            s,
            "{k},{},{:?},{:?},{:?},{:?},{:?}",
            r.n, r.h, r.final_energy, r.total, r.bound, r.imbalance
        );
    }
    let p = out_dir.join("energy.csv");
    std::fs::write(&p, s).map_err(|e| VmsError::io(&p, e))?;
    for (k, r) in results.iter().enumerate() {
        println!(
            "level {k}: n {} h {:.4e} total {:.6e} bound {:.6e} rates {:?}",
            r.n, r.h, r.total, r.bound, rates[k]
        );
    }
    Ok(())
}

pub fn cmd_init(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    let sc = Scenario::build(cfg, cfg.n)?;
    let s = &sc.initial;
    write_fields(&sc.disc, s, &out_dir.join("init.vtk"))?;
    println!(
        "init: |u0h| {:e}, |tilde0| {:e}, divergence residual {:e}",
        sc.disc.mass.bilinear(&s.u, &s.u).max(0.0).sqrt(),
        sc.disc.projector.norm(&s.tilde.values),
        sc.disc.divergence_residual(s)
    );
    Ok(())
}

pub fn cmd_spectra(dim: usize, n: usize, levels: usize, seed: u64, out_dir: &Path) -> Result<()> {
    if levels == 0 {
        return Err(VmsError::Config("--levels must be at least 1".into()));
    }
    create_dir(out_dir)?;
    let report = spectra_suite(dim, n, levels, seed)?;
    report.write_csv(&out_dir.join("equivalence.csv"))?;
    if !report.all_finite_positive() {
        return Err(VmsError::Invariant("equivalence report holds negative or non-finite values".into()));
    }
    println!("spectra: {} rows written to {}", report.rows.len(), out_dir.join("equivalence.csv").display());
    Ok(())
}

pub fn cmd_check(path: &Path, tol: f64) -> Result<()> {
    let rows = read_ledger(path)?;
    let c = check_ledger(&rows, tol);
    if c.ok() {
        println!("check: {} rows, worst relative imbalance {:e}", c.rows, c.worst);
        return Ok(());
    }
    for (row, why) in &c.failures {
        eprintln!("row {row}: {why}");
    }
    Err(VmsError::Invariant(format!("{} of {} ledger rows failed", c.failures.len(), c.rows)))
}
