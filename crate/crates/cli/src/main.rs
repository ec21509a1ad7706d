use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperpol::hbn::{ring_census, Species};
use hyperpol::io::{parse_config, Format, OutputSet, RunManifest};
use hyperpol::protocol::{
    prepare_hbn, run_chain_experiment, run_hbn_experiment, run_sweep, Azimuth, ConfigDocument, Engine, HbnConfig, LatticeSpec, TimeSeries,
};
use hyperpol::{Error, Result};

#[derive(Parser)]
#[command(name = "hyperpol", version, about = "Active hyperpolarization of nuclear-spin baths: exact and Gaussian engines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Central-spin chain run from a `"system": "chain"` document.
    Chain(RunArgs),
    /// Boron-vacancy lattice run from a `"system": "hbn"` document.
    Hbn(RunArgs),
    /// Chain parameter grid from a `"system": "sweep"` document.
    Sweep(RunArgs),
    /// Export lattice geometry and couplings.
    Lattice(LatticeArgs),
    /// Run the invariant suite on small instances.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration (or a manifest from an earlier run).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the configured record stride.
    #[arg(long)]
    record_every: Option<usize>,
}

#[derive(Args)]
struct LatticeArgs {
    /// Take lattice and field from an hbn document instead of the flags.
    #[arg(long, conflicts_with_all = ["sites", "rings", "field", "theta_deg", "phi_deg"])]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "rings")]
    sites: Option<usize>,
    #[arg(long)]
    rings: Option<usize>,
    /// Field strength in tesla.
    #[arg(long, default_value_t = 1.0)]
    field: f64,
    #[arg(long, default_value_t = 45.0)]
    theta_deg: f64,
    #[arg(long, default_value_t = 0.0)]
    phi_deg: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Chain(a) => with_workers(a.workers, || run_document(&a, "chain")),
        Command::Hbn(a) => with_workers(a.workers, || run_document(&a, "hbn")),
        Command::Sweep(a) => with_workers(a.workers, || run_document(&a, "sweep")),
        Command::Lattice(a) => with_workers(a.workers, || lattice(&a)),
        Command::Validate(a) => with_workers(a.workers, validate),
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", workers.unwrap_or(0))))?;
    pool.install(f)
}

fn load(args: &RunArgs, expected: &str) -> Result<ConfigDocument> {
    let mut doc = parse_config(&args.config)?;
    let system = match &doc {
        ConfigDocument::Chain(_) => "chain",
        ConfigDocument::Hbn(_) => "hbn",
        ConfigDocument::Sweep(_) => "sweep",
    };
    if system != expected {
        return Err(Error::Config(format!("`{expected}` needs a \"system\": \"{expected}\" document, got \"{system}\"")));
    }
    let (seed, record_every) = match &mut doc {
        ConfigDocument::Chain(c) => (&mut c.seed, &mut c.record_every),
        ConfigDocument::Hbn(c) => (&mut c.seed, &mut c.record_every),
        ConfigDocument::Sweep(s) => (&mut s.base.seed, &mut s.base.record_every),
    };
    if let Some(s) = args.seed {
        *seed = s;
    }
    if let Some(k) = args.record_every {
        *record_every = k;
    }
    doc.validate()?;
    Ok(doc)
}

fn print_series(s: &TimeSeries) {
    let Some(last) = s.last() else { return };
    print!("{:>5}  cycle {:>7}  t {:<12.6}  mean {:+.6}", s.engine, last.cycle, last.t, last.mean());
    for g in s.groups.iter().filter(|g| g.name.starts_with("species_")) {
        let v = g.members.iter().map(|&i| last.per_site[i]).sum::<f64>() / g.members.len() as f64;
        print!("  {} {:+.6}", g.name, v);
    }
    println!();
}

fn run_document(args: &RunArgs, expected: &str) -> Result<ExitCode> {
    let doc = load(args, expected)?;
    let mut manifest = RunManifest::new(&doc, rayon::current_num_threads())?;
    let mut out = OutputSet::new(&args.out, args.format.into())?;
    match &doc {
        ConfigDocument::Chain(cfg) => {
            let res = run_chain_experiment(cfg)?;
            res.series().for_each(print_series);
            if let Some(c) = &res.comparison {
                println!("max |exact - hpa| = {:.3e}, final epsilon = {:?}", c.max_gap(), c.final_epsilon());
            }
            out.write_chain(&res)?;
        }
        ConfigDocument::Hbn(cfg) => {
            let res = run_hbn_experiment(cfg)?;
            println!(
                "phi = {} deg, omega_N = {:.6} rad/us, omega_B = {:.6} rad/us, tau_N = {:.6} us, tau_B = {:.6} us",
                res.setup.phi_deg, res.setup.omega_n, res.setup.omega_b, res.setup.tau_n, res.setup.tau_b
            );
            res.series().for_each(print_series);
            manifest.record_hbn(&res);
            out.write_hbn(&res)?;
        }
        ConfigDocument::Sweep(spec) => {
            let table = run_sweep(spec)?;
            let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} grid points, {failed} failed", table.rows.len());
            out.write_sweep(&table)?;
        }
    }
    let manifest = out.finish(manifest)?;
    println!("wrote {} files and manifest.json to {}", manifest.outputs.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn lattice_config(args: &LatticeArgs) -> Result<HbnConfig> {
    if let Some(path) = &args.config {
        return match parse_config(path)? {
            ConfigDocument::Hbn(c) => Ok(c),
            _ => Err(Error::Config("`lattice --config` needs an hbn document".into())),
        };
    }
    let lattice = match (args.sites, args.rings) {
        (_, Some(k)) => LatticeSpec::Rings(k),
        (Some(n), None) => LatticeSpec::Sites(n),
        (None, None) => LatticeSpec::Rings(2),
    };
    let mut cfg = HbnConfig::lattice_run(1, 0, Engine::Hpa);
    cfg.lattice = lattice;
    cfg.field = args.field;
    cfg.theta_deg = args.theta_deg;
    cfg.phi = Azimuth::Degrees(args.phi_deg);
    Ok(cfg)
}

fn write_rings(out: &mut OutputSet, sites: &[hyperpol::hbn::LatticeSite]) -> Result<()> {
    let mut text = String::from("ring,distance,B,N\n");
    for r in ring_census(sites) {
        let count = |sp| r.counts.get(&sp).copied().unwrap_or(0);
        text.push_str(&format!("{},{},{},{}\n", r.ring, hyperpol::io::fmt_float(r.distance), count(Species::Boron11), count(Species::Nitrogen14)));
    }
    out.write("rings.csv", text.as_bytes())?;
    Ok(())
}

fn lattice(args: &LatticeArgs) -> Result<ExitCode> {
    let cfg = lattice_config(args)?;
    let doc = ConfigDocument::Hbn(cfg.clone());
    let manifest = RunManifest::new(&doc, rayon::current_num_threads())?;
    let setup = prepare_hbn(&cfg)?;
    let mut out = OutputSet::new(&args.out, Format::Csv)?;
    let mut table = Vec::new();
    setup.table.write_csv(&mut table)?;
    out.write("couplings.csv", &table)?;
    write_rings(&mut out, &setup.table.sites)?;
    println!("{} sites, phi = {} deg, written to {}", setup.table.sites.len(), setup.phi_deg, args.out.display());
    out.finish(manifest)?;
    Ok(ExitCode::SUCCESS)
}

fn validate() -> Result<ExitCode> {
    let checks = hyperpol::checks::invariant_suite()?;
    let mut ok = true;
    for c in &checks {
        println!("{} {:<38} {:.3e} (bound {:.0e})", if c.passed() { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
        ok &= c.passed();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
