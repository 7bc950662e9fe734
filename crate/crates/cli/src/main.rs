use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forge_core::experiment::{resolve_out, run_experiment, ExperimentConfig, ExperimentKind, RunOptions, RunReport};
use forge_core::geometry::audit_map;
use forge_core::io::Manifest;
use forge_core::{ForgeError, Result};

#[derive(Parser)]
#[command(
    name = "forge",
    version,
    about = "Blow-up solutions of the focusing wave equation on prescribed hypersurfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived model parameters.
    Params(Common),
    /// Localize the surface and audit the flattening map.
    Geometry(Common),
    /// Build the ansatz stack and check its residuals.
    Ansatz(Common),
    /// Integrate the w-equation for every n in the config.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Prebuilt ansatz stack directory.
        #[arg(long)]
        stack: Option<PathBuf>,
    },
    /// Pull the solution back to (t, x) and evaluate the blow-up diagnostics.
    Pullback {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        stack: Option<PathBuf>,
    },
    /// Run every experiment selected in the config.
    Run(Common),
    /// Re-check manifests and checksums under a directory.
    Verify {
        dir: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn options(common: &Common, cfg: &ExperimentConfig, stack: Option<PathBuf>) -> RunOptions {
    RunOptions {
        out: resolve_out(common.out.as_deref(), cfg),
        cache: std::env::var_os("FORGE_CACHE").map(PathBuf::from),
        quiet: common.quiet,
        stack,
        save_stack: false,
    }
}

fn report(rep: &RunReport, quiet: bool) -> ExitCode {
    let fails = rep.failures();
    if !quiet {
        eprintln!("{} checks, {} failed; outputs in {}", rep.checks.len(), fails.len(), rep.out_dir);
    }
    if rep.passed() {
        ExitCode::SUCCESS
    } else {
        for c in fails.iter().filter(|c| !c.claim || rep.strict_claims) {
            eprintln!("gate failed: [{}] {}", c.stage, c.name);
        }
        ExitCode::from(1)
    }
}

fn staged(common: &Common, kinds: &[ExperimentKind], stack: Option<PathBuf>, save_stack: bool) -> Result<ExitCode> {
    let mut cfg = load(common)?;
    cfg.experiments = kinds.to_vec();
    let mut opts = options(common, &cfg, stack);
    opts.save_stack = save_stack;
    let rep = run_experiment(&cfg, &opts)?;
    Ok(report(&rep, common.quiet))
}

fn params(common: &Common) -> Result<ExitCode> {
    let cfg = load(common)?;
    let params = cfg.model.params()?;
    let text = serde_json::to_string_pretty(&params)?;
    println!("{text}");
    if let Some(out) = &common.out {
        std::fs::create_dir_all(out)?;
        let mut m = Manifest::new("params", serde_json::json!({ "config": cfg }));
        m.add_file(out, "params.json", text.as_bytes())?;
        m.write(out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn geometry(common: &Common) -> Result<ExitCode> {
    let cfg = load(common)?;
    let out = resolve_out(common.out.as_deref(), &cfg);
    let bundle = cfg.stack_inputs()?.bundle().map_err(|e| e.in_stage("geometry"))?;
    let region = forge_core::geometry::InfluenceRegion::new(bundle.ell, cfg.solver.delta0)?;
    let radius = bundle.r;
    let map = forge_core::geometry::LorentzGraphMap::new(bundle, region.tau0);
    let audit = audit_map(&map, cfg.verify.map_samples, cfg.seed, 2.0 * radius, 1e-4)?;
    let pass = audit.round_trip <= 1e-10 && audit.det_deviation <= 1e-4 && audit.x1_residual <= audit.x1_tol;
    std::fs::create_dir_all(&out)?;
    let mut m = Manifest::new("geometry", serde_json::json!({ "config": cfg, "pass": pass }));
    m.add_file(&out, "geometry.json", &serde_json::to_vec_pretty(&audit)?)?;
    m.write(&out)?;
    if !common.quiet {
        eprintln!(
            "geometry: r = {radius:.4e}, round trip {:.2e}, |det - 1| {:.2e}, X1 residual {:.2e}",
            audit.round_trip, audit.det_deviation, audit.x1_residual
        );
    }
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn verify(dir: &Path, quiet: bool) -> Result<ExitCode> {
    let mut bad = Vec::new();
    let mut seen = 0;
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        if d.join(forge_core::io::MANIFEST_NAME).is_file() {
            seen += 1;
            let m = Manifest::read(&d)?;
            for name in m.verify(&d)? {
                bad.push(d.join(name));
            }
        }
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
    if seen == 0 {
        return Err(ForgeError::Store(format!("no manifest found under {}", dir.display())));
    }
    for b in &bad {
        eprintln!("checksum mismatch: {}", b.display());
    }
    if !quiet {
        eprintln!("{seen} manifests checked, {} bad files", bad.len());
    }
    Ok(if bad.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    use ExperimentKind::*;
    match cmd {
        Command::Params(c) => params(&c),
        Command::Geometry(c) => geometry(&c),
        Command::Ansatz(c) => staged(&c, &[AnsatzVerify], None, true),
        Command::Solve { common, stack } => staged(&common, &[Solve], stack, false),
        Command::Pullback { common, stack } => staged(&common, &[Pullback], stack, false),
        Command::Run(c) => {
            let cfg = load(&c)?;
            let opts = options(&c, &cfg, None);
            let rep = run_experiment(&cfg, &opts)?;
            Ok(report(&rep, c.quiet))
        }
        Command::Verify { dir, quiet } => verify(&dir, quiet),
    }
}

fn workers(cmd: &Command) -> usize {
    match cmd {
        Command::Params(c) | Command::Geometry(c) | Command::Ansatz(c) | Command::Run(c) => c.workers,
        Command::Solve { common, .. } | Command::Pullback { common, .. } => common.workers,
        Command::Verify { .. } => 0,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let n = workers(&cli.command);
    if n > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
