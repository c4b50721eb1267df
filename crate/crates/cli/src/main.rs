mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use arlequin_core::alpha::{build_alpha_field, AlphaField, AlphaMethod};
use arlequin_core::cells::{locate_atoms, locate_atoms_brute_force, CellGrid};
use arlequin_core::config::Config;
use arlequin_core::demo::{demo_atoms, demo_config, demo_mesh, full_md_atoms};
use arlequin_core::dynamics::{
    build_coupled_system, build_md_system, run_experiment, EnergyRecord, RunOutput, Variant,
};
use arlequin_core::io::{
    parse_atoms, parse_energy_csv, parse_mesh, read_file, write_atoms, write_energy_csv, write_mesh,
    write_snapshot_csv, ENERGY_HEADER,
};
use arlequin_core::pipeline::{build_coupling_map, cell_size};
use arlequin_core::topology::CouplingMap;
use arlequin_core::{AtomSet, Error, Mesh};
use clap::{Args, Parser, Subcommand};
use manifest::Manifest;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("missing prep artifact {0} (run `arlequin prep` first)")]
    MissingArtifact(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingArtifact(_) | CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                Error::Parse { .. }
                | Error::Config(_)
                | Error::Io { .. }
                | Error::GridMismatch(_)
                | Error::Missing(_) => 2,
                Error::BadAnchor { .. } | Error::RayAlongBoundary(_) | Error::GrazingRay { .. } => 3,
                Error::SingularHeatSystem(_) => 4,
                Error::Instability { .. } | Error::UnstableTimeStep { .. } => 5,
                _ => 1,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Arlequin FE-MD coupling: preprocessing and coupled dynamics.
#[derive(Parser)]
#[command(name = "arlequin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    atoms: PathBuf,
    /// Flat `key = value` file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Locate atoms, extract the coupling region and compute alpha.
    Prep {
        #[command(flatten)]
        inputs: Inputs,
        /// Alpha method(s) to compute; repeatable. Defaults to `alpha_method`.
        #[arg(long)]
        method: Vec<AlphaMethod>,
    },
    /// Run the coupled model on `prep` artifacts found in `--out-dir`.
    Simulate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        variant: Option<Variant>,
        /// Comma-separated steps to snapshot.
        #[arg(long, value_delimiter = ',')]
        snapshot_steps: Option<Vec<usize>>,
    },
    /// Pure MD reference run. Atoms outside every element of `--mesh`
    /// form the measured region.
    Fullmd {
        #[arg(long)]
        atoms: PathBuf,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        snapshot_steps: Option<Vec<usize>>,
    },
    /// RMS and max deviation per column of two energy CSVs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Step for the reflection metric; defaults to the last step.
        #[arg(long)]
        step: Option<usize>,
    },
    /// Write the square-annulus demo inputs.
    Demo {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("ARLEQUIN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a pool already exists only if something else set it up first
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prep { inputs, method } => prep(&inputs, &method),
        Command::Simulate { inputs, variant, snapshot_steps } => simulate(&inputs, variant, snapshot_steps),
        Command::Fullmd { atoms, mesh, config, out_dir, snapshot_steps } => {
            fullmd(&atoms, mesh.as_deref(), config.as_deref(), &out_dir, snapshot_steps)
        }
        Command::Compare { a, b, step } => compare(&a, &b, step),
        Command::Demo { out_dir } => demo(&out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(path: Option<&Path>, manifest: &mut Manifest) -> CliResult<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = read_file(path)?;
    manifest.input(path, &text);
    Ok(Config::parse(&text)?)
}

fn load_mesh(path: &Path, manifest: &mut Manifest) -> CliResult<Mesh> {
    let text = read_file(path)?;
    manifest.input(path, &text);
    Ok(parse_mesh(&text)?)
}

fn load_atoms(path: &Path, manifest: &mut Manifest) -> CliResult<AtomSet> {
    let text = read_file(path)?;
    manifest.input(path, &text);
    Ok(parse_atoms(&text)?)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    Ok(())
}

fn alpha_file(method: AlphaMethod) -> String {
    format!("alpha_{method}.csv")
}

fn prep(inputs: &Inputs, methods: &[AlphaMethod]) -> CliResult<()> {
    let mut m = Manifest::new("prep");
    let start = Instant::now();
    let mesh = load_mesh(&inputs.mesh, &mut m)?;
    let atoms = load_atoms(&inputs.atoms, &mut m)?;
    let config = load_config(inputs.config.as_deref(), &mut m)?;
    m.since("parse", start);
    m.config(&config);
    let methods: Vec<AlphaMethod> = if methods.is_empty() {
        vec![config.alpha_method]
    } else {
        let mut unique = Vec::new();
        for m in methods {
            if !unique.contains(m) {
                unique.push(*m);
            }
        }
        unique
    };
    if atoms.is_empty() {
        eprintln!("warning: atom file has no atoms, coupling map will be empty");
    }

    let cells = cell_size(&mesh, &config);
    let mut map = m.time("locate", || build_coupling_map(&mesh, &atoms, &cells))?;
    if config.brute_force_check {
        let grid = CellGrid::new(&mesh, &atoms, &cells)?;
        let fast = best_of(3, || locate_atoms(&mesh, &atoms, &grid));
        let slow = best_of(1, || locate_atoms_brute_force(&mesh, &atoms));
        let identical = fast.1? == slow.1?;
        m.metric("locate_cells_s", json!(fast.0));
        m.metric("locate_brute_force_s", json!(slow.0));
        m.metric("locate_speedup", json!(slow.0 / fast.0.max(1e-12)));
        m.metric("locate_identical", json!(identical));
    }
    m.metric("atoms", json!(atoms.len()));
    m.metric("coupling_atoms", json!(map.locations.len()));
    m.metric("coupling_elements", json!(map.elements.len()));
    m.metric("boundary_objects", json!(map.boundary.len()));

    let mut fields = Vec::new();
    for method in &methods {
        let field = m.time(&format!("alpha_{method}"), || {
            build_alpha_field(*method, &mesh, &atoms, &config.anchors, &mut map)
        })?;
        fields.push(field);
    }

    create_dir(&inputs.out_dir)?;
    m.emit(&inputs.out_dir, "coupling_map.txt", &map.to_text(&mesh))?;
    for field in &fields {
        m.emit(&inputs.out_dir, &alpha_file(field.method), &field.to_csv(&mesh, &atoms))?;
    }
    m.write(&inputs.out_dir, "manifest.json")?;
    println!(
        "prep: {} coupling elements, {} coupling atoms, {} boundary objects",
        map.elements.len(),
        map.locations.len(),
        map.boundary.len()
    );
    Ok(())
}

fn best_of<T>(runs: usize, mut f: impl FnMut() -> T) -> (f64, T) {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..runs {
        let start = Instant::now();
        let v = f();
        best = best.min(start.elapsed().as_secs_f64());
        out = Some(v);
    }
    (best, out.expect("at least one run"))
}

fn read_artifact(dir: &Path, name: &str) -> CliResult<String> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(CliError::MissingArtifact(path.display().to_string()));
    }
    Ok(read_file(&path)?)
}

fn record_run(m: &mut Manifest, out: &RunOutput) {
    let e0 = out.energies.first().map_or(0.0, |e| e.e_total);
    let drift =
        out.energies.iter().map(|e| if e0 > 0.0 { (e.e_total - e0).abs() / e0 } else { 0.0 }).fold(0.0, f64::max);
    let residual = out.constraint_residuals.iter().copied().fold(0.0, f64::max);
    m.metric("max_relative_energy_drift", json!(drift));
    m.metric("max_constraint_residual", json!(residual));
}

fn emit_run(m: &mut Manifest, dir: &Path, tag: &str, out: &RunOutput) -> CliResult<()> {
    m.emit(dir, &format!("energy_{tag}.csv"), &write_energy_csv(&out.energies))?;
    for s in &out.snapshots {
        m.emit(dir, &format!("snapshot_{tag}_{}.csv", s.step), &write_snapshot_csv(s))?;
    }
    Ok(())
}

fn simulate(inputs: &Inputs, variant: Option<Variant>, snapshot_steps: Option<Vec<usize>>) -> CliResult<()> {
    let mut m = Manifest::new("simulate");
    let mesh = load_mesh(&inputs.mesh, &mut m)?;
    let atoms = load_atoms(&inputs.atoms, &mut m)?;
    let mut config = load_config(inputs.config.as_deref(), &mut m)?;
    if let Some(v) = variant {
        config.variant = v;
    }
    if let Some(s) = snapshot_steps {
        config.snapshot_steps = s;
    }
    m.config(&config);
    let dir = &inputs.out_dir;
    let map_text = read_artifact(dir, "coupling_map.txt")?;
    m.input(&dir.join("coupling_map.txt"), &map_text);
    let map = CouplingMap::from_text(&map_text)?;
    let alpha = match config.variant.alpha_method() {
        Some(method) => {
            let text = read_artifact(dir, &alpha_file(method))?;
            m.input(&dir.join(alpha_file(method)), &text);
            Some(AlphaField::from_csv(&text, method, &mesh, &atoms, &map)?)
        }
        None => None,
    };
    let tag = config.variant.name();
    if config.steps == 0 {
        m.emit(dir, &format!("energy_{tag}.csv"), &format!("{ENERGY_HEADER}\n"))?;
        m.write(dir, &format!("manifest_simulate_{tag}.json"))?;
        return Ok(());
    }
    let atoms = atoms.with_neighbors_within(config.neighbor_cutoff * config.r0);
    let system =
        m.time("assemble", || build_coupled_system(&mesh, &atoms, &map, alpha.as_ref(), &config, config.variant))?;
    let out = m.time("integrate", || run_experiment(&system, &config))?;
    record_run(&mut m, &out);
    emit_run(&mut m, dir, tag, &out)?;
    m.write(dir, &format!("manifest_simulate_{tag}.json"))?;
    println!("simulate {tag}: {} steps written to {}", config.steps, dir.display());
    Ok(())
}

fn fullmd(
    atoms_path: &Path,
    mesh_path: Option<&Path>,
    config_path: Option<&Path>,
    dir: &Path,
    snapshot_steps: Option<Vec<usize>>,
) -> CliResult<()> {
    let mut m = Manifest::new("fullmd");
    let atoms = load_atoms(atoms_path, &mut m)?;
    let mut config = load_config(config_path, &mut m)?;
    if let Some(s) = snapshot_steps {
        config.snapshot_steps = s;
    }
    m.config(&config);
    let mut region = vec![true; atoms.len()];
    if let Some(path) = mesh_path {
        let mesh = load_mesh(path, &mut m)?;
        let map = build_coupling_map(&mesh, &atoms, &cell_size(&mesh, &config))?;
        for l in &map.locations {
            region[l.atom] = false;
        }
    }
    create_dir(dir)?;
    if config.steps == 0 {
        m.emit(dir, "energy_fullmd.csv", &format!("{ENERGY_HEADER}\n"))?;
        m.write(dir, "manifest_fullmd.json")?;
        return Ok(());
    }
    let atoms = atoms.with_neighbors_within(config.neighbor_cutoff * config.r0);
    let system = m.time("assemble", || build_md_system(&atoms, &config, region))?;
    let out = m.time("integrate", || run_experiment(&system, &config))?;
    record_run(&mut m, &out);
    emit_run(&mut m, dir, "fullmd", &out)?;
    m.write(dir, "manifest_fullmd.json")?;
    println!("fullmd: {} atoms, {} steps written to {}", atoms.len(), config.steps, dir.display());
    Ok(())
}

const COLUMNS: [&str; 9] =
    ["time", "ke_fe", "ke_md", "pe_fe", "pe_md", "ke_total", "pe_total", "e_total", "ke_md_region"];

fn compare(a: &Path, b: &Path, step: Option<usize>) -> CliResult<()> {
    let ea = parse_energy_csv(&read_file(a)?)?;
    let eb = parse_energy_csv(&read_file(b)?)?;
    let grid = |e: &[EnergyRecord]| e.iter().map(|r| r.step).collect::<Vec<_>>();
    if grid(&ea) != grid(&eb) {
        return Err(Error::GridMismatch(format!(
            "{} has {} rows, {} has {}",
            a.display(),
            ea.len(),
            b.display(),
            eb.len()
        ))
        .into());
    }
    if ea.iter().zip(&eb).any(|(x, y)| (x.time - y.time).abs() > 1e-12 * x.time.abs().max(1.0)) {
        return Err(Error::GridMismatch("time columns differ".into()).into());
    }
    println!("column,rms,max_abs");
    for (k, name) in COLUMNS.iter().enumerate().skip(1) {
        let d: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| x.values()[k] - y.values()[k]).collect();
        let rms = if d.is_empty() { 0.0 } else { (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt() };
        let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!("{name},{rms:.6e},{max:.6e}");
    }
    let at = match step {
        Some(s) => Some(
            ea.iter().position(|r| r.step == s).ok_or_else(|| CliError::Usage(format!("step {s} not in the grid")))?,
        ),
        None => ea.len().checked_sub(1),
    };
    if let Some(i) = at {
        println!("reflection,step={},a={:.6e},b={:.6e}", ea[i].step, ea[i].ke_md_region, eb[i].ke_md_region);
    }
    Ok(())
}

fn demo(dir: &Path) -> CliResult<()> {
    let config = demo_config();
    create_dir(dir)?;
    let mut m = Manifest::new("demo");
    m.config(&config);
    m.emit(dir, "mesh.txt", &write_mesh(&demo_mesh()))?;
    m.emit(dir, "atoms.txt", &write_atoms(&demo_atoms(config.r0)?))?;
    m.emit(dir, "full_atoms.txt", &write_atoms(&full_md_atoms(config.r0)?))?;
    m.emit(dir, "config.txt", &config.to_text())?;
    m.write(dir, "manifest_demo.json")?;
    println!("demo inputs written to {}", dir.display());
    Ok(())
}
