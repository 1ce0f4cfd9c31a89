//! `lcc` command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 config, 4 analysis, 5 simulation, 6 io.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lcc_core::analysis::{
    build_output_matrix, cav_output_matrix, controllability_of, energy_scaling_study, observability_of,
    write_energy_csv, DEFAULT_GRAMIAN_DT,
};
use lcc_core::sim::{aave, simulate, total_fuel};
use lcc_core::stability::{is_string_stable, magnitude_curve, scan_region, write_magnitude_csv, write_region_csv, CellClass, TransferSpec};
use lcc_core::vehicle::coeffs_at;
use lcc_core::{build_system, SystemVariant};

pub use config::{load_config, Config};
pub use error::CliError;
use error::{analysis, simulation};
use output::{write_atomic, write_table};
use presets::{run_all, run_preset, Preset};

#[derive(Debug, Parser)]
#[command(
    name = "lcc",
    version,
    about = "Leading cruise control analysis and mixed-traffic simulation",
    after_help = config::CONFIG_KEYS
)]
struct Cli {
    /// JSON configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, env = "LCC_OUT_DIR", default_value = "out", value_name = "DIR")]
    out: PathBuf,
    /// Override a config key, e.g. --set driver.alpha=0.7 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Topology {
    /// general | cf | fd | ccc
    #[arg(long)]
    variant: Option<SystemVariant>,
    /// HDVs ahead of the CAV
    #[arg(long)]
    m: Option<usize>,
    /// HDVs behind the CAV
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Controllability and observability of the linearized platoon
    Analyze {
        #[command(flatten)]
        topo: Topology,
        /// Vehicle k whose velocity error the CAV measures
        #[arg(long)]
        measure: Option<i32>,
    },
    /// Gramian metrics over platoon size and horizon (energy.csv)
    Energy {
        #[command(flatten)]
        topo: Topology,
    },
    /// Head-to-tail string stability of the configured gains (magnitude.csv)
    Stability {
        #[command(flatten)]
        topo: Topology,
    },
    /// String-stability classification over a grid of two gains (region.csv)
    Scan {
        #[command(flatten)]
        topo: Topology,
    },
    /// Nonlinear simulation (trace.csv, events.csv, metrics.csv)
    Simulate {
        #[command(flatten)]
        topo: Topology,
    },
    /// Reproduce a named setup with pinned parameters
    Reproduce {
        #[arg(required_unless_present = "all")]
        preset: Option<Preset>,
        /// Run every preset
        #[arg(long, conflicts_with = "preset")]
        all: bool,
    },
}

fn topology_overrides(topo: &Topology) -> Vec<String> {
    let mut v = Vec::new();
    if let Some(x) = topo.variant {
        v.push(format!("variant={x}"));
    }
    if let Some(m) = topo.m {
        v.push(format!("m={m}"));
    }
    if let Some(n) = topo.n {
        v.push(format!("n={n}"));
    }
    v
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lcc: {e}");
            e.code()
        }
    }
}

fn config_for(cli: &Cli, topo: Option<&Topology>, extra: &[String]) -> Result<Config, CliError> {
    let mut overrides = topo.map(topology_overrides).unwrap_or_default();
    overrides.extend(extra.iter().cloned());
    overrides.extend(cli.set.iter().cloned());
    load_config(cli.config.as_deref(), &overrides)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let out = cli.out.clone();
    match &cli.command {
        Command::Analyze { topo, measure } => {
            let extra: Vec<String> = measure.iter().map(|k| format!("measured_vehicle={k}")).collect();
            analyze(&config_for(&cli, Some(topo), &extra)?, &out)
        }
        Command::Energy { topo } => energy(&config_for(&cli, Some(topo), &[])?, &out),
        Command::Stability { topo } => stability(&config_for(&cli, Some(topo), &[])?, &out),
        Command::Scan { topo } => scan(&config_for(&cli, Some(topo), &[])?, &out),
        Command::Simulate { topo } => simulate_cmd(&config_for(&cli, Some(topo), &[])?, &out),
        Command::Reproduce { preset, all } => {
            if cli.config.is_some() || !cli.set.is_empty() {
                return Err(CliError::Usage("presets take no --config or --set".into()));
            }
            let files = match (preset, all) {
                (Some(p), _) => run_preset(*p, &out)?,
                (None, true) => run_all(&out)?,
                (None, false) => return Err(CliError::Usage("name a preset or pass --all".into())),
            };
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn analyze(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let coeffs = coeffs_at(cfg.v_star, &cfg.driver).map_err(analysis)?;
    let model = build_system(cfg.variant, cfg.m, cfg.n, coeffs).map_err(analysis)?;
    let c = controllability_of(&model, cfg.rank_tol).map_err(analysis)?;
    let cond = c.condition_value.unwrap_or(f64::NAN);
    println!("controllable={} dim={} condition={cond:.4}", c.controllable, c.controllable_dim);
    let mut rows = vec![
        vec!["controllable".to_string(), c.controllable.to_string()],
        vec!["controllable_dim".into(), c.controllable_dim.to_string()],
        vec!["state_dim".into(), c.state_dim.to_string()],
        vec!["condition".into(), cond.to_string()],
    ];
    let output = match (cfg.measured_vehicle, cfg.variant) {
        (_, SystemVariant::Ccc) => Some(cav_output_matrix(&model)),
        (Some(k), _) => Some(build_output_matrix(&model, k).map_err(analysis)?),
        (None, _) => None,
    };
    if let Some(cm) = output {
        let o = observability_of(&model, &cm, cfg.rank_tol).map_err(analysis)?;
        let ids: Vec<String> = o.unobservable_vehicle_ids.iter().map(|i| i.to_string()).collect();
        println!(
            "observable={} observable_dim={} unobservable_vehicles=[{}]",
            o.observable,
            o.observable_dim,
            ids.join(" ")
        );
        rows.push(vec!["observable".into(), o.observable.to_string()]);
        rows.push(vec!["observable_dim".into(), o.observable_dim.to_string()]);
        rows.push(vec!["unobservable_vehicles".into(), ids.join(" ")]);
    }
    write_table(out, "analysis.csv", &["quantity", "value"], &rows)?;
    Ok(())
}

fn energy(cfg: &Config, out: &Path) -> Result<(), CliError> {
    if cfg.energy.n_min == 0 || cfg.energy.n_max < cfg.energy.n_min {
        return Err(CliError::Config("at `energy`: need 1 <= n_min <= n_max".into()));
    }
    let coeffs = coeffs_at(cfg.v_star, &cfg.driver).map_err(analysis)?;
    let ns: Vec<usize> = (cfg.energy.n_min..=cfg.energy.n_max).collect();
    let dt = if cfg.dt > 0.0 { cfg.dt } else { DEFAULT_GRAMIAN_DT };
    let rows = energy_scaling_study(cfg.variant, coeffs, &ns, &cfg.energy.t_list, dt).map_err(analysis)?;
    for r in &rows {
        let tr = r.trace_inv.map(|x| format!("{x:e}")).unwrap_or_else(|| "singular".into());
        println!("n={} t={} lambda_min={:e} trace_inv={tr}", r.n, r.t, r.lambda_min);
    }
    write_atomic(out, "energy.csv", |w| write_energy_csv(&rows, w).map_err(analysis))?;
    Ok(())
}

fn transfer_spec(cfg: &Config) -> Result<TransferSpec, CliError> {
    let coeffs = coeffs_at(cfg.v_star, &cfg.driver).map_err(analysis)?;
    Ok(TransferSpec::new(cfg.m, cfg.n, coeffs, cfg.gains.clone()))
}

fn stability(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let spec = transfer_spec(cfg)?;
    let v = is_string_stable(&spec, &cfg.grid).map_err(analysis)?;
    println!(
        "string_stable={} peak_omega={:.6} peak_mag={:.6} asymptotically_stable={}",
        v.stable, v.peak_omega, v.peak_mag, v.asymptotically_stable
    );
    let curve = magnitude_curve(&spec, &cfg.grid.omegas()).map_err(analysis)?;
    write_atomic(out, "magnitude.csv", |w| write_magnitude_csv(&curve, w).map_err(analysis))?;
    Ok(())
}

fn scan(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let s = cfg
        .scan
        .as_ref()
        .ok_or_else(|| CliError::Config("at `scan`: scan needs scan.axis1 and scan.axis2".into()))?;
    let map = scan_region(&transfer_spec(cfg)?, s.axis1, s.axis2, &cfg.grid).map_err(analysis)?;
    println!(
        "cells={} SS={} SU={} AU={}",
        map.cells.len(),
        map.count(CellClass::StringStable),
        map.count(CellClass::StringUnstable),
        map.count(CellClass::AsympUnstable)
    );
    write_atomic(out, "region.csv", |w| write_region_csv(&map, w).map_err(analysis))?;
    Ok(())
}

fn simulate_cmd(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let scenario = cfg.scenario();
    let tr = simulate(&scenario).map_err(simulation)?;
    let vehicles: Vec<i32> = tr.ids.iter().copied().filter(|&i| i >= 0).collect();
    let window = cfg.sim.window;
    let a = aave(&tr, window, scenario.v_star, &vehicles).map_err(simulation)?;
    let f = total_fuel(&tr, window, &vehicles).map_err(simulation)?;
    println!(
        "steps={} safety_events={} aave={a:.4} fc={f:.2}",
        tr.steps(),
        tr.events.len()
    );
    write_atomic(out, "trace.csv", |w| tr.write_csv(w).map_err(simulation))?;
    write_atomic(out, "events.csv", |w| tr.write_events_csv(w).map_err(simulation))?;
    write_table(
        out,
        "metrics.csv",
        &["window_start", "window_end", "aave", "fc"],
        &[vec![window.0.to_string(), window.1.to_string(), format!("{a:.6}"), format!("{f:.4}")]],
    )?;
    Ok(())
}
