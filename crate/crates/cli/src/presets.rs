//! Named reproduction runs with fully pinned parameters.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lcc_core::analysis::{energy_scaling_study, write_energy_csv, DEFAULT_GRAMIAN_DT};
use lcc_core::scenarios::{
    brake_scenario, performance_table, reduction, region_scans, sinusoid_scenario, BrakeStrategy, GainCase,
    PerformanceRow, HETERO_SEED,
};
use lcc_core::sim::{simulate, HeterogeneitySpec, ScenarioConfig};
use lcc_core::stability::{head_to_tail, is_string_stable, scan_region, write_region_csv, FrequencyGrid};
use lcc_core::{LinearCoeffs, SystemVariant};
use rayon::prelude::*;

use crate::error::{analysis, simulation, CliError};
use crate::output::{write_atomic, write_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Gramian metrics for 1..5 followers, horizons 10/20/30 s
    #[value(name = "fig5")]
    Fig5,
    /// Stable regions of the ahead gains, alone and with one follower gain fixed
    #[value(name = "fig6")]
    Fig6,
    /// Stable regions of the follower gains
    #[value(name = "fig7")]
    Fig7,
    /// Head-to-tail magnitude for the HDV chain and gain cases A-D
    #[value(name = "fig8")]
    Fig8,
    #[value(name = "fig9-caseA")]
    Fig9CaseA,
    #[value(name = "fig9-caseB")]
    Fig9CaseB,
    #[value(name = "fig9-caseC")]
    Fig9CaseC,
    #[value(name = "fig9-caseD")]
    Fig9CaseD,
    /// Follower brake with the free-driving controller and the no-response baseline
    #[value(name = "fig10-fd")]
    Fig10Fd,
    /// Follower brake with the car-following controller and the no-response baseline
    #[value(name = "fig10-cf")]
    Fig10Cf,
    /// Gain cases and their string-stability verdicts
    #[value(name = "table1")]
    Table1,
    /// AAVE and fuel under the follower brake
    #[value(name = "table2")]
    Table2,
    /// AAVE and fuel with heterogeneous, delayed drivers
    #[value(name = "appendixC")]
    AppendixC,
}

impl Preset {
    pub fn name(self) -> String {
        self.to_possible_value().expect("named").get_name().to_string()
    }
}

fn trace_files(out: &Path, stem: &str, cfg: &ScenarioConfig) -> Result<Vec<PathBuf>, CliError> {
    let tr = simulate(cfg).map_err(simulation)?;
    Ok(vec![
        write_atomic(out, &format!("{stem}_trace.csv"), |w| tr.write_csv(w).map_err(simulation))?,
        write_atomic(out, &format!("{stem}_events.csv"), |w| tr.write_events_csv(w).map_err(simulation))?,
    ])
}

fn performance_file(out: &Path, name: &str, rows: &[PerformanceRow]) -> Result<PathBuf, CliError> {
    let base = rows
        .iter()
        .find(|r| r.strategy == BrakeStrategy::LookingAhead)
        .expect("baseline row");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.strategy.label().to_string(),
                format!("{:.4}", r.aave),
                format!("{:.2}", r.fuel),
                format!("{:.4}", reduction(base.aave, r.aave)),
                format!("{:.4}", reduction(base.fuel, r.fuel)),
            ]
        })
        .collect();
    write_table(
        out,
        name,
        &["strategy", "aave", "fc", "aave_reduction", "fc_reduction"],
        &table,
    )
}

fn scans(out: &Path, prefix: &str, ahead: bool) -> Result<Vec<PathBuf>, CliError> {
    let grid = FrequencyGrid::default();
    let setups: Vec<_> = region_scans(51)
        .into_iter()
        .filter(|s| (s.axis1.coord.vehicle < 0) == ahead)
        .collect();
    let maps = setups
        .iter()
        .map(|s| scan_region(&s.base, s.axis1, s.axis2, &grid).map_err(analysis))
        .collect::<Result<Vec<_>, _>>()?;
    setups
        .iter()
        .zip(&maps)
        .map(|(s, m)| write_atomic(out, &format!("{prefix}_{}.csv", s.name), |w| write_region_csv(m, w).map_err(analysis)))
        .collect()
}

/// Runs a preset and returns the files written.
pub fn run_preset(preset: Preset, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let name = preset.name();
    match preset {
        Preset::Fig5 => {
            let ns: Vec<usize> = (1..=5).collect();
            let rows = energy_scaling_study(
                SystemVariant::FdLcc,
                LinearCoeffs::nominal(),
                &ns,
                &[10.0, 20.0, 30.0],
                DEFAULT_GRAMIAN_DT,
            )
            .map_err(analysis)?;
            Ok(vec![write_atomic(out, "fig5_energy.csv", |w| {
                write_energy_csv(&rows, w).map_err(analysis)
            })?])
        }
        Preset::Fig6 => scans(out, "fig6", true),
        Preset::Fig7 => scans(out, "fig7", false),
        Preset::Fig8 => {
            let omegas = FrequencyGrid::default().omegas();
            let specs: Vec<_> = GainCase::ALL.iter().map(|c| c.spec()).collect();
            let rows = omegas
                .iter()
                .map(|&w| {
                    let mut r = vec![format!("{w:e}")];
                    for s in &specs {
                        r.push(format!("{:.12e}", head_to_tail(s, w).map_err(analysis)?.norm()));
                    }
                    Ok(r)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let mut header = vec!["omega"];
            header.extend(GainCase::ALL.iter().map(|c| c.label()));
            Ok(vec![write_table(out, "fig8_magnitude.csv", &header, &rows)?])
        }
        Preset::Fig9CaseA | Preset::Fig9CaseB | Preset::Fig9CaseC | Preset::Fig9CaseD => {
            let case = match preset {
                Preset::Fig9CaseA => GainCase::A,
                Preset::Fig9CaseB => GainCase::B,
                Preset::Fig9CaseC => GainCase::C,
                _ => GainCase::D,
            };
            trace_files(out, &name, &sinusoid_scenario(case))
        }
        Preset::Fig10Fd | Preset::Fig10Cf => {
            let strategy = if preset == Preset::Fig10Fd {
                BrakeStrategy::FdLcc
            } else {
                BrakeStrategy::CfLcc
            };
            let mut files = trace_files(out, &name, &brake_scenario(strategy, None))?;
            files.extend(trace_files(
                out,
                &format!("{name}_baseline"),
                &brake_scenario(BrakeStrategy::LookingAhead, None),
            )?);
            Ok(files)
        }
        Preset::Table1 => {
            let grid = FrequencyGrid::default();
            let mut gains = Vec::new();
            let mut verdicts = Vec::new();
            for case in GainCase::ALL {
                for (id, g) in case.gains().iter() {
                    gains.push(vec![case.label().into(), id.to_string(), g.mu.to_string(), g.k.to_string()]);
                }
                let v = is_string_stable(&case.spec(), &grid).map_err(analysis)?;
                verdicts.push(vec![
                    case.label().into(),
                    format!("{:.6}", v.peak_omega),
                    format!("{:.6}", v.peak_mag),
                    v.stable.to_string(),
                    v.asymptotically_stable.to_string(),
                ]);
            }
            Ok(vec![
                write_table(out, "table1.csv", &["case", "vehicle", "mu", "k"], &gains)?,
                write_table(
                    out,
                    "table1_stability.csv",
                    &["case", "peak_omega", "peak_mag", "string_stable", "asymptotically_stable"],
                    &verdicts,
                )?,
            ])
        }
        Preset::Table2 => {
            let rows = performance_table(None).map_err(simulation)?;
            Ok(vec![performance_file(out, "table2.csv", &rows)?])
        }
        Preset::AppendixC => {
            let rows = performance_table(Some((HeterogeneitySpec::default(), HETERO_SEED))).map_err(simulation)?;
            Ok(vec![performance_file(out, "appendixC.csv", &rows)?])
        }
    }
}

/// Runs every preset; independent presets run in parallel.
pub fn run_all(out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let results: Vec<_> = Preset::value_variants()
        .par_iter()
        .map(|&p| run_preset(p, out))
        .collect();
    let mut files = Vec::new();
    for r in results {
        files.extend(r?);
    }
    Ok(files)
}
