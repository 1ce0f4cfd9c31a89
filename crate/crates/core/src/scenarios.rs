//! Reference setups: feedback-gain cases, sinusoid and brake scenarios,
//! region scans and the performance comparison.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::sim::{aave, simulate, total_fuel, BaselineMode, CavController, HeterogeneitySpec, Perturbation, ScenarioConfig};
use crate::stability::{GainAxis, GainKind, TransferSpec};
use crate::system::FeedbackGains;
use crate::vehicle::LinearCoeffs;

/// Feedback-gain cases on a platoon with two HDVs ahead and two behind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GainCase {
    HdvOnly,
    A,
    B,
    C,
    D,
}

impl GainCase {
    pub const ALL: [GainCase; 5] = [GainCase::HdvOnly, GainCase::A, GainCase::B, GainCase::C, GainCase::D];

    pub fn label(self) -> &'static str {
        match self {
            GainCase::HdvOnly => "hdv",
            GainCase::A => "caseA",
            GainCase::B => "caseB",
            GainCase::C => "caseC",
            GainCase::D => "caseD",
        }
    }

    pub fn gains(self) -> FeedbackGains {
        let mut g = FeedbackGains::new();
        let level = match self {
            GainCase::HdvOnly => 0,
            GainCase::A => 1,
            GainCase::B => 2,
            GainCase::C => 3,
            GainCase::D => 4,
        };
        let steps = [(-2, 1.0, -1.0), (-1, 1.0, -1.0), (1, -1.0, -1.0), (2, -1.0, -1.0)];
        for &(id, mu, k) in &steps[..level] {
            g.set(id, mu, k);
        }
        g
    }

    pub fn spec(self) -> TransferSpec {
        TransferSpec::new(2, 2, LinearCoeffs::nominal(), self.gains())
    }
}

/// Head sinusoid defaults: amplitude m/s, period s, start s.
pub const SINUSOID: (f64, f64, f64) = (2.0, 10.0, 20.0);

/// Nonlinear run of a gain case under the head sinusoid.
pub fn sinusoid_scenario(case: GainCase) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(2, 2, true, 100.0);
    cfg.perturbation = Perturbation::head_sinusoid(SINUSOID.0, SINUSOID.1, SINUSOID.2);
    cfg.controller = CavController {
        gains: case.gains(),
        mode: BaselineMode::HdvBaseline,
    };
    cfg
}

/// CAV strategies compared under the follower brake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BrakeStrategy {
    /// The CAV ignores the vehicles behind it.
    LookingAhead,
    FdLcc,
    CfLcc,
}

impl BrakeStrategy {
    pub const ALL: [BrakeStrategy; 3] = [BrakeStrategy::LookingAhead, BrakeStrategy::FdLcc, BrakeStrategy::CfLcc];

    pub fn label(self) -> &'static str {
        match self {
            BrakeStrategy::LookingAhead => "looking_ahead",
            BrakeStrategy::FdLcc => "fd_lcc",
            BrakeStrategy::CfLcc => "cf_lcc",
        }
    }
}

/// HDVs behind the CAV in the brake scenario.
pub const BRAKE_FOLLOWERS: usize = 10;
/// Metric window, s.
pub const BRAKE_WINDOW: (f64, f64) = (20.0, 40.0);
/// Seed of the heterogeneous brake runs.
pub const HETERO_SEED: u64 = 2021;

pub fn brake_scenario(strategy: BrakeStrategy, heterogeneity: Option<(HeterogeneitySpec, u64)>) -> ScenarioConfig {
    let followers = FeedbackGains::new().with(1, -0.2, 0.05).with(2, -0.1, 0.05);
    let (head, controller) = match strategy {
        BrakeStrategy::LookingAhead => (
            false,
            CavController {
                gains: FeedbackGains::new(),
                mode: BaselineMode::ExplicitLinear,
            },
        ),
        BrakeStrategy::FdLcc => (
            false,
            CavController {
                gains: followers.with(0, 0.0, -0.5),
                mode: BaselineMode::ExplicitLinear,
            },
        ),
        BrakeStrategy::CfLcc => (
            true,
            CavController {
                gains: followers.with(0, 0.1, -0.5),
                mode: BaselineMode::ExplicitLinear,
            },
        ),
    };
    let mut cfg = ScenarioConfig::new(0, BRAKE_FOLLOWERS, head, 60.0);
    cfg.controller = controller;
    cfg.perturbation = Perturbation::FollowerBrake {
        vehicle: 1,
        decel: -5.0,
        duration: 1.0,
        start: 20.0,
    };
    if let Some((spec, seed)) = heterogeneity {
        cfg.heterogeneity = Some(spec);
        cfg.seed = seed;
    }
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerformanceRow {
    pub strategy: BrakeStrategy,
    /// m/s
    pub aave: f64,
    /// mL
    pub fuel: f64,
}

/// AAVE and fuel of the CAV and its followers for each strategy.
pub fn performance_table(heterogeneity: Option<(HeterogeneitySpec, u64)>) -> Result<Vec<PerformanceRow>> {
    let vehicles: Vec<i32> = (0..=BRAKE_FOLLOWERS as i32).collect();
    BrakeStrategy::ALL
        .par_iter()
        .map(|&s| {
            let cfg = brake_scenario(s, heterogeneity);
            let tr = simulate(&cfg)?;
            Ok(PerformanceRow {
                strategy: s,
                aave: aave(&tr, BRAKE_WINDOW, cfg.v_star, &vehicles)?,
                fuel: total_fuel(&tr, BRAKE_WINDOW, &vehicles)?,
            })
        })
        .collect()
}

/// Relative reduction of `x` against `baseline`.
pub fn reduction(baseline: f64, x: f64) -> f64 {
    (baseline - x) / baseline
}

/// One region scan: a named base spec and two gain axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSetup {
    pub name: &'static str,
    pub base: TransferSpec,
    pub axis1: GainAxis,
    pub axis2: GainAxis,
}

fn axes(vehicle: i32, points: usize) -> (GainAxis, GainAxis) {
    (
        GainAxis::new(vehicle, GainKind::Mu, -10.0, 10.0, points),
        GainAxis::new(vehicle, GainKind::K, -10.0, 10.0, points),
    )
}

/// Per-vehicle gain scans from zero gains, then the ahead-vehicle scans
/// with one follower gain pair fixed at `(-1, -1)`.
pub fn region_scans(points: usize) -> Vec<ScanSetup> {
    let spec = |g: FeedbackGains| TransferSpec::new(2, 2, LinearCoeffs::nominal(), g);
    let mut out = Vec::new();
    for (name, v) in [("scan_mu-2_k-2", -2), ("scan_mu-1_k-1", -1), ("scan_mu1_k1", 1), ("scan_mu2_k2", 2)] {
        let (axis1, axis2) = axes(v, points);
        out.push(ScanSetup {
            name,
            base: spec(FeedbackGains::new()),
            axis1,
            axis2,
        });
    }
    for (name, v, fixed) in [
        ("scan_mu-1_k-1_with_1", -1, 1),
        ("scan_mu-2_k-2_with_1", -2, 1),
        ("scan_mu-1_k-1_with_2", -1, 2),
        ("scan_mu-2_k-2_with_2", -2, 2),
    ] {
        let (axis1, axis2) = axes(v, points);
        out.push(ScanSetup {
            name,
            base: spec(FeedbackGains::new().with(fixed, -1.0, -1.0)),
            axis1,
            axis2,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_d_gains() {
        let g = GainCase::D.gains();
        let got: Vec<_> = g.iter().map(|(i, p)| (i, p.mu, p.k)).collect();
        assert_eq!(
            got,
            vec![(-2, 1.0, -1.0), (-1, 1.0, -1.0), (1, -1.0, -1.0), (2, -1.0, -1.0)]
        );
        assert!(GainCase::HdvOnly.gains().is_zero());
        assert_eq!(GainCase::B.gains().iter().count(), 2);
    }

    #[test]
    fn scenarios_validate() {
        for c in GainCase::ALL {
            sinusoid_scenario(c).validate().unwrap();
        }
        for s in BrakeStrategy::ALL {
            let cfg = brake_scenario(s, None);
            cfg.validate().unwrap();
            assert_eq!(cfg.vehicle_ids().iter().filter(|&&i| i >= 0).count(), 11);
        }
        assert_eq!(region_scans(5).len(), 8);
    }

    #[test]
    fn reduction_sign() {
        assert!((reduction(0.89, 0.58) - 0.3483).abs() < 1e-3);
        assert!(reduction(1.0, 2.0) < 0.0);
    }
}
