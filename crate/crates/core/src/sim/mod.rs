//! Nonlinear time-domain simulation of a mixed traffic chain.
//!
//! Vehicles are ordered front to back. Ids follow the platoon convention:
//! the optional head vehicle is `-(m+1)`, preceding HDVs are `-m..=-1`, the
//! CAV is `0` and following HDVs are `1..=n`.

pub mod hetero;
pub mod linear;
pub mod metrics;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LccError, Result};
use crate::system::FeedbackGains;
use crate::vehicle::{coeffs_at, equilibrium_spacing, ovm_acceleration, DriverParams, LinearCoeffs};

pub use hetero::{sample_heterogeneous, HeterogeneitySpec};
pub use metrics::{aave, fuel_rate, total_fuel};

/// Acceleration limits, m/s².
pub const A_MAX: f64 = 2.0;
pub const A_MIN: f64 = -5.0;

fn default_v_star() -> f64 {
    15.0
}

fn default_dt() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    #[default]
    None,
    /// Head velocity `v* + amplitude sin(2 pi (t - start) / period)` for `t >= start`.
    HeadSinusoid { amplitude: f64, period: f64, start: f64 },
    /// HDV `vehicle` is forced to `decel` over `[start, start + duration)`.
    FollowerBrake {
        vehicle: i32,
        decel: f64,
        duration: f64,
        start: f64,
    },
}

impl Perturbation {
    pub fn head_sinusoid(amplitude: f64, period: f64, start: f64) -> Self {
        Perturbation::HeadSinusoid { amplitude, period, start }
    }

    fn start(&self) -> f64 {
        match *self {
            Perturbation::None => 0.0,
            Perturbation::HeadSinusoid { start, .. } | Perturbation::FollowerBrake { start, .. } => start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Linear HDV-like car-following toward the predecessor plus the gains.
    #[default]
    HdvBaseline,
    /// The gains alone.
    ExplicitLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CavController {
    #[serde(default)]
    pub gains: FeedbackGains,
    #[serde(default)]
    pub mode: BaselineMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// HDVs between the head vehicle and the CAV.
    #[serde(default)]
    pub m: usize,
    /// HDVs behind the CAV.
    pub n: usize,
    /// Whether a head vehicle leads the chain.
    #[serde(default)]
    pub head: bool,
    /// m/s
    #[serde(default = "default_v_star")]
    pub v_star: f64,
    /// s
    pub horizon: f64,
    /// s
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub perturbation: Perturbation,
    /// Base OVM parameters of every HDV; the CAV baseline is linearized from these.
    #[serde(default)]
    pub hdv_params: DriverParams,
    /// Per-vehicle replacements for `hdv_params`.
    #[serde(default)]
    pub hdv_overrides: BTreeMap<i32, DriverParams>,
    #[serde(default)]
    pub heterogeneity: Option<HeterogeneitySpec>,
    #[serde(default)]
    pub controller: CavController,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(m: usize, n: usize, head: bool, horizon: f64) -> Self {
        Self {
            m,
            n,
            head,
            v_star: default_v_star(),
            horizon,
            dt: default_dt(),
            perturbation: Perturbation::None,
            hdv_params: DriverParams::default(),
            hdv_overrides: BTreeMap::new(),
            heterogeneity: None,
            controller: CavController::default(),
            seed: 0,
        }
    }

    /// Vehicle ids front to back.
    pub fn vehicle_ids(&self) -> Vec<i32> {
        let m = self.m as i32;
        let head = self.head.then_some(-(m + 1));
        head.into_iter().chain(-m..=self.n as i32).collect()
    }

    fn head_id(&self) -> Option<i32> {
        self.head.then_some(-(self.m as i32 + 1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LccError::Scenario(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.perturbation != Perturbation::None && self.horizon <= self.perturbation.start() {
            return bad("horizon must exceed the perturbation start".into());
        }
        if self.m > 0 && !self.head {
            return bad("preceding HDVs need a head vehicle".into());
        }
        match self.perturbation {
            Perturbation::None => {}
            Perturbation::HeadSinusoid { amplitude, period, start } => {
                if !self.head {
                    return bad("head sinusoid needs a head vehicle".into());
                }
                if !(period > 0.0 && start >= 0.0 && amplitude.is_finite()) {
                    return bad("head sinusoid needs period > 0 and start >= 0".into());
                }
                if amplitude.abs() >= self.v_star || amplitude.abs() * 2.0 * PI / period > A_MAX {
                    return bad("head sinusoid exceeds velocity or acceleration limits".into());
                }
            }
            Perturbation::FollowerBrake {
                vehicle,
                decel,
                duration,
                start,
            } => {
                if vehicle == 0 || Some(vehicle) == self.head_id() || !self.vehicle_ids().contains(&vehicle) {
                    return bad(format!("brake vehicle {vehicle} is not an HDV"));
                }
                if !(duration >= 0.0 && start >= 0.0 && (A_MIN..=A_MAX).contains(&decel)) {
                    return bad("brake needs duration, start >= 0 and decel within limits".into());
                }
            }
        }
        for id in self.hdv_overrides.keys() {
            if *id == 0 || Some(*id) == self.head_id() || !self.vehicle_ids().contains(id) {
                return bad(format!("override for vehicle {id} does not name an HDV"));
            }
        }
        self.controller.gains.check_range(self.m, self.n, true)?;
        if self.v_star.is_nan() || self.v_star <= 0.0 {
            return bad("v_star must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Head,
    Hdv,
    Cav,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub t: f64,
    pub vehicle: i32,
    pub event: String,
}

/// Sampled states, row-major in (step, vehicle).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    /// Vehicle ids front to back.
    pub ids: Vec<i32>,
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    pub acc: Vec<f64>,
    /// `NaN` for a vehicle without a predecessor.
    pub spacing: Vec<f64>,
    pub events: Vec<SimEvent>,
}

impl SimulationTrace {
    pub fn steps(&self) -> usize {
        self.times.len()
    }

    pub fn index_of(&self, id: i32) -> Option<usize> {
        self.ids.iter().position(|&v| v == id)
    }

    fn at(&self, k: usize, i: usize) -> usize {
        k * self.ids.len() + i
    }

    pub fn pos(&self, k: usize, i: usize) -> f64 {
        self.pos[self.at(k, i)]
    }

    pub fn vel(&self, k: usize, i: usize) -> f64 {
        self.vel[self.at(k, i)]
    }

    pub fn acc(&self, k: usize, i: usize) -> f64 {
        self.acc[self.at(k, i)]
    }

    pub fn spacing(&self, k: usize, i: usize) -> f64 {
        self.spacing[self.at(k, i)]
    }

    /// Velocity history of vehicle `id`.
    pub fn velocity_of(&self, id: i32) -> Option<Vec<f64>> {
        let i = self.index_of(id)?;
        Some((0..self.steps()).map(|k| self.vel(k, i)).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "vehicle", "pos", "vel", "acc", "spacing"])?;
        for k in 0..self.steps() {
            for (i, id) in self.ids.iter().enumerate() {
                let s = self.spacing(k, i);
                w.write_record([
                    format!("{:.2}", self.times[k]),
                    id.to_string(),
                    self.pos(k, i).to_string(),
                    self.vel(k, i).to_string(),
                    self.acc(k, i).to_string(),
                    if s.is_nan() { String::new() } else { s.to_string() },
                ])?;
            }
        }
        w.flush().map_err(|e| LccError::Output(e.to_string()))?;
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "vehicle", "event"])?;
        for e in &self.events {
            w.write_record([format!("{:.2}", e.t), e.vehicle.to_string(), e.event.clone()])?;
        }
        w.flush().map_err(|e| LccError::Output(e.to_string()))?;
        Ok(())
    }
}

fn saturate(a: f64) -> f64 {
    a.clamp(A_MIN, A_MAX)
}

/// Whether the CAV must brake at `A_MIN` given its spacing and the velocities involved.
pub fn safety_triggered(s0: f64, v0: f64, v_pred: f64) -> bool {
    (v0 * v0 - v_pred * v_pred) / (2.0 * s0) >= -A_MIN
}

struct Setup {
    ids: Vec<i32>,
    roles: Vec<Role>,
    params: Vec<DriverParams>,
    s_star: Vec<f64>,
    delay_steps: Vec<usize>,
    p0: Vec<f64>,
    cav_coeffs: LinearCoeffs,
}

fn setup(cfg: &ScenarioConfig) -> Result<Setup> {
    cfg.validate()?;
    let ids = cfg.vehicle_ids();
    let roles: Vec<Role> = ids
        .iter()
        .map(|&id| match id {
            0 => Role::Cav,
            _ if Some(id) == cfg.head_id() => Role::Head,
            _ => Role::Hdv,
        })
        .collect();
    let hdv_count = roles.iter().filter(|r| **r == Role::Hdv).count();
    let mut sampled = match (&cfg.heterogeneity, hdv_count) {
        (Some(spec), c) if c > 0 => sample_heterogeneous(spec, &cfg.hdv_params, c, cfg.seed)?.into_iter(),
        _ => Vec::new().into_iter(),
    };
    let params: Vec<DriverParams> = ids
        .iter()
        .zip(&roles)
        .map(|(id, role)| match role {
            Role::Hdv => cfg
                .hdv_overrides
                .get(id)
                .copied()
                .or_else(|| sampled.next())
                .unwrap_or(cfg.hdv_params),
            _ => cfg.hdv_params,
        })
        .collect();
    for p in &params {
        p.validate()?;
    }
    let s_star = params
        .iter()
        .map(|p| equilibrium_spacing(cfg.v_star, p).map(|e| e.s_star))
        .collect::<Result<Vec<_>>>()?;
    let delay_steps = params
        .iter()
        .zip(&roles)
        .map(|(p, r)| if *r == Role::Hdv { (p.delay / cfg.dt).round() as usize } else { 0 })
        .collect();
    let mut p0 = vec![0.0; ids.len()];
    for i in 1..ids.len() {
        p0[i] = p0[i - 1] - s_star[i];
    }
    let cav_coeffs = coeffs_at(cfg.v_star, &cfg.hdv_params)?;
    Ok(Setup {
        ids,
        roles,
        params,
        s_star,
        delay_steps,
        p0,
        cav_coeffs,
    })
}

/// Runs the scenario with forward Euler at `cfg.dt`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimulationTrace> {
    let su = setup(cfg)?;
    let nv = su.ids.len();
    let dt = cfg.dt;
    let steps = (cfg.horizon / dt).round() as usize;
    let v_star = cfg.v_star;

    let mut tr = SimulationTrace {
        times: Vec::with_capacity(steps + 1),
        ids: su.ids.clone(),
        pos: Vec::with_capacity((steps + 1) * nv),
        vel: Vec::with_capacity((steps + 1) * nv),
        acc: Vec::with_capacity((steps + 1) * nv),
        spacing: Vec::with_capacity((steps + 1) * nv),
        events: Vec::new(),
    };

    let head_velocity = |k: usize| match cfg.perturbation {
        Perturbation::HeadSinusoid { amplitude, period, start } => {
            let t = k as f64 * dt;
            if t >= start {
                v_star + amplitude * (2.0 * PI * (t - start) / period).sin()
            } else {
                v_star
            }
        }
        _ => v_star,
    };
    let brake = match cfg.perturbation {
        Perturbation::FollowerBrake {
            vehicle,
            decel,
            duration,
            start,
        } => {
            let first = (start / dt).round() as usize;
            let last = first + (duration / dt).round() as usize;
            Some((tr.index_of(vehicle).expect("validated"), decel, first, last))
        }
        _ => None,
    };
    let index_of = |id: i32| su.ids.iter().position(|&v| v == id);

    let mut pos = su.p0.clone();
    let mut vel = vec![v_star; nv];
    if su.roles[0] == Role::Head {
        vel[0] = head_velocity(0);
    }
    let mut acc = vec![0.0; nv];

    for k in 0..=steps {
        let t = k as f64 * dt;
        tr.times.push(t);
        let base = tr.pos.len();
        tr.pos.extend_from_slice(&pos);
        tr.vel.extend_from_slice(&vel);
        for i in 0..nv {
            let s = if i == 0 { f64::NAN } else { pos[i - 1] - pos[i] };
            if s <= 0.0 {
                return Err(LccError::Collision {
                    time: t,
                    leader: su.ids[i - 1],
                    follower: su.ids[i],
                });
            }
            tr.spacing.push(s);
        }

        // delayed state (position, velocity) of vehicle j at step k - d
        let delayed = |j: usize, d: usize| -> (f64, f64) {
            if d == 0 {
                (pos[j], vel[j])
            } else if k >= d {
                (tr.pos[base - d * nv + j], tr.vel[base - d * nv + j])
            } else {
                (su.p0[j] - v_star * (d - k) as f64 * dt, v_star)
            }
        };

        for i in 0..nv {
            acc[i] = match su.roles[i] {
                Role::Head => (head_velocity(k + 1) - vel[i]) / dt,
                Role::Hdv => match brake {
                    Some((b, decel, first, last)) if b == i && (first..last).contains(&k) => decel,
                    _ => {
                        let d = su.delay_steps[i];
                        let (pp, vp) = delayed(i - 1, d);
                        let (p, v) = delayed(i, d);
                        saturate(ovm_acceleration(pp - p, vp - v, v, &su.params[i])?)
                    }
                },
                Role::Cav => {
                    let c = &su.cav_coeffs;
                    let tilde = |j: usize| (pos[j - 1] - pos[j] - su.s_star[j], vel[j] - v_star);
                    let v0 = vel[i] - v_star;
                    let s0 = if i > 0 {
                        tilde(i).0
                    } else {
                        -(pos[i] - (su.p0[i] + v_star * t))
                    };
                    let mut u = 0.0;
                    if i > 0 && cfg.controller.mode == BaselineMode::HdvBaseline {
                        u += c.alpha1 * s0 - c.alpha2 * v0 + c.alpha3 * (vel[i - 1] - v_star);
                    }
                    for (id, g) in cfg.controller.gains.iter() {
                        let (s, v) = if id == 0 {
                            (s0, v0)
                        } else {
                            let j = index_of(id).expect("validated gain id");
                            tilde(j)
                        };
                        u += g.mu * s + g.k * v;
                    }
                    if i > 0 && safety_triggered(pos[i - 1] - pos[i], vel[i], vel[i - 1]) {
                        tr.events.push(SimEvent {
                            t,
                            vehicle: 0,
                            event: "safety_brake".into(),
                        });
                        u = A_MIN;
                    }
                    saturate(u)
                }
            };
        }
        tr.acc.extend_from_slice(&acc);
        if vel.iter().any(|v| !v.is_finite()) || acc.iter().any(|a| !a.is_finite()) {
            return Err(LccError::Numerical(format!("non-finite state at t = {t}")));
        }

        if k == steps {
            break;
        }
        for i in 0..nv {
            pos[i] += vel[i] * dt;
            vel[i] = if su.roles[i] == Role::Head {
                head_velocity(k + 1)
            } else {
                (vel[i] + acc[i] * dt).max(0.0)
            };
        }
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilibrium_configs() -> Vec<ScenarioConfig> {
        vec![
            ScenarioConfig::new(0, 3, false, 30.0),
            ScenarioConfig::new(0, 3, true, 30.0),
            ScenarioConfig::new(2, 2, true, 30.0),
            ScenarioConfig::new(3, 0, true, 30.0),
        ]
    }

    #[test]
    fn equilibrium_is_held() {
        for mut cfg in equilibrium_configs() {
            if cfg.n > 0 {
                cfg.controller.gains = FeedbackGains::new().with(1, -1.0, -1.0);
            }
            let tr = simulate(&cfg).unwrap();
            for k in 0..tr.steps() {
                for i in 0..tr.ids.len() {
                    assert!((tr.vel(k, i) - 15.0).abs() < 1e-9);
                    if i > 0 {
                        assert!((tr.spacing(k, i) - 20.0).abs() < 1e-9);
                    }
                }
            }
            assert!(tr.events.is_empty());
        }
    }

    #[test]
    fn brake_kinematics() {
        let mut cfg = ScenarioConfig::new(0, 3, false, 30.0);
        cfg.controller.mode = BaselineMode::ExplicitLinear;
        cfg.perturbation = Perturbation::FollowerBrake {
            vehicle: 1,
            decel: -5.0,
            duration: 1.0,
            start: 20.0,
        };
        let tr = simulate(&cfg).unwrap();
        let i = tr.index_of(1).unwrap();
        assert!((tr.vel(2100, i) - 10.0).abs() < 1e-9);
        assert!((tr.times[2100] - 21.0).abs() < 1e-12);
        assert_eq!(tr.acc(2000, i), -5.0);
        assert_ne!(tr.acc(2100, i), -5.0);
    }

    #[test]
    fn head_sinusoid_is_exact() {
        let mut cfg = ScenarioConfig::new(1, 1, true, 40.0);
        cfg.perturbation = Perturbation::head_sinusoid(2.0, 10.0, 20.0);
        let tr = simulate(&cfg).unwrap();
        for k in 0..tr.steps() {
            let t = tr.times[k];
            let expect = if t >= 20.0 {
                15.0 + 2.0 * (2.0 * PI * (t - 20.0) / 10.0).sin()
            } else {
                15.0
            };
            assert_eq!(tr.vel(k, 0), expect);
            assert!((A_MIN..=A_MAX).contains(&tr.acc(k, 0)));
        }
    }

    #[test]
    fn kinematic_consistency_and_csv() {
        let mut cfg = ScenarioConfig::new(1, 2, true, 5.0);
        cfg.perturbation = Perturbation::head_sinusoid(1.0, 5.0, 1.0);
        let tr = simulate(&cfg).unwrap();
        for k in 0..tr.steps() {
            assert!(tr.spacing(k, 0).is_nan());
            for i in 1..tr.ids.len() {
                assert_eq!(tr.spacing(k, i).to_bits(), (tr.pos(k, i - 1) - tr.pos(k, i)).to_bits());
            }
        }
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,vehicle,pos,vel,acc,spacing"));
        assert!(lines.next().unwrap().starts_with("0.00,-2,0,15,"));
        assert_eq!(text.lines().count(), 1 + tr.steps() * 5);
        let mut buf = Vec::new();
        tr.write_events_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,vehicle,event\n");
    }

    #[test]
    fn collision_is_reported() {
        let mut cfg = ScenarioConfig::new(0, 2, false, 30.0);
        cfg.controller.mode = BaselineMode::ExplicitLinear;
        cfg.perturbation = Perturbation::FollowerBrake {
            vehicle: 1,
            decel: 2.0,
            duration: 20.0,
            start: 1.0,
        };
        match simulate(&cfg) {
            Err(LccError::Collision { leader, follower, time }) => {
                assert_eq!((leader, follower), (0, 1));
                assert!(time > 1.0 && time < 21.0);
            }
            other => panic!("expected collision, got {other:?}"),
        }
    }

    #[test]
    fn safety_override() {
        assert!(safety_triggered(10.0, 15.0, 5.0));
        assert!(!safety_triggered(20.0, 15.0, 15.0));
        // CAV behind a head that slows hard relative to it
        let mut cfg = ScenarioConfig::new(0, 1, true, 40.0);
        cfg.perturbation = Perturbation::head_sinusoid(-10.0, 40.0, 1.0);
        cfg.controller.mode = BaselineMode::ExplicitLinear;
        let tr = simulate(&cfg).unwrap();
        let c = tr.index_of(0).unwrap();
        let mut hits = 0;
        for k in 0..tr.steps() {
            if safety_triggered(tr.spacing(k, c), tr.vel(k, c), tr.vel(k, c - 1)) {
                assert_eq!(tr.acc(k, c), A_MIN);
                hits += 1;
            }
        }
        assert!(hits > 0);
        assert_eq!(hits, tr.events.len());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ScenarioConfig::new(1, 1, false, 10.0);
        assert!(simulate(&cfg).is_err());
        cfg.head = true;
        cfg.dt = 0.0;
        assert!(simulate(&cfg).is_err());
        cfg.dt = 0.01;
        cfg.perturbation = Perturbation::head_sinusoid(2.0, 10.0, 20.0);
        assert!(simulate(&cfg).is_err());
        cfg.perturbation = Perturbation::FollowerBrake {
            vehicle: 0,
            decel: -5.0,
            duration: 1.0,
            start: 1.0,
        };
        assert!(simulate(&cfg).is_err());
        cfg.perturbation = Perturbation::None;
        cfg.controller.gains = FeedbackGains::new().with(3, 1.0, 1.0);
        assert!(simulate(&cfg).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let mut cfg = ScenarioConfig::new(2, 2, true, 60.0);
        cfg.perturbation = Perturbation::head_sinusoid(2.0, 10.0, 20.0);
        cfg.controller.gains = FeedbackGains::new().with(-2, 1.0, -1.0);
        cfg.heterogeneity = Some(HeterogeneitySpec::default());
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let min: ScenarioConfig = serde_json::from_str(r#"{"n":2,"horizon":10}"#).unwrap();
        assert_eq!(min.dt, 0.01);
        assert_eq!(min.v_star, 15.0);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"n":2,"horizon":10,"bogus":1}"#).is_err());
    }

    #[test]
    fn heterogeneous_delayed_run_is_deterministic() {
        let mut cfg = ScenarioConfig::new(0, 4, false, 40.0);
        cfg.heterogeneity = Some(HeterogeneitySpec::default());
        cfg.seed = 9;
        cfg.perturbation = Perturbation::FollowerBrake {
            vehicle: 1,
            decel: -5.0,
            duration: 1.0,
            start: 10.0,
        };
        let csv = |cfg: &ScenarioConfig| {
            let mut buf = Vec::new();
            simulate(cfg).unwrap().write_csv(&mut buf).unwrap();
            buf
        };
        let a = csv(&cfg);
        assert_eq!(a, csv(&cfg));
        cfg.seed = 10;
        assert_ne!(a, csv(&cfg));
    }
}
