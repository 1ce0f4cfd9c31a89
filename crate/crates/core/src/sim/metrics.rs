//! Fuel and velocity-error metrics over a trace window.

use crate::error::{LccError, Result};
use crate::sim::SimulationTrace;

/// Instantaneous fuel rate in mL/s at velocity `v` (m/s) and acceleration `a` (m/s²).
pub fn fuel_rate(v: f64, a: f64) -> f64 {
    let r = 0.333 + 0.00108 * v * v + 1.2 * a;
    if r <= 0.0 {
        return 0.444;
    }
    let mut f = 0.444 + 0.09 * r * v;
    if a > 0.0 {
        f += 0.054 * a * a * v;
    }
    f
}

const WINDOW_SLACK: f64 = 1e-9;

/// Step indices inside `[ta, tb]`.
fn window_steps(trace: &SimulationTrace, window: (f64, f64)) -> Result<Vec<usize>> {
    let (ta, tb) = window;
    let last = *trace.times.last().unwrap_or(&0.0);
    if !(ta.is_finite() && tb.is_finite()) || ta < -WINDOW_SLACK || tb > last + WINDOW_SLACK {
        return Err(LccError::Domain(format!("window [{ta}, {tb}] outside trace [0, {last}]")));
    }
    Ok(trace
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= ta - WINDOW_SLACK && t <= tb + WINDOW_SLACK)
        .map(|(k, _)| k)
        .collect())
}

fn trapezoid(trace: &SimulationTrace, steps: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    steps
        .windows(2)
        .map(|w| 0.5 * (trace.times[w[1]] - trace.times[w[0]]) * (f(w[0]) + f(w[1])))
        .sum()
}

fn indices(trace: &SimulationTrace, vehicles: &[i32]) -> Result<Vec<usize>> {
    vehicles
        .iter()
        .map(|&id| {
            trace
                .index_of(id)
                .ok_or_else(|| LccError::Domain(format!("vehicle {id} not in trace")))
        })
        .collect()
}

/// Total fuel in mL consumed by `vehicles` over `window`.
pub fn total_fuel(trace: &SimulationTrace, window: (f64, f64), vehicles: &[i32]) -> Result<f64> {
    let steps = window_steps(trace, window)?;
    let idx = indices(trace, vehicles)?;
    Ok(idx
        .iter()
        .map(|&i| trapezoid(trace, &steps, |k| fuel_rate(trace.vel(k, i), trace.acc(k, i))))
        .sum())
}

/// Mean over `vehicles` of the time-averaged `|v - v_star|` in m/s.
pub fn aave(trace: &SimulationTrace, window: (f64, f64), v_star: f64, vehicles: &[i32]) -> Result<f64> {
    let steps = window_steps(trace, window)?;
    let idx = indices(trace, vehicles)?;
    let span = window.1 - window.0;
    if steps.len() < 2 || span <= 0.0 || idx.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = idx
        .iter()
        .map(|&i| trapezoid(trace, &steps, |k| (trace.vel(k, i) - v_star).abs()))
        .sum();
    Ok(sum / span / idx.len() as f64)
}
