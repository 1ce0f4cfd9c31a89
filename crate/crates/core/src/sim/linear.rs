//! Forward-Euler response of the linearized closed loop to a head sinusoid.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{LccError, Result};
use crate::stability::{closed_loop_model, TransferSpec};

/// Velocity deviations of the linear model, row-major in (step, vehicle).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearResponse {
    pub times: Vec<f64>,
    pub ids: Vec<i32>,
    pub vel_dev: Vec<f64>,
}

impl LinearResponse {
    pub fn vel_dev(&self, k: usize, id: i32) -> Option<f64> {
        let i = self.ids.iter().position(|&v| v == id)?;
        Some(self.vel_dev[k * self.ids.len() + i])
    }
}

/// Integrates `x' = A_cl x + H v~_head` from the origin with the head
/// deviation `amplitude sin(2 pi (t - start) / period)` for `t >= start`.
pub fn linear_response(
    spec: &TransferSpec,
    amplitude: f64,
    period: f64,
    start: f64,
    horizon: f64,
    dt: f64,
) -> Result<LinearResponse> {
    if !(dt > 0.0 && horizon > 0.0 && period > 0.0) {
        return Err(LccError::Domain("dt, horizon and period must be positive".into()));
    }
    let (model, acl) = closed_loop_model(spec)?;
    let h = model.h.clone().expect("model with head input");
    let ids: Vec<i32> = model.index.vehicles().collect();
    let rows: Vec<usize> = ids
        .iter()
        .map(|&id| model.index.vehicle_rows(id).expect("vehicle in model").1)
        .collect();
    let steps = (horizon / dt).round() as usize;
    let input = |k: usize| {
        let t = k as f64 * dt;
        if t >= start {
            amplitude * (2.0 * PI * (t - start) / period).sin()
        } else {
            0.0
        }
    };
    let mut x = DVector::<f64>::zeros(model.dim());
    let mut out = LinearResponse {
        times: Vec::with_capacity(steps + 1),
        ids,
        vel_dev: Vec::with_capacity((steps + 1) * rows.len()),
    };
    for k in 0..=steps {
        out.times.push(k as f64 * dt);
        out.vel_dev.extend(rows.iter().map(|&r| x[r]));
        let dx = &acl * &x + &h * input(k);
        x += dx * dt;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::FeedbackGains;
    use crate::vehicle::LinearCoeffs;

    #[test]
    fn zero_input_stays_at_origin() {
        let spec = TransferSpec::new(1, 1, LinearCoeffs::nominal(), FeedbackGains::new());
        let r = linear_response(&spec, 0.0, 10.0, 0.0, 5.0, 0.01).unwrap();
        assert!(r.vel_dev.iter().all(|&v| v == 0.0));
        assert_eq!(r.ids, vec![-1, 0, 1]);
    }

    #[test]
    fn steady_amplitude_follows_transfer_function() {
        let spec = TransferSpec::new(1, 2, LinearCoeffs::nominal(), FeedbackGains::new());
        let period = 10.0;
        let r = linear_response(&spec, 1.0, period, 0.0, 200.0, 0.001).unwrap();
        let tail_peak = (150_000..r.times.len())
            .map(|k| r.vel_dev(k, 2).unwrap().abs())
            .fold(0.0, f64::max);
        let gain = crate::stability::head_to_tail(&spec, 2.0 * PI / period).unwrap().norm();
        assert!((tail_peak - gain).abs() < 1e-2 * gain, "{tail_peak} vs {gain}");
    }
}
