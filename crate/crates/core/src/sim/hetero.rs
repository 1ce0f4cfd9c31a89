//! Seeded sampling of heterogeneous driver parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LccError, Result};
use crate::vehicle::DriverParams;

/// Half-widths of the uniform jitter applied to each driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeterogeneitySpec {
    /// 1/s
    pub alpha_jitter: f64,
    /// 1/s
    pub beta_jitter: f64,
    /// m
    pub s_go_jitter: f64,
    /// s
    pub delay_base: f64,
    /// s
    pub delay_jitter: f64,
}

impl Default for HeterogeneitySpec {
    fn default() -> Self {
        Self {
            alpha_jitter: 0.1,
            beta_jitter: 0.1,
            s_go_jitter: 5.0,
            delay_base: 0.4,
            delay_jitter: 0.1,
        }
    }
}

impl HeterogeneitySpec {
    /// No jitter and no delay.
    pub fn none() -> Self {
        Self {
            alpha_jitter: 0.0,
            beta_jitter: 0.0,
            s_go_jitter: 0.0,
            delay_base: 0.0,
            delay_jitter: 0.0,
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width > 0.0 {
        rng.random_range(-half_width..=half_width)
    } else {
        0.0
    }
}

/// Draws `n_vehicles` parameter sets around `base`; deterministic in `seed`.
pub fn sample_heterogeneous(
    spec: &HeterogeneitySpec,
    base: &DriverParams,
    n_vehicles: usize,
    seed: u64,
) -> Result<Vec<DriverParams>> {
    if n_vehicles == 0 {
        return Err(LccError::Domain("need at least one vehicle".into()));
    }
    let widths = [spec.alpha_jitter, spec.beta_jitter, spec.s_go_jitter, spec.delay_jitter];
    if widths.iter().any(|w| !w.is_finite() || *w < 0.0) || spec.delay_base.is_nan() || spec.delay_base < 0.0 {
        return Err(LccError::InvalidParams(format!("{spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_vehicles)
        .map(|_| {
            let p = DriverParams {
                alpha: base.alpha + jitter(&mut rng, spec.alpha_jitter),
                beta: base.beta + jitter(&mut rng, spec.beta_jitter),
                s_go: base.s_go + jitter(&mut rng, spec.s_go_jitter),
                delay: (spec.delay_base + jitter(&mut rng, spec.delay_jitter)).max(0.0),
                ..*base
            };
            p.validate().map(|_| p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_width_is_identity() {
        let base = DriverParams::default();
        let ps = sample_heterogeneous(&HeterogeneitySpec::none(), &base, 4, 7).unwrap();
        assert!(ps.iter().all(|p| *p == base));
    }

    #[test]
    fn bounds_and_determinism() {
        let base = DriverParams::default();
        let spec = HeterogeneitySpec::default();
        let a = sample_heterogeneous(&spec, &base, 200, 42).unwrap();
        for p in &a {
            assert!((0.5..=0.7).contains(&p.alpha));
            assert!((0.8..=1.0).contains(&p.beta));
            assert!((30.0..=40.0).contains(&p.s_go));
            assert!((0.3..=0.5).contains(&p.delay));
            p.validate().unwrap();
        }
        assert_eq!(a, sample_heterogeneous(&spec, &base, 200, 42).unwrap());
        assert_ne!(a, sample_heterogeneous(&spec, &base, 200, 43).unwrap());
        assert!(sample_heterogeneous(&spec, &base, 0, 1).is_err());
    }
}
