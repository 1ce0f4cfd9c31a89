//! Linearized state-space models of the mixed platoon.
//!
//! Vehicles are indexed relative to the CAV (id 0): preceding HDVs are
//! `-m..=-1`, following HDVs are `1..=n`. Each vehicle contributes two
//! consecutive states, spacing error then velocity error, ordered from the
//! front of the platoon to the tail.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LccError, Result};
use crate::vehicle::LinearCoeffs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemVariant {
    /// `m` HDVs ahead and `n` HDVs behind the CAV.
    #[serde(rename = "general")]
    GeneralLcc,
    /// CAV follows the head vehicle with HDV dynamics plus an extra input.
    #[serde(rename = "cf")]
    CfLcc,
    /// CAV drives freely; its first state is its negated position.
    #[serde(rename = "fd")]
    FdLcc,
    /// Connected cruise control: HDVs ahead only.
    Ccc,
}

impl SystemVariant {
    pub fn check_topology(self, m: usize, n: usize) -> Result<()> {
        let ok = match self {
            SystemVariant::GeneralLcc => m >= 1 && n >= 1,
            SystemVariant::CfLcc | SystemVariant::FdLcc => m == 0,
            SystemVariant::Ccc => m >= 1 && n == 0,
        };
        if ok {
            Ok(())
        } else {
            Err(LccError::Topology(format!("{self} does not admit m = {m}, n = {n}")))
        }
    }

    /// Whether the CAV's own states may carry feedback gains (id 0).
    pub fn allows_self_gain(self) -> bool {
        matches!(self, SystemVariant::CfLcc | SystemVariant::FdLcc)
    }
}

impl fmt::Display for SystemVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemVariant::GeneralLcc => "general",
            SystemVariant::CfLcc => "cf",
            SystemVariant::FdLcc => "fd",
            SystemVariant::Ccc => "ccc",
        })
    }
}

impl std::str::FromStr for SystemVariant {
    type Err = LccError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "general" | "lcc" | "generallcc" => Ok(SystemVariant::GeneralLcc),
            "cf" | "cflcc" => Ok(SystemVariant::CfLcc),
            "fd" | "fdlcc" => Ok(SystemVariant::FdLcc),
            "ccc" => Ok(SystemVariant::Ccc),
            _ => Err(LccError::Topology(format!("unknown variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateKind {
    Spacing,
    /// `-p_0`, used for the free-driving CAV.
    NegPosition,
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateSlot {
    pub vehicle: i32,
    pub kind: StateKind,
}

/// Bidirectional map between state rows and `(vehicle, kind)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    slots: Vec<StateSlot>,
}

impl IndexMap {
    fn new(variant: SystemVariant, first: i32, last: i32) -> Self {
        let mut slots = Vec::with_capacity(2 * (last - first + 1) as usize);
        for vehicle in first..=last {
            let lead = if vehicle == 0 && variant == SystemVariant::FdLcc {
                StateKind::NegPosition
            } else {
                StateKind::Spacing
            };
            slots.push(StateSlot { vehicle, kind: lead });
            slots.push(StateSlot {
                vehicle,
                kind: StateKind::Velocity,
            });
        }
        Self { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, row: usize) -> Option<StateSlot> {
        self.slots.get(row).copied()
    }

    pub fn row(&self, slot: StateSlot) -> Option<usize> {
        self.slots.iter().position(|s| *s == slot)
    }

    /// `(first-state row, velocity row)` of a vehicle.
    pub fn vehicle_rows(&self, vehicle: i32) -> Option<(usize, usize)> {
        let first = self.slots.iter().position(|s| s.vehicle == vehicle)?;
        Some((first, first + 1))
    }

    pub fn vehicles(&self) -> impl Iterator<Item = i32> + '_ {
        self.slots.iter().step_by(2).map(|s| s.vehicle)
    }
}

/// Linear model `x' = A x + B u + H v~_h`.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    pub variant: SystemVariant,
    pub m: usize,
    pub n: usize,
    pub coeffs: LinearCoeffs,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Head-vehicle disturbance column; `None` for free driving.
    pub h: Option<DVector<f64>>,
    pub index: IndexMap,
}

impl StateSpaceModel {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Row of the CAV's velocity state.
    pub fn cav_velocity_row(&self) -> usize {
        self.index.vehicle_rows(0).expect("CAV present").1
    }
}

/// One `(mu, k)` pair: spacing gain in 1/s², velocity gain in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainPair {
    pub mu: f64,
    pub k: f64,
}

/// Per-vehicle feedback gains of the CAV controller; absent ids mean zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeedbackGains {
    entries: BTreeMap<i32, GainPair>,
}

impl FeedbackGains {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, vehicle: i32, mu: f64, k: f64) -> Self {
        self.set(vehicle, mu, k);
        self
    }

    pub fn set(&mut self, vehicle: i32, mu: f64, k: f64) {
        self.entries.insert(vehicle, GainPair { mu, k });
    }

    pub fn get(&self, vehicle: i32) -> GainPair {
        self.entries.get(&vehicle).copied().unwrap_or_default()
    }

    pub fn entry_mut(&mut self, vehicle: i32) -> &mut GainPair {
        self.entries.entry(vehicle).or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, GainPair)> + '_ {
        self.entries.iter().map(|(&id, &g)| (id, g))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|g| g.mu == 0.0 && g.k == 0.0)
    }

    /// Checks every id lies in `-m..=-1`, `1..=n`, or is 0 when `allow_self`.
    pub fn check_range(&self, m: usize, n: usize, allow_self: bool) -> Result<()> {
        for &vehicle in self.entries.keys() {
            let ok = (vehicle < 0 && vehicle >= -(m as i32))
                || (vehicle > 0 && vehicle <= n as i32)
                || (vehicle == 0 && allow_self);
            if !ok {
                return Err(LccError::GainOutOfRange { vehicle });
            }
        }
        Ok(())
    }
}

fn put_block(a: &mut DMatrix<f64>, row_block: usize, col_block: usize, block: [[f64; 2]; 2]) {
    for (r, row) in block.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            a[(2 * row_block + r, 2 * col_block + c)] = *v;
        }
    }
}

/// Assembles `(A, B, H)` for a variant and platoon size.
pub fn build_system(variant: SystemVariant, m: usize, n: usize, c: LinearCoeffs) -> Result<StateSpaceModel> {
    variant.check_topology(m, n)?;
    let p1 = [[0.0, -1.0], [c.alpha1, -c.alpha2]];
    let p2 = [[0.0, 1.0], [0.0, c.alpha3]];
    let s1 = [[0.0, -1.0], [0.0, 0.0]];
    let s2 = [[0.0, 1.0], [0.0, 0.0]];

    let first = -(m as i32);
    let last = n as i32;
    let blocks = (last - first + 1) as usize;
    let dim = 2 * blocks;
    let mut a = DMatrix::zeros(dim, dim);
    for blk in 0..blocks {
        let vehicle = first + blk as i32;
        if vehicle == 0 {
            match variant {
                SystemVariant::CfLcc => put_block(&mut a, blk, blk, p1),
                _ => put_block(&mut a, blk, blk, s1),
            }
            if blk > 0 {
                put_block(&mut a, blk, blk - 1, s2);
            }
        } else {
            put_block(&mut a, blk, blk, p1);
            if blk > 0 {
                put_block(&mut a, blk, blk - 1, p2);
            }
        }
    }

    let cav_block = m;
    let mut b = DVector::zeros(dim);
    b[2 * cav_block + 1] = 1.0;

    let h = match variant {
        SystemVariant::FdLcc => None,
        _ => {
            let mut h = DVector::zeros(dim);
            h[0] = 1.0;
            h[1] = c.alpha3;
            Some(h)
        }
    };

    Ok(StateSpaceModel {
        variant,
        m,
        n,
        coeffs: c,
        a,
        b,
        h,
        index: IndexMap::new(variant, first, last),
    })
}

/// Feedback row `K` such that `u = K x`.
///
/// For the general and CCC variants it contains the HDV-like baseline
/// `a1 s~0 - a2 v~0 + a3 v~_{-1}`; for CF-LCC the baseline already lives in
/// `A`, and FD-LCC has none.
pub fn gain_row(model: &StateSpaceModel, gains: &FeedbackGains) -> Result<DVector<f64>> {
    gains.check_range(model.m, model.n, model.variant.allows_self_gain())?;
    let mut k = DVector::zeros(model.dim());
    if matches!(model.variant, SystemVariant::GeneralLcc | SystemVariant::Ccc) {
        let c = &model.coeffs;
        let (s0, v0) = model.index.vehicle_rows(0).expect("CAV");
        let (_, vm1) = model.index.vehicle_rows(-1).expect("vehicle -1");
        k[s0] += c.alpha1;
        k[v0] -= c.alpha2;
        k[vm1] += c.alpha3;
    }
    for (vehicle, g) in gains.iter() {
        let (s, v) = model
            .index
            .vehicle_rows(vehicle)
            .ok_or(LccError::GainOutOfRange { vehicle })?;
        k[s] += g.mu;
        k[v] += g.k;
    }
    Ok(k)
}

/// Closed-loop matrix `A + B K` under the CAV feedback law.
pub fn closed_loop_matrix(model: &StateSpaceModel, gains: &FeedbackGains) -> Result<DMatrix<f64>> {
    let k = gain_row(model, gains)?;
    Ok(&model.a + &model.b * k.transpose())
}
