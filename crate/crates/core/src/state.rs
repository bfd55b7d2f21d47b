//! Conserved state vector, physical fluxes and solver parameters.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Depths below this are treated as dry: velocities are defined as zero.
pub const DRY_TOLERANCE: f64 = 1e-8;

/// Default gravitational acceleration (nondimensional problem units).
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Cell-averaged shallow water state `[h, hu, hv]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservedState {
    pub h: f64,
    pub hu: f64,
    pub hv: f64,
}

impl ConservedState {
    pub const ZERO: Self = Self { h: 0.0, hu: 0.0, hv: 0.0 };

    pub const fn new(h: f64, hu: f64, hv: f64) -> Self {
        Self { h, hu, hv }
    }

    pub fn from_array(q: [f64; 3]) -> Self {
        Self::new(q[0], q[1], q[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.h, self.hu, self.hv]
    }

    pub fn is_dry(&self) -> bool {
        self.h < DRY_TOLERANCE
    }

    /// x-velocity; zero for dry states.
    pub fn u(&self) -> f64 {
        if self.is_dry() {
            0.0
        } else {
            self.hu / self.h
        }
    }

    /// y-velocity; zero for dry states.
    pub fn v(&self) -> f64 {
        if self.is_dry() {
            0.0
        } else {
            self.hv / self.h
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.h.abs().max(self.hu.abs()).max(self.hv.abs())
    }
}

impl Add for ConservedState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.h + o.h, self.hu + o.hu, self.hv + o.hv)
    }
}

impl Sub for ConservedState {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.h - o.h, self.hu - o.hu, self.hv - o.hv)
    }
}

impl Neg for ConservedState {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.h, -self.hu, -self.hv)
    }
}

impl Mul<ConservedState> for f64 {
    type Output = ConservedState;
    fn mul(self, q: ConservedState) -> ConservedState {
        ConservedState::new(self * q.h, self * q.hu, self * q.hv)
    }
}

impl AddAssign for ConservedState {
    fn add_assign(&mut self, o: Self) {
        self.h += o.h;
        self.hu += o.hu;
        self.hv += o.hv;
    }
}

impl SubAssign for ConservedState {
    fn sub_assign(&mut self, o: Self) {
        self.h -= o.h;
        self.hu -= o.hu;
        self.hv -= o.hv;
    }
}

/// Mass and momentum flux in the x-direction: `[hu, ½gh² + hu²/h, hu·hv/h]`.
pub fn physical_flux_x(q: ConservedState, g: f64) -> [f64; 3] {
    if q.is_dry() {
        return [0.0; 3];
    }
    let u = q.hu / q.h;
    [q.hu, 0.5 * g * q.h * q.h + q.hu * u, q.hv * u]
}

/// Mass and momentum flux in the y-direction: `[hv, hu·hv/h, ½gh² + hv²/h]`.
pub fn physical_flux_y(q: ConservedState, g: f64) -> [f64; 3] {
    if q.is_dry() {
        return [0.0; 3];
    }
    let v = q.hv / q.h;
    [q.hv, q.hu * v, 0.5 * g * q.h * q.h + q.hv * v]
}

/// Which special average builds the edge eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageKind {
    #[default]
    Roe,
    Einfeldt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    First,
    #[default]
    Second,
}

impl Order {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::Validation("order".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub gravity: f64,
    pub cfl_target: f64,
    pub order: Order,
    pub average_kind: AverageKind,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            gravity: DEFAULT_GRAVITY,
            cfl_target: 0.45,
            order: Order::Second,
            average_kind: AverageKind::Roe,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gravity > 0.0) {
            return Err(Error::Validation("gravity".into()));
        }
        if !(self.cfl_target > 0.0 && self.cfl_target < 1.0) {
            return Err(Error::Validation("cfl".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flux_x_examples() {
        assert_eq!(physical_flux_x(ConservedState::new(2.0, 0.0, 0.0), 9.81), [0.0, 19.62, 0.0]);
        assert_eq!(physical_flux_x(ConservedState::new(1.0, 0.0, 0.0), 0.0), [0.0; 3]);
        let f = physical_flux_x(ConservedState::new(1.0, 1.0, 2.0), 9.81);
        assert_relative_eq!(f[0], 1.0);
        assert_relative_eq!(f[1], 5.905, epsilon = 1e-12);
        assert_relative_eq!(f[2], 2.0);
    }

    #[test]
    fn flux_y_examples() {
        assert_eq!(physical_flux_y(ConservedState::new(2.0, 0.0, 0.0), 9.81), [0.0, 0.0, 19.62]);
        let f = physical_flux_y(ConservedState::new(1.0, 2.0, 1.0), 9.81);
        assert_relative_eq!(f[0], 1.0);
        assert_relative_eq!(f[1], 2.0);
        assert_relative_eq!(f[2], 5.905, epsilon = 1e-12);
        assert_eq!(physical_flux_y(ConservedState::ZERO, 3.0), [0.0; 3]);
    }

    #[test]
    fn transverse_flux_vanishes_without_transverse_momentum() {
        let q = ConservedState::new(1.7, 0.3, 0.0);
        assert_eq!(physical_flux_x(q, 9.81)[2], 0.0);
        let q = ConservedState::new(1.7, 0.0, -0.4);
        assert_eq!(physical_flux_y(q, 9.81)[1], 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(SolverParams::default().validate().is_ok());
        let p = SolverParams { cfl_target: 1.0, ..Default::default() };
        assert!(matches!(p.validate(), Err(Error::Validation(f)) if f == "cfl"));
        let p = SolverParams { gravity: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
