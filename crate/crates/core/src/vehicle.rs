//! Single-track lateral vehicle model.
//!
//! State is `[beta, r, x, y, psi]`: side-slip angle, yaw rate, Earth-fixed
//! position of the centre of gravity and yaw angle. The vehicle moves at a
//! constant speed `V`; only the front wheel steers. A yaw-moment disturbance
//! enters the yaw-rate equation directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Physical parameters of the single-track model.
///
/// The defaults describe a mid-size sedan. They are placeholders with
/// plausible magnitudes, not measured values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass (kg).
    pub mass: f64,
    /// Yaw moment of inertia (kg·m²).
    pub yaw_inertia: f64,
    /// Front axle cornering stiffness (N/rad).
    pub cornering_front: f64,
    /// Rear axle cornering stiffness (N/rad).
    pub cornering_rear: f64,
    /// CG to front axle (m).
    pub lf: f64,
    /// CG to rear axle (m).
    pub lr: f64,
    /// Constant CG speed (m/s).
    pub speed: f64,
    /// Half of the body width (m). Only used to inflate obstacles.
    pub half_width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            cornering_front: 60_000.0,
            cornering_rear: 60_000.0,
            lf: 1.2,
            lr: 1.4,
            speed: 10.0,
            half_width: 0.9,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("cornering_front", self.cornering_front),
            ("cornering_rear", self.cornering_rear),
            ("lf", self.lf),
            ("lr", self.lr),
            ("speed", self.speed),
            ("half_width", self.half_width),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Linear coefficients of the side-slip / yaw-rate subsystem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCoefficients {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Evaluates the side-slip / yaw-rate coefficients for `params`.
pub fn derive_coefficients(params: &VehicleParams) -> Result<ModelCoefficients> {
    params.validate()?;
    let VehicleParams {
        mass: m,
        yaw_inertia: iz,
        cornering_front: cf,
        cornering_rear: cr,
        lf,
        lr,
        speed: v,
        ..
    } = *params;
    Ok(ModelCoefficients {
        a11: (-cf - cr) / (m * v),
        a12: -1.0 + (cr * lr - cf * lf) / (m * v * v),
        a21: (cr * lr - cf * lf) / iz,
        a22: (-cf * lf * lf - cr * lr * lr) / (iz * v),
        b1: cf / (m * v),
        b2: cf * lf / iz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleState {
    /// Side-slip angle (rad).
    pub beta: f64,
    /// Yaw rate (rad/s).
    pub yaw_rate: f64,
    pub x: f64,
    pub y: f64,
    /// Yaw angle (rad). Never wrapped.
    pub psi: f64,
}

impl VehicleState {
    pub fn at(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi,
            ..Self::default()
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Course angle `beta + psi`, the direction of the CG velocity.
    pub fn course(&self) -> f64 {
        self.beta + self.psi
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.beta, self.yaw_rate, self.x, self.y, self.psi]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            beta: a[0],
            yaw_rate: a[1],
            x: a[2],
            y: a[3],
            psi: a[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Front steering angle (rad).
    pub delta_f: f64,
    /// Yaw disturbance moment (N·m).
    pub yaw_moment: f64,
}

impl ControlInput {
    pub fn steer(delta_f: f64) -> Self {
        Self {
            delta_f,
            yaw_moment: 0.0,
        }
    }
}

/// Parameters bundled with their derived coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralModel {
    params: VehicleParams,
    coeffs: ModelCoefficients,
}

impl LateralModel {
    pub fn new(params: VehicleParams) -> Result<Self> {
        let coeffs = derive_coefficients(&params)?;
        Ok(Self { params, coeffs })
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn coeffs(&self) -> &ModelCoefficients {
        &self.coeffs
    }

    pub fn speed(&self) -> f64 {
        self.params.speed
    }

    /// Time derivative of the state under `input`. Rejects non-finite data.
    pub fn state_derivative(&self, state: &VehicleState, input: &ControlInput) -> Result<[f64; 5]> {
        if !state.is_finite() {
            return Err(Error::NonFinite("vehicle state"));
        }
        if !input.delta_f.is_finite() || !input.yaw_moment.is_finite() {
            return Err(Error::NonFinite("control input"));
        }
        Ok(self.derivative(&state.to_array(), input))
    }

    fn derivative(&self, s: &[f64; 5], input: &ControlInput) -> [f64; 5] {
        let c = &self.coeffs;
        let v = self.params.speed;
        let [beta, r, _, _, psi] = *s;
        let (sin, cos) = (beta + psi).sin_cos();
        [
            c.a11 * beta + c.a12 * r + c.b1 * input.delta_f,
            c.a21 * beta
                + c.a22 * r
                + c.b2 * input.delta_f
                + input.yaw_moment / self.params.yaw_inertia,
            v * cos,
            v * sin,
            r,
        ]
    }

    /// One classical RK4 step with the input held over the step.
    pub fn integrate_step(
        &self,
        state: &VehicleState,
        input: &ControlInput,
        dt: f64,
    ) -> VehicleState {
        assert!(dt > 0.0, "integration step must be positive, got {dt}");
        let s0 = state.to_array();
        let k1 = self.derivative(&s0, input);
        let k2 = self.derivative(&axpy(&s0, 0.5 * dt, &k1), input);
        let k3 = self.derivative(&axpy(&s0, 0.5 * dt, &k2), input);
        let k4 = self.derivative(&axpy(&s0, dt, &k3), input);
        let mut out = s0;
        for i in 0..5 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        VehicleState::from_array(out)
    }
}

fn axpy(x: &[f64; 5], a: f64, y: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| x[i] + a * y[i])
}
