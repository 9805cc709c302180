//! PI baseline controller with conditional-integration anti-windup.
//!
//! The controller acts on the superheat tracking error in kelvin and emits a
//! normalized actuator command in [-1, 1], the same interface the learned
//! policies use. While the output is saturated the integrator only keeps
//! accumulating when the error would unwind the saturation; otherwise it is
//! frozen, so the integral never charges up against the actuator limit.

/// Discrete PI controller state. One instance per control loop.
#[derive(Debug, Clone)]
pub struct PiController {
    pub kp: f64,
    pub ki: f64,
    pub u_min: f64,
    pub u_max: f64,
    integral: f64,
    u_prev: f64,
}

impl PiController {
    /// Controller with the given gains and the shared [-1, 1] actuator range.
    pub fn new(kp: f64, ki: f64) -> Self {
        PiController { kp, ki, u_min: -1.0, u_max: 1.0, integral: 0.0, u_prev: 0.0 }
    }

    /// One control update: candidate-integrate, then clamp, keeping the
    /// integral only if the unclamped output stays in range or the error
    /// drives out of saturation.
    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        let cand = self.integral + error * dt;
        let u_raw = self.kp * error + self.ki * cand;
        let u = if (self.u_min..=self.u_max).contains(&u_raw) {
            self.integral = cand;
            u_raw
        } else {
            if (u_raw > self.u_max && error < 0.0) || (u_raw < self.u_min && error > 0.0) {
                self.integral = cand;
            }
            (self.kp * error + self.ki * self.integral).clamp(self.u_min, self.u_max)
        };
        self.u_prev = u;
        u
    }

    /// Clears the integrator and the output memory.
    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.u_prev = 0.0;
    }

    /// Accumulated integral term (K s).
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Most recent output.
    pub fn u_prev(&self) -> f64 {
        self.u_prev
    }
}
