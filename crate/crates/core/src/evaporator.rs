//! Three-zone moving-boundary evaporator as a semi-explicit index-1 DAE.
//!
//! The tube is split into a subcooled, a two-phase, and a superheated zone
//! whose lengths move with the operating point. Differential states are the
//! three wall temperatures and the first zone length; the remaining zone
//! length, the evaporation pressure, and the outlet enthalpy are algebraic
//! variables pinned each step by three balance residuals. The waste-heat gas
//! runs counter-current (it enters at the superheated end) and is resolved by
//! a static per-zone energy balance.

use serde::{Deserialize, Serialize};

use crate::fluid::Fluid;
use crate::linalg::solve_dense;
use crate::plant::PlantError;

use std::f64::consts::PI;

/// Geometry, heat-transfer, machine, and numerical parameters of the plant.
/// `Default` is the tuned desk-scale parameter set shared by every experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// Tube inner / outer diameter (m).
    pub d_i: f64,
    pub d_o: f64,
    /// Working-fluid flow cross-section (m^2).
    pub area: f64,
    /// Total evaporator length (m).
    pub l_total: f64,
    /// Lumped wall heat capacity per meter (J/(m K)).
    pub wall_capacity: f64,
    /// Inner heat-transfer coefficients per zone (W/(m^2 K)).
    pub alpha_i: [f64; 3],
    /// Outer (gas-side) heat-transfer coefficients per zone (W/(m^2 K)).
    pub alpha_o: [f64; 3],
    /// Expander isentropic / volumetric efficiency and swept volume (m^3/rev).
    pub exp_eta_is: f64,
    pub exp_eta_vol: f64,
    pub exp_swept_vol: f64,
    /// Pump isentropic / volumetric efficiency and displacement (m^3/rev).
    pub pump_eta_is: f64,
    pub pump_eta_vol: f64,
    pub pump_disp: f64,
    /// Actuator windows (rev/s).
    pub omega_p_range: [f64; 2],
    pub omega_x_range: [f64; 2],
    /// Nominal expander speed (rev/s); held constant unless scripted.
    pub omega_x_nom: f64,
    /// Condenser pressure (Pa) and pump-inlet subcooling (K).
    pub p_cond: f64,
    pub subcooling: f64,
    /// Isentropic pressure-ratio exponent of the expander enthalpy drop.
    pub kappa: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Row scaling bringing the three algebraic residuals to O(1).
    pub row_scale: [f64; 3],
    /// Smallest admissible zone length (m).
    pub min_zone: f64,
    /// Waste-heat mass-flow nominal value and admissible band (kg/s).
    pub m_a_nom: f64,
    pub m_a_lo: f64,
    pub m_a_hi: f64,
    /// Waste-heat inlet temperature (K).
    pub t_a_nom: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        let d_i = 0.02;
        PlantParams {
            d_i,
            d_o: 0.025,
            area: PI * d_i * d_i / 4.0,
            l_total: 10.5,
            wall_capacity: 300.0,
            alpha_i: [900.0, 3500.0, 150.0],
            alpha_o: [550.0, 550.0, 550.0],
            exp_eta_is: 0.70,
            exp_eta_vol: 0.90,
            exp_swept_vol: 3.3e-5,
            pump_eta_is: 0.75,
            pump_eta_vol: 0.95,
            pump_disp: 2.0e-6,
            omega_p_range: [16.0, 23.5],
            omega_x_range: [20.0, 80.0],
            omega_x_nom: 50.0,
            p_cond: 2.0e5,
            subcooling: 5.0,
            kappa: 0.063,
            dt: 1.0,
            row_scale: [1e-9, 1e-8, 1e-3],
            min_zone: 0.05,
            m_a_nom: 0.40,
            m_a_lo: 0.33,
            m_a_hi: 0.47,
            t_a_nom: 400.0,
        }
    }
}

impl PlantParams {
    /// Center of the pump-speed window (rev/s).
    pub fn omega_p_mid(&self) -> f64 {
        0.5 * (self.omega_p_range[0] + self.omega_p_range[1])
    }

    /// Half-width of the pump-speed window (rev/s).
    pub fn omega_p_half(&self) -> f64 {
        0.5 * (self.omega_p_range[1] - self.omega_p_range[0])
    }

    /// Maps a normalized action in [-1, 1] onto the pump-speed window,
    /// clipping out-of-range actions first.
    pub fn speed_from_action(&self, action: f64) -> f64 {
        self.omega_p_mid() + self.omega_p_half() * action.clamp(-1.0, 1.0)
    }
}

/// Full evaporator state: differential fields (wall temperatures, first zone
/// length) plus algebraic fields (second zone length, pressure, outlet
/// enthalpy) kept consistent by the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaporatorState {
    /// Wall temperatures per zone (K).
    pub t_w1: f64,
    pub t_w2: f64,
    pub t_w3: f64,
    /// Subcooled zone length (m).
    pub l1: f64,
    /// Two-phase zone length (m).
    pub l2: f64,
    /// Evaporation pressure (Pa).
    pub p_e: f64,
    /// Outlet specific enthalpy (J/kg).
    pub h_o: f64,
}

impl EvaporatorState {
    /// Zone lengths `[L1, L2, L3]`; the superheated zone takes the remainder.
    pub fn lengths(&self, l_total: f64) -> [f64; 3] {
        [self.l1, self.l2, l_total - self.l1 - self.l2]
    }

    pub(crate) fn walls(&self) -> [f64; 3] {
        [self.t_w1, self.t_w2, self.t_w3]
    }

    pub(crate) fn algebraic(&self) -> [f64; 3] {
        [self.l2, self.p_e, self.h_o]
    }

    pub(crate) fn with_algebraic(mut self, y: [f64; 3]) -> Self {
        self.l2 = y[0];
        self.p_e = y[1];
        self.h_o = y[2];
        self
    }
}

/// Boundary conditions for one evaluation of the balance equations.
#[derive(Debug, Clone, Copy)]
pub struct EvaporatorInputs {
    /// Working-fluid inlet mass flow (kg/s).
    pub m_in: f64,
    /// Inlet specific enthalpy (J/kg).
    pub h_in: f64,
    /// Outlet mass flow drawn by the expander (kg/s).
    pub m_o: f64,
    /// Waste-heat gas mass flow (kg/s).
    pub m_a: f64,
    /// Waste-heat gas inlet temperature (K).
    pub t_a: f64,
}

/// Gas-side temperatures from the per-zone static balance.
#[derive(Debug, Clone, Copy)]
pub struct WasteHeatMeans {
    /// Mean gas temperature over each zone (K), indexed like the zones.
    pub t_bar: [f64; 3],
    /// Gas temperature after the last zone in flow direction (K).
    pub t_exit: f64,
}

/// Marches the waste-heat gas zone by zone. The gas enters at the superheated
/// zone and leaves after the subcooled one; each zone balances the transferred
/// heat `L_j pi D_o alpha_oj (T_wj - T_bar_aj)` against the gas enthalpy drop,
/// one linear equation for the zone outlet temperature.
pub fn waste_heat_means(
    fl: &Fluid,
    pp: &PlantParams,
    lengths: [f64; 3],
    t_w: [f64; 3],
    m_a: f64,
    t_a: f64,
) -> Result<WasteHeatMeans, PlantError> {
    if m_a <= 0.0 {
        return Err(PlantError::DegenerateDisturbance);
    }
    let c = m_a * fl.cp_a;
    let mut t_bar = [0.0; 3];
    let mut t_in = t_a;
    for j in [2usize, 1, 0] {
        let k = lengths[j] * PI * pp.d_o * pp.alpha_o[j];
        let t_out = (k * t_w[j] + (c - 0.5 * k) * t_in) / (c + 0.5 * k);
        t_bar[j] = 0.5 * (t_in + t_out);
        t_in = t_out;
    }
    Ok(WasteHeatMeans { t_bar, t_exit: t_in })
}

/// Heat flow into the subcooled zone boundary: enthalpy deficit carried in by
/// the feed plus the wall-to-fluid transfer of zone 1. Zero at steady state.
fn q1(pp: &PlantParams, state: &EvaporatorState, inputs: &EvaporatorInputs, hl: f64, t_bar1: f64) -> f64 {
    (inputs.h_in - hl) * inputs.m_in
        + PI * pp.d_i * state.l1 * pp.alpha_i[0] * (state.t_w1 - t_bar1)
}

/// Time derivatives of the differential states: three wall energy balances
/// and the subcooled zone-boundary motion.
pub fn evap_rhs(
    fl: &Fluid,
    pp: &PlantParams,
    state: &EvaporatorState,
    inputs: &EvaporatorInputs,
) -> Result<[f64; 4], PlantError> {
    let lengths = state.lengths(pp.l_total);
    let rm = fl.region_means(state.p_e, inputs.h_in, state.h_o)?;
    let (hl, _) = fl.sat_enthalpies(state.p_e)?;
    let gas = waste_heat_means(fl, pp, lengths, state.walls(), inputs.m_a, inputs.t_a)?;
    let t_w = state.walls();
    let mut out = [0.0; 4];
    for j in 0..3 {
        let inner = PI * pp.d_i * lengths[j] * pp.alpha_i[j] * (rm.t_bar[j] - t_w[j]);
        let outer = PI * pp.d_o * lengths[j] * pp.alpha_o[j] * (gas.t_bar[j] - t_w[j]);
        out[j] = (inner + outer) / (pp.wall_capacity * lengths[j]);
    }
    // Zone-boundary rate: boundary heat imbalance over the thermal inertia of
    // the subcooled charge. The denominator is the zone mean enthalpy measured
    // against saturation, 0.5 A rho_1 (h_in - h_l); it is negative, which is
    // what makes the boundary self-correcting (excess heat shortens the zone).
    let q = q1(pp, state, inputs, hl, rm.t_bar[0]);
    let den = 0.5 * pp.area * rm.rho_bar[0] * (inputs.h_in - hl);
    out[3] = q / den;
    Ok(out)
}

/// The three algebraic residuals (mixture energy, superheated-zone energy,
/// mass balance), each scaled by `row_scale` so a consistent state sits below
/// 1e-8 on every row.
pub fn evap_residual(
    fl: &Fluid,
    pp: &PlantParams,
    state: &EvaporatorState,
    inputs: &EvaporatorInputs,
) -> Result<[f64; 3], PlantError> {
    let lengths = state.lengths(pp.l_total);
    let rm = fl.region_means(state.p_e, inputs.h_in, state.h_o)?;
    let (hl, hg) = fl.sat_enthalpies(state.p_e)?;
    let a = pp.area;
    let q = q1(pp, state, inputs, hl, rm.t_bar[0]);
    let q2h = PI * pp.d_i * lengths[1] * pp.alpha_i[1] * (state.t_w2 - rm.t_bar[1]);
    let q3h = PI * pp.d_i * lengths[2] * pp.alpha_i[2] * (state.t_w3 - rm.t_bar[2]);
    let lead = 0.5 * a * rm.rho_bar[0] * (inputs.h_in - hl);
    let g1 = a * (rm.rho_bar[0] * hl - rm.rho_bar[2] * hg) * q
        - lead * (hl * inputs.m_in - hg * inputs.m_o + q2h);
    let g2 = 0.5 * a * rm.rho_bar[2] * (hg - state.h_o) * q
        - lead * ((hg - state.h_o) * inputs.m_o + q3h);
    let g3 = a * (rm.rho_bar[0] - rm.rho_bar[2]) * q - lead * (inputs.m_in - inputs.m_o);
    Ok([
        g1 * pp.row_scale[0],
        g2 * pp.row_scale[1],
        g3 * pp.row_scale[2],
    ])
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Result of an algebraic solve.
#[derive(Debug, Clone, Copy)]
pub struct AlgebraicSolve {
    /// State with the algebraic fields replaced by the converged values.
    pub state: EvaporatorState,
    /// Newton iterations spent.
    pub iterations: usize,
    /// Final scaled residual max-norm.
    pub residual: f64,
}

/// Damped Newton iteration on the algebraic variables (L2, P_e, h_o) with the
/// differential fields and all inputs held fixed. Steps are backtracked until
/// they stay inside the admissible region (positive zone lengths, pressure
/// window, superheated outlet) and reduce the residual.
pub fn solve_algebraic(
    fl: &Fluid,
    pp: &PlantParams,
    state: &EvaporatorState,
    inputs: &EvaporatorInputs,
    tol: f64,
    max_iter: usize,
) -> Result<AlgebraicSolve, PlantError> {
    let mut y = state.algebraic();
    let res = |y: [f64; 3]| evap_residual(fl, pp, &state.with_algebraic(y), inputs);
    let admissible = |y: [f64; 3]| -> bool {
        let l3 = pp.l_total - state.l1 - y[0];
        y[0] > pp.min_zone
            && l3 > pp.min_zone
            && y[1] > fl.p_min
            && y[1] < fl.p_max
            && fl.sat_enthalpies(y[1]).map(|(_, hg)| y[2] > hg + 1.0).unwrap_or(false)
    };
    let mut r = res(y)?;
    for iter in 0..max_iter {
        let n0 = max_abs(&r);
        if n0 < tol {
            return Ok(AlgebraicSolve { state: state.with_algebraic(y), iterations: iter, residual: n0 });
        }
        let mut jac = [[0.0; 3]; 3];
        for k in 0..3 {
            let d = (1e-7 * y[k].abs()).max(1e-9);
            let mut yp = y;
            yp[k] += d;
            let mut ym = y;
            ym[k] -= d;
            let (rp, rm_) = (res(yp)?, res(ym)?);
            for row in 0..3 {
                jac[row][k] = (rp[row] - rm_[row]) / (2.0 * d);
            }
        }
        let neg_r = [-r[0], -r[1], -r[2]];
        let Some(step) = solve_dense(jac, neg_r) else {
            return Err(PlantError::SolverStalled { residual: n0, iters: iter });
        };
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let yt = [y[0] + lam * step[0], y[1] + lam * step[1], y[2] + lam * step[2]];
            if admissible(yt) {
                let rt = res(yt)?;
                if max_abs(&rt) < n0 {
                    y = yt;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            return Err(PlantError::SolverStalled { residual: n0, iters: iter });
        }
    }
    let residual = max_abs(&res(y)?);
    if residual < tol {
        Ok(AlgebraicSolve { state: state.with_algebraic(y), iterations: max_iter, residual })
    } else {
        Err(PlantError::SolverStalled { residual, iters: max_iter })
    }
}
