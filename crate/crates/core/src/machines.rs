//! Static pump and expander models closing the mass-flow loop around the
//! evaporator.
//!
//! Both machines are treated as quasi-steady volumetric devices: flow is
//! displacement times speed times inlet density times a volumetric efficiency.
//! The condenser side is collapsed to a fixed pressure with fixed subcooling,
//! so the pump inlet state is a constant of the parameter set.

use crate::evaporator::PlantParams;
use crate::fluid::Fluid;
use crate::plant::PlantError;

/// Pump mass flow at a given speed, with the speed clipped to the physical
/// window first. `clamped` records whether clipping actually happened.
#[derive(Debug, Clone, Copy)]
pub struct PumpFlow {
    pub m_dot: f64,
    pub clamped: bool,
}

/// Expander operating point at one (pressure, outlet enthalpy, speed) tuple.
#[derive(Debug, Clone, Copy)]
pub struct ExpanderPoint {
    /// Mass flow swallowed by the expander (kg/s).
    pub m_dot: f64,
    /// Enthalpy after the real (non-isentropic) expansion (J/kg).
    pub h_out: f64,
    /// Shaft power (W).
    pub power: f64,
}

/// Pump-inlet density and enthalpy (condensate at `p_cond`, subcooled by the
/// configured amount).
pub fn pump_inlet(fl: &Fluid, pp: &PlantParams) -> Result<(f64, f64), PlantError> {
    let t_in = fl.t_sat(pp.p_cond)? - pp.subcooling;
    let rho = fl.rho_liq(t_in);
    let (hl, _) = fl.sat_enthalpies(pp.p_cond)?;
    Ok((rho, hl - fl.cp_liq * pp.subcooling))
}

/// Working-fluid feed flow from the pump at speed `omega_p` (rev/s).
pub fn pump_flow(fl: &Fluid, pp: &PlantParams, omega_p: f64) -> Result<PumpFlow, PlantError> {
    let clipped = omega_p.clamp(pp.omega_p_range[0], pp.omega_p_range[1]);
    let (rho, _) = pump_inlet(fl, pp)?;
    Ok(PumpFlow {
        m_dot: pp.pump_eta_vol * pp.pump_disp * rho * clipped,
        clamped: clipped != omega_p,
    })
}

/// Power drawn by the pump raising the feed from `p_cond` to `p_e` (W).
pub fn pump_power(fl: &Fluid, pp: &PlantParams, m_dot: f64, p_e: f64) -> Result<f64, PlantError> {
    let (rho, _) = pump_inlet(fl, pp)?;
    Ok(m_dot * (p_e - pp.p_cond) / (rho * pp.pump_eta_is))
}

/// Enthalpy of the feed entering the evaporator: pump-inlet enthalpy plus the
/// isentropic pressure-rise work divided by the pump isentropic efficiency.
pub fn feed_enthalpy(fl: &Fluid, pp: &PlantParams, p_e: f64) -> Result<f64, PlantError> {
    let (rho, h0) = pump_inlet(fl, pp)?;
    Ok(h0 + (p_e - pp.p_cond) / (rho * pp.pump_eta_is))
}

/// Mass flow, outlet enthalpy, and shaft power of the expander fed from
/// (p_e, h_o) at speed `omega_x`. The inlet must be superheated; the
/// isentropic enthalpy drop is modeled as cp_vap T_in (1 - (p_cond/p_e)^kappa).
pub fn expander_model(
    fl: &Fluid,
    pp: &PlantParams,
    p_e: f64,
    h_o: f64,
    omega_x: f64,
) -> Result<ExpanderPoint, PlantError> {
    let (_, hg) = fl.sat_enthalpies(p_e)?;
    if h_o <= hg {
        return Err(PlantError::SubcooledExpanderInlet { p: p_e, h: h_o });
    }
    let t_o = fl.t_from_ph(p_e, h_o)?;
    let rho = fl.rho_vap(p_e, t_o)?;
    let m_dot = pp.exp_eta_vol * pp.exp_swept_vol * rho * omega_x;
    let drop_is = fl.cp_vap * t_o * (1.0 - (pp.p_cond / p_e).powf(pp.kappa));
    let h_out = h_o - pp.exp_eta_is * drop_is;
    Ok(ExpanderPoint { m_dot, h_out, power: (h_o - h_out) * m_dot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pump_inlet_matches_frozen_values() {
        let fl = Fluid::default();
        let pp = PlantParams::default();
        let (rho, h) = pump_inlet(&fl, &pp).unwrap();
        assert_relative_eq!(rho, 1330.8684258031653, max_relative = 1e-12);
        assert_relative_eq!(h, 229511.5104857196, max_relative = 1e-12);
    }

    #[test]
    fn pump_flow_matches_frozen_value_and_is_linear_in_speed() {
        let fl = Fluid::default();
        let pp = PlantParams::default();
        let f = pump_flow(&fl, &pp, 19.75).unwrap();
        assert!(!f.clamped);
        assert_relative_eq!(f.m_dot, 0.04994083767826377, max_relative = 1e-12);
        let f2 = pump_flow(&fl, &pp, 2.0 * 19.75);
        // 39.5 rev/s is outside the window, so compare within it instead.
        assert!(f2.unwrap().clamped);
        let lo = pump_flow(&fl, &pp, 16.0).unwrap().m_dot;
        let hi = pump_flow(&fl, &pp, 23.5).unwrap().m_dot;
        assert_relative_eq!(hi / lo, 23.5 / 16.0, max_relative = 1e-12);
    }

    #[test]
    fn pump_speed_outside_the_window_saturates_with_a_flag() {
        let fl = Fluid::default();
        let pp = PlantParams::default();
        let f = pump_flow(&fl, &pp, 100.0).unwrap();
        assert!(f.clamped);
        assert_relative_eq!(f.m_dot, pump_flow(&fl, &pp, 23.5).unwrap().m_dot);
    }

    #[test]
    fn feed_enthalpy_matches_frozen_value() {
        let fl = Fluid::default();
        let pp = PlantParams::default();
        assert_relative_eq!(
            feed_enthalpy(&fl, &pp, 7.7e5).unwrap(),
            230082.5661853402,
            max_relative = 1e-12
        );
    }

    #[test]
    fn pump_power_scales_with_pressure_rise() {
        let fl = Fluid::default();
        let pp = PlantParams::default();
        let m = pump_flow(&fl, &pp, 19.75).unwrap().m_dot;
        let w = pump_power(&fl, &pp, m, 7.7e5).unwrap();
        // Direct arithmetic: m (p_e - p_cond) / (rho eta).
        assert_relative_eq!(
            w,
            m * (7.7e5 - 2.0e5) / (1330.8684258031653 * 0.75),
            max_relative = 1e-12
        );
        assert_relative_eq!(pump_power(&fl, &pp, m, pp.p_cond).unwrap(), 0.0);
    }

    #[test]
    fn expander_point_matches_frozen_values() {
        let fl = Fluid::default();
        let pp = PlantParams::default();
        let x = expander_model(&fl, &pp, 7.7e5, 7.0e5, 50.0).unwrap();
        assert_relative_eq!(x.m_dot, 0.03139997138828391, max_relative = 1e-12);
        assert_relative_eq!(x.power, 1067.5253536306184, max_relative = 1e-9);
        assert_relative_eq!(
            fl.t_from_ph(7.7e5, 7.0e5).unwrap(),
            608.6705960197185,
            max_relative = 1e-12
        );
    }

    #[test]
    fn expander_at_zero_speed_moves_nothing() {
        let fl = Fluid::default();
        let pp = PlantParams::default();
        let x = expander_model(&fl, &pp, 7.7e5, 7.0e5, 0.0).unwrap();
        assert_eq!(x.m_dot, 0.0);
        assert_eq!(x.power, 0.0);
    }

    #[test]
    fn expander_without_pressure_ratio_produces_no_power() {
        let fl = Fluid::default();
        // Equal pressures: the isentropic drop vanishes, h_out = h_in.
        let pp = PlantParams { p_cond: 7.7e5, ..PlantParams::default() };
        let x = expander_model(&fl, &pp, 7.7e5, 7.0e5, 50.0).unwrap();
        assert_relative_eq!(x.h_out, 7.0e5, max_relative = 1e-12);
        assert!(x.power.abs() < 1e-9);
    }

    #[test]
    fn expander_refuses_a_subcooled_inlet() {
        let fl = Fluid::default();
        let pp = PlantParams::default();
        let (_, hg) = fl.sat_enthalpies(7.7e5).unwrap();
        assert!(matches!(
            expander_model(&fl, &pp, 7.7e5, hg - 1.0, 50.0),
            Err(PlantError::SubcooledExpanderInlet { .. })
        ));
    }
}
