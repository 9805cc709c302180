//! Analytic working-fluid property correlations.
//!
//! A deliberately simple closed-form property set standing in for a real
//! refrigerant: an Antoine-form saturation curve, saturated enthalpies and
//! liquid density linear in the saturation temperature, an ideal-gas-like
//! vapor density correction, and constant single-phase heat capacities.
//! The coefficients are loosely R245fa-shaped. What matters for the control
//! study is internal consistency and smoothness, not tabulated accuracy.
//!
//! All pressure arguments are validated against a fixed window; outside it the
//! correlations would extrapolate nonsense, so they refuse to evaluate.

use serde::{Deserialize, Serialize};

/// Property evaluation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FluidError {
    #[error("pressure {p:.6e} Pa outside the correlation window [{min:.1e}, {max:.1e}] Pa")]
    PressureOutOfWindow { p: f64, min: f64, max: f64 },
    /// The evaporator model needs a subcooled inlet and a superheated outlet;
    /// an enthalpy on the wrong side of the saturation dome breaks that regime.
    #[error("three-zone regime collapse: {which} at p = {p:.6e} Pa")]
    RegionCollapse { which: &'static str, p: f64 },
}

/// Working-fluid coefficient set. `Default` is the tuned stand-in fluid used
/// by every experiment; all fields can be overridden from the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fluid {
    /// Antoine-form saturation curve T_sat(P) = b / (a - ln P) - c.
    pub antoine_a: f64,
    pub antoine_b: f64,
    pub antoine_c: f64,
    /// Anchor pressure for the vapor-density correlation (Pa).
    pub p_ref: f64,
    /// Saturated-liquid enthalpy h_l = hl_c0 + hl_c1 * T_sat (J/kg).
    pub hl_c0: f64,
    pub hl_c1: f64,
    /// Saturated-vapor enthalpy h_g = hg_c0 + hg_c1 * T_sat (J/kg).
    pub hg_c0: f64,
    pub hg_c1: f64,
    /// Liquid heat capacity (J/(kg K)); also the slope 1/(dT/dh) below h_l.
    pub cp_liq: f64,
    /// Vapor heat capacity (J/(kg K)).
    pub cp_vap: f64,
    /// Liquid density rho_l = rho_l_c0 + rho_l_c1 * T (kg/m^3).
    pub rho_l_c0: f64,
    pub rho_l_c1: f64,
    /// Saturated-vapor density at p_ref (kg/m^3) and its pressure exponent.
    pub rho_g_ref: f64,
    pub rho_g_exp: f64,
    /// Waste-heat gas heat capacity (J/(kg K)).
    pub cp_a: f64,
    /// Validity window for every pressure argument (Pa).
    pub p_min: f64,
    pub p_max: f64,
    /// Fixed mean void fraction of the two-phase region.
    pub gamma_bar: f64,
}

impl Default for Fluid {
    fn default() -> Self {
        Fluid {
            antoine_a: 22.324,
            antoine_b: 2627.0,
            antoine_c: -45.0,
            p_ref: 5.0e5,
            hl_c0: -175_000.0,
            hl_c1: 1350.0,
            hg_c0: 277_500.0,
            hg_c1: 475.0,
            cp_liq: 1350.0,
            cp_vap: 980.0,
            rho_l_c0: 2050.0,
            rho_l_c1: -2.4,
            rho_g_ref: 25.0,
            rho_g_exp: 0.93,
            cp_a: 1100.0,
            p_min: 1.0e5,
            p_max: 2.0e6,
            gamma_bar: 0.8,
        }
    }
}

/// Per-region mean properties of the three-zone evaporator at one pressure.
#[derive(Debug, Clone, Copy)]
pub struct RegionMeans {
    /// Mean densities, subcooled / two-phase / superheated (kg/m^3).
    pub rho_bar: [f64; 3],
    /// Mean fluid temperatures per region (K); `t_bar[1]` is exactly T_sat.
    pub t_bar: [f64; 3],
    /// Mean two-phase enthalpy (h_l + h_g)/2 (J/kg).
    pub h_m: f64,
}

impl Fluid {
    fn check_window(&self, p: f64) -> Result<(), FluidError> {
        if p >= self.p_min && p <= self.p_max {
            Ok(())
        } else {
            Err(FluidError::PressureOutOfWindow { p, min: self.p_min, max: self.p_max })
        }
    }

    /// Saturation temperature (K). Strictly increasing over the window.
    pub fn t_sat(&self, p: f64) -> Result<f64, FluidError> {
        self.check_window(p)?;
        Ok(self.antoine_b / (self.antoine_a - p.ln()) - self.antoine_c)
    }

    /// Saturation pressure (Pa), the exact inverse of [`Fluid::t_sat`].
    pub fn p_sat(&self, t: f64) -> f64 {
        (self.antoine_a - self.antoine_b / (t + self.antoine_c)).exp()
    }

    /// Saturated liquid and vapor enthalpies (h_l, h_g) in J/kg.
    pub fn sat_enthalpies(&self, p: f64) -> Result<(f64, f64), FluidError> {
        let ts = self.t_sat(p)?;
        Ok((self.hl_c0 + self.hl_c1 * ts, self.hg_c0 + self.hg_c1 * ts))
    }

    /// Liquid density at temperature `t` (kg/m^3). Total function.
    pub fn rho_liq(&self, t: f64) -> f64 {
        self.rho_l_c0 + self.rho_l_c1 * t
    }

    /// Saturated-vapor density (kg/m^3).
    pub fn rho_g_sat(&self, p: f64) -> Result<f64, FluidError> {
        self.check_window(p)?;
        Ok(self.rho_g_ref * (p / self.p_ref).powf(self.rho_g_exp))
    }

    /// Superheated-vapor density at (p, t): saturated density scaled by
    /// T_sat/T, the ideal-gas isobaric correction.
    pub fn rho_vap(&self, p: f64, t: f64) -> Result<f64, FluidError> {
        Ok(self.rho_g_sat(p)? * self.t_sat(p)? / t)
    }

    /// Temperature from pressure and enthalpy, piecewise across the dome:
    /// subcooled liquid below h_l, isothermal inside the dome, superheated
    /// vapor above h_g.
    pub fn t_from_ph(&self, p: f64, h: f64) -> Result<f64, FluidError> {
        let ts = self.t_sat(p)?;
        let (hl, hg) = self.sat_enthalpies(p)?;
        Ok(if h < hl {
            ts - (hl - h) / self.cp_liq
        } else if h > hg {
            ts + (h - hg) / self.cp_vap
        } else {
            ts
        })
    }

    /// Superheat (K) of an outlet at (p, h): temperature above saturation,
    /// negative when the enthalpy is still inside the dome.
    pub fn superheat(&self, p: f64, h: f64) -> Result<f64, FluidError> {
        let (_, hg) = self.sat_enthalpies(p)?;
        Ok((h - hg) / self.cp_vap)
    }

    /// Per-region mean densities and temperatures for the moving-boundary
    /// balance equations. Requires a subcooled inlet (`h_in` < h_l) and a
    /// superheated outlet (`h_o` > h_g); anything else means the three-zone
    /// split no longer describes the evaporator.
    pub fn region_means(&self, p: f64, h_in: f64, h_o: f64) -> Result<RegionMeans, FluidError> {
        let ts = self.t_sat(p)?;
        let (hl, hg) = self.sat_enthalpies(p)?;
        if h_in >= hl {
            return Err(FluidError::RegionCollapse { which: "inlet not subcooled", p });
        }
        if h_o <= hg {
            return Err(FluidError::RegionCollapse { which: "outlet not superheated", p });
        }
        let t_in = self.t_from_ph(p, h_in)?;
        let t_o = self.t_from_ph(p, h_o)?;
        let rho_l = self.rho_liq(ts);
        let rho_g = self.rho_g_sat(p)?;
        Ok(RegionMeans {
            rho_bar: [
                0.5 * (self.rho_liq(t_in) + rho_l),
                self.gamma_bar * rho_g + (1.0 - self.gamma_bar) * rho_l,
                0.5 * (rho_g + self.rho_vap(p, t_o)?),
            ],
            t_bar: [0.5 * (t_in + ts), ts, 0.5 * (ts + t_o)],
            h_m: 0.5 * (hl + hg),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Values frozen from a standalone evaluation of the correlations,
    // independent of this implementation.
    const SAT_TABLE: [(f64, f64, f64, f64, f64); 8] = [
        (1.0e5, 287.99157234445664, 213788.62266501645, 414295.99686361686, 5.596260273221552),
        (2.0e5, 304.63815591534785, 236261.5104857196, 422203.1240597902, 10.662420366429194),
        (3.3e5, 318.15778952223536, 254513.01585501776, 428624.9500230618, 16.98696800241115),
        (5.0e5, 330.49269089252016, 271165.1327049022, 434484.02817394707, 25.0),
        (7.7e5, 344.5488794046021, 290140.9871962128, 441160.71771718597, 37.353756125963315),
        (1.1e6, 357.24819038305486, 307285.0570171241, 447192.89043195103, 52.0466884212898),
        (1.55e6, 370.5171824790557, 325198.19634672516, 453495.66167755146, 71.59890557288844),
        (2.0e6, 381.13371137298594, 339530.51035353105, 458538.5129021683, 90.7519155317161),
    ];

    #[test]
    fn saturation_table_matches_frozen_values() {
        let fl = Fluid::default();
        for (p, ts, hl, hg, rg) in SAT_TABLE {
            assert_relative_eq!(fl.t_sat(p).unwrap(), ts, max_relative = 1e-12);
            let (hl2, hg2) = fl.sat_enthalpies(p).unwrap();
            assert_relative_eq!(hl2, hl, max_relative = 1e-12);
            assert_relative_eq!(hg2, hg, max_relative = 1e-12);
            assert_relative_eq!(fl.rho_g_sat(p).unwrap(), rg, max_relative = 1e-12);
        }
    }

    #[test]
    fn point_evaluations_match_frozen_values() {
        let fl = Fluid::default();
        assert_relative_eq!(fl.rho_liq(300.0), 1330.0, max_relative = 1e-12);
        assert_relative_eq!(fl.rho_liq(350.5), 1208.8000000000002, max_relative = 1e-12);
        assert_relative_eq!(
            fl.rho_vap(7.7e5, 380.0).unwrap(),
            33.86893372303539,
            max_relative = 1e-12
        );
    }

    #[test]
    fn temperature_from_ph_covers_all_three_branches() {
        let fl = Fluid::default();
        assert_relative_eq!(
            fl.t_from_ph(5.0e5, 2.0e5).unwrap(),
            277.77777777777777,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            fl.t_from_ph(5.0e5, 3.0e5).unwrap(),
            330.49269089252016,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            fl.t_from_ph(5.0e5, 5.0e5).unwrap(),
            397.34572336808435,
            max_relative = 1e-12
        );
    }

    #[test]
    fn superheat_branch_inverts_exactly() {
        let fl = Fluid::default();
        let p = 8.1e5;
        let (_, hg) = fl.sat_enthalpies(p).unwrap();
        let t = fl.t_from_ph(p, hg + fl.cp_vap * 10.0).unwrap();
        assert_relative_eq!(t, fl.t_sat(p).unwrap() + 10.0, max_relative = 1e-12);
        assert_relative_eq!(fl.superheat(p, hg + fl.cp_vap * 10.0).unwrap(), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn saturation_round_trips_through_p_sat() {
        let fl = Fluid::default();
        for (p, ..) in SAT_TABLE {
            let t = fl.t_sat(p).unwrap();
            assert_relative_eq!(fl.p_sat(t), p, max_relative = 1e-12);
        }
    }

    #[test]
    fn out_of_window_pressure_is_refused() {
        let fl = Fluid::default();
        for p in [0.5e5, 2.1e6, -1.0, 0.0] {
            let err = fl.t_sat(p).unwrap_err();
            match err {
                FluidError::PressureOutOfWindow { min, max, .. } => {
                    assert_eq!(min, fl.p_min);
                    assert_eq!(max, fl.p_max);
                }
                other => panic!("expected window error, got {other:?}"),
            }
        }
    }

    #[test]
    fn region_means_match_frozen_equilibrium_internals() {
        let fl = Fluid::default();
        let rm = fl
            .region_means(741769.7790279895, 230054.28367904614, 465048.1959380947)
            .unwrap();
        assert_relative_eq!(rm.rho_bar[0], 1278.0175661360388, max_relative = 1e-12);
        assert_relative_eq!(rm.rho_bar[1], 274.08910921430606, max_relative = 1e-12);
        assert_relative_eq!(rm.rho_bar[2], 34.854335546511884, max_relative = 1e-12);
        assert_relative_eq!(rm.t_bar[1], 343.27848475400765, max_relative = 1e-12);
        assert_relative_eq!(rm.h_m, 364491.617338032, max_relative = 1e-12);
    }

    #[test]
    fn region_means_symmetric_case_and_ordering() {
        let fl = Fluid::default();
        let p = 7.0e5;
        let ts = fl.t_sat(p).unwrap();
        let (hl, hg) = fl.sat_enthalpies(p).unwrap();
        let delta = 12.0;
        let rm = fl
            .region_means(p, hl - fl.cp_liq * delta, hg + fl.cp_vap * delta)
            .unwrap();
        assert_relative_eq!(rm.t_bar[0], ts - delta / 2.0, max_relative = 1e-12);
        assert_relative_eq!(rm.t_bar[2], ts + delta / 2.0, max_relative = 1e-12);
        assert!(rm.rho_bar[0] >= rm.rho_bar[1] && rm.rho_bar[1] >= rm.rho_bar[2]);
    }

    #[test]
    fn region_means_refuses_collapsed_regimes() {
        let fl = Fluid::default();
        let p = 7.0e5;
        let (hl, hg) = fl.sat_enthalpies(p).unwrap();
        assert!(matches!(
            fl.region_means(p, hl + 1.0, hg + 1e4),
            Err(FluidError::RegionCollapse { which: "inlet not subcooled", .. })
        ));
        assert!(matches!(
            fl.region_means(p, hl - 1e4, hg - 1.0),
            Err(FluidError::RegionCollapse { which: "outlet not superheated", .. })
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn t_sat_monotone_and_latent_heat_positive(
                a in 0usize..999, b in 1usize..1000
            ) {
                let fl = Fluid::default();
                let grid = |k: usize| fl.p_min + (fl.p_max - fl.p_min) * k as f64 / 1000.0;
                let (p1, p2) = (grid(a.min(a + b - 1)), grid((a + b).min(1000)));
                prop_assume!(p1 < p2);
                prop_assert!(fl.t_sat(p1).unwrap() < fl.t_sat(p2).unwrap());
                let (hl, hg) = fl.sat_enthalpies(p1).unwrap();
                prop_assert!(hg > hl);
                let ts = fl.t_sat(p1).unwrap();
                prop_assert!(fl.rho_liq(ts) > fl.rho_g_sat(p1).unwrap());
            }

            #[test]
            fn t_from_ph_non_decreasing_in_h(
                p in 1.0e5..2.0e6f64, h1 in 1.0e5..6.0e5f64, dh in 0.0..2.0e5f64
            ) {
                let fl = Fluid::default();
                let t1 = fl.t_from_ph(p, h1).unwrap();
                let t2 = fl.t_from_ph(p, h1 + dh).unwrap();
                prop_assert!(t2 >= t1 - 1e-12);
            }

            #[test]
            fn saturated_liquid_round_trip(p in 1.0e5..2.0e6f64) {
                let fl = Fluid::default();
                let (hl, _) = fl.sat_enthalpies(p).unwrap();
                let ts = fl.t_sat(p).unwrap();
                let t = fl.t_from_ph(p, hl).unwrap();
                prop_assert!((t - ts).abs() <= 1e-9 * ts.abs());
            }
        }
    }
}
