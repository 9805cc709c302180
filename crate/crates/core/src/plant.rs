//! The assembled plant: evaporator DAE plus the static machines, integrated
//! in time, with an equilibrium finder for initialization and calibration.
//!
//! Time stepping treats the system as a semi-explicit index-1 DAE: one
//! explicit Euler step on the differential states (wall temperatures, first
//! zone length), then a re-solve of the algebraic states so the balance
//! residuals stay below tolerance. The feed enthalpy and the expander draw
//! depend on the algebraic states themselves, so the re-solve wraps the Newton
//! iteration in a fixed-point sweep over that input coupling. Large actuator
//! jumps that the solver cannot swallow in one go are retried by continuation:
//! the pump speed is walked from its previous value in stages.

use serde::{Deserialize, Serialize};

use crate::evaporator::{
    evap_rhs, evap_residual, solve_algebraic, EvaporatorInputs, EvaporatorState, PlantParams,
};
use crate::fluid::{Fluid, FluidError};
use crate::linalg::solve_dense;
use crate::machines::{expander_model, feed_enthalpy, pump_flow, pump_power};

/// Errors from the mechanistic plant. Any error out of [`Plant::step`] is an
/// episode-terminating fault from the controller's point of view.
#[derive(Debug, Clone, thiserror::Error)]
pub enum PlantError {
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error("waste-heat flow is zero: the gas-side energy balance is degenerate")]
    DegenerateDisturbance,
    #[error("expander inlet not superheated: h = {h:.6e} J/kg at p_e = {p:.6e} Pa")]
    SubcooledExpanderInlet { p: f64, h: f64 },
    #[error("algebraic solve stalled at residual {residual:.3e} after {iters} iterations")]
    SolverStalled { residual: f64, iters: usize },
    #[error("feed/expander input coupling did not settle within {iters} sweeps")]
    CouplingDiverged { iters: usize },
    #[error("no admissible equilibrium found (final residual {residual:.3e})")]
    NoEquilibrium { residual: f64 },
    #[error("plant fault stepping from p_e = {p_e:.4e} Pa, SH = {sh:.2} K: {source}")]
    StepFault {
        p_e: f64,
        sh: f64,
        #[source]
        source: Box<PlantError>,
    },
}

/// Derived quantities reported alongside each accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutputs {
    /// Superheat at the evaporator outlet (K).
    pub sh: f64,
    /// Feed mass flow from the pump (kg/s).
    pub m_in: f64,
    /// Feed enthalpy at the new pressure (J/kg).
    pub h_in: f64,
    /// Expander draw at the new state (kg/s).
    pub m_out: f64,
    /// Expander shaft power (W).
    pub w_x: f64,
    /// Pump power (W).
    pub w_p: f64,
}

/// Solver knobs; the defaults match the tolerances the whole pipeline was
/// calibrated with.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Scaled-residual max-norm target of the algebraic re-solve.
    pub newton_tol: f64,
    /// Newton iteration cap per algebraic solve.
    pub newton_max_iter: usize,
    /// Relative change below which the input-coupling sweep is converged.
    pub coupling_tol: f64,
    /// Cap on input-coupling sweeps.
    pub coupling_max_iter: usize,
    /// Continuation stage counts tried after a failed re-solve.
    pub continuation_stages: [usize; 3],
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            newton_tol: 1e-11,
            newton_max_iter: 60,
            coupling_tol: 1e-13,
            coupling_max_iter: 30,
            continuation_stages: [4, 16, 64],
        }
    }
}

/// The mechanistic plant. Stateless by itself: callers own the
/// [`EvaporatorState`] and thread it through [`Plant::step`].
#[derive(Debug, Clone, Default)]
pub struct Plant {
    pub fluid: Fluid,
    pub params: PlantParams,
    pub solver: SolverSettings,
}

impl Plant {
    pub fn new(fluid: Fluid, params: PlantParams) -> Self {
        Plant { fluid, params, solver: SolverSettings::default() }
    }

    /// Superheat at the evaporator outlet (K).
    pub fn superheat(&self, state: &EvaporatorState) -> Result<f64, PlantError> {
        Ok(self.fluid.superheat(state.p_e, state.h_o)?)
    }

    /// Re-solves the algebraic states of `state` so they are consistent with
    /// the differential states and the machine speeds, sweeping the feed
    /// enthalpy and expander draw (which depend on the algebraic states) to a
    /// fixed point. Returns the consistent state and the sweep count.
    pub fn resolve_consistent(
        &self,
        state: &EvaporatorState,
        omega_p: f64,
        omega_x: f64,
        m_a: f64,
        t_a: f64,
    ) -> Result<(EvaporatorState, usize), PlantError> {
        let m_in = pump_flow(&self.fluid, &self.params, omega_p)?.m_dot;
        let mut cur = *state;
        for sweep in 0..self.solver.coupling_max_iter {
            let h_in = feed_enthalpy(&self.fluid, &self.params, cur.p_e)?;
            let m_out = expander_model(&self.fluid, &self.params, cur.p_e, cur.h_o, omega_x)?.m_dot;
            let inputs = EvaporatorInputs { m_in, h_in, m_o: m_out, m_a, t_a };
            let solved = solve_algebraic(
                &self.fluid,
                &self.params,
                &cur,
                &inputs,
                self.solver.newton_tol,
                self.solver.newton_max_iter,
            )?;
            let (old, new) = (cur.algebraic(), solved.state.algebraic());
            let rel = (0..3)
                .map(|k| (new[k] - old[k]).abs() / (old[k].abs() + f64::MIN_POSITIVE))
                .fold(0.0f64, f64::max);
            cur = solved.state;
            if rel < self.solver.coupling_tol {
                return Ok((cur, sweep));
            }
        }
        Err(PlantError::CouplingDiverged { iters: self.solver.coupling_max_iter })
    }

    fn step_inner(
        &self,
        state: &EvaporatorState,
        omega_p: f64,
        omega_x: f64,
        m_a: f64,
        t_a: f64,
        omega_prev: Option<f64>,
    ) -> Result<(EvaporatorState, StepOutputs), PlantError> {
        let fl = &self.fluid;
        let pp = &self.params;
        let m_in = pump_flow(fl, pp, omega_p)?.m_dot;
        let h_in = feed_enthalpy(fl, pp, state.p_e)?;
        let m_o = expander_model(fl, pp, state.p_e, state.h_o, omega_x)?.m_dot;
        let inputs = EvaporatorInputs { m_in, h_in, m_o, m_a, t_a };
        let f = evap_rhs(fl, pp, state, &inputs)?;
        let dt = pp.dt;
        let mut advanced = *state;
        advanced.t_w1 += dt * f[0];
        advanced.t_w2 += dt * f[1];
        advanced.t_w3 += dt * f[2];
        advanced.l1 += dt * f[3];

        let resolved = self.resolve_consistent(&advanced, omega_p, omega_x, m_a, t_a);
        let new_state = match resolved {
            Ok((s, _)) => s,
            Err(first_err) => {
                // A large actuator jump can put the old algebraic point outside
                // the Newton basin. Walk the speed over in stages, re-solving
                // at each intermediate speed, before giving up.
                let Some(prev) = omega_prev.filter(|p| *p != omega_p) else {
                    return Err(first_err);
                };
                let mut recovered = None;
                'stages: for &stages in &self.solver.continuation_stages {
                    let mut cur = advanced;
                    for s in 1..=stages {
                        let om = prev + (omega_p - prev) * s as f64 / stages as f64;
                        match self.resolve_consistent(&cur, om, omega_x, m_a, t_a) {
                            Ok((next, _)) => cur = next,
                            Err(_) => continue 'stages,
                        }
                    }
                    recovered = Some(cur);
                    break;
                }
                recovered.ok_or(first_err)?
            }
        };

        let sh = fl.superheat(new_state.p_e, new_state.h_o)?;
        let xp = expander_model(fl, pp, new_state.p_e, new_state.h_o, omega_x)?;
        let outputs = StepOutputs {
            sh,
            m_in,
            h_in: feed_enthalpy(fl, pp, new_state.p_e)?,
            m_out: xp.m_dot,
            w_x: xp.power,
            w_p: pump_power(fl, pp, m_in, new_state.p_e)?,
        };
        Ok((new_state, outputs))
    }

    /// Advances the plant by one step of `params.dt` seconds under the given
    /// pump speed, expander speed, and waste-heat boundary conditions.
    /// `omega_prev` (the speed applied on the previous step) enables the
    /// continuation retry after an aggressive speed change.
    pub fn step(
        &self,
        state: &EvaporatorState,
        omega_p: f64,
        omega_x: f64,
        m_a: f64,
        t_a: f64,
        omega_prev: Option<f64>,
    ) -> Result<(EvaporatorState, StepOutputs), PlantError> {
        self.step_inner(state, omega_p, omega_x, m_a, t_a, omega_prev)
            .map_err(|source| PlantError::StepFault {
                p_e: state.p_e,
                sh: self.fluid.superheat(state.p_e, state.h_o).unwrap_or(f64::NAN),
                source: Box::new(source),
            })
    }

    /// Finds the steady state at fixed speeds and boundary conditions by a
    /// damped Newton iteration on the full 7-dimensional system (all time
    /// derivatives and residuals zero). `warm` skips the crude initial sizing
    /// when a nearby solution is already known.
    pub fn equilibrium(
        &self,
        omega_p: f64,
        omega_x: f64,
        m_a: f64,
        t_a: f64,
        warm: Option<&EvaporatorState>,
    ) -> Result<EvaporatorState, PlantError> {
        let fl = &self.fluid;
        let pp = &self.params;
        let m_in = pump_flow(fl, pp, omega_p)?.m_dot;

        let eval = |w: &[f64; 7]| -> Result<[f64; 7], PlantError> {
            let state = state_from(w);
            let h_in = feed_enthalpy(fl, pp, state.p_e)?;
            let m_o = expander_model(fl, pp, state.p_e, state.h_o, omega_x)?.m_dot;
            let inputs = EvaporatorInputs { m_in, h_in, m_o, m_a, t_a };
            let f = evap_rhs(fl, pp, &state, &inputs)?;
            let g = evap_residual(fl, pp, &state, &inputs)?;
            Ok([f[0], f[1], f[2], f[3], g[0], g[1], g[2]])
        };
        let admissible = |w: &[f64; 7]| -> bool {
            let l3 = pp.l_total - w[3] - w[4];
            w[3] > pp.min_zone
                && w[4] > pp.min_zone
                && l3 > pp.min_zone
                && w[5] > fl.p_min
                && w[5] < fl.p_max
                && fl
                    .sat_enthalpies(w[5])
                    .map(|(hl, hg)| w[6] > hg + 1.0 && feed_enthalpy(fl, pp, w[5]).map(|h| h < hl - 1.0).unwrap_or(false))
                    .unwrap_or(false)
        };

        let mut w = match warm {
            Some(s) => [s.t_w1, s.t_w2, s.t_w3, s.l1, s.l2, s.p_e, s.h_o],
            None => self.crude_guess(omega_x, t_a, m_in)?,
        };
        let mut r = eval(&w)?;
        let mut residual = max_abs(&r);
        for _ in 0..200 {
            if residual < 1e-11 {
                break;
            }
            let mut jac = [[0.0; 7]; 7];
            for k in 0..7 {
                let d = (1e-6 * w[k].abs()).max(1e-8);
                let mut wp = w;
                wp[k] += d;
                let mut wm = w;
                wm[k] -= d;
                let (rp, rm) = (eval(&wp)?, eval(&wm)?);
                for row in 0..7 {
                    jac[row][k] = (rp[row] - rm[row]) / (2.0 * d);
                }
            }
            let mut neg = [0.0; 7];
            for k in 0..7 {
                neg[k] = -r[k];
            }
            let Some(step) = solve_dense(jac, neg) else {
                return Err(PlantError::NoEquilibrium { residual });
            };
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let mut wt = w;
                for k in 0..7 {
                    wt[k] = w[k] + lam * step[k];
                }
                if admissible(&wt) {
                    if let Ok(rt) = eval(&wt) {
                        if max_abs(&rt) < residual {
                            w = wt;
                            r = rt;
                            residual = max_abs(&r);
                            accepted = true;
                            break;
                        }
                    }
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        let state = state_from(&w);
        let (_, hg) = fl.sat_enthalpies(state.p_e.clamp(fl.p_min, fl.p_max))?;
        let valid = residual < 1e-8
            && state.l1 > pp.min_zone
            && state.l2 > pp.min_zone
            && pp.l_total - state.l1 - state.l2 > pp.min_zone
            && state.p_e > fl.p_min
            && state.p_e < fl.p_max
            && state.h_o > hg;
        if valid {
            Ok(state)
        } else {
            Err(PlantError::NoEquilibrium { residual })
        }
    }

    /// Equilibrium at the nominal operating point: mid pump speed, nominal
    /// expander speed and waste-heat conditions.
    pub fn nominal_equilibrium(&self) -> Result<EvaporatorState, PlantError> {
        let pp = &self.params;
        self.equilibrium(pp.omega_p_mid(), pp.omega_x_nom, pp.m_a_nom, pp.t_a_nom, None)
    }

    /// Crude initial sizing for the equilibrium solve: pick the pressure where
    /// the expander swallows the pump flow at roughly 20 K superheat, then
    /// place the zone boundaries and wall temperatures by rule of thumb.
    fn crude_guess(&self, omega_x: f64, t_a: f64, m_in: f64) -> Result<[f64; 7], PlantError> {
        let fl = &self.fluid;
        let pp = &self.params;
        let mut p = 6.0e5;
        for _ in 0..60 {
            let ts = fl.t_sat(p)?;
            let rho = fl.rho_vap(p, ts + 20.0)?;
            let m_x = pp.exp_eta_vol * pp.exp_swept_vol * rho * omega_x;
            p = (p * (m_in / m_x).powf(0.8)).clamp(1.5e5, 1.9e6);
        }
        let ts = fl.t_sat(p)?;
        let (_, hg) = fl.sat_enthalpies(p)?;
        Ok([
            0.5 * (ts - 20.0 + t_a),
            ts + 0.25 * (t_a - ts),
            ts + 25.0,
            0.25 * pp.l_total,
            0.45 * pp.l_total,
            p,
            hg + fl.cp_vap * 20.0,
        ])
    }
}

fn state_from(w: &[f64; 7]) -> EvaporatorState {
    EvaporatorState {
        t_w1: w[0],
        t_w2: w[1],
        t_w3: w[2],
        l1: w[3],
        l2: w[4],
        p_e: w[5],
        h_o: w[6],
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
