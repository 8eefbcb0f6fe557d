//! Coupled transient: staggered electric/thermal iteration per time step and
//! extraction of the peak wire temperature.

use super::model::{EtModel, STEFAN_BOLTZMANN};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Elongation support of the desk study; values outside only raise a warning.
pub const ELONGATION_SUPPORT: (f64, f64) = (0.122, 0.218);

/// Wire temperatures over time. Record 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    /// `wire_temperatures[step][wire]`, K.
    pub wire_temperatures: Vec<Vec<f64>>,
    /// Relative mismatch between stored energy and net inflow per step (0 for record 0).
    pub energy_residual: Vec<f64>,
    /// Electric/thermal iterations per step (0 for record 0).
    pub coupling_iterations: Vec<usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `step,time,wire,T_bw` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,time,wire,T_bw")?;
        for (s, (time, temps)) in self.times.iter().zip(&self.wire_temperatures).enumerate() {
            for (j, t) in temps.iter().enumerate() {
                writeln!(out, "{s},{time},{j},{t}")?;
            }
        }
        Ok(())
    }
}

/// Maximum wire temperature over all records and wires.
pub fn extract_qoi(trace: &Trace) -> Result<f64> {
    trace
        .wire_temperatures
        .iter()
        .flatten()
        .copied()
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        .ok_or_else(|| Error::Domain("empty trace".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transient {
    pub t_max: f64,
    pub trace: Trace,
    pub final_temperature: Vec<f64>,
    pub final_potential: Vec<f64>,
}

/// Work counters of one transient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TransientStats {
    pub electric_solves: usize,
    pub newton_iterations: usize,
    pub krylov_iterations: usize,
    pub factorizations: usize,
}

impl EtModel {
    /// Runs the configured transient for elongations `delta` (one per wire).
    pub fn run_transient(&self, delta: &[f64]) -> Result<Transient> {
        self.run_transient_with_stats(delta).map(|(t, _)| t)
    }

    pub fn run_transient_with_stats(&self, delta: &[f64]) -> Result<(Transient, TransientStats)> {
        self.check_delta(delta)?;
        let cfg = &self.def.config;
        let n = self.grid.num_nodes();
        let dt = cfg.dt();
        let mut warnings = Vec::new();
        let (lo, hi) = ELONGATION_SUPPORT;
        if delta.iter().any(|&d| d < lo || d > hi) {
            warnings.push(format!("elongation outside the support [{lo}, {hi}]: {delta:?}"));
        }
        let mut t = vec![cfg.ambient; n];
        let mut t_old = t.clone();
        let mut x = vec![0.0; self.electric_unknowns()];
        let mut ws = self.thermal_workspace();
        let mut stats = TransientStats::default();
        let mut trace = Trace {
            times: vec![0.0],
            wire_temperatures: vec![self.wire_temperatures(&t)],
            energy_residual: vec![0.0],
            coupling_iterations: vec![0],
            warnings,
        };
        let mut phi = self.expand_potential(&x);
        let mut t_older = t.clone();
        for step in 1..=cfg.steps {
            if step > 1 {
                // linear extrapolation in time as the starting iterate
                for i in 0..n {
                    t[i] = (2.0 * t_old[i] - t_older[i]).max(0.5 * t_old[i]);
                }
            }
            let mut wires_prev = self.wire_temperatures(&t);
            let mut q;
            let mut iters = 0;
            loop {
                iters += 1;
                let sys = self.assemble_electric(delta, &t)?;
                self.solve_electric_from(&sys, &mut x)?;
                stats.electric_solves += 1;
                phi = self.expand_potential(&x);
                q = self.heat_sources(delta, &phi, &t)?;
                self.thermal_step(&mut ws, delta, &t_old, &q, dt, &mut t)?;
                let wires_now = self.wire_temperatures(&t);
                let change = wires_now
                    .iter()
                    .zip(&wires_prev)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                wires_prev = wires_now;
                if change < cfg.coupling_tol {
                    break;
                }
                if iters >= cfg.coupling_max_iter {
                    return Err(Error::Numerical(format!(
                        "electrothermal iteration did not settle in step {step} (last wire change {change:e} K)"
                    )));
                }
            }
            trace.energy_residual.push(self.energy_residual(&t_old, &t, &q, dt));
            trace.times.push(step as f64 * dt);
            trace.wire_temperatures.push(wires_prev);
            trace.coupling_iterations.push(iters);
            t_older.copy_from_slice(&t_old);
            t_old.copy_from_slice(&t);
        }
        stats.newton_iterations = ws.newton_iterations;
        stats.krylov_iterations = ws.krylov_iterations;
        stats.factorizations = ws.factorizations;
        let t_max = extract_qoi(&trace)?;
        Ok((
            Transient { t_max, trace, final_temperature: t, final_potential: phi },
            stats,
        ))
    }

    /// `|ΔE_stored − dt (ΣQ − boundary outflow)|` relative to the larger of the two terms.
    pub fn energy_residual(&self, t_old: &[f64], t_new: &[f64], q: &[f64], dt: f64) -> f64 {
        let c = &self.def.config;
        let ta = c.ambient;
        let es = c.emissivity * STEFAN_BOLTZMANN;
        let mut stored = 0.0;
        let mut outflow = 0.0;
        for i in 0..t_new.len() {
            stored += self.capacity[i] * (t_new[i] - t_old[i]);
            let a = self.boundary_area[i];
            if a > 0.0 {
                outflow += a * (c.heat_transfer * (t_new[i] - ta) + es * (t_new[i].powi(4) - ta.powi(4)));
            }
        }
        let inflow = dt * (q.iter().sum::<f64>() - outflow);
        let scale = stored.abs().max(inflow.abs()).max(dt * q.iter().map(|v| v.abs()).sum::<f64>());
        if scale == 0.0 {
            0.0
        } else {
            (stored - inflow).abs() / scale
        }
    }
}
