//! Implicit-Euler heat step with nonlinear conduction, wire links and
//! convective/radiative boundaries, solved by damped Newton.

use super::model::{EtModel, STEFAN_BOLTZMANN};
use super::sparse::{bicgstab, pcg, SkylineLdlt, SparseMatrix};
use crate::error::{Error, Result};

/// Per-solver scratch space; one per concurrently running transient.
pub struct ThermalWorkspace {
    jac: SparseMatrix,
    pre_matrix: SparseMatrix,
    pre: SkylineLdlt,
    pre_ready: bool,
    r: Vec<f64>,
    trial: Vec<f64>,
    dx: Vec<f64>,
    pub factorizations: usize,
    pub krylov_iterations: usize,
    pub newton_iterations: usize,
}

/// Outcome of one thermal step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub newton_iterations: usize,
    pub relative_residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl EtModel {
    pub fn thermal_workspace(&self) -> ThermalWorkspace {
        let n = self.grid.num_nodes();
        ThermalWorkspace {
            jac: self.thermal_matrix(),
            pre_matrix: self.thermal_matrix(),
            pre: SkylineLdlt::symbolic(&self.thermal.pattern),
            pre_ready: false,
            r: vec![0.0; n],
            trial: vec![0.0; n],
            dx: vec![0.0; n],
            factorizations: 0,
            krylov_iterations: 0,
            newton_iterations: 0,
        }
    }

    /// Norm of the known terms of the step equation, used to scale residuals.
    fn load_norm(&self, t_old: &[f64], q: &[f64], dt: f64) -> f64 {
        let c = &self.def.config;
        let ta = c.ambient;
        let per_area = c.heat_transfer * ta + c.emissivity * STEFAN_BOLTZMANN * ta.powi(4);
        (0..t_old.len())
            .map(|i| (self.capacity[i] / dt * t_old[i] + q[i].abs() + self.boundary_area[i] * per_area).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Residual of the implicit-Euler step at `t`; returns its 2-norm.
    pub fn thermal_residual(&self, delta: &[f64], t_old: &[f64], q: &[f64], dt: f64, t: &[f64], r: &mut [f64]) -> Result<f64> {
        let c = &self.def.config;
        let (ta, h, es) = (c.ambient, c.heat_transfer, c.emissivity * STEFAN_BOLTZMANN);
        for i in 0..t.len() {
            let a = self.boundary_area[i];
            r[i] = self.capacity[i] / dt * (t[i] - t_old[i]) - q[i];
            if a > 0.0 {
                r[i] += a * (h * (t[i] - ta) + es * (t[i].powi(4) - ta.powi(4)));
            }
        }
        for e in &self.edges {
            let k = e.conductance(&self.materials, 0.5 * (t[e.a] + t[e.b]), false);
            let f = k * (t[e.a] - t[e.b]);
            r[e.a] += f;
            r[e.b] -= f;
        }
        for (j, w) in self.wires.iter().enumerate() {
            let (_, g) = self.wire_conductances(j, delta[j], t)?;
            let f = g * (t[w.a] - t[w.b]);
            r[w.a] += f;
            r[w.b] -= f;
        }
        Ok(norm(r))
    }

    /// Newton matrix at `t`; `exact` adds the conductivity-derivative terms,
    /// otherwise the symmetric part used for preconditioning is assembled.
    fn thermal_jacobian(&self, delta: &[f64], dt: f64, t: &[f64], m: &mut SparseMatrix, exact: bool) -> Result<()> {
        let c = &self.def.config;
        let (h, es) = (c.heat_transfer, c.emissivity * STEFAN_BOLTZMANN);
        m.clear();
        for i in 0..t.len() {
            let a = self.boundary_area[i];
            m.add_diag(i, self.capacity[i] / dt + a * (h + 4.0 * es * t[i].powi(3)));
        }
        let flux_derivative = |m: &mut SparseMatrix, s: &super::sparse::StampSlots, k: f64, dk: f64, ta: f64, tb: f64| {
            m.stamp(s, k);
            if exact && dk != 0.0 {
                // F = k(T̄)(T_a − T_b) with T̄ = (T_a + T_b)/2
                let d = 0.5 * dk * (ta - tb);
                m.values[s.aa] += d;
                m.values[s.ab] += d;
                m.values[s.ba] -= d;
                m.values[s.bb] -= d;
            }
        };
        for (e, s) in self.edges.iter().zip(&self.thermal.edge_slots) {
            let tm = 0.5 * (t[e.a] + t[e.b]);
            let k = e.conductance(&self.materials, tm, false);
            let dk = if exact { e.dconductance(&self.materials, tm) } else { 0.0 };
            flux_derivative(m, s, k, dk, t[e.a], t[e.b]);
        }
        for (j, (w, s)) in self.wires.iter().zip(&self.thermal.wire_slots).enumerate() {
            let (_, g) = self.wire_conductances(j, delta[j], t)?;
            let dg = if exact {
                let len = super::electric::total_length(w.min_length, delta[j])?;
                self.materials[w.material].dlambda(0.5 * (t[w.a] + t[w.b])) * w.area / len
            } else {
                0.0
            };
            flux_derivative(m, s, g, dg, t[w.a], t[w.b]);
        }
        Ok(())
    }

    fn refresh_preconditioner(&self, ws: &mut ThermalWorkspace, delta: &[f64], dt: f64, t: &[f64]) -> Result<()> {
        self.thermal_jacobian(delta, dt, t, &mut ws.pre_matrix, false)?;
        ws.pre.factor(&ws.pre_matrix)?;
        ws.pre_ready = true;
        ws.factorizations += 1;
        Ok(())
    }

    /// Forces a fresh preconditioner on the next step (e.g. after `dt` changes).
    pub fn reset_thermal_workspace(&self, ws: &mut ThermalWorkspace) {
        ws.pre_ready = false;
    }

    /// One implicit-Euler step: on return `t` solves
    /// `C (t − t_old)/dt + K(t) t + wires + boundary(t) = q`.
    /// `t` holds the Newton starting point on entry.
    pub fn thermal_step(
        &self,
        ws: &mut ThermalWorkspace,
        delta: &[f64],
        t_old: &[f64],
        q: &[f64],
        dt: f64,
        t: &mut [f64],
    ) -> Result<StepInfo> {
        self.check_delta(delta)?;
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step {dt} must be positive")));
        }
        let n = self.grid.num_nodes();
        if t_old.len() != n || q.len() != n || t.len() != n {
            return Err(Error::DimensionMismatch("thermal step vectors must have one entry per node".into()));
        }
        let cfg = &self.def.config;
        let load = self.load_norm(t_old, q, dt);
        let mut rn = self.thermal_residual(delta, t_old, q, dt, t, &mut ws.r)?;
        for it in 0..=cfg.newton_max_iter {
            if rn <= cfg.newton_tol * load {
                return Ok(StepInfo { newton_iterations: it, relative_residual: rn / load });
            }
            if it == cfg.newton_max_iter {
                break;
            }
            ws.newton_iterations += 1;
            if !ws.pre_ready {
                self.refresh_preconditioner(ws, delta, dt, t)?;
            }
            self.thermal_jacobian(delta, dt, t, &mut ws.jac, true)?;
            let rhs: Vec<f64> = ws.r.iter().map(|v| -v).collect();
            ws.dx.iter_mut().for_each(|v| *v = 0.0);
            let krylov = if self.symmetric_thermal { pcg } else { bicgstab };
            let solved = krylov(&ws.jac, &ws.pre, &rhs, &mut ws.dx, 1e-12, 12);
            let stats = match solved {
                Ok(s) => s,
                Err(_) => {
                    // lagged preconditioner too far off: rebuild at the current state
                    self.refresh_preconditioner(ws, delta, dt, t)?;
                    ws.dx.iter_mut().for_each(|v| *v = 0.0);
                    krylov(&ws.jac, &ws.pre, &rhs, &mut ws.dx, 1e-12, 500)?
                }
            };
            ws.krylov_iterations += stats.iterations;
            if stats.iterations > 6 {
                ws.pre_ready = false;
            }
            let mut alpha = 1.0;
            loop {
                for i in 0..n {
                    ws.trial[i] = t[i] + alpha * ws.dx[i];
                }
                let positive = ws.trial.iter().all(|&v| v > 0.0);
                let rt = if positive {
                    self.thermal_residual(delta, t_old, q, dt, &ws.trial, &mut ws.r)?
                } else {
                    f64::INFINITY
                };
                if rt < (1.0 - 1e-4 * alpha) * rn || (alpha < 1e-3 && rt.is_finite()) {
                    t.copy_from_slice(&ws.trial);
                    rn = rt;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-6 {
                    return Err(Error::Numerical(format!(
                        "Newton line search failed at relative residual {:e}",
                        rn / load
                    )));
                }
            }
        }
        Err(Error::Numerical(format!(
            "thermal Newton did not converge in {} iterations (relative residual {:e})",
            cfg.newton_max_iter,
            rn / load
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::super::model::testing::{block, material};
    use super::*;

    fn insulating_block(nodes: [usize; 3], h: f64, rho_c: f64, tweak: impl FnOnce(&mut super::super::model::EtConfig)) -> EtModel {
        let mut def = block(nodes, h, vec![material("m", 0.0, 2.0, rho_c)], vec![], vec![]);
        tweak(&mut def.config);
        EtModel::new(def).unwrap()
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let model = insulating_block([4, 3, 3], 1e-3, 1.7e6, |_| {});
        let n = model.grid.num_nodes();
        let mut ws = model.thermal_workspace();
        let t_old = vec![293.0; n];
        let mut t = t_old.clone();
        let info = model.thermal_step(&mut ws, &[], &t_old, &vec![0.0; n], 0.1, &mut t).unwrap();
        assert_eq!(info.newton_iterations, 0);
        assert!(t.iter().all(|&v| v == 293.0));
    }

    #[test]
    fn adiabatic_block_heats_uniformly() {
        let rho_c = 1.7e6;
        let model = insulating_block([4, 3, 3], 1e-3, rho_c, |c| {
            c.heat_transfer = 0.0;
            c.emissivity = 0.0;
        });
        let n = model.grid.num_nodes();
        let density = 2e6; // W/m³
        let q: Vec<f64> = model.capacity.iter().map(|c| density * c / rho_c).collect();
        let (dt, t0) = (0.05, 300.0);
        let t_old = vec![t0; n];
        let mut t = t_old.clone();
        let mut ws = model.thermal_workspace();
        model.thermal_step(&mut ws, &[], &t_old, &q, dt, &mut t).unwrap();
        let rise = density * dt / rho_c;
        for (i, &v) in t.iter().enumerate() {
            assert!((v - t0 - rise).abs() < 1e-9 * rise, "node {i}: {}", v - t0);
        }
    }

    /// Classical RK4 on `C dT/dt = -A εσ (T⁴ - T∞⁴)`.
    fn radiation_reference(t0: f64, ta: f64, k: f64, dt: f64) -> f64 {
        let f = |t: f64| -k * (t.powi(4) - ta.powi(4));
        let steps = 10_000;
        let h = dt / steps as f64;
        let mut t = t0;
        for _ in 0..steps {
            let k1 = f(t);
            let k2 = f(t + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h * k2);
            let k4 = f(t + h * k3);
            t += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t
    }

    #[test]
    fn radiation_only_cooling_matches_ode() {
        // one cell: every node sees the same capacity and surface, so T stays uniform
        let (h, rho_c) = (1e-3, 1e6);
        let model = insulating_block([2, 2, 2], h, rho_c, |c| {
            c.heat_transfer = 0.0;
            c.emissivity = 1.0;
        });
        let (t0, dt) = (600.0, 0.02);
        let k = STEFAN_BOLTZMANN * model.boundary_area[0] / model.capacity[0];
        let reference = radiation_reference(t0, 293.0, k, dt);
        let t_old = vec![t0; 8];
        let mut t = t_old.clone();
        let mut ws = model.thermal_workspace();
        model.thermal_step(&mut ws, &[], &t_old, &[0.0; 8], dt, &mut t).unwrap();
        let (got, want) = (t[0] - t0, reference - t0);
        assert!(want < -0.1);
        assert!(((got - want) / want).abs() < 0.01, "{got} vs {want}");
        assert!(t.iter().all(|&v| (v - t[0]).abs() < 1e-9));
    }

    #[test]
    fn linear_conduction_obeys_maximum_principle() {
        let model = insulating_block([5, 4, 3], 1e-3, 1.7e6, |c| {
            c.emissivity = 0.0;
            c.heat_transfer = 10.0;
        });
        let n = model.grid.num_nodes();
        let mut t_old: Vec<f64> = (0..n).map(|i| 293.0 + ((i * 37) % 11) as f64 * 9.0).collect();
        let (lo, hi) = (293.0, t_old.iter().cloned().fold(0.0, f64::max));
        let mut ws = model.thermal_workspace();
        for _ in 0..10 {
            let mut t = t_old.clone();
            model.thermal_step(&mut ws, &[], &t_old, &vec![0.0; n], 0.2, &mut t).unwrap();
            assert!(t.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
            t_old = t;
        }
    }

    #[test]
    fn newton_failure_reports_residual() {
        let model = insulating_block([2, 2, 2], 1e-3, 1e3, |c| {
            c.emissivity = 1.0;
            c.newton_max_iter = 1;
            c.newton_tol = 1e-14;
        });
        let t_old = vec![1500.0; 8];
        let mut t = t_old.clone();
        let mut ws = model.thermal_workspace();
        match model.thermal_step(&mut ws, &[], &t_old, &[0.0; 8], 10.0, &mut t) {
            Err(Error::Numerical(m)) => assert!(m.contains("relative residual")),
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(model.thermal_step(&mut ws, &[], &t_old, &[0.0; 8], 0.0, &mut t).is_err());
    }
}
