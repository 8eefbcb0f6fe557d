//! Stationary current problem and Joule heat sources.

use super::model::{EtModel, Material, Terminal};
use super::sparse::{pcg, SparseMatrix};
use crate::error::{Error, Result};

/// Relative residual demanded from every electric solve.
pub const ELECTRIC_RESIDUAL: f64 = 1e-10;

/// Total wire length `ℓ_min / (1 − δ)` for relative elongation `δ`.
pub fn total_length(min_length: f64, delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Domain(format!("relative elongation {delta} outside [0, 1)")));
    }
    Ok(min_length / (1.0 - delta))
}

/// Electric and thermal conductance (S, W/K) of a lumped wire at temperature `t_bw`.
pub fn bondwire_conductances(material: &Material, area: f64, min_length: f64, delta: f64, t_bw: f64) -> Result<(f64, f64)> {
    let len = total_length(min_length, delta)?;
    Ok((material.sigma(t_bw) * area / len, material.lambda(t_bw) * area / len))
}

/// Reduced system over the electric unknowns; pad potentials moved to the right-hand side.
#[derive(Debug, Clone)]
pub struct ElectricSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl EtModel {
    pub(crate) fn check_delta(&self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.wires.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} elongations for {} wires",
                delta.len(),
                self.wires.len()
            )));
        }
        for &d in delta {
            total_length(1.0, d)?;
        }
        Ok(())
    }

    /// Conductances `(G_el, G_th)` of wire `j` at the current temperatures.
    pub fn wire_conductances(&self, j: usize, delta: f64, t: &[f64]) -> Result<(f64, f64)> {
        let w = &self.wires[j];
        let t_bw = 0.5 * (t[w.a] + t[w.b]);
        bondwire_conductances(&self.materials[w.material], w.area, w.min_length, delta, t_bw)
    }

    /// Wire temperatures `T_bw,j = (T_a + T_b) / 2`.
    pub fn wire_temperatures(&self, t: &[f64]) -> Vec<f64> {
        self.wires.iter().map(|w| 0.5 * (t[w.a] + t[w.b])).collect()
    }

    /// Assembles conductances at temperatures `t` (one per grid node).
    pub fn assemble_electric(&self, delta: &[f64], t: &[f64]) -> Result<ElectricSystem> {
        self.check_delta(delta)?;
        if t.len() != self.grid.num_nodes() || t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("temperature field has wrong length or non-finite values".into()));
        }
        let mut matrix = self.electric_matrix();
        let mut rhs = vec![0.0; matrix.n()];
        let mut add = |m: &mut SparseMatrix, br: &super::model::ElectricBranch, g: f64| match (br.a, br.b) {
            (Terminal::Free(_), Terminal::Free(_)) => m.stamp(br.slots.as_ref().expect("free pair"), g),
            (Terminal::Free(x), Terminal::Fixed(v)) | (Terminal::Fixed(v), Terminal::Free(x)) => {
                m.add_diag(x, g);
                rhs[x] += g * v;
            }
            (Terminal::Fixed(_), Terminal::Fixed(_)) => {}
        };
        for br in &self.electric.edges {
            let e = &self.edges[br.index];
            let g = e.conductance(&self.materials, 0.5 * (t[e.a] + t[e.b]), true);
            add(&mut matrix, br, g);
        }
        for br in &self.electric.wires {
            let (g, _) = self.wire_conductances(br.index, delta[br.index], t)?;
            add(&mut matrix, br, g);
        }
        Ok(ElectricSystem { matrix, rhs })
    }

    /// Node potentials (zero on nodes outside the conductors).
    pub fn solve_electric(&self, sys: &ElectricSystem) -> Result<Vec<f64>> {
        let mut x = vec![0.0; sys.rhs.len()];
        self.solve_electric_from(sys, &mut x)?;
        Ok(self.expand_potential(&x))
    }

    /// PCG from the initial guess in `x` (electric unknowns only).
    pub(crate) fn solve_electric_from(&self, sys: &ElectricSystem, x: &mut [f64]) -> Result<usize> {
        let n = sys.rhs.len();
        if n == 0 {
            return Ok(0);
        }
        let stats = pcg(&sys.matrix, &self.electric.preconditioner, &sys.rhs, x, 1e-13, 20 * n.min(500) + 50)
            .or_else(|_| {
                // fall back to a fresh start when the warm start stalls
                x.iter_mut().for_each(|v| *v = 0.0);
                pcg(&sys.matrix, &self.electric.preconditioner, &sys.rhs, x, 1e-12, 100 * n + 100)
            })?;
        let mut r = vec![0.0; n];
        sys.matrix.matvec(x, &mut r);
        let res: f64 = r.iter().zip(&sys.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = sys.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res > ELECTRIC_RESIDUAL * bn {
            return Err(Error::Numerical(format!(
                "electric solve residual {:e} exceeds {ELECTRIC_RESIDUAL:e}",
                res / bn
            )));
        }
        Ok(stats.iterations)
    }

    pub(crate) fn expand_potential(&self, x: &[f64]) -> Vec<f64> {
        let mut phi = vec![0.0; self.grid.num_nodes()];
        for (&node, &v) in &self.electric.fixed {
            phi[node] = v;
        }
        for (k, &node) in self.electric.unknown_nodes.iter().enumerate() {
            phi[node] = x[k];
        }
        phi
    }

    /// Joule heat per node, W: bulk edge power and wire power, each split
    /// equally between the two end nodes.
    pub fn heat_sources(&self, delta: &[f64], phi: &[f64], t: &[f64]) -> Result<Vec<f64>> {
        self.check_delta(delta)?;
        let mut q = vec![0.0; self.grid.num_nodes()];
        for br in &self.electric.edges {
            let e = &self.edges[br.index];
            let g = e.conductance(&self.materials, 0.5 * (t[e.a] + t[e.b]), true);
            let p = 0.5 * g * (phi[e.a] - phi[e.b]).powi(2);
            q[e.a] += p;
            q[e.b] += p;
        }
        for (j, w) in self.wires.iter().enumerate() {
            let (g, _) = self.wire_conductances(j, delta[j], t)?;
            let p = 0.5 * g * (phi[w.a] - phi[w.b]).powi(2);
            q[w.a] += p;
            q[w.b] += p;
        }
        Ok(q)
    }

    /// Power dissipated in each wire, W.
    pub fn wire_powers(&self, delta: &[f64], phi: &[f64], t: &[f64]) -> Result<Vec<f64>> {
        self.check_delta(delta)?;
        (0..self.wires.len())
            .map(|j| {
                let w = &self.wires[j];
                Ok(self.wire_conductances(j, delta[j], t)?.0 * (phi[w.a] - phi[w.b]).powi(2))
            })
            .collect()
    }
}
