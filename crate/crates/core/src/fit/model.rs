//! Model definition (materials, regions, bondwires, pads, run settings) and
//! its validated, pre-assembled form.

use super::grid::CartesianGrid;
use super::sparse::{SkylineLdlt, SparseMatrix, SparsePattern, StampSlots};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;
pub const SCHEMA_VERSION: u32 = 1;
/// Materials must stay valid from ambient up to ambient plus this span (K).
pub const TEMPERATURE_SPAN: f64 = 600.0;

fn default_t_ref() -> f64 {
    293.0
}

/// `σ(T) = σ_ref / (1 + α_σ (T − T_ref))`, likewise for `λ`; `ρc` is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// S/m; zero marks an electric insulator.
    pub sigma_ref: f64,
    #[serde(default)]
    pub alpha_sigma: f64,
    /// W/(m·K).
    pub lambda_ref: f64,
    #[serde(default)]
    pub alpha_lambda: f64,
    /// J/(m³·K).
    pub rho_c: f64,
    #[serde(default = "default_t_ref")]
    pub t_ref: f64,
}

impl Material {
    #[inline]
    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma_ref / (1.0 + self.alpha_sigma * (t - self.t_ref))
    }

    #[inline]
    pub fn lambda(&self, t: f64) -> f64 {
        self.lambda_ref / (1.0 + self.alpha_lambda * (t - self.t_ref))
    }

    #[inline]
    pub fn dlambda(&self, t: f64) -> f64 {
        let den = 1.0 + self.alpha_lambda * (t - self.t_ref);
        -self.lambda_ref * self.alpha_lambda / (den * den)
    }

    pub fn is_conductor(&self) -> bool {
        self.sigma_ref > 0.0
    }

    fn validate(&self, t_lo: f64, t_hi: f64) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("material '{}': {what}", self.name)));
        if !(self.sigma_ref >= 0.0) || !self.sigma_ref.is_finite() {
            return bad("sigma_ref must be finite and non-negative");
        }
        if !(self.lambda_ref > 0.0) || !self.lambda_ref.is_finite() {
            return bad("lambda_ref must be positive");
        }
        if !(self.rho_c >= 0.0) || !self.rho_c.is_finite() {
            return bad("rho_c must be non-negative");
        }
        for t in [t_lo, t_hi] {
            if !(1.0 + self.alpha_sigma * (t - self.t_ref) > 0.0) || !(1.0 + self.alpha_lambda * (t - self.t_ref) > 0.0) {
                return bad(&format!("conductivity not positive at {t} K"));
            }
        }
        Ok(())
    }
}

/// Box of cells `min..=max` (cell indices) assigned one material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub material: String,
    pub cells_min: [usize; 3],
    pub cells_max: [usize; 3],
}

/// Lumped wire between grid nodes `a` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bondwire {
    pub a: [usize; 3],
    pub b: [usize; 3],
    /// Cross-section, m².
    pub area: f64,
    /// Straight-line length, m.
    pub min_length: f64,
    pub material: String,
}

/// Group of nodes held at one potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pad {
    pub name: String,
    pub voltage: f64,
    pub nodes: Vec<[usize; 3]>,
}

fn d_ambient() -> f64 {
    293.0
}
fn d_h() -> f64 {
    25.0
}
fn d_eps() -> f64 {
    0.5
}
fn d_end() -> f64 {
    3.5
}
fn d_steps() -> usize {
    51
}
fn d_newton_tol() -> f64 {
    1e-9
}
fn d_newton_iter() -> usize {
    50
}
fn d_coupling_tol() -> f64 {
    1e-8
}
fn d_coupling_iter() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtConfig {
    /// K.
    #[serde(default = "d_ambient")]
    pub ambient: f64,
    /// W/(m²·K).
    #[serde(default = "d_h")]
    pub heat_transfer: f64,
    #[serde(default = "d_eps")]
    pub emissivity: f64,
    /// s.
    #[serde(default = "d_end")]
    pub end_time: f64,
    #[serde(default = "d_steps")]
    pub steps: usize,
    /// Relative residual of the thermal Newton solve.
    #[serde(default = "d_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "d_newton_iter")]
    pub newton_max_iter: usize,
    /// Max change of any wire temperature (K) ending the electric/thermal iteration.
    #[serde(default = "d_coupling_tol")]
    pub coupling_tol: f64,
    #[serde(default = "d_coupling_iter")]
    pub coupling_max_iter: usize,
}

impl Default for EtConfig {
    fn default() -> Self {
        EtConfig {
            ambient: d_ambient(),
            heat_transfer: d_h(),
            emissivity: d_eps(),
            end_time: d_end(),
            steps: d_steps(),
            newton_tol: d_newton_tol(),
            newton_max_iter: d_newton_iter(),
            coupling_tol: d_coupling_tol(),
            coupling_max_iter: d_coupling_iter(),
        }
    }
}

impl EtConfig {
    pub fn dt(&self) -> f64 {
        self.end_time / self.steps as f64
    }

    fn validate(&self) -> Result<()> {
        let ok = self.ambient > 0.0
            && self.heat_transfer >= 0.0
            && (0.0..=1.0).contains(&self.emissivity)
            && self.end_time > 0.0
            && self.steps >= 1
            && self.newton_tol > 0.0
            && self.newton_max_iter >= 1
            && self.coupling_tol > 0.0
            && self.coupling_max_iter >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid run configuration {self:?}")))
        }
    }
}

/// Serializable model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDef {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub grid: CartesianGrid,
    pub materials: Vec<Material>,
    /// Material of every cell not covered by a region.
    pub background: String,
    /// Later regions override earlier ones.
    #[serde(default)]
    pub regions: Vec<Region>,
    pub wires: Vec<Bondwire>,
    pub pads: Vec<Pad>,
    #[serde(default)]
    pub config: EtConfig,
}

impl ModelDef {
    pub fn from_json(text: &str) -> Result<Self> {
        let def: ModelDef = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if def.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model schema version {} (expected {SCHEMA_VERSION})",
                def.schema_version
            )));
        }
        Ok(def)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// End point of an electric branch: an unknown or a pad potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Terminal {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct EdgeData {
    pub a: usize,
    pub b: usize,
    /// `(material, dual area / length)` per adjacent cell material.
    pub parts: Vec<(usize, f64)>,
}

impl EdgeData {
    pub fn conductance(&self, materials: &[Material], t: f64, electric: bool) -> f64 {
        self.parts
            .iter()
            .map(|&(m, f)| f * if electric { materials[m].sigma(t) } else { materials[m].lambda(t) })
            .sum()
    }

    pub fn dconductance(&self, materials: &[Material], t: f64) -> f64 {
        self.parts.iter().map(|&(m, f)| f * materials[m].dlambda(t)).sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct WireData {
    pub a: usize,
    pub b: usize,
    pub material: usize,
    pub area: f64,
    pub min_length: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ElectricBranch {
    /// Index into the edge or wire list.
    pub index: usize,
    pub a: Terminal,
    pub b: Terminal,
    pub slots: Option<StampSlots>,
}

pub(crate) struct ElectricStructure {
    pub unknown_nodes: Vec<usize>,
    pub pattern: Arc<SparsePattern>,
    pub edges: Vec<ElectricBranch>,
    pub wires: Vec<ElectricBranch>,
    /// Potential of every pad node.
    pub fixed: HashMap<usize, f64>,
    pub preconditioner: SkylineLdlt,
}

pub(crate) struct ThermalStructure {
    pub pattern: Arc<SparsePattern>,
    pub edge_slots: Vec<StampSlots>,
    pub wire_slots: Vec<StampSlots>,
}

/// Validated model with pre-assembled structure; immutable and shareable.
pub struct EtModel {
    pub def: ModelDef,
    pub grid: CartesianGrid,
    pub materials: Vec<Material>,
    pub cell_material: Vec<usize>,
    /// `Σ ρc V_cell / 8` over adjacent cells, J/K.
    pub capacity: Vec<f64>,
    /// Convective/radiating surface per node, m².
    pub boundary_area: Vec<f64>,
    pub(crate) edges: Vec<EdgeData>,
    pub(crate) wires: Vec<WireData>,
    pub(crate) electric: ElectricStructure,
    pub(crate) thermal: ThermalStructure,
    /// No thermal conductivity depends on temperature, so the Newton matrix is symmetric.
    pub(crate) symmetric_thermal: bool,
}

impl std::fmt::Debug for EtModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EtModel")
            .field("name", &self.def.name)
            .field("nodes", &self.grid.nodes)
            .field("wires", &self.wires.len())
            .finish()
    }
}

/// Elongation at which the electric preconditioner is assembled (mid support).
pub(crate) const REFERENCE_ELONGATION: f64 = 0.17;

impl EtModel {
    pub fn new(def: ModelDef) -> Result<Self> {
        let grid = CartesianGrid::new(def.grid.nodes, def.grid.spacing)?;
        def.config.validate()?;
        let t_lo = def.config.ambient;
        let t_hi = t_lo + TEMPERATURE_SPAN;
        let mut by_name = HashMap::new();
        for (k, m) in def.materials.iter().enumerate() {
            m.validate(t_lo, t_hi)?;
            if by_name.insert(m.name.clone(), k).is_some() {
                return Err(Error::Domain(format!("duplicate material '{}'", m.name)));
            }
        }
        let lookup = |name: &str| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| Error::Domain(format!("unknown material '{name}'")))
        };
        let mut cell_material = vec![lookup(&def.background)?; grid.num_cells()];
        let cells = grid.cells();
        for r in &def.regions {
            let m = lookup(&r.material)?;
            if (0..3).any(|k| r.cells_min[k] > r.cells_max[k] || r.cells_max[k] >= cells[k]) {
                return Err(Error::Domain(format!("region {r:?} outside the {cells:?} cells")));
            }
            for z in r.cells_min[2]..=r.cells_max[2] {
                for y in r.cells_min[1]..=r.cells_max[1] {
                    for x in r.cells_min[0]..=r.cells_max[0] {
                        cell_material[grid.cell(x, y, z)] = m;
                    }
                }
            }
        }
        let materials = def.materials.clone();
        for (c, &m) in cell_material.iter().enumerate() {
            if !(materials[m].rho_c > 0.0) {
                return Err(Error::Domain(format!(
                    "material '{}' fills cell {c} but has no heat capacity",
                    materials[m].name
                )));
            }
        }

        let mut capacity = vec![0.0; grid.num_nodes()];
        let v8 = grid.cell_volume() / 8.0;
        for (c, &m) in cell_material.iter().enumerate() {
            for n in grid.cell_nodes(c) {
                capacity[n] += materials[m].rho_c * v8;
            }
        }
        let edges: Vec<EdgeData> = grid
            .edges()
            .iter()
            .map(|e| {
                let f = grid.quarter_dual_area(e.axis) / e.length;
                let mut parts: Vec<(usize, f64)> = Vec::new();
                for c in grid.edge_cells(e) {
                    let m = cell_material[c];
                    match parts.iter_mut().find(|p| p.0 == m) {
                        Some(p) => p.1 += f,
                        None => parts.push((m, f)),
                    }
                }
                parts.sort_by_key(|p| p.0);
                EdgeData { a: e.a, b: e.b, parts }
            })
            .collect();

        let mut wires = Vec::with_capacity(def.wires.len());
        for (j, w) in def.wires.iter().enumerate() {
            let a = grid.node_checked(w.a)?;
            let b = grid.node_checked(w.b)?;
            if a == b {
                return Err(Error::Domain(format!("wire {j} connects node {a} to itself")));
            }
            if !(w.area > 0.0) || !(w.min_length > 0.0) {
                return Err(Error::Domain(format!("wire {j} needs positive area and length")));
            }
            let material = lookup(&w.material)?;
            if !materials[material].is_conductor() {
                return Err(Error::Domain(format!("wire {j} material is an insulator")));
            }
            wires.push(WireData { a, b, material, area: w.area, min_length: w.min_length });
        }

        let thermal_pairs: Vec<(usize, usize)> = edges
            .iter()
            .map(|e| (e.a, e.b))
            .chain(wires.iter().map(|w| (w.a, w.b)))
            .collect();
        let tp = Arc::new(SparsePattern::from_pairs(grid.num_nodes(), &thermal_pairs));
        let thermal = ThermalStructure {
            edge_slots: edges.iter().map(|e| StampSlots::new(&tp, e.a, e.b)).collect(),
            wire_slots: wires.iter().map(|w| StampSlots::new(&tp, w.a, w.b)).collect(),
            pattern: tp,
        };

        let electric = Self::electric_structure(&grid, &def, &materials, &edges, &wires)?;
        let symmetric_thermal = materials.iter().all(|m| m.alpha_lambda == 0.0);
        let mut model = EtModel {
            symmetric_thermal,
            boundary_area: grid.boundary_areas(),
            def,
            grid,
            materials,
            cell_material,
            capacity,
            edges,
            wires,
            electric,
            thermal,
        };
        let t = vec![model.def.config.ambient; model.grid.num_nodes()];
        let delta = vec![REFERENCE_ELONGATION; model.wires.len()];
        let reference = model.assemble_electric(&delta, &t)?;
        let mut pre = SkylineLdlt::symbolic(&model.electric.pattern);
        pre.factor(&reference.matrix).map_err(|e| match e {
            Error::Numerical(m) => Error::Numerical(format!("electric system is singular: {m}")),
            other => other,
        })?;
        model.electric.preconditioner = pre;
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(ModelDef::from_json(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::new(ModelDef::load(path)?)
    }

    pub fn num_wires(&self) -> usize {
        self.wires.len()
    }

    pub fn config(&self) -> &EtConfig {
        &self.def.config
    }

    /// Wire end nodes `(a, b)`.
    pub fn wire_nodes(&self, j: usize) -> (usize, usize) {
        (self.wires[j].a, self.wires[j].b)
    }

    /// Number of electric unknowns (conducting nodes minus pad nodes).
    pub fn electric_unknowns(&self) -> usize {
        self.electric.unknown_nodes.len()
    }

    fn electric_structure(
        grid: &CartesianGrid,
        def: &ModelDef,
        materials: &[Material],
        edges: &[EdgeData],
        wires: &[WireData],
    ) -> Result<ElectricStructure> {
        let n = grid.num_nodes();
        let mut fixed = HashMap::new();
        for p in &def.pads {
            if !p.voltage.is_finite() {
                return Err(Error::Domain(format!("pad '{}' has a non-finite voltage", p.name)));
            }
            for &at in &p.nodes {
                let node = grid.node_checked(at)?;
                if let Some(v) = fixed.insert(node, p.voltage) {
                    if v != p.voltage {
                        return Err(Error::Domain(format!("node {at:?} belongs to pads with different voltages")));
                    }
                }
            }
        }
        let conducting_edge: Vec<bool> = edges
            .iter()
            .map(|e| e.parts.iter().any(|&(m, _)| materials[m].is_conductor()))
            .collect();
        let mut active = vec![false; n];
        for (e, &c) in edges.iter().zip(&conducting_edge) {
            if c {
                active[e.a] = true;
                active[e.b] = true;
            }
        }
        for w in wires {
            active[w.a] = true;
            active[w.b] = true;
        }
        for &node in fixed.keys() {
            if !active[node] {
                return Err(Error::Domain(format!(
                    "pad node {:?} touches no conductor",
                    grid.node_coords(node)
                )));
            }
        }

        // every conducting component needs a pad, otherwise its potential floats
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let pairs = edges
            .iter()
            .zip(&conducting_edge)
            .filter(|(_, &c)| c)
            .map(|(e, _)| (e.a, e.b))
            .chain(wires.iter().map(|w| (w.a, w.b)));
        for (a, b) in pairs {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let mut grounded = vec![false; n];
        for &node in fixed.keys() {
            let r = find(&mut parent, node);
            grounded[r] = true;
        }
        for node in 0..n {
            if active[node] && !grounded[find(&mut parent, node)] {
                return Err(Error::Numerical(format!(
                    "singular electric system: node {:?} is in a conducting component without a pad (floating potential)",
                    grid.node_coords(node)
                )));
            }
        }

        let mut index = vec![usize::MAX; n];
        let mut unknown_nodes = Vec::new();
        for node in 0..n {
            if active[node] && !fixed.contains_key(&node) {
                index[node] = unknown_nodes.len();
                unknown_nodes.push(node);
            }
        }
        let terminal = |node: usize| match fixed.get(&node) {
            Some(&v) => Terminal::Fixed(v),
            None => Terminal::Free(index[node]),
        };
        let mut pairs = Vec::new();
        let mut branch = |k: usize, a: usize, b: usize| {
            let (ta, tb) = (terminal(a), terminal(b));
            if let (Terminal::Free(x), Terminal::Free(y)) = (ta, tb) {
                pairs.push((x, y));
            }
            ElectricBranch { index: k, a: ta, b: tb, slots: None }
        };
        let mut e_branches: Vec<ElectricBranch> = edges
            .iter()
            .enumerate()
            .filter(|(k, _)| conducting_edge[*k])
            .map(|(k, e)| branch(k, e.a, e.b))
            .collect();
        let mut w_branches: Vec<ElectricBranch> =
            wires.iter().enumerate().map(|(k, w)| branch(k, w.a, w.b)).collect();
        let pattern = Arc::new(SparsePattern::from_pairs(unknown_nodes.len(), &pairs));
        for br in e_branches.iter_mut().chain(w_branches.iter_mut()) {
            if let (Terminal::Free(x), Terminal::Free(y)) = (br.a, br.b) {
                br.slots = Some(StampSlots::new(&pattern, x, y));
            }
        }
        Ok(ElectricStructure {
            unknown_nodes,
            preconditioner: SkylineLdlt::symbolic(&pattern),
            pattern,
            edges: e_branches,
            wires: w_branches,
            fixed,
        })
    }

    pub(crate) fn electric_matrix(&self) -> SparseMatrix {
        SparseMatrix::zeros(self.electric.pattern.clone())
    }

    pub(crate) fn thermal_matrix(&self) -> SparseMatrix {
        SparseMatrix::zeros(self.thermal.pattern.clone())
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub fn material(name: &str, sigma: f64, lambda: f64, rho_c: f64) -> Material {
        Material {
            name: name.into(),
            sigma_ref: sigma,
            alpha_sigma: 0.0,
            lambda_ref: lambda,
            alpha_lambda: 0.0,
            rho_c,
            t_ref: 293.0,
        }
    }

    pub fn wire(a: [usize; 3], b: [usize; 3], material: &str) -> Bondwire {
        Bondwire { a, b, area: 7.85e-9, min_length: 1e-3, material: material.into() }
    }

    pub fn pad(voltage: f64, nodes: Vec<[usize; 3]>) -> Pad {
        Pad { name: format!("pad at {voltage} V"), voltage, nodes }
    }

    /// Nodes with the given coordinate fixed on one axis.
    pub fn face(nodes: [usize; 3], axis: usize, at: usize) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for z in 0..nodes[2] {
            for y in 0..nodes[1] {
                for x in 0..nodes[0] {
                    let p = [x, y, z];
                    if p[axis] == at {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// Box of one background material with the listed extra materials available.
    pub fn block(nodes: [usize; 3], h: f64, materials: Vec<Material>, wires: Vec<Bondwire>, pads: Vec<Pad>) -> ModelDef {
        ModelDef {
            schema_version: SCHEMA_VERSION,
            name: "test block".into(),
            grid: CartesianGrid { nodes, spacing: [h; 3] },
            background: materials[0].name.clone(),
            materials,
            regions: Vec::new(),
            wires,
            pads,
            config: EtConfig::default(),
        }
    }
}
