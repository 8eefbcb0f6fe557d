//! Built-in desk-scale package: a silicon die on an epoxy board with gold
//! bondwires from the die edge to pads on the board.
//!
//! The board spans 10 mm × 10 mm × 1 mm, the die 4 mm × 4 mm in the top
//! cell layer at the centre. Every wire runs from a die-edge node on the top
//! surface to a pad node 1 mm further out; the die bottom is grounded.

use super::grid::CartesianGrid;
use super::model::{Bondwire, EtConfig, Material, ModelDef, Pad, Region, SCHEMA_VERSION};

/// Cross-section of a 50 µm gold wire, m².
pub const WIRE_AREA: f64 = 7.85e-9;
pub const WIRE_MIN_LENGTH: f64 = 1e-3;

/// Pad voltage of every wire in the shipped desk model, V.
///
/// Wire 1 (south side, middle) is driven hardest so that it alone carries
/// the peak temperature across the elongation support.
pub const DESK_VOLTAGES: [f64; 12] = [
    0.0400, 0.0480, 0.0400, 0.0396, 0.0404, 0.0392, 0.0400, 0.0396, 0.0392, 0.0388, 0.0396, 0.0384,
];

/// Resolution of the desk geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeskResolution {
    /// Cells per millimetre in the board plane.
    pub cells_per_mm: usize,
    /// Node layers through the board thickness.
    pub layers: usize,
}

impl Default for DeskResolution {
    fn default() -> Self {
        DeskResolution { cells_per_mm: 1, layers: 3 }
    }
}

pub fn epoxy() -> Material {
    Material {
        name: "epoxy".into(),
        sigma_ref: 0.0,
        alpha_sigma: 0.0,
        lambda_ref: 0.3,
        alpha_lambda: 0.0,
        rho_c: 1.7e6,
        t_ref: 293.0,
    }
}

pub fn silicon() -> Material {
    Material {
        name: "silicon".into(),
        sigma_ref: 1e6,
        alpha_sigma: 0.0,
        lambda_ref: 148.0,
        alpha_lambda: 0.0,
        rho_c: 1.63e6,
        t_ref: 293.0,
    }
}

pub fn gold() -> Material {
    Material {
        name: "gold".into(),
        sigma_ref: 4.1e7,
        alpha_sigma: 3.7e-3,
        lambda_ref: 315.0,
        alpha_lambda: 0.0,
        rho_c: 2.49e6,
        t_ref: 293.0,
    }
}

/// Wire end points for the given sides (0 south, 1 east, 2 north, 3 west)
/// and offsets along each side in millimetres from the side centre.
fn wire_layout(k: usize, layers: usize, sides: &[usize], offsets_mm: &[i64]) -> Vec<([usize; 3], [usize; 3])> {
    let n = 10 * k + 1;
    let mid = (n / 2) as i64;
    let half = 2 * k as i64;
    let reach = k as i64;
    let top = layers - 1;
    let mut out = Vec::new();
    for &side in sides {
        for &o in offsets_mm {
            let along = mid + o * k as i64;
            let (chip, pad) = match side {
                0 => ([along, mid - half], [along, mid - half - reach]),
                1 => ([mid + half, along], [mid + half + reach, along]),
                2 => ([mid - o * k as i64, mid + half], [mid - o * k as i64, mid + half + reach]),
                _ => ([mid - half, mid - o * k as i64], [mid - half - reach, mid - o * k as i64]),
            };
            out.push((
                [chip[0] as usize, chip[1] as usize, top],
                [pad[0] as usize, pad[1] as usize, top],
            ));
        }
    }
    out
}

fn package(res: DeskResolution, ends: Vec<([usize; 3], [usize; 3])>, voltages: &[f64], name: &str) -> ModelDef {
    let k = res.cells_per_mm.max(1);
    let layers = res.layers.max(2);
    let n = 10 * k + 1;
    let grid = CartesianGrid {
        nodes: [n, n, layers],
        spacing: [1e-3 / k as f64, 1e-3 / k as f64, 1e-3 / (layers - 1) as f64],
    };
    let lo = 3 * k;
    let hi = 7 * k - 1;
    let die_layer = layers - 2;
    let ground: Vec<[usize; 3]> = (lo..=hi + 1)
        .flat_map(|y| (lo..=hi + 1).map(move |x| [x, y, die_layer]))
        .collect();
    let mut pads = vec![Pad { name: "ground".into(), voltage: 0.0, nodes: ground }];
    let mut wires = Vec::new();
    for (j, ((a, b), &v)) in ends.into_iter().zip(voltages).enumerate() {
        wires.push(Bondwire { a, b, area: WIRE_AREA, min_length: WIRE_MIN_LENGTH, material: "gold".into() });
        pads.push(Pad { name: format!("pad{j}"), voltage: v, nodes: vec![b] });
    }
    ModelDef {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        grid,
        materials: vec![epoxy(), silicon(), gold()],
        background: "epoxy".into(),
        regions: vec![Region {
            material: "silicon".into(),
            cells_min: [lo, lo, die_layer],
            cells_max: [hi, hi, die_layer],
        }],
        wires,
        pads,
        config: EtConfig::default(),
    }
}

/// Twelve wires, three per die side, driven by `voltages`.
pub fn desk_model_def(res: DeskResolution, voltages: &[f64; 12]) -> ModelDef {
    let k = res.cells_per_mm.max(1);
    let ends = wire_layout(k, res.layers.max(2), &[0, 1, 2, 3], &[-1, 0, 1]);
    package(res, ends, voltages, "desk package, 12 wires")
}

/// The shipped desk model.
pub fn default_desk_def() -> ModelDef {
    desk_model_def(DeskResolution::default(), &DESK_VOLTAGES)
}

/// Four wires, one per side centre, all at `voltage`; invariant under
/// quarter turns about the die axis.
pub fn symmetric_model_def(res: DeskResolution, voltage: f64) -> ModelDef {
    let k = res.cells_per_mm.max(1);
    let ends = wire_layout(k, res.layers.max(2), &[0, 1, 2, 3], &[0]);
    package(res, ends, &[voltage; 4], "symmetric package, 4 wires")
}
