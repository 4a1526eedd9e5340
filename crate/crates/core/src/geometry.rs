//! Decoding of dimensionless genes into a physical bridge.
//!
//! Geometry genes (DV1-DV8) multiply reference dimensions derived from the
//! fixed parameters; sectional and control genes (DV9-DV21) multiply the
//! constant scales in [`SCALES`]. Lengths are in m, forces in kN, masses in
//! t.
//!
//! Longitudinal layout, left half (the right half is the mirror image about
//! `total_length / 2`):
//!
//! * central span `= DV1 * total_length / 2`, lateral spans close the total;
//! * lateral anchorages start at the abutment (anchor pier) and are spaced
//!   `DV2 * lateral / (n + 1)`;
//! * central anchorages: the first sits `DV3 * s` from the tower, the last
//!   `DV4 * s` from the symmetry axis, the rest evenly in between, with
//!   `s = (central / 2) / (n + 1)`;
//! * tower height above deck `= DV5 * central / 5`;
//! * tower anchorages are spread evenly over the top `min(2 * DV6, H / 2)`
//!   metres of the tower; the outermost cable of each side goes to the top.

use serde::{Deserialize, Serialize};

use crate::domain::{DesignVector, DomainTable};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub total_length: f64,
    pub deck_width: f64,
    pub tower_below_deck: f64,
}

impl Default for FixedParams {
    fn default() -> Self {
        Self {
            total_length: 220.0,
            deck_width: 4.0,
            tower_below_deck: 10.0,
        }
    }
}

impl FixedParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("total_length", self.total_length),
            ("deck_width", self.deck_width),
            ("tower_below_deck", self.tower_below_deck),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Physical value of one unit of each sectional / control gene.
///
/// | gene | quantity                         | scale        |
/// |------|----------------------------------|--------------|
/// | DV6  | tower cable spread               | 2 m          |
/// | DV9  | transversal link stiffness       | 100 kN/m     |
/// | DV10 | vertical link stiffness          | 100 kN/m     |
/// | DV11 | transversal link damping         | 0.1 kN s/m   |
/// | DV12 | vertical link damping            | 0.1 kN s/m   |
/// | DV13 | slab added mass                  | 0.25 t/m     |
/// | DV14 | deck steel area                  | 4e-4 m2      |
/// | DV15 | deck (triangular box) depth      | 1 m          |
/// | DV16 | tower leg depth, in plane        | 1 m          |
/// | DV17 | tower flange thickness           | 1 mm         |
/// | DV18 | tower web thickness              | 1 mm         |
/// | DV19 | tower leg width, transversal     | 0.15 m       |
/// | DV20 | cable prestress factor           | 1 (x dead-load balancing force) |
/// | DV21 | cable area                       | 2e-4 m2      |
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionScales {
    pub cable_spread: f64,
    pub link_stiffness: f64,
    pub link_damping: f64,
    pub slab_mass: f64,
    pub deck_area: f64,
    pub deck_depth: f64,
    pub tower_depth: f64,
    pub tower_flange: f64,
    pub tower_web: f64,
    pub tower_width: f64,
    pub cable_area: f64,
}

pub const SCALES: SectionScales = SectionScales {
    cable_spread: 2.0,
    link_stiffness: 100.0,
    link_damping: 0.1,
    slab_mass: 0.25,
    deck_area: 3e-4,
    deck_depth: 1.0,
    tower_depth: 1.0,
    tower_flange: 5e-4,
    tower_web: 5e-4,
    tower_width: 0.15,
    cable_area: 2e-4,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lateral,
    Central,
}

/// One stay cable, from a deck anchorage to a tower anchorage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cable {
    /// 0 = left tower, 1 = right tower.
    pub tower: usize,
    pub side: Side,
    pub deck_x: f64,
    /// Height of the tower anchorage above the deck.
    pub tower_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeckSection {
    pub area: f64,
    pub depth: f64,
    pub inertia: f64,
    /// Distance from the centroid to the extreme fibre.
    pub extreme_fibre: f64,
}

impl DeckSection {
    /// Thin-walled triangular box: `I = A h^2 / 6`, centroid at `h / 3`.
    pub fn triangular(area: f64, depth: f64) -> Self {
        Self {
            area,
            depth,
            inertia: area * depth * depth / 6.0,
            extreme_fibre: 2.0 * depth / 3.0,
        }
    }
}

/// Rectangular hollow section of one tower leg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerSection {
    /// Outer depth in the plane of the model.
    pub depth: f64,
    /// Outer width, transversal.
    pub width: f64,
    pub flange: f64,
    pub web: f64,
}

impl TowerSection {
    pub fn area(&self) -> f64 {
        let inner_w = self.width - 2.0 * self.web;
        let inner_d = self.depth - 2.0 * self.flange;
        self.width * self.depth - inner_w * inner_d
    }

    /// Second moment of area for in-plane bending.
    pub fn inertia(&self) -> f64 {
        let inner_w = self.width - 2.0 * self.web;
        let inner_d = self.depth - 2.0 * self.flange;
        (self.width * self.depth.powi(3) - inner_w * inner_d.powi(3)) / 12.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerDeckLink {
    /// kN/m
    pub stiffness_transversal: f64,
    /// kN/m
    pub stiffness_vertical: f64,
    /// kN s/m
    pub damping_transversal: f64,
    /// kN s/m
    pub damping_vertical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeGeometry {
    pub fixed: FixedParams,
    /// Cables per half-span (per tower side).
    pub cable_count: usize,
    pub central_span: f64,
    pub lateral_span: f64,
    pub tower_x: [f64; 2],
    pub tower_height: f64,
    /// Effective vertical extent of the tower anchorages.
    pub cable_spread: f64,
    pub tower_top_spacing: f64,
    pub tower_base_spacing: f64,
    /// All stays; `4 * cable_count` entries.
    pub cables: Vec<Cable>,
    pub deck: DeckSection,
    /// Added slab mass, t/m.
    pub slab_mass: f64,
    pub tower: TowerSection,
    pub cable_area: f64,
    pub prestress_factor: f64,
    pub link: TowerDeckLink,
}

impl BridgeGeometry {
    /// Deck anchorage abscissae, sorted and deduplicated.
    pub fn anchorages(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.cables.iter().map(|c| c.deck_x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    /// Length of one tower leg, base to top, including its transversal lean.
    pub fn tower_leg_length(&self) -> f64 {
        let h = self.tower_height + self.fixed.tower_below_deck;
        let lean = 0.5 * (self.tower_base_spacing - self.tower_top_spacing);
        (h * h + lean * lean).sqrt()
    }

    pub fn cable_length(&self, c: &Cable) -> f64 {
        let dx = self.tower_x[c.tower] - c.deck_x;
        (dx * dx + c.tower_z * c.tower_z).sqrt()
    }

    fn check(&self) -> Result<()> {
        let total = 2.0 * self.lateral_span + self.central_span;
        if total != self.fixed.total_length {
            return Err(Error::InvalidGeometry(format!(
                "spans sum to {total}, expected {}",
                self.fixed.total_length
            )));
        }
        if !(3..=7).contains(&self.cable_count) {
            return Err(Error::InvalidGeometry(format!(
                "cable count {} outside 3..=7",
                self.cable_count
            )));
        }
        // Left half: lateral anchorages < tower < central anchorages < axis.
        let half = 0.5 * self.fixed.total_length;
        let mut left: Vec<f64> = self
            .cables
            .iter()
            .filter(|c| c.tower == 0)
            .map(|c| c.deck_x)
            .collect();
        left.sort_by(f64::total_cmp);
        let n = self.cable_count;
        let (lat, cen) = left.split_at(n);
        let ordered = lat.windows(2).all(|w| w[0] < w[1])
            && cen.windows(2).all(|w| w[0] < w[1])
            && lat[0] >= 0.0
            && lat[n - 1] < self.tower_x[0]
            && cen[0] > self.tower_x[0]
            && cen[n - 1] < half;
        if !ordered {
            return Err(Error::InvalidGeometry(format!(
                "anchorage ordering violated: lateral {lat:?}, central {cen:?}"
            )));
        }
        if self
            .cables
            .iter()
            .any(|c| !(c.tower_z > 0.0 && c.tower_z <= self.tower_height))
        {
            return Err(Error::InvalidGeometry("tower anchorage outside the tower".into()));
        }
        Ok(())
    }
}

/// Round-half-up quantization of gene 0.
pub fn cable_count(gene: f64) -> usize {
    ((gene + 0.5).floor() as i64).clamp(3, 7) as usize
}

pub fn decode(v: &DesignVector, domains: &DomainTable, fixed: &FixedParams) -> Result<BridgeGeometry> {
    let bad = domains.violations(v.as_slice());
    if !bad.is_empty() {
        let msg: Vec<String> = bad.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidGenome(msg.join("; ")));
    }
    fixed.validate()?;

    let s = &SCALES;
    let n = cable_count(v[0]);
    let nf = n as f64;
    let total = fixed.total_length;

    let central_span = v[1] * 0.5 * total;
    let lateral_span = (total - central_span) * 0.5;
    let tower_x = [lateral_span, total - lateral_span];

    let tower_height = v[5] * central_span / 5.0;
    let cable_spread = (v[6] * s.cable_spread).min(0.5 * tower_height);
    // Anchorage heights, top first.
    let heights: Vec<f64> = (0..n)
        .map(|j| tower_height - cable_spread * j as f64 / (nf - 1.0))
        .collect();

    let lateral_spacing = v[2] * lateral_span / (nf + 1.0);
    let half_central = 0.5 * central_span;
    let central_ref = half_central / (nf + 1.0);
    let first = v[3] * central_ref;
    let last = half_central - v[4] * central_ref;
    let central_step = (last - first) / (nf - 1.0);

    let mut cables = Vec::with_capacity(4 * n);
    for j in 0..n {
        // j = 0 is the outermost anchorage on each side and takes the top.
        let lat_x = j as f64 * lateral_spacing;
        let cen_x = tower_x[0] + last - j as f64 * central_step;
        let z = heights[j];
        for (tower, side, x) in [
            (0, Side::Lateral, lat_x),
            (0, Side::Central, cen_x),
            (1, Side::Lateral, total - lat_x),
            (1, Side::Central, total - cen_x),
        ] {
            cables.push(Cable {
                tower,
                side,
                deck_x: x,
                tower_z: z,
            });
        }
    }

    let geometry = BridgeGeometry {
        fixed: *fixed,
        cable_count: n,
        central_span,
        lateral_span,
        tower_x,
        tower_height,
        cable_spread,
        tower_top_spacing: v[7] * fixed.deck_width,
        tower_base_spacing: v[8] * fixed.deck_width,
        cables,
        deck: DeckSection::triangular(v[14] * s.deck_area, v[15] * s.deck_depth),
        slab_mass: v[13] * s.slab_mass,
        tower: TowerSection {
            depth: v[16] * s.tower_depth,
            width: v[19] * s.tower_width,
            flange: v[17] * s.tower_flange,
            web: v[18] * s.tower_web,
        },
        cable_area: v[21] * s.cable_area,
        prestress_factor: v[20],
        link: TowerDeckLink {
            stiffness_transversal: v[9] * s.link_stiffness,
            stiffness_vertical: v[10] * s.link_stiffness,
            damping_transversal: v[11] * s.link_damping,
            damping_vertical: v[12] * s.link_damping,
        },
    };
    geometry.check()?;
    Ok(geometry)
}
