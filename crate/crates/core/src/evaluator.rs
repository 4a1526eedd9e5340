//! Surrogate structural evaluator: cost `C(x)` and the largest normalised
//! constraint `S(x)` of a design.
//!
//! The bridge is idealised as a planar frame in elevation:
//!
//! * the deck is a steel beam pinned at both abutments, one beam element per
//!   cable bay, with results recovered at ten sub-elements per bay (exact for
//!   Euler-Bernoulli elements under uniform load, so identical to a mesh with
//!   ten elements per bay);
//! * each tower is a cantilever column fixed `tower_below_deck` under the
//!   deck, with both legs lumped into one section;
//! * stays are tension-only bars carrying an initial tension;
//! * the deck rests on each tower through a vertical spring (DV10).
//!
//! Load cases: `Dead` (self-weight, slab, prestress), `Live` (dead plus the
//! live load over the full deck) and `Comfort` (unit load over the central
//! span on the dead-state cable set, whose compliance gives the stiffness
//! of a single-mode model of the vertical response).
//!
//! Constraint ratios, each demand over capacity:
//!
//! * `deck_stress`, `tower_stress`: `|N|/A + |M| c / I` over `fy / gamma`,
//!   worst of dead and live;
//! * `cable_stress`: largest cable stress over the cable allowable;
//! * `deck_deflection`: largest live-load increment of deflection over
//!   `central_span / 400`;
//! * `cable_slack`: per cable `max(0, 2 - N / (f P0))` with `f` the slack
//!   fraction and `P0` the prestress, worst over cables and cases. It is 0
//!   once a cable keeps twice its minimum tension, exactly 1 at the minimum
//!   and 2 for a slack (released) cable;
//! * `comfort_acceleration`: resonant vertical acceleration over its limit.
//!   The pedestrian load is fully resonant up to `resonance_full_below` and
//!   tapers linearly to zero at `resonance_none_above`; the damping ratio is
//!   structural damping plus the vertical dampers (DV12) expressed as a ratio
//!   at the pacing frequency.

use serde::{Deserialize, Serialize};

use crate::domain::{DesignVector, DomainTable};
use crate::error::{Error, Result};
use crate::fe::{self, Analysis, Dof, FrameModel, Loads, Node};
use crate::geometry::{decode, BridgeGeometry, FixedParams, Side};
use crate::materials::MaterialConfig;

/// Sub-elements per deck bay for result recovery.
pub const STATIONS_PER_BAY: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadCase {
    Dead,
    Live,
    Comfort,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub deck_steel: f64,
    pub slab_concrete: f64,
    pub tower_steel: f64,
    pub cable_steel: f64,
    pub link_devices: f64,
}

impl CostBreakdown {
    /// Total cost, kEUR.
    pub fn total(&self) -> f64 {
        self.deck_steel + self.slab_concrete + self.tower_steel + self.cable_steel + self.link_devices
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRatios {
    pub deck_stress: f64,
    pub tower_stress: f64,
    pub cable_stress: f64,
    pub deck_deflection: f64,
    pub cable_slack: f64,
    /// `None` when the comfort check is disabled.
    pub comfort_acceleration: Option<f64>,
}

impl ConstraintRatios {
    pub fn all_infinite(comfort: bool) -> Self {
        Self {
            deck_stress: f64::INFINITY,
            tower_stress: f64::INFINITY,
            cable_stress: f64::INFINITY,
            deck_deflection: f64::INFINITY,
            cable_slack: f64::INFINITY,
            comfort_acceleration: comfort.then_some(f64::INFINITY),
        }
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("deck_stress", self.deck_stress),
            ("tower_stress", self.tower_stress),
            ("cable_stress", self.cable_stress),
            ("deck_deflection", self.deck_deflection),
            ("cable_slack", self.cable_slack),
        ];
        if let Some(a) = self.comfort_acceleration {
            v.push(("comfort_acceleration", a));
        }
        v
    }

    pub fn max(&self) -> f64 {
        self.named().into_iter().map(|(_, r)| r).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    /// kEUR
    pub cost: f64,
    pub cost_breakdown: CostBreakdown,
    pub constraint_ratios: ConstraintRatios,
    pub s_max: f64,
    pub feasible: bool,
    /// Set when the static solve failed; `s_max` is then `+inf`.
    pub analysis_failed: bool,
}

/// Planar model of one design plus the bookkeeping needed to apply the load
/// cases and read results back.
#[derive(Clone, Debug)]
pub struct StructuralModel {
    pub frame: FrameModel,
    /// Deck elements left to right.
    pub deck_elements: Vec<usize>,
    pub deck_in_central_span: Vec<bool>,
    pub tower_elements: Vec<usize>,
    /// Indices into `frame.supports` of the vertical abutment supports.
    pub abutment_vertical_supports: [usize; 2],
    pub deck_dead_load: f64,
    pub deck_live_load: f64,
    pub tower_dead_load: f64,
    /// t/m, steel plus slab.
    pub deck_mass: f64,
    pub deck_area: f64,
    pub deck_inertia: f64,
    pub deck_extreme_fibre: f64,
    pub tower_area: f64,
    pub tower_inertia: f64,
    pub tower_extreme_fibre: f64,
    pub cable_area: f64,
    pub central_span: f64,
    pub deck_width: f64,
    /// Total vertical damping of the tower-deck links, kN s/m.
    pub link_damping_vertical: f64,
}

/// Deck results at one recovery station.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeckStation {
    pub x: f64,
    pub deflection: f64,
    pub axial: f64,
    pub moment: f64,
}

#[derive(Clone, Debug)]
pub struct CaseResponse {
    pub case: LoadCase,
    pub analysis: Analysis,
    /// `(STATIONS_PER_BAY + 1)` stations per deck element, in element order.
    pub stations: Vec<DeckStation>,
    pub deck_stress: f64,
    pub tower_stress: f64,
}

impl CaseResponse {
    pub fn cable_forces(&self) -> &[f64] {
        &self.analysis.solution.cable_forces
    }

    pub fn residual(&self) -> f64 {
        self.analysis.solution.residual
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComfortResponse {
    pub frequency: f64,
    pub modal_mass: f64,
    pub modal_force: f64,
    pub damping_ratio: f64,
    pub resonance_factor: f64,
    pub acceleration: f64,
}

fn steel_line_weight(area: f64, m: &MaterialConfig) -> f64 {
    area * m.steel_density * m.gravity / 1000.0
}

/// Dead load on the deck, kN/m.
fn deck_dead_load(g: &BridgeGeometry, m: &MaterialConfig) -> f64 {
    steel_line_weight(g.deck.area, m) + g.slab_mass * m.gravity
}

/// Initial cable tensions, in `g.cables` order.
///
/// A central-span stay is tensioned to `DV20` times the force that carries
/// its tributary deck dead load; its lateral partner on the same tower
/// anchorage balances the horizontal component.
pub fn prestress_forces(g: &BridgeGeometry, m: &MaterialConfig) -> Vec<f64> {
    let w = deck_dead_load(g, m);
    let key = deck_key_points(g);
    let tributary = |x: f64| {
        let k = key.partition_point(|&p| p < x);
        let left = if k > 0 { key[k - 1] } else { x };
        let right = key.get(k + 1).copied().unwrap_or(x);
        0.5 * (right - left)
    };
    let central_force = |tower: usize, z: f64| {
        let c = g
            .cables
            .iter()
            .find(|c| c.tower == tower && c.side == Side::Central && c.tower_z == z)
            .expect("every tower anchorage has a central stay");
        let len = g.cable_length(c);
        let force = g.prestress_factor * w * tributary(c.deck_x) * len / c.tower_z;
        let cos = (g.tower_x[tower] - c.deck_x).abs() / len;
        (force, cos)
    };
    g.cables
        .iter()
        .map(|c| {
            let (force, cos) = central_force(c.tower, c.tower_z);
            match c.side {
                Side::Central => force,
                Side::Lateral => {
                    let own_cos = (g.tower_x[c.tower] - c.deck_x).abs() / g.cable_length(c);
                    force * cos / own_cos
                }
            }
        })
        .collect()
}

/// Abutments, anchorages, towers and the symmetry axis, sorted.
fn deck_key_points(g: &BridgeGeometry) -> Vec<f64> {
    let total = g.fixed.total_length;
    let mut xs = g.anchorages();
    xs.extend([0.0, total, g.tower_x[0], g.tower_x[1], 0.5 * total]);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

impl StructuralModel {
    pub fn build(g: &BridgeGeometry, m: &MaterialConfig) -> Result<Self> {
        let key = deck_key_points(g);
        let mut frame = FrameModel::default();
        frame.nodes = key.iter().map(|&x| Node { x, z: 0.0 }).collect();
        let deck_node = |x: f64| -> usize {
            key.binary_search_by(|p| p.total_cmp(&x))
                .expect("anchorage is a deck key point")
        };

        let deck_area = g.deck.area;
        let deck_inertia = g.deck.inertia;
        let mut deck_elements = Vec::with_capacity(key.len() - 1);
        let mut deck_in_central_span = Vec::with_capacity(key.len() - 1);
        for k in 0..key.len() - 1 {
            deck_elements.push(frame.frames.len());
            let mid = 0.5 * (key[k] + key[k + 1]);
            deck_in_central_span.push(mid > g.tower_x[0] && mid < g.tower_x[1]);
            frame.frames.push(fe::Frame {
                i: k,
                j: k + 1,
                modulus: m.steel_modulus,
                area: deck_area,
                inertia: deck_inertia,
            });
        }
        let last = key.len() - 1;
        frame.supports.extend([(0, Dof::U), (0, Dof::W), (last, Dof::U), (last, Dof::W)]);
        let abutment_vertical_supports = [1, 3];

        let tower_area = 2.0 * g.tower.area();
        let tower_inertia = 2.0 * g.tower.inertia();
        let mut heights: Vec<f64> = g.cables.iter().map(|c| c.tower_z).collect();
        heights.sort_by(f64::total_cmp);
        heights.dedup();

        let mut tower_elements = Vec::new();
        let mut tower_anchor_nodes = [Vec::new(), Vec::new()];
        for (t, &xt) in g.tower_x.iter().enumerate() {
            let base = frame.nodes.len();
            frame.nodes.push(Node {
                x: xt,
                z: -g.fixed.tower_below_deck,
            });
            frame.nodes.push(Node { x: xt, z: 0.0 });
            for &z in &heights {
                tower_anchor_nodes[t].push(frame.nodes.len());
                frame.nodes.push(Node { x: xt, z });
            }
            for n in base..frame.nodes.len() - 1 {
                tower_elements.push(frame.frames.len());
                frame.frames.push(fe::Frame {
                    i: n,
                    j: n + 1,
                    modulus: m.steel_modulus,
                    area: tower_area,
                    inertia: tower_inertia,
                });
            }
            frame.supports.extend([(base, Dof::U), (base, Dof::W), (base, Dof::R)]);
            frame.springs.push(fe::Spring {
                node: deck_node(xt),
                other: Some(base + 1),
                dof: Dof::W,
                stiffness: g.link.stiffness_vertical,
            });
        }

        let prestress = prestress_forces(g, m);
        for (c, &p) in g.cables.iter().zip(&prestress) {
            let level = heights
                .binary_search_by(|h| h.total_cmp(&c.tower_z))
                .expect("anchorage height is a tower node");
            frame.cables.push(fe::Cable {
                i: deck_node(c.deck_x),
                j: tower_anchor_nodes[c.tower][level],
                modulus: m.cable_modulus,
                area: g.cable_area,
                prestress: p,
            });
        }

        let leg_ratio = g.tower_leg_length() / (g.tower_height + g.fixed.tower_below_deck);
        Ok(Self {
            frame,
            deck_elements,
            deck_in_central_span,
            tower_elements,
            abutment_vertical_supports,
            deck_dead_load: deck_dead_load(g, m),
            deck_live_load: m.live_load * g.fixed.deck_width,
            tower_dead_load: steel_line_weight(tower_area, m) * leg_ratio,
            deck_mass: g.deck.area * m.steel_density / 1000.0 + g.slab_mass,
            deck_area,
            deck_inertia,
            deck_extreme_fibre: g.deck.extreme_fibre,
            tower_area,
            tower_inertia,
            tower_extreme_fibre: 0.5 * g.tower.depth,
            cable_area: g.cable_area,
            central_span: g.central_span,
            deck_width: g.fixed.deck_width,
            link_damping_vertical: 2.0 * g.link.damping_vertical,
        })
    }

    /// Distributed load `[px, pz]` on every frame for a load case.
    pub fn frame_loads(&self, case: LoadCase) -> Vec<[f64; 2]> {
        let mut udl = vec![[0.0, 0.0]; self.frame.frames.len()];
        match case {
            LoadCase::Dead | LoadCase::Live => {
                let deck = match case {
                    LoadCase::Live => self.deck_dead_load + self.deck_live_load,
                    _ => self.deck_dead_load,
                };
                for &e in &self.deck_elements {
                    udl[e] = [0.0, -deck];
                }
                for &e in &self.tower_elements {
                    udl[e] = [0.0, -self.tower_dead_load];
                }
            }
            LoadCase::Comfort => {
                for (&e, &central) in self.deck_elements.iter().zip(&self.deck_in_central_span) {
                    if central {
                        udl[e] = [0.0, -1.0];
                    }
                }
            }
        }
        udl
    }

    fn loads(&self, case: LoadCase, udl: &[[f64; 2]]) -> Loads {
        Loads {
            nodal: Vec::new(),
            frame_udl: udl
                .iter()
                .enumerate()
                .filter(|(_, p)| p[0] != 0.0 || p[1] != 0.0)
                .map(|(e, &p)| (e, p))
                .collect(),
            prestress: case != LoadCase::Comfort,
        }
    }

    /// Static analysis of one load case. `initial` fixes the starting set of
    /// active cables (the comfort case runs on the dead-state set).
    pub fn analyze(&self, case: LoadCase, initial: Option<&[bool]>) -> Result<CaseResponse> {
        let udl = self.frame_loads(case);
        let analysis = self.frame.analyze(&self.loads(case, &udl), initial)?;
        let sol = &analysis.solution;

        let mut stations = Vec::with_capacity(self.deck_elements.len() * (STATIONS_PER_BAY + 1));
        let mut deck_stress: f64 = 0.0;
        for &e in &self.deck_elements {
            let ff = self.frame.frame_end_forces(e, sol, udl[e]);
            let x0 = self.frame.nodes[self.frame.frames[e].i].x;
            for k in 0..=STATIONS_PER_BAY {
                let s = ff.length * k as f64 / STATIONS_PER_BAY as f64;
                let st = DeckStation {
                    x: x0 + s,
                    deflection: ff.transverse_displacement(s),
                    axial: ff.axial(s),
                    moment: ff.moment(s),
                };
                deck_stress = deck_stress.max(
                    st.axial.abs() / self.deck_area
                        + st.moment.abs() * self.deck_extreme_fibre / self.deck_inertia,
                );
                stations.push(st);
            }
        }
        let mut tower_stress: f64 = 0.0;
        for &e in &self.tower_elements {
            let ff = self.frame.frame_end_forces(e, sol, udl[e]);
            for s in [0.0, ff.length] {
                tower_stress = tower_stress.max(
                    ff.axial(s).abs() / self.tower_area
                        + ff.moment(s).abs() * self.tower_extreme_fibre / self.tower_inertia,
                );
            }
        }
        Ok(CaseResponse {
            case,
            analysis,
            stations,
            deck_stress,
            tower_stress,
        })
    }

    /// Vertical abutment reactions `[left, right]`.
    pub fn abutment_reactions(&self, response: &CaseResponse) -> [f64; 2] {
        let r = &response.analysis.solution.reactions;
        [
            r[self.abutment_vertical_supports[0]],
            r[self.abutment_vertical_supports[1]],
        ]
    }

    /// Single-mode comfort estimate for a half sine over the central span.
    ///
    /// With `phi` that shape at unit amplitude, the unit comfort load has
    /// generalised force `F1 = 2 L / pi` and the generalised stiffness
    /// follows from the compliance of the comfort case,
    /// `k* = F1^2 / (p . u)`; the generalised mass is `m L / 2`. Extra
    /// stiffness anywhere lowers the compliance, so the frequency never
    /// drops when a member or link is stiffened.
    pub fn comfort(&self, response: &CaseResponse, m: &MaterialConfig) -> ComfortResponse {
        let per = STATIONS_PER_BAY + 1;
        let mut compliance = 0.0;
        for (k, &central) in self.deck_in_central_span.iter().enumerate() {
            if !central {
                continue;
            }
            let st = &response.stations[k * per..(k + 1) * per];
            let h = (st[per - 1].x - st[0].x) / STATIONS_PER_BAY as f64;
            let mut acc = -(st[0].deflection + st[per - 1].deflection);
            for (i, s) in st.iter().enumerate().take(per - 1).skip(1) {
                acc -= if i % 2 == 1 { 4.0 } else { 2.0 } * s.deflection;
            }
            compliance += acc * h / 3.0;
        }
        let pi = std::f64::consts::PI;
        let unit_force = 2.0 * self.central_span / pi;
        let stiffness = unit_force * unit_force / compliance;
        let modal_mass = 0.5 * self.deck_mass * self.central_span;
        let frequency = (stiffness / modal_mass).sqrt() / (2.0 * pi);
        let modal_force = m.pedestrian_load * self.deck_width * unit_force;
        let pacing = 2.0 * pi * m.pacing_frequency;
        let damping_ratio = m.structural_damping + self.link_damping_vertical / (2.0 * modal_mass * pacing);
        let resonance_factor = if frequency <= m.resonance_full_below {
            1.0
        } else if frequency >= m.resonance_none_above {
            0.0
        } else {
            (m.resonance_none_above - frequency) / (m.resonance_none_above - m.resonance_full_below)
        };
        let acceleration = resonance_factor * modal_force / (2.0 * damping_ratio * modal_mass);
        ComfortResponse {
            frequency,
            modal_mass,
            modal_force,
            damping_ratio,
            resonance_factor,
            acceleration,
        }
    }
}

/// Material cost of a geometry, kEUR.
pub fn cost(g: &BridgeGeometry, m: &MaterialConfig) -> CostBreakdown {
    let length = g.fixed.total_length;
    let steel = m.steel_density * m.steel_price / 1000.0;
    // Summed in sorted order so that cable order cannot change the result.
    let mut lengths: Vec<f64> = g.cables.iter().map(|c| g.cable_length(c)).collect();
    lengths.sort_by(f64::total_cmp);
    let cable_length: f64 = lengths.iter().sum();
    let link = &g.link;
    CostBreakdown {
        deck_steel: g.deck.area * length * steel,
        slab_concrete: g.slab_mass * 1000.0 / m.concrete_density * length * m.concrete_price / 1000.0,
        tower_steel: 4.0 * g.tower_leg_length() * g.tower.area() * steel,
        cable_steel: cable_length * g.cable_area * m.steel_density * m.cable_price / 1000.0,
        link_devices: 2.0
            * ((link.stiffness_transversal + link.stiffness_vertical) * m.link_stiffness_price
                + (link.damping_transversal + link.damping_vertical) * m.link_damping_price)
            / 1000.0,
    }
}

/// Demand/capacity ratios from the dead and live responses and, when
/// enabled, the comfort estimate.
pub fn constraints(
    model: &StructuralModel,
    prestress: &[f64],
    dead: &CaseResponse,
    live: &CaseResponse,
    comfort: Option<&ComfortResponse>,
    m: &MaterialConfig,
) -> ConstraintRatios {
    let steel = m.steel_allowable();
    let deflection = dead
        .stations
        .iter()
        .zip(&live.stations)
        .map(|(d, l)| (l.deflection - d.deflection).abs())
        .fold(0.0, f64::max);
    let mut cable_stress: f64 = 0.0;
    let mut slack: f64 = 0.0;
    for resp in [dead, live] {
        for (&n, &p0) in resp.cable_forces().iter().zip(prestress) {
            cable_stress = cable_stress.max(n / model.cable_area);
            slack = slack.max((2.0 - n / (m.slack_fraction * p0)).max(0.0));
        }
    }
    ConstraintRatios {
        deck_stress: dead.deck_stress.max(live.deck_stress) / steel,
        tower_stress: dead.tower_stress.max(live.tower_stress) / steel,
        cable_stress: cable_stress / m.cable_allowable(),
        deck_deflection: deflection / (model.central_span / m.deflection_divisor),
        cable_slack: slack,
        comfort_acceleration: comfort.map(|c| c.acceleration / m.comfort_limit),
    }
}

/// Everything an evaluation computes, for inspection and tests.
#[derive(Clone, Debug)]
pub struct DetailedEvaluation {
    pub geometry: BridgeGeometry,
    pub model: StructuralModel,
    pub prestress: Vec<f64>,
    pub dead: CaseResponse,
    pub live: CaseResponse,
    pub comfort_case: CaseResponse,
    pub comfort: ComfortResponse,
    pub result: EvaluationResult,
}

/// Decodes and evaluates designs. Holds no mutable state.
#[derive(Clone, Debug, Default)]
pub struct Evaluator {
    pub domains: DomainTable,
    pub fixed: FixedParams,
    pub materials: MaterialConfig,
}

impl Evaluator {
    pub fn new(domains: DomainTable, fixed: FixedParams, materials: MaterialConfig) -> Result<Self> {
        fixed.validate()?;
        materials.validate()?;
        Ok(Self {
            domains,
            fixed,
            materials,
        })
    }

    /// Cost and constraints of an in-domain design. A singular analysis is
    /// reported through `analysis_failed` with `s_max = +inf`.
    pub fn evaluate(&self, v: &DesignVector) -> Result<EvaluationResult> {
        let g = decode(v, &self.domains, &self.fixed)?;
        let breakdown = cost(&g, &self.materials);
        match self.analyze_geometry(g) {
            Ok(detail) => Ok(detail.result),
            Err(Error::AnalysisSingular(_)) => Ok(EvaluationResult {
                cost: breakdown.total(),
                cost_breakdown: breakdown,
                constraint_ratios: ConstraintRatios::all_infinite(self.materials.comfort_enabled),
                s_max: f64::INFINITY,
                feasible: false,
                analysis_failed: true,
            }),
            Err(e) => Err(e),
        }
    }

    pub fn evaluate_detailed(&self, v: &DesignVector) -> Result<DetailedEvaluation> {
        let g = decode(v, &self.domains, &self.fixed)?;
        self.analyze_geometry(g)
    }

    pub fn analyze_geometry(&self, g: BridgeGeometry) -> Result<DetailedEvaluation> {
        let m = &self.materials;
        let model = StructuralModel::build(&g, m)?;
        let prestress: Vec<f64> = model.frame.cables.iter().map(|c| c.prestress).collect();
        let dead = model.analyze(LoadCase::Dead, None)?;
        let live = model.analyze(LoadCase::Live, None)?;
        let comfort_case = model.analyze(LoadCase::Comfort, Some(&dead.analysis.solution.active))?;
        let comfort = model.comfort(&comfort_case, m);
        let ratios = constraints(
            &model,
            &prestress,
            &dead,
            &live,
            m.comfort_enabled.then_some(&comfort),
            m,
        );
        let breakdown = cost(&g, m);
        let s_max = ratios.max();
        let result = EvaluationResult {
            cost: breakdown.total(),
            cost_breakdown: breakdown,
            constraint_ratios: ratios,
            s_max,
            feasible: s_max <= 1.0,
            analysis_failed: false,
        };
        Ok(DetailedEvaluation {
            geometry: g,
            model,
            prestress,
            dead,
            live,
            comfort_case,
            comfort,
            result,
        })
    }
}
