//! Linear static analysis of planar frames with tension-only cables.
//!
//! Three degrees of freedom per node: horizontal `u`, vertical `w` (positive
//! up) and rotation `r` (counter-clockwise). Frames are Euler-Bernoulli
//! beam-columns, cables are axial bars carrying an initial tension, springs
//! connect one degree of freedom of a node to ground or to the same degree of
//! freedom of another node.
//!
//! The reduced stiffness matrix is stored as a skyline (variable band) and
//! factorized as `L D L^T`; a pivot that collapses relative to its original
//! diagonal entry is reported as [`Error::AnalysisSingular`].

use crate::error::{Error, Result};

pub const DOFS_PER_NODE: usize = 3;

/// Relative pivot threshold below which the system is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dof {
    U = 0,
    W = 1,
    R = 2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub x: f64,
    pub z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub i: usize,
    pub j: usize,
    pub modulus: f64,
    pub area: f64,
    pub inertia: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cable {
    pub i: usize,
    pub j: usize,
    pub modulus: f64,
    pub area: f64,
    /// Initial tension, kN.
    pub prestress: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spring {
    pub node: usize,
    /// `None` grounds the spring.
    pub other: Option<usize>,
    pub dof: Dof,
    pub stiffness: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameModel {
    pub nodes: Vec<Node>,
    pub frames: Vec<Frame>,
    pub cables: Vec<Cable>,
    pub springs: Vec<Spring>,
    pub supports: Vec<(usize, Dof)>,
}

/// Applied actions. Distributed loads are global components per unit element
/// length and are uniform along each element.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Loads {
    pub nodal: Vec<(usize, [f64; 3])>,
    pub frame_udl: Vec<(usize, [f64; 2])>,
    /// Whether cable prestress contributes equivalent nodal loads.
    pub prestress: bool,
}

#[derive(Clone, Copy, Debug)]
struct Axes {
    length: f64,
    c: f64,
    s: f64,
}

fn axes(a: Node, b: Node) -> Axes {
    let dx = b.x - a.x;
    let dz = b.z - a.z;
    let length = (dx * dx + dz * dz).sqrt();
    Axes {
        length,
        c: dx / length,
        s: dz / length,
    }
}

impl Frame {
    fn local_stiffness(&self, l: f64) -> [[f64; 6]; 6] {
        let ea = self.modulus * self.area / l;
        let ei = self.modulus * self.inertia;
        let k1 = 12.0 * ei / l.powi(3);
        let k2 = 6.0 * ei / (l * l);
        let k3 = 4.0 * ei / l;
        let k4 = 2.0 * ei / l;
        [
            [ea, 0.0, 0.0, -ea, 0.0, 0.0],
            [0.0, k1, k2, 0.0, -k1, k2],
            [0.0, k2, k3, 0.0, -k2, k4],
            [-ea, 0.0, 0.0, ea, 0.0, 0.0],
            [0.0, -k1, -k2, 0.0, k1, -k2],
            [0.0, k2, k4, 0.0, -k2, k3],
        ]
    }
}

fn to_local(ax: &Axes, g: &[f64; 6]) -> [f64; 6] {
    let (c, s) = (ax.c, ax.s);
    [
        c * g[0] + s * g[1],
        -s * g[0] + c * g[1],
        g[2],
        c * g[3] + s * g[4],
        -s * g[3] + c * g[4],
        g[5],
    ]
}

fn to_global(ax: &Axes, l: &[f64; 6]) -> [f64; 6] {
    let (c, s) = (ax.c, ax.s);
    [
        c * l[0] - s * l[1],
        s * l[0] + c * l[1],
        l[2],
        c * l[3] - s * l[4],
        s * l[3] + c * l[4],
        l[5],
    ]
}

/// Global stiffness `T^T k T` of a frame element.
fn frame_global_stiffness(k: &[[f64; 6]; 6], ax: &Axes) -> [[f64; 6]; 6] {
    let (c, s) = (ax.c, ax.s);
    let mut t = [[0.0; 6]; 6];
    t[0][0] = c;
    t[0][1] = s;
    t[1][0] = -s;
    t[1][1] = c;
    t[2][2] = 1.0;
    t[3][3] = c;
    t[3][4] = s;
    t[4][3] = -s;
    t[4][4] = c;
    t[5][5] = 1.0;
    let mut kt = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            kt[i][j] = (0..6).map(|m| k[i][m] * t[m][j]).sum();
        }
    }
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            out[i][j] = (0..6).map(|m| t[m][i] * kt[m][j]).sum();
        }
    }
    out
}

/// Equivalent nodal loads (local axes) of a uniform load with local axial
/// and transverse components.
fn fixed_end_local(axial: f64, transverse: f64, l: f64) -> [f64; 6] {
    [
        0.5 * axial * l,
        0.5 * transverse * l,
        transverse * l * l / 12.0,
        0.5 * axial * l,
        0.5 * transverse * l,
        -transverse * l * l / 12.0,
    ]
}

fn frame_dofs(f: &Frame) -> [usize; 6] {
    let a = f.i * DOFS_PER_NODE;
    let b = f.j * DOFS_PER_NODE;
    [a, a + 1, a + 2, b, b + 1, b + 2]
}

fn cable_dofs(c: &Cable) -> [usize; 4] {
    let a = c.i * DOFS_PER_NODE;
    let b = c.j * DOFS_PER_NODE;
    [a, a + 1, b, b + 1]
}

fn cable_global_stiffness(c: &Cable, ax: &Axes) -> [[f64; 4]; 4] {
    let k = c.modulus * c.area / ax.length;
    let d = [-ax.c, -ax.s, ax.c, ax.s];
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = k * d[i] * d[j];
        }
    }
    out
}

/// Symmetric positive definite matrix in skyline storage, factorized in
/// place as `L D L^T`.
#[derive(Clone, Debug)]
pub struct Skyline {
    /// First stored column of each row.
    first: Vec<usize>,
    /// Start of each row in `values`; the diagonal is the last entry.
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl Skyline {
    pub fn new(first: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "skyline row {i} starts after its diagonal");
            offset.push(total);
            total += i - f + 1;
        }
        offset.push(total);
        Self {
            first,
            offset,
            values: vec![0.0; total],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Adds `v` to entry `(i, j)`; only the lower triangle is stored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(c >= self.first[r]);
        self.values[self.offset[r] + c - self.first[r]] += v;
    }

    /// Frobenius norm of the full symmetric matrix; call before factorizing.
    pub fn frobenius_norm(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim() {
            let row = self.row(i);
            let (diag, off) = row.split_last().expect("rows hold their diagonal");
            sum += diag * diag + 2.0 * off.iter().map(|v| v * v).sum::<f64>();
        }
        sum.sqrt()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.offset[i]..self.offset[i + 1]]
    }

    pub fn factorize(&mut self) -> Result<()> {
        let n = self.dim();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            let original = self.values[self.offset[i + 1] - 1];
            // Off-diagonal: t_j = K_ij - sum_k t_k L_jk, stored unscaled.
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let oj = self.offset[j];
                let mut acc = self.values[oi + j - fi];
                for k in k0..j {
                    acc -= self.values[oi + k - fi] * self.values[oj + k - fj];
                }
                self.values[oi + j - fi] = acc;
            }
            let mut d = original;
            for j in fi..i {
                let t = self.values[oi + j - fi];
                let l = t / diag[j];
                d -= t * l;
                self.values[oi + j - fi] = l;
            }
            if !(d > PIVOT_TOLERANCE * original.abs()) || !d.is_finite() {
                return Err(Error::AnalysisSingular(format!(
                    "pivot {d:e} at equation {i} (diagonal {original:e})"
                )));
            }
            diag[i] = d;
            self.values[self.offset[i + 1] - 1] = d;
        }
        Ok(())
    }

    /// Solves with the factorized matrix.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.row(i);
            let mut acc = rhs[i];
            for (k, l) in (fi..i).zip(row) {
                acc -= l * rhs[k];
            }
            rhs[i] = acc;
        }
        for i in 0..n {
            rhs[i] /= self.row(i)[i - self.first[i]];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = rhs[i];
            let row = self.row(i);
            for (k, l) in (fi..i).zip(row) {
                rhs[k] -= l * xi;
            }
        }
    }
}

struct Assembled {
    /// Equation number of each dof, `usize::MAX` when supported.
    eq: Vec<usize>,
    neq: usize,
    k: Skyline,
    norm: f64,
}

/// Result of one linear solve with a fixed set of active cables.
#[derive(Clone, Debug)]
pub struct LinearSolution {
    /// `[u, w, r]` per node.
    pub displacements: Vec<[f64; 3]>,
    /// Axial force per cable (tension positive); zero for inactive cables.
    pub cable_forces: Vec<f64>,
    pub active: Vec<bool>,
    /// Normwise backward error `||K u - F|| / (||K||_F ||u|| + ||F||)` over
    /// the free degrees of freedom.
    pub residual: f64,
    /// Support reactions, one entry per model support.
    pub reactions: Vec<f64>,
}

impl FrameModel {
    pub fn dof_count(&self) -> usize {
        self.nodes.len() * DOFS_PER_NODE
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let bad_node = |i: usize| i >= n;
        for f in &self.frames {
            if bad_node(f.i) || bad_node(f.j) || f.i == f.j {
                return Err(Error::InvalidGeometry(format!("frame {f:?} has bad nodes")));
            }
            if !(f.modulus > 0.0 && f.area > 0.0 && f.inertia > 0.0) {
                return Err(Error::InvalidGeometry(format!("frame {f:?} has a non-positive property")));
            }
        }
        for c in &self.cables {
            if bad_node(c.i) || bad_node(c.j) || c.i == c.j {
                return Err(Error::InvalidGeometry(format!("cable {c:?} has bad nodes")));
            }
            if !(c.modulus > 0.0 && c.area > 0.0 && c.prestress >= 0.0) {
                return Err(Error::InvalidGeometry(format!("cable {c:?} has a bad property")));
            }
        }
        for s in &self.springs {
            if bad_node(s.node) || s.other.is_some_and(bad_node) || !(s.stiffness >= 0.0) {
                return Err(Error::InvalidGeometry(format!("spring {s:?} is malformed")));
            }
        }
        if self.supports.iter().any(|&(i, _)| bad_node(i)) {
            return Err(Error::InvalidGeometry("support on a missing node".into()));
        }
        Ok(())
    }

    /// Global load vector (all degrees of freedom).
    fn load_vector(&self, loads: &Loads, active: &[bool]) -> Vec<f64> {
        let mut f = vec![0.0; self.dof_count()];
        for &(node, v) in &loads.nodal {
            for d in 0..3 {
                f[node * DOFS_PER_NODE + d] += v[d];
            }
        }
        for &(e, [px, pz]) in &loads.frame_udl {
            let el = &self.frames[e];
            let ax = axes(self.nodes[el.i], self.nodes[el.j]);
            let axial = ax.c * px + ax.s * pz;
            let transverse = -ax.s * px + ax.c * pz;
            let fe = to_global(&ax, &fixed_end_local(axial, transverse, ax.length));
            for (k, dof) in frame_dofs(el).into_iter().enumerate() {
                f[dof] += fe[k];
            }
        }
        if loads.prestress {
            for (c, &on) in self.cables.iter().zip(active) {
                if !on {
                    continue;
                }
                let ax = axes(self.nodes[c.i], self.nodes[c.j]);
                let p = c.prestress;
                let d = cable_dofs(c);
                f[d[0]] += p * ax.c;
                f[d[1]] += p * ax.s;
                f[d[2]] -= p * ax.c;
                f[d[3]] -= p * ax.s;
            }
        }
        f
    }

    /// Internal force vector `K u` assembled element by element.
    fn internal_forces(&self, u: &[f64], active: &[bool]) -> Vec<f64> {
        let mut r = vec![0.0; self.dof_count()];
        for el in &self.frames {
            let ax = axes(self.nodes[el.i], self.nodes[el.j]);
            let k = frame_global_stiffness(&el.local_stiffness(ax.length), &ax);
            let d = frame_dofs(el);
            for a in 0..6 {
                r[d[a]] += (0..6).map(|b| k[a][b] * u[d[b]]).sum::<f64>();
            }
        }
        for (c, &on) in self.cables.iter().zip(active) {
            if !on {
                continue;
            }
            let ax = axes(self.nodes[c.i], self.nodes[c.j]);
            let k = cable_global_stiffness(c, &ax);
            let d = cable_dofs(c);
            for a in 0..4 {
                r[d[a]] += (0..4).map(|b| k[a][b] * u[d[b]]).sum::<f64>();
            }
        }
        for s in &self.springs {
            let a = s.node * DOFS_PER_NODE + s.dof as usize;
            match s.other {
                None => r[a] += s.stiffness * u[a],
                Some(o) => {
                    let b = o * DOFS_PER_NODE + s.dof as usize;
                    let du = u[a] - u[b];
                    r[a] += s.stiffness * du;
                    r[b] -= s.stiffness * du;
                }
            }
        }
        r
    }

    /// Assembles and factorizes the stiffness over the free degrees of
    /// freedom.
    fn assemble(&self, active: &[bool]) -> Result<Assembled> {
        self.validate()?;
        assert_eq!(active.len(), self.cables.len());
        let ndof = self.dof_count();

        // Equation numbering: supported dofs are dropped.
        let mut eq = vec![usize::MAX; ndof];
        let mut fixed = vec![false; ndof];
        for &(node, dof) in &self.supports {
            fixed[node * DOFS_PER_NODE + dof as usize] = true;
        }
        let mut neq = 0;
        for d in 0..ndof {
            if !fixed[d] {
                eq[d] = neq;
                neq += 1;
            }
        }

        // Skyline profile.
        let mut first: Vec<usize> = (0..neq).collect();
        let mut touch = |dofs: &[usize]| {
            let lo = dofs.iter().filter_map(|&d| (eq[d] != usize::MAX).then_some(eq[d])).min();
            if let Some(lo) = lo {
                for &d in dofs {
                    if eq[d] != usize::MAX {
                        let e = eq[d];
                        first[e] = first[e].min(lo);
                    }
                }
            }
        };
        for el in &self.frames {
            touch(&frame_dofs(el));
        }
        for (c, &on) in self.cables.iter().zip(active) {
            if on {
                touch(&cable_dofs(c));
            }
        }
        for s in &self.springs {
            if let Some(o) = s.other {
                touch(&[
                    s.node * DOFS_PER_NODE + s.dof as usize,
                    o * DOFS_PER_NODE + s.dof as usize,
                ]);
            }
        }
        let mut k = Skyline::new(first);

        let mut scatter = |dofs: &[usize], ke: &dyn Fn(usize, usize) -> f64| {
            for (a, &da) in dofs.iter().enumerate() {
                let ea = eq[da];
                if ea == usize::MAX {
                    continue;
                }
                for (b, &db) in dofs.iter().enumerate() {
                    let eb = eq[db];
                    if eb == usize::MAX || eb > ea {
                        continue;
                    }
                    k.add(ea, eb, ke(a, b));
                }
            }
        };
        for el in &self.frames {
            let ax = axes(self.nodes[el.i], self.nodes[el.j]);
            let ke = frame_global_stiffness(&el.local_stiffness(ax.length), &ax);
            scatter(&frame_dofs(el), &|a, b| ke[a][b]);
        }
        for (c, &on) in self.cables.iter().zip(active) {
            if on {
                let ax = axes(self.nodes[c.i], self.nodes[c.j]);
                let ke = cable_global_stiffness(c, &ax);
                scatter(&cable_dofs(c), &|a, b| ke[a][b]);
            }
        }
        for s in &self.springs {
            let a = s.node * DOFS_PER_NODE + s.dof as usize;
            match s.other {
                None => scatter(&[a], &|_, _| s.stiffness),
                Some(o) => {
                    let b = o * DOFS_PER_NODE + s.dof as usize;
                    let ks = s.stiffness;
                    scatter(&[a, b], &|x, y| if x == y { ks } else { -ks });
                }
            }
        }
        let norm = k.frobenius_norm();
        k.factorize()?;
        Ok(Assembled { eq, neq, k, norm })
    }

    /// Solves `K u = F` with the given cables active.
    pub fn solve_linear(&self, loads: &Loads, active: &[bool]) -> Result<LinearSolution> {
        let Assembled { eq, neq, k, norm } = self.assemble(active)?;
        let ndof = self.dof_count();

        let f_all = self.load_vector(loads, active);
        let mut x = vec![0.0; neq];
        for d in 0..ndof {
            if eq[d] != usize::MAX {
                x[eq[d]] = f_all[d];
            }
        }
        k.solve(&mut x);
        let mut u = vec![0.0; ndof];
        for d in 0..ndof {
            if eq[d] != usize::MAX {
                u[d] = x[eq[d]];
            }
        }

        // One step of iterative refinement; stiff springs and cables next to
        // slender members leave the plain solve a few digits short.
        let r = self.internal_forces(&u, active);
        let mut dx = vec![0.0; neq];
        for d in 0..ndof {
            if eq[d] != usize::MAX {
                dx[eq[d]] = f_all[d] - r[d];
            }
        }
        k.solve(&mut dx);
        for d in 0..ndof {
            if eq[d] != usize::MAX {
                u[d] += dx[eq[d]];
            }
        }

        let r = self.internal_forces(&u, active);
        let (mut res2, mut f2, mut u2) = (0.0, 0.0, 0.0);
        for d in 0..ndof {
            if eq[d] != usize::MAX {
                res2 += (r[d] - f_all[d]).powi(2);
                f2 += f_all[d].powi(2);
                u2 += u[d].powi(2);
            }
        }
        let scale = norm * u2.sqrt() + f2.sqrt();
        let residual = if scale > 0.0 { res2.sqrt() / scale } else { 0.0 };
        let reactions = self
            .supports
            .iter()
            .map(|&(node, dof)| {
                let d = node * DOFS_PER_NODE + dof as usize;
                r[d] - f_all[d]
            })
            .collect();

        let cable_forces = self
            .cables
            .iter()
            .zip(active)
            .map(|(c, &on)| if on { self.cable_force(c, &u) } else { 0.0 })
            .collect();

        Ok(LinearSolution {
            displacements: u.chunks(DOFS_PER_NODE).map(|c| [c[0], c[1], c[2]]).collect(),
            cable_forces,
            active: active.to_vec(),
            residual,
            reactions,
        })
    }

    fn cable_force(&self, c: &Cable, u: &[f64]) -> f64 {
        let ax = axes(self.nodes[c.i], self.nodes[c.j]);
        let d = cable_dofs(c);
        let elongation = ax.c * (u[d[2]] - u[d[0]]) + ax.s * (u[d[3]] - u[d[1]]);
        c.prestress + c.modulus * c.area / ax.length * elongation
    }

    /// Linear solve with tension-only cables.
    ///
    /// Starting from `initial` (or all cables active) every cable in
    /// compression is switched off and the system solved again, until no
    /// active cable is compressed. Cables are never reactivated, so the loop
    /// runs at most `cables + 1` times.
    pub fn analyze(&self, loads: &Loads, initial: Option<&[bool]>) -> Result<Analysis> {
        let mut active = match initial {
            Some(a) => a.to_vec(),
            None => vec![true; self.cables.len()],
        };
        let mut iterations = 0;
        loop {
            iterations += 1;
            let sol = self.solve_linear(loads, &active)?;
            let mut changed = false;
            for (a, &n) in active.iter_mut().zip(&sol.cable_forces) {
                if *a && n < 0.0 {
                    *a = false;
                    changed = true;
                }
            }
            if !changed {
                return Ok(Analysis {
                    solution: sol,
                    iterations,
                });
            }
        }
    }

    /// Local end forces `k u - f_fixed` of a frame (actions of the nodes on
    /// the element).
    pub fn frame_end_forces(&self, e: usize, sol: &LinearSolution, udl: [f64; 2]) -> FrameForces {
        let el = &self.frames[e];
        let ax = axes(self.nodes[el.i], self.nodes[el.j]);
        let d = frame_dofs(el);
        let ug: [f64; 6] = std::array::from_fn(|k| {
            sol.displacements[d[k] / DOFS_PER_NODE][d[k] % DOFS_PER_NODE]
        });
        let ul = to_local(&ax, &ug);
        let k = el.local_stiffness(ax.length);
        let axial = ax.c * udl[0] + ax.s * udl[1];
        let transverse = -ax.s * udl[0] + ax.c * udl[1];
        let fixed = fixed_end_local(axial, transverse, ax.length);
        let ends = std::array::from_fn(|a| (0..6).map(|b| k[a][b] * ul[b]).sum::<f64>() - fixed[a]);
        FrameForces {
            length: ax.length,
            ends,
            local_displacements: ul,
            axial_load: axial,
            transverse_load: transverse,
            ei: el.modulus * el.inertia,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub solution: LinearSolution,
    pub iterations: usize,
}

/// End actions and displacements of one frame, in local axes.
#[derive(Clone, Copy, Debug)]
pub struct FrameForces {
    pub length: f64,
    pub ends: [f64; 6],
    pub local_displacements: [f64; 6],
    pub axial_load: f64,
    pub transverse_load: f64,
    pub ei: f64,
}

impl FrameForces {
    /// Axial force at distance `s` from node i, tension positive.
    pub fn axial(&self, s: f64) -> f64 {
        -self.ends[0] - self.axial_load * s
    }

    /// Bending moment at `s`, sagging positive.
    pub fn moment(&self, s: f64) -> f64 {
        -self.ends[2] + self.ends[1] * s + 0.5 * self.transverse_load * s * s
    }

    /// Transverse displacement at `s`: cubic Hermite interpolation of the end
    /// values plus the clamped-clamped particular solution of the uniform load.
    pub fn transverse_displacement(&self, s: f64) -> f64 {
        let l = self.length;
        let t = s / l;
        let h1 = 1.0 - 3.0 * t * t + 2.0 * t.powi(3);
        let h2 = l * (t - 2.0 * t * t + t.powi(3));
        let h3 = 3.0 * t * t - 2.0 * t.powi(3);
        let h4 = l * (-t * t + t.powi(3));
        let d = &self.local_displacements;
        let particular = self.transverse_load * s * s * (l - s).powi(2) / (24.0 * self.ei);
        h1 * d[1] + h2 * d[2] + h3 * d[4] + h4 * d[5] + particular
    }
}
