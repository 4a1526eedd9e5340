//! The 22-gene design space: per-gene domains, uniform sampling and clamp
//! repair.
//!
//! Gene 0 (number of cables) is carried as a real in `[3, 7]` and only
//! quantized when a vector is decoded into a bridge geometry.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GENE_COUNT: usize = 22;

/// Current version of the on-disk domain table format.
pub const DOMAIN_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneKind {
    Discrete,
    Geometry,
    Control,
    Sectional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneDomain {
    pub index: usize,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: GeneKind,
}

/// Closed per-coordinate box `[lower_i, upper_i]`.
///
/// This is the dimension-agnostic part of the design space; the optimizers
/// work on it directly so they can also be exercised on test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidDomain("bounds must have at least one coordinate".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "coordinate {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval for every coordinate.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// One uniform draw from `[lower_i, upper_i]`.
    pub fn sample_gene<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // u < 1, so the result never exceeds upper; the min guards rounding.
        (self.lower[i] + u * self.width(i)).min(self.upper[i])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|i| self.sample_gene(i, rng)).collect()
    }

    pub fn clamp_gene(&self, i: usize, value: f64) -> f64 {
        // NaN maps to the lower bound so repaired vectors are always valid.
        if value.is_nan() {
            return self.lower[i];
        }
        value.max(self.lower[i]).min(self.upper[i])
    }

    pub fn clamp_in_place(&self, genes: &mut [f64]) {
        for (i, g) in genes.iter_mut().enumerate() {
            *g = self.clamp_gene(i, *g);
        }
    }

    pub fn contains(&self, genes: &[f64]) -> bool {
        genes.len() == self.dim()
            && genes
                .iter()
                .enumerate()
                .all(|(i, &g)| g >= self.lower[i] && g <= self.upper[i])
    }

    pub fn midpoint(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| 0.5 * (self.lower[i] + self.upper[i]))
            .collect()
    }

    /// Affine map of a gene vector onto `[0, 1]^n`.
    pub fn normalize(&self, genes: &[f64]) -> Vec<f64> {
        genes
            .iter()
            .enumerate()
            .map(|(i, &g)| (g - self.lower[i]) / self.width(i))
            .collect()
    }

    /// Inverse of [`Bounds::normalize`].
    pub fn denormalize(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .enumerate()
            .map(|(i, &u)| self.lower[i] + u * self.width(i))
            .collect()
    }
}

/// A point of the bridge design space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignVector(pub [f64; GENE_COUNT]);

impl DesignVector {
    pub fn from_slice(genes: &[f64]) -> Result<Self> {
        let arr: [f64; GENE_COUNT] = genes.try_into().map_err(|_| Error::DimensionMismatch {
            expected: GENE_COUNT,
            got: genes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn genes(&self) -> &[f64; GENE_COUNT] {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for DesignVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for DesignVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// A gene that fails the domain check.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainViolation {
    pub index: usize,
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl fmt::Display for DomainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "DV{} ({}) = {} outside [{}, {}]",
            self.index, self.name, self.value, self.lower, self.upper
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainTable {
    genes: Vec<GeneDomain>,
    bounds: Bounds,
}

#[derive(Serialize, Deserialize)]
struct DomainFile {
    format_version: u32,
    genes: Vec<GeneDomain>,
}

fn gene(index: usize, name: &str, lower: f64, upper: f64, kind: GeneKind) -> GeneDomain {
    GeneDomain {
        index,
        name: name.to_string(),
        lower,
        upper,
        kind,
    }
}

impl Default for DomainTable {
    fn default() -> Self {
        Self::footbridge()
    }
}

impl DomainTable {
    /// The built-in footbridge domains.
    pub fn footbridge() -> Self {
        use GeneKind::*;
        let genes = vec![
            gene(0, "cable_count", 3.0, 7.0, Discrete),
            gene(1, "central_span", 0.9, 1.2, Geometry),
            gene(2, "lateral_anchor_spacing", 0.7, 1.3, Geometry),
            gene(3, "tower_to_first_cable", 0.7, 1.3, Geometry),
            gene(4, "last_cable_to_axis", 0.7, 1.3, Geometry),
            gene(5, "tower_height", 0.1, 2.0, Geometry),
            gene(6, "tower_cable_spread", 0.1, 4.0, Geometry),
            gene(7, "tower_top_spacing", 0.1, 1.3, Geometry),
            gene(8, "tower_base_spacing", 0.1, 1.13, Geometry),
            gene(9, "link_stiffness_transversal", 0.001, 1000.0, Control),
            gene(10, "link_stiffness_vertical", 0.001, 1000.0, Control),
            gene(11, "link_damping_transversal", 0.001, 1000.0, Control),
            gene(12, "link_damping_vertical", 0.001, 1000.0, Control),
            gene(13, "slab_added_mass", 0.1, 7.0, Sectional),
            gene(14, "deck_area", 0.1, 80.0, Sectional),
            gene(15, "deck_depth", 0.5, 1.3, Sectional),
            gene(16, "tower_depth", 0.4, 1.5, Sectional),
            gene(17, "tower_flange_thickness", 0.1, 20.0, Sectional),
            gene(18, "tower_web_thickness", 0.3, 20.0, Sectional),
            gene(19, "tower_width", 0.3, 9.0, Sectional),
            gene(20, "cable_prestress", 0.7, 3.0, Sectional),
            gene(21, "cable_area", 0.5, 9.0, Sectional),
        ];
        Self::new(genes).expect("built-in domain table is valid")
    }

    pub fn new(mut genes: Vec<GeneDomain>) -> Result<Self> {
        if genes.len() != GENE_COUNT {
            return Err(Error::InvalidDomain(format!(
                "expected {GENE_COUNT} genes, found {}",
                genes.len()
            )));
        }
        genes.sort_by_key(|g| g.index);
        for (expected, g) in genes.iter().enumerate() {
            if g.index != expected {
                return Err(Error::InvalidDomain(format!(
                    "gene indices must be 0..{} each exactly once (missing or duplicate near {expected})",
                    GENE_COUNT - 1
                )));
            }
        }
        let bounds = Bounds::new(
            genes.iter().map(|g| g.lower).collect(),
            genes.iter().map(|g| g.upper).collect(),
        )?;
        Ok(Self { genes, bounds })
    }

    pub fn from_json_str(text: &str) -> std::result::Result<Self, String> {
        let file: DomainFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.format_version != DOMAIN_FORMAT_VERSION {
            return Err(format!(
                "unsupported format_version {} (expected {DOMAIN_FORMAT_VERSION})",
                file.format_version
            ));
        }
        Self::new(file.genes).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|reason| Error::parse(path, reason))
    }

    pub fn to_json(&self) -> String {
        let file = DomainFile {
            format_version: DOMAIN_FORMAT_VERSION,
            genes: self.genes.clone(),
        };
        serde_json::to_string_pretty(&file).expect("domain table serializes")
    }

    pub fn genes(&self) -> &[GeneDomain] {
        &self.genes
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DesignVector {
        let b = self.bounds();
        let mut out = [0.0; GENE_COUNT];
        for (i, g) in out.iter_mut().enumerate() {
            *g = b.sample_gene(i, rng);
        }
        DesignVector(out)
    }

    pub fn clamp_to_domain(&self, v: &DesignVector) -> DesignVector {
        let mut out = *v;
        self.bounds().clamp_in_place(&mut out.0);
        out
    }

    pub fn is_within_domain(&self, v: &DesignVector) -> bool {
        self.bounds().contains(&v.0)
    }

    /// Every out-of-domain gene, in index order.
    pub fn violations(&self, genes: &[f64]) -> Vec<DomainViolation> {
        self.genes
            .iter()
            .zip(genes)
            .filter(|(d, &v)| !(v >= d.lower && v <= d.upper))
            .map(|(d, &v)| DomainViolation {
                index: d.index,
                name: d.name.clone(),
                value: v,
                lower: d.lower,
                upper: d.upper,
            })
            .collect()
    }

    pub fn midpoint(&self) -> DesignVector {
        DesignVector::from_slice(&self.bounds().midpoint()).expect("22 genes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn footbridge_table_matches_reference_domains() {
        let t = DomainTable::footbridge();
        let g = t.genes();
        assert_eq!(g.len(), 22);
        assert_eq!((g[0].lower, g[0].upper), (3.0, 7.0));
        assert_eq!((g[1].lower, g[1].upper), (0.9, 1.2));
        assert_eq!((g[5].lower, g[5].upper), (0.1, 2.0));
        assert_eq!((g[8].lower, g[8].upper), (0.1, 1.13));
        for i in 9..=12 {
            assert_eq!((g[i].lower, g[i].upper), (0.001, 1000.0));
            assert_eq!(g[i].kind, GeneKind::Control);
        }
        assert_eq!((g[14].lower, g[14].upper), (0.1, 80.0));
        assert_eq!((g[21].lower, g[21].upper), (0.5, 9.0));
        assert!(g.iter().all(|d| d.lower < d.upper));
    }

    #[test]
    fn json_round_trip_and_rejects_bad_tables() {
        let t = DomainTable::footbridge();
        let back = DomainTable::from_json_str(&t.to_json()).unwrap();
        assert_eq!(back.genes(), t.genes());

        let mut genes = t.genes().to_vec();
        genes[3].index = 4;
        assert!(DomainTable::new(genes).is_err());

        let mut genes = t.genes().to_vec();
        genes[7].upper = genes[7].lower;
        assert!(DomainTable::new(genes).is_err());

        let genes = t.genes()[..21].to_vec();
        assert!(DomainTable::new(genes).is_err());
    }

    #[test]
    fn clamp_examples() {
        let t = DomainTable::footbridge();
        let mut v = t.midpoint();
        v[5] = 2.5;
        v[9] = -4.0;
        let c = t.clamp_to_domain(&v);
        assert_eq!(c[5], 2.0);
        assert_eq!(c[9], 0.001);
        let mid = t.midpoint();
        assert_eq!(t.clamp_to_domain(&mid), mid);
    }

    #[test]
    fn within_domain_examples() {
        let t = DomainTable::footbridge();
        let mut v = t.midpoint();
        assert!(t.is_within_domain(&v));
        v[0] = 7.2;
        assert!(!t.is_within_domain(&v));
        let viol = t.violations(v.as_slice());
        assert_eq!(viol.len(), 1);
        assert_eq!(viol[0].index, 0);
        v[3] = f64::NAN;
        assert!(!t.is_within_domain(&v));
        assert!(t.is_within_domain(&t.clamp_to_domain(&v)));
    }

    #[test]
    fn sampling_is_seeded_and_in_domain() {
        let t = DomainTable::footbridge();
        let a = t.sample_uniform(&mut ChaCha8Rng::seed_from_u64(7));
        let b = t.sample_uniform(&mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(t.is_within_domain(&t.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn tower_height_sample_mean_is_interval_midpoint() {
        // Uniform on [0.1, 2.0]: mean 1.05, sd 0.548, so the standard error
        // of a 1e5 mean is 0.0017.
        let t = DomainTable::footbridge();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mean = (0..n).map(|_| t.sample_uniform(&mut rng)[5]).sum::<f64>() / n as f64;
        assert!((mean - 1.05).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn normalize_round_trips() {
        let b = DomainTable::footbridge().bounds().clone();
        let mid = b.midpoint();
        let unit = b.normalize(&mid);
        assert!(unit.iter().all(|u| (u - 0.5).abs() < 1e-15));
        let back = b.denormalize(&unit);
        for (x, y) in mid.iter().zip(&back) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    fn any_vector() -> impl Strategy<Value = [f64; GENE_COUNT]> {
        prop::array::uniform22(-1.0e4f64..1.0e4)
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent(genes in any_vector()) {
            let t = DomainTable::footbridge();
            let once = t.clamp_to_domain(&DesignVector(genes));
            prop_assert!(t.is_within_domain(&once));
            prop_assert_eq!(t.clamp_to_domain(&once), once);
        }

        #[test]
        fn clamp_leaves_in_domain_genes_untouched(genes in any_vector()) {
            let t = DomainTable::footbridge();
            let v = DesignVector(genes);
            let c = t.clamp_to_domain(&v);
            for (i, d) in t.genes().iter().enumerate() {
                if v[i] >= d.lower && v[i] <= d.upper {
                    prop_assert_eq!(c[i], v[i]);
                }
            }
        }
    }
}
