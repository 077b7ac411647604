//! Problem instances: state space, jump graph, interaction kernel and block
//! structure, plus the configuration/empirical-vector types shared by every
//! other module.
//!
//! Internally states and blocks are 0-based. The model file and every other
//! file format use the 1-based labels `1..=K` and `1..=r`.

mod file;
mod state;

use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use self::file::ModelFile;
pub use self::state::{
    ClassId, Configuration, EmpiricalVector, Role, TangentVector, Trajectory, SUM_TOLERANCE,
};
use crate::error::{Error, ModelError, Result, ValidationErrors};

/// Tolerance on `sum(alpha) = 1` and `pc + pp = 1`.
pub const PROPORTION_TOLERANCE: f64 = 1e-12;
/// Allowed disagreement between explicit proportions and those implied by
/// finite sizes.
pub const SIZE_PROPORTION_TOLERANCE: f64 = 1e-9;

/// States `0..K` and the admissible jumps between them.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    k: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<bool>,
}

impl StateSpace {
    /// `edges` are 0-based ordered pairs. Out-of-range pairs are kept so that
    /// validation can report them.
    pub fn new(k: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![false; k * k];
        for &(a, b) in &edges {
            if a < k && b < k {
                adjacency[a * k + b] = true;
            }
        }
        Self {
            k,
            edges,
            adjacency,
        }
    }

    /// Every ordered pair of distinct states is an edge.
    pub fn complete(k: usize) -> Self {
        let edges = (0..k)
            .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        Self::new(k, edges)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// The indicator `a(z, z')`.
    #[inline]
    pub fn allowed(&self, z: usize, z2: usize) -> bool {
        self.adjacency[z * self.k + z2]
    }

    fn reachable_from_zero(&self, reverse: bool) -> Vec<bool> {
        let mut seen = vec![false; self.k];
        if self.k == 0 {
            return seen;
        }
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(z) = queue.pop_front() {
            for next in 0..self.k {
                let hop = if reverse {
                    self.allowed(next, z)
                } else {
                    self.allowed(z, next)
                };
                if hop && !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    fn violations(&self) -> Vec<ModelError> {
        let mut out = Vec::new();
        if self.k == 0 {
            out.push(ModelError::BadParameter("K must be positive".into()));
            return out;
        }
        for &(a, b) in &self.edges {
            if a >= self.k || b >= self.k {
                out.push(ModelError::BadParameter(format!(
                    "edge ({}, {}) is outside 1..={}",
                    a + 1,
                    b + 1,
                    self.k
                )));
            } else if a == b {
                out.push(ModelError::BadParameter(format!(
                    "self-loop ({}, {}) is not an admissible jump",
                    a + 1,
                    b + 1
                )));
            } else if !self.allowed(b, a) {
                out.push(ModelError::AsymmetricEdges(format!(
                    "({}, {}) present but ({}, {}) missing",
                    a + 1,
                    b + 1,
                    b + 1,
                    a + 1
                )));
            }
        }
        let fwd = self.reachable_from_zero(false);
        let bwd = self.reachable_from_zero(true);
        let stranded: Vec<usize> = (0..self.k)
            .filter(|&z| !fwd[z] || !bwd[z])
            .map(|z| z + 1)
            .collect();
        if !stranded.is_empty() {
            out.push(ModelError::ReducibleJumpGraph(format!(
                "states {stranded:?} are not mutually reachable with state 1"
            )));
        }
        out
    }
}

/// Interaction kernel `W`, strength `beta` and one-body potential `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionModel {
    k: usize,
    w: Vec<f64>,
    pub beta: f64,
    v: Vec<f64>,
}

impl InteractionModel {
    /// `w` is given row by row. The potential defaults to zero.
    pub fn new(w: Vec<Vec<f64>>, beta: f64) -> Self {
        let k = w.len();
        let flat = w.into_iter().flatten().collect();
        Self {
            k,
            w: flat,
            beta,
            v: vec![0.0; k],
        }
    }

    pub fn with_potential(mut self, v: Vec<f64>) -> Self {
        self.v = v;
        self
    }

    #[inline]
    pub fn w(&self, z: usize, z2: usize) -> f64 {
        self.w[z * self.k + z2]
    }

    pub fn w_rows(&self) -> Vec<Vec<f64>> {
        self.w.chunks(self.k.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn potential(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn v(&self, z: usize) -> f64 {
        self.v[z]
    }

    pub fn max_abs_w(&self) -> f64 {
        self.w.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Overwrites one kernel entry without touching its mirror.
    ///
    /// Lets tests and the verification suite plant an asymmetric kernel in an
    /// already validated model.
    pub fn set_w_unchecked(&mut self, z: usize, z2: usize, value: f64) {
        self.w[z * self.k + z2] = value;
    }

    fn violations(&self, k: usize) -> Vec<ModelError> {
        let mut out = Vec::new();
        if self.k != k || self.w.len() != k * k {
            out.push(ModelError::SizeMismatch(format!(
                "W must be {k}x{k}, got {} entries",
                self.w.len()
            )));
            return out;
        }
        if self.v.len() != k {
            out.push(ModelError::SizeMismatch(format!(
                "V must have {k} entries, got {}",
                self.v.len()
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            out.push(ModelError::BadParameter(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if self.w.iter().chain(&self.v).any(|x| !x.is_finite()) {
            out.push(ModelError::BadParameter(
                "W and V entries must be finite".into(),
            ));
        }
        for a in 0..k {
            for b in a + 1..k {
                let (x, y) = (self.w(a, b), self.w(b, a));
                if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                    out.push(ModelError::AsymmetricW {
                        row: a + 1,
                        col: b + 1,
                    });
                }
            }
        }
        out
    }
}

/// Finite class sizes `(N_j^c, N_j^p)` of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSizes {
    pub central: usize,
    pub peripheral: usize,
}

/// Limit proportions `(alpha_j, p_j^c, p_j^p)` of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockProportions {
    pub alpha: f64,
    pub central: f64,
    pub peripheral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockStructure {
    pub r: usize,
    pub finite_sizes: Option<Vec<BlockSizes>>,
    pub limit_proportions: Vec<BlockProportions>,
}

impl BlockStructure {
    /// Finite sizes with proportions derived from them.
    pub fn from_sizes(sizes: Vec<BlockSizes>) -> Self {
        let limit_proportions = derive_proportions(&sizes);
        Self {
            r: sizes.len(),
            finite_sizes: Some(sizes),
            limit_proportions,
        }
    }

    /// Limit proportions only.
    pub fn from_proportions(props: Vec<BlockProportions>) -> Self {
        Self {
            r: props.len(),
            finite_sizes: None,
            limit_proportions: props,
        }
    }

    fn violations(&self) -> Vec<ModelError> {
        let mut out = Vec::new();
        if self.r == 0 {
            out.push(ModelError::BadSizes("need at least one block".into()));
            return out;
        }
        if self.limit_proportions.len() != self.r {
            out.push(ModelError::BadProportions(format!(
                "expected {} proportion triples, got {}",
                self.r,
                self.limit_proportions.len()
            )));
        } else {
            let open = |x: f64| x > 0.0 && x < 1.0;
            for (j, p) in self.limit_proportions.iter().enumerate() {
                // A single block necessarily has alpha = 1.
                let alpha_ok = open(p.alpha) || (self.r == 1 && p.alpha == 1.0);
                if !alpha_ok || !open(p.central) || !open(p.peripheral) {
                    out.push(ModelError::BadProportions(format!(
                        "block {}: ({}, {}, {}) not in (0,1)",
                        j + 1,
                        p.alpha,
                        p.central,
                        p.peripheral
                    )));
                }
                if (p.central + p.peripheral - 1.0).abs() > PROPORTION_TOLERANCE {
                    out.push(ModelError::BadProportions(format!(
                        "block {}: p^c + p^p = {}",
                        j + 1,
                        p.central + p.peripheral
                    )));
                }
            }
            let total: f64 = self.limit_proportions.iter().map(|p| p.alpha).sum();
            if (total - 1.0).abs() > PROPORTION_TOLERANCE {
                out.push(ModelError::BadProportions(format!(
                    "block weights sum to {total}"
                )));
            }
        }
        if let Some(sizes) = &self.finite_sizes {
            if sizes.len() != self.r {
                out.push(ModelError::BadSizes(format!(
                    "expected {} size pairs, got {}",
                    self.r,
                    sizes.len()
                )));
            } else {
                for (j, s) in sizes.iter().enumerate() {
                    if s.central == 0 || s.peripheral == 0 {
                        out.push(ModelError::BadSizes(format!(
                            "block {}: sizes ({}, {}) must be at least 1",
                            j + 1,
                            s.central,
                            s.peripheral
                        )));
                    }
                }
                if out.is_empty() && self.limit_proportions.len() == self.r {
                    let derived = derive_proportions(sizes);
                    for (j, (a, b)) in derived.iter().zip(&self.limit_proportions).enumerate() {
                        let gap = (a.alpha - b.alpha)
                            .abs()
                            .max((a.central - b.central).abs())
                            .max((a.peripheral - b.peripheral).abs());
                        if gap > SIZE_PROPORTION_TOLERANCE {
                            out.push(ModelError::BadProportions(format!(
                                "block {}: proportions disagree with finite sizes by {gap:.3e}",
                                j + 1
                            )));
                        }
                    }
                }
            }
        }
        out
    }
}

fn derive_proportions(sizes: &[BlockSizes]) -> Vec<BlockProportions> {
    let n: usize = sizes.iter().map(|s| s.central + s.peripheral).sum();
    sizes
        .iter()
        .map(|s| {
            let nj = (s.central + s.peripheral) as f64;
            BlockProportions {
                alpha: nj / n.max(1) as f64,
                central: s.central as f64 / nj.max(1.0),
                peripheral: s.peripheral as f64 / nj.max(1.0),
            }
        })
        .collect()
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub state_space: StateSpace,
    pub interaction: InteractionModel,
    pub blocks: BlockStructure,
}

impl ModelSpec {
    /// Assembles and validates a model.
    pub fn new(
        state_space: StateSpace,
        interaction: InteractionModel,
        blocks: BlockStructure,
    ) -> Result<Self, ValidationErrors> {
        validate_model(Self {
            state_space,
            interaction,
            blocks,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(file.into_spec()?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_spec(self)).expect("model serializes")
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.state_space.k()
    }

    #[inline]
    pub fn r(&self) -> usize {
        self.blocks.r
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        2 * self.blocks.r
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.interaction.beta
    }

    #[inline]
    pub fn w(&self, z: usize, z2: usize) -> f64 {
        self.interaction.w(z, z2)
    }

    #[inline]
    pub fn allowed(&self, z: usize, z2: usize) -> bool {
        self.state_space.allowed(z, z2)
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> {
        ClassId::all(self.r())
    }

    /// Limit weight `alpha_j p_j^iota` of a class.
    #[inline]
    pub fn class_weight(&self, class: ClassId) -> f64 {
        let p = &self.blocks.limit_proportions[class.block];
        p.alpha
            * match class.role {
                Role::Central => p.central,
                Role::Peripheral => p.peripheral,
            }
    }

    pub fn has_finite_sizes(&self) -> bool {
        self.blocks.finite_sizes.is_some()
    }

    /// Per-class sizes `N_j^iota` in canonical class order.
    pub fn class_sizes(&self) -> Result<Vec<usize>, ModelError> {
        let sizes = self
            .blocks
            .finite_sizes
            .as_ref()
            .ok_or(ModelError::MissingFiniteSizes)?;
        Ok(sizes
            .iter()
            .flat_map(|s| [s.central, s.peripheral])
            .collect())
    }

    pub fn class_size(&self, class: ClassId) -> Result<usize, ModelError> {
        let sizes = self
            .blocks
            .finite_sizes
            .as_ref()
            .ok_or(ModelError::MissingFiniteSizes)?;
        let s = sizes[class.block];
        Ok(match class.role {
            Role::Central => s.central,
            Role::Peripheral => s.peripheral,
        })
    }

    /// Total number of nodes `N`.
    pub fn total_nodes(&self) -> Result<usize, ModelError> {
        Ok(self.class_sizes()?.iter().sum())
    }

    /// Same model with new finite sizes and proportions re-derived from them.
    pub fn with_finite_sizes(&self, sizes: Vec<BlockSizes>) -> Result<Self, ValidationErrors> {
        let mut out = self.clone();
        out.blocks = BlockStructure::from_sizes(sizes);
        validate_model(out)
    }

    /// Sizes closest to `n` total nodes under the current proportions
    /// (each class gets at least one node).
    pub fn sized_for_total(&self, n: usize) -> Result<Self, ValidationErrors> {
        self.with_finite_sizes(self.sizes_for_total(n))
    }

    pub(crate) fn sizes_for_total(&self, n: usize) -> Vec<BlockSizes> {
        self.blocks
            .limit_proportions
            .iter()
            .map(|p| BlockSizes {
                central: ((n as f64 * p.alpha * p.central).round() as usize).max(1),
                peripheral: ((n as f64 * p.alpha * p.peripheral).round() as usize).max(1),
            })
            .collect()
    }

    /// Like [`ModelSpec::with_finite_sizes`] but keeps the rest of the model
    /// as is, even if it no longer validates.
    pub(crate) fn with_sizes_unchecked(&self, sizes: Vec<BlockSizes>) -> Self {
        let mut out = self.clone();
        out.blocks = BlockStructure::from_sizes(sizes);
        out
    }

    /// Multiplies every finite size by `factor` (rounded, at least 1).
    pub fn scaled(&self, factor: f64) -> Result<Self, ValidationErrors> {
        let sizes = self
            .blocks
            .finite_sizes
            .as_ref()
            .ok_or_else(|| ValidationErrors(vec![ModelError::MissingFiniteSizes]))?;
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(ValidationErrors(vec![ModelError::BadParameter(format!(
                "scale factor must be positive, got {factor}"
            ))]));
        }
        let scale = |n: usize| ((n as f64 * factor).round() as usize).max(1);
        let sizes = sizes
            .iter()
            .map(|s| BlockSizes {
                central: scale(s.central),
                peripheral: scale(s.peripheral),
            })
            .collect();
        self.with_finite_sizes(sizes)
    }

    /// Uniform empirical vector of this model.
    pub fn uniform(&self) -> EmpiricalVector {
        EmpiricalVector::uniform(self.r(), self.k())
    }

    fn check_shape(&self, q: &EmpiricalVector) -> Result<(), ModelError> {
        if q.k() != self.k() || q.n_classes() != self.n_classes() {
            return Err(ModelError::SizeMismatch(format!(
                "expected {} components of length {}, got {} of length {}",
                self.n_classes(),
                self.k(),
                q.n_classes(),
                q.k()
            )));
        }
        Ok(())
    }

    /// Checks that `q` is a valid empirical vector for this model.
    pub fn check_empirical(&self, q: &EmpiricalVector) -> Result<(), ModelError> {
        self.check_shape(q)?;
        q.check()
    }
}

/// Returns the model if every invariant holds, otherwise all violations.
pub fn validate_model(spec: ModelSpec) -> Result<ModelSpec, ValidationErrors> {
    let k = spec.state_space.k();
    let mut errors = spec.state_space.violations();
    errors.extend(spec.interaction.violations(k));
    errors.extend(spec.blocks.violations());
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(ValidationErrors(errors))
    }
}

/// Local empirical measures of a configuration.
pub fn empirical_vector(spec: &ModelSpec, x: &Configuration) -> Result<EmpiricalVector> {
    check_configuration(spec, x)?;
    let k = spec.k();
    let mut data = Vec::with_capacity(spec.n_classes() * k);
    for (c, counts) in x.counts(k).into_iter().enumerate() {
        let n = x.class_sizes()[c] as f64;
        data.extend(counts.into_iter().map(|m| m as f64 / n));
    }
    Ok(EmpiricalVector::from_flat_unchecked(k, data))
}

/// Errors unless `x` has the model's class sizes and only valid states.
pub fn check_configuration(spec: &ModelSpec, x: &Configuration) -> Result<(), ModelError> {
    let sizes = spec.class_sizes()?;
    if x.class_sizes() != sizes.as_slice() {
        return Err(ModelError::SizeMismatch(format!(
            "configuration class sizes {:?} differ from model sizes {:?}",
            x.class_sizes(),
            sizes
        )));
    }
    if let Some(z) = x.states().iter().find(|&&z| z >= spec.k()) {
        return Err(ModelError::SizeMismatch(format!(
            "state {} outside 1..={}",
            z + 1,
            spec.k()
        )));
    }
    Ok(())
}

/// Draws every node of class `(j, iota)` independently from `nu^{j,iota}`.
pub fn sample_initial_configuration(
    spec: &ModelSpec,
    nu: &EmpiricalVector,
    seed: u64,
) -> Result<Configuration> {
    spec.check_empirical(nu)?;
    let sizes = spec.class_sizes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = sizes
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let law = nu.component(c);
            (0..n).map(|_| draw_state(law, &mut rng)).collect()
        })
        .collect();
    Ok(Configuration::from_classes(classes))
}

/// Deterministic configuration whose class counts round `nu` by largest
/// remainder, so the empirical vector is as close to `nu` as the sizes allow.
pub fn quantized_configuration(spec: &ModelSpec, nu: &EmpiricalVector) -> Result<Configuration> {
    spec.check_empirical(nu)?;
    let sizes = spec.class_sizes()?;
    let classes = sizes
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let counts = largest_remainder(nu.component(c), n);
            counts
                .iter()
                .enumerate()
                .flat_map(|(z, &m)| std::iter::repeat_n(z, m))
                .collect()
        })
        .collect();
    Ok(Configuration::from_classes(classes))
}

fn largest_remainder(p: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|x| x * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut rest = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &z in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[z] += 1;
        rest -= 1;
    }
    counts
}

pub(crate) fn draw_state(law: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (z, &p) in law.iter().enumerate() {
        acc += p;
        if u < acc {
            return z;
        }
    }
    // Round-off: fall back to the last state with positive mass.
    law.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Two-state model with `W = [[0,1],[1,0]]`, `r` blocks and the given
/// finite class sizes.
pub fn two_state_antiferro(beta: f64, sizes: Vec<BlockSizes>) -> ModelSpec {
    ModelSpec::new(
        StateSpace::complete(2),
        InteractionModel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], beta),
        BlockStructure::from_sizes(sizes),
    )
    .expect("two-state model is valid")
}

/// The two-block, two-state instance with every proportion equal to 1/2 and
/// one node per class.
pub fn example_model(beta: f64) -> ModelSpec {
    two_state_antiferro(
        beta,
        vec![
            BlockSizes {
                central: 1,
                peripheral: 1,
            };
            2
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props(a: f64, pc: f64) -> BlockProportions {
        BlockProportions {
            alpha: a,
            central: pc,
            peripheral: 1.0 - pc,
        }
    }

    fn example_parts() -> (StateSpace, InteractionModel) {
        (
            StateSpace::complete(2),
            InteractionModel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 4.0),
        )
    }

    #[test]
    fn example_is_valid() {
        let (s, i) = example_parts();
        let spec = ModelSpec::new(
            s,
            i,
            BlockStructure::from_proportions(vec![props(0.5, 0.5), props(0.5, 0.5)]),
        )
        .unwrap();
        assert_eq!(spec.class_weight(ClassId::peripheral(1)), 0.25);
    }

    #[test]
    fn one_way_edge_is_rejected() {
        let (_, i) = example_parts();
        let err = ModelSpec::new(
            StateSpace::new(2, vec![(0, 1)]),
            i,
            BlockStructure::from_proportions(vec![props(1.0, 0.5)]),
        )
        .unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::AsymmetricEdges(_))));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let (s, i) = example_parts();
        let err = ModelSpec::new(
            s,
            i,
            BlockStructure::from_proportions(vec![props(0.6, 0.5), props(0.6, 0.5)]),
        )
        .unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::BadProportions(_))));
    }

    #[test]
    fn collects_every_violation() {
        let s = StateSpace::new(3, vec![(0, 1), (1, 0)]);
        let i = InteractionModel::new(vec![vec![0.0, 1.0, 0.0], vec![2.0, 0.0, 0.0], vec![0.0; 3]], -1.0);
        let err = ModelSpec::new(
            s,
            i,
            BlockStructure::from_sizes(vec![BlockSizes {
                central: 0,
                peripheral: 2,
            }]),
        )
        .unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::ReducibleJumpGraph(_))));
        assert!(err.contains(|e| matches!(e, ModelError::AsymmetricW { row: 1, col: 2 })));
        assert!(err.contains(|e| matches!(e, ModelError::BadParameter(_))));
        assert!(err.contains(|e| matches!(e, ModelError::BadSizes(_))));
    }

    #[test]
    fn explicit_proportions_must_match_sizes() {
        let (s, i) = example_parts();
        let mut blocks = BlockStructure::from_sizes(vec![
            BlockSizes {
                central: 1,
                peripheral: 3,
            },
            BlockSizes {
                central: 2,
                peripheral: 2,
            },
        ]);
        assert!(ModelSpec::new(s.clone(), i.clone(), blocks.clone()).is_ok());
        blocks.limit_proportions[0].central = 0.3;
        blocks.limit_proportions[0].peripheral = 0.7;
        assert!(ModelSpec::new(s, i, blocks).is_err());
    }

    #[test]
    fn validation_is_idempotent() {
        let spec = example_model(4.0);
        let again = validate_model(spec.clone()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn empirical_vector_counts() {
        let spec = two_state_antiferro(
            4.0,
            vec![BlockSizes {
                central: 1,
                peripheral: 1,
            }],
        );
        let x = Configuration::from_classes(vec![vec![0], vec![0]]);
        let q = empirical_vector(&spec, &x).unwrap();
        assert_eq!(q.components(), vec![vec![1.0, 0.0], vec![1.0, 0.0]]);

        let spec = two_state_antiferro(
            4.0,
            vec![BlockSizes {
                central: 2,
                peripheral: 1,
            }],
        );
        let x = Configuration::from_classes(vec![vec![0, 1], vec![1]]);
        let q = empirical_vector(&spec, &x).unwrap();
        assert_eq!(q.component(0), &[0.5, 0.5]);

        let bad = Configuration::from_classes(vec![vec![0], vec![1]]);
        assert!(matches!(
            empirical_vector(&spec, &bad),
            Err(Error::Model(ModelError::SizeMismatch(_)))
        ));
    }

    #[test]
    fn degenerate_law_and_determinism() {
        let spec = example_model(4.0).scaled(7.0).unwrap();
        let delta = EmpiricalVector::delta(2, 2, 0);
        let x = sample_initial_configuration(&spec, &delta, 3).unwrap();
        assert!(x.states().iter().all(|&z| z == 0));
        let u = spec.uniform();
        assert_eq!(
            sample_initial_configuration(&spec, &u, 11).unwrap(),
            sample_initial_configuration(&spec, &u, 11).unwrap()
        );
    }

    #[test]
    fn quantized_configuration_hits_counts() {
        let spec = example_model(4.0).scaled(50.0).unwrap();
        let nu = EmpiricalVector::repeated(2, &[0.7, 0.3]).unwrap();
        let x = quantized_configuration(&spec, &nu).unwrap();
        let q = empirical_vector(&spec, &x).unwrap();
        assert!(q.max_norm_distance(&nu) < 1e-15);
    }

    #[test]
    fn scaling_keeps_proportions() {
        let spec = example_model(4.0).scaled(100.0).unwrap();
        assert_eq!(spec.total_nodes().unwrap(), 400);
        assert_eq!(spec.blocks.limit_proportions[1].alpha, 0.5);
        let s = spec.sized_for_total(3200).unwrap();
        assert_eq!(s.class_sizes().unwrap(), vec![800; 4]);
    }
}
