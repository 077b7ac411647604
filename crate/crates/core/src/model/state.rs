//! Particle configurations and the macroscopic state built from them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Tolerance on the unit sum of each probability component.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Position of a node inside its block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Connected to every node of its own block only.
    Central,
    /// Connected to its own block and to every peripheral node of other blocks.
    Peripheral,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Central, Role::Peripheral];

    pub fn tag(self) -> char {
        match self {
            Role::Central => 'c',
            Role::Peripheral => 'p',
        }
    }
}

/// One of the `2r` node classes `(block, role)`. Blocks are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId {
    pub block: usize,
    pub role: Role,
}

impl ClassId {
    pub fn new(block: usize, role: Role) -> Self {
        Self { block, role }
    }

    pub fn central(block: usize) -> Self {
        Self::new(block, Role::Central)
    }

    pub fn peripheral(block: usize) -> Self {
        Self::new(block, Role::Peripheral)
    }

    /// Flat index in the order `(1,c),(1,p),...,(r,c),(r,p)`.
    pub fn index(self) -> usize {
        2 * self.block
            + match self.role {
                Role::Central => 0,
                Role::Peripheral => 1,
            }
    }

    pub fn from_index(index: usize) -> Self {
        let role = if index % 2 == 0 {
            Role::Central
        } else {
            Role::Peripheral
        };
        Self::new(index / 2, role)
    }

    /// All classes of an `r`-block system in canonical order.
    pub fn all(r: usize) -> impl Iterator<Item = ClassId> {
        (0..2 * r).map(ClassId::from_index)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.block + 1, self.role.tag())
    }
}

/// States of all `N` nodes, stored class by class in canonical class order.
///
/// States are 0-based indices into the state space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    class_sizes: Vec<usize>,
    offsets: Vec<usize>,
    states: Vec<usize>,
}

impl Configuration {
    /// Builds a configuration from per-class state lists.
    pub fn from_classes(classes: Vec<Vec<usize>>) -> Self {
        let class_sizes: Vec<usize> = classes.iter().map(Vec::len).collect();
        let states = classes.into_iter().flatten().collect();
        Self::from_flat(class_sizes, states)
    }

    /// Builds a configuration from a flat state list and the class sizes.
    ///
    /// # Panics
    /// If the sizes do not add up to the number of states.
    pub fn from_flat(class_sizes: Vec<usize>, states: Vec<usize>) -> Self {
        assert_eq!(
            class_sizes.iter().sum::<usize>(),
            states.len(),
            "class sizes do not match the number of node states"
        );
        let mut offsets = Vec::with_capacity(class_sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in &class_sizes {
            acc += s;
            offsets.push(acc);
        }
        Self {
            class_sizes,
            offsets,
            states,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.states.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_sizes.len()
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn class_states(&self, class: ClassId) -> &[usize] {
        let c = class.index();
        &self.states[self.offsets[c]..self.offsets[c + 1]]
    }

    pub fn state(&self, class: ClassId, index: usize) -> usize {
        self.class_states(class)[index]
    }

    /// Flat position of node `index` of `class`.
    pub fn node_position(&self, class: ClassId, index: usize) -> usize {
        self.offsets[class.index()] + index
    }

    /// Class of the node at flat position `pos`.
    pub fn class_of_position(&self, pos: usize) -> ClassId {
        let c = self.offsets.partition_point(|&o| o <= pos) - 1;
        ClassId::from_index(c)
    }

    pub(crate) fn set_state(&mut self, class: ClassId, index: usize, state: usize) {
        let pos = self.node_position(class, index);
        self.states[pos] = state;
    }

    /// Per-class state counts, `counts[class][z]`.
    pub fn counts(&self, k: usize) -> Vec<Vec<usize>> {
        (0..self.n_classes())
            .map(|c| {
                let mut n = vec![0; k];
                for &z in self.class_states(ClassId::from_index(c)) {
                    n[z] += 1;
                }
                n
            })
            .collect()
    }
}

/// `2r` probability vectors of length `K`, one per class, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVector {
    k: usize,
    data: Vec<f64>,
}

impl EmpiricalVector {
    /// Builds a validated empirical vector from its components.
    pub fn from_components(components: &[Vec<f64>]) -> Result<Self, ModelError> {
        let k = components.first().map_or(0, Vec::len);
        if k == 0 || components.len() % 2 != 0 {
            return Err(ModelError::SizeMismatch(format!(
                "expected an even number of non-empty components, got {}",
                components.len()
            )));
        }
        if components.iter().any(|c| c.len() != k) {
            return Err(ModelError::SizeMismatch(
                "components have different lengths".into(),
            ));
        }
        let data = components.iter().flatten().copied().collect();
        let q = Self { k, data };
        q.check()?;
        Ok(q)
    }

    /// Wraps flat data without checking the simplex constraints.
    ///
    /// Used for perturbed points in finite-difference stencils.
    pub fn from_flat_unchecked(k: usize, data: Vec<f64>) -> Self {
        debug_assert!(k > 0 && data.len() % (2 * k) == 0);
        Self { k, data }
    }

    pub fn uniform(r: usize, k: usize) -> Self {
        Self {
            k,
            data: vec![1.0 / k as f64; 2 * r * k],
        }
    }

    /// Every class concentrated on state `z`.
    pub fn delta(r: usize, k: usize, z: usize) -> Self {
        let mut data = vec![0.0; 2 * r * k];
        for c in 0..2 * r {
            data[c * k + z] = 1.0;
        }
        Self { k, data }
    }

    /// The same distribution in every class.
    pub fn repeated(r: usize, component: &[f64]) -> Result<Self, ModelError> {
        let comps = vec![component.to_vec(); 2 * r];
        Self::from_components(&comps)
    }

    /// Checks non-negativity and unit sums.
    pub fn check(&self) -> Result<(), ModelError> {
        for c in 0..self.n_classes() {
            let comp = self.component(c);
            if let Some(x) = comp.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                return Err(ModelError::NotProbability(format!(
                    "component {} has entry {x}",
                    ClassId::from_index(c)
                )));
            }
            let s: f64 = comp.iter().sum();
            if (s - 1.0).abs() > SUM_TOLERANCE {
                return Err(ModelError::NotProbability(format!(
                    "component {} sums to {s}",
                    ClassId::from_index(c)
                )));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_classes(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn n_blocks(&self) -> usize {
        self.n_classes() / 2
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.data[c * self.k..(c + 1) * self.k]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.k..(c + 1) * self.k]
    }

    pub fn class(&self, class: ClassId) -> &[f64] {
        self.component(class.index())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn components(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_norm_distance(&self, other: &Self) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }

    /// `self + h * v`, without re-projection onto the simplex.
    pub fn shifted(&self, v: &TangentVector, h: f64) -> Self {
        let data = self
            .data
            .iter()
            .zip(v.as_slice())
            .map(|(q, d)| q + h * d)
            .collect();
        Self { k: self.k, data }
    }

    /// Applies the state permutation `perm` to every component.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for c in 0..self.n_classes() {
            let src = self.component(c);
            let dst = out.component_mut(c);
            for (z, &pz) in perm.iter().enumerate() {
                dst[pz] = src[z];
            }
        }
        out
    }
}

/// Element of the tangent space `H^0`: every component sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    k: usize,
    data: Vec<f64>,
}

impl TangentVector {
    pub fn zeros(r: usize, k: usize) -> Self {
        Self {
            k,
            data: vec![0.0; 2 * r * k],
        }
    }

    pub fn from_flat(k: usize, data: Vec<f64>) -> Self {
        debug_assert!(k > 0 && data.len() % k == 0);
        Self { k, data }
    }

    /// `e_x - e_y` in every component.
    pub fn pairwise(r: usize, k: usize, x: usize, y: usize) -> Self {
        let mut v = Self::zeros(r, k);
        for c in 0..2 * r {
            v.data[c * k + x] += 1.0;
            v.data[c * k + y] -= 1.0;
        }
        v
    }

    /// Largest deviation of a component sum from zero.
    pub fn sum_defect(&self) -> f64 {
        self.data
            .chunks(self.k)
            .map(|c| c.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.data[c * self.k..(c + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.data.iter_mut().for_each(|x| *x *= s);
        self
    }
}

/// Time-stamped path of empirical vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<EmpiricalVector>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, q: EmpiricalVector) {
        self.times.push(t);
        self.values.push(q);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&EmpiricalVector> {
        self.values.last()
    }

    /// Sample-wise mean of several trajectories sharing the same time grid.
    ///
    /// # Panics
    /// If `runs` is empty or the time grids differ.
    pub fn mean(runs: &[Trajectory]) -> Trajectory {
        let first = &runs[0];
        let mut out = Trajectory::with_capacity(first.len());
        for (i, &t) in first.times.iter().enumerate() {
            let k = first.values[i].k();
            let mut acc = vec![0.0; first.values[i].as_slice().len()];
            for run in runs {
                assert_eq!(run.times[i], t, "trajectories use different time grids");
                for (a, x) in acc.iter_mut().zip(run.values[i].as_slice()) {
                    *a += x;
                }
            }
            acc.iter_mut().for_each(|a| *a /= runs.len() as f64);
            out.push(t, EmpiricalVector::from_flat_unchecked(k, acc));
        }
        out
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
