//! Total energy of a configuration and the closed-form single-flip
//! energy differences.
//!
//! The energy sums `W` over ordered pairs: a central node of block `j` sees
//! every node of block `j`, a peripheral node sees the central nodes of its
//! own block and every peripheral node of the graph. Self-pairs are included.

use crate::error::{Error, ModelError, Result};
use crate::model::{check_configuration, empirical_vector, ClassId, Configuration, EmpiricalVector, ModelSpec, Role};

/// Move of one node from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipProposal {
    pub class: ClassId,
    /// Position of the node within its class.
    pub index: usize,
    pub from: usize,
    pub to: usize,
}

impl FlipProposal {
    pub fn new(class: ClassId, index: usize, from: usize, to: usize) -> Self {
        Self {
            class,
            index,
            from,
            to,
        }
    }

    /// The reverse move, valid on `apply_flip(x, self)`.
    pub fn reversed(self) -> Self {
        Self {
            from: self.to,
            to: self.from,
            ..self
        }
    }
}

/// `U_N(x)` by the literal pair sums.
pub fn total_energy(spec: &ModelSpec, x: &Configuration) -> Result<f64> {
    check_configuration(spec, x)?;
    let n = x.n_nodes() as f64;
    let r = spec.r();
    let peripheral: Vec<usize> = (0..r)
        .flat_map(|l| x.class_states(ClassId::peripheral(l)).iter().copied())
        .collect();
    let mut pairs = 0.0;
    for j in 0..r {
        let central = x.class_states(ClassId::central(j));
        let own_peripheral = x.class_states(ClassId::peripheral(j));
        for &xi in central {
            for &xk in central.iter().chain(own_peripheral) {
                pairs += spec.w(xi, xk);
            }
        }
        for &xi in own_peripheral {
            for &xk in central.iter().chain(&peripheral) {
                pairs += spec.w(xi, xk);
            }
        }
    }
    let potential: f64 = x.states().iter().map(|&z| spec.interaction.v(z)).sum();
    Ok(potential + spec.beta() / (2.0 * n) * pairs)
}

/// `U_N` from per-class state counts. Agrees with [`total_energy`] for any
/// configuration with these counts.
pub fn energy_from_counts(spec: &ModelSpec, counts: &[Vec<usize>]) -> f64 {
    let k = spec.k();
    let r = spec.r();
    let n: usize = counts.iter().flatten().sum();
    let mut all_p = vec![0.0; k];
    for l in 0..r {
        for (a, &m) in all_p.iter_mut().zip(&counts[2 * l + 1]) {
            *a += m as f64;
        }
    }
    let mut pairs = 0.0;
    let mut potential = 0.0;
    for j in 0..r {
        let (nc, np) = (&counts[2 * j], &counts[2 * j + 1]);
        for z in 0..k {
            potential += (nc[z] + np[z]) as f64 * spec.interaction.v(z);
            let (mut own, mut cross) = (0.0, 0.0);
            for x in 0..k {
                let w = spec.w(z, x);
                own += w * (nc[x] + np[x]) as f64;
                cross += w * (nc[x] as f64 + all_p[x]);
            }
            pairs += nc[z] as f64 * own + np[z] as f64 * cross;
        }
    }
    potential + spec.beta() / (2.0 * n as f64) * pairs
}

/// Finite-N energy change for a central node of block `j` moving `z -> z2`,
/// leading part. `a` and `b1` stand for the class sizes `N_j^c`, `N_j^p`.
pub fn psi_c_finite(
    spec: &ModelSpec,
    z: usize,
    z2: usize,
    q: &EmpiricalVector,
    j: usize,
    a: f64,
    b1: f64,
) -> f64 {
    let n = spec.total_nodes().map_or(f64::NAN, |n| n as f64);
    psi_c_with_n(spec, n, z, z2, q, j, a, b1)
}

pub(crate) fn psi_c_with_n(
    spec: &ModelSpec,
    n: f64,
    z: usize,
    z2: usize,
    q: &EmpiricalVector,
    j: usize,
    a: f64,
    b1: f64,
) -> f64 {
    if z == z2 {
        return 0.0;
    }
    let qc = q.class(ClassId::central(j));
    let qp = q.class(ClassId::peripheral(j));
    let mut sc = 0.0;
    let mut sp = 0.0;
    for x in 0..spec.k() {
        sc += (spec.w(x, z2) - spec.w(x, z)) * qc[x];
        sp += (spec.w(z2, x) - spec.w(z, x)) * qp[x];
    }
    spec.beta() / n * (a * sc + b1 * sp)
}

/// Peripheral counterpart of [`psi_c_finite`]; `b[l]` stands for `N_l^p`.
pub fn psi_p_finite(
    spec: &ModelSpec,
    z: usize,
    z2: usize,
    q: &EmpiricalVector,
    j: usize,
    a: f64,
    b: &[f64],
) -> f64 {
    let n = spec.total_nodes().map_or(f64::NAN, |n| n as f64);
    psi_p_with_n(spec, n, z, z2, q, j, a, b)
}

pub(crate) fn psi_p_with_n(
    spec: &ModelSpec,
    n: f64,
    z: usize,
    z2: usize,
    q: &EmpiricalVector,
    j: usize,
    a: f64,
    b: &[f64],
) -> f64 {
    if z == z2 {
        return 0.0;
    }
    let qc = q.class(ClassId::central(j));
    let mut total = 0.0;
    for x in 0..spec.k() {
        total += a * (spec.w(z2, x) - spec.w(z, x)) * qc[x];
    }
    for (l, &bl) in b.iter().enumerate() {
        let qp = q.class(ClassId::peripheral(l));
        let mut s = 0.0;
        for x in 0..spec.k() {
            s += (spec.w(x, z2) - spec.w(x, z)) * qp[x];
        }
        total += bl * s;
    }
    spec.beta() / n * total
}

/// Remainder of the single-flip energy change beyond the `psi` term.
///
/// The moving node interacts with itself, which the `psi` term counts at the
/// old state only. The remainder is `beta/(2N) (W(z2,z2) + W(z,z) - 2 W(z,z2))`
/// for both roles: the set of partners of a peripheral node is closed under
/// the partner relation exactly as for a central node.
pub fn b_correction(spec: &ModelSpec, role: Role, z: usize, z2: usize) -> Result<f64, ModelError> {
    let n = spec.total_nodes()? as f64;
    Ok(b_with_n(spec, n, role, z, z2))
}

pub(crate) fn b_with_n(spec: &ModelSpec, n: f64, _role: Role, z: usize, z2: usize) -> f64 {
    spec.beta() / (2.0 * n) * (spec.w(z2, z2) + spec.w(z, z) - 2.0 * spec.w(z, z2))
}

fn check_flip(spec: &ModelSpec, x: &Configuration, flip: &FlipProposal) -> Result<()> {
    let bad = |msg: String| Err(Error::InconsistentFlip(msg));
    if flip.class.block >= spec.r() {
        return bad(format!("block {} does not exist", flip.class.block + 1));
    }
    let size = x.class_sizes()[flip.class.index()];
    if flip.index >= size {
        return bad(format!(
            "node {} outside class {} of size {size}",
            flip.index, flip.class
        ));
    }
    if flip.from == flip.to {
        return bad(format!("{} -> {} is not a jump", flip.from + 1, flip.to + 1));
    }
    if flip.from >= spec.k() || flip.to >= spec.k() || !spec.allowed(flip.from, flip.to) {
        return bad(format!(
            "{} -> {} is not an edge",
            flip.from + 1,
            flip.to + 1
        ));
    }
    let current = x.state(flip.class, flip.index);
    if current != flip.from {
        return bad(format!(
            "node is in state {}, not {}",
            current + 1,
            flip.from + 1
        ));
    }
    Ok(())
}

/// `U_N(y) - U_N(x)` for `y = apply_flip(x, flip)`, from the empirical vector
/// of `x` alone.
pub fn energy_difference(spec: &ModelSpec, x: &Configuration, flip: &FlipProposal) -> Result<f64> {
    let q = empirical_vector(spec, x)?;
    check_flip(spec, x, flip)?;
    let n = x.n_nodes() as f64;
    let j = flip.class.block;
    let (z, z2) = (flip.from, flip.to);
    let nc = spec.class_size(ClassId::central(j))? as f64;
    let psi = match flip.class.role {
        Role::Central => {
            let np = spec.class_size(ClassId::peripheral(j))? as f64;
            psi_c_with_n(spec, n, z, z2, &q, j, nc, np)
        }
        Role::Peripheral => {
            let b = peripheral_sizes(spec)?;
            psi_p_with_n(spec, n, z, z2, &q, j, nc, &b)
        }
    };
    let dv = spec.interaction.v(z2) - spec.interaction.v(z);
    Ok(psi + b_with_n(spec, n, flip.class.role, z, z2) + dv)
}

pub(crate) fn peripheral_sizes(spec: &ModelSpec) -> Result<Vec<f64>, ModelError> {
    (0..spec.r())
        .map(|l| spec.class_size(ClassId::peripheral(l)).map(|s| s as f64))
        .collect()
}

/// The configuration after `flip`.
pub fn apply_flip(spec: &ModelSpec, x: &Configuration, flip: &FlipProposal) -> Result<Configuration> {
    check_configuration(spec, x)?;
    check_flip(spec, x, flip)?;
    let mut y = x.clone();
    y.set_state(flip.class, flip.index, flip.to);
    Ok(y)
}
