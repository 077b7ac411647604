//! Mean-field limit: per-class rate matrices frozen at an empirical vector,
//! their stationary laws, and the ODE `dq/dt = q A_q`.
//!
//! A non-zero potential `V` enters every energy change as `V(z') - V(z)` and
//! every stationary law as an extra `V(z)` in the exponent, matching the
//! finite system.

use crate::error::{Error, Result};
use crate::finite_system::metropolis;
use crate::model::{ClassId, EmpiricalVector, ModelSpec, Role, TangentVector, Trajectory};

/// Default ODE step.
pub const DEFAULT_DT: f64 = 1e-2;
/// Largest negative entry tolerated after a step before clamping.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-9;

/// Energy a node of `class` would have in each state, such that
/// `psi(z, z') = e[z'] - e[z]`.
fn class_energy(spec: &ModelSpec, q: &EmpiricalVector, class: ClassId) -> Vec<f64> {
    let k = spec.k();
    let j = class.block;
    let p = &spec.blocks.limit_proportions[j];
    let (wc, wp) = (p.alpha * p.central, p.alpha * p.peripheral);
    let qc = q.class(ClassId::central(j));
    let beta = spec.beta();
    (0..k)
        .map(|z| {
            let mut e = 0.0;
            match class.role {
                Role::Central => {
                    let qp = q.class(ClassId::peripheral(j));
                    for x in 0..k {
                        e += wc * spec.w(x, z) * qc[x] + wp * spec.w(z, x) * qp[x];
                    }
                }
                Role::Peripheral => {
                    for x in 0..k {
                        e += wc * spec.w(z, x) * qc[x];
                    }
                    for l in 0..spec.r() {
                        let pl = &spec.blocks.limit_proportions[l];
                        let ql = q.class(ClassId::peripheral(l));
                        for x in 0..k {
                            e += pl.alpha * pl.peripheral * spec.w(x, z) * ql[x];
                        }
                    }
                }
            }
            beta * e + spec.interaction.v(z)
        })
        .collect()
}

/// Limit energy change for a `class` node moving `z -> z2`.
pub fn limit_psi(spec: &ModelSpec, q: &EmpiricalVector, class: ClassId, z: usize, z2: usize) -> f64 {
    if z == z2 {
        return 0.0;
    }
    let e = class_energy(spec, q, class);
    e[z2] - e[z]
}

/// `exp(-psi^+) a(z, z2)`.
pub fn limit_rate(spec: &ModelSpec, q: &EmpiricalVector, class: ClassId, z: usize, z2: usize) -> f64 {
    if z == z2 || !spec.allowed(z, z2) {
        return 0.0;
    }
    metropolis(limit_psi(spec, q, class, z, z2))
}

/// A `K x K` rate matrix with zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl GeneratorMatrix {
    /// Off-diagonal rates from `rate`; the diagonal makes rows sum to zero.
    pub fn from_rates(k: usize, rate: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; k * k];
        for z in 0..k {
            let mut out = 0.0;
            for z2 in (0..k).filter(|&z2| z2 != z) {
                let r = rate(z, z2);
                entries[z * k + z2] = r;
                out += r;
            }
            entries[z * k + z] = -out;
        }
        Self { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, z: usize, z2: usize) -> f64 {
        self.entries[z * self.k + z2]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    /// Largest absolute row sum.
    pub fn row_sum_defect(&self) -> f64 {
        self.entries
            .chunks(self.k)
            .map(|row| row.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Row vector `p` times the matrix.
    pub fn left_apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (z, &pz) in p.iter().enumerate() {
            for (z2, o) in out.iter_mut().enumerate() {
                *o += pz * self.get(z, z2);
            }
        }
        out
    }
}

/// `A^{class}_q`.
pub fn generator(spec: &ModelSpec, q: &EmpiricalVector, class: ClassId) -> GeneratorMatrix {
    let e = class_energy(spec, q, class);
    GeneratorMatrix::from_rates(spec.k(), |z, z2| {
        if spec.allowed(z, z2) {
            metropolis(e[z2] - e[z])
        } else {
            0.0
        }
    })
}

/// Stationary law of `A^{class}_q`, a softmax of minus the class energy.
pub fn stationary_map(spec: &ModelSpec, q: &EmpiricalVector, class: ClassId) -> Vec<f64> {
    let k = spec.k();
    let j = class.block;
    let p = &spec.blocks.limit_proportions[j];
    let qc = q.class(ClassId::central(j));
    let exponent: Vec<f64> = (0..k)
        .map(|z| {
            let mut e = 0.0;
            for x in 0..k {
                e += p.alpha * p.central * spec.w(x, z) * qc[x];
            }
            match class.role {
                Role::Central => {
                    let qp = q.class(ClassId::peripheral(j));
                    for x in 0..k {
                        e += p.alpha * p.peripheral * spec.w(x, z) * qp[x];
                    }
                }
                Role::Peripheral => {
                    for l in 0..spec.r() {
                        let pl = &spec.blocks.limit_proportions[l];
                        let ql = q.class(ClassId::peripheral(l));
                        for x in 0..k {
                            e += pl.alpha * pl.peripheral * spec.w(x, z) * ql[x];
                        }
                    }
                }
            }
            -(spec.beta() * e + spec.interaction.v(z))
        })
        .collect();
    softmax(&exponent)
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// `pi(q)`: the stationary law of every class.
pub fn stationary_vector(spec: &ModelSpec, q: &EmpiricalVector) -> EmpiricalVector {
    let data = spec
        .classes()
        .flat_map(|c| stationary_map(spec, q, c))
        .collect();
    EmpiricalVector::from_flat_unchecked(spec.k(), data)
}

/// Right-hand side of the limit ODE: component `c` is `q^c A^c_q`.
pub fn vector_field(spec: &ModelSpec, q: &EmpiricalVector) -> TangentVector {
    let k = spec.k();
    let mut out = vec![0.0; q.as_slice().len()];
    for class in spec.classes() {
        let c = class.index();
        let e = class_energy(spec, q, class);
        let qc = q.component(c);
        let dst = &mut out[c * k..(c + 1) * k];
        for z in 0..k {
            for z2 in (0..k).filter(|&z2| z2 != z && spec.allowed(z, z2)) {
                let flow = qc[z] * metropolis(e[z2] - e[z]);
                dst[z2] += flow;
                dst[z] -= flow;
            }
        }
    }
    TangentVector::from_flat(k, out)
}

fn check_step(t: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("T must be finite and non-negative, got {t}")));
    }
    Ok(())
}

fn n_steps(t: f64, dt: f64) -> usize {
    ((t / dt) - 1e-9).ceil().max(0.0) as usize
}

/// One classical RK4 step followed by clamping and renormalization.
fn rk4_step(spec: &ModelSpec, q: &EmpiricalVector, dt: f64, time: f64) -> Result<EmpiricalVector> {
    let k1 = vector_field(spec, q);
    let k2 = vector_field(spec, &q.shifted(&k1, dt / 2.0));
    let k3 = vector_field(spec, &q.shifted(&k2, dt / 2.0));
    let k4 = vector_field(spec, &q.shifted(&k3, dt));
    let mut data: Vec<f64> = q.as_slice().to_vec();
    for (i, x) in data.iter_mut().enumerate() {
        *x += dt / 6.0
            * (k1.as_slice()[i] + 2.0 * k2.as_slice()[i] + 2.0 * k3.as_slice()[i] + k4.as_slice()[i]);
    }
    let min = data.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVITY_TOLERANCE || !min.is_finite() {
        return Err(Error::StepTooLarge { time, entry: min });
    }
    let k = spec.k();
    for comp in data.chunks_mut(k) {
        comp.iter_mut().for_each(|x| *x = x.max(0.0));
        let s: f64 = comp.iter().sum();
        comp.iter_mut().for_each(|x| *x /= s);
    }
    Ok(EmpiricalVector::from_flat_unchecked(k, data))
}

/// Solves the limit ODE from `q0` with fixed-step RK4; samples at every
/// multiple of `dt` up to `t`.
pub fn integrate(spec: &ModelSpec, q0: &EmpiricalVector, t: f64, dt: f64) -> Result<Trajectory> {
    check_step(t, dt)?;
    spec.check_empirical(q0)?;
    let steps = n_steps(t, dt);
    let mut out = Trajectory::with_capacity(steps + 1);
    let mut q = q0.clone();
    out.push(0.0, q.clone());
    for i in 1..=steps {
        let time = i as f64 * dt;
        q = rk4_step(spec, &q, dt, time)?;
        out.push(time, q.clone());
    }
    Ok(out)
}

/// Final state of [`integrate`] without storing the path.
pub fn integrate_to(spec: &ModelSpec, q0: &EmpiricalVector, t: f64, dt: f64) -> Result<EmpiricalVector> {
    check_step(t, dt)?;
    spec.check_empirical(q0)?;
    let mut q = q0.clone();
    for i in 1..=n_steps(t, dt) {
        q = rk4_step(spec, &q, dt, i as f64 * dt)?;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{example_model, BlockProportions, BlockStructure, InteractionModel, StateSpace};
    use proptest::prelude::*;

    fn example() -> ModelSpec {
        example_model(4.0)
    }

    fn aligned() -> EmpiricalVector {
        EmpiricalVector::from_components(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn psi_and_rates_at_simple_points() {
        let spec = example();
        let u = spec.uniform();
        let c = ClassId::central(0);
        assert_eq!(limit_psi(&spec, &u, c, 0, 1), 0.0);
        assert_eq!(limit_psi(&spec, &aligned(), c, 0, 1), 2.0);
        assert_eq!(limit_psi(&spec, &aligned(), c, 1, 1), 0.0);
        assert!((limit_rate(&spec, &aligned(), c, 0, 1) - (-2.0f64).exp()).abs() < 1e-15);
        for class in spec.classes() {
            assert_eq!(limit_rate(&spec, &u, class, 0, 1), 1.0);
            assert_eq!(limit_rate(&spec, &u, class, 1, 0), 1.0);
        }
    }

    #[test]
    fn missing_edge_has_zero_rate() {
        let spec = ModelSpec::new(
            StateSpace::new(3, vec![(0, 1), (1, 0), (1, 2), (2, 1)]),
            InteractionModel::new(vec![vec![0.0, 1.0, 0.5], vec![1.0, 0.0, 1.0], vec![0.5, 1.0, 0.0]], 2.0),
            BlockStructure::from_proportions(vec![BlockProportions {
                alpha: 1.0,
                central: 0.3,
                peripheral: 0.7,
            }]),
        )
        .unwrap();
        let q = spec.uniform();
        assert_eq!(limit_rate(&spec, &q, ClassId::central(0), 0, 2), 0.0);
        assert_eq!(generator(&spec, &q, ClassId::peripheral(0)).get(2, 0), 0.0);
    }

    #[test]
    fn uniform_generator() {
        let spec = example();
        let a = generator(&spec, &spec.uniform(), ClassId::peripheral(1));
        assert_eq!(a.rows(), vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        assert_eq!(stationary_map(&spec, &spec.uniform(), ClassId::central(0)), vec![0.5, 0.5]);
    }

    #[test]
    fn zero_kernel_generator_ignores_q() {
        let mut spec = example();
        spec.interaction = InteractionModel::new(vec![vec![0.0; 2]; 2], 4.0);
        let a = generator(&spec, &aligned(), ClassId::central(0));
        let b = generator(&spec, &spec.uniform(), ClassId::central(0));
        assert_eq!(a, b);
    }

    #[test]
    fn weak_coupling_maps_to_uniform() {
        let mut spec = example();
        spec.interaction.beta = 1e-14;
        let pi = stationary_map(&spec, &aligned(), ClassId::peripheral(0));
        assert!((pi[0] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn uniform_is_at_rest() {
        let spec = example();
        let u = spec.uniform();
        assert_eq!(vector_field(&spec, &u).max_norm(), 0.0);
        let traj = integrate(&spec, &u, 10.0, DEFAULT_DT).unwrap();
        assert_eq!(traj.len(), 1001);
        assert!(traj.values.iter().all(|q| q.max_norm_distance(&u) < 1e-9));
    }

    #[test]
    fn relaxes_to_outer_fixed_point() {
        let spec = example();
        let q0 = EmpiricalVector::repeated(2, &[0.8, 0.2]).unwrap();
        let q = integrate_to(&spec, &q0, 50.0, DEFAULT_DT).unwrap();
        let want = [0.8039, 0.9015, 0.8039, 0.9015];
        for (c, w) in want.iter().enumerate() {
            assert!((q.component(c)[0] - w).abs() < 1e-3, "{:?}", q.components());
        }
        let fixed = stationary_vector(&spec, &q);
        assert!(vector_field(&spec, &fixed).max_norm() < 1e-8);
    }

    #[test]
    fn bad_steps_are_rejected() {
        let spec = example();
        let u = spec.uniform();
        assert!(matches!(integrate(&spec, &u, 1.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(integrate(&spec, &u, -1.0, 0.1), Err(Error::InvalidArgument(_))));
        let edge = EmpiricalVector::repeated(2, &[1.0, 0.0]).unwrap();
        // Free flipping relaxes at rate 2; RK4 with dt = 2 overshoots.
        let mut free = example();
        free.interaction = InteractionModel::new(vec![vec![0.0; 2]; 2], 4.0);
        assert!(matches!(integrate(&free, &edge, 4.0, 2.0), Err(Error::StepTooLarge { .. })));
    }

    pub(crate) fn interior(r: usize, k: usize) -> impl Strategy<Value = EmpiricalVector> {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, k), 2 * r).prop_map(|rows| {
            let comps: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|row| {
                    let s: f64 = row.iter().sum();
                    row.into_iter().map(|x| x / s).collect()
                })
                .collect();
            EmpiricalVector::from_flat_unchecked(comps[0].len(), comps.concat())
        })
    }

    proptest! {
        #[test]
        fn rows_and_components_sum_to_zero(q in interior(2, 2)) {
            let spec = example();
            for class in spec.classes() {
                prop_assert!(generator(&spec, &q, class).row_sum_defect() < 1e-12);
            }
            prop_assert!(vector_field(&spec, &q).sum_defect() < 1e-12);
        }

        #[test]
        fn stationary_map_is_invariant_and_positive(q in interior(2, 2)) {
            let spec = example();
            for class in spec.classes() {
                let pi = stationary_map(&spec, &q, class);
                prop_assert!(pi.iter().all(|&p| p > 0.0));
                let residual = generator(&spec, &q, class).left_apply(&pi);
                prop_assert!(residual.iter().all(|x| x.abs() < 1e-10));
            }
        }

        #[test]
        fn trajectories_stay_in_simplex(q0 in interior(2, 2)) {
            let spec = example();
            let traj = integrate(&spec, &q0, 5.0, DEFAULT_DT).unwrap();
            for q in &traj.values {
                prop_assert!(q.min_entry() >= 0.0);
                prop_assert!(q.check().is_ok());
            }
        }
    }
}
