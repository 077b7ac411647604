//! Relative entropy, the finite-`N` entropy functional and its limit `F`,
//! which decreases along the limit ODE.
//!
//! `F` is evaluated without its additive constant `C = lim (1/N) log Z_N`;
//! [`free_energy_constant`] estimates `C` separately.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::energy::energy_from_counts;
use crate::error::{Error, Result};
use crate::finite_system::exact_stationary;
use crate::limit_system::{stationary_vector, vector_field};
use crate::model::{ClassId, EmpiricalVector, ModelSpec, Role, TangentVector, Trajectory};

/// Entries below this are treated as lying on the simplex boundary.
pub const BOUNDARY_FLOOR: f64 = 1e-300;
/// Positive `dF/dt` above this is flagged by [`descent_monitor`].
pub const DESCENT_TOLERANCE: f64 = 1e-8;

/// `R(p || q) = sum p log(p/q)` with `0 log 0 = 0`; `+inf` if `p` is not
/// absolutely continuous with respect to `q`.
pub fn relative_entropy(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "relative entropy of vectors of different lengths");
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return f64::INFINITY;
        }
        total += a * (a / b).ln();
    }
    total
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn quad(spec: &ModelSpec, a: &[f64], b: &[f64]) -> f64 {
    let k = spec.k();
    let mut s = 0.0;
    for z in 0..k {
        let mut row = 0.0;
        for z2 in 0..k {
            row += spec.w(z, z2) * b[z2];
        }
        s += row * a[z];
    }
    s
}

/// Interaction part of `F`: the limit of `U_N / N` under independent
/// per-class laws `q`.
pub fn interaction_energy(spec: &ModelSpec, q: &EmpiricalVector) -> f64 {
    let r = spec.r();
    let props = &spec.blocks.limit_proportions;
    let mut total = 0.0;
    for j in 0..r {
        let p = &props[j];
        let qc = q.class(ClassId::central(j));
        let qp = q.class(ClassId::peripheral(j));
        let mut t = (p.alpha * p.central).powi(2) * quad(spec, qc, qc)
            + 2.0 * p.alpha * p.alpha * p.peripheral * p.central * quad(spec, qc, qp);
        for l in 0..r {
            let pl = &props[l];
            t += p.alpha * p.peripheral * pl.alpha * pl.peripheral * quad(spec, qp, q.class(ClassId::peripheral(l)));
        }
        total += spec.beta() / 2.0 * t;
    }
    let potential: f64 = spec
        .classes()
        .map(|c| {
            let v = spec.interaction.potential();
            spec.class_weight(c) * q.class(c).iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum();
    total + potential
}

/// `F(q) - C`. Defined on the closed simplex.
pub fn lyapunov_value(spec: &ModelSpec, q: &EmpiricalVector) -> f64 {
    let entropy: f64 = spec
        .classes()
        .map(|c| spec.class_weight(c) * q.class(c).iter().map(|&x| xlogx(x)).sum::<f64>())
        .sum();
    interaction_energy(spec, q) + entropy
}

fn check_interior(q: &EmpiricalVector) -> Result<()> {
    let m = q.min_entry();
    if !(m >= BOUNDARY_FLOOR) {
        return Err(Error::BoundaryPoint(m));
    }
    Ok(())
}

/// Closed-form partial derivatives `dF/dq^{j,iota}_x`, flat in class order.
pub fn lyapunov_gradient(spec: &ModelSpec, q: &EmpiricalVector) -> Result<Vec<f64>> {
    check_interior(q)?;
    let k = spec.k();
    let r = spec.r();
    let props = &spec.blocks.limit_proportions;
    let beta = spec.beta();
    let mut grad = vec![0.0; q.as_slice().len()];
    for class in spec.classes() {
        let j = class.block;
        let p = &props[j];
        let w = spec.class_weight(class);
        let qc = q.class(ClassId::central(j));
        let qp = q.class(ClassId::peripheral(j));
        let own = q.class(class);
        for x in 0..k {
            let mut field = 0.0;
            match class.role {
                Role::Central => {
                    for z in 0..k {
                        field += (p.alpha * p.central).powi(2) * spec.w(x, z) * qc[z]
                            + p.alpha * p.alpha * p.peripheral * p.central * spec.w(x, z) * qp[z];
                    }
                }
                Role::Peripheral => {
                    for z in 0..k {
                        field += p.alpha * p.alpha * p.peripheral * p.central * spec.w(z, x) * qc[z];
                    }
                    for l in 0..r {
                        let pl = &props[l];
                        let ql = q.class(ClassId::peripheral(l));
                        for z in 0..k {
                            field += p.alpha * p.peripheral * pl.alpha * pl.peripheral * spec.w(x, z) * ql[z];
                        }
                    }
                }
            }
            grad[class.index() * k + x] =
                beta * field + w * (spec.interaction.v(x) + own[x].ln() + 1.0);
        }
    }
    Ok(grad)
}

/// `sum dF/dq_x v_x` over all classes and states.
pub fn directional_derivative(spec: &ModelSpec, q: &EmpiricalVector, v: &TangentVector) -> Result<f64> {
    let grad = lyapunov_gradient(spec, q)?;
    Ok(grad.iter().zip(v.as_slice()).map(|(g, d)| g * d).sum())
}

/// Directional derivatives along `e_x - e_y` (same in every class) for all
/// `x < y`.
pub fn pairwise_derivatives(spec: &ModelSpec, q: &EmpiricalVector) -> Result<Vec<f64>> {
    let grad = lyapunov_gradient(spec, q)?;
    let k = spec.k();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for x in 0..k {
        for y in x + 1..k {
            let v = TangentVector::pairwise(spec.r(), k, x, y);
            out.push(grad.iter().zip(v.as_slice()).map(|(g, d)| g * d).sum());
        }
    }
    Ok(out)
}

/// `(1/N) R(product of q over nodes || pi^N)` by summation over `Z^N`.
pub fn finite_n_entropy(spec: &ModelSpec, q: &EmpiricalVector) -> Result<f64> {
    spec.check_empirical(q)?;
    let pi = exact_stationary(spec)?;
    let k = spec.k();
    let n = pi.n_nodes() as f64;
    let mut total = 0.0;
    for i in 0..pi.len() {
        let x = pi.configuration(i);
        let mut log_p = 0.0;
        for class in spec.classes() {
            let qc = q.class(class);
            for &z in x.class_states(class) {
                log_p += qc[z].ln();
            }
        }
        if log_p == f64::NEG_INFINITY {
            continue;
        }
        let log_pi = -energy_from_counts(spec, &x.counts(k)) - pi.log_partition;
        total += log_p.exp() * (log_p - log_pi);
    }
    Ok(total / n)
}

/// Settings of the multi-start minimization in [`free_energy_constant`].
#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergyOptions {
    /// Uniform start plus `starts - 1` Dirichlet(1) draws.
    pub starts: usize,
    pub seed: u64,
    /// Stop when the projected-gradient step is shorter than this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for FreeEnergyOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            seed: 0,
            tolerance: 1e-9,
            max_iter: 20_000,
        }
    }
}

/// Best value found by [`free_energy_constant`].
#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergyEstimate {
    /// Estimate of `C`.
    pub value: f64,
    pub minimizer: EmpiricalVector,
    /// Gradient-mapping norm at the minimizer.
    pub stationarity: f64,
    pub converged_starts: usize,
}

/// Objective of the variational formula: weighted per-class relative entropy
/// to the uniform law plus the interaction energy.
pub fn free_energy_objective(spec: &ModelSpec, gamma: &EmpiricalVector) -> f64 {
    let nu = vec![1.0 / spec.k() as f64; spec.k()];
    let entropy: f64 = spec
        .classes()
        .map(|c| spec.class_weight(c) * relative_entropy(gamma.class(c), &nu))
        .sum();
    entropy + interaction_energy(spec, gamma)
}

/// Estimates `C = log K - min_gamma objective(gamma)` by projected gradient
/// descent with Armijo backtracking from several starts.
pub fn free_energy_constant(spec: &ModelSpec, options: &FreeEnergyOptions) -> FreeEnergyEstimate {
    let starts = starting_points(spec, options.starts.max(1), options.seed);
    let results: Vec<(EmpiricalVector, f64, f64, bool)> = starts
        .into_par_iter()
        .map(|q0| minimize(spec, q0, options))
        .collect();
    let converged_starts = results.iter().filter(|r| r.3).count();
    let (minimizer, best, stationarity, _) = results
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");
    FreeEnergyEstimate {
        value: (spec.k() as f64).ln() - best,
        minimizer,
        stationarity,
        converged_starts,
    }
}

/// Uniform point followed by Dirichlet(1) draws; draw `i` uses ChaCha stream
/// `i` of `seed`.
pub(crate) fn starting_points(spec: &ModelSpec, n: usize, seed: u64) -> Vec<EmpiricalVector> {
    let mut out = vec![spec.uniform()];
    for i in 1..n {
        out.push(dirichlet_point(spec, seed, i as u64));
    }
    out
}

pub(crate) fn dirichlet_point(spec: &ModelSpec, seed: u64, stream: u64) -> EmpiricalVector {
    let k = spec.k();
    if k == 1 {
        return spec.uniform();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // Dirichlet(1, ..., 1) is a normalized vector of i.i.d. Exp(1) draws.
    let mut data = Vec::with_capacity(spec.n_classes() * k);
    for _ in 0..spec.n_classes() {
        let draw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let s: f64 = draw.iter().sum();
        data.extend(draw.into_iter().map(|x| x / s));
    }
    EmpiricalVector::from_flat_unchecked(k, data)
}

/// Euclidean projection of each component onto the probability simplex.
pub(crate) fn project_to_simplex(k: usize, data: &mut [f64]) {
    for comp in data.chunks_mut(k) {
        let mut sorted = comp.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        let mut theta = 0.0;
        for (i, &u) in sorted.iter().enumerate() {
            acc += u;
            let t = (acc - 1.0) / (i + 1) as f64;
            if u - t > 0.0 {
                theta = t;
            }
        }
        comp.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
    }
}

fn clamped_gradient(spec: &ModelSpec, q: &EmpiricalVector) -> Vec<f64> {
    let mut floored = q.clone();
    floored
        .as_mut_slice()
        .iter_mut()
        .for_each(|x| *x = x.max(BOUNDARY_FLOOR));
    lyapunov_gradient(spec, &floored).expect("floored point is interior")
}

fn projected_step(spec: &ModelSpec, q: &EmpiricalVector, grad: &[f64], t: f64) -> EmpiricalVector {
    let mut data: Vec<f64> = q.as_slice().iter().zip(grad).map(|(x, g)| x - t * g).collect();
    project_to_simplex(spec.k(), &mut data);
    EmpiricalVector::from_flat_unchecked(spec.k(), data)
}

fn minimize(spec: &ModelSpec, q0: EmpiricalVector, o: &FreeEnergyOptions) -> (EmpiricalVector, f64, f64, bool) {
    let mut q = q0;
    let mut f = free_energy_objective(spec, &q);
    let mut t: f64 = 1.0;
    let mut mapping = f64::INFINITY;
    for _ in 0..o.max_iter {
        let grad = clamped_gradient(spec, &q);
        mapping = projected_step(spec, &q, &grad, 1.0).max_norm_distance(&q);
        if mapping < o.tolerance {
            return (q, f, mapping, true);
        }
        t = (2.0 * t).min(1e3);
        loop {
            let next = projected_step(spec, &q, &grad, t);
            let decrease: f64 = grad
                .iter()
                .zip(next.as_slice().iter().zip(q.as_slice()))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            let fn_next = free_energy_objective(spec, &next);
            if fn_next <= f + 1e-4 * decrease || t < 1e-14 {
                q = next;
                f = fn_next;
                break;
            }
            t /= 2.0;
        }
    }
    (q, f, mapping, false)
}

/// One row of a descent report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSample {
    pub t: f64,
    pub f: f64,
    pub dfdt: f64,
    /// `dfdt > DESCENT_TOLERANCE`.
    pub flag: bool,
}

/// `F` along a trajectory with finite-difference time derivatives.
///
/// Interior samples use central differences, the two end samples one-sided
/// ones.
pub fn descent_monitor(spec: &ModelSpec, trajectory: &Trajectory) -> Vec<DescentSample> {
    let f: Vec<f64> = trajectory.values.iter().map(|q| lyapunov_value(spec, q)).collect();
    let t = &trajectory.times;
    let n = f.len();
    (0..n)
        .map(|i| {
            let dfdt = if n < 2 {
                0.0
            } else if i == 0 {
                (f[1] - f[0]) / (t[1] - t[0])
            } else if i == n - 1 {
                (f[n - 1] - f[n - 2]) / (t[n - 1] - t[n - 2])
            } else {
                (f[i + 1] - f[i - 1]) / (t[i + 1] - t[i - 1])
            };
            DescentSample {
                t: t[i],
                f: f[i],
                dfdt,
                flag: dfdt > DESCENT_TOLERANCE,
            }
        })
        .collect()
}

/// `sum_class w R(mu^class || pi^class(nu))`, the entropy of `mu` relative to
/// the stationary laws frozen at `nu`.
pub fn frozen_entropy(spec: &ModelSpec, mu: &EmpiricalVector, nu: &EmpiricalVector) -> f64 {
    let pi = stationary_vector(spec, nu);
    spec.classes()
        .map(|c| spec.class_weight(c) * relative_entropy(mu.class(c), pi.class(c)))
        .sum()
}

/// `dF/dt` at `q` along the limit ODE, from the closed-form gradient.
pub fn time_derivative(spec: &ModelSpec, q: &EmpiricalVector) -> Result<f64> {
    directional_derivative(spec, q, &vector_field(spec, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_system::integrate;
    use crate::model::{example_model, two_state_antiferro, BlockSizes, InteractionModel};
    use proptest::prelude::*;

    fn example() -> ModelSpec {
        example_model(4.0)
    }

    fn interior(r: usize, k: usize) -> impl Strategy<Value = EmpiricalVector> {
        prop::collection::vec(prop::collection::vec(0.02f64..1.0, k), 2 * r).prop_map(move |rows| {
            let data: Vec<f64> = rows
                .into_iter()
                .flat_map(|row| {
                    let s: f64 = row.iter().sum();
                    row.into_iter().map(move |x| x / s)
                })
                .collect();
            EmpiricalVector::from_flat_unchecked(k, data)
        })
    }

    fn tangent(r: usize, k: usize) -> impl Strategy<Value = TangentVector> {
        prop::collection::vec(-1.0f64..1.0, 2 * r * k).prop_map(move |mut v| {
            for comp in v.chunks_mut(k) {
                let m = comp.iter().sum::<f64>() / k as f64;
                comp.iter_mut().for_each(|x| *x -= m);
            }
            TangentVector::from_flat(k, v)
        })
    }

    #[test]
    fn relative_entropy_basics() {
        assert_eq!(relative_entropy(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert!((relative_entropy(&[1.0, 0.0], &[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn uniform_value() {
        let spec = example();
        let f = lyapunov_value(&spec, &spec.uniform());
        assert!((f - (0.625 - 2f64.ln())).abs() < 1e-14);

        let mut free = example();
        free.interaction = InteractionModel::new(vec![vec![0.0; 3]; 3], 1.0);
        free.state_space = crate::model::StateSpace::complete(3);
        let f = lyapunov_value(&free, &free.uniform());
        assert!((f + 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn boundary_is_refused_for_derivatives() {
        let spec = example();
        let edge = EmpiricalVector::delta(2, 2, 0);
        assert!(lyapunov_value(&spec, &edge).is_finite());
        let v = TangentVector::pairwise(2, 2, 0, 1);
        assert!(matches!(directional_derivative(&spec, &edge, &v), Err(Error::BoundaryPoint(_))));
        assert_eq!(directional_derivative(&spec, &spec.uniform(), &TangentVector::zeros(2, 2)).unwrap(), 0.0);
        assert!(directional_derivative(&spec, &spec.uniform(), &v).unwrap().abs() < 1e-15);
    }

    #[test]
    fn tiny_entropy_by_hand() {
        // N = 2: one central and one peripheral node.
        let spec = two_state_antiferro(
            4.0,
            vec![BlockSizes {
                central: 1,
                peripheral: 1,
            }],
        );
        let e2 = (-2.0f64).exp();
        let z = 2.0 + 2.0 * e2;
        let pi = [1.0 / z, e2 / z, e2 / z, 1.0 / z];
        let q = spec.uniform();
        let want: f64 = pi.iter().map(|p| 0.25 * (0.25 / p).ln()).sum::<f64>() / 2.0;
        assert!((finite_n_entropy(&spec, &q).unwrap() - want).abs() < 1e-14);

        let edge = EmpiricalVector::delta(1, 2, 0);
        let want = (1.0 / pi[0]).ln() / 2.0;
        assert!((finite_n_entropy(&spec, &edge).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn entropy_lower_bound() {
        let spec = example().scaled(2.0).unwrap();
        let pi = exact_stationary(&spec).unwrap();
        let n = pi.n_nodes() as f64;
        let u_min = pi.energies.iter().copied().fold(f64::INFINITY, f64::min);
        let bound = ((u_min + pi.log_partition) / n - 2f64.ln()).max(0.0);
        for seed in 0..10 {
            let q = dirichlet_point(&spec, seed, 1);
            assert!(finite_n_entropy(&spec, &q).unwrap() >= bound - 1e-12);
        }
    }

    #[test]
    fn zero_kernel_constant_is_log_k() {
        let mut spec = example();
        spec.interaction = InteractionModel::new(vec![vec![0.0; 2]; 2], 1.0);
        let c = free_energy_constant(&spec, &FreeEnergyOptions::default());
        assert!((c.value - 2f64.ln()).abs() < 1e-12);
        let q = dirichlet_point(&spec, 3, 1);
        let gap = finite_n_entropy(&spec, &q).unwrap() - lyapunov_value(&spec, &q);
        assert!((gap - c.value).abs() < 1e-12);
    }

    #[test]
    fn example_constant() {
        let spec = example();
        let c = free_energy_constant(&spec, &FreeEnergyOptions::default());
        assert!((c.value - 0.112_757_1).abs() < 1e-6, "{}", c.value);
        let swapped = free_energy_objective(&spec, &c.minimizer.relabeled(&[1, 0]));
        assert!((swapped - free_energy_objective(&spec, &c.minimizer)).abs() < 1e-12);
    }

    #[test]
    fn projection_lands_on_simplex() {
        let mut x = vec![0.9, 0.4, -0.2, 2.0, -1.0, 0.1];
        project_to_simplex(3, &mut x);
        assert!((x[0] - 0.75).abs() < 1e-15 && (x[1] - 0.25).abs() < 1e-15 && x[2] == 0.0);
        assert_eq!(&x[3..], &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn monitor_flags_reversed_time() {
        let spec = example();
        let q0 = EmpiricalVector::repeated(2, &[0.8, 0.2]).unwrap();
        let traj = integrate(&spec, &q0, 5.0, 1e-2).unwrap();
        assert!(descent_monitor(&spec, &traj).iter().all(|s| !s.flag));
        let mut rev = traj.clone();
        rev.values.reverse();
        assert!(descent_monitor(&spec, &rev).iter().any(|s| s.flag));

        let at_rest = integrate(&spec, &spec.uniform(), 5.0, 1e-2).unwrap();
        assert!(descent_monitor(&spec, &at_rest).iter().all(|s| s.dfdt.abs() < 1e-8));
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(q in interior(2, 3), v in tangent(2, 3), beta in 0.1f64..6.0) {
            let mut spec = ModelSpec::new(
                crate::model::StateSpace::complete(3),
                InteractionModel::new(vec![vec![0.0, 1.0, -0.5], vec![1.0, 0.3, 2.0], vec![-0.5, 2.0, 0.0]], beta)
                    .with_potential(vec![0.2, -0.1, 0.0]),
                crate::model::BlockStructure::from_proportions(vec![
                    crate::model::BlockProportions { alpha: 0.3, central: 0.4, peripheral: 0.6 },
                    crate::model::BlockProportions { alpha: 0.7, central: 0.8, peripheral: 0.2 },
                ]),
            ).unwrap();
            spec.interaction.beta = beta;
            let h = 1e-6;
            let v = v.scaled(0.01);
            let fd = (lyapunov_value(&spec, &q.shifted(&v, h)) - lyapunov_value(&spec, &q.shifted(&v, -h))) / (2.0 * h);
            let exact = directional_derivative(&spec, &q, &v).unwrap();
            prop_assert!((fd - exact).abs() <= (1e-6 * exact.abs()).max(1e-9), "{fd} vs {exact}");
        }

        #[test]
        fn descent_splits_into_frozen_entropies(q in interior(2, 2)) {
            let spec = example();
            let field = vector_field(&spec, &q);
            let h = 1e-5;
            let fd = (frozen_entropy(&spec, &q.shifted(&field, h), &q) - frozen_entropy(&spec, &q.shifted(&field, -h), &q)) / (2.0 * h);
            let exact = time_derivative(&spec, &q).unwrap();
            prop_assert!((fd - exact).abs() < 1e-6);
            prop_assert!(exact <= 1e-12);
        }

        #[test]
        fn relabeling_leaves_value_unchanged(q in interior(2, 2)) {
            let spec = example();
            let a = lyapunov_value(&spec, &q);
            let b = lyapunov_value(&spec, &q.relabeled(&[1, 0]));
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}
