//! Fixed points `q = pi(q)` of the limit ODE and their local stability.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_system::{integrate_to, stationary_vector, vector_field, DEFAULT_DT};
use crate::lyapunov::{dirichlet_point, lyapunov_value, pairwise_derivatives};
use crate::model::{EmpiricalVector, ModelSpec, TangentVector};

/// Points closer than this in max-norm are the same fixed point.
pub const DEDUP_RADIUS: f64 = 1e-6;
/// Eigenvalue real parts within this of zero count as marginal.
pub const EIGEN_THRESHOLD: f64 = 1e-8;
/// Largest `|q - pi(q)|` accepted by [`classify_stability`].
pub const FIXED_POINT_TOLERANCE: f64 = 1e-8;
/// Step of the finite-difference Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn from_real_parts(re: &[f64]) -> Self {
        if re.iter().any(|&x| x > EIGEN_THRESHOLD) {
            Stability::Unstable
        } else if re.iter().all(|&x| x < -EIGEN_THRESHOLD) {
            Stability::Stable
        } else {
            Stability::Marginal
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

/// Outcome of integrating from small perturbations of a fixed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corroboration {
    pub starts: usize,
    pub perturbation: f64,
    pub horizon: f64,
    /// Starts that ended within `return_tolerance` of the point.
    pub returned: usize,
    pub return_tolerance: f64,
    /// Final states of the perturbed runs, as nested per-class arrays.
    pub endpoints: Vec<Vec<Vec<f64>>>,
    /// Whether the trajectories agree with the eigenvalue classification:
    /// all return for a stable point, some leave for an unstable one.
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub point: EmpiricalVector,
    /// `|q - pi(q)|` in max-norm.
    pub residual: f64,
    /// `|vector_field(q)|` in max-norm.
    pub field_residual: f64,
    pub f_value: f64,
    pub classification: Option<Stability>,
    /// Real parts of the Jacobian eigenvalues on the tangent space, ascending.
    pub eigen_real_parts: Vec<f64>,
    pub corroboration: Option<Corroboration>,
    pub iterations: usize,
}

impl FixedPointReport {
    fn unclassified(spec: &ModelSpec, point: EmpiricalVector, iterations: usize) -> Self {
        let residual = self_consistency_residual(spec, &point);
        let field_residual = vector_field(spec, &point).max_norm();
        Self {
            f_value: lyapunov_value(spec, &point),
            point,
            residual,
            field_residual,
            classification: None,
            eigen_real_parts: Vec::new(),
            corroboration: None,
            iterations,
        }
    }
}

/// `|q - pi(q)|` in max-norm.
pub fn self_consistency_residual(spec: &ModelSpec, q: &EmpiricalVector) -> f64 {
    stationary_vector(spec, q).max_norm_distance(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    /// Weight of `pi(q)` in each update, in `(0, 1]`.
    pub damping: f64,
    pub max_iter: usize,
    /// Stop once the max-norm update falls below this.
    pub tol: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            damping: 1.0,
            max_iter: 100_000,
            tol: 1e-12,
        }
    }
}

/// Iterates `q <- (1 - d) q + d pi(q)`.
///
/// If the update norm fails to decrease for 10 consecutive steps the damping
/// drops to 0.5 (once), which breaks period-2 cycles of the plain map.
pub fn self_consistency_iterate(spec: &ModelSpec, q0: &EmpiricalVector, opts: &IterationOptions) -> Result<FixedPointReport> {
    spec.check_empirical(q0)?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    let mut damping = opts.damping;
    let mut q = q0.clone();
    let mut last_norm = f64::INFINITY;
    let mut stalled = 0;
    let mut norm = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let pi = stationary_vector(spec, &q);
        let mut data = q.as_slice().to_vec();
        norm = 0.0;
        for (x, p) in data.iter_mut().zip(pi.as_slice()) {
            let next = (1.0 - damping) * *x + damping * p;
            norm = f64::max(norm, (next - *x).abs());
            *x = next;
        }
        q = EmpiricalVector::from_flat_unchecked(spec.k(), data);
        if norm < opts.tol {
            return Ok(FixedPointReport::unclassified(spec, q, it));
        }
        if norm >= last_norm {
            stalled += 1;
            if stalled >= 10 && damping > 0.5 {
                damping = 0.5;
                stalled = 0;
            }
        } else {
            stalled = 0;
        }
        last_norm = norm;
    }
    Err(Error::NonConvergence {
        last: q,
        residual: norm,
        iterations: opts.max_iter,
    })
}

/// Self-consistency iteration from the uniform point and `n_starts`
/// Dirichlet(1) points, deduplicated and sorted by `F`.
///
/// Starts that fail to converge are dropped.
pub fn find_all_fixed_points(spec: &ModelSpec, n_starts: usize, seed: u64) -> Vec<FixedPointReport> {
    let mut starts = vec![spec.uniform()];
    starts.extend((0..n_starts).map(|i| dirichlet_point(spec, seed, i as u64 + 1)));
    let opts = IterationOptions::default();
    let found: Vec<Option<FixedPointReport>> = starts
        .par_iter()
        .map(|q0| self_consistency_iterate(spec, q0, &opts).ok())
        .collect();
    let mut unique: Vec<FixedPointReport> = Vec::new();
    for report in found.into_iter().flatten() {
        if unique.iter().all(|u| u.point.max_norm_distance(&report.point) >= DEDUP_RADIUS) {
            unique.push(report);
        }
    }
    unique.sort_by(|a, b| a.f_value.total_cmp(&b.f_value));
    unique
}

/// Jacobian of the vector field restricted to the tangent space, in the basis
/// `e_z - e_K` of each class, by central differences.
pub fn tangent_jacobian(spec: &ModelSpec, q: &EmpiricalVector) -> DMatrix<f64> {
    let k = spec.k();
    let classes = spec.n_classes();
    let dim = classes * (k - 1);
    let mut jac = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let (c, z) = (col / (k - 1), col % (k - 1));
        let mut dir = vec![0.0; classes * k];
        dir[c * k + z] = 1.0;
        dir[c * k + k - 1] = -1.0;
        let dir = TangentVector::from_flat(k, dir);
        let plus = vector_field(spec, &q.shifted(&dir, JACOBIAN_STEP));
        let minus = vector_field(spec, &q.shifted(&dir, -JACOBIAN_STEP));
        for row in 0..dim {
            let (c2, z2) = (row / (k - 1), row % (k - 1));
            let i = c2 * k + z2;
            jac[(row, col)] = (plus.as_slice()[i] - minus.as_slice()[i]) / (2.0 * JACOBIAN_STEP);
        }
    }
    jac
}

/// Settings of the perturbed-trajectory check in [`classify_stability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorroborationOptions {
    pub starts: usize,
    pub perturbation: f64,
    pub horizon: f64,
    pub dt: f64,
    pub return_tolerance: f64,
    pub seed: u64,
}

impl Default for CorroborationOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            perturbation: 1e-3,
            horizon: 200.0,
            dt: DEFAULT_DT,
            return_tolerance: 1e-6,
            seed: 0,
        }
    }
}

/// Eigenvalue classification of a fixed point plus trajectory corroboration
/// with default settings.
pub fn classify_stability(spec: &ModelSpec, q: &EmpiricalVector) -> Result<FixedPointReport> {
    classify_stability_with(spec, q, &CorroborationOptions::default())
}

pub fn classify_stability_with(spec: &ModelSpec, q: &EmpiricalVector, opts: &CorroborationOptions) -> Result<FixedPointReport> {
    spec.check_empirical(q)?;
    let residual = self_consistency_residual(spec, q);
    if !(residual < FIXED_POINT_TOLERANCE) {
        return Err(Error::NotAFixedPoint(residual));
    }
    let mut report = FixedPointReport::unclassified(spec, q.clone(), 0);
    let mut re: Vec<f64> = if spec.k() > 1 {
        tangent_jacobian(spec, q).complex_eigenvalues().iter().map(|z| z.re).collect()
    } else {
        Vec::new()
    };
    re.sort_by(f64::total_cmp);
    let class = Stability::from_real_parts(&re);
    report.eigen_real_parts = re;
    report.classification = Some(class);
    report.corroboration = Some(corroborate(spec, q, class, opts)?);
    Ok(report)
}

fn corroborate(spec: &ModelSpec, q: &EmpiricalVector, class: Stability, o: &CorroborationOptions) -> Result<Corroboration> {
    let k = spec.k();
    let ends: Vec<EmpiricalVector> = (0..o.starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
            rng.set_stream(i as u64);
            let mut dir: Vec<f64> = (0..q.as_slice().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            for comp in dir.chunks_mut(k) {
                let m = comp.iter().sum::<f64>() / k as f64;
                comp.iter_mut().for_each(|x| *x -= m);
            }
            let dir = TangentVector::from_flat(k, dir);
            let scale = o.perturbation / dir.max_norm().max(f64::MIN_POSITIVE);
            let mut start = q.shifted(&dir, scale);
            for comp in start.as_mut_slice().chunks_mut(k) {
                comp.iter_mut().for_each(|x| *x = x.max(0.0));
                let s: f64 = comp.iter().sum();
                comp.iter_mut().for_each(|x| *x /= s);
            }
            integrate_to(spec, &start, o.horizon, o.dt)
        })
        .collect::<Result<_>>()?;
    let returned = ends.iter().filter(|e| e.max_norm_distance(q) < o.return_tolerance).count();
    let agrees = match class {
        Stability::Stable => returned == o.starts,
        Stability::Unstable => returned < o.starts,
        Stability::Marginal => true,
    };
    Ok(Corroboration {
        starts: o.starts,
        perturbation: o.perturbation,
        horizon: o.horizon,
        returned,
        return_tolerance: o.return_tolerance,
        endpoints: ends.iter().map(EmpiricalVector::components).collect(),
        agrees,
    })
}

/// The three equivalent descriptions of a fixed point, evaluated at `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characterization {
    /// `|q - pi(q)|`.
    pub residual: f64,
    /// `|vector_field(q)|`.
    pub field_residual: f64,
    /// Largest `|dF/dv|` over pairwise directions `e_x - e_y`.
    pub max_pairwise_derivative: f64,
}

impl Characterization {
    pub fn self_consistent(&self) -> bool {
        self.residual < 1e-8
    }

    pub fn at_rest(&self) -> bool {
        self.field_residual < 1e-8
    }

    pub fn critical(&self) -> bool {
        self.max_pairwise_derivative < 1e-6
    }
}

pub fn characterize(spec: &ModelSpec, q: &EmpiricalVector) -> Result<Characterization> {
    let d = pairwise_derivatives(spec, q)?;
    Ok(Characterization {
        residual: self_consistency_residual(spec, q),
        field_residual: vector_field(spec, q).max_norm(),
        max_pairwise_derivative: d.iter().fold(0.0, |m, x| m.max(x.abs())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{example_model, InteractionModel};

    fn state_one(q: &EmpiricalVector) -> Vec<f64> {
        (0..q.n_classes()).map(|c| q.component(c)[0]).collect()
    }

    #[test]
    fn uniform_start_stays_uniform() {
        let spec = example_model(4.0);
        let rep = self_consistency_iterate(&spec, &spec.uniform(), &IterationOptions::default()).unwrap();
        assert!(rep.residual < 1e-10);
        assert_eq!(rep.point, spec.uniform());
    }

    #[test]
    fn tilted_start_reaches_outer_point() {
        let spec = example_model(4.0);
        let q0 = EmpiricalVector::repeated(2, &[0.9, 0.1]).unwrap();
        let rep = self_consistency_iterate(&spec, &q0, &IterationOptions::default()).unwrap();
        let want = [0.8039, 0.9015, 0.8039, 0.9015];
        for (got, w) in state_one(&rep.point).iter().zip(want) {
            assert!((got - w).abs() < 1e-3);
        }
        assert!(rep.residual < 1e-11);
    }

    #[test]
    fn free_model_converges_in_one_map() {
        let mut spec = example_model(4.0);
        spec.interaction = InteractionModel::new(vec![vec![0.0; 2]; 2], 4.0);
        let q0 = EmpiricalVector::repeated(2, &[0.95, 0.05]).unwrap();
        let rep = self_consistency_iterate(&spec, &q0, &IterationOptions::default()).unwrap();
        assert_eq!(rep.point, spec.uniform());
        assert_eq!(rep.iterations, 2);
        let all = find_all_fixed_points(&spec, 20, 1);
        assert_eq!(all.len(), 1);
        let rep = classify_stability(&spec, &all[0].point).unwrap();
        assert_eq!(rep.classification, Some(Stability::Stable));
        // Each class flips freely at rate 1 each way: tangent eigenvalue -2.
        assert!(rep.eigen_real_parts.iter().all(|&x| (x + 2.0).abs() < 1e-6));
    }

    #[test]
    fn weak_coupling_has_one_fixed_point() {
        let spec = example_model(0.1);
        let all = find_all_fixed_points(&spec, 50, 3);
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn bad_damping_and_non_fixed_points() {
        let spec = example_model(4.0);
        let opts = IterationOptions {
            damping: 0.0,
            ..Default::default()
        };
        assert!(self_consistency_iterate(&spec, &spec.uniform(), &opts).is_err());
        let q = EmpiricalVector::repeated(2, &[0.7, 0.3]).unwrap();
        assert!(matches!(classify_stability(&spec, &q), Err(Error::NotAFixedPoint(_))));
        let opts = IterationOptions {
            max_iter: 3,
            ..Default::default()
        };
        assert!(matches!(
            self_consistency_iterate(&spec, &q, &opts),
            Err(Error::NonConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn example_structure() {
        let spec = example_model(4.0);
        let all = find_all_fixed_points(&spec, 40, 7);
        assert_eq!(all.len(), 3);
        // Sorted by F: the two outer points first, with equal values.
        assert!((all[0].f_value - all[1].f_value).abs() < 1e-12);
        assert!(all[1].f_value < all[2].f_value - 1e-3);
        let swapped: Vec<EmpiricalVector> = all.iter().map(|r| r.point.relabeled(&[1, 0])).collect();
        for s in &swapped {
            assert!(all.iter().any(|r| r.point.max_norm_distance(s) < 1e-9));
        }
        for r in &all {
            let c = characterize(&spec, &r.point).unwrap();
            assert!(c.self_consistent() && c.at_rest() && c.critical());
            assert!(r.point.min_entry() > 0.0);
        }
    }
}
