//! The `N`-particle Metropolis chain: single-node jump rates, exact Gibbs
//! measure of small instances and event-driven simulation.

mod simulate;

pub use simulate::{simulate, Event, ParticleChain, SimulationRun};

use crate::energy::{b_with_n, energy_from_counts, peripheral_sizes, psi_c_with_n, psi_p_with_n};
use crate::error::{Error, Result};
use crate::model::{check_configuration, empirical_vector, ClassId, Configuration, EmpiricalVector, ModelSpec, Role};

/// Largest state space `K^N` that [`exact_stationary`] will enumerate.
pub const MAX_ENUMERATION: u64 = 1 << 20;

/// Rate at which one class-`class` node in state `z` jumps to `z2` when the
/// empirical vector is `q`. The sizes entering the energy change are those of
/// the model.
pub fn finite_rate(spec: &ModelSpec, q: &EmpiricalVector, class: ClassId, z: usize, z2: usize) -> Result<f64> {
    spec.check_empirical(q)?;
    if z == z2 || !spec.allowed(z, z2) {
        return Ok(0.0);
    }
    let n = spec.total_nodes()? as f64;
    let j = class.block;
    let nc = spec.class_size(ClassId::central(j))? as f64;
    let psi = match class.role {
        Role::Central => {
            let np = spec.class_size(ClassId::peripheral(j))? as f64;
            psi_c_with_n(spec, n, z, z2, q, j, nc, np)
        }
        Role::Peripheral => psi_p_with_n(spec, n, z, z2, q, j, nc, &peripheral_sizes(spec)?),
    };
    let dv = spec.interaction.v(z2) - spec.interaction.v(z);
    Ok(metropolis(psi + b_with_n(spec, n, class.role, z, z2) + dv))
}

#[inline]
pub(crate) fn metropolis(delta: f64) -> f64 {
    (-delta.max(0.0)).exp()
}

/// The Gibbs measure of a small instance, over configurations listed in
/// mixed-radix order with the first node most significant.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    pub k: usize,
    pub class_sizes: Vec<usize>,
    pub energies: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `log Z_N`.
    pub log_partition: f64,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.class_sizes.iter().sum()
    }

    pub fn configuration(&self, index: usize) -> Configuration {
        Configuration::from_flat(self.class_sizes.clone(), decode(index, self.k, self.n_nodes()))
    }

    pub fn index_of(&self, x: &Configuration) -> usize {
        x.states().iter().fold(0, |acc, &z| acc * self.k + z)
    }
}

fn decode(mut index: usize, k: usize, n: usize) -> Vec<usize> {
    let mut states = vec![0; n];
    for slot in states.iter_mut().rev() {
        *slot = index % k;
        index /= k;
    }
    states
}

/// Number of configurations, or `TooLarge` above [`MAX_ENUMERATION`].
pub(crate) fn enumeration_size(spec: &ModelSpec) -> Result<usize> {
    let n = spec.total_nodes()?;
    let size = (spec.k() as f64).powi(n as i32);
    if size > MAX_ENUMERATION as f64 {
        return Err(Error::TooLarge(size, MAX_ENUMERATION));
    }
    Ok(size as usize)
}

/// `pi^N(x) = exp(-U_N(x)) / Z_N` by direct normalization over all of `Z^N`.
pub fn exact_stationary(spec: &ModelSpec) -> Result<StationaryDistribution> {
    let size = enumeration_size(spec)?;
    let class_sizes = spec.class_sizes()?;
    let k = spec.k();
    let n = class_sizes.iter().sum();
    let energies: Vec<f64> = (0..size)
        .map(|i| {
            let x = Configuration::from_flat(class_sizes.clone(), decode(i, k, n));
            energy_from_counts(spec, &x.counts(k))
        })
        .collect();
    let u_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|u| (u_min - u).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(StationaryDistribution {
        k,
        class_sizes,
        probabilities: weights.iter().map(|w| w / z).collect(),
        log_partition: z.ln() - u_min,
        energies,
    })
}

/// Largest `|pi(x) psi(x,y) - pi(y) psi(y,x)|` over single-node moves.
pub fn detailed_balance_check(spec: &ModelSpec) -> Result<f64> {
    detailed_balance_check_with(spec, |_, _, rate| rate)
}

/// [`detailed_balance_check`] with every rate passed through
/// `adjust(x_index, y_index, rate)` first. Lets tests break reversibility on
/// purpose.
pub fn detailed_balance_check_with(spec: &ModelSpec, adjust: impl Fn(usize, usize, f64) -> f64) -> Result<f64> {
    let pi = exact_stationary(spec)?;
    let k = spec.k();
    let n = pi.n_nodes();
    let mut stride = vec![1usize; n];
    for l in (0..n.saturating_sub(1)).rev() {
        stride[l] = stride[l + 1] * k;
    }
    let mut worst: f64 = 0.0;
    for xi in 0..pi.len() {
        let states = decode(xi, k, n);
        for (l, &z) in states.iter().enumerate() {
            for z2 in (0..k).filter(|&z2| z2 != z && spec.allowed(z, z2)) {
                let yi = xi + z2 * stride[l] - z * stride[l];
                let du = pi.energies[yi] - pi.energies[xi];
                let forward = adjust(xi, yi, metropolis(du));
                let backward = adjust(yi, xi, metropolis(-du));
                let gap = (pi.probabilities[xi] * forward - pi.probabilities[yi] * backward).abs();
                worst = worst.max(gap);
            }
        }
    }
    Ok(worst)
}

/// Total jump rate out of `x`, aggregated over (class, from, to) as the
/// simulator does.
pub fn aggregated_outflow(spec: &ModelSpec, x: &Configuration) -> Result<f64> {
    let q = empirical_vector(spec, x)?;
    let counts = x.counts(spec.k());
    let mut total = 0.0;
    for class in spec.classes() {
        for z in 0..spec.k() {
            let m = counts[class.index()][z];
            if m == 0 {
                continue;
            }
            for z2 in 0..spec.k() {
                total += m as f64 * finite_rate(spec, &q, class, z, z2)?;
            }
        }
    }
    Ok(total)
}

/// Total jump rate out of `x` from the configuration-level rate matrix,
/// `sum_{y != x} exp(-(U(y) - U(x))^+) A_N(x, y)`.
pub fn direct_outflow(spec: &ModelSpec, x: &Configuration) -> Result<f64> {
    check_configuration(spec, x)?;
    let k = spec.k();
    let u = energy_from_counts(spec, &x.counts(k));
    let mut total = 0.0;
    let mut y = x.clone();
    for class in spec.classes() {
        for i in 0..x.class_sizes()[class.index()] {
            let z = x.state(class, i);
            for z2 in (0..k).filter(|&z2| z2 != z && spec.allowed(z, z2)) {
                y.set_state(class, i, z2);
                total += metropolis(energy_from_counts(spec, &y.counts(k)) - u);
            }
            y.set_state(class, i, z);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{two_state_antiferro, BlockSizes, InteractionModel};

    fn tiny() -> ModelSpec {
        two_state_antiferro(
            4.0,
            vec![BlockSizes {
                central: 1,
                peripheral: 1,
            }],
        )
    }

    #[test]
    fn tiny_rates() {
        let spec = tiny();
        let q = EmpiricalVector::delta(1, 2, 0);
        let r = finite_rate(&spec, &q, ClassId::central(0), 0, 1).unwrap();
        assert!((r - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(finite_rate(&spec, &q, ClassId::central(0), 0, 0).unwrap(), 0.0);
        // Moving away from an anti-aligned pair lowers the energy.
        let mixed = EmpiricalVector::from_components(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(finite_rate(&spec, &mixed, ClassId::central(0), 0, 1).unwrap(), 1.0);
    }

    #[test]
    fn tiny_stationary() {
        let pi = exact_stationary(&tiny()).unwrap();
        let e2 = (-2.0f64).exp();
        let z = 2.0 + 2.0 * e2;
        let want = [1.0 / z, e2 / z, e2 / z, 1.0 / z];
        for (p, w) in pi.probabilities.iter().zip(want) {
            assert!((p - w).abs() < 1e-15);
        }
        assert!((pi.log_partition - z.ln()).abs() < 1e-14);
        assert_eq!(pi.configuration(1).states(), &[0, 1]);
        assert_eq!(pi.index_of(&pi.configuration(2)), 2);
    }

    #[test]
    fn zero_or_weak_kernel_is_uniform() {
        let mut spec = tiny().scaled(3.0).unwrap();
        spec.interaction = InteractionModel::new(vec![vec![0.0; 2]; 2], 4.0);
        let pi = exact_stationary(&spec).unwrap();
        let u = 1.0 / pi.len() as f64;
        assert!(pi.probabilities.iter().all(|p| (p - u).abs() < 1e-15));
        assert_eq!(detailed_balance_check(&spec).unwrap(), 0.0);

        let mut cold = tiny().scaled(3.0).unwrap();
        cold.interaction.beta = 1e-12;
        let pi = exact_stationary(&cold).unwrap();
        assert!(pi.probabilities.iter().all(|p| (p - u).abs() < 1e-12));
    }

    #[test]
    fn too_large_is_refused() {
        let spec = tiny().scaled(11.0).unwrap();
        assert!(matches!(exact_stationary(&spec), Err(Error::TooLarge(..))));
    }

    #[test]
    fn balance_holds_and_breaks() {
        let spec = tiny().scaled(3.0).unwrap();
        assert!(detailed_balance_check(&spec).unwrap() < 1e-12);
        let broken = detailed_balance_check_with(&spec, |x, y, r| if (x, y) == (0, 1) { 1.1 * r } else { r }).unwrap();
        assert!(broken > 1e-3);
    }

    #[test]
    fn outflows_agree() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (spec, x, _) = crate::energy::tests::random_instance(&mut rng, 3, 2);
            let a = aggregated_outflow(&spec, &x).unwrap();
            let d = direct_outflow(&spec, &x).unwrap();
            assert!((a - d).abs() < 1e-10 * d.max(1.0), "{a} vs {d}");
        }
    }
}
