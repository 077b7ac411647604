//! Scaling experiments comparing the finite system with its limit.

use rayon::prelude::*;

use crate::error::Result;
use crate::finite_system::{finite_rate, simulate, SimulationRun};
use crate::limit_system::{integrate, limit_rate};
use crate::lyapunov::{dirichlet_point, finite_n_entropy, lyapunov_value};
use crate::model::{empirical_vector, quantized_configuration, EmpiricalVector, ModelSpec, Trajectory};

/// `2 beta max|W|`: bounds `N |B|` for every pair of states.
pub fn correction_constant(spec: &ModelSpec) -> f64 {
    2.0 * spec.beta() * spec.interaction.max_abs_w()
}

/// Largest `|finite_rate - limit_rate|` over classes, edges and the given
/// points, for the model resized to `n` nodes.
pub fn rate_gap(spec: &ModelSpec, n: usize, points: &[EmpiricalVector]) -> Result<f64> {
    let sized = spec.sized_for_total(n)?;
    let k = spec.k();
    let mut worst: f64 = 0.0;
    for q in points {
        for class in spec.classes() {
            for z in 0..k {
                for z2 in 0..k {
                    let a = finite_rate(&sized, q, class, z, z2)?;
                    let b = limit_rate(&sized, q, class, z, z2);
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Distance between simulated paths at one system size and the limit ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct LlnGap {
    pub n: usize,
    /// `sup_t |mean of replicates - ODE|`.
    pub mean_path_gap: f64,
    /// Mean over replicates of `sup_t |replicate - ODE|`.
    pub mean_replicate_gap: f64,
}

/// Settings of [`lln_gaps`].
#[derive(Debug, Clone, PartialEq)]
pub struct LlnOptions {
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub horizon: f64,
    /// Spacing of the observation grid; a multiple of `dt`.
    pub sample_every: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for LlnOptions {
    fn default() -> Self {
        Self {
            sizes: vec![200, 800, 3200],
            replicates: 20,
            horizon: 10.0,
            sample_every: 0.1,
            dt: 1e-2,
            seed: 2024,
        }
    }
}

/// For each size, starts every replicate from the configuration whose counts
/// round `q0` and the ODE from that configuration's empirical vector.
pub fn lln_gaps(spec: &ModelSpec, q0: &EmpiricalVector, o: &LlnOptions) -> Result<Vec<LlnGap>> {
    let stride = (o.sample_every / o.dt).round().max(1.0) as usize;
    o.sizes
        .par_iter()
        .map(|&n| {
            let sized = spec.sized_for_total(n)?;
            let x0 = quantized_configuration(&sized, q0)?;
            let mu0 = empirical_vector(&sized, &x0)?;
            let ode = integrate(&sized, &mu0, o.horizon, o.dt)?;
            let grid: Vec<f64> = ode.times.iter().step_by(stride).copied().collect();
            let reference: Vec<&EmpiricalVector> = ode.values.iter().step_by(stride).collect();
            let run = SimulationRun::with_times(o.seed ^ n as u64, o.horizon.max(*grid.last().unwrap()), grid, o.replicates)?;
            let paths = simulate(&sized, &x0, &run)?;
            let sup = |traj: &Trajectory| {
                traj.values
                    .iter()
                    .zip(&reference)
                    .map(|(a, b)| a.max_norm_distance(b))
                    .fold(0.0, f64::max)
            };
            let mean_replicate_gap = paths.iter().map(sup).sum::<f64>() / paths.len() as f64;
            Ok(LlnGap {
                n,
                mean_path_gap: sup(&Trajectory::mean(&paths)),
                mean_replicate_gap,
            })
        })
        .collect()
}

/// `F_bar^N(q) - (F(q) - C)` over random points for one system size.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyGap {
    pub n: usize,
    pub gaps: Vec<f64>,
}

impl EntropyGap {
    /// Largest minus smallest gap.
    pub fn spread(&self) -> f64 {
        let hi = self.gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.gaps.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    pub fn mean(&self) -> f64 {
        self.gaps.iter().sum::<f64>() / self.gaps.len() as f64
    }
}

/// Entropy gaps at each size in `sizes` over `points` Dirichlet(1) draws.
/// The additive constant `c` is subtracted from every gap.
pub fn entropy_gaps(spec: &ModelSpec, sizes: &[usize], points: usize, seed: u64, c: f64) -> Result<Vec<EntropyGap>> {
    let qs: Vec<EmpiricalVector> = (0..points)
        .map(|i| dirichlet_point(spec, seed, i as u64 + 1))
        .collect();
    sizes
        .iter()
        .map(|&n| {
            let sized = spec.sized_for_total(n)?;
            let gaps = qs
                .par_iter()
                .map(|q| Ok(finite_n_entropy(&sized, q)? - lyapunov_value(&sized, q) - c))
                .collect::<Result<Vec<f64>>>()?;
            Ok(EntropyGap { n, gaps })
        })
        .collect()
}
