//! Gillespie simulation on per-class state counts.
//!
//! Rates depend on the configuration only through its empirical vector, so
//! the chain of class counts is itself Markov and every event costs
//! `O(r K^2)` regardless of `N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::metropolis;
use crate::error::{Error, Result};
use crate::model::{check_configuration, ClassId, Configuration, EmpiricalVector, ModelSpec, Trajectory};

/// Seed, horizon, observation grid and replicate count of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub seed: u64,
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    pub replicates: usize,
}

impl SimulationRun {
    /// `samples` equally spaced observation times from 0 to `horizon`
    /// inclusive.
    pub fn uniform(seed: u64, horizon: f64, samples: usize, replicates: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 samples, got {samples}")));
        }
        let step = horizon / (samples - 1) as f64;
        let mut times: Vec<f64> = (0..samples).map(|i| i as f64 * step).collect();
        times[samples - 1] = horizon;
        Self::with_times(seed, horizon, times, replicates)
    }

    pub fn with_times(seed: u64, horizon: f64, sample_times: Vec<f64>, replicates: usize) -> Result<Self> {
        let run = Self {
            seed,
            horizon,
            sample_times,
            replicates,
        };
        run.check()?;
        Ok(run)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be finite and non-negative, got {}", self.horizon));
        }
        if self.replicates == 0 {
            return bad("need at least one replicate".into());
        }
        if self.sample_times.is_empty() {
            return bad("no sample times".into());
        }
        if self.sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sample times must be strictly increasing".into());
        }
        if self.sample_times[0] < 0.0 || *self.sample_times.last().unwrap() > self.horizon {
            return bad(format!("sample times must lie in [0, {}]", self.horizon));
        }
        Ok(())
    }
}

/// One jump of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub class: ClassId,
    pub from: usize,
    pub to: usize,
}

/// The chain of per-class counts, advanced one event at a time.
#[derive(Debug, Clone)]
pub struct ParticleChain<'a> {
    spec: &'a ModelSpec,
    k: usize,
    n: f64,
    sizes: Vec<usize>,
    counts: Vec<usize>,
    time: f64,
    field: Vec<f64>,
    rates: Vec<f64>,
}

impl<'a> ParticleChain<'a> {
    pub fn new(spec: &'a ModelSpec, x0: &Configuration) -> Result<Self> {
        check_configuration(spec, x0)?;
        let k = spec.k();
        let classes = spec.n_classes();
        Ok(Self {
            spec,
            k,
            n: x0.n_nodes() as f64,
            sizes: x0.class_sizes().to_vec(),
            counts: x0.counts(k).into_iter().flatten().collect(),
            time: 0.0,
            field: vec![0.0; classes * k],
            rates: vec![0.0; classes * k * k],
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Per-class counts, flat in class-then-state order.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn empirical(&self) -> EmpiricalVector {
        let data = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &m)| m as f64 / self.sizes[i / self.k] as f64)
            .collect();
        EmpiricalVector::from_flat_unchecked(self.k, data)
    }

    /// Energy each class feels in each state, up to the factor `beta / N`.
    fn refresh_field(&mut self) {
        let (k, spec) = (self.k, self.spec);
        let r = spec.r();
        let mut all_p = vec![0.0; k];
        for l in 0..r {
            for x in 0..k {
                all_p[x] += self.counts[(2 * l + 1) * k + x] as f64;
            }
        }
        for j in 0..r {
            let nc = &self.counts[2 * j * k..(2 * j + 1) * k];
            let np = &self.counts[(2 * j + 1) * k..(2 * j + 2) * k];
            for z in 0..k {
                let (mut hc, mut hp) = (0.0, 0.0);
                for x in 0..k {
                    hc += spec.w(x, z) * nc[x] as f64 + spec.w(z, x) * np[x] as f64;
                    hp += spec.w(z, x) * nc[x] as f64 + spec.w(x, z) * all_p[x];
                }
                self.field[2 * j * k + z] = hc;
                self.field[(2 * j + 1) * k + z] = hp;
            }
        }
    }

    /// Fills the aggregated rate table and returns its total.
    fn refresh_rates(&mut self) -> f64 {
        self.refresh_field();
        let (k, spec) = (self.k, self.spec);
        let scale = spec.beta() / self.n;
        let mut total = 0.0;
        for c in 0..spec.n_classes() {
            for z in 0..k {
                let m = self.counts[c * k + z];
                for z2 in 0..k {
                    let slot = (c * k + z) * k + z2;
                    if m == 0 || z == z2 || !spec.allowed(z, z2) {
                        self.rates[slot] = 0.0;
                        continue;
                    }
                    let psi = scale * (self.field[c * k + z2] - self.field[c * k + z]);
                    let b = scale / 2.0 * (spec.w(z2, z2) + spec.w(z, z) - 2.0 * spec.w(z, z2));
                    let dv = spec.interaction.v(z2) - spec.interaction.v(z);
                    let rate = m as f64 * metropolis(psi + b + dv);
                    self.rates[slot] = rate;
                    total += rate;
                }
            }
        }
        total
    }

    /// Total jump rate out of the current state.
    pub fn total_rate(&mut self) -> f64 {
        self.refresh_rates()
    }

    /// Draws the next event without applying it. `None` if the chain is
    /// absorbed.
    pub fn propose(&mut self, rng: &mut impl Rng) -> Option<Event> {
        let total = self.refresh_rates();
        if total <= 0.0 {
            return None;
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (slot, &rate) in self.rates.iter().enumerate() {
            if rate > 0.0 {
                acc += rate;
                chosen = Some(slot);
                if target < acc {
                    break;
                }
            }
        }
        let slot = chosen?;
        let k = self.k;
        Some(Event {
            time: self.time + wait,
            class: ClassId::from_index(slot / (k * k)),
            from: (slot / k) % k,
            to: slot % k,
        })
    }

    pub fn apply(&mut self, event: &Event) {
        let base = event.class.index() * self.k;
        self.counts[base + event.from] -= 1;
        self.counts[base + event.to] += 1;
        self.time = event.time;
    }

    /// Advances by one event and returns it.
    pub fn step(&mut self, rng: &mut impl Rng) -> Option<Event> {
        let event = self.propose(rng)?;
        self.apply(&event);
        Some(event)
    }
}

/// Simulates `run.replicates` independent copies of the chain from `x0`.
///
/// Replicate `i` draws from the ChaCha stream `i` of `run.seed`, so results do
/// not depend on thread scheduling.
pub fn simulate(spec: &ModelSpec, x0: &Configuration, run: &SimulationRun) -> Result<Vec<Trajectory>> {
    run.check()?;
    ParticleChain::new(spec, x0)?;
    (0..run.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            rng.set_stream(rep as u64);
            let mut chain = ParticleChain::new(spec, x0)?;
            Ok(sample_path(&mut chain, &run.sample_times, &mut rng))
        })
        .collect()
}

fn sample_path(chain: &mut ParticleChain<'_>, times: &[f64], rng: &mut impl Rng) -> Trajectory {
    let mut out = Trajectory::with_capacity(times.len());
    let mut next = chain.propose(rng);
    for &t in times {
        while let Some(event) = next.filter(|e| e.time <= t) {
            chain.apply(&event);
            next = chain.propose(rng);
        }
        out.push(t, chain.empirical());
    }
    out
}
