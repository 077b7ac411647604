//! Property suites run against one model, reported as a pass/fail table.
//!
//! Every check works on the model it is given, resized where it needs finite
//! sizes, and never panics: a failing computation becomes a failing row.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{apply_flip, b_with_n, energy_difference, total_energy, FlipProposal};
use crate::error::{Error, Result};
use crate::experiments::{correction_constant, entropy_gaps, lln_gaps, rate_gap, LlnOptions};
use crate::finite_system::{
    aggregated_outflow, detailed_balance_check, direct_outflow, exact_stationary, simulate, ParticleChain, SimulationRun,
};
use crate::fixed_points::{characterize, classify_stability, find_all_fixed_points, FixedPointReport, Stability};
use crate::io::trajectory_to_csv;
use crate::limit_system::{generator, integrate, stationary_map, vector_field, DEFAULT_DT};
use crate::lyapunov::{
    descent_monitor, directional_derivative, dirichlet_point, frozen_entropy, lyapunov_value, time_derivative,
};
use crate::model::{
    empirical_vector, sample_initial_configuration, validate_model, BlockSizes, ClassId, Configuration,
    EmpiricalVector, ModelSpec, Role, TangentVector,
};

/// How much work each check does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Tiny sizes, under a minute in total.
    Fast,
    /// Desk-scale sizes, under fifteen minutes in total.
    Deep,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Fast => "fast",
            Level::Deep => "deep",
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "deep" => Ok(Level::Deep),
            other => Err(Error::InvalidArgument(format!("level must be fast or deep, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The check does not apply to this model (for instance the state space
    /// is too large to enumerate).
    Skip,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    /// `<module>.<property>`.
    pub key: &'static str,
    pub status: Status,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub level: Level,
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| r.status == Status::Fail)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.key.len()).max().unwrap_or(0);
        for r in &self.rows {
            writeln!(
                f,
                "{:<width$}  {}  {:>7.2}s  {}",
                r.key,
                r.status.as_str(),
                r.seconds,
                r.detail
            )?;
        }
        Ok(())
    }
}

/// Every row key, in report order.
pub const CHECK_KEYS: [&str; 24] = [
    "model.round-trip",
    "model.validate-idempotent",
    "energy.exactness",
    "energy.correction-bound",
    "energy.antisymmetry",
    "finite_system.generator-consistency",
    "finite_system.ergodic-sampling",
    "finite_system.jump-legality",
    "finite_system.detailed-balance",
    "limit_system.rate-convergence",
    "limit_system.lln",
    "limit_system.positivity",
    "limit_system.stationary-map",
    "lyapunov.gradient",
    "lyapunov.entropy-decomposition",
    "lyapunov.descent",
    "lyapunov.zero-derivative",
    "lyapunov.entropy-limit",
    "fixed_points.equivalence",
    "fixed_points.interiority",
    "fixed_points.descent-consistency",
    "fixed_points.stability",
    "cli.determinism",
    "cli.traceability",
];

struct Budget {
    energy_instances: usize,
    ergodic_batches: usize,
    lln: LlnOptions,
    descent_starts: usize,
    descent_horizon: f64,
    fixed_point_starts: usize,
}

impl Budget {
    fn new(level: Level) -> Self {
        match level {
            Level::Fast => Self {
                energy_instances: 300,
                ergodic_batches: 40,
                lln: LlnOptions {
                    sizes: vec![50, 200, 800],
                    ..LlnOptions::default()
                },
                descent_starts: 10,
                descent_horizon: 20.0,
                fixed_point_starts: 40,
            },
            Level::Deep => Self {
                energy_instances: 1000,
                ergodic_batches: 200,
                lln: LlnOptions::default(),
                descent_starts: 50,
                descent_horizon: 50.0,
                fixed_point_starts: 200,
            },
        }
    }
}

/// Outcome of a single check before timing.
type Outcome = Result<(Status, String)>;

fn verdict(ok: bool, detail: String) -> Outcome {
    Ok((if ok { Status::Pass } else { Status::Fail }, detail))
}

fn skip(detail: impl Into<String>) -> Outcome {
    Ok((Status::Skip, detail.into()))
}

/// Runs every check of [`CHECK_KEYS`] on `spec`.
///
/// `spec` is used as given; it is not re-validated, so a model broken after
/// validation shows up as failing rows.
pub fn run_verification(spec: &ModelSpec, level: Level) -> VerifyReport {
    let budget = Budget::new(level);
    let mut ctx = Context::new(spec);
    let mut rows = Vec::with_capacity(CHECK_KEYS.len());
    for key in CHECK_KEYS {
        let start = Instant::now();
        let outcome = if key == "cli.traceability" {
            traceability(&rows)
        } else {
            ctx.run(key, &budget)
        };
        let (status, detail) = outcome.unwrap_or_else(|e| (Status::Fail, format!("error: {e}")));
        rows.push(CheckRow {
            key,
            status,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    VerifyReport { level, rows }
}

struct Context<'a> {
    spec: &'a ModelSpec,
    fixed: Option<Vec<FixedPointReport>>,
}

impl<'a> Context<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        Self { spec, fixed: None }
    }

    fn run(&mut self, key: &str, b: &Budget) -> Outcome {
        let spec = self.spec;
        match key {
            "model.round-trip" => round_trip(spec),
            "model.validate-idempotent" => idempotent(spec),
            "energy.exactness" => exactness(spec, b.energy_instances),
            "energy.correction-bound" => correction_bound(spec),
            "energy.antisymmetry" => antisymmetry(spec, b.energy_instances),
            "finite_system.generator-consistency" => generator_consistency(spec),
            "finite_system.ergodic-sampling" => ergodic_sampling(spec, b.ergodic_batches),
            "finite_system.jump-legality" => jump_legality(spec),
            "finite_system.detailed-balance" => detailed_balance(spec),
            "limit_system.rate-convergence" => rate_convergence(spec),
            "limit_system.lln" => lln(spec, &b.lln),
            "limit_system.positivity" => positivity(spec),
            "limit_system.stationary-map" => stationary_correctness(spec),
            "lyapunov.gradient" => gradient(spec),
            "lyapunov.entropy-decomposition" => decomposition(spec),
            "lyapunov.descent" => descent(spec, b.descent_starts, b.descent_horizon),
            "lyapunov.zero-derivative" => zero_derivative(spec, self.fixed(b)?),
            "lyapunov.entropy-limit" => entropy_limit(spec),
            "fixed_points.equivalence" => equivalence(spec, self.fixed(b)?),
            "fixed_points.interiority" => interiority(self.fixed(b)?),
            "fixed_points.descent-consistency" => descent_consistency(spec, self.fixed(b)?),
            "fixed_points.stability" => stability(self.fixed(b)?),
            "cli.determinism" => determinism(spec),
            other => Err(Error::InvalidArgument(format!("unknown check {other}"))),
        }
    }

    /// Fixed points found once and classified, shared by several checks.
    fn fixed(&mut self, b: &Budget) -> Result<&[FixedPointReport]> {
        if self.fixed.is_none() {
            let found = find_all_fixed_points(self.spec, b.fixed_point_starts, 7);
            let classified = found
                .iter()
                .map(|r| {
                    let mut c = classify_stability(self.spec, &r.point)?;
                    c.iterations = r.iterations;
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()?;
            self.fixed = Some(classified);
        }
        Ok(self.fixed.as_deref().unwrap_or_default())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Interior point with every class at `q0`: state 1 has mass 0.7, the rest
/// share 0.3.
pub fn tilted_start(spec: &ModelSpec) -> EmpiricalVector {
    let k = spec.k();
    if k == 1 {
        return spec.uniform();
    }
    let mut comp = vec![0.3 / (k - 1) as f64; k];
    comp[0] = 0.7;
    EmpiricalVector::repeated(spec.r(), &comp).expect("tilted start is a probability vector")
}

/// Sizes of at most `max_nodes` nodes with the model's proportions, falling
/// back to one node per class.
fn small_model(spec: &ModelSpec, max_nodes: usize) -> ModelSpec {
    if let Ok(n) = spec.total_nodes() {
        if n <= max_nodes {
            return spec.clone();
        }
    }
    let sizes = spec.sizes_for_total(max_nodes);
    let n: usize = sizes.iter().map(|s| s.central + s.peripheral).sum();
    if n <= max_nodes {
        spec.with_sizes_unchecked(sizes)
    } else {
        spec.with_sizes_unchecked(vec![BlockSizes { central: 1, peripheral: 1 }; spec.r()])
    }
}

/// A model small enough to enumerate within `max_states` configurations.
fn enumerable_model(spec: &ModelSpec, max_states: f64) -> Option<ModelSpec> {
    let k = spec.k() as f64;
    let mut n = spec.total_nodes().ok().filter(|&n| k.powi(n as i32) <= max_states).unwrap_or(0);
    if n > 0 {
        return Some(spec.clone());
    }
    n = (max_states.ln() / k.ln()).floor() as usize;
    let tiny = small_model(spec, n.max(2 * spec.r()));
    let total = tiny.total_nodes().ok()?;
    (k.powi(total as i32) <= max_states).then_some(tiny)
}

fn random_configuration(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Configuration> {
    let k = spec.k();
    Ok(Configuration::from_classes(
        spec.class_sizes()?
            .into_iter()
            .map(|n| (0..n).map(|_| rng.random_range(0..k)).collect())
            .collect(),
    ))
}

fn random_flip(spec: &ModelSpec, x: &Configuration, rng: &mut impl Rng) -> Option<FlipProposal> {
    let class = ClassId::from_index(rng.random_range(0..spec.n_classes()));
    let index = rng.random_range(0..x.class_sizes()[class.index()]);
    let from = x.state(class, index);
    let targets: Vec<usize> = (0..spec.k()).filter(|&z| spec.allowed(from, z)).collect();
    if targets.is_empty() {
        return None;
    }
    let to = targets[rng.random_range(0..targets.len())];
    Some(FlipProposal::new(class, index, from, to))
}

/// Random sizes with at most 60 nodes, a random configuration and a legal
/// flip on it.
fn random_instance(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Option<(ModelSpec, Configuration, FlipProposal)>> {
    let cap = (60 / (2 * spec.r())).clamp(1, 10);
    let sizes = (0..spec.r())
        .map(|_| BlockSizes {
            central: rng.random_range(1..=cap),
            peripheral: rng.random_range(1..=cap),
        })
        .collect();
    let sized = spec.with_sizes_unchecked(sizes);
    let x = random_configuration(&sized, rng)?;
    Ok(random_flip(&sized, &x, rng).map(|f| (sized, x, f)))
}

fn round_trip(spec: &ModelSpec) -> Outcome {
    let sized = small_model(spec, 200);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let nu = dirichlet_point(spec, 11, seed + 1);
        let x = sample_initial_configuration(&sized, &nu, seed)?;
        let q = empirical_vector(&sized, &x)?;
        for c in 0..q.n_classes() {
            worst = worst.max((q.component(c).iter().sum::<f64>() - 1.0).abs());
        }
    }
    verdict(worst < 1e-12, format!("20 samples, worst sum defect {worst:.1e}"))
}

fn idempotent(spec: &ModelSpec) -> Outcome {
    let once = validate_model(spec.clone());
    let again = once.clone().map(|s| validate_model(s.clone()).map(|t| t == s));
    match (once, again) {
        (Ok(s), Ok(Ok(true))) => verdict(s == *spec, "validated model is returned unchanged".into()),
        (Err(e), _) => verdict(
            validate_model(spec.clone()).err() == Some(e.clone()),
            format!("model is invalid ({} violations), reported identically twice", e.0.len()),
        ),
        _ => verdict(false, "second validation differs".into()),
    }
}

fn exactness(spec: &ModelSpec, instances: usize) -> Outcome {
    let mut rng = rng(101);
    let (mut worst, mut tried): (f64, usize) = (0.0, 0);
    for _ in 0..instances {
        let Some((sized, x, flip)) = random_instance(spec, &mut rng)? else { continue };
        let y = apply_flip(&sized, &x, &flip)?;
        let brute = total_energy(&sized, &y)? - total_energy(&sized, &x)?;
        worst = worst.max((energy_difference(&sized, &x, &flip)? - brute).abs());
        tried += 1;
    }
    if tried == 0 {
        return skip("no legal flips");
    }
    verdict(worst < 1e-10, format!("{tried} flips, max |closed form - brute force| {worst:.2e}"))
}

fn correction_bound(spec: &ModelSpec) -> Outcome {
    let c = correction_constant(spec);
    let k = spec.k();
    let mut worst_ratio: f64 = 0.0;
    for n in [10.0, 100.0, 1000.0, 10_000.0] {
        for role in Role::ALL {
            for z in 0..k {
                for z2 in 0..k {
                    let b = b_with_n(spec, n, role, z, z2).abs();
                    worst_ratio = worst_ratio.max(if c > 0.0 { b * n / c } else { b });
                }
            }
        }
    }
    verdict(
        worst_ratio <= 1.0 + 1e-12,
        format!("max N|B|/C~ = {worst_ratio:.4} over N = 1e1..1e4 (C~ = {c:.4})"),
    )
}

fn antisymmetry(spec: &ModelSpec, instances: usize) -> Outcome {
    let mut rng = rng(202);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let Some((sized, x, flip)) = random_instance(spec, &mut rng)? else { continue };
        let y = apply_flip(&sized, &x, &flip)?;
        let there = energy_difference(&sized, &x, &flip)?;
        let back = energy_difference(&sized, &y, &flip.reversed())?;
        worst = worst.max((there + back).abs());
    }
    verdict(worst < 1e-10, format!("max |dU(x->y) + dU(y->x)| {worst:.2e}"))
}

fn generator_consistency(spec: &ModelSpec) -> Outcome {
    let sized = small_model(spec, 30);
    let mut rng = rng(303);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = random_configuration(&sized, &mut rng)?;
        worst = worst.max((aggregated_outflow(&sized, &x)? - direct_outflow(&sized, &x)?).abs());
    }
    verdict(worst < 1e-10, format!("50 configurations, max outflow gap {worst:.2e}"))
}

fn ergodic_sampling(spec: &ModelSpec, batches: usize) -> Outcome {
    let Some(tiny) = enumerable_model(spec, 4096.0) else {
        return skip("state space too large to enumerate");
    };
    let k = tiny.k();
    let pi = exact_stationary(&tiny)?;
    let mut lumped: HashMap<Vec<usize>, f64> = HashMap::new();
    for i in 0..pi.len() {
        let key: Vec<usize> = pi.configuration(i).counts(k).concat();
        *lumped.entry(key).or_default() += pi.probabilities[i];
    }
    let x0 = pi.configuration(0);
    let mut chain = ParticleChain::new(&tiny, &x0)?;
    let mut rng = rng(404);
    let batch_len = 200.0;
    let mut occupation: Vec<HashMap<Vec<usize>, f64>> = vec![HashMap::new(); batches];
    let (mut t, mut b) = (0.0, 0);
    while b < batches {
        let state = chain.counts().to_vec();
        let Some(e) = chain.step(&mut rng) else {
            return verdict(lumped.len() == 1, "chain has no moves".into());
        };
        let mut from = t;
        while b < batches && e.time > (b + 1) as f64 * batch_len {
            let edge = (b + 1) as f64 * batch_len;
            *occupation[b].entry(state.clone()).or_default() += edge - from;
            from = edge;
            b += 1;
        }
        if b < batches {
            *occupation[b].entry(state).or_default() += e.time - from;
        }
        t = e.time;
    }
    let mut worst: f64 = 0.0;
    for (key, p) in &lumped {
        let xs: Vec<f64> = occupation
            .iter()
            .map(|o| o.get(key).copied().unwrap_or(0.0) / batch_len)
            .collect();
        let mean = xs.iter().sum::<f64>() / batches as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt().max(1e-3 / 3.0);
        worst = worst.max((mean - p).abs() / se);
    }
    verdict(
        worst <= 3.0,
        format!("{} count states, {batches} batches, worst deviation {worst:.2} SE", lumped.len()),
    )
}

fn jump_legality(spec: &ModelSpec) -> Outcome {
    let sized = small_model(spec, 40);
    let k = sized.k();
    let x0 = random_configuration(&sized, &mut rng(505))?;
    let mut chain = ParticleChain::new(&sized, &x0)?;
    let mut rng = rng(506);
    let mut bad = 0;
    let mut before = chain.counts().to_vec();
    let mut events = 0;
    for _ in 0..5000 {
        let Some(e) = chain.step(&mut rng) else { break };
        let after = chain.counts().to_vec();
        let changed: usize = before.iter().zip(&after).map(|(a, b)| a.abs_diff(*b)).sum();
        let c = e.class.index();
        let legal = changed == 2
            && after[c * k + e.from] + 1 == before[c * k + e.from]
            && after[c * k + e.to] == before[c * k + e.to] + 1
            && sized.allowed(e.from, e.to);
        bad += usize::from(!legal);
        before = after;
        events += 1;
    }
    verdict(bad == 0, format!("{events} events, {bad} illegal"))
}

fn detailed_balance(spec: &ModelSpec) -> Outcome {
    let Some(tiny) = enumerable_model(spec, 65536.0) else {
        return skip("state space too large to enumerate");
    };
    let residual = detailed_balance_check(&tiny)?;
    verdict(
        residual < 1e-12,
        format!("N = {}, max residual {residual:.2e}", tiny.total_nodes()?),
    )
}

fn rate_convergence(spec: &ModelSpec) -> Outcome {
    let mut points = vec![spec.uniform()];
    points.extend((0..20).map(|i| dirichlet_point(spec, 13, i + 1)));
    let c = correction_constant(spec);
    let sizes = [100usize, 1000, 10_000];
    let gaps = sizes
        .iter()
        .map(|&n| rate_gap(&spec.with_sizes_unchecked(spec.sizes_for_total(n)), n, &points))
        .collect::<Result<Vec<f64>>>()?;
    let monotone = gaps.windows(2).all(|w| w[1] < w[0] || w[0] == 0.0);
    let bounded = gaps.iter().zip(sizes).all(|(g, n)| *g <= 5.0 * c / n as f64);
    verdict(
        monotone && bounded,
        format!("gaps {:.2e} {:.2e} {:.2e}, bound 5C~/N at N=100 {:.2e}", gaps[0], gaps[1], gaps[2], 5.0 * c / 100.0),
    )
}

fn lln(spec: &ModelSpec, o: &LlnOptions) -> Outcome {
    let gaps = lln_gaps(spec, &tilted_start(spec), o)?;
    let g: Vec<f64> = gaps.iter().map(|g| g.mean_path_gap).collect();
    let ok = g.windows(2).all(|w| w[1] < w[0]);
    let detail = gaps
        .iter()
        .map(|g| format!("N={}: {:.4}", g.n, g.mean_path_gap))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(ok, format!("{} replicates, {detail}", o.replicates))
}

fn positivity(spec: &ModelSpec) -> Outcome {
    let mut worst = f64::INFINITY;
    for i in 0..20 {
        let q0 = dirichlet_point(spec, 17, i + 1);
        let traj = integrate(spec, &q0, 10.0, DEFAULT_DT)?;
        worst = traj.values.iter().map(EmpiricalVector::min_entry).fold(worst, f64::min);
    }
    verdict(worst >= 0.0, format!("20 starts, smallest entry {worst:.2e}"))
}

fn stationary_correctness(spec: &ModelSpec) -> Outcome {
    let (mut min_entry, mut invariance) = (f64::INFINITY, 0.0_f64);
    for i in 0..100 {
        let q = dirichlet_point(spec, 19, i + 1);
        for class in spec.classes() {
            let pi = stationary_map(spec, &q, class);
            min_entry = pi.iter().copied().fold(min_entry, f64::min);
            let balance = generator(spec, &q, class).left_apply(&pi);
            invariance = balance.iter().fold(invariance, |m, x| m.max(x.abs()));
        }
    }
    verdict(
        min_entry > 0.0 && invariance < 1e-10,
        format!("100 points, min entry {min_entry:.2e}, max |pi A| {invariance:.2e}"),
    )
}

fn random_tangent(spec: &ModelSpec, rng: &mut impl Rng) -> TangentVector {
    let k = spec.k();
    let mut v: Vec<f64> = (0..spec.n_classes() * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    for comp in v.chunks_mut(k) {
        let m = comp.iter().sum::<f64>() / k as f64;
        comp.iter_mut().for_each(|x| *x -= m);
    }
    TangentVector::from_flat(k, v)
}

/// Dirichlet point pulled slightly towards uniform so that finite
/// differences stay inside the simplex.
fn interior_point(spec: &ModelSpec, seed: u64, i: u64) -> EmpiricalVector {
    let q = dirichlet_point(spec, seed, i + 1);
    let u = spec.uniform();
    let data = q.as_slice().iter().zip(u.as_slice()).map(|(a, b)| 0.9 * a + 0.1 * b).collect();
    EmpiricalVector::from_flat_unchecked(spec.k(), data)
}

fn gradient(spec: &ModelSpec) -> Outcome {
    if spec.k() < 2 {
        return skip("single state");
    }
    let mut rng = rng(606);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let q = interior_point(spec, 23, i);
        let v = random_tangent(spec, &mut rng).scaled(0.01);
        let fd = (lyapunov_value(spec, &q.shifted(&v, h)) - lyapunov_value(spec, &q.shifted(&v, -h))) / (2.0 * h);
        let exact = directional_derivative(spec, &q, &v)?;
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-3));
    }
    verdict(worst <= 1e-6, format!("100 pairs, max relative error {worst:.2e}"))
}

fn decomposition(spec: &ModelSpec) -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let q = interior_point(spec, 29, i);
        let field = vector_field(spec, &q);
        let fd = (frozen_entropy(spec, &q.shifted(&field, h), &q) - frozen_entropy(spec, &q.shifted(&field, -h), &q))
            / (2.0 * h);
        worst = worst.max((fd - time_derivative(spec, &q)?).abs());
    }
    verdict(worst < 1e-6, format!("50 points, max gap {worst:.2e}"))
}

fn descent(spec: &ModelSpec, starts: usize, horizon: f64) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut flagged = 0;
    for i in 0..starts {
        let q0 = dirichlet_point(spec, 31, i as u64 + 1);
        let traj = integrate(spec, &q0, horizon, DEFAULT_DT)?;
        let mon = descent_monitor(spec, &traj);
        flagged += mon.iter().filter(|s| s.flag).count();
        worst = mon.iter().map(|s| s.dfdt).fold(worst, f64::max);
    }
    verdict(
        flagged == 0,
        format!("{starts} starts to T={horizon}, max dF/dt {worst:.2e}, {flagged} flagged samples"),
    )
}

/// Solver outputs pushed off by a random tangent step of size 0.02.
fn perturbed_points(spec: &ModelSpec, fixed: &[FixedPointReport], n: usize) -> Vec<EmpiricalVector> {
    let mut rng = rng(707);
    (0..n)
        .filter_map(|i| {
            let base = &fixed[i % fixed.len()].point;
            let v = random_tangent(spec, &mut rng);
            let q = base.shifted(&v, 0.02 / v.max_norm().max(1e-300));
            (q.min_entry() > 0.0).then_some(q)
        })
        .collect()
}

fn zero_derivative(spec: &ModelSpec, fixed: &[FixedPointReport]) -> Outcome {
    if fixed.is_empty() {
        return verdict(false, "solver found no fixed point".into());
    }
    let mut bad = 0;
    for r in fixed {
        let c = characterize(spec, &r.point)?;
        bad += usize::from(!(c.critical() && c.self_consistent()));
    }
    let off = perturbed_points(spec, fixed, 20);
    for q in &off {
        let c = characterize(spec, q)?;
        bad += usize::from(c.critical() || c.self_consistent());
    }
    verdict(
        bad == 0,
        format!("{} fixed points, {} perturbed points, {bad} disagreements", fixed.len(), off.len()),
    )
}

fn entropy_limit(spec: &ModelSpec) -> Outcome {
    let base = small_model(spec, 2 * spec.r());
    let n0 = base.total_nodes()?;
    let k = spec.k() as f64;
    if k.powi(3 * n0 as i32) > crate::finite_system::MAX_ENUMERATION as f64 {
        return skip(format!("K^N too large at N = {}", 3 * n0));
    }
    let sizes = base.blocks.finite_sizes.clone().unwrap_or_default();
    let family: Vec<ModelSpec> = (1..=3)
        .map(|m| {
            base.with_sizes_unchecked(
                sizes
                    .iter()
                    .map(|s| BlockSizes { central: m * s.central, peripheral: m * s.peripheral })
                    .collect(),
            )
        })
        .collect();
    let mut spreads = Vec::new();
    for member in &family {
        let n = member.total_nodes()?;
        let gap = entropy_gaps(member, &[n], 20, 37, 0.0)?;
        spreads.push((n, gap[0].spread()));
    }
    let ok = spreads.windows(2).all(|w| w[1].1 < w[0].1);
    let detail = spreads.iter().map(|(n, s)| format!("N={n}: {s:.4}")).collect::<Vec<_>>().join(", ");
    verdict(ok, format!("spread over 20 points, {detail}"))
}

fn equivalence(spec: &ModelSpec, fixed: &[FixedPointReport]) -> Outcome {
    if fixed.is_empty() {
        return verdict(false, "solver found no fixed point".into());
    }
    let mut bad = 0;
    for r in fixed {
        let c = characterize(spec, &r.point)?;
        bad += usize::from(!(c.self_consistent() && c.at_rest() && c.critical()));
    }
    let mut random = 0;
    for i in 0..20 {
        let q = interior_point(spec, 41, i);
        let c = characterize(spec, &q)?;
        if c.self_consistent() {
            // A random draw landed on a fixed point; it is not a counterexample.
            continue;
        }
        random += 1;
        bad += usize::from(c.at_rest() || c.critical());
    }
    verdict(
        bad == 0,
        format!("{} fixed points, {random} random points, {bad} disagreements", fixed.len()),
    )
}

fn interiority(fixed: &[FixedPointReport]) -> Outcome {
    let min = fixed.iter().map(|r| r.point.min_entry()).fold(f64::INFINITY, f64::min);
    verdict(!fixed.is_empty() && min > 0.0, format!("{} points, smallest entry {min:.3e}", fixed.len()))
}

/// State relabelings that leave the edges, `W` and `V` unchanged.
fn symmetries(spec: &ModelSpec) -> Vec<Vec<usize>> {
    let k = spec.k();
    if k > 6 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..k).collect();
    permute(&mut perm, 0, &mut |p| {
        let identity = p.iter().enumerate().all(|(i, &x)| i == x);
        let keeps = (0..k).all(|a| {
            (spec.interaction.v(a) - spec.interaction.v(p[a])).abs() < 1e-12
                && (0..k).all(|b| {
                    (spec.w(a, b) - spec.w(p[a], p[b])).abs() < 1e-12 && spec.allowed(a, b) == spec.allowed(p[a], p[b])
                })
        });
        if keeps && !identity {
            out.push(p.to_vec());
        }
    });
    out
}

fn permute(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, f);
        p.swap(i, j);
    }
}

fn descent_consistency(spec: &ModelSpec, fixed: &[FixedPointReport]) -> Outcome {
    if fixed.is_empty() {
        return verdict(false, "solver found no fixed point".into());
    }
    // Symmetric images of a fixed point are fixed points with the same F.
    let mut worst_image: f64 = 0.0;
    let mut missing = 0;
    for perm in symmetries(spec) {
        for r in fixed {
            let image = r.point.relabeled(&perm);
            match fixed.iter().find(|s| s.point.max_norm_distance(&image) < 1e-6) {
                Some(s) => worst_image = worst_image.max((s.f_value - r.f_value).abs()),
                None => missing += 1,
            }
        }
    }
    // The lowest point is never unstable and lies strictly below every
    // unstable one.
    let lowest = &fixed[0];
    let gap = fixed
        .iter()
        .filter(|r| r.classification == Some(Stability::Unstable))
        .map(|r| r.f_value - lowest.f_value)
        .fold(f64::INFINITY, f64::min);
    let ok = missing == 0
        && worst_image < 1e-9
        && lowest.classification != Some(Stability::Unstable)
        && gap > 1e-9;
    let above = if gap.is_finite() {
        format!("unstable points at least {gap:.3e} higher")
    } else {
        "no unstable points".to_owned()
    };
    verdict(
        ok,
        format!(
            "min F {:.7}, {above}, symmetric images: {missing} missing, max F gap {worst_image:.1e}",
            lowest.f_value
        ),
    )
}

fn stability(fixed: &[FixedPointReport]) -> Outcome {
    let mut counts = [0usize; 3];
    let mut disagree = 0;
    for r in fixed {
        match r.classification {
            Some(Stability::Stable) => counts[0] += 1,
            Some(Stability::Unstable) => counts[1] += 1,
            _ => counts[2] += 1,
        }
        disagree += usize::from(!r.corroboration.as_ref().is_some_and(|c| c.agrees));
    }
    verdict(
        !fixed.is_empty() && disagree == 0,
        format!(
            "{} stable, {} unstable, {} marginal; trajectories disagree at {disagree}",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn determinism(spec: &ModelSpec) -> Outcome {
    let sized = small_model(spec, 100);
    let x0 = sample_initial_configuration(&sized, &tilted_start(spec), 5)?;
    let run = SimulationRun::uniform(5, 5.0, 51, 3)?;
    let render = |paths: Vec<crate::model::Trajectory>| paths.iter().map(trajectory_to_csv).collect::<String>();
    let a = render(simulate(&sized, &x0, &run)?);
    let b = render(simulate(&sized, &x0, &run)?);
    let c = trajectory_to_csv(&integrate(spec, &tilted_start(spec), 5.0, DEFAULT_DT)?);
    let d = trajectory_to_csv(&integrate(spec, &tilted_start(spec), 5.0, DEFAULT_DT)?);
    verdict(a == b && c == d, "repeated simulate and integrate give byte-identical CSV".into())
}

fn traceability(rows: &[CheckRow]) -> Outcome {
    let present: Vec<&str> = rows.iter().map(|r| r.key).collect();
    let expected = &CHECK_KEYS[..CHECK_KEYS.len() - 1];
    verdict(present == expected, format!("{} property rows reported", present.len()))
}
