//! Monte Carlo simulation of both detection experiments.
//!
//! Each trial first draws the true photon number from the initial
//! distribution and then plays out the detector against that fixed number.
//! For the atom stream, ground-state atoms cross the cavity one at a time and
//! each leaves excited with probability `q(n)`; the trial ends once the
//! requested number of excited atoms has been seen. For the closed-system
//! detector, the first count arrives after an exponential waiting time of
//! rate `n * lambda`.
//!
//! Trial `i` of a campaign seeded with `s` draws from ChaCha8 stream `i` of
//! seed `s`, and batch tallies are merged in batch order, so results do not
//! depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockDimension, PhotonDistribution};
use crate::superops::CouplingParams;

pub const DEFAULT_MAX_ATOMS: u64 = 10_000;
const BATCH_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorModel {
    Discrete,
    Continuous,
}

/// Per-atom excitation probability `q(n)` given `n` photons in the cavity.
///
/// `q(0)` is always zero: an empty cavity cannot excite an atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExcitationProbability {
    /// `q(n) = q` for every `n >= 1`.
    Constant { q: f64 },
    /// `q(n) = n / (n + offset)`.
    Saturating { offset: f64 },
    /// `q(n) = q[n]`; photon numbers past the table end use the last entry.
    Table { q: Vec<f64> },
}

impl ExcitationProbability {
    pub fn at(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            Self::Constant { q } => *q,
            Self::Saturating { offset } => n as f64 / (n as f64 + offset),
            Self::Table { q } => q.get(n).or(q.last()).copied().unwrap_or(0.0),
        }
    }

    /// Checks `q(0) = 0` and `0 < q(n) <= 1` for `1 <= n <= max_n`.
    pub fn validate(&self, max_n: usize) -> Result<()> {
        match self {
            Self::Table { q } if q.first().copied().unwrap_or(0.0) != 0.0 => {
                return Err(Error::InvalidParameter("excitation table must have q(0) = 0".into()));
            }
            Self::Saturating { offset } if !(offset.is_finite() && *offset >= 0.0) => {
                return Err(Error::InvalidParameter(format!("saturation offset must be >= 0, got {offset}")));
            }
            _ => {}
        }
        for n in 1..=max_n {
            let q = self.at(n);
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidParameter(format!("excitation probability q({n}) = {q} is not in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomStreamConfig {
    pub excitation: ExcitationProbability,
    pub max_atoms: u64,
    pub seed: u64,
    /// Number of excited atoms to wait for before the trial stops.
    pub detections: usize,
}

impl AtomStreamConfig {
    pub fn new(excitation: ExcitationProbability, seed: u64) -> Self {
        Self {
            excitation,
            max_atoms: DEFAULT_MAX_ATOMS,
            seed,
            detections: 1,
        }
    }

    fn validate(&self, p0: &PhotonDistribution) -> Result<()> {
        if self.max_atoms == 0 {
            return Err(Error::InvalidParameter("max_atoms must be positive".into()));
        }
        if self.detections == 0 {
            return Err(Error::InvalidParameter("detections must be positive".into()));
        }
        self.excitation.validate(highest_occupied(p0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// `count` consecutive atoms, starting at atom index `first`, left in the ground state.
    AtomGround { first: u64, count: u64 },
    AtomExcited { index: u64 },
    Count { time: f64 },
    NoCountInterval { duration: f64 },
}

/// Event log of one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub model: DetectorModel,
    pub seed: u64,
    pub trial: u64,
    pub initial_n: usize,
    pub final_n: usize,
    /// Detections the trial was waiting for.
    pub target_detections: usize,
    /// The atom budget ran out while photons were still present.
    pub truncated: bool,
    pub events: Vec<Event>,
}

impl DetectionRecord {
    pub fn detections(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::AtomExcited { .. } | Event::Count { .. }))
            .count()
    }

    pub fn ground_atoms(&self) -> u64 {
        self.events
            .iter()
            .map(|e| match e {
                Event::AtomGround { count, .. } => *count,
                _ => 0,
            })
            .sum()
    }

    pub fn atoms_sent(&self) -> u64 {
        self.ground_atoms() + self.events.iter().filter(|e| matches!(e, Event::AtomExcited { .. })).count() as u64
    }

    pub fn first_count_time(&self) -> Option<f64> {
        self.events.iter().find_map(|e| match e {
            Event::Count { time } => Some(*time),
            _ => None,
        })
    }

    /// Whether the trial contributes to the conditioned posterior.
    pub fn is_conditioned(&self) -> bool {
        !self.truncated && self.detections() >= self.target_detections
    }
}

fn highest_occupied(p: &PhotonDistribution) -> usize {
    p.probabilities().iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Inverse-CDF sampler for the true photon number.
#[derive(Debug, Clone)]
struct NumberSampler {
    cdf: Vec<f64>,
    last: usize,
}

impl NumberSampler {
    fn new(p: &PhotonDistribution) -> Self {
        let mut acc = 0.0;
        let cdf = p
            .probabilities()
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Self {
            cdf,
            last: highest_occupied(p),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.partition_point(|&c| c <= u).min(self.last)
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Simulates one atom-stream trial.
pub fn run_discrete_trial(p0: &PhotonDistribution, cfg: &AtomStreamConfig, trial: u64) -> Result<DetectionRecord> {
    cfg.validate(p0)?;
    Ok(discrete_trial(&NumberSampler::new(p0), cfg, trial))
}

fn discrete_trial(sampler: &NumberSampler, cfg: &AtomStreamConfig, trial: u64) -> DetectionRecord {
    let mut rng = trial_rng(cfg.seed, trial);
    let initial_n = sampler.sample(&mut rng);
    let mut n = initial_n;
    let mut atom = 0u64;
    let mut events = Vec::new();
    let mut found = 0;
    let mut truncated = false;
    while found < cfg.detections {
        let q = cfg.excitation.at(n);
        let start = atom;
        let mut excited = false;
        if q > 0.0 {
            while atom < cfg.max_atoms {
                atom += 1;
                if rng.random::<f64>() < q {
                    excited = true;
                    break;
                }
            }
        } else {
            // Nothing can be excited; the rest of the stream passes through.
            atom = cfg.max_atoms;
        }
        let ground = atom - start - u64::from(excited);
        if ground > 0 {
            events.push(Event::AtomGround { first: start, count: ground });
        }
        if !excited {
            truncated = n > 0;
            break;
        }
        events.push(Event::AtomExcited { index: atom - 1 });
        n -= 1;
        found += 1;
    }
    DetectionRecord {
        model: DetectorModel::Discrete,
        seed: cfg.seed,
        trial,
        initial_n,
        final_n: n,
        target_detections: cfg.detections,
        truncated,
        events,
    }
}

/// Simulates one closed-system detector trial up to the first count or `t_max`.
///
/// `t_max` may be infinite.
pub fn run_continuous_trial(
    p0: &PhotonDistribution,
    params: &CouplingParams,
    t_max: f64,
    seed: u64,
    trial: u64,
) -> Result<DetectionRecord> {
    check_continuous(params, t_max)?;
    Ok(continuous_trial(&NumberSampler::new(p0), params, t_max, seed, trial))
}

fn check_continuous(params: &CouplingParams, t_max: f64) -> Result<()> {
    params.validate()?;
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter(format!("t_max must be positive, got {t_max}")));
    }
    Ok(())
}

fn continuous_trial(sampler: &NumberSampler, params: &CouplingParams, t_max: f64, seed: u64, trial: u64) -> DetectionRecord {
    let mut rng = trial_rng(seed, trial);
    let initial_n = sampler.sample(&mut rng);
    let mut n = initial_n;
    let mut events = Vec::with_capacity(1);
    let wait = if n == 0 {
        f64::INFINITY
    } else {
        Exp::new(n as f64 * params.lambda)
            .expect("rate is positive and finite")
            .sample(&mut rng)
    };
    if wait < t_max {
        events.push(Event::Count { time: wait });
        n -= 1;
    } else {
        events.push(Event::NoCountInterval { duration: t_max });
    }
    DetectionRecord {
        model: DetectorModel::Continuous,
        seed,
        trial,
        initial_n,
        final_n: n,
        target_detections: 1,
        truncated: false,
        events,
    }
}

/// Conditioned histogram of final photon numbers with binomial errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorEstimate {
    pub probabilities: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Trials that reached their detection target.
    pub conditioned: u64,
    pub total: u64,
    /// Trials dropped because the atom budget ran out with photons present.
    pub anomalies: u64,
    pub mean: f64,
    pub mean_std_error: f64,
    /// Mean waiting time to the first count, over trials with a count.
    pub mean_first_count_time: Option<f64>,
}

impl PosteriorEstimate {
    pub fn conditioning_fraction(&self) -> f64 {
        self.conditioned as f64 / self.total as f64
    }

    /// `(estimate - target) / std_error` per bin; zero-error bins give 0
    /// when they agree exactly and infinity otherwise.
    pub fn z_scores(&self, target: &[f64]) -> Vec<f64> {
        self.probabilities
            .iter()
            .zip(&self.std_errors)
            .enumerate()
            .map(|(n, (p, se))| {
                let diff = p - target.get(n).copied().unwrap_or(0.0);
                if *se > 0.0 {
                    diff / se
                } else if diff == 0.0 {
                    0.0
                } else {
                    diff.signum() * f64::INFINITY
                }
            })
            .collect()
    }
}

/// Order-independent accumulator behind [`estimate_posterior`].
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTally {
    counts: Vec<u64>,
    total: u64,
    anomalies: u64,
    overflow: bool,
    time_sum: f64,
    time_count: u64,
}

impl PosteriorTally {
    pub fn new(dim: FockDimension) -> Self {
        Self {
            counts: vec![0; dim.get()],
            total: 0,
            anomalies: 0,
            overflow: false,
            time_sum: 0.0,
            time_count: 0,
        }
    }

    pub fn add(&mut self, record: &DetectionRecord) {
        self.total += 1;
        if record.truncated {
            self.anomalies += 1;
        }
        if let Some(t) = record.first_count_time() {
            self.time_sum += t;
            self.time_count += 1;
        }
        if record.is_conditioned() {
            match self.counts.get_mut(record.final_n) {
                Some(c) => *c += 1,
                None => self.overflow = true,
            }
        }
    }

    pub fn merge(&mut self, other: &PosteriorTally) {
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.total += other.total;
        self.anomalies += other.anomalies;
        self.overflow |= other.overflow;
        self.time_sum += other.time_sum;
        self.time_count += other.time_count;
    }

    pub fn estimate(&self) -> Result<PosteriorEstimate> {
        if self.overflow {
            return Err(Error::OutOfRange("a record's final photon number exceeds the histogram".into()));
        }
        let m: u64 = self.counts.iter().sum();
        if m == 0 {
            return Err(Error::NoDetections);
        }
        let mf = m as f64;
        let probabilities: Vec<f64> = self.counts.iter().map(|&c| c as f64 / mf).collect();
        let std_errors = probabilities.iter().map(|p| (p * (1.0 - p) / mf).sqrt()).collect();
        let (mut s1, mut s2) = (0u128, 0u128);
        for (n, &c) in self.counts.iter().enumerate() {
            s1 += n as u128 * c as u128;
            s2 += (n * n) as u128 * c as u128;
        }
        let mean = s1 as f64 / mf;
        let variance = (s2 as f64 / mf - mean * mean).max(0.0);
        let mean_std_error = if m > 1 { (variance / (mf - 1.0)).sqrt() } else { 0.0 };
        Ok(PosteriorEstimate {
            probabilities,
            std_errors,
            conditioned: m,
            total: self.total,
            anomalies: self.anomalies,
            mean,
            mean_std_error,
            mean_first_count_time: (self.time_count > 0).then(|| self.time_sum / self.time_count as f64),
        })
    }
}

/// Histogram of `final_n` over records that reached their detection target.
pub fn estimate_posterior(records: &[DetectionRecord], dim: FockDimension) -> Result<PosteriorEstimate> {
    let mut tally = PosteriorTally::new(dim);
    records.iter().for_each(|r| tally.add(r));
    tally.estimate()
}

/// Settings for a batch of trials run against one initial distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialPlan {
    Discrete(AtomStreamConfig),
    Continuous { params: CouplingParams, t_max: f64, seed: u64 },
}

/// Aggregated result of a campaign; `records` is filled only on request.
#[derive(Debug, Clone)]
pub struct CampaignRun {
    pub tally: PosteriorTally,
    pub records: Option<Vec<DetectionRecord>>,
}

/// Runs `trials` independent trials on up to `threads` workers (0 picks
/// the rayon default).
pub fn run_trials(p0: &PhotonDistribution, plan: &TrialPlan, trials: u64, threads: usize, keep_records: bool) -> Result<CampaignRun> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    match plan {
        TrialPlan::Discrete(cfg) => cfg.validate(p0)?,
        TrialPlan::Continuous { params, t_max, .. } => check_continuous(params, *t_max)?,
    }
    let sampler = NumberSampler::new(p0);
    let dim = p0.dim();
    let batches = trials.div_ceil(BATCH_SIZE);
    let run_batch = |b: u64| {
        let mut tally = PosteriorTally::new(dim);
        let mut kept = Vec::new();
        for trial in b * BATCH_SIZE..((b + 1) * BATCH_SIZE).min(trials) {
            let record = match plan {
                TrialPlan::Discrete(cfg) => discrete_trial(&sampler, cfg, trial),
                TrialPlan::Continuous { params, t_max, seed } => continuous_trial(&sampler, params, *t_max, *seed, trial),
            };
            tally.add(&record);
            if keep_records {
                kept.push(record);
            }
        }
        (tally, kept)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let parts: Vec<(PosteriorTally, Vec<DetectionRecord>)> =
        pool.install(|| (0..batches).into_par_iter().map(run_batch).collect());

    let mut tally = PosteriorTally::new(dim);
    let mut records = keep_records.then(Vec::new);
    for (part, kept) in parts {
        tally.merge(&part);
        if let Some(all) = records.as_mut() {
            all.extend(kept);
        }
    }
    Ok(CampaignRun { tally, records })
}
