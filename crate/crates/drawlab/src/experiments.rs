//! Experiment orchestration: multi-procedure sweeps against shared uniform
//! baselines, deadlock and acceptance-rate estimation, and the naive
//! backtracking intractability demonstration.
//!
//! Everything randomized runs on counter-based substreams keyed by
//! `(master seed, domain, stream, index)`, so results are byte-identical
//! for a fixed seed regardless of the worker count.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::draw::rng::{self, substream};
use crate::draw::{propose_unconstrained, proposal_valid, run_skip_draw, staged_uniform_proposal, Procedure, ProposalBuf};
use crate::exact::{ExactError, MatrixProvenance, PairAccumulator, PairProbabilityMatrix};
use crate::feasibility::{backtrack_can_complete, can_complete, completable, FeasibilityStatus};
use crate::metrics::{compute_metrics, MetricsError, MetricsReport, TeamSets};
use crate::model::{fixtures, DrawState, Instance, Labelling};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no uniform samples accepted within the proposal budget")]
    NoUniformSamples,
    #[error(transparent)]
    Draw(#[from] crate::draw::DrawError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid job: {0}")]
    InvalidJob(String),
}

/// Specification of one sweep.
#[derive(Debug, Clone)]
pub struct SimulationJob {
    pub procedures: Vec<Procedure>,
    pub draws_per_procedure: u64,
    /// Accepted uniform samples per labelling policy.
    pub uniform_target: u64,
    pub uniform_max_proposals: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub procedure: Procedure,
    pub report: MetricsReport,
    /// Delta-method standard errors for m1..m5 (zero for exact inputs).
    pub se: [f64; 5],
    /// Percent change of each measure against the official-procedure row,
    /// when that row is part of the sweep.
    pub chg_pct: Option<[f64; 5]>,
    pub matrix: PairProbabilityMatrix,
}

#[derive(Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub baselines: Vec<(Labelling, PairProbabilityMatrix)>,
    /// Proposals consumed per labelling baseline.
    pub uniform_proposals: Vec<(Labelling, u64)>,
    /// The uniform budget ran out before reaching the target; results use
    /// the samples that were accepted.
    pub uniform_exhausted: bool,
}

/// Monte Carlo pair matrix of one skip procedure. Deterministic for a fixed
/// seed under any worker count.
pub fn simulate_skip_matrix(
    inst: &Instance,
    procedure: &Procedure,
    draws: u64,
    master_seed: u64,
) -> Result<PairProbabilityMatrix, ExperimentError> {
    let acc = (0..draws)
        .into_par_iter()
        .try_fold(
            || PairAccumulator::new(inst),
            |mut acc, k| {
                let (state, _) = run_skip_draw(inst, procedure, master_seed, k)?;
                acc.add(inst, &state);
                Ok::<_, ExperimentError>(acc)
            },
        )
        .try_reduce(
            || PairAccumulator::new(inst),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )?;
    Ok(acc.into_matrix(
        inst,
        MatrixProvenance::MonteCarlo {
            samples: draws,
            seed: master_seed,
            procedure: procedure.to_string(),
        },
    )?)
}

/// Rejection-samples `target` uniform draws for the baseline. Acceptance
/// checks the label-free constraints only (confederation caps and the UEFA
/// band): label-bound constraints never change which teams share a group,
/// because every composition of valid groups admits the same number of
/// compliant labellings, and enforcing them would cut the acceptance rate
/// by roughly an order of magnitude for nothing. Under ex-ante labelling
/// the pre-assigned teams stay on their reserved groups, which is the only
/// behavioural difference between the two baselines.
///
/// Proposals are indexed by a global counter and consumed in chunks;
/// acceptance is decided per index, so the accepted set is a pure function
/// of the seed.
pub fn collect_uniform_baseline(
    inst: &Instance,
    labelling: Labelling,
    target: u64,
    max_proposals: u64,
    master_seed: u64,
) -> Result<(PairProbabilityMatrix, u64, bool), ExperimentError> {
    const CHUNK: u64 = 1 << 16;
    let stream = match labelling {
        Labelling::ExAnte => 0,
        Labelling::ExPost => 1,
    };
    let mut acc = PairAccumulator::new(inst);
    let mut next = 0u64;
    let mut proposals_used = 0u64;
    while acc.samples() < target && next < max_proposals {
        let hi = (next + CHUNK).min(max_proposals);
        let mut found: Vec<(u64, DrawState)> = (next..hi)
            .into_par_iter()
            .map_init(
                || ProposalBuf::new(inst, labelling),
                |buf, k| {
                    let mut rng = substream(master_seed, rng::DOMAIN_UNIFORM, stream, k);
                    staged_uniform_proposal(inst, &mut rng, buf, false)
                        .then(|| (k, buf.materialize(inst)))
                },
            )
            .flatten()
            .collect();
        found.sort_by_key(|(k, _)| *k);
        for (k, state) in found {
            if acc.samples() == target {
                break;
            }
            acc.add(inst, &state);
            proposals_used = k + 1;
        }
        next = hi;
        if acc.samples() < target {
            proposals_used = next;
        }
    }
    if acc.samples() == 0 {
        return Err(ExperimentError::NoUniformSamples);
    }
    let exhausted = acc.samples() < target;
    let samples = acc.samples();
    let matrix = acc.into_matrix(
        inst,
        MatrixProvenance::MonteCarlo {
            samples,
            seed: master_seed,
            procedure: format!("uniform/{labelling}"),
        },
    )?;
    Ok((matrix, proposals_used, exhausted))
}

/// Runs every procedure of the job against one shared uniform baseline per
/// labelling policy and reports the five measures, their standard errors,
/// and the change relative to the official procedure.
pub fn run_sweep(inst: &Instance, job: &SimulationJob) -> Result<SweepResult, ExperimentError> {
    if job.procedures.is_empty() {
        return Err(ExperimentError::InvalidJob("no procedures".into()));
    }
    if job.draws_per_procedure == 0 {
        return Err(ExperimentError::InvalidJob("draws_per_procedure must be positive".into()));
    }
    let labellings: BTreeSet<Labelling> = job.procedures.iter().map(|p| p.labelling).collect();
    let mut baselines = Vec::new();
    let mut uniform_proposals = Vec::new();
    let mut uniform_exhausted = false;
    for &labelling in &labellings {
        let (matrix, used, exhausted) = collect_uniform_baseline(
            inst,
            labelling,
            job.uniform_target,
            job.uniform_max_proposals,
            job.master_seed,
        )?;
        uniform_exhausted |= exhausted;
        uniform_proposals.push((labelling, used));
        baselines.push((labelling, matrix));
    }
    let sets = TeamSets::from_instance(inst);
    let mut rows = Vec::with_capacity(job.procedures.len());
    for procedure in &job.procedures {
        let matrix = simulate_skip_matrix(inst, procedure, job.draws_per_procedure, job.master_seed)?;
        let baseline = &baselines
            .iter()
            .find(|(l, _)| *l == procedure.labelling)
            .expect("baseline exists for every labelling in the job")
            .1;
        let report = compute_metrics(&matrix, baseline, &sets)?;
        let se = standard_errors(&matrix, baseline, &sets);
        rows.push(SweepRow {
            procedure: procedure.clone(),
            report,
            se,
            chg_pct: None,
            matrix,
        });
    }
    let official = Procedure::official(inst.pot_count());
    if let Some(base) = rows
        .iter()
        .find(|r| r.procedure == official)
        .map(|r| r.report.m)
    {
        for row in &mut rows {
            if row.procedure == official {
                continue;
            }
            let mut chg = [0.0; 5];
            for k in 0..5 {
                chg[k] = if base[k].abs() > f64::EPSILON {
                    (row.report.m[k] - base[k]) / base[k] * 100.0
                } else {
                    f64::NAN
                };
            }
            row.chg_pct = Some(chg);
        }
    }
    Ok(SweepResult {
        rows,
        baselines,
        uniform_proposals,
        uniform_exhausted,
    })
}

fn mc_samples(m: &PairProbabilityMatrix) -> Option<f64> {
    match m.provenance() {
        MatrixProvenance::MonteCarlo { samples, .. } => Some(*samples as f64),
        _ => None,
    }
}

/// Delta-method standard errors of the five measures, treating pair
/// estimates as independent binomials and ignoring the folding bias of the
/// absolute value (which inflates small-sample means upward).
fn standard_errors(
    mat_d: &PairProbabilityMatrix,
    mat_u: &PairProbabilityMatrix,
    sets: &TeamSets,
) -> [f64; 5] {
    let nd = mc_samples(mat_d);
    let nu = mc_samples(mat_u);
    if nd.is_none() && nu.is_none() {
        return [0.0; 5];
    }
    let var = |i: usize, j: usize| -> f64 {
        let mut v = 0.0;
        if let Some(n) = nd {
            let p = mat_d.prob(i, j);
            v += p * (1.0 - p) / n;
        }
        if let Some(n) = nu {
            let p = mat_u.prob(i, j);
            v += p * (1.0 - p) / n;
        }
        v
    };
    let n = mat_d.n();
    let mut positive_var_sum = 0.0;
    let mut p_positive = 0u64;
    let mut all: Vec<(f64, f64)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (mat_d.prob(i, j) - mat_u.prob(i, j)).abs();
            let v = var(i, j);
            all.push((d, v));
            if mat_u.prob(i, j) > 0.0 {
                positive_var_sum += v;
                p_positive += 1;
            }
        }
    }
    all.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
    let se1 = if p_positive > 0 {
        positive_var_sum.sqrt() / p_positive as f64
    } else {
        0.0
    };
    let se2 = all.first().map_or(0.0, |(_, v)| v.sqrt());
    let k = (p_positive.min(8).max(1) as usize).min(all.len());
    let se3 = all[..k].iter().map(|(_, v)| v).sum::<f64>().sqrt() / k as f64;
    let focus = |rows: &[usize]| -> f64 {
        if rows.is_empty() || sets.t4u.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for &i in rows {
            for &j in &sets.t4u {
                sum += var(i, j);
            }
        }
        sum.sqrt() / (rows.len() * sets.t4u.len()) as f64
    };
    [
        se1 * 100.0,
        se2 * 100.0,
        se3 * 100.0,
        focus(&sets.t123) * 100.0,
        focus(&sets.t1) * 100.0,
    ]
}

/// Machine-readable sweep output, one row per procedure.
pub fn metrics_csv(result: &SweepResult, master_seed: u64) -> String {
    let mut out = String::from("pot_order,labelling,m1,m2,m3,m4,m5,samples_d,samples_u,seed\n");
    for row in &result.rows {
        let samples_d = mc_samples(&row.matrix).unwrap_or(0.0) as u64;
        let baseline = result
            .baselines
            .iter()
            .find(|(l, _)| *l == row.procedure.labelling)
            .map(|(_, m)| m);
        let samples_u = baseline.and_then(mc_samples).unwrap_or(0.0) as u64;
        let m = row.report.m;
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            row.procedure.order_string(),
            row.procedure.labelling,
            m[0],
            m[1],
            m[2],
            m[3],
            m[4],
            samples_d,
            samples_u,
            master_seed
        );
    }
    out
}

/// Human-readable sweep table with change-vs-official and standard-error
/// columns.
pub fn sweep_report(result: &SweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>8} {:>7} {:>8} {:>7} {:>8} {:>7} {:>8} {:>7} {:>8} {:>7}",
        "procedure", "m1", "chg", "m2", "chg", "m3", "chg", "m4", "chg", "m5", "chg"
    );
    for row in &result.rows {
        let _ = write!(out, "{:<18}", row.procedure.to_string());
        for k in 0..5 {
            let chg = match row.chg_pct {
                Some(chg) if chg[k].is_finite() => format!("{:+.0}%", chg[k]),
                _ => "---".to_string(),
            };
            let _ = write!(out, " {:>8.2} {:>7}", row.report.m[k], chg);
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<18} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "standard errors", "se1", "se2", "se3", "se4", "se5"
    );
    for row in &result.rows {
        let _ = writeln!(
            out,
            "{:<18} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            row.procedure.to_string(),
            row.se[0],
            row.se[1],
            row.se[2],
            row.se[3],
            row.se[4]
        );
    }
    for (labelling, used) in &result.uniform_proposals {
        let _ = writeln!(out, "uniform/{labelling}: {used} proposals consumed");
    }
    if result.uniform_exhausted {
        out.push_str("WARNING: uniform proposal budget exhausted before the target; baseline is smaller than requested\n");
    }
    out.push_str(
        "note: measures fold sampling noise through |d|, which biases small-sample means upward; \
         the se columns are delta-method approximations that ignore that fold\n",
    );
    out
}

/// A rate estimate with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
    pub hits: u64,
    pub trials: u64,
}

impl fmt::Display for RateEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.6}% ({} / {}, 95% CI {:.6}%..{:.6}%)",
            self.rate * 100.0,
            self.hits,
            self.trials,
            self.lo * 100.0,
            self.hi * 100.0
        )
    }
}

/// Wilson score interval for a binomial proportion.
fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (((centre - half) / denom).max(0.0), ((centre + half) / denom).min(1.0))
}

fn poisson_cdf(k: u64, lambda: f64) -> f64 {
    let mut term = (-lambda).exp();
    let mut sum = term;
    for i in 1..=k {
        term *= lambda / i as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// Exact Poisson (Garwood) interval for a count, scaled by the trial count.
/// Falls back to Wilson outside the rare-event regime.
fn poisson_interval(hits: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    if hits > 1000 {
        return wilson_interval(hits, trials);
    }
    let solve = |target_cdf: f64, k: u64| -> f64 {
        // Smallest lambda with P(X <= k) <= target.
        let (mut lo, mut hi) = (0.0f64, (hits as f64 + 1.0) * 10.0 + 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if poisson_cdf(k, mid) > target_cdf {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lo = if hits == 0 { 0.0 } else { solve(0.975, hits - 1) };
    let hi = solve(0.025, hits);
    (lo / trials as f64, hi / trials as f64)
}

/// Estimates how often a uniformly drawn valid assignment of the first
/// `prefix_pots` pots cannot be completed. Prefix validity covers the
/// constraints decidable on those pots alone (confederation caps and the
/// UEFA ceiling); completion is judged without label-bound constraints,
/// which the prefix teams cannot influence.
pub fn estimate_deadlock_rate(
    inst: &Instance,
    samples: u64,
    master_seed: u64,
    prefix_pots: usize,
) -> RateEstimate {
    let prefix = prefix_pots.min(inst.pot_count());
    let hits: u64 = (0..samples)
        .into_par_iter()
        .map_init(
            || ProposalBuf::for_pots(inst, Labelling::ExPost, (0..prefix).collect()),
            |buf, k| {
                let mut rng = substream(master_seed, rng::DOMAIN_DEADLOCK, prefix as u64, k);
                loop {
                    propose_unconstrained(inst, &mut rng, buf);
                    if proposal_valid(inst, buf) {
                        break;
                    }
                }
                let state = buf.materialize(inst);
                u64::from(!completable(inst, &state, Labelling::ExPost))
            },
        )
        .sum();
    let (lo, hi) = wilson_interval(hits, samples);
    RateEstimate {
        rate: hits as f64 / samples as f64,
        lo,
        hi,
        hits,
        trials: samples,
    }
}

/// Estimates the rejection sampler's acceptance probability from a fixed
/// number of proposals, with a Poisson interval. The check honours the
/// full constraint set of the given policy, bracket included for ex-ante.
pub fn estimate_acceptance_rate(
    inst: &Instance,
    labelling: Labelling,
    proposals: u64,
    master_seed: u64,
) -> RateEstimate {
    let stream = match labelling {
        Labelling::ExAnte => 0,
        Labelling::ExPost => 1,
    };
    let hits: u64 = (0..proposals)
        .into_par_iter()
        .map_init(
            || ProposalBuf::new(inst, labelling),
            |buf, k| {
                let mut rng = substream(master_seed, rng::DOMAIN_RATE, stream, k);
                u64::from(staged_uniform_proposal(inst, &mut rng, buf, true))
            },
        )
        .sum();
    let (lo, hi) = poisson_interval(hits, proposals);
    RateEstimate {
        rate: hits as f64 / proposals as f64,
        lo,
        hi,
        hits,
        trials: proposals,
    }
}

/// Outcome of the backtracking-intractability demonstration.
#[derive(Debug, Clone)]
pub struct Claim1Report {
    pub backtrack_status: FeasibilityStatus,
    pub backtrack_steps: u64,
    pub backtrack_seconds: f64,
    pub oracle_status: FeasibilityStatus,
    pub oracle_steps: u64,
    pub oracle_seconds: f64,
    /// Reference estimate of the dead-prefix probability.
    pub reference_deadlock_rate: f64,
    /// Chance that 10,000 simulated draws all avoid such a prefix.
    pub survival_10k: f64,
    /// Steps a naive full recognition of the printed dead state needs:
    /// every order of the remaining 24 teams.
    pub naive_recognition_steps: f64,
}

impl fmt::Display for Claim1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "naive backtracking: {:?} after {} steps in {:.3}s",
            self.backtrack_status, self.backtrack_steps, self.backtrack_seconds
        )?;
        writeln!(
            f,
            "exact oracle:       {:?} after {} steps in {:.6}s",
            self.oracle_status, self.oracle_steps, self.oracle_seconds
        )?;
        writeln!(
            f,
            "full naive recognition of this state needs about {:.3e} steps",
            self.naive_recognition_steps
        )?;
        write!(
            f,
            "dead two-pot prefixes occur at rate ~{:.4}%; 10,000 draws all avoid one with probability ~{:.2e}",
            self.reference_deadlock_rate * 100.0,
            self.survival_10k
        )
    }
}

/// Loads the published dead two-pot state, lets the naive backtracker burn
/// through `step_budget` placements without resolving it, then shows the
/// exact oracle refuting it outright.
pub fn demonstrate_claim1(step_budget: u64) -> Claim1Report {
    let inst = fixtures::wc2026();
    let state = fixtures::deadlocked_pots12_state(&inst);
    let order = state.unassigned(&inst);
    let t0 = Instant::now();
    let naive = backtrack_can_complete(&inst, &state, &order, Labelling::ExPost, step_budget);
    let backtrack_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let exact = can_complete(&inst, &state, Labelling::ExPost);
    let oracle_seconds = t1.elapsed().as_secs_f64();
    let p = 0.002315;
    let factorial_12 = 479_001_600f64;
    Claim1Report {
        backtrack_status: naive.status,
        backtrack_steps: naive.steps,
        backtrack_seconds,
        oracle_status: exact.status,
        oracle_steps: exact.steps,
        oracle_seconds,
        reference_deadlock_rate: p,
        survival_10k: (1.0 - p).powi(10_000),
        naive_recognition_steps: factorial_12 * factorial_12,
    }
}
