//! Non-uniformity measures and structural pair counts.
//!
//! Given a procedure's pair-probability matrix and a uniform baseline over
//! the same teams, five aggregations of the per-pair deviations are
//! reported, all in percentage points:
//!
//! * `m1` — mean absolute difference over pairs the baseline allows;
//! * `m2` — largest absolute difference over all pairs;
//! * `m3` — mean of the largest eight absolute differences;
//! * `m4` — mean absolute difference over (pots 1..P-1) x (final-pot UEFA)
//!   pairs;
//! * `m5` — mean absolute difference over (pot 1) x (final-pot UEFA) pairs.

use std::fmt::Write as _;

use thiserror::Error;

use crate::exact::PairProbabilityMatrix;
use crate::model::{Confederation, Instance};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("matrices disagree on the team universe")]
    TeamMismatch,
    #[error("team set refers to an index outside the matrix")]
    SetOutOfRange,
}

/// Team groupings the focused measures range over, derived from the
/// instance: pot 1, all pots except the last, and the UEFA-tagged teams of
/// the last pot.
#[derive(Debug, Clone)]
pub struct TeamSets {
    pub t1: Vec<usize>,
    pub t123: Vec<usize>,
    pub t4u: Vec<usize>,
}

impl TeamSets {
    pub fn from_instance(inst: &Instance) -> TeamSets {
        let last = inst.pot_count() - 1;
        let t1 = inst.pot_teams(0).to_vec();
        let mut t123 = Vec::new();
        for pot in 0..last {
            t123.extend_from_slice(inst.pot_teams(pot));
        }
        let t4u = inst
            .pot_teams(last)
            .iter()
            .copied()
            .filter(|&t| inst.team(t).is_uefa())
            .collect();
        TeamSets { t1, t123, t4u }
    }
}

/// Structural pair census of an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCounts {
    /// Cross-pot pairs sharing the given capped confederation tag.
    pub prohibited: [u64; Confederation::COUNT],
    /// Distinct prohibited cross-pot pairs (a pair sharing two tags counts
    /// once).
    pub prohibited_total: u64,
    /// All cross-pot pairs.
    pub cross_pot: u64,
    /// Cross-pot pairs that can occur in a valid assignment.
    pub p_positive: u64,
}

/// Counts, for each capped confederation, the cross-pot team pairs that can
/// never share a group (placeholder tags included), and the complementary
/// number of allowed pairs.
pub fn count_pairs(inst: &Instance) -> PairCounts {
    let mut prohibited = [0u64; Confederation::COUNT];
    let mut prohibited_total = 0u64;
    let mut cross_pot = 0u64;
    let n = inst.team_count();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (inst.team(i), inst.team(j));
            if a.pot_index() == b.pot_index() {
                continue;
            }
            cross_pot += 1;
            let shared = a.confeds.mask() & b.confeds.mask() & crate::model::ConfedSet::NON_UEFA_MASK;
            if shared != 0 {
                prohibited_total += 1;
                for c in Confederation::ALL {
                    if c != Confederation::Uefa && shared & (1 << c.index()) != 0 {
                        prohibited[c.index()] += 1;
                    }
                }
            }
        }
    }
    PairCounts {
        prohibited,
        prohibited_total,
        cross_pot,
        p_positive: cross_pot - prohibited_total,
    }
}

/// The five measures for one procedure against a baseline.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// Description of the procedure matrix (its provenance).
    pub procedure: String,
    /// Measures in percentage points, indexed m1..m5.
    pub m: [f64; 5],
    /// Pairs with positive baseline probability.
    pub p_positive: u64,
    pub draw_provenance: String,
    pub baseline_provenance: String,
}

/// Computes the five measures. Both matrices must cover the same teams in
/// the same order; `sets` indexes into that order.
pub fn compute_metrics(
    mat_d: &PairProbabilityMatrix,
    mat_u: &PairProbabilityMatrix,
    sets: &TeamSets,
) -> Result<MetricsReport, MetricsError> {
    if mat_d.team_ids() != mat_u.team_ids() {
        return Err(MetricsError::TeamMismatch);
    }
    let n = mat_d.n();
    if sets
        .t1
        .iter()
        .chain(&sets.t123)
        .chain(&sets.t4u)
        .any(|&t| t >= n)
    {
        return Err(MetricsError::SetOutOfRange);
    }
    let mut deltas: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    let mut sum_positive = 0.0;
    let mut p_positive = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (mat_d.prob(i, j) - mat_u.prob(i, j)).abs();
            deltas.push(d);
            if mat_u.prob(i, j) > 0.0 {
                sum_positive += d;
                p_positive += 1;
            }
        }
    }
    deltas.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    let m1 = if p_positive > 0 {
        sum_positive / p_positive as f64
    } else {
        0.0
    };
    let m2 = deltas.first().copied().unwrap_or(0.0);
    // With fewer than eight allowed pairs, average what exists.
    let k = (p_positive.min(8).max(1) as usize).min(deltas.len());
    let m3 = deltas[..k].iter().sum::<f64>() / k as f64;
    let focus = |rows: &[usize]| -> f64 {
        if rows.is_empty() || sets.t4u.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for &i in rows {
            for &j in &sets.t4u {
                sum += (mat_d.prob(i, j) - mat_u.prob(i, j)).abs();
            }
        }
        sum / (rows.len() * sets.t4u.len()) as f64
    };
    let m4 = focus(&sets.t123);
    let m5 = focus(&sets.t1);
    let report = MetricsReport {
        procedure: mat_d.provenance().describe(),
        m: [m1 * 100.0, m2 * 100.0, m3 * 100.0, m4 * 100.0, m5 * 100.0],
        p_positive,
        draw_provenance: mat_d.provenance().describe(),
        baseline_provenance: mat_u.provenance().describe(),
    };
    debug_assert!(report.m[0] <= report.m[2] + 1e-12 && report.m[2] <= report.m[1] + 1e-12);
    Ok(report)
}

/// One allowed pair's deviation, in percentage points.
#[derive(Debug, Clone)]
pub struct DeltaRow {
    pub team_a: String,
    pub team_b: String,
    pub delta_pp: f64,
}

/// Per-pair signed differences (procedure minus baseline) for every allowed
/// cross-pot pair, skipping structurally prohibited ones.
pub fn delta_table(
    mat_d: &PairProbabilityMatrix,
    mat_u: &PairProbabilityMatrix,
    inst: &Instance,
) -> Result<Vec<DeltaRow>, MetricsError> {
    if mat_d.team_ids() != mat_u.team_ids() {
        return Err(MetricsError::TeamMismatch);
    }
    let mut rows = Vec::new();
    let n = inst.team_count();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (inst.team(i), inst.team(j));
            if a.pot_index() == b.pot_index() {
                continue;
            }
            if a.confeds.mask() & b.confeds.mask() & crate::model::ConfedSet::NON_UEFA_MASK != 0 {
                continue;
            }
            rows.push(DeltaRow {
                team_a: a.id.clone(),
                team_b: b.id.clone(),
                delta_pp: (mat_d.prob(i, j) - mat_u.prob(i, j)) * 100.0,
            });
        }
    }
    Ok(rows)
}

pub fn render_delta_table(rows: &[DeltaRow]) -> String {
    let mut out = String::from("team_a,team_b,delta_pp\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.2}", r.team_a, r.team_b, r.delta_pp);
    }
    out
}
