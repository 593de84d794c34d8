//! Exact and empirical same-group pair probabilities.
//!
//! On instances small enough to exhaust, [`enumerate_uniform`] and
//! [`enumerate_skip`] compute the pair-probability matrix exactly, working
//! over interchangeable-team classes so symmetric instances stay tiny.
//! Probabilities are kept in exact rational arithmetic while denominators
//! fit `i128` and degrade to floating point otherwise; the matrix records
//! which survived. [`pair_matrix_from_samples`] is the Monte Carlo
//! estimator used where enumeration is hopeless.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::draw::{skip_place, Procedure};
use crate::model::{ClassTable, DrawState, Instance, Labelling};
use crate::rational::{Prob, Rational};

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("state space has about {space:e} points, above the ceiling of {ceiling:e}")]
    CeilingExceeded { space: f64, ceiling: f64 },
    #[error("no samples provided")]
    EmptySamples,
    #[error("draw failed during enumeration: {0}")]
    Draw(#[from] crate::draw::DrawError),
    #[error("malformed matrix document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixProvenance {
    /// Exhaustive enumeration of all valid assignments.
    ExactUniform { assignments: u128 },
    /// Exhaustive enumeration of the skip procedure over all draw orders.
    ExactSkip { procedure: String },
    /// Empirical frequencies.
    MonteCarlo {
        samples: u64,
        seed: u64,
        procedure: String,
    },
}

impl MatrixProvenance {
    pub fn kind(&self) -> &'static str {
        match self {
            MatrixProvenance::ExactUniform { .. } => "exact-uniform",
            MatrixProvenance::ExactSkip { .. } => "exact-skip",
            MatrixProvenance::MonteCarlo { .. } => "monte-carlo",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            MatrixProvenance::ExactUniform { assignments } => {
                format!("exact-uniform({assignments} assignments)")
            }
            MatrixProvenance::ExactSkip { procedure } => format!("exact-skip({procedure})"),
            MatrixProvenance::MonteCarlo {
                samples,
                seed,
                procedure,
            } => format!("monte-carlo({procedure}, {samples} samples, seed {seed})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Rational,
    Float,
}

/// Symmetric matrix of same-group probabilities with zero diagonal. For an
/// instance with `k` pots every row sums to `k - 1`.
#[derive(Debug, Clone)]
pub struct PairProbabilityMatrix {
    instance: String,
    pot_count: usize,
    ids: Vec<String>,
    vals: Vec<f64>,
    exact: Option<Vec<Rational>>,
    provenance: MatrixProvenance,
    arithmetic: Arithmetic,
}

fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl PairProbabilityMatrix {
    fn from_probs(
        inst: &Instance,
        probs: Vec<Prob>,
        provenance: MatrixProvenance,
    ) -> PairProbabilityMatrix {
        let all_exact = probs.iter().all(|p| p.exact().is_some());
        PairProbabilityMatrix {
            instance: inst.name().to_string(),
            pot_count: inst.pot_count(),
            ids: inst.teams().iter().map(|t| t.id.clone()).collect(),
            vals: probs.iter().map(|p| p.to_f64()).collect(),
            exact: all_exact.then(|| probs.iter().map(|p| p.exact().unwrap()).collect()),
            provenance,
            arithmetic: if all_exact {
                Arithmetic::Rational
            } else {
                Arithmetic::Float
            },
        }
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn instance_name(&self) -> &str {
        &self.instance
    }

    pub fn pot_count(&self) -> usize {
        self.pot_count
    }

    pub fn team_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn team_index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.vals[tri_index(self.n(), a, b)]
    }

    /// Exact value, available when the whole matrix stayed rational.
    pub fn exact_prob(&self, i: usize, j: usize) -> Option<Rational> {
        if i == j {
            return Some(Rational::ZERO);
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.exact
            .as_ref()
            .map(|e| e[tri_index(self.n(), a, b)])
    }

    pub fn provenance(&self) -> &MatrixProvenance {
        &self.provenance
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.arithmetic
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        (0..self.n()).map(|j| self.prob(i, j)).sum()
    }

    /// Long-form CSV with a provenance header block. Probabilities are
    /// rendered at 17 significant digits, which round-trips `f64` exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# pair probability matrix\n");
        let _ = writeln!(out, "# instance: {}", self.instance);
        let _ = writeln!(out, "# pots: {}", self.pot_count);
        let _ = writeln!(out, "# provenance: {}", self.provenance.kind());
        match &self.provenance {
            MatrixProvenance::ExactUniform { assignments } => {
                let _ = writeln!(out, "# assignments: {assignments}");
            }
            MatrixProvenance::ExactSkip { procedure } => {
                let _ = writeln!(out, "# procedure: {procedure}");
            }
            MatrixProvenance::MonteCarlo {
                samples,
                seed,
                procedure,
            } => {
                let _ = writeln!(out, "# procedure: {procedure}");
                let _ = writeln!(out, "# samples: {samples}");
                let _ = writeln!(out, "# seed: {seed}");
            }
        }
        let _ = writeln!(
            out,
            "# arithmetic: {}",
            match self.arithmetic {
                Arithmetic::Rational => "rational",
                Arithmetic::Float => "float",
            }
        );
        out.push_str("team_a,team_b,probability\n");
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let _ = writeln!(
                    out,
                    "{},{},{:.16e}",
                    self.ids[i],
                    self.ids[j],
                    self.vals[tri_index(n, i, j)]
                );
            }
        }
        out
    }

    /// Parses a document produced by [`Self::to_csv`]. Values come back as
    /// floats; the header's arithmetic note is preserved as written.
    pub fn from_csv(text: &str) -> Result<PairProbabilityMatrix, ExactError> {
        let mut headers: HashMap<String, String> = HashMap::new();
        let mut rows: Vec<(String, String, f64)> = Vec::new();
        let mut saw_columns = false;
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    headers.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !saw_columns {
                if line != "team_a,team_b,probability" {
                    return Err(ExactError::Format(format!("unexpected column line `{line}`")));
                }
                saw_columns = true;
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let (Some(a), Some(b), Some(p)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ExactError::Format(format!("malformed row `{line}`")));
            };
            let p: f64 = p
                .parse()
                .map_err(|e| ExactError::Format(format!("bad probability `{p}`: {e}")))?;
            rows.push((a.to_string(), b.to_string(), p));
        }
        if !saw_columns {
            return Err(ExactError::Format("missing column header".into()));
        }
        let mut ids: Vec<String> = Vec::new();
        for (a, b, _) in &rows {
            if !ids.contains(a) {
                ids.push(a.clone());
            }
            if !ids.contains(b) {
                ids.push(b.clone());
            }
        }
        let n = ids.len();
        if rows.len() != n * (n - 1) / 2 {
            return Err(ExactError::Format(format!(
                "expected {} rows for {} teams, found {}",
                n * (n - 1) / 2,
                n,
                rows.len()
            )));
        }
        let index = |id: &str| ids.iter().position(|x| x == id).unwrap();
        let mut vals = vec![f64::NAN; n * (n - 1) / 2];
        for (a, b, p) in &rows {
            let (i, j) = (index(a), index(b));
            let (i, j) = if i < j { (i, j) } else { (j, i) };
            vals[tri_index(n, i, j)] = *p;
        }
        if vals.iter().any(|v| v.is_nan()) {
            return Err(ExactError::Format("duplicate or missing pair rows".into()));
        }
        let pot_count = headers
            .get("pots")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ExactError::Format("missing pots header".into()))?;
        let provenance = match headers.get("provenance").map(String::as_str) {
            Some("exact-uniform") => MatrixProvenance::ExactUniform {
                assignments: headers
                    .get("assignments")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0),
            },
            Some("exact-skip") => MatrixProvenance::ExactSkip {
                procedure: headers.get("procedure").cloned().unwrap_or_default(),
            },
            Some("monte-carlo") => MatrixProvenance::MonteCarlo {
                samples: headers.get("samples").and_then(|v| v.parse().ok()).unwrap_or(0),
                seed: headers.get("seed").and_then(|v| v.parse().ok()).unwrap_or(0),
                procedure: headers.get("procedure").cloned().unwrap_or_default(),
            },
            other => {
                return Err(ExactError::Format(format!("unknown provenance {other:?}")));
            }
        };
        let arithmetic = match headers.get("arithmetic").map(String::as_str) {
            Some("rational") => Arithmetic::Rational,
            _ => Arithmetic::Float,
        };
        Ok(PairProbabilityMatrix {
            instance: headers.get("instance").cloned().unwrap_or_default(),
            pot_count,
            ids,
            vals,
            exact: None,
            provenance,
            arithmetic,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    /// Upper bound on the class-level state space that will be exhausted.
    pub ceiling: u128,
    /// Search class representatives instead of raw teams. Turning this off
    /// is only useful for validating the reduction itself.
    pub use_classes: bool,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            ceiling: 100_000_000,
            use_classes: true,
        }
    }
}

fn class_table(inst: &Instance, labelling: Labelling, opts: &EnumerateOptions) -> ClassTable {
    if opts.use_classes {
        inst.classes(labelling).clone()
    } else {
        ClassTable::singletons(inst)
    }
}

/// Number of distinct sequences of class representatives: `n! / prod(k_c!)`.
fn multinomial(counts: &[usize]) -> u128 {
    let mut result: u128 = 1;
    let mut n: u128 = 0;
    for &k in counts {
        for i in 1..=k as u128 {
            n += 1;
            result = result.saturating_mul(n) / i;
        }
    }
    result
}

struct GroupScratch {
    tags: Vec<u8>,
    uefa: Vec<u32>,
    filled: Vec<usize>,
    quarter_seats: [u8; 4],
    pair_path: Vec<[Option<u8>; 2]>,
}

impl GroupScratch {
    fn new(inst: &Instance, state: &DrawState) -> GroupScratch {
        let gc = inst.group_count();
        let mut s = GroupScratch {
            tags: vec![0; gc],
            uefa: vec![0; gc],
            filled: vec![0; gc],
            quarter_seats: [0; 4],
            pair_path: vec![[None, None]; inst.bracket().map_or(0, |b| b.pairs().len())],
        };
        for g in 0..gc {
            for p in 0..inst.pot_count() {
                if let Some(t) = state.team_at(g, p) {
                    s.filled[g] += 1;
                    s.tags[g] |= inst.team(t).confeds.non_uefa_mask();
                    s.uefa[g] += u32::from(inst.team(t).is_uefa());
                }
            }
        }
        if let Some(b) = inst.bracket() {
            for &seed in b.top_seeds() {
                if let Some(g) = state.group_of(seed) {
                    s.quarter_seats[b.quarter_of_group(g)] += 1;
                }
            }
            for (pi, pair) in b.pairs().iter().enumerate() {
                for (side, &t) in pair.iter().enumerate() {
                    if let Some(g) = state.group_of(t) {
                        s.pair_path[pi][side] = Some(b.pathway_of_group(g) as u8);
                    }
                }
            }
        }
        s
    }
}

/// Exact same-group probabilities of the uniform distribution over all
/// valid assignments, by exhaustive class-level enumeration. Refuses when
/// the class-level space exceeds the ceiling.
pub fn enumerate_uniform(
    inst: &Instance,
    labelling: Labelling,
    opts: &EnumerateOptions,
) -> Result<PairProbabilityMatrix, ExactError> {
    let table = class_table(inst, labelling, opts);
    let mut state = DrawState::new(inst);
    if labelling == Labelling::ExAnte {
        for (t, g) in inst.pre_assignments() {
            state
                .place(inst, t, g)
                .map_err(|e| ExactError::Format(e.to_string()))?;
        }
    }
    let mut remaining: Vec<usize> = vec![0; table.classes.len()];
    for (ci, class) in table.classes.iter().enumerate() {
        remaining[ci] = class
            .members
            .iter()
            .filter(|&&t| state.group_of(t).is_none())
            .count();
    }
    // Ceiling estimate: the product over pots of distinct class sequences.
    let mut space: u128 = 1;
    for pot in 0..inst.pot_count() {
        let counts: Vec<usize> = table
            .classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.pot == pot)
            .map(|(ci, _)| remaining[ci])
            .collect();
        space = space.saturating_mul(multinomial(&counts));
    }
    if space > opts.ceiling {
        return Err(ExactError::CeilingExceeded {
            space: space as f64,
            ceiling: opts.ceiling as f64,
        });
    }

    // Free slots in pot-major order, with the closing slot of each group
    // marked so the UEFA floor is enforced as early as possible.
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for pot in 0..inst.pot_count() {
        for g in 0..inst.group_count() {
            if state.team_at(g, pot).is_none() {
                slots.push((g, pot));
            }
        }
    }
    let mut last_slot_of_group: HashMap<usize, usize> = HashMap::new();
    for (idx, &(g, _)) in slots.iter().enumerate() {
        last_slot_of_group.insert(g, idx);
    }

    let mut scratch = GroupScratch::new(inst, &state);
    let c = table.classes.len();
    let mut co_counts = vec![0u128; c * c];
    let mut grid: Vec<usize> = vec![usize::MAX; inst.group_count() * inst.pot_count()];
    for g in 0..inst.group_count() {
        for p in 0..inst.pot_count() {
            if let Some(t) = state.team_at(g, p) {
                grid[g * inst.pot_count() + p] = table.class_of[t];
            }
        }
    }
    let mut leaves: u128 = 0;

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        inst: &Instance,
        table: &ClassTable,
        labelling: Labelling,
        slots: &[(usize, usize)],
        last_slot_of_group: &HashMap<usize, usize>,
        idx: usize,
        remaining: &mut Vec<usize>,
        scratch: &mut GroupScratch,
        grid: &mut Vec<usize>,
        co_counts: &mut Vec<u128>,
        leaves: &mut u128,
    ) {
        if idx == slots.len() {
            *leaves += 1;
            let pc = inst.pot_count();
            for g in 0..inst.group_count() {
                for a in 0..pc {
                    for b in (a + 1)..pc {
                        let (ca, cb) = (grid[g * pc + a], grid[g * pc + b]);
                        let (lo, hi) = if ca <= cb { (ca, cb) } else { (cb, ca) };
                        co_counts[lo * table.classes.len() + hi] += 1;
                    }
                }
            }
            return;
        }
        let (g, pot) = slots[idx];
        let closing = last_slot_of_group[&g] == idx;
        for ci in 0..table.classes.len() {
            if remaining[ci] == 0 || table.classes[ci].pot != pot {
                continue;
            }
            let class = &table.classes[ci];
            if scratch.tags[g] & class.confeds.non_uefa_mask() != 0 {
                continue;
            }
            let is_uefa = class.is_uefa();
            if is_uefa && scratch.uefa[g] >= inst.uefa_max() {
                continue;
            }
            if closing && scratch.uefa[g] + u32::from(is_uefa) < inst.uefa_min() {
                continue;
            }
            let mut pair_undo = None;
            if labelling == Labelling::ExAnte {
                if let Some(b) = inst.bracket() {
                    if class.top_seed && scratch.quarter_seats[b.quarter_of_group(g)] > 0 {
                        continue;
                    }
                    if let Some((pi, side)) = class.pair {
                        let path = b.pathway_of_group(g) as u8;
                        if scratch.pair_path[pi][1 - side] == Some(path) {
                            continue;
                        }
                        scratch.pair_path[pi][side] = Some(path);
                        pair_undo = Some((pi, side));
                    }
                    if class.top_seed {
                        scratch.quarter_seats[b.quarter_of_group(g)] += 1;
                    }
                }
            }
            remaining[ci] -= 1;
            scratch.tags[g] |= class.confeds.non_uefa_mask();
            scratch.uefa[g] += u32::from(is_uefa);
            grid[g * inst.pot_count() + pot] = ci;
            recurse(
                inst,
                table,
                labelling,
                slots,
                last_slot_of_group,
                idx + 1,
                remaining,
                scratch,
                grid,
                co_counts,
                leaves,
            );
            grid[g * inst.pot_count() + pot] = usize::MAX;
            scratch.uefa[g] -= u32::from(is_uefa);
            // Recompute the tag byte: another pot may share a tag with the
            // removed class only if caps were violated, so clearing is safe,
            // but stay defensive about multi-tag placeholders.
            scratch.tags[g] &= !class.confeds.non_uefa_mask();
            for p in 0..inst.pot_count() {
                let other = grid[g * inst.pot_count() + p];
                if other != usize::MAX {
                    scratch.tags[g] |= table.classes[other].confeds.non_uefa_mask();
                }
            }
            remaining[ci] += 1;
            if let Some((pi, side)) = pair_undo {
                scratch.pair_path[pi][side] = None;
            }
            if labelling == Labelling::ExAnte && class.top_seed {
                if let Some(b) = inst.bracket() {
                    scratch.quarter_seats[b.quarter_of_group(g)] -= 1;
                }
            }
        }
    }

    recurse(
        inst,
        &table,
        labelling,
        &slots,
        &last_slot_of_group,
        0,
        &mut remaining,
        &mut scratch,
        &mut grid,
        &mut co_counts,
        &mut leaves,
    );
    if leaves == 0 {
        return Err(ExactError::Format(
            "instance admits no valid assignment".into(),
        ));
    }

    // Raw assignment count: each class-level assignment stands for the
    // permutations of members within each class.
    let mut raw: u128 = leaves;
    for (ci, class) in table.classes.iter().enumerate() {
        let drawn = class
            .members
            .len()
            .min(if labelling == Labelling::ExAnte && class.pre_assigned.is_some() {
                0
            } else {
                class.members.len()
            });
        let _ = ci;
        for k in 2..=drawn as u128 {
            raw = raw.saturating_mul(k);
        }
    }

    let probs = class_pairs_to_team_probs(inst, &table, |a, b| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let co = co_counts[lo * table.classes.len() + hi];
        let na = table.classes[a].members.len() as i128;
        let nb = table.classes[b].members.len() as i128;
        Prob::ratio(co as i128, leaves as i128 * na * nb)
    });
    Ok(PairProbabilityMatrix::from_probs(
        inst,
        probs,
        MatrixProvenance::ExactUniform { assignments: raw },
    ))
}

/// Exact same-group probabilities of the skip procedure, by recursion over
/// all within-pot draw orders (uniform over orders), applying the actual
/// skip engine deterministically at each step. States that coincide at the
/// class level are merged with their probability mass.
pub fn enumerate_skip(
    inst: &Instance,
    procedure: &Procedure,
    opts: &EnumerateOptions,
) -> Result<PairProbabilityMatrix, ExactError> {
    let labelling = procedure.labelling;
    let table = class_table(inst, labelling, opts);
    let mut base = DrawState::new(inst);
    if labelling == Labelling::ExAnte {
        for (t, g) in inst.pre_assignments() {
            base.place(inst, t, g)
                .map_err(|e| ExactError::Format(e.to_string()))?;
        }
    }
    let pc = inst.pot_count();
    let gc = inst.group_count();
    let base_remaining: Vec<usize> = (0..table.classes.len())
        .map(|ci| {
            table.classes[ci]
                .members
                .iter()
                .filter(|&&t| base.group_of(t).is_none())
                .count()
        })
        .collect();
    let mut space: u128 = 1;
    for pot in 0..pc {
        let counts: Vec<usize> = table
            .classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.pot == pot)
            .map(|(ci, _)| base_remaining[ci])
            .collect();
        space = space.saturating_mul(multinomial(&counts));
    }
    if space > opts.ceiling {
        return Err(ExactError::CeilingExceeded {
            space: space as f64,
            ceiling: opts.ceiling as f64,
        });
    }

    type Grid = Vec<u8>;
    let grid_of = |state: &DrawState| -> Grid {
        let mut grid = vec![0u8; gc * pc];
        for g in 0..gc {
            for p in 0..pc {
                if let Some(t) = state.team_at(g, p) {
                    grid[g * pc + p] = table.class_of[t] as u8 + 1;
                }
            }
        }
        grid
    };
    // Rebuilds a concrete state from a class grid, handing members of each
    // class to its groups in scanning order. Any member works: classes are
    // interchangeable by construction.
    let materialize = |grid: &Grid| -> DrawState {
        let mut used: Vec<usize> = vec![0; table.classes.len()];
        let mut state = DrawState::new(inst);
        for g in 0..gc {
            for p in 0..pc {
                let cell = grid[g * pc + p];
                if cell == 0 {
                    continue;
                }
                let ci = cell as usize - 1;
                let member = table.classes[ci].members[used[ci]];
                used[ci] += 1;
                state
                    .place(inst, member, g)
                    .expect("grid is structurally valid");
            }
        }
        state
    };

    let total_drawable: usize = base_remaining.iter().sum();
    let mut frontier: HashMap<Grid, Prob> = HashMap::new();
    frontier.insert(grid_of(&base), Prob::ONE);

    for _ in 0..total_drawable {
        let mut next: HashMap<Grid, Prob> = HashMap::with_capacity(frontier.len() * 2);
        for (grid, mass) in frontier {
            let state = materialize(&grid);
            // Current pot: first in the procedure's order with undrawn teams.
            let mut remaining: Vec<usize> = vec![0; table.classes.len()];
            for (ci, class) in table.classes.iter().enumerate() {
                remaining[ci] = class
                    .members
                    .iter()
                    .filter(|&&t| state.group_of(t).is_none())
                    .count();
            }
            let pot = procedure
                .pot_order()
                .iter()
                .copied()
                .find(|&p| {
                    table
                        .classes
                        .iter()
                        .enumerate()
                        .any(|(ci, c)| c.pot == p && remaining[ci] > 0)
                })
                .expect("teams remain");
            let pot_remaining: usize = table
                .classes
                .iter()
                .enumerate()
                .filter(|(_, c)| c.pot == pot)
                .map(|(ci, _)| remaining[ci])
                .sum();
            for ci in 0..table.classes.len() {
                if table.classes[ci].pot != pot || remaining[ci] == 0 {
                    continue;
                }
                let mut work = state.clone();
                let member = table.classes[ci]
                    .members
                    .iter()
                    .copied()
                    .find(|&t| work.group_of(t).is_none())
                    .expect("remaining member");
                skip_place(inst, &mut work, member, labelling)?;
                let share = mass.mul_ratio(remaining[ci] as u64, pot_remaining as u64);
                let key = grid_of(&work);
                let slot = next.entry(key).or_insert(Prob::ZERO);
                *slot = slot.add(share);
            }
        }
        frontier = next;
    }

    // Terminal accumulation: each surviving grid contributes its mass to
    // every member pair of each co-resident class pair.
    let c = table.classes.len();
    let mut class_mass = vec![Prob::ZERO; c * c];
    for (grid, mass) in &frontier {
        for g in 0..gc {
            for a in 0..pc {
                for b in (a + 1)..pc {
                    let (ca, cb) = (grid[g * pc + a], grid[g * pc + b]);
                    debug_assert!(ca != 0 && cb != 0);
                    let (lo, hi) = {
                        let (x, y) = (ca as usize - 1, cb as usize - 1);
                        if x <= y {
                            (x, y)
                        } else {
                            (y, x)
                        }
                    };
                    let slot = &mut class_mass[lo * c + hi];
                    *slot = slot.add(*mass);
                }
            }
        }
    }

    let probs = class_pairs_to_team_probs(inst, &table, |a, b| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let na = table.classes[a].members.len() as u64;
        let nb = table.classes[b].members.len() as u64;
        class_mass[lo * c + hi].mul_ratio(1, na * nb)
    });
    Ok(PairProbabilityMatrix::from_probs(
        inst,
        probs,
        MatrixProvenance::ExactSkip {
            procedure: procedure.to_string(),
        },
    ))
}

/// Expands class-pair probabilities to the full team-level triangle.
fn class_pairs_to_team_probs(
    inst: &Instance,
    table: &ClassTable,
    pair_prob: impl Fn(usize, usize) -> Prob,
) -> Vec<Prob> {
    let n = inst.team_count();
    let mut probs = vec![Prob::ZERO; n * (n - 1) / 2];
    for i in 0..n {
        for j in (i + 1)..n {
            let (ca, cb) = (table.class_of[i], table.class_of[j]);
            probs[tri_index(n, i, j)] = if ca == cb {
                Prob::ZERO
            } else {
                pair_prob(ca, cb)
            };
        }
    }
    probs
}

/// Streaming accumulator of same-group counts; mergeable, so simulations
/// can fold per worker and combine.
#[derive(Debug, Clone)]
pub struct PairAccumulator {
    n: usize,
    pot_count: usize,
    counts: Vec<u64>,
    samples: u64,
}

impl PairAccumulator {
    pub fn new(inst: &Instance) -> PairAccumulator {
        let n = inst.team_count();
        PairAccumulator {
            n,
            pot_count: inst.pot_count(),
            counts: vec![0; n * (n - 1) / 2],
            samples: 0,
        }
    }

    pub fn add(&mut self, inst: &Instance, state: &DrawState) {
        debug_assert!(state.is_complete(inst));
        self.samples += 1;
        for g in 0..inst.group_count() {
            for a in 0..self.pot_count {
                let Some(ta) = state.team_at(g, a) else { continue };
                for b in (a + 1)..self.pot_count {
                    let Some(tb) = state.team_at(g, b) else { continue };
                    let (i, j) = if ta < tb { (ta, tb) } else { (tb, ta) };
                    self.counts[tri_index(self.n, i, j)] += 1;
                }
            }
        }
    }

    pub fn merge(&mut self, other: &PairAccumulator) {
        assert_eq!(self.n, other.n);
        self.samples += other.samples;
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn into_matrix(
        self,
        inst: &Instance,
        provenance: MatrixProvenance,
    ) -> Result<PairProbabilityMatrix, ExactError> {
        if self.samples == 0 {
            return Err(ExactError::EmptySamples);
        }
        let probs: Vec<Prob> = self
            .counts
            .iter()
            .map(|&c| Prob::Approx(c as f64 / self.samples as f64))
            .collect();
        Ok(PairProbabilityMatrix::from_probs(inst, probs, provenance))
    }
}

/// Empirical co-membership frequencies over complete valid assignments.
pub fn pair_matrix_from_samples<'a>(
    inst: &Instance,
    samples: impl IntoIterator<Item = &'a DrawState>,
    provenance: MatrixProvenance,
) -> Result<PairProbabilityMatrix, ExactError> {
    let mut acc = PairAccumulator::new(inst);
    for s in samples {
        acc.add(inst, s);
    }
    acc.into_matrix(inst, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn uniform_example3_matches_hand_counts() {
        let inst = fixtures::example3_random();
        let m = enumerate_uniform(&inst, Labelling::ExAnte, &EnumerateOptions::default()).unwrap();
        let idx = |id: &str| m.team_index(id).unwrap();
        assert_eq!(
            m.provenance(),
            &MatrixProvenance::ExactUniform { assignments: 24 }
        );
        assert_eq!(m.exact_prob(idx("team-1"), idx("team-5")), Some(r(1, 2)));
        assert_eq!(m.exact_prob(idx("team-1"), idx("team-4")), Some(r(1, 4)));
        assert_eq!(m.exact_prob(idx("team-1"), idx("team-6")), Some(r(1, 4)));
        assert_eq!(m.exact_prob(idx("team-2"), idx("team-5")), Some(r(0, 1)));
        assert_eq!(m.arithmetic(), Arithmetic::Rational);
    }

    #[test]
    fn uniform_refuses_oversized_instances() {
        let inst = fixtures::wc2026();
        let err = enumerate_uniform(&inst, Labelling::ExAnte, &EnumerateOptions::default())
            .unwrap_err();
        assert!(matches!(err, ExactError::CeilingExceeded { .. }), "{err}");
    }

    #[test]
    fn skip_example3_preassigned_is_uniform_over_opponents() {
        let inst = fixtures::example3_preassigned();
        let proc = Procedure::official(2);
        let m = enumerate_skip(&inst, &proc, &EnumerateOptions::default()).unwrap();
        let idx = |id: &str| m.team_index(id).unwrap();
        for other in ["team-4", "team-5", "team-6"] {
            assert_eq!(m.exact_prob(idx("team-1"), idx(other)), Some(r(1, 3)), "{other}");
        }
    }

    #[test]
    fn skip_example3_random_restores_uniformity() {
        let inst = fixtures::example3_random();
        let proc = Procedure::official(2);
        let m = enumerate_skip(&inst, &proc, &EnumerateOptions::default()).unwrap();
        let idx = |id: &str| m.team_index(id).unwrap();
        assert_eq!(m.exact_prob(idx("team-1"), idx("team-5")), Some(r(1, 2)));
        assert_eq!(m.exact_prob(idx("team-1"), idx("team-4")), Some(r(1, 4)));
        let u = enumerate_uniform(&inst, Labelling::ExAnte, &EnumerateOptions::default()).unwrap();
        for i in 0..m.n() {
            for j in (i + 1)..m.n() {
                assert_eq!(m.exact_prob(i, j), u.exact_prob(i, j));
            }
        }
    }

    #[test]
    fn skip_wc1990_gives_one_fifth_for_uefa_in_group_d() {
        let inst = fixtures::wc1990();
        let proc = Procedure::official(2);
        let m = enumerate_skip(&inst, &proc, &EnumerateOptions::default()).unwrap();
        let wg = m.team_index("west-germany").unwrap();
        let mut total = Rational::ZERO;
        for id in ["czechoslovakia", "ireland", "romania", "sweden"] {
            let p = m.exact_prob(wg, m.team_index(id).unwrap()).unwrap();
            assert_eq!(p, r(1, 20), "{id}");
            total = total.checked_add(p).unwrap();
        }
        assert_eq!(total, r(1, 5));
    }

    #[test]
    fn reduction_and_singleton_enumeration_agree() {
        for inst in [fixtures::example3_random(), fixtures::wc1990()] {
            let with = EnumerateOptions::default();
            let without = EnumerateOptions {
                use_classes: false,
                ..Default::default()
            };
            let mu_a = enumerate_uniform(&inst, Labelling::ExAnte, &with).unwrap();
            let mu_b = enumerate_uniform(&inst, Labelling::ExAnte, &without).unwrap();
            let proc = Procedure::official(inst.pot_count());
            let ms_a = enumerate_skip(&inst, &proc, &with).unwrap();
            let ms_b = enumerate_skip(&inst, &proc, &without).unwrap();
            for i in 0..inst.team_count() {
                for j in (i + 1)..inst.team_count() {
                    assert_eq!(mu_a.exact_prob(i, j), mu_b.exact_prob(i, j), "{}", inst.name());
                    assert_eq!(ms_a.exact_prob(i, j), ms_b.exact_prob(i, j), "{}", inst.name());
                }
            }
        }
    }

    #[test]
    fn row_sums_equal_pots_minus_one() {
        let inst = fixtures::wc1990();
        let m = enumerate_skip(&inst, &Procedure::official(2), &EnumerateOptions::default()).unwrap();
        for i in 0..m.n() {
            assert!((m.row_sum(i) - 1.0).abs() < 1e-12, "row {i}: {}", m.row_sum(i));
        }
    }

    #[test]
    fn prohibited_pairs_are_exactly_zero() {
        let inst = fixtures::wc1990();
        let m = enumerate_uniform(&inst, Labelling::ExAnte, &EnumerateOptions::default()).unwrap();
        let a = m.team_index("colombia").unwrap();
        // Shared-confederation pairs and same-pot pairs never meet.
        for id in ["argentina", "brazil", "uruguay"] {
            let b = m.team_index(id).unwrap();
            assert_eq!(m.exact_prob(a, b), Some(Rational::ZERO), "{id}");
        }
    }

    #[test]
    fn single_sample_matrix_is_indicator() {
        let inst = fixtures::example3_random();
        let (state, _) = crate::draw::run_skip_draw(&inst, &Procedure::official(2), 9, 0).unwrap();
        let m = pair_matrix_from_samples(
            &inst,
            [&state],
            MatrixProvenance::MonteCarlo {
                samples: 1,
                seed: 9,
                procedure: "1-2/ex-ante".into(),
            },
        )
        .unwrap();
        for i in 0..m.n() {
            for j in (i + 1)..m.n() {
                let v = m.prob(i, j);
                assert!(v == 0.0 || v == 1.0);
            }
            assert!((m.row_sum(i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sample_stream_is_an_error() {
        let inst = fixtures::example3_random();
        let err = pair_matrix_from_samples(
            &inst,
            std::iter::empty(),
            MatrixProvenance::MonteCarlo {
                samples: 0,
                seed: 0,
                procedure: String::new(),
            },
        )
        .unwrap_err();
        assert!(matches!(err, ExactError::EmptySamples));
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let inst = fixtures::example3_preassigned();
        let m = enumerate_skip(&inst, &Procedure::official(2), &EnumerateOptions::default()).unwrap();
        let text = m.to_csv();
        let parsed = PairProbabilityMatrix::from_csv(&text).unwrap();
        assert_eq!(parsed.to_csv(), text);
        assert_eq!(parsed.team_ids(), m.team_ids());
        assert_eq!(parsed.pot_count(), 2);
    }
}
