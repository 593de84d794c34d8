//! Draw procedures: the skip engine, unconstrained and rejection samplers,
//! and ex-post group labelling.

pub mod rng;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

use crate::constraints::{self, check_placement};
use crate::feasibility::completable;
use crate::model::{DrawState, Instance, Labelling};

#[derive(Debug, Error)]
pub enum DrawError {
    #[error("invalid pot order: {0}")]
    BadPotOrder(String),
    #[error("no feasible group for team `{team}`; the starting state was not completable")]
    NoFeasibleGroup { team: String },
    #[error("invalid draw state: {0}")]
    InvalidState(String),
    #[error("labelling failed: {0}")]
    LabellingFailed(String),
}

/// One variant of the draw: the order the pots are emptied in and the group
/// labelling policy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Procedure {
    pot_order: Vec<usize>,
    pub labelling: Labelling,
}

impl Procedure {
    /// `pot_order` uses zero-based pot indices and must be a permutation of
    /// `0..pot_count` for the instance it is used with.
    pub fn new(pot_order: Vec<usize>, labelling: Labelling) -> Result<Self, DrawError> {
        let mut seen = vec![false; pot_order.len()];
        for &p in &pot_order {
            if p >= pot_order.len() || seen[p] {
                return Err(DrawError::BadPotOrder(format!("{pot_order:?}")));
            }
            seen[p] = true;
        }
        Ok(Procedure {
            pot_order,
            labelling,
        })
    }

    /// Ascending pot order with ex-ante labelling.
    pub fn official(pot_count: usize) -> Self {
        Procedure {
            pot_order: (0..pot_count).collect(),
            labelling: Labelling::ExAnte,
        }
    }

    /// Parses `"1-2-3-4"` or `"1,2,3,4"` (one-based pot numbers).
    pub fn parse(order: &str, labelling: Labelling) -> Result<Self, DrawError> {
        let parts: Result<Vec<usize>, _> = order
            .split(['-', ','])
            .map(|s| s.trim().parse::<usize>())
            .collect();
        let parts = parts.map_err(|_| DrawError::BadPotOrder(order.to_string()))?;
        if parts.iter().any(|&p| p == 0) {
            return Err(DrawError::BadPotOrder(order.to_string()));
        }
        Procedure::new(parts.iter().map(|&p| p - 1).collect(), labelling)
    }

    pub fn pot_order(&self) -> &[usize] {
        &self.pot_order
    }

    /// `"1-2-3-4"` in one-based pot numbers.
    pub fn order_string(&self) -> String {
        self.pot_order
            .iter()
            .map(|p| (p + 1).to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// Stable identifier used to separate random streams per procedure.
    pub fn stream_id(&self) -> u64 {
        let mut id = match self.labelling {
            Labelling::ExAnte => 0u64,
            Labelling::ExPost => 1u64,
        };
        for &p in &self.pot_order {
            id = id << 5 | (p as u64 + 1);
        }
        id
    }

    /// Every pot permutation for one labelling policy, in lexicographic
    /// order.
    pub fn all_orders(pot_count: usize, labelling: Labelling) -> Vec<Procedure> {
        let mut orders = Vec::new();
        let mut current = Vec::with_capacity(pot_count);
        let mut used = vec![false; pot_count];
        fn build(
            pot_count: usize,
            current: &mut Vec<usize>,
            used: &mut Vec<bool>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if current.len() == pot_count {
                out.push(current.clone());
                return;
            }
            for p in 0..pot_count {
                if !used[p] {
                    used[p] = true;
                    current.push(p);
                    build(pot_count, current, used, out);
                    current.pop();
                    used[p] = false;
                }
            }
        }
        build(pot_count, &mut current, &mut used, &mut orders);
        orders
            .into_iter()
            .map(|o| Procedure {
                pot_order: o,
                labelling,
            })
            .collect()
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.order_string(), self.labelling)
    }
}

/// One drawn team: the groups tried and rejected, and the group taken.
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptEvent {
    pub team: String,
    pub skipped: Vec<String>,
    pub group: String,
}

/// Complete audit record of one skip draw. Replaying the event sequence
/// through the engine reproduces the final assignment.
#[derive(Debug, Clone)]
pub struct DrawTranscript {
    pub procedure: Procedure,
    pub master_seed: u64,
    pub draw_index: u64,
    pub events: Vec<TranscriptEvent>,
    pub assignment: BTreeMap<String, String>,
}

impl DrawTranscript {
    /// JSON lines: one event per line, then a final line with the full
    /// assignment and the seed.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        #[derive(Serialize)]
        struct Tail<'a> {
            assignment: &'a BTreeMap<String, String>,
            procedure: String,
            seed: u64,
            draw_index: u64,
        }
        out.push_str(
            &serde_json::to_string(&Tail {
                assignment: &self.assignment,
                procedure: self.procedure.to_string(),
                seed: self.master_seed,
                draw_index: self.draw_index,
            })
            .expect("tail serializes"),
        );
        out.push('\n');
        out
    }

    /// Re-runs the skip engine over the recorded team sequence and checks it
    /// reproduces the recorded assignment.
    pub fn replays_identically(&self, inst: &Instance) -> bool {
        let mut state = DrawState::new(inst);
        if self.procedure.labelling == Labelling::ExAnte {
            for (t, g) in inst.pre_assignments() {
                if state.place(inst, t, g).is_err() {
                    return false;
                }
            }
        }
        for e in &self.events {
            let Some(team) = inst.team_index(&e.team) else {
                return false;
            };
            match skip_place(inst, &mut state, team, self.procedure.labelling) {
                Ok((group, _)) => {
                    if inst.label(group) != e.group {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
        self.assignment.iter().all(|(id, label)| {
            inst.team_index(id)
                .and_then(|t| state.group_of(t))
                .map(|g| inst.label(g))
                == Some(label.as_str())
        })
    }
}

/// Places one drawn team into the first available group (in label order for
/// ex-ante, creation order for ex-post) that passes the incremental checks
/// and leaves the draw completable. Returns the chosen group and the groups
/// tried and rejected before it.
///
/// The caller must start from a completable state; if no group qualifies,
/// that precondition was broken and an error is returned rather than
/// continuing silently.
pub fn skip_place(
    inst: &Instance,
    state: &mut DrawState,
    team: usize,
    labelling: Labelling,
) -> Result<(usize, Vec<usize>), DrawError> {
    let pot = inst.team(team).pot_index();
    let mut skipped = Vec::new();
    for group in 0..inst.group_count() {
        if state.team_at(group, pot).is_some() {
            continue;
        }
        if !check_placement(inst, state, team, group, labelling) {
            skipped.push(group);
            continue;
        }
        state
            .place(inst, team, group)
            .expect("slot checked free");
        if completable(inst, state, labelling) {
            return Ok((group, skipped));
        }
        state.remove(inst, team).expect("just placed");
        skipped.push(group);
    }
    Err(DrawError::NoFeasibleGroup {
        team: inst.team(team).id.clone(),
    })
}

/// Runs one complete skip draw. Pots are emptied in the procedure's order;
/// within a pot the teams not already seated are drawn uniformly without
/// replacement. Under ex-ante labelling every pre-assigned team is seated
/// before any ball is drawn; under ex-post, pre-assignments and bracket
/// constraints are inactive.
///
/// Randomness comes from the counter-based stream for
/// `(master_seed, procedure, draw_index)`.
pub fn run_skip_draw(
    inst: &Instance,
    procedure: &Procedure,
    master_seed: u64,
    draw_index: u64,
) -> Result<(DrawState, DrawTranscript), DrawError> {
    if procedure.pot_order.len() != inst.pot_count() {
        return Err(DrawError::BadPotOrder(format!(
            "procedure has {} pots, instance has {}",
            procedure.pot_order.len(),
            inst.pot_count()
        )));
    }
    let mut rng = rng::substream(
        master_seed,
        rng::DOMAIN_SKIP,
        procedure.stream_id(),
        draw_index,
    );
    let mut state = DrawState::new(inst);
    if procedure.labelling == Labelling::ExAnte {
        for (t, g) in inst.pre_assignments() {
            state
                .place(inst, t, g)
                .map_err(|e| DrawError::InvalidState(e.to_string()))?;
        }
    }
    let mut events = Vec::with_capacity(inst.team_count());
    for &pot in &procedure.pot_order {
        let mut drawable: Vec<usize> = inst
            .pot_teams(pot)
            .iter()
            .copied()
            .filter(|&t| state.group_of(t).is_none())
            .collect();
        rng::shuffle(&mut drawable, &mut rng);
        for team in drawable {
            let (group, skipped) = skip_place(inst, &mut state, team, procedure.labelling)?;
            events.push(TranscriptEvent {
                team: inst.team(team).id.clone(),
                skipped: skipped.iter().map(|&g| inst.label(g).to_string()).collect(),
                group: inst.label(group).to_string(),
            });
        }
    }
    debug_assert!(constraints::check_full(inst, &state, procedure.labelling).is_empty());
    let assignment = (0..inst.team_count())
        .map(|t| {
            (
                inst.team(t).id.clone(),
                inst.label(state.group_of(t).expect("draw complete")).to_string(),
            )
        })
        .collect();
    let transcript = DrawTranscript {
        procedure: procedure.clone(),
        master_seed,
        draw_index,
        events,
        assignment,
    };
    Ok((state, transcript))
}

/// Scratch space and precomputed tables for generating unconstrained
/// assignment proposals without allocation.
pub struct ProposalBuf {
    labelling: Labelling,
    /// Pots the proposal covers (ascending).
    pots: Vec<usize>,
    /// Per covered pot: teams to permute and the groups open to them.
    drawable: Vec<Vec<usize>>,
    candidates: Vec<Vec<usize>>,
    scratch: Vec<usize>,
    /// team -> group for the current proposal (usize::MAX when absent).
    group_of: Vec<usize>,
    /// (group, pot) -> team for covered pots.
    slot: Vec<usize>,
    confed_mask: Vec<u8>,
    is_uefa: Vec<bool>,
    /// Per group: tags and UEFA count contributed by pre-assigned teams.
    base_tags: Vec<u8>,
    base_uefa: Vec<u32>,
}

const NO_TEAM: usize = usize::MAX;

impl ProposalBuf {
    pub fn new(inst: &Instance, labelling: Labelling) -> Self {
        Self::for_pots(inst, labelling, (0..inst.pot_count()).collect())
    }

    /// Proposals covering only the first pots of the instance (by pot
    /// index); used for prefix studies.
    pub fn for_pots(inst: &Instance, labelling: Labelling, pots: Vec<usize>) -> Self {
        let gc = inst.group_count();
        let mut drawable = Vec::with_capacity(pots.len());
        let mut candidates = Vec::with_capacity(pots.len());
        let mut group_of = vec![NO_TEAM; inst.team_count()];
        let mut slot = vec![NO_TEAM; gc * inst.pot_count()];
        for &pot in &pots {
            let (fixed, free): (Vec<usize>, Vec<usize>) = match labelling {
                Labelling::ExAnte => inst
                    .pot_teams(pot)
                    .iter()
                    .partition(|&&t| inst.team(t).pre_assigned_group().is_some()),
                Labelling::ExPost => (Vec::new(), inst.pot_teams(pot).to_vec()),
            };
            let mut open: Vec<usize> = (0..gc).collect();
            for &t in &fixed {
                let g = inst.team(t).pre_assigned_group().expect("partitioned");
                group_of[t] = g;
                slot[g * inst.pot_count() + pot] = t;
                open.retain(|&x| x != g);
            }
            drawable.push(free);
            candidates.push(open);
        }
        let mut base_tags = vec![0u8; gc];
        let mut base_uefa = vec![0u32; gc];
        for (t, g) in inst.pre_assignments() {
            if group_of[t] != NO_TEAM {
                base_tags[g] |= inst.team(t).confeds.mask();
                base_uefa[g] += u32::from(inst.team(t).is_uefa());
            }
        }
        ProposalBuf {
            labelling,
            pots,
            drawable,
            candidates,
            scratch: Vec::with_capacity(gc),
            group_of,
            slot,
            confed_mask: inst.teams().iter().map(|t| t.confeds.mask()).collect(),
            is_uefa: inst.teams().iter().map(|t| t.is_uefa()).collect(),
            base_tags,
            base_uefa,
        }
    }

    pub fn group_of(&self, team: usize) -> Option<usize> {
        match self.group_of[team] {
            NO_TEAM => None,
            g => Some(g),
        }
    }

    /// Materializes the current proposal into a fresh state.
    pub fn materialize(&self, inst: &Instance) -> DrawState {
        let mut state = DrawState::new(inst);
        for (t, &g) in self.group_of.iter().enumerate() {
            if g != NO_TEAM {
                state.place(inst, t, g).expect("proposal is structurally valid");
            }
        }
        state
    }
}

/// Draws an independent uniform permutation of each covered pot onto its
/// open groups. No draw constraint is consulted.
pub fn propose_unconstrained(inst: &Instance, rng: &mut impl Rng, buf: &mut ProposalBuf) {
    let pot_count = inst.pot_count();
    for i in 0..buf.pots.len() {
        let pot = buf.pots[i];
        buf.scratch.clear();
        buf.scratch.extend_from_slice(&buf.candidates[i]);
        rng::shuffle(&mut buf.scratch, rng);
        for (k, &team) in buf.drawable[i].iter().enumerate() {
            let g = buf.scratch[k];
            buf.group_of[team] = g;
            buf.slot[g * pot_count + pot] = team;
        }
    }
}

/// Constraint check for a proposal, staged cheapest first: confederation
/// caps, then the UEFA band, then (ex-ante) bracket constraints. Exits on
/// the first violation. For full proposals this agrees exactly with
/// [`constraints::check_full`] being empty.
pub fn proposal_valid(inst: &Instance, buf: &ProposalBuf) -> bool {
    let pot_count = inst.pot_count();
    let full = buf.pots.len() == pot_count;
    for g in 0..inst.group_count() {
        let mut tags = 0u8;
        let mut uefa = 0u32;
        for &pot in &buf.pots {
            let t = buf.slot[g * pot_count + pot];
            if t == NO_TEAM {
                continue;
            }
            let m = buf.confed_mask[t];
            if m & tags & crate::model::ConfedSet::NON_UEFA_MASK != 0 {
                return false;
            }
            tags |= m;
            uefa += u32::from(buf.is_uefa[t]);
        }
        if uefa > inst.uefa_max() || (full && uefa < inst.uefa_min()) {
            return false;
        }
    }
    if buf.labelling == Labelling::ExAnte {
        if let Some(b) = inst.bracket() {
            let mut quarter_seats = [0u8; 4];
            for &seed in b.top_seeds() {
                if let Some(g) = buf.group_of(seed) {
                    let q = b.quarter_of_group(g);
                    quarter_seats[q] += 1;
                    if quarter_seats[q] > 1 {
                        return false;
                    }
                }
            }
            for &[x, y] in b.pairs() {
                if let (Some(gx), Some(gy)) = (buf.group_of(x), buf.group_of(y)) {
                    if b.pathway_of_group(gx) == b.pathway_of_group(gy) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Generates a proposal pot by pot, rejecting as soon as a finished pot
/// breaks a confederation cap or the UEFA ceiling; the UEFA floor and
/// (optionally) bracket constraints are checked once the proposal is
/// complete. Accepted proposals are identical to running
/// [`propose_unconstrained`] + [`proposal_valid`] on the same stream, this
/// just stops paying for pots that can no longer matter.
pub fn staged_uniform_proposal(
    inst: &Instance,
    rng: &mut impl Rng,
    buf: &mut ProposalBuf,
    enforce_bracket: bool,
) -> bool {
    let pot_count = inst.pot_count();
    debug_assert_eq!(buf.pots.len(), pot_count, "staged proposals cover all pots");
    let gc = inst.group_count();
    let mut tags = [0u8; 32];
    let mut uefa = [0u32; 32];
    tags[..gc].copy_from_slice(&buf.base_tags);
    uefa[..gc].copy_from_slice(&buf.base_uefa);
    for i in 0..pot_count {
        let pot = buf.pots[i];
        buf.scratch.clear();
        buf.scratch.extend_from_slice(&buf.candidates[i]);
        rng::shuffle(&mut buf.scratch, rng);
        for (k, &team) in buf.drawable[i].iter().enumerate() {
            let g = buf.scratch[k];
            buf.group_of[team] = g;
            buf.slot[g * pot_count + pot] = team;
        }
        for (k, &team) in buf.drawable[i].iter().enumerate() {
            let g = buf.scratch[k];
            let m = buf.confed_mask[team];
            if m & tags[g] & crate::model::ConfedSet::NON_UEFA_MASK != 0 {
                return false;
            }
            tags[g] |= m;
            uefa[g] += u32::from(buf.is_uefa[team]);
            if uefa[g] > inst.uefa_max() {
                return false;
            }
        }
    }
    if uefa[..gc].iter().any(|&u| u < inst.uefa_min()) {
        return false;
    }
    if enforce_bracket && buf.labelling == Labelling::ExAnte {
        if let Some(b) = inst.bracket() {
            let mut quarter_seats = [0u8; 4];
            for &seed in b.top_seeds() {
                if let Some(g) = buf.group_of(seed) {
                    let q = b.quarter_of_group(g);
                    quarter_seats[q] += 1;
                    if quarter_seats[q] > 1 {
                        return false;
                    }
                }
            }
            for &[x, y] in b.pairs() {
                if let (Some(gx), Some(gy)) = (buf.group_of(x), buf.group_of(y)) {
                    if b.pathway_of_group(gx) == b.pathway_of_group(gy) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// One unconstrained uniform assignment of every pot (pre-assigned teams
/// stay fixed under ex-ante). Satisfies only the structural one-per-pot
/// shape.
pub fn sample_unconstrained(inst: &Instance, labelling: Labelling, rng: &mut impl Rng) -> DrawState {
    let mut buf = ProposalBuf::new(inst, labelling);
    propose_unconstrained(inst, rng, &mut buf);
    buf.materialize(inst)
}

/// Repeats unconstrained proposals until one satisfies every active
/// constraint or the budget runs out. Returns the accepted state (if any)
/// and the number of proposals consumed.
pub fn rejection_sample(
    inst: &Instance,
    labelling: Labelling,
    rng: &mut ChaCha8Rng,
    max_proposals: u64,
) -> (Option<DrawState>, u64) {
    let mut buf = ProposalBuf::new(inst, labelling);
    for used in 1..=max_proposals {
        propose_unconstrained(inst, rng, &mut buf);
        if proposal_valid(inst, &buf) {
            return (Some(buf.materialize(inst)), used);
        }
    }
    (None, max_proposals)
}

/// Relabels the groups of a finished ex-post draw so that every ex-ante
/// constraint holds: pre-assigned teams receive their reserved labels, top
/// seeds end up in distinct quarters, and protected pairs in opposite
/// pathways. Among all feasible labellings the lexicographically smallest
/// one (scanning groups in creation order) is chosen, so the output is
/// canonical.
pub fn label_ex_post(inst: &Instance, state: &DrawState) -> Result<DrawState, DrawError> {
    if !state.is_complete(inst) {
        return Err(DrawError::InvalidState("assignment is incomplete".into()));
    }
    if !constraints::check_full(inst, state, Labelling::ExPost).is_empty() {
        return Err(DrawError::InvalidState(
            "assignment violates label-free constraints".into(),
        ));
    }
    let gc = inst.group_count();
    // Forced label per anonymous group, from pre-assigned members.
    let mut forced: Vec<Option<usize>> = vec![None; gc];
    for (t, target) in inst.pre_assignments() {
        let g = state.group_of(t).expect("complete");
        if let Some(prev) = forced[g] {
            if prev != target {
                return Err(DrawError::LabellingFailed(format!(
                    "group of `{}` is reserved for two labels",
                    inst.team(t).id
                )));
            }
        }
        forced[g] = Some(target);
    }
    // Top-seed member per anonymous group (at most one per group).
    let mut seed_in: Vec<Option<usize>> = vec![None; gc];
    if let Some(b) = inst.bracket() {
        for &t in b.top_seeds() {
            let g = state.group_of(t).expect("complete");
            seed_in[g] = Some(t);
        }
    }

    let mut label_of: Vec<Option<usize>> = vec![None; gc];
    let mut used = vec![false; gc];
    for g in 0..gc {
        let mut chosen = None;
        for label in 0..gc {
            if used[label] {
                continue;
            }
            if !label_ok(inst, &label_of, &forced, &seed_in, g, label) {
                continue;
            }
            label_of[g] = Some(label);
            used[label] = true;
            if labelling_completable(inst, &label_of, &mut used, &forced, &seed_in, g + 1) {
                chosen = Some(label);
                break;
            }
            label_of[g] = None;
            used[label] = false;
        }
        if chosen.is_none() {
            return Err(DrawError::LabellingFailed(format!(
                "no feasible label for group {g}"
            )));
        }
    }

    let mut out = DrawState::new(inst);
    for t in 0..inst.team_count() {
        let g = state.group_of(t).expect("complete");
        out.place(inst, t, label_of[g].expect("assigned"))
            .expect("bijective relabelling");
    }
    debug_assert!(constraints::check_full(inst, &out, Labelling::ExAnte).is_empty());
    Ok(out)
}

/// Is `label` admissible for anonymous group `g` given decisions so far?
fn label_ok(
    inst: &Instance,
    label_of: &[Option<usize>],
    forced: &[Option<usize>],
    seed_in: &[Option<usize>],
    g: usize,
    label: usize,
) -> bool {
    if let Some(target) = forced[g] {
        if target != label {
            return false;
        }
    }
    let Some(b) = inst.bracket() else {
        return true;
    };
    let Some(seed) = seed_in[g] else {
        return true;
    };
    let q = b.quarter_of_group(label);
    for (other_g, other_label) in label_of.iter().enumerate() {
        let (Some(other_label), Some(other_seed)) = (other_label, seed_in[other_g]) else {
            continue;
        };
        if other_g == g {
            continue;
        }
        if b.quarter_of_group(*other_label) == q {
            return false;
        }
        let paired = b
            .pair_role(seed)
            .zip(b.pair_role(other_seed))
            .is_some_and(|((pa, _), (pb, _))| pa == pb);
        if paired && b.pathway_of_group(*other_label) == b.pathway_of_group(label) {
            return false;
        }
    }
    true
}

/// Can the groups from `from` onward still be labelled? Only groups with a
/// forced label or a top seed constrain anything; the rest take leftovers.
fn labelling_completable(
    inst: &Instance,
    label_of: &[Option<usize>],
    used: &mut Vec<bool>,
    forced: &[Option<usize>],
    seed_in: &[Option<usize>],
    from: usize,
) -> bool {
    let gc = inst.group_count();
    let mut special: Option<usize> = None;
    for g in from..gc {
        if label_of[g].is_none() && (forced[g].is_some() || seed_in[g].is_some()) {
            special = Some(g);
            break;
        }
    }
    let Some(g) = special else {
        return true;
    };
    let mut scratch = label_of.to_vec();
    for label in 0..gc {
        if used[label] || !label_ok(inst, &scratch, forced, seed_in, g, label) {
            continue;
        }
        scratch[g] = Some(label);
        used[label] = true;
        let ok = labelling_completable(inst, &scratch, used, forced, seed_in, g + 1);
        used[label] = false;
        scratch[g] = None;
        if ok {
            return true;
        }
    }
    false
}
