//! Exact completion-feasibility oracle.
//!
//! [`can_complete`] decides whether a partial assignment can be extended to
//! a complete valid one. It is sound and complete: depth-first search over
//! interchangeable-team classes, with propagation that only ever prunes
//! provably dead branches:
//!
//! * a class with no legal group left;
//! * a capped confederation with more unassigned carriers than tag-free
//!   groups with open slots;
//! * groups still missing a UEFA team that cannot all be served by distinct
//!   remaining UEFA teams (bipartite matching).
//!
//! The verdict is independent of branching order. Answering a full-size
//! World Cup query takes microseconds to low milliseconds, which is what
//! makes the draw simulations tractable.
//!
//! [`backtrack_can_complete`] is the deliberately naive reference: it fixes
//! an order of the remaining teams, tries groups left to right with only
//! immediate checks, and backtracks by advancing the previous team's group.
//! It is exact when it terminates, but a budget is mandatory because a dead
//! state reachable only through deep refutation stalls it for longer than
//! any realistic computation budget.

use crate::constraints::{self, check_placement};
use crate::model::{ClassTable, DrawState, Instance, Labelling};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct FeasibilityVerdict {
    pub status: FeasibilityStatus,
    /// A complete valid extension, present exactly when feasible.
    pub witness: Option<DrawState>,
    /// Attempted placements.
    pub steps: u64,
}

/// Decides whether `state` can be completed under the given policy.
/// Never returns [`FeasibilityStatus::BudgetExhausted`].
pub fn can_complete(inst: &Instance, state: &DrawState, labelling: Labelling) -> FeasibilityVerdict {
    run_search(inst, state, labelling, true, u64::MAX)
}

/// Same decision without materializing the witness; the skip engine's hot
/// path.
pub fn completable(inst: &Instance, state: &DrawState, labelling: Labelling) -> bool {
    run_search(inst, state, labelling, false, u64::MAX).status == FeasibilityStatus::Feasible
}

fn run_search(
    inst: &Instance,
    state: &DrawState,
    labelling: Labelling,
    want_witness: bool,
    step_budget: u64,
) -> FeasibilityVerdict {
    if !constraints::check_partial(inst, state, labelling).is_empty() {
        return FeasibilityVerdict {
            status: FeasibilityStatus::Infeasible,
            witness: None,
            steps: 0,
        };
    }
    let table = inst.classes(labelling);
    let scope = (
        inst.token(),
        match labelling {
            Labelling::ExAnte => 0u8,
            Labelling::ExPost => 1u8,
        },
    );
    let (outcome, steps, trail) = VERDICTS.with(|cache| {
        let mut cache = cache.borrow_mut();
        if cache.scope != scope {
            cache.scope = scope;
            cache.map.clear();
        }
        if cache.map.len() >= CACHE_CAP {
            cache.map.clear();
        }
        let mut search = Search::new(inst, state, labelling, table, &mut cache.map);
        search.budget = step_budget;
        search.want_witness = want_witness;
        let outcome = search.dfs();
        (outcome, search.steps, std::mem::take(&mut search.trail))
    });
    let ok = match outcome {
        Some(ok) => ok,
        None => {
            return FeasibilityVerdict {
                status: FeasibilityStatus::BudgetExhausted,
                witness: None,
                steps,
            }
        }
    };
    if ok {
        let witness = want_witness.then(|| {
            let w = materialize_trail(inst, state, table, &trail);
            debug_assert!(constraints::check_full(inst, &w, labelling).is_empty());
            w
        });
        FeasibilityVerdict {
            status: FeasibilityStatus::Feasible,
            witness,
            steps,
        }
    } else {
        FeasibilityVerdict {
            status: FeasibilityStatus::Infeasible,
            witness: None,
            steps,
        }
    }
}

const NON_UEFA_TAGS: usize = 5;

/// Feasibility facts learned so far on this thread, shared across oracle
/// calls: canonical state -> completable? Verdicts are facts about the
/// instance, so sharing them across calls and draws only removes repeated
/// work; every thread converges on the same answers independently of
/// scheduling.
struct VerdictCache {
    scope: (u64, u8),
    map: std::collections::HashMap<u128, bool>,
}

thread_local! {
    static VERDICTS: std::cell::RefCell<VerdictCache> = std::cell::RefCell::new(VerdictCache {
        scope: (0, 0),
        map: std::collections::HashMap::new(),
    });
}

const CACHE_CAP: usize = 1 << 22;

/// Perfect bipartite matching of units into distinct groups, where unit `u`
/// may take any group in `unit_masks[u]`.
fn units_match_distinct_groups(unit_masks: &[u32]) -> bool {
    fn augment(u: usize, unit_masks: &[u32], owner: &mut [Option<usize>; 32], visited: &mut u32) -> bool {
        let mut bits = unit_masks[u] & !*visited;
        while bits != 0 {
            let g = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            *visited |= 1 << g;
            let take = match owner[g] {
                None => true,
                Some(prev) => augment(prev, unit_masks, owner, visited),
            };
            if take {
                owner[g] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner: [Option<usize>; 32] = [None; 32];
    for u in 0..unit_masks.len() {
        let mut visited = 0u32;
        if !augment(u, unit_masks, &mut owner, &mut visited) {
            return false;
        }
    }
    true
}

struct Search<'a> {
    table: &'a ClassTable,
    group_count: usize,
    uefa_min: u32,
    bracket: Option<BracketInfo>,
    /// Unassigned members per class.
    remaining: Vec<u8>,
    /// Per pot: groups with a free slot.
    free: Vec<u32>,
    /// Per group: capped tags already present.
    tags: Vec<u8>,
    /// Per group: how many more UEFA teams fit.
    uefa_room: Vec<u8>,
    /// Per group: UEFA teams present.
    uefa_count: Vec<u8>,
    /// Groups without a UEFA team.
    uefa_zero: u32,
    /// Per capped tag: groups not carrying it.
    tag_open: [u32; NON_UEFA_TAGS],
    /// Per capped tag: unassigned carriers.
    tag_need: [u32; NON_UEFA_TAGS],
    steps: u64,
    budget: u64,
    want_witness: bool,
    trail: Vec<(usize, usize)>,
    /// Shared verdict store: canonical state -> completable.
    verdicts: &'a mut std::collections::HashMap<u128, bool>,
    /// Scratch: legal mask per class at the current node.
    masks: Vec<u32>,
}

struct BracketInfo {
    quarter_of: Vec<u8>,
    quarter_seats: [u8; 4],
    /// Per pair, per side: pathway of the placed member.
    pair_path: Vec<[Option<u8>; 2]>,
}

impl<'a> Search<'a> {
    fn new(
        inst: &Instance,
        state: &DrawState,
        labelling: Labelling,
        table: &'a ClassTable,
        verdicts: &'a mut std::collections::HashMap<u128, bool>,
    ) -> Search<'a> {
        let gc = inst.group_count();
        assert!(gc <= 32, "feasibility search supports at most 32 groups");
        let mut remaining = vec![0u8; table.classes.len()];
        for (ci, class) in table.classes.iter().enumerate() {
            remaining[ci] = class
                .members
                .iter()
                .filter(|&&t| state.group_of(t).is_none())
                .count() as u8;
        }
        let mut free = vec![0u32; inst.pot_count()];
        for (p, mask) in free.iter_mut().enumerate() {
            for g in 0..gc {
                if state.team_at(g, p).is_none() {
                    *mask |= 1 << g;
                }
            }
        }
        let mut tags = vec![0u8; gc];
        let mut uefa_room = vec![0u8; gc];
        let mut uefa_count = vec![0u8; gc];
        let mut uefa_zero = 0u32;
        for g in 0..gc {
            for t in 0..NON_UEFA_TAGS {
                if state.confed_count(g, crate::model::Confederation::ALL[t]) > 0 {
                    tags[g] |= 1 << t;
                }
            }
            let count = u32::from(state.uefa_count(g));
            uefa_room[g] = (inst.uefa_max() - count) as u8;
            uefa_count[g] = count as u8;
            if count == 0 {
                uefa_zero |= 1 << g;
            }
        }
        let mut tag_open = [0u32; NON_UEFA_TAGS];
        let mut tag_need = [0u32; NON_UEFA_TAGS];
        let all_groups = if gc == 32 { u32::MAX } else { (1u32 << gc) - 1 };
        for t in 0..NON_UEFA_TAGS {
            tag_open[t] = all_groups;
            for g in 0..gc {
                if tags[g] & (1 << t) != 0 {
                    tag_open[t] &= !(1 << g);
                }
            }
        }
        for (ci, class) in table.classes.iter().enumerate() {
            let mask = class.confeds.non_uefa_mask();
            for t in 0..NON_UEFA_TAGS {
                if mask & (1 << t) != 0 {
                    tag_need[t] += u32::from(remaining[ci]);
                }
            }
        }
        let bracket = match (labelling, inst.bracket()) {
            (Labelling::ExAnte, Some(b)) => {
                let quarter_of: Vec<u8> = (0..gc).map(|g| b.quarter_of_group(g) as u8).collect();
                let mut quarter_seats = [0u8; 4];
                for &seed in b.top_seeds() {
                    if let Some(g) = state.group_of(seed) {
                        quarter_seats[b.quarter_of_group(g)] += 1;
                    }
                }
                let mut pair_path = vec![[None, None]; b.pairs().len()];
                for (pi, pair) in b.pairs().iter().enumerate() {
                    for (side, &t) in pair.iter().enumerate() {
                        if let Some(g) = state.group_of(t) {
                            pair_path[pi][side] = Some((b.quarter_of_group(g) / 2) as u8);
                        }
                    }
                }
                Some(BracketInfo {
                    quarter_of,
                    quarter_seats,
                    pair_path,
                })
            }
            _ => None,
        };
        Search {
            table,
            group_count: gc,
            uefa_min: inst.uefa_min(),
            bracket,
            remaining,
            free,
            tags,
            uefa_room,
            uefa_count,
            uefa_zero,
            tag_open,
            tag_need,
            steps: 0,
            budget: u64::MAX,
            want_witness: false,
            trail: Vec::with_capacity(inst.team_count()),
            verdicts,
            masks: vec![0; table.classes.len()],
        }
    }

    /// Canonical fingerprint of the current search state. The search reads
    /// nothing outside these arrays, so equal fingerprints have equal
    /// feasibility.
    fn state_key(&self) -> u128 {
        const BASIS1: u64 = 0xcbf29ce484222325;
        const BASIS2: u64 = 0x9e3779b97f4a7c15;
        const PRIME: u64 = 0x100000001b3;
        let mut h1 = BASIS1;
        let mut h2 = BASIS2;
        let mut eat = |b: u64| {
            h1 = (h1 ^ b).wrapping_mul(PRIME);
            h2 = (h2 ^ b.rotate_left(29)).wrapping_mul(PRIME ^ 0xff51afd7ed558ccd);
        };
        for &f in &self.free {
            eat(u64::from(f));
        }
        for g in 0..self.group_count {
            eat(u64::from(self.tags[g]) | (u64::from(self.uefa_count[g]) << 8));
        }
        for &r in &self.remaining {
            eat(u64::from(r));
        }
        if let Some(info) = &self.bracket {
            eat(u64::from_le_bytes([
                info.quarter_seats[0],
                info.quarter_seats[1],
                info.quarter_seats[2],
                info.quarter_seats[3],
                0,
                0,
                0,
                0,
            ]));
            for p in &info.pair_path {
                let enc = |v: Option<u8>| v.map_or(0u64, |x| u64::from(x) + 1);
                eat(enc(p[0]) | (enc(p[1]) << 2));
            }
        }
        // Final avalanche.
        let mix = |mut z: u64| {
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        (u128::from(mix(h1)) << 64) | u128::from(mix(h2))
    }

    fn legal_mask(&self, ci: usize) -> u32 {
        let class = &self.table.classes[ci];
        let mut mask = self.free[class.pot];
        if let Some(target) = class.pre_assigned {
            mask &= 1 << target;
        }
        if mask == 0 {
            return 0;
        }
        let capped = class.confeds.non_uefa_mask();
        let uefa = class.is_uefa();
        let mut out = 0u32;
        let mut bits = mask;
        while bits != 0 {
            let g = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if self.tags[g] & capped != 0 {
                continue;
            }
            if uefa && self.uefa_room[g] == 0 {
                continue;
            }
            if let Some(info) = &self.bracket {
                let q = info.quarter_of[g] as usize;
                if class.top_seed && info.quarter_seats[q] > 0 {
                    continue;
                }
                if let Some((pi, side)) = class.pair {
                    if let Some(partner_path) = info.pair_path[pi][1 - side] {
                        if partner_path == (q / 2) as u8 {
                            continue;
                        }
                    }
                }
            }
            out |= 1 << g;
        }
        out
    }

    fn place(&mut self, ci: usize, g: usize) {
        let class = &self.table.classes[ci];
        self.remaining[ci] -= 1;
        self.free[class.pot] &= !(1 << g);
        let capped = class.confeds.non_uefa_mask();
        for t in 0..NON_UEFA_TAGS {
            if capped & (1 << t) != 0 {
                self.tags[g] |= 1 << t;
                self.tag_open[t] &= !(1 << g);
                self.tag_need[t] -= 1;
            }
        }
        if class.is_uefa() {
            self.uefa_room[g] -= 1;
            self.uefa_count[g] += 1;
            self.uefa_zero &= !(1 << g);
        }
        if let Some(info) = &mut self.bracket {
            let q = info.quarter_of[g] as usize;
            if class.top_seed {
                info.quarter_seats[q] += 1;
            }
            if let Some((pi, side)) = class.pair {
                info.pair_path[pi][side] = Some((q / 2) as u8);
            }
        }
        self.trail.push((ci, g));
    }

    fn unplace(&mut self, ci: usize, g: usize) {
        let class = &self.table.classes[ci];
        self.trail.pop();
        self.remaining[ci] += 1;
        self.free[class.pot] |= 1 << g;
        let capped = class.confeds.non_uefa_mask();
        for t in 0..NON_UEFA_TAGS {
            if capped & (1 << t) != 0 {
                self.tags[g] &= !(1 << t);
                self.tag_open[t] |= 1 << g;
                self.tag_need[t] += 1;
            }
        }
        if class.is_uefa() {
            self.uefa_room[g] += 1;
            self.uefa_count[g] -= 1;
            if self.uefa_count[g] == 0 {
                self.uefa_zero |= 1 << g;
            }
        }
        if let Some(info) = &mut self.bracket {
            let q = info.quarter_of[g] as usize;
            if class.top_seed {
                info.quarter_seats[q] -= 1;
            }
            if let Some((pi, side)) = class.pair {
                info.pair_path[pi][side] = None;
            }
        }
    }

    fn supply_ok(&self) -> bool {
        let any_free = self.free.iter().fold(0u32, |a, &b| a | b);
        for t in 0..NON_UEFA_TAGS {
            if self.tag_need[t] > (self.tag_open[t] & any_free).count_ones() {
                return false;
            }
        }
        if !self.pot_matching_ok() {
            return false;
        }
        if !self.tstar_quarters_ok() {
            return false;
        }
        if self.uefa_min == 0 || self.uefa_zero == 0 {
            return true;
        }
        self.uefa_matching_ok()
    }

    /// Unplaced top seeds must fit into distinct free quarters, with paired
    /// seeds on opposite pathways. At most four seeds, so brute force.
    fn tstar_quarters_ok(&self) -> bool {
        let Some(info) = &self.bracket else {
            return true;
        };
        let mut seeds: Vec<(usize, u8)> = Vec::with_capacity(4);
        for (ci, class) in self.table.classes.iter().enumerate() {
            if self.remaining[ci] == 0 || !class.top_seed {
                continue;
            }
            let mut quarters = 0u8;
            let mut bits = self.masks[ci];
            while bits != 0 {
                let g = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                quarters |= 1 << info.quarter_of[g];
            }
            seeds.push((ci, quarters));
        }
        if seeds.len() <= 1 {
            return true;
        }
        fn assign(
            idx: usize,
            seeds: &[(usize, u8)],
            table: &ClassTable,
            taken: u8,
            chosen: &mut [u8; 4],
        ) -> bool {
            if idx == seeds.len() {
                return true;
            }
            let (ci, quarters) = seeds[idx];
            let mut bits = quarters & !taken;
            while bits != 0 {
                let q = bits.trailing_zeros() as u8;
                bits &= bits - 1;
                // Opposite pathway to an already chosen pair partner.
                let ok = match table.classes[ci].pair {
                    Some((pi, side)) => seeds[..idx]
                        .iter()
                        .enumerate()
                        .all(|(j, &(cj, _))| {
                            table.classes[cj].pair != Some((pi, 1 - side))
                                || chosen[j] / 2 != q / 2
                        }),
                    None => true,
                };
                if ok {
                    chosen[idx] = q;
                    if assign(idx + 1, seeds, table, taken | (1 << q), chosen) {
                        return true;
                    }
                }
            }
            false
        }
        let mut chosen = [0u8; 4];
        assign(0, &seeds, self.table, 0, &mut chosen)
    }

    /// Hall condition per pot: the remaining teams of each pot must admit a
    /// system of distinct groups compatible with their current legal masks.
    fn pot_matching_ok(&self) -> bool {
        let pot_count = self.free.len();
        let mut unit_masks: Vec<u32> = Vec::new();
        for pot in 0..pot_count {
            unit_masks.clear();
            for (ci, class) in self.table.classes.iter().enumerate() {
                if class.pot != pot || self.remaining[ci] == 0 {
                    continue;
                }
                for _ in 0..self.remaining[ci] {
                    unit_masks.push(self.masks[ci]);
                }
            }
            if unit_masks.len() > 32 {
                continue;
            }
            if !units_match_distinct_groups(&unit_masks) {
                return false;
            }
        }
        true
    }

    /// Every group still missing a UEFA team must be servable by a distinct
    /// remaining UEFA team; bipartite matching between needy groups and
    /// UEFA team units.
    fn uefa_matching_ok(&self) -> bool {
        let mut unit_masks: Vec<u32> = Vec::new();
        'outer: for (ci, class) in self.table.classes.iter().enumerate() {
            if self.remaining[ci] == 0 || !class.is_uefa() {
                continue;
            }
            let mask = self.masks[ci];
            for _ in 0..self.remaining[ci] {
                if unit_masks.len() >= 64 {
                    break 'outer;
                }
                unit_masks.push(mask);
            }
        }
        let needy: Vec<usize> = (0..self.group_count)
            .filter(|&g| self.uefa_zero & (1 << g) != 0)
            .collect();
        if needy.len() > unit_masks.len() {
            return false;
        }
        let mut owner: Vec<Option<usize>> = vec![None; unit_masks.len()];
        fn augment(
            slot: usize,
            needy: &[usize],
            unit_masks: &[u32],
            owner: &mut [Option<usize>],
            visited: &mut u64,
        ) -> bool {
            let g = needy[slot];
            for (u, &mask) in unit_masks.iter().enumerate() {
                if mask & (1 << g) == 0 || *visited & (1 << u) != 0 {
                    continue;
                }
                *visited |= 1 << u;
                let take = match owner[u] {
                    None => true,
                    Some(prev) => augment(prev, needy, unit_masks, owner, visited),
                };
                if take {
                    owner[u] = Some(slot);
                    return true;
                }
            }
            false
        }
        for slot in 0..needy.len() {
            let mut visited = 0u64;
            if !augment(slot, &needy, &unit_masks, &mut owner, &mut visited) {
                return false;
            }
        }
        true
    }

    /// `Some(feasible)` or `None` when the step budget ran out.
    fn dfs(&mut self) -> Option<bool> {
        // Branch on the most constrained class of the lowest unfinished pot;
        // the static pot-major order keeps equivalent states colliding in
        // the failure memo.
        let mut best = usize::MAX;
        let mut best_count = u32::MAX;
        let mut best_pot = usize::MAX;
        let mut done = true;
        for ci in 0..self.table.classes.len() {
            if self.remaining[ci] == 0 {
                self.masks[ci] = 0;
                continue;
            }
            done = false;
            let mask = self.legal_mask(ci);
            self.masks[ci] = mask;
            let count = mask.count_ones();
            if count == 0 {
                return Some(false);
            }
            let pot = self.table.classes[ci].pot;
            if count < best_count || (count == best_count && pot < best_pot) {
                best = ci;
                best_count = count;
                best_pot = pot;
            }
        }
        if done {
            return Some(self.uefa_min == 0 || self.uefa_zero == 0);
        }
        let key = self.state_key();
        match self.verdicts.get(&key) {
            Some(false) => return Some(false),
            // A known-feasible state still needs a concrete descent when a
            // witness trail is being built.
            Some(true) if !self.want_witness => return Some(true),
            _ => {}
        }
        if !self.supply_ok() {
            self.verdicts.insert(key, false);
            return Some(false);
        }
        // Value order: steer UEFA teams toward groups still missing one and
        // other teams away from them, so first descents respect the scarce
        // resource. Groups with identical profiles are interchangeable for
        // every remaining decision, so one representative per profile is
        // enough.
        let mask = self.masks[best];
        let preferred = if self.uefa_min > 0 {
            if self.table.classes[best].is_uefa() {
                mask & self.uefa_zero
            } else {
                mask & !self.uefa_zero
            }
        } else {
            mask
        };
        let mut tried: Vec<u64> = Vec::with_capacity(4);
        for pass_mask in [preferred, mask & !preferred] {
            let mut bits = pass_mask;
            while bits != 0 {
                let g = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let profile = self.group_profile(g);
                if tried.contains(&profile) {
                    continue;
                }
                tried.push(profile);
                self.steps += 1;
                if self.steps > self.budget {
                    return None;
                }
                self.place(best, g);
                match self.dfs() {
                    Some(true) => {
                        self.verdicts.insert(key, true);
                        return Some(true);
                    }
                    Some(false) => self.unplace(best, g),
                    None => return None,
                }
            }
        }
        self.verdicts.insert(key, false);
        Some(false)
    }

    /// Everything the remaining search can observe about one group. Groups
    /// sharing a profile can be swapped wholesale in any completion.
    fn group_profile(&self, g: usize) -> u64 {
        let mut free_col = 0u64;
        for (p, &mask) in self.free.iter().enumerate() {
            free_col |= u64::from((mask >> g) & 1) << p;
        }
        let mut profile = free_col
            | (u64::from(self.tags[g]) << 16)
            | (u64::from(self.uefa_count[g]) << 24)
            | (u64::from(self.uefa_room[g]) << 28);
        if let Some(info) = &self.bracket {
            profile |= u64::from(info.quarter_of[g]) << 32;
        }
        // A group an unseated class is pinned to is interchangeable with
        // nothing but itself; record which class pins it.
        for (ci, class) in self.table.classes.iter().enumerate() {
            if self.remaining[ci] > 0 && class.pre_assigned == Some(g) {
                profile |= (ci as u64 + 1) << 40;
                break;
            }
        }
        profile
    }

}

/// Replays a successful trail onto a copy of the base state, handing class
/// slots to members in instance order.
fn materialize_trail(
    inst: &Instance,
    base: &DrawState,
    table: &ClassTable,
    trail: &[(usize, usize)],
) -> DrawState {
    let mut witness = base.clone();
    let mut next_member: Vec<usize> = vec![0; table.classes.len()];
    for &(ci, g) in trail {
        let members = &table.classes[ci].members;
        let mut idx = next_member[ci];
        while witness.group_of(members[idx]).is_some() {
            idx += 1;
        }
        witness
            .place(inst, members[idx], g)
            .expect("witness placement is structurally valid");
        next_member[ci] = idx + 1;
    }
    witness
}

/// Naive depth-first completion over a fixed team order with immediate
/// checks only. `team_order` must list exactly the unassigned teams,
/// grouped by pot according to the draw order in force. Counts one step per
/// attempted placement and stops with `BudgetExhausted` once `step_budget`
/// is exceeded. When it terminates, the verdict matches [`can_complete`].
pub fn backtrack_can_complete(
    inst: &Instance,
    state: &DrawState,
    team_order: &[usize],
    labelling: Labelling,
    step_budget: u64,
) -> FeasibilityVerdict {
    {
        let mut expected = state.unassigned(inst);
        expected.sort_unstable();
        let mut given = team_order.to_vec();
        given.sort_unstable();
        assert_eq!(expected, given, "team_order must list exactly the unassigned teams");
    }
    let dead_on_entry = !constraints::check_partial(inst, state, labelling).is_empty()
        // A group that is already full below the UEFA floor can never
        // recover; the per-placement closing check only sees groups this
        // search closes itself.
        || (0..inst.group_count()).any(|g| {
            state.filled_slots(g) == inst.pot_count()
                && u32::from(state.uefa_count(g)) < inst.uefa_min()
        });
    if dead_on_entry {
        return FeasibilityVerdict {
            status: FeasibilityStatus::Infeasible,
            witness: None,
            steps: 0,
        };
    }
    let mut work = state.clone();
    let mut steps = 0u64;
    let gc = inst.group_count();
    let n = team_order.len();
    // next_group[i]: first group index team i has not yet tried.
    let mut next_group = vec![0usize; n + 1];
    let mut i = 0usize;
    loop {
        if i == n {
            debug_assert!(constraints::check_full(inst, &work, labelling).is_empty());
            return FeasibilityVerdict {
                status: FeasibilityStatus::Feasible,
                witness: Some(work),
                steps,
            };
        }
        let team = team_order[i];
        let pot = inst.team(team).pot_index();
        let mut k = next_group[i];
        let mut placed = false;
        while k < gc {
            if work.team_at(k, pot).is_none() {
                steps += 1;
                if steps > step_budget {
                    return FeasibilityVerdict {
                        status: FeasibilityStatus::BudgetExhausted,
                        witness: None,
                        steps,
                    };
                }
                if immediate_ok(inst, &work, team, k, labelling) {
                    work.place(inst, team, k).expect("slot checked free");
                    next_group[i] = k + 1;
                    placed = true;
                    break;
                }
            }
            k += 1;
        }
        if placed {
            i += 1;
            next_group[i] = 0;
        } else {
            if i == 0 {
                return FeasibilityVerdict {
                    status: FeasibilityStatus::Infeasible,
                    witness: None,
                    steps,
                };
            }
            i -= 1;
            let prev = team_order[i];
            let g = work.remove(inst, prev).expect("previous team was placed");
            next_group[i] = g + 1;
        }
    }
}

/// Immediate legality plus the only deferred full-assignment condition the
/// naive search can notice early: a group reaching its last slot must have
/// met the UEFA lower bound.
fn immediate_ok(inst: &Instance, state: &DrawState, team: usize, group: usize, labelling: Labelling) -> bool {
    if !check_placement(inst, state, team, group, labelling) {
        return false;
    }
    if state.filled_slots(group) + 1 == inst.pot_count() {
        let uefa = u32::from(state.uefa_count(group)) + u32::from(inst.team(team).is_uefa());
        if uefa < inst.uefa_min() {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    fn seat_hosts(inst: &Instance, state: &mut DrawState) {
        for (t, g) in inst.pre_assignments() {
            state.place(inst, t, g).unwrap();
        }
    }

    #[test]
    fn empty_wc2026_is_feasible_both_policies() {
        let inst = fixtures::wc2026();
        let state = DrawState::new(&inst);
        for labelling in [Labelling::ExAnte, Labelling::ExPost] {
            let v = can_complete(&inst, &state, labelling);
            assert_eq!(v.status, FeasibilityStatus::Feasible);
            let w = v.witness.unwrap();
            assert!(constraints::check_full(&inst, &w, labelling).is_empty());
        }
    }

    #[test]
    fn deadlocked_pots12_state_is_infeasible() {
        let inst = fixtures::wc2026();
        let state = fixtures::deadlocked_pots12_state(&inst);
        let v = can_complete(&inst, &state, Labelling::ExPost);
        assert_eq!(v.status, FeasibilityStatus::Infeasible);
    }

    #[test]
    fn backtracker_exhausts_on_deadlocked_state() {
        let inst = fixtures::wc2026();
        let state = fixtures::deadlocked_pots12_state(&inst);
        let order = state.unassigned(&inst);
        let v = backtrack_can_complete(&inst, &state, &order, Labelling::ExPost, 1_000_000);
        assert_eq!(v.status, FeasibilityStatus::BudgetExhausted);
    }

    #[test]
    fn germany_cannot_take_group_h() {
        // After hosts, Belgium -> C, Argentina -> E, Spain -> J,
        // Portugal -> F, Brazil -> G, group H leaves France and England
        // without compatible slots while group I works.
        let inst = fixtures::wc2026();
        let mut state = DrawState::new(&inst);
        seat_hosts(&inst, &mut state);
        for (id, label) in [
            ("belgium", "C"),
            ("argentina", "E"),
            ("spain", "J"),
            ("portugal", "F"),
            ("brazil", "G"),
        ] {
            let t = inst.team_index(id).unwrap();
            let g = inst.label_index(label).unwrap();
            state.place(&inst, t, g).unwrap();
        }
        let germany = inst.team_index("germany").unwrap();
        let mut with_h = state.clone();
        with_h.place(&inst, germany, inst.label_index("H").unwrap()).unwrap();
        assert_eq!(
            can_complete(&inst, &with_h, Labelling::ExAnte).status,
            FeasibilityStatus::Infeasible
        );
        let mut with_i = state.clone();
        with_i.place(&inst, germany, inst.label_index("I").unwrap()).unwrap();
        assert_eq!(
            can_complete(&inst, &with_i, Labelling::ExAnte).status,
            FeasibilityStatus::Feasible
        );
    }

    #[test]
    fn single_open_slot_base_case() {
        let inst = fixtures::example3_random();
        let mut state = DrawState::new(&inst);
        // Fill everything but team-6's slot.
        for (id, label) in [
            ("team-1", "A"),
            ("team-2", "B"),
            ("team-3", "C"),
            ("team-4", "B"),
            ("team-5", "A"),
        ] {
            state
                .place(&inst, inst.team_index(id).unwrap(), inst.label_index(label).unwrap())
                .unwrap();
        }
        let order = state.unassigned(&inst);
        let v = backtrack_can_complete(&inst, &state, &order, Labelling::ExAnte, 10);
        assert_eq!(v.status, FeasibilityStatus::Feasible);
        assert!(v.steps <= inst.group_count() as u64);
    }

    #[test]
    fn invalid_partial_state_is_infeasible() {
        let inst = fixtures::wc2026();
        let mut state = DrawState::new(&inst);
        // Mexico away from its reserved group.
        let mexico = inst.team_index("mexico").unwrap();
        state.place(&inst, mexico, inst.label_index("C").unwrap()).unwrap();
        assert_eq!(
            can_complete(&inst, &state, Labelling::ExAnte).status,
            FeasibilityStatus::Infeasible
        );
        // Ex-post does not care about the reservation.
        assert_eq!(
            can_complete(&inst, &state, Labelling::ExPost).status,
            FeasibilityStatus::Feasible
        );
    }
}
