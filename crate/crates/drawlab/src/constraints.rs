//! Validity checks for assignments.
//!
//! Full-assignment checks return the complete list of violations; the
//! incremental check answers whether placing one team into one group is
//! legal on the partial state alone. The UEFA lower bound is deliberately
//! absent from the incremental check: a group without a UEFA team is fine
//! as long as one can still arrive, which is the completion oracle's job
//! (see [`crate::feasibility`]).

use crate::model::{Confederation, DrawState, Instance, Labelling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    /// More than one team from the same capped confederation in a group.
    ConfedCap,
    /// Group finished below the UEFA lower bound.
    UefaMin,
    /// Group above the UEFA upper bound.
    UefaMax,
    /// Group holds two teams from one pot. Structurally unreachable through
    /// [`DrawState`]; kept so every constraint family has a kind.
    PotSlot,
    /// A protected pair shares a pathway.
    OppositePathway,
    /// Two top seeds share a quarter.
    QuarterSeparation,
    /// A pre-assigned team sits outside its reserved group.
    PreAssignment,
    /// Not every team is assigned.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending group, when the violation is local to one.
    pub group: Option<usize>,
    /// Teams involved.
    pub teams: Vec<usize>,
}

impl Violation {
    pub fn describe(&self, inst: &Instance) -> String {
        let teams = self
            .teams
            .iter()
            .map(|&t| inst.team(t).id.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        match self.group {
            Some(g) => format!("{:?} in group {}: {teams}", self.kind, inst.label(g)),
            None => format!("{:?}: {teams}", self.kind),
        }
    }
}

fn group_members(inst: &Instance, state: &DrawState, group: usize) -> Vec<usize> {
    (0..inst.pot_count())
        .filter_map(|p| state.team_at(group, p))
        .collect()
}

/// Violations detectable on a partial assignment. Everything reported here
/// is irreparable: no completion can remove it.
pub fn check_partial(inst: &Instance, state: &DrawState, labelling: Labelling) -> Vec<Violation> {
    let mut out = Vec::new();
    for g in 0..inst.group_count() {
        for c in Confederation::ALL {
            if c == Confederation::Uefa {
                continue;
            }
            if state.confed_count(g, c) > 1 {
                out.push(Violation {
                    kind: ViolationKind::ConfedCap,
                    group: Some(g),
                    teams: group_members(inst, state, g)
                        .into_iter()
                        .filter(|&t| inst.team(t).confeds.contains(c))
                        .collect(),
                });
            }
        }
        if u32::from(state.uefa_count(g)) > inst.uefa_max() {
            out.push(Violation {
                kind: ViolationKind::UefaMax,
                group: Some(g),
                teams: group_members(inst, state, g)
                    .into_iter()
                    .filter(|&t| inst.team(t).is_uefa())
                    .collect(),
            });
        }
    }
    if labelling == Labelling::ExAnte {
        if let Some(b) = inst.bracket() {
            for &[a, bb] in b.pairs() {
                if let (Some(ga), Some(gb)) = (state.group_of(a), state.group_of(bb)) {
                    if b.pathway_of_group(ga) == b.pathway_of_group(gb) {
                        out.push(Violation {
                            kind: ViolationKind::OppositePathway,
                            group: None,
                            teams: vec![a, bb],
                        });
                    }
                }
            }
            for q in 0..4 {
                let seated: Vec<usize> = b
                    .top_seeds()
                    .iter()
                    .copied()
                    .filter(|&t| {
                        state
                            .group_of(t)
                            .is_some_and(|g| b.quarter_of_group(g) == q)
                    })
                    .collect();
                if seated.len() > 1 {
                    out.push(Violation {
                        kind: ViolationKind::QuarterSeparation,
                        group: None,
                        teams: seated,
                    });
                }
            }
        }
        for (t, g) in inst.pre_assignments() {
            if let Some(actual) = state.group_of(t) {
                if actual != g {
                    out.push(Violation {
                        kind: ViolationKind::PreAssignment,
                        group: Some(actual),
                        teams: vec![t],
                    });
                }
            }
        }
    }
    out
}

/// Checks a complete assignment against every active constraint. An
/// incomplete state yields a single `Incomplete` violation.
pub fn check_full(inst: &Instance, state: &DrawState, labelling: Labelling) -> Vec<Violation> {
    if !state.is_complete(inst) {
        return vec![Violation {
            kind: ViolationKind::Incomplete,
            group: None,
            teams: state.unassigned(inst),
        }];
    }
    let mut out = check_partial(inst, state, labelling);
    for g in 0..inst.group_count() {
        if u32::from(state.uefa_count(g)) < inst.uefa_min() {
            out.push(Violation {
                kind: ViolationKind::UefaMin,
                group: Some(g),
                teams: group_members(inst, state, g),
            });
        }
    }
    out
}

/// Whether placing `team` into `group` is legal on the partial state:
/// confederation caps, the UEFA upper bound, a free pot slot, and (ex-ante)
/// pre-assignment, pathway and quarter constraints. The UEFA lower bound is
/// not consulted here.
pub fn check_placement(
    inst: &Instance,
    state: &DrawState,
    team: usize,
    group: usize,
    labelling: Labelling,
) -> bool {
    if state.group_of(team).is_some() {
        return false;
    }
    let t = inst.team(team);
    if state.team_at(group, t.pot_index()).is_some() {
        return false;
    }
    for c in t.confeds.iter() {
        if c == Confederation::Uefa {
            if u32::from(state.uefa_count(group)) >= inst.uefa_max() {
                return false;
            }
        } else if state.confed_count(group, c) > 0 {
            return false;
        }
    }
    if labelling == Labelling::ExAnte {
        if let Some(target) = t.pre_assigned_group() {
            if target != group {
                return false;
            }
        }
        if let Some(b) = inst.bracket() {
            if b.is_top_seed(team) {
                let q = b.quarter_of_group(group);
                for &other in b.top_seeds() {
                    if other != team
                        && state
                            .group_of(other)
                            .is_some_and(|g| b.quarter_of_group(g) == q)
                    {
                        return false;
                    }
                }
            }
            if let Some((pi, side)) = b.pair_role(team) {
                let partner = b.pairs()[pi][1 - side];
                if let Some(pg) = state.group_of(partner) {
                    if b.pathway_of_group(pg) == b.pathway_of_group(group) {
                        return false;
                    }
                }
            }
        }
    }
    true
}
