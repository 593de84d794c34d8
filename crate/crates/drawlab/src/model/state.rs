//! Mutable assignment state of a draw in progress.

use thiserror::Error;

use super::{Confederation, Instance};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("team {0} is already assigned")]
    TeamAlreadyAssigned(usize),
    #[error("team {0} is not assigned")]
    TeamNotAssigned(usize),
    #[error("group {group} already has a team from pot {pot}")]
    SlotOccupied { group: usize, pot: usize },
}

/// Partial or complete assignment of teams to groups.
///
/// Structurally enforces that a group never holds two teams from the same
/// pot. Per-group confederation counts are cached and kept in sync with the
/// assignment map on every place/remove.
///
/// Single-owner mutable; `clone` yields an independent state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawState {
    group_count: usize,
    pot_count: usize,
    /// team -> group
    assignment: Vec<Option<u16>>,
    /// (group, pot) -> team
    slots: Vec<Option<u16>>,
    /// (group, confederation) -> number of teams carrying that tag
    confed_counts: Vec<u8>,
    assigned: usize,
}

impl DrawState {
    pub fn new(inst: &Instance) -> Self {
        DrawState {
            group_count: inst.group_count(),
            pot_count: inst.pot_count(),
            assignment: vec![None; inst.team_count()],
            slots: vec![None; inst.group_count() * inst.pot_count()],
            confed_counts: vec![0; inst.group_count() * Confederation::COUNT],
            assigned: 0,
        }
    }

    pub fn place(&mut self, inst: &Instance, team: usize, group: usize) -> Result<(), StateError> {
        if self.assignment[team].is_some() {
            return Err(StateError::TeamAlreadyAssigned(team));
        }
        let pot = inst.team(team).pot_index();
        let slot = group * self.pot_count + pot;
        if self.slots[slot].is_some() {
            return Err(StateError::SlotOccupied { group, pot });
        }
        self.assignment[team] = Some(group as u16);
        self.slots[slot] = Some(team as u16);
        for c in inst.team(team).confeds.iter() {
            self.confed_counts[group * Confederation::COUNT + c.index()] += 1;
        }
        self.assigned += 1;
        Ok(())
    }

    /// Removes a team and returns the group it occupied.
    pub fn remove(&mut self, inst: &Instance, team: usize) -> Result<usize, StateError> {
        let group = self.assignment[team].ok_or(StateError::TeamNotAssigned(team))? as usize;
        let pot = inst.team(team).pot_index();
        self.assignment[team] = None;
        self.slots[group * self.pot_count + pot] = None;
        for c in inst.team(team).confeds.iter() {
            self.confed_counts[group * Confederation::COUNT + c.index()] -= 1;
        }
        self.assigned -= 1;
        Ok(group)
    }

    pub fn clear(&mut self) {
        self.assignment.fill(None);
        self.slots.fill(None);
        self.confed_counts.fill(0);
        self.assigned = 0;
    }

    pub fn group_of(&self, team: usize) -> Option<usize> {
        self.assignment[team].map(|g| g as usize)
    }

    pub fn team_at(&self, group: usize, pot: usize) -> Option<usize> {
        self.slots[group * self.pot_count + pot].map(|t| t as usize)
    }

    /// Number of teams in `group` carrying tag `confed`.
    pub fn confed_count(&self, group: usize, confed: Confederation) -> u8 {
        self.confed_counts[group * Confederation::COUNT + confed.index()]
    }

    pub fn uefa_count(&self, group: usize) -> u8 {
        self.confed_count(group, Confederation::Uefa)
    }

    pub fn filled_slots(&self, group: usize) -> usize {
        (0..self.pot_count)
            .filter(|&p| self.slots[group * self.pot_count + p].is_some())
            .count()
    }

    pub fn assigned_count(&self) -> usize {
        self.assigned
    }

    pub fn is_complete(&self, inst: &Instance) -> bool {
        self.assigned == inst.team_count()
    }

    /// Unassigned team indices in instance order.
    pub fn unassigned(&self, inst: &Instance) -> Vec<usize> {
        (0..inst.team_count())
            .filter(|&t| self.assignment[t].is_none())
            .collect()
    }

    /// Recomputes every cached counter from the assignment map and compares.
    pub fn counters_consistent(&self, inst: &Instance) -> bool {
        let mut fresh = DrawState::new(inst);
        for (t, g) in self.assignment.iter().enumerate() {
            if let Some(g) = g {
                if fresh.place(inst, t, *g as usize).is_err() {
                    return false;
                }
            }
        }
        fresh == *self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;
    use rand::{Rng, SeedableRng};

    #[test]
    fn place_and_remove_round_trip() {
        let inst = fixtures::wc2026();
        let mut state = DrawState::new(&inst);
        let spain = inst.team_index("spain").unwrap();
        state.place(&inst, spain, 3).unwrap();
        assert_eq!(state.group_of(spain), Some(3));
        assert_eq!(state.uefa_count(3), 1);
        assert_eq!(state.remove(&inst, spain), Ok(3));
        assert_eq!(state, DrawState::new(&inst));
    }

    #[test]
    fn structural_slot_exclusivity() {
        let inst = fixtures::wc2026();
        let mut state = DrawState::new(&inst);
        let spain = inst.team_index("spain").unwrap();
        let france = inst.team_index("france").unwrap();
        state.place(&inst, spain, 0).unwrap();
        assert_eq!(
            state.place(&inst, france, 0),
            Err(StateError::SlotOccupied { group: 0, pot: 0 })
        );
        assert_eq!(
            state.place(&inst, spain, 1),
            Err(StateError::TeamAlreadyAssigned(spain))
        );
    }

    #[test]
    fn cached_counters_match_recomputation_under_random_ops() {
        let inst = fixtures::wc2026();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut state = DrawState::new(&inst);
        let mut placed: Vec<usize> = Vec::new();
        for _ in 0..5000 {
            if !placed.is_empty() && rng.random_range(0..3) == 0 {
                let i = rng.random_range(0..placed.len());
                let team = placed.swap_remove(i);
                state.remove(&inst, team).unwrap();
            } else {
                let team = rng.random_range(0..inst.team_count());
                let group = rng.random_range(0..inst.group_count());
                if state.place(&inst, team, group).is_ok() {
                    placed.push(team);
                }
            }
            assert!(state.counters_consistent(&inst));
        }
    }
}
