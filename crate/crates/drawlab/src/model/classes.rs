//! Interchangeable-team partition.
//!
//! Two teams are interchangeable when every constraint treats them
//! identically: same pot, same confederation tags, and the same special role
//! (top seed, pathway-pair side, pre-assignment target). Feasibility search
//! and exact enumeration both branch over classes instead of teams, which
//! collapses the factorial blow-up of symmetric instances without changing
//! any answer.
//!
//! Under ex-post labelling, pre-assignments and bracket roles are inactive,
//! so the partition is coarser.

use super::{ConfedSet, Instance, Labelling};

#[derive(Debug, Clone)]
pub struct ClassDef {
    pub pot: usize,
    pub confeds: ConfedSet,
    pub top_seed: bool,
    /// (pair index, side) for teams bound by an opposite-pathway pair.
    pub pair: Option<(usize, usize)>,
    pub pre_assigned: Option<usize>,
    /// Member team indices, in instance order.
    pub members: Vec<usize>,
}

impl ClassDef {
    pub fn is_uefa(&self) -> bool {
        self.confeds.contains(super::Confederation::Uefa)
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone)]
pub struct ClassTable {
    pub classes: Vec<ClassDef>,
    /// Class index of each team.
    pub class_of: Vec<usize>,
}

impl ClassTable {
    pub fn build(inst: &Instance, labelling: Labelling) -> Self {
        let mut classes: Vec<ClassDef> = Vec::new();
        let mut class_of = vec![usize::MAX; inst.team_count()];
        for (ti, team) in inst.teams().iter().enumerate() {
            let (top_seed, pair, pre) = match labelling {
                Labelling::ExAnte => {
                    let b = inst.bracket();
                    (
                        b.is_some_and(|b| b.is_top_seed(ti)),
                        b.and_then(|b| b.pair_role(ti)),
                        team.pre_assigned_group(),
                    )
                }
                Labelling::ExPost => (false, None, None),
            };
            let slot = classes.iter().position(|c| {
                c.pot == team.pot_index()
                    && c.confeds == team.confeds
                    && c.top_seed == top_seed
                    && c.pair == pair
                    && c.pre_assigned == pre
            });
            let ci = match slot {
                Some(ci) => ci,
                None => {
                    classes.push(ClassDef {
                        pot: team.pot_index(),
                        confeds: team.confeds,
                        top_seed,
                        pair,
                        pre_assigned: pre,
                        members: Vec::new(),
                    });
                    classes.len() - 1
                }
            };
            classes[ci].members.push(ti);
            class_of[ti] = ci;
        }
        ClassTable { classes, class_of }
    }

    /// Trivial partition: every team is its own class. Used to cross-check
    /// that the symmetry reduction does not change enumeration results.
    pub fn singletons(inst: &Instance) -> Self {
        let classes = inst
            .teams()
            .iter()
            .enumerate()
            .map(|(ti, team)| ClassDef {
                pot: team.pot_index(),
                confeds: team.confeds,
                top_seed: inst.bracket().is_some_and(|b| b.is_top_seed(ti)),
                pair: inst.bracket().and_then(|b| b.pair_role(ti)),
                pre_assigned: team.pre_assigned_group(),
                members: vec![ti],
            })
            .collect::<Vec<_>>();
        let class_of = (0..inst.team_count()).collect();
        ClassTable { classes, class_of }
    }
}

#[cfg(test)]
mod tests {
    use crate::model::fixtures;
    use crate::model::Labelling;

    #[test]
    fn wc2026_ex_ante_separates_roles() {
        let inst = fixtures::wc2026();
        let table = inst.classes(Labelling::ExAnte);
        // Hosts and paired top seeds are singleton classes.
        for id in ["mexico", "canada", "united-states", "spain", "argentina", "france", "england"] {
            let ti = inst.team_index(id).unwrap();
            let c = &table.classes[table.class_of[ti]];
            assert_eq!(c.size(), 1, "{id} should not be interchangeable");
        }
        // Plain pot-1 UEFA teams collapse into one class of four.
        let ti = inst.team_index("portugal").unwrap();
        assert_eq!(table.classes[table.class_of[ti]].size(), 4);
    }

    #[test]
    fn wc2026_ex_post_merges_hosts() {
        let inst = fixtures::wc2026();
        let table = inst.classes(Labelling::ExPost);
        let mexico = inst.team_index("mexico").unwrap();
        let canada = inst.team_index("canada").unwrap();
        let us = inst.team_index("united-states").unwrap();
        assert_eq!(table.class_of[mexico], table.class_of[canada]);
        assert_eq!(table.class_of[mexico], table.class_of[us]);
        // Spain merges with the other plain UEFA pot-1 teams.
        let spain = inst.team_index("spain").unwrap();
        let portugal = inst.team_index("portugal").unwrap();
        assert_eq!(table.class_of[spain], table.class_of[portugal]);
    }
}
