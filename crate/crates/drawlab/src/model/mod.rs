//! Domain model: confederations, teams, draw instances, and assignment state.

mod classes;
pub mod fixtures;
mod json;
mod state;

pub use classes::{ClassDef, ClassTable};
pub use json::{load_instance, serialize_instance, InstanceError};
pub use state::{DrawState, StateError};

pub(crate) use json::{BracketDoc, InstanceDoc, TeamDoc};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

/// Continental confederation tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Confederation {
    #[serde(rename = "AFC")]
    Afc,
    #[serde(rename = "CAF")]
    Caf,
    #[serde(rename = "CONCACAF")]
    Concacaf,
    #[serde(rename = "CONMEBOL")]
    Conmebol,
    #[serde(rename = "OFC")]
    Ofc,
    #[serde(rename = "UEFA")]
    Uefa,
}

impl Confederation {
    pub const COUNT: usize = 6;
    pub const ALL: [Confederation; 6] = [
        Confederation::Afc,
        Confederation::Caf,
        Confederation::Concacaf,
        Confederation::Conmebol,
        Confederation::Ofc,
        Confederation::Uefa,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            Confederation::Afc => "AFC",
            Confederation::Caf => "CAF",
            Confederation::Concacaf => "CONCACAF",
            Confederation::Conmebol => "CONMEBOL",
            Confederation::Ofc => "OFC",
            Confederation::Uefa => "UEFA",
        }
    }

    pub fn from_code(code: &str) -> Option<Confederation> {
        Confederation::ALL.iter().copied().find(|c| c.code() == code)
    }
}

impl fmt::Display for Confederation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Bitmask over the six confederations. UEFA is the highest bit so the
/// "every tag except UEFA" mask is a simple constant.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ConfedSet(u8);

impl ConfedSet {
    pub const NON_UEFA_MASK: u8 = (1 << Confederation::Uefa as u8) - 1;

    pub fn empty() -> Self {
        ConfedSet(0)
    }

    pub fn singleton(c: Confederation) -> Self {
        ConfedSet(1 << c.index())
    }

    pub fn from_slice(tags: &[Confederation]) -> Self {
        let mut s = ConfedSet(0);
        for &t in tags {
            s.insert(t);
        }
        s
    }

    pub fn insert(&mut self, c: Confederation) {
        self.0 |= 1 << c.index();
    }

    pub fn contains(&self, c: Confederation) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn mask(&self) -> u8 {
        self.0
    }

    /// Mask restricted to the capped (non-UEFA) tags.
    pub fn non_uefa_mask(&self) -> u8 {
        self.0 & Self::NON_UEFA_MASK
    }

    pub fn iter(&self) -> impl Iterator<Item = Confederation> + '_ {
        Confederation::ALL.iter().copied().filter(|c| self.contains(*c))
    }
}

impl fmt::Debug for ConfedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// Whether label-dependent constraints (hosts, pathways, quarters) are fixed
/// before the draw or applied to finished groups afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Labelling {
    ExAnte,
    ExPost,
}

impl fmt::Display for Labelling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Labelling::ExAnte => f.write_str("ex-ante"),
            Labelling::ExPost => f.write_str("ex-post"),
        }
    }
}

impl FromStr for Labelling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ex-ante" | "exante" | "ex_ante" => Ok(Labelling::ExAnte),
            "ex-post" | "expost" | "ex_post" => Ok(Labelling::ExPost),
            other => Err(format!("unknown labelling policy `{other}`")),
        }
    }
}

/// A competing team, or a play-off placeholder carrying every confederation
/// its winner may come from.
#[derive(Debug, Clone)]
pub struct Team {
    pub id: String,
    pub name: String,
    pot: usize,
    pub confeds: ConfedSet,
    pre_assigned_group: Option<usize>,
}

impl Team {
    /// Zero-based pot index.
    pub fn pot_index(&self) -> usize {
        self.pot
    }

    /// Zero-based group index the team is fixed to, if any.
    pub fn pre_assigned_group(&self) -> Option<usize> {
        self.pre_assigned_group
    }

    pub fn is_host(&self) -> bool {
        self.pre_assigned_group.is_some()
    }

    pub fn is_uefa(&self) -> bool {
        self.confeds.contains(Confederation::Uefa)
    }

    /// Placeholders carry more than one possible confederation.
    pub fn is_placeholder(&self) -> bool {
        self.confeds.len() > 1
    }
}

/// Knockout-bracket structure induced by group labels: four quarters of
/// equal size, two pathways (quarters 0-1 and 2-3), protected top seeds, and
/// seed pairs that must land in opposite pathways.
#[derive(Debug, Clone)]
pub struct Bracket {
    quarters: [Vec<usize>; 4],
    quarter_of: Vec<u8>,
    top_seeds: Vec<usize>,
    pairs: Vec<[usize; 2]>,
}

impl Bracket {
    pub fn quarters(&self) -> &[Vec<usize>; 4] {
        &self.quarters
    }

    pub fn quarter_of_group(&self, group: usize) -> usize {
        self.quarter_of[group] as usize
    }

    /// Pathway 0 covers quarters 0-1, pathway 1 covers quarters 2-3.
    pub fn pathway_of_group(&self, group: usize) -> usize {
        self.quarter_of_group(group) / 2
    }

    pub fn top_seeds(&self) -> &[usize] {
        &self.top_seeds
    }

    pub fn is_top_seed(&self, team: usize) -> bool {
        self.top_seeds.contains(&team)
    }

    pub fn pairs(&self) -> &[[usize; 2]] {
        &self.pairs
    }

    /// For a paired top seed, its (pair index, side) role.
    pub fn pair_role(&self, team: usize) -> Option<(usize, usize)> {
        for (pi, pair) in self.pairs.iter().enumerate() {
            for (side, &t) in pair.iter().enumerate() {
                if t == team {
                    return Some((pi, side));
                }
            }
        }
        None
    }
}

/// A complete draw problem: groups, pots, teams, and constraint settings.
///
/// Instances are immutable once constructed and safe to share across
/// worker threads.
pub struct Instance {
    name: String,
    labels: Vec<String>,
    uefa_min: u32,
    uefa_max: u32,
    teams: Vec<Team>,
    bracket: Option<Bracket>,
    pot_count: usize,
    pots: Vec<Vec<usize>>,
    by_id: BTreeMap<String, usize>,
    token: u64,
    classes_ex_ante: OnceLock<ClassTable>,
    classes_ex_post: OnceLock<ClassTable>,
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance")
            .field("name", &self.name)
            .field("groups", &self.labels.len())
            .field("pots", &self.pot_count)
            .field("teams", &self.teams.len())
            .finish()
    }
}

impl Instance {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn group_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, group: usize) -> &str {
        &self.labels[group]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn pot_count(&self) -> usize {
        self.pot_count
    }

    pub fn uefa_min(&self) -> u32 {
        self.uefa_min
    }

    pub fn uefa_max(&self) -> u32 {
        self.uefa_max
    }

    pub fn teams(&self) -> &[Team] {
        &self.teams
    }

    pub fn team(&self, idx: usize) -> &Team {
        &self.teams[idx]
    }

    pub fn team_count(&self) -> usize {
        self.teams.len()
    }

    pub fn team_index(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Team indices of one pot (zero-based pot index), in instance order.
    pub fn pot_teams(&self, pot: usize) -> &[usize] {
        &self.pots[pot]
    }

    pub fn bracket(&self) -> Option<&Bracket> {
        self.bracket.as_ref()
    }

    /// Teams fixed to a group before the draw, as (team, group) pairs.
    pub fn pre_assignments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.teams
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.pre_assigned_group.map(|g| (i, g)))
    }

    /// Interchangeable-team partition for the given labelling policy.
    /// Cached after first use.
    pub fn classes(&self, labelling: Labelling) -> &ClassTable {
        let cell = match labelling {
            Labelling::ExAnte => &self.classes_ex_ante,
            Labelling::ExPost => &self.classes_ex_post,
        };
        cell.get_or_init(|| ClassTable::build(self, labelling))
    }

    pub(crate) fn from_parts(
        name: String,
        labels: Vec<String>,
        uefa_min: u32,
        uefa_max: u32,
        teams: Vec<Team>,
        bracket: Option<Bracket>,
    ) -> Self {
        let pot_count = teams.iter().map(|t| t.pot + 1).max().unwrap_or(0);
        let mut pots = vec![Vec::new(); pot_count];
        let mut by_id = BTreeMap::new();
        for (i, t) in teams.iter().enumerate() {
            pots[t.pot].push(i);
            by_id.insert(t.id.clone(), i);
        }
        use std::sync::atomic::{AtomicU64, Ordering};
        static NEXT_TOKEN: AtomicU64 = AtomicU64::new(1);
        Instance {
            name,
            labels,
            uefa_min,
            uefa_max,
            teams,
            bracket,
            pot_count,
            pots,
            by_id,
            token: NEXT_TOKEN.fetch_add(1, Ordering::Relaxed),
            classes_ex_ante: OnceLock::new(),
            classes_ex_post: OnceLock::new(),
        }
    }

    /// Process-unique identity of this instance object; scopes caches.
    pub fn token(&self) -> u64 {
        self.token
    }

    pub(crate) fn new_team(
        id: String,
        name: String,
        pot: usize,
        confeds: ConfedSet,
        pre_assigned_group: Option<usize>,
    ) -> Team {
        Team {
            id,
            name,
            pot,
            confeds,
            pre_assigned_group,
        }
    }

    pub(crate) fn new_bracket(
        quarters: [Vec<usize>; 4],
        group_count: usize,
        top_seeds: Vec<usize>,
        pairs: Vec<[usize; 2]>,
    ) -> Bracket {
        let mut quarter_of = vec![0u8; group_count];
        for (qi, q) in quarters.iter().enumerate() {
            for &g in q {
                quarter_of[g] = qi as u8;
            }
        }
        Bracket {
            quarters,
            quarter_of,
            top_seeds,
            pairs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confed_set_masks() {
        let mut s = ConfedSet::empty();
        s.insert(Confederation::Caf);
        s.insert(Confederation::Uefa);
        assert!(s.contains(Confederation::Caf));
        assert_eq!(s.len(), 2);
        assert_eq!(s.non_uefa_mask(), ConfedSet::singleton(Confederation::Caf).mask());
    }

    #[test]
    fn labelling_round_trips_display() {
        for l in [Labelling::ExAnte, Labelling::ExPost] {
            assert_eq!(l.to_string().parse::<Labelling>().unwrap(), l);
        }
    }
}
