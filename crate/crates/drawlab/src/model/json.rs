//! Instance document schema and validation.
//!
//! The on-disk format is JSON with a fixed shape; unknown fields are
//! rejected. Validation errors carry the path of the offending field.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use super::{ConfedSet, Confederation, Instance, Team};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("{path}: duplicate team id `{id}`")]
    DuplicateTeamId { path: String, id: String },
    #[error("pot {pot} has {actual} teams, expected {expected}")]
    PotSize {
        pot: usize,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: pre-assignment conflict: {message}")]
    PreAssignment { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct InstanceDoc {
    pub name: String,
    pub groups: Vec<String>,
    pub uefa_min: u32,
    pub uefa_max: u32,
    pub teams: Vec<TeamDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<BracketDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TeamDoc {
    pub id: String,
    pub name: String,
    /// One-based pot number.
    pub pot: u32,
    pub confeds: Vec<Confederation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host_group: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BracketDoc {
    pub quarters: Vec<Vec<String>>,
    pub top_seeds: Vec<String>,
    pub opposite_pairs: Vec<[String; 2]>,
}

/// Parses and validates an instance document.
pub fn load_instance(source: &str) -> Result<Instance, InstanceError> {
    let doc: InstanceDoc =
        serde_json::from_str(source).map_err(|e| InstanceError::Schema(e.to_string()))?;
    Instance::from_doc(doc)
}

/// Renders an instance back to its document form.
pub fn serialize_instance(inst: &Instance) -> String {
    let doc = inst.to_doc();
    serde_json::to_string_pretty(&doc).expect("instance serialization cannot fail")
}

impl Instance {
    pub(crate) fn from_doc(doc: InstanceDoc) -> Result<Instance, InstanceError> {
        if doc.groups.is_empty() {
            return Err(InstanceError::Schema("groups: must be non-empty".into()));
        }
        if doc.teams.is_empty() {
            return Err(InstanceError::Schema("teams: must be non-empty".into()));
        }
        let group_count = doc.groups.len();
        let mut seen_labels = BTreeSet::new();
        for (i, label) in doc.groups.iter().enumerate() {
            if label.is_empty() {
                return Err(invalid(format!("groups[{i}]"), "empty group label"));
            }
            if !seen_labels.insert(label.clone()) {
                return Err(invalid(format!("groups[{i}]"), format!("duplicate group label `{label}`")));
            }
        }
        if doc.uefa_min > doc.uefa_max {
            return Err(invalid("uefa_min", "uefa_min exceeds uefa_max"));
        }

        let label_index = |label: &str| doc.groups.iter().position(|l| l == label);

        let pot_count = doc.teams.iter().map(|t| t.pot as usize).max().unwrap_or(0);
        if doc.uefa_min as usize > pot_count {
            return Err(invalid("uefa_min", "uefa_min exceeds the pot count"));
        }
        if doc.teams.len() != group_count * pot_count {
            return Err(invalid(
                "teams",
                format!(
                    "expected {} teams ({} groups x {} pots), found {}",
                    group_count * pot_count,
                    group_count,
                    pot_count,
                    doc.teams.len()
                ),
            ));
        }

        let mut ids = BTreeMap::new();
        let mut teams = Vec::with_capacity(doc.teams.len());
        let mut pot_sizes = vec![0usize; pot_count];
        let mut host_labels: BTreeMap<usize, String> = BTreeMap::new();
        for (i, td) in doc.teams.iter().enumerate() {
            let path = format!("teams[{i}]");
            if td.id.is_empty() {
                return Err(invalid(format!("{path}.id"), "empty team id"));
            }
            if let Some(prev) = ids.insert(td.id.clone(), i) {
                let _ = prev;
                return Err(InstanceError::DuplicateTeamId {
                    path: format!("{path}.id"),
                    id: td.id.clone(),
                });
            }
            if td.pot == 0 {
                return Err(invalid(format!("{path}.pot"), "pots are numbered from 1"));
            }
            let confeds = ConfedSet::from_slice(&td.confeds);
            if confeds.is_empty() {
                return Err(invalid(format!("{path}.confeds"), "at least one confederation required"));
            }
            if confeds.len() > 1 && confeds.contains(Confederation::Uefa) {
                return Err(invalid(
                    format!("{path}.confeds"),
                    "a multi-confederation placeholder cannot include UEFA",
                ));
            }
            let pre = match &td.host_group {
                None => None,
                Some(label) => {
                    let g = label_index(label).ok_or_else(|| {
                        invalid(format!("{path}.host_group"), format!("unknown group label `{label}`"))
                    })?;
                    if let Some(other) = host_labels.insert(g, td.id.clone()) {
                        return Err(InstanceError::PreAssignment {
                            path: format!("{path}.host_group"),
                            message: format!(
                                "group `{label}` is already reserved for `{other}`"
                            ),
                        });
                    }
                    Some(g)
                }
            };
            pot_sizes[td.pot as usize - 1] += 1;
            teams.push(Instance::new_team(
                td.id.clone(),
                td.name.clone(),
                td.pot as usize - 1,
                confeds,
                pre,
            ));
        }
        for (p, &size) in pot_sizes.iter().enumerate() {
            if size != group_count {
                return Err(InstanceError::PotSize {
                    pot: p + 1,
                    expected: group_count,
                    actual: size,
                });
            }
        }

        let bracket = match &doc.bracket {
            None => None,
            Some(bd) => {
                if bd.quarters.len() != 4 {
                    return Err(invalid("bracket.quarters", "exactly four quarters required"));
                }
                let mut covered = BTreeSet::new();
                let mut quarters: [Vec<usize>; 4] = Default::default();
                let quarter_size = group_count / 4;
                for (qi, q) in bd.quarters.iter().enumerate() {
                    if q.len() != quarter_size {
                        return Err(invalid(
                            format!("bracket.quarters[{qi}]"),
                            format!("expected {quarter_size} labels, found {}", q.len()),
                        ));
                    }
                    for label in q {
                        let g = label_index(label).ok_or_else(|| {
                            invalid(
                                format!("bracket.quarters[{qi}]"),
                                format!("unknown group label `{label}`"),
                            )
                        })?;
                        if !covered.insert(g) {
                            return Err(invalid(
                                format!("bracket.quarters[{qi}]"),
                                format!("group `{label}` appears in two quarters"),
                            ));
                        }
                        quarters[qi].push(g);
                    }
                }
                if covered.len() != group_count {
                    return Err(invalid("bracket.quarters", "quarters must cover every group"));
                }
                let mut top_seeds = Vec::new();
                for (i, id) in bd.top_seeds.iter().enumerate() {
                    let ti = *ids.get(id).ok_or_else(|| {
                        invalid(format!("bracket.top_seeds[{i}]"), format!("unknown team id `{id}`"))
                    })?;
                    if top_seeds.contains(&ti) {
                        return Err(invalid(
                            format!("bracket.top_seeds[{i}]"),
                            format!("duplicate top seed `{id}`"),
                        ));
                    }
                    top_seeds.push(ti);
                }
                if top_seeds.len() > 4 {
                    return Err(invalid("bracket.top_seeds", "at most one top seed per quarter"));
                }
                let mut pairs = Vec::new();
                let mut paired = BTreeSet::new();
                for (i, [a, b]) in bd.opposite_pairs.iter().enumerate() {
                    let path = format!("bracket.opposite_pairs[{i}]");
                    let ta = *ids
                        .get(a)
                        .ok_or_else(|| invalid(&path, format!("unknown team id `{a}`")))?;
                    let tb = *ids
                        .get(b)
                        .ok_or_else(|| invalid(&path, format!("unknown team id `{b}`")))?;
                    if ta == tb {
                        return Err(invalid(&path, "a pair must name two distinct teams"));
                    }
                    for t in [ta, tb] {
                        if !top_seeds.contains(&t) {
                            return Err(invalid(&path, "pair members must be top seeds"));
                        }
                        if !paired.insert(t) {
                            return Err(invalid(&path, "a team may appear in at most one pair"));
                        }
                    }
                    pairs.push([ta, tb]);
                }
                Some(Instance::new_bracket(quarters, group_count, top_seeds, pairs))
            }
        };

        Ok(Instance::from_parts(
            doc.name,
            doc.groups,
            doc.uefa_min,
            doc.uefa_max,
            teams,
            bracket,
        ))
    }

    pub(crate) fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            name: self.name().to_string(),
            groups: self.labels().to_vec(),
            uefa_min: self.uefa_min(),
            uefa_max: self.uefa_max(),
            teams: self.teams().iter().map(|t| self.team_to_doc(t)).collect(),
            bracket: self.bracket().map(|b| BracketDoc {
                quarters: b
                    .quarters()
                    .iter()
                    .map(|q| q.iter().map(|&g| self.label(g).to_string()).collect())
                    .collect(),
                top_seeds: b.top_seeds().iter().map(|&t| self.team(t).id.clone()).collect(),
                opposite_pairs: b
                    .pairs()
                    .iter()
                    .map(|&[a, b]| [self.team(a).id.clone(), self.team(b).id.clone()])
                    .collect(),
            }),
        }
    }

    fn team_to_doc(&self, t: &Team) -> TeamDoc {
        TeamDoc {
            id: t.id.clone(),
            name: t.name.clone(),
            pot: t.pot_index() as u32 + 1,
            confeds: t.confeds.iter().collect(),
            host_group: t.pre_assigned_group().map(|g| self.label(g).to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    #[test]
    fn round_trips_builtin_instances() {
        for inst in fixtures::builtin_fixtures() {
            let text = serialize_instance(&inst);
            let reparsed = load_instance(&text).unwrap();
            assert_eq!(serialize_instance(&reparsed), text, "{}", inst.name());
        }
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = load_instance(r#"{"name":"x","groups":["A"],"uefa_min":0,"uefa_max":1,"teams":[],"zzz":1}"#)
            .unwrap_err();
        assert!(matches!(err, InstanceError::Schema(_)), "{err}");
    }

    #[test]
    fn rejects_empty_team_list() {
        let err = load_instance(r#"{"name":"x","groups":["A"],"uefa_min":0,"uefa_max":1,"teams":[]}"#)
            .unwrap_err();
        assert!(matches!(err, InstanceError::Schema(_)), "{err}");
    }

    #[test]
    fn rejects_duplicate_team_ids() {
        let text = r#"{"name":"x","groups":["A"],"uefa_min":0,"uefa_max":2,
            "teams":[{"id":"t","name":"T","pot":1,"confeds":["AFC"]},
                     {"id":"t","name":"T2","pot":2,"confeds":["CAF"]}]}"#;
        let err = load_instance(text).unwrap_err();
        assert!(matches!(err, InstanceError::DuplicateTeamId { .. }), "{err}");
    }

    #[test]
    fn rejects_pot_size_mismatch() {
        let text = r#"{"name":"x","groups":["A","B"],"uefa_min":0,"uefa_max":2,
            "teams":[{"id":"a","name":"A","pot":1,"confeds":["AFC"]},
                     {"id":"b","name":"B","pot":1,"confeds":["CAF"]},
                     {"id":"c","name":"C","pot":1,"confeds":["OFC"]},
                     {"id":"d","name":"D","pot":2,"confeds":["UEFA"]}]}"#;
        let err = load_instance(text).unwrap_err();
        assert!(matches!(err, InstanceError::PotSize { .. }), "{err}");
    }

    #[test]
    fn rejects_conflicting_pre_assignments() {
        let text = r#"{"name":"x","groups":["A","B"],"uefa_min":0,"uefa_max":2,
            "teams":[{"id":"a","name":"A","pot":1,"confeds":["AFC"],"host_group":"A"},
                     {"id":"b","name":"B","pot":1,"confeds":["CAF"],"host_group":"A"},
                     {"id":"c","name":"C","pot":2,"confeds":["OFC"]},
                     {"id":"d","name":"D","pot":2,"confeds":["UEFA"]}]}"#;
        let err = load_instance(text).unwrap_err();
        assert!(matches!(err, InstanceError::PreAssignment { .. }), "{err}");
    }

    #[test]
    fn rejects_uefa_placeholder_mix() {
        let text = r#"{"name":"x","groups":["A"],"uefa_min":0,"uefa_max":2,
            "teams":[{"id":"a","name":"A","pot":1,"confeds":["UEFA","CAF"]}]}"#;
        let err = load_instance(text).unwrap_err();
        assert!(matches!(err, InstanceError::Invalid { .. }), "{err}");
    }
}
