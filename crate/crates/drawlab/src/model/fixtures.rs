//! Built-in instances, compiled in so the test suite and CLI need no
//! external files.

use super::{BracketDoc, Confederation, DrawState, Instance, InstanceDoc, TeamDoc};

fn team(id: &str, name: &str, pot: u32, confeds: &[&str], host_group: Option<&str>) -> TeamDoc {
    TeamDoc {
        id: id.into(),
        name: name.into(),
        pot,
        confeds: confeds
            .iter()
            .map(|c| Confederation::from_code(c).expect("known confederation code"))
            .collect(),
        host_group: host_group.map(Into::into),
    }
}

fn labels(s: &str) -> Vec<String> {
    s.split(',').map(Into::into).collect()
}

/// The 48-team, 12-group, 4-pot World Cup 2026 instance: three hosts fixed
/// to groups A, B and D, four protected top seeds, confederation caps with
/// the 1..=2 UEFA band, and two intercontinental play-off placeholders.
pub fn wc2026() -> Instance {
    let teams = vec![
        // Pot 1
        team("united-states", "United States", 1, &["CONCACAF"], Some("D")),
        team("mexico", "Mexico", 1, &["CONCACAF"], Some("A")),
        team("canada", "Canada", 1, &["CONCACAF"], Some("B")),
        team("spain", "Spain", 1, &["UEFA"], None),
        team("argentina", "Argentina", 1, &["CONMEBOL"], None),
        team("france", "France", 1, &["UEFA"], None),
        team("england", "England", 1, &["UEFA"], None),
        team("brazil", "Brazil", 1, &["CONMEBOL"], None),
        team("portugal", "Portugal", 1, &["UEFA"], None),
        team("netherlands", "Netherlands", 1, &["UEFA"], None),
        team("belgium", "Belgium", 1, &["UEFA"], None),
        team("germany", "Germany", 1, &["UEFA"], None),
        // Pot 2
        team("croatia", "Croatia", 2, &["UEFA"], None),
        team("morocco", "Morocco", 2, &["CAF"], None),
        team("colombia", "Colombia", 2, &["CONMEBOL"], None),
        team("uruguay", "Uruguay", 2, &["CONMEBOL"], None),
        team("switzerland", "Switzerland", 2, &["UEFA"], None),
        team("japan", "Japan", 2, &["AFC"], None),
        team("senegal", "Senegal", 2, &["CAF"], None),
        team("iran", "Iran", 2, &["AFC"], None),
        team("south-korea", "South Korea", 2, &["AFC"], None),
        team("ecuador", "Ecuador", 2, &["CONMEBOL"], None),
        team("austria", "Austria", 2, &["UEFA"], None),
        team("australia", "Australia", 2, &["AFC"], None),
        // Pot 3
        team("norway", "Norway", 3, &["UEFA"], None),
        team("panama", "Panama", 3, &["CONCACAF"], None),
        team("egypt", "Egypt", 3, &["CAF"], None),
        team("algeria", "Algeria", 3, &["CAF"], None),
        team("scotland", "Scotland", 3, &["UEFA"], None),
        team("paraguay", "Paraguay", 3, &["CONMEBOL"], None),
        team("tunisia", "Tunisia", 3, &["CAF"], None),
        team("ivory-coast", "Ivory Coast", 3, &["CAF"], None),
        team("uzbekistan", "Uzbekistan", 3, &["AFC"], None),
        team("qatar", "Qatar", 3, &["AFC"], None),
        team("saudi-arabia", "Saudi Arabia", 3, &["AFC"], None),
        team("south-africa", "South Africa", 3, &["CAF"], None),
        // Pot 4
        team("jordan", "Jordan", 4, &["AFC"], None),
        team("cape-verde", "Cape Verde", 4, &["CAF"], None),
        team("ghana", "Ghana", 4, &["CAF"], None),
        team("curacao", "Curaçao", 4, &["CONCACAF"], None),
        team("haiti", "Haiti", 4, &["CONCACAF"], None),
        team("new-zealand", "New Zealand", 4, &["OFC"], None),
        team("uefa-path-a", "UEFA Path A", 4, &["UEFA"], None),
        team("uefa-path-b", "UEFA Path B", 4, &["UEFA"], None),
        team("uefa-path-c", "UEFA Path C", 4, &["UEFA"], None),
        team("uefa-path-d", "UEFA Path D", 4, &["UEFA"], None),
        team("ic-path-1", "IC Path 1", 4, &["CAF", "CONCACAF", "OFC"], None),
        team("ic-path-2", "IC Path 2", 4, &["AFC", "CONCACAF", "CONMEBOL"], None),
    ];
    let doc = InstanceDoc {
        name: "wc2026".into(),
        groups: labels("A,B,C,D,E,F,G,H,I,J,K,L"),
        uefa_min: 1,
        uefa_max: 2,
        teams,
        bracket: Some(BracketDoc {
            quarters: vec![
                labels("E,F,I"),
                labels("D,G,H"),
                labels("A,C,L"),
                labels("B,J,K"),
            ],
            top_seeds: vec!["spain".into(), "argentina".into(), "france".into(), "england".into()],
            opposite_pairs: vec![
                ["spain".into(), "argentina".into()],
                ["france".into(), "england".into()],
            ],
        }),
    };
    Instance::from_doc(doc).expect("wc2026 fixture is valid")
}

fn example3(pre_assigned: bool) -> Instance {
    // Two pots of three abstract teams; the only restriction is that teams
    // 2 and 5 share a capped confederation and so can never meet.
    let doc = InstanceDoc {
        name: if pre_assigned {
            "example3-preassigned".into()
        } else {
            "example3-random".into()
        },
        groups: labels("A,B,C"),
        uefa_min: 0,
        uefa_max: 2,
        teams: vec![
            team("team-1", "Team 1", 1, &["AFC"], pre_assigned.then_some("A")),
            team("team-2", "Team 2", 1, &["CONMEBOL"], None),
            team("team-3", "Team 3", 1, &["CAF"], None),
            team("team-4", "Team 4", 2, &["OFC"], None),
            team("team-5", "Team 5", 2, &["CONMEBOL"], None),
            team("team-6", "Team 6", 2, &["CONCACAF"], None),
        ],
        bracket: None,
    };
    Instance::from_doc(doc).expect("example3 fixture is valid")
}

/// Six-team toy instance where team 1 is fixed to group A.
pub fn example3_preassigned() -> Instance {
    example3(true)
}

/// Same instance with team 1 drawn like the others.
pub fn example3_random() -> Instance {
    example3(false)
}

/// The 1990 World Cup second-pot draw: six seeded teams fixed to groups A-F,
/// and a pot of two South American and four European teams constrained by
/// the one-per-group confederation cap.
pub fn wc1990() -> Instance {
    let doc = InstanceDoc {
        name: "wc1990".into(),
        groups: labels("A,B,C,D,E,F"),
        uefa_min: 0,
        uefa_max: 6,
        teams: vec![
            team("italy", "Italy", 1, &["UEFA"], Some("A")),
            team("argentina", "Argentina", 1, &["CONMEBOL"], Some("B")),
            team("brazil", "Brazil", 1, &["CONMEBOL"], Some("C")),
            team("west-germany", "West Germany", 1, &["UEFA"], Some("D")),
            team("belgium", "Belgium", 1, &["UEFA"], Some("E")),
            team("england", "England", 1, &["UEFA"], Some("F")),
            team("colombia", "Colombia", 2, &["CONMEBOL"], None),
            team("uruguay", "Uruguay", 2, &["CONMEBOL"], None),
            team("czechoslovakia", "Czechoslovakia", 2, &["UEFA"], None),
            team("ireland", "Ireland", 2, &["UEFA"], None),
            team("romania", "Romania", 2, &["UEFA"], None),
            team("sweden", "Sweden", 2, &["UEFA"], None),
        ],
        bracket: None,
    };
    Instance::from_doc(doc).expect("wc1990 fixture is valid")
}

pub fn builtin_fixtures() -> Vec<Instance> {
    vec![wc2026(), example3_preassigned(), example3_random(), wc1990()]
}

pub fn builtin(name: &str) -> Option<Instance> {
    match name {
        "wc2026" => Some(wc2026()),
        "example3-preassigned" => Some(example3_preassigned()),
        "example3-random" => Some(example3_random()),
        "wc1990" => Some(wc1990()),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["wc2026", "example3-preassigned", "example3-random", "wc1990"]
}

/// A published example of a dead first half of the wc2026 draw: pots 1-2
/// placed so that no group holds either two UEFA teams or a CAF-UEFA pair,
/// which leaves the second intercontinental placeholder without a home.
pub fn deadlocked_pots12_state(inst: &Instance) -> DrawState {
    let rows = [
        ("A", "mexico", "morocco"),
        ("B", "canada", "austria"),
        ("C", "belgium", "australia"),
        ("D", "united-states", "croatia"),
        ("E", "england", "iran"),
        ("F", "france", "japan"),
        ("G", "argentina", "switzerland"),
        ("H", "brazil", "senegal"),
        ("I", "germany", "south-korea"),
        ("J", "netherlands", "colombia"),
        ("K", "portugal", "ecuador"),
        ("L", "spain", "uruguay"),
    ];
    let mut state = DrawState::new(inst);
    for (label, p1, p2) in rows {
        let g = inst.label_index(label).expect("wc2026 group label");
        for id in [p1, p2] {
            let t = inst.team_index(id).expect("wc2026 team id");
            state.place(inst, t, g).expect("fixture state is structurally valid");
        }
    }
    state
}
