//! Minimal tour: run one draw, then compare the toy instance's skip
//! distribution against the exact uniform one.

use drawlab::draw::{run_skip_draw, Procedure};
use drawlab::exact::{enumerate_skip, enumerate_uniform, EnumerateOptions};
use drawlab::metrics::{compute_metrics, TeamSets};
use drawlab::model::{fixtures, Labelling};

fn main() {
    let inst = fixtures::wc2026();
    let procedure = Procedure::official(inst.pot_count());
    let (state, transcript) = run_skip_draw(&inst, &procedure, 42, 0).unwrap();
    println!("one {procedure} draw at seed 42:");
    for g in 0..inst.group_count() {
        let names: Vec<&str> = (0..inst.pot_count())
            .filter_map(|p| state.team_at(g, p))
            .map(|t| inst.team(t).name.as_str())
            .collect();
        println!("  {}: {}", inst.label(g), names.join(", "));
    }
    let skips: usize = transcript.events.iter().map(|e| e.skipped.len()).sum();
    println!("  ({} groups were skipped along the way)\n", skips);

    let toy = fixtures::example3_preassigned();
    let opts = EnumerateOptions::default();
    let skip = enumerate_skip(&toy, &Procedure::official(2), &opts).unwrap();
    let uniform = enumerate_uniform(&toy, Labelling::ExAnte, &opts).unwrap();
    let report = compute_metrics(&skip, &uniform, &TeamSets::from_instance(&toy)).unwrap();
    println!("toy instance, skip vs uniform (percentage points):");
    for (k, v) in report.m.iter().enumerate() {
        println!("  m{} = {v:.2}", k + 1);
    }
}
