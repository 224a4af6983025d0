//! Acceptance run: one pass/fail line per criterion, nonzero exit on any failure.

mod diff_ir;
mod paths;
mod refinement;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use uptest::cli_io::ManualInputSpec;
use uptest::code::MethodId;
use uptest::explorer::budget::{ACTIONS_THRESHOLD, PHASE3_RANDOM_THRESHOLD};
use uptest::explorer::{run_campaign, CampaignConfig, CampaignReport, Strategy};
use uptest::scenario::{Scenario, WidgetDecl};

const SEEDS: u64 = 10;
const BUDGET: usize = 300;
const SCENARIOS: [&str; 4] = ["diary", "file_browser", "book_form", "notes_export"];
const DEPENDENCY_SCENARIO: &str = "notes_export";

pub type Outcome = Result<String, String>;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn load(name: &str) -> Scenario {
    Scenario::load(scenario_dir().join(format!("{name}.json"))).expect("bundled scenario loads")
}

fn manual_inputs(name: &str) -> ManualInputSpec {
    let p = scenario_dir().join(format!("{name}.inputs.json"));
    if p.exists() {
        ManualInputSpec::load(p).expect("manual inputs load")
    } else {
        ManualInputSpec::default()
    }
}

struct Run {
    scenario: String,
    strategy: Strategy,
    seed: u64,
    elapsed: Duration,
    report: CampaignReport,
}

fn config(name: &str, strategy: Strategy, seed: u64) -> CampaignConfig {
    CampaignConfig {
        scale_factor: 1,
        budget: BUDGET,
        seed,
        // The random baseline takes no engineer-provided inputs.
        manual_inputs: match strategy {
            Strategy::Atua => manual_inputs(name),
            Strategy::Random => ManualInputSpec::default(),
        },
        strategy,
    }
}

fn run_all() -> Vec<Run> {
    let mut runs = Vec::new();
    for name in SCENARIOS {
        let sc = load(name);
        for strategy in [Strategy::Atua, Strategy::Random] {
            for seed in 0..SEEDS {
                let cfg = config(name, strategy, seed);
                let t = Instant::now();
                let c = run_campaign(&sc, &cfg).expect("campaign runs");
                runs.push(Run {
                    scenario: name.to_string(),
                    strategy,
                    seed,
                    elapsed: t.elapsed(),
                    report: c.report,
                });
            }
        }
    }
    runs
}

fn criterion1(runs: &[Run]) -> Outcome {
    let diary: Vec<&Run> = runs
        .iter()
        .filter(|r| r.scenario == "diary" && r.strategy == Strategy::Atua)
        .collect();
    let early = [
        MethodId::from("diary.MainActivity.onLongClickCurrent(Landroid/view/View;)Z"),
        MethodId::from("diary.MainActivity.editNoteHandler(Landroid/view/View;)V"),
    ];
    let mut full = 0;
    let mut errors = Vec::new();
    let mut slowest = Duration::ZERO;
    for r in &diary {
        let t = &r.report.targets;
        if t.covered_methods == t.updated_methods && r.report.counted_actions <= BUDGET {
            full += 1;
        }
        for m in &early {
            match t.methods.get(m) {
                None => errors.push(format!("{m} is not an updated method")),
                Some(mc) => {
                    let ok = mc.first_covered_phase == Some(1)
                        && mc.first_covered_at.is_some_and(|n| n <= 10);
                    if !ok {
                        errors.push(format!(
                            "seed {}: {m} first covered at {:?} in phase {:?}",
                            r.seed, mc.first_covered_at, mc.first_covered_phase
                        ));
                    }
                }
            }
        }
        slowest = slowest.max(r.elapsed);
        if r.elapsed >= Duration::from_secs(5) {
            errors.push(format!("seed {} took {:?}", r.seed, r.elapsed));
        }
    }
    if full < 9 {
        errors.push(format!("only {full}/{} runs reached full method coverage", diary.len()));
    }
    let detail = format!(
        "{full}/{} runs at 100% method coverage, slowest run {:.2}s",
        diary.len(),
        slowest.as_secs_f64()
    );
    if errors.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", errors.join("; ")))
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn criterion2(runs: &[Run]) -> Outcome {
    let mut parts = Vec::new();
    let mut errors = Vec::new();
    for name in SCENARIOS {
        let cov = |s: Strategy| {
            median(
                runs.iter()
                    .filter(|r| r.scenario == name && r.strategy == s)
                    .map(|r| r.report.targets.instruction_coverage)
                    .collect(),
            )
        };
        let (a, r) = (cov(Strategy::Atua), cov(Strategy::Random));
        parts.push(format!("{name} {a:.3} vs {r:.3}"));
        if a < r {
            errors.push(format!("{name}: atua median below random"));
        }
        if name == DEPENDENCY_SCENARIO && a <= r {
            errors.push(format!("{name}: atua median not strictly above random"));
        }
    }
    let detail = parts.join(", ");
    if errors.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", errors.join("; ")))
    }
}

fn checkbox_uids(sc: &Scenario) -> BTreeSet<String> {
    fn walk(ws: &[WidgetDecl], out: &mut BTreeSet<String>) {
        for w in ws {
            if w.class.ends_with("CheckBox") {
                out.insert(w.id.clone());
            }
            walk(&w.children, out);
        }
    }
    let mut out = BTreeSet::new();
    for w in &sc.static_view.windows {
        walk(&w.widgets, &mut out);
    }
    out
}

/// Budget rules recomputed from the trace of one run.
fn check_budgets(run: &Run, checkboxes: &BTreeSet<String>) -> Result<(), String> {
    let rep = &run.report;
    let scale = rep.scale_factor;
    let tag = format!("{} {:?} seed {}", run.scenario, run.strategy, run.seed);
    let mut p2_visit: BTreeMap<&str, usize> = BTreeMap::new();
    let mut p3_visit: BTreeMap<&str, usize> = BTreeMap::new();
    let mut p3_random: BTreeMap<&str, usize> = BTreeMap::new();
    let mut counted = 0;
    for row in &rep.trace {
        let free = row.action == "TextInput"
            || (row.action == "Click" && checkboxes.contains(&row.widget));
        if free == row.counted {
            return Err(format!("{tag}: row {} ({} {}) counted={}", row.id, row.action, row.widget, row.counted));
        }
        if !row.counted {
            continue;
        }
        counted += 1;
        match row.phase.as_str() {
            "2" => {
                if row.visit.is_empty() {
                    return Err(format!("{tag}: phase 2 row {} outside a visit", row.id));
                }
                *p2_visit.entry(&row.visit).or_default() += 1;
            }
            "3" => {
                if !row.visit.is_empty() {
                    *p3_visit.entry(&row.visit).or_default() += 1;
                }
                if !row.random_invocation.is_empty() {
                    *p3_random.entry(&row.random_invocation).or_default() += 1;
                }
            }
            _ => {}
        }
    }
    if counted != rep.counted_actions || counted > rep.budget {
        return Err(format!("{tag}: {counted} counted rows, report says {}", rep.counted_actions));
    }
    let per_target = scale * ACTIONS_THRESHOLD;
    if let Some((v, n)) = p2_visit.iter().find(|(_, n)| **n > per_target) {
        return Err(format!("{tag}: phase 2 visit {v} used {n} > {per_target}"));
    }
    if let Some(p2) = rep.phases.iter().find(|p| p.phase == 2) {
        let tw = p2.target_windows.unwrap_or(0);
        let visits: BTreeSet<&str> = rep
            .trace
            .iter()
            .filter(|r| r.phase == "2" && !r.visit.is_empty())
            .map(|r| r.visit.as_str())
            .collect();
        if p2.visits > scale * tw || visits.len() > scale * tw {
            return Err(format!("{tag}: {} phase 2 visits for {tw} target windows", p2.visits));
        }
    }
    if let Some((v, n)) = p3_visit.iter().find(|(_, n)| **n > per_target) {
        return Err(format!("{tag}: phase 3 target visit {v} used {n} > {per_target}"));
    }
    let per_random = scale * PHASE3_RANDOM_THRESHOLD;
    if let Some((v, n)) = p3_random.iter().find(|(_, n)| **n > per_random) {
        return Err(format!("{tag}: phase 3 random invocation {v} used {n} > {per_random}"));
    }
    if run.strategy == Strategy::Random
        && rep.trace.iter().any(|r| !r.phase.is_empty() || !r.visit.is_empty())
    {
        return Err(format!("{tag}: random baseline rows carry phase data"));
    }
    Ok(())
}

fn criterion6(runs: &[Run]) -> Outcome {
    let mut checkboxes = BTreeMap::new();
    let mut rows = 0;
    for r in runs {
        let cb = checkboxes
            .entry(r.scenario.clone())
            .or_insert_with(|| checkbox_uids(&load(&r.scenario)));
        check_budgets(r, cb)?;
        rows += r.report.trace.len();
    }
    Ok(format!("{} runs, {rows} trace rows checked", runs.len()))
}

fn trace_bytes(sc: &Scenario, cfg: &CampaignConfig, dir: &std::path::Path, tag: &str) -> Vec<u8> {
    let c = run_campaign(sc, cfg).expect("campaign runs");
    let p = dir.join(format!("{tag}.csv"));
    c.report.write_trace(&p).expect("trace written");
    std::fs::read(p).unwrap()
}

fn criterion7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut n = 0;
    for name in SCENARIOS {
        let sc = load(name);
        for strategy in [Strategy::Atua, Strategy::Random] {
            for seed in [0, 7] {
                let cfg = config(name, strategy, seed);
                let a = trace_bytes(&sc, &cfg, dir.path(), "a");
                let b = trace_bytes(&sc, &cfg, dir.path(), "b");
                if a != b {
                    return Err(format!("{name} {strategy:?} seed {seed}: traces differ"));
                }
                n += 1;
            }
        }
    }
    Ok(format!("{n} repeated campaigns byte-identical"))
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored.
    let runs = run_all();
    let results: Vec<(&str, Outcome)> = vec![
        ("running-example fidelity", criterion1(&runs)),
        ("baseline dominance", criterion2(&runs)),
        ("refinement properties", refinement::criterion()),
        ("diff oracle", diff_ir::diff_criterion()),
        ("IR oracle", diff_ir::ir_criterion()),
        ("budget accounting", criterion6(&runs)),
        ("determinism", criterion7()),
        ("pathfinding oracle", paths::criterion()),
    ];
    let mut failed = 0;
    for (i, (name, res)) in results.iter().enumerate() {
        match res {
            Ok(d) => println!("criterion {} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
