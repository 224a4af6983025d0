use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uptest::abstraction::{derive_at_level, reduce_widget, AbstractionLevelMap, Level, RefineOutcome};
use uptest::app_model::AppModel;
use uptest::appdiff::updated_methods;
use uptest::explorer::{detect_active_window, run_campaign, CampaignConfig, Strategy};
use uptest::gui::{ConcreteWidget, GuiTree};
use uptest::scenario::{Action, ActionKind, Rect};
use uptest::simulator::Simulator;
use uptest::static_model::build_ewtg;

use super::{load, Outcome};

const MAX_WIDGETS: usize = 12;

fn screen() -> Rect {
    Rect { x: 0, y: 0, w: 1080, h: 1920 }
}

fn leaf(rng: &mut ChaCha8Rng, uid: String) -> ConcreteWidget {
    let classes = ["android.widget.Button", "android.widget.TextView", "android.widget.CheckBox"];
    let mut w = ConcreteWidget::new(uid, classes[rng.gen_range(0..classes.len())]);
    w.resource_id = ["a", "b", "c"][rng.gen_range(0..3)].to_string();
    w.text = ["", "x", "y"][rng.gen_range(0..3)].to_string();
    w.clickable = rng.gen_bool(0.8);
    w.checkable = rng.gen_bool(0.2);
    w.checked = w.checkable && rng.gen_bool(0.5);
    w.long_clickable = rng.gen_bool(0.2);
    w.content_desc = if rng.gen_bool(0.2) { "d".into() } else { String::new() };
    w
}

/// A random forest of at most `MAX_WIDGETS` widgets, two levels deep.
fn random_tree(rng: &mut ChaCha8Rng) -> GuiTree {
    let total = rng.gen_range(1..=MAX_WIDGETS);
    let mut roots: Vec<ConcreteWidget> = Vec::new();
    let mut made = 0;
    while made < total {
        let mut w = leaf(rng, format!("w{made}"));
        made += 1;
        let kids = rng.gen_range(0..=3).min(total - made);
        for _ in 0..kids {
            w.children.push(leaf(rng, format!("w{made}")));
            made += 1;
        }
        roots.push(w);
    }
    GuiTree::new("A", screen(), roots)
}

/// Widgets over a small attribute domain, enumerated exhaustively: resource id,
/// text, checked flag and up to two children differing only by text.
fn enumerated_widgets() -> Vec<ConcreteWidget> {
    let mut out = Vec::new();
    for rid in ["a", "b"] {
        for text in ["", "x"] {
            for checked in [false, true] {
                for kids in [vec![], vec![""], vec!["x"], vec!["", "x"], vec!["x", "x"]] {
                    let mut w = ConcreteWidget::new(format!("e{}", out.len()), "android.widget.CheckBox");
                    w.resource_id = rid.into();
                    w.text = text.into();
                    w.checkable = true;
                    w.checked = checked;
                    w.clickable = true;
                    for (i, t) in kids.iter().enumerate() {
                        let mut c = ConcreteWidget::new(format!("c{i}"), "android.widget.TextView");
                        c.text = t.to_string();
                        c.clickable = true;
                        w.children.push(c);
                    }
                    out.push(w);
                }
            }
        }
    }
    out
}

/// Every pair equal at the finer level must be equal at the coarser one.
fn widget_partition_monotone(ws: &[&ConcreteWidget]) -> Result<usize, String> {
    let mut pairs = 0;
    for pair in Level::ALL.windows(2) {
        let (coarse, fine) = (pair[0], pair[1]);
        for a in ws {
            for b in ws {
                pairs += 1;
                let same_fine = reduce_widget(a, fine).key == reduce_widget(b, fine).key;
                let same_coarse = reduce_widget(a, coarse).key == reduce_widget(b, coarse).key;
                if same_fine && !same_coarse {
                    return Err(format!("{} and {} split at {coarse} but merged at {fine}", a.uid, b.uid));
                }
            }
        }
    }
    Ok(pairs)
}

fn part_a() -> Result<String, String> {
    let enumerated = enumerated_widgets();
    let refs: Vec<&ConcreteWidget> = enumerated.iter().collect();
    let mut pairs = widget_partition_monotone(&refs)?;
    // The enumerated domain must actually be split further at each level.
    for pair in Level::ALL.windows(2) {
        let classes = |l: Level| {
            refs.iter()
                .map(|w| reduce_widget(w, l).key)
                .collect::<std::collections::BTreeSet<_>>()
                .len()
        };
        if classes(pair[1]) <= classes(pair[0]) {
            return Err(format!("no split between {} and {}", pair[0], pair[1]));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sets = 0;
    for _ in 0..300 {
        let trees: Vec<GuiTree> = (0..6).map(|_| random_tree(&mut rng)).collect();
        let all: Vec<&ConcreteWidget> = trees.iter().flat_map(|t| t.widgets()).collect();
        pairs += widget_partition_monotone(&all)?;
        for pair in Level::ALL.windows(2) {
            for a in &trees {
                for b in &trees {
                    let same_fine = derive_at_level(a, "A", pair[1]).avms == derive_at_level(b, "A", pair[1]).avms;
                    let same_coarse = derive_at_level(a, "A", pair[0]).avms == derive_at_level(b, "A", pair[0]).avms;
                    if same_fine && !same_coarse {
                        return Err(format!("tree states split at {} but merged at {}", pair[0], pair[1]));
                    }
                }
            }
        }
        sets += 1;
    }
    Ok(format!("{} enumerated widgets and {sets} tree sets, {pairs} pairs", enumerated.len()))
}

/// Scripted walk on the list whose rows share a resource id.
fn part_b_and_c() -> Result<String, String> {
    let sc = load("file_browser");
    let updated = updated_methods(&sc.code_v1, &sc.code_v2).map_err(|e| e.to_string())?;
    let mut model = AppModel::new(build_ewtg(&sc, &updated).map_err(|e| e.to_string())?);
    let mut sim = Simulator::new(&sc).map_err(|e| e.to_string())?;
    let screen = Rect::screen(sc.screen);
    let mut tree = sim.reset(0).tree;
    let mut window = detect_active_window(&mut model, &tree, screen);
    let mut flags = Vec::new();
    let mut step = |model: &mut AppModel, a: Action, tree: &mut GuiTree, window: &mut String| {
        let res = sim.execute(&a);
        let dst = detect_active_window(model, &res.tree, screen);
        let rec = model.record_step(&a, (tree, window), (&res.tree, &dst), &res.coverage);
        *tree = res.tree;
        *window = dst;
        rec.nondeterministic
    };
    let click = |uid: &str| Action::on(ActionKind::Click, uid);
    let back = || Action::window(ActionKind::PressBack);

    flags.push(step(&mut model, click("entry_0"), &mut tree, &mut window));
    if window != "Folder" {
        return Err(format!("entry_0 led to {window}"));
    }
    let folder_tree = tree.clone();
    let folder_state = model.state_of(&folder_tree, "Folder");
    flags.push(step(&mut model, back(), &mut tree, &mut window));
    // First revisit of the list, other row.
    let flagged = step(&mut model, click("entry_1"), &mut tree, &mut window);
    if flagged.as_deref() != Some("Browser") || flags.iter().any(Option::is_some) {
        return Err(format!("expected the first revisit to flag Browser, got {flagged:?} after {flags:?}"));
    }
    if model.levels.refine("Browser") != RefineOutcome::Refined(Level::L2) {
        return Err("Browser did not move to L2".into());
    }
    // Isolation: other windows keep their level and their states.
    for w in ["Folder", "Viewer"] {
        if model.levels.get(w) != Level::L1 {
            return Err(format!("{w} was refined along with Browser"));
        }
    }
    if model.state_of(&folder_tree, "Folder") != folder_state {
        return Err("Folder state changed after refining Browser".into());
    }
    for _ in 0..3 {
        for a in [back(), click("entry_0"), back(), click("entry_1")] {
            if let Some(w) = step(&mut model, a, &mut tree, &mut window) {
                return Err(format!("{w} still non-deterministic at L2"));
            }
        }
    }

    // Isolation on random trees: refining one window leaves the others' states alone.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let mut levels = AbstractionLevelMap::default();
        let t = random_tree(&mut rng);
        let before = uptest::abstraction::derive_abstract_state(&t, "B", &levels);
        for _ in 0..rng.gen_range(1..=4) {
            levels.refine("A");
        }
        if uptest::abstraction::derive_abstract_state(&t, "B", &levels) != before {
            return Err("refining A changed a state of B".into());
        }
    }

    // Campaigns agree: Browser is refined once, to L2, and nothing stays residual.
    for seed in 0..super::SEEDS {
        let cfg = CampaignConfig {
            budget: super::BUDGET,
            seed,
            strategy: Strategy::Atua,
            ..CampaignConfig::default()
        };
        let c = run_campaign(&sc, &cfg).map_err(|e| e.to_string())?;
        let browser: Vec<Level> = c
            .report
            .refinements
            .iter()
            .filter(|r| r.window == "Browser")
            .map(|r| r.level)
            .collect();
        if browser.iter().any(|l| *l > Level::L2) || !c.report.residual_nondeterminism.is_empty() {
            return Err(format!("seed {seed}: refinements {browser:?}"));
        }
    }
    Ok("L1 conflict flagged on first revisit, none at L2, other windows untouched".into())
}

pub fn criterion() -> Outcome {
    let a = part_a()?;
    let bc = part_b_and_c()?;
    Ok(format!("{a}; {bc}"))
}
