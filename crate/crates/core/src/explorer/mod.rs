//! Target-driven exploration in three phases, plus a uniform random baseline.

mod baseline;
pub mod budget;
pub mod inputs;
mod phases;
pub mod report;
pub mod scores;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::abstraction::RefineOutcome;
use crate::app_model::{AppModel, StateId};
use crate::appdiff::{updated_methods, UpdatedMethodSet};
use crate::cli_io::ManualInputSpec;
use crate::code::CodeIndex;
use crate::error::{Error, Result};
use crate::gui::{ConcreteWidget, GuiTree};
use crate::ir::TermTable;
use crate::scenario::{Action, ActionKind, Rect, Scenario};
use crate::simulator::Simulator;
use crate::static_model::{build_ewtg, InputId, Window};

pub use budget::{count_action, number_of_actions_for_window, Budget, PhaseBudgets};
pub use report::{
    CampaignReport, PhaseStats, RandomInvocation, Refinement, TargetSummary, TimelinePoint,
    TraceRow,
};
pub use scores::{as_score, cm_weight, ws_score, TargetProgress};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Atua,
    Random,
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    /// 1 for a short campaign, 2 for a long one.
    pub scale_factor: usize,
    /// Total counted actions.
    pub budget: usize,
    pub seed: u64,
    pub manual_inputs: ManualInputSpec,
    pub strategy: Strategy,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            scale_factor: 1,
            budget: budget::ACTIONS_PER_HOUR,
            seed: 0,
            manual_inputs: ManualInputSpec::default(),
            strategy: Strategy::Atua,
        }
    }
}

/// Everything a campaign produces.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub report: CampaignReport,
    pub model: AppModel,
    pub terms: TermTable,
    pub updated: UpdatedMethodSet,
}

pub fn run_campaign(scenario: &Scenario, cfg: &CampaignConfig) -> Result<Campaign> {
    if cfg.scale_factor == 0 {
        return Err(Error::validation("scale factor must be at least 1"));
    }
    let mut engine = Engine::new(scenario, cfg)?;
    match cfg.strategy {
        Strategy::Atua => engine.run_atua(),
        Strategy::Random => engine.run_random(),
    }
    Ok(engine.finish())
}

/// Ratio of the window's declared resource ids that appear in the tree.
pub fn popup_ratio(window: &Window, tree: &GuiTree) -> f64 {
    let declared = window.declared_resources();
    if declared.is_empty() {
        return 0.0;
    }
    let shown: BTreeSet<&str> = tree.widgets().iter().map(|w| w.resource_id.as_str()).collect();
    declared.iter().filter(|r| shown.contains(*r)).count() as f64 / declared.len() as f64
}

/// Full-screen trees belong to the reported activity. Otherwise the pop-up
/// reachable from that activity with the highest widget ratio wins; when every
/// candidate scores zero a new pop-up window is registered.
pub fn detect_active_window(model: &mut AppModel, tree: &GuiTree, screen: Rect) -> String {
    let owner = tree.activity.clone();
    model.ensure_activity(&owner);
    if tree.bounds == screen {
        return owner;
    }
    let mut candidates = BTreeSet::new();
    let mut frontier = vec![owner.clone()];
    while let Some(w) = frontier.pop() {
        if let Some(win) = model.ewtg.window(&w) {
            for d in &win.triggered_dialogs {
                if candidates.insert(d.clone()) {
                    frontier.push(d.clone());
                }
            }
        }
    }
    let mut best: Option<(f64, String)> = None;
    for c in candidates {
        let Some(w) = model.ewtg.window(&c) else { continue };
        if !w.kind.is_popup() {
            continue;
        }
        let r = popup_ratio(w, tree);
        if r > 0.0 && best.as_ref().is_none_or(|(b, _)| r > *b) {
            best = Some((r, c));
        }
    }
    match best {
        Some((_, w)) => w,
        None => model.register_popup_window(tree, &owner),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Purpose {
    Reach,
    Exercise,
    Random,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Reach => "reach",
            Purpose::Exercise => "exercise",
            Purpose::Random => "random",
        }
    }
}

/// Hard stop on free actions executed back to back.
pub(crate) const MAX_FREE_STREAK: usize = 30;

pub(crate) struct Engine<'a> {
    cfg: &'a CampaignConfig,
    scenario: &'a Scenario,
    sim: Simulator<'a>,
    model: AppModel,
    code: CodeIndex,
    terms: TermTable,
    updated: UpdatedMethodSet,
    progress: TargetProgress,
    rng: ChaCha8Rng,
    screen: Rect,

    tree: GuiTree,
    window: String,
    state: StateId,

    counted: usize,
    total_actions: usize,
    /// Nested budgets; every counted action is charged to all of them.
    meters: Vec<(Budget, usize)>,
    free_streak: usize,

    phase: Option<u8>,
    purpose: Purpose,
    visit: Option<usize>,
    random_invocation: Option<usize>,
    next_visit: usize,

    exercised: BTreeMap<(String, String), usize>,
    texts: inputs::TextMemory,
    triggered: BTreeSet<InputId>,
    crashes: usize,

    trace: Vec<TraceRow>,
    timeline: Vec<TimelinePoint>,
    first_covered: BTreeMap<crate::code::MethodId, (usize, Option<u8>)>,
    refinements: Vec<Refinement>,
    residual: BTreeSet<String>,
    unreachable: BTreeSet<String>,
    random_invocations: Vec<RandomInvocation>,
    phases: Vec<PhaseStats>,
    notes: Vec<String>,
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario, cfg: &'a CampaignConfig) -> Result<Self> {
        let updated = updated_methods(&scenario.code_v1, &scenario.code_v2)?;
        let ewtg = build_ewtg(scenario, &updated)?;
        let code = CodeIndex::build(&scenario.code_v2)?;
        let terms = TermTable::build(&ewtg, &code);
        let totals = updated
            .all()
            .into_iter()
            .map(|m| {
                let n = code.instructions(&m);
                (m, n)
            })
            .collect();
        let mut sim = Simulator::new(scenario)?;
        let start = sim.reset(cfg.seed);
        let screen = Rect::screen(scenario.screen);
        let mut model = AppModel::new(ewtg);
        let window = detect_active_window(&mut model, &start.tree, screen);
        let state = model.state_of(&start.tree, &window);
        let mut e = Engine {
            cfg,
            scenario,
            sim,
            model,
            code,
            terms,
            updated,
            progress: TargetProgress::new(totals),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            screen,
            tree: start.tree,
            window,
            state,
            counted: 0,
            total_actions: 0,
            meters: Vec::new(),
            free_streak: 0,
            phase: None,
            purpose: Purpose::Random,
            visit: None,
            random_invocation: None,
            next_visit: 0,
            exercised: BTreeMap::new(),
            texts: inputs::TextMemory::default(),
            triggered: BTreeSet::new(),
            crashes: 0,
            trace: Vec::new(),
            timeline: Vec::new(),
            first_covered: BTreeMap::new(),
            refinements: Vec::new(),
            residual: BTreeSet::new(),
            unreachable: BTreeSet::new(),
            random_invocations: Vec::new(),
            phases: Vec::new(),
            notes: Vec::new(),
        };
        e.push_timeline();
        Ok(e)
    }

    fn hard_cap(&self) -> usize {
        self.cfg.budget * 20 + 1000
    }

    /// Global stop: budget spent or every target instruction covered.
    fn done(&self) -> bool {
        self.counted >= self.cfg.budget
            || self.progress.all_covered()
            || self.total_actions >= self.hard_cap()
    }

    fn meters_allow(&self) -> bool {
        self.meters.iter().all(|(b, used)| b.allows(*used))
    }

    fn can_count(&self) -> bool {
        self.counted < self.cfg.budget && self.meters_allow()
    }

    fn push_meter(&mut self, b: Budget) {
        self.meters.push((b, 0));
    }

    fn pop_meter(&mut self) -> usize {
        self.meters.pop().map_or(0, |(_, u)| u)
    }

    fn push_timeline(&mut self) {
        self.timeline.push(TimelinePoint {
            counted_actions: self.counted,
            total_actions: self.total_actions,
            covered_instructions: self.progress.covered_instructions(),
            covered_methods: self.progress.covered_methods(),
            phase: self.phase,
        });
    }

    /// Executes one action unless it would overrun a budget; `None` when refused.
    fn act(&mut self, action: &Action) -> Option<()> {
        let counted = count_action(action, &self.tree);
        if self.total_actions >= self.hard_cap() {
            return None;
        }
        if counted && !self.can_count() {
            return None;
        }
        if !counted && self.free_streak >= MAX_FREE_STREAK {
            return None;
        }
        let src_tree = std::mem::replace(&mut self.tree, GuiTree::new("", self.screen, Vec::new()));
        let src_window = self.window.clone();
        let res = self.sim.execute(action);
        self.total_actions += 1;
        if counted {
            self.counted += 1;
            self.free_streak = 0;
            for m in &mut self.meters {
                m.1 += 1;
            }
        } else {
            self.free_streak += 1;
        }
        if res.crashed {
            self.crashes += 1;
        }
        let dst_window = detect_active_window(&mut self.model, &res.tree, self.screen);
        let rec = self.model.record_step(
            action,
            (&src_tree, &src_window),
            (&res.tree, &dst_window),
            &res.coverage,
        );
        self.triggered.insert(rec.input);
        if let Some(w) = rec.nondeterministic {
            match self.model.levels.refine(&w) {
                RefineOutcome::Refined(level) => self.refinements.push(Refinement {
                    window: w,
                    level,
                    at_action: self.total_actions,
                }),
                RefineOutcome::Residual => {
                    self.residual.insert(w);
                }
            }
        }
        let new = self.progress.absorb(&res.coverage);
        if new > 0 {
            for m in res.coverage.keys() {
                if self.progress.totals.contains_key(m) && !self.first_covered.contains_key(m) {
                    self.first_covered.insert(m.clone(), (self.counted, self.phase));
                }
            }
        }
        if let Some(uid) = &action.widget {
            if let Some(w) = src_tree.find(uid) {
                if action.kind == ActionKind::TextInput {
                    self.texts.remember(&src_window, &w.resource_id, action.data.as_deref().unwrap_or(""));
                }
            }
        }
        let key = action.widget.clone().unwrap_or_else(|| format!("<{}>", action.kind));
        *self.exercised.entry((src_window.clone(), key)).or_default() += 1;

        let widget_rid = action
            .widget
            .as_deref()
            .and_then(|u| src_tree.find(u))
            .map(|w| w.resource_id.clone());
        self.tree = res.tree;
        self.window = dst_window;
        self.state = self.model.state_of(&self.tree, &self.window);
        self.trace.push(TraceRow {
            id: self.trace.len(),
            phase: self.phase.map(|p| p.to_string()).unwrap_or_default(),
            purpose: if self.phase.is_some() {
                self.purpose.as_str().to_string()
            } else {
                String::new()
            },
            action: action.kind.to_string(),
            widget: action.widget.clone().unwrap_or_default(),
            resource_id: widget_rid.unwrap_or_default(),
            data: action.data.clone().unwrap_or_default(),
            window: src_window.clone(),
            dest_window: self.window.clone(),
            counted,
            visit: self.visit.map(|v| v.to_string()).unwrap_or_default(),
            random_invocation: self.random_invocation.map(|v| v.to_string()).unwrap_or_default(),
            new_instructions: new,
            covered_instructions: self.progress.covered_instructions(),
            crashed: res.crashed,
            tree_hash: self.tree.hash(),
        });
        if new > 0 {
            self.push_timeline();
        }
        Some(())
    }

    fn interactive(&self) -> Vec<&ConcreteWidget> {
        self.tree.interactive()
    }

    /// A random interactive widget with the given resource id.
    fn widget_with_rid(&mut self, rid: &str) -> Option<String> {
        let ws: Vec<String> = self
            .interactive()
            .into_iter()
            .filter(|w| w.resource_id == rid)
            .map(|w| w.uid.clone())
            .collect();
        ws.choose(&mut self.rng).cloned()
    }

    fn text_value(&mut self, rid: &str, pin: &mut BTreeMap<String, usize>) -> String {
        inputs::generate_text(
            &mut self.rng,
            &self.texts,
            &self.model.ewtg.literal_pool,
            &self.cfg.manual_inputs,
            pin,
            &self.window,
            rid,
        )
    }

    fn finish(mut self) -> Campaign {
        self.push_timeline();
        let report = report::build(&self);
        Campaign {
            report,
            model: self.model,
            terms: self.terms,
            updated: self.updated,
        }
    }
}
