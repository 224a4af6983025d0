//! Algorithm loop for the three phases and the helpers they share.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;

use super::budget::{number_of_actions_for_window, Budget, PhaseBudgets};
use super::scores::{as_score, window_targets, ws_score};
use super::{Engine, Purpose};
use crate::abstraction::reduce_widget;
use crate::app_model::{ActionPath, Edge, Goal, Node, StateId};
use crate::code::MethodId;
use crate::ir::transition_document;
use super::report::PhaseStats;
use crate::scenario::{Action, ActionKind, SwipeDir};
use crate::static_model::InputId;

/// Stop condition for random exploration besides its budget.
#[derive(Debug, Clone)]
pub(crate) enum ExploreGoal {
    /// Stop as soon as another window is shown.
    StayIn(String),
    /// Stop once a widget with this resource id is interactive.
    Reveal(String),
}

enum Follow {
    Arrived,
    Failed(Edge),
    OutOfBudget,
}

enum Fire {
    Fired,
    Invisible,
    OutOfBudget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase3Target {
    Input(InputId),
    HiddenHandlers,
}

fn random_dir<R: Rng>(rng: &mut R) -> String {
    format!("{:?}", SwipeDir::ALL[rng.gen_range(0..4)])
}

impl Engine<'_> {
    pub(crate) fn run_atua(&mut self) {
        self.notes.push(
            "window and state scores weight each target method by its own coverage share".into(),
        );
        self.phase1();
        self.phase2();
        self.phase3();
        self.phase = None;
    }

    fn begin_phase(&mut self, phase: u8, target_windows: Option<usize>) {
        self.phase = Some(phase);
        self.phases.push(PhaseStats {
            phase,
            counted_actions: self.counted,
            total_actions: self.total_actions,
            visits: 0,
            target_windows,
        });
    }

    fn end_phase(&mut self, visits: usize) {
        let (c, t) = (self.counted, self.total_actions);
        if let Some(p) = self.phases.last_mut() {
            p.counted_actions = c - p.counted_actions;
            p.total_actions = t - p.total_actions;
            p.visits = visits;
        }
    }

    fn scale(&self) -> usize {
        self.cfg.scale_factor
    }

    /// Random exploration allowance for the current phase.
    fn random_budget(&self) -> Budget {
        match self.phase {
            Some(1) => Budget::Actions(self.scale() * number_of_actions_for_window(&self.tree)),
            Some(2) => PhaseBudgets::phase2(self.scale(), 0).random,
            _ => PhaseBudgets::phase3(self.scale()).random,
        }
    }

    fn has_rid(&self, rid: &str) -> bool {
        self.tree.interactive().iter().any(|w| w.resource_id == rid)
    }

    fn node_window<'b>(&'b self, n: &'b Node) -> &'b str {
        match n {
            Node::State(s) => self.model.window_of(*s),
            Node::Window(w) => w,
        }
    }

    fn model_size(&self) -> usize {
        self.model.dstg.transitions.len() + self.model.ewtg.transitions.len()
    }

    // ---- random exploration -------------------------------------------------

    /// Exercises the least used widgets of the active window until the budget
    /// is spent or the goal is met. Returns the counted actions used.
    pub(crate) fn random_explore(&mut self, budget: Budget, goal: ExploreGoal) -> usize {
        let id = self.random_invocations.len();
        let saved = (self.purpose, self.random_invocation);
        self.purpose = Purpose::Random;
        self.random_invocation = Some(id);
        self.push_meter(budget);
        let mut pin = BTreeMap::new();
        loop {
            if self.done() || !self.can_count() {
                break;
            }
            match &goal {
                ExploreGoal::StayIn(w) if self.window != *w => break,
                ExploreGoal::Reveal(rid) if self.has_rid(rid) => break,
                _ => {}
            }
            let action = self.random_action(&mut pin);
            if self.act(&action).is_none() {
                break;
            }
        }
        let used = self.pop_meter();
        self.random_invocations.push(super::RandomInvocation {
            id,
            phase: self.phase,
            budget: match budget {
                Budget::Actions(n) => Some(n),
                Budget::Infinite => None,
            },
            counted_actions: used,
        });
        (self.purpose, self.random_invocation) = saved;
        used
    }

    /// Least-exercised candidate of the active window.
    fn random_action(&mut self, pin: &mut BTreeMap<String, usize>) -> Action {
        enum Cand {
            Widget(String),
            Back,
            Window(InputId),
        }
        let mut cands: Vec<(String, Cand)> = self
            .tree
            .interactive()
            .into_iter()
            .map(|w| (w.uid.clone(), Cand::Widget(w.uid.clone())))
            .collect();
        cands.push((format!("<{}>", ActionKind::PressBack), Cand::Back));
        let mut seen = BTreeSet::new();
        for i in self.model.ewtg.inputs_of(&self.window) {
            if i.widget.is_none() && i.event != ActionKind::PressBack && seen.insert(i.event) {
                cands.push((format!("<{}>", i.event), Cand::Window(i.id)));
            }
        }
        if self.free_streak + 1 >= super::MAX_FREE_STREAK {
            // Only counted actions can break a run of free ones.
            cands.retain(|(_, c)| match c {
                Cand::Widget(uid) => self.tree.find(uid).is_some_and(|w| {
                    !w.is_input_field && !w.is_checkbox()
                }),
                _ => true,
            });
        }
        let count = |k: &str| {
            self.exercised
                .get(&(self.window.clone(), k.to_string()))
                .copied()
                .unwrap_or(0)
        };
        let min = cands.iter().map(|(k, _)| count(k)).min().unwrap_or(0);
        let least: Vec<&Cand> = cands.iter().filter(|(k, _)| count(k) == min).map(|(_, c)| c).collect();
        match least[self.rng.gen_range(0..least.len())] {
            Cand::Back => Action::window(ActionKind::PressBack),
            Cand::Window(i) => {
                let input = self.model.ewtg.inputs[*i].clone();
                self.window_input_action(input.event, &input.data)
            }
            Cand::Widget(uid) => {
                let uid = uid.clone();
                self.widget_action(&uid, pin)
            }
        }
    }

    fn window_input_action(&mut self, event: ActionKind, data: &[String]) -> Action {
        let mut a = Action::window(event);
        if let Some(d) = data.choose(&mut self.rng) {
            a.data = Some(d.clone());
        }
        a
    }

    /// An action for a widget: text for input fields, otherwise one of the
    /// supported events, preferring those with a declared handler.
    fn widget_action(&mut self, uid: &str, pin: &mut BTreeMap<String, usize>) -> Action {
        let Some(w) = self.tree.find(uid).cloned() else {
            return Action::window(ActionKind::PressBack);
        };
        if w.is_input_field {
            let text = self.text_value(&w.resource_id, pin);
            return Action::on(ActionKind::TextInput, uid).with_data(text);
        }
        let mut kinds = Vec::new();
        if w.clickable || w.checkable {
            kinds.push(ActionKind::Click);
        }
        if w.long_clickable {
            kinds.push(ActionKind::LongClick);
        }
        if w.scrollable {
            kinds.push(ActionKind::Swipe);
        }
        let declared: Vec<ActionKind> = kinds
            .iter()
            .copied()
            .filter(|k| {
                self.model
                    .ewtg
                    .find_input(&self.window, *k, Some(&w.resource_id))
                    .is_some()
            })
            .collect();
        let pool = if declared.is_empty() { &kinds } else { &declared };
        let kind = pool[self.rng.gen_range(0..pool.len())];
        let a = Action::on(kind, uid);
        if kind == ActionKind::Swipe {
            let d = random_dir(&mut self.rng);
            a.with_data(d)
        } else {
            a
        }
    }

    /// Gives text fields, check boxes and radio buttons user-like values.
    fn fill_inputs(&mut self) {
        let start = self.window.clone();
        let mut pin = BTreeMap::new();
        let widgets: Vec<(String, String, bool, bool, bool)> = self
            .tree
            .interactive()
            .into_iter()
            .filter(|w| w.is_input_field || w.checkable)
            .map(|w| (w.uid.clone(), w.resource_id.clone(), w.is_input_field, w.checkable, w.checked))
            .collect();
        for (uid, rid, input, checkable, _) in widgets {
            if self.window != start || self.done() {
                break;
            }
            let Some(cur) = self.tree.find(&uid).filter(|w| w.is_interactive()).cloned() else {
                continue;
            };
            let action = if input {
                let text = self.text_value(&rid, &mut pin);
                Action::on(ActionKind::TextInput, &uid).with_data(text)
            } else if checkable {
                let want = self.rng.gen_bool(0.5);
                if want == cur.checked {
                    continue;
                }
                Action::on(ActionKind::Click, &uid)
            } else {
                continue;
            };
            if self.act(&action).is_none() {
                break;
            }
        }
    }

    // ---- paths --------------------------------------------------------------

    fn resolve_edge(&mut self, edge: Edge) -> Result<Action, Option<String>> {
        let mut pin = BTreeMap::new();
        match edge {
            Edge::Abstract(t) => {
                let tr = self.model.dstg.transitions[t].clone();
                let Some(key) = tr.target else {
                    return Ok(Action {
                        kind: tr.action,
                        widget: None,
                        data: tr.data,
                    });
                };
                let level = self.model.levels.get(&self.window);
                let exact: Vec<String> = self
                    .tree
                    .interactive()
                    .into_iter()
                    .filter(|w| reduce_widget(w, level).key == key)
                    .map(|w| w.uid.clone())
                    .collect();
                let rid = key.resource_id().unwrap_or_default().to_string();
                let uid = match exact.choose(&mut self.rng) {
                    Some(u) => u.clone(),
                    None => self.widget_with_rid(&rid).ok_or(Some(rid.clone()))?,
                };
                let data = match tr.action {
                    ActionKind::TextInput => Some(self.text_value(&rid, &mut pin)),
                    ActionKind::Swipe => tr.data.or_else(|| Some(random_dir(&mut self.rng))),
                    _ => tr.data,
                };
                Ok(Action {
                    kind: tr.action,
                    widget: Some(uid),
                    data,
                })
            }
            Edge::Window(t) => {
                let tr = self.model.ewtg.transitions[t].clone();
                let input = self.model.ewtg.inputs[tr.input].clone();
                self.input_action(&input.widget, input.event, &input.data, &mut pin)
            }
        }
    }

    fn input_action(
        &mut self,
        widget: &Option<String>,
        event: ActionKind,
        data: &[String],
        pin: &mut BTreeMap<String, usize>,
    ) -> Result<Action, Option<String>> {
        let Some(rid) = widget else {
            return Ok(self.window_input_action(event, data));
        };
        let uid = self.widget_with_rid(rid).ok_or(Some(rid.clone()))?;
        let a = Action::on(event, uid);
        Ok(match event {
            ActionKind::TextInput => {
                let t = self.text_value(rid, pin);
                a.with_data(t)
            }
            ActionKind::Swipe => {
                let d = random_dir(&mut self.rng);
                a.with_data(d)
            }
            _ => a,
        })
    }

    /// Executes a planned path, revealing missing widgets by random
    /// exploration and stopping at the first unexpected window.
    fn follow_path(&mut self, path: &ActionPath) -> Follow {
        for step in &path.steps {
            if self.done() {
                return Follow::OutOfBudget;
            }
            let action = match self.resolve_edge(step.edge) {
                Ok(a) => a,
                Err(None) => return Follow::Failed(step.edge),
                Err(Some(rid)) => {
                    let rb = self.random_budget();
                    self.random_explore(rb, ExploreGoal::Reveal(rid));
                    if self.window != self.node_window(&step.from) {
                        return Follow::Failed(step.edge);
                    }
                    match self.resolve_edge(step.edge) {
                        Ok(a) => a,
                        Err(_) => return Follow::Failed(step.edge),
                    }
                }
            };
            if self.act(&action).is_none() {
                return Follow::OutOfBudget;
            }
            let expected = self.node_window(&step.to).to_string();
            if self.window != expected {
                return Follow::Failed(step.edge);
            }
        }
        Follow::Arrived
    }

    /// Drives the app to the goal's window, re-planning around failed edges.
    /// When no path exists the active window is explored at random.
    fn reach(&mut self, goal: Goal) -> bool {
        let target = match &goal {
            Goal::Window(w) => w.clone(),
            Goal::State(s) => self.model.window_of(*s).to_string(),
        };
        let saved = self.purpose;
        self.purpose = Purpose::Reach;
        let mut avoid = BTreeSet::new();
        let ok = loop {
            if self.window == target {
                break true;
            }
            if self.done() || !self.can_count() {
                break false;
            }
            let path = self
                .model
                .find_path_avoiding(self.state, &goal, &avoid)
                .or_else(|| {
                    self.model
                        .find_path_avoiding(self.state, &Goal::Window(target.clone()), &avoid)
                });
            match path {
                None => {
                    self.unreachable.insert(target.clone());
                    let rb = self.random_budget();
                    let here = self.window.clone();
                    self.random_explore(rb, ExploreGoal::StayIn(here));
                    break self.window == target;
                }
                Some(p) => match self.follow_path(&p) {
                    Follow::Arrived => {}
                    Follow::Failed(e) => {
                        avoid.insert(e);
                    }
                    Follow::OutOfBudget => break self.window == target,
                },
            }
        };
        self.purpose = saved;
        ok
    }

    /// Fires an input of the active window, revealing its widget if needed.
    fn fire_input(&mut self, i: InputId) -> Fire {
        let input = self.model.ewtg.inputs[i].clone();
        let mut pin = BTreeMap::new();
        let action = match self.input_action(&input.widget, input.event, &input.data, &mut pin) {
            Ok(a) => a,
            Err(rid) => {
                let Some(rid) = rid else { return Fire::Invisible };
                let rb = self.random_budget();
                self.random_explore(rb, ExploreGoal::Reveal(rid));
                if self.window != input.window {
                    return Fire::Invisible;
                }
                match self.input_action(&input.widget, input.event, &input.data, &mut pin) {
                    Ok(a) => a,
                    Err(_) => return Fire::Invisible,
                }
            }
        };
        let saved = self.purpose;
        self.purpose = Purpose::Exercise;
        let r = self.act(&action);
        self.purpose = saved;
        match r {
            Some(_) => Fire::Fired,
            None => Fire::OutOfBudget,
        }
    }

    fn target_inputs(&self, window: &str) -> Vec<InputId> {
        self.model
            .ewtg
            .inputs_of(window)
            .filter(|i| i.is_target())
            .map(|i| i.id)
            .collect()
    }

    fn has_hidden_targets(&self, window: &str) -> bool {
        self.model
            .ewtg
            .window(window)
            .is_some_and(|w| w.hidden_handlers.values().any(|h| !h.reachable.is_empty()))
    }

    /// Windows with a positive score, in id order.
    fn window_scores(&self) -> Vec<(String, f64)> {
        self.model
            .ewtg
            .windows
            .keys()
            .map(|w| (w.clone(), ws_score(&self.model, &self.progress, w)))
            .filter(|(_, s)| *s > 0.0)
            .collect()
    }

    fn sample_window(&mut self, scores: &[(String, f64)]) -> String {
        let dist = WeightedIndex::new(scores.iter().map(|(_, s)| *s)).expect("positive scores");
        scores[dist.sample(&mut self.rng)].0.clone()
    }

    /// Closest state among `states`, measured by strict path length; ties by id.
    fn closest_state(&self, states: &[StateId]) -> Option<StateId> {
        states
            .iter()
            .filter_map(|&s| {
                self.model
                    .find_strict_path(self.state, &Goal::State(s))
                    .map(|p| (p.len(), s))
            })
            .min()
            .map(|(_, s)| s)
    }

    fn current_states_of(&self, window: &str) -> Vec<StateId> {
        let level = self.model.levels.get(window);
        self.model
            .dstg
            .states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.window == window && s.level == level)
            .map(|(i, _)| i)
            .collect()
    }

    // ---- phase 1 ------------------------------------------------------------

    fn phase1(&mut self) {
        self.begin_phase(1, None);
        let mut blocked: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        let mut unexercisable: BTreeSet<InputId> = BTreeSet::new();
        let mut hidden_explored: BTreeSet<String> = BTreeSet::new();
        let mut stalls: BTreeMap<String, usize> = BTreeMap::new();
        loop {
            if self.done() {
                break;
            }
            let size = self.model_size();
            let cands: Vec<String> = self
                .model
                .ewtg
                .windows
                .keys()
                .filter(|w| {
                    let pending = self.target_inputs(w).into_iter().any(|i| {
                        !self.triggered.contains(&i) && !unexercisable.contains(&i)
                    });
                    pending || (self.has_hidden_targets(w) && !hidden_explored.contains(*w))
                })
                .filter(|w| match blocked.get(*w) {
                    None => true,
                    Some(&(attempts, at)) => attempts < 3 && size > at,
                })
                .cloned()
                .collect();
            let Some(target) = cands.choose(&mut self.rng).cloned() else {
                break;
            };
            let before = (self.triggered.len(), unexercisable.len(), hidden_explored.len());
            if !self.reach(Goal::Window(target.clone())) {
                let e = blocked.entry(target).or_insert((0, 0));
                e.0 += 1;
                e.1 = self.model_size();
                continue;
            }
            self.exercise_phase1(&target, &mut unexercisable, &mut hidden_explored);
            if before == (self.triggered.len(), unexercisable.len(), hidden_explored.len()) {
                let n = stalls.entry(target.clone()).or_default();
                *n += 1;
                if *n >= 3 {
                    blocked.insert(target, (3, usize::MAX));
                }
            }
        }
        self.end_phase(0);
    }

    fn exercise_phase1(
        &mut self,
        window: &str,
        unexercisable: &mut BTreeSet<InputId>,
        hidden_explored: &mut BTreeSet<String>,
    ) {
        self.purpose = Purpose::Exercise;
        self.fill_inputs();
        let mut pending: Vec<InputId> = self
            .target_inputs(window)
            .into_iter()
            .filter(|i| !self.triggered.contains(i) && !unexercisable.contains(i))
            .collect();
        pending.shuffle(&mut self.rng);
        for i in pending {
            if self.window != window || self.done() {
                break;
            }
            if self.triggered.contains(&i) {
                continue;
            }
            match self.fire_input(i) {
                Fire::Fired => {}
                Fire::Invisible => {
                    unexercisable.insert(i);
                }
                Fire::OutOfBudget => break,
            }
        }
        if self.window == window
            && self.has_hidden_targets(window)
            && hidden_explored.insert(window.to_string())
        {
            let rb = self.random_budget();
            self.random_explore(rb, ExploreGoal::StayIn(window.to_string()));
        }
    }

    // ---- phase 2 ------------------------------------------------------------

    fn phase2(&mut self) {
        if self.done() {
            return;
        }
        let target_windows = self.window_scores().len();
        let budgets = PhaseBudgets::phase2(self.scale(), target_windows);
        self.begin_phase(2, Some(target_windows));
        let mut visits = 0;
        let mut since_gain: BTreeSet<String> = BTreeSet::new();
        let mut last = self.progress.covered_instructions();
        loop {
            if self.done() || !budgets.phase.allows(visits) {
                break;
            }
            let scores = self.window_scores();
            if scores.is_empty() || scores.iter().all(|(w, _)| since_gain.contains(w)) {
                break;
            }
            let w = self.sample_window(&scores);
            visits += 1;
            self.visit = Some(self.next_visit);
            self.next_visit += 1;
            self.push_meter(budgets.reachability);

            let goal = self.best_state_goal(&w);
            if self.reach(goal) {
                self.exercise_phase2(&w);
            }

            self.pop_meter();
            self.visit = None;
            since_gain.insert(w);
            let now = self.progress.covered_instructions();
            if now > last {
                last = now;
                since_gain.clear();
            }
        }
        self.end_phase(visits);
    }

    /// Highest-scoring abstract state of the window, ties broken by distance.
    fn best_state_goal(&self, window: &str) -> Goal {
        let scored: Vec<(StateId, f64)> = self
            .current_states_of(window)
            .into_iter()
            .map(|s| (s, as_score(&self.model, &self.progress, s)))
            .collect();
        let best = scored.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        if best <= 0.0 {
            return Goal::Window(window.to_string());
        }
        let top: Vec<StateId> = scored.iter().filter(|(_, v)| *v == best).map(|(s, _)| *s).collect();
        match self.closest_state(&top) {
            Some(s) => Goal::State(s),
            None => Goal::Window(window.to_string()),
        }
    }

    fn exercise_phase2(&mut self, window: &str) {
        self.purpose = Purpose::Exercise;
        self.fill_inputs();
        let mut inputs = self.target_inputs(window);
        inputs.shuffle(&mut self.rng);
        for i in inputs {
            if self.window != window || self.done() {
                break;
            }
            if let Fire::OutOfBudget = self.fire_input(i) {
                break;
            }
        }
        if self.window == window {
            let rb = self.random_budget();
            self.random_explore(rb, ExploreGoal::StayIn(window.to_string()));
        }
    }

    // ---- phase 3 ------------------------------------------------------------

    fn phase3(&mut self) {
        if self.done() {
            return;
        }
        let budgets = PhaseBudgets::phase3(self.scale());
        self.begin_phase(3, None);
        let mut idle = 0;
        let mut visits = 0;
        loop {
            if self.done() {
                break;
            }
            let scores = self.window_scores();
            if scores.is_empty() {
                break;
            }
            let w = self.sample_window(&scores);
            let targets = self.phase3_targets(&w);
            let before = self.counted;
            for t in targets {
                if self.done() {
                    break;
                }
                visits += 1;
                self.visit = Some(self.next_visit);
                self.next_visit += 1;
                self.push_meter(budgets.target);
                self.phase3_exercise(&w, &t);
                self.pop_meter();
                self.visit = None;
            }
            if self.counted == before {
                idle += 1;
                if idle >= 5 {
                    self.notes.push("phase 3 stopped: no action could be taken".into());
                    break;
                }
            } else {
                idle = 0;
            }
        }
        self.end_phase(visits);
    }

    fn uncovered_any(&self, ms: &BTreeSet<MethodId>) -> bool {
        ms.iter().any(|m| self.progress.uncovered(m) > 0)
    }

    fn phase3_targets(&self, window: &str) -> Vec<Phase3Target> {
        let mut out: Vec<Phase3Target> = self
            .model
            .ewtg
            .inputs_of(window)
            .filter(|i| self.uncovered_any(&i.target_methods))
            .map(|i| Phase3Target::Input(i.id))
            .collect();
        if self.unmatched_hidden(window).next().is_some() {
            out.push(Phase3Target::HiddenHandlers);
        }
        if out.is_empty() && self.uncovered_any(&window_targets(&self.model, window)) {
            out.push(Phase3Target::HiddenHandlers);
        }
        out
    }

    fn unmatched_hidden<'b>(&'b self, window: &str) -> impl Iterator<Item = &'b MethodId> + 'b {
        self.model
            .ewtg
            .window(window)
            .into_iter()
            .flat_map(|w| w.hidden_handlers.iter())
            .filter(|(_, h)| !h.matched && self.uncovered_any(&h.reachable))
            .map(|(m, _)| m)
    }

    /// Explores a related window, then fires the target from the closest state
    /// of its source window where it is enabled.
    fn phase3_exercise(&mut self, window: &str, target: &Phase3Target) {
        let doc = match target {
            Phase3Target::Input(i) => {
                let hs = self.model.ewtg.inputs[*i].handlers.clone();
                transition_document(&self.code, hs.iter())
            }
            Phase3Target::HiddenHandlers => {
                let hs: Vec<MethodId> = self.unmatched_hidden(window).cloned().collect();
                transition_document(&self.code, hs.iter())
            }
        };
        if let Some(related) = self.terms.select_related_window(&doc, window, &mut self.rng) {
            if self.reach(Goal::Window(related.clone())) && self.window == related {
                let rb = self.random_budget();
                self.random_explore(rb, ExploreGoal::StayIn(related));
            }
        }
        if self.done() || !self.can_count() {
            return;
        }
        let goal = match target {
            Phase3Target::Input(i) => match self.model.ewtg.inputs[*i].widget.clone() {
                Some(rid) => {
                    let states: Vec<StateId> = self
                        .current_states_of(window)
                        .into_iter()
                        .filter(|s| self.model.dstg.state(*s).has_resource(&rid))
                        .collect();
                    self.closest_state(&states)
                        .map(Goal::State)
                        .unwrap_or_else(|| Goal::Window(window.to_string()))
                }
                None => Goal::Window(window.to_string()),
            },
            Phase3Target::HiddenHandlers => Goal::Window(window.to_string()),
        };
        if !self.reach(goal) || self.window != window {
            return;
        }
        self.purpose = Purpose::Exercise;
        self.fill_inputs();
        if self.window != window {
            return;
        }
        match target {
            Phase3Target::Input(i) => {
                self.fire_input(*i);
            }
            Phase3Target::HiddenHandlers => self.explore_hidden(window),
        }
    }

    /// Random exploration of the window, repeated within the target budget
    /// until a hidden handler fires for the first time.
    fn explore_hidden(&mut self, window: &str) {
        let pending = self.unmatched_hidden(window).count();
        loop {
            let before = self.counted;
            let rb = self.random_budget();
            self.random_explore(rb, ExploreGoal::StayIn(window.to_string()));
            if self.unmatched_hidden(window).count() < pending
                || self.counted == before
                || self.done()
                || !self.can_count()
            {
                return;
            }
            if !self.reach(Goal::Window(window.to_string())) || self.window != window {
                return;
            }
            self.purpose = Purpose::Exercise;
            self.fill_inputs();
        }
    }
}
