//! Deterministic stand-in for a device running the instrumented app.
//!
//! The simulator keeps a window stack and the scenario's state variables,
//! fires the first matching guarded rule for every action, and reports the
//! rendered GUI tree together with the instructions the rule executed.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::code::{CodeIndex, MethodId};
use crate::error::Result;
use crate::gui::{ConcreteWidget, GuiTree};
use crate::scenario::{
    Action, ActionKind, Effect, Guard, Rect, Scenario, SwipeDir, TraceEntry, Value, WidgetDecl,
    WindowDecl,
};

/// Covered instruction indices per method.
pub type Coverage = BTreeMap<MethodId, BTreeSet<usize>>;

pub fn merge_coverage(into: &mut Coverage, from: &Coverage) {
    for (m, instrs) in from {
        into.entry(m.clone()).or_default().extend(instrs.iter().copied());
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepResult {
    pub tree: GuiTree,
    pub coverage: Coverage,
    pub activity: String,
    pub crashed: bool,
    /// The action targeted an absent or disabled widget and did nothing.
    pub ignored: bool,
    pub bounds: Rect,
}

pub struct Simulator<'a> {
    scenario: &'a Scenario,
    code: CodeIndex,
    vars: BTreeMap<String, Value>,
    stack: Vec<String>,
    /// Text and checked state of widgets without a bound variable, per open window.
    texts: BTreeMap<(String, String), String>,
    checks: BTreeMap<(String, String), bool>,
    steps: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let code = CodeIndex::build(&scenario.code_v2)?;
        Ok(Simulator {
            scenario,
            code,
            vars: scenario.dynamic.vars.clone(),
            stack: vec![scenario.launcher.clone()],
            texts: BTreeMap::new(),
            checks: BTreeMap::new(),
            steps: 0,
        })
    }

    /// Restarts the app from its launcher with initial state. Scenario rules are
    /// deterministic, so the seed does not influence the result.
    pub fn reset(&mut self, _seed: u64) -> StepResult {
        self.restart();
        self.result(Coverage::new(), false, false)
    }

    fn restart(&mut self) {
        self.vars = self.scenario.dynamic.vars.clone();
        self.stack = vec![self.scenario.launcher.clone()];
        self.texts.clear();
        self.checks.clear();
    }

    pub fn current_window(&self) -> &str {
        self.stack.last().map(String::as_str).unwrap_or(&self.scenario.launcher)
    }

    pub fn var(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn decl(&self, id: &str) -> &'a WindowDecl {
        self.scenario
            .window(id)
            .expect("stack only holds validated window ids")
    }

    fn activity(&self) -> String {
        self.stack
            .iter()
            .rev()
            .find(|w| !self.decl(w).kind.is_popup())
            .cloned()
            .unwrap_or_else(|| self.scenario.launcher.clone())
    }

    fn text_of(&self, window: &str, wd: &WidgetDecl) -> String {
        if wd.input {
            if let Some(v) = &wd.value_var {
                return self.vars.get(v).map(|v| v.to_string()).unwrap_or_default();
            }
            if let Some(t) = self.texts.get(&(window.to_string(), wd.id.clone())) {
                return t.clone();
            }
        }
        if let Some(v) = &wd.text_var {
            return self.vars.get(v).map(|v| v.to_string()).unwrap_or_default();
        }
        wd.text.clone()
    }

    fn checked_of(&self, window: &str, wd: &WidgetDecl) -> bool {
        match &wd.checked_var {
            Some(v) => self.vars.get(v).is_some_and(Value::truthy),
            None => self
                .checks
                .get(&(window.to_string(), wd.id.clone()))
                .copied()
                .unwrap_or(false),
        }
    }

    fn eval(&self, window: &WindowDecl, g: &Guard) -> bool {
        let text = |uid: &str| {
            window
                .widget(uid)
                .map(|wd| self.text_of(&window.id, wd))
                .unwrap_or_default()
        };
        match g {
            Guard::Is(v) => self.vars.get(v).is_some_and(Value::truthy),
            Guard::Eq(v, val) => self.vars.get(v) == Some(val),
            Guard::TextEmpty(uid) => text(uid).is_empty(),
            Guard::TextEq(uid, s) => text(uid) == *s,
            Guard::TextMatches(uid, re) => regex::Regex::new(re)
                .map(|re| re.is_match(&text(uid)))
                .unwrap_or(false),
            Guard::Checked(uid) => window
                .widget(uid)
                .is_some_and(|wd| self.checked_of(&window.id, wd)),
            Guard::Not(g) => !self.eval(window, g),
            Guard::All(gs) => gs.iter().all(|g| self.eval(window, g)),
            Guard::Any(gs) => gs.iter().any(|g| self.eval(window, g)),
        }
    }

    fn render_widget(&self, window: &WindowDecl, wd: &WidgetDecl, bounds: Rect) -> Option<ConcreteWidget> {
        if let Some(g) = &wd.visible_when {
            if !self.eval(window, g) {
                return None;
            }
        }
        let mut w = ConcreteWidget::new(wd.id.clone(), wd.class.clone());
        w.resource_id = wd.resource_id().to_string();
        w.content_desc = wd.content_desc.clone();
        w.text = self.text_of(&window.id, wd);
        w.clickable = wd.clickable || wd.checkable;
        w.long_clickable = wd.long_clickable;
        w.scrollable = wd.scrollable;
        w.password = wd.password;
        w.is_input_field = wd.input;
        w.checkable = wd.checkable;
        w.checked = wd.checkable && self.checked_of(&window.id, wd);
        w.selected = wd.selected;
        w.enabled = wd.enabled_when.as_ref().is_none_or(|g| self.eval(window, g));
        w.bounds = bounds;
        let child_h = (bounds.h / (wd.children.len() as u32 + 1)).max(1);
        w.children = wd
            .children
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let b = Rect {
                    x: bounds.x,
                    y: bounds.y + child_h * i as u32,
                    w: bounds.w,
                    h: child_h,
                };
                self.render_widget(window, c, b)
            })
            .collect();
        Some(w)
    }

    pub fn render(&self) -> GuiTree {
        let decl = self.decl(self.current_window());
        let bounds = decl.bounds(self.scenario.screen);
        let row_h = (bounds.h / (decl.widgets.len() as u32 + 1)).max(1);
        let roots = decl
            .widgets
            .iter()
            .enumerate()
            .filter_map(|(i, wd)| {
                let b = Rect {
                    x: bounds.x,
                    y: bounds.y + row_h * i as u32,
                    w: bounds.w,
                    h: row_h,
                };
                self.render_widget(decl, wd, b)
            })
            .collect();
        GuiTree::new(self.activity(), bounds, roots)
    }

    fn result(&self, coverage: Coverage, crashed: bool, ignored: bool) -> StepResult {
        let tree = self.render();
        StepResult {
            activity: tree.activity.clone(),
            bounds: tree.bounds,
            tree,
            coverage,
            crashed,
            ignored,
        }
    }

    /// Opening a window from a menu or dialog dismisses it first.
    fn push(&mut self, window: &str) {
        let top = self.current_window().to_string();
        if top != window && self.scenario.window(&top).is_some_and(|w| w.kind.is_popup()) {
            self.pop();
        }
        self.texts.retain(|(w, _), _| w != window);
        self.checks.retain(|(w, _), _| w != window);
        self.stack.push(window.to_string());
    }

    fn pop(&mut self) {
        if self.stack.len() > 1 {
            if let Some(w) = self.stack.pop() {
                if !self.stack.contains(&w) {
                    self.texts.retain(|(x, _), _| *x != w);
                    self.checks.retain(|(x, _), _| *x != w);
                }
            }
        }
    }

    fn apply(&mut self, window: &WindowDecl, e: &Effect) {
        match e {
            Effect::Set(v, val) => {
                self.vars.insert(v.clone(), val.clone());
            }
            Effect::Toggle(v) => {
                let cur = self.vars.get(v).is_some_and(Value::truthy);
                self.vars.insert(v.clone(), Value::Bool(!cur));
            }
            Effect::Incr(v) => {
                let cur = match self.vars.get(v) {
                    Some(Value::Int(i)) => *i,
                    _ => 0,
                };
                self.vars.insert(v.clone(), Value::Int(cur + 1));
            }
            Effect::StoreText(v, uid) => {
                let t = window
                    .widget(uid)
                    .map(|wd| self.text_of(&window.id, wd))
                    .unwrap_or_default();
                self.vars.insert(v.clone(), Value::Str(t));
            }
        }
    }

    fn trace_coverage(&self, trace: &[TraceEntry], out: &mut Coverage) {
        for t in trace {
            let range = match t {
                TraceEntry::Full(m) => 0..self.code.instructions(m),
                TraceEntry::Range { range, .. } => range.0..range.1,
            };
            out.entry(t.method().clone()).or_default().extend(range);
        }
    }

    pub fn execute(&mut self, action: &Action) -> StepResult {
        self.steps += 1;
        let window = self.decl(self.current_window());

        if let Some(uid) = &action.widget {
            let tree = self.render();
            let present = tree.find(uid).is_some_and(|w| w.is_interactive());
            if !present {
                return self.result(Coverage::new(), false, true);
            }
        } else if action.kind.is_widget_action() {
            return self.result(Coverage::new(), false, true);
        }

        if let (Some(uid), Some(wd)) = (&action.widget, action.widget.as_ref().and_then(|u| window.widget(u))) {
            let key = (window.id.clone(), uid.clone());
            match action.kind {
                ActionKind::TextInput if wd.input => {
                    let text = action.data.clone().unwrap_or_default();
                    match &wd.value_var {
                        Some(v) => {
                            self.vars.insert(v.clone(), Value::Str(text));
                        }
                        None => {
                            self.texts.insert(key, text);
                        }
                    }
                }
                ActionKind::Click if wd.checkable => match &wd.checked_var {
                    Some(v) => {
                        let cur = self.vars.get(v).is_some_and(Value::truthy);
                        self.vars.insert(v.clone(), Value::Bool(!cur));
                    }
                    None => {
                        let cur = self.checks.get(&key).copied().unwrap_or(false);
                        self.checks.insert(key, !cur);
                    }
                },
                _ => {}
            }
        }

        let dir = action.data.as_deref().and_then(SwipeDir::parse);
        let rule = self.scenario.dynamic.rules.iter().find(|r| {
            r.window == window.id
                && r.widget == action.widget
                && r.action == action.kind
                && (r.direction.is_none() || r.direction == dir)
                && r.guard.as_ref().is_none_or(|g| self.eval(window, g))
        });

        let mut coverage = Coverage::new();
        match rule {
            Some(r) => {
                self.trace_coverage(&r.trace, &mut coverage);
                for e in &r.effects {
                    self.apply(window, e);
                }
                if r.crash {
                    self.restart();
                    return self.result(coverage, true, false);
                }
                match r.goto.as_deref() {
                    Some("back") => self.pop(),
                    Some(w) => self.push(w),
                    None => {}
                }
            }
            None if action.kind == ActionKind::PressBack => self.pop(),
            None => {}
        }
        self.result(coverage, false, false)
    }
}

/// Replays a witness from a fresh start and returns the union of its coverage.
pub fn replay(scenario: &Scenario, actions: &[Action]) -> Result<(Coverage, Vec<StepResult>)> {
    let mut sim = Simulator::new(scenario)?;
    sim.reset(0);
    let mut cov = Coverage::new();
    let mut steps = Vec::new();
    for a in actions {
        let r = sim.execute(a);
        merge_coverage(&mut cov, &r.coverage);
        steps.push(r);
    }
    Ok((cov, steps))
}
