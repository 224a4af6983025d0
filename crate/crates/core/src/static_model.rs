//! Extended window transition graph (EWTG) built from the scenario's static
//! view, annotated with the updated methods each input can reach and with
//! hidden handlers that static analysis failed to bind to an input.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::appdiff::UpdatedMethodSet;
use crate::code::{CodeIndex, MethodId};
use crate::error::{Error, Result};
use crate::scenario::{ActionKind, InputKind, Scenario, WindowKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeclaredWidget {
    pub uid: String,
    pub resource_id: String,
    pub class: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HiddenHandler {
    /// Updated methods reachable from the handler.
    pub reachable: BTreeSet<MethodId>,
    /// Set once the handler has been observed executing on some input.
    pub matched: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Window {
    pub id: String,
    pub kind: WindowKind,
    pub class: Option<String>,
    pub widgets: Vec<DeclaredWidget>,
    pub triggered_dialogs: BTreeSet<String>,
    pub hidden_handlers: BTreeMap<MethodId, HiddenHandler>,
    /// Added at runtime rather than by static analysis.
    pub discovered: bool,
}

impl Window {
    pub fn declared_resources(&self) -> BTreeSet<&str> {
        self.widgets.iter().map(|w| w.resource_id.as_str()).collect()
    }
}

pub type InputId = usize;

#[derive(Debug, Clone, Serialize)]
pub struct Input {
    pub id: InputId,
    pub window: String,
    pub kind: InputKind,
    pub event: ActionKind,
    /// Resource id of the target widget.
    pub widget: Option<String>,
    pub handlers: BTreeSet<MethodId>,
    pub target_methods: BTreeSet<MethodId>,
    pub data: Vec<String>,
    pub discovered: bool,
}

impl Input {
    pub fn is_target(&self) -> bool {
        !self.target_methods.is_empty()
    }
}

pub type TransitionId = usize;

#[derive(Debug, Clone, Serialize)]
pub struct WindowTransition {
    pub id: TransitionId,
    pub source: String,
    pub dest: String,
    pub input: InputId,
    pub discovered: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Ewtg {
    pub windows: BTreeMap<String, Window>,
    pub inputs: Vec<Input>,
    pub transitions: Vec<WindowTransition>,
    /// Updated methods attached neither to an input nor to a hidden handler.
    pub unattached_targets: BTreeSet<MethodId>,
    pub literal_pool: BTreeSet<String>,
}

impl Ewtg {
    pub fn window(&self, id: &str) -> Option<&Window> {
        self.windows.get(id)
    }

    pub fn inputs_of<'a>(&'a self, window: &'a str) -> impl Iterator<Item = &'a Input> + 'a {
        self.inputs.iter().filter(move |i| i.window == window)
    }

    pub fn transitions_from<'a>(
        &'a self,
        window: &'a str,
    ) -> impl Iterator<Item = &'a WindowTransition> + 'a {
        self.transitions.iter().filter(move |t| t.source == window)
    }

    pub fn is_target_transition(&self, t: &WindowTransition) -> bool {
        self.inputs[t.input].is_target()
    }

    /// Source of a target transition, or owner of hidden handlers reaching updated methods.
    pub fn is_target_window(&self, id: &str) -> bool {
        self.transitions
            .iter()
            .any(|t| t.source == id && self.is_target_transition(t))
            || self.inputs_of(id).any(Input::is_target)
            || self
                .windows
                .get(id)
                .is_some_and(|w| w.hidden_handlers.values().any(|h| !h.reachable.is_empty()))
    }

    pub fn target_windows(&self) -> Vec<String> {
        self.windows
            .keys()
            .filter(|w| self.is_target_window(w))
            .cloned()
            .collect()
    }

    pub fn find_input(
        &self,
        window: &str,
        event: ActionKind,
        widget: Option<&str>,
    ) -> Option<InputId> {
        self.inputs
            .iter()
            .find(|i| i.window == window && i.event == event && i.widget.as_deref() == widget)
            .map(|i| i.id)
    }

    pub fn add_input(&mut self, mut input: Input) -> InputId {
        input.id = self.inputs.len();
        let id = input.id;
        self.inputs.push(input);
        id
    }

    /// Adds a transition unless an identical (source, dest, input) edge exists.
    pub fn add_transition(&mut self, source: &str, dest: &str, input: InputId) -> Option<TransitionId> {
        if self
            .transitions
            .iter()
            .any(|t| t.source == source && t.dest == dest && t.input == input)
        {
            return None;
        }
        let id = self.transitions.len();
        self.transitions.push(WindowTransition {
            id,
            source: source.to_string(),
            dest: dest.to_string(),
            input,
            discovered: true,
        });
        if let (Some(src), Some(dst)) = (self.windows.get(source), self.windows.get(dest)) {
            if dst.kind.is_popup() && !src.kind.is_popup() {
                let dest = dest.to_string();
                self.windows.get_mut(source).unwrap().triggered_dialogs.insert(dest);
            }
        }
        Some(id)
    }

    pub fn edge_count(&self) -> usize {
        self.transitions.len()
    }
}

/// Window implementing the class of `method`, looking through enclosing classes.
pub fn window_of_method(
    ewtg: &Ewtg,
    code: &CodeIndex,
    method: &MethodId,
) -> Option<String> {
    let class = &code.methods.get(method)?.class;
    for c in code.outer_chain(class) {
        if let Some(w) = ewtg.windows.values().find(|w| w.class.as_deref() == Some(c.as_str())) {
            return Some(w.id.clone());
        }
    }
    None
}

/// Windows, inputs and transitions visible to static analysis, without annotations.
pub fn skeleton(scenario: &Scenario) -> Result<Ewtg> {
    let mut ewtg = Ewtg::default();
    for w in scenario.static_view.windows.iter().filter(|w| w.statically_visible) {
        ewtg.windows.insert(
            w.id.clone(),
            Window {
                id: w.id.clone(),
                kind: w.kind,
                class: w.class.clone(),
                widgets: w
                    .all_widgets()
                    .into_iter()
                    .map(|wd| DeclaredWidget {
                        uid: wd.id.clone(),
                        resource_id: wd.resource_id().to_string(),
                        class: wd.class.clone(),
                    })
                    .collect(),
                triggered_dialogs: w
                    .dialogs
                    .iter()
                    .filter(|d| scenario.window(d).is_some_and(|d| d.statically_visible))
                    .cloned()
                    .collect(),
                hidden_handlers: BTreeMap::new(),
                discovered: false,
            },
        );
    }
    let code = CodeIndex::build(&scenario.code_v2)?;
    for w in scenario.static_view.windows.iter().filter(|w| w.statically_visible) {
        for decl in w.inputs.iter().filter(|i| i.statically_visible) {
            for h in &decl.handlers {
                if !code.contains(h) {
                    return Err(Error::validation(format!(
                        "window `{}`: dangling handler `{h}`",
                        w.id
                    )));
                }
            }
            let widget = decl
                .widget
                .as_ref()
                .and_then(|uid| w.widget(uid))
                .map(|wd| wd.resource_id().to_string());
            let id = ewtg.add_input(Input {
                id: 0,
                window: w.id.clone(),
                kind: decl.kind,
                event: decl.event,
                widget,
                handlers: decl.handlers.iter().cloned().collect(),
                target_methods: BTreeSet::new(),
                data: decl.data.clone(),
                discovered: false,
            });
            let dest = decl.target.clone().unwrap_or_else(|| w.id.clone());
            if ewtg.windows.contains_key(&dest) {
                ewtg.add_transition(&w.id, &dest, id);
            }
        }
    }
    for t in &mut ewtg.transitions {
        t.discovered = false;
    }
    ewtg.literal_pool = extract_terms(&code).literals;
    Ok(ewtg)
}

/// Annotates every input with the updated methods reachable from its handlers.
/// Returns updated methods reachable from no handler.
pub fn propagate_target_methods(
    ewtg: &mut Ewtg,
    code: &CodeIndex,
    updated: &UpdatedMethodSet,
) -> BTreeSet<MethodId> {
    let mut by_handler: BTreeMap<MethodId, Vec<InputId>> = BTreeMap::new();
    for i in &ewtg.inputs {
        for h in &i.handlers {
            by_handler.entry(h.clone()).or_default().push(i.id);
        }
    }
    let mut unattached = BTreeSet::new();
    for m in updated.all() {
        let mut attached = false;
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([m.clone()]);
        while let Some(cur) = queue.pop_front() {
            if !seen.insert(cur.clone()) {
                continue;
            }
            if let Some(inputs) = by_handler.get(&cur) {
                for &i in inputs {
                    ewtg.inputs[i].target_methods.insert(m.clone());
                    attached = true;
                }
            }
            for caller in code.call_graph.callers_of(&cur) {
                if !seen.contains(caller) {
                    queue.push_back(caller.clone());
                }
            }
        }
        if !attached {
            unattached.insert(m);
        }
    }
    unattached
}

/// Finds uncalled methods of window classes from which updated methods are
/// reachable without passing through a known handler.
pub fn detect_hidden_handlers(
    ewtg: &Ewtg,
    code: &CodeIndex,
    updated: &UpdatedMethodSet,
) -> BTreeMap<String, BTreeMap<MethodId, HiddenHandler>> {
    let known: BTreeSet<&MethodId> = ewtg.inputs.iter().flat_map(|i| i.handlers.iter()).collect();
    let mut out: BTreeMap<String, BTreeMap<MethodId, HiddenHandler>> = BTreeMap::new();
    for m in updated.all() {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([m.clone()]);
        while let Some(cur) = queue.pop_front() {
            if known.contains(&cur) || !seen.insert(cur.clone()) {
                continue;
            }
            if !code.call_graph.has_callers(&cur) {
                if let Some(w) = window_of_method(ewtg, code, &cur) {
                    out.entry(w)
                        .or_default()
                        .entry(cur.clone())
                        .or_default()
                        .reachable
                        .insert(m.clone());
                }
                continue;
            }
            for caller in code.call_graph.callers_of(&cur) {
                if !seen.contains(caller) {
                    queue.push_back(caller.clone());
                }
            }
        }
    }
    out
}

/// Terms (class attributes and string literals) referenced by each method.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TermIndex {
    pub per_method: BTreeMap<MethodId, BTreeSet<String>>,
    pub literals: BTreeSet<String>,
}

pub fn extract_terms(code: &CodeIndex) -> TermIndex {
    let mut idx = TermIndex::default();
    for (id, info) in &code.methods {
        idx.per_method.insert(id.clone(), info.terms.clone());
        idx.literals.extend(info.literals.iter().cloned());
    }
    idx
}

/// Full static pipeline: skeleton, target propagation, hidden handlers.
pub fn build_ewtg(scenario: &Scenario, updated: &UpdatedMethodSet) -> Result<Ewtg> {
    let code = CodeIndex::build(&scenario.code_v2)?;
    let mut ewtg = skeleton(scenario)?;
    let mut unattached = propagate_target_methods(&mut ewtg, &code, updated);
    for (w, hs) in detect_hidden_handlers(&ewtg, &code, updated) {
        for h in hs.values() {
            for m in &h.reachable {
                unattached.remove(m);
            }
        }
        if let Some(win) = ewtg.windows.get_mut(&w) {
            win.hidden_handlers = hs;
        }
    }
    ewtg.unattached_targets = unattached;
    Ok(ewtg)
}
