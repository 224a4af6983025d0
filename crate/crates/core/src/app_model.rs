//! The live app model: the static EWTG plus the abstract (DSTG) and concrete
//! (GSTG) state transition graphs learned while exploring.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::Serialize;

use crate::abstraction::{
    derive_abstract_state, reduce_widget, AbstractState, AbstractionLevelMap, AvmKey,
};
use crate::code::MethodId;
use crate::gui::GuiTree;
use crate::scenario::{Action, ActionKind, InputKind, WindowKind};
use crate::simulator::{merge_coverage, Coverage};
use crate::static_model::{DeclaredWidget, Ewtg, Input, InputId, TransitionId, Window};

pub type StateId = usize;
pub type AbstractTransitionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct AbstractTransition {
    pub id: AbstractTransitionId,
    pub action: ActionKind,
    pub source: StateId,
    /// Absent for window-level actions.
    pub target: Option<AvmKey>,
    pub dest: StateId,
    pub data: Option<String>,
    pub input: InputId,
    pub coverage: Coverage,
    pub multiplicity: usize,
}

type TransitionKey = (ActionKind, StateId, Option<AvmKey>, StateId, Option<String>);
type OutcomeKey = (StateId, ActionKind, Option<AvmKey>, Option<String>);

#[derive(Debug, Clone, Default, Serialize)]
pub struct Dstg {
    pub states: Vec<AbstractState>,
    pub transitions: Vec<AbstractTransition>,
    #[serde(skip)]
    state_index: BTreeMap<AbstractState, StateId>,
    #[serde(skip)]
    transition_index: BTreeMap<TransitionKey, AbstractTransitionId>,
    #[serde(skip)]
    outcomes: BTreeMap<OutcomeKey, BTreeSet<StateId>>,
}

impl Dstg {
    pub fn intern(&mut self, state: AbstractState) -> StateId {
        if let Some(&id) = self.state_index.get(&state) {
            return id;
        }
        let id = self.states.len();
        self.state_index.insert(state.clone(), id);
        self.states.push(state);
        id
    }

    pub fn state(&self, id: StateId) -> &AbstractState {
        &self.states[id]
    }

    pub fn outgoing(&self, s: StateId) -> impl Iterator<Item = &AbstractTransition> {
        self.transitions.iter().filter(move |t| t.source == s)
    }

    /// Adds a transition or merges into the one with the same identity.
    /// Returns its id and, when the outcome contradicts an earlier destination,
    /// the conflicting destination.
    #[allow(clippy::too_many_arguments)]
    pub fn add_transition(
        &mut self,
        action: ActionKind,
        source: StateId,
        target: Option<AvmKey>,
        dest: StateId,
        data: Option<String>,
        input: InputId,
        coverage: &Coverage,
    ) -> (AbstractTransitionId, Option<StateId>) {
        let okey = (source, action, target.clone(), data.clone());
        let conflict = self.outcomes.get(&okey).and_then(|prev| {
            let d = &self.states[dest];
            prev.iter().copied().find(|&p| {
                let q = &self.states[p];
                p != dest && (q.window != d.window || q.level == d.level)
            })
        });
        self.outcomes.entry(okey).or_default().insert(dest);
        let key = (action, source, target.clone(), dest, data.clone());
        let id = match self.transition_index.get(&key) {
            Some(&id) => id,
            None => {
                let id = self.transitions.len();
                self.transitions.push(AbstractTransition {
                    id,
                    action,
                    source,
                    target,
                    dest,
                    data,
                    input,
                    coverage: Coverage::new(),
                    multiplicity: 0,
                });
                self.transition_index.insert(key, id);
                id
            }
        };
        let t = &mut self.transitions[id];
        t.multiplicity += 1;
        merge_coverage(&mut t.coverage, coverage);
        (id, conflict)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GuiTreeTransition {
    pub action: Action,
    pub source: String,
    pub dest: String,
    pub coverage: Coverage,
    pub activity: String,
    pub abstract_transition: AbstractTransitionId,
    pub input: InputId,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Gstg {
    pub trees: BTreeMap<String, GuiTree>,
    pub transitions: Vec<GuiTreeTransition>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StepRecord {
    pub gui_transition: usize,
    pub abstract_transition: AbstractTransitionId,
    pub source: StateId,
    pub dest: StateId,
    pub input: InputId,
    /// Window whose abstraction produced a contradicting outcome.
    pub nondeterministic: Option<String>,
    pub new_window_transition: Option<TransitionId>,
    pub hidden_handlers_hit: Vec<MethodId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Node {
    State(StateId),
    Window(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Edge {
    Abstract(AbstractTransitionId),
    Window(TransitionId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathStep {
    pub from: Node,
    pub edge: Edge,
    pub to: Node,
    /// The widget of this window transition was not in the planned state.
    pub needs_reveal: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ActionPath {
    pub steps: Vec<PathStep>,
}

impl ActionPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn window_edges(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s.edge, Edge::Window(_)))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Goal {
    Window(String),
    State(StateId),
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AppModel {
    pub ewtg: Ewtg,
    pub dstg: Dstg,
    pub gstg: Gstg,
    pub levels: AbstractionLevelMap,
}

impl AppModel {
    pub fn new(ewtg: Ewtg) -> Self {
        AppModel {
            ewtg,
            ..Default::default()
        }
    }

    pub fn window_of(&self, s: StateId) -> &str {
        &self.dstg.states[s].window
    }

    /// Interns the abstraction of `tree` under the current level of `window`.
    pub fn state_of(&mut self, tree: &GuiTree, window: &str) -> StateId {
        let s = derive_abstract_state(tree, window, &self.levels);
        self.dstg.intern(s)
    }

    /// Makes sure an activity seen at runtime has a window node.
    pub fn ensure_activity(&mut self, name: &str) {
        if !self.ewtg.windows.contains_key(name) {
            self.ewtg.windows.insert(
                name.to_string(),
                Window {
                    id: name.to_string(),
                    kind: WindowKind::Activity,
                    class: None,
                    widgets: Vec::new(),
                    triggered_dialogs: BTreeSet::new(),
                    hidden_handlers: BTreeMap::new(),
                    discovered: true,
                },
            );
        }
    }

    /// Adds a pop-up window for a tree that matched no known pop-up.
    pub fn register_popup_window(&mut self, tree: &GuiTree, owner: &str) -> String {
        let n = self
            .ewtg
            .windows
            .values()
            .filter(|w| w.discovered && w.kind.is_popup())
            .count();
        let id = format!("{owner}#popup{n}");
        let mut seen = BTreeSet::new();
        let widgets = tree
            .widgets()
            .into_iter()
            .filter(|w| seen.insert(w.resource_id.clone()))
            .map(|w| DeclaredWidget {
                uid: w.uid.clone(),
                resource_id: w.resource_id.clone(),
                class: w.class_name.clone(),
            })
            .collect();
        self.ewtg.windows.insert(
            id.clone(),
            Window {
                id: id.clone(),
                kind: WindowKind::Dialog,
                class: None,
                widgets,
                triggered_dialogs: BTreeSet::new(),
                hidden_handlers: BTreeMap::new(),
                discovered: true,
            },
        );
        if let Some(o) = self.ewtg.windows.get_mut(owner) {
            o.triggered_dialogs.insert(id.clone());
        }
        id
    }

    /// Records an executed action and everything learned from it.
    pub fn record_step(
        &mut self,
        action: &Action,
        src: (&GuiTree, &str),
        dst: (&GuiTree, &str),
        coverage: &Coverage,
    ) -> StepRecord {
        let (src_tree, src_window) = src;
        let (dst_tree, dst_window) = dst;
        let source = self.state_of(src_tree, src_window);
        let dest = self.state_of(dst_tree, dst_window);
        let level = self.levels.get(src_window);
        let widget = action.widget.as_ref().and_then(|u| src_tree.find(u));
        let target = widget.map(|w| reduce_widget(w, level).key);
        let rid = widget.map(|w| w.resource_id.clone());

        // Hidden handlers executed by this action, across all windows.
        let mut hits: Vec<(String, MethodId)> = Vec::new();
        for w in self.ewtg.windows.values() {
            for m in w.hidden_handlers.keys() {
                if coverage.get(m).is_some_and(|c| !c.is_empty()) {
                    hits.push((w.id.clone(), m.clone()));
                }
            }
        }
        let mut hidden_targets = BTreeSet::new();
        for (w, m) in &hits {
            let h = self.ewtg.windows.get_mut(w).unwrap().hidden_handlers.get_mut(m).unwrap();
            h.matched = true;
            hidden_targets.extend(h.reachable.iter().cloned());
        }

        let input = match self.ewtg.find_input(src_window, action.kind, rid.as_deref()) {
            Some(i) => i,
            None => self.ewtg.add_input(Input {
                id: 0,
                window: src_window.to_string(),
                kind: if action.kind == ActionKind::Intent {
                    InputKind::Intent
                } else {
                    InputKind::InputEvent
                },
                event: action.kind,
                widget: rid,
                handlers: BTreeSet::new(),
                target_methods: BTreeSet::new(),
                data: action.data.iter().cloned().collect(),
                discovered: true,
            }),
        };
        if !hits.is_empty() {
            let inp = &mut self.ewtg.inputs[input];
            inp.handlers.extend(hits.iter().map(|(_, m)| m.clone()));
            inp.target_methods.extend(hidden_targets);
        }
        let new_window_transition = self.ewtg.add_transition(src_window, dst_window, input);

        let data = match action.kind {
            ActionKind::Swipe | ActionKind::Intent => action.data.clone(),
            _ => None,
        };
        let (tid, conflict) =
            self.dstg
                .add_transition(action.kind, source, target, dest, data, input, coverage);

        let src_hash = src_tree.hash();
        let dst_hash = dst_tree.hash();
        self.gstg.trees.entry(src_hash.clone()).or_insert_with(|| src_tree.clone());
        self.gstg.trees.entry(dst_hash.clone()).or_insert_with(|| dst_tree.clone());
        self.gstg.transitions.push(GuiTreeTransition {
            action: action.clone(),
            source: src_hash,
            dest: dst_hash,
            coverage: coverage.clone(),
            activity: dst_tree.activity.clone(),
            abstract_transition: tid,
            input,
        });

        StepRecord {
            gui_transition: self.gstg.transitions.len() - 1,
            abstract_transition: tid,
            source,
            dest,
            input,
            nondeterministic: conflict.map(|_| src_window.to_string()),
            new_window_transition,
            hidden_handlers_hit: hits.into_iter().map(|(_, m)| m).collect(),
        }
    }

    fn node_window<'a>(&'a self, n: &'a Node) -> &'a str {
        match n {
            Node::State(s) => self.window_of(*s),
            Node::Window(w) => w,
        }
    }

    fn edges_from(&self, n: &Node, relaxed: bool, avoid: &BTreeSet<Edge>) -> Vec<(Edge, Node, bool)> {
        let mut out = Vec::new();
        match n {
            Node::State(s) => {
                let state = self.dstg.state(*s);
                let mut used_inputs = BTreeSet::new();
                for t in self.dstg.outgoing(*s) {
                    used_inputs.insert(t.input);
                    let e = Edge::Abstract(t.id);
                    if !avoid.contains(&e) {
                        out.push((e, Node::State(t.dest), false));
                    }
                }
                for t in self.ewtg.transitions_from(&state.window) {
                    let e = Edge::Window(t.id);
                    if used_inputs.contains(&t.input) || avoid.contains(&e) {
                        continue;
                    }
                    let present = self.ewtg.inputs[t.input]
                        .widget
                        .as_deref()
                        .is_none_or(|rid| state.has_resource(rid));
                    if present || relaxed {
                        out.push((e, Node::Window(t.dest.clone()), !present));
                    }
                }
            }
            Node::Window(w) => {
                for t in self.ewtg.transitions_from(w) {
                    let e = Edge::Window(t.id);
                    if !avoid.contains(&e) {
                        out.push((e, Node::Window(t.dest.clone()), false));
                    }
                }
            }
        }
        out
    }

    fn is_goal(&self, n: &Node, goal: &Goal) -> bool {
        match goal {
            Goal::Window(w) => self.node_window(n) == w,
            Goal::State(s) => *n == Node::State(*s),
        }
    }

    /// Shortest action path from `current` to `goal`. Among equally short paths
    /// the one using fewer window transitions wins, then the smaller sequence of
    /// node ids.
    pub fn find_path(&self, current: StateId, goal: &Goal) -> Option<ActionPath> {
        self.find_path_avoiding(current, goal, &BTreeSet::new())
    }

    /// Like `find_path`, skipping `avoid`. Falls back to window transitions whose
    /// widget is not visible in the planned state when no strict path exists.
    pub fn find_path_avoiding(
        &self,
        current: StateId,
        goal: &Goal,
        avoid: &BTreeSet<Edge>,
    ) -> Option<ActionPath> {
        self.search(current, goal, false, avoid)
            .or_else(|| self.search(current, goal, true, avoid))
    }

    pub fn find_strict_path(&self, current: StateId, goal: &Goal) -> Option<ActionPath> {
        self.search(current, goal, false, &BTreeSet::new())
    }

    fn search(
        &self,
        current: StateId,
        goal: &Goal,
        relaxed: bool,
        avoid: &BTreeSet<Edge>,
    ) -> Option<ActionPath> {
        let start = Node::State(current);
        if self.is_goal(&start, goal) {
            return Some(ActionPath::default());
        }
        type Cost = (usize, usize, Vec<Node>);
        let mut best: BTreeMap<Node, (Cost, Vec<PathStep>)> = BTreeMap::new();
        let mut heap: BinaryHeap<Reverse<(Cost, Node)>> = BinaryHeap::new();
        let c0: Cost = (0, 0, vec![start.clone()]);
        best.insert(start.clone(), (c0.clone(), Vec::new()));
        heap.push(Reverse((c0, start)));
        let mut done = BTreeSet::new();
        while let Some(Reverse((cost, node))) = heap.pop() {
            if !done.insert(node.clone()) {
                continue;
            }
            let steps = best[&node].1.clone();
            if self.is_goal(&node, goal) {
                return Some(ActionPath { steps });
            }
            for (edge, next, reveal) in self.edges_from(&node, relaxed, avoid) {
                if done.contains(&next) {
                    continue;
                }
                let mut seq = cost.2.clone();
                seq.push(next.clone());
                let nc: Cost = (
                    cost.0 + 1,
                    cost.1 + usize::from(matches!(edge, Edge::Window(_))),
                    seq,
                );
                if best.get(&next).is_some_and(|(c, _)| *c <= nc) {
                    continue;
                }
                let mut ns = steps.clone();
                ns.push(PathStep {
                    from: node.clone(),
                    edge,
                    to: next.clone(),
                    needs_reveal: reveal,
                });
                best.insert(next.clone(), (nc.clone(), ns));
                heap.push(Reverse((nc, next)));
            }
        }
        None
    }

    /// Number of abstract transitions, and those covering `m`.
    pub fn abstract_action_counts(&self, m: &MethodId) -> (usize, usize) {
        let aa = self.dstg.transitions.len();
        let aam = self
            .dstg
            .transitions
            .iter()
            .filter(|t| t.coverage.get(m).is_some_and(|c| !c.is_empty()))
            .count();
        (aa, aam)
    }
}
