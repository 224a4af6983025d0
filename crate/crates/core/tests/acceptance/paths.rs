use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uptest::abstraction::{AbstractState, Attribute, AttributeValuationMap, AvmKey, Cardinality, Level};
use uptest::app_model::{ActionPath, AppModel, Edge, Goal, Node};
use uptest::scenario::{ActionKind, InputKind, WindowKind};
use uptest::simulator::Coverage;
use uptest::static_model::{Ewtg, Input, Window};

use super::Outcome;

const MAX_NODES: usize = 8;

fn key(rid: &str) -> AvmKey {
    AvmKey { attrs: [(Attribute::ResourceId, rid.to_string())].into(), children: Vec::new() }
}

fn window(id: &str) -> Window {
    Window {
        id: id.into(),
        kind: WindowKind::Activity,
        class: None,
        widgets: Vec::new(),
        triggered_dialogs: BTreeSet::new(),
        hidden_handlers: BTreeMap::new(),
        discovered: false,
    }
}

fn input(w: &str, rid: Option<String>) -> Input {
    Input {
        id: 0,
        window: w.into(),
        kind: InputKind::InputEvent,
        event: ActionKind::Click,
        widget: rid,
        handlers: BTreeSet::new(),
        target_methods: BTreeSet::new(),
        data: Vec::new(),
        discovered: false,
    }
}

/// A generated model and the same facts in plain form for the oracle.
struct Case {
    model: AppModel,
    windows: Vec<String>,
    /// Window and resource ids of each state.
    states: Vec<(String, BTreeSet<String>)>,
    /// (id, source state, dest state, input)
    abstract_edges: Vec<(usize, usize, usize, usize)>,
    /// (id, source window, dest window, input, widget)
    window_edges: Vec<(usize, String, String, usize, Option<String>)>,
}

fn generate(rng: &mut ChaCha8Rng) -> Case {
    let nw = rng.gen_range(1..=4);
    let ns = rng.gen_range(1..=MAX_NODES - nw);
    let windows: Vec<String> = (0..nw).map(|i| format!("W{i}")).collect();
    let rids = ["r0", "r1", "r2"];
    let mut ewtg = Ewtg::default();
    for w in &windows {
        ewtg.windows.insert(w.clone(), window(w));
    }
    let mut window_edges = Vec::new();
    for _ in 0..rng.gen_range(0..=6) {
        let s = windows[rng.gen_range(0..nw)].clone();
        let d = windows[rng.gen_range(0..nw)].clone();
        let rid = rng.gen_bool(0.7).then(|| rids[rng.gen_range(0..rids.len())].to_string());
        let i = ewtg.add_input(input(&s, rid.clone()));
        if let Some(t) = ewtg.add_transition(&s, &d, i) {
            window_edges.push((t, s, d, i, rid));
        }
    }
    let mut model = AppModel::new(ewtg);
    let mut states = Vec::new();
    for j in 0..ns {
        let w = windows[rng.gen_range(0..nw)].clone();
        let mut present: BTreeSet<String> = rids.iter().filter(|_| rng.gen_bool(0.5)).map(|r| r.to_string()).collect();
        // Unique marker so interning never merges two generated states.
        let mut avms: BTreeSet<AttributeValuationMap> = present
            .iter()
            .map(|r| AttributeValuationMap { key: key(r), cardinality: Cardinality::One })
            .collect();
        let marker = format!("s{j}");
        avms.insert(AttributeValuationMap { key: key(&marker), cardinality: Cardinality::One });
        present.insert(marker);
        let id = model.dstg.intern(AbstractState { window: w.clone(), level: Level::L1, avms });
        assert_eq!(id, j);
        states.push((w, present));
    }
    let mut abstract_edges = Vec::new();
    for k in 0..rng.gen_range(0..=8) {
        let s = rng.gen_range(0..ns);
        let d = rng.gen_range(0..ns);
        let w = states[s].0.clone();
        let same_window: Vec<usize> = model.ewtg.inputs_of(&w).map(|i| i.id).collect();
        let inp = if !same_window.is_empty() && rng.gen_bool(0.6) {
            same_window[rng.gen_range(0..same_window.len())]
        } else {
            model.ewtg.add_input(input(&w, Some(format!("x{k}"))))
        };
        let (id, _) = model.dstg.add_transition(
            ActionKind::Click,
            s,
            Some(key(&format!("x{k}"))),
            d,
            None,
            inp,
            &Coverage::new(),
        );
        abstract_edges.push((id, s, d, inp));
    }
    Case { model, windows, states, abstract_edges, window_edges }
}

impl Case {
    fn node_window<'a>(&'a self, n: &'a Node) -> &'a str {
        match n {
            Node::State(s) => &self.states[*s].0,
            Node::Window(w) => w,
        }
    }

    fn is_goal(&self, n: &Node, g: &Goal) -> bool {
        match g {
            Goal::Window(w) => self.node_window(n) == w,
            Goal::State(s) => *n == Node::State(*s),
        }
    }

    /// Outgoing edges; a state hides window edges whose input it already
    /// observed, and strict mode also hides those whose widget is absent.
    fn edges(&self, n: &Node, relaxed: bool, avoid: &BTreeSet<Edge>) -> Vec<(Edge, Node)> {
        let mut out = Vec::new();
        match n {
            Node::State(s) => {
                let mut used = BTreeSet::new();
                for &(id, src, dst, inp) in &self.abstract_edges {
                    if src == *s {
                        used.insert(inp);
                        out.push((Edge::Abstract(id), Node::State(dst)));
                    }
                }
                let (w, present) = &self.states[*s];
                for (id, src, dst, inp, rid) in &self.window_edges {
                    if src != w || used.contains(inp) {
                        continue;
                    }
                    let shown = rid.as_ref().is_none_or(|r| present.contains(r));
                    if shown || relaxed {
                        out.push((Edge::Window(*id), Node::Window(dst.clone())));
                    }
                }
            }
            Node::Window(w) => {
                for (id, src, dst, _, _) in &self.window_edges {
                    if src == w {
                        out.push((Edge::Window(*id), Node::Window(dst.clone())));
                    }
                }
            }
        }
        out.retain(|(e, _)| !avoid.contains(e));
        out
    }

    /// Minimum (length, window edges) over all simple paths to the goal.
    fn brute(&self, start: usize, g: &Goal, relaxed: bool, avoid: &BTreeSet<Edge>) -> Option<(usize, usize)> {
        #[allow(clippy::too_many_arguments)]
        fn dfs(
            c: &Case,
            n: &Node,
            g: &Goal,
            relaxed: bool,
            avoid: &BTreeSet<Edge>,
            seen: &mut Vec<Node>,
            cost: (usize, usize),
            best: &mut Option<(usize, usize)>,
        ) {
            if c.is_goal(n, g) {
                if best.is_none_or(|b| cost < b) {
                    *best = Some(cost);
                }
                return;
            }
            for (e, next) in c.edges(n, relaxed, avoid) {
                if seen.contains(&next) {
                    continue;
                }
                seen.push(next.clone());
                let w = usize::from(matches!(e, Edge::Window(_)));
                dfs(c, &next, g, relaxed, avoid, seen, (cost.0 + 1, cost.1 + w), best);
                seen.pop();
            }
        }
        let start = Node::State(start);
        let mut best = None;
        dfs(self, &start, g, relaxed, avoid, &mut vec![start.clone()], (0, 0), &mut best);
        best
    }

    fn valid(&self, start: usize, g: &Goal, p: &ActionPath, relaxed: bool, avoid: &BTreeSet<Edge>) -> bool {
        let mut at = Node::State(start);
        for s in &p.steps {
            if s.from != at || !self.edges(&at, relaxed, avoid).contains(&(s.edge, s.to.clone())) {
                return false;
            }
            at = s.to.clone();
        }
        self.is_goal(&at, g)
    }
}

pub fn criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut checked, mut ties, mut relaxed_used) = (0, 0, 0);
    for case in 0..3000 {
        let c = generate(&mut rng);
        let nodes = c.states.len() + c.windows.len();
        if nodes > MAX_NODES {
            return Err(format!("case {case}: generator produced {nodes} nodes"));
        }
        for start in 0..c.states.len() {
            let mut goals: Vec<Goal> = c.windows.iter().map(|w| Goal::Window(w.clone())).collect();
            goals.extend((0..c.states.len()).map(Goal::State));
            for g in goals {
                let avoid: BTreeSet<Edge> = if rng.gen_bool(0.3) {
                    c.edges(&Node::State(start), true, &BTreeSet::new())
                        .into_iter()
                        .map(|(e, _)| e)
                        .filter(|_| rng.gen_bool(0.5))
                        .collect()
                } else {
                    BTreeSet::new()
                };
                let strict = c.brute(start, &g, false, &avoid);
                let want = strict.or_else(|| c.brute(start, &g, true, &avoid));
                let got = c.model.find_path_avoiding(start, &g, &avoid);
                match (&got, want) {
                    (None, None) => {}
                    (Some(p), Some((len, wedges))) => {
                        if p.len() != len || p.window_edges() != wedges {
                            return Err(format!(
                                "case {case}: {g:?} from {start}: got ({}, {}), oracle ({len}, {wedges})",
                                p.len(),
                                p.window_edges()
                            ));
                        }
                        if !c.valid(start, &g, p, strict.is_none(), &avoid) {
                            return Err(format!("case {case}: {g:?} from {start}: path is not a walk to the goal"));
                        }
                        if strict.is_none() {
                            relaxed_used += 1;
                        }
                        // A shortest path with more window edges exists: the tie rule decided.
                        let mut alt = avoid.clone();
                        alt.extend(p.steps.iter().map(|s| s.edge));
                        if strict.is_some() {
                            if let Some((l2, w2)) = c.brute(start, &g, false, &alt) {
                                if l2 == len && w2 > wedges {
                                    ties += 1;
                                }
                            }
                        }
                    }
                    _ => {
                        return Err(format!("case {case}: {g:?} from {start}: got {got:?}, oracle {want:?}"));
                    }
                }
                checked += 1;
            }
        }
    }
    if ties == 0 {
        return Err("no generated query exercised the tie rule".into());
    }
    Ok(format!("{checked} queries on 3000 models, {ties} tie-rule cases, {relaxed_used} via hidden widgets"))
}
