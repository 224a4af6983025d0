//! Window and abstract-state priorities used to pick targets.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::app_model::{AppModel, StateId};
use crate::code::MethodId;
use crate::scenario::InputKind;
use crate::simulator::Coverage;

/// Instruction coverage of the updated methods.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TargetProgress {
    pub totals: BTreeMap<MethodId, usize>,
    pub covered: Coverage,
}

impl TargetProgress {
    pub fn new(totals: BTreeMap<MethodId, usize>) -> Self {
        TargetProgress {
            totals,
            covered: Coverage::new(),
        }
    }

    /// Adds the target instructions of `cov`; returns how many were new.
    pub fn absorb(&mut self, cov: &Coverage) -> usize {
        let mut new = 0;
        for (m, instrs) in cov {
            let Some(&total) = self.totals.get(m) else {
                continue;
            };
            let set = self.covered.entry(m.clone()).or_default();
            for &i in instrs {
                if i < total && set.insert(i) {
                    new += 1;
                }
            }
        }
        new
    }

    pub fn uncovered(&self, m: &MethodId) -> usize {
        let total = self.totals.get(m).copied().unwrap_or(0);
        total - self.covered.get(m).map_or(0, BTreeSet::len)
    }

    pub fn covered_instructions(&self) -> usize {
        self.covered.values().map(BTreeSet::len).sum()
    }

    pub fn total_instructions(&self) -> usize {
        self.totals.values().sum()
    }

    /// Methods with at least one covered instruction.
    pub fn covered_methods(&self) -> usize {
        self.totals
            .keys()
            .filter(|m| self.covered.get(*m).is_some_and(|c| !c.is_empty()))
            .count()
    }

    pub fn all_covered(&self) -> bool {
        self.totals.keys().all(|m| self.uncovered(m) == 0)
    }
}

/// Complement of the share of abstract transitions covering a method; 1 when
/// the model has no transitions yet.
pub fn cm_weight(aa: usize, aa_m: usize) -> f64 {
    if aa == 0 {
        1.0
    } else {
        1.0 - aa_m as f64 / aa as f64
    }
}

pub fn weighted_uncovered(model: &AppModel, progress: &TargetProgress, methods: &BTreeSet<MethodId>) -> f64 {
    methods
        .iter()
        .map(|m| {
            let (aa, aam) = model.abstract_action_counts(m);
            cm_weight(aa, aam) * progress.uncovered(m) as f64
        })
        .sum()
}

/// Target methods of the window's inputs plus those reachable from its hidden handlers.
pub fn window_targets(model: &AppModel, window: &str) -> BTreeSet<MethodId> {
    let mut mt: BTreeSet<MethodId> = model
        .ewtg
        .inputs_of(window)
        .flat_map(|i| i.target_methods.iter().cloned())
        .collect();
    if let Some(w) = model.ewtg.window(window) {
        for h in w.hidden_handlers.values() {
            mt.extend(h.reachable.iter().cloned());
        }
    }
    mt
}

/// Target methods reachable through intents or inputs on widgets present in the state.
pub fn state_targets(model: &AppModel, state: StateId) -> BTreeSet<MethodId> {
    let s = model.dstg.state(state);
    model
        .ewtg
        .inputs_of(&s.window)
        .filter(|i| {
            i.kind == InputKind::Intent || i.widget.as_deref().is_some_and(|r| s.has_resource(r))
        })
        .flat_map(|i| i.target_methods.iter().cloned())
        .collect()
}

pub fn ws_score(model: &AppModel, progress: &TargetProgress, window: &str) -> f64 {
    weighted_uncovered(model, progress, &window_targets(model, window))
}

pub fn as_score(model: &AppModel, progress: &TargetProgress, state: StateId) -> f64 {
    weighted_uncovered(model, progress, &state_targets(model, state))
}
