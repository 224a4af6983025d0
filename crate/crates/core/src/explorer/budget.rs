//! Action budgets per phase and the rule deciding which actions are charged.

use serde::Serialize;

use crate::gui::GuiTree;
use crate::scenario::{Action, ActionKind};

/// Actions judged sufficient to reach and exercise one target.
pub const ACTIONS_THRESHOLD: usize = 25;
/// Random exploration allowance per invocation in Phase 3.
pub const PHASE3_RANDOM_THRESHOLD: usize = 5;
/// Used to convert an hour budget into counted actions.
pub const ACTIONS_PER_HOUR: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Budget {
    Infinite,
    Actions(usize),
}

impl Budget {
    pub fn allows(self, used: usize) -> bool {
        match self {
            Budget::Infinite => true,
            Budget::Actions(n) => used < n,
        }
    }

    pub fn min(self, other: Budget) -> Budget {
        match (self, other) {
            (Budget::Infinite, b) | (b, Budget::Infinite) => b,
            (Budget::Actions(a), Budget::Actions(b)) => Budget::Actions(a.min(b)),
        }
    }
}

/// Budgets of one phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhaseBudgets {
    /// Phase 1: infinite. Phase 2: number of target window visits.
    pub phase: Budget,
    pub reachability: Budget,
    pub target: Budget,
    /// Per random exploration invocation. Phase 1 derives it from the active
    /// window, so it is `Infinite` here and computed on demand.
    pub random: Budget,
}

impl PhaseBudgets {
    pub fn phase1() -> Self {
        PhaseBudgets {
            phase: Budget::Infinite,
            reachability: Budget::Infinite,
            target: Budget::Infinite,
            random: Budget::Infinite,
        }
    }

    /// Reachability and target share one allowance per visit.
    pub fn phase2(scale: usize, target_windows: usize) -> Self {
        let per_visit = Budget::Actions(scale * ACTIONS_THRESHOLD);
        PhaseBudgets {
            phase: Budget::Actions(scale * target_windows),
            reachability: per_visit,
            target: per_visit,
            random: Budget::Actions(scale * ACTIONS_THRESHOLD),
        }
    }

    pub fn phase3(scale: usize) -> Self {
        PhaseBudgets {
            phase: Budget::Infinite,
            reachability: Budget::Infinite,
            target: Budget::Actions(scale * ACTIONS_THRESHOLD),
            random: Budget::Actions(scale * PHASE3_RANDOM_THRESHOLD),
        }
    }
}

/// Distinct actions the window offers: one per click or long-click, four per
/// scrollable widget, one per input field.
pub fn number_of_actions_for_window(tree: &GuiTree) -> usize {
    let n: usize = tree
        .interactive()
        .into_iter()
        .map(|w| {
            usize::from(w.clickable || w.checkable)
                + usize::from(w.long_clickable)
                + 4 * usize::from(w.scrollable)
                + usize::from(w.is_input_field)
        })
        .sum();
    n.max(1)
}

/// TextInput actions and clicks on checkboxes are free.
pub fn count_action(action: &Action, tree: &GuiTree) -> bool {
    match action.kind {
        ActionKind::TextInput => false,
        ActionKind::Click => !action
            .widget
            .as_deref()
            .and_then(|u| tree.find(u))
            .is_some_and(|w| w.is_checkbox()),
        _ => true,
    }
}
