//! Uniform random testing: every step picks one (widget, event) pair of the
//! current screen, or presses back.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::inputs::{text_for, TextStrategy};
use super::{count_action, Engine, MAX_FREE_STREAK};
use crate::scenario::{Action, ActionKind, SwipeDir};

impl Engine<'_> {
    pub(crate) fn run_random(&mut self) {
        self.phase = None;
        while !self.done() {
            let mut actions: Vec<Action> = Vec::new();
            for w in self.tree.interactive() {
                if w.is_input_field {
                    actions.push(Action::on(ActionKind::TextInput, &w.uid));
                    continue;
                }
                if w.clickable || w.checkable {
                    actions.push(Action::on(ActionKind::Click, &w.uid));
                }
                if w.long_clickable {
                    actions.push(Action::on(ActionKind::LongClick, &w.uid));
                }
                if w.scrollable {
                    actions.push(Action::on(ActionKind::Swipe, &w.uid));
                }
            }
            actions.push(Action::window(ActionKind::PressBack));
            let mut window_inputs = BTreeMap::new();
            for i in self.model.ewtg.inputs_of(&self.window) {
                if i.widget.is_none() && i.event != ActionKind::PressBack {
                    window_inputs.entry(i.event).or_insert_with(|| i.data.clone());
                }
            }
            for (event, data) in &window_inputs {
                let mut a = Action::window(*event);
                a.data = data.choose(&mut self.rng).cloned();
                actions.push(a);
            }
            if self.free_streak + 1 >= MAX_FREE_STREAK {
                actions.retain(|a| count_action(a, &self.tree));
            }
            let mut action = actions[self.rng.gen_range(0..actions.len())].clone();
            match action.kind {
                ActionKind::TextInput => {
                    let rid = self
                        .tree
                        .find(action.widget.as_deref().unwrap_or_default())
                        .map(|w| w.resource_id.clone())
                        .unwrap_or_default();
                    let s = TextStrategy::ALL[self.rng.gen_range(0..TextStrategy::ALL.len())];
                    let t = text_for(
                        &mut self.rng,
                        s,
                        &self.texts,
                        &self.model.ewtg.literal_pool,
                        &self.window,
                        &rid,
                    );
                    action.data = Some(t);
                }
                ActionKind::Swipe => {
                    action.data = Some(format!("{:?}", SwipeDir::ALL[self.rng.gen_range(0..4)]));
                }
                _ => {}
            }
            if self.act(&action).is_none() {
                break;
            }
        }
    }
}
