//! User-like input values: text strategies, manual inputs, check states.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IteratorRandom;
use rand::Rng;
use serde::Serialize;

use crate::cli_io::ManualInputSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TextStrategy {
    Empty,
    ReuseAny,
    ReuseSameWidget,
    StaticLiteral,
    RandomAlphabetic,
    RandomSymbol,
}

impl TextStrategy {
    pub const ALL: [TextStrategy; 6] = [
        TextStrategy::Empty,
        TextStrategy::ReuseAny,
        TextStrategy::ReuseSameWidget,
        TextStrategy::StaticLiteral,
        TextStrategy::RandomAlphabetic,
        TextStrategy::RandomSymbol,
    ];
}

const SYMBOLS: &[u8] = b"!@#$%^&*()-_=+[]{};:,.<>/?~";

/// Strings typed so far, globally and per (window, resource id).
#[derive(Debug, Clone, Default)]
pub struct TextMemory {
    all: BTreeSet<String>,
    per_widget: BTreeMap<(String, String), BTreeSet<String>>,
}

impl TextMemory {
    pub fn remember(&mut self, window: &str, resource_id: &str, text: &str) {
        self.all.insert(text.to_string());
        self.per_widget
            .entry((window.to_string(), resource_id.to_string()))
            .or_default()
            .insert(text.to_string());
    }
}

pub fn random_alphabetic<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(3..=8);
    (0..n).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

/// Text for `strategy`; reuse and literal strategies fall back to a random
/// alphabetic string when they have nothing to offer.
pub fn text_for<R: Rng>(
    rng: &mut R,
    strategy: TextStrategy,
    memory: &TextMemory,
    literals: &BTreeSet<String>,
    window: &str,
    resource_id: &str,
) -> String {
    let pick = |rng: &mut R, set: Option<&BTreeSet<String>>| set.and_then(|s| s.iter().choose(rng).cloned());
    let chosen = match strategy {
        TextStrategy::Empty => Some(String::new()),
        TextStrategy::ReuseAny => pick(rng, Some(&memory.all)),
        TextStrategy::ReuseSameWidget => pick(
            rng,
            memory.per_widget.get(&(window.to_string(), resource_id.to_string())),
        ),
        TextStrategy::StaticLiteral => pick(rng, Some(literals)),
        TextStrategy::RandomAlphabetic => None,
        TextStrategy::RandomSymbol => Some((SYMBOLS[rng.gen_range(0..SYMBOLS.len())] as char).to_string()),
    };
    chosen.unwrap_or_else(|| random_alphabetic(rng))
}

/// Picks a text value: a manual instance when one applies, else one of the
/// six strategies chosen uniformly. `instance` pins the instance per pattern.
pub fn generate_text<R: Rng>(
    rng: &mut R,
    memory: &TextMemory,
    literals: &BTreeSet<String>,
    manual: &ManualInputSpec,
    instance: &mut BTreeMap<String, usize>,
    window: &str,
    resource_id: &str,
) -> String {
    for (name, p) in &manual.patterns {
        if !p.applies_to(window) || p.instances.is_empty() {
            continue;
        }
        let Some(field) = p.field_for(resource_id) else {
            continue;
        };
        let idx = *instance
            .entry(name.clone())
            .or_insert_with(|| rng.gen_range(0..p.instances.len()));
        if let Some(v) = p.instances[idx].get(field) {
            return v.clone();
        }
    }
    let strategy = TextStrategy::ALL[rng.gen_range(0..TextStrategy::ALL.len())];
    text_for(rng, strategy, memory, literals, window, resource_id)
}
