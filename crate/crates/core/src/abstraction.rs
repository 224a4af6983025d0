//! Per-window state abstraction: reducers, refinement levels L1–L5, and the
//! mapping from concrete GUI trees to abstract states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gui::{ConcreteWidget, GuiTree};

/// Widget properties extracted by reducers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attribute {
    ResourceId,
    ClassName,
    ContentDesc,
    Password,
    Clickable,
    LongClickable,
    Scrollable,
    Checked,
    Enabled,
    Selected,
    InputField,
    Text,
    HasChildren,
}

/// Reducers applied to the interactive widget itself at L1.
const BASE: [Attribute; 11] = [
    Attribute::ResourceId,
    Attribute::ClassName,
    Attribute::ContentDesc,
    Attribute::Checked,
    Attribute::Enabled,
    Attribute::Password,
    Attribute::Scrollable,
    Attribute::InputField,
    Attribute::Clickable,
    Attribute::LongClickable,
    Attribute::Selected,
];

fn reduce(w: &ConcreteWidget, a: Attribute) -> String {
    let b = |v: bool| v.to_string();
    match a {
        Attribute::ResourceId => w.resource_id.clone(),
        Attribute::ClassName => w.class_name.clone(),
        Attribute::ContentDesc => w.content_desc.clone(),
        Attribute::Password => b(w.password),
        Attribute::Clickable => b(w.clickable),
        Attribute::LongClickable => b(w.long_clickable),
        Attribute::Scrollable => b(w.scrollable),
        Attribute::Checked => b(w.checked),
        Attribute::Enabled => b(w.enabled),
        Attribute::Selected => b(w.selected),
        Attribute::InputField => b(w.is_input_field),
        Attribute::Text => w.text.clone(),
        Attribute::HasChildren => b(!w.children.is_empty()),
    }
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Level {
    #[default]
    L1,
    L2,
    L3,
    L4,
    L5,
}

impl Level {
    pub const ALL: [Level; 5] = [Level::L1, Level::L2, Level::L3, Level::L4, Level::L5];

    pub fn next(self) -> Option<Level> {
        match self {
            Level::L1 => Some(Level::L2),
            Level::L2 => Some(Level::L3),
            Level::L3 => Some(Level::L4),
            Level::L4 => Some(Level::L5),
            Level::L5 => None,
        }
    }

    fn widget_reducers(self) -> Vec<Attribute> {
        let mut v = BASE.to_vec();
        if self >= Level::L2 {
            v.push(Attribute::Text);
        }
        if self == Level::L3 {
            v.push(Attribute::HasChildren);
        }
        v
    }

    fn child_reducers(self) -> Option<Vec<Attribute>> {
        match self {
            Level::L4 => Some(BASE.to_vec()),
            Level::L5 => {
                let mut v = BASE.to_vec();
                v.push(Attribute::Text);
                Some(v)
            }
            _ => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub type Valuation = BTreeMap<Attribute, String>;

/// Attribute valuation of one widget, plus its children's valuations at L4/L5.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AvmKey {
    pub attrs: Valuation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Valuation>,
}

impl AvmKey {
    pub fn resource_id(&self) -> Option<&str> {
        self.attrs.get(&Attribute::ResourceId).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cardinality {
    One,
    Many,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeValuationMap {
    pub key: AvmKey,
    pub cardinality: Cardinality,
}

pub fn reduce_widget(w: &ConcreteWidget, level: Level) -> AttributeValuationMap {
    let attrs = level
        .widget_reducers()
        .into_iter()
        .map(|a| (a, reduce(w, a)))
        .collect();
    let children = match level.child_reducers() {
        Some(rs) => w
            .children
            .iter()
            .map(|c| rs.iter().map(|&a| (a, reduce(c, a))).collect())
            .collect(),
        None => Vec::new(),
    };
    AttributeValuationMap {
        key: AvmKey { attrs, children },
        cardinality: Cardinality::One,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AbstractState {
    pub window: String,
    pub level: Level,
    pub avms: BTreeSet<AttributeValuationMap>,
}

impl AbstractState {
    pub fn has_resource(&self, rid: &str) -> bool {
        self.avms.iter().any(|a| a.key.resource_id() == Some(rid))
    }
}

/// Abstracts the interactive widgets of `tree` at the level of `window`.
pub fn derive_abstract_state(
    tree: &GuiTree,
    window: &str,
    levels: &AbstractionLevelMap,
) -> AbstractState {
    let level = levels.get(window);
    derive_at_level(tree, window, level)
}

pub fn derive_at_level(tree: &GuiTree, window: &str, level: Level) -> AbstractState {
    let mut counts: BTreeMap<AvmKey, usize> = BTreeMap::new();
    for w in tree.interactive() {
        *counts.entry(reduce_widget(w, level).key).or_default() += 1;
    }
    let avms = counts
        .into_iter()
        .map(|(key, n)| AttributeValuationMap {
            key,
            cardinality: if n > 1 { Cardinality::Many } else { Cardinality::One },
        })
        .collect();
    AbstractState {
        window: window.to_string(),
        level,
        avms,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineOutcome {
    Refined(Level),
    /// Already at L5: the non-determinism is tolerated.
    Residual,
}

/// Refinement level per window; absent windows are at L1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionLevelMap {
    levels: BTreeMap<String, Level>,
}

impl AbstractionLevelMap {
    pub fn get(&self, window: &str) -> Level {
        self.levels.get(window).copied().unwrap_or_default()
    }

    pub fn refine(&mut self, window: &str) -> RefineOutcome {
        match self.get(window).next() {
            Some(l) => {
                self.levels.insert(window.to_string(), l);
                RefineOutcome::Refined(l)
            }
            None => RefineOutcome::Residual,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Level)> {
        self.levels.iter()
    }
}
