//! Concrete GUI trees as reported by the device after every action.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::scenario::Rect;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteWidget {
    /// Stable handle used to address the widget in actions.
    pub uid: String,
    pub resource_id: String,
    pub class_name: String,
    #[serde(default)]
    pub content_desc: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub password: bool,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub long_clickable: bool,
    #[serde(default)]
    pub scrollable: bool,
    #[serde(default)]
    pub checkable: bool,
    #[serde(default)]
    pub checked: bool,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub selected: bool,
    #[serde(default = "yes")]
    pub visible: bool,
    #[serde(default)]
    pub is_input_field: bool,
    pub bounds: Rect,
    #[serde(default)]
    pub children: Vec<ConcreteWidget>,
}

fn yes() -> bool {
    true
}

impl ConcreteWidget {
    pub fn new(uid: impl Into<String>, class_name: impl Into<String>) -> Self {
        let uid = uid.into();
        ConcreteWidget {
            resource_id: uid.clone(),
            uid,
            class_name: class_name.into(),
            content_desc: String::new(),
            text: String::new(),
            password: false,
            clickable: false,
            long_clickable: false,
            scrollable: false,
            checkable: false,
            checked: false,
            enabled: true,
            selected: false,
            visible: true,
            is_input_field: false,
            bounds: Rect {
                x: 0,
                y: 0,
                w: 0,
                h: 0,
            },
            children: Vec::new(),
        }
    }

    /// True when the class can be the target of some widget action.
    pub fn accepts_action(&self) -> bool {
        self.clickable || self.long_clickable || self.scrollable || self.is_input_field || self.checkable
    }

    pub fn is_interactive(&self) -> bool {
        self.enabled && self.visible && self.accepts_action()
    }

    pub fn is_checkbox(&self) -> bool {
        self.class_name.ends_with("CheckBox")
    }

    pub fn is_radio(&self) -> bool {
        self.class_name.ends_with("RadioButton")
    }

    /// Widget hash from descriptive id, rendered content and state properties.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            self.resource_id.as_str(),
            self.class_name.as_str(),
            self.content_desc.as_str(),
            self.text.as_str(),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        let flags = [
            self.password,
            self.clickable,
            self.long_clickable,
            self.scrollable,
            self.checkable,
            self.checked,
            self.enabled,
            self.selected,
            self.visible,
            self.is_input_field,
        ];
        h.update(flags.map(u8::from));
        for c in &self.children {
            h.update(c.hash().as_bytes());
        }
        hex::encode(h.finalize())[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuiTree {
    /// Name of the running activity, as reported by the OS log.
    pub activity: String,
    /// Bounds of the rendered window.
    pub bounds: Rect,
    pub roots: Vec<ConcreteWidget>,
}

impl GuiTree {
    pub fn new(activity: impl Into<String>, bounds: Rect, roots: Vec<ConcreteWidget>) -> Self {
        GuiTree {
            activity: activity.into(),
            bounds,
            roots,
        }
    }

    /// Depth-first, parents before children.
    pub fn widgets(&self) -> Vec<&ConcreteWidget> {
        fn walk<'a>(ws: &'a [ConcreteWidget], out: &mut Vec<&'a ConcreteWidget>) {
            for w in ws {
                out.push(w);
                walk(&w.children, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.roots, &mut out);
        out
    }

    pub fn interactive(&self) -> Vec<&ConcreteWidget> {
        self.widgets().into_iter().filter(|w| w.is_interactive()).collect()
    }

    pub fn find(&self, uid: &str) -> Option<&ConcreteWidget> {
        self.widgets().into_iter().find(|w| w.uid == uid)
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.activity.as_bytes());
        h.update([0]);
        for v in [self.bounds.x, self.bounds.y, self.bounds.w, self.bounds.h] {
            h.update(v.to_le_bytes());
        }
        for w in &self.roots {
            h.update(w.hash().as_bytes());
        }
        hex::encode(h.finalize())[..16].to_string()
    }
}
