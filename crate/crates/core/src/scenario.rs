//! Scenario files: a simulated app described as a static view (what static
//! analysis can see), guarded dynamic rules (what the app really does), two
//! code versions, and witness action sequences.
//!
//! See `docs/scenario-format.md` in the repository for the field reference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::code::{CodeIndex, CodeModel, MethodId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub screen: Screen,
    pub launcher: String,
    #[serde(rename = "static")]
    pub static_view: StaticView,
    #[serde(default)]
    pub dynamic: Dynamic,
    pub code_v1: CodeModel,
    pub code_v2: CodeModel,
    #[serde(default)]
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    pub width: u32,
    pub height: u32,
}

impl Default for Screen {
    fn default() -> Self {
        Screen {
            width: 1080,
            height: 1920,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn screen(s: Screen) -> Self {
        Rect {
            x: 0,
            y: 0,
            w: s.width,
            h: s.height,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StaticView {
    pub windows: Vec<WindowDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WindowKind {
    Activity,
    Dialog,
    OptionsMenu,
    ContextMenu,
}

impl WindowKind {
    pub fn is_popup(self) -> bool {
        !matches!(self, WindowKind::Activity)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowDecl {
    pub id: String,
    pub kind: WindowKind,
    /// Qualified name of the implementing class.
    #[serde(default)]
    pub class: Option<String>,
    /// False when static analysis cannot see this window at all.
    #[serde(default = "yes")]
    pub statically_visible: bool,
    /// Dialogs and menus this window is statically known to open.
    #[serde(default)]
    pub dialogs: Vec<String>,
    #[serde(default)]
    pub widgets: Vec<WidgetDecl>,
    #[serde(default)]
    pub inputs: Vec<InputDecl>,
    #[serde(default)]
    pub bounds: Option<Rect>,
}

impl WindowDecl {
    /// Depth-first over all declared widgets, children included.
    pub fn all_widgets(&self) -> Vec<&WidgetDecl> {
        fn walk<'a>(ws: &'a [WidgetDecl], out: &mut Vec<&'a WidgetDecl>) {
            for w in ws {
                out.push(w);
                walk(&w.children, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.widgets, &mut out);
        out
    }

    pub fn widget(&self, uid: &str) -> Option<&WidgetDecl> {
        self.all_widgets().into_iter().find(|w| w.id == uid)
    }

    pub fn bounds(&self, screen: Screen) -> Rect {
        if let Some(b) = self.bounds {
            return b;
        }
        if self.kind.is_popup() {
            Rect {
                x: screen.width / 10,
                y: screen.height * 3 / 10,
                w: screen.width * 8 / 10,
                h: screen.height * 4 / 10,
            }
        } else {
            Rect::screen(screen)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WidgetDecl {
    /// Unique within the window.
    pub id: String,
    #[serde(default)]
    pub resource_id: Option<String>,
    #[serde(default = "default_widget_class")]
    pub class: String,
    #[serde(default)]
    pub text: String,
    /// Renders the value of this state variable as the widget text.
    #[serde(default)]
    pub text_var: Option<String>,
    #[serde(default)]
    pub content_desc: String,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub long_clickable: bool,
    #[serde(default)]
    pub scrollable: bool,
    #[serde(default)]
    pub password: bool,
    #[serde(default)]
    pub input: bool,
    #[serde(default)]
    pub checkable: bool,
    #[serde(default)]
    pub selected: bool,
    #[serde(default)]
    pub checked_var: Option<String>,
    /// State variable holding the text of an input field.
    #[serde(default)]
    pub value_var: Option<String>,
    #[serde(default)]
    pub enabled_when: Option<Guard>,
    #[serde(default)]
    pub visible_when: Option<Guard>,
    #[serde(default)]
    pub children: Vec<WidgetDecl>,
}

fn default_widget_class() -> String {
    "android.widget.TextView".to_string()
}

impl WidgetDecl {
    pub fn resource_id(&self) -> &str {
        self.resource_id.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Click,
    LongClick,
    Swipe,
    TextInput,
    PressBack,
    PressMenu,
    Intent,
}

impl ActionKind {
    /// Widget actions need a target widget; window actions do not.
    pub fn is_widget_action(self) -> bool {
        matches!(
            self,
            ActionKind::Click | ActionKind::LongClick | ActionKind::Swipe | ActionKind::TextInput
        )
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SwipeDir {
    Up,
    Down,
    Left,
    Right,
}

impl SwipeDir {
    pub const ALL: [SwipeDir; 4] = [SwipeDir::Up, SwipeDir::Down, SwipeDir::Left, SwipeDir::Right];

    pub fn parse(s: &str) -> Option<Self> {
        SwipeDir::ALL.into_iter().find(|d| format!("{d:?}") == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum InputKind {
    #[default]
    InputEvent,
    Intent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDecl {
    #[serde(default)]
    pub kind: InputKind,
    pub event: ActionKind,
    #[serde(default)]
    pub widget: Option<String>,
    #[serde(default)]
    pub handlers: Vec<MethodId>,
    /// Destination window; the source window when absent.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default = "yes")]
    pub statically_visible: bool,
    /// Engineer-provided payloads for intents.
    #[serde(default)]
    pub data: Vec<String>,
}

/// A concrete action sent to the app.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// Widget uid in the current tree; `None` for window actions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widget: Option<String>,
    /// Text for TextInput/Intent, direction for Swipe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
}

impl Action {
    pub fn on(kind: ActionKind, widget: impl Into<String>) -> Self {
        Action {
            kind,
            widget: Some(widget.into()),
            data: None,
        }
    }

    pub fn window(kind: ActionKind) -> Self {
        Action {
            kind,
            widget: None,
            data: None,
        }
    }

    pub fn with_data(mut self, data: impl Into<String>) -> Self {
        self.data = Some(data.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl Value {
    pub fn truthy(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Str(s) => !s.is_empty(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

/// Predicate over state variables and the current window's widget values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    Is(String),
    Eq(String, Value),
    TextEmpty(String),
    TextEq(String, String),
    TextMatches(String, String),
    Checked(String),
    Not(Box<Guard>),
    All(Vec<Guard>),
    Any(Vec<Guard>),
}

impl Guard {
    fn vars(&self, out: &mut Vec<String>) {
        match self {
            Guard::Is(v) | Guard::Eq(v, _) => out.push(v.clone()),
            Guard::Not(g) => g.vars(out),
            Guard::All(gs) | Guard::Any(gs) => gs.iter().for_each(|g| g.vars(out)),
            _ => {}
        }
    }

    fn regexes(&self, out: &mut Vec<String>) {
        match self {
            Guard::TextMatches(_, re) => out.push(re.clone()),
            Guard::Not(g) => g.regexes(out),
            Guard::All(gs) | Guard::Any(gs) => gs.iter().for_each(|g| g.regexes(out)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Set(String, Value),
    Toggle(String),
    Incr(String),
    /// Copies the text of a widget of the current window into a variable.
    StoreText(String, String),
}

impl Effect {
    pub fn var(&self) -> &str {
        match self {
            Effect::Set(v, _) | Effect::Toggle(v) | Effect::Incr(v) | Effect::StoreText(v, _) => v,
        }
    }
}

/// Methods (or instruction ranges of methods) executed by a rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceEntry {
    Full(MethodId),
    Range {
        method: MethodId,
        range: (usize, usize),
    },
}

impl TraceEntry {
    pub fn method(&self) -> &MethodId {
        match self {
            TraceEntry::Full(m) => m,
            TraceEntry::Range { method, .. } => method,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rule {
    pub window: String,
    #[serde(default)]
    pub widget: Option<String>,
    pub action: ActionKind,
    #[serde(default)]
    pub direction: Option<SwipeDir>,
    #[serde(default)]
    pub guard: Option<Guard>,
    #[serde(default)]
    pub effects: Vec<Effect>,
    /// Window id to open, or `"back"` to close the current window.
    #[serde(default)]
    pub goto: Option<String>,
    #[serde(default)]
    pub trace: Vec<TraceEntry>,
    #[serde(default)]
    pub crash: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dynamic {
    #[serde(default)]
    pub vars: BTreeMap<String, Value>,
    #[serde(default)]
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    #[serde(default)]
    pub covers: Vec<MethodId>,
    pub actions: Vec<Action>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn window(&self, id: &str) -> Option<&WindowDecl> {
        self.static_view.windows.iter().find(|w| w.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let v2 = CodeIndex::build(&self.code_v2)?;
        self.code_v1.validate()?;

        let mut ids = BTreeSet::new();
        for w in &self.static_view.windows {
            if !ids.insert(w.id.as_str()) {
                return Err(Error::validation(format!("duplicate window `{}`", w.id)));
            }
        }
        match self.window(&self.launcher) {
            Some(w) if w.kind == WindowKind::Activity => {}
            Some(_) => return Err(Error::validation("launcher must be an Activity")),
            None => {
                return Err(Error::validation(format!(
                    "launcher `{}` is not a declared window",
                    self.launcher
                )))
            }
        }

        let var_known = |v: &str, ctx: &str| -> Result<()> {
            if self.dynamic.vars.contains_key(v) {
                Ok(())
            } else {
                Err(Error::validation(format!("{ctx}: undeclared state variable `{v}`")))
            }
        };
        let check_guard = |g: &Guard, ctx: &str| -> Result<()> {
            let mut vs = Vec::new();
            g.vars(&mut vs);
            for v in vs {
                var_known(&v, ctx)?;
            }
            let mut res = Vec::new();
            g.regexes(&mut res);
            for re in res {
                regex::Regex::new(&re)
                    .map_err(|e| Error::validation(format!("{ctx}: bad regex `{re}`: {e}")))?;
            }
            Ok(())
        };

        for w in &self.static_view.windows {
            if let Some(class) = &w.class {
                if !v2.classes.contains_key(class) {
                    return Err(Error::validation(format!(
                        "window `{}` names undeclared class `{class}`",
                        w.id
                    )));
                }
            }
            let mut uids = BTreeSet::new();
            for wd in w.all_widgets() {
                if !uids.insert(wd.id.as_str()) {
                    return Err(Error::validation(format!(
                        "window `{}`: duplicate widget `{}`",
                        w.id, wd.id
                    )));
                }
                let ctx = format!("widget `{}/{}`", w.id, wd.id);
                for v in [&wd.text_var, &wd.checked_var, &wd.value_var].into_iter().flatten() {
                    var_known(v, &ctx)?;
                }
                for g in [&wd.enabled_when, &wd.visible_when].into_iter().flatten() {
                    check_guard(g, &ctx)?;
                }
            }
            for d in &w.dialogs {
                if self.window(d).is_none() {
                    return Err(Error::validation(format!(
                        "window `{}` lists unknown dialog `{d}`",
                        w.id
                    )));
                }
            }
            for (i, input) in w.inputs.iter().enumerate() {
                let ctx = format!("window `{}` input #{i}", w.id);
                if let Some(uid) = &input.widget {
                    if w.widget(uid).is_none() {
                        return Err(Error::validation(format!("{ctx}: unknown widget `{uid}`")));
                    }
                } else if input.event.is_widget_action() {
                    return Err(Error::validation(format!(
                        "{ctx}: {} input needs a target widget",
                        input.event
                    )));
                }
                for h in &input.handlers {
                    if !v2.contains(h) {
                        return Err(Error::validation(format!("{ctx}: dangling handler `{h}`")));
                    }
                }
                if let Some(t) = &input.target {
                    if self.window(t).is_none() {
                        return Err(Error::validation(format!("{ctx}: unknown target `{t}`")));
                    }
                }
            }
        }

        for (i, r) in self.dynamic.rules.iter().enumerate() {
            let ctx = format!("rule #{i}");
            let Some(w) = self.window(&r.window) else {
                return Err(Error::validation(format!("{ctx}: unknown window `{}`", r.window)));
            };
            if let Some(uid) = &r.widget {
                if w.widget(uid).is_none() {
                    return Err(Error::validation(format!("{ctx}: unknown widget `{uid}`")));
                }
            }
            if let Some(g) = &r.guard {
                check_guard(g, &ctx)?;
            }
            for e in &r.effects {
                var_known(e.var(), &ctx)?;
            }
            if let Some(to) = &r.goto {
                if to != "back" && self.window(to).is_none() {
                    return Err(Error::validation(format!("{ctx}: unknown goto `{to}`")));
                }
            }
            for t in &r.trace {
                if !v2.contains(t.method()) {
                    return Err(Error::validation(format!(
                        "{ctx}: trace names undeclared method `{}`",
                        t.method()
                    )));
                }
                if let TraceEntry::Range { method, range } = t {
                    if range.0 > range.1 || range.1 > v2.instructions(method) {
                        return Err(Error::validation(format!(
                            "{ctx}: instruction range {range:?} out of bounds for `{method}`"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
