//! Declarative code model of an app version: packages, classes, methods.
//!
//! A method is identified by `package.Class.name` followed by its signature
//! string, e.g. `diary.MainActivity.onClick(Landroid/view/View;)V`. Each
//! declared opcode is one instruction for coverage purposes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully-qualified method identifier, signature included.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MethodId(pub String);

impl MethodId {
    pub fn new(s: impl Into<String>) -> Self {
        MethodId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MethodId {
    fn from(s: &str) -> Self {
        MethodId(s.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeModel {
    #[serde(default)]
    pub packages: Vec<PackageDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageDecl {
    pub name: String,
    #[serde(default)]
    pub classes: Vec<ClassDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    /// Qualified name of the superclass, when it is part of the app.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Qualified name of the enclosing class for inner classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<String>,
    #[serde(default)]
    pub methods: Vec<MethodDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub name: String,
    #[serde(default = "default_signature")]
    pub signature: String,
    #[serde(default)]
    pub opcodes: Vec<String>,
    /// Class attributes referenced by the body.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<String>,
    /// String literals appearing in the body.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub literals: Vec<String>,
    /// Callees, as method ids.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calls: Vec<MethodId>,
}

fn default_signature() -> String {
    "()".to_string()
}

pub fn qualified_class(package: &str, class: &str) -> String {
    if package.is_empty() {
        class.to_string()
    } else {
        format!("{package}.{class}")
    }
}

pub fn method_id(package: &str, class: &str, method: &MethodDecl) -> MethodId {
    MethodId(format!(
        "{}.{}{}",
        qualified_class(package, class),
        method.name,
        method.signature
    ))
}

impl CodeModel {
    /// Iterates `(id, qualified class, decl)` in declaration order.
    pub fn methods(&self) -> impl Iterator<Item = (MethodId, String, &MethodDecl)> {
        self.packages.iter().flat_map(|p| {
            p.classes.iter().flat_map(move |c| {
                c.methods
                    .iter()
                    .map(move |m| (method_id(&p.name, &c.name, m), qualified_class(&p.name, &c.name), m))
            })
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (id, _, _) in self.methods() {
            if !seen.insert(id.clone()) {
                return Err(Error::validation(format!("duplicate method `{id}`")));
            }
        }
        let mut classes = BTreeSet::new();
        for p in &self.packages {
            for c in &p.classes {
                if !classes.insert(qualified_class(&p.name, &c.name)) {
                    return Err(Error::validation(format!(
                        "duplicate class `{}`",
                        qualified_class(&p.name, &c.name)
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MethodInfo {
    pub class: String,
    pub instructions: usize,
    pub terms: BTreeSet<String>,
    pub literals: BTreeSet<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ClassInfo {
    pub parent: Option<String>,
    pub outer: Option<String>,
}

/// Lookup tables over one code version: method facts and the call graph.
#[derive(Debug, Clone, Default)]
pub struct CodeIndex {
    pub methods: BTreeMap<MethodId, MethodInfo>,
    pub classes: BTreeMap<String, ClassInfo>,
    pub call_graph: CallGraph,
}

impl CodeIndex {
    pub fn build(model: &CodeModel) -> Result<Self> {
        model.validate()?;
        let mut index = CodeIndex::default();
        for p in &model.packages {
            for c in &p.classes {
                index.classes.insert(
                    qualified_class(&p.name, &c.name),
                    ClassInfo {
                        parent: c.parent.clone(),
                        outer: c.outer.clone(),
                    },
                );
            }
        }
        for (id, class, decl) in model.methods() {
            let terms = decl
                .attributes
                .iter()
                .chain(decl.literals.iter())
                .cloned()
                .collect();
            index.methods.insert(
                id.clone(),
                MethodInfo {
                    class,
                    instructions: decl.opcodes.len(),
                    terms,
                    literals: decl.literals.iter().cloned().collect(),
                },
            );
            index.call_graph.add_node(&id);
            for callee in &decl.calls {
                index.call_graph.add_edge(&id, callee);
            }
        }
        for (caller, callees) in &index.call_graph.callees {
            for callee in callees {
                if !index.methods.contains_key(callee) {
                    return Err(Error::validation(format!(
                        "`{caller}` calls undeclared method `{callee}`"
                    )));
                }
            }
        }
        Ok(index)
    }

    pub fn contains(&self, m: &MethodId) -> bool {
        self.methods.contains_key(m)
    }

    pub fn instructions(&self, m: &MethodId) -> usize {
        self.methods.get(m).map_or(0, |i| i.instructions)
    }

    /// The class and all its enclosing classes, innermost first.
    pub fn outer_chain(&self, class: &str) -> Vec<String> {
        let mut chain = vec![class.to_string()];
        let mut cur = class.to_string();
        while let Some(outer) = self.classes.get(&cur).and_then(|c| c.outer.clone()) {
            if chain.contains(&outer) {
                break;
            }
            chain.push(outer.clone());
            cur = outer;
        }
        chain
    }

    pub fn outermost(&self, class: &str) -> String {
        self.outer_chain(class).pop().unwrap_or_else(|| class.to_string())
    }
}

/// Caller→callee edges over method ids. Cycles are allowed.
#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    pub callees: BTreeMap<MethodId, BTreeSet<MethodId>>,
    pub callers: BTreeMap<MethodId, BTreeSet<MethodId>>,
}

impl CallGraph {
    pub fn add_node(&mut self, m: &MethodId) {
        self.callees.entry(m.clone()).or_default();
        self.callers.entry(m.clone()).or_default();
    }

    pub fn add_edge(&mut self, caller: &MethodId, callee: &MethodId) {
        self.add_node(caller);
        self.add_node(callee);
        self.callees.get_mut(caller).unwrap().insert(callee.clone());
        self.callers.get_mut(callee).unwrap().insert(caller.clone());
    }

    pub fn callers_of(&self, m: &MethodId) -> impl Iterator<Item = &MethodId> {
        self.callers.get(m).into_iter().flatten()
    }

    pub fn has_callers(&self, m: &MethodId) -> bool {
        self.callers.get(m).is_some_and(|c| !c.is_empty())
    }

    /// Every method reachable from `start` along caller→callee edges, `start` included.
    pub fn reachable_from(&self, start: &MethodId) -> BTreeSet<MethodId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(m) = queue.pop_front() {
            if !seen.insert(m.clone()) {
                continue;
            }
            for c in self.callees.get(&m).into_iter().flatten() {
                if !seen.contains(c) {
                    queue.push_back(c.clone());
                }
            }
        }
        seen
    }
}
