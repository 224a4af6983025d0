//! TF-IDF retrieval of windows related to a target transition. Documents are
//! windows (methods of the implementing class and its parent) and transitions
//! (handlers plus their same-family callees); a term is an attribute name or a
//! string literal.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::Serialize;

use crate::code::{CodeIndex, MethodId};
use crate::static_model::Ewtg;

/// Raw term frequencies of one document.
pub type Document = BTreeMap<String, f64>;

/// Number of methods among `handler` and its transitive callees in the same
/// outermost class family that reference `term`.
pub fn tf_handler(code: &CodeIndex, term: &str, handler: &MethodId) -> usize {
    handler_document(code, handler)
        .get(term)
        .map(|v| *v as usize)
        .unwrap_or(0)
}

fn handler_methods(code: &CodeIndex, handler: &MethodId) -> BTreeSet<MethodId> {
    let Some(info) = code.methods.get(handler) else {
        return BTreeSet::new();
    };
    let family = code.outermost(&info.class);
    code.call_graph
        .reachable_from(handler)
        .into_iter()
        .filter(|m| {
            code.methods
                .get(m)
                .is_some_and(|i| code.outermost(&i.class) == family)
        })
        .collect()
}

fn count_terms<'a>(code: &CodeIndex, methods: impl Iterator<Item = &'a MethodId>) -> Document {
    let mut doc = Document::new();
    for m in methods {
        if let Some(info) = code.methods.get(m) {
            for t in &info.terms {
                *doc.entry(t.clone()).or_default() += 1.0;
            }
        }
    }
    doc
}

pub fn handler_document(code: &CodeIndex, handler: &MethodId) -> Document {
    count_terms(code, handler_methods(code, handler).iter())
}

/// Sum of handler documents.
pub fn transition_document<'a>(
    code: &CodeIndex,
    handlers: impl IntoIterator<Item = &'a MethodId>,
) -> Document {
    let mut doc = Document::new();
    for h in handlers {
        for (t, n) in handler_document(code, h) {
            *doc.entry(t).or_default() += n;
        }
    }
    doc
}

/// Methods declared in `class` or in its parent class.
pub fn window_document(code: &CodeIndex, class: &str) -> Document {
    let mut classes = BTreeSet::from([class.to_string()]);
    if let Some(p) = code.classes.get(class).and_then(|c| c.parent.clone()) {
        classes.insert(p);
    }
    let methods: Vec<&MethodId> = code
        .methods
        .iter()
        .filter(|(_, i)| classes.contains(&i.class))
        .map(|(m, _)| m)
        .collect();
    count_terms(code, methods.into_iter())
}

pub fn tf_window(code: &CodeIndex, term: &str, class: &str) -> usize {
    window_document(code, class)
        .get(term)
        .map(|v| *v as usize)
        .unwrap_or(0)
}

/// Window documents and the document frequencies derived from them.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TermTable {
    pub windows: BTreeMap<String, Document>,
    pub document_frequency: BTreeMap<String, usize>,
    pub idf: BTreeMap<String, f64>,
}

impl TermTable {
    pub fn from_counts(windows: BTreeMap<String, Document>) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in windows.values() {
            for (t, &n) in doc {
                if n > 0.0 {
                    *df.entry(t.clone()).or_default() += 1;
                }
            }
        }
        let n = windows.len() as f64;
        let idf = df
            .iter()
            .map(|(t, &d)| (t.clone(), (n / d as f64).ln()))
            .collect();
        TermTable {
            windows,
            document_frequency: df,
            idf,
        }
    }

    /// One document per EWTG window; windows without a class have an empty one.
    pub fn build(ewtg: &Ewtg, code: &CodeIndex) -> Self {
        let windows = ewtg
            .windows
            .values()
            .map(|w| {
                let doc = w
                    .class
                    .as_deref()
                    .map(|c| window_document(code, c))
                    .unwrap_or_default();
                (w.id.clone(), doc)
            })
            .collect();
        Self::from_counts(windows)
    }

    /// Natural log of total windows over windows containing `term`; 0 outside the vocabulary.
    pub fn idf(&self, term: &str) -> f64 {
        self.idf.get(term).copied().unwrap_or(0.0)
    }

    pub fn weighted(&self, doc: &Document) -> Document {
        doc.iter()
            .map(|(t, &tf)| (t.clone(), tf * self.idf(t)))
            .collect()
    }

    pub fn euclidean_length(&self, doc: &Document) -> f64 {
        self.weighted(doc).values().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// TF·IDF divided by the document length; empty when the length is 0.
    pub fn normalized(&self, doc: &Document) -> Document {
        let el = self.euclidean_length(doc);
        if el == 0.0 {
            return Document::new();
        }
        self.weighted(doc)
            .into_iter()
            .map(|(t, w)| (t, w / el))
            .collect()
    }

    pub fn dependency_score(&self, a: &Document, b: &Document) -> f64 {
        let na = self.normalized(a);
        let nb = self.normalized(b);
        na.iter()
            .filter_map(|(t, x)| nb.get(t).map(|y| x * y))
            .sum()
    }

    /// Scores of every window with a nonzero length against a transition document.
    pub fn dependency_scores(&self, transition: &Document) -> BTreeMap<String, f64> {
        self.windows
            .iter()
            .filter(|(_, d)| self.euclidean_length(d) > 0.0)
            .map(|(w, d)| (w.clone(), self.dependency_score(d, transition)))
            .collect()
    }

    /// Samples a window with probability proportional to its score. When all
    /// scores are zero, samples uniformly among windows other than `source`.
    pub fn select_related_window<R: Rng>(
        &self,
        transition: &Document,
        source: &str,
        rng: &mut R,
    ) -> Option<String> {
        let scores: Vec<(String, f64)> = self
            .dependency_scores(transition)
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        if !scores.is_empty() {
            let dist = WeightedIndex::new(scores.iter().map(|(_, s)| *s)).ok()?;
            return Some(scores[dist.sample(rng)].0.clone());
        }
        let others: Vec<&String> = self.windows.keys().filter(|w| *w != source).collect();
        if others.is_empty() {
            return self.windows.keys().next().cloned();
        }
        Some(others[rng.gen_range(0..others.len())].clone())
    }
}
