//! Campaign outcome: summary, action trace and coverage timeline.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::{Engine, Strategy};
use crate::abstraction::Level;
use crate::code::MethodId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub id: usize,
    pub phase: String,
    pub purpose: String,
    pub action: String,
    pub widget: String,
    pub resource_id: String,
    pub data: String,
    pub window: String,
    pub dest_window: String,
    pub counted: bool,
    pub visit: String,
    pub random_invocation: String,
    pub new_instructions: usize,
    pub covered_instructions: usize,
    pub crashed: bool,
    pub tree_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimelinePoint {
    pub counted_actions: usize,
    pub total_actions: usize,
    pub covered_instructions: usize,
    pub covered_methods: usize,
    pub phase: Option<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseStats {
    pub phase: u8,
    pub counted_actions: usize,
    pub total_actions: usize,
    /// Target-window visits (Phase 2) or target attempts (Phase 3).
    pub visits: usize,
    pub target_windows: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomInvocation {
    pub id: usize,
    pub phase: Option<u8>,
    /// `None` when unbounded.
    pub budget: Option<usize>,
    pub counted_actions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Refinement {
    pub window: String,
    pub level: Level,
    pub at_action: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodCoverage {
    pub instructions: usize,
    pub covered: usize,
    /// Counted actions executed when the method was first hit.
    pub first_covered_at: Option<usize>,
    pub first_covered_phase: Option<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetSummary {
    pub updated_methods: usize,
    pub covered_methods: usize,
    pub target_instructions: usize,
    pub covered_instructions: usize,
    pub instruction_coverage: f64,
    pub method_coverage: f64,
    pub methods: BTreeMap<MethodId, MethodCoverage>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSize {
    pub windows: usize,
    pub window_transitions: usize,
    pub abstract_states: usize,
    pub abstract_transitions: usize,
    pub gui_trees: usize,
    pub hidden_handlers: usize,
    pub hidden_handlers_matched: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignReport {
    pub scenario: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub scale_factor: usize,
    pub budget: usize,
    pub counted_actions: usize,
    pub total_actions: usize,
    pub crashes: usize,
    pub targets: TargetSummary,
    pub phases: Vec<PhaseStats>,
    pub refinements: Vec<Refinement>,
    pub residual_nondeterminism: Vec<String>,
    pub unreachable_windows: Vec<String>,
    pub random_invocations: Vec<RandomInvocation>,
    pub model: ModelSize,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    #[serde(skip)]
    pub timeline: Vec<TimelinePoint>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

pub(crate) fn build(e: &Engine<'_>) -> CampaignReport {
    let p = &e.progress;
    let methods = p
        .totals
        .iter()
        .map(|(m, &n)| {
            let first = e.first_covered.get(m);
            (
                m.clone(),
                MethodCoverage {
                    instructions: n,
                    covered: n - p.uncovered(m),
                    first_covered_at: first.map(|f| f.0),
                    first_covered_phase: first.and_then(|f| f.1),
                },
            )
        })
        .collect();
    let targets = TargetSummary {
        updated_methods: p.totals.len(),
        covered_methods: p.covered_methods(),
        target_instructions: p.total_instructions(),
        covered_instructions: p.covered_instructions(),
        instruction_coverage: ratio(p.covered_instructions(), p.total_instructions()),
        method_coverage: ratio(p.covered_methods(), p.totals.len()),
        methods,
    };
    let hidden: Vec<_> = e
        .model
        .ewtg
        .windows
        .values()
        .flat_map(|w| w.hidden_handlers.values())
        .collect();
    let model = ModelSize {
        windows: e.model.ewtg.windows.len(),
        window_transitions: e.model.ewtg.transitions.len(),
        abstract_states: e.model.dstg.states.len(),
        abstract_transitions: e.model.dstg.transitions.len(),
        gui_trees: e.model.gstg.trees.len(),
        hidden_handlers: hidden.len(),
        hidden_handlers_matched: hidden.iter().filter(|h| h.matched).count(),
    };
    CampaignReport {
        scenario: e.scenario.name.clone(),
        strategy: e.cfg.strategy,
        seed: e.cfg.seed,
        scale_factor: e.cfg.scale_factor,
        budget: e.cfg.budget,
        counted_actions: e.counted,
        total_actions: e.total_actions,
        crashes: e.crashes,
        targets,
        phases: e.phases.clone(),
        refinements: e.refinements.clone(),
        residual_nondeterminism: e.residual.iter().cloned().collect(),
        unreachable_windows: e.unreachable.iter().cloned().collect(),
        random_invocations: e.random_invocations.clone(),
        model,
        notes: e.notes.clone(),
        trace: e.trace.clone(),
        timeline: e.timeline.clone(),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl CampaignReport {
    pub fn write_trace(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.trace)
    }

    pub fn write_timeline(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.timeline)
    }
}
