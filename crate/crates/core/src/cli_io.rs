//! Manual input definitions and the end-to-end pipeline that turns a scenario
//! into the campaign artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Serialize;
use serde_json::Value as Json;

use crate::appdiff::updated_methods;
use crate::code::{CodeIndex, MethodId};
use crate::error::{Error, Result};
use crate::explorer::{run_campaign, CampaignConfig};
use crate::ir::TermTable;
use crate::scenario::Scenario;
use crate::static_model::build_ewtg;

/// A named group of input values for widgets in selected windows.
#[derive(Debug, Clone, Serialize)]
pub struct InputPattern {
    pub windows: Vec<String>,
    /// Field name to resource id regular expressions.
    pub data_fields: BTreeMap<String, Vec<String>>,
    pub instances: Vec<BTreeMap<String, String>>,
    #[serde(skip)]
    window_res: Vec<Regex>,
    #[serde(skip)]
    field_res: BTreeMap<String, Vec<Regex>>,
}

impl InputPattern {
    /// Window entries match by exact id or as an anchored regular expression.
    pub fn applies_to(&self, window: &str) -> bool {
        self.windows.iter().any(|w| w == window) || self.window_res.iter().any(|r| r.is_match(window))
    }

    pub fn field_for(&self, resource_id: &str) -> Option<&str> {
        self.field_res
            .iter()
            .find(|(_, rs)| rs.iter().any(|r| r.is_match(resource_id)))
            .map(|(f, _)| f.as_str())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ManualInputSpec {
    pub patterns: BTreeMap<String, InputPattern>,
}

impl ManualInputSpec {
    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Candidate values for a widget: one per instance of every applicable pattern.
    pub fn values_for(&self, window: &str, resource_id: &str) -> Vec<&str> {
        let mut out = Vec::new();
        for p in self.patterns.values().filter(|p| p.applies_to(window)) {
            if let Some(f) = p.field_for(resource_id) {
                out.extend(p.instances.iter().filter_map(|i| i.get(f)).map(String::as_str));
            }
        }
        out
    }

    /// Patterns that apply to `window`, with the fields each instance fills.
    pub fn patterns_for<'a>(&'a self, window: &'a str) -> impl Iterator<Item = &'a InputPattern> + 'a {
        self.patterns.values().filter(move |p| p.applies_to(window))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_at(text, Path::new("<manual inputs>"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_at(&text, path)
    }

    fn parse_at(text: &str, path: &Path) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let err = |at: String, msg: &str| Error::ManualInput {
            path: path.display().to_string(),
            message: format!("{at}: {msg}"),
        };
        let root: Json = serde_json::from_str(text)?;
        let Json::Object(root) = root else {
            return Err(err("$".into(), "expected an object of patterns"));
        };
        let mut spec = Self::default();
        for (name, body) in root {
            let Json::Object(body) = body else {
                return Err(err(name, "expected an object"));
            };
            let strings = |v: Option<&Json>, at: String| -> Result<Vec<String>> {
                match v {
                    None => Ok(Vec::new()),
                    Some(Json::Array(xs)) => xs
                        .iter()
                        .enumerate()
                        .map(|(i, x)| {
                            x.as_str()
                                .map(str::to_string)
                                .ok_or_else(|| err(format!("{at}[{i}]"), "expected a string"))
                        })
                        .collect(),
                    Some(_) => Err(err(at, "expected an array")),
                }
            };
            let windows = strings(body.get("Windows"), format!("{name}.Windows"))?;
            // Entries that are not valid regexes still match by exact id.
            let window_res = windows
                .iter()
                .filter_map(|w| Regex::new(&format!("^(?:{w})$")).ok())
                .collect();
            let mut data_fields = BTreeMap::new();
            let mut field_res = BTreeMap::new();
            match body.get("DataFields") {
                None => {}
                Some(Json::Object(fields)) => {
                    for (f, def) in fields {
                        let at = format!("{name}.DataFields.{f}.resourceIdPatterns");
                        let pats = strings(def.get("resourceIdPatterns"), at.clone())?;
                        let mut rs = Vec::new();
                        for (i, p) in pats.iter().enumerate() {
                            rs.push(
                                Regex::new(p)
                                    .map_err(|e| err(format!("{at}[{i}]"), &e.to_string()))?,
                            );
                        }
                        data_fields.insert(f.clone(), pats);
                        field_res.insert(f.clone(), rs);
                    }
                }
                Some(_) => return Err(err(format!("{name}.DataFields"), "expected an object")),
            }
            let mut instances = Vec::new();
            match body.get("Instances") {
                None => {}
                Some(Json::Array(xs)) => {
                    for (i, x) in xs.iter().enumerate() {
                        let Json::Object(rec) = x else {
                            return Err(err(format!("{name}.Instances[{i}]"), "expected an object"));
                        };
                        let mut inst = BTreeMap::new();
                        for (k, v) in rec {
                            let at = format!("{name}.Instances[{i}].{k}");
                            if !data_fields.contains_key(k) {
                                return Err(err(at, "field is not declared in DataFields"));
                            }
                            let v = match v {
                                Json::String(s) => s.clone(),
                                Json::Number(n) => n.to_string(),
                                Json::Bool(b) => b.to_string(),
                                _ => return Err(err(at, "expected a scalar value")),
                            };
                            inst.insert(k.clone(), v);
                        }
                        instances.push(inst);
                    }
                }
                Some(_) => return Err(err(format!("{name}.Instances"), "expected an array")),
            }
            spec.patterns.insert(
                name,
                InputPattern {
                    windows,
                    data_fields,
                    instances,
                    window_res,
                    field_res,
                },
            );
        }
        Ok(spec)
    }
}

/// Artifacts written by a full run, in order.
pub const ARTIFACTS: [&str; 7] = [
    "updated_methods.json",
    "ewtg.json",
    "ir_table.json",
    "report.json",
    "trace.csv",
    "coverage_timeline.csv",
    "app_model.json",
];

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub campaign: CampaignConfig,
    pub out: PathBuf,
    pub diff_only: bool,
}

#[derive(Serialize)]
struct UpdatedMethodsDoc<'a> {
    modified: &'a BTreeSet<MethodId>,
    new: &'a BTreeSet<MethodId>,
    note: &'static str,
}

const IDENTITY_NOTE: &str = "methods are identified by package, class, name and signature; \
a changed signature is reported as a new method";

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Runs the diff, builds the static model and term table, runs the campaign
/// and writes every artifact into `opts.out`. Returns the written paths.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&opts.out).map_err(|e| Error::io(&opts.out, e))?;
    let updated = updated_methods(&scenario.code_v1, &scenario.code_v2)?;
    let doc = UpdatedMethodsDoc {
        modified: &updated.modified,
        new: &updated.new,
        note: IDENTITY_NOTE,
    };
    let mut written = vec![write_json(&opts.out, ARTIFACTS[0], &doc)?];
    if opts.diff_only {
        return Ok(written);
    }
    let ewtg = build_ewtg(scenario, &updated)?;
    let code = CodeIndex::build(&scenario.code_v2)?;
    written.push(write_json(&opts.out, ARTIFACTS[1], &ewtg)?);
    written.push(write_json(&opts.out, ARTIFACTS[2], &TermTable::build(&ewtg, &code))?);

    let campaign = run_campaign(scenario, &opts.campaign)?;
    written.push(write_json(&opts.out, ARTIFACTS[3], &campaign.report)?);
    let trace = opts.out.join(ARTIFACTS[4]);
    campaign.report.write_trace(&trace)?;
    written.push(trace);
    let timeline = opts.out.join(ARTIFACTS[5]);
    campaign.report.write_timeline(&timeline)?;
    written.push(timeline);
    written.push(write_json(&opts.out, ARTIFACTS[6], &campaign.model)?);
    Ok(written)
}
