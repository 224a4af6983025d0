use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uptest::appdiff::updated_methods;
use uptest::code::{ClassDecl, CodeIndex, CodeModel, MethodDecl, MethodId, PackageDecl};
use uptest::ir::{self, Document, TermTable};

use super::Outcome;

const OPCODES: [&str; 6] = ["nop", "invoke-virtual", "if-eqz", "const/4", "return-void", "move-result"];
const NAMES: [&str; 5] = ["f", "g", "h", "k", "m"];
const SIGS: [&str; 3] = ["()V", "(I)V", "(Ljava/lang/String;)Z"];

fn method(rng: &mut ChaCha8Rng) -> MethodDecl {
    MethodDecl {
        name: NAMES.choose(rng).unwrap().to_string(),
        signature: SIGS.choose(rng).unwrap().to_string(),
        opcodes: (0..rng.gen_range(0..5)).map(|_| OPCODES.choose(rng).unwrap().to_string()).collect(),
        attributes: Vec::new(),
        literals: Vec::new(),
        calls: Vec::new(),
    }
}

fn ids(c: &ClassDecl) -> BTreeSet<(String, String)> {
    c.methods.iter().map(|m| (m.name.clone(), m.signature.clone())).collect()
}

/// Appends `m` unless the class already declares that name and signature.
fn add_method(c: &mut ClassDecl, m: MethodDecl) {
    if !ids(c).contains(&(m.name.clone(), m.signature.clone())) {
        c.methods.push(m);
    }
}

fn class(rng: &mut ChaCha8Rng, name: &str) -> ClassDecl {
    let mut c = ClassDecl { name: name.into(), parent: None, outer: None, methods: Vec::new() };
    for _ in 0..rng.gen_range(0..4) {
        add_method(&mut c, method(rng));
    }
    c
}

fn model(rng: &mut ChaCha8Rng) -> CodeModel {
    let mut packages = Vec::new();
    for p in ["app", "app.ui", "lib"].iter().take(rng.gen_range(1..=3)) {
        let classes = ["A", "B", "C"]
            .iter()
            .take(rng.gen_range(0..=3))
            .map(|c| class(rng, c))
            .collect();
        packages.push(PackageDecl { name: p.to_string(), classes });
    }
    CodeModel { packages }
}

fn any_class<'a>(rng: &mut ChaCha8Rng, m: &'a mut CodeModel) -> Option<&'a mut ClassDecl> {
    let p = m.packages.choose_mut(rng)?;
    p.classes.choose_mut(rng)
}

fn mutate(rng: &mut ChaCha8Rng, m: &mut CodeModel) {
    match rng.gen_range(0..11) {
        0 | 1 => {
            if let Some(c) = any_class(rng, m) {
                if let Some(x) = c.methods.choose_mut(rng) {
                    let op = OPCODES.choose(rng).unwrap().to_string();
                    if x.opcodes.is_empty() || rng.gen_bool(0.5) {
                        x.opcodes.push(op);
                    } else {
                        let i = rng.gen_range(0..x.opcodes.len());
                        x.opcodes[i] = op;
                    }
                }
            }
        }
        2 => {
            if let Some(c) = any_class(rng, m) {
                let x = method(rng);
                add_method(c, x);
            }
        }
        3 => {
            if let Some(c) = any_class(rng, m) {
                if !c.methods.is_empty() {
                    let i = rng.gen_range(0..c.methods.len());
                    c.methods.remove(i);
                }
            }
        }
        4 => {
            // Signature change: a different method identity.
            if let Some(c) = any_class(rng, m) {
                if !c.methods.is_empty() {
                    let i = rng.gen_range(0..c.methods.len());
                    let mut x = c.methods.remove(i);
                    x.signature = SIGS.choose(rng).unwrap().to_string();
                    add_method(c, x);
                }
            }
        }
        5 => {
            let c = class(rng, "D");
            if let Some(p) = m.packages.choose_mut(rng) {
                if !p.classes.iter().any(|k| k.name == "D") {
                    p.classes.push(c);
                }
            }
        }
        6 => {
            if let Some(p) = m.packages.choose_mut(rng) {
                if !p.classes.is_empty() {
                    let i = rng.gen_range(0..p.classes.len());
                    p.classes.remove(i);
                }
            }
        }
        7 => {
            if !m.packages.iter().any(|p| p.name == "extra") {
                let classes = vec![class(rng, "E")];
                m.packages.push(PackageDecl { name: "extra".into(), classes });
            }
        }
        8 => {
            // Non-body edits: terms, callees and declaration order.
            if let Some(c) = any_class(rng, m) {
                c.methods.shuffle(rng);
                if let Some(x) = c.methods.first_mut() {
                    x.attributes.push("field".into());
                    x.literals.push("lit".into());
                }
            }
        }
        9 => {
            if let Some(c) = any_class(rng, m) {
                if c.name != "R" {
                    c.name = "R".into();
                }
            }
            dedupe_classes(m);
        }
        _ => m.packages.shuffle(rng),
    }
}

fn dedupe_classes(m: &mut CodeModel) {
    for p in &mut m.packages {
        let mut seen = BTreeSet::new();
        p.classes.retain(|c| seen.insert(c.name.clone()));
    }
}

/// Method-by-method comparison over flattened ids.
fn oracle(v1: &CodeModel, v2: &CodeModel) -> (BTreeSet<MethodId>, BTreeSet<MethodId>) {
    let flat = |m: &CodeModel| -> BTreeMap<String, Vec<String>> {
        let mut out = BTreeMap::new();
        for p in &m.packages {
            for c in &p.classes {
                for x in &c.methods {
                    out.insert(format!("{}.{}.{}{}", p.name, c.name, x.name, x.signature), x.opcodes.clone());
                }
            }
        }
        out
    };
    let (a, b) = (flat(v1), flat(v2));
    let mut modified = BTreeSet::new();
    let mut new = BTreeSet::new();
    for (id, body) in &b {
        match a.get(id) {
            None => {
                new.insert(MethodId::new(id.clone()));
            }
            Some(old) if old != body => {
                modified.insert(MethodId::new(id.clone()));
            }
            Some(_) => {}
        }
    }
    (modified, new)
}

pub fn diff_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut nonempty = 0;
    for case in 0..500 {
        let v1 = model(&mut rng);
        let mut v2 = v1.clone();
        for _ in 0..rng.gen_range(0..=4) {
            mutate(&mut rng, &mut v2);
        }
        let got = updated_methods(&v1, &v2).map_err(|e| format!("case {case}: {e}"))?;
        let (modified, new) = oracle(&v1, &v2);
        if got.modified != modified || got.new != new {
            return Err(format!(
                "case {case}: got modified {:?} new {:?}, oracle modified {modified:?} new {new:?}",
                got.modified, got.new
            ));
        }
        if !got.is_empty() {
            nonempty += 1;
        }
    }
    Ok(format!("500 mutation pairs agree, {nonempty} with updates"))
}

const TERMS: [&str; 8] = ["t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7"];

/// Random single-package code with parents, outer classes, terms and calls.
fn term_code(rng: &mut ChaCha8Rng) -> CodeModel {
    let n = rng.gen_range(2..=10);
    let mut classes: Vec<ClassDecl> = Vec::new();
    for i in 0..n {
        let pick = |rng: &mut ChaCha8Rng| (i > 0 && rng.gen_bool(0.4)).then(|| format!("p.C{}", rng.gen_range(0..i)));
        let parent = pick(rng);
        let outer = pick(rng);
        let methods = (0..rng.gen_range(0..4))
            .map(|j| MethodDecl {
                name: format!("m{j}"),
                signature: "()V".into(),
                opcodes: vec!["nop".into()],
                attributes: TERMS.iter().filter(|_| rng.gen_bool(0.25)).map(|t| t.to_string()).collect(),
                literals: TERMS.iter().filter(|_| rng.gen_bool(0.1)).map(|t| t.to_string()).collect(),
                calls: Vec::new(),
            })
            .collect();
        classes.push(ClassDecl { name: format!("C{i}"), parent, outer, methods });
    }
    let all: Vec<String> = classes
        .iter()
        .flat_map(|c| c.methods.iter().map(move |m| format!("p.{}.{}()V", c.name, m.name)))
        .collect();
    for c in &mut classes {
        for m in &mut c.methods {
            for callee in &all {
                if rng.gen_bool(0.15) {
                    m.calls.push(MethodId::new(callee.clone()));
                }
            }
        }
    }
    CodeModel { packages: vec![PackageDecl { name: "p".into(), classes }] }
}

struct Brute<'a> {
    code: &'a CodeModel,
}

impl Brute<'_> {
    fn classes(&self) -> &[ClassDecl] {
        &self.code.packages[0].classes
    }

    fn class(&self, q: &str) -> &ClassDecl {
        self.classes().iter().find(|c| format!("p.{}", c.name) == q).unwrap()
    }

    fn mentions(m: &MethodDecl, t: &str) -> bool {
        m.attributes.iter().chain(&m.literals).any(|x| x == t)
    }

    fn tf_window(&self, q: &str, t: &str) -> f64 {
        let mut cs = vec![q.to_string()];
        if let Some(p) = &self.class(q).parent {
            if p != q {
                cs.push(p.clone());
            }
        }
        cs.iter()
            .flat_map(|c| self.class(c).methods.iter())
            .filter(|m| Self::mentions(m, t))
            .count() as f64
    }

    fn outermost(&self, q: &str) -> String {
        let mut cur = q.to_string();
        let mut seen = BTreeSet::new();
        while seen.insert(cur.clone()) {
            match &self.class(&cur).outer {
                Some(o) if !seen.contains(o) => cur = o.clone(),
                _ => break,
            }
        }
        cur
    }

    fn method(&self, id: &str) -> (String, &MethodDecl) {
        for c in self.classes() {
            for m in &c.methods {
                if format!("p.{}.{}()V", c.name, m.name) == id {
                    return (format!("p.{}", c.name), m);
                }
            }
        }
        panic!("unknown method {id}");
    }

    /// Fixpoint over call edges, then restricted to the handler's family.
    fn tf_handler(&self, h: &str, t: &str) -> f64 {
        let mut reach = BTreeSet::from([h.to_string()]);
        loop {
            let next: BTreeSet<String> = reach
                .iter()
                .flat_map(|m| self.method(m).1.calls.iter().map(|c| c.0.clone()))
                .collect();
            let before = reach.len();
            reach.extend(next);
            if reach.len() == before {
                break;
            }
        }
        let family = self.outermost(&self.method(h).0);
        reach
            .iter()
            .map(|m| self.method(m))
            .filter(|(c, m)| self.outermost(c) == family && Self::mentions(m, t))
            .count() as f64
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

pub fn ir_criterion() -> Outcome {
    let direct = TermTable::from_counts(
        (0..10)
            .map(|i| {
                let doc: Document = if i < 2 { [("t".to_string(), 1.0)].into() } else { Document::new() };
                (format!("W{i}"), doc)
            })
            .collect(),
    );
    if !close(direct.idf("t"), 5f64.ln()) {
        return Err(format!("idf of a term in 2 of 10 windows is {}", direct.idf("t")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut compared = 0usize;
    for case in 0..100 {
        let code = term_code(&mut rng);
        let index = CodeIndex::build(&code).map_err(|e| e.to_string())?;
        let brute = Brute { code: &code };
        let windows: Vec<String> = brute.classes().iter().map(|c| format!("p.{}", c.name)).collect();

        // TF
        let mut docs: BTreeMap<String, Document> = BTreeMap::new();
        for w in &windows {
            let doc = ir::window_document(&index, w);
            for t in TERMS {
                let want = brute.tf_window(w, t);
                let got = doc.get(t).copied().unwrap_or(0.0);
                if !close(got, want) || !close(ir::tf_window(&index, t, w) as f64, want) {
                    return Err(format!("case {case}: tf({t}, {w}) = {got}, oracle {want}"));
                }
                compared += 1;
            }
            docs.insert(w.clone(), doc);
        }
        let table = TermTable::from_counts(docs.clone());

        // IDF
        let n = windows.len() as f64;
        let mut idf = BTreeMap::new();
        for t in TERMS {
            let df = windows.iter().filter(|w| brute.tf_window(w, t) > 0.0).count();
            let want = if df == 0 { 0.0 } else { (n / df as f64).ln() };
            if !close(table.idf(t), want) {
                return Err(format!("case {case}: idf({t}) = {}, oracle {want}", table.idf(t)));
            }
            idf.insert(t, want);
            compared += 1;
        }

        // NW
        let nw = |tf: &dyn Fn(&str) -> f64| -> BTreeMap<&str, f64> {
            let w: BTreeMap<&str, f64> = TERMS.iter().map(|t| (*t, tf(t) * idf[t])).collect();
            let len = w.values().map(|x| x * x).sum::<f64>().sqrt();
            if len == 0.0 {
                return TERMS.iter().map(|t| (*t, 0.0)).collect();
            }
            w.into_iter().map(|(t, x)| (t, x / len)).collect()
        };
        for w in &windows {
            let want = nw(&|t| brute.tf_window(w, t));
            let got = table.normalized(&docs[w]);
            for t in TERMS {
                let g = got.get(t).copied().unwrap_or(0.0);
                if !close(g, want[t]) {
                    return Err(format!("case {case}: nw({t}, {w}) = {g}, oracle {}", want[t]));
                }
                compared += 1;
            }
        }

        // DS against a random handler set
        let methods: Vec<String> = code
            .methods()
            .map(|(id, _, _)| id.0)
            .collect();
        if methods.is_empty() {
            continue;
        }
        let handlers: Vec<String> = methods.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
        let hids: Vec<MethodId> = handlers.iter().map(|h| MethodId::new(h.clone())).collect();
        let tdoc = ir::transition_document(&index, hids.iter());
        let ttf = |t: &str| handlers.iter().map(|h| brute.tf_handler(h, t)).sum::<f64>();
        for t in TERMS {
            let got = tdoc.get(t).copied().unwrap_or(0.0);
            if !close(got, ttf(t)) {
                return Err(format!("case {case}: transition tf({t}) = {got}, oracle {}", ttf(t)));
            }
        }
        let tnw = nw(&ttf);
        let scores = table.dependency_scores(&tdoc);
        for w in &windows {
            let wn = nw(&|t| brute.tf_window(w, t));
            let want: f64 = TERMS.iter().map(|t| wn[t] * tnw[t]).sum();
            let has_len = wn.values().any(|x| *x != 0.0);
            let got = table.dependency_score(&docs[w], &tdoc);
            if !close(got, want) {
                return Err(format!("case {case}: ds({w}) = {got}, oracle {want}"));
            }
            match scores.get(w) {
                Some(s) if has_len && close(*s, want) => {}
                None if !has_len => {}
                other => return Err(format!("case {case}: scores[{w}] = {other:?}, oracle {want}")),
            }
            compared += 1;
        }
    }
    Ok(format!("idf(2 of 10) = ln 5; 100 tables, {compared} values within 1e-9"))
}
