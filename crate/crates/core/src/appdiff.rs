//! Three-layer Merkle hash trees (package → class → method) over code models
//! and the top-down diff that yields the updated-method set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::code::{method_id, qualified_class, CodeModel, MethodDecl, MethodId};
use crate::error::Result;

/// SHA-256 digest of a tree node.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &hex::encode(self.0)[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

/// Length-prefixed field hashing so that no two field sequences collide by concatenation.
struct Hasher(Sha256);

impl Hasher {
    fn new(domain: &str) -> Self {
        let mut h = Hasher(Sha256::new());
        h.field(domain.as_bytes());
        h
    }

    fn field(&mut self, bytes: &[u8]) {
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    fn finish(self) -> Digest {
        let out = self.0.finalize();
        let mut d = [0u8; 32];
        d.copy_from_slice(&out);
        Digest(d)
    }
}

/// Digest of one method: signature and opcode sequence only.
pub fn method_digest(method: &MethodDecl) -> Digest {
    let mut h = Hasher::new("method");
    h.field(method.signature.as_bytes());
    h.field(&(method.opcodes.len() as u64).to_le_bytes());
    for op in &method.opcodes {
        h.field(op.as_bytes());
    }
    h.finish()
}

/// Combines named children, sorted by name, into a parent digest.
fn combine<'a>(domain: &str, children: impl Iterator<Item = (&'a str, &'a Digest)>) -> Digest {
    let mut sorted: Vec<_> = children.collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    let mut h = Hasher::new(domain);
    for (name, d) in sorted {
        h.field(name.as_bytes());
        h.field(&d.0);
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassNode {
    pub digest: Digest,
    pub methods: BTreeMap<MethodId, Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackageNode {
    pub digest: Digest,
    pub classes: BTreeMap<String, ClassNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HashTree {
    pub packages: BTreeMap<String, PackageNode>,
}

impl HashTree {
    pub fn method_count(&self) -> usize {
        self.packages
            .values()
            .flat_map(|p| p.classes.values())
            .map(|c| c.methods.len())
            .sum()
    }

    pub fn method(&self, id: &MethodId) -> Option<&Digest> {
        self.packages
            .values()
            .flat_map(|p| p.classes.values())
            .find_map(|c| c.methods.get(id))
    }
}

pub fn build_hash_tree(model: &CodeModel) -> Result<HashTree> {
    model.validate()?;
    let mut packages: BTreeMap<String, PackageNode> = BTreeMap::new();
    for p in &model.packages {
        let pkg = packages.entry(p.name.clone()).or_insert_with(|| PackageNode {
            digest: Digest([0; 32]),
            classes: BTreeMap::new(),
        });
        for c in &p.classes {
            let methods: BTreeMap<MethodId, Digest> = c
                .methods
                .iter()
                .map(|m| (method_id(&p.name, &c.name, m), method_digest(m)))
                .collect();
            let digest = combine("class", methods.iter().map(|(k, d)| (k.as_str(), d)));
            pkg.classes
                .insert(qualified_class(&p.name, &c.name), ClassNode { digest, methods });
        }
    }
    for pkg in packages.values_mut() {
        pkg.digest = combine(
            "package",
            pkg.classes.iter().map(|(k, c)| (k.as_str(), &c.digest)),
        );
    }
    Ok(HashTree { packages })
}

/// Methods of the newer version that are test targets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdatedMethodSet {
    pub modified: BTreeSet<MethodId>,
    pub new: BTreeSet<MethodId>,
}

impl UpdatedMethodSet {
    pub fn all(&self) -> BTreeSet<MethodId> {
        self.modified.union(&self.new).cloned().collect()
    }

    pub fn contains(&self, m: &MethodId) -> bool {
        self.modified.contains(m) || self.new.contains(m)
    }

    pub fn len(&self) -> usize {
        self.modified.len() + self.new.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Matches two trees top-down, skipping any package or class whose digest is unchanged.
/// Deleted methods are not reported.
pub fn diff(v1: &HashTree, v2: &HashTree) -> UpdatedMethodSet {
    let mut out = UpdatedMethodSet::default();
    for (pname, p2) in &v2.packages {
        let Some(p1) = v1.packages.get(pname) else {
            out.new.extend(p2.classes.values().flat_map(|c| c.methods.keys().cloned()));
            continue;
        };
        if p1.digest == p2.digest {
            continue;
        }
        for (cname, c2) in &p2.classes {
            let Some(c1) = p1.classes.get(cname) else {
                out.new.extend(c2.methods.keys().cloned());
                continue;
            };
            if c1.digest == c2.digest {
                continue;
            }
            for (mid, d2) in &c2.methods {
                match c1.methods.get(mid) {
                    None => {
                        out.new.insert(mid.clone());
                    }
                    Some(d1) if d1 != d2 => {
                        out.modified.insert(mid.clone());
                    }
                    Some(_) => {}
                }
            }
        }
    }
    out
}

/// Convenience: hash both versions and diff them.
pub fn updated_methods(v1: &CodeModel, v2: &CodeModel) -> Result<UpdatedMethodSet> {
    Ok(diff(&build_hash_tree(v1)?, &build_hash_tree(v2)?))
}
