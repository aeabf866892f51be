//! Version differencing: which functions changed, what to monitor, and where
//! bounded model checking starts.

use crate::frontend::AnalyzedUnit;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChangeError {
    #[error("no change detected between versions")]
    EmptyChange,
}

/// Functions changed between the two versions. Modified functions exist in
/// both versions with structurally different (span-erased) definitions;
/// signature changes count as modifications.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub modified: BTreeSet<String>,
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.modified.is_empty() && self.added.is_empty() && self.removed.is_empty()
    }
}

/// Trace-collection targets and per-version model-checking entry points.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisScope {
    /// Changed functions plus their direct callers and direct callees,
    /// unioned over both versions' call graphs. One hop only; no
    /// transitive closure.
    pub monitored: BTreeSet<String>,
    pub entries_base: BTreeSet<String>,
    pub entries_upgraded: BTreeSet<String>,
}

/// Structural function-level diff. Total: never fails.
pub fn diff(base: &AnalyzedUnit, upgraded: &AnalyzedUnit) -> ChangeSet {
    let base_names = base.function_names();
    let upg_names = upgraded.function_names();
    let mut cs = ChangeSet::default();
    for name in base_names.union(&upg_names) {
        match (base.function(name), upgraded.function(name)) {
            (Some(b), Some(u)) => {
                if b.normalized() != u.normalized() {
                    cs.modified.insert(name.clone());
                }
            }
            (Some(_), None) => {
                cs.removed.insert(name.clone());
            }
            (None, Some(_)) => {
                cs.added.insert(name.clone());
            }
            (None, None) => unreachable!(),
        }
    }
    cs
}

/// Compute the monitoring scope and per-version entry points from a change
/// set. Added and removed functions count as changed for scoping. A changed
/// function with zero callers in a version becomes its own entry point
/// there.
pub fn scope(
    cs: &ChangeSet,
    base: &AnalyzedUnit,
    upgraded: &AnalyzedUnit,
) -> Result<AnalysisScope, ChangeError> {
    if cs.is_empty() {
        return Err(ChangeError::EmptyChange);
    }
    let seed: BTreeSet<String> = cs
        .modified
        .iter()
        .chain(cs.added.iter())
        .chain(cs.removed.iter())
        .cloned()
        .collect();

    let mut monitored = seed.clone();
    for unit in [base, upgraded] {
        for f in &seed {
            if unit.call_graph.nodes.contains(f) {
                monitored.extend(unit.call_graph.callers_of(f).expect("node exists"));
                monitored.extend(unit.call_graph.callees_of(f));
            }
        }
    }

    let entries_for = |unit: &AnalyzedUnit| {
        let mut entries = BTreeSet::new();
        for f in &seed {
            if unit.call_graph.nodes.contains(f) {
                let callers = unit.call_graph.callers_of(f).expect("node exists");
                if callers.is_empty() {
                    entries.insert(f.clone());
                } else {
                    entries.extend(callers);
                }
            }
        }
        entries
    };

    Ok(AnalysisScope {
        monitored,
        entries_base: entries_for(base),
        entries_upgraded: entries_for(upgraded),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{analyze, parse};

    fn unit(src: &str) -> AnalyzedUnit {
        analyze(parse(src, "t.mc", false).unwrap(), src.to_string()).unwrap()
    }

    const STORE_BASE: &str = r#"
record t_product { int items; }
int is_available(t_product prod) {
    return prod.items > 0;
}
int available_products(int counts[3]) {
    int total = 0;
    int i = 0;
    while (i < 3) {
        t_product prod;
        prod.items = counts[i];
        total = total + is_available(prod);
        i = i + 1;
    }
    return total;
}
"#;

    const STORE_UPGRADED: &str = r#"
record t_product { int items; }
int is_available(t_product prod) {
    if (prod.items < 0) {
        return -1;
    }
    return prod.items > 0;
}
int available_products(int counts[3]) {
    int total = 0;
    int i = 0;
    while (i < 3) {
        t_product prod;
        prod.items = counts[i];
        total = total + is_available(prod);
        i = i + 1;
    }
    return total;
}
"#;

    #[test]
    fn store_diff_marks_only_is_available() {
        let b = unit(STORE_BASE);
        let u = unit(STORE_UPGRADED);
        let cs = diff(&b, &u);
        assert_eq!(cs.modified.iter().collect::<Vec<_>>(), vec!["is_available"]);
        assert!(cs.added.is_empty());
        assert!(cs.removed.is_empty());
    }

    #[test]
    fn diff_is_reflexively_empty() {
        let b = unit(STORE_BASE);
        let cs = diff(&b, &b);
        assert!(cs.is_empty());
    }

    #[test]
    fn local_rename_marks_modified() {
        let b = unit("int f(int x) { int t = x + 1; return t; }");
        let u = unit("int f(int x) { int u = x + 1; return u; }");
        let cs = diff(&b, &u);
        assert_eq!(cs.modified.iter().collect::<Vec<_>>(), vec!["f"]);
        // oracle: printed normalized bodies differ
        use crate::frontend::pretty::pretty_print;
        let pb = pretty_print(&b.units[0]);
        let pu = pretty_print(&u.units[0]);
        assert_ne!(pb, pu);
    }

    #[test]
    fn signature_change_marks_modified() {
        let b = unit("int f(int x) { return x; }");
        let u = unit("int f(int x, int y) { return x; }");
        assert_eq!(diff(&b, &u).modified.iter().collect::<Vec<_>>(), vec!["f"]);
    }

    #[test]
    fn diff_symmetry_added_removed() {
        let a = unit("int f(int x) { return x; }");
        let b = unit("int f(int x) { return x; } int g(int y) { return y; }");
        let ab = diff(&a, &b);
        let ba = diff(&b, &a);
        assert_eq!(ab.added, ba.removed);
        assert_eq!(ab.removed, ba.added);
    }

    #[test]
    fn store_scope_and_entries() {
        let b = unit(STORE_BASE);
        let u = unit(STORE_UPGRADED);
        let cs = diff(&b, &u);
        let sc = scope(&cs, &b, &u).unwrap();
        let expect: BTreeSet<String> = ["is_available", "available_products"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(sc.monitored, expect);
        assert_eq!(
            sc.entries_base.iter().collect::<Vec<_>>(),
            vec!["available_products"]
        );
        assert_eq!(
            sc.entries_upgraded.iter().collect::<Vec<_>>(),
            vec!["available_products"]
        );
    }

    #[test]
    fn zero_caller_modified_becomes_entry() {
        let b = unit("int main_fn(int x) { return x; }");
        let u = unit("int main_fn(int x) { return x + 1; }");
        let cs = diff(&b, &u);
        let sc = scope(&cs, &b, &u).unwrap();
        assert_eq!(sc.entries_base.iter().collect::<Vec<_>>(), vec!["main_fn"]);
    }

    #[test]
    fn empty_change_is_an_error() {
        let b = unit(STORE_BASE);
        let cs = diff(&b, &b);
        assert_eq!(scope(&cs, &b, &b), Err(ChangeError::EmptyChange));
    }

    #[test]
    fn chain_scope_is_one_hop() {
        let src_a = "int c(int x) { return x; } int b(int x) { return c(x); } int a(int x) { return b(x); } int top(int x) { return a(x); }";
        let src_b = "int c(int x) { return x; } int b(int x) { return c(x) + 1; } int a(int x) { return b(x); } int top(int x) { return a(x); }";
        let base = unit(src_a);
        let upg = unit(src_b);
        let cs = diff(&base, &upg);
        assert_eq!(cs.modified.iter().collect::<Vec<_>>(), vec!["b"]);
        let sc = scope(&cs, &base, &upg).unwrap();
        // one hop: a (caller), b (modified), c (callee); NOT top
        let expect: BTreeSet<String> =
            ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(sc.monitored, expect);
        assert_eq!(sc.entries_base.iter().collect::<Vec<_>>(), vec!["a"]);
        // independent traversal oracle
        let mut oracle = BTreeSet::new();
        oracle.insert("b".to_string());
        for unit in [&base, &upg] {
            for (f, g) in &unit.call_graph.edges {
                if g == "b" {
                    oracle.insert(f.clone());
                }
                if f == "b" {
                    oracle.insert(g.clone());
                }
            }
        }
        assert_eq!(sc.monitored, oracle);
    }
}
