//! Template-based likely-property inference over trace logs, and property
//! evaluation against individual samples (reused by the outdated-property
//! filter).
//!
//! The template set is a deliberate reconstruction of a dynamic invariant
//! detector's output, fixed to seven forms. A support knob exists but
//! defaults to 1: permissive inference is fine because the model-checking
//! phase discards overfitting candidates.

use crate::point::ProgramPoint;
use crate::property::{wrap, Property, PropertyFormula, RelOp};
use crate::tracer::{TraceLog, TraceSample};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("sample point `{sample}` does not match property point `{property}`")]
pub struct PointMismatch {
    pub property: ProgramPoint,
    pub sample: ProgramPoint,
}

/// Per-variable observation summary at one point.
struct VarStats {
    min: i64,
    max: i64,
    all_nonzero: bool,
    /// Distinct values, tracked up to 4 (OneOf needs at most 3).
    distinct: Vec<i64>,
    overflowed: bool,
}

impl VarStats {
    fn new(v: i64) -> VarStats {
        VarStats {
            min: v,
            max: v,
            all_nonzero: v != 0,
            distinct: vec![v],
            overflowed: false,
        }
    }

    fn add(&mut self, v: i64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.all_nonzero &= v != 0;
        if !self.overflowed && !self.distinct.contains(&v) {
            if self.distinct.len() >= 4 {
                self.overflowed = true;
            } else {
                self.distinct.push(v);
            }
        }
    }

    fn constant(&self) -> Option<i64> {
        if self.min == self.max {
            Some(self.min)
        } else {
            None
        }
    }
}

/// Derive every template instance satisfied by all samples at each point
/// with at least `min_support` samples, subject to suppression of implied
/// forms. Output is in canonical order: by point, then template kind, then
/// variable names.
pub fn infer(logs: &TraceLog, min_support: usize, width: u32) -> Vec<Property> {
    let min_support = min_support.max(1);
    let mut by_point: BTreeMap<ProgramPoint, Vec<&TraceSample>> = BTreeMap::new();
    for s in &logs.samples {
        by_point.entry(s.point.clone()).or_default().push(s);
    }

    let mut out = Vec::new();
    for (point, samples) in by_point {
        if samples.len() < min_support {
            continue;
        }
        let vars: Vec<String> = samples[0].bindings.iter().map(|(k, _)| k.clone()).collect();
        let mut stats: BTreeMap<&str, VarStats> = BTreeMap::new();
        for s in &samples {
            for (k, v) in &s.bindings {
                stats
                    .entry(k.as_str())
                    .and_modify(|st| st.add(*v))
                    .or_insert_with(|| VarStats::new(*v));
            }
        }

        let mut formulas: Vec<PropertyFormula> = Vec::new();

        // single-variable templates; EqConst suppresses the others
        let mut sorted_vars: Vec<&String> = vars.iter().collect();
        sorted_vars.sort();
        for v in &sorted_vars {
            let st = &stats[v.as_str()];
            if let Some(c) = st.constant() {
                formulas.push(PropertyFormula::EqConst {
                    var: (*v).clone(),
                    value: c,
                });
                continue;
            }
            formulas.push(PropertyFormula::LowerBound {
                var: (*v).clone(),
                bound: st.min,
            });
            formulas.push(PropertyFormula::UpperBound {
                var: (*v).clone(),
                bound: st.max,
            });
            if st.all_nonzero {
                formulas.push(PropertyFormula::NonZero { var: (*v).clone() });
            }
            if !st.overflowed && st.distinct.len() >= 2 && st.distinct.len() <= 3 {
                let mut values = st.distinct.clone();
                values.sort_unstable();
                formulas.push(PropertyFormula::OneOf {
                    var: (*v).clone(),
                    values,
                });
            }
        }

        // pair templates over lexicographically ordered pairs
        for (i, v) in sorted_vars.iter().enumerate() {
            for w in sorted_vars.iter().skip(i + 1) {
                let pairs: Vec<(i64, i64)> = samples
                    .iter()
                    .map(|s| (value_of(s, v), value_of(s, w)))
                    .collect();
                let all_eq = pairs.iter().all(|(a, b)| a == b);
                let all_ne = pairs.iter().all(|(a, b)| a != b);
                let all_ge = pairs.iter().all(|(a, b)| a >= b);
                let all_le = pairs.iter().all(|(a, b)| a <= b);
                for (op, holds) in [
                    (RelOp::Eq, all_eq),
                    (RelOp::Ne, all_ne),
                    (RelOp::Ge, all_ge),
                    (RelOp::Le, all_le),
                ] {
                    if holds {
                        formulas.push(PropertyFormula::RelVarVar {
                            lhs: (*v).clone(),
                            op,
                            rhs: (*w).clone(),
                        });
                    }
                }
                // v == w + c under wraparound; suppressed at c = 0 when the
                // equality template already fired
                let c0 = wrap(pairs[0].0.wrapping_sub(pairs[0].1), width);
                let constant_offset = pairs
                    .iter()
                    .all(|(a, b)| wrap(a.wrapping_sub(*b), width) == c0);
                if constant_offset && !(c0 == 0 && all_eq) {
                    formulas.push(PropertyFormula::OffsetEq {
                        lhs: (*v).clone(),
                        rhs: (*w).clone(),
                        offset: c0,
                    });
                }
            }
        }

        formulas.sort_by(|a, b| {
            (a.kind_rank(), a.vars().join("\u{1}"), a.text())
                .cmp(&(b.kind_rank(), b.vars().join("\u{1}"), b.text()))
        });
        for f in formulas {
            out.push(Property::new(point.clone(), f));
        }
    }
    out
}

fn value_of(s: &TraceSample, var: &str) -> i64 {
    s.bindings
        .iter()
        .find(|(k, _)| k == var)
        .map(|(_, v)| *v)
        .expect("schema invariant")
}

/// Evaluate a property against one sample under W-bit signed semantics.
pub fn holds(p: &Property, sample: &TraceSample, width: u32) -> Result<bool, PointMismatch> {
    if sample.point != p.point {
        return Err(PointMismatch {
            property: p.point.clone(),
            sample: sample.point.clone(),
        });
    }
    // missing variables cannot occur when points match (schema invariant),
    // but default closed-world to false rather than panic
    Ok(p.formula.eval(&sample.binding_map(), width).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::Version;

    fn sample(point: &ProgramPoint, kvs: &[(&str, i64)], seq: u64) -> TraceSample {
        TraceSample {
            point: point.clone(),
            bindings: kvs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            test: "t".to_string(),
            sequence: seq,
        }
    }

    fn log_of(samples: Vec<TraceSample>) -> TraceLog {
        TraceLog {
            version: Version::Base,
            samples,
            tests_run: vec!["t".to_string()],
        }
    }

    #[test]
    fn one_of_return_zero_one() {
        let p = ProgramPoint::exit("is_available");
        let log = log_of(vec![
            sample(&p, &[("prod.items", 5), ("return", 1)], 0),
            sample(&p, &[("prod.items", 0), ("return", 0)], 1),
            sample(&p, &[("prod.items", 3), ("return", 1)], 2),
        ]);
        let props = infer(&log, 1, 16);
        let one_of = props.iter().find(|pr| {
            pr.formula
                == PropertyFormula::OneOf {
                    var: "return".to_string(),
                    values: vec![0, 1],
                }
        });
        assert!(one_of.is_some(), "expected return == 0 || return == 1");
    }

    #[test]
    fn lower_bound_uses_observed_min() {
        let p = ProgramPoint::loop_head("available_products", 0);
        let log = log_of(vec![
            sample(&p, &[("total", 0)], 0),
            sample(&p, &[("total", 1)], 1),
            sample(&p, &[("total", 2)], 2),
        ]);
        let props = infer(&log, 1, 16);
        assert!(props.iter().any(|pr| pr.formula
            == PropertyFormula::LowerBound {
                var: "total".to_string(),
                bound: 0
            }));
    }

    #[test]
    fn upper_bound_emits_overfit_candidate() {
        let p = ProgramPoint::exit("available_products");
        let log = log_of(vec![
            sample(&p, &[("return", 10)], 0),
            sample(&p, &[("return", 25)], 1),
            sample(&p, &[("return", 3)], 2),
            sample(&p, &[("return", 7)], 3),
        ]);
        let props = infer(&log, 1, 16);
        assert!(props.iter().any(|pr| pr.formula
            == PropertyFormula::UpperBound {
                var: "return".to_string(),
                bound: 25
            }));
    }

    #[test]
    fn eq_const_suppresses_single_var_templates() {
        let p = ProgramPoint::exit("f");
        let log = log_of(vec![
            sample(&p, &[("x", 4)], 0),
            sample(&p, &[("x", 4)], 1),
        ]);
        let props = infer(&log, 1, 16);
        let kinds: Vec<u8> = props.iter().map(|pr| pr.formula.kind_rank()).collect();
        assert_eq!(kinds, vec![0], "only EqConst expected, got {props:?}");
    }

    #[test]
    fn equal_vars_suppress_offset_zero() {
        let p = ProgramPoint::exit("f");
        let log = log_of(vec![
            sample(&p, &[("a", 1), ("b", 1)], 0),
            sample(&p, &[("a", 5), ("b", 5)], 1),
        ]);
        let props = infer(&log, 1, 16);
        assert!(props.iter().any(
            |pr| matches!(&pr.formula, PropertyFormula::RelVarVar { op: RelOp::Eq, .. })
        ));
        assert!(!props
            .iter()
            .any(|pr| matches!(&pr.formula, PropertyFormula::OffsetEq { .. })));
    }

    #[test]
    fn min_support_filters_sparse_points() {
        let p = ProgramPoint::exit("f");
        let log = log_of(vec![sample(&p, &[("x", 1)], 0)]);
        assert!(infer(&log, 2, 16).is_empty());
        assert!(!infer(&log, 1, 16).is_empty());
    }

    #[test]
    fn holds_rejects_point_mismatch() {
        let p = Property::new(
            ProgramPoint::exit("f"),
            PropertyFormula::NonZero { var: "x".to_string() },
        );
        let s = sample(&ProgramPoint::entry("f"), &[("x", 1)], 0);
        assert!(holds(&p, &s, 16).is_err());
    }

    #[test]
    fn holds_on_upgrade_sample_with_negative_return() {
        let p = Property::new(
            ProgramPoint::exit("is_available"),
            PropertyFormula::OneOf {
                var: "return".to_string(),
                values: vec![0, 1],
            },
        );
        let s = sample(
            &ProgramPoint::exit("is_available"),
            &[("prod.items", -1), ("return", -1)],
            0,
        );
        assert_eq!(holds(&p, &s, 16), Ok(false));
    }

    /// Soundness: everything inferred holds on every sample it came from.
    #[test]
    fn inferred_properties_hold_on_their_log() {
        let p = ProgramPoint::exit("g");
        let log = log_of(vec![
            sample(&p, &[("a", 3), ("b", 5), ("return", 8)], 0),
            sample(&p, &[("a", -1), ("b", 1), ("return", 0)], 1),
            sample(&p, &[("a", 0), ("b", 2), ("return", 2)], 2),
        ]);
        let props = infer(&log, 1, 16);
        assert!(!props.is_empty());
        for pr in &props {
            for s in &log.samples {
                assert_eq!(holds(pr, s, 16), Ok(true), "{}", pr.formula.text());
            }
        }
    }

    /// Completeness against brute-force template enumeration on a small log.
    #[test]
    fn template_completeness_brute_force() {
        let p = ProgramPoint::exit("g");
        let log = log_of(vec![
            sample(&p, &[("a", 3), ("b", 5), ("return", 8)], 0),
            sample(&p, &[("a", 1), ("b", 3), ("return", 4)], 1),
            sample(&p, &[("a", 0), ("b", 2), ("return", 2)], 2),
        ]);
        let props = infer(&log, 1, 16);

        // enumerate candidate instances independently
        let vars = ["a", "b", "return"];
        let consts: Vec<i64> = (-10..=10).collect();
        let mut candidates: Vec<PropertyFormula> = Vec::new();
        for v in vars {
            for c in &consts {
                candidates.push(PropertyFormula::EqConst { var: v.into(), value: *c });
            }
            candidates.push(PropertyFormula::NonZero { var: v.into() });
        }
        for v in vars {
            for w in vars {
                if v < w {
                    for op in [RelOp::Eq, RelOp::Ne, RelOp::Ge, RelOp::Le] {
                        candidates.push(PropertyFormula::RelVarVar {
                            lhs: v.into(),
                            op,
                            rhs: w.into(),
                        });
                    }
                    for c in &consts {
                        candidates.push(PropertyFormula::OffsetEq {
                            lhs: v.into(),
                            rhs: w.into(),
                            offset: *c,
                        });
                    }
                }
            }
        }
        let emitted: Vec<&PropertyFormula> = props.iter().map(|pr| &pr.formula).collect();
        for cand in candidates {
            let holds_all = log
                .samples
                .iter()
                .all(|s| cand.eval(&s.binding_map(), 16) == Some(true));
            if !holds_all {
                assert!(!emitted.contains(&&cand), "unsound emit: {}", cand.text());
                continue;
            }
            // account for suppression and bound canonicalization
            let suppressed = match &cand {
                PropertyFormula::NonZero { var } => log
                    .samples
                    .iter()
                    .map(|s| value_of(s, var))
                    .collect::<std::collections::BTreeSet<_>>()
                    .len()
                    == 1,
                PropertyFormula::EqConst { .. } => false,
                PropertyFormula::OffsetEq { lhs, rhs, offset } => {
                    *offset == 0
                        && log
                            .samples
                            .iter()
                            .all(|s| value_of(s, lhs) == value_of(s, rhs))
                }
                _ => false,
            };
            if !suppressed && matches!(cand, PropertyFormula::EqConst { .. } | PropertyFormula::RelVarVar { .. } | PropertyFormula::OffsetEq { .. } | PropertyFormula::NonZero { .. }) {
                assert!(
                    emitted.contains(&&cand),
                    "missing instance: {}",
                    cand.text()
                );
            }
        }
    }
}
