//! Properties: Boolean assertions over the variables visible at a program
//! point, instantiated from a fixed set of templates.

use crate::point::{PointKind, ProgramPoint};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;

/// Sign-extend the low `w` bits of `v`, i.e. wrap into W-bit two's complement.
pub fn wrap(v: i64, w: u32) -> i64 {
    debug_assert!((1..=63).contains(&w) || w == 64);
    if w >= 64 {
        v
    } else {
        (v << (64 - w)) >> (64 - w)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum RelOp {
    Eq,
    Ne,
    Ge,
    Le,
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
            RelOp::Ge => ">=",
            RelOp::Le => "<=",
        };
        write!(f, "{s}")
    }
}

/// One of the seven supported property templates. Variable names are
/// flattened: record fields as `rec.field`, array elements as `arr.0`, and
/// the return pseudo-variable as `return`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum PropertyFormula {
    /// `v == c` on every sample.
    EqConst { var: String, value: i64 },
    /// `v >= c`.
    LowerBound { var: String, bound: i64 },
    /// `v <= c`.
    UpperBound { var: String, bound: i64 },
    /// `v != 0`.
    NonZero { var: String },
    /// `v == c1 || ... || v == ck`, 2 <= k <= 3, sorted and duplicate-free.
    OneOf { var: String, values: Vec<i64> },
    /// `v <op> w`.
    RelVarVar { lhs: String, op: RelOp, rhs: String },
    /// `v == w + c` under W-bit wraparound.
    OffsetEq { lhs: String, rhs: String, offset: i64 },
}

impl PropertyFormula {
    /// Rank used for canonical ordering of inference output.
    pub fn kind_rank(&self) -> u8 {
        match self {
            PropertyFormula::EqConst { .. } => 0,
            PropertyFormula::LowerBound { .. } => 1,
            PropertyFormula::UpperBound { .. } => 2,
            PropertyFormula::NonZero { .. } => 3,
            PropertyFormula::OneOf { .. } => 4,
            PropertyFormula::RelVarVar { .. } => 5,
            PropertyFormula::OffsetEq { .. } => 6,
        }
    }

    pub fn vars(&self) -> Vec<&str> {
        match self {
            PropertyFormula::EqConst { var, .. }
            | PropertyFormula::LowerBound { var, .. }
            | PropertyFormula::UpperBound { var, .. }
            | PropertyFormula::NonZero { var }
            | PropertyFormula::OneOf { var, .. } => vec![var],
            PropertyFormula::RelVarVar { lhs, rhs, .. }
            | PropertyFormula::OffsetEq { lhs, rhs, .. } => vec![lhs, rhs],
        }
    }

    /// Rewrite every occurrence of variable `from` to `to` (used to bind the
    /// `return` pseudo-variable to a concrete temporary during
    /// instrumentation).
    pub fn rename_var(&self, from: &str, to: &str) -> PropertyFormula {
        let r = |v: &String| {
            if v == from {
                to.to_string()
            } else {
                v.clone()
            }
        };
        match self {
            PropertyFormula::EqConst { var, value } => PropertyFormula::EqConst {
                var: r(var),
                value: *value,
            },
            PropertyFormula::LowerBound { var, bound } => PropertyFormula::LowerBound {
                var: r(var),
                bound: *bound,
            },
            PropertyFormula::UpperBound { var, bound } => PropertyFormula::UpperBound {
                var: r(var),
                bound: *bound,
            },
            PropertyFormula::NonZero { var } => PropertyFormula::NonZero { var: r(var) },
            PropertyFormula::OneOf { var, values } => PropertyFormula::OneOf {
                var: r(var),
                values: values.clone(),
            },
            PropertyFormula::RelVarVar { lhs, op, rhs } => PropertyFormula::RelVarVar {
                lhs: r(lhs),
                op: *op,
                rhs: r(rhs),
            },
            PropertyFormula::OffsetEq { lhs, rhs, offset } => PropertyFormula::OffsetEq {
                lhs: r(lhs),
                rhs: r(rhs),
                offset: *offset,
            },
        }
    }

    /// Evaluate over concrete W-bit signed bindings. `None` when a referenced
    /// variable is absent from the bindings.
    pub fn eval(&self, bindings: &BTreeMap<String, i64>, w: u32) -> Option<bool> {
        let get = |v: &str| bindings.get(v).copied();
        Some(match self {
            PropertyFormula::EqConst { var, value } => get(var)? == *value,
            PropertyFormula::LowerBound { var, bound } => get(var)? >= *bound,
            PropertyFormula::UpperBound { var, bound } => get(var)? <= *bound,
            PropertyFormula::NonZero { var } => get(var)? != 0,
            PropertyFormula::OneOf { var, values } => values.contains(&get(var)?),
            PropertyFormula::RelVarVar { lhs, op, rhs } => {
                let (a, b) = (get(lhs)?, get(rhs)?);
                match op {
                    RelOp::Eq => a == b,
                    RelOp::Ne => a != b,
                    RelOp::Ge => a >= b,
                    RelOp::Le => a <= b,
                }
            }
            PropertyFormula::OffsetEq { lhs, rhs, offset } => {
                get(lhs)? == wrap(get(rhs)?.wrapping_add(*offset), w)
            }
        })
    }

    /// Render in MiniC expression syntax, e.g. `total >= 0` or
    /// `return == 0 || return == 1`.
    pub fn text(&self) -> String {
        match self {
            PropertyFormula::EqConst { var, value } => format!("{var} == {value}"),
            PropertyFormula::LowerBound { var, bound } => format!("{var} >= {bound}"),
            PropertyFormula::UpperBound { var, bound } => format!("{var} <= {bound}"),
            PropertyFormula::NonZero { var } => format!("{var} != 0"),
            PropertyFormula::OneOf { var, values } => values
                .iter()
                .map(|c| format!("{var} == {c}"))
                .collect::<Vec<_>>()
                .join(" || "),
            PropertyFormula::RelVarVar { lhs, op, rhs } => format!("{lhs} {op} {rhs}"),
            PropertyFormula::OffsetEq { lhs, rhs, offset } => {
                if *offset < 0 {
                    format!("{lhs} == {rhs} - {}", -offset)
                } else {
                    format!("{lhs} == {rhs} + {offset}")
                }
            }
        }
    }

    /// Parse the textual form produced by [`PropertyFormula::text`].
    pub fn parse_text(s: &str) -> Option<PropertyFormula> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        let is_var = |t: &str| t.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_');
        let int = |t: &str| t.parse::<i64>().ok();
        match toks.as_slice() {
            [v, "!=", "0"] if is_var(v) => Some(PropertyFormula::NonZero { var: v.to_string() }),
            [v, ">=", c] if is_var(v) && !is_var(c) => Some(PropertyFormula::LowerBound {
                var: v.to_string(),
                bound: int(c)?,
            }),
            [v, "<=", c] if is_var(v) && !is_var(c) => Some(PropertyFormula::UpperBound {
                var: v.to_string(),
                bound: int(c)?,
            }),
            [v, op, w] if is_var(v) && is_var(w) => {
                let op = match *op {
                    "==" => RelOp::Eq,
                    "!=" => RelOp::Ne,
                    ">=" => RelOp::Ge,
                    "<=" => RelOp::Le,
                    _ => return None,
                };
                Some(PropertyFormula::RelVarVar {
                    lhs: v.to_string(),
                    op,
                    rhs: w.to_string(),
                })
            }
            [v, "==", c] if is_var(v) && !is_var(c) => Some(PropertyFormula::EqConst {
                var: v.to_string(),
                value: int(c)?,
            }),
            [v, "==", w, sign @ ("+" | "-"), c] if is_var(v) && is_var(w) => {
                let mut off = int(c)?;
                if *sign == "-" {
                    off = -off;
                }
                Some(PropertyFormula::OffsetEq {
                    lhs: v.to_string(),
                    rhs: w.to_string(),
                    offset: off,
                })
            }
            _ => {
                // OneOf: `v == c1 || v == c2 [|| v == c3]`
                let parts: Vec<&str> = s.split(" || ").collect();
                if parts.len() < 2 || parts.len() > 3 {
                    return None;
                }
                let mut var: Option<String> = None;
                let mut values = Vec::new();
                for p in parts {
                    let t: Vec<&str> = p.split_whitespace().collect();
                    match t.as_slice() {
                        [v, "==", c] if is_var(v) => {
                            if let Some(prev) = &var {
                                if prev != v {
                                    return None;
                                }
                            } else {
                                var = Some(v.to_string());
                            }
                            values.push(int(c)?);
                        }
                        _ => return None,
                    }
                }
                Some(PropertyFormula::OneOf { var: var?, values })
            }
        }
    }
}

/// Lifecycle status of a property.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum PropertyStatus {
    Dynamic,
    True,
    Outdated,
    NonRegression,
    Violated,
    Unknown,
    /// The property's point or variables do not exist in the version under
    /// analysis; excluded from both outdated and non-regression sets.
    Unmappable,
}

impl fmt::Display for PropertyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PropertyStatus::Dynamic => "DYNAMIC",
            PropertyStatus::True => "TRUE",
            PropertyStatus::Outdated => "OUTDATED",
            PropertyStatus::NonRegression => "NON_REGRESSION",
            PropertyStatus::Violated => "VIOLATED",
            PropertyStatus::Unknown => "UNKNOWN",
            PropertyStatus::Unmappable => "UNMAPPABLE",
        };
        write!(f, "{s}")
    }
}

impl PropertyStatus {
    pub fn parse(s: &str) -> Option<PropertyStatus> {
        Some(match s {
            "DYNAMIC" => PropertyStatus::Dynamic,
            "TRUE" => PropertyStatus::True,
            "OUTDATED" => PropertyStatus::Outdated,
            "NON_REGRESSION" => PropertyStatus::NonRegression,
            "VIOLATED" => PropertyStatus::Violated,
            "UNKNOWN" => PropertyStatus::Unknown,
            "UNMAPPABLE" => PropertyStatus::Unmappable,
            _ => return None,
        })
    }
}

pub type PropertyId = String;

/// A property anchored at a program point, with its lifecycle status.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Property {
    pub id: PropertyId,
    pub point: ProgramPoint,
    pub formula: PropertyFormula,
    pub status: PropertyStatus,
}

impl Property {
    pub fn new(point: ProgramPoint, formula: PropertyFormula) -> Property {
        let id = property_id(&point, &formula);
        Property {
            id,
            point,
            formula,
            status: PropertyStatus::Dynamic,
        }
    }

    /// One line in the diff-friendly list format:
    /// `<status> <function> <kind> <ordinal?> <formula-text>`.
    pub fn to_line(&self) -> String {
        format!("{} {} {}", self.status, self.point, self.formula.text())
    }

    pub fn parse_line(line: &str) -> Option<Property> {
        let mut toks = line.splitn(3, ' ');
        let status = PropertyStatus::parse(toks.next()?)?;
        let function = toks.next()?.to_string();
        let rest = toks.next()?;
        let (kind, formula_text) = if let Some(r) = rest.strip_prefix("LOOP ") {
            let (ord, f) = r.split_once(' ')?;
            (PointKind::Loop(ord.parse().ok()?), f)
        } else if let Some(r) = rest.strip_prefix("ENTRY ") {
            (PointKind::Entry, r)
        } else if let Some(r) = rest.strip_prefix("EXIT ") {
            (PointKind::Exit, r)
        } else {
            return None;
        };
        let formula = PropertyFormula::parse_text(formula_text)?;
        let point = ProgramPoint::new(function, kind);
        let id = property_id(&point, &formula);
        Some(Property {
            id,
            point,
            formula,
            status,
        })
    }
}

/// Stable content hash of (point, formula).
pub fn property_id(point: &ProgramPoint, formula: &PropertyFormula) -> PropertyId {
    let mut h = Sha256::new();
    h.update(point.to_string().as_bytes());
    h.update(b"|");
    h.update(formula.text().as_bytes());
    let digest = h.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_sixteen_bits() {
        assert_eq!(wrap(65535, 16), -1);
        assert_eq!(wrap(32768, 16), -32768);
        assert_eq!(wrap(32767, 16), 32767);
        assert_eq!(wrap(-32769, 16), 32767);
        assert_eq!(wrap(7, 16), 7);
    }

    #[test]
    fn formula_text_round_trip() {
        let fs = vec![
            PropertyFormula::EqConst { var: "x".into(), value: -3 },
            PropertyFormula::LowerBound { var: "total".into(), bound: 0 },
            PropertyFormula::UpperBound { var: "return".into(), bound: 25 },
            PropertyFormula::NonZero { var: "d".into() },
            PropertyFormula::OneOf { var: "return".into(), values: vec![0, 1] },
            PropertyFormula::RelVarVar {
                lhs: "i".into(),
                op: RelOp::Ge,
                rhs: "total".into(),
            },
            PropertyFormula::OffsetEq {
                lhs: "y".into(),
                rhs: "x".into(),
                offset: -5,
            },
        ];
        for f in fs {
            let t = f.text();
            assert_eq!(PropertyFormula::parse_text(&t), Some(f.clone()), "text: {t}");
        }
    }

    #[test]
    fn property_line_round_trip() {
        let p = Property::new(
            ProgramPoint::loop_head("available_products", 0),
            PropertyFormula::LowerBound { var: "total".into(), bound: 0 },
        );
        let line = p.to_line();
        assert_eq!(line, "DYNAMIC available_products LOOP 0 total >= 0");
        let q = Property::parse_line(&line).unwrap();
        assert_eq!(p.id, q.id);
        assert_eq!(p.point, q.point);
        assert_eq!(p.formula, q.formula);
    }

    #[test]
    fn offset_eq_wraps() {
        let mut b = BTreeMap::new();
        b.insert("y".to_string(), -32768_i64);
        b.insert("x".to_string(), 32767_i64);
        let f = PropertyFormula::OffsetEq {
            lhs: "y".into(),
            rhs: "x".into(),
            offset: 1,
        };
        assert_eq!(f.eval(&b, 16), Some(true));
    }
}
