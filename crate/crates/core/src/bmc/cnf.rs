//! Tseitin conversion from circuit nodes to CNF, plus DIMACS emission for
//! offline inspection.

use super::circuit::{Circuit, Node, NodeId};
use std::collections::HashMap;
use std::fmt::Write as _;

/// A literal is a nonzero integer: variable index (1-based), negative for
/// negation, DIMACS style.
pub type Lit = i32;

#[derive(Default)]
pub struct Cnf {
    pub clauses: Vec<Vec<Lit>>,
    pub var_count: i32,
    /// Solver variable holding circuit input k, when that input is reachable
    /// from the encoded roots.
    pub input_vars: HashMap<u32, i32>,
}

impl Cnf {
    fn fresh(&mut self) -> i32 {
        self.var_count += 1;
        self.var_count
    }
}

struct Encoder<'a> {
    circuit: &'a Circuit,
    cnf: Cnf,
    /// Literal for each encoded node; Not is handled by sign flip, so only
    /// structural nodes get entries.
    memo: HashMap<NodeId, Lit>,
    const_true: Option<Lit>,
}

impl<'a> Encoder<'a> {
    fn lit(&mut self, id: NodeId) -> Lit {
        if let Some(&l) = self.memo.get(&id) {
            return l;
        }
        let l = match self.circuit.node(id) {
            Node::False => {
                let t = self.true_lit();
                -t
            }
            Node::Input(k) => {
                let v = self.cnf.fresh();
                self.cnf.input_vars.insert(k, v);
                v
            }
            Node::Not(a) => -self.lit(a),
            Node::And(a, b) => {
                let la = self.lit(a);
                let lb = self.lit(b);
                let v = self.cnf.fresh();
                self.cnf.clauses.push(vec![-v, la]);
                self.cnf.clauses.push(vec![-v, lb]);
                self.cnf.clauses.push(vec![v, -la, -lb]);
                v
            }
            Node::Or(a, b) => {
                let la = self.lit(a);
                let lb = self.lit(b);
                let v = self.cnf.fresh();
                self.cnf.clauses.push(vec![-v, la, lb]);
                self.cnf.clauses.push(vec![v, -la]);
                self.cnf.clauses.push(vec![v, -lb]);
                v
            }
            Node::Xor(a, b) => {
                let la = self.lit(a);
                let lb = self.lit(b);
                let v = self.cnf.fresh();
                self.cnf.clauses.push(vec![-v, la, lb]);
                self.cnf.clauses.push(vec![-v, -la, -lb]);
                self.cnf.clauses.push(vec![v, la, -lb]);
                self.cnf.clauses.push(vec![v, -la, lb]);
                v
            }
        };
        self.memo.insert(id, l);
        l
    }

    fn true_lit(&mut self) -> Lit {
        if let Some(t) = self.const_true {
            return t;
        }
        let t = self.cnf.fresh();
        self.cnf.clauses.push(vec![t]);
        self.const_true = Some(t);
        t
    }
}

/// Encode the conjunction of `roots` as a CNF that is satisfiable iff some
/// input assignment makes every root true.
pub fn encode(circuit: &Circuit, roots: &[NodeId]) -> Cnf {
    let mut enc = Encoder {
        circuit,
        cnf: Cnf::default(),
        memo: HashMap::new(),
        const_true: None,
    };
    for &r in roots {
        let l = enc.lit(r);
        enc.cnf.clauses.push(vec![l]);
    }
    enc.cnf
}

/// Render in DIMACS format, with input bindings recorded as comments.
pub fn to_dimacs(cnf: &Cnf) -> String {
    let mut s = String::new();
    let mut inputs: Vec<(&u32, &i32)> = cnf.input_vars.iter().collect();
    inputs.sort();
    for (k, v) in inputs {
        let _ = writeln!(s, "c input {k} -> var {v}");
    }
    let _ = writeln!(s, "p cnf {} {}", cnf.var_count, cnf.clauses.len());
    for clause in &cnf.clauses {
        for lit in clause {
            let _ = write!(s, "{lit} ");
        }
        let _ = writeln!(s, "0");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmc::circuit::BitVec;
    use crate::bmc::solver::{solve, SolveResult, SolverBudget};

    #[test]
    fn trivially_false_root_is_unsat() {
        let circuit = Circuit::new();
        let cnf = encode(&circuit, &[circuit.f()]);
        assert!(matches!(
            solve(&cnf, &SolverBudget::default()),
            SolveResult::Unsat
        ));
    }

    #[test]
    fn contradiction_between_roots_is_unsat() {
        let mut circuit = Circuit::new();
        let x = circuit.fresh_input();
        let nx = circuit.not(x);
        let cnf = encode(&circuit, &[x, nx]);
        assert!(matches!(
            solve(&cnf, &SolverBudget::default()),
            SolveResult::Unsat
        ));
    }

    #[test]
    fn equation_sat_with_expected_model() {
        // x + 3 == 5 over 8 bits has exactly one solution, x == 2
        let mut circuit = Circuit::new();
        let x = BitVec::fresh(&mut circuit, 8);
        let three = BitVec::constant(&mut circuit, 3, 8);
        let five = BitVec::constant(&mut circuit, 5, 8);
        let sum = x.add(&mut circuit, &three);
        let eq = sum.eq(&mut circuit, &five);
        let cnf = encode(&circuit, &[eq]);
        match solve(&cnf, &SolverBudget::default()) {
            SolveResult::Sat(model) => {
                let assign = |k: u32| cnf.input_vars.get(&k).is_some_and(|&v| model[v as usize]);
                assert_eq!(x.decode(&circuit, &assign), 2);
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn dimacs_shape() {
        let mut circuit = Circuit::new();
        let a = circuit.fresh_input();
        let b = circuit.fresh_input();
        let both = circuit.and(a, b);
        let cnf = encode(&circuit, &[both]);
        let text = to_dimacs(&cnf);
        let header = text
            .lines()
            .find(|l| l.starts_with("p cnf"))
            .expect("missing header");
        let parts: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(parts[2].parse::<usize>().unwrap(), cnf.var_count as usize);
        assert_eq!(parts[3].parse::<usize>().unwrap(), cnf.clauses.len());
        assert!(text.trim_end().lines().skip_while(|l| !l.starts_with("p ")).skip(1).all(|l| l.ends_with(" 0")));
    }
}
