//! CDCL SAT solver: two watched literals, first-UIP clause learning,
//! activity-based branching with phase saving, geometric restarts, and a
//! conflict/time budget so pathological queries degrade to Unknown instead
//! of hanging the pipeline.

use super::cnf::Cnf;
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct SolverBudget {
    pub max_conflicts: u64,
    pub timeout: Duration,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget {
            max_conflicts: 2_000_000,
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug)]
pub enum SolveResult {
    /// Total assignment indexed by variable (slot 0 unused). Unassigned
    /// variables default to false so models are always total.
    Sat(Vec<bool>),
    Unsat,
    /// Budget exhausted.
    Unknown,
}

const UNASSIGNED: u8 = 2;

#[derive(Clone, Copy, PartialEq, Eq)]
struct Lit(u32); // variable << 1 | sign, sign 1 = negated

impl Lit {
    fn from_dimacs(l: i32) -> Lit {
        let var = l.unsigned_abs();
        Lit(var << 1 | u32::from(l < 0))
    }

    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    fn neg(self) -> Lit {
        Lit(self.0 ^ 1)
    }

    fn polarity(self) -> u8 {
        // value a variable must take to satisfy this literal
        u8::from(self.0 & 1 == 0)
    }
}

struct Clause {
    lits: Vec<Lit>,
    learned: bool,
    activity: f64,
}

struct Solver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>, // literal code -> clause indices watching it
    assign: Vec<u8>,          // var -> 0 | 1 | UNASSIGNED
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    prop_head: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    saved_phase: Vec<u8>,
    order: Vec<usize>, // lazily cleaned heap substitute: sorted scan
    conflicts: u64,
    seen: Vec<bool>,
}

impl Solver {
    fn new(nvars: usize) -> Solver {
        Solver {
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * (nvars + 1)],
            assign: vec![UNASSIGNED; nvars + 1],
            level: vec![0; nvars + 1],
            reason: vec![None; nvars + 1],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            prop_head: 0,
            activity: vec![0.0; nvars + 1],
            var_inc: 1.0,
            cla_inc: 1.0,
            saved_phase: vec![0; nvars + 1],
            order: (1..=nvars).collect(),
            conflicts: 0,
            seen: vec![false; nvars + 1],
        }
    }

    fn value(&self, l: Lit) -> u8 {
        let v = self.assign[l.var()];
        if v == UNASSIGNED {
            UNASSIGNED
        } else {
            u8::from(v == l.polarity())
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        debug_assert_eq!(self.value(l), UNASSIGNED);
        self.assign[l.var()] = l.polarity();
        self.level[l.var()] = self.decision_level();
        self.reason[l.var()] = reason;
        self.saved_phase[l.var()] = l.polarity();
        self.trail.push(l);
    }

    /// Returns conflicting clause index, if any.
    fn propagate(&mut self) -> Option<usize> {
        while self.prop_head < self.trail.len() {
            let l = self.trail[self.prop_head];
            self.prop_head += 1;
            let falsified = l.neg();
            let mut watch_list = std::mem::take(&mut self.watches[falsified.0 as usize]);
            let mut i = 0;
            while i < watch_list.len() {
                let ci = watch_list[i];
                // keep the falsified literal in slot 1
                if self.clauses[ci].lits[0] == falsified {
                    self.clauses[ci].lits.swap(0, 1);
                }
                let first = self.clauses[ci].lits[0];
                if self.value(first) == 1 {
                    i += 1;
                    continue;
                }
                // look for a replacement watch
                let mut moved = false;
                for k in 2..self.clauses[ci].lits.len() {
                    let cand = self.clauses[ci].lits[k];
                    if self.value(cand) != 0 {
                        self.clauses[ci].lits.swap(1, k);
                        self.watches[cand.0 as usize].push(ci);
                        watch_list.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if self.value(first) == 0 {
                    // conflict: restore remaining watches
                    self.watches[falsified.0 as usize].extend(watch_list.drain(..));
                    return Some(ci);
                }
                self.enqueue(first, Some(ci));
                i += 1;
            }
            self.watches[falsified.0 as usize] = watch_list;
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
    }

    fn bump_clause(&mut self, ci: usize) {
        self.clauses[ci].activity += self.cla_inc;
        if self.clauses[ci].activity > 1e20 {
            for c in &mut self.clauses {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns (learned clause, backtrack level).
    fn analyze(&mut self, conflict: usize) -> (Vec<Lit>, u32) {
        let mut learned: Vec<Lit> = vec![Lit(0)]; // slot 0 = asserting literal
        let mut counter = 0usize;
        let mut ci = conflict;
        let mut idx = self.trail.len();
        let mut asserting = None;
        loop {
            self.bump_clause(ci);
            let skip = usize::from(asserting.is_some());
            for k in skip..self.clauses[ci].lits.len() {
                let q = self.clauses[ci].lits[k];
                let v = q.var();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] == self.decision_level() {
                        counter += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            // walk the trail backwards to the next marked literal
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var()] {
                    break;
                }
            }
            let p = self.trail[idx];
            self.seen[p.var()] = false;
            counter -= 1;
            if counter == 0 {
                asserting = Some(p.neg());
                break;
            }
            ci = self.reason[p.var()].expect("non-decision must have a reason");
            asserting = Some(p.neg());
            // re-enter loop with reason clause; slot 0 of a reason clause is
            // the propagated literal itself, which is `p`, so skip it
        }
        learned[0] = asserting.expect("conflict at level > 0");
        for l in &learned {
            self.seen[l.var()] = false;
        }
        let bt = if learned.len() == 1 {
            0
        } else {
            // second-highest level; move its literal to slot 1 for watching
            let mut max_i = 1;
            for k in 2..learned.len() {
                if self.level[learned[k].var()] > self.level[learned[max_i].var()] {
                    max_i = k;
                }
            }
            learned.swap(1, max_i);
            self.level[learned[1].var()]
        };
        (learned, bt)
    }

    fn backtrack(&mut self, to_level: u32) {
        while self.decision_level() > to_level {
            let lim = self.trail_lim.pop().expect("level underflow");
            for l in self.trail.drain(lim..) {
                self.assign[l.var()] = UNASSIGNED;
                self.reason[l.var()] = None;
            }
        }
        self.prop_head = self.trail.len();
    }

    fn attach(&mut self, ci: usize) {
        let c = &self.clauses[ci];
        self.watches[c.lits[0].0 as usize].push(ci);
        self.watches[c.lits[1].0 as usize].push(ci);
    }

    fn pick_branch(&self) -> Option<Lit> {
        let mut best: Option<usize> = None;
        for &v in &self.order {
            if self.assign[v] == UNASSIGNED
                && best.is_none_or(|b| self.activity[v] > self.activity[b])
            {
                best = Some(v);
            }
        }
        best.map(|v| Lit((v as u32) << 1 | u32::from(self.saved_phase[v] == 0)))
    }

    fn reduce_learned(&mut self) {
        // drop the least active half of long learned clauses; to keep watch
        // indices valid we only clear and reattach
        let mut learned: Vec<usize> = (0..self.clauses.len())
            .filter(|&i| self.clauses[i].learned && self.clauses[i].lits.len() > 2)
            .filter(|&i| {
                // a clause locked as a reason must stay
                !self
                    .clauses[i]
                    .lits
                    .first()
                    .is_some_and(|l| self.reason[l.var()] == Some(i))
            })
            .collect();
        if learned.len() < 2000 {
            return;
        }
        learned.sort_by(|&a, &b| {
            self.clauses[a]
                .activity
                .partial_cmp(&self.clauses[b].activity)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let drop: std::collections::HashSet<usize> =
            learned[..learned.len() / 2].iter().copied().collect();
        for ci in &drop {
            self.clauses[*ci].lits.clear();
        }
        for wl in &mut self.watches {
            wl.retain(|ci| !drop.contains(ci));
        }
    }
}

pub fn solve(cnf: &Cnf, budget: &SolverBudget) -> SolveResult {
    let nvars = cnf.var_count as usize;
    let mut s = Solver::new(nvars);
    for clause in &cnf.clauses {
        let mut lits: Vec<Lit> = clause.iter().map(|&l| Lit::from_dimacs(l)).collect();
        lits.sort_by_key(|l| l.0);
        lits.dedup();
        if lits.iter().any(|l| lits.contains(&l.neg())) {
            continue; // tautology
        }
        match lits.len() {
            0 => return SolveResult::Unsat,
            1 => {
                match s.value(lits[0]) {
                    0 => return SolveResult::Unsat,
                    1 => {}
                    _ => s.enqueue(lits[0], None),
                }
            }
            _ => {
                let ci = s.clauses.len();
                s.clauses.push(Clause {
                    lits,
                    learned: false,
                    activity: 0.0,
                });
                s.attach(ci);
            }
        }
    }
    if s.propagate().is_some() {
        return SolveResult::Unsat;
    }

    let start = Instant::now();
    let mut restart_limit = 100u64;
    let mut conflicts_since_restart = 0u64;
    loop {
        if let Some(conflict) = s.propagate() {
            s.conflicts += 1;
            conflicts_since_restart += 1;
            if s.decision_level() == 0 {
                return SolveResult::Unsat;
            }
            if s.conflicts >= budget.max_conflicts
                || (s.conflicts % 1024 == 0 && start.elapsed() > budget.timeout)
            {
                return SolveResult::Unknown;
            }
            let (learned, bt) = s.analyze(conflict);
            s.backtrack(bt);
            if learned.len() == 1 {
                s.enqueue(learned[0], None);
            } else {
                let ci = s.clauses.len();
                s.clauses.push(Clause {
                    lits: learned,
                    learned: true,
                    activity: 0.0,
                });
                s.attach(ci);
                s.bump_clause(ci);
                let first = s.clauses[ci].lits[0];
                s.enqueue(first, Some(ci));
            }
            s.var_inc /= 0.95;
            s.cla_inc /= 0.999;
        } else {
            if conflicts_since_restart >= restart_limit {
                conflicts_since_restart = 0;
                restart_limit = restart_limit.saturating_mul(3) / 2;
                s.backtrack(0);
                s.reduce_learned();
                continue;
            }
            match s.pick_branch() {
                None => {
                    let mut model = vec![false; nvars + 1];
                    for v in 1..=nvars {
                        model[v] = s.assign[v] == 1;
                    }
                    return SolveResult::Sat(model);
                }
                Some(l) => {
                    s.trail_lim.push(s.trail.len());
                    s.enqueue(l, None);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cnf_of(clauses: &[&[i32]]) -> Cnf {
        let var_count = clauses
            .iter()
            .flat_map(|c| c.iter())
            .map(|l| l.abs())
            .max()
            .unwrap_or(0);
        Cnf {
            clauses: clauses.iter().map(|c| c.to_vec()).collect(),
            var_count,
            input_vars: Default::default(),
        }
    }

    fn is_sat(clauses: &[&[i32]]) -> bool {
        match solve(&cnf_of(clauses), &SolverBudget::default()) {
            SolveResult::Sat(model) => {
                // every sat answer must come with a model satisfying all clauses
                for c in clauses {
                    assert!(
                        c.iter().any(|&l| model[l.unsigned_abs() as usize] == (l > 0)),
                        "model does not satisfy {c:?}"
                    );
                }
                true
            }
            SolveResult::Unsat => false,
            SolveResult::Unknown => panic!("budget exhausted on tiny instance"),
        }
    }

    #[test]
    fn empty_formula_is_sat() {
        assert!(is_sat(&[]));
    }

    #[test]
    fn empty_clause_is_unsat() {
        assert!(!is_sat(&[&[]]));
    }

    #[test]
    fn unit_contradiction_is_unsat() {
        assert!(!is_sat(&[&[1], &[-1]]));
    }

    #[test]
    fn simple_chains() {
        assert!(is_sat(&[&[1, 2], &[-1, 3], &[-3, -2]]));
        assert!(!is_sat(&[&[1], &[-1, 2], &[-2, 3], &[-3]]));
    }

    #[test]
    fn pigeonhole_3_into_2_is_unsat() {
        // p(i,j): pigeon i in hole j; vars 1..=6 as i*2+j+1
        let v = |i: i32, j: i32| i * 2 + j + 1;
        let mut clauses: Vec<Vec<i32>> = Vec::new();
        for i in 0..3 {
            clauses.push(vec![v(i, 0), v(i, 1)]);
        }
        for j in 0..2 {
            for a in 0..3 {
                for b in (a + 1)..3 {
                    clauses.push(vec![-v(a, j), -v(b, j)]);
                }
            }
        }
        let refs: Vec<&[i32]> = clauses.iter().map(|c| c.as_slice()).collect();
        assert!(!is_sat(&refs));
    }

    #[test]
    fn models_are_total() {
        // var 2 never constrained; model must still assign it
        let cnf = cnf_of(&[&[1], &[3, -3]]);
        match solve(&cnf, &SolverBudget::default()) {
            SolveResult::Sat(model) => assert_eq!(model.len(), 4),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn random_3sat_against_truth_table() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let nvars = rng.gen_range(1..=10);
            let nclauses = rng.gen_range(1..=40);
            let clauses: Vec<Vec<i32>> = (0..nclauses)
                .map(|_| {
                    (0..3)
                        .map(|_| {
                            let v = rng.gen_range(1..=nvars) as i32;
                            if rng.gen_bool(0.5) {
                                v
                            } else {
                                -v
                            }
                        })
                        .collect()
                })
                .collect();
            let brute = (0..1u32 << nvars).any(|bits| {
                clauses.iter().all(|c| {
                    c.iter().any(|&l| {
                        let val = bits >> (l.unsigned_abs() - 1) & 1 == 1;
                        val == (l > 0)
                    })
                })
            });
            let refs: Vec<&[i32]> = clauses.iter().map(|c| c.as_slice()).collect();
            assert_eq!(is_sat(&refs), brute, "clauses: {clauses:?}");
        }
    }
}
