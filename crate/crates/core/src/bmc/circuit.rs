//! Hash-consed boolean circuit over which W-bit two's-complement arithmetic
//! is built. Nodes are immutable and deduplicated; the only primitives are
//! False, inputs, and Not/And/Or/Xor with constant folding, so downstream
//! Tseitin conversion stays small.

use std::collections::HashMap;

pub type NodeId = u32;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Node {
    False,
    Input(u32),
    Not(NodeId),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Xor(NodeId, NodeId),
}

pub struct Circuit {
    nodes: Vec<Node>,
    memo: HashMap<Node, NodeId>,
    input_count: u32,
}

impl Circuit {
    pub fn new() -> Circuit {
        let mut c = Circuit {
            nodes: Vec::new(),
            memo: HashMap::new(),
            input_count: 0,
        };
        c.intern(Node::False);
        c
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn input_count(&self) -> u32 {
        self.input_count
    }

    fn intern(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.memo.get(&n) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(n);
        self.memo.insert(n, id);
        id
    }

    pub fn f(&self) -> NodeId {
        0
    }

    pub fn t(&mut self) -> NodeId {
        self.not(0)
    }

    pub fn constant(&mut self, b: bool) -> NodeId {
        if b {
            self.t()
        } else {
            self.f()
        }
    }

    pub fn fresh_input(&mut self) -> NodeId {
        let k = self.input_count;
        self.input_count += 1;
        self.intern(Node::Input(k))
    }

    pub fn not(&mut self, a: NodeId) -> NodeId {
        if let Node::Not(inner) = self.node(a) {
            return inner;
        }
        self.intern(Node::Not(a))
    }

    fn is_true(&self, a: NodeId) -> bool {
        self.node(a) == Node::Not(0)
    }

    pub fn and(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if a == 0 || b == 0 {
            return 0;
        }
        if self.is_true(a) {
            return b;
        }
        if self.is_true(b) {
            return a;
        }
        if a == b {
            return a;
        }
        if self.node(a) == Node::Not(b) || self.node(b) == Node::Not(a) {
            return 0;
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.intern(Node::And(a, b))
    }

    pub fn or(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if self.is_true(a) || self.is_true(b) {
            return self.t();
        }
        if a == 0 {
            return b;
        }
        if b == 0 {
            return a;
        }
        if a == b {
            return a;
        }
        if self.node(a) == Node::Not(b) || self.node(b) == Node::Not(a) {
            return self.t();
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.intern(Node::Or(a, b))
    }

    pub fn xor(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if a == 0 {
            return b;
        }
        if b == 0 {
            return a;
        }
        if self.is_true(a) {
            return self.not(b);
        }
        if self.is_true(b) {
            return self.not(a);
        }
        if a == b {
            return 0;
        }
        if self.node(a) == Node::Not(b) || self.node(b) == Node::Not(a) {
            return self.t();
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.intern(Node::Xor(a, b))
    }

    pub fn implies(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let na = self.not(a);
        self.or(na, b)
    }

    pub fn mux(&mut self, sel: NodeId, then_v: NodeId, else_v: NodeId) -> NodeId {
        let a = self.and(sel, then_v);
        let ns = self.not(sel);
        let b = self.and(ns, else_v);
        self.or(a, b)
    }

    /// Evaluate under a total assignment of inputs (index -> bool).
    pub fn eval(&self, id: NodeId, inputs: &dyn Fn(u32) -> bool) -> bool {
        let mut memo: Vec<Option<bool>> = vec![None; self.nodes.len()];
        self.eval_memo(id, inputs, &mut memo)
    }

    fn eval_memo(&self, id: NodeId, inputs: &dyn Fn(u32) -> bool, memo: &mut Vec<Option<bool>>) -> bool {
        if let Some(v) = memo[id as usize] {
            return v;
        }
        let v = match self.node(id) {
            Node::False => false,
            Node::Input(k) => inputs(k),
            Node::Not(a) => !self.eval_memo(a, inputs, memo),
            Node::And(a, b) => self.eval_memo(a, inputs, memo) && self.eval_memo(b, inputs, memo),
            Node::Or(a, b) => self.eval_memo(a, inputs, memo) || self.eval_memo(b, inputs, memo),
            Node::Xor(a, b) => self.eval_memo(a, inputs, memo) ^ self.eval_memo(b, inputs, memo),
        };
        memo[id as usize] = Some(v);
        v
    }
}

impl Default for Circuit {
    fn default() -> Self {
        Circuit::new()
    }
}

/// W-bit word as node ids, least significant bit first.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitVec(pub Vec<NodeId>);

impl BitVec {
    pub fn width(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn constant(c: &mut Circuit, value: i64, width: u32) -> BitVec {
        BitVec((0..width).map(|i| c.constant((value >> i) & 1 == 1)).collect())
    }

    pub fn fresh(c: &mut Circuit, width: u32) -> BitVec {
        BitVec((0..width).map(|_| c.fresh_input()).collect())
    }

    pub fn msb(&self) -> NodeId {
        *self.0.last().expect("zero-width word")
    }

    pub fn mux(c: &mut Circuit, sel: NodeId, then_v: &BitVec, else_v: &BitVec) -> BitVec {
        BitVec(
            then_v
                .0
                .iter()
                .zip(&else_v.0)
                .map(|(&a, &b)| c.mux(sel, a, b))
                .collect(),
        )
    }

    pub fn is_zero(&self, c: &mut Circuit) -> NodeId {
        let mut any = c.f();
        for &b in &self.0 {
            any = c.or(any, b);
        }
        c.not(any)
    }

    pub fn eq(&self, c: &mut Circuit, rhs: &BitVec) -> NodeId {
        let mut acc = c.t();
        for (&a, &b) in self.0.iter().zip(&rhs.0) {
            let x = c.xor(a, b);
            let nx = c.not(x);
            acc = c.and(acc, nx);
        }
        acc
    }

    fn add_with_carry(c: &mut Circuit, a: &BitVec, b: &BitVec, mut carry: NodeId) -> BitVec {
        let mut out = Vec::with_capacity(a.0.len());
        for (&x, &y) in a.0.iter().zip(&b.0) {
            let xy = c.xor(x, y);
            out.push(c.xor(xy, carry));
            let g = c.and(x, y);
            let p = c.and(xy, carry);
            carry = c.or(g, p);
        }
        BitVec(out)
    }

    pub fn add(&self, c: &mut Circuit, rhs: &BitVec) -> BitVec {
        let zero = c.f();
        Self::add_with_carry(c, self, rhs, zero)
    }

    pub fn neg(&self, c: &mut Circuit) -> BitVec {
        let zero = BitVec::constant(c, 0, self.width());
        zero.sub(c, self)
    }

    pub fn sub(&self, c: &mut Circuit, rhs: &BitVec) -> BitVec {
        let inv = BitVec(rhs.0.iter().map(|&b| c.not(b)).collect());
        let one = c.t();
        Self::add_with_carry(c, self, &inv, one)
    }

    pub fn mul(&self, c: &mut Circuit, rhs: &BitVec) -> BitVec {
        let w = self.0.len();
        let mut acc = BitVec::constant(c, 0, w as u32);
        for (i, &bit) in rhs.0.iter().enumerate() {
            // self << i, gated on rhs bit i
            let mut shifted = vec![c.f(); i];
            for &s in self.0.iter().take(w - i) {
                shifted.push(c.and(bit, s));
            }
            acc = acc.add(c, &BitVec(shifted));
        }
        acc
    }

    /// Unsigned less-than.
    pub fn ult(&self, c: &mut Circuit, rhs: &BitVec) -> NodeId {
        // a < b iff borrow out of a - b
        let mut borrow = c.f();
        for (&x, &y) in self.0.iter().zip(&rhs.0) {
            // borrow' = (!x & y) | ((!x | y) & borrow)
            let nx = c.not(x);
            let t1 = c.and(nx, y);
            let t2 = c.or(nx, y);
            let t3 = c.and(t2, borrow);
            borrow = c.or(t1, t3);
        }
        borrow
    }

    /// Signed less-than: flip both sign bits, compare unsigned.
    pub fn slt(&self, c: &mut Circuit, rhs: &BitVec) -> NodeId {
        let mut a = self.clone();
        let mut b = rhs.clone();
        let la = a.0.len() - 1;
        a.0[la] = c.not(a.0[la]);
        b.0[la] = c.not(b.0[la]);
        a.ult(c, &b)
    }

    pub fn sle(&self, c: &mut Circuit, rhs: &BitVec) -> NodeId {
        let gt = rhs.slt(c, self);
        c.not(gt)
    }

    /// Restoring unsigned division: (quotient, remainder). Divisor zero gives
    /// quotient all-ones and remainder = dividend, but callers mux that case
    /// away anyway.
    pub fn udivrem(&self, c: &mut Circuit, rhs: &BitVec) -> (BitVec, BitVec) {
        let w = self.0.len();
        let mut rem = BitVec::constant(c, 0, w as u32);
        let mut quo = vec![c.f(); w];
        for i in (0..w).rev() {
            // rem = (rem << 1) | dividend[i]
            let mut shifted = vec![self.0[i]];
            shifted.extend(rem.0[..w - 1].iter().copied());
            rem = BitVec(shifted);
            let lt = rem.ult(c, rhs);
            let ge = c.not(lt);
            let diff = rem.sub(c, rhs);
            rem = BitVec::mux(c, ge, &diff, &rem);
            quo[i] = ge;
        }
        (BitVec(quo), rem)
    }

    /// Signed division with the totalized semantics used by the interpreter:
    /// quotient truncates toward zero, x / 0 == 0, x % 0 == x, and results
    /// wrap into W bits.
    pub fn sdiv(&self, c: &mut Circuit, rhs: &BitVec) -> BitVec {
        let (q, _) = self.sdivrem(c, rhs);
        q
    }

    pub fn srem(&self, c: &mut Circuit, rhs: &BitVec) -> BitVec {
        let (_, r) = self.sdivrem(c, rhs);
        r
    }

    fn sdivrem(&self, c: &mut Circuit, rhs: &BitVec) -> (BitVec, BitVec) {
        let w = self.width();
        let sa = self.msb();
        let sb = rhs.msb();
        let neg_a = self.neg(c);
        let neg_b = rhs.neg(c);
        let abs_a = BitVec::mux(c, sa, &neg_a, self);
        let abs_b = BitVec::mux(c, sb, &neg_b, rhs);
        let (uq, ur) = abs_a.udivrem(c, &abs_b);
        let q_sign = c.xor(sa, sb);
        let neg_uq = uq.neg(c);
        let q = BitVec::mux(c, q_sign, &neg_uq, &uq);
        let neg_ur = ur.neg(c);
        let r = BitVec::mux(c, sa, &neg_ur, &ur); // remainder takes dividend sign
        let bz = rhs.is_zero(c);
        let zero = BitVec::constant(c, 0, w);
        let q = BitVec::mux(c, bz, &zero, &q);
        let r = BitVec::mux(c, bz, self, &r);
        (q, r)
    }

    /// Decode under a total input assignment to a W-bit signed value.
    pub fn decode(&self, c: &Circuit, inputs: &dyn Fn(u32) -> bool) -> i64 {
        let w = self.0.len() as u32;
        let mut raw: i64 = 0;
        for (i, &b) in self.0.iter().enumerate() {
            if c.eval(b, inputs) {
                raw |= 1 << i;
            }
        }
        crate::property::wrap(raw, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::property::wrap;

    const W: u32 = 6;

    fn all_values() -> impl Iterator<Item = i64> {
        let half = 1i64 << (W - 1);
        -half..half
    }

    fn binop_matches(
        f: impl Fn(&BitVec, &mut Circuit, &BitVec) -> BitVec,
        oracle: impl Fn(i64, i64) -> i64,
        name: &str,
    ) {
        for a in all_values() {
            for b in all_values() {
                let mut c = Circuit::new();
                let av = BitVec::constant(&mut c, a, W);
                let bv = BitVec::constant(&mut c, b, W);
                let rv = f(&av, &mut c, &bv);
                let got = rv.decode(&c, &|_| false);
                assert_eq!(got, wrap(oracle(a, b), W), "{name}({a}, {b})");
            }
        }
    }

    #[test]
    fn add_matches_wrapping_oracle() {
        binop_matches(BitVec::add, |a, b| a.wrapping_add(b), "add");
    }

    #[test]
    fn sub_matches_wrapping_oracle() {
        binop_matches(BitVec::sub, |a, b| a.wrapping_sub(b), "sub");
    }

    #[test]
    fn mul_matches_wrapping_oracle() {
        binop_matches(BitVec::mul, |a, b| a.wrapping_mul(b), "mul");
    }

    #[test]
    fn div_matches_totalized_oracle() {
        binop_matches(
            BitVec::sdiv,
            |a, b| if b == 0 { 0 } else { a.wrapping_div(b) },
            "div",
        );
    }

    #[test]
    fn rem_matches_totalized_oracle() {
        binop_matches(
            BitVec::srem,
            |a, b| if b == 0 { a } else { a.wrapping_rem(b) },
            "rem",
        );
    }

    #[test]
    fn int_min_div_minus_one_wraps() {
        let mut c = Circuit::new();
        let a = BitVec::constant(&mut c, -32, W);
        let b = BitVec::constant(&mut c, -1, W);
        let q = a.sdiv(&mut c, &b);
        assert_eq!(q.decode(&c, &|_| false), -32);
    }

    #[test]
    fn signed_compare_matches_oracle() {
        for a in all_values() {
            for b in all_values() {
                let mut c = Circuit::new();
                let av = BitVec::constant(&mut c, a, W);
                let bv = BitVec::constant(&mut c, b, W);
                let lt = av.slt(&mut c, &bv);
                let le = av.sle(&mut c, &bv);
                let eq = av.eq(&mut c, &bv);
                assert_eq!(c.eval(lt, &|_| false), a < b, "slt({a}, {b})");
                assert_eq!(c.eval(le, &|_| false), a <= b, "sle({a}, {b})");
                assert_eq!(c.eval(eq, &|_| false), a == b, "eq({a}, {b})");
            }
        }
    }

    #[test]
    fn symbolic_add_over_inputs() {
        let mut c = Circuit::new();
        let a = BitVec::fresh(&mut c, 4);
        let b = BitVec::fresh(&mut c, 4);
        let s = a.add(&mut c, &b);
        for x in 0..16u32 {
            for y in 0..16u32 {
                let assign = move |k: u32| {
                    if k < 4 {
                        (x >> k) & 1 == 1
                    } else {
                        (y >> (k - 4)) & 1 == 1
                    }
                };
                let got = s.decode(&c, &assign);
                let want = wrap((x as i64).wrapping_add(y as i64), 4);
                assert_eq!(got, wrap(want, 4));
            }
        }
    }

    #[test]
    fn folding_keeps_constants_flat() {
        let mut c = Circuit::new();
        let t = c.t();
        let f = c.f();
        assert_eq!(c.and(t, f), f);
        assert_eq!(c.or(t, f), t);
        assert_eq!(c.xor(t, t), f);
        let x = c.fresh_input();
        assert_eq!(c.and(x, t), x);
        assert_eq!(c.or(x, f), x);
        let nx = c.not(x);
        assert_eq!(c.and(x, nx), f);
        assert_eq!(c.or(x, nx), t);
        assert_eq!(c.not(nx), x);
    }
}
