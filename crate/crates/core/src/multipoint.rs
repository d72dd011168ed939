//! Subproduct-tree multipoint evaluation over a prime field.
//!
//! Points are processed in blocks of `deg f + 1`. For each block the product
//! tree of the linear factors `(X - x_i)` is built bottom-up, `f` is reduced
//! modulo the root, and the remainder is pushed down the tree until each leaf
//! holds the constant `f(x_i)`. Polynomials are coefficient vectors, lowest
//! degree first.

use crate::field::FieldPrime;

struct Tree {
    /// Monic product of the linear factors below this node.
    poly: Vec<u64>,
    children: Option<Box<(Tree, Tree)>>,
}

fn mul_poly(f: &FieldPrime, a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = f.add(out[i + j], f.mul(ai, bj));
        }
    }
    out
}

/// Remainder of `num` modulo a monic `den`.
fn rem_monic(f: &FieldPrime, num: &[u64], den: &[u64]) -> Vec<u64> {
    let dd = den.len() - 1;
    if num.len() <= dd {
        return num.to_vec();
    }
    let mut rem = num.to_vec();
    for top in (dd..rem.len()).rev() {
        let q = rem[top];
        if q == 0 {
            continue;
        }
        let shift = top - dd;
        for (i, &dc) in den.iter().enumerate() {
            rem[shift + i] = f.sub(rem[shift + i], f.mul(q, dc));
        }
    }
    rem.truncate(dd);
    rem
}

fn build(f: &FieldPrime, xs: &[u64]) -> Tree {
    if xs.len() == 1 {
        return Tree {
            poly: vec![f.neg(xs[0]), 1],
            children: None,
        };
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    let left = build(f, l);
    let right = build(f, r);
    Tree {
        poly: mul_poly(f, &left.poly, &right.poly),
        children: Some(Box::new((left, right))),
    }
}

fn descend(f: &FieldPrime, node: &Tree, rem: &[u64], out: &mut Vec<u64>) {
    let rem = rem_monic(f, rem, &node.poly);
    match &node.children {
        None => out.push(rem.first().copied().unwrap_or(0)),
        Some(children) => {
            descend(f, &children.0, &rem, out);
            descend(f, &children.1, &rem, out);
        }
    }
}

/// Values of `coeffs` at every point of `xs`, in order. Points must be reduced.
pub fn evaluate(f: &FieldPrime, coeffs: &[u64], xs: &[u64]) -> Vec<u64> {
    let block = coeffs.len().max(1);
    let mut out = Vec::with_capacity(xs.len());
    for chunk in xs.chunks(block) {
        let tree = build(f, chunk);
        descend(f, &tree, coeffs, &mut out);
    }
    out
}
