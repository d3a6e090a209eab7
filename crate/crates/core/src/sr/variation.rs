//! Tree generation, subtree crossover and mutation.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::expr::Expr;

use super::SrConfig;

fn random_terminal<R: Rng>(rng: &mut R, cfg: &SrConfig) -> Expr {
    if rng.random_bool(0.5) {
        Expr::Time
    } else {
        Expr::Const(random_constant(rng, cfg))
    }
}

fn random_constant<R: Rng>(rng: &mut R, cfg: &SrConfig) -> f64 {
    if cfg.constant_min == cfg.constant_max {
        cfg.constant_min
    } else {
        rng.random_range(cfg.constant_min..=cfg.constant_max)
    }
}

/// Random tree of depth at most `depth`. `full` keeps choosing functions
/// until the depth limit; otherwise terminals compete with functions at
/// every level.
pub fn random_tree<R: Rng>(rng: &mut R, cfg: &SrConfig, depth: usize, full: bool) -> Expr {
    let ops = &cfg.operators;
    let n_func = ops.function_count();
    if depth <= 1 || n_func == 0 {
        return random_terminal(rng, cfg);
    }
    if !full && rng.random_range(0..n_func + 2) < 2 {
        return random_terminal(rng, cfg);
    }
    let pick = rng.random_range(0..n_func);
    if pick < ops.unary.len() {
        let child = random_tree(rng, cfg, depth - 1, full);
        Expr::unary(ops.unary[pick], child)
    } else if pick < ops.unary.len() + ops.binary.len() {
        let op = ops.binary[pick - ops.unary.len()];
        let left = random_tree(rng, cfg, depth - 1, full);
        let right = random_tree(rng, cfg, depth - 1, full);
        Expr::binary(op, left, right)
    } else {
        let k = ops.exponents[rng.random_range(0..ops.exponents.len())];
        Expr::pow(random_tree(rng, cfg, depth - 1, full), k)
    }
}

/// Ramped half-and-half member `index` of the initial population. Depths
/// cycle through the initial range; alternate passes use full and grow.
pub fn init_individual<R: Rng>(rng: &mut R, cfg: &SrConfig, index: usize) -> Expr {
    let span = cfg.init_depth_max - cfg.init_depth_min + 1;
    let depth = cfg.init_depth_min + index % span;
    let full = (index / span).is_multiple_of(2);
    random_tree(rng, cfg, depth, full)
}

/// Swaps a random subtree of `a` with a random subtree of `b`. A child that
/// would exceed `max_depth` is replaced by its parent.
pub fn crossover<R: Rng>(a: &Expr, b: &Expr, max_depth: usize, rng: &mut R) -> (Expr, Expr) {
    let i = rng.random_range(0..a.node_count());
    let j = rng.random_range(0..b.node_count());
    let sub_a = a.subtree(i).expect("index within tree").clone();
    let sub_b = b.subtree(j).expect("index within tree").clone();
    let first = a.replace_subtree(i, sub_b);
    let second = b.replace_subtree(j, sub_a);
    let first = if first.depth() > max_depth { a.clone() } else { first };
    let second = if second.depth() > max_depth { b.clone() } else { second };
    (first, second)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MutationKind {
    Subtree,
    Point,
    ConstantJitter,
}

pub fn choose_mutation<R: Rng>(rng: &mut R, cfg: &SrConfig) -> MutationKind {
    let w = cfg.mutation_weights;
    let x = rng.random::<f64>() * (w.subtree + w.point + w.constant);
    if x < w.subtree {
        MutationKind::Subtree
    } else if x < w.subtree + w.point {
        MutationKind::Point
    } else {
        MutationKind::ConstantJitter
    }
}

pub fn mutate<R: Rng>(e: &Expr, cfg: &SrConfig, rng: &mut R) -> Expr {
    let kind = choose_mutation(rng, cfg);
    mutate_with(e, kind, cfg, rng)
}

/// Applies one mutation of the given kind. Constant jitter on a tree without
/// constants falls back to a point mutation.
pub fn mutate_with<R: Rng>(e: &Expr, kind: MutationKind, cfg: &SrConfig, rng: &mut R) -> Expr {
    let out = match kind {
        MutationKind::Subtree => subtree_mutation(e, cfg, rng),
        MutationKind::Point => point_mutation(e, cfg, rng),
        MutationKind::ConstantJitter => {
            let positions = const_positions(e);
            if positions.is_empty() {
                point_mutation(e, cfg, rng)
            } else {
                let at = positions[rng.random_range(0..positions.len())];
                let g: f64 = rng.sample(StandardNormal);
                match e.subtree(at) {
                    Some(Expr::Const(c)) => {
                        let jittered = c * (1.0 + 0.1 * g) + 0.01 * g;
                        e.replace_subtree(at, Expr::Const(jittered))
                    }
                    _ => unreachable!("position holds a constant"),
                }
            }
        }
    };
    if out.depth() > cfg.max_depth {
        e.clone()
    } else {
        out
    }
}

fn const_positions(e: &Expr) -> Vec<usize> {
    let mut out = Vec::new();
    let mut idx = 0;
    e.visit_preorder(&mut |node| {
        if matches!(node, Expr::Const(_)) {
            out.push(idx);
        }
        idx += 1;
    });
    out
}

fn subtree_mutation<R: Rng>(e: &Expr, cfg: &SrConfig, rng: &mut R) -> Expr {
    let depths = e.node_depths();
    let at = rng.random_range(0..depths.len());
    let room = cfg.max_depth.saturating_sub(depths[at] - 1).max(1);
    let limit = rng.random_range(1..=cfg.init_depth_max).min(room);
    let fresh = random_tree(rng, cfg, limit, false);
    e.replace_subtree(at, fresh)
}

fn pick_other<T: Copy + PartialEq, R: Rng>(options: &[T], current: T, rng: &mut R) -> Option<T> {
    let others: Vec<T> = options.iter().copied().filter(|o| *o != current).collect();
    if others.is_empty() {
        None
    } else {
        Some(others[rng.random_range(0..others.len())])
    }
}

fn point_mutation<R: Rng>(e: &Expr, cfg: &SrConfig, rng: &mut R) -> Expr {
    let at = rng.random_range(0..e.node_count());
    let node = e.subtree(at).expect("index within tree");
    let ops = &cfg.operators;
    let replacement = match node {
        Expr::Const(_) => Expr::Time,
        Expr::Time => Expr::Const(random_constant(rng, cfg)),
        Expr::Unary(op, x) => match pick_other(&ops.unary, *op, rng) {
            Some(op) => Expr::Unary(op, x.clone()),
            None => return e.clone(),
        },
        Expr::Binary(op, a, b) => match pick_other(&ops.binary, *op, rng) {
            Some(op) => Expr::Binary(op, a.clone(), b.clone()),
            None => return e.clone(),
        },
        Expr::Pow(x, k) => match pick_other(&ops.exponents, *k, rng) {
            Some(k) => Expr::Pow(x.clone(), k),
            None => return e.clone(),
        },
    };
    e.replace_subtree(at, replacement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, BinaryOp};
    use crate::sr::rng::stream_rng;

    #[test]
    fn depth_one_trees_are_leaves() {
        let cfg = SrConfig { init_depth_min: 1, init_depth_max: 1, ..SrConfig::default() };
        for i in 0..50 {
            let mut rng = stream_rng(1, 0, i);
            assert!(init_individual(&mut rng, &cfg, i as usize).is_leaf());
        }
    }

    #[test]
    fn full_trees_reach_requested_depth() {
        let cfg = SrConfig::default();
        for i in 0..20 {
            let mut rng = stream_rng(3, 0, i);
            assert_eq!(random_tree(&mut rng, &cfg, 4, true).depth(), 4);
        }
    }

    #[test]
    fn leaf_crossover_swaps_roots() {
        let mut rng = stream_rng(5, 1, 0);
        let (a, b) = (Expr::Time, Expr::Const(2.0));
        let (c, d) = crossover(&a, &b, 10, &mut rng);
        assert_eq!((c, d), (b, a));
    }

    #[test]
    fn crossover_respects_depth() {
        let cfg = SrConfig::default();
        for i in 0..200 {
            let mut rng = stream_rng(9, 2, i);
            let a = random_tree(&mut rng, &cfg, 6, true);
            let b = random_tree(&mut rng, &cfg, 6, false);
            let (c, d) = crossover(&a, &b, 7, &mut rng);
            assert!(c.depth() <= 7 && d.depth() <= 7);
        }
    }

    #[test]
    fn jitter_moves_zero() {
        let cfg = SrConfig::default();
        let mut rng = stream_rng(11, 0, 0);
        let out = mutate_with(&Expr::Const(0.0), MutationKind::ConstantJitter, &cfg, &mut rng);
        match out {
            Expr::Const(c) => assert!(c != 0.0 && c.abs() < 0.1),
            other => panic!("expected a constant, got {other}"),
        }
    }

    #[test]
    fn point_mutation_keeps_arity() {
        let cfg = SrConfig::default();
        let e = Expr::add(Expr::Time, Expr::Const(1.0));
        let mut seen_binary = false;
        for i in 0..100 {
            let mut rng = stream_rng(13, 0, i);
            let out = mutate_with(&e, MutationKind::Point, &cfg, &mut rng);
            if let Expr::Binary(op, a, b) = &out {
                if op != &BinaryOp::Add {
                    seen_binary = true;
                    assert_eq!((a.as_ref(), b.as_ref()), (&Expr::Time, &Expr::Const(1.0)));
                }
            }
            assert_eq!(out.node_count(), 3);
        }
        assert!(seen_binary);
    }

    #[test]
    fn mutation_is_deterministic() {
        let cfg = SrConfig::default();
        let e = parse("1 + 2*cos(t)/t^3").unwrap();
        for i in 0..20 {
            let a = mutate(&e, &cfg, &mut stream_rng(17, 4, i));
            let b = mutate(&e, &cfg, &mut stream_rng(17, 4, i));
            assert_eq!(a, b);
            assert!(a.depth() <= cfg.max_depth);
        }
    }
}
