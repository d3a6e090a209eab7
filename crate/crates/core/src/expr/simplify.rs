use super::{BinaryOp, Expr};

/// Folds time-free subtrees into constants and removes additive zeros and
/// multiplicative ones. `x*0` collapses to `0`. Subtrees whose folding hits a
/// domain error are kept as they are.
pub fn simplify(e: &Expr) -> Expr {
    let rebuilt = match e {
        Expr::Const(_) | Expr::Time => return e.clone(),
        Expr::Unary(op, x) => Expr::unary(*op, simplify(x)),
        Expr::Pow(x, k) => Expr::pow(simplify(x), *k),
        Expr::Binary(op, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match identity(*op, &a, &b) {
                Some(reduced) => reduced,
                None => Expr::binary(*op, a, b),
            }
        }
    };
    if rebuilt.contains_time() {
        return rebuilt;
    }
    match rebuilt.eval(0.0) {
        Ok(value) => Expr::Const(value),
        Err(_) => rebuilt,
    }
}

fn is_const(e: &Expr, value: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == value)
}

fn identity(op: BinaryOp, a: &Expr, b: &Expr) -> Option<Expr> {
    match op {
        BinaryOp::Add if is_const(b, 0.0) => Some(a.clone()),
        BinaryOp::Add if is_const(a, 0.0) => Some(b.clone()),
        BinaryOp::Sub if is_const(b, 0.0) => Some(a.clone()),
        BinaryOp::Mul if is_const(a, 0.0) || is_const(b, 0.0) => Some(Expr::Const(0.0)),
        BinaryOp::Mul if is_const(b, 1.0) => Some(a.clone()),
        BinaryOp::Mul if is_const(a, 1.0) => Some(b.clone()),
        BinaryOp::Div if is_const(b, 1.0) => Some(a.clone()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, UnaryOp};

    #[test]
    fn folds_constants() {
        let e = Expr::mul(Expr::add(Expr::Const(2.0), Expr::Const(3.0)), Expr::Time);
        assert_eq!(simplify(&e), Expr::mul(Expr::Const(5.0), Expr::Time));
    }

    #[test]
    fn identities() {
        assert_eq!(simplify(&Expr::add(Expr::Time, Expr::Const(0.0))), Expr::Time);
        assert_eq!(simplify(&parse("0 + t").unwrap()), Expr::Time);
        assert_eq!(simplify(&parse("t - 0").unwrap()), Expr::Time);
        assert_eq!(simplify(&parse("t/1").unwrap()), Expr::Time);
        assert_eq!(simplify(&parse("sin(t)*0").unwrap()), Expr::Const(0.0));
        assert_eq!(simplify(&parse("1*t^2").unwrap()), Expr::pow(Expr::Time, 2));
    }

    #[test]
    fn fold_then_identity() {
        let e = Expr::mul(Expr::unary(UnaryOp::Cos, Expr::Const(0.0)), Expr::Time);
        assert_eq!(simplify(&e), Expr::Time);
    }

    #[test]
    fn failed_fold_is_left_alone() {
        let e = parse("t + log(0 - 1)").unwrap();
        assert_eq!(simplify(&e), Expr::add(Expr::Time, parse("log(-1)").unwrap()));
        let e = parse("1/0").unwrap();
        assert_eq!(simplify(&e), e);
    }
}
