//! Stack-machine form of an expression for repeated evaluation with
//! positional variable bindings.

use super::{Expr, ExprError, Func};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Load(usize),
    Add,
    Sub,
    Mul,
    Div,
    Pow(i32),
    Neg,
    Call(Func),
}

/// An expression whose variables are resolved to slots of a value array.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    ops: Vec<Op>,
    depth: usize,
}

impl Compiled {
    pub fn new<S: AsRef<str>>(e: &Expr, vars: &[S]) -> Result<Self, ExprError> {
        let mut ops = Vec::with_capacity(e.size());
        emit(e, vars, &mut ops)?;
        let (mut depth, mut max) = (0usize, 0usize);
        for op in &ops {
            match op {
                Op::Const(_) | Op::Load(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                Op::Pow(_) | Op::Neg | Op::Call(_) => {}
            }
            max = max.max(depth);
        }
        Ok(Self { ops, depth: max })
    }

    /// Evaluates with `values[i]` bound to the `i`-th variable given to
    /// [`Compiled::new`]; same error behaviour as [`Expr::eval`].
    pub fn eval(&self, values: &[f64], stack: &mut Vec<f64>) -> Result<f64, ExprError> {
        stack.clear();
        stack.reserve(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::Load(i) => stack.push(values[i]),
                Op::Neg => {
                    let x = stack.last_mut().expect("balanced");
                    *x = -*x;
                }
                Op::Pow(k) => {
                    let x = stack.last_mut().expect("balanced");
                    if *x == 0.0 && k < 0 {
                        return Err(ExprError::Domain("zero raised to a negative power".into()));
                    }
                    *x = x.powi(k);
                }
                Op::Call(f) => {
                    let x = stack.last_mut().expect("balanced");
                    *x = f.apply(*x)?;
                }
                bin => {
                    let y = stack.pop().expect("balanced");
                    let x = stack.last_mut().expect("balanced");
                    *x = match bin {
                        Op::Add => *x + y,
                        Op::Sub => *x - y,
                        Op::Mul => *x * y,
                        Op::Div => {
                            if y == 0.0 {
                                return Err(ExprError::Domain("division by zero".into()));
                            }
                            *x / y
                        }
                        _ => unreachable!(),
                    };
                }
            }
        }
        let r = stack.pop().expect("non-empty program");
        if r.is_finite() {
            Ok(r)
        } else {
            Err(ExprError::Domain("non-finite value".into()))
        }
    }
}

fn emit<S: AsRef<str>>(e: &Expr, vars: &[S], ops: &mut Vec<Op>) -> Result<(), ExprError> {
    let bin = |a: &Expr, b: &Expr, op: Op, ops: &mut Vec<Op>| -> Result<(), ExprError> {
        emit(a, vars, ops)?;
        emit(b, vars, ops)?;
        ops.push(op);
        Ok(())
    };
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Var(n) => {
            let i = vars
                .iter()
                .position(|v| v.as_ref() == n)
                .ok_or_else(|| ExprError::Unbound(n.clone()))?;
            ops.push(Op::Load(i));
        }
        Expr::Add(a, b) => bin(a, b, Op::Add, ops)?,
        Expr::Sub(a, b) => bin(a, b, Op::Sub, ops)?,
        Expr::Mul(a, b) => bin(a, b, Op::Mul, ops)?,
        Expr::Div(a, b) => bin(a, b, Op::Div, ops)?,
        Expr::Pow(a, k) => {
            emit(a, vars, ops)?;
            ops.push(Op::Pow(*k));
        }
        Expr::Neg(a) => {
            emit(a, vars, ops)?;
            ops.push(Op::Neg);
        }
        Expr::Call(f, a) => {
            emit(a, vars, ops)?;
            ops.push(Op::Call(*f));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse_free;

    #[test]
    fn agrees_with_tree_evaluation() {
        let e = parse_free("sin(x)*y^2 - 3/(x + 2) + exp(-y) - sqrt(x*x + 1)").unwrap();
        let c = Compiled::new(&e, &["x", "y"]).unwrap();
        let mut stack = Vec::new();
        for (x, y) in [(0.1, 2.0), (-1.5, 0.3), (4.0, -2.0)] {
            let tree = e.eval(&[("x", x), ("y", y)]).unwrap();
            assert_eq!(c.eval(&[x, y], &mut stack).unwrap(), tree);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            Compiled::new(&parse_free("x + z").unwrap(), &["x"]),
            Err(ExprError::Unbound(_))
        ));
        let c = Compiled::new(&parse_free("1/x").unwrap(), &["x"]).unwrap();
        assert!(matches!(c.eval(&[0.0], &mut Vec::new()), Err(ExprError::Domain(_))));
    }
}
