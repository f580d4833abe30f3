//! Scalar expressions in `x`, `y` for user-defined scenarios.

use evalexpr::{Context, EvalexprError, EvalexprResult, Node, Value};

use crate::error::{Error, Result};

#[derive(Debug)]
pub(crate) struct Expr {
    node: Node,
}

struct Point {
    x: Value,
    y: Value,
    pi: Value,
}

impl Context for Point {
    fn get_value(&self, identifier: &str) -> Option<&Value> {
        match identifier {
            "x" => Some(&self.x),
            "y" => Some(&self.y),
            "pi" => Some(&self.pi),
            _ => None,
        }
    }

    // Bare names for the common functions; `math::*` builtins remain available.
    fn call_function(&self, identifier: &str, argument: &Value) -> EvalexprResult<Value> {
        let f: fn(f64) -> f64 = match identifier {
            "sin" => f64::sin,
            "cos" => f64::cos,
            "tan" => f64::tan,
            "exp" => f64::exp,
            "ln" => f64::ln,
            "sqrt" => f64::sqrt,
            "abs" => f64::abs,
            "sinh" => f64::sinh,
            "cosh" => f64::cosh,
            "tanh" => f64::tanh,
            "asinh" => f64::asinh,
            "atan" => f64::atan,
            _ => return Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string())),
        };
        Ok(Value::Float(f(argument.as_number()?)))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _disabled: bool) -> EvalexprResult<()> {
        Err(EvalexprError::ContextNotMutable)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let node = evalexpr::build_operator_tree(src).map_err(|e| Error::Expression(format!("{src:?}: {e}")))?;
        let e = Self { node };
        e.try_eval(&[0.0, 0.0]).map_err(|m| Error::Expression(format!("{src:?}: {m}")))?;
        Ok(e)
    }

    fn try_eval(&self, a: &[f64]) -> std::result::Result<f64, String> {
        let ctx = Point {
            x: Value::Float(a[0]),
            y: Value::Float(a.get(1).copied().unwrap_or(0.0)),
            pi: Value::Float(std::f64::consts::PI),
        };
        self.node.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    }

    /// Value at `a`; evaluation errors give NaN, caught by scenario checks.
    pub fn eval(&self, a: &[f64]) -> f64 {
        self.try_eval(a).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_with_bare_and_namespaced_functions() {
        let e = Expr::parse("sin(pi * x) + math::cos(y) + 2 * x").unwrap();
        let v = e.eval(&[0.25, 0.5]);
        let want = (std::f64::consts::PI * 0.25).sin() + 0.5f64.cos() + 0.5;
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(Expr::parse("z + 1").is_err());
        assert!(Expr::parse("1 +").is_err());
    }
}
