//! Scalar expressions in one variable `x`, used for user-supplied model
//! coefficients. Parsing is delegated to `meval`; evaluation goes through a
//! stateless context so compiled expressions can be shared across threads.

use std::fmt;
use std::str::FromStr;

use meval::{ContextProvider, FuncEvalError};

use crate::error::{Error, Result};

#[derive(Clone, Copy)]
struct Scope {
    x: f64,
}

impl ContextProvider for Scope {
    fn get_var(&self, name: &str) -> Option<f64> {
        match name {
            "x" => Some(self.x),
            "pi" => Some(std::f64::consts::PI),
            "e" => Some(std::f64::consts::E),
            _ => None,
        }
    }

    fn eval_func(&self, name: &str, args: &[f64]) -> std::result::Result<f64, FuncEvalError> {
        let unary = |f: fn(f64) -> f64| match args {
            [a] => Ok(f(*a)),
            _ => Err(FuncEvalError::NumberArgs(1)),
        };
        match name {
            "exp" => unary(f64::exp),
            "log" | "ln" => unary(f64::ln),
            "sqrt" => unary(f64::sqrt),
            "abs" => unary(f64::abs),
            "pow" => match args {
                [a, b] => Ok(a.powf(*b)),
                _ => Err(FuncEvalError::NumberArgs(2)),
            },
            _ => Err(FuncEvalError::UnknownFunction),
        }
    }
}

/// A compiled expression such as `"(delta - 1) / (2*x)"` with numeric
/// constants substituted. Supports `+ - * / ^`, `exp`, `log` (natural),
/// `sqrt`, `pow(a, b)`, `abs` and the constants `pi` and `e`.
#[derive(Clone)]
pub struct Expression {
    source: String,
    compiled: meval::Expr,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let compiled = meval::Expr::from_str(source)
            .map_err(|e| Error::Spec(format!("cannot parse expression `{source}`: {e}")))?;
        let expr = Self { source: source.to_owned(), compiled };
        // Surface unknown names now rather than at the first evaluation.
        expr.compiled
            .eval_with_context(Scope { x: 1.0 })
            .map_err(|e| Error::Spec(format!("expression `{source}`: {e}")))?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates at `x`; evaluation errors were excluded at parse time and
    /// map to NaN.
    pub fn eval(&self, x: f64) -> f64 {
        self.compiled.eval_with_context(Scope { x }).unwrap_or(f64::NAN)
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Expression").field(&self.source).finish()
    }
}
