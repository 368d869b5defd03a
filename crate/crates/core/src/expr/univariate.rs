use serde::{Deserialize, Serialize};

use super::{parse_with, Expression, ParseError, VarScheme};

/// What a one-variable function is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// `f^k` of a conservation pair, or a Hopf speed.
    F,
    /// `g^k` of a conservation pair.
    G,
    /// Initial profile `φ(x)`.
    Profile,
}

/// A function of a single placeholder variable, stored as variable 0.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateSpec {
    expr: Expression,
    role: Role,
}

impl UnivariateSpec {
    /// Parses `text` written in terms of `placeholder` (e.g. `"u"` or `"x"`).
    pub fn parse(text: &str, placeholder: &str, role: Role) -> Result<Self, ParseError> {
        let expr = parse_with(text, &VarScheme::Named(vec![placeholder.to_string()]))?;
        Ok(Self { expr, role })
    }

    /// Wraps an expression that may reference only variable 0.
    pub fn from_expr(expr: Expression, role: Role) -> Option<Self> {
        expr.variables()
            .iter()
            .all(|&i| i == 0)
            .then_some(Self { expr, role })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn expr(&self) -> &Expression {
        &self.expr
    }

    /// The function applied to variable `index`, e.g. `f(R^k)`.
    pub fn instantiate(&self, index: usize) -> Expression {
        self.expr.substitute(&|_| Expression::var(index))
    }

    pub fn derivative(&self) -> UnivariateSpec {
        Self {
            expr: self.expr.differentiate(0),
            role: self.role,
        }
    }

    /// Renders with the given placeholder name, e.g. `u^2/2`.
    pub fn to_text(&self, placeholder: &str) -> String {
        self.expr.to_string().replace("R1", placeholder)
    }
}
