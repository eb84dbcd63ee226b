//! Recorded inequalities: one `lhs (<|<=) rhs + slack` instance with its verdict.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Lt,
    Le,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub slack: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Inequality {
    pub fn new(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        relation: Relation,
        slack: f64,
    ) -> Self {
        let bound = rhs + slack;
        let pass = match relation {
            Relation::Lt => lhs < bound,
            Relation::Le => lhs <= bound,
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            relation,
            slack,
            pass,
            detail: None,
        }
    }

    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self::new(name, lhs, rhs, Relation::Lt, slack)
    }

    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self::new(name, lhs, rhs, Relation::Le, slack)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    /// `rhs + slack − lhs`; negative when the inequality fails.
    pub fn margin(&self) -> f64 {
        self.rhs + self.slack - self.lhs
    }
}
