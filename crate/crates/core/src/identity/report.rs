use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numerics::{serde_scalar, ErrorBudget, Scalar};
use crate::series::EvalResult;

/// Multiplier on the propagated budget in the pass rule.
pub const SAFETY: f64 = 4.0;

const COMBINE_ROUNDING: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IdentityId {
    #[serde(rename = "EQ11")]
    Eq11,
    #[serde(rename = "EQ12")]
    Eq12,
    #[serde(rename = "EQ13")]
    Eq13,
    #[serde(rename = "EQ14")]
    Eq14,
    #[serde(rename = "EQ21")]
    Eq21,
    #[serde(rename = "EQ23")]
    Eq23,
    #[serde(rename = "EQ25")]
    Eq25,
    #[serde(rename = "BRIDGE")]
    Bridge,
}

impl IdentityId {
    pub const ALL: [IdentityId; 8] = [
        IdentityId::Eq11,
        IdentityId::Eq12,
        IdentityId::Eq13,
        IdentityId::Eq14,
        IdentityId::Eq21,
        IdentityId::Eq23,
        IdentityId::Eq25,
        IdentityId::Bridge,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            IdentityId::Eq11 => "EQ11",
            IdentityId::Eq12 => "EQ12",
            IdentityId::Eq13 => "EQ13",
            IdentityId::Eq14 => "EQ14",
            IdentityId::Eq21 => "EQ21",
            IdentityId::Eq23 => "EQ23",
            IdentityId::Eq25 => "EQ25",
            IdentityId::Bridge => "BRIDGE",
        }
    }

    /// Parameter names the identity takes, in order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            IdentityId::Eq11 | IdentityId::Eq13 | IdentityId::Eq21 | IdentityId::Eq23 => &["x1", "x2", "w"],
            IdentityId::Eq12 => &["x", "y", "w"],
            IdentityId::Eq14 => &["a", "b", "c", "d"],
            IdentityId::Eq25 => &["x1", "x2"],
            IdentityId::Bridge => &["a", "b", "y"],
        }
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for IdentityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IdentityId::ALL
            .into_iter()
            .find(|id| id.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown identity '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    #[serde(with = "serde_scalar")]
    pub value: Scalar,
}

impl NamedValue {
    pub fn new(name: impl Into<String>, value: Scalar) -> Self {
        NamedValue { name: name.into(), value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lhs,
    Rhs,
}

/// One named constituent: `contribution = coef * value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub side: Side,
    pub name: String,
    #[serde(with = "serde_scalar")]
    pub coef: Scalar,
    #[serde(with = "serde_scalar")]
    pub value: Scalar,
    #[serde(with = "serde_scalar")]
    pub contribution: Scalar,
    /// Budget of the contribution (already scaled by `|coef|`).
    pub budget: ErrorBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub id: IdentityId,
    pub params: Vec<NamedValue>,
    #[serde(with = "serde_scalar")]
    pub lhs: Scalar,
    #[serde(with = "serde_scalar")]
    pub rhs: Scalar,
    /// `|lhs - rhs|`.
    pub residual: f64,
    pub component_budget: ErrorBudget,
    pub tol_abs: f64,
    pub safety: f64,
    /// `max(tol_abs, safety * component_budget.total)`.
    pub threshold: f64,
    pub pass: bool,
    pub components: Vec<Component>,
}

impl IdentityReport {
    pub fn residual_of(lhs: Scalar, rhs: Scalar) -> f64 {
        (lhs - rhs).norm()
    }

    /// Checks the stored residual and verdict against the stored fields.
    pub fn is_consistent(&self) -> bool {
        let threshold = self.tol_abs.max(self.safety * self.component_budget.total);
        self.residual == IdentityReport::residual_of(self.lhs, self.rhs)
            && self.threshold == threshold
            && self.pass == (self.residual <= threshold)
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn param(&self, name: &str) -> Option<Scalar> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

/// Collects one side of an identity. Contributions are summed per group in
/// insertion order, then groups are summed in order.
pub(crate) struct SideBuilder {
    side: Side,
    groups: Vec<Scalar>,
    pending: Vec<Scalar>,
    budget: ErrorBudget,
    components: Vec<Component>,
}

impl SideBuilder {
    pub fn new(side: Side) -> Self {
        SideBuilder {
            side,
            groups: Vec::new(),
            pending: Vec::new(),
            budget: ErrorBudget::ZERO,
            components: Vec::new(),
        }
    }

    /// An evaluated series entering with coefficient `coef`.
    pub fn series(&mut self, name: impl Into<String>, coef: Scalar, r: &EvalResult) -> &mut Self {
        let contribution = coef * r.value;
        let budget = r.budget.scaled(coef.norm()).with_rounding(COMBINE_ROUNDING * contribution.norm());
        self.push(name.into(), coef, r.value, contribution, budget)
    }

    /// A closed-form term.
    pub fn closed(&mut self, name: impl Into<String>, value: Scalar) -> &mut Self {
        let budget = ErrorBudget::new(0.0, COMBINE_ROUNDING * value.norm());
        self.push(name.into(), Scalar::new(1.0, 0.0), value, value, budget)
    }

    fn push(&mut self, name: String, coef: Scalar, value: Scalar, contribution: Scalar, budget: ErrorBudget) -> &mut Self {
        self.budget = self.budget + budget;
        self.pending.push(contribution);
        self.components.push(Component {
            side: self.side,
            name,
            coef,
            value,
            contribution,
            budget,
        });
        self
    }

    /// Closes the current group.
    pub fn group(&mut self) -> &mut Self {
        if !self.pending.is_empty() {
            let s = self.pending.drain(..).fold(Scalar::new(0.0, 0.0), |acc, x| acc + x);
            self.groups.push(s);
        }
        self
    }

    fn finish(mut self) -> (Scalar, ErrorBudget, Vec<Component>) {
        self.group();
        let value = self.groups.iter().fold(Scalar::new(0.0, 0.0), |acc, &x| acc + x);
        let mag: f64 = self.groups.iter().map(|g| g.norm()).sum();
        (value, self.budget.with_rounding(COMBINE_ROUNDING * mag), self.components)
    }
}

pub(crate) fn assemble(
    id: IdentityId,
    params: Vec<NamedValue>,
    lhs: SideBuilder,
    rhs: SideBuilder,
    tol_abs: f64,
) -> IdentityReport {
    let (lv, lb, mut components) = lhs.finish();
    let (rv, rb, rc) = rhs.finish();
    components.extend(rc);
    let component_budget = lb + rb;
    let residual = IdentityReport::residual_of(lv, rv);
    let threshold = tol_abs.max(SAFETY * component_budget.total);
    IdentityReport {
        id,
        params,
        lhs: lv,
        rhs: rv,
        residual,
        component_budget,
        tol_abs,
        safety: SAFETY,
        threshold,
        pass: residual <= threshold,
        components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real;

    #[test]
    fn ids_round_trip() {
        for id in IdentityId::ALL {
            assert_eq!(id.tag().parse::<IdentityId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.tag()));
        }
        assert_eq!("eq25".parse::<IdentityId>().unwrap(), IdentityId::Eq25);
        assert!("EQ99".parse::<IdentityId>().is_err());
    }

    #[test]
    fn assembly_applies_pass_rule() {
        let mut l = SideBuilder::new(Side::Lhs);
        l.closed("a", real(1.0)).closed("b", real(1e-6)).group();
        let mut r = SideBuilder::new(Side::Rhs);
        r.closed("c", real(1.0));
        let rep = assemble(IdentityId::Eq25, vec![], l, r, 1e-9);
        assert!(!rep.pass);
        assert!(rep.is_consistent());
        assert_eq!(rep.components.len(), 3);
        assert_eq!(rep.components[2].side, Side::Rhs);
    }
}
