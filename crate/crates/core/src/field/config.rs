use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{FieldError, HamiltonianSystem, Rect, Sigma, SystemRegistry};
use crate::poly::Poly2;

/// One monomial `c·xⁱyʲ` written as `[i, j, c]`.
pub type Term = (u32, u32, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Builtin(String),
    Poly(Vec<Term>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSpec {
    Identity(usize),
    /// Two rows of `l` entries.
    Constant(Vec<Vec<f64>>),
    /// Two rows of `l` polynomial entries.
    Poly(Vec<Vec<Vec<Term>>>),
}

impl Default for SigmaSpec {
    fn default() -> Self {
        SigmaSpec::Identity(2)
    }
}

/// JSON system description. `box` may be omitted for built-ins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub hamiltonian: HamiltonianSpec,
    #[serde(default)]
    pub sigma: SigmaSpec,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

impl SystemConfig {
    pub fn builtin(name: &str) -> Self {
        SystemConfig { hamiltonian: HamiltonianSpec::Builtin(name.into()), sigma: SigmaSpec::default(), bbox: None }
    }

    pub fn build(&self, registry: &SystemRegistry) -> Result<HamiltonianSystem, FieldError> {
        let (name, h, default_box) = match &self.hamiltonian {
            HamiltonianSpec::Builtin(n) => {
                let b = registry.get(n).ok_or_else(|| FieldError::UnknownBuiltin(n.clone()))?;
                (b.name().to_string(), b.polynomial(), Some(b.default_box()))
            }
            HamiltonianSpec::Poly(terms) => ("poly".to_string(), Poly2::new(terms.iter().copied()), None),
        };
        let bbox = match (self.bbox, default_box) {
            (Some(b), _) => Rect::from_array(b)?,
            (None, Some(b)) => b,
            (None, None) => return Err(FieldError::MissingBox),
        };
        let sigma = match &self.sigma {
            SigmaSpec::Identity(l) if *l >= 1 => Sigma::Identity(*l),
            SigmaSpec::Identity(_) => return Err(FieldError::BadSigma("identity needs l ≥ 1".into())),
            SigmaSpec::Constant(rows) => Sigma::constant_rows(rows)?,
            SigmaSpec::Poly(rows) => Sigma::poly_rows(
                rows.iter().map(|r| r.iter().map(|t| Poly2::new(t.iter().copied())).collect()).collect(),
            )?,
        };
        Ok(HamiltonianSystem::new(name, h, sigma, bbox))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_form() {
        let reg = SystemRegistry::default();
        let a: SystemConfig = serde_json::from_str(r#"{"hamiltonian": {"builtin": "doublewell"}}"#).unwrap();
        assert_eq!(a.build(&reg).unwrap().bbox().to_array(), [-2.5, 2.5, -2.5, 2.5]);
        let b: SystemConfig = serde_json::from_str(
            r#"{"hamiltonian": {"poly": [[2,0,0.5],[0,2,0.5]]}, "sigma": {"constant": [[1,0],[0,2]]}, "box": [-3,3,-3,3]}"#,
        )
        .unwrap();
        let sys = b.build(&reg).unwrap();
        assert_eq!(sys.h([1.0, 1.0]), 1.0);
        let c: SystemConfig = serde_json::from_str(
            r#"{"hamiltonian": {"builtin": "harmonic"}, "sigma": {"poly": [[[[0,0,1]]],[[[1,0,1]]]]}}"#,
        )
        .unwrap();
        assert_eq!(c.build(&reg).unwrap().sigma().cols(), 1);
    }

    #[test]
    fn poly_without_box_is_rejected() {
        let a: SystemConfig = serde_json::from_str(r#"{"hamiltonian": {"poly": [[2,0,1]]}}"#).unwrap();
        assert_eq!(a.build(&SystemRegistry::default()).unwrap_err(), FieldError::MissingBox);
        assert!(serde_json::from_str::<SystemConfig>(r#"{"hamiltonian": {"builtin": "x"}, "extra": 1}"#).is_err());
    }
}
