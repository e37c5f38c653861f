//! The JSON model file.
//!
//! ```json
//! {
//!   "states": ["1", "2"],
//!   "controls": ["a", "b"],
//!   "feasible": { "2": ["a"] },
//!   "kernel": { "a": ["1/2", "1/2", 0, 1], "b": [1, 0, 0, 1] },
//!   "cost": { "a": [1, 2], "b": [0.5, 0] },
//!   "radius": "1/3"
//! }
//! ```
//!
//! `kernel` holds one row-major `|X|×|X|` array per control and `cost` one
//! `|X|` array per control. A state missing from `feasible` may use every
//! control. Any number may be written as a string, either a decimal or an
//! exact fraction `"a/b"`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use robust_mdp_core::{Kernel, McmModel};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("`{0}` is not a number or fraction")]
    Number(String),
    #[error("{what} for control `{control}` has {found} entries, expected {expected}")]
    Length { what: &'static str, control: String, expected: usize, found: usize },
    #[error("{what} has no entry for control `{control}`")]
    Missing { what: &'static str, control: String },
    #[error("{what} names unknown control `{control}`")]
    UnknownControl { what: &'static str, control: String },
    #[error("feasible set names unknown state `{0}`")]
    UnknownState(String),
    #[error(transparent)]
    Model(#[from] robust_mdp_core::Error),
}

/// A number given either as JSON number or as a string `"p/q"` / `"1.5"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Num(pub f64);

/// Parses `"p/q"` or a plain decimal.
pub fn parse_number(s: &str) -> Result<f64, FormatError> {
    let bad = || FormatError::Number(s.to_string());
    let t = s.trim();
    match t.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            Ok(p / q)
        }
        None => t.parse().map_err(|_| bad()),
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string such as \"5/9\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                parse_number(v).map(Num).map_err(E::custom)
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub controls: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub feasible: BTreeMap<String, Vec<String>>,
    pub kernel: BTreeMap<String, Vec<Num>>,
    pub cost: BTreeMap<String, Vec<Num>>,
    pub radius: Num,
}

impl ModelFile {
    /// Builds the model. Shapes and names are checked here; probabilities,
    /// costs and the radius are left to [`McmModel::validate`].
    pub fn into_model(self) -> Result<McmModel, FormatError> {
        let nx = self.states.len();
        let nu = self.controls.len();
        for (what, map) in [("kernel", &self.kernel), ("cost", &self.cost)] {
            if let Some(c) = map.keys().find(|c| !self.controls.contains(c)) {
                return Err(FormatError::UnknownControl { what, control: c.clone() });
            }
        }

        let mut feasible = vec![(0..nu).collect::<Vec<_>>(); nx];
        for (state, controls) in &self.feasible {
            let x =
                self.states.iter().position(|s| s == state).ok_or_else(|| FormatError::UnknownState(state.clone()))?;
            feasible[x] = controls
                .iter()
                .map(|c| {
                    self.controls
                        .iter()
                        .position(|u| u == c)
                        .ok_or_else(|| FormatError::UnknownControl { what: "feasible set", control: c.clone() })
                })
                .collect::<Result<_, _>>()?;
        }

        let lookup = |what: &'static str, map: &BTreeMap<String, Vec<Num>>, control: &str, len: usize| {
            let v = map.get(control).ok_or_else(|| FormatError::Missing { what, control: control.to_string() })?;
            if v.len() != len {
                return Err(FormatError::Length { what, control: control.to_string(), expected: len, found: v.len() });
            }
            Ok(v.iter().map(|n| n.0).collect::<Vec<f64>>())
        };

        let mut kernel = vec![0.0; nx * nu * nx];
        let mut cost = vec![0.0; nx * nu];
        for (u, control) in self.controls.iter().enumerate() {
            let k = lookup("kernel", &self.kernel, control, nx * nx)?;
            let c = lookup("cost", &self.cost, control, nx)?;
            for x in 0..nx {
                let at = (x * nu + u) * nx;
                kernel[at..at + nx].copy_from_slice(&k[x * nx..(x + 1) * nx]);
                cost[x * nu + u] = c[x];
            }
        }

        Ok(McmModel::new(self.states, self.controls, feasible, Kernel::new(nx, nu, kernel)?, cost, self.radius.0)?)
    }

    pub fn from_model(model: &McmModel) -> Self {
        let nx = model.n_states();
        let mut kernel = BTreeMap::new();
        let mut cost = BTreeMap::new();
        let mut feasible = BTreeMap::new();
        for (u, control) in model.controls.iter().enumerate() {
            let m = model.kernel.control_matrix(u);
            kernel.insert(control.clone(), m.as_slice().iter().map(|&p| Num(p)).collect());
            cost.insert(control.clone(), (0..nx).map(|x| Num(model.cost(x, u))).collect());
        }
        for (x, state) in model.states.iter().enumerate() {
            if model.feasible(x).len() != model.n_controls() {
                feasible.insert(state.clone(), model.feasible(x).iter().map(|&u| model.controls[u].clone()).collect());
            }
        }
        Self {
            states: model.states.clone(),
            controls: model.controls.clone(),
            feasible,
            kernel,
            cost,
            radius: Num(model.radius),
        }
    }
}

pub fn parse_model(text: &str) -> Result<McmModel, FormatError> {
    serde_json::from_str::<ModelFile>(text)?.into_model()
}

pub fn read_model(path: &Path) -> Result<McmModel, FormatError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
    parse_model(&text)
}

pub fn write_model(model: &McmModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(model)).expect("model serialises")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "states": ["s", "t"],
        "controls": ["a", "b"],
        "feasible": { "t": ["a"] },
        "kernel": { "a": ["1/2", "1/2", 0, 1], "b": [1, 0, "0.25", "0.75"] },
        "cost": { "a": [1, 2], "b": ["1/2", 0] },
        "radius": "1/3"
    }"#;

    #[test]
    fn parses_fractions_and_feasible_defaults() {
        let m = parse_model(SMALL).unwrap();
        assert_eq!(m.feasible(0), &[0, 1]);
        assert_eq!(m.feasible(1), &[0]);
        assert_eq!(m.kernel.row(0, 0), &[0.5, 0.5]);
        assert_eq!(m.kernel.row(1, 1), &[0.25, 0.75]);
        assert_eq!(m.cost(0, 1), 0.5);
        assert_eq!(m.radius, 1.0 / 3.0);
        assert!(m.validate(1e-9).is_ok());
    }

    #[test]
    fn round_trips() {
        let m = parse_model(SMALL).unwrap();
        assert_eq!(parse_model(&write_model(&m)).unwrap(), m);
    }

    #[test]
    fn number_forms() {
        assert_eq!(parse_number("5/9").unwrap(), 5.0 / 9.0);
        assert_eq!(parse_number(" 0.5 ").unwrap(), 0.5);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("x").is_err());
    }

    #[test]
    fn names_the_problem() {
        let bad = SMALL.replace(r#""cost": { "a": [1, 2],"#, r#""cost": { "a": [1],"#);
        let e = parse_model(&bad).unwrap_err().to_string();
        assert!(e.contains("cost") && e.contains("`a`"), "{e}");

        let bad = SMALL.replace(r#"{ "t": ["a"] }"#, r#"{ "t": ["c"] }"#);
        assert!(parse_model(&bad).unwrap_err().to_string().contains("`c`"));

        let bad = SMALL.replace(r#"{ "t": ["a"] }"#, r#"{ "q": ["a"] }"#);
        assert!(parse_model(&bad).unwrap_err().to_string().contains("`q`"));
    }
}
