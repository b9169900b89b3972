use std::path::{Path, PathBuf};

use lpdim::covering::Rho;
use lpdim::homdim::{GeneratingSpec, Grid, Sampler};
use lpdim::lp::{Cocycle, VectorField};
use lpdim::relation::Model;
use lpdim::sofic::{exact_model, SoficApprox};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Dim,
    C1,
    Coh,
    Cost,
    Quality,
}

/// Which representation a `dim` run measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Representation {
    FiniteOrbit { k: usize },
    L2Relation,
    /// Either explicit atoms or the name of a projection in the model file.
    L2Projected {
        #[serde(default)]
        atoms: Option<Vec<usize>>,
        #[serde(default)]
        projection: Option<String>,
    },
    Fields {
        fields: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        labels: Option<Vec<Vec<(usize, usize)>>>,
    },
    EdgeQuotient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub model: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<Representation>,
    /// Exact-model scales; each must be a multiple of the atom count.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scales: Vec<usize>,
    /// Explicit sofic approximation files, used after the exact scales.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sofic: Vec<PathBuf>,
    pub grid: Grid,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub rho: Rho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn config_error(field: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::new("config", format!("`{field}`: {msg}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Failure::new("config", e.to_string()))?;
        cfg.validate(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    fn validate(&self, base: &Path) -> Result<(), Failure> {
        if !self.resolve(base, &self.model).is_file() {
            return Err(config_error("model", format!("{} does not exist", self.model.display())));
        }
        for (i, s) in self.sofic.iter().enumerate() {
            if !self.resolve(base, s).is_file() {
                return Err(config_error(&format!("sofic[{i}]"), format!("{} does not exist", s.display())));
            }
        }
        if self.scales.is_empty() && self.sofic.is_empty() {
            return Err(config_error("scales", "give at least one scale or sofic file"));
        }
        let g = &self.grid;
        for (name, empty) in [
            ("grid.F", g.letter_sets.is_empty()),
            ("grid.m", g.m.is_empty()),
            ("grid.delta", g.delta.is_empty()),
            ("grid.epsilon", g.epsilon.is_empty()),
        ] {
            if empty {
                return Err(config_error(name, "must not be empty"));
            }
        }
        if self.samples == 0 {
            return Err(config_error("samples", "must be positive"));
        }
        Ok(())
    }

    pub fn resolve(&self, base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    pub fn sigmas(&self, base: &Path, model: &Model) -> Result<Vec<SoficApprox>, Failure> {
        let n = model.num_atoms();
        let mut out = Vec::new();
        for (i, &d) in self.scales.iter().enumerate() {
            if d == 0 || d % n != 0 {
                return Err(config_error(&format!("scales[{i}]"), format!("{d} is not a positive multiple of {n} atoms")));
            }
            out.push(exact_model(model, d / n)?);
        }
        for s in &self.sofic {
            out.push(SoficApprox::load(self.resolve(base, s))?);
        }
        Ok(out)
    }
}

pub fn build_spec(model: &Model, rep: &Representation) -> Result<GeneratingSpec, Failure> {
    let spec = match rep {
        Representation::FiniteOrbit { k } => GeneratingSpec::finite_orbit(model.clone(), *k)?,
        Representation::L2Relation => GeneratingSpec::l2_relation(model.clone())?,
        Representation::L2Projected { atoms, projection } => {
            let atoms = match (atoms, projection) {
                (Some(a), None) => a.clone(),
                (None, Some(name)) => model
                    .named_projections()
                    .get(name)
                    .cloned()
                    .ok_or_else(|| config_error("representation.projection", format!("no projection named `{name}`")))?,
                _ => return Err(config_error("representation", "give exactly one of `atoms` and `projection`")),
            };
            GeneratingSpec::l2_projected(model.clone(), &atoms)?
        }
        Representation::Fields { fields, labels } => {
            let fields = fields.iter().map(|f| VectorField::new(f.clone())).collect();
            GeneratingSpec::new(model.clone(), fields, Cocycle::identity(), labels.clone())?
        }
        Representation::EdgeQuotient => {
            let g = lpdim::graphings::Graphing::from_model(model);
            GeneratingSpec::edge_quotient(model.clone(), &g)?
        }
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representation_json_forms() {
        let r: Representation = serde_json::from_str(r#"{"kind":"finite_orbit","k":3}"#).unwrap();
        assert_eq!(r, Representation::FiniteOrbit { k: 3 });
        let r: Representation = serde_json::from_str(r#"{"kind":"l2_projected","projection":"A"}"#).unwrap();
        assert!(matches!(r, Representation::L2Projected { projection: Some(_), atoms: None }));
        assert!(serde_json::from_str::<Representation>(r#"{"kind":"finite_orbit","k":3,"x":1}"#).is_err());
    }

    #[test]
    fn projected_needs_exactly_one_source() {
        let model = lpdim::relation::builders::periodic(1, 4);
        let both = Representation::L2Projected { atoms: Some(vec![0]), projection: Some("A".into()) };
        assert_eq!(build_spec(&model, &both).unwrap_err().module, "config");
        let named = Representation::L2Projected { atoms: None, projection: Some("A".into()) };
        assert!(build_spec(&model, &named).unwrap_err().message.contains("`A`"));
    }
}
