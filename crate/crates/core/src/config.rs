//! Plain-text configuration files: `key = value` lines under bracketed
//! section headers, `#` or `;` full-line comments, comma-separated lists.

use std::collections::BTreeMap;

use crate::estimators::{FixedEffects, IvMode, ModelSpec};
use crate::linalg::CovVariant;
use crate::montecarlo::DgpConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Section {
    values: BTreeMap<String, String>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing key '{key}'")))
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn parse_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("key '{key}': '{raw}' is not a number"))),
        }
    }

    pub fn parse_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::Config(format!("key '{key}': '{raw}' is not a count"))),
        }
    }

    pub fn parse_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<u64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("key '{key}': '{raw}' is not an integer"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, Section>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                if name.is_empty() {
                    return Err(Error::Config(format!("line {lineno}: empty section name")));
                }
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {lineno}: expected 'key = value', found '{line}'"
                )));
            };
            let section = current
                .as_ref()
                .ok_or_else(|| Error::Config(format!("line {lineno}: key before any [section]")))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let slot = sections.get_mut(section).expect("section inserted above");
            if slot.values.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!(
                    "line {lineno}: duplicate key '{key}' in [{section}]"
                )));
            }
        }
        Ok(ConfigFile { sections })
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing section [{name}]")))
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }
}

/// Reads a model spec from a `[model]` section.
pub fn model_spec_from_text(text: &str) -> Result<ModelSpec> {
    let file = ConfigFile::parse(text)?;
    let section = file.section("model")?;

    let mut spec = ModelSpec::new(
        section.get("name").unwrap_or("model"),
        section.require("dependent")?,
    );
    spec.exogenous = section.list("exogenous");
    spec.endogenous = section.list("endogenous");
    spec.instruments = section.list("instruments");
    spec.log_columns = section.list("log").into_iter().collect();
    for pair in section.list("interactions") {
        let Some((a, b)) = pair.split_once(':') else {
            return Err(Error::Config(format!(
                "interaction '{pair}' must be written as colA:colB"
            )));
        };
        spec.interactions
            .push((a.trim().to_string(), b.trim().to_string()));
    }
    spec.fixed_effects = match section.get("fixed_effects").unwrap_or("none") {
        "none" => FixedEffects::None,
        "state" => FixedEffects::State,
        other => {
            return Err(Error::Config(format!(
                "fixed_effects must be 'none' or 'state', found '{other}'"
            )))
        }
    };
    if let Some(cov) = section.get("covariance") {
        spec.covariance = CovVariant::parse(cov).map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(mode) = section.get("iv_mode") {
        spec.iv_mode = IvMode::parse(mode).map_err(|e| Error::Config(e.to_string()))?;
    }
    spec.validate()?;
    Ok(spec)
}

/// Reads a Monte Carlo experiment: a `[dgp]` section over the defaults plus
/// an optional `[experiment]` section with the replication count.
pub fn experiment_from_text(text: &str) -> Result<(DgpConfig, usize)> {
    let file = ConfigFile::parse(text)?;
    let dgp = file.section("dgp")?;
    let mut config = DgpConfig::default();

    let known = [
        "n_states",
        "n_years",
        "beta_pop",
        "beta_import",
        "beta_interaction",
        "sigma_fixed_effect",
        "sigma_noise",
        "rho",
        "gamma_lag",
        "gamma_ar",
        "sigma_import_shock",
        "import_intercept",
        "dist_min",
        "dist_max",
        "seed",
    ];
    for key in dgp.keys() {
        if !known.contains(&key) {
            return Err(Error::Config(format!("unknown [dgp] key '{key}'")));
        }
    }

    if let Some(v) = dgp.parse_usize("n_states")? {
        config.n_states = v;
    }
    if let Some(v) = dgp.parse_usize("n_years")? {
        config.n_years = v;
    }
    if let Some(v) = dgp.parse_f64("beta_pop")? {
        config.beta_pop = v;
    }
    if let Some(v) = dgp.parse_f64("beta_import")? {
        config.beta_import = v;
    }
    if let Some(v) = dgp.parse_f64("beta_interaction")? {
        config.beta_interaction = v;
    }
    if let Some(v) = dgp.parse_f64("sigma_fixed_effect")? {
        config.sigma_fixed_effect = v;
    }
    if let Some(v) = dgp.parse_f64("sigma_noise")? {
        config.sigma_noise = v;
    }
    if let Some(v) = dgp.parse_f64("rho")? {
        config.rho = v;
    }
    if let Some(v) = dgp.parse_f64("gamma_lag")? {
        config.gamma_lag = v;
    }
    if let Some(v) = dgp.parse_f64("gamma_ar")? {
        config.gamma_ar = v;
    }
    if let Some(v) = dgp.parse_f64("sigma_import_shock")? {
        config.sigma_import_shock = v;
    }
    if let Some(v) = dgp.parse_f64("import_intercept")? {
        config.import_intercept = v;
    }
    if let Some(v) = dgp.parse_f64("dist_min")? {
        config.dist_min = v;
    }
    if let Some(v) = dgp.parse_f64("dist_max")? {
        config.dist_max = v;
    }
    if let Some(v) = dgp.parse_u64("seed")? {
        config.seed = v;
    }
    config.validate()?;

    let n_reps = if file.has_section("experiment") {
        file.section("experiment")?
            .parse_usize("replications")?
            .unwrap_or(1000)
    } else {
        1000
    };
    if n_reps == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    Ok((config, n_reps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_lists() {
        let text = "# comment\n[model]\nname = m1\ndependent = y\nexogenous = a, b\n";
        let spec = model_spec_from_text(text).unwrap();
        assert_eq!(spec.name, "m1");
        assert_eq!(spec.exogenous, vec!["a", "b"]);
    }

    #[test]
    fn full_iv_spec_round_trip() {
        let text = "\
[model]
name = quantity_iv
dependent = emp
exogenous = pop
endogenous = ngi
instruments = z1, z2
interactions = ngi:dist
fixed_effects = state
covariance = hc1
iv_mode = interacted-instruments
";
        let spec = model_spec_from_text(text).unwrap();
        assert_eq!(spec.endogenous, vec!["ngi"]);
        assert_eq!(spec.instruments.len(), 2);
        assert_eq!(spec.interactions, vec![("ngi".to_string(), "dist".to_string())]);
        assert_eq!(spec.fixed_effects, FixedEffects::State);
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = "[model]\ndependent = y\ndependent = z\n";
        assert!(model_spec_from_text(text).is_err());
    }

    #[test]
    fn dgp_defaults_and_overrides() {
        let text = "[dgp]\nrho = 0\nseed = 7\n[experiment]\nreplications = 12\n";
        let (config, reps) = experiment_from_text(text).unwrap();
        assert_eq!(config.rho, 0.0);
        assert_eq!(config.seed, 7);
        assert_eq!(reps, 12);
        assert_eq!(config.n_states, DgpConfig::default().n_states);
    }

    #[test]
    fn unknown_dgp_key_rejected() {
        let text = "[dgp]\nrho = 0\nnot_a_key = 3\n";
        assert!(experiment_from_text(text).is_err());
    }
}
