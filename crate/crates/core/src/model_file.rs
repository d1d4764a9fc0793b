//! Model files in TOML.
//!
//! Top-level keys: `initial_customers`, `service`, `mmap`, `environment`,
//! `resources`, `numeric`. See the README for the full schema and
//! `fixtures/` for complete examples.

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result, Violation, Violations};
use crate::model::ModelConfig;

const TOP_LEVEL: [&str; 6] = ["initial_customers", "service", "mmap", "environment", "resources", "numeric"];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn check_distributions(config: &ModelConfig) -> Result<()> {
    let mut found = Vec::new();
    let mut check = |context: String, d: &DistributionSpec| {
        if let Err(reason) = d.validate() {
            found.push(Violation::BadDistribution { context, reason });
        }
    };
    for (r, row) in config.service.iter().enumerate() {
        for (i, d) in row.iter().enumerate() {
            check(format!("service[{r}][{i}]"), d);
        }
    }
    for (n, e) in config.environment.kernel.iter().enumerate() {
        check(format!("environment.kernel[{n}]"), &e.dist);
    }
    for (name, table) in [("arrival", &config.resources.arrival), ("departure", &config.resources.departure)] {
        for (r, row) in table.iter().enumerate() {
            for (c, d) in row.iter().enumerate() {
                check(format!("resources.{name}[{r}][{c}]"), d);
            }
        }
    }
    if found.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(Violations(found)))
    }
}

/// Parses a model document. Structural model checks are left to
/// [`validate_model`](crate::model::validate_model); distribution parameters
/// are checked here.
pub fn load_model(text: &str) -> Result<ModelConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Syntax {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    for key in TOP_LEVEL {
        if !table.contains_key(key) {
            return Err(Error::Schema { field: key.to_string(), message: "missing block".into() });
        }
    }
    if let Some(extra) = table.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
        return Err(Error::Schema { field: extra.clone(), message: "unknown block".into() });
    }
    let config: ModelConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        Error::Schema { field: backticked(&message).unwrap_or_else(|| "?".into()), message }
    })?;
    check_distributions(&config)?;
    Ok(config)
}

pub fn load_model_file(path: &std::path::Path) -> Result<ModelConfig> {
    load_model(&std::fs::read_to_string(path)?)
}

/// Canonical TOML form of a configuration.
pub fn save_model(config: &ModelConfig) -> String {
    toml::to_string(config).expect("model configurations always serialize")
}
