use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::spec::ExperimentKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultField {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Record of one run. Everything except the timestamps is a function of the
/// spec and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub spec_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub results: Vec<ResultField>,
    pub checks: Vec<Check>,
}

impl RunManifest {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn result(&self, name: &str) -> Option<f64> {
        self.results.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Absolute and relative tolerance; a field differs when
/// |a − b| > abs + rel·max(|a|, |b|).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tolerances {
    pub default: Tolerance,
    pub per_field: BTreeMap<String, Tolerance>,
}

impl Tolerances {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn uniform(abs: f64, rel: f64) -> Self {
        Self {
            default: Tolerance { abs, rel },
            per_field: BTreeMap::new(),
        }
    }

    pub fn with_field(mut self, name: &str, abs: f64, rel: f64) -> Self {
        self.per_field.insert(name.to_string(), Tolerance { abs, rel });
        self
    }

    fn for_field(&self, name: &str) -> Tolerance {
        self.per_field.get(name).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDiff {
    pub name: String,
    pub a: f64,
    pub b: f64,
}

impl FieldDiff {
    pub fn delta(&self) -> f64 {
        (self.a - self.b).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffReport {
    pub fields: Vec<FieldDiff>,
    /// Checks whose pass flag differs or that only one manifest has.
    pub checks: Vec<String>,
    pub spec_hash_differs: bool,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.fields.is_empty() && self.checks.is_empty()
    }

    pub fn field(&self, name: &str) -> Option<&FieldDiff> {
        self.fields.iter().find(|f| f.name == name)
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return writeln!(f, "no differences");
        }
        for d in &self.fields {
            writeln!(f, "{}\t{:e}\t{:e}\t{:e}", d.name, d.a, d.b, d.delta())?;
        }
        for c in &self.checks {
            writeln!(f, "check {c}: differs")?;
        }
        Ok(())
    }
}

/// Numeric diff of two manifests of the same experiment kind and result
/// layout. Timestamps are ignored; the checks may differ between models.
pub fn compare(a: &RunManifest, b: &RunManifest, tol: &Tolerances) -> Result<DiffReport> {
    if a.kind != b.kind {
        return Err(Error::SchemaMismatch(format!("kinds {} and {}", a.kind, b.kind)));
    }
    let names = |m: &RunManifest| m.results.iter().map(|r| r.name.clone()).collect::<Vec<_>>();
    if names(a) != names(b) {
        return Err(Error::SchemaMismatch("result fields differ".into()));
    }
    let mut report = DiffReport {
        spec_hash_differs: a.spec_hash != b.spec_hash,
        ..DiffReport::default()
    };
    for (ra, rb) in a.results.iter().zip(&b.results) {
        let t = tol.for_field(&ra.name);
        let same = ra.value.to_bits() == rb.value.to_bits()
            || (ra.value - rb.value).abs() <= t.abs + t.rel * ra.value.abs().max(rb.value.abs());
        if !same {
            report.fields.push(FieldDiff {
                name: ra.name.clone(),
                a: ra.value,
                b: rb.value,
            });
        }
    }
    for ca in &a.checks {
        match b.check(&ca.name) {
            Some(cb) if cb.pass == ca.pass => {}
            _ => report.checks.push(ca.name.clone()),
        }
    }
    for cb in &b.checks {
        if a.check(&cb.name).is_none() {
            report.checks.push(cb.name.clone());
        }
    }
    Ok(report)
}
