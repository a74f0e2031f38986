//! Reports shared by the human table and `--json` output. Both render each
//! number through the same canonical formatting, so they agree digit for
//! digit.

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::cli::files::canonical;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Nums(Vec<f64>),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Value {
    fn json(&self) -> serde_json::Value {
        match self {
            Value::Num(x) => serde_json::json!(canonical(*x)),
            Value::Nums(xs) => serde_json::json!(xs.iter().map(|x| canonical(*x)).collect::<Vec<_>>()),
            Value::Int(i) => serde_json::json!(i),
            Value::Bool(b) => serde_json::json!(b),
            Value::Text(s) => serde_json::json!(s),
        }
    }

    fn human(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            other => other.json().to_string(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<Vec<f64>> for Value {
    fn from(xs: Vec<f64>) -> Self {
        Value::Nums(xs)
    }
}

impl From<&[f64]> for Value {
    fn from(xs: &[f64]) -> Self {
        Value::Nums(xs.to_vec())
    }
}

impl From<u64> for Value {
    fn from(i: u64) -> Self {
        Value::Int(i)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as u64)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

/// An ordered list of labelled values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    rows: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.rows.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.rows.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn render_human(&self) -> String {
        let width = self.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (key, value) in &self.rows {
            out.push_str(&format!("{key:<width$}  {}\n", value.human()));
        }
        out
    }

    pub fn render_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.rows.len()))?;
        for (key, value) in &self.rows {
            map.serialize_entry(key, &value.json())?;
        }
        map.end()
    }
}
