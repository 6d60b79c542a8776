//! Deterministic JSON output: keys sorted, floats in shortest round-trip form.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

#[derive(Debug, Default)]
pub struct Object(BTreeMap<String, Value>);

impl Object {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.0.insert(key.into(), value.into());
        self
    }
}

impl From<Object> for Value {
    // Insertion in key order keeps the output sorted even if serde_json's
    // map is order-preserving.
    fn from(obj: Object) -> Value {
        Value::Object(obj.0.into_iter().collect::<Map<_, _>>())
    }
}

/// Non-finite floats have no JSON form; they become `null`.
pub fn float(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn render(value: impl Into<Value>) -> String {
    let mut s = serde_json::to_string_pretty(&value.into()).expect("in-memory JSON");
    s.push('\n');
    s
}
