use bidstack::RunConfig;
use serde_json::Value;

fn schema() -> Value {
    serde_json::from_str(include_str!("../config.schema.json")).unwrap()
}

fn resolve<'a>(root: &'a Value, node: &'a Value) -> &'a Value {
    match node.get("$ref").and_then(Value::as_str) {
        Some(r) => {
            let name = r.trim_start_matches("#/$defs/");
            &root["$defs"][name]
        }
        None => node,
    }
}

/// Every serialised object field is declared in the schema, and vice versa.
fn same_keys(root: &Value, schema: &Value, value: &Value, path: &str) {
    let schema = resolve(root, schema);
    let Some(obj) = value.as_object() else { return };
    let Some(props) = schema.get("properties").and_then(Value::as_object) else { return };
    let mut a: Vec<&String> = obj.keys().collect();
    let mut b: Vec<&String> = props.keys().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b, "at {path}");
    for (k, v) in obj {
        same_keys(root, &props[k], v, &format!("{path}.{k}"));
    }
}

#[test]
fn schema_covers_config() {
    let root = schema();
    let value = serde_json::to_value(RunConfig::default()).unwrap();
    same_keys(&root, &root, &value, "$");
}

#[test]
fn schema_defaults_match() {
    let root = schema();
    let value = serde_json::to_value(RunConfig::default()).unwrap();
    let props = root["properties"]["market"]["properties"].as_object().unwrap();
    for (k, p) in props {
        if let Some(d) = p.get("default") {
            let got = value["market"][k].as_f64().unwrap();
            assert!((got - d.as_f64().unwrap()).abs() < 1e-15, "{k}");
        }
    }
    assert_eq!(root["properties"]["mc"]["properties"]["paths"]["default"], value["mc"]["paths"]);
    assert_eq!(root["properties"]["plant"]["properties"]["cache_hours"]["default"], value["plant"]["cache_hours"]);
}
