//! JSON forms of boxes and cost certificates.
//!
//! ```json
//! {"layout": [[{"in": 2, "out": 2}], [{"in": 2, "out": 2}]],
//!  "table": {"0,0": {"0,0": "1/2", "1,1": "1/2"}, ...}}
//! ```
//!
//! Rationals are `"num/den"` strings in lowest terms. Missing output keys
//! mean probability zero; missing input keys are an error.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde_json::{json, Map, Value};

use crate::cost::CostCertificate;
use crate::error::{BoxError, Result};
use crate::layout::{decode, encode, SubsystemSpec, SystemLayout};
use crate::rational::{self, Rational};
use crate::table::BoxTable;

fn malformed(msg: impl Into<String>) -> BoxError {
    BoxError::Malformed(msg.into())
}

fn tuple_key(t: &[usize]) -> String {
    t.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn parse_tuple(key: &str, radices: &[usize], what: &str) -> Result<usize> {
    let parts: Vec<usize> = if key.trim().is_empty() {
        Vec::new()
    } else {
        key.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| malformed(format!("bad tuple key {key:?}")))
            })
            .collect::<Result<_>>()?
    };
    encode(&parts, radices.iter().copied(), what).map_err(|e| malformed(format!("key {key:?}: {e}")))
}

pub fn layout_to_json(layout: &SystemLayout) -> Value {
    Value::Array(
        layout
            .sites()
            .iter()
            .map(|site| Value::Array(site.iter().map(|s| json!({"in": s.inputs, "out": s.outputs})).collect()))
            .collect(),
    )
}

pub fn layout_from_json(v: &Value) -> Result<SystemLayout> {
    let sites = v
        .as_array()
        .ok_or_else(|| malformed("layout must be a list of sites"))?;
    let mut parsed = Vec::with_capacity(sites.len());
    for site in sites {
        let subs = site
            .as_array()
            .ok_or_else(|| malformed("site must be a list of subsystems"))?;
        let mut specs = Vec::with_capacity(subs.len());
        for s in subs {
            let field = |name: &str| {
                s.get(name)
                    .and_then(Value::as_u64)
                    .map(|n| n as usize)
                    .ok_or_else(|| malformed(format!("subsystem needs integer {name:?}")))
            };
            specs.push(SubsystemSpec::new(field("in")?, field("out")?));
        }
        parsed.push(specs);
    }
    SystemLayout::new(parsed)
}

pub fn box_to_json(b: &BoxTable) -> Value {
    let layout = b.layout();
    let in_r = layout.input_radices();
    let out_r = layout.output_radices();
    let mut table = Map::new();
    for x in 0..layout.num_inputs() {
        let mut row = Map::new();
        for (a, p) in b.row(x).iter().enumerate() {
            if !p.is_zero() {
                row.insert(tuple_key(&decode(a, &out_r)), Value::String(rational::format(p)));
            }
        }
        table.insert(tuple_key(&decode(x, &in_r)), Value::Object(row));
    }
    json!({"layout": layout_to_json(layout), "table": table})
}

/// Layout and raw entries, before any validity check.
pub fn entries_from_json(v: &Value) -> Result<(SystemLayout, Vec<Rational>)> {
    let layout = layout_from_json(v.get("layout").ok_or_else(|| malformed("missing \"layout\""))?)?;
    let table = v
        .get("table")
        .and_then(Value::as_object)
        .ok_or_else(|| malformed("missing \"table\" object"))?;
    let in_r = layout.input_radices();
    let out_r = layout.output_radices();
    let n_out = layout.num_outputs();
    let mut entries = vec![Rational::zero(); layout.num_entries()];
    let mut seen = vec![false; layout.num_inputs()];
    for (xk, row) in table {
        let x = parse_tuple(xk, &in_r, "input")?;
        if std::mem::replace(&mut seen[x], true) {
            return Err(malformed(format!("input {xk:?} listed twice")));
        }
        let row = row
            .as_object()
            .ok_or_else(|| malformed(format!("row {xk:?} is not an object")))?;
        for (ak, p) in row {
            let a = parse_tuple(ak, &out_r, "output")?;
            let p = p
                .as_str()
                .ok_or_else(|| malformed(format!("probability at {xk}/{ak} is not a string")))?;
            entries[x * n_out + a] = rational::parse(p)?;
        }
    }
    if let Some(x) = seen.iter().position(|s| !s) {
        return Err(malformed(format!(
            "no row for input {:?}",
            tuple_key(&decode(x, &in_r))
        )));
    }
    Ok((layout, entries))
}

pub fn box_from_json(v: &Value) -> Result<BoxTable> {
    let (layout, entries) = entries_from_json(v)?;
    BoxTable::new(layout, entries)
}

pub fn box_from_str(s: &str) -> Result<BoxTable> {
    let v: Value = serde_json::from_str(s).map_err(|e| BoxError::Parse(e.to_string()))?;
    box_from_json(&v)
}

pub fn certificate_to_json(cert: &CostCertificate, model: &str) -> Value {
    let lambda: Map<String, Value> = cert
        .lambda
        .iter()
        .map(|(m, w)| (m.to_string(), Value::String(rational::format(w))))
        .collect();
    json!({
        "model": model,
        "p": rational::format(&cert.p),
        "y": cert.y.iter().map(rational::format).collect::<Vec<_>>(),
        "lambda": lambda,
    })
}

/// Certificate and the model name it was issued for.
pub fn certificate_from_json(v: &Value) -> Result<(CostCertificate, String)> {
    let str_field = |name: &str| {
        v.get(name)
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(format!("certificate needs string {name:?}")))
    };
    let model = str_field("model")?.to_string();
    let p = rational::parse(str_field("p")?)?;
    let y = v
        .get("y")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("certificate needs list \"y\""))?
        .iter()
        .map(|e| {
            e.as_str()
                .ok_or_else(|| malformed("y entries are strings"))
                .and_then(rational::parse)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lambda = BTreeMap::new();
    for (k, w) in v
        .get("lambda")
        .and_then(Value::as_object)
        .ok_or_else(|| malformed("certificate needs object \"lambda\""))?
    {
        let m: usize = k.parse().map_err(|_| malformed(format!("bad vertex index {k:?}")))?;
        let w = w.as_str().ok_or_else(|| malformed("lambda weights are strings"))?;
        lambda.insert(m, rational::parse(w)?);
    }
    Ok((CostCertificate { p, y, lambda }, model))
}
