//! Domain files: a small TOML document describing a structure.
//!
//! ```toml
//! worlds = ["a", "b", "c"]
//! trigger = ["b", "c"]
//! delta = "auto"            # or a rational string
//! blocks = [["a"], ["b", "c"]]   # optional
//!
//! [f]
//! a = "1"
//! b = "2/3"
//! c = "0.5"
//!
//! [shift]                   # optional: f′ = f + δ·shift
//! b = "-1"
//! c = "1"
//! ```
//!
//! `[fprime]` may be given instead of `[shift]`; worlds missing from it keep
//! their base weight. Every number is a string.

use std::collections::BTreeMap;

use serde::Deserialize;
use toml::Value;

use crate::domain::delta::{perturb, select_delta_for_shift};
use crate::domain::BeliefStructure;
use crate::error::DomainError;
use crate::event::{EventSet, MAX_WORLDS};
use crate::scalar::Scalar;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    worlds: Vec<String>,
    f: BTreeMap<String, Value>,
    fprime: Option<BTreeMap<String, Value>>,
    shift: Option<BTreeMap<String, Value>>,
    #[serde(default)]
    trigger: Vec<String>,
    delta: Option<Value>,
    blocks: Option<Vec<Vec<String>>>,
}

fn number<S: Scalar>(field: &str, v: &Value) -> Result<S, DomainError> {
    match v {
        Value::String(s) => {
            S::parse_exact(s).map_err(|source| DomainError::MalformedNumber { field: field.to_string(), source })
        }
        other => Err(DomainError::Syntax(format!(
            "{field}: numbers must be quoted strings, found {}",
            other.type_str()
        ))),
    }
}

fn weight_table<S: Scalar>(
    name: &str,
    worlds: &[String],
    raw: &BTreeMap<String, Value>,
    default: Option<&[S]>,
) -> Result<Vec<S>, DomainError> {
    if let Some(unknown) = raw.keys().find(|k| !worlds.contains(k)) {
        return Err(DomainError::UnknownWorld(unknown.clone()));
    }
    worlds
        .iter()
        .enumerate()
        .map(|(i, w)| match (raw.get(w), default) {
            (Some(v), _) => number(&format!("{name}.{w}"), v),
            (None, Some(d)) => Ok(d[i].clone()),
            (None, None) => Err(DomainError::MissingWeight(w.clone())),
        })
        .collect()
}

fn event(worlds: &[String], labels: &[String]) -> Result<EventSet, DomainError> {
    labels.iter().try_fold(EventSet::EMPTY, |acc, l| {
        let i = worlds.iter().position(|w| w == l).ok_or_else(|| DomainError::UnknownWorld(l.clone()))?;
        Ok(acc | EventSet::singleton(i))
    })
}

pub fn parse_structure<S: Scalar>(text: &str) -> Result<BeliefStructure<S>, DomainError> {
    let raw: RawDomain = toml::from_str(text).map_err(|e| DomainError::Syntax(e.message().to_string()))?;
    let worlds = raw.worlds;
    if worlds.len() > MAX_WORLDS {
        return Err(DomainError::TooManyWorlds(worlds.len()));
    }
    for (i, w) in worlds.iter().enumerate() {
        if worlds[..i].contains(w) {
            return Err(DomainError::DuplicateWorld(w.clone()));
        }
    }
    let base: Vec<S> = weight_table("f", &worlds, &raw.f, None)?;
    let trigger = event(&worlds, &raw.trigger)?;
    let delta: Option<S> = match &raw.delta {
        None => None,
        Some(Value::String(s)) if s == "auto" => None,
        Some(v) => Some(number("delta", v)?),
    };

    let structure = match (&raw.fprime, &raw.shift) {
        (Some(_), Some(_)) => return Err(DomainError::Conflict("give either [fprime] or [shift], not both".into())),
        (None, Some(shift)) => {
            let zeros = vec![S::zero(); worlds.len()];
            let shift = weight_table("shift", &worlds, shift, Some(&zeros))?;
            let delta = match delta {
                Some(d) => d,
                None => select_delta_for_shift(&base, &shift, trigger)?.delta,
            };
            perturb(worlds.clone(), base, &shift, trigger, delta)?
        }
        (Some(fp), None) => {
            let perturbed = weight_table("fprime", &worlds, fp, Some(&base))?;
            // "auto" records the largest per-world weight change
            let delta = delta.unwrap_or_else(|| {
                base.iter()
                    .zip(&perturbed)
                    .map(|(a, b)| if a > b { a.clone() - b } else { b.clone() - a })
                    .max()
                    .unwrap_or_else(S::zero)
            });
            BeliefStructure::new(worlds.clone(), base, perturbed, trigger, delta)?
        }
        (None, None) => {
            BeliefStructure::new(worlds.clone(), base.clone(), base, trigger, delta.unwrap_or_else(S::zero))?
        }
    };
    match raw.blocks {
        Some(blocks) => {
            let blocks = blocks.iter().map(|b| event(&worlds, b)).collect::<Result<Vec<_>, _>>()?;
            structure.with_blocks(blocks)
        }
        None => Ok(structure),
    }
}

fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

fn label_list(s: &BeliefStructure<impl Scalar>, e: EventSet) -> String {
    let items: Vec<String> = e.indices().map(|i| quote(&s.worlds()[i])).collect();
    format!("[{}]", items.join(", "))
}

/// Writes an explicit `[fprime]` table and a rational δ, so that parsing the
/// output reproduces the structure exactly.
pub fn serialize_structure<S: Scalar>(s: &BeliefStructure<S>) -> String {
    let mut out = String::new();
    let worlds: Vec<String> = s.worlds().iter().map(|w| quote(w)).collect();
    out.push_str(&format!("worlds = [{}]\n", worlds.join(", ")));
    out.push_str(&format!("trigger = {}\n", label_list(s, s.trigger())));
    out.push_str(&format!("delta = {}\n", quote(&s.delta().to_string())));
    if !s.blocks().is_empty() {
        let blocks: Vec<String> = s.blocks().iter().map(|b| label_list(s, *b)).collect();
        out.push_str(&format!("blocks = [{}]\n", blocks.join(", ")));
    }
    for (name, table) in [("f", s.base()), ("fprime", s.perturbed())] {
        out.push_str(&format!("\n[{name}]\n"));
        for (w, v) in s.worlds().iter().zip(table) {
            out.push_str(&format!("{} = {}\n", quote(w), quote(&v.to_string())));
        }
    }
    out
}
