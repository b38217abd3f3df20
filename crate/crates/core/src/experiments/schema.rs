//! JSON Schema (draft 2020-12) for experiment specs.

use serde_json::{json, Value};

use super::config::SCHEMA_VERSION;

fn number() -> Value {
    json!({"type": "number"})
}

fn positive_int() -> Value {
    json!({"type": "integer", "minimum": 1})
}

fn object(required: &[&str], props: Value) -> Value {
    json!({"type": "object", "additionalProperties": false, "required": required, "properties": props})
}

fn solver() -> Value {
    json!({
        "type": "object",
        "additionalProperties": false,
        "properties": {
            "method": {"enum": ["ImplicitAdaptive", "ExplicitRK4", "MatrixExponentialOracle"]},
            "rtol": number(), "atol": number(),
            "max_step": {"type": ["number", "null"], "description": "null means unbounded"},
            "initial_step": number(), "newton_tol": number(),
            "max_newton_iters": positive_int(),
            "enforce_nonnegative": {"type": "boolean"}
        }
    })
}

fn boundary() -> Value {
    json!({"oneOf": [
        object(&["Dirichlet"], json!({"Dirichlet": number()})),
        {"const": "HoldInitial"},
        object(&["TimeSeries"], json!({"TimeSeries": object(&["times", "values"], json!({
            "times": {"type": "array", "items": number()},
            "values": {"type": "array", "items": number()}
        }))}))
    ]})
}

fn scheme() -> Value {
    json!({
        "type": "object",
        "additionalProperties": false,
        "properties": {
            "theta": {"type": "number", "minimum": 0, "maximum": 1},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "advection": {"enum": ["Upwind", "Central", "Limited"]},
            "left": boundary(),
            "right": boundary(),
            "snapshot_times": {"type": "array", "items": number()}
        }
    })
}

fn initial() -> Value {
    json!({"oneOf": [
        object(&["kind", "center", "width", "amplitude"], json!({
            "kind": {"const": "gaussian"}, "center": number(), "width": number(), "amplitude": number()
        })),
        object(&["kind", "scale", "amplitude"], json!({
            "kind": {"const": "exponential"}, "scale": number(), "amplitude": number()
        })),
        object(&["kind", "c1"], json!({"kind": {"const": "monomers_only"}, "c1": number()})),
        object(&["kind", "values"], json!({
            "kind": {"const": "values"}, "values": {"type": "array", "items": number()}
        }))
    ]})
}

fn probes() -> Value {
    object(
        &["lo", "hi", "count"],
        json!({"lo": number(), "hi": number(), "count": positive_int()}),
    )
}

fn setup() -> Value {
    object(
        &["q_max", "cells", "t", "initial"],
        json!({
            "m": number(), "q_min": number(), "q_max": number(),
            "cells": positive_int(), "t": number(),
            "initial": initial(), "scheme": scheme(),
            "map_mode": {"enum": ["AnalyticPowerLaw", "Numeric"]}
        }),
    )
}

fn scenario(name: &str, body: Value) -> Value {
    object(&[name], json!({ name: body }))
}

/// Schema accepted by `ExperimentSpec::from_json`.
pub fn schema() -> Value {
    let model = json!({"oneOf": [
        object(&["kind", "alpha0", "beta0", "gamma", "c1"], json!({
            "kind": {"const": "power_law"}, "alpha0": number(), "beta0": number(),
            "gamma": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}, "c1": number()
        })),
        object(&["kind", "params", "gamma", "c1"], json!({
            "kind": {"const": "physical"},
            "params": object(
                &["diff_coeff", "atomic_volume", "formation_energy", "temperature", "omega"],
                json!({"diff_coeff": number(), "atomic_volume": number(), "formation_energy": number(),
                       "temperature": number(), "omega": number()}),
            ),
            "gamma": number(), "c1": number()
        }))
    ]});
    let horizon = json!({"oneOf": [
        object(&["time"], json!({"time": number()})),
        object(&["fraction_of_g"], json!({"fraction_of_g": number()}))
    ]});
    let scenarios = vec![
        scenario(
            "BdReference",
            object(
                &["n_max", "horizon", "initial"],
                json!({
                    "n_max": positive_int(), "horizon": number(), "initial": initial(), "solver": solver()
                }),
            ),
        ),
        scenario(
            "SplittingConvergence",
            object(
                &["n_max", "horizon", "dt_list", "initial"],
                json!({
                    "n_max": positive_int(), "horizon": number(),
                    "dt_list": {"type": "array", "minItems": 2, "items": number()},
                    "initial": initial(), "chi": solver(), "reference": solver(), "split_index": positive_int()
                }),
            ),
        ),
        scenario(
            "FpVsBdVsLsw",
            object(
                &["n_max", "n0", "horizon", "initial"],
                json!({
                    "n_max": positive_int(), "n0": positive_int(), "horizon": horizon,
                    "initial": initial(), "cells_per_unit": positive_int(), "scheme": scheme(), "bd_solver": solver()
                }),
            ),
        ),
        scenario(
            "DiffusionResiduals",
            object(
                &["setup", "snapshot_cadence", "probes"],
                json!({
                    "setup": setup(), "snapshot_cadence": number(), "probes": probes()
                }),
            ),
        ),
        scenario(
            "DecayProbe",
            object(&["setup", "probes"], json!({"setup": setup(), "probes": probes()})),
        ),
        scenario(
            "McCrossCheck",
            object(
                &["setup", "n_samples", "dt_sde", "probes"],
                json!({
                    "setup": setup(), "n_samples": positive_int(), "dt_sde": number(),
                    "antithetic": {"type": "boolean"}, "probes": {"type": "array", "items": number()},
                    "allowance": number()
                }),
            ),
        ),
        scenario(
            "AssumptionAudit",
            object(
                &["n_max", "m"],
                json!({
                    "n_max": positive_int(), "m": number(), "dissipativity_probes": positive_int()
                }),
            ),
        ),
    ];
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "clusterkin experiment",
        "type": "object",
        "additionalProperties": false,
        "required": ["schema_version", "name", "model", "scenario"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "name": {"type": "string", "minLength": 1},
            "model": model,
            "seed": {"type": "integer", "minimum": 0},
            "output": {"type": "string"},
            "scenario": {"oneOf": scenarios}
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_every_scenario() {
        let s = schema();
        let names: Vec<String> = s["properties"]["scenario"]["oneOf"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v["required"][0].as_str().unwrap().to_string())
            .collect();
        assert_eq!(names.len(), 7);
        assert!(names.contains(&"McCrossCheck".to_string()));
    }
}
