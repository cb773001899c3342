//! JSON (de)serialization for MDP files.
//!
//! Format:
//! ```json
//! {
//!   "gamma": 0.9,
//!   "states": 3,
//!   "actions": [[0, 1], [0], [0]],
//!   "transitions": {"0,0": [0.5, 0.5, 0.0], "...": []},
//!   "rewards": {"0,0,1": 1.0}
//! }
//! ```
//! `actions[s]` lists the action labels available at state `s`; transition
//! keys are `"s,a"` with `a` a label from that list, reward keys are
//! `"s,a,s'"`. Omitted reward triples default to 0. Validation failures are
//! reported with the offending key so files can be fixed by hand.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

#[derive(Debug, Serialize, Deserialize)]
struct MdpFile {
    gamma: f64,
    states: usize,
    actions: Vec<Vec<usize>>,
    transitions: BTreeMap<String, Vec<f64>>,
    rewards: BTreeMap<String, f64>,
}

fn parse_key(key: &str, parts: usize) -> Result<Vec<usize>> {
    let fields: Vec<&str> = key.split(',').collect();
    if fields.len() != parts {
        return Err(Error::ModelFile {
            location: format!("key \"{key}\""),
            message: format!("expected {parts} comma-separated indices"),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.trim().parse::<usize>().map_err(|_| Error::ModelFile {
                location: format!("key \"{key}\""),
                message: format!("\"{f}\" is not a nonnegative integer"),
            })
        })
        .collect()
}

/// Parse an MDP from its JSON text representation.
pub fn mdp_from_json(text: &str) -> Result<Mdp> {
    let file: MdpFile = serde_json::from_str(text)?;
    let n = file.states;
    if file.actions.len() != n {
        return Err(Error::ModelFile {
            location: "\"actions\"".into(),
            message: format!("{} per-state lists, expected {n}", file.actions.len()),
        });
    }
    // Map action label -> local slot per state.
    let mut slot_of: Vec<BTreeMap<usize, usize>> = Vec::with_capacity(n);
    for (s, labels) in file.actions.iter().enumerate() {
        if labels.is_empty() {
            return Err(Error::ModelFile {
                location: format!("\"actions\"[{s}]"),
                message: "state has no available actions".into(),
            });
        }
        let mut map = BTreeMap::new();
        for (slot, &label) in labels.iter().enumerate() {
            if map.insert(label, slot).is_some() {
                return Err(Error::ModelFile {
                    location: format!("\"actions\"[{s}]"),
                    message: format!("duplicate action label {label}"),
                });
            }
        }
        slot_of.push(map);
    }

    let mut transition: Vec<Vec<Vec<f64>>> =
        (0..n).map(|s| vec![Vec::new(); file.actions[s].len()]).collect();
    for (key, row) in &file.transitions {
        let idx = parse_key(key, 2)?;
        let (s, a) = (idx[0], idx[1]);
        if s >= n {
            return Err(Error::ModelFile {
                location: format!("\"transitions\".\"{key}\""),
                message: format!("state {s} out of range (states = {n})"),
            });
        }
        let slot = *slot_of[s].get(&a).ok_or_else(|| Error::ModelFile {
            location: format!("\"transitions\".\"{key}\""),
            message: format!("action label {a} not listed at state {s}"),
        })?;
        if row.len() != n {
            return Err(Error::ModelFile {
                location: format!("\"transitions\".\"{key}\""),
                message: format!("probability vector has {} entries, expected {n}", row.len()),
            });
        }
        transition[s][slot] = row.clone();
    }
    for (s, rows) in transition.iter().enumerate() {
        for (slot, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::ModelFile {
                    location: format!("\"transitions\".\"{s},{}\"", file.actions[s][slot]),
                    message: "missing transition row".into(),
                });
            }
        }
    }

    let mut reward: Vec<Vec<Vec<f64>>> =
        (0..n).map(|s| vec![vec![0.0; n]; file.actions[s].len()]).collect();
    for (key, &r) in &file.rewards {
        let idx = parse_key(key, 3)?;
        let (s, a, sp) = (idx[0], idx[1], idx[2]);
        if s >= n || sp >= n {
            return Err(Error::ModelFile {
                location: format!("\"rewards\".\"{key}\""),
                message: format!("state index out of range (states = {n})"),
            });
        }
        let slot = *slot_of[s].get(&a).ok_or_else(|| Error::ModelFile {
            location: format!("\"rewards\".\"{key}\""),
            message: format!("action label {a} not listed at state {s}"),
        })?;
        reward[s][slot][sp] = r;
    }

    Mdp::new(file.gamma, transition, reward).map_err(|e| match e {
        // Surface structural errors with the JSON vocabulary.
        Error::RowNotNormalized { state, action, sum } => Error::ModelFile {
            location: format!("\"transitions\".\"{state},{}\"", file.actions[state][action]),
            message: format!("row sums to {sum}, expected 1 within 1e-12"),
        },
        Error::InvalidProbability { state, action, next, value } => Error::ModelFile {
            location: format!("\"transitions\".\"{state},{}\"[{next}]", file.actions[state][action]),
            message: format!("invalid probability {value}"),
        },
        Error::RewardOutOfRange { state, action, next, value } => Error::ModelFile {
            location: format!("\"rewards\".\"{state},{},{next}\"", file.actions[state][action]),
            message: format!("reward {value} lies outside [0,1]"),
        },
        other => other,
    })
}

/// Serialize an MDP to the JSON text format (action labels are `0..`).
pub fn mdp_to_json(mdp: &Mdp) -> Result<String> {
    let n = mdp.num_states();
    let actions: Vec<Vec<usize>> = (0..n).map(|s| (0..mdp.num_actions(s)).collect()).collect();
    let mut transitions = BTreeMap::new();
    let mut rewards = BTreeMap::new();
    for s in 0..n {
        for a in 0..mdp.num_actions(s) {
            transitions.insert(format!("{s},{a}"), mdp.transition_row(s, a).to_vec());
            for sp in 0..n {
                let r = mdp.reward_triple(s, a, sp);
                if r != 0.0 {
                    rewards.insert(format!("{s},{a},{sp}"), r);
                }
            }
        }
    }
    let file = MdpFile { gamma: mdp.gamma(), states: n, actions, transitions, rewards };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<Mdp> {
    let text = std::fs::read_to_string(path)?;
    mdp_from_json(&text)
}

pub fn save_mdp(mdp: &Mdp, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mdp_to_json(mdp)?)?;
    Ok(())
}
