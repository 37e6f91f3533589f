//! Declarative pipelines.
//!
//! A pipeline file is TOML:
//!
//! ```toml
//! state = "work/pipeline.state.json"   # optional
//!
//! [matrix]                             # optional
//! dataset = ["shoaib", "wisdm"]
//! model = ["rf", "svm"]
//!
//! [[stage]]
//! name = "train-{dataset}-{model}"
//! argv = ["train", "--model", "{model}", "--features", "work/{dataset}.csv",
//!         "--split", "seen", "--seed", "1", "--out", "work/{dataset}-{model}.json"]
//! inputs = ["work/{dataset}.csv"]
//! outputs = ["work/{dataset}-{model}.json"]
//! ```
//!
//! A stage is instantiated once per combination of the matrix variables in
//! its `name`. Any list element that still holds a placeholder afterwards
//! expands into one element per combination of its remaining variables, so
//! a single `report` stage can gather every `work/{dataset}-{model}.json`.
//! Combinations vary the alphabetically later variable fastest.
//!
//! Paths are relative to the pipeline file's directory. A stage depends on
//! whichever stage declares one of its inputs as an output; inputs nobody
//! produces must already exist. A stage is skipped when the digest of its
//! argv and input contents matches the one recorded in the state file and
//! all of its outputs exist.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command, PipelineArgs};
use crate::fsutil::{digest_bytes, digest_path, read_string, write_string};
use crate::usage;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineFile {
    state: Option<String>,
    #[serde(default)]
    matrix: BTreeMap<String, Vec<String>>,
    #[serde(default, rename = "stage")]
    stages: Vec<StageSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageSpec {
    name: String,
    argv: Vec<String>,
    #[serde(default)]
    inputs: Vec<String>,
    outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: String,
    pub argv: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct State {
    stages: BTreeMap<String, StageState>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StageState {
    fingerprint: String,
    outputs: BTreeMap<String, String>,
}

/// Matrix variables named by `{var}` placeholders in `text`, sorted.
fn placeholders(text: &str, matrix: &BTreeMap<String, Vec<String>>) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else { break };
        let name = &after[..close];
        if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            if !matrix.contains_key(name) {
                return Err(usage(format!(
                    "unknown matrix variable {{{name}}} in {text:?}"
                )));
            }
            out.insert(name.to_string());
        }
        rest = &after[close + 1..];
    }
    Ok(out)
}

fn substitute(text: &str, binding: &BTreeMap<String, String>) -> String {
    binding.iter().fold(text.to_string(), |s, (k, v)| {
        s.replace(&format!("{{{k}}}"), v)
    })
}

/// Every assignment of `vars`, later variables varying fastest.
fn combinations(
    vars: &BTreeSet<String>,
    matrix: &BTreeMap<String, Vec<String>>,
) -> Vec<BTreeMap<String, String>> {
    let mut out = vec![BTreeMap::new()];
    for var in vars {
        let values = &matrix[var];
        out = out
            .into_iter()
            .flat_map(|b| {
                values.iter().map(move |v| {
                    let mut b = b.clone();
                    b.insert(var.clone(), v.clone());
                    b
                })
            })
            .collect();
    }
    out
}

fn expand_list(
    items: &[String],
    binding: &BTreeMap<String, String>,
    matrix: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for item in items {
        let bound = substitute(item, binding);
        let free = placeholders(&bound, matrix)?;
        for b in combinations(&free, matrix) {
            out.push(substitute(&bound, &b));
        }
    }
    Ok(out)
}

fn expand(file: &PipelineFile) -> Result<Vec<Stage>> {
    for (k, v) in &file.matrix {
        if v.is_empty() {
            return Err(usage(format!("matrix variable {k} has no values")));
        }
    }
    let mut stages = Vec::new();
    for spec in &file.stages {
        let vars = placeholders(&spec.name, &file.matrix)?;
        for binding in combinations(&vars, &file.matrix) {
            stages.push(Stage {
                name: substitute(&spec.name, &binding),
                argv: expand_list(&spec.argv, &binding, &file.matrix)?,
                inputs: expand_list(&spec.inputs, &binding, &file.matrix)?,
                outputs: expand_list(&spec.outputs, &binding, &file.matrix)?,
            });
        }
    }
    Ok(stages)
}

fn normalize(p: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for c in p.split('/') {
        match c {
            "" | "." => {}
            ".." if parts.last().is_some_and(|l| *l != "..") => {
                parts.pop();
            }
            other => parts.push(other),
        }
    }
    let joined = parts.join("/");
    if p.starts_with('/') {
        format!("/{joined}")
    } else {
        joined
    }
}

/// Stages grouped into dependency levels; every stage's producers sit in
/// earlier levels. Fails on bad argv, duplicate names or outputs, missing
/// inputs and cycles, all before anything runs.
pub fn plan(stages: &[Stage], base: &Path) -> Result<Vec<Vec<usize>>> {
    let mut names = BTreeSet::new();
    let mut producer: BTreeMap<String, usize> = BTreeMap::new();
    for (i, s) in stages.iter().enumerate() {
        if !names.insert(s.name.as_str()) {
            return Err(usage(format!("duplicate stage name {}", s.name)));
        }
        if s.outputs.is_empty() {
            return Err(usage(format!("stage {} declares no outputs", s.name)));
        }
        match Cli::try_parse_from(std::iter::once("har".to_string()).chain(s.argv.iter().cloned()))
        {
            Ok(cli) if matches!(cli.command, Command::Pipeline(_)) => {
                return Err(usage(format!(
                    "stage {} cannot run a nested pipeline",
                    s.name
                )));
            }
            Ok(_) => {}
            Err(e) => {
                let msg = e.to_string();
                let first = msg.lines().next().unwrap_or_default();
                return Err(usage(format!("stage {}: {first}", s.name)));
            }
        }
        for o in &s.outputs {
            if let Some(prev) = producer.insert(normalize(o), i) {
                return Err(usage(format!(
                    "output {o} declared by both {} and {}",
                    stages[prev].name, s.name
                )));
            }
        }
    }
    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); stages.len()];
    for (i, s) in stages.iter().enumerate() {
        for input in &s.inputs {
            match producer.get(&normalize(input)) {
                Some(&j) => {
                    deps[i].insert(j);
                }
                None if base.join(input).exists() => {}
                None => return Err(usage(format!("stage {}: missing input {input}", s.name))),
            }
        }
    }
    let mut level = vec![usize::MAX; stages.len()];
    let mut levels: Vec<Vec<usize>> = Vec::new();
    let mut done = 0;
    while done < stages.len() {
        let ready: Vec<usize> = (0..stages.len())
            .filter(|&i| level[i] == usize::MAX && deps[i].iter().all(|&d| level[d] < levels.len()))
            .collect();
        if ready.is_empty() {
            let stuck: Vec<&str> = (0..stages.len())
                .filter(|&i| level[i] == usize::MAX)
                .map(|i| stages[i].name.as_str())
                .collect();
            return Err(usage(format!(
                "dependency cycle among stages {}",
                stuck.join(", ")
            )));
        }
        for &i in &ready {
            level[i] = levels.len();
        }
        done += ready.len();
        levels.push(ready);
    }
    Ok(levels)
}

fn fingerprint(stage: &Stage, base: &Path) -> Result<String> {
    let inputs = stage
        .inputs
        .iter()
        .map(|p| Ok((p.clone(), digest_path(&base.join(p))?)))
        .collect::<Result<Vec<_>>>()?;
    let doc = serde_json::json!({
        "tool": env!("CARGO_PKG_VERSION"),
        "argv": stage.argv,
        "inputs": inputs,
    });
    Ok(digest_bytes(doc.to_string().as_bytes()))
}

fn load_state(path: &Path) -> Result<State> {
    if !path.exists() {
        return Ok(State::default());
    }
    serde_json::from_str(&read_string(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn save_state(path: &Path, state: &State) -> Result<()> {
    let mut text = serde_json::to_string_pretty(state)?;
    text.push('\n');
    write_string(path, &text)
}

enum Outcome {
    Skipped,
    Ran(f64, StageState),
}

fn run_stage(
    stage: &Stage,
    base: &Path,
    previous: Option<&StageState>,
    force: bool,
) -> Result<Outcome> {
    let fp = fingerprint(stage, base)?;
    let outputs_exist = stage.outputs.iter().all(|o| base.join(o).exists());
    if !force && outputs_exist && previous.is_some_and(|p| p.fingerprint == fp) {
        return Ok(Outcome::Skipped);
    }
    let start = Instant::now();
    let cli =
        Cli::try_parse_from(std::iter::once("har".to_string()).chain(stage.argv.iter().cloned()))
            .map_err(|e| usage(e.to_string()))?;
    crate::commands::run(cli.command).with_context(|| format!("stage {}", stage.name))?;
    let missing: Vec<&String> = stage
        .outputs
        .iter()
        .filter(|o| !base.join(o).exists())
        .collect();
    if !missing.is_empty() {
        anyhow::bail!("stage {} did not write {:?}", stage.name, missing);
    }
    let outputs = stage
        .outputs
        .iter()
        .map(|o| Ok((o.clone(), digest_path(&base.join(o))?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Outcome::Ran(
        start.elapsed().as_secs_f64(),
        StageState {
            fingerprint: fp,
            outputs,
        },
    ))
}

pub fn load(config: &Path) -> Result<(Vec<Stage>, Option<String>)> {
    let text = read_string(config)?;
    let file: PipelineFile =
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", config.display())))?;
    Ok((expand(&file)?, file.state))
}

pub fn run(a: &PipelineArgs) -> Result<()> {
    let (stages, state_rel) = load(&a.config)?;
    let base = a
        .config
        .canonicalize()
        .with_context(|| format!("resolving {}", a.config.display()))?
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    // Stage argv paths are relative to the pipeline file.
    std::env::set_current_dir(&base).with_context(|| format!("entering {}", base.display()))?;
    let base = PathBuf::from(".");
    let levels = plan(&stages, &base)?;
    let state_path = base.join(state_rel.unwrap_or_else(|| {
        let stem = a
            .config
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned());
        format!("{}.state.json", stem.unwrap_or_else(|| "pipeline".into()))
    }));
    let mut state = load_state(&state_path)?;
    let total = stages.len();

    if a.dry_run {
        let mut n = 0;
        for level in &levels {
            for &i in level {
                n += 1;
                println!(
                    "[{n}/{total}] {}: har {}",
                    stages[i].name,
                    stages[i].argv.join(" ")
                );
            }
        }
        return Ok(());
    }

    let started = Instant::now();
    let mut position = 0;
    let (mut ran, mut skipped) = (0, 0);
    for level in &levels {
        let outcomes: Vec<(usize, Result<Outcome>)> = level
            .par_iter()
            .map(|&i| {
                (
                    i,
                    run_stage(
                        &stages[i],
                        &base,
                        state.stages.get(&stages[i].name),
                        a.force,
                    ),
                )
            })
            .collect();
        let mut failure = None;
        for (i, outcome) in outcomes {
            position += 1;
            let name = &stages[i].name;
            match outcome {
                Ok(Outcome::Skipped) => {
                    skipped += 1;
                    eprintln!("pipeline: [{position}/{total}] {name}: skipped (up to date)");
                }
                Ok(Outcome::Ran(secs, st)) => {
                    ran += 1;
                    eprintln!("pipeline: [{position}/{total}] {name}: ran in {secs:.2} s");
                    state.stages.insert(name.clone(), st);
                }
                Err(e) => {
                    eprintln!("pipeline: [{position}/{total}] {name}: failed");
                    failure.get_or_insert(e);
                }
            }
        }
        save_state(&state_path, &state)?;
        if let Some(e) = failure {
            return Err(e);
        }
    }
    eprintln!(
        "pipeline: {ran} ran, {skipped} skipped in {:.2} s",
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
