//! Task model, corpus ingestion, solution checking, and synthetic-task
//! construction from failed candidate programs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Canonical;
use crate::grid::Raster;
use crate::interp::{apply_program_to_raster, EvalOptions, RuntimeError};
use crate::program::Program;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskOrigin {
    ArcTrain,
    ArcEval,
    Synthetic,
}

/// One (input, output) pair illustrating the task's hidden rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemoPair {
    pub input: Raster,
    pub output: Raster,
}

/// A test pair; the output is absent when running blind.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestPair {
    pub input: Raster,
    pub output: Option<Raster>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub demonstrations: Vec<DemoPair>,
    pub tests: Vec<TestPair>,
    pub origin: TaskOrigin,
}

impl Canonical for Task {
    /// Content identity covers demonstrations and tests, not origin: the
    /// same raster pairs are the same task wherever they came from.
    fn canonical_bytes(&self, out: &mut Vec<u8>) {
        out.push(b'T');
        out.extend_from_slice(&(self.demonstrations.len() as u32).to_be_bytes());
        for demo in &self.demonstrations {
            demo.input.canonical_bytes(out);
            demo.output.canonical_bytes(out);
        }
        out.extend_from_slice(&(self.tests.len() as u32).to_be_bytes());
        for test in &self.tests {
            test.input.canonical_bytes(out);
            match &test.output {
                Some(o) => {
                    out.push(1);
                    o.canonical_bytes(out);
                }
                None => out.push(0),
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("{file}: {reason}")]
    MalformedTask { file: String, reason: String },
    #[error("cannot read corpus directory {0}")]
    Io(#[from] std::io::Error),
}

/// Outcome of ingesting one file.
#[derive(Clone, Debug)]
pub struct IngestEntry {
    pub file: String,
    pub outcome: Result<crate::digest::Digest, String>,
}

/// Per-directory ingestion report; ingestion continues past bad files.
#[derive(Clone, Debug, Default)]
pub struct IngestManifest {
    pub entries: Vec<IngestEntry>,
}

impl IngestManifest {
    pub fn malformed(&self) -> impl Iterator<Item = &IngestEntry> {
        self.entries.iter().filter(|e| e.outcome.is_err())
    }

    pub fn malformed_count(&self) -> usize {
        self.malformed().count()
    }
}

#[derive(Deserialize)]
struct TaskFile {
    train: Vec<PairFile>,
    test: Vec<PairFile>,
}

#[derive(Serialize, Deserialize)]
struct PairFile {
    input: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<Vec<Vec<u8>>>,
}

fn task_from_file(text: &str, origin: TaskOrigin) -> Result<Task, String> {
    let parsed: TaskFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if parsed.train.is_empty() {
        return Err("task has no demonstrations".into());
    }
    let raster = |grid: &[Vec<u8>]| Raster::from_rows(grid).map_err(|e| e.to_string());
    let mut demonstrations = Vec::with_capacity(parsed.train.len());
    for pair in &parsed.train {
        let output = pair
            .output
            .as_ref()
            .ok_or_else(|| "demonstration lacks an output".to_string())?;
        demonstrations.push(DemoPair {
            input: raster(&pair.input)?,
            output: raster(output)?,
        });
    }
    let mut tests = Vec::with_capacity(parsed.test.len());
    for pair in &parsed.test {
        tests.push(TestPair {
            input: raster(&pair.input)?,
            output: pair.output.as_ref().map(|o| raster(o)).transpose()?,
        });
    }
    Ok(Task {
        demonstrations,
        tests,
        origin,
    })
}

/// Reads every `*.json` task file in `dir`, in filename order. Malformed
/// files are reported in the manifest and skipped.
pub fn ingest_arc(
    dir: impl AsRef<Path>,
    origin: TaskOrigin,
) -> Result<(Vec<Task>, IngestManifest), TaskError> {
    let mut files: Vec<_> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();

    let mut tasks = Vec::new();
    let mut manifest = IngestManifest::default();
    for path in files {
        let file = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let outcome = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|text| task_from_file(&text, origin));
        match outcome {
            Ok(task) => {
                manifest.entries.push(IngestEntry {
                    file,
                    outcome: Ok(task.digest()),
                });
                tasks.push(task);
            }
            Err(reason) => manifest.entries.push(IngestEntry {
                file,
                outcome: Err(reason),
            }),
        }
    }
    Ok((tasks, manifest))
}

/// Serializes a task back to the corpus file format.
pub fn task_to_json(task: &Task) -> String {
    #[derive(Serialize)]
    struct Out {
        train: Vec<PairFile>,
        test: Vec<PairFile>,
    }
    let out = Out {
        train: task
            .demonstrations
            .iter()
            .map(|d| PairFile {
                input: d.input.to_code_rows(),
                output: Some(d.output.to_code_rows()),
            })
            .collect(),
        test: task
            .tests
            .iter()
            .map(|t| PairFile {
                input: t.input.to_code_rows(),
                output: t.output.as_ref().map(Raster::to_code_rows),
            })
            .collect(),
    };
    serde_json::to_string(&out).expect("task serialization cannot fail")
}

pub fn task_from_json(text: &str, origin: TaskOrigin) -> Result<Task, String> {
    task_from_file(text, origin)
}

/// Which pairs a solution must reproduce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// All demonstrations; the training loop's notion of solved.
    Demos,
    /// Demonstrations and every test pair with a known output; used for
    /// the evaluation rates.
    DemosAndTests,
}

/// Exact-match check: the program must reproduce each required output
/// bit-for-bit, dimensions included. Any runtime error counts as
/// not-solved.
pub fn solves(p: &Program, t: &Task, mode: SolveMode, opts: &EvalOptions) -> bool {
    let check = |input: &Raster, expected: &Raster| match apply_program_to_raster(p, input, opts) {
        Ok(response) => response == *expected,
        Err(_) => false,
    };
    let demos_ok = t
        .demonstrations
        .iter()
        .all(|d| check(&d.input, &d.output));
    if !demos_ok {
        return false;
    }
    match mode {
        SolveMode::Demos => true,
        SolveMode::DemosAndTests => t
            .tests
            .iter()
            .filter_map(|t| t.output.as_ref().map(|o| (&t.input, o)))
            .all(|(input, expected)| check(input, expected)),
    }
}

/// Why a failed program did not yield a usable synthetic task.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Rejection {
    #[error("response for input {index} failed: {error}")]
    Errored { index: usize, error: RuntimeError },
    #[error("responses are trivial (identical across demonstrations)")]
    Trivial,
}

/// Responses are useful only when they are well-formed rasters that
/// actually depend on the inputs: with two or more demonstrations, all
/// responses being identical means the program ignored the scene. With a
/// single demonstration the variation requirement is vacuous.
pub fn nontrivial(responses: &[Raster]) -> bool {
    match responses {
        [] => false,
        [_] => true,
        [first, rest @ ..] => rest.iter().any(|r| r != first),
    }
}

/// Builds the synthetic task pairing `t`'s inputs with `p`'s responses.
/// The demonstration inputs keep their order; each test input's response
/// becomes the synthetic task's test output, so the result is structurally
/// a complete task with `p` as a known solution.
pub fn synthesize(p: &Program, t: &Task, opts: &EvalOptions) -> Result<Task, Rejection> {
    let mut run = |input: &Raster, index: usize| {
        apply_program_to_raster(p, input, opts)
            .map_err(|error| Rejection::Errored { index, error })
    };
    let mut responses = Vec::with_capacity(t.demonstrations.len());
    for (i, demo) in t.demonstrations.iter().enumerate() {
        responses.push(run(&demo.input, i)?);
    }
    if !nontrivial(&responses) {
        return Err(Rejection::Trivial);
    }
    let mut tests = Vec::with_capacity(t.tests.len());
    for (i, test) in t.tests.iter().enumerate() {
        let response = run(&test.input, t.demonstrations.len() + i)?;
        tests.push(TestPair {
            input: test.input.clone(),
            output: Some(response),
        });
    }
    Ok(Task {
        demonstrations: t
            .demonstrations
            .iter()
            .zip(responses)
            .map(|(demo, response)| DemoPair {
                input: demo.input.clone(),
                output: response,
            })
            .collect(),
        tests,
        origin: TaskOrigin::Synthetic,
    })
}
