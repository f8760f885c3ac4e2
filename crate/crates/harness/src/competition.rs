//! Model competition: every scenario is sent once to every selected variant,
//! each as a fresh single-message conversation.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use counsel_core::annotation::TurnCatalog;
use counsel_core::prompt::{assemble_prompt, GenerationConfig, PromptBundle, Scaffold, VariantId};
use counsel_core::{Role, Turn};
use counsel_llm::{CompletionBackend, CompletionResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::error::{read_text, write_atomic, HarnessError};
use crate::scenario::ScenarioPrompt;

pub const DEFAULT_PARALLELISM: usize = 4;
pub const RUN_FILE: &str = "run.json";
pub const RESPONSES_FILE: &str = "responses.jsonl";

#[derive(Debug, Clone)]
pub struct CompetitionOptions {
    pub seed: u64,
    pub parallelism: usize,
    /// Exemplars drawn per subprocess; all available when `None`.
    pub k_per_subprocess: Option<usize>,
    pub generation: GenerationConfig,
}

impl Default for CompetitionOptions {
    fn default() -> Self {
        CompetitionOptions {
            seed: 0,
            parallelism: DEFAULT_PARALLELISM,
            k_per_subprocess: None,
            generation: GenerationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellError {
    pub code: String,
    pub message: String,
    pub retriable: bool,
}

/// One (scenario, variant) outcome. Exactly one of `response` and `error` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub scenario_id: String,
    pub variant: VariantId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<CompletionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<CellError>,
}

impl CellRecord {
    /// Annotation key: the response is turn 1 of this pseudo-session.
    pub fn session_id(&self) -> String {
        cell_session_id(&self.scenario_id, self.variant)
    }
}

pub fn cell_session_id(scenario_id: &str, variant: VariantId) -> String {
    format!("{scenario_id}#m{}", variant.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub seed: u64,
    pub backend: String,
    pub variants: Vec<VariantId>,
    pub scenarios: Vec<ScenarioPrompt>,
    pub generation: GenerationConfig,
    pub cells: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionRun {
    pub manifest: RunManifest,
    /// Sorted by (scenario_id, variant).
    pub cells: Vec<CellRecord>,
}

impl CompetitionRun {
    pub fn responses(&self) -> impl Iterator<Item = (&CellRecord, &CompletionResult)> {
        self.cells.iter().filter_map(|c| c.response.as_ref().map(|r| (c, r)))
    }

    /// Catalog of successful cells, one agent turn each.
    pub fn turn_catalog(&self) -> TurnCatalog {
        let mut catalog = TurnCatalog::new();
        for (cell, _) in self.responses() {
            catalog.insert(&cell.session_id(), vec![Role::Agent]);
        }
        catalog
    }
}

/// The only message a competition prompt carries.
pub fn scenario_window(scenario: &ScenarioPrompt) -> Vec<Turn> {
    vec![Turn {
        index: 1,
        role: Role::User,
        text: scenario.text.clone(),
        timestamp_ms: 0,
    }]
}

fn run_id(seed: u64, backend: &str, bundles: &[(String, VariantId, PromptBundle)]) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(backend.as_bytes());
    for (id, v, b) in bundles {
        h.update(id.as_bytes());
        h.update([v.get()]);
        h.update(b.to_canonical_json().as_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Runs the scenario x variant grid. Scaffold problems surface before any
/// backend call; per-cell failures are recorded and the run continues.
pub async fn run_competition(
    scenarios: &[ScenarioPrompt],
    variants: &[VariantId],
    backend: Arc<dyn CompletionBackend>,
    scaffold: &Scaffold,
    options: &CompetitionOptions,
) -> Result<CompetitionRun, HarnessError> {
    let variants: Vec<VariantId> = variants.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if variants.is_empty() {
        return Err(HarnessError::Config("no variants selected".into()));
    }
    if scenarios.is_empty() {
        return Err(HarnessError::Config("no scenarios".into()));
    }
    let mut inputs = Vec::with_capacity(variants.len());
    for &v in &variants {
        inputs.push(scaffold.inputs_for(v, options.k_per_subprocess, options.seed)?);
    }
    let mut ordered: Vec<&ScenarioPrompt> = scenarios.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    let mut bundles = Vec::with_capacity(ordered.len() * variants.len());
    for s in &ordered {
        let window = scenario_window(s);
        for (v, inp) in variants.iter().zip(&inputs) {
            bundles.push((s.id.clone(), *v, assemble_prompt(*v, inp, &window, &options.generation)?));
        }
    }
    let backend_label = backend.describe();
    let run_id = run_id(options.seed, &backend_label, &bundles);
    tracing::info!(%run_id, cells = bundles.len(), backend = %backend_label, "starting competition");

    let permits = Arc::new(Semaphore::new(options.parallelism.max(1)));
    let mut tasks = JoinSet::new();
    for (slot, (_, _, bundle)) in bundles.iter().enumerate() {
        let backend = backend.clone();
        let permits = permits.clone();
        let bundle = bundle.clone();
        tasks.spawn(async move {
            let _permit = permits.acquire_owned().await.expect("semaphore open");
            (slot, backend.complete(&bundle).await)
        });
    }
    let mut results = vec![None; bundles.len()];
    while let Some(joined) = tasks.join_next().await {
        let (slot, outcome) = joined.map_err(|e| HarnessError::Run(format!("worker panicked: {e}")))?;
        results[slot] = Some(outcome);
    }

    let mut cells = Vec::with_capacity(bundles.len());
    for ((scenario_id, variant, _), outcome) in bundles.into_iter().zip(results) {
        let outcome = outcome.expect("every slot is filled");
        let (response, error) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => {
                tracing::warn!(%scenario_id, variant = variant.get(), error = %e, "cell failed");
                let err = CellError {
                    code: e.code().to_string(),
                    message: e.to_string(),
                    retriable: e.retriable(),
                };
                (None, Some(err))
            }
        };
        cells.push(CellRecord {
            scenario_id,
            variant,
            response,
            error,
        });
    }
    let errors = cells.iter().filter(|c| c.error.is_some()).count();
    if errors == cells.len() {
        let first = cells[0].error.as_ref().expect("all cells failed");
        return Err(HarnessError::Run(format!(
            "all {errors} cells failed; first error: {}",
            first.message
        )));
    }
    let mut sorted_scenarios: Vec<ScenarioPrompt> = ordered.into_iter().cloned().collect();
    sorted_scenarios.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(CompetitionRun {
        manifest: RunManifest {
            run_id,
            seed: options.seed,
            backend: backend_label,
            variants,
            scenarios: sorted_scenarios,
            generation: options.generation.clone(),
            cells: cells.len(),
            errors,
        },
        cells,
    })
}

pub fn write_run(run: &CompetitionRun, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut manifest = serde_json::to_string_pretty(&run.manifest).expect("manifest serializes");
    manifest.push('\n');
    write_atomic(&dir.join(RUN_FILE), manifest.as_bytes())?;
    let mut lines = String::new();
    for cell in &run.cells {
        lines.push_str(&serde_json::to_string(cell).expect("cell serializes"));
        lines.push('\n');
    }
    write_atomic(&dir.join(RESPONSES_FILE), lines.as_bytes())
}

pub fn load_run(dir: &Path) -> Result<CompetitionRun, HarnessError> {
    let manifest: RunManifest = serde_json::from_str(&read_text(&dir.join(RUN_FILE))?)
        .map_err(|e| HarnessError::Parse(format!("{RUN_FILE}: {e}")))?;
    let mut cells = Vec::new();
    for (i, line) in read_text(&dir.join(RESPONSES_FILE))?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cell: CellRecord = serde_json::from_str(line)
            .map_err(|e| HarnessError::Parse(format!("{RESPONSES_FILE} line {}: {e}", i + 1)))?;
        if cell.response.is_some() == cell.error.is_some() {
            return Err(HarnessError::Parse(format!(
                "{RESPONSES_FILE} line {}: exactly one of response and error must be set",
                i + 1
            )));
        }
        cells.push(cell);
    }
    if cells.len() != manifest.cells {
        return Err(HarnessError::Parse(format!(
            "{RESPONSES_FILE} has {} cells, manifest says {}",
            cells.len(),
            manifest.cells
        )));
    }
    cells.sort_by(|a, b| (&a.scenario_id, a.variant).cmp(&(&b.scenario_id, b.variant)));
    Ok(CompetitionRun { manifest, cells })
}
