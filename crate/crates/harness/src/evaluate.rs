//! Reports over a competition run: per-variant linguistic metrics and, when
//! annotations are supplied, subprocess and MI technique frequencies with
//! per-code one-way ANOVA across variants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use counsel_core::annotation::{
    consensus_view, load_annotations, mi_frequency_table, position_stats, reliability, subprocess_frequency_table,
    AnnotatedTurn, FrequencyTable, PositionStats, ReliabilityReport, TtmCounts,
};
use counsel_core::metrics::{linguistic_metrics, LexiconSet};
use counsel_core::prompt::VariantId;
use counsel_core::stats::{descriptive, holm_bonferroni, oneway_anova, Descriptive, FFlag};
use serde::Serialize;

use crate::competition::CompetitionRun;
use crate::error::{write_atomic, HarnessError};

pub const HOLM_ALPHA: f64 = 0.05;

pub const REPORT_FILE: &str = "report.json";
pub const LINGUISTIC_FILE: &str = "linguistic.tsv";
pub const SUBPROCESS_FILE: &str = "subprocess_frequency.tsv";
pub const SUBPROCESS_TESTS_FILE: &str = "subprocess_anova.tsv";
pub const MI_FILE: &str = "mi_frequency.tsv";
pub const MI_TESTS_FILE: &str = "mi_anova.tsv";

/// Loads lexicons from `dir`, or the bundled set when `None`. Any failure is
/// a configuration error.
pub fn load_lexicons(dir: Option<&Path>) -> Result<LexiconSet, HarnessError> {
    match dir {
        None => Ok(LexiconSet::bundled()),
        Some(d) if !d.is_dir() => Err(HarnessError::Config(format!("lexicon directory {} not found", d.display()))),
        Some(d) => LexiconSet::load_dir(d).map_err(|e| HarnessError::Config(e.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinguisticRow {
    pub variant: VariantId,
    pub responses: usize,
    /// Responses the metrics could not score.
    pub unscored: usize,
    pub type_token_ratio: Option<Descriptive>,
    pub readability_grade: Option<Descriptive>,
    /// Over responses with at least one rated word.
    pub concreteness: Option<Descriptive>,
    pub idea_density: Option<Descriptive>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRow {
    pub label: String,
    pub f: f64,
    pub df1: u32,
    pub df2: u32,
    pub p: f64,
    pub holm_p: f64,
    pub reject: bool,
    pub flag: FFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantPosition {
    pub variant: VariantId,
    pub stats: PositionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationSection {
    /// Some analyzed turns carry only heuristic pre-tags.
    pub provisional: bool,
    pub coders: Vec<String>,
    pub annotated_responses: usize,
    pub subprocess_table: FrequencyTable<VariantId>,
    pub subprocess_tests: Vec<TestRow>,
    pub mi_table: FrequencyTable<VariantId>,
    pub mi_tests: Vec<TestRow>,
    pub positions: Vec<VariantPosition>,
    pub reliability: Vec<ReliabilityReport>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub run_id: String,
    pub backend: String,
    pub linguistic: Vec<LinguisticRow>,
    pub annotations: Option<AnnotationSection>,
    pub notes: Vec<String>,
}

fn describe_opt(values: &[f64]) -> Option<Descriptive> {
    descriptive(values).ok()
}

fn linguistic_rows(run: &CompetitionRun, lex: &LexiconSet) -> Vec<LinguisticRow> {
    let mut rows = Vec::new();
    for &v in &run.manifest.variants {
        let (mut ttr, mut grade, mut conc, mut idea) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut responses, mut unscored) = (0, 0);
        for (_, r) in run.responses().filter(|(c, _)| c.variant == v) {
            responses += 1;
            match linguistic_metrics(&r.text, lex) {
                Ok(m) => {
                    ttr.push(m.type_token_ratio);
                    grade.push(m.readability_grade);
                    idea.push(m.idea_density);
                    conc.extend(m.concreteness);
                }
                Err(e) => {
                    tracing::warn!(variant = v.get(), error = %e, "response not scored");
                    unscored += 1;
                }
            }
        }
        rows.push(LinguisticRow {
            variant: v,
            responses,
            unscored,
            type_token_ratio: describe_opt(&ttr),
            readability_grade: describe_opt(&grade),
            concreteness: describe_opt(&conc),
            idea_density: describe_opt(&idea),
        });
    }
    rows
}

/// One-way ANOVA per column across groups, Holm-adjusted within the family.
fn family_tests(
    table_labels: &[String],
    groups: &BTreeMap<VariantId, Vec<[u32; 4]>>,
) -> Result<Vec<TestRow>, HarnessError> {
    let mut raw = Vec::with_capacity(4);
    for (k, label) in table_labels.iter().enumerate() {
        let samples: Vec<Vec<f64>> = groups
            .values()
            .map(|rs| rs.iter().map(|r| f64::from(r[k])).collect())
            .collect();
        raw.push((label.clone(), oneway_anova(&samples)?));
    }
    let holm = holm_bonferroni(&raw.iter().map(|(_, r)| r.p).collect::<Vec<_>>(), HOLM_ALPHA)?;
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, (label, r))| TestRow {
            label,
            f: r.f,
            df1: r.df1,
            df2: r.df2,
            p: r.p,
            holm_p: holm.adjusted_p[i],
            reject: holm.reject[i],
            flag: r.flag,
        })
        .collect())
}

fn annotation_section(run: &CompetitionRun, text: &str) -> Result<AnnotationSection, HarnessError> {
    let all = load_annotations(text, &run.turn_catalog())?;
    let view = consensus_view(&all);
    let variant_of: BTreeMap<String, VariantId> =
        run.responses().map(|(c, _)| (c.session_id(), c.variant)).collect();
    let mut ttm: BTreeMap<VariantId, Vec<TtmCounts>> = BTreeMap::new();
    let mut mi: BTreeMap<VariantId, Vec<[u32; 4]>> = BTreeMap::new();
    let mut by_variant: BTreeMap<VariantId, Vec<AnnotatedTurn>> = BTreeMap::new();
    for a in &view {
        let v = variant_of[&a.turn.session_id];
        ttm.entry(v).or_default().push(a.ttm_counts);
        mi.entry(v).or_default().push(a.mi_counts());
        by_variant.entry(v).or_default().push(a.clone());
    }
    if view.is_empty() {
        return Err(HarnessError::Config("annotation file has no rows".into()));
    }
    let subprocess_table = subprocess_frequency_table(&ttm)?;
    let mi_table = mi_frequency_table(&mi)?;
    let mut notes = Vec::new();
    let testable = |g: &BTreeMap<VariantId, Vec<[u32; 4]>>| g.len() >= 2 && g.values().all(|v| v.len() >= 2);
    let ttm_raw: BTreeMap<VariantId, Vec<[u32; 4]>> =
        ttm.iter().map(|(v, cs)| (*v, cs.iter().map(|c| c.0).collect())).collect();
    let (subprocess_tests, mi_tests) = if testable(&ttm_raw) {
        (family_tests(&subprocess_table.labels, &ttm_raw)?, family_tests(&mi_table.labels, &mi)?)
    } else {
        notes.push("F tests need at least two variants with two annotated responses each".to_string());
        (Vec::new(), Vec::new())
    };
    let positions = by_variant
        .into_iter()
        .map(|(variant, turns)| Ok(VariantPosition { variant, stats: position_stats(&turns)? }))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let provisional = view.iter().any(AnnotatedTurn::is_heuristic);
    if provisional {
        notes.push("PROVISIONAL: some responses carry only heuristic pre-tags, not human codes".to_string());
    }
    let coders: BTreeSet<String> = all.iter().map(|a| a.coder_id.clone()).collect();
    let humans: Vec<&String> = coders
        .iter()
        .filter(|c| c.as_str() != counsel_core::annotation::HEURISTIC_CODER && c.as_str() != counsel_core::annotation::CONSENSUS_CODER)
        .collect();
    let mut reliability_rows = Vec::new();
    for (i, a) in humans.iter().enumerate() {
        for b in &humans[i + 1..] {
            match reliability(&all, a, b, |t| Some(t.ttm_counts)) {
                Ok(r) => reliability_rows.push(r),
                Err(e) => notes.push(format!("reliability {a}/{b}: {e}")),
            }
        }
    }
    Ok(AnnotationSection {
        provisional,
        coders: coders.into_iter().collect(),
        annotated_responses: view.len(),
        subprocess_table,
        subprocess_tests,
        mi_table,
        mi_tests,
        positions,
        reliability: reliability_rows,
        notes,
    })
}

/// Builds the report. `annotations` is the text of an annotation file.
pub fn evaluate_run(
    run: &CompetitionRun,
    annotations: Option<&str>,
    lexicons: &LexiconSet,
) -> Result<EvaluationReport, HarnessError> {
    let linguistic = linguistic_rows(run, lexicons);
    let annotations = annotations.map(|t| annotation_section(run, t)).transpose()?;
    let mut notes = vec![
        "F tests are per-measure one-way ANOVAs across variants; p-values are Holm-adjusted within each family of four codes".to_string(),
        "Frequencies are mean per response with sample SD and SE".to_string(),
    ];
    if run.manifest.errors > 0 {
        notes.push(format!("{} of {} cells failed and are excluded", run.manifest.errors, run.manifest.cells));
    }
    Ok(EvaluationReport {
        run_id: run.manifest.run_id.clone(),
        backend: run.manifest.backend.clone(),
        linguistic,
        annotations,
        notes,
    })
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NA".into())
}

fn desc_cols(d: &Option<Descriptive>) -> String {
    match d {
        Some(d) => format!("{}\t{}", num(d.mean), opt(d.sd)),
        None => "NA\tNA".into(),
    }
}

fn frequency_tsv(table: &FrequencyTable<VariantId>) -> String {
    let mut out = String::from("variant\tresponses");
    for l in &table.labels {
        let _ = write!(out, "\t{l}_mean\t{l}_sd\t{l}_se");
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(out, "{}\t{}", row.group.get(), row.responses);
        for c in &row.cells {
            let _ = write!(out, "\t{}\t{}\t{}", num(c.mean), opt(c.sd), opt(c.se));
        }
        out.push('\n');
    }
    out
}

fn tests_tsv(rows: &[TestRow]) -> String {
    let mut out = String::from("code\tF\tdf1\tdf2\tp\tholm_p\treject\tflag\n");
    for r in rows {
        let flag = serde_json::to_value(r.flag).expect("flag serializes");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
            r.label,
            num(r.f),
            r.df1,
            r.df2,
            r.p,
            r.holm_p,
            r.reject,
            flag.as_str().unwrap_or_default()
        );
    }
    out
}

/// Writes the report files into `out`; returns their paths in write order.
pub fn write_report(report: &EvaluationReport, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut files: Vec<(&str, String)> = Vec::new();
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    files.push((REPORT_FILE, json));
    let mut ling = String::from("variant\tresponses\tunscored\tttr_mean\tttr_sd\tgrade_mean\tgrade_sd\tconcreteness_mean\tconcreteness_sd\tidea_density_mean\tidea_density_sd\n");
    for r in &report.linguistic {
        let _ = writeln!(
            ling,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.variant.get(),
            r.responses,
            r.unscored,
            desc_cols(&r.type_token_ratio),
            desc_cols(&r.readability_grade),
            desc_cols(&r.concreteness),
            desc_cols(&r.idea_density)
        );
    }
    files.push((LINGUISTIC_FILE, ling));
    if let Some(a) = &report.annotations {
        files.push((SUBPROCESS_FILE, frequency_tsv(&a.subprocess_table)));
        files.push((SUBPROCESS_TESTS_FILE, tests_tsv(&a.subprocess_tests)));
        files.push((MI_FILE, frequency_tsv(&a.mi_table)));
        files.push((MI_TESTS_FILE, tests_tsv(&a.mi_tests)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
