use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnnotatedTurn, AnnotationError, MiCode, ResponseCategory, TtmCounts, TurnCatalog, TurnRef};
use crate::prompt::Subprocess;
use crate::session::{Role, Session};
use crate::stats::{descriptive, Descriptive};

/// Coder id whose annotations take precedence in [`consensus_view`].
pub const CONSENSUS_CODER: &str = "consensus";

/// Tercile of a session by turn position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Early,
    Mid,
    Final,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Early, Phase::Mid, Phase::Final];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Early => "early",
            Phase::Mid => "mid",
            Phase::Final => "final",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Phase of 1-based turn `index` in a session of `n` turns:
/// `floor(3 * (index - 1) / n)`, clamped to the three phases.
pub fn phase_of(index: u32, n: usize) -> Phase {
    let n = n.max(1) as u64;
    let i = u64::from(index.max(1)) - 1;
    match (3 * i / n).min(2) {
        0 => Phase::Early,
        1 => Phase::Mid,
        _ => Phase::Final,
    }
}

pub fn segment_phases(session: &Session) -> Vec<Phase> {
    let n = session.turns().len();
    session.turns().iter().map(|t| phase_of(t.index, n)).collect()
}

/// One annotation per turn: the `consensus` coder when present, otherwise the
/// lexicographically first human coder, otherwise the heuristic pre-tag.
/// Output is sorted by turn.
pub fn consensus_view(annotations: &[AnnotatedTurn]) -> Vec<AnnotatedTurn> {
    let rank = |a: &AnnotatedTurn| (a.coder_id != CONSENSUS_CODER, a.is_heuristic(), a.coder_id.clone());
    let mut best: BTreeMap<&TurnRef, &AnnotatedTurn> = BTreeMap::new();
    for a in annotations {
        best.entry(&a.turn)
            .and_modify(|cur| {
                if rank(a) < rank(cur) {
                    *cur = a;
                }
            })
            .or_insert(a);
    }
    best.into_values().cloned().collect()
}

fn reject_duplicates(annotations: &[AnnotatedTurn]) -> Result<(), AnnotationError> {
    let mut seen = HashSet::new();
    for a in annotations {
        if !seen.insert(&a.turn) {
            return Err(AnnotationError::Validation(format!(
                "turn {} of {:?} is annotated more than once; pass a single-coder view",
                a.turn.index, a.turn.session_id
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRow<G> {
    pub group: G,
    pub responses: usize,
    /// One entry per table label; SD and SE are `None` for single responses.
    pub cells: Vec<Descriptive>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable<G> {
    pub labels: Vec<String>,
    pub rows: Vec<FrequencyRow<G>>,
}

impl<G: PartialEq> FrequencyTable<G> {
    pub fn cell(&self, group: &G, label: &str) -> Option<&Descriptive> {
        let col = self.labels.iter().position(|l| l == label)?;
        self.rows.iter().find(|r| &r.group == group).map(|r| &r.cells[col])
    }
}

/// Per-group mean, SD and SE of per-response counts.
pub fn frequency_table<G: Ord + Clone>(
    labels: [&str; 4],
    groups: &BTreeMap<G, Vec<[u32; 4]>>,
) -> Result<FrequencyTable<G>, AnnotationError> {
    let mut rows = Vec::with_capacity(groups.len());
    for (group, responses) in groups {
        if responses.is_empty() {
            return Err(AnnotationError::Validation("a group has no annotated responses".into()));
        }
        let cells = (0..4)
            .map(|k| {
                let values: Vec<f64> = responses.iter().map(|r| f64::from(r[k])).collect();
                descriptive(&values).map_err(|e| AnnotationError::Validation(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        rows.push(FrequencyRow {
            group: group.clone(),
            responses: responses.len(),
            cells,
        });
    }
    Ok(FrequencyTable {
        labels: labels.iter().map(|l| l.to_string()).collect(),
        rows,
    })
}

pub fn subprocess_frequency_table<G: Ord + Clone>(
    groups: &BTreeMap<G, Vec<TtmCounts>>,
) -> Result<FrequencyTable<G>, AnnotationError> {
    let raw = groups
        .iter()
        .map(|(g, v)| (g.clone(), v.iter().map(|c| c.0).collect()))
        .collect();
    frequency_table(Subprocess::ALL.map(|p| p.as_str()), &raw)
}

pub fn mi_frequency_table<G: Ord + Clone>(
    groups: &BTreeMap<G, Vec<[u32; 4]>>,
) -> Result<FrequencyTable<G>, AnnotationError> {
    frequency_table(MiCode::ALL.map(|c| c.as_str()), groups)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionStats {
    pub agent_turns: usize,
    pub opening_with_r: usize,
    pub closing_with_o: usize,
    pub frac_opening_with_r: f64,
    pub frac_closing_with_o: f64,
    /// `transitions[from][to]` counts adjacent code pairs within a turn, in
    /// [`MiCode::ALL`] order. Each turn with `k` codes contributes `k - 1`
    /// pairs; repeated codes land on the diagonal and single-code turns add
    /// nothing.
    pub transitions: [[u32; 4]; 4],
}

impl PositionStats {
    pub fn transition(&self, from: MiCode, to: MiCode) -> u32 {
        self.transitions[from.slot()][to.slot()]
    }

    pub fn transition_total(&self) -> u32 {
        self.transitions.iter().flatten().sum()
    }
}

/// Opening/closing fractions and within-turn transitions over agent turns.
/// Expects one annotation per turn (see [`consensus_view`]).
pub fn position_stats(annotations: &[AnnotatedTurn]) -> Result<PositionStats, AnnotationError> {
    reject_duplicates(annotations)?;
    let agent: Vec<&AnnotatedTurn> = annotations.iter().filter(|a| a.role == Role::Agent).collect();
    if agent.is_empty() {
        return Err(AnnotationError::Validation("no annotated agent turns".into()));
    }
    let opening_with_r = agent.iter().filter(|a| a.opener() == Some(MiCode::R)).count();
    let closing_with_o = agent.iter().filter(|a| a.closer() == Some(MiCode::O)).count();
    let mut transitions = [[0u32; 4]; 4];
    for a in &agent {
        for pair in a.mi_codes.windows(2) {
            transitions[pair[0].code.slot()][pair[1].code.slot()] += 1;
        }
    }
    let n = agent.len() as f64;
    Ok(PositionStats {
        agent_turns: agent.len(),
        opening_with_r,
        closing_with_o,
        frac_opening_with_r: opening_with_r as f64 / n,
        frac_closing_with_o: closing_with_o as f64 / n,
        transitions,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PhaseCounts {
    /// `mi[phase][code]` in [`Phase::ALL`] and [`MiCode::ALL`] order.
    pub mi: [[u32; 4]; 3],
    /// `categories[phase][category]` in [`ResponseCategory::ALL`] order.
    pub categories: [[u32; 4]; 3],
}

impl PhaseCounts {
    pub fn mi(&self, phase: Phase, code: MiCode) -> u32 {
        self.mi[phase as usize][code.slot()]
    }

    pub fn category(&self, phase: Phase, category: ResponseCategory) -> u32 {
        self.categories[phase as usize][category.slot()]
    }
}

/// Raw MI-code and response-category counts per phase. Phases come from each
/// annotated turn's position among all turns of its session in `catalog`.
/// Expects one annotation per turn.
pub fn phase_technique_counts(
    annotations: &[AnnotatedTurn],
    catalog: &TurnCatalog,
) -> Result<PhaseCounts, AnnotationError> {
    reject_duplicates(annotations)?;
    let mut counts = PhaseCounts::default();
    for a in annotations {
        let n = catalog
            .turn_count(&a.turn.session_id)
            .filter(|_| catalog.role(&a.turn).is_some())
            .ok_or_else(|| {
                AnnotationError::Validation(format!(
                    "turn {} of {:?} is not in the catalog",
                    a.turn.index, a.turn.session_id
                ))
            })?;
        let p = phase_of(a.turn.index, n) as usize;
        for m in &a.mi_codes {
            counts.mi[p][m.code.slot()] += 1;
        }
        if let Some(c) = a.category {
            counts.categories[p][c.slot()] += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::super::{CodePosition, MiMark};
    use super::*;

    fn agent(session: &str, index: u32, coder: &str, codes: &[MiCode]) -> AnnotatedTurn {
        let last = codes.len().saturating_sub(1);
        let mi_codes = codes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let position = match (i == 0, i == last) {
                    (true, true) => CodePosition::OpensAndCloses,
                    (true, false) => CodePosition::OpensTurn,
                    (false, true) => CodePosition::ClosesTurn,
                    _ => CodePosition::Interior,
                };
                MiMark::new(c, position)
            })
            .collect();
        AnnotatedTurn {
            turn: TurnRef {
                session_id: session.into(),
                index,
            },
            role: Role::Agent,
            coder_id: coder.into(),
            mi_codes,
            ttm_counts: TtmCounts::default(),
            category: None,
        }
    }

    fn user(session: &str, index: u32, category: ResponseCategory) -> AnnotatedTurn {
        AnnotatedTurn {
            turn: TurnRef {
                session_id: session.into(),
                index,
            },
            role: Role::User,
            coder_id: "c1".into(),
            mi_codes: vec![],
            ttm_counts: TtmCounts::default(),
            category: Some(category),
        }
    }

    fn split(n: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for i in 1..=n as u32 {
            out[phase_of(i, n) as usize] += 1;
        }
        out
    }

    #[test]
    fn tercile_examples() {
        assert_eq!(split(9), [3, 3, 3]);
        assert_eq!(split(10), [4, 3, 3]);
        assert_eq!(phase_of(4, 10), Phase::Early);
        assert_eq!(phase_of(5, 10), Phase::Mid);
        assert_eq!(phase_of(8, 10), Phase::Final);
        assert_eq!(split(1), [1, 0, 0]);
    }

    #[test]
    fn frequency_examples() {
        let mut groups = BTreeMap::new();
        groups.insert(0u8, vec![TtmCounts::default(); 5]);
        groups.insert(1u8, vec![TtmCounts([0, 3, 0, 0])]);
        let t = subprocess_frequency_table(&groups).unwrap();
        let zero = t.cell(&0, "CR_A").unwrap();
        assert_eq!((zero.mean, zero.sd), (0.0, Some(0.0)));
        let single = t.cell(&1, "CR_A").unwrap();
        assert_eq!((single.mean, single.se), (3.0, None));

        groups.insert(2u8, vec![]);
        assert!(subprocess_frequency_table(&groups).is_err());
    }

    #[test]
    fn positions_and_transitions() {
        let rows = vec![
            agent("s", 1, "c", &[MiCode::R, MiCode::A, MiCode::O]),
            agent("s", 3, "c", &[MiCode::R, MiCode::R]),
            agent("s", 5, "c", &[MiCode::A]),
            agent("s", 7, "c", &[]),
        ];
        let p = position_stats(&rows).unwrap();
        assert_eq!(p.agent_turns, 4);
        assert_eq!((p.opening_with_r, p.closing_with_o), (2, 1));
        assert_eq!(p.frac_opening_with_r, 0.5);
        assert_eq!(p.transition(MiCode::R, MiCode::A), 1);
        assert_eq!(p.transition(MiCode::A, MiCode::O), 1);
        assert_eq!(p.transition(MiCode::R, MiCode::R), 1);
        assert_eq!(p.transition_total(), 3);

        assert!(position_stats(&[]).is_err());
        let dup = vec![rows[0].clone(), rows[0].clone()];
        assert!(position_stats(&dup).is_err());
    }

    #[test]
    fn consensus_preference() {
        let rows = vec![
            agent("s", 1, "zed", &[MiCode::S]),
            agent("s", 1, "amy", &[MiCode::A]),
            agent("s", 3, "heuristic", &[MiCode::O]),
            agent("s", 3, "zed", &[MiCode::R]),
            agent("s", 5, "consensus", &[MiCode::O]),
            agent("s", 5, "amy", &[MiCode::A]),
            agent("s", 7, "heuristic", &[MiCode::S]),
        ];
        let view = consensus_view(&rows);
        let coders: Vec<&str> = view.iter().map(|a| a.coder_id.as_str()).collect();
        assert_eq!(coders, ["amy", "zed", "consensus", "heuristic"]);
    }

    #[test]
    fn phase_counts() {
        let mut catalog = TurnCatalog::new();
        catalog.insert("s", vec![Role::Agent, Role::User, Role::Agent, Role::User, Role::Agent, Role::User]);
        let empty = phase_technique_counts(&[], &catalog).unwrap();
        assert_eq!(empty, PhaseCounts::default());

        let one = phase_technique_counts(&[user("s", 4, ResponseCategory::Commitment)], &catalog).unwrap();
        assert_eq!(one.category(Phase::Mid, ResponseCategory::Commitment), 1);
        let total: u32 = one.categories.iter().flatten().chain(one.mi.iter().flatten()).sum();
        assert_eq!(total, 1);

        let rows = vec![agent("s", 1, "c", &[MiCode::R, MiCode::O]), agent("s", 5, "c", &[MiCode::S])];
        let c = phase_technique_counts(&rows, &catalog).unwrap();
        assert_eq!(c.mi(Phase::Early, MiCode::R), 1);
        assert_eq!(c.mi(Phase::Early, MiCode::O), 1);
        assert_eq!(c.mi(Phase::Final, MiCode::S), 1);

        assert!(phase_technique_counts(&[agent("t", 1, "c", &[])], &catalog).is_err());
    }
}
