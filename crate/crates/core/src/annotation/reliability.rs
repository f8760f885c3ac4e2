use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::Serialize;

use super::{AnnotatedTurn, AnnotationError, TurnRef};

fn check_pair<T>(a: &[T], b: &[T]) -> Result<(), AnnotationError> {
    if a.len() != b.len() {
        return Err(AnnotationError::Validation(format!(
            "coders labeled {} and {} items",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(AnnotationError::Validation("need at least two items".into()));
    }
    Ok(())
}

/// Share of items with identical labels.
pub fn percent_agreement<T: PartialEq>(a: &[T], b: &[T]) -> Result<f64, AnnotationError> {
    check_pair(a, b)?;
    let matches = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(matches as f64 / a.len() as f64)
}

/// Cohen's kappa with chance agreement from the product of the two coders'
/// marginal label frequencies.
pub fn cohen_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, AnnotationError> {
    let p_o = percent_agreement(a, b)?;
    let n = a.len() as f64;
    let mut margins: HashMap<&T, (usize, usize)> = HashMap::new();
    for x in a {
        margins.entry(x).or_default().0 += 1;
    }
    for y in b {
        margins.entry(y).or_default().1 += 1;
    }
    let chance: u64 = margins.values().map(|&(ca, cb)| (ca * cb) as u64).sum();
    let p_e = chance as f64 / (n * n);
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(AnnotationError::UndefinedKappa);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub coder_a: String,
    pub coder_b: String,
    pub items: usize,
    pub percent_agreement: f64,
    /// `None` when chance agreement is 1.
    pub cohen_kappa: Option<f64>,
}

/// Agreement between two human coders over the turns both labeled, using
/// `label` to pick the compared value from each annotation. Turns for which
/// `label` returns `None` are skipped. Heuristic annotations are rejected.
pub fn reliability<L, F>(
    annotations: &[AnnotatedTurn],
    coder_a: &str,
    coder_b: &str,
    label: F,
) -> Result<ReliabilityReport, AnnotationError>
where
    L: Eq + Hash,
    F: Fn(&AnnotatedTurn) -> Option<L>,
{
    if [coder_a, coder_b].contains(&super::HEURISTIC_CODER) {
        return Err(AnnotationError::Validation(
            "heuristic pre-tags are not used for reliability".into(),
        ));
    }
    let mut by_turn: BTreeMap<&TurnRef, (Option<L>, Option<L>)> = BTreeMap::new();
    for a in annotations {
        if a.coder_id == coder_a {
            by_turn.entry(&a.turn).or_insert((None, None)).0 = label(a);
        } else if a.coder_id == coder_b {
            by_turn.entry(&a.turn).or_insert((None, None)).1 = label(a);
        }
    }
    let (xs, ys): (Vec<L>, Vec<L>) = by_turn
        .into_values()
        .filter_map(|pair| match pair {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        })
        .unzip();
    let percent_agreement = percent_agreement(&xs, &ys)?;
    let cohen_kappa = match cohen_kappa(&xs, &ys) {
        Ok(k) => Some(k),
        Err(AnnotationError::UndefinedKappa) => None,
        Err(e) => return Err(e),
    };
    Ok(ReliabilityReport {
        coder_a: coder_a.to_string(),
        coder_b: coder_b.to_string(),
        items: xs.len(),
        percent_agreement,
        cohen_kappa,
    })
}
