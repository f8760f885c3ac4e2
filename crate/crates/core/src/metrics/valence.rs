//! Reduced VADER-style compound valence.
//!
//! Each rated token contributes its lexicon valence, plus booster increments
//! from up to three preceding tokens (scaled 1.0, 0.95, 0.9 by distance and
//! signed like the valence), times -0.74 when a negator appears among those
//! three tokens. The sum `s` is normalized as `s / sqrt(s^2 + 15)`.
//! Punctuation and capitalization amplifiers are not modeled.

use super::{TokenizedText, ValenceLexicon};

/// Normalization constant for the compound score.
pub const VALENCE_ALPHA: f64 = 15.0;
const NEGATION_SCALAR: f64 = -0.74;
const BOOSTER_DECAY: [f64; 3] = [1.0, 0.95, 0.9];

pub fn valence(t: &TokenizedText, lex: &ValenceLexicon) -> f64 {
    let mut sum = 0.0;
    let mut hits = 0usize;
    for (i, token) in t.tokens.iter().enumerate() {
        if lex.boosters.contains_key(token) {
            continue;
        }
        let Some(&base) = lex.entries.get(token) else {
            continue;
        };
        hits += 1;
        let mut v = base;
        let mut negated = false;
        for (d, decay) in BOOSTER_DECAY.iter().enumerate() {
            let Some(j) = i.checked_sub(d + 1) else { break };
            let prev = &t.tokens[j];
            if let Some(incr) = lex.boosters.get(prev) {
                v += incr * decay * base.signum();
            }
            if lex.negators.contains(prev) {
                negated = true;
            }
        }
        if negated {
            v *= NEGATION_SCALAR;
        }
        sum += v;
    }
    if hits == 0 {
        return 0.0;
    }
    (sum / (sum * sum + VALENCE_ALPHA).sqrt()).clamp(-1.0, 1.0)
}
