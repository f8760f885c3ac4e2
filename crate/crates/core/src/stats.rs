//! Descriptive and inferential statistics.
//!
//! Multivariate statistics are not provided; group comparisons are
//! per-measure one-way F tests, and the pre/post by condition design is
//! tested through its 2x2 within-subject interaction.

use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    Validation(String),
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        "validation"
    }
}

fn invalid(msg: impl Into<String>) -> StatsError {
    StatsError::Validation(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    /// Sample SD (n - 1 denominator); `None` when n < 2.
    pub sd: Option<f64>,
    pub se: Option<f64>,
}

pub fn descriptive(values: &[f64]) -> Result<Descriptive, StatsError> {
    let n = values.len();
    if n == 0 {
        return Err(invalid("no values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite value"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let (sd, se) = if n >= 2 {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        (Some(sd), Some(sd / (n as f64).sqrt()))
    } else {
        (None, None)
    };
    Ok(Descriptive { n, mean, sd, se })
}

/// Marks F statistics whose error term vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FFlag {
    Finite,
    /// Zero error variance with a non-zero effect: F is infinite, p = 0.
    Infinite,
    /// Zero error variance and zero effect: reported as F = 0, p = 1.
    NoVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FResult {
    pub f: f64,
    pub df1: u32,
    pub df2: u32,
    pub p: f64,
    /// Generalized eta squared; interaction tests only.
    pub generalized_eta_sq: Option<f64>,
    pub flag: FFlag,
}

impl FResult {
    fn from_ratio(effect_ms: f64, error_ms: f64, df1: u32, df2: u32) -> Self {
        let (f, flag) = if error_ms > 0.0 {
            (effect_ms / error_ms, FFlag::Finite)
        } else if effect_ms > 0.0 {
            (f64::INFINITY, FFlag::Infinite)
        } else {
            (0.0, FFlag::NoVariance)
        };
        FResult {
            f,
            df1,
            df2,
            p: f_sf(f, df1 as f64, df2 as f64),
            generalized_eta_sq: None,
            flag,
        }
    }
}

/// Upper-tail probability of the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if f.is_nan() || f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let x = df2 / (df2 + df1 * f);
    beta_reg(df2 / 2.0, df1 / 2.0, x).clamp(0.0, 1.0)
}

pub fn oneway_anova(groups: &[Vec<f64>]) -> Result<FResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(invalid("need at least two groups"));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(invalid(format!("group {i} has fewer than two values")));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite value"));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let df1 = (k - 1) as u32;
    let df2 = (n - k) as u32;
    Ok(FResult::from_ratio(ssb / df1 as f64, ssw / df2 as f64, df1, df2))
}

/// Condition x time interaction for a fully within-subject 2x2 design.
///
/// `pre_a`/`post_a` are one condition, `pre_b`/`post_b` the other, aligned by
/// subject. F(1, n-1) is the squared one-sample t of the per-subject
/// difference of differences. Generalized eta squared is
/// `SS_AB / (SS_AB + SS_S + SS_AxS + SS_BxS + SS_ABxS)`.
pub fn rm_interaction_2x2(
    pre_a: &[f64],
    post_a: &[f64],
    pre_b: &[f64],
    post_b: &[f64],
) -> Result<FResult, StatsError> {
    let n = pre_a.len();
    if [post_a.len(), pre_b.len(), post_b.len()].iter().any(|&l| l != n) {
        return Err(invalid("all four lists must have the same length"));
    }
    if n < 2 {
        return Err(invalid("need at least two subjects"));
    }
    let all = [pre_a, post_a, pre_b, post_b];
    if all.iter().flat_map(|s| s.iter()).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite value"));
    }
    let d: Vec<f64> = (0..n)
        .map(|i| (post_b[i] - pre_b[i]) - (post_a[i] - pre_a[i]))
        .collect();
    let nf = n as f64;
    let mean_d = d.iter().sum::<f64>() / nf;
    let var_d = d.iter().map(|x| (x - mean_d).powi(2)).sum::<f64>() / (nf - 1.0);

    let mut result = FResult::from_ratio(mean_d * mean_d, var_d / nf, 1, (n - 1) as u32);
    result.generalized_eta_sq = Some(generalized_eta_sq(&all));
    Ok(result)
}

/// Cells indexed [condition][time]: 0 = (a, pre), 1 = (a, post), 2 = (b, pre), 3 = (b, post).
fn generalized_eta_sq(cells: &[&[f64]; 4]) -> f64 {
    let n = cells[0].len();
    let nf = n as f64;
    let y = |c: usize, i: usize| cells[c][i];
    let cond = |c: usize| if c < 2 { 0 } else { 1 };
    let time = |c: usize| c % 2;

    let grand = cells.iter().flat_map(|s| s.iter()).sum::<f64>() / (4.0 * nf);
    let cell_mean: Vec<f64> = cells.iter().map(|s| s.iter().sum::<f64>() / nf).collect();
    let cond_mean = [0, 1].map(|a| (0..4).filter(|&c| cond(c) == a).map(|c| cell_mean[c]).sum::<f64>() / 2.0);
    let time_mean = [0, 1].map(|b| (0..4).filter(|&c| time(c) == b).map(|c| cell_mean[c]).sum::<f64>() / 2.0);
    let subj_mean: Vec<f64> = (0..n).map(|i| (0..4).map(|c| y(c, i)).sum::<f64>() / 4.0).collect();
    let subj_cond = |i: usize, a: usize| (0..4).filter(|&c| cond(c) == a).map(|c| y(c, i)).sum::<f64>() / 2.0;
    let subj_time = |i: usize, b: usize| (0..4).filter(|&c| time(c) == b).map(|c| y(c, i)).sum::<f64>() / 2.0;

    let ss_ab: f64 = (0..4)
        .map(|c| {
            nf * (cell_mean[c] - cond_mean[cond(c)] - time_mean[time(c)] + grand).powi(2)
        })
        .sum();
    let ss_s: f64 = subj_mean.iter().map(|m| 4.0 * (m - grand).powi(2)).sum();
    let mut ss_as = 0.0;
    let mut ss_bs = 0.0;
    let mut ss_abs = 0.0;
    for i in 0..n {
        for a in 0..2 {
            ss_as += 2.0 * (subj_cond(i, a) - cond_mean[a] - subj_mean[i] + grand).powi(2);
        }
        for b in 0..2 {
            ss_bs += 2.0 * (subj_time(i, b) - time_mean[b] - subj_mean[i] + grand).powi(2);
        }
        for c in 0..4 {
            let (a, b) = (cond(c), time(c));
            let resid = y(c, i) - cell_mean[c] - subj_cond(i, a) - subj_time(i, b)
                + cond_mean[a]
                + time_mean[b]
                + subj_mean[i]
                - grand;
            ss_abs += resid.powi(2);
        }
    }
    let denom = ss_ab + ss_s + ss_as + ss_bs + ss_abs;
    if denom > 0.0 {
        ss_ab / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolmResult {
    pub adjusted_p: Vec<f64>,
    pub reject: Vec<bool>,
    pub alpha: f64,
}

/// Holm step-down adjustment; results are aligned with the input order.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Result<HolmResult, StatsError> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    let reject = adjusted.iter().map(|p| *p <= alpha).collect();
    Ok(HolmResult {
        adjusted_p: adjusted,
        reject,
        alpha,
    })
}
