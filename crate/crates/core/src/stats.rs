//! Rank-based tests for comparing paired samples and several models over
//! shared folds: Wilcoxon signed-rank, Friedman, Holm step-down and
//! critical-difference cliques.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gaitfeat::Transition;
use crate::room::RoomPair;
use crate::simhome::profile::{MedState, MedicationSchedule};
use crate::simhome::io::write_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// First member of each pair tends to be larger.
    Greater,
    Less,
}

impl Alternative {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            _ => Err(Error::invalid(format!("unknown alternative {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    /// Exact null distribution when there are no tied magnitudes and at most
    /// [`EXACT_MAX_N`] nonzero differences, normal approximation otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

pub const EXACT_MAX_N: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WilcoxonOptions {
    pub alternative: Alternative,
    /// Shift |W - mean| by one half before dividing by the standard deviation.
    pub continuity: bool,
    pub method: PMethod,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        WilcoxonOptions {
            alternative: Alternative::TwoSided,
            continuity: false,
            method: PMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub z: f64,
    pub p: f64,
    pub exact: bool,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = vec![];
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|&&x| x == v[i]).count();
        out.push(j);
        i += j;
    }
    out
}

/// Number of subsets of {1..n} with each possible rank sum.
fn signed_rank_counts(n: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    let mut c = vec![0.0; max + 1];
    c[0] = 1.0;
    for k in 1..=n {
        for s in (k..=max).rev() {
            c[s] += c[s - k];
        }
    }
    c
}

/// P(W+ >= w) under the null for `n` untied ranks.
fn exact_upper(n: usize, w: f64) -> f64 {
    let c = signed_rank_counts(n);
    let total = 2f64.powi(n as i32);
    let from = w.ceil().max(0.0) as usize;
    c.iter().skip(from).sum::<f64>() / total
}

fn exact_lower(n: usize, w: f64) -> f64 {
    let c = signed_rank_counts(n);
    let total = 2f64.powi(n as i32);
    let to = w.floor();
    if to < 0.0 {
        return 0.0;
    }
    c.iter().take(to as usize + 1).sum::<f64>() / total
}

/// Signed-rank test on `a - b` for each pair.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], opts: &WilcoxonOptions) -> Result<WilcoxonResult> {
    if pairs.iter().any(|(a, b)| a.is_nan() || b.is_nan()) {
        return Err(Error::invalid("paired sample contains NaN"));
    }
    let d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(Error::Undefined("Wilcoxon test with no nonzero differences".into()));
    }
    let mags: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = average_ranks(&mags);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let mean = total / 2.0;
    let ties: f64 = tie_sizes(&mags).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - ties / 48.0;
    let mut diff = w_plus - mean;
    if opts.continuity {
        let shift = match opts.alternative {
            Alternative::TwoSided => 0.5 * diff.signum(),
            Alternative::Greater => 0.5,
            Alternative::Less => -0.5,
        };
        diff -= shift;
        if opts.alternative == Alternative::TwoSided && diff.signum() != (w_plus - mean).signum() {
            diff = 0.0;
        }
    }
    let z = if var > 0.0 { diff / var.sqrt() } else { 0.0 };

    let untied = ties == 0.0;
    let exact = match opts.method {
        PMethod::Exact => true,
        PMethod::Normal => false,
        PMethod::Auto => untied && n <= EXACT_MAX_N,
    };
    let p = if exact {
        match opts.alternative {
            Alternative::Greater => exact_upper(n, w_plus),
            Alternative::Less => exact_lower(n, w_plus),
            Alternative::TwoSided => (2.0 * exact_upper(n, w_plus).min(exact_lower(n, w_plus))).min(1.0),
        }
    } else {
        let norm = Normal::standard();
        match opts.alternative {
            Alternative::Greater => norm.sf(z),
            Alternative::Less => norm.cdf(z),
            Alternative::TwoSided => (2.0 * norm.sf(z.abs())).min(1.0),
        }
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        z,
        p,
        exact,
    })
}

/// Ranks within each fold; rank 1 goes to the best score.
pub fn fold_ranks(scores: &[Vec<f64>], higher_is_better: bool) -> Result<Vec<Vec<f64>>> {
    let k = scores.first().map_or(0, |r| r.len());
    if scores.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("every fold must score the same models"));
    }
    if scores.iter().flatten().any(|x| x.is_nan()) {
        return Err(Error::invalid("score matrix contains NaN"));
    }
    Ok(scores
        .iter()
        .map(|row| {
            let keyed: Vec<f64> = if higher_is_better { row.iter().map(|x| -x).collect() } else { row.clone() };
            average_ranks(&keyed)
        })
        .collect())
}

pub fn average_model_ranks(scores: &[Vec<f64>], higher_is_better: bool) -> Result<Vec<f64>> {
    let ranks = fold_ranks(scores, higher_is_better)?;
    let k = ranks.first().map_or(0, |r| r.len());
    let n = ranks.len() as f64;
    Ok((0..k).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
}

/// Friedman chi-square over a folds x models score matrix.
pub fn friedman_test(scores: &[Vec<f64>], higher_is_better: bool) -> Result<FriedmanResult> {
    let k = scores.first().map_or(0, |r| r.len());
    if k < 2 {
        return Err(Error::invalid("Friedman test needs at least 2 models"));
    }
    if scores.len() < 2 {
        return Err(Error::invalid("Friedman test needs at least 2 folds"));
    }
    let avg = average_model_ranks(scores, higher_is_better)?;
    let n = scores.len() as f64;
    let kf = k as f64;
    let centre = (kf + 1.0) / 2.0;
    let statistic = 12.0 * n / (kf * (kf + 1.0)) * avg.iter().map(|r| (r - centre).powi(2)).sum::<f64>();
    let chi = ChiSquared::new((k - 1) as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let p = if statistic <= 0.0 { 1.0 } else { chi.sf(statistic) };
    Ok(FriedmanResult {
        statistic,
        df: k - 1,
        p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    pub alpha: f64,
    /// Same order as the input.
    pub adjusted: Vec<f64>,
    pub reject: Vec<bool>,
}

pub fn holm_correction(p_values: &[f64], alpha: f64) -> Result<HolmResult> {
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("p-values must lie in [0, 1]"));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut reject = vec![false; m];
    let mut running = 0.0f64;
    let mut still_rejecting = true;
    for (i, &j) in order.iter().enumerate() {
        let factor = (m - i) as f64;
        running = running.max((p_values[j] * factor).min(1.0));
        adjusted[j] = running;
        still_rejecting = still_rejecting && p_values[j] <= alpha / factor;
        reject[j] = still_rejecting;
    }
    Ok(HolmResult {
        alpha,
        adjusted,
        reject,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: usize,
    pub b: usize,
    /// `None` when the two models scored identically on every fold.
    pub wilcoxon: Option<WilcoxonResult>,
    pub p: f64,
    pub adjusted_p: f64,
    pub significant: bool,
}

/// Two-sided Wilcoxon on every model pair, Holm-corrected together.
pub fn pairwise_wilcoxon_holm(scores: &[Vec<f64>], alpha: f64) -> Result<Vec<PairwiseComparison>> {
    let k = scores.first().map_or(0, |r| r.len());
    let mut out = vec![];
    for a in 0..k {
        for b in a + 1..k {
            let pairs: Vec<(f64, f64)> = scores.iter().map(|r| (r[a], r[b])).collect();
            let w = match wilcoxon_signed_rank(&pairs, &WilcoxonOptions::default()) {
                Ok(w) => Some(w),
                Err(Error::Undefined(_)) => None,
                Err(e) => return Err(e),
            };
            let p = w.map_or(1.0, |w| w.p);
            out.push(PairwiseComparison {
                a,
                b,
                wilcoxon: w,
                p,
                adjusted_p: p,
                significant: false,
            });
        }
    }
    let holm = holm_correction(&out.iter().map(|c| c.p).collect::<Vec<_>>(), alpha)?;
    for (c, (adj, rej)) in out.iter_mut().zip(holm.adjusted.iter().zip(&holm.reject)) {
        c.adjusted_p = *adj;
        c.significant = *rej;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiagram {
    pub models: Vec<String>,
    pub average_ranks: Vec<f64>,
    /// Maximal sets of mutually non-significant models, ordered by their best
    /// average rank.
    pub cliques: Vec<Vec<usize>>,
}

fn bron_kerbosch(adj: &[BTreeSet<usize>], r: BTreeSet<usize>, mut p: BTreeSet<usize>, mut x: BTreeSet<usize>, out: &mut Vec<Vec<usize>>) {
    if p.is_empty() && x.is_empty() {
        out.push(r.into_iter().collect());
        return;
    }
    let pivot = p.union(&x).max_by_key(|u| adj[**u].intersection(&p).count()).copied().unwrap();
    let candidates: Vec<usize> = p.difference(&adj[pivot]).copied().collect();
    for v in candidates {
        let mut r2 = r.clone();
        r2.insert(v);
        bron_kerbosch(
            adj,
            r2,
            p.intersection(&adj[v]).copied().collect(),
            x.intersection(&adj[v]).copied().collect(),
            out,
        );
        p.remove(&v);
        x.insert(v);
    }
}

pub fn critical_difference_ranks(
    models: &[String],
    scores: &[Vec<f64>],
    comparisons: &[PairwiseComparison],
    higher_is_better: bool,
) -> Result<RankDiagram> {
    let k = models.len();
    if scores.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("score columns do not match the model list"));
    }
    let average_ranks = average_model_ranks(scores, higher_is_better)?;
    let mut adj = vec![BTreeSet::new(); k];
    for a in 0..k {
        for b in 0..k {
            if a != b {
                adj[a].insert(b);
            }
        }
    }
    for c in comparisons.iter().filter(|c| c.significant) {
        adj[c.a].remove(&c.b);
        adj[c.b].remove(&c.a);
    }
    let mut cliques = vec![];
    bron_kerbosch(&adj, BTreeSet::new(), (0..k).collect(), BTreeSet::new(), &mut cliques);
    let best = |c: &Vec<usize>| c.iter().map(|&m| average_ranks[m]).fold(f64::INFINITY, f64::min);
    for c in &mut cliques {
        c.sort_by(|&a, &b| average_ranks[a].total_cmp(&average_ranks[b]).then(a.cmp(&b)));
    }
    cliques.sort_by(|a, b| best(a).total_cmp(&best(b)).then(a.cmp(b)));
    Ok(RankDiagram {
        models: models.to_vec(),
        average_ranks,
        cliques,
    })
}

impl RankDiagram {
    /// Models along the rank axis with one bar per clique underneath.
    pub fn render(&self) -> String {
        let mut order: Vec<usize> = (0..self.models.len()).collect();
        order.sort_by(|&a, &b| self.average_ranks[a].total_cmp(&self.average_ranks[b]).then(a.cmp(&b)));
        let width = self.models.iter().map(|m| m.len()).max().unwrap_or(0);
        let mut s = String::new();
        for &m in &order {
            let _ = write!(s, "{:>width$}  {:.3} ", self.models[m], self.average_ranks[m]);
            for c in &self.cliques {
                s.push(if c.contains(&m) { '|' } else { ' ' });
            }
            s.push('\n');
        }
        for (i, c) in self.cliques.iter().enumerate() {
            let names: Vec<&str> = c.iter().map(|&m| self.models[m].as_str()).collect();
            let _ = writeln!(s, "clique {}: {}", i + 1, names.join(", "));
        }
        s
    }

    pub fn write_plot_data(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            model: &'a str,
            average_rank: f64,
            clique: usize,
        }
        let mut rows = vec![];
        for (i, c) in self.cliques.iter().enumerate() {
            for &m in c {
                rows.push(Row {
                    model: &self.models[m],
                    average_rank: self.average_ranks[m],
                    clique: i + 1,
                });
            }
        }
        write_file(path, "rank-diagram", &rows)
    }
}

/// Friedman, pairwise tests and cliques for one metric over shared folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub metric: String,
    pub n_folds: usize,
    pub friedman: FriedmanResult,
    pub pairwise: Vec<PairwiseComparison>,
    pub diagram: RankDiagram,
}

pub fn compare_models(metric: &str, models: &[String], scores: &[Vec<f64>], alpha: f64) -> Result<ModelComparison> {
    let friedman = friedman_test(scores, true)?;
    let pairwise = pairwise_wilcoxon_holm(scores, alpha)?;
    let diagram = critical_difference_ranks(models, scores, &pairwise, true)?;
    Ok(ModelComparison {
        metric: metric.into(),
        n_folds: scores.len(),
        friedman,
        pairwise,
        diagram,
    })
}

impl ModelComparison {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}: Friedman chi2 = {:.4} (df {}), p = {:.4} over {} folds",
            self.metric, self.friedman.statistic, self.friedman.df, self.friedman.p, self.n_folds
        );
        let _ = writeln!(s, "{:<36} {:>8} {:>8} {:>8}  decision", "pair", "W+", "p", "p_holm");
        for c in &self.pairwise {
            let pair = format!("{} vs {}", self.diagram.models[c.a], self.diagram.models[c.b]);
            let w = c.wilcoxon.map_or("N/A".to_string(), |w| format!("{:.1}", w.w_plus));
            let d = if c.significant { "different" } else { "not different" };
            let _ = writeln!(s, "{pair:<36} {w:>8} {:>8.4} {:>8.4}  {d}", c.p, c.adjusted_p);
        }
        s.push_str(&self.diagram.render());
        s
    }
}

/// One participant's transitions tagged with the medication state at their
/// start.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDurations {
    pub participant: String,
    pub durations: Vec<(RoomPair, MedState, f64)>,
}

impl StateDurations {
    pub fn from_transitions(participant: &str, transitions: &[Transition], schedule: &MedicationSchedule) -> Self {
        StateDurations {
            participant: participant.into(),
            durations: transitions.iter().map(|t| (t.pair, schedule.state_at(t.start_ms), t.duration_s)).collect(),
        }
    }

    /// Mean ON and OFF durations over transitions accepted by `keep`.
    fn means(&self, keep: impl Fn(RoomPair) -> bool) -> Option<(f64, f64)> {
        let mean = |state: MedState| {
            let v: Vec<f64> =
                self.durations.iter().filter(|(p, s, _)| keep(*p) && *s == state).map(|x| x.2).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        Some((mean(MedState::On)?, mean(MedState::Off)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnOffRow {
    /// A transition pair label, or "all".
    pub transition: String,
    /// Participants with both ON and OFF transitions of this kind.
    pub n: usize,
    pub on_mean_s: f64,
    pub off_mean_s: f64,
    /// One-sided test that OFF durations exceed ON durations; `None` when
    /// undefined.
    pub test: Option<WilcoxonResult>,
}

fn on_off_row(label: &str, groups: &[StateDurations], keep: impl Fn(RoomPair) -> bool + Copy, opts: &WilcoxonOptions) -> Result<OnOffRow> {
    let pairs: Vec<(f64, f64)> = groups.iter().filter_map(|g| g.means(keep)).map(|(on, off)| (off, on)).collect();
    let avg = |f: fn(&(f64, f64)) -> f64| {
        if pairs.is_empty() {
            f64::NAN
        } else {
            pairs.iter().map(f).sum::<f64>() / pairs.len() as f64
        }
    };
    let test = match wilcoxon_signed_rank(&pairs, opts) {
        Ok(w) => Some(w),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(OnOffRow {
        transition: label.into(),
        n: pairs.len(),
        on_mean_s: avg(|p| p.1),
        off_mean_s: avg(|p| p.0),
        test,
    })
}

/// Per-pair rows followed by a row pooling every transition.
pub fn on_off_table(groups: &[StateDurations], continuity: bool) -> Result<Vec<OnOffRow>> {
    let opts = WilcoxonOptions {
        alternative: Alternative::Greater,
        continuity,
        method: PMethod::Auto,
    };
    let mut rows = vec![];
    for pair in RoomPair::ALL {
        rows.push(on_off_row(pair.label(), groups, move |p| p == pair, &opts)?);
    }
    rows.push(on_off_row("all", groups, |_| true, &opts)?);
    Ok(rows)
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "<.001".into()
    } else {
        format!("{p:.3}")
    }
}

pub fn render_on_off(rows: &[OnOffRow]) -> String {
    let mut s = format!("{:<16} {:>3} {:>9} {:>9} {:>8} {:>7} {:>7}\n", "transition", "n", "ON (s)", "OFF (s)", "W", "z", "p");
    for r in rows {
        let (w, z, p) = r.test.map_or(("N/A".into(), "N/A".into(), "N/A".into()), |t| {
            (format!("{:.1}", t.w_plus), format!("{:.3}", t.z), fmt_p(t.p))
        });
        let _ = writeln!(s, "{:<16} {:>3} {:>9.2} {:>9.2} {w:>8} {z:>7} {p:>7}", r.transition, r.n, r.on_mean_s, r.off_mean_s);
    }
    s
}

pub fn write_on_off_csv(path: &Path, rows: &[OnOffRow]) -> Result<()> {
    #[derive(Serialize)]
    struct Rec<'a> {
        transition: &'a str,
        n: usize,
        on_mean_s: f64,
        off_mean_s: f64,
        w: Option<f64>,
        z: Option<f64>,
        p: Option<f64>,
    }
    let recs: Vec<Rec> = rows
        .iter()
        .map(|r| Rec {
            transition: &r.transition,
            n: r.n,
            on_mean_s: r.on_mean_s,
            off_mean_s: r.off_mean_s,
            w: r.test.map(|t| t.w_plus),
            z: r.test.map(|t| t.z),
            p: r.test.map(|t| t.p),
        })
        .collect();
    write_file(path, "on-off-tests", &recs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn greater() -> WilcoxonOptions {
        WilcoxonOptions {
            alternative: Alternative::Greater,
            ..Default::default()
        }
    }

    #[test]
    fn hand_ranked_case() {
        let r = wilcoxon_signed_rank(&[(3.0, 1.0), (5.0, 2.0), (4.0, 6.0)], &WilcoxonOptions::default()).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.w_plus, 4.5);
        assert_eq!(r.w_minus, 1.5);
        // tied magnitudes force the normal approximation
        assert!(!r.exact);
        // var = 3*4*7/24 - (8-2)/48 = 3.375
        assert_relative_eq!(r.z, 1.5 / 3.375f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn all_zero_differences_are_undefined() {
        let e = wilcoxon_signed_rank(&[(1.0, 1.0), (2.0, 2.0)], &WilcoxonOptions::default());
        assert!(matches!(e, Err(Error::Undefined(_))));
        assert!(wilcoxon_signed_rank(&[(f64::NAN, 1.0)], &WilcoxonOptions::default()).is_err());
    }

    /// Twelve pairs whose positive ranks are everything except {1, 2}: W+ = 75.
    fn w75() -> Vec<(f64, f64)> {
        (1..=12).map(|k| if k <= 2 { (0.0, k as f64) } else { (k as f64, 0.0) }).collect()
    }

    #[test]
    fn twelve_pair_normal_and_exact() {
        let r = wilcoxon_signed_rank(&w75(), &greater()).unwrap();
        assert_eq!(r.w_plus, 75.0);
        // (75 - 39) / sqrt(162.5)
        assert_relative_eq!(r.z, 2.824, epsilon = 5e-4);
        assert!(r.exact);
        // subsets of {1..12} with rank sum <= 3: {}, {1}, {2}, {3}, {1,2}
        assert_relative_eq!(r.p, 5.0 / 4096.0, epsilon = 1e-15);

        let cc = wilcoxon_signed_rank(&w75(), &WilcoxonOptions { continuity: true, method: PMethod::Normal, ..greater() }).unwrap();
        assert_relative_eq!(cc.z, 35.5 / 162.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(cc.p, Normal::standard().sf(cc.z), epsilon = 1e-15);

        let two = wilcoxon_signed_rank(&w75(), &WilcoxonOptions::default()).unwrap();
        assert_relative_eq!(two.p, 10.0 / 4096.0, epsilon = 1e-15);
        let less = wilcoxon_signed_rank(&w75(), &WilcoxonOptions { alternative: Alternative::Less, ..Default::default() }).unwrap();
        // P(W+ <= 75) = 1 - P(W+ >= 76), and sums <= 2 number three
        assert_relative_eq!(less.p, 1.0 - 3.0 / 4096.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_distribution_counts() {
        // n = 3: sums 0..6 occur 1,1,1,2,1,1,1 times
        assert_eq!(signed_rank_counts(3), vec![1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0]);
        assert_eq!(signed_rank_counts(10).iter().sum::<f64>(), 1024.0);
    }

    #[test]
    fn wilcoxon_invariances() {
        let mut rng = crate::rng::substream(7, "wilcoxon", &[]);
        use rand::Rng;
        for _ in 0..100 {
            let n = rng.random_range(3..20);
            let pairs: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect();
            let base = wilcoxon_signed_rank(&pairs, &greater()).unwrap();
            assert_eq!(base.w_plus + base.w_minus, (base.n * (base.n + 1)) as f64 / 2.0);
            let scale = rng.random_range(0.1..10.0);
            let shift = rng.random_range(-100.0..100.0);
            let moved: Vec<(f64, f64)> = pairs.iter().map(|(a, b)| (a * scale + shift, b * scale + shift)).collect();
            let m = wilcoxon_signed_rank(&moved, &greater()).unwrap();
            assert_eq!(m.n, base.n);
            assert_eq!(m.w_plus, base.w_plus);
            assert_relative_eq!(m.p, base.p, epsilon = 1e-12);
            let swapped: Vec<(f64, f64)> = pairs.iter().map(|(a, b)| (*b, *a)).collect();
            let s = wilcoxon_signed_rank(&swapped, &greater()).unwrap();
            assert_eq!(s.w_plus, base.w_minus);
        }
    }

    #[test]
    fn friedman_cases() {
        let same = vec![vec![0.5, 0.5, 0.5]; 4];
        let f = friedman_test(&same, true).unwrap();
        assert_eq!((f.statistic, f.p), (0.0, 1.0));
        // model 0 strictly best, 1 and 2 tied: mean ranks (1, 2.5, 2.5)
        let best = vec![vec![0.9, 0.1, 0.1]; 4];
        let f = friedman_test(&best, true).unwrap();
        assert_relative_eq!(f.statistic, 6.0, epsilon = 1e-12);
        assert_relative_eq!(f.p, (-3.0f64).exp(), epsilon = 1e-12);
        let permuted: Vec<Vec<f64>> = best.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
        assert_relative_eq!(friedman_test(&permuted, true).unwrap().statistic, 6.0, epsilon = 1e-12);
        let squashed: Vec<Vec<f64>> = best.iter().map(|r| r.iter().map(|x| x.powi(3)).collect()).collect();
        assert_relative_eq!(friedman_test(&squashed, true).unwrap().statistic, 6.0, epsilon = 1e-12);
        assert!(friedman_test(&[vec![1.0], vec![2.0]], true).is_err());
        assert!(friedman_test(&[vec![1.0, 2.0]], true).is_err());
    }

    #[test]
    fn holm_cases() {
        let h = holm_correction(&[0.01], 0.05).unwrap();
        assert_eq!(h.reject, vec![true]);
        let h = holm_correction(&[0.02, 0.01, 0.04], 0.05).unwrap();
        assert_eq!(h.reject, vec![true, true, true]);
        assert_relative_eq!(h.adjusted[1], 0.03, epsilon = 1e-15);
        assert_relative_eq!(h.adjusted[0], 0.04, epsilon = 1e-15);
        assert_relative_eq!(h.adjusted[2], 0.04, epsilon = 1e-15);
        let h = holm_correction(&[0.04, 0.04, 0.04], 0.05).unwrap();
        assert_eq!(h.reject, vec![false; 3]);
        assert!(holm_correction(&[1.5], 0.05).is_err());
    }

    #[test]
    fn holm_between_bonferroni_and_uncorrected() {
        let mut rng = crate::rng::substream(3, "holm", &[]);
        use rand::Rng;
        for _ in 0..200 {
            let m = rng.random_range(1..8);
            let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..0.1)).collect();
            let h = holm_correction(&p, 0.05).unwrap();
            for (i, &pi) in p.iter().enumerate() {
                if pi <= 0.05 / m as f64 {
                    assert!(h.reject[i]);
                }
                if h.reject[i] {
                    assert!(pi <= 0.05);
                }
            }
        }
    }

    fn cmp(a: usize, b: usize, significant: bool) -> PairwiseComparison {
        PairwiseComparison {
            a,
            b,
            wilcoxon: None,
            p: 0.0,
            adjusted_p: 0.0,
            significant,
        }
    }

    #[test]
    fn cliques() {
        let models: Vec<String> = ["A", "B", "C"].map(String::from).to_vec();
        let scores = vec![vec![0.9, 0.8, 0.1]; 3];
        let all = [cmp(0, 1, true), cmp(0, 2, true), cmp(1, 2, true)];
        let d = critical_difference_ranks(&models, &scores, &all, true).unwrap();
        assert_eq!(d.cliques, vec![vec![0], vec![1], vec![2]]);
        let none = [cmp(0, 1, false), cmp(0, 2, false), cmp(1, 2, false)];
        assert_eq!(critical_difference_ranks(&models, &scores, &none, true).unwrap().cliques, vec![vec![0, 1, 2]]);
        let ab = [cmp(0, 1, false), cmp(0, 2, true), cmp(1, 2, true)];
        let d = critical_difference_ranks(&models, &scores, &ab, true).unwrap();
        assert_eq!(d.cliques, vec![vec![0, 1], vec![2]]);
        assert_eq!(d.average_ranks, vec![1.0, 2.0, 3.0]);
        // overlapping cliques: A~B, B~C, A/C different
        let chain = [cmp(0, 1, false), cmp(0, 2, true), cmp(1, 2, false)];
        let d = critical_difference_ranks(&models, &scores, &chain, true).unwrap();
        assert_eq!(d.cliques, vec![vec![0, 1], vec![1, 2]]);
        assert!(d.render().contains("clique 2: B, C"));
    }

    #[test]
    fn compare_models_end_to_end() {
        let models: Vec<String> = ["good", "bad"].map(String::from).to_vec();
        let scores: Vec<Vec<f64>> = (0..12).map(|i| vec![0.9 + i as f64 * 1e-3, 0.5 - i as f64 * 1e-3]).collect();
        let c = compare_models("f1", &models, &scores, 0.05).unwrap();
        assert_relative_eq!(c.friedman.statistic, 12.0, epsilon = 1e-12);
        assert!(c.pairwise[0].significant);
        assert_relative_eq!(c.pairwise[0].p, 2.0 / 4096.0, epsilon = 1e-15);
        assert_eq!(c.diagram.cliques.len(), 2);
        let text = c.render();
        assert!(text.contains("good vs bad"));
    }

    #[test]
    fn on_off_rows() {
        use MedState::*;
        use RoomPair::*;
        let groups: Vec<StateDurations> = (0..12)
            .map(|i| StateDurations {
                participant: format!("PD{i:02}"),
                durations: vec![
                    (KitchenLiving, On, 3.0),
                    (KitchenLiving, Off, 4.0 + i as f64),
                    (KitchenDining, On, 2.0),
                    (DiningLiving, Off, 5.0),
                ],
            })
            .collect();
        let rows = on_off_table(&groups, false).unwrap();
        assert_eq!(rows.len(), 4);
        let kl = &rows[0];
        assert_eq!(kl.n, 12);
        assert_eq!(kl.on_mean_s, 3.0);
        assert_relative_eq!(kl.off_mean_s, 9.5, epsilon = 1e-12);
        let t = kl.test.unwrap();
        assert_eq!(t.w_plus, 78.0);
        assert_relative_eq!(t.p, 1.0 / 4096.0, epsilon = 1e-15);
        // no participant has both states for the other pairs
        assert_eq!(rows[1].n, 0);
        assert!(rows[1].test.is_none());
        assert!(render_on_off(&rows).contains("<.001"));
        // pooled: per participant ON mean 2.5, OFF mean (4 + i + 5) / 2
        assert_relative_eq!(rows[3].on_mean_s, 2.5, epsilon = 1e-12);
    }
}
