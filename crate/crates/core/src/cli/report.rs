//! Text tables in the layout of the evaluation tables: mean (sd) in percent.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::protocol::{FoldReport, Protocol, ProtocolSummary, Variant};
use crate::medstate::MedReport;
use crate::stats::{compare_models, ModelComparison};

fn pct(v: Option<(f64, f64)>) -> String {
    match v {
        Some((m, sd)) => format!("{:.2} ({:.2})", 100.0 * m, 100.0 * sd),
        None => "N/A".into(),
    }
}

/// One row per (protocol, variant): localisation and medication columns.
pub fn localisation_table(summaries: &[ProtocolSummary]) -> String {
    let mut rows: Vec<&ProtocolSummary> = summaries.iter().collect();
    rows.sort_by_key(|s| (s.protocol, s.variant));
    let mut s = format!(
        "{:<7} {:<16} {:>16} {:>16} {:>16} {:>16}\n",
        "data", "model", "F1", "precision", "med F1", "med AUROC"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<7} {:<16} {:>16} {:>16} {:>16} {:>16}",
            r.protocol.name(),
            r.variant.name(),
            pct(Some(r.f1)),
            pct(Some(r.precision)),
            pct(r.med_f1),
            pct(r.med_auroc)
        );
    }
    s
}

pub fn medication_table(reports: &[MedReport]) -> String {
    let mut s = format!("{:<20} {:>6} {:>16} {:>16}\n", "features", "folds", "F1", "AUROC");
    for r in reports {
        let au = r.auroc_mean.zip(r.auroc_sd);
        let _ = writeln!(s, "{:<20} {:>6} {:>16} {:>16}", r.source, r.folds.len(), pct(Some((r.f1_mean, r.f1_sd))), pct(au));
    }
    s
}

/// Folds x variants matrices of F1 and precision for one protocol.
pub struct ScoreMatrix {
    pub variants: Vec<Variant>,
    pub folds: Vec<String>,
    pub f1: Vec<Vec<f64>>,
    pub precision: Vec<Vec<f64>>,
}

/// Aligns fold reports of several variants; fold sets must agree exactly.
pub fn score_matrix(protocol: Protocol, runs: &BTreeMap<Variant, Vec<FoldReport>>) -> Result<ScoreMatrix> {
    let variants: Vec<Variant> = runs.keys().copied().collect();
    let fold_set = |v: &Variant| -> Vec<String> {
        let mut f: Vec<String> = runs[v].iter().map(|r| r.fold.clone()).collect();
        f.sort();
        f
    };
    let folds = fold_set(&variants[0]);
    let mut problems = vec![];
    for v in &variants[1..] {
        let other = fold_set(v);
        if other != folds {
            let missing: Vec<&String> = folds.iter().filter(|f| !other.contains(f)).collect();
            let extra: Vec<&String> = other.iter().filter(|f| !folds.contains(f)).collect();
            problems.push(format!(
                "{} vs {}: missing {:?}, extra {:?}",
                v.name(),
                variants[0].name(),
                missing,
                extra
            ));
        }
    }
    if !problems.is_empty() {
        return Err(Error::invalid(format!(
            "inconsistent fold sets under {}: {}",
            protocol.name(),
            problems.join("; ")
        )));
    }
    let lookup = |v: &Variant, f: &str| runs[v].iter().find(|r| r.fold == f).expect("fold present");
    let mut f1 = vec![];
    let mut precision = vec![];
    for f in &folds {
        f1.push(variants.iter().map(|v| lookup(v, f).f1).collect());
        precision.push(variants.iter().map(|v| lookup(v, f).precision).collect());
    }
    Ok(ScoreMatrix {
        variants,
        folds,
        f1,
        precision,
    })
}

pub enum StatsSection {
    Compared(Vec<ModelComparison>),
    Skipped(String),
}

/// Model comparisons for one protocol, or the reason they cannot be run.
pub fn protocol_stats(protocol: Protocol, runs: &BTreeMap<Variant, Vec<FoldReport>>, alpha: f64) -> Result<StatsSection> {
    if runs.len() < 2 {
        return Ok(StatsSection::Skipped(format!(
            "{}: a single variant, nothing to compare",
            protocol.name()
        )));
    }
    let m = score_matrix(protocol, runs)?;
    if m.folds.len() < 2 {
        return Ok(StatsSection::Skipped(format!(
            "{}: {} fold, rank tests need at least 2",
            protocol.name(),
            m.folds.len()
        )));
    }
    let names: Vec<String> = m.variants.iter().map(|v| v.name().to_string()).collect();
    Ok(StatsSection::Compared(vec![
        compare_models(&format!("{} F1", protocol.name()), &names, &m.f1, alpha)?,
        compare_models(&format!("{} precision", protocol.name()), &names, &m.precision, alpha)?,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(v: Variant, fold: &str, f1: f64) -> FoldReport {
        FoldReport {
            protocol: Protocol::LooPd,
            variant: v,
            fold: fold.into(),
            precision: f1,
            f1,
            med_f1: None,
            med_auroc: None,
        }
    }

    #[test]
    fn two_variants_over_twelve_folds_give_two_ranks() {
        let mut runs = BTreeMap::new();
        let folds: Vec<String> = (0..12).map(|i| format!("PD{i:02}")).collect();
        runs.insert(Variant::Mdcsa, folds.iter().map(|f| rep(Variant::Mdcsa, f, 0.9)).collect());
        runs.insert(Variant::Rf, folds.iter().map(|f| rep(Variant::Rf, f, 0.8)).collect());
        let StatsSection::Compared(c) = protocol_stats(Protocol::LooPd, &runs, 0.05).unwrap() else {
            panic!("expected comparisons")
        };
        assert_eq!(c[0].diagram.average_ranks.len(), 2);
        assert_eq!(c[0].diagram.average_ranks, vec![2.0, 1.0]);

        let mut one = runs.clone();
        one.remove(&Variant::Rf);
        assert!(matches!(protocol_stats(Protocol::LooPd, &one, 0.05).unwrap(), StatsSection::Skipped(_)));

        runs.get_mut(&Variant::Rf).unwrap().pop();
        let e = protocol_stats(Protocol::LooPd, &runs, 0.05).err().unwrap().to_string();
        assert!(e.contains("PD11"), "{e}");
    }

    #[test]
    fn percent_cells() {
        assert_eq!(pct(Some((0.4999, 0.1318))), "49.99 (13.18)");
        assert_eq!(pct(None), "N/A");
    }
}
