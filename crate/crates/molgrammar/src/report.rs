//! Plain-text tables for terminal output.

use std::fmt::Write;

use molgrammar_core::eval::MetricReport;

use crate::pipeline::{GenerateSummary, InduceSummary, RankSummary, RoundTripSummary};

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

pub fn metrics_table(r: &MetricReport) -> String {
    let mut s = String::new();
    let rows = [
        ("samples", r.sample_count.to_string()),
        ("rejected slots", r.rejected_count.to_string()),
        ("valid", pct(r.valid)),
        ("unique", pct(r.unique)),
        ("novelty", pct(r.novelty)),
        ("diversity", format!("{:.3}", r.diversity)),
        ("membership", r.membership.map_or_else(|| "n/a".to_owned(), pct)),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<16}{v:>10}");
    }
    s
}

pub fn induce_table(r: &InduceSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "molecules       {:>10}", r.molecules);
    let _ = writeln!(s, "passes          {:>10}", r.passes);
    let _ = writeln!(s, "MSGs written    {:>10}", r.msgs_written);
    let _ = writeln!(s, "failures        {:>10}", r.failures.len());
    let _ = writeln!(s, "distinct rules  {:>10}", r.rules);
    let _ = writeln!(s, "rule count      {:>10}", r.total_count);
    let _ = writeln!(s, "grammar         {}", r.grammar.display());
    for f in &r.failures {
        let _ = writeln!(s, "  failed #{} {} pass {}: {}", f.molecule, f.smiles, f.pass, f.error);
    }
    s
}

pub fn rank_table(r: &RankSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>5}  {:<32} {:>8}  order", "#", "molecule", "entrants");
    for st in &r.standings {
        let order: Vec<String> = st.ranking.order.iter().map(|p| format!("{p}(r{})", st.ranking.rank[*p])).collect();
        let _ = writeln!(s, "{:>5}  {:<32} {:>8}  {}", st.molecule, st.smiles, st.ranking.entrants.len(), order.join(" "));
    }
    let _ = writeln!(s, "{} of {} molecules had discrepant passes", r.discrepant, r.molecules);
    let _ = writeln!(s, "grammar: {}", r.grammar.display());
    s
}

pub fn generate_table(r: &GenerateSummary) -> String {
    let mut s = metrics_table(&r.report);
    for (reason, n) in &r.rejections {
        let _ = writeln!(s, "rejected ({reason}){:>width$}", n, width = 24usize.saturating_sub(reason.len() + 11));
    }
    s
}

pub fn roundtrip_table(r: &RoundTripSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "reproduced {}/{}", r.reproduced, r.molecules);
    for m in &r.mismatched {
        let _ = writeln!(s, "  mismatch {m}");
    }
    for f in &r.failures {
        let _ = writeln!(s, "  failed #{} {}: {}", f.molecule, f.smiles, f.error);
    }
    s
}
