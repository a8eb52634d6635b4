//! Report rendering: one CSV row per store and criterion at full float
//! precision for machines, plus an aligned text table (three-decimal
//! display) comparing every store at every cut-off for people.

use xmodal_core::eval::EvalReport;

/// One evaluated store under a display label ("baseline", "by LSI", ...).
pub struct StoreEval {
    pub label: String,
    pub report: EvalReport,
}

fn csv_header(cutoffs: &[usize]) -> String {
    let mut h = String::from("criterion,store,dim");
    for k in cutoffs {
        h.push_str(&format!(",p@{k}"));
    }
    h.push('\n');
    h
}

fn csv_row(out: &mut String, criterion: &str, label: &str, dim: usize, means: &[f64]) {
    out.push_str(&format!("{criterion},{label},{dim}"));
    for m in means {
        out.push_str(&format!(",{m}"));
    }
    out.push('\n');
}

/// Machine CSV for one store: a collection-criterion row and, when terms
/// were evaluated, a macro-over-terms row.
pub fn render_store_csv(ev: &StoreEval) -> String {
    let r = &ev.report;
    let mut out = csv_header(&r.cutoffs);
    csv_row(&mut out, "collection", &ev.label, r.dim, &r.collection.means);
    if !r.term_means.is_empty() {
        csv_row(&mut out, "term", &ev.label, r.dim, &r.term_means);
    }
    out
}

/// Machine CSV across stores, collection rows first, then term rows,
/// stores in the given order within each block.
pub fn render_combined_csv(evals: &[StoreEval]) -> String {
    assert!(!evals.is_empty());
    let cutoffs = &evals[0].report.cutoffs;
    let mut out = csv_header(cutoffs);
    for ev in evals {
        assert_eq!(&ev.report.cutoffs, cutoffs, "stores evaluated at one cut-off set");
        csv_row(&mut out, "collection", &ev.label, ev.report.dim, &ev.report.collection.means);
    }
    for ev in evals {
        if !ev.report.term_means.is_empty() {
            csv_row(&mut out, "term", &ev.label, ev.report.dim, &ev.report.term_means);
        }
    }
    out
}

/// Per-term detail for one store: match count, entropy over collections in
/// bits, and precision at every cut-off.
pub fn render_per_term_csv(ev: &StoreEval) -> String {
    let r = &ev.report;
    let mut out = String::from("term,records,entropy_bits");
    for k in &r.cutoffs {
        out.push_str(&format!(",p@{k}"));
    }
    out.push('\n');
    for t in &r.terms {
        out.push_str(&format!("{},{},{}", t.term, t.records, t.entropy));
        for p in &t.precision {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    out
}

/// Aligned comparison table, one block per criterion: rows are stores,
/// columns are Dim plus each cut-off, three-decimal precision values.
pub fn render_table(evals: &[StoreEval]) -> String {
    assert!(!evals.is_empty());
    let cutoffs = &evals[0].report.cutoffs;
    let label_w = evals.iter().map(|e| e.label.len()).chain(["store".len()]).max().unwrap();

    let header = |title: &str| {
        let mut s = String::from(title);
        s.push('\n');
        s.push_str(&format!("{:label_w$}  {:>5}", "store", "Dim"));
        for k in cutoffs {
            s.push_str(&format!("  {k:>6}"));
        }
        s.push('\n');
        s
    };
    let row = |label: &str, dim: usize, means: &[f64]| {
        let mut s = format!("{label:label_w$}  {dim:>5}");
        for m in means {
            s.push_str(&format!("  {m:>6.3}"));
        }
        s.push('\n');
        s
    };

    let mut out = header("precision by collection");
    for ev in evals {
        assert_eq!(&ev.report.cutoffs, cutoffs, "stores evaluated at one cut-off set");
        out.push_str(&row(&ev.label, ev.report.dim, &ev.report.collection.means));
    }
    let with_terms: Vec<&StoreEval> =
        evals.iter().filter(|e| !e.report.term_means.is_empty()).collect();
    if !with_terms.is_empty() {
        out.push('\n');
        out.push_str(&header("precision by content term (macro over terms)"));
        for ev in with_terms {
            out.push_str(&row(&ev.label, ev.report.dim, &ev.report.term_means));
        }
    }
    if evals.iter().any(|e| e.report.clamped) {
        out.push_str("\nnote: cut-offs beyond the store size were clamped to n-1\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use xmodal_core::corpus::{Corpus, Record};
    use xmodal_core::eval::{build_term_queries, evaluate, EmbeddingStore, StoreTag};
    use xmodal_core::textprep::StopwordTable;

    fn demo_eval(label: &str) -> StoreEval {
        let mut records = Vec::new();
        for i in 0..6 {
            let mut r = Record::new(format!("r{i}"), format!("c{}", i % 2));
            r.title = Some(if i < 3 { "bronze chime" } else { "seaside surf" }.to_string());
            records.push(r);
        }
        let corpus = Corpus::from_records(records).unwrap();
        // even/odd ordinals alternate collections; cluster by title instead
        let data: Vec<f64> =
            (0..6).flat_map(|i| [if i < 3 { 0.0 } else { 10.0 }, i as f64 * 0.01]).collect();
        let store = EmbeddingStore::new(data, 2, StoreTag::Crnn).unwrap();
        let stop = StopwordTable::bundled();
        let queries =
            build_term_queries(&corpus, &stop, &["bronze".into(), "surf".into(), "rare".into()]);
        let report = evaluate(&store, &corpus, &queries, &[1, 2, 10]).unwrap();
        StoreEval { label: label.to_string(), report }
    }

    #[test]
    fn store_csv_has_collection_and_term_rows() {
        let csv = render_store_csv(&demo_eval("by LSI"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "criterion,store,dim,p@1,p@2,p@10");
        assert!(lines[1].starts_with("collection,by LSI,2,"));
        assert!(lines[2].starts_with("term,by LSI,2,"));
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn per_term_csv_lists_each_included_term() {
        let csv = render_per_term_csv(&demo_eval("x"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "term,records,entropy_bits,p@1,p@2,p@10");
        // "rare" matches nothing and is excluded
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().any(|l| l.starts_with("bronze,3,")));
        assert!(lines.iter().any(|l| l.starts_with("surf,3,")));
    }

    #[test]
    fn combined_outputs_align_stores_and_criteria() {
        let evals = vec![demo_eval("baseline"), demo_eval("by Collection")];
        let csv = render_combined_csv(&evals);
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().filter(|l| l.starts_with("collection,")).count(), 2);
        assert_eq!(csv.lines().filter(|l| l.starts_with("term,")).count(), 2);

        let table = render_table(&evals);
        assert!(table.contains("precision by collection"));
        assert!(table.contains("precision by content term"));
        // all data rows align: same byte offset for the Dim column
        let rows: Vec<&str> =
            table.lines().filter(|l| l.starts_with("baseline") || l.starts_with("by ")).collect();
        assert_eq!(rows.len(), 4);
        let dim_col = rows[0].find("    2").unwrap();
        for r in &rows {
            assert_eq!(r.find("    2"), Some(dim_col), "misaligned row: {r}");
        }
        // clamping note present: cut-off 10 exceeds the 5 neighbours
        assert!(table.contains("clamped"));
    }
}
