//! Paper-style tables, ranking scores and run-directory persistence.

pub mod artifacts;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::SequenceMode;
use crate::extraction::HallucinationStats;
use crate::metrics::MetricReport;

pub use artifacts::{persist_run, verify_manifest, Manifest, RunDir};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("required artifact {0} is missing")]
    MissingArtifact(std::path::PathBuf),
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: std::path::PathBuf,
        line: usize,
        reason: String,
    },
    #[error("ranking needs at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("report for {model} has no value for {metric}")]
    MissingMetric { model: String, metric: &'static str },
    #[error("nothing to report")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Accuracy,
    Fairness,
    Stability,
    Efficiency,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Accuracy,
        Dimension::Fairness,
        Dimension::Stability,
        Dimension::Efficiency,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Dimension::Accuracy => "Accuracy",
            Dimension::Fairness => "Fairness",
            Dimension::Stability => "Stability",
            Dimension::Efficiency => "Efficiency",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Recall,
    Ndcg,
    Arp,
    Arq,
    Arqv,
    Arr,
    Art,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Recall,
        Metric::Ndcg,
        Metric::Arp,
        Metric::Arq,
        Metric::Arqv,
        Metric::Arr,
        Metric::Art,
    ];

    pub fn direction(self) -> Direction {
        match self {
            Metric::Recall | Metric::Ndcg | Metric::Arq | Metric::Arr => Direction::HigherBetter,
            Metric::Arp | Metric::Arqv | Metric::Art => Direction::LowerBetter,
        }
    }

    pub fn dimension(self) -> Dimension {
        match self {
            Metric::Recall | Metric::Ndcg => Dimension::Accuracy,
            Metric::Arp | Metric::Arq => Dimension::Fairness,
            Metric::Arqv | Metric::Arr => Dimension::Stability,
            Metric::Art => Dimension::Efficiency,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Ndcg => "ndcg",
            Metric::Arp => "arp",
            Metric::Arq => "arq",
            Metric::Arqv => "arqv",
            Metric::Arr => "arr",
            Metric::Art => "art",
        }
    }

    pub fn header(self, k: usize) -> String {
        match self {
            Metric::Recall => format!("Recall@{k}"),
            Metric::Ndcg => format!("NDCG@{k}"),
            Metric::Arp => "ARP".into(),
            Metric::Arq => "ARQ".into(),
            Metric::Arqv => "ARQV".into(),
            Metric::Arr => "ARR".into(),
            Metric::Art => "ART(s)".into(),
        }
    }

    pub fn value(self, r: &MetricReport) -> f64 {
        match self {
            Metric::Recall => r.recall_at_k,
            Metric::Ndcg => r.ndcg_at_k,
            Metric::Arp => r.arp,
            Metric::Arq => r.arq,
            Metric::Arqv => r.arqv,
            Metric::Arr => r.arr,
            Metric::Art => r.art_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub per_metric: BTreeMap<Metric, f64>,
    pub per_dimension: BTreeMap<Dimension, f64>,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingScore {
    /// In input order.
    pub models: Vec<ModelScore>,
}

/// Scores models M..1 per metric (best gets M), averaging ranks over ties,
/// then sums scores per dimension and overall.
pub fn rank_scores(reports: &[(String, BTreeMap<Metric, f64>)]) -> Result<RankingScore, ReportError> {
    let m = reports.len();
    if m < 2 {
        return Err(ReportError::TooFewModels(m));
    }
    let mut scores: Vec<BTreeMap<Metric, f64>> = vec![BTreeMap::new(); m];

    for metric in Metric::ALL {
        let mut values = Vec::with_capacity(m);
        for (model, r) in reports {
            let v = *r.get(&metric).ok_or_else(|| ReportError::MissingMetric {
                model: model.clone(),
                metric: metric.key(),
            })?;
            values.push(v);
        }
        for (i, s) in rank_by_direction(&values, metric.direction()).into_iter().enumerate() {
            scores[i].insert(metric, s);
        }
    }

    let models = reports
        .iter()
        .zip(scores)
        .map(|((model, _), per_metric)| {
            let mut per_dimension: BTreeMap<Dimension, f64> = Dimension::ALL.iter().map(|&d| (d, 0.0)).collect();
            for (metric, s) in &per_metric {
                *per_dimension
                    .get_mut(&metric.dimension())
                    .expect("all dimensions present") += s;
            }
            let overall = per_dimension.values().sum();
            ModelScore {
                model: model.clone(),
                per_metric,
                per_dimension,
                overall,
            }
        })
        .collect();
    Ok(RankingScore { models })
}

/// Scores for one metric: worst gets 1, best gets `values.len()`.
pub fn rank_by_direction(values: &[f64], direction: Direction) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Ascending "goodness", so position p (0-based) earns score p + 1.
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        match direction {
            Direction::HigherBetter => ord,
            Direction::LowerBetter => ord.reverse(),
        }
    });
    let mut scores = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]].total_cmp(&values[order[start]]).is_eq() {
            end += 1;
        }
        // Positions start..end share the mean of scores start+1..=end.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            scores[idx] = shared;
        }
        start = end;
    }
    scores
}

/// Rounds to `places` decimals, half-to-even on the shortest decimal
/// representation of `x` (so 0.31415 renders as 0.3142).
pub fn round_half_even(x: f64, places: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let repr = format!("{x}");
    let (negative, digits) = match repr.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, repr.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));

    let mut kept: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes().chain(std::iter::repeat(b'0')).take(places))
        .map(|b| b - b'0')
        .collect();
    let dropped: Vec<u8> = frac_part.bytes().skip(places).map(|b| b - b'0').collect();

    let round_up = match dropped.first() {
        None => false,
        Some(&d) if d > 5 => true,
        Some(&d) if d < 5 => false,
        Some(_) => {
            let exactly_half = dropped[1..].iter().all(|&d| d == 0);
            !exactly_half || kept.last().is_some_and(|d| d % 2 == 1)
        }
    };
    if round_up {
        let mut i = kept.len();
        loop {
            if i == 0 {
                kept.insert(0, 1);
                break;
            }
            i -= 1;
            if kept[i] == 9 {
                kept[i] = 0;
            } else {
                kept[i] += 1;
                break;
            }
        }
    }

    let int_len = kept.len() - places;
    let mut out = String::new();
    let is_zero = kept.iter().all(|&d| d == 0);
    if negative && !is_zero {
        out.push('-');
    }
    for d in &kept[..int_len] {
        out.push((b'0' + d) as char);
    }
    if places > 0 {
        out.push('.');
        for d in &kept[int_len..] {
            out.push((b'0' + d) as char);
        }
    }
    out
}

fn fmt4(x: f64) -> String {
    round_half_even(x, 4)
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub mode: SequenceMode,
    pub metrics: MetricReport,
    pub hallucination: HallucinationStats,
    /// Executions attempted (successes + failures).
    pub attempted: usize,
}

impl ReportRow {
    pub fn label(&self) -> String {
        format!("{}{}", self.model, self.mode.row_suffix())
    }

    pub fn metric_map(&self) -> BTreeMap<Metric, f64> {
        Metric::ALL.iter().map(|&m| (m, m.value(&self.metrics))).collect()
    }
}

/// Rendered report files, keyed by file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub markdown: String,
    pub csv: String,
    pub overall_scores_csv: String,
    pub hallucination_csv: String,
}

impl ReportFiles {
    pub fn entries(&self) -> [(&'static str, &str); 4] {
        [
            ("report.md", &self.markdown),
            ("report.csv", &self.csv),
            ("overall_scores.csv", &self.overall_scores_csv),
            ("hallucination.csv", &self.hallucination_csv),
        ]
    }
}

pub struct ReportContext<'a> {
    pub dataset_name: &'a str,
    pub k: usize,
    pub repetitions: usize,
    pub include_few_shot_in_ranking: bool,
}

/// Models entering the ranking pool, in row order.
pub fn ranking_pool(rows: &[ReportRow], include_few_shot: bool) -> Vec<(String, BTreeMap<Metric, f64>)> {
    rows.iter()
        .filter(|r| include_few_shot || r.mode == SequenceMode::Full)
        .map(|r| (r.label(), r.metric_map()))
        .collect()
}

fn csv_row(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    w.write_record(fields).expect("writing to a Vec cannot fail");
    String::from_utf8(w.into_inner().expect("flush to Vec")).expect("csv of UTF-8 fields is UTF-8")
}

pub fn emit_report(rows: &[ReportRow], ctx: &ReportContext<'_>) -> Result<ReportFiles, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let k = ctx.k;
    let pool = ranking_pool(rows, ctx.include_few_shot_in_ranking);
    let ranking = if pool.len() >= 2 {
        Some(rank_scores(&pool)?)
    } else {
        None
    };

    let mut md = String::new();
    let _ = writeln!(md, "# {} (K={}, T={})", ctx.dataset_name, k, ctx.repetitions);
    md.push('\n');
    md.push_str("| Model | Accuracy | | Fairness | | Stability | | Efficiency |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    md.push_str("| |");
    for m in Metric::ALL {
        let _ = write!(md, " {} |", m.header(k));
    }
    md.push('\n');
    for row in rows {
        let _ = write!(md, "| {} |", row.label());
        for m in Metric::ALL {
            let _ = write!(md, " {} |", fmt4(m.value(&row.metrics)));
        }
        md.push('\n');
    }

    md.push_str("\n## Execution success\n\n| Model | Successful | Attempted | Users |\n|---|---|---|---|\n");
    for row in rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} |",
            row.label(),
            row.metrics.num_executions,
            row.attempted,
            row.metrics.num_users
        );
    }

    let modes = distinct_modes(rows);
    md.push_str("\n## Hallucination rate\n\n| Model |");
    for mode in &modes {
        let _ = write!(md, " {} |", mode_title(*mode));
    }
    md.push_str("\n|---|");
    md.push_str(&"---|".repeat(modes.len()));
    md.push('\n');
    for (model, cells) in by_model(rows) {
        let _ = write!(md, "| {model} |");
        for mode in &modes {
            let cell = cells
                .iter()
                .find(|r| r.mode == *mode)
                .map(|r| fmt4(r.hallucination.rate))
                .unwrap_or_else(|| "-".into());
            let _ = write!(md, " {cell} |");
        }
        md.push('\n');
    }

    if let Some(ranking) = &ranking {
        md.push_str("\n## Ranking scores\n\n| Model |");
        for d in Dimension::ALL {
            let _ = write!(md, " {} |", d.title());
        }
        md.push_str(" Overall |\n|---|---|---|---|---|---|\n");
        for s in &ranking.models {
            let _ = write!(md, "| {} |", s.model);
            for d in Dimension::ALL {
                let _ = write!(md, " {} |", s.per_dimension[&d]);
            }
            let _ = writeln!(md, " {} |", s.overall);
        }
    }

    let mut csv_out = csv_row(
        &[
            "model",
            "mode",
            "k",
            "recall_at_k",
            "ndcg_at_k",
            "arp",
            "arq",
            "arqv",
            "arr",
            "art_seconds",
            "num_users",
            "num_executions",
            "failures",
        ]
        .map(String::from),
    );
    for row in rows {
        let r = &row.metrics;
        csv_out.push_str(&csv_row(&[
            row.model.clone(),
            row.mode.label(),
            k.to_string(),
            r.recall_at_k.to_string(),
            r.ndcg_at_k.to_string(),
            r.arp.to_string(),
            r.arq.to_string(),
            r.arqv.to_string(),
            r.arr.to_string(),
            r.art_seconds.to_string(),
            r.num_users.to_string(),
            r.num_executions.to_string(),
            r.failures.to_string(),
        ]));
    }

    let mut header: Vec<String> = vec!["model".into()];
    header.extend(Metric::ALL.iter().map(|m| m.key().to_string()));
    header.extend(Dimension::ALL.iter().map(|d| d.title().to_ascii_lowercase()));
    header.push("overall".into());
    let mut overall = csv_row(&header);
    for s in ranking.iter().flat_map(|r| r.models.iter()) {
        let mut fields = vec![s.model.clone()];
        fields.extend(Metric::ALL.iter().map(|m| s.per_metric[m].to_string()));
        fields.extend(Dimension::ALL.iter().map(|d| s.per_dimension[d].to_string()));
        fields.push(s.overall.to_string());
        overall.push_str(&csv_row(&fields));
    }

    let mut header = vec!["model".to_string()];
    header.extend(modes.iter().map(|m| format!("{} {}", ctx.dataset_name, mode_title(*m))));
    let mut hallucination = csv_row(&header);
    for (model, cells) in by_model(rows) {
        let mut fields = vec![model];
        for mode in &modes {
            fields.push(
                cells
                    .iter()
                    .find(|r| r.mode == *mode)
                    .map(|r| r.hallucination.rate.to_string())
                    .unwrap_or_default(),
            );
        }
        hallucination.push_str(&csv_row(&fields));
    }

    Ok(ReportFiles {
        markdown: md,
        csv: csv_out,
        overall_scores_csv: overall,
        hallucination_csv: hallucination,
    })
}

fn mode_title(mode: SequenceMode) -> String {
    match mode {
        SequenceMode::Full => "full".into(),
        SequenceMode::FewShot(n) => format!("few-shot-{n}"),
    }
}

fn distinct_modes(rows: &[ReportRow]) -> Vec<SequenceMode> {
    let mut modes: Vec<SequenceMode> = rows.iter().map(|r| r.mode).collect();
    modes.sort();
    modes.dedup();
    modes
}

fn by_model(rows: &[ReportRow]) -> Vec<(String, Vec<&ReportRow>)> {
    let mut out: Vec<(String, Vec<&ReportRow>)> = Vec::new();
    for row in rows {
        match out.iter_mut().find(|(m, _)| *m == row.model) {
            Some((_, cells)) => cells.push(row),
            None => out.push((row.model.clone(), vec![row])),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(recall: f64, art: f64) -> MetricReport {
        MetricReport {
            recall_at_k: recall,
            ndcg_at_k: recall / 2.0,
            arp: 10.0,
            arq: 4.0,
            arqv: 0.5,
            arr: 1.0,
            art_seconds: art,
            num_users: 3,
            num_executions: 30,
            failures: 0,
            quality_excluded_users: 0,
            quality_skipped_items: 0,
        }
    }

    fn row(model: &str, mode: SequenceMode, recall: f64, art: f64) -> ReportRow {
        ReportRow {
            model: model.into(),
            mode,
            metrics: report(recall, art),
            hallucination: HallucinationStats {
                invalid_count: 1,
                total_predicted: 10,
                rate: 0.1,
            },
            attempted: 30,
        }
    }

    #[test]
    fn higher_better_scores() {
        assert_eq!(
            rank_by_direction(&[0.5, 0.2, 0.9], Direction::HigherBetter),
            vec![2.0, 1.0, 3.0]
        );
    }

    #[test]
    fn lower_better_ties_average() {
        assert_eq!(
            rank_by_direction(&[1.0, 1.0, 2.0], Direction::LowerBetter),
            vec![2.5, 2.5, 1.0]
        );
    }

    #[test]
    fn all_tied() {
        assert_eq!(rank_by_direction(&[3.0; 4], Direction::HigherBetter), vec![2.5; 4]);
    }

    #[test]
    fn rank_scores_needs_two_models_and_all_metrics() {
        let one = vec![("a".to_string(), row("a", SequenceMode::Full, 0.1, 1.0).metric_map())];
        assert!(matches!(rank_scores(&one), Err(ReportError::TooFewModels(1))));

        let mut partial = row("b", SequenceMode::Full, 0.1, 1.0).metric_map();
        partial.remove(&Metric::Arr);
        let two = vec![one[0].clone(), ("b".to_string(), partial)];
        assert!(matches!(
            rank_scores(&two),
            Err(ReportError::MissingMetric { metric: "arr", .. })
        ));
    }

    #[test]
    fn dimension_sums() {
        let pool = vec![
            ("a".to_string(), row("a", SequenceMode::Full, 0.1, 1.0).metric_map()),
            ("b".to_string(), row("b", SequenceMode::Full, 0.3, 2.0).metric_map()),
        ];
        let scores = rank_scores(&pool).unwrap();
        let b = &scores.models[1];
        assert_eq!(b.per_dimension[&Dimension::Accuracy], 4.0);
        assert_eq!(b.per_dimension[&Dimension::Efficiency], 1.0);
        // arp/arq/arqv/arr tie: 1.5 each.
        assert_eq!(b.per_dimension[&Dimension::Fairness], 3.0);
        assert_eq!(b.overall, 4.0 + 3.0 + 3.0 + 1.0);
    }

    #[test]
    fn rounding_half_even_on_decimal_repr() {
        assert_eq!(round_half_even(0.31415, 4), "0.3142");
        assert_eq!(round_half_even(0.31425, 4), "0.3142");
        assert_eq!(round_half_even(0.314251, 4), "0.3143");
        assert_eq!(round_half_even(0.99995, 4), "1.0000");
        assert_eq!(round_half_even(9.99996, 4), "10.0000");
        assert_eq!(round_half_even(2.0, 4), "2.0000");
        assert_eq!(round_half_even(157.8304, 4), "157.8304");
        assert_eq!(round_half_even(-0.00001, 4), "0.0000");
        assert_eq!(round_half_even(-1.23456, 4), "-1.2346");
        assert_eq!(round_half_even(1e-7, 4), "0.0000");
        assert_eq!(round_half_even(0.6309297535714575, 4), "0.6309");
    }

    #[test]
    fn markdown_header_uses_k() {
        let rows = vec![row("pop", SequenceMode::Full, 0.31415, 0.1)];
        let ctx = ReportContext {
            dataset_name: "ML-100K",
            k: 5,
            repetitions: 10,
            include_few_shot_in_ranking: false,
        };
        let files = emit_report(&rows, &ctx).unwrap();
        assert!(files.markdown.contains("Recall@5"));
        assert!(files.markdown.contains("NDCG@5"));
        assert!(files.markdown.contains("| pop | 0.3142 |"));
        // a single model has no ranking
        assert_eq!(files.overall_scores_csv.lines().count(), 1);
    }

    #[test]
    fn few_shot_rows_are_suffixed_and_excluded_from_pool() {
        let rows = vec![
            row("llama", SequenceMode::Full, 0.1, 1.0),
            row("llama", SequenceMode::FewShot(5), 0.2, 1.0),
            row("gpt", SequenceMode::Full, 0.3, 1.0),
        ];
        let ctx = ReportContext {
            dataset_name: "Yelp",
            k: 5,
            repetitions: 10,
            include_few_shot_in_ranking: false,
        };
        let files = emit_report(&rows, &ctx).unwrap();
        assert!(files.markdown.contains("| llama (few-shot-5) |"));
        assert_eq!(files.overall_scores_csv.lines().count(), 3);
        assert!(files.hallucination_csv.starts_with("model,Yelp full,Yelp few-shot-5\n"));
        assert_eq!(ranking_pool(&rows, true).len(), 3);
    }
}
