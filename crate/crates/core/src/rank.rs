//! Corpus-level aggregation, ranking and Spearman rank correlation.
//!
//! Ranks start at 0 for the best (highest-scoring) solution. Tied scores
//! share the average of the ranks they span, and Spearman's coefficient is the
//! Pearson correlation of the two rank vectors, which stays correct with ties.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::trace::json_num;

/// Scores per solution, one per execution.
pub type ScoreTable = BTreeMap<String, Vec<f64>>;

/// Rank per solution; 0 is best.
pub type RankVector = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankError {
    #[error("rank vectors cover different solutions")]
    MismatchedIds,
    #[error("at least two solutions are needed, got {0}")]
    TooFew(usize),
    #[error("every solution has the same rank; correlation is undefined")]
    ZeroVariance,
    #[error("no solutions")]
    Empty,
    #[error("solution `{0}` has no scores")]
    NoScores(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

pub fn mean_scores(table: &ScoreTable) -> Result<BTreeMap<String, f64>, RankError> {
    if table.is_empty() {
        return Err(RankError::Empty);
    }
    table
        .iter()
        .map(|(id, scores)| {
            if scores.is_empty() {
                return Err(RankError::NoScores(id.clone()));
            }
            let total: f64 = scores.iter().sum();
            Ok((id.clone(), total / scores.len() as f64))
        })
        .collect()
}

pub fn rank_solutions(scores: &BTreeMap<String, f64>) -> RankVector {
    let mut order: Vec<(&String, f64)> = scores.iter().map(|(id, s)| (id, *s)).collect();
    // descending score; ids keep the sort stable and deterministic
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut ranks = RankVector::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && order[j].1 == order[i].1 {
            j += 1;
        }
        // positions i..j share the mean of i, i+1, ..., j-1
        let avg = (i + j - 1) as f64 / 2.0;
        for (id, _) in &order[i..j] {
            ranks.insert((*id).clone(), avg);
        }
        i = j;
    }
    ranks
}

fn aligned(a: &RankVector, b: &RankVector) -> Result<(Vec<f64>, Vec<f64>), RankError> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(RankError::MismatchedIds);
    }
    if a.len() < 2 {
        return Err(RankError::TooFew(a.len()));
    }
    Ok((a.values().copied().collect(), b.values().copied().collect()))
}

/// Spearman's rho as Pearson correlation on ranks.
pub fn spearman(a: &RankVector, b: &RankVector) -> Result<f64, RankError> {
    let (x, y) = aligned(a, b)?;
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(&y) {
        let (dx, dy) = (xi - mean_x, yi - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RankError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// The closed form `1 - 6 sum(d^2) / (n (n^2 - 1))`, exact only without ties.
pub fn spearman_closed_form(a: &RankVector, b: &RankVector) -> Result<f64, RankError> {
    let (x, y) = aligned(a, b)?;
    let n = x.len() as f64;
    let d2: f64 = x.iter().zip(&y).map(|(xi, yi)| (xi - yi) * (xi - yi)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// Pairwise Spearman coefficients between oracles, each given by its score
/// table over the same solutions.
pub fn correlation_matrix(tables: &[ScoreTable]) -> Result<Vec<Vec<f64>>, RankError> {
    let ranks = tables
        .iter()
        .map(|t| mean_scores(t).map(|m| rank_solutions(&m)))
        .collect::<Result<Vec<_>, _>>()?;
    matrix_from_ranks(&ranks)
}

pub fn matrix_from_ranks(ranks: &[RankVector]) -> Result<Vec<Vec<f64>>, RankError> {
    let k = ranks.len();
    let mut matrix = vec![vec![1.0; k]; k];
    for i in 0..k {
        // validates ids, size and variance even for k = 1
        spearman(&ranks[i], &ranks[i])?;
        for j in i + 1..k {
            let rho = spearman(&ranks[i], &ranks[j])?;
            matrix[i][j] = rho;
            matrix[j][i] = rho;
        }
    }
    Ok(matrix)
}

/// One row of a scores file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub solution: String,
    pub trace: String,
    pub score: f64,
}

fn csv_error(line: usize, e: impl std::fmt::Display) -> RankError {
    RankError::Format {
        line,
        message: e.to_string(),
    }
}

fn read_rows<R: Read>(input: R, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>, RankError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found = reader.headers().map_err(|e| csv_error(1, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(csv_error(1, format!("expected header `{}`", header.join(","))));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(line, e))?;
        if record.len() != header.len() {
            return Err(csv_error(line, format!("expected {} columns", header.len())));
        }
        rows.push((line, record));
    }
    Ok(rows)
}

fn parse_finite(line: usize, text: &str) -> Result<f64, RankError> {
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(csv_error(line, format!("`{text}` is not a finite number"))),
    }
}

/// Parses `solution,trace,score`.
pub fn read_scores<R: Read>(input: R) -> Result<Vec<ScoreRow>, RankError> {
    read_rows(input, &["solution", "trace", "score"])?
        .into_iter()
        .map(|(line, r)| {
            Ok(ScoreRow {
                solution: r[0].to_string(),
                trace: r[1].to_string(),
                score: parse_finite(line, &r[2])?,
            })
        })
        .collect()
}

pub fn write_scores<W: Write>(mut out: W, rows: &[ScoreRow]) -> std::io::Result<()> {
    writeln!(out, "solution,trace,score")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.solution, r.trace, json_num(r.score))?;
    }
    Ok(())
}

pub fn score_table(rows: &[ScoreRow]) -> ScoreTable {
    let mut table = ScoreTable::new();
    for r in rows {
        table.entry(r.solution.clone()).or_default().push(r.score);
    }
    table
}

/// Parses `solution,rank`.
pub fn read_ranks<R: Read>(input: R) -> Result<RankVector, RankError> {
    let mut ranks = RankVector::new();
    for (line, r) in read_rows(input, &["solution", "rank"])? {
        let rank = parse_finite(line, &r[1])?;
        if ranks.insert(r[0].to_string(), rank).is_some() {
            return Err(csv_error(line, format!("duplicate solution `{}`", &r[0])));
        }
    }
    Ok(ranks)
}

/// Writes ranks best first, ties by solution id.
pub fn write_ranks<W: Write>(mut out: W, ranks: &RankVector) -> std::io::Result<()> {
    let mut order: Vec<(&String, &f64)> = ranks.iter().collect();
    order.sort_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)));
    writeln!(out, "solution,rank")?;
    for (id, rank) in order {
        writeln!(out, "{id},{}", json_num(*rank))?;
    }
    Ok(())
}

pub fn write_matrix<W: Write>(mut out: W, names: &[String], matrix: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(out, "od,{}", names.join(","))?;
    for (name, row) in names.iter().zip(matrix) {
        let cells: Vec<String> = row.iter().map(|x| json_num(*x)).collect();
        writeln!(out, "{name},{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn ranks(values: &[f64]) -> RankVector {
        values.iter().enumerate().map(|(i, r)| (format!("s{i:03}"), *r)).collect()
    }

    #[test]
    fn means() {
        let table = |pairs: &[(&str, &[f64])]| -> ScoreTable {
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
        };
        assert_eq!(mean_scores(&table(&[("A", &[10.0])])).unwrap(), scores(&[("A", 10.0)]));
        assert_eq!(mean_scores(&table(&[("A", &[1.0, 2.0, 3.0])])).unwrap(), scores(&[("A", 2.0)]));
        assert_eq!(
            mean_scores(&table(&[("A", &[-1.0, -1.0]), ("B", &[0.0, 2.0])])).unwrap(),
            scores(&[("A", -1.0), ("B", 1.0)])
        );
        assert_eq!(mean_scores(&table(&[("A", &[])])), Err(RankError::NoScores("A".into())));
    }

    #[test]
    fn ranking_and_ties() {
        assert_eq!(
            rank_solutions(&scores(&[("A", 10.0), ("B", 5.0), ("C", 7.0)])),
            scores(&[("A", 0.0), ("C", 1.0), ("B", 2.0)])
        );
        assert_eq!(
            rank_solutions(&scores(&[("A", 5.0), ("B", 5.0)])),
            scores(&[("A", 0.5), ("B", 0.5)])
        );
        let all_equal = rank_solutions(&scores(&[("A", 1.0), ("B", 1.0), ("C", 1.0), ("D", 1.0)]));
        assert!(all_equal.values().all(|r| *r == 1.5));
    }

    #[test]
    fn spearman_examples() {
        let a = ranks(&[0.0, 1.0, 2.0]);
        assert_eq!(spearman(&a, &a), Ok(1.0));
        assert_eq!(spearman(&a, &ranks(&[2.0, 1.0, 0.0])), Ok(-1.0));
        let rho = spearman(&ranks(&[0.0, 1.0, 2.0, 3.0]), &ranks(&[0.0, 2.0, 1.0, 3.0])).unwrap();
        assert!((rho - 0.8).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        let a = ranks(&[0.0, 1.0]);
        assert_eq!(spearman(&a, &ranks(&[0.0, 1.0, 2.0])), Err(RankError::MismatchedIds));
        assert_eq!(spearman(&ranks(&[0.0]), &ranks(&[0.0])), Err(RankError::TooFew(1)));
        assert_eq!(spearman(&a, &ranks(&[0.5, 0.5])), Err(RankError::ZeroVariance));
    }

    #[test]
    fn matrix_shapes() {
        let t: ScoreTable = [("a", vec![1.0]), ("b", vec![2.0]), ("c", vec![3.0])]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(correlation_matrix(std::slice::from_ref(&t)).unwrap(), vec![vec![1.0]]);
        assert_eq!(correlation_matrix(&[t.clone(), t]).unwrap(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn file_formats() {
        let rows = read_scores("solution,trace,score\nA,t1,1.5\nA,t2,-2\nB,t1,0\n".as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(score_table(&rows)["A"], vec![1.5, -2.0]);
        let mut out = Vec::new();
        write_scores(&mut out, &rows).unwrap();
        assert_eq!(read_scores(out.as_slice()).unwrap(), rows);

        let r = rank_solutions(&scores(&[("A", 1.0), ("B", 3.0)]));
        let mut out = Vec::new();
        write_ranks(&mut out, &r).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "solution,rank\nB,0.0\nA,1.0\n");
        assert_eq!(read_ranks(out.as_slice()).unwrap(), r);

        assert!(matches!(read_scores("a,b\n".as_bytes()), Err(RankError::Format { line: 1, .. })));
        assert!(matches!(
            read_ranks("solution,rank\nA,x\n".as_bytes()),
            Err(RankError::Format { line: 2, .. })
        ));
        assert!(matches!(
            read_ranks("solution,rank\nA,1\nA,2\n".as_bytes()),
            Err(RankError::Format { line: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn rank_sum_is_triangular(values in prop::collection::vec(-5i32..5, 1..40)) {
            let s: BTreeMap<String, f64> = values.iter().enumerate()
                .map(|(i, v)| (format!("s{i:03}"), *v as f64)).collect();
            let r = rank_solutions(&s);
            let n = values.len() as f64;
            prop_assert_eq!(r.values().sum::<f64>(), n * (n - 1.0) / 2.0);
        }

        #[test]
        fn monotone_transforms_keep_ranks(values in prop::collection::vec(-100i32..100, 2..30)) {
            let s: BTreeMap<String, f64> = values.iter().enumerate()
                .map(|(i, v)| (format!("s{i:03}"), *v as f64)).collect();
            let shifted: BTreeMap<String, f64> = s.iter().map(|(k, v)| (k.clone(), v.powi(3) + 7.0)).collect();
            prop_assert_eq!(rank_solutions(&s), rank_solutions(&shifted));
        }

        #[test]
        fn spearman_is_symmetric(a in prop::collection::vec(-3i32..3, 3..20), seed in any::<u64>()) {
            let n = a.len();
            let b: Vec<i32> = (0..n).map(|i| ((seed >> (i % 60)) & 3) as i32).collect();
            let ra = rank_solutions(&a.iter().enumerate().map(|(i, v)| (format!("s{i:03}"), *v as f64)).collect());
            let rb = rank_solutions(&b.iter().enumerate().map(|(i, v)| (format!("s{i:03}"), *v as f64)).collect());
            match (spearman(&ra, &rb), spearman(&rb, &ra)) {
                (Ok(x), Ok(y)) => {
                    prop_assert_eq!(x, y);
                    prop_assert!((-1.0..=1.0).contains(&x));
                }
                (x, y) => prop_assert_eq!(x, y),
            }
            if let Ok(rho) = spearman(&ra, &ra) {
                prop_assert_eq!(rho, 1.0);
            }
        }
    }
}
