use std::fmt::Write as _;
use std::path::Path;

use flowhunter::metrics::EvalReport;

use crate::args::ReportArgs;
use crate::error::{CliError, CliResult};

const GA_HEADER: &str = "generation\tbest_fitness\tbest_genes";
const SEARCH_HEADER: &str = "index\tfitness\tgenes";

/// Numeric columns are right-aligned, the rest left-aligned.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w: Vec<usize> = header.iter().map(|h| h.len()).collect();
    let mut numeric = vec![!rows.is_empty(); header.len()];
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            w[i] = w[i].max(c.len());
            numeric[i] &= c.parse::<f64>().is_ok();
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, c) in cells.enumerate() {
            let sep = if i == 0 { "" } else { "  " };
            if numeric[i] {
                let _ = write!(s, "{sep}{c:>width$}", width = w[i]);
            } else {
                let _ = write!(s, "{sep}{c:<width$}", width = w[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&mut header.iter().copied());
    out.push_str(&line(&mut w.iter().map(|n| "-".repeat(*n)).collect::<Vec<_>>().iter().map(String::as_str)));
    for r in rows {
        out.push_str(&line(&mut r.iter().map(String::as_str)));
    }
    out
}

fn eval_table(reports: &[EvalReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.spec.kind.to_string(),
                r.dataset.clone(),
                format!("{:.4}", r.mean_fit_time_s),
                format!("{:.4}", r.mean.precision),
                format!("{:.4}", r.mean.recall),
                format!("{:.4}", r.mean.f1),
                format!("{:.4}", r.mean.accuracy),
            ]
        })
        .collect();
    table(
        &["Classifier", "Dataset", "Fit Time", "Precision", "Recall", "F1 score", "Accuracy"],
        &rows,
    )
}

fn split_rows(text: &str, path: &Path) -> CliResult<Vec<Vec<String>>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let cells: Vec<String> = l.splitn(3, '\t').map(str::to_string).collect();
            if cells.len() == 3 {
                Ok(cells)
            } else {
                Err(CliError::data(format!("{}: malformed row {l:?}", path.display())))
            }
        })
        .collect()
}

fn fitness(cell: &str, path: &Path) -> CliResult<f64> {
    cell.parse().map_err(|_| CliError::data(format!("{}: bad fitness {cell:?}", path.display())))
}

fn ga_table(text: &str, path: &Path) -> CliResult<String> {
    let mut best = f64::MIN;
    let mut rows = Vec::new();
    for r in split_rows(text, path)? {
        let f = fitness(&r[1], path)?;
        best = best.max(f);
        rows.push(vec![r[0].clone(), format!("{f:.4}"), format!("{best:.4}"), r[2].clone()]);
    }
    Ok(table(&["Generation", "Best F1", "Best so far", "Best chromosome"], &rows))
}

fn search_table(text: &str, path: &Path, top: usize) -> CliResult<String> {
    let mut rows = split_rows(text, path)?
        .into_iter()
        .map(|r| Ok((fitness(&r[1], path)?, r)))
        .collect::<CliResult<Vec<_>>>()?;
    let total = rows.len();
    // Stable: equal scores keep evaluation order.
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    let shown: Vec<Vec<String>> = rows
        .into_iter()
        .take(top)
        .enumerate()
        .map(|(rank, (f, r))| vec![(rank + 1).to_string(), r[0].clone(), format!("{f:.4}"), r[2].clone()])
        .collect();
    let mut s = table(&["Rank", "Candidate", "F1 score", "Chromosome"], &shown);
    let _ = writeln!(s, "{} of {total} candidates shown", shown.len());
    Ok(s)
}

pub fn run(a: &ReportArgs) -> CliResult<()> {
    let mut evals = Vec::new();
    let mut sections = Vec::new();
    for p in &a.files {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        if text.starts_with(GA_HEADER) {
            sections.push(format!("{}\n{}", p.display(), ga_table(&text, p)?));
        } else if text.starts_with(SEARCH_HEADER) {
            sections.push(format!("{}\n{}", p.display(), search_table(&text, p, a.top)?));
        } else {
            let r: EvalReport = serde_json::from_str(&text)
                .map_err(|e| CliError::data(format!("{}: not an evaluation report or history: {e}", p.display())))?;
            evals.push(r);
        }
    }
    if !evals.is_empty() {
        print!("{}", eval_table(&evals));
        if a.folds {
            for r in &evals {
                println!();
                print!("{}", r.to_text());
            }
        }
    }
    for (i, s) in sections.iter().enumerate() {
        if i > 0 || !evals.is_empty() {
            println!();
        }
        print!("{s}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_align() {
        let t = table(&["A", "Value"], &[vec!["long name".into(), "1.0".into()], vec!["x".into(), "12.25".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "A          Value");
        assert_eq!(lines[1], "---------  -----");
        assert_eq!(lines[2], "long name    1.0");
        assert_eq!(lines[3], "x          12.25");
    }

    #[test]
    fn ga_history_tracks_running_best() {
        let text = format!("{GA_HEADER}\n1\t0.500000\t[1]\n2\t0.400000\t[2]\n3\t0.700000\t[3]\n");
        let t = ga_table(&text, Path::new("h")).unwrap();
        let best: Vec<&str> = t.lines().skip(2).map(|l| l.split_whitespace().nth(2).unwrap()).collect();
        assert_eq!(best, ["0.5000", "0.5000", "0.7000"]);
    }

    #[test]
    fn search_rows_rank_by_fitness() {
        let text = format!("{SEARCH_HEADER}\n0\t0.2\t[a]\n1\t0.9\t[b]\n2\t0.9\t[c]\n");
        let t = search_table(&text, Path::new("s"), 2).unwrap();
        assert!(t.contains("   1          1    0.9000  [b]"), "{t}");
        assert!(t.ends_with("2 of 3 candidates shown\n"));
        assert!(search_table(&format!("{SEARCH_HEADER}\n0\tx\t[a]\n"), Path::new("s"), 1).is_err());
    }
}
