//! The `table` command: aligned rendering of `results.csv` and one
//! plot-ready `<quantity>_vs_n.dat` file per quantity.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use orthospin_core::format::g17;
use orthospin_core::report::{read_csv, ResultRow, CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("cannot read {path}: {source}")]
    Missing {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} holds no result rows")]
    Empty { path: PathBuf },
    #[error(transparent)]
    Core(#[from] orthospin_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn render(rows: &[ResultRow]) -> String {
    let header: Vec<String> = CSV_HEADER.split(',').map(str::to_string).collect();
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                g17(r.beta),
                r.n.to_string(),
                r.quantity.clone(),
                g17(r.value),
                r.method.as_str().to_string(),
                g17(r.std_error),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            cells
                .iter()
                .map(|row| row[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |row: &[String]| {
        row.iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    out.push_str(
        &widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("  "),
    );
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

fn file_stem(quantity: &str) -> String {
    quantity
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_-.=".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes the `.dat` files into `dir`: blocks per (model, β), separated by
/// two blank lines, each row `n value` sorted by `n`.
pub fn write_dat_files(rows: &[ResultRow], dir: &Path) -> Result<Vec<PathBuf>, TableError> {
    let mut quantities: Vec<&str> = Vec::new();
    for r in rows {
        if !quantities.contains(&r.quantity.as_str()) {
            quantities.push(&r.quantity);
        }
    }
    let mut written = Vec::new();
    for q in quantities {
        let mut series: Vec<(&str, f64)> = Vec::new();
        for r in rows.iter().filter(|r| r.quantity == q) {
            if !series.iter().any(|s| s.0 == r.model && s.1 == r.beta) {
                series.push((&r.model, r.beta));
            }
        }
        let mut text = String::new();
        for (k, (model, beta)) in series.iter().enumerate() {
            if k > 0 {
                text.push_str("\n\n");
            }
            text.push_str(&format!(
                "# model={model} beta={} quantity={q}\n# n value\n",
                g17(*beta)
            ));
            let mut pts: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.quantity == q && r.model == *model && r.beta == *beta)
                .collect();
            pts.sort_by_key(|r| r.n);
            for r in pts {
                text.push_str(&format!("{} {}\n", r.n, g17(r.value)));
            }
        }
        let path = dir.join(format!("{}_vs_n.dat", file_stem(q)));
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

pub fn run(dir: &Path) -> Result<(String, Vec<PathBuf>), TableError> {
    let path = dir.join("results.csv");
    let file = fs::File::open(&path).map_err(|source| TableError::Missing {
        path: path.clone(),
        source,
    })?;
    let rows = read_csv(BufReader::new(file))?;
    if rows.is_empty() {
        return Err(TableError::Empty { path });
    }
    let files = write_dat_files(&rows, dir)?;
    Ok((render(&rows), files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_align() {
        let rows = vec![
            ResultRow::exact("sine", 0.5, 8, "log_z", 5.25),
            ResultRow::exact("sine", 0.5, 10, "factorization_gap", 0.0625),
        ];
        let text = render(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let col = lines[0].find("quantity").unwrap();
        assert_eq!(&lines[2][col..col + 5], "log_z");
        assert_eq!(&lines[3][col..col + 17], "factorization_gap");
    }

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(
            file_stem("mgf_discrepancy@lambda=-2"),
            "mgf_discrepancy_lambda=-2"
        );
    }
}
