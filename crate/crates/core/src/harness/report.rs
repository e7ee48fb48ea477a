use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use super::{ExperimentKind, Table};
use crate::error::{Error, Result};
use crate::stats::Accumulator;

/// Reads a CSV written by [`super::run`].
pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Report(format!("{}: corrupt record: {e}", path.display())))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { columns, rows })
}

/// Numeric when both parse, lexicographic otherwise.
fn cmp_cell(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

fn cmp_keys(a: &[String], b: &[String]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cmp_cell(x, y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn col(t: &Table, name: &str) -> Result<usize> {
    t.column(name)
        .ok_or_else(|| Error::Report(format!("results lack the `{name}` column")))
}

fn short(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(x) if cell.contains('e') => format!("{x:.6}"),
        _ => cell.to_string(),
    }
}

/// Groups `value` by `keys`, keeping only rows at the largest `k` if present.
fn grouped(t: &Table, keys: &[&str], value: &str, out: &mut dyn Write) -> Result<()> {
    let key_idx = keys.iter().map(|k| col(t, k)).collect::<Result<Vec<_>>>()?;
    let v = col(t, value)?;
    let k_idx = t.column("k");
    let k_max = k_idx.and_then(|i| t.rows.iter().filter_map(|r| r[i].parse::<u64>().ok()).max());
    let mut groups: BTreeMap<Vec<String>, Accumulator> = BTreeMap::new();
    for r in &t.rows {
        if let (Some(i), Some(m)) = (k_idx, k_max) {
            if r[i].parse::<u64>().ok() != Some(m) {
                continue;
            }
        }
        let x: f64 = r[v]
            .parse()
            .map_err(|_| Error::Report(format!("corrupt `{value}` entry `{}`", r[v])))?;
        if x.is_finite() {
            groups
                .entry(key_idx.iter().map(|&i| r[i].clone()).collect())
                .or_default()
                .push(x);
        }
    }
    let mut keyed: Vec<_> = groups.into_iter().collect();
    keyed.sort_by(|a, b| cmp_keys(&a.0, &b.0));
    let label = match k_max {
        Some(m) => format!("{value}@k={m}"),
        None => value.to_string(),
    };
    writeln!(out, "{}\tn\tmean({label})\tstderr", keys.join("\t"))?;
    for (key, acc) in keyed {
        let e = acc.estimate();
        let cells: Vec<String> = key.iter().map(|c| short(c)).collect();
        writeln!(out, "{}\t{}\t{:.6}\t{:.6}", cells.join("\t"), e.n, e.mean, e.stderr)?;
    }
    Ok(())
}

/// Selected columns, sorted by the leading ones.
fn listing(t: &Table, cols: &[&str], out: &mut dyn Write) -> Result<()> {
    let idx = cols.iter().map(|c| col(t, c)).collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<Vec<String>> = t.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect();
    rows.sort_by(|a, b| cmp_keys(a, b));
    writeln!(out, "{}", cols.join("\t"))?;
    for r in rows {
        writeln!(out, "{}", r.iter().map(|c| short(c)).collect::<Vec<_>>().join("\t"))?;
    }
    Ok(())
}

fn selftest_summary(t: &Table, out: &mut dyn Write) -> Result<()> {
    let (c, e, p) = (col(t, "check")?, col(t, "error")?, col(t, "passed")?);
    let mut groups: BTreeMap<String, (usize, usize, f64)> = BTreeMap::new();
    for r in &t.rows {
        let g = groups.entry(r[c].clone()).or_insert((0, 0, 0.0));
        g.0 += 1;
        g.1 += (r[p] == "true") as usize;
        g.2 = g.2.max(r[e].parse().unwrap_or(f64::NAN));
    }
    writeln!(out, "check\tcases\tpassed\tmax_error")?;
    for (name, (n, ok, err)) in groups {
        writeln!(out, "{name}\t{n}\t{ok}\t{err:.3e}")?;
    }
    Ok(())
}

/// Prints a plain-text summary of the results in `dir`: means and standard
/// errors per `p` and `λ`, sorted ascending.
pub fn emit_report(dir: &Path, out: &mut dyn Write) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Report(format!("{}: {e}", dir.display())))?;
    let mut manifests = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if let Some(stem) = name.strip_suffix(".manifest.json") {
            manifests.push((stem.to_string(), path));
        }
    }
    manifests.sort();
    match manifests.len() {
        0 => return Err(Error::Report(format!("no result manifest in {}", dir.display()))),
        1 => {}
        _ => {
            let kinds: Vec<&str> = manifests.iter().map(|(k, _)| k.as_str()).collect();
            return Err(Error::Report(format!(
                "{} mixes results of several experiments ({}); report one directory per experiment",
                dir.display(),
                kinds.join(", ")
            )));
        }
    }
    let (stem, path) = &manifests[0];
    let text = fs::read_to_string(path)?;
    let manifest: Value =
        serde_json::from_str(&text).map_err(|e| Error::Report(format!("{}: corrupt manifest: {e}", path.display())))?;
    let kind: ExperimentKind = manifest["kind"]
        .as_str()
        .ok_or_else(|| Error::Report(format!("{}: manifest has no kind", path.display())))?
        .parse()?;
    if kind.name() != stem {
        return Err(Error::Report(format!("{}: manifest is for `{kind}`", path.display())));
    }
    let csv = manifest["csv"].as_str().unwrap_or_default();
    let table = read_table(&dir.join(csv))?;
    writeln!(out, "# {kind}: {} records", table.rows.len())?;
    match kind {
        ExperimentKind::Cost => grouped(&table, &["p", "lambda", "x"], "cost", out),
        ExperimentKind::Lyapunov | ExperimentKind::Sweep => grouped(&table, &["p", "lambda", "x"], "cost_per_k", out),
        ExperimentKind::Timeconst => grouped(&table, &["p", "x"], "distance_per_k", out),
        ExperimentKind::Goodbox => grouped(&table, &["p", "lambda", "ell"], "good", out),
        ExperimentKind::Rate => listing(&table, &["p", "x", "lambda", "alpha", "alpha_stderr", "alpha_minus_lambda"], out),
        ExperimentKind::RateSweep => listing(
            &table,
            &["p", "x", "i_hat", "i_hat_stderr", "lambda_minus", "lambda_plus", "domain_boundary"],
            out,
        ),
        ExperimentKind::Selftest => selftest_summary(&table, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, kind: &str, csv: &str) {
        fs::write(dir.join(format!("{kind}.csv")), csv).unwrap();
        fs::write(
            dir.join(format!("{kind}.manifest.json")),
            format!("{{\"kind\": \"{kind}\", \"csv\": \"{kind}.csv\"}}"),
        )
        .unwrap();
    }

    fn report(dir: &Path) -> Result<String> {
        let mut buf = Vec::new();
        emit_report(dir, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn empty_results_give_header_only() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "sweep", "seed,p,q,lambda,x,k,cost,cost_per_k,trunc_bound,iters\n");
        let s = report(d.path()).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.lines().nth(1).unwrap().starts_with("p\tlambda\tx"));
    }

    #[test]
    fn sweep_rows_sorted_by_p() {
        let d = tempfile::tempdir().unwrap();
        let mut csv = String::from("seed,p,q,lambda,x,k,cost,cost_per_k,trunc_bound,iters\n");
        for (p, c) in [("7.8e-1", 2.0), ("6.2e-1", 3.0), ("7.0e-1", 2.5)] {
            for k in [1, 2] {
                csv.push_str(&format!("1,{p},0.6,1,\"(1,0)\",{k},{c},{},0,3\n", c / k as f64));
            }
        }
        write(d.path(), "sweep", &csv);
        let s = report(d.path()).unwrap();
        let ps: Vec<&str> = s.lines().skip(2).map(|l| l.split('\t').next().unwrap()).collect();
        assert_eq!(ps, ["0.620000", "0.700000", "0.780000"]);
        assert!(s.contains("cost_per_k@k=2"));
    }

    #[test]
    fn mixed_directory_refused() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "sweep", "seed,p\n");
        write(d.path(), "cost", "seed,p\n");
        let e = report(d.path()).unwrap_err();
        assert!(e.to_string().contains("mixes results"), "{e}");
    }

    #[test]
    fn missing_and_corrupt_results() {
        let d = tempfile::tempdir().unwrap();
        assert!(report(d.path()).is_err());
        fs::write(d.path().join("cost.manifest.json"), "{not json").unwrap();
        assert!(report(d.path()).unwrap_err().to_string().contains("corrupt"));
        write(d.path(), "cost", "seed,p,q,lambda,x,cost\n1,0.8,0.8,1,\"(1,0)\",abc\n");
        assert!(report(d.path()).is_err());
    }
}
