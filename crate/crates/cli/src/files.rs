use std::path::Path;

use chembridge::eval::RetrievalReport;
use chembridge::{Error, Result, ScaffoldKey, SplitAssignment};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

/// `record_index,scaffold_key,partition`, one row per record in order.
pub fn write_split(path: &Path, keys: &[ScaffoldKey], split: &SplitAssignment) -> Result<()> {
    let mut side = vec![""; keys.len()];
    for &i in &split.train_indices {
        side[i] = "train";
    }
    for &i in &split.test_indices {
        side[i] = "test";
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["record_index", "scaffold_key", "partition"])
        .map_err(|e| csv_err(path, e))?;
    for (i, key) in keys.iter().enumerate() {
        w.write_record([i.to_string(), key.to_string(), side[i].to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Train and test indices from a split file covering exactly `n` records.
pub fn read_split(path: &Path, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column `{name}`", path.display())))
    };
    let (ci, cp) = (col("record_index")?, col("partition")?);
    let mut seen = vec![false; n];
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for row in r.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let raw = row.get(ci).unwrap_or("");
        let i: usize = raw
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad record index `{raw}`", path.display())))?;
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Data(format!(
                "{}: record index {i} is out of range or repeated ({n} records)",
                path.display()
            )));
        }
        match row.get(cp).unwrap_or("") {
            "train" => train.push(i),
            "test" => test.push(i),
            other => {
                return Err(Error::Data(format!(
                    "{}: unknown partition `{other}`",
                    path.display()
                )))
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Data(format!(
            "{}: record {missing} has no partition; the split was made for another dataset",
            path.display()
        )));
    }
    Ok((train, test))
}

/// One row per k; grouped columns are blank past the largest group.
pub fn write_cmc(path: &Path, report: &RetrievalReport) -> Result<()> {
    let cols = [
        &report.text_to_mol.cmc_global,
        &report.mol_to_text.cmc_global,
        &report.text_to_mol.cmc_grouped,
        &report.mol_to_text.cmc_grouped,
    ];
    let rows = cols.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "k",
        "text_to_mol",
        "mol_to_text",
        "text_to_mol_grouped",
        "mol_to_text_grouped",
    ])
    .map_err(|e| csv_err(path, e))?;
    for k in 0..rows {
        let mut rec = vec![(k + 1).to_string()];
        rec.extend(
            cols.iter()
                .map(|c| c.get(k).map_or(String::new(), |v| format!("{v:.6}"))),
        );
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
