//! Loading and cleaning of drug-mechanism tables.
//!
//! The input is an RFC-4180 CSV with a header row. Column order is free and
//! extra columns are ignored, but every [`DrugRecord`] field must be present
//! as a column. `action_type` and `drug_name` may be empty.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MIN_TEXT_LEN: usize = 20;
pub const TEXT_SEPARATOR: &str = " | ";

/// Header names, in the order the writer emits them.
pub const COLUMNS: [&str; 8] = [
    "molecule_id",
    "canonical_smiles",
    "mechanism",
    "target_id",
    "target_name",
    "action_type",
    "drug_name",
    "max_phase",
];

pub const TEXT_RICH_COLUMN: &str = "text_rich";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrugRecord {
    pub molecule_id: String,
    pub canonical_smiles: String,
    pub mechanism: String,
    pub target_id: String,
    pub target_name: String,
    pub action_type: String,
    pub drug_name: String,
    pub max_phase: i32,
}

impl DrugRecord {
    /// Identifier joining this record to embedding rows: `molecule_id:target_id`.
    pub fn row_id(&self) -> String {
        format!("{}:{}", self.molecule_id, self.target_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: PathBuf,
    pub min_text_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<DrugRecord>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn row_ids(&self) -> Vec<String> {
        self.records.iter().map(DrugRecord::row_id).collect()
    }

    pub fn target_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.target_id.clone()).collect()
    }
}

/// Collapse runs of whitespace into single spaces and trim.
pub fn normalize_space(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn column_positions(headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))
        })
        .collect()
}

fn parse_phase(raw: &str, line: u64) -> Result<i32> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i32>() {
        return Ok(v);
    }
    // ChEMBL exports phases as "4.0"
    match raw.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 1e6 => Ok(v as i32),
        _ => Err(Error::Data(format!(
            "line {line}: max_phase `{raw}` is not an integer"
        ))),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::Utf8 { pos, err } => Error::Data(format!(
            "{}: invalid UTF-8 at line {}: {err}",
            path.display(),
            pos.map_or(0, |p| p.line())
        )),
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => Error::Schema(format!(
            "{}: line {} has {len} fields, header has {expected_len}",
            path.display(),
            pos.map_or(0, |p| p.line())
        )),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Read, clean and deduplicate a drug-mechanism CSV.
///
/// Rows with an empty SMILES or a mechanism shorter than `min_text_len`
/// characters are dropped, then repeated `(molecule_id, target_id)` pairs
/// keep their first occurrence. Text fields are whitespace-normalized.
pub fn load_dataset(path: impl AsRef<Path>, min_text_len: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let pos = column_positions(&headers, &COLUMNS)?;

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| normalize_space(row.get(pos[k]).unwrap_or(""));

        let canonical_smiles = row.get(pos[1]).unwrap_or("").trim().to_string();
        let mechanism = field(2);
        if canonical_smiles.is_empty() || mechanism.chars().count() < min_text_len {
            continue;
        }
        let record = DrugRecord {
            molecule_id: field(0),
            canonical_smiles,
            mechanism,
            target_id: field(3),
            target_name: field(4),
            action_type: field(5),
            drug_name: field(6),
            max_phase: parse_phase(row.get(pos[7]).unwrap_or(""), line)?,
        };
        if seen.insert((record.molecule_id.clone(), record.target_id.clone())) {
            records.push(record);
        }
    }

    if records.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    Ok(Dataset {
        records,
        provenance: Provenance {
            source: path.to_path_buf(),
            min_text_len,
        },
    })
}

/// Enriched text: `mechanism | target_name | action_type [| drug_name]`.
///
/// Empty components are skipped so no separator dangles.
pub fn build_text_rich(record: &DrugRecord, include_drug_name: bool) -> String {
    let mut parts = vec![
        normalize_space(&record.mechanism),
        normalize_space(&record.target_name),
        normalize_space(&record.action_type),
    ];
    if include_drug_name {
        parts.push(normalize_space(&record.drug_name));
    }
    parts.retain(|p| !p.is_empty());
    parts.join(TEXT_SEPARATOR)
}

/// Write the cleaned dataset with an appended `text_rich` column.
pub fn write_dataset(
    dataset: &Dataset,
    out: impl AsRef<Path>,
    include_drug_name: bool,
) -> Result<()> {
    let out = out.as_ref();
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    header.push(TEXT_RICH_COLUMN);
    w.write_record(&header).map_err(|e| csv_error(out, e))?;
    for r in &dataset.records {
        let phase = r.max_phase.to_string();
        let text = build_text_rich(r, include_drug_name);
        w.write_record([
            r.molecule_id.as_str(),
            &r.canonical_smiles,
            &r.mechanism,
            &r.target_id,
            &r.target_name,
            &r.action_type,
            &r.drug_name,
            &phase,
            &text,
        ])
        .map_err(|e| csv_error(out, e))?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(out, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(out, e))
}

/// `(row_id, text_rich)` pairs from a prepared CSV, or `None` when the file
/// has no `text_rich` column.
pub fn load_text_rich(path: impl AsRef<Path>) -> Result<Option<Vec<(String, String)>>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let Ok(pos) = column_positions(&headers, &["molecule_id", "target_id", TEXT_RICH_COLUMN])
    else {
        return Ok(None);
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let get = |k: usize| normalize_space(row.get(pos[k]).unwrap_or(""));
        out.push((format!("{}:{}", get(0), get(1)), get(2)));
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "molecule_id,canonical_smiles,mechanism,target_id,target_name,action_type,drug_name,max_phase";

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn record(drug: &str) -> DrugRecord {
        DrugRecord {
            molecule_id: "M1".into(),
            canonical_smiles: "CCO".into(),
            mechanism: "Inhibitor of X".into(),
            target_id: "T1".into(),
            target_name: "X kinase".into(),
            action_type: "INHIBITOR".into(),
            drug_name: drug.into(),
            max_phase: 4,
        }
    }

    #[test]
    fn drops_row_without_smiles() {
        let f = write_csv(&format!(
            "{HEADER}\n\
             M1,CCO,Cyclooxygenase inhibitor here,T1,PTGS1,INHIBITOR,a,4\n\
             M2,,Cyclooxygenase inhibitor here,T1,PTGS1,INHIBITOR,b,4\n\
             M3,CCN,Cyclooxygenase inhibitor here,T1,PTGS1,INHIBITOR,c,4\n"
        ));
        let ds = load_dataset(f.path(), DEFAULT_MIN_TEXT_LEN).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records[1].molecule_id, "M3");
    }

    #[test]
    fn keeps_first_duplicate_pair() {
        let f = write_csv(&format!(
            "{HEADER}\n\
             M1,CCO,Cyclooxygenase inhibitor first,T1,PTGS1,INHIBITOR,a,4\n\
             M1,CCO,Cyclooxygenase inhibitor second,T1,PTGS1,INHIBITOR,a,4\n"
        ));
        let ds = load_dataset(f.path(), DEFAULT_MIN_TEXT_LEN).unwrap();
        assert_eq!(ds.len(), 1);
        assert!(ds.records[0].mechanism.ends_with("first"));
    }

    #[test]
    fn short_mechanism_dropped_and_columns_reordered() {
        let f = write_csv(
            "max_phase,extra,drug_name,action_type,target_name,target_id,mechanism,canonical_smiles,molecule_id\n\
             4.0,x,a,INHIBITOR,PTGS1,T1,Short,CCO,M1\n\
             4.0,x,b,INHIBITOR,PTGS1,T1,Long enough mechanism text,CCN,M2\n",
        );
        let ds = load_dataset(f.path(), DEFAULT_MIN_TEXT_LEN).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records[0].molecule_id, "M2");
        assert_eq!(ds.records[0].max_phase, 4);
    }

    #[test]
    fn missing_column_names_it() {
        let f = write_csv("molecule_id,canonical_smiles,mechanism\nM1,CCO,abc\n");
        match load_dataset(f.path(), 0) {
            Err(Error::Schema(msg)) => assert!(msg.contains("target_id"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_after_cleaning_and_missing_file() {
        let f = write_csv(&format!("{HEADER}\nM1,,x,T1,a,b,c,4\n"));
        assert!(matches!(
            load_dataset(f.path(), 0),
            Err(Error::EmptyDataset(_))
        ));
        assert!(matches!(
            load_dataset("/nonexistent/file.csv", 0),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn text_rich_examples() {
        assert_eq!(
            build_text_rich(&record("drugA"), true),
            "Inhibitor of X | X kinase | INHIBITOR | drugA"
        );
        assert_eq!(
            build_text_rich(&record("drugA"), false),
            "Inhibitor of X | X kinase | INHIBITOR"
        );
        assert_eq!(
            build_text_rich(&record(""), true),
            "Inhibitor of X | X kinase | INHIBITOR"
        );
        let mut r = record("d");
        r.action_type.clear();
        r.mechanism = "  Inhibitor   of\tX ".into();
        assert_eq!(build_text_rich(&r, true), "Inhibitor of X | X kinase | d");
    }

    #[test]
    fn reload_of_written_output_is_identical() {
        let f = write_csv(&format!(
            "{HEADER}\n\
             M1,CCO,\"Inhibitor, with comma, of X\",T1,\"X \"\"kinase\"\"\",INHIBITOR,a,4\n\
             M2,c1ccccc1,Agonist of the Y receptor,T2,Y receptor,,,3\n"
        ));
        let ds = load_dataset(f.path(), DEFAULT_MIN_TEXT_LEN).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_dataset(&ds, out.path(), true).unwrap();
        let again = load_dataset(out.path(), DEFAULT_MIN_TEXT_LEN).unwrap();
        assert_eq!(again.records, ds.records);

        let texts = load_text_rich(out.path()).unwrap().unwrap();
        assert_eq!(texts[0].0, "M1:T1");
        assert_eq!(texts[1].1, "Agonist of the Y receptor | Y receptor");
        assert!(load_text_rich(f.path()).unwrap().is_none());
    }

    #[test]
    fn bad_phase_is_data_error() {
        let f = write_csv(&format!(
            "{HEADER}\nM1,CCO,Long enough mechanism text,T1,a,b,c,four\n"
        ));
        assert!(matches!(load_dataset(f.path(), 0), Err(Error::Data(_))));
    }

    proptest::proptest! {
        #[test]
        fn without_drug_name_is_prefix(
            mech in "[a-zA-Z ]{1,30}",
            target in "[a-zA-Z ]{0,10}",
            action in "[A-Z]{0,8}",
            drug in "[a-z]{1,8}",
        ) {
            let r = DrugRecord {
                molecule_id: "M".into(),
                canonical_smiles: "C".into(),
                mechanism: mech,
                target_id: "T".into(),
                target_name: target,
                action_type: action,
                drug_name: drug,
                max_phase: 4,
            };
            let short = build_text_rich(&r, false);
            let long = build_text_rich(&r, true);
            proptest::prop_assert!(long.starts_with(&short));
            proptest::prop_assert!(!long.ends_with(TEXT_SEPARATOR));
        }
    }
}
