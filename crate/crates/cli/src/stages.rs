use chembridge::data_ingest::{build_text_rich, load_dataset, load_text_rich, write_dataset};
use chembridge::fingerprint::ecfp;
use chembridge::scaffold::{molecule_scaffold_key, random_split, scaffold_split};
use chembridge::smiles::{parse_smiles, parse_smiles_with, ParseOptions};
use chembridge::text_embed::{hash_embed, write_emb1, EmbeddingMatrix};
use chembridge::{Dataset, Error, Matrix, MoleculeGraph, Result, ScaffoldKey};
use rayon::prelude::*;

use crate::args::{EmbedTextArgs, FingerprintArgs, PrepareArgs, SplitArgs, SplitMode, TextField};
use crate::files::write_split;
use crate::manifest::Run;

/// Downstream stages read the prepared file without a second length filter.
pub fn load_prepared(path: &std::path::Path) -> Result<Dataset> {
    load_dataset(path, 0)
}

pub fn prepare(args: &PrepareArgs, threads: usize) -> Result<()> {
    let run = Run::start("prepare", args, None, threads, &[&args.input])?;
    let ds = load_dataset(&args.input, args.min_text_len)?;
    write_dataset(&ds, &args.out, args.with_drug_name)?;
    eprintln!("prepare: kept {} records", ds.len());
    run.finish(&[&args.out])
}

fn parse_all(ds: &Dataset, opts: ParseOptions) -> Result<Vec<MoleculeGraph>> {
    ds.records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let g = parse_smiles_with(&r.canonical_smiles, opts).map_err(|e| {
                Error::Data(format!(
                    "record {i} ({}): invalid SMILES `{}`: {e}",
                    r.row_id(),
                    r.canonical_smiles
                ))
            })?;
            if g.is_empty() {
                return Err(Error::Data(format!(
                    "record {i} ({}): no heavy atoms",
                    r.row_id()
                )));
            }
            Ok(g)
        })
        .collect()
}

pub fn fingerprint(args: &FingerprintArgs, threads: usize) -> Result<()> {
    let run = Run::start("fingerprint", args, None, threads, &[&args.input])?;
    let ds = load_prepared(&args.input)?;
    let opts = ParseOptions {
        keep_largest_component: !args.keep_all_components,
    };
    let graphs = parse_all(&ds, opts)?;
    let fps = graphs
        .par_iter()
        .map(|g| ecfp(g, args.radius, args.nbits))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Matrix::zeros(fps.len(), args.nbits);
    for (i, fp) in fps.iter().enumerate() {
        for b in fp.ones() {
            values[(i, b)] = 1.0f32;
        }
    }
    write_emb1(&args.out, &EmbeddingMatrix::new(ds.row_ids(), values)?)?;
    eprintln!("fingerprint: {} x {} bits", fps.len(), args.nbits);
    run.finish(&[&args.out])
}

pub fn embed_text(args: &EmbedTextArgs, threads: usize) -> Result<()> {
    let run = Run::start("embed-text", args, None, threads, &[&args.input])?;
    let ds = load_prepared(&args.input)?;
    let texts: Vec<String> = match args.field {
        TextField::Mechanism => ds.records.iter().map(|r| r.mechanism.clone()).collect(),
        TextField::TextRich => load_text_rich(&args.input)?
            .ok_or_else(|| {
                Error::Schema(format!(
                    "{} has no text_rich column; run prepare first",
                    args.input.display()
                ))
            })?
            .into_iter()
            .map(|(_, t)| t)
            .collect(),
    };
    let m = hash_texts(&ds.row_ids(), &texts, args.dim)?;
    write_emb1(&args.out, &m)?;
    eprintln!("embed-text: {} x {}", m.rows(), m.dim());
    run.finish(&[&args.out])
}

pub fn hash_texts(ids: &[String], texts: &[String], dim: usize) -> Result<EmbeddingMatrix> {
    let rows = texts
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            hash_embed::<f32>(t, dim)
                .map_err(|e| Error::Data(format!("record {i} ({}): {e}", ids[i])))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = Matrix::from_vec(rows.len(), dim, rows.concat())?;
    EmbeddingMatrix::new(ids.to_vec(), values)
}

/// Hashed text vectors built from the record fields, with or without the
/// drug name.
pub fn hash_records(ds: &Dataset, include_drug_name: bool, dim: usize) -> Result<EmbeddingMatrix> {
    let texts: Vec<String> = ds
        .records
        .iter()
        .map(|r| build_text_rich(r, include_drug_name))
        .collect();
    hash_texts(&ds.row_ids(), &texts, dim)
}

pub fn split(args: &SplitArgs, threads: usize) -> Result<()> {
    let run = Run::start("split", args, Some(args.seed), threads, &[&args.input])?;
    let ds = load_prepared(&args.input)?;
    let keys: Vec<ScaffoldKey> = ds
        .records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            parse_smiles(&r.canonical_smiles)
                .map(|g| molecule_scaffold_key(&g))
                .map_err(|e| {
                    Error::Data(format!("record {i} ({}): invalid SMILES: {e}", r.row_id()))
                })
        })
        .collect::<Result<_>>()?;
    let assignment = match args.mode {
        SplitMode::Scaffold => scaffold_split(&keys, args.test_frac, args.seed)?,
        SplitMode::Random => random_split(keys.len(), args.test_frac, args.seed)?,
    };
    write_split(&args.out, &keys, &assignment)?;
    eprintln!(
        "split: {} train, {} test",
        assignment.train_indices.len(),
        assignment.test_indices.len()
    );
    run.finish(&[&args.out])
}
