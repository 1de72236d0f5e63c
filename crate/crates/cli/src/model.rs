use std::path::{Path, PathBuf};

use chembridge::bridge::{load_checkpoint, save_checkpoint, train};
use chembridge::eval::{
    bootstrap_ci, evaluate_both, export_simmatrix, similarity_matrix, Direction, EvalOptions,
    Metric,
};
use chembridge::text_embed::{load_embeddings, EmbeddingMatrix};
use chembridge::{BridgeParams32, Dataset, Error, Matrix32, Result, TrainConfig};
use rayon::prelude::*;

use crate::args::{AblateArgs, DataArgs, EvalArgs, Partition, Toggle, TrainArgs};
use crate::files::{read_split, write_cmc};
use crate::manifest::Run;
use crate::stages::{hash_records, load_prepared};

/// Dataset with molecule vectors and the split, aligned by record.
struct Prepared {
    dataset: Dataset,
    mol: Matrix32,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Prepared {
    fn load(args: &DataArgs) -> Result<Self> {
        let dataset = load_prepared(&args.data)?;
        let mol = load_embeddings(&args.mol, &dataset)?.values;
        let (train, test) = read_split(&args.split, dataset.len())?;
        Ok(Self {
            dataset,
            mol,
            train,
            test,
        })
    }

    fn targets(&self, idx: &[usize]) -> Vec<String> {
        idx.iter()
            .map(|&i| self.dataset.records[i].target_id.clone())
            .collect()
    }

    fn row_ids(&self, idx: &[usize]) -> Vec<String> {
        idx.iter()
            .map(|&i| self.dataset.records[i].row_id())
            .collect()
    }

    fn fit(
        &self,
        text: &EmbeddingMatrix,
        cfg: &TrainConfig,
    ) -> Result<(BridgeParams32, chembridge::TrainHistory)> {
        train(
            &self.mol.select_rows(&self.train),
            &text.values.select_rows(&self.train),
            &self.targets(&self.train),
            cfg,
        )
    }

    fn similarity(
        &self,
        params: &BridgeParams32,
        text: &EmbeddingMatrix,
        idx: &[usize],
    ) -> Result<Matrix32> {
        if params.mol_input_dim() != self.mol.cols() || params.text_input_dim() != text.dim() {
            return Err(Error::Shape(format!(
                "checkpoint expects {}-d molecules and {}-d text, inputs are {}-d and {}-d",
                params.mol_input_dim(),
                params.text_input_dim(),
                self.mol.cols(),
                text.dim()
            )));
        }
        let bt = params.embed_text(&text.values.select_rows(idx))?;
        let bm = params.embed_mol(&self.mol.select_rows(idx))?;
        similarity_matrix(&bt, &bm)
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.with_file_name(name)
}

pub fn train_cmd(args: &TrainArgs, threads: usize) -> Result<()> {
    let i = &args.inputs;
    let run = Run::start(
        "train",
        args,
        Some(args.train.seed),
        threads,
        &[&i.data, &i.mol, &i.split, &args.text],
    )?;
    let data = Prepared::load(i)?;
    let text = load_embeddings(&args.text, &data.dataset)?;
    let cfg = args.train.config();
    let (params, history) = data.fit(&text, &cfg)?;
    save_checkpoint(&args.out, &params, &cfg)?;
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| sibling(&args.out, "history.csv"));
    history.write_csv(&history_path)?;
    if let (Some(first), Some(last)) = (history.loss.first(), history.loss.last()) {
        eprintln!(
            "train: {} pairs, loss {first:.4} -> {last:.4}",
            data.train.len()
        );
        if !history.improved() {
            eprintln!("warning: final loss is above the first epoch's");
        }
    }
    run.finish(&[&args.out, &history_path])
}

pub fn eval_cmd(args: &EvalArgs, threads: usize) -> Result<()> {
    let i = &args.inputs;
    let run = Run::start(
        "eval",
        args,
        Some(args.seed),
        threads,
        &[&args.checkpoint, &i.data, &i.mol, &i.split, &args.text],
    )?;
    let data = Prepared::load(i)?;
    let text = load_embeddings(&args.text, &data.dataset)?;
    let (params, _) = load_checkpoint(&args.checkpoint)?;
    let idx = match args.partition {
        Partition::Test => &data.test,
        Partition::Train => &data.train,
    };
    let s = data.similarity(&params, &text, idx)?;
    let opts = EvalOptions {
        k_max: args.k_max,
        bootstrap: args.bootstrap,
        seed: args.seed,
        ..EvalOptions::default()
    };
    let report = evaluate_both(&s, &data.targets(idx), &opts)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&args.out, json).map_err(|e| Error::io(&args.out, e))?;

    let cmc = sibling(&args.out, "cmc.csv");
    write_cmc(&cmc, &report)?;
    let mut outputs = vec![args.out.as_path(), cmc.as_path()];
    let sim = sibling(&args.out, "sim.csv");
    if args.export_sim > 0 {
        let k = args.export_sim.min(idx.len());
        if k < args.export_sim {
            eprintln!("eval: only {k} pairs, exporting a {k}x{k} block");
        }
        let ids = data.row_ids(idx);
        export_simmatrix(&s, &ids, &ids, k, &sim)?;
        outputs.push(sim.as_path());
    }
    let p = report.primary();
    eprintln!(
        "eval: {} queries, R@1 {:.3}, MRR {:.3}, grouped R@1 {}",
        p.n_queries,
        p.recall_at[&1],
        p.mrr,
        p.grouped_recall1
            .map_or("n/a".into(), |g| format!("{g:.3}"))
    );
    run.finish(&outputs)
}

struct AblationRow {
    temperature: f64,
    margin: f64,
    drug_name: Toggle,
    recall1: f64,
    mrr: f64,
    grouped: Option<(f64, f64, f64)>,
}

pub fn ablate_cmd(args: &AblateArgs, threads: usize) -> Result<()> {
    let i = &args.inputs;
    let mut inputs: Vec<&Path> = vec![&i.data, &i.mol, &i.split];
    inputs.extend(args.text_with_name.as_deref());
    inputs.extend(args.text_without_name.as_deref());
    let run = Run::start("ablate", args, Some(args.train.seed), threads, &inputs)?;
    if args.temps.is_empty() || args.margins.is_empty() || args.drugname.is_empty() {
        return Err(Error::InvalidArgument(
            "every grid axis needs at least one value".into(),
        ));
    }
    let data = Prepared::load(i)?;
    let text_for = |t: Toggle| -> Result<EmbeddingMatrix> {
        let given = match t {
            Toggle::On => &args.text_with_name,
            Toggle::Off => &args.text_without_name,
        };
        match given {
            Some(p) => load_embeddings(p, &data.dataset),
            None => hash_records(&data.dataset, t == Toggle::On, args.text_dim),
        }
    };
    let mut texts = Vec::new();
    for &t in &args.drugname {
        texts.push((t, text_for(t)?));
    }

    let mut grid = Vec::new();
    for (t, text) in &texts {
        for &temp in &args.temps {
            for &m in &args.margins {
                grid.push((*t, text, temp, m));
            }
        }
    }
    let targets = data.targets(&data.test);
    let rows = grid
        .par_iter()
        .map(|&(toggle, text, temperature, margin)| {
            let cfg = TrainConfig {
                temperature,
                margin,
                margin_weight: if margin > 0.0 {
                    args.train.margin_weight
                } else {
                    0.0
                },
                ..args.train.config()
            };
            let (params, _) = data.fit(text, &cfg)?;
            let s = data.similarity(&params, text, &data.test)?;
            let opts = EvalOptions {
                bootstrap: 0,
                seed: args.train.seed,
                ..EvalOptions::default()
            };
            let r = chembridge::eval::evaluate(&s, &targets, Direction::TextToMol, &opts)?;
            let grouped = match r.grouped_recall1 {
                Some(g) if args.bootstrap > 0 => {
                    let ci = bootstrap_ci(
                        Metric::GroupedRecall1,
                        &s,
                        &targets,
                        opts.min_group,
                        Direction::TextToMol,
                        args.bootstrap,
                        opts.level,
                        args.train.seed,
                    )?;
                    Some((g, ci.lo, ci.hi))
                }
                Some(g) => Some((g, f64::NAN, f64::NAN)),
                None => None,
            };
            Ok(AblationRow {
                temperature,
                margin,
                drug_name: toggle,
                recall1: r.recall_at[&1],
                mrr: r.mrr,
                grouped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_ablation(&args.out, &rows)?;
    run.finish(&[&args.out])
}

/// The best row has the highest grouped R@1, falling back to R@1 when no
/// row has grouped queries; the first row wins ties.
fn best_row(rows: &[AblationRow]) -> usize {
    let score = |r: &AblationRow| match rows.iter().any(|r| r.grouped.is_some()) {
        true => r.grouped.map_or(f64::NEG_INFINITY, |g| g.0),
        false => r.recall1,
    };
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if score(r) > score(&rows[best]) {
            best = i;
        }
    }
    best
}

fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let best = best_row(rows);
    let fmt = |v: f64| {
        if v.is_nan() {
            String::new()
        } else {
            format!("{v:.6}")
        }
    };
    let mut out = String::from("temperature,margin,drug_name,grouped_recall1,grouped_ci_lo,grouped_ci_hi,recall1,mrr,best\n");
    for (i, r) in rows.iter().enumerate() {
        let (g, lo, hi) = r.grouped.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{:.6},{}\n",
            r.temperature,
            r.margin,
            match r.drug_name {
                Toggle::On => "on",
                Toggle::Off => "off",
            },
            fmt(g),
            fmt(lo),
            fmt(hi),
            r.recall1,
            r.mrr,
            u8::from(i == best)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
