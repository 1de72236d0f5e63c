//! Retrieval metrics over a similarity matrix whose diagonal holds the true
//! pairs.
//!
//! Ranks are 1-based. A candidate outranks the true match when it scores
//! higher, or scores equal and has a lower column index.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Xoshiro256StarStar;
use crate::scalar::Scalar;

pub const DEFAULT_MIN_GROUP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Queries are text rows, candidates molecule columns.
    TextToMol,
    MolToText,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::TextToMol, Direction::MolToText];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::TextToMol => "text_to_mol",
            Direction::MolToText => "mol_to_text",
        }
    }

    #[inline]
    fn score<S: Scalar>(self, s: &Matrix<S>, query: usize, candidate: usize) -> S {
        match self {
            Direction::TextToMol => s[(query, candidate)],
            Direction::MolToText => s[(candidate, query)],
        }
    }
}

/// `S_ij = B_T[i] · B_M[j]`.
pub fn similarity_matrix<S: Scalar>(b_text: &Matrix<S>, b_mol: &Matrix<S>) -> Result<Matrix<S>> {
    if b_text.rows() != b_mol.rows() {
        return Err(Error::Shape(format!(
            "{} text rows vs {} molecule rows",
            b_text.rows(),
            b_mol.rows()
        )));
    }
    b_text.matmul_t(b_mol)
}

fn check_square<S: Scalar>(s: &Matrix<S>) -> Result<usize> {
    if s.rows() != s.cols() {
        return Err(Error::Shape(format!(
            "similarity matrix is {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    if s.rows() == 0 {
        return Err(Error::Shape("empty similarity matrix".into()));
    }
    Ok(s.rows())
}

fn rank_among<S: Scalar>(
    s: &Matrix<S>,
    dir: Direction,
    q: usize,
    candidates: impl Iterator<Item = usize>,
) -> usize {
    let truth = dir.score(s, q, q);
    1 + candidates
        .filter(|&j| {
            let v = dir.score(s, q, j);
            v > truth || (v == truth && j < q)
        })
        .count()
}

/// Rank of the true match for every query against all candidates.
pub fn ranks<S: Scalar>(s: &Matrix<S>, dir: Direction) -> Result<Vec<usize>> {
    let n = check_square(s)?;
    Ok((0..n).map(|q| rank_among(s, dir, q, 0..n)).collect())
}

/// Member lists of the target groups with at least `min_group` members, and
/// for each query the index of its group in that list.
fn qualifying_groups(
    target_ids: &[String],
    min_group: usize,
) -> (Vec<Vec<usize>>, Vec<Option<usize>>) {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, t) in target_ids.iter().enumerate() {
        let g = *slot.entry(t.as_str()).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[g].push(i);
    }
    let keep: Vec<bool> = members.iter().map(|m| m.len() >= min_group).collect();
    let of_query = target_ids
        .iter()
        .map(|t| Some(slot[t.as_str()]).filter(|&g| keep[g]))
        .collect();
    (members, of_query)
}

fn largest_group(target_ids: &[String], min_group: usize) -> usize {
    let (members, of_query) = qualifying_groups(target_ids, min_group);
    of_query
        .iter()
        .flatten()
        .map(|&g| members[g].len())
        .max()
        .unwrap_or(0)
}

/// Within-target rank of each query; `None` for queries whose group is too
/// small to count.
pub fn grouped_ranks<S: Scalar>(
    s: &Matrix<S>,
    target_ids: &[String],
    min_group: usize,
    dir: Direction,
) -> Result<Vec<Option<usize>>> {
    let n = check_square(s)?;
    if target_ids.len() != n {
        return Err(Error::Shape(format!(
            "{} target ids for {n} queries",
            target_ids.len()
        )));
    }
    let (members, of_query) = qualifying_groups(target_ids, min_group);
    Ok((0..n)
        .map(|q| of_query[q].map(|g| rank_among(s, dir, q, members[g].iter().copied())))
        .collect())
}

pub fn recall_at_k<S: Scalar>(s: &Matrix<S>, k: usize, dir: Direction) -> Result<f64> {
    let r = ranks(s, dir)?;
    if k == 0 || k > r.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            r.len()
        )));
    }
    Ok(r.iter().filter(|&&x| x <= k).count() as f64 / r.len() as f64)
}

pub fn mrr<S: Scalar>(s: &Matrix<S>, dir: Direction) -> Result<f64> {
    let r = ranks(s, dir)?;
    Ok(r.iter().map(|&x| 1.0 / x as f64).sum::<f64>() / r.len() as f64)
}

/// Top-1 accuracy with candidates limited to the query's own target.
pub fn grouped_recall_at_1<S: Scalar>(
    s: &Matrix<S>,
    target_ids: &[String],
    min_group: usize,
    dir: Direction,
) -> Result<f64> {
    let r = grouped_ranks(s, target_ids, min_group, dir)?;
    let counted: Vec<usize> = r.into_iter().flatten().collect();
    if counted.is_empty() {
        return Err(Error::NoGroupedQueries { min_group });
    }
    Ok(counted.iter().filter(|&&x| x == 1).count() as f64 / counted.len() as f64)
}

fn cmc_from_ranks(ranks: &[usize], k_max: usize) -> Vec<f64> {
    let mut hist = vec![0usize; k_max + 1];
    for &r in ranks {
        if r <= k_max {
            hist[r] += 1;
        }
    }
    let n = ranks.len() as f64;
    let mut acc = 0usize;
    hist[1..]
        .iter()
        .map(|&h| {
            acc += h;
            acc as f64 / n
        })
        .collect()
}

/// `[recall@1, ..., recall@k_max]`, optionally within target groups of at
/// least `min_group` members.
pub fn cmc_curve<S: Scalar>(
    s: &Matrix<S>,
    k_max: usize,
    grouping: Option<(&[String], usize)>,
    dir: Direction,
) -> Result<Vec<f64>> {
    let n = check_square(s)?;
    let (ranks, limit) = match grouping {
        None => (ranks(s, dir)?, n),
        Some((targets, min_group)) => {
            let r: Vec<usize> = grouped_ranks(s, targets, min_group, dir)?
                .into_iter()
                .flatten()
                .collect();
            if r.is_empty() {
                return Err(Error::NoGroupedQueries { min_group });
            }
            (r, largest_group(targets, min_group))
        }
    };
    if k_max == 0 || k_max > limit {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} outside 1..={limit}"
        )));
    }
    Ok(cmc_from_ranks(&ranks, k_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    RecallAt(usize),
    Mrr,
    GroupedRecall1,
}

impl Metric {
    pub fn name(self) -> String {
        match self {
            Metric::RecallAt(k) => format!("recall@{k}"),
            Metric::Mrr => "mrr".into(),
            Metric::GroupedRecall1 => "grouped_recall@1".into(),
        }
    }

    /// Per-query contribution; `None` means the query does not count.
    fn per_query<S: Scalar>(
        self,
        s: &Matrix<S>,
        target_ids: &[String],
        min_group: usize,
        dir: Direction,
    ) -> Result<Vec<Option<f64>>> {
        Ok(match self {
            Metric::RecallAt(k) => {
                let r = ranks(s, dir)?;
                if k == 0 || k > r.len() {
                    return Err(Error::InvalidArgument(format!(
                        "k = {k} outside 1..={}",
                        r.len()
                    )));
                }
                r.into_iter()
                    .map(|x| Some(f64::from(u8::from(x <= k))))
                    .collect()
            }
            Metric::Mrr => ranks(s, dir)?
                .into_iter()
                .map(|x| Some(1.0 / x as f64))
                .collect(),
            Metric::GroupedRecall1 => grouped_ranks(s, target_ids, min_group, dir)?
                .into_iter()
                .map(|r| r.map(|x| f64::from(u8::from(x == 1))))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lo: f64,
    pub hi: f64,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over resampled queries; candidates stay fixed.
///
/// Attempt `a` draws its resample from a generator seeded with `seed + a`.
/// Replicates where the metric is undefined are redrawn, up to `10·B`
/// attempts in total.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_ci<S: Scalar>(
    metric: Metric,
    s: &Matrix<S>,
    target_ids: &[String],
    min_group: usize,
    dir: Direction,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapCi> {
    if replicates < 100 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs B >= 100, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    let scores = metric.per_query(s, target_ids, min_group, dir)?;
    let n = scores.len();
    let mut values = Vec::with_capacity(replicates);
    let max_attempts = 10 * replicates as u64;
    let mut attempt = 0u64;
    while values.len() < replicates {
        if attempt == max_attempts {
            return Err(Error::Data(format!(
                "{} undefined on too many bootstrap replicates ({max_attempts} attempts)",
                metric.name()
            )));
        }
        let mut rng = Xoshiro256StarStar::from_seed_u64(seed.wrapping_add(attempt));
        attempt += 1;
        let (mut sum, mut count) = (0.0, 0usize);
        for _ in 0..n {
            let q = (rng.next_f64() * n as f64) as usize;
            if let Some(v) = scores[q.min(n - 1)] {
                sum += v;
                count += 1;
            }
        }
        if count > 0 {
            values.push(sum / count as f64);
        }
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        lo: quantile(&values, tail),
        hi: quantile(&values, 1.0 - tail),
        replicates,
        seed,
        level,
    })
}

/// Top-left `k × k` block as CSV, six decimals, ids as headers.
pub fn export_simmatrix<S: Scalar>(
    s: &Matrix<S>,
    row_ids: &[String],
    col_ids: &[String],
    k: usize,
    path: &Path,
) -> Result<()> {
    if k == 0 || k > s.rows() || k > s.cols() || k > row_ids.len() || k > col_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot export a {k}x{k} block of a {}x{} matrix",
            s.rows(),
            s.cols()
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec![String::new()];
    header.extend(col_ids[..k].iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..k {
        let mut rec = vec![row_ids[i].clone()];
        rec.extend((0..k).map(|j| format!("{:.6}", s[(i, j)].as_f64())));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub k_max: usize,
    pub bootstrap: usize,
    pub level: f64,
    pub seed: u64,
    pub min_group: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            k_max: 10,
            bootstrap: 1000,
            level: 0.95,
            seed: 0,
            min_group: DEFAULT_MIN_GROUP,
        }
    }
}

/// Metrics for one retrieval direction. Grouped fields are absent when no
/// target group is large enough.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub direction: Direction,
    pub recall_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub grouped_recall1: Option<f64>,
    pub n_queries: usize,
    pub n_grouped_queries: usize,
    pub bootstrap: BTreeMap<String, BootstrapCi>,
    pub cmc_global: Vec<f64>,
    pub cmc_grouped: Vec<f64>,
}

/// Both directions; text→molecule is the headline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub primary: Direction,
    pub text_to_mol: EvalReport,
    pub mol_to_text: EvalReport,
}

impl RetrievalReport {
    pub fn primary(&self) -> &EvalReport {
        match self.primary {
            Direction::TextToMol => &self.text_to_mol,
            Direction::MolToText => &self.mol_to_text,
        }
    }
}

/// Full metric suite for one direction. Bootstrap is skipped when
/// `opts.bootstrap` is 0.
pub fn evaluate<S: Scalar>(
    s: &Matrix<S>,
    target_ids: &[String],
    dir: Direction,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let n = check_square(s)?;
    let r = ranks(s, dir)?;
    let k_max = opts.k_max.clamp(1, n);
    let cmc_global = cmc_from_ranks(&r, k_max);
    let mut recall_at = BTreeMap::new();
    for k in [1, 5, 10, k_max] {
        if k <= k_max {
            recall_at.insert(k, cmc_global[k - 1]);
        }
    }
    let mrr = r.iter().map(|&x| 1.0 / x as f64).sum::<f64>() / n as f64;

    let grouped: Vec<usize> = grouped_ranks(s, target_ids, opts.min_group, dir)?
        .into_iter()
        .flatten()
        .collect();
    let (grouped_recall1, cmc_grouped) = if grouped.is_empty() {
        (None, Vec::new())
    } else {
        let largest = largest_group(target_ids, opts.min_group);
        let curve = cmc_from_ranks(&grouped, opts.k_max.clamp(1, largest));
        (Some(curve[0]), curve)
    };

    let mut bootstrap = BTreeMap::new();
    if opts.bootstrap > 0 {
        let mut metrics = vec![Metric::RecallAt(1), Metric::Mrr];
        if grouped_recall1.is_some() {
            metrics.push(Metric::GroupedRecall1);
        }
        for m in metrics {
            let ci = bootstrap_ci(
                m,
                s,
                target_ids,
                opts.min_group,
                dir,
                opts.bootstrap,
                opts.level,
                opts.seed,
            )?;
            bootstrap.insert(m.name(), ci);
        }
    }
    Ok(EvalReport {
        direction: dir,
        recall_at,
        mrr,
        grouped_recall1,
        n_queries: n,
        n_grouped_queries: grouped.len(),
        bootstrap,
        cmc_global,
        cmc_grouped,
    })
}

pub fn evaluate_both<S: Scalar>(
    s: &Matrix<S>,
    target_ids: &[String],
    opts: &EvalOptions,
) -> Result<RetrievalReport> {
    Ok(RetrievalReport {
        primary: Direction::TextToMol,
        text_to_mol: evaluate(s, target_ids, Direction::TextToMol, opts)?,
        mol_to_text: evaluate(s, target_ids, Direction::MolToText, opts)?,
    })
}
