//! `resources`: closed-form ancilla, depth and parameter counts.

use qcnn::ansatz::AnsatzSet;
use qcnn::architect::{estimate_resources, num_layers, parity, ArchitectureConfig, PaddingMethod};
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One `(K, method, ansatz)` row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResourceRow {
    pub k: usize,
    pub method: String,
    pub ansatz: u8,
    pub reps: String,
    pub ancillas: usize,
    pub depth: usize,
    pub params_shared: usize,
    pub params_unshared: usize,
    /// Count for the requested sharing mode.
    pub params: usize,
}

/// One row of the `--range` sweep: depth and unshared-parameter curves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RangeRow {
    pub k: usize,
    pub m: usize,
    pub sum_parity: usize,
    pub depth_skip: usize,
    pub depth_qubit_padding: usize,
    pub depth_difference: usize,
    pub unshared_classical: usize,
    pub unshared_skip: usize,
    pub unshared_qubit_padding: usize,
}

pub fn parse_reps(s: &str) -> CliResult<Vec<usize>> {
    let reps = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().ok().filter(|&l| l > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::config(format!("--reps expects positive integers like 1 or 1,2,1, got '{s}'")))?;
    Ok(reps)
}

pub fn parse_range(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::config(format!("--range expects A..B with 2 <= A <= B, got '{s}'"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a < 2 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn reps_for(reps: &[usize], k: usize) -> CliResult<Vec<usize>> {
    match reps {
        [l] => Ok(vec![*l; num_layers(k)]),
        v if v.len() == num_layers(k) => Ok(v.to_vec()),
        v => Err(CliError::config(format!(
            "K={k} has {} layers but --reps lists {}",
            num_layers(k),
            v.len()
        ))),
    }
}

fn join(reps: &[usize]) -> String {
    reps.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn resource_rows(
    k: usize,
    methods: &[PaddingMethod],
    ansatz: &[AnsatzSet],
    reps: &[usize],
    sharing: bool,
) -> CliResult<Vec<ResourceRow>> {
    if k < 2 {
        return Err(CliError::config(format!("--qubits must be at least 2, got {k}")));
    }
    let reps = reps_for(reps, k)?;
    let mut rows = Vec::new();
    for &method in methods {
        for &set in ansatz {
            let r = estimate_resources(&ArchitectureConfig::new(k, method, reps.clone(), set, sharing))?;
            rows.push(ResourceRow {
                k,
                method: method.name().to_string(),
                ansatz: set.into(),
                reps: join(&reps),
                ancillas: r.ancilla_qubits,
                depth: r.depth,
                params_shared: r.params_shared,
                params_unshared: r.params_unshared,
                params: r.params(sharing),
            });
        }
    }
    Ok(rows)
}

pub fn range_rows(from: usize, to: usize, ansatz: AnsatzSet, reps: usize) -> CliResult<Vec<RangeRow>> {
    (from..=to)
        .map(|k| {
            let est = |method| estimate_resources(&ArchitectureConfig::uniform(k, method, reps, ansatz, false)?);
            let skip = est(PaddingMethod::SkipPooling)?;
            let qubit = est(PaddingMethod::SingleAncilla)?;
            let classical = est(PaddingMethod::ZeroData)?;
            let m = num_layers(k);
            Ok(RangeRow {
                k,
                m,
                sum_parity: (1..=m).map(|i| parity(k, i)).sum(),
                depth_skip: skip.depth,
                depth_qubit_padding: qubit.depth,
                depth_difference: skip.depth - qubit.depth,
                unshared_classical: classical.params_unshared,
                unshared_skip: skip.params_unshared,
                unshared_qubit_padding: qubit.params_unshared,
            })
        })
        .collect()
}

pub fn render<T: Serialize>(rows: &[T], format: OutputFormat) -> CliResult<String> {
    match format {
        OutputFormat::Json => serde_json::to_string_pretty(rows)
            .map(|s| s + "\n")
            .map_err(|e| CliError::config(e.to_string())),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| CliError::config(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::config(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}
