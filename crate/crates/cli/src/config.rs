//! JSON run configuration and flag overriding.
//!
//! The config is a flat document; `methods`, `compressors` and `node_counts`
//! turn one invocation into a sweep over their product. Unknown keys are
//! rejected. Command-line flags override config keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use compgrad::harness::{ExperimentSpec, Overrides, PartitionKind};
use compgrad::{CompressorSpec, Method};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub compressor: Option<String>,
    pub compressors: Option<Vec<String>>,
    pub dataset: Option<PathBuf>,
    pub nodes: Option<usize>,
    pub node_counts: Option<Vec<usize>>,
    pub lambda: Option<f64>,
    pub l1: Option<f64>,
    pub seed: Option<u64>,
    pub max_iters: Option<u64>,
    pub max_bits: Option<f64>,
    pub partition: Option<String>,
    pub diagnostics: Option<bool>,
    pub out: Option<PathBuf>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub natural_omega: Option<f64>,
    pub count_shift_message: Option<bool>,
    pub trace_every: Option<u64>,
    pub multiply_bits_by_nodes: Option<bool>,
}

/// Flag values collected from the command line.
pub struct CliOverrides {
    pub method: Option<String>,
    pub compressor: Option<String>,
    pub dataset: Option<PathBuf>,
    pub nodes: Option<usize>,
    pub lambda: Option<f64>,
    pub l1: Option<f64>,
    pub seed: Option<u64>,
    pub max_iters: Option<u64>,
    pub max_bits: Option<f64>,
    pub partition: Option<String>,
    pub diagnostics: bool,
    pub out: Option<PathBuf>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub natural_omega: Option<f64>,
    pub count_shift_message: Option<bool>,
    pub trace_every: Option<u64>,
    pub multiply_bits_by_nodes: Option<bool>,
}

/// One (method, compressor, node-count) product cell with its output name.
pub struct Cell {
    pub name: String,
    pub spec: ExperimentSpec,
}

impl Cell {
    /// Cells with equal keys share the objective and its reference solve.
    pub fn objective_key(&self) -> (String, usize, u64, u64, PartitionKind, u64) {
        (
            self.spec.dataset.display().to_string(),
            self.spec.nodes,
            self.spec.lambda.to_bits(),
            self.spec.l1.unwrap_or(0.0).to_bits(),
            self.spec.partition,
            self.spec.seed,
        )
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn apply_flags(&mut self, flags: &CliOverrides) {
        if flags.method.is_some() {
            self.method = flags.method.clone();
            self.methods = None;
        }
        if flags.compressor.is_some() {
            self.compressor = flags.compressor.clone();
            self.compressors = None;
        }
        if flags.dataset.is_some() {
            self.dataset = flags.dataset.clone();
        }
        if flags.nodes.is_some() {
            self.nodes = flags.nodes;
            self.node_counts = None;
        }
        if flags.lambda.is_some() {
            self.lambda = flags.lambda;
        }
        if flags.l1.is_some() {
            self.l1 = flags.l1;
        }
        if flags.seed.is_some() {
            self.seed = flags.seed;
        }
        if flags.max_iters.is_some() {
            self.max_iters = flags.max_iters;
        }
        if flags.max_bits.is_some() {
            self.max_bits = flags.max_bits;
        }
        if flags.partition.is_some() {
            self.partition = flags.partition.clone();
        }
        if flags.diagnostics {
            self.diagnostics = Some(true);
        }
        if flags.out.is_some() {
            self.out = flags.out.clone();
        }
        if flags.eta.is_some() {
            self.eta = flags.eta;
        }
        if flags.alpha.is_some() {
            self.alpha = flags.alpha;
        }
        if flags.natural_omega.is_some() {
            self.natural_omega = flags.natural_omega;
        }
        if flags.count_shift_message.is_some() {
            self.count_shift_message = flags.count_shift_message;
        }
        if flags.trace_every.is_some() {
            self.trace_every = flags.trace_every;
        }
        if flags.multiply_bits_by_nodes.is_some() {
            self.multiply_bits_by_nodes = flags.multiply_bits_by_nodes;
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("traces"))
    }

    /// Fills every default in, turning the config into a self-describing
    /// document that replays the same runs when fed back via `--config`.
    pub fn normalized(&self) -> anyhow::Result<RunConfig> {
        let methods = self.list_or_single(&self.methods, &self.method, "method")?;
        let compressors = self.list_or_single(&self.compressors, &self.compressor, "compressor")?;
        let node_counts: Vec<usize> = match (&self.node_counts, self.nodes) {
            (Some(list), _) if !list.is_empty() => list.clone(),
            (Some(_), _) => bail!("node_counts must not be empty"),
            (None, Some(n)) => vec![n],
            (None, None) => vec![20],
        };
        let dataset = self
            .dataset
            .clone()
            .ok_or_else(|| anyhow::anyhow!("missing dataset path"))?;
        let partition = self.partition.clone().unwrap_or_else(|| "shuffled".into());
        let _: PartitionKind = partition.parse().map_err(anyhow::Error::msg)?;
        if self.max_iters.is_none() && self.max_bits.is_none() {
            bail!("set max_iters and/or max_bits");
        }
        Ok(RunConfig {
            method: None,
            methods: Some(methods),
            compressor: None,
            compressors: Some(compressors),
            dataset: Some(dataset),
            nodes: None,
            node_counts: Some(node_counts),
            lambda: Some(self.lambda.unwrap_or(1e-3)),
            l1: self.l1,
            seed: Some(self.seed.unwrap_or(1)),
            max_iters: self.max_iters,
            max_bits: self.max_bits,
            partition: Some(partition),
            diagnostics: Some(self.diagnostics.unwrap_or(false)),
            out: Some(self.out_dir()),
            eta: self.eta,
            alpha: self.alpha,
            natural_omega: self.natural_omega,
            count_shift_message: Some(self.count_shift_message.unwrap_or(true)),
            trace_every: self.trace_every,
            multiply_bits_by_nodes: Some(self.multiply_bits_by_nodes.unwrap_or(false)),
        })
    }

    /// Expands the sweep lists into fully resolved experiment cells.
    pub fn cells(&self) -> anyhow::Result<Vec<Cell>> {
        let full = self.normalized()?;
        let methods: Vec<Method> = full
            .methods
            .as_ref()
            .unwrap()
            .iter()
            .map(|s| s.parse().map_err(anyhow::Error::from))
            .collect::<anyhow::Result<_>>()?;
        let compressors: Vec<CompressorSpec> = full
            .compressors
            .as_ref()
            .unwrap()
            .iter()
            .map(|s| s.parse().map_err(anyhow::Error::from))
            .collect::<anyhow::Result<_>>()?;
        let node_counts = full.node_counts.as_ref().unwrap();
        let dataset = full.dataset.as_ref().unwrap();
        let partition: PartitionKind = full
            .partition
            .as_deref()
            .unwrap()
            .parse()
            .map_err(anyhow::Error::msg)?;

        let multi_nodes = node_counts.len() > 1;
        let mut cells = Vec::new();
        for method in &methods {
            for compressor in &compressors {
                for &nodes in node_counts {
                    let name = if multi_nodes {
                        format!("{method}_{compressor}_n{nodes}")
                    } else {
                        format!("{method}_{compressor}")
                    };
                    cells.push(Cell {
                        name,
                        spec: ExperimentSpec {
                            method: *method,
                            compressor: *compressor,
                            dataset: dataset.clone(),
                            nodes,
                            lambda: full.lambda.unwrap(),
                            l1: full.l1,
                            seed: full.seed.unwrap(),
                            max_iters: full.max_iters,
                            max_bits: full.max_bits,
                            partition,
                            diagnostics: full.diagnostics.unwrap(),
                            overrides: Overrides {
                                eta: full.eta,
                                alpha: full.alpha,
                                natural_omega: full.natural_omega,
                                count_shift_message: full.count_shift_message,
                                trace_every: full.trace_every,
                                multiply_bits_by_nodes: full.multiply_bits_by_nodes,
                            },
                        },
                    });
                }
            }
        }
        Ok(cells)
    }

    fn list_or_single(
        &self,
        list: &Option<Vec<String>>,
        single: &Option<String>,
        what: &str,
    ) -> anyhow::Result<Vec<String>> {
        match (list, single) {
            (Some(l), _) if !l.is_empty() => Ok(l.clone()),
            (Some(_), _) => bail!("{what}s list must not be empty"),
            (None, Some(s)) => Ok(vec![s.clone()]),
            (None, None) => bail!("missing {what}"),
        }
    }
}
