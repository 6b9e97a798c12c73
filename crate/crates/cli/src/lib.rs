// SPDX-License-Identifier: MIT OR Apache-2.0

//! Subcommands of the `gig` binary.
//!
//! A run is described by a JSON [`RunConfig`]; command-line flags override
//! the file. Every output is a pure function of the config, so two runs with
//! the same config write byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gig_core::experiment::{auc_per_seed, default_noise_grid, purity_sweep, summarize_residuals};
use gig_core::metrics::{default_k_grid, mean_and_stderr};
use gig_core::path::AttributionCsv;
use gig_core::{ExperimentConfig, GigError, MethodConfig, MlpModel, PreparedCell};
use serde::{Deserialize, Serialize};

pub mod svg;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments.
    Usage(String),
    Runtime(GigError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<GigError> for CliError {
    fn from(e: GigError) -> Self {
        match e {
            GigError::Argument(m) => Self::Usage(m),
            other => Self::Runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Runtime(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub methods: Vec<MethodConfig>,
    /// Noise level for `train`, `attribute` and `axioms`.
    pub noise: f64,
    /// Seed for `train`, `attribute` and `axioms`.
    pub seed: u64,
    pub noise_grid: Vec<f64>,
    /// Seeds of the benchmark sweep.
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Model file for `attribute` and `axioms`; defaults to `<out>/model.json`.
    pub model: Option<PathBuf>,
    pub figures: bool,
    /// Noise level whose cells feed the heatmaps and mask curves.
    pub figure_noise: f64,
    pub mask_k_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            methods: ["ig", "input_x_gradient", "gradient_shap", "occlusion", "enhanced_ig", "random", "geodesic_knn"]
                .iter()
                .map(|t| MethodConfig::from_tag(t).expect("known tag"))
                .collect(),
            noise: 0.15,
            seed: 0,
            noise_grid: default_noise_grid(),
            seeds: (0..5).collect(),
            out: PathBuf::from("out"),
            model: None,
            figures: true,
            figure_noise: 0.15,
            mask_k_grid: default_k_grid(),
        }
    }
}

/// Flag values that override the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Comma-separated method tags.
    pub methods: Option<String>,
    pub noise: Option<f64>,
    pub model: Option<PathBuf>,
    pub points: Option<usize>,
}

impl RunConfig {
    pub fn load(overrides: &Overrides) -> CliResult<Self> {
        let mut config = match &overrides.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
            }
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            config.seed = seed;
            config.seeds = vec![seed];
        }
        if let Some(out) = &overrides.out {
            config.out = out.clone();
        }
        if let Some(noise) = overrides.noise {
            config.noise = noise;
        }
        if let Some(model) = &overrides.model {
            config.model = Some(model.clone());
        }
        if let Some(points) = overrides.points {
            config.experiment.max_test_points = Some(points);
        }
        if let Some(list) = &overrides.methods {
            config.methods = list
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|tag| match config.methods.iter().find(|m| m.tag() == tag) {
                    Some(m) => Ok(m.clone()),
                    None => MethodConfig::from_tag(tag),
                })
                .collect::<Result<_, _>>()?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.experiment.validate()?;
        if self.methods.is_empty() {
            return Err(CliError::Usage("no methods selected".into()));
        }
        for m in &self.methods {
            m.validate()?;
        }
        if self.noise_grid.len() < 2 || self.noise_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage("noise grid needs at least two increasing values".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Usage("no seeds".into()));
        }
        Ok(())
    }

    fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out.join("model.json"))
    }

    fn out_dir(&self) -> CliResult<&Path> {
        if self.out.is_dir() {
            Ok(&self.out)
        } else {
            Err(CliError::Usage(format!("output directory {} does not exist", self.out.display())))
        }
    }

    fn load_cell(&self) -> CliResult<PreparedCell> {
        let path = self.model_path();
        let model = MlpModel::load(&path)
            .map_err(|e| CliError::Usage(format!("cannot load model {}: {e}", path.display())))?;
        Ok(self.experiment.prepare_with_model(self.noise, self.seed, model)?)
    }
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Trains the model for `(noise, seed)`; writes `model.json` and `train_report.csv`.
pub fn cmd_train(config: &RunConfig) -> CliResult<String> {
    let out = config.out_dir()?;
    let cell = config.experiment.prepare(config.noise, config.seed)?;
    let report = cell.report.as_ref().expect("trained cell has a report");
    cell.model.save(out.join("model.json"))?;
    write_rows(
        &out.join("train_report.csv"),
        &["seed", "noise", "epochs", "final_loss", "train_accuracy", "test_accuracy"],
        [vec![
            config.seed.to_string(),
            config.noise.to_string(),
            report.epochs.to_string(),
            report.final_loss.to_string(),
            report.train_accuracy.to_string(),
            cell.test_accuracy.to_string(),
        ]],
    )?;
    Ok(format!(
        "seed {} noise {} loss {:.4} train_acc {:.4} test_acc {:.4}",
        config.seed, config.noise, report.final_loss, report.train_accuracy, cell.test_accuracy
    ))
}

/// Writes `attributions_<method>.csv` for every configured method.
pub fn cmd_attribute(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let out = config.out_dir()?;
    let cell = config.load_cell()?;
    let mut written = Vec::new();
    for method in &config.methods {
        let attributions = cell.attribute(method)?;
        let path = out.join(format!("attributions_{}.csv", method.tag()));
        let mut csv = AttributionCsv::new(fs::File::create(&path)?)?;
        for (i, a) in attributions.iter().enumerate() {
            csv.write(i, a, method.tag())?;
        }
        csv.finish()?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `axioms.csv` (residual summary per method) and `output_change.csv`.
pub fn cmd_axioms(config: &RunConfig) -> CliResult<Vec<(String, gig_core::experiment::ResidualSummary)>> {
    let out = config.out_dir()?;
    let cell = config.load_cell()?;
    let mut summaries = Vec::new();
    for method in &config.methods {
        summaries.push((method.tag().to_string(), summarize_residuals(&cell.attribute(method)?)));
    }
    write_rows(
        &out.join("axioms.csv"),
        &[
            "method",
            "completeness_median",
            "completeness_p95",
            "strong_median",
            "strong_p95",
            "output_change_median",
        ],
        summaries.iter().map(|(m, s)| {
            vec![
                m.clone(),
                s.completeness_median.to_string(),
                s.completeness_p95.to_string(),
                s.strong_median.to_string(),
                s.strong_p95.to_string(),
                s.output_change_median.to_string(),
            ]
        }),
    )?;
    let mut rows = Vec::with_capacity(cell.test.len());
    for (i, (x, t)) in cell.test.points.iter().zip(&cell.targets).enumerate() {
        let fx = cell.model.scalar_output(x, t)?;
        let fb = cell.model.scalar_output(&cell.baseline, t)?;
        rows.push(vec![i.to_string(), fx.to_string(), fb.to_string(), (fx - fb).abs().to_string()]);
    }
    write_rows(&out.join("output_change.csv"), &["input_id", "f_input", "f_baseline", "abs_change"], rows)?;
    Ok(summaries)
}

/// Summary row of one method: mean AUC-purity over seeds and its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub auc_purity: f64,
    pub stderr: f64,
    /// Per-seed AUC-purity in seed order.
    pub per_seed: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct BenchmarkOutput {
    pub purity: Vec<gig_core::PurityRow>,
    pub summary: Vec<SummaryRow>,
}

/// Full noise × seed × method sweep.
pub fn cmd_benchmark(config: &RunConfig, mut log: impl Write) -> CliResult<BenchmarkOutput> {
    let out = config.out_dir()?.to_path_buf();
    let grid = &config.noise_grid;
    let figure_noise = grid
        .iter()
        .copied()
        .min_by(|a, b| (a - config.figure_noise).abs().total_cmp(&(b - config.figure_noise).abs()))
        .expect("validated grid");
    let tags: Vec<String> = config.methods.iter().map(|m| m.tag().to_string()).collect();
    let mut curves: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 0.0); config.mask_k_grid.len()]; tags.len()];
    let mut curve_cells = 0usize;
    let mut failure: Option<CliError> = None;
    let purity = purity_sweep(&config.experiment, grid, &config.seeds, &config.methods, |cell, results| {
        let _ = writeln!(log, "noise {} seed {} test_acc {:.4}", cell.noise, cell.seed, cell.test_accuracy);
        if cell.noise != figure_noise || failure.is_some() {
            return;
        }
        let mut step = || -> CliResult<()> {
            for (i, (tag, attributions)) in results.iter().enumerate() {
                for (acc, (_, comp, lo)) in curves[i].iter_mut().zip(cell.mask_curves(attributions, &config.mask_k_grid)?) {
                    acc.0 += comp;
                    acc.1 += lo;
                }
                if config.figures && cell.seed == config.seeds[0] {
                    let scores: Vec<f64> = attributions.iter().map(|a| a.abs_sum()).collect();
                    let title = format!("{tag}: sum |A| (noise {}, seed {})", cell.noise, cell.seed);
                    fs::write(
                        out.join(format!("heatmap_{tag}.svg")),
                        svg::heatmap(&title, &cell.test.points, &scores, &cell.baseline),
                    )?;
                }
            }
            Ok(())
        };
        match step() {
            Ok(()) => curve_cells += 1,
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let aucs = auc_per_seed(&purity, grid)?;
    let summary: Vec<SummaryRow> = tags
        .iter()
        .map(|tag| {
            let per_seed: Vec<(u64, f64)> = aucs.iter().filter(|(m, _, _)| m == tag).map(|(_, s, a)| (*s, *a)).collect();
            let values: Vec<f64> = per_seed.iter().map(|p| p.1).collect();
            let (auc_purity, stderr) = mean_and_stderr(&values);
            SummaryRow { method: tag.clone(), auc_purity, stderr, per_seed }
        })
        .collect();

    write_rows(
        &out.join("purity.csv"),
        &["method", "noise", "seed", "purity"],
        purity
            .iter()
            .map(|r| vec![r.method.clone(), r.noise.to_string(), r.seed.to_string(), r.purity.to_string()]),
    )?;
    write_rows(
        &out.join("summary.csv"),
        &["method", "auc_purity", "stderr"],
        summary
            .iter()
            .map(|s| vec![s.method.clone(), s.auc_purity.to_string(), s.stderr.to_string()]),
    )?;
    let n = curve_cells.max(1) as f64;
    write_rows(
        &out.join("mask_curves.csv"),
        &["method", "k_percent", "comprehensiveness", "log_odds"],
        tags.iter().zip(&curves).flat_map(|(tag, c)| {
            config
                .mask_k_grid
                .iter()
                .zip(c)
                .map(move |(k, (comp, lo))| vec![tag.clone(), k.to_string(), (comp / n).to_string(), (lo / n).to_string()])
        }),
    )?;
    if config.figures {
        let series: Vec<(String, Vec<(f64, f64, f64)>)> = tags
            .iter()
            .map(|tag| {
                let points = grid
                    .iter()
                    .map(|&noise| {
                        let v: Vec<f64> = purity
                            .iter()
                            .filter(|r| &r.method == tag && r.noise == noise)
                            .map(|r| r.purity)
                            .collect();
                        let (m, se) = mean_and_stderr(&v);
                        (noise, m, se)
                    })
                    .collect();
                (tag.clone(), points)
            })
            .collect();
        fs::write(out.join("purity_vs_noise.svg"), svg::curves("purity vs noise", &series))?;
    }
    Ok(BenchmarkOutput { purity, summary })
}
