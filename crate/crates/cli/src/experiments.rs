// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! One function per experiment. Each writes its files into the output
//! directory and returns the summary it wrote as JSON.

use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use qerc_core::dataset::EncodedData;
use qerc_core::linalg::HermitianMatrix;
use qerc_core::netweights::{
    decompose, decompose_unitary, histogram_distance, summarize_component, tail_metrics, Component,
    ComponentSummary, TailMetrics, WeightHistogram, WeightSet,
};
use qerc_core::pipeline::{
    accuracy_report, run_with_unitary, summarize_ensemble, AccuracyReport, EnsembleReport,
    FeatureOptions, ModelRun, Realization, TrainConfig,
};
use qerc_core::reservoir::{tailed_haar_unitary, FeatureMapSpec, ModelKind};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{csv_table, ManifestExtra, OutputDir, SeedRecord};

/// Shared state for a run: progress reporting and an optional preloaded dataset.
pub struct Runner<'a> {
    pub verbose: bool,
    data: Option<&'a EncodedData>,
    owned: Option<EncodedData>,
}

impl<'a> Runner<'a> {
    pub fn new(verbose: bool) -> Self {
        Self {
            verbose,
            data: None,
            owned: None,
        }
    }

    /// Reuses `data` instead of loading MNIST.
    pub fn with_data(verbose: bool, data: &'a EncodedData) -> Self {
        Self {
            verbose,
            data: Some(data),
            owned: None,
        }
    }

    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[qerc] {}", msg.as_ref());
        }
    }

    fn data(&mut self, cfg: &ExperimentConfig) -> Result<&EncodedData> {
        if let Some(d) = self.data {
            return Ok(d);
        }
        if self.owned.is_none() {
            let dir = cfg
                .resolved_data_dir()
                .ok_or_else(|| anyhow!("no MNIST directory configured"))?;
            let t = Instant::now();
            let d = EncodedData::prepare_cached(&dir, cfg.model.qubits, &cfg.cache_dir())
                .with_context(|| format!("preparing MNIST from {}", dir.display()))?;
            self.note(format!(
                "encoded {} train / {} test samples in {:.1?}",
                d.train.len(),
                d.test.len(),
                t.elapsed()
            ));
            self.owned = Some(d);
        }
        Ok(self.owned.as_ref().expect("just loaded"))
    }

    /// Runs the configured experiment.
    pub fn run(&mut self, cfg: &ExperimentConfig) -> Result<RunOutcome> {
        cfg.validate()?;
        match cfg.experiment {
            Experiment::Weights => self.weights(cfg).map(RunOutcome::Weights),
            Experiment::HaarCompare | Experiment::CauchyCompare => {
                self.compare(cfg).map(RunOutcome::Compare)
            }
            Experiment::AccuracyVsPeriod => self.sweep(cfg).map(RunOutcome::Sweep),
            Experiment::ModelTable => self.table(cfg).map(RunOutcome::Table),
            Experiment::Ensemble => self.ensemble(cfg).map(RunOutcome::Ensemble),
            Experiment::Train => self.train(cfg).map(RunOutcome::Train),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum RunOutcome {
    Weights(WeightsSummary),
    Compare(CompareSummary),
    Sweep(SweepSummary),
    Table(TableSummary),
    Ensemble(EnsembleSummary),
    Train(TrainSummary),
}

/// Statistics of one weight component.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    #[serde(flatten)]
    pub summary: ComponentSummary,
    pub sample_std: f64,
    /// Tail metrics against the configured common width.
    pub tail_at_sigma_ref: TailMetrics,
    /// Distance to the same component at the reference period, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_to_reference: Option<f64>,
}

impl ComponentReport {
    pub fn component(&self) -> Component {
        self.summary.component
    }

    pub fn fitted_sigma(&self) -> Option<f64> {
        self.summary.fit.map(|f| f.sigma)
    }
}

fn sample_std(v: &[f64]) -> f64 {
    qerc_core::pipeline::mean_std(v).1
}

/// Histograms and reports for all three components of `w`.
fn analyze(
    cfg: &ExperimentConfig,
    w: &WeightSet,
) -> Result<Vec<(WeightHistogram, ComponentReport)>> {
    Component::ALL
        .iter()
        .map(|&c| {
            let (h, summary) =
                summarize_component(w, c, cfg.weights.include_identity, cfg.weights.bins, None)?;
            let values = w.component(c, cfg.weights.include_identity);
            let report = ComponentReport {
                summary,
                sample_std: sample_std(values),
                tail_at_sigma_ref: tail_metrics(values, cfg.weights.sigma_ref)?,
                distance_to_reference: None,
            };
            Ok((h, report))
        })
        .collect()
}

fn write_histogram(out: &mut OutputDir, name: &str, h: &WeightHistogram) -> Result<()> {
    out.write_with(name, |buf| h.write_csv(buf))?;
    Ok(())
}

fn model_seed_record(
    label: String,
    spec: &FeatureMapSpec,
    train: Option<&TrainConfig>,
) -> SeedRecord {
    SeedRecord {
        label,
        model_seed: spec.seed().map(|s| s.0),
        train_seed: train.map(|t| t.seed.0),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightsPeriod {
    pub n_periods: u64,
    pub components: Vec<ComponentReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightsSummary {
    pub model: FeatureMapSpec,
    pub reference_period: u64,
    pub periods: Vec<WeightsPeriod>,
}

impl WeightsSummary {
    pub fn period(&self, n: u64) -> Option<&WeightsPeriod> {
        self.periods.iter().find(|p| p.n_periods == n)
    }
}

impl<'a> Runner<'a> {
    /// Weight distributions of the DTC at several periods.
    pub fn weights(&mut self, cfg: &ExperimentConfig) -> Result<WeightsSummary> {
        let mut out = OutputDir::create(&cfg.output_dir)?;
        let base = cfg.model.spec();
        let periods = cfg.periods();
        let reference = *periods.iter().max().expect("validated nonempty");
        let mut hists = Vec::new();
        let mut reports = Vec::new();
        for &n in &periods {
            let t = Instant::now();
            let spec = base.with_periods(n);
            let w = decompose_unitary(&spec.build()?)
                .with_context(|| format!("decomposing n = {n}"))?;
            let analyzed = analyze(cfg, &w)?;
            for (h, r) in &analyzed {
                write_histogram(&mut out, &format!("weights_n{n}_{}.csv", r.component()), h)?;
            }
            self.note(format!("n = {n}: weights analyzed in {:.1?}", t.elapsed()));
            let (h, r): (Vec<_>, Vec<_>) = analyzed.into_iter().unzip();
            hists.push(h);
            reports.push(r);
        }
        let ref_idx = periods
            .iter()
            .position(|&n| n == reference)
            .expect("reference is in the list");
        for (i, comps) in reports.iter_mut().enumerate() {
            for (c, r) in comps.iter_mut().enumerate() {
                r.distance_to_reference =
                    Some(histogram_distance(&hists[i][c], &hists[ref_idx][c])?);
            }
        }
        let summary = WeightsSummary {
            model: base.clone(),
            reference_period: reference,
            periods: periods
                .iter()
                .zip(reports)
                .map(|(&n, components)| WeightsPeriod {
                    n_periods: n,
                    components,
                })
                .collect(),
        };
        out.write_json("weights_summary.json", &summary)?;
        let seeds = vec![model_seed_record(base.kind().to_string(), &base, None)];
        out.finish(
            cfg,
            ManifestExtra {
                pca_sha256: None,
                seeds,
            },
        )?;
        Ok(summary)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelWeights {
    pub model: FeatureMapSpec,
    pub components: Vec<ComponentReport>,
    /// Injected generator entries, for the tailed-Haar model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injected_pairs: Option<Vec<(usize, usize)>>,
}

impl ModelWeights {
    pub fn component(&self, c: Component) -> &ComponentReport {
        self.components
            .iter()
            .find(|r| r.component() == c)
            .expect("all components present")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareSummary {
    pub sigma_ref: f64,
    pub models: Vec<ModelWeights>,
}

impl CompareSummary {
    pub fn model(&self, kind: ModelKind) -> Option<&ModelWeights> {
        self.models.iter().find(|m| m.model.kind() == kind)
    }
}

impl<'a> Runner<'a> {
    /// Weight distributions of several models side by side.
    pub fn compare(&mut self, cfg: &ExperimentConfig) -> Result<CompareSummary> {
        let mut out = OutputDir::create(&cfg.output_dir)?;
        let mut models = Vec::new();
        let mut seeds = Vec::new();
        for kind in cfg.models() {
            let t = Instant::now();
            let spec = cfg.model.spec_for(kind);
            let (g, injected) = generator_with_pairs(&spec)?;
            let w = decompose(&g);
            let analyzed = analyze(cfg, &w)?;
            for (h, r) in &analyzed {
                write_histogram(
                    &mut out,
                    &format!("compare_{kind}_{}.csv", r.component()),
                    h,
                )?;
            }
            self.note(format!("{kind}: weights analyzed in {:.1?}", t.elapsed()));
            seeds.push(model_seed_record(kind.to_string(), &spec, None));
            models.push(ModelWeights {
                model: spec,
                components: analyzed.into_iter().map(|(_, r)| r).collect(),
                injected_pairs: injected,
            });
        }
        let summary = CompareSummary {
            sigma_ref: cfg.weights.sigma_ref,
            models,
        };
        out.write_json("compare_summary.json", &summary)?;
        out.finish(
            cfg,
            ManifestExtra {
                pca_sha256: None,
                seeds,
            },
        )?;
        Ok(summary)
    }
}

fn generator_with_pairs(
    spec: &FeatureMapSpec,
) -> Result<(HermitianMatrix, Option<Vec<(usize, usize)>>)> {
    if let FeatureMapSpec::TailedHaar { dim, seed } = spec {
        let t = tailed_haar_unitary(*dim, *seed)?;
        Ok((t.generator, Some(t.pairs)))
    } else {
        Ok((spec.build_with_generator()?.1, None))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub n_periods: u64,
    #[serde(flatten)]
    pub report: AccuracyReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub model: FeatureMapSpec,
    pub train: TrainConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn row(&self, n: u64) -> Option<&AccuracyReport> {
        self.rows
            .iter()
            .find(|r| r.n_periods == n)
            .map(|r| &r.report)
    }
}

fn options(cfg: &ExperimentConfig) -> FeatureOptions {
    FeatureOptions { shots: cfg.shots }
}

fn report_cells(r: &AccuracyReport) -> Vec<String> {
    [
        r.train_mean,
        r.train_std,
        r.test_mean,
        r.test_std,
        r.delta_acc,
    ]
    .iter()
    .map(|v| format!("{v:.6}"))
    .collect()
}

const REPORT_HEADER: [&str; 5] = [
    "train_mean",
    "train_std",
    "test_mean",
    "test_std",
    "delta_acc",
];

impl<'a> Runner<'a> {
    fn train_one(
        &mut self,
        cfg: &ExperimentConfig,
        spec: &FeatureMapSpec,
        train: &TrainConfig,
    ) -> Result<ModelRun> {
        let t = Instant::now();
        let u = spec.build()?;
        let opts = options(cfg);
        let data = self.data(cfg)?;
        let run = run_with_unitary(&u, spec, data, train, opts)?;
        self.note(format!(
            "{} {}: test {:.4} train {:.4} gap {:.4} ({:.1?})",
            spec.kind(),
            spec.n_periods()
                .map(|n| format!("n={n}"))
                .unwrap_or_default(),
            run.report.test_mean,
            run.report.train_mean,
            run.report.delta_acc,
            t.elapsed()
        ));
        Ok(run)
    }

    fn pca_hash(&mut self, cfg: &ExperimentConfig) -> Result<Option<String>> {
        Ok(Some(self.data(cfg)?.pca.fingerprint()))
    }

    /// Accuracy against the number of periods.
    pub fn sweep(&mut self, cfg: &ExperimentConfig) -> Result<SweepSummary> {
        let mut out = OutputDir::create(&cfg.output_dir)?;
        let base = cfg.model.spec();
        let mut rows = Vec::new();
        for n in cfg.periods() {
            let run = self.train_one(cfg, &base.with_periods(n), &cfg.train)?;
            out.write_with(&format!("history_n{n}.csv"), |b| run.history.write_csv(b))?;
            rows.push(SweepRow {
                n_periods: n,
                report: run.report,
            });
        }
        let mut header = vec!["n"];
        header.extend(REPORT_HEADER);
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                std::iter::once(r.n_periods.to_string())
                    .chain(report_cells(&r.report))
                    .collect()
            })
            .collect();
        out.write_with("accuracy_vs_period.csv", |b| csv_table(b, &header, &cells))?;
        let summary = SweepSummary {
            model: base.clone(),
            train: cfg.train.clone(),
            rows,
        };
        out.write_json("accuracy_vs_period.json", &summary)?;
        let extra = ManifestExtra {
            pca_sha256: self.pca_hash(cfg)?,
            seeds: vec![model_seed_record(
                base.kind().to_string(),
                &base,
                Some(&cfg.train),
            )],
        };
        out.finish(cfg, extra)?;
        Ok(summary)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub model: ModelKind,
    pub spec: FeatureMapSpec,
    #[serde(flatten)]
    pub report: AccuracyReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableSummary {
    pub train: TrainConfig,
    pub rows: Vec<TableRow>,
}

impl TableSummary {
    pub fn row(&self, kind: ModelKind) -> Option<&AccuracyReport> {
        self.rows
            .iter()
            .find(|r| r.model == kind)
            .map(|r| &r.report)
    }
}

impl<'a> Runner<'a> {
    /// One realization of every model.
    pub fn table(&mut self, cfg: &ExperimentConfig) -> Result<TableSummary> {
        let mut out = OutputDir::create(&cfg.output_dir)?;
        let mut rows = Vec::new();
        let mut seeds = Vec::new();
        for kind in cfg.models() {
            let spec = cfg.model.spec_for(kind);
            let run = self.train_one(cfg, &spec, &cfg.train)?;
            out.write_with(&format!("history_{kind}.csv"), |b| run.history.write_csv(b))?;
            seeds.push(model_seed_record(kind.to_string(), &spec, Some(&cfg.train)));
            rows.push(TableRow {
                model: kind,
                spec,
                report: run.report,
            });
        }
        let mut header = vec!["model"];
        header.extend(REPORT_HEADER);
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                std::iter::once(r.model.to_string())
                    .chain(report_cells(&r.report))
                    .collect()
            })
            .collect();
        out.write_with("model_table.csv", |b| csv_table(b, &header, &cells))?;
        let summary = TableSummary {
            train: cfg.train.clone(),
            rows,
        };
        out.write_json("model_table.json", &summary)?;
        let extra = ManifestExtra {
            pca_sha256: self.pca_hash(cfg)?,
            seeds,
        };
        out.finish(cfg, extra)?;
        Ok(summary)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizationWeights {
    pub realization: usize,
    pub model: FeatureMapSpec,
    pub components: Vec<ComponentReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub weights: Vec<RealizationWeights>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<EnsembleReport>,
}

impl<'a> Runner<'a> {
    /// Realizations `k = 1..=R` with model seed `seed + k` and training seed
    /// `train.seed + k`.
    pub fn ensemble(&mut self, cfg: &ExperimentConfig) -> Result<EnsembleSummary> {
        let mut out = OutputDir::create(&cfg.output_dir)?;
        let base = cfg.model.spec();
        let base_seed = base
            .seed()
            .ok_or_else(|| anyhow!("ensemble needs a random model"))?;
        let mut weights = Vec::new();
        let mut realizations = Vec::new();
        let mut seeds = Vec::new();
        for k in 1..=cfg.realizations {
            let t = Instant::now();
            let spec = base.with_seed(base_seed.offset(k as u64));
            let (u, g) = spec
                .build_with_generator()
                .with_context(|| format!("building realization {k}"))?;
            let w = decompose(&g);
            let analyzed = analyze(cfg, &w)?;
            for (h, r) in &analyzed {
                write_histogram(
                    &mut out,
                    &format!("realization_{k}_{}.csv", r.component()),
                    h,
                )?;
            }
            self.note(format!(
                "realization {k}: weights analyzed in {:.1?}",
                t.elapsed()
            ));
            let train = TrainConfig {
                seed: cfg.train.seed.offset(k as u64),
                ..cfg.train.clone()
            };
            if !cfg.weights_only {
                let opts = options(cfg);
                let data = self.data(cfg)?;
                let run = run_with_unitary(&u, &spec, data, &train, opts)?;
                self.note(format!(
                    "realization {k}: test {:.4} train {:.4} gap {:.4}",
                    run.report.test_mean, run.report.train_mean, run.report.delta_acc
                ));
                out.write_with(&format!("history_{k}.csv"), |b| run.history.write_csv(b))?;
                realizations.push(Realization {
                    model_seed: spec.seed().expect("random"),
                    train_seed: train.seed,
                    report: run.report,
                });
            }
            seeds.push(model_seed_record(
                format!("realization {k}"),
                &spec,
                (!cfg.weights_only).then_some(&train),
            ));
            weights.push(RealizationWeights {
                realization: k,
                model: spec,
                components: analyzed.into_iter().map(|(_, r)| r).collect(),
            });
        }
        let accuracy = (!realizations.is_empty()).then(|| summarize_ensemble(realizations));
        if let Some(acc) = &accuracy {
            let mut header = vec!["realization", "model_seed", "train_seed"];
            header.extend(REPORT_HEADER);
            let cells: Vec<Vec<String>> = acc
                .realizations
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    [
                        (i + 1).to_string(),
                        r.model_seed.0.to_string(),
                        r.train_seed.0.to_string(),
                    ]
                    .into_iter()
                    .chain(report_cells(&r.report))
                    .collect()
                })
                .collect();
            out.write_with("ensemble_realizations.csv", |b| {
                csv_table(b, &header, &cells)
            })?;
        }
        let summary = EnsembleSummary { weights, accuracy };
        out.write_json("ensemble.json", &summary)?;
        let pca = if cfg.weights_only {
            None
        } else {
            self.pca_hash(cfg)?
        };
        out.finish(
            cfg,
            ManifestExtra {
                pca_sha256: pca,
                seeds,
            },
        )?;
        Ok(summary)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub model: FeatureMapSpec,
    pub train: TrainConfig,
    pub report: AccuracyReport,
    pub final_train_acc: f64,
    pub final_test_acc: f64,
}

impl<'a> Runner<'a> {
    /// A single model trained once.
    pub fn train(&mut self, cfg: &ExperimentConfig) -> Result<TrainSummary> {
        let mut out = OutputDir::create(&cfg.output_dir)?;
        let spec = cfg.model.spec();
        let run = self.train_one(cfg, &spec, &cfg.train)?;
        out.write_with("history.csv", |b| run.history.write_csv(b))?;
        let report = accuracy_report(&run.history, cfg.train.window)?;
        let summary = TrainSummary {
            model: spec.clone(),
            train: cfg.train.clone(),
            report,
            final_train_acc: *run.history.train_acc.last().expect("epochs > 0"),
            final_test_acc: *run.history.test_acc.last().expect("epochs > 0"),
        };
        out.write_json("report.json", &summary)?;
        let extra = ManifestExtra {
            pca_sha256: self.pca_hash(cfg)?,
            seeds: vec![model_seed_record(
                spec.kind().to_string(),
                &spec,
                Some(&cfg.train),
            )],
        };
        out.finish(cfg, extra)?;
        Ok(summary)
    }
}
