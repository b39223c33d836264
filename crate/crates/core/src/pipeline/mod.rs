//! End-to-end runs: ingest, split, fit, score and export.
//!
//! Nothing computed from test rows feeds any fitted parameter; test rows are
//! only transformed and scored.

pub mod config;
pub mod document;
pub mod ingest;
pub mod model;

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::losses::{select_alpha, LossReport, SplitTag};
use crate::method::Method;

pub use config::{AlphaGrid, KernelChoice, RunConfig};
pub use document::{loss_table, rescore, rescore_deviation, MapDocument, MapMeta, MapPoint};
pub use ingest::{ingest, split, split_indices, DataSet, IngestOptions, InputFiles};
pub use model::{Evaluation, Fitted, PrepareOptions, Prepared};

/// Ingested data with the preprocessing of one split.
#[derive(Debug, Clone)]
pub struct Session {
    pub data: DataSet,
    /// Targets the local model is fitted to: the ingested targets, or
    /// environment shares of structure targets when grouped.
    pub targets: Array2<f64>,
    pub prepared: Prepared,
}

impl Session {
    pub fn open(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let data = ingest::ingest(&config.input)?;
        Self::from_data(config, data)
    }

    pub fn from_data(config: &RunConfig, data: DataSet) -> Result<Self> {
        config.validate()?;
        let opts = PrepareOptions {
            method: config.method,
            kernel: config.kernel_choice(),
            n_latent: config.n_latent,
            lambda: config.lambda,
            m_active: config.m_active,
            fps_start: config.fps_start,
            execution: config.execution,
        };
        let groups = data.group_index()?;
        let (train, test) = split_indices(
            data.n_samples(),
            groups.as_ref().map(|g| &g.0),
            config.split_frac,
            config.seed,
        )?;
        let targets = match &groups {
            Some((g, _)) => model::environment_targets(&opts, data.x.view(), data.y.view(), g, &train)?,
            None => data.y.clone(),
        };
        let prepared = Prepared::new(opts, data.x.view(), targets.view(), train, test)?;
        Ok(Session {
            data,
            targets,
            prepared,
        })
    }

    /// Fits at `alpha` and scores every row.
    pub fn score(&self, alpha: f64) -> Result<(Fitted, Evaluation, Vec<LossReport>)> {
        let fitted = self.prepared.fit(alpha)?;
        let eval = self.prepared.evaluate(&fitted)?;
        let losses = self.prepared.losses(&eval, fitted.alpha(), fitted.n_latent())?;
        Ok((fitted, eval, losses))
    }

    pub fn document(&self, config: &RunConfig, fitted: &Fitted, eval: &Evaluation, losses: Vec<LossReport>) -> Result<MapDocument> {
        let p = &self.prepared;
        let y_hat = p.target_scaler.inverse_transform(eval.y_hat.view())?;
        let points = (0..self.data.n_samples())
            .map(|i| MapPoint {
                t: eval.t.row(i).to_vec(),
                y: self.targets.row(i).to_vec(),
                y_hat: y_hat.row(i).to_vec(),
                split: p.split_tags[i],
                group: self.data.groups.as_ref().map(|g| g[i]),
                proj_residual: eval.proj_residual[i],
            })
            .collect();
        Ok(MapDocument {
            meta: MapMeta {
                method: config.method,
                alpha: fitted.alpha(),
                lambda: config.lambda,
                n_latent: fitted.n_latent(),
                kernel: p.kernel,
                m_active: p.m_active(),
                seed: config.seed,
                split_frac: config.split_frac,
                feature_names: self.data.feature_names.clone(),
                target_names: self.data.target_names.clone(),
                grouped: self.data.groups.is_some(),
                target_scaler: p.target_scaler.clone(),
                losses,
            },
            points,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub document: MapDocument,
    pub losses: Vec<LossReport>,
}

/// Fits one model and scores both splits, without writing anything.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_session(config, &Session::open(config)?)
}

pub fn run_session(config: &RunConfig, session: &Session) -> Result<RunOutput> {
    if config.alpha_grid.is_some() {
        return Err(Error::invalid("an alpha grid needs a sweep, not a single run"));
    }
    let (fitted, eval, losses) = session.score(config.run_alpha())?;
    let document = session.document(config, &fitted, &eval, losses.clone())?;
    Ok(RunOutput { document, losses })
}

pub fn write_run(config: &RunConfig, out: &RunOutput) -> Result<()> {
    out.document.write(&config.map_path())?;
    std::fs::write(config.loss_path(), loss_table(&out.losses, None))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Train and test reports for every α, in grid order.
    pub reports: Vec<LossReport>,
    /// The report at the optimal α on the selection split.
    pub best: LossReport,
    /// One document per α when requested.
    pub documents: Vec<MapDocument>,
}

/// Runs a mixing method over an α grid. α* is chosen on the test split when
/// there is one, otherwise on the train split.
pub fn sweep(config: &RunConfig) -> Result<SweepOutput> {
    sweep_session(config, &Session::open(config)?)
}

pub fn sweep_session(config: &RunConfig, session: &Session) -> Result<SweepOutput> {
    if !config.method.uses_alpha() {
        return Err(Error::invalid(format!(
            "a sweep needs a method with a mixing parameter, got {}",
            config.method
        )));
    }
    let alphas = config.alpha_grid.unwrap_or_default().values();
    let results = config.execution.map(&alphas, |&a| -> Result<(Vec<LossReport>, Option<MapDocument>)> {
        let (fitted, eval, losses) = session.score(a)?;
        let doc = if config.write_sweep_maps {
            Some(session.document(config, &fitted, &eval, losses.clone())?)
        } else {
            None
        };
        Ok((losses, doc))
    });
    let mut reports = Vec::new();
    let mut documents = Vec::new();
    for r in results {
        let (losses, doc) = r?;
        reports.extend(losses);
        documents.extend(doc);
    }
    let selection = if session.prepared.test.is_empty() { SplitTag::Train } else { SplitTag::Test };
    let candidates: Vec<LossReport> = reports.iter().filter(|r| r.split == selection).cloned().collect();
    let alpha_star = select_alpha(&candidates)?;
    let best = candidates
        .into_iter()
        .find(|r| r.alpha == alpha_star)
        .expect("selected alpha comes from the candidates");
    Ok(SweepOutput {
        reports,
        best,
        documents,
    })
}

pub fn write_sweep(config: &RunConfig, out: &SweepOutput) -> Result<()> {
    std::fs::write(config.loss_path(), loss_table(&out.reports, Some(&out.best)))?;
    for (i, doc) in out.documents.iter().enumerate() {
        doc.write(&config.sweep_map_path(i))?;
    }
    Ok(())
}

/// Re-reads a map document and recomputes its losses; returns the
/// recomputed reports and their largest deviation from the recorded ones.
pub fn rescore_file(path: &Path) -> Result<(Vec<LossReport>, f64)> {
    let doc = MapDocument::read(path)?;
    let reports = rescore(&doc)?;
    let deviation = rescore_deviation(&doc, &reports)?;
    Ok((reports, deviation))
}

/// Every method, for iteration in drivers and tests.
pub fn methods() -> &'static [Method] {
    &Method::ALL
}
