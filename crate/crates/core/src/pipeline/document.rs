//! Map documents, loss tables and re-scoring.
//!
//! Every real is written with 17 significant digits, which round-trips an
//! `f64` exactly, so re-reading a document recovers the values it was built from.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::{LossReport, SplitTag};
use crate::method::Method;
use crate::preprocess::TargetScaler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub split: SplitTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<i64>,
    /// This sample's contribution to `ℓ_proj` before averaging.
    pub proj_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub method: Method,
    pub alpha: f64,
    pub lambda: f64,
    pub n_latent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_active: Option<usize>,
    pub seed: u64,
    pub split_frac: f64,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    /// True when `y` holds environment shares of structure targets.
    pub grouped: bool,
    /// Maps `y` and `y_hat` to the frame the losses are measured in.
    pub target_scaler: TargetScaler,
    pub losses: Vec<LossReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub meta: MapMeta,
    pub points: Vec<MapPoint>,
}

/// Writes reals in exponent form with 16 fractional digits.
struct RealFormatter;

impl serde_json::ser::Formatter for RealFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt_real(value))
    }
}

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

impl MapDocument {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, RealFormatter);
        self.serialize(&mut ser)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read(path)?)
    }
}

fn rows_to_matrix(rows: &[&Vec<f64>], width: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((rows.len(), width));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::invalid(format!("point {i} has {} values, expected {width}", r.len())));
        }
        m.row_mut(i).assign(&ndarray::ArrayView1::from(r.as_slice()));
    }
    Ok(m)
}

/// Losses recomputed from the per-point records, one report per split present.
pub fn rescore(doc: &MapDocument) -> Result<Vec<LossReport>> {
    let meta = &doc.meta;
    let width = meta.target_scaler.n_properties;
    let mut reports = Vec::new();
    for split in [SplitTag::Train, SplitTag::Test] {
        let pts: Vec<&MapPoint> = doc.points.iter().filter(|p| p.split == split).collect();
        if pts.is_empty() {
            continue;
        }
        let y = rows_to_matrix(&pts.iter().map(|p| &p.y).collect::<Vec<_>>(), width)?;
        let y_hat = rows_to_matrix(&pts.iter().map(|p| &p.y_hat).collect::<Vec<_>>(), width)?;
        let y = meta.target_scaler.transform(y.view())?;
        let y_hat = meta.target_scaler.transform(y_hat.view())?;
        let l_regr = crate::losses::loss_regr(y.view(), y_hat.view())?;
        let l_proj = pts.iter().map(|p| p.proj_residual).sum::<f64>() / pts.len() as f64;
        reports.push(LossReport::new(meta.alpha, meta.n_latent, split, l_proj, l_regr));
    }
    Ok(reports)
}

/// Largest absolute difference between recorded and recomputed losses.
pub fn rescore_deviation(doc: &MapDocument, recomputed: &[LossReport]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for r in recomputed {
        let recorded = doc
            .meta
            .losses
            .iter()
            .find(|l| l.split == r.split)
            .ok_or_else(|| Error::invalid(format!("document records no {} losses", r.split.as_str())))?;
        for (a, b) in [
            (recorded.l_proj, r.l_proj),
            (recorded.l_regr, r.l_regr),
            (recorded.l_total, r.l_total),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

pub const LOSS_TABLE_HEADER: &str = "alpha,n_latent,split,l_proj,l_regr,l_total";

/// Split label of the row marking the optimal α in a sweep table.
pub const BEST_ROW_LABEL: &str = "best";

fn loss_row(out: &mut String, r: &LossReport, label: &str) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        fmt_real(r.alpha),
        r.n_latent,
        label,
        fmt_real(r.l_proj),
        fmt_real(r.l_regr),
        fmt_real(r.l_total)
    );
}

/// Comma-separated loss table; `best` is appended as a row labelled [`BEST_ROW_LABEL`].
pub fn loss_table(reports: &[LossReport], best: Option<&LossReport>) -> String {
    let mut out = String::from(LOSS_TABLE_HEADER);
    out.push('\n');
    for r in reports {
        loss_row(&mut out, r, r.split.as_str());
    }
    if let Some(b) = best {
        loss_row(&mut out, b, BEST_ROW_LABEL);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::fit_target_scaler;
    use ndarray::array;

    fn doc() -> MapDocument {
        let scaler = fit_target_scaler(array![[1.0], [3.0], [2.0]].view()).unwrap();
        let points = vec![
            MapPoint {
                t: vec![0.1, -0.2],
                y: vec![1.0],
                y_hat: vec![1.5],
                split: SplitTag::Train,
                group: None,
                proj_residual: 0.25,
            },
            MapPoint {
                t: vec![1.0 / 3.0, 2.0],
                y: vec![3.0],
                y_hat: vec![2.5],
                split: SplitTag::Train,
                group: None,
                proj_residual: 0.75,
            },
            MapPoint {
                t: vec![0.0, 0.0],
                y: vec![2.0],
                y_hat: vec![2.0],
                split: SplitTag::Test,
                group: Some(4),
                proj_residual: 0.0,
            },
        ];
        let mut d = MapDocument {
            meta: MapMeta {
                method: Method::Pcovr,
                alpha: 0.5,
                lambda: 1e-6,
                n_latent: 2,
                kernel: None,
                m_active: None,
                seed: 1,
                split_frac: 0.5,
                feature_names: vec!["a".into()],
                target_names: vec!["e".into()],
                grouped: false,
                target_scaler: scaler,
                losses: Vec::new(),
            },
            points,
        };
        d.meta.losses = rescore(&d).unwrap();
        d
    }

    #[test]
    fn json_round_trip_is_exact() {
        let d = doc();
        let bytes = d.to_json().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("3.3333333333333331e-1"));
        assert!(text.starts_with("{\"meta\":"));
        let back = MapDocument::from_json(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_json().unwrap(), bytes);
    }

    #[test]
    fn rescore_matches_recorded() {
        let d = doc();
        let r = rescore(&d).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0].l_proj - 0.5).abs() < 1e-15);
        assert_eq!(r[1].l_regr, 0.0);
        assert_eq!(rescore_deviation(&d, &r).unwrap(), 0.0);
    }

    #[test]
    fn table_layout() {
        let d = doc();
        let t = loss_table(&d.meta.losses, Some(&d.meta.losses[1]));
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], LOSS_TABLE_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].split(',').nth(2) == Some(BEST_ROW_LABEL));
    }
}
