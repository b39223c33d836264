use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Error, Result};
use crate::method::Method;
use crate::parallel::Execution;
use crate::pipeline::ingest::IngestOptions;

/// Kernel family requested on the command line; `gamma: None` means the
/// data-derived default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelChoice {
    Linear,
    Rbf { gamma: Option<f64> },
}

impl FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelChoice::Linear),
            "rbf" => Ok(KernelChoice::Rbf { gamma: None }),
            other => Err(Error::invalid(format!("unknown kernel '{other}', expected linear or rbf"))),
        }
    }
}

/// `count` evenly spaced values from `start` to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid {
            start: 0.0,
            end: 1.0,
            count: 21,
        }
    }
}

impl AlphaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.end } else { self.start + step * i as f64 })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("alpha grid needs at least one point"));
        }
        check_alpha(self.start)?;
        check_alpha(self.end)
    }
}

impl FromStr for AlphaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("alpha grid '{s}' is not of the form start:end:count"));
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        let grid = AlphaGrid {
            start: a.trim().parse().map_err(|_| bad())?,
            end: b.trim().parse().map_err(|_| bad())?,
            count: n.trim().parse().map_err(|_| bad())?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

pub const DEFAULT_N_LATENT: usize = 2;
pub const DEFAULT_LAMBDA: f64 = 1e-6;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_M_ACTIVE: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: IngestOptions,
    pub method: Method,
    /// Defaults to rbf for kernel methods.
    pub kernel: Option<KernelChoice>,
    /// Defaults to [`DEFAULT_ALPHA`] for methods that mix.
    pub alpha: Option<f64>,
    pub alpha_grid: Option<AlphaGrid>,
    pub n_latent: usize,
    pub lambda: f64,
    /// Defaults to `min(n_train, DEFAULT_M_ACTIVE)`.
    pub m_active: Option<usize>,
    pub fps_start: usize,
    pub split_frac: f64,
    pub seed: u64,
    /// Output files are `<out>.map.json` and `<out>.losses.csv`.
    pub out: PathBuf,
    /// Sweeps also write one map document per α.
    pub write_sweep_maps: bool,
    pub execution: Execution,
}

impl RunConfig {
    pub fn new(input: IngestOptions, method: Method) -> Self {
        RunConfig {
            input,
            method,
            kernel: None,
            alpha: None,
            alpha_grid: None,
            n_latent: DEFAULT_N_LATENT,
            lambda: DEFAULT_LAMBDA,
            m_active: None,
            fps_start: 0,
            split_frac: 0.5,
            seed: 0,
            out: PathBuf::from("kpcovr"),
            write_sweep_maps: false,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.method;
        if !m.uses_alpha() && (self.alpha.is_some() || self.alpha_grid.is_some()) {
            return Err(Error::invalid(format!("method {m} takes no alpha")));
        }
        if self.alpha.is_some() && self.alpha_grid.is_some() {
            return Err(Error::invalid("give either a single alpha or an alpha grid, not both"));
        }
        if let Some(a) = self.alpha {
            check_alpha(a)?;
        }
        if let Some(g) = &self.alpha_grid {
            g.validate()?;
        }
        if self.m_active.is_some() && !m.is_sparse() {
            return Err(Error::invalid(format!("method {m} takes no active-set size")));
        }
        if self.m_active == Some(0) {
            return Err(Error::invalid("active-set size must be positive"));
        }
        if self.kernel.is_some() && !m.is_kernel() {
            return Err(Error::invalid(format!("method {m} takes no kernel")));
        }
        if let Some(KernelChoice::Rbf { gamma: Some(g) }) = self.kernel {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("rbf gamma must be positive, got {g}")));
            }
        }
        if self.n_latent == 0 {
            return Err(Error::invalid("n_latent must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be a non-negative number, got {}", self.lambda)));
        }
        if !(self.split_frac > 0.0 && self.split_frac <= 1.0) {
            return Err(Error::invalid(format!("split fraction must lie in (0, 1], got {}", self.split_frac)));
        }
        if self.input.per_atom_targets && self.input.groups.is_none() {
            return Err(Error::invalid("per-atom targets need a group column"));
        }
        Ok(())
    }

    pub fn kernel_choice(&self) -> Option<KernelChoice> {
        if !self.method.is_kernel() {
            return None;
        }
        Some(self.kernel.unwrap_or(KernelChoice::Rbf { gamma: None }))
    }

    /// The α a single run fits with.
    pub fn run_alpha(&self) -> f64 {
        self.method
            .implied_alpha()
            .unwrap_or(self.alpha.unwrap_or(DEFAULT_ALPHA))
    }

    pub fn map_path(&self) -> PathBuf {
        self.suffixed(".map.json")
    }

    pub fn loss_path(&self) -> PathBuf {
        self.suffixed(".losses.csv")
    }

    pub fn sweep_map_path(&self, index: usize) -> PathBuf {
        self.suffixed(&format!(".alpha-{index:03}.map.json"))
    }

    fn suffixed(&self, suffix: &str) -> PathBuf {
        let mut s = self.out.clone().into_os_string();
        s.push(suffix);
        s.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ingest::InputFiles;

    fn config(method: Method) -> RunConfig {
        RunConfig::new(IngestOptions::new(InputFiles::Combined("x.csv".into())), method)
    }

    #[test]
    fn grid_parsing() {
        let g: AlphaGrid = "0:1:5".parse().unwrap();
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(AlphaGrid::default().values().len(), 21);
        assert_eq!(*AlphaGrid::default().values().last().unwrap(), 1.0);
        assert_eq!("0.3:0.3:1".parse::<AlphaGrid>().unwrap().values(), vec![0.3]);
        assert!("0:1".parse::<AlphaGrid>().is_err());
        assert!("0:2:3".parse::<AlphaGrid>().is_err());
        assert!("0:1:0".parse::<AlphaGrid>().is_err());
    }

    #[test]
    fn parameter_scoping() {
        let mut c = config(Method::Pca);
        c.alpha = Some(0.5);
        assert!(c.validate().is_err());
        let mut c = config(Method::Pcovr);
        c.alpha = Some(0.5);
        assert!(c.validate().is_ok());
        c.alpha = Some(1.5);
        assert!(matches!(c.validate(), Err(Error::InvalidAlpha(_))));

        let mut c = config(Method::Kpcovr);
        c.m_active = Some(10);
        assert!(c.validate().is_err());
        let mut c = config(Method::SparseKpcovr);
        c.m_active = Some(10);
        assert!(c.validate().is_ok());

        let mut c = config(Method::Ridge);
        c.kernel = Some(KernelChoice::Linear);
        assert!(c.validate().is_err());
    }

    #[test]
    fn output_paths() {
        let mut c = config(Method::Pca);
        c.out = "runs/a".into();
        assert_eq!(c.map_path(), PathBuf::from("runs/a.map.json"));
        assert_eq!(c.loss_path(), PathBuf::from("runs/a.losses.csv"));
    }
}
