use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Every model family the crate can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pca,
    Mds,
    Ridge,
    Pcovr,
    Kpca,
    Krr,
    Kpcovr,
    SparseKpca,
    SparseKrr,
    SparseKpcovr,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Pca,
        Method::Mds,
        Method::Ridge,
        Method::Pcovr,
        Method::Kpca,
        Method::Krr,
        Method::Kpcovr,
        Method::SparseKpca,
        Method::SparseKrr,
        Method::SparseKpcovr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Mds => "mds",
            Method::Ridge => "ridge",
            Method::Pcovr => "pcovr",
            Method::Kpca => "kpca",
            Method::Krr => "krr",
            Method::Kpcovr => "kpcovr",
            Method::SparseKpca => "sparse-kpca",
            Method::SparseKrr => "sparse-krr",
            Method::SparseKpcovr => "sparse-kpcovr",
        }
    }

    /// Methods that take a mixing parameter.
    pub fn uses_alpha(self) -> bool {
        matches!(self, Method::Pcovr | Method::Kpcovr | Method::SparseKpcovr)
    }

    pub fn is_kernel(self) -> bool {
        !matches!(self, Method::Pca | Method::Mds | Method::Ridge | Method::Pcovr)
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, Method::SparseKpca | Method::SparseKrr | Method::SparseKpcovr)
    }

    /// Pure regressors have no latent dimension to choose.
    pub fn is_regression_only(self) -> bool {
        matches!(self, Method::Ridge | Method::Krr | Method::SparseKrr)
    }

    /// The mixing parameter a fixed-α method corresponds to.
    pub fn implied_alpha(self) -> Option<f64> {
        match self {
            Method::Pca | Method::Mds | Method::Kpca | Method::SparseKpca => Some(1.0),
            Method::Ridge | Method::Krr | Method::SparseKrr => Some(0.0),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}
