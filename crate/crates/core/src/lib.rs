//! Computable Colombeau-style generalized functions: ε-nets of smooth
//! functions as expression trees, mollifier embeddings of distributions,
//! asymptotic classification, association, and generalized
//! pseudo-Riemannian geometry and flows in charts.

pub mod association;
pub mod asymptotics;
pub mod config;
pub mod demo;
pub mod domain;
pub mod error;
pub mod expr;
pub mod flows;
pub mod geometry;
pub mod mollifier;
pub mod ode;
pub mod quadrature;

pub use domain::{ChartDomain, CompactBox, EpsilonGrid, Representative, Shape};
pub use error::{Error, Result};
pub use expr::Expr;
pub use mollifier::{DistributionSpec, Mollifier};
