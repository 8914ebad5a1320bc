//! Equilibria of a two-firm market in which firms compete by posting
//! selection procedures: a binary-signal test plus acceptance probabilities
//! after each signal, optionally with wages.
//!
//! The crate computes the accuracy and difficulty orders on tests, builds
//! and verifies symmetric equilibria by explicit deviation search, and
//! covers capacity constraints, two-tier asymmetric equilibria, wage
//! competition and information-cost budgets. Every equilibrium certificate
//! is relative to a declared search lattice.

// negated comparisons double as NaN rejection in argument checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod extensions;
pub mod info_cost;
pub mod market;
pub mod orders;
pub mod par;
pub mod signal;
pub mod type_space;

pub use equilibrium::{
    candidate_equilibrium, structural_checks, verify_symmetric, zero_profit_alpha, DeviationReport,
    SearchConfig, Selection, StructuralFlags, TestSet,
};
pub use error::{Error, Result};
pub use market::{to_cutoff, ApplicationProfile, Market, MarketMode, Procedure};
pub use orders::{compare_accuracy, compare_difficulty, Comparison};
pub use signal::{build_family_test, Family, FamilyParams, Signal, SignalStats, Test};
pub use type_space::{GridKind, TypeGrid};
