//! Capacity constraints, two-tier asymmetric equilibria and wage
//! competition.

pub mod capacity;
pub mod two_tier;
pub mod wage;
