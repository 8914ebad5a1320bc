//! Turns a loaded configuration into the grid, test set and search settings
//! the subcommands run on.

use std::sync::Arc;

use seleq_core::{build_family_test, Family, FamilyParams, Market, SearchConfig, Test, TestSet, TypeGrid};

use crate::config::{BaseCurve, ConfigError, FamilyName, Loaded, TestRef, TypesSection};

pub struct Instance {
    pub grid: Arc<TypeGrid>,
    pub set: TestSet,
    pub family: Option<Family>,
    pub market: Market,
    pub search: SearchConfig,
}

/// A resolved test and, when it belongs to the set, its index.
pub struct Resolved {
    pub index: Option<usize>,
    pub test: Test,
}

pub fn build(l: &Loaded) -> Result<Instance, ConfigError> {
    let c = &l.config;
    let grid = match &c.types {
        TypesSection::Binary { theta_low, theta_high, mu } => TypeGrid::binary(*theta_low, *theta_high, *mu),
        TypesSection::Uniform { min, max, points } => TypeGrid::uniform(*min, *max, *points),
        TypesSection::Explicit { theta, weights } => {
            TypeGrid::new(theta.clone(), weights.clone(), seleq_core::GridKind::Continuous)
        }
    }
    .map_err(|e| l.error_at("types", e.to_string()))?;
    let grid = Arc::new(grid);

    let ts = &c.test_set;
    let (set, family) = if let Some(tables) = &ts.tables {
        let set = TestSet::from_tables(grid.clone(), tables).map_err(|e| l.error_at("test_set.tables", e.to_string()))?;
        (set, None)
    } else {
        let name = ts.family.expect("validated: tables or family");
        let family = match name {
            FamilyName::PowerLinear => Family::PowerLinear,
            FamilyName::ThresholdNoiseUniform => Family::ThresholdNoiseUniform,
            FamilyName::LinearMix => {
                let base = match &ts.base {
                    None => None,
                    Some(BaseCurve::Named(n)) if n == "ramp" => None,
                    Some(BaseCurve::Named(n)) if n == "theta" => {
                        Some(grid.theta().iter().map(|t| t.clamp(1e-9, 1.0 - 1e-9)).collect())
                    }
                    Some(BaseCurve::Named(n)) => {
                        return Err(l.error_at("test_set.base", format!("unknown base curve '{n}' (ramp, theta)")))
                    }
                    Some(BaseCurve::Table(t)) => Some(t.clone()),
                };
                Family::LinearMix { base }
            }
        };
        let sigmas = ts.sigma.as_ref().expect("validated").values();
        let ds = ts.d.as_ref().expect("validated").values();
        let set = TestSet::from_family(&family, grid.clone(), &sigmas, &ds)
            .map_err(|e| l.error_at("test_set", e.to_string()))?;
        (set, Some(family))
    };

    let s = &c.search;
    let search = SearchConfig {
        alpha_steps: s.alpha_steps,
        gain_tol: s.gain_tol,
        breakpoints: s.breakpoints,
        full_grid: s.full_grid,
        parallel: s.parallel,
        min_info_tol: s.min_info_tol,
    };
    let market = Market {
        tie_tol: c.market.tie_tol,
        ..Market::default()
    };
    Ok(Instance {
        grid,
        set,
        family,
        market,
        search,
    })
}

impl Instance {
    pub fn resolve(&self, l: &Loaded, key: &str, r: &TestRef) -> Result<Resolved, ConfigError> {
        match r {
            TestRef::Index(i) => {
                if *i >= self.set.len() {
                    return Err(l.error_at(key, format!("test index {i} out of range (set has {})", self.set.len())));
                }
                Ok(Resolved {
                    index: Some(*i),
                    test: self.set.get(*i).clone(),
                })
            }
            TestRef::Table(pi) => {
                let test = Test::new(self.grid.clone(), pi.clone()).map_err(|e| l.error_at(key, e.to_string()))?;
                Ok(Resolved {
                    index: self.set.index_of(&test),
                    test,
                })
            }
            TestRef::Params { sigma, d } => {
                let family = self
                    .family
                    .as_ref()
                    .ok_or_else(|| l.error_at(key, "family parameters given but the test set has no family"))?;
                let found = (0..self.set.len()).find(|&i| {
                    self.set
                        .params(i)
                        .is_some_and(|(s, dd)| (s - sigma).abs() < 1e-12 && (dd - d).abs() < 1e-12)
                });
                match found {
                    Some(i) => Ok(Resolved {
                        index: Some(i),
                        test: self.set.get(i).clone(),
                    }),
                    None => {
                        let test = build_family_test(&FamilyParams::new(family.clone(), *sigma, *d), self.grid.clone())
                            .map_err(|e| l.error_at(key, e.to_string()))?;
                        Ok(Resolved { index: None, test })
                    }
                }
            }
        }
    }

    /// Like [`Instance::resolve`] but the test must belong to the set.
    pub fn resolve_member(&self, l: &Loaded, key: &str, r: &TestRef) -> Result<usize, ConfigError> {
        self.resolve(l, key, r)?
            .index
            .ok_or_else(|| l.error_at(key, "test is not a member of the test set"))
    }
}
