//! Pearson X² with class grouping, χ² p-values, and the sum of squared
//! deviations used when a table leaves no degrees of freedom.

use serde::{Deserialize, Serialize};

use crate::data::FrequencyTable;
use crate::dist::LerchDist;
use crate::error::{domain, LerchError, Result};
use crate::special::gamma_q;
use crate::sum::CompensatedSum;

/// A discrete model that can be scored against a frequency table.
pub trait CountModel {
    fn pmf(&self, x: i64) -> f64;

    /// `Pr(lo ≤ X ≤ hi)`; `hi = None` includes the whole upper tail.
    fn mass(&self, lo: i64, hi: Option<i64>) -> Result<f64> {
        match hi {
            Some(h) => Ok((lo..=h).map(|x| self.pmf(x)).sum()),
            None => Ok(1.0 - (0..lo).map(|x| self.pmf(x)).sum::<f64>()),
        }
    }
}

impl CountModel for LerchDist {
    fn pmf(&self, x: i64) -> f64 {
        LerchDist::pmf(self, x)
    }

    fn mass(&self, lo: i64, hi: Option<i64>) -> Result<f64> {
        self.interval_mass(lo, hi)
    }
}

/// Inclusive class interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGroup {
    pub lo: u64,
    pub hi: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingSpec {
    pub groups: Vec<ClassGroup>,
    /// Add the model mass above the last listed class to the last group.
    pub fold_tail: bool,
}

impl GroupingSpec {
    pub fn new(groups: Vec<ClassGroup>, fold_tail: bool) -> Result<Self> {
        if groups.is_empty() {
            return Err(LerchError::Validation("grouping has no groups".into()));
        }
        for g in &groups {
            if g.hi < g.lo {
                return Err(LerchError::Validation(format!(
                    "group [{}, {}] is empty",
                    g.lo, g.hi
                )));
            }
        }
        for w in groups.windows(2) {
            if w[1].lo != w[0].hi + 1 {
                return Err(LerchError::Validation(format!(
                    "groups [{}, {}] and [{}, {}] are not contiguous",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        Ok(Self { groups, fold_tail })
    }

    /// One group per class from `lo` to `hi`.
    pub fn singletons(lo: u64, hi: u64, fold_tail: bool) -> Self {
        Self {
            groups: (lo..=hi).map(|c| ClassGroup { lo: c, hi: c }).collect(),
            fold_tail,
        }
    }

    /// Singletons for `lo..first_merged`, then the listed merged ranges.
    pub fn with_merged(lo: u64, merged: &[(u64, u64)], fold_tail: bool) -> Result<Self> {
        let first = merged.first().map_or(lo, |m| m.0);
        let mut groups: Vec<ClassGroup> = (lo..first).map(|c| ClassGroup { lo: c, hi: c }).collect();
        groups.extend(merged.iter().map(|&(lo, hi)| ClassGroup { lo, hi }));
        Self::new(groups, fold_tail)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Checks that every table class falls inside the grouped range.
    pub fn covers(&self, table: &FrequencyTable) -> Result<()> {
        let lo = self.groups[0].lo;
        let hi = self.groups[self.groups.len() - 1].hi;
        for c in table.classes() {
            if c.count < lo || c.count > hi {
                return Err(LerchError::Validation(format!(
                    "class {} lies outside the grouped range [{lo}, {hi}]",
                    c.count
                )));
            }
        }
        Ok(())
    }

    /// Merges groups `i` and `i + 1`.
    pub fn merge_adjacent(&self, i: usize) -> Result<Self> {
        if i + 1 >= self.groups.len() {
            return domain(format!("no group after index {i}"));
        }
        let mut groups = self.groups.clone();
        let next = groups.remove(i + 1);
        groups[i].hi = next.hi;
        Self::new(groups, self.fold_tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    pub lo: u64,
    pub hi: u64,
    pub observed: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub x2: f64,
    pub dof: u32,
    pub p_value: f64,
    pub groups: Vec<GroupCell>,
}

/// Observed and expected frequencies per group, on the table's effective
/// sample size.
pub fn grouped_cells(
    data: &FrequencyTable,
    model: &impl CountModel,
    grouping: &GroupingSpec,
) -> Result<Vec<GroupCell>> {
    grouping.covers(data)?;
    let n_eff = data.effective_size();
    let scale = n_eff / data.n_total();
    let last = grouping.groups.len() - 1;
    grouping
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let observed: f64 = data
                .classes()
                .iter()
                .filter(|c| c.count >= g.lo && c.count <= g.hi)
                .map(|c| c.observed)
                .sum();
            let hi = if i == last && grouping.fold_tail {
                None
            } else {
                Some(g.hi as i64)
            };
            let p = model.mass(g.lo as i64, hi)?;
            Ok(GroupCell {
                lo: g.lo,
                hi: g.hi,
                observed: observed * scale,
                expected: n_eff * p,
            })
        })
        .collect()
}

/// `X² = Σ (O - E)² / E` over the grouped cells, without a d.o.f. check.
pub fn pearson_statistic(
    data: &FrequencyTable,
    model: &impl CountModel,
    grouping: &GroupingSpec,
) -> Result<(f64, Vec<GroupCell>)> {
    let cells = grouped_cells(data, model, grouping)?;
    let mut acc = CompensatedSum::new();
    for c in &cells {
        if !(c.expected > 0.0) {
            return domain(format!(
                "group [{}, {}] has non-positive expected frequency {}",
                c.lo, c.hi, c.expected
            ));
        }
        let d = c.observed - c.expected;
        acc.add(d * d / c.expected);
    }
    Ok((acc.value(), cells))
}

/// Pearson X² test with `dof = groups - 1 - n_fitted_params`.
pub fn pearson_chi2(
    data: &FrequencyTable,
    model: &impl CountModel,
    grouping: &GroupingSpec,
    n_fitted_params: u32,
) -> Result<GofReport> {
    let dof = grouping.len() as i64 - 1 - n_fitted_params as i64;
    if dof < 1 {
        return domain(format!(
            "{} groups and {n_fitted_params} fitted parameters leave {dof} degrees of freedom; use the sum of squared deviations instead",
            grouping.len()
        ));
    }
    let (x2, groups) = pearson_statistic(data, model, grouping)?;
    Ok(GofReport {
        x2,
        dof: dof as u32,
        p_value: chi2_sf(x2, dof as u32),
        groups,
    })
}

/// Upper tail of the χ² distribution, `Q(dof/2, x/2)`.
///
/// `dof = 0` is the point mass at zero.
pub fn chi2_sf(x2: f64, dof: u32) -> f64 {
    if x2 <= 0.0 {
        return 1.0;
    }
    if dof == 0 {
        return 0.0;
    }
    gamma_q(dof as f64 / 2.0, x2 / 2.0)
}

/// `Σ (p(x) - O_x / N)²` over the listed classes.
pub fn ssd(data: &FrequencyTable, model: &impl CountModel) -> f64 {
    let n = data.n_total();
    data.classes()
        .iter()
        .map(|c| {
            let d = model.pmf(c.count as i64) - c.observed / n;
            d * d
        })
        .sum()
}
