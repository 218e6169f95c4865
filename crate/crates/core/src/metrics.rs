//! Run-level aggregates: switches, discharge episodes, losses, resilience
//! index, and the battery lifespan estimate.

use gridmpc_milp::Scalar;
use serde::ser::{Serialize, Serializer};
use serde::Serialize as DeriveSerialize;

use crate::battery::{discharge_episodes, estimate_lifespan, BatteryMode, BlcCurve, Lifespan};
use crate::error::{Error, Result};
use crate::forecast::RmseReport;
use crate::mpc::{MpcDecision, Weights};

/// Number of adjacent pairs with different modes.
pub fn count_switches(modes: &[BatteryMode]) -> usize {
    modes.windows(2).filter(|w| w[0] != w[1]).count()
}

/// `1 - sum(weighted loss) / sum(weighted load)` over all records.
pub fn resilience_index<T: Scalar>(records: &[MpcDecision<T>], weights: &Weights<T>) -> Result<T> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    let (loss, load) = records.iter().fold((T::zero(), T::zero()), |(loss, load), r| {
        (
            loss + weights.weighted(r.essential_shed, r.regular_shed),
            load + weights.weighted(r.essential_load, r.regular_load),
        )
    });
    if load <= T::zero() {
        return Err(Error::ZeroLoad);
    }
    Ok(T::one() - loss / load)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTotals<T> {
    pub essential: T,
    pub regular: T,
    pub total: T,
}

/// Shed energy per class in kWh (one-hour records).
pub fn loss_totals<T: Scalar>(records: &[MpcDecision<T>]) -> Result<LossTotals<T>> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    let essential = records.iter().fold(T::zero(), |a, r| a + r.essential_shed);
    let regular = records.iter().fold(T::zero(), |a, r| a + r.regular_shed);
    Ok(LossTotals {
        essential,
        regular,
        total: essential + regular,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult<T> {
    pub records: Vec<MpcDecision<T>>,
    pub total_switches: usize,
    pub discharge_count: usize,
    pub losses: LossTotals<T>,
    pub resilience_index: T,
    /// Expected resilience of each decision, keyed by decision hour.
    pub expected_ri_curve: Vec<(usize, T)>,
    pub lifespan: Lifespan<T>,
    /// Forecast error over the comm-loss hours, if there were any.
    pub rmse: Option<RmseReport<T>>,
}

pub fn summarize<T: Scalar>(
    records: Vec<MpcDecision<T>>,
    expected_ri_curve: Vec<(usize, T)>,
    soc_start: T,
    weights: &Weights<T>,
    curve: &BlcCurve<T>,
    rmse: Option<RmseReport<T>>,
) -> Result<SimulationResult<T>> {
    let modes: Vec<BatteryMode> = records.iter().map(|r| r.mode).collect();
    let socs: Vec<T> = records.iter().map(|r| r.soc_after).collect();
    Ok(SimulationResult {
        total_switches: count_switches(&modes),
        discharge_count: discharge_episodes(&modes).len(),
        losses: loss_totals(&records)?,
        resilience_index: resilience_index(&records, weights)?,
        lifespan: estimate_lifespan(soc_start, &modes, &socs, curve)?,
        expected_ri_curve,
        rmse,
        records,
    })
}

/// The JSON summary written next to a trace.
#[derive(Debug, Clone, PartialEq, DeriveSerialize)]
pub struct Summary {
    pub switches: usize,
    pub discharge_episodes: usize,
    pub essential_loss_kwh: f64,
    pub regular_loss_kwh: f64,
    pub total_loss_kwh: f64,
    pub resilience_index: f64,
    pub lifespan_years: LifespanField,
    pub rmse: RmseField,
}

/// Lifespan as a number of years, or the string `"no-cycling"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifespanField(pub Option<f64>);

impl Serialize for LifespanField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(y) => s.serialize_f64(y),
            None => s.serialize_str("no-cycling"),
        }
    }
}

/// Per-class forecast RMSE; all `null` for runs without comm loss.
#[derive(Debug, Clone, Copy, PartialEq, DeriveSerialize)]
pub struct RmseField {
    pub essential: Option<f64>,
    pub regular: Option<f64>,
    pub total: Option<f64>,
}

impl<T: Scalar> SimulationResult<T> {
    pub fn summary(&self) -> Summary {
        let r = self.rmse;
        Summary {
            switches: self.total_switches,
            discharge_episodes: self.discharge_count,
            essential_loss_kwh: self.losses.essential.as_f64(),
            regular_loss_kwh: self.losses.regular.as_f64(),
            total_loss_kwh: self.losses.total.as_f64(),
            resilience_index: self.resilience_index.as_f64(),
            lifespan_years: LifespanField(self.lifespan.years().map(Scalar::as_f64)),
            rmse: RmseField {
                essential: r.map(|r| r.essential.as_f64()),
                regular: r.map(|r| r.regular.as_f64()),
                total: r.map(|r| r.total.as_f64()),
            },
        }
    }
}
