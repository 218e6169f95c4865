//! Two-hour moving-average load forecaster used while load telemetry is down.

use gridmpc_milp::Scalar;

use crate::error::{Error, Result};
use crate::scenario::{ScenarioTimeSeries, ScenarioWindow};

/// Actual loads observed so far, hour 0 onward.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadHistory<T> {
    essential: Vec<T>,
    regular: Vec<T>,
}

impl<T: Scalar> LoadHistory<T> {
    pub fn new() -> Self {
        Self {
            essential: Vec::new(),
            regular: Vec::new(),
        }
    }

    /// Actuals for hours `0..=through` of `series`.
    pub fn from_series(series: &ScenarioTimeSeries<T>, through: usize) -> Self {
        Self {
            essential: series.essential()[..=through].to_vec(),
            regular: series.regular()[..=through].to_vec(),
        }
    }

    pub fn push(&mut self, essential: T, regular: T) {
        self.essential.push(essential);
        self.regular.push(regular);
    }

    pub fn len(&self) -> usize {
        self.essential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.essential.is_empty()
    }

    /// Index of the newest known hour.
    pub fn last_known(&self) -> Option<usize> {
        self.len().checked_sub(1)
    }

    pub fn essential(&self) -> &[T] {
        &self.essential
    }

    pub fn regular(&self) -> &[T] {
        &self.regular
    }
}

fn mean2<T: Scalar>(a: T, b: T) -> T {
    (a + b) / T::lit(2.0)
}

/// Next-hour estimate per class: the mean of the two newest known hours.
pub fn predict_next<T: Scalar>(history: &LoadHistory<T>) -> Result<(T, T)> {
    let n = history.len();
    if n < 2 {
        return Err(Error::InsufficientHistory(n));
    }
    Ok((
        mean2(history.essential[n - 2], history.essential[n - 1]),
        mean2(history.regular[n - 2], history.regular[n - 1]),
    ))
}

/// Loads the controller plans with for every hour of `window`: actuals where
/// visible, otherwise the two-hour mean applied recursively to the sequence
/// of actuals and earlier estimates. `history` must hold every hour up to
/// the window's `known_through`.
pub fn fill_window<T: Scalar>(
    window: &ScenarioWindow<'_, T>,
    history: &LoadHistory<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let series = window.series();
    let known = history.len();
    let end = window.start() + window.len();
    let mut ess: Vec<T> = history.essential.clone();
    let mut reg: Vec<T> = history.regular.clone();
    for h in known..end {
        if window.hour_available(h) {
            ess.push(series.essential()[h]);
            reg.push(series.regular()[h]);
        } else {
            if h < 2 {
                return Err(Error::InsufficientHistory(h));
            }
            ess.push(mean2(ess[h - 2], ess[h - 1]));
            reg.push(mean2(reg[h - 2], reg[h - 1]));
        }
    }
    let start = window.start();
    Ok((ess[start..end].to_vec(), reg[start..end].to_vec()))
}

/// Root mean squared difference.
pub fn rmse<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(Error::Empty);
    }
    let sum = actual
        .iter()
        .zip(predicted)
        .fold(T::zero(), |acc, (&a, &p)| acc + (a - p) * (a - p));
    Ok((sum / T::from_usize(actual.len()).unwrap()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseReport<T> {
    pub essential: T,
    pub regular: T,
    pub total: T,
}

/// Error of the one-step forecaster over the comm-loss hours of `series`,
/// with each hour's actual revealed once it has passed. `None` when the
/// series has no comm-loss hours.
pub fn comm_loss_rmse<T: Scalar>(series: &ScenarioTimeSeries<T>) -> Result<Option<RmseReport<T>>> {
    let hours = series.comm_loss_hours();
    if hours.is_empty() {
        return Ok(None);
    }
    let (e, r) = (series.essential(), series.regular());
    let mut cols: [(Vec<T>, Vec<T>); 3] = Default::default();
    for &h in &hours {
        if h < 2 {
            return Err(Error::InsufficientHistory(h));
        }
        let (pe, pr) = predict_next(&LoadHistory::from_series(series, h - 1))?;
        cols[0].0.push(e[h]);
        cols[0].1.push(pe);
        cols[1].0.push(r[h]);
        cols[1].1.push(pr);
        cols[2].0.push(e[h] + r[h]);
        cols[2].1.push(pe + pr);
    }
    Ok(Some(RmseReport {
        essential: rmse(&cols[0].0, &cols[0].1)?,
        regular: rmse(&cols[1].0, &cols[1].1)?,
        total: rmse(&cols[2].0, &cols[2].1)?,
    }))
}
