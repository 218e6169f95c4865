//! Battery state, operating modes, and the depth-of-discharge lifecycle curve.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use gridmpc_milp::{PiecewiseCurve, Scalar};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatteryMode {
    Charge,
    Discharge,
    Idle,
}

impl BatteryMode {
    pub const ALL: [BatteryMode; 3] = [BatteryMode::Charge, BatteryMode::Discharge, BatteryMode::Idle];

    pub fn label(self) -> &'static str {
        match self {
            BatteryMode::Charge => "CH",
            BatteryMode::Discharge => "DIS",
            BatteryMode::Idle => "IDLE",
        }
    }
}

impl fmt::Display for BatteryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BatteryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "CH" => Ok(BatteryMode::Charge),
            "DIS" => Ok(BatteryMode::Discharge),
            "IDLE" => Ok(BatteryMode::Idle),
            other => Err(format!("unknown battery mode `{other}`")),
        }
    }
}

/// Physical and cost constants of the storage unit. Powers in kW, energy in kWh,
/// state of charge as a fraction of `e_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryParams<T> {
    pub eta_ch: T,
    pub eta_dis: T,
    pub soc_init: T,
    pub soc_min: T,
    pub soc_max: T,
    pub e_max: T,
    pub p_max: T,
    /// Multiplier on the normalized lifecycle credit.
    pub c_bat: T,
    /// Cost of a direct charge/discharge reversal.
    pub c_ch_dis: T,
    /// Cost of entering or leaving idle.
    pub c_no_ch_dis: T,
    /// Holding cost per idle hour.
    pub c_idle: T,
}

impl<T: Scalar> Default for BatteryParams<T> {
    fn default() -> Self {
        Self {
            eta_ch: T::lit(0.90),
            eta_dis: T::lit(0.95),
            soc_init: T::lit(0.5),
            soc_min: T::lit(0.2),
            soc_max: T::lit(0.9),
            e_max: T::lit(4.0),
            p_max: T::lit(4.0),
            c_bat: T::lit(125.0),
            c_ch_dis: T::lit(0.055),
            c_no_ch_dis: T::lit(0.055),
            c_idle: T::lit(0.0275),
        }
    }
}

impl<T: Scalar> BatteryParams<T> {
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        let fail = |msg: String| Err(Error::Battery(msg));
        let all = [
            self.eta_ch,
            self.eta_dis,
            self.soc_init,
            self.soc_min,
            self.soc_max,
            self.e_max,
            self.p_max,
            self.c_bat,
            self.c_ch_dis,
            self.c_no_ch_dis,
            self.c_idle,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("all parameters must be finite".into());
        }
        if !(zero <= self.soc_min && self.soc_min < self.soc_init && self.soc_init < self.soc_max && self.soc_max <= one) {
            return fail(format!(
                "need 0 <= soc_min < soc_init < soc_max <= 1, got {} / {} / {}",
                self.soc_min, self.soc_init, self.soc_max
            ));
        }
        for (name, eta) in [("eta_ch", self.eta_ch), ("eta_dis", self.eta_dis)] {
            if !(eta > zero && eta <= one) {
                return fail(format!("{name} = {eta} outside (0, 1]"));
            }
        }
        if self.p_max <= zero || self.e_max <= zero {
            return fail("p_max and e_max must be positive".into());
        }
        if self.c_bat < zero || self.c_ch_dis < zero || self.c_no_ch_dis < zero || self.c_idle < zero {
            return fail("cost coefficients must be nonnegative".into());
        }
        Ok(())
    }
}

/// State of charge after one hour at the given powers.
pub fn soc_update<T: Scalar>(soc: T, p_ch: T, p_dis: T, params: &BatteryParams<T>) -> Result<T> {
    if p_ch < T::zero() || p_dis < T::zero() || (p_ch > T::zero() && p_dis > T::zero()) {
        return Err(Error::SimultaneousPower {
            p_ch: p_ch.as_f64(),
            p_dis: p_dis.as_f64(),
        });
    }
    Ok(soc + (params.eta_ch * p_ch - p_dis / params.eta_dis) / params.e_max)
}

pub fn dod_of<T: Scalar>(soc: T) -> T {
    T::one() - soc
}

/// Cost of moving from `prev` to `next`, including the idle holding charge.
pub fn switching_cost<T: Scalar>(prev: BatteryMode, next: BatteryMode, params: &BatteryParams<T>) -> T {
    use BatteryMode::*;
    let transition = match (prev, next) {
        (a, b) if a == b => T::zero(),
        (Charge, Discharge) | (Discharge, Charge) => params.c_ch_dis,
        _ => params.c_no_ch_dis,
    };
    let holding = if next == Idle { params.c_idle } else { T::zero() };
    transition + holding
}

/// Cycle life as a function of depth of discharge: 9 breakpoints, depth
/// strictly increasing in (0, 1], cycles strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct BlcCurve<T> {
    curve: PiecewiseCurve<T>,
}

pub const BLC_BREAKPOINTS: usize = 9;

const DEFAULT_BLC: [(f64, f64); BLC_BREAKPOINTS] = [
    (0.1, 15000.0),
    (0.2, 9000.0),
    (0.3, 6000.0),
    (0.4, 4500.0),
    (0.5, 3500.0),
    (0.6, 2800.0),
    (0.7, 2300.0),
    (0.8, 1900.0),
    (0.9, 1600.0),
];

impl<T: Scalar> Default for BlcCurve<T> {
    fn default() -> Self {
        Self::new(DEFAULT_BLC.iter().map(|&(d, c)| (T::lit(d), T::lit(c))).collect())
            .expect("bundled curve is valid")
    }
}

impl<T: Scalar> BlcCurve<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self> {
        if points.len() != BLC_BREAKPOINTS {
            return Err(Error::Curve(format!(
                "expected {BLC_BREAKPOINTS} breakpoints, got {}",
                points.len()
            )));
        }
        for (i, &(d, c)) in points.iter().enumerate() {
            if !(d > T::zero() && d <= T::one()) {
                return Err(Error::Curve(format!("depth {d} at row {} outside (0, 1]", i + 1)));
            }
            if !(c > T::zero() && c.is_finite()) {
                return Err(Error::Curve(format!("cycle count {c} at row {} not positive", i + 1)));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(Error::Curve(format!("depth not increasing at row {}", i + 2)));
            }
            if w[1].1 >= w[0].1 {
                return Err(Error::Curve(format!("cycles not decreasing at row {}", i + 2)));
            }
        }
        Ok(Self {
            curve: PiecewiseCurve::new(points)?,
        })
    }

    /// Reads `dod,cycles` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["dod", "cycles"] {
            return Err(Error::Curve(format!(
                "header must be `dod,cycles`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let field = |col: usize, name: &str| -> Result<T> {
                let raw = rec.get(col).ok_or_else(|| Error::Parse {
                    row,
                    column: name.into(),
                    message: "missing value".into(),
                })?;
                raw.parse::<T>().map_err(|_| Error::Parse {
                    row,
                    column: name.into(),
                    message: format!("`{raw}` is not a number"),
                })
            };
            points.push((field(0, "dod")?, field(1, "cycles")?));
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dod", "cycles"])?;
        for &(d, c) in self.points() {
            w.write_record([d.to_string(), c.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn points(&self) -> &[(T, T)] {
        self.curve.points()
    }

    pub fn domain(&self) -> (T, T) {
        self.curve.domain()
    }

    pub fn max_cycles(&self) -> T {
        self.points()[0].1
    }

    /// Cycles available at depth `dod` by linear interpolation.
    pub fn eval(&self, dod: T) -> Result<T> {
        Ok(self.curve.eval(dod)?)
    }

    /// The curve divided by its largest cycle count, so values lie in (0, 1].
    pub fn normalized(&self) -> PiecewiseCurve<T> {
        self.curve.scale_values(T::one() / self.max_cycles())
    }

    pub fn as_piecewise(&self) -> &PiecewiseCurve<T> {
        &self.curve
    }
}

pub fn blc_eval<T: Scalar>(curve: &BlcCurve<T>, dod: T) -> Result<T> {
    curve.eval(dod)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lifespan<T> {
    Years(T),
    /// The run never discharged, so no cycle rate exists.
    NoCycling,
}

impl<T: Scalar> Lifespan<T> {
    pub fn years(self) -> Option<T> {
        match self {
            Lifespan::Years(y) => Some(y),
            Lifespan::NoCycling => None,
        }
    }
}

/// Maximal runs of consecutive discharge hours as `(first, last)` indices.
pub fn discharge_episodes(modes: &[BatteryMode]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in modes.iter().enumerate() {
        match (m == BatteryMode::Discharge, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, modes.len() - 1));
    }
    out
}

/// Years until the cycle budget at the mean episode depth is used up, at the
/// observed episode rate. `soc_after[i]` is the charge at the end of hour `i`;
/// `soc_start` the charge before hour 0. Each discharge episode counts as one
/// cycle whose depth is the charge lost across it. Mean depths outside the
/// curve's domain are clamped to its nearest end.
pub fn estimate_lifespan<T: Scalar>(
    soc_start: T,
    modes: &[BatteryMode],
    soc_after: &[T],
    curve: &BlcCurve<T>,
) -> Result<Lifespan<T>> {
    if modes.is_empty() {
        return Err(Error::Empty);
    }
    if modes.len() != soc_after.len() {
        return Err(Error::LengthMismatch(modes.len(), soc_after.len()));
    }
    let episodes = discharge_episodes(modes);
    if episodes.is_empty() {
        return Ok(Lifespan::NoCycling);
    }
    let before = |i: usize| if i == 0 { soc_start } else { soc_after[i - 1] };
    let total_depth = episodes
        .iter()
        .fold(T::zero(), |acc, &(s, e)| acc + (before(s) - soc_after[e]));
    let n = T::from_usize(episodes.len()).unwrap();
    let (lo, hi) = curve.domain();
    let depth = (total_depth / n).max(lo).min(hi);
    let days = T::from_usize(modes.len()).unwrap() / T::lit(24.0);
    let per_day = n / days;
    Ok(Lifespan::Years(curve.eval(depth)? / (per_day * T::lit(365.0))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn soc_update_examples() {
        let p = BatteryParams::<f64>::default();
        assert!(close(soc_update(0.5, 1.0, 0.0, &p).unwrap(), 0.725));
        assert!(close(soc_update(0.725, 0.0, 0.95, &p).unwrap(), 0.475));
        assert_eq!(soc_update(0.4, 0.0, 0.0, &p).unwrap(), 0.4);
        assert!(soc_update(0.4, 1.0, 1.0, &p).is_err());
    }

    #[test]
    fn switching_cost_table() {
        use BatteryMode::*;
        let p = BatteryParams::<f64>::default();
        assert_eq!(switching_cost(Charge, Discharge, &p), 0.055);
        assert_eq!(switching_cost(Discharge, Charge, &p), 0.055);
        assert_eq!(switching_cost(Charge, Charge, &p), 0.0);
        assert_eq!(switching_cost(Discharge, Discharge, &p), 0.0);
        assert!(close(switching_cost(Discharge, Idle, &p), 0.0825));
        assert_eq!(switching_cost(Idle, Idle, &p), 0.0275);
        assert_eq!(switching_cost(Idle, Charge, &p), 0.055);
    }

    #[test]
    fn default_curve_lookups() {
        let c = BlcCurve::<f64>::default();
        assert_eq!(blc_eval(&c, 0.2).unwrap(), 9000.0);
        assert!((blc_eval(&c, 0.15).unwrap() - 12000.0).abs() < 1e-9);
        assert_eq!(blc_eval(&c, 0.9).unwrap(), 1600.0);
        assert!(blc_eval(&c, 0.95).is_err());
        assert!(close(dod_of(0.55), 0.45));
        assert_eq!(dod_of(1.0), 0.0);
        assert!(close(dod_of(0.2), 0.8));
    }

    #[test]
    fn curve_validation() {
        let mut pts: Vec<(f64, f64)> = BlcCurve::<f64>::default().points().to_vec();
        pts[3].1 = 7000.0;
        assert!(BlcCurve::new(pts.clone()).is_err());
        pts.pop();
        assert!(BlcCurve::new(pts).is_err());
    }

    #[test]
    fn curve_csv_round_trip() {
        let c = BlcCurve::<f64>::default();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"dod,cycles\n0.1,15000\n"));
        assert_eq!(BlcCurve::read_csv(&buf[..]).unwrap(), c);
        assert!(BlcCurve::<f64>::read_csv(&b"dod,cycles\n0.1,x\n"[..]).is_err());
    }

    #[test]
    fn lifespan_examples() {
        use BatteryMode::*;
        let c = BlcCurve::<f64>::default();
        // One 0.2-deep episode in 24 hours.
        let mut modes = vec![Idle; 24];
        let mut soc = vec![0.9; 24];
        modes[5] = Discharge;
        for s in soc.iter_mut().skip(5) {
            *s = 0.7;
        }
        let one = estimate_lifespan(0.9, &modes, &soc, &c).unwrap().years().unwrap();
        assert!((one - 9000.0 / 365.0).abs() < 1e-9);
        modes[10] = Discharge;
        soc[10] = 0.5;
        for s in soc.iter_mut().skip(11) {
            *s = 0.5;
        }
        let two = estimate_lifespan(0.9, &modes, &soc, &c).unwrap().years().unwrap();
        assert!((two - one / 2.0).abs() < 1e-9);
        assert_eq!(
            estimate_lifespan(0.5, &[Idle, Charge], &[0.5, 0.6], &c).unwrap(),
            Lifespan::NoCycling
        );
    }

    #[test]
    fn episodes_are_maximal_runs() {
        use BatteryMode::*;
        let m = [Discharge, Discharge, Idle, Discharge, Charge, Discharge];
        assert_eq!(discharge_episodes(&m), vec![(0, 1), (3, 3), (5, 5)]);
    }
}
