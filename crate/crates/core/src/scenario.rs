//! Spot-market input data, consumer cases and stochastic scenario generation.
//!
//! Scenarios are drawn scenario-major: for each scenario the hourly spot
//! prices come first, then the utility intercepts and slopes consumer by
//! consumer. Because of that order, the first `k` scenarios of a set generated
//! with a given seed are exactly the `k`-scenario set for the same seed.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The bundled 24-hour sample in the day-ahead CSV shape.
pub const SAMPLE_EEX_CSV: &str = include_str!("../data/sample_eex.csv");

/// Default imbalance penalty, currency per kWh.
pub const DEFAULT_PENALTY: f64 = 500.0;
pub const DEFAULT_CV_SPOT: f64 = 0.015;
pub const DEFAULT_CV_A: f64 = 0.013;
pub const DEFAULT_CV_B: f64 = 0.0013;
/// Floor applied to sampled utility slopes.
pub const B_FLOOR: f64 = 1e-6;

const MAX_REDRAWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotObservation {
    pub hour: usize,
    pub price: f64,
    pub quantity: f64,
}

/// Reads a `hour,price_eur_per_kwh,quantity_kwh` file.
pub fn load_spot_csv(path: impl AsRef<Path>) -> Result<Vec<SpotObservation>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spot_csv(file)
}

/// Observations from the bundled sample.
pub fn sample_spot() -> Vec<SpotObservation> {
    parse_spot_csv(SAMPLE_EEX_CSV.as_bytes()).expect("bundled sample is valid")
}

pub fn parse_spot_csv<R: Read>(reader: R) -> Result<Vec<SpotObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedRow {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["hour", "price_eur_per_kwh", "quantity_kwh"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::MalformedRow {
            row: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut out: Vec<SpotObservation> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let field = |k: usize, name: &str| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedRow {
                    row,
                    message: format!("{name} `{}` is not a number", &record[k]),
                })
        };
        let hour: usize = record[0].parse().map_err(|_| Error::MalformedRow {
            row,
            message: format!("hour `{}` is not a positive integer", &record[0]),
        })?;
        if hour == 0 {
            return Err(Error::MalformedRow {
                row,
                message: "hours are numbered from 1".into(),
            });
        }
        let price = field(1, "price")?;
        if price < 0.0 {
            return Err(Error::MalformedRow {
                row,
                message: format!("negative price {price}"),
            });
        }
        let quantity = field(2, "quantity")?;
        if out.iter().any(|o| o.hour == hour) {
            return Err(Error::DuplicateHour { hour, row });
        }
        out.push(SpotObservation {
            hour,
            price,
            quantity,
        });
    }

    if out.is_empty() {
        return Err(Error::NoObservations);
    }
    out.sort_by_key(|o| o.hour);
    if let Some(gap) = out.iter().enumerate().find(|(i, o)| o.hour != i + 1) {
        return Err(Error::InvalidSpot(format!(
            "hours must cover 1..{} without gaps; hour {} is missing",
            out.len(),
            gap.0 + 1
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseName {
    #[serde(rename = "BM")]
    Bm,
    A,
    B,
    Flexibility,
    Custom,
}

impl CaseName {
    pub const STUDY_CASES: [CaseName; 4] =
        [CaseName::Bm, CaseName::A, CaseName::B, CaseName::Flexibility];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::Bm => "BM",
            CaseName::A => "A",
            CaseName::B => "B",
            CaseName::Flexibility => "Flexibility",
            CaseName::Custom => "Custom",
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bm" => Ok(CaseName::Bm),
            "a" => Ok(CaseName::A),
            "b" => Ok(CaseName::B),
            "flexibility" | "flex" => Ok(CaseName::Flexibility),
            "custom" => Ok(CaseName::Custom),
            _ => Err(Error::UnknownCase(s.to_string())),
        }
    }
}

/// How the Case B slope row is read: the printed values, or a uniform 35%
/// increase over the benchmark slopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CaseBReading {
    #[default]
    Literal,
    Scaled35,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: CaseName,
    pub a_mean: Vec<f64>,
    pub b_mean: Vec<f64>,
    pub delta_max: Vec<f64>,
    pub cv_spot: f64,
    pub cv_a: f64,
    pub cv_b: f64,
}

const BM_A: [f64; 3] = [0.0291, 0.0302, 0.0271];
const BM_B: [f64; 3] = [0.0013, 0.0015, 0.0014];
const BM_DELTA: [f64; 3] = [2.50, 1.40, 2.00];

impl CaseSpec {
    pub fn new(
        name: CaseName,
        a_mean: Vec<f64>,
        b_mean: Vec<f64>,
        delta_max: Vec<f64>,
        cv_spot: f64,
        cv_a: f64,
        cv_b: f64,
    ) -> Result<Self> {
        let spec = CaseSpec {
            name,
            a_mean,
            b_mean,
            delta_max,
            cv_spot,
            cv_a,
            cv_b,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.a_mean.len();
        if j == 0 {
            return Err(Error::InvalidCase("at least one consumer is required".into()));
        }
        if self.b_mean.len() != j || self.delta_max.len() != j {
            return Err(Error::InvalidCase(format!(
                "a_mean, b_mean and delta_max must have equal lengths ({}, {}, {})",
                j,
                self.b_mean.len(),
                self.delta_max.len()
            )));
        }
        if self.a_mean.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidCase("a_mean must be finite".into()));
        }
        if self.b_mean.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidCase("b_mean must be positive".into()));
        }
        if self.delta_max.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidCase("delta_max must be nonnegative".into()));
        }
        for (cv, name) in [(self.cv_spot, "cv_spot"), (self.cv_a, "cv_a"), (self.cv_b, "cv_b")] {
            if !(cv >= 0.0 && cv.is_finite()) {
                return Err(Error::InvalidCase(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn consumers(&self) -> usize {
        self.a_mean.len()
    }
}

/// One of the four published cases with the default coefficients of variation.
pub fn build_case(name: &str) -> Result<CaseSpec> {
    build_case_with(name.parse()?, CaseBReading::Literal)
}

pub fn build_case_with(name: CaseName, b_reading: CaseBReading) -> Result<CaseSpec> {
    let (a, b, d) = match name {
        CaseName::Bm => (BM_A, BM_B, BM_DELTA),
        CaseName::A => ([0.035, 0.0375, 0.0341], BM_B, BM_DELTA),
        CaseName::B => match b_reading {
            CaseBReading::Literal => (BM_A, [0.0017, 0.020, 0.0019], BM_DELTA),
            CaseBReading::Scaled35 => (BM_A, BM_B.map(|b| b * 1.35), BM_DELTA),
        },
        CaseName::Flexibility => (BM_A, BM_B, [5.00, 2.40, 3.50]),
        CaseName::Custom => {
            return Err(Error::InvalidCase(
                "a custom case needs explicit a_mean, b_mean and delta_max".into(),
            ))
        }
    };
    CaseSpec::new(
        name,
        a.to_vec(),
        b.to_vec(),
        d.to_vec(),
        DEFAULT_CV_SPOT,
        DEFAULT_CV_A,
        DEFAULT_CV_B,
    )
}

/// The stochastic instance shared by every model.
///
/// Storage is flat: spot prices at `w * T + t`, utility coefficients at
/// `(j * Ω + w) * T + t`, so each consumer-scenario slice is contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    hours: usize,
    consumers: usize,
    scenarios: usize,
    prob: Vec<f64>,
    spot: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    delta_max: Vec<f64>,
    penalty_c: f64,
    spot_mean: Vec<f64>,
}

impl ScenarioSet {
    /// Builds a set from nested arrays indexed as `spot[t][w]`, `a[j][t][w]`,
    /// `b[j][t][w]`.
    pub fn from_nested(
        prob: Vec<f64>,
        spot: &[Vec<f64>],
        a: &[Vec<Vec<f64>>],
        b: &[Vec<Vec<f64>>],
        delta_max: Vec<f64>,
        penalty_c: f64,
    ) -> Result<Self> {
        let hours = spot.len();
        let scenarios = prob.len();
        let consumers = delta_max.len();
        let shape_err = |what: &str| Error::Shape(format!("{what} does not match T={hours}, J={consumers}, Ω={scenarios}"));
        if spot.iter().any(|r| r.len() != scenarios) {
            return Err(shape_err("spot"));
        }
        for (m, name) in [(a, "a"), (b, "b")] {
            if m.len() != consumers
                || m.iter().any(|rows| rows.len() != hours || rows.iter().any(|r| r.len() != scenarios))
            {
                return Err(shape_err(name));
            }
        }
        let mut flat_spot = vec![0.0; hours * scenarios];
        for (t, row) in spot.iter().enumerate() {
            for (w, &v) in row.iter().enumerate() {
                flat_spot[w * hours + t] = v;
            }
        }
        let mut flat_a = vec![0.0; consumers * scenarios * hours];
        let mut flat_b = flat_a.clone();
        for j in 0..consumers {
            for t in 0..hours {
                for w in 0..scenarios {
                    flat_a[(j * scenarios + w) * hours + t] = a[j][t][w];
                    flat_b[(j * scenarios + w) * hours + t] = b[j][t][w];
                }
            }
        }
        let spot_mean = (0..hours)
            .map(|t| (0..scenarios).map(|w| prob[w] * flat_spot[w * hours + t]).sum())
            .collect();
        let set = ScenarioSet {
            hours,
            consumers,
            scenarios,
            prob,
            spot: flat_spot,
            a: flat_a,
            b: flat_b,
            delta_max,
            penalty_c,
            spot_mean,
        };
        set.validate()?;
        Ok(set)
    }

    /// Single-scenario instance with the same coefficients every hour.
    pub fn deterministic(
        spot: &[f64],
        a: &[Vec<f64>],
        b: &[Vec<f64>],
        delta_max: Vec<f64>,
        penalty_c: f64,
    ) -> Result<Self> {
        let wrap = |m: &[Vec<f64>]| -> Vec<Vec<Vec<f64>>> {
            m.iter()
                .map(|row| row.iter().map(|&v| vec![v]).collect())
                .collect()
        };
        ScenarioSet::from_nested(
            vec![1.0],
            &spot.iter().map(|&p| vec![p]).collect::<Vec<_>>(),
            &wrap(a),
            &wrap(b),
            delta_max,
            penalty_c,
        )
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenarios(m));
        if self.hours == 0 || self.consumers == 0 || self.scenarios == 0 {
            return bad("T, J and Ω must all be at least 1".into());
        }
        if self.prob.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("scenario probabilities must be positive".into());
        }
        let total: f64 = self.prob.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("probabilities sum to {total}, not 1"));
        }
        if self.spot.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return bad("spot prices must be finite and nonnegative".into());
        }
        if self.a.iter().any(|v| !v.is_finite()) {
            return bad("utility intercepts must be finite".into());
        }
        if self.b.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad("utility slopes must be positive".into());
        }
        if self.delta_max.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return bad("delta_max must be nonnegative".into());
        }
        if !(self.penalty_c > 0.0 && self.penalty_c.is_finite()) {
            return bad("penalty C must be positive".into());
        }
        Ok(())
    }

    pub fn with_penalty(mut self, penalty_c: f64) -> Result<Self> {
        self.penalty_c = penalty_c;
        self.validate()?;
        Ok(self)
    }

    pub fn hours(&self) -> usize {
        self.hours
    }
    pub fn consumers(&self) -> usize {
        self.consumers
    }
    pub fn scenarios(&self) -> usize {
        self.scenarios
    }
    pub fn dims(&self) -> crate::Dims {
        crate::Dims::new(self.hours, self.consumers, self.scenarios)
    }
    pub fn prob(&self, w: usize) -> f64 {
        self.prob[w]
    }
    pub fn probs(&self) -> &[f64] {
        &self.prob
    }
    pub fn spot(&self, t: usize, w: usize) -> f64 {
        self.spot[w * self.hours + t]
    }
    /// Hourly spot prices of scenario `w`.
    pub fn spot_slice(&self, w: usize) -> &[f64] {
        &self.spot[w * self.hours..(w + 1) * self.hours]
    }
    pub fn a(&self, j: usize, t: usize, w: usize) -> f64 {
        self.a[(j * self.scenarios + w) * self.hours + t]
    }
    pub fn b(&self, j: usize, t: usize, w: usize) -> f64 {
        self.b[(j * self.scenarios + w) * self.hours + t]
    }
    pub fn a_slice(&self, j: usize, w: usize) -> &[f64] {
        let k = (j * self.scenarios + w) * self.hours;
        &self.a[k..k + self.hours]
    }
    pub fn b_slice(&self, j: usize, w: usize) -> &[f64] {
        let k = (j * self.scenarios + w) * self.hours;
        &self.b[k..k + self.hours]
    }
    pub fn delta_max(&self, j: usize) -> f64 {
        self.delta_max[j]
    }
    pub fn delta_maxes(&self) -> &[f64] {
        &self.delta_max
    }
    pub fn penalty_c(&self) -> f64 {
        self.penalty_c
    }
    /// Probability-weighted spot price per hour.
    pub fn spot_mean(&self) -> &[f64] {
        &self.spot_mean
    }
    pub fn max_spot(&self) -> f64 {
        self.spot.iter().copied().fold(0.0, f64::max)
    }

    /// True when buying on the spot market is dearer than paying the
    /// imbalance penalty somewhere, which flips the dispatch rule.
    pub fn penalty_below_spot(&self) -> bool {
        self.penalty_c < self.max_spot()
    }

    /// Σ_j max_{t,ω} a/b, the aggregate demand at a zero price.
    pub fn max_zero_price_demand(&self) -> f64 {
        (0..self.consumers)
            .map(|j| {
                (0..self.scenarios * self.hours)
                    .map(|k| {
                        let i = j * self.scenarios * self.hours + k;
                        (self.a[i] / self.b[i]).max(0.0)
                    })
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    /// Keeps only scenario `w`, with its original probability. The result no
    /// longer sums to one and is only meant for block-separable solvers.
    pub(crate) fn single_scenario_view(&self, w: usize) -> ScenarioSet {
        let mut a = Vec::with_capacity(self.consumers * self.hours);
        let mut b = Vec::with_capacity(self.consumers * self.hours);
        for j in 0..self.consumers {
            a.extend_from_slice(self.a_slice(j, w));
            b.extend_from_slice(self.b_slice(j, w));
        }
        ScenarioSet {
            hours: self.hours,
            consumers: self.consumers,
            scenarios: 1,
            prob: vec![self.prob[w]],
            spot: self.spot_slice(w).to_vec(),
            a,
            b,
            delta_max: self.delta_max.clone(),
            penalty_c: self.penalty_c,
            spot_mean: self.spot_slice(w).to_vec(),
        }
    }
}

/// Draws `n` equiprobable scenarios around the observed spot series and the
/// case means.
pub fn generate_scenarios(
    spot: &[SpotObservation],
    case: &CaseSpec,
    n: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(Error::Generation("the scenario count must be at least 1".into()));
    }
    if spot.is_empty() {
        return Err(Error::NoObservations);
    }
    case.validate()?;
    let hours = spot.len();
    let consumers = case.consumers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut draw = |mean: f64, cv: f64| -> Result<f64> {
        for _ in 0..MAX_REDRAWS {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = mean + cv * mean * z;
            if v.is_finite() {
                return Ok(v);
            }
        }
        Err(Error::Generation(format!(
            "no finite draw for mean {mean} after {MAX_REDRAWS} attempts"
        )))
    };

    let mut spot_tw = vec![vec![0.0; n]; hours];
    let mut a = vec![vec![vec![0.0; n]; hours]; consumers];
    let mut b = a.clone();
    for w in 0..n {
        for (t, obs) in spot.iter().enumerate() {
            spot_tw[t][w] = draw(obs.price, case.cv_spot)?.max(0.0);
        }
        for j in 0..consumers {
            for t in 0..hours {
                a[j][t][w] = draw(case.a_mean[j], case.cv_a)?;
                b[j][t][w] = draw(case.b_mean[j], case.cv_b)?.max(B_FLOOR);
            }
        }
    }
    let mut set = ScenarioSet::from_nested(
        vec![1.0 / n as f64; n],
        &spot_tw,
        &a,
        &b,
        case.delta_max.clone(),
        DEFAULT_PENALTY,
    )?;
    set.spot_mean = spot.iter().map(|o| o.price).collect();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sample_has_24_hours_in_range() {
        let obs = sample_spot();
        assert_eq!(obs.len(), 24);
        assert!(obs.iter().enumerate().all(|(i, o)| o.hour == i + 1));
        assert!(obs.iter().all(|o| (0.01..=0.06).contains(&o.price)));
    }

    #[test]
    fn header_only_is_rejected() {
        let err = parse_spot_csv("hour,price_eur_per_kwh,quantity_kwh\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NoObservations));
        assert_eq!(err.to_string(), "spot data: no observations");
    }

    #[test]
    fn duplicate_hour_is_rejected() {
        let csv = "hour,price_eur_per_kwh,quantity_kwh\n1,0.02,5\n2,0.03,5\n1,0.02,5\n";
        let err = parse_spot_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DuplicateHour { hour: 1, row: 4 }), "{err}");
    }

    #[test]
    fn malformed_rows_report_row_number() {
        let csv = "hour,price_eur_per_kwh,quantity_kwh\n1,0.02,5\n2,abc,5\n";
        match parse_spot_csv(csv.as_bytes()).unwrap_err() {
            Error::MalformedRow { row, .. } => assert_eq!(row, 3),
            e => panic!("unexpected {e}"),
        }
        let csv = "hour,price_eur_per_kwh,quantity_kwh\n1,-0.02,5\n";
        assert!(matches!(
            parse_spot_csv(csv.as_bytes()).unwrap_err(),
            Error::MalformedRow { row: 2, .. }
        ));
    }

    #[test]
    fn unsorted_rows_are_sorted_and_gaps_rejected() {
        let csv = "hour,price_eur_per_kwh,quantity_kwh\n2,0.03,1\n1,0.02,1\n";
        let obs = parse_spot_csv(csv.as_bytes()).unwrap();
        assert_eq!(obs[0].hour, 1);
        assert_eq!(obs[1].price, 0.03);
        let csv = "hour,price_eur_per_kwh,quantity_kwh\n1,0.03,1\n3,0.02,1\n";
        assert!(matches!(parse_spot_csv(csv.as_bytes()), Err(Error::InvalidSpot(_))));
    }

    #[test]
    fn published_cases() {
        let bm = build_case("BM").unwrap();
        assert_eq!(bm.a_mean, vec![0.0291, 0.0302, 0.0271]);
        assert_eq!(bm.b_mean, vec![0.0013, 0.0015, 0.0014]);
        assert_eq!(bm.delta_max, vec![2.50, 1.40, 2.00]);
        assert_eq!((bm.cv_spot, bm.cv_a, bm.cv_b), (0.015, 0.013, 0.0013));

        let flex = build_case("flexibility").unwrap();
        assert_eq!(flex.delta_max, vec![5.00, 2.40, 3.50]);
        assert_eq!(flex.a_mean, bm.a_mean);
        assert_eq!(flex.b_mean, bm.b_mean);

        let a = build_case("a").unwrap();
        assert_eq!(a.a_mean, vec![0.035, 0.0375, 0.0341]);
        assert_eq!(a.b_mean, bm.b_mean);
        assert_eq!(a.delta_max, bm.delta_max);

        let b = build_case("B").unwrap();
        assert_eq!(b.b_mean, vec![0.0017, 0.020, 0.0019]);
        let b35 = build_case_with(CaseName::B, CaseBReading::Scaled35).unwrap();
        assert!((b35.b_mean[1] - 0.002025).abs() < 1e-15);

        assert!(matches!(build_case("C"), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn zero_cv_reproduces_means() {
        let obs = sample_spot();
        let mut case = build_case("BM").unwrap();
        case.cv_spot = 0.0;
        case.cv_a = 0.0;
        case.cv_b = 0.0;
        let set = generate_scenarios(&obs, &case, 5, 3).unwrap();
        for w in 0..5 {
            for (t, o) in obs.iter().enumerate() {
                assert_eq!(set.spot(t, w), o.price);
            }
            assert_eq!(set.a(1, 4, w), 0.0302);
            assert_eq!(set.b(2, 7, w), 0.0014);
        }
    }

    #[test]
    fn single_scenario_has_unit_probability() {
        let set = generate_scenarios(&sample_spot(), &build_case("BM").unwrap(), 1, 0).unwrap();
        assert_eq!(set.probs(), &[1.0]);
        assert!(matches!(
            generate_scenarios(&sample_spot(), &build_case("BM").unwrap(), 0, 0),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn scenario_prefix_property() {
        let obs = sample_spot();
        let case = build_case("BM").unwrap();
        let small = generate_scenarios(&obs, &case, 10, 42).unwrap();
        let large = generate_scenarios(&obs, &case, 30, 42).unwrap();
        for w in 0..10 {
            assert_eq!(small.spot_slice(w), large.spot_slice(w));
            for j in 0..3 {
                assert_eq!(small.a_slice(j, w), large.a_slice(j, w));
                assert_eq!(small.b_slice(j, w), large.b_slice(j, w));
            }
        }
    }
}
