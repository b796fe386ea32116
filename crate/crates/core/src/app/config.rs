//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::analytics::{Model, SolverSettings, StudyConfig};
use crate::equilibrium::Coupling;
use crate::scenario::{
    build_case_with, load_spot_csv, sample_spot, CaseBReading, DEFAULT_PENALTY,
};
use crate::{CaseName, CaseSpec, Error, Result, SpotObservation};

/// Deliberate defects for exercising the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// Evaluate consumer price stationarity with the price sign flipped.
    ConsumerKktSign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// `None` selects the bundled series.
    pub spot_csv: Option<PathBuf>,
    pub case: CaseName,
    pub case_b_reading: CaseBReading,
    pub a_mean: Option<Vec<f64>>,
    pub b_mean: Option<Vec<f64>>,
    pub delta_max: Option<Vec<f64>>,
    pub cv_spot: Option<f64>,
    pub cv_a: Option<f64>,
    pub cv_b: Option<f64>,
    pub model: Model,
    /// Scenario count for `simulate`; model-dependent when `None`.
    pub n_scenarios: Option<usize>,
    pub n_mpec: usize,
    pub n_equilibrium: usize,
    pub seed: u64,
    pub penalty_c: f64,
    pub settings: SolverSettings,
    pub output_dir: PathBuf,
    /// Cases run by `case-study`.
    pub cases: Vec<CaseName>,
    pub sensitivity_counts: Vec<usize>,
    pub sensitivity_cvs: Vec<f64>,
    pub sensitivity_penalties: Vec<f64>,
    pub validate_instances: usize,
    pub validate_grid_step: f64,
    pub validate_m_dual: f64,
    pub inject_fault: Fault,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spot_csv: None,
            case: CaseName::Bm,
            case_b_reading: CaseBReading::Literal,
            a_mean: None,
            b_mean: None,
            delta_max: None,
            cv_spot: None,
            cv_a: None,
            cv_b: None,
            model: Model::Mpec,
            n_scenarios: None,
            n_mpec: 30,
            n_equilibrium: 300,
            seed: 0,
            penalty_c: DEFAULT_PENALTY,
            settings: SolverSettings::default(),
            output_dir: PathBuf::from("out"),
            cases: CaseName::STUDY_CASES.to_vec(),
            sensitivity_counts: vec![10, 15, 20, 30],
            sensitivity_cvs: vec![0.015, 0.030, 0.035],
            sensitivity_penalties: vec![500.0, 1000.0, 3000.0],
            validate_instances: 20,
            validate_grid_step: 1e-4,
            validate_m_dual: 1e-3,
            inject_fault: Fault::None,
        }
    }
}

/// Every key `set` understands.
pub const KEYS: &[&str] = &[
    "spot_csv",
    "case",
    "case_b_reading",
    "a_mean",
    "b_mean",
    "delta_max",
    "cv_spot",
    "cv_a",
    "cv_b",
    "model",
    "n_scenarios",
    "n_mpec",
    "n_equilibrium",
    "seed",
    "penalty_c",
    "output_dir",
    "cases",
    "multistart",
    "mpec_tolerance",
    "mpec_max_evals",
    "mpec_level_grid",
    "p_max",
    "m_primal",
    "m_dual",
    "bigm_margin",
    "bigm_auto_double",
    "bigm_max_doublings",
    "node_budget",
    "coupling",
    "nlp_tolerance",
    "nlp_starts",
    "nlp_max_iterations",
    "sensitivity_counts",
    "sensitivity_cvs",
    "sensitivity_penalties",
    "validate_instances",
    "validate_grid_step",
    "validate_m_dual",
    "inject_fault",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| Error::Config(format!("key `{key}`: cannot parse `{v}`: {e}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let out: Vec<T> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Config(format!("key `{key}`: empty list")));
    }
    Ok(out)
}

fn positive(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse(key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Config(format!("key `{key}`: must be positive, got {v}")));
    }
    Ok(x)
}

fn nonneg(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse(key, v)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Config(format!("key `{key}`: must be nonnegative, got {v}")));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize> {
    let n: usize = parse(key, v)?;
    if n == 0 {
        return Err(Error::Config(format!("key `{key}`: must be at least 1")));
    }
    Ok(n)
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("key `{key}`: expected true or false, got `{v}`"))),
    }
}

fn keyed<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) if m.starts_with("key `") => Error::Config(m),
        e => Error::Config(format!("key `{key}`: {e}")),
    })
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let key = key.trim();
        let st = &mut self.settings;
        match key {
            "spot_csv" => {
                self.spot_csv = match v {
                    "" | "bundled" => None,
                    p => {
                        let p = PathBuf::from(p);
                        if !p.is_file() {
                            return Err(Error::Config(format!(
                                "key `spot_csv`: {} does not exist",
                                p.display()
                            )));
                        }
                        Some(p)
                    }
                }
            }
            "case" => self.case = keyed(key, v.parse())?,
            "case_b_reading" => {
                self.case_b_reading = match v.to_ascii_lowercase().as_str() {
                    "literal" => CaseBReading::Literal,
                    "scaled35" | "scaled" => CaseBReading::Scaled35,
                    _ => {
                        return Err(Error::Config(format!(
                            "key `case_b_reading`: expected literal or scaled35, got `{v}`"
                        )))
                    }
                }
            }
            "a_mean" => self.a_mean = Some(list(key, v)?),
            "b_mean" => self.b_mean = Some(list(key, v)?),
            "delta_max" => self.delta_max = Some(list(key, v)?),
            "cv_spot" => self.cv_spot = Some(nonneg(key, v)?),
            "cv_a" => self.cv_a = Some(nonneg(key, v)?),
            "cv_b" => self.cv_b = Some(nonneg(key, v)?),
            "model" => self.model = keyed(key, v.parse())?,
            "n_scenarios" => self.n_scenarios = Some(count(key, v)?),
            "n_mpec" => self.n_mpec = count(key, v)?,
            "n_equilibrium" => self.n_equilibrium = count(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "penalty_c" => self.penalty_c = positive(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "cases" => {
                self.cases = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| keyed(key, s.parse()))
                    .collect::<Result<_>>()?;
                if self.cases.is_empty() {
                    return Err(Error::Config("key `cases`: empty list".into()));
                }
            }
            "multistart" => st.mpec.multistart_count = count(key, v)?,
            "mpec_tolerance" => st.mpec.tolerance = positive(key, v)?,
            "mpec_max_evals" => st.mpec.max_evals_per_start = count(key, v)?,
            "mpec_level_grid" => st.mpec.level_grid = parse(key, v)?,
            "p_max" => st.mpec.p_max = Some(positive(key, v)?),
            "m_primal" => {
                let m = positive(key, v)?;
                st.equilibrium.big_m.m_primal = Some(m);
                st.nlp.big_m.m_primal = Some(m);
            }
            "m_dual" => {
                let m = positive(key, v)?;
                st.equilibrium.big_m.m_dual = Some(m);
                st.nlp.big_m.m_dual = Some(m);
            }
            "bigm_margin" => {
                let m = nonneg(key, v)?;
                if m >= 1.0 {
                    return Err(Error::Config("key `bigm_margin`: must be below 1".into()));
                }
                st.equilibrium.big_m.validation_margin = m;
                st.nlp.big_m.validation_margin = m;
            }
            "bigm_auto_double" => {
                let b = flag(key, v)?;
                st.equilibrium.big_m.auto_double = b;
                st.nlp.big_m.auto_double = b;
            }
            "bigm_max_doublings" => {
                let n: u32 = parse(key, v)?;
                st.equilibrium.big_m.max_doublings = n;
                st.nlp.big_m.max_doublings = n;
            }
            "node_budget" => st.equilibrium.node_budget = count(key, v)? as u64,
            "coupling" => {
                let c: Coupling = keyed(key, v.parse())?;
                st.equilibrium.coupling = c;
                st.nlp.coupling = c;
            }
            "nlp_tolerance" => st.nlp.tolerance = positive(key, v)?,
            "nlp_starts" => st.nlp.starts = count(key, v)?,
            "nlp_max_iterations" => st.nlp.max_iterations = count(key, v)?,
            "sensitivity_counts" => {
                self.sensitivity_counts = list(key, v)?;
                if self.sensitivity_counts.contains(&0) {
                    return Err(Error::Config("key `sensitivity_counts`: counts must be at least 1".into()));
                }
            }
            "sensitivity_cvs" => {
                self.sensitivity_cvs = list(key, v)?;
                for c in &self.sensitivity_cvs {
                    nonneg(key, &c.to_string())?;
                }
            }
            "sensitivity_penalties" => {
                self.sensitivity_penalties = list(key, v)?;
                for c in &self.sensitivity_penalties {
                    positive(key, &c.to_string())?;
                }
            }
            "validate_instances" => self.validate_instances = count(key, v)?,
            "validate_grid_step" => self.validate_grid_step = positive(key, v)?,
            "validate_m_dual" => self.validate_m_dual = positive(key, v)?,
            "inject_fault" => {
                self.inject_fault = match v.to_ascii_lowercase().as_str() {
                    "none" | "" => Fault::None,
                    "consumer-kkt-sign" => Fault::ConsumerKktSign,
                    _ => {
                        return Err(Error::Config(format!(
                            "key `inject_fault`: expected none or consumer-kkt-sign, got `{v}`"
                        )))
                    }
                }
            }
            other => {
                return Err(Error::Config(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k, v)
    }

    /// Applies every line of a configuration file. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got `{line}`", i + 1))
            })?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_str(&text)
    }

    pub fn spot(&self) -> Result<Vec<SpotObservation>> {
        match &self.spot_csv {
            Some(p) => load_spot_csv(p),
            None => Ok(sample_spot()),
        }
    }

    /// The case to simulate, with any coefficient overrides applied.
    pub fn case_spec(&self) -> Result<CaseSpec> {
        self.spec_for(self.case)
    }

    pub fn spec_for(&self, name: CaseName) -> Result<CaseSpec> {
        let mut spec = if name == CaseName::Custom {
            let (Some(a), Some(b), Some(d)) = (&self.a_mean, &self.b_mean, &self.delta_max) else {
                return Err(Error::Config(
                    "key `case`: custom needs a_mean, b_mean and delta_max".into(),
                ));
            };
            build_case_with(CaseName::Bm, self.case_b_reading).map(|mut c| {
                c.name = CaseName::Custom;
                c.a_mean = a.clone();
                c.b_mean = b.clone();
                c.delta_max = d.clone();
                c
            })?
        } else {
            let mut c = build_case_with(name, self.case_b_reading)?;
            if name == self.case {
                if let Some(a) = &self.a_mean {
                    c.a_mean = a.clone();
                }
                if let Some(b) = &self.b_mean {
                    c.b_mean = b.clone();
                }
                if let Some(d) = &self.delta_max {
                    c.delta_max = d.clone();
                }
            }
            c
        };
        if let Some(v) = self.cv_spot {
            spec.cv_spot = v;
        }
        if let Some(v) = self.cv_a {
            spec.cv_a = v;
        }
        if let Some(v) = self.cv_b {
            spec.cv_b = v;
        }
        spec.validate().map_err(|e| Error::Config(format!("case: {}", strip(e))))?;
        Ok(spec)
    }

    pub fn simulate_scenarios(&self) -> usize {
        self.n_scenarios.unwrap_or(match self.model {
            Model::Mpec => self.n_mpec,
            _ => self.n_equilibrium,
        })
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            n_mpec: self.n_mpec,
            n_equilibrium: self.n_equilibrium,
            seed: self.seed,
            penalty_c: Some(self.penalty_c),
            equilibrium_model: if self.model == Model::EqNlp {
                Model::EqNlp
            } else {
                Model::EqMilp
            },
            paired: true,
            settings: self.settings_seeded(),
        }
    }

    /// Solver settings with the run seed threaded into the randomised parts.
    pub fn settings_seeded(&self) -> SolverSettings {
        let mut s = self.settings.clone();
        s.mpec.seed = self.seed;
        s.nlp.seed = self.seed;
        s
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        e => e.to_string(),
    }
}
