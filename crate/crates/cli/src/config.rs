//! Experiment configuration: one JSON document per run.

use perfdom::bogovskii::{LayoutSpec, SweepConfig};
use perfdom::clusterer::{delta_of_alpha, n_of_delta, ClusterParams};
use perfdom::cutoff::sigma;
use perfdom::geometry::{AxisBox, Dim, StarDomain};
use perfdom::sampler::{check_alpha, MarkDist, ProcessParams};
use perfdom::stochastic::{default_occupancy_domain, TrialConfig};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sample,
    Cluster,
    Occupancy,
    Separation,
    Slln,
    John,
    BogovskiiSweep,
    CutoffRate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::Cluster => "cluster",
            Experiment::Occupancy => "occupancy",
            Experiment::Separation => "separation",
            Experiment::Slln => "slln",
            Experiment::John => "john",
            Experiment::BogovskiiSweep => "bogovskii-sweep",
            Experiment::CutoffRate => "cutoff-rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig { experiment, params: Map::new(), seed: default_seed(), output_dir: None }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))
    }

    /// Typed parameters with defaults filled in and preconditions checked.
    pub fn resolve(&self) -> Result<Resolved> {
        let r = match self.experiment {
            Experiment::Sample => Resolved::Sample(typed::<SampleParams>(&self.params)?.resolve()?),
            Experiment::Cluster => Resolved::Cluster(typed::<ClusterRunParams>(&self.params)?.resolve()?),
            Experiment::Occupancy => Resolved::Occupancy(typed::<OccupancyParams>(&self.params)?.resolve(self.seed)?),
            Experiment::Separation => Resolved::Separation(typed::<SeparationParams>(&self.params)?.resolve(self.seed)?),
            Experiment::Slln => Resolved::Slln(typed::<SllnParams>(&self.params)?.resolve(self.seed)?),
            Experiment::John => Resolved::John(typed::<JohnParams>(&self.params)?.resolve()?),
            Experiment::BogovskiiSweep => Resolved::Sweep(typed::<SweepParams>(&self.params)?.resolve()?),
            Experiment::CutoffRate => Resolved::Cutoff(typed::<CutoffParams>(&self.params)?.resolve()?),
        };
        Ok(r)
    }

    /// The config with every parameter spelled out, as echoed in the manifest.
    pub fn resolved_echo(&self, r: &Resolved) -> ExperimentConfig {
        let params = match r {
            Resolved::Sample(p) => to_map(p),
            Resolved::Cluster(p) => to_map(p),
            Resolved::Occupancy(p) => to_map(p),
            Resolved::Separation(p) => to_map(p),
            Resolved::Slln(p) => to_map(p),
            Resolved::John(p) => to_map(p),
            Resolved::Sweep(p) => to_map(p),
            Resolved::Cutoff(p) => to_map(p),
        };
        ExperimentConfig { params, ..self.clone() }
    }
}

fn typed<T: DeserializeOwned>(params: &Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(params.clone())).map_err(|e| ConfigError::Malformed(e.to_string()))
}

fn to_map<T: Serialize>(p: &T) -> Map<String, Value> {
    match serde_json::to_value(p) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn invalid<E: std::fmt::Display>(e: E) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

fn dim(d: usize) -> Result<Dim> {
    Dim::new(d).map_err(invalid)
}

fn domain_or(d: Dim, domain: Option<StarDomain>, fallback: impl FnOnce() -> StarDomain) -> Result<StarDomain> {
    let dom = domain.unwrap_or_else(fallback);
    dom.validate().map_err(invalid)?;
    if dom.dim() != d {
        return Err(ConfigError::Invalid(format!("domain dimension {} differs from dim {}", dom.dim().get(), d.get())));
    }
    Ok(dom)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("eps must lie in (0, 1), got {eps}")))
    }
}

fn check_ladder(l: &[f64]) -> Result<()> {
    if l.is_empty() {
        return Err(ConfigError::Invalid("eps ladder is empty".into()));
    }
    for &e in l {
        check_eps(e)?;
    }
    if l.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ConfigError::Invalid("eps ladder must be strictly decreasing".into()));
    }
    Ok(())
}

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

fn cube_domain(d: Dim, half: f64) -> StarDomain {
    StarDomain::Box { aabb: AxisBox::cube(d, -half, half).expect("valid cube") }
}

#[derive(Debug, Clone)]
pub enum Resolved {
    Sample(SampleParams),
    Cluster(ClusterRunParams),
    Occupancy(OccupancyParams),
    Separation(SeparationParams),
    Slln(SllnParams),
    John(JohnParams),
    Sweep(SweepParams),
    Cutoff(CutoffParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleParams {
    pub dim: usize,
    pub lambda: f64,
    pub marks: MarkDist,
    pub domain: Option<StarDomain>,
    pub eps: f64,
    pub alpha: f64,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams { dim: 2, lambda: 1.0, marks: MarkDist::Uniform { a: 0.0, b: 1.0 }, domain: None, eps: 0.1, alpha: 4.0 }
    }
}

impl SampleParams {
    fn resolve(mut self) -> Result<Self> {
        let d = dim(self.dim)?;
        self.domain = Some(domain_or(d, self.domain, || StarDomain::unit_ball(d))?);
        ProcessParams { intensity: self.lambda, marks: self.marks, seed: 0 }.validate().map_err(invalid)?;
        check_eps(self.eps)?;
        check_alpha(self.alpha, d).map_err(invalid)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterRunParams {
    pub dim: usize,
    pub lambda: f64,
    pub marks: MarkDist,
    pub domain: Option<StarDomain>,
    pub alpha: f64,
    pub kappa: f64,
    /// Runs every ε on one master realization.
    pub eps_ladder: Vec<f64>,
}

impl Default for ClusterRunParams {
    fn default() -> Self {
        ClusterRunParams {
            dim: 3,
            lambda: 50.0,
            marks: MarkDist::Uniform { a: 0.0, b: 1.0 },
            domain: None,
            alpha: 4.0,
            kappa: 1.5,
            eps_ladder: vec![0.05],
        }
    }
}

impl ClusterRunParams {
    fn resolve(mut self) -> Result<Self> {
        let d = dim(self.dim)?;
        self.domain = Some(domain_or(d, self.domain, || cube_domain(d, 0.25))?);
        ProcessParams { intensity: self.lambda, marks: self.marks, seed: 0 }.validate().map_err(invalid)?;
        check_alpha(self.alpha, d).map_err(invalid)?;
        check_ladder(&self.eps_ladder)?;
        for &e in &self.eps_ladder {
            ClusterParams::new(d, e, self.alpha, self.kappa).map_err(invalid)?;
        }
        Ok(self)
    }

    pub fn cluster_params(&self, eps: f64) -> ClusterParams {
        ClusterParams::new(Dim::new(self.dim).expect("validated"), eps, self.alpha, self.kappa).expect("validated")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupancyParams {
    pub dim: usize,
    pub lambda: f64,
    pub delta: f64,
    pub domain: Option<StarDomain>,
    pub trials: usize,
    pub eps_ladder: Vec<f64>,
    pub confidence: f64,
    /// Replaces `2 + ⌈1/δ⌉`.
    pub n1: Option<usize>,
    /// Also scan cubes at arbitrary positions.
    pub any_cube: bool,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        OccupancyParams {
            dim: 2,
            lambda: 20.0,
            delta: 1.0,
            domain: None,
            trials: 10_000,
            eps_ladder: dyadic(5, 8),
            confidence: 0.95,
            n1: None,
            any_cube: false,
        }
    }
}

impl OccupancyParams {
    fn resolve(mut self, seed: u64) -> Result<Self> {
        let d = dim(self.dim)?;
        self.domain = Some(domain_or(d, self.domain, || default_occupancy_domain(d))?);
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError::Invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(ConfigError::Invalid(format!("delta must be positive, got {}", self.delta)));
        }
        self.trial_config(seed).validate().map_err(invalid)?;
        Ok(self)
    }

    pub fn trial_config(&self, seed: u64) -> TrialConfig {
        TrialConfig { trials: self.trials, seed, eps_ladder: self.eps_ladder.clone(), confidence: self.confidence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationParams {
    pub dim: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub tau: f64,
    pub domain: Option<StarDomain>,
    pub trials: usize,
    pub eps_ladder: Vec<f64>,
    pub confidence: f64,
}

impl Default for SeparationParams {
    fn default() -> Self {
        SeparationParams {
            dim: 2,
            lambda: 0.5,
            kappa: 1.5,
            tau: 1.0,
            domain: None,
            trials: 2_000,
            eps_ladder: dyadic(4, 7),
            confidence: 0.95,
        }
    }
}

impl SeparationParams {
    fn resolve(mut self, seed: u64) -> Result<Self> {
        let d = dim(self.dim)?;
        self.domain = Some(domain_or(d, self.domain, || StarDomain::unit_ball(d))?);
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError::Invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.kappa > 1.0) {
            return Err(ConfigError::Invalid(format!("kappa must exceed 1, got {}", self.kappa)));
        }
        if !(self.tau >= 1.0) {
            return Err(ConfigError::Invalid(format!("tau must be at least 1, got {}", self.tau)));
        }
        self.trial_config(seed).validate().map_err(invalid)?;
        Ok(self)
    }

    pub fn trial_config(&self, seed: u64) -> TrialConfig {
        TrialConfig { trials: self.trials, seed, eps_ladder: self.eps_ladder.clone(), confidence: self.confidence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SllnParams {
    pub dim: usize,
    pub lambda: f64,
    pub marks: MarkDist,
    pub domain: Option<StarDomain>,
    /// Moment order of the radius sum.
    pub moment: f64,
    pub trials: usize,
    pub eps_ladder: Vec<f64>,
}

impl Default for SllnParams {
    fn default() -> Self {
        SllnParams {
            dim: 2,
            lambda: 5.0,
            marks: MarkDist::Uniform { a: 0.0, b: 1.0 },
            domain: None,
            moment: 3.0,
            trials: 200,
            eps_ladder: dyadic(4, 6),
        }
    }
}

impl SllnParams {
    fn resolve(mut self, seed: u64) -> Result<Self> {
        let d = dim(self.dim)?;
        self.domain = Some(domain_or(d, self.domain, || cube_domain(d, 1.0))?);
        ProcessParams { intensity: self.lambda, marks: self.marks, seed: 0 }.validate().map_err(invalid)?;
        if !(self.moment >= 0.0 && self.moment.is_finite()) {
            return Err(ConfigError::Invalid(format!("moment order must be non-negative, got {}", self.moment)));
        }
        self.trial_config(seed).validate().map_err(invalid)?;
        Ok(self)
    }

    pub fn trial_config(&self, seed: u64) -> TrialConfig {
        TrialConfig { trials: self.trials, seed, eps_ladder: self.eps_ladder.clone(), confidence: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JohnParams {
    pub dim: usize,
    pub alpha: f64,
    pub kappa: f64,
    /// Box capacity; defaults to the capacity implied by α.
    pub n: Option<usize>,
    pub samples: usize,
    pub eps_ladder: Vec<f64>,
}

impl Default for JohnParams {
    fn default() -> Self {
        JohnParams { dim: 3, alpha: 4.0, kappa: 4.0 / 3.0, n: None, samples: 1000, eps_ladder: vec![0.2, 0.1, 0.05] }
    }
}

impl JohnParams {
    fn resolve(mut self) -> Result<Self> {
        let d = dim(self.dim)?;
        check_alpha(self.alpha, d).map_err(invalid)?;
        check_ladder(&self.eps_ladder)?;
        if !(self.kappa > 1.0) {
            return Err(ConfigError::Invalid(format!("kappa must exceed 1, got {}", self.kappa)));
        }
        if self.n.is_none() {
            self.n = Some(n_of_delta(delta_of_alpha(self.alpha, d), d).map_err(invalid)?);
        }
        if self.n == Some(0) {
            return Err(ConfigError::Invalid("n must be positive".into()));
        }
        if self.samples == 0 {
            return Err(ConfigError::Invalid("samples must be positive".into()));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub eps_ladder: Vec<f64>,
    pub alpha: f64,
    pub q: f64,
    pub probes: usize,
    pub power_steps: usize,
    pub cells_per_radius: f64,
    pub layout: LayoutSpec,
}

impl Default for SweepParams {
    fn default() -> Self {
        let c = SweepConfig::default();
        SweepParams {
            eps_ladder: c.eps_ladder,
            alpha: c.alpha,
            q: c.q,
            probes: c.probes,
            power_steps: c.power_steps,
            cells_per_radius: c.cells_per_radius,
            layout: c.layout,
        }
    }
}

impl SweepParams {
    fn resolve(self) -> Result<Self> {
        check_ladder(&self.eps_ladder)?;
        check_alpha(self.alpha, self.layout.dim).map_err(invalid)?;
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(ConfigError::Invalid(format!("q must exceed 1, got {}", self.q)));
        }
        if self.probes == 0 {
            return Err(ConfigError::Invalid("probes must be positive".into()));
        }
        if !(self.cells_per_radius >= 1.5) {
            return Err(ConfigError::Invalid(format!("cells_per_radius must be at least 1.5, got {}", self.cells_per_radius)));
        }
        let l = &self.layout;
        if l.n == 0 || l.boxes == 0 || l.points_per_box == 0 || l.points_per_box > l.n {
            return Err(ConfigError::Invalid("layout needs 1 ≤ points_per_box ≤ n and at least one box".into()));
        }
        if !(l.mark_lo > 0.0 && l.mark_lo <= l.mark_hi) {
            return Err(ConfigError::Invalid("layout marks need 0 < mark_lo ≤ mark_hi".into()));
        }
        Ok(self)
    }

    pub fn sweep_config(&self, seed: u64) -> SweepConfig {
        SweepConfig {
            eps_ladder: self.eps_ladder.clone(),
            alpha: self.alpha,
            q: self.q,
            probes: self.probes,
            power_steps: self.power_steps,
            cells_per_radius: self.cells_per_radius,
            layout: self.layout.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffParams {
    pub dim: usize,
    pub lambda: f64,
    pub marks: MarkDist,
    pub domain: Option<StarDomain>,
    pub alpha: f64,
    pub r: f64,
    pub eps_ladder: Vec<f64>,
    pub cells_per_ramp: f64,
}

impl Default for CutoffParams {
    fn default() -> Self {
        CutoffParams {
            dim: 3,
            lambda: 0.02,
            marks: MarkDist::Uniform { a: 0.0, b: 1.0 },
            domain: None,
            alpha: 4.0,
            r: 2.0,
            eps_ladder: vec![0.2, 0.14, 0.1],
            cells_per_ramp: 3.0,
        }
    }
}

impl CutoffParams {
    fn resolve(mut self) -> Result<Self> {
        let d = dim(self.dim)?;
        self.domain = Some(domain_or(d, self.domain, || StarDomain::Ball { dim: d, radius: 4.0 })?);
        ProcessParams { intensity: self.lambda, marks: self.marks, seed: 0 }.validate().map_err(invalid)?;
        check_alpha(self.alpha, d).map_err(invalid)?;
        sigma(d, self.r, self.alpha).map_err(invalid)?;
        check_ladder(&self.eps_ladder)?;
        if self.eps_ladder.len() < 3 {
            return Err(ConfigError::Invalid("the rate fit needs at least 3 ladder points".into()));
        }
        if !(self.cells_per_ramp >= 3.0) {
            return Err(ConfigError::Invalid(format!("cells_per_ramp must be at least 3, got {}", self.cells_per_ramp)));
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn config_round_trips_through_json() {
        let mut c = ExperimentConfig::new(Experiment::CutoffRate);
        c.params.insert("alpha".into(), json!(4.0));
        c.params.insert("eps_ladder".into(), json!([0.2, 0.14, 0.1]));
        c.output_dir = Some("out".into());
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        let r = c.resolve().unwrap();
        let echo = c.resolved_echo(&r);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&echo).unwrap()).unwrap();
        assert_eq!(back, echo);
        // The echo resolves to the same parameters.
        assert_eq!(format!("{:?}", back.resolve().unwrap()), format!("{r:?}"));
    }

    #[test]
    fn every_experiment_resolves_with_defaults() {
        for e in [
            Experiment::Sample,
            Experiment::Cluster,
            Experiment::Occupancy,
            Experiment::Separation,
            Experiment::Slln,
            Experiment::John,
            Experiment::BogovskiiSweep,
            Experiment::CutoffRate,
        ] {
            let c = ExperimentConfig::new(e);
            assert!(c.resolve().is_ok(), "{}", e.name());
            let text = format!("{{\"experiment\":\"{}\"}}", e.name());
            assert_eq!(ExperimentConfig::from_json(&text).unwrap().experiment, e);
        }
    }

    #[test]
    fn unknown_keys_and_bad_types_are_malformed() {
        assert!(matches!(ExperimentConfig::from_json("{\"experiment\":\"cluster\",\"bogus\":1}"), Err(ConfigError::Malformed(_))));
        assert!(matches!(ExperimentConfig::from_json("{\"experiment\":\"nope\"}"), Err(ConfigError::Malformed(_))));
        let c = ExperimentConfig::from_json("{\"experiment\":\"cluster\",\"params\":{\"lamda\":3}}").unwrap();
        assert!(matches!(c.resolve(), Err(ConfigError::Malformed(_))));
        let c = ExperimentConfig::from_json("{\"experiment\":\"cluster\",\"params\":{\"lambda\":\"x\"}}").unwrap();
        assert!(matches!(c.resolve(), Err(ConfigError::Malformed(_))));
    }

    #[test]
    fn preconditions_are_reported() {
        let bad = |e: Experiment, k: &str, v: Value| {
            let mut c = ExperimentConfig::new(e);
            c.params.insert(k.into(), v);
            match c.resolve() {
                Err(ConfigError::Invalid(m)) => m,
                other => panic!("{k}: {other:?}"),
            }
        };
        assert!(bad(Experiment::Cluster, "lambda", json!(-1.0)).contains("intensity"));
        assert!(bad(Experiment::Cluster, "kappa", json!(3.0)).contains("kappa"));
        assert!(bad(Experiment::Cluster, "dim", json!(4)).contains("dimension"));
        assert!(bad(Experiment::CutoffRate, "r", json!(3.5)).contains("inadmissible"));
        assert!(bad(Experiment::Occupancy, "trials", json!(10)).contains("100 trials"));
        assert!(bad(Experiment::Slln, "eps_ladder", json!([0.1, 0.2])).contains("decreasing"));
        assert!(bad(Experiment::Sample, "alpha", json!(1.5)).contains("alpha"));
        assert!(bad(Experiment::BogovskiiSweep, "q", json!(1.0)).contains("q must"));
        assert!(bad(Experiment::John, "eps_ladder", json!([])).contains("empty"));
    }

    #[test]
    fn domain_dimension_must_match() {
        let mut c = ExperimentConfig::new(Experiment::Sample);
        c.params.insert("dim".into(), json!(3));
        c.params.insert("domain".into(), json!({"kind": "ball", "dim": 2, "radius": 1.0}));
        assert!(matches!(c.resolve(), Err(ConfigError::Invalid(_))));
    }
}
