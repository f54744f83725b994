//! Experiment execution. Every experiment computes all of its artifacts in
//! memory first; nothing touches the output directory unless the run succeeds.

use crate::config::{
    ClusterRunParams, CutoffParams, ExperimentConfig, JohnParams, OccupancyParams, Resolved, SampleParams, SeparationParams,
    SllnParams, SweepParams,
};
use perfdom::bogovskii::{operator_norm_sweep, sweep_csv};
use perfdom::clusterer::{boxes_to_json, build_cluster_boxes, verify_cluster_properties, ClusterError};
use perfdom::cutoff::{cutoff_rate, rate_csv, RateConfig};
use perfdom::geometry::{Dim, StarDomain};
use perfdom::john::{estimate_john_constant, two_ball_scene, witness_cap};
use perfdom::sampler::{build_perforation, sample_marked_ppp, scaled_window, ProcessParams};
use perfdom::stochastic::{
    estimate_max_occupancy, estimate_separation_event, occupancy_csv, separation_csv, slln_csv, slln_estimate,
};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Failed(String),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

fn failed<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Failed(e.to_string())
}

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: &str, s: String) -> Self {
        Artifact { name: name.into(), bytes: s.into_bytes() }
    }

    fn json(name: &str, v: &Value) -> Self {
        let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
        s.push('\n');
        Artifact::text(name, s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    /// Per-ε notes such as skipped cluster runs.
    pub records: Value,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn execute(cfg: &ExperimentConfig, resolved: &Resolved) -> Result<Outcome, RunError> {
    let seed = cfg.seed;
    match resolved {
        Resolved::Sample(p) => run_sample(p, seed),
        Resolved::Cluster(p) => run_cluster(p, seed),
        Resolved::Occupancy(p) => run_occupancy(p, seed),
        Resolved::Separation(p) => run_separation(p, seed),
        Resolved::Slln(p) => run_slln(p, seed),
        Resolved::John(p) => run_john(p, seed),
        Resolved::Sweep(p) => run_sweep(p, seed),
        Resolved::Cutoff(p) => run_cutoff(p, seed),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    all_pass: bool,
    invariants: &'a [Check],
    records: &'a Value,
    artifacts: Vec<&'a str>,
    wall_time_s: f64,
}

/// Writes the artifacts followed by `manifest.json`.
pub fn write_outputs(dir: &Path, echo: &ExperimentConfig, out: &Outcome, wall_time_s: f64) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    for a in &out.artifacts {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
    }
    let m = Manifest {
        tool: "perfdom",
        version: env!("CARGO_PKG_VERSION"),
        config: echo,
        all_pass: out.all_pass(),
        invariants: &out.checks,
        records: &out.records,
        artifacts: out.artifacts.iter().map(|a| a.name.as_str()).collect(),
        wall_time_s,
    };
    let mut s = serde_json::to_string_pretty(&m).map_err(failed)?;
    s.push('\n');
    std::fs::write(dir.join("manifest.json"), s)?;
    Ok(())
}

fn domain(p: &Option<StarDomain>) -> &StarDomain {
    p.as_ref().expect("resolved configs carry a domain")
}

fn coords(d: Dim, x: &[f64; 3]) -> String {
    x[..d.get()].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn run_sample(p: &SampleParams, seed: u64) -> Result<Outcome, RunError> {
    let dom = domain(&p.domain);
    let d = dom.dim();
    let pp = ProcessParams { intensity: p.lambda, marks: p.marks, seed };
    let window = scaled_window(dom, p.eps);
    let smp = sample_marked_ppp(&pp, &window).map_err(failed)?;
    let perf = build_perforation(&smp, dom, p.eps, p.alpha).map_err(failed)?;

    let mut jsonl = Vec::new();
    smp.write_jsonl(&pp, &mut jsonl).map_err(failed)?;
    let axes = ["x", "y", "z"];
    let mut holes = format!("index,{},radius\n", axes[..d.get()].join(","));
    for (k, b) in perf.holes.iter().enumerate() {
        let _ = writeln!(holes, "{},{},{}", perf.interior_indices[k], coords(d, &b.center), b.radius);
    }

    let rmax = p.marks.max_value();
    let in_window = smp.points.iter().all(|q| window.contains_closed(&q.z));
    let marks_ok = smp.points.iter().all(|q| q.r >= 0.0 && q.r <= rmax);
    let worst = perf.holes.iter().map(|b| dom.boundary_distance(&b.center)).fold(f64::INFINITY, f64::min);
    let checks = vec![
        check("points_in_window", in_window, format!("{} points", smp.len())),
        check("marks_in_support", marks_ok, format!("support max {rmax}")),
        check("holes_interior", worst > p.eps, format!("{} holes, min boundary distance {worst}", perf.holes.len())),
    ];
    Ok(Outcome {
        artifacts: vec![Artifact::text("points.jsonl", String::from_utf8(jsonl).map_err(failed)?), Artifact::text("holes.csv", holes)],
        checks,
        records: json!({"points": smp.len(), "holes": perf.holes.len(), "oversized": perf.oversized.len()}),
    })
}

fn run_cluster(p: &ClusterRunParams, seed: u64) -> Result<Outcome, RunError> {
    let dom = domain(&p.domain);
    let pp = ProcessParams { intensity: p.lambda, marks: p.marks, seed };
    let eps_min = *p.eps_ladder.last().expect("validated ladder");
    let smp = sample_marked_ppp(&pp, &scaled_window(dom, eps_min)).map_err(failed)?;
    let mut entries = Vec::new();
    let mut records = Vec::new();
    let mut checks = Vec::new();
    let mut report = String::from("eps,status,property,margin,threshold,pass\n");
    for &eps in &p.eps_ladder {
        let params = p.cluster_params(eps);
        let perf = build_perforation(&smp, dom, eps, p.alpha).map_err(failed)?;
        match build_cluster_boxes(&perf.centers(), &params) {
            Ok(boxes) => {
                let r = verify_cluster_properties(&boxes, &perf, &params);
                for c in &r.checks {
                    let _ = writeln!(report, "{eps},ok,{},{},{},{}", c.property, c.value, c.threshold, c.pass);
                }
                let failing: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.property.as_str()).collect();
                checks.push(check(
                    format!("cluster_properties eps={eps}"),
                    r.all_pass(),
                    if failing.is_empty() { format!("{} boxes", boxes.len()) } else { format!("failing: {}", failing.join(" ")) },
                ));
                entries.push(json!({"eps": eps, "status": "ok", "boxes": boxes_to_json(&boxes)}));
                records.push(json!({"eps": eps, "status": "ok", "holes": perf.holes.len(), "boxes": boxes.len(), "kappa_precondition": r.kappa_precondition}));
            }
            Err(ClusterError::EpsilonTooLarge { count, capacity, .. }) => {
                let _ = writeln!(report, "{eps},epsilon_too_large,,,,");
                entries.push(json!({"eps": eps, "status": "epsilon_too_large", "boxes": null}));
                records.push(json!({"eps": eps, "status": "epsilon_too_large", "holes": perf.holes.len(), "count": count, "capacity": capacity}));
            }
            Err(e) => return Err(failed(e)),
        }
    }
    Ok(Outcome {
        artifacts: vec![Artifact::json("boxes.json", &Value::Array(entries)), Artifact::text("report.csv", report)],
        checks,
        records: Value::Array(records),
    })
}

fn run_occupancy(p: &OccupancyParams, seed: u64) -> Result<Outcome, RunError> {
    let dom = domain(&p.domain);
    let res = estimate_max_occupancy(p.lambda, dom, p.delta, &p.trial_config(seed), p.n1, p.any_cube).map_err(failed)?;
    let mut checks = Vec::new();
    for r in &res.rows {
        let e = &r.grid_more_than;
        let tol = e.theory_bound + 3.0 * e.sigma();
        checks.push(check(
            format!("occupancy_bound eps={}", r.eps),
            e.p_hat <= tol,
            format!("p_hat {} vs bound {} + 3 sigma", e.p_hat, e.theory_bound),
        ));
        if p.any_cube {
            checks.push(check(
                format!("grid_below_any_cube eps={}", r.eps),
                r.grid_at_least.hits <= r.any_at_least.hits,
                format!("{} vs {}", r.grid_at_least.hits, r.any_at_least.hits),
            ));
        }
    }
    let fit = json!({
        "n1": res.n1,
        "n": res.n,
        "slope": res.fit.map(|f| f.slope),
        "slope_stderr": res.fit.map(|f| f.slope_stderr),
        "slope_target": res.slope_target,
    });
    Ok(Outcome {
        artifacts: vec![Artifact::text("occupancy.csv", occupancy_csv(&res)), Artifact::json("fit.json", &fit)],
        checks,
        records: fit,
    })
}

fn run_separation(p: &SeparationParams, seed: u64) -> Result<Outcome, RunError> {
    let res = estimate_separation_event(p.lambda, domain(&p.domain), p.kappa, p.tau, &p.trial_config(seed)).map_err(failed)?;
    // Shrinking ε must not make the close-pair event more likely beyond noise.
    let checks = res
        .rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].1, &w[1].1);
            let noise = 3.0 * (a.sigma().powi(2) + b.sigma().powi(2)).sqrt();
            check(format!("decay eps={}", w[1].0), b.p_hat <= a.p_hat + noise, format!("{} after {}", b.p_hat, a.p_hat))
        })
        .collect();
    let fit = json!({
        "kappa": res.kappa,
        "tau": res.tau,
        "slope": res.fit.map(|f| f.slope),
        "slope_stderr": res.fit.map(|f| f.slope_stderr),
        "slope_target": res.slope_target,
    });
    Ok(Outcome {
        artifacts: vec![Artifact::text("separation.csv", separation_csv(&res)), Artifact::json("fit.json", &fit)],
        checks,
        records: fit,
    })
}

fn run_slln(p: &SllnParams, seed: u64) -> Result<Outcome, RunError> {
    let rows = slln_estimate(p.lambda, &p.marks, domain(&p.domain), p.moment, &p.trial_config(seed)).map_err(failed)?;
    let mut checks = Vec::new();
    for r in &rows {
        checks.push(check(
            format!("non_negative eps={}", r.eps),
            r.count_mean >= 0.0 && r.moment_mean >= 0.0 && r.admitted_moment_mean >= 0.0,
            "",
        ));
        checks.push(check(
            format!("admitted_below_all eps={}", r.eps),
            r.admitted_moment_mean <= r.moment_mean,
            format!("{} vs {}", r.admitted_moment_mean, r.moment_mean),
        ));
    }
    let summary: Vec<Value> = rows
        .iter()
        .map(|r| json!({"eps": r.eps, "count_rel_err": r.count_mean / r.count_limit - 1.0, "moment_rel_err": r.moment_mean / r.moment_limit - 1.0}))
        .collect();
    Ok(Outcome { artifacts: vec![Artifact::text("slln.csv", slln_csv(&rows))], checks, records: Value::Array(summary) })
}

fn run_john(p: &JohnParams, seed: u64) -> Result<Outcome, RunError> {
    let d = Dim::new(p.dim).map_err(failed)?;
    let n = p.n.expect("resolved");
    let cap = witness_cap(d, n);
    let mut csv = String::from("eps,c_hat,cap,points,worst_point\n");
    let mut checks = Vec::new();
    let mut vals = Vec::new();
    for &eps in &p.eps_ladder {
        let cb = two_ball_scene(d, eps, p.alpha, p.kappa, n).map_err(failed)?;
        let est = estimate_john_constant(&cb, p.samples, seed);
        let _ = writeln!(csv, "{eps},{},{cap},{},\"{}\"", est.c_hat, est.points, coords(d, &est.worst_point));
        checks.push(check(format!("witness_cap eps={eps}"), est.c_hat <= cap, format!("{} vs cap {cap}", est.c_hat)));
        vals.push(est.c_hat);
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome {
        artifacts: vec![Artifact::text("john.csv", csv)],
        checks,
        records: json!({"cap": cap, "variation": hi / lo - 1.0}),
    })
}

fn run_sweep(p: &SweepParams, seed: u64) -> Result<Outcome, RunError> {
    let res = operator_norm_sweep(&p.sweep_config(seed)).map_err(failed)?;
    let var = res.variation();
    let drift = res.rows.iter().map(|r| r.max_drift).fold(0.0, f64::max);
    let mut detail = String::from("eps,cells,holes,ratio,naive_ratio,max_drift,b_ratio,beta_ratio\n");
    for (a, b) in res.rows.iter().zip(&res.naive) {
        let _ = writeln!(detail, "{},{},{},{},{},{},{},{}", a.eps, a.cells, a.holes, a.ratio, b.ratio, a.max_drift, a.b_ratio, a.beta_ratio);
    }
    let checks = vec![
        check("uniform_norm", var < 2.0, format!("max/min of normalized ratio {var}")),
        check("local_mean_zero", drift <= 1e-10, format!("max relative drift {drift:e}")),
    ];
    let layout = serde_json::to_value(&res.layout).map_err(failed)?;
    Ok(Outcome {
        artifacts: vec![
            Artifact::text("sweep.csv", sweep_csv(&res.rows)),
            Artifact::text("naive.csv", sweep_csv(&res.naive)),
            Artifact::text("sweep_detail.csv", detail),
            Artifact::json("layout.json", &layout),
        ],
        checks,
        records: json!({"variation": var, "naive_variation": res.naive_variation(), "naive_grows": res.naive_grows()}),
    })
}

fn run_cutoff(p: &CutoffParams, seed: u64) -> Result<Outcome, RunError> {
    let cfg = RateConfig {
        process: ProcessParams { intensity: p.lambda, marks: p.marks, seed },
        domain: domain(&p.domain).clone(),
        alpha: p.alpha,
        r: p.r,
        eps_ladder: p.eps_ladder.clone(),
        cells_per_ramp: p.cells_per_ramp,
    };
    let res = cutoff_rate(&cfg).map_err(failed)?;
    let mut detail = String::from("eps,h,holes,gap,value_part,hole_part,max_grad,grad_bound\n");
    for r in &res.rows {
        let g = &r.parts;
        let _ = writeln!(detail, "{},{},{},{},{},{},{},{}", r.eps, r.h, r.holes, g.gap, g.value_part, g.hole_part, g.max_grad, r.grad_bound);
    }
    let slack = (3.0 * res.fit.slope_stderr).max(0.15);
    let checks = vec![
        check("gradient_bound", res.gradient_bound_holds(), "max |grad g| <= eps^-alpha (1 + 3h/eps^alpha)"),
        check(
            "rate_not_below_sigma",
            res.fit.slope + slack >= res.sigma,
            format!("slope {} +- {} vs sigma {}", res.fit.slope, res.fit.slope_stderr, res.sigma),
        ),
    ];
    Ok(Outcome {
        artifacts: vec![Artifact::text("rate.csv", rate_csv(&res)), Artifact::text("rate_detail.csv", detail)],
        checks,
        records: json!({"sigma": res.sigma, "slope": res.fit.slope, "slope_stderr": res.fit.slope_stderr}),
    })
}
