//! One function per experiment kind. Each returns rows for the two CSV
//! files, JSON records for the summary, and the ratio series to plot.

use anyhow::{anyhow, Result};
use excursion_core::asymptotics::{self, FormulaId};
use excursion_core::class_analysis;
use excursion_core::estimators::{self, ISConfig, LatticeCaps, Method, Probes, Sampler, TailEstimate};
use excursion_core::models::validate_class;
use excursion_core::{IncrementModel, SimConfig, TailLaw};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::output::{EstimateRow, PredictionRow, Series};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub estimates: Vec<EstimateRow>,
    pub predictions: Vec<PredictionRow>,
    pub records: Vec<Value>,
    pub plot: Vec<Series>,
}

impl RunOutput {
    pub fn max_truncated(&self) -> u64 {
        self.estimates.iter().map(|r| r.truncated_count).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Area,
    Tau,
    Max,
}

impl Event {
    pub fn label(&self) -> &'static str {
        match self {
            Event::Area => "area",
            Event::Tau => "tau",
            Event::Max => "max",
        }
    }

    /// Size of the single jump that produces the event at `level`.
    pub fn jump(&self, model: &IncrementModel, level: f64) -> f64 {
        match self {
            Event::Area => (2.0 * model.drift_a * level).sqrt(),
            Event::Tau => model.drift_a * level,
            Event::Max => level,
        }
    }

    fn probes(&self, levels: Vec<f64>) -> Probes {
        match self {
            Event::Area => Probes {
                area: levels,
                ..Probes::default()
            },
            Event::Tau => Probes {
                tau: levels,
                ..Probes::default()
            },
            Event::Max => Probes {
                max: levels,
                ..Probes::default()
            },
        }
    }

    fn formula(&self) -> FormulaId {
        match self {
            Event::Area => FormulaId::AreaTail,
            Event::Tau => FormulaId::TauTail,
            Event::Max => FormulaId::MaxTail,
        }
    }

    pub fn prediction(&self, model: &IncrementModel, e_tau: f64, level: f64) -> f64 {
        match self {
            Event::Area => asymptotics::area_tail_prediction(model, e_tau, level),
            Event::Tau => asymptotics::tau_tail_prediction(model, e_tau, level),
            Event::Max => asymptotics::max_tail_prediction(model, e_tau, level),
        }
    }
}

fn sim_config(config: &ExperimentConfig) -> SimConfig {
    SimConfig {
        max_steps: config.max_steps,
        levels: Vec::new(),
        seed: config.seed,
        execution: config.execution,
    }
}

fn sample_size(config: &ExperimentConfig) -> Result<u64> {
    config.n.ok_or_else(|| anyhow!("`n` is required for kind {}", config.kind.as_str()))
}

fn is_config(config: &ExperimentConfig, jump: f64) -> ISConfig {
    ISConfig {
        mixture_weight: config.is_config.mixture_weight,
        tilt_threshold: config.is_config.tilt_threshold.unwrap_or(jump / 4.0),
        policy: config.is_config.policy,
    }
}

fn e_tau(model: &IncrementModel, config: &ExperimentConfig) -> Result<estimators::EtauEstimate> {
    let n = config.e_tau_n.map_or_else(|| sample_size(config), Ok)?;
    Ok(estimators::estimate_e_tau(model, n, &sim_config(config))?)
}

fn e_tau_record(e: &estimators::EtauEstimate) -> Value {
    json!({
        "record": "e_tau",
        "mean": e.mean,
        "stderr": e.stderr,
        "wald_mean": e.wald_mean,
        "wald_gap": e.wald_gap,
        "wald_gap_stderr": e.wald_gap_stderr,
        "n": e.n,
        "truncated_count": e.truncated_count,
    })
}

/// Estimates of `event` on `grid`: crude points share one coupled pass,
/// importance-sampled points get a pass each with their own threshold.
pub fn tail_estimates(
    model: &IncrementModel,
    config: &ExperimentConfig,
    event: Event,
    grid: &[f64],
) -> Result<Vec<TailEstimate>> {
    let n = sample_size(config)?;
    let sim = sim_config(config);
    let naive_levels: Vec<f64> = grid.iter().copied().filter(|&x| !config.uses_is(x)).collect();
    let mut naive = Vec::new();
    if !naive_levels.is_empty() {
        let s = estimators::run_probes(model, &sim, n, &event.probes(naive_levels), &Sampler::Naive)?;
        let tallies = match event {
            Event::Area => &s.area,
            Event::Tau => &s.tau,
            Event::Max => &s.max,
        };
        naive = tallies.iter().map(|t| s.estimate(t, Method::Naive)).collect();
    }
    let mut naive = naive.into_iter();
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        if config.uses_is(x) {
            let is = is_config(config, event.jump(model, x));
            let s = estimators::run_probes(
                model,
                &sim,
                config.is_n.unwrap_or(n),
                &event.probes(vec![x]),
                &Sampler::Mixture(is),
            )?;
            let t = match event {
                Event::Area => &s.area[0],
                Event::Tau => &s.tau[0],
                Event::Max => &s.max[0],
            };
            out.push(s.estimate(t, Method::IsMixture));
        } else {
            out.push(naive.next().expect("one crude estimate per crude level"));
        }
    }
    Ok(out)
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let model = config.model.build()?;
    match config.kind {
        Kind::AreaTail => tail_kind(&model, config, Event::Area, false),
        Kind::Headline => tail_kind(&model, config, Event::Area, true),
        Kind::TauTail => tail_kind(&model, config, Event::Tau, false),
        Kind::MaxTail => tail_kind(&model, config, Event::Max, false),
        Kind::JointTail => joint_kind(&model, config),
        Kind::SigmaLaw => sigma_kind(&model, config),
        Kind::BoundsGrid => bounds_kind(&model, config),
        Kind::ClassCheck => class_kind(&model, config),
        Kind::OracleDp => oracle_kind(&model, config),
    }
}

fn tail_kind(model: &IncrementModel, config: &ExperimentConfig, event: Event, headline: bool) -> Result<RunOutput> {
    let e = e_tau(model, config)?;
    let estimates = tail_estimates(model, config, event, &config.x_grid)?;
    let mut out = RunOutput {
        records: vec![e_tau_record(&e)],
        ..RunOutput::default()
    };
    let label = event.label();
    let formula = event.formula().as_str();
    let mut ratios = Vec::new();
    let series: Vec<(f64, f64)> = config.x_grid.iter().zip(&estimates).map(|(&x, est)| (x, est.p_hat)).collect();
    let logs = class_analysis::log_ratio_check(model, e.mean, &series);
    for ((&x, est), log) in config.x_grid.iter().zip(&estimates).zip(&logs) {
        let prediction = event.prediction(model, e.mean, x);
        let ratio = est.p_hat / prediction;
        ratios.push((x, ratio));
        out.estimates.push(EstimateRow::new(label, x, est));
        out.predictions.push(PredictionRow::new(
            formula,
            label,
            x,
            prediction,
            &[("e_tau", e.mean), ("a", model.drift_a)],
        ));
        let mut record = json!({
            "record": "ratio",
            "label": label,
            "x": x,
            "method": est.method.as_str(),
            "p_hat": est.p_hat,
            "stderr": est.stderr,
            "prediction": prediction,
            "ratio": ratio,
            "truncated_count": est.truncated_count,
        });
        if event == Event::Area {
            record["log_ratio"] = json!(log.ratio);
            record["log_ratio_flag"] = json!(log.flag);
        }
        out.records.push(record);
    }
    if headline {
        let dist: Vec<f64> = ratios.iter().map(|(_, r)| (r - 1.0).abs()).collect();
        out.records.push(json!({
            "record": "trend",
            "label": label,
            "in_band": ratios.iter().all(|(_, r)| (0.5..=2.0).contains(r)),
            "distance_nonincreasing": dist.windows(2).all(|w| w[1] <= w[0]),
            "distances": dist,
        }));
    }
    out.plot.push(Series {
        label: format!("{label}: estimate / prediction"),
        points: ratios,
    });
    Ok(out)
}

fn joint_kind(model: &IncrementModel, config: &ExperimentConfig) -> Result<RunOutput> {
    let e = e_tau(model, config)?;
    let n = sample_size(config)?;
    let sim = sim_config(config);
    let mut out = RunOutput {
        records: vec![e_tau_record(&e)],
        ..RunOutput::default()
    };
    let pairs = |x: f64| config.y_grid.iter().map(move |&y| (x, y));
    let naive: Vec<(f64, f64)> = config
        .x_grid
        .iter()
        .filter(|&&x| !config.uses_is(x))
        .flat_map(|&x| pairs(x))
        .collect();
    let mut estimates: Vec<((f64, f64), TailEstimate)> = Vec::new();
    if !naive.is_empty() {
        let probes = Probes {
            joint: naive.clone(),
            ..Probes::default()
        };
        let s = estimators::run_probes(model, &sim, n, &probes, &Sampler::Naive)?;
        estimates.extend(naive.iter().copied().zip(s.joint.iter().map(|t| s.estimate(t, Method::Naive))));
    }
    for &x in config.x_grid.iter().filter(|&&x| config.uses_is(x)) {
        let probes = Probes {
            joint: pairs(x).collect(),
            ..Probes::default()
        };
        let is = is_config(config, Event::Area.jump(model, x));
        let s = estimators::run_probes(model, &sim, config.is_n.unwrap_or(n), &probes, &Sampler::Mixture(is))?;
        estimates.extend(pairs(x).zip(s.joint.iter().map(|t| s.estimate(t, Method::IsMixture))));
    }
    for ((x, y), est) in estimates {
        let label = format!("joint(y={y})");
        let prediction = asymptotics::area_tail_prediction(model, e.mean, x);
        let in_window = config.window.contains(model, x, y);
        out.estimates.push(EstimateRow::new(&label, x, &est));
        let row = PredictionRow::new(FormulaId::AreaTail.as_str(), &label, x, prediction, &[("e_tau", e.mean), ("y", y)]);
        out.predictions
            .push(row.with_flag(if in_window { "in_window" } else { "outside_window" }));
        out.records.push(json!({
            "record": "joint",
            "x": x,
            "y": y,
            "p_hat": est.p_hat,
            "prediction": prediction,
            "ratio": est.p_hat / prediction,
            "in_window": in_window,
        }));
    }
    Ok(out)
}

fn sigma_kind(model: &IncrementModel, config: &ExperimentConfig) -> Result<RunOutput> {
    let n = sample_size(config)?;
    let sim = sim_config(config);
    let mut out = RunOutput::default();
    for &y in &config.y_grid {
        let law = estimators::sigma_y_conditional_law(model, y, config.k_max, n, &sim)?;
        let label = format!("sigma(y={y})");
        let events = law.conditioning_events;
        let probs = law.empirical.iter().chain(std::iter::once(&law.empirical_beyond));
        let refs = law.reference.iter().chain(std::iter::once(&law.reference_beyond));
        for (k, (&p, &q)) in probs.zip(refs).enumerate() {
            let k = (k + 1) as f64;
            let se = (p * (1.0 - p) / events as f64).sqrt();
            out.estimates.push(EstimateRow {
                method: Method::Naive.as_str().into(),
                x: k,
                p_hat: p,
                stderr: se,
                ci_lo: (p - estimators::Z95 * se).max(0.0),
                ci_hi: p + estimators::Z95 * se,
                n: events,
                truncated_count: law.truncated_count,
                label: label.clone(),
            });
            let row = PredictionRow::new("q_k", &label, k, q, &[("e_tau", law.e_tau)]);
            out.predictions.push(if k as usize > config.k_max {
                row.with_flag("remainder")
            } else {
                row
            });
        }
        out.records.push(json!({
            "record": "sigma_law",
            "y": y,
            "k_max": law.k_max,
            "conditioning_events": events,
            "total_variation": law.total_variation,
            "e_tau": law.e_tau,
            "n": law.n,
            "truncated_count": law.truncated_count,
        }));
    }
    Ok(out)
}

fn bounds_kind(model: &IncrementModel, config: &ExperimentConfig) -> Result<RunOutput> {
    let g = model
        .g
        .ok_or_else(|| anyhow!("bounds_grid needs a model with a hazard function g"))?;
    let n = sample_size(config)?;
    let sim = sim_config(config);
    let e = e_tau(model, config)?;
    let mut out = RunOutput {
        records: vec![e_tau_record(&e)],
        ..RunOutput::default()
    };

    let capped = estimators::capped_area_tail(model, &config.steps, &config.x_grid, &config.y_grid, n, &sim)?;
    for c in &capped {
        let label = format!("capped(n={},y={})", c.steps, c.y);
        let bound = asymptotics::lemma31_bound(model, c.steps, c.x, c.y)?;
        let p = &bound.params;
        out.estimates.push(EstimateRow::new(&label, c.x, &c.estimate));
        out.predictions.push(PredictionRow::new(
            bound.formula_id.as_str(),
            &label,
            c.x,
            bound.value,
            &[("lambda", p.lambda), ("I", p.i), ("C", p.c), ("n", c.steps as f64), ("y", c.y)],
        ));
        out.records.push(json!({
            "record": "lemma31",
            "n": c.steps,
            "x": c.x,
            "y": c.y,
            "p_hat": c.estimate.p_hat,
            "stderr": c.estimate.stderr,
            "bound": bound.value,
            "dominated": c.estimate.p_hat <= bound.value + 4.0 * c.estimate.stderr,
        }));
    }

    for &y in &config.y_grid {
        let c = asymptotics::lemma31_constant(model.drift_a, model.variance, model.tail_constant);
        let lambda = g.eval(y) / y;
        let i = model.drift_a / 2.0 - c * lambda;
        let label = format!("series(y={y})");
        for &x in &config.x_grid {
            let params = [("lambda", lambda), ("I", i), ("x", x)];
            if i <= 0.0 {
                out.predictions.push(
                    PredictionRow::new(FormulaId::BesselForm.as_str(), &label, x, f64::INFINITY, &params),
                );
                continue;
            }
            let b = asymptotics::geometric_series_bound(lambda, i, x)?;
            let flag = if b.exact_sum <= b.bessel_form { "ok" } else { "exceeded_by_sum" };
            out.predictions
                .push(PredictionRow::new(FormulaId::GeometricSeries.as_str(), &label, x, b.exact_sum, &params));
            out.predictions.push(
                PredictionRow::new(FormulaId::BesselForm.as_str(), &label, x, b.bessel_form, &params).with_flag(flag),
            );
            out.predictions
                .push(PredictionRow::new("unimodal_bound", &label, x, b.unimodal_bound, &params));
        }
    }

    for &x in &config.x_grid {
        let best = config
            .c_env
            .iter()
            .map(|&c| asymptotics::theorem12_upper(model, x, c).map(|v| (c, v)))
            .collect::<std::result::Result<Vec<_>, _>>()?
            .into_iter()
            .fold((config.c_env[0], f64::INFINITY), |b, v| if v.1 < b.1 { v } else { b });
        out.predictions.push(PredictionRow::new(
            FormulaId::Theorem12Upper.as_str(),
            "area",
            x,
            best.1,
            &[("C", best.0)],
        ));
        let lower = asymptotics::theorem12_lower_ref(model, x, best.0, config.eps);
        out.predictions.push(PredictionRow::new(
            FormulaId::Theorem12LowerRef.as_str(),
            "area",
            x,
            e.mean * lower,
            &[("C", best.0), ("eps", config.eps), ("e_tau", e.mean), ("tail", lower)],
        ));
    }
    Ok(out)
}

fn class_kind(model: &IncrementModel, config: &ExperimentConfig) -> Result<RunOutput> {
    let g = model
        .g
        .ok_or_else(|| anyhow!("class_check needs a model with a hazard function g"))?;
    let mut out = RunOutput::default();
    let domain: Vec<f64> = config.x_grid.iter().copied().filter(|&x| x >= g.x_min).collect();
    if domain.len() >= 2 {
        let report = validate_class(model, &domain)?;
        out.records.push(json!({ "record": "class_conditions", "report": report }));
    } else {
        out.records.push(json!({
            "record": "class_conditions",
            "skipped": format!("fewer than two grid points at or above x_min = {}", g.x_min),
        }));
    }

    let s_star = class_analysis::s_star_report(&model.unshifted(), &config.x_grid)?;
    for ((&x, &ratio), &dev) in s_star.x_grid.iter().zip(&s_star.ratio).zip(&s_star.rel_dev) {
        out.predictions.push(PredictionRow::new(
            "s_star_ratio",
            "s_star",
            x,
            ratio,
            &[("limit_ref", s_star.limit_ref), ("rel_dev", dev)],
        ));
    }
    out.records.push(json!({ "record": "s_star", "report": s_star }));

    for &rho in &config.rho {
        for &x in &domain {
            let r = class_analysis::insensitivity_modulus(&g, x, rho)?;
            let ok = r.modulus_upper <= r.bound_upper * (1.0 + 1e-6);
            out.predictions.push(
                PredictionRow::new(
                    "insensitivity_modulus",
                    format!("insensitivity(rho={rho})"),
                    x,
                    r.modulus_upper,
                    &[("bound", r.bound_upper)],
                )
                .with_flag(if ok { "ok" } else { "exceeds_bound" }),
            );
            if let (Some(m), Some(b)) = (r.modulus_two_sided, r.bound_two_sided) {
                out.predictions.push(
                    PredictionRow::new(
                        "insensitivity_modulus_two_sided",
                        format!("insensitivity(rho={rho})"),
                        x,
                        m,
                        &[("bound", b)],
                    )
                    .with_flag(if m <= b * (1.0 + 1e-6) { "ok" } else { "exceeds_bound" }),
                );
            }
            out.records.push(json!({ "record": "insensitivity", "report": r }));
        }
    }
    Ok(out)
}

fn oracle_kind(model: &IncrementModel, config: &ExperimentConfig) -> Result<RunOutput> {
    let p = model
        .lattice_p()
        .ok_or_else(|| anyhow!("oracle_dp needs the lattice family"))?;
    let top = *config.x_grid.last().expect("validated nonempty grid");
    let dp = estimators::dp_exact_lattice(p, top, LatticeCaps::auto(top))?;
    let mut out = RunOutput::default();
    let naive = match config.n {
        Some(n) => {
            let probes = Probes {
                area: config.x_grid.clone(),
                ..Probes::default()
            };
            let s = estimators::run_probes(model, &sim_config(config), n, &probes, &Sampler::Naive)?;
            s.area.iter().map(|t| Some(s.estimate(t, Method::Naive))).collect()
        }
        None => vec![None; config.x_grid.len()],
    };
    for (&x, mc) in config.x_grid.iter().zip(naive) {
        let exact = dp.estimate(x)?;
        out.estimates.push(EstimateRow::new("area", x, &exact));
        let mut record = json!({ "record": "oracle", "x": x, "exact": exact.p_hat });
        if let Some(mc) = mc {
            out.estimates.push(EstimateRow::new("area", x, &mc));
            record["naive"] = json!(mc.p_hat);
            record["naive_stderr"] = json!(mc.stderr);
            record["within_4_stderr"] = json!(mc.within_stderr(exact.p_hat, 4.0));
        }
        out.records.push(record);
    }
    out.records.push(json!({
        "record": "dp",
        "p": p,
        "e_tau": dp.e_tau,
        "neglected_mass": dp.neglected_mass,
        "caps": dp.caps,
    }));
    Ok(out)
}

/// Prediction at `x` for a tail law; exposed for report-side recomputation.
pub fn area_prediction<T: TailLaw + ?Sized>(tail: &T, e_tau: f64, x: f64) -> f64 {
    asymptotics::area_tail_prediction(tail, e_tau, x)
}
