use serde::Serialize;

use polymerlab::enumerate::{enumerate_measure, tilted_partition, EnumOptions, SignRestriction};
use polymerlab::harness::{self, Schedule, SweepParams, SweepReport};
use polymerlab::montecarlo::{
    estimate_clt, importance_replicas, perm_replicas, CltEstimate, McParams, Method, PermParams, WeightedEnsemble,
};
use polymerlab::ratefn::{self, finite_rate_curve, finite_rate_mc, lambda_curve, legendre, RateCurve, Side};
use polymerlab::renewal::{
    compute_sequences, contraction_iteration, renewal_residuals, verify_pi_bound, ContractionReport, PieceMode,
    PieceModel, PieceWindow, PiBoundRow,
};
use polymerlab::stepdist::FamilyKind;
use polymerlab::{selftest as checks, Exec, Model};

use crate::config::{Format, RateMethod, RunConfig};
use crate::output::{csv_document, emit, json_document};
use crate::{CliError, SweepKind};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_REPLICAS: usize = 16;
const DEFAULT_TOURS: u64 = 1000;
const DEFAULT_SAMPLES: u64 = 10_000;

fn enum_opts(cfg: &mut RunConfig) -> EnumOptions {
    let d = EnumOptions::default();
    EnumOptions {
        leaf_budget: *cfg.leaf_budget.get_or_insert(d.leaf_budget),
        exec: Exec::Parallel,
    }
}

fn mc_params(cfg: &mut RunConfig) -> McParams {
    McParams {
        replicas: *cfg.replicas.get_or_insert(DEFAULT_REPLICAS),
        seed: *cfg.seed.get_or_insert(DEFAULT_SEED),
        exec: Exec::Parallel,
    }
}

fn perm_params(cfg: &mut RunConfig) -> PermParams {
    let d = PermParams::default();
    PermParams {
        tours: *cfg.tours.get_or_insert(DEFAULT_TOURS),
        c_low: *cfg.c_low.get_or_insert(d.c_low),
        c_high: *cfg.c_high.get_or_insert(d.c_high),
        ..d
    }
}

fn format(cfg: &mut RunConfig, default: Format) -> Format {
    *cfg.format.get_or_insert(default)
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step).round() as usize;
    (0..=k).map(|i| lo + step * i as f64).collect()
}

#[derive(Serialize)]
struct EnumerateOut {
    n: usize,
    model: Model,
    z: f64,
    log_z: f64,
    /// `E|S_n| / n` under the polymer measure.
    theta: f64,
    mean_endpoint: f64,
    tilted_partition: Option<f64>,
    endpoint_pmf: Vec<(i64, f64)>,
}

pub fn enumerate(mut cfg: RunConfig) -> Result<(), CliError> {
    cfg.command = Some("enumerate".into());
    let dist = cfg.dist_spec()?.build()?;
    let n = cfg.need_n()?;
    let model = cfg.model()?;
    let opts = enum_opts(&mut cfg);
    let r = enumerate_measure(&dist, n, model, &opts)?;
    let tilted = match (cfg.mu, model) {
        (Some(mu), Model::DombJoyce { beta }) => Some(tilted_partition(&dist, n, beta, mu, SignRestriction::None, &opts)?),
        (Some(_), _) => return Err(CliError::Config("--mu applies to the Domb-Joyce model only".into())),
        (None, _) => None,
    };
    let out = EnumerateOut {
        n,
        model,
        z: r.z,
        log_z: r.log_z,
        theta: r.q_expect(|x| x.unsigned_abs() as f64) / n as f64,
        mean_endpoint: r.q_expect(|x| x as f64),
        tilted_partition: tilted,
        endpoint_pmf: r.endpoint_pmf.iter().map(|(&x, &p)| (x, p)).collect(),
    };
    let text = match format(&mut cfg, Format::Json) {
        Format::Json => json_document(&cfg, &out)?,
        Format::Csv => {
            let mut body = String::from("x,probability\n");
            for (x, p) in &out.endpoint_pmf {
                body.push_str(&format!("{x},{p}\n"));
            }
            csv_document(&cfg, &body)?
        }
    };
    emit(cfg.out.as_deref(), &text)
}

#[derive(Serialize)]
struct ReplicaSummary {
    replica: u64,
    trials: u64,
    samples: u64,
    log_z: f64,
    ess: f64,
}

#[derive(Serialize)]
struct McOut {
    method: Method,
    model: Model,
    estimate: CltEstimate,
    replicas: Vec<ReplicaSummary>,
}

fn run_mc(cfg: &mut RunConfig, n: usize, model: Model) -> Result<(Method, Vec<WeightedEnsemble>), CliError> {
    let dist = cfg.dist_spec()?.build()?;
    let method = *cfg.method.get_or_insert(Method::Perm);
    let mc = mc_params(cfg);
    let ens = match method {
        Method::Perm => {
            let p = perm_params(cfg);
            perm_replicas(&dist, n, model, &p, &mc)?
        }
        Method::Importance => {
            let samples = *cfg.samples.get_or_insert(DEFAULT_SAMPLES);
            importance_replicas(&dist, n, model, samples, &mc)?
        }
    };
    Ok((method, ens))
}

pub fn mc(mut cfg: RunConfig) -> Result<(), CliError> {
    cfg.command = Some("mc".into());
    let n = cfg.need_n()?;
    let model = cfg.model()?;
    let (method, ens) = run_mc(&mut cfg, n, model)?;
    let estimate = estimate_clt(&ens)?;
    let out = McOut {
        method,
        model,
        replicas: ens
            .iter()
            .map(|e| ReplicaSummary {
                replica: e.replica,
                trials: e.trials,
                samples: e.samples,
                log_z: e.log_z(),
                ess: e.effective_sample_size(),
            })
            .collect(),
        estimate,
    };
    let text = match format(&mut cfg, Format::Json) {
        Format::Json => json_document(&cfg, &out)?,
        Format::Csv => {
            let e = &out.estimate;
            let body = format!(
                "n,theta_hat,theta_se,r_hat,r_se,sigma_star_hat,sigma_star_se,mean_endpoint,mean_endpoint_se,log_z,log_z_se,ess,samples,low_ess\n\
                 {},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                e.n,
                e.theta_hat.value,
                e.theta_hat.stderr,
                e.r_hat.value,
                e.r_hat.stderr,
                e.sigma_star_hat.value,
                e.sigma_star_hat.stderr,
                e.mean_endpoint.value,
                e.mean_endpoint.stderr,
                e.log_z.value,
                e.log_z.stderr,
                e.ess,
                e.samples,
                e.low_ess
            );
            csv_document(&cfg, &body)?
        }
    };
    emit(cfg.out.as_deref(), &text)
}

pub fn rate(mut cfg: RunConfig) -> Result<(), CliError> {
    cfg.command = Some("rate".into());
    let n = cfg.need_n()?;
    let model = cfg.model()?;
    let side = *cfg.side.get_or_insert(Side::Ge);
    let thetas = cfg.thetas.get_or_insert_with(|| grid(0.0, 1.0, 0.05)).clone();
    let method = *cfg.rate_method.get_or_insert(RateMethod::Finite);
    let curve: RateCurve = match method {
        RateMethod::Finite => {
            let dist = cfg.dist_spec()?.build()?;
            let opts = enum_opts(&mut cfg);
            finite_rate_curve(&dist, n, model, &thetas, side, &opts)?
        }
        RateMethod::Legendre => {
            let Model::DombJoyce { beta } = model else {
                return Err(CliError::Config("the Legendre route needs a Domb-Joyce model".into()));
            };
            if side != Side::Ge {
                return Err(CliError::Config("the Legendre route gives the ge branch only".into()));
            }
            let dist = cfg.dist_spec()?.build()?;
            let mus = cfg.mus.get_or_insert_with(|| grid(-3.0, 3.0, 0.05)).clone();
            let opts = enum_opts(&mut cfg);
            let lambdas = lambda_curve(&dist, n, beta, &mus, SignRestriction::None, &opts)?;
            let mut c = legendre(&mus, &lambdas, &thetas)?;
            c.n = n;
            c.beta = beta;
            c
        }
        RateMethod::Mc => {
            let (_, ens) = run_mc(&mut cfg, n, model)?;
            let points = thetas
                .iter()
                .map(|&t| finite_rate_mc(&ens, side.constraint(t), side, t))
                .collect::<polymerlab::Result<Vec<_>>>()?;
            let mut c = RateCurve::for_model(n, model, false);
            c.points = points;
            c
        }
    };
    let text = match format(&mut cfg, Format::Csv) {
        Format::Json => json_document(&cfg, &curve)?,
        Format::Csv => {
            let mut body = format!("{}\n", ratefn::CSV_HEADER);
            for row in curve.to_csv_rows() {
                body.push_str(&row);
                body.push('\n');
            }
            csv_document(&cfg, &body)?
        }
    };
    emit(cfg.out.as_deref(), &text)
}

pub fn lemma_bn(mut cfg: RunConfig) -> Result<(), CliError> {
    cfg.command = Some("lemma-bn".into());
    let n = cfg.need_n()?;
    let dist = cfg.dist_spec()?.build()?;
    let text = if *cfg.series.get_or_insert(false) {
        let series = ratefn::bn_series(&dist, n)?;
        let rows: Vec<(usize, f64, f64)> = series
            .iter()
            .enumerate()
            .map(|(i, &b)| (i + 1, b, 2.0 * (i as f64 + 2.0) + b))
            .collect();
        match format(&mut cfg, Format::Csv) {
            Format::Json => json_document(&cfg, &rows)?,
            Format::Csv => {
                let mut body = String::from("n,b_n,b_n_over_n,expected_g\n");
                for (k, b, g) in rows {
                    body.push_str(&format!("{k},{b},{},{g}\n", b / k as f64));
                }
                csv_document(&cfg, &body)?
            }
        }
    } else {
        let r = ratefn::compute_bn(&dist, n)?;
        match format(&mut cfg, Format::Json) {
            Format::Json => json_document(&cfg, &r)?,
            Format::Csv => csv_document(&cfg, &format!("n,b_n,expected_g\n{},{},{}\n", r.n, r.b_n, r.expected_g))?,
        }
    };
    emit(cfg.out.as_deref(), &text)
}

#[derive(Serialize)]
struct RenewalOut {
    c: Vec<f64>,
    pi: Vec<f64>,
    eps: f64,
    residuals: Vec<f64>,
    pi_bound: Vec<PiBoundRow>,
    z: Option<f64>,
    #[serde(rename = "A")]
    a: Option<Vec<f64>>,
    contraction: Option<ContractionReport>,
    /// Why the contraction step was skipped, when it was.
    hypothesis: Option<String>,
}

pub fn renewal(mut cfg: RunConfig) -> Result<(), CliError> {
    cfg.command = Some("renewal".into());
    let dist = cfg.dist_spec()?.build()?;
    let t = *cfg.piece_len.get_or_insert(2);
    let pieces = *cfg.pieces.get_or_insert(5);
    let mode = match cfg.beta {
        None => PieceMode::Saw,
        Some(b) if b.is_infinite() => PieceMode::Saw,
        Some(beta) => PieceMode::DombJoyce { beta },
    };
    let mut model = PieceModel::new(dist, t, mode);
    model.tilt = *cfg.mu.get_or_insert(0.0);
    model.window = match (cfg.window_center, cfg.window_half_width) {
        (Some(center), Some(half_width)) => Some(PieceWindow { center, half_width }),
        (None, None) => None,
        _ => return Err(CliError::Config("window needs both window_center and window_half_width".into())),
    };
    model.confinement = cfg.confinement;
    model.decoupled = *cfg.decoupled.get_or_insert(false);
    let eta = *cfg.eta.get_or_insert(0.1);
    let opts = enum_opts(&mut cfg);
    let seq = compute_sequences(&model, pieces, &opts)?;
    let (contraction, hypothesis) = match contraction_iteration(&seq, eta) {
        Ok(r) => (Some(r), None),
        Err(polymerlab::Error::Hypothesis(m)) => (None, Some(m)),
        Err(polymerlab::Error::InvalidParameter(m)) if pieces < 2 => (None, Some(m)),
        Err(e) => return Err(e.into()),
    };
    let out = RenewalOut {
        residuals: renewal_residuals(&seq),
        pi_bound: verify_pi_bound(&seq),
        z: contraction.as_ref().map(|r| r.z),
        a: contraction.as_ref().map(|r| r.a.clone()),
        c: seq.c,
        pi: seq.pi,
        eps: seq.eps,
        contraction,
        hypothesis,
    };
    let text = match format(&mut cfg, Format::Json) {
        Format::Json => json_document(&cfg, &out)?,
        Format::Csv => {
            let mut body = String::from("m,c_m,pi_m,residual\n");
            for m in 1..out.c.len() {
                body.push_str(&format!("{m},{},{},{}\n", out.c[m], out.pi[m - 1], out.residuals[m - 1]));
            }
            csv_document(&cfg, &body)?
        }
    };
    emit(cfg.out.as_deref(), &text)
}

pub fn sweep(mut cfg: RunConfig, kind: SweepKind) -> Result<(), CliError> {
    cfg.command = Some("sweep".into());
    let name = match kind {
        SweepKind::Beta => "beta",
        SweepKind::Sigma => "sigma",
        SweepKind::Coupled => "coupled",
        SweepKind::Attraction => "attraction",
        SweepKind::Strip => "strip",
        SweepKind::Flory => "flory",
    };
    cfg.experiment = Some(name.into());
    let d = SweepParams::default();
    let params = SweepParams {
        n_scale: *cfg.n_scale.get_or_insert(d.n_scale),
        perm: perm_params(&mut cfg),
        mc: mc_params(&mut cfg),
        anchor: *cfg.anchor.get_or_insert(true),
        allow_invalid: *cfg.allow_invalid_schedule.get_or_insert(false),
    };
    let default_betas = || vec![0.4, 0.2, 0.1, 0.05, 0.025];
    let default_ns = || vec![64, 128, 256, 512, 1024];
    let report: SweepReport = match kind {
        SweepKind::Beta => {
            let spec = cfg.dist_spec()?;
            let betas = cfg.betas.get_or_insert_with(default_betas).clone();
            harness::sweep_beta(&spec, &betas, &params)?
        }
        SweepKind::Sigma => {
            let fk = match cfg.family.get_or_insert_with(|| "uniform_range".into()).as_str() {
                "uniform_range" => FamilyKind::UniformRange,
                "geometric_tail" => FamilyKind::GeometricTail,
                other => return Err(CliError::Config(format!("the sigma sweep needs uniform_range or geometric_tail, got {other}"))),
            };
            let ls = cfg.ls.get_or_insert_with(|| vec![2, 4, 8, 16]).clone();
            harness::sweep_sigma(fk, &ls, &params)?
        }
        SweepKind::Strip => {
            let spec = cfg.dist_spec()?;
            let ls = cfg.ls.get_or_insert_with(|| vec![1, 2, 4, 8]).clone();
            harness::sweep_strip(&spec, &ls, &params)?
        }
        SweepKind::Attraction => {
            let spec = cfg.dist_spec()?;
            let betas = cfg.betas.get_or_insert_with(default_betas).clone();
            let e = *cfg.gamma_exponent.get_or_insert(7.0 / 6.0);
            harness::sweep_attraction(&spec, &betas, e, &params)?
        }
        SweepKind::Coupled => {
            let spec = cfg.dist_spec()?;
            let schedule = *cfg.schedule.get_or_insert(Schedule::default());
            let ns = cfg.ns.get_or_insert_with(default_ns).clone();
            harness::sweep_coupled(&spec, schedule, &ns, &params)?
        }
        SweepKind::Flory => {
            let spec = cfg.dist_spec()?;
            let ns = cfg.ns.get_or_insert_with(default_ns).clone();
            harness::sweep_flory(&spec, &ns, &params)?
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match format(&mut cfg, Format::Csv) {
        Format::Json => emit(cfg.out.as_deref(), &json_document(&cfg, &report)?),
        Format::Csv => {
            emit(cfg.out.as_deref(), &csv_document(&cfg, &report.to_csv())?)?;
            if let Some(out) = cfg.out.clone() {
                emit(Some(&out.with_extension("json")), &json_document(&cfg, &report)?)?;
            }
            Ok(())
        }
    }
}

pub fn selftest(mut cfg: RunConfig) -> Result<(), CliError> {
    cfg.command = Some("selftest".into());
    let results = checks::run_all(Exec::Parallel);
    let failed: Vec<&str> = results.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let text = match cfg.format {
        Some(Format::Json) => json_document(&cfg, &results)?,
        _ => results
            .iter()
            .map(|c| {
                format!(
                    "{} {} ({:.2}s): {}\n",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.seconds,
                    c.detail
                )
            })
            .collect(),
    };
    emit(cfg.out.as_deref(), &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failed.join(", ")))
    }
}
