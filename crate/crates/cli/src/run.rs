//! Subcommand execution: each command returns a JSON report, plot rows and failed assertions.

use serde::Serialize;
use serde_json::{json, Value};

use dispersive_lab::airy::{airy_field, psi_snapshot, BandRegion, CutoffSpec};
use dispersive_lab::deform::{apply_deformation, decoupling_gap, extract_bubble, BubbleSearch, Deformation, DilationExponent};
use dispersive_lab::dyadic::{BilinearRegion, Family};
use dispersive_lab::exponents::{
    classical_exponents, lwp_params, parse_rational, refined_exponents_s, refined_exponents_t, report, space_norm_spec, Assumption,
    Exact, RExp, SpaceTag, Q,
};
use dispersive_lab::gkdv::{
    conserved_report, duhamel_residual, evolve, scattering_profile, soliton_profile, Integrator, ScatteringConfig, SolverConfig,
};
use dispersive_lab::lab::{
    builtin_catalog, lacunary_gap, overlap_audit, sweep, Domain, Estimate, FamilyKind, InequalitySpec, OverlapAuditConfig, TestFamily,
    OVERLAP_PER_M_BOUND, OVERLAP_TOTAL_BOUND,
};
use dispersive_lab::morrey::{morrey_norm, Lattice, LatticeTruncation, MorreyParams};
use dispersive_lab::spectral::{lebesgue_norm, uniform_grid, wrap_horizon, Exponent, GridFunction, GridSpectrum, Packet, PacketSum, Spectrum, Weighted};
use dispersive_lab::LabError;

use crate::args::*;

/// Why a run stopped or failed.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or parameters; exit 1.
    Config(String),
    /// A numerical outcome the run was asked to guarantee; exit 2.
    Assertion(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Instability { .. } | LabError::NoConcentration(_) => Failure::Assertion(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

pub type Run<T> = std::result::Result<T, Failure>;

fn config(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

/// Plot-ready rows with fixed column names.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

pub struct Outcome {
    pub report: Value,
    pub table: Option<Table>,
    pub failures: Vec<String>,
}

pub enum Job {
    Norm(NormArgs),
    Exponents(ExponentsArgs),
    Airy(AiryArgs),
    Verify(VerifyArgs),
    Overlap(OverlapArgs),
    Gkdv(GkdvArgs),
    Bubble(BubbleArgs),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Norm(_) => "norm",
            Job::Exponents(_) => "exponents",
            Job::Airy(_) => "airy",
            Job::Verify(_) => "verify",
            Job::Overlap(_) => "overlap",
            Job::Gkdv(_) => "gkdv",
            Job::Bubble(_) => "bubble",
        }
    }

    /// Parameters from a config file's `parameters` table.
    pub fn from_config(subcommand: &str, parameters: Value) -> Run<Job> {
        fn take<T: serde::de::DeserializeOwned>(v: Value) -> Run<T> {
            serde_json::from_value(v).map_err(|e| config(format!("parameters: {e}")))
        }
        Ok(match subcommand {
            "norm" => Job::Norm(take(parameters)?),
            "exponents" => Job::Exponents(take(parameters)?),
            "airy" => Job::Airy(take(parameters)?),
            "verify" => Job::Verify(take(parameters)?),
            "overlap" => Job::Overlap(take(parameters)?),
            "gkdv" => Job::Gkdv(take(parameters)?),
            "bubble" => Job::Bubble(take(parameters)?),
            other => return Err(config(format!("unknown subcommand '{other}'"))),
        })
    }

    pub fn execute(&self) -> Run<Outcome> {
        match self {
            Job::Norm(a) => norm(a),
            Job::Exponents(a) => exponents(a),
            Job::Airy(a) => airy(a),
            Job::Verify(a) => verify(a),
            Job::Overlap(a) => overlap(a),
            Job::Gkdv(a) => gkdv(a),
            Job::Bubble(a) => bubble(a),
        }
    }

    fn parameters(&self) -> Value {
        let v = match self {
            Job::Norm(a) => serde_json::to_value(a),
            Job::Exponents(a) => serde_json::to_value(a),
            Job::Airy(a) => serde_json::to_value(a),
            Job::Verify(a) => serde_json::to_value(a),
            Job::Overlap(a) => serde_json::to_value(a),
            Job::Gkdv(a) => serde_json::to_value(a),
            Job::Bubble(a) => serde_json::to_value(a),
        };
        v.expect("parameters serialise")
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Job::Norm(a) => datum_seed(&a.datum),
            Job::Airy(a) => datum_seed(&a.datum),
            Job::Bubble(a) => datum_seed(&a.datum),
            Job::Verify(a) => Some(a.seed),
            Job::Overlap(a) => Some(a.seed),
            Job::Exponents(_) | Job::Gkdv(_) => None,
        }
    }

    /// Runs the job and wraps its report with run metadata.
    pub fn report(&self) -> Run<Outcome> {
        let mut out = self.execute()?;
        let truncation = out.report.get("truncation").cloned().unwrap_or(Value::Null);
        let mut body = match std::mem::take(&mut out.report) {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        body.remove("truncation");
        let meta = json!({
            "tool": "dispersive-lab",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.name(),
            "seed": self.seed(),
            "parameters": self.parameters(),
            "truncation": truncation,
            "assertions_failed": out.failures,
        });
        body.insert("meta".into(), meta);
        if let Some(t) = &out.table {
            body.insert("plot".into(), serde_json::to_value(t).expect("table serialises"));
        }
        out.report = Value::Object(body);
        Ok(out)
    }
}

fn datum_seed(d: &DatumArgs) -> Option<u64> {
    d.input.is_none().then_some(d.seed)
}

// ---------------------------------------------------------------------------
// parsing helpers

fn rexp(name: &str, s: &str) -> Run<RExp> {
    RExp::parse(s).map_err(|e| config(format!("{name}: {e}")))
}

fn exponent(name: &str, s: &str) -> Run<Exponent> {
    Ok(rexp(name, s)?.to_exponent()?)
}

fn rational(name: &str, s: &str) -> Run<Q> {
    parse_rational(s).map_err(|e| config(format!("{name}: {e}")))?.ok_or_else(|| config(format!("{name} must be finite")))
}

fn assumption(s: &str) -> Run<Assumption> {
    match s.to_ascii_lowercase().as_str() {
        "one" | "1" => Ok(Assumption::One),
        "two" | "2" => Ok(Assumption::Two),
        _ => Err(config(format!("assumption must be 'one' or 'two', got '{s}'"))),
    }
}

fn space_tag(s: &str) -> Run<SpaceTag> {
    Ok(match s {
        "L" => SpaceTag::L,
        "M" => SpaceTag::M,
        "S" => SpaceTag::S,
        "D-sigma" | "DSigma" => SpaceTag::DSigma,
        "N" => SpaceTag::N,
        "N-sigma" | "NSigma" => SpaceTag::NSigma,
        _ => return Err(config(format!("unknown space tag '{s}'"))),
    })
}

fn dilation(s: &str) -> Run<DilationExponent> {
    match s {
        "scaling" => Ok(DilationExponent::Scaling),
        "literal" => Ok(DilationExponent::Literal),
        _ => Err(config(format!("dilation must be 'scaling' or 'literal', got '{s}'"))),
    }
}

fn region(s: &str) -> Run<BilinearRegion> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || config(format!("region must look like 'A,0,4,6', got '{s}'"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let family = match parts[0] {
        "A" | "a" => Family::A,
        "B" | "b" => Family::B,
        _ => return Err(bad()),
    };
    let j = parts[1].parse().map_err(|_| bad())?;
    let k = parts[2].parse().map_err(|_| bad())?;
    let l = parts[3].parse().map_err(|_| bad())?;
    Ok(BilinearRegion::new(family, j, k, l)?)
}

fn load_datum(d: &DatumArgs) -> Run<(GridFunction, Value)> {
    if let Some(path) = &d.input {
        let f = GridFunction::read_csv(path)?;
        let meta = json!({ "source": path, "n_x": f.len(), "box_length": f.box_length() });
        return Ok((f, meta));
    }
    let kind: FamilyKind = d.family.parse()?;
    if d.member >= d.size {
        return Err(config(format!("member {} is outside a family of size {}", d.member, d.size)));
    }
    let fam = TestFamily::new(kind, d.size, d.seed).with_grid(d.n_x, d.box_length);
    let f = fam.members()?.swap_remove(d.member);
    Ok((f, json!({ "family": fam, "member": d.member })))
}

fn truncation_for(a: Option<i32>, b: Option<i32>, default: LatticeTruncation) -> Run<LatticeTruncation> {
    match (a, b) {
        (Some(lo), Some(hi)) => Ok(LatticeTruncation::new(lo, hi)?),
        (None, None) => Ok(default),
        _ => Err(config("give both j_min and j_max or neither")),
    }
}

// ---------------------------------------------------------------------------
// commands

fn norm(a: &NormArgs) -> Run<Outcome> {
    let (f, datum) = load_datum(&a.datum)?;
    let (beta, gamma, delta) = (exponent("beta", &a.beta)?, exponent("gamma", &a.gamma)?, exponent("delta", &a.delta)?);
    let weighted = Weighted { inner: GridSpectrum::new(&f), power: a.sigma };
    let grid = json!({ "n_x": f.len(), "box_length": f.box_length() });
    let (value, detail, truncation) = match a.kind {
        NormKind::Lebesgue => (lebesgue_norm(&f, beta), Value::Null, json!({ "grid": grid })),
        NormKind::HatLebesgue => {
            let tr = truncation_for(a.j_min, a.j_max, LatticeTruncation::for_spectrum(&weighted))?;
            let v = Lattice::hat(&weighted, tr)?.lebesgue(beta.conjugate());
            (v, Value::Null, json!({ "grid": grid, "lattice": tr }))
        }
        NormKind::Morrey => {
            let tr = truncation_for(a.j_min, a.j_max, LatticeTruncation::for_grid(&f))?;
            let r = morrey_norm(&f, &MorreyParams::direct(beta, gamma, delta)?, &tr)?;
            (r.value, r.to_json(), json!({ "grid": grid, "lattice": tr }))
        }
        NormKind::HatMorrey => {
            let tr = truncation_for(a.j_min, a.j_max, LatticeTruncation::for_spectrum(&weighted))?;
            let r = Lattice::hat(&weighted, tr)?.norm(&MorreyParams::hat(beta, gamma, delta)?)?;
            (r.value, r.to_json(), json!({ "grid": grid, "lattice": tr }))
        }
    };
    Ok(Outcome { report: json!({ "datum": datum, "kind": a.kind, "value": value, "norm": detail, "truncation": truncation }), table: None, failures: vec![] })
}

fn exponents(a: &ExponentsArgs) -> Run<Outcome> {
    let report = match a.theorem {
        Theorem::Classical => report::classical(&classical_exponents(rexp("p", &a.p)?, rexp("q", &a.q)?)?),
        Theorem::S => report::refined_s(&refined_exponents_s(rexp("p", &a.p)?, rexp("q", &a.q)?, rational("sigma", &a.sigma)?)?),
        Theorem::T => report::refined_t(&refined_exponents_t(rexp("p", &a.p)?, rexp("q", &a.q)?, rational("sigma", &a.sigma)?)?),
        Theorem::Lwp => report::lwp(&lwp_params(
            rational("alpha", &a.alpha)?,
            rational("sigma", &a.sigma)?,
            rational("gamma_inv", &a.gamma_inv)?,
            rational("delta_inv", &a.delta_inv)?,
            assumption(&a.assumption)?,
        )?),
        Theorem::Space => {
            let n = space_norm_spec(space_tag(&a.tag)?, rational("alpha", &a.alpha)?, rational("sigma", &a.sigma)?)?;
            json!({ "tag": a.tag, "derivative": Exact::from(n.derivative), "p": Exact::from(n.p), "q": Exact::from(n.q), "order": n.order })
        }
    };
    Ok(Outcome { report: json!({ "exponents": report }), table: None, failures: vec![] })
}

fn airy(a: &AiryArgs) -> Run<Outcome> {
    match a.mode {
        AiryMode::Flow => {
            if a.n_t == 0 {
                return Err(config("n_t must be positive"));
            }
            let (f, datum) = load_datum(&a.datum)?;
            let t_grid = uniform_grid(0.0, a.t_max, a.n_t);
            let af = airy_field(&f, &t_grid)?;
            let l2_0 = lebesgue_norm(&f, Exponent::Finite(2.0));
            let mut defect: f64 = 0.0;
            let mut table = Table::new(&["t", "x", "re", "im"]);
            for (i, &t) in t_grid.iter().enumerate() {
                let row = af.field.row_function(i)?;
                defect = defect.max((lebesgue_norm(&row, Exponent::Finite(2.0)) - l2_0).abs() / l2_0.max(f64::MIN_POSITIVE));
                for (l, z) in row.samples().iter().enumerate() {
                    table.rows.push(vec![t, row.x(l), z.re, z.im]);
                }
            }
            let report = json!({
                "datum": datum,
                "l2_norm": l2_0,
                "max_relative_l2_defect": defect,
                "warning": af.warning,
                "truncation": { "horizon": af.horizon, "t_max": a.t_max, "n_t": a.n_t, "n_x": f.len(), "box_length": f.box_length() },
            });
            Ok(Outcome { report, table: Some(table), failures: vec![] })
        }
        AiryMode::Cutoff => {
            let r = region(&a.region)?;
            let c = match a.lambda {
                Some(l) => CutoffSpec::new(BandRegion::Bilinear { region: r }, l)?,
                None => CutoffSpec::canonical(r)?,
            };
            let (x0, x1) = c.region.xi_window();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..=64 {
                if let Some((s, t)) = c.region.tau_section(x0 + (x1 - x0) * i as f64 / 64.0) {
                    lo = lo.min(s);
                    hi = hi.max(t);
                }
            }
            let pad = 0.1 * (x1 - x0);
            let tau_range = (lo - 3.0 * c.lambda, hi + 3.0 * c.lambda);
            let xi_range = (x0 - pad, x1 + pad);
            let samples = psi_snapshot(&c, tau_range, xi_range, a.n_tau, a.n_xi);
            let mut table = Table::new(&["tau", "xi", "psi"]);
            let (mut off_one, mut leaked, mut outside) = (0usize, 0usize, 0usize);
            for s in &samples {
                outside += usize::from(!(0.0..=1.0).contains(&s.psi));
                off_one += usize::from(c.region.contains(s.tau, s.xi) && s.psi != 1.0);
                leaked += usize::from(!c.in_enlarged(s.tau, s.xi) && s.psi != 0.0);
                table.rows.push(vec![s.tau, s.xi, s.psi]);
            }
            let failures: Vec<String> = [(outside, "psi outside [0, 1]"), (off_one, "psi != 1 on the region"), (leaked, "psi != 0 outside the enlargement")]
                .iter()
                .filter(|(n, _)| *n > 0)
                .map(|(n, m)| format!("{m} at {n} samples"))
                .collect();
            let report = json!({
                "region": r,
                "lambda": c.lambda,
                "samples": samples.len(),
                "violations": { "range": outside, "not_one_on_region": off_one, "outside_enlargement": leaked },
                "truncation": { "tau_range": tau_range, "xi_range": xi_range, "n_tau": a.n_tau, "n_xi": a.n_xi },
            });
            Ok(Outcome { report, table: Some(table), failures })
        }
    }
}

fn spec_points(name: &str) -> Run<Vec<InequalitySpec>> {
    if let Ok(e) = name.parse::<Estimate>() {
        return Ok(e.standard_grid());
    }
    let catalog = builtin_catalog();
    let names: Vec<String> = catalog.iter().map(|s| s.name.clone()).collect();
    catalog
        .into_iter()
        .find(|s| s.name == name)
        .map(|s| vec![s])
        .ok_or_else(|| config(format!("unknown spec '{name}'; known: lacunary-gap, {}", names.join(", "))))
}

fn verify(a: &VerifyArgs) -> Run<Outcome> {
    if a.spec == "lacunary-gap" {
        let r = refined_exponents_t(rexp("p", &a.p)?, rexp("q", &a.q)?, rational("sigma", &a.sigma)?)?;
        let g = lacunary_gap(&r, a.j_max, a.width)?;
        let mut table = Table::new(&["J", "growth"]);
        table.rows = g.points.iter().map(|p| vec![p.j as f64, p.growth]).collect();
        let failures = if g.strictly_growing { vec![] } else { vec!["gap is not strictly growing".to_string()] };
        let report = json!({ "lacunary_gap": g, "truncation": { "lattice": "default per datum", "envelope_width": a.width } });
        return Ok(Outcome { report, table: Some(table), failures });
    }
    let points = spec_points(&a.spec)?;
    let kinds: Vec<FamilyKind> = if a.family == "all" { FamilyKind::ALL.to_vec() } else { vec![a.family.parse()?] };
    let dom = Domain { t_max: a.t_max, horizon_fraction: a.horizon_fraction, n_t: a.n_t, ..Domain::default() };
    let mut reports = Vec::new();
    for kind in &kinds {
        reports.extend(sweep(&points, &TestFamily::new(*kind, a.size, a.seed), &dom)?);
    }
    let mut by_point = vec![f64::NEG_INFINITY; points.len()];
    for (i, r) in reports.iter().enumerate() {
        let k = i % points.len().max(1);
        by_point[k] = by_point[k].max(r.max);
    }
    let all_finite = reports.iter().all(|r| r.ratios.iter().chain(&r.refined_ratios).all(|v| v.is_finite()));
    let max_drift = reports.iter().map(|r| r.drift).fold(0.0, f64::max);
    let mut failures = Vec::new();
    if !all_finite {
        failures.push("some ratio is not finite".to_string());
    }
    if !(max_drift <= a.drift_tolerance) {
        failures.push(format!("drift {max_drift:.3e} exceeds {}", a.drift_tolerance));
    }
    let mut table = Table::new(&["exponent_index", "max_ratio"]);
    table.rows = by_point.iter().enumerate().map(|(k, &m)| vec![k as f64, m]).collect();
    let report = json!({
        "spec": a.spec,
        "families": kinds,
        "summary": { "all_finite": all_finite, "max_ratio": by_point.iter().copied().fold(f64::NEG_INFINITY, f64::max), "max_drift": max_drift },
        "reports": reports,
        "truncation": { "domain": dom, "n_x": [256, 512] },
    });
    Ok(Outcome { report, table: Some(table), failures })
}

fn overlap(a: &OverlapArgs) -> Run<Outcome> {
    let family = match a.family.as_str() {
        "A" | "a" => Family::A,
        "B" | "b" => Family::B,
        other => return Err(config(format!("family must be A or B, got '{other}'"))),
    };
    if !(a.log_xi_min < a.log_xi_max && a.log_slope_min < a.log_slope_max) {
        return Err(config("log ranges must be increasing"));
    }
    let cfg = OverlapAuditConfig {
        family,
        samples: a.samples,
        seed: a.seed,
        adversarial: a.adversarial,
        log_xi: (a.log_xi_min, a.log_xi_max),
        log_slope: (a.log_slope_min, a.log_slope_max),
    };
    let audit = overlap_audit(&cfg);
    let mut failures = Vec::new();
    if !audit.total_ok() {
        failures.push(format!("overlap {} exceeds {OVERLAP_TOTAL_BOUND}", audit.max_total));
    }
    if a.strict_per_m && !audit.per_m_ok() {
        failures.push(format!("per-m overlap {} exceeds {OVERLAP_PER_M_BOUND}", audit.max_per_m));
    }
    let mut table = Table::new(&["overlap", "points"]);
    table.rows = audit.histogram.iter().enumerate().map(|(c, &n)| vec![c as f64, n as f64]).collect();
    let report = json!({
        "audit": audit,
        "total_ok": audit.total_ok(),
        "per_m_ok": audit.per_m_ok(),
        "truncation": { "log_xi": cfg.log_xi, "log_slope": cfg.log_slope },
    });
    Ok(Outcome { report, table: Some(table), failures })
}

fn gkdv(a: &GkdvArgs) -> Run<Outcome> {
    let integrator: Integrator =
        serde_json::from_value(json!(a.integrator)).map_err(|_| config(format!("integrator must be 'if-rk4' or 'etdrk4', got '{}'", a.integrator)))?;
    let cfg = SolverConfig { integrator, cfl: a.cfl, stride: a.stride, ..SolverConfig::new(a.alpha, a.mu, a.box_length, a.n_x, a.dt) };
    cfg.validate()?;
    if !(a.t_end > 0.0) {
        return Err(config("t_end must be positive"));
    }
    let u0 = match a.initial {
        InitialKind::Soliton => soliton_profile(a.alpha, a.speed, a.x0, a.n_x, a.box_length)?,
        InitialKind::Gaussian => {
            let (amp, w, x0) = (a.amplitude, a.width, a.x0);
            GridFunction::sample_real(a.n_x, a.box_length, |x| amp * (-((x - x0) / w).powi(2)).exp())?
        }
        InitialKind::File => {
            let path = a.input.as_ref().ok_or_else(|| config("initial = file needs input"))?;
            let f = GridFunction::read_csv(path)?;
            if f.len() != a.n_x || (f.box_length() - a.box_length).abs() > 1e-9 * a.box_length {
                return Err(config("input grid does not match n_x and box_length"));
            }
            f
        }
    };
    let scattering_params = if a.scattering {
        let alpha = parse_rational(&format!("{}", a.alpha))?.ok_or_else(|| config("alpha must be finite"))?;
        Some(lwp_params(alpha, rational("sigma", &a.sigma)?, rational("gamma_inv", &a.gamma_inv)?, rational("delta_inv", &a.delta_inv)?, Assumption::One)?)
    } else {
        None
    };
    let traj = evolve(&u0, &cfg, (0.0, a.t_end))?;
    let conserved = conserved_report(&traj);
    let duhamel = if a.duhamel { Some(duhamel_residual(&traj)?) } else { None };
    let scattering = match &scattering_params {
        Some(p) => Some(scattering_profile(&traj, p, &ScatteringConfig::default())?),
        None => None,
    };
    let n = traj.states.len();
    let m = a.snapshots.clamp(1, n);
    let picks: Vec<usize> = if m == 1 { vec![n - 1] } else { (0..m).map(|k| k * (n - 1) / (m - 1)).collect() };
    let mut table = Table::new(&["t", "x", "u"]);
    for &i in &picks {
        let s = &traj.states[i];
        for (l, z) in s.samples().iter().enumerate() {
            table.rows.push(vec![traj.times[i], s.x(l), z.re]);
        }
    }
    let mut failures = Vec::new();
    if let Some(tol) = a.max_mass_drift {
        if conserved.max_relative_mass_drift > tol {
            failures.push(format!("relative mass drift {:.3e} exceeds {tol:e}", conserved.max_relative_mass_drift));
        }
    }
    let horizon = wrap_horizon(&u0, ScatteringConfig::default().horizon_tolerance);
    let report = json!({
        "conserved": conserved,
        "duhamel_residual": duhamel,
        "scattering": scattering,
        "final_max_abs": traj.last().max_abs(),
        "truncation": {
            "horizon": horizon,
            "n_x": a.n_x,
            "box_length": a.box_length,
            "dt": traj.dt,
            "stride": traj.stride,
            "stored_states": n,
            "snapshot_times": picks.iter().map(|&i| traj.times[i]).collect::<Vec<_>>(),
        },
    });
    Ok(Outcome { report, table: Some(table), failures })
}

fn bubble(a: &BubbleArgs) -> Run<Outcome> {
    let dil = dilation(&a.dilation)?;
    match a.mode {
        BubbleMode::Extract => {
            let (f, datum) = load_datum(&a.datum)?;
            let planted = Deformation { dilation: dil, ..Deformation::new(a.plant_n, a.plant_s, a.plant_y, a.alpha)? };
            let f = apply_deformation(&planted, &f)?;
            let search = BubbleSearch { log2_n: (a.log2_n_min, a.log2_n_max), s_max: a.s_max, s_steps: a.s_steps, pad: a.pad };
            let r = extract_bubble(&f, a.alpha, dil, &search)?;
            let report = json!({
                "datum": datum,
                "planted": planted,
                "bubble": r,
                "cells": { "s": search.s_cell(), "y": f.dx() },
                "truncation": { "n_x": f.len(), "box_length": f.box_length(), "pad": a.pad },
            });
            Ok(Outcome { report, table: None, failures: vec![] })
        }
        BubbleMode::Decouple => {
            let psi = PacketSum { packets: vec![Packet::gaussian(1.0, 0.0, 1.0)] };
            let params = MorreyParams::hat(exponent("beta", &a.beta)?, exponent("gamma", &a.gamma)?, exponent("delta", &a.delta)?)?;
            let mut table = Table::new(&["separation", "relative_gap"]);
            let mut series = Vec::new();
            for &e in &a.separations {
                let y = (e as f64).exp2();
                let other = Deformation { dilation: dil, ..Deformation::new(1.0, 0.0, y, a.alpha)? };
                let first = Deformation { dilation: dil, ..Deformation::identity(a.alpha) };
                let profiles: [(Deformation, &dyn Spectrum); 2] = [(first, &psi), (other, &psi)];
                let r = decoupling_gap(&profiles, a.decouple_sigma, &params, None)?;
                table.rows.push(vec![y, r.relative_gap]);
                series.push(json!({ "separation": y, "report": r }));
            }
            let report = json!({
                "profile": "gaussian packet, unit width",
                "series": series,
                "truncation": { "lattice": "default for each spectrum, widened by one scale" },
            });
            Ok(Outcome { report, table: Some(table), failures: vec![] })
        }
    }
}
