use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use vdmlab::chebyshev::{tau_from_constants, ChebContext, ChebMode, LawsonOptions};
use vdmlab::cone_case::{cone_zd_series, ConeProblem};
use vdmlab::domain_models::{DensityPolynomial, MeasureModel, MeasureSpec, PointSet, ProblemSpec, SetModel};
use vdmlab::fekete::{diameter_entry, lift_consistency, DiameterKind, SearchParams};
use vdmlab::graded_basis::{count_homogeneous, count_monomials, degree_sum, enumerate_basis};
use vdmlab::logvalue::ln_factorial;
use vdmlab::montecarlo::{large_deviation_probe, z_d_mc};
use vdmlab::orthopoly::{christoffel, usable_node_count, z_d_from_gram, z_d_lift, z_d_product, ZdMethod, ZdResult};
use vdmlab::rumely::{rumely_diameter_2d, RobinModel, RumelyGrid};

use crate::args::{Command, MethodArg, ModeArg, ModelArg};
use crate::cache::GramCache;
use crate::output::{fmt_f64, fmt_multi, fmt_opt, fmt_point, Table};
use crate::spec::{CliError, Params, RunSpec};

/// What a command produced: the CSV table plus sidecar material.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub summary: Value,
    /// Wall time per CSV row, kept out of the CSV so it stays reproducible.
    pub row_seconds: Vec<f64>,
    pub hints: Vec<String>,
}

impl Report {
    fn new(table: Table, summary: Value, row_seconds: Vec<f64>) -> Self {
        Self {
            table,
            summary,
            row_seconds,
            hints: Vec::new(),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> vdmlab::Result<T>) -> vdmlab::Result<(T, f64)> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64()))
}

fn problem(spec: &RunSpec) -> &ProblemSpec {
    spec.problem.as_ref().expect("validated before dispatch")
}

fn need_degree(p: &Params) -> Result<(), CliError> {
    if p.d_max == 0 {
        return Err(CliError::input("/d_max", "--d-max must be at least 1"));
    }
    Ok(())
}

/// Auto rule size: exact for integrands of degree `2 d_max` in each variable.
fn auto_nodes(p: &Params) -> usize {
    p.nodes.unwrap_or((2 * p.d_max as usize + 2).max(16))
}

fn measure(spec: &RunSpec) -> Result<(MeasureSpec, MeasureModel, usize), CliError> {
    let ms = problem(spec).measure.clone().expect("validated before dispatch");
    let n = auto_nodes(&spec.params);
    let mu = ms.build(n).map_err(|e| CliError::input("/measure", e.to_string()))?;
    let dim = problem(spec).set.dim();
    if mu.dim() != dim {
        return Err(CliError::input(
            "/measure",
            format!("measure lives in dimension {} but the set in {dim}", mu.dim()),
        ));
    }
    Ok((ms, mu, n))
}

fn root_of(log_z: f64, dim: usize, d: u32) -> vdmlab::Result<f64> {
    let l = degree_sum(dim, d)?;
    Ok(if log_z == f64::NEG_INFINITY { 0.0 } else { (log_z / (2.0 * l as f64)).exp() })
}

/// `(Z_d / m_d!)^{1/(2 l_d)}`: drops the subexponential `m_d!`, so on the
/// circle with arc measure it is exactly 1 at every degree.
fn reduced_root(log_z: f64, dim: usize, d: u32) -> vdmlab::Result<f64> {
    let m = count_monomials(dim, d)?;
    root_of(log_z - ln_factorial(m), dim, d)
}

pub fn run(spec: &RunSpec) -> Result<Report, CliError> {
    match spec.command {
        Command::Basis => basis(spec),
        Command::Cheb => cheb(spec),
        Command::Diameter => diameter(spec, DiameterKind::Plain),
        Command::Hdiameter => diameter(spec, DiameterKind::Homogeneous),
        Command::Wdiameter => diameter(spec, DiameterKind::Weighted),
        Command::LiftCheck => lift_check(spec),
        Command::Zd => zd(spec),
        Command::ZdMc => zd_mc(spec),
        Command::Ldp => ldp(spec),
        Command::Christoffel => christoffel_cmd(spec),
        Command::Rumely => rumely(spec),
        Command::Cone => cone(spec),
    }
}

fn basis(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    let dim = p.dim.ok_or_else(|| CliError::input("/dim", "basis needs --dim or a set"))?;
    if dim == 0 {
        return Err(CliError::input("/dim", "--dim must be at least 1"));
    }
    let start = Instant::now();
    if p.list {
        let b = enumerate_basis(dim, p.d_max)?;
        let mut t = Table::new(&["position", "degree", "alpha"]);
        for (i, a) in b.indices().iter().enumerate() {
            t.push(
                "graded_basis.enumerate_basis",
                vec![i.to_string(), a.degree().to_string(), fmt_multi(a.exponents())],
            );
        }
        let secs = vec![start.elapsed().as_secs_f64() / t.rows.len().max(1) as f64; t.rows.len()];
        let summary = json!({ "m_d": b.len() });
        return Ok(Report::new(t, summary, secs));
    }
    let mut t = Table::new(&["dim", "d", "m_d", "h_d", "l_d", "r_d"]);
    let mut secs = Vec::new();
    for d in 0..=p.d_max {
        let ((m, h, l), s) = timed(|| Ok((count_monomials(dim, d)?, count_homogeneous(dim, d)?, degree_sum(dim, d)?)))?;
        let r = (d as u64).checked_mul(h).ok_or(vdmlab::Error::Overflow("r_d"))?;
        t.push(
            "graded_basis.counts",
            vec![dim.to_string(), d.to_string(), m.to_string(), h.to_string(), l.to_string(), r.to_string()],
        );
        secs.push(s);
    }
    Ok(Report::new(t, json!({}), secs))
}

fn cheb(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    need_degree(p)?;
    let pr = problem(spec);
    let mesh = pr.set.mesh(p.resolution)?;
    let fine = match p.fine_factor {
        0 => None,
        f => Some(pr.set.mesh(p.resolution * f)?),
    };
    let mode = match p.mode {
        ModeArg::Plain => ChebMode::Plain,
        ModeArg::Homogeneous => ChebMode::Homogeneous,
        ModeArg::Weighted => ChebMode::Weighted(pr.weight.clone()),
    };
    let mut opts = LawsonOptions::default();
    if let Some(tol) = p.tol {
        opts.tol = tol;
    }
    let ctx = ChebContext::new(&mesh, mode.clone(), p.d_max, opts)?;
    let n = ctx.basis().block(p.d_max).end;
    let alphas: Vec<Vec<u32>> = ctx.basis().indices()[..n].iter().map(|a| a.exponents().to_vec()).collect();
    let results = alphas
        .par_iter()
        .map(|a| timed(|| ctx.constant(a, fine.as_ref())))
        .collect::<vdmlab::Result<Vec<_>>>()?;
    let mut t = Table::new(&["alpha", "degree", "mode", "log_y", "y", "tau", "residual", "mesh_gap", "iterations"]);
    let mut secs = Vec::new();
    for (r, s) in &results {
        let deg: u32 = r.alpha.iter().sum();
        let tau = (deg > 0).then(|| (r.log_y / deg as f64).exp());
        t.push(
            "chebyshev.cheb_constant",
            vec![
                fmt_multi(&r.alpha),
                deg.to_string(),
                r.mode.to_string(),
                fmt_f64(r.log_y),
                fmt_f64(r.y),
                fmt_opt(tau),
                fmt_f64(r.residual),
                fmt_opt(r.mesh_gap),
                r.iterations.to_string(),
            ],
        );
        secs.push(*s);
    }
    let tau = tau_from_constants(mesh.dim(), p.d_max, results.into_iter().map(|(r, _)| r).collect());
    let summary = json!({
        "mode": mode.label(),
        "mesh_points": mesh.len(),
        "tau_full": tau.full,
        "tau_slice": tau.slice,
        "degenerate": tau.degenerate,
    });
    Ok(Report::new(t, summary, secs))
}

fn search_params(p: &Params) -> SearchParams {
    SearchParams {
        restarts: p.restarts.max(1),
        seed: p.seed.expect("validated before dispatch"),
        ..SearchParams::default()
    }
}

fn diameter(spec: &RunSpec, kind: DiameterKind) -> Result<Report, CliError> {
    let p = &spec.params;
    need_degree(p)?;
    let pr = problem(spec);
    let mesh = pr.set.mesh(p.resolution)?;
    let params = search_params(p);
    let (op, cols) = match kind {
        DiameterKind::Homogeneous => ("fekete.diameter_entry", ["d", "h_d", "dh_d", "log_max", "root", "swaps"]),
        _ => ("fekete.diameter_entry", ["d", "m_d", "l_d", "log_max", "root", "swaps"]),
    };
    let mut t = Table::new(&cols);
    let mut secs = Vec::new();
    let mut roots = Vec::new();
    for d in 1..=p.d_max {
        let (e, s) = timed(|| diameter_entry(&mesh, kind, &pr.weight, d, &params))?;
        t.push(
            op,
            vec![
                e.d.to_string(),
                e.n.to_string(),
                e.normalizer.to_string(),
                fmt_f64(e.log_max),
                fmt_f64(e.root),
                e.swaps.to_string(),
            ],
        );
        secs.push(s);
        roots.push(e.root);
    }
    let tail: Vec<f64> = roots.iter().rev().take(3).copied().collect();
    let extrapolated = tail.iter().sum::<f64>() / tail.len() as f64;
    let spread = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = json!({
        "kind": kind,
        "mesh_points": mesh.len(),
        "extrapolated": extrapolated,
        "uncertainty": spread,
    });
    Ok(Report::new(t, summary, secs))
}

fn lift_check(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    need_degree(p)?;
    let pr = problem(spec);
    let mesh = pr.set.mesh(p.resolution)?;
    let phases = p.phases.unwrap_or(2 * p.d_max as usize + 1);
    let start = Instant::now();
    let rows = lift_consistency(&mesh, &pr.weight, p.d_max, phases, &search_params(p))?;
    let per = start.elapsed().as_secs_f64() / rows.len().max(1) as f64;
    let mut t = Table::new(&["d", "log_weighted", "log_homogeneous", "log_gap", "delta_w", "lifted_root", "relative_gap"]);
    let mut max_gap = 0f64;
    for r in &rows {
        max_gap = max_gap.max(r.log_gap.abs());
        t.push(
            "fekete.lift_consistency",
            vec![
                r.d.to_string(),
                fmt_f64(r.log_weighted),
                fmt_f64(r.log_homogeneous),
                fmt_f64(r.log_gap),
                fmt_f64(r.delta_w),
                fmt_f64(r.lifted_root),
                fmt_f64(r.relative_gap),
            ],
        );
    }
    let summary = json!({ "phases": phases, "max_abs_log_gap": max_gap });
    Ok(Report::new(t, summary, vec![per; rows.len()]))
}

fn zd(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    need_degree(p)?;
    let w = &problem(spec).weight;
    let (ms, mu, n_auto) = measure(spec)?;
    let cache = GramCache::from_env();
    let hits = std::sync::atomic::AtomicUsize::new(0);
    let one = |d: u32| -> vdmlab::Result<ZdResult> {
        match p.method {
            MethodArg::Stieltjes => z_d_product(&mu, w, d, ZdMethod::Stieltjes),
            MethodArg::Lift => z_d_lift(&mu, w, d, p.phases.unwrap_or(2 * d as usize + 1)),
            MethodArg::Cholesky => {
                let m = count_monomials(mu.dim(), d)?;
                match &cache {
                    Some(c) if usable_node_count(&mu, w, d)? as u64 >= m => {
                        let (g, hit) = c.gram(&ms, n_auto, &mu, w, d)?;
                        if hit {
                            hits.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        }
                        z_d_from_gram(&g)
                    }
                    _ => z_d_product(&mu, w, d, ZdMethod::Cholesky),
                }
            }
        }
    };
    let rows = (1..=p.d_max)
        .into_par_iter()
        .map(|d| timed(|| one(d)))
        .collect::<vdmlab::Result<Vec<_>>>()?;
    let mut t = Table::new(&["d", "m_d", "method", "log_zd", "root", "root_reduced", "cond", "flags"]);
    let mut secs = Vec::new();
    let mut hints = Vec::new();
    let method = match p.method {
        MethodArg::Stieltjes => "stieltjes",
        MethodArg::Cholesky => "cholesky",
        MethodArg::Lift => "lift",
    };
    let op = match p.method {
        MethodArg::Lift => "orthopoly.z_d_lift",
        _ => "orthopoly.z_d_product",
    };
    for (r, s) in &rows {
        if r.flags.iter().any(|f| f == "ill-conditioned") {
            hints.push(format!(
                "d = {}: Gram matrix is ill-conditioned; lower --d-max, use --method stieltjes or better-spread nodes",
                r.d
            ));
        }
        t.push(
            op,
            vec![
                r.d.to_string(),
                r.m.to_string(),
                method.to_string(),
                fmt_f64(r.zd.log_magnitude),
                fmt_f64(r.root),
                fmt_f64(reduced_root(r.zd.log_magnitude, mu.dim(), r.d)?),
                fmt_opt(r.condition),
                r.flags.join("|"),
            ],
        );
        secs.push(*s);
    }
    let summary = json!({
        "nodes": mu.finite().map(|(pts, _)| pts.len()).ok(),
        "total_mass": mu.total_mass(),
        "cache": cache.is_some(),
        "cache_hits": hits.into_inner(),
    });
    let mut rep = Report::new(t, summary, secs);
    rep.hints = hints;
    Ok(rep)
}

fn zd_mc(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    need_degree(p)?;
    let w = &problem(spec).weight;
    let (_, mu, _) = measure(spec)?;
    let sampler = mu.to_sampler()?;
    let seed = p.seed.expect("validated before dispatch");
    let mut t = Table::new(&["d", "m_d", "log_zd", "root", "root_reduced", "rel_stderr", "samples", "zero_samples", "seed"]);
    let mut secs = Vec::new();
    for d in 1..=p.d_max {
        let (e, s) = timed(|| z_d_mc(&sampler, w, d, p.samples, seed))?;
        let m = count_monomials(sampler.dim(), d)?;
        t.push(
            "montecarlo.z_d_mc",
            vec![
                d.to_string(),
                m.to_string(),
                fmt_f64(e.mean.log_magnitude),
                fmt_f64(root_of(e.mean.log_magnitude, sampler.dim(), d)?),
                fmt_f64(reduced_root(e.mean.log_magnitude, sampler.dim(), d)?),
                fmt_f64(e.rel_stderr),
                e.samples.to_string(),
                e.zero_samples.to_string(),
                e.seed.to_string(),
            ],
        );
        secs.push(s);
    }
    Ok(Report::new(t, json!({ "total_mass": sampler.total_mass() }), secs))
}

fn ldp(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    need_degree(p)?;
    let w = &problem(spec).weight;
    let (_, mu, _) = measure(spec)?;
    let sampler = mu.to_sampler()?;
    let seed = p.seed.expect("validated before dispatch");
    let mut t = Table::new(&[
        "d",
        "eta",
        "delta",
        "probability",
        "stderr",
        "bound",
        "effective_samples",
        "samples",
        "seed",
        "holds_3se",
    ]);
    let mut secs = Vec::new();
    let mut all = true;
    for d in 1..=p.d_max {
        let (r, s) = timed(|| large_deviation_probe(&sampler, w, d, p.eta, p.delta, p.samples, seed))?;
        all &= r.holds(3.0);
        t.push(
            "montecarlo.large_deviation_probe",
            vec![
                d.to_string(),
                fmt_f64(r.eta),
                fmt_f64(r.delta),
                fmt_f64(r.probability),
                fmt_f64(r.stderr),
                fmt_f64(r.bound),
                fmt_f64(r.effective_samples),
                r.samples.to_string(),
                r.seed.to_string(),
                r.holds(3.0).to_string(),
            ],
        );
        secs.push(s);
    }
    Ok(Report::new(t, json!({ "all_hold": all }), secs))
}

fn christoffel_cmd(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    need_degree(p)?;
    let w = &problem(spec).weight;
    let (_, mu, _) = measure(spec)?;
    let (nodes, _) = mu.finite()?;
    let nodes = nodes.clone();
    let mut masses = Vec::new();
    if p.per_node {
        let (r, s) = timed(|| christoffel(&mu, w, p.d_max, &nodes, 0))?;
        let mut t = Table::new(&["d", "node", "point", "node_mass", "kernel", "density"]);
        for (i, pt) in nodes.iter().enumerate() {
            t.push(
                "orthopoly.christoffel",
                vec![
                    r.d.to_string(),
                    i.to_string(),
                    fmt_point(pt),
                    fmt_f64(r.node_masses[i]),
                    fmt_f64(r.kernel[i]),
                    fmt_f64(r.density[i]),
                ],
            );
        }
        let n = t.rows.len();
        return Ok(Report::new(t, json!({ "total_mass": r.total_mass }), vec![s / n.max(1) as f64; n]));
    }
    // moments need no evaluation points
    let none = PointSet::empty(nodes.dim());
    let reports = (1..=p.d_max)
        .into_par_iter()
        .map(|d| timed(|| christoffel(&mu, w, d, &none, p.moments)))
        .collect::<vdmlab::Result<Vec<_>>>()?;
    let mut t = Table::new(&["d", "m_d", "total_mass", "alpha", "moment_re", "moment_im"]);
    let mut secs = Vec::new();
    for (r, s) in &reports {
        masses.push(r.total_mass);
        let k = r.moments.len().max(1);
        for (alpha, m) in &r.moments {
            t.push(
                "orthopoly.christoffel",
                vec![
                    r.d.to_string(),
                    r.m.to_string(),
                    fmt_f64(r.total_mass),
                    fmt_multi(alpha),
                    fmt_f64(m.re),
                    fmt_f64(m.im),
                ],
            );
            secs.push(s / k as f64);
        }
    }
    let worst = masses.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    Ok(Report::new(t, json!({ "max_mass_defect": worst }), secs))
}

fn rumely(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    let model = match p.model {
        ModelArg::Ball => RobinModel::Ball { radius: p.radius },
        ModelArg::Polydisk => RobinModel::Polydisk { radius: p.radius },
        ModelArg::Product => RobinModel::Product { radii: p.radii.clone() },
    };
    model.validate().map_err(|e| CliError::input("/model", e.to_string()))?;
    let mut grid = RumelyGrid {
        s_max: p.grid_radius,
        ..RumelyGrid::default()
    };
    if let Some(n) = p.grid_size {
        grid.density = n;
    }
    let (r, s) = timed(|| rumely_diameter_2d(&model, &grid))?;
    let mut t = Table::new(&["model", "diameter", "neg_log_d", "integral", "slice_term", "mass", "s_max", "nodes"]);
    t.push(
        "rumely.rumely_diameter_2d",
        vec![
            r.model.clone(),
            fmt_f64(r.diameter),
            fmt_f64(r.neg_log_d),
            fmt_f64(r.integral),
            fmt_f64(r.slice_term),
            fmt_f64(r.mass),
            fmt_f64(r.s_max),
            r.nodes.to_string(),
        ],
    );
    Ok(Report::new(t, json!({ "grid": grid }), vec![s]))
}

fn cone(spec: &RunSpec) -> Result<Report, CliError> {
    let p = &spec.params;
    need_degree(p)?;
    let pr = problem(spec);
    let SetModel::ConeTruncation { cone, .. } = &pr.set else {
        return Err(CliError::input("/set", "cone needs a cone-truncation set (--set cone)"));
    };
    let n = cone.dim();
    let alpha = p.density_exp.clone().unwrap_or_else(|| vec![0; n]);
    if alpha.len() != n {
        return Err(CliError::input("/density_exp", format!("density exponents need {n} entries")));
    }
    // Q = scale |x|^exponent + offset with offset >= 0 certifies itself
    let mut weight = pr.weight.clone();
    let inferred = weight.growth.is_none() && weight.scale > 0.0 && weight.offset >= 0.0 && weight.cutoff.is_none();
    if inferred {
        weight = weight.clone().with_growth(weight.scale, weight.exponent);
    }
    let problem = ConeProblem {
        cone: cone.clone(),
        density: DensityPolynomial::monomial(1.0, alpha),
        weight,
        t: p.t,
    };
    let nodes = p.nodes.unwrap_or(if n == 1 { 256 } else { 64 });
    let stability = p.tol.unwrap_or(1e-6);
    let start = Instant::now();
    let series = cone_zd_series(&problem, p.d_max, nodes, 1e-9, stability)?;
    let per = start.elapsed().as_secs_f64() / series.rows.len().max(1) as f64;
    let mut t = Table::new(&["d", "t", "log_zd", "root", "log_zd_2t", "change"]);
    for r in &series.rows {
        t.push(
            "cone_case.cone_zd_series",
            vec![
                r.d.to_string(),
                fmt_f64(r.t),
                fmt_f64(r.log_zd),
                fmt_f64(r.root),
                fmt_f64(r.log_zd_2t),
                fmt_f64(r.change),
            ],
        );
    }
    let summary = json!({
        "nodes_per_axis": nodes,
        "growth_inferred": inferred,
        "truncation_tol": series.truncation_tol,
        "stability_tol": series.stability_tol,
    });
    Ok(Report::new(t, summary, vec![per; series.rows.len()]))
}
