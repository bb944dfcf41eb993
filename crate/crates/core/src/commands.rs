//! The CLI subcommands as library functions. Each writes its files into the
//! output directory and returns a JSON report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::backscatter::{chi_projection, filtered_relative_error, BackscatterModel};
use crate::error::{Error, Result};
use crate::forward::{factorial_fit, restrict_backscatter, ForwardSolver, Scheme};
use crate::io::config::ExperimentConfig;
use crate::io::lpbs::{
    cylinder_metadata, load_cylinder, read_container, save_cylinder, save_scalar, scalar_from, write_container, FieldKind,
    Metadata,
};
use crate::io::report::{write_json, Provenance};
use crate::selftest::{run_suite, Suite, SuiteSetup};
use crate::spectral_born::{compare_born_terms, resolvent_identity_check};

type C64 = Complex64;

/// Relative change of the outgoing window over the last step that counts as frozen out.
pub const FROZEN_TOL: f64 = 1e-6;

fn out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = std::env::var_os("LPBS_OUT_DIR").map(PathBuf::from).or_else(|| out.map(Path::to_path_buf));
    let dir = dir.unwrap_or_else(|| cfg.output_dir());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn finish<T: Serialize>(cfg: &T, command: &str, seed: u64, start: Instant, mut report: Value) -> Result<Value> {
    let prov = Provenance::new(cfg, command, seed, start.elapsed().as_secs_f64())?;
    report["provenance"] = serde_json::to_value(prov)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub all_pass: bool,
    pub report: Value,
}

pub fn selftest(suite: Suite, setup: &SuiteSetup) -> Result<SelftestReport> {
    let start = Instant::now();
    let checks = run_suite(suite, setup)?;
    let all_pass = checks.iter().all(|c| c.pass);
    let settings = json!({
        "suite": suite,
        "n_side": setup.grid.n_side,
        "rho": setup.grid.rho,
        "sphere_nodes": setup.sphere.len(),
        "n_s": setup.n_s,
        "seed": setup.seed,
    });
    let report = json!({ "ok": all_pass, "command": "selftest", "checks": checks });
    Ok(SelftestReport { all_pass, report: finish(&settings, "selftest", setup.seed, start, report)? })
}

/// Full forward solve for every incoming node: kernel, backscatter data
/// `beta_S(V)` and the phantom.
pub fn forward(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Value> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = out_dir(cfg, out)?;
    let phantom = cfg.phantom()?;
    let sphere = cfg.sphere()?;
    let fcfg = cfg.forward()?;
    let s_map = cfg.s_map()?;
    let prov = |wall: f64| Provenance::new(cfg, "forward", cfg.seed, wall);

    let all: Vec<usize> = (0..sphere.len()).collect();
    let solver = ForwardSolver::new(&phantom.field, &sphere, &fcfg)?;
    let traj = solver.solve(&all, Scheme::Rk4)?;
    let kernel = solver.extract_kernel(&traj, FROZEN_TOL)?;
    let cut = -2.0 * phantom.field.support_radius - 4.0 * fcfg.shape.epsilon;
    let kernel_mass_below = (0..all.len()).map(|jj| kernel.mass_fraction_below(0, jj, cut)).fold(0.0, f64::max);

    let mut meta = Metadata::new(FieldKind::Array, vec![all.len(), sphere.len(), kernel.tau.n], false);
    meta.sphere_degree = Some(sphere.degree);
    meta.pulse = Some(fcfg.shape);
    meta.s_matrix = Some(s_map.matrix);
    meta.provenance = Some(prov(start.elapsed().as_secs_f64())?);
    meta.extra = json!({
        "quantity": "scattering kernel incl. free pulse",
        "axes": ["incoming node", "outgoing node", "tau"],
        "tau0": kernel.tau.s0,
        "dtau": kernel.tau.ds,
    });
    let kernel_path = dir.join("kernel.lpbs");
    write_container(&kernel_path, &meta, &kernel.values)?;

    let model = BackscatterModel::new(&phantom.field.grid, &sphere, &fcfg, &s_map)?;
    let restricted = restrict_backscatter(&kernel, 0, &s_map, model.s_grid(), None)?;
    let data = chi_projection(&restricted.values.scaled(C64::new(0.0, -1.0)), &model.projection)?;
    let mut dmeta = cylinder_metadata(&data);
    dmeta.pulse = Some(fcfg.shape);
    dmeta.s_matrix = Some(s_map.matrix);
    dmeta.provenance = Some(prov(start.elapsed().as_secs_f64())?);
    dmeta.extra = json!({ "quantity": "beta_S" });
    let data_path = dir.join("backscatter.lpbs");
    save_cylinder(&data, &data_path, Some(dmeta))?;
    let potential_path = dir.join("potential.lpbs");
    save_scalar(&phantom.field, &potential_path, Some(prov(start.elapsed().as_secs_f64())?))?;

    let data_max = data.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let report = json!({
        "ok": true,
        "command": "forward",
        "files": { "kernel": kernel_path, "backscatter": data_path, "potential": potential_path },
        "phantom_h2_norm": phantom.h2_norm,
        "last_step_change": traj.last_step_change,
        "kernel_mass_fraction_below": { "cut": cut, "value": kernel_mass_below },
        "data_norm": data.norm_l2(),
        "data_max_abs": data_max,
    });
    let report = finish(cfg, "forward", cfg.seed, start, report)?;
    write_json(&dir.join("forward_report.json"), &report)?;
    Ok(report)
}

/// Parses `a..b` (inclusive) or a single order.
pub fn parse_orders(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidConfig(format!("orders {text:?}: expected like 1..6"));
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let j = text.parse().map_err(|_| bad())?;
            (j, j)
        }
    };
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a, b))
}

/// Born terms for the probe nodes, their norms and the factorial fit.
pub fn born(cfg: &ExperimentConfig, orders: (usize, usize), out: Option<&Path>) -> Result<Value> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = out_dir(cfg, out)?;
    let phantom = cfg.phantom()?;
    let sphere = cfg.sphere()?;
    let mut fcfg = cfg.forward()?;
    fcfg.check_stability = false;
    let solver = ForwardSolver::new(&phantom.field, &sphere, &fcfg)?;
    let (lo, hi) = orders;
    let state = solver.born_terms(&cfg.probe_nodes, hi)?;
    let norms: Vec<f64> = (lo..=hi).map(|j| state.part(j - 1).norm_l2()).collect();
    let fit = if norms.len() >= 2 && norms.iter().all(|n| *n > 0.0) { Some(factorial_fit(lo, &norms)?) } else { None };

    let csv_path = dir.join("born_decay.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["order", "norm", "ratio", "fit_residual"])?;
    for (i, n) in norms.iter().enumerate() {
        let ratio = if i > 0 && norms[i - 1] > 0.0 { n / norms[i - 1] } else { f64::NAN };
        let res = fit.as_ref().map_or(f64::NAN, |f| f.residuals[i]);
        w.write_record([(lo + i).to_string(), n.to_string(), ratio.to_string(), res.to_string()])?;
    }
    w.flush()?;

    let mut meta = Metadata::new(
        FieldKind::Array,
        vec![sphere.len(), state.frame.n, state.parts, state.incoming.len()],
        false,
    );
    meta.sphere_degree = Some(sphere.degree);
    meta.pulse = Some(fcfg.shape);
    meta.provenance = Some(Provenance::new(cfg, "born", cfg.seed, start.elapsed().as_secs_f64())?);
    meta.extra = json!({
        "quantity": "Born terms alpha_j at t_end, characteristic frame",
        "axes": ["outgoing node", "s'", "order - 1", "probe"],
        "probe_nodes": cfg.probe_nodes,
        "s0": state.frame.s0,
        "ds": state.frame.ds,
        "t": state.t,
    });
    let terms_path = dir.join("born_terms.lpbs");
    write_container(&terms_path, &meta, &state.values)?;

    let report = json!({
        "ok": true,
        "command": "born",
        "orders": [lo, hi],
        "norms": norms,
        "fit": fit,
        "files": { "decay": csv_path, "terms": terms_path },
    });
    let report = finish(cfg, "born", cfg.seed, start, report)?;
    write_json(&dir.join("born_report.json"), &report)?;
    Ok(report)
}

/// Damped Picard inversion of stored `beta_S` data.
pub fn invert(cfg: &ExperimentConfig, data_path: &Path, out: Option<&Path>, mut progress: impl FnMut(usize, f64)) -> Result<Value> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = out_dir(cfg, out)?;
    let sphere = cfg.sphere()?;
    let fcfg = cfg.forward()?;
    let grid = cfg.grid()?;
    let model = BackscatterModel::new(&grid, &sphere, &fcfg, &cfg.s_map()?)?;
    let (data, meta) = load_cylinder(data_path)?;
    if data.s_grid != *model.s_grid() || data.sphere.nodes != sphere.nodes {
        return Err(Error::GridMismatch(format!(
            "data on {} nodes x {:?} do not match the configured model ({} nodes x {:?})",
            data.n_nodes(),
            data.s_grid,
            sphere.len(),
            model.s_grid()
        )));
    }
    if let Some(m) = meta.s_matrix {
        if m != model.s_map().matrix {
            return Err(Error::InvalidConfig("data were generated for a different S".into()));
        }
    }
    let truth = cfg.phantom()?.field;
    let mut errors = Vec::new();
    let result = model.invert(&data, &cfg.inversion, |k, v| {
        let e = filtered_relative_error(&model, v, &truth).unwrap_or(f64::NAN);
        errors.push(e);
        progress(k, e);
    })?;
    let csv_path = dir.join("convergence.csv");
    result.write_csv(&csv_path)?;
    let field_path = dir.join("recovered.lpbs");
    save_scalar(&result.potential, &field_path, Some(Provenance::new(cfg, "invert", cfg.seed, start.elapsed().as_secs_f64())?))?;
    let res = result.residuals();
    let report = json!({
        "ok": true,
        "command": "invert",
        "converged": result.converged,
        "monotone": result.is_monotone(),
        "iterations": res.len().saturating_sub(1),
        "final_residual": res.last(),
        "filtered_error_vs_config_phantom": errors,
        "files": { "convergence": csv_path, "recovered": field_path },
    });
    let report = finish(cfg, "invert", cfg.seed, start, report)?;
    write_json(&dir.join("invert_report.json"), &report)?;
    Ok(report)
}

/// Time-domain against closed-form `kappa^_1`, `kappa^_2`, and the resolvent
/// identity at each configured `lambda`.
pub fn spectral_check(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Value> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = out_dir(cfg, out)?;
    let phantom = cfg.phantom()?;
    let sphere = cfg.sphere()?;
    let mut fcfg = cfg.forward()?;
    fcfg.check_stability = false;
    let lambdas: Vec<C64> = cfg.lambdas.iter().map(|l| C64::new(l[0], l[1])).collect();
    let kappa = compare_born_terms(&phantom.field, &sphere, &fcfg, &cfg.s_map()?, &cfg.probe_nodes, &lambdas, 2, 3)?;
    let s_long = crate::geometry::SGrid::with_spacing(8.0 * cfg.rho, cfg.ds())?;
    let resolvent = lambdas
        .iter()
        .filter(|l| l.im < 0.0)
        .map(|&l| resolvent_identity_check(&phantom.field, l, &s_long, &sphere, 3))
        .collect::<Result<Vec<_>>>()?;
    let worst = |j: usize| kappa.iter().filter(|c| c.order == j).map(|c| c.rel_defect).fold(0.0, f64::max);
    let report = json!({
        "ok": true,
        "command": "spectral-check",
        "kappa": kappa,
        "kappa1_max_defect": worst(1),
        "kappa2_max_defect": worst(2),
        "resolvent": resolvent,
    });
    let report = finish(cfg, "spectral-check", cfg.seed, start, report)?;
    write_json(&dir.join("spectral_report.json"), &report)?;
    Ok(report)
}

/// `axis=value` for scalar fields (`x`, `y`, `z`) or `node=k` for cylinder data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slice {
    Axis(usize, f64),
    Node(usize),
}

impl std::str::FromStr for Slice {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("slice {text:?}: expected x=, y=, z= or node="));
        let (k, v) = text.split_once('=').ok_or_else(bad)?;
        match k.trim() {
            "x" | "y" | "z" => {
                let axis = ["x", "y", "z"].iter().position(|a| *a == k.trim()).expect("axis");
                Ok(Slice::Axis(axis, v.trim().parse().map_err(|_| bad())?))
            }
            "node" => Ok(Slice::Node(v.trim().parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

/// Writes one slice of a stored field as CSV.
pub fn plot_data(input: &Path, slice: Slice, out: &Path) -> Result<Value> {
    let (meta, payload) = read_container(input)?;
    let mut w = csv::Writer::from_path(out)?;
    let rows = match (meta.kind, slice) {
        (FieldKind::Scalar, Slice::Axis(axis, value)) => {
            let f = scalar_from(&meta, payload)?;
            let g = &f.grid;
            let n = g.n_side;
            let plane = (0..n)
                .min_by(|&a, &b| (g.coord(a) - value).abs().total_cmp(&(g.coord(b) - value).abs()))
                .expect("n_side > 0");
            let names = ["x", "y", "z"];
            let (u, v) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            w.write_record([names[u], names[v], "value"])?;
            for a in 0..n {
                for b in 0..n {
                    let mut idx = [0; 3];
                    idx[axis] = plane;
                    idx[u] = a;
                    idx[v] = b;
                    let val = f.values[g.index(idx[0], idx[1], idx[2])];
                    w.write_record([g.coord(a).to_string(), g.coord(b).to_string(), val.to_string()])?;
                }
            }
            n * n
        }
        (FieldKind::Cylinder, Slice::Node(k)) => {
            let g = crate::io::lpbs::cylinder_from(&meta, payload, None)?;
            if k >= g.n_nodes() {
                return Err(Error::InvalidConfig(format!("node {k} >= {}", g.n_nodes())));
            }
            w.write_record(["s", "re", "im"])?;
            for (i, v) in g.column(k).iter().enumerate() {
                w.write_record([g.s_grid.s(i).to_string(), v.re.to_string(), v.im.to_string()])?;
            }
            g.n_s()
        }
        (kind, _) => {
            return Err(Error::InvalidConfig(format!("slice {slice:?} does not apply to {kind:?} data")));
        }
    };
    w.flush()?;
    Ok(json!({ "ok": true, "command": "plot-data", "rows": rows, "out": out }))
}
