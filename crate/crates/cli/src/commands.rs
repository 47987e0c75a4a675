//! The subcommands as functions from a [`SweepConfig`] to a [`Table`].

use std::io::Write;

use polaron_core::oracle::{run_battery, BatteryConfig};
use polaron_core::polaron::energy_unit_joules;
use polaron_core::wick::{dump_terms, table_from_expansions};
use polaron_core::{
    bound_moving, bound_sequence, build_hamiltonian, e_strong, e_var2, e_var2_derived, e_weak, effective_mass_estimate,
    solve_eta, strong_coupling_region, EngineConfig, FChoice, ModelError, MomentEngine, MomentExpansion, PolaronParams,
};
use rayon::prelude::*;

use crate::config::{Grid, SweepConfig};
use crate::error::CliError;
use crate::table::{Cell, Table};

pub const BOUNDS_SCHEMA: &str = "polaron-bounds/1";
pub const MOVING_SCHEMA: &str = "polaron-moving/1";
pub const MOMENTS_SCHEMA: &str = "polaron-moments/1";
pub const ORACLE_SCHEMA: &str = "polaron-oracle/1";

/// Cutoffs swept by the `figure` subcommand.
pub const FIGURE_K0: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

/// Runs `f` on a private pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn engine(cfg: &SweepConfig) -> MomentEngine {
    MomentEngine::new(EngineConfig { max_order: cfg.moment_cap, ..EngineConfig::default() })
}

/// Moment expansions for each cutoff; the α and P dependence is evaluated later.
fn expansions_per_k0(
    cfg: &SweepConfig,
    choice: FChoice,
    max_order: usize,
    moving: bool,
) -> Result<Vec<Vec<MomentExpansion>>, CliError> {
    let engine = engine(cfg);
    cfg.k0
        .values()
        .par_iter()
        .map(|&k0| {
            let params = PolaronParams::new(1.0, k0).with_mode(cfg.mode).with_momentum(if moving { 1.0 } else { 0.0 });
            let spec = build_hamiltonian(&params, choice)?;
            Ok(engine.expansions(&spec, max_order)?)
        })
        .collect()
}

pub fn bounds_columns(orders: usize, material: bool) -> Vec<String> {
    let mut c: Vec<String> = ["alpha", "k0", "E_W", "E_SC", "E_var2", "E_var2_derived", "strong_region"]
        .into_iter()
        .map(String::from)
        .collect();
    c.extend((1..=orders).map(|n| format!("bound_{n}")));
    c.extend((2..=orders).map(|n| format!("gap_{n}")));
    c.push("status".into());
    if material {
        c.extend(["energy_unit_J", "E_W_J", "E_SC_J", "E_var2_J"].map(String::from));
        c.extend((1..=orders).map(|n| format!("bound_{n}_J")));
    }
    c
}

/// Rest-frame bounds on the α × k0 grid, cutoff-major.
pub fn cmd_bounds(cfg: &SweepConfig) -> Result<Table, CliError> {
    let alphas = cfg.alpha_values()?;
    let unit = cfg.material.map(|m| energy_unit_joules(m.band_mass, m.sound_velocity));
    let n = cfg.orders;
    let rows = with_workers(cfg.workers, || -> Result<Vec<Vec<Cell>>, CliError> {
        let exps = expansions_per_k0(cfg, FChoice::OptimalRest, 2 * n - 1, false)?;
        let points: Vec<(usize, f64)> =
            (0..cfg.k0.values().len()).flat_map(|i| alphas.iter().map(move |&a| (i, a))).collect();
        points
            .par_iter()
            .map(|&(i, alpha)| {
                let k0 = cfg.k0.values()[i];
                let table = table_from_expansions(&exps[i], alpha, 0.0)?;
                let seq = bound_sequence(&table, n);
                let (ew, esc, ev) = (e_weak(alpha, k0), e_strong(alpha, k0), e_var2(alpha, k0));
                let mut row: Vec<Cell> = vec![
                    alpha.into(),
                    k0.into(),
                    ew.into(),
                    esc.into(),
                    ev.into(),
                    e_var2_derived(alpha, k0).into(),
                    Cell::Bool(strong_coupling_region(alpha, k0)),
                ];
                let bound = |o: usize| seq.bounds.get(o - 1).map(|b| b.bound);
                row.extend((1..=n).map(|o| Cell::from(bound(o))));
                row.extend((2..=n).map(|o| Cell::from(seq.bounds.get(o - 1).and_then(|b| b.gap))));
                row.push(Cell::Text(seq.failure.as_ref().map_or_else(|| "ok".into(), |e| e.to_string())));
                if let Some(u) = unit {
                    row.extend([u, ew * u, esc * u, ev * u].map(Cell::Num));
                    row.extend((1..=n).map(|o| Cell::from(bound(o).map(|b| b * u))));
                }
                Ok(row)
            })
            .collect()
    })??;
    let mut t = Table::new(BOUNDS_SCHEMA, bounds_columns(n, unit.is_some()));
    t.rows = rows;
    if let Some(m) = cfg.material {
        t.notes.push(format!(
            "material D={:e} J rho={:e} kg/m^3 s={:e} m/s m={:e} kg gives alpha={:.16e}, energy unit 2ms^2={:.16e} J",
            m.deformation_potential, m.density, m.sound_velocity, m.band_mass, alphas[0], unit.unwrap_or(f64::NAN)
        ));
    }
    Ok(t)
}

/// [`cmd_bounds`] over [`FIGURE_K0`], with α on `0.5:5:20` unless given.
pub fn cmd_figure(cfg: &SweepConfig, alpha_given: bool) -> Result<Table, CliError> {
    let mut c = cfg.clone();
    c.k0 = Grid(FIGURE_K0.to_vec());
    if !alpha_given {
        c.alpha = Grid::linspace(0.5, 5.0, 20);
    }
    cmd_bounds(&c)
}

pub const MOVING_COLUMNS: [&str; 8] = ["alpha", "k0", "P", "eta", "eta_residual", "bound_moving", "E_W", "status"];

fn moving_row(alpha: f64, k0: f64, p: f64) -> Vec<Cell> {
    let params = PolaronParams::new(alpha, k0).with_momentum(p);
    let ew = e_weak(alpha, k0);
    let solved: Result<(f64, f64, f64), ModelError> = if p == 0.0 {
        // η only enters through ηP, so any value serves at rest
        bound_moving(&params, 0.0).map(|e| (0.0, 0.0, e))
    } else {
        solve_eta(&params, FChoice::OptimalMoving { eta: 0.0 })
            .and_then(|s| bound_moving(&params, s.eta).map(|e| (s.eta, s.residual, e)))
    };
    let head = [alpha, k0, p].map(Cell::Num);
    match solved {
        Ok((eta, r, e)) => {
            let mut row = head.to_vec();
            row.extend([eta, r, e, ew].map(Cell::Num));
            row.push(Cell::Text("ok".into()));
            row
        }
        Err(err) => {
            let mut row = head.to_vec();
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Num(ew), Cell::Text(err.to_string())]);
            row
        }
    }
}

/// Moving-polaron bounds on the α × k0 × P grid, with an effective-mass fit per (α, k0).
pub fn cmd_moving(cfg: &SweepConfig) -> Result<Table, CliError> {
    let alphas = cfg.alpha_values()?;
    let mut points = Vec::new();
    for &k0 in cfg.k0.values() {
        for &a in &alphas {
            for &p in cfg.momentum.values() {
                points.push((a, k0, p));
            }
        }
    }
    let (rows, notes) = with_workers(cfg.workers, || {
        let rows: Vec<Vec<Cell>> = points.par_iter().map(|&(a, k0, p)| moving_row(a, k0, p)).collect();
        let pairs: Vec<(f64, f64)> =
            cfg.k0.values().iter().flat_map(|&k0| alphas.iter().map(move |&a| (a, k0))).collect();
        let notes: Vec<String> = pairs
            .par_iter()
            .map(|&(a, k0)| match effective_mass_estimate(a, k0, cfg.momentum.values()) {
                Ok(fit) => format!(
                    "m_eff alpha={a} k0={k0} m_eff={:.16e} rest_energy={:.16e} max_relative_residual={:.3e}",
                    fit.m_eff, fit.rest_energy, fit.max_relative_residual
                ),
                Err(e) => format!("m_eff alpha={a} k0={k0} unavailable: {e}"),
            })
            .collect();
        (rows, notes)
    })?;
    let mut t = Table::new(MOVING_SCHEMA, MOVING_COLUMNS.iter().map(|s| s.to_string()).collect());
    t.rows = rows;
    t.notes = notes;
    Ok(t)
}

pub fn moments_columns(max: usize) -> Vec<String> {
    let mut c: Vec<String> = ["alpha", "k0", "P"].into_iter().map(String::from).collect();
    c.extend((0..=max).map(|m| format!("M_{m}")));
    c.extend((2..=max).map(|m| format!("K_{m}")));
    c
}

/// Vacuum moments `M_0..M_cap` and central moments `K_2..K_cap`; in exact mode
/// the closed-form coefficients of the exactly assembled orders follow as notes.
pub fn cmd_moments(cfg: &SweepConfig) -> Result<Table, CliError> {
    let alphas = cfg.alpha_values()?;
    let max = cfg.moment_cap;
    let moving = cfg.momentum.values().iter().any(|p| *p > 0.0);
    let (rows, exps) = with_workers(cfg.workers, || -> Result<_, CliError> {
        let exps = expansions_per_k0(cfg, cfg.choice, max, moving)?;
        let mut points = Vec::new();
        for i in 0..cfg.k0.values().len() {
            for &a in &alphas {
                for &p in cfg.momentum.values() {
                    points.push((i, a, p));
                }
            }
        }
        let rows = points
            .par_iter()
            .map(|&(i, a, p)| -> Result<Vec<Cell>, CliError> {
                let t = table_from_expansions(&exps[i], a, p)?;
                let mut row: Vec<Cell> = vec![a.into(), cfg.k0.values()[i].into(), p.into()];
                row.extend(t.raw().iter().map(|x| Cell::Num(*x)));
                row.extend(t.central()[2..].iter().map(|x| Cell::Num(*x)));
                Ok(row)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((rows, exps))
    })??;
    let mut t = Table::new(MOMENTS_SCHEMA, moments_columns(max));
    t.rows = rows;
    t.notes.push(format!("choice={} mode={} g=8*alpha/pi", cfg.choice, cfg.mode));
    for (k0, set) in cfg.k0.values().iter().zip(&exps) {
        for (m, e) in set.iter().enumerate().skip(1) {
            let Some(terms) = e.exact_terms() else { continue };
            let name = if m == 1 { "M_1".to_string() } else { format!("K_{m}") };
            for ((c, p), cf) in terms {
                t.notes.push(format!("k0={k0} {name} [g^{c} P^{p}] = {cf}"));
            }
        }
    }
    Ok(t)
}

/// Contraction shapes of `⟨0|L^m|0⟩` for the configured choice and first cutoff.
pub fn cmd_dump_shapes<W: Write>(cfg: &SweepConfig, m: usize, connected: bool, out: &mut W) -> Result<(), CliError> {
    let moving = cfg.momentum.values().iter().any(|p| *p > 0.0);
    let k0 = cfg.k0.values()[0];
    let params = PolaronParams::new(1.0, k0).with_momentum(if moving { 1.0 } else { 0.0 });
    let spec = build_hamiltonian(&params, cfg.choice)?;
    if m > cfg.moment_cap {
        return Err(CliError::Config(format!("moment {m} exceeds the cap {}", cfg.moment_cap)));
    }
    dump_terms(&spec, m, connected, out)?;
    Ok(())
}

pub const ORACLE_COLUMNS: [&str; 4] = ["check", "passed", "margin", "detail"];

/// Runs the oracle battery; the flag reports whether every check passed.
pub fn cmd_oracle_check(cfg: &SweepConfig, tamper_m3: Option<f64>) -> Result<(Table, bool), CliError> {
    let battery = BatteryConfig {
        seed: cfg.seed,
        models: cfg.models,
        tamper_m3,
        workers: cfg.workers,
        ..BatteryConfig::default()
    };
    let report = run_battery(&battery);
    let mut t = Table::new(ORACLE_SCHEMA, ORACLE_COLUMNS.iter().map(|s| s.to_string()).collect());
    for c in &report.checks {
        t.rows.push(vec![Cell::Text(c.name.clone()), Cell::Bool(c.passed), Cell::Num(c.margin), Cell::Text(c.detail.clone())]);
    }
    let passed = report.passed();
    let failed = report.failures().count();
    t.notes.push(format!(
        "seed={} models={} tamper_m3={} checks={} failed={}",
        cfg.seed,
        cfg.models,
        tamper_m3.map_or_else(|| "none".into(), |f| f.to_string()),
        report.checks.len(),
        failed
    ));
    Ok((t, passed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SweepConfig {
        SweepConfig { alpha: Grid(vec![0.5, 1.0]), k0: Grid(vec![0.5, 1.0]), ..SweepConfig::default() }
    }

    #[test]
    fn bounds_rows_are_cutoff_major() {
        let t = cmd_bounds(&cfg()).unwrap();
        assert_eq!(t.rows.len(), 4);
        let k0 = t.values("k0").unwrap();
        let alpha = t.values("alpha").unwrap();
        assert_eq!(k0, vec![Some(0.5), Some(0.5), Some(1.0), Some(1.0)]);
        assert_eq!(alpha, vec![Some(0.5), Some(1.0), Some(0.5), Some(1.0)]);
        let ew = t.values("E_W").unwrap();
        let b1 = t.values("bound_1").unwrap();
        for (a, b) in ew.iter().zip(&b1) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn material_columns() {
        let mut c = cfg();
        c.material = Some("1.6e-18,2330,9000,9.1e-31".parse().unwrap());
        let t = cmd_bounds(&c).unwrap();
        assert_eq!(t.rows.len(), 2);
        let u = t.values("energy_unit_J").unwrap()[0].unwrap();
        let ew = t.values("E_W").unwrap()[0].unwrap();
        assert!((t.values("E_W_J").unwrap()[0].unwrap() - ew * u).abs() <= 1e-15 * (ew * u).abs());
    }

    #[test]
    fn moving_rest_row_is_weak_coupling() {
        let mut c = cfg();
        c.momentum = Grid(vec![0.0, 0.05, 0.1, 0.2]);
        c.alpha = Grid(vec![1.0]);
        c.k0 = Grid(vec![1.0]);
        let t = cmd_moving(&c).unwrap();
        let b = t.values("bound_moving").unwrap();
        assert!((b[0].unwrap() - e_weak(1.0, 1.0)).abs() < 1e-12);
        for eta in t.values("eta").unwrap() {
            let e = eta.unwrap();
            assert!((0.0..1.0).contains(&e));
        }
        assert!(t.notes[0].contains("m_eff="), "{}", t.notes[0]);
    }

    #[test]
    fn moments_basics() {
        let t = cmd_moments(&cfg()).unwrap();
        for (m0, (m1, ew)) in t
            .values("M_0")
            .unwrap()
            .into_iter()
            .zip(t.values("M_1").unwrap().into_iter().zip(
                [(0.5, 0.5), (1.0, 0.5), (0.5, 1.0), (1.0, 1.0)].map(|(a, k)| e_weak(a, k)),
            ))
        {
            assert_eq!(m0, Some(1.0));
            assert!((m1.unwrap() - ew).abs() < 1e-12);
        }
        assert!(t.values("K_2").unwrap().iter().all(|k| k.unwrap() > 0.0));
    }

    #[test]
    fn exact_mode_lists_closed_forms() {
        let mut c = cfg();
        c.mode = polaron_core::EvalMode::Exact;
        c.k0 = Grid(vec![1.0]);
        let t = cmd_moments(&c).unwrap();
        assert!(t.notes.iter().any(|n| n.starts_with("k0=1 K_2 [g^2 P^0] = ")), "{:?}", t.notes);
        assert!(!t.notes.iter().any(|n| n.contains("K_4")));
    }

    #[test]
    fn shapes_dump() {
        let mut buf = Vec::new();
        cmd_dump_shapes(&cfg(), 2, false, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("# M_2 "));
    }
}
