use anyhow::Result;
use rayon::prelude::*;
use serde_json::json;

use reset_ruin::{
    classical_ruin, doob_symmetry_check, estimate_ruin, exact_ruin, midpoint_invariance_sweep,
    ruin_probability_renewal, ruin_probability_spectral, sign_change, Bracket, WalkConfig,
};

use crate::output::{Check, Record, Report};
use crate::spec::{usage, Command, RunSpec};

const TABLE_GAMMAS: [f64; 3] = [0.3, 0.6, 0.9];
const SWEEP_GAMMAS: [f64; 4] = [0.0, 0.3, 0.6, 0.9];
const VALIDATE_DOMAIN: usize = 30;
const VALIDATE_PS: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
const VALIDATE_GAMMAS: [f64; 7] = [0.0, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9];

const ROUTE_TOL: f64 = 1e-10;
const RENEWAL_TOL: f64 = 1e-12;
const MIDPOINT_TOL: f64 = 1e-10;
const DOOB_TOL: f64 = 1e-13;
const TABLE_TOL: f64 = 5e-5;

/// Published four-digit values, rows z = 1..4, columns gamma = 0.3, 0.6, 0.9.
const BIASED_TABLE: [[f64; 3]; 4] = [
    [0.8731, 0.9780, 0.9997],
    [0.4829, 0.6404, 0.8808],
    [0.1236, 0.0689, 0.0175],
    [0.0188, 0.0029, 0.0000],
];
const FAIR_TABLE: [[f64; 3]; 4] = [
    [0.9463, 0.9914, 0.9999],
    [0.7149, 0.8276, 0.9523],
    [0.2851, 0.1724, 0.0477],
    [0.0537, 0.0086, 0.0001],
];

pub fn execute(spec: &RunSpec) -> Result<Report> {
    match spec.command {
        Command::Exact => pointwise(spec, "exact", |c| Ok(exact_ruin(c)?)),
        Command::Spectral => pointwise(spec, "spectral", |c| Ok(ruin_probability_spectral(c)?)),
        Command::Mc => mc(spec),
        Command::Table => table(spec),
        Command::Derivative => derivative(spec),
        Command::Critical => critical(spec),
        Command::Sweep => sweep(spec),
        Command::Validate => validate(spec),
    }
}

fn pointwise(spec: &RunSpec, method: &str, f: impl Fn(&WalkConfig) -> Result<f64>) -> Result<Report> {
    let a = spec.need_a()?;
    let mut records = Vec::new();
    for p in spec.p_grid(None)? {
        for gamma in spec.gamma_grid(None)? {
            for z in spec.sites(a) {
                let c = WalkConfig::new(a, z, p, gamma)?;
                records.push(Record::point(a, z, p, gamma, method, f(&c)?));
            }
        }
    }
    Ok(Report { records, ..Report::default() })
}

fn mc_record(spec: &RunSpec, c: &WalkConfig) -> Result<Record> {
    let est = estimate_ruin(c, spec.n_sim, spec.seed)?;
    Ok(Record {
        stderr: Some(est.stderr),
        seed: Some(est.seed),
        ..Record::point(c.a(), c.z(), c.p(), c.gamma(), "mc", est.p_hat)
    })
}

fn mc(spec: &RunSpec) -> Result<Report> {
    let a = spec.need_a()?;
    let mut records = Vec::new();
    for p in spec.p_grid(None)? {
        for gamma in spec.gamma_grid(None)? {
            for z in spec.sites(a) {
                records.push(mc_record(spec, &WalkConfig::new(a, z, p, gamma)?)?);
            }
        }
    }
    Ok(Report { records, ..Report::default() })
}

/// Ruin probability at any site, boundaries included.
fn ruin_at(a: usize, z: usize, p: f64, gamma: f64) -> Result<f64> {
    if z == 0 || z == a {
        return Ok(classical_ruin(a, z, p)?);
    }
    Ok(ruin_probability_spectral(&WalkConfig::new(a, z, p, gamma)?)?)
}

fn all_sites(spec: &RunSpec, a: usize) -> Vec<usize> {
    match spec.z {
        Some(z) => vec![z],
        None => (0..=a).collect(),
    }
}

fn table(spec: &RunSpec) -> Result<Report> {
    let a = spec.need_a()?;
    let gammas = spec.gamma_grid(Some(&TABLE_GAMMAS))?;
    let mut records = Vec::new();
    for p in spec.p_grid(None)? {
        for z in all_sites(spec, a) {
            for &gamma in &gammas {
                records.push(Record::point(a, z, p, gamma, "spectral", ruin_at(a, z, p, gamma)?));
                if z == 0 || z == a {
                    // absorbed before the first step
                    let value = if z == 0 { 1.0 } else { 0.0 };
                    records.push(Record {
                        stderr: Some(0.0),
                        seed: Some(spec.seed),
                        ..Record::point(a, z, p, gamma, "mc", value)
                    });
                } else {
                    records.push(mc_record(spec, &WalkConfig::new(a, z, p, gamma)?)?);
                }
            }
        }
    }
    Ok(Report { records, ..Report::default() })
}

fn sweep(spec: &RunSpec) -> Result<Report> {
    let a = spec.need_a()?;
    let mut records = Vec::new();
    for p in spec.p_grid(None)? {
        for gamma in spec.gamma_grid(Some(&SWEEP_GAMMAS))? {
            for z in all_sites(spec, a) {
                records.push(Record::point(a, z, p, gamma, "spectral", ruin_at(a, z, p, gamma)?));
            }
        }
    }
    Ok(Report { records, ..Report::default() })
}

/// `(p, gamma)` pairs: explicit grids win over a figure preset's series.
fn series(spec: &RunSpec) -> Result<Vec<(f64, f64)>> {
    let explicit = spec.p.is_some() || !spec.ps.is_empty() || spec.gamma.is_some() || !spec.gammas.is_empty();
    if let (false, Some(s)) = (explicit, spec.preset.and_then(|p| p.series())) {
        return Ok(s);
    }
    let mut out = Vec::new();
    for p in spec.p_grid(None)? {
        for g in spec.gamma_grid(None)? {
            out.push((p, g));
        }
    }
    Ok(out)
}

fn derivative(spec: &RunSpec) -> Result<Report> {
    let a = spec.need_a()?;
    let mut records = Vec::new();
    for (p, gamma) in series(spec)? {
        for z in spec.sites(a) {
            let h = reset_ruin::derivative(&WalkConfig::new(a, z, p, gamma)?)?.h;
            records.push(Record::point(a, z, p, gamma, "derivative", h));
        }
    }
    Ok(Report { records, ..Report::default() })
}

fn critical(spec: &RunSpec) -> Result<Report> {
    let a = spec.need_a()?;
    let p = spec.p.ok_or_else(|| usage("--p is required for critical"))?;
    let gamma = spec.gamma.ok_or_else(|| usage("--gamma is required for critical"))?;
    let report = sign_change(a, p, gamma)?;

    let mut records: Vec<Record> =
        (1..a).map(|z| Record::point(a, z, p, gamma, "derivative", report.h(z))).collect();
    records.push(Record { z: None, ..Record::point(a, 0, p, gamma, "z_dagger", report.z_cross) });

    let (lo, hi, exact_zero) = match report.bracket {
        Bracket::ExactZero(z) => (z, z, true),
        Bracket::Between(lo, hi) => (lo, hi, false),
    };
    let signs: Vec<bool> = report
        .h_values
        .iter()
        .filter(|h| h.abs() > reset_ruin::critical::ZERO_TOLERANCE)
        .map(|&h| h > 0.0)
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let mut checks = vec![Check::at_most("sign_changes", changes as f64, 1.0)];
    if a % 2 == 0 {
        checks.push(Check::at_most("midpoint_zero", report.h(a / 2).abs(), reset_ruin::critical::ZERO_TOLERANCE));
    }
    let extra = json!({
        "z_dagger": report.z_cross,
        "bracket": [lo, hi],
        "exact_zero": exact_zero,
        "midpoint_exact": report.midpoint_exact,
        "interpolation": "linear between adjacent integer sites",
        "h": report.h_values,
    });
    Ok(Report { records, checks, extra: Some(("critical".into(), extra)) })
}

fn max_over<T: Sync>(items: &[T], f: impl Fn(&T) -> Result<f64> + Sync + Send) -> Result<f64> {
    items
        .par_iter()
        .map(f)
        .try_reduce(|| 0.0, |x, y| Ok(x.max(y)))
}

fn validate(spec: &RunSpec) -> Result<Report> {
    let top = spec.a.unwrap_or(VALIDATE_DOMAIN);
    if top < 2 {
        return Err(usage("--a must be at least 2"));
    }
    let ps = spec.p_grid(Some(&VALIDATE_PS))?;
    let gammas = spec.gamma_grid(Some(&VALIDATE_GAMMAS))?;

    let mut grid = Vec::new();
    for a in 2..=top {
        for z in 1..a {
            for &p in &ps {
                for &g in &gammas {
                    grid.push(WalkConfig::new(a, z, p, g)?);
                }
            }
        }
    }
    let routes = grid
        .par_iter()
        .map(|c| {
            let exact = exact_ruin(c)?;
            let spectral = ruin_probability_spectral(c)?;
            let renewal = ruin_probability_renewal(c)?;
            let classical = if c.gamma() == 0.0 { (spectral - classical_ruin(c.a(), c.z(), c.p())?).abs() } else { 0.0 };
            Ok([(spectral - exact).abs(), (renewal - exact).abs(), (spectral - renewal).abs(), classical])
        })
        .try_reduce(|| [0.0; 4], |x, y| Ok(std::array::from_fn(|i| x[i].max(y[i]))))
        .map_err(|e: reset_ruin::Error| anyhow::Error::from(e))?;

    let evens: Vec<usize> = (2..=top).step_by(2).collect();
    let midpoint = max_over(&evens, |&a| Ok(midpoint_invariance_sweep(a, &ps, &gammas)?))?;
    let doob_cases: Vec<(usize, f64)> =
        (2..=top.min(20)).flat_map(|a| ps.iter().map(move |&p| (a, p))).collect();
    let doob = max_over(&doob_cases, |&(a, p)| Ok(doob_symmetry_check(a, p)?))?;

    let table_gap = |p: f64, printed: &[[f64; 3]; 4]| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (row, z) in printed.iter().zip(1..) {
            for (&value, &g) in row.iter().zip(&TABLE_GAMMAS) {
                worst = worst.max((ruin_at(5, z, p, g)? - value).abs());
            }
        }
        Ok(worst)
    };

    let checks = vec![
        Check::at_most("spectral_vs_exact", routes[0], ROUTE_TOL),
        Check::at_most("renewal_vs_exact", routes[1], ROUTE_TOL),
        Check::at_most("spectral_vs_renewal", routes[2], RENEWAL_TOL),
        Check::at_most("classical_limit", routes[3], ROUTE_TOL),
        Check::at_most("midpoint_invariance", midpoint, MIDPOINT_TOL),
        Check::at_most("doob_symmetry", doob, DOOB_TOL),
        Check::at_most("biased_table", table_gap(0.6, &BIASED_TABLE)?, TABLE_TOL),
        Check::at_most("fair_table", table_gap(0.5, &FAIR_TABLE)?, TABLE_TOL),
    ];
    let records = checks
        .iter()
        .map(|c| Record {
            a: Some(top),
            z: None,
            p: None,
            gamma: None,
            method: c.name.clone(),
            value: c.observed,
            stderr: None,
            seed: None,
        })
        .collect();
    let extra = json!({ "configurations": grid.len() });
    Ok(Report { records, checks, extra: Some(("validate".into(), extra)) })
}
