//! Qualitative checks over sweep records.

use std::collections::BTreeMap;

use phfsi_core::basis::BasisMethod;
use phfsi_core::ph::Formulation;
use phfsi_core::reduce::Projection;

use crate::speedup::SpeedupRow;
use crate::sweep::{ComboKey, ErrorRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub pass: bool,
    pub detail: String,
}

impl Finding {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn lookup(records: &[ErrorRecord]) -> BTreeMap<ComboKey, &ErrorRecord> {
    records.iter().map(|r| (r.key, r)).collect()
}

/// Every evaluated `ε_r` is at least the best-approximation `ε_r` of the
/// same subspace, up to `slack`. Diverged runs count as `ε_r = ∞`.
pub fn best_approximation_dominates(records: &[ErrorRecord], slack: f64) -> Finding {
    let mut checked = 0;
    let mut worst: Option<(f64, ComboKey)> = None;
    for r in records {
        let (Some(e), Some(b)) = (r.eps, r.best) else { continue };
        checked += 1;
        let gap = e - b;
        if worst.is_none_or(|(w, _)| gap < w) {
            worst = Some((gap, r.key));
        }
    }
    match worst {
        None => Finding::new(false, "no record has both errors".into()),
        Some((gap, key)) => Finding::new(
            gap >= -slack,
            format!("{checked} records; smallest ε_r − best = {gap:e} at {key:?}"),
        ),
    }
}

/// Combinations where Galerkin or quasi-Galerkin diverge must have finite
/// pH and energy-stable errors, and at least one such combination exists.
pub fn structured_projections_survive(records: &[ErrorRecord]) -> Finding {
    let map = lookup(records);
    let mut shared = 0;
    let mut violations = Vec::new();
    for r in records {
        if !matches!(r.key.projection, Projection::Galerkin | Projection::QuasiGalerkin) || !r.diverged() {
            continue;
        }
        let other = |p| map.get(&ComboKey { projection: p, ..r.key }).copied();
        let (Some(ph), Some(es)) = (other(Projection::PhPreserving), other(Projection::EnergyStable)) else {
            continue;
        };
        shared += 1;
        if !(ph.eps.is_some_and(f64::is_finite) && es.eps.is_some_and(f64::is_finite)) {
            violations.push(r.key);
        }
    }
    let unstable = records
        .iter()
        .filter(|r| matches!(r.key.projection, Projection::Galerkin | Projection::QuasiGalerkin) && r.diverged())
        .count();
    Finding::new(
        shared > 0 && violations.is_empty(),
        format!(
            "{unstable} diverged Galerkin/quasi-Galerkin runs, {shared} with pH and energy-stable partners, {} without finite partners{}",
            violations.len(),
            violations.first().map(|k| format!(" (first: {k:?})")).unwrap_or_default()
        ),
    )
}

fn at(records: &[ErrorRecord], f: Formulation, p: Projection, m: BasisMethod, n: usize) -> Vec<&ErrorRecord> {
    records
        .iter()
        .filter(|r| r.key.formulation == f && r.key.projection == p && r.key.method == m && r.key.n == n)
        .collect()
}

fn show(v: Option<f64>) -> String {
    v.map(|e| format!("{e:.3e}")).unwrap_or_else(|| "-".into())
}

/// Under the momentum formulation and pH projection at size `n`, POD-Disp
/// fails (`ε_r ≥ 1` or no result) and POD-State stays below `bound`, for
/// every trajectory count.
pub fn momentum_pod_disp_fails(records: &[ErrorRecord], n: usize, bound: f64) -> Finding {
    let f = Formulation::Momentum;
    let p = Projection::PhPreserving;
    let disp = at(records, f, p, BasisMethod::PodDisp, n);
    let state = at(records, f, p, BasisMethod::PodState, n);
    let disp_ok = !disp.is_empty() && disp.iter().all(|r| r.eps.is_none_or(|e| e >= 1.0));
    let state_ok = !state.is_empty() && state.iter().all(|r| r.eps.is_some_and(|e| e < bound));
    let list = |v: &[&ErrorRecord]| v.iter().map(|r| format!("{}:{}", r.key.count, show(r.eps))).collect::<Vec<_>>().join(" ");
    Finding::new(
        disp_ok && state_ok,
        format!("n = {n}: POD-Disp [{}], POD-State [{}]", list(&disp), list(&state)),
    )
}

/// SVD-like has the smallest `ε_r` of all methods under the momentum
/// formulation and pH projection at size `n`, for every trajectory count.
pub fn svd_like_is_best(records: &[ErrorRecord], n: usize) -> Finding {
    let mut counts: Vec<usize> = records.iter().map(|r| r.key.count).collect();
    counts.sort_unstable();
    counts.dedup();
    let mut lines = Vec::new();
    let mut pass = !counts.is_empty();
    for c in counts {
        let row: Vec<&ErrorRecord> = records
            .iter()
            .filter(|r| {
                r.key.formulation == Formulation::Momentum
                    && r.key.projection == Projection::PhPreserving
                    && r.key.n == n
                    && r.key.count == c
            })
            .collect();
        let winner = row
            .iter()
            .filter_map(|r| r.eps.map(|e| (e, r.key.method)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let svd = row.iter().find(|r| r.key.method == BasisMethod::SvdLike).and_then(|r| r.eps);
        match winner {
            Some((e, m)) => {
                pass &= m == BasisMethod::SvdLike;
                lines.push(format!("{c}: {m} {e:.3e} (SVD-like {})", show(svd)));
            }
            None => {
                pass = false;
                lines.push(format!("{c}: no finite errors"));
            }
        }
    }
    Finding::new(pass, format!("n = {n}: {}", lines.join("; ")))
}

/// `ε_r` does not grow by more than `band` (relative) from one size to the
/// next, for sizes up to `n_max`, under the momentum formulation and pH
/// projection, for every trajectory count.
pub fn errors_decay(records: &[ErrorRecord], methods: &[BasisMethod], n_max: usize, band: f64) -> Finding {
    let mut bad = Vec::new();
    let mut series = 0;
    let mut counts: Vec<usize> = records.iter().map(|r| r.key.count).collect();
    counts.sort_unstable();
    counts.dedup();
    for &m in methods {
        for &c in &counts {
            let mut pts: Vec<(usize, Option<f64>)> = records
                .iter()
                .filter(|r| {
                    r.key.formulation == Formulation::Momentum
                        && r.key.projection == Projection::PhPreserving
                        && r.key.method == m
                        && r.key.count == c
                        && r.key.n <= n_max
                })
                .map(|r| (r.key.n, r.eps))
                .collect();
            if pts.is_empty() {
                continue;
            }
            series += 1;
            pts.sort_by_key(|p| p.0);
            for w in pts.windows(2) {
                let ok = match (w[0].1, w[1].1) {
                    (Some(a), Some(b)) => b <= a * (1.0 + band),
                    _ => false,
                };
                if !ok {
                    bad.push(format!("{m}/{c}: n {}→{} {}→{}", w[0].0, w[1].0, show(w[0].1), show(w[1].1)));
                }
            }
        }
    }
    Finding::new(
        series > 0 && bad.is_empty(),
        format!("{series} series up to n = {n_max}; {} increases{}", bad.len(), if bad.is_empty() { String::new() } else { format!(": {}", bad.join("; ")) }),
    )
}

/// `ε_r` with `few` trajectories is within `factor` of `ε_r` with `many`,
/// under the momentum formulation and pH projection, at every size.
pub fn count_insensitive(records: &[ErrorRecord], methods: &[BasisMethod], few: usize, many: usize, factor: f64) -> Finding {
    let map = lookup(records);
    let mut checked = 0;
    let mut bad = Vec::new();
    for r in records {
        let k = r.key;
        if k.formulation != Formulation::Momentum || k.projection != Projection::PhPreserving || k.count != few || !methods.contains(&k.method) {
            continue;
        }
        let Some(other) = map.get(&ComboKey { count: many, ..k }) else { continue };
        let (Some(a), Some(b)) = (r.eps, other.eps) else { continue };
        checked += 1;
        if !(a <= factor * b && b <= factor * a) {
            bad.push(format!("{} n = {}: {a:.3e} vs {b:.3e}", k.method, k.n));
        }
    }
    Finding::new(
        checked > 0 && bad.is_empty(),
        format!("{checked} pairs ({few} vs {many} trajectories); {} outside ×{factor}{}", bad.len(), if bad.is_empty() { String::new() } else { format!(": {}", bad.join("; ")) }),
    )
}

/// Speed-up above `min` at size `n` and non-increasing over the table.
pub fn speedup_shape(rows: &[SpeedupRow], n: usize, min: f64) -> Finding {
    let at_n = rows.iter().find(|r| r.n == n).map(|r| r.speedup);
    let monotone = rows.windows(2).all(|w| w[1].speedup <= w[0].speedup);
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{:.1}", r.n, r.speedup)).collect();
    Finding::new(
        at_n.is_some_and(|s| s > min) && monotone,
        format!("speed-up [{}]; non-increasing: {monotone}", table.join(" ")),
    )
}
