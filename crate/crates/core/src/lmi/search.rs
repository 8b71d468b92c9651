//! Bisection for the largest Lipschitz constant σ or input delay r that keeps
//! the stability LMIs feasible.
//!
//! Γ enters κ_{N+1} multiplied by decision variables, so it is line-searched:
//! a parameter value counts as feasible if any Γ of the grid certifies it.

use rayon::prelude::*;

use super::builders::{build_lmi_delayed, build_lmi_nodelay, DelayParams};
use super::problem::LmiProblem;
use super::solver::{solve_with, SolverOptions, Verdict};
use super::verify::LmiCertificate;
use crate::error::{Error, Result};
use crate::synthesis::{GainSet, ReducedModel};

#[derive(Debug, Clone, PartialEq)]
pub struct GammaGrid {
    pub values: Vec<f64>,
}

impl GammaGrid {
    /// `n` log-spaced points from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo) || n == 0 {
            return Err(Error::Domain(format!("invalid Gamma grid {lo}:{hi}:{n}")));
        }
        if n == 1 {
            return Ok(Self { values: vec![lo] });
        }
        let (a, b) = (lo.ln(), hi.ln());
        let values = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
        Ok(Self { values })
    }

    /// Parses `lo:hi:n`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::Parse(format!("Gamma grid '{spec}' must be lo:hi:n"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Self::log_spaced(lo, hi, n)
    }
}

impl Default for GammaGrid {
    fn default() -> Self {
        Self::log_spaced(0.1, 100.0, 16).expect("valid default grid")
    }
}

#[derive(Debug, Clone)]
pub struct SearchSettings {
    pub tol: f64,
    pub gamma_grid: GammaGrid,
    pub solver: SolverOptions,
    /// Initial upper end of the bracket; doubled while still feasible.
    pub upper: f64,
    /// Largest value tried when expanding the bracket.
    pub cap: f64,
    /// Worker threads for the Γ grid (1 = sequential).
    pub jobs: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self { tol: 0.01, gamma_grid: GammaGrid::default(), solver: SolverOptions::default(), upper: 2.0, cap: 16.0, jobs: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeOutcome {
    Feasible,
    Infeasible,
    Breakdown,
}

/// One solver call.
#[derive(Debug, Clone)]
pub struct Probe {
    pub value: f64,
    pub gamma: f64,
    pub outcome: ProbeOutcome,
    pub certificate: Option<LmiCertificate>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub parameter: &'static str,
    /// None when even the lowest probe is infeasible.
    pub max_feasible: Option<f64>,
    /// (last feasible, first infeasible).
    pub bracket: (f64, f64),
    pub certificate: Option<LmiCertificate>,
    pub gamma_used: Option<f64>,
    /// True when the bracket hit `cap` without finding an infeasible value.
    pub saturated: bool,
    pub probes: Vec<Probe>,
}

/// Tries every Γ (last successful first); returns the certifying Γ.
fn probe_value<F>(value: f64, build: &F, s: &SearchSettings, hint: &mut Option<usize>, log: &mut Vec<Probe>) -> Result<Option<(f64, LmiCertificate)>>
where
    F: Fn(f64, f64) -> Result<LmiProblem> + Sync,
{
    let grid = &s.gamma_grid.values;
    let mut order: Vec<usize> = (0..grid.len()).collect();
    if let Some(h) = *hint {
        order.retain(|&i| i != h);
        order.insert(0, h);
    }
    let run = |i: usize| -> Result<(usize, Probe)> {
        let g = grid[i];
        let prob = build(value, g)?;
        let (outcome, certificate) = match solve_with(&prob, &s.solver) {
            Ok(r) => match r.verdict {
                Verdict::Feasible(c) => (ProbeOutcome::Feasible, Some(c)),
                Verdict::Infeasible { .. } => (ProbeOutcome::Infeasible, None),
            },
            Err(Error::NumericalBreakdown(msg)) => {
                log::warn!("solver breakdown at value {value}, Gamma {g}: {msg}");
                (ProbeOutcome::Breakdown, None)
            }
            Err(e) => return Err(e),
        };
        Ok((i, Probe { value, gamma: g, outcome, certificate }))
    };

    let results: Vec<(usize, Probe)> = if s.jobs > 1 {
        // evaluate in chunks of `jobs`, stopping after the first chunk with a success
        let mut out = Vec::new();
        for chunk in order.chunks(s.jobs) {
            let part: Vec<Result<(usize, Probe)>> = chunk.par_iter().map(|&i| run(i)).collect();
            let mut hit = false;
            for r in part {
                let r = r?;
                hit |= r.1.outcome == ProbeOutcome::Feasible;
                out.push(r);
            }
            if hit {
                break;
            }
        }
        out
    } else {
        let mut out = Vec::new();
        for &i in &order {
            let r = run(i)?;
            let hit = r.1.outcome == ProbeOutcome::Feasible;
            out.push(r);
            if hit {
                break;
            }
        }
        out
    };

    let mut found = None;
    let mut breakdowns = 0;
    for (i, p) in results {
        match p.outcome {
            ProbeOutcome::Feasible if found.is_none() => {
                *hint = Some(i);
                found = Some((p.gamma, p.certificate.clone().expect("feasible probe carries a certificate")));
            }
            ProbeOutcome::Breakdown => breakdowns += 1,
            _ => {}
        }
        log.push(p);
    }
    if found.is_none() && breakdowns == grid.len() {
        return Err(Error::NumericalBreakdown(format!("solver broke down for every Gamma at value {value}")));
    }
    Ok(found)
}

/// Generic bisection on a monotone feasibility predicate over [lo, ∞).
pub fn bisect<F>(parameter: &'static str, lo: f64, build: F, s: &SearchSettings) -> Result<SearchResult>
where
    F: Fn(f64, f64) -> Result<LmiProblem> + Sync,
{
    if !(s.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {} must be positive", s.tol)));
    }
    let mut probes = Vec::new();
    let mut hint = None;
    let Some(mut best) = probe_value(lo, &build, s, &mut hint, &mut probes)? else {
        return Ok(SearchResult {
            parameter,
            max_feasible: None,
            bracket: (lo, lo),
            certificate: None,
            gamma_used: None,
            saturated: false,
            probes,
        });
    };
    let mut lo = lo;
    let mut hi = s.upper.max(lo + s.tol);
    let mut saturated = false;
    loop {
        match probe_value(hi, &build, s, &mut hint, &mut probes)? {
            Some(hit) => {
                best = hit;
                lo = hi;
                if hi >= s.cap {
                    saturated = true;
                    break;
                }
                hi = (hi * 2.0).min(s.cap);
            }
            None => break,
        }
    }
    if !saturated {
        while hi - lo > s.tol {
            let mid = 0.5 * (lo + hi);
            match probe_value(mid, &build, s, &mut hint, &mut probes)? {
                Some(hit) => {
                    best = hit;
                    lo = mid;
                }
                None => hi = mid,
            }
        }
    }
    Ok(SearchResult {
        parameter,
        max_feasible: Some(lo),
        bracket: (lo, if saturated { f64::INFINITY } else { hi }),
        certificate: Some(best.1),
        gamma_used: Some(best.0),
        saturated,
        probes,
    })
}

/// Largest σ for which the non-delayed LMI is feasible; bracket starts at σ = 0.
pub fn search_max_sigma(model: &ReducedModel, gains: &GainSet, delta: f64, s: &SearchSettings) -> Result<SearchResult> {
    bisect("sigma", 0.0, |sigma, gamma| build_lmi_nodelay(model, gains, delta, sigma, gamma), s)
}

/// Smallest delay used as the sanity probe of the r search.
pub const R_MIN: f64 = 1e-3;

/// Largest r for which the delayed LMIs are feasible; bracket starts at r = 10⁻³.
pub fn search_max_delay(model: &ReducedModel, gains: &GainSet, m: usize, sigma: f64, delta: f64, s: &SearchSettings) -> Result<SearchResult> {
    bisect(
        "r",
        R_MIN,
        |r, gamma| build_lmi_delayed(model, gains, DelayParams { delta, sigma, gamma, m, r }),
        s,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::problem::{BlockLayout, ConstraintBuilder, Mat};

    #[test]
    fn grid_parsing() {
        let g = GammaGrid::default();
        assert_eq!(g.values.len(), 16);
        assert!((g.values[0] - 0.1).abs() < 1e-12 && (g.values[15] - 100.0).abs() < 1e-9);
        assert_eq!(GammaGrid::parse("1:10:2").unwrap().values.len(), 2);
        assert!(GammaGrid::parse("0:1:3").is_err());
        assert!(GammaGrid::parse("1:2").is_err());
    }

    /// Scalar toy problem, feasible iff value < threshold.
    fn toy(threshold: f64) -> impl Fn(f64, f64) -> Result<LmiProblem> + Sync {
        move |v, _g| {
            let mut p = LmiProblem::new();
            let s = p.scalar("s");
            let mut b = ConstraintBuilder::new("c", BlockLayout::new(&[1]));
            // (v − threshold) + s ≺ 0 with s > 0: feasible iff v < threshold
            b.constant(0, 0, &Mat::from_element(1, 1, v - threshold));
            b.scaled(s, 0, 0, &Mat::from_element(1, 1, 1.0));
            p.add_constraint(b.build())?;
            Ok(p)
        }
    }

    #[test]
    fn bracket_respects_tolerance() {
        for tol in [0.5, 0.01] {
            let s = SearchSettings { tol, gamma_grid: GammaGrid { values: vec![1.0] }, ..Default::default() };
            let r = bisect("x", 0.0, toy(0.737), &s).unwrap();
            let (a, b) = r.bracket;
            assert!(b - a <= tol + 1e-15);
            assert!(a <= 0.737 && b >= 0.737, "{a} {b}");
        }
    }

    #[test]
    fn infeasible_at_start() {
        let s = SearchSettings { gamma_grid: GammaGrid { values: vec![1.0] }, ..Default::default() };
        let r = bisect("x", 1.0, toy(0.5), &s).unwrap();
        assert!(r.max_feasible.is_none());
    }

    #[test]
    fn saturates_at_cap() {
        let s = SearchSettings { gamma_grid: GammaGrid { values: vec![1.0] }, cap: 4.0, ..Default::default() };
        let r = bisect("x", 0.0, toy(100.0), &s).unwrap();
        assert!(r.saturated);
        assert_eq!(r.max_feasible, Some(4.0));
    }
}
