//! Manufactured problems, error norms, convergence-order tables, and
//! diagnostics for the large-p limit (recovered Laplacian, 1d breaking
//! point detection, 2d plateau histogram).

use std::sync::Arc;

use crate::assembly::ProblemSpec;
use crate::quadrature::high_order_rule;
use crate::space::{FeFunction, FeSpace};
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Signed power `sign(s) |s|^e`, with the odd extension pinned to 0 at
/// the origin.
fn odd_pow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(e)
    }
}

/// A problem with a known exact solution, used by the benchmark harness.
pub struct ManufacturedCase {
    pub spec: ProblemSpec,
    pub exact_u: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    pub exact_grad_u: Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
    /// The auxiliary variable `|Δu|^{p-2} Δu` of the exact solution.
    pub exact_w: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
}

/// Manufactured solution `u = sin(pi x) sin(pi y)` on `[-1, 1]^2` with
/// the source chosen so that `u` solves the p-Bilaplacian problem.
pub fn manufactured_sine(p: f64) -> Result<ManufacturedCase> {
    if !(p >= 2.0) {
        return Err(Error::invalid(format!("manufactured case needs p >= 2, got {p}")));
    }
    let s = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let lam = (2.0 * PI * PI).powf(p - 1.0);

    let exact_u = Arc::new(move |pt: [f64; 2]| s(pt[0], pt[1]));
    let exact_grad_u = Arc::new(move |pt: [f64; 2]| {
        [
            PI * (PI * pt[0]).cos() * (PI * pt[1]).sin(),
            PI * (PI * pt[0]).sin() * (PI * pt[1]).cos(),
        ]
    });
    let exact_w = Arc::new(move |pt: [f64; 2]| -lam * odd_pow(s(pt[0], pt[1]), p - 1.0));

    // f = Laplacian of w, by the chain rule:
    // f = -lam (p-1) [ -2 pi^2 |s|^{p-2} s + (p-2) |s|^{p-4} s |grad s|^2 ].
    let source = Arc::new(move |pt: [f64; 2]| {
        let (x, y) = (pt[0], pt[1]);
        let sv = s(x, y);
        let gs2 = PI * PI
            * ((PI * x).cos().powi(2) * (PI * y).sin().powi(2)
                + (PI * x).sin().powi(2) * (PI * y).cos().powi(2));
        let term1 = -2.0 * PI * PI * odd_pow(sv, p - 1.0);
        let term2 = if p > 2.0 {
            (p - 2.0) * odd_pow(sv, p - 3.0) * gs2
        } else {
            0.0
        };
        -lam * (p - 1.0) * (term1 + term2)
    });

    let g_laplacian = Arc::new(move |pt: [f64; 2]| -2.0 * PI * PI * s(pt[0], pt[1]));
    let spec = ProblemSpec::new(
        p,
        exact_u.clone(),
        exact_grad_u.clone(),
        g_laplacian,
        Some(source),
    )?;
    Ok(ManufacturedCase {
        spec,
        exact_u,
        exact_grad_u,
        exact_w,
    })
}

/// Dirichlet data for the 1d limit experiment: the cubic
/// `g(x) = (4x-3)(2x-1)(4x-1) / 120` on `(0, 1)`, source-free, p = 2.
pub fn cubic_1d_case() -> Result<ProblemSpec> {
    let g = |x: f64| (32.0 * x * x * x - 48.0 * x * x + 22.0 * x - 3.0) / 120.0;
    let dg = |x: f64| (96.0 * x * x - 96.0 * x + 22.0) / 120.0;
    let ddg = |x: f64| (192.0 * x - 96.0) / 120.0;
    ProblemSpec::new(
        2.0,
        Arc::new(move |p: [f64; 2]| g(p[0])),
        Arc::new(move |p: [f64; 2]| [dg(p[0]), 0.0]),
        Arc::new(move |p: [f64; 2]| ddg(p[0])),
        None,
    )
}

/// Dirichlet data for the 2d limit experiment:
/// `g(x, y) = cos(m pi x) cos(m pi y) / (20 m)` on `[-1, 1]^2`, p = 2.
pub fn cosine_2d_case(m: usize) -> Result<ProblemSpec> {
    if m == 0 {
        return Err(Error::invalid("cosine case needs m >= 1"));
    }
    let mf = m as f64;
    ProblemSpec::new(
        2.0,
        Arc::new(move |p: [f64; 2]| (mf * PI * p[0]).cos() * (mf * PI * p[1]).cos() / (20.0 * mf)),
        Arc::new(move |p: [f64; 2]| {
            [
                -(PI / 20.0) * (mf * PI * p[0]).sin() * (mf * PI * p[1]).cos(),
                -(PI / 20.0) * (mf * PI * p[0]).cos() * (mf * PI * p[1]).sin(),
            ]
        }),
        Arc::new(move |p: [f64; 2]| {
            -(mf * PI * PI / 10.0) * (mf * PI * p[0]).cos() * (mf * PI * p[1]).cos()
        }),
        None,
    )
}

/// `(sum_i w_i |v_i|^r)^{1/r}` in max-rescaled form, safe for large `r`.
fn lp_from_samples(samples: &[(f64, f64)], r: f64) -> f64 {
    let m = samples.iter().fold(0.0f64, |acc, &(v, _)| acc.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let sum: f64 = samples
        .iter()
        .map(|&(v, w)| w * (v.abs() / m).powf(r))
        .sum();
    m * sum.powf(1.0 / r)
}

fn cell_samples(
    space: &FeSpace,
    mut f: impl FnMut(usize, [f64; 2], [f64; 2]) -> f64,
) -> Vec<(f64, f64)> {
    let rule = high_order_rule(space.mesh.dim());
    let mut samples = Vec::with_capacity(space.mesh.num_cells() * rule.len());
    for c in 0..space.mesh.num_cells() {
        let detj = space.jacobian_det(c);
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let x = space.phys_point(c, *pt);
            samples.push((f(c, *pt, x), w * detj));
        }
    }
    samples
}

/// `L^q` error of the auxiliary variable against a callback.
pub fn error_w_lq(w_h: &FeFunction, exact_w: impl Fn([f64; 2]) -> f64, q: f64) -> f64 {
    let samples = cell_samples(&w_h.space, |c, rp, x| w_h.eval(c, rp) - exact_w(x));
    lp_from_samples(&samples, q)
}

/// `L^p` error of the primal gradient against a callback.
pub fn error_gradu_lp(u_h: &FeFunction, exact_grad: impl Fn([f64; 2]) -> [f64; 2], p: f64) -> f64 {
    let samples = cell_samples(&u_h.space, |c, rp, x| {
        let g = u_h.eval_grad(c, rp);
        let e = exact_grad(x);
        ((g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2)).sqrt()
    });
    lp_from_samples(&samples, p)
}

/// `L^q` norm of a discrete function.
pub fn fe_lq_norm(f: &FeFunction, q: f64) -> f64 {
    let samples = cell_samples(&f.space, |c, rp, _| f.eval(c, rp));
    lp_from_samples(&samples, q)
}

/// `L^p` norm of a callback over the mesh of `space`.
pub fn callback_lp_norm(space: &FeSpace, f: impl Fn([f64; 2]) -> f64, p: f64) -> f64 {
    let samples = cell_samples(space, |_, _, x| f(x));
    lp_from_samples(&samples, p)
}

/// Experimental orders of convergence between consecutive ladder rows.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::invalid("eoc needs equally long sequences of length >= 2"));
    }
    for w in hs.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::invalid("mesh sizes must be strictly decreasing"));
        }
    }
    Ok((1..errors.len())
        .map(|i| {
            if errors[i] == 0.0 {
                f64::INFINITY
            } else {
                (errors[i - 1] / errors[i]).ln() / (hs[i - 1] / hs[i]).ln()
            }
        })
        .collect())
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct EocRow {
    pub h_max: f64,
    pub dofs: usize,
    pub err_w_lq: f64,
    pub err_gradu_lp: f64,
    pub eoc_w: Option<f64>,
    pub eoc_u: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EocTable {
    pub case: String,
    pub p: f64,
    pub q: f64,
    pub k: usize,
    pub rows: Vec<EocRow>,
}

impl EocTable {
    pub fn new(case: &str, p: f64, k: usize) -> Self {
        EocTable {
            case: case.to_string(),
            p,
            q: p / (p - 1.0),
            k,
            rows: Vec::new(),
        }
    }

    /// Append a ladder row and fill in the EOC columns against the
    /// previous row.
    pub fn push_row(&mut self, h_max: f64, dofs: usize, err_w: f64, err_u: f64) {
        let (eoc_w, eoc_u) = match self.rows.last() {
            None => (None, None),
            Some(prev) => {
                let rate = |e0: f64, e1: f64| {
                    if e1 == 0.0 {
                        f64::INFINITY
                    } else {
                        (e0 / e1).ln() / (prev.h_max / h_max).ln()
                    }
                };
                (Some(rate(prev.err_w_lq, err_w)), Some(rate(prev.err_gradu_lp, err_u)))
            }
        };
        self.rows.push(EocRow {
            h_max,
            dofs,
            err_w_lq: err_w,
            err_gradu_lp: err_u,
            eoc_w,
            eoc_u,
        });
    }
}

/// Pointwise sampler of the recovered Laplacian `|w_h|^{q-2} w_h`.
pub struct RecoveredLaplacian {
    pub w: FeFunction,
    pub q: f64,
}

/// Build the recovered-Laplacian sampler for a converged `w_h`.
pub fn recovered_laplacian(w_h: &FeFunction, q: f64) -> RecoveredLaplacian {
    RecoveredLaplacian {
        w: w_h.clone(),
        q,
    }
}

impl RecoveredLaplacian {
    pub fn apply(&self, w_value: f64) -> f64 {
        odd_pow(w_value, self.q - 1.0)
    }

    /// Value at a reference point of a cell.
    pub fn eval(&self, cell: usize, ref_pt: [f64; 2]) -> f64 {
        self.apply(self.w.eval(cell, ref_pt))
    }

    /// Max magnitude over the high-order quadrature points.
    pub fn max_abs(&self) -> f64 {
        cell_samples(&self.w.space, |c, rp, _| self.eval(c, rp))
            .iter()
            .fold(0.0f64, |m, &(v, _)| m.max(v.abs()))
    }

    /// `L^p` norm over the mesh.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let samples = cell_samples(&self.w.space, |c, rp, _| self.eval(c, rp));
        lp_from_samples(&samples, p)
    }

    /// Equispaced in-cell samples `(x, s_h(x))` on a 1d mesh, ascending.
    pub fn sample_1d(&self, per_cell: usize) -> Vec<(f64, f64)> {
        let space = &self.w.space;
        assert_eq!(space.mesh.dim(), 1, "1d sampling on a 2d mesh");
        let mut out = Vec::with_capacity(space.mesh.num_cells() * per_cell);
        for c in 0..space.mesh.num_cells() {
            for j in 0..per_cell {
                let t = (j as f64 + 0.5) / per_cell as f64;
                let x = space.phys_point(c, [t, 0.0])[0];
                out.push((x, self.eval(c, [t, 0.0])));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Values at all quadrature points with their physical coordinates.
    pub fn sample_quad_points(&self) -> Vec<([f64; 2], f64)> {
        let space = &self.w.space;
        let rule = high_order_rule(space.mesh.dim());
        let mut out = Vec::with_capacity(space.mesh.num_cells() * rule.len());
        for c in 0..space.mesh.num_cells() {
            for pt in &rule.points {
                out.push((space.phys_point(c, *pt), self.eval(c, *pt)));
            }
        }
        out
    }
}

/// Breaking-point diagnostics for ordered 1d samples of the recovered
/// Laplacian.
#[derive(Debug, Clone, Copy)]
pub struct BreakpointDiagnostics {
    /// Sign changes remaining after the Gibbs guard bands are discarded.
    pub num_sign_changes: usize,
    /// Mean of the first and last plateau.
    pub plateau_means: (f64, f64),
    /// Pooled within-plateau standard deviation over the mean plateau
    /// magnitude.
    pub plateau_rel_stddev: f64,
    /// Interpolated crossing abscissa, when a sign change exists.
    pub break_location: Option<f64>,
}

/// Analyse `(x, s)` samples: discard `guard_samples` points around every
/// raw sign change and each boundary, then count the surviving sign
/// changes and measure plateau flatness.
pub fn breakpoint_diagnostics_1d(
    samples: &[(f64, f64)],
    guard_samples: usize,
) -> Result<BreakpointDiagnostics> {
    let n = samples.len();
    let mut excluded = vec![false; n];
    let mut raw_crossings = Vec::new();
    for i in 0..n.saturating_sub(1) {
        if samples[i].1 * samples[i + 1].1 < 0.0 {
            raw_crossings.push(i);
            let lo = i.saturating_sub(guard_samples);
            let hi = (i + 1 + guard_samples).min(n - 1);
            for e in excluded.iter_mut().take(hi + 1).skip(lo) {
                *e = true;
            }
        }
    }
    for i in 0..guard_samples.min(n) {
        excluded[i] = true;
        excluded[n - 1 - i] = true;
    }
    let retained: Vec<usize> = (0..n).filter(|&i| !excluded[i]).collect();
    if retained.len() < 10 {
        return Err(Error::Diagnostics(format!(
            "only {} usable samples after guard bands",
            retained.len()
        )));
    }

    // Split the retained samples into constant-sign plateaus.
    let mut segments: Vec<Vec<usize>> = vec![vec![retained[0]]];
    let mut num_sign_changes = 0;
    let mut first_change: Option<(usize, usize)> = None;
    for pair in retained.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if samples[a].1 * samples[b].1 < 0.0 {
            num_sign_changes += 1;
            first_change.get_or_insert((a, b));
            segments.push(Vec::new());
        }
        segments.last_mut().unwrap().push(b);
    }

    let mean_of = |seg: &[usize]| -> f64 {
        seg.iter().map(|&i| samples[i].1).sum::<f64>() / seg.len() as f64
    };
    let m_first = mean_of(&segments[0]);
    let m_last = mean_of(segments.last().unwrap());
    let mut ss = 0.0;
    for seg in &segments {
        let m = mean_of(seg);
        for &i in seg {
            ss += (samples[i].1 - m).powi(2);
        }
    }
    let pooled = (ss / retained.len() as f64).sqrt();
    let denom = 0.5 * (m_first.abs() + m_last.abs());
    let plateau_rel_stddev = if denom == 0.0 {
        if pooled == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        pooled / denom
    };

    // Crossing abscissa: median of the raw interpolated crossings inside
    // the first retained sign-change gap (Gibbs produces a cluster there).
    let break_location = first_change.map(|(a, b)| {
        let mut xs: Vec<f64> = raw_crossings
            .iter()
            .filter(|&&i| i >= a && i < b)
            .map(|&i| {
                let (x0, s0) = samples[i];
                let (x1, s1) = samples[i + 1];
                x0 + s0 * (x1 - x0) / (s0 - s1)
            })
            .collect();
        if xs.is_empty() {
            let (x0, s0) = samples[a];
            let (x1, s1) = samples[b];
            x0 + s0 * (x1 - x0) / (s0 - s1)
        } else {
            xs.sort_by(f64::total_cmp);
            xs[xs.len() / 2]
        }
    });

    Ok(BreakpointDiagnostics {
        num_sign_changes,
        plateau_means: (m_first, m_last),
        plateau_rel_stddev,
        break_location,
    })
}

/// Slack in the discrete stability bound:
/// `||Δg||_{L^p} - ||w_h||_{L^q}^{q-1}`. Only defined for the
/// homogeneous (source-free) problem.
pub fn stability_margin(w_h: &FeFunction, spec: &ProblemSpec) -> Result<f64> {
    if spec.source_f.is_some() {
        return Err(Error::invalid(
            "stability bound is stated for the source-free problem",
        ));
    }
    let g_lap = spec.g_laplacian.clone();
    let rhs = callback_lp_norm(&w_h.space, move |x| g_lap(x), spec.p);
    let lhs = fe_lq_norm(w_h, spec.q).powf(spec.q - 1.0);
    Ok(rhs - lhs)
}

/// Top-two histogram modes of `|s_h|` and the fraction of samples within
/// 10% of either mode.
#[derive(Debug, Clone, Copy)]
pub struct HistogramModes {
    pub modes: (f64, f64),
    pub capture_fraction: f64,
}

pub fn histogram_mode_report(values: &[f64], bins: usize) -> HistogramModes {
    assert!(bins >= 4, "too few histogram bins");
    let vmax = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if vmax == 0.0 || values.is_empty() {
        return HistogramModes {
            modes: (0.0, 0.0),
            capture_fraction: 1.0,
        };
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v.abs() / vmax * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let b1 = (0..bins).max_by_key(|&b| counts[b]).unwrap();
    let b2 = (0..bins)
        .filter(|&b| b.abs_diff(b1) >= 2)
        .max_by_key(|&b| counts[b])
        .unwrap_or(b1);
    let center = |b: usize| (b as f64 + 0.5) * vmax / bins as f64;
    let (m1, m2) = (center(b1), center(b2));
    let captured = values
        .iter()
        .filter(|&&v| {
            let a = v.abs();
            (a - m1).abs() <= 0.1 * m1 || (a - m2).abs() <= 0.1 * m2
        })
        .count();
    HistogramModes {
        modes: (m1, m2),
        capture_fraction: captured as f64 / values.len() as f64,
    }
}
