//! Least-squares fits used in the data analysis, plus revival detection on
//! contrast curves.

use serde::{Deserialize, Serialize};
use std::io::Read;

use crate::curve::{csv_error, ContrastCurve};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
/// Relative Gauss–Newton step below which a fit counts as converged.
const STEP_TOL: f64 = 1e-12;

/// A·e^(−t/τ)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    /// 1/e time, s
    pub tau: f64,
    pub residual_rms: f64,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.tau).exp()
    }
}

/// N₀ + N₁ = N_T/2 · (1 + e^(−t/τ))
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomNumberFit {
    pub n_total: f64,
    pub tau: f64,
    pub residual_rms: f64,
}

impl AtomNumberFit {
    pub fn eval(&self, t: f64) -> f64 {
        atom_number_model(self.n_total, self.tau, t)
    }
}

pub fn atom_number_model(n_total: f64, tau: f64, t: f64) -> f64 {
    0.5 * n_total * (1.0 + (-t / tau).exp())
}

/// P(δ) = ½(1 + C cos(δ·T_R + φ))
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub contrast: f64,
    pub phase: f64,
    pub residual_rms: f64,
}

pub fn fringe_model(contrast: f64, phase: f64, ramsey_time: f64, detuning: f64) -> f64 {
    0.5 * (1.0 + contrast * (detuning * ramsey_time + phase).cos())
}

fn check_series(times: &[f64], values: &[f64], min_points: usize) -> Result<()> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    if times.len() < min_points {
        return Err(Error::invalid(
            "data",
            format!("need at least {min_points} points, got {}", times.len()),
        ));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::invalid("data", "values must be finite"));
    }
    Ok(())
}

fn rms(residuals: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = residuals.fold((0.0, 0usize), |(s, n), r| (s + r * r, n + 1));
    (sum / n as f64).sqrt()
}

/// Solves [[a, b], [b, d]] x = [e, f]; `None` if singular.
fn solve_sym2(a: f64, b: f64, d: f64, e: f64, f: f64) -> Option<(f64, f64)> {
    let det = a * d - b * b;
    if !(det.abs() > 1e-14 * (a * d).abs()) || !det.is_finite() {
        return None;
    }
    Some(((d * e - b * f) / det, (a * f - b * e) / det))
}

/// Fits A·e^(−t/τ). The starting point is the straight-line fit of ln y
/// against t; Gauss–Newton on the untransformed residuals then refines it.
/// If the refinement fails the log-space fit is returned.
pub fn fit_exponential_decay(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    check_series(times, values, 2)?;
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("values", "must all be > 0"));
    }

    // ln y = ln A − k t
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let lm = logs.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all sample times are equal".into()));
    }
    let sxy: f64 = times
        .iter()
        .zip(&logs)
        .map(|(t, l)| (t - tm) * (l - lm))
        .sum();
    let slope = sxy / sxx;
    let span = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - times.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(-slope * span > 1e-12) {
        return Err(Error::NonDecaying);
    }
    let log_fit = (lm - slope * tm).exp();
    let mut a = log_fit;
    let mut k = -slope;

    let sse = |a: f64, k: f64| -> f64 {
        times
            .iter()
            .zip(values)
            .map(|(&t, &y)| (a * (-k * t).exp() - y).powi(2))
            .sum()
    };

    let mut cur = sse(a, k);
    let mut refined = false;
    for _ in 0..MAX_ITERATIONS {
        let (mut jaa, mut jak, mut jkk, mut ga, mut gk) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, &y) in times.iter().zip(values) {
            let e = (-k * t).exp();
            let r = a * e - y;
            let da = e;
            let dk = -a * t * e;
            jaa += da * da;
            jak += da * dk;
            jkk += dk * dk;
            ga += da * r;
            gk += dk * r;
        }
        let Some((sa, sk)) = solve_sym2(jaa, jak, jkk, -ga, -gk) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-6 {
            let (na, nk) = (a + lambda * sa, k + lambda * sk);
            let next = sse(na, nk);
            if nk > 0.0 && next < cur {
                a = na;
                k = nk;
                cur = next;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            refined = true;
            break;
        }
        if sa.abs() <= STEP_TOL * a.abs() && sk.abs() <= STEP_TOL * k.abs() {
            refined = true;
            break;
        }
    }
    if !(refined && k > 0.0 && a.is_finite()) {
        a = log_fit;
        k = -slope;
    }

    let tau = 1.0 / k;
    let residual_rms = rms(times
        .iter()
        .zip(values)
        .map(|(&t, &y)| a * (-t / tau).exp() - y));
    Ok(DecayFit {
        amplitude: a,
        tau,
        residual_rms,
    })
}

/// Fits N_T/2·(1 + e^(−t/τ)). N_T enters linearly, so τ is located on the
/// profiled residual (coarse log scan, then golden section) and both
/// parameters are polished by Gauss–Newton.
pub fn fit_atom_number(times: &[f64], totals: &[f64]) -> Result<AtomNumberFit> {
    check_series(times, totals, 3)?;
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t_min = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = t_max - t_min;
    if !(span > 0.0) {
        return Err(Error::DegenerateFit("all sample times are equal".into()));
    }

    let best_n = |k: f64| -> (f64, f64) {
        let (mut gy, mut gg) = (0.0, 0.0);
        for (&t, &y) in times.iter().zip(totals) {
            let g = 0.5 * (1.0 + (-k * t).exp());
            gy += g * y;
            gg += g * g;
        }
        let n = gy / gg;
        let sse = times
            .iter()
            .zip(totals)
            .map(|(&t, &y)| (0.5 * n * (1.0 + (-k * t).exp()) - y).powi(2))
            .sum();
        (n, sse)
    };

    // ln k over [1e-4/span, 1e4/span]
    let lo = (1e-4 / span).ln();
    let hi = (1e4 / span).ln();
    let scan = 161;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..scan {
        let lk = lo + (hi - lo) * i as f64 / (scan - 1) as f64;
        let (_, s) = best_n(lk.exp());
        if s < best.1 {
            best = (i, s);
        }
    }
    if best.0 == 0 || best.0 == scan - 1 {
        return Err(Error::NonConvergence { iterations: scan });
    }
    let step = (hi - lo) / (scan - 1) as f64;
    let (mut a, mut b) = (
        lo + step * (best.0 - 1) as f64,
        lo + step * (best.0 + 1) as f64,
    );
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - invphi * (b - a);
        let d = a + invphi * (b - a);
        if best_n(c.exp()).1 < best_n(d.exp()).1 {
            b = d;
        } else {
            a = c;
        }
    }
    let mut k = (0.5 * (a + b)).exp();
    let (mut n, mut cur) = best_n(k);

    let sse = |n: f64, k: f64| -> f64 {
        times
            .iter()
            .zip(totals)
            .map(|(&t, &y)| (0.5 * n * (1.0 + (-k * t).exp()) - y).powi(2))
            .sum()
    };
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let (mut jnn, mut jnk, mut jkk, mut gn, mut gk) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, &y) in times.iter().zip(totals) {
            let e = (-k * t).exp();
            let r = 0.5 * n * (1.0 + e) - y;
            let dn = 0.5 * (1.0 + e);
            let dk = -0.5 * n * t * e;
            jnn += dn * dn;
            jnk += dn * dk;
            jkk += dk * dk;
            gn += dn * r;
            gk += dk * r;
        }
        let Some((sn, sk)) = solve_sym2(jnn, jnk, jkk, -gn, -gk) else {
            converged = true;
            break;
        };
        let (nn, nk) = (n + sn, k + sk);
        let next = sse(nn, nk);
        if !(nk > 0.0) || next >= cur {
            converged = true;
            break;
        }
        n = nn;
        k = nk;
        cur = next;
        if sn.abs() <= STEP_TOL * n.abs() && sk.abs() <= STEP_TOL * k.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: MAX_ITERATIONS,
        });
    }

    let tau = 1.0 / k;
    let residual_rms = rms(times
        .iter()
        .zip(totals)
        .map(|(&t, &y)| atom_number_model(n, tau, t) - y));
    Ok(AtomNumberFit {
        n_total: n,
        tau,
        residual_rms,
    })
}

/// Linear fit of P(δ) = ½(1 + C cos(δT_R + φ)) at the known fringe
/// frequency T_R, solving for (C cos φ, C sin φ).
pub fn fit_fringe(detunings: &[f64], probabilities: &[f64], ramsey_time: f64) -> Result<FringeFit> {
    check_series(detunings, probabilities, 3)?;
    if !(ramsey_time > 0.0) {
        return Err(Error::invalid("ramsey_time", "must be > 0"));
    }
    // 2P − 1 = a cos x − b sin x with a = C cos φ, b = C sin φ
    let (mut scc, mut scs, mut sss, mut sy_c, mut sy_s) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&d, &p) in detunings.iter().zip(probabilities) {
        let x = d * ramsey_time;
        let (c, s) = (x.cos(), -x.sin());
        let y = 2.0 * p - 1.0;
        scc += c * c;
        scs += c * s;
        sss += s * s;
        sy_c += c * y;
        sy_s += s * y;
    }
    let det = scc * sss - scs * scs;
    if !(det > 1e-10 * scc * sss) {
        return Err(Error::DegenerateFit(
            "detuning span too narrow to separate cosine and sine".into(),
        ));
    }
    let a = (sss * sy_c - scs * sy_s) / det;
    let b = (scc * sy_s - scs * sy_c) / det;
    let contrast = a.hypot(b);
    let phase = if contrast > 0.0 { b.atan2(a) } else { 0.0 };
    let residual_rms = rms(detunings
        .iter()
        .zip(probabilities)
        .map(|(&d, &p)| fringe_model(contrast, phase, ramsey_time, d) - p));
    Ok(FringeFit {
        contrast,
        phase,
        residual_rms,
    })
}

/// Location of the first revival on a contrast curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Revival {
    /// Interpolated time of the maximum, s.
    pub time: f64,
    /// Contrast at the sampled maximum.
    pub contrast: f64,
    pub minimum_time: f64,
    pub minimum_contrast: f64,
}

/// Detects the first revival: the first local maximum that rises at least
/// `min_rise` above the running minimum of an initially decaying curve.
/// Smaller wiggles are treated as noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalDetector {
    pub min_rise: f64,
}

impl Default for RevivalDetector {
    fn default() -> Self {
        RevivalDetector { min_rise: 0.01 }
    }
}

impl RevivalDetector {
    pub fn detect(&self, curve: &ContrastCurve) -> Result<Revival> {
        let t = curve.times();
        let c = curve.contrast();
        let n = c.len();
        let mut min_idx = 0;
        for k in 1..n {
            if c[k] < c[min_idx] {
                min_idx = k;
                continue;
            }
            if min_idx > 0 && c[k] - c[min_idx] >= self.min_rise {
                let mut j = k;
                while j + 1 < n && c[j + 1] >= c[j] {
                    j += 1;
                }
                if j + 1 == n {
                    // still rising at the end: the maximum is not resolved
                    return Err(Error::NoRevival);
                }
                return Ok(Revival {
                    time: parabolic_vertex(t[j - 1], t[j], t[j + 1], c[j - 1], c[j], c[j + 1]),
                    contrast: c[j],
                    minimum_time: t[min_idx],
                    minimum_contrast: c[min_idx],
                });
            }
        }
        Err(Error::NoRevival)
    }
}

/// Time of the first contrast maximum after the first minimum, refined by a
/// three-point parabola, using the default detector.
pub fn fit_revival_time(curve: &ContrastCurve) -> Result<f64> {
    Ok(RevivalDetector::default().detect(curve)?.time)
}

/// Abscissa of the vertex of the parabola through three points.
fn parabolic_vertex(t0: f64, t1: f64, t2: f64, c0: f64, c1: f64, c2: f64) -> f64 {
    let num = (t1 - t0).powi(2) * (c1 - c2) - (t1 - t2).powi(2) * (c1 - c0);
    let den = (t1 - t0) * (c1 - c2) - (t1 - t2) * (c1 - c0);
    if den == 0.0 {
        t1
    } else {
        let v = t1 - 0.5 * num / den;
        v.clamp(t0, t2)
    }
}

/// Experimental series `t_or_detuning,value` with a one-line header.
pub fn read_series<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("`{s}`: {e}"),
            })
        };
        xs.push(parse(&rec[0])?);
        ys.push(parse(&rec[1])?);
    }
    Ok((xs, ys))
}

/// JSON fit record `{model, parameters, residual_rms}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub model: String,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub residual_rms: f64,
}

impl From<DecayFit> for FitRecord {
    fn from(f: DecayFit) -> Self {
        let mut p = serde_json::Map::new();
        p.insert("amplitude".into(), f.amplitude.into());
        p.insert("tau".into(), f.tau.into());
        FitRecord {
            model: "exp_decay".into(),
            parameters: p,
            residual_rms: f.residual_rms,
        }
    }
}

impl From<AtomNumberFit> for FitRecord {
    fn from(f: AtomNumberFit) -> Self {
        let mut p = serde_json::Map::new();
        p.insert("n_total".into(), f.n_total.into());
        p.insert("tau".into(), f.tau.into());
        FitRecord {
            model: "atom_number".into(),
            parameters: p,
            residual_rms: f.residual_rms,
        }
    }
}

impl From<FringeFit> for FitRecord {
    fn from(f: FringeFit) -> Self {
        let mut p = serde_json::Map::new();
        p.insert("contrast".into(), f.contrast.into());
        p.insert("phase".into(), f.phase.into());
        FitRecord {
            model: "fringe".into(),
            parameters: p,
            residual_rms: f.residual_rms,
        }
    }
}
