//! Time-series and cross-sectional diagnostics: J-curve detection,
//! windowed growth rates, dispersion, log histograms and correlations.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Series, Trajectory};
use crate::error::{Direction, Error, Result};

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            what: "ols y vs x",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("least squares needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("regressor is constant"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Exponential rate of a positive series: OLS slope of `ln v` against `t`.
pub fn log_slope(t: &[f64], v: &[f64]) -> Result<f64> {
    let logs = positive_logs(v)?;
    Ok(ols(t, &logs)?.0)
}

fn positive_logs(v: &[f64]) -> Result<Vec<f64>> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            if x > 0.0 {
                Ok(x.ln())
            } else {
                Err(Error::InvalidArgument(format!("sample {i} = {x} is not positive")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeSign {
    Negative,
    NonNegative,
}

/// Solution of `dW/dt = a W - b W²` started from `w0` at `τ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub a: f64,
    pub b: f64,
    pub w0: f64,
    pub t0: f64,
    /// Sum of squared residuals over the fitted samples.
    pub sse: f64,
}

impl LogisticFit {
    pub fn eval(&self, t: f64) -> f64 {
        verhulst(self.a, self.b, self.w0, t - self.t0)
    }
}

fn verhulst(a: f64, b: f64, w0: f64, tau: f64) -> f64 {
    let at = a * tau;
    // (e^{aτ} - 1) / a, continuous through a = 0
    let phi = if at.abs() < 1e-8 { tau * (1.0 + 0.5 * at) } else { at.exp_m1() / a };
    let denom = 1.0 + b * w0 * phi;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    w0 * at.exp() / denom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JCurveReport {
    pub initial_slope_sign: SlopeSign,
    pub trough_time: f64,
    pub trough_value: f64,
    /// Log-slope fitted to the later half of the samples after the trough.
    pub recovery_rate: f64,
    /// `(actual - predicted) / predicted` at the final time, where the
    /// prediction extrapolates a logistic fit to the samples up to the
    /// trough. `None` when fewer than three such samples exist.
    pub logistic_extrapolation_gap: Option<f64>,
    pub logistic_fit: Option<LogisticFit>,
    pub final_time: f64,
    pub final_value: f64,
}

/// Locates the trough of a positive series and characterises the decline and recovery.
///
/// The trough is the global minimum (earliest on ties). A minimum at either
/// end means the series never turns and is reported as [`Error::NoJCurve`].
pub fn detect_j_curve(series: &Series) -> Result<JCurveReport> {
    let (t, v) = (&series.t, &series.v);
    if t.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "J-curve detection needs at least 4 samples, got {}",
            t.len()
        )));
    }
    positive_logs(v)?;
    let last = v.len() - 1;
    let trough = v
        .iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x < v[best] { i } else { best });
    if trough == 0 {
        return Err(Error::NoJCurve(Direction::Increasing));
    }
    if trough == last {
        return Err(Error::NoJCurve(Direction::Decreasing));
    }

    let initial_slope_sign = if v[1] - v[0] < 0.0 {
        SlopeSign::Negative
    } else {
        SlopeSign::NonNegative
    };

    // Later half of the strictly post-trough samples, at least two points.
    let after = last - trough;
    let start = if after >= 2 { trough + 1 + after / 2 } else { trough };
    let start = start.min(last - 1);
    let recovery_rate = log_slope(&t[start..], &v[start..])?;

    let logistic_fit = (trough >= 2).then(|| fit_logistic(&t[..=trough], &v[..=trough]));
    let logistic_extrapolation_gap = logistic_fit.map(|fit| {
        let predicted = fit.eval(t[last]);
        (v[last] - predicted) / predicted
    });

    Ok(JCurveReport {
        initial_slope_sign,
        trough_time: t[trough],
        trough_value: v[trough],
        recovery_rate,
        logistic_extrapolation_gap,
        logistic_fit,
        final_time: t[last],
        final_value: v[last],
    })
}

/// Least-squares Verhulst fit with `b >= 0`: a coarse grid over `(a, b)`
/// followed by Nelder–Mead refinement over `(a, b, w0)`.
pub fn fit_logistic(t: &[f64], v: &[f64]) -> LogisticFit {
    let t0 = t[0];
    let scale = v[0];
    let u: Vec<f64> = v.iter().map(|x| x / scale).collect();
    let tau: Vec<f64> = t.iter().map(|x| x - t0).collect();
    let span = tau.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);

    let cost = |p: &[f64; 3]| -> f64 {
        let (a, b, u0) = (p[0], p[1], p[2]);
        if b < 0.0 || u0 <= 0.0 {
            return f64::INFINITY;
        }
        let sse: f64 = tau
            .iter()
            .zip(&u)
            .map(|(&s, &y)| (verhulst(a, b, u0, s) - y).powi(2))
            .sum();
        if sse.is_finite() {
            sse
        } else {
            f64::INFINITY
        }
    };

    let crude = (u.last().copied().unwrap_or(1.0).ln() / span).abs();
    let g = 3.0 * crude.max(0.1 / span);
    let mut best = ([0.0, 0.0, 1.0], f64::INFINITY);
    for ia in 0..=40 {
        let a = -g + 2.0 * g * ia as f64 / 40.0;
        for ib in 0..=30 {
            let b = 5.0 * g * ib as f64 / 30.0;
            let p = [a, b, 1.0];
            let c = cost(&p);
            if c < best.1 {
                best = (p, c);
            }
        }
    }
    let (p, sse) = nelder_mead(cost, best.0, [0.1 * g, 0.1 * g, 0.05], 4000, 1e-20);
    LogisticFit {
        a: p[0],
        b: p[1] / scale,
        w0: p[2] * scale,
        t0,
        sse: sse * scale * scale,
    }
}

fn nelder_mead(
    f: impl Fn(&[f64; 3]) -> f64,
    start: [f64; 3],
    step: [f64; 3],
    max_iter: usize,
    ftol: f64,
) -> ([f64; 3], f64) {
    let mut simplex: Vec<([f64; 3], f64)> = (0..4)
        .map(|k| {
            let mut p = start;
            if k > 0 {
                p[k - 1] += step[k - 1];
            }
            (p, f(&p))
        })
        .collect();
    let lerp = |a: &[f64; 3], b: &[f64; 3], s: f64| -> [f64; 3] {
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
    };
    for _ in 0..max_iter {
        simplex.sort_by(|x, y| x.1.total_cmp(&y.1));
        if (simplex[3].1 - simplex[0].1).abs() <= ftol {
            break;
        }
        let mut centroid = [0.0; 3];
        for (p, _) in &simplex[..3] {
            for d in 0..3 {
                centroid[d] += p[d] / 3.0;
            }
        }
        let worst = simplex[3];
        let reflected = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&expanded);
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let contracted = lerp(&centroid, &worst.0, 0.5);
            let fc = f(&contracted);
            if fc < worst.1 {
                simplex[3] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let p = lerp(&best, &entry.0, 0.5);
                    *entry = (p, f(&p));
                }
            }
        }
    }
    simplex.sort_by(|x, y| x.1.total_cmp(&y.1));
    simplex[0]
}

/// Windowed per-unit log growth rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRateSeries {
    pub window: f64,
    /// Start time of each window.
    pub times: Vec<f64>,
    /// `rates[k][i]`: rate of unit `i` over window `k`.
    pub rates: Vec<Vec<f64>>,
}

impl GrowthRateSeries {
    /// `max_i g_i - min_i g_i` per window.
    pub fn spreads(&self) -> Vec<f64> {
        self.rates.iter().map(|r| spread(r)).collect()
    }

    pub fn unit(&self, i: usize) -> Vec<f64> {
        self.rates.iter().map(|r| r[i]).collect()
    }
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// `(ln W_i(t + window) - ln W_i(t)) / window` over consecutive,
/// non-overlapping windows. `window` must be a multiple of the trajectory step.
pub fn growth_rates(trajectory: &Trajectory, window: f64) -> Result<GrowthRateSeries> {
    let step = trajectory.step();
    let stride = (window / step).round();
    if !(window > 0.0) || stride < 1.0 || (stride * step - window).abs() > 1e-9 * window {
        return Err(Error::InvalidArgument(format!(
            "window {window} must be a positive multiple of the sampling step {step}"
        )));
    }
    let stride = stride as usize;
    let samples = trajectory.samples();
    let mut times = Vec::new();
    let mut rates = Vec::new();
    let mut k = 0;
    while k + stride < samples.len() {
        let (s0, s1) = (&samples[k], &samples[k + stride]);
        let dt = s1.t - s0.t;
        let row = s0
            .w
            .iter()
            .zip(&s1.w)
            .enumerate()
            .map(|(i, (&w0, &w1))| {
                if w0 > 0.0 && w1 > 0.0 {
                    Ok((w1.ln() - w0.ln()) / dt)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "unit {i} is not positive in window starting at t = {}",
                        s0.t
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        times.push(s0.t);
        rates.push(row);
        k += stride;
    }
    Ok(GrowthRateSeries { window, times, rates })
}

/// Start of the first window from which the cross-unit spread stays below `eps`.
pub fn convergence_time(rates: &GrowthRateSeries, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    let spreads = rates.spreads();
    match spreads.iter().rposition(|&s| !(s < eps)) {
        None if !spreads.is_empty() => Ok(rates.times[0]),
        Some(k) if k + 1 < spreads.len() => Ok(rates.times[k + 1]),
        _ => Err(Error::NotReached { eps }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub t: f64,
    /// Population standard deviation of `ln W_i`.
    pub log_std: f64,
    /// `max_i W_i - min_i W_i`.
    pub spread: f64,
}

pub fn dispersion_series(trajectory: &Trajectory) -> Result<Vec<Dispersion>> {
    trajectory
        .samples()
        .iter()
        .map(|s| {
            let logs = positive_logs(&s.w)?;
            let n = logs.len() as f64;
            let m = logs.iter().sum::<f64>() / n;
            let var = logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / n;
            Ok(Dispersion {
                t: s.t,
                log_std: var.sqrt(),
                spread: spread(&s.w),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHistogram {
    /// `bins + 1` edges in value space, equally spaced in `ln`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl LogHistogram {
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(e, &c)| (e[0], e[1], c))
    }
}

/// Histogram over `bins` equal-width bins in log space spanning the data.
pub fn log_histogram(values: &[f64], bins: usize) -> Result<LogHistogram> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("histogram of an empty sample".into()));
    }
    let logs = positive_logs(values)?;
    let (mut lo, mut hi) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if hi - lo <= 0.0 {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0; bins];
    for l in &logs {
        let k = (((l - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    let edges = (0..=bins).map(|k| (lo + k as f64 * width).exp()).collect();
    Ok(LogHistogram { edges, counts })
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            what: "pearson y vs x",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InvalidArgument("correlation needs at least 3 observations".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if is_negligible(sxx, x) {
        return Err(Error::ZeroVariance("first variable is constant"));
    }
    if is_negligible(syy, y) {
        return Err(Error::ZeroVariance("second variable is constant"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn is_negligible(sum_sq: f64, v: &[f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    sum_sq <= v.len() as f64 * (4.0 * f64::EPSILON * scale).powi(2)
}

/// Correlation of `x` and `y` with the linear effect of `z` removed:
/// `(r_xy - r_xz r_yz) / sqrt((1 - r_xz²)(1 - r_yz²))`.
pub fn partial_correlation(x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    let rxy = pearson(x, y)?;
    let rxz = pearson(x, z)?;
    let ryz = pearson(y, z)?;
    let dx = 1.0 - rxz * rxz;
    let dy = 1.0 - ryz * ryz;
    if dx <= 1e-12 || dy <= 1e-12 {
        return Err(Error::Degenerate(format!(
            "control variable is perfectly correlated with an input (r_xz = {rxz}, r_yz = {ryz})"
        )));
    }
    Ok(((rxy - rxz * ryz) / (dx * dy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank. Infinite values
/// order after all finite ones.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && v[order[end]] == v[order[k]] {
            end += 1;
        }
        let rank = (k + end + 1) as f64 / 2.0;
        for &i in &order[k..end] {
            ranks[i] = rank;
        }
        k = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StateVector;

    fn series(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> Series {
        let n = (t_end / dt).round() as usize;
        let t: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let v = t.iter().map(|&t| f(t)).collect();
        Series { t, v }
    }

    #[test]
    fn monotone_series_has_no_j_curve() {
        let up = series(|t| (0.1 * t).exp(), 10.0, 1.0);
        assert!(matches!(detect_j_curve(&up), Err(Error::NoJCurve(Direction::Increasing))));
        let down = series(|t| (-0.1 * t).exp(), 10.0, 1.0);
        assert!(matches!(detect_j_curve(&down), Err(Error::NoJCurve(Direction::Decreasing))));
        let short = series(|t| t, 2.0, 1.0);
        assert!(detect_j_curve(&short).is_err());
    }

    #[test]
    fn constructed_j_curve() {
        let s = series(
            |t| if t < 5.0 { (-t).exp() } else { (0.1 * (t - 5.0) - 5.0).exp() },
            30.0,
            0.5,
        );
        let r = detect_j_curve(&s).unwrap();
        assert_eq!(r.trough_time, 5.0);
        assert_eq!(r.initial_slope_sign, SlopeSign::Negative);
        assert!((r.recovery_rate - 0.1).abs() < 1e-12);
        // The decline is a pure exponential, which the logistic family contains.
        let fit = r.logistic_fit.unwrap();
        assert!((fit.a + 1.0).abs() < 1e-3, "{fit:?}");
        assert!(r.logistic_extrapolation_gap.unwrap() > 1.0);
    }

    #[test]
    fn logistic_fit_recovers_parameters() {
        let (a, b, w0) = (0.3, 0.5, 2.0);
        let t: Vec<f64> = (0..30).map(|k| k as f64 * 0.5).collect();
        let v: Vec<f64> = t.iter().map(|&t| verhulst(a, b, w0, t)).collect();
        let fit = fit_logistic(&t, &v);
        assert!(fit.sse < 1e-12, "{fit:?}");
        assert!((fit.eval(40.0) - a / b).abs() < 1e-3);
    }

    #[test]
    fn verhulst_is_continuous_in_a() {
        let near = verhulst(1e-12, 0.5, 2.0, 3.0);
        let zero = verhulst(0.0, 0.5, 2.0, 3.0);
        assert!((near - zero).abs() < 1e-10);
        assert!((zero - 2.0 / (1.0 + 0.5 * 2.0 * 3.0)).abs() < 1e-15);
    }

    fn two_units(a: [f64; 2], t_end: f64) -> Trajectory {
        let samples = (0..=(t_end as usize))
            .map(|k| {
                let t = k as f64;
                StateVector::new(t, vec![(a[0] * t).exp(), (a[1] * t).exp()])
            })
            .collect();
        Trajectory::new(samples, 1.0).unwrap()
    }

    #[test]
    fn exponential_growth_rates() {
        let traj = two_units([0.05, -0.1], 10.0);
        let g = growth_rates(&traj, 2.0).unwrap();
        assert_eq!(g.times, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        for row in &g.rates {
            assert!((row[0] - 0.05).abs() < 1e-12 && (row[1] + 0.1).abs() < 1e-12);
        }
        assert!(growth_rates(&traj, 1.5).is_err());
        assert!(matches!(convergence_time(&g, 1e-3), Err(Error::NotReached { .. })));
    }

    #[test]
    fn identical_units_converge_immediately() {
        let traj = two_units([0.02, 0.02], 5.0);
        let g = growth_rates(&traj, 1.0).unwrap();
        assert_eq!(convergence_time(&g, 1e-3).unwrap(), 0.0);
        let d = dispersion_series(&traj).unwrap();
        assert!(d.iter().all(|d| d.log_std == 0.0 && d.spread == 0.0));
    }

    #[test]
    fn uncoupled_log_dispersion_is_linear() {
        let traj = two_units([0.05, -0.1], 10.0);
        let d = dispersion_series(&traj).unwrap();
        for p in &d {
            assert!((p.log_std - 0.075 * p.t).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_of_repeated_value() {
        let h = log_histogram(&[3.0; 10], 4).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts.iter().sum::<usize>(), 10);
        assert!(log_histogram(&[1.0, 0.0], 4).is_err());
        assert!(log_histogram(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn histogram_edges_are_geometric() {
        let h = log_histogram(&[1.0, 10.0, 100.0], 2).unwrap();
        assert!((h.edges[1] - 10.0).abs() < 1e-12);
        assert_eq!(h.counts, vec![1, 2]);
    }

    #[test]
    fn pearson_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&x, &[2.0; 5]), Err(Error::ZeroVariance(_))));
        assert!(pearson(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn partial_correlation_with_orthogonal_control() {
        // z is exactly uncorrelated with x and y by construction.
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 1.0, 4.0, 3.0];
        let z = [1.0, -1.0, -1.0, 1.0];
        assert_eq!(pearson(&x, &z).unwrap(), 0.0);
        assert_eq!(pearson(&y, &z).unwrap(), 0.0);
        assert_eq!(partial_correlation(&x, &y, &z).unwrap(), pearson(&x, &y).unwrap());
        assert!(matches!(partial_correlation(&x, &y, &x), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, f64::INFINITY, 1.0, f64::INFINITY]),
            vec![3.0, 1.5, 4.5, 1.5, 4.5]
        );
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 100.0, 1000.0]).unwrap() - 1.0).abs() < 1e-15);
    }
}
