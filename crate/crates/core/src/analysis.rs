//! Statistical toolkit: popularity, spectra, request entropies, divergence,
//! similarity and the two correlation fits. All logs are natural.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::CellId;
use crate::stats::{least_squares, Ecdf};
use crate::trace::{DayClock, RequestRecord, VideoId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityReport {
    /// (rank, request count), rank 1 = most requested.
    pub rank_counts: Vec<(usize, u64)>,
    /// Log-log slope, absent when the fit is degenerate.
    pub slope: Option<f64>,
    pub status: String,
}

/// Request count per video, in descending order (ties by video id).
pub fn video_counts(records: &[RequestRecord]) -> Vec<(VideoId, u64)> {
    let mut counts: HashMap<VideoId, u64> = HashMap::new();
    for r in records {
        *counts.entry(r.video).or_default() += 1;
    }
    let mut out: Vec<(VideoId, u64)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Rank-frequency table with a log-log least-squares slope over ranks
/// [10, 0.9 * max_rank]; the whole range is used when the trimmed window
/// holds fewer than two points.
pub fn popularity_histogram(records: &[RequestRecord]) -> Result<PopularityReport> {
    if records.is_empty() {
        return Err(Error::NoSamples);
    }
    let rank_counts: Vec<(usize, u64)> =
        video_counts(records).into_iter().enumerate().map(|(i, (_, c))| (i + 1, c)).collect();
    let max_rank = rank_counts.len();
    let hi = (0.9 * max_rank as f64).floor() as usize;
    let mut window: Vec<&(usize, u64)> = rank_counts.iter().filter(|(r, _)| *r >= 10 && *r <= hi).collect();
    if window.len() < 2 {
        window = rank_counts.iter().collect();
    }
    let slope = if window.len() < 2 {
        None
    } else {
        let rows: Vec<Vec<f64>> = window.iter().map(|(r, _)| vec![(*r as f64).ln(), 1.0]).collect();
        let y: Vec<f64> = window.iter().map(|(_, c)| (*c as f64).ln()).collect();
        least_squares(&rows, &y).ok().map(|(c, _)| c[0])
    };
    let status = if slope.is_some() { "fit" } else { "degenerate" }.to_string();
    Ok(PopularityReport { rank_counts, slope, status })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalGlobalReport {
    /// (video, mean local rank percentile) for the globally top-n videos.
    pub videos: Vec<(VideoId, f64)>,
    pub cdf: Vec<(f64, f64)>,
}

/// For each of the globally top-n videos, averages its local rank
/// percentile (local rank / videos requested in the cell) over the cells
/// that requested it.
pub fn local_global_rank(records: &[RequestRecord], top_n: usize) -> Result<LocalGlobalReport> {
    let global = video_counts(records);
    if top_n > global.len() {
        return Err(Error::InvalidConfig(format!("top_n {top_n} exceeds {} distinct videos", global.len())));
    }
    let mut per_cell: BTreeMap<CellId, HashMap<VideoId, u64>> = BTreeMap::new();
    for r in records {
        *per_cell.entry(CellId::of(r.position)).or_default().entry(r.video).or_default() += 1;
    }
    let mut local_pct: HashMap<VideoId, (f64, usize)> = HashMap::new();
    for counts in per_cell.values() {
        let mut ranked: Vec<(VideoId, u64)> = counts.iter().map(|(&v, &c)| (v, c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let n = ranked.len() as f64;
        for (i, (v, _)) in ranked.iter().enumerate() {
            let e = local_pct.entry(*v).or_default();
            e.0 += (i + 1) as f64 / n;
            e.1 += 1;
        }
    }
    let videos: Vec<(VideoId, f64)> = global
        .iter()
        .take(top_n)
        .map(|(v, _)| {
            let (sum, n) = local_pct[v];
            (*v, sum / n as f64)
        })
        .collect();
    let cdf = Ecdf::from_samples(videos.iter().map(|&(_, p)| p).collect()).steps();
    Ok(LocalGlobalReport { videos, cdf })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

/// Requests per hour for `n_hours` hours starting at `start` (epoch seconds).
pub fn hourly_series(records: &[RequestRecord], start: i64, n_hours: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_hours];
    for r in records {
        let h = (r.timestamp - start).div_euclid(3600);
        if h >= 0 && (h as usize) < n_hours {
            out[h as usize] += 1.0;
        }
    }
    out
}

/// Complex DFT with 1-based sample indexing:
/// X[k] = sum_{n=1..N} x_n exp(-2 pi i k n / N).
pub fn dft(series: &[f64]) -> Vec<Complex64> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // The FFT indexes samples from 0; shifting to 1-based multiplies by
    // exp(-2 pi i k / N).
    let tau = std::f64::consts::TAU;
    for (k, x) in buf.iter_mut().enumerate() {
        let angle = -tau * k as f64 / n as f64;
        *x *= Complex64::from_polar(1.0, angle);
    }
    buf
}

pub fn dft_spectrum(series: &[f64]) -> Result<Spectrum> {
    if series.is_empty() {
        return Err(Error::NoSamples);
    }
    let x = dft(series);
    Ok(Spectrum { amplitudes: x.iter().map(|c| c.norm()).collect(), phases: x.iter().map(|c| c.arg()).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub k: usize,
    pub period_hours: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Up to `k_max` strongest non-DC frequencies among k = 1..=N/2 (mirrors
/// collapsed), strongest first, ties by smaller k. Numerically zero
/// amplitudes are dropped.
pub fn dominant_periods(spectrum: &Spectrum, k_max: usize) -> Vec<Period> {
    let n = spectrum.len();
    let peak = spectrum.amplitudes.iter().copied().fold(0.0, f64::max);
    let floor = 1e-9 * peak.max(f64::MIN_POSITIVE);
    let mut out: Vec<Period> = (1..=n / 2)
        .filter(|&k| spectrum.amplitudes[k] > floor)
        .map(|k| Period {
            k,
            period_hours: n as f64 / k as f64,
            amplitude: spectrum.amplitudes[k],
            phase: spectrum.phases[k],
        })
        .collect();
    out.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude).then(a.k.cmp(&b.k)));
    out.truncate(k_max);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub raw: f64,
    pub normalized: f64,
    pub support_size: usize,
}

/// Shannon entropy of a count vector; zero counts are ignored.
pub fn entropy_of_counts(counts: &[u64]) -> Result<EntropyReport> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoSamples);
    }
    let support_size = counts.iter().filter(|&&c| c > 0).count();
    let raw: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0);
    let normalized = if support_size >= 2 { (raw / (support_size as f64).ln()).clamp(0.0, 1.0) } else { 0.0 };
    Ok(EntropyReport { raw, normalized, support_size })
}

/// Geographical request entropy of one video over cells.
pub fn video_entropy(records: &[RequestRecord], video: VideoId) -> Result<EntropyReport> {
    let mut counts: BTreeMap<CellId, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.video == video) {
        *counts.entry(CellId::of(r.position)).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(Error::UnknownVideo(format!("{}", video.0)));
    }
    entropy_of_counts(&counts.into_values().collect::<Vec<_>>())
}

/// Request entropy of one cell over the videos requested there.
pub fn location_entropy(records: &[RequestRecord], cell: CellId) -> Result<EntropyReport> {
    let mut counts: BTreeMap<VideoId, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| CellId::of(r.position) == cell) {
        *counts.entry(r.video).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(Error::UnknownCell(cell.row, cell.col));
    }
    entropy_of_counts(&counts.into_values().collect::<Vec<_>>())
}

/// Entropies of every video and every cell in one pass.
pub fn all_entropies(records: &[RequestRecord]) -> (BTreeMap<VideoId, EntropyReport>, BTreeMap<CellId, EntropyReport>) {
    let mut by_video: BTreeMap<VideoId, BTreeMap<CellId, u64>> = BTreeMap::new();
    let mut by_cell: BTreeMap<CellId, BTreeMap<VideoId, u64>> = BTreeMap::new();
    for r in records {
        let c = CellId::of(r.position);
        *by_video.entry(r.video).or_default().entry(c).or_default() += 1;
        *by_cell.entry(c).or_default().entry(r.video).or_default() += 1;
    }
    let ent = |counts: Vec<u64>| entropy_of_counts(&counts).expect("non-empty counts");
    (
        by_video.iter().map(|(&v, m)| (v, ent(m.values().copied().collect()))).collect(),
        by_cell.iter().map(|(&c, m)| (c, ent(m.values().copied().collect()))).collect(),
    )
}

/// Assigns each video a popularity grade 0..=boundaries.len() by request
/// count quantiles (grade 0 = least requested). Default boundaries are the
/// quartiles.
pub fn popularity_grades(records: &[RequestRecord], quantiles: &[f64]) -> BTreeMap<VideoId, usize> {
    let counts = video_counts(records);
    let cdf = Ecdf::from_samples(counts.iter().map(|&(_, c)| c as f64).collect());
    let cuts: Vec<f64> = quantiles.iter().filter_map(|&q| cdf.quantile(q)).collect();
    counts
        .into_iter()
        .map(|(v, c)| (v, cuts.iter().filter(|&&cut| c as f64 > cut).count()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Highest power first: (a, b, c) for a x^2 + b x + c, (a, b) for a ln x + b.
    pub coefficients: Vec<f64>,
    pub residual: f64,
}

pub fn entropy_poi_fit(samples: &[(f64, f64)]) -> Result<FitResult> {
    let distinct: BTreeSet<u64> = samples.iter().map(|(x, _)| x.to_bits()).collect();
    if distinct.len() < 3 {
        return Err(Error::RankDeficient);
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(|&(x, _)| vec![x * x, x, 1.0]).collect();
    let y: Vec<f64> = samples.iter().map(|&(_, y)| y).collect();
    let (coefficients, residual) = least_squares(&rows, &y)?;
    Ok(FitResult { coefficients, residual: residual.max(0.0) })
}

pub fn entropy_mobility_fit(samples: &[(f64, f64)]) -> Result<FitResult> {
    if let Some(&(x, _)) = samples.iter().find(|(x, _)| !(*x > 0.0)) {
        return Err(Error::NonPositive(x));
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(|&(x, _)| vec![x.ln(), 1.0]).collect();
    let y: Vec<f64> = samples.iter().map(|&(_, y)| y).collect();
    let (coefficients, residual) = least_squares(&rows, &y)?;
    Ok(FitResult { coefficients, residual: residual.max(0.0) })
}

pub const KL_EPSILON: f64 = 1e-6;

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidDistribution(format!("{name} has negative or non-finite mass")));
    }
    if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("{name} does not sum to 1")));
    }
    Ok(())
}

/// KL divergence D(P || Q) in nats, with additive smoothing by
/// [`KL_EPSILON`] and renormalization of both sides.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty distribution".into()));
    }
    check_distribution(p, "P")?;
    check_distribution(q, "Q")?;
    let smooth = |d: &[f64]| -> Vec<f64> {
        let z = 1.0 + KL_EPSILON * d.len() as f64;
        d.iter().map(|&x| (x + KL_EPSILON) / z).collect()
    };
    let (ps, qs) = (smooth(p), smooth(q));
    Ok(ps.iter().zip(&qs).map(|(&a, &b)| a * (a / b).ln()).sum::<f64>().max(0.0))
}

/// Share of requests per local hour of day.
pub fn hour_of_day_distribution(records: &[RequestRecord], clock: DayClock) -> Result<[f64; 24]> {
    if records.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut out = [0.0; 24];
    for r in records {
        out[clock.hour_of_day(r.timestamp) as usize] += 1.0;
    }
    let n = records.len() as f64;
    out.iter_mut().for_each(|x| *x /= n);
    Ok(out)
}

/// |A ∩ B| / |A ∪ B|, defined as 0 when both are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub days: Vec<i64>,
    /// Daily totals divided by the first day's total.
    pub normalized: Vec<f64>,
    pub mu_hat: f64,
}

/// Daily request totals for the records selected by `in_category`, and the
/// decay rate from a least-squares line through the log counts. Days without
/// requests inside the span are reported as 0 and skipped by the fit.
pub fn category_decay_profile(
    records: &[RequestRecord],
    mut in_category: impl FnMut(VideoId) -> bool,
    clock: DayClock,
) -> Result<DecayProfile> {
    let mut per_day: BTreeMap<i64, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| in_category(r.video)) {
        *per_day.entry(clock.day(r.timestamp)).or_default() += 1;
    }
    if per_day.len() < 2 {
        return Err(Error::InsufficientDays(per_day.len()));
    }
    let first = *per_day.keys().next().unwrap();
    let last = *per_day.keys().next_back().unwrap();
    let base = per_day[&first] as f64;
    let days: Vec<i64> = (first..=last).collect();
    let normalized = days.iter().map(|d| per_day.get(d).copied().unwrap_or(0) as f64 / base).collect();
    let rows: Vec<Vec<f64>> = per_day.keys().map(|&d| vec![(d - first) as f64, 1.0]).collect();
    let y: Vec<f64> = per_day.values().map(|&c| (c as f64).ln()).collect();
    let (coef, _) = least_squares(&rows, &y)?;
    Ok(DecayProfile { days, normalized, mu_hat: -coef[0] })
}

/// Mean number of distinct multi-location users per day among each cell's
/// requesters, averaged over the days present in the trace. Cells with no
/// such users are omitted. `multi_location` lists the (user, day) pairs
/// classified as multi-location.
pub fn mobility_intensity(
    records: &[RequestRecord],
    multi_location: &BTreeSet<(crate::trace::UserId, i64)>,
    clock: DayClock,
) -> BTreeMap<CellId, f64> {
    let days: BTreeSet<i64> = records.iter().map(|r| clock.day(r.timestamp)).collect();
    let mut seen: BTreeSet<(CellId, i64, crate::trace::UserId)> = BTreeSet::new();
    for r in records {
        let day = clock.day(r.timestamp);
        if multi_location.contains(&(r.user, day)) {
            seen.insert((CellId::of(r.position), day, r.user));
        }
    }
    let mut out: BTreeMap<CellId, f64> = BTreeMap::new();
    for (c, _, _) in seen {
        *out.entry(c).or_default() += 1.0;
    }
    let n_days = days.len().max(1) as f64;
    out.values_mut().for_each(|v| *v /= n_days);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::trace::UserId;

    fn rec(video: u32, lat: f64, ts: i64) -> RequestRecord {
        RequestRecord { user: UserId(0), timestamp: ts, position: GeoPoint { lat, lon: 116.305 }, video: VideoId(video) }
    }

    #[test]
    fn degenerate_popularity() {
        let r = popularity_histogram(&[rec(1, 39.9, 0), rec(1, 39.9, 1)]).unwrap();
        assert_eq!(r.status, "degenerate");
        assert!(r.slope.is_none());
        assert!(popularity_histogram(&[]).is_err());
    }

    #[test]
    fn zipf_slope() {
        let mut records = Vec::new();
        for rank in 1..=100u32 {
            let n = (100_000.0 / rank as f64).round() as u32;
            records.extend((0..n).map(|_| rec(rank, 39.9, 0)));
        }
        let r = popularity_histogram(&records).unwrap();
        assert!((r.slope.unwrap() + 1.0).abs() < 0.01);
    }

    #[test]
    fn local_rank_in_two_cells() {
        // Cell A: v1 x3, v2 x1. Cell B: v2 x2, v1 x1, v3 x1.
        let mut rs = vec![rec(1, 39.905, 0), rec(1, 39.905, 0), rec(1, 39.905, 0), rec(2, 39.905, 0)];
        rs.extend([rec(2, 39.915, 0), rec(2, 39.915, 0), rec(1, 39.915, 0), rec(3, 39.915, 0)]);
        let r = local_global_rank(&rs, 2).unwrap();
        // Global: v1 (4), v2 (3).
        assert_eq!(r.videos[0].0, VideoId(1));
        assert!((r.videos[0].1 - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((r.videos[1].1 - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!(local_global_rank(&rs, 4).is_err());
    }

    #[test]
    fn single_tone_spectrum() {
        let n = 168;
        let x: Vec<f64> = (1..=n).map(|i| (std::f64::consts::TAU * i as f64 * 7.0 / n as f64).cos()).collect();
        let s = dft_spectrum(&x).unwrap();
        let top = dominant_periods(&s, 5);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].k, 7);
        assert!((top[0].period_hours - 24.0).abs() < 1e-12);
        assert!((s.amplitudes[161] - s.amplitudes[7]).abs() < 1e-9);
    }

    #[test]
    fn constant_series_is_dc_only() {
        let s = dft_spectrum(&[3.0; 24]).unwrap();
        assert!((s.amplitudes[0] - 72.0).abs() < 1e-9);
        assert!(s.amplitudes[1..].iter().all(|&a| a < 1e-9));
        assert!(dominant_periods(&s, 3).is_empty());
    }

    #[test]
    fn entropy_cases() {
        let e = entropy_of_counts(&[8, 1, 1]).unwrap();
        let raw = -(0.8f64 * 0.8f64.ln() + 2.0 * 0.1 * 0.1f64.ln());
        assert!((e.raw - raw).abs() < 1e-12);
        assert!((e.normalized - raw / 3f64.ln()).abs() < 1e-12);
        assert_eq!(entropy_of_counts(&[5]).unwrap().normalized, 0.0);
        assert!((entropy_of_counts(&[1; 8]).unwrap().normalized - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_closed_form() {
        assert!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap().abs() < 1e-12);
        let d = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-4);
        assert!(kl_divergence(&[0.7, 0.7], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn jaccard_counts() {
        let a: BTreeSet<u32> = [1, 2, 3].into();
        let b: BTreeSet<u32> = [2, 3, 4, 5].into();
        assert!((jaccard(&a, &b) - 0.4).abs() < 1e-15);
        assert_eq!(jaccard::<u32>(&BTreeSet::new(), &BTreeSet::new()), 0.0);
        assert_eq!(jaccard(&a, &a), 1.0);
    }

    #[test]
    fn decay_halving() {
        let clock = DayClock::default();
        let t0 = 1_475_251_200;
        let mut rs = Vec::new();
        for d in 0..5 {
            let n = 1024 >> d;
            rs.extend((0..n).map(|_| rec(1, 39.9, t0 + d * 86_400 + 100)));
        }
        let p = category_decay_profile(&rs, |_| true, clock).unwrap();
        assert!((p.mu_hat - 2f64.ln()).abs() < 1e-6);
        assert_eq!(p.normalized[1], 0.5);
        assert!(matches!(
            category_decay_profile(&rs[..1], |_| true, clock),
            Err(Error::InsufficientDays(1))
        ));
    }

    #[test]
    fn fits_recover_exact_curves() {
        let pts: Vec<(f64, f64)> = (1..8).map(|x| (x as f64, 0.0003 * (x * x) as f64 - 0.0096 * x as f64 + 0.9648)).collect();
        let f = entropy_poi_fit(&pts).unwrap();
        assert!((f.coefficients[0] - 0.0003).abs() < 1e-9);
        assert!(f.residual < 1e-18);
        let pts: Vec<(f64, f64)> = (1..8).map(|x| (x as f64, 0.0085 * (x as f64).ln() + 0.9273)).collect();
        let f = entropy_mobility_fit(&pts).unwrap();
        assert!((f.coefficients[0] - 0.0085).abs() < 1e-9);
        assert!(matches!(entropy_mobility_fit(&[(0.0, 1.0)]), Err(Error::NonPositive(_))));
        assert!(entropy_poi_fit(&[(1.0, 1.0), (1.0, 2.0), (2.0, 1.0)]).is_err());
    }
}
