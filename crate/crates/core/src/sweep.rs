//! Budget sweep for the powerup suggestion methods: mean predicted balance
//! of the returned level as a function of the evaluation budget `k`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::ClassPair;
use crate::corpus::{generate_random_level, GeneratorParams};
use crate::level::Level;
use crate::suggest::{suggest_powerups, KillRatioPredictor, SuggestError, SuggestMethod, SuggestOptions};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub method: SuggestMethod,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub levels: usize,
    pub seed_mean: f64,
    pub seed_fitness: Vec<f64>,
    pub series: Vec<SweepSeries>,
}

impl SweepResult {
    pub fn point(&self, method: SuggestMethod, k: usize) -> Option<&SweepPoint> {
        self.series
            .iter()
            .find(|s| s.method == method)
            .and_then(|s| s.points.iter().find(|p| p.k == k))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,k,mean_f,ci_low,ci_high\n");
        let _ = writeln!(
            out,
            "seed,0,{:.6},{:.6},{:.6}",
            self.seed_mean, self.seed_mean, self.seed_mean
        );
        for s in &self.series {
            let name = match s.method {
                SuggestMethod::Replacement => "replacement",
                SuggestMethod::Adjustment => "adjustment",
            };
            for p in &s.points {
                let _ = writeln!(out, "{name},{},{:.6},{:.6},{:.6}", p.k, p.mean, p.ci_low, p.ci_high);
            }
        }
        out
    }

    /// Line plot of mean fitness against `k` with shaded confidence bands.
    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 420.0);
        let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
        let kmax = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.k))
            .max()
            .unwrap_or(1) as f64;
        let all = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().flat_map(|p| [p.ci_low, p.ci_high]))
            .chain([self.seed_mean]);
        let (lo, hi) = all.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
        let pad = ((hi - lo) * 0.1).max(0.01);
        let (lo, hi) = ((lo - pad).max(0.0), (hi + pad).min(1.0));
        let x = |k: f64| left + (k - 1.0).max(0.0) / (kmax - 1.0).max(1.0) * (w - left - right);
        let y = |f: f64| top + (hi - f) / (hi - lo) * (h - top - bottom);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            h - bottom,
            w - right,
            h - bottom
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
            h - bottom
        );
        for i in 0..=4 {
            let f = lo + (hi - lo) * i as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{f:.2}</text>"#,
                left - 6.0,
                y(f) + 4.0
            );
        }
        for k in [1.0, kmax / 2.0, kmax] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                x(k),
                h - bottom + 18.0,
                k.round()
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">k</text>"#,
            (left + w - right) / 2.0,
            h - 8.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">mean f</text>"#,
            (top + h - bottom) / 2.0,
            (top + h - bottom) / 2.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="#555" stroke-dasharray="4 3"/>"##,
            y(self.seed_mean),
            w - right
        );
        let colors = ["#1f77b4", "#d62728"];
        for (s, color) in self.series.iter().zip(colors) {
            let upper: Vec<String> = s
                .points
                .iter()
                .map(|p| format!("{:.1},{:.1}", x(p.k as f64), y(p.ci_high)))
                .collect();
            let lower: Vec<String> = s
                .points
                .iter()
                .rev()
                .map(|p| format!("{:.1},{:.1}", x(p.k as f64), y(p.ci_low)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" ")
            );
            let line: Vec<String> = s
                .points
                .iter()
                .map(|p| format!("{:.1},{:.1}", x(p.k as f64), y(p.mean)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
        }
        for (i, (s, color)) in self.series.iter().zip(colors).enumerate() {
            let ly = top + 14.0 + 16.0 * i as f64;
            let label = match s.method {
                SuggestMethod::Replacement => "replacement",
                SuggestMethod::Adjustment => "adjustment",
            };
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{label}</text>"#,
                w - right - 130.0,
                w - right - 110.0,
                w - right - 104.0,
                ly + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{ly}" x2="{x1}" y2="{ly}" stroke="#555" stroke-dasharray="4 3"/><text x="{tx}" y="{ty}">seed</text>"##,
            x0 = w - right - 130.0,
            x1 = w - right - 110.0,
            tx = w - right - 104.0,
            ly = top + 46.0,
            ty = top + 50.0
        );
        svg.push_str("</svg>\n");
        svg
    }
}

/// The sweep's fixed level set: `n` generated levels with default parameters.
pub fn fixture_levels(n: usize, seed: u64) -> Vec<Level> {
    (0..n as u64)
        .map(|i| generate_random_level(crate::seed::derive(seed, &[0x5eed, i]), &GeneratorParams::default()))
        .collect::<Result<_, _>>()
        .expect("default generator parameters are valid")
}

/// Mean and normal-approximation 95% interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let half = Z95 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Runs both methods once per level with budget `k_max`. The best-so-far
/// history of a run gives the result for every smaller budget.
pub fn run_sweep<P>(
    predictor: &P,
    levels: &[Level],
    pair: ClassPair,
    k_max: usize,
    seed: u64,
) -> Result<SweepResult, SuggestError>
where
    P: KillRatioPredictor + Sync + ?Sized,
{
    let methods = [SuggestMethod::Replacement, SuggestMethod::Adjustment];
    let runs: Vec<(usize, usize, Vec<f64>, f64)> = levels
        .par_iter()
        .enumerate()
        .flat_map_iter(|(li, level)| methods.iter().enumerate().map(move |(mi, &m)| (li, mi, level, m)))
        .map(|(li, mi, level, method)| {
            let opts = SuggestOptions {
                k: k_max,
                seed: crate::seed::derive(seed, &[li as u64]),
                ..Default::default()
            };
            let s = suggest_powerups(predictor, level, pair, method, &opts, &|| false)?;
            Ok((li, mi, s.history, s.seed_fitness))
        })
        .collect::<Result<_, SuggestError>>()?;

    let mut seed_fitness = vec![0.0; levels.len()];
    let mut series = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        let histories: Vec<&Vec<f64>> = runs.iter().filter(|r| r.1 == mi).map(|r| &r.2).collect();
        for r in runs.iter().filter(|r| r.1 == mi) {
            seed_fitness[r.0] = r.3;
        }
        let points = (1..=k_max)
            .map(|k| {
                let at: Vec<f64> = histories.iter().map(|h| h[k - 1]).collect();
                let (mean, ci_low, ci_high) = mean_ci(&at);
                SweepPoint {
                    k,
                    mean,
                    ci_low,
                    ci_high,
                }
            })
            .collect();
        series.push(SweepSeries { method, points });
    }
    Ok(SweepResult {
        levels: levels.len(),
        seed_mean: seed_fitness.iter().sum::<f64>() / levels.len().max(1) as f64,
        seed_fitness,
        series,
    })
}
