//! Gameplay metrics extracted from a trace: kill ratio, duration, death
//! heatmap, dramatic arc and combat pacing.

use serde::{Deserialize, Serialize};

use crate::level::CELLS;
use crate::sim::{GameplayTrace, Player};

/// Two-minute windows in a ten-minute match.
pub const WINDOWS: usize = 5;
/// Window length in seconds.
pub const WINDOW_SECONDS: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameplayMetrics {
    /// Player 1's share of all kills.
    pub kill_ratio: f64,
    /// Seconds.
    pub duration: f64,
    /// Deaths per 5×5 cell over all deaths.
    pub dh: [f64; CELLS],
    /// Player 1's cumulative kill ratio at 2, 4, 6, 8 and 10 minutes.
    pub da: [f64; WINDOWS],
    /// Kills within each 2-minute window over all kills.
    pub cp: [f64; WINDOWS],
}

impl GameplayMetrics {
    /// Rounds every value to 6 decimals, the corpus file precision.
    pub fn rounded(&self) -> Self {
        let r = |x: f64| (x * 1e6).round() / 1e6;
        Self {
            kill_ratio: r(self.kill_ratio),
            duration: r(self.duration),
            dh: self.dh.map(r),
            da: self.da.map(r),
            cp: self.cp.map(r),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = (self.kill_ratio - other.kill_ratio)
            .abs()
            .max((self.duration - other.duration).abs());
        for (a, b) in self
            .dh
            .iter()
            .zip(&other.dh)
            .chain(self.da.iter().zip(&other.da))
            .chain(self.cp.iter().zip(&other.cp))
        {
            d = d.max((a - b).abs());
        }
        d
    }
}

/// Ratio with the balanced default when nothing has happened yet.
fn ratio_or_half(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.5
    } else {
        num as f64 / den as f64
    }
}

pub fn extract_metrics(trace: &GameplayTrace) -> GameplayMetrics {
    let total = trace.events.len();
    let p1_kills =
        |events: &mut dyn Iterator<Item = &crate::sim::KillEvent>| events.filter(|e| e.victim == Player::Two).count();

    let kill_ratio = ratio_or_half(p1_kills(&mut trace.events.iter()), total);

    let mut dh = [0.0; CELLS];
    if total > 0 {
        for e in &trace.events {
            dh[e.location.cell()] += 1.0;
        }
        for v in &mut dh {
            *v /= total as f64;
        }
    }

    let mut da = [0.0; WINDOWS];
    let mut cp = [0.0; WINDOWS];
    for j in 0..WINDOWS {
        let end = WINDOW_SECONDS * (j + 1) as f64;
        let start = WINDOW_SECONDS * j as f64;
        let upto = trace.events.iter().filter(|e| e.time <= end).count();
        let upto_p1 = p1_kills(&mut trace.events.iter().filter(|e| e.time <= end));
        da[j] = ratio_or_half(upto_p1, upto);
        if total > 0 {
            let in_window = trace
                .events
                .iter()
                .filter(|e| e.time <= end && (j == 0 || e.time > start))
                .count();
            cp[j] = in_window as f64 / total as f64;
        }
    }

    GameplayMetrics {
        kill_ratio,
        duration: trace.ended_at,
        dh,
        da,
        cp,
    }
}
