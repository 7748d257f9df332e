//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails. Pass a substring as the first
//! argument to run only the matching criteria.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use susketch_core::corpus::{
    build_corpus, generate_random_level, read_corpus, split_dataset, CorpusRecord, GeneratorParams,
};
use susketch_core::level::{ViolationCode, CELLS, SIZE, TILES};
use susketch_core::maps::load_predefined;
use susketch_core::seed;
use susketch_core::sim::Player;
use susketch_core::suggest::{
    balance_fitness, powerups_per_cell, replacement_candidate, suggest_class_pairs, suggest_powerups,
    CountingPredictor, KillRatioPredictor, SuggestMethod, SuggestOptions, EMPTY_CELL_PROBABILITY,
};
use susketch_core::surrogate::{
    encode_record, evaluate_mean_baseline, evaluate_model, train_model, Batch, Dataset, ModelConfig, ModelInput,
    ModelSet, SurrogateModel, Target,
};
use susketch_core::sweep::{fixture_levels, run_sweep};
use susketch_core::{
    extract_metrics, is_valid_match, simulate_match, ClassKind, ClassPair, Coord, GameplayTrace, Level, PowerupKind,
    TileKind, BASE1, BASE2,
};
use susketch_service::{serve_on, AppState, ServiceConfig};

// Pinned tolerances and sizes.
const FITNESS_TOL: f64 = 1e-12;
const METRICS_TOL: f64 = 1e-9;
const GRAD_TOL: f64 = 1e-4;
const MEMORIZE_MAE: f64 = 0.05;
const BASELINE_GAIN: f64 = 0.10;
const MIRROR_KR: (f64, f64) = (0.45, 0.55);
const MIRROR_SWAP_TOL: f64 = 0.15;
const EMPTY_RATE_TOL: f64 = 0.02;
const PREDICT_BUDGET: Duration = Duration::from_millis(100);
const SUGGEST_BUDGET: Duration = Duration::from_secs(2);

const CORPUS_N: usize = 20_000;
const CORPUS_SEED: u64 = 2024;
/// Epochs for the desk KR model; the full 50-epoch schedule does not fit
/// the test budget on one core.
const KR_EPOCHS: usize = 12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn info(msg: impl AsRef<str>) {
    println!("INFO {}", msg.as_ref());
}

struct Desk {
    records: Vec<CorpusRecord>,
    build_secs: f64,
    identical: bool,
    kr: SurrogateModel,
    kr_mae: f64,
    baseline_mae: f64,
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let params = GeneratorParams::default();
        let started = Instant::now();
        let mut first = Vec::new();
        build_corpus(CORPUS_N, CORPUS_SEED, &params, &mut first, |_| {}).unwrap();
        let build_secs = started.elapsed().as_secs_f64();
        let mut second = Vec::new();
        build_corpus(CORPUS_N, CORPUS_SEED, &params, &mut second, |_| {}).unwrap();
        let identical = first == second;
        drop(second);
        let records = read_corpus(&first[..]).unwrap().records;
        info(format!("corpus: {CORPUS_N} records in {build_secs:.1}s"));

        let split = split_dataset(records.len(), 0.2, 0).unwrap();
        let data = Dataset::from_records(&records, Target::KillRatio).unwrap();
        let mut config = ModelConfig::preset(Target::KillRatio);
        config.epochs = KR_EPOCHS;
        let mut kr = SurrogateModel::new(config, Target::KillRatio).unwrap();
        let t = Instant::now();
        train_model(&mut kr, &data, &split, |s| {
            info(format!(
                "kr epoch {} train {:.5} held-out {:.5}",
                s.epoch,
                s.train_loss,
                s.validation_loss.unwrap_or(f64::NAN)
            ))
        })
        .unwrap();
        info(format!(
            "kr training: {KR_EPOCHS} epochs in {:.0}s",
            t.elapsed().as_secs_f64()
        ));
        let kr_mae = evaluate_model(&kr, &data, &split.test).unwrap().mean_mae;
        let baseline_mae = evaluate_mean_baseline(&data, &split.train, &split.test)
            .unwrap()
            .mean_mae;
        Desk {
            records,
            build_secs,
            identical,
            kr,
            kr_mae,
            baseline_mae,
        }
    })
}

const EDGES: [&str; 7] = ["GG", "FF", "SF", "FS", "SG", "GS", "FG"];

fn grid(level: &Level) -> Vec<Vec<char>> {
    level.grid_rows().iter().map(|r| r.chars().collect()).collect()
}

fn oracle_step(g: &[Vec<char>], a: (usize, usize), b: (usize, usize)) -> bool {
    let pair: String = [g[a.0][a.1], g[b.0][b.1]].iter().collect();
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1 && EDGES.contains(&pair.as_str())
}

fn oracle_bfs(g: &[Vec<char>], start: (usize, usize)) -> Vec<Vec<Option<usize>>> {
    let mut dist = vec![vec![None; SIZE]; SIZE];
    if g[start.0][start.1] == 'W' {
        return dist;
    }
    dist[start.0][start.1] = Some(0);
    let mut q = VecDeque::from([start]);
    while let Some((r, c)) = q.pop_front() {
        let d = dist[r][c].unwrap();
        for (nr, nc) in [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)] {
            if nr < SIZE && nc < SIZE && dist[nr][nc].is_none() && oracle_step(g, (r, c), (nr, nc)) {
                dist[nr][nc] = Some(d + 1);
                q.push_back((nr, nc));
            }
        }
    }
    dist
}

/// Recounts the metrics of a trace kill by kill.
fn metrics_oracle(trace: &GameplayTrace) -> Vec<f64> {
    let n = trace.events.len();
    let mut dh = [0.0; CELLS];
    let mut kills = [0usize; 5];
    let mut p1 = [0usize; 5];
    for e in &trace.events {
        dh[(e.location.row / 5) * 4 + e.location.col / 5] += 1.0;
        let w = ((e.time / 120.0).ceil() as usize).clamp(1, 5) - 1;
        kills[w] += 1;
        p1[w] += usize::from(e.victim == Player::Two);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.5 } else { a as f64 / b as f64 };
    let mut out = vec![ratio(trace.kills_by(Player::One), n), trace.ended_at];
    out.extend(dh.iter().map(|d| if n == 0 { 0.0 } else { d / n as f64 }));
    let (mut all, mut ones) = (0, 0);
    for w in 0..5 {
        all += kills[w];
        ones += p1[w];
        out.push(ratio(ones, all));
    }
    out.extend(kills.iter().map(|&k| if n == 0 { 0.0 } else { k as f64 / n as f64 }));
    out
}

fn flatten(m: &susketch_core::GameplayMetrics) -> Vec<f64> {
    let mut v = vec![m.kill_ratio, m.duration];
    v.extend(m.dh);
    v.extend(m.da);
    v.extend(m.cp);
    v
}

/// Level with every tile and powerup copied from its half-turn image.
fn half_turn_symmetric(level: &Level) -> Level {
    let mut out = level.clone();
    out.clear_powerups();
    for i in 0..TILES / 2 {
        let at = Coord::from_index(i);
        let image = Coord::from_index(TILES - 1 - i);
        if !at.is_base() {
            out.set_tile(image, level.tile(at)).unwrap();
        }
    }
    for (at, kind) in level.powerups() {
        let image = Coord::from_index(TILES - 1 - at.index());
        if at.index() < TILES / 2 && !image.is_base() && out.tile(image).holds_powerup() {
            out.set_powerup(at, kind).unwrap();
            out.set_powerup(image, kind).unwrap();
        }
    }
    out
}

fn fitness_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let kr: f64 = rng.gen();
        worst = worst.max((balance_fitness(kr) - balance_fitness(1.0 - kr)).abs());
    }
    let fixed = (balance_fitness(0.5) - 1.0).abs() + balance_fitness(0.0).abs() + balance_fitness(1.0).abs();
    outcome(
        fixed <= FITNESS_TOL && worst <= FITNESS_TOL,
        format!("fixed points err {fixed:.1e}, max |f(kr)-f(1-kr)| {worst:.1e} over 1000 draws"),
    )
}

fn pathfinding_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut pairs = 0;
    for i in 0..1000u64 {
        let params = GeneratorParams {
            wall_density: rng.gen_range(0.0..0.3),
            platform_count: rng.gen_range(0..6),
            powerup_count: rng.gen_range(0..12),
        };
        let level = generate_random_level(seed::derive(2, &[i]), &params).unwrap();
        let g = grid(&level);
        for _ in 0..10 {
            let a = Coord::new(rng.gen_range(0..SIZE), rng.gen_range(0..SIZE));
            let b = Coord::new(rng.gen_range(0..SIZE), rng.gen_range(0..SIZE));
            if g[a.row][a.col] == 'W' || g[b.row][b.col] == 'W' {
                continue;
            }
            pairs += 1;
            let ours = level.shortest_path(a, b).unwrap();
            let expected = oracle_bfs(&g, (a.row, a.col))[b.row][b.col];
            let legal = ours
                .path
                .windows(2)
                .all(|w| oracle_step(&g, (w[0].row, w[0].col), (w[1].row, w[1].col)));
            let ok = match expected {
                Some(d) => ours.reachable && ours.length == d && ours.path.len() == d + 1 && legal,
                None => !ours.reachable,
            };
            mismatches += usize::from(!ok);
        }
        for base in [BASE1, BASE2] {
            let table = level.distances_from(base);
            let oracle = oracle_bfs(&g, (base.row, base.col));
            for (j, d) in table.iter().enumerate() {
                let at = Coord::from_index(j);
                let want = oracle[at.row][at.col].map_or(u16::MAX, |d| d as u16);
                mismatches += usize::from(*d != want);
            }
        }
    }
    let fixture = load_predefined("two_platform").unwrap().level;
    let down = fixture.shortest_path(Coord::new(4, 8), Coord::new(4, 7)).unwrap();
    let up = fixture.shortest_path(Coord::new(4, 7), Coord::new(4, 8)).unwrap();
    let secs = started.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && down.length == 1 && up.reachable && up.length >= 3 && secs < 10.0,
        format!(
            "{pairs} pairs + base tables on 1000 levels, {mismatches} mismatches; drop 1 step vs climb {} steps; {secs:.2}s",
            up.length
        ),
    )
}

fn playability_suite() -> Outcome {
    let c = Coord::new;
    let mut cases: Vec<(&str, Level, Vec<ViolationCode>)> = Vec::new();

    let mut l = Level::new();
    l.paint_area(c(10, 0), c(10, 19), TileKind::Wall).unwrap();
    cases.push(("wall across the map", l, vec![ViolationCode::BaseUnreachable]));

    let mut l = Level::new();
    for n in c(10, 10).neighbors4() {
        l.set_tile(n, TileKind::Wall).unwrap();
    }
    l.set_powerup(c(10, 10), PowerupKind::Health).unwrap();
    cases.push(("walled-in health", l, vec![ViolationCode::PowerupUnreachable]));

    let mut l = Level::new();
    l.set_tile(c(10, 10), TileKind::Stairs).unwrap();
    cases.push(("stairs, 0 floor neighbours", l, vec![ViolationCode::StairsAdjacency]));

    let mut l = Level::new();
    l.set_tile(c(10, 11), TileKind::FirstFloor).unwrap();
    l.set_tile(c(10, 10), TileKind::Stairs).unwrap();
    cases.push(("stairs, 1 floor neighbour", l, vec![]));

    let mut l = Level::new();
    l.set_tile(c(10, 11), TileKind::FirstFloor).unwrap();
    l.set_tile(c(10, 9), TileKind::FirstFloor).unwrap();
    l.set_tile(c(10, 10), TileKind::Stairs).unwrap();
    cases.push(("stairs, 2 floor neighbours", l, vec![ViolationCode::StairsAdjacency]));

    let mut l = Level::new();
    l.set_tile(c(10, 11), TileKind::FirstFloor).unwrap();
    for w in [c(9, 10), c(11, 10), c(10, 9)] {
        l.set_tile(w, TileKind::Wall).unwrap();
    }
    l.set_tile(c(10, 10), TileKind::Stairs).unwrap();
    cases.push(("stairs without ground", l, vec![ViolationCode::StairsNoGroundAccess]));

    let mut failed = Vec::new();
    for (name, level, expected) in &cases {
        let report = level.validate();
        let mut got: Vec<ViolationCode> = report.violations.iter().map(|v| v.code).collect();
        got.dedup();
        if got != *expected || report.playable != expected.is_empty() {
            failed.push(format!("{name}: {got:?}"));
        }
    }
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} fixtures, all four codes triggered", cases.len())
        } else {
            failed.join("; ")
        },
    )
}

fn metrics_oracle_suite() -> Outcome {
    let presets = ClassKind::ALL.map(ClassKind::preset);
    let (mut worst, mut valid, mut sums_bad) = (0.0f64, 0, 0);
    for i in 0..500u64 {
        let level = generate_random_level(seed::derive(4, &[i]), &GeneratorParams::default()).unwrap();
        let pair = ClassPair::from_index((i % 25) as usize);
        let trace = simulate_match(
            &level,
            &presets[pair.class1.index()],
            &presets[pair.class2.index()],
            seed::derive(4, &[i, 1]),
        )
        .unwrap();
        let m = extract_metrics(&trace);
        for (a, b) in flatten(&m).iter().zip(metrics_oracle(&trace)) {
            worst = worst.max((a - b).abs());
        }
        if is_valid_match(&trace) {
            valid += 1;
            let dh: f64 = m.dh.iter().sum();
            let cp: f64 = m.cp.iter().sum();
            if (dh - 1.0).abs() > METRICS_TOL
                || (cp - 1.0).abs() > METRICS_TOL
                || (m.da[4] - m.kill_ratio).abs() > METRICS_TOL
            {
                sums_bad += 1;
            }
        }
    }
    outcome(
        worst <= METRICS_TOL && sums_bad == 0,
        format!("500 traces, max deviation {worst:.1e}; {valid} valid matches, {sums_bad} sum violations"),
    )
}

fn simulator_suite() -> Outcome {
    let started = Instant::now();
    let mut differing = 0;
    for i in 0..50u64 {
        let level = generate_random_level(i, &GeneratorParams::default()).unwrap();
        let (a, b) = (ClassKind::Soldier.preset(), ClassKind::Scout.preset());
        let x = serde_json::to_string(&simulate_match(&level, &a, &b, i).unwrap()).unwrap();
        let y = serde_json::to_string(&simulate_match(&level, &a, &b, i).unwrap()).unwrap();
        differing += usize::from(x != y);
    }
    let doc = load_predefined("mirror_corridors").unwrap();
    let symmetric = doc.level.rotated_half_turn() == doc.level;
    let sniper = ClassKind::Sniper.preset();
    let mean_kr = (0..500u64)
        .map(|s| extract_metrics(&simulate_match(&doc.level, &sniper, &sniper, s).unwrap()).kill_ratio)
        .sum::<f64>()
        / 500.0;
    let secs = started.elapsed().as_secs_f64();
    outcome(
        differing == 0 && symmetric && (MIRROR_KR.0..=MIRROR_KR.1).contains(&mean_kr) && secs < 120.0,
        format!("50 seeds replayed, {differing} differ; mirror fixture Sniper vs Sniper mean KR {mean_kr:.4} over 500 seeds; {secs:.1}s"),
    )
}

fn corpus_and_training() -> Outcome {
    let d = desk();
    let gain = 1.0 - d.kr_mae / d.baseline_mae;

    // Finite-difference check on a tiny network.
    let mut cfg = ModelConfig::with_widths((2, 2, 4, 4, 4), 1);
    cfg.dropout = 0.0;
    let tiny = SurrogateModel::new(cfg, Target::KillRatio).unwrap();
    let inputs: Vec<ModelInput> = d.records[..3].iter().map(|r| encode_record(r).unwrap()).collect();
    let refs: Vec<&ModelInput> = inputs.iter().collect();
    let targets: Vec<Vec<f64>> = d.records[..3].iter().map(|r| vec![r.metrics.kill_ratio]).collect();
    let trefs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let grad_err = tiny.gradient_check(&Batch::with_targets(&refs, &trefs), 1e-5);

    // Memorization of 200 records.
    let subset = &d.records[..200];
    let data = Dataset::from_records(subset, Target::KillRatio).unwrap();
    let mut cfg = ModelConfig::preset(Target::KillRatio);
    cfg.epochs = 60;
    cfg.batch_size = 16;
    let mut model = SurrogateModel::new(cfg, Target::KillRatio).unwrap();
    let all = split_dataset(200, 0.5, 0).unwrap();
    let mut whole = all.train.clone();
    whole.extend(&all.test);
    let split = susketch_core::corpus::DatasetSplit {
        train: whole.clone(),
        test: Vec::new(),
        seed: 0,
    };
    train_model(&mut model, &data, &split, |_| {}).unwrap();
    let memo = evaluate_model(&model, &data, &whole).unwrap().mean_mae;

    outcome(
        d.identical && d.build_secs < 1800.0 && gain >= BASELINE_GAIN && grad_err < GRAD_TOL && memo < MEMORIZE_MAE,
        format!(
            "corpus identical across builds: {} ({:.0}s); held-out KR MAE {:.4} vs mean baseline {:.4} ({:.1}% better); grad rel err {grad_err:.1e}; 200-record train MAE {memo:.4}",
            d.identical,
            d.build_secs,
            d.kr_mae,
            d.baseline_mae,
            100.0 * gain
        ),
    )
}

fn class_suggestion_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut wrong = 0;
    let mut bad_counts = 0;
    for case in 0..100u64 {
        let mut cfg = ModelConfig::with_widths((4, 4, 8, 8, 8), 1);
        cfg.seed = case;
        let mut model = SurrogateModel::new(cfg, Target::KillRatio).unwrap();
        // Centre outputs inside [0, 1] so the clamp rarely creates ties.
        let params = model.params_mut();
        let n = params.len();
        params.into_iter().skip(n - 2).for_each(|p| {
            if p.value.len() == 1 {
                p.value[0] = 0.5;
            } else {
                p.value.iter_mut().for_each(|w| *w *= 0.5);
            }
        });
        let level = generate_random_level(seed::derive(7, &[case]), &GeneratorParams::default()).unwrap();
        let current = ClassPair::from_index(rng.gen_range(0..25));

        let counting = CountingPredictor::new(&model);
        let got = suggest_class_pairs(&counting, &level, current).unwrap();
        bad_counts += usize::from(counting.calls() != 25);

        // Exhaustive enumeration, one prediction at a time.
        let mut best_same: Option<(ClassPair, f64)> = None;
        let mut best_diff: Option<(ClassPair, f64)> = None;
        for a in ClassKind::ALL {
            for b in ClassKind::ALL {
                let pair = ClassPair::new(a, b);
                let f = balance_fitness(model.predict_kr(&level, pair).unwrap());
                let slot = if a == b { &mut best_same } else { &mut best_diff };
                if slot.is_none_or(|(_, g)| f > g) {
                    *slot = Some((pair, f));
                }
            }
        }
        let (same, fs) = best_same.unwrap();
        let (diff, fd) = best_diff.unwrap();
        let ok = got.best_same.pair == same
            && got.best_diff.pair == diff
            && (got.best_same.fitness - fs).abs() < 1e-9
            && (got.best_diff.fitness - fd).abs() < 1e-9;
        wrong += usize::from(!ok);
    }
    outcome(
        wrong == 0 && bad_counts == 0,
        format!("100 cases, {wrong} disagree with enumeration, {bad_counts} calls with a count other than 25"),
    )
}

fn replacement_generator() -> Outcome {
    let levels: Vec<Level> = (0..100u64)
        .map(|i| generate_random_level(seed::derive(8, &[i]), &GeneratorParams::default()).unwrap())
        .collect();
    let mut rng = seed::rng(8);
    let (mut violations, mut eligible, mut empty) = (0, 0, 0);
    for n in 0..10_000 {
        let seed_level = &levels[n % levels.len()];
        let cand = replacement_candidate(seed_level, &mut rng);
        violations += usize::from(!cand.same_architecture(seed_level));
        violations += powerups_per_cell(&cand).iter().filter(|&&k| k > 1).count();
        violations += cand
            .powerups()
            .filter(|(at, _)| at.is_base() || !cand.tile(*at).holds_powerup())
            .count();
        let counts = powerups_per_cell(&cand);
        for (cell, &count) in counts.iter().enumerate() {
            let has_valid =
                susketch_core::level::cell_tiles(cell).any(|t| !t.is_base() && cand.tile(t).holds_powerup());
            if has_valid {
                eligible += 1;
                empty += usize::from(count == 0);
            }
        }
    }
    let rate = empty as f64 / eligible as f64;
    outcome(
        violations == 0 && (rate - EMPTY_CELL_PROBABILITY).abs() <= EMPTY_RATE_TOL,
        format!("10000 candidates, {violations} violations, empty-cell rate {rate:.4}"),
    )
}

fn evolution_strategy() -> Outcome {
    let model = &desk().kr;
    let pair = ClassPair::new(ClassKind::Scout, ClassKind::Heavy);
    let (mut decreasing, mut changed_arch, mut runs) = (0, 0, 0);
    for s in 0..100u64 {
        let level = generate_random_level(seed::derive(9, &[s]), &GeneratorParams::default()).unwrap();
        for method in [SuggestMethod::Adjustment, SuggestMethod::Replacement] {
            let opts = SuggestOptions {
                k: 50,
                seed: s,
                ..Default::default()
            };
            let out = suggest_powerups(model, &level, pair, method, &opts, &|| false).unwrap();
            runs += 1;
            changed_arch += usize::from(!out.level.same_architecture(&level));
            if method == SuggestMethod::Adjustment {
                let mut prev = out.seed_fitness;
                for &f in &out.history {
                    decreasing += usize::from(f < prev);
                    prev = f;
                }
            }
        }
    }
    outcome(
        decreasing == 0 && changed_arch == 0,
        format!("100 seeds: {decreasing} fitness decreases; {changed_arch} of {runs} outputs changed the architecture"),
    )
}

fn sweep_criterion() -> Outcome {
    let started = Instant::now();
    let model = &desk().kr;
    let levels = fixture_levels(20, 0);
    let result = run_sweep(
        model,
        &levels,
        ClassPair::new(ClassKind::Scout, ClassKind::Heavy),
        50,
        0,
    )
    .unwrap();
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let svg = result.to_svg();
    std::fs::write(dir.join("sweep.svg"), &svg).unwrap();
    std::fs::write(dir.join("sweep.csv"), result.to_csv()).unwrap();
    let rep = result.point(SuggestMethod::Replacement, 10).unwrap();
    let adj = result.point(SuggestMethod::Adjustment, 10).unwrap();
    for k in [1, 5, 10, 25, 50] {
        let r = result.point(SuggestMethod::Replacement, k).unwrap();
        let a = result.point(SuggestMethod::Adjustment, k).unwrap();
        info(format!(
            "sweep k={k:>2}: replacement {:.4} [{:.4}, {:.4}], adjustment {:.4} [{:.4}, {:.4}]",
            r.mean, r.ci_low, r.ci_high, a.mean, a.ci_low, a.ci_high
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    let bands = svg.matches("<polygon").count();
    outcome(
        rep.mean > result.seed_mean && adj.mean > result.seed_mean && bands == 2 && secs < 600.0,
        format!(
            "seed mean f {:.4}; k=10 replacement {:.4}, adjustment {:.4}; plot with {bands} bands at {}; {secs:.1}s",
            result.seed_mean,
            rep.mean,
            adj.mean,
            dir.join("sweep.svg").display()
        ),
    )
}

fn serve_in_background(models: ModelSet) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .unwrap();
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            serve_on(AppState::new(models, ServiceConfig::default()), listener)
                .await
                .unwrap();
        });
    });
    rx.recv().unwrap()
}

fn latency() -> Outcome {
    let mut models = ModelSet::default();
    models.insert(desk().kr.clone());
    for t in Target::ALL.into_iter().filter(|t| *t != Target::KillRatio) {
        models.insert(SurrogateModel::new(ModelConfig::preset(t), t).unwrap());
    }
    let base = format!("http://{}", serve_in_background(models));
    let http = reqwest::blocking::Client::new();
    let created: Value = http.post(format!("{base}/session")).send().unwrap().json().unwrap();
    let id = created["id"].as_str().unwrap().to_string();
    let session = format!("{base}/session/{id}");
    http.post(format!("{session}/load-predefined"))
        .json(&json!({ "name": "two_platform" }))
        .send()
        .unwrap();

    let timed = |url: &str| {
        let t = Instant::now();
        let r = http.get(url).send().unwrap();
        assert!(r.status().is_success(), "{url}: {}", r.status());
        r.bytes().unwrap();
        t.elapsed()
    };
    timed(&format!("{session}/predict"));
    let predict_max = (0..20).map(|_| timed(&format!("{session}/predict"))).max().unwrap();
    let rep = timed(&format!("{session}/suggest/powerups?method=replacement&k=10"));
    let adj = timed(&format!("{session}/suggest/powerups?method=adjustment&k=10"));

    // Interleaving: a long suggestion job runs while predictions are requested.
    let long_url = format!("{session}/suggest/powerups?method=adjustment&k=1000");
    let job = thread::spawn(move || {
        let t = Instant::now();
        let status = reqwest::blocking::Client::new().get(long_url).send().unwrap().status();
        (t.elapsed(), Instant::now(), status)
    });
    thread::sleep(Duration::from_millis(50));
    let mut during = Vec::new();
    let mut last_done = Instant::now();
    for _ in 0..10 {
        during.push(timed(&format!("{session}/predict")));
        last_done = Instant::now();
    }
    let (job_time, job_done, status) = job.join().unwrap();
    let during_max = *during.iter().max().unwrap();
    let overlapped = last_done < job_done;

    let mut detail = String::new();
    let _ = write!(
        detail,
        "/predict max {:.1} ms over 20 calls; /suggest k=10 replacement {:.0} ms, adjustment {:.0} ms; \
         during a {:.2}s suggestion job ({status}) /predict max {:.1} ms, finished first: {overlapped}",
        predict_max.as_secs_f64() * 1e3,
        rep.as_secs_f64() * 1e3,
        adj.as_secs_f64() * 1e3,
        job_time.as_secs_f64(),
        during_max.as_secs_f64() * 1e3,
    );
    outcome(
        predict_max < PREDICT_BUDGET
            && rep < SUGGEST_BUDGET
            && adj < SUGGEST_BUDGET
            && during_max < PREDICT_BUDGET
            && overlapped
            && status.is_success(),
        detail,
    )
}

/// Swap check on half-turn symmetric levels: KR(c1, c2) should sit near 1 - KR(c2, c1).
fn mirror_swap_info() {
    let model = &desk().kr;
    let mut levels = vec![load_predefined("mirror_corridors").unwrap().level];
    let mut i = 0u64;
    while levels.len() < 100 {
        let sym =
            half_turn_symmetric(&generate_random_level(seed::derive(10, &[i]), &GeneratorParams::default()).unwrap());
        if sym.is_playable() {
            levels.push(sym);
        }
        i += 1;
    }
    let pair = ClassPair::new(ClassKind::Heavy, ClassKind::Scout);
    let mut within = 0;
    let mut worst = 0.0f64;
    for l in &levels {
        let a = model.predict_kr(l, pair).unwrap();
        let b = model.predict_kr(l, pair.swapped()).unwrap();
        let gap = (a - (1.0 - b)).abs();
        worst = worst.max(gap);
        within += usize::from(gap <= MIRROR_SWAP_TOL);
    }
    info(format!(
        "class swap on {} symmetric levels: {within} within {MIRROR_SWAP_TOL} of 1-KR, worst gap {worst:.3}",
        levels.len()
    ));
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Criterion; 11] = [
        ("fitness-properties", fitness_properties),
        ("pathfinding-oracle", pathfinding_oracle),
        ("playability-suite", playability_suite),
        ("metrics-oracle", metrics_oracle_suite),
        ("simulator", simulator_suite),
        ("corpus-and-training", corpus_and_training),
        ("class-suggestions", class_suggestion_oracle),
        ("replacement-generator", replacement_generator),
        ("evolution-strategy", evolution_strategy),
        ("budget-sweep", sweep_criterion),
        ("latency", latency),
    ];
    let mut failures = 0;
    let mut ran = 0;
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let o = run();
        failures += usize::from(!o.pass);
        println!(
            "{} {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if filter.is_none() {
        mirror_swap_info();
    }
    println!("{} of {ran} criteria passed", ran - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
