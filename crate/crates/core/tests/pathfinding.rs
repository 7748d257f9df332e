//! Movement graph checked against a BFS written over the raw grid rows.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use susketch_core::corpus::{generate_random_level, GeneratorParams};
use susketch_core::level::{ViolationCode, SIZE, UNREACHABLE};
use susketch_core::{Coord, Level, TileKind, BASE1, BASE2};

/// Legal (from, to) symbol pairs between 4-adjacent tiles.
const EDGES: [&str; 7] = ["GG", "FF", "SF", "FS", "SG", "GS", "FG"];

fn grid(level: &Level) -> Vec<Vec<char>> {
    level.grid_rows().iter().map(|r| r.chars().collect()).collect()
}

fn step_ok(g: &[Vec<char>], a: (usize, usize), b: (usize, usize)) -> bool {
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
        let around = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
        for (nr, nc) in around {
            if nr < SIZE && nc < SIZE && dist[nr][nc].is_none() && step_ok(g, (r, c), (nr, nc)) {
                dist[nr][nc] = Some(d + 1);
                q.push_back((nr, nc));
            }
        }
    }
    dist
}

/// Uniform tile soup: most of these levels are disconnected.
fn soup(rng: &mut ChaCha8Rng) -> Level {
    let mut level = Level::new();
    let weights = [
        rng.gen_range(0.2..0.8),
        rng.gen_range(0.0..0.4),
        rng.gen_range(0.0..0.4),
    ];
    for i in 0..SIZE * SIZE {
        let at = Coord::from_index(i);
        if at.is_base() {
            continue;
        }
        let x: f64 = rng.gen();
        let kind = if x < weights[1] {
            TileKind::FirstFloor
        } else if x < weights[1] + weights[2] {
            TileKind::Wall
        } else if x < weights[1] + weights[2] + 0.05 {
            TileKind::Stairs
        } else {
            TileKind::Ground
        };
        level.set_tile(at, kind).unwrap();
    }
    level
}

fn levels() -> Vec<Level> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out: Vec<Level> = (0..500).map(|_| soup(&mut rng)).collect();
    for s in 0..500u64 {
        let params = GeneratorParams {
            wall_density: (s % 6) as f64 * 0.05,
            platform_count: (s % 5) as usize,
            powerup_count: 4,
        };
        out.push(generate_random_level(s, &params).unwrap());
    }
    out
}

#[test]
fn distances_match_oracle_on_1000_levels() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (n, level) in levels().iter().enumerate() {
        let g = grid(level);
        let mut starts = vec![BASE1, BASE2];
        starts.extend((0..3).map(|_| Coord::new(rng.gen_range(0..SIZE), rng.gen_range(0..SIZE))));
        for start in starts {
            let ours = level.distances_from(start);
            let oracle = oracle_bfs(&g, (start.row, start.col));
            for (i, &got) in ours.iter().enumerate() {
                let at = Coord::from_index(i);
                let expected = oracle[at.row][at.col].map_or(UNREACHABLE, |d| d as u16);
                assert_eq!(got, expected, "level {n}, from {start:?} to {at:?}");
            }
        }
    }
}

#[test]
fn shortest_paths_are_legal_and_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, level) in levels().iter().enumerate() {
        let g = grid(level);
        for _ in 0..4 {
            let a = Coord::new(rng.gen_range(0..SIZE), rng.gen_range(0..SIZE));
            let b = Coord::new(rng.gen_range(0..SIZE), rng.gen_range(0..SIZE));
            let res = level.shortest_path(a, b);
            if g[a.row][a.col] == 'W' || g[b.row][b.col] == 'W' {
                assert!(res.is_err());
                continue;
            }
            let res = res.unwrap();
            let oracle = oracle_bfs(&g, (a.row, a.col))[b.row][b.col];
            assert_eq!(res.reachable, oracle.is_some(), "level {n}");
            if let Some(d) = oracle {
                assert_eq!(res.length, d);
                assert_eq!(res.path.len(), d + 1);
                assert_eq!((res.path[0], *res.path.last().unwrap()), (a, b));
                for w in res.path.windows(2) {
                    assert!(step_ok(&g, (w[0].row, w[0].col), (w[1].row, w[1].col)), "level {n}");
                }
            }
        }
    }
}

#[test]
fn base_reachability_matches_oracle() {
    let mut connected = 0;
    for level in levels() {
        let g = grid(&level);
        let one_way = |from: Coord, to: Coord| oracle_bfs(&g, (from.row, from.col))[to.row][to.col].is_some();
        let ok = one_way(BASE1, BASE2) && one_way(BASE2, BASE1);
        connected += usize::from(ok);
        assert_eq!(!level.validate().has(ViolationCode::BaseUnreachable), ok);
    }
    // Both branches of the check get exercised.
    assert!(connected > 500 && connected < 1000, "{connected}");
}

#[test]
fn platform_drop_is_one_way() {
    let mut level = Level::new();
    level.set_tile(Coord::new(5, 5), TileKind::FirstFloor).unwrap();
    let d = level.shortest_path(Coord::new(5, 5), Coord::new(5, 6)).unwrap();
    assert_eq!(d.length, 1);
    assert!(
        !level
            .shortest_path(Coord::new(5, 6), Coord::new(5, 5))
            .unwrap()
            .reachable
    );
}
