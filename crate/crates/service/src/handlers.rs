use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

use susketch_core::classes::{preset_classes, CharacterClass};
use susketch_core::level::{DistanceTarget, BASE1, BASE2};
use susketch_core::maps::{load_predefined as load_map, predefined_names};
use susketch_core::suggest::{self, ClassSuggestion, PowerupDeltas, SuggestMethod, SuggestOptions, DEFAULT_K};
use susketch_core::surrogate::{self, Target};
use susketch_core::{ClassPair, Coord, Level, LevelDocument, PowerupKind, TileKind};

use crate::error::ApiError;
use crate::session::{EventKind, Session, SessionState, StoredSuggestion, SCHEMA_VERSION};
use crate::AppState;

type App = State<Arc<AppState>>;

/// Largest accepted suggestion budget.
const MAX_K: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPayload {
    pub schema: u32,
    /// The level in the line-oriented level file format.
    pub document: String,
    pub classes: ClassPair,
    pub playable: bool,
}

impl LevelPayload {
    fn of(doc: &LevelDocument) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            document: doc.serialize(),
            classes: doc.classes,
            playable: doc.level.is_playable(),
        }
    }
}

#[derive(Debug, Default, Deserialize, Serialize)]
pub struct CreateSession {
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct PutLevel {
    pub document: String,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct TileEdit {
    pub row: usize,
    pub col: usize,
    pub kind: TileKind,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct PowerupEdit {
    pub row: usize,
    pub col: usize,
    /// `None` erases.
    pub kind: Option<PowerupKind>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct AreaEdit {
    pub from: Coord,
    pub to: Coord,
    pub kind: TileKind,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct ClassesBody {
    pub class1: susketch_core::ClassKind,
    pub class2: susketch_core::ClassKind,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct MapName {
    pub name: String,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct SuggestionRef {
    pub id: Uuid,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct LogBody {
    pub kind: EventKind,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Deserialize)]
pub struct PowerupQuery {
    pub method: Option<String>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSuggestionPayload {
    pub schema: u32,
    pub id: Uuid,
    pub document: String,
    pub method: SuggestMethod,
    pub predicted_kr: f64,
    pub fitness: f64,
    pub seed_fitness: f64,
    pub improvement_pct: f64,
    pub powerup_deltas: PowerupDeltas,
}

#[derive(Serialize)]
struct ClassSuggestionPayload {
    id: Uuid,
    #[serde(flatten)]
    suggestion: ClassSuggestion,
}

fn snapshot(session: &Session) -> (Level, ClassPair) {
    let state = session.state.lock();
    (state.doc.level.clone(), state.doc.classes)
}

fn presets(pair: ClassPair) -> (CharacterClass, CharacterClass) {
    (pair.class1.preset(), pair.class2.preset())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))
}

/// Applies a level edit under the session lock and logs it once on success.
fn edit(
    session: &Session,
    kind: EventKind,
    payload: Value,
    f: impl FnOnce(&mut SessionState) -> Result<(), ApiError>,
) -> Result<Json<LevelPayload>, ApiError> {
    let mut state = session.state.lock();
    f(&mut state)?;
    session.mark_edited(&mut state);
    session.log(&mut state, kind, payload);
    Ok(Json(LevelPayload::of(&state.doc)))
}

pub async fn list_maps() -> Json<Vec<&'static str>> {
    Json(predefined_names().collect())
}

pub async fn list_classes() -> Json<Vec<CharacterClass>> {
    Json(preset_classes().to_vec())
}

pub async fn create_session(State(app): App, body: Option<Json<CreateSession>>) -> impl IntoResponse {
    let seed = body.and_then(|b| b.0.seed).unwrap_or_else(rand_seed);
    let doc = LevelDocument {
        level: Level::new(),
        classes: ClassPair::default(),
    };
    let session = app.insert(Session::new(Uuid::new_v4(), seed, doc));
    let level = LevelPayload::of(&session.state.lock().doc);
    (
        StatusCode::CREATED,
        Json(json!({ "id": session.id, "seed": seed, "level": level })),
    )
}

fn rand_seed() -> u64 {
    Uuid::new_v4().as_u64_pair().0
}

pub async fn get_level(State(app): App, Path(id): Path<Uuid>) -> Result<Json<LevelPayload>, ApiError> {
    let session = app.session(id)?;
    let state = session.state.lock();
    Ok(Json(LevelPayload::of(&state.doc)))
}

pub async fn put_level(
    State(app): App,
    Path(id): Path<Uuid>,
    Json(body): Json<PutLevel>,
) -> Result<Json<LevelPayload>, ApiError> {
    let session = app.session(id)?;
    let doc = LevelDocument::parse(&body.document)?;
    edit(&session, EventKind::Load, json!({ "source": "upload" }), |s| {
        s.doc = doc;
        Ok(())
    })
}

pub async fn get_classes(State(app): App, Path(id): Path<Uuid>) -> Result<Json<ClassPair>, ApiError> {
    Ok(Json(snapshot(&*app.session(id)?).1))
}

pub async fn put_classes(
    State(app): App,
    Path(id): Path<Uuid>,
    Json(body): Json<ClassesBody>,
) -> Result<Json<LevelPayload>, ApiError> {
    let session = app.session(id)?;
    let pair = ClassPair::new(body.class1, body.class2);
    edit(
        &session,
        EventKind::Edit,
        json!({ "op": "classes", "classes": pair }),
        |s| {
            s.doc.classes = pair;
            Ok(())
        },
    )
}

pub async fn post_tile(
    State(app): App,
    Path(id): Path<Uuid>,
    Json(body): Json<TileEdit>,
) -> Result<Json<LevelPayload>, ApiError> {
    let session = app.session(id)?;
    let payload = json!({ "op": "tile", "row": body.row, "col": body.col, "kind": body.kind });
    edit(&session, EventKind::Edit, payload, |s| {
        Ok(s.doc.level.set_tile(Coord::new(body.row, body.col), body.kind)?)
    })
}

pub async fn post_powerup(
    State(app): App,
    Path(id): Path<Uuid>,
    Json(body): Json<PowerupEdit>,
) -> Result<Json<LevelPayload>, ApiError> {
    let session = app.session(id)?;
    let at = Coord::new(body.row, body.col);
    let payload = json!({ "op": "powerup", "row": body.row, "col": body.col, "kind": body.kind });
    edit(&session, EventKind::Edit, payload, |s| {
        match body.kind {
            Some(kind) => s.doc.level.set_powerup(at, kind)?,
            None => s.doc.level.erase_powerup(at)?,
        }
        Ok(())
    })
}

pub async fn post_area(
    State(app): App,
    Path(id): Path<Uuid>,
    Json(body): Json<AreaEdit>,
) -> Result<Json<LevelPayload>, ApiError> {
    let session = app.session(id)?;
    let payload = json!({ "op": "area", "from": body.from, "to": body.to, "kind": body.kind });
    edit(&session, EventKind::Edit, payload, |s| {
        Ok(s.doc.level.paint_area(body.from, body.to, body.kind)?)
    })
}

pub async fn validate(State(app): App, Path(id): Path<Uuid>) -> Result<impl IntoResponse, ApiError> {
    let (level, _) = snapshot(&*app.session(id)?);
    Ok(Json(level.validate()))
}

pub async fn metrics(State(app): App, Path(id): Path<Uuid>) -> Result<impl IntoResponse, ApiError> {
    let (level, _) = snapshot(&*app.session(id)?);
    let targets = [
        ("Health", DistanceTarget::Powerup(PowerupKind::Health)),
        ("Armor", DistanceTarget::Powerup(PowerupKind::Armor)),
        ("Damage", DistanceTarget::Powerup(PowerupKind::Damage)),
        ("Stairs", DistanceTarget::Stairs),
        ("OpponentBase", DistanceTarget::OpponentBase),
    ];
    let mut distances = Vec::new();
    for (player, base) in [(1, BASE1), (2, BASE2)] {
        for (name, target) in targets {
            let entry = match level.avg_distance_to_type(base, target) {
                Ok(d) => json!({
                    "player": player,
                    "target": name,
                    "mean": d.mean,
                    "reachable": d.reachable_count,
                    "nearest": d.nearest.length,
                }),
                Err(_) => json!({ "player": player, "target": name, "mean": null }),
            };
            distances.push(entry);
        }
    }
    Ok(Json(json!({
        "schema": SCHEMA_VERSION,
        "tile_counts": level.tile_counts(),
        "distances": distances,
    })))
}

pub async fn predict(State(app): App, Path(id): Path<Uuid>) -> Result<impl IntoResponse, ApiError> {
    let session = app.session(id)?;
    let (level, pair) = snapshot(&session);
    let models = app.models.clone();
    let prediction = blocking(move || {
        let (a, b) = presets(pair);
        surrogate::predict(&models, &level, &a, &b)
    })
    .await??;
    let mut state = session.state.lock();
    session.log(
        &mut state,
        EventKind::PredictionShown,
        json!({ "kr": prediction.kr, "duration_s": prediction.duration_s }),
    );
    Ok(Json(json!({
        "schema": SCHEMA_VERSION,
        "classes": pair,
        "prediction": prediction,
    })))
}

pub async fn suggest_classes(State(app): App, Path(id): Path<Uuid>) -> Result<impl IntoResponse, ApiError> {
    let session = app.session(id)?;
    let (level, pair) = snapshot(&session);
    let edits = session.edit_version();
    let models = app.models.clone();
    let result = blocking(move || {
        let model = models.require(Target::KillRatio)?;
        suggest::suggest_class_pairs(model, &level, pair).map_err(ApiError::from)
    })
    .await??;
    let mut state = session.state.lock();
    if session.edit_version() != edits {
        return Err(ApiError::Cancelled);
    }
    let (same_id, diff_id) = (Uuid::new_v4(), Uuid::new_v4());
    state
        .suggestions
        .insert(same_id, StoredSuggestion::Classes(result.best_same.pair));
    state
        .suggestions
        .insert(diff_id, StoredSuggestion::Classes(result.best_diff.pair));
    session.log(
        &mut state,
        EventKind::SuggestionShown,
        json!({ "type": "classes", "same": result.best_same.pair, "different": result.best_diff.pair }),
    );
    Ok(Json(json!({
        "schema": SCHEMA_VERSION,
        "current_kr": result.current_kr,
        "current_fitness": result.current_fitness,
        "best_same": ClassSuggestionPayload { id: same_id, suggestion: result.best_same },
        "best_diff": ClassSuggestionPayload { id: diff_id, suggestion: result.best_diff },
    })))
}

pub async fn suggest_powerups(
    State(app): App,
    Path(id): Path<Uuid>,
    Query(q): Query<PowerupQuery>,
) -> Result<Json<LevelSuggestionPayload>, ApiError> {
    let session = app.session(id)?;
    let method: SuggestMethod = q
        .method
        .as_deref()
        .unwrap_or("replacement")
        .parse()
        .map_err(ApiError::BadRequest)?;
    let k = q.k.unwrap_or(DEFAULT_K);
    if !(1..=MAX_K).contains(&k) {
        return Err(ApiError::BadRequest(format!("k must lie in 1..={MAX_K}")));
    }
    let (level, pair, request) = {
        let mut state = session.state.lock();
        state.requests += 1;
        (state.doc.level.clone(), state.doc.classes, state.requests)
    };
    let seed = q
        .seed
        .unwrap_or_else(|| susketch_core::seed::derive(session.seed, &[request]));
    let edits = session.edit_version();
    let job = session.start_job();
    let models = app.models.clone();
    let worker = session.clone();
    let result = blocking(move || {
        let model = models.require(Target::KillRatio)?;
        let opts = SuggestOptions {
            k,
            seed,
            ..Default::default()
        };
        let cancelled = || worker.edit_version() != edits || worker.job_version() != job;
        suggest::suggest_powerups(model, &level, pair, method, &opts, &cancelled).map_err(ApiError::from)
    })
    .await??;

    let mut state = session.state.lock();
    if session.edit_version() != edits || session.job_version() != job {
        return Err(ApiError::Cancelled);
    }
    let sid = Uuid::new_v4();
    let document = LevelDocument {
        level: result.level.clone(),
        classes: pair,
    }
    .serialize();
    state
        .suggestions
        .insert(sid, StoredSuggestion::Level(Box::new(result.level)));
    session.log(
        &mut state,
        EventKind::SuggestionShown,
        json!({ "type": "powerups", "method": method, "k": k, "fitness": result.fitness }),
    );
    Ok(Json(LevelSuggestionPayload {
        schema: SCHEMA_VERSION,
        id: sid,
        document,
        method,
        predicted_kr: result.predicted_kr,
        fitness: result.fitness,
        seed_fitness: result.seed_fitness,
        improvement_pct: result.improvement_pct,
        powerup_deltas: result.powerup_deltas,
    }))
}

pub async fn apply_suggestion(
    State(app): App,
    Path(id): Path<Uuid>,
    Json(body): Json<SuggestionRef>,
) -> Result<Json<LevelPayload>, ApiError> {
    let session = app.session(id)?;
    let mut state = session.state.lock();
    let stored = state.suggestions.remove(&body.id).ok_or(ApiError::UnknownSuggestion)?;
    let kind = match stored {
        StoredSuggestion::Classes(pair) => {
            state.doc.classes = pair;
            "classes"
        }
        StoredSuggestion::Level(level) => {
            state.doc.level = *level;
            "powerups"
        }
    };
    session.mark_edited(&mut state);
    session.log(
        &mut state,
        EventKind::SuggestionApplied,
        json!({ "id": body.id, "type": kind }),
    );
    Ok(Json(LevelPayload::of(&state.doc)))
}

pub async fn load_predefined(
    State(app): App,
    Path(id): Path<Uuid>,
    Json(body): Json<MapName>,
) -> Result<Json<LevelPayload>, ApiError> {
    let session = app.session(id)?;
    let doc = load_map(&body.name)?;
    edit(
        &session,
        EventKind::Load,
        json!({ "source": "predefined", "name": body.name }),
        |s| {
            s.doc = doc;
            Ok(())
        },
    )
}

pub async fn save(State(app): App, Path(id): Path<Uuid>) -> Result<impl IntoResponse, ApiError> {
    let session = app.session(id)?;
    let mut state = session.state.lock();
    let text = state.doc.serialize();
    session.log(&mut state, EventKind::Save, json!({ "bytes": text.len() }));
    Ok((
        [
            (header::CONTENT_TYPE, "text/plain; charset=utf-8"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"level.txt\""),
        ],
        text,
    ))
}

pub async fn export_log(State(app): App, Path(id): Path<Uuid>) -> Result<impl IntoResponse, ApiError> {
    let session = app.session(id)?;
    let state = session.state.lock();
    let mut out = String::new();
    for event in &state.log {
        out.push_str(&serde_json::to_string(event).map_err(|e| ApiError::Internal(e.to_string()))?);
        out.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out))
}

pub async fn post_log(
    State(app): App,
    Path(id): Path<Uuid>,
    Json(body): Json<LogBody>,
) -> Result<StatusCode, ApiError> {
    let session = app.session(id)?;
    let mut state = session.state.lock();
    session.log(&mut state, body.kind, body.payload);
    Ok(StatusCode::NO_CONTENT)
}
