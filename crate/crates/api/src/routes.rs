use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use gaia_challenge::{Answer, ClassActivity, LiveData, Payload, QuestKind, Reduce, Scope};
use gaia_core::{Metric, Reading, Room};
use gaia_store::{AggFn, IngestBatch, Store, Target};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;
use crate::summary::{building_summary, power_status, room_status};
use crate::AppState;

pub const GATEWAY_TOKEN_HEADER: &str = "x-gateway-token";
pub const MAX_SERIES_POINTS: usize = 100_000;
pub const MAX_INGEST_READINGS: usize = 10_000;

type ApiResult<T> = Result<T, ApiError>;
type Params = Query<HashMap<String, String>>;

pub fn api_routes() -> Router<AppState> {
    Router::new()
        .route("/health", get(health))
        .route("/ingest", post(ingest))
        .route("/buildings", get(list_buildings))
        .route("/buildings/{id}/summary", get(summary))
        .route("/buildings/{id}/power/latest", get(power_latest))
        .route("/buildings/{id}/energy/daily", get(energy_daily))
        .route("/rooms/{id}/latest", get(room_latest))
        .route("/rooms/{id}/series", get(room_series))
        .route("/rooms/{id}/aggregate", get(room_aggregate))
        .route("/rooms/{id}/comfort", get(room_comfort))
        .route("/challenge/roster", get(roster))
        .route("/challenge/map", get(quest_map))
        .route("/challenge/quests/{id}/answer", post(answer))
        .route("/challenge/class-activities", post(start_activity))
        .route(
            "/challenge/class-activities/{id}/advance",
            post(advance_activity),
        )
        .route("/challenge/labkit/unlock", post(unlock_labkit))
        .route("/challenge/dashboard", get(dashboard))
        .route("/challenge/snapshots", post(submit_snapshot))
        .route("/challenge/classes/{id}/snapshots", get(class_snapshots))
        .route("/challenge/classes/{id}/activities", get(class_activities))
}

/// JSON body extractor whose rejections use the error envelope.
pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        parse_json(&bytes).map(ApiJson)
    }
}

fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn required<'a>(q: &'a HashMap<String, String>, key: &str) -> ApiResult<&'a str> {
    q.get(key)
        .map(String::as_str)
        .ok_or_else(|| ApiError::bad_request(format!("missing query parameter {key:?}")))
}

fn parse_param<T: FromStr>(q: &HashMap<String, String>, key: &str) -> ApiResult<T>
where
    T::Err: std::fmt::Display,
{
    let raw = required(q, key)?;
    raw.parse()
        .map_err(|e| ApiError::bad_request(format!("query parameter {key}={raw:?}: {e}")))
}

fn blocking_err(e: tokio::task::JoinError) -> ApiError {
    ApiError::internal(format!("worker failed: {e}"))
}

fn room<'a>(store: &'a Store, id: &str) -> ApiResult<&'a Room> {
    store
        .deployment()
        .room(id)
        .ok_or_else(|| ApiError::not_found(format!("room {id:?}")))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn ingest(
    State(app): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let token = headers
        .get(GATEWAY_TOKEN_HEADER)
        .and_then(|v| v.to_str().ok());
    if token != Some(app.config.gateway_token.as_str()) {
        return Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or wrong gateway token",
        ));
    }
    let batch: IngestBatch = parse_json(&body)?;
    if batch.readings.len() > MAX_INGEST_READINGS {
        return Err(ApiError::bad_request(format!(
            "batch has {} readings, limit {MAX_INGEST_READINGS}",
            batch.readings.len()
        )));
    }
    let store = Arc::clone(&app.store);
    let result = tokio::task::spawn_blocking(move || store.ingest(&batch))
        .await
        .map_err(blocking_err)??;
    Ok(Json(serde_json::to_value(result).expect("serializable")))
}

#[derive(Serialize)]
struct BuildingView<'a> {
    id: &'a str,
    name: &'a str,
    rooms: Vec<&'a Room>,
    power_meter: bool,
}

async fn list_buildings(State(app): State<AppState>) -> Json<serde_json::Value> {
    let d = app.store.deployment();
    let list: Vec<BuildingView> = d
        .topology
        .buildings
        .iter()
        .map(|b| BuildingView {
            id: &b.id,
            name: &b.name,
            rooms: d.rooms_in_building(&b.id),
            power_meter: !d.power_meters(&b.id).is_empty(),
        })
        .collect();
    Json(serde_json::to_value(list).expect("serializable"))
}

async fn summary(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = building_summary(&app.store, &app.config.dials, &id, (app.clock)())?;
    Ok(Json(s).into_response())
}

async fn power_latest(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let d = app.store.deployment();
    if d.building(&id).is_none() {
        return Err(ApiError::not_found(format!("building {id:?}")));
    }
    if d.power_meters(&id).is_empty() {
        return Err(ApiError::not_found(format!(
            "building {id:?} has no power meter"
        )));
    }
    let p = power_status(&app.store, &app.config.dials, &id)?
        .ok_or_else(|| ApiError::no_data(format!("no power readings for building {id:?}")))?;
    let mut body = serde_json::to_value(p).expect("serializable");
    body["building_id"] = json!(id);
    Ok(Json(body).into_response())
}

async fn energy_daily(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Params,
) -> ApiResult<Response> {
    let date: NaiveDate = parse_param(&q, "date")?;
    let e = app.store.daily_energy(&id, date)?.ok_or_else(|| {
        ApiError::no_data(format!("no power readings for building {id:?} on {date}"))
    })?;
    let mut body = serde_json::to_value(e).expect("serializable");
    body["building_id"] = json!(id);
    body["date"] = json!(date.to_string());
    body["timezone"] = json!(app.store.config().timezone.name());
    Ok(Json(body).into_response())
}

async fn room_latest(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Params,
) -> ApiResult<Json<Reading>> {
    room(&app.store, &id)?;
    let metric: Metric = parse_param(&q, "metric")?;
    app.store
        .latest(&Target::Room(id.clone()), metric)?
        .map(Json)
        .ok_or_else(|| ApiError::no_data(format!("no {metric} readings for room {id:?}")))
}

#[derive(Serialize)]
struct SeriesPoint {
    ts: u32,
    value: f64,
    node_id: u16,
    seq: u32,
}

async fn room_series(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Params,
) -> ApiResult<Response> {
    room(&app.store, &id)?;
    let metric: Metric = parse_param(&q, "metric")?;
    let from: i64 = parse_param(&q, "from")?;
    let to: i64 = parse_param(&q, "to")?;
    let series = app
        .store
        .series(&Target::Room(id.clone()), metric, from, to)?;
    if series.len() > MAX_SERIES_POINTS {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "too_many_points",
            format!(
                "{} points exceed the limit of {MAX_SERIES_POINTS}; narrow the range",
                series.len()
            ),
        ));
    }
    let points: Vec<SeriesPoint> = series
        .iter()
        .map(|r| SeriesPoint {
            ts: r.ts,
            value: r.value,
            node_id: r.node_id,
            seq: r.seq,
        })
        .collect();
    Ok(
        Json(json!({ "room_id": id, "metric": metric, "from": from, "to": to, "points": points }))
            .into_response(),
    )
}

async fn room_aggregate(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Params,
) -> ApiResult<Response> {
    room(&app.store, &id)?;
    let metric: Metric = parse_param(&q, "metric")?;
    let from: i64 = parse_param(&q, "from")?;
    let to: i64 = parse_param(&q, "to")?;
    let window: u32 = parse_param(&q, "window")?;
    let func: AggFn = if q.contains_key("fn") {
        parse_param(&q, "fn")?
    } else {
        AggFn::Avg
    };
    let points = app
        .store
        .aggregate(&Target::Room(id.clone()), metric, from, to, window, func)?;
    Ok(Json(json!({
        "room_id": id, "metric": metric, "from": from, "to": to,
        "window": window, "fn": func.to_string(), "points": points,
    }))
    .into_response())
}

async fn room_comfort(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let r = room(&app.store, &id)?;
    let status = room_status(&app.store, &app.config.dials, r)?;
    if status.no_data {
        return Err(ApiError::no_data(format!("no readings for room {id:?}")));
    }
    Ok(Json(status).into_response())
}

/// Live sensor view for grading live-data quests.
pub struct StoreLive<'a>(pub &'a Store);

impl LiveData for StoreLive<'_> {
    fn room_ids(&self, building_id: &str) -> Option<Vec<String>> {
        let d = self.0.deployment();
        d.building(building_id)?;
        Some(
            d.rooms_in_building(building_id)
                .into_iter()
                .map(|r| r.id.clone())
                .collect(),
        )
    }

    fn latest(&self, room_id: &str, metric: Metric) -> Option<f64> {
        self.0
            .latest(&Target::Room(room_id.to_string()), metric)
            .ok()
            .flatten()
            .map(|r| r.value)
    }
}

async fn roster(State(app): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::to_value(app.engine.roster().file()).expect("serializable"))
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum QuestState {
    Locked,
    Available,
    Answered,
}

#[derive(Serialize)]
struct LiveView<'a> {
    target: &'a str,
    metric: Metric,
    reduce: Reduce,
}

#[derive(Serialize)]
struct QuestView<'a> {
    id: &'a str,
    title: &'a str,
    area: u8,
    points: u32,
    kind: QuestKind,
    prerequisites: &'a BTreeSet<String>,
    state: QuestState,
    question: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    choices: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    live: Option<LiveView<'a>>,
}

async fn quest_map(State(app): State<AppState>, Query(q): Params) -> ApiResult<Response> {
    let student = required(&q, "student")?;
    let engine = &app.engine;
    let visible = engine.visible_quests(student)?;
    let answered = engine.answered_quests(student)?;
    let visible_set: BTreeSet<&str> = visible.iter().map(String::as_str).collect();
    let (school, class) = engine
        .roster()
        .class_of(student)
        .expect("student checked above");
    let quests: Vec<QuestView> = engine
        .map()
        .topological()
        .map(|quest| {
            let state = if answered.contains(&quest.id) {
                QuestState::Answered
            } else if visible_set.contains(quest.id.as_str()) {
                QuestState::Available
            } else {
                QuestState::Locked
            };
            let (question, choices, live) = match &quest.payload {
                Payload::Quiz {
                    question, choices, ..
                } => (question.as_str(), Some(choices.as_slice()), None),
                Payload::LiveData {
                    question,
                    target,
                    metric,
                    reduce,
                } => (
                    question.as_str(),
                    None,
                    Some(LiveView {
                        target,
                        metric: *metric,
                        reduce: *reduce,
                    }),
                ),
            };
            QuestView {
                id: &quest.id,
                title: &quest.title,
                area: quest.area,
                points: quest.points,
                kind: quest.kind,
                prerequisites: &quest.prerequisites,
                state,
                question,
                choices,
                live,
            }
        })
        .collect();
    Ok(Json(json!({
        "student_id": student,
        "class_id": class.id,
        "school_id": school.id,
        "points": engine.student_points(student)?,
        "visible": visible,
        "finish": engine.map().finish(),
        "sequences": engine.map().sequences(),
        "bonus_area": engine.map().bonus_area(),
        "labkit_area": engine.map().labkit_area(),
        "bonus_open": !engine.activities_of(&class.id).is_empty(),
        "labkit_unlocked": engine.labkit_unlocked(&class.id),
        "quests": quests,
    }))
    .into_response())
}

#[derive(Deserialize)]
struct AnswerBody {
    student_id: String,
    answer: Answer,
}

async fn answer(
    State(app): State<AppState>,
    Path(quest_id): Path<String>,
    ApiJson(body): ApiJson<AnswerBody>,
) -> ApiResult<Response> {
    let now = (app.clock)();
    let out = tokio::task::spawn_blocking(move || {
        app.engine.answer_quest(
            &body.student_id,
            &quest_id,
            &body.answer,
            now,
            &StoreLive(&app.store),
        )
    })
    .await
    .map_err(blocking_err)??;
    Ok(Json(out).into_response())
}

#[derive(Deserialize)]
struct StartActivityBody {
    teacher_id: String,
    class_id: String,
    #[serde(default)]
    topic: String,
}

async fn start_activity(
    State(app): State<AppState>,
    ApiJson(body): ApiJson<StartActivityBody>,
) -> ApiResult<(StatusCode, Json<ClassActivity>)> {
    let now = (app.clock)();
    let act = tokio::task::spawn_blocking(move || {
        app.engine
            .start_class_activity(&body.teacher_id, &body.class_id, &body.topic, now)
    })
    .await
    .map_err(blocking_err)??;
    Ok((StatusCode::CREATED, Json(act)))
}

#[derive(Deserialize)]
struct TeacherBody {
    teacher_id: String,
}

async fn advance_activity(
    State(app): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<TeacherBody>,
) -> ApiResult<Json<ClassActivity>> {
    let now = (app.clock)();
    let act = tokio::task::spawn_blocking(move || {
        app.engine
            .advance_class_activity(&id, &body.teacher_id, now)
    })
    .await
    .map_err(blocking_err)??;
    Ok(Json(act))
}

#[derive(Deserialize)]
struct UnlockBody {
    teacher_id: String,
    class_id: String,
}

async fn unlock_labkit(
    State(app): State<AppState>,
    ApiJson(body): ApiJson<UnlockBody>,
) -> ApiResult<Response> {
    let now = (app.clock)();
    let class_id = body.class_id.clone();
    tokio::task::spawn_blocking(move || {
        app.engine
            .unlock_labkit_quests(&body.teacher_id, &body.class_id, now)
    })
    .await
    .map_err(blocking_err)??;
    Ok(Json(json!({ "class_id": class_id, "labkit_unlocked": true })).into_response())
}

async fn dashboard(State(app): State<AppState>, Query(q): Params) -> ApiResult<Response> {
    let scope = match q.get("scope").map(String::as_str).unwrap_or("global") {
        "global" => Scope::Global,
        "school" => Scope::School(required(&q, "school_id")?.to_string()),
        other => {
            return Err(ApiError::bad_request(format!(
                "scope {other:?}: expected global or school"
            )))
        }
    };
    let classes = app.engine.dashboard(&scope)?;
    let scope_name = match &scope {
        Scope::Global => json!("global"),
        Scope::School(id) => json!({ "school": id }),
    };
    Ok(Json(json!({ "scope": scope_name, "classes": classes })).into_response())
}

#[derive(Deserialize)]
struct SnapshotBody {
    student_id: String,
    text: String,
    #[serde(default)]
    room_id: Option<String>,
}

async fn submit_snapshot(
    State(app): State<AppState>,
    ApiJson(body): ApiJson<SnapshotBody>,
) -> ApiResult<Response> {
    if let Some(r) = &body.room_id {
        room(&app.store, r)?;
    }
    let now = (app.clock)();
    let snap = tokio::task::spawn_blocking(move || {
        app.engine
            .submit_snapshot(&body.student_id, &body.text, body.room_id.as_deref(), now)
    })
    .await
    .map_err(blocking_err)??;
    Ok((StatusCode::CREATED, Json(snap)).into_response())
}

async fn class_snapshots(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Params,
) -> ApiResult<Response> {
    let limit: usize = if q.contains_key("limit") {
        parse_param(&q, "limit")?
    } else {
        gaia_challenge::DASHBOARD_SNAPSHOTS
    };
    let snaps = app.engine.snapshots_of(&id, limit)?;
    Ok(Json(snaps).into_response())
}

async fn class_activities(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    if app.engine.roster().class(&id).is_none() {
        return Err(ApiError::not_found(format!("class {id:?}")));
    }
    Ok(Json(app.engine.activities_of(&id)).into_response())
}
