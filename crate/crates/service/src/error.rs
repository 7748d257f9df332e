use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

use susketch_core::level::{LevelError, ValidationReport};
use susketch_core::maps::MapError;
use susketch_core::suggest::SuggestError;
use susketch_core::surrogate::SurrogateError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown session")]
    UnknownSession,
    #[error("unknown suggestion")]
    UnknownSuggestion,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error("level is not playable")]
    Unplayable(ValidationReport),
    #[error("{0}")]
    ModelNotLoaded(String),
    #[error("superseded by a newer edit or request")]
    Cancelled,
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl From<SurrogateError> for ApiError {
    fn from(e: SurrogateError) -> Self {
        match e {
            SurrogateError::UnplayableLevel(r) => ApiError::Unplayable(r),
            SurrogateError::ModelNotLoaded(_) => ApiError::ModelNotLoaded(e.to_string()),
            SurrogateError::Class(c) => ApiError::BadRequest(c.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<SuggestError> for ApiError {
    fn from(e: SuggestError) -> Self {
        match e {
            SuggestError::UnplayableLevel(r) => ApiError::Unplayable(r),
            SuggestError::Cancelled => ApiError::Cancelled,
            SuggestError::InvalidBudget => ApiError::BadRequest(e.to_string()),
            SuggestError::Surrogate(s) => s.into(),
            SuggestError::RetryBudgetExhausted(_) => ApiError::Internal(e.to_string()),
        }
    }
}

impl ApiError {
    fn code(&self) -> &'static str {
        match self {
            ApiError::UnknownSession => "unknown_session",
            ApiError::UnknownSuggestion => "unknown_suggestion",
            ApiError::Map(MapError::UnknownPredefinedMap(_)) => "unknown_predefined_map",
            ApiError::Map(_) => "malformed_map",
            ApiError::Level(LevelError::Parse { .. }) => "parse_error",
            ApiError::Level(_) => "invalid_edit",
            ApiError::Unplayable(_) => "unplayable",
            ApiError::ModelNotLoaded(_) => "model_not_loaded",
            ApiError::Cancelled => "cancelled",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Internal(_) => "internal",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession | ApiError::UnknownSuggestion => StatusCode::NOT_FOUND,
            ApiError::Map(MapError::UnknownPredefinedMap(_)) => StatusCode::NOT_FOUND,
            ApiError::Map(_) | ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Level(_) | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unplayable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::ModelNotLoaded(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Cancelled => StatusCode::CONFLICT,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        match &self {
            ApiError::Unplayable(report) => body["report"] = json!(report),
            ApiError::Level(LevelError::Parse { line, column, .. }) => {
                body["line"] = json!(line);
                body["column"] = json!(column);
            }
            _ => {}
        }
        (self.status(), Json(body)).into_response()
    }
}
