use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gaia_challenge::ChallengeError;
use gaia_store::StoreError;
use serde_json::json;

/// Error response with body `{"error":{"code","message"}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn no_data(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "no_data", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(m) => ApiError::not_found(m),
            StoreError::InvalidRange(m) => ApiError::bad_request(m),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<ChallengeError> for ApiError {
    fn from(e: ChallengeError) -> Self {
        let message = e.to_string();
        match e {
            ChallengeError::NotFound(_) => ApiError::not_found(message),
            ChallengeError::Gate(_) => ApiError::new(StatusCode::CONFLICT, "gated", message),
            ChallengeError::State(_) => {
                ApiError::new(StatusCode::CONFLICT, "invalid_state", message)
            }
            ChallengeError::Unresolvable(_) => {
                ApiError::new(StatusCode::CONFLICT, "unresolvable", message)
            }
            ChallengeError::Authz(_) => ApiError::new(StatusCode::FORBIDDEN, "forbidden", message),
            ChallengeError::Validation(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", message)
            }
            ChallengeError::Map(_) | ChallengeError::Journal(_) => ApiError::internal(message),
        }
    }
}
