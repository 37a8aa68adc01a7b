use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use rdm_core::model::ValidationReport;
use rdm_core::ErrorCode;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const UNAUTHORIZED: &str = "UNAUTHORIZED";
pub const BAD_REQUEST: &str = "BAD_REQUEST";

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Core(#[from] rdm_core::Error),
    #[error("{0}")]
    BadRequest(String),
    #[error("missing or invalid bearer token")]
    Unauthorized,
}

/// JSON body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
}

/// One HTTP status per domain error code.
pub fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::NotFound | ErrorCode::SchemaNotFound => StatusCode::NOT_FOUND,
        ErrorCode::Cycle => StatusCode::CONFLICT,
        ErrorCode::Validation | ErrorCode::Vocab | ErrorCode::Domain | ErrorCode::Empty => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        ErrorCode::Parse
        | ErrorCode::Truncated
        | ErrorCode::Encoding
        | ErrorCode::BadType
        | ErrorCode::Syntax
        | ErrorCode::Header
        | ErrorCode::Shape => StatusCode::BAD_REQUEST,
        ErrorCode::Busy => StatusCode::SERVICE_UNAVAILABLE,
        ErrorCode::Corrupt | ErrorCode::Io | ErrorCode::Journal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Core(e) => status_for(e.code()),
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
        }
    }

    pub fn body(&self) -> ErrorBody {
        match self {
            ApiError::Core(e) => ErrorBody {
                code: e.code().as_str().to_string(),
                message: e.to_string(),
                report: e.validation_report().cloned(),
            },
            ApiError::BadRequest(m) => ErrorBody {
                code: BAD_REQUEST.into(),
                message: m.clone(),
                report: None,
            },
            ApiError::Unauthorized => ErrorBody {
                code: UNAUTHORIZED.into(),
                message: self.to_string(),
                report: None,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!(code = %self.body().code, error = %self, "request failed");
        }
        (self.status(), Json(self.body())).into_response()
    }
}
