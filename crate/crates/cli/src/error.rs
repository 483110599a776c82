use serde::Serialize;
use telerisk::ErrorClass;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    exit_code: i32,
    message: &'a str,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numerical => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.class {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Numerical => "numerical",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorJson {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: &self.message,
        })
        .expect("plain strings serialize")
    }
}

impl<E: Into<telerisk::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        let e = e.into();
        CliError {
            class: e.class(),
            message: e.to_string(),
        }
    }
}
