//! Error categories and their exit codes.

use rqc_core::analysis::AnalysisError;
use rqc_core::circuit::CircuitError;
use rqc_core::engine::EngineError;
use rqc_core::network::NetworkError;
use rqc_core::order::OrderError;
use rqc_core::tensor::TensorError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags or flag values.
    Usage,
    /// A file that does not parse or does not match the circuit.
    Format,
    /// A guard against memory, rank or size limits tripped.
    Resource,
    Io,
    Internal,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 2,
            Kind::Format => 3,
            Kind::Resource => 4,
            Kind::Io | Kind::Internal => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Format => "format",
            Kind::Resource => "resource",
            Kind::Io => "io",
            Kind::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Kind::Usage, message)
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self::new(Kind::Format, message)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind.name(),
            "message": self.message,
            "exit_code": self.kind.exit_code(),
        })
        .to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(Kind::Io, e.to_string())
    }
}

fn kind_of_circuit(e: &CircuitError) -> Kind {
    match e {
        CircuitError::UnknownTopology(_) | CircuitError::NoCycles | CircuitError::EmptyTopology => {
            Kind::Usage
        }
        _ => Kind::Format,
    }
}

fn kind_of_tensor(e: &TensorError) -> Kind {
    match e {
        TensorError::RankTooLarge { .. } => Kind::Resource,
        TensorError::Dump(_) => Kind::Format,
        _ => Kind::Internal,
    }
}

fn kind_of_network(e: &NetworkError) -> Kind {
    match e {
        NetworkError::BitstringLength { .. }
        | NetworkError::BadBit(_)
        | NetworkError::BadOpenQubit(_) => Kind::Usage,
        NetworkError::Parse { .. } => Kind::Format,
        NetworkError::Tensor(t) => kind_of_tensor(t),
        _ => Kind::Internal,
    }
}

fn kind_of_order(e: &OrderError) -> Kind {
    match e {
        OrderError::BoundTooSmall { .. }
        | OrderError::TooManyNodes { .. }
        | OrderError::EmptyNetwork => Kind::Usage,
        OrderError::Parse { .. } | OrderError::InvalidTree(_) | OrderError::BadSliceLabel(_) => {
            Kind::Format
        }
        OrderError::Network(n) => kind_of_network(n),
    }
}

fn kind_of_engine(e: &EngineError) -> Kind {
    match e {
        EngineError::OutOfMemory { .. }
        | EngineError::TooManySlices(_)
        | EngineError::OpenCapExceeded { .. } => Kind::Resource,
        EngineError::SliceOutOfRange { .. } => Kind::Usage,
        EngineError::BadBitstring(_) | EngineError::Record { .. } | EngineError::Checkpoint(_) => {
            Kind::Format
        }
        EngineError::Io(_) => Kind::Io,
        EngineError::Tensor(t) => kind_of_tensor(t),
        EngineError::Network(n) => kind_of_network(n),
        EngineError::Order(o) => kind_of_order(o),
    }
}

fn kind_of_analysis(e: &AnalysisError) -> Kind {
    match e {
        AnalysisError::TooManyQubits { .. } | AnalysisError::AcceptanceOverflow { .. } => {
            Kind::Resource
        }
        AnalysisError::EmptySamples
        | AnalysisError::BadCeiling(_)
        | AnalysisError::BadFidelity(_) => Kind::Usage,
        AnalysisError::Bitstrings { .. } => Kind::Format,
        AnalysisError::Engine(e) => kind_of_engine(e),
    }
}

macro_rules! classify {
    ($($ty:ty => $f:ident),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                Self::new($f(&e), e.to_string())
            }
        })*
    };
}

classify! {
    CircuitError => kind_of_circuit,
    TensorError => kind_of_tensor,
    NetworkError => kind_of_network,
    OrderError => kind_of_order,
    EngineError => kind_of_engine,
    AnalysisError => kind_of_analysis,
}
