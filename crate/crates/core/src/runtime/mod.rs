//! Line-wise execution of model output against the scene.

mod exec;
mod parser;
mod stream;

pub use exec::{
    executed_lines, outcome_log, AliasState, CommandRuntime, ExecutionOutcome, OutcomeRecord, OutcomeStatus,
    SceneChange, SkipReason, CRT,
};
pub use parser::{parse_line, ApiCall, Arg, Axis, Line, ParseError};
pub use stream::{execute_stream, StreamReport};
