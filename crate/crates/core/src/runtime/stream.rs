use super::{CommandRuntime, ExecutionOutcome};
use crate::gateway::{GatewayError, LineStream};
use crate::scene::Scene;

#[derive(Debug, Default)]
pub struct StreamReport {
    pub outcomes: Vec<ExecutionOutcome>,
    /// Arrival offset of each line, parallel to `outcomes`.
    pub offsets_ms: Vec<u64>,
    pub error: Option<GatewayError>,
}

/// Executes each line as soon as it arrives. `observe` sees every outcome
/// together with the scene right after it; applied outcomes carry the new
/// revision. A transport error ends processing but keeps earlier outcomes.
pub async fn execute_stream<F>(
    stream: &mut LineStream,
    scene: &mut Scene,
    runtime: &mut CommandRuntime,
    mut observe: F,
) -> StreamReport
where
    F: FnMut(&ExecutionOutcome, &Scene),
{
    let mut report = StreamReport::default();
    while let Some(item) = stream.next().await {
        match item {
            Ok(line) => {
                let outcome = runtime.execute_line(scene, &line.text);
                observe(&outcome, scene);
                report.outcomes.push(outcome);
                report.offsets_ms.push(line.offset_ms);
            }
            Err(e) => {
                report.error = Some(e);
                break;
            }
        }
    }
    report
}
