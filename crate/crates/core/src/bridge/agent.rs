use std::io::{BufRead, Write};

use super::{decode, encode, BridgeError, BridgeMessage};
use crate::sim::{EgoPolicy, PolicyEnv, ReferencePolicy};

/// Serves one session with the worst-case-safe policy until `shutdown` or
/// end of input.
pub fn serve_example_agent(input: impl BufRead, mut output: impl Write) -> Result<(), BridgeError> {
    let mut policy: Option<ReferencePolicy> = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match decode(&line)? {
            BridgeMessage::Init { context, profile, dt, vehicle_length } => {
                policy =
                    Some(ReferencePolicy::worst_case_safe(PolicyEnv { ctx: context, profile, dt, vehicle_length }));
                output.write_all(encode(&BridgeMessage::Ready { agent: Some("worst-case-safe".into()) }).as_bytes())?;
            }
            BridgeMessage::TickRequest { tick, vista } => {
                let p = policy.as_mut().ok_or_else(|| BridgeError::Protocol("tick_request before init".into()))?;
                let d = p.decide(tick, &vista).map_err(|f| BridgeError::Protocol(f.reason))?;
                let reply = BridgeMessage::ControlReply { tick, command: d.command, lane_change: d.lane_change };
                output.write_all(encode(&reply).as_bytes())?;
            }
            BridgeMessage::Shutdown { .. } => return Ok(()),
            other => return Err(BridgeError::Protocol(format!("unexpected {} message", other.type_name()))),
        }
        output.flush()?;
    }
    Ok(())
}
