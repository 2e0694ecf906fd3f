//! Random protocol messages and the stream-segmentation round-trip harness.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmstep_core::sim::{EventKind, InfluenceMode, SimEvent};
use swarmstep_core::state::AgentId;
use swarmstep_wire::{
    CommandEntry, CommandLevel, CommandMsg, ControlMsg, Frame, FrameDecoder, Message, SnapshotMsg, SnapshotSection,
    ViewerInputMsg,
};

fn f32s<R: Rng, const N: usize>(rng: &mut R) -> [f32; N] {
    std::array::from_fn(|_| rng.gen_range(-1e4f32..1e4))
}

pub fn snapshot<R: Rng>(rng: &mut R) -> SnapshotMsg {
    let sections = (0..rng.gen_range(0..=3u16))
        .map(|t| {
            let n = rng.gen_range(0..=6);
            SnapshotSection {
                type_id: t * 7 + rng.gen_range(0..7),
                ids: (0..n).map(|_| rng.gen()).collect(),
                alive: (0..n).map(|_| rng.gen()).collect(),
                pos: (0..n).map(|_| f32s(rng)).collect(),
                vel: (0..n).map(|_| f32s(rng)).collect(),
                quat: (0..n).map(|_| f32s(rng)).collect(),
                omega: (0..n).map(|_| f32s(rng)).collect(),
            }
        })
        .collect();
    SnapshotMsg { tick: rng.gen(), sections }
}

pub fn command<R: Rng>(rng: &mut R) -> CommandMsg {
    let levels = [CommandLevel::Pos, CommandLevel::Rate, CommandLevel::Motor, CommandLevel::Unicycle];
    let commands = (0..rng.gen_range(0..=4))
        .map(|_| {
            let level = *levels.choose(rng).expect("nonempty");
            let values = (0..level.arity()).map(|_| rng.gen_range(-1e3..1e3)).collect();
            CommandEntry { agent_id: rng.gen(), level, values }
        })
        .collect();
    CommandMsg { tick_hint: rng.gen(), commands }
}

pub fn message<R: Rng>(rng: &mut R) -> Message {
    match rng.gen_range(0..5) {
        0 => Message::Snapshot(snapshot(rng)),
        1 => Message::Command(command(rng)),
        2 => {
            let kinds = [EventKind::CollisionDeath, EventKind::FaultDeath, EventKind::AgentCommandRejected];
            Message::Event(SimEvent {
                tick: rng.gen(),
                kind: *kinds.choose(rng).expect("nonempty"),
                agent_ids: (0..rng.gen_range(0..5)).map(|_| AgentId(rng.gen())).collect(),
            })
        }
        3 => {
            let modes = [InfluenceMode::Attract, InfluenceMode::Repel, InfluenceMode::Waypoint];
            Message::ViewerInput(ViewerInputMsg {
                mode: *modes.choose(rng).expect("nonempty"),
                point: f32s(rng),
                radius: rng.gen_range(0.0..100.0),
                strength: rng.gen_range(0.0..10.0),
            })
        }
        _ => Message::Control(match rng.gen_range(0..4) {
            0 => ControlMsg::Start,
            1 => ControlMsg::Stop,
            2 => ControlMsg::SetParam {
                name: format!("p{}", rng.gen::<u16>()),
                value: if rng.gen() { rng.gen_range(-1e6..1e6f64).into() } else { "text \"quoted\" ✓".into() },
            },
            _ => ControlMsg::Hello { version: rng.gen(), dt: rng.gen_range(1e-4..1.0) },
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FramingOutcome {
    pub messages: usize,
    pub unknown_frames: usize,
    pub chunks: usize,
    pub failures: usize,
}

/// Encodes `count` random messages (with unknown-type frames mixed in) into
/// one stream, feeds it to a decoder in randomly sized pieces and counts
/// every message not reproduced exactly and in order.
pub fn framing_round_trip(seed: u64, count: usize) -> FramingOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut expected = Vec::with_capacity(count);
    let mut stream = Vec::new();
    let mut unknown_frames = 0;
    for _ in 0..count {
        if rng.gen_bool(0.05) {
            let len = rng.gen_range(0..64);
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            stream.extend(Frame::new(rng.gen_range(0x06..=0xff), payload).encode());
            unknown_frames += 1;
        }
        let m = message(&mut rng);
        stream.extend(m.encode());
        expected.push(m);
    }

    let mut decoder = FrameDecoder::new();
    let mut got = Vec::with_capacity(count);
    let mut failures = 0;
    let mut at = 0;
    let mut chunks = 0;
    while at < stream.len() {
        let size = match rng.gen_range(0..4) {
            0 => 1,
            1 => rng.gen_range(1..8),
            2 => rng.gen_range(1..256),
            _ => rng.gen_range(1..8192),
        };
        let end = (at + size).min(stream.len());
        decoder.push(&stream[at..end]);
        at = end;
        chunks += 1;
        loop {
            match decoder.next_frame() {
                Ok(Some(frame)) => match Message::from_frame(&frame) {
                    Ok(Some(m)) => got.push(m),
                    Ok(None) => {}
                    Err(_) => failures += 1,
                },
                Ok(None) => break,
                Err(_) => {
                    failures += 1;
                    break;
                }
            }
        }
    }
    failures += expected.len().abs_diff(got.len());
    failures += expected.iter().zip(&got).filter(|(a, b)| a != b).count();
    if decoder.buffered() != 0 {
        failures += 1;
    }
    FramingOutcome { messages: count, unknown_frames, chunks, failures }
}
