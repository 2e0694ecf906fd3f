//! Binary columnar snapshot payload.
//!
//! ```text
//! tick u64
//! repeated until the end of the payload:
//!   type_id u16, n u32,
//!   ids u64×n, alive u8×n, pos f32×3n, vel f32×3n, quat f32×4n, omega f32×3n
//! ```
//! All fields little-endian. Quaternions are sent scalar-first with `w ≥ 0`.

use swarmstep_core::state::WorldSnapshot;

use super::WireError;

/// Bytes per agent in a section body.
pub const BYTES_PER_AGENT: usize = 8 + 1 + 12 + 12 + 16 + 12;
/// Bytes of a section header.
pub const SECTION_HEADER: usize = 6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotSection {
    pub type_id: u16,
    pub ids: Vec<u64>,
    pub alive: Vec<bool>,
    pub pos: Vec<[f32; 3]>,
    pub vel: Vec<[f32; 3]>,
    pub quat: Vec<[f32; 4]>,
    pub omega: Vec<[f32; 3]>,
}

impl SnapshotSection {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    fn consistent(&self) -> bool {
        let n = self.ids.len();
        [self.alive.len(), self.pos.len(), self.vel.len(), self.quat.len(), self.omega.len()]
            .iter()
            .all(|&l| l == n)
    }
}

/// Decoded snapshot message, f32 precision.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotMsg {
    pub tick: u64,
    pub sections: Vec<SnapshotSection>,
}

fn f3(v: swarmstep_core::state::Vec3) -> [f32; 3] {
    [v.x as f32, v.y as f32, v.z as f32]
}

impl SnapshotMsg {
    /// Downcasts a world snapshot to wire precision.
    pub fn from_world(world: &WorldSnapshot) -> Self {
        let sections = world
            .sections
            .iter()
            .map(|s| SnapshotSection {
                type_id: s.type_id().0,
                ids: s.ids().iter().map(|id| id.0).collect(),
                alive: s.alive().to_vec(),
                pos: s.pos().iter().copied().map(f3).collect(),
                vel: s.vel().iter().copied().map(f3).collect(),
                quat: s.quat().iter().map(|q| q.canonical().to_array().map(|c| c as f32)).collect(),
                omega: s.omega().iter().copied().map(f3).collect(),
            })
            .collect();
        SnapshotMsg { tick: world.tick, sections }
    }

    pub fn agent_count(&self) -> usize {
        self.sections.iter().map(SnapshotSection::len).sum()
    }

    pub fn alive_count(&self) -> usize {
        self.sections.iter().map(SnapshotSection::alive_count).sum()
    }

    pub fn section(&self, type_id: u16) -> Option<&SnapshotSection> {
        self.sections.iter().find(|s| s.type_id == type_id)
    }

    pub fn encoded_len(&self) -> usize {
        8 + self.sections.iter().map(|s| SECTION_HEADER + s.len() * BYTES_PER_AGENT).sum::<usize>()
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.tick.to_le_bytes());
        for s in &self.sections {
            assert!(s.consistent(), "section {} has ragged columns", s.type_id);
            out.extend_from_slice(&s.type_id.to_le_bytes());
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            for id in &s.ids {
                out.extend_from_slice(&id.to_le_bytes());
            }
            out.extend(s.alive.iter().map(|a| *a as u8));
            put_f32s(&mut out, s.pos.iter().flatten());
            put_f32s(&mut out, s.vel.iter().flatten());
            put_f32s(&mut out, s.quat.iter().flatten());
            put_f32s(&mut out, s.omega.iter().flatten());
        }
        out
    }

    pub fn decode_payload(payload: &[u8]) -> Result<Self, WireError> {
        decode_with::<NativeLe>(payload)
    }
}

fn put_f32s<'a>(out: &mut Vec<u8>, vals: impl Iterator<Item = &'a f32>) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Encodes a world snapshot straight into payload bytes, skipping the
/// intermediate [`SnapshotMsg`]. Output equals
/// `SnapshotMsg::from_world(world).encode_payload()`.
pub fn encode_world_payload(world: &WorldSnapshot, out: &mut Vec<u8>) {
    let n_total: usize = world.sections.iter().map(|s| s.len()).sum();
    out.reserve(8 + world.sections.len() * SECTION_HEADER + n_total * BYTES_PER_AGENT);
    out.extend_from_slice(&world.tick.to_le_bytes());
    for s in &world.sections {
        out.extend_from_slice(&s.type_id().0.to_le_bytes());
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        for id in s.ids() {
            out.extend_from_slice(&id.0.to_le_bytes());
        }
        out.extend(s.alive().iter().map(|a| *a as u8));
        for col in [s.pos(), s.vel()] {
            for v in col {
                put_f32s(out, f3(*v).iter());
            }
        }
        for q in s.quat() {
            put_f32s(out, q.canonical().to_array().map(|c| c as f32).iter());
        }
        for v in s.omega() {
            put_f32s(out, f3(*v).iter());
        }
    }
}

/// Source of little-endian scalars. The implementations differ only in how
/// they assemble bytes, so fixtures can be checked against each.
pub trait LeReader {
    fn u16(b: [u8; 2]) -> u16;
    fn u32(b: [u8; 4]) -> u32;
    fn u64(b: [u8; 8]) -> u64;
}

/// The standard library's `from_le_bytes`.
pub struct NativeLe;

impl LeReader for NativeLe {
    fn u16(b: [u8; 2]) -> u16 {
        u16::from_le_bytes(b)
    }
    fn u32(b: [u8; 4]) -> u32 {
        u32::from_le_bytes(b)
    }
    fn u64(b: [u8; 8]) -> u64 {
        u64::from_le_bytes(b)
    }
}

/// Explicit shift-and-or assembly, independent of host byte order.
pub struct Shifts;

impl LeReader for Shifts {
    fn u16(b: [u8; 2]) -> u16 {
        u16::from(b[0]) | u16::from(b[1]) << 8
    }
    fn u32(b: [u8; 4]) -> u32 {
        (0..4).fold(0u32, |acc, i| acc | u32::from(b[i]) << (8 * i))
    }
    fn u64(b: [u8; 8]) -> u64 {
        (0..8).fold(0u64, |acc, i| acc | u64::from(b[i]) << (8 * i))
    }
}

/// What a big-endian host does: load in native (big) order, then swap.
pub struct BigEndianHost;

impl LeReader for BigEndianHost {
    fn u16(b: [u8; 2]) -> u16 {
        u16::from_be_bytes(b).swap_bytes()
    }
    fn u32(b: [u8; 4]) -> u32 {
        u32::from_be_bytes(b).swap_bytes()
    }
    fn u64(b: [u8; 8]) -> u64 {
        u64::from_be_bytes(b).swap_bytes()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.at..self.at + N].try_into().expect("length checked");
        self.at += N;
        out
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }
}

/// Decodes a snapshot payload using `R` to assemble scalars.
pub fn decode_with<R: LeReader>(payload: &[u8]) -> Result<SnapshotMsg, WireError> {
    let mut c = Cursor { bytes: payload, at: 0 };
    if c.remaining() < 8 {
        return Err(WireError::Malformed("snapshot shorter than its tick".into()));
    }
    let tick = R::u64(c.take());
    let mut sections = Vec::new();
    while c.remaining() > 0 {
        if c.remaining() < SECTION_HEADER {
            return Err(WireError::Malformed("truncated section header".into()));
        }
        let type_id = R::u16(c.take());
        let n = R::u32(c.take()) as usize;
        if n.checked_mul(BYTES_PER_AGENT).is_none_or(|b| b > c.remaining()) {
            return Err(WireError::Malformed(format!("section {type_id} claims {n} agents")));
        }
        let f = |c: &mut Cursor| f32::from_bits(R::u32(c.take()));
        let ids = (0..n).map(|_| R::u64(c.take())).collect();
        let alive = (0..n)
            .map(|_| match c.take::<1>()[0] {
                0 => Ok(false),
                1 => Ok(true),
                b => Err(WireError::Malformed(format!("alive byte {b}"))),
            })
            .collect::<Result<_, _>>()?;
        let pos = (0..n).map(|_| [f(&mut c), f(&mut c), f(&mut c)]).collect();
        let vel = (0..n).map(|_| [f(&mut c), f(&mut c), f(&mut c)]).collect();
        let quat = (0..n).map(|_| [f(&mut c), f(&mut c), f(&mut c), f(&mut c)]).collect();
        let omega = (0..n).map(|_| [f(&mut c), f(&mut c), f(&mut c)]).collect();
        sections.push(SnapshotSection { type_id, ids, alive, pos, vel, quat, omega });
    }
    Ok(SnapshotMsg { tick, sections })
}
