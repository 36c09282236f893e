//! K-slot repetition of a data bit inside a frame, Z-channel superposition
//! of many ONUs and per-ONU decoding.
//!
//! A transmitted 1 lights all of its slots and can never be erased by other
//! users; a transmitted 0 is misread only when every one of its slots was
//! lit by someone else.

use crate::error::{Error, Result};

pub const DEFAULT_FRAME_SLOTS: usize = 356;
pub const DEFAULT_BLOOM_K: usize = 4;

/// Logical view of one frame: one binary value per slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotFrame {
    slots: Vec<bool>,
}

impl SlotFrame {
    pub fn zeros(frame_slots: usize) -> Self {
        Self {
            slots: vec![false; frame_slots],
        }
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        Self {
            slots: bits.into_iter().collect(),
        }
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(text: &str) -> Result<Self> {
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Config(format!("bad slot character {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(|slots| Self { slots })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, slot: usize) -> Option<bool> {
        self.slots.get(slot).copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.slots
    }

    pub fn weight(&self) -> usize {
        self.slots.iter().filter(|&&b| b).count()
    }
}

impl std::fmt::Display for SlotFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.slots {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// What one ONU puts on the channel in one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    pub onu: usize,
    pub frame_index: u64,
    pub slot_set: Vec<u16>,
    pub data_bit: bool,
}

fn check_slots(slot_set: &[u16], frame_slots: usize) -> Result<()> {
    match slot_set.iter().find(|&&s| s as usize >= frame_slots) {
        Some(&s) => Err(Error::SlotOutOfRange {
            index: s as usize,
            frame_slots,
        }),
        None => Ok(()),
    }
}

/// Writes the plan's data bit into each of its slots.
pub fn encode_bit(plan: &FramePlan, frame_slots: usize) -> Result<SlotFrame> {
    check_slots(&plan.slot_set, frame_slots)?;
    let mut frame = SlotFrame::zeros(frame_slots);
    if plan.data_bit {
        for &s in &plan.slot_set {
            frame.slots[s as usize] = true;
        }
    }
    Ok(frame)
}

/// Slot-wise OR of equally sized frames. An empty list yields an empty frame.
pub fn superpose<'a>(frames: impl IntoIterator<Item = &'a SlotFrame>) -> Result<SlotFrame> {
    let mut iter = frames.into_iter();
    let Some(first) = iter.next() else {
        return Ok(SlotFrame::zeros(0));
    };
    let mut merged = first.clone();
    for frame in iter {
        if frame.len() != merged.len() {
            return Err(Error::Shape {
                expected: merged.len(),
                got: frame.len(),
            });
        }
        for (m, &b) in merged.slots.iter_mut().zip(&frame.slots) {
            *m |= b;
        }
    }
    Ok(merged)
}

/// 1 only if every designated slot reads 1.
pub fn decode_bit(merged: &SlotFrame, slot_set: &[u16]) -> Result<bool> {
    check_slots(slot_set, merged.len())?;
    Ok(slot_set.iter().all(|&s| merged.slots[s as usize]))
}
