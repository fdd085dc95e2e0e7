//! The `SKYF` field archive: the on-disk handoff between pipeline stages.
//!
//! Little-endian binary layout, bit-exact:
//!
//! ```text
//! offset  size         field
//! 0       4            magic "SKYF"
//! 4       2            format version (currently 1), u16
//! 6       4            grid width, u32
//! 10      4            grid height, u32
//! 14      2            flags, u16: bit 0 set = solved archive
//! 16      ceil(N/8)    mask bitmap, pixel i at byte i/8, bit i%8 (LSB first)
//! ...     8 each       f64 values: known pixels only, in ascending pixel
//!                      order, for raw archives; all N pixels for solved ones
//! ```
//!
//! Identical content always serializes to identical bytes.

use std::io::{Read, Write};

use thiserror::Error;

use crate::field::{InpaintingMask, SignalField};
use crate::grid::{AngularGrid, GridError};

pub const MAGIC: [u8; 4] = *b"SKYF";
pub const VERSION: u16 = 1;
const FLAG_SOLVED: u16 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: not a SKYF archive")]
    BadMagic,
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown flag bits {0:#06x}")]
    UnknownFlags(u16),
    #[error("archive grid is invalid: {0}")]
    BadGrid(#[from] GridError),
    #[error("archive ends before the declared content")]
    Truncated,
    #[error("archive has {0} unexpected trailing bytes")]
    TrailingData(usize),
    #[error("known pixel {index} holds a non-finite value")]
    NonFiniteValue { index: usize },
}

/// A field/mask pair plus whether the field has been solved (all pixels
/// meaningful) or is raw rasterizer output (known pixels only).
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub field: SignalField,
    pub mask: InpaintingMask,
    pub solved: bool,
}

impl Archive {
    pub fn raw(field: SignalField, mask: InpaintingMask) -> Self {
        assert_eq!(field.grid(), mask.grid(), "field and mask grids differ");
        Self {
            field,
            mask,
            solved: false,
        }
    }

    pub fn solved(field: SignalField, mask: InpaintingMask) -> Self {
        assert_eq!(field.grid(), mask.grid(), "field and mask grids differ");
        Self {
            field,
            mask,
            solved: true,
        }
    }

    pub fn grid(&self) -> &AngularGrid {
        self.field.grid()
    }
}

/// Serializes an archive, returning the byte count.
pub fn write_archive<W: Write>(archive: &Archive, sink: &mut W) -> Result<usize, ArchiveError> {
    let grid = *archive.grid();
    let n = grid.len();
    let flags = archive.mask.flags();

    let mut written = 0usize;
    let mut put = |sink: &mut W, bytes: &[u8]| -> Result<(), ArchiveError> {
        sink.write_all(bytes)?;
        written += bytes.len();
        Ok(())
    };

    put(sink, &MAGIC)?;
    put(sink, &VERSION.to_le_bytes())?;
    put(sink, &(grid.width() as u32).to_le_bytes())?;
    put(sink, &(grid.height() as u32).to_le_bytes())?;
    let flag_bits: u16 = if archive.solved { FLAG_SOLVED } else { 0 };
    put(sink, &flag_bits.to_le_bytes())?;

    let mut bitmap = vec![0u8; n.div_ceil(8)];
    for (i, &k) in flags.iter().enumerate() {
        if k {
            bitmap[i / 8] |= 1 << (i % 8);
        }
    }
    put(sink, &bitmap)?;

    let values = archive.field.values();
    if archive.solved {
        for v in values {
            put(sink, &v.to_le_bytes())?;
        }
    } else {
        for (v, &k) in values.iter().zip(flags) {
            if k {
                put(sink, &v.to_le_bytes())?;
            }
        }
    }
    Ok(written)
}

/// Deserializes an archive, validating layout, grid, and known-pixel
/// finiteness. Unknown pixels of a raw archive read back as 0.
pub fn read_archive<R: Read>(source: &mut R) -> Result<Archive, ArchiveError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut at = 0usize;
    let mut take = |len: usize| -> Result<&[u8], ArchiveError> {
        let slice = bytes.get(at..at + len).ok_or(ArchiveError::Truncated)?;
        at += len;
        Ok(slice)
    };

    if take(4)? != MAGIC {
        return Err(ArchiveError::BadMagic);
    }
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let width = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let flag_bits = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if flag_bits & !FLAG_SOLVED != 0 {
        return Err(ArchiveError::UnknownFlags(flag_bits));
    }
    let solved = flag_bits & FLAG_SOLVED != 0;
    let grid = AngularGrid::new(width, height)?;
    let n = grid.len();

    let bitmap = take(n.div_ceil(8))?;
    let known: Vec<bool> = (0..n).map(|i| bitmap[i / 8] >> (i % 8) & 1 == 1).collect();

    let value_count = if solved {
        n
    } else {
        known.iter().filter(|&&k| k).count()
    };
    let mut values = vec![0.0f64; n];
    let raw = take(value_count * 8)?;
    if solved {
        for (i, chunk) in raw.chunks_exact(8).enumerate() {
            values[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    } else {
        let mut chunks = raw.chunks_exact(8);
        for (i, &k) in known.iter().enumerate() {
            if k {
                let chunk = chunks.next().expect("counted above");
                values[i] = f64::from_le_bytes(chunk.try_into().unwrap());
            }
        }
    }
    if at != bytes.len() {
        return Err(ArchiveError::TrailingData(bytes.len() - at));
    }

    for (i, (&v, &k)) in values.iter().zip(&known).enumerate() {
        if k && !v.is_finite() {
            return Err(ArchiveError::NonFiniteValue { index: i });
        }
    }

    Ok(Archive {
        field: SignalField::from_values(grid, values).expect("sized above"),
        mask: InpaintingMask::from_flags(grid, known).expect("sized above"),
        solved,
    })
}
