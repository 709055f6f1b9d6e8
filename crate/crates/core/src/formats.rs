//! Raw binary file formats.
//!
//! * `B2M1` — binary mask: 4-byte magic, height and width as u32 LE,
//!   then `height * width` bytes (0 or 1), row-major.
//! * `B2F1` — soft map: same header, then f32 LE values row-major.
//! * `B2S1` — basis stack: magic, then C, H, W as u32 LE, then
//!   `C * H * W` f32 LE values channel-major, then a 1-byte
//!   boundary-channel flag trailer.
//! * Attention records — a plain concatenation of per-instance records
//!   `{C: u32 LE, r: u32 LE, C * r * r logits as f32 LE}`, no magic.

use std::io::{Read, Write};

use crate::blend::{AttentionMap, BasisStack};
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, SoftMap};

const MASK_MAGIC: &[u8; 4] = b"B2M1";
const SOFT_MAGIC: &[u8; 4] = b"B2F1";
const STACK_MAGIC: &[u8; 4] = b"B2S1";

fn write_header(w: &mut impl Write, magic: &[u8; 4], height: usize, width: usize) -> Result<()> {
    let h = u32::try_from(height)
        .map_err(|_| Error::input(format!("height {height} exceeds u32 range")))?;
    let wd = u32::try_from(width)
        .map_err(|_| Error::input(format!("width {width} exceeds u32 range")))?;
    w.write_all(magic)?;
    w.write_all(&h.to_le_bytes())?;
    w.write_all(&wd.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 4], what: &str) -> Result<(usize, usize)> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::format(format!(
            "bad {what} magic: expected {:?}, got {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&m)
        )));
    }
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    let height = u32::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)?;
    let width = u32::from_le_bytes(buf) as usize;
    Ok((height, width))
}

pub fn write_mask(mask: &BinaryMask, w: &mut impl Write) -> Result<()> {
    write_header(w, MASK_MAGIC, mask.height(), mask.width())?;
    w.write_all(mask.data())?;
    Ok(())
}

pub fn read_mask(r: &mut impl Read) -> Result<BinaryMask> {
    let (height, width) = read_header(r, MASK_MAGIC, "mask")?;
    let mut data = vec![0u8; height * width];
    r.read_exact(&mut data)?;
    BinaryMask::new(width, height, data)
        .map_err(|e| Error::format(format!("mask payload invalid: {e}")))
}

pub fn write_soft(map: &SoftMap, w: &mut impl Write) -> Result<()> {
    write_header(w, SOFT_MAGIC, map.height(), map.width())?;
    for &v in map.data() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_soft(r: &mut impl Read) -> Result<SoftMap> {
    let (height, width) = read_header(r, SOFT_MAGIC, "soft map")?;
    let mut data = Vec::with_capacity(height * width);
    let mut buf = [0u8; 4];
    for _ in 0..height * width {
        r.read_exact(&mut buf)?;
        data.push(f32::from_le_bytes(buf) as f64);
    }
    SoftMap::new(width, height, data)
        .map_err(|e| Error::format(format!("soft map payload invalid: {e}")))
}

pub fn write_stack(stack: &BasisStack, w: &mut impl Write) -> Result<()> {
    let c = u32::try_from(stack.channel_count())
        .map_err(|_| Error::input("channel count exceeds u32 range".to_string()))?;
    let h = u32::try_from(stack.height())
        .map_err(|_| Error::input("stack height exceeds u32 range".to_string()))?;
    let wd = u32::try_from(stack.width())
        .map_err(|_| Error::input("stack width exceeds u32 range".to_string()))?;
    w.write_all(STACK_MAGIC)?;
    w.write_all(&c.to_le_bytes())?;
    w.write_all(&h.to_le_bytes())?;
    w.write_all(&wd.to_le_bytes())?;
    for channel in stack.channels() {
        for &v in channel.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.write_all(&[u8::from(stack.has_boundary_channel())])?;
    Ok(())
}

/// Read a basis stack. The stride is not part of the format and comes
/// from configuration.
pub fn read_stack(r: &mut impl Read, stride: u32) -> Result<BasisStack> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != STACK_MAGIC {
        return Err(Error::format(format!(
            "bad basis stack magic: expected \"B2S1\", got {:?}",
            String::from_utf8_lossy(&m)
        )));
    }
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    let c = u32::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)?;
    let height = u32::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)?;
    let width = u32::from_le_bytes(buf) as usize;
    let mut channels = Vec::with_capacity(c);
    for _ in 0..c {
        let mut data = Vec::with_capacity(height * width);
        for _ in 0..height * width {
            r.read_exact(&mut buf)?;
            data.push(f32::from_le_bytes(buf) as f64);
        }
        channels.push(
            SoftMap::new(width, height, data)
                .map_err(|e| Error::format(format!("stack channel invalid: {e}")))?,
        );
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    if flag[0] > 1 {
        return Err(Error::format(format!(
            "boundary-channel flag must be 0 or 1, got {}",
            flag[0]
        )));
    }
    BasisStack::with_flag(channels, stride, flag[0] == 1)
        .map_err(|e| Error::format(format!("stack payload invalid: {e}")))
}

pub fn write_attention_records(records: &[AttentionMap], w: &mut impl Write) -> Result<()> {
    for rec in records {
        let c = u32::try_from(rec.channels())
            .map_err(|_| Error::input("attention channels exceed u32 range".to_string()))?;
        let r = u32::try_from(rec.resolution())
            .map_err(|_| Error::input("attention resolution exceeds u32 range".to_string()))?;
        w.write_all(&c.to_le_bytes())?;
        w.write_all(&r.to_le_bytes())?;
        for &v in rec.logits() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read attention records until end of stream.
pub fn read_attention_records(r: &mut impl Read) -> Result<Vec<AttentionMap>> {
    let mut out = Vec::new();
    loop {
        let mut buf = [0u8; 4];
        match r.read_exact(&mut buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let c = u32::from_le_bytes(buf) as usize;
        r.read_exact(&mut buf)?;
        let res = u32::from_le_bytes(buf) as usize;
        let n = c
            .checked_mul(res)
            .and_then(|v| v.checked_mul(res))
            .ok_or_else(|| Error::format("attention record size overflows".to_string()))?;
        let mut logits = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            logits.push(f32::from_le_bytes(buf) as f64);
        }
        out.push(
            AttentionMap::new(c, res, logits)
                .map_err(|e| Error::format(format!("attention record invalid: {e}")))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_layout_is_pinned() {
        // 2x3 mask (width 3, height 2): magic, height, width, then bytes.
        let m = BinaryMask::new(3, 2, vec![1, 0, 1, 0, 1, 0]).unwrap();
        let mut bytes = Vec::new();
        write_mask(&m, &mut bytes).unwrap();
        assert_eq!(
            bytes,
            vec![b'B', b'2', b'M', b'1', 2, 0, 0, 0, 3, 0, 0, 0, 1, 0, 1, 0, 1, 0]
        );
        let back = read_mask(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn soft_roundtrip_through_f32() {
        let m = SoftMap::new(2, 2, vec![0.5, -1.25, 3.0, 0.0]).unwrap();
        let mut bytes = Vec::new();
        write_soft(&m, &mut bytes).unwrap();
        let back = read_soft(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, m); // exactly representable values
    }

    #[test]
    fn bad_magic_is_format_error() {
        let bytes = b"XXXX\x01\x00\x00\x00\x01\x00\x00\x00\x00".to_vec();
        assert!(matches!(
            read_mask(&mut bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn stack_roundtrip_with_flag() {
        let channels = vec![
            SoftMap::new(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(),
            SoftMap::new(3, 2, vec![5.0, 4.0, 3.0, 2.0, 1.0, 0.0]).unwrap(),
        ];
        let stack = BasisStack::new(channels, 4)
            .unwrap()
            .append_boundary_basis(SoftMap::constant(3, 2, 0.5))
            .unwrap();
        let mut bytes = Vec::new();
        write_stack(&stack, &mut bytes).unwrap();
        let back = read_stack(&mut bytes.as_slice(), 4).unwrap();
        assert_eq!(back.channel_count(), 3);
        assert!(back.has_boundary_channel());
        for (a, b) in stack.channels().iter().zip(back.channels()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn attention_records_roundtrip() {
        let recs = vec![
            AttentionMap::new(2, 3, (0..18).map(|v| v as f64 * 0.5).collect()).unwrap(),
            AttentionMap::new(1, 2, vec![1.0, -1.0, 0.25, 0.75]).unwrap(),
        ];
        let mut bytes = Vec::new();
        write_attention_records(&recs, &mut bytes).unwrap();
        let back = read_attention_records(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].channels(), 2);
        assert_eq!(back[0].resolution(), 3);
        assert_eq!(back[0].logits(), recs[0].logits());
        assert_eq!(back[1].logits(), recs[1].logits());
    }
}
