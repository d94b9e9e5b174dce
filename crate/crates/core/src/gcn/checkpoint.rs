use std::io::{Read, Write};

use super::{EncoderDecoder, EpochRecord, GcnError, GcnLayer, GcnModel, Result};
use crate::numerics::DenseMatrix;

const MAGIC: &[u8; 4] = b"KGCN";
const VERSION: u8 = 1;
const FLAG_ENCODER: u8 = 1;
const FLAG_L2: u8 = 2;

/// `KGCN`, version byte, layer count as little-endian u64, one dense
/// binary blob per layer. A trailing flag byte records the optional
/// encoder-decoder (whose two blobs follow) and output normalisation.
pub fn write_checkpoint<W: Write>(model: &GcnModel, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(model.layers().len() as u64).to_le_bytes())?;
    for l in model.layers() {
        l.weights.write_binary(&mut w)?;
    }
    let mut flags = 0;
    if model.encoder_decoder().is_some() {
        flags |= FLAG_ENCODER;
    }
    if model.l2_normalize_output() {
        flags |= FLAG_L2;
    }
    w.write_all(&[flags])?;
    if let Some(ed) = model.encoder_decoder() {
        ed.encoder.write_binary(&mut w)?;
        ed.decoder.write_binary(&mut w)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<GcnModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GcnError::Format("missing KGCN magic".into()));
    }
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte)?;
    if byte[0] != VERSION {
        return Err(GcnError::Format(format!("unsupported version {}", byte[0])));
    }
    let mut count = [0u8; 8];
    r.read_exact(&mut count)?;
    let count = u64::from_le_bytes(count) as usize;
    if count == 0 {
        return Err(GcnError::Format("checkpoint has no layers".into()));
    }
    let mut layers = Vec::with_capacity(count.min(1024));
    for l in 0..count {
        layers.push(GcnLayer {
            weights: DenseMatrix::read_binary(&mut r)?,
            apply_activation: l + 1 != count,
        });
    }
    // Files without the flag byte carry plain layers only.
    let flags = match r.read(&mut byte)? {
        0 => 0,
        _ => byte[0],
    };
    if flags & !(FLAG_ENCODER | FLAG_L2) != 0 {
        return Err(GcnError::Format(format!("unknown flag bits {flags:#04x}")));
    }
    let encoder_decoder = if flags & FLAG_ENCODER != 0 {
        Some(EncoderDecoder {
            encoder: DenseMatrix::read_binary(&mut r)?,
            decoder: DenseMatrix::read_binary(&mut r)?,
        })
    } else {
        None
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(GcnError::Format("trailing bytes after checkpoint".into()));
    }
    GcnModel::from_layers(layers, encoder_decoder, flags & FLAG_L2 != 0)
}

/// `epoch,lr,loss` with one row per epoch.
pub fn write_loss_csv<W: Write>(history: &[EpochRecord], mut w: W) -> Result<()> {
    writeln!(w, "epoch,lr,loss")?;
    for r in history {
        writeln!(w, "{},{:?},{:?}", r.epoch, r.lr, r.loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::{init_model, init_model_with, ModelOptions};

    #[test]
    fn roundtrip_plain_and_extended() {
        for opts in [
            ModelOptions::default(),
            ModelOptions {
                encoder_decoder: true,
                l2_normalize_output: true,
            },
        ] {
            let m = init_model_with(&[4, 6, 3], 5, opts).unwrap();
            let mut buf = Vec::new();
            write_checkpoint(&m, &mut buf).unwrap();
            assert_eq!(&buf[..4], b"KGCN");
            assert_eq!(read_checkpoint(&buf[..]).unwrap(), m);
        }
    }

    #[test]
    fn truncated_and_foreign_files_fail() {
        let m = init_model(&[2, 2], 1).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        assert!(read_checkpoint(&b"KGDMxxxx"[..]).is_err());
        // Without the flag byte the file is still a valid plain checkpoint.
        assert_eq!(read_checkpoint(&buf[..buf.len() - 1]).unwrap(), m);
    }

    #[test]
    fn loss_csv_header() {
        let mut buf = Vec::new();
        write_loss_csv(
            &[EpochRecord {
                epoch: 0,
                lr: 0.001,
                loss: 2.5,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,lr,loss\n0,0.001,2.5\n");
    }
}
