//! Model file: `b"JSDN"`, then little-endian `u32` version, depth, hidden
//! filters, kernel rows and kernel columns, then every conv layer's kernels
//! (row, col, in-channel, out-channel innermost) and biases, then every BN
//! layer's gamma, beta, running mean, running variance, momentum and
//! epsilon. All values are little-endian `f32`.

use std::io::{Read, Write};

use super::batchnorm::BatchNormParams;
use super::conv::ConvLayerParams;
use super::model::TrainedModel;
use super::network::{NetworkConfig, NetworkWeights};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"JSDN";
pub const VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f32s<W: Write>(w: &mut W, v: &[f32]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_model<W: Write>(model: &TrainedModel, mut w: W) -> Result<()> {
    let cfg = &model.config;
    model.weights.check(cfg)?;
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("dimension {v} exceeds u32")))
    };
    w.write_all(&MAGIC)?;
    put_u32(&mut w, VERSION)?;
    put_u32(&mut w, dim(cfg.depth)?)?;
    put_u32(&mut w, dim(cfg.hidden_filters)?)?;
    put_u32(&mut w, dim(cfg.kernel_rows)?)?;
    put_u32(&mut w, dim(cfg.kernel_cols)?)?;
    for layer in &model.weights.conv {
        put_f32s(&mut w, &layer.kernels)?;
        put_f32s(&mut w, &layer.biases)?;
    }
    for bn in &model.weights.bn {
        put_f32s(&mut w, &bn.gamma)?;
        put_f32s(&mut w, &bn.beta)?;
        put_f32s(&mut w, &bn.running_mean)?;
        put_f32s(&mut w, &bn.running_var)?;
        put_f32s(&mut w, &[bn.momentum, bn.epsilon])?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::Truncated("model file"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or(Error::Truncated("model file"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

pub fn load_model<R: Read>(mut r: R) -> Result<TrainedModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { buf: &bytes };

    let magic: [u8; 4] = c.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Version {
            expected: VERSION,
            found: version,
        });
    }
    let config = NetworkConfig {
        depth: c.u32()? as usize,
        hidden_filters: c.u32()? as usize,
        kernel_rows: c.u32()? as usize,
        kernel_cols: c.u32()? as usize,
    };
    config.validate().map_err(|e| Error::Malformed {
        what: "model header",
        detail: e.to_string(),
    })?;

    let mut conv = Vec::with_capacity(config.depth);
    for l in 0..config.depth {
        let (cin, cout) = config.layer_channels(l);
        let n = config.kernel_rows * config.kernel_cols * cin * cout;
        conv.push(ConvLayerParams {
            kernel_rows: config.kernel_rows,
            kernel_cols: config.kernel_cols,
            in_channels: cin,
            out_channels: cout,
            kernels: c.f32s(n)?,
            biases: c.f32s(cout)?,
        });
    }
    let mut bn = Vec::with_capacity(config.num_bn_layers());
    for _ in 0..config.num_bn_layers() {
        let ch = config.hidden_filters;
        let gamma = c.f32s(ch)?;
        let beta = c.f32s(ch)?;
        let running_mean = c.f32s(ch)?;
        let running_var = c.f32s(ch)?;
        let tail = c.f32s(2)?;
        bn.push(BatchNormParams {
            gamma,
            beta,
            running_mean,
            running_var,
            momentum: tail[0],
            epsilon: tail[1],
        });
    }
    if !c.buf.is_empty() {
        return Err(Error::Malformed {
            what: "model file",
            detail: format!("{} trailing bytes", c.buf.len()),
        });
    }
    TrainedModel::new(config, NetworkWeights { conv, bn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Purpose};

    fn model() -> TrainedModel {
        let cfg = NetworkConfig {
            depth: 4,
            hidden_filters: 3,
            ..Default::default()
        };
        let mut rng = derive_rng(5, Purpose::Init, 0);
        let mut w = NetworkWeights::<f32>::init(&cfg, &mut rng);
        w.bn[1].running_var[2] = 0.25;
        w.conv[3].biases[0] = -1.5;
        TrainedModel::new(cfg, w).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        save_model(&model(), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"JSDN");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 3);
        let floats = (5 * 2 * 2 * 3 + 3) + 2 * (5 * 2 * 3 * 3 + 3) + (5 * 2 * 3 + 1) + 2 * (4 * 3 + 2);
        assert_eq!(buf.len(), 24 + 4 * floats);
    }

    #[test]
    fn corrupt_inputs() {
        let mut buf = Vec::new();
        save_model(&model(), &mut buf).unwrap();
        assert_eq!(load_model(buf.as_slice()).unwrap(), model());

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(load_model(bad.as_slice()), Err(Error::BadMagic { .. })));
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(matches!(load_model(bad.as_slice()), Err(Error::Version { found: 2, .. })));
        assert!(matches!(
            load_model(&buf[..buf.len() - 1]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(load_model(&buf[..10]), Err(Error::Truncated(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(load_model(long.as_slice()), Err(Error::Malformed { .. })));
    }
}
