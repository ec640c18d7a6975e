//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "SSCCCKPT" | version u32
//! kind: u32 length + UTF-8 bytes
//! hyperparameter count u32, then per entry: name (u32 len + bytes), value f64
//! tensor count u32, then per tensor: name, rows u32, cols u32, rows*cols f64
//! optimizer flag u8; when 1: step u64, lr f64, beta1 f64, beta2 f64, eps f64,
//!   then first and second moments for every tensor in order (rows*cols f64 each)
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Adam, Mat, NnError, Params};

const MAGIC: &[u8; 8] = b"SSCCCKPT";
const VERSION: u32 = 1;

/// Everything needed to rebuild and resume a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Model family, e.g. `"ecct"` or `"tiny-lm"`.
    pub kind: String,
    pub hyper: Vec<(String, f64)>,
    pub params: Params,
    pub optimizer: Option<Adam>,
}

impl Checkpoint {
    pub fn hyper(&self, name: &str) -> Option<f64> {
        self.hyper.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn require(&self, name: &str) -> Result<f64, NnError> {
        self.hyper(name)
            .ok_or_else(|| NnError::Format(format!("checkpoint lacks hyperparameter {name}")))
    }

    pub fn write(&self, mut w: impl Write) -> Result<(), NnError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        write_str(&mut w, &self.kind)?;
        w.write_u32::<LittleEndian>(self.hyper.len() as u32)?;
        for (name, v) in &self.hyper {
            write_str(&mut w, name)?;
            w.write_f64::<LittleEndian>(*v)?;
        }
        w.write_u32::<LittleEndian>(self.params.len() as u32)?;
        for (_, name, m) in self.params.iter() {
            write_str(&mut w, name)?;
            w.write_u32::<LittleEndian>(m.rows as u32)?;
            w.write_u32::<LittleEndian>(m.cols as u32)?;
            write_data(&mut w, &m.data)?;
        }
        match &self.optimizer {
            None => w.write_u8(0)?,
            Some(opt) => {
                w.write_u8(1)?;
                w.write_u64::<LittleEndian>(opt.step)?;
                for v in [opt.lr, opt.beta1, opt.beta2, opt.eps] {
                    w.write_f64::<LittleEndian>(v)?;
                }
                for m in opt.m.iter().chain(&opt.v) {
                    write_data(&mut w, &m.data)?;
                }
            }
        }
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self, NnError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Format("not a checkpoint file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(NnError::Format(format!("unsupported checkpoint version {version}")));
        }
        let kind = read_str(&mut r)?;
        let mut hyper = Vec::new();
        for _ in 0..r.read_u32::<LittleEndian>()? {
            let name = read_str(&mut r)?;
            hyper.push((name, r.read_f64::<LittleEndian>()?));
        }
        let mut params = Params::new();
        for _ in 0..r.read_u32::<LittleEndian>()? {
            let name = read_str(&mut r)?;
            let rows = r.read_u32::<LittleEndian>()? as usize;
            let cols = r.read_u32::<LittleEndian>()? as usize;
            let data = read_data(&mut r, rows * cols)?;
            params.add(name, Mat::from_vec(rows, cols, data));
        }
        let optimizer = match r.read_u8()? {
            0 => None,
            1 => {
                let step = r.read_u64::<LittleEndian>()?;
                let lr = r.read_f64::<LittleEndian>()?;
                let beta1 = r.read_f64::<LittleEndian>()?;
                let beta2 = r.read_f64::<LittleEndian>()?;
                let eps = r.read_f64::<LittleEndian>()?;
                let read_moments = |r: &mut dyn Read| -> Result<Vec<Mat>, NnError> {
                    params
                        .iter()
                        .map(|(_, _, p)| Ok(Mat::from_vec(p.rows, p.cols, read_data(r, p.len())?)))
                        .collect()
                };
                let m = read_moments(&mut r)?;
                let v = read_moments(&mut r)?;
                Some(Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                    step,
                    m,
                    v,
                })
            }
            f => return Err(NnError::Format(format!("bad optimizer flag {f}"))),
        };
        Ok(Self {
            kind,
            hyper,
            params,
            optimizer,
        })
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<(), NnError> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str(r: &mut impl Read) -> Result<String, NnError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > 1 << 20 {
        return Err(NnError::Format("string too long".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| NnError::Format("name is not UTF-8".into()))
}

fn write_data(w: &mut impl Write, data: &[f64]) -> Result<(), NnError> {
    for &x in data {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn read_data(r: &mut (impl Read + ?Sized), n: usize) -> Result<Vec<f64>, NnError> {
    if n > 1 << 28 {
        return Err(NnError::Format("tensor too large".into()));
    }
    let mut data = vec![0.0; n];
    for x in &mut data {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        *x = f64::from_le_bytes(b);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn roundtrip_with_optimizer() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut params = Params::new();
        params.add("a", Mat::randn(3, 4, 1.0, &mut rng));
        params.add("b", Mat::randn(1, 4, 1.0, &mut rng));
        let mut opt = Adam::new(&params, 1e-3);
        let grads: Vec<Mat> = params.iter().map(|(_, _, p)| p.clone()).collect();
        opt.step(&mut params, &grads);
        let ckpt = Checkpoint {
            kind: "test".into(),
            hyper: vec![("layers".into(), 2.0)],
            params,
            optimizer: Some(opt),
        };
        let mut buf = Vec::new();
        ckpt.write(&mut buf).unwrap();
        let back = Checkpoint::read(buf.as_slice()).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.hyper("layers"), Some(2.0));
        assert!(Checkpoint::read(&buf[..20]).is_err());
        assert!(Checkpoint::read(&b"NOTACKPTxxxx"[..]).is_err());
    }
}
