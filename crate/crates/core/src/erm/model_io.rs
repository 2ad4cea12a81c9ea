//! Binary model files.
//!
//! ```text
//! "DPKM" | version: u32 | payload length: u64 | payload | sha256(payload)
//! ```
//!
//! All integers and floats are little-endian; floats are IEEE-754 binary64.
//! The payload holds, in order: kernel, method, seeds, penalty and budget,
//! loss, truncation, optional standardization, the feature map and
//! coefficients, and a self-test block of up to eight inputs with the
//! predictions made at fit time. Loading recomputes those predictions and
//! rejects the file unless they agree bit for bit.
//!
//! Random Fourier maps are stored as `(d, M, seed)` plus a fingerprint of
//! the first frequency row; the frequencies are regenerated on load.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::{FeatureMap, FittedModel, FunctionalPart, Method, ModelParams, Seeds, UClip};
use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::gp::GpProjectionMap;
use crate::kernel::KernelSpec;
use crate::loss::{LossFamily, LossSpec};
use crate::privacy::PrivacyBudget;
use crate::rff::sample_rff;

const MAGIC: &[u8; 4] = b"DPKM";
pub const FORMAT_VERSION: u32 = 1;

const PARAMS_RP: u8 = 1;
const PARAMS_RFF: u8 = 2;
const PARAMS_FUNCTIONAL: u8 = 3;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.write_u64::<LE>(v).unwrap();
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.write_f64::<LE>(v).unwrap();
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|&x| self.f64(x));
    }
    fn opt_f64(&mut self, v: Option<f64>) {
        self.u8(v.is_some() as u8);
        self.f64(v.unwrap_or(0.0));
    }
    fn points(&mut self, pts: &[Vec<f64>]) {
        self.len(pts.len());
        self.len(pts.first().map_or(0, |p| p.len()));
        pts.iter().for_each(|p| self.f64s(p));
    }
    fn gp_map(&mut self, map: &GpProjectionMap) {
        self.len(map.dim());
        self.u64(map.seed());
        self.f64(map.jitter());
        self.points(map.anchors());
        for row in map.path_values().row_iter() {
            row.iter().for_each(|&v| self.f64(v));
        }
    }
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    path: &'a Path,
}

impl Reader<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::ModelFormat {
            path: self.path.to_path_buf(),
            message: message.into(),
        }
    }
    fn truncated(&self) -> Error {
        self.err("unexpected end of payload")
    }
    fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(|_| self.truncated())
    }
    fn u64(&mut self) -> Result<u64> {
        self.cur.read_u64::<LE>().map_err(|_| self.truncated())
    }
    fn f64(&mut self) -> Result<f64> {
        self.cur.read_f64::<LE>().map_err(|_| self.truncated())
    }
    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }
    /// A count of items of `item_bytes` each, checked against the bytes left.
    fn count(&mut self, item_bytes: usize) -> Result<usize> {
        let n = self.u64()?;
        let n = usize::try_from(n).map_err(|_| self.err("count overflows"))?;
        if n.checked_mul(item_bytes).is_none_or(|b| b > self.remaining()) {
            return Err(self.truncated());
        }
        Ok(n)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if n.checked_mul(8).is_none_or(|b| b > self.remaining()) {
            return Err(self.truncated());
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn opt_f64(&mut self) -> Result<Option<f64>> {
        let flag = self.u8()?;
        let v = self.f64()?;
        match flag {
            0 => Ok(None),
            1 => Ok(Some(v)),
            _ => Err(self.err("bad optional flag")),
        }
    }
    fn points(&mut self) -> Result<Vec<Vec<f64>>> {
        let n = self.count(0)?;
        let d = self.count(0)?;
        if n.checked_mul(d)
            .and_then(|c| c.checked_mul(8))
            .is_none_or(|b| b > self.remaining())
        {
            return Err(self.truncated());
        }
        (0..n).map(|_| self.f64s(d)).collect()
    }
    fn gp_map(&mut self, kernel: KernelSpec) -> Result<GpProjectionMap> {
        let m = self.count(0)?;
        let seed = self.u64()?;
        let jitter = self.f64()?;
        let anchors = self.points()?;
        let values = self.f64s(anchors.len().checked_mul(m).ok_or_else(|| self.truncated())?)?;
        let paths = DMatrix::from_row_slice(anchors.len(), m, &values);
        GpProjectionMap::from_parts(kernel, m, seed, anchors, paths, jitter)
    }
}

fn kernel_code(k: &KernelSpec) -> u8 {
    match k.name() {
        "gaussian" => 1,
        "laplace" => 2,
        _ => 3,
    }
}

fn loss_code(l: &LossSpec) -> (u8, f64) {
    match l.family() {
        LossFamily::Squared => (1, 0.0),
        LossFamily::Logistic => (2, 0.0),
        LossFamily::Huber { h } => (3, h),
    }
}

/// Serializes a model.
pub fn to_bytes(model: &FittedModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.u8(kernel_code(&model.kernel));
    w.f64(model.kernel.parameter());
    w.u8(model.method.code());
    w.u64(model.seeds.map);
    w.u64(model.seeds.noise);
    w.f64(model.lambda);
    w.f64(model.lambda_effective);
    w.f64(model.budget.epsilon());
    w.f64(model.budget.delta());
    let (lc, h) = loss_code(&model.loss);
    w.u8(lc);
    w.f64(h);
    w.opt_f64(model.truncation);
    w.u8(match model.u_clip {
        UClip::Elementwise => 1,
        UClip::L2Norm => 2,
    });
    match &model.standardizer {
        None => w.u8(0),
        Some(st) => {
            w.u8(1);
            w.len(st.input_dim());
            w.len(st.kept().len());
            st.kept().iter().for_each(|&j| w.len(j));
            w.f64s(st.means());
            w.f64s(st.sds());
        }
    }
    w.opt_f64(model.response_shift);
    match &model.params {
        ModelParams::Linear { map, beta } => {
            match map {
                FeatureMap::Rp(m) => {
                    w.u8(PARAMS_RP);
                    w.gp_map(m);
                }
                FeatureMap::Rff(m) => {
                    w.u8(PARAMS_RFF);
                    w.len(m.input_dim());
                    w.len(m.dim());
                    w.u64(m.seed());
                    w.u64(m.checksum());
                }
            }
            w.len(beta.len());
            w.f64s(beta);
        }
        ModelParams::Functional(part) => {
            w.u8(PARAMS_FUNCTIONAL);
            w.points(&part.train);
            w.f64s(&part.alpha);
            w.f64(part.noise_scale);
            w.gp_map(&part.noise);
        }
    }
    let pts: Vec<Vec<f64>> = model.self_test.iter().map(|(p, _)| p.clone()).collect();
    w.points(&pts);
    model.self_test.iter().for_each(|(_, v)| w.f64(*v));
    let payload = w.0;

    let mut out = Vec::with_capacity(payload.len() + 48);
    out.extend_from_slice(MAGIC);
    out.write_u32::<LE>(FORMAT_VERSION).unwrap();
    out.write_u64::<LE>(payload.len() as u64).unwrap();
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    out
}

/// Parses a model; `path` is used in error messages only.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<FittedModel> {
    let fail = |message: &str| Error::ModelFormat {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(fail("not a model file (bad magic)"));
    }
    let mut head = Cursor::new(&bytes[4..16]);
    let version = head.read_u32::<LE>()?;
    if version != FORMAT_VERSION {
        return Err(fail(&format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let len = head.read_u64::<LE>()?;
    let len = usize::try_from(len).map_err(|_| fail("payload length overflows"))?;
    if bytes.len() != 16 + len + 32 {
        return Err(fail("file length does not match the recorded payload length"));
    }
    let payload = &bytes[16..16 + len];
    if Sha256::digest(payload).as_slice() != &bytes[16 + len..] {
        return Err(Error::Checksum);
    }
    let mut r = Reader {
        cur: Cursor::new(payload),
        path,
    };

    let kcode = r.u8()?;
    let kparam = r.f64()?;
    let kernel = match kcode {
        1 => KernelSpec::gaussian(kparam)?,
        2 => KernelSpec::laplace(kparam)?,
        3 => KernelSpec::linear(kparam)?,
        _ => return Err(r.err("unknown kernel code")),
    };
    let method = Method::from_code(r.u8()?).ok_or_else(|| r.err("unknown method code"))?;
    let seeds = Seeds {
        map: r.u64()?,
        noise: r.u64()?,
    };
    let lambda = r.f64()?;
    let lambda_effective = r.f64()?;
    let epsilon = r.f64()?;
    let delta = r.f64()?;
    let budget = PrivacyBudget::new(epsilon, delta)?;
    let lcode = r.u8()?;
    let h = r.f64()?;
    let loss = match lcode {
        1 => LossSpec::squared(),
        2 => LossSpec::logistic(),
        3 => LossSpec::huber(h)?,
        _ => return Err(r.err("unknown loss code")),
    };
    let truncation = r.opt_f64()?;
    let u_clip = match r.u8()? {
        1 => UClip::Elementwise,
        2 => UClip::L2Norm,
        _ => return Err(r.err("unknown clipping code")),
    };
    let standardizer = match r.u8()? {
        0 => None,
        1 => {
            let input_dim = r.count(0)?;
            let k = r.count(24)?;
            let kept = (0..k)
                .map(|_| r.u64().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            let means = r.f64s(k)?;
            let sds = r.f64s(k)?;
            Some(Standardizer::from_parts(input_dim, kept, means, sds)?)
        }
        _ => return Err(r.err("bad standardization flag")),
    };
    let response_shift = r.opt_f64()?;
    let params = match r.u8()? {
        PARAMS_RP | PARAMS_RFF => {
            let map = if payload[r.cur.position() as usize - 1] == PARAMS_RP {
                FeatureMap::Rp(r.gp_map(kernel)?)
            } else {
                let d = r.count(0)?;
                let m = r.count(0)?;
                let seed = r.u64()?;
                let checksum = r.u64()?;
                let map = sample_rff(kernel, d, m, seed)?;
                if map.checksum() != checksum {
                    return Err(r.err("regenerated Fourier frequencies do not match the stored fingerprint"));
                }
                FeatureMap::Rff(map)
            };
            let m = r.count(8)?;
            if m != map.dim() {
                return Err(r.err("coefficient length does not match the feature map"));
            }
            let beta = r.f64s(m)?;
            ModelParams::Linear { map, beta }
        }
        PARAMS_FUNCTIONAL => {
            let train = r.points()?;
            let alpha = r.f64s(train.len())?;
            let noise_scale = r.f64()?;
            let noise = r.gp_map(kernel)?;
            ModelParams::Functional(FunctionalPart {
                train,
                alpha,
                noise_scale,
                noise,
            })
        }
        _ => return Err(r.err("unknown parameter block")),
    };
    let pts = r.points()?;
    let values = r.f64s(pts.len())?;
    let mut rest = Vec::new();
    r.cur.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(r.err("trailing bytes after the self-test block"));
    }

    let model = FittedModel {
        method,
        kernel,
        lambda,
        lambda_effective,
        budget,
        seeds,
        loss,
        truncation,
        u_clip,
        params,
        standardizer,
        response_shift,
        self_test: pts.into_iter().zip(values).collect(),
    };
    for (p, v) in &model.self_test {
        let again = model.predict(p)?;
        if again.to_bits() != v.to_bits() {
            return Err(r.err(format!(
                "self-test prediction mismatch: stored {v:e}, recomputed {again:e}"
            )));
        }
    }
    Ok(model)
}

pub fn save_model(model: &FittedModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::data(format!("cannot read model {}: {e}", path.display())))?;
    from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::privacy::FeatureKind;
    use crate::rng;

    fn data(n: usize, labels: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut s = rng::stream(77);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng::uniform(&mut s), rng::uniform(&mut s)])
            .collect();
        let y = x
            .iter()
            .map(|r| {
                let v = r[0] - r[1];
                if labels {
                    if v > 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    v
                }
            })
            .collect();
        (x, y)
    }

    fn all_models() -> Vec<FittedModel> {
        let k = KernelSpec::gaussian(0.8).unwrap();
        let budget = PrivacyBudget::new(2.0, 1e-3).unwrap();
        let (x, y) = data(30, false);
        let (xl, yl) = data(30, true);
        let ridge = RidgeConfig {
            m: 12,
            lambda: 0.05,
            truncation: 1.0,
            budget,
            u_clip: UClip::Elementwise,
        };
        let op = ObjpertConfig {
            m: 12,
            lambda: 0.05,
            loss: LossSpec::huber(0.5).unwrap(),
            budget,
        };
        let fp = FunctionalConfig {
            lambda: 0.05,
            loss: LossSpec::squared(),
            truncation: Some(1.0),
            budget,
        };
        let seeds = Seeds::from_base(5);
        vec![
            fit_rp_ridge(&x, &y, k, &ridge, seeds, &[]).unwrap(),
            fit_rff_ridge(&x, &y, k, &ridge, seeds).unwrap(),
            fit_objpert(&xl, &yl, FeatureKind::Rp, k, &op, seeds, &[]).unwrap(),
            fit_objpert(&xl, &yl, FeatureKind::Rff, k, &op, seeds, &[]).unwrap(),
            fit_functional_pert(&x, &y, k, &fp, seeds, &[]).unwrap(),
        ]
    }

    #[test]
    fn round_trip_every_method() {
        let probe = vec![0.123, 0.456];
        for model in all_models() {
            let bytes = to_bytes(&model);
            let back = from_bytes(&bytes, Path::new("mem")).unwrap();
            assert_eq!(back.method, model.method);
            assert_eq!(back.self_test.len(), SELF_TEST_POINTS);
            assert_eq!(
                back.predict(&probe).unwrap().to_bits(),
                model.predict(&probe).unwrap().to_bits(),
                "{}",
                model.method
            );
            assert_eq!(to_bytes(&back), bytes);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let model = all_models().remove(0);
        let mut bytes = to_bytes(&model);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(matches!(from_bytes(&bytes, Path::new("m")), Err(Error::Checksum)));

        let mut bytes = to_bytes(&model);
        bytes[4] = 9;
        assert!(matches!(
            from_bytes(&bytes, Path::new("m")),
            Err(Error::ModelFormat { .. })
        ));

        let bytes = to_bytes(&model);
        assert!(from_bytes(&bytes[..bytes.len() - 1], Path::new("m")).is_err());
        assert!(from_bytes(b"nope", Path::new("m")).is_err());
    }
}
