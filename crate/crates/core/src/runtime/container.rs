//! Binary weight container.
//!
//! Layout (little-endian): magic `SPCW`, `u32` version (1), `u64` JSON
//! header length, the JSON header, raw row-major tensor payloads, and a
//! trailing CRC32 of the payload region. The header records the element
//! dtype, the model configuration (for weight files) and one entry per
//! tensor: `{name, dtype, shape, byte_offset}` with offsets relative to the
//! payload start.
//!
//! Cache snapshots reuse the same container with reserved `cache/...` names
//! in a fixed order: spectrum (interleaved re/im, row-major), value ring,
//! query ring, query sum, step counter. A restored cache rebuilds its
//! twiddle table; an attached memory bank is not part of the snapshot.

use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::weights::{BlockWeights, FfnWeights, ModelWeights};
use crate::cache::CacheState;
use crate::error::{Error, Result};
use crate::layer::{Dense, HeadWeights, LayerNormParams, LayerWeights};
use crate::matrix::Matrix;
use crate::scalar::{DType, Scalar};
use crate::spectral::HalfSpectrum;

const MAGIC: [u8; 4] = *b"SPCW";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    byte_offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ContainerHeader {
    dtype: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<ModelConfig>,
    tensors: Vec<TensorMeta>,
}

/// Mutable view of one named tensor inside a weight or cache structure.
enum SlotRef<'a, T> {
    Real(&'a mut [T]),
    Cpx(&'a mut [Complex<T>]),
    One(&'a mut T),
}

struct Slot<'a, T> {
    name: String,
    shape: Vec<usize>,
    data: SlotRef<'a, T>,
}

impl<T: Scalar> Slot<'_, T> {
    fn elem_count(&self) -> usize {
        self.shape.iter().product()
    }

    fn byte_len(&self) -> usize {
        self.elem_count() * T::DTYPE.size_bytes()
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        match &self.data {
            SlotRef::Real(s) => {
                for v in s.iter() {
                    v.write_le(out);
                }
            }
            SlotRef::Cpx(s) => {
                for v in s.iter() {
                    v.re.write_le(out);
                    v.im.write_le(out);
                }
            }
            SlotRef::One(v) => v.write_le(out),
        }
    }

    fn read_from(&mut self, bytes: &[u8]) {
        let w = T::DTYPE.size_bytes();
        match &mut self.data {
            SlotRef::Real(s) => {
                for (i, v) in s.iter_mut().enumerate() {
                    *v = T::read_le(&bytes[i * w..(i + 1) * w]);
                }
            }
            SlotRef::Cpx(s) => {
                for (i, v) in s.iter_mut().enumerate() {
                    let re = T::read_le(&bytes[2 * i * w..(2 * i + 1) * w]);
                    let im = T::read_le(&bytes[(2 * i + 1) * w..(2 * i + 2) * w]);
                    *v = Complex::new(re, im);
                }
            }
            SlotRef::One(v) => **v = T::read_le(&bytes[..w]),
        }
    }
}

fn dense_slots<'a, T: Scalar>(prefix: &str, d: &'a mut Dense<T>, out: &mut Vec<Slot<'a, T>>) {
    let (rows, cols) = (d.w.rows(), d.w.cols());
    out.push(Slot {
        name: format!("{prefix}/w"),
        shape: vec![rows, cols],
        data: SlotRef::Real(d.w.data_mut()),
    });
    out.push(Slot {
        name: format!("{prefix}/b"),
        shape: vec![cols],
        data: SlotRef::Real(&mut d.b),
    });
}

fn norm_slots<'a, T: Scalar>(
    prefix: &str,
    n: &'a mut LayerNormParams<T>,
    out: &mut Vec<Slot<'a, T>>,
) {
    let dim = n.gain.len();
    out.push(Slot {
        name: format!("{prefix}/gain"),
        shape: vec![dim],
        data: SlotRef::Real(&mut n.gain),
    });
    out.push(Slot {
        name: format!("{prefix}/bias"),
        shape: vec![dim],
        data: SlotRef::Real(&mut n.bias),
    });
}

fn matrix_slot<'a, T: Scalar>(name: String, m: &'a mut Matrix<T>, out: &mut Vec<Slot<'a, T>>) {
    let (rows, cols) = (m.rows(), m.cols());
    out.push(Slot {
        name,
        shape: vec![rows, cols],
        data: SlotRef::Real(m.data_mut()),
    });
}

/// Canonical tensor enumeration for a whole model; save and load both walk
/// this list, so the order and names cannot drift apart.
fn model_slots<T: Scalar>(w: &mut ModelWeights<T>) -> Vec<Slot<'_, T>> {
    let mut slots = Vec::new();
    for (bi, block) in w.blocks.iter_mut().enumerate() {
        let BlockWeights {
            mix,
            ffn,
            norm1,
            norm2,
            memory,
        } = block;
        let LayerWeights { heads, w_o } = mix;
        for (hi, head) in heads.iter_mut().enumerate() {
            let HeadWeights {
                w_q,
                w_v,
                descriptor_norm,
                gate_mlp,
                modrelu_bias,
                toeplitz_kernel,
                wrm_mlp,
                wrm_controller_logit,
                mem_gate_ext,
            } = head;
            let p = format!("blocks/{bi}/heads/{hi}");
            matrix_slot(format!("{p}/w_q"), w_q, &mut slots);
            matrix_slot(format!("{p}/w_v"), w_v, &mut slots);
            norm_slots(&format!("{p}/descriptor_norm"), descriptor_norm, &mut slots);
            dense_slots(
                &format!("{p}/gate_mlp/hidden"),
                &mut gate_mlp.hidden,
                &mut slots,
            );
            dense_slots(&format!("{p}/gate_mlp/out"), &mut gate_mlp.out, &mut slots);
            let bias_len = modrelu_bias.len();
            slots.push(Slot {
                name: format!("{p}/modrelu_bias"),
                shape: vec![bias_len],
                data: SlotRef::Real(modrelu_bias),
            });
            let kernel_len = toeplitz_kernel.len();
            slots.push(Slot {
                name: format!("{p}/toeplitz_kernel"),
                shape: vec![kernel_len, 2],
                data: SlotRef::Cpx(toeplitz_kernel),
            });
            dense_slots(
                &format!("{p}/wrm_mlp/hidden"),
                &mut wrm_mlp.hidden,
                &mut slots,
            );
            dense_slots(&format!("{p}/wrm_mlp/out"), &mut wrm_mlp.out, &mut slots);
            slots.push(Slot {
                name: format!("{p}/wrm_controller_logit"),
                shape: vec![1],
                data: SlotRef::One(wrm_controller_logit),
            });
            if let Some(ext) = mem_gate_ext {
                dense_slots(&format!("{p}/mem_gate_ext"), ext, &mut slots);
            }
        }
        matrix_slot(format!("blocks/{bi}/w_o"), w_o, &mut slots);
        dense_slots(&format!("blocks/{bi}/ffn/w1"), &mut ffn.w1, &mut slots);
        dense_slots(&format!("blocks/{bi}/ffn/w2"), &mut ffn.w2, &mut slots);
        norm_slots(&format!("blocks/{bi}/norm1"), norm1, &mut slots);
        norm_slots(&format!("blocks/{bi}/norm2"), norm2, &mut slots);
        for (hi, m) in memory.iter_mut().enumerate() {
            matrix_slot(format!("blocks/{bi}/memory/{hi}"), m, &mut slots);
        }
    }
    norm_slots("final_norm", &mut w.final_norm, &mut slots);
    if let Some(e) = &mut w.embedding {
        matrix_slot("embedding".to_string(), e, &mut slots);
    }
    slots
}

/// Zero-valued model with the exact tensor structure `cfg` implies.
fn zero_model<T: Scalar>(cfg: &ModelConfig) -> Result<ModelWeights<T>> {
    cfg.validate()?;
    let lcfg = cfg.layer_config();
    let blocks = (0..cfg.n_layers)
        .map(|_| {
            let mut mix = LayerWeights::zeros(&lcfg);
            if cfg.memory_tokens > 0 {
                for head in &mut mix.heads {
                    head.mem_gate_ext = Some(Dense::zeros(
                        cfg.gate_hidden,
                        2 * (cfg.memory_tokens / 2 + 1),
                    ));
                }
            }
            BlockWeights {
                mix,
                ffn: FfnWeights::zeros(cfg.d_model(), cfg.d_ffn),
                norm1: LayerNormParams::identity(cfg.d_model()),
                norm2: LayerNormParams::identity(cfg.d_model()),
                memory: (0..if cfg.memory_tokens > 0 { cfg.heads } else { 0 })
                    .map(|_| Matrix::zeros(cfg.memory_tokens, cfg.head_dim))
                    .collect(),
            }
        })
        .collect();
    Ok(ModelWeights {
        config: cfg.clone(),
        blocks,
        final_norm: LayerNormParams::identity(cfg.d_model()),
        embedding: (cfg.vocab_size > 0).then(|| Matrix::zeros(cfg.vocab_size, cfg.d_model())),
    })
}

fn encode_container<T: Scalar>(config: Option<&ModelConfig>, slots: &[Slot<'_, T>]) -> Vec<u8> {
    let mut metas = Vec::with_capacity(slots.len());
    let mut offset = 0u64;
    for s in slots {
        metas.push(TensorMeta {
            name: s.name.clone(),
            dtype: T::DTYPE.name().to_string(),
            shape: s.shape.clone(),
            byte_offset: offset,
        });
        offset += s.byte_len() as u64;
    }
    let header = ContainerHeader {
        dtype: T::DTYPE.name().to_string(),
        config: config.cloned(),
        tensors: metas,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let mut out = Vec::with_capacity(16 + header_json.len() + offset as usize + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);

    let payload_start = out.len();
    for s in slots {
        s.write_to(&mut out);
    }
    let crc = crc32fast::hash(&out[payload_start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Decoded {
    header: ContainerHeader,
    payload: Vec<u8>,
}

fn decode_container(bytes: &[u8]) -> Result<Decoded> {
    if bytes.len() < 16 {
        return Err(Error::Format("file too short for container prelude".into()));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, not a weight container".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {version}"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .ok_or_else(|| Error::Format("header length overflows".into()))?;
    if bytes.len() < header_end + 4 {
        return Err(Error::Format("truncated header".into()));
    }
    let header: ContainerHeader = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::Format(format!("bad header JSON: {e}")))?;

    let payload = &bytes[header_end..bytes.len() - 4];

    // declared extents must fit the payload before any checksum work, so a
    // truncated file reports as malformed rather than corrupt
    for t in &header.tensors {
        let dtype = DType::parse(&t.dtype).ok_or_else(|| {
            Error::Format(format!("tensor {}: unknown dtype {}", t.name, t.dtype))
        })?;
        let elems: usize = t.shape.iter().product();
        let end = t.byte_offset as usize + elems * dtype.size_bytes();
        if end > payload.len() {
            return Err(Error::Format(format!(
                "tensor {}: declared shape {:?} needs {} payload bytes, only {} present",
                t.name,
                t.shape,
                end,
                payload.len()
            )));
        }
    }

    let declared_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let actual_crc = crc32fast::hash(payload);
    if declared_crc != actual_crc {
        return Err(Error::Checksum(format!(
            "payload CRC32 {actual_crc:#010x} != declared {declared_crc:#010x}"
        )));
    }

    Ok(Decoded {
        header,
        payload: payload.to_vec(),
    })
}

fn fill_slots<T: Scalar>(decoded: &Decoded, slots: &mut [Slot<'_, T>]) -> Result<()> {
    use std::collections::HashMap;
    let mut by_name: HashMap<&str, &TensorMeta> = decoded
        .header
        .tensors
        .iter()
        .map(|t| (t.name.as_str(), t))
        .collect();
    for slot in slots.iter_mut() {
        let meta = by_name
            .remove(slot.name.as_str())
            .ok_or_else(|| Error::Format(format!("tensor {} missing from container", slot.name)))?;
        if meta.shape != slot.shape {
            return Err(Error::Format(format!(
                "tensor {}: header shape {:?} does not match expected {:?}",
                slot.name, meta.shape, slot.shape
            )));
        }
        if meta.dtype != T::DTYPE.name() {
            return Err(Error::Format(format!(
                "tensor {}: dtype {} does not match container dtype {}",
                slot.name,
                meta.dtype,
                T::DTYPE.name()
            )));
        }
        let start = meta.byte_offset as usize;
        let end = start + slot.byte_len();
        slot.read_from(&decoded.payload[start..end]);
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::Format(format!(
            "container holds unexpected tensor {extra}"
        )));
    }
    Ok(())
}

/// Serializes weights to the container format.
pub fn save_weights<T: Scalar>(w: &ModelWeights<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut scratch = w.clone();
    let slots = model_slots(&mut scratch);
    let bytes = encode_container::<T>(Some(&w.config), &slots);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Loads weights saved by [`save_weights`] with the same element type.
pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelWeights<T>> {
    let bytes = std::fs::read(path)?;
    let decoded = decode_container(&bytes)?;
    if decoded.header.dtype != T::DTYPE.name() {
        return Err(Error::Format(format!(
            "container dtype {} does not match requested {}",
            decoded.header.dtype,
            T::DTYPE.name()
        )));
    }
    let cfg = decoded
        .header
        .config
        .clone()
        .ok_or_else(|| Error::Format("container has no model config".into()))?;
    let mut model = zero_model::<T>(&cfg)?;
    let mut slots = model_slots(&mut model);
    fill_slots(&decoded, &mut slots)?;
    Ok(model)
}

/// Weights of either precision, dispatched on the container dtype.
pub enum LoadedModel {
    F32(ModelWeights<f32>),
    F64(ModelWeights<f64>),
}

pub fn load_weights_any(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let bytes = std::fs::read(&path)?;
    let decoded = decode_container(&bytes)?;
    match DType::parse(&decoded.header.dtype) {
        Some(DType::F32) => Ok(LoadedModel::F32(load_weights(path)?)),
        Some(DType::F64) => Ok(LoadedModel::F64(load_weights(path)?)),
        None => Err(Error::Format(format!(
            "unknown container dtype {}",
            decoded.header.dtype
        ))),
    }
}

/// Cache snapshot in the reserved `cache/...` namespace. The step counter
/// is stored as an f64 scalar (exact for any realistic step count).
pub fn save_cache_state<T: Scalar>(state: &CacheState<T>, path: impl AsRef<Path>) -> Result<()> {
    let d = state.head_dim();
    let bins = state.n_max() / 2 + 1;
    let mut spectrum: Vec<Complex<T>> = state.prefix_fft().data().to_vec();
    let mut v_buf = state.v_buf().clone();
    let mut q_buf = state.q_buf().clone();
    let mut sum_q = state.sum_q().to_vec();
    let t_scalar = state.step() as f64;

    let slots = vec![
        Slot {
            name: "cache/prefix_fft".into(),
            shape: vec![bins, d, 2],
            data: SlotRef::Cpx(&mut spectrum),
        },
        Slot {
            name: "cache/v_buf".into(),
            shape: vec![state.n_max(), d],
            data: SlotRef::Real(v_buf.data_mut()),
        },
        Slot {
            name: "cache/q_buf".into(),
            shape: vec![state.n_max(), d],
            data: SlotRef::Real(q_buf.data_mut()),
        },
        Slot {
            name: "cache/sum_q".into(),
            shape: vec![d],
            data: SlotRef::Real(&mut sum_q),
        },
    ];

    // T-typed state tensors followed by one f64 step counter
    let mut metas = Vec::new();
    let mut payload = Vec::new();
    for s in &slots {
        metas.push(TensorMeta {
            name: s.name.clone(),
            dtype: T::DTYPE.name().to_string(),
            shape: s.shape.clone(),
            byte_offset: payload.len() as u64,
        });
        s.write_to(&mut payload);
    }
    metas.push(TensorMeta {
        name: "cache/t".into(),
        dtype: DType::F64.name().to_string(),
        shape: vec![1],
        byte_offset: payload.len() as u64,
    });
    payload.extend_from_slice(&t_scalar.to_le_bytes());

    let header = ContainerHeader {
        dtype: T::DTYPE.name().to_string(),
        config: None,
        tensors: metas,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header_json.len() + payload.len() + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    let crc = crc32fast::hash(&payload);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc.to_le_bytes());
    std::fs::write(path, out)?;
    Ok(())
}

/// Restores a cache snapshot. Twiddles are rebuilt; a memory bank must be
/// re-attached by the caller.
pub fn load_cache_state<T: Scalar>(path: impl AsRef<Path>) -> Result<CacheState<T>> {
    let bytes = std::fs::read(path)?;
    let decoded = decode_container(&bytes)?;
    if decoded.header.dtype != T::DTYPE.name() {
        return Err(Error::Format(format!(
            "container dtype {} does not match requested {}",
            decoded.header.dtype,
            T::DTYPE.name()
        )));
    }
    let meta_of = |name: &str| -> Result<&TensorMeta> {
        decoded
            .header
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("tensor {name} missing from container")))
    };

    let v_meta = meta_of("cache/v_buf")?;
    if v_meta.shape.len() != 2 {
        return Err(Error::Format("cache/v_buf must be 2-D".into()));
    }
    let n_max = v_meta.shape[0];
    let d = v_meta.shape[1];
    let bins = n_max / 2 + 1;

    let mut spectrum = vec![Complex::<T>::default(); bins * d];
    let mut v_buf = Matrix::<T>::zeros(n_max, d);
    let mut q_buf = Matrix::<T>::zeros(n_max, d);
    let mut sum_q = vec![T::zero(); d];

    {
        let mut slots = vec![
            Slot {
                name: "cache/prefix_fft".into(),
                shape: vec![bins, d, 2],
                data: SlotRef::Cpx(&mut spectrum),
            },
            Slot {
                name: "cache/v_buf".into(),
                shape: vec![n_max, d],
                data: SlotRef::Real(v_buf.data_mut()),
            },
            Slot {
                name: "cache/q_buf".into(),
                shape: vec![n_max, d],
                data: SlotRef::Real(q_buf.data_mut()),
            },
            Slot {
                name: "cache/sum_q".into(),
                shape: vec![d],
                data: SlotRef::Real(&mut sum_q),
            },
        ];
        // cache/t is f64-typed and handled below, outside the T-typed walk
        let t_meta = meta_of("cache/t")?;
        if t_meta.dtype != DType::F64.name() || t_meta.shape != vec![1] {
            return Err(Error::Format("cache/t must be a single f64".into()));
        }
        let sub = Decoded {
            header: ContainerHeader {
                dtype: decoded.header.dtype.clone(),
                config: None,
                tensors: decoded
                    .header
                    .tensors
                    .iter()
                    .filter(|t| t.name != "cache/t")
                    .map(|t| TensorMeta {
                        name: t.name.clone(),
                        dtype: t.dtype.clone(),
                        shape: t.shape.clone(),
                        byte_offset: t.byte_offset,
                    })
                    .collect(),
            },
            payload: decoded.payload.clone(),
        };
        fill_slots(&sub, &mut slots)?;
    }

    let t_meta = meta_of("cache/t")?;
    let start = t_meta.byte_offset as usize;
    let t_value = f64::from_le_bytes(decoded.payload[start..start + 8].try_into().unwrap());

    let spectrum = HalfSpectrum::from_parts(n_max, d, spectrum)?;
    CacheState::restore_state(spectrum, v_buf, q_buf, sum_q, t_value as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{decode_step, prefill};
    use crate::layer::ControllerMode;
    use crate::runtime::config::MixerKind;
    use crate::runtime::weights::init_random;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("spectre-container-{}-{name}", std::process::id()));
        p
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            heads: 2,
            head_dim: 4,
            d_ffn: 16,
            n_max: 16,
            vocab_size: 5,
            memory_tokens: 4,
            toeplitz_enabled: true,
            toeplitz_radius: 1,
            wrm_enabled: true,
            wrm_levels: 2,
            wrm_controller: ControllerMode::LearnedStub,
            gate_hidden: 2,
            share_gates: false,
            mixer: MixerKind::Spectre,
            seed: 7,
        }
    }

    #[test]
    fn weight_round_trip_is_byte_exact() {
        let cfg = small_cfg();
        let w = init_random::<f64>(&cfg).unwrap();
        let path = tmp("roundtrip");
        save_weights(&w, &path).unwrap();
        let first = std::fs::read(&path).unwrap();

        let loaded = load_weights::<f64>(&path).unwrap();
        assert_eq!(loaded, w);

        save_weights(&loaded, &path).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn truncated_file_is_format_error() {
        let cfg = small_cfg();
        let w = init_random::<f32>(&cfg).unwrap();
        let path = tmp("truncated");
        save_weights(&w, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 200);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_weights::<f32>(&path), Err(Error::Format(_))));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn bit_flip_is_checksum_error() {
        let cfg = small_cfg();
        let w = init_random::<f32>(&cfg).unwrap();
        let path = tmp("bitflip");
        save_weights(&w, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() - 100;
        bytes[mid] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_weights::<f32>(&path),
            Err(Error::Checksum(_))
        ));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn bad_magic_is_format_error() {
        let path = tmp("magic");
        std::fs::write(&path, b"NOPE0000000000000000").unwrap();
        assert!(matches!(load_weights::<f32>(&path), Err(Error::Format(_))));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn shape_mismatch_names_the_tensor() {
        let cfg = small_cfg();
        let w = init_random::<f64>(&cfg).unwrap();
        let path = tmp("shape");
        save_weights(&w, &path).unwrap();

        // rewrite the header with a wrong shape for one tensor, keeping
        // offsets and payload intact
        let bytes = std::fs::read(&path).unwrap();
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let mut header: serde_json::Value =
            serde_json::from_slice(&bytes[16..16 + header_len]).unwrap();
        let tensors = header["tensors"].as_array_mut().unwrap();
        let target = tensors
            .iter_mut()
            .find(|t| t["name"] == "blocks/0/heads/1/w_q")
            .unwrap();
        target["shape"] = serde_json::json!([2, 2]);
        let new_header = serde_json::to_vec(&header).unwrap();

        let mut out = Vec::new();
        out.extend_from_slice(&bytes[0..8]);
        out.extend_from_slice(&(new_header.len() as u64).to_le_bytes());
        out.extend_from_slice(&new_header);
        out.extend_from_slice(&bytes[16 + header_len..]);
        std::fs::write(&path, out).unwrap();

        let err = load_weights::<f64>(&path).unwrap_err();
        match err {
            Error::Format(msg) => assert!(msg.contains("blocks/0/heads/1/w_q"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn dtype_dispatch_loads_either_precision() {
        let cfg = small_cfg();
        let path = tmp("dispatch");
        save_weights(&init_random::<f32>(&cfg).unwrap(), &path).unwrap();
        assert!(matches!(
            load_weights_any(&path).unwrap(),
            LoadedModel::F32(_)
        ));
        save_weights(&init_random::<f64>(&cfg).unwrap(), &path).unwrap();
        assert!(matches!(
            load_weights_any(&path).unwrap(),
            LoadedModel::F64(_)
        ));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn cache_round_trip_restores_every_field() {
        let cfg = small_cfg();
        let lcfg = cfg.layer_config();
        let w = init_random::<f64>(&cfg).unwrap();
        let head = &w.blocks[0].mix.heads[0];
        let mut prompt = Matrix::<f64>::zeros(5, 4);
        for (i, v) in prompt.data_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let (mut state, _) = prefill(&prompt, head, &lcfg).unwrap();
        for step in 0..20 {
            let x = [0.1 * step as f64, -0.2, 0.3, 0.05];
            decode_step(&mut state, &x, head, &lcfg).unwrap();
        }

        let path = tmp("cache");
        save_cache_state(&state, &path).unwrap();
        let restored = load_cache_state::<f64>(&path).unwrap();
        assert_eq!(restored.step(), state.step());
        assert_eq!(restored.v_buf(), state.v_buf());
        assert_eq!(restored.q_buf(), state.q_buf());
        assert_eq!(restored.sum_q(), state.sum_q());
        assert!(restored.prefix_fft().max_abs_diff(state.prefix_fft()) == 0.0);

        // byte-exact second save
        let first = std::fs::read(&path).unwrap();
        save_cache_state(&restored, &path).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
        std::fs::remove_file(&path).ok();
    }
}
