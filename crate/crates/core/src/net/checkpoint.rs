//! Weight checkpoints as self-describing text.
//!
//! The format is line-oriented: a header naming the format version, the
//! layer sizes, the activation, then each parameter block as a row-major
//! list of doubles printed with 17 significant digits, and finally a SHA-256
//! checksum over everything above it. Seventeen digits pin every f64
//! exactly, so a save/load round trip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::activation::{ActivationKind, ActivationSpec};
use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::NetworkWeights;

const HEADER: &str = "emrl-weights v1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_slice(vs: &[f64]) -> String {
    vs.iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Serialize a network to the checkpoint text format.
pub fn write_weights(net: &NetworkWeights) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(
        s,
        "layers: {}",
        net.layer_sizes()
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let kind = match net.activation().kind {
        ActivationKind::SymmetricSigmoid => "symmetric_sigmoid",
        ActivationKind::Linear => "linear",
    };
    let _ = writeln!(s, "activation: {kind} {}", fmt_f64(net.activation().output_scale));
    let _ = writeln!(s, "recurrent: {}", net.is_recurrent());
    let _ = writeln!(s, "train_bias: {}", net.train_bias());
    for l in 0..net.num_layers() {
        let _ = writeln!(s, "w{l}: {}", fmt_slice(net.weight(l).data()));
        let _ = writeln!(s, "b{l}: {}", fmt_slice(net.bias(l)));
    }
    if let Some(rec) = net.recurrent() {
        let _ = writeln!(s, "rec: {}", fmt_slice(rec.data()));
    }
    let digest = Sha256::digest(s.as_bytes());
    let _ = writeln!(s, "checksum: {}", hex_digest(&digest));
    s
}

pub fn save_weights(net: &NetworkWeights, path: &Path) -> Result<()> {
    fs::write(path, write_weights(net))?;
    Ok(())
}

/// Parse a checkpoint document, verifying its checksum and shapes.
pub fn read_weights(text: &str) -> Result<NetworkWeights> {
    let body_end = text
        .rfind("checksum: ")
        .ok_or_else(|| Error::Integrity("checkpoint is missing its checksum line".into()))?;
    let body = &text[..body_end];
    let stored = text[body_end..]
        .trim_start_matches("checksum: ")
        .trim();
    let digest = hex_digest(&Sha256::digest(body.as_bytes()));
    if stored != digest {
        return Err(Error::Integrity(
            "checkpoint checksum mismatch (file corrupted or edited)".into(),
        ));
    }

    let mut lines = body.lines();
    let header = lines.next().unwrap_or_default();
    if header != HEADER {
        return Err(Error::Integrity(format!(
            "unknown checkpoint header {header:?}"
        )));
    }

    let mut layer_sizes: Vec<usize> = Vec::new();
    let mut activation = None;
    let mut recurrent_flag = false;
    let mut train_bias = true;
    let mut blocks: Vec<(String, Vec<f64>)> = Vec::new();
    for line in lines {
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::Integrity(format!("malformed checkpoint line {line:?}")))?;
        let value = value.trim();
        match key {
            "layers" => {
                layer_sizes = value
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<usize>().map_err(|_| {
                            Error::Integrity(format!("bad layer size token {t:?}"))
                        })
                    })
                    .collect::<Result<_>>()?;
            }
            "activation" => {
                let mut parts = value.split_whitespace();
                let kind = match parts.next() {
                    Some("symmetric_sigmoid") => ActivationKind::SymmetricSigmoid,
                    Some("linear") => ActivationKind::Linear,
                    other => {
                        return Err(Error::Integrity(format!(
                            "unknown activation kind {other:?}"
                        )))
                    }
                };
                let scale = parse_f64(parts.next().unwrap_or_default())?;
                activation = Some(ActivationSpec {
                    kind,
                    output_scale: scale,
                });
            }
            "recurrent" => recurrent_flag = value == "true",
            "train_bias" => train_bias = value == "true",
            _ => {
                let values = value
                    .split_whitespace()
                    .map(parse_f64)
                    .collect::<Result<Vec<f64>>>()?;
                blocks.push((key.to_string(), values));
            }
        }
    }

    let activation = activation
        .ok_or_else(|| Error::Integrity("checkpoint is missing the activation line".into()))?;
    let mut net = NetworkWeights::zeros(&layer_sizes, recurrent_flag, activation)?;
    net.set_train_bias(train_bias);
    for (key, values) in blocks {
        if let Some(l) = key.strip_prefix('w').and_then(|t| t.parse::<usize>().ok()) {
            fill_mat(net.weight_mut(l), &values, &key)?;
        } else if let Some(l) = key.strip_prefix('b').and_then(|t| t.parse::<usize>().ok()) {
            if values.len() != net.bias(l).len() {
                return Err(Error::Integrity(format!(
                    "block {key} has {} values, expected {}",
                    values.len(),
                    net.bias(l).len()
                )));
            }
            net.bias_mut(l).copy_from_slice(&values);
        } else if key == "rec" {
            let rec = net.recurrent_mut().ok_or_else(|| {
                Error::Integrity("rec block present but recurrent flag is false".into())
            })?;
            let expected = rec.rows() * rec.cols();
            if values.len() != expected {
                return Err(Error::Integrity(format!(
                    "rec block has {} values, expected {expected}",
                    values.len()
                )));
            }
            rec.data_mut().copy_from_slice(&values);
        } else {
            return Err(Error::Integrity(format!("unknown checkpoint block {key:?}")));
        }
    }
    Ok(net)
}

pub fn load_weights(path: &Path) -> Result<NetworkWeights> {
    let text = fs::read_to_string(path)?;
    read_weights(&text)
}

fn fill_mat(mat: &mut Mat, values: &[f64], key: &str) -> Result<()> {
    let expected = mat.rows() * mat.cols();
    if values.len() != expected {
        return Err(Error::Integrity(format!(
            "block {key} has {} values, expected {expected}",
            values.len()
        )));
    }
    mat.data_mut().copy_from_slice(values);
    Ok(())
}

fn parse_f64(token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| Error::Integrity(format!("bad float token {token:?}")))
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_random, RecurrentInit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_net() -> NetworkWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        init_random(
            &[3, 4, 2],
            Some(RecurrentInit::IdentityFeedback { gain: 1.0 }),
            ActivationSpec::symmetric_sigmoid(),
            0.7,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = sample_net();
        let text = write_weights(&net);
        let loaded = read_weights(&text).unwrap();
        assert_eq!(net, loaded);
    }

    #[test]
    fn flipped_byte_is_detected() {
        let net = sample_net();
        let mut text = write_weights(&net);
        // Flip one digit inside a weight block.
        let pos = text.find("w0: ").unwrap() + 6;
        let byte = text.as_bytes()[pos];
        let replacement = if byte == b'5' { '6' } else { '5' };
        text.replace_range(pos..pos + 1, &replacement.to_string());
        assert!(matches!(read_weights(&text), Err(Error::Integrity(_))));
    }

    #[test]
    fn missing_checksum_is_rejected() {
        assert!(matches!(
            read_weights("emrl-weights v1\nlayers: 2 2\n"),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.weights");
        let net = sample_net();
        save_weights(&net, &path).unwrap();
        assert_eq!(load_weights(&path).unwrap(), net);
    }
}
