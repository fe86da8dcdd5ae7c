//! Plain-text parameter checkpoints.
//!
//! ```text
//! posa-checkpoint 1
//! input_dim 3
//! hidden_dims 4 4
//! output_dim 2
//! activation tanh
//! count 46
//! <one value per line, shortest round-trip decimal>
//! ```

use std::io::{BufRead, Write};

use super::{Activation, MlpSpec, ParamStore};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "posa-checkpoint";

pub fn save_checkpoint<W: Write>(mut out: W, spec: &MlpSpec, params: &ParamStore) -> Result<()> {
    if spec.param_count() != params.len() {
        return Err(Error::Shape {
            what: "checkpoint parameter count",
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    writeln!(out, "{MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(out, "input_dim {}", spec.input_dim)?;
    let hidden: Vec<String> = spec.hidden_dims.iter().map(|h| h.to_string()).collect();
    writeln!(out, "hidden_dims {}", hidden.join(" "))?;
    writeln!(out, "output_dim {}", spec.output_dim)?;
    writeln!(out, "activation {}", spec.activation.name())?;
    writeln!(out, "count {}", params.len())?;
    for v in params.values() {
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

fn header<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Checkpoint(format!("missing `{key}` line")))?;
    line.strip_prefix(key)
        .map(str::trim)
        .ok_or_else(|| Error::Checkpoint(format!("expected `{key}`, found `{line}`")))
}

fn parse_usize(s: &str, key: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Checkpoint(format!("bad value `{s}` for {key}")))
}

pub fn load_checkpoint<R: BufRead>(input: R) -> Result<(MlpSpec, ParamStore)> {
    let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter().map(String::as_str);
    let version = header(it.next(), MAGIC)?;
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input_dim = parse_usize(header(it.next(), "input_dim")?, "input_dim")?;
    let hidden = header(it.next(), "hidden_dims")?
        .split_whitespace()
        .map(|h| parse_usize(h, "hidden_dims"))
        .collect::<Result<Vec<_>>>()?;
    let output_dim = parse_usize(header(it.next(), "output_dim")?, "output_dim")?;
    let activation = match header(it.next(), "activation")? {
        "tanh" => Activation::Tanh,
        other => return Err(Error::Checkpoint(format!("unknown activation `{other}`"))),
    };
    let count = parse_usize(header(it.next(), "count")?, "count")?;
    let mut spec = MlpSpec::new(input_dim, &hidden, output_dim)?;
    spec.activation = activation;
    if spec.param_count() != count {
        return Err(Error::Checkpoint(format!(
            "count {count} does not match architecture ({})",
            spec.param_count()
        )));
    }
    let values = it
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Checkpoint(format!("bad parameter value `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(Error::Checkpoint(format!(
            "expected {count} values, found {}",
            values.len()
        )));
    }
    Ok((spec, ParamStore::from_values(values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = MlpSpec::new(3, &[4, 5], 2).unwrap();
        let params = spec.init_params(&mut rng);
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &spec, &params).unwrap();
        let (spec2, params2) = load_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params.values(), params2.values());
    }

    #[test]
    fn rejects_truncated_file() {
        let spec = MlpSpec::new(1, &[], 1).unwrap();
        let params = ParamStore::from_values(vec![2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &spec, &params).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        assert!(load_checkpoint(cut.as_bytes()).is_err());
        assert!(load_checkpoint("posa-checkpoint 9\n".as_bytes()).is_err());
    }
}
