//! Plain-text network files.
//!
//! ```text
//! candyman-mlp 1
//! layer_dims 2 32 1
//! activations elu linear
//! weights 0 32 2
//! <32 lines of 2 values, row-major>
//! biases 0 32
//! <one line of 32 values>
//! weights 1 1 32
//! ...
//! end
//! ```
//!
//! Numbers are written as `{:.16e}` (17 significant digits), which round-trips
//! every `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::neuralnet::mlp::{Activation, Mlp};

pub const MLP_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "candyman-mlp";

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn mlp_to_string(mlp: &Mlp) -> String {
    let mut s = String::new();
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(" ");
    writeln!(s, "{MAGIC} {MLP_FORMAT_VERSION}").unwrap();
    writeln!(
        s,
        "layer_dims {}",
        join(&mut mlp.layer_dims().iter().map(|d| d.to_string()))
    )
    .unwrap();
    writeln!(
        s,
        "activations {}",
        join(&mut mlp.activations().iter().map(|a| a.to_string()))
    )
    .unwrap();
    for (l, w) in mlp.layer_dims().windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        writeln!(s, "weights {l} {n_out} {n_in}").unwrap();
        for row in mlp.weights()[l].chunks(n_in) {
            writeln!(s, "{}", join(&mut row.iter().map(|v| format_f64(*v)))).unwrap();
        }
        writeln!(s, "biases {l} {n_out}").unwrap();
        writeln!(
            s,
            "{}",
            join(&mut mlp.biases()[l].iter().map(|v| format_f64(*v)))
        )
        .unwrap();
    }
    s.push_str("end\n");
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Data(format!("network file line {}: {}", line + 1, msg.into()))
}

fn parse_numbers(line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(line_no, format!("bad number `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expected {
        return Err(parse_err(
            line_no,
            format!("expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

pub fn mlp_from_str(text: &str) -> Result<Mlp> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let mut next = |what: &str| -> Result<(usize, &str)> {
        let idx = i;
        i += 1;
        lines
            .get(idx)
            .map(|l| (idx, *l))
            .ok_or_else(|| parse_err(idx, format!("unexpected end of file, wanted {what}")))
    };

    let (n, header) = next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(parse_err(n, "not a network file"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(n, "missing version"))?;
    if version != MLP_FORMAT_VERSION {
        return Err(parse_err(n, format!("unsupported version {version}")));
    }

    let (n, dims_line) = next("layer_dims")?;
    let dims = dims_line
        .strip_prefix("layer_dims")
        .ok_or_else(|| parse_err(n, "expected layer_dims"))?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(n, format!("bad width `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    let (n, acts_line) = next("activations")?;
    let activations = acts_line
        .strip_prefix("activations")
        .ok_or_else(|| parse_err(n, "expected activations"))?
        .split_whitespace()
        .map(|t| t.parse::<Activation>())
        .collect::<Result<Vec<_>>>()?;
    if dims.len() < 2 {
        return Err(parse_err(n, "need at least two layer widths"));
    }

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, w) in dims.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let (n, head) = next("weights header")?;
        if head.split_whitespace().collect::<Vec<_>>()
            != ["weights", &l.to_string(), &n_out.to_string(), &n_in.to_string()]
        {
            return Err(parse_err(n, format!("expected `weights {l} {n_out} {n_in}`")));
        }
        let mut wl = Vec::with_capacity(n_in * n_out);
        for _ in 0..n_out {
            let (n, row) = next("weight row")?;
            wl.extend(parse_numbers(n, row, n_in)?);
        }
        weights.push(wl);
        let (n, head) = next("biases header")?;
        if head.split_whitespace().collect::<Vec<_>>() != ["biases", &l.to_string(), &n_out.to_string()] {
            return Err(parse_err(n, format!("expected `biases {l} {n_out}`")));
        }
        let (n, row) = next("bias row")?;
        biases.push(parse_numbers(n, row, n_out)?);
    }
    let (n, end) = next("end")?;
    if end.trim() != "end" {
        return Err(parse_err(n, "expected end"));
    }
    Mlp::from_parts(dims, activations, weights, biases)
}

pub fn save_mlp(mlp: &Mlp, path: &Path) -> Result<()> {
    std::fs::write(path, mlp_to_string(mlp))?;
    Ok(())
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    let text = std::fs::read_to_string(path)?;
    mlp_from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
