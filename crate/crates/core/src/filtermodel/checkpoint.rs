//! Plain-text checkpoint format.
//!
//! ```text
//! rankfilter-checkpoint 1
//! dims <d_model> <hidden> <embed_dim> <max_rank> <raw_features>
//! tensor <name> <rows> <cols>
//! <cols values>            (one line per row)
//! ...
//! end
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a write followed
//! by a read reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{FilterDims, FilterParams, RAW_FEATURES};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ranking::RankEmbedding;

pub const CHECKPOINT_MAGIC: &str = "rankfilter-checkpoint 1";

fn tensor_shapes(dims: FilterDims) -> [(&'static str, usize, usize); 10] {
    let d = dims.d_model;
    let h = dims.hidden;
    [
        ("input_proj", RAW_FEATURES, d),
        ("rank_embedding", dims.max_rank, dims.embed_dim),
        ("wq", d, d),
        ("wk", d, d),
        ("wv", d, d),
        ("wo", d, d),
        ("w1", d, h),
        ("b1", 1, h),
        ("w2", 1, h),
        ("b2", 1, 1),
    ]
}

pub fn encode_checkpoint(params: &FilterParams) -> String {
    let dims = params.dims();
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
    writeln!(
        out,
        "dims {} {} {} {} {}",
        dims.d_model, dims.hidden, dims.embed_dim, dims.max_rank, RAW_FEATURES
    )
    .unwrap();
    for ((name, rows, cols), (_, data)) in tensor_shapes(dims).into_iter().zip(params.tensors()) {
        writeln!(out, "tensor {name} {rows} {cols}").unwrap();
        for r in 0..rows {
            let line: Vec<String> = data[r * cols..(r + 1) * cols]
                .iter()
                .map(|v| format!("{v:?}"))
                .collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
    }
    writeln!(out, "end").unwrap();
    out
}

pub fn write_checkpoint(params: &FilterParams, path: &Path) -> Result<()> {
    params.check_consistent()?;
    std::fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<FilterParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&text, path)
}

pub fn decode_checkpoint(text: &str, path: &Path) -> Result<FilterParams> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of file, expected {what}")))
    };

    let (ln, magic) = next("header")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(parse_err(ln, format!("expected `{CHECKPOINT_MAGIC}`")));
    }
    let (ln, dims_line) = next("dims")?;
    let fields: Vec<&str> = dims_line.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "dims" {
        return Err(parse_err(ln, "expected `dims d_model hidden embed_dim max_rank raw_features`".into()));
    }
    let nums: Vec<usize> = fields[1..]
        .iter()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(ln, format!("bad dimension: {e}")))?;
    if nums[..4].contains(&0) {
        return Err(parse_err(ln, "dimensions must be positive".into()));
    }
    if nums[4] != RAW_FEATURES {
        return Err(Error::DimensionMismatch {
            context: format!("{} raw feature width", path.display()),
            expected: RAW_FEATURES.to_string(),
            found: nums[4].to_string(),
        });
    }
    let dims = FilterDims {
        d_model: nums[0],
        hidden: nums[1],
        embed_dim: nums[2],
        max_rank: nums[3],
    };

    let mut tensors: Vec<Vec<f64>> = Vec::with_capacity(10);
    for (name, rows, cols) in tensor_shapes(dims) {
        let (ln, header) = next(name)?;
        let expected = format!("tensor {name} {rows} {cols}");
        if header != expected {
            return Err(parse_err(ln, format!("expected `{expected}`, found `{header}`")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) = next(name)?;
            let before = data.len();
            for tok in row.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(ln, format!("bad number `{tok}` in {name}")))?;
                if !v.is_finite() {
                    return Err(parse_err(ln, format!("non-finite value in {name}")));
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(parse_err(
                    ln,
                    format!("{name}: expected {cols} values, found {}", data.len() - before),
                ));
            }
        }
        tensors.push(data);
    }
    let (ln, end) = next("end")?;
    if end != "end" {
        return Err(parse_err(ln, "expected `end`".into()));
    }

    let mut it = tensors.into_iter();
    let mut take = || it.next().unwrap();
    let d = dims.d_model;
    let h = dims.hidden;
    let params = FilterParams {
        input_proj: Matrix::from_vec(RAW_FEATURES, d, take()),
        rank: RankEmbedding::from_table(Matrix::from_vec(dims.max_rank, dims.embed_dim, take())),
        wq: Matrix::from_vec(d, d, take()),
        wk: Matrix::from_vec(d, d, take()),
        wv: Matrix::from_vec(d, d, take()),
        wo: Matrix::from_vec(d, d, take()),
        w1: Matrix::from_vec(d, h, take()),
        b1: take(),
        w2: take(),
        b2: take()[0],
    };
    Ok(params)
}
