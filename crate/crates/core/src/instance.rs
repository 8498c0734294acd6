//! Plain-text instance and estimate files.
//!
//! A file is a header of `key=value` lines followed by `[block]` sections of
//! whitespace-separated numbers written with 17 significant digits, so that
//! loading and re-serializing reproduces the file byte for byte.
//!
//! ```text
//! kind=sparse
//! n=3
//! d=2
//! ...
//! [design]
//! 1.0000000000000000e0 -2.5000000000000000e-1
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::datagen::{LowRankGenSpec, NoiseSpec, SparseGenSpec};
use crate::error::{Error, Result};
use crate::linalg::{LowRankFactors, Matrix, Vector};
use crate::problem::{unflatten_row_major, MatrixProblem, VectorProblem};

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceProblem {
    Sparse(VectorProblem),
    Lowrank(MatrixProblem),
}

/// Generation record kept alongside the data.
#[derive(Debug, Clone, PartialEq)]
pub enum GenRecord {
    Sparse(SparseGenSpec),
    Lowrank(LowRankGenSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub problem: InstanceProblem,
    pub seed: Option<u64>,
    pub spec: Option<GenRecord>,
    pub noise: Option<NoiseSpec>,
    pub corrupted: Vec<usize>,
    /// Per-coordinate design variances, when the design was not isotropic.
    pub design_variances: Option<Vector>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_rows<'a>(out: &mut String, rows: impl Iterator<Item = Vec<f64>> + 'a) {
    for row in rows {
        let line: Vec<String> = row.into_iter().map(num).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

fn push_matrix(out: &mut String, name: &str, m: &Matrix) {
    let _ = writeln!(out, "[{name}]");
    push_rows(out, (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()));
}

fn push_vector(out: &mut String, name: &str, v: &Vector) {
    let _ = writeln!(out, "[{name}]");
    push_rows(out, v.iter().map(|x| vec![*x]));
}

fn json<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("plain data serializes")
}

impl InstanceFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.problem {
            InstanceProblem::Sparse(p) => {
                let _ = writeln!(out, "kind=sparse\nn={}\nd={}", p.n(), p.dim());
            }
            InstanceProblem::Lowrank(p) => {
                let (d1, d2) = p.shape();
                let _ = writeln!(out, "kind=lowrank\nn={}\nd1={d1}\nd2={d2}", p.n());
            }
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed={seed}");
        }
        match &self.spec {
            Some(GenRecord::Sparse(s)) => {
                let _ = writeln!(out, "spec={}", json(s));
            }
            Some(GenRecord::Lowrank(s)) => {
                let _ = writeln!(out, "spec={}", json(s));
            }
            None => {}
        }
        if let Some(noise) = &self.noise {
            let _ = writeln!(out, "noise={}", json(noise));
        }
        let idx: Vec<String> = self.corrupted.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "corrupted={}", idx.join(","));
        match &self.problem {
            InstanceProblem::Sparse(p) => {
                push_matrix(&mut out, "design", p.design());
                push_vector(&mut out, "responses", p.responses());
                if let Some(t) = p.truth() {
                    push_vector(&mut out, "truth", t);
                }
                if let Some(v) = &self.design_variances {
                    push_vector(&mut out, "design-variances", v);
                }
            }
            InstanceProblem::Lowrank(p) => {
                push_matrix(&mut out, "measurements", p.stacked_design());
                push_vector(&mut out, "responses", p.responses());
                if let Some(t) = p.truth() {
                    push_matrix(&mut out, "truth", t);
                }
                if let Some(v) = &self.design_variances {
                    push_vector(&mut out, "design-variances", v);
                }
            }
        }
        out
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let doc = Document::parse(text, source_name)?;
        let kind = doc.required("kind")?;
        let n: usize = doc.number("n")?;
        let seed = doc.optional("seed").map(|_| doc.number::<u64>("seed")).transpose()?;
        let noise = doc.optional("noise").map(|_| doc.json::<NoiseSpec>("noise")).transpose()?;
        let corrupted = match doc.optional("corrupted") {
            None | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| doc.error_at_key("corrupted", "indices must be nonnegative integers"))?,
        };
        let (problem, spec, width) = match kind {
            "sparse" => {
                let d: usize = doc.number("d")?;
                let design = doc.matrix("design", n, d)?;
                let y = doc.vector("responses", n)?;
                let truth = doc.has_block("truth").then(|| doc.vector("truth", d)).transpose()?;
                let spec = doc.optional("spec").map(|_| doc.json("spec").map(GenRecord::Sparse)).transpose()?;
                (InstanceProblem::Sparse(VectorProblem::new(design, y, truth)?), spec, d)
            }
            "lowrank" => {
                let d1: usize = doc.number("d1")?;
                let d2: usize = doc.number("d2")?;
                let design = doc.matrix("measurements", n, d1 * d2)?;
                let y = doc.vector("responses", n)?;
                let truth = doc.has_block("truth").then(|| doc.matrix("truth", d1, d2)).transpose()?;
                let spec = doc.optional("spec").map(|_| doc.json("spec").map(GenRecord::Lowrank)).transpose()?;
                (
                    InstanceProblem::Lowrank(MatrixProblem::from_stacked(d1, d2, design, y, truth)?),
                    spec,
                    d1 * d2,
                )
            }
            other => return Err(doc.error_at_key("kind", &format!("unknown kind '{other}'"))),
        };
        if corrupted.iter().any(|&i| i >= n) {
            return Err(doc.error_at_key("corrupted", "index out of range"));
        }
        let design_variances = doc
            .has_block("design-variances")
            .then(|| doc.vector("design-variances", width))
            .transpose()?;
        Ok(Self {
            problem,
            seed,
            spec,
            noise,
            corrupted,
            design_variances,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text_file(path, &self.to_text())
    }
}

/// A fitted estimate: a sparse vector or a rank-r factorization.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Sparse(Vector),
    Lowrank(LowRankFactors),
}

impl Estimate {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            Estimate::Sparse(b) => {
                let _ = writeln!(out, "kind=sparse-estimate\nd={}", b.len());
                push_vector(&mut out, "beta", b);
            }
            Estimate::Lowrank(f) => {
                let _ = writeln!(out, "kind=lowrank-estimate\nd1={}\nd2={}\nr={}", f.rows(), f.cols(), f.rank_bound());
                push_matrix(&mut out, "u", &f.u);
                push_vector(&mut out, "s", &f.s);
                push_matrix(&mut out, "v", &f.v);
            }
        }
        out
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let doc = Document::parse(text, source_name)?;
        match doc.required("kind")? {
            "sparse-estimate" => {
                let d: usize = doc.number("d")?;
                Ok(Estimate::Sparse(doc.vector("beta", d)?))
            }
            "lowrank-estimate" => {
                let (d1, d2, r): (usize, usize, usize) = (doc.number("d1")?, doc.number("d2")?, doc.number("r")?);
                let u = doc.matrix("u", d1, r)?;
                let s = doc.vector("s", r)?;
                let v = doc.matrix("v", d2, r)?;
                Ok(Estimate::Lowrank(LowRankFactors::new(u, s, v)?))
            }
            other => Err(doc.error_at_key("kind", &format!("unknown estimate kind '{other}'"))),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text_file(path, &self.to_text())
    }

    /// Dense form; a single column for sparse estimates.
    pub fn dense(&self) -> Matrix {
        match self {
            Estimate::Sparse(b) => Matrix::from_column_slice(b.len(), 1, b.as_slice()),
            Estimate::Lowrank(f) => f.reconstruct(),
        }
    }
}

pub fn write_text_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A named block: name, header line, then `(line, text)` rows.
type Block<'a> = (&'a str, u64, Vec<(u64, &'a str)>);

/// Header and blocks of a parsed file, with 1-based source lines.
struct Document<'a> {
    source_name: String,
    header: Vec<(&'a str, &'a str, u64)>,
    blocks: Vec<Block<'a>>,
}

impl<'a> Document<'a> {
    fn parse(text: &'a str, source_name: &str) -> Result<Self> {
        let mut doc = Document {
            source_name: source_name.to_string(),
            header: Vec::new(),
            blocks: Vec::new(),
        };
        for (k, line) in text.lines().enumerate() {
            let lineno = k as u64 + 1;
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if doc.blocks.iter().any(|b| b.0 == name) {
                    return Err(doc.error(lineno, &format!("duplicate block [{name}]")));
                }
                doc.blocks.push((name, lineno, Vec::new()));
            } else if let Some(block) = doc.blocks.last_mut() {
                if !line.trim().is_empty() {
                    block.2.push((lineno, line));
                }
            } else if !line.trim().is_empty() {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| doc.error(lineno, "expected key=value"))?;
                if doc.header.iter().any(|h| h.0 == key) {
                    return Err(doc.error(lineno, &format!("duplicate key '{key}'")));
                }
                doc.header.push((key, value, lineno));
            }
        }
        Ok(doc)
    }

    fn error(&self, line: u64, message: &str) -> Error {
        Error::Parse {
            source_name: self.source_name.clone(),
            line,
            message: message.to_string(),
        }
    }

    fn error_at_key(&self, key: &str, message: &str) -> Error {
        let line = self.header.iter().find(|h| h.0 == key).map_or(0, |h| h.2);
        self.error(line, &format!("{key}: {message}"))
    }

    fn optional(&self, key: &str) -> Option<&'a str> {
        self.header.iter().find(|h| h.0 == key).map(|h| h.1)
    }

    fn required(&self, key: &str) -> Result<&'a str> {
        self.optional(key)
            .ok_or_else(|| self.error(1, &format!("missing header key '{key}'")))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.required(key)?
            .trim()
            .parse()
            .map_err(|_| self.error_at_key(key, "not a valid number"))
    }

    fn json<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        serde_json::from_str(self.required(key)?).map_err(|e| self.error_at_key(key, &e.to_string()))
    }

    fn has_block(&self, name: &str) -> bool {
        self.blocks.iter().any(|b| b.0 == name)
    }

    fn block_values(&self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let (_, start, lines) = self
            .blocks
            .iter()
            .find(|b| b.0 == name)
            .ok_or_else(|| self.error(0, &format!("missing block [{name}]")))?;
        if lines.len() != rows {
            return Err(self.error(*start, &format!("block [{name}] has {} rows, expected {rows}", lines.len())));
        }
        let mut out = Vec::with_capacity(rows * cols);
        for (lineno, line) in lines {
            let before = out.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| self.error(*lineno, &format!("'{tok}' is not a number")))?;
                out.push(v);
            }
            if out.len() - before != cols {
                return Err(self.error(*lineno, &format!("expected {cols} values, found {}", out.len() - before)));
            }
        }
        Ok(out)
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let v = self.block_values(name, rows, cols)?;
        Ok(unflatten_row_major(&v, rows, cols))
    }

    fn vector(&self, name: &str, len: usize) -> Result<Vector> {
        Ok(Vector::from_vec(self.block_values(name, len, 1)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_sparse_problem, DesignSpec, NoiseSetting, SparseTruth};

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, -7.123456789012345e200] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sparse_round_trip_is_byte_identical() {
        let spec = SparseGenSpec {
            truth: SparseTruth::Random {
                d: 6,
                s: 2,
                low: 1.0,
                high: 3.0,
            },
            design: DesignSpec::IidStandardNormal,
            noise: NoiseSetting::none(),
            contamination: None,
            n: 5,
        };
        let inst = gen_sparse_problem(&spec, 7).unwrap();
        let file = InstanceFile {
            problem: InstanceProblem::Sparse(inst.problem),
            seed: Some(7),
            spec: Some(GenRecord::Sparse(spec)),
            noise: Some(inst.noise),
            corrupted: vec![1, 3],
            design_variances: Some(Vector::from_element(6, 0.5)),
        };
        let text = file.to_text();
        let back = InstanceFile::parse(&text, "mem").unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_block_reports_line() {
        let text = "kind=sparse\nn=2\nd=1\n[design]\n1\nx\n[responses]\n1\n2\n";
        match InstanceFile::parse(text, "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
        let short = "kind=sparse\nn=2\nd=2\n[design]\n1 2\n3\n[responses]\n1\n2\n";
        assert!(matches!(InstanceFile::parse(short, "mem"), Err(Error::Parse { line: 6, .. })));
        assert!(InstanceFile::parse("kind=weird\nn=1\n", "mem").is_err());
    }

    #[test]
    fn estimate_round_trip() {
        let f = crate::linalg::svd_top(&Matrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.5, -1.0, 3.0]), 1).unwrap();
        let e = Estimate::Lowrank(f);
        let text = e.to_text();
        let back = Estimate::parse(&text, "mem").unwrap();
        assert_eq!(back.to_text(), text);
        let b = Estimate::Sparse(Vector::from_vec(vec![0.0, 1.5]));
        assert_eq!(Estimate::parse(&b.to_text(), "mem").unwrap(), b);
    }
}
