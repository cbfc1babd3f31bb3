use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::embed::ProviderKind;
use crate::provider::ProviderError;

/// Token → vector lookup. Unknown tokens return `None`.
pub trait WordVectorProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn dimension(&self) -> usize;
    fn lookup(&self, tokens: &[&str]) -> Result<Vec<Option<Vec<f32>>>, ProviderError>;
}

/// Word vectors in the word2vec text format: a `<count> <dimension>` header
/// line, then one `<token> <v1> ... <vd>` line per word.
#[derive(Debug, Clone, Default)]
pub struct FileWordVectors {
    dimension: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl FileWordVectors {
    pub fn new(dimension: usize) -> Self {
        FileWordVectors {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        token: impl Into<String>,
        vector: Vec<f32>,
    ) -> Result<(), ProviderError> {
        if vector.len() != self.dimension {
            return Err(ProviderError::Format(format!(
                "word vector of dimension {} (expected {})",
                vector.len(),
                self.dimension
            )));
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn open(path: &Path) -> Result<Self, ProviderError> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| ProviderError::Format(format!("{}: empty file", path.display())))?;
        let mut parts = header.split_whitespace();
        let count: usize = parse_field(parts.next(), "count")?;
        let dimension: usize = parse_field(parts.next(), "dimension")?;
        let mut out = FileWordVectors::new(dimension);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default().to_string();
            let vector = parts
                .map(|p| p.parse::<f32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ProviderError::Format(format!("line {}: {e}", i + 2)))?;
            out.insert(token, vector)?;
        }
        if out.len() != count {
            return Err(ProviderError::Format(format!(
                "{}: header announces {count} words, found {}",
                path.display(),
                out.len()
            )));
        }
        Ok(out)
    }

    /// Write in word2vec text format, tokens sorted.
    pub fn save(&self, path: &Path) -> Result<(), ProviderError> {
        let mut tokens: Vec<&String> = self.vectors.keys().collect();
        tokens.sort();
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "{} {}", tokens.len(), self.dimension)?;
        for t in tokens {
            write!(out, "{t}")?;
            for v in &self.vectors[t] {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn parse_field(s: Option<&str>, name: &str) -> Result<usize, ProviderError> {
    s.and_then(|v| v.parse().ok())
        .ok_or_else(|| ProviderError::Format(format!("bad word2vec header ({name})")))
}

impl WordVectorProvider for FileWordVectors {
    fn kind(&self) -> ProviderKind {
        ProviderKind::FileBacked
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn lookup(&self, tokens: &[&str]) -> Result<Vec<Option<Vec<f32>>>, ProviderError> {
        Ok(tokens
            .iter()
            .map(|t| self.vectors.get(*t).cloned())
            .collect())
    }
}
