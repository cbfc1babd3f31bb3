//! Per-pmid response cache: `efetch/<pmid>.xml` and `icite/<pmid>.json`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

fn valid_pmid(pmid: &str) -> bool {
    !pmid.is_empty() && pmid.chars().all(|c| c.is_ascii_alphanumeric())
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn file(&self, kind: &str, pmid: &str, ext: &str) -> Option<PathBuf> {
        valid_pmid(pmid).then(|| self.root.join(kind).join(format!("{pmid}.{ext}")))
    }

    fn read(&self, kind: &str, pmid: &str, ext: &str) -> Option<String> {
        fs::read_to_string(self.file(kind, pmid, ext)?).ok()
    }

    fn write(&self, kind: &str, pmid: &str, ext: &str, body: &str) -> io::Result<()> {
        let Some(path) = self.file(kind, pmid, ext) else {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("bad pmid {pmid:?}"),
            ));
        };
        fs::create_dir_all(path.parent().expect("cache file has a parent"))?;
        // write-then-rename so a crash never leaves a truncated entry
        let tmp = path.with_extension(format!("{ext}.tmp"));
        fs::write(&tmp, body)?;
        fs::rename(tmp, path)
    }

    pub fn article(&self, pmid: &str) -> Option<String> {
        self.read("efetch", pmid, "xml")
    }

    pub fn store_article(&self, pmid: &str, xml: &str) -> io::Result<()> {
        self.write("efetch", pmid, "xml", xml)
    }

    pub fn citations(&self, pmid: &str) -> Option<u64> {
        let v: serde_json::Value = serde_json::from_str(&self.read("icite", pmid, "json")?).ok()?;
        v.get("citation_count")?.as_u64()
    }

    pub fn store_citations(&self, pmid: &str, count: u64) -> io::Result<()> {
        let body = serde_json::json!({ "pmid": pmid, "citation_count": count }).to_string();
        self.write("icite", pmid, "json", &body)
    }
}
