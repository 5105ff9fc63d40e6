//! Artifact emission: JSON documents and CSV tables with a JSON footer,
//! written atomically when a path is given.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// `{"schema_version": 1, "command": ..., <body fields>}`.
pub fn json_document<T: Serialize>(command: &str, body: &T) -> Result<String> {
    let mut value = serde_json::to_value(body)?;
    let map = match value {
        serde_json::Value::Object(ref mut m) => std::mem::take(m),
        other => {
            let mut m = serde_json::Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), SCHEMA_VERSION.into());
    doc.insert("command".into(), command.into());
    doc.extend(map);
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc))?;
    text.push('\n');
    Ok(text)
}

/// Header plus one line per row, then `# {json}` carrying the footer.
pub fn csv_with_footer<R: Serialize, F: Serialize>(command: &str, rows: &[R], footer: &F) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let mut text = String::from_utf8(w.into_inner().context("flushing CSV")?)?;
    let doc = json_document(command, footer)?;
    let compact: serde_json::Value = serde_json::from_str(&doc)?;
    text.push_str("# ");
    text.push_str(&serde_json::to_string(&compact)?);
    text.push('\n');
    Ok(text)
}

/// Writes to a sibling temp file and renames it over `path`, so the target
/// never holds a partial artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temp file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: f64,
        b: i32,
    }

    #[test]
    fn csv_footer_is_versioned_json() {
        let text = csv_with_footer("demo", &[Row { a: 0.5, b: 2 }], &serde_json::json!({"verdict": "x"})).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines[1], "0.5,2");
        let footer: serde_json::Value = serde_json::from_str(lines[2].strip_prefix("# ").unwrap()).unwrap();
        assert_eq!(footer["schema_version"], 1);
        assert_eq!(footer["verdict"], "x");
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, "first").unwrap();
        write_atomic(&p, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
