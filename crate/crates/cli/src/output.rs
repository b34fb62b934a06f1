//! CSV/JSON writers. All CSV output is UTF-8 with LF line endings and
//! floats printed with 17 significant digits so values round-trip exactly.

use std::io::Write;
use std::path::Path;

/// Full round-trip float formatting (17 significant digits).
pub fn ff(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), String> {
    let mut buf = String::with_capacity(rows.len() * 64 + header.len() + 1);
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

pub fn write_json(path: &Path, value: &serde_json::Value, pretty: bool) -> Result<(), String> {
    let bytes = if pretty {
        serde_json::to_vec_pretty(value)
    } else {
        serde_json::to_vec(value)
    }
    .map_err(|e| format!("json encode: {e}"))?;
    write_atomic(path, &bytes)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    f.write_all(bytes)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}
