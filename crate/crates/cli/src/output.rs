use std::io::Write;
use std::path::Path;

use lpdim::homdim::ScaleRow;
use serde_json::Value;

use crate::Failure;

pub const CSV_HEADER: &str = "# lpdim per_scale v1";

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new("io", format!("{}: {e}", path.display()))
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| io_failure(path, "not a file path"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| io_failure(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| io_failure(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_failure(path, e))
}

pub fn csv_bytes(rows: &[ScaleRow]) -> Result<Vec<u8>, Failure> {
    let mut buf = format!("{CSV_HEADER}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| Failure::new("io", e.to_string()))?;
        }
        w.flush().map_err(|e| Failure::new("io", e.to_string()))?;
    }
    Ok(buf)
}

/// Prints the report, or writes `report.json` (and `per_scale.csv`) under `out`.
pub fn emit(report: &Value, rows: Option<&[ScaleRow]>, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Failure::new("io", e.to_string()))?;
    text.push('\n');
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            write_atomic(&dir.join("report.json"), text.as_bytes())?;
            if let Some(rows) = rows {
                write_atomic(&dir.join("per_scale.csv"), &csv_bytes(rows)?)?;
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = std::env::temp_dir().join(format!("lpdim-out-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_has_versioned_header() {
        let bytes = csv_bytes(&[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{CSV_HEADER}\n"));
    }
}
