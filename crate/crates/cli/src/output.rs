use std::path::Path;

use cs_scan_core::formats::{encode_image, ImageFormat};
use cs_scan_core::Image;

use crate::error::{CliError, CliResult};

/// Writes `bytes` to a temporary sibling and renames it over `path`, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::file(parent, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::file(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::file(path, e)
    })
}

/// Writes an image in the format implied by the extension.
pub fn write_image(path: &Path, image: &Image) -> CliResult<()> {
    let format = ImageFormat::from_path(path).map_err(|e| CliError::file(path, e))?;
    write_atomic(path, &encode_image(image, format)?)
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::file(path, e))
}

/// Formats a float for CSV and manifests with a fixed, round-trippable width.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.6}")
    }
}
