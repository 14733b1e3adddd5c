//! On-disk formats for every stage artifact.
//!
//! All writers are deterministic: floats use Rust's shortest round-trip
//! formatting, and no timestamps or host data end up in any file.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::boundary_logic::EdgeRatios;
use crate::error::{Error, Result};
use crate::forward_model::IntensityImage;
use crate::fringe_detect::{EdgeKind, FringeMaps};
use crate::path_search::{BlockingStats, Move, PathPlan};
use crate::patterns::ReferenceLibrary;
use crate::reconstruct::Metrics;
use crate::Unit;

fn bad(format: &'static str, detail: impl Into<String>) -> Error {
    Error::Format {
        format,
        detail: detail.into(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn parse<T: std::str::FromStr>(format: &'static str, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| bad(format, format!("cannot parse {field:?}")))
}

/// Data lines of a CSV after checking its header.
fn csv_body<'a>(format: &'static str, text: &'a str, header: &str) -> Result<std::vec::IntoIter<Vec<&'a str>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(bad(format, format!("expected header {header:?}, found {other:?}"))),
    }
    let rows: Vec<Vec<&str>> = lines.filter(|l| !l.trim().is_empty()).map(|l| l.split(',').collect()).collect();
    Ok(rows.into_iter())
}

fn expect_fields(format: &'static str, fields: &[&str], n: usize) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(bad(format, format!("expected {n} fields, found {}", fields.len())))
    }
}

// ---------- PGM ----------

struct Pnm<'a> {
    width: usize,
    height: usize,
    maxval: usize,
    comments: Vec<&'a str>,
    data: &'a [u8],
}

fn parse_pnm(bytes: &[u8]) -> Result<Pnm<'_>> {
    const F: &str = "PGM";
    let mut pos = 0;
    let mut comments = Vec::new();
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(bad(F, "truncated header"));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            let line = std::str::from_utf8(&bytes[pos + 1..end]).map_err(|_| bad(F, "non-UTF-8 comment"))?;
            comments.push(line.trim());
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad(F, "non-ASCII header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad(F, format!("unsupported magic {:?}", fields[0])));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let width: usize = parse(F, fields[1])?;
    let height: usize = parse(F, fields[2])?;
    let maxval: usize = parse(F, fields[3])?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad(F, format!("maxval {maxval} out of range")));
    }
    let sample = if maxval > 255 { 2 } else { 1 };
    let need = width * height * sample;
    let data = bytes.get(pos..pos + need).ok_or_else(|| bad(F, "truncated raster"))?;
    Ok(Pnm { width, height, maxval, comments, data })
}

/// 16-bit PGM, linearly scaled so the image maximum maps to 65535.
/// Grid metadata ride along as header comments.
pub fn write_pgm16(path: &Path, img: &IntensityImage) -> Result<()> {
    let (h, w) = img.data.dim();
    let peak = img.max();
    let scale = if peak > 0.0 { peak / 65535.0 } else { 1.0 };
    let mut out = format!(
        "P5\n# scale={scale}\n# pixels_per_unit={}\n# crop_rows={}\n{w} {h}\n65535\n",
        img.pixels_per_unit, img.crop_rows
    )
    .into_bytes();
    out.reserve(2 * w * h);
    for &v in &img.data {
        let level = (v / scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&level.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pgm16(path: &Path) -> Result<IntensityImage> {
    const F: &str = "PGM";
    let bytes = fs::read(path)?;
    let pnm = parse_pnm(&bytes)?;
    let meta = |key: &str| {
        pnm.comments
            .iter()
            .find_map(|c| c.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .map(str::trim)
    };
    let scale: f64 = meta("scale").map_or(Ok(1.0), |v| parse(F, v))?;
    let pixels_per_unit: usize = meta("pixels_per_unit").map_or(Ok(1), |v| parse(F, v))?;
    let crop_rows: usize = meta("crop_rows").map_or(Ok(0), |v| parse(F, v))?;
    let values: Vec<f64> = if pnm.maxval > 255 {
        pnm.data
            .chunks_exact(2)
            .map(|b| f64::from(u16::from_be_bytes([b[0], b[1]])) * scale)
            .collect()
    } else {
        pnm.data.iter().map(|&b| f64::from(b) * scale).collect()
    };
    let data = Array2::from_shape_vec((pnm.height, pnm.width), values).map_err(|e| bad(F, e.to_string()))?;
    Ok(IntensityImage { data, pixels_per_unit, crop_rows })
}

pub fn write_pgm8(path: &Path, data: &Array2<u8>) -> Result<()> {
    let (h, w) = data.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(data.iter());
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pgm8(path: &Path) -> Result<Array2<u8>> {
    let bytes = fs::read(path)?;
    let pnm = parse_pnm(&bytes)?;
    if pnm.maxval > 255 {
        return Err(bad("PGM", "expected an 8-bit image"));
    }
    Array2::from_shape_vec((pnm.height, pnm.width), pnm.data.to_vec()).map_err(|e| bad("PGM", e.to_string()))
}

/// Min-max stretch of a real image to 8 bits, for diagnostics.
pub fn stretch_to_u8(data: &Array2<f64>) -> Array2<u8> {
    let lo = data.fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = data.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let span = hi - lo;
    data.mapv(|v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
}

// ---------- CSV ----------

pub const SWEEP_HEADER: &str = "delta_phi,radius,relative_intensity";

pub fn write_sweep_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut s = format!("{SWEEP_HEADER}\n");
    for (d, r, i) in rows {
        writeln!(s, "{d},{r},{i}").expect("writing to a String");
    }
    write_text(path, &s)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    const F: &str = "sweep CSV";
    let text = fs::read_to_string(path)?;
    csv_body(F, &text, SWEEP_HEADER)?
        .map(|f| {
            expect_fields(F, &f, 3)?;
            Ok((parse(F, f[0])?, parse(F, f[1])?, parse(F, f[2])?))
        })
        .collect()
}

pub fn write_library_csv(path: &Path, lib: &ReferenceLibrary) -> Result<()> {
    let mut s = String::from("j,ratio_real,ratio_imag\n");
    for (i, z) in lib.entries().iter().enumerate() {
        writeln!(s, "{},{},{}", i + 1, z.re, z.im).expect("writing to a String");
    }
    write_text(path, &s)
}

pub fn read_library_csv(path: &Path) -> Result<ReferenceLibrary> {
    const F: &str = "reference library CSV";
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for f in csv_body(F, &text, "j,ratio_real,ratio_imag")? {
        expect_fields(F, &f, 3)?;
        let j: usize = parse(F, f[0])?;
        if j != entries.len() + 1 {
            return Err(bad(F, format!("entries out of order at j = {j}")));
        }
        entries.push(Complex64::new(parse(F, f[1])?, parse(F, f[2])?));
    }
    Ok(ReferenceLibrary::from_entries(entries))
}

fn push_bool_rows(s: &mut String, m: &Array2<bool>) {
    for row in m.rows() {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
}

fn parse_bool_row(format: &'static str, line: &str) -> Result<Vec<bool>> {
    if line.trim().is_empty() {
        return Ok(Vec::new());
    }
    line.split(',')
        .map(|f| match f.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(bad(format, format!("expected 0 or 1, found {other:?}"))),
        })
        .collect()
}

fn bool_grid(format: &'static str, rows: Vec<Vec<bool>>, cols: usize) -> Result<Array2<bool>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(bad(format, "ragged rows"));
    }
    Array2::from_shape_vec((n, cols), rows.concat()).map_err(|e| bad(format, e.to_string()))
}

/// Both maps of one measurement: a `kind=row,j=<index>` block followed by a
/// `kind=col,j=<index>` block.
pub fn write_fringe_maps(path: &Path, maps: &FringeMaps) -> Result<()> {
    let mut s = String::new();
    for (kind, m) in [(EdgeKind::Horizontal, &maps.row_map), (EdgeKind::Vertical, &maps.col_map)] {
        writeln!(s, "kind={},j={}", kind.name(), maps.index).expect("writing to a String");
        push_bool_rows(&mut s, m);
    }
    write_text(path, &s)
}

pub fn read_fringe_maps(path: &Path) -> Result<FringeMaps> {
    const F: &str = "fringe map CSV";
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    let j: usize = parse(
        F,
        first
            .strip_prefix("kind=row,j=")
            .ok_or_else(|| bad(F, format!("expected kind=row header, found {first:?}")))?,
    )?;
    let mut row_rows = Vec::new();
    let mut col_rows = Vec::new();
    let mut in_col = false;
    for line in text.lines().skip(1) {
        if let Some(jj) = line.strip_prefix("kind=col,j=") {
            if parse::<usize>(F, jj)? != j {
                return Err(bad(F, "measurement index differs between blocks"));
            }
            in_col = true;
            continue;
        }
        let row = parse_bool_row(F, line)?;
        if in_col {
            col_rows.push(row);
        } else {
            row_rows.push(row);
        }
    }
    if !in_col {
        return Err(bad(F, "missing kind=col block"));
    }
    let s1 = row_rows.len();
    let s2 = row_rows.first().map_or(0, Vec::len) + 1;
    let maps = FringeMaps {
        index: j,
        row_map: bool_grid(F, row_rows, s2 - 1)?,
        col_map: bool_grid(F, col_rows, s2)?,
    };
    if maps.col_map.nrows() + 1 != s1 {
        return Err(bad(F, format!("col block has {} rows for {s1} unit rows", maps.col_map.nrows())));
    }
    Ok(maps)
}

/// 0/1 matrix preceded by a `# shape=<rows>,<cols>` line so empty matrices
/// keep their shape.
pub fn write_bool_matrix(path: &Path, m: &Array2<bool>) -> Result<()> {
    let mut s = format!("# shape={},{}\n", m.nrows(), m.ncols());
    push_bool_rows(&mut s, m);
    write_text(path, &s)
}

pub fn read_bool_matrix(path: &Path) -> Result<Array2<bool>> {
    const F: &str = "boolean matrix CSV";
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let shape = lines
        .next()
        .and_then(|l| l.strip_prefix("# shape="))
        .ok_or_else(|| bad(F, "missing shape line"))?;
    let (r, c) = shape.split_once(',').ok_or_else(|| bad(F, "bad shape line"))?;
    let (r, c): (usize, usize) = (parse(F, r)?, parse(F, c)?);
    let rows: Vec<Vec<bool>> = lines.take(r).map(|l| parse_bool_row(F, l)).collect::<Result<_>>()?;
    if rows.len() != r {
        return Err(bad(F, format!("expected {r} rows, found {}", rows.len())));
    }
    bool_grid(F, rows, c)
}

pub const EDGE_RATIO_HEADER: &str = "kind,row,col,ratio_real,ratio_imag,valid";

pub fn write_edge_ratios(path: &Path, ratios: &EdgeRatios) -> Result<()> {
    let mut s = format!("{EDGE_RATIO_HEADER}\n");
    for (kind, m) in [(EdgeKind::Horizontal, &ratios.horizontal), (EdgeKind::Vertical, &ratios.vertical)] {
        for ((r, c), v) in m.indexed_iter() {
            let z = v.unwrap_or_default();
            writeln!(s, "{},{r},{c},{},{},{}", kind.name(), z.re, z.im, u8::from(v.is_some()))
                .expect("writing to a String");
        }
    }
    write_text(path, &s)
}

/// Reads edge ratios for a `rows x cols` unit grid; edges missing from the
/// file are treated as invalid.
pub fn read_edge_ratios(path: &Path, rows: usize, cols: usize) -> Result<EdgeRatios> {
    const F: &str = "edge ratio CSV";
    let text = fs::read_to_string(path)?;
    let mut out = EdgeRatios {
        horizontal: Array2::from_elem((rows, cols.saturating_sub(1)), None),
        vertical: Array2::from_elem((rows.saturating_sub(1), cols), None),
    };
    for f in csv_body(F, &text, EDGE_RATIO_HEADER)? {
        expect_fields(F, &f, 6)?;
        let (r, c): (usize, usize) = (parse(F, f[1])?, parse(F, f[2])?);
        let target = match f[0].trim() {
            "row" => &mut out.horizontal,
            "col" => &mut out.vertical,
            other => return Err(bad(F, format!("unknown kind {other:?}"))),
        };
        let cell = target
            .get_mut([r, c])
            .ok_or_else(|| bad(F, format!("edge ({r}, {c}) outside the {rows}x{cols} grid")))?;
        let valid = match f[5].trim() {
            "1" => true,
            "0" => false,
            other => return Err(bad(F, format!("valid must be 0 or 1, found {other:?}"))),
        };
        *cell = if valid {
            Some(Complex64::new(parse(F, f[3])?, parse(F, f[4])?))
        } else {
            None
        };
    }
    Ok(out)
}

pub fn write_path_plan(path: &Path, plan: &PathPlan) -> Result<()> {
    let (rows, cols) = plan.units();
    let mut s = String::from("row,col,moves\n");
    for r in 0..rows {
        for c in 0..cols {
            let moves: String = match plan.path((r, c)) {
                Some(p) => p.iter().map(|m| m.letter()).collect(),
                None => "X".into(),
            };
            writeln!(s, "{r},{c},{moves}").expect("writing to a String");
        }
    }
    write_text(path, &s)
}

/// The origin is the unit with an empty move string.
pub fn read_path_plan(path: &Path) -> Result<PathPlan> {
    const F: &str = "path plan CSV";
    let text = fs::read_to_string(path)?;
    if !text.starts_with("row,col,moves") {
        return Err(bad(F, "missing header"));
    }
    let mut entries: Vec<(Unit, Option<Vec<Move>>)> = Vec::new();
    for f in text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').collect::<Vec<_>>()) {
        expect_fields(F, &f, 3)?;
        let unit = (parse(F, f[0])?, parse(F, f[1])?);
        let moves = match f[2].trim() {
            "X" => None,
            m => Some(
                m.chars()
                    .map(|ch| Move::from_letter(ch).ok_or_else(|| bad(F, format!("unknown move {ch:?}"))))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        entries.push((unit, moves));
    }
    let rows = entries.iter().map(|e| e.0 .0 + 1).max().unwrap_or(0);
    let cols = entries.iter().map(|e| e.0 .1 + 1).max().unwrap_or(0);
    let origin = entries
        .iter()
        .find(|e| e.1.as_ref().is_some_and(Vec::is_empty))
        .map(|e| e.0)
        .ok_or_else(|| bad(F, "no origin (empty move string)"))?;
    let mut steps = vec![None; rows * cols];
    for ((r, c), m) in entries {
        steps[r * cols + c] = m;
    }
    PathPlan::from_steps(origin, rows, cols, steps)
}

pub const BLOCKING_HEADER: &str = "sigma,trials,single_pass_rate,retry_rate";

pub fn write_blocking_csv(path: &Path, stats: &[BlockingStats]) -> Result<()> {
    let mut s = format!("{BLOCKING_HEADER}\n");
    for b in stats {
        writeln!(s, "{},{},{},{}", b.sigma, b.trials, b.single_pass_block_rate, b.retry_block_rate)
            .expect("writing to a String");
    }
    write_text(path, &s)
}

pub fn read_blocking_csv(path: &Path) -> Result<Vec<BlockingStats>> {
    const F: &str = "blocking CSV";
    let text = fs::read_to_string(path)?;
    csv_body(F, &text, BLOCKING_HEADER)?
        .map(|f| {
            expect_fields(F, &f, 4)?;
            Ok(BlockingStats {
                sigma: parse(F, f[0])?,
                trials: parse(F, f[1])?,
                single_pass_block_rate: parse(F, f[2])?,
                retry_block_rate: parse(F, f[3])?,
            })
        })
        .collect()
}

pub const METRICS_HEADER: &str = "phase_rmse,complex_l2,unknown_frac";

pub fn write_metrics_csv(path: &Path, m: &Metrics) -> Result<()> {
    write_text(path, &format!("{METRICS_HEADER}\n{},{},{}\n", m.phase_rmse, m.complex_l2, m.unknown_frac))
}

pub fn read_metrics_csv(path: &Path) -> Result<Metrics> {
    const F: &str = "metrics CSV";
    let text = fs::read_to_string(path)?;
    let f = csv_body(F, &text, METRICS_HEADER)?
        .next()
        .ok_or_else(|| bad(F, "no data row"))?;
    expect_fields(F, &f, 3)?;
    Ok(Metrics {
        phase_rmse: parse(F, f[0])?,
        complex_l2: parse(F, f[1])?,
        unknown_frac: parse(F, f[2])?,
    })
}

// ---------- CF32 ----------

/// `CF32 <rows> <cols>\n` followed by row-major little-endian `f32` pairs.
pub fn write_cf32(path: &Path, field: &Array2<Complex64>) -> Result<()> {
    let (rows, cols) = field.dim();
    let mut out = format!("CF32 {rows} {cols}\n").into_bytes();
    out.reserve(8 * rows * cols);
    for z in field {
        out.write_all(&(z.re as f32).to_le_bytes())?;
        out.write_all(&(z.im as f32).to_le_bytes())?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_cf32(path: &Path) -> Result<Array2<Complex64>> {
    const F: &str = "CF32";
    let bytes = fs::read(path)?;
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad(F, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad(F, "non-ASCII header"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("CF32") {
        return Err(bad(F, format!("bad magic in {header:?}")));
    }
    let rows: usize = parse(F, parts.next().unwrap_or(""))?;
    let cols: usize = parse(F, parts.next().unwrap_or(""))?;
    let body = &bytes[nl + 1..];
    if body.len() != 8 * rows * cols {
        return Err(bad(F, format!("expected {} payload bytes, found {}", 8 * rows * cols, body.len())));
    }
    let values: Vec<Complex64> = body
        .chunks_exact(8)
        .map(|b| {
            let re = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            let im = f32::from_le_bytes([b[4], b[5], b[6], b[7]]);
            Complex64::new(f64::from(re), f64::from(im))
        })
        .collect();
    Array2::from_shape_vec((rows, cols), values).map_err(|e| bad(F, e.to_string()))
}
