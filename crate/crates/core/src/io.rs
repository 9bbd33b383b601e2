//! Point CSV ingestion and the serialized outputs.
//!
//! JSON floats are always written with 17 significant digits in exponent form
//! (`1.2345678901234567e-3`), so identical runs produce identical bytes and
//! every value round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::clusters::DensityRaster;
use crate::{Error, Result};

/// Reads `dim` numeric columns per row. Lines starting with `#` and blank
/// lines are skipped; the first data line may be a header.
pub fn read_points_csv(path: &Path, dim: usize) -> Result<Vec<f64>> {
    let file = File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_points(file, path, dim)
}

pub fn read_points<R: Read>(reader: R, label: &Path, dim: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: label.to_path_buf(),
        line,
        msg,
    };
    let mut coords = Vec::new();
    let mut first = true;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let is_first = std::mem::replace(&mut first, false);
        let values = match values {
            Ok(v) => v,
            Err(_) if is_first => continue,
            Err(e) => return Err(parse_err(line, format!("not a number: {e}"))),
        };
        if values.len() != dim {
            return Err(parse_err(line, format!("expected {dim} columns, found {}", values.len())));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(parse_err(line, format!("non-finite coordinate {x}")));
        }
        coords.extend(values);
    }
    if coords.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(coords)
}

/// Writes points with a header row (`x` or `x,y`). Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_points_csv<W: Write>(mut out: W, dim: usize, coords: &[f64]) -> Result<()> {
    let header = ["x", "y"][..dim].join(",");
    writeln!(out, "{header}")?;
    for p in coords.chunks(dim) {
        let row: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Pretty-printed JSON with fixed-precision floats.
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(out: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(out, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    ser.into_inner().write_all(b"\n")?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_json(&mut out, value)?;
    out.flush()?;
    Ok(())
}

/// Raster as CSV: `#` header lines with the grid metadata, then one line per
/// row of constant `y` (a single line in 1D).
pub fn write_raster_csv<W: Write>(mut out: W, raster: &DensityRaster) -> Result<()> {
    let bounds: Vec<String> = raster
        .bounds
        .iter()
        .flat_map(|b| [format!("{:?}", b.lo), format!("{:?}", b.hi)])
        .collect();
    let res: Vec<String> = raster.resolution.iter().map(usize::to_string).collect();
    writeln!(out, "# dim={}", raster.dim)?;
    writeln!(out, "# bounds={}", bounds.join(","))?;
    writeln!(out, "# resolution={}", res.join(","))?;
    writeln!(out, "# layout=row-major, row index along y, cell centers")?;
    for row in raster.values.chunks(raster.resolution[0]) {
        let cols: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cols.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RasterSidecar<'a> {
    dim: usize,
    bounds: &'a [crate::geometry::Interval],
    resolution: &'a [usize],
    dtype: &'static str,
    byte_order: &'static str,
    layout: &'static str,
    data_file: String,
}

/// Little-endian `f64` values plus a JSON sidecar describing the grid.
pub fn write_raster_binary(data_path: &Path, sidecar_path: &Path, raster: &DensityRaster) -> Result<()> {
    let mut out = BufWriter::new(File::create(data_path)?);
    for v in &raster.values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    write_json_file(
        sidecar_path,
        &RasterSidecar {
            dim: raster.dim,
            bounds: &raster.bounds,
            resolution: &raster.resolution,
            dtype: "float64",
            byte_order: "little",
            layout: "row-major, row index along y, cell centers",
            data_file: data_path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
        },
    )
}
