use std::fmt::Write as _;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{display_columns, paint, render_view, window_size, Painter, RenderError, RenderOptions, Rgb, RgbImage};
use crate::transform::View;
use crate::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    Png,
    Svg,
}

impl ImageFormat {
    pub fn mime(self) -> &'static str {
        match self {
            ImageFormat::Png => "image/png",
            ImageFormat::Svg => "image/svg+xml",
        }
    }
}

impl FromStr for ImageFormat {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "png" => Ok(ImageFormat::Png),
            "svg" => Ok(ImageFormat::Svg),
            _ => Err(RenderError::InvalidFormat(s.to_string())),
        }
    }
}

/// Part of the view to export. Column ranges index display columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Region {
    Full,
    Visible { rows: Range<usize>, cols: Range<usize> },
}

impl Region {
    fn resolve(&self, view: &View, opts: &RenderOptions) -> (Range<usize>, Range<usize>) {
        match self {
            Region::Full => (0..view.n_rows(), 0..display_columns(view, opts.encoding).len()),
            Region::Visible { rows, cols } => (rows.clone(), cols.clone()),
        }
    }
}

/// Encode an image as an 8-bit RGB PNG with fixed settings, so equal
/// images give equal bytes.
pub fn encode_png(image: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width, image.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_compression(png::Compression::Balanced);
        encoder.set_filter(png::Filter::Adaptive);
        let mut writer = encoder.write_header().expect("writing to a Vec cannot fail");
        writer.write_image_data(&image.pixels).expect("pixel buffer matches the header");
    }
    out
}

struct SvgPainter {
    body: String,
    /// Line segments grouped by stroke color, in first-use order.
    paths: Vec<(Rgb, String)>,
}

impl SvgPainter {
    fn path(&mut self, color: Rgb) -> &mut String {
        let i = match self.paths.iter().position(|(c, _)| *c == color) {
            Some(i) => i,
            None => {
                self.paths.push((color, String::new()));
                self.paths.len() - 1
            }
        };
        &mut self.paths[i].1
    }
}

impl Painter for SvgPainter {
    fn fill(&mut self, x: u32, y: u32, w: u32, h: u32, color: Rgb, bar: bool) {
        if w == 0 || h == 0 {
            return;
        }
        let class = if bar { r#" class="bar""# } else { "" };
        let _ = writeln!(self.body, r#"<rect{class} x="{x}" y="{y}" width="{w}" height="{h}" fill="{color}"/>"#);
    }

    fn hline(&mut self, x: u32, y: u32, len: u32, color: Rgb) {
        let _ = write!(self.path(color), "M{x} {y}.5h{len}");
    }

    fn vline(&mut self, x: u32, y: u32, len: u32, color: Rgb) {
        let _ = write!(self.path(color), "M{x}.5 {y}v{len}");
    }
}

/// Vector rendering of a window: one `<rect>` per cell, one extra `<rect
/// class="bar">` per drawn frequency bar, and grid and selection lines as
/// `<path>` elements.
pub fn render_svg(
    dataset: &Dataset,
    view: &View,
    opts: &RenderOptions,
    rows: Range<usize>,
    cols: Range<usize>,
) -> Result<String, RenderError> {
    let (w, h) = window_size(view, opts, &rows, &cols)?;
    let mut painter = SvgPainter { body: String::new(), paths: Vec::new() };
    paint(dataset, view, opts, rows, cols, &mut painter)?;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" shape-rendering=\"crispEdges\">\n"
    );
    out.push_str(&painter.body);
    for (color, d) in &painter.paths {
        let _ = writeln!(out, r#"<path d="{d}" stroke="{color}" stroke-width="1" fill="none"/>"#);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Render and encode a region of the view. The CLI and the HTTP service
/// both export through this function.
pub fn export_image(
    dataset: &Dataset,
    view: &View,
    opts: &RenderOptions,
    format: ImageFormat,
    region: &Region,
) -> Result<Vec<u8>, RenderError> {
    let (rows, cols) = region.resolve(view, opts);
    match format {
        ImageFormat::Png => Ok(encode_png(&render_view(dataset, view, opts, rows, cols)?)),
        ImageFormat::Svg => Ok(render_svg(dataset, view, opts, rows, cols)?.into_bytes()),
    }
}
