//! Color encodings and rasterization of views.
//!
//! Three encodings map cells to [`ColorRole`]s:
//!
//! * `Nucleotide`: one color per base, white for missing alleles.
//! * `Reference`: per allele column, "matches reference" vs "differs".
//! * `Genotype`: one column per variant, hom-ref / het / hom-alt.
//!
//! Aggregated rows additionally carry an intensity (the consensus
//! frequency), drawn either as reduced saturation or as a bottom-anchored
//! bar. Drawing goes through the [`Painter`] trait so the raster and SVG
//! outputs share one layout pass.

mod color;
mod export;

use std::collections::HashSet;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{Base, Genotype, Slot};
use crate::transform::{AggregatedCell, View, ViewCell, ViewCol};
use crate::Dataset;

pub use color::{
    category_colors, ColorRole, ColorScheme, Rgb, BLACK, BLUE, CATEGORY_PALETTE, GREEN, GRID, RED, WHITE, YELLOW,
};
pub use export::{encode_png, export_image, render_svg, ImageFormat, Region};

/// Rendering is refused above this many pixels.
pub const MAX_PIXELS: u64 = 1 << 28;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("nothing to render: empty window")]
    EmptyRender,
    #[error("window out of range: {0}")]
    OutOfRange(String),
    #[error("variant {0:?} has no known reference base")]
    UnknownReference(String),
    #[error("unsupported image format {0:?}")]
    InvalidFormat(String),
    #[error("invalid render options: {0}")]
    InvalidOptions(String),
    #[error("cell value does not fit the {0:?} encoding")]
    EncodingMismatch(Encoding),
}

impl RenderError {
    pub fn kind(&self) -> &'static str {
        match self {
            RenderError::EmptyRender => "EmptyRender",
            RenderError::OutOfRange(_) => "OutOfRange",
            RenderError::UnknownReference(_) => "UnknownReference",
            RenderError::InvalidFormat(_) => "InvalidFormat",
            RenderError::InvalidOptions(_) => "InvalidOptions",
            RenderError::EncodingMismatch(_) => "EncodingMismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Nucleotide,
    Reference,
    Genotype,
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nucleotide" => Ok(Encoding::Nucleotide),
            "reference" => Ok(Encoding::Reference),
            "genotype" => Ok(Encoding::Genotype),
            _ => Err(format!("unknown encoding {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggStyle {
    #[default]
    Saturation,
    Bar,
}

impl FromStr for AggStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "saturation" => Ok(AggStyle::Saturation),
            "bar" => Ok(AggStyle::Bar),
            _ => Err(format!("unknown aggregation style {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderOptions {
    pub encoding: Encoding,
    pub agg_style: AggStyle,
    pub cell_width: u32,
    pub cell_height: u32,
    pub show_grid: bool,
    pub colors: ColorScheme,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            encoding: Encoding::Nucleotide,
            agg_style: AggStyle::Saturation,
            cell_width: 4,
            cell_height: 4,
            show_grid: false,
            colors: ColorScheme::default(),
        }
    }
}

impl RenderOptions {
    fn validate(&self) -> Result<(), RenderError> {
        if self.cell_width == 0 || self.cell_height == 0 {
            return Err(RenderError::InvalidOptions("cell sizes must be at least 1 px".into()));
        }
        Ok(())
    }

    /// Grid lines only make sense when a cell has interior pixels.
    pub fn grid_visible(&self) -> bool {
        self.show_grid && self.cell_width >= 3 && self.cell_height >= 3
    }
}

/// Exact fraction in [0, 1] driving saturation or bar height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Intensity {
    pub num: u64,
    pub den: u64,
}

impl Intensity {
    pub fn of(cell: &AggregatedCell) -> Intensity {
        Intensity { num: u64::from(cell.count), den: u64::from(cell.total) }
    }

    pub fn fraction(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// `round(fraction * extent)`, ties up.
    pub fn scaled(&self, extent: u32) -> u32 {
        if self.den == 0 {
            return 0;
        }
        ((2 * self.num * u64::from(extent) + self.den) / (2 * self.den)) as u32
    }
}

/// Input to [`encode_cell`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellValue {
    /// One allele column of a subject row.
    Allele(Option<Base>),
    /// Both alleles of a subject at one variant.
    Genotype(Genotype),
    /// One allele column of an aggregated row.
    Aggregated(AggregatedCell),
    /// Paternal and maternal consensus of an aggregated row at one variant.
    AggregatedPair(AggregatedCell, AggregatedCell),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedCell {
    pub role: ColorRole,
    /// Present for aggregated cells with a consensus.
    pub intensity: Option<Intensity>,
}

impl EncodedCell {
    fn plain(role: ColorRole) -> Self {
        EncodedCell { role, intensity: None }
    }
}

fn genotype_role(paternal: Option<Base>, maternal: Option<Base>, reference: Base) -> ColorRole {
    let present: Vec<Base> = [paternal, maternal].into_iter().flatten().collect();
    let diff = present.iter().filter(|&&b| b != reference).count();
    match (present.len(), diff) {
        (0, _) => ColorRole::Missing,
        (_, 0) => ColorRole::HomRef,
        (2, 1) => ColorRole::Het,
        // Both alternate, or a hemizygous alternate call.
        _ => ColorRole::HomAlt,
    }
}

/// Map a cell to its color role under `encoding`.
pub fn encode_cell(encoding: Encoding, value: &CellValue, reference: Option<Base>) -> Result<EncodedCell, RenderError> {
    let need_ref = || reference.ok_or_else(|| RenderError::UnknownReference(String::new()));
    match (encoding, value) {
        (Encoding::Nucleotide, CellValue::Allele(a)) => {
            Ok(EncodedCell::plain(a.map_or(ColorRole::Missing, ColorRole::Base)))
        }
        (Encoding::Nucleotide, CellValue::Aggregated(cell)) => Ok(match cell.consensus {
            Some(b) => EncodedCell { role: ColorRole::Base(b), intensity: Some(Intensity::of(cell)) },
            None => EncodedCell::plain(ColorRole::Missing),
        }),
        (Encoding::Reference, CellValue::Allele(a)) => {
            let r = need_ref()?;
            Ok(EncodedCell::plain(match a {
                None => ColorRole::Missing,
                Some(b) if *b == r => ColorRole::RefMatch,
                Some(_) => ColorRole::RefDiff,
            }))
        }
        (Encoding::Reference, CellValue::Aggregated(cell)) => {
            let r = need_ref()?;
            Ok(match cell.consensus {
                None => EncodedCell::plain(ColorRole::Missing),
                Some(b) => EncodedCell {
                    role: if b == r { ColorRole::RefMatch } else { ColorRole::RefDiff },
                    intensity: Some(Intensity::of(cell)),
                },
            })
        }
        (Encoding::Genotype, CellValue::Genotype(g)) => {
            Ok(EncodedCell::plain(genotype_role(g.paternal, g.maternal, need_ref()?)))
        }
        (Encoding::Genotype, CellValue::Allele(a)) => Ok(EncodedCell::plain(genotype_role(*a, None, need_ref()?))),
        (Encoding::Genotype, CellValue::AggregatedPair(p, m)) => {
            let role = genotype_role(p.consensus, m.consensus, need_ref()?);
            if role == ColorRole::Missing {
                return Ok(EncodedCell::plain(role));
            }
            // Mean of the two consensus frequencies; a missing side is skipped.
            let intensity = match (p.total, m.total) {
                (0, _) => Intensity::of(m),
                (_, 0) => Intensity::of(p),
                (tp, tm) => Intensity {
                    num: u64::from(p.count) * u64::from(tm) + u64::from(m.count) * u64::from(tp),
                    den: 2 * u64::from(tp) * u64::from(tm),
                },
            };
            Ok(EncodedCell { role, intensity: Some(intensity) })
        }
        (encoding, _) => Err(RenderError::EncodingMismatch(encoding)),
    }
}

/// A column as drawn: an allele column, or a whole variant under the
/// genotype encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplayCol {
    Allele(ViewCol),
    Variant(u32),
}

impl DisplayCol {
    pub fn variant(&self) -> u32 {
        match self {
            DisplayCol::Allele(c) => c.variant,
            DisplayCol::Variant(v) => *v,
        }
    }
}

pub fn display_columns(view: &View, encoding: Encoding) -> Vec<DisplayCol> {
    match encoding {
        Encoding::Genotype => view.variants().into_iter().map(DisplayCol::Variant).collect(),
        _ => view.cols().iter().copied().map(DisplayCol::Allele).collect(),
    }
}

/// Value of a view cell under the display column model.
pub fn display_value(dataset: &Dataset, view: &View, row: usize, col: DisplayCol) -> CellValue {
    match col {
        DisplayCol::Allele(c) => match view.allele_cell(dataset, row, c.variant, c.slot) {
            ViewCell::Allele(a) => CellValue::Allele(a),
            ViewCell::Aggregated(a) => CellValue::Aggregated(a),
        },
        DisplayCol::Variant(v) => {
            let p = view.allele_cell(dataset, row, v, Slot::Paternal);
            let m = view.allele_cell(dataset, row, v, Slot::Maternal);
            match (p, m) {
                (ViewCell::Allele(p), ViewCell::Allele(m)) => CellValue::Genotype(Genotype::new(p, m)),
                (ViewCell::Aggregated(p), ViewCell::Aggregated(m)) => CellValue::AggregatedPair(p, m),
                _ => unreachable!("both slots of a row share its kind"),
            }
        }
    }
}

fn encode_display(
    dataset: &Dataset,
    view: &View,
    encoding: Encoding,
    row: usize,
    col: DisplayCol,
) -> Result<EncodedCell, RenderError> {
    let v = col.variant() as usize;
    encode_cell(encoding, &display_value(dataset, view, row, col), dataset.variants.reference(v)).map_err(|e| match e {
        RenderError::UnknownReference(_) => RenderError::UnknownReference(dataset.variants.id(v).to_string()),
        other => other,
    })
}

/// Drawing backend for the shared layout pass.
pub trait Painter {
    /// Solid rectangle. `bar` marks the frequency bar of an aggregated cell.
    fn fill(&mut self, x: u32, y: u32, w: u32, h: u32, color: Rgb, bar: bool);
    fn hline(&mut self, x: u32, y: u32, len: u32, color: Rgb);
    fn vline(&mut self, x: u32, y: u32, len: u32, color: Rgb);
}

fn check_window(what: &str, range: &Range<usize>, len: usize) -> Result<(), RenderError> {
    if range.start > range.end || range.end > len {
        return Err(RenderError::OutOfRange(format!("{what} {}..{} outside 0..{len}", range.start, range.end)));
    }
    Ok(())
}

/// Pixel size of the window `rows x cols` (display columns), validated.
pub fn window_size(
    view: &View,
    opts: &RenderOptions,
    rows: &Range<usize>,
    cols: &Range<usize>,
) -> Result<(u32, u32), RenderError> {
    opts.validate()?;
    check_window("rows", rows, view.n_rows())?;
    check_window("cols", cols, display_columns(view, opts.encoding).len())?;
    if rows.is_empty() || cols.is_empty() {
        return Err(RenderError::EmptyRender);
    }
    let w = cols.len() as u64 * u64::from(opts.cell_width);
    let h = rows.len() as u64 * u64::from(opts.cell_height);
    if w * h > MAX_PIXELS || w > u64::from(u32::MAX) || h > u64::from(u32::MAX) {
        return Err(RenderError::InvalidOptions(format!("{w}x{h} px exceeds the render limit")));
    }
    Ok((w as u32, h as u32))
}

/// Lay out the window through `painter`: cells, then grid, then selection.
pub fn paint(
    dataset: &Dataset,
    view: &View,
    opts: &RenderOptions,
    rows: Range<usize>,
    cols: Range<usize>,
    painter: &mut impl Painter,
) -> Result<(u32, u32), RenderError> {
    let (width, height) = window_size(view, opts, &rows, &cols)?;
    let display = display_columns(view, opts.encoding);
    let (cw, ch) = (opts.cell_width, opts.cell_height);
    let scheme = &opts.colors;

    for (i, r) in rows.clone().enumerate() {
        let y = i as u32 * ch;
        for (j, c) in cols.clone().enumerate() {
            let x = j as u32 * cw;
            let cell = encode_display(dataset, view, opts.encoding, r, display[c])?;
            let color = scheme.color(cell.role);
            match (cell.intensity, opts.agg_style) {
                (None, _) => painter.fill(x, y, cw, ch, color, false),
                (Some(k), AggStyle::Saturation) => {
                    painter.fill(x, y, cw, ch, color.with_saturation(k.num, k.den), false)
                }
                (Some(k), AggStyle::Bar) => {
                    painter.fill(x, y, cw, ch, scheme.missing, false);
                    let bar = k.scaled(ch);
                    painter.fill(x, y + ch - bar, cw, bar, color, true);
                }
            }
        }
    }

    if opts.grid_visible() {
        for i in 0..rows.len() as u32 {
            painter.hline(0, i * ch + ch - 1, width, GRID);
        }
        for j in 0..cols.len() as u32 {
            painter.vline(j * cw + cw - 1, 0, height, GRID);
        }
    }

    let sel = scheme.selection;
    let mut outline = |x: u32, y: u32, w: u32, h: u32| {
        painter.hline(x, y, w, sel);
        painter.hline(x, y + h - 1, w, sel);
        painter.vline(x, y, h, sel);
        painter.vline(x + w - 1, y, h, sel);
    };
    for r in view.selected_rows().into_iter().filter(|r| rows.contains(r)) {
        outline(0, (r - rows.start) as u32 * ch, width, ch);
    }
    let selected: HashSet<usize> = view.selected_cols().into_iter().collect();
    for (j, c) in cols.clone().enumerate() {
        let hit = match display[c] {
            DisplayCol::Allele(_) => selected.contains(&c),
            DisplayCol::Variant(v) => selected.iter().any(|&k| view.cols()[k].variant == v),
        };
        if hit {
            outline(j as u32 * cw, 0, cw, height);
        }
    }
    Ok((width, height))
}

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&fill.0);
        }
        RgbImage { width, height, pixels }
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        Rgb([self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]])
    }

    pub fn set(&mut self, x: u32, y: u32, color: Rgb) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color.0);
    }
}

impl Painter for RgbImage {
    fn fill(&mut self, x: u32, y: u32, w: u32, h: u32, color: Rgb, _bar: bool) {
        for yy in y..(y + h).min(self.height) {
            for xx in x..(x + w).min(self.width) {
                self.set(xx, yy, color);
            }
        }
    }

    fn hline(&mut self, x: u32, y: u32, len: u32, color: Rgb) {
        self.fill(x, y, len, 1, color, false);
    }

    fn vline(&mut self, x: u32, y: u32, len: u32, color: Rgb) {
        self.fill(x, y, 1, len, color, false);
    }
}

/// Rasterize a window of the view. `cols` indexes display columns.
pub fn render_view(
    dataset: &Dataset,
    view: &View,
    opts: &RenderOptions,
    rows: Range<usize>,
    cols: Range<usize>,
) -> Result<RgbImage, RenderError> {
    let (w, h) = window_size(view, opts, &rows, &cols)?;
    let mut image = RgbImage::new(w, h, opts.colors.missing);
    paint(dataset, view, opts, rows, cols, &mut image)?;
    Ok(image)
}

/// Zoomed-out image of the whole view within `max_w x max_h`. Each pixel
/// covers a `k x k` bucket of cells (the same `k` on both axes) and takes
/// the bucket's most common color role; ties go to the earlier role.
pub fn render_overview(
    dataset: &Dataset,
    view: &View,
    opts: &RenderOptions,
    max_w: u32,
    max_h: u32,
) -> Result<RgbImage, RenderError> {
    if max_w == 0 || max_h == 0 {
        return Err(RenderError::InvalidOptions("overview bounds must be positive".into()));
    }
    let display = display_columns(view, opts.encoding);
    let (n_rows, n_cols) = (view.n_rows(), display.len());
    if n_rows == 0 || n_cols == 0 {
        return Err(RenderError::EmptyRender);
    }
    let k = 1.max(n_cols.div_ceil(max_w as usize)).max(n_rows.div_ceil(max_h as usize));
    let (out_w, out_h) = (n_cols.div_ceil(k), n_rows.div_ceil(k));
    if out_w as u64 * out_h as u64 > MAX_PIXELS {
        return Err(RenderError::InvalidOptions("overview exceeds the render limit".into()));
    }
    let mut image = RgbImage::new(out_w as u32, out_h as u32, opts.colors.missing);
    for by in 0..out_h {
        for bx in 0..out_w {
            let mut counts = [0u32; ColorRole::COUNT];
            for r in by * k..((by + 1) * k).min(n_rows) {
                for &c in &display[bx * k..((bx + 1) * k).min(n_cols)] {
                    counts[encode_display(dataset, view, opts.encoding, r, c)?.role.index()] += 1;
                }
            }
            let best = (0..ColorRole::COUNT).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap();
            image.set(bx as u32, by as u32, opts.colors.color(ColorRole::from_index(best)));
        }
    }
    Ok(image)
}
