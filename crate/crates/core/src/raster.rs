//! A minimal block layout engine and painter.
//!
//! Text is drawn as solid glyph blocks rather than real fonts: each character
//! cell is `0.6 × font_size` wide and the block `0.8 × font_size` tall, centered
//! in a `1.2 × font_size` line. Crude, but it reacts to exactly the contrast,
//! size, spacing and flow changes the jitters make.

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::{imageops, ImageFormat, RgbImage};
use thiserror::Error;

use crate::doc::{Flow, Rgb, StyledDocument, StyledNode};

/// Minimum bitmap height; shorter pages are padded with the page background.
pub const MIN_PAGE_HEIGHT: u32 = 224;
const GLYPH_WIDTH: f32 = 0.6;
const GLYPH_HEIGHT: f32 = 0.8;
const LINE_HEIGHT: f32 = 1.2;
const DEFAULT_PLACEHOLDER_HEIGHT: i32 = 64;
pub const PLACEHOLDER_FILL: Rgb = Rgb::new(204, 204, 204);

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("image encode failed: {0}")]
    Encode(String),
    #[error("bad bitmap dimensions {0}x{1}")]
    Dimensions(u32, u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub width: i32,
    pub height: i32,
}

impl Rect {
    pub fn right(&self) -> i32 {
        self.x + self.width
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.height
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextLine {
    pub x: i32,
    pub y: i32,
    pub text: String,
    /// `min(container width, 0.6 × font_size × chars)`.
    pub width: i32,
}

/// Border box (`rect`), content box and laid-out text of one visible node.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutBox {
    /// Preorder index of the node in its document.
    pub node: usize,
    pub rect: Rect,
    pub content: Rect,
    pub lines: Vec<TextLine>,
    pub children: Vec<LayoutBox>,
}

impl LayoutBox {
    pub fn iter(&self) -> Vec<&LayoutBox> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.iter());
        }
        out
    }
}

fn px(v: f32) -> i32 {
    v.round().max(0.0) as i32
}

fn line_height(font_size: f32) -> i32 {
    ((LINE_HEIGHT * font_size).round() as i32).max(1)
}

fn char_width(font_size: f32) -> f32 {
    GLYPH_WIDTH * font_size
}

/// Greedy word wrap into lines of at most `capacity` characters.
fn wrap(text: &str, capacity: usize) -> Vec<String> {
    let capacity = capacity.max(1);
    let mut lines = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        let mut word: Vec<char> = word.chars().collect();
        while word.len() > capacity {
            if !current.is_empty() {
                lines.push(std::mem::take(&mut current));
            }
            let rest = word.split_off(capacity);
            lines.push(word.into_iter().collect());
            word = rest;
        }
        let needed = if current.is_empty() {
            word.len()
        } else {
            current.chars().count() + 1 + word.len()
        };
        if needed > capacity && !current.is_empty() {
            lines.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.extend(word);
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}

fn attr_px(node: &StyledNode, name: &str) -> Option<i32> {
    node.attributes
        .get(name)
        .and_then(|v| v.trim().trim_end_matches("px").parse::<f32>().ok())
        .map(px)
}

/// Max-content outer width of a node.
fn intrinsic_width(node: &StyledNode) -> i32 {
    if !node.resolved.visible {
        return 0;
    }
    let s = &node.resolved;
    let text = node
        .text_content
        .as_deref()
        .map(|t| (char_width(s.font_size) * t.chars().count() as f32).ceil() as i32)
        .unwrap_or(0);
    let placeholder = if node.is_placeholder() {
        attr_px(node, "width").unwrap_or(DEFAULT_PLACEHOLDER_HEIGHT)
    } else {
        0
    };
    let kids = node.children.iter().map(intrinsic_width);
    let children = match s.flow {
        Flow::Block => kids.max().unwrap_or(0),
        Flow::Row => kids.sum(),
    };
    px(s.margin.horizontal()) + px(s.padding.horizontal()) + text.max(children).max(placeholder)
}

struct Cursor2 {
    next_index: usize,
}

fn layout_node(
    node: &StyledNode,
    cursor: &mut Cursor2,
    x: i32,
    y: i32,
    avail: i32,
) -> (LayoutBox, i32) {
    let idx = cursor.next_index;
    cursor.next_index += 1;
    let s = &node.resolved;
    let avail = avail.max(0);

    let ml = px(s.margin.left).min(avail);
    let mr = px(s.margin.right).min(avail - ml);
    let mut width = avail - ml - mr;
    if node.is_placeholder() {
        if let Some(w) = attr_px(node, "width") {
            width = width.min(w + px(s.padding.horizontal()));
        }
    }
    let pl = px(s.padding.left).min(width);
    let pr = px(s.padding.right).min(width - pl);
    let mt = px(s.margin.top);
    let mb = px(s.margin.bottom);
    let pt = px(s.padding.top);
    let pb = px(s.padding.bottom);

    let content_x = x + ml + pl;
    let content_y = y + mt + pt;
    let content_w = width - pl - pr;
    let mut cy = content_y;

    let mut lines = Vec::new();
    if let Some(text) = node
        .text_content
        .as_deref()
        .filter(|t| !t.trim().is_empty())
    {
        let cw = char_width(s.font_size);
        let capacity = ((content_w as f32 / cw).floor() as usize).max(1);
        let lh = line_height(s.font_size);
        for line in wrap(text, capacity) {
            let n = line.chars().count();
            let w = ((cw * n as f32).ceil() as i32).min(content_w);
            lines.push(TextLine {
                x: content_x,
                y: cy,
                text: line,
                width: w,
            });
            cy += lh;
        }
    }
    if node.is_placeholder() {
        cy += attr_px(node, "height").unwrap_or(DEFAULT_PLACEHOLDER_HEIGHT);
    }

    let mut children = Vec::new();
    match s.flow {
        Flow::Block => {
            for child in &node.children {
                if !child.resolved.visible {
                    cursor.next_index += child.subtree_len();
                    continue;
                }
                let (b, outer_h) = layout_node(child, cursor, content_x, cy, content_w);
                cy += outer_h;
                children.push(b);
            }
        }
        Flow::Row => {
            let mut cx = content_x;
            let mut row_h = 0;
            for child in &node.children {
                if !child.resolved.visible {
                    cursor.next_index += child.subtree_len();
                    continue;
                }
                let w = intrinsic_width(child).min(content_w);
                if cx > content_x && cx + w > content_x + content_w {
                    cx = content_x;
                    cy += row_h;
                    row_h = 0;
                }
                let (b, outer_h) = layout_node(child, cursor, cx, cy, w);
                cx += w;
                row_h = row_h.max(outer_h);
                children.push(b);
            }
            cy += row_h;
        }
    }

    let content_h = cy - content_y;
    let rect = Rect {
        x: x + ml,
        y: y + mt,
        width,
        height: content_h + pt + pb,
    };
    let content = Rect {
        x: content_x,
        y: content_y,
        width: content_w,
        height: content_h,
    };
    let outer = mt + rect.height + mb;
    (
        LayoutBox {
            node: idx,
            rect,
            content,
            lines,
            children,
        },
        outer,
    )
}

/// Lays out the visible tree. Hidden nodes (and their subtrees) get no box.
pub fn layout(doc: &StyledDocument) -> LayoutBox {
    let mut cursor = Cursor2 { next_index: 0 };
    let (root, _) = layout_node(&doc.root, &mut cursor, 0, 0, doc.viewport_width_px as i32);
    root
}

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Bitmap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Bitmap({}x{})", self.width, self.height)
    }
}

impl Bitmap {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        assert!(
            width > 0 && height > 0,
            "bitmap dimensions must be positive"
        );
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&color.channels());
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || pixels.len() != width as usize * height as usize * 3 {
            return Err(RasterError::Dimensions(width, height));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        Rgb::new(self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    pub fn fill_rect(&mut self, x0: i32, y0: i32, x1: i32, y1: i32, color: Rgb) {
        let x0 = x0.clamp(0, self.width as i32) as usize;
        let x1 = x1.clamp(0, self.width as i32) as usize;
        let y0 = y0.clamp(0, self.height as i32) as usize;
        let y1 = y1.clamp(0, self.height as i32) as usize;
        let c = color.channels();
        for y in y0..y1 {
            let row = y * self.width as usize * 3;
            for x in x0..x1 {
                self.pixels[row + x * 3..row + x * 3 + 3].copy_from_slice(&c);
            }
        }
    }

    /// Copies out a sub-rectangle; it must lie inside the bitmap.
    pub fn crop(&self, x: u32, y: u32, width: u32, height: u32) -> Bitmap {
        assert!(
            x + width <= self.width && y + height <= self.height,
            "crop out of bounds"
        );
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for row in y..y + height {
            let start = (row as usize * self.width as usize + x as usize) * 3;
            pixels.extend_from_slice(&self.pixels[start..start + width as usize * 3]);
        }
        Bitmap {
            width,
            height,
            pixels,
        }
    }

    /// Resamples with a triangle (bilinear, area-aware when shrinking) filter.
    pub fn resize(&self, width: u32, height: u32) -> Bitmap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let src = RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("consistent buffer");
        let out = imageops::resize(&src, width, height, imageops::FilterType::Triangle);
        Bitmap {
            width,
            height,
            pixels: out.into_raw(),
        }
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Bitmap, RasterError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| RasterError::Decode(e.to_string()))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Bitmap::from_raw(w, h, img.into_raw())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let img = RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("consistent buffer");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn read_png(path: &Path) -> Result<Bitmap, RasterError> {
        Bitmap::decode_png(&std::fs::read(path)?)
    }

    pub fn write_png(&self, path: &Path) -> Result<(), RasterError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }
}

/// Paints a laid-out document. Height is `max(page height, 224)`.
pub fn rasterize(root: &LayoutBox, doc: &StyledDocument) -> Bitmap {
    let nodes = doc.nodes();
    let height = (root.rect.bottom() + px(doc.root.resolved.margin.bottom))
        .max(MIN_PAGE_HEIGHT as i32) as u32;
    let mut bmp = Bitmap::filled(doc.viewport_width_px, height, doc.root.resolved.background);

    fn paint(b: &LayoutBox, nodes: &[&StyledNode], bmp: &mut Bitmap) {
        let node = nodes[b.node];
        let s = &node.resolved;
        let fill = if node.is_placeholder()
            && node
                .declared
                .lookup(crate::doc::StyleProperty::BackgroundColor)
                .is_none()
        {
            PLACEHOLDER_FILL
        } else {
            s.background
        };
        bmp.fill_rect(b.rect.x, b.rect.y, b.rect.right(), b.rect.bottom(), fill);
        let cw = char_width(s.font_size);
        let glyph_top = (0.5 * (LINE_HEIGHT - GLYPH_HEIGHT) * s.font_size).round() as i32;
        let glyph_h = ((GLYPH_HEIGHT * s.font_size).round() as i32).max(1);
        for line in &b.lines {
            for (i, ch) in line.text.chars().enumerate() {
                if ch.is_whitespace() {
                    continue;
                }
                let x0 = line.x + (cw * i as f32).floor() as i32;
                let x1 = (line.x + (cw * (i + 1) as f32).floor() as i32).max(x0 + 1);
                bmp.fill_rect(
                    x0,
                    line.y + glyph_top,
                    x1,
                    line.y + glyph_top + glyph_h,
                    s.color,
                );
            }
        }
        for c in &b.children {
            paint(c, nodes, bmp);
        }
    }
    paint(root, &nodes, &mut bmp);
    bmp
}

/// Lays out and paints in one step.
pub fn render(doc: &StyledDocument) -> Bitmap {
    rasterize(&layout(doc), doc)
}

/// Shells out to an external renderer invoked as
/// `<cmd> <html_path> <out_png> <viewport_width>`; any failure falls back to the
/// built-in rasterizer.
#[derive(Clone, Debug)]
pub struct ExternalRenderer {
    pub command: PathBuf,
}

impl ExternalRenderer {
    pub fn new(command: impl Into<PathBuf>) -> Self {
        Self {
            command: command.into(),
        }
    }

    pub fn render(&self, html_path: &Path, doc: &StyledDocument) -> Bitmap {
        match self.try_render(html_path, doc.viewport_width_px) {
            Ok(bmp) => bmp,
            Err(err) => {
                tracing::warn!(command = %self.command.display(), %err, "external renderer failed; using built-in rasterizer");
                render(doc)
            }
        }
    }

    fn try_render(&self, html_path: &Path, viewport: u32) -> Result<Bitmap, RasterError> {
        let dir = tempdir_path();
        std::fs::create_dir_all(&dir)?;
        let out = dir.join("shot.png");
        let status = Command::new(&self.command)
            .arg(html_path)
            .arg(&out)
            .arg(viewport.to_string())
            .status()?;
        let result = if status.success() {
            Bitmap::read_png(&out)
        } else {
            Err(RasterError::Decode(format!(
                "renderer exited with {status}"
            )))
        };
        let _ = std::fs::remove_dir_all(&dir);
        result
    }
}

fn tempdir_path() -> PathBuf {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("jitterlab-render-{}-{n}", std::process::id()))
}
