//! Styled element trees.
//!
//! A [`StyledDocument`] is parsed from HTML with embedded `<style>` blocks and
//! inline `style=` attributes. Only the CSS subset the jitter functions touch is
//! understood: colors, font size, per-side margin/padding, flow direction and
//! visibility. Everything else is dropped while parsing.

mod css;
mod html;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use css::{CssRule, Selector};
pub use html::{parse_document, serialize};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
}

/// An sRGB color with 8-bit channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub fn channels(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_channels(c: [u8; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    /// Moves each channel a fraction `amount` of the way toward `target`,
    /// `c' = round(c + amount * (target - c))` with halves rounded up.
    pub fn blend_toward(self, target: Rgb, amount: f64) -> Rgb {
        let mix = |c: u8, t: u8| -> u8 {
            let v = c as f64 + amount * (t as f64 - c as f64);
            (v + 0.5).floor().clamp(0.0, 255.0) as u8
        };
        Rgb::new(
            mix(self.r, target.r),
            mix(self.g, target.g),
            mix(self.b, target.b),
        )
    }

    pub fn to_hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Client device class; fixes the viewport width.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    #[default]
    Mobile,
    Tablet,
    Desktop,
}

impl Device {
    pub const ALL: [Device; 3] = [Device::Mobile, Device::Tablet, Device::Desktop];

    pub fn viewport_width(self) -> u32 {
        match self {
            Device::Mobile => 390,
            Device::Tablet => 768,
            Device::Desktop => 1280,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Device::Mobile => "mobile",
            Device::Tablet => "tablet",
            Device::Desktop => "desktop",
        }
    }
}

impl FromStr for Device {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mobile" => Ok(Device::Mobile),
            "tablet" => Ok(Device::Tablet),
            "desktop" => Ok(Device::Desktop),
            other => Err(format!("unknown device `{other}`")),
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Block children stack vertically, row children flow horizontally and wrap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Flow {
    #[default]
    Block,
    Row,
}

impl Flow {
    pub fn flipped(self) -> Flow {
        match self {
            Flow::Block => Flow::Row,
            Flow::Row => Flow::Block,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StyleProperty {
    Color,
    BackgroundColor,
    FontSize,
    MarginTop,
    MarginRight,
    MarginBottom,
    MarginLeft,
    PaddingTop,
    PaddingRight,
    PaddingBottom,
    PaddingLeft,
    Flow,
    Visible,
}

impl StyleProperty {
    pub const ALL: [StyleProperty; 13] = [
        StyleProperty::Color,
        StyleProperty::BackgroundColor,
        StyleProperty::FontSize,
        StyleProperty::MarginTop,
        StyleProperty::MarginRight,
        StyleProperty::MarginBottom,
        StyleProperty::MarginLeft,
        StyleProperty::PaddingTop,
        StyleProperty::PaddingRight,
        StyleProperty::PaddingBottom,
        StyleProperty::PaddingLeft,
        StyleProperty::Flow,
        StyleProperty::Visible,
    ];

    pub const MARGINS: [StyleProperty; 4] = [
        StyleProperty::MarginTop,
        StyleProperty::MarginRight,
        StyleProperty::MarginBottom,
        StyleProperty::MarginLeft,
    ];

    pub const PADDINGS: [StyleProperty; 4] = [
        StyleProperty::PaddingTop,
        StyleProperty::PaddingRight,
        StyleProperty::PaddingBottom,
        StyleProperty::PaddingLeft,
    ];

    /// Color, font size and the backdrop color fall back to the parent value.
    pub fn inherits(self) -> bool {
        matches!(
            self,
            StyleProperty::Color | StyleProperty::FontSize | StyleProperty::BackgroundColor
        )
    }

    pub fn is_spacing(self) -> bool {
        Self::MARGINS.contains(&self) || Self::PADDINGS.contains(&self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StyleValue {
    Color(Rgb),
    Px(f32),
    Flow(Flow),
    Visible(bool),
}

pub type StyleMap = BTreeMap<StyleProperty, StyleValue>;

/// Declarations that apply to a node, grouped by where they came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeclaredStyles {
    pub tag: StyleMap,
    pub class: StyleMap,
    pub id: StyleMap,
    pub inline: StyleMap,
}

impl DeclaredStyles {
    /// Highest-precedence declaration: inline > id > class > tag.
    pub fn lookup(&self, prop: StyleProperty) -> Option<StyleValue> {
        self.inline
            .get(&prop)
            .or_else(|| self.id.get(&prop))
            .or_else(|| self.class.get(&prop))
            .or_else(|| self.tag.get(&prop))
            .copied()
    }

    pub fn is_empty(&self) -> bool {
        self.tag.is_empty() && self.class.is_empty() && self.id.is_empty() && self.inline.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sides {
    pub top: f32,
    pub right: f32,
    pub bottom: f32,
    pub left: f32,
}

impl Sides {
    pub fn horizontal(&self) -> f32 {
        self.left + self.right
    }

    pub fn vertical(&self) -> f32 {
        self.top + self.bottom
    }
}

/// Fully resolved style of a node; every supported property has a value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComputedStyle {
    pub color: Rgb,
    pub background: Rgb,
    pub font_size: f32,
    pub margin: Sides,
    pub padding: Sides,
    pub flow: Flow,
    pub visible: bool,
}

impl Default for ComputedStyle {
    fn default() -> Self {
        Self {
            color: Rgb::BLACK,
            background: Rgb::WHITE,
            font_size: 16.0,
            margin: Sides::default(),
            padding: Sides::default(),
            flow: Flow::Block,
            visible: true,
        }
    }
}

impl ComputedStyle {
    pub fn get(&self, prop: StyleProperty) -> StyleValue {
        use StyleProperty as P;
        match prop {
            P::Color => StyleValue::Color(self.color),
            P::BackgroundColor => StyleValue::Color(self.background),
            P::FontSize => StyleValue::Px(self.font_size),
            P::MarginTop => StyleValue::Px(self.margin.top),
            P::MarginRight => StyleValue::Px(self.margin.right),
            P::MarginBottom => StyleValue::Px(self.margin.bottom),
            P::MarginLeft => StyleValue::Px(self.margin.left),
            P::PaddingTop => StyleValue::Px(self.padding.top),
            P::PaddingRight => StyleValue::Px(self.padding.right),
            P::PaddingBottom => StyleValue::Px(self.padding.bottom),
            P::PaddingLeft => StyleValue::Px(self.padding.left),
            P::Flow => StyleValue::Flow(self.flow),
            P::Visible => StyleValue::Visible(self.visible),
        }
    }

    fn set(&mut self, prop: StyleProperty, value: StyleValue) {
        use StyleProperty as P;
        match (prop, value) {
            (P::Color, StyleValue::Color(c)) => self.color = c,
            (P::BackgroundColor, StyleValue::Color(c)) => self.background = c,
            (P::FontSize, StyleValue::Px(v)) => self.font_size = v,
            (P::MarginTop, StyleValue::Px(v)) => self.margin.top = v,
            (P::MarginRight, StyleValue::Px(v)) => self.margin.right = v,
            (P::MarginBottom, StyleValue::Px(v)) => self.margin.bottom = v,
            (P::MarginLeft, StyleValue::Px(v)) => self.margin.left = v,
            (P::PaddingTop, StyleValue::Px(v)) => self.padding.top = v,
            (P::PaddingRight, StyleValue::Px(v)) => self.padding.right = v,
            (P::PaddingBottom, StyleValue::Px(v)) => self.padding.bottom = v,
            (P::PaddingLeft, StyleValue::Px(v)) => self.padding.left = v,
            (P::Flow, StyleValue::Flow(f)) => self.flow = f,
            (P::Visible, StyleValue::Visible(v)) => self.visible = v,
            // mismatched kinds never leave the parser
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StyledNode {
    pub tag: String,
    pub id: Option<String>,
    pub classes: Vec<String>,
    /// Attributes other than `id`, `class` and `style`, kept for serialization
    /// and placeholder sizing.
    pub attributes: BTreeMap<String, String>,
    pub text_content: Option<String>,
    pub children: Vec<StyledNode>,
    pub declared: DeclaredStyles,
    pub resolved: ComputedStyle,
}

impl StyledNode {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            id: None,
            classes: Vec::new(),
            attributes: BTreeMap::new(),
            text_content: None,
            children: Vec::new(),
            declared: DeclaredStyles::default(),
            resolved: ComputedStyle::default(),
        }
    }

    pub fn has_text(&self) -> bool {
        self.text_content
            .as_deref()
            .is_some_and(|t| !t.trim().is_empty())
    }

    pub fn is_placeholder(&self) -> bool {
        self.tag == "img"
    }

    /// Number of nodes in this subtree, including `self`.
    pub fn subtree_len(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(StyledNode::subtree_len)
            .sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StyledDocument {
    pub root: StyledNode,
    pub title: Option<String>,
    pub stylesheet: Vec<CssRule>,
    pub source_url: Option<String>,
    pub device: Device,
    pub viewport_width_px: u32,
}

impl StyledDocument {
    /// An empty `body` with default styles.
    pub fn empty(device: Device) -> Self {
        let mut doc = Self {
            root: StyledNode::new("body"),
            title: None,
            stylesheet: Vec::new(),
            source_url: None,
            device,
            viewport_width_px: device.viewport_width(),
        };
        doc.cascade();
        doc
    }

    /// Nodes in document (preorder) order; the root is index 0.
    pub fn nodes(&self) -> Vec<&StyledNode> {
        fn walk<'a>(node: &'a StyledNode, out: &mut Vec<&'a StyledNode>) {
            out.push(node);
            for child in &node.children {
                walk(child, out);
            }
        }
        let mut out = Vec::with_capacity(self.root.subtree_len());
        walk(&self.root, &mut out);
        out
    }

    /// Visits every node mutably in preorder together with its index.
    pub fn for_each_node_mut(&mut self, mut f: impl FnMut(usize, &mut StyledNode)) {
        fn walk(node: &mut StyledNode, idx: &mut usize, f: &mut dyn FnMut(usize, &mut StyledNode)) {
            f(*idx, node);
            *idx += 1;
            for child in &mut node.children {
                walk(child, idx, f);
            }
        }
        let mut idx = 0;
        walk(&mut self.root, &mut idx, &mut f);
    }

    /// Fills every node's tag/class/id tiers from the stylesheet, then resolves.
    pub fn cascade(&mut self) {
        let sheet = std::mem::take(&mut self.stylesheet);
        self.for_each_node_mut(|_, node| css::apply_rules(&sheet, node));
        self.stylesheet = sheet;
        resolve_in_place(self);
    }
}

/// Resolves effective styles for every node.
///
/// Precedence is inline > id > class > tag > inherited/default. Color, font size
/// and background (as the backdrop a node is painted over) inherit; spacing,
/// flow and visibility do not.
pub fn resolve_styles(doc: &StyledDocument) -> StyledDocument {
    let mut out = doc.clone();
    resolve_in_place(&mut out);
    out
}

pub(crate) fn resolve_in_place(doc: &mut StyledDocument) {
    fn walk(node: &mut StyledNode, parent: Option<&ComputedStyle>) {
        let defaults = ComputedStyle::default();
        let mut style = defaults;
        for prop in StyleProperty::ALL {
            let value = match node.declared.lookup(prop) {
                Some(v) => v,
                None => match parent {
                    Some(p) if prop.inherits() => p.get(prop),
                    _ => defaults.get(prop),
                },
            };
            style.set(prop, value);
        }
        node.resolved = style;
        for child in &mut node.children {
            walk(child, Some(&style));
        }
    }
    walk(&mut doc.root, None);
}
