//! Seeded design-degrading transforms ("jitters") over styled documents.
//!
//! Each [`JitterKind`] targets one family of style properties and records its
//! mutation as inline declarations, so jittered documents serialize faithfully.
//! Up to three kinds are composed per variant through a [`JitterPlan`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::{resolve_in_place, Rgb, StyleProperty, StyleValue, StyledDocument, StyledNode};
use crate::seed::{mix_seed, seeded_rng};

/// Per-channel color noise amplitude at magnitude 1.
pub const COLOR_NOISE_RANGE: f64 = 96.0;
/// Additive spacing noise amplitude in px at magnitude 1.
pub const SPACING_NOISE_PX: f64 = 24.0;
pub const MIN_FONT_PX: f32 = 6.0;
pub const MAX_FONT_PX: f32 = 96.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JitterError {
    #[error("no eligible nodes for {0}")]
    NoEligibleNodes(JitterKind),
    #[error("every jitter in the plan was a no-op")]
    AllJittersNoOp,
    #[error("magnitude {0} outside (0, 1]")]
    InvalidMagnitude(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterKind {
    ColorSwap,
    ColorNoise,
    FontSizeSwap,
    TextSizeNoise,
    TextContrast,
    BackgroundContrast,
    SpacingNoise,
    ComplexityReduce,
    LayoutModify,
}

impl JitterKind {
    pub const ALL: [JitterKind; 9] = [
        JitterKind::ColorSwap,
        JitterKind::ColorNoise,
        JitterKind::FontSizeSwap,
        JitterKind::TextSizeNoise,
        JitterKind::TextContrast,
        JitterKind::BackgroundContrast,
        JitterKind::SpacingNoise,
        JitterKind::ComplexityReduce,
        JitterKind::LayoutModify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JitterKind::ColorSwap => "color_swap",
            JitterKind::ColorNoise => "color_noise",
            JitterKind::FontSizeSwap => "font_size_swap",
            JitterKind::TextSizeNoise => "text_size_noise",
            JitterKind::TextContrast => "text_contrast",
            JitterKind::BackgroundContrast => "background_contrast",
            JitterKind::SpacingNoise => "spacing_noise",
            JitterKind::ComplexityReduce => "complexity_reduce",
            JitterKind::LayoutModify => "layout_modify",
        }
    }

    pub fn defect_tag(self) -> DefectTag {
        match self {
            JitterKind::ColorSwap => DefectTag::BadColorChoice,
            JitterKind::ColorNoise => DefectTag::BadColorNoise,
            JitterKind::FontSizeSwap => DefectTag::BadFontSizing,
            JitterKind::TextSizeNoise => DefectTag::BadTextSizing,
            JitterKind::TextContrast => DefectTag::BadTextContrast,
            JitterKind::BackgroundContrast => DefectTag::BadBackgroundContrast,
            JitterKind::SpacingNoise => DefectTag::BadSpacing,
            JitterKind::ComplexityReduce => DefectTag::ClutteredContent,
            JitterKind::LayoutModify => DefectTag::BadLayout,
        }
    }

    /// Resolved properties this kind is allowed to change.
    pub fn targets(self) -> &'static [StyleProperty] {
        use StyleProperty as P;
        match self {
            JitterKind::ColorSwap | JitterKind::ColorNoise => &[P::Color, P::BackgroundColor],
            JitterKind::FontSizeSwap | JitterKind::TextSizeNoise => &[P::FontSize],
            JitterKind::TextContrast => &[P::Color],
            JitterKind::BackgroundContrast => &[P::BackgroundColor],
            JitterKind::SpacingNoise => &[
                P::MarginTop,
                P::MarginRight,
                P::MarginBottom,
                P::MarginLeft,
                P::PaddingTop,
                P::PaddingRight,
                P::PaddingBottom,
                P::PaddingLeft,
            ],
            JitterKind::ComplexityReduce => &[P::Visible],
            JitterKind::LayoutModify => &[P::Flow],
        }
    }
}

impl fmt::Display for JitterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JitterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JitterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown jitter kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrapPrinciple {
    Contrast,
    Repetition,
    Alignment,
    Proximity,
}

impl CrapPrinciple {
    pub const ALL: [CrapPrinciple; 4] = [
        CrapPrinciple::Contrast,
        CrapPrinciple::Repetition,
        CrapPrinciple::Alignment,
        CrapPrinciple::Proximity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CrapPrinciple::Contrast => "contrast",
            CrapPrinciple::Repetition => "repetition",
            CrapPrinciple::Alignment => "alignment",
            CrapPrinciple::Proximity => "proximity",
        }
    }

    pub fn defect_tag(self) -> DefectTag {
        match self {
            CrapPrinciple::Contrast => DefectTag::BadContrast,
            CrapPrinciple::Repetition => DefectTag::BadRepetition,
            CrapPrinciple::Alignment => DefectTag::BadAlignment,
            CrapPrinciple::Proximity => DefectTag::BadProximity,
        }
    }
}

impl FromStr for CrapPrinciple {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CrapPrinciple::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown principle `{s}`"))
    }
}

/// A named design defect as it appears in descriptions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefectTag {
    BadColorChoice,
    BadColorNoise,
    BadFontSizing,
    BadTextSizing,
    BadTextContrast,
    BadBackgroundContrast,
    BadSpacing,
    ClutteredContent,
    BadLayout,
    BadContrast,
    BadRepetition,
    BadAlignment,
    BadProximity,
}

impl DefectTag {
    pub const ALL: [DefectTag; 13] = [
        DefectTag::BadColorChoice,
        DefectTag::BadColorNoise,
        DefectTag::BadFontSizing,
        DefectTag::BadTextSizing,
        DefectTag::BadTextContrast,
        DefectTag::BadBackgroundContrast,
        DefectTag::BadSpacing,
        DefectTag::ClutteredContent,
        DefectTag::BadLayout,
        DefectTag::BadContrast,
        DefectTag::BadRepetition,
        DefectTag::BadAlignment,
        DefectTag::BadProximity,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            DefectTag::BadColorChoice => "bad color choice",
            DefectTag::BadColorNoise => "bad color noise",
            DefectTag::BadFontSizing => "bad font sizing",
            DefectTag::BadTextSizing => "bad text sizing",
            DefectTag::BadTextContrast => "bad text contrast",
            DefectTag::BadBackgroundContrast => "bad background contrast",
            DefectTag::BadSpacing => "bad spacing",
            DefectTag::ClutteredContent => "cluttered content",
            DefectTag::BadLayout => "bad layout",
            DefectTag::BadContrast => "bad contrast",
            DefectTag::BadRepetition => "bad repetition",
            DefectTag::BadAlignment => "bad alignment",
            DefectTag::BadProximity => "bad proximity",
        }
    }

    pub fn from_phrase(phrase: &str) -> Option<DefectTag> {
        DefectTag::ALL.into_iter().find(|t| t.phrase() == phrase)
    }

    /// The jitter kind that emits this tag, if any.
    pub fn jitter_kind(self) -> Option<JitterKind> {
        JitterKind::ALL.into_iter().find(|k| k.defect_tag() == self)
    }

    /// CRAP principles this tag projects onto.
    pub fn principles(self) -> &'static [CrapPrinciple] {
        use CrapPrinciple::*;
        match self {
            DefectTag::BadColorChoice
            | DefectTag::BadColorNoise
            | DefectTag::BadFontSizing
            | DefectTag::BadTextSizing => &[Contrast, Repetition],
            DefectTag::BadTextContrast | DefectTag::BadBackgroundContrast => &[Contrast],
            DefectTag::BadSpacing | DefectTag::BadLayout => &[Alignment, Proximity],
            DefectTag::ClutteredContent => &[Contrast, Repetition, Alignment, Proximity],
            DefectTag::BadContrast => &[Contrast],
            DefectTag::BadRepetition => &[Repetition],
            DefectTag::BadAlignment => &[Alignment],
            DefectTag::BadProximity => &[Proximity],
        }
    }
}

impl fmt::Display for DefectTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

impl FromStr for DefectTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DefectTag::from_phrase(s).ok_or_else(|| format!("unknown defect tag `{s}`"))
    }
}

impl Serialize for DefectTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.phrase())
    }
}

impl<'de> Deserialize<'de> for DefectTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DefectTag::from_phrase(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown defect tag `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterApplication {
    pub kind: JitterKind,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterPlan {
    pub seed: u64,
    pub applications: Vec<JitterApplication>,
}

pub const MAX_PLAN_LEN: usize = 3;
pub const MIN_MAGNITUDE: f64 = 0.3;

/// Draws a plan: length uniform over {1,2,3}, distinct kinds uniformly without
/// replacement, magnitudes uniform in [0.3, 1.0] (kept to three decimals).
pub fn sample_jitter_plan(seed: u64) -> JitterPlan {
    let mut rng = seeded_rng(seed);
    let count = rng.random_range(1..=MAX_PLAN_LEN);
    let picks = index::sample(&mut rng, JitterKind::ALL.len(), count);
    let applications = picks
        .into_iter()
        .map(|i| {
            let m: f64 = rng.random_range(MIN_MAGNITUDE..=1.0);
            JitterApplication {
                kind: JitterKind::ALL[i],
                magnitude: (m * 1000.0).round() / 1000.0,
            }
        })
        .collect();
    JitterPlan { seed, applications }
}

/// Applies one jitter, returning a new document.
///
/// Fails with [`JitterError::NoEligibleNodes`] when nothing in the document
/// could be changed by this kind.
pub fn apply_jitter(
    doc: &StyledDocument,
    kind: JitterKind,
    magnitude: f64,
    seed: u64,
) -> Result<StyledDocument, JitterError> {
    if !(magnitude > 0.0 && magnitude <= 1.0) {
        return Err(JitterError::InvalidMagnitude(magnitude));
    }
    let out = mutate(doc, kind, magnitude, seed).ok_or(JitterError::NoEligibleNodes(kind))?;
    let changed = doc
        .nodes()
        .iter()
        .zip(out.nodes())
        .any(|(a, b)| a.resolved != b.resolved);
    if !changed {
        return Err(JitterError::NoEligibleNodes(kind));
    }
    Ok(out)
}

/// Applies a plan in order. Returns the jittered document and the defect tags
/// of the kinds that actually changed it.
pub fn apply_plan(
    doc: &StyledDocument,
    plan: &JitterPlan,
) -> Result<(StyledDocument, Vec<DefectTag>), JitterError> {
    let mut current = doc.clone();
    let mut tags = Vec::new();
    for (i, app) in plan.applications.iter().enumerate() {
        match apply_jitter(
            &current,
            app.kind,
            app.magnitude,
            mix_seed(plan.seed, i as u64),
        ) {
            Ok(next) => {
                current = next;
                tags.push(app.kind.defect_tag());
            }
            Err(JitterError::NoEligibleNodes(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if tags.is_empty() {
        return Err(JitterError::AllJittersNoOp);
    }
    Ok((current, tags))
}

/// Per-node facts gathered before mutating.
struct NodeInfo {
    visible: bool,
    has_text: bool,
    is_leaf: bool,
    declares_background: bool,
    visible_element_children: usize,
    parent: Option<usize>,
}

fn survey(doc: &StyledDocument) -> Vec<NodeInfo> {
    fn walk(
        node: &StyledNode,
        parent: Option<usize>,
        parent_visible: bool,
        out: &mut Vec<NodeInfo>,
    ) {
        let idx = out.len();
        let visible = parent_visible && node.resolved.visible;
        out.push(NodeInfo {
            visible,
            has_text: node.has_text(),
            is_leaf: node.children.is_empty(),
            declares_background: node
                .declared
                .lookup(StyleProperty::BackgroundColor)
                .is_some(),
            visible_element_children: node.children.iter().filter(|c| c.resolved.visible).count(),
            parent,
        });
        for child in &node.children {
            walk(child, Some(idx), visible, out);
        }
    }
    let mut out = Vec::new();
    walk(&doc.root, None, true, &mut out);
    out
}

fn set_inline(node: &mut StyledNode, prop: StyleProperty, value: StyleValue) {
    node.declared.inline.insert(prop, value);
}

/// Swaps among `k` randomly chosen entries using a cyclic permutation, so every
/// chosen entry moves.
fn derangement_map<T: Copy + Ord>(
    values: &[T],
    magnitude: f64,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<T, T> {
    let n = values.len();
    let k = ((magnitude * n as f64).round() as usize).clamp(2, n);
    let chosen: Vec<T> = index::sample(rng, n, k)
        .into_iter()
        .map(|i| values[i])
        .collect();
    let mut perm: Vec<usize> = (0..k).collect();
    // Sattolo's algorithm
    for i in (1..k).rev() {
        let j = rng.random_range(0..i);
        perm.swap(i, j);
    }
    chosen
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, chosen[perm[i]]))
        .collect()
}

fn noisy_channel(c: u8, amplitude: f64, rng: &mut ChaCha8Rng) -> u8 {
    let delta: f64 = rng.random_range(-1.0..=1.0) * amplitude;
    (c as f64 + delta).round().clamp(0.0, 255.0) as u8
}

/// Core mutation without the no-op check. Accepts magnitude 0.
pub(crate) fn mutate(
    doc: &StyledDocument,
    kind: JitterKind,
    m: f64,
    seed: u64,
) -> Option<StyledDocument> {
    let info = survey(doc);
    let nodes = doc.nodes();
    let mut rng = seeded_rng(seed);
    let text_nodes: Vec<usize> = (0..info.len())
        .filter(|&i| info[i].visible && info[i].has_text)
        .collect();
    let bg_nodes: Vec<usize> = (0..info.len())
        .filter(|&i| i == 0 || (info[i].visible && info[i].declares_background))
        .collect();

    // edits: node index -> inline declarations to add
    let mut edits: BTreeMap<usize, Vec<(StyleProperty, StyleValue)>> = BTreeMap::new();
    let mut strip: BTreeSet<usize> = BTreeSet::new();

    match kind {
        JitterKind::ColorSwap => {
            let mut palette = BTreeSet::new();
            palette.extend(text_nodes.iter().map(|&i| nodes[i].resolved.color));
            palette.extend(bg_nodes.iter().map(|&i| nodes[i].resolved.background));
            if palette.len() < 2 {
                return None;
            }
            let values: Vec<Rgb> = palette.into_iter().collect();
            let map = derangement_map(&values, m, &mut rng);
            for &i in &text_nodes {
                if let Some(&c) = map.get(&nodes[i].resolved.color) {
                    edits
                        .entry(i)
                        .or_default()
                        .push((StyleProperty::Color, StyleValue::Color(c)));
                }
            }
            for &i in &bg_nodes {
                if let Some(&c) = map.get(&nodes[i].resolved.background) {
                    edits
                        .entry(i)
                        .or_default()
                        .push((StyleProperty::BackgroundColor, StyleValue::Color(c)));
                }
            }
        }
        JitterKind::ColorNoise => {
            if text_nodes.is_empty() && bg_nodes.is_empty() {
                return None;
            }
            let amp = m * COLOR_NOISE_RANGE;
            for i in 0..info.len() {
                let is_text = text_nodes.contains(&i);
                let is_bg = bg_nodes.contains(&i);
                if is_text {
                    let c = nodes[i]
                        .resolved
                        .color
                        .channels()
                        .map(|ch| noisy_channel(ch, amp, &mut rng));
                    edits.entry(i).or_default().push((
                        StyleProperty::Color,
                        StyleValue::Color(Rgb::from_channels(c)),
                    ));
                }
                if is_bg {
                    let c = nodes[i]
                        .resolved
                        .background
                        .channels()
                        .map(|ch| noisy_channel(ch, amp, &mut rng));
                    edits.entry(i).or_default().push((
                        StyleProperty::BackgroundColor,
                        StyleValue::Color(Rgb::from_channels(c)),
                    ));
                }
            }
        }
        JitterKind::FontSizeSwap => {
            let mut sizes: Vec<u32> = text_nodes
                .iter()
                .map(|&i| nodes[i].resolved.font_size.to_bits())
                .collect();
            sizes.sort_by(|a, b| f32::from_bits(*a).total_cmp(&f32::from_bits(*b)));
            sizes.dedup();
            if sizes.len() < 2 {
                return None;
            }
            let map = derangement_map(&sizes, m, &mut rng);
            for &i in &text_nodes {
                if let Some(&s) = map.get(&nodes[i].resolved.font_size.to_bits()) {
                    edits
                        .entry(i)
                        .or_default()
                        .push((StyleProperty::FontSize, StyleValue::Px(f32::from_bits(s))));
                }
            }
        }
        JitterKind::TextSizeNoise => {
            if text_nodes.is_empty() {
                return None;
            }
            for &i in &text_nodes {
                let factor: f64 = rng.random_range((1.0 - 0.6 * m)..=(1.0 + 1.4 * m));
                let size = (nodes[i].resolved.font_size as f64 * factor).round() as f32;
                let size = size.clamp(MIN_FONT_PX, MAX_FONT_PX);
                edits
                    .entry(i)
                    .or_default()
                    .push((StyleProperty::FontSize, StyleValue::Px(size)));
            }
        }
        JitterKind::TextContrast => {
            if text_nodes.is_empty() {
                return None;
            }
            for &i in &text_nodes {
                let s = nodes[i].resolved;
                let c = s.color.blend_toward(s.background, m);
                edits
                    .entry(i)
                    .or_default()
                    .push((StyleProperty::Color, StyleValue::Color(c)));
            }
        }
        JitterKind::BackgroundContrast => {
            // container = nearest ancestor-or-self that paints the backdrop
            let container_of = |mut i: usize| -> usize {
                loop {
                    if i == 0 || info[i].declares_background {
                        return i;
                    }
                    i = info[i].parent.expect("non-root nodes have parents");
                }
            };
            let mut first_text: BTreeMap<usize, Rgb> = BTreeMap::new();
            for &i in &text_nodes {
                first_text
                    .entry(container_of(i))
                    .or_insert(nodes[i].resolved.color);
            }
            if first_text.is_empty() {
                return None;
            }
            for (c, text_color) in first_text {
                let bg = nodes[c].resolved.background.blend_toward(text_color, m);
                edits
                    .entry(c)
                    .or_default()
                    .push((StyleProperty::BackgroundColor, StyleValue::Color(bg)));
            }
        }
        JitterKind::SpacingNoise => {
            let targets: Vec<usize> = (1..info.len()).filter(|&i| info[i].visible).collect();
            if targets.is_empty() {
                return None;
            }
            let amp = m * SPACING_NOISE_PX;
            for &i in &targets {
                let s = nodes[i].resolved;
                let current = [
                    s.margin.top,
                    s.margin.right,
                    s.margin.bottom,
                    s.margin.left,
                    s.padding.top,
                    s.padding.right,
                    s.padding.bottom,
                    s.padding.left,
                ];
                let props = StyleProperty::MARGINS
                    .into_iter()
                    .chain(StyleProperty::PADDINGS);
                for (prop, old) in props.zip(current) {
                    let delta: f64 = rng.random_range(-1.0..=1.0) * amp;
                    let v = (old as f64 + delta).round().max(0.0) as f32;
                    edits.entry(i).or_default().push((prop, StyleValue::Px(v)));
                }
            }
        }
        JitterKind::ComplexityReduce => {
            let leaves: Vec<usize> = (1..info.len())
                .filter(|&i| info[i].visible && info[i].is_leaf)
                .collect();
            if leaves.is_empty() {
                return None;
            }
            let k = ((m * leaves.len() as f64).round() as usize).clamp(1, leaves.len());
            for j in index::sample(&mut rng, leaves.len(), k) {
                strip.insert(leaves[j]);
            }
        }
        JitterKind::LayoutModify => {
            let containers: Vec<usize> = (0..info.len())
                .filter(|&i| info[i].visible && info[i].visible_element_children >= 2)
                .collect();
            if containers.is_empty() {
                return None;
            }
            let k = ((m * containers.len() as f64).round() as usize).clamp(1, containers.len());
            for j in index::sample(&mut rng, containers.len(), k) {
                let i = containers[j];
                let flow = nodes[i].resolved.flow.flipped();
                edits
                    .entry(i)
                    .or_default()
                    .push((StyleProperty::Flow, StyleValue::Flow(flow)));
            }
        }
    }

    let mut out = doc.clone();
    out.for_each_node_mut(|i, node| {
        if strip.contains(&i) {
            node.classes.clear();
            node.id = None;
            node.declared.class.clear();
            node.declared.id.clear();
            node.declared.inline.clear();
            set_inline(node, StyleProperty::Visible, StyleValue::Visible(false));
        }
        if let Some(list) = edits.get(&i) {
            for (prop, value) in list {
                set_inline(node, *prop, *value);
            }
        }
    });
    resolve_in_place(&mut out);
    Some(out)
}
