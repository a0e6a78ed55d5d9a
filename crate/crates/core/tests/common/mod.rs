//! Shared proptest strategies: random documents drawn from the supported
//! HTML/CSS subset.
#![allow(dead_code)]

use proptest::prelude::*;

use jitterlab_core::doc::{parse_document, Device, StyledDocument};

const TAGS: &[&str] = &["div", "p", "span", "h1", "h2", "section", "li"];
const CLASSES: &[&str] = &["a", "b", "c"];
const IDS: &[&str] = &["x", "y"];
const WORDS: &[&str] = &["alpha", "beta", "gamma", "delta", "login", "screen", "ok"];

fn arb_color() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec![
            "#000000", "#ffffff", "#ff0000", "#0000ff", "#1f5fbf", "#eeeeee", "red", "navy"
        ])
        .prop_map(str::to_string),
        (any::<u8>(), any::<u8>(), any::<u8>()).prop_map(|(r, g, b)| format!("rgb({r}, {g}, {b})")),
    ]
}

/// One CSS declaration from the supported subset.
pub fn arb_declaration() -> impl Strategy<Value = String> {
    let sides = prop::sample::select(vec!["top", "right", "bottom", "left"]);
    prop_oneof![
        arb_color().prop_map(|c| format!("color: {c}")),
        arb_color().prop_map(|c| format!("background-color: {c}")),
        (6u32..40).prop_map(|s| format!("font-size: {s}px")),
        (sides.clone(), 0u32..30).prop_map(|(s, v)| format!("margin-{s}: {v}px")),
        (sides, 0u32..30).prop_map(|(s, v)| format!("padding-{s}: {v}px")),
        (0u32..20, 0u32..20).prop_map(|(a, b)| format!("margin: {a}px {b}px")),
        (0u32..20).prop_map(|a| format!("padding: {a}px")),
        prop::sample::select(vec![
            "display: flex",
            "display: block",
            "flex-direction: column"
        ])
        .prop_map(str::to_string),
        Just("visibility: hidden".to_string()),
    ]
}

fn arb_selector() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(TAGS).prop_map(str::to_string),
        prop::sample::select(CLASSES).prop_map(|c| format!(".{c}")),
        prop::sample::select(IDS).prop_map(|i| format!("#{i}")),
    ]
}

fn arb_rule() -> impl Strategy<Value = String> {
    (
        arb_selector(),
        prop::collection::vec(arb_declaration(), 1..4),
    )
        .prop_map(|(s, decls)| format!("{s} {{ {} }}", decls.join("; ")))
}

#[derive(Clone, Debug)]
struct NodeSpec {
    tag: &'static str,
    classes: Vec<&'static str>,
    id: Option<&'static str>,
    inline: Vec<String>,
    text: Option<String>,
    children: Vec<NodeSpec>,
}

fn render_node(n: &NodeSpec, out: &mut String) {
    out.push('<');
    out.push_str(n.tag);
    if !n.classes.is_empty() {
        out.push_str(&format!(" class=\"{}\"", n.classes.join(" ")));
    }
    if let Some(id) = n.id {
        out.push_str(&format!(" id=\"{id}\""));
    }
    if !n.inline.is_empty() {
        out.push_str(&format!(" style=\"{}\"", n.inline.join("; ")));
    }
    out.push('>');
    if let Some(t) = &n.text {
        out.push_str(t);
    }
    for c in &n.children {
        render_node(c, out);
    }
    out.push_str(&format!("</{}>", n.tag));
}

fn arb_node() -> impl Strategy<Value = NodeSpec> {
    let text = prop::option::weighted(
        0.7,
        prop::collection::vec(prop::sample::select(WORDS), 1..6).prop_map(|w| w.join(" ")),
    );
    let leaf = (
        prop::sample::select(TAGS),
        prop::sample::subsequence(CLASSES, 0..=2),
        prop::option::weighted(0.2, prop::sample::select(IDS)),
        prop::collection::vec(arb_declaration(), 0..3),
        text,
    )
        .prop_map(|(tag, classes, id, inline, text)| NodeSpec {
            tag,
            classes,
            id,
            inline,
            text,
            children: vec![],
        });
    leaf.prop_recursive(3, 24, 4, |inner| {
        (
            prop::sample::select(TAGS),
            prop::sample::subsequence(CLASSES, 0..=2),
            prop::collection::vec(arb_declaration(), 0..2),
            prop::option::weighted(0.3, prop::sample::select(WORDS).prop_map(str::to_string)),
            prop::collection::vec(inner, 1..4),
        )
            .prop_map(|(tag, classes, inline, text, children)| NodeSpec {
                tag,
                classes,
                id: None,
                inline,
                text,
                children,
            })
    })
}

/// Full HTML text of a random page.
pub fn arb_html() -> impl Strategy<Value = String> {
    (prop::collection::vec(arb_rule(), 0..6), prop::collection::vec(arb_node(), 0..4), prop::collection::vec(arb_declaration(), 0..2))
        .prop_map(|(rules, nodes, body_inline)| {
            let mut body = String::new();
            for n in &nodes {
                render_node(n, &mut body);
            }
            format!(
                "<html><head><title>t</title><style>{}</style></head><body style=\"{}\">{body}</body></html>",
                rules.join("\n"),
                body_inline.join("; ")
            )
        })
}

pub fn arb_device() -> impl Strategy<Value = Device> {
    prop::sample::select(vec![Device::Mobile, Device::Tablet, Device::Desktop])
}

pub fn arb_doc() -> impl Strategy<Value = StyledDocument> {
    (arb_html(), arb_device())
        .prop_map(|(html, device)| parse_document(&html, device).expect("generated html parses"))
}
