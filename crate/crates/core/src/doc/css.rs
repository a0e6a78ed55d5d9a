//! The supported CSS subset: `tag`, `.class` and `#id` selectors and a handful
//! of properties. Unsupported selectors and declarations are dropped.

use super::{Flow, Rgb, StyleMap, StyleProperty, StyleValue, StyledNode};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Selector {
    Tag(String),
    Class(String),
    Id(String),
}

impl Selector {
    fn parse(raw: &str) -> Option<Selector> {
        let raw = raw.trim();
        let valid = |s: &str| {
            !s.is_empty()
                && s.chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        };
        if let Some(rest) = raw.strip_prefix('.') {
            valid(rest).then(|| Selector::Class(rest.to_string()))
        } else if let Some(rest) = raw.strip_prefix('#') {
            valid(rest).then(|| Selector::Id(rest.to_string()))
        } else {
            valid(raw).then(|| Selector::Tag(raw.to_ascii_lowercase()))
        }
    }

    fn matches(&self, node: &StyledNode) -> bool {
        match self {
            Selector::Tag(t) => node.tag == *t,
            Selector::Class(c) => node.classes.iter().any(|x| x == c),
            Selector::Id(i) => node.id.as_deref() == Some(i.as_str()),
        }
    }

    fn render(&self) -> String {
        match self {
            Selector::Tag(t) => t.clone(),
            Selector::Class(c) => format!(".{c}"),
            Selector::Id(i) => format!("#{i}"),
        }
    }
}

/// One selector with its declarations in source order.
#[derive(Clone, Debug, PartialEq)]
pub struct CssRule {
    pub selector: Selector,
    pub declarations: Vec<(StyleProperty, StyleValue)>,
}

/// Parses a stylesheet. Selector lists are split into one rule per selector.
pub(crate) fn parse_stylesheet(text: &str) -> Vec<CssRule> {
    let text = strip_comments(text);
    let mut rules = Vec::new();
    let mut rest = text.as_str();
    while let Some(open) = rest.find('{') {
        let selectors = &rest[..open];
        let Some(close) = rest[open..].find('}') else {
            break;
        };
        let body = &rest[open + 1..open + close];
        rest = &rest[open + close + 1..];
        // @media and friends are out of scope; skip the nested block wholesale
        if selectors.trim_start().starts_with('@') {
            if let Some(end) = rest.find('}') {
                rest = &rest[end + 1..];
            }
            continue;
        }
        let declarations = parse_declarations(body);
        for sel in selectors.split(',') {
            if let Some(selector) = Selector::parse(sel) {
                rules.push(CssRule {
                    selector,
                    declarations: declarations.clone(),
                });
            }
        }
    }
    rules
}

fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("/*") {
        out.push_str(&rest[..start]);
        match rest[start + 2..].find("*/") {
            Some(end) => rest = &rest[start + 2 + end + 2..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Parses `prop: value; ...` into supported declarations, in order.
pub(crate) fn parse_declarations(body: &str) -> Vec<(StyleProperty, StyleValue)> {
    let mut out = Vec::new();
    for decl in body.split(';') {
        let Some((name, value)) = decl.split_once(':') else {
            continue;
        };
        let name = name.trim().to_ascii_lowercase();
        let value = value
            .trim()
            .trim_end_matches("!important")
            .trim()
            .to_ascii_lowercase();
        expand(&name, &value, &mut out);
    }
    out
}

fn expand(name: &str, value: &str, out: &mut Vec<(StyleProperty, StyleValue)>) {
    use StyleProperty as P;
    match name {
        "color" => {
            if let Some(c) = parse_color(value) {
                out.push((P::Color, StyleValue::Color(c)));
            }
        }
        "background-color" | "background" => {
            if let Some(c) = parse_color(value) {
                out.push((P::BackgroundColor, StyleValue::Color(c)));
            }
        }
        "font-size" => {
            if let Some(px) = parse_px(value).filter(|v| *v > 0.0) {
                out.push((P::FontSize, StyleValue::Px(px)));
            }
        }
        "margin" | "padding" => {
            let sides = if name == "margin" {
                StyleProperty::MARGINS
            } else {
                StyleProperty::PADDINGS
            };
            let values: Option<Vec<f32>> = value.split_whitespace().map(parse_px).collect();
            let Some(values) =
                values.filter(|v| (1..=4).contains(&v.len()) && v.iter().all(|x| *x >= 0.0))
            else {
                return;
            };
            // top right bottom left, CSS shorthand expansion
            let [t, r, b, l] = match values.as_slice() {
                [a] => [*a; 4],
                [a, b] => [*a, *b, *a, *b],
                [a, b, c] => [*a, *b, *c, *b],
                [a, b, c, d] => [*a, *b, *c, *d],
                _ => unreachable!(),
            };
            for (prop, v) in sides.into_iter().zip([t, r, b, l]) {
                out.push((prop, StyleValue::Px(v)));
            }
        }
        "margin-top" | "margin-right" | "margin-bottom" | "margin-left" | "padding-top"
        | "padding-right" | "padding-bottom" | "padding-left" => {
            let prop = match name {
                "margin-top" => P::MarginTop,
                "margin-right" => P::MarginRight,
                "margin-bottom" => P::MarginBottom,
                "margin-left" => P::MarginLeft,
                "padding-top" => P::PaddingTop,
                "padding-right" => P::PaddingRight,
                "padding-bottom" => P::PaddingBottom,
                _ => P::PaddingLeft,
            };
            if let Some(v) = parse_px(value).filter(|v| *v >= 0.0) {
                out.push((prop, StyleValue::Px(v)));
            }
        }
        "display" => match value {
            "block" => out.push((P::Flow, StyleValue::Flow(Flow::Block))),
            "flex" => out.push((P::Flow, StyleValue::Flow(Flow::Row))),
            "none" => out.push((P::Visible, StyleValue::Visible(false))),
            _ => {}
        },
        "flex-direction" => match value {
            "row" => out.push((P::Flow, StyleValue::Flow(Flow::Row))),
            "column" => out.push((P::Flow, StyleValue::Flow(Flow::Block))),
            _ => {}
        },
        "visibility" => match value {
            "visible" => out.push((P::Visible, StyleValue::Visible(true))),
            "hidden" => out.push((P::Visible, StyleValue::Visible(false))),
            _ => {}
        },
        _ => {}
    }
}

fn parse_px(value: &str) -> Option<f32> {
    let v = value.trim();
    let num = if v == "0" { "0" } else { v.strip_suffix("px")? };
    num.trim().parse::<f32>().ok().filter(|x| x.is_finite())
}

pub(crate) fn parse_color(value: &str) -> Option<Rgb> {
    let v = value.trim();
    if let Some(hex) = v.strip_prefix('#') {
        let digits: Option<Vec<u8>> = hex
            .chars()
            .map(|c| c.to_digit(16).map(|d| d as u8))
            .collect();
        let digits = digits?;
        return match digits.as_slice() {
            [r, g, b] => Some(Rgb::new(r * 17, g * 17, b * 17)),
            [r1, r2, g1, g2, b1, b2] => Some(Rgb::new(r1 * 16 + r2, g1 * 16 + g2, b1 * 16 + b2)),
            _ => None,
        };
    }
    if let Some(inner) = v.strip_prefix("rgb(").and_then(|s| s.strip_suffix(')')) {
        let parts: Option<Vec<u8>> = inner
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f32>()
                    .ok()
                    .map(|x| x.round().clamp(0.0, 255.0) as u8)
            })
            .collect();
        return match parts?.as_slice() {
            [r, g, b] => Some(Rgb::new(*r, *g, *b)),
            _ => None,
        };
    }
    let named = match v {
        "black" => Rgb::new(0, 0, 0),
        "white" => Rgb::new(255, 255, 255),
        "red" => Rgb::new(255, 0, 0),
        "green" => Rgb::new(0, 128, 0),
        "blue" => Rgb::new(0, 0, 255),
        "gray" | "grey" => Rgb::new(128, 128, 128),
        "silver" => Rgb::new(192, 192, 192),
        "maroon" => Rgb::new(128, 0, 0),
        "navy" => Rgb::new(0, 0, 128),
        "teal" => Rgb::new(0, 128, 128),
        "purple" => Rgb::new(128, 0, 128),
        "orange" => Rgb::new(255, 165, 0),
        "yellow" => Rgb::new(255, 255, 0),
        _ => return None,
    };
    Some(named)
}

/// Repopulates the tag/class/id tiers of `node` from `sheet`. Later rules win
/// within a tier.
pub(crate) fn apply_rules(sheet: &[CssRule], node: &mut StyledNode) {
    node.declared.tag.clear();
    node.declared.class.clear();
    node.declared.id.clear();
    for rule in sheet {
        if !rule.selector.matches(node) {
            continue;
        }
        let tier = match rule.selector {
            Selector::Tag(_) => &mut node.declared.tag,
            Selector::Class(_) => &mut node.declared.class,
            Selector::Id(_) => &mut node.declared.id,
        };
        for (prop, value) in &rule.declarations {
            tier.insert(*prop, *value);
        }
    }
}

pub(crate) fn render_value(prop: StyleProperty, value: StyleValue) -> String {
    use StyleProperty as P;
    let name = match prop {
        P::Color => "color",
        P::BackgroundColor => "background-color",
        P::FontSize => "font-size",
        P::MarginTop => "margin-top",
        P::MarginRight => "margin-right",
        P::MarginBottom => "margin-bottom",
        P::MarginLeft => "margin-left",
        P::PaddingTop => "padding-top",
        P::PaddingRight => "padding-right",
        P::PaddingBottom => "padding-bottom",
        P::PaddingLeft => "padding-left",
        P::Flow => "display",
        P::Visible => "visibility",
    };
    let value = match value {
        StyleValue::Color(c) => c.to_hex(),
        StyleValue::Px(v) => format!("{v}px"),
        StyleValue::Flow(Flow::Block) => "block".to_string(),
        StyleValue::Flow(Flow::Row) => "flex".to_string(),
        StyleValue::Visible(true) => "visible".to_string(),
        StyleValue::Visible(false) => "hidden".to_string(),
    };
    format!("{name}: {value}")
}

pub(crate) fn render_map(map: &StyleMap) -> String {
    map.iter()
        .map(|(p, v)| render_value(*p, *v))
        .collect::<Vec<_>>()
        .join("; ")
}

pub(crate) fn render_stylesheet(sheet: &[CssRule]) -> String {
    let mut out = String::new();
    for rule in sheet {
        let decls: Vec<String> = rule
            .declarations
            .iter()
            .map(|(p, v)| render_value(*p, *v))
            .collect();
        out.push_str(&rule.selector.render());
        out.push('{');
        out.push_str(&decls.join("; "));
        out.push('}');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors() {
        assert_eq!(parse_color("#ff0000"), Some(Rgb::new(255, 0, 0)));
        assert_eq!(parse_color("#0f0"), Some(Rgb::new(0, 255, 0)));
        assert_eq!(parse_color("rgb(1, 2, 300)"), Some(Rgb::new(1, 2, 255)));
        assert_eq!(parse_color("navy"), Some(Rgb::new(0, 0, 128)));
        assert_eq!(parse_color("#12"), None);
        assert_eq!(parse_color("hsl(1,2,3)"), None);
    }

    #[test]
    fn shorthand_spacing() {
        let d = parse_declarations("margin: 1px 2px 3px; padding: 4px");
        let got: Vec<f32> = d
            .iter()
            .map(|(_, v)| match v {
                StyleValue::Px(x) => *x,
                _ => panic!(),
            })
            .collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 2.0, 4.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn unsupported_dropped() {
        assert!(
            parse_declarations("font-size: 2em; margin: -4px; float: left; color: inherit")
                .is_empty()
        );
    }

    #[test]
    fn selector_lists_and_media() {
        let sheet = parse_stylesheet(
            "h1, .a , #b { color: red } @media (x) { p { color: blue } } div > p { color: red }",
        );
        assert_eq!(sheet.len(), 3);
        assert_eq!(sheet[1].selector, Selector::Class("a".into()));
    }

    #[test]
    fn display_and_visibility() {
        let d = parse_declarations("display: flex; visibility: hidden; display:none");
        assert_eq!(d[0], (StyleProperty::Flow, StyleValue::Flow(Flow::Row)));
        assert_eq!(d[1], (StyleProperty::Visible, StyleValue::Visible(false)));
        assert_eq!(d[2], (StyleProperty::Visible, StyleValue::Visible(false)));
    }
}
