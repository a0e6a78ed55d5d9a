//! A tolerant HTML tokenizer and tree builder, plus the matching serializer.

use std::collections::BTreeMap;

use super::css::{self, parse_declarations, parse_stylesheet};
use super::{Device, DocError, StyledDocument, StyledNode};

const VOID_TAGS: &[&str] = &[
    "img", "br", "hr", "input", "meta", "link", "source", "area", "base", "col", "wbr",
];
const SKIPPED_TAGS: &[&str] = &["script", "noscript", "template", "svg", "iframe"];

#[derive(Debug, PartialEq)]
enum Token {
    Start {
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
    },
    End(String),
    Text(String),
}

fn tokenize(input: &str) -> Result<Vec<Token>, DocError> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut text_start = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let is_markup = matches!(next, Some(c) if c.is_ascii_alphabetic() || c == b'/' || c == b'!' || c == b'?');
        if !is_markup {
            i += 1;
            continue;
        }
        if text_start < i {
            tokens.push(Token::Text(input[text_start..i].to_string()));
        }
        if input[i..].starts_with("<!--") {
            let end = input[i + 4..]
                .find("-->")
                .ok_or_else(|| DocError::MalformedInput("unterminated comment".into()))?;
            i += 4 + end + 3;
            text_start = i;
            continue;
        }
        let close = find_tag_end(bytes, i + 1)
            .ok_or_else(|| DocError::MalformedInput(format!("unterminated tag at byte {i}")))?;
        let inner = &input[i + 1..close];
        i = close + 1;
        text_start = i;
        if inner.starts_with('!') || inner.starts_with('?') {
            continue;
        }
        if let Some(name) = inner.strip_prefix('/') {
            tokens.push(Token::End(name.trim().to_ascii_lowercase()));
            continue;
        }
        let (name, attrs, self_closing) = parse_tag(inner);
        let raw_text = matches!(name.as_str(), "style" | "script" | "title" | "textarea")
            || SKIPPED_TAGS.contains(&name.as_str());
        tokens.push(Token::Start {
            name: name.clone(),
            attrs,
            self_closing,
        });
        if raw_text && !self_closing {
            let closing = format!("</{name}");
            let lower = input[i..].to_ascii_lowercase();
            let end = lower.find(&closing).unwrap_or(lower.len());
            tokens.push(Token::Text(input[i..i + end].to_string()));
            i += end;
            text_start = i;
        }
    }
    if text_start < bytes.len() {
        tokens.push(Token::Text(input[text_start..].to_string()));
    }
    Ok(tokens)
}

fn find_tag_end(bytes: &[u8], mut i: usize) -> Option<usize> {
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == b'"' || c == b'\'' => quote = Some(c),
            None if c == b'>' => return Some(i),
            None => {}
        }
        i += 1;
    }
    None
}

fn parse_tag(inner: &str) -> (String, Vec<(String, String)>, bool) {
    let trimmed = inner.trim_end();
    let self_closing = trimmed.ends_with('/');
    let body = trimmed.trim_end_matches('/');
    let name_end = body.find(|c: char| c.is_whitespace()).unwrap_or(body.len());
    let name = body[..name_end].to_ascii_lowercase();
    let mut attrs = Vec::new();
    let chars: Vec<char> = body[name_end..].chars().collect();
    let mut i = 0;
    while i < chars.len() {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '=' {
            i += 1;
        }
        if start == i {
            i += 1;
            continue;
        }
        let key: String = chars[start..i]
            .iter()
            .collect::<String>()
            .to_ascii_lowercase();
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < chars.len() && chars[i] == '=' {
            i += 1;
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if i < chars.len() && (chars[i] == '"' || chars[i] == '\'') {
                let q = chars[i];
                i += 1;
                let vs = i;
                while i < chars.len() && chars[i] != q {
                    i += 1;
                }
                value = chars[vs..i].iter().collect();
                i += 1;
            } else {
                let vs = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                value = chars[vs..i].iter().collect();
            }
        }
        attrs.push((key, decode_entities(&value)));
    }
    (name, attrs, self_closing)
}

fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let semi = rest.find(';').filter(|&s| s <= 10);
        let decoded = semi.and_then(|s| {
            let ent = &rest[1..s];
            let ch = match ent {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                _ => ent
                    .strip_prefix("#x")
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .or_else(|| ent.strip_prefix('#').and_then(|d| d.parse().ok()))
                    .and_then(char::from_u32),
            };
            ch.map(|c| (c, s))
        });
        match decoded {
            Some((c, s)) => {
                out.push(c);
                rest = &rest[s + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Provisional tree node used while building.
struct Proto {
    tag: String,
    attrs: Vec<(String, String)>,
    text: Vec<String>,
    children: Vec<usize>,
}

/// Parses HTML into a resolved [`StyledDocument`].
///
/// Unknown tags become generic block nodes; unclosed tags are closed at their
/// parent's boundary and stray end tags are ignored. `<style>` blocks anywhere
/// in the input contribute to the stylesheet.
pub fn parse_document(html_text: &str, device: Device) -> Result<StyledDocument, DocError> {
    if html_text.contains('\0') {
        return Err(DocError::MalformedInput("input contains NUL bytes".into()));
    }
    if html_text.trim().is_empty() {
        return Err(DocError::MalformedInput("empty input".into()));
    }
    let tokens = tokenize(html_text)?;

    // index 0 is the virtual document node
    let mut arena = vec![Proto {
        tag: "#document".into(),
        attrs: Vec::new(),
        text: Vec::new(),
        children: Vec::new(),
    }];
    let mut stack: Vec<usize> = vec![0];
    let mut css_text = String::new();
    let mut title: Option<String> = None;
    let mut raw_context: Option<String> = None;

    for token in tokens {
        match token {
            Token::Start {
                name,
                attrs,
                self_closing,
            } => {
                raw_context = None;
                if name == "style" || name == "title" || SKIPPED_TAGS.contains(&name.as_str()) {
                    if !self_closing {
                        raw_context = Some(name);
                    }
                    continue;
                }
                let parent = *stack.last().expect("document node never popped");
                let idx = arena.len();
                arena.push(Proto {
                    tag: name.clone(),
                    attrs,
                    text: Vec::new(),
                    children: Vec::new(),
                });
                arena[parent].children.push(idx);
                if !self_closing && !VOID_TAGS.contains(&name.as_str()) {
                    stack.push(idx);
                }
            }
            Token::End(name) => {
                raw_context = None;
                if let Some(pos) = stack.iter().rposition(|&i| i != 0 && arena[i].tag == name) {
                    stack.truncate(pos);
                }
            }
            Token::Text(text) => match raw_context.take().as_deref() {
                Some("style") => {
                    css_text.push_str(&text);
                    css_text.push('\n');
                }
                Some("title") => {
                    let t = collapse_whitespace(&decode_entities(&text));
                    if !t.is_empty() && title.is_none() {
                        title = Some(t);
                    }
                }
                Some(_) => {}
                None => {
                    let t = collapse_whitespace(&decode_entities(&text));
                    if !t.is_empty() {
                        let parent = *stack.last().expect("document node never popped");
                        arena[parent].text.push(t);
                    }
                }
            },
        }
    }

    // locate the body, or synthesize one from top-level content
    let body = arena.iter().position(|p| p.tag == "body");
    let root_children: Vec<usize> = match body {
        Some(_) => Vec::new(),
        None => {
            let mut out = Vec::new();
            for &c in &arena[0].children {
                if arena[c].tag == "html" {
                    out.extend(
                        arena[c]
                            .children
                            .iter()
                            .copied()
                            .filter(|&g| arena[g].tag != "head"),
                    );
                } else if arena[c].tag != "head" {
                    out.push(c);
                }
            }
            out
        }
    };
    let top_text: Vec<String> = arena[0].text.clone();
    if body.is_none() && root_children.is_empty() && top_text.is_empty() {
        return Err(DocError::MalformedInput(
            "no body content could be recovered".into(),
        ));
    }

    fn build(arena: &[Proto], idx: usize) -> StyledNode {
        let proto = &arena[idx];
        let mut node = StyledNode::new(proto.tag.clone());
        for (k, v) in &proto.attrs {
            match k.as_str() {
                "id" => {
                    if !v.trim().is_empty() {
                        node.id = Some(v.trim().to_string());
                    }
                }
                "class" => node.classes = v.split_whitespace().map(str::to_string).collect(),
                "style" => {
                    for (prop, value) in parse_declarations(v) {
                        node.declared.inline.insert(prop, value);
                    }
                }
                _ => {
                    node.attributes.insert(k.clone(), v.clone());
                }
            }
        }
        if !proto.text.is_empty() {
            node.text_content = Some(proto.text.join(" "));
        }
        node.children = proto
            .children
            .iter()
            .filter(|&&c| !matches!(arena[c].tag.as_str(), "head" | "meta" | "link" | "base"))
            .map(|&c| build(arena, c))
            .collect();
        node
    }

    let root = match body {
        Some(b) => {
            let mut root = build(&arena, b);
            root.tag = "body".into();
            root
        }
        None => {
            let mut root = StyledNode::new("body");
            root.children = root_children.iter().map(|&c| build(&arena, c)).collect();
            if !top_text.is_empty() {
                root.text_content = Some(top_text.join(" "));
            }
            root
        }
    };

    let mut doc = StyledDocument {
        root,
        title,
        stylesheet: parse_stylesheet(&css_text),
        source_url: None,
        device,
        viewport_width_px: device.viewport_width(),
    };
    doc.cascade();
    Ok(doc)
}

fn escape_text(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn escape_attr(text: &str) -> String {
    escape_text(text).replace('"', "&quot;")
}

/// Serializes a document back to HTML. Jitter mutations live in inline
/// declarations, so they survive a parse round trip.
pub fn serialize(doc: &StyledDocument) -> String {
    fn node_html(node: &StyledNode, out: &mut String) {
        out.push('<');
        out.push_str(&node.tag);
        if let Some(id) = &node.id {
            out.push_str(&format!(" id=\"{}\"", escape_attr(id)));
        }
        if !node.classes.is_empty() {
            out.push_str(&format!(
                " class=\"{}\"",
                escape_attr(&node.classes.join(" "))
            ));
        }
        let attrs: &BTreeMap<String, String> = &node.attributes;
        for (k, v) in attrs {
            out.push_str(&format!(" {}=\"{}\"", k, escape_attr(v)));
        }
        if !node.declared.inline.is_empty() {
            out.push_str(&format!(
                " style=\"{}\"",
                escape_attr(&css::render_map(&node.declared.inline))
            ));
        }
        if VOID_TAGS.contains(&node.tag.as_str()) {
            out.push_str("/>");
            return;
        }
        out.push('>');
        if let Some(text) = &node.text_content {
            out.push_str(&escape_text(text));
        }
        for child in &node.children {
            node_html(child, out);
        }
        out.push_str("</");
        out.push_str(&node.tag);
        out.push('>');
    }

    let mut out = String::from("<html><head>");
    if let Some(title) = &doc.title {
        out.push_str(&format!("<title>{}</title>", escape_text(title)));
    }
    out.push_str("<style>");
    out.push_str(&css::render_stylesheet(&doc.stylesheet));
    out.push_str("</style></head>");
    node_html(&doc.root, &mut out);
    out.push_str("</html>");
    out
}
