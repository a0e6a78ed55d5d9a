//! Procedurally generated, cleanly designed mobile pages for tests and demos.
//!
//! Every page follows one consistent design system: a light background, dark
//! body text, a single accent color, a fixed type scale and a 16px grid. That
//! regularity is exactly what the jitters break.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_jsonl, CorpusEntry, DatasetError, CORPUS_MANIFEST};
use crate::doc::Device;
use crate::seed::{mix_seed, seeded_rng};

pub const ACCENTS: [(&str, &str); 8] = [
    ("blue", "#1f5fbf"),
    ("green", "#1e7d45"),
    ("red", "#b3261e"),
    ("purple", "#6b3fa0"),
    ("orange", "#c25e00"),
    ("teal", "#00727a"),
    ("pink", "#b0306a"),
    ("navy", "#1b2a5c"),
];

pub const PAGE_KINDS: [&str; 10] = [
    "login",
    "signup",
    "settings",
    "profile",
    "dashboard",
    "checkout",
    "search",
    "article",
    "chat",
    "onboarding",
];

const BACKGROUNDS: [&str; 4] = ["#ffffff", "#fafafa", "#f7f7f2", "#f5f7fa"];
const WORDS: [&str; 32] = [
    "account", "order", "status", "today", "messages", "photos", "update", "review", "team",
    "plan", "details", "payment", "weekly", "report", "travel", "music", "notes", "friends",
    "history", "saved", "offers", "events", "project", "budget", "health", "goals", "recent",
    "store", "delivery", "support", "family", "library",
];

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..=hi);
    (0..n)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn capitalized(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

struct PageBuilder {
    body: String,
}

impl PageBuilder {
    fn push(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    fn heading(&mut self, text: &str) {
        self.push(&format!("<h2 class=\"section\">{text}</h2>"));
    }

    fn para(&mut self, rng: &mut ChaCha8Rng) {
        let text = capitalized(&words(rng, 6, 16));
        self.push(&format!("<p class=\"body\">{text}</p>"));
    }

    fn field(&mut self, label: &str) {
        self.push(&format!(
            "<p class=\"label\">{label}</p><div class=\"field\">{label}</div>"
        ));
    }

    fn button(&mut self, text: &str) {
        self.push(&format!("<div class=\"button\">{text}</div>"));
    }

    fn list(&mut self, rng: &mut ChaCha8Rng, n: usize) {
        for _ in 0..n {
            let t = capitalized(&words(rng, 2, 4));
            self.push(&format!(
                "<div class=\"item\"><p class=\"item-title\">{t}</p><p class=\"meta\">{}</p></div>",
                words(rng, 2, 3)
            ));
        }
    }

    fn cards(&mut self, rng: &mut ChaCha8Rng, n: usize) {
        self.push("<div class=\"row\">");
        for _ in 0..n {
            let t = capitalized(&words(rng, 1, 1));
            self.push(&format!(
                "<div class=\"card\"><p class=\"stat\">{}</p><p class=\"meta\">{t}</p></div>",
                rng.random_range(2..99)
            ));
        }
        self.push("</div>");
    }

    fn image(&mut self, h: u32) {
        self.push(&format!("<img class=\"media\" height=\"{h}\">"));
    }

    fn chat(&mut self, rng: &mut ChaCha8Rng, n: usize) {
        for i in 0..n {
            let class = if i % 2 == 0 {
                "bubble-in"
            } else {
                "bubble-out"
            };
            self.push(&format!(
                "<div class=\"{class}\">{}</div>",
                capitalized(&words(rng, 3, 8))
            ));
        }
    }
}

/// One page: `(html, caption)`.
pub fn generate_page(seed: u64) -> (String, String) {
    let mut rng = seeded_rng(seed);
    let (accent_name, accent) = *ACCENTS.choose(&mut rng).expect("non-empty");
    let kind = *PAGE_KINDS.choose(&mut rng).expect("non-empty");
    let background = *BACKGROUNDS.choose(&mut rng).expect("non-empty");
    let caption = format!("{accent_name} {kind} screen");
    let title = capitalized(kind);

    let mut b = PageBuilder {
        body: String::new(),
    };
    match kind {
        "login" => {
            b.heading("Welcome back");
            b.para(&mut rng);
            b.field("Email");
            b.field("Password");
            b.button("Log in");
            b.push("<p class=\"meta\">Forgot password</p>");
        }
        "signup" => {
            b.heading("Create account");
            for f in ["Name", "Email", "Password"] {
                b.field(f);
            }
            b.button("Sign up");
            b.para(&mut rng);
        }
        "settings" => {
            for _ in 0..rng.random_range(2..=3) {
                b.heading(&capitalized(&words(&mut rng, 1, 2)));
                let n = rng.random_range(2..=3);
                b.list(&mut rng, n);
            }
        }
        "profile" => {
            b.image(96);
            b.heading(&capitalized(&words(&mut rng, 2, 2)));
            b.para(&mut rng);
            let n = rng.random_range(2..=3);
            b.cards(&mut rng, n);
            b.button("Edit profile");
        }
        "dashboard" => {
            let n = rng.random_range(2..=3);
            b.cards(&mut rng, n);
            b.heading("Recent activity");
            let n = rng.random_range(3..=5);
            b.list(&mut rng, n);
        }
        "checkout" => {
            b.heading("Your cart");
            let n = rng.random_range(2..=3);
            b.list(&mut rng, n);
            b.field("Card number");
            b.button("Pay now");
        }
        "search" => {
            b.push("<div class=\"field\">Search</div>");
            let n = rng.random_range(4..=6);
            b.list(&mut rng, n);
        }
        "article" => {
            b.image(120);
            b.heading(&capitalized(&words(&mut rng, 3, 5)));
            for _ in 0..rng.random_range(2..=4) {
                b.para(&mut rng);
            }
        }
        "chat" => {
            let n = rng.random_range(4..=7);
            b.chat(&mut rng, n);
            b.push("<div class=\"field\">Message</div>");
        }
        _ => {
            b.image(140);
            b.heading(&capitalized(&words(&mut rng, 2, 4)));
            b.para(&mut rng);
            b.button("Get started");
        }
    }

    let css = format!(
        "body {{ background-color: {background}; color: #222222; font-size: 14px; margin: 0; padding: 0; }}
.topbar {{ background-color: {accent}; color: #ffffff; font-size: 20px; padding: 16px; }}
.content {{ padding: 16px; }}
.section {{ font-size: 18px; color: #111111; margin: 16px 0 8px 0; }}
.body {{ font-size: 14px; color: #444444; margin: 0 0 8px 0; }}
.label {{ font-size: 12px; color: #666666; margin: 8px 0 4px 0; }}
.field {{ background-color: #eeeeee; color: #777777; padding: 12px; margin: 0 0 8px 0; }}
.button {{ background-color: {accent}; color: #ffffff; font-size: 16px; padding: 12px 16px; margin: 16px 0 8px 0; }}
.item {{ padding: 8px 0; margin: 0 0 8px 0; }}
.item-title {{ font-size: 16px; color: #222222; }}
.meta {{ font-size: 12px; color: #777777; }}
.row {{ display: flex; margin: 8px 0; }}
.card {{ background-color: #ffffff; padding: 12px; margin: 0 8px 8px 0; }}
.stat {{ font-size: 24px; color: {accent}; }}
.media {{ margin: 0 0 8px 0; }}
.bubble-in {{ background-color: #e9e9ee; color: #222222; padding: 8px 12px; margin: 0 64px 8px 0; }}
.bubble-out {{ background-color: {accent}; color: #ffffff; padding: 8px 12px; margin: 0 0 8px 64px; }}
.footer {{ background-color: #eeeeee; color: #666666; font-size: 12px; padding: 16px; }}"
    );
    let html = format!(
        "<!DOCTYPE html>\n<html><head><title>{title}</title><style>\n{css}\n</style></head>\n<body>\n<div class=\"topbar\">{title}</div>\n<div class=\"content\">\n{}</div>\n<div class=\"footer\">{}</div>\n</body></html>\n",
        b.body,
        capitalized(&words(&mut rng, 2, 4))
    );
    (html, caption)
}

/// Writes `pages` fixture pages plus a `corpus.jsonl` sidecar into `dir`.
pub fn write_fixture_corpus(
    dir: &Path,
    pages: usize,
    seed: u64,
) -> Result<Vec<CorpusEntry>, DatasetError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(pages);
    for i in 0..pages {
        let (html, caption) = generate_page(mix_seed(seed, i as u64));
        let path = format!("page-{i:04}.html");
        std::fs::write(dir.join(&path), html)?;
        entries.push(CorpusEntry {
            path,
            url: Some(format!("https://fixtures.test/{i}")),
            caption: Some(caption),
            device: Some(Device::Mobile),
        });
    }
    write_jsonl(&dir.join(CORPUS_MANIFEST), &entries)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{parse_document, Device};

    #[test]
    fn pages_parse_and_are_deterministic() {
        for s in 0..40 {
            let (html, caption) = generate_page(s);
            assert_eq!(generate_page(s).0, html);
            let doc = parse_document(&html, Device::Mobile).unwrap();
            assert!(doc.nodes().len() > 5);
            assert!(caption.ends_with(" screen"));
        }
    }
}
