#![allow(dead_code)]

use std::collections::BTreeSet;

use jitterlab_core::dataset::{synthesize_corpus, ForgeOptions};
use jitterlab_core::doc::{parse_document, Device};
use jitterlab_core::fixtures::{generate_page, write_fixture_corpus};
use jitterlab_core::raster::{render, Bitmap};
use jitterlab_model::data::{resize_short_side, square_crop, ContrastiveItem, DatasetView};

/// `n` rendered fixture pages with pairwise-distinct captions.
pub fn distinct_pages(n: usize) -> Vec<(Bitmap, String)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < n {
        let (html, caption) = generate_page(seed);
        seed += 1;
        if !seen.insert(caption.clone()) {
            continue;
        }
        let doc = parse_document(&html, Device::Mobile).expect("fixture parses");
        out.push((render(&doc), caption));
    }
    out
}

/// A contrastive view over `n` pages with distinct descriptions. Each image
/// is the top 224-square of its page, so random crops are the identity and
/// the samples are truly fixed.
pub fn contrastive_view(n: usize) -> DatasetView {
    let mut view = DatasetView::default();
    for (i, (bitmap, caption)) in distinct_pages(n).into_iter().enumerate() {
        view.images
            .push(square_crop(&resize_short_side(&bitmap, 224), 224, 0.0));
        view.ids.push(format!("p{i}"));
        view.contrastive.push(ContrastiveItem {
            image: i,
            description: format!("ui screenshot. well-designed. {caption}"),
        });
    }
    view
}

/// Forges `pages` fixture pages (3 variants each) and loads the result.
pub fn forged_view(pages: usize, seed: u64) -> (tempfile::TempDir, DatasetView) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let out = dir.path().join("forged");
    write_fixture_corpus(&corpus, pages, seed).unwrap();
    synthesize_corpus(
        &corpus,
        &out,
        &ForgeOptions {
            seed,
            ..ForgeOptions::default()
        },
    )
    .unwrap();
    let view = DatasetView::load(&out, None, 224).unwrap();
    (dir, view)
}
