//! Encoder contracts on randomly initialized default-shape parameters.

use proptest::prelude::*;

use jitterlab_core::doc::Rgb;
use jitterlab_core::raster::Bitmap;
use jitterlab_model::tokenizer::{tokenize, END, START};
use jitterlab_model::{dot, Model, ModelConfig, ModelError};

fn model() -> Model {
    Model::init(ModelConfig::default(), 42)
}

fn norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

#[test]
fn image_embeddings_are_unit_and_input_sensitive() {
    let m = model();
    let black = m
        .encode_image(&Bitmap::filled(224, 224, Rgb::BLACK))
        .unwrap();
    let white = m
        .encode_image(&Bitmap::filled(224, 224, Rgb::WHITE))
        .unwrap();
    assert_eq!(black.len(), 128);
    assert!((norm(&black) - 1.0).abs() < 1e-5);
    assert!((norm(&white) - 1.0).abs() < 1e-5);
    assert!(dot(&black, &white) < 1.0 - 1e-6);
    assert_eq!(
        black,
        m.encode_image(&Bitmap::filled(224, 224, Rgb::BLACK))
            .unwrap()
    );
}

#[test]
fn wrong_image_size_is_rejected() {
    let m = model();
    let err = m
        .encode_image(&Bitmap::filled(200, 224, Rgb::BLACK))
        .unwrap_err();
    assert!(matches!(
        err,
        ModelError::BadDimensions {
            width: 200,
            height: 224,
            ..
        }
    ));
}

#[test]
fn batched_and_single_encoding_agree() {
    let m = model();
    let a = Bitmap::filled(224, 224, Rgb::new(10, 200, 30));
    let b = Bitmap::filled(224, 224, Rgb::new(250, 0, 90));
    let batch = m.encode_images(&[&a, &b]).unwrap();
    for (x, y) in batch[1].iter().zip(m.encode_image(&b).unwrap()) {
        assert!((x - y).abs() < 1e-5);
    }
    let texts = m.encode_texts(&["login screen", "a much longer description of a page"]);
    for (x, y) in texts[0].iter().zip(m.encode_text("login screen")) {
        assert!((x - y).abs() < 1e-5);
    }
}

#[test]
fn distinct_texts_are_not_parallel() {
    let m = model();
    let a = m.encode_text("ui screenshot. well-designed. login screen");
    let b = m.encode_text("ui screenshot. poor design. bad color choice. checkout screen");
    assert!(dot(&a, &b) < 1.0 - 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn text_embeddings_are_unit_norm(text in "[a-z .,-]{0,120}") {
        let m = Model::init(ModelConfig::default(), 1);
        let e = m.encode_text(&text);
        prop_assert!((norm(&e) - 1.0).abs() < 1e-5);
        prop_assert_eq!(e, m.encode_text(&text));
    }

    #[test]
    fn tokenizer_bounds(text in "\\PC{0,400}") {
        let ids = tokenize(&text);
        prop_assert!(ids.len() >= 2 && ids.len() <= 77);
        prop_assert_eq!(ids[0], START);
        prop_assert_eq!(*ids.last().unwrap(), END);
        prop_assert!(ids[1..ids.len() - 1].iter().all(|&i| (2..8192).contains(&i)));
    }
}
