//! Sliding-window plans: reference counts and coverage properties.

use jitterlab_assess::{plan_windows, window_offsets, WINDOW};
use proptest::prelude::*;

#[test]
fn reference_window_counts() {
    assert_eq!(plan_windows(224, 224).count(), 1);
    assert_eq!(window_offsets(500), vec![0, 138, 276]);
    assert_eq!(window_offsets(672).len(), 4);
    assert_eq!(window_offsets(224), vec![0]);
}

#[test]
fn landscape_inputs_slide_horizontally() {
    let p = plan_windows(1000, 500);
    assert!(p.horizontal);
    assert_eq!((p.resized_width, p.resized_height), (448, 224));
    assert_eq!(p.offsets, vec![0, 112, 224]);
}

proptest! {
    #[test]
    fn windows_cover_the_long_axis(w in 1u32..3000, h in 1u32..3000) {
        let p = plan_windows(w, h);
        let d = p.long_axis;
        prop_assert_eq!(p.resized_width.min(p.resized_height), WINDOW);
        prop_assert_eq!(p.resized_width.max(p.resized_height), d);
        prop_assert_eq!(p.count() as u32, d / WINDOW + 1 - u32::from(d == WINDOW));
        prop_assert_eq!(p.offsets[0], 0);
        prop_assert_eq!(*p.offsets.last().unwrap(), d - WINDOW);
        for pair in p.offsets.windows(2) {
            prop_assert!(pair[0] <= pair[1]);
            // No gap between consecutive windows.
            prop_assert!(pair[1] <= pair[0] + WINDOW);
        }
    }

    #[test]
    fn aspect_is_preserved(w in 1u32..3000, h in 1u32..3000) {
        let p = plan_windows(w, h);
        let (short, long) = (w.min(h) as f64, w.max(h) as f64);
        let expected = (long * WINDOW as f64 / short).round().max(WINDOW as f64);
        prop_assert_eq!(p.long_axis as f64, expected);
    }
}
