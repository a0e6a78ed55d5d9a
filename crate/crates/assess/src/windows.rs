//! Sliding-window planning for screenshots of arbitrary aspect ratio.

use serde::{Deserialize, Serialize};

/// Side of every window (the model's input size).
pub const WINDOW: u32 = 224;

/// How a screenshot is resized and cut into square windows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub resized_width: u32,
    pub resized_height: u32,
    /// Length of the long axis after resizing.
    pub long_axis: u32,
    /// Whether windows slide horizontally (landscape input).
    pub horizontal: bool,
    /// Window start positions along the long axis.
    pub offsets: Vec<u32>,
}

impl WindowPlan {
    pub fn count(&self) -> usize {
        self.offsets.len()
    }
}

/// Scales the smaller side to [`WINDOW`] and places `⌊d/224⌋ + 1` evenly
/// spaced windows along the long axis `d` (offset `i` is
/// `round(i·(d−224)/(n−1))`). An exactly square input gets one window.
pub fn plan_windows(width: u32, height: u32) -> WindowPlan {
    assert!(width >= 1 && height >= 1, "image must be non-empty");
    let horizontal = width > height;
    let (short, long) = if horizontal {
        (height, width)
    } else {
        (width, height)
    };
    let d = ((long as f64 * WINDOW as f64 / short as f64).round() as u32).max(WINDOW);
    let (resized_width, resized_height) = if horizontal { (d, WINDOW) } else { (WINDOW, d) };
    WindowPlan {
        resized_width,
        resized_height,
        long_axis: d,
        horizontal,
        offsets: window_offsets(d),
    }
}

/// Window offsets along a long axis of length `d ≥ 224`.
pub fn window_offsets(d: u32) -> Vec<u32> {
    if d <= WINDOW {
        return vec![0];
    }
    let n = d / WINDOW + 1;
    let span = (d - WINDOW) as f64;
    (0..n)
        .map(|i| (i as f64 * span / (n - 1) as f64).round() as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_counts() {
        assert_eq!(plan_windows(224, 224).offsets, vec![0]);
        assert_eq!(window_offsets(500), vec![0, 138, 276]);
        assert_eq!(window_offsets(672).len(), 4);
        let p = plan_windows(360, 800);
        assert_eq!((p.resized_width, p.resized_height), (224, 498));
        assert!(!p.horizontal);
        assert!(plan_windows(1000, 200).horizontal);
    }
}
