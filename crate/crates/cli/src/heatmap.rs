//! Binary PPM rendering of fidelity maps.
//!
//! One pixel per cell. Columns run over φ left to right, rows over θ with
//! the largest θ on top. Colors interpolate linearly between dark blue at
//! 0, white at 0.5 and dark red at 1; values outside [0, 1] are clamped and
//! NaN cells are black.

use crate::map::FidelityMap;

pub const DARK_BLUE: [u8; 3] = [0, 0, 139];
pub const WHITE: [u8; 3] = [255, 255, 255];
pub const DARK_RED: [u8; 3] = [139, 0, 0];
pub const BLACK: [u8; 3] = [0, 0, 0];

pub fn color(value: f64) -> [u8; 3] {
    if value.is_nan() {
        return BLACK;
    }
    let v = value.clamp(0.0, 1.0);
    let (from, to, t) = if v <= 0.5 { (DARK_BLUE, WHITE, v * 2.0) } else { (WHITE, DARK_RED, (v - 0.5) * 2.0) };
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (from[c] as f64 + (to[c] as f64 - from[c] as f64) * t).round() as u8;
    }
    out
}

/// The P6 file for `map`, with its config hash and mode in a header comment.
pub fn render_heatmap(map: &FidelityMap) -> Vec<u8> {
    let (rows, cols) = (map.thetas.len(), map.phis.len());
    let mut out = format!(
        "P6\n# config_hash={} mode={}\n{cols} {rows}\n255\n",
        map.config_hash,
        map.mode.name()
    )
    .into_bytes();
    out.reserve(rows * cols * 3);
    for i in (0..rows).rev() {
        for j in 0..cols {
            out.extend_from_slice(&color(map.fidelity(i, j)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::MapMode;

    fn map(values: Vec<f64>, rows: usize, cols: usize) -> FidelityMap {
        FidelityMap {
            thetas: (0..rows).map(|i| i as f64).collect(),
            phis: (0..cols).map(|j| j as f64).collect(),
            fidelities: values,
            seconds: vec![0.0; rows * cols],
            config_hash: "abc".into(),
            mode: MapMode::Design,
        }
    }

    fn pixels(bytes: &[u8]) -> &[u8] {
        let mut newlines = 0;
        let start = bytes.iter().position(|&b| {
            newlines += (b == b'\n') as usize;
            newlines == 4
        });
        &bytes[start.unwrap() + 1..]
    }

    #[test]
    fn colormap_stops() {
        assert_eq!(color(0.0), DARK_BLUE);
        assert_eq!(color(0.5), WHITE);
        assert_eq!(color(1.0), DARK_RED);
        assert_eq!(color(f64::NAN), BLACK);
        assert_eq!(color(-3.0), DARK_BLUE);
        assert_eq!(color(1.5), DARK_RED);
        assert_eq!(color(0.25), [128, 128, 197]);
    }

    #[test]
    fn header_layout() {
        let bytes = render_heatmap(&map(vec![1.0; 6], 2, 3));
        assert!(bytes.starts_with(b"P6\n# config_hash=abc mode=design\n3 2\n255\n"));
        assert_eq!(pixels(&bytes).len(), 18);
    }

    #[test]
    fn uniform_maps() {
        let ones = render_heatmap(&map(vec![1.0; 12], 3, 4));
        assert!(pixels(&ones).chunks(3).all(|p| p == DARK_RED));
        let nans = render_heatmap(&map(vec![f64::NAN; 12], 3, 4));
        assert!(pixels(&nans).iter().all(|&b| b == 0));
    }

    #[test]
    fn checkerboard_bytes() {
        let (rows, cols) = (3, 4);
        let values: Vec<f64> = (0..rows * cols).map(|k| ((k / cols + k % cols) % 2) as f64).collect();
        let bytes = render_heatmap(&map(values, rows, cols));
        let mut expected = Vec::new();
        for i in (0..rows).rev() {
            for j in 0..cols {
                expected.extend_from_slice(if (i + j) % 2 == 1 { &DARK_RED } else { &DARK_BLUE });
            }
        }
        assert_eq!(pixels(&bytes), &expected[..]);
    }
}
