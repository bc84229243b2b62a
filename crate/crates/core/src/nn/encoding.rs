use crate::error::{Error, Result};

pub const DEFAULT_LEVELS: usize = 6;

/// Multi-frequency sinusoidal features of a scalar.
///
/// With `x = p / p_max` the output is
/// `[sin(pi x), cos(pi x), sin(2 pi x), cos(2 pi x), ..., sin(2^(L-1) pi x), cos(2^(L-1) pi x)]`.
pub fn sinusoidal_encode(p: f64, p_max: f64, levels: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; 2 * levels];
    sinusoidal_encode_into(p, p_max, &mut out)?;
    Ok(out)
}

/// Writes `out.len() / 2` levels into `out`.
pub fn sinusoidal_encode_into(p: f64, p_max: f64, out: &mut [f64]) -> Result<()> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "encoding scale must be positive, got {p_max}"
        )));
    }
    if !p.is_finite() {
        return Err(Error::InvalidParams(format!("cannot encode non-finite value {p}")));
    }
    let x = p / p_max;
    let mut freq = std::f64::consts::PI;
    for pair in out.chunks_exact_mut(2) {
        let (s, c) = (freq * x).sin_cos();
        pair[0] = s;
        pair[1] = c;
        freq *= 2.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_encodes_to_unit_cosines() {
        let e = sinusoidal_encode(0.0, 3.0, DEFAULT_LEVELS).unwrap();
        assert_eq!(e.len(), 12);
        for pair in e.chunks(2) {
            assert_eq!(pair, &[0.0, 1.0]);
        }
    }

    #[test]
    fn top_of_range_single_level() {
        let e = sinusoidal_encode(2.5, 2.5, 1).unwrap();
        assert!(e[0].abs() < 1e-15);
        assert_eq!(e[1], -1.0);
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(sinusoidal_encode(1.0, 0.0, 6).is_err());
        assert!(sinusoidal_encode(1.0, -1.0, 6).is_err());
        assert!(sinusoidal_encode(f64::NAN, 1.0, 6).is_err());
    }

    #[test]
    fn injective_on_fine_grid() {
        let grid: Vec<Vec<f64>> = (0..=1000)
            .map(|i| sinusoidal_encode(i as f64 * 1e-3, 1.0, 6).unwrap())
            .collect();
        let mut closest = f64::INFINITY;
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                let d: f64 = grid[i]
                    .iter()
                    .zip(&grid[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                closest = closest.min(d);
            }
        }
        assert!(closest > 1e-6, "closest pair at {closest}");
    }
}
