//! Gray-coded rectangular 8-QAM with unit mean symbol energy, plus the bit
//! error counting used by the BER benchmark.
//!
//! The constellation is the 4x2 grid {-3, -1, +1, +3} x {-1, +1} scaled by
//! 1/sqrt(6). The first two bits of each 3-bit label Gray-code the in-phase
//! column, the third bit selects the quadrature row, so nearest neighbors
//! always differ in exactly one bit.

use num_complex::Complex64;

use crate::error::{CopraError, Result};

/// Normalization giving unit mean symbol energy: (E[I^2] + E[Q^2]) = (5 + 1)/6.
const SCALE: f64 = 0.408_248_290_463_863; // 1/sqrt(6)

const I_LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
/// Gray order over the I columns: 00, 01, 11, 10 map to -3, -1, +1, +3.
const I_GRAY: [usize; 4] = [0b00, 0b01, 0b11, 0b10];

pub const BITS_PER_SYMBOL: usize = 3;

/// The 8 constellation points indexed by their 3-bit label.
pub fn constellation() -> [Complex64; 8] {
    let mut points = [Complex64::new(0.0, 0.0); 8];
    for (col, &label_hi) in I_GRAY.iter().enumerate() {
        for q_bit in 0..2 {
            let label = (label_hi << 1) | q_bit;
            let q = if q_bit == 0 { -1.0 } else { 1.0 };
            points[label] = Complex64::new(I_LEVELS[col] * SCALE, q * SCALE);
        }
    }
    points
}

/// Map a bit string (length divisible by 3) to 8-QAM symbols.
pub fn qam8_mod(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % BITS_PER_SYMBOL != 0 {
        return Err(CopraError::InvalidInput(format!(
            "bit count {} is not divisible by {BITS_PER_SYMBOL}",
            bits.len()
        )));
    }
    if let Some(bad) = bits.iter().find(|&&b| b > 1) {
        return Err(CopraError::InvalidInput(format!(
            "bits must be 0 or 1, got {bad}"
        )));
    }
    let points = constellation();
    Ok(bits
        .chunks_exact(BITS_PER_SYMBOL)
        .map(|chunk| {
            let label = (chunk[0] as usize) << 2 | (chunk[1] as usize) << 1 | chunk[2] as usize;
            points[label]
        })
        .collect())
}

/// Nearest-neighbor hard decisions; on an exact distance tie the
/// lexicographically smallest bit label wins.
pub fn qam8_demod(symbols: &[Complex64]) -> Vec<u8> {
    let points = constellation();
    let mut bits = Vec::with_capacity(symbols.len() * BITS_PER_SYMBOL);
    for &s in symbols {
        let mut best_label = 0usize;
        let mut best_dist = f64::INFINITY;
        for (label, &p) in points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_dist {
                best_dist = d;
                best_label = label;
            }
        }
        bits.push(((best_label >> 2) & 1) as u8);
        bits.push(((best_label >> 1) & 1) as u8);
        bits.push((best_label & 1) as u8);
    }
    bits
}

/// Fraction of differing bits.
pub fn bit_error_rate(sent: &[u8], received: &[u8]) -> Result<f64> {
    if sent.len() != received.len() || sent.is_empty() {
        return Err(CopraError::InvalidInput(format!(
            "bit streams must be nonempty and equal length ({} vs {})",
            sent.len(),
            received.len()
        )));
    }
    let errors = sent.iter().zip(received).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / sent.len() as f64)
}
