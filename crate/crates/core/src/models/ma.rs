//! Five-day moving-average baseline.

pub const MA_WINDOW: usize = 5;

/// Mean of the last (up to) five values of `history`.
pub fn moving_average_forecast(history: &[f64]) -> f64 {
    let k = history.len().min(MA_WINDOW);
    if k == 0 {
        return 0.0;
    }
    history[history.len() - k..].iter().sum::<f64>() / k as f64
}
