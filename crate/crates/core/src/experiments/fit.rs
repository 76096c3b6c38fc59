use crate::error::{Error, Result};

/// Least-squares slope of `log2(error)` against `log2(parameter)`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::RateFit(format!("need at least 3 levels, got {}", pairs.len())));
    }
    if let Some(&(p, e)) = pairs.iter().find(|&&(p, e)| !(p > 0.0 && p.is_finite() && e > 0.0 && e.is_finite())) {
        return Err(Error::RateFit(format!("non-positive or non-finite entry (parameter {p}, error {e})")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|&(p, _)| p.log2()).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(_, e)| e.log2()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::RateFit("all parameters are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}
