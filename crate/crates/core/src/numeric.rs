//! Small numerical helpers shared across modules.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Correctly rounded sum of a sequence of floats.
///
/// Shewchuk's non-overlapping partials with the half-even correction used by
/// CPython's `math.fsum`. The result equals the exact sum rounded once, so
/// `n` copies of `c` sum to exactly `(n as f64) * c` whenever that product is
/// itself correctly rounded.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    let mut special = 0.0;
    for mut x in values {
        if !x.is_finite() {
            special += x;
            continue;
        }
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    if special != 0.0 || special.is_nan() {
        return special;
    }

    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Round half to even across the remaining partials.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

/// `count` points from `min` to `max` inclusive. A single point sits at `max`.
pub fn linear_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("grid count must be at least 1"));
    }
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::invalid("grid endpoints must be finite"));
    }
    if count == 1 {
        return Ok(vec![max]);
    }
    let step = (max - min) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i + 1 == count { max } else { min + step * i as f64 })
        .collect())
}

/// Logarithmically spaced grid; both endpoints must be positive.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if min <= 0.0 || max <= 0.0 {
        return Err(Error::invalid("log grids require positive endpoints"));
    }
    let exps = linear_grid(min.log10(), max.log10(), count)?;
    let n = exps.len();
    Ok(exps
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            if i + 1 == n {
                max
            } else if i == 0 && n > 1 {
                min
            } else {
                10f64.powf(e)
            }
        })
        .collect())
}

/// Formats a float with 17 significant digits, enough to round-trip an f64.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // keep the sign of negative zero out of the output
        return "0".to_string();
    }
    format!("{x:.16e}")
}
