//! Chain summaries: means with batch-means Monte Carlo standard errors.

/// Mean of `xs` and its batch-means standard error.
///
/// The chain is cut into `⌊√N⌋` consecutive batches of equal size (the
/// ragged tail is dropped for the error estimate); the standard error is the
/// standard deviation of the batch means over `√(batches)`.
pub fn batch_means(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let batch_size = (n as f64).sqrt().floor() as usize;
    let batches = if batch_size == 0 { 0 } else { n / batch_size };
    if batches < 2 {
        return (mean, f64::NAN);
    }
    let used = batches * batch_size;
    let grand = xs[..used].iter().sum::<f64>() / used as f64;
    let var = xs[..used]
        .chunks_exact(batch_size)
        .map(|c| {
            let m = c.iter().sum::<f64>() / batch_size as f64;
            (m - grand) * (m - grand)
        })
        .sum::<f64>()
        / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// A posterior summary estimated from a chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_draws(xs: &[f64]) -> Self {
        let (mean, std_error) = batch_means(xs);
        Estimate { mean, std_error }
    }

    /// `|mean − reference|` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference).abs() / self.std_error
    }
}

/// Max minus min of the values.
pub fn range(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = xs
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}
