//! Linear XEB and the Porter-Thomas family of densities.

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// `F = 2^n * mean(p) - 1` and its standard error `2^n * sd(p) / sqrt(m)`
/// (sample standard deviation; zero for a single sample).
pub fn xeb_fidelity(probabilities: &[f64], n_qubits: usize) -> Result<(f64, f64), AnalysisError> {
    let m = probabilities.len();
    if m == 0 {
        return Err(AnalysisError::EmptySamples);
    }
    let dim = 2f64.powi(n_qubits as i32);
    let mean = probabilities.iter().sum::<f64>() / m as f64;
    let var = if m > 1 {
        probabilities
            .iter()
            .map(|p| (p - mean).powi(2))
            .sum::<f64>()
            / (m - 1) as f64
    } else {
        0.0
    };
    Ok((dim * mean - 1.0, dim * var.sqrt() / (m as f64).sqrt()))
}

/// Density of `x = N p` for a state sampled with fidelity `f`:
/// `(f x + 1 - f) e^{-x}`.
pub fn porter_thomas_pdf(x: f64, f: f64) -> f64 {
    (f * x + 1.0 - f) * (-x).exp()
}

pub fn porter_thomas_cdf(x: f64, f: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - (-x).exp() * (1.0 + f * x)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `xs`
/// and the model at fidelity `f`.
pub fn ks_statistic(xs: &[f64], f: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = porter_thomas_cdf(x, f);
            (c - i as f64 / m).abs().max(((i + 1) as f64 / m - c).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
    /// Model density averaged over the bin, at the fitted fidelity.
    pub model_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XebReport {
    pub n_qubits: usize,
    pub n_samples: usize,
    pub fidelity: f64,
    pub stderr: f64,
    /// KS distance to the model at the fitted fidelity clamped to `[0, 1]`.
    pub ks_statistic: f64,
    /// Samples with `x` beyond the last bin.
    pub overflow: u64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramSpec {
    pub bins: usize,
    pub x_max: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            bins: 40,
            x_max: 10.0,
        }
    }
}

impl XebReport {
    pub fn from_probabilities(
        probabilities: &[f64],
        n_qubits: usize,
        spec: HistogramSpec,
    ) -> Result<Self, AnalysisError> {
        let (fidelity, stderr) = xeb_fidelity(probabilities, n_qubits)?;
        let dim = 2f64.powi(n_qubits as i32);
        let xs: Vec<f64> = probabilities.iter().map(|p| dim * p).collect();
        let f_model = fidelity.clamp(0.0, 1.0);
        let width = spec.x_max / spec.bins as f64;
        let mut histogram: Vec<HistogramBin> = (0..spec.bins)
            .map(|b| {
                let (l, r) = (b as f64 * width, (b + 1) as f64 * width);
                let model_density =
                    (porter_thomas_cdf(r, f_model) - porter_thomas_cdf(l, f_model)) / width;
                HistogramBin {
                    bin_left: l,
                    bin_right: r,
                    count: 0,
                    model_density,
                }
            })
            .collect();
        let mut overflow = 0;
        for &x in &xs {
            let b = (x / width).floor() as usize;
            match histogram.get_mut(b) {
                Some(bin) => bin.count += 1,
                None => overflow += 1,
            }
        }
        Ok(Self {
            n_qubits,
            n_samples: xs.len(),
            fidelity,
            stderr,
            ks_statistic: ks_statistic(&xs, f_model),
            overflow,
            histogram,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `bin_left,bin_right,count,model_density` rows with a header line.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count,model_density\n");
        for b in &self.histogram {
            s.push_str(&format!(
                "{},{},{},{}\n",
                b.bin_left, b.bin_right, b.count, b.model_density
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_probabilities_give_zero() {
        let (f, se) = xeb_fidelity(&[1.0 / 16.0; 10], 4).unwrap();
        assert!(f.abs() < 1e-12);
        assert!(se.abs() < 1e-12);
        assert!(matches!(
            xeb_fidelity(&[], 4),
            Err(AnalysisError::EmptySamples)
        ));
    }

    #[test]
    fn pdf_values() {
        assert_eq!(porter_thomas_pdf(0.0, 0.0), 1.0);
        for x in [0.0, 0.5, 2.0, 7.0] {
            assert!((porter_thomas_pdf(x, 1.0) - x * (-x).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        for f in [0.0, 0.2, 0.5, 1.0] {
            // Simpson on [0, 60]
            let (n, h) = (60_000, 60.0 / 60_000.0);
            let s: f64 = (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * porter_thomas_pdf(i as f64 * h, f)
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((s - 1.0).abs() < 1e-8, "f = {f}: {s}");
            assert!((porter_thomas_cdf(60.0, f) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        // x_i at the (i + 1/2)/m quantiles of the F = 0 model
        let m = 1000;
        let xs: Vec<f64> = (0..m)
            .map(|i| -(1.0 - (i as f64 + 0.5) / m as f64).ln())
            .collect();
        assert!(ks_statistic(&xs, 0.0) <= 0.5 / m as f64 + 1e-12);
        assert!(ks_statistic(&xs, 1.0) > 0.1);
    }

    #[test]
    fn report_and_csv() {
        let probs = vec![0.01, 0.05, 0.002, 0.03];
        let r = XebReport::from_probabilities(
            &probs,
            5,
            HistogramSpec {
                bins: 4,
                x_max: 2.0,
            },
        )
        .unwrap();
        assert_eq!(r.n_samples, 4);
        assert_eq!(
            r.histogram.iter().map(|b| b.count).sum::<u64>() + r.overflow,
            4
        );
        let csv = r.histogram_csv();
        assert!(csv.starts_with("bin_left,bin_right,count,model_density\n0,0.5,"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["n_qubits"], 5);
    }
}
