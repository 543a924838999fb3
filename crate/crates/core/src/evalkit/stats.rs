use super::EvalError;
use crate::canproto::SourceAddress;
use crate::scalar::Scalar;
use crate::sigfeat::FeatureDataset;

/// Welch two-sample t statistic and its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub dof: f64,
    pub p_value: f64,
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let s = G[1..]
        .iter()
        .enumerate()
        .fold(G[0], |acc, (i, &g)| acc + g / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Continued fraction of the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for aa in [
            m * (b - m) * x / ((qam + m2) * (a + m2)),
            -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2)),
        ] {
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(|T| ≥ |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_beta(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test of `a` against `b`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchTest, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::TooFewSamples { a: a.len(), b: b.len() });
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Err(EvalError::ZeroVariance);
        }
        let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(WelchTest {
            t,
            dof: (a.len() + b.len() - 2) as f64,
            p_value: 0.0,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(WelchTest {
        t,
        dof,
        p_value: student_t_two_sided(t, dof),
    })
}

/// Welch test on the first coordinate of two feature populations.
pub fn separability<T: Scalar>(pos: &[&[T]], neg: &[&[T]]) -> Result<WelchTest, EvalError> {
    let first = |rows: &[&[T]]| -> Result<Vec<f64>, EvalError> {
        rows.iter()
            .map(|r| r.first().map(|v| v.as_f64()).ok_or(EvalError::Empty))
            .collect()
    };
    welch_t(&first(pos)?, &first(neg)?)
}

/// Transmission versus non-transmission separation of one `(ECU, SA)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityEntry {
    pub ecu: usize,
    pub sa: SourceAddress,
    pub test: WelchTest,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeparabilityReport {
    pub entries: Vec<SeparabilityEntry>,
}

/// Separability of every dataset over all of its rows.
pub fn separability_report<T: Scalar>(datasets: &[FeatureDataset<T>]) -> Result<SeparabilityReport, EvalError> {
    let mut entries = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| ds.y[i]);
        let rows = |idx: &[usize]| idx.iter().map(|&i| ds.row(i)).collect::<Vec<_>>();
        entries.push(SeparabilityEntry {
            ecu: ds.ecu,
            sa: ds.sa,
            test: separability(&rows(&pos), &rows(&neg))?,
        });
    }
    Ok(SeparabilityReport { entries })
}
