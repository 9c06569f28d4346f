use super::{FuncKind, TransformError};

/// Taylor coefficients of an elementary function about a center `g0`.
///
/// These are the `F(l)` fed to the composition rule; the center is the
/// constant term of the inner series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterTransform {
    pub kind: FuncKind,
    pub center: f64,
}

impl OuterTransform {
    pub fn new(kind: FuncKind, center: f64) -> Result<Self, TransformError> {
        let needs_positive = matches!(kind, FuncKind::Ln | FuncKind::Sqrt | FuncKind::Powr(_));
        if needs_positive && (center.is_nan() || center <= 0.0) {
            return Err(TransformError::CenterDomain {
                func: kind.name(),
                center,
            });
        }
        Ok(Self { kind, center })
    }

    /// `F(0..=n)`.
    pub fn coefficients(&self, n: usize) -> Result<Vec<f64>, TransformError> {
        let g0 = self.center;
        let mut out = Vec::with_capacity(n + 1);
        match self.kind {
            FuncKind::Exp => {
                let mut term = g0.exp();
                for l in 0..=n {
                    if l > 0 {
                        term /= l as f64;
                    }
                    out.push(term);
                }
            }
            FuncKind::Ln => {
                out.push(g0.ln());
                let mut inv_pow = 1.0;
                for l in 1..=n {
                    inv_pow /= g0;
                    let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
                    out.push(sign * inv_pow / l as f64);
                }
            }
            FuncKind::Sin | FuncKind::Cos => {
                let (s, c) = g0.sin_cos();
                // derivative cycle starting at the function itself
                let cycle = if self.kind == FuncKind::Sin {
                    [s, c, -s, -c]
                } else {
                    [c, -s, -c, s]
                };
                let mut inv_fact = 1.0;
                for l in 0..=n {
                    if l > 0 {
                        inv_fact /= l as f64;
                    }
                    out.push(cycle[l % 4] * inv_fact);
                }
            }
            FuncKind::Sqrt | FuncKind::Powr(_) => {
                let r = match self.kind {
                    FuncKind::Powr(r) => r,
                    _ => 0.5,
                };
                // F(l) = C(r, l) g0^(r - l)
                let mut term = if r == 0.5 { g0.sqrt() } else { g0.powf(r) };
                out.push(term);
                for l in 1..=n {
                    term *= (r - (l - 1) as f64) / (l as f64 * g0);
                    out.push(term);
                }
            }
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(TransformError::NonFinite {
                func: self.kind.name(),
                center: g0,
            });
        }
        Ok(out)
    }
}
