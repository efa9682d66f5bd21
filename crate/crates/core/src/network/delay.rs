use crate::error::{Error, Result};
use crate::scalar::Real;

/// Link (or route) volume-delay function.
///
/// All variants except [`DelayFunction::CrossAffine`] depend only on the
/// flow of their own link. Webster takes the degree of saturation directly
/// as its argument, so the caller normalises flows into `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayFunction<T> {
    /// `τ⁰ (1 + d (x / Q)^γ)`
    Bpr {
        free_flow_time: T,
        multiplier: T,
        capacity: T,
        exponent: T,
    },
    /// `intercept + slope · x`
    Affine { intercept: T, slope: T },
    /// `intercept + coefficient · x²`
    Quadratic { intercept: T, coefficient: T },
    /// Signalised intersection delay in the degree of saturation `x`.
    Webster {
        green_ratio: T,
        saturation_flow: T,
        cycle: T,
    },
    /// `intercept + own_slope · x + Σ δ_β · x_β` over the listed other links.
    CrossAffine {
        intercept: T,
        own_slope: T,
        cross_slopes: Vec<(usize, T)>,
    },
}

impl<T: Real> DelayFunction<T> {
    pub fn bpr(free_flow_time: T, multiplier: T, capacity: T, exponent: T) -> Self {
        Self::Bpr {
            free_flow_time,
            multiplier,
            capacity,
            exponent,
        }
    }

    pub fn affine(intercept: T, slope: T) -> Self {
        Self::Affine { intercept, slope }
    }

    pub fn quadratic(intercept: T, coefficient: T) -> Self {
        Self::Quadratic { intercept, coefficient }
    }

    pub fn webster(green_ratio: T, saturation_flow: T, cycle: T) -> Self {
        Self::Webster {
            green_ratio,
            saturation_flow,
            cycle,
        }
    }

    pub fn cross_affine(intercept: T, own_slope: T, cross_slopes: Vec<(usize, T)>) -> Self {
        Self::CrossAffine {
            intercept,
            own_slope,
            cross_slopes,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Bpr { .. } => "bpr",
            Self::Affine { .. } => "affine",
            Self::Quadratic { .. } => "quadratic",
            Self::Webster { .. } => "webster",
            Self::CrossAffine { .. } => "cross_affine",
        }
    }

    /// Whether the delay depends on flows other than its own argument.
    pub fn is_cross_dependent(&self) -> bool {
        matches!(self, Self::CrossAffine { cross_slopes, .. } if !cross_slopes.is_empty())
    }

    pub fn cross_slopes(&self) -> &[(usize, T)] {
        match self {
            Self::CrossAffine { cross_slopes, .. } => cross_slopes,
            _ => &[],
        }
    }

    /// Checks parameter ranges. `own` is this function's index and `width`
    /// the length of the flow vector cross terms refer to.
    pub(crate) fn validate(&self, name: &str, own: usize, width: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidNetwork(format!("`{name}`: {what}")));
        let finite = |xs: &[T]| xs.iter().all(|x| x.is_finite());
        match *self {
            Self::Bpr {
                free_flow_time,
                multiplier,
                capacity,
                exponent,
            } => {
                if !finite(&[free_flow_time, multiplier, capacity, exponent]) {
                    return bad("non-finite BPR parameter");
                }
                if free_flow_time <= T::zero() || multiplier <= T::zero() {
                    return bad("BPR free-flow time and multiplier must be positive");
                }
                if capacity <= T::zero() || exponent <= T::zero() {
                    return bad("BPR capacity and exponent must be positive");
                }
            }
            Self::Affine { intercept, slope } => {
                if !finite(&[intercept, slope]) {
                    return bad("non-finite affine parameter");
                }
                if slope <= T::zero() {
                    return bad("affine slope must be positive");
                }
            }
            Self::Quadratic { intercept, coefficient } => {
                if !finite(&[intercept, coefficient]) {
                    return bad("non-finite quadratic parameter");
                }
                if coefficient <= T::zero() {
                    return bad("quadratic coefficient must be positive");
                }
            }
            Self::Webster {
                green_ratio,
                saturation_flow,
                cycle,
            } => {
                if !finite(&[green_ratio, saturation_flow, cycle]) {
                    return bad("non-finite Webster parameter");
                }
                if green_ratio <= T::zero() || green_ratio >= T::one() {
                    return bad("Webster green ratio must lie in (0, 1)");
                }
                if saturation_flow <= T::zero() || cycle < T::zero() {
                    return bad("Webster saturation flow must be positive and cycle non-negative");
                }
            }
            Self::CrossAffine {
                intercept,
                own_slope,
                ref cross_slopes,
            } => {
                if !finite(&[intercept, own_slope]) || !cross_slopes.iter().all(|c| c.1.is_finite()) {
                    return bad("non-finite cross-affine parameter");
                }
                for &(j, _) in cross_slopes {
                    if j >= width || j == own {
                        return bad("cross slope refers to an invalid index");
                    }
                }
            }
        }
        Ok(())
    }

    fn webster_saturation(&self, name: &str, x: T) -> Result<()> {
        if x >= T::one() || !x.is_finite() {
            return Err(Error::DomainViolation {
                link: name.to_string(),
                saturation: x.as_f64(),
            });
        }
        Ok(())
    }

    /// Delay at own flow `x`; `all` is the full flow vector (used only by
    /// cross terms).
    pub fn eval(&self, name: &str, x: T, all: &[T]) -> Result<T> {
        Ok(match *self {
            Self::Bpr {
                free_flow_time,
                multiplier,
                capacity,
                exponent,
            } => free_flow_time * (T::one() + multiplier * (x / capacity).powf(exponent)),
            Self::Affine { intercept, slope } => intercept + slope * x,
            Self::Quadratic { intercept, coefficient } => intercept + coefficient * x * x,
            Self::Webster {
                green_ratio: l,
                saturation_flow: s,
                cycle: c,
            } => {
                self.webster_saturation(name, x)?;
                let two = T::lit(2.0);
                let q = T::one() - l;
                T::lit(0.9) * (c * q * q / (two * (T::one() - l * x)) + x / (two * l * s * (T::one() - x)))
            }
            Self::CrossAffine {
                intercept,
                own_slope,
                ref cross_slopes,
            } => {
                let mut v = intercept + own_slope * x;
                for &(j, d) in cross_slopes {
                    v += d * all[j];
                }
                v
            }
        })
    }

    /// Derivative with respect to the own flow.
    pub fn derivative(&self, name: &str, x: T) -> Result<T> {
        Ok(match *self {
            Self::Bpr {
                free_flow_time,
                multiplier,
                capacity,
                exponent,
            } => {
                if exponent == T::one() {
                    free_flow_time * multiplier / capacity
                } else if exponent < T::one() && x <= T::zero() {
                    return Err(Error::NotDifferentiable {
                        link: name.to_string(),
                        flow: x.as_f64(),
                    });
                } else {
                    free_flow_time * multiplier * exponent / capacity * (x / capacity).powf(exponent - T::one())
                }
            }
            Self::Affine { slope, .. } => slope,
            Self::Quadratic { coefficient, .. } => T::lit(2.0) * coefficient * x,
            Self::Webster {
                green_ratio: l,
                saturation_flow: s,
                cycle: c,
            } => {
                self.webster_saturation(name, x)?;
                let two = T::lit(2.0);
                let q = T::one() - l;
                let a = T::one() - l * x;
                let b = T::one() - x;
                T::lit(0.9) * (c * q * q * l / (two * a * a) + T::one() / (two * l * s * b * b))
            }
            Self::CrossAffine { own_slope, .. } => own_slope,
        })
    }

    /// Second derivative with respect to the own flow.
    pub fn second_derivative(&self, name: &str, x: T) -> Result<T> {
        Ok(match *self {
            Self::Bpr {
                free_flow_time,
                multiplier,
                capacity,
                exponent,
            } => {
                let two = T::lit(2.0);
                if exponent == T::one() {
                    T::zero()
                } else if exponent == two {
                    two * free_flow_time * multiplier / (capacity * capacity)
                } else if exponent < two && x <= T::zero() {
                    return Err(Error::NotDifferentiable {
                        link: name.to_string(),
                        flow: x.as_f64(),
                    });
                } else {
                    free_flow_time * multiplier * exponent * (exponent - T::one()) / (capacity * capacity)
                        * (x / capacity).powf(exponent - two)
                }
            }
            Self::Affine { .. } | Self::CrossAffine { .. } => T::zero(),
            Self::Quadratic { coefficient, .. } => T::lit(2.0) * coefficient,
            Self::Webster {
                green_ratio: l,
                saturation_flow: s,
                cycle: c,
            } => {
                self.webster_saturation(name, x)?;
                let q = T::one() - l;
                let a = T::one() - l * x;
                let b = T::one() - x;
                T::lit(0.9) * (c * q * q * l * l / (a * a * a) + T::one() / (l * s * b * b * b))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn webster_reference_value() {
        let w = DelayFunction::<f64>::webster(0.5, 1.0, 60.0);
        assert!((w.eval("w", 0.5, &[]).unwrap() - 9.9).abs() < 1e-12);
        assert!(matches!(w.eval("w", 1.0, &[]), Err(Error::DomainViolation { .. })));
        assert!(w.eval("w", 0.0, &[]).is_ok());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let fns = [
            DelayFunction::<f64>::bpr(2.0, 0.15, 40.0, 4.0),
            DelayFunction::bpr(1.0, 1.0, 10.0, 1.5),
            DelayFunction::affine(1.0, 0.3),
            DelayFunction::quadratic(5.0, 0.002),
            DelayFunction::webster(0.4, 2.0, 90.0),
        ];
        for f in &fns {
            for &x in &[0.1, 0.35, 0.7] {
                let h = 1e-5;
                let d_fd = (f.eval("", x + h, &[]).unwrap() - f.eval("", x - h, &[]).unwrap()) / (2.0 * h);
                let d = f.derivative("", x).unwrap();
                assert!((d - d_fd).abs() <= 1e-7 * (1.0 + d.abs()), "{f:?} {x}");
                let dd_fd = (f.derivative("", x + h).unwrap() - f.derivative("", x - h).unwrap()) / (2.0 * h);
                let dd = f.second_derivative("", x).unwrap();
                assert!((dd - dd_fd).abs() <= 1e-6 * (1.0 + dd.abs()), "{f:?} {x}");
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DelayFunction::affine(1.0, 0.0).validate("a", 0, 1).is_err());
        assert!(DelayFunction::webster(1.0, 1.0, 1.0).validate("w", 0, 1).is_err());
        let c = DelayFunction::cross_affine(1.0, 1.0, vec![(0, 2.0)]);
        assert!(c.validate("c", 0, 2).is_err());
        assert!(DelayFunction::cross_affine(1.0, 1.0, vec![(1, 2.0)])
            .validate("c", 0, 2)
            .is_ok());
    }
}
