//! Competitive-ratio guarantees and the best-of-three scheme selector.

use serde::Serialize;

use super::{MarginalMatrix, Scheme};

/// `1 + ln q`, the guarantee of the dilate scheme.
pub fn guarantee_dilate(items: usize) -> f64 {
    assert!(items >= 1, "item count must be positive");
    1.0 + (items as f64).ln()
}

/// `1 / min_i max_k u_ki`, the guarantee of the force-open scheme. Never
/// larger than the sparsity `d`.
pub fn guarantee_force_open(m: &MarginalMatrix) -> f64 {
    m.sparsity().alpha_force
}

/// Guarantee `B(q)` of the line-partition scheme, reported for comparison
/// only: `(q+1)^2 / (4q)` for odd `q`, `(q+2)/4` for even `q`.
pub fn guarantee_js(items: usize) -> f64 {
    assert!(items >= 1, "item count must be positive");
    let q = items as f64;
    if items % 2 == 1 {
        (q + 1.0) * (q + 1.0) / (4.0 * q)
    } else {
        (q + 2.0) / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeChoice {
    /// The implemented scheme with the better guarantee.
    pub scheme: Scheme,
    /// Smallest of the three guarantees, including `B(q)`.
    pub ratio: f64,
    pub dilate: f64,
    pub force_open: f64,
    pub js: f64,
}

/// Picks dilate when `1 + ln q <= alpha_force`, force-open otherwise.
pub fn select_scheme(m: &MarginalMatrix) -> SchemeChoice {
    let q = m.items();
    let dilate = guarantee_dilate(q);
    let force_open = guarantee_force_open(m);
    let js = guarantee_js(q);
    let scheme = if dilate <= force_open {
        Scheme::Dilate
    } else {
        Scheme::ForceOpen
    };
    SchemeChoice {
        scheme,
        ratio: dilate.min(force_open).min(js),
        dilate,
        force_open,
        js,
    }
}

/// Guarantee of a runnable scheme on `m`. Independent rounding has no
/// better bound than the trivial `min(q, 1/y_k)`; `q` is returned.
pub fn guarantee(scheme: Scheme, m: &MarginalMatrix) -> f64 {
    match scheme {
        Scheme::Independent => m.items() as f64,
        Scheme::Dilate => guarantee_dilate(m.items()),
        Scheme::ForceOpen => guarantee_force_open(m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rounding::validate;

    #[test]
    fn dilate_values() {
        assert_eq!(guarantee_dilate(1), 1.0);
        assert!((guarantee_dilate(10) - 3.302585).abs() < 1e-6);
        assert!((guarantee_dilate(3) - 2.0986).abs() < 1e-4);
    }

    #[test]
    fn js_values() {
        assert_eq!(guarantee_js(1), 1.0);
        assert_eq!(guarantee_js(2), 1.0);
        assert!((guarantee_js(3) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(guarantee_js(4), 1.5);
    }

    #[test]
    fn force_open_values() {
        let det = validate(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(guarantee_force_open(&det), 1.0);
        let pairs = validate(&[[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]]).unwrap();
        assert_eq!(guarantee_force_open(&pairs), 2.0);
        let single = validate(&[[0.6, 0.4]]).unwrap();
        assert!((guarantee_force_open(&single) - 1.0 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn selector_cases() {
        // q = 100, d = 2
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| if i % 2 == 0 { vec![0.5, 0.5, 0.0] } else { vec![0.0, 0.5, 0.5] })
            .collect();
        let c = select_scheme(&validate(&rows).unwrap());
        assert_eq!(c.scheme, Scheme::ForceOpen);
        assert_eq!(c.force_open, 2.0);

        let m = validate(&[[0.55, 0.45, 0.0], [0.0, 0.45, 0.55]]).unwrap();
        let c = select_scheme(&m);
        assert!(c.force_open >= 1.7);
        assert_eq!(c.scheme, Scheme::Dilate);
        assert_eq!(c.ratio, 1.0); // B(2) = 1

        let c = select_scheme(&validate(&[[0.3, 0.7]]).unwrap());
        assert_eq!(c.scheme, Scheme::Dilate);
        assert_eq!(c.ratio, 1.0);
    }

    #[test]
    fn tie_goes_to_dilate() {
        let c = select_scheme(&validate(&[[1.0]]).unwrap());
        assert_eq!(c.dilate, c.force_open);
        assert_eq!(c.scheme, Scheme::Dilate);
    }
}
