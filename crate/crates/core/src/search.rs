//! Golden-section minimization on a bracketing interval.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` on `[a, b]` until the bracket is no wider than `tol`.
///
/// `f` is assumed unimodal on the interval; otherwise a local minimum is
/// returned. Every evaluated point is a candidate, so the result is never
/// worse than the best interior probe.
pub fn golden_section<F, E>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<Minimum, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if b < a {
        std::mem::swap(&mut a, &mut b);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evaluations = 2;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };

    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            if fd < best.1 {
                best = (d, fd);
            }
        }
        evaluations += 1;
    }
    Ok(Minimum { x: best.0, value: best.1, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_parabola_vertex() {
        let m = golden_section(|x| Ok::<_, Infallible>((x - 0.3141).powi(2) + 2.0), 0.0, 1.0, 1e-8).unwrap();
        assert!((m.x - 0.3141).abs() < 1e-7);
        assert!((m.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn handles_minimum_at_boundary() {
        let m = golden_section(|x| Ok::<_, Infallible>(x), 0.2, 0.4, 1e-9).unwrap();
        assert!(m.x - 0.2 < 1e-8);
    }

    #[test]
    fn propagates_errors() {
        let r = golden_section(|_| Err::<f64, _>("boom"), 0.0, 1.0, 1e-3);
        assert_eq!(r.unwrap_err(), "boom");
    }

    #[test]
    fn absolute_value_kink() {
        let m = golden_section(|x: f64| Ok::<_, Infallible>((x - 0.71).abs()), 0.5, 1.0, 1e-6).unwrap();
        assert!((m.x - 0.71).abs() < 1e-6);
    }
}
