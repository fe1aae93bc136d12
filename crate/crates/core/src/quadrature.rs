//! Adaptive Gauss–Kronrod (7, 15) quadrature for small vector-valued integrands.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_SEGMENTS: usize = 4096;

fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Result<([f64; N], f64)>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let fc = f(c)?;
    for k in 0..N {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = hl * XGK[j];
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        for k in 0..N {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0_f64;
    for k in 0..N {
        kron[k] *= hl;
        gauss[k] *= hl;
        err = err.max((kron[k] - gauss[k]).abs());
    }
    Ok((kron, err))
}

/// Integrate `f` over `[a, b]` until the estimated error is below
/// `abs_tol + rel_tol * |integral|` in every component.
pub fn integrate_vec<const N: usize, F>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<[f64; N]>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    if a == b {
        return Ok([0.0; N]);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite interval [{a}, {b}]")));
    }
    let (first, err0) = gk15(&mut f, a, b)?;
    let mut segments = vec![(a, b, first, err0)];
    loop {
        let mut total = [0.0; N];
        let mut total_err = 0.0;
        for (_, _, val, err) in &segments {
            for k in 0..N {
                total[k] += val[k];
            }
            total_err += err;
        }
        let scale = total.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if total_err <= abs_tol + rel_tol * scale {
            return Ok(total);
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:e} after {MAX_SEGMENTS} segments"
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("segments is nonempty");
        let (lo, hi, _, _) = segments.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, hi)?;
        segments.push((lo, mid, v1, e1));
        segments.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate_vec(|x| Ok([x * x, x.powi(5)]), 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v[0] - 8.0 / 3.0).abs() < 1e-14);
        assert!((v[1] - 64.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_adapts() {
        let v = integrate_vec(|x: f64| Ok([1.0 / (1e-4 + x * x)]), -1.0, 1.0, 1e-10, 1e-12).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0_f64 / 1e-2).atan();
        assert!((v[0] - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn reversed_interval_changes_sign() {
        let v = integrate_vec(|x: f64| Ok([x.exp()]), 1.0, 0.0, 1e-14, 1e-14).unwrap();
        assert!((v[0] + (1.0_f64.exp() - 1.0)).abs() < 1e-14);
    }
}
