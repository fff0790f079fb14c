//! Error measures used by the experiments.

use crate::error::{check_dim, Error, Result};
use crate::C64;

fn l1(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Mean over the grid nodes of `‖u_n − ref_n‖₁`, divided by `‖ref_0‖₁`.
///
/// This is the discrete l1 error of the coarse trajectory relative to the
/// size of the initial data. When `component` is set only that entry counts.
pub fn relative_nodal_l1(
    states: &[Vec<C64>],
    reference: &[Vec<C64>],
    component: Option<usize>,
) -> Result<f64> {
    check_dim(reference.len(), states.len())?;
    if states.is_empty() {
        return Err(Error::Internal("empty trajectory".into()));
    }
    let pick = |v: &[C64]| -> Vec<C64> {
        match component {
            Some(j) => vec![v[j]],
            None => v.to_vec(),
        }
    };
    let scale = l1(&pick(&reference[0]));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut sum = 0.0;
    for (u, r) in states.iter().zip(reference) {
        check_dim(r.len(), u.len())?;
        let d: Vec<C64> = pick(u).iter().zip(pick(r)).map(|(a, b)| a - b).collect();
        sum += l1(&d);
    }
    Ok(sum / states.len() as f64 / scale)
}

/// `|u_j − ref_j| / |ref_j|` for one component at one time.
pub fn relative_modulus(u: C64, reference: C64) -> f64 {
    let scale = reference.norm();
    let d = (u - reference).norm();
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

/// `max |u − ref| / max |ref|` over all entries.
pub fn relative_linf(u: &[C64], reference: &[C64]) -> Result<f64> {
    check_dim(reference.len(), u.len())?;
    let num = u
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let den = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(if den > 0.0 { num / den } else { num })
}

/// `‖u − ref‖₂ / ‖ref‖₂` over a sequence of scalars.
pub fn relative_l2(u: &[C64], reference: &[C64]) -> Result<f64> {
    check_dim(reference.len(), u.len())?;
    let num: f64 = u.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = reference.iter().map(|z| z.norm_sqr()).sum();
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn nodal_l1_of_scalar_series() {
        let u = vec![vec![c(1.0)], vec![c(0.5)], vec![c(0.3)]];
        let r = vec![vec![c(1.0)], vec![c(0.4)], vec![c(0.1)]];
        let e = relative_nodal_l1(&u, &r, None).unwrap();
        assert!((e - 0.1).abs() < 1e-15);
    }

    #[test]
    fn component_selection() {
        let u = vec![vec![c(1.0), c(2.0)], vec![c(1.0), c(5.0)]];
        let r = vec![vec![c(1.0), c(2.0)], vec![c(1.0), c(1.0)]];
        assert_eq!(relative_nodal_l1(&u, &r, Some(0)).unwrap(), 0.0);
        assert!((relative_nodal_l1(&u, &r, Some(1)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linf_and_modulus() {
        assert!((relative_linf(&[c(1.0), c(2.5)], &[c(1.0), c(2.0)]).unwrap() - 0.25).abs() < 1e-15);
        assert!((relative_modulus(c(1.1), c(1.0)) - 0.1).abs() < 1e-12);
        assert!(relative_linf(&[c(1.0)], &[c(1.0), c(2.0)]).is_err());
    }
}
