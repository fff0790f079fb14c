//! Long fine runs of the rotating shallow water model.

use mlp_core::problems::reference_solution;
use mlp_core::spectral::{build_rswe, rswe_fields, rswe_initial_condition, RsweParams, SpectralGrid};
use mlp_core::Integrator;

#[test]
fn fine_strang_run_stays_bounded() {
    let params = RsweParams::f1();
    let grid = SpectralGrid::new(128).unwrap();
    let spec = build_rswe(&params, &grid).unwrap();
    let u0 = rswe_initial_condition(&grid);
    let t_end = params.t_end;
    let traj = reference_solution(&spec, "stability", &u0, &[0.0, t_end], 1.0 / 2000.0, Integrator::Strang, None).unwrap();
    let [u, v, h] = rswe_fields(&grid, &spec, t_end, traj.last()).unwrap();
    assert!(u.iter().chain(&v).chain(&h).all(|x| x.is_finite()));
    let max_h = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(max_h <= 10.0, "max |h| = {max_h}");
    assert!(max_h > 0.0);
}
